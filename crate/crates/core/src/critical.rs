//! Location of the collision parameter α_c: at β = 1 the attractor value at
//! θ = α_c is 1/2, which the peak `c(α_c) = 4` sends to 1 and then to 0.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attractor::{min_distance, pullback_value, sample_curve, DepthPolicy, Grid};
use crate::diophantine::RotationNumber;
use crate::dynamics::{a0_bounds, forcing_c, quad_p, SystemParams};
use crate::error::{Error, Result};
use crate::search::bisect;

pub const DEFAULT_DEPTH: u64 = 400;
pub const DEFAULT_TOL_ALPHA: f64 = 1e-14;
pub const SCAN_START: usize = 4096;
pub const SCAN_CAP: usize = 1 << 20;

/// Chain tolerances: `|ψ(α_c) − 1/2|`, `1 − ψ(α_c + ω)`, `ψ(α_c + 2ω)`.
pub const CHAIN_TOL: (f64, f64, f64) = (1e-10, 1e-6, 4e-6);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalResult {
    pub alpha_c: f64,
    pub defect: f64,
    pub chain_values: (f64, f64, f64),
    pub bracket_width: f64,
    pub depth: u64,
    pub lambda: f64,
    pub a0: (f64, f64),
    pub scan_points: usize,
    pub sign_changes: usize,
}

fn beta_one(alpha: f64, lambda: f64, omega: &RotationNumber) -> SystemParams {
    SystemParams { alpha, beta: 1.0, lambda, omega: omega.clone() }
}

/// `ψ̃(α) − 1/2`, the finite-depth β = 1 attractor value at θ = α.
pub fn chain_defect(alpha: f64, depth: u64, lambda: f64, omega: &RotationNumber) -> f64 {
    pullback_value(alpha, depth, &beta_one(alpha, lambda, omega)).psi - 0.5
}

/// `(ψ(α), ψ(α + ω), ψ(α + 2ω))` at β = 1, the last two by applying the map
/// to the pulled-back value so that the functional equation holds exactly.
pub fn chain_values(alpha: f64, depth: u64, lambda: f64, omega: &RotationNumber) -> (f64, f64, f64) {
    let p = beta_one(alpha, lambda, omega);
    let x0 = pullback_value(alpha, depth, &p).psi;
    let x1 = forcing_c(alpha, &p) * quad_p(x0);
    let x2 = forcing_c(omega.advance(alpha, 1), &p) * quad_p(x1);
    (x0, x1, x2)
}

/// Subintervals of a uniform `n`-cell grid on `[lo, hi]` across which the
/// chain defect changes sign.
pub fn sign_change_brackets(lo: f64, hi: f64, n: usize, depth: u64, lambda: f64, omega: &RotationNumber) -> Vec<(f64, f64)> {
    let alphas: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let defects: Vec<f64> = alphas.par_iter().map(|&a| chain_defect(a, depth, lambda, omega)).collect();
    (0..n)
        .filter(|&i| defects[i] == 0.0 || (defects[i] < 0.0) != (defects[i + 1] < 0.0))
        .map(|i| (alphas[i], alphas[i + 1]))
        .collect()
}

/// Scans A₀ for sign changes of the chain defect, bisects each and keeps the
/// root with the smallest `ψ(α + 2ω)`.
pub fn find_alpha_c(lambda: f64, omega: &RotationNumber, tol_alpha: f64, depth: u64) -> Result<CriticalResult> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid("lambda", format!("must be positive, got {lambda}")));
    }
    if !(tol_alpha >= 1e-14) {
        return Err(Error::invalid("tol_alpha", format!("must be at least 1e-14, got {tol_alpha}")));
    }
    if depth == 0 {
        return Err(Error::invalid("depth", "must be at least 1"));
    }
    let (lo, hi) = a0_bounds(lambda, omega.value());
    if lo >= hi {
        return Err(Error::NoSignChange { points: 0 });
    }
    let mut n = SCAN_START;
    loop {
        let brackets = sign_change_brackets(lo, hi, n, depth, lambda, omega);
        if !brackets.is_empty() {
            let candidates: Vec<CriticalResult> = brackets
                .par_iter()
                .map(|&(a, b)| refine_root(a, b, lambda, omega, tol_alpha, depth, (lo, hi), n + 1, brackets.len()))
                .collect();
            return Ok(candidates
                .into_iter()
                .min_by(|x, y| x.chain_values.2.abs().total_cmp(&y.chain_values.2.abs()))
                .expect("nonempty"));
        }
        if n >= SCAN_CAP {
            return Err(Error::NoSignChange { points: n + 1 });
        }
        n *= 2;
    }
}

#[allow(clippy::too_many_arguments)]
fn refine_root(
    a: f64,
    b: f64,
    lambda: f64,
    omega: &RotationNumber,
    tol_alpha: f64,
    depth: u64,
    a0: (f64, f64),
    scan_points: usize,
    sign_changes: usize,
) -> CriticalResult {
    let (l, r) = bisect(|x| chain_defect(x, depth, lambda, omega), a, b, tol_alpha);
    let (dl, dr) = (chain_defect(l, depth, lambda, omega), chain_defect(r, depth, lambda, omega));
    let alpha_c = if dl.abs() <= dr.abs() { l } else { r };
    let chain = chain_values(alpha_c, depth, lambda, omega);
    CriticalResult {
        alpha_c,
        defect: (chain.0 - 0.5).abs(),
        chain_values: chain,
        bracket_width: r - l,
        depth,
        lambda,
        a0,
        scan_points,
        sign_changes,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub chain_values: (f64, f64, f64),
    pub check_depth: u64,
    pub in_a0: bool,
    pub peak_value: f64,
    pub gap_beta: f64,
    pub gap_delta: f64,
}

/// Recomputes the chain at twice the search depth and checks that the
/// attractor stays off the repeller at β = 1 − 10⁻³.
pub fn verify_chain(result: &CriticalResult, omega: &RotationNumber) -> Result<ChainReport> {
    let depth = 2 * result.depth;
    let chain = chain_values(result.alpha_c, depth, result.lambda, omega);
    let p = beta_one(result.alpha_c, result.lambda, omega);
    let peak = forcing_c(result.alpha_c, &p);
    let in_a0 = result.a0.0 <= result.alpha_c && result.alpha_c <= result.a0.1;
    let gap_beta = 1.0 - 1e-3;
    let q = p.with_beta(gap_beta);
    let curve = sample_curve(&Grid::Uniform { count: 4096, offset: 0.0 }, DepthPolicy::Auto { tol: 1e-12 }, &q);
    let (gap_delta, _) = min_distance(&curve, &q);
    let report = ChainReport { chain_values: chain, check_depth: depth, in_a0, peak_value: peak, gap_beta, gap_delta };
    if !in_a0 {
        return Err(Error::ChainBroken(format!("alpha_c = {} outside A0 {:?}", result.alpha_c, result.a0)));
    }
    if (chain.0 - 0.5).abs() > CHAIN_TOL.0 {
        return Err(Error::ChainBroken(format!("|psi(alpha_c) - 1/2| = {:e}", (chain.0 - 0.5).abs())));
    }
    if 1.0 - chain.1 > CHAIN_TOL.1 {
        return Err(Error::ChainBroken(format!("psi(alpha_c + omega) = {}", chain.1)));
    }
    if chain.2 > CHAIN_TOL.2 {
        return Err(Error::ChainBroken(format!("psi(alpha_c + 2 omega) = {:e}", chain.2)));
    }
    if !(gap_delta > 0.0) {
        return Err(Error::ChainBroken(format!("delta = {gap_delta} at beta = {gap_beta}")));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden() -> RotationNumber {
        RotationNumber::golden()
    }

    #[test]
    fn alpha_c_lies_in_a0_with_tight_chain() {
        let om = golden();
        let r = find_alpha_c(1e6, &om, DEFAULT_TOL_ALPHA, DEFAULT_DEPTH).unwrap();
        assert!(r.a0.0 <= r.alpha_c && r.alpha_c <= r.a0.1);
        assert!(r.defect <= CHAIN_TOL.0, "defect {}", r.defect);
        assert!(1.0 - r.chain_values.1 <= CHAIN_TOL.1);
        assert!(r.chain_values.2 <= CHAIN_TOL.2);
        assert!(r.bracket_width <= 1e-14);
        let report = verify_chain(&r, &om).unwrap();
        assert!(report.gap_delta > 0.0);
        assert!((report.peak_value - 4.0).abs() < 1e-15);
    }

    #[test]
    fn alpha_c_stable_under_tolerance() {
        let om = golden();
        let a = find_alpha_c(1e6, &om, 1e-12, DEFAULT_DEPTH).unwrap().alpha_c;
        let b = find_alpha_c(1e6, &om, 1e-13, DEFAULT_DEPTH).unwrap().alpha_c;
        assert!((a - b).abs() < 1e-11);
    }

    #[test]
    fn perturbed_alpha_breaks_chain() {
        let om = golden();
        let r = find_alpha_c(1e6, &om, DEFAULT_TOL_ALPHA, DEFAULT_DEPTH).unwrap();
        let (_, _, x2) = chain_values(r.alpha_c + 1e-4, DEFAULT_DEPTH, 1e6, &om);
        assert!(x2 > 1e3 * CHAIN_TOL.2, "psi(alpha + 2 omega) = {x2}");
    }

    #[test]
    fn empty_a0_has_no_sign_change() {
        assert!(matches!(find_alpha_c(100.0, &golden(), DEFAULT_TOL_ALPHA, DEFAULT_DEPTH), Err(Error::NoSignChange { .. })));
    }

    #[test]
    fn rejects_bad_inputs() {
        let om = golden();
        assert!(find_alpha_c(-1.0, &om, 1e-12, 10).is_err());
        assert!(find_alpha_c(1e6, &om, 1e-16, 10).is_err());
        assert!(find_alpha_c(1e6, &om, 1e-12, 0).is_err());
    }

    #[test]
    fn broken_chain_is_reported() {
        let om = golden();
        let mut r = find_alpha_c(1e6, &om, DEFAULT_TOL_ALPHA, DEFAULT_DEPTH).unwrap();
        r.alpha_c += 1e-4;
        assert!(matches!(verify_chain(&r, &om), Err(Error::ChainBroken(_))));
    }
}
