//! Attracting invariant curve ψ^β by pullback iteration.
//!
//! The value at θ is obtained by iterating two seeds in the contracting
//! region `C` forward from `θ − d·ω`; fiber contraction makes the end points
//! agree, and the tangent lift carries `∂θψ` and `∂βψ` along.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{forcing, quad_p, quad_p_prime, SystemParams};
use crate::error::{Error, Result};
use crate::search::golden_section_min;

/// Pullback seeds `1/3 ∓ 1/100`, the end points of `C`.
pub const SEED_LO: f64 = 1.0 / 3.0 - 0.01;
pub const SEED_HI: f64 = 1.0 / 3.0 + 0.01;

/// Bracket width at which extremum refinement stops.
pub const REFINE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PullbackValue {
    pub psi: f64,
    pub dpsi_dtheta: f64,
    pub dpsi_dbeta: f64,
    /// Seed separation `|x_d − y_d|` after the pullback.
    pub residual: f64,
}

impl PullbackValue {
    /// Converged means residual within `tol` and β < 1 (at β = 1 the
    /// attractor is not a continuous curve, so finite-depth values are
    /// never certified).
    pub fn is_converged(&self, tol: f64, beta: f64) -> bool {
        beta < 1.0 && self.residual <= tol
    }

    pub fn check(&self, tol: f64, beta: f64) -> Result<()> {
        if self.is_converged(tol, beta) {
            Ok(())
        } else {
            Err(Error::NotConverged { residual: self.residual, tol })
        }
    }
}

/// Pullback of arbitrary seeds; the residual is the separation of the
/// extreme seeds, tracked through the factored difference
/// `x' − y' = c·(x − y)·(1 − x − y)` so it stays accurate below one ulp.
pub fn pullback_from_seeds(theta: f64, depth: u64, params: &SystemParams, seed_a: f64, seed_b: f64) -> PullbackValue {
    let omega = &params.omega;
    let (mut xa, mut ta, mut ba) = (seed_a, 0.0, 0.0);
    let (mut xb, mut tb, mut bb) = (seed_b, 0.0, 0.0);
    let mut diff = seed_b - seed_a;
    let d = depth as i64;
    for k in 0..d {
        let th = omega.advance(theta, k - d);
        let f = forcing(th, params);
        let (pa, pb) = (quad_p(xa), quad_p(xb));
        let (ma, mb) = (f.c * quad_p_prime(xa), f.c * quad_p_prime(xb));
        diff *= f.c * (1.0 - xa - xb);
        ta = f.dc_dtheta * pa + ma * ta;
        ba = f.dc_dbeta * pa + ma * ba;
        tb = f.dc_dtheta * pb + mb * tb;
        bb = f.dc_dbeta * pb + mb * bb;
        xa = f.c * pa;
        xb = f.c * pb;
    }
    PullbackValue {
        psi: 0.5 * (xa + xb),
        dpsi_dtheta: 0.5 * (ta + tb),
        dpsi_dbeta: 0.5 * (ba + bb),
        residual: diff.abs(),
    }
}

pub fn pullback_value(theta: f64, depth: u64, params: &SystemParams) -> PullbackValue {
    pullback_from_seeds(theta, depth, params, SEED_LO, SEED_HI)
}

/// Worst-case time to climb from the bottom back above 1/100, as a real
/// bound `log_{5/4}(1/(10(1 − β)))`, clamped at zero.
pub fn ascent_time_bound(beta: f64) -> f64 {
    let gap = 1.0 - beta;
    if gap <= 0.0 {
        return f64::INFINITY;
    }
    (1.0 / (10.0 * gap)).ln().max(0.0) / 1.25f64.ln()
}

/// Smallest depth with `0.02·(3/5)^{d/2} ≤ tol`, plus the ascent-time
/// allowance for excursions near the repeller.
pub fn choose_depth(beta: f64, tol: f64) -> u64 {
    base_depth(tol) + ascent_time_bound(beta).ceil() as u64
}

pub fn base_depth(tol: f64) -> u64 {
    let d = 2.0 * (0.02 / tol).ln() / (5.0f64 / 3.0).ln();
    d.ceil().max(1.0) as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DepthPolicy {
    Fixed { depth: u64 },
    Auto { tol: f64 },
}

impl DepthPolicy {
    pub fn depth(&self, beta: f64) -> u64 {
        match *self {
            DepthPolicy::Fixed { depth } => depth,
            DepthPolicy::Auto { tol } => choose_depth(beta.min(1.0 - f64::EPSILON), tol),
        }
    }

    pub fn tol(&self) -> f64 {
        match *self {
            DepthPolicy::Fixed { depth } => 0.02 * (0.6f64).powf(depth as f64 / 2.0),
            DepthPolicy::Auto { tol } => tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    Uniform { count: usize, offset: f64 },
    Points(Vec<f64>),
}

impl Grid {
    pub fn thetas(&self) -> Vec<f64> {
        match self {
            Grid::Uniform { count, offset } => {
                (0..*count).map(|i| ((i as f64 + offset) / *count as f64).rem_euclid(1.0)).collect()
            }
            Grid::Points(v) => {
                let mut v: Vec<f64> = v.iter().map(|t| t.rem_euclid(1.0)).collect();
                v.sort_by(f64::total_cmp);
                v.dedup();
                v
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSample {
    pub thetas: Vec<f64>,
    pub psi: Vec<f64>,
    pub dpsi_dtheta: Vec<f64>,
    pub dpsi_dbeta: Vec<f64>,
    pub depth: u64,
    pub tol: f64,
    pub residual: Vec<f64>,
    pub converged: Vec<bool>,
    pub params: SystemParams,
}

impl CurveSample {
    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|&c| c)
    }

    /// `NotConverged` carrying the worst residual, if any point failed.
    pub fn check(&self) -> Result<()> {
        if self.all_converged() {
            return Ok(());
        }
        let worst = self.residual.iter().cloned().fold(0.0, f64::max);
        Err(Error::NotConverged { residual: worst, tol: self.tol })
    }
}

/// Per-point pullback on a sorted grid; bitwise independent of the thread count.
pub fn sample_curve(grid: &Grid, policy: DepthPolicy, params: &SystemParams) -> CurveSample {
    let thetas = grid.thetas();
    let depth = policy.depth(params.beta);
    let tol = policy.tol();
    let values: Vec<PullbackValue> = thetas.par_iter().map(|&t| pullback_value(t, depth, params)).collect();
    CurveSample {
        psi: values.iter().map(|v| v.psi).collect(),
        dpsi_dtheta: values.iter().map(|v| v.dpsi_dtheta).collect(),
        dpsi_dbeta: values.iter().map(|v| v.dpsi_dbeta).collect(),
        residual: values.iter().map(|v| v.residual).collect(),
        converged: values.iter().map(|v| v.is_converged(tol, params.beta)).collect(),
        thetas,
        depth,
        tol,
        params: params.clone(),
    }
}

/// Neighbouring grid points of index `i` on the circle, as an unwrapped bracket.
fn bracket_around(thetas: &[f64], i: usize) -> (f64, f64) {
    let n = thetas.len();
    if n == 1 {
        return (thetas[0] - 0.5, thetas[0] + 0.5);
    }
    let t = thetas[i];
    let prev = if i == 0 { thetas[n - 1] - 1.0 } else { thetas[i - 1] };
    let next = if i + 1 == n { thetas[0] + 1.0 } else { thetas[i + 1] };
    (prev.min(t), next.max(t))
}

/// Minimum of ψ: grid minimum refined by golden section on the bracketing cell.
pub fn min_distance(curve: &CurveSample, params: &SystemParams) -> (f64, f64) {
    let Some(i) = argmin(&curve.psi) else {
        return (f64::NAN, f64::NAN);
    };
    let (a, b) = bracket_around(&curve.thetas, i);
    let depth = curve.depth;
    let (t, v) = golden_section_min(|t| pullback_value(t.rem_euclid(1.0), depth, params).psi, a, b, REFINE_TOL);
    if v < curve.psi[i] {
        (v, t.rem_euclid(1.0))
    } else {
        (curve.psi[i], curve.thetas[i])
    }
}

/// Maximum of `|∂θψ|`, refined the same way as [`min_distance`].
pub fn sup_derivative(curve: &CurveSample, params: &SystemParams) -> (f64, f64) {
    let abs: Vec<f64> = curve.dpsi_dtheta.iter().map(|d| -d.abs()).collect();
    let Some(i) = argmin(&abs) else {
        return (f64::NAN, f64::NAN);
    };
    let (a, b) = bracket_around(&curve.thetas, i);
    let depth = curve.depth;
    let (t, v) =
        golden_section_min(|t| -pullback_value(t.rem_euclid(1.0), depth, params).dpsi_dtheta.abs(), a, b, REFINE_TOL);
    if -v > -abs[i] {
        (-v, t.rem_euclid(1.0))
    } else {
        (-abs[i], curve.thetas[i])
    }
}

fn argmin(v: &[f64]) -> Option<usize> {
    v.iter()
        .enumerate()
        .filter(|(_, x)| !x.is_nan())
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
}

/// `|ψ(θ + ω) − c(θ)·p(ψ(θ))|` with both values pulled back at the same depth.
pub fn invariance_defect(theta: f64, depth: u64, params: &SystemParams) -> (f64, f64) {
    let here = pullback_value(theta, depth, params);
    let next = pullback_value(params.omega.advance(theta, 1), depth, params);
    let mapped = crate::dynamics::forcing_c(theta, params) * quad_p(here.psi);
    ((next.psi - mapped).abs(), here.residual.max(next.residual))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diophantine::RotationNumber;

    fn params(alpha: f64, beta: f64, lambda: f64) -> SystemParams {
        SystemParams::new(alpha, beta, lambda, RotationNumber::golden()).unwrap()
    }

    #[test]
    fn depth_formula() {
        assert_eq!(base_depth(1e-12), 93);
        assert_eq!(choose_depth(0.0, 1e-12), 93);
        assert_eq!(choose_depth(0.999, 1e-12), 93 + 21);
        let mut last = 0;
        for j in 1..20 {
            let d = choose_depth(1.0 - 2f64.powi(-j), 1e-12);
            assert!(d >= last);
            last = d;
        }
        assert!(choose_depth(0.5, 1e-14) >= choose_depth(0.5, 1e-12));
    }

    #[test]
    fn trivial_curve() {
        let p = params(0.6175, 0.0, 1e6);
        for &t in &[0.0, 0.3, 0.77] {
            let v = pullback_value(t, 200, &p);
            assert!((v.psi - 1.0 / 3.0).abs() < 1e-15);
            assert_eq!(v.dpsi_dtheta, 0.0);
            assert!(v.residual <= 0.6f64.powi(100) * 0.02);
        }
    }

    #[test]
    fn far_from_peaks_stays_in_c() {
        let p = params(0.6175, 0.5, 1e6);
        let r = p.regions();
        let mut checked = 0;
        for i in 0..200 {
            let t = i as f64 / 200.0;
            let prev = p.omega.advance(t, -1);
            if r.near_peaks(prev, p.omega()) {
                continue;
            }
            let v = pullback_value(t, 150, &p);
            assert!(r.in_c(v.psi), "θ = {t}: ψ = {}", v.psi);
            checked += 1;
        }
        assert!(checked > 50);
    }

    #[test]
    fn residual_decays_with_depth() {
        let p = params(0.6175, 0.5, 1e6);
        for &t in &[0.1, 0.45, 0.8] {
            let r1 = pullback_value(t, 40, &p).residual;
            let r2 = pullback_value(t, 80, &p).residual;
            // factor (3/5)^{d/4} between depth d/2 and d, with slack for peak passages
            assert!(r2 <= r1 * 0.6f64.powf(80.0 / 4.0) * 1e3, "{r1} {r2}");
        }
    }

    #[test]
    fn curve_is_grid_independent() {
        let p = params(0.6175, 0.7, 1e6);
        let a = sample_curve(&Grid::Uniform { count: 64, offset: 0.0 }, DepthPolicy::Auto { tol: 1e-12 }, &p);
        let b = sample_curve(&Grid::Uniform { count: 128, offset: 0.0 }, DepthPolicy::Auto { tol: 1e-12 }, &p);
        for i in 0..64 {
            assert_eq!(a.psi[i], b.psi[2 * i]);
        }
        assert!(a.all_converged());
    }

    #[test]
    fn beta_one_is_never_converged() {
        let p = params(0.6175, 1.0, 1e6);
        let c = sample_curve(&Grid::Uniform { count: 16, offset: 0.5 }, DepthPolicy::Fixed { depth: 300 }, &p);
        assert!(!c.all_converged());
        assert!(matches!(c.check(), Err(Error::NotConverged { .. })));
    }

    #[test]
    fn seed_independence() {
        let p = params(0.6175, 0.9, 1e6);
        let tol = 1e-12;
        let depth = choose_depth(0.9, tol);
        for i in 0..50 {
            let t = i as f64 / 50.0 + 0.003;
            let a = pullback_from_seeds(t, depth, &p, 0.1, 0.1).psi;
            let b = pullback_from_seeds(t, depth, &p, 1.0 / 3.0, 1.0 / 3.0).psi;
            let c = pullback_from_seeds(t, depth, &p, 0.9, 0.9).psi;
            assert!((a - b).abs() <= 10.0 * tol && (b - c).abs() <= 10.0 * tol);
        }
    }

    #[test]
    fn functional_equation_holds() {
        let p = params(0.6175, 0.8, 1e6);
        let depth = choose_depth(0.8, 1e-13);
        for i in 0..100 {
            let t = i as f64 / 100.0;
            let (defect, residual) = invariance_defect(t, depth, &p);
            assert!(defect <= 10.0 * residual + 4.0 * f64::EPSILON, "θ = {t}: {defect} vs {residual}");
        }
    }

    #[test]
    fn trivial_extremes() {
        let p = params(0.6175, 0.0, 1e6);
        let c = sample_curve(&Grid::Uniform { count: 32, offset: 0.0 }, DepthPolicy::Auto { tol: 1e-12 }, &p);
        let (d, _) = min_distance(&c, &p);
        assert!((d - 1.0 / 3.0).abs() < 1e-15);
        let (s, _) = sup_derivative(&c, &p);
        assert_eq!(s, 0.0);
    }
}
