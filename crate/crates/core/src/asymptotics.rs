//! β → 1⁻ sweeps at α = α_c: distance to the repeller, derivative growth,
//! Lyapunov exponents, and the fits of the linear and inverse-square-root laws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attractor::{ascent_time_bound, min_distance, sample_curve, sup_derivative, DepthPolicy, Grid};
use crate::dynamics::{forcing_c, lyapunov_estimate, quad_p, SystemParams};
use crate::error::{Error, Result};

/// Default fit window: β ≥ 1 − 2⁻¹⁰.
pub const FIT_BETA_MIN: f64 = 1.0 - 1.0 / 1024.0;
/// Hard floor for any fit window.
pub const WINDOW_FLOOR: f64 = 0.99;
pub const MIN_WINDOW: usize = 4;

/// Default sweep grid `1 − 2^{-j}`, j = 7..=17.
pub fn default_beta_grid() -> Vec<f64> {
    (7..=17).map(|j| 1.0 - 2f64.powi(-j)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub tol: f64,
    /// Uniform background grid size.
    pub grid_n: usize,
    /// Log-spaced points per decade on each side of `α_c + kω`.
    pub points_per_decade: usize,
    pub seed: u64,
    pub lyapunov_starts: usize,
    pub lyapunov_steps: u64,
    pub burn_in: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            tol: 1e-12,
            grid_n: 4096,
            points_per_decade: 16,
            seed: 0,
            lyapunov_starts: 10,
            lyapunov_steps: 1_000_000,
            burn_in: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub beta: f64,
    pub one_minus_beta: f64,
    pub delta: f64,
    pub argmin_theta: f64,
    pub sup_deriv: f64,
    pub argmax_theta: f64,
    pub lyapunov: f64,
    pub depth: u64,
    pub m_c: u64,
    pub t1_bound: f64,
    /// `None` when the scale constants are vacuous at this λ.
    pub scale_n: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedRecord {
    pub beta: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub records: Vec<SweepRecord>,
    pub dropped: Vec<DroppedRecord>,
}

/// Smallest and largest offsets of the local grids around `α_c + kω`.
const LOCAL_MIN_OFFSET: f64 = 1e-11;
const LOCAL_MAX_OFFSET: f64 = 1e-2;

/// Uniform background plus log-spaced clusters at `α_c + kω` for every k up to
/// the recovery horizon `2 + ⌈T₁⌉ + 10`, where the dip and the derivative
/// maximum live.
pub fn sweep_grid(params: &SystemParams, alpha_c: f64, cfg: &SweepConfig) -> Grid {
    let mut pts: Vec<f64> = (0..cfg.grid_n).map(|i| i as f64 / cfg.grid_n as f64).collect();
    let horizon = 2 + ascent_time_bound(params.beta.min(1.0 - 1e-16)).ceil() as i64 + 10;
    let decades = (LOCAL_MAX_OFFSET / LOCAL_MIN_OFFSET).log10();
    let per_side = (decades * cfg.points_per_decade as f64).ceil() as usize;
    for k in 0..=horizon {
        let center = params.omega.advance(alpha_c, k);
        pts.push(center);
        for i in 0..=per_side {
            let off = LOCAL_MIN_OFFSET * 10f64.powf(decades * i as f64 / per_side as f64);
            pts.push(center + off);
            pts.push(center - off);
        }
    }
    Grid::Points(pts)
}

/// Maximum over `starts` seeded random orbits of the finite-time Lyapunov
/// exponent after a burn-in.
pub fn lyapunov_max(params: &SystemParams, starts: usize, steps: u64, burn_in: u64, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inits: Vec<(f64, f64)> = (0..starts).map(|_| (rng.gen::<f64>(), rng.gen_range(0.01..0.99))).collect();
    let vals: Vec<Result<f64>> = inits
        .par_iter()
        .map(|&(theta0, x0)| {
            let mut x = x0;
            for k in 0..burn_in {
                x = forcing_c(params.omega.advance(theta0, k as i64), params) * quad_p(x);
            }
            lyapunov_estimate(params.omega.advance(theta0, burn_in as i64), x, steps, params)
        })
        .collect();
    let mut best = f64::NEG_INFINITY;
    for v in vals {
        best = best.max(v?);
    }
    Ok(best)
}

pub fn sweep_record(
    beta: f64,
    alpha_c: f64,
    base: &SystemParams,
    cfg: &SweepConfig,
    record_seed: u64,
) -> Result<SweepRecord> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::invalid("beta", format!("sweep needs 0 <= beta < 1, got {beta}")));
    }
    let params = SystemParams { alpha: alpha_c, beta, ..base.clone() };
    params.validate()?;
    let grid = sweep_grid(&params, alpha_c, cfg);
    let curve = sample_curve(&grid, DepthPolicy::Auto { tol: cfg.tol }, &params);
    curve.check()?;
    let (delta, argmin_theta) = min_distance(&curve, &params);
    let (sup_deriv, argmax_theta) = sup_derivative(&curve, &params);
    let lyapunov = lyapunov_max(&params, cfg.lyapunov_starts, cfg.lyapunov_steps, cfg.burn_in, record_seed)?;
    let m_c = compute_m_c(beta).clamped;
    let scales = scale_constants(params.lambda, params.omega.tau, 8);
    Ok(SweepRecord {
        beta,
        one_minus_beta: 1.0 - beta,
        delta,
        argmin_theta,
        sup_deriv,
        argmax_theta,
        lyapunov,
        depth: curve.depth,
        m_c,
        t1_bound: ascent_time_bound(beta),
        scale_n: scale_index(beta, &scales).ok(),
    })
}

/// Records sorted by β; failures are kept with their reason.
pub fn sweep(betas: &[f64], alpha_c: f64, base: &SystemParams, cfg: &SweepConfig) -> SweepOutcome {
    let mut betas: Vec<f64> = betas.to_vec();
    betas.sort_by(f64::total_cmp);
    betas.dedup();
    let results: Vec<(f64, Result<SweepRecord>)> = betas
        .par_iter()
        .enumerate()
        .map(|(i, &b)| (b, sweep_record(b, alpha_c, base, cfg, cfg.seed.wrapping_add(i as u64))))
        .collect();
    let mut out = SweepOutcome { records: vec![], dropped: vec![] };
    for (beta, r) in results {
        match r {
            Ok(rec) => out.records.push(rec),
            Err(e) => out.dropped.push(DroppedRecord { beta, reason: e.to_string() }),
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitKind {
    LinearDistance,
    PowerDerivative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub kind: FitKind,
    pub coefficient: f64,
    pub exponent: Option<f64>,
    pub predicted_coefficient: Option<f64>,
    /// Linear fit: max relative deviation of δ from `coefficient·(1 − β)`.
    /// Power fit: max absolute deviation of the log-log line.
    pub residual: f64,
    pub window: Vec<f64>,
    /// Linear fit diagnostics: free-intercept slope and intercept, and the
    /// per-point ratios `δ/(1 − β)`.
    pub free_slope: Option<f64>,
    pub free_intercept: Option<f64>,
    pub ratios: Vec<f64>,
}

fn window(records: &[SweepRecord], beta_min: f64) -> Result<Vec<&SweepRecord>> {
    let floor = beta_min.max(WINDOW_FLOOR);
    let w: Vec<&SweepRecord> = records.iter().filter(|r| r.beta >= floor && r.beta < 1.0).collect();
    if w.len() < MIN_WINDOW {
        return Err(Error::InsufficientWindow { needed: MIN_WINDOW, got: w.len(), beta_min: floor });
    }
    Ok(w)
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// `(5/8)·c_{β=1}(α_c + ω)`.
pub fn predicted_distance_coefficient(alpha_c: &SystemParams) -> f64 {
    let p = SystemParams { beta: 1.0, ..alpha_c.clone() };
    0.625 * forcing_c(p.omega.advance(p.alpha, 1), &p)
}

pub fn fit_linear_distance(records: &[SweepRecord], beta_min: f64, predicted: f64) -> Result<FitResult> {
    let w = window(records, beta_min)?;
    let xs: Vec<f64> = w.iter().map(|r| r.one_minus_beta).collect();
    let ys: Vec<f64> = w.iter().map(|r| r.delta).collect();
    let coefficient = xs.iter().zip(&ys).map(|(x, y)| x * y).sum::<f64>() / xs.iter().map(|x| x * x).sum::<f64>();
    let residual = xs.iter().zip(&ys).map(|(x, y)| (y / (coefficient * x) - 1.0).abs()).fold(0.0, f64::max);
    let (free_slope, free_intercept) = least_squares(&xs, &ys);
    Ok(FitResult {
        kind: FitKind::LinearDistance,
        coefficient,
        exponent: None,
        predicted_coefficient: Some(predicted),
        residual,
        window: w.iter().map(|r| r.beta).collect(),
        free_slope: Some(free_slope),
        free_intercept: Some(free_intercept),
        ratios: xs.iter().zip(&ys).map(|(x, y)| y / x).collect(),
    })
}

pub fn fit_power_derivative(records: &[SweepRecord], beta_min: f64) -> Result<FitResult> {
    let w = window(records, beta_min)?;
    let xs: Vec<f64> = w.iter().map(|r| r.one_minus_beta.ln()).collect();
    let ys: Vec<f64> = w.iter().map(|r| r.sup_deriv.ln()).collect();
    let (slope, intercept) = least_squares(&xs, &ys);
    let residual = xs.iter().zip(&ys).map(|(x, y)| (y - (intercept + slope * x)).abs()).fold(0.0, f64::max);
    Ok(FitResult {
        kind: FitKind::PowerDerivative,
        coefficient: intercept.exp(),
        exponent: Some(slope),
        predicted_coefficient: None,
        residual,
        window: w.iter().map(|r| r.beta).collect(),
        free_slope: None,
        free_intercept: None,
        ratios: vec![],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McValue {
    pub raw: f64,
    pub clamped: u64,
}

/// `M_C(β) = log(1/(150 V(1 − V)))/log(5/4) + 4`, `V = 3/8 + 5β/8`,
/// rounded up and clamped to at least 10.
pub fn compute_m_c(beta: f64) -> McValue {
    let v = 0.375 + 0.625 * beta;
    let raw = (1.0 / (150.0 * v * (1.0 - v))).ln() / 1.25f64.ln() + 4.0;
    let clamped = if raw.is_finite() { raw.ceil().max(10.0) as u64 } else { u64::MAX };
    McValue { raw, clamped }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleConstants {
    pub k: Vec<u64>,
    pub m: Vec<u64>,
    /// `|I_n|`; the first entry is `|I₀| = 2λ^{-1/7}`.
    pub interval_lengths: Vec<f64>,
    pub vacuous: bool,
}

/// `K₀ = ⌊λ^{1/(28τ)}⌋`, `M₀ = ⌊λ^{1/(14τ)}⌋`, then the smallest integers in
/// `K_k ∈ [(5/4)^{K_{k−1}/(4τ)}, …]`, `M_k ∈ [(5/4)^{K_{k−1}/(2τ)}, …]` and
/// `|I_k| = (4/5)^{K_{k−1}}`, stopping once `|I_k|` underflows 1e-300.
pub fn scale_constants(lambda: f64, tau: f64, n_max: usize) -> ScaleConstants {
    let k0 = lambda.powf(1.0 / (28.0 * tau)).floor() as u64;
    let m0 = lambda.powf(1.0 / (14.0 * tau)).floor() as u64;
    let mut out = ScaleConstants { k: vec![k0], m: vec![m0], interval_lengths: vec![2.0 * lambda.powf(-1.0 / 7.0)], vacuous: k0 < 10 };
    for _ in 0..n_max {
        let prev = *out.k.last().expect("nonempty") as f64;
        let len = 0.8f64.powf(prev);
        if len < 1e-300 {
            break;
        }
        let k = 1.25f64.powf(prev / (4.0 * tau)).ceil();
        let m = 1.25f64.powf(prev / (2.0 * tau)).ceil();
        if !(k.is_finite() && m.is_finite()) || k > u64::MAX as f64 || m > u64::MAX as f64 {
            break;
        }
        out.k.push(k as u64);
        out.m.push(m as u64);
        out.interval_lengths.push(len);
    }
    out
}

/// Smallest n with `M_C(β) ≤ 2K_n − 2`.
pub fn scale_index(beta: f64, scales: &ScaleConstants) -> Result<u64> {
    let k0 = scales.k.first().copied().unwrap_or(0);
    if scales.vacuous || k0 < 10 {
        return Err(Error::VacuousScales { k0 });
    }
    let mc = compute_m_c(beta).clamped;
    scales
        .k
        .iter()
        .position(|&k| mc <= 2 * k - 2)
        .map(|n| n as u64)
        .ok_or_else(|| Error::invalid("beta", format!("M_C = {mc} exceeds every computed scale")))
}
