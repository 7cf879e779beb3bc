//! The forced quadratic skew product
//! `(θ, x) ↦ (θ + ω, c(θ)·x(1 − x))` and its tangent lift.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::diophantine::{Arc, RotationNumber};
use crate::error::{Error, Result};

/// Terms with `|1 − 2x| < DEGENERATE_MULTIPLIER` are dropped from Lyapunov sums.
pub const DEGENERATE_MULTIPLIER: f64 = 1e-300;
/// Largest tolerated fraction of dropped Lyapunov terms.
pub const MAX_DROPPED_FRACTION: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub omega: RotationNumber,
}

impl SystemParams {
    pub fn new(alpha: f64, beta: f64, lambda: f64, omega: RotationNumber) -> Result<Self> {
        let p = SystemParams { alpha, beta, lambda, omega };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::invalid("alpha", format!("must lie in [0, 1), got {}", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::invalid("beta", format!("must lie in [0, 1], got {}", self.beta)));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid("lambda", format!("must be positive, got {}", self.lambda)));
        }
        Ok(())
    }

    pub fn with_beta(&self, beta: f64) -> Self {
        SystemParams { beta, ..self.clone() }
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        SystemParams { alpha, ..self.clone() }
    }

    pub fn omega(&self) -> f64 {
        self.omega.value()
    }

    /// Peak height `3/2 + 5β/2`.
    pub fn peak_value(&self) -> f64 {
        1.5 + 2.5 * self.beta
    }

    /// Whether α lies in `A₀ = [ω − λ^{-2/5}/2, ω − 2λ^{-2/3}]`.
    pub fn alpha_in_a0(&self) -> bool {
        let (lo, hi) = a0_bounds(self.lambda, self.omega());
        lo <= self.alpha && self.alpha <= hi
    }

    pub fn regions(&self) -> RegionConstants {
        RegionConstants::new(self.lambda, self.omega.tau)
    }
}

/// Bounds of `A₀`; empty (lo > hi) when λ is too small.
pub fn a0_bounds(lambda: f64, omega: f64) -> (f64, f64) {
    (omega - 0.5 * lambda.powf(-0.4), omega - 2.0 * lambda.powf(-2.0 / 3.0))
}

/// A fiber point with its θ- and β-derivatives along the orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftedState {
    pub theta: f64,
    pub x: f64,
    pub dx_dtheta: f64,
    pub dx_dbeta: f64,
}

impl LiftedState {
    pub fn new(theta: f64, x: f64) -> Self {
        LiftedState { theta, x, dx_dtheta: 0.0, dx_dbeta: 0.0 }
    }
}

/// The peak interval `I₀`, the contracting region `C` and the integer
/// scales `M₀`, `K₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionConstants {
    pub i0: Arc,
    pub c_lo: f64,
    pub c_hi: f64,
    pub m0: u64,
    pub k0: u64,
}

pub const C_LO: f64 = 1.0 / 3.0 - 0.01;
pub const C_HI: f64 = 1.0 / 3.0 + 0.01;

impl RegionConstants {
    pub fn new(lambda: f64, tau: f64) -> Self {
        RegionConstants {
            i0: Arc::centered(0.0, lambda.powf(-1.0 / 7.0)),
            c_lo: C_LO,
            c_hi: C_HI,
            m0: lambda.powf(1.0 / (14.0 * tau)).floor() as u64,
            k0: lambda.powf(1.0 / (28.0 * tau)).floor() as u64,
        }
    }

    pub fn in_c(&self, x: f64) -> bool {
        self.c_lo <= x && x <= self.c_hi
    }

    /// θ ∈ I₀ ∪ (I₀ + ω).
    pub fn near_peaks(&self, theta: f64, omega: f64) -> bool {
        self.i0.contains(theta) || self.i0.shifted(omega).contains(theta)
    }
}

#[inline]
pub fn quad_p(x: f64) -> f64 {
    x * (1.0 - x)
}

#[inline]
pub fn quad_p_prime(x: f64) -> f64 {
    1.0 - 2.0 * x
}

/// Signed representative of `t` in `[-1/2, 1/2]` and the parity of the shift.
#[inline]
fn centered(t: f64) -> (f64, bool) {
    let k = t.round();
    (t - k, (k as i64) & 1 == 1)
}

/// `g(θ, α) = cos 2π(θ − α/2) − cos πα`, evaluated as
/// `−2 sin(πθ) sin(π(θ − α))` so both zeros are exact.
#[inline]
pub fn peak_profile_g(theta: f64, alpha: f64) -> f64 {
    let (t, odd_t) = centered(theta);
    let (u, odd_u) = centered(theta - alpha);
    let g = -2.0 * (PI * t).sin() * (PI * u).sin();
    if odd_t != odd_u {
        -g
    } else {
        g
    }
}

#[inline]
pub fn peak_profile_g_dtheta(theta: f64, alpha: f64) -> f64 {
    let (s, odd) = centered(2.0 * theta - alpha);
    let v = -2.0 * PI * (PI * s).sin();
    if odd {
        -v
    } else {
        v
    }
}

/// Forcing value and its analytic θ- and β-partials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Forcing {
    pub c: f64,
    pub dc_dtheta: f64,
    pub dc_dbeta: f64,
}

#[inline]
pub fn forcing(theta: f64, p: &SystemParams) -> Forcing {
    let g = peak_profile_g(theta, p.alpha);
    let den = 1.0 + p.lambda * g * g;
    let bump = 2.5 / den;
    let dg = peak_profile_g_dtheta(theta, p.alpha);
    Forcing {
        c: 1.5 + p.beta * bump,
        dc_dtheta: -5.0 * p.beta * p.lambda * g * dg / (den * den),
        dc_dbeta: bump,
    }
}

#[inline]
pub fn forcing_c(theta: f64, p: &SystemParams) -> f64 {
    let g = peak_profile_g(theta, p.alpha);
    1.5 + p.beta * 2.5 / (1.0 + p.lambda * g * g)
}

pub fn forcing_c_dtheta(theta: f64, p: &SystemParams) -> f64 {
    forcing(theta, p).dc_dtheta
}

pub fn forcing_c_dbeta(theta: f64, p: &SystemParams) -> f64 {
    forcing(theta, p).dc_dbeta
}

/// Fiber and derivative update at a given base point; θ is not advanced.
#[inline]
pub fn lift_fiber(theta: f64, x: f64, dx_dtheta: f64, dx_dbeta: f64, p: &SystemParams) -> (f64, f64, f64) {
    let f = forcing(theta, p);
    let px = quad_p(x);
    let m = f.c * quad_p_prime(x);
    (f.c * px, f.dc_dtheta * px + m * dx_dtheta, f.dc_dbeta * px + m * dx_dbeta)
}

pub fn step(state: LiftedState, p: &SystemParams) -> LiftedState {
    let (x, dt, db) = lift_fiber(state.theta, state.x, state.dx_dtheta, state.dx_dbeta, p);
    LiftedState { theta: p.omega.advance(state.theta, 1), x, dx_dtheta: dt, dx_dbeta: db }
}

/// n-fold step with `θ_k = frac(θ₀ + kω)` recomputed from θ₀ at every step.
pub fn iterate(state: LiftedState, n: u64, p: &SystemParams) -> LiftedState {
    let (mut x, mut dt, mut db) = (state.x, state.dx_dtheta, state.dx_dbeta);
    for k in 0..n {
        let theta = p.omega.advance(state.theta, k as i64);
        (x, dt, db) = lift_fiber(theta, x, dt, db, p);
    }
    LiftedState { theta: p.omega.advance(state.theta, n as i64), x, dx_dtheta: dt, dx_dbeta: db }
}

/// Fiber-only orbit `x_0, x_1, ...` (no derivatives), starting at `θ₀`.
pub fn fiber_orbit(theta0: f64, x0: f64, n: usize, p: &SystemParams) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut x = x0;
    out.push(x);
    for k in 0..n {
        x = forcing_c(p.omega.advance(theta0, k as i64), p) * quad_p(x);
        out.push(x);
    }
    out
}

/// Finite-time fiber Lyapunov exponent `(1/n) Σ_{k<n} log|c(θ_k)(1 − 2x_k)|`.
pub fn lyapunov_estimate(theta0: f64, x0: f64, n: u64, p: &SystemParams) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("n", "need at least one step"));
    }
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut dropped = 0u64;
    let mut x = x0;
    for k in 0..n {
        let c = forcing_c(p.omega.advance(theta0, k as i64), p);
        let d = quad_p_prime(x);
        if d.abs() < DEGENERATE_MULTIPLIER {
            dropped += 1;
        } else {
            // Neumaier summation
            let term = (c * d).abs().ln();
            let t = sum + term;
            if sum.abs() >= term.abs() {
                comp += (sum - t) + term;
            } else {
                comp += (term - t) + sum;
            }
            sum = t;
        }
        x = c * quad_p(x);
    }
    if dropped as f64 > MAX_DROPPED_FRACTION * n as f64 {
        return Err(Error::DegenerateOrbit { dropped, total: n });
    }
    let kept = n - dropped;
    Ok((sum + comp) / kept as f64)
}
