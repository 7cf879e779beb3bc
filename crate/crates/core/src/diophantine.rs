//! Rotation numbers: continued fractions, Diophantine constants and return
//! times of the circle rotation `θ ↦ θ + ω`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::dd::{two_prod, two_sum, DoubleDouble};
use crate::error::{Error, Result};

/// Denominator bound used when estimating κ for a new rotation number.
pub const DEFAULT_KAPPA_QMAX: u64 = 1_000_000;

/// Irrational rotation ω stored as an unevaluated `hi + lo` pair, together
/// with its continued-fraction quotients and Diophantine constants (κ, τ).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationNumber {
    pub hi: f64,
    pub lo: f64,
    pub partial_quotients: Vec<u64>,
    pub kappa: f64,
    pub tau: f64,
}

impl RotationNumber {
    /// The golden-mean conjugate (√5 − 1)/2 with τ = 1.
    pub fn golden() -> Self {
        static GOLDEN: OnceLock<RotationNumber> = OnceLock::new();
        GOLDEN
            .get_or_init(|| {
                let value = DoubleDouble::from_f64(5.0).sqrt().add_f64(-1.0).mul_f64(0.5);
                RotationNumber::from_value(value, 1.0, DEFAULT_KAPPA_QMAX)
                    .expect("golden mean is a valid rotation number")
            })
            .clone()
    }

    /// Builds a rotation number from a decimal literal such as `"0.4142135623730950488"`.
    pub fn from_decimal(text: &str, tau: f64) -> Result<Self> {
        let value = DoubleDouble::parse_decimal(text)
            .ok_or_else(|| Error::invalid("omega", format!("not a decimal literal: {text:?}")))?;
        Self::from_value(value, tau, DEFAULT_KAPPA_QMAX)
    }

    pub fn from_value(value: DoubleDouble, tau: f64, kappa_qmax: u64) -> Result<Self> {
        let v = value.to_f64();
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::invalid("omega", format!("must lie in (0, 1), got {v}")));
        }
        if !(tau >= 1.0) {
            return Err(Error::invalid("tau", format!("must be >= 1, got {tau}")));
        }
        let partial_quotients = match continued_fraction_dd(value, 64) {
            Ok(cf) => cf.quotients,
            Err(partial) => partial.quotients,
        };
        if partial_quotients.is_empty() {
            return Err(Error::invalid("omega", "no reliable continued-fraction quotient"));
        }
        let (kappa, _) = estimate_kappa_dd(value, tau, kappa_qmax);
        Ok(RotationNumber { hi: value.hi, lo: value.lo, partial_quotients, kappa, tau })
    }

    pub fn value(&self) -> f64 {
        self.hi + self.lo
    }

    pub fn as_dd(&self) -> DoubleDouble {
        DoubleDouble { hi: self.hi, lo: self.lo }
    }

    /// `frac(theta + n·ω)` with the product `n·ω` formed exactly, so the
    /// absolute error stays at a few ulps of 1 for any |n| below 2^53.
    #[inline]
    pub fn advance(&self, theta: f64, n: i64) -> f64 {
        let nf = n as f64;
        let (p, e) = two_prod(nf, self.hi);
        let p_frac = p - p.floor();
        let tail = e + nf * self.lo;
        let (s, err) = two_sum(theta, p_frac);
        let s_frac = s - s.floor();
        let mut r = s_frac + (err + tail);
        r -= r.floor();
        if r >= 1.0 {
            r = 0.0;
        }
        r
    }

    /// Distance from `q·ω` to the nearest integer.
    pub fn dist_to_integer(&self, q: u64) -> f64 {
        let f = self.advance(0.0, q as i64);
        f.min(1.0 - f)
    }
}

/// Partial quotients of `value = [0; a1, a2, ...]` with their convergents `p_k / q_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuedFraction {
    pub quotients: Vec<u64>,
    pub convergents: Vec<(u64, u64)>,
    /// The expansion ended because the remainder vanished (rational input).
    pub terminated: bool,
}

/// Expansion cut short by precision loss; carries what was reliable.
#[derive(Debug, Clone, PartialEq)]
pub struct Truncated {
    pub quotients: Vec<u64>,
    pub convergents: Vec<(u64, u64)>,
}

impl From<Truncated> for Error {
    fn from(t: Truncated) -> Self {
        Error::PrecisionExhausted { depth_reached: t.quotients.len() }
    }
}

/// Continued fraction of a double, treating the input as uncertain by half an ulp.
pub fn continued_fraction(value: f64, depth: usize) -> Result<ContinuedFraction> {
    expand(DoubleDouble::from_f64(value), value.abs() * f64::EPSILON * 0.5, depth).map_err(Error::from)
}

/// Continued fraction of a double-double value (uncertainty ~1e-32).
pub fn continued_fraction_dd(value: DoubleDouble, depth: usize) -> std::result::Result<ContinuedFraction, Truncated> {
    expand(value, value.hi.abs() * 1e-32, depth)
}

fn expand(value: DoubleDouble, initial_err: f64, depth: usize) -> std::result::Result<ContinuedFraction, Truncated> {
    let mut quotients = Vec::new();
    let mut convergents = Vec::new();
    if !(value.hi > 0.0 && value.hi < 1.0) || depth == 0 {
        return Err(Truncated { quotients, convergents });
    }
    // convergents of [0; a1, ...] start from p_{-1}/q_{-1} = 1/0 and p_0/q_0 = 0/1
    let (mut p_prev, mut p) = (1u64, 0u64);
    let (mut q_prev, mut q) = (0u64, 1u64);
    let mut x = value;
    let mut err = initial_err;
    while quotients.len() < depth {
        let r = x.recip();
        let rf = r.to_f64();
        let err_r = err / (x.hi * x.hi) + rf.abs() * 1e-31;
        let nearest = rf.round();
        let a = if (rf - nearest).abs() <= err_r && err_r < 1e-6 {
            // remainder indistinguishable from zero: the value is rational
            Some(nearest)
        } else {
            None
        };
        let quotient = match a {
            Some(n) => n,
            None => {
                let lo = (rf - err_r).floor();
                let hi = (rf + err_r).floor();
                if lo != hi {
                    return Err(Truncated { quotients, convergents });
                }
                lo
            }
        };
        if !(1.0..1.8e19).contains(&quotient) {
            return Err(Truncated { quotients, convergents });
        }
        let qi = quotient as u64;
        let next_p = qi.checked_mul(p).and_then(|v| v.checked_add(p_prev));
        let next_q = qi.checked_mul(q).and_then(|v| v.checked_add(q_prev));
        let (Some(np), Some(nq)) = (next_p, next_q) else {
            return Err(Truncated { quotients, convergents });
        };
        p_prev = p;
        p = np;
        q_prev = q;
        q = nq;
        quotients.push(qi);
        convergents.push((p, q));
        if a.is_some() {
            return Ok(ContinuedFraction { quotients, convergents, terminated: true });
        }
        x = r.sub(DoubleDouble::from_f64(quotient));
        err = err_r;
        if x.hi <= 0.0 {
            return Ok(ContinuedFraction { quotients, convergents, terminated: true });
        }
    }
    Ok(ContinuedFraction { quotients, convergents, terminated: false })
}

/// Empirical κ: `min_{1 ≤ q ≤ q_max} q^τ · dist(qω, ℤ)`.
pub fn estimate_kappa(omega: f64, tau: f64, q_max: u64) -> f64 {
    estimate_kappa_dd(DoubleDouble::from_f64(omega), tau, q_max).0
}

/// As [`estimate_kappa`], returning the minimizing denominator as well.
pub fn estimate_kappa_dd(omega: DoubleDouble, tau: f64, q_max: u64) -> (f64, u64) {
    let rot = RotationNumber { hi: omega.hi, lo: omega.lo, partial_quotients: Vec::new(), kappa: 0.0, tau };
    let mut best = (f64::INFINITY, 1);
    for q in 1..=q_max.max(1) {
        let v = (q as f64).powf(tau) * rot.dist_to_integer(q);
        if v < best.0 {
            best = (v, q);
            if v == 0.0 {
                break;
            }
        }
    }
    best
}

/// Lower bound `⌊(κ/ε)^{1/τ}⌋` on the return time of an interval of length ε.
pub fn min_return_time(epsilon: f64, kappa: f64, tau: f64) -> u64 {
    let n = (kappa / epsilon).powf(1.0 / tau);
    if n.is_finite() && n > 0.0 {
        n.floor() as u64
    } else {
        0
    }
}

/// Closed arc `[start, start + length]` on the circle ℝ/ℤ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub start: f64,
    pub length: f64,
}

impl Arc {
    pub fn new(start: f64, length: f64) -> Self {
        Arc { start: start - start.floor(), length }
    }

    pub fn centered(center: f64, half_width: f64) -> Self {
        Arc::new(center - half_width, 2.0 * half_width)
    }

    pub fn is_empty(&self) -> bool {
        !(self.length >= 0.0)
    }

    pub fn covers_circle(&self) -> bool {
        self.length >= 1.0
    }

    pub fn contains(&self, theta: f64) -> bool {
        if self.is_empty() {
            return false;
        }
        if self.covers_circle() {
            return true;
        }
        let d = theta - self.start;
        d - d.floor() <= self.length
    }

    pub fn shifted(&self, by: f64) -> Self {
        Arc::new(self.start + by, self.length)
    }

    pub fn center(&self) -> f64 {
        let c = self.start + 0.5 * self.length;
        c - c.floor()
    }
}

/// First return `m ∈ [1, n_max]` of `arc` to itself under rotation by ω,
/// i.e. the smallest `m` with `(arc + mω) ∩ arc ≠ ∅`, or `None`.
pub fn verify_no_return(arc: Arc, n_max: u64, omega: &RotationNumber) -> Option<u64> {
    if arc.is_empty() {
        return None;
    }
    (1..=n_max).find(|&m| arc.covers_circle() || omega.dist_to_integer(m) <= arc.length)
}
