//! Grid verification of the computational lemmas behind the asymptotics.
//!
//! Every check evaluates the lemma's conclusion over a grid of its
//! hypotheses and reports the worst signed margin (positive = slack).
//! Grids include the hypothesis boundaries explicitly.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{compute_m_c, scale_constants};
use crate::critical::{chain_defect, sign_change_brackets, DEFAULT_DEPTH};
use crate::diophantine::Arc;
use crate::dynamics::{a0_bounds, forcing, forcing_c, quad_p, quad_p_prime, SystemParams, C_HI, C_LO};
use crate::error::{Error, Result};
use crate::search::bisect;

const GOOD_LO: f64 = 0.01;
const GOOD_HI: f64 = 0.99;
const CRITICAL_SCAN: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LemmaKind {
    /// Exhaustive grid check; failure fails the run.
    Required,
    /// Sampled orbit check; failure fails the run.
    Spot,
    /// Reported only.
    Advisory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub lemma_id: String,
    pub kind: LemmaKind,
    pub passed: bool,
    pub worst_margin: f64,
    pub worst_witness: BTreeMap<String, f64>,
    pub samples: u64,
    pub note: String,
}

impl LemmaReport {
    pub fn counts(&self) -> bool {
        self.kind != LemmaKind::Advisory
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    /// Points for one-dimensional θ grids.
    pub grid_n: usize,
    /// θ and x resolutions for two-dimensional grids.
    pub theta_n: usize,
    pub x_n: usize,
    pub betas: Vec<f64>,
    pub spot_samples: usize,
    pub seed: u64,
    pub x0_exponents: Vec<i32>,
}

impl VerifyConfig {
    /// Sizes derived from a single resolution knob: `n` points in 1-D,
    /// `n/100 × 1000` in 2-D.
    pub fn with_grid(n: usize) -> Self {
        VerifyConfig {
            grid_n: n.max(64),
            theta_n: (n / 100).max(32),
            x_n: n.clamp(32, 1000),
            betas: vec![0.0, 0.25, 0.5, 0.75, 0.9, 0.99, 0.999, 1.0],
            spot_samples: 10_000,
            seed: 0,
            x0_exponents: (3..=12).collect(),
        }
    }
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig::with_grid(1_000_000)
    }
}

/// Running minimum of margins with the first minimising witness.
#[derive(Debug, Clone)]
struct Worst {
    margin: f64,
    witness: Vec<(&'static str, f64)>,
    samples: u64,
}

impl Worst {
    fn new() -> Self {
        Worst { margin: f64::INFINITY, witness: vec![], samples: 0 }
    }

    fn see(&mut self, margin: f64, witness: impl FnOnce() -> Vec<(&'static str, f64)>) {
        self.samples += 1;
        let m = if margin.is_nan() { f64::NEG_INFINITY } else { margin };
        if m < self.margin {
            self.margin = m;
            self.witness = witness();
        }
    }

    fn merge(mut self, other: Worst) -> Worst {
        self.samples += other.samples;
        if other.margin < self.margin {
            self.margin = other.margin;
            self.witness = other.witness;
        }
        self
    }

    fn merge_all(parts: Vec<Worst>) -> Worst {
        parts.into_iter().fold(Worst::new(), Worst::merge)
    }

    fn report(self, id: &str, kind: LemmaKind, note: impl Into<String>) -> LemmaReport {
        LemmaReport {
            lemma_id: id.to_string(),
            kind,
            passed: self.margin >= 0.0,
            worst_margin: self.margin,
            worst_witness: self.witness.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            samples: self.samples,
            note: note.into(),
        }
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn wrap(t: f64) -> f64 {
    t - t.floor()
}

/// Uniform circle grid plus the given extra points.
fn circle_grid(n: usize, extra: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
    v.extend(extra.iter().map(|&t| wrap(t)));
    v
}

/// Geometry shared by the checks.
struct Setup {
    params: SystemParams,
    i0_half: f64,
    omega: f64,
}

impl Setup {
    fn new(params: &SystemParams) -> Self {
        Setup { params: params.clone(), i0_half: params.lambda.powf(-1.0 / 7.0), omega: params.omega() }
    }

    fn at_beta(&self, beta: f64) -> SystemParams {
        self.params.with_beta(beta)
    }

    fn i0(&self) -> Arc {
        Arc::centered(0.0, self.i0_half)
    }

    fn i0_plus_omega(&self) -> Arc {
        Arc::centered(self.omega, self.i0_half)
    }

    fn near_peaks(&self, theta: f64) -> bool {
        self.i0().contains(theta) || self.i0_plus_omega().contains(theta)
    }

    /// Points just outside `I₀` and `I₀ + ω`.
    fn outer_boundary(&self) -> Vec<f64> {
        let h = self.i0_half;
        vec![h.next_up(), (-h).next_down(), (self.omega + h).next_up(), (self.omega - h).next_down()]
    }

    /// Points just inside and on the edge of `I₀`, plus both peak centres.
    fn peak_points(&self) -> Vec<f64> {
        let h = self.i0_half;
        let a = self.params.alpha;
        vec![0.0, a, h, -h, self.omega + h, self.omega - h, h.next_down(), (-h).next_up()]
    }

    fn admissible_off_peak(&self, n: usize) -> Vec<f64> {
        circle_grid(n, &self.outer_boundary()).into_iter().filter(|&t| !self.near_peaks(t)).collect()
    }

    /// Dense grid over the whole circle with extra resolution on both peaks.
    fn full_circle(&self, n: usize) -> Vec<f64> {
        let mut v = circle_grid(n, &self.peak_points());
        let w = self.params.lambda.powf(-0.5) * 20.0;
        for c in [0.0, self.params.alpha] {
            v.extend(linspace(c - w, c + w, 201).into_iter().map(wrap));
        }
        v
    }
}

/// Offsets `s_-, s_+` such that `{θ ∈ I₀ + ω : c(θ) ≥ level}` around α is
/// `[α − s_-, α + s_+]`, found by bisection outward from α.
fn superlevel_extent(p: &SystemParams, level: f64, max_off: f64) -> (f64, f64) {
    let side = |dir: f64| {
        let f = |s: f64| forcing_c(p.alpha + dir * s, p) - level;
        if f(0.0) < 0.0 {
            return 0.0;
        }
        let mut hi = 1e-12_f64.min(max_off);
        while f(hi) >= 0.0 && hi < max_off {
            hi = (hi * 2.0).min(max_off);
        }
        if f(hi) >= 0.0 {
            return max_off;
        }
        let (lo, _) = bisect(f, 0.0, hi, 1e-17);
        lo
    };
    (side(-1.0), side(1.0))
}

fn level_for(p: &SystemParams, m: f64) -> f64 {
    p.peak_value() * (1.0 - 0.8f64.powf(m))
}

/// J_M: `θ ∈ I₀ + ω` with `c(θ) ≥ (3/2 + 5β/2)(1 − (4/5)^M)`.
fn in_j(setup: &Setup, p: &SystemParams, m: f64, theta: f64) -> bool {
    setup.i0_plus_omega().contains(theta) && forcing_c(theta, p) >= level_for(p, m)
}

pub fn verify_forcing_bounds(params: &SystemParams, cfg: &VerifyConfig) -> Vec<LemmaReport> {
    let s = Setup::new(params);
    let lam = params.lambda;
    let bound = lam.powf(-0.5);

    // (a) flatness outside the peak intervals, relative to λ^{-1/2}
    let thetas = s.admissible_off_peak(cfg.grid_n);
    let parts: Vec<Worst> = thetas
        .par_chunks(4096)
        .map(|chunk| {
            let mut w = Worst::new();
            for &t in chunk {
                for &b in &cfg.betas {
                    let f = forcing(t, &s.at_beta(b));
                    let worst = (f.c - 1.5).abs().max(f.dc_dtheta.abs()).max(f.dc_dbeta.abs());
                    w.see(1.0 - worst / bound, || vec![("theta", t), ("beta", b), ("value", worst)]);
                }
            }
            w
        })
        .collect();
    let mut a = Worst::merge_all(parts).report(
        "forcing_flat_outside_peaks",
        LemmaKind::Required,
        "1 - max(|c-3/2|,|dc/dtheta|,|dc/dbeta|)*sqrt(lambda) off I0 and I0+omega",
    );
    // a peak region covering the circle leaves nothing flat: too small a λ
    if thetas.is_empty() {
        a.passed = false;
        a.worst_margin = -1.0;
        a.worst_witness = BTreeMap::from([("i0_half_width".into(), s.i0_half)]);
        a.note = "I0 and I0+omega cover the circle, no off-peak theta exists".into();
    }

    // (b) super-level sets of the α-peak inside I₀ + ω
    let root = lam.powf(-0.25);
    let mut bw = Worst::new();
    let mut skipped = 0u64;
    let deltas: Vec<f64> = (10..=140).step_by(2).map(|m| 0.8f64.powi(m)).collect();
    let probe = s.i0_plus_omega();
    let probe_grid: Vec<f64> = linspace(probe.start, probe.start + probe.length, cfg.grid_n.min(100_000));
    for &b in cfg.betas.iter().filter(|&&b| b > 0.0) {
        let p = s.at_beta(b);
        for &d in &deltas {
            let level = p.peak_value() * (1.0 - d);
            // outside its hypothesis the set is all of I₀ + ω
            if level <= 1.5 + bound {
                skipped += 1;
                continue;
            }
            let allowed = d.sqrt() * root;
            let (sl, sr) = superlevel_extent(&p, level, s.i0_half);
            let reach = sl.max(sr);
            bw.see(1.0 - reach / allowed, || vec![("beta", b), ("delta", d), ("extent", reach), ("allowed", allowed)]);
            for &t in &probe_grid {
                if forcing_c(t, &p) >= level {
                    let off = (wrap(t - p.alpha + 0.5) - 0.5).abs();
                    bw.see(1.0 - off / allowed, || vec![("beta", b), ("delta", d), ("theta", wrap(t)), ("allowed", allowed)]);
                }
            }
        }
    }
    let b = bw.report(
        "peak_superlevel_containment",
        LemmaKind::Required,
        format!("1 - extent/(sqrt(delta) lambda^-1/4), delta=(4/5)^M for even M in 10..140; {skipped} (beta,delta) pairs with level <= 3/2 + lambda^-1/2 skipped"),
    );

    // (c) slope on the inner shoulders, [βλ^{1/6}, βλ]
    let (lo, hi) = a0_bounds(lam, s.omega);
    let mut cw = Worst::new();
    if lo < hi {
        let offsets = linspace(lo - s.omega, hi - s.omega, cfg.grid_n.min(200_000));
        let (floor, ceil) = (lam.powf(1.0 / 6.0), lam);
        for &b in &cfg.betas {
            let p = s.at_beta(b);
            for &o in &offsets {
                for t in [wrap(o), wrap(p.alpha + o)] {
                    let raw = forcing(t, &p).dc_dtheta;
                    // ∂θc is linear in β, so the margin is read off ∂θc/β; at
                    // β = 0 the bounds collapse to 0 ≤ 0 ≤ 0 and the limit is used
                    let d = if b == 0.0 { forcing(t, &s.at_beta(1.0)).dc_dtheta } else { raw / b };
                    let m = if b == 0.0 && raw != 0.0 {
                        f64::NEG_INFINITY
                    } else {
                        (d / floor - 1.0).min(1.0 - d / ceil)
                    };
                    cw.see(m, || vec![("theta", t), ("beta", b), ("dc_dtheta", raw)]);
                }
            }
        }
    }
    let note = if lo < hi {
        "min(dc/dtheta/(beta lambda^1/6) - 1, 1 - dc/dtheta/(beta lambda)) on A0-omega and alpha+(A0-omega)"
    } else {
        "A0 is empty at this lambda"
    };
    let c = if lo < hi {
        cw.report("shoulder_slope", LemmaKind::Required, note)
    } else {
        LemmaReport {
            lemma_id: "shoulder_slope".into(),
            kind: LemmaKind::Required,
            passed: false,
            worst_margin: lo.min(hi) - lo.max(hi),
            worst_witness: BTreeMap::from([("a0_lo".into(), lo), ("a0_hi".into(), hi)]),
            samples: 0,
            note: note.into(),
        }
    };
    vec![a, b, c]
}

/// Interval image of `[lo, hi]` under `x ↦ c·p(x)` for `c ∈ [c_lo, c_hi]`.
fn interval_step(lo: f64, hi: f64, c_lo: f64, c_hi: f64) -> (f64, f64) {
    let p_min = quad_p(lo).min(quad_p(hi));
    let p_max = if lo <= 0.5 && 0.5 <= hi { 0.25 } else { quad_p(lo).max(quad_p(hi)) };
    ((c_lo * p_min).next_down(), (c_hi * p_max).next_up())
}

pub fn verify_contraction_region(params: &SystemParams, cfg: &VerifyConfig) -> Vec<LemmaReport> {
    let s = Setup::new(params);
    let off_peak = s.admissible_off_peak(cfg.theta_n);
    let c_grid = linspace(C_LO, C_HI, cfg.x_n);
    let good_grid = linspace(GOOD_LO, GOOD_HI, cfg.x_n);

    // bullet 1: x₁ ∈ C and |c p'(x₀)| < 3/5
    let parts: Vec<Worst> = off_peak
        .par_iter()
        .map(|&t| {
            let mut w = Worst::new();
            for &b in &cfg.betas {
                let c = forcing_c(t, &s.at_beta(b));
                for &x in &c_grid {
                    let x1 = c * quad_p(x);
                    let mult = (c * quad_p_prime(x)).abs();
                    let m = ((x1 - C_LO) / 0.01).min((C_HI - x1) / 0.01).min((0.6 - mult) / 0.6);
                    w.see(m, || vec![("theta", t), ("beta", b), ("x0", x), ("x1", x1), ("multiplier", mult)]);
                }
            }
            w
        })
        .collect();
    let b1 = Worst::merge_all(parts).report(
        "contraction_in_c",
        LemmaKind::Required,
        "min((x1-C_lo)/0.01, (C_hi-x1)/0.01, (3/5-|c p'|)/(3/5)) off the peaks",
    );

    // bullet 2: interval propagation over every admissible forcing sequence
    let dense = s.admissible_off_peak(cfg.grid_n);
    let c_max = dense
        .par_iter()
        .map(|&t| cfg.betas.iter().map(|&b| forcing_c(t, &s.at_beta(b))).fold(1.5, f64::max))
        .reduce(|| 1.5, f64::max);
    let c_min = 1.5;
    let starts = linspace(GOOD_LO, GOOD_HI, cfg.x_n + 1);
    let mut w2 = Worst::new();
    for win in starts.windows(2) {
        let (mut lo, mut hi) = (win[0], win[1]);
        for _ in 0..20 {
            (lo, hi) = interval_step(lo, hi, c_min, c_max);
        }
        let m = ((lo - C_LO) / 0.01).min((C_HI - hi) / 0.01);
        w2.see(m, || vec![("x0_lo", win[0]), ("x0_hi", win[1]), ("x20_lo", lo), ("x20_hi", hi), ("c_max", c_max)]);
    }
    let n_real = realisable_twenty_step_starts(&s, cfg.theta_n);
    let b2 = w2.report(
        "twenty_steps_to_c",
        LemmaKind::Required,
        format!(
            "interval propagation over all forcing sequences with c in [3/2, max c off peaks]; \
             {n_real} grid theta0 realise 20 off-peak steps at this lambda"
        ),
    );

    // bullet 3: x₁ ∈ (1/100, 2/5)
    let parts: Vec<Worst> = off_peak
        .par_iter()
        .map(|&t| {
            let mut w = Worst::new();
            for &b in &cfg.betas {
                let c = forcing_c(t, &s.at_beta(b));
                for &x in &good_grid {
                    let x1 = c * quad_p(x);
                    let m = ((x1 - GOOD_LO) / 0.01).min((0.4 - x1) / 0.01);
                    w.see(m, || vec![("theta", t), ("beta", b), ("x0", x), ("x1", x1)]);
                }
            }
            w
        })
        .collect();
    let b3 = Worst::merge_all(parts).report(
        "one_step_off_peak",
        LemmaKind::Required,
        "min(x1-1/100, 2/5-x1)/0.01 off the peaks",
    );

    // bullet 4: x₁ ≥ (5/4)x₀ on [0, 1/10], every θ
    let all = s.full_circle(cfg.theta_n);
    let bottom = linspace(0.0, 0.1, cfg.x_n);
    let parts: Vec<Worst> = all
        .par_iter()
        .map(|&t| {
            let mut w = Worst::new();
            for &b in &cfg.betas {
                let c = forcing_c(t, &s.at_beta(b));
                for &x in &bottom {
                    let m = c * (1.0 - x) - 1.25;
                    w.see(m, || vec![("theta", t), ("beta", b), ("x0", x), ("ratio", c * (1.0 - x))]);
                }
            }
            w
        })
        .collect();
    let b4 = Worst::merge_all(parts).report(
        "ascent_from_bottom",
        LemmaKind::Required,
        "c(theta)(1-x0) - 5/4, i.e. x1/x0 - 5/4",
    );
    vec![b1, b2, b3, b4]
}

/// Grid starts whose next 20 base points avoid both peak intervals.
fn realisable_twenty_step_starts(s: &Setup, n: usize) -> usize {
    let om = &s.params.omega;
    circle_grid(n, &[]).iter().filter(|&&t| (0..20).all(|k| !s.near_peaks(om.advance(t, k)))).count()
}

pub fn verify_entry_exit(params: &SystemParams, cfg: &VerifyConfig) -> Vec<LemmaReport> {
    let s = Setup::new(params);
    let om = &params.omega;
    let all = s.full_circle(cfg.theta_n);

    // two steps after entry: x₋₁ near 0 or 1, x₀ ≥ 1/100 ⇒ x₂ ∈ [1/100, 99/100]
    let half = cfg.x_n / 2;
    let mut prev_x: Vec<f64> = (0..half).map(|i| 10f64.powf(-2.0 - 14.0 * i as f64 / half as f64)).collect();
    prev_x.extend(prev_x.clone().iter().map(|&x| 1.0 - x));
    prev_x.extend([0.01f64.next_down(), 0.99f64.next_up()]);
    let parts: Vec<Worst> = all
        .par_iter()
        .map(|&t| {
            let mut w = Worst::new();
            for &b in &cfg.betas {
                let p = s.at_beta(b);
                let (c0, c1, c2) = (forcing_c(t, &p), forcing_c(om.advance(t, 1), &p), forcing_c(om.advance(t, 2), &p));
                for &xm in &prev_x {
                    let x0 = c0 * quad_p(xm);
                    if x0 < GOOD_LO {
                        continue;
                    }
                    let x2 = c2 * quad_p(c1 * quad_p(x0));
                    let m = ((x2 - GOOD_LO) / 0.01).min((GOOD_HI - x2) / 0.01);
                    w.see(m, || vec![("theta_prev", t), ("beta", b), ("x_prev", xm), ("x0", x0), ("x2", x2)]);
                }
            }
            w
        })
        .collect();
    let tse = Worst::merge_all(parts).report(
        "two_steps_after_entry",
        LemmaKind::Required,
        "min(x2-1/100, 99/100-x2)/0.01 over entries from (0,1/100) or (99/100,1)",
    );

    // first peak does little: x₀ ∈ C, θ₀ ∈ I₀
    let h = s.i0_half.min(0.5);
    let mut in_i0 = linspace(-h, h, cfg.theta_n);
    in_i0.extend([0.0, params.lambda.powf(-0.5), -params.lambda.powf(-0.5)]);
    let c_grid = linspace(C_LO, C_HI, cfg.x_n);
    let parts: Vec<Worst> = in_i0
        .par_iter()
        .map(|&t| {
            let mut w = Worst::new();
            for &b in &cfg.betas {
                let p = s.at_beta(b);
                let (c0, c1) = (forcing_c(t, &p), forcing_c(om.advance(t, 1), &p));
                for &x in &c_grid {
                    let x1 = c0 * quad_p(x);
                    let x2 = c1 * quad_p(x1);
                    let m = ((x1 - 0.3) / 0.01).min((GOOD_HI - x1) / 0.01).min((x2 - GOOD_LO) / 0.01);
                    w.see(m, || vec![("theta", wrap(t)), ("beta", b), ("x0", x), ("x1", x1), ("x2", x2)]);
                }
            }
            w
        })
        .collect();
    let fpl = Worst::merge_all(parts).report(
        "first_peak_does_little",
        LemmaKind::Required,
        "min(x1-3/10, 99/100-x1, x2-1/100)/0.01 for theta0 in I0, x0 in C",
    );

    // time of ascent: T ≤ log_{5/4}(1/(20 x₀))
    let mut x0s: Vec<f64> = (8..=48).map(|q| 10f64.powf(-(q as f64) / 4.0)).collect();
    x0s.push(0.01f64.next_down());
    let parts: Vec<Worst> = all
        .par_iter()
        .map(|&t| {
            let mut w = Worst::new();
            for &b in &cfg.betas {
                let p = s.at_beta(b);
                for &x0 in &x0s {
                    let bound = (1.0 / (20.0 * x0)).ln() / 1.25f64.ln();
                    let mut x = x0;
                    let mut steps = 0u64;
                    while x < GOOD_LO && steps < 10_000 {
                        x = forcing_c(om.advance(t, steps as i64), &p) * quad_p(x);
                        steps += 1;
                    }
                    let m = 1.0 - steps as f64 / bound;
                    w.see(m, || vec![("theta0", t), ("beta", b), ("x0", x0), ("steps", steps as f64), ("bound", bound)]);
                }
            }
            w
        })
        .collect();
    let toa = Worst::merge_all(parts).report("time_of_ascent", LemmaKind::Required, "1 - T/log_{5/4}(1/(20 x0))");
    vec![tse, fpl, toa]
}

/// Orbit from `x₀ < 1/100` up to the first `N` with `x_{N+1} ≥ 1/100`.
struct Ascent {
    ratio: f64,
    band: f64,
    sum: f64,
}

fn ascent(theta0: f64, x0: f64, p: &SystemParams) -> Option<Ascent> {
    let om = &p.omega;
    let mut x = x0;
    let mut ratio = 1.0;
    let mut prod = 1.0;
    // S_n = Σ_{k<n} ∂θc(θ_k) p(x_k) ∏_{j=k+1}^{n} c(θ_j) p'(x_j), accumulated forward
    let mut sum = 0.0;
    for k in 0..100_000i64 {
        let f = forcing(om.advance(theta0, k), p);
        let m = f.c * quad_p_prime(x);
        ratio *= quad_p_prime(x) / (1.0 - x);
        prod *= m;
        if k > 0 {
            sum *= m;
        }
        let next = f.c * quad_p(x);
        if next >= GOOD_LO {
            return Some(Ascent { ratio, band: x0 * prod, sum });
        }
        sum += f.dc_dtheta * quad_p(x);
        x = next;
    }
    None
}

pub fn verify_appendix(params: &SystemParams, cfg: &VerifyConfig) -> Vec<LemmaReport> {
    let s = Setup::new(params);
    let thetas = s.full_circle(cfg.theta_n);
    let x0s: Vec<f64> = cfg.x0_exponents.iter().map(|&e| 10f64.powi(-e)).collect();
    let (band_lo, band_hi) = (0.8 * GOOD_LO, 4.0 * GOOD_LO);

    // per x₀: worst ratio, worst band, max |S|
    let per_x0: Vec<(Worst, Worst, f64, f64)> = x0s
        .par_iter()
        .map(|&x0| {
            let mut wr = Worst::new();
            let mut wb = Worst::new();
            let mut smax = 0.0f64;
            let mut sarg = 0.0;
            for &t in &thetas {
                for &b in &cfg.betas {
                    let p = s.at_beta(b);
                    let Some(a) = ascent(t, x0, &p) else {
                        wr.see(f64::NEG_INFINITY, || vec![("theta0", t), ("beta", b), ("x0", x0)]);
                        continue;
                    };
                    let m = ((a.ratio - 0.8) / 0.8).min(1.0 - a.ratio);
                    wr.see(m, || vec![("theta0", t), ("beta", b), ("x0", x0), ("ratio", a.ratio)]);
                    let mb = (a.band / band_lo - 1.0).min(1.0 - a.band / band_hi);
                    wb.see(mb, || vec![("theta0", t), ("beta", b), ("x0", x0), ("x0_times_product", a.band)]);
                    if a.sum.abs() > smax {
                        smax = a.sum.abs();
                        sarg = t;
                    }
                }
            }
            (wr, wb, smax, sarg)
        })
        .collect();
    let ratio = Worst::merge_all(per_x0.iter().map(|v| v.0.clone()).collect()).report(
        "multiplier_ratio",
        LemmaKind::Required,
        "min((C_N-4/5)/(4/5), 1-C_N), C_N = prod (1-2x_k)/(1-x_k) over the ascent",
    );
    let band = Worst::merge_all(per_x0.iter().map(|v| v.1.clone()).collect()).report(
        "multiplier_band",
        LemmaKind::Required,
        "x0 * prod c p' within [0.8/100, 4/100]: min(v/0.008 - 1, 1 - v/0.04)",
    );

    // sum probe: Q(x₀) = max|S|·x₀^{0.1} must decrease along decreasing x₀
    let q: Vec<f64> = x0s.iter().zip(&per_x0).map(|(&x0, v)| v.2 * x0.powf(0.1)).collect();
    let mut ws = Worst::new();
    for i in 1..q.len() {
        let m = if q[i - 1] > 0.0 { (q[i - 1] - q[i]) / q[i - 1] } else if q[i] == 0.0 { 0.0 } else { -1.0 };
        ws.see(m, || vec![("x0_prev", x0s[i - 1]), ("x0", x0s[i]), ("probe_prev", q[i - 1]), ("probe", q[i]), ("theta0", per_x0[i].3)]);
    }
    let sum = ws.report(
        "sum_products_probe",
        LemmaKind::Required,
        "relative decrease of max|S| x0^0.1 between consecutive decades of x0",
    );
    vec![ratio, band, sum]
}

/// Sampled checks of the orbit-segment lemmas: derivative bounds, the good
/// and bad return bounds, and the local product control.
pub fn verify_spot_checks(params: &SystemParams, cfg: &VerifyConfig) -> Vec<LemmaReport> {
    let s = Setup::new(params);
    let om = &params.omega;
    let lam = params.lambda;
    let n = cfg.spot_samples;

    // derivative bounds
    let log_l = lam.ln();
    let tail = (10.0 * log_l).ceil() as i64;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0001);
    let samples: Vec<(f64, f64, f64, i64)> = (0..n)
        .map(|_| (rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>(), tail + 1 + rng.gen_range(0..200)))
        .collect();
    let parts: Vec<Worst> = samples
        .par_iter()
        .map(|&(t, x0, b, big_t)| {
            let mut w = Worst::new();
            let p = s.at_beta(b);
            let mut x = x0;
            let (mut dt, mut db) = (0.0, 0.0);
            let mut mults = Vec::with_capacity(big_t as usize + 1);
            let mut small_dc = true;
            for k in 0..=big_t {
                let f = forcing(om.advance(t, k), &p);
                if k >= big_t - tail && (f.dc_dtheta.abs() >= lam.powf(-0.5) || f.dc_dbeta.abs() >= lam.powf(-0.5)) {
                    small_dc = false;
                    break;
                }
                let px = quad_p(x);
                let m = f.c * quad_p_prime(x);
                mults.push(m.abs());
                dt = f.dc_dtheta * px + m * dt;
                db = f.dc_dbeta * px + m * db;
                x = f.c * px;
            }
            if !small_dc {
                return w;
            }
            let mut suffix = 1.0;
            for (i, m) in mults.iter().enumerate().rev() {
                suffix *= m;
                let len = (mults.len() - i) as f64;
                if suffix >= 0.6f64.powf(len / 2.0) {
                    return w;
                }
            }
            let v = dt.abs().max(db.abs());
            w.see(1.0 - v / lam.powf(-0.25), || vec![("theta0", t), ("x0", x0), ("beta", b), ("T", big_t as f64), ("derivative", v)]);
            w
        })
        .collect();
    let db = Worst::merge_all(parts).report(
        "derivative_bounds",
        LemmaKind::Spot,
        format!("1 - max|dx_(T+1)| lambda^1/4 over admissible sampled segments; hypotheses need {tail} off-peak steps"),
    );

    // return bounds: sample (case, θ₀, x₀, β, M)
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0002);
    let draws: Vec<(u8, f64, f64, f64, f64)> = (0..n)
        .map(|_| (rng.gen_range(0..3u8), rng.gen::<f64>(), rng.gen_range(GOOD_LO..=GOOD_HI), rng.gen::<f64>(), rng.gen_range(10..=40) as f64))
        .collect();
    let first_good = |p: &SystemParams, t: f64, x0: f64, k_min: i64, k_max: i64| -> Option<i64> {
        let mut x = x0;
        for k in 0..k_max.max(k_min) + 1 {
            if k >= k_min && (GOOD_LO..=GOOD_HI).contains(&x) {
                return Some(k);
            }
            x = forcing_c(om.advance(t, k), p) * quad_p(x);
        }
        None
    };
    let h = s.i0_half.min(0.5);
    let parts: Vec<(Worst, Worst)> = draws
        .par_iter()
        .map(|&(case, u, x0, b, m)| {
            let mut good = Worst::new();
            let mut bad = Worst::new();
            let p = s.at_beta(b);
            let k_min = 3 - case as i64;
            // θ in I₀ + ω, then shifted back to the case's interval
            let t_j = s.omega - h + 2.0 * h * u;
            let t0 = om.advance(t_j, -(2 - case as i64));
            let in_jm = in_j(&s, &p, m, t_j);
            if !in_jm {
                let k_max = m as i64 - 7;
                let k = first_good(&p, t0, x0, k_min, k_max);
                let margin = k.map_or(-1.0, |k| (k_max - k) as f64 / k_max as f64);
                good.see(margin, || vec![("case", case as f64), ("theta0", t0), ("x0", x0), ("beta", b), ("M", m), ("k", k.map_or(-1.0, |k| k as f64))]);
            }
            if b < 1.0 && (in_jm || case == 1) {
                let mc = compute_m_c(b).clamped as i64;
                let k = first_good(&p, t0, x0, k_min, mc);
                let margin = k.map_or(-1.0, |k| (mc - k) as f64 / mc as f64);
                bad.see(margin, || vec![("case", case as f64), ("theta0", t0), ("x0", x0), ("beta", b), ("M", m), ("M_C", mc as f64), ("k", k.map_or(-1.0, |k| k as f64))]);
            }
            (good, bad)
        })
        .collect();
    let (gp, bp): (Vec<Worst>, Vec<Worst>) = parts.into_iter().unzip();
    let grb = Worst::merge_all(gp).report(
        "good_return_bound",
        LemmaKind::Spot,
        "(M-7-k)/(M-7) for the first return k to [1/100,99/100] outside J_M shifts",
    );
    let brb = Worst::merge_all(bp).report(
        "bad_return_bound",
        LemmaKind::Spot,
        "(M_C-k)/M_C for the first return k to [1/100,99/100] inside J_M shifts or I0",
    );

    // local product control with the formal constants K₀, M₀
    let scales = scale_constants(lam, om.tau, 1);
    let (k0, m0) = (scales.k[0] as f64, scales.m[0].max(1) as f64);
    let i1_half = 0.5 * scales.interval_lengths.get(1).copied().unwrap_or(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0003);
    let starts: Vec<(f64, f64, f64)> = (0..n / 10)
        .map(|_| (rng.gen::<f64>(), rng.gen_range(C_LO..=C_HI), rng.gen::<f64>()))
        .collect();
    let parts: Vec<Worst> = starts
        .par_iter()
        .map(|&(t, x0, b)| {
            let mut w = Worst::new();
            let p = s.at_beta(b);
            let i1 = Arc::centered(params.alpha, i1_half);
            let mut logs = Vec::new();
            let mut x = x0;
            for k in 0..200 {
                let th = om.advance(t, k);
                if i1.contains(th) {
                    break;
                }
                let c = forcing_c(th, &p);
                logs.push((c * quad_p_prime(x)).abs().ln());
                x = c * quad_p(x);
            }
            let rate = (1.0 - 1.0 / m0) * 0.5 * 0.6f64.ln();
            let cap = 4.0 * k0 * 4f64.ln();
            for j in 0..logs.len() {
                let mut acc = 0.0;
                for (len, l) in logs[j..].iter().enumerate() {
                    acc += l;
                    let m = cap + rate * (len + 1) as f64 - acc;
                    w.see(m, || vec![("theta0", t), ("x0", x0), ("beta", b), ("j", j as f64), ("n", (j + len + 1) as f64)]);
                }
            }
            w
        })
        .collect();
    let lcp = Worst::merge_all(parts).report(
        "local_control_products",
        LemmaKind::Advisory,
        format!("log bound minus log product of |c p'|, with K0 = {k0}, M0 = {m0}{}", if scales.vacuous { " (vacuous at this lambda)" } else { "" }),
    );
    vec![db, grb, brb, lcp]
}

/// `α ∈ A₀` with margin measured in units of the width of A₀.
fn verify_domain(params: &SystemParams) -> LemmaReport {
    let (lo, hi) = a0_bounds(params.lambda, params.omega());
    let width = hi - lo;
    let margin = if width > 0.0 { (params.alpha - lo).min(hi - params.alpha) / width } else { width };
    LemmaReport {
        lemma_id: "alpha_in_a0".into(),
        kind: LemmaKind::Required,
        passed: margin >= 0.0,
        worst_margin: margin,
        worst_witness: BTreeMap::from([("alpha".into(), params.alpha), ("a0_lo".into(), lo), ("a0_hi".into(), hi)]),
        samples: 1,
        note: "standing hypothesis of the forcing lemmas".into(),
    }
}

/// Existence of a collision parameter inside A₀. The defect is scanned on a
/// window reaching from the lower end of A₀ up to ω, so a root that sits just
/// outside A₀ shows up with a negative margin instead of as a missing root.
fn verify_critical_in_a0(params: &SystemParams) -> LemmaReport {
    let w = params.omega();
    let (lo, hi) = a0_bounds(params.lambda, w);
    let width = (hi - lo).abs().max(f64::MIN_POSITIVE);
    let scan_hi = w - 1e-3 * params.lambda.powf(-0.4);
    let brackets = sign_change_brackets(lo.min(hi), scan_hi, CRITICAL_SCAN, DEFAULT_DEPTH, params.lambda, &params.omega);
    let mut worst = Worst::new();
    let mut best: Option<(f64, f64)> = None;
    for (a, b) in brackets {
        let (l, r) = bisect(|x| chain_defect(x, DEFAULT_DEPTH, params.lambda, &params.omega), a, b, 1e-13);
        let root = 0.5 * (l + r);
        let margin = if hi > lo { (root - lo).min(hi - root) / width } else { -1.0 };
        if best.is_none_or(|(m, _)| margin > m) {
            best = Some((margin, root));
        }
    }
    match best {
        Some((margin, root)) => worst.see(margin, || vec![("alpha_c", root), ("a0_lo", lo), ("a0_hi", hi)]),
        None => worst.see(-1.0, || vec![("a0_lo", lo), ("a0_hi", hi)]),
    }
    let note = if best.is_some() { "best root of the beta = 1 chain defect, margin in units of |A0|" } else { "no sign change of the chain defect below omega" };
    worst.report("critical_value_in_a0", LemmaKind::Required, note)
}

/// Midpoint of A₀ (or of its inverted bounds when empty).
pub fn default_alpha(lambda: f64, omega: f64) -> f64 {
    let (lo, hi) = a0_bounds(lambda, omega);
    0.5 * (lo + hi)
}

pub fn verify_all(params: &SystemParams, cfg: &VerifyConfig) -> Vec<LemmaReport> {
    let mut out = vec![verify_domain(params), verify_critical_in_a0(params)];
    out.extend(verify_forcing_bounds(params, cfg));
    out.extend(verify_contraction_region(params, cfg));
    out.extend(verify_entry_exit(params, cfg));
    out.extend(verify_spot_checks(params, cfg));
    out.extend(verify_appendix(params, cfg));
    out
}

pub fn all_pass(reports: &[LemmaReport]) -> bool {
    reports.iter().filter(|r| r.counts()).all(|r| r.passed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub lambda: f64,
    pub alpha: f64,
    pub passed: bool,
    pub reports: Vec<LemmaReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub lambda: f64,
    pub rows: Vec<CalibrationRow>,
}

/// Runs the full verifier for every candidate, with α at the midpoint of A₀.
pub fn calibration_table(candidates: &[f64], template: &SystemParams, cfg: &VerifyConfig) -> Result<Vec<CalibrationRow>> {
    if candidates.is_empty() {
        return Err(Error::invalid("lambda_candidates", "empty candidate list"));
    }
    if candidates.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("lambda_candidates", "must be strictly increasing"));
    }
    let mut rows = Vec::new();
    for &lambda in candidates {
        let alpha = wrap(default_alpha(lambda, template.omega()));
        let p = SystemParams { alpha, lambda, ..template.clone() };
        p.validate()?;
        let reports = verify_all(&p, cfg);
        rows.push(CalibrationRow { lambda, alpha, passed: all_pass(&reports), reports });
    }
    Ok(rows)
}

/// Smallest passing λ together with the full margin table.
pub fn calibrate_lambda(candidates: &[f64], template: &SystemParams, cfg: &VerifyConfig) -> Result<Calibration> {
    let rows = calibration_table(candidates, template, cfg)?;
    let lambda = rows.iter().find(|r| r.passed).map(|r| r.lambda).ok_or(Error::NonePass)?;
    Ok(Calibration { lambda, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diophantine::RotationNumber;

    fn params(lambda: f64, beta: f64) -> SystemParams {
        let om = RotationNumber::golden();
        SystemParams { alpha: default_alpha(lambda, om.value()), beta, lambda, omega: om }
    }

    fn small() -> VerifyConfig {
        VerifyConfig::with_grid(20_000)
    }

    fn find<'a>(reports: &'a [LemmaReport], id: &str) -> &'a LemmaReport {
        reports.iter().find(|r| r.lemma_id == id).unwrap()
    }

    #[test]
    fn off_peak_filter_excludes_both_peaks() {
        let s = Setup::new(&params(1e6, 1.0));
        let grid = s.admissible_off_peak(50_000);
        assert!(!grid.is_empty());
        assert!(grid.iter().all(|&t| !s.i0().contains(t) && !s.i0_plus_omega().contains(t)));
        assert!(s.near_peaks(0.0) && s.near_peaks(s.omega));
    }

    #[test]
    fn j_filter_stays_inside_shifted_peak() {
        let p = params(1e6, 1.0);
        let s = Setup::new(&p);
        assert!(in_j(&s, &p, 10.0, p.alpha));
        assert!(!in_j(&s, &p, 10.0, 0.0));
        assert!(!in_j(&s, &p, 10.0, wrap(p.alpha + 0.3)));
    }

    #[test]
    fn all_lemmas_pass_at_large_lambda() {
        let reports = verify_all(&params(1e6, 1.0), &small());
        for r in &reports {
            assert!(r.passed == (r.worst_margin >= 0.0), "{}", r.lemma_id);
            if r.counts() {
                assert!(r.passed, "{} margin {}", r.lemma_id, r.worst_margin);
            }
        }
        assert!(all_pass(&reports));
    }

    #[test]
    fn small_lambda_fails_flatness() {
        let reports = verify_all(&params(100.0, 1.0), &small());
        assert!(!find(&reports, "forcing_flat_outside_peaks").passed);
        assert!(!all_pass(&reports));
    }

    #[test]
    fn shoulder_degenerates_at_beta_zero() {
        let mut cfg = small();
        cfg.betas = vec![0.0];
        let reports = verify_forcing_bounds(&params(1e6, 0.0), &cfg);
        let c = &reports[2];
        assert!(c.passed && c.samples > 0);
        assert!(c.worst_margin > 0.0);
        for b in 0..3 {
            let p = params(1e6, 0.0);
            assert_eq!(forcing(wrap(p.alpha + 1e-4 * b as f64), &p).dc_dtheta, 0.0);
        }
    }

    #[test]
    fn ascent_from_1e_4_within_bound() {
        let p = params(1e6, 1.0);
        let bound = (1.0 / (20.0 * 1e-4f64)).ln() / 1.25f64.ln();
        for i in 0..200 {
            let theta0 = i as f64 / 200.0;
            let (mut theta, mut x, mut t) = (theta0, 1e-4, 0u32);
            while x < 0.01 {
                x = forcing_c(theta, &p) * x * (1.0 - x);
                theta = p.omega.advance(theta, 1);
                t += 1;
            }
            assert!(t <= 27 && (t as f64) <= bound + 1.0, "theta0 {theta0}: T = {t}");
        }
    }

    #[test]
    fn ascent_struct_matches_plain_orbit() {
        let p = params(1e6, 0.9);
        let a = ascent(0.2, 1e-6, &p).unwrap();
        assert!((0.8..=1.0).contains(&a.ratio), "ratio {}", a.ratio);
    }

    #[test]
    fn reports_reproducible() {
        let p = params(1e6, 1.0);
        assert_eq!(verify_spot_checks(&p, &small()), verify_spot_checks(&p, &small()));
    }

    #[test]
    fn calibration_errors() {
        let t = params(1e6, 1.0);
        assert!(calibrate_lambda(&[], &t, &small()).is_err());
        assert!(calibrate_lambda(&[1e6, 1e4], &t, &small()).is_err());
        assert!(matches!(calibrate_lambda(&[10.0, 100.0], &t, &small()), Err(Error::NonePass)));
    }
}
