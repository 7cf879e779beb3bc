//! The six front-end commands. Each reads a resolved [`RunConfig`], writes its
//! artifacts and a manifest into one output directory and reports an exit code.

use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Map, Value};

use crate::asymptotics::{fit_linear_distance, fit_power_derivative, predicted_distance_coefficient, sweep, SweepConfig, FIT_BETA_MIN};
use crate::attractor::{sample_curve, DepthPolicy, Grid};
use crate::config::{AlphaSetting, RunConfig};
use crate::critical::{find_alpha_c, verify_chain, DEFAULT_DEPTH, DEFAULT_TOL_ALPHA};
use crate::diophantine::RotationNumber;
use crate::dynamics::{a0_bounds, forcing, SystemParams};
use crate::error::{Error, Result};
use crate::output::{fmt_f64, to_value, OutDir, Table};
use crate::verify::{all_pass, calibration_table, default_alpha, verify_all, LemmaReport, VerifyConfig};

pub const DEFAULT_CURVE_GRID: usize = 4096;
pub const DEFAULT_VERIFY_GRID: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Attractor,
    Profile,
    FindAlpha,
    Sweep,
    Verify,
    Calibrate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Attractor => "attractor",
            Command::Profile => "profile",
            Command::FindAlpha => "find-alpha",
            Command::Sweep => "sweep",
            Command::Verify => "verify",
            Command::Calibrate => "calibrate",
        }
    }

    fn default_grid(self) -> usize {
        match self {
            Command::Verify | Command::Calibrate => DEFAULT_VERIFY_GRID,
            _ => DEFAULT_CURVE_GRID,
        }
    }
}

/// Files written and the process exit code (0 success, 1 a failed check).
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub exit_code: i32,
    pub message: String,
}

/// Values filled in while a command runs, echoed into the manifest.
#[derive(Default)]
struct Resolved {
    alpha: Option<f64>,
    alpha_c: Option<f64>,
    grid_n: Option<usize>,
    beta_grid: Option<Vec<f64>>,
    lambda_candidates: Option<Vec<f64>>,
}

fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn params_for(cfg: &RunConfig, omega: &RotationNumber, alpha: f64, beta: f64) -> Result<SystemParams> {
    SystemParams::new(alpha, beta, cfg.lambda, omega.clone())
}

/// α from the config, or the collision parameter when set to `auto`.
fn alpha_or_critical(cfg: &RunConfig, omega: &RotationNumber, res: &mut Resolved) -> Result<f64> {
    let a = match cfg.alpha {
        AlphaSetting::Value(a) => a,
        AlphaSetting::Auto => {
            let r = find_alpha_c(cfg.lambda, omega, DEFAULT_TOL_ALPHA, DEFAULT_DEPTH)?;
            res.alpha_c = Some(r.alpha_c);
            r.alpha_c
        }
    };
    res.alpha = Some(a);
    Ok(a)
}

fn manifest(cmd: Command, cfg: &RunConfig, omega: &RotationNumber, res: &Resolved, started: u64, files: &[PathBuf]) -> Value {
    let mut m = Map::new();
    m.insert("omega".into(), json!(cfg.omega.as_config_string()));
    m.insert("lambda".into(), json!(cfg.lambda));
    match res.alpha {
        Some(a) => m.insert("alpha".into(), json!(a)),
        None => m.insert("alpha".into(), json!("auto")),
    };
    m.insert("beta".into(), json!(cfg.beta));
    if let Some(g) = res.beta_grid.as_ref().or(cfg.beta_grid.as_ref()) {
        m.insert("beta_grid".into(), json!(g));
    }
    if let Some(n) = res.grid_n.or(cfg.grid_n) {
        m.insert("grid_n".into(), json!(n));
    }
    m.insert("depth_tol".into(), json!(cfg.depth_tol));
    m.insert("seed".into(), json!(cfg.seed));
    if let Some(c) = &res.lambda_candidates {
        m.insert("lambda_candidates".into(), json!(c));
    }
    let names: Vec<String> =
        files.iter().filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned())).collect();
    m.insert(
        "provenance".into(),
        json!({
            "command": cmd.name(),
            "tool_version": env!("CARGO_PKG_VERSION"),
            "started_unix": started,
            "finished_unix": now_unix(),
            "outputs": names,
            "alpha_c": res.alpha_c,
            "rotation_number": {
                "hi": omega.hi,
                "lo": omega.lo,
                "kappa": omega.kappa,
                "tau": omega.tau,
                "partial_quotients": omega.partial_quotients,
            },
        }),
    );
    Value::Object(m)
}

pub fn run(cmd: Command, cfg: &RunConfig, out: &OutDir) -> Result<Outcome> {
    let started = now_unix();
    let omega = cfg.rotation_number()?;
    let mut res = Resolved::default();
    let (mut files, exit_code, message) = match cmd {
        Command::Attractor => attractor(cfg, &omega, out, &mut res)?,
        Command::Profile => profile(cfg, &omega, out, &mut res)?,
        Command::FindAlpha => find_alpha(cfg, &omega, out)?,
        Command::Sweep => sweep_cmd(cfg, &omega, out, &mut res)?,
        Command::Verify => verify_cmd(cfg, &omega, out, &mut res)?,
        Command::Calibrate => calibrate(cfg, &omega, out, &mut res)?,
    };
    let name = "manifest.json";
    let mut listed = files.clone();
    listed.push(out.path().join(name));
    files.push(out.write_json(name, &manifest(cmd, cfg, &omega, &res, started, &listed))?);
    Ok(Outcome { files, exit_code, message })
}

type Produced = (Vec<PathBuf>, i32, String);

fn attractor(cfg: &RunConfig, omega: &RotationNumber, out: &OutDir, res: &mut Resolved) -> Result<Produced> {
    let alpha = alpha_or_critical(cfg, omega, res)?;
    let p = params_for(cfg, omega, alpha, cfg.beta)?;
    let n = cfg.grid_n.unwrap_or(Command::Attractor.default_grid());
    res.grid_n = Some(n);
    let curve = sample_curve(&Grid::Uniform { count: n, offset: 0.0 }, DepthPolicy::Auto { tol: cfg.depth_tol }, &p);
    let mut t = Table::new(&["theta", "psi", "dpsi_dtheta", "dpsi_dbeta", "depth", "residual", "converged"]);
    for i in 0..curve.len() {
        t.row([
            fmt_f64(curve.thetas[i]),
            fmt_f64(curve.psi[i]),
            fmt_f64(curve.dpsi_dtheta[i]),
            fmt_f64(curve.dpsi_dbeta[i]),
            curve.depth.to_string(),
            fmt_f64(curve.residual[i]),
            curve.converged[i].to_string(),
        ]);
    }
    let f = out.write("curve.csv", &t.into_bytes())?;
    let unconverged = curve.converged.iter().filter(|&&c| !c).count();
    Ok((vec![f], 0, format!("{} points at depth {}, {unconverged} not converged", curve.len(), curve.depth)))
}

fn profile(cfg: &RunConfig, omega: &RotationNumber, out: &OutDir, res: &mut Resolved) -> Result<Produced> {
    let alpha = alpha_or_critical(cfg, omega, res)?;
    let p = params_for(cfg, omega, alpha, cfg.beta)?;
    let n = cfg.grid_n.unwrap_or(Command::Profile.default_grid());
    res.grid_n = Some(n);
    let mut t = Table::new(&["theta", "c", "dc_dtheta", "dc_dbeta"]);
    for theta in (Grid::Uniform { count: n, offset: 0.0 }).thetas() {
        let f = forcing(theta, &p);
        t.row([fmt_f64(theta), fmt_f64(f.c), fmt_f64(f.dc_dtheta), fmt_f64(f.dc_dbeta)]);
    }
    let f = out.write("profile.csv", &t.into_bytes())?;
    Ok((vec![f], 0, format!("{n} points")))
}

fn find_alpha(cfg: &RunConfig, omega: &RotationNumber, out: &OutDir) -> Result<Produced> {
    let r = find_alpha_c(cfg.lambda, omega, DEFAULT_TOL_ALPHA, DEFAULT_DEPTH)?;
    let (chain_check, code, msg) = match verify_chain(&r, omega) {
        Ok(rep) => (json!({"passed": true, "report": to_value(&rep)}), 0, format!("alpha_c = {}", fmt_f64(r.alpha_c))),
        Err(e) => (json!({"passed": false, "error": e.to_string()}), 1, e.to_string()),
    };
    let doc = json!({
        "alpha_c": r.alpha_c,
        "defect": r.defect,
        "chain_values": [r.chain_values.0, r.chain_values.1, r.chain_values.2],
        "bracket_width": r.bracket_width,
        "depth": r.depth,
        "lambda": r.lambda,
        "a0": [r.a0.0, r.a0.1],
        "scan_points": r.scan_points,
        "sign_changes": r.sign_changes,
        "chain_check": chain_check,
    });
    let f = out.write_json("alpha_c.json", &doc)?;
    Ok((vec![f], code, msg))
}

fn sweep_cmd(cfg: &RunConfig, omega: &RotationNumber, out: &OutDir, res: &mut Resolved) -> Result<Produced> {
    let alpha = alpha_or_critical(cfg, omega, res)?;
    let base = params_for(cfg, omega, alpha, 1.0)?;
    let n = cfg.grid_n.unwrap_or(Command::Sweep.default_grid());
    res.grid_n = Some(n);
    let betas = cfg.sweep_betas();
    res.beta_grid = Some(betas.clone());
    let scfg = SweepConfig { tol: cfg.depth_tol, grid_n: n, seed: cfg.seed, ..SweepConfig::default() };
    let outcome = sweep(&betas, alpha, &base, &scfg);

    let mut t = Table::new(&[
        "beta", "one_minus_beta", "delta", "argmin_theta", "sup_deriv", "argmax_theta", "lyapunov", "depth", "M_C", "T1_bound", "scale_n",
    ]);
    for r in &outcome.records {
        t.row([
            fmt_f64(r.beta),
            fmt_f64(r.one_minus_beta),
            fmt_f64(r.delta),
            fmt_f64(r.argmin_theta),
            fmt_f64(r.sup_deriv),
            fmt_f64(r.argmax_theta),
            fmt_f64(r.lyapunov),
            r.depth.to_string(),
            r.m_c.to_string(),
            fmt_f64(r.t1_bound),
            r.scale_n.map(|n| n.to_string()).unwrap_or_default(),
        ]);
    }
    let f1 = out.write("sweep.csv", &t.into_bytes())?;

    let predicted = predicted_distance_coefficient(&base);
    let fit_json = |r: Result<_>| match r {
        Ok(fit) => to_value(&fit),
        Err(e) => json!({"error": e.to_string()}),
    };
    let fits = json!({
        "alpha": alpha,
        "beta_min": FIT_BETA_MIN,
        "predicted_distance_coefficient": predicted,
        "linear_distance": fit_json(fit_linear_distance(&outcome.records, FIT_BETA_MIN, predicted)),
        "power_derivative": fit_json(fit_power_derivative(&outcome.records, FIT_BETA_MIN)),
        "dropped": to_value(&outcome.dropped),
    });
    let f2 = out.write_json("fits.json", &fits)?;
    let msg = format!("{} records, {} dropped", outcome.records.len(), outcome.dropped.len());
    Ok((vec![f1, f2], 0, msg))
}

fn verify_config(cfg: &RunConfig, cmd: Command, res: &mut Resolved) -> VerifyConfig {
    let n = cfg.grid_n.unwrap_or(cmd.default_grid());
    res.grid_n = Some(n);
    VerifyConfig { seed: cfg.seed, ..VerifyConfig::with_grid(n) }
}

fn lemma_table(rows: &[(Option<f64>, &LemmaReport)]) -> Vec<u8> {
    let with_lambda = rows.first().is_some_and(|(l, _)| l.is_some());
    let mut header = vec!["lemma_id", "kind", "passed", "worst_margin", "samples", "worst_witness", "note"];
    if with_lambda {
        header.insert(0, "lambda");
    }
    let mut t = Table::new(&header);
    for (lambda, r) in rows {
        let kind = to_value(&r.kind).as_str().unwrap_or_default().to_string();
        let witness = serde_json::to_string(&to_value(&r.worst_witness)).expect("serializable");
        let mut fields = vec![
            r.lemma_id.clone(),
            kind,
            r.passed.to_string(),
            fmt_f64(r.worst_margin),
            r.samples.to_string(),
            witness,
            r.note.clone(),
        ];
        if let Some(l) = lambda {
            fields.insert(0, fmt_f64(*l));
        }
        t.row(fields);
    }
    t.into_bytes()
}

fn failing(reports: &[LemmaReport]) -> Vec<String> {
    reports.iter().filter(|r| r.counts() && !r.passed).map(|r| r.lemma_id.clone()).collect()
}

fn verify_cmd(cfg: &RunConfig, omega: &RotationNumber, out: &OutDir, res: &mut Resolved) -> Result<Produced> {
    let alpha = match cfg.alpha {
        AlphaSetting::Value(a) => a,
        AlphaSetting::Auto => default_alpha(cfg.lambda, omega.value()).rem_euclid(1.0),
    };
    res.alpha = Some(alpha);
    let p = params_for(cfg, omega, alpha, cfg.beta)?;
    let vcfg = verify_config(cfg, Command::Verify, res);
    let reports = verify_all(&p, &vcfg);
    let rows: Vec<(Option<f64>, &LemmaReport)> = reports.iter().map(|r| (None, r)).collect();
    let f1 = out.write("lemmas.csv", &lemma_table(&rows))?;
    let passed = all_pass(&reports);
    let fails = failing(&reports);
    let (lo, hi) = a0_bounds(cfg.lambda, omega.value());
    let summary = json!({
        "passed": passed,
        "failing": fails,
        "lambda": cfg.lambda,
        "alpha": alpha,
        "a0": [lo, hi],
        "grid_n": vcfg.grid_n,
        "lemmas": to_value(&reports),
    });
    let f2 = out.write_json("summary.json", &summary)?;
    let msg = if passed { "all lemma checks passed".to_string() } else { format!("failing: {}", fails.join(", ")) };
    Ok((vec![f1, f2], if passed { 0 } else { 1 }, msg))
}

fn calibrate(cfg: &RunConfig, omega: &RotationNumber, out: &OutDir, res: &mut Resolved) -> Result<Produced> {
    let template = params_for(cfg, omega, 0.0, cfg.beta)?;
    let vcfg = verify_config(cfg, Command::Calibrate, res);
    res.lambda_candidates = Some(cfg.lambda_candidates.clone());
    let table = calibration_table(&cfg.lambda_candidates, &template, &vcfg)?;
    let rows: Vec<(Option<f64>, &LemmaReport)> =
        table.iter().flat_map(|row| row.reports.iter().map(move |r| (Some(row.lambda), r))).collect();
    let f1 = out.write("margins.csv", &lemma_table(&rows))?;
    let chosen = table.iter().find(|r| r.passed).map(|r| r.lambda);
    let doc = json!({
        "lambda": chosen,
        "candidates": cfg.lambda_candidates,
        "grid_n": vcfg.grid_n,
        "rows": table.iter().map(|r| json!({
            "lambda": r.lambda,
            "alpha": r.alpha,
            "passed": r.passed,
            "failing": failing(&r.reports),
        })).collect::<Vec<_>>(),
    });
    let f2 = out.write_json("calibration.json", &doc)?;
    match chosen {
        Some(l) => Ok((vec![f1, f2], 0, format!("calibrated lambda = {}", fmt_f64(l)))),
        None => Ok((vec![f1, f2], 1, Error::NonePass.to_string())),
    }
}
