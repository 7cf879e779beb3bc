//! Run configuration: a flat JSON object merged with command-line overrides.
//!
//! Precedence is flag > file > built-in default. A written manifest is itself
//! a valid config file: its `provenance` block is ignored on input.

use serde_json::{Map, Value};

use crate::diophantine::RotationNumber;
use crate::error::{Error, Result};

/// Calibrated default: smallest of the candidates below that passes every
/// lemma check and has its collision parameter inside A₀.
pub const DEFAULT_LAMBDA: f64 = 1e6;
pub const DEFAULT_LAMBDA_CANDIDATES: [f64; 4] = [1e4, 1e5, 1e6, 1e7];
pub const DEFAULT_BETA: f64 = 0.5;
pub const DEFAULT_DEPTH_TOL: f64 = 1e-12;
pub const DEFAULT_BETA_GRID: (i32, i32) = (7, 17);

const KNOWN_KEYS: [&str; 10] =
    ["omega", "lambda", "alpha", "beta", "beta_grid", "grid_n", "depth_tol", "seed", "lambda_candidates", "provenance"];

#[derive(Debug, Clone, PartialEq)]
pub enum OmegaSetting {
    Golden,
    Decimal(String),
}

impl OmegaSetting {
    pub fn rotation_number(&self) -> Result<RotationNumber> {
        match self {
            OmegaSetting::Golden => Ok(RotationNumber::golden()),
            OmegaSetting::Decimal(s) => RotationNumber::from_decimal(s, 1.0),
        }
    }

    pub fn as_config_string(&self) -> String {
        match self {
            OmegaSetting::Golden => "golden".into(),
            OmegaSetting::Decimal(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaSetting {
    Auto,
    Value(f64),
}

/// Every key optional; used both for the file layer and the flag layer.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PartialConfig {
    pub omega: Option<OmegaSetting>,
    pub lambda: Option<f64>,
    pub alpha: Option<AlphaSetting>,
    pub beta: Option<f64>,
    pub beta_grid: Option<Vec<f64>>,
    pub grid_n: Option<usize>,
    pub depth_tol: Option<f64>,
    pub seed: Option<u64>,
    pub lambda_candidates: Option<Vec<f64>>,
}

/// Fully resolved configuration. `grid_n` stays optional because its default
/// depends on the command.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub omega: OmegaSetting,
    pub lambda: f64,
    pub alpha: AlphaSetting,
    pub beta: f64,
    /// Explicit β list for sweeps; `None` means the default dyadic grid.
    pub beta_grid: Option<Vec<f64>>,
    /// Whether β came from a flag, which turns a sweep into a single-β run.
    pub beta_from_flag: bool,
    pub beta_explicit: bool,
    pub grid_n: Option<usize>,
    pub depth_tol: f64,
    pub seed: u64,
    pub lambda_candidates: Vec<f64>,
}

fn num(field: &str, v: &Value) -> Result<f64> {
    v.as_f64().ok_or_else(|| Error::config(field, format!("expected a number, got {v}")))
}

fn uint(field: &str, v: &Value) -> Result<u64> {
    v.as_u64().ok_or_else(|| Error::config(field, format!("expected a non-negative integer, got {v}")))
}

fn num_list(field: &str, v: &Value) -> Result<Vec<f64>> {
    let arr = v.as_array().ok_or_else(|| Error::config(field, format!("expected an array of numbers, got {v}")))?;
    arr.iter().map(|x| num(field, x)).collect()
}

pub fn parse_omega(text: &str) -> Result<OmegaSetting> {
    if text == "golden" {
        return Ok(OmegaSetting::Golden);
    }
    let omega = OmegaSetting::Decimal(text.to_string());
    omega.rotation_number().map_err(|e| Error::config("omega", e.to_string()))?;
    Ok(omega)
}

pub fn parse_alpha(text: &str) -> Result<AlphaSetting> {
    if text == "auto" {
        return Ok(AlphaSetting::Auto);
    }
    text.parse::<f64>()
        .map(AlphaSetting::Value)
        .map_err(|_| Error::config("alpha", format!("expected a number or \"auto\", got {text:?}")))
}

/// `"dyadic:J0:J1"` expands to `1 − 2^{−j}` for `j = J0..=J1`.
pub fn parse_beta_grid(v: &Value) -> Result<Vec<f64>> {
    if let Some(s) = v.as_str() {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::config("beta_grid", format!("expected \"dyadic:J0:J1\" or an array, got {s:?}"));
        if parts.len() != 3 || parts[0] != "dyadic" {
            return Err(bad());
        }
        let j0: i32 = parts[1].parse().map_err(|_| bad())?;
        let j1: i32 = parts[2].parse().map_err(|_| bad())?;
        if j0 < 0 || j1 < j0 || j1 > 52 {
            return Err(bad());
        }
        return Ok(dyadic_grid(j0, j1));
    }
    num_list("beta_grid", v)
}

pub fn dyadic_grid(j0: i32, j1: i32) -> Vec<f64> {
    (j0..=j1).map(|j| 1.0 - 2f64.powi(-j)).collect()
}

impl PartialConfig {
    /// Parses config text; syntax errors carry line and column.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| {
            Error::config("<file>", format!("line {} column {}: {e}", e.line(), e.column()))
        })?;
        let obj = value.as_object().ok_or_else(|| Error::config("<file>", "top level must be a JSON object"))?;
        Self::from_map(obj)
    }

    fn from_map(obj: &Map<String, Value>) -> Result<Self> {
        if let Some(k) = obj.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            return Err(Error::config(k.clone(), "unknown key"));
        }
        let mut c = PartialConfig::default();
        for (k, v) in obj {
            match k.as_str() {
                "omega" => {
                    let s = v.as_str().ok_or_else(|| Error::config("omega", "expected \"golden\" or a decimal string"))?;
                    c.omega = Some(parse_omega(s)?);
                }
                "lambda" => c.lambda = Some(num("lambda", v)?),
                "alpha" => {
                    c.alpha = Some(match v.as_str() {
                        Some(s) => parse_alpha(s)?,
                        None => AlphaSetting::Value(num("alpha", v)?),
                    })
                }
                "beta" => c.beta = Some(num("beta", v)?),
                "beta_grid" => c.beta_grid = Some(parse_beta_grid(v)?),
                "grid_n" => c.grid_n = Some(uint("grid_n", v)? as usize),
                "depth_tol" => c.depth_tol = Some(num("depth_tol", v)?),
                "seed" => c.seed = Some(uint("seed", v)?),
                "lambda_candidates" => c.lambda_candidates = Some(num_list("lambda_candidates", v)?),
                _ => {}
            }
        }
        Ok(c)
    }
}

/// Merges the flag layer over an optional file layer. A config file must name
/// λ unless the flag supplies it, so a truncated file cannot silently fall
/// back to the default system.
pub fn resolve(flags: &PartialConfig, file: Option<&PartialConfig>) -> Result<RunConfig> {
    if let Some(f) = file {
        if f.lambda.is_none() && flags.lambda.is_none() {
            return Err(Error::config("lambda", "missing from config file"));
        }
    }
    let empty = PartialConfig::default();
    let f = file.unwrap_or(&empty);
    let cfg = RunConfig {
        omega: flags.omega.clone().or_else(|| f.omega.clone()).unwrap_or(OmegaSetting::Golden),
        lambda: flags.lambda.or(f.lambda).unwrap_or(DEFAULT_LAMBDA),
        alpha: flags.alpha.or(f.alpha).unwrap_or(AlphaSetting::Auto),
        beta: flags.beta.or(f.beta).unwrap_or(DEFAULT_BETA),
        beta_grid: f.beta_grid.clone(),
        beta_from_flag: flags.beta.is_some(),
        beta_explicit: flags.beta.is_some() || f.beta.is_some(),
        grid_n: flags.grid_n.or(f.grid_n),
        depth_tol: flags.depth_tol.or(f.depth_tol).unwrap_or(DEFAULT_DEPTH_TOL),
        seed: flags.seed.or(f.seed).unwrap_or(0),
        lambda_candidates: flags
            .lambda_candidates
            .clone()
            .or_else(|| f.lambda_candidates.clone())
            .unwrap_or_else(|| DEFAULT_LAMBDA_CANDIDATES.to_vec()),
    };
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::config("lambda", format!("must be positive and finite, got {}", self.lambda)));
        }
        if let AlphaSetting::Value(a) = self.alpha {
            if !a.is_finite() {
                return Err(Error::config("alpha", "must be finite"));
            }
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::config("beta", format!("must lie in [0, 1], got {}", self.beta)));
        }
        if let Some(g) = &self.beta_grid {
            if g.is_empty() {
                return Err(Error::config("beta_grid", "must not be empty"));
            }
            if let Some(b) = g.iter().find(|b| !(0.0..=1.0).contains(*b)) {
                return Err(Error::config("beta_grid", format!("entries must lie in [0, 1], got {b}")));
            }
        }
        if self.grid_n == Some(0) {
            return Err(Error::config("grid_n", "must be at least 1"));
        }
        if !(self.depth_tol > 0.0 && self.depth_tol < 0.02) {
            return Err(Error::config("depth_tol", format!("must lie in (0, 0.02), got {}", self.depth_tol)));
        }
        if self.lambda_candidates.is_empty() {
            return Err(Error::config("lambda_candidates", "must not be empty"));
        }
        Ok(())
    }

    pub fn rotation_number(&self) -> Result<RotationNumber> {
        self.omega.rotation_number()
    }

    /// β values for a sweep: a β flag wins, then an explicit grid, then an
    /// explicit single β, then the default dyadic grid.
    pub fn sweep_betas(&self) -> Vec<f64> {
        if self.beta_from_flag {
            return vec![self.beta];
        }
        if let Some(g) = &self.beta_grid {
            return g.clone();
        }
        if self.beta_explicit {
            return vec![self.beta];
        }
        dyadic_grid(DEFAULT_BETA_GRID.0, DEFAULT_BETA_GRID.1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_without_file() {
        let c = resolve(&PartialConfig::default(), None).unwrap();
        assert_eq!(c.lambda, DEFAULT_LAMBDA);
        assert_eq!(c.alpha, AlphaSetting::Auto);
        assert_eq!(c.omega, OmegaSetting::Golden);
        assert_eq!(c.sweep_betas().len(), 11);
    }

    #[test]
    fn flag_beats_file_beats_default() {
        let file = PartialConfig::from_json_str(r#"{"lambda": 1e5, "seed": 3, "beta": 0.25}"#).unwrap();
        let flags = PartialConfig { seed: Some(9), ..Default::default() };
        let c = resolve(&flags, Some(&file)).unwrap();
        assert_eq!((c.lambda, c.seed, c.beta, c.depth_tol), (1e5, 9, 0.25, DEFAULT_DEPTH_TOL));
        assert_eq!(c.sweep_betas(), vec![0.25]);
    }

    #[test]
    fn missing_lambda_names_field() {
        let file = PartialConfig::from_json_str(r#"{"beta": 0.5}"#).unwrap();
        match resolve(&PartialConfig::default(), Some(&file)) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "lambda"),
            other => panic!("{other:?}"),
        }
        let flags = PartialConfig { lambda: Some(1e6), ..Default::default() };
        assert!(resolve(&flags, Some(&file)).is_ok());
    }

    #[test]
    fn syntax_error_reports_line() {
        let err = PartialConfig::from_json_str("{\n  \"lambda\": 1e6,\n  oops\n}").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn bad_types_and_keys_name_the_field() {
        for (text, field) in [
            (r#"{"lambda": "big"}"#, "lambda"),
            (r#"{"lambda": 1e6, "grid_n": -4}"#, "grid_n"),
            (r#"{"lambda": 1e6, "omega": "0.5x"}"#, "omega"),
            (r#"{"lambda": 1e6, "alpha": "soon"}"#, "alpha"),
            (r#"{"lambda": 1e6, "lamda": 3}"#, "lamda"),
            (r#"{"lambda": 1e6, "beta_grid": "dyadic:9"}"#, "beta_grid"),
        ] {
            match PartialConfig::from_json_str(text) {
                Err(Error::Config { field: f, .. }) => assert_eq!(f, field, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
        let file = PartialConfig::from_json_str(r#"{"lambda": -1}"#).unwrap();
        assert!(matches!(resolve(&PartialConfig::default(), Some(&file)), Err(Error::Config { .. })));
    }

    #[test]
    fn beta_grid_forms() {
        let file = PartialConfig::from_json_str(r#"{"lambda": 1e6, "beta_grid": "dyadic:10:12"}"#).unwrap();
        assert_eq!(file.beta_grid.unwrap(), vec![1.0 - 1.0 / 1024.0, 1.0 - 1.0 / 2048.0, 1.0 - 1.0 / 4096.0]);
        let file = PartialConfig::from_json_str(r#"{"lambda": 1e6, "beta_grid": [0.1, 0.2]}"#).unwrap();
        let c = resolve(&PartialConfig::default(), Some(&file)).unwrap();
        assert_eq!(c.sweep_betas(), vec![0.1, 0.2]);
        let flags = PartialConfig { beta: Some(0.3), ..Default::default() };
        assert_eq!(resolve(&flags, Some(&file)).unwrap().sweep_betas(), vec![0.3]);
    }

    #[test]
    fn decimal_omega_and_numeric_alpha() {
        let file = PartialConfig::from_json_str(r#"{"lambda": 1e6, "omega": "0.41421356237309504880", "alpha": 0.4}"#).unwrap();
        assert!(matches!(file.omega, Some(OmegaSetting::Decimal(_))));
        assert_eq!(file.alpha, Some(AlphaSetting::Value(0.4)));
        assert_eq!(parse_alpha("auto").unwrap(), AlphaSetting::Auto);
    }
}
