use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tclab::commands::{run, Command};
use tclab::config::{parse_alpha, resolve, AlphaSetting, PartialConfig};
use tclab::output::OutDir;
use tclab::Error;

#[derive(Parser, Debug)]
#[command(name = "tclab", version, about = "Torus-collision laboratory for the forced quadratic map")]
struct Cli {
    #[command(subcommand)]
    command: Sub,

    /// Flat JSON config file (a previous manifest.json also works).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; nothing is written outside it.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    #[arg(long, global = true)]
    beta: Option<f64>,
    /// A number or `auto`.
    #[arg(long, global = true, value_parser = parse_alpha_arg)]
    alpha: Option<AlphaSetting>,
    #[arg(long, global = true)]
    grid: Option<usize>,
    #[arg(long = "depth-tol", global = true)]
    depth_tol: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; overrides TCLAB_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Sub {
    /// Attracting curve with derivatives (curve.csv).
    Attractor,
    /// Forcing profile c(θ) and its derivatives (profile.csv).
    Profile,
    /// Collision parameter α_c with chain certification (alpha_c.json).
    FindAlpha,
    /// Distance and derivative laws over β (sweep.csv, fits.json).
    Sweep,
    /// Lemma margin table (lemmas.csv, summary.json).
    Verify,
    /// Smallest λ candidate passing every lemma check (margins.csv, calibration.json).
    Calibrate,
}

fn parse_alpha_arg(s: &str) -> Result<AlphaSetting, String> {
    parse_alpha(s).map_err(|e| e.to_string())
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, Error> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var("TCLAB_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| Error::config("TCLAB_THREADS", format!("expected a positive integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

fn main_inner(cli: Cli) -> Result<i32, Error> {
    let cmd = match cli.command {
        Sub::Attractor => Command::Attractor,
        Sub::Profile => Command::Profile,
        Sub::FindAlpha => Command::FindAlpha,
        Sub::Sweep => Command::Sweep,
        Sub::Verify => Command::Verify,
        Sub::Calibrate => Command::Calibrate,
    };
    let file = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Io { path: path.display().to_string(), reason: e.to_string() })?;
            Some(PartialConfig::from_json_str(&text)?)
        }
        None => None,
    };
    let flags = PartialConfig {
        lambda: cli.lambda,
        beta: cli.beta,
        alpha: cli.alpha,
        grid_n: cli.grid,
        depth_tol: cli.depth_tol,
        seed: cli.seed,
        ..Default::default()
    };
    let cfg = resolve(&flags, file.as_ref())?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count(cli.threads)? {
        if n == 0 {
            return Err(Error::config("threads", "must be at least 1"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::config("threads", e.to_string()))?;
    let out = OutDir::create(&cli.out)?;
    let outcome = pool.install(|| run(cmd, &cfg, &out))?;
    for f in &outcome.files {
        eprintln!("wrote {}", f.display());
    }
    eprintln!("{}: {}", cmd.name(), outcome.message);
    Ok(outcome.exit_code)
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            let usage = matches!(e, Error::Config { .. } | Error::InvalidParameter { .. } | Error::Io { .. });
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}
