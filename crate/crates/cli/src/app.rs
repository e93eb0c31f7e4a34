//! Argument parsing and exit codes.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::classify::classify;
use crate::commands::{evaluate_quantity, run_flow, series_name, At};
use crate::report::to_json;
use crate::spec::parse_metric_spec;
use crate::suites::{parse_list, run_identity_suite};
use crate::AppError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CLASSIFIED: i32 = 2;
pub const EXIT_IDENTITY_FAILURE: i32 = 3;
pub const EXIT_INPUT: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "finsler", version, about = "Curvature, identities and geodesics of Finsler metrics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify a metric against the curvature classes.
    Classify {
        #[arg(long)]
        metric: PathBuf,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run identity suites: `all` or a list of eiilj, eq9, creducible,
    /// surface, abeta, dengwang.
    Identities {
        #[arg(long)]
        metric: PathBuf,
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 10)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate one quantity at a tangent point.
    Curvature {
        #[arg(long)]
        metric: PathBuf,
        /// `x=..;y=..`, plus `u=..` for the flag curvature K.
        #[arg(long, allow_hyphen_values = true)]
        at: String,
        #[arg(long)]
        quantity: String,
    },
    /// Integrate a geodesic and write the trace as a tab-separated table.
    Flow {
        #[arg(long)]
        metric: PathBuf,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        x0: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        y0: Vec<f64>,
        #[arg(long)]
        tmax: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Comma-separated series: psi, f, ftilde, F, J_norm, R_II.
        #[arg(long, default_value = "")]
        track: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn write_out(out: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<(), AppError> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| AppError::Io(format!("{}: {e}", p.display()))),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| AppError::Io(e.to_string())),
    }
}

/// Runs a parsed command, writing reports to `stdout`; returns the exit
/// code.
pub fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<i32, AppError> {
    match cli.command {
        Command::Classify {
            metric,
            samples,
            seed,
            tol,
            out,
        } => {
            if samples == 0 {
                return Err(AppError::Usage("--samples must be at least 1".into()));
            }
            let m = parse_metric_spec(&metric)?;
            let report = classify(&m, samples, seed, tol)?;
            write_out(out.as_deref(), &to_json(&report), stdout)?;
            Ok(EXIT_CLASSIFIED)
        }
        Command::Identities {
            metric,
            suite,
            samples,
            seed,
            out,
        } => {
            if samples == 0 {
                return Err(AppError::Usage("--samples must be at least 1".into()));
            }
            let suites = parse_list(&suite).map_err(AppError::Usage)?;
            let m = parse_metric_spec(&metric)?;
            let report = run_identity_suite(&m, &suites, samples, seed)?;
            write_out(out.as_deref(), &to_json(&report), stdout)?;
            Ok(if report.pass { EXIT_OK } else { EXIT_IDENTITY_FAILURE })
        }
        Command::Curvature { metric, at, quantity } => {
            let at: At = at.parse().map_err(AppError::Usage)?;
            let m = parse_metric_spec(&metric)?;
            let report = evaluate_quantity(&m, &at, &quantity)?;
            write_out(None, &to_json(&report), stdout)?;
            Ok(EXIT_OK)
        }
        Command::Flow {
            metric,
            x0,
            y0,
            tmax,
            tol,
            track,
            out,
        } => {
            let names: Vec<&str> = track
                .split(',')
                .filter(|t| !t.trim().is_empty())
                .map(series_name)
                .collect::<Result<_, _>>()
                .map_err(AppError::Usage)?;
            let m = parse_metric_spec(&metric)?;
            let (trace, summary) = run_flow(&m, &x0, &y0, tmax, tol, &names)?;
            write_out(Some(&out), &trace.to_table(), stdout)?;
            write_out(None, &to_json(&summary), stdout)?;
            Ok(EXIT_OK)
        }
    }
}

/// Entry point shared by the binary and the tests.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = sink.write_all(text.as_bytes());
            return code;
        }
    };
    match execute(cli, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
