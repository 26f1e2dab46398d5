//! Command-line campaigns over the `toric-spectra` engines.
//!
//! Every run writes a reproducibility header (library version, SHA-256 of
//! the canonical polytope document, parameters) followed by the data.

mod commands;
pub mod output;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};
use toric_spectra::error::Error;
use toric_spectra::polytope::DelzantPolytope;
use toric_spectra::quadrature::QuadratureError;

use output::Format;

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NO_CONVERGENCE: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

/// Environment fallback for `--threads`.
pub const THREADS_ENV: &str = "TORIC_SPECTRA_THREADS";

/// Subcommand names, in help order.
pub const SUBCOMMANDS: [&str; 12] = [
    "validate",
    "lattice",
    "kernel-eval",
    "transform",
    "expand",
    "density",
    "pair",
    "moments",
    "distribution",
    "em-check",
    "localize",
    "pinch",
];

/// Engine operation to the subcommand that exercises it.
pub const COVERAGE: &[(&str, &str)] = &[
    ("polytope::load_polytope", "validate"),
    ("polytope::vertex_chart", "validate"),
    ("polytope::lattice_points", "lattice"),
    ("polytope::lattice_distances", "lattice"),
    ("polytope::shift", "lattice"),
    ("quadrature::integrate", "em-check"),
    ("quadrature::integrate_log", "kernel-eval"),
    ("quadrature::integrate_face", "pair"),
    ("quadrature::superlevel_volume", "distribution"),
    ("kernel::phi", "kernel-eval"),
    ("kernel::argmax_phi", "kernel-eval"),
    ("kernel::log_c", "kernel-eval"),
    ("kernel::kernel_eval", "kernel-eval"),
    ("kernel::transform", "transform"),
    ("kernel::section_norm", "kernel-eval"),
    ("kernel::localization_ratio", "localize"),
    ("asymptotics::hessian_det", "expand"),
    ("asymptotics::laplace_normalization", "kernel-eval"),
    ("asymptotics::pointwise_norm_asymptotic", "kernel-eval"),
    ("asymptotics::extract_expansion", "expand"),
    ("asymptotics::model_P1", "expand"),
    ("asymptotics::pinched_average", "pinch"),
    ("euler_maclaurin::tau_coefficients", "em-check"),
    ("euler_maclaurin::riemann_sum", "em-check"),
    ("euler_maclaurin::em_sum", "em-check"),
    ("euler_maclaurin::em_error_report", "em-check"),
    ("measures::spectral_density", "density"),
    ("measures::pair", "pair"),
    ("measures::eigensection_average", "moments"),
    ("measures::moment", "moments"),
    ("measures::distribution_function", "distribution"),
    ("measures::asymptotic_pairing", "pair"),
];

#[derive(Debug, Parser)]
#[command(name = "toric-spectra", version, about = "Spectral density campaigns on Delzant polytopes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand.
#[derive(Clone, Debug, Args, Serialize)]
pub struct Common {
    /// Polytope JSON document.
    #[arg(long)]
    #[serde(skip)]
    pub polytope: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Worker cap; falls back to TORIC_SPECTRA_THREADS.
    #[arg(long)]
    #[serde(skip)]
    pub threads: Option<usize>,
    /// Add a wall-clock timestamp to the header.
    #[arg(long)]
    #[serde(skip)]
    pub stamp: bool,
    /// Quadrature tolerance; engine default when absent.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a polytope and run the Delzant check.
    Validate(commands::Validate),
    /// Enumerate lattice points of the level-N dilate.
    Lattice(commands::Lattice),
    /// Phase, normalizer, kernel and section norms at a point.
    #[command(name = "kernel-eval")]
    KernelEval(commands::KernelEval),
    /// Berezin-type transform of a polynomial.
    Transform(commands::Transform),
    /// Fit the 1/N expansion of the transform.
    Expand(commands::Expand),
    /// Spectral density on a grid.
    Density(commands::Density),
    /// Pair a polynomial with the pushforward measure.
    Pair(commands::Pair),
    /// Moment rescaling of a section norm.
    Moments(commands::Moments),
    /// Distribution function of a section norm.
    Distribution(commands::Distribution),
    /// Riemann sums against the Euler-Maclaurin operator.
    #[command(name = "em-check")]
    EmCheck(commands::EmCheck),
    /// Decay of the kernel mass away from a point.
    Localize(commands::Localize),
    /// Windowed section-norm averages shrinking at rate N^-delta.
    Pinch(commands::Pinch),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::Lattice(_) => "lattice",
            Command::KernelEval(_) => "kernel-eval",
            Command::Transform(_) => "transform",
            Command::Expand(_) => "expand",
            Command::Density(_) => "density",
            Command::Pair(_) => "pair",
            Command::Moments(_) => "moments",
            Command::Distribution(_) => "distribution",
            Command::EmCheck(_) => "em-check",
            Command::Localize(_) => "localize",
            Command::Pinch(_) => "pinch",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Validate(c) => &c.common,
            Command::Lattice(c) => &c.common,
            Command::KernelEval(c) => &c.common,
            Command::Transform(c) => &c.common,
            Command::Expand(c) => &c.common,
            Command::Density(c) => &c.common,
            Command::Pair(c) => &c.common,
            Command::Moments(c) => &c.common,
            Command::Distribution(c) => &c.common,
            Command::EmCheck(c) => &c.common,
            Command::Localize(c) => &c.common,
            Command::Pinch(c) => &c.common,
        }
    }

    fn params(&self) -> serde_json::Value {
        let v = match self {
            Command::Validate(c) => serde_json::to_value(c),
            Command::Lattice(c) => serde_json::to_value(c),
            Command::KernelEval(c) => serde_json::to_value(c),
            Command::Transform(c) => serde_json::to_value(c),
            Command::Expand(c) => serde_json::to_value(c),
            Command::Density(c) => serde_json::to_value(c),
            Command::Pair(c) => serde_json::to_value(c),
            Command::Moments(c) => serde_json::to_value(c),
            Command::Distribution(c) => serde_json::to_value(c),
            Command::EmCheck(c) => serde_json::to_value(c),
            Command::Localize(c) => serde_json::to_value(c),
            Command::Pinch(c) => serde_json::to_value(c),
        };
        v.expect("parameters serialize")
    }
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_VALIDATION,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Quadrature(QuadratureError::InvalidTolerance) => EXIT_VALIDATION,
            Error::Quadrature(_) | Error::NoConvergence { .. } | Error::IllConditioned { .. } => {
                EXIT_NO_CONVERGENCE
            }
            _ => EXIT_VALIDATION,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        Self {
            code: EXIT_OTHER,
            message: e.to_string(),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Polytope from `--polytope`, with the hash of its canonical document.
pub(crate) fn load_polytope(common: &Common) -> CliResult<(DelzantPolytope, String)> {
    let path = common
        .polytope
        .as_ref()
        .ok_or_else(|| CliError::usage("--polytope is required"))?;
    let source = std::fs::read_to_string(path)
        .map_err(|e| CliError::from(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let polytope = DelzantPolytope::from_json(&source)
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    let hash = hex::encode(Sha256::digest(polytope.to_json().as_bytes()));
    Ok((polytope, hash))
}

fn thread_count(common: &Common) -> CliResult<Option<usize>> {
    if let Some(n) = common.threads {
        return Ok(Some(n));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::usage(format!("{THREADS_ENV}={v:?} is not a thread count"))),
        _ => Ok(None),
    }
}

/// Parses `argv` (program name first), runs one campaign, returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn execute(command: &Command) -> CliResult<()> {
    let common = command.common();
    if let Some(n) = thread_count(common)? {
        if n == 0 {
            return Err(CliError::usage("--threads must be positive"));
        }
        // Fails only if a pool already exists, e.g. when called twice in one process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let (report, hash) = commands::dispatch(command)?;
    let mut header = vec![
        ("toric-spectra".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("command".to_string(), command.name().to_string()),
        ("polytope-sha256".to_string(), hash.unwrap_or_else(|| "none".into())),
        ("params".to_string(), command.params().to_string()),
    ];
    if common.stamp {
        let secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        header.push(("stamp".to_string(), format!("unix {secs}")));
    }
    let mut sink: Box<dyn Write> = match &common.out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    match (command, common.format) {
        (_, Format::Json) => {
            serde_json::to_writer_pretty(&mut sink, &report.to_json(&header)).map_err(io::Error::from)?;
            writeln!(sink)?;
        }
        (Command::Validate(_), Format::Csv) => report.write_text(&mut sink)?,
        (_, Format::Csv) => report.write_csv(&header, &mut sink)?,
    }
    sink.flush()?;
    Ok(())
}
