//! `clustertail`: command-line front end for cluster-size experiments.
//!
//! Dimension indices are 1-based on the command line and 0-based in every
//! file the tool reads or writes.

mod artifact;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use clustertail::Error;

#[derive(Debug, Parser)]
#[command(name = "clustertail", version, about = "Tail asymptotics of multi-type branching cluster sizes")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Master seed.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Monte Carlo sample count; scientific notation such as 1e6 is accepted.
    #[arg(long, global = true, value_parser = parse_count)]
    pub samples: Option<u64>,
    /// Artifact path; a `<out>.manifest.json` is written next to it.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// SVG plot path for sweeps.
    #[arg(long, global = true)]
    pub plot: Option<PathBuf>,
    /// Truncation parameter: `auto` or a positive number.
    #[arg(long, global = true, value_parser = parse_delta)]
    pub delta: Option<DeltaArg>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaArg {
    Auto,
    Value(f64),
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the structural assumptions; prints a JSON report.
    Validate { config: PathBuf },
    /// Mean offspring matrix, spectral radius and expected clusters.
    Mean { config: PathBuf },
    /// Rate function of a subset over a list of n (CSV).
    Rate {
        config: PathBuf,
        /// Subset such as `1,2` or `{1,2}`.
        #[arg(long)]
        set: String,
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        n: Vec<f64>,
    },
    /// The cheapest cone meeting a set and the bounded-away check.
    Ja { config: PathBuf, set_file: PathBuf },
    /// Raw cluster samples (CSV).
    Simulate {
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        root: usize,
        /// Suppress sibling groups larger than this.
        #[arg(long)]
        prune: Option<f64>,
    },
    /// Probability sweep over n (CSV), with log-log slope.
    Prob {
        config: PathBuf,
        set_file: PathBuf,
        #[arg(long, default_value_t = 1)]
        root: usize,
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        n: Vec<u64>,
        /// Also estimate the limiting constant with this many samples.
        #[arg(long, value_parser = parse_count)]
        measure_samples: Option<u64>,
        /// Emit the full sweep result as JSON instead of CSV.
        #[arg(long)]
        json: bool,
    },
    /// Limiting-measure estimate of the constant for a set (JSON).
    Measure {
        config: PathBuf,
        set_file: PathBuf,
        #[arg(long, default_value_t = 1)]
        root: usize,
    },
    /// Verification suites (JSON).
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    pub config: PathBuf,
    #[arg(long, value_enum, default_value_t = Suite::All)]
    pub suite: Suite,
    /// Rare-event set for the `types` and `slopes` suites.
    #[arg(long)]
    pub set_file: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub root: usize,
    /// n values (`slopes`, `counterexample`, `concentration`; first entry
    /// for `types`).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub n: Option<Vec<u64>>,
    /// Pruning thresholds for `identities`.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub m: Option<Vec<f64>>,
    /// Tube radius for `counterexample`.
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    /// Truncation levels for `concentration`.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub deltas: Option<Vec<f64>>,
    /// Repetitions per `(n, delta)` for `concentration`.
    #[arg(long, value_parser = parse_count, default_value = "1000")]
    pub repetitions: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Identities,
    Concentration,
    Types,
    Slopes,
    Counterexample,
    All,
}

fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let v: f64 = s.parse().map_err(|_| format!("not a count: {s}"))?;
    if v >= 0.0 && v.fract() == 0.0 && v <= 9.007_199_254_740_992e15 {
        Ok(v as u64)
    } else {
        Err(format!("not a nonnegative integer count: {s}"))
    }
}

fn parse_delta(s: &str) -> Result<DeltaArg, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(DeltaArg::Auto);
    }
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(DeltaArg::Value(v)),
        _ => Err(format!("delta must be `auto` or a positive number, got {s}")),
    }
}

/// Exit status for an error: 1 usage, 2 model, 3 I/O or malformed input,
/// 4 geometry, 5 statistical.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidLaw(_)
        | Error::SubcriticalityViolation { .. }
        | Error::DuplicateTailIndex { .. }
        | Error::ConnectivityViolation { .. }
        | Error::Precondition(_) => 2,
        Error::Io(_) | Error::Json(_) | Error::InvalidModel(_) => 3,
        Error::NegativeCoordinate { .. }
        | Error::InvalidSet(_)
        | Error::LpNonConvergence(_)
        | Error::NoConeIntersects
        | Error::NonUniqueArgmin { .. }
        | Error::NotBoundedAway(_) => 4,
        Error::InsufficientHits(_)
        | Error::TooFewSamples(_)
        | Error::CapExceeded { .. }
        | Error::DepthCapExceeded { .. } => 5,
        Error::EmptySet
        | Error::InvalidIndexSet(_)
        | Error::ZeroDelta
        | Error::DepthZeroType
        | Error::InvalidArgument(_) => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.global.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.global.threads)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
