//! Command-line front end: robustness reports for JSON inputs, built-in
//! verification suites and small demos.
//!
//! Exit codes: 0 success, 1 input error, 2 solver failure, 3 a check failed.

pub mod input;
pub mod report;
pub mod suites;

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use qincompat_core::robustness::{robustness_channels_primal, robustness_measurements, robustness_pair_primal};
use qincompat_core::{ChoiMatrix, Error, Povm, SolverOptions};

use crate::report::{write_atomic, Report};

#[derive(Debug, Parser)]
#[command(name = "qincompat", version, about = "Robustness of incompatibility for quantum channels and measurements")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Relative duality-gap tolerance of the SDP solver.
    #[arg(long, global = true)]
    pub tol_gap: Option<f64>,
    /// Feasibility tolerance of the SDP solver.
    #[arg(long, global = true)]
    pub tol_feas: Option<f64>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Robustness of a collection read from a JSON file.
    Robustness {
        kind: Kind,
        #[arg(long)]
        input: PathBuf,
    },
    /// Run a built-in verification suite.
    Verify {
        suite: Suite,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Number of random instances (suite-specific default).
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Print a worked example.
    Demo {
        name: Demo,
        #[arg(long, default_value_t = 2)]
        dim: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Channels,
    Measurements,
    Pair,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    #[value(name = "theorem1")]
    ChannelWitness,
    #[value(name = "theorem2")]
    PairWitness,
    #[value(name = "prop1")]
    MeasurementReduction,
    #[value(name = "prop2")]
    PairReduction,
    #[value(name = "appendixC")]
    CloningBound,
    Duality,
}

impl Suite {
    pub fn default_trials(self) -> usize {
        match self {
            Suite::ChannelWitness => 5,
            Suite::PairWitness => 2,
            Suite::MeasurementReduction => 20,
            Suite::PairReduction => 10,
            Suite::CloningBound => 200,
            Suite::Duality => 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Demo {
    IdentityPair,
    Bb84,
    Cloning,
}

#[derive(Debug)]
pub enum Failure {
    Input(anyhow::Error),
    Solver(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Input(_) => 1,
            Failure::Solver(_) => 2,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Solver { .. } | Error::DegenerateWitness(_) => Failure::Solver(e.into()),
            _ => Failure::Input(e.into()),
        }
    }
}

impl From<input::InputError> for Failure {
    fn from(e: input::InputError) -> Self {
        Failure::Input(e.into())
    }
}

fn solver_options(cli: &Cli) -> Result<SolverOptions, Failure> {
    let mut opts = SolverOptions::default();
    for (flag, value, slot) in [("--tol-gap", cli.tol_gap, &mut opts.gap_tol), ("--tol-feas", cli.tol_feas, &mut opts.feas_tol)] {
        if let Some(v) = value {
            if !(v.is_finite() && v > 0.0) {
                return Err(Failure::Input(anyhow::anyhow!("{flag} must be a positive number, got {v}")));
            }
            *slot = v;
        }
    }
    Ok(opts)
}

/// Runs the command and builds its report without writing anything.
pub fn execute(cli: &Cli) -> Result<Report, Failure> {
    let opts = solver_options(cli)?;
    match &cli.command {
        Command::Robustness { kind, input: path } => {
            let report = match kind {
                Kind::Channels => robustness_channels_primal(&input::load::<Vec<ChoiMatrix>>(path)?, &opts)?,
                Kind::Measurements => robustness_measurements(&input::measurements(input::load::<Vec<Povm>>(path)?)?, &opts)?,
                Kind::Pair => {
                    let pair: input::PairInput = input::load(path)?;
                    robustness_pair_primal(&pair.povm, &pair.channel, &opts)?
                }
            };
            let name = format!("robustness {}", kind.to_possible_value().expect("named").get_name());
            Ok(Report::new(name, opts, None, vec![], serde_json::to_value(&report).expect("report serialises")))
        }
        Command::Verify { suite, dim, seed, trials } => {
            let trials = trials.unwrap_or(suite.default_trials());
            let (checks, body) = match suite {
                Suite::ChannelWitness => suites::channel_witness_game(*dim, trials, *seed, &opts)?,
                Suite::PairWitness => suites::pair_witness_game(*dim, trials, *seed, &opts)?,
                Suite::MeasurementReduction => suites::measurement_reduction(*dim, trials, *seed, &opts)?,
                Suite::PairReduction => suites::pair_reduction(*dim, trials, *seed, &opts)?,
                Suite::CloningBound => suites::cloning_bound(*dim, trials, *seed, &opts)?,
                Suite::Duality => suites::duality(*dim, trials, *seed, &opts)?,
            };
            let name = format!("verify {}", suite.to_possible_value().expect("named").get_name());
            Ok(Report::new(name, opts, Some(*seed), checks, body))
        }
        Command::Demo { name, dim } => {
            let (checks, body) = match name {
                Demo::IdentityPair => suites::demo_identity_pair(*dim, &opts)?,
                Demo::Bb84 => suites::demo_bb84(&opts)?,
                Demo::Cloning => suites::demo_cloning(*dim, &opts)?,
            };
            let name = format!("demo {}", name.to_possible_value().expect("named").get_name());
            Ok(Report::new(name, opts, None, checks, body))
        }
    }
}

/// Full command: execute, emit the report and return the exit code.
pub fn run(cli: &Cli) -> i32 {
    let report = match execute(cli) {
        Ok(r) => r,
        Err(f) => {
            let (Failure::Input(e) | Failure::Solver(e)) = &f;
            eprintln!("error: {e:#}");
            return f.exit_code();
        }
    };
    let text = report.to_json();
    match &cli.out {
        Some(path) => {
            if let Err(e) = write_atomic(path, &text) {
                eprintln!("error: {e:#}");
                return 1;
            }
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            if let Err(e) = writeln!(stdout, "{text}") {
                if e.kind() != std::io::ErrorKind::BrokenPipe {
                    eprintln!("error: {e}");
                    return 1;
                }
            }
        }
    }
    for c in report.checks.iter().filter(|c| !c.passed) {
        eprintln!("FAILED {}: {} vs {} (tolerance {})", c.name, c.value, c.reference, c.tolerance);
    }
    if report.passed {
        0
    } else {
        3
    }
}
