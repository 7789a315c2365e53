//! Command-line front end for `cflab`.
//!
//! Every subcommand writes `<name>.csv`, a JSON mirror `<name>.json` and a
//! provenance file `<name>.manifest.json` into `--out-dir`.
//!
//! Exit codes: 0 success, 2 usage or domain error, 3 a checked inequality
//! failed, 4 resource limit or I/O failure.

pub mod commands;
pub mod output;

use std::ffi::OsString;

use cflab::arith::ArithError;
use cflab::fractal::FractalError;
use cflab::measure::MeasureError;
use cflab::sums::SumsError;
use cflab::CfError;
use clap::Parser;
use thiserror::Error;

pub use commands::{execute, Cli, Command, Outcome};
use output::{unix_now, write_outputs, RunManifest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VIOLATED: i32 = 3;
pub const EXIT_RESOURCE: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Resource(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Resource(_) | CliError::Io(_) => EXIT_RESOURCE,
        }
    }
}

impl From<CfError> for CliError {
    fn from(e: CfError) -> Self {
        match e {
            CfError::Domain(_) | CfError::Exhausted(_) => CliError::Usage(e.to_string()),
            CfError::DigitOverflow | CfError::BudgetExceeded { .. } => CliError::Resource(e.to_string()),
        }
    }
}

impl From<MeasureError> for CliError {
    fn from(e: MeasureError) -> Self {
        match e {
            MeasureError::Domain(_) => CliError::Usage(e.to_string()),
            MeasureError::Resource(_) => CliError::Resource(e.to_string()),
        }
    }
}

impl From<SumsError> for CliError {
    fn from(e: SumsError) -> Self {
        match e {
            SumsError::Config(_) => CliError::Usage(e.to_string()),
            SumsError::Stream(e) => e.into(),
        }
    }
}

impl From<ArithError> for CliError {
    fn from(e: ArithError) -> Self {
        match e {
            ArithError::Domain(_) => CliError::Usage(e.to_string()),
            ArithError::Resource(_) => CliError::Resource(e.to_string()),
        }
    }
}

impl From<FractalError> for CliError {
    fn from(e: FractalError) -> Self {
        match e {
            FractalError::Config(_) | FractalError::Domain(_) => CliError::Usage(e.to_string()),
            FractalError::Resource(_) => CliError::Resource(e.to_string()),
        }
    }
}

/// `--threads`, then `CFLAB_THREADS`, then the hardware count.
pub fn thread_count(flag: Option<usize>) -> Result<usize, CliError> {
    let n = match flag {
        Some(n) => n,
        None => match std::env::var("CFLAB_THREADS") {
            Ok(v) => v.trim().parse().map_err(|_| CliError::Usage(format!("CFLAB_THREADS=`{v}` is not a count")))?,
            Err(_) => std::thread::available_parallelism().map_or(1, |n| n.get()),
        },
    };
    if n == 0 {
        return Err(CliError::Usage("thread count must be positive".into()));
    }
    Ok(n)
}

/// Runs a parsed command inside its own thread pool and writes its outputs.
pub fn run(cli: &Cli, argv: Vec<String>) -> Result<Outcome, CliError> {
    let threads = thread_count(cli.threads)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Resource(e.to_string()))?;
    let started = unix_now();
    let outcome = pool.install(|| execute(&cli.command))?;
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command_line: argv,
        config: serde_json::to_value(&cli.command).expect("arguments serialize"),
        master_seed: cli.command.seed(),
        started_unix: started,
        finished_unix: started,
        files: Vec::new(),
    };
    write_outputs(&cli.out_dir, cli.command.name(), &outcome.table, &outcome.report, manifest)?;
    Ok(outcome)
}

/// Parses arguments, runs and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let argv = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match run(&cli, argv) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            if outcome.violated {
                EXIT_VIOLATED
            } else {
                EXIT_OK
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
