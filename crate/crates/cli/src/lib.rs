//! Front end for the `flagint` binary.

pub mod config;
pub mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Experiment, RunConfig, SEED_ENV};
use run::{Outcome, RunError};

pub const EXIT_PASS: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_VIOLATION: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "flagint", version, about = "Flag-kernel fractional integral experiments")]
pub struct Cli {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact exponent conditions.
    Check(RunConfig),
    /// Kernel value, product-kernel domination and gradient ratio at a point.
    Kernel(RunConfig),
    /// The operator applied to a test function at a point.
    Apply(RunConfig),
    /// Support, bound and mean conditions of an atom.
    AtomValidate(RunConfig),
    /// Atom mass over dyadic shells.
    Shells(RunConfig),
    /// Dilation scan of the norm ratio.
    Dilate(RunConfig),
    /// Truncated masses of the signum atom over growing regions.
    Counterexample(RunConfig),
    /// Theorem and empirical labels over an (alpha, beta) grid.
    Frontier(RunConfig),
    /// Flag operator against its dominating product operator.
    Hls(RunConfig),
    /// Runs the experiment named in the config file.
    Run(RunConfig),
}

impl Command {
    fn split(&self) -> (Option<Experiment>, &RunConfig) {
        match self {
            Command::Check(c) => (Some(Experiment::Check), c),
            Command::Kernel(c) => (Some(Experiment::Kernel), c),
            Command::Apply(c) => (Some(Experiment::Apply), c),
            Command::AtomValidate(c) => (Some(Experiment::AtomValidate), c),
            Command::Shells(c) => (Some(Experiment::Shells), c),
            Command::Dilate(c) => (Some(Experiment::Dilate), c),
            Command::Counterexample(c) => (Some(Experiment::Counterexample), c),
            Command::Frontier(c) => (Some(Experiment::Frontier), c),
            Command::Hls(c) => (Some(Experiment::Hls), c),
            Command::Run(c) => (None, c),
        }
    }
}

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_USAGE)
}

/// Parses `args`, runs, writes artifacts and maps the verdict to an exit code.
pub fn main_with_args<I, S>(args: I) -> ExitCode
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(j) = cli.jobs {
        if j == 0 {
            return usage("--jobs must be positive");
        }
        // fails only if a pool already exists, which keeps its size
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    let file = match cli.config.as_deref().map(RunConfig::from_file).transpose() {
        Ok(f) => f,
        Err(e) => return usage(e),
    };
    let (sub, flags) = cli.command.split();
    let env_seed = std::env::var(SEED_ENV).ok();
    let rc = match RunConfig::merged(file, env_seed.as_deref(), flags) {
        Ok(c) => c,
        Err(e) => return usage(e),
    };
    let Some(exp) = sub.or(rc.experiment) else {
        return usage("field `experiment` is required for `run`");
    };
    if sub.is_some() && rc.experiment.is_some_and(|e| Some(e) != sub) {
        return usage(format!("config file names experiment `{}` but the subcommand is `{}`", rc.experiment.unwrap().name(), exp.name()));
    }
    match run::run(exp, &rc) {
        Ok(out) => finish(out, &rc),
        Err(RunError::Usage(e)) => usage(e),
        Err(RunError::Numeric(e)) => usage(format!("UNRESOLVED: {e}")),
    }
}

fn finish(out: Outcome, rc: &RunConfig) -> ExitCode {
    println!("{}", out.summary);
    let dir = rc.output_dir();
    match out.scan.write(&dir) {
        Ok((csv, json)) => eprintln!("wrote {} and {}", csv.display(), json.display()),
        Err(e) => return usage(format!("writing artifacts: {e}")),
    }
    if out.scan.unresolved_count() > 0 {
        eprintln!("{} UNRESOLVED row(s)", out.scan.unresolved_count());
        ExitCode::from(EXIT_USAGE)
    } else if out.pass {
        ExitCode::from(EXIT_PASS)
    } else {
        ExitCode::from(EXIT_VIOLATION)
    }
}
