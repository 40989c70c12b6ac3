//! Command-line front end: `run`, `verify` and `bound`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use searchbias::experiment::{
    exit_code, exit_code_for_checks, format_bound, format_check_line, run_experiment, run_suite, write_outputs,
    ExperimentConfig, Suite, EXIT_USAGE,
};
use searchbias::harness::Harness;
use searchbias::{Error, Execution};

#[derive(Parser, Debug)]
#[command(name = "searchbias", version, about = "Bias and famine bounds for black-box search")]
struct Cli {
    /// Run every replicate loop on the current thread.
    #[arg(long, global = true)]
    serial: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a declarative experiment and write q_table.csv, bias_report.json and checks.jsonl.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `out` in the config (default: current directory).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the number of simplex Monte Carlo samples.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Run a built-in verification suite and print one line per check.
    Verify {
        #[arg(long, value_enum, default_value_t = SuiteArg::All)]
        suite: SuiteArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
    /// Print the success bound `k/(n·q_min)` (plus bias) in log space.
    #[command(allow_negative_numbers = true)]
    Bound {
        log2_n: f64,
        log2_k: f64,
        q_min: f64,
        #[arg(default_value_t = 0.0)]
        bias: f64,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SuiteArg {
    Exact,
    Montecarlo,
    All,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::Exact => Suite::Exact,
            SuiteArg::Montecarlo => Suite::MonteCarlo,
            SuiteArg::All => Suite::All,
        }
    }
}

fn fail(err: &Error) -> i32 {
    eprintln!("error: {err}");
    exit_code(err)
}

fn run(config: &Path, out: Option<PathBuf>, seed: Option<u64>, samples: Option<usize>, exec: Execution) -> i32 {
    let mut cfg = match ExperimentConfig::load(config) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(samples) = samples {
        cfg.samples = samples;
    }
    let base_dir = config.parent().unwrap_or(Path::new("."));
    let out_dir = out.or_else(|| cfg.out.as_ref().map(|o| base_dir.join(o))).unwrap_or_else(|| PathBuf::from("."));
    let record = match run_experiment(&cfg, base_dir, exec) {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    if let Err(e) = write_outputs(&record, &out_dir) {
        return fail(&e);
    }
    for c in &record.checks {
        println!("{}", format_check_line(c));
    }
    let failed = record.checks.iter().filter(|c| !c.satisfied).count();
    println!("{} checks, {failed} failed; outputs in {}", record.checks.len(), out_dir.display());
    exit_code_for_checks(&record.checks)
}

fn verify(suite: Suite, seed: u64, samples: usize, exec: Execution) -> i32 {
    let checks = match run_suite(suite, seed, samples, &Harness::new(exec)) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    for c in &checks {
        println!("{}", format_check_line(c));
    }
    let failed = checks.iter().filter(|c| !c.satisfied).count();
    println!("suite {suite}: {} checks, {failed} failed", checks.len());
    exit_code_for_checks(&checks)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            return ExitCode::from(code as u8);
        }
    };
    let exec = if cli.serial { Execution::Serial } else { Execution::Parallel };
    let code = match cli.command {
        Command::Run { config, out, seed, samples } => run(&config, out, seed, samples, exec),
        Command::Verify { suite, seed, samples } => verify(suite.into(), seed, samples, exec),
        Command::Bound { log2_n, log2_k, q_min, bias } => match format_bound(log2_n, log2_k, q_min, bias) {
            Ok(text) => {
                println!("{text}");
                0
            }
            Err(e) => fail(&e),
        },
    };
    ExitCode::from(code as u8)
}
