use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aggropt::{
    run_insample_analysis, run_replication_study, write_insample_outputs, write_study_outputs,
    ExperimentConfig, HarnessError,
};
use aggropt_core::estimators::lint_csv;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aggropt", version, about = "Counterfactual aggregate optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the replication study and write the report.
    Run(RunArgs),
    /// Train every method on one dataset and write histograms, entropies and traces.
    Insample(RunArgs),
    /// Check a logged-data CSV and report malformed rows by line number.
    Validate {
        #[arg(long)]
        data: PathBuf,
        /// Reject actions outside 0..K.
        #[arg(long)]
        num_actions: Option<usize>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides base_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides output_dir.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Overrides workers.
    #[arg(long)]
    workers: Option<usize>,
}

const EXIT_CONFIG: u8 = 1;
const EXIT_PARTIAL: u8 = 2;

fn load(args: &RunArgs) -> Result<ExperimentConfig, HarnessError> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.base_seed = seed;
    }
    if let Some(dir) = &args.out_dir {
        config.output_dir = dir.clone();
    }
    if let Some(w) = args.workers {
        config.workers = w;
    }
    config.validate()?;
    Ok(config)
}

fn fail(e: HarnessError) -> ExitCode {
    eprintln!("error: {e}");
    // everything that stops a run before any method trains is a setup problem
    ExitCode::from(EXIT_CONFIG)
}

fn run(args: &RunArgs) -> ExitCode {
    let config = match load(args) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let output = match run_replication_study(&config) {
        Ok(o) => o,
        Err(e) => return fail(e),
    };
    if let Err(e) = write_study_outputs(&output, &config.output_dir) {
        return fail(e);
    }
    match std::fs::read_to_string(config.output_dir.join("report.txt")) {
        Ok(text) => print!("{text}"),
        Err(e) => return fail(e.into()),
    }
    if output.report.failures() > 0 {
        ExitCode::from(EXIT_PARTIAL)
    } else {
        ExitCode::SUCCESS
    }
}

fn insample(args: &RunArgs) -> ExitCode {
    let config = match load(args) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let output = match run_insample_analysis(&config) {
        Ok(o) => o,
        Err(e) => return fail(e),
    };
    if let Err(e) = write_insample_outputs(&output, &config, &config.output_dir) {
        return fail(e);
    }
    println!("logged outcome {}", output.logged_total);
    println!("{:<20} {:>8} {:>12} {:>12} {:>10}", "method", "entropy", "in-sample", "boot mean", "true");
    for m in output.methods.iter().flatten() {
        println!(
            "{:<20} {:>8.3} {:>12.2} {:>12.2} {:>10.4}",
            m.name,
            m.entropy,
            m.in_sample_outcome,
            m.bootstrap_mean(),
            m.true_value
        );
    }
    if output.failures() > 0 {
        ExitCode::from(EXIT_PARTIAL)
    } else {
        ExitCode::SUCCESS
    }
}

fn validate(data: &Path, num_actions: Option<usize>) -> ExitCode {
    let report = match File::open(data).map_err(aggropt_core::Error::from).and_then(|f| lint_csv(f, num_actions)) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {}: {e}", data.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    for issue in &report.issues {
        println!("line {}: {}", issue.line, issue.reason);
    }
    println!("{} valid record(s), {} rejected", report.records.len(), report.issues.len());
    if report.issues.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_PARTIAL)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run(args) => run(args),
        Command::Insample(args) => insample(args),
        Command::Validate { data, num_actions } => validate(data, *num_actions),
    }
}
