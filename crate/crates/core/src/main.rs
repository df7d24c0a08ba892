use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use tweedie_eb::{pipeline, Error, PipelineConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Verb {
    /// Generate the scenario and write units.csv
    Simulate,
    /// Gibbs-sample every unit in units.csv, write summaries.csv
    Fit,
    /// Turn summaries.csv into scores.csv
    Score,
    /// Bin scores and fit Lindsey densities: histogram_d{J}.csv, fit_d{J}.csv
    Density,
    /// Apply Tweedie's formula: corrections_d{J}.csv
    Correct,
    /// Run every stage in order
    Pipeline,
    /// Render report.txt and figures/ from existing artifacts
    Report,
}

#[derive(Debug, Parser)]
#[command(
    name = "tweedie-eb",
    version,
    about = "Empirical Bayes (Tweedie) correction of posterior scores",
    after_help = after_help()
)]
struct Cli {
    verb: Verb,

    /// Config file (key = value lines); defaults apply when omitted
    #[arg(short, long)]
    config: Option<PathBuf>,

    /// With `fit`: also write each unit's retained draws to draws/unit_{id}.csv
    #[arg(long)]
    dump_draws: bool,

    /// key=value overrides applied after the config file
    overrides: Vec<String>,
}

fn after_help() -> String {
    format!(
        "{}\nExit status: 0 success, 2 missing input artifact, 3 config or usage error, \
         4 numerical failure, 1 other I/O failure.",
        PipelineConfig::keys_help()
    )
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::MissingInput(_) => 2,
        Error::Config(_) => 3,
        Error::Io(_) | Error::Csv(_) => 1,
        _ => 4,
    }
}

fn kind(e: &Error) -> &'static str {
    match e.root() {
        Error::MissingInput(_) => "missing_input",
        Error::Config(_) => "config",
        Error::Io(_) | Error::Csv(_) => "io",
        Error::Artifact { .. } => "artifact",
        _ => "numerical",
    }
}

fn fail(e: &Error) -> ExitCode {
    let stage = match e {
        Error::Stage { stage, .. } => stage,
        _ => "-",
    };
    let msg = e.root().to_string();
    eprintln!("error kind={} stage={stage} message={msg:?}", kind(e));
    ExitCode::from(exit_code(e))
}

fn run(cli: &Cli) -> tweedie_eb::Result<()> {
    let cfg = PipelineConfig::load(cli.config.as_deref(), &cli.overrides)?;
    match cli.verb {
        Verb::Simulate => pipeline::simulate(&cfg).map(drop),
        Verb::Fit => pipeline::fit(&cfg, cli.dump_draws).map(drop),
        Verb::Score => pipeline::score(&cfg).map(drop),
        Verb::Density => pipeline::density(&cfg).map(drop),
        Verb::Correct => pipeline::correct(&cfg).map(drop),
        Verb::Report => pipeline::report(&cfg).map(|r| print!("{}", r.render(&cfg))),
        Verb::Pipeline => pipeline::run_pipeline(&cfg).map(|r| print!("{}", r.render(&cfg))),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.kind().to_string();
            eprintln!("error kind=usage stage=- message={msg:?}");
            return ExitCode::from(3);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}
