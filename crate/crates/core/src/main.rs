use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use mrg_bench::harness::{
    cmd_build, cmd_evaluate, cmd_report, cmd_validate, parse_holdout, BuildOptions, EvaluateOptions, HarnessError,
    ReportFormat, EXIT_OK,
};
use mrg_bench::dataset::{Holdout, DEFAULT_CLEAN_IOU};
use mrg_bench::metric::{EvalConfig, Tau, DEFAULT_IOU_SUCCESS, DEFAULT_LAMBDA};
use mrg_bench::similarity::{ProviderConfig, ProviderKind, ENDPOINT_ENV};

#[derive(Parser)]
#[command(name = "mrg-bench", version, about = "Build and score multi-round referring and grounding benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate, screen and split a corpus from scene graphs.
    Build(BuildArgs),
    /// Check a corpus; exits 1 when any thread breaks a rule.
    Validate {
        corpus: PathBuf,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a predictions file against a corpus.
    Evaluate(EvaluateArgs),
    /// Rebuild report tables from a records file.
    Report {
        records: PathBuf,
        #[arg(long, default_value = "markdown")]
        format: ReportFormat,
        /// Also write the report files into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long)]
    scene_graphs: PathBuf,
    /// Multi-round or logic-chain corpus to import (repeatable).
    #[arg(long = "import")]
    imports: Vec<PathBuf>,
    #[arg(long)]
    ref_templates: Option<PathBuf>,
    #[arg(long)]
    gnd_templates: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Test threads per subset, e.g. `MRG=800,LC=200`.
    #[arg(long, value_parser = parse_holdout)]
    holdout: Option<Holdout>,
    /// IoU above which duplicate scene-graph boxes are merged.
    #[arg(long, default_value_t = DEFAULT_CLEAN_IOU)]
    clean_iou: f64,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    lambda: f64,
    /// One threshold for every round or a comma-separated list per round.
    #[arg(long, default_value = "0.3", value_parser = Tau::parse)]
    tau: Tau,
    #[arg(long, default_value_t = DEFAULT_IOU_SUCCESS)]
    success_iou: f64,
    #[arg(long, default_value = "lexical")]
    provider: ProviderKind,
    #[arg(long, env = ENDPOINT_ENV)]
    endpoint: Option<String>,
    /// Request timeout in seconds.
    #[arg(long, default_value_t = 30.0)]
    timeout: f64,
    #[arg(long, default_value_t = 3)]
    retries: u32,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value = "markdown")]
    format: ReportFormat,
}

fn run(cli: Cli) -> Result<i32, HarnessError> {
    match cli.command {
        Command::Build(a) => {
            let opts = BuildOptions {
                scene_graphs: a.scene_graphs,
                imports: a.imports,
                ref_templates: a.ref_templates,
                gnd_templates: a.gnd_templates,
                out_dir: a.out,
                seed: a.seed,
                holdout: a.holdout.unwrap_or_default(),
                clean_iou: a.clean_iou,
            };
            let summary = cmd_build(&opts)?;
            println!("{}", summary.all.to_markdown());
            Ok(EXIT_OK)
        }
        Command::Validate { corpus, out } => {
            let report = cmd_validate(&corpus)?;
            let json = serde_json::to_string_pretty(&report).expect("report serializes");
            match out {
                Some(path) => std::fs::write(&path, json + "\n").map_err(|e| HarnessError::Io { path, source: e })?,
                None => println!("{json}"),
            }
            Ok(report.exit_code())
        }
        Command::Evaluate(a) => {
            let timeout = Duration::try_from_secs_f64(a.timeout)
                .map_err(|e| HarnessError::Invalid(format!("bad timeout: {e}")))?;
            let provider = ProviderConfig {
                kind: a.provider,
                endpoint: a.endpoint,
                timeout,
                retries: a.retries,
                batch_size: a.batch_size,
                ..ProviderConfig::default()
            };
            let opts = EvaluateOptions {
                corpus: a.corpus,
                predictions: a.predictions,
                out_dir: a.out,
                config: EvalConfig {
                    lambda: a.lambda,
                    tau: a.tau,
                    iou_success_threshold: a.success_iou,
                    provider,
                },
                seed: a.seed,
                format: a.format,
            };
            let report = cmd_evaluate(&opts)?;
            println!("{}", report.to_markdown());
            Ok(EXIT_OK)
        }
        Command::Report { records, format, out } => {
            print!("{}", cmd_report(&records, format, out.as_deref())?);
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
