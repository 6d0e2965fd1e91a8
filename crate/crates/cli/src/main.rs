use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use darkdoc_core::fixture;
use darkdoc_core::ingest::load_truth;
use darkdoc_core::run::{self, RunConfig, RunOptions, RunState, RunStatus};

#[derive(Parser)]
#[command(name = "darkdoc", version, about = "Recover keys and documentation for undocumented databases")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline, or resume a stopped run.
    Analyze(AnalyzeArgs),
    /// Score a run's keys and coverage against a truth file.
    Compare {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Print the full report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Synthetic fixtures with known keys.
    Fixture {
        #[command(subcommand)]
        command: FixtureCommand,
    },
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Config file for a new run. With --resume, replaces the stored
    /// guardrails and output toggles.
    #[arg(long, required_unless_present = "resume")]
    config: Option<PathBuf>,
    /// State file of the run to continue.
    #[arg(long)]
    resume: Option<PathBuf>,
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Ingest and discovery only.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Subcommand)]
enum FixtureCommand {
    /// Write a preset fixture (manifest, data and truth files).
    Generate {
        /// One of the preset names, see `fixture list`.
        name: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    List,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run_cli(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

type CliResult = Result<ExitCode, Box<dyn std::error::Error>>;

fn run_cli(cli: Cli) -> CliResult {
    match cli.command {
        Command::Analyze(args) => analyze(args),
        Command::Compare { state, truth, json } => compare(state, truth, json),
        Command::Fixture { command } => match command {
            FixtureCommand::Generate { name, out } => {
                let spec = fixture::preset(&name).ok_or_else(|| {
                    format!("unknown fixture `{name}`; available: {}", fixture::PRESETS.join(", "))
                })?;
                let dir = out.join(&name);
                fixture::generate(&spec).write_to(&dir)?;
                println!("{}", dir.join(fixture::MANIFEST_FILE).display());
                Ok(ExitCode::SUCCESS)
            }
            FixtureCommand::List => {
                for name in fixture::PRESETS {
                    println!("{name}");
                }
                Ok(ExitCode::SUCCESS)
            }
        },
    }
}

fn analyze(args: AnalyzeArgs) -> CliResult {
    let options = RunOptions {
        dry_run: args.dry_run,
        stop: None,
    };
    let mut config = args.config.as_deref().map(RunConfig::load).transpose()?;
    let outcome = match &args.resume {
        Some(state_path) => {
            let stored = RunState::load(state_path)?;
            if let Some(k) = args.max_iterations {
                if k != stored.config.convergence.max_iterations {
                    return Err(format!(
                        "--max-iterations {k} differs from the {} recorded for this run",
                        stored.config.convergence.max_iterations
                    )
                    .into());
                }
            }
            let analyzer = run::build_analyzer(config.as_ref().unwrap_or(&stored.config))?;
            run::resume(state_path, config, analyzer.as_ref(), &options)?
        }
        None => {
            let mut config = config.take().expect("clap requires --config without --resume");
            if let Some(k) = args.max_iterations {
                config.convergence.max_iterations = k;
            }
            let analyzer = run::build_analyzer(&config)?;
            run::orchestrate(config, analyzer.as_ref(), &options)?
        }
    };
    println!("run {} -> {}", outcome.state.run_number, outcome.run_dir.display());
    if let Some(r) = &outcome.state.refinement {
        println!("iterations: {} converged: {}", r.iterations.len(), r.converged);
    }
    let total = outcome.state.usage.total();
    println!("tokens: {} in / {} out", total.input, total.output);
    Ok(match outcome.status {
        RunStatus::Completed | RunStatus::DryRun => ExitCode::SUCCESS,
        RunStatus::Stopped => ExitCode::SUCCESS,
        RunStatus::Halted(b) => {
            eprintln!(
                "stopped by guardrail in phase {}: {}; resume with: darkdoc analyze --resume {}",
                b.phase.number(),
                b.reason,
                outcome.state_path.display()
            );
            ExitCode::from(2)
        }
    })
}

fn compare(state: PathBuf, truth: PathBuf, json: bool) -> CliResult {
    let state = RunState::load(&state)?;
    let truth = load_truth(&truth)?;
    let report = state.compare(&truth);
    for w in &report.warnings {
        log::warn!("{w}");
    }
    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!(
            "PK   precision {:.3} recall {:.3} F1 {:.3}",
            report.pk.precision, report.pk.recall, report.pk.f1
        );
        println!(
            "FK   precision {:.3} recall {:.3} F1 {:.3}",
            report.fk.precision, report.fk.recall, report.fk.f1
        );
        println!(
            "coverage tables {:.3} columns {:.3}",
            report.table_coverage, report.column_coverage
        );
        println!("overall {:.4} ({})", report.overall, report.grade);
    }
    Ok(ExitCode::SUCCESS)
}
