use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bfl_core::config::{load_config, write_effective_config, ConfigDocument};
use bfl_core::harness::{
    self, parse_ratios, ratio_label, AgentCheckpoint, AgentKind, EvalReport, RunConfig,
};
use bfl_core::Error;
use clap::{Parser, Subcommand};

const EXIT_USAGE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(
    name = "bfl",
    version,
    about = "Resource management for blockchain-enabled federated learning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent and write metrics, curves and a checkpoint.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = parse_agent)]
        agent: AgentKind,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `run.episodes` from the config.
        #[arg(long)]
        episodes: Option<u64>,
    },
    /// Evaluate a checkpoint with exploration off.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        episodes: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and evaluate a DQN per data-quality ratio.
    SweepQuality {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated ratios, e.g. `1:1:1,4:2:1`.
        #[arg(long)]
        ratios: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a config and print it with every default filled in.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn parse_agent(s: &str) -> Result<AgentKind, String> {
    s.parse()
        .map_err(|_| "expected one of dqn, qlearn, greedy, random".to_string())
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::InvalidParameter { .. } | Error::UnstableQueue { .. } => {
                EXIT_VALIDATION
            }
            _ => EXIT_RUNTIME,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let first = e.to_string();
            let first = first.lines().next().unwrap_or("usage error");
            eprintln!("error: {}", first.trim_start_matches("error: "));
            eprintln!("{}", e.render().to_string().trim_end());
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message.replace('\n', " "));
            ExitCode::from(f.code)
        }
    }
}

fn load(path: &Path) -> Result<(RunConfig, ConfigDocument), Failure> {
    load_config(path).map_err(Failure::from)
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Validate { config } => {
            let (_, doc) = load(&config)?;
            let text = serde_json::to_string_pretty(&doc).map_err(Error::from)?;
            println!("{text}");
        }
        Command::Train {
            config,
            agent,
            seed,
            out,
            episodes,
        } => {
            let (mut run, doc) = load(&config)?;
            run.agent = agent;
            run.seed = seed;
            if let Some(n) = episodes {
                if n < 1 {
                    return Err(Failure {
                        code: EXIT_VALIDATION,
                        message: "--episodes must be at least 1".into(),
                    });
                }
                run.episodes = n;
            }
            run.out_dir = Some(out.clone());
            let mut doc = doc;
            doc.agent.kind = Some(agent);
            doc.run.seed = Some(seed);
            doc.run.episodes = Some(run.episodes);
            write_effective_config(&doc, &out)?;
            let outcome = harness::train(&run)?;
            let tail = &outcome.metrics[outcome.metrics.len().saturating_sub(run.metrics_window)..];
            let mean = tail.iter().map(|m| m.cum_reward).sum::<f64>() / tail.len() as f64;
            println!(
                "trained {} for {} episodes; mean cumulative reward over last {}: {mean:.4}",
                agent,
                run.episodes,
                tail.len()
            );
            println!("wrote {}", out.display());
        }
        Command::Eval {
            config,
            checkpoint,
            episodes,
            seed,
            out,
        } => {
            let (mut run, mut doc) = load(&config)?;
            if episodes < 1 {
                return Err(Failure {
                    code: EXIT_VALIDATION,
                    message: "--episodes must be at least 1".into(),
                });
            }
            run.eval_episodes = episodes;
            run.seed = seed;
            run.out_dir = Some(out.clone());
            doc.run.eval_episodes = Some(episodes);
            doc.run.seed = Some(seed);
            let ckpt = AgentCheckpoint::load(&checkpoint)?;
            write_effective_config(&doc, &out)?;
            let report = harness::evaluate(&run, ckpt)?;
            print_report(&report);
        }
        Command::SweepQuality {
            config,
            ratios,
            out,
        } => {
            let (mut run, doc) = load(&config)?;
            let ratios = parse_ratios(&ratios).map_err(|e| Failure {
                code: EXIT_USAGE,
                message: e.to_string(),
            })?;
            run.out_dir = Some(out.clone());
            write_effective_config(&doc, &out)?;
            let rows = harness::sweep_quality(&run, &ratios)?;
            println!("ratio,device,mean_data,share");
            for r in &rows {
                println!("{},{},{:.4},{:.4}", r.ratio, r.device, r.mean_data, r.share);
            }
            let labels: Vec<String> = ratios.iter().map(|r| ratio_label(r)).collect();
            println!(
                "wrote {} ({})",
                out.join("sweep.csv").display(),
                labels.join(", ")
            );
        }
    }
    Ok(())
}

fn print_report(report: &EvalReport) {
    println!("column,mean,std");
    for c in &report.summary {
        println!("{},{},{}", c.column, c.mean, c.std);
    }
}
