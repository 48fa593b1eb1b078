use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use edgeplace::critic::Checkpoint;
use edgeplace::harness::results::{compare, ranking_table, write_all};
use edgeplace::harness::{collect_rows, run_training, scenario_for_seed, training_log_csv, Evaluation, ExperimentConfig};
use edgeplace::scenario::{export_trace, import_trace, StateObservation};
use edgeplace::Error;

#[derive(Parser)]
#[command(name = "edgeplace", version, about = "Service placement experiments for edge-enabled vehicular networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a mobility/request trace.
    Generate {
        /// TOML configuration; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Trace CSV to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the critic and write a checkpoint plus a per-episode loss CSV.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Train on this trace instead of generating the configured scenario.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Loss CSV; defaults to the checkpoint path with a `.loss.csv` extension.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run schemes over every (alpha, seed) and write results, summary and figure data.
    Evaluate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Evaluate this trace instead of generating one scenario per seed.
        #[arg(long, conflicts_with = "seeds")]
        trace: Option<PathBuf>,
        /// Critic checkpoint; required when DRLD-SP is among the schemes.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Comma-separated scheme labels.
        #[arg(long, value_delimiter = ',')]
        schemes: Option<Vec<String>>,
        #[arg(long, value_delimiter = ',')]
        alpha: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize a results directory and rank the schemes by mean delay.
    Compare {
        /// Directory holding `results.csv`.
        dir: PathBuf,
    },
}

fn load_config(path: Option<&Path>) -> edgeplace::Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn write_file(path: &Path, contents: &str) -> edgeplace::Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn print_trace_summary(obs: &[StateObservation], vehicle_count: usize) {
    let requests: usize = obs.iter().map(|o| o.total_requests()).sum();
    println!("time units: {}", obs.len());
    println!("vehicles:   {vehicle_count}");
    println!("requests:   {requests}");
    let services = obs.first().map_or(0, |o| o.service_count());
    for s in 0..services {
        let (lo, hi) = obs
            .iter()
            .map(|o| o.demand(s))
            .fold((usize::MAX, 0), |(lo, hi), l| (lo.min(l), hi.max(l)));
        println!("service {s}: lambda min {lo}, max {hi}");
    }
}

fn run(cli: Cli) -> edgeplace::Result<()> {
    match cli.command {
        Command::Generate { config, seed, out } => {
            let cfg = load_config(config.as_deref())?;
            let env = cfg.environment()?;
            let obs = scenario_for_seed(&cfg, &env, seed.unwrap_or(cfg.scenario.seed))?;
            export_trace(&out, &obs)?;
            print_trace_summary(&obs, cfg.scenario.vehicle_count);
        }
        Command::Train {
            config,
            trace,
            checkpoint,
            out,
        } => {
            let cfg = load_config(config.as_deref())?;
            let env = cfg.environment()?;
            let obs = match &trace {
                Some(p) => import_trace(p, &env.area, env.profiles.len())?,
                None => scenario_for_seed(&cfg, &env, cfg.scenario.seed)?,
            };
            let (ck, log) = run_training(&cfg, &env, &obs)?;
            ck.save(&checkpoint)?;
            let loss_path = out.unwrap_or_else(|| checkpoint.with_extension("loss.csv"));
            write_file(&loss_path, &training_log_csv(&log))?;
            println!("episodes: {}, updates: {}", log.episodes.len(), log.total_updates());
            if let Some((first, last)) = log.loss_deciles(0.1) {
                println!("mean loss, first decile: {first:.6}, last decile: {last:.6}");
            }
            println!("checkpoint: {}", checkpoint.display());
            println!("loss log:   {}", loss_path.display());
        }
        Command::Evaluate {
            config,
            trace,
            checkpoint,
            schemes,
            alpha,
            seeds,
            out,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(s) = schemes {
                cfg.evaluation.schemes = s;
            }
            if let Some(a) = alpha {
                cfg.solver.alphas = a;
            }
            if let Some(s) = seeds {
                cfg.evaluation.seeds = s;
            }
            cfg.validate()?;
            let out = out
                .or_else(|| cfg.output_dir.clone())
                .ok_or_else(|| Error::Config("no output directory: pass --out or set output_dir".into()))?;
            let env = cfg.environment()?;
            let scenarios: Vec<(u64, Vec<StateObservation>)> = match &trace {
                Some(p) => vec![(cfg.scenario.seed, import_trace(p, &env.area, env.profiles.len())?)],
                None => cfg
                    .evaluation
                    .seeds
                    .iter()
                    .map(|&s| scenario_for_seed(&cfg, &env, s).map(|o| (s, o)))
                    .collect::<edgeplace::Result<_>>()?,
            };
            let ck = checkpoint.as_deref().map(Checkpoint::load).transpose()?;
            let schemes = cfg.schemes()?;
            let evaluation = Evaluation {
                config: &cfg,
                env: &env,
                scenarios: &scenarios,
                checkpoint: ck.as_ref(),
                keep_traces: false,
            };
            let outcomes = evaluation.run(&schemes, &cfg.solver.alphas)?;
            for o in outcomes.iter().filter(|o| o.report.is_none()) {
                eprintln!(
                    "warning: {} (alpha {}, seed {}) infeasible: {}",
                    o.cell.scheme.label(),
                    o.cell.alpha,
                    o.cell.seed,
                    o.note.as_deref().unwrap_or("")
                );
            }
            let summary = write_all(&out, &collect_rows(&outcomes))?;
            print!("{}", ranking_table(&summary));
            println!("results: {}", out.display());
        }
        Command::Compare { dir } => {
            print!("{}", compare(&dir)?);
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parse { .. } | Error::Validation(_) => 2,
        Error::Io { .. } => 3,
        Error::Infeasible(_) => 4,
        Error::Divergence(_) => 5,
        Error::Domain(_) => 1,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
