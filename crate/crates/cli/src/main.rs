use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use smoothlab_core::envs::Environment;
use smoothlab_core::metrics::evaluate;
use smoothlab_core::rng::{stream, Stream};
use smoothlab_core::runner::{
    ablate_lambda, emit_report, format_inspect_csv, loss_inspect, run_experiment, Checkpoint, InspectMode,
    InspectOptions, LambdaGrid, RunConfig, DEFAULT_GRID, OUTPUT_ROOT_ENV, SWEEP_KINDS,
};
use smoothlab_core::{Aggregation, Error};

#[derive(Parser)]
#[command(name = "smoothlab", version, about = "Action-smoothness regularization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every seed of a run config and write its manifest.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Train only this seed instead of the config's list.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate a saved checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
    },
    /// Sweep the temporal weight for CAPS and Grad-CAPS.
    AblateLambda {
        #[arg(long)]
        config: PathBuf,
        /// λ values, space- or comma-separated.
        #[arg(long, num_args = 1.., allow_negative_numbers = true, default_values_t = DEFAULT_GRID.map(String::from))]
        grid: Vec<String>,
    },
    /// Print smoothness losses of action sequences, one per CSV line.
    LossInspect {
        /// CSV file, or `-` for stdin.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "all")]
        mode: String,
        /// Overrides the default ε (0 for division, 1e-3 for tanh).
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, default_value = "sqrt_sum_sq")]
        aggregation: String,
    },
    /// Comparison table and trajectory overlays over finished runs.
    Report {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        /// Output directory; defaults to `report` under the output root.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: &Path) -> Result<RunConfig, Error> {
    Ok(RunConfig::load(path)?.with_env_overrides())
}

fn run(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Train { config, seed } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.seeds = vec![s];
            }
            let m = run_experiment(&cfg)?;
            println!("run {} ({}) on {} -> {}", m.run_id, m.method, m.env_label, cfg.run_dir().display());
            println!("seed,best_step,final_mean_return,final_std_return,final_fluctuation,wall_time_secs");
            for s in &m.seeds {
                println!(
                    "{},{},{},{},{},{:.1}",
                    s.seed, s.best_step, s.final_mean_return, s.final_std_return, s.final_fluctuation, s.wall_time_secs
                );
            }
        }
        Command::Eval { checkpoint, episodes } => {
            let c = Checkpoint::load(&checkpoint)?;
            let mut env: Box<dyn Environment> = c.env.build()?;
            let e = evaluate(&c.policy, env.as_mut(), episodes, &mut stream(c.seed, Stream::FinalEval))?;
            println!("mean_return,std_return,action_fluctuation,lipschitz_k1,lipschitz_k2");
            println!("{},{},{},{},{}", e.mean_return, e.std_return, e.fluctuation, e.lipschitz_k1, e.lipschitz_k2);
        }
        Command::AblateLambda { config, grid } => {
            let cfg = load_config(&config)?;
            let grid = LambdaGrid::parse(&grid)?;
            let r = ablate_lambda(&cfg, &grid, &SWEEP_KINDS)?;
            println!("# lambda_grid: {}", r.grid.raw.join(","));
            println!("kind,lambda,mean_return,std_return,fluctuation");
            for p in &r.points {
                println!("{},{},{},{},{}", p.kind.label(), p.lambda, p.mean_return, p.std_return, p.fluctuation);
            }
            println!("# written to {}", r.dir.display());
        }
        Command::LossInspect { input, mode, epsilon, aggregation } => {
            let text = if input.as_os_str() == "-" {
                std::io::read_to_string(std::io::stdin()).map_err(|e| Error::Malformed(format!("stdin: {e}")))?
            } else {
                std::fs::read_to_string(&input)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", input.display())))?
            };
            let aggregation = match aggregation.as_str() {
                "sqrt_sum_sq" => Aggregation::SqrtSumSq,
                "mean" => Aggregation::Mean,
                other => return Err(Error::Config(format!("unknown aggregation {other:?} (sqrt_sum_sq, mean)"))),
            };
            let opts = InspectOptions { mode: mode.parse::<InspectMode>()?, epsilon, aggregation };
            print!("{}", format_inspect_csv(&loss_inspect(&text, &opts)?));
        }
        Command::Report { runs, out } => {
            let out = out.unwrap_or_else(|| {
                std::env::var_os(OUTPUT_ROOT_ENV)
                    .filter(|v| !v.is_empty())
                    .map_or_else(|| PathBuf::from("runs"), PathBuf::from)
                    .join("report")
            });
            let r = emit_report(&runs, &out)?;
            println!("run_id,method,seeds,mean_return,std_return,fluctuation");
            for m in &r.rows {
                println!("{},{},{},{},{},{}", m.run_id, m.method, m.seeds, m.mean_return, m.std_return, m.fluctuation);
            }
            for f in &r.files {
                println!("# wrote {}", f.display());
            }
        }
    }
    Ok(())
}

/// 1 for bad input, 2 for failures while running.
fn exit_code(e: &Error) -> u8 {
    if e.is_config_error() {
        1
    } else {
        2
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
