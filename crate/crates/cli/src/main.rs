use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use dmpp_core::model::{DmpModel, Gains, TrainingOptions};

use dmpp_cli::bench::{self, BenchConfig};
use dmpp_cli::io;
use dmpp_cli::output;
use dmpp_cli::runner::{self, RunOptions};
use dmpp_cli::scenario::{self, GeneralizationTag};

#[derive(Parser)]
#[command(
    name = "dmpp",
    version,
    about = "Movement primitives with online weight adaptation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Against {
    Dmpp,
    Classical,
    GoalFilter,
}

impl From<Against> for GeneralizationTag {
    fn from(a: Against) -> Self {
        match a {
            Against::Dmpp => GeneralizationTag::Dmpp,
            Against::Classical => GeneralizationTag::Classical,
            Against::GoalFilter => GeneralizationTag::ClassicalGoalFilter,
        }
    }
}

#[derive(clap::Args)]
struct RunArgs {
    /// Scenario files; several are run in parallel.
    #[arg(required = true)]
    scenarios: Vec<PathBuf>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Override the scenario time step.
    #[arg(long)]
    dt: Option<f64>,
    /// Write per-step adaptation records.
    #[arg(long)]
    dump_debug: bool,
    /// Also run a reverse pass from the final weights.
    #[arg(long)]
    reverse: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to a demonstration CSV.
    Train {
        demo: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, default_value_t = 30)]
        kernels: usize,
        #[arg(long, default_value_t = 1.5)]
        width_factor: f64,
        #[arg(long, default_value_t = 1e-6)]
        ridge: f64,
        #[arg(long, default_value_t = 300.0)]
        stiffness: f64,
    },
    /// Run scenarios.
    Run {
        #[command(flatten)]
        args: RunArgs,
        /// Also run the scene with another generalisation.
        #[arg(long, value_enum)]
        compare: Option<Against>,
    },
    /// Run scenarios together with another generalisation.
    Compare {
        #[command(flatten)]
        args: RunArgs,
        #[arg(long, value_enum, default_value = "classical")]
        against: Against,
    },
    /// Measure per-step adaptation latency.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = [10, 20, 40, 80])]
        kernels: Vec<usize>,
        #[arg(long, default_value_t = 6)]
        dofs: usize,
        #[arg(long, default_value_t = 2000)]
        steps: usize,
        #[arg(long, default_value_t = 200)]
        warmup: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Check scenario files and train their models.
    Validate {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Train {
            demo,
            out,
            kernels,
            width_factor,
            ridge,
            stiffness,
        } => {
            let d = io::read_demo(&demo)?;
            let opts = TrainingOptions {
                kernels,
                width_factor,
                ridge,
            };
            let (model, report) =
                DmpModel::train(&d, &opts, Gains::critically_damped(d.dofs(), stiffness)?)?;
            io::write_model(&model, &out)?;
            println!(
                "trained {} kernels x {} dofs, max residual {:.3e}, rms {:.3e} -> {}",
                model.kernels(),
                model.dofs(),
                report.max_residual,
                report.rms_residual,
                out.display()
            );
            Ok(true)
        }
        Command::Run { args, compare } => run_all(&args, compare.map(Into::into)),
        Command::Compare { args, against } => run_all(&args, Some(against.into())),
        Command::Bench {
            kernels,
            dofs,
            steps,
            warmup,
            seed,
            json,
        } => {
            let report = bench::run(&BenchConfig {
                kernels,
                dofs,
                steps,
                warmup,
                seed,
            })?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{}", report.table());
            }
            Ok(true)
        }
        Command::Validate { scenarios } => {
            let mut ok = true;
            for path in &scenarios {
                match validate(path) {
                    Ok(msg) => println!("ok    {}: {msg}", path.display()),
                    Err(e) => {
                        ok = false;
                        println!("FAIL  {}: {e:#}", path.display());
                    }
                }
            }
            Ok(ok)
        }
    }
}

fn base_dir(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

fn validate(path: &Path) -> Result<String> {
    let s = scenario::load(path)?;
    let p = s.prepare(base_dir(path))?;
    Ok(format!(
        "{} ({} dofs, {} kernels, training residual {:.2e})",
        s.name,
        p.model.dofs(),
        p.model.kernels(),
        p.train_report.max_residual
    ))
}

fn run_all(args: &RunArgs, compare: Option<GeneralizationTag>) -> Result<bool> {
    let opts = RunOptions {
        compare,
        reverse: args.reverse,
        dt: args.dt,
        record_debug: args.dump_debug,
    };
    let results: Vec<Result<String>> = std::thread::scope(|scope| {
        let handles: Vec<_> = args
            .scenarios
            .iter()
            .map(|path| scope.spawn(|| run_scenario(path, &args.out_dir, &opts)))
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(anyhow::anyhow!("worker panicked")))
            })
            .collect()
    });
    let mut ok = true;
    for (path, r) in args.scenarios.iter().zip(results) {
        match r {
            Ok(text) => print!("{text}"),
            Err(e) => {
                ok = false;
                eprintln!("{}: {e:#}", path.display());
            }
        }
    }
    Ok(ok)
}

fn run_scenario(path: &Path, out_dir: &Path, opts: &RunOptions) -> Result<String> {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".to_owned());
    let result = (|| {
        let s = scenario::load(path)?;
        let prepared = s.prepare(base_dir(path))?;
        let runs = runner::execute(&prepared, opts)?;
        let mut text = format!("{} ({})\n", s.name, path.display());
        for run in &runs {
            let files = output::write_run(out_dir, &s.name, run)?;
            let m = &run.metrics;
            text += &format!(
                "  {:<24} endpoint {:.3e}  peak |ddy| {:.3e}  peak |f_rep| {:.3e}  -> {}\n",
                m.label,
                m.endpoint_error,
                m.peak_acceleration,
                m.peak_repulsion,
                files[0].display()
            );
        }
        std::fs::write(
            out_dir.join(format!("{}.summary.json", s.name)),
            output::summary_json(&s.name, &runs)?,
        )
        .context("cannot write summary")?;
        Ok(text)
    })();
    if let Err(e) = &result {
        if let Err(w) = output::write_error(out_dir, &name, e) {
            log::warn!("could not write error report: {w:#}");
        }
    }
    result
}
