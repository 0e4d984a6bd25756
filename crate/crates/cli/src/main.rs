use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use dyad_bench::controllers::ControllerKind;
use dyad_bench::harness::{
    list_logs, motion_trials, read_log, synthetic_logs, synthetic_tasks, write_json, write_log, Bench, BenchConfig,
    LeaderSource, TaskScript,
};
use dyad_bench::intent::{evaluate_rollouts, train, Corpus, ModelConfig, MotionTrial, RecurrentModel};
use dyad_bench::leader::TaskSpec;
use dyad_bench::metrics::{evaluate, BenchSummary};
use dyad_bench::session::serve;
use dyad_bench::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "dyad", version, about = "Planar co-manipulation test bench")]
struct Cli {
    /// Config file (TOML). Falls back to $DYAD_BENCH_CONFIG, then ./dyad.toml.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Controller {
    Bmvic,
    Evic,
    Nnpc,
}

impl From<Controller> for ControllerKind {
    fn from(c: Controller) -> Self {
        match c {
            Controller::Bmvic => ControllerKind::Bmvic,
            Controller::Evic => ControllerKind::Evic,
            Controller::Nnpc => ControllerKind::Nnpc,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run scripted-leader trials and write logs, reports and a summary.
    Sim {
        /// One or more controllers.
        #[arg(long, value_enum, num_args = 1.., default_values_t = [Controller::Evic])]
        controller: Vec<Controller>,
        /// Task script (JSON). Defaults to the two standard tasks.
        #[arg(long)]
        task: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        reps: usize,
        /// Trained model for the nnpc controller.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic training corpus (scripted leader against EVIC).
    Corpus {
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the intent model on trial logs (*.jsonl) or motion CSVs.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Curriculum phases after the teacher-forced phase.
        #[arg(long, default_value_t = 50)]
        epochs: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        model: PathBuf,
        /// Use the full-size network (3 layers of 100) instead of the desk-scale one.
        #[arg(long)]
        full: bool,
    },
    /// Score a model's 50-step rollouts against the persistence baseline.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 50)]
        stride: usize,
    },
    /// Score trial logs and write a summary table.
    Report {
        #[arg(long)]
        logs: PathBuf,
        #[arg(long)]
        csv: PathBuf,
    },
    /// Serve a live session for an external leader client.
    Serve {
        #[arg(long)]
        port: Option<u16>,
        #[arg(long, value_enum, default_value_t = Controller::Evic)]
        controller: Controller,
        /// Task script; its first task is the one served.
        #[arg(long)]
        task: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut config = BenchConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Sim {
            controller,
            task,
            seed,
            reps,
            model,
            out,
        } => {
            if let Some(s) = seed {
                config.seed = Some(s);
            }
            if config.seed.is_none() {
                return Err(Error::Config("scripted runs need --seed or a seed in the config".into()));
            }
            if let Some(m) = model {
                config.controller.nnpc.model = Some(m);
            }
            let script = load_script(task.as_deref())?;
            let kinds: Vec<ControllerKind> = controller.into_iter().map(Into::into).collect();
            let bench = Bench::new(config)?;
            let batch = bench.run_batch(&script, &kinds, reps, Some(&out))?;
            for (name, report) in batch.trials.iter().zip(&batch.reports) {
                println!(
                    "{name}: completed {} t_c {} mje {:.3} mtm {:.3}",
                    report.completed,
                    report
                        .completion_time
                        .map_or_else(|| "-".into(), |t| format!("{t:.2} s")),
                    report.mje,
                    report.mtm
                );
            }
            for (name, e) in &batch.failures {
                eprintln!("{name}: failed: {e}");
            }
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Corpus { trials, seed, out } => {
            config.seed = Some(seed);
            fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;
            let tasks = synthetic_tasks(trials, seed);
            let logs = synthetic_logs(&config, &tasks, seed)?;
            for (i, log) in logs.iter().enumerate() {
                write_log(&out.join(format!("trial-{i:04}.jsonl")), log)?;
            }
            println!("wrote {} trials to {}", logs.len(), out.display());
            Ok(())
        }
        Command::Train {
            data,
            epochs,
            seed,
            model,
            full,
        } => {
            let trials = load_motion(&data)?;
            let corpus = Corpus::new(trials, 0.75, seed)?;
            let mut schedule = config.training.clone();
            schedule.phases = epochs;
            schedule.seed = seed;
            let net = if full { ModelConfig::full() } else { config.network };
            let (trained, history) = train(&corpus, net, &schedule)?;
            trained.save(&model)?;
            let score = evaluate_rollouts(&trained, &corpus, trained.config.horizon, 50)?;
            println!(
                "phase 0: {} iterations (converged: {}); holdout rollout RMSE {:.4} vs persistence {:.4}",
                history.phases.first().map_or(0, |p| p.iterations),
                history.phase0_converged,
                score.model_rmse,
                score.persistence_rmse
            );
            println!("wrote {}", model.display());
            Ok(())
        }
        Command::Eval { model, data, stride } => {
            let m = RecurrentModel::load(&model)?;
            let corpus = Corpus::for_evaluation(load_motion(&data)?, m.standardization)?;
            let score = evaluate_rollouts(&m, &corpus, m.config.horizon, stride)?;
            println!("{}", serde_json::to_string_pretty(&score)?);
            Ok(())
        }
        Command::Report { logs, csv } => {
            let paths = list_logs(&logs)?;
            if paths.is_empty() {
                log::warn!("no trial logs under {}", logs.display());
            }
            let mut reports = Vec::with_capacity(paths.len());
            for p in &paths {
                let log = read_log(p)?;
                let report = evaluate(&log, &config.metrics)?;
                write_json(&p.with_extension("report.json"), &report)?;
                reports.push(report);
            }
            let summary = BenchSummary::from_reports(&reports);
            let f = fs::File::create(&csv).map_err(|e| io_err(&csv, e))?;
            summary.write_csv(BufWriter::new(f))?;
            println!("scored {} logs; wrote {}", reports.len(), csv.display());
            Ok(())
        }
        Command::Serve {
            port,
            controller,
            task,
            model,
        } => {
            config.leader = LeaderSource::Live;
            if let Some(p) = port {
                config.service.port = p;
            }
            let kind: ControllerKind = controller.into();
            let model = match model.or_else(|| config.controller.nnpc.model.clone()) {
                Some(p) => Some(Arc::new(RecurrentModel::load(&p)?)),
                None if kind == ControllerKind::Nnpc => {
                    return Err(Error::Config("the nnpc controller needs --model".into()))
                }
                None => None,
            };
            let task: TaskSpec = load_script(task.as_deref())?
                .tasks
                .into_iter()
                .next()
                .ok_or_else(|| Error::Config("task script is empty".into()))?;
            serve(&config, kind, task, model)
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Config(format!("{}: {e}", path.display()))
}

fn load_script(path: Option<&Path>) -> Result<TaskScript> {
    match path {
        Some(p) => TaskScript::load(p),
        None => Ok(TaskScript::standard()),
    }
}

/// Motion trials from every `*.jsonl` log and `*.csv` file under `dir`.
fn load_motion(dir: &Path) -> Result<Vec<MotionTrial>> {
    let logs = list_logs(dir)?
        .iter()
        .map(|p| read_log(p))
        .collect::<Result<Vec<_>>>()?;
    let mut trials = motion_trials(&logs, 200.0)?;
    let mut csvs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    csvs.sort();
    for p in csvs {
        let f = fs::File::open(&p).map_err(|e| io_err(&p, e))?;
        let name = p.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
        trials.push(MotionTrial::read_csv(name, f)?);
    }
    if trials.is_empty() {
        return Err(Error::Config(format!("no trial logs or CSVs under {}", dir.display())));
    }
    Ok(trials)
}
