use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::builder::PossibleValuesParser;
use clap::{Parser, Subcommand};

use slackline::controller::ControllerKind;
use slackline::encoder::{load_encoder, save_encoder, train};
use slackline::explore::{collect, load_dataset, save_dataset, Dataset};
use slackline::harness::{self, Cell, Models, SweepParam};
use slackline::planner::{load_autoencoder, save_autoencoder, train_autoencoder, PlannerKind};
use slackline::policy::EpisodeResult;
use slackline::{Error, PipelineConfig, TaskConfig};

#[derive(Parser)]
#[command(
    name = "slackline",
    version,
    about = "Bimanual rope rearrangement pipeline"
)]
struct Cli {
    /// JSON file with optional `task`, `train` and `collect` sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Explore random environments and store successful episodes.
    Collect {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train the contrastive state encoder.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Train the reconstruction autoencoder used by the ablation planner.
    TrainAe {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Run one episode and print its result as JSON.
    Run {
        #[command(flatten)]
        models: ModelArgs,
        #[arg(long, default_value = "contrastive", value_parser = PossibleValuesParser::new(PlannerKind::ALL.map(PlannerKind::name)))]
        planner: String,
        #[arg(long, default_value = "leader-follower", value_parser = PossibleValuesParser::new(ControllerKind::ALL.map(ControllerKind::name)))]
        controller: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the result here instead of only printing it.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write one SVG per step into this directory.
        #[arg(long)]
        render: Option<PathBuf>,
    },
    /// Evaluate a matrix of planner+controller cells on shared seeds.
    Eval {
        #[command(flatten)]
        models: ModelArgs,
        /// `full` or comma-separated `planner+controller` cells.
        #[arg(long, default_value = "full")]
        matrix: String,
        #[arg(long, default_value_t = 500)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Evaluate cells across values of one task parameter.
    Sweep {
        #[command(flatten)]
        models: ModelArgs,
        #[arg(long, value_parser = PossibleValuesParser::new(SweepParam::ALL.map(SweepParam::name)))]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, default_value = "contrastive+leader-follower")]
        matrix: String,
        #[arg(long, default_value_t = 500)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Render a stored episode result as one SVG per step.
    Render {
        #[arg(long)]
        result: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(clap::Args)]
struct ModelArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    encoder: Option<PathBuf>,
    #[arg(long)]
    autoencoder: Option<PathBuf>,
}

impl ModelArgs {
    fn load(&self) -> slackline::Result<Models> {
        let ds = load_dataset(&self.dataset)?;
        let enc = self
            .encoder
            .as_ref()
            .map(load_encoder)
            .transpose()?
            .map(|(e, _)| e);
        let ae = self
            .autoencoder
            .as_ref()
            .map(load_autoencoder)
            .transpose()?
            .map(|(a, _)| a);
        Models::new(ds, enc, ae)
    }
}

enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Invariant(_) | Error::InfeasibleAction(_) => 3,
                _ => 2,
            })
        }
    }
}

fn pipeline(path: Option<&Path>) -> slackline::Result<PipelineConfig> {
    path.map_or_else(|| Ok(PipelineConfig::default()), PipelineConfig::load)
}

/// The explicit config wins; otherwise the task the dataset was collected on.
fn task_for(path: Option<&Path>, ds: &Dataset) -> slackline::Result<TaskConfig> {
    Ok(match path {
        Some(p) => PipelineConfig::load(p)?.task,
        None => ds.config.clone(),
    })
}

fn cells(matrix: &str) -> Result<Vec<Cell>, Failure> {
    harness::parse_matrix(matrix).ok_or_else(|| {
        let planners: Vec<_> = PlannerKind::ALL.map(PlannerKind::name).into();
        let controllers: Vec<_> = ControllerKind::ALL.map(ControllerKind::name).into();
        Failure::Usage(format!(
            "bad matrix {matrix:?}: expected `full` or planner+controller cells with planners {{{}}} and controllers {{{}}}",
            planners.join(", "),
            controllers.join(", ")
        ))
    })
}

fn write(path: &Path, text: &str) -> slackline::Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn run(cli: Cli) -> Result<(), Failure> {
    let config = cli.config.as_deref();
    match cli.cmd {
        Cmd::Collect {
            out,
            episodes,
            seed,
        } => {
            let pc = pipeline(config)?;
            let mut params = pc.collect;
            if let Some(n) = episodes {
                params.episodes = n;
            }
            let c = collect(&pc.task, &params, seed)?;
            save_dataset(&c.dataset, &out)?;
            eprintln!(
                "{} episodes, {} states, {:.1}% of environments explored successfully",
                c.dataset.episodes.len(),
                c.dataset.num_states(),
                100.0 * c.success_ratio()
            );
        }
        Cmd::Train {
            dataset,
            out,
            seed,
            epochs,
        } => {
            let mut tc = pipeline(config)?.train;
            tc.seed = seed.unwrap_or(tc.seed);
            tc.epochs = epochs.unwrap_or(tc.epochs);
            let ds = load_dataset(&dataset)?;
            let rep = train(&ds, &tc)?;
            save_encoder(&rep.encoder, &tc, &out)?;
            eprintln!(
                "loss {:.4} -> {:.4}",
                rep.initial_loss,
                rep.epoch_loss.last().copied().unwrap_or(f64::NAN)
            );
        }
        Cmd::TrainAe {
            dataset,
            out,
            seed,
            epochs,
        } => {
            let mut tc = pipeline(config)?.train;
            tc.seed = seed.unwrap_or(tc.seed);
            tc.epochs = epochs.unwrap_or(tc.epochs);
            let ds = load_dataset(&dataset)?;
            let rep = train_autoencoder(&ds, &tc)?;
            save_autoencoder(&rep.autoencoder, &tc, &out)?;
            eprintln!(
                "loss {:.6} -> {:.6}",
                rep.initial_loss,
                rep.epoch_loss.last().copied().unwrap_or(f64::NAN)
            );
        }
        Cmd::Run {
            models,
            planner,
            controller,
            seed,
            out,
            render,
        } => {
            let models = models.load()?;
            let cfg = task_for(config, &models.dataset)?;
            let cell = Cell::new(
                PlannerKind::from_name(&planner).expect("checked by clap"),
                ControllerKind::from_name(&controller).expect("checked by clap"),
            );
            let res = harness::run_single(&models, &cell, &cfg, seed)?;
            let json = res.to_json();
            if let Some(p) = out {
                write(&p, &(json.clone() + "\n"))?;
            }
            if let Some(dir) = render {
                harness::render_episode(&res, &cfg, dir)?;
            }
            println!("{json}");
        }
        Cmd::Eval {
            models,
            matrix,
            episodes,
            seed,
            out,
            workers,
        } => {
            let cells = cells(&matrix)?;
            let models = models.load()?;
            let cfg = task_for(config, &models.dataset)?;
            let ev = harness::evaluate(&models, &cells, episodes, &cfg, seed, workers)?;
            harness::write_evaluation(&out, &ev, &cfg, &models)?;
            print!("{}", harness::metrics_csv(&ev.metrics));
        }
        Cmd::Sweep {
            models,
            param,
            values,
            matrix,
            episodes,
            seed,
            out,
            workers,
        } => {
            let cells = cells(&matrix)?;
            let param = SweepParam::from_name(&param).expect("checked by clap");
            let models = models.load()?;
            let cfg = task_for(config, &models.dataset)?;
            let s = harness::sweep(
                &models, &cells, param, &values, episodes, &cfg, seed, workers,
            )?;
            harness::write_sweep(&out, &s, &cfg, &models)?;
            print!("{}", harness::sweep_csv(&s));
        }
        Cmd::Render { result, out } => {
            let cfg = pipeline(config)?.task;
            let text = std::fs::read_to_string(&result).map_err(|e| Error::Io {
                path: result.clone(),
                source: e,
            })?;
            let line = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
            let res: EpisodeResult =
                serde_json::from_str(line).map_err(|e| Error::MalformedFile {
                    path: result.clone(),
                    line: 1,
                    msg: e.to_string(),
                })?;
            let paths = harness::render_episode(&res, &cfg, &out)?;
            eprintln!("{} frames written to {}", paths.len(), out.display());
        }
    }
    Ok(())
}
