use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use slameval::report::render_timeline;
use slameval::runner::{self, LoadedScene, Overrides, RunOptions, RunOutput};
use slameval::sync::{
    estimate_offset, SyncOptions, DEFAULT_COARSE_STEP_S, DEFAULT_RESOLUTION_S, DEFAULT_WINDOW_S,
};
use slameval::synth::{self, PathKind, PathSpec, PerturbationSpec, SyntheticScene};
use slameval::{RpeInterval, Trajectory};

/// Evaluate SLAM trajectories for lifelong operation.
#[derive(Parser)]
#[command(name = "slameval", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Align and evaluate every sequence of a scene on its own.
    Evaluate(EvalArgs),
    /// Align on the first sequence and carry that alignment across the scene.
    Lifelong(EvalArgs),
    /// Score re-localization in one sequence after aligning on another.
    Pair {
        #[command(flatten)]
        eval: EvalArgs,
        /// Sequence used for alignment.
        #[arg(long)]
        first: String,
        /// Sequence whose re-localization is scored.
        #[arg(long)]
        second: String,
    },
    /// Estimate the time offset between two recordings of the same motion.
    Sync(SyncArgs),
    /// Generate synthetic trajectories or a whole synthetic scene.
    #[command(subcommand)]
    Synth(SynthCommand),
}

#[derive(Args)]
struct EvalArgs {
    /// Scene manifest (TOML).
    #[arg(long, short)]
    manifest: PathBuf,
    /// Estimate files in manifest order; replaces the manifest's estimate paths.
    #[arg(long = "estimate", short)]
    estimates: Vec<PathBuf>,
    /// ATE threshold, meters.
    #[arg(long)]
    ate_threshold: Option<f64>,
    /// AOE threshold, degrees.
    #[arg(long)]
    aoe_threshold: Option<f64>,
    /// Validity window of one estimate, seconds.
    #[arg(long)]
    delta: Option<f64>,
    /// Re-localization decay, seconds.
    #[arg(long)]
    tau: Option<f64>,
    /// RPE interval, seconds.
    #[arg(long, conflicts_with = "rpe_frames")]
    rpe_interval: Option<f64>,
    /// RPE interval, frames.
    #[arg(long)]
    rpe_frames: Option<usize>,
    /// Also estimate a scale when aligning.
    #[arg(long)]
    scale_free: bool,
    /// Report path; stdout when omitted.
    #[arg(long, short)]
    report: Option<PathBuf>,
    /// Per-pose errors as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Correctness timeline as SVG.
    #[arg(long)]
    svg: Option<PathBuf>,
}

impl EvalArgs {
    fn options(&self) -> RunOptions {
        let rpe_interval = match (self.rpe_interval, self.rpe_frames) {
            (Some(s), _) => Some(RpeInterval::Seconds(s)),
            (None, Some(n)) => Some(RpeInterval::Frames(n)),
            (None, None) => None,
        };
        RunOptions {
            overrides: Overrides {
                ate_threshold: self.ate_threshold,
                aoe_threshold: self.aoe_threshold,
                delta: self.delta,
                tau: self.tau,
                rpe_interval,
            },
            scale_free: self.scale_free,
        }
    }

    fn load(&self) -> Result<LoadedScene> {
        Ok(runner::load_scene(&self.manifest, &self.estimates)?)
    }

    fn emit(&self, output: &RunOutput) -> Result<()> {
        let json = output.report.to_json()?;
        match &self.report {
            Some(path) => write(path, &json)?,
            None => print!("{json}"),
        }
        if let Some(path) = &self.csv {
            write(path, &output.pose_errors_csv())?;
        }
        if let Some(path) = &self.svg {
            write(path, &render_timeline(&output.report))?;
        }
        let scene = &output.report.scene;
        eprintln!(
            "{}: CR {} over {} s, correct-only ATE RMSE {}",
            output.report.manifest.scene,
            scene.cr,
            scene.total_span,
            scene
                .gated_ate_rmse
                .map_or_else(|| "n/a".to_string(), |v| format!("{v} m"))
        );
        Ok(())
    }
}

#[derive(Args)]
struct SyncArgs {
    /// Reference trajectory.
    #[arg(long)]
    reference: PathBuf,
    /// Trajectory whose clock offset is estimated.
    #[arg(long)]
    target: PathBuf,
    /// Half-width of the searched offset range, seconds.
    #[arg(long, default_value_t = DEFAULT_WINDOW_S)]
    window: f64,
    /// Coarse grid step, seconds.
    #[arg(long, default_value_t = DEFAULT_COARSE_STEP_S)]
    step: f64,
    /// Final resolution, seconds.
    #[arg(long, default_value_t = DEFAULT_RESOLUTION_S)]
    resolution: f64,
    /// Output path; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Loop,
    Corridor,
    UShape,
    BackAndForth,
}

impl From<KindArg> for PathKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Loop => PathKind::Loop,
            KindArg::Corridor => PathKind::Corridor,
            KindArg::UShape => PathKind::UShape,
            KindArg::BackAndForth => PathKind::BackAndForth,
        }
    }
}

#[derive(Subcommand)]
enum SynthCommand {
    /// Write one trajectory, optionally perturbed.
    Trajectory {
        #[arg(long, value_enum, default_value = "loop")]
        kind: KindArg,
        /// Seconds.
        #[arg(long, default_value_t = 60.0)]
        duration: f64,
        /// Hz.
        #[arg(long, default_value_t = 30.0)]
        rate: f64,
        /// Timestamp of the first pose, seconds.
        #[arg(long, default_value_t = 0.0)]
        start: f64,
        /// Characteristic path length, meters.
        #[arg(long)]
        length: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// TOML file with a [perturbation] table.
        #[arg(long)]
        perturb: Option<PathBuf>,
        /// Seed of the perturbation noise; defaults to --seed.
        #[arg(long)]
        perturb_seed: Option<u64>,
        /// Output trajectory file.
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Write a three-sequence scene with manifest, ground truth and estimates.
    Scene {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory.
        #[arg(long, short)]
        output: PathBuf,
    },
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Evaluate(args) => {
            let scene = args.load()?;
            args.emit(&runner::run_per_sequence(&scene, &args.options())?)
        }
        Command::Lifelong(args) => {
            let scene = args.load()?;
            args.emit(&runner::run_lifelong(&scene, &args.options())?)
        }
        Command::Pair {
            eval,
            first,
            second,
        } => {
            let scene = eval.load()?;
            eval.emit(&runner::run_pair(&scene, &first, &second, &eval.options())?)
        }
        Command::Sync(args) => {
            let reference = Trajectory::from_path(&args.reference)?;
            let target = Trajectory::from_path(&args.target)?;
            let options = SyncOptions {
                window: args.window,
                coarse_step: args.step,
                resolution: args.resolution,
            };
            let estimate = estimate_offset(&reference, &target, &options)?;
            let json = serde_json::to_string_pretty(&estimate)? + "\n";
            match &args.output {
                Some(path) => write(path, &json),
                None => {
                    print!("{json}");
                    Ok(())
                }
            }
        }
        Command::Synth(SynthCommand::Trajectory {
            kind,
            duration,
            rate,
            start,
            length,
            seed,
            perturb,
            perturb_seed,
            output,
        }) => {
            let mut spec = PathSpec::new(kind.into(), duration, rate).starting_at(start);
            if let Some(l) = length {
                spec = spec.with_length(l);
            }
            let mut traj = synth::generate(&spec, seed)?;
            if let Some(path) = perturb {
                let text = fs::read_to_string(&path)
                    .with_context(|| format!("cannot read {}", path.display()))?;
                let p = PerturbationSpec::from_toml(&text)
                    .with_context(|| format!("invalid perturbation in {}", path.display()))?;
                traj = synth::perturb(&traj, &p, perturb_seed.unwrap_or(seed))?;
            }
            traj.write_to_path(&output)?;
            Ok(())
        }
        Command::Synth(SynthCommand::Scene { seed, output }) => {
            fs::create_dir_all(&output)
                .with_context(|| format!("cannot create {}", output.display()))?;
            SyntheticScene::generate(seed)?.write_to(&output)?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
