//! End-to-end evaluation runs: load a manifest and its trajectories, apply
//! flag overrides, evaluate, and assemble a [`ReportDocument`].

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::lifelong::{
    aggregate, empty_evaluation, evaluate_lifelong, evaluate_sequence, evaluate_with_alignment,
    pair_config, propagation_alignment, AlignMode, SequenceData, SequenceEvaluation,
};
use crate::manifest::{MetricConfig, RpeInterval, SceneManifest};
use crate::report::{
    pose_errors_csv, AlignmentReport, ManifestEcho, MetricEcho, PairReport, ReportDocument,
    ReportMode, SceneReport, SequenceEcho, SequenceReport, SCHEMA_NAME, SCHEMA_VERSION,
};
use crate::trajectory::Trajectory;

/// Metric parameters given on the command line; each replaces the
/// manifest value when set.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Overrides {
    pub ate_threshold: Option<f64>,
    pub aoe_threshold: Option<f64>,
    pub delta: Option<f64>,
    pub tau: Option<f64>,
    pub rpe_interval: Option<RpeInterval>,
}

impl Overrides {
    pub fn apply(&self, base: &MetricConfig) -> MetricConfig {
        MetricConfig {
            epsilon: self.ate_threshold.unwrap_or(base.epsilon),
            phi: self.aoe_threshold.unwrap_or(base.phi),
            delta: self.delta.unwrap_or(base.delta),
            tau: self.tau.unwrap_or(base.tau),
            rpe_interval: self.rpe_interval.unwrap_or(base.rpe_interval),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunOptions {
    pub overrides: Overrides,
    pub scale_free: bool,
}

/// A manifest with every trajectory loaded, in manifest order.
#[derive(Clone, Debug)]
pub struct LoadedScene {
    pub manifest: SceneManifest,
    pub sequences: Vec<SequenceData>,
    /// Paths as written in the manifest or on the command line.
    pub echoes: Vec<SequenceEcho>,
}

impl LoadedScene {
    fn index_of(&self, id: &str) -> Result<usize> {
        self.sequences
            .iter()
            .position(|s| s.id == id)
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "no sequence '{id}' in scene '{}'",
                    self.manifest.scene_name
                ))
            })
    }
}

/// Loads the manifest and its trajectories. `estimates`, when non-empty,
/// replaces the manifest's estimate paths one-to-one in manifest order.
pub fn load_scene(manifest_path: &Path, estimates: &[PathBuf]) -> Result<LoadedScene> {
    let manifest = SceneManifest::from_path(manifest_path)?;
    if !estimates.is_empty() && estimates.len() != manifest.sequences.len() {
        return Err(Error::InvalidInput(format!(
            "{} estimate files given for {} sequences in {}",
            estimates.len(),
            manifest.sequences.len(),
            manifest_path.display()
        )));
    }
    let mut sequences = Vec::with_capacity(manifest.sequences.len());
    let mut echoes = Vec::with_capacity(manifest.sequences.len());
    for (i, entry) in manifest.sequences.iter().enumerate() {
        let (estimate_path, echo) = match (estimates.get(i), &entry.estimate) {
            (Some(p), _) => (p.clone(), p.clone()),
            (None, Some(p)) => (manifest.resolve(p), p.clone()),
            (None, None) => {
                return Err(Error::Manifest(format!(
                    "sequence '{}' names no estimate and none was given",
                    entry.id
                ))
                .in_file(manifest_path))
            }
        };
        let ground_truth = Trajectory::from_path(manifest.resolve(&entry.ground_truth))?;
        let estimate = Trajectory::from_path(&estimate_path)?;
        echoes.push(SequenceEcho {
            id: entry.id.clone(),
            ground_truth: entry.ground_truth.display().to_string(),
            estimate: echo.display().to_string(),
            span: [entry.span.t_min.into(), entry.span.t_max.into()],
        });
        sequences.push(SequenceData {
            id: entry.id.clone(),
            span: entry.span,
            ground_truth,
            estimate,
        });
    }
    Ok(LoadedScene {
        manifest,
        sequences,
        echoes,
    })
}

/// A report plus the evaluations behind it.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: ReportDocument,
    pub evaluations: Vec<SequenceEvaluation>,
}

impl RunOutput {
    pub fn pose_errors_csv(&self) -> String {
        pose_errors_csv(
            self.evaluations
                .iter()
                .map(|e| (e.id.as_str(), e.timeline.as_slice())),
        )
    }
}

fn document(
    scene: &LoadedScene,
    mode: ReportMode,
    align_mode: AlignMode,
    config: &MetricConfig,
    echoes: Vec<SequenceEcho>,
    sequences: Vec<SequenceReport>,
    evaluations: &[SequenceEvaluation],
) -> ReportDocument {
    ReportDocument {
        schema: SCHEMA_NAME.to_string(),
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        mode,
        alignment_mode: align_mode,
        manifest: ManifestEcho {
            scene: scene.manifest.scene_name.clone(),
            scene_class: scene.manifest.scene_class,
            metrics: MetricEcho::from(config),
            sequences: echoes,
        },
        propagation: None,
        sequences,
        scene: SceneReport::from(&aggregate(evaluations)),
        pair: None,
    }
}

/// Aligns and evaluates every sequence on its own. A sequence that cannot
/// be aligned is reported with zero scores and a failure note.
pub fn run_per_sequence(scene: &LoadedScene, options: &RunOptions) -> Result<RunOutput> {
    let config = options.overrides.apply(&scene.manifest.metric_config);
    config.validate()?;
    let mode = AlignMode::from_scale_free(options.scale_free);
    let mut evaluations = Vec::with_capacity(scene.sequences.len());
    let mut reports = Vec::with_capacity(scene.sequences.len());
    for data in &scene.sequences {
        let (ev, failure) = match evaluate_sequence(data, &config, mode) {
            Ok(ev) => (ev, None),
            Err(
                e @ (Error::NoOverlap { .. } | Error::Underdetermined(_) | Error::DegenerateScale),
            ) => {
                let dropped = match e {
                    Error::NoOverlap { dropped } => dropped,
                    _ => 0,
                };
                log::warn!("sequence '{}' not evaluated: {e}", data.id);
                (empty_evaluation(data, dropped, None), Some(e.to_string()))
            }
            Err(e) => return Err(e),
        };
        reports.push(SequenceReport::from_evaluation(&ev, config.delta, failure));
        evaluations.push(ev);
    }
    let report = document(
        scene,
        ReportMode::PerSequence,
        mode,
        &config,
        scene.echoes.clone(),
        reports,
        &evaluations,
    );
    Ok(RunOutput {
        report,
        evaluations,
    })
}

/// Aligns on the first sequence and carries that alignment through the
/// whole scene.
pub fn run_lifelong(scene: &LoadedScene, options: &RunOptions) -> Result<RunOutput> {
    let config = options.overrides.apply(&scene.manifest.metric_config);
    let mode = AlignMode::from_scale_free(options.scale_free);
    let result = evaluate_lifelong(&scene.manifest.scene_name, &scene.sequences, &config, mode)?;
    let reports = result
        .sequences
        .iter()
        .map(|ev| SequenceReport::from_evaluation(ev, config.delta, None))
        .collect();
    let mut report = document(
        scene,
        ReportMode::Lifelong,
        mode,
        &config,
        scene.echoes.clone(),
        reports,
        &result.sequences,
    );
    report.propagation = Some(AlignmentReport::from(&result.propagation));
    Ok(RunOutput {
        report,
        evaluations: result.sequences,
    })
}

/// Controlled-factor pair: align on `first_id`, then score re-localization
/// in `second_id` with a 0.3 m ATE threshold, no orientation threshold and
/// a 60 s decay. Flag overrides still take precedence.
pub fn run_pair(
    scene: &LoadedScene,
    first_id: &str,
    second_id: &str,
    options: &RunOptions,
) -> Result<RunOutput> {
    let config = options
        .overrides
        .apply(&pair_config(&scene.manifest.metric_config));
    config.validate()?;
    let mode = AlignMode::from_scale_free(options.scale_free);
    let (i, j) = (scene.index_of(first_id)?, scene.index_of(second_id)?);
    if i == j {
        return Err(Error::InvalidInput(format!(
            "pair needs two distinct sequences, got '{first_id}' twice"
        )));
    }
    let (first, second) = (&scene.sequences[i], &scene.sequences[j]);
    let label = format!("{}/{first_id}+{second_id}", scene.manifest.scene_name);
    let propagation = propagation_alignment(&label, first, mode)?;
    let evaluations = vec![
        evaluate_with_alignment(first, &propagation, &config)?,
        evaluate_with_alignment(second, &propagation, &config)?,
    ];
    let reports = evaluations
        .iter()
        .map(|ev| SequenceReport::from_evaluation(ev, config.delta, None))
        .collect();
    let echoes = vec![scene.echoes[i].clone(), scene.echoes[j].clone()];
    let mut report = document(
        scene,
        ReportMode::Pair,
        mode,
        &config,
        echoes,
        reports,
        &evaluations,
    );
    report.propagation = Some(AlignmentReport::from(&propagation));
    report.pair = Some(PairReport {
        first: first_id.to_string(),
        second: second_id.to_string(),
        cs_r: evaluations[1].robustness.cs_r.into(),
    });
    Ok(RunOutput {
        report,
        evaluations,
    })
}
