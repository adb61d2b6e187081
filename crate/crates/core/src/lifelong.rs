//! Sequence- and scene-level evaluation.
//!
//! Per-sequence mode aligns every sequence on its own. Lifelong mode aligns
//! only the first sequence of a scene and carries that transform over to all
//! later sequences, so an inconsistent map across sessions shows up as
//! incorrect estimates instead of being fitted away.

use serde::{Deserialize, Serialize};

use crate::align::{align_horn, align_umeyama, associate_within, Alignment, Association};
use crate::error::{Error, Result};
use crate::manifest::{MetricConfig, SceneManifest, TimeSpan};
use crate::metrics::{
    ate_rmse, correct_rate, gated_accuracy, pose_errors, rejudge, robustness, AccuracyResult,
    PoseError, RobustnessResult,
};
use crate::trajectory::Trajectory;

/// ATE threshold of the controlled-factor pair protocol, meters.
pub const PAIR_ATE_THRESHOLD: f64 = 0.3;
/// Decay of the controlled-factor pair protocol, seconds.
pub const PAIR_TAU: f64 = 60.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AlignMode {
    /// Rigid alignment.
    #[default]
    Rigid,
    /// Rigid alignment plus an optimal scale, for scale-free estimators.
    Similarity,
}

impl AlignMode {
    pub fn from_scale_free(scale_free: bool) -> Self {
        if scale_free {
            AlignMode::Similarity
        } else {
            AlignMode::Rigid
        }
    }

    fn align(self, association: &Association) -> Result<Alignment> {
        match self {
            AlignMode::Rigid => align_horn(&association.pairs),
            AlignMode::Similarity => align_umeyama(&association.pairs),
        }
    }
}

/// One sequence's inputs.
#[derive(Clone, Debug)]
pub struct SequenceData {
    pub id: String,
    /// Ground-truth coverage; the denominator of the correct rates.
    pub span: TimeSpan,
    pub ground_truth: Trajectory,
    pub estimate: Trajectory,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SequenceEvaluation {
    pub id: String,
    pub span: TimeSpan,
    pub robustness: RobustnessResult,
    pub accuracy: Option<AccuracyResult>,
    /// Correct rate with unbounded thresholds, i.e. pure time coverage.
    pub coverage_cr: f64,
    /// ATE RMSE over every associated estimate regardless of correctness.
    pub ate_rmse: Option<f64>,
    pub timeline: Vec<PoseError>,
    /// Estimates in the input file.
    pub estimate_count: usize,
    /// Estimates outside the span or the ground-truth coverage.
    pub dropped: usize,
    pub alignment: Option<Alignment>,
}

/// Span-weighted rates and count-weighted (pooled) RMSEs over sequences.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneAggregate {
    pub cr: f64,
    pub coverage_cr: f64,
    pub ate_rmse: Option<f64>,
    pub gated_ate_rmse: Option<f64>,
    pub total_span: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneEvaluation {
    pub scene_name: String,
    pub sequences: Vec<SequenceEvaluation>,
    pub aggregate: SceneAggregate,
    /// Alignment fitted on the first sequence and applied to all of them.
    pub propagation: Alignment,
}

impl SceneEvaluation {
    pub fn scene_cr(&self) -> f64 {
        self.aggregate.cr
    }

    pub fn scene_ate_rmse(&self) -> Option<f64> {
        self.aggregate.gated_ate_rmse
    }
}

pub(crate) fn empty_evaluation(
    data: &SequenceData,
    dropped: usize,
    alignment: Option<Alignment>,
) -> SequenceEvaluation {
    SequenceEvaluation {
        id: data.id.clone(),
        span: data.span,
        robustness: RobustnessResult {
            cr: 0.0,
            cr_t: None,
            cs_r: 0.0,
            t0: None,
            t_min: data.span.t_min,
            t_max: data.span.t_max,
        },
        accuracy: None,
        coverage_cr: 0.0,
        ate_rmse: None,
        timeline: Vec::new(),
        estimate_count: data.estimate.len(),
        dropped,
        alignment,
    }
}

fn associate_sequence(data: &SequenceData) -> Result<Association> {
    associate_within(&data.estimate, &data.ground_truth, Some(data.span))
}

fn evaluate_associated(
    data: &SequenceData,
    association: &Association,
    alignment: &Alignment,
    config: &MetricConfig,
) -> Result<SequenceEvaluation> {
    let timeline = pose_errors(&association.pairs, alignment, config);
    let robustness = robustness(&timeline, data.span, config)?;
    let accuracy = gated_accuracy(&timeline, &association.pairs, alignment, config)?;
    let coverage = rejudge(&timeline, f64::INFINITY, f64::INFINITY);
    let coverage_cr = correct_rate(&coverage, data.span.t_min, data.span.t_max, config.delta)?.cr;
    Ok(SequenceEvaluation {
        id: data.id.clone(),
        span: data.span,
        robustness,
        accuracy,
        coverage_cr,
        ate_rmse: ate_rmse(&timeline),
        timeline,
        estimate_count: data.estimate.len(),
        dropped: association.dropped,
        alignment: Some(*alignment),
    })
}

/// Evaluates one sequence under a fixed alignment. A sequence without any
/// associable estimate scores zero rather than failing.
pub fn evaluate_with_alignment(
    data: &SequenceData,
    alignment: &Alignment,
    config: &MetricConfig,
) -> Result<SequenceEvaluation> {
    match associate_sequence(data) {
        Ok(association) => evaluate_associated(data, &association, alignment, config),
        Err(Error::NoOverlap { dropped }) => Ok(empty_evaluation(data, dropped, Some(*alignment))),
        Err(e) => Err(e),
    }
}

/// Associates, aligns the sequence to its own ground truth, and computes
/// every metric.
pub fn evaluate_sequence(
    data: &SequenceData,
    config: &MetricConfig,
    mode: AlignMode,
) -> Result<SequenceEvaluation> {
    config.validate()?;
    let association = associate_sequence(data)?;
    let alignment = mode.align(&association)?;
    evaluate_associated(data, &association, &alignment, config)
}

/// Span-weighted rates and pooled RMSEs.
pub fn aggregate(sequences: &[SequenceEvaluation]) -> SceneAggregate {
    let total_span: f64 = sequences.iter().map(|s| s.span.duration()).sum();
    let weighted = |f: &dyn Fn(&SequenceEvaluation) -> f64| {
        if total_span > 0.0 {
            sequences
                .iter()
                .map(|s| f(s) * s.span.duration())
                .sum::<f64>()
                / total_span
        } else {
            0.0
        }
    };
    let pooled = |items: &mut dyn Iterator<Item = (f64, usize)>| {
        let (sum, n) = items.fold((0.0, 0usize), |(sum, n), (rmse, count)| {
            (sum + rmse * rmse * count as f64, n + count)
        });
        (n > 0).then(|| (sum / n as f64).sqrt())
    };
    SceneAggregate {
        cr: weighted(&|s| s.robustness.cr),
        coverage_cr: weighted(&|s| s.coverage_cr),
        ate_rmse: pooled(
            &mut sequences
                .iter()
                .filter_map(|s| s.ate_rmse.map(|r| (r, s.timeline.len()))),
        ),
        gated_ate_rmse: pooled(
            &mut sequences
                .iter()
                .filter_map(|s| s.accuracy.map(|a| (a.gated_ate_rmse, a.sample_count))),
        ),
        total_span,
    }
}

fn scene_failure(scene: &str, e: Error) -> Error {
    Error::SceneFailure {
        scene: scene.to_string(),
        reason: format!("first sequence cannot be aligned: {e}"),
    }
}

/// Fits the propagation transform on the first sequence only. A scale is
/// estimated here in [`AlignMode::Similarity`] and never re-fitted later.
pub fn propagation_alignment(
    scene: &str,
    first: &SequenceData,
    mode: AlignMode,
) -> Result<Alignment> {
    let association = associate_sequence(first).map_err(|e| scene_failure(scene, e))?;
    mode.align(&association)
        .map_err(|e| scene_failure(scene, e))
}

/// Lifelong evaluation of a scene. `sequences` are in playback order and
/// every estimate is expressed in the algorithm's single map frame.
pub fn evaluate_lifelong(
    scene_name: &str,
    sequences: &[SequenceData],
    config: &MetricConfig,
    mode: AlignMode,
) -> Result<SceneEvaluation> {
    config.validate()?;
    let first = sequences.first().ok_or_else(|| Error::SceneFailure {
        scene: scene_name.to_string(),
        reason: "no sequences".into(),
    })?;
    let propagation = propagation_alignment(scene_name, first, mode)?;
    let evaluations = sequences
        .iter()
        .map(|data| evaluate_with_alignment(data, &propagation, config))
        .collect::<Result<Vec<_>>>()?;
    Ok(SceneEvaluation {
        scene_name: scene_name.to_string(),
        aggregate: aggregate(&evaluations),
        sequences: evaluations,
        propagation,
    })
}

/// Lifelong evaluation driven by a manifest; `data` follows manifest order.
pub fn evaluate_manifest_lifelong(
    manifest: &SceneManifest,
    data: &[SequenceData],
    mode: AlignMode,
) -> Result<SceneEvaluation> {
    if data.len() != manifest.sequences.len() {
        return Err(Error::InvalidInput(format!(
            "manifest lists {} sequences but {} were supplied",
            manifest.sequences.len(),
            data.len()
        )));
    }
    evaluate_lifelong(&manifest.scene_name, data, &manifest.metric_config, mode)
}

/// The metric configuration of the controlled-factor pair protocol:
/// 0.3 m ATE threshold, no orientation threshold, 60 s decay.
pub fn pair_config(base: &MetricConfig) -> MetricConfig {
    MetricConfig {
        epsilon: PAIR_ATE_THRESHOLD,
        phi: f64::INFINITY,
        tau: PAIR_TAU,
        ..*base
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairScore {
    pub first_id: String,
    pub second_id: String,
    pub cs_r: f64,
    pub second: SequenceEvaluation,
}

/// Re-localization score of `second` after aligning on `first`.
pub fn evaluate_pair(
    first: &SequenceData,
    second: &SequenceData,
    base: &MetricConfig,
) -> Result<PairScore> {
    let config = pair_config(base);
    config.validate()?;
    let scene = format!("{}/{}", first.id, second.id);
    let propagation = propagation_alignment(&scene, first, AlignMode::Rigid)?;
    let second_eval = evaluate_with_alignment(second, &propagation, &config)?;
    Ok(PairScore {
        first_id: first.id.clone(),
        second_id: second.id.clone(),
        cs_r: second_eval.robustness.cs_r,
        second: second_eval,
    })
}
