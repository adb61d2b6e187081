//! Per-pose errors and the correctness-based robustness and accuracy
//! metrics.
//!
//! A pose estimate is *correct* when its ATE is at most `epsilon` meters and
//! its AOE at most `phi` degrees. A correct estimate at `t_k` counts as
//! valid for `min(t_{k+1} - t_k, delta)` seconds, with `t_{N+1} = t_max`;
//! the correct rate is the valid time divided by the data span (CR) or by
//! the span after the first estimate (CR-T). The re-localization score is
//! `exp(-(t_0 - t_min) / tau)` gated by the correctness of the first
//! estimate.

use serde::{Deserialize, Serialize};

use crate::align::{Alignment, AssociatedPair};
use crate::error::{Error, Result};
use crate::geom::RigidTransform;
use crate::manifest::{MetricConfig, RpeInterval, TimeSpan};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseError {
    pub timestamp: f64,
    /// Translation error, meters.
    pub ate: f64,
    /// Orientation error, degrees.
    pub aoe: f64,
    pub correct: bool,
}

/// Inclusive on both thresholds.
pub fn is_correct(ate: f64, aoe: f64, epsilon: f64, phi: f64) -> bool {
    ate <= epsilon && aoe <= phi
}

/// ATE and AOE of every pair after applying `alignment` to the estimates.
pub fn pose_errors(
    pairs: &[AssociatedPair],
    alignment: &Alignment,
    config: &MetricConfig,
) -> Vec<PoseError> {
    pairs
        .iter()
        .map(|pair| {
            let aligned = alignment.apply(&pair.estimate);
            let ate = (aligned.translation - pair.ground_truth.translation).norm();
            let aoe = aligned
                .rotation
                .angle_to(&pair.ground_truth.rotation)
                .to_degrees()
                .clamp(0.0, 180.0);
            PoseError {
                timestamp: pair.timestamp,
                ate,
                aoe,
                correct: is_correct(ate, aoe, config.epsilon, config.phi),
            }
        })
        .collect()
}

/// Re-judges correctness under different thresholds.
pub fn rejudge(errors: &[PoseError], epsilon: f64, phi: f64) -> Vec<PoseError> {
    errors
        .iter()
        .map(|e| PoseError {
            correct: is_correct(e.ate, e.aoe, epsilon, phi),
            ..*e
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrectRate {
    pub cr: f64,
    /// Absent when there are no estimates or the first one sits at `t_max`.
    pub cr_t: Option<f64>,
}

/// Seconds covered by valid correct estimates.
pub fn correct_time(errors: &[PoseError], t_max: f64, delta: f64) -> f64 {
    errors
        .iter()
        .enumerate()
        .filter(|(_, e)| e.correct)
        .map(|(k, e)| {
            let next = errors.get(k + 1).map_or(t_max, |n| n.timestamp);
            (next - e.timestamp).min(delta)
        })
        .fold(0.0, |acc, dt| acc + dt)
}

pub fn correct_rate(
    errors: &[PoseError],
    t_min: f64,
    t_max: f64,
    delta: f64,
) -> Result<CorrectRate> {
    if !(t_min.is_finite() && t_max.is_finite() && t_max > t_min) {
        return Err(Error::InvalidSpan { t_min, t_max });
    }
    if delta.is_nan() || delta <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "delta must be positive, got {delta}"
        )));
    }
    let (Some(first), Some(last)) = (errors.first(), errors.last()) else {
        return Ok(CorrectRate {
            cr: 0.0,
            cr_t: None,
        });
    };
    if first.timestamp < t_min || last.timestamp > t_max {
        return Err(Error::InvalidInput(format!(
            "estimates [{}, {}] extend outside the span [{t_min}, {t_max}]",
            first.timestamp, last.timestamp
        )));
    }
    if errors.windows(2).any(|w| w[1].timestamp <= w[0].timestamp) {
        return Err(Error::InvalidInput(
            "pose errors are not time-ordered".into(),
        ));
    }

    let valid = correct_time(errors, t_max, delta);
    let cr = (valid / (t_max - t_min)).clamp(0.0, 1.0);
    let tracking_span = t_max - first.timestamp;
    let cr_t = (tracking_span > 0.0).then(|| (valid / tracking_span).clamp(0.0, 1.0));
    Ok(CorrectRate { cr, cr_t })
}

/// Re-localization score of the first estimate; 0 without estimates.
pub fn relocalization_score(errors: &[PoseError], t_min: f64, tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "tau must be positive, got {tau}"
        )));
    }
    Ok(match errors.first() {
        Some(first) if first.correct => (-(first.timestamp - t_min) / tau).exp().clamp(0.0, 1.0),
        _ => 0.0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessResult {
    pub cr: f64,
    pub cr_t: Option<f64>,
    pub cs_r: f64,
    /// Timestamp of the first estimate.
    pub t0: Option<f64>,
    pub t_min: f64,
    pub t_max: f64,
}

pub fn robustness(
    errors: &[PoseError],
    span: TimeSpan,
    config: &MetricConfig,
) -> Result<RobustnessResult> {
    let rate = correct_rate(errors, span.t_min, span.t_max, config.delta)?;
    Ok(RobustnessResult {
        cr: rate.cr,
        cr_t: rate.cr_t,
        cs_r: relocalization_score(errors, span.t_min, config.tau)?,
        t0: errors.first().map(|e| e.timestamp),
        t_min: span.t_min,
        t_max: span.t_max,
    })
}

/// Accuracy restricted to correct estimates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyResult {
    pub gated_ate_rmse: f64,
    /// Absent when no RPE pair lies entirely on correct estimates.
    pub gated_rpe_rmse: Option<f64>,
    /// Correct estimates contributing to the ATE statistic.
    pub sample_count: usize,
    pub rpe_pair_count: usize,
}

fn rms(squares_sum: f64, n: usize) -> f64 {
    (squares_sum / n as f64).sqrt()
}

/// RMSE of the ATE over all estimates, ignoring correctness.
pub fn ate_rmse(errors: &[PoseError]) -> Option<f64> {
    (!errors.is_empty()).then(|| rms(errors.iter().map(|e| e.ate * e.ate).sum(), errors.len()))
}

/// Translational drift between two aligned estimates relative to the same
/// motion in ground truth.
pub fn relative_pose_error(
    est_from: &RigidTransform,
    est_to: &RigidTransform,
    gt_from: &RigidTransform,
    gt_to: &RigidTransform,
) -> f64 {
    let est_rel = est_from.inverse() * *est_to;
    let gt_rel = gt_from.inverse() * *gt_to;
    (gt_rel.inverse() * est_rel).translation.norm()
}

fn median_interval(errors: &[PoseError]) -> Option<f64> {
    let mut dts: Vec<f64> = errors
        .windows(2)
        .map(|w| w[1].timestamp - w[0].timestamp)
        .collect();
    if dts.is_empty() {
        return None;
    }
    dts.sort_by(f64::total_cmp);
    Some(dts[dts.len() / 2])
}

/// Index pairs `(i, j)` for relative-pose errors. In time mode `j` is the
/// estimate nearest to `t_i + interval`, accepted within half the median
/// sampling interval. Pairs touching any incorrect estimate in `i..=j` are
/// discarded.
pub fn rpe_pairs(errors: &[PoseError], interval: RpeInterval) -> Vec<(usize, usize)> {
    // Length of the run of correct estimates starting at each index.
    let mut run = vec![0usize; errors.len() + 1];
    for k in (0..errors.len()).rev() {
        run[k] = if errors[k].correct { run[k + 1] + 1 } else { 0 };
    }
    let spans_correct = |i: usize, j: usize| run[i] > j - i;

    let mut out = Vec::new();
    match interval {
        RpeInterval::Frames(n) => {
            for i in 0..errors.len().saturating_sub(n) {
                if n > 0 && spans_correct(i, i + n) {
                    out.push((i, i + n));
                }
            }
        }
        RpeInterval::Seconds(dt) => {
            let Some(tolerance) = median_interval(errors).map(|m| 0.5 * m) else {
                return out;
            };
            for i in 0..errors.len() {
                if !errors[i].correct {
                    continue;
                }
                let target = errors[i].timestamp + dt;
                let idx = errors.partition_point(|e| e.timestamp < target);
                let nearest = [idx.checked_sub(1), Some(idx)]
                    .into_iter()
                    .flatten()
                    .filter(|&j| j > i && j < errors.len())
                    .min_by(|&a, &b| {
                        (errors[a].timestamp - target)
                            .abs()
                            .total_cmp(&(errors[b].timestamp - target).abs())
                    });
                if let Some(j) = nearest {
                    if (errors[j].timestamp - target).abs() <= tolerance && spans_correct(i, j) {
                        out.push((i, j));
                    }
                }
            }
        }
    }
    out
}

/// ATE and RPE RMSE over correct estimates only. `errors` and `pairs` are
/// index-aligned; `alignment` maps estimates into the ground-truth frame.
pub fn gated_accuracy(
    errors: &[PoseError],
    pairs: &[AssociatedPair],
    alignment: &Alignment,
    config: &MetricConfig,
) -> Result<Option<AccuracyResult>> {
    if errors.len() != pairs.len() {
        return Err(Error::InvalidInput(format!(
            "{} pose errors but {} associated pairs",
            errors.len(),
            pairs.len()
        )));
    }
    let correct: Vec<&PoseError> = errors.iter().filter(|e| e.correct).collect();
    if correct.is_empty() {
        return Ok(None);
    }
    let gated_ate_rmse = rms(correct.iter().map(|e| e.ate * e.ate).sum(), correct.len());

    let rpe_index = rpe_pairs(errors, config.rpe_interval);
    let gated_rpe_rmse = (!rpe_index.is_empty()).then(|| {
        let sum: f64 = rpe_index
            .iter()
            .map(|&(i, j)| {
                let e = relative_pose_error(
                    &alignment.apply(&pairs[i].estimate),
                    &alignment.apply(&pairs[j].estimate),
                    &pairs[i].ground_truth,
                    &pairs[j].ground_truth,
                );
                e * e
            })
            .sum();
        rms(sum, rpe_index.len())
    });

    Ok(Some(AccuracyResult {
        gated_ate_rmse,
        gated_rpe_rmse,
        sample_count: correct.len(),
        rpe_pair_count: rpe_index.len(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Rotation, Vec3};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn err(t: f64, correct: bool) -> PoseError {
        PoseError {
            timestamp: t,
            ate: if correct { 0.0 } else { 10.0 },
            aoe: 0.0,
            correct,
        }
    }

    /// Integrates per-instant validity on a 1 ms grid. A correct estimate at
    /// `t_k` covers `[t_k, min(t_k + delta, t_{k+1}))`.
    fn fine_grid_cr(errors: &[PoseError], t_min: f64, t_max: f64, delta: f64) -> f64 {
        let step = 1e-3;
        let n = ((t_max - t_min) / step).round() as usize;
        let mut covered = 0usize;
        for i in 0..n {
            let t = t_min + (i as f64 + 0.5) * step;
            let k = errors.iter().rposition(|e| e.timestamp <= t);
            if let Some(k) = k {
                let e = &errors[k];
                let end = errors
                    .get(k + 1)
                    .map_or(t_max, |n| n.timestamp)
                    .min(e.timestamp + delta);
                if e.correct && t < end {
                    covered += 1;
                }
            }
        }
        covered as f64 * step / (t_max - t_min)
    }

    #[test]
    fn full_coverage_gives_unit_rates() {
        let errors: Vec<_> = (0..=100).map(|i| err(i as f64 * 0.1, true)).collect();
        let r = correct_rate(&errors, 0.0, 10.0, 1.0).unwrap();
        assert_abs_diff_eq!(r.cr, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.cr_t.unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn three_correct_estimates_over_ten_seconds() {
        let errors = [err(0.0, true), err(1.0, true), err(2.0, true)];
        let r = correct_rate(&errors, 0.0, 10.0, 1.0).unwrap();
        assert_eq!(r.cr, 0.3);
        assert!((fine_grid_cr(&errors, 0.0, 10.0, 1.0) - 0.3).abs() <= 2e-4);
    }

    #[test]
    fn late_start_changes_only_cr_t() {
        let errors = [err(2.0, true), err(3.0, true), err(4.0, true)];
        let r = correct_rate(&errors, 0.0, 10.0, 1.0).unwrap();
        assert_eq!(r.cr, 0.3);
        assert_eq!(r.cr_t, Some(0.375));
    }

    #[test]
    fn correct_rate_errors_and_empty_input() {
        assert!(matches!(
            correct_rate(&[], 5.0, 5.0, 1.0),
            Err(Error::InvalidSpan { .. })
        ));
        let r = correct_rate(&[], 0.0, 5.0, 1.0).unwrap();
        assert_eq!(
            r,
            CorrectRate {
                cr: 0.0,
                cr_t: None
            }
        );
        assert!(correct_rate(&[err(6.0, true)], 0.0, 5.0, 1.0).is_err());
    }

    #[test]
    fn relocalization_anchors() {
        assert_eq!(
            relocalization_score(&[err(0.0, true)], 0.0, 60.0).unwrap(),
            1.0
        );
        assert_eq!(
            relocalization_score(&[err(0.0, false)], 0.0, 60.0).unwrap(),
            0.0
        );
        assert_eq!(relocalization_score(&[], 0.0, 60.0).unwrap(), 0.0);
        let s = relocalization_score(&[err(70.0, true)], 10.0, 60.0).unwrap();
        assert_abs_diff_eq!(s, (-1.0f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(s, 0.367879, epsilon = 1e-6);
        assert!(relocalization_score(&[], 0.0, 0.0).is_err());
    }

    #[test]
    fn thresholds_are_inclusive_and_conjunctive() {
        assert!(is_correct(1.0, 0.0, 1.0, 30.0));
        assert!(!is_correct(0.0, 45.0, 1.0, 30.0));
        assert!(is_correct(100.0, 179.0, f64::INFINITY, f64::INFINITY));
    }

    #[test]
    fn pose_errors_of_identical_poses() {
        let pose = RigidTransform::new(Rotation::about_z(0.3), Vec3::new(1.0, 2.0, 3.0));
        let pairs = [AssociatedPair {
            timestamp: 0.0,
            estimate: pose,
            ground_truth: pose,
        }];
        let e = pose_errors(
            &pairs,
            &Alignment::identity(1),
            &MetricConfig::with_thresholds(1e-6, 1e-6),
        );
        assert_eq!(e[0].ate, 0.0);
        assert!(e[0].aoe < 1e-9);
        assert!(e[0].correct);
    }

    #[test]
    fn pose_error_exactly_at_epsilon_is_correct() {
        let pairs = [AssociatedPair {
            timestamp: 0.0,
            estimate: RigidTransform::from_translation(Vec3::new(0.5, 0.0, 0.0)),
            ground_truth: RigidTransform::identity(),
        }];
        let e = pose_errors(
            &pairs,
            &Alignment::identity(1),
            &MetricConfig::with_thresholds(0.5, 30.0),
        );
        assert_eq!(e[0].ate, 0.5);
        assert!(e[0].correct);

        let pairs = [AssociatedPair {
            timestamp: 0.0,
            estimate: RigidTransform::new(Rotation::about_z(45f64.to_radians()), Vec3::zeros()),
            ground_truth: RigidTransform::identity(),
        }];
        let e = pose_errors(
            &pairs,
            &Alignment::identity(1),
            &MetricConfig::with_thresholds(100.0, 30.0),
        );
        assert!(!e[0].correct);
    }

    fn constant_error_pairs(n: usize, offset: f64) -> (Vec<AssociatedPair>, Vec<PoseError>) {
        let pairs: Vec<_> = (0..n)
            .map(|i| {
                let gt = RigidTransform::from_translation(Vec3::new(i as f64 * 0.1, 0.0, 0.0));
                AssociatedPair {
                    timestamp: i as f64 * 0.1,
                    estimate: RigidTransform::from_translation(gt.translation + Vec3::y() * offset),
                    ground_truth: gt,
                }
            })
            .collect();
        let errors = pose_errors(&pairs, &Alignment::identity(n), &MetricConfig::default());
        (pairs, errors)
    }

    #[test]
    fn constant_error_gives_constant_rmse() {
        let (pairs, errors) = constant_error_pairs(50, 0.1);
        let acc = gated_accuracy(
            &errors,
            &pairs,
            &Alignment::identity(50),
            &MetricConfig::default(),
        )
        .unwrap()
        .unwrap();
        assert_abs_diff_eq!(acc.gated_ate_rmse, 0.1, epsilon = 1e-12);
        assert_eq!(acc.sample_count, 50);
        // A constant offset produces no relative drift.
        assert_abs_diff_eq!(acc.gated_rpe_rmse.unwrap(), 0.0, epsilon = 1e-12);
        assert_eq!(acc.rpe_pair_count, 40);
    }

    #[test]
    fn no_correct_pose_means_absent_accuracy() {
        let (pairs, errors) = constant_error_pairs(10, 5.0);
        assert!(errors.iter().all(|e| !e.correct));
        let acc = gated_accuracy(
            &errors,
            &pairs,
            &Alignment::identity(10),
            &MetricConfig::default(),
        )
        .unwrap();
        assert!(acc.is_none());
    }

    #[test]
    fn rpe_pairs_skip_incorrect_spans() {
        let mut errors: Vec<_> = (0..10).map(|i| err(i as f64, true)).collect();
        errors[5].correct = false;
        let pairs = rpe_pairs(&errors, RpeInterval::Frames(2));
        assert_eq!(pairs, vec![(0, 2), (1, 3), (2, 4), (6, 8), (7, 9)]);
        let timed = rpe_pairs(&errors, RpeInterval::Seconds(2.0));
        assert_eq!(timed, pairs);
        // 1.4 s snaps to the neighbouring sample, 0.4 s away.
        assert!(rpe_pairs(&errors, RpeInterval::Seconds(1.4))
            .iter()
            .all(|&(i, j)| j - i == 1));
    }

    proptest! {
        #[test]
        fn shared_numerator_identity(
            gaps in proptest::collection::vec(0.01..3.0f64, 1..50),
            flags in proptest::collection::vec(any::<bool>(), 50),
            lead in 0.0..5.0f64,
            tail in 0.0..5.0f64,
            delta in 0.1..2.0f64,
        ) {
            let mut t = lead;
            let mut errors = Vec::new();
            for (g, c) in gaps.iter().zip(&flags) {
                errors.push(err(t, *c));
                t += g;
            }
            let t_max = errors.last().unwrap().timestamp + tail + 1e-3;
            let r = correct_rate(&errors, 0.0, t_max, delta).unwrap();
            prop_assert!((0.0..=1.0).contains(&r.cr));
            let cr_t = r.cr_t.unwrap();
            prop_assert!((0.0..=1.0).contains(&cr_t));
            prop_assert!(r.cr <= cr_t + 1e-15);
            let t0 = errors[0].timestamp;
            prop_assert!((r.cr * t_max - cr_t * (t_max - t0)).abs() < 1e-9);
            let oracle = fine_grid_cr(&errors, 0.0, t_max, delta);
            prop_assert!((r.cr - oracle).abs() <= 2e-3 * errors.len() as f64 / t_max + 2e-3 / t_max);
        }

        #[test]
        fn infinite_thresholds_ignore_pose_values(
            ates in proptest::collection::vec(0.0..100.0f64, 1..30),
        ) {
            let errors: Vec<_> = ates.iter().enumerate().map(|(i, a)| PoseError {
                timestamp: i as f64 * 0.5, ate: *a, aoe: a.min(180.0), correct: false,
            }).collect();
            let inf = rejudge(&errors, f64::INFINITY, f64::INFINITY);
            let zeros: Vec<_> = errors.iter().map(|e| PoseError { ate: 0.0, aoe: 0.0, ..*e }).collect();
            let inf_zero = rejudge(&zeros, f64::INFINITY, f64::INFINITY);
            let t_max = errors.len() as f64 * 0.5;
            prop_assert_eq!(
                correct_rate(&inf, 0.0, t_max, 1.0).unwrap(),
                correct_rate(&inf_zero, 0.0, t_max, 1.0).unwrap()
            );
        }
    }
}
