//! Time-offset estimation between two trajectories of the same motion
//! recorded by different devices.
//!
//! The objective at a candidate offset `o` is the ATE RMSE obtained by
//! subtracting `o` from the target timestamps, associating the target with
//! the interpolated reference and re-fitting a rigid alignment. The search
//! is a coarse grid over `[-window, window]` followed by golden-section
//! refinement inside the best grid cell.

use serde::{Deserialize, Serialize};

use crate::align::{align_horn, associate};
use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

pub const DEFAULT_WINDOW_S: f64 = 0.5;
pub const DEFAULT_COARSE_STEP_S: f64 = 0.005;
pub const DEFAULT_RESOLUTION_S: f64 = 1e-4;

/// Objective spread (meters) below which no offset is preferred.
const FLAT_TOLERANCE: f64 = 1e-9;

const INV_PHI: f64 = 0.618_033_988_749_894_8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyncOptions {
    /// Half-width of the searched offset range, seconds.
    pub window: f64,
    pub coarse_step: f64,
    /// Width of the final refinement bracket, seconds.
    pub resolution: f64,
}

impl Default for SyncOptions {
    fn default() -> Self {
        SyncOptions {
            window: DEFAULT_WINDOW_S,
            coarse_step: DEFAULT_COARSE_STEP_S,
            resolution: DEFAULT_RESOLUTION_S,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OffsetEstimate {
    /// Seconds by which the target clock leads the reference:
    /// `reference_time = target_time - offset`.
    pub offset: f64,
    pub ate_rmse_at_optimum: f64,
    pub search_window: [f64; 2],
    pub resolution: f64,
    /// The objective is flat over the window; the offset is arbitrary.
    pub degenerate: bool,
    pub probes: usize,
    /// Probed offsets skipped for lack of overlap.
    pub excluded: usize,
}

/// ATE RMSE after removing `offset` from the target timestamps, or `None`
/// when fewer than three target poses overlap the reference.
pub fn offset_objective(reference: &Trajectory, target: &Trajectory, offset: f64) -> Option<f64> {
    let shifted = target.shifted(-offset);
    let association = associate(&shifted, reference).ok()?;
    align_horn(&association.pairs).ok().map(|a| a.residual_rmse)
}

struct Search<'a> {
    reference: &'a Trajectory,
    target: &'a Trajectory,
    best: Option<(f64, f64)>,
    probes: usize,
    excluded: usize,
}

impl Search<'_> {
    fn probe(&mut self, offset: f64) -> Option<f64> {
        self.probes += 1;
        let value = offset_objective(self.reference, self.target, offset);
        match value {
            Some(v) => {
                if self.best.is_none_or(|(_, b)| v < b) {
                    self.best = Some((offset, v));
                }
            }
            None => self.excluded += 1,
        }
        value
    }

    /// Infeasible offsets compare as infinitely bad during refinement.
    fn probe_or_inf(&mut self, offset: f64) -> f64 {
        self.probe(offset).unwrap_or(f64::INFINITY)
    }
}

pub fn estimate_offset(
    reference: &Trajectory,
    target: &Trajectory,
    options: &SyncOptions,
) -> Result<OffsetEstimate> {
    let SyncOptions {
        window,
        coarse_step,
        resolution,
    } = *options;
    for (name, v) in [
        ("window", window),
        ("coarse step", coarse_step),
        ("resolution", resolution),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidInput(format!(
                "{name} must be positive, got {v}"
            )));
        }
    }
    if reference.is_empty() || target.is_empty() {
        return Err(Error::InvalidInput(
            "both trajectories must be non-empty".into(),
        ));
    }

    let mut search = Search {
        reference,
        target,
        best: None,
        probes: 0,
        excluded: 0,
    };

    let cells = ((2.0 * window) / coarse_step + 1e-9).floor() as usize;
    let grid: Vec<(f64, Option<f64>)> = (0..=cells)
        .map(|i| {
            let o = -window + i as f64 * coarse_step;
            (o, search.probe(o))
        })
        .collect();
    if search.excluded > 0 {
        log::warn!(
            "{} of {} grid offsets skipped for insufficient overlap",
            search.excluded,
            grid.len()
        );
    }

    let valid: Vec<f64> = grid.iter().filter_map(|(_, v)| *v).collect();
    let Some((grid_best, _)) = search.best else {
        return Err(Error::NoOverlap {
            dropped: target.len(),
        });
    };
    let lo_v = valid.iter().copied().fold(f64::INFINITY, f64::min);
    let hi_v = valid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let degenerate = hi_v - lo_v <= FLAT_TOLERANCE;

    if !degenerate {
        let mut a = (grid_best - coarse_step).max(-window);
        let mut b = (grid_best + coarse_step).min(window);
        let mut c = b - INV_PHI * (b - a);
        let mut d = a + INV_PHI * (b - a);
        let mut fc = search.probe_or_inf(c);
        let mut fd = search.probe_or_inf(d);
        while b - a > resolution {
            if fc <= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - INV_PHI * (b - a);
                fc = search.probe_or_inf(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + INV_PHI * (b - a);
                fd = search.probe_or_inf(d);
            }
        }
        search.probe(0.5 * (a + b));
    } else {
        log::warn!("offset objective is flat over the window; offset is indeterminate");
    }

    let (offset, rmse) = search.best.expect("at least one feasible probe");
    Ok(OffsetEstimate {
        offset,
        ate_rmse_at_optimum: rmse,
        search_window: [-window, window],
        resolution,
        degenerate,
        probes: search.probes,
        excluded: search.excluded,
    })
}

/// Sample standard deviation of redundant estimates of one offset, seconds.
pub fn offset_consistency(estimates: &[OffsetEstimate]) -> Result<f64> {
    let offsets: Vec<f64> = estimates.iter().map(|e| e.offset).collect();
    sample_std(&offsets)
}

pub fn sample_std(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: values.len(),
        });
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Pose, RigidTransform, Rotation, Vec3};
    use approx::assert_abs_diff_eq;

    fn back_and_forth(rate: f64, duration: f64) -> Trajectory {
        let n = (duration * rate) as usize;
        Trajectory::from_poses(
            (0..n)
                .map(|i| {
                    let t = i as f64 / rate;
                    let p = Vec3::new(
                        1.5 * (0.8 * t).sin(),
                        0.4 * (1.3 * t).sin(),
                        0.05 * (0.5 * t).cos(),
                    );
                    Pose::new(t, RigidTransform::new(Rotation::identity(), p))
                })
                .collect(),
        )
        .unwrap()
    }

    fn estimate(offset: f64) -> OffsetEstimate {
        OffsetEstimate {
            offset,
            ate_rmse_at_optimum: 0.0,
            search_window: [-0.5, 0.5],
            resolution: 1e-4,
            degenerate: false,
            probes: 0,
            excluded: 0,
        }
    }

    #[test]
    fn zero_shift_recovers_zero() {
        let r = back_and_forth(100.0, 20.0);
        let e = estimate_offset(&r, &r, &SyncOptions::default()).unwrap();
        assert!(e.offset.abs() <= 1e-4, "{}", e.offset);
        assert!(e.ate_rmse_at_optimum < 1e-9);
        assert!(!e.degenerate);
    }

    #[test]
    fn injected_shift_is_recovered_and_symmetric() {
        let r = back_and_forth(100.0, 20.0);
        let t = r.shifted(0.05);
        let e = estimate_offset(&r, &t, &SyncOptions::default()).unwrap();
        assert!((e.offset - 0.05).abs() <= 5e-4, "{}", e.offset);
        let swapped = estimate_offset(&t, &r, &SyncOptions::default()).unwrap();
        assert!((swapped.offset + e.offset).abs() <= 5e-4);
        assert!(e.ate_rmse_at_optimum <= offset_objective(&r, &t, 0.0).unwrap());
    }

    #[test]
    fn constant_position_is_degenerate() {
        let still = Trajectory::from_poses(
            (0..500)
                .map(|i| {
                    Pose::new(
                        i as f64 * 0.01,
                        RigidTransform::from_translation(Vec3::new(1.0, 2.0, 0.5)),
                    )
                })
                .collect(),
        )
        .unwrap();
        let e = estimate_offset(&still, &still, &SyncOptions::default()).unwrap();
        assert!(e.degenerate);
    }

    #[test]
    fn disjoint_trajectories_have_no_overlap() {
        let r = back_and_forth(100.0, 5.0);
        let t = r.shifted(100.0);
        assert!(matches!(
            estimate_offset(&r, &t, &SyncOptions::default()),
            Err(Error::NoOverlap { .. })
        ));
    }

    #[test]
    fn consistency_is_sample_std() {
        assert_eq!(
            offset_consistency(&[estimate(0.01), estimate(0.01)]).unwrap(),
            0.0
        );
        let s = offset_consistency(&[estimate(0.001), estimate(0.003)]).unwrap();
        assert_abs_diff_eq!(s, 2f64.sqrt() * 1e-3, epsilon = 1e-15);
        assert!(matches!(
            offset_consistency(&[estimate(0.0)]),
            Err(Error::InsufficientData { .. })
        ));
    }
}
