//! Timestamp association against interpolated ground truth, and closed-form
//! least-squares alignment of the associated positions.
//!
//! Two independent closed forms are provided: [`align_horn`] solves the
//! rigid problem through the unit-quaternion eigenvector formulation, and
//! [`align_umeyama`] solves the similarity problem through an SVD of the
//! cross-covariance with a determinant sign correction. Only positions enter
//! the cost; orientations follow the recovered rotation.

use nalgebra::{Matrix3, Matrix4, SymmetricEigen, SVD};

use crate::error::{Error, Result};
use crate::geom::{interpolate_pose, RigidTransform, Rotation, SimilarityTransform, Vec3};
use crate::manifest::TimeSpan;
use crate::trajectory::Trajectory;

/// Ratio of the second to the first cross-covariance singular value below
/// which the point configuration is treated as collinear.
const COLLINEAR_RATIO: f64 = 1e-10;

/// An estimated pose paired with the ground truth at the same instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AssociatedPair {
    pub timestamp: f64,
    pub estimate: RigidTransform,
    pub ground_truth: RigidTransform,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Association {
    pub pairs: Vec<AssociatedPair>,
    /// Estimates that fell outside the ground-truth coverage.
    pub dropped: usize,
}

/// Ground-truth pose at `t`, interpolated between the bracketing samples.
/// `None` outside the ground-truth coverage.
pub fn ground_truth_at(ground_truth: &Trajectory, t: f64) -> Option<RigidTransform> {
    let poses = ground_truth.poses();
    let idx = poses.partition_point(|p| p.timestamp < t);
    if idx < poses.len() && poses[idx].timestamp == t {
        return Some(poses[idx].transform);
    }
    if idx == 0 || idx == poses.len() {
        return None;
    }
    interpolate_pose(&poses[idx - 1], &poses[idx], t).ok()
}

/// Pairs every estimate inside the ground-truth coverage with the ground
/// truth interpolated at its timestamp.
pub fn associate(estimate: &Trajectory, ground_truth: &Trajectory) -> Result<Association> {
    associate_within(estimate, ground_truth, None)
}

/// As [`associate`], additionally dropping estimates outside `span`.
pub fn associate_within(
    estimate: &Trajectory,
    ground_truth: &Trajectory,
    span: Option<TimeSpan>,
) -> Result<Association> {
    if ground_truth.is_empty() {
        return Err(Error::InvalidInput(
            "ground-truth trajectory is empty".into(),
        ));
    }
    let mut pairs = Vec::with_capacity(estimate.len());
    let mut dropped = 0;
    for pose in estimate.poses() {
        let in_span = span.is_none_or(|s| s.contains(pose.timestamp));
        match ground_truth_at(ground_truth, pose.timestamp).filter(|_| in_span) {
            Some(gt) => pairs.push(AssociatedPair {
                timestamp: pose.timestamp,
                estimate: pose.transform,
                ground_truth: gt,
            }),
            None => dropped += 1,
        }
    }
    if pairs.is_empty() {
        return Err(Error::NoOverlap { dropped });
    }
    if dropped > 0 {
        log::debug!("{dropped} estimates outside ground-truth coverage were not associated");
    }
    Ok(Association { pairs, dropped })
}

/// A similarity transform taking estimate positions onto ground truth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Alignment {
    pub transform: SimilarityTransform,
    /// RMS distance between aligned estimate and ground-truth positions.
    pub residual_rmse: f64,
    pub pair_count: usize,
    /// Set when the point configuration is collinear or coincident and the
    /// rotation is not uniquely determined. The transform is still a
    /// minimizer.
    pub degenerate: bool,
}

impl Alignment {
    pub fn identity(pair_count: usize) -> Self {
        Alignment {
            transform: SimilarityTransform::identity(),
            residual_rmse: 0.0,
            pair_count,
            degenerate: false,
        }
    }

    pub fn apply(&self, pose: &RigidTransform) -> RigidTransform {
        self.transform.apply(pose)
    }
}

struct Centered {
    source: Vec<Vec3>,
    target: Vec<Vec3>,
    source_mean: Vec3,
    target_mean: Vec3,
    /// Cross-covariance `sum(target_i * source_i^T) / n`.
    cross: Matrix3<f64>,
    /// Mean squared distance of the source points from their centroid.
    source_variance: f64,
}

fn centered(pairs: &[AssociatedPair]) -> Result<Centered> {
    if pairs.len() < 3 {
        return Err(Error::Underdetermined(pairs.len()));
    }
    let n = pairs.len() as f64;
    let source: Vec<Vec3> = pairs.iter().map(|p| p.estimate.translation).collect();
    let target: Vec<Vec3> = pairs.iter().map(|p| p.ground_truth.translation).collect();
    if source
        .iter()
        .chain(&target)
        .any(|v| !v.iter().all(|c| c.is_finite()))
    {
        return Err(Error::InvalidInput(
            "non-finite position in alignment input".into(),
        ));
    }
    let source_mean = source.iter().sum::<Vec3>() / n;
    let target_mean = target.iter().sum::<Vec3>() / n;

    let mut cross = Matrix3::zeros();
    let mut source_variance = 0.0;
    for (a, b) in source.iter().zip(&target) {
        let a = a - source_mean;
        let b = b - target_mean;
        cross += b * a.transpose();
        source_variance += a.norm_squared();
    }
    cross /= n;
    source_variance /= n;
    Ok(Centered {
        source,
        target,
        source_mean,
        target_mean,
        cross,
        source_variance,
    })
}

impl Centered {
    fn is_coincident(&self) -> bool {
        self.source_variance <= 1e-24 * (1.0 + self.source_mean.norm_squared())
    }

    fn is_collinear(&self) -> bool {
        let sv = self.cross.singular_values();
        let mut s: Vec<f64> = sv.iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s[1] <= COLLINEAR_RATIO * s[0]
    }

    fn residual_rmse(&self, t: &SimilarityTransform) -> f64 {
        let sum: f64 = self
            .source
            .iter()
            .zip(&self.target)
            .map(|(a, b)| (t.transform_point(a) - b).norm_squared())
            .sum();
        (sum / self.source.len() as f64).sqrt()
    }

    fn finish(&self, scale: f64, rotation: Rotation, degenerate: bool) -> Result<Alignment> {
        let translation = self.target_mean - rotation.rotate(&self.source_mean) * scale;
        let transform = SimilarityTransform::new(scale, rotation, translation)?;
        Ok(Alignment {
            residual_rmse: self.residual_rmse(&transform),
            pair_count: self.source.len(),
            transform,
            degenerate,
        })
    }
}

/// Rigid alignment (unit scale) via the quaternion eigenvector closed form.
pub fn align_horn(pairs: &[AssociatedPair]) -> Result<Alignment> {
    let c = centered(pairs)?;
    if c.is_coincident() {
        log::warn!("alignment input positions are coincident; rotation left at identity");
        return c.finish(1.0, Rotation::identity(), true);
    }
    let degenerate = c.is_collinear();
    if degenerate {
        log::warn!("alignment input positions are collinear; rotation about the line is arbitrary");
    }

    // m[(i, j)] = sum(source_i * target_j) / n
    let m = c.cross.transpose();
    let (sxx, sxy, sxz) = (m[(0, 0)], m[(0, 1)], m[(0, 2)]);
    let (syx, syy, syz) = (m[(1, 0)], m[(1, 1)], m[(1, 2)]);
    let (szx, szy, szz) = (m[(2, 0)], m[(2, 1)], m[(2, 2)]);
    #[rustfmt::skip]
    let n = Matrix4::new(
        sxx + syy + szz, syz - szy,        szx - sxz,        sxy - syx,
        syz - szy,       sxx - syy - szz,  sxy + syx,        szx + sxz,
        szx - sxz,       sxy + syx,        -sxx + syy - szz, syz + szy,
        sxy - syx,       szx + sxz,        syz + szy,        -sxx - syy + szz,
    );
    let eigen = SymmetricEigen::new(n);
    let best = eigen.eigenvalues.imax();
    let q = eigen.eigenvectors.column(best);
    let rotation = Rotation::from_wxyz(q[0], q[1], q[2], q[3])?;
    c.finish(1.0, rotation, degenerate)
}

/// Similarity alignment with jointly optimal positive scale.
pub fn align_umeyama(pairs: &[AssociatedPair]) -> Result<Alignment> {
    align_umeyama_with(pairs, true)
}

/// The SVD closed form; with `estimate_scale = false` the scale is held at 1
/// and the result is the rigid least-squares alignment.
pub fn align_umeyama_with(pairs: &[AssociatedPair], estimate_scale: bool) -> Result<Alignment> {
    let c = centered(pairs)?;
    if c.is_coincident() {
        if estimate_scale {
            return Err(Error::DegenerateScale);
        }
        log::warn!("alignment input positions are coincident; rotation left at identity");
        return c.finish(1.0, Rotation::identity(), true);
    }
    let degenerate = c.is_collinear();

    let svd = SVD::new(c.cross, true, true);
    let u = svd.u.expect("3x3 SVD yields U");
    let v_t = svd.v_t.expect("3x3 SVD yields V^T");
    let mut signs = Matrix3::identity();
    if u.determinant() * v_t.determinant() < 0.0 {
        signs[(2, 2)] = -1.0;
    }
    let r = u * signs * v_t;
    let scale = if estimate_scale {
        let trace: f64 = (0..3).map(|i| svd.singular_values[i] * signs[(i, i)]).sum();
        trace / c.source_variance
    } else {
        1.0
    };
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::DegenerateScale);
    }
    c.finish(scale, Rotation::from_matrix(&r), degenerate)
}
