//! Evaluation of SLAM pose estimates against ground truth for lifelong
//! operation: per-pose correctness, correct rates, re-localization scores,
//! correctness-gated accuracy, trajectory alignment and time-offset
//! estimation, plus synthetic data for testing all of it.

pub mod align;
pub mod error;
pub mod geom;
pub mod lifelong;
pub mod manifest;
pub mod metrics;
pub mod report;
pub mod runner;
pub mod sync;
pub mod synth;
pub mod trajectory;

pub use align::{align_horn, align_umeyama, associate, Alignment, AssociatedPair, Association};
pub use error::{Error, Result};
pub use geom::{
    interpolate_pose, rotation_angle, Pose, RigidTransform, Rotation, SimilarityTransform, Vec3,
};
pub use lifelong::{AlignMode, SceneEvaluation, SequenceData, SequenceEvaluation};
pub use manifest::{MetricConfig, RpeInterval, SceneClass, SceneManifest, TimeSpan};
pub use metrics::{AccuracyResult, CorrectRate, PoseError, RobustnessResult};
pub use report::{render_timeline, ReportDocument};
pub use sync::{estimate_offset, OffsetEstimate, SyncOptions};
pub use trajectory::Trajectory;
