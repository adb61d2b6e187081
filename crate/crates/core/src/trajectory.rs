//! Timestamped trajectories and the whitespace-delimited text format:
//!
//! ```text
//! # frame_id: map
//! # source: orb-slam2
//! timestamp tx ty tz qx qy qz qw
//! ```
//!
//! Timestamps are seconds, translations meters, and the quaternion is
//! written scalar-last. Lines starting with `#` are comments; the optional
//! `frame_id:` and `source:` comments carry trajectory metadata.

use std::fmt::Write as _;
use std::fs;
use std::io::BufRead;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{Pose, RigidTransform, Rotation, Vec3};

pub const DEFAULT_FRAME_ID: &str = "world";

/// Decimal places used when writing timestamps.
pub const TIMESTAMP_DECIMALS: usize = 9;
/// Decimal places used when writing translations and quaternions.
pub const VALUE_DECIMALS: usize = 12;

/// A time-ordered pose sequence. Timestamps are strictly increasing.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    poses: Vec<Pose>,
    pub frame_id: String,
    pub source_label: String,
}

impl Trajectory {
    pub fn new(
        poses: Vec<Pose>,
        frame_id: impl Into<String>,
        source_label: impl Into<String>,
    ) -> Result<Self> {
        for (i, p) in poses.iter().enumerate() {
            if !p.timestamp.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "pose {i} has a non-finite timestamp"
                )));
            }
            if i > 0 && p.timestamp <= poses[i - 1].timestamp {
                return Err(Error::InvalidInput(format!(
                    "pose {i}: timestamp {} does not follow {}",
                    p.timestamp,
                    poses[i - 1].timestamp
                )));
            }
        }
        Ok(Trajectory {
            poses,
            frame_id: frame_id.into(),
            source_label: source_label.into(),
        })
    }

    /// Wraps poses with default metadata.
    pub fn from_poses(poses: Vec<Pose>) -> Result<Self> {
        Trajectory::new(poses, DEFAULT_FRAME_ID, "")
    }

    pub fn empty() -> Self {
        Trajectory {
            poses: Vec::new(),
            frame_id: DEFAULT_FRAME_ID.into(),
            source_label: String::new(),
        }
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }

    pub fn into_poses(self) -> Vec<Pose> {
        self.poses
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    /// First and last timestamp, if any.
    pub fn time_span(&self) -> Option<(f64, f64)> {
        Some((self.poses.first()?.timestamp, self.poses.last()?.timestamp))
    }

    /// Same poses with every timestamp moved by `dt` seconds.
    pub fn shifted(&self, dt: f64) -> Trajectory {
        Trajectory {
            poses: self
                .poses
                .iter()
                .map(|p| Pose::new(p.timestamp + dt, p.transform))
                .collect(),
            frame_id: self.frame_id.clone(),
            source_label: self.source_label.clone(),
        }
    }

    pub fn from_reader(reader: impl BufRead) -> Result<Self> {
        let mut poses: Vec<Pose> = Vec::new();
        let mut frame_id = DEFAULT_FRAME_ID.to_string();
        let mut source_label = String::new();

        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let line_no = idx + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(comment) = trimmed.strip_prefix('#') {
                let comment = comment.trim();
                if let Some(v) = comment.strip_prefix("frame_id:") {
                    frame_id = v.trim().to_string();
                } else if let Some(v) = comment.strip_prefix("source:") {
                    source_label = v.trim().to_string();
                }
                continue;
            }

            let pose = parse_record(trimmed, line_no)?;
            if let Some(prev) = poses.last() {
                if pose.timestamp <= prev.timestamp {
                    return Err(Error::Ordering {
                        line: line_no,
                        timestamp: pose.timestamp,
                        previous: prev.timestamp,
                    });
                }
            }
            poses.push(pose);
        }

        Ok(Trajectory {
            poses,
            frame_id,
            source_label,
        })
    }

    /// Loads a trajectory file. The source label defaults to the file stem
    /// when the file does not name one.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let load = || -> Result<Trajectory> {
            let file = fs::File::open(path)?;
            let mut traj = Trajectory::from_reader(std::io::BufReader::new(file))?;
            if traj.source_label.is_empty() {
                if let Some(stem) = path.file_stem() {
                    traj.source_label = stem.to_string_lossy().into_owned();
                }
            }
            Ok(traj)
        };
        load().map_err(|e| e.in_file(path))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(32 + self.poses.len() * 128);
        let _ = writeln!(out, "# frame_id: {}", self.frame_id);
        if !self.source_label.is_empty() {
            let _ = writeln!(out, "# source: {}", self.source_label);
        }
        out.push_str("# timestamp tx ty tz qx qy qz qw\n");
        for p in &self.poses {
            let t = &p.transform.translation;
            let [w, x, y, z] = p.transform.rotation.wxyz();
            let _ = writeln!(
                out,
                "{:.tp$} {:.vp$} {:.vp$} {:.vp$} {:.vp$} {:.vp$} {:.vp$} {:.vp$}",
                p.timestamp,
                t.x,
                t.y,
                t.z,
                x,
                y,
                z,
                w,
                tp = TIMESTAMP_DECIMALS,
                vp = VALUE_DECIMALS,
            );
        }
        out
    }

    pub fn write_to_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::from(e).in_file(path))
    }
}

fn parse_record(line: &str, line_no: usize) -> Result<Pose> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 8 {
        return Err(Error::Parse {
            line: line_no,
            message: format!("expected 8 fields, found {}", fields.len()),
        });
    }
    let mut values = [0.0f64; 8];
    for (v, f) in values.iter_mut().zip(&fields) {
        *v = f.parse::<f64>().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("'{f}' is not a number"),
        })?;
        if !v.is_finite() {
            return Err(Error::InvalidRecord {
                line: line_no,
                message: format!("non-finite value '{f}'"),
            });
        }
    }
    let [t, tx, ty, tz, qx, qy, qz, qw] = values;
    let rotation = Rotation::from_wxyz(qw, qx, qy, qz).map_err(|_| Error::InvalidRecord {
        line: line_no,
        message: "zero-norm quaternion".into(),
    })?;
    Ok(Pose::new(
        t,
        RigidTransform::new(rotation, Vec3::new(tx, ty, tz)),
    ))
}

/// Parses trajectory text.
pub fn parse_trajectory(text: &str) -> Result<Trajectory> {
    Trajectory::from_reader(text.as_bytes())
}

/// Writes a trajectory in the text format read by [`parse_trajectory`].
pub fn serialize_trajectory(trajectory: &Trajectory) -> String {
    trajectory.to_text()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_identity_record() {
        let t = parse_trajectory("0.0 0 0 0 0 0 0 1").unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.poses()[0].timestamp, 0.0);
        assert_eq!(t.poses()[0].transform, RigidTransform::identity());
    }

    #[test]
    fn comments_blank_lines_and_metadata() {
        let text = "# frame_id: map\n# source: orb\n\n# a note\n1.0 1 2 3 0 0 0 1\n  \n2.0 1 2 3 0 0 0 1\n";
        let t = parse_trajectory(text).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.frame_id, "map");
        assert_eq!(t.source_label, "orb");
    }

    #[test]
    fn equal_timestamps_are_an_ordering_error() {
        let err = parse_trajectory("1.0 0 0 0 0 0 0 1\n1.0 0 0 0 0 0 0 1\n").unwrap_err();
        assert!(matches!(err, Error::Ordering { line: 2, .. }), "{err}");
    }

    #[test]
    fn decreasing_timestamps_name_the_line() {
        let err = parse_trajectory("# c\n2.0 0 0 0 0 0 0 1\n1.0 0 0 0 0 0 0 1\n").unwrap_err();
        assert!(err.to_string().starts_with("line 3:"), "{err}");
    }

    #[test]
    fn wrong_field_count() {
        let err = parse_trajectory("0.0 0 0 0 0 0 1").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse_trajectory("0.0 0 0 x 0 0 0 1").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn zero_quaternion_is_invalid() {
        let err = parse_trajectory("0.0 0 0 0 0 0 0 0").unwrap_err();
        assert!(matches!(err, Error::InvalidRecord { line: 1, .. }));
    }

    #[test]
    fn quaternions_are_renormalized() {
        let t = parse_trajectory("0.0 0 0 0 0 0 0 2").unwrap();
        let [w, ..] = t.poses()[0].transform.rotation.wxyz();
        assert_eq!(w, 1.0);
    }

    #[test]
    fn missing_file_names_the_path() {
        let err = Trajectory::from_path("/nonexistent/est.txt").unwrap_err();
        assert!(err.to_string().contains("/nonexistent/est.txt"));
    }

    proptest! {
        #[test]
        fn serialize_then_parse_is_lossless(
            start in -1e3..1e9f64,
            steps in proptest::collection::vec((1e-3..2.0f64, -50.0..50.0f64, -50.0..50.0f64, -50.0..50.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, 0.1..1.0f64), 1..40),
        ) {
            let mut t = start;
            let mut poses = Vec::new();
            for (dt, x, y, z, qx, qy, qz, qw) in steps {
                t += dt;
                let r = Rotation::from_wxyz(qw, qx, qy, qz).unwrap();
                poses.push(Pose::new(t, RigidTransform::new(r, Vec3::new(x, y, z))));
            }
            let traj = Trajectory::new(poses, "map", "est").unwrap();
            let back = parse_trajectory(&traj.to_text()).unwrap();
            prop_assert_eq!(back.len(), traj.len());
            prop_assert_eq!(&back.frame_id, "map");
            for (a, b) in traj.poses().iter().zip(back.poses()) {
                prop_assert!((a.timestamp - b.timestamp).abs() <= 1e-9);
                prop_assert!((a.position() - b.position()).norm() <= 1e-9);
                prop_assert!(a.transform.rotation.angle_to(&b.transform.rotation) <= 1e-9);
            }
            // Printed text is a fixed point of the round trip.
            prop_assert_eq!(back.to_text(), parse_trajectory(&back.to_text()).unwrap().to_text());
        }
    }
}
