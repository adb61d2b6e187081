//! Synthetic ground truth and controlled perturbations.
//!
//! Randomness comes from `ChaCha8Rng::seed_from_u64(seed)` and
//! `rand_distr::Normal`, both platform-independent, so generated files are
//! reproducible byte for byte.
//!
//! [`perturb`] applies its stages in a fixed order:
//!
//! 1. time shift (added to every timestamp)
//! 2. similarity offset (maps every pose into another frame)
//! 3. linear drift, growing from the first timestamp
//! 4. i.i.d. Gaussian noise in the body frame; per pose three translation
//!    draws then three rotation-vector draws
//! 5. dropouts (poses inside any window are removed)
//! 6. jump (a displacement added to every pose from a given time on)

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Pose, RigidTransform, Rotation, SimilarityTransform, Vec3};
use crate::trajectory::Trajectory;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathKind {
    Loop,
    Corridor,
    UShape,
    BackAndForth,
}

impl PathKind {
    pub const ALL: [PathKind; 4] = [
        PathKind::Loop,
        PathKind::Corridor,
        PathKind::UShape,
        PathKind::BackAndForth,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PathKind::Loop => "loop",
            PathKind::Corridor => "corridor",
            PathKind::UShape => "u-shape",
            PathKind::BackAndForth => "back-and-forth",
        }
    }
}

impl fmt::Display for PathKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PathKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PathKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown path kind '{s}'")))
    }
}

/// Shape and sampling of a generated trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathSpec {
    pub kind: PathKind,
    pub duration: f64,
    /// Samples per second.
    pub rate: f64,
    pub start_time: f64,
    /// Path length in meters (loop circumference, corridor length, ...).
    /// Back-and-forth paths use a quarter of it as the swing amplitude.
    pub length: f64,
}

impl PathSpec {
    pub fn new(kind: PathKind, duration: f64, rate: f64) -> Self {
        PathSpec {
            kind,
            duration,
            rate,
            start_time: 0.0,
            length: 20.0,
        }
    }

    pub fn starting_at(mut self, start_time: f64) -> Self {
        self.start_time = start_time;
        self
    }

    pub fn with_length(mut self, length: f64) -> Self {
        self.length = length;
        self
    }

    pub fn sample_count(&self) -> usize {
        ((self.duration * self.rate).round() as usize).max(2)
    }
}

/// Position and planar tangent at path parameter `u` in `[0, 1]`, in the
/// path's local frame (starting at the origin, heading along +x).
fn local_path(kind: PathKind, length: f64, duration: f64, u: f64) -> (Vec3, Vec3) {
    match kind {
        PathKind::Loop => {
            let r = length / TAU;
            let a = TAU * u;
            (
                Vec3::new(r * a.sin(), r - r * a.cos(), 0.0),
                Vec3::new(a.cos(), a.sin(), 0.0),
            )
        }
        PathKind::Corridor => {
            let sway = 0.01 * length;
            let a = 3.0 * TAU * u;
            (
                Vec3::new(length * u, sway * a.sin(), 0.0),
                Vec3::new(length, sway * 3.0 * TAU * a.cos(), 0.0),
            )
        }
        PathKind::UShape => {
            let r = length / 8.0;
            let leg = 0.5 * (length - PI * r);
            let s = length * u;
            if s <= leg {
                (Vec3::new(s, 0.0, 0.0), Vec3::x())
            } else if s <= leg + PI * r {
                let a = (s - leg) / r;
                (
                    Vec3::new(leg + r * a.sin(), r - r * a.cos(), 0.0),
                    Vec3::new(a.cos(), a.sin(), 0.0),
                )
            } else {
                let back = s - leg - PI * r;
                (Vec3::new(leg - back, 2.0 * r, 0.0), -Vec3::x())
            }
        }
        PathKind::BackAndForth => {
            // One swing every 4 s along x; a slow small lateral drift keeps
            // the point set from being collinear.
            let amplitude = 0.25 * length;
            let t = u * duration;
            let w = TAU / 4.0;
            (
                Vec3::new(
                    amplitude * (w * t).sin() + 0.2 * amplitude * (2.3 * w * t).sin(),
                    0.03 * amplitude * (0.37 * w * t).sin(),
                    0.0,
                ),
                Vec3::x(),
            )
        }
    }
}

/// Generates a smooth trajectory whose heading follows the path tangent.
/// The seed picks the path's placement (heading and origin) and a small
/// vertical undulation; output is identical for identical seeds.
pub fn generate(spec: &PathSpec, seed: u64) -> Result<Trajectory> {
    if !(spec.duration > 0.0 && spec.rate > 0.0 && spec.length > 0.0) {
        return Err(Error::InvalidInput(
            "duration, rate and length must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let heading = rng.random_range(0.0..TAU);
    let origin = Vec3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        0.0,
    );
    let bob_amplitude = rng.random_range(0.01..0.03);
    let bob_cycles = rng.random_range(1..4) as f64;
    let placement = Rotation::about_z(heading);

    let n = spec.sample_count();
    let poses = (0..n)
        .map(|k| {
            let u = k as f64 / (n - 1) as f64;
            let (p, tangent) = local_path(spec.kind, spec.length, spec.duration, u);
            let bob = bob_amplitude * (TAU * bob_cycles * u).sin();
            let position = placement.rotate(&p) + origin + Vec3::new(0.0, 0.0, bob);
            let yaw = heading + tangent.y.atan2(tangent.x);
            Pose::new(
                spec.start_time + k as f64 / spec.rate,
                RigidTransform::new(Rotation::about_z(yaw), position),
            )
        })
        .collect();
    Trajectory::new(poses, "world", format!("synthetic-{}", spec.kind))
}

pub fn generate_trajectory(
    kind: PathKind,
    duration: f64,
    rate: f64,
    seed: u64,
) -> Result<Trajectory> {
    generate(&PathSpec::new(kind, duration, rate), seed)
}

/// Similarity offset expressed for configuration files.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OffsetSpec {
    pub scale: f64,
    /// Rotation vector, degrees.
    pub rotation_deg: [f64; 3],
    pub translation: [f64; 3],
}

impl Default for OffsetSpec {
    fn default() -> Self {
        OffsetSpec {
            scale: 1.0,
            rotation_deg: [0.0; 3],
            translation: [0.0; 3],
        }
    }
}

impl OffsetSpec {
    pub fn from_transform(t: &SimilarityTransform) -> Self {
        let v = t.rotation.as_unit_quaternion().scaled_axis();
        OffsetSpec {
            scale: t.scale(),
            rotation_deg: [v.x.to_degrees(), v.y.to_degrees(), v.z.to_degrees()],
            translation: [t.translation.x, t.translation.y, t.translation.z],
        }
    }

    pub fn transform(&self) -> Result<SimilarityTransform> {
        let [rx, ry, rz] = self.rotation_deg;
        SimilarityTransform::new(
            self.scale,
            Rotation::from_scaled_axis(Vec3::new(rx, ry, rz).map(f64::to_radians)),
            Vec3::from(self.translation),
        )
    }

    fn is_identity(&self) -> bool {
        *self == OffsetSpec::default()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Jump {
    pub time: f64,
    pub displacement: [f64; 3],
}

/// Controlled corruption of a trajectory. The default value changes nothing.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbationSpec {
    pub offset: OffsetSpec,
    /// Seconds added to every timestamp.
    pub time_shift: f64,
    /// Translation drift, meters per second.
    pub drift_velocity: [f64; 3],
    /// Heading drift, degrees per second.
    pub drift_yaw_rate: f64,
    /// Per-axis translation noise, meters.
    pub noise_translation: f64,
    /// Per-axis rotation noise, degrees.
    pub noise_rotation: f64,
    pub dropouts: Vec<[f64; 2]>,
    pub jump: Option<Jump>,
}

impl PerturbationSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Wrapper {
            perturbation: PerturbationSpec,
        }
        toml::from_str::<Wrapper>(text)
            .map(|w| w.perturbation)
            .map_err(|e| Error::Manifest(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if !(self.noise_translation >= 0.0 && self.noise_rotation >= 0.0) {
            return bad("noise sigmas must be non-negative".into());
        }
        self.offset.transform()?;
        let mut windows = self.dropouts.clone();
        windows.sort_by(|a, b| a[0].total_cmp(&b[0]));
        for w in &windows {
            if w[0].is_nan() || w[1].is_nan() || w[0] >= w[1] {
                return bad(format!("dropout window [{}, {}] is empty", w[0], w[1]));
            }
        }
        if windows.windows(2).any(|p| p[1][0] <= p[0][1]) {
            return bad("dropout windows overlap".into());
        }
        Ok(())
    }
}

/// Applies `spec` to `trajectory`; see the module docs for the stage order.
pub fn perturb(trajectory: &Trajectory, spec: &PerturbationSpec, seed: u64) -> Result<Trajectory> {
    spec.validate()?;
    let mut poses: Vec<Pose> = trajectory.poses().to_vec();

    if spec.time_shift != 0.0 {
        for p in &mut poses {
            p.timestamp += spec.time_shift;
        }
    }

    if !spec.offset.is_identity() {
        let offset = spec.offset.transform()?;
        for p in &mut poses {
            p.transform = offset.apply(&p.transform);
        }
    }

    let drift_v = Vec3::from(spec.drift_velocity);
    if drift_v != Vec3::zeros() || spec.drift_yaw_rate != 0.0 {
        let start = poses.first().map_or(0.0, |p| p.timestamp);
        for p in &mut poses {
            let elapsed = p.timestamp - start;
            p.transform.translation += drift_v * elapsed;
            if spec.drift_yaw_rate != 0.0 {
                let yaw = Rotation::about_z((spec.drift_yaw_rate * elapsed).to_radians());
                p.transform.rotation = yaw * p.transform.rotation;
            }
        }
    }

    if spec.noise_translation > 0.0 || spec.noise_rotation > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trans = Normal::new(0.0, spec.noise_translation).expect("sigma validated");
        let rot = Normal::new(0.0, spec.noise_rotation.to_radians()).expect("sigma validated");
        for p in &mut poses {
            let dt = Vec3::new(rng.sample(trans), rng.sample(trans), rng.sample(trans));
            let dr = Vec3::new(rng.sample(rot), rng.sample(rot), rng.sample(rot));
            p.transform.translation += p.transform.rotation.rotate(&dt);
            p.transform.rotation = p.transform.rotation * Rotation::from_scaled_axis(dr);
        }
    }

    if !spec.dropouts.is_empty() {
        if let (Some(first), Some(last)) = (poses.first(), poses.last()) {
            for w in &spec.dropouts {
                if w[0] < first.timestamp || w[1] > last.timestamp {
                    return Err(Error::InvalidInput(format!(
                        "dropout window [{}, {}] is outside the trajectory span",
                        w[0], w[1]
                    )));
                }
            }
        }
        poses.retain(|p| {
            !spec
                .dropouts
                .iter()
                .any(|w| p.timestamp >= w[0] && p.timestamp <= w[1])
        });
    }

    if let Some(jump) = spec.jump {
        let d = Vec3::from(jump.displacement);
        for p in poses.iter_mut().filter(|p| p.timestamp >= jump.time) {
            p.transform.translation += d;
        }
    }

    Trajectory::new(
        poses,
        trajectory.frame_id.clone(),
        trajectory.source_label.clone(),
    )
}

/// A small three-sequence scene in one shared map frame, used by the demo
/// command and the golden-file tests:
///
/// * `seq-1` tracks the whole U-shaped route with mild noise,
/// * `seq-2` re-localizes 5 s late and jumps 4 m off the map halfway,
/// * `seq-3` tracks a loop but loses 3 s in the middle.
pub struct SyntheticScene {
    pub manifest: String,
    pub ground_truths: Vec<(String, Trajectory)>,
    pub estimates: Vec<(String, Trajectory)>,
}

impl SyntheticScene {
    pub fn generate(seed: u64) -> Result<Self> {
        let map_frame = OffsetSpec {
            scale: 1.0,
            rotation_deg: [0.0, 0.0, 35.0],
            translation: [3.0, -2.0, 0.1],
        };
        let noise = |spec: PerturbationSpec| PerturbationSpec {
            offset: map_frame,
            noise_translation: 0.02,
            noise_rotation: 0.5,
            ..spec
        };
        let layout = [
            (
                "seq-1",
                PathKind::UShape,
                0.0,
                30.0,
                noise(PerturbationSpec::default()),
            ),
            (
                "seq-2",
                PathKind::Corridor,
                100.0,
                20.0,
                noise(PerturbationSpec {
                    dropouts: vec![[100.05, 105.0]],
                    jump: Some(Jump {
                        time: 112.0,
                        displacement: [4.0, 0.0, 0.0],
                    }),
                    ..Default::default()
                }),
            ),
            (
                "seq-3",
                PathKind::Loop,
                200.0,
                25.0,
                noise(PerturbationSpec {
                    dropouts: vec![[210.0, 213.0]],
                    ..Default::default()
                }),
            ),
        ];

        let mut manifest = String::from(
            "scene = \"synthetic\"\nscene_class = \"medium\"\n\n[metrics]\naoe_threshold = 30.0\ndelta = 1.0\ntau = 60.0\nrpe_interval = 1.0\n",
        );
        let mut ground_truths = Vec::new();
        let mut estimates = Vec::new();
        for (i, (id, kind, start, duration, spec)) in layout.into_iter().enumerate() {
            let path_seed = seed.wrapping_mul(31).wrapping_add(i as u64);
            let gt = generate(
                &PathSpec::new(kind, duration, 10.0).starting_at(start),
                path_seed,
            )?;
            // Estimates sampled between ground-truth samples.
            let mid = resample_midpoints(&gt)?;
            let mut est = perturb(&mid, &spec, path_seed ^ 0x5eed)?;
            est.source_label = "synthetic-slam".into();
            est.frame_id = "map".into();
            let (t0, t1) = gt.time_span().expect("non-empty");
            manifest.push_str(&format!(
                "\n[[sequence]]\nid = \"{id}\"\nground_truth = \"gt/{id}.txt\"\nestimate = \"est/{id}.txt\"\nspan = [{t0:.3}, {t1:.3}]\n"
            ));
            ground_truths.push((format!("gt/{id}.txt"), gt));
            estimates.push((format!("est/{id}.txt"), est));
        }
        Ok(SyntheticScene {
            manifest,
            ground_truths,
            estimates,
        })
    }

    /// Writes `manifest.toml`, `gt/` and `est/` under `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir.join("gt"))?;
        std::fs::create_dir_all(dir.join("est"))?;
        std::fs::write(dir.join("manifest.toml"), &self.manifest)?;
        for (name, traj) in self.ground_truths.iter().chain(&self.estimates) {
            traj.write_to_path(dir.join(name))?;
        }
        Ok(())
    }
}

/// Poses interpolated halfway between consecutive samples.
fn resample_midpoints(traj: &Trajectory) -> Result<Trajectory> {
    let poses = traj
        .poses()
        .windows(2)
        .map(|w| {
            let t = 0.5 * (w[0].timestamp + w[1].timestamp);
            crate::geom::interpolate_pose(&w[0], &w[1], t).map(|p| Pose::new(t, p))
        })
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(poses, traj.frame_id.clone(), traj.source_label.clone())
}
