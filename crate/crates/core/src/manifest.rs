//! Scene manifests and metric configuration.
//!
//! A manifest is a TOML document:
//!
//! ```toml
//! scene = "office"
//! scene_class = "small"       # optional: small | medium | large
//!
//! [metrics]                   # optional, as is every key in it
//! ate_threshold = 1.0         # meters
//! aoe_threshold = 30.0        # degrees, `inf` disables the check
//! delta = 1.0                 # seconds a correct estimate stays valid
//! tau = 60.0                  # seconds, re-localization score decay
//! rpe_interval = 1.0          # seconds (or `rpe_frames = 10`)
//!
//! [[sequence]]
//! id = "office-1"
//! ground_truth = "gt/office-1.txt"
//! estimate = "est/office-1.txt"   # optional, may be given on the command line
//! span = [0.0, 120.5]             # ground-truth coverage, seconds
//! ```
//!
//! Relative paths are resolved against the manifest's directory. Sequences
//! are evaluated in the order listed.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_AOE_THRESHOLD_DEG: f64 = 30.0;
pub const DEFAULT_DELTA_S: f64 = 1.0;
pub const DEFAULT_TAU_S: f64 = 60.0;
pub const DEFAULT_RPE_INTERVAL_S: f64 = 1.0;

/// A closed time interval `[t_min, t_max]` in seconds with `t_min < t_max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSpan {
    pub t_min: f64,
    pub t_max: f64,
}

impl TimeSpan {
    pub fn new(t_min: f64, t_max: f64) -> Result<Self> {
        if !(t_min.is_finite() && t_max.is_finite() && t_min < t_max) {
            return Err(Error::InvalidSpan { t_min, t_max });
        }
        Ok(TimeSpan { t_min, t_max })
    }

    pub fn duration(&self) -> f64 {
        self.t_max - self.t_min
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_min && t <= self.t_max
    }

    fn overlaps(&self, other: &TimeSpan) -> bool {
        self.t_min < other.t_max && other.t_min < self.t_max
    }
}

/// Spacing between the two poses of a relative-pose-error pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RpeInterval {
    Seconds(f64),
    Frames(usize),
}

impl fmt::Display for RpeInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RpeInterval::Seconds(s) => write!(f, "{s} s"),
            RpeInterval::Frames(n) => write!(f, "{n} frames"),
        }
    }
}

/// Size class of a scene; selects the default ATE threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SceneClass {
    #[default]
    Small,
    Medium,
    Large,
}

impl SceneClass {
    pub fn default_ate_threshold(self) -> f64 {
        match self {
            SceneClass::Small => 1.0,
            SceneClass::Medium => 3.0,
            SceneClass::Large => 5.0,
        }
    }

    /// Class of the well-known benchmark scenes, matched on the name before
    /// any `-N` suffix.
    pub fn for_scene_name(name: &str) -> Option<SceneClass> {
        let base = name.split('-').next().unwrap_or(name).to_ascii_lowercase();
        match base.as_str() {
            "office" => Some(SceneClass::Small),
            "home" | "cafe" => Some(SceneClass::Medium),
            "corridor" | "market" => Some(SceneClass::Large),
            _ => None,
        }
    }
}

/// Thresholds and windows shared by every metric.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    /// ATE threshold in meters.
    pub epsilon: f64,
    /// AOE threshold in degrees.
    pub phi: f64,
    /// Validity window of one correct estimate, seconds.
    pub delta: f64,
    /// Re-localization score decay, seconds.
    pub tau: f64,
    pub rpe_interval: RpeInterval,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            epsilon: SceneClass::Small.default_ate_threshold(),
            phi: DEFAULT_AOE_THRESHOLD_DEG,
            delta: DEFAULT_DELTA_S,
            tau: DEFAULT_TAU_S,
            rpe_interval: RpeInterval::Seconds(DEFAULT_RPE_INTERVAL_S),
        }
    }
}

impl MetricConfig {
    pub fn with_thresholds(epsilon: f64, phi: f64) -> Self {
        MetricConfig {
            epsilon,
            phi,
            ..MetricConfig::default()
        }
    }

    /// Every parameter must be strictly positive; thresholds may be infinite.
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64, allow_inf: bool| {
            if v.is_nan() || v <= 0.0 || (!allow_inf && v.is_infinite()) {
                Err(Error::InvalidInput(format!(
                    "{name} must be positive, got {v}"
                )))
            } else {
                Ok(())
            }
        };
        positive("ATE threshold", self.epsilon, true)?;
        positive("AOE threshold", self.phi, true)?;
        positive("delta", self.delta, false)?;
        positive("tau", self.tau, false)?;
        match self.rpe_interval {
            RpeInterval::Seconds(s) => positive("RPE interval", s, false),
            RpeInterval::Frames(0) => Err(Error::InvalidInput(
                "RPE interval must be at least one frame".into(),
            )),
            RpeInterval::Frames(_) => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SequenceEntry {
    pub id: String,
    pub ground_truth: PathBuf,
    pub estimate: Option<PathBuf>,
    pub span: TimeSpan,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneManifest {
    pub scene_name: String,
    pub scene_class: SceneClass,
    pub sequences: Vec<SequenceEntry>,
    pub metric_config: MetricConfig,
    /// Directory relative paths are resolved against.
    pub base_dir: Option<PathBuf>,
}

impl SceneManifest {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
        let mut manifest = parse_manifest(&text).map_err(|e| e.in_file(path))?;
        manifest.base_dir = path.parent().map(Path::to_path_buf);
        Ok(manifest)
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        match &self.base_dir {
            Some(dir) if path.is_relative() => dir.join(path),
            _ => path.to_path_buf(),
        }
    }

    pub fn sequence(&self, id: &str) -> Option<&SequenceEntry> {
        self.sequences.iter().find(|s| s.id == id)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    scene: String,
    scene_class: Option<SceneClass>,
    #[serde(default)]
    metrics: RawMetrics,
    #[serde(default, rename = "sequence")]
    sequences: Vec<RawSequence>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawMetrics {
    ate_threshold: Option<f64>,
    aoe_threshold: Option<f64>,
    delta: Option<f64>,
    tau: Option<f64>,
    rpe_interval: Option<f64>,
    rpe_frames: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSequence {
    id: String,
    ground_truth: Option<PathBuf>,
    estimate: Option<PathBuf>,
    span: [f64; 2],
}

/// Parses and validates manifest text, filling in defaults for omitted
/// metric parameters.
pub fn parse_manifest(text: &str) -> Result<SceneManifest> {
    let raw: RawManifest = toml::from_str(text).map_err(|e| Error::Manifest(e.to_string()))?;

    if raw.sequences.is_empty() {
        return Err(Error::Manifest("no sequences listed".into()));
    }

    let scene_class = raw
        .scene_class
        .or_else(|| SceneClass::for_scene_name(&raw.scene))
        .unwrap_or_default();

    let rpe_interval = match (raw.metrics.rpe_interval, raw.metrics.rpe_frames) {
        (Some(_), Some(_)) => {
            return Err(Error::Manifest(
                "rpe_interval and rpe_frames are mutually exclusive".into(),
            ))
        }
        (Some(s), None) => RpeInterval::Seconds(s),
        (None, Some(n)) => RpeInterval::Frames(n),
        (None, None) => RpeInterval::Seconds(DEFAULT_RPE_INTERVAL_S),
    };
    let metric_config = MetricConfig {
        epsilon: raw
            .metrics
            .ate_threshold
            .unwrap_or_else(|| scene_class.default_ate_threshold()),
        phi: raw
            .metrics
            .aoe_threshold
            .unwrap_or(DEFAULT_AOE_THRESHOLD_DEG),
        delta: raw.metrics.delta.unwrap_or(DEFAULT_DELTA_S),
        tau: raw.metrics.tau.unwrap_or(DEFAULT_TAU_S),
        rpe_interval,
    };
    metric_config
        .validate()
        .map_err(|e| Error::Manifest(e.to_string()))?;

    let mut sequences: Vec<SequenceEntry> = Vec::with_capacity(raw.sequences.len());
    for seq in raw.sequences {
        let ground_truth = match seq.ground_truth {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => {
                return Err(Error::Manifest(format!(
                    "sequence '{}' has no ground_truth path",
                    seq.id
                )))
            }
        };
        let span = TimeSpan::new(seq.span[0], seq.span[1]).map_err(|_| {
            Error::Manifest(format!(
                "sequence '{}' has an invalid span [{}, {}]",
                seq.id, seq.span[0], seq.span[1]
            ))
        })?;
        if let Some(other) = sequences.iter().find(|s| s.id == seq.id) {
            return Err(Error::Manifest(format!(
                "duplicate sequence id '{}'",
                other.id
            )));
        }
        if let Some(other) = sequences.iter().find(|s| s.span.overlaps(&span)) {
            return Err(Error::Manifest(format!(
                "spans of sequences '{}' and '{}' overlap",
                other.id, seq.id
            )));
        }
        sequences.push(SequenceEntry {
            id: seq.id,
            ground_truth,
            estimate: seq.estimate,
            span,
        });
    }

    Ok(SceneManifest {
        scene_name: raw.scene,
        scene_class,
        sequences,
        metric_config,
        base_dir: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sequences(n: usize) -> String {
        (0..n)
            .map(|i| {
                format!(
                    "[[sequence]]\nid = \"s{i}\"\nground_truth = \"gt{i}.txt\"\nspan = [{}, {}]\n",
                    i * 100,
                    i * 100 + 50
                )
            })
            .collect()
    }

    #[test]
    fn defaults_for_a_small_scene() {
        let m = parse_manifest(&format!("scene = \"lab\"\n{}", sequences(1))).unwrap();
        assert_eq!(m.scene_class, SceneClass::Small);
        assert_eq!(m.metric_config.epsilon, 1.0);
        assert_eq!(m.metric_config.phi, 30.0);
        assert_eq!(m.metric_config.delta, 1.0);
        assert_eq!(m.metric_config.tau, 60.0);
    }

    #[test]
    fn known_scene_names_pick_their_threshold() {
        for (name, eps) in [
            ("office", 1.0),
            ("home", 3.0),
            ("cafe-2", 3.0),
            ("corridor", 5.0),
            ("market", 5.0),
        ] {
            let m = parse_manifest(&format!("scene = \"{name}\"\n{}", sequences(1))).unwrap();
            assert_eq!(m.metric_config.epsilon, eps, "{name}");
        }
        let m = parse_manifest(&format!(
            "scene = \"office\"\nscene_class = \"large\"\n{}",
            sequences(1)
        ))
        .unwrap();
        assert_eq!(m.metric_config.epsilon, 5.0);
    }

    #[test]
    fn explicit_metrics_and_infinite_aoe() {
        let text = format!(
            "scene = \"x\"\n[metrics]\nate_threshold = 0.3\naoe_threshold = inf\nrpe_frames = 5\n{}",
            sequences(2)
        );
        let m = parse_manifest(&text).unwrap();
        assert_eq!(m.metric_config.epsilon, 0.3);
        assert!(m.metric_config.phi.is_infinite());
        assert_eq!(m.metric_config.rpe_interval, RpeInterval::Frames(5));
    }

    #[test]
    fn empty_sequence_list_is_rejected() {
        assert!(matches!(
            parse_manifest("scene = \"x\"\n"),
            Err(Error::Manifest(_))
        ));
    }

    #[test]
    fn five_sequences_keep_their_order() {
        let m = parse_manifest(&format!("scene = \"x\"\n{}", sequences(5))).unwrap();
        let ids: Vec<_> = m.sequences.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, ["s0", "s1", "s2", "s3", "s4"]);
    }

    #[test]
    fn invalid_entries_are_rejected() {
        let missing_gt = "scene = \"x\"\n[[sequence]]\nid = \"a\"\nspan = [0.0, 1.0]\n";
        assert!(matches!(
            parse_manifest(missing_gt),
            Err(Error::Manifest(_))
        ));

        let reversed =
            "scene = \"x\"\n[[sequence]]\nid = \"a\"\nground_truth = \"g\"\nspan = [2.0, 1.0]\n";
        assert!(matches!(parse_manifest(reversed), Err(Error::Manifest(_))));

        let overlap =
            "scene = \"x\"\n[[sequence]]\nid = \"a\"\nground_truth = \"g\"\nspan = [0.0, 10.0]\n\
                       [[sequence]]\nid = \"b\"\nground_truth = \"h\"\nspan = [5.0, 20.0]\n";
        assert!(matches!(parse_manifest(overlap), Err(Error::Manifest(_))));

        let negative = format!("scene = \"x\"\n[metrics]\ndelta = -1.0\n{}", sequences(1));
        assert!(matches!(parse_manifest(&negative), Err(Error::Manifest(_))));

        let unknown = format!("scene = \"x\"\nbogus = 1\n{}", sequences(1));
        assert!(matches!(parse_manifest(&unknown), Err(Error::Manifest(_))));
    }

    #[test]
    fn relative_paths_resolve_against_the_manifest_dir() {
        let mut m = parse_manifest(&format!("scene = \"x\"\n{}", sequences(1))).unwrap();
        m.base_dir = Some(PathBuf::from("/data/scene"));
        assert_eq!(
            m.resolve(&m.sequences[0].ground_truth),
            PathBuf::from("/data/scene/gt0.txt")
        );
        assert_eq!(m.resolve(Path::new("/abs.txt")), PathBuf::from("/abs.txt"));
    }
}
