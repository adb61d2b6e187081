//! Structured evaluation reports, per-pose CSV and SVG timelines.
//!
//! The JSON report carries numbers at fixed precision: six decimals for
//! meters, seconds and degrees, three for rates and scores. Non-finite
//! values are written as the strings `"inf"`, `"-inf"` or `"nan"`; absent
//! values as `null`. Field reference (schema version 1):
//!
//! | field | meaning |
//! |---|---|
//! | `schema`, `schema_version` | always `"slameval-report"`, `1` |
//! | `tool_version` | crate version that wrote the report |
//! | `mode` | `per-sequence`, `lifelong` or `pair` |
//! | `alignment_mode` | `rigid` or `similarity` |
//! | `manifest` | scene name and class, effective metric parameters, sequence list |
//! | `propagation` | lifelong/pair only: the first-sequence alignment |
//! | `sequences[]` | per-sequence results, see [`SequenceReport`] |
//! | `scene` | span-weighted `cr`/`coverage_cr`, count-pooled `ate_rmse`/`gated_ate_rmse` |
//! | `pair` | pair mode only: the two ids and the second sequence's `cs_r` |
//!
//! Timeline segments partition each sequence's `[t_min, t_max]`; a segment
//! is `correct`, `incorrect` or `absent` (no valid estimate). Events mark the
//! first estimate of a sequence and the first estimate after every gap.

use std::fmt::{self, Write as _};
use std::marker::PhantomData;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::align::Alignment;
use crate::error::Result;
use crate::lifelong::{AlignMode, SceneAggregate, SequenceEvaluation};
use crate::manifest::{MetricConfig, RpeInterval, SceneClass, TimeSpan};
use crate::metrics::PoseError;

pub const SCHEMA_NAME: &str = "slameval-report";
pub const SCHEMA_VERSION: u32 = 1;

/// A number written with `D` decimals.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Fixed<const D: usize>(pub f64);

/// Meters, seconds and degrees.
pub type Measure = Fixed<6>;
/// Rates and scores.
pub type Score = Fixed<3>;

impl<const D: usize> Fixed<D> {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl<const D: usize> From<f64> for Fixed<D> {
    fn from(v: f64) -> Self {
        Fixed(v)
    }
}

impl<const D: usize> fmt::Display for Fixed<D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            v if v.is_nan() => f.write_str("nan"),
            v if v == f64::INFINITY => f.write_str("inf"),
            v if v == f64::NEG_INFINITY => f.write_str("-inf"),
            v => write!(f, "{v:.D$}"),
        }
    }
}

impl<const D: usize> Serialize for Fixed<D> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            let raw = serde_json::value::RawValue::from_string(self.to_string())
                .map_err(serde::ser::Error::custom)?;
            raw.serialize(serializer)
        } else {
            serializer.serialize_str(&self.to_string())
        }
    }
}

impl<'de, const D: usize> Deserialize<'de> for Fixed<D> {
    fn deserialize<De: Deserializer<'de>>(
        deserializer: De,
    ) -> std::result::Result<Self, De::Error> {
        struct FixedVisitor<const D: usize>(PhantomData<Fixed<D>>);

        impl<const D: usize> Visitor<'_> for FixedVisitor<D> {
            type Value = Fixed<D>;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or one of \"inf\", \"-inf\", \"nan\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Self::Value, E> {
                Ok(Fixed(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Self::Value, E> {
                Ok(Fixed(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Self::Value, E> {
                Ok(Fixed(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Self::Value, E> {
                match v {
                    "inf" => Ok(Fixed(f64::INFINITY)),
                    "-inf" => Ok(Fixed(f64::NEG_INFINITY)),
                    "nan" => Ok(Fixed(f64::NAN)),
                    _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
        }

        deserializer.deserialize_any(FixedVisitor::<D>(PhantomData))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportMode {
    PerSequence,
    Lifelong,
    Pair,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentStatus {
    Correct,
    Incorrect,
    Absent,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: Measure,
    pub end: Measure,
    pub status: SegmentStatus,
}

/// Initialization or re-localization: the first estimate after a gap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: Measure,
    pub correct: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricEcho {
    pub ate_threshold: Measure,
    pub aoe_threshold: Measure,
    pub delta: Measure,
    pub tau: Measure,
    pub rpe_interval: String,
}

impl From<&MetricConfig> for MetricEcho {
    fn from(c: &MetricConfig) -> Self {
        MetricEcho {
            ate_threshold: c.epsilon.into(),
            aoe_threshold: c.phi.into(),
            delta: c.delta.into(),
            tau: c.tau.into(),
            rpe_interval: match c.rpe_interval {
                RpeInterval::Seconds(s) => format!("{} s", Measure::from(s)),
                RpeInterval::Frames(n) => format!("{n} frames"),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceEcho {
    pub id: String,
    pub ground_truth: String,
    pub estimate: String,
    pub span: [Measure; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEcho {
    pub scene: String,
    pub scene_class: SceneClass,
    pub metrics: MetricEcho,
    pub sequences: Vec<SequenceEcho>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub scale: Measure,
    /// Scalar-first unit quaternion.
    pub rotation_wxyz: [Measure; 4],
    pub translation: [Measure; 3],
    pub residual_rmse: Measure,
    pub pair_count: usize,
    pub degenerate: bool,
}

impl From<&Alignment> for AlignmentReport {
    fn from(a: &Alignment) -> Self {
        let t = &a.transform;
        // Report the quaternion in the hemisphere with w >= 0.
        let q = t.rotation.wxyz();
        let sign = if q[0] < 0.0 { -1.0 } else { 1.0 };
        AlignmentReport {
            scale: t.scale().into(),
            rotation_wxyz: q.map(|c| Fixed(sign * c)),
            translation: [t.translation.x, t.translation.y, t.translation.z].map(Fixed),
            residual_rmse: a.residual_rmse.into(),
            pair_count: a.pair_count,
            degenerate: a.degenerate,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceReport {
    pub id: String,
    pub t_min: Measure,
    pub t_max: Measure,
    pub estimate_count: usize,
    pub associated_count: usize,
    pub dropped: usize,
    pub correct_count: usize,
    pub t0: Option<Measure>,
    pub cr: Score,
    pub cr_t: Option<Score>,
    pub cs_r: Score,
    /// Correct rate with unbounded thresholds.
    pub coverage_cr: Score,
    pub ate_rmse: Option<Measure>,
    pub gated_ate_rmse: Option<Measure>,
    pub gated_rpe_rmse: Option<Measure>,
    pub rpe_pair_count: usize,
    pub alignment: Option<AlignmentReport>,
    /// Why the sequence could not be evaluated, when it could not.
    pub failure: Option<String>,
    pub timeline: Vec<Segment>,
    pub events: Vec<Event>,
}

impl SequenceReport {
    pub fn from_evaluation(ev: &SequenceEvaluation, delta: f64, failure: Option<String>) -> Self {
        let (segments, events) = timeline_segments(&ev.timeline, ev.span, delta);
        let r = &ev.robustness;
        SequenceReport {
            id: ev.id.clone(),
            t_min: r.t_min.into(),
            t_max: r.t_max.into(),
            estimate_count: ev.estimate_count,
            associated_count: ev.timeline.len(),
            dropped: ev.dropped,
            correct_count: ev.timeline.iter().filter(|e| e.correct).count(),
            t0: r.t0.map(Fixed),
            cr: r.cr.into(),
            cr_t: r.cr_t.map(Fixed),
            cs_r: r.cs_r.into(),
            coverage_cr: ev.coverage_cr.into(),
            ate_rmse: ev.ate_rmse.map(Fixed),
            gated_ate_rmse: ev.accuracy.map(|a| Fixed(a.gated_ate_rmse)),
            gated_rpe_rmse: ev.accuracy.and_then(|a| a.gated_rpe_rmse).map(Fixed),
            rpe_pair_count: ev.accuracy.map_or(0, |a| a.rpe_pair_count),
            alignment: ev.alignment.as_ref().map(AlignmentReport::from),
            failure,
            timeline: segments,
            events,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneReport {
    pub cr: Score,
    pub coverage_cr: Score,
    pub ate_rmse: Option<Measure>,
    pub gated_ate_rmse: Option<Measure>,
    pub total_span: Measure,
}

impl From<&SceneAggregate> for SceneReport {
    fn from(a: &SceneAggregate) -> Self {
        SceneReport {
            cr: a.cr.into(),
            coverage_cr: a.coverage_cr.into(),
            ate_rmse: a.ate_rmse.map(Fixed),
            gated_ate_rmse: a.gated_ate_rmse.map(Fixed),
            total_span: a.total_span.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub first: String,
    pub second: String,
    pub cs_r: Score,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema: String,
    pub schema_version: u32,
    pub tool_version: String,
    pub mode: ReportMode,
    pub alignment_mode: AlignMode,
    pub manifest: ManifestEcho,
    pub propagation: Option<AlignmentReport>,
    pub sequences: Vec<SequenceReport>,
    pub scene: SceneReport,
    pub pair: Option<PairReport>,
}

impl ReportDocument {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Partitions `[span.t_min, span.t_max]` into maximal status segments and
/// lists initialization/re-localization events. An estimate at `t_k` is
/// valid until `min(t_k + delta, t_{k+1})`.
pub fn timeline_segments(
    errors: &[PoseError],
    span: TimeSpan,
    delta: f64,
) -> (Vec<Segment>, Vec<Event>) {
    let mut raw: Vec<(f64, f64, SegmentStatus)> = Vec::new();
    let mut events = Vec::new();
    let mut cursor = span.t_min;
    for (k, e) in errors.iter().enumerate() {
        if k == 0 || e.timestamp > cursor {
            events.push(Event {
                time: e.timestamp.into(),
                correct: e.correct,
            });
        }
        if e.timestamp > cursor {
            raw.push((cursor, e.timestamp, SegmentStatus::Absent));
        }
        let next = errors.get(k + 1).map_or(span.t_max, |n| n.timestamp);
        let end = next.min(e.timestamp + delta).min(span.t_max);
        let status = if e.correct {
            SegmentStatus::Correct
        } else {
            SegmentStatus::Incorrect
        };
        if end > e.timestamp {
            raw.push((e.timestamp.max(cursor), end, status));
        }
        cursor = cursor.max(end);
    }
    if cursor < span.t_max {
        raw.push((cursor, span.t_max, SegmentStatus::Absent));
    }

    let mut merged: Vec<(f64, f64, SegmentStatus)> = Vec::with_capacity(raw.len());
    for seg in raw {
        match merged.last_mut() {
            Some(last) if last.2 == seg.2 => last.1 = seg.1,
            _ => merged.push(seg),
        }
    }
    let segments = merged
        .into_iter()
        .map(|(start, end, status)| Segment {
            start: start.into(),
            end: end.into(),
            status,
        })
        .collect();
    (segments, events)
}

/// Per-pose errors as CSV: `sequence,timestamp,ate,aoe,correct`.
pub fn pose_errors_csv<'a>(
    sequences: impl IntoIterator<Item = (&'a str, &'a [PoseError])>,
) -> String {
    let mut out = String::from("sequence,timestamp,ate,aoe,correct\n");
    for (id, errors) in sequences {
        for e in errors {
            let _ = writeln!(
                out,
                "{id},{},{},{},{}",
                Measure::from(e.timestamp),
                Measure::from(e.ate),
                Measure::from(e.aoe),
                e.correct
            );
        }
    }
    out
}

const SVG_WIDTH: f64 = 960.0;
const LABEL_WIDTH: f64 = 130.0;
const RIGHT_MARGIN: f64 = 110.0;
const HEADER: f64 = 56.0;
const ROW_HEIGHT: f64 = 44.0;
const FOOTER: f64 = 36.0;
const CORRECT_COLOR: &str = "#1f5fbf";
const INCORRECT_COLOR: &str = "#d62728";
const ABSENT_COLOR: &str = "#d0d0d0";

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn percent(s: Score) -> String {
    format!("{:.1}%", s.0 * 100.0)
}

/// Renders one track per sequence: blue for correct, red for incorrect and
/// grey for absent segments; dots mark correct and crosses incorrect
/// (re-)localizations. Output depends only on the report.
pub fn render_timeline(report: &ReportDocument) -> String {
    let rows = report.sequences.len();
    let height = HEADER + ROW_HEIGHT * rows.max(1) as f64 + FOOTER;
    let x0 = LABEL_WIDTH;
    let x1 = SVG_WIDTH - RIGHT_MARGIN;
    let mut s = String::new();

    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_WIDTH:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {SVG_WIDTH:.0} {height:.0}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let mode = match report.mode {
        ReportMode::PerSequence => "per-sequence",
        ReportMode::Lifelong => "lifelong",
        ReportMode::Pair => "pair",
    };
    let _ = writeln!(
        s,
        "<text x=\"{x0:.2}\" y=\"22\" font-size=\"15\" font-weight=\"bold\">{} ({mode})</text>",
        xml_escape(&report.manifest.scene)
    );
    let ate = report
        .scene
        .gated_ate_rmse
        .map_or_else(|| "n/a".to_string(), |v| format!("{v} m"));
    let _ = writeln!(
        s,
        "<text class=\"summary\" x=\"{x0:.2}\" y=\"40\">CR {} | coverage {} | correct-only ATE RMSE {}</text>",
        percent(report.scene.cr),
        percent(report.scene.coverage_cr),
        ate
    );

    let axis_y = HEADER + ROW_HEIGHT * rows.max(1) as f64;
    let _ = writeln!(
        s,
        "<line class=\"axis\" x1=\"{x0:.2}\" y1=\"{axis_y:.2}\" x2=\"{x1:.2}\" y2=\"{axis_y:.2}\" stroke=\"black\" stroke-width=\"1\"/>"
    );
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">time within sequence span</text>",
        0.5 * (x0 + x1),
        axis_y + 24.0
    );

    for (i, seq) in report.sequences.iter().enumerate() {
        let y = HEADER + ROW_HEIGHT * (i as f64 + 0.5);
        let (t_min, t_max) = (seq.t_min.0, seq.t_max.0);
        let scale = (x1 - x0) / (t_max - t_min);
        let x = |t: f64| x0 + (t - t_min) * scale;

        let _ = writeln!(
            s,
            "<g class=\"track\" data-sequence=\"{}\">",
            xml_escape(&seq.id)
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>",
            x0 - 10.0,
            y + 4.0,
            xml_escape(&seq.id)
        );
        let _ = writeln!(
            s,
            "<text x=\"{x0:.2}\" y=\"{:.2}\" font-size=\"9\" fill=\"#666\">{}</text>",
            y + 17.0,
            seq.t_min
        );
        let _ = writeln!(
            s,
            "<text x=\"{x1:.2}\" y=\"{:.2}\" font-size=\"9\" fill=\"#666\" text-anchor=\"end\">{}</text>",
            y + 17.0,
            seq.t_max
        );
        for seg in &seq.timeline {
            let (class, color, width) = match seg.status {
                SegmentStatus::Correct => ("correct", CORRECT_COLOR, 6.0),
                SegmentStatus::Incorrect => ("incorrect", INCORRECT_COLOR, 6.0),
                SegmentStatus::Absent => ("absent", ABSENT_COLOR, 2.0),
            };
            let _ = writeln!(
                s,
                "<line class=\"segment {class}\" x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"{color}\" stroke-width=\"{width:.0}\"/>",
                x(seg.start.0),
                x(seg.end.0)
            );
        }
        for ev in &seq.events {
            let ex = x(ev.time.0);
            if ev.correct {
                let _ = writeln!(
                    s,
                    "<circle class=\"event correct\" cx=\"{ex:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"{CORRECT_COLOR}\"/>",
                    y - 10.0
                );
            } else {
                let cy = y - 10.0;
                let _ = writeln!(
                    s,
                    "<path class=\"event incorrect\" d=\"M{:.2} {:.2} L{:.2} {:.2} M{:.2} {:.2} L{:.2} {:.2}\" stroke=\"{INCORRECT_COLOR}\" stroke-width=\"2\"/>",
                    ex - 4.0, cy - 4.0, ex + 4.0, cy + 4.0, ex - 4.0, cy + 4.0, ex + 4.0, cy - 4.0
                );
            }
        }
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\">CR {}</text>",
            x1 + 10.0,
            y + 4.0,
            percent(seq.cr)
        );
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    s
}
