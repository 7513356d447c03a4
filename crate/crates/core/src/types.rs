//! Domain types shared by every stage of the pipeline.
//!
//! All types validate their invariants on construction and are immutable
//! afterwards, so a value that exists is a value that is well-formed.
//! Times are in seconds. Frame `i` covers the half-open interval
//! `[i * stride, (i + 1) * stride)`.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Clip stride used when a file does not declare one.
pub const DEFAULT_CLIP_STRIDE_S: f64 = 2.0;

/// Query identifier. Annotation files use both integers and strings; the
/// original representation is kept so files round-trip unchanged.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Qid {
    Int(i64),
    Str(String),
}

impl Ord for Qid {
    /// Integers sort numerically and before all strings.
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Qid::Int(a), Qid::Int(b)) => a.cmp(b),
            (Qid::Int(_), Qid::Str(_)) => Ordering::Less,
            (Qid::Str(_), Qid::Int(_)) => Ordering::Greater,
            (Qid::Str(a), Qid::Str(b)) => a.cmp(b),
        }
    }
}

impl PartialOrd for Qid {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Qid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Qid::Int(v) => write!(f, "{v}"),
            Qid::Str(s) => f.write_str(s),
        }
    }
}

impl From<i64> for Qid {
    fn from(v: i64) -> Self {
        Qid::Int(v)
    }
}

impl From<&str> for Qid {
    fn from(v: &str) -> Self {
        Qid::Str(v.to_owned())
    }
}

pub(crate) fn check_finite_vec(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            what: what.to_owned(),
        })
    }
}

fn check_finite(value: f64, field: &str) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::field(field, format!("{value} is not finite")))
    }
}

/// One sampled frame: its description text and the description embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    index: usize,
    description: String,
    embedding: Vec<f64>,
}

impl FrameRecord {
    pub fn new(index: usize, description: impl Into<String>, embedding: Vec<f64>) -> Result<Self> {
        if embedding.is_empty() {
            return Err(Error::field("embedding", "must have dimension >= 1"));
        }
        check_finite_vec(&embedding, &format!("embedding of frame {index}"))?;
        if embedding.iter().all(|&v| v == 0.0) {
            return Err(Error::field(
                "embedding",
                format!("embedding of frame {index} is all zeros"),
            ));
        }
        Ok(Self {
            index,
            description: description.into(),
            embedding,
        })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn embedding(&self) -> &[f64] {
        &self.embedding
    }
}

/// Per-video sequence of frame description embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoFeatureSet {
    video_id: String,
    duration_s: f64,
    clip_stride_s: f64,
    frames: Vec<FrameRecord>,
}

impl VideoFeatureSet {
    /// Frames must be indexed `0, 1, 2, ...` in order, share one embedding
    /// dimension, and cover the video: `n * stride >= duration - stride` and
    /// `(n - 1) * stride <= duration`.
    pub fn new(
        video_id: impl Into<String>,
        duration_s: f64,
        clip_stride_s: f64,
        frames: Vec<FrameRecord>,
    ) -> Result<Self> {
        check_finite(duration_s, "duration_s")?;
        if duration_s < 0.0 {
            return Err(Error::field("duration_s", "must be nonnegative"));
        }
        check_finite(clip_stride_s, "clip_stride_s")?;
        if clip_stride_s <= 0.0 {
            return Err(Error::field("clip_stride_s", "must be positive"));
        }
        for (pos, frame) in frames.iter().enumerate() {
            if frame.index != pos {
                return Err(Error::field(
                    "frames",
                    format!("frame at position {pos} has index {}", frame.index),
                ));
            }
        }
        if let Some(first) = frames.first() {
            let dim = first.embedding.len();
            if let Some(bad) = frames.iter().find(|f| f.embedding.len() != dim) {
                return Err(Error::field(
                    "frames",
                    format!(
                        "frame {} has dimension {}, expected {dim}",
                        bad.index,
                        bad.embedding.len()
                    ),
                ));
            }
        }
        let n = frames.len() as f64;
        if n * clip_stride_s < duration_s - clip_stride_s {
            return Err(Error::field(
                "frames",
                format!(
                    "{} frames at stride {clip_stride_s} do not cover duration {duration_s}",
                    frames.len()
                ),
            ));
        }
        if !frames.is_empty() && (n - 1.0) * clip_stride_s > duration_s {
            return Err(Error::field(
                "frames",
                format!(
                    "{} frames at stride {clip_stride_s} start beyond duration {duration_s}",
                    frames.len()
                ),
            ));
        }
        Ok(Self {
            video_id: video_id.into(),
            duration_s,
            clip_stride_s,
            frames,
        })
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_s
    }

    pub fn clip_stride_s(&self) -> f64 {
        self.clip_stride_s
    }

    pub fn frames(&self) -> &[FrameRecord] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Embedding dimension, or `None` for a video without frames.
    pub fn dim(&self) -> Option<usize> {
        self.frames.first().map(|f| f.embedding.len())
    }
}

/// A rewritten query with its embedding and optional rewrite quality.
#[derive(Debug, Clone, PartialEq)]
pub struct Rewrite {
    text: String,
    embedding: Vec<f64>,
    quality: Option<f64>,
}

impl Rewrite {
    pub fn new(text: impl Into<String>, embedding: Vec<f64>, quality: Option<f64>) -> Result<Self> {
        if embedding.is_empty() {
            return Err(Error::field("embedding", "must have dimension >= 1"));
        }
        check_finite_vec(&embedding, "rewrite embedding")?;
        if let Some(q) = quality {
            if !(0.0..=1.0).contains(&q) {
                return Err(Error::field("quality", format!("{q} is outside [0, 1]")));
            }
        }
        Ok(Self {
            text: text.into(),
            embedding,
            quality,
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn embedding(&self) -> &[f64] {
        &self.embedding
    }

    pub fn quality(&self) -> Option<f64> {
        self.quality
    }
}

/// The original query, its rewrites, and all their embeddings.
///
/// `video_id` optionally pins the bundle to one video; unpinned bundles are
/// scored against every video they are offered.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryBundle {
    qid: Qid,
    video_id: Option<String>,
    original_text: String,
    original_embedding: Vec<f64>,
    rewrites: Vec<Rewrite>,
}

impl QueryBundle {
    pub fn new(
        qid: Qid,
        original_text: impl Into<String>,
        original_embedding: Vec<f64>,
        rewrites: Vec<Rewrite>,
    ) -> Result<Self> {
        if original_embedding.is_empty() {
            return Err(Error::field(
                "original_embedding",
                "must have dimension >= 1",
            ));
        }
        check_finite_vec(&original_embedding, "original_embedding")?;
        Ok(Self {
            qid,
            video_id: None,
            original_text: original_text.into(),
            original_embedding,
            rewrites,
        })
    }

    pub fn with_video_id(mut self, video_id: impl Into<String>) -> Self {
        self.video_id = Some(video_id.into());
        self
    }

    pub fn qid(&self) -> &Qid {
        &self.qid
    }

    pub fn video_id(&self) -> Option<&str> {
        self.video_id.as_deref()
    }

    pub fn original_text(&self) -> &str {
        &self.original_text
    }

    pub fn original_embedding(&self) -> &[f64] {
        &self.original_embedding
    }

    pub fn rewrites(&self) -> &[Rewrite] {
        &self.rewrites
    }
}

/// Per-frame similarity scores for one (video, query) pair, with the
/// adaptive threshold and the resulting marks.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityProfile {
    video_id: String,
    qid: Qid,
    clip_stride_s: f64,
    duration_s: f64,
    scores: Vec<f64>,
    threshold: f64,
    marks: Vec<bool>,
}

impl SimilarityProfile {
    /// Marks are derived here (`score > threshold`) so they can never
    /// disagree with the scores.
    pub fn new(
        video_id: impl Into<String>,
        qid: Qid,
        clip_stride_s: f64,
        duration_s: f64,
        scores: Vec<f64>,
        threshold: f64,
    ) -> Result<Self> {
        check_finite(clip_stride_s, "clip_stride_s")?;
        if clip_stride_s <= 0.0 {
            return Err(Error::field("clip_stride_s", "must be positive"));
        }
        check_finite(duration_s, "duration_s")?;
        check_finite(threshold, "threshold")?;
        check_finite_vec(&scores, "scores")?;
        if let Some(s) = scores.iter().find(|s| !(-1.0..=1.0).contains(*s)) {
            return Err(Error::field("scores", format!("{s} is outside [-1, 1]")));
        }
        let marks = crate::anchors::mark(&scores, threshold)?;
        Ok(Self {
            video_id: video_id.into(),
            qid,
            clip_stride_s,
            duration_s,
            scores,
            threshold,
            marks,
        })
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn qid(&self) -> &Qid {
        &self.qid
    }

    pub fn clip_stride_s(&self) -> f64 {
        self.clip_stride_s
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_s
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn marks(&self) -> &[bool] {
        &self.marks
    }
}

/// A run of high-similarity frames, in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpanAnchor {
    start_s: f64,
    end_s: f64,
    mean_score: f64,
}

impl SpanAnchor {
    pub fn new(start_s: f64, end_s: f64, mean_score: f64) -> Result<Self> {
        check_finite(start_s, "start_s")?;
        check_finite(end_s, "end_s")?;
        check_finite(mean_score, "mean_score")?;
        if start_s < 0.0 {
            return Err(Error::field("start_s", "must be nonnegative"));
        }
        if end_s <= start_s {
            return Err(Error::field(
                "end_s",
                format!("{end_s} <= start_s {start_s}"),
            ));
        }
        if !(-1.0..=1.0).contains(&mean_score) {
            return Err(Error::field(
                "mean_score",
                format!("{mean_score} is outside [-1, 1]"),
            ));
        }
        Ok(Self {
            start_s,
            end_s,
            mean_score,
        })
    }

    pub fn start_s(&self) -> f64 {
        self.start_s
    }

    pub fn end_s(&self) -> f64 {
        self.end_s
    }

    pub fn mean_score(&self) -> f64 {
        self.mean_score
    }

    /// Checks `end_s <= duration_s + stride_s`.
    pub fn check_within(&self, duration_s: f64, stride_s: f64) -> Result<()> {
        if self.end_s > duration_s + stride_s {
            return Err(Error::field(
                "end_s",
                format!(
                    "{} exceeds duration {duration_s} plus one stride {stride_s}",
                    self.end_s
                ),
            ));
        }
        Ok(())
    }
}

/// A predicted moment with its ranking confidence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentPrediction {
    start_s: f64,
    end_s: f64,
    confidence: f64,
}

impl MomentPrediction {
    pub fn new(start_s: f64, end_s: f64, confidence: f64) -> Result<Self> {
        check_finite(start_s, "start_s")?;
        check_finite(end_s, "end_s")?;
        check_finite(confidence, "confidence")?;
        if end_s <= start_s {
            return Err(Error::field(
                "end_s",
                format!("{end_s} <= start_s {start_s}"),
            ));
        }
        Ok(Self {
            start_s,
            end_s,
            confidence,
        })
    }

    pub fn start_s(&self) -> f64 {
        self.start_s
    }

    pub fn end_s(&self) -> f64 {
        self.end_s
    }

    pub fn confidence(&self) -> f64 {
        self.confidence
    }

    pub fn window(&self) -> (f64, f64) {
        (self.start_s, self.end_s)
    }
}

/// Canonical ranking: confidence descending, then earlier start.
pub fn rank_order(a: &MomentPrediction, b: &MomentPrediction) -> Ordering {
    b.confidence
        .total_cmp(&a.confidence)
        .then(a.start_s.total_cmp(&b.start_s))
        .then(a.end_s.total_cmp(&b.end_s))
}

/// All predictions for one query: ranked moments and per-clip highlight
/// scores.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryPrediction {
    pub qid: Qid,
    pub moments: Vec<MomentPrediction>,
    pub saliency: Vec<f64>,
}

/// Ordinal saliency scale and the level at which a clip counts as
/// "very good".
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SaliencyScale {
    pub max_level: u32,
    pub very_good_cut: u32,
}

impl Default for SaliencyScale {
    fn default() -> Self {
        Self {
            max_level: 4,
            very_good_cut: 3,
        }
    }
}

impl SaliencyScale {
    pub fn new(max_level: u32, very_good_cut: u32) -> Result<Self> {
        if very_good_cut > max_level {
            return Err(Error::field(
                "very_good_cut",
                format!("{very_good_cut} exceeds max level {max_level}"),
            ));
        }
        Ok(Self {
            max_level,
            very_good_cut,
        })
    }
}

/// Annotated moments and clip saliency for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    qid: Qid,
    video_id: String,
    query: String,
    duration_s: f64,
    relevant_windows: Vec<(f64, f64)>,
    saliency_scores: Option<Vec<Vec<u32>>>,
    relevant_clip_ids: Option<Vec<usize>>,
}

impl GroundTruth {
    pub fn new(
        qid: Qid,
        video_id: impl Into<String>,
        query: impl Into<String>,
        duration_s: f64,
        relevant_windows: Vec<(f64, f64)>,
    ) -> Result<Self> {
        check_finite(duration_s, "duration")?;
        if duration_s < 0.0 {
            return Err(Error::field("duration", "must be nonnegative"));
        }
        for &(s, e) in &relevant_windows {
            if !s.is_finite() || !e.is_finite() {
                return Err(Error::field("relevant_windows", "non-finite window bound"));
            }
            if s < 0.0 || s >= e {
                return Err(Error::field(
                    "relevant_windows",
                    format!("window [{s}, {e}] is not well-formed"),
                ));
            }
            if e > duration_s + DEFAULT_CLIP_STRIDE_S {
                return Err(Error::field(
                    "relevant_windows",
                    format!("window end {e} exceeds duration {duration_s} plus one clip"),
                ));
            }
        }
        Ok(Self {
            qid,
            video_id: video_id.into(),
            query: query.into(),
            duration_s,
            relevant_windows,
            saliency_scores: None,
            relevant_clip_ids: None,
        })
    }

    /// Attaches clip saliency. `saliency_scores[k]` holds the annotator votes
    /// for clip `relevant_clip_ids[k]`, or for clip `k` when no ids are given.
    pub fn with_saliency(
        mut self,
        saliency_scores: Option<Vec<Vec<u32>>>,
        relevant_clip_ids: Option<Vec<usize>>,
    ) -> Result<Self> {
        if let (Some(scores), Some(ids)) = (&saliency_scores, &relevant_clip_ids) {
            if scores.len() != ids.len() {
                return Err(Error::LengthMismatch {
                    what: "saliency_scores",
                    left: scores.len(),
                    right: ids.len(),
                });
            }
        }
        if let Some(ids) = &relevant_clip_ids {
            let mut seen = std::collections::HashSet::new();
            if let Some(dup) = ids.iter().find(|id| !seen.insert(**id)) {
                return Err(Error::field(
                    "relevant_clip_ids",
                    format!("clip {dup} listed twice"),
                ));
            }
        }
        self.saliency_scores = saliency_scores;
        self.relevant_clip_ids = relevant_clip_ids;
        Ok(self)
    }

    pub fn qid(&self) -> &Qid {
        &self.qid
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn query(&self) -> &str {
        &self.query
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_s
    }

    pub fn relevant_windows(&self) -> &[(f64, f64)] {
        &self.relevant_windows
    }

    pub fn saliency_scores(&self) -> Option<&[Vec<u32>]> {
        self.saliency_scores.as_deref()
    }

    pub fn relevant_clip_ids(&self) -> Option<&[usize]> {
        self.relevant_clip_ids.as_deref()
    }

    /// Per-clip ordinal labels for a video of `n_clips` clips, or `None`
    /// when the annotation carries no saliency.
    ///
    /// Multiple annotator votes are reduced by mean-then-round (halves round
    /// up). Clips not listed get label 0.
    pub fn clip_labels(&self, n_clips: usize) -> Result<Option<Vec<u32>>> {
        let Some(scores) = &self.saliency_scores else {
            return Ok(None);
        };
        let mut labels = vec![0u32; n_clips];
        for (k, votes) in scores.iter().enumerate() {
            let clip = match &self.relevant_clip_ids {
                Some(ids) => ids[k],
                None => k,
            };
            if clip >= n_clips {
                return Err(Error::field(
                    "relevant_clip_ids",
                    format!("clip {clip} is out of range for {n_clips} clips"),
                ));
            }
            labels[clip] = mean_round(votes);
        }
        Ok(Some(labels))
    }
}

fn mean_round(votes: &[u32]) -> u32 {
    if votes.is_empty() {
        return 0;
    }
    let n = votes.len() as u64;
    let sum: u64 = votes.iter().map(|&v| u64::from(v)).sum();
    ((2 * sum + n) / (2 * n)) as u32
}

/// Loss hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub lambda_l1: f64,
    pub lambda_iou: f64,
    pub lambda_cls: f64,
    pub lambda_h: f64,
    pub w_p: f64,
    /// Hinge margin.
    pub delta: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_l1: 10.0,
            lambda_iou: 1.0,
            lambda_cls: 4.0,
            lambda_h: 1.0,
            w_p: 10.0,
            delta: 0.2,
        }
    }
}

impl LossWeights {
    pub fn new(
        lambda_l1: f64,
        lambda_iou: f64,
        lambda_cls: f64,
        lambda_h: f64,
        w_p: f64,
        delta: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("lambda_l1", lambda_l1),
            ("lambda_iou", lambda_iou),
            ("lambda_cls", lambda_cls),
            ("lambda_h", lambda_h),
            ("w_p", w_p),
            ("delta", delta),
        ] {
            check_finite(v, name)?;
            if v < 0.0 {
                return Err(Error::field(name, "must be nonnegative"));
            }
        }
        Ok(Self {
            lambda_l1,
            lambda_iou,
            lambda_cls,
            lambda_h,
            w_p,
            delta,
        })
    }
}
