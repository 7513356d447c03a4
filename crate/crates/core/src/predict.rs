//! Training-free predictions built from anchors and similarity scores alone.

use crate::error::{Error, Result};
use crate::types::{rank_order, MomentPrediction, SimilarityProfile, SpanAnchor};

pub const DEFAULT_TOP_K: usize = 10;

/// Statistic used as an anchor's confidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConfidenceRule {
    /// Mean score over the anchor, gap frames included.
    #[default]
    Mean,
    /// Highest single frame score inside the anchor.
    Max,
    /// Mean score times the anchor's clip count.
    LengthWeighted,
}

impl std::str::FromStr for ConfidenceRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(ConfidenceRule::Mean),
            "max" => Ok(ConfidenceRule::Max),
            "length-weighted" => Ok(ConfidenceRule::LengthWeighted),
            other => Err(Error::field(
                "confidence",
                format!("unknown value {other:?}"),
            )),
        }
    }
}

/// One prediction per anchor with `confidence = mean_score`, best first,
/// ties to the earlier start, truncated to `top_k`.
pub fn predict_moments(anchors: &[SpanAnchor], top_k: usize) -> Result<Vec<MomentPrediction>> {
    let mut preds = anchors
        .iter()
        .map(|a| MomentPrediction::new(a.start_s(), a.end_s(), a.mean_score()))
        .collect::<Result<Vec<_>>>()?;
    preds.sort_by(rank_order);
    preds.truncate(top_k);
    Ok(preds)
}

/// Like [`predict_moments`] but with a selectable confidence statistic.
/// `scores` and `stride_s` must be the profile the anchors came from.
pub fn predict_moments_with(
    anchors: &[SpanAnchor],
    scores: &[f64],
    stride_s: f64,
    rule: ConfidenceRule,
    top_k: usize,
) -> Result<Vec<MomentPrediction>> {
    let mut preds = Vec::with_capacity(anchors.len());
    for a in anchors {
        let first = (a.start_s() / stride_s).round() as usize;
        let last = ((a.end_s() / stride_s).round() as usize).min(scores.len());
        if first >= last {
            return Err(Error::field(
                "anchors",
                format!(
                    "anchor [{}, {}] lies outside the profile",
                    a.start_s(),
                    a.end_s()
                ),
            ));
        }
        let region = &scores[first..last];
        let confidence = match rule {
            ConfidenceRule::Mean => a.mean_score(),
            ConfidenceRule::Max => region.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ConfidenceRule::LengthWeighted => a.mean_score() * region.len() as f64,
        };
        preds.push(MomentPrediction::new(a.start_s(), a.end_s(), confidence)?);
    }
    preds.sort_by(rank_order);
    preds.truncate(top_k);
    Ok(preds)
}

/// Min-max rescales the profile scores to `[0, 1]`; a constant profile maps
/// to all 0.5.
pub fn predict_highlights(profile: &SimilarityProfile) -> Vec<f64> {
    rescale_unit(profile.scores())
}

pub(crate) fn rescale_unit(scores: &[f64]) -> Vec<f64> {
    let (lo, hi) = scores
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| {
            (lo.min(s), hi.max(s))
        });
    if hi <= lo {
        return vec![0.5; scores.len()];
    }
    let range = hi - lo;
    scores.iter().map(|&s| (s - lo) / range).collect()
}
