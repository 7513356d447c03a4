//! Adaptive thresholding of a similarity profile and conversion of marked
//! frames into span anchors.
//!
//! The threshold is the third most common score once scores are quantized
//! into bins. Frames scoring strictly above it are marked. Runs of marked
//! frames separated by at most `max_gap` unmarked frames merge into a single
//! anchor.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::types::{check_finite_vec, SpanAnchor};

pub const DEFAULT_QUANTIZATION: f64 = 0.01;
pub const DEFAULT_MAX_GAP: usize = 5;
/// Rank of the histogram bin used as threshold.
pub const THRESHOLD_RANK: usize = 3;

/// Maps a bin number back to its value. When `1 / quantization` is an
/// integer the division form gives the correctly rounded decimal
/// (bin 31 at 0.01 is exactly the double nearest 0.31).
fn bin_value(bin: i64, quantization: f64) -> f64 {
    let inv = 1.0 / quantization;
    let inv_round = inv.round();
    if inv_round >= 1.0 && (inv - inv_round).abs() <= 1e-9 * inv_round {
        bin as f64 / inv_round
    } else {
        bin as f64 * quantization
    }
}

/// Picks the threshold for one profile.
///
/// Scores are rounded to the nearest multiple of `quantization` and
/// histogrammed. Bins rank by frequency, ties toward the higher value; the
/// value of the bin at rank 3 is returned, or of the last-ranked bin when
/// fewer than three bins exist.
pub fn select_threshold(scores: &[f64], quantization: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::Empty { what: "scores" });
    }
    check_finite_vec(scores, "scores")?;
    if !(quantization.is_finite() && quantization > 0.0) {
        return Err(Error::field("quantization", "must be positive"));
    }

    let mut histogram: HashMap<i64, usize> = HashMap::new();
    for &s in scores {
        *histogram
            .entry((s / quantization).round() as i64)
            .or_default() += 1;
    }
    let mut bins: Vec<(i64, usize)> = histogram.into_iter().collect();
    bins.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(b.0.cmp(&a.0)));

    let rank = THRESHOLD_RANK.min(bins.len());
    Ok(bin_value(bins[rank - 1].0, quantization))
}

/// `marks[i] = scores[i] > threshold`.
pub fn mark(scores: &[f64], threshold: f64) -> Result<Vec<bool>> {
    check_finite_vec(scores, "scores")?;
    if threshold.is_nan() {
        return Err(Error::NonFinite {
            what: "threshold".to_owned(),
        });
    }
    Ok(scores.iter().map(|&s| s > threshold).collect())
}

/// Merges marked runs into anchors.
///
/// Two runs join when the unmarked gap between them is at most `max_gap`
/// frames. Each merged region `[first, last]` spans
/// `[first * stride, (last + 1) * stride)` and its score is the mean over
/// every frame in the region, gap frames included.
pub fn extract_anchors(
    marks: &[bool],
    scores: &[f64],
    stride_s: f64,
    max_gap: usize,
) -> Result<Vec<SpanAnchor>> {
    if marks.len() != scores.len() {
        return Err(Error::LengthMismatch {
            what: "marks",
            left: marks.len(),
            right: scores.len(),
        });
    }
    if !(stride_s.is_finite() && stride_s > 0.0) {
        return Err(Error::field("stride_s", "must be positive"));
    }
    check_finite_vec(scores, "scores")?;

    let mut regions: Vec<(usize, usize)> = Vec::new();
    for (i, _) in marks.iter().enumerate().filter(|(_, &m)| m) {
        match regions.last_mut() {
            Some((_, last)) if i - *last - 1 <= max_gap => *last = i,
            _ => regions.push((i, i)),
        }
    }

    regions
        .into_iter()
        .map(|(first, last)| {
            let region = &scores[first..=last];
            let mean = region.iter().sum::<f64>() / region.len() as f64;
            SpanAnchor::new(
                first as f64 * stride_s,
                (last + 1) as f64 * stride_s,
                mean.clamp(-1.0, 1.0),
            )
        })
        .collect()
}
