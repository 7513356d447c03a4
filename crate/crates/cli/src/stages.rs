//! The pipeline stages over in-memory collections. Per-pair work runs on the
//! current rayon pool; outputs are always sorted by `(qid, video_id)` so
//! scheduling never shows up in results.

use std::collections::{BTreeMap, HashMap};

use mrhd::anchors::{extract_anchors, mark, select_threshold};
use mrhd::io::AnchorSet;
use mrhd::predict::{predict_highlights, predict_moments_with, ConfidenceRule};
use mrhd::similarity::{score_profile, ProfileConfig};
use mrhd::{Error, Qid, QueryBundle, QueryPrediction, Result, SimilarityProfile, VideoFeatureSet};
use rayon::prelude::*;

/// Pairs every query with its pinned video, or with every video when the
/// query names none.
pub fn pair<'a>(
    videos: &'a [VideoFeatureSet],
    queries: &'a [QueryBundle],
) -> Result<Vec<(&'a VideoFeatureSet, &'a QueryBundle)>> {
    let by_id: HashMap<&str, &VideoFeatureSet> = videos.iter().map(|v| (v.video_id(), v)).collect();
    if by_id.len() != videos.len() {
        return Err(Error::InvalidField {
            field: "video_id".into(),
            reason: "two feature files share a video id".into(),
        });
    }
    let mut pairs = Vec::new();
    for q in queries {
        match q.video_id() {
            Some(id) => {
                let v = by_id.get(id).ok_or_else(|| Error::InvalidField {
                    field: "video_id".into(),
                    reason: format!("query {} refers to unknown video {id:?}", q.qid()),
                })?;
                pairs.push((*v, q));
            }
            None => pairs.extend(videos.iter().map(|v| (v, q))),
        }
    }
    pairs.sort_by(|a, b| (a.1.qid(), a.0.video_id()).cmp(&(b.1.qid(), b.0.video_id())));
    Ok(pairs)
}

/// Which scores share one threshold histogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum ThresholdScope {
    /// One histogram per (query, video) profile.
    #[default]
    Pair,
    /// One histogram per video, pooled over every query scored against it.
    Video,
}

/// A threshold for each `(video_id, scores)` entry, in input order.
fn thresholds(
    entries: &[(&str, &[f64])],
    scope: ThresholdScope,
    quantization: f64,
) -> Result<Vec<f64>> {
    match scope {
        ThresholdScope::Pair => entries
            .par_iter()
            .map(|(_, scores)| select_threshold(scores, quantization))
            .collect(),
        ThresholdScope::Video => {
            let mut pooled: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
            for (video, scores) in entries {
                pooled.entry(video).or_default().extend_from_slice(scores);
            }
            let per_video = pooled
                .into_iter()
                .map(|(video, scores)| Ok((video, select_threshold(&scores, quantization)?)))
                .collect::<Result<HashMap<&str, f64>>>()?;
            Ok(entries.iter().map(|(video, _)| per_video[video]).collect())
        }
    }
}

pub fn score_pairs(
    videos: &[VideoFeatureSet],
    queries: &[QueryBundle],
    config: ProfileConfig,
    quantization: f64,
    scope: ThresholdScope,
) -> Result<Vec<SimilarityProfile>> {
    let pairs = pair(videos, queries)?;
    let scored = pairs
        .par_iter()
        .map(|(v, q)| score_profile(v, q, config))
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let entries: Vec<(&str, &[f64])> = pairs
        .iter()
        .zip(&scored)
        .map(|((v, _), s)| (v.video_id(), s.as_slice()))
        .collect();
    let cut = thresholds(&entries, scope, quantization)?;
    pairs
        .into_iter()
        .zip(scored)
        .zip(cut)
        .map(|(((v, q), scores), threshold)| {
            SimilarityProfile::new(
                v.video_id(),
                q.qid().clone(),
                v.clip_stride_s(),
                v.duration_s(),
                scores,
                threshold,
            )
        })
        .collect()
}

fn sort_key(p: &SimilarityProfile) -> (&Qid, &str) {
    (p.qid(), p.video_id())
}

/// Re-derives the thresholds at `quantization` and extracts anchors.
pub fn anchor_sets(
    profiles: &[SimilarityProfile],
    quantization: f64,
    scope: ThresholdScope,
    max_gap: usize,
) -> Result<Vec<AnchorSet>> {
    let mut sorted: Vec<&SimilarityProfile> = profiles.iter().collect();
    sorted.sort_by(|a, b| sort_key(a).cmp(&sort_key(b)));
    let entries: Vec<(&str, &[f64])> = sorted.iter().map(|p| (p.video_id(), p.scores())).collect();
    let cut = thresholds(&entries, scope, quantization)?;
    sorted
        .par_iter()
        .zip(cut)
        .map(|(p, threshold)| {
            let marks = mark(p.scores(), threshold)?;
            let anchors = extract_anchors(&marks, p.scores(), p.clip_stride_s(), max_gap)?;
            for a in &anchors {
                a.check_within(p.duration_s(), p.clip_stride_s())?;
            }
            Ok(AnchorSet {
                qid: p.qid().clone(),
                video_id: p.video_id().to_owned(),
                clip_stride_s: p.clip_stride_s(),
                duration_s: p.duration_s(),
                threshold,
                anchors,
            })
        })
        .collect()
}

/// One prediction per query: ranked anchors as moments and rescaled
/// profile scores as highlights.
pub fn predictions(
    sets: &[AnchorSet],
    profiles: &[SimilarityProfile],
    top_k: usize,
    rule: ConfidenceRule,
) -> Result<Vec<QueryPrediction>> {
    let by_pair: HashMap<(&Qid, &str), &SimilarityProfile> =
        profiles.iter().map(|p| (sort_key(p), p)).collect();
    let mut seen: BTreeMap<&Qid, &str> = BTreeMap::new();
    for s in sets {
        if let Some(other) = seen.insert(&s.qid, &s.video_id) {
            return Err(Error::InvalidField {
                field: "qid".into(),
                reason: format!(
                    "query {} has anchors for videos {other:?} and {:?}",
                    s.qid, s.video_id
                ),
            });
        }
    }
    let mut sorted: Vec<&AnchorSet> = sets.iter().collect();
    sorted.sort_by(|a, b| a.qid.cmp(&b.qid));
    sorted
        .par_iter()
        .map(|s| {
            let profile =
                by_pair
                    .get(&(&s.qid, s.video_id.as_str()))
                    .ok_or_else(|| Error::InvalidField {
                        field: "profiles".into(),
                        reason: format!("no profile for query {} on video {:?}", s.qid, s.video_id),
                    })?;
            Ok(QueryPrediction {
                qid: s.qid.clone(),
                moments: predict_moments_with(
                    &s.anchors,
                    profile.scores(),
                    s.clip_stride_s,
                    rule,
                    top_k,
                )?,
                saliency: predict_highlights(profile),
            })
        })
        .collect()
}
