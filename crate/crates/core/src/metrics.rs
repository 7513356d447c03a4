//! Moment retrieval and highlight detection metrics.
//!
//! Moment retrieval: R1@IoU and mean average precision over a grid of IoU
//! thresholds. Highlight detection: mAP and HIT@1 over clips whose saliency
//! reaches the "very good" level.
//!
//! Average precision is the exact area under the stepwise precision-recall
//! curve, `sum_k P(k) * (R(k) - R(k-1))`, with no interpolation. Predictions
//! match ground-truth windows greedily in rank order: each prediction takes
//! the still-unmatched window of highest IoU at or above the threshold
//! (earliest window on ties).

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::losses::interval_iou;
use crate::types::{
    rank_order, GroundTruth, MomentPrediction, Qid, QueryPrediction, SaliencyScale,
};

/// `0.5, 0.55, ..., 0.95`.
pub fn default_iou_grid() -> Vec<f64> {
    (0..10).map(|i| f64::from(50 + 5 * i) / 100.0).collect()
}

/// Area under the stepwise PR curve for a ranked hit sequence.
fn area_under_pr(hits: impl IntoIterator<Item = bool>, n_relevant: usize) -> f64 {
    if n_relevant == 0 {
        return 0.0;
    }
    let (mut tp, mut prev_recall, mut ap) = (0usize, 0.0, 0.0);
    for (k, hit) in hits.into_iter().enumerate() {
        if hit {
            tp += 1;
            let precision = tp as f64 / (k + 1) as f64;
            let recall = tp as f64 / n_relevant as f64;
            ap += precision * (recall - prev_recall);
            prev_recall = recall;
        }
    }
    ap
}

/// Which ranked predictions are true positives under greedy matching.
fn greedy_hits(ranked: &[(f64, f64)], gt_windows: &[(f64, f64)], iou_threshold: f64) -> Vec<bool> {
    let mut taken = vec![false; gt_windows.len()];
    ranked
        .iter()
        .map(|&pred| {
            let mut best: Option<(usize, f64)> = None;
            for (j, &gt) in gt_windows.iter().enumerate() {
                if taken[j] {
                    continue;
                }
                let iou = interval_iou(pred, gt);
                if iou >= iou_threshold && best.is_none_or(|(_, b)| iou > b) {
                    best = Some((j, iou));
                }
            }
            match best {
                Some((j, _)) => {
                    taken[j] = true;
                    true
                }
                None => false,
            }
        })
        .collect()
}

/// AP of one ranked prediction list against one query's windows. Returns 0
/// when there are no ground-truth windows.
pub fn average_precision(
    ranked: &[(f64, f64)],
    gt_windows: &[(f64, f64)],
    iou_threshold: f64,
) -> f64 {
    area_under_pr(
        greedy_hits(ranked, gt_windows, iou_threshold),
        gt_windows.len(),
    )
}

fn index_ground_truth(gts: &[GroundTruth]) -> Result<BTreeMap<&Qid, &GroundTruth>> {
    let mut map = BTreeMap::new();
    for gt in gts {
        if map.insert(gt.qid(), gt).is_some() {
            return Err(Error::field(
                "qid",
                format!("ground truth for {} appears twice", gt.qid()),
            ));
        }
    }
    Ok(map)
}

fn index_predictions<'a>(
    preds: &'a [QueryPrediction],
    gts: &BTreeMap<&Qid, &GroundTruth>,
) -> Result<HashMap<&'a Qid, &'a QueryPrediction>> {
    let mut map = HashMap::new();
    for p in preds {
        if !gts.contains_key(&p.qid) {
            return Err(Error::UnknownQuery {
                qid: p.qid.to_string(),
            });
        }
        if map.insert(&p.qid, p).is_some() {
            return Err(Error::field(
                "qid",
                format!("predictions for {} appear twice", p.qid),
            ));
        }
    }
    Ok(map)
}

fn ranked_windows(pred: Option<&&QueryPrediction>) -> Vec<(f64, f64)> {
    let mut moments: Vec<MomentPrediction> = pred.map(|p| p.moments.clone()).unwrap_or_default();
    moments.sort_by(rank_order);
    moments.iter().map(MomentPrediction::window).collect()
}

/// A metric averaged over queries, with the queries left out.
#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub value: f64,
    /// Queries without ground-truth windows (or without relevant clips).
    pub excluded: Vec<Qid>,
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Fraction of queries whose top-ranked moment reaches `iou_threshold`
/// against at least one ground-truth window. Queries without a prediction
/// count as misses.
pub fn recall_at_1(
    preds: &[QueryPrediction],
    gts: &[GroundTruth],
    iou_threshold: f64,
) -> Result<Scored> {
    let gt_map = index_ground_truth(gts)?;
    let pred_map = index_predictions(preds, &gt_map)?;
    let mut excluded = Vec::new();
    let mut hits = Vec::new();
    for (qid, gt) in &gt_map {
        if gt.relevant_windows().is_empty() {
            excluded.push((*qid).clone());
            continue;
        }
        let ranked = ranked_windows(pred_map.get(qid));
        let hit = ranked.first().is_some_and(|&top| {
            gt.relevant_windows()
                .iter()
                .any(|&w| interval_iou(top, w) >= iou_threshold)
        });
        hits.push(if hit { 1.0 } else { 0.0 });
    }
    Ok(Scored {
        value: mean(&hits),
        excluded,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    /// `(iou_threshold, mAP)` for each grid point.
    pub per_threshold: Vec<(f64, f64)>,
    pub average: f64,
    pub excluded: Vec<Qid>,
}

impl GridMap {
    pub fn at(&self, threshold: f64) -> Option<f64> {
        self.per_threshold
            .iter()
            .find(|(t, _)| (t - threshold).abs() < 1e-9)
            .map(|(_, m)| *m)
    }
}

/// Mean over queries of AP at every IoU threshold in `grid`, plus the
/// mean over the grid.
pub fn map_over_grid(
    preds: &[QueryPrediction],
    gts: &[GroundTruth],
    grid: &[f64],
) -> Result<GridMap> {
    if grid.is_empty() {
        return Err(Error::Empty { what: "IoU grid" });
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::field(
            "grid",
            "thresholds must be strictly ascending",
        ));
    }
    let gt_map = index_ground_truth(gts)?;
    let pred_map = index_predictions(preds, &gt_map)?;
    let mut excluded = Vec::new();
    // (ranked prediction windows, ground-truth windows)
    let mut per_query = Vec::new();
    for (qid, gt) in &gt_map {
        if gt.relevant_windows().is_empty() {
            excluded.push((*qid).clone());
        } else {
            per_query.push((ranked_windows(pred_map.get(qid)), gt.relevant_windows()));
        }
    }
    let per_threshold: Vec<(f64, f64)> = grid
        .iter()
        .map(|&t| {
            let aps: Vec<f64> = per_query
                .iter()
                .map(|(ranked, windows)| average_precision(ranked, windows, t))
                .collect();
            (t, mean(&aps))
        })
        .collect();
    let average = mean(&per_threshold.iter().map(|(_, m)| *m).collect::<Vec<_>>());
    Ok(GridMap {
        per_threshold,
        average,
        excluded,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HighlightScores {
    pub map: f64,
    pub hit1: f64,
    pub excluded: Vec<Qid>,
}

/// Clip indices ranked by score, highest first, lower index on ties.
pub fn rank_clips(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// AP and top-1 hit for one video's clip scores against binary relevance.
pub fn clip_ap_and_hit(scores: &[f64], relevant: &[bool]) -> (f64, bool) {
    let order = rank_clips(scores);
    let n_relevant = relevant.iter().filter(|r| **r).count();
    let ap = area_under_pr(order.iter().map(|&i| relevant[i]), n_relevant);
    let hit = order.first().is_some_and(|&i| relevant[i]);
    (ap, hit)
}

/// Highlight mAP and HIT@1. A clip is relevant when its label reaches
/// `scale.very_good_cut`. Queries without saliency annotations or without a
/// relevant clip are excluded; annotated queries without predicted scores
/// count as zero.
pub fn hd_map_and_hit1(
    preds: &[QueryPrediction],
    gts: &[GroundTruth],
    scale: SaliencyScale,
) -> Result<HighlightScores> {
    let gt_map = index_ground_truth(gts)?;
    let pred_map = index_predictions(preds, &gt_map)?;
    let mut excluded = Vec::new();
    let mut aps = Vec::new();
    let mut hits = Vec::new();
    for (qid, gt) in &gt_map {
        let scores: &[f64] = pred_map
            .get(qid)
            .map(|p| p.saliency.as_slice())
            .unwrap_or(&[]);
        let n_clips = if scores.is_empty() {
            // without predictions only the annotated clips matter
            match (gt.relevant_clip_ids(), gt.saliency_scores()) {
                (Some(ids), _) => ids.iter().max().map_or(0, |m| m + 1),
                (None, Some(s)) => s.len(),
                (None, None) => 0,
            }
        } else {
            scores.len()
        };
        let Some(labels) = gt.clip_labels(n_clips)? else {
            excluded.push((*qid).clone());
            continue;
        };
        if let Some(bad) = labels.iter().find(|&&l| l > scale.max_level) {
            return Err(Error::field(
                "saliency_scores",
                format!(
                    "label {bad} for query {qid} exceeds max level {}",
                    scale.max_level
                ),
            ));
        }
        let relevant: Vec<bool> = labels.iter().map(|&l| l >= scale.very_good_cut).collect();
        if !relevant.iter().any(|r| *r) {
            excluded.push((*qid).clone());
            continue;
        }
        if scores.is_empty() {
            aps.push(0.0);
            hits.push(0.0);
            continue;
        }
        let (ap, hit) = clip_ap_and_hit(scores, &relevant);
        aps.push(ap);
        hits.push(if hit { 1.0 } else { 0.0 });
    }
    Ok(HighlightScores {
        map: mean(&aps),
        hit1: mean(&hits),
        excluded,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub scale: SaliencyScale,
    pub iou_grid: Vec<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            scale: SaliencyScale::default(),
            iou_grid: default_iou_grid(),
        }
    }
}

/// The headline numbers, serialized under their canonical key names.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    #[serde(rename = "mr_r1_0.5")]
    pub mr_r1_0_5: f64,
    #[serde(rename = "mr_r1_0.7")]
    pub mr_r1_0_7: f64,
    #[serde(rename = "mr_map_0.5")]
    pub mr_map_0_5: f64,
    #[serde(rename = "mr_map_0.75")]
    pub mr_map_0_75: f64,
    pub mr_map_avg: f64,
    pub hd_map: f64,
    pub hd_hit1: f64,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub mr_queries: usize,
    pub mr_excluded: Vec<Qid>,
    pub hd_queries: usize,
    pub hd_excluded: Vec<Qid>,
}

impl MetricsReport {
    /// The seven metrics as `(key, value)` pairs in canonical order.
    pub fn entries(&self) -> [(&'static str, f64); 7] {
        [
            ("mr_r1_0.5", self.mr_r1_0_5),
            ("mr_r1_0.7", self.mr_r1_0_7),
            ("mr_map_0.5", self.mr_map_0_5),
            ("mr_map_0.75", self.mr_map_0_75),
            ("mr_map_avg", self.mr_map_avg),
            ("hd_map", self.hd_map),
            ("hd_hit1", self.hd_hit1),
        ]
    }

    /// Flat `key value` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            out.push_str(&format!("{k} {v}\n"));
        }
        out.push_str(&format!(
            "# mr queries {} (excluded {}), hd queries {} (excluded {})\n",
            self.diagnostics.mr_queries,
            self.diagnostics.mr_excluded.len(),
            self.diagnostics.hd_queries,
            self.diagnostics.hd_excluded.len()
        ));
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Full report. The grid must contain 0.5 and 0.75 for the two fixed mAP
/// columns; missing points report 0.
pub fn evaluate(
    preds: &[QueryPrediction],
    gts: &[GroundTruth],
    config: &EvalConfig,
) -> Result<MetricsReport> {
    let r5 = recall_at_1(preds, gts, 0.5)?;
    let r7 = recall_at_1(preds, gts, 0.7)?;
    let grid = map_over_grid(preds, gts, &config.iou_grid)?;
    let hd = hd_map_and_hit1(preds, gts, config.scale)?;
    Ok(MetricsReport {
        mr_r1_0_5: r5.value,
        mr_r1_0_7: r7.value,
        mr_map_0_5: grid.at(0.5).unwrap_or(0.0),
        mr_map_0_75: grid.at(0.75).unwrap_or(0.0),
        mr_map_avg: grid.average,
        hd_map: hd.map,
        hd_hit1: hd.hit1,
        diagnostics: Diagnostics {
            mr_queries: gts.len() - grid.excluded.len(),
            mr_excluded: grid.excluded,
            hd_queries: gts.len() - hd.excluded.len(),
            hd_excluded: hd.excluded,
        },
    })
}
