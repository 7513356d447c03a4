//! Cosine similarity between frame descriptions and queries, and the
//! rewrite-quality ratio.

use crate::error::{Error, Result};
use crate::types::{check_finite_vec, QueryBundle, VideoFeatureSet};

/// Profile scores are snapped to multiples of 2^-30 (about 9.3e-10).
///
/// Positive rescaling of an embedding moves a cosine only at the 1e-16
/// level, so snapping makes every downstream stage see bit-identical scores
/// for rescaled inputs. The grid is far finer than the 0.01 threshold bins.
pub const SCORE_RESOLUTION: f64 = 1.0 / (1u64 << 30) as f64;

/// How scores against several query embeddings are combined per frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregation {
    #[default]
    Mean,
    Max,
}

impl std::str::FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Aggregation::Mean),
            "max" => Ok(Aggregation::Max),
            other => Err(Error::field(
                "aggregation",
                format!("unknown value {other:?}"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProfileConfig {
    pub aggregation: Aggregation,
    /// Whether the original query embedding joins the rewrites in the pool.
    pub include_original: bool,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self {
            aggregation: Aggregation::Mean,
            include_original: true,
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Cosine similarity, clamped to `[-1, 1]`.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    check_finite_vec(a, "first vector")?;
    check_finite_vec(b, "second vector")?;
    let na = norm(a);
    if na == 0.0 {
        return Err(Error::ZeroVector { which: "first" });
    }
    let nb = norm(b);
    if nb == 0.0 {
        return Err(Error::ZeroVector { which: "second" });
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

fn snap(score: f64) -> f64 {
    (score / SCORE_RESOLUTION).round() * SCORE_RESOLUTION
}

/// Per-frame similarity between a video and a query bundle.
///
/// Entry `i` aggregates the cosine between frame `i` and every usable
/// (nonzero) embedding in the pool: the rewrites, plus the original query
/// when `include_original` is set.
pub fn score_profile(
    video: &VideoFeatureSet,
    query: &QueryBundle,
    config: ProfileConfig,
) -> Result<Vec<f64>> {
    if video.is_empty() {
        return Err(Error::Empty { what: "video" });
    }
    let mut pool: Vec<&[f64]> = Vec::with_capacity(query.rewrites().len() + 1);
    if config.include_original {
        pool.push(query.original_embedding());
    }
    pool.extend(query.rewrites().iter().map(|r| r.embedding()));
    pool.retain(|e| e.iter().any(|&x| x != 0.0));
    if pool.is_empty() {
        return Err(Error::Empty {
            what: "query embedding pool",
        });
    }

    video
        .frames()
        .iter()
        .map(|frame| {
            let mut acc = match config.aggregation {
                Aggregation::Mean => 0.0,
                Aggregation::Max => f64::NEG_INFINITY,
            };
            for e in &pool {
                let c = cosine(frame.embedding(), e)?;
                acc = match config.aggregation {
                    Aggregation::Mean => acc + c,
                    Aggregation::Max => acc.max(c),
                };
            }
            if config.aggregation == Aggregation::Mean {
                acc /= pool.len() as f64;
            }
            Ok(snap(acc.clamp(-1.0, 1.0)))
        })
        .collect()
}

/// `min(1, P(paraphrase | q) / P(q | q))` from log-probabilities.
pub fn rewrite_quality(logp_paraphrase_given_q: f64, logp_q_given_q: f64) -> Result<f64> {
    if !logp_paraphrase_given_q.is_finite() || !logp_q_given_q.is_finite() {
        return Err(Error::NonFinite {
            what: "log-probability".to_owned(),
        });
    }
    Ok((logp_paraphrase_given_q - logp_q_given_q).exp().min(1.0))
}
