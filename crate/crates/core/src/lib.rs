//! Moment retrieval and highlight detection from frame-description
//! similarity.
//!
//! The pipeline scores every sampled frame of a video against a query and
//! its rewrites ([`similarity`]), picks an adaptive per-profile threshold and
//! turns runs of high-scoring frames into span anchors ([`anchors`]), and
//! emits training-free moment and highlight predictions from those anchors
//! ([`predict`]). [`metrics`] evaluates predictions with R1@IoU, mAP over an
//! IoU grid, highlight mAP and HIT@1. [`losses`] holds the span and highlight
//! training losses with analytic gradients, and [`io`] reads and writes every
//! on-disk format.
//!
//! ```
//! use mrhd::anchors::{extract_anchors, mark, select_threshold};
//!
//! let scores = [0.2, 0.2, 0.1, 0.8, 0.9, 0.1, 0.85, 0.2, 0.3, 0.3, 0.2, 0.1];
//! // bins by frequency: 0.2 (4), 0.1 (3), 0.3 (2), ...
//! let threshold = select_threshold(&scores, 0.01).unwrap();
//! assert_eq!(threshold, 0.3);
//! let marks = mark(&scores, threshold).unwrap();
//! let anchors = extract_anchors(&marks, &scores, 2.0, 5).unwrap();
//! assert_eq!(anchors.len(), 1);
//! assert_eq!((anchors[0].start_s(), anchors[0].end_s()), (6.0, 14.0));
//! ```

pub mod anchors;
pub mod error;
pub mod io;
pub mod losses;
pub mod metrics;
pub mod predict;
pub mod similarity;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    FrameRecord, GroundTruth, LossWeights, MomentPrediction, Qid, QueryBundle, QueryPrediction,
    Rewrite, SaliencyScale, SimilarityProfile, SpanAnchor, VideoFeatureSet,
};

// The guide's code listings compile and run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/similarity.md")]
    mod similarity {}
    #[doc = include_str!("../../../book/src/anchors.md")]
    mod anchors {}
    #[doc = include_str!("../../../book/src/zero_shot.md")]
    mod zero_shot {}
    #[doc = include_str!("../../../book/src/losses.md")]
    mod losses {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
}
