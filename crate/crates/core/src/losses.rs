//! Training losses for span prediction and highlight scoring, each paired
//! with its analytic subgradient.
//!
//! Nothing here trains anything. The functions are pure so an external
//! training loop can call them, and [`check_gradients`] verifies every
//! analytic gradient against central finite differences.

use crate::error::{Error, Result};
use crate::types::LossWeights;

/// Probabilities are clamped into `[BCE_EPS, 1 - BCE_EPS]` before the log.
pub const BCE_EPS: f64 = 1e-7;

/// A span in normalized time: center and width as fractions of the video
/// duration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Span1D {
    center: f64,
    width: f64,
}

impl Span1D {
    pub fn new(center: f64, width: f64) -> Result<Self> {
        if !center.is_finite() || !(0.0..=1.0).contains(&center) {
            return Err(Error::field(
                "center",
                format!("{center} is outside [0, 1]"),
            ));
        }
        if !width.is_finite() || width <= 0.0 || width > 1.0 {
            return Err(Error::field("width", format!("{width} is outside (0, 1]")));
        }
        Ok(Self { center, width })
    }

    /// Builds a span from `[start, end]` on an axis of length `duration`.
    pub fn from_bounds(start: f64, end: f64, duration: f64) -> Result<Self> {
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::field("duration", "must be positive"));
        }
        Self::new((start + end) / 2.0 / duration, (end - start) / duration)
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn start(&self) -> f64 {
        self.center - self.width / 2.0
    }

    pub fn end(&self) -> f64 {
        self.center + self.width / 2.0
    }
}

/// Temporal IoU of two closed intervals `(start, end)`. Zero-length unions
/// give 0.
pub fn interval_iou(a: (f64, f64), b: (f64, f64)) -> f64 {
    let inter = (a.1.min(b.1) - a.0.max(b.0)).max(0.0);
    let union = (a.1 - a.0) + (b.1 - b.0) - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

pub fn temporal_iou(a: Span1D, b: Span1D) -> f64 {
    interval_iou((a.start(), a.end()), (b.start(), b.end()))
}

/// `1 - gIoU`, with the loss value and its partials with respect to the
/// first interval's endpoints.
fn giou_loss_parts(a1: f64, a2: f64, b1: f64, b2: f64) -> (f64, f64, f64) {
    let (wa, wb) = (a2 - a1, b2 - b1);
    let overlap = a2.min(b2) - a1.max(b1);
    let encl = a2.max(b2) - a1.min(b1);
    if overlap > 0.0 {
        let inter = overlap;
        let union = wa + wb - inter;
        let d_inter_a1 = if a1 > b1 { -1.0 } else { 0.0 };
        let d_inter_a2 = if a2 < b2 { 1.0 } else { 0.0 };
        let d_union_a1 = -1.0 - d_inter_a1;
        let d_union_a2 = 1.0 - d_inter_a2;
        let u2 = union * union;
        let loss = 1.0 - inter / union;
        (
            loss,
            -(d_inter_a1 * union - inter * d_union_a1) / u2,
            -(d_inter_a2 * union - inter * d_union_a2) / u2,
        )
    } else {
        // disjoint or touching: IoU is 0 and the exterior of the enclosing
        // interval is exactly the gap between the two
        let gap = -overlap;
        let (d_gap_a1, d_gap_a2, d_encl_a1, d_encl_a2) = if a2 <= b1 {
            (0.0, -1.0, -1.0, 0.0)
        } else {
            (1.0, 0.0, 0.0, 1.0)
        };
        let e2 = encl * encl;
        (
            1.0 + gap / encl,
            (d_gap_a1 * encl - gap * d_encl_a1) / e2,
            (d_gap_a2 * encl - gap * d_encl_a2) / e2,
        )
    }
}

/// `1 - gIoU(a, b)`, in `[0, 2)`.
pub fn giou_loss_1d(a: Span1D, b: Span1D) -> f64 {
    giou_loss_parts(a.start(), a.end(), b.start(), b.end()).0
}

fn giou_loss_grad_cw(pred: Span1D, gt: Span1D) -> (f64, [f64; 2]) {
    let (loss, da1, da2) = giou_loss_parts(pred.start(), pred.end(), gt.start(), gt.end());
    // start = c - w/2, end = c + w/2
    (loss, [da1 + da2, (da2 - da1) / 2.0])
}

/// `lambda_l1 * |pred - gt|_1 + lambda_iou * (1 - gIoU)` over
/// (center, width).
pub fn moment_loss(pred: Span1D, gt: Span1D, w: &LossWeights) -> f64 {
    let l1 = (pred.center - gt.center).abs() + (pred.width - gt.width).abs();
    w.lambda_l1 * l1 + w.lambda_iou * giou_loss_1d(pred, gt)
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Subgradient of [`moment_loss`] with respect to the predicted
/// `[center, width]`. Kinks take the zero subgradient for the L1 part.
pub fn moment_loss_grad(pred: Span1D, gt: Span1D, w: &LossWeights) -> [f64; 2] {
    let (_, g) = giou_loss_grad_cw(pred, gt);
    [
        w.lambda_l1 * sign(pred.center - gt.center) + w.lambda_iou * g[0],
        w.lambda_l1 * sign(pred.width - gt.width) + w.lambda_iou * g[1],
    ]
}

fn check_bce_inputs(p: &[f64], z: &[bool]) -> Result<()> {
    if p.len() != z.len() {
        return Err(Error::LengthMismatch {
            what: "probabilities",
            left: p.len(),
            right: z.len(),
        });
    }
    if let Some(bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::field("p", format!("{bad} is outside [0, 1]")));
    }
    Ok(())
}

/// `-sum(w_p * z * ln p + (1 - z) * ln(1 - p))` with `p` clamped by
/// [`BCE_EPS`]. Inputs outside `[0, 1]` are rejected.
pub fn weighted_bce(p: &[f64], z: &[bool], w_p: f64) -> Result<f64> {
    check_bce_inputs(p, z)?;
    Ok(-p
        .iter()
        .zip(z)
        .map(|(&pi, &zi)| {
            let pi = pi.clamp(BCE_EPS, 1.0 - BCE_EPS);
            if zi {
                w_p * pi.ln()
            } else {
                (1.0 - pi).ln()
            }
        })
        .sum::<f64>())
}

/// Gradient of [`weighted_bce`] with respect to each `p_i`; zero where the
/// clamp is active.
pub fn weighted_bce_grad(p: &[f64], z: &[bool], w_p: f64) -> Result<Vec<f64>> {
    check_bce_inputs(p, z)?;
    Ok(p.iter()
        .zip(z)
        .map(|(&pi, &zi)| {
            if !(BCE_EPS..=1.0 - BCE_EPS).contains(&pi) {
                0.0
            } else if zi {
                -w_p / pi
            } else {
                1.0 / (1.0 - pi)
            }
        })
        .collect())
}

/// Margin ranking loss over (high, low) clips within a moment and
/// (inside, outside) clips across its boundary.
pub fn highlight_hinge(h_high: f64, h_low: f64, h_in: f64, h_out: f64, delta: f64) -> f64 {
    (delta + h_low - h_high).max(0.0) + (delta + h_out - h_in).max(0.0)
}

/// Subgradient of [`highlight_hinge`] in argument order
/// `[h_high, h_low, h_in, h_out]`.
pub fn highlight_hinge_grad(
    h_high: f64,
    h_low: f64,
    h_in: f64,
    h_out: f64,
    delta: f64,
) -> [f64; 4] {
    let first = if delta + h_low - h_high > 0.0 {
        1.0
    } else {
        0.0
    };
    let second = if delta + h_out - h_in > 0.0 { 1.0 } else { 0.0 };
    [-first, first, -second, second]
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossParts {
    pub moment: f64,
    pub cls: f64,
    pub hinge: f64,
}

pub fn total_loss(parts: LossParts, w: &LossWeights) -> f64 {
    parts.moment + w.lambda_cls * parts.cls + w.lambda_h * parts.hinge
}

/// Step used by the central finite differences.
pub const FD_STEP: f64 = 1e-5;
/// Largest accepted relative deviation between analytic and numeric
/// gradients.
pub const GRAD_TOLERANCE: f64 = 1e-4;
/// Sampled points keep at least this distance from every kink.
const KINK_MARGIN: f64 = 1e-3;

/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

fn central_difference(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    (f(x + FD_STEP) - f(x - FD_STEP)) / (2.0 * FD_STEP)
}

/// Worst relative deviation seen for each loss.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GradientReport {
    pub trials: usize,
    pub moment: f64,
    pub bce: f64,
    pub hinge: f64,
}

impl GradientReport {
    pub fn max_deviation(&self) -> f64 {
        self.moment.max(self.bce).max(self.hinge)
    }

    pub fn passed(&self) -> bool {
        self.max_deviation() <= GRAD_TOLERANCE
    }
}

fn far_from_kinks(values: &[f64]) -> bool {
    values.iter().all(|v| v.abs() > KINK_MARGIN)
}

fn sample_span(uniform: &mut impl FnMut() -> f64) -> (f64, f64) {
    (0.2 + 0.6 * uniform(), 0.05 + 0.45 * uniform())
}

/// Compares every analytic gradient with central differences at `trials`
/// random non-kink points per loss. `uniform` must yield samples in
/// `[0, 1)`; the caller owns the seed.
pub fn check_gradients(trials: usize, uniform: &mut impl FnMut() -> f64) -> GradientReport {
    let w = LossWeights::default();
    let mut report = GradientReport {
        trials,
        ..Default::default()
    };

    let mut done = 0;
    while done < trials {
        let (pc, pw) = sample_span(uniform);
        let (gc, gw) = sample_span(uniform);
        let (p1, p2, g1, g2) = (pc - pw / 2.0, pc + pw / 2.0, gc - gw / 2.0, gc + gw / 2.0);
        if !far_from_kinks(&[pc - gc, pw - gw, p1 - g1, p2 - g2, p2 - g1, p1 - g2]) {
            continue;
        }
        let gt = Span1D {
            center: gc,
            width: gw,
        };
        let pred = Span1D {
            center: pc,
            width: pw,
        };
        let analytic = moment_loss_grad(pred, gt, &w);
        let num_c = central_difference(
            |c| {
                moment_loss(
                    Span1D {
                        center: c,
                        width: pw,
                    },
                    gt,
                    &w,
                )
            },
            pc,
        );
        let num_w = central_difference(
            |x| {
                moment_loss(
                    Span1D {
                        center: pc,
                        width: x,
                    },
                    gt,
                    &w,
                )
            },
            pw,
        );
        report.moment = report
            .moment
            .max(relative_error(analytic[0], num_c))
            .max(relative_error(analytic[1], num_w));
        done += 1;
    }

    for _ in 0..trials {
        let n = 1 + (uniform() * 6.0) as usize;
        let p: Vec<f64> = (0..n).map(|_| 0.05 + 0.9 * uniform()).collect();
        let z: Vec<bool> = (0..n).map(|_| uniform() < 0.5).collect();
        let analytic = weighted_bce_grad(&p, &z, w.w_p).expect("valid inputs");
        for i in 0..n {
            let numeric = central_difference(
                |x| {
                    let mut q = p.clone();
                    q[i] = x;
                    weighted_bce(&q, &z, w.w_p).expect("valid inputs")
                },
                p[i],
            );
            report.bce = report.bce.max(relative_error(analytic[i], numeric));
        }
    }

    let mut done = 0;
    while done < trials {
        let h: [f64; 4] = [uniform(), uniform(), uniform(), uniform()];
        let delta = w.delta;
        if !far_from_kinks(&[delta + h[1] - h[0], delta + h[3] - h[2]]) {
            continue;
        }
        let analytic = highlight_hinge_grad(h[0], h[1], h[2], h[3], delta);
        for i in 0..4 {
            let numeric = central_difference(
                |x| {
                    let mut q = h;
                    q[i] = x;
                    highlight_hinge(q[0], q[1], q[2], q[3], delta)
                },
                h[i],
            );
            report.hinge = report.hinge.max(relative_error(analytic[i], numeric));
        }
        done += 1;
    }

    report
}
