//! Training-side supervision for paired-box detection: ground-truth label
//! assignment for chained anchors, offset targets, and the loss stack
//! (smooth-L1 regression over both boxes of a pair, focal losses for the
//! classification and ID-verification branches) with analytic gradients.

use std::collections::HashSet;

use crate::anchors::ChainedAnchor;
use crate::error::{Error, Result};
use crate::geometry::{encode_offsets, iou, BBox, OffsetQuad};
use crate::scalar::Scalar;

pub mod gradcheck;

/// Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` before the focal loss.
pub const PROB_EPS: f64 = 1e-7;

/// Annotated boxes of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthFrame<T> {
    /// Zero-based frame index.
    pub frame: usize,
    pub boxes: Vec<BBox<T>>,
    pub identities: Vec<u64>,
    pub visibilities: Vec<T>,
}

impl<T: Scalar> GroundTruthFrame<T> {
    pub fn new(frame: usize, boxes: Vec<BBox<T>>, identities: Vec<u64>, visibilities: Vec<T>) -> Result<Self> {
        if identities.len() != boxes.len() {
            return Err(Error::LengthMismatch { expected: boxes.len(), got: identities.len() });
        }
        if visibilities.len() != boxes.len() {
            return Err(Error::LengthMismatch { expected: boxes.len(), got: visibilities.len() });
        }
        let mut seen = HashSet::with_capacity(identities.len());
        if let Some(dup) = identities.iter().find(|id| !seen.insert(**id)) {
            return Err(Error::InvalidConfig(format!("identity {dup} appears twice in frame {frame}")));
        }
        Ok(Self { frame, boxes, identities, visibilities })
    }

    pub fn empty(frame: usize) -> Self {
        Self { frame, boxes: Vec::new(), identities: Vec::new(), visibilities: Vec::new() }
    }

    /// Frame from `(identity, box)` entries, all fully visible.
    pub fn from_entries(frame: usize, entries: impl IntoIterator<Item = (u64, BBox<T>)>) -> Result<Self> {
        let (identities, boxes): (Vec<_>, Vec<_>) = entries.into_iter().unzip();
        let visibilities = vec![T::one(); boxes.len()];
        Self::new(frame, boxes, identities, visibilities)
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn position_of(&self, identity: u64) -> Option<usize> {
        self.identities.iter().position(|&id| id == identity)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &BBox<T>)> {
        self.identities.iter().copied().zip(&self.boxes)
    }

    /// Keeps only boxes whose visibility is strictly above `min_visibility`.
    pub fn visible(&self, min_visibility: T) -> Self {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| self.visibilities[i] > min_visibility).collect();
        Self {
            frame: self.frame,
            boxes: keep.iter().map(|&i| self.boxes[i]).collect(),
            identities: keep.iter().map(|&i| self.identities[i]).collect(),
            visibilities: keep.iter().map(|&i| self.visibilities[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssignmentParams<T> {
    pub t_pos: T,
    pub t_neg: T,
    pub min_visibility: T,
}

impl<T: Scalar> Default for AssignmentParams<T> {
    fn default() -> Self {
        Self { t_pos: T::lit(0.5), t_neg: T::lit(0.4), min_visibility: T::lit(0.1) }
    }
}

impl<T: Scalar> AssignmentParams<T> {
    pub fn validate(&self) -> Result<()> {
        let ok = T::zero() <= self.t_neg && self.t_neg < self.t_pos && self.t_pos <= T::one();
        if !ok {
            return Err(Error::InvalidConfig(format!(
                "need 0 <= t_neg < t_pos <= 1, got t_neg={} t_pos={}",
                self.t_neg, self.t_pos
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights<T> {
    /// Weight of the classification focal term.
    pub alpha: T,
    /// Weight of the ID-verification focal term.
    pub beta: T,
    pub focal_gamma: T,
    pub focal_alpha: T,
    /// Divide the classification term by the positive count (at least 1).
    pub normalize_cls: bool,
}

impl<T: Scalar> Default for LossWeights<T> {
    fn default() -> Self {
        Self {
            alpha: T::one(),
            beta: T::one(),
            focal_gamma: T::lit(2.0),
            focal_alpha: T::lit(0.25),
            normalize_cls: true,
        }
    }
}

/// Supervision attached to an anchor assigned to a ground-truth target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositiveMatch<T> {
    /// Index of the matched box in frame t.
    pub gt_t: usize,
    /// Index of the same identity in frame t+1, if it is still present.
    pub gt_t1: Option<usize>,
    pub target_t: OffsetQuad<T>,
    pub target_t1: Option<OffsetQuad<T>>,
}

impl<T> PositiveMatch<T> {
    /// ID-verification label: the target appears in both frames.
    pub fn c_id(&self) -> bool {
        self.gt_t1.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnchorLabel<T> {
    Positive(PositiveMatch<T>),
    Negative,
    /// Overlap between the two thresholds; excluded from the classification loss.
    Ignore,
}

impl<T> AnchorLabel<T> {
    pub fn is_positive(&self) -> bool {
        matches!(self, AnchorLabel::Positive(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnchorLabels<T> {
    pub labels: Vec<AnchorLabel<T>>,
}

impl<T> AnchorLabels<T> {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|l| l.is_positive()).count()
    }

    pub fn negatives(&self) -> usize {
        self.labels.iter().filter(|l| matches!(l, AnchorLabel::Negative)).count()
    }

    pub fn ignored(&self) -> usize {
        self.labels.iter().filter(|l| matches!(l, AnchorLabel::Ignore)).count()
    }
}

/// Assigns classification, ID-verification and regression targets to anchors.
///
/// An anchor is positive when its best IoU against the frame-t boxes is at
/// least `t_pos`, negative below `t_neg`, and ignored in between. Every
/// ground-truth box with non-zero overlap is additionally force-matched to its
/// best anchor (ties go to the lowest anchor index). The ID label is 1 iff the
/// matched identity is also present in frame t+1.
pub fn assign_labels<T: Scalar>(
    anchors: &[ChainedAnchor<T>],
    gt_t: &GroundTruthFrame<T>,
    gt_t1: &GroundTruthFrame<T>,
    p: &AssignmentParams<T>,
) -> Result<AnchorLabels<T>> {
    if anchors.is_empty() {
        return Err(Error::EmptyInput("label assignment needs at least one anchor"));
    }
    p.validate()?;
    let anchor_boxes: Vec<BBox<T>> = anchors.iter().map(ChainedAnchor::bbox).collect();

    // best gt per anchor, ties to the lowest gt index
    let best_gt: Vec<Option<(usize, T)>> = anchor_boxes
        .iter()
        .map(|a| {
            let mut best: Option<(usize, T)> = None;
            for (j, g) in gt_t.boxes.iter().enumerate() {
                let v = iou(a, g);
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((j, v));
                }
            }
            best
        })
        .collect();

    // force-match: each gt claims its highest-IoU anchor
    let mut forced: Vec<Option<(usize, T)>> = vec![None; anchors.len()];
    for (j, g) in gt_t.boxes.iter().enumerate() {
        let mut best: Option<(usize, T)> = None;
        for (i, a) in anchor_boxes.iter().enumerate() {
            let v = iou(a, g);
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        if let Some((i, v)) = best {
            if v > T::zero() && forced[i].is_none_or(|(_, prev)| v > prev) {
                forced[i] = Some((j, v));
            }
        }
    }

    let mut labels = Vec::with_capacity(anchors.len());
    for (i, a) in anchor_boxes.iter().enumerate() {
        let matched = match (forced[i], best_gt[i]) {
            (Some((j, _)), _) => Some(j),
            (None, Some((j, v))) if v >= p.t_pos => Some(j),
            (None, Some((_, v))) if v >= p.t_neg => {
                labels.push(AnchorLabel::Ignore);
                continue;
            }
            _ => None,
        };
        let Some(j) = matched else {
            labels.push(AnchorLabel::Negative);
            continue;
        };
        let gt_t1_idx = gt_t1.position_of(gt_t.identities[j]);
        let target_t = encode_offsets(a, &gt_t.boxes[j])?;
        let target_t1 = gt_t1_idx.map(|k| encode_offsets(a, &gt_t1.boxes[k])).transpose()?;
        labels.push(AnchorLabel::Positive(PositiveMatch { gt_t: j, gt_t1: gt_t1_idx, target_t, target_t1 }));
    }
    Ok(AnchorLabels { labels })
}

pub fn smooth_l1<T: Scalar>(x: T) -> T {
    let ax = x.abs();
    if ax < T::one() {
        T::lit(0.5) * x * x
    } else {
        ax - T::lit(0.5)
    }
}

pub fn smooth_l1_grad<T: Scalar>(x: T) -> T {
    if x.abs() < T::one() {
        x
    } else {
        x.signum()
    }
}

/// Mean smooth-L1 over the residuals of both boxes of a pair. With no frame
/// t+1 target only the frame-t residuals count and the mean is over four.
pub fn reg_loss<T: Scalar>(
    pred_t: &OffsetQuad<T>,
    pred_t1: &OffsetQuad<T>,
    target_t: &OffsetQuad<T>,
    target_t1: Option<&OffsetQuad<T>>,
) -> T {
    let mut sum = residuals(pred_t, target_t).into_iter().map(smooth_l1).sum::<T>();
    let mut n = 4.0;
    if let Some(tt1) = target_t1 {
        sum = sum + residuals(pred_t1, tt1).into_iter().map(smooth_l1).sum::<T>();
        n = 8.0;
    }
    sum / T::lit(n)
}

/// Gradient of [`reg_loss`] with respect to both predicted quads.
pub fn reg_loss_grad<T: Scalar>(
    pred_t: &OffsetQuad<T>,
    pred_t1: &OffsetQuad<T>,
    target_t: &OffsetQuad<T>,
    target_t1: Option<&OffsetQuad<T>>,
) -> (OffsetQuad<T>, OffsetQuad<T>) {
    let n = T::lit(if target_t1.is_some() { 8.0 } else { 4.0 });
    let g = |r: [T; 4]| OffsetQuad::from_array(r.map(|x| smooth_l1_grad(x) / n));
    let gt = g(residuals(pred_t, target_t));
    let gt1 = target_t1.map_or_else(OffsetQuad::zero, |tt1| g(residuals(pred_t1, tt1)));
    (gt, gt1)
}

fn residuals<T: Scalar>(pred: &OffsetQuad<T>, target: &OffsetQuad<T>) -> [T; 4] {
    [pred.dx - target.dx, pred.dy - target.dy, pred.dw - target.dw, pred.dh - target.dh]
}

fn clamp_prob<T: Scalar>(p: T) -> T {
    let eps = T::lit(PROB_EPS);
    p.max(eps).min(T::one() - eps)
}

/// Binary focal loss of probability `p` against label `c`.
pub fn focal_loss<T: Scalar>(p: T, c: bool, w: &LossWeights<T>) -> T {
    let p = clamp_prob(p);
    let g = w.focal_gamma;
    if c {
        -w.focal_alpha * (T::one() - p).powf(g) * p.ln()
    } else {
        -(T::one() - w.focal_alpha) * p.powf(g) * (T::one() - p).ln()
    }
}

/// Derivative of [`focal_loss`] in `p`; zero where clamping is active.
pub fn focal_loss_grad<T: Scalar>(p: T, c: bool, w: &LossWeights<T>) -> T {
    let eps = T::lit(PROB_EPS);
    if p < eps || p > T::one() - eps {
        return T::zero();
    }
    let g = w.focal_gamma;
    let q = T::one() - p;
    if c {
        let lead = if g == T::zero() { T::zero() } else { g * q.powf(g - T::one()) * p.ln() };
        w.focal_alpha * (lead - q.powf(g) / p)
    } else {
        let lead = if g == T::zero() { T::zero() } else { g * p.powf(g - T::one()) * q.ln() };
        -(T::one() - w.focal_alpha) * (lead - p.powf(g) / q)
    }
}

/// Network outputs for one anchor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorPrediction<T> {
    pub p_cls: T,
    pub p_id: T,
    pub offsets_t: OffsetQuad<T>,
    pub offsets_t1: OffsetQuad<T>,
}

/// Partial derivatives of the total loss for one anchor, laid out like
/// [`AnchorPrediction`].
pub type AnchorGradient<T> = AnchorPrediction<T>;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown<T> {
    pub regression: T,
    /// Classification focal term, after normalization, before `alpha`.
    pub classification: T,
    /// ID-verification focal term, before `beta`.
    pub identity: T,
    pub total: T,
}

fn cls_normalizer<T: Scalar>(labels: &AnchorLabels<T>, w: &LossWeights<T>) -> T {
    if w.normalize_cls {
        T::lit(labels.positives().max(1) as f64)
    } else {
        T::one()
    }
}

fn check_aligned<T>(preds: &[AnchorPrediction<T>], labels: &AnchorLabels<T>) -> Result<()> {
    if preds.len() != labels.len() {
        return Err(Error::LengthMismatch { expected: labels.len(), got: preds.len() });
    }
    Ok(())
}

/// Weighted sum of regression, classification and ID-verification losses.
pub fn total_loss<T: Scalar>(
    preds: &[AnchorPrediction<T>],
    labels: &AnchorLabels<T>,
    w: &LossWeights<T>,
) -> Result<LossBreakdown<T>> {
    check_aligned(preds, labels)?;
    let mut out = LossBreakdown::default();
    for (pr, label) in preds.iter().zip(&labels.labels) {
        match label {
            AnchorLabel::Positive(m) => {
                out.regression =
                    out.regression + reg_loss(&pr.offsets_t, &pr.offsets_t1, &m.target_t, m.target_t1.as_ref());
                out.classification = out.classification + focal_loss(pr.p_cls, true, w);
                out.identity = out.identity + focal_loss(pr.p_id, m.c_id(), w);
            }
            AnchorLabel::Negative => out.classification = out.classification + focal_loss(pr.p_cls, false, w),
            AnchorLabel::Ignore => {}
        }
    }
    out.classification = out.classification / cls_normalizer(labels, w);
    out.total = out.regression + w.alpha * out.classification + w.beta * out.identity;
    Ok(out)
}

/// Analytic gradient of [`total_loss`]'s total with respect to every prediction.
pub fn loss_gradients<T: Scalar>(
    preds: &[AnchorPrediction<T>],
    labels: &AnchorLabels<T>,
    w: &LossWeights<T>,
) -> Result<Vec<AnchorGradient<T>>> {
    check_aligned(preds, labels)?;
    let cls_scale = w.alpha / cls_normalizer(labels, w);
    let grads = preds
        .iter()
        .zip(&labels.labels)
        .map(|(pr, label)| {
            let mut g = AnchorGradient {
                p_cls: T::zero(),
                p_id: T::zero(),
                offsets_t: OffsetQuad::zero(),
                offsets_t1: OffsetQuad::zero(),
            };
            match label {
                AnchorLabel::Positive(m) => {
                    let (gt, gt1) = reg_loss_grad(&pr.offsets_t, &pr.offsets_t1, &m.target_t, m.target_t1.as_ref());
                    g.offsets_t = gt;
                    g.offsets_t1 = gt1;
                    g.p_cls = cls_scale * focal_loss_grad(pr.p_cls, true, w);
                    g.p_id = w.beta * focal_loss_grad(pr.p_id, m.c_id(), w);
                }
                AnchorLabel::Negative => g.p_cls = cls_scale * focal_loss_grad(pr.p_cls, false, w),
                AnchorLabel::Ignore => {}
            }
            g
        })
        .collect();
    Ok(grads)
}
