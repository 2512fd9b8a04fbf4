//! Inference-side glue between raw paired predictions and chaining:
//! attention from the classification and ID score maps, soft-NMS keyed on
//! the first box of each pair, and confidence filtering.

use crate::error::{Error, Result};
use crate::geometry::{iou, BBox};
use crate::scalar::Scalar;

/// Two boxes of one target in adjacent frames, with classification and
/// ID-verification confidences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxPair<T> {
    /// Box in the node's first frame.
    pub first: BBox<T>,
    /// Box in the node's second frame.
    pub second: BBox<T>,
    pub cls_score: T,
    pub id_score: T,
}

impl<T: Scalar> BoxPair<T> {
    pub fn new(first: BBox<T>, second: BBox<T>, cls_score: T, id_score: T) -> Result<Self> {
        let unit = |s: T| s >= T::zero() && s <= T::one();
        if !unit(cls_score) || !unit(id_score) {
            return Err(Error::InvalidConfig(format!(
                "pair scores must lie in [0, 1], got cls={cls_score} id={id_score}"
            )));
        }
        Ok(Self { first, second, cls_score, id_score })
    }
}

/// Dense per-cell values laid out row-major as `(y, x, channel)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreGrid<T> {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub values: Vec<T>,
}

impl<T: Scalar> ScoreGrid<T> {
    pub fn new(width: usize, height: usize, channels: usize, values: Vec<T>) -> Result<Self> {
        if values.len() != width * height * channels {
            return Err(Error::LengthMismatch { expected: width * height * channels, got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("score grid values must be finite".into()));
        }
        Ok(Self { width, height, channels, values })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: T) -> Self {
        Self { width, height, channels, values: vec![value; width * height * channels] }
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> T {
        self.values[(y * self.width + x) * self.channels + c]
    }
}

/// Multiplies the classification and ID maps into one attention map and
/// applies it to every channel of `features`.
pub fn joint_attention<T: Scalar>(
    features: &ScoreGrid<T>,
    cls_map: &ScoreGrid<T>,
    id_map: &ScoreGrid<T>,
) -> Result<ScoreGrid<T>> {
    for (name, m) in [("classification", cls_map), ("identity", id_map)] {
        if m.channels != 1 {
            return Err(Error::DimensionMismatch(format!("{name} map has {} channels, expected 1", m.channels)));
        }
        if (m.width, m.height) != (features.width, features.height) {
            return Err(Error::DimensionMismatch(format!(
                "{name} map is {}x{}, features are {}x{}",
                m.width, m.height, features.width, features.height
            )));
        }
    }
    let values = features
        .values
        .chunks(features.channels.max(1))
        .zip(cls_map.values.iter().zip(&id_map.values))
        .flat_map(|(cell, (&c, &i))| {
            let att = c * i;
            cell.iter().map(move |&f| f * att)
        })
        .collect();
    Ok(ScoreGrid { values, ..*features })
}

/// Linear soft-NMS on the first box of each pair.
///
/// Repeatedly selects the highest-scoring remaining pair (ties go to the
/// earlier input position) and decays the score of every remaining pair whose
/// first-box IoU with it exceeds `nms_thresh` by a factor `1 - IoU`. All pairs
/// are returned, in selection order, which is descending score order.
pub fn soft_nms<T: Scalar>(pairs: &[BoxPair<T>], nms_thresh: T) -> Vec<BoxPair<T>> {
    let mut pool: Vec<BoxPair<T>> = pairs.to_vec();
    let mut out = Vec::with_capacity(pool.len());
    while !pool.is_empty() {
        let mut best = 0;
        for (i, p) in pool.iter().enumerate().skip(1) {
            if p.cls_score > pool[best].cls_score {
                best = i;
            }
        }
        let sel = pool.remove(best);
        for p in &mut pool {
            let overlap = iou(&sel.first, &p.first);
            if overlap > nms_thresh {
                p.cls_score = p.cls_score * (T::one() - overlap);
            }
        }
        out.push(sel);
    }
    out
}

/// Keeps pairs with `cls_score >= conf_thresh`, preserving order.
pub fn filter_confidence<T: Scalar>(pairs: &[BoxPair<T>], conf_thresh: T) -> Vec<BoxPair<T>> {
    pairs.iter().filter(|p| p.cls_score >= conf_thresh).copied().collect()
}
