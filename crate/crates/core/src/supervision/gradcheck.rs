//! Central finite-difference check of [`loss_gradients`](super::loss_gradients)
//! on random instances. Residuals are kept away from the smooth-L1 kink.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{
    loss_gradients, total_loss, AnchorLabel, AnchorLabels, AnchorPrediction, LossWeights, PositiveMatch,
};
use crate::error::Result;
use crate::geometry::OffsetQuad;

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-5;
/// Minimum distance of any residual from `|x| = 1`.
pub const KINK_MARGIN: f64 = 1e-3;

/// One randomly drawn loss instance.
#[derive(Debug, Clone)]
pub struct Instance {
    pub preds: Vec<AnchorPrediction<f64>>,
    pub labels: AnchorLabels<f64>,
    pub weights: LossWeights<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradcheckReport {
    pub instances: usize,
    pub scalars_checked: usize,
    pub max_rel_error: f64,
    pub passed: bool,
}

fn residual(rng: &mut impl Rng) -> f64 {
    loop {
        let r: f64 = rng.random_range(-3.0..3.0);
        if (r.abs() - 1.0).abs() > KINK_MARGIN && r.abs() > 1e-2 {
            return r;
        }
    }
}

fn quad(rng: &mut impl Rng) -> OffsetQuad<f64> {
    OffsetQuad::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    )
}

fn shifted(q: &OffsetQuad<f64>, rng: &mut impl Rng) -> OffsetQuad<f64> {
    OffsetQuad::new(q.dx + residual(rng), q.dy + residual(rng), q.dw + residual(rng), q.dh + residual(rng))
}

/// Random instance of `n` anchors with a mix of positive (both ID labels),
/// negative and ignored anchors.
pub fn random_instance(rng: &mut impl Rng, n: usize) -> Instance {
    let mut labels = Vec::with_capacity(n);
    let mut preds = Vec::with_capacity(n);
    for _ in 0..n {
        let kind: f64 = rng.random();
        let t = quad(rng);
        let t1 = quad(rng);
        let label = if kind < 0.45 {
            let present = rng.random_bool(0.6);
            AnchorLabel::Positive(PositiveMatch {
                gt_t: 0,
                gt_t1: present.then_some(0),
                target_t: t,
                target_t1: present.then_some(t1),
            })
        } else if kind < 0.85 {
            AnchorLabel::Negative
        } else {
            AnchorLabel::Ignore
        };
        labels.push(label);
        preds.push(AnchorPrediction {
            p_cls: rng.random_range(0.05..0.95),
            p_id: rng.random_range(0.05..0.95),
            offsets_t: shifted(&t, rng),
            offsets_t1: shifted(&t1, rng),
        });
    }
    let weights = LossWeights {
        alpha: rng.random_range(0.5..2.0),
        beta: rng.random_range(0.5..2.0),
        normalize_cls: rng.random_bool(0.5),
        ..LossWeights::default()
    };
    Instance { preds, labels: AnchorLabels { labels }, weights }
}

fn scalar_mut(p: &mut AnchorPrediction<f64>, slot: usize) -> &mut f64 {
    match slot {
        0 => &mut p.p_cls,
        1 => &mut p.p_id,
        2 => &mut p.offsets_t.dx,
        3 => &mut p.offsets_t.dy,
        4 => &mut p.offsets_t.dw,
        5 => &mut p.offsets_t.dh,
        6 => &mut p.offsets_t1.dx,
        7 => &mut p.offsets_t1.dy,
        8 => &mut p.offsets_t1.dw,
        _ => &mut p.offsets_t1.dh,
    }
}

fn scalar(p: &AnchorPrediction<f64>, slot: usize) -> f64 {
    *scalar_mut(&mut p.clone(), slot)
}

pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale == 0.0 {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}

/// Largest relative error between analytic and central-difference gradients
/// over every prediction scalar of `inst`, and the number of scalars checked.
pub fn check_instance(inst: &Instance) -> Result<(f64, usize)> {
    let analytic = loss_gradients(&inst.preds, &inst.labels, &inst.weights)?;
    let mut worst = 0.0f64;
    let mut checked = 0;
    let mut preds = inst.preds.clone();
    for i in 0..preds.len() {
        for slot in 0..10 {
            let x0 = scalar(&preds[i], slot);
            *scalar_mut(&mut preds[i], slot) = x0 + STEP;
            let up = total_loss(&preds, &inst.labels, &inst.weights)?.total;
            *scalar_mut(&mut preds[i], slot) = x0 - STEP;
            let down = total_loss(&preds, &inst.labels, &inst.weights)?.total;
            *scalar_mut(&mut preds[i], slot) = x0;
            let numeric = (up - down) / (2.0 * STEP);
            worst = worst.max(rel_error(scalar(&analytic[i], slot), numeric));
            checked += 1;
        }
    }
    Ok((worst, checked))
}

/// Runs the finite-difference check over `instances` random instances.
pub fn run(seed: u64, instances: usize) -> Result<GradcheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_rel_error = 0.0f64;
    let mut scalars_checked = 0;
    for _ in 0..instances {
        let n = rng.random_range(1..=20);
        let inst = random_instance(&mut rng, n);
        let (worst, checked) = check_instance(&inst)?;
        max_rel_error = max_rel_error.max(worst);
        scalars_checked += checked;
    }
    Ok(GradcheckReport { instances, scalars_checked, max_rel_error, passed: max_rel_error < TOLERANCE })
}
