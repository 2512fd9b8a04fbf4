//! Deterministic synthetic world used in place of a trained detector.
//!
//! [`gen_sequence`] produces ground-truth trajectories; [`corrupt_to_pairs`]
//! turns them into per-node box pairs with configurable noise. The module
//! also holds the training-time sampling and box-level augmentation used when
//! building paired training examples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Normal, Poisson};

use crate::chaining::Node;
use crate::error::{Error, Result};
use crate::geometry::{iom, iou, BBox};
use crate::postprocess::BoxPair;
use crate::supervision::GroundTruthFrame;

/// Coordinates produced here are rounded to this grid so that they survive
/// the two-decimal text formats unchanged.
const COORD_QUANTUM: f64 = 100.0;
const SCORE_QUANTUM: f64 = 1e6;
const PLACEMENT_ATTEMPTS: usize = 200;

fn qc(v: f64) -> f64 {
    (v * COORD_QUANTUM).round() / COORD_QUANTUM
}

fn qs(v: f64) -> f64 {
    ((v * SCORE_QUANTUM).round() / SCORE_QUANTUM).clamp(0.0, 1.0)
}

/// A target hidden from the detector for `duration` frames from `start`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Occlusion {
    /// Index of the target (0-based, identity minus one).
    pub target: usize,
    pub start: usize,
    pub duration: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldConfig {
    pub frames: usize,
    pub image_w: u32,
    pub image_h: u32,
    pub n_targets: usize,
    /// Per-frame probability that a not-yet-born target appears. Zero means
    /// every target exists from the first frame.
    pub entry_prob: f64,
    /// Per-frame probability that a live target leaves for good.
    pub exit_prob: f64,
    pub occlusions: Vec<Occlusion>,
    /// Upper bound on speed in pixels per frame.
    pub max_speed: f64,
    /// Per-frame Gaussian position noise on the true path, in pixels.
    pub jitter_std: f64,
    /// Range of box scales `sqrt(w * h)`.
    pub scale_range: (f64, f64),
    /// Box height over width.
    pub ratio: f64,
    /// Targets are placed so that no two overlap by more than this IoU.
    pub max_mutual_iou: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            frames: 100,
            image_w: 1920,
            image_h: 1080,
            n_targets: 8,
            entry_prob: 0.0,
            exit_prob: 0.0,
            occlusions: Vec::new(),
            max_speed: 6.0,
            jitter_std: 0.0,
            scale_range: (60.0, 180.0),
            ratio: 2.9,
            max_mutual_iou: 0.3,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.image_w == 0 || self.image_h == 0 {
            return bad("image dimensions must be positive");
        }
        if self.frames == 0 {
            return bad("a sequence needs at least one frame");
        }
        for p in [self.entry_prob, self.exit_prob] {
            if !(0.0..=1.0).contains(&p) {
                return bad("entry/exit probabilities must lie in [0, 1]");
            }
        }
        if !(self.max_speed >= 0.0 && self.jitter_std >= 0.0) {
            return bad("speed and jitter must be non-negative");
        }
        let (lo, hi) = self.scale_range;
        if !(lo > 0.0 && lo <= hi) {
            return bad("scale range must be positive and ordered");
        }
        if self.ratio.is_nan() || self.ratio <= 0.0 {
            return bad("ratio must be positive");
        }
        let (w, h) = self.box_size(hi);
        if w > f64::from(self.image_w) || h > f64::from(self.image_h) {
            return bad("largest box does not fit in the image");
        }
        if self.occlusions.iter().any(|o| o.target >= self.n_targets) {
            return bad("occlusion refers to a target that does not exist");
        }
        Ok(())
    }

    fn box_size(&self, scale: f64) -> (f64, f64) {
        let r = self.ratio.sqrt();
        (scale / r, scale * r)
    }

    fn occluded(&self, target: usize, frame: usize) -> bool {
        self.occlusions.iter().any(|o| o.target == target && frame >= o.start && frame < o.start + o.duration)
    }
}

/// Noise model turning ground truth into detector-like box pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseConfig {
    pub center_jitter_std: f64,
    pub size_jitter_std: f64,
    /// Probability that a true pair is not reported.
    pub drop_prob: f64,
    /// Mean number of false-positive pairs per node.
    pub false_positive_rate: f64,
    pub true_cls: ScoreDist,
    pub true_id: ScoreDist,
    pub false_cls: ScoreDist,
    pub false_id: ScoreDist,
    /// Region false positives are drawn in, `(width, height)`.
    pub fp_region: (f64, f64),
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self::noiseless()
    }
}

impl NoiseConfig {
    pub fn noiseless() -> Self {
        Self {
            center_jitter_std: 0.0,
            size_jitter_std: 0.0,
            drop_prob: 0.0,
            false_positive_rate: 0.0,
            true_cls: ScoreDist::Constant(1.0),
            true_id: ScoreDist::Constant(1.0),
            false_cls: ScoreDist::Uniform(0.3, 0.9),
            false_id: ScoreDist::Uniform(0.0, 0.3),
            fp_region: (1920.0, 1080.0),
        }
    }

    /// A moderately noisy detector: small jitter, some drops and clutter,
    /// true scores concentrated near one.
    pub fn realistic() -> Self {
        Self {
            center_jitter_std: 2.0,
            size_jitter_std: 2.0,
            drop_prob: 0.05,
            false_positive_rate: 0.5,
            true_cls: ScoreDist::Beta(8.0, 1.5),
            true_id: ScoreDist::Beta(8.0, 1.5),
            ..Self::noiseless()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(0.0..=1.0).contains(&self.drop_prob) {
            return bad("drop probability must lie in [0, 1]");
        }
        if !(self.center_jitter_std >= 0.0 && self.size_jitter_std >= 0.0 && self.false_positive_rate >= 0.0) {
            return bad("noise parameters must be non-negative");
        }
        if !(self.fp_region.0 > 0.0 && self.fp_region.1 > 0.0) {
            return bad("false-positive region must be non-empty");
        }
        for d in [&self.true_cls, &self.true_id, &self.false_cls, &self.false_id] {
            d.validate()?;
        }
        Ok(())
    }
}

/// Distribution of a confidence score in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScoreDist {
    Constant(f64),
    Uniform(f64, f64),
    Beta(f64, f64),
}

impl ScoreDist {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            ScoreDist::Constant(v) => (0.0..=1.0).contains(&v),
            ScoreDist::Uniform(a, b) => 0.0 <= a && a <= b && b <= 1.0,
            ScoreDist::Beta(a, b) => a > 0.0 && b > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid score distribution {self:?}")))
        }
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        let v = match *self {
            ScoreDist::Constant(v) => v,
            ScoreDist::Uniform(a, b) if a == b => a,
            ScoreDist::Uniform(a, b) => rng.random_range(a..=b),
            ScoreDist::Beta(a, b) => Beta::new(a, b).map(|d| d.sample(rng)).unwrap_or(1.0),
        };
        qs(v)
    }
}

struct TargetPath {
    birth: usize,
    death: usize,
    start: (f64, f64),
    velocity: (f64, f64),
    size: (f64, f64),
}

impl TargetPath {
    fn alive(&self, f: usize) -> bool {
        f >= self.birth && f < self.death
    }

    /// Noise-free top-left corner at frame `f`.
    fn corner(&self, f: usize) -> (f64, f64) {
        let k = (f - self.birth) as f64;
        (self.start.0 + self.velocity.0 * k, self.start.1 + self.velocity.1 * k)
    }

    fn clean_box(&self, f: usize) -> Option<BBox<f64>> {
        let (x, y) = self.corner(f);
        BBox::new(x, y, self.size.0, self.size.1).ok()
    }
}

fn sample_path(cfg: &WorldConfig, rng: &mut impl Rng) -> TargetPath {
    let birth = if cfg.entry_prob > 0.0 {
        let mut b = 0;
        while b < cfg.frames && !rng.random_bool(cfg.entry_prob) {
            b += 1;
        }
        b
    } else {
        0
    };
    let mut death = cfg.frames;
    if cfg.exit_prob > 0.0 {
        for f in birth + 1..cfg.frames {
            if rng.random_bool(cfg.exit_prob) {
                death = f;
                break;
            }
        }
    }
    let scale = rng.random_range(cfg.scale_range.0..=cfg.scale_range.1);
    let (w, h) = cfg.box_size(scale);
    let (w, h) = (qc(w).max(0.01), qc(h).max(0.01));
    let max_x = (f64::from(cfg.image_w) - w).max(0.0);
    let max_y = (f64::from(cfg.image_h) - h).max(0.0);
    let start = (rng.random_range(0.0..=max_x), rng.random_range(0.0..=max_y));
    let end = (rng.random_range(0.0..=max_x), rng.random_range(0.0..=max_y));
    // start and end lie inside the image, so every point between them does too
    let span = death.saturating_sub(birth + 1).max(1) as f64;
    let mut v = ((end.0 - start.0) / span, (end.1 - start.1) / span);
    let speed = v.0.hypot(v.1);
    if speed > cfg.max_speed {
        let s = if speed > 0.0 { cfg.max_speed / speed } else { 0.0 };
        v = (v.0 * s, v.1 * s);
    }
    TargetPath { birth, death, start: (qc(start.0), qc(start.1)), velocity: (qc(v.0), qc(v.1)), size: (w, h) }
}

fn conflicts(a: &TargetPath, b: &TargetPath, limit: f64) -> bool {
    (a.birth.max(b.birth)..a.death.min(b.death)).any(|f| match (a.clean_box(f), b.clean_box(f)) {
        (Some(p), Some(q)) => iou(&p, &q) > limit,
        _ => false,
    })
}

fn clip_to_image(x: f64, y: f64, w: f64, h: f64, cfg: &WorldConfig) -> Option<BBox<f64>> {
    let x1 = qc(x.max(0.0));
    let y1 = qc(y.max(0.0));
    let x2 = (x + w).min(f64::from(cfg.image_w));
    let y2 = (y + h).min(f64::from(cfg.image_h));
    BBox::new(x1, y1, qc(x2 - x1), qc(y2 - y1)).ok()
}

/// Generates a ground-truth sequence of `cfg.frames` frames.
///
/// Target `i` has identity `i + 1` and moves at constant velocity between two
/// random points inside the image, so it stays in view for its whole life.
/// Placement is re-sampled (up to a fixed attempt budget) until it overlaps
/// no earlier target by more than `max_mutual_iou`. Boxes pushed past the
/// border by jitter are clipped and dropped once fully outside. Occluded
/// targets stay in the ground truth with visibility 0.
pub fn gen_sequence(cfg: &WorldConfig, seed: u64) -> Result<Vec<GroundTruthFrame<f64>>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut paths: Vec<TargetPath> = Vec::with_capacity(cfg.n_targets);
    for _ in 0..cfg.n_targets {
        let mut path = sample_path(cfg, &mut rng);
        for _ in 1..PLACEMENT_ATTEMPTS {
            if !paths.iter().any(|p| conflicts(p, &path, cfg.max_mutual_iou)) {
                break;
            }
            path = sample_path(cfg, &mut rng);
        }
        paths.push(path);
    }

    let jitter = Normal::new(0.0, cfg.jitter_std).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut frames = Vec::with_capacity(cfg.frames);
    for f in 0..cfg.frames {
        let mut boxes = Vec::new();
        let mut ids = Vec::new();
        let mut vis = Vec::new();
        for (i, path) in paths.iter().enumerate() {
            if !path.alive(f) {
                continue;
            }
            let (mut x, mut y) = path.corner(f);
            if cfg.jitter_std > 0.0 {
                x += jitter.sample(&mut rng);
                y += jitter.sample(&mut rng);
            }
            let Some(b) = clip_to_image(x, y, path.size.0, path.size.1, cfg) else {
                continue;
            };
            boxes.push(b);
            ids.push(i as u64 + 1);
            vis.push(if cfg.occluded(i, f) { 0.0 } else { 1.0 });
        }
        frames.push(GroundTruthFrame::new(f, boxes, ids, vis)?);
    }
    Ok(frames)
}

fn jitter_box(b: &BBox<f64>, n: &NoiseConfig, rng: &mut impl Rng) -> Result<BBox<f64>> {
    if n.center_jitter_std == 0.0 && n.size_jitter_std == 0.0 {
        return Ok(*b);
    }
    let c = Normal::new(0.0, n.center_jitter_std).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let s = Normal::new(0.0, n.size_jitter_std).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let (cx, cy) = b.center();
    let (cx, cy) = (cx + c.sample(rng), cy + c.sample(rng));
    let w = qc((b.w() + s.sample(rng)).max(1.0));
    let h = qc((b.h() + s.sample(rng)).max(1.0));
    BBox::new(qc(cx - w / 2.0), qc(cy - h / 2.0), w, h)
}

fn false_positive(n: &NoiseConfig, rng: &mut impl Rng) -> Result<BoxPair<f64>> {
    let (rw, rh) = n.fp_region;
    let w = qc(rng.random_range(10.0..=(rw / 4.0).max(10.0)));
    let h = qc(w * 2.9);
    let x = qc(rng.random_range(0.0..=(rw - w).max(0.0)));
    let y = qc(rng.random_range(0.0..=(rh - h).max(0.0)));
    let first = BBox::new(x, y, w, h)?;
    let second = BBox::new(qc(x + rng.random_range(-3.0..=3.0)), qc(y + rng.random_range(-3.0..=3.0)), w, h)?;
    BoxPair::new(first, second, n.false_cls.sample(rng), n.false_id.sample(rng))
}

/// Builds one node per frame from ground truth. Node `t` pairs frames `t`
/// and `t+1`; the last node pairs the final frame with a copy of itself.
///
/// A target yields a pair only when it is present and visible in both frames
/// of the node. Pairs follow identity order, then false positives.
pub fn corrupt_to_pairs(gt: &[GroundTruthFrame<f64>], n: &NoiseConfig, seed: u64) -> Result<Vec<Node<f64>>> {
    n.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fp_count = if n.false_positive_rate > 0.0 {
        Some(Poisson::new(n.false_positive_rate).map_err(|e| Error::InvalidConfig(e.to_string()))?)
    } else {
        None
    };
    let mut nodes = Vec::with_capacity(gt.len());
    for t in 0..gt.len() {
        let (a, b) = (&gt[t], &gt[(t + 1).min(gt.len() - 1)]);
        let mut entries: Vec<(u64, usize, usize)> = a
            .identities
            .iter()
            .enumerate()
            .filter_map(|(i, &id)| b.position_of(id).map(|k| (id, i, k)))
            .filter(|&(_, i, k)| a.visibilities[i] > 0.0 && b.visibilities[k] > 0.0)
            .collect();
        entries.sort_unstable();
        let mut pairs = Vec::with_capacity(entries.len());
        for (_, i, k) in entries {
            if n.drop_prob > 0.0 && rng.random_bool(n.drop_prob) {
                continue;
            }
            let first = jitter_box(&a.boxes[i], n, &mut rng)?;
            let second = jitter_box(&b.boxes[k], n, &mut rng)?;
            pairs.push(BoxPair::new(first, second, n.true_cls.sample(&mut rng), n.true_id.sample(&mut rng))?);
        }
        if let Some(dist) = &fp_count {
            let count = dist.sample(&mut rng) as usize;
            for _ in 0..count {
                pairs.push(false_positive(n, &mut rng)?);
            }
        }
        nodes.push(Node { t: a.frame, pairs });
    }
    Ok(nodes)
}

/// Draws two frame indices of a training pair: gap 1 to 3 (limited by the
/// sequence length) and random order.
pub fn sample_training_pair(len: usize, rng: &mut impl Rng) -> Result<(usize, usize)> {
    if len < 2 {
        return Err(Error::SequenceTooShort { needed: 2, got: len });
    }
    let gap = rng.random_range(1..=3.min(len - 1));
    let a = rng.random_range(0..len - gap);
    let b = a + gap;
    Ok(if rng.random_bool(0.5) { (b, a) } else { (a, b) })
}

/// Seeded form of [`sample_training_pair`].
pub fn sample_training_pair_seeded(len: usize, seed: u64) -> Result<(usize, usize)> {
    sample_training_pair(len, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Geometric augmentation parameters, sampled once and applied to both
/// frames of a training pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentTransform {
    /// Crop rectangle in source image coordinates.
    pub crop: BBox<f64>,
    /// Expanded canvas size and the crop's offset inside it; `None` when no
    /// expansion is applied.
    pub expand: Option<ExpandParams>,
    pub flip: bool,
    /// Side of the square output.
    pub out_side: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpandParams {
    pub canvas_w: f64,
    pub canvas_h: f64,
    pub offset_x: f64,
    pub offset_y: f64,
}

/// Boxes are kept when their IoM with the crop exceeds this.
pub const CROP_KEEP_IOM: f64 = 0.2;
pub const CROP_RANGE: (f64, f64) = (0.3, 0.8);
pub const EXPAND_PROB: f64 = 0.2;
pub const EXPAND_RANGE: (f64, f64) = (1.0, 3.0);
pub const FLIP_PROB: f64 = 0.5;

impl AugmentTransform {
    /// Samples a square crop of side `[0.3, 0.8]` times the shorter image
    /// side, an expansion by `[1, 3]` with probability 0.2, and a horizontal
    /// flip with probability 0.5. Output is a square of half the shorter side.
    pub fn sample(image_w: f64, image_h: f64, seed: u64) -> Result<Self> {
        if !(image_w > 0.0 && image_h > 0.0) {
            return Err(Error::InvalidConfig("image dimensions must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let short = image_w.min(image_h);
        let side = rng.random_range(CROP_RANGE.0..=CROP_RANGE.1) * short;
        let x0 = rng.random_range(0.0..=image_w - side);
        let y0 = rng.random_range(0.0..=image_h - side);
        let crop = BBox::new(x0, y0, side, side)?;
        let expand = if rng.random_bool(EXPAND_PROB) {
            let f = rng.random_range(EXPAND_RANGE.0..=EXPAND_RANGE.1);
            let canvas = side * f;
            Some(ExpandParams {
                canvas_w: canvas,
                canvas_h: canvas,
                offset_x: rng.random_range(0.0..=canvas - side),
                offset_y: rng.random_range(0.0..=canvas - side),
            })
        } else {
            None
        };
        let flip = rng.random_bool(FLIP_PROB);
        Ok(Self { crop, expand, flip, out_side: short / 2.0 })
    }

    /// Applies the transform to one frame's boxes; returns the transformed
    /// frame and the output image size.
    pub fn apply(&self, frame: &GroundTruthFrame<f64>) -> Result<(GroundTruthFrame<f64>, (f64, f64))> {
        let (mut cw, mut ch) = (self.crop.w(), self.crop.h());
        let (ox, oy) = match self.expand {
            Some(e) => {
                cw = e.canvas_w;
                ch = e.canvas_h;
                (e.offset_x, e.offset_y)
            }
            None => (0.0, 0.0),
        };
        let (sx, sy) = (self.out_side / cw, self.out_side / ch);
        let mut boxes = Vec::new();
        let mut ids = Vec::new();
        let mut vis = Vec::new();
        for (i, b) in frame.boxes.iter().enumerate() {
            if iom(b, &self.crop) <= CROP_KEEP_IOM {
                continue;
            }
            let Some(clipped) = b.intersection(&self.crop) else { continue };
            let mut x = clipped.x() - self.crop.x() + ox;
            let y = clipped.y() - self.crop.y() + oy;
            if self.flip {
                x = cw - x - clipped.w();
            }
            boxes.push(BBox::new(x, y, clipped.w(), clipped.h())?.scale_axes(sx, sy)?);
            ids.push(frame.identities[i]);
            vis.push(frame.visibilities[i]);
        }
        Ok((GroundTruthFrame::new(frame.frame, boxes, ids, vis)?, (self.out_side, self.out_side)))
    }
}

/// Samples a transform from `seed` and applies it to `frame`.
pub fn augment_crop_expand_flip(
    frame: &GroundTruthFrame<f64>,
    image_w: f64,
    image_h: f64,
    seed: u64,
) -> Result<(GroundTruthFrame<f64>, (f64, f64), AugmentTransform)> {
    let tf = AugmentTransform::sample(image_w, image_h, seed)?;
    let (out, dims) = tf.apply(frame)?;
    Ok((out, dims, tf))
}
