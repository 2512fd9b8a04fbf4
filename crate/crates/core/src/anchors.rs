//! Chained anchors: grid-placed priors from which paired boxes are regressed,
//! and the k-means procedure that picks one anchor scale per pyramid level.

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::scalar::Scalar;

/// Pyramid level of the finest anchor grid.
pub const FIRST_LEVEL: u8 = 2;

const KMEANS_MAX_ITERS: usize = 100;
const KMEANS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainedAnchor<T> {
    pub cx: T,
    pub cy: T,
    pub w: T,
    pub h: T,
    pub level: u8,
}

impl<T: Scalar> ChainedAnchor<T> {
    /// The anchor as a box, for IoU and offset encoding.
    pub fn bbox(&self) -> BBox<T> {
        BBox::from_center(self.cx, self.cy, self.w, self.h).expect("anchor sizes are positive")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnchorConfig<T> {
    /// One pixel scale per level, finest first.
    pub scales: Vec<T>,
    /// Height over width, shared by every level.
    pub ratio: T,
    /// Grid stride in pixels, one per level.
    pub strides: Vec<u32>,
    pub image_w: u32,
    pub image_h: u32,
}

impl<T: Scalar> AnchorConfig<T> {
    /// Five levels (P2..P6) with the reference pedestrian scales and a 2.9 aspect ratio.
    pub fn pedestrian(image_w: u32, image_h: u32) -> Self {
        Self {
            scales: [38.0, 86.0, 112.0, 156.0, 328.0].iter().map(|&s| T::lit(s)).collect(),
            ratio: T::lit(2.9),
            strides: vec![4, 8, 16, 32, 64],
            image_w,
            image_h,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.image_w == 0 || self.image_h == 0 {
            return Err(Error::InvalidConfig(format!(
                "image dimensions must be positive, got {}x{}",
                self.image_w, self.image_h
            )));
        }
        if self.scales.is_empty() {
            return Err(Error::InvalidConfig("at least one anchor level is required".into()));
        }
        if self.scales.len() != self.strides.len() {
            return Err(Error::InvalidConfig(format!(
                "{} scales for {} strides; exactly one scale per level",
                self.scales.len(),
                self.strides.len()
            )));
        }
        if self.scales.iter().any(|s| !(s.is_finite() && *s > T::zero())) {
            return Err(Error::InvalidConfig("anchor scales must be positive".into()));
        }
        if self.scales.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig("anchor scales must be strictly increasing".into()));
        }
        if !(self.ratio.is_finite() && self.ratio > T::zero()) {
            return Err(Error::InvalidConfig("anchor ratio must be positive".into()));
        }
        if self.strides.contains(&0) {
            return Err(Error::InvalidConfig("strides must be positive".into()));
        }
        Ok(())
    }
}

fn cells(extent: u32, stride: u32) -> u32 {
    extent.div_ceil(stride)
}

/// Center of grid cell `i` along one axis. Full cells are centered at
/// `stride * (i + 0.5)`; a partial cell at the image border is centered on
/// the part that lies inside the image.
fn cell_center<T: Scalar>(i: u32, stride: u32, extent: u32) -> T {
    let lo = u64::from(stride) * u64::from(i);
    let hi = (lo + u64::from(stride)).min(u64::from(extent));
    T::lit((lo + hi) as f64 / 2.0)
}

/// Dense anchor grid, one anchor per cell per level.
pub fn build_anchor_grid<T: Scalar>(cfg: &AnchorConfig<T>) -> Result<Vec<ChainedAnchor<T>>> {
    cfg.validate()?;
    let root = cfg.ratio.sqrt();
    let total: usize = cfg
        .strides
        .iter()
        .map(|&s| (cells(cfg.image_w, s) * cells(cfg.image_h, s)) as usize)
        .sum();
    let mut out = Vec::with_capacity(total);
    for (idx, (&scale, &stride)) in cfg.scales.iter().zip(&cfg.strides).enumerate() {
        let w = scale / root;
        let h = scale * root;
        let level = FIRST_LEVEL + idx as u8;
        for j in 0..cells(cfg.image_h, stride) {
            let cy = cell_center(j, stride, cfg.image_h);
            for i in 0..cells(cfg.image_w, stride) {
                let cx = cell_center(i, stride, cfg.image_w);
                out.push(ChainedAnchor { cx, cy, w, h, level });
            }
        }
    }
    Ok(out)
}

/// One-dimensional k-means (Lloyd) over box scales `sqrt(w * h)`.
///
/// Centroids start at `k` evenly spaced quantiles of the distinct scales. A
/// cluster that empties out is re-seeded from a scale drawn with `seed`.
/// Returns the centroids in ascending order.
pub fn kmeans_scales<T: Scalar>(gt_boxes: &[BBox<T>], k: usize, seed: u64) -> Result<Vec<T>> {
    if gt_boxes.is_empty() {
        return Err(Error::EmptyInput("k-means needs at least one box"));
    }
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    let mut scales: Vec<f64> = gt_boxes.iter().map(|b| b.scale().as_f64()).collect();
    scales.sort_by(f64::total_cmp);
    let mut distinct = scales.clone();
    distinct.dedup();
    if k > distinct.len() {
        return Err(Error::TooManyClusters { k, distinct: distinct.len() });
    }

    let mut centroids: Vec<f64> = (0..k)
        .map(|i| {
            let q = (i as f64 + 0.5) / k as f64;
            distinct[((q * distinct.len() as f64) as usize).min(distinct.len() - 1)]
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for _ in 0..KMEANS_MAX_ITERS {
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for &s in &scales {
            let c = nearest(&centroids, s);
            sums[c] += s;
            counts[c] += 1;
        }
        let mut shift = 0.0f64;
        for c in 0..k {
            let next = if counts[c] > 0 {
                sums[c] / counts[c] as f64
            } else {
                let free: Vec<f64> = distinct.iter().copied().filter(|v| !centroids.contains(v)).collect();
                *free.choose(&mut rng).unwrap_or(&centroids[c])
            };
            shift = shift.max((next - centroids[c]).abs());
            centroids[c] = next;
        }
        if shift < KMEANS_TOL {
            break;
        }
    }
    centroids.sort_by(f64::total_cmp);
    Ok(centroids.into_iter().map(T::lit).collect())
}

fn nearest(centroids: &[f64], s: f64) -> usize {
    let mut best = 0;
    for (i, c) in centroids.iter().enumerate().skip(1) {
        if (s - c).abs() < (s - centroids[best]).abs() {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_level(w: u32, h: u32, stride: u32, scale: f64, ratio: f64) -> AnchorConfig<f64> {
        AnchorConfig { scales: vec![scale], ratio, strides: vec![stride], image_w: w, image_h: h }
    }

    #[test]
    fn single_cell_grid() {
        let a = build_anchor_grid(&one_level(64, 64, 64, 38.0, 2.9)).unwrap();
        assert_eq!(a.len(), 1);
        assert_eq!((a[0].cx, a[0].cy), (32.0, 32.0));
        assert!((a[0].w * a[0].h - 1444.0).abs() < 1e-9);
        assert!((a[0].h / a[0].w - 2.9).abs() < 1e-12);
        assert_eq!(a[0].level, FIRST_LEVEL);
    }

    #[test]
    fn unit_ratio_gives_squares() {
        let a = build_anchor_grid(&one_level(64, 64, 32, 50.0, 1.0)).unwrap();
        assert!(a.iter().all(|x| x.w == 50.0 && x.h == 50.0));
    }

    #[test]
    fn counts_cells_per_level() {
        assert_eq!(build_anchor_grid(&one_level(128, 64, 64, 38.0, 2.9)).unwrap().len(), 2);
        let cfg = AnchorConfig::<f64>::pedestrian(1920, 1080);
        let expected: usize = [4u32, 8, 16, 32, 64]
            .iter()
            .map(|&s| (1920u32.div_ceil(s) * 1080u32.div_ceil(s)) as usize)
            .sum();
        assert_eq!(build_anchor_grid(&cfg).unwrap().len(), expected);
    }

    #[test]
    fn partial_border_cells_stay_inside() {
        let a = build_anchor_grid(&one_level(65, 64, 64, 38.0, 2.9)).unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(a[0].cx, 32.0);
        assert_eq!(a[1].cx, 64.5);
    }

    #[test]
    fn config_errors() {
        assert!(build_anchor_grid(&one_level(0, 64, 64, 38.0, 2.9)).is_err());
        let mut cfg = AnchorConfig::<f64>::pedestrian(64, 64);
        cfg.scales.swap(0, 1);
        assert!(cfg.validate().is_err());
        let mut cfg = AnchorConfig::<f64>::pedestrian(64, 64);
        cfg.strides.pop();
        assert!(cfg.validate().is_err());
        let mut cfg = AnchorConfig::<f64>::pedestrian(64, 64);
        cfg.ratio = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn kmeans_single_cluster() {
        let boxes = vec![BBox::new(0.0, 0.0, 10.0, 40.0).unwrap(); 7];
        assert_eq!(kmeans_scales(&boxes, 1, 3).unwrap(), vec![20.0]);
    }

    #[test]
    fn kmeans_errors() {
        assert!(matches!(kmeans_scales::<f64>(&[], 1, 0), Err(Error::EmptyInput(_))));
        let boxes = vec![BBox::new(0.0, 0.0, 10.0, 40.0).unwrap(); 3];
        assert!(matches!(kmeans_scales(&boxes, 2, 0), Err(Error::TooManyClusters { k: 2, distinct: 1 })));
    }

    #[test]
    fn kmeans_is_seed_deterministic() {
        let boxes: Vec<_> = (1..40).map(|i| BBox::new(0.0, 0.0, i as f64, (i * i % 17 + 1) as f64).unwrap()).collect();
        assert_eq!(kmeans_scales(&boxes, 4, 9).unwrap(), kmeans_scales(&boxes, 4, 9).unwrap());
    }
}
