//! Axis-aligned boxes, overlap measures and the paired offset parameterization.
//!
//! Boxes are stored as `(left, top, width, height)` in pixels, which is the
//! layout of MOTChallenge text files. Center/size views are derived on demand.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Axis-aligned rectangle with positive, finite width and height.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox<T> {
    x: T,
    y: T,
    w: T,
    h: T,
}

impl<T: Scalar> BBox<T> {
    pub fn new(x: T, y: T, w: T, h: T) -> Result<Self> {
        let ok = x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite();
        if !ok || w <= T::zero() || h <= T::zero() {
            return Err(Error::InvalidBox { x: x.as_f64(), y: y.as_f64(), w: w.as_f64(), h: h.as_f64() });
        }
        Ok(Self { x, y, w, h })
    }

    pub fn from_center(cx: T, cy: T, w: T, h: T) -> Result<Self> {
        let two = T::lit(2.0);
        Self::new(cx - w / two, cy - h / two, w, h)
    }

    /// Box from its left/top/right/bottom edges.
    pub fn from_corners(x1: T, y1: T, x2: T, y2: T) -> Result<Self> {
        Self::new(x1, y1, x2 - x1, y2 - y1)
    }

    pub fn x(&self) -> T {
        self.x
    }

    pub fn y(&self) -> T {
        self.y
    }

    pub fn w(&self) -> T {
        self.w
    }

    pub fn h(&self) -> T {
        self.h
    }

    pub fn right(&self) -> T {
        self.x + self.w
    }

    pub fn bottom(&self) -> T {
        self.y + self.h
    }

    pub fn center(&self) -> (T, T) {
        let two = T::lit(2.0);
        (self.x + self.w / two, self.y + self.h / two)
    }

    pub fn area(&self) -> T {
        self.w * self.h
    }

    /// Geometric-mean side length, `sqrt(w * h)`.
    pub fn scale(&self) -> T {
        self.area().sqrt()
    }

    pub fn intersection_area(&self, other: &Self) -> T {
        let iw = self.right().min(other.right()) - self.x.max(other.x);
        let ih = self.bottom().min(other.bottom()) - self.y.max(other.y);
        if iw <= T::zero() || ih <= T::zero() {
            T::zero()
        } else {
            iw * ih
        }
    }

    /// Overlap with `other`, or `None` when the two boxes do not intersect.
    pub fn intersection(&self, other: &Self) -> Option<Self> {
        let x1 = self.x.max(other.x);
        let y1 = self.y.max(other.y);
        let x2 = self.right().min(other.right());
        let y2 = self.bottom().min(other.bottom());
        Self::from_corners(x1, y1, x2, y2).ok()
    }

    pub fn translate(&self, dx: T, dy: T) -> Result<Self> {
        Self::new(self.x + dx, self.y + dy, self.w, self.h)
    }

    /// Scales all four coordinates independently along each axis.
    pub fn scale_axes(&self, sx: T, sy: T) -> Result<Self> {
        Self::new(self.x * sx, self.y * sy, self.w * sx, self.h * sy)
    }

    /// Converts the box to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Result<BBox<U>> {
        BBox::new(U::lit(self.x.as_f64()), U::lit(self.y.as_f64()), U::lit(self.w.as_f64()), U::lit(self.h.as_f64()))
    }
}

/// Intersection over union.
pub fn iou<T: Scalar>(a: &BBox<T>, b: &BBox<T>) -> T {
    let inter = a.intersection_area(b);
    if inter <= T::zero() {
        return T::zero();
    }
    let union = a.area() + b.area() - inter;
    (inter / union).min(T::one())
}

/// Intersection over the smaller of the two areas.
pub fn iom<T: Scalar>(a: &BBox<T>, b: &BBox<T>) -> T {
    let inter = a.intersection_area(b);
    if inter <= T::zero() {
        return T::zero();
    }
    (inter / a.area().min(b.area())).min(T::one())
}

/// Regression offsets of a box relative to an anchor: center shifts in units
/// of anchor size and log size ratios.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OffsetQuad<T> {
    pub dx: T,
    pub dy: T,
    pub dw: T,
    pub dh: T,
}

impl<T: Scalar> OffsetQuad<T> {
    pub fn new(dx: T, dy: T, dw: T, dh: T) -> Self {
        Self { dx, dy, dw, dh }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero(), T::zero())
    }

    pub fn to_array(self) -> [T; 4] {
        [self.dx, self.dy, self.dw, self.dh]
    }

    pub fn from_array(a: [T; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Offsets that move `anchor` onto `gt`.
pub fn encode_offsets<T: Scalar>(anchor: &BBox<T>, gt: &BBox<T>) -> Result<OffsetQuad<T>> {
    let (acx, acy) = anchor.center();
    let (gcx, gcy) = gt.center();
    let d = OffsetQuad::new(
        (gcx - acx) / anchor.w(),
        (gcy - acy) / anchor.h(),
        (gt.w() / anchor.w()).ln(),
        (gt.h() / anchor.h()).ln(),
    );
    if d.is_finite() {
        Ok(d)
    } else {
        Err(Error::NonFiniteOffsets)
    }
}

/// Inverse of [`encode_offsets`].
///
/// Extreme `dw`/`dh` can overflow `exp`; the resulting box is then rejected.
pub fn decode_offsets<T: Scalar>(anchor: &BBox<T>, d: &OffsetQuad<T>) -> Result<BBox<T>> {
    let (acx, acy) = anchor.center();
    let cx = acx + d.dx * anchor.w();
    let cy = acy + d.dy * anchor.h();
    let w = anchor.w() * d.dw.exp();
    let h = anchor.h() * d.dh.exp();
    BBox::from_center(cx, cy, w, h)
}
