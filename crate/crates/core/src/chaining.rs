//! Node chaining: the online tracker.
//!
//! Each node holds box pairs for frames `(t, t+1)`. Chaining node `t-1` to
//! node `t` matches the second boxes of node `t-1` against the first boxes of
//! node `t` by IoU and Kuhn–Munkres. Tracklets that miss a match are retained
//! for up to `sigma` frames, competing in later matches with a
//! constant-velocity prediction of their box.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geometry::{iou, BBox};
use crate::postprocess::{filter_confidence, soft_nms, BoxPair};
use crate::scalar::Scalar;
use crate::supervision::GroundTruthFrame;

/// Result of [`km_assign`]: row-to-column and column-to-row assignments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matching {
    pub row_to_col: Vec<Option<usize>>,
    pub col_to_row: Vec<Option<usize>>,
}

impl Matching {
    fn empty(rows: usize, cols: usize) -> Self {
        Self { row_to_col: vec![None; rows], col_to_row: vec![None; cols] }
    }

    /// Matched `(row, col)` pairs in row order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.row_to_col.iter().enumerate().filter_map(|(r, c)| c.map(|c| (r, c)))
    }

    pub fn len(&self) -> usize {
        self.pairs().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sum of matched costs, accumulated in row order.
    pub fn total_cost<T: Scalar>(&self, cost: &[Vec<T>]) -> T {
        self.pairs().fold(T::zero(), |acc, (r, c)| acc + cost[r][c])
    }
}

/// Minimum-cost assignment over the permitted cells of a rectangular matrix.
///
/// Among all matchings that use only permitted cells, returns one of maximum
/// cardinality and, among those, minimum total cost. Rows whose cells are all
/// forbidden come back unmatched.
///
/// Panics if `cost` is ragged or `forbid` has a different shape.
pub fn km_assign<T: Scalar>(cost: &[Vec<T>], forbid: &[Vec<bool>]) -> Matching {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    assert!(cost.iter().all(|r| r.len() == cols), "cost matrix must be rectangular");
    assert!(
        forbid.len() == rows && forbid.iter().all(|r| r.len() == cols),
        "forbid mask must match the cost matrix shape"
    );
    if rows == 0 || cols == 0 {
        return Matching::empty(rows, cols);
    }

    // A forbidden cell costs more than any permitted matching can save, so
    // the solver first minimizes the number of forbidden cells used.
    let mut max_abs = T::zero();
    for (r, row) in cost.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            if !forbid[r][c] {
                max_abs = max_abs.max(v.abs());
            }
        }
    }
    let k = rows.min(cols);
    let big = T::lit((2 * k + 1) as f64) * (max_abs + T::one());

    let transpose = rows > cols;
    let (n, m) = if transpose { (cols, rows) } else { (rows, cols) };
    let cell = |i: usize, j: usize| -> T {
        let (r, c) = if transpose { (j, i) } else { (i, j) };
        if forbid[r][c] {
            big
        } else {
            cost[r][c]
        }
    };
    let assignment = hungarian(n, m, cell);

    let mut out = Matching::empty(rows, cols);
    for (i, j) in assignment.into_iter().enumerate() {
        let (r, c) = if transpose { (j, i) } else { (i, j) };
        if !forbid[r][c] {
            out.row_to_col[r] = Some(c);
            out.col_to_row[c] = Some(r);
        }
    }
    out
}

/// Shortest augmenting path Hungarian method for `n <= m`; returns the column
/// assigned to each row.
fn hungarian<T: Scalar>(n: usize, m: usize, a: impl Fn(usize, usize) -> T) -> Vec<usize> {
    let inf = T::infinity();
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); m + 1];
    // p[j]: row (1-based) holding column j; p[0] is the row being inserted
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = a(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] = u[p[j]] + delta;
                    v[j] = v[j] - delta;
                } else {
                    minv[j] = minv[j] - delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_col = vec![0usize; n];
    for j in 1..=m {
        if p[j] != 0 {
            row_col[p[j] - 1] = j - 1;
        }
    }
    row_col
}

/// Box pairs of one chain node. `t` is the zero-based index of the node's
/// first frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Node<T> {
    pub t: usize,
    pub pairs: Vec<BoxPair<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackState {
    /// Matched at the most recent node.
    Active,
    /// Unmatched for `miss_count` frames, still eligible for matching.
    Retained,
    Terminated,
}

/// A confirmed box of a tracklet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackPoint<T> {
    pub frame: usize,
    pub bbox: BBox<T>,
    pub score: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tracklet<T> {
    pub identity: u64,
    /// Confirmed boxes, strictly increasing in frame.
    pub entries: Vec<TrackPoint<T>>,
    /// Frames since the last confirmed entry.
    pub miss_count: usize,
    /// Per-frame `(x, y, w, h)` deltas from the last two confirmed entries.
    pub velocity: [T; 4],
    pub state: TrackState,
    /// Second box of the last matched pair, i.e. the expected box in the next frame.
    pending: Option<BBox<T>>,
}

impl<T: Scalar> Tracklet<T> {
    fn spawn(identity: u64, t: usize, pair: &BoxPair<T>) -> Self {
        Self {
            identity,
            entries: vec![TrackPoint { frame: t, bbox: pair.first, score: pair.cls_score }],
            miss_count: 0,
            velocity: [T::zero(); 4],
            state: TrackState::Active,
            pending: Some(pair.second),
        }
    }

    /// Builds a tracklet from confirmed boxes, with velocity from the last two.
    pub fn from_entries(identity: u64, entries: Vec<TrackPoint<T>>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyInput("tracklet has no entries"));
        }
        if entries.windows(2).any(|w| w[1].frame <= w[0].frame) {
            return Err(Error::InvalidConfig("tracklet entries must be strictly increasing in frame".into()));
        }
        let mut tr = Self {
            identity,
            entries,
            miss_count: 0,
            velocity: [T::zero(); 4],
            state: TrackState::Active,
            pending: None,
        };
        tr.update_velocity();
        Ok(tr)
    }

    pub fn last(&self) -> Option<&TrackPoint<T>> {
        self.entries.last()
    }

    fn update_velocity(&mut self) {
        let n = self.entries.len();
        self.velocity = if n < 2 {
            [T::zero(); 4]
        } else {
            let (a, b) = (&self.entries[n - 2], &self.entries[n - 1]);
            let dt = T::lit((b.frame - a.frame) as f64);
            [
                (b.bbox.x() - a.bbox.x()) / dt,
                (b.bbox.y() - a.bbox.y()) / dt,
                (b.bbox.w() - a.bbox.w()) / dt,
                (b.bbox.h() - a.bbox.h()) / dt,
            ]
        };
    }

    fn confirm(&mut self, t: usize, pair: &BoxPair<T>) {
        self.entries.push(TrackPoint { frame: t, bbox: pair.first, score: pair.cls_score });
        self.update_velocity();
        self.miss_count = 0;
        self.state = TrackState::Active;
        self.pending = Some(pair.second);
    }
}

/// Constant-velocity prediction `tau` frames past the tracklet's current
/// frame, i.e. `tau + miss_count` frames past its last confirmed box. Width
/// and height are floored at one pixel.
pub fn predict_velocity<T: Scalar>(tr: &Tracklet<T>, tau: usize) -> Result<BBox<T>> {
    let last = tr.last().ok_or(Error::EmptyInput("tracklet has no entries"))?;
    let k = T::lit((tau + tr.miss_count) as f64);
    let [vx, vy, vw, vh] = tr.velocity;
    let b = &last.bbox;
    BBox::new(b.x() + vx * k, b.y() + vy * k, (b.w() + vw * k).max(T::one()), (b.h() + vh * k).max(T::one()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerParams<T> {
    /// Minimum IoU for chaining a box to a tracklet.
    pub iou_match_thresh: T,
    /// Frames an unmatched tracklet is retained.
    pub sigma: usize,
    pub nms_thresh: T,
    pub conf_thresh: T,
    /// Emit linearly interpolated boxes for retained gaps that were bridged.
    pub fill_gaps: bool,
}

impl<T: Scalar> Default for TrackerParams<T> {
    fn default() -> Self {
        Self {
            iou_match_thresh: T::lit(0.5),
            sigma: 10,
            nms_thresh: T::lit(0.7),
            conf_thresh: T::lit(0.4),
            fill_gaps: false,
        }
    }
}

impl<T: Scalar> TrackerParams<T> {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("iou_match_thresh", self.iou_match_thresh),
            ("nms_thresh", self.nms_thresh),
            ("conf_thresh", self.conf_thresh),
        ] {
            if !(v >= T::zero() && v <= T::one()) {
                return Err(Error::InvalidConfig(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

/// A tracked box in the output table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackedBox<T> {
    pub identity: u64,
    pub bbox: BBox<T>,
    pub score: T,
}

/// Per-frame identity → box table produced by the tracker.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectories<T> {
    /// Boxes keyed by zero-based frame, each list sorted by identity.
    pub frames: BTreeMap<usize, Vec<TrackedBox<T>>>,
}

impl<T> Default for Trajectories<T> {
    fn default() -> Self {
        Self { frames: BTreeMap::new() }
    }
}

impl<T: Scalar> Trajectories<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a box, keeping the frame's list sorted by identity. Replaces an
    /// existing box for the same identity and frame.
    pub fn insert(&mut self, frame: usize, tb: TrackedBox<T>) {
        let row = self.frames.entry(frame).or_default();
        match row.binary_search_by_key(&tb.identity, |b| b.identity) {
            Ok(i) => row[i] = tb,
            Err(i) => row.insert(i, tb),
        }
    }

    /// Rows in `(frame, identity)` order.
    pub fn rows(&self) -> impl Iterator<Item = (usize, &TrackedBox<T>)> {
        self.frames.iter().flat_map(|(&f, row)| row.iter().map(move |b| (f, b)))
    }

    pub fn len(&self) -> usize {
        self.frames.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn identities(&self) -> Vec<u64> {
        let mut ids: Vec<u64> = self.rows().map(|(_, b)| b.identity).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Dense per-frame view over `0..frame_count`, for evaluation.
    pub fn to_frames(&self, frame_count: usize) -> Result<Vec<GroundTruthFrame<T>>> {
        if let Some((&last, _)) = self.frames.last_key_value() {
            if last >= frame_count {
                return Err(Error::FrameRangeMismatch { gt: frame_count, hyp: last + 1 });
            }
        }
        (0..frame_count)
            .map(|f| {
                let row = self.frames.get(&f).map(Vec::as_slice).unwrap_or_default();
                GroundTruthFrame::from_entries(f, row.iter().map(|b| (b.identity, b.bbox)))
            })
            .collect()
    }
}

/// Online tracker state: folds chain nodes one at a time.
#[derive(Debug, Clone)]
pub struct Tracker<T> {
    params: TrackerParams<T>,
    tracklets: Vec<Tracklet<T>>,
    next_identity: u64,
    next_frame: Option<usize>,
}

impl<T: Scalar> Tracker<T> {
    pub fn new(params: TrackerParams<T>) -> Result<Self> {
        params.validate()?;
        Ok(Self { params, tracklets: Vec::new(), next_identity: 1, next_frame: None })
    }

    pub fn tracklets(&self) -> &[Tracklet<T>] {
        &self.tracklets
    }

    /// Chains `node` onto the current tracklets. Pairs are used as given; any
    /// post-processing happens before this call. Frames skipped since the
    /// previous node count as frames without detections.
    pub fn chain_node(&mut self, node: &Node<T>) -> Result<()> {
        if let Some(next) = self.next_frame {
            if node.t < next {
                return Err(Error::InvalidConfig(format!("node {} arrives after frame {}", node.t, next - 1)));
            }
            for t in next..node.t {
                self.step(t, &[]);
            }
        }
        self.step(node.t, &node.pairs);
        Ok(())
    }

    fn step(&mut self, t: usize, pairs: &[BoxPair<T>]) {
        // candidates: active tracklets offer the second box of their last
        // pair, retained ones a constant-velocity prediction
        let mut cand_idx = Vec::new();
        let mut cand_box = Vec::new();
        for (i, tr) in self.tracklets.iter().enumerate() {
            let b = match tr.state {
                TrackState::Active => tr.pending,
                TrackState::Retained => predict_velocity(tr, 1).ok(),
                TrackState::Terminated => None,
            };
            if let Some(b) = b {
                cand_idx.push(i);
                cand_box.push(b);
            }
        }

        let thresh = self.params.iou_match_thresh;
        let mut cost = Vec::with_capacity(cand_box.len());
        let mut forbid = Vec::with_capacity(cand_box.len());
        for cb in &cand_box {
            let ious: Vec<T> = pairs.iter().map(|p| iou(cb, &p.first)).collect();
            forbid.push(ious.iter().map(|&v| v < thresh).collect::<Vec<_>>());
            cost.push(ious.into_iter().map(|v| T::one() - v).collect::<Vec<_>>());
        }
        let matching = km_assign(&cost, &forbid);

        for (row, &ti) in cand_idx.iter().enumerate() {
            let tr = &mut self.tracklets[ti];
            match matching.row_to_col[row] {
                Some(col) => tr.confirm(t, &pairs[col]),
                None => {
                    tr.miss_count += 1;
                    tr.pending = None;
                    tr.state = if tr.miss_count > self.params.sigma { TrackState::Terminated } else { TrackState::Retained };
                }
            }
        }
        for (col, pair) in pairs.iter().enumerate() {
            if matching.col_to_row.get(col).copied().flatten().is_none() {
                self.tracklets.push(Tracklet::spawn(self.next_identity, t, pair));
                self.next_identity += 1;
            }
        }
        self.next_frame = Some(t + 1);
    }

    /// Confirmed boxes of every tracklet, plus interpolated gap boxes when
    /// `fill_gaps` is set. Retention predictions are never emitted.
    pub fn trajectories(&self) -> Trajectories<T> {
        let mut out = Trajectories::new();
        for tr in &self.tracklets {
            for (k, e) in tr.entries.iter().enumerate() {
                if self.params.fill_gaps && k > 0 {
                    let prev = &tr.entries[k - 1];
                    for f in prev.frame + 1..e.frame {
                        let a = T::lit((f - prev.frame) as f64 / (e.frame - prev.frame) as f64);
                        let lerp = |p: T, q: T| p + (q - p) * a;
                        if let Ok(bbox) = BBox::new(
                            lerp(prev.bbox.x(), e.bbox.x()),
                            lerp(prev.bbox.y(), e.bbox.y()),
                            lerp(prev.bbox.w(), e.bbox.w()),
                            lerp(prev.bbox.h(), e.bbox.h()),
                        ) {
                            out.insert(f, TrackedBox { identity: tr.identity, bbox, score: prev.score.min(e.score) });
                        }
                    }
                }
                out.insert(e.frame, TrackedBox { identity: tr.identity, bbox: e.bbox, score: e.score });
            }
        }
        out
    }
}

/// Soft-NMS followed by confidence filtering, as applied to every node.
pub fn postprocess_node<T: Scalar>(node: &Node<T>, p: &TrackerParams<T>) -> Node<T> {
    Node { t: node.t, pairs: filter_confidence(&soft_nms(&node.pairs, p.nms_thresh), p.conf_thresh) }
}

/// Tracks a whole sequence of nodes given in ascending frame order.
pub fn run_tracker<T: Scalar>(nodes: &[Node<T>], p: &TrackerParams<T>) -> Result<Trajectories<T>> {
    if nodes.is_empty() {
        return Err(Error::EmptyInput("tracker needs at least one node"));
    }
    let mut tracker = Tracker::new(*p)?;
    for node in nodes {
        tracker.chain_node(&postprocess_node(node, p))?;
    }
    Ok(tracker.trajectories())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(x: f64, y: f64) -> BBox<f64> {
        BBox::new(x, y, 20.0, 58.0).unwrap()
    }

    fn pair(a: BBox<f64>, b: BBox<f64>) -> BoxPair<f64> {
        BoxPair::new(a, b, 1.0, 1.0).unwrap()
    }

    fn no_forbid(r: usize, c: usize) -> Vec<Vec<bool>> {
        vec![vec![false; c]; r]
    }

    #[test]
    fn km_small_cases() {
        let m = km_assign(&[vec![3.5]], &no_forbid(1, 1));
        assert_eq!(m.row_to_col, vec![Some(0)]);
        assert_eq!(m.total_cost(&[vec![3.5]]), 3.5);

        let cost = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        let m = km_assign(&cost, &no_forbid(2, 2));
        assert_eq!(m.pairs().collect::<Vec<_>>(), vec![(0, 1), (1, 0)]);
        assert_eq!(m.total_cost(&cost), 4.0);
    }

    #[test]
    fn km_rectangular_and_forbidden() {
        let cost = vec![vec![5.0, 1.0, 3.0]];
        assert_eq!(km_assign(&cost, &no_forbid(1, 3)).row_to_col, vec![Some(1)]);
        let tall = vec![vec![5.0], vec![1.0], vec![3.0]];
        assert_eq!(km_assign(&tall, &no_forbid(3, 1)).col_to_row, vec![Some(1)]);

        let forbid = vec![vec![true, true], vec![false, true]];
        let m = km_assign(&[vec![0.0, 0.0], vec![9.0, 0.0]], &forbid);
        assert_eq!(m.row_to_col, vec![None, Some(0)]);

        let m = km_assign::<f64>(&[vec![1.0]], &[vec![true]]);
        assert!(m.is_empty());
        assert!(km_assign::<f64>(&[], &[]).is_empty());
    }

    #[test]
    fn km_prefers_cardinality() {
        // taking the cheap (0,0) cell would leave row 1 unmatched
        let cost = vec![vec![0.0, 0.9], vec![0.8, 5.0]];
        let forbid = vec![vec![false, false], vec![false, true]];
        let m = km_assign(&cost, &forbid);
        assert_eq!(m.row_to_col, vec![Some(1), Some(0)]);
    }

    #[test]
    fn km_in_f32() {
        let cost: Vec<Vec<f32>> = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert_eq!(km_assign(&cost, &no_forbid(2, 2)).total_cost(&cost), 4.0);
    }

    #[test]
    fn prediction_examples() {
        let p = |f, x| TrackPoint { frame: f, bbox: bx(x, 5.0), score: 1.0 };
        let single = Tracklet::from_entries(1, vec![p(3, 7.0)]).unwrap();
        assert_eq!(predict_velocity(&single, 4).unwrap(), bx(7.0, 5.0));

        let moving = Tracklet::from_entries(1, vec![p(0, 0.0), p(1, 10.0)]).unwrap();
        assert_eq!(predict_velocity(&moving, 2).unwrap().x(), 30.0);

        let still = Tracklet::from_entries(1, vec![p(0, 4.0), p(1, 4.0)]).unwrap();
        assert_eq!(predict_velocity(&still, 5).unwrap(), bx(4.0, 5.0));

        assert!(Tracklet::<f64>::from_entries(1, vec![]).is_err());
    }

    #[test]
    fn prediction_floors_size() {
        let a = TrackPoint { frame: 0, bbox: BBox::new(0.0, 0.0, 10.0, 10.0).unwrap(), score: 1.0 };
        let b = TrackPoint { frame: 1, bbox: BBox::new(0.0, 0.0, 4.0, 4.0).unwrap(), score: 1.0 };
        let tr = Tracklet::from_entries(1, vec![a, b]).unwrap();
        let pred = predict_velocity(&tr, 3).unwrap();
        assert_eq!((pred.w(), pred.h()), (1.0, 1.0));
    }

    #[test]
    fn exact_pairs_continue_identities() {
        let mut tr = Tracker::new(TrackerParams::default()).unwrap();
        let a = [bx(0.0, 0.0), bx(200.0, 0.0), bx(400.0, 0.0)];
        let b = [bx(2.0, 0.0), bx(202.0, 0.0), bx(402.0, 0.0)];
        let c = [bx(4.0, 0.0), bx(204.0, 0.0), bx(404.0, 0.0)];
        tr.chain_node(&Node { t: 0, pairs: (0..3).map(|i| pair(a[i], b[i])).collect() }).unwrap();
        tr.chain_node(&Node { t: 1, pairs: (0..3).map(|i| pair(b[i], c[i])).collect() }).unwrap();
        assert_eq!(tr.tracklets().len(), 3);
        assert!(tr.tracklets().iter().all(|t| t.entries.len() == 2 && t.state == TrackState::Active));
    }

    #[test]
    fn disjoint_boxes_spawn_new_identities() {
        let mut tr = Tracker::new(TrackerParams::default()).unwrap();
        tr.chain_node(&Node { t: 0, pairs: vec![pair(bx(0.0, 0.0), bx(0.0, 0.0))] }).unwrap();
        tr.chain_node(&Node { t: 1, pairs: vec![pair(bx(500.0, 0.0), bx(500.0, 0.0))] }).unwrap();
        let ts = tr.tracklets();
        assert_eq!(ts.len(), 2);
        assert_eq!(ts[0].state, TrackState::Retained);
        assert_eq!(ts[0].miss_count, 1);
        assert_eq!(ts[1].identity, 2);
    }

    #[test]
    fn one_missed_detection() {
        // three targets; target 2 is missed at node 1, and no false positive exists
        let xs = [0.0, 200.0, 400.0];
        let node = |t: usize, skip: Option<usize>| Node {
            t,
            pairs: (0..3).filter(|&i| Some(i) != skip).map(|i| pair(bx(xs[i], 0.0), bx(xs[i], 0.0))).collect(),
        };
        let mut tr = Tracker::new(TrackerParams::default()).unwrap();
        tr.chain_node(&node(0, None)).unwrap();
        tr.chain_node(&node(1, Some(2))).unwrap();
        let ts = tr.tracklets();
        assert_eq!(ts.len(), 3);
        assert_eq!(ts.iter().filter(|t| t.state == TrackState::Active).count(), 2);
        assert_eq!(ts[2].state, TrackState::Retained);
    }

    #[test]
    fn sigma_zero_terminates_on_first_miss() {
        let p = TrackerParams { sigma: 0, ..TrackerParams::default() };
        let mut tr = Tracker::new(p).unwrap();
        tr.chain_node(&Node { t: 0, pairs: vec![pair(bx(0.0, 0.0), bx(0.0, 0.0))] }).unwrap();
        tr.chain_node(&Node { t: 1, pairs: vec![] }).unwrap();
        assert_eq!(tr.tracklets()[0].state, TrackState::Terminated);
    }

    #[test]
    fn single_node_sequence() {
        let nodes = [Node { t: 0, pairs: vec![pair(bx(0.0, 0.0), bx(0.0, 0.0)), pair(bx(300.0, 0.0), bx(300.0, 0.0))] }];
        let out = run_tracker(&nodes, &TrackerParams::default()).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out.identities(), vec![1, 2]);
        assert!(run_tracker::<f64>(&[], &TrackerParams::default()).is_err());
    }

    #[test]
    fn out_of_order_nodes_rejected() {
        let mut tr = Tracker::new(TrackerParams::<f64>::default()).unwrap();
        tr.chain_node(&Node { t: 3, pairs: vec![] }).unwrap();
        assert!(tr.chain_node(&Node { t: 2, pairs: vec![] }).is_err());
    }

    #[test]
    fn fill_gaps_interpolates() {
        let node = |t: usize, x: f64| Node { t, pairs: vec![pair(bx(x, 0.0), bx(x + 1.0, 0.0))] };
        let nodes = [node(0, 0.0), node(1, 1.0), node(4, 4.0)];
        let plain = run_tracker(&nodes, &TrackerParams::default()).unwrap();
        assert_eq!(plain.len(), 3);
        let filled = run_tracker(&nodes, &TrackerParams { fill_gaps: true, ..TrackerParams::default() }).unwrap();
        assert_eq!(filled.len(), 5);
        assert_eq!(filled.frames[&2][0].bbox.x(), 2.0);
        assert_eq!(filled.identities(), vec![1]);
    }

    #[test]
    fn invalid_params_rejected() {
        let p = TrackerParams { iou_match_thresh: 1.5, ..TrackerParams::<f64>::default() };
        assert!(Tracker::new(p).is_err());
    }
}
