//! CLEAR-MOT and identity metrics over per-frame box tables.
//!
//! Sequences are dense slices of frames indexed from zero; the ground truth
//! and hypothesis slices must have the same length. Boxes correspond when
//! their IoU is at least the matching threshold.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::chaining::km_assign;
use crate::error::{Error, Result};
use crate::geometry::{iou, BBox};
use crate::scalar::Scalar;
use crate::supervision::GroundTruthFrame;

/// Coverage at or above which a ground-truth trajectory is mostly tracked.
pub const MOSTLY_TRACKED: f64 = 0.8;
/// Coverage at or below which a ground-truth trajectory is mostly lost.
pub const MOSTLY_LOST: f64 = 0.2;

/// Per-sequence (or aggregate) scores in the column set of MOTChallenge
/// result tables. Percentages are in `[0, 100]` except MOTA, which can be
/// negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClearReport {
    pub name: String,
    pub mota: f64,
    pub idf1: f64,
    pub motp: f64,
    pub mt: f64,
    pub ml: f64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub ids: u64,
    /// Ground-truth boxes evaluated.
    pub gt_count: u64,
    /// Ground-truth trajectories (distinct identities).
    pub trajectories: u64,
}

impl ClearReport {
    /// Matched ground-truth boxes.
    pub fn matches(&self) -> u64 {
        self.gt_count.saturating_sub(self.fn_)
    }

    /// Hypothesis boxes: matched plus false positives.
    pub fn hyp_count(&self) -> u64 {
        self.matches() + self.fp
    }

    /// `100 * (1 - (FP + FN + IDS) / GT)`.
    pub fn mota_from_counts(fp: u64, fn_: u64, ids: u64, gt_count: u64) -> f64 {
        100.0 * (1.0 - (fp + fn_ + ids) as f64 / gt_count.max(1) as f64)
    }
}

/// CLEAR-MOT bookkeeping for one sequence.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClearMot {
    pub fp: u64,
    pub fn_: u64,
    pub ids: u64,
    pub gt_count: u64,
    pub matches: u64,
    /// Sum of IoU over matched pairs.
    pub iou_sum: f64,
    /// Per ground-truth identity: (frames present, frames matched).
    pub coverage: BTreeMap<u64, (u64, u64)>,
}

impl ClearMot {
    pub fn mota(&self) -> f64 {
        ClearReport::mota_from_counts(self.fp, self.fn_, self.ids, self.gt_count)
    }

    /// Mean IoU of matched pairs, as a percentage.
    pub fn motp(&self) -> f64 {
        if self.matches == 0 {
            0.0
        } else {
            100.0 * self.iou_sum / self.matches as f64
        }
    }
}

fn check_range<T>(gt: &[GroundTruthFrame<T>], hyp: &[GroundTruthFrame<T>]) -> Result<()> {
    if gt.len() != hyp.len() {
        return Err(Error::FrameRangeMismatch { gt: gt.len(), hyp: hyp.len() });
    }
    Ok(())
}

/// Boxes of a frame ordered by identity, so results do not depend on row order.
fn sorted<T: Scalar>(f: &GroundTruthFrame<T>) -> Vec<(u64, BBox<T>)> {
    let mut v: Vec<(u64, BBox<T>)> = f.iter().map(|(id, b)| (id, *b)).collect();
    v.sort_by_key(|e| e.0);
    v
}

/// Frame-by-frame CLEAR-MOT matching.
///
/// Correspondences from the previous frame are kept while their IoU stays at
/// or above `iou_thresh`; the remaining boxes are matched by Kuhn–Munkres on
/// `1 - IoU` with sub-threshold cells forbidden. An identity switch is counted
/// whenever a ground-truth target is matched to a different hypothesis than
/// at its most recent match, including across gaps.
pub fn clear_mot<T: Scalar>(
    gt: &[GroundTruthFrame<T>],
    hyp: &[GroundTruthFrame<T>],
    iou_thresh: T,
) -> Result<ClearMot> {
    check_range(gt, hyp)?;
    let mut out = ClearMot::default();
    let mut prev: HashMap<u64, u64> = HashMap::new();
    let mut last: HashMap<u64, u64> = HashMap::new();

    for (gf, hf) in gt.iter().zip(hyp) {
        let g = sorted(gf);
        let h = sorted(hf);
        let mut g_used = vec![false; g.len()];
        let mut h_used = vec![false; h.len()];
        let mut matched: Vec<(usize, usize, T)> = Vec::new();

        for (gi, (gid, gb)) in g.iter().enumerate() {
            let Some(&hid) = prev.get(gid) else { continue };
            let Some(hi) = h.iter().position(|(id, _)| *id == hid) else { continue };
            let v = iou(gb, &h[hi].1);
            if !h_used[hi] && v >= iou_thresh {
                g_used[gi] = true;
                h_used[hi] = true;
                matched.push((gi, hi, v));
            }
        }

        let g_free: Vec<usize> = (0..g.len()).filter(|&i| !g_used[i]).collect();
        let h_free: Vec<usize> = (0..h.len()).filter(|&i| !h_used[i]).collect();
        let ious: Vec<Vec<T>> =
            g_free.iter().map(|&gi| h_free.iter().map(|&hi| iou(&g[gi].1, &h[hi].1)).collect()).collect();
        let cost: Vec<Vec<T>> = ious.iter().map(|r| r.iter().map(|&v| T::one() - v).collect()).collect();
        let forbid: Vec<Vec<bool>> = ious.iter().map(|r| r.iter().map(|&v| v < iou_thresh).collect()).collect();
        for (r, c) in km_assign(&cost, &forbid).pairs() {
            matched.push((g_free[r], h_free[c], ious[r][c]));
        }

        prev.clear();
        for &(gi, hi, v) in &matched {
            let (gid, hid) = (g[gi].0, h[hi].0);
            if last.get(&gid).is_some_and(|&old| old != hid) {
                out.ids += 1;
            }
            last.insert(gid, hid);
            prev.insert(gid, hid);
            out.iou_sum += v.as_f64();
            out.coverage.entry(gid).or_default().1 += 1;
        }
        for (gid, _) in &g {
            out.coverage.entry(*gid).or_default().0 += 1;
        }
        out.gt_count += g.len() as u64;
        out.matches += matched.len() as u64;
        out.fn_ += (g.len() - matched.len()) as u64;
        out.fp += (h.len() - matched.len()) as u64;
    }
    Ok(out)
}

/// Identity-level precision/recall counts and IDF1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdScores {
    pub idtp: u64,
    pub idfp: u64,
    pub idfn: u64,
    pub idf1: f64,
}

/// IDF1 from a global one-to-one matching of ground-truth and hypothesis
/// trajectories that minimizes the number of unmatched boxes.
pub fn idf1<T: Scalar>(gt: &[GroundTruthFrame<T>], hyp: &[GroundTruthFrame<T>], iou_thresh: T) -> Result<IdScores> {
    check_range(gt, hyp)?;
    let mut g_len: BTreeMap<u64, u64> = BTreeMap::new();
    let mut h_len: BTreeMap<u64, u64> = BTreeMap::new();
    let mut overlap: HashMap<(u64, u64), u64> = HashMap::new();
    for (gf, hf) in gt.iter().zip(hyp) {
        for (gid, gb) in gf.iter() {
            *g_len.entry(gid).or_default() += 1;
            for (hid, hb) in hf.iter() {
                if iou(gb, hb) >= iou_thresh {
                    *overlap.entry((gid, hid)).or_default() += 1;
                }
            }
        }
        for (hid, _) in hf.iter() {
            *h_len.entry(hid).or_default() += 1;
        }
    }
    let g_ids: Vec<(u64, u64)> = g_len.into_iter().collect();
    let h_ids: Vec<(u64, u64)> = h_len.into_iter().collect();
    let total_g: u64 = g_ids.iter().map(|e| e.1).sum();
    let total_h: u64 = h_ids.iter().map(|e| e.1).sum();

    // Square problem over real and dummy trajectories: pairing g with h costs
    // the boxes they do not share; pairing either with its own dummy costs its
    // full length; dummy-dummy pairs are free.
    let (ng, nh) = (g_ids.len(), h_ids.len());
    let n = ng + nh;
    let mut cost = vec![vec![0.0f64; n]; n];
    let mut forbid = vec![vec![false; n]; n];
    for (i, &(gid, gl)) in g_ids.iter().enumerate() {
        for (j, &(hid, hl)) in h_ids.iter().enumerate() {
            let shared = overlap.get(&(gid, hid)).copied().unwrap_or(0);
            cost[i][j] = (gl + hl - 2 * shared) as f64;
        }
        for j in 0..ng {
            cost[i][nh + j] = gl as f64;
            forbid[i][nh + j] = j != i;
        }
    }
    for (i, &(_, hl)) in h_ids.iter().enumerate() {
        for j in 0..nh {
            cost[ng + i][j] = hl as f64;
            forbid[ng + i][j] = j != i;
        }
    }
    let m = km_assign(&cost, &forbid);
    let idtp: u64 = m
        .pairs()
        .filter(|&(r, c)| r < ng && c < nh)
        .map(|(r, c)| overlap.get(&(g_ids[r].0, h_ids[c].0)).copied().unwrap_or(0))
        .sum();
    let idfn = total_g - idtp;
    let idfp = total_h - idtp;
    let denom = total_g + total_h;
    let idf1 = if denom == 0 { 100.0 } else { 100.0 * 2.0 * idtp as f64 / denom as f64 };
    Ok(IdScores { idtp, idfp, idfn, idf1 })
}

/// Mostly-tracked and mostly-lost shares of ground-truth trajectories, in
/// percent, with the trajectory count.
pub fn mt_ml_from(c: &ClearMot) -> (f64, f64, u64) {
    let n = c.coverage.len() as u64;
    if n == 0 {
        return (0.0, 0.0, 0);
    }
    let mut mt = 0u64;
    let mut ml = 0u64;
    for &(present, matched) in c.coverage.values() {
        let cov = matched as f64 / present as f64;
        if cov >= MOSTLY_TRACKED {
            mt += 1;
        }
        if cov <= MOSTLY_LOST {
            ml += 1;
        }
    }
    (100.0 * mt as f64 / n as f64, 100.0 * ml as f64 / n as f64, n)
}

/// Mostly-tracked and mostly-lost percentages under CLEAR-MOT matching.
pub fn mt_ml<T: Scalar>(gt: &[GroundTruthFrame<T>], hyp: &[GroundTruthFrame<T>], iou_thresh: T) -> Result<(f64, f64)> {
    let c = clear_mot(gt, hyp, iou_thresh)?;
    let (mt, ml, _) = mt_ml_from(&c);
    Ok((mt, ml))
}

/// Full report for one sequence.
pub fn evaluate<T: Scalar>(
    name: &str,
    gt: &[GroundTruthFrame<T>],
    hyp: &[GroundTruthFrame<T>],
    iou_thresh: T,
) -> Result<ClearReport> {
    let c = clear_mot(gt, hyp, iou_thresh)?;
    let id = idf1(gt, hyp, iou_thresh)?;
    let (mt, ml, trajectories) = mt_ml_from(&c);
    Ok(ClearReport {
        name: name.to_string(),
        mota: c.mota(),
        idf1: id.idf1,
        motp: c.motp(),
        mt,
        ml,
        fp: c.fp,
        fn_: c.fn_,
        ids: c.ids,
        gt_count: c.gt_count,
        trajectories,
    })
}

fn weighted(reports: &[ClearReport], value: impl Fn(&ClearReport) -> f64, weight: impl Fn(&ClearReport) -> u64) -> f64 {
    let total: u64 = reports.iter().map(&weight).sum();
    if total == 0 {
        return 0.0;
    }
    reports.iter().map(|r| value(r) * weight(r) as f64).sum::<f64>() / total as f64
}

/// Totals row over several sequences.
///
/// Counts are summed and MOTA is recomputed from them. MOTP is weighted by
/// matched boxes, IDF1 by ground-truth plus hypothesis boxes (its
/// denominator), MT and ML by trajectory count.
pub fn aggregate(reports: &[ClearReport]) -> Result<ClearReport> {
    if reports.is_empty() {
        return Err(Error::EmptyInput("nothing to aggregate"));
    }
    let fp = reports.iter().map(|r| r.fp).sum();
    let fn_ = reports.iter().map(|r| r.fn_).sum();
    let ids = reports.iter().map(|r| r.ids).sum();
    let gt_count = reports.iter().map(|r| r.gt_count).sum();
    Ok(ClearReport {
        name: "Total".to_string(),
        mota: ClearReport::mota_from_counts(fp, fn_, ids, gt_count),
        idf1: weighted(reports, |r| r.idf1, |r| r.gt_count + r.hyp_count()),
        motp: weighted(reports, |r| r.motp, ClearReport::matches),
        mt: weighted(reports, |r| r.mt, |r| r.trajectories),
        ml: weighted(reports, |r| r.ml, |r| r.trajectories),
        fp,
        fn_,
        ids,
        gt_count,
        trajectories: reports.iter().map(|r| r.trajectories).sum(),
    })
}

/// Plain-text table in the column order MOTA, IDF1, MOTP, MT, ML, FP, FN, IDS.
pub fn format_table(rows: &[ClearReport]) -> String {
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max("Sequence".len());
    let mut s = format!(
        "{:<width$} {:>6} {:>6} {:>6} {:>7} {:>7} {:>8} {:>8} {:>6}\n",
        "Sequence", "MOTA", "IDF1", "MOTP", "MT", "ML", "FP", "FN", "IDS"
    );
    for r in rows {
        s.push_str(&format!(
            "{:<width$} {:>6.1} {:>6.1} {:>6.1} {:>6.1}% {:>6.1}% {:>8} {:>8} {:>6}\n",
            r.name, r.mota, r.idf1, r.motp, r.mt, r.ml, r.fp, r.fn_, r.ids
        ));
    }
    s
}
