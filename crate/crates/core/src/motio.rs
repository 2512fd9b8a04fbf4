//! Text formats: MOTChallenge ground truth and results, `seqinfo.ini`, the
//! box-pair interchange CSV, and evaluation report CSV.
//!
//! Frames are 1-based in every file and 0-based everywhere else; the
//! conversion happens only here. Files are UTF-8 with LF line endings and no
//! header rows (the report CSV excepted). Parsers reject malformed input with
//! the offending line number.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::chaining::{Node, TrackedBox, Trajectories};
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::metrics::ClearReport;
use crate::postprocess::BoxPair;
use crate::supervision::GroundTruthFrame;

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceInfo {
    pub name: String,
    pub frame_count: usize,
    pub image_w: u32,
    pub image_h: u32,
    pub frame_rate: f64,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes `contents`, creating parent directories as needed.
pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Non-empty lines with their 1-based line numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty())
}

struct Row<'a> {
    path: &'a Path,
    line: usize,
    fields: Vec<&'a str>,
}

impl<'a> Row<'a> {
    fn new(path: &'a Path, line: usize, text: &'a str, min_fields: usize) -> Result<Self> {
        let fields: Vec<&str> = text.split(',').map(str::trim).collect();
        if fields.len() < min_fields {
            return Err(Error::parse(path, line, format!("expected at least {min_fields} fields, got {}", fields.len())));
        }
        Ok(Self { path, line, fields })
    }

    fn f64(&self, i: usize, what: &str) -> Result<f64> {
        let v: f64 = self.fields[i]
            .parse()
            .map_err(|_| Error::parse(self.path, self.line, format!("{what}: `{}` is not a number", self.fields[i])))?;
        if !v.is_finite() {
            return Err(Error::parse(self.path, self.line, format!("{what} must be finite")));
        }
        Ok(v)
    }

    fn int(&self, i: usize, what: &str) -> Result<i64> {
        let v = self.f64(i, what)?;
        if v.fract() != 0.0 {
            return Err(Error::parse(self.path, self.line, format!("{what}: `{}` is not an integer", self.fields[i])));
        }
        Ok(v as i64)
    }

    /// 1-based frame field converted to a 0-based index.
    fn frame(&self, i: usize) -> Result<usize> {
        let f = self.int(i, "frame")?;
        if f < 1 {
            return Err(Error::parse(self.path, self.line, format!("frame must be >= 1, got {f}")));
        }
        Ok(f as usize - 1)
    }

    fn identity(&self, i: usize) -> Result<u64> {
        let id = self.int(i, "id")?;
        u64::try_from(id).map_err(|_| Error::parse(self.path, self.line, format!("id must be non-negative, got {id}")))
    }

    fn bbox(&self, i: usize) -> Result<BBox<f64>> {
        let (x, y, w, h) = (self.f64(i, "x")?, self.f64(i + 1, "y")?, self.f64(i + 2, "w")?, self.f64(i + 3, "h")?);
        BBox::new(x, y, w, h)
            .map_err(|_| Error::parse(self.path, self.line, format!("box width and height must be positive, got {w}x{h}")))
    }

    fn score(&self, i: usize, what: &str) -> Result<f64> {
        let v = self.f64(i, what)?;
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::parse(self.path, self.line, format!("{what} must lie in [0, 1], got {v}")));
        }
        Ok(v)
    }
}

/// Groups `(frame, id, box, vis)` rows into dense frames `0..=max_frame`,
/// sorted by identity within each frame.
fn group_frames(path: &Path, mut rows: Vec<(usize, u64, BBox<f64>, f64, usize)>) -> Result<Vec<GroundTruthFrame<f64>>> {
    rows.sort_by_key(|r| (r.0, r.1));
    let count = rows.last().map_or(0, |r| r.0 + 1);
    let mut frames: Vec<GroundTruthFrame<f64>> = (0..count).map(GroundTruthFrame::empty).collect();
    for (f, id, b, vis, line) in rows {
        let fr = &mut frames[f];
        if fr.identities.last() == Some(&id) {
            return Err(Error::parse(path, line, format!("identity {id} appears twice in frame {}", f + 1)));
        }
        fr.boxes.push(b);
        fr.identities.push(id);
        fr.visibilities.push(vis);
    }
    Ok(frames)
}

/// Parses `frame,id,x,y,w,h,conf,class,visibility` rows, keeping boxes with
/// visibility strictly above `min_visibility`. Returns dense frames up to the
/// last frame that has a kept row.
pub fn parse_gt(path: &Path, min_visibility: f64) -> Result<Vec<GroundTruthFrame<f64>>> {
    parse_gt_str(path, &read(path)?, min_visibility)
}

pub fn parse_gt_str(path: &Path, text: &str, min_visibility: f64) -> Result<Vec<GroundTruthFrame<f64>>> {
    let mut rows = Vec::new();
    for (line, l) in lines(text) {
        let row = Row::new(path, line, l, 9)?;
        let frame = row.frame(0)?;
        let id = row.identity(1)?;
        let b = row.bbox(2)?;
        let vis = row.f64(8, "visibility")?;
        if vis > min_visibility {
            rows.push((frame, id, b, vis, line));
        }
    }
    group_frames(path, rows)
}

/// Ground truth rows with confidence 1, class 1 and the stored visibility.
pub fn format_gt(frames: &[GroundTruthFrame<f64>]) -> String {
    let mut s = String::new();
    for f in frames {
        let mut rows: Vec<usize> = (0..f.len()).collect();
        rows.sort_by_key(|&i| f.identities[i]);
        for i in rows {
            let b = &f.boxes[i];
            let _ = writeln!(
                s,
                "{},{},{:.2},{:.2},{:.2},{:.2},1,1,{:.2}",
                f.frame + 1,
                f.identities[i],
                b.x(),
                b.y(),
                b.w(),
                b.h(),
                f.visibilities[i]
            );
        }
    }
    s
}

/// Parses a results file, `frame,id,x,y,w,h,conf[,...]`.
pub fn parse_results(path: &Path) -> Result<Trajectories<f64>> {
    parse_results_str(path, &read(path)?)
}

pub fn parse_results_str(path: &Path, text: &str) -> Result<Trajectories<f64>> {
    let mut out = Trajectories::new();
    for (line, l) in lines(text) {
        let row = Row::new(path, line, l, 7)?;
        let frame = row.frame(0)?;
        let identity = row.identity(1)?;
        let bbox = row.bbox(2)?;
        let score = row.f64(6, "conf")?;
        if out.frames.get(&frame).is_some_and(|r| r.iter().any(|b| b.identity == identity)) {
            return Err(Error::parse(path, line, format!("identity {identity} appears twice in frame {}", frame + 1)));
        }
        out.insert(frame, TrackedBox { identity, bbox, score });
    }
    Ok(out)
}

/// Results rows `frame,id,x,y,w,h,conf,-1,-1,-1` sorted by (frame, id).
pub fn format_results(traj: &Trajectories<f64>) -> String {
    let mut s = String::new();
    for (f, b) in traj.rows() {
        let _ = writeln!(
            s,
            "{},{},{:.2},{:.2},{:.2},{:.2},{:.2},-1,-1,-1",
            f + 1,
            b.identity,
            b.bbox.x(),
            b.bbox.y(),
            b.bbox.w(),
            b.bbox.h(),
            b.score
        );
    }
    s
}

pub fn write_results(path: &Path, traj: &Trajectories<f64>) -> Result<()> {
    write_file(path, &format_results(traj))
}

/// Parses `t,x1,y1,w1,h1,x2,y2,w2,h2,cls_score,id_score` rows into nodes,
/// ascending in `t`. Frames without rows produce no node.
pub fn parse_pairs(path: &Path) -> Result<Vec<Node<f64>>> {
    parse_pairs_str(path, &read(path)?)
}

pub fn parse_pairs_str(path: &Path, text: &str) -> Result<Vec<Node<f64>>> {
    let mut rows: Vec<(usize, BoxPair<f64>)> = Vec::new();
    for (line, l) in lines(text) {
        let row = Row::new(path, line, l, 11)?;
        let t = row.frame(0)?;
        let first = row.bbox(1)?;
        let second = row.bbox(5)?;
        let cls = row.score(9, "cls_score")?;
        let id = row.score(10, "id_score")?;
        rows.push((t, BoxPair { first, second, cls_score: cls, id_score: id }));
    }
    // stable: pairs keep file order within a node
    rows.sort_by_key(|r| r.0);
    let mut nodes: Vec<Node<f64>> = Vec::new();
    for (t, pair) in rows {
        match nodes.last_mut() {
            Some(n) if n.t == t => n.pairs.push(pair),
            _ => nodes.push(Node { t, pairs: vec![pair] }),
        }
    }
    Ok(nodes)
}

pub fn format_pairs(nodes: &[Node<f64>]) -> String {
    let mut s = String::new();
    for n in nodes {
        for p in &n.pairs {
            let (a, b) = (&p.first, &p.second);
            let _ = writeln!(
                s,
                "{},{:.2},{:.2},{:.2},{:.2},{:.2},{:.2},{:.2},{:.2},{:.6},{:.6}",
                n.t + 1,
                a.x(),
                a.y(),
                a.w(),
                a.h(),
                b.x(),
                b.y(),
                b.w(),
                b.h(),
                p.cls_score,
                p.id_score
            );
        }
    }
    s
}

/// Parses the `[Sequence]` section of a `seqinfo.ini`.
pub fn parse_seqinfo(path: &Path) -> Result<SequenceInfo> {
    parse_seqinfo_str(path, &read(path)?)
}

pub fn parse_seqinfo_str(path: &Path, text: &str) -> Result<SequenceInfo> {
    let mut in_section = false;
    let mut kv: Vec<(String, String, usize)> = Vec::new();
    for (line, l) in lines(text) {
        if l.starts_with(';') || l.starts_with('#') {
            continue;
        }
        if l.starts_with('[') {
            in_section = l.eq_ignore_ascii_case("[sequence]");
            continue;
        }
        if !in_section {
            continue;
        }
        let (k, v) = l.split_once('=').ok_or_else(|| Error::parse(path, line, "expected key=value"))?;
        kv.push((k.trim().to_string(), v.trim().to_string(), line));
    }
    let get = |key: &str| -> Result<(&str, usize)> {
        kv.iter()
            .find(|(k, _, _)| k == key)
            .map(|(_, v, l)| (v.as_str(), *l))
            .ok_or_else(|| Error::MissingKey { path: path.to_path_buf(), key: key.to_string() })
    };
    fn num<N: std::str::FromStr>(path: &Path, (v, line): (&str, usize), key: &str) -> Result<N> {
        v.parse().map_err(|_| Error::parse(path, line, format!("{key}: `{v}` is not a valid number")))
    }
    let info = SequenceInfo {
        name: get("name")?.0.to_string(),
        frame_count: num(path, get("seqLength")?, "seqLength")?,
        image_w: num(path, get("imWidth")?, "imWidth")?,
        image_h: num(path, get("imHeight")?, "imHeight")?,
        frame_rate: num(path, get("frameRate")?, "frameRate")?,
    };
    if info.frame_count == 0 || info.image_w == 0 || info.image_h == 0 || info.frame_rate.is_nan() || info.frame_rate <= 0.0 {
        return Err(Error::parse(path, get("seqLength")?.1, "sequence dimensions must be positive"));
    }
    Ok(info)
}

pub fn format_seqinfo(info: &SequenceInfo) -> String {
    format!(
        "[Sequence]\nname={}\nimDir=img1\nframeRate={}\nseqLength={}\nimWidth={}\nimHeight={}\nimExt=.jpg\n",
        info.name, info.frame_rate, info.frame_count, info.image_w, info.image_h
    )
}

/// Header of the report CSV.
pub const REPORT_HEADER: &str = "sequence,MOTA,IDF1,MOTP,MT,ML,FP,FN,IDS,GT,TRAJ";

pub fn format_reports_csv(rows: &[ClearReport]) -> String {
    let mut s = format!("{REPORT_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{:.3},{:.3},{:.3},{:.3},{:.3},{},{},{},{},{}",
            r.name, r.mota, r.idf1, r.motp, r.mt, r.ml, r.fp, r.fn_, r.ids, r.gt_count, r.trajectories
        );
    }
    s
}

/// Reads per-sequence report rows; a `Total` row, if present, is skipped.
/// Percent columns may carry a trailing `%`.
pub fn parse_reports(path: &Path) -> Result<Vec<ClearReport>> {
    parse_reports_str(path, &read(path)?)
}

pub fn parse_reports_str(path: &Path, text: &str) -> Result<Vec<ClearReport>> {
    let mut out = Vec::new();
    let mut saw_header = false;
    for (line, l) in lines(text) {
        if !saw_header {
            let norm: String = l.chars().filter(|c| !c.is_whitespace()).collect();
            if !norm.eq_ignore_ascii_case(REPORT_HEADER) {
                return Err(Error::parse(path, line, format!("expected header `{REPORT_HEADER}`")));
            }
            saw_header = true;
            continue;
        }
        let cleaned = l.replace('%', "");
        let row = Row::new(path, line, &cleaned, 11)?;
        if row.fields[0].eq_ignore_ascii_case("total") {
            continue;
        }
        let count = |i: usize, what: &str| -> Result<u64> {
            u64::try_from(row.int(i, what)?).map_err(|_| Error::parse(path, line, format!("{what} must be non-negative")))
        };
        out.push(ClearReport {
            name: row.fields[0].to_string(),
            mota: row.f64(1, "MOTA")?,
            idf1: row.f64(2, "IDF1")?,
            motp: row.f64(3, "MOTP")?,
            mt: row.f64(4, "MT")?,
            ml: row.f64(5, "ML")?,
            fp: count(6, "FP")?,
            fn_: count(7, "FN")?,
            ids: count(8, "IDS")?,
            gt_count: count(9, "GT")?,
            trajectories: count(10, "TRAJ")?,
        });
    }
    Ok(out)
}
