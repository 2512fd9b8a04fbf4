use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use chainflow::motio;
use chainflow::simulator::{corrupt_to_pairs, gen_sequence, NoiseConfig, WorldConfig};

fn chainflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chainflow")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn fixture(name: &str) -> String {
    format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn no_subcommand_prints_usage_and_fails() {
    let o = chainflow(&[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn unknown_flag_is_rejected() {
    assert_eq!(chainflow(&["track", "--pairs", "a", "--out", "b", "--sigmaa", "3"]).status.code(), Some(1));
}

#[test]
fn missing_file_is_io_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = chainflow(&["eval", "--gt", "/nonexistent/gt.txt", "--res", s(&dir.path().join("r.txt"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_input_is_validation_failure() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = dir.path().join("pairs.csv");
    fs::write(&pairs, "1,0,0,10,10,0,0,10,10,0.9\n").unwrap();
    let o = chainflow(&["track", "--pairs", s(&pairs), "--out", s(&dir.path().join("r.txt"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("pairs.csv:1"));
}

#[test]
fn simulate_track_eval_by_hand() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(chainflow(&["simulate", "--seed", "3", "--frames", "60", "--targets", "5", "--out", s(d)]).status.success());
    for f in ["gt.txt", "seqinfo.ini", "pairs.csv"] {
        assert!(d.join(f).is_file(), "{f}");
    }
    let res = d.join("res.txt");
    assert!(chainflow(&["track", "--pairs", s(&d.join("pairs.csv")), "--out", s(&res)]).status.success());
    let o = chainflow(&["eval", "--gt", s(&d.join("gt.txt")), "--res", s(&res), "--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let row = &v["sequences"][0];
    assert_eq!(row["name"], "sim-3");
    assert_eq!(row["mota"], 100.0);
    assert_eq!(row["ids"], 0);
    assert_eq!(row["gt_count"], 300);
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let run = |tag: &str| {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        let sim = ["simulate", "--seed", "9", "--frames", "50", "--noise", "realistic", "--out", s(d)];
        assert!(chainflow(&sim).status.success(), "{tag}");
        let res = d.join("res.txt");
        assert!(chainflow(&["track", "--pairs", s(&d.join("pairs.csv")), "--out", s(&res)]).status.success());
        ["gt.txt", "pairs.csv", "res.txt"].map(|f| fs::read(d.join(f)).unwrap())
    };
    assert_eq!(run("first"), run("second"));
}

#[test]
fn empty_pairs_give_empty_results() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = dir.path().join("pairs.csv");
    fs::write(&pairs, "").unwrap();
    let res = dir.path().join("res.txt");
    assert!(chainflow(&["track", "--pairs", s(&pairs), "--out", s(&res)]).status.success());
    assert_eq!(fs::read_to_string(res).unwrap(), "");
}

#[test]
fn pipeline_prints_perfect_mota() {
    let o = chainflow(&["pipeline", "--seed", "7", "--frames", "100", "--targets", "8"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let header: Vec<&str> = out.lines().next().unwrap().split_whitespace().collect();
    assert_eq!(header, ["Sequence", "MOTA", "IDF1", "MOTP", "MT", "ML", "FP", "FN", "IDS"]);
    let row: Vec<&str> = out.lines().nth(1).unwrap().split_whitespace().collect();
    assert_eq!(row[1], "100.0");
}

#[test]
fn pipeline_with_noise_stays_sane() {
    let o = chainflow(&["pipeline", "--seed", "2", "--noise", "realistic", "--format", "csv"]);
    assert!(o.status.success());
    let rows = motio::parse_reports_str(Path::new("stdout"), &stdout(&o)).unwrap();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].mota > 50.0 && rows[0].mota < 100.0, "{:?}", rows[0]);
}

#[test]
fn eval_reports_reproduces_table_counts() {
    let o = chainflow(&["eval", "--reports", &fixture("mot16_table.csv"), "--format", "csv"]);
    assert!(o.status.success());
    let total = stdout(&o).lines().last().unwrap().to_string();
    let f: Vec<&str> = total.split(',').collect();
    assert_eq!(f[0], "Total");
    assert_eq!(&f[6..9], ["8934", "48305", "1897"]);
    assert_eq!(format!("{:.1}", f[1].parse::<f64>().unwrap()), "67.6");
}

#[test]
fn eval_directory_mode() {
    let root = tempfile::tempdir().unwrap();
    let (gt_root, res_root) = (root.path().join("gt"), root.path().join("res"));
    for (name, seed) in [("SEQ-A", 1u64), ("SEQ-B", 2)] {
        let seq_dir = gt_root.join(name);
        let world = WorldConfig { frames: 30, n_targets: 3, ..WorldConfig::default() };
        let gt = gen_sequence(&world, seed).unwrap();
        motio::write_file(&seq_dir.join("gt").join("gt.txt"), &motio::format_gt(&gt)).unwrap();
        let info = motio::SequenceInfo { name: name.into(), frame_count: 30, image_w: 1920, image_h: 1080, frame_rate: 30.0 };
        motio::write_file(&seq_dir.join("seqinfo.ini"), &motio::format_seqinfo(&info)).unwrap();
        let pairs = corrupt_to_pairs(&gt, &NoiseConfig::noiseless(), seed).unwrap();
        let traj = chainflow::chaining::run_tracker(&pairs, &Default::default()).unwrap();
        motio::write_results(&res_root.join(format!("{name}.txt")), &traj).unwrap();
    }
    let o = chainflow(&["eval", "--gt", s(&gt_root), "--res", s(&res_root)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let names: Vec<&str> = out.lines().skip(1).map(|l| l.split_whitespace().next().unwrap()).collect();
    assert_eq!(names, ["SEQ-A", "SEQ-B", "Total"]);
}

#[test]
fn anchors_prints_k_scales() {
    let dir = tempfile::tempdir().unwrap();
    assert!(chainflow(&["simulate", "--seed", "4", "--targets", "10", "--out", s(dir.path())]).status.success());
    let o = chainflow(&["anchors", "--gt", s(&dir.path().join("gt.txt")), "--k", "3"]);
    assert!(o.status.success());
    let scales: Vec<f64> = stdout(&o).lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(scales.len(), 3);
    assert!(scales.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn gradcheck_passes() {
    let o = chainflow(&["gradcheck", "--seed", "1", "--instances", "20"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("ok"));
}

#[test]
fn motio_roundtrips_simulated_files() {
    let world = WorldConfig { frames: 25, n_targets: 4, ..WorldConfig::default() };
    let gt = gen_sequence(&world, 5).unwrap();
    let p = Path::new("mem");
    let text = motio::format_gt(&gt);
    let back = motio::parse_gt_str(p, &text, -1.0).unwrap();
    assert_eq!(motio::format_gt(&back), text);
    assert_eq!(back.iter().map(|f| f.len()).sum::<usize>(), gt.iter().map(|f| f.len()).sum::<usize>());

    let pairs = corrupt_to_pairs(&gt, &NoiseConfig::realistic(), 6).unwrap();
    let text = motio::format_pairs(&pairs);
    assert_eq!(motio::format_pairs(&motio::parse_pairs_str(p, &text).unwrap()), text);
}
