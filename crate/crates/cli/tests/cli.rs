use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ctc_align::document::{AlignmentDocument, TargetsDocument, TargetItem};
use ctc_align::textgrid::TextGrid;
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ctc-align"));
    c.env_remove("ESPEAK_NG_PATH").env("RUST_LOG", "error");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn doc(path: &Path) -> AlignmentDocument {
    AlignmentDocument::from_json(&fs::read_to_string(path).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SCENARIO: &str = r#"{
  "phonemes": [
    {"label": "k", "frames": 6}, {"label": "æ", "frames": 9}, {"label": "t", "frames": 5},
    {"label": "s", "frames": 7}, {"label": "ɪ", "frames": 4}, {"label": "t", "frames": 6}
  ],
  "gaps": [1, 0, 2, 3, 0],
  "leading_blank": 4,
  "trailing_blank": 6,
  "peak": 0.8,
  "temperature": 0.2,
  "seed": 42
}"#;

fn synth_fixture(dir: &Path) {
    fs::write(dir.join("cat.json"), SCENARIO).unwrap();
    ok(&run(&["synth", p(&dir.join("cat.json")), "-o", p(&dir.join("ref"))]));
}

#[test]
fn synth_then_align_matches_reference() {
    let tmp = TempDir::new().unwrap();
    synth_fixture(tmp.path());
    let r = tmp.path().join("ref");
    for f in ["cat.pgrm", "cat.ref.json", "cat.targets.json"] {
        assert!(r.join(f).is_file(), "{f} missing");
    }
    let out = tmp.path().join("pred");
    ok(&run(&["align", p(&r.join("cat.pgrm")), "--targets", p(&r.join("cat.targets.json")), "-o", p(&out)]));
    let got = doc(&out.join("cat.align.json"));
    let want = doc(&r.join("cat.ref.json"));
    assert_eq!(got.intervals, want.intervals);
    assert_eq!(got.gaps, want.gaps);
    assert_eq!(got.gaps.len(), 3);

    let echo = serde_json::to_value(&got.provenance).unwrap();
    assert_eq!(echo["kind"], "align");
    assert_eq!(echo["config"]["boost_factor"], 5.0);
    assert_eq!(echo["config"]["floor"], 1e-8);
}

#[test]
fn ablation_flags_are_noops_on_covered_fixture() {
    let tmp = TempDir::new().unwrap();
    synth_fixture(tmp.path());
    let r = tmp.path().join("ref");
    let (pgrm, targets) = (r.join("cat.pgrm"), r.join("cat.targets.json"));
    let base = ["align", p(&pgrm), "--targets", p(&targets)];
    let default: Value = serde_json::from_str(&ok(&run(&base))).unwrap();
    let mut args = base.to_vec();
    args.extend(["--no-boost", "--no-enforce"]);
    let ablated: Value = serde_json::from_str(&ok(&run(&args))).unwrap();
    assert_eq!(default["intervals"], ablated["intervals"]);
    assert_eq!(ablated["provenance"]["config"]["boost_enabled"], false);
}

#[test]
fn gap_tolerance_closes_short_gaps() {
    let tmp = TempDir::new().unwrap();
    synth_fixture(tmp.path());
    let r = tmp.path().join("ref");
    let out = ok(&run(&[
        "align",
        p(&r.join("cat.pgrm")),
        "--targets",
        p(&r.join("cat.targets.json")),
        "--gap-tolerance",
        "25",
    ]));
    let d = AlignmentDocument::from_json(&out).unwrap();
    let gaps: Vec<f64> = d.gaps.iter().map(|g| g.end_ms - g.start_ms).collect();
    assert_eq!(gaps, vec![30.0]);
    assert_eq!(d.intervals[0].end_ms, d.intervals[1].start_ms);
}

#[test]
fn textgrid_output_parses() {
    let tmp = TempDir::new().unwrap();
    synth_fixture(tmp.path());
    let r = tmp.path().join("ref");
    let out = tmp.path().join("pred");
    ok(&run(&[
        "align",
        p(&r.join("cat.pgrm")),
        "--targets",
        p(&r.join("cat.targets.json")),
        "-o",
        p(&out),
        "--format",
        "json",
        "--format",
        "textgrid",
    ]));
    let tg = TextGrid::parse(&fs::read_to_string(out.join("cat.TextGrid")).unwrap()).unwrap();
    let d = doc(&out.join("cat.align.json"));
    let labels: Vec<String> = tg.labelled("phones").unwrap().into_iter().map(|x| x.0).collect();
    assert_eq!(labels, d.intervals.iter().map(|i| i.label.clone()).collect::<Vec<_>>());
    assert_eq!(tg.tiers[0].intervals.len(), d.intervals.len() + d.gaps.len() + 2);
}

#[test]
fn batch_is_deterministic_and_eval_of_identity_is_perfect() {
    let tmp = TempDir::new().unwrap();
    let r = tmp.path().join("ref");
    for seed in ["1", "2", "3"] {
        ok(&run(&["synth", "--random", "20", "--seed", seed, "--silence-every", "7", "-o", p(&r)]));
    }
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&run(&["align", "--input-dir", p(&r), "-o", p(&a)]));
    ok(&run(&["align", "--input-dir", p(&r), "-o", p(&b)]));
    for id in ["synth1", "synth2", "synth3"] {
        let name = format!("{id}.align.json");
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap());
    }

    let report = tmp.path().join("report.json");
    let table = ok(&run(&["eval", "--pred", p(&r), "--ref", p(&r), "--json", p(&report)]));
    assert!(table.contains("R@20ms"));
    let v: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let tols: Vec<f64> = v["recall_at"].as_array().unwrap().iter().map(|s| s["tolerance_ms"].as_f64().unwrap()).collect();
    assert_eq!(tols, vec![20.0, 40.0, 60.0]);
    for key in ["recall_at", "precision_at"] {
        assert!(v[key].as_array().unwrap().iter().all(|s| s["percent"] == 100.0));
    }
    assert_eq!(v["known_to_aligned"]["mean_ms"], 0.0);
    assert_eq!(v["aligned_to_known"]["median_ms"], 0.0);
}

fn hand_doc(id: &str, spans: &[(f64, f64)]) -> String {
    let intervals: Vec<Value> = spans
        .iter()
        .map(|(s, e)| serde_json::json!({"label": "k", "start_ms": s, "end_ms": e, "score": 0.0}))
        .collect();
    serde_json::json!({
        "utterance_id": id,
        "frame_hop_ms": 10.0,
        "frame_offset_ms": 0.0,
        "span_start_ms": 0.0,
        "span_end_ms": 1000.0,
        "intervals": intervals,
        "provenance": {"kind": "imported", "source": "hand"}
    })
    .to_string()
}

#[test]
fn eval_matches_hand_computation() {
    let tmp = TempDir::new().unwrap();
    let (r, pr) = (tmp.path().join("r"), tmp.path().join("p"));
    fs::create_dir_all(&r).unwrap();
    fs::create_dir_all(&pr).unwrap();
    fs::write(r.join("u.json"), hand_doc("u", &[(100.0, 150.0), (200.0, 250.0), (300.0, 350.0)])).unwrap();
    fs::write(pr.join("u.json"), hand_doc("u", &[(105.0, 150.0), (190.0, 250.0), (500.0, 550.0)])).unwrap();
    let report = tmp.path().join("r.json");
    let hist = tmp.path().join("h.csv");
    ok(&run(&["eval", "--pred", p(&pr), "--ref", p(&r), "--json", p(&report), "--histogram", p(&hist)]));
    let v: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let r20 = v["recall_at"][0]["percent"].as_f64().unwrap();
    let p20 = v["precision_at"][0]["percent"].as_f64().unwrap();
    assert!((r20 - 66.67).abs() < 0.01 && (p20 - 66.67).abs() < 0.01, "{r20} {p20}");
    assert_eq!(v["totals"]["annotated"], 6);
    let csv = fs::read_to_string(&hist).unwrap();
    assert!(csv.starts_with("bin_start_ms,count\n0,3\n10,1\n"), "{csv}");
}

#[test]
fn eval_reports_id_mismatch() {
    let tmp = TempDir::new().unwrap();
    let (r, pr) = (tmp.path().join("r"), tmp.path().join("p"));
    fs::create_dir_all(&r).unwrap();
    fs::create_dir_all(&pr).unwrap();
    fs::write(r.join("a.json"), hand_doc("a", &[(0.0, 10.0)])).unwrap();
    fs::write(pr.join("b.json"), hand_doc("b", &[(0.0, 10.0)])).unwrap();
    let out = run(&["eval", "--pred", p(&pr), "--ref", p(&r)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("without prediction: [a]") && err.contains("without reference: [b]"), "{err}");
}

#[test]
fn infeasible_alignment_exits_3_with_diagnostic() {
    let tmp = TempDir::new().unwrap();
    synth_fixture(tmp.path());
    let ipa = vec!["k"; 100].join(" ");
    let out = run(&["align", p(&tmp.path().join("ref/cat.pgrm")), "--ipa", &ipa]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("53 frames cannot hold 199"), "{err}");
}

#[test]
fn bad_input_exits_2() {
    let tmp = TempDir::new().unwrap();
    let junk = tmp.path().join("junk.pgrm");
    fs::write(&junk, b"PGRM\x01short").unwrap();
    let out = run(&["align", p(&junk), "--ipa", "k"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["align", p(&tmp.path().join("missing.pgrm")), "--ipa", "k"]);
    assert_eq!(out.status.code(), Some(2));
}

#[cfg(unix)]
fn stub(dir: &Path, body: &str) -> std::path::PathBuf {
    use std::os::unix::fs::PermissionsExt;
    let path = dir.join("espeak-stub");
    fs::write(&path, format!("#!/bin/sh\n{body}\n")).unwrap();
    fs::set_permissions(&path, fs::Permissions::from_mode(0o755)).unwrap();
    path
}

#[cfg(unix)]
#[test]
fn g2p_with_stub_writes_targets() {
    let tmp = TempDir::new().unwrap();
    let exe = stub(tmp.path(), "echo 'k ˈæ t'");
    let target = tmp.path().join("cat.targets.json");
    let out = bin()
        .env("ESPEAK_NG_PATH", &exe)
        .args(["g2p", "--text", "cat.", "-o", p(&target)])
        .output()
        .unwrap();
    ok(&out);
    let d = TargetsDocument::from_json(&fs::read_to_string(&target).unwrap()).unwrap();
    assert_eq!(
        d.items,
        vec![
            TargetItem::Phoneme("k".into()),
            TargetItem::Phoneme("æ".into()),
            TargetItem::Phoneme("t".into()),
            TargetItem::Silence
        ]
    );
    assert_eq!(d.source_text.as_deref(), Some("cat."));
    assert_eq!(d.raw_g2p.as_deref(), Some("k ˈæ t"));
}

#[cfg(unix)]
#[test]
fn g2p_tool_failures_exit_4() {
    let tmp = TempDir::new().unwrap();
    let out = bin()
        .env("ESPEAK_NG_PATH", tmp.path().join("nope"))
        .args(["g2p", "--text", "cat"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ESPEAK_NG_PATH"));

    let exe = stub(tmp.path(), "echo boom >&2; exit 1");
    let out = bin().env("ESPEAK_NG_PATH", &exe).args(["g2p", "--text", "cat"]).output().unwrap();
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("boom"));
}

#[test]
fn bench_reports_rtf() {
    let out = ok(&run(&["bench", "--reps", "3", "--json"]));
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["frames"], 310);
    assert_eq!(v["classes"], 68);
    assert!(v["rtf"].as_f64().unwrap() < 1.0);
}
