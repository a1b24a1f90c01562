use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lohcusum")).current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Simulated sequence plus a model fitted on a separate pure sequence.
fn fixture(dir: &Path) {
    ok(dir, &["simulate", "--seed", "1", "--loh-len", "100", "--out", "sim.tsv"]);
    ok(dir, &["simulate", "--seed", "2", "--loh-len", "0", "--loh-start", "0", "--out", "train.tsv"]);
    ok(dir, &["fit", "--input", "train.tsv", "--out", "model.json"]);
}

#[test]
fn help_and_version_exit_zero() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(run(d.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(run(d.path(), &["--version"]).status.code(), Some(0));
    assert_eq!(run(d.path(), &["segment", "--help"]).status.code(), Some(0));
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(run(d.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(d.path(), &["segment"]).status.code(), Some(2));
}

#[test]
fn malformed_input_names_the_line() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("bad.txt"), "0.5\n0.1\nabc\n0.9\n").unwrap();
    let out = run(d.path(), &["fit", "--input", "bad.txt"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn out_of_range_baf_is_rejected() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("bad.txt"), "0.5\n1.5\n").unwrap();
    let out = run(d.path(), &["fit", "--input", "bad.txt"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 2"));
}

#[test]
fn invalid_delta_fails_before_reading_inputs() {
    let d = tempfile::tempdir().unwrap();
    let out = run(d.path(), &["segment", "--input", "missing.txt", "--model", "missing.json", "--delta", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("delta"), "{}", stderr(&out));
    let out = run(d.path(), &["calibrate", "--model", "missing.json", "--alpha", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_file_is_a_runtime_error() {
    let d = tempfile::tempdir().unwrap();
    let out = run(d.path(), &["fit", "--input", "nope.txt"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn segment_output_is_deterministic() {
    let d = tempfile::tempdir().unwrap();
    fixture(d.path());
    let args = ["segment", "--input", "sim.tsv", "--model", "model.json", "--nsim", "1000", "--seed", "3"];
    let a = ok(d.path(), &args).stdout;
    let b = ok(d.path(), &args).stdout;
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("start\tend\tlabel\tn_obs\n"));
    assert!(text.lines().last().unwrap().split('\t').nth(1) == Some("999"));
}

#[test]
fn manifest_records_inputs_and_outputs() {
    let d = tempfile::tempdir().unwrap();
    fixture(d.path());
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.path().join("model.json.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["command"], "fit");
    assert_eq!(m["inputs"][0]["path"], "train.tsv");
    assert_eq!(m["outputs"][0]["path"], "model.json");
    assert_eq!(m["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn replay_rejects_changed_input() {
    let d = tempfile::tempdir().unwrap();
    fixture(d.path());
    ok(d.path(), &["replay", "model.json.manifest.json", "--check"]);
    std::fs::write(d.path().join("train.tsv"), "0.5\n").unwrap();
    let out = run(d.path(), &["replay", "model.json.manifest.json", "--check"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("train.tsv"));
}

#[test]
fn replay_check_detects_tampered_output() {
    let d = tempfile::tempdir().unwrap();
    fixture(d.path());
    let manifest = d.path().join("sim.tsv.manifest.json");
    let mut m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
    m["outputs"][0]["sha256"] = serde_json::Value::String("0".repeat(64));
    std::fs::write(&manifest, m.to_string()).unwrap();
    assert_ne!(run(d.path(), &["replay", "sim.tsv.manifest.json", "--check"]).status.code(), Some(0));
}

#[test]
fn study_smoke_run_is_fast() {
    let d = tempfile::tempdir().unwrap();
    let t = Instant::now();
    ok(
        d.path(),
        &[
            "study", "--loh-lens", "50", "--purities", "1", "--min-lens", "10", "--replicates", "10", "--nsim", "500",
            "--out", "study.tsv", "--json", "study.json", "--tables", "tables.tsv",
        ],
    );
    assert!(t.elapsed().as_secs_f64() < 10.0);
    let tsv = std::fs::read_to_string(d.path().join("study.tsv")).unwrap();
    assert_eq!(tsv.lines().count(), 2);
    let tables = std::fs::read_to_string(d.path().join("tables.tsv")).unwrap();
    assert!(tables.contains("# sensitivity") && tables.contains("m=10"));
}

#[test]
fn empty_study_grid_is_usage_error() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(run(d.path(), &["study", "--loh-lens", ""]).status.code(), Some(2));
    assert_eq!(run(d.path(), &["study", "--replicates", "0"]).status.code(), Some(2));
}

#[test]
fn evaluate_reports_pooled_and_per_input() {
    let d = tempfile::tempdir().unwrap();
    fixture(d.path());
    ok(d.path(), &["segment", "--input", "sim.tsv", "--model", "model.json", "--nsim", "1000", "--out", "seg.tsv"]);
    let out = ok(d.path(), &["evaluate", "--truth", "sim.tsv", "--pred", "seg.tsv", "--truth", "sim.tsv", "--pred", "seg.tsv"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["perInput"].as_array().unwrap().len(), 2);
    let pooled = &v["pooledCounts"];
    let total: u64 = ["tp", "fp", "tn", "fn"].iter().map(|k| pooled[k].as_u64().unwrap()).sum();
    assert_eq!(total, 2000);
    let out = run(d.path(), &["evaluate", "--truth", "sim.tsv", "--pred", "seg.tsv", "--pred", "seg.tsv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn chromosome_aware_workflow() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    ok(dir, &["simulate", "--seed", "21", "--total-len", "900", "--loh-start", "300", "--loh-len", "200", "--out", "a.tsv"]);
    ok(dir, &["simulate", "--seed", "22", "--total-len", "900", "--loh-len", "0", "--loh-start", "0", "--out", "b.tsv"]);
    let mut table = String::from("chrom\tpos\tbaf\n");
    for (chrom, file) in [("1", "a.tsv"), ("2", "b.tsv")] {
        let text = std::fs::read_to_string(dir.join(file)).unwrap();
        for (i, line) in text.lines().skip(1).enumerate() {
            let baf = line.split('\t').nth(1).unwrap();
            table.push_str(&format!("{chrom}\t{}\t{baf}\n", 1000 + 50 * i));
        }
    }
    std::fs::write(dir.join("genome.tsv"), table).unwrap();

    ok(dir, &["fit", "--input", "genome.tsv", "--train-range", "900-1799", "--out", "model.json", "--report", "report.json"]);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["converged"], true);

    ok(dir, &["segment", "--input", "genome.tsv", "--model", "model.json", "--nsim", "2000", "--out", "seg.tsv", "--plot", "plot.tsv"]);
    let seg = std::fs::read_to_string(dir.join("seg.tsv")).unwrap();
    let rows: Vec<Vec<&str>> = seg.lines().skip(1).map(|l| l.split('\t').collect()).collect();
    let mut next = 0usize;
    for r in &rows {
        let (s, e): (usize, usize) = (r[0].parse().unwrap(), r[1].parse().unwrap());
        assert_eq!(s, next);
        assert_eq!(r[3].parse::<usize>().unwrap(), e - s + 1);
        assert!(e < 900 || s >= 900, "segment {s}-{e} crosses the chromosome boundary");
        next = e + 1;
    }
    assert_eq!(next, 1800);
    assert!(rows.iter().any(|r| r[2] == "LOH" && r[0].parse::<usize>().unwrap() < 900));
    let plot = std::fs::read_to_string(dir.join("plot.tsv")).unwrap();
    assert_eq!(plot.lines().count(), 1801);
    assert!(plot.lines().nth(901).unwrap().starts_with("900\t2\t1000\t"));

    let out = run(dir, &["fit", "--input", "genome.tsv", "--train-range", "900-1800"]);
    assert_eq!(out.status.code(), Some(2));
}
