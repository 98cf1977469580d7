mod common;

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use common::run;
use dpos_forensics::cli::{Envelope, RunManifest, ScoreRow};
use dpos_forensics::model::{name, write_headers, write_trace, BlockHeader, StakeAmount};
use dpos_forensics::replay::ReplayError;
use dpos_forensics::report::{ClusterReport, ClusterRow, PopulationClusters, ReplaySummary};
use dpos_forensics::synth::GroundTruth;
use dpos_forensics::trace::{TraceBuilder, SYSTEM_ACCOUNT};
use dpos_forensics::cluster::Population;
use serde_json::Value;

const MINIMAL: &str = r#"
seed = 3
n_accounts = 120
n_candidates = 30
n_proxies = 3
duration_days = 60
participation_rate = 0.5
rounds_per_day = 1

[[plants]]
kind = "similar_cluster"
size = 4
shared_creator = true
"#;

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stderr(o: &std::process::Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn generate(dir: &Path, config: &str) -> std::process::Output {
    let cfg = dir.join("gen.toml");
    fs::write(&cfg, config).unwrap();
    run(&["generate", p(&cfg), "--out", p(&dir.join("ledger"))])
}

#[test]
fn generate_writes_three_files_that_replay_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let o = generate(dir.path(), MINIMAL);
    assert!(o.status.success(), "{}", stderr(&o));
    let ledger = dir.path().join("ledger");
    for f in ["trace.jsonl", "headers.jsonl", "truth.json"] {
        assert!(ledger.join(f).is_file(), "{f} missing");
    }
    let out = dir.path().join("replay");
    let o = run(&["replay", "--trace", p(&ledger.join("trace.jsonl")), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary: Envelope<ReplaySummary> = serde_json::from_str(&fs::read_to_string(out.join("replay.json")).unwrap()).unwrap();
    assert!(summary.report.rejected.is_empty());
    assert_eq!(summary.manifest.command, "replay");

    let truth: Envelope<GroundTruth> =
        serde_json::from_str(&fs::read_to_string(ledger.join("truth.json")).unwrap()).unwrap();
    assert_eq!(truth.manifest.command, "generate");
    assert_eq!(truth.report.trace_digest, summary.manifest.input("trace").unwrap().sha256);
}

#[test]
fn same_config_gives_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(generate(a.path(), MINIMAL).status.success());
    assert!(generate(b.path(), MINIMAL).status.success());
    for f in ["trace.jsonl", "headers.jsonl"] {
        assert_eq!(fs::read(a.path().join("ledger").join(f)).unwrap(), fs::read(b.path().join("ledger").join(f)).unwrap());
    }
    let truth = |d: &Path| {
        let e: Envelope<GroundTruth> =
            serde_json::from_str(&fs::read_to_string(d.join("ledger/truth.json")).unwrap()).unwrap();
        e.report
    };
    assert_eq!(truth(a.path()), truth(b.path()));
}

#[test]
fn plants_over_budget_exit_2_naming_the_plant() {
    let dir = tempfile::tempdir().unwrap();
    let config = MINIMAL.to_string() + "\n[[plants]]\nkind = \"near_clique\"\nsize = 20\n\n[[plants]]\nkind = \"near_clique\"\nsize = 20\n";
    let o = generate(dir.path(), &config);
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr(&o);
    assert!(msg.contains("plant 2") && msg.contains("near_clique"), "{msg}");
}

#[test]
fn bad_config_field_exit_2_with_field_name() {
    let dir = tempfile::tempdir().unwrap();
    let config = MINIMAL.replace("shared_creator = true", "shared_creator = true\nvote_jitter = 2.0");
    let o = generate(dir.path(), &config);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("plants[0].vote_jitter"), "{}", stderr(&o));
}

fn uniform_month(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let t0 = 1_530_403_200; // 2018-07-01
    let mut b = TraceBuilder::new();
    let alice = name("alice");
    b.new_account(&name(SYSTEM_ACCOUNT), &alice, t0).stake(&alice, StakeAmount::from_tokens(10), t0 + 1);
    let trace = dir.join("trace.jsonl");
    write_trace(fs::File::create(&trace).unwrap(), &b.finish()).unwrap();

    let mut headers = Vec::new();
    for round in 0..10u64 {
        for slot in 0..126u64 {
            let producer = name(&format!("bp{}", (b'a' + (slot / 6) as u8) as char));
            headers.push(BlockHeader { height: round * 126 + slot + 1, producer, timestamp: t0 + (round * 63 + slot / 2) as i64 });
        }
    }
    let hpath = dir.join("headers.jsonl");
    write_headers(fs::File::create(&hpath).unwrap(), &headers).unwrap();
    (trace, hpath)
}

#[test]
fn metrics_on_uniform_month_reports_log2_21() {
    let dir = tempfile::tempdir().unwrap();
    let (trace, headers) = uniform_month(dir.path());
    let out = dir.path().join("m");
    let o = run(&["metrics", "--trace", p(&trace), "--headers", p(&headers), "--out", p(&out), "--entropy-n", "all"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("fig7_entropy.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("month,blocks,producers,h_all"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&row[..3], &["2018-07", "1260", "21"]);
    let h: f64 = row[3].parse().unwrap();
    assert!((h - 21f64.log2()).abs() < 1e-12, "{h}");
}

#[test]
fn theta_above_one_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let (trace, _) = uniform_month(dir.path());
    let o = run(&["cluster", "--trace", p(&trace), "--theta", "1.01", "--out", p(&dir.path().join("c"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("theta out of range"), "{}", stderr(&o));
    assert!(!dir.path().join("c").exists());
}

#[test]
fn unsorted_trace_exit_3_citing_the_action() {
    let dir = tempfile::tempdir().unwrap();
    let (trace, _) = uniform_month(dir.path());
    let mut lines: Vec<String> = fs::read_to_string(&trace).unwrap().lines().map(String::from).collect();
    lines.swap(0, 1);
    fs::write(&trace, lines.join("\n") + "\n").unwrap();
    let o = run(&["replay", "--trace", p(&trace), "--out", p(&dir.path().join("r"))]);
    assert_eq!(o.status.code(), Some(3));
    let expected = ReplayError::Unsorted { index: 1, block: 1, seq: 0, prev_block: 3, prev_seq: 1 }.to_string();
    assert!(stderr(&o).contains(&expected), "{}", stderr(&o));
}

#[test]
fn malformed_trace_exit_3_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.jsonl");
    fs::write(&trace, "{\"not\": \"an action\"}\n").unwrap();
    let o = run(&["metrics", "--trace", p(&trace), "--out", p(&dir.path().join("r"))]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("line 1"), "{}", stderr(&o));
}

/// Ledger plus a cluster report holding `clusters`, stamped with the trace digest.
fn score_fixture(dir: &Path, clusters: impl Fn(&GroundTruth) -> Vec<BTreeSet<dpos_forensics::model::AccountName>>, digest: Option<&str>) -> std::process::Output {
    assert!(generate(dir, MINIMAL).status.success());
    let truth_path = dir.join("ledger/truth.json");
    let truth: Envelope<GroundTruth> = serde_json::from_str(&fs::read_to_string(&truth_path).unwrap()).unwrap();
    let rows = clusters(&truth.report)
        .into_iter()
        .enumerate()
        .map(|(id, members)| ClusterRow {
            id,
            seed: members.iter().next().unwrap().clone(),
            members,
            mean_similarity: 1.0,
            creators: Default::default(),
            single_creator: true,
            common_prefix: String::new(),
        })
        .collect();
    let report = ClusterReport {
        sample_times: vec![],
        populations: vec![PopulationClusters { population: Population::DirectVoters, voters: 0, clusters: rows }],
    };
    let mut manifest: RunManifest = truth.manifest.clone();
    manifest.command = "cluster".into();
    manifest.inputs = vec![dpos_forensics::cli::InputFile {
        role: "trace".into(),
        path: "trace.jsonl".into(),
        sha256: digest.unwrap_or(&truth.report.trace_digest).into(),
    }];
    let reports = dir.join("reports");
    fs::create_dir_all(&reports).unwrap();
    fs::write(reports.join("clusters.json"), serde_json::to_string(&Envelope { manifest, report }).unwrap()).unwrap();
    run(&["score", "--reports", p(&reports), "--truth", p(&truth_path), "--out", p(&dir.join("score"))])
}

fn score_rows(dir: &Path) -> Vec<ScoreRow> {
    let v: Value = serde_json::from_str(&fs::read_to_string(dir.join("score/score.json")).unwrap()).unwrap();
    serde_json::from_value(v["report"].clone()).unwrap()
}

#[test]
fn score_perfect_recovery_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = score_fixture(dir.path(), |t| t.plants.iter().map(|p| p.members.clone()).collect(), None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let row = &score_rows(dir.path())[0];
    assert_eq!((row.target.as_str(), row.kind.as_str()), ("clusters", "similar_cluster"));
    assert_eq!((row.precision, row.recall, row.f1), (1.0, 1.0, 1.0));
    assert_eq!(row.truth, 6);
}

#[test]
fn score_empty_report_has_zero_recall() {
    let dir = tempfile::tempdir().unwrap();
    let o = score_fixture(dir.path(), |_| Vec::new(), None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let row = &score_rows(dir.path())[0];
    assert_eq!(row.recall, 0.0);
    assert_eq!(row.predicted, 0);
}

#[test]
fn score_digest_mismatch_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = score_fixture(dir.path(), |_| Vec::new(), Some("00"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("digest mismatch"), "{}", stderr(&o));
}

#[test]
fn out_dir_defaults_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let (trace, _) = uniform_month(dir.path());
    let out = dir.path().join("from-env");
    let o = std::process::Command::new(common::BIN)
        .args(["replay", "--trace", p(&trace)])
        .env("DPOSF_OUT_DIR", &out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("replay.json").is_file());
}
