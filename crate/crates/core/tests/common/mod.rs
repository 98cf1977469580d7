#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::process::Command;

use dpos_forensics::model::AccountName;
use sha2::{Digest, Sha256};

pub const BIN: &str = env!("CARGO_BIN_EXE_dpos-forensics");

/// Mean Jaccard over sample times, skipping times where both sets are empty.
pub fn mean_jaccard(a: &[Vec<AccountName>], b: &[Vec<AccountName>]) -> f64 {
    let mut sum = 0.0;
    let mut n = 0;
    for (x, y) in a.iter().zip(b) {
        let x: BTreeSet<&AccountName> = x.iter().collect();
        let y: BTreeSet<&AccountName> = y.iter().collect();
        let union = x.union(&y).count();
        if union == 0 {
            continue;
        }
        sum += x.intersection(&y).count() as f64 / union as f64;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PairScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn pairs(groups: &[BTreeSet<AccountName>]) -> BTreeSet<(AccountName, AccountName)> {
    let mut out = BTreeSet::new();
    for g in groups {
        let v: Vec<&AccountName> = g.iter().collect();
        for i in 0..v.len() {
            for j in (i + 1)..v.len() {
                out.insert((v[i].clone(), v[j].clone()));
            }
        }
    }
    out
}

/// Precision and recall over unordered co-membership pairs.
pub fn pairwise_f1(found: &[BTreeSet<AccountName>], truth: &[BTreeSet<AccountName>]) -> PairScore {
    let f = pairs(found);
    let t = pairs(truth);
    let hit = f.intersection(&t).count() as f64;
    let precision = if f.is_empty() { 0.0 } else { hit / f.len() as f64 };
    let recall = if t.is_empty() { 0.0 } else { hit / t.len() as f64 };
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    PairScore { precision, recall, f1 }
}

pub fn run(args: &[&str]) -> std::process::Output {
    Command::new(BIN).args(args).env_remove("DPOSF_OUT_DIR").output().expect("binary runs")
}

/// Runs `generate` then `all`, returning the SHA-256 of every file written.
pub fn generate_and_analyze(config: &Path, out: &Path) -> Result<BTreeMap<String, String>, String> {
    let gen_dir = out.join("ledger");
    let report_dir = out.join("reports");
    let g = run(&["generate", config.to_str().unwrap(), "--out", gen_dir.to_str().unwrap()]);
    if !g.status.success() {
        return Err(format!("generate failed: {}", String::from_utf8_lossy(&g.stderr)));
    }
    let a = run(&[
        "all",
        "--trace",
        gen_dir.join("trace.jsonl").to_str().unwrap(),
        "--headers",
        gen_dir.join("headers.jsonl").to_str().unwrap(),
        "--out",
        report_dir.to_str().unwrap(),
    ]);
    if !a.status.success() {
        return Err(format!("all failed: {}", String::from_utf8_lossy(&a.stderr)));
    }
    let mut digests = BTreeMap::new();
    for dir in [&gen_dir, &report_dir] {
        let mut entries: Vec<_> = std::fs::read_dir(dir).map_err(|e| e.to_string())?.collect::<Result<_, _>>().map_err(|e| e.to_string())?;
        entries.sort_by_key(|e| e.file_name());
        for e in entries {
            let bytes = std::fs::read(e.path()).map_err(|e| e.to_string())?;
            let key = format!("{}/{}", dir.file_name().unwrap().to_string_lossy(), e.file_name().to_string_lossy());
            digests.insert(key, hex::encode(Sha256::digest(&bytes)));
        }
    }
    Ok(digests)
}
