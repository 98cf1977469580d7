use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dpos_forensics::cluster::{sample_voting_records, select_population, similarity_index, Population, VotingRecord};
use dpos_forensics::gang::{egonet_features, VotingGraph};
use dpos_forensics::model::{read_trace, write_trace};
use dpos_forensics::motif::{detect_all, MotifParams};
use dpos_forensics::replay::{replay_sampled, trace_sample_times, SampleCadence};
use dpos_forensics::synth::{generate_ledger, GenConfig};
use dpos_forensics::timeline::build_timeline;
use dpos_forensics::Exec;

const CONFIG: &str = r#"
seed = 11
n_accounts = 6000
n_candidates = 300
n_proxies = 40
duration_days = 180
participation_rate = 0.4
candidate_vote_rate = 0.3
rounds_per_day = 0
"#;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn benches(c: &mut Criterion) {
    let cfg = GenConfig::from_toml(CONFIG).expect("bench config");
    let ledger = generate_ledger(&cfg).expect("bench ledger");
    let mut bytes = Vec::new();
    write_trace(&mut bytes, &ledger.trace).unwrap();

    let times = trace_sample_times(&ledger.trace, SampleCadence::Days(7));
    let (_, snapshots) = replay_sampled(&ledger.trace, &times).unwrap();
    let voters = select_population(&snapshots, Population::DirectVoters, 0.05).unwrap();
    let records = sample_voting_records(&snapshots, &voters);
    let records: Vec<&VotingRecord> = records.values().collect();
    let (timeline, _) = build_timeline(&ledger.trace).unwrap();
    let graph = VotingGraph::from_timeline(&timeline);
    let params = MotifParams::default();

    let mut g = c.benchmark_group("parse_trace");
    g.sample_size(10);
    for (label, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(label), &exec, |b, &e| {
            b.iter(|| read_trace(black_box(bytes.as_slice()), e).unwrap())
        });
    }
    g.finish();

    let mut g = c.benchmark_group("similarity_index");
    g.sample_size(10);
    for (label, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(label), &exec, |b, &e| {
            b.iter(|| similarity_index(black_box(&records), 0.9, e).unwrap())
        });
    }
    g.finish();

    let mut g = c.benchmark_group("egonet_features");
    for (label, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(label), &exec, |b, &e| {
            b.iter(|| egonet_features(black_box(&graph), e))
        });
    }
    g.finish();

    let mut g = c.benchmark_group("motifs");
    g.sample_size(10);
    for (label, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(label), &exec, |b, &e| {
            b.iter(|| detect_all(black_box(&timeline.events), &timeline.candidates, &params, e))
        });
    }
    g.finish();
}

criterion_group!(parallel, benches);
criterion_main!(parallel);
