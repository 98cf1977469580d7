use std::collections::BTreeSet;

use dpos_forensics::cluster::{cluster_voters, sample_voting_records, select_population, Population};
use dpos_forensics::gang::{analyze_gangs, GangParams, VotingGraph};
use dpos_forensics::model::{read_trace, write_trace};
use dpos_forensics::motif::{detect_all, verify_instance, MotifParams};
use dpos_forensics::replay::{replay, replay_sampled, trace_sample_times, SampleCadence};
use dpos_forensics::synth::{generate_ledger, trace_digest, GenConfig, Ledger};
use dpos_forensics::timeline::build_timeline;
use dpos_forensics::Exec;
use proptest::prelude::*;

const PLANTS: &str = r#"
[[plants]]
kind = "similar_cluster"
size = 4
shared_creator = true

[[plants]]
kind = "triangular_gang"
size = 2

[[plants]]
kind = "near_clique"
size = 6
decoys = 2
"#;

fn small_ledger(seed: u64, proxy_share: f64, noise: f64, with_plants: bool) -> Ledger {
    let text = format!(
        "seed = {seed}\nn_accounts = 300\nn_candidates = 40\nn_proxies = 6\nduration_days = 75\n\
         participation_rate = 0.4\nproxy_weight_target = {proxy_share}\ncandidate_vote_rate = {noise}\nrounds_per_day = 1\n{}",
        if with_plants { PLANTS } else { "" }
    );
    let cfg = GenConfig::from_toml(&text).unwrap();
    generate_ledger(&cfg).unwrap_or_else(|e| panic!("seed {seed}: {e}"))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, .. ProptestConfig::default() })]

    #[test]
    fn generated_ledgers_are_admissible(seed in any::<u64>(), pt in 0.0..0.6f64, noise in 0.0..0.3f64, plants: bool) {
        let ledger = small_ledger(seed, pt, noise, plants);
        let out = replay(&ledger.trace).unwrap();
        prop_assert!(out.log.rejected.is_empty(), "{:?}", out.log.rejected.first());
        prop_assert_eq!(trace_digest(&ledger.trace), ledger.truth.trace_digest.clone());
        prop_assert!(ledger.headers.windows(2).all(|w| w[0].height < w[1].height && w[0].timestamp <= w[1].timestamp));

        let mut bytes = Vec::new();
        write_trace(&mut bytes, &ledger.trace).unwrap();
        prop_assert_eq!(read_trace(bytes.as_slice(), Exec::Parallel).unwrap(), ledger.trace);
    }

    #[test]
    fn detectors_agree_across_exec_modes(seed in any::<u64>(), pt in 0.0..0.5f64) {
        let ledger = small_ledger(seed, pt, 0.2, true);
        let (timeline, _) = build_timeline(&ledger.trace).unwrap();
        let params = MotifParams::default();
        let seq = detect_all(&timeline.events, &timeline.candidates, &params, Exec::Sequential);
        let par = detect_all(&timeline.events, &timeline.candidates, &params, Exec::Parallel);
        prop_assert_eq!(&seq, &par);
        prop_assert!(seq.iter().all(|m| verify_instance(m, &params)));
        let keys: BTreeSet<_> = seq.iter().map(|m| m.key()).collect();
        prop_assert_eq!(keys.len(), seq.len());

        let graph = VotingGraph::from_timeline(&timeline);
        let a = analyze_gangs(&graph, &GangParams::default(), Exec::Sequential);
        let b = analyze_gangs(&graph, &GangParams::default(), Exec::Parallel);
        prop_assert_eq!(a.is_ok(), b.is_ok());
        if let (Ok(a), Ok(b)) = (a, b) {
            prop_assert_eq!(&a, &b);
            let mut seen = BTreeSet::new();
            for c in &a.report.communities {
                prop_assert!(c.members.len() >= 2);
                for m in &c.members {
                    prop_assert!(timeline.candidates.contains(m));
                    prop_assert!(seen.insert(m.clone()), "{} in two communities", m);
                }
            }
        }
    }

    #[test]
    fn clusters_are_disjoint_and_exec_independent(seed in any::<u64>(), theta in 0.5..=1.0f64) {
        let ledger = small_ledger(seed, 0.0, 0.0, true);
        let times = trace_sample_times(&ledger.trace, SampleCadence::Days(7));
        let (_, snaps) = replay_sampled(&ledger.trace, &times).unwrap();
        let voters = select_population(&snaps, Population::DirectVoters, 0.05).unwrap();
        let records = sample_voting_records(&snaps, &voters);
        let seq = cluster_voters(&voters, &records, theta, Exec::Sequential).unwrap();
        let par = cluster_voters(&voters, &records, theta, Exec::Parallel).unwrap();
        prop_assert_eq!(&seq, &par);
        let mut seen = BTreeSet::new();
        for c in &seq {
            prop_assert!(c.members.len() >= 2);
            prop_assert!(c.members.contains(&c.seed));
            prop_assert!(c.mean_similarity <= 1.0 + 1e-12);
            for m in &c.members {
                prop_assert!(seen.insert(m.clone()));
            }
        }
    }
}
