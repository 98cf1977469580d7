use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::graph::VotingGraph;
use super::GangError;
use crate::exec::Exec;
use crate::model::AccountName;

/// Normalized frequency, duration and power terms of one directed edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intensity {
    /// `F_ij` over the source's total out-frequency.
    pub f_ratio: f64,
    /// `T_ij` over the target's total in-duration.
    pub t_ratio: f64,
    /// `P_ij` over the target's total in-power.
    pub p_ratio: f64,
    pub value: f64,
}

/// Undirected weighted graph over the kept candidates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedNetwork {
    pub nodes: Vec<AccountName>,
    /// `(i, j, w)` with `i < j` indexing `nodes`, sorted.
    pub edges: Vec<(usize, usize, f64)>,
    /// Directed intensities keyed by `(src, dst)` node index.
    pub intensities: BTreeMap<(usize, usize), Intensity>,
}

impl WeightedNetwork {
    pub fn degree(&self) -> Vec<usize> {
        let mut d = vec![0; self.nodes.len()];
        for &(i, j, _) in &self.edges {
            d[i] += 1;
            d[j] += 1;
        }
        d
    }
}

fn ratio(x: f64, total: f64) -> f64 {
    if total > 0.0 {
        x / total
    } else {
        0.0
    }
}

/// Keeps candidates in the egonet of any anomaly and the candidate-to-candidate
/// edges among them; intensities are normalized within the kept subgraph.
pub fn reconstruct_weighted_network(
    graph: &VotingGraph,
    anomalies: &[AccountName],
    exec: Exec,
) -> Result<WeightedNetwork, GangError> {
    if anomalies.is_empty() {
        return Err(GangError::NothingToReconstruct);
    }
    let adj = graph.undirected();
    let mut kept: BTreeSet<usize> = BTreeSet::new();
    for a in anomalies {
        let i = graph.index_of(a).ok_or_else(|| GangError::UnknownNode(a.clone()))?;
        if !graph.is_candidate(i) {
            return Err(GangError::NotACandidate(a.clone()));
        }
        kept.insert(i);
        kept.extend(adj[i].iter().copied().filter(|&u| graph.is_candidate(u)));
    }
    // node order follows names so output is independent of graph insertion order
    let mut order: Vec<usize> = kept.into_iter().collect();
    order.sort_by(|a, b| graph.name(*a).cmp(graph.name(*b)));
    let local: BTreeMap<usize, usize> = order.iter().enumerate().map(|(k, &g)| (g, k)).collect();
    let n = order.len();

    let directed: Vec<(usize, usize, f64, f64, f64)> = graph
        .edges()
        .filter_map(|(s, d, e)| {
            let (ls, ld) = (local.get(&s)?, local.get(&d)?);
            Some((*ls, *ld, e.f as f64, e.t as f64, e.p))
        })
        .collect();
    let mut out_f = vec![0.0; n];
    let mut in_t = vec![0.0; n];
    let mut in_p = vec![0.0; n];
    for &(s, d, f, t, p) in &directed {
        out_f[s] += f;
        in_t[d] += t;
        in_p[d] += p;
    }
    let computed = exec.map(&directed, |&(s, d, f, t, p)| {
        let (fr, tr, pr) = (ratio(f, out_f[s]), ratio(t, in_t[d]), ratio(p, in_p[d]));
        ((s, d), Intensity { f_ratio: fr, t_ratio: tr, p_ratio: pr, value: (fr + tr + pr) / 3.0 })
    });
    let intensities: BTreeMap<(usize, usize), Intensity> = computed.into_iter().collect();

    let mut undirected: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (&(s, d), i) in &intensities {
        *undirected.entry((s.min(d), s.max(d))).or_default() += i.value;
    }
    Ok(WeightedNetwork {
        nodes: order.iter().map(|&g| graph.name(g).clone()).collect(),
        edges: undirected.into_iter().map(|((i, j), w)| (i, j, w)).collect(),
        intensities,
    })
}
