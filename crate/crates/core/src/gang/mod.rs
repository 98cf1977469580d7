//! Candidate gangs: near-clique egonet anomalies, an intensity-weighted
//! network around them, and modularity communities with pendant pruning.

mod graph;
pub mod louvain;
mod oddball;
mod reconstruct;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use graph::VotingGraph;
pub use oddball::{
    egonet_features, fit_edpl, near_clique_anomalies, outlierness, outlierness_score, EdplFit, EgonetFeature, LogBase,
    NodeScore, MIN_FIT_POINTS,
};
pub use reconstruct::{reconstruct_weighted_network, Intensity, WeightedNetwork};

use crate::exec::Exec;
use crate::model::AccountName;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GangError {
    #[error("egonet power-law fit needs at least {MIN_FIT_POINTS} nodes with two or more neighbours, got {0}")]
    TooFewFitPoints(usize),
    #[error("all fit points share one neighbour count; no slope can be fitted")]
    DegenerateFit,
    #[error("fraction {0} outside (0, 1]")]
    BadFraction(f64),
    #[error("nothing to reconstruct")]
    NothingToReconstruct,
    #[error("unknown node {0}")]
    UnknownNode(AccountName),
    #[error("{0} is not a producer candidate")]
    NotACandidate(AccountName),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Community {
    pub id: usize,
    pub members: BTreeSet<AccountName>,
    /// Sum of edge weights with both ends in the community (after pruning).
    pub internal_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GangReport {
    pub communities: Vec<Community>,
    /// Modularity of the partition of the pruned network.
    pub modularity: f64,
    /// Accounts dropped for having a single edge in the network.
    pub pruned: Vec<AccountName>,
}

/// Removes degree-1 nodes, runs Louvain on what remains, and keeps
/// communities with at least two members. Communities are ordered by their
/// smallest member name.
pub fn detect_gangs(network: &WeightedNetwork, seed: u64) -> GangReport {
    let n = network.nodes.len();
    let degree = network.degree();
    let pruned: Vec<AccountName> = (0..n).filter(|&i| degree[i] == 1).map(|i| network.nodes[i].clone()).collect();
    let kept: Vec<usize> = (0..n).filter(|&i| degree[i] != 1).collect();
    let mut local = vec![usize::MAX; n];
    for (k, &i) in kept.iter().enumerate() {
        local[i] = k;
    }
    let edges: Vec<(usize, usize, f64)> = network
        .edges
        .iter()
        .filter(|(i, j, _)| local[*i] != usize::MAX && local[*j] != usize::MAX)
        .map(|&(i, j, w)| (local[i], local[j], w))
        .collect();
    let part = louvain::louvain(kept.len(), &edges, seed);

    let groups = part.community.iter().max().map_or(0, |c| c + 1);
    let mut members: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); groups];
    for (k, &i) in kept.iter().enumerate() {
        members[part.community[k]].insert(i);
    }
    let mut communities: Vec<Community> = members
        .into_iter()
        .filter(|m| m.len() >= 2)
        .map(|m| {
            let internal_weight =
                network.edges.iter().filter(|(i, j, _)| m.contains(i) && m.contains(j)).map(|(_, _, w)| w).sum();
            Community { id: 0, members: m.iter().map(|&i| network.nodes[i].clone()).collect(), internal_weight }
        })
        .collect();
    communities.sort_by(|a, b| a.members.iter().next().cmp(&b.members.iter().next()));
    for (id, c) in communities.iter_mut().enumerate() {
        c.id = id;
    }
    GangReport { communities, modularity: part.modularity, pruned }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GangParams {
    /// Fraction of scored candidates taken as near-clique anomalies.
    pub outlier_pct: f64,
    pub log_base: LogBase,
    pub seed: u64,
}

impl Default for GangParams {
    fn default() -> Self {
        GangParams { outlier_pct: 0.10, log_base: LogBase::Natural, seed: 0 }
    }
}

/// Every intermediate product of the three-step pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GangAnalysis {
    pub fit: EdplFit,
    pub scores: Vec<NodeScore>,
    pub anomalies: Vec<AccountName>,
    pub network: WeightedNetwork,
    pub report: GangReport,
}

pub fn analyze_gangs(graph: &VotingGraph, params: &GangParams, exec: Exec) -> Result<GangAnalysis, GangError> {
    let features = egonet_features(graph, exec);
    let fit = fit_edpl(&features)?;
    let scores = outlierness(&features, &fit, params.log_base);
    let anomalies = near_clique_anomalies(&scores, params.outlier_pct)?;
    let network = reconstruct_weighted_network(graph, &anomalies, exec)?;
    let report = detect_gangs(&network, params.seed);
    Ok(GangAnalysis { fit, scores, anomalies, network, report })
}
