use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::model::AccountName;
use crate::timeline::{EdgeStats, Timeline};

/// Directed voting relationships annotated with frequency, duration and
/// average weight. Self-loops are never stored.
#[derive(Debug, Clone, Default)]
pub struct VotingGraph {
    nodes: Vec<AccountName>,
    index: HashMap<AccountName, usize>,
    candidate: Vec<bool>,
    edges: BTreeMap<(usize, usize), EdgeStats>,
}

impl VotingGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_timeline(timeline: &Timeline) -> Self {
        let mut g = VotingGraph::new();
        for ((s, d), stats) in &timeline.edges {
            g.add_edge(s, d, *stats);
        }
        for c in &timeline.candidates {
            g.set_candidate(c, true);
        }
        g
    }

    pub fn node(&mut self, name: &AccountName) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        self.nodes.push(name.clone());
        self.candidate.push(false);
        self.index.insert(name.clone(), self.nodes.len() - 1);
        self.nodes.len() - 1
    }

    /// Adds the node if needed; unknown names are ignored when `flag` is false.
    pub fn set_candidate(&mut self, name: &AccountName, flag: bool) {
        if flag {
            let i = self.node(name);
            self.candidate[i] = true;
        } else if let Some(&i) = self.index.get(name) {
            self.candidate[i] = false;
        }
    }

    /// Inserts or replaces `src -> dst`; self-loops are dropped.
    pub fn add_edge(&mut self, src: &AccountName, dst: &AccountName, stats: EdgeStats) {
        if src == dst {
            return;
        }
        let (s, d) = (self.node(src), self.node(dst));
        self.edges.insert((s, d), stats);
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn name(&self, i: usize) -> &AccountName {
        &self.nodes[i]
    }

    pub fn index_of(&self, name: &AccountName) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn is_candidate(&self, i: usize) -> bool {
        self.candidate[i]
    }

    pub fn candidates(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| self.candidate[i])
    }

    pub fn edge(&self, src: usize, dst: usize) -> Option<&EdgeStats> {
        self.edges.get(&(src, dst))
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, &EdgeStats)> {
        self.edges.iter().map(|(&(s, d), e)| (s, d, e))
    }

    /// Sorted neighbour lists of the undirected simple view.
    pub fn undirected(&self) -> Vec<Vec<usize>> {
        let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); self.nodes.len()];
        for &(s, d) in self.edges.keys() {
            adj[s].insert(d);
            adj[d].insert(s);
        }
        adj.into_iter().map(|s| s.into_iter().collect()).collect()
    }
}
