//! Multi-level modularity optimization on undirected weighted graphs.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Smallest modularity improvement that keeps a level (or a pass) going.
pub const MIN_GAIN: f64 = 1e-7;

#[derive(Debug, Clone)]
struct Level {
    adj: Vec<Vec<(usize, f64)>>,
    self_loops: Vec<f64>,
}

impl Level {
    fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Self {
        let mut adj = vec![Vec::new(); n];
        let mut self_loops = vec![0.0; n];
        for &(i, j, w) in edges {
            if i == j {
                self_loops[i] += w;
            } else {
                adj[i].push((j, w));
                adj[j].push((i, w));
            }
        }
        Level { adj, self_loops }
    }

    fn len(&self) -> usize {
        self.adj.len()
    }

    fn degree(&self, i: usize) -> f64 {
        self.adj[i].iter().map(|(_, w)| w).sum::<f64>() + 2.0 * self.self_loops[i]
    }

    fn total_weight(&self) -> f64 {
        (0..self.len()).map(|i| self.degree(i)).sum::<f64>() / 2.0
    }

    fn modularity(&self, community: &[usize]) -> f64 {
        let m = self.total_weight();
        if m == 0.0 {
            return 0.0;
        }
        let k = community.iter().max().map_or(0, |c| c + 1);
        let mut inside = vec![0.0; k];
        let mut tot = vec![0.0; k];
        for i in 0..self.len() {
            let c = community[i];
            tot[c] += self.degree(i);
            inside[c] += self.self_loops[i];
            for &(j, w) in &self.adj[i] {
                if community[j] == c && i < j {
                    inside[c] += w;
                }
            }
        }
        (0..k).map(|c| inside[c] / m - (tot[c] / (2.0 * m)).powi(2)).sum()
    }

    /// Local moves until a full pass gains at most [`MIN_GAIN`]. Returns the
    /// community of each node, renumbered densely in node order.
    fn local_moves(&self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let n = self.len();
        let m = self.total_weight();
        let mut community: Vec<usize> = (0..n).collect();
        if m == 0.0 {
            return community;
        }
        let degree: Vec<f64> = (0..n).map(|i| self.degree(i)).collect();
        let mut tot = degree.clone();
        let mut order: Vec<usize> = (0..n).collect();
        let mut links = vec![0.0; n];
        let mut touched: Vec<usize> = Vec::new();
        let mut q = self.modularity(&community);
        loop {
            order.shuffle(rng);
            let mut moved = false;
            for &i in &order {
                let own = community[i];
                for &(j, w) in &self.adj[i] {
                    let c = community[j];
                    if links[c] == 0.0 {
                        touched.push(c);
                    }
                    links[c] += w;
                }
                tot[own] -= degree[i];
                let gain = |c: usize, links_c: f64| links_c - tot[c] * degree[i] / (2.0 * m);
                let mut best = own;
                let mut best_gain = gain(own, links[own]);
                touched.sort_unstable();
                for &c in &touched {
                    let g = gain(c, links[c]);
                    if g > best_gain {
                        best = c;
                        best_gain = g;
                    }
                }
                tot[best] += degree[i];
                if best != own {
                    community[i] = best;
                    moved = true;
                }
                for &c in &touched {
                    links[c] = 0.0;
                }
                touched.clear();
            }
            let new_q = self.modularity(&community);
            let improved = new_q - q > MIN_GAIN;
            q = new_q;
            if !moved || !improved {
                break;
            }
        }
        renumber(&community)
    }

    fn aggregate(&self, community: &[usize]) -> Level {
        let k = community.iter().max().map_or(0, |c| c + 1);
        let mut edges: std::collections::BTreeMap<(usize, usize), f64> = std::collections::BTreeMap::new();
        for i in 0..self.len() {
            let ci = community[i];
            if self.self_loops[i] != 0.0 {
                *edges.entry((ci, ci)).or_default() += self.self_loops[i];
            }
            for &(j, w) in &self.adj[i] {
                if i < j {
                    let cj = community[j];
                    *edges.entry((ci.min(cj), ci.max(cj))).or_default() += w;
                }
            }
        }
        let list: Vec<(usize, usize, f64)> = edges.into_iter().map(|((a, b), w)| (a, b, w)).collect();
        Level::from_edges(k, &list)
    }
}

fn renumber(community: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    community
        .iter()
        .map(|c| {
            let next = map.len();
            *map.entry(*c).or_insert(next)
        })
        .collect()
}

/// Partition of `0..n` with its modularity.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub community: Vec<usize>,
    pub modularity: f64,
}

/// Weighted modularity of `community` (resolution 1).
pub fn modularity(n: usize, edges: &[(usize, usize, f64)], community: &[usize]) -> f64 {
    Level::from_edges(n, edges).modularity(&renumber(community))
}

/// Node visiting order is shuffled from `seed`, so equal seeds give equal
/// partitions.
pub fn louvain(n: usize, edges: &[(usize, usize, f64)], seed: u64) -> Partition {
    let base = Level::from_edges(n, edges);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment: Vec<usize> = (0..n).collect();
    let mut level = base.clone();
    let mut q = base.modularity(&assignment);
    loop {
        let local = level.local_moves(&mut rng);
        let groups = local.iter().max().map_or(0, |c| c + 1);
        let candidate: Vec<usize> = assignment.iter().map(|&c| local[c]).collect();
        let new_q = base.modularity(&candidate);
        if groups == level.len() || new_q - q <= MIN_GAIN {
            break;
        }
        assignment = candidate;
        q = new_q;
        level = level.aggregate(&local);
    }
    let community = renumber(&assignment);
    let modularity = base.modularity(&community);
    Partition { community, modularity }
}
