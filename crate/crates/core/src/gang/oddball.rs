use serde::{Deserialize, Serialize};

use super::graph::VotingGraph;
use super::GangError;
use crate::exec::Exec;
use crate::metrics::least_squares;
use crate::model::AccountName;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgonetFeature {
    pub node: AccountName,
    /// Neighbour count.
    pub n: usize,
    /// Edges inside the egonet, ego included.
    pub e: usize,
}

fn intersection_len(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut k) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                k += 1;
                i += 1;
                j += 1;
            }
        }
    }
    k
}

/// Features of every candidate with at least one neighbour, in node order.
pub fn egonet_features(graph: &VotingGraph, exec: Exec) -> Vec<EgonetFeature> {
    let adj = graph.undirected();
    let scope: Vec<usize> = graph.candidates().filter(|&i| !adj[i].is_empty()).collect();
    exec.map(&scope, |&i| {
        let nb = &adj[i];
        let among: usize = nb.iter().map(|&u| intersection_len(&adj[u], nb)).sum::<usize>() / 2;
        EgonetFeature { node: graph.name(i).clone(), n: nb.len(), e: nb.len() + among }
    })
}

/// `E = C * N^alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdplFit {
    pub c: f64,
    pub alpha: f64,
    pub points: usize,
}

impl EdplFit {
    pub fn expected(&self, n: usize) -> f64 {
        self.c * (n as f64).powf(self.alpha)
    }
}

pub const MIN_FIT_POINTS: usize = 10;

/// Least squares of `ln E` on `ln N` over nodes with `N >= 2`.
pub fn fit_edpl(features: &[EgonetFeature]) -> Result<EdplFit, GangError> {
    let pts: Vec<&EgonetFeature> = features.iter().filter(|f| f.n >= 2).collect();
    if pts.len() < MIN_FIT_POINTS {
        return Err(GangError::TooFewFitPoints(pts.len()));
    }
    let xs: Vec<f64> = pts.iter().map(|f| (f.n as f64).ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|f| (f.e as f64).ln()).collect();
    if xs.iter().all(|x| *x == xs[0]) {
        return Err(GangError::DegenerateFit);
    }
    let (a, b, _) = least_squares(&xs, &ys);
    Ok(EdplFit { c: a.exp(), alpha: b, points: pts.len() })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum LogBase {
    #[default]
    Natural,
    Ten,
}

impl LogBase {
    fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.ln(),
            LogBase::Ten => x.log10(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeScore {
    pub node: AccountName,
    pub n: usize,
    pub e: usize,
    pub expected: f64,
    pub score: f64,
    /// `E` lies strictly above the fitted line.
    pub above: bool,
}

/// `max(E, Ê) / min(E, Ê) * log(|E - Ê| + 1)` with `Ê = C * N^alpha`.
pub fn outlierness_score(e: f64, expected: f64, base: LogBase) -> f64 {
    let ratio = e.max(expected) / e.min(expected);
    ratio * base.log((e - expected).abs() + 1.0)
}

pub fn outlierness(features: &[EgonetFeature], fit: &EdplFit, base: LogBase) -> Vec<NodeScore> {
    features
        .iter()
        .map(|f| {
            let expected = fit.expected(f.n);
            let e = f.e as f64;
            NodeScore {
                node: f.node.clone(),
                n: f.n,
                e: f.e,
                expected,
                score: outlierness_score(e, expected, base),
                above: e > expected,
            }
        })
        .collect()
}

/// The `ceil(pct * scored)` highest-scoring above-line nodes (ties by name).
pub fn near_clique_anomalies(scores: &[NodeScore], pct: f64) -> Result<Vec<AccountName>, GangError> {
    if !(pct > 0.0 && pct <= 1.0) {
        return Err(GangError::BadFraction(pct));
    }
    let k = (pct * scores.len() as f64).ceil() as usize;
    let mut above: Vec<&NodeScore> = scores.iter().filter(|s| s.above).collect();
    above.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.node.cmp(&b.node)));
    Ok(above.into_iter().take(k).map(|s| s.node.clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::name;
    use crate::timeline::EdgeStats;

    fn nm(prefix: &str, i: usize) -> AccountName {
        let mut s = prefix.to_string();
        let mut k = i;
        for _ in 0..3 {
            s.push((b'a' + (k % 26) as u8) as char);
            k /= 26;
        }
        name(&s)
    }

    fn link(g: &mut VotingGraph, a: &AccountName, b: &AccountName) {
        g.add_edge(a, b, EdgeStats { f: 1, t: 1, p: 1.0 });
    }

    #[test]
    fn star_and_clique_features() {
        let mut g = VotingGraph::new();
        let center = name("star");
        g.set_candidate(&center, true);
        for i in 0..7 {
            link(&mut g, &nm("lf", i), &center);
        }
        let clique: Vec<_> = (0..5).map(|i| nm("cq", i)).collect();
        for a in &clique {
            g.set_candidate(a, true);
            for b in &clique {
                if a < b {
                    link(&mut g, a, b);
                }
            }
        }
        let f = egonet_features(&g, Exec::Sequential);
        let star = f.iter().find(|x| x.node == center).unwrap();
        assert_eq!((star.n, star.e), (7, 7));
        for x in f.iter().filter(|x| x.node != center) {
            assert_eq!((x.n, x.e), (4, 10));
        }
        assert_eq!(f, egonet_features(&g, Exec::Parallel));
    }

    fn feat(n: usize, e: usize) -> EgonetFeature {
        EgonetFeature { node: nm("nd", n * 1000 + e), n, e }
    }

    #[test]
    fn fit_recovers_generator() {
        // integer E cannot follow 1.2 N^1.5 exactly, so fit real-valued points
        let xs: Vec<f64> = (2..40).map(|n| (n as f64).ln()).collect();
        let ys: Vec<f64> = (2..40).map(|n| (1.2 * (n as f64).powf(1.5)).ln()).collect();
        let (a, b, _) = least_squares(&xs, &ys);
        assert!((a.exp() - 1.2).abs() < 1e-6 && (b - 1.5).abs() < 1e-6);

        let stars: Vec<_> = (2..30).map(|n| feat(n, n)).collect();
        let fit = fit_edpl(&stars).unwrap();
        assert!((fit.alpha - 1.0).abs() < 1e-9 && (fit.c - 1.0).abs() < 1e-9);

        let mut mixed = stars.clone();
        mixed.extend((2..30).map(|n| feat(n, n * (n + 1) / 2)));
        let fit = fit_edpl(&mixed).unwrap();
        assert!(fit.alpha > 1.0 && fit.alpha < 2.0);

        assert_eq!(fit_edpl(&stars[..5]), Err(GangError::TooFewFitPoints(5)));
    }

    #[test]
    fn score_examples() {
        assert_eq!(outlierness_score(10.0, 10.0, LogBase::Natural), 0.0);
        assert!((outlierness_score(20.0, 10.0, LogBase::Natural) - 2.0 * 11f64.ln()).abs() < 1e-12);
        assert!((outlierness_score(20.0, 10.0, LogBase::Natural) - 4.795_790_545_596_741).abs() < 1e-12);
    }

    #[test]
    fn only_above_line_qualify() {
        let fit = EdplFit { c: 1.0, alpha: 1.0, points: 10 };
        let fs = vec![feat(10, 40), feat(10, 10), feat(40, 40), feat(5, 9)];
        let scores = outlierness(&fs, &fit, LogBase::Natural);
        let a = near_clique_anomalies(&scores, 0.5).unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(a[0], fs[0].node);
    }
}
