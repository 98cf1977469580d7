//! Mutual-voting motifs between candidates: direct (linear), one side via a
//! proxy (triangular), and both sides via proxies (eight-shaped).

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::exec::Exec;
use crate::model::{AccountName, SECONDS_PER_DAY};
use crate::time::YearMonth;
use crate::timeline::VoteEvent;

pub const DEFAULT_WINDOW: i64 = 7 * SECONDS_PER_DAY;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Linear,
    Triangular,
    Eight,
}

impl Shape {
    pub const ALL: [Shape; 3] = [Shape::Linear, Shape::Triangular, Shape::Eight];

    pub fn as_str(self) -> &'static str {
        match self {
            Shape::Linear => "linear",
            Shape::Triangular => "triangular",
            Shape::Eight => "eight",
        }
    }

    /// Role of each entry of [`MotifInstance::participants`].
    pub fn roles(self) -> &'static [&'static str] {
        match self {
            Shape::Linear => &["voter_a", "voter_b"],
            Shape::Triangular => &["voter_a", "proxy_a", "voter_b"],
            Shape::Eight => &["voter_a", "proxy_a", "voter_b", "proxy_b"],
        }
    }
}

/// `witnesses[0]` is `voter_a -> voter_b`, `witnesses[1]` the vote back.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MotifInstance {
    pub window_start: i64,
    pub shape: Shape,
    pub participants: Vec<AccountName>,
    pub witnesses: [VoteEvent; 2],
}

impl MotifInstance {
    pub fn month(&self) -> YearMonth {
        YearMonth::of(self.window_start)
    }

    /// Dedup key: one instance per participant tuple and month.
    pub fn key(&self) -> (Shape, Vec<AccountName>, YearMonth) {
        (self.shape, self.participants.clone(), self.month())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MotifParams {
    /// Maximum gap in seconds between the two witness events (inclusive).
    pub window: i64,
    /// Require two different proxy accounts for the eight shape.
    pub strict_distinct_proxies: bool,
}

impl Default for MotifParams {
    fn default() -> Self {
        MotifParams { window: DEFAULT_WINDOW, strict_distinct_proxies: false }
    }
}

/// Keeps events between two distinct candidates.
pub fn restrict_to_candidates(events: &[VoteEvent], candidates: &BTreeSet<AccountName>) -> Vec<VoteEvent> {
    events
        .iter()
        .filter(|e| e.src != e.dst && candidates.contains(&e.src) && candidates.contains(&e.dst))
        .cloned()
        .collect()
}

/// Checks the shape predicate of an instance against its witnesses.
pub fn verify_instance(m: &MotifInstance, params: &MotifParams) -> bool {
    let [f, b] = &m.witnesses;
    let p = &m.participants;
    let gap_ok = (f.timestamp - b.timestamp).abs() <= params.window;
    let start_ok = m.window_start == f.timestamp.min(b.timestamp);
    let pair_ok = |a: &AccountName, bb: &AccountName| f.src == *a && f.dst == *bb && b.src == *bb && b.dst == *a && a != bb;
    let shape_ok = match m.shape {
        Shape::Linear => {
            p.len() == 2 && p[0] < p[1] && pair_ok(&p[0], &p[1]) && f.via_proxy.is_none() && b.via_proxy.is_none()
        }
        Shape::Triangular => {
            p.len() == 3
                && pair_ok(&p[0], &p[2])
                && f.via_proxy.as_ref() == Some(&p[1])
                && b.via_proxy.is_none()
                && p[1] != p[0]
                && p[1] != p[2]
        }
        Shape::Eight => {
            p.len() == 4
                && p[0] < p[2]
                && pair_ok(&p[0], &p[2])
                && f.via_proxy.as_ref() == Some(&p[1])
                && b.via_proxy.as_ref() == Some(&p[3])
                && ![&p[0], &p[2]].contains(&&p[1])
                && ![&p[0], &p[2]].contains(&&p[3])
                && !(params.strict_distinct_proxies && p[1] == p[3])
        }
    };
    gap_ok && start_ok && shape_ok
}

type Witness<'a> = (i64, &'a VoteEvent, &'a VoteEvent);

fn witness_order(w: &Witness) -> (i64, i64, usize, i64, usize) {
    (w.0, w.1.timestamp, w.1.action, w.2.timestamp, w.2.action)
}

/// Earliest satisfying witness pair per month for two time-sorted lists.
fn pair_up<'a>(fwd: &[&'a VoteEvent], bwd: &[&'a VoteEvent], window: i64) -> BTreeMap<YearMonth, Witness<'a>> {
    let mut best: BTreeMap<YearMonth, Witness<'a>> = BTreeMap::new();
    for f in fwd {
        let lo = bwd.partition_point(|b| b.timestamp < f.timestamp - window);
        let hi = bwd.partition_point(|b| b.timestamp <= f.timestamp + window);
        for b in &bwd[lo..hi] {
            let w: Witness = (f.timestamp.min(b.timestamp), f, b);
            let slot = best.entry(YearMonth::of(w.0)).or_insert(w);
            if witness_order(&w) < witness_order(slot) {
                *slot = w;
            }
        }
    }
    best
}

/// Time-sorted events grouped by `(src, dst)` and then by proxy.
struct EventIndex<'a> {
    direct: HashMap<(&'a AccountName, &'a AccountName), Vec<&'a VoteEvent>>,
    proxied: HashMap<(&'a AccountName, &'a AccountName), BTreeMap<&'a AccountName, Vec<&'a VoteEvent>>>,
}

impl<'a> EventIndex<'a> {
    fn new(events: &'a [VoteEvent]) -> Self {
        let mut direct: HashMap<_, Vec<&VoteEvent>> = HashMap::new();
        let mut proxied: HashMap<_, BTreeMap<_, Vec<&VoteEvent>>> = HashMap::new();
        for e in events.iter().filter(|e| e.src != e.dst) {
            match &e.via_proxy {
                None => direct.entry((&e.src, &e.dst)).or_default().push(e),
                Some(p) => proxied.entry((&e.src, &e.dst)).or_default().entry(p).or_default().push(e),
            }
        }
        let by_time = |v: &mut Vec<&VoteEvent>| v.sort_by_key(|e| (e.timestamp, e.action));
        direct.values_mut().for_each(by_time);
        proxied.values_mut().flat_map(|m| m.values_mut()).for_each(by_time);
        EventIndex { direct, proxied }
    }

    /// Unordered account pairs `(a, b)`, `a < b`, with events in both directions.
    fn reciprocal_pairs(&self) -> Vec<(&'a AccountName, &'a AccountName)> {
        let mut keys: BTreeSet<(&AccountName, &AccountName)> = BTreeSet::new();
        for &(s, d) in self.direct.keys().chain(self.proxied.keys()) {
            let back = (d, s);
            if self.direct.contains_key(&back) || self.proxied.contains_key(&back) {
                keys.insert(if s < d { (s, d) } else { (d, s) });
            }
        }
        keys.into_iter().collect()
    }

    fn direct(&self, s: &'a AccountName, d: &'a AccountName) -> &[&'a VoteEvent] {
        self.direct.get(&(s, d)).map_or(&[], |v| v.as_slice())
    }

    fn proxied(&self, s: &'a AccountName, d: &'a AccountName) -> impl Iterator<Item = (&'a AccountName, &[&'a VoteEvent])> {
        self.proxied.get(&(s, d)).into_iter().flatten().map(|(p, v)| (*p, v.as_slice()))
    }
}

fn emit(out: &mut Vec<MotifInstance>, shape: Shape, participants: Vec<&AccountName>, found: BTreeMap<YearMonth, Witness>) {
    for (_, (start, f, b)) in found {
        out.push(MotifInstance {
            window_start: start,
            shape,
            participants: participants.iter().map(|a| (*a).clone()).collect(),
            witnesses: [f.clone(), b.clone()],
        });
    }
}

fn pair_instances(
    idx: &EventIndex,
    a: &AccountName,
    b: &AccountName,
    shape: Shape,
    params: &MotifParams,
) -> Vec<MotifInstance> {
    let w = params.window;
    let mut out = Vec::new();
    match shape {
        Shape::Linear => {
            let found = pair_up(idx.direct(a, b), idx.direct(b, a), w);
            emit(&mut out, shape, vec![a, b], found);
        }
        Shape::Triangular => {
            for (x, y) in [(a, b), (b, a)] {
                for (p, fwd) in idx.proxied(x, y) {
                    if p == x || p == y {
                        continue;
                    }
                    let found = pair_up(fwd, idx.direct(y, x), w);
                    emit(&mut out, shape, vec![x, p, y], found);
                }
            }
        }
        Shape::Eight => {
            for (p1, fwd) in idx.proxied(a, b) {
                if p1 == a || p1 == b {
                    continue;
                }
                for (p2, bwd) in idx.proxied(b, a) {
                    if p2 == a || p2 == b || (params.strict_distinct_proxies && p1 == p2) {
                        continue;
                    }
                    let found = pair_up(fwd, bwd, w);
                    emit(&mut out, shape, vec![a, p1, b, p2], found);
                }
            }
        }
    }
    out
}

fn detect(events: &[VoteEvent], shape: Shape, params: &MotifParams, exec: Exec) -> Vec<MotifInstance> {
    let idx = EventIndex::new(events);
    let pairs = idx.reciprocal_pairs();
    let mut out: Vec<MotifInstance> =
        exec.map(&pairs, |(a, b)| pair_instances(&idx, a, b, shape, params)).into_iter().flatten().collect();
    out.sort();
    out
}

/// `a -> b` and `b -> a`, both direct.
pub fn detect_linear(events: &[VoteEvent], params: &MotifParams, exec: Exec) -> Vec<MotifInstance> {
    detect(events, Shape::Linear, params, exec)
}

/// `a -> b` through proxy `p`, `b -> a` direct.
pub fn detect_triangular(events: &[VoteEvent], params: &MotifParams, exec: Exec) -> Vec<MotifInstance> {
    detect(events, Shape::Triangular, params, exec)
}

/// `a -> b` through `p1`, `b -> a` through `p2`; `p1 == p2` unless strict.
pub fn detect_eight(events: &[VoteEvent], params: &MotifParams, exec: Exec) -> Vec<MotifInstance> {
    detect(events, Shape::Eight, params, exec)
}

/// All three shapes over candidate-to-candidate events.
pub fn detect_all(
    events: &[VoteEvent],
    candidates: &BTreeSet<AccountName>,
    params: &MotifParams,
    exec: Exec,
) -> Vec<MotifInstance> {
    let restricted = restrict_to_candidates(events, candidates);
    let mut out = Vec::new();
    for shape in Shape::ALL {
        out.extend(detect(&restricted, shape, params, exec));
    }
    out.sort();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MotifCount {
    pub month: YearMonth,
    pub linear: usize,
    pub triangular: usize,
    pub eight: usize,
}

/// Monthly counts for every month in `months`, zero where nothing was found.
/// Instances outside `months` are ignored.
pub fn motif_series(instances: &[MotifInstance], months: &[YearMonth]) -> Vec<MotifCount> {
    let mut counts: BTreeMap<YearMonth, MotifCount> = months
        .iter()
        .map(|&month| (month, MotifCount { month, linear: 0, triangular: 0, eight: 0 }))
        .collect();
    for m in instances {
        if let Some(c) = counts.get_mut(&m.month()) {
            match m.shape {
                Shape::Linear => c.linear += 1,
                Shape::Triangular => c.triangular += 1,
                Shape::Eight => c.eight += 1,
            }
        }
    }
    counts.into_values().collect()
}

/// Connected group of candidates linked by one shape of mutual voting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationshipComponent {
    pub members: BTreeSet<AccountName>,
    pub edges: usize,
    pub average_clustering: f64,
}

/// Components of the undirected graph linking the two voters of each
/// instance of `shape`, largest first.
pub fn relationship_components(instances: &[MotifInstance], shape: Shape) -> Vec<RelationshipComponent> {
    let mut adj: BTreeMap<&AccountName, BTreeSet<&AccountName>> = BTreeMap::new();
    for m in instances.iter().filter(|m| m.shape == shape) {
        let (a, b) = (&m.witnesses[0].src, &m.witnesses[0].dst);
        adj.entry(a).or_default().insert(b);
        adj.entry(b).or_default().insert(a);
    }
    let mut seen: BTreeSet<&AccountName> = BTreeSet::new();
    let mut out = Vec::new();
    for &start in adj.keys() {
        if !seen.insert(start) {
            continue;
        }
        let mut members = vec![start];
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for &u in &adj[v] {
                if seen.insert(u) {
                    members.push(u);
                    stack.push(u);
                }
            }
        }
        let edges = members.iter().map(|v| adj[v].len()).sum::<usize>() / 2;
        let clustering: f64 = members
            .iter()
            .map(|v| {
                let nb: Vec<&&AccountName> = adj[v].iter().collect();
                let k = nb.len();
                if k < 2 {
                    return 0.0;
                }
                let mut links = 0usize;
                for i in 0..k {
                    for j in (i + 1)..k {
                        if adj[*nb[i]].contains(*nb[j]) {
                            links += 1;
                        }
                    }
                }
                2.0 * links as f64 / (k * (k - 1)) as f64
            })
            .sum();
        out.push(RelationshipComponent {
            average_clustering: clustering / members.len() as f64,
            members: members.into_iter().cloned().collect(),
            edges,
        });
    }
    out.sort_by(|a, b| b.members.len().cmp(&a.members.len()).then_with(|| a.members.cmp(&b.members)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::name;

    const DAY: i64 = SECONDS_PER_DAY;
    const T: i64 = 1_546_300_800; // 2019-01-01

    fn ev(i: usize, t: i64, s: &str, d: &str, via: Option<&str>) -> VoteEvent {
        VoteEvent { timestamp: t, action: i, src: name(s), dst: name(d), via_proxy: via.map(name) }
    }

    fn p() -> MotifParams {
        MotifParams::default()
    }

    #[test]
    fn linear_window() {
        let e = vec![ev(0, T, "bpa", "bpb", None), ev(1, T + 3 * DAY, "bpb", "bpa", None)];
        let got = detect_linear(&e, &p(), Exec::Sequential);
        assert_eq!(got.len(), 1);
        assert!(verify_instance(&got[0], &p()));
        let e = vec![ev(0, T, "bpa", "bpb", None), ev(1, T + 8 * DAY, "bpb", "bpa", None)];
        assert!(detect_linear(&e, &p(), Exec::Sequential).is_empty());
        let e = vec![ev(0, T, "bpa", "bpb", None), ev(1, T + 7 * DAY, "bpb", "bpa", None)];
        assert_eq!(detect_linear(&e, &p(), Exec::Sequential).len(), 1);
        let e = vec![ev(0, T, "bpa", "bpb", None), ev(1, T + 7 * DAY + 1, "bpb", "bpa", None)];
        assert!(detect_linear(&e, &p(), Exec::Sequential).is_empty());
    }

    #[test]
    fn triangular_and_eight_roles() {
        let tri = vec![ev(0, T, "bpa", "bpb", Some("prox")), ev(1, T + DAY, "bpb", "bpa", None)];
        let got = detect_triangular(&tri, &p(), Exec::Sequential);
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].participants, vec![name("bpa"), name("prox"), name("bpb")]);
        assert!(detect_linear(&tri, &p(), Exec::Sequential).is_empty());
        assert!(detect_eight(&tri, &p(), Exec::Sequential).is_empty());

        let eight = vec![ev(0, T, "bpa", "bpb", Some("prox")), ev(1, T + DAY, "bpb", "bpa", Some("prox"))];
        assert!(detect_triangular(&eight, &p(), Exec::Sequential).is_empty());
        assert_eq!(detect_eight(&eight, &p(), Exec::Sequential).len(), 1);
        let strict = MotifParams { strict_distinct_proxies: true, ..p() };
        assert!(detect_eight(&eight, &strict, Exec::Sequential).is_empty());

        let one_way = vec![ev(0, T, "bpa", "bpb", Some("prox"))];
        assert!(detect_eight(&one_way, &p(), Exec::Sequential).is_empty());
    }

    #[test]
    fn deduplicated_per_month() {
        let mut e = Vec::new();
        for k in 0..4 {
            e.push(ev(2 * k, T + k as i64 * DAY, "bpa", "bpb", None));
            e.push(ev(2 * k + 1, T + k as i64 * DAY + 60, "bpb", "bpa", None));
        }
        e.push(ev(20, T + 40 * DAY, "bpa", "bpb", None));
        e.push(ev(21, T + 40 * DAY, "bpb", "bpa", None));
        let got = detect_linear(&e, &p(), Exec::Sequential);
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].window_start, T);
    }

    #[test]
    fn series_zero_filled() {
        let months = YearMonth::new(2019, 1).through(YearMonth::new(2019, 3));
        let s = motif_series(&[], &months);
        assert_eq!(s.len(), 3);
        assert!(s.iter().all(|c| c.linear + c.triangular + c.eight == 0));
        let mut e = Vec::new();
        for (k, pair) in [("bpa", "bpb"), ("bpa", "bpc"), ("bpb", "bpc")].iter().enumerate() {
            e.push(ev(2 * k, T + DAY, pair.0, pair.1, None));
            e.push(ev(2 * k + 1, T + DAY, pair.1, pair.0, None));
        }
        let s = motif_series(&detect_linear(&e, &p(), Exec::Sequential), &months);
        assert_eq!(s[0].linear, 3);
    }

    #[test]
    fn component_clustering() {
        // triangle bpa-bpb-bpc plus pendant bpd on bpc
        let mut e = Vec::new();
        for (k, (a, b)) in [("bpa", "bpb"), ("bpb", "bpc"), ("bpa", "bpc"), ("bpc", "bpd")].iter().enumerate() {
            e.push(ev(2 * k, T, a, b, Some("prox")));
            e.push(ev(2 * k + 1, T, b, a, Some("pry")));
        }
        let inst = detect_eight(&e, &p(), Exec::Sequential);
        let comps = relationship_components(&inst, Shape::Eight);
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].edges, 4);
        // local coefficients 1, 1, 1/3, 0
        assert!((comps[0].average_clustering - (7.0 / 3.0) / 4.0).abs() < 1e-12);
    }
}
