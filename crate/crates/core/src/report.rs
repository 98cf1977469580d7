//! Serializable analysis reports and their CSV tables.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::cluster::{
    cluster_voters, common_name_prefix, creator_concordance, sample_voting_records, select_population, ClusterError,
    Population,
};
use crate::exec::Exec;
use crate::gang::{analyze_gangs, EdplFit, GangError, GangParams, LogBase, NodeScore, VotingGraph};
use crate::metrics::{
    monthly_production, participation_series, powerlaw_exponent, producer_turnover, production_entropy_with, EntropyNorm,
    proxy_share_series, stake_distribution, stake_top_share, EntropyScope, MetricsError, ParticipationPoint,
    PowerLawFit, ProxyShares, Turnover,
};
use crate::model::{AccountName, Action, BlockHeader, Payload, SECONDS_PER_DAY};
use crate::motif::{detect_all, motif_series, relationship_components, MotifCount, MotifInstance, MotifParams, Shape};
use crate::replay::{replay_sampled, trace_sample_times, RejectedAction, ReplayError, SampleCadence, VotingSnapshot};
use crate::time::YearMonth;
use crate::timeline::{build_timeline, Timeline};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Gang(#[from] GangError),
    #[error("{0}")]
    Params(String),
}

/// Every tunable of the analyses, with the defaults used in the study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisParams {
    pub theta: f64,
    pub window_days: f64,
    pub top_stake_pct: f64,
    pub outlier_pct: f64,
    pub entropy_n: Vec<EntropyScope>,
    pub entropy_norm: EntropyNorm,
    pub seed: u64,
    pub snapshot_cadence: SampleCadence,
    pub log_base: LogBase,
    pub strict_distinct_proxies: bool,
    pub populations: Vec<Population>,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        AnalysisParams {
            theta: 0.9,
            window_days: 7.0,
            top_stake_pct: 0.05,
            outlier_pct: 0.10,
            entropy_n: vec![EntropyScope::Top(10), EntropyScope::Top(20), EntropyScope::All],
            entropy_norm: EntropyNorm::Restricted,
            seed: 0,
            snapshot_cadence: SampleCadence::Monthly,
            log_base: LogBase::Natural,
            strict_distinct_proxies: false,
            populations: vec![Population::LargeStakeholders, Population::Proxies],
        }
    }
}

impl AnalysisParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(format!("theta out of range: {} (expected 0 < theta <= 1)", self.theta));
        }
        if !(self.window_days.is_finite() && self.window_days >= 0.0) {
            return Err(format!("window out of range: {} days", self.window_days));
        }
        for (flag, v) in [("top-stake-pct", self.top_stake_pct), ("outlier-pct", self.outlier_pct)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(format!("{flag} out of range: {v} (expected 0 < p <= 1)"));
            }
        }
        if self.entropy_n.is_empty() {
            return Err("entropy-n needs at least one scope".into());
        }
        Ok(())
    }

    pub fn motif_params(&self) -> MotifParams {
        MotifParams {
            window: (self.window_days * SECONDS_PER_DAY as f64).round() as i64,
            strict_distinct_proxies: self.strict_distinct_proxies,
        }
    }

    pub fn gang_params(&self) -> GangParams {
        GangParams { outlier_pct: self.outlier_pct, log_base: self.log_base, seed: self.seed }
    }
}

/// Table written as `<name>.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, header: &[&str]) -> Self {
        Table { name: name.to_string(), header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, out: impl Write) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn s<T: ToString>(v: T) -> String {
    v.to_string()
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Trace replayed once, with snapshots at the configured cadence.
pub struct Replayed {
    pub snapshots: Vec<VotingSnapshot>,
    pub summary: ReplaySummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplaySummary {
    pub actions: usize,
    pub applied: usize,
    pub rejected: Vec<RejectedAction>,
    pub notices: usize,
    pub accounts: usize,
    pub candidates: usize,
    pub proxies: usize,
    pub state_digest: String,
    pub sample_times: Vec<i64>,
    /// Final top-21 by received weight.
    pub top_producers: Vec<(AccountName, f64)>,
}

pub fn replay_trace(trace: &[Action], cadence: SampleCadence) -> Result<Replayed, ReportError> {
    let times = trace_sample_times(trace, cadence);
    let (out, snapshots) = replay_sampled(trace, &times)?;
    let weights = out.state.candidate_weights();
    let top_producers = out.state.top_n_producers(21).into_iter().map(|c| {
        let w = weights[&c].0;
        (c, w)
    });
    let summary = ReplaySummary {
        actions: trace.len(),
        applied: trace.len() - out.log.rejected.len(),
        notices: out.log.notices.len(),
        accounts: out.state.accounts().len(),
        candidates: out.state.candidate_names().count(),
        proxies: out.state.proxies().len(),
        state_digest: out.state.digest(),
        sample_times: times,
        top_producers: top_producers.collect(),
        rejected: out.log.rejected,
    };
    Ok(Replayed { snapshots, summary })
}

pub fn replay_tables(summary: &ReplaySummary, snapshots: &[VotingSnapshot]) -> Vec<Table> {
    let mut rejected = Table::new("replay_rejected", &["index", "block", "seq", "actor", "kind", "reason"]);
    for r in &summary.rejected {
        rejected.push(vec![s(r.index), s(r.block), s(r.seq), s(&r.actor), r.kind.clone(), s(&r.reason)]);
    }
    let mut samples = Table::new("replay_samples", &["timestamp", "accounts", "stakeholders", "voters", "total_stake"]);
    for snap in snapshots {
        samples.push(vec![
            s(snap.taken_at),
            s(snap.accounts),
            s(snap.stakeholders),
            s(snap.per_voter.len()),
            s(snap.total_stake.0),
        ]);
    }
    vec![rejected, samples]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FitOutcome {
    Fitted(PowerLawFit),
    Skipped { reason: String },
}

impl FitOutcome {
    fn of(values: &[f64]) -> Self {
        match powerlaw_exponent(values) {
            Ok(f) => FitOutcome::Fitted(f),
            Err(e) => FitOutcome::Skipped { reason: e.to_string() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyRow {
    pub month: YearMonth,
    pub blocks: u64,
    pub producers: usize,
    /// Keyed by scope (`10`, `20`, `all`).
    pub entropy: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopSharePoint {
    pub timestamp: i64,
    pub voters: usize,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub entropy: Vec<EntropyRow>,
    pub top_stake_share: Vec<TopSharePoint>,
    pub voter_weights: Vec<(AccountName, f64)>,
    pub candidate_weights: Vec<(AccountName, f64)>,
    pub voter_weight_fit: FitOutcome,
    pub candidate_weight_fit: FitOutcome,
    pub participation: Vec<ParticipationPoint>,
    pub proxy_shares: ProxyShares,
    pub turnover: Turnover,
}

fn ranked(mut v: Vec<(AccountName, f64)>) -> Vec<(AccountName, f64)> {
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v
}

pub fn metrics_report(
    headers: &[BlockHeader],
    snapshots: &[VotingSnapshot],
    params: &AnalysisParams,
) -> Result<MetricsReport, ReportError> {
    let mut entropy = Vec::new();
    for month in monthly_production(headers) {
        let mut values = BTreeMap::new();
        for scope in &params.entropy_n {
            values.insert(scope.to_string(), production_entropy_with(&month, *scope, params.entropy_norm)?);
        }
        entropy.push(EntropyRow { month: month.month, blocks: month.total(), producers: month.counts.len(), entropy: values });
    }

    let mut top_stake_share = Vec::new();
    for snap in snapshots.iter().filter(|s| !s.per_voter.is_empty()) {
        let dist = stake_distribution(snap, true);
        if let Ok(share) = stake_top_share(&dist, params.top_stake_pct) {
            top_stake_share.push(TopSharePoint { timestamp: snap.taken_at, voters: dist.len(), share });
        }
    }

    let last = snapshots.last();
    let voter_weights = ranked(last.map_or_else(Vec::new, |s| {
        s.per_voter.iter().filter(|(_, v)| v.weight > 0.0).map(|(n, v)| (n.clone(), v.weight)).collect()
    }));
    let candidate_weights = ranked(last.map_or_else(Vec::new, |s| {
        s.per_candidate.iter().filter(|(_, w)| **w > 0.0).map(|(n, w)| (n.clone(), *w)).collect()
    }));
    let voter_weight_fit = FitOutcome::of(&voter_weights.iter().map(|x| x.1).collect::<Vec<_>>());
    let candidate_weight_fit = FitOutcome::of(&candidate_weights.iter().map(|x| x.1).collect::<Vec<_>>());

    Ok(MetricsReport {
        entropy,
        top_stake_share,
        voter_weights,
        candidate_weights,
        voter_weight_fit,
        candidate_weight_fit,
        participation: participation_series(snapshots),
        proxy_shares: proxy_share_series(snapshots),
        turnover: producer_turnover(headers),
    })
}

pub fn metrics_tables(r: &MetricsReport, params: &AnalysisParams) -> Vec<Table> {
    let mut participation = Table::new(
        "fig2_participation",
        &["timestamp", "stakeholders", "voters", "total_stake", "voter_stake", "top_stake_share"],
    );
    let shares: BTreeMap<i64, f64> = r.top_stake_share.iter().map(|p| (p.timestamp, p.share)).collect();
    for p in &r.participation {
        participation.push(vec![
            s(p.timestamp),
            s(p.stakeholders),
            s(p.voters),
            s(p.total_stake),
            s(p.voter_stake),
            opt(shares.get(&p.timestamp)),
        ]);
    }

    let mut weights = Table::new("fig3_weight_distribution", &["kind", "rank", "account", "weight"]);
    for (kind, list) in [("voter", &r.voter_weights), ("candidate", &r.candidate_weights)] {
        for (i, (n, w)) in list.iter().enumerate() {
            weights.push(vec![kind.into(), s(i + 1), s(n), s(w)]);
        }
    }

    let mut proxies = Table::new(
        "fig4_proxy_shares",
        &[
            "timestamp",
            "accounts_all",
            "accounts_proxied",
            "accounts_share",
            "stake_all",
            "stake_proxied",
            "stake_share",
            "weight_all",
            "weight_proxied",
            "weight_share",
        ],
    );
    let ps = &r.proxy_shares;
    for ((a, st), w) in ps.accounts.points.iter().zip(&ps.stake.points).zip(&ps.weight.points) {
        proxies.push(vec![
            s(a.timestamp),
            s(a.all_value),
            s(a.proxied_value),
            s(a.share),
            s(st.all_value),
            s(st.proxied_value),
            s(st.share),
            s(w.all_value),
            s(w.proxied_value),
            s(w.share),
        ]);
    }

    let mut turnover = Table::new("fig6_producer_turnover", &["month", "producers", "cumulative"]);
    for ((m, n), (_, c)) in r.turnover.monthly.iter().zip(&r.turnover.cumulative) {
        turnover.push(vec![s(m), s(n), s(c)]);
    }
    let mut days = Table::new("fig6_producer_days", &["producer", "active_days"]);
    for (p, d) in &r.turnover.active_days {
        days.push(vec![s(p), s(d)]);
    }

    let scopes: Vec<String> = params.entropy_n.iter().map(|s| s.to_string()).collect();
    let mut header = vec!["month".to_string(), "blocks".into(), "producers".into()];
    header.extend(scopes.iter().map(|s| format!("h_{s}")));
    let mut entropy = Table { name: "fig7_entropy".into(), header, rows: Vec::new() };
    for row in &r.entropy {
        let mut cells = vec![s(row.month), s(row.blocks), s(row.producers)];
        cells.extend(scopes.iter().map(|k| opt(row.entropy.get(k))));
        entropy.push(cells);
    }
    vec![participation, weights, proxies, turnover, days, entropy]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRow {
    pub id: usize,
    pub seed: AccountName,
    pub members: BTreeSet<AccountName>,
    pub mean_similarity: f64,
    pub creators: BTreeMap<String, usize>,
    pub single_creator: bool,
    pub common_prefix: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationClusters {
    pub population: Population,
    pub voters: usize,
    pub clusters: Vec<ClusterRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub sample_times: Vec<i64>,
    pub populations: Vec<PopulationClusters>,
}

pub fn cluster_report(
    snapshots: &[VotingSnapshot],
    creators: &BTreeMap<AccountName, Option<AccountName>>,
    params: &AnalysisParams,
    exec: Exec,
) -> Result<ClusterReport, ReportError> {
    let mut populations = Vec::new();
    for &population in &params.populations {
        let voters = select_population(snapshots, population, params.top_stake_pct)?;
        let records = sample_voting_records(snapshots, &voters);
        let clusters = cluster_voters(&voters, &records, params.theta, exec)?;
        let concordance = creator_concordance(&clusters, creators);
        let rows = clusters
            .into_iter()
            .zip(concordance)
            .map(|(c, k)| ClusterRow {
                id: c.id,
                common_prefix: common_name_prefix(&c.members),
                seed: c.seed,
                members: c.members,
                mean_similarity: c.mean_similarity,
                creators: k.creators,
                single_creator: k.single_creator,
            })
            .collect();
        populations.push(PopulationClusters { population, voters: voters.len(), clusters: rows });
    }
    Ok(ClusterReport { sample_times: snapshots.iter().map(|s| s.taken_at).collect(), populations })
}

/// First and last direct vote time per account.
fn vote_times(trace: &[Action]) -> BTreeMap<&AccountName, (i64, i64)> {
    let mut out: BTreeMap<&AccountName, (i64, i64)> = BTreeMap::new();
    for a in trace {
        if let Payload::VoteProducer { .. } = a.payload {
            let e = out.entry(&a.actor).or_insert((a.timestamp, a.timestamp));
            e.1 = a.timestamp;
        }
    }
    out
}

pub fn cluster_tables(r: &ClusterReport, trace: &[Action], creators: &BTreeMap<AccountName, Option<AccountName>>) -> Vec<Table> {
    let times = vote_times(trace);
    let mut tables = Vec::new();
    let mut by_creator = Table::new("cluster_creators", &["population", "cluster", "creator", "members"]);
    for pop in &r.populations {
        let name = match pop.population {
            Population::LargeStakeholders => "fig9_large_stakeholder_clusters",
            Population::Proxies => "fig11_proxy_clusters",
            Population::DirectVoters => "clusters_direct_voters",
        };
        let mut t = Table::new(name, &["cluster", "member", "creator", "first_vote", "last_vote", "mean_similarity"]);
        for c in &pop.clusters {
            for m in &c.members {
                let creator = creators.get(m).cloned().flatten().map_or_else(|| crate::cluster::ROOT_CREATOR.into(), |c| c.to_string());
                let (first, last) = times.get(m).copied().unzip();
                t.push(vec![s(c.id), s(m), creator, opt(first), opt(last), s(c.mean_similarity)]);
            }
            for (creator, n) in &c.creators {
                by_creator.push(vec![pop.population.as_str().into(), s(c.id), creator.clone(), s(n)]);
            }
        }
        tables.push(t);
    }
    tables.push(by_creator);
    tables
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotifReport {
    pub window_seconds: i64,
    pub strict_distinct_proxies: bool,
    pub totals: BTreeMap<Shape, usize>,
    pub monthly: Vec<MotifCount>,
    pub instances: Vec<MotifInstance>,
    pub components: BTreeMap<Shape, Vec<crate::motif::RelationshipComponent>>,
}

pub fn motif_report(timeline: &Timeline, params: &AnalysisParams, exec: Exec) -> MotifReport {
    let mp = params.motif_params();
    let instances = detect_all(&timeline.events, &timeline.candidates, &mp, exec);
    let months = if timeline.events.is_empty() {
        Vec::new()
    } else {
        YearMonth::of(timeline.start).through(YearMonth::of(timeline.end))
    };
    let mut totals: BTreeMap<Shape, usize> = Shape::ALL.iter().map(|s| (*s, 0)).collect();
    for m in &instances {
        *totals.get_mut(&m.shape).unwrap() += 1;
    }
    let components = Shape::ALL.iter().map(|&s| (s, relationship_components(&instances, s))).collect();
    MotifReport {
        window_seconds: mp.window,
        strict_distinct_proxies: mp.strict_distinct_proxies,
        totals,
        monthly: motif_series(&instances, &months),
        instances,
        components,
    }
}

pub fn motif_tables(r: &MotifReport) -> Vec<Table> {
    let mut counts = Table::new("fig12_motif_counts", &["month", "linear", "triangular", "eight"]);
    for c in &r.monthly {
        counts.push(vec![s(c.month), s(c.linear), s(c.triangular), s(c.eight)]);
    }
    let mut inst = Table::new(
        "motif_instances",
        &["shape", "month", "window_start", "participants", "forward_time", "backward_time"],
    );
    for m in &r.instances {
        let names: Vec<&str> = m.participants.iter().map(|p| p.as_str()).collect();
        inst.push(vec![
            m.shape.as_str().into(),
            s(m.month()),
            s(m.window_start),
            names.join(" "),
            s(m.witnesses[0].timestamp),
            s(m.witnesses[1].timestamp),
        ]);
    }
    vec![counts, inst]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkEdge {
    pub a: AccountName,
    pub b: AccountName,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityRow {
    pub src: AccountName,
    pub dst: AccountName,
    pub f_ratio: f64,
    pub t_ratio: f64,
    pub p_ratio: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GangsReport {
    pub graph_nodes: usize,
    pub graph_edges: usize,
    pub graph_candidates: usize,
    pub fit: EdplFit,
    pub scores: Vec<NodeScore>,
    pub anomalies: Vec<AccountName>,
    pub network_nodes: Vec<AccountName>,
    pub network_edges: Vec<NetworkEdge>,
    pub intensities: Vec<IntensityRow>,
    pub communities: Vec<crate::gang::Community>,
    pub modularity: f64,
    pub pruned: Vec<AccountName>,
}

pub fn gangs_report(graph: &VotingGraph, params: &AnalysisParams, exec: Exec) -> Result<GangsReport, ReportError> {
    let a = analyze_gangs(graph, &params.gang_params(), exec)?;
    let nodes = &a.network.nodes;
    Ok(GangsReport {
        graph_nodes: graph.len(),
        graph_edges: graph.edge_count(),
        graph_candidates: graph.candidates().count(),
        fit: a.fit,
        scores: a.scores,
        anomalies: a.anomalies,
        network_edges: a
            .network
            .edges
            .iter()
            .map(|&(i, j, w)| NetworkEdge { a: nodes[i].clone(), b: nodes[j].clone(), weight: w })
            .collect(),
        intensities: a
            .network
            .intensities
            .iter()
            .map(|(&(i, j), x)| IntensityRow {
                src: nodes[i].clone(),
                dst: nodes[j].clone(),
                f_ratio: x.f_ratio,
                t_ratio: x.t_ratio,
                p_ratio: x.p_ratio,
                value: x.value,
            })
            .collect(),
        network_nodes: a.network.nodes.clone(),
        communities: a.report.communities,
        modularity: a.report.modularity,
        pruned: a.report.pruned,
    })
}

pub fn gang_tables(r: &GangsReport, timeline: &Timeline) -> Vec<Table> {
    let mut network = Table::new("voting_network", &["src", "dst", "src_candidate", "dst_candidate", "f", "t", "p"]);
    for ((a, b), e) in &timeline.edges {
        network.push(vec![
            s(a),
            s(b),
            s(timeline.candidates.contains(a)),
            s(timeline.candidates.contains(b)),
            s(e.f),
            s(e.t),
            s(e.p),
        ]);
    }
    let anomalies: BTreeSet<&AccountName> = r.anomalies.iter().collect();
    let mut outlierness = Table::new("fig14_outlierness", &["node", "n", "e", "expected", "score", "above", "anomaly"]);
    for x in &r.scores {
        outlierness.push(vec![
            s(&x.node),
            s(x.n),
            s(x.e),
            s(x.expected),
            s(x.score),
            s(x.above),
            s(anomalies.contains(&x.node)),
        ]);
    }
    let mut gang_net = Table::new("fig13_gang_network", &["a", "b", "weight", "community_a", "community_b"]);
    let community: BTreeMap<&AccountName, usize> =
        r.communities.iter().flat_map(|c| c.members.iter().map(move |m| (m, c.id))).collect();
    for e in &r.network_edges {
        gang_net.push(vec![s(&e.a), s(&e.b), s(e.weight), opt(community.get(&e.a)), opt(community.get(&e.b))]);
    }
    let mut members = Table::new("fig13_communities", &["community", "member", "internal_weight"]);
    for c in &r.communities {
        for m in &c.members {
            members.push(vec![s(c.id), s(m), s(c.internal_weight)]);
        }
    }
    vec![network, outlierness, gang_net, members]
}

/// Accounts flagged by each method and the pairwise overlaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub flagged: BTreeMap<String, BTreeSet<AccountName>>,
    pub overlaps: Vec<Overlap>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Overlap {
    pub a: String,
    pub b: String,
    pub common: usize,
}

/// The two voters of a motif instance (proxies excluded).
pub fn motif_voters(m: &MotifInstance) -> [&AccountName; 2] {
    [&m.witnesses[0].src, &m.witnesses[0].dst]
}

pub fn summary(clusters: &ClusterReport, motifs: &MotifReport, gangs: &GangsReport) -> Summary {
    let mut flagged: BTreeMap<String, BTreeSet<AccountName>> = BTreeMap::new();
    for pop in &clusters.populations {
        let set = pop.clusters.iter().flat_map(|c| c.members.iter().cloned()).collect();
        flagged.insert(format!("clusters_{}", pop.population.as_str()), set);
    }
    for shape in Shape::ALL {
        let set = motifs
            .instances
            .iter()
            .filter(|m| m.shape == shape)
            .flat_map(|m| motif_voters(m).map(|a| a.clone()))
            .collect();
        flagged.insert(format!("motifs_{}", shape.as_str()), set);
    }
    flagged.insert("oddball_anomalies".into(), gangs.anomalies.iter().cloned().collect());
    flagged.insert("gangs".into(), gangs.communities.iter().flat_map(|c| c.members.iter().cloned()).collect());
    let keys: Vec<&String> = flagged.keys().collect();
    let mut overlaps = Vec::new();
    for (i, a) in keys.iter().enumerate() {
        for b in &keys[i + 1..] {
            overlaps.push(Overlap {
                a: (*a).clone(),
                b: (*b).clone(),
                common: flagged[*a].intersection(&flagged[*b]).count(),
            });
        }
    }
    Summary { flagged, overlaps }
}

pub fn summary_tables(r: &Summary) -> Vec<Table> {
    let mut t = Table::new("summary_overlaps", &["method_a", "method_b", "size_a", "size_b", "common"]);
    for o in &r.overlaps {
        t.push(vec![o.a.clone(), o.b.clone(), s(r.flagged[&o.a].len()), s(r.flagged[&o.b].len()), s(o.common)]);
    }
    vec![t]
}

/// Timeline and graph built from one replay.
pub fn voting_graph(trace: &[Action]) -> Result<(Timeline, VotingGraph), ReportError> {
    let (timeline, _) = build_timeline(trace)?;
    let graph = VotingGraph::from_timeline(&timeline);
    Ok((timeline, graph))
}
