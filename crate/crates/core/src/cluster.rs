//! Similarity-based transitive clustering of voters over sampled voting
//! records, and creator concordance of the resulting clusters.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Exec;
use crate::metrics::stake_distribution;
use crate::model::{AccountName, StakeAmount};
use crate::replay::VotingSnapshot;

/// Creator key used for accounts with no recorded creator.
pub const ROOT_CREATOR: &str = "(root)";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error("voting records differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("theta out of range: {0} (expected 0 < theta <= 1)")]
    ThetaOutOfRange(f64),
    #[error("no voting record for {0}")]
    MissingRecord(AccountName),
    #[error("fraction {0} outside (0, 1]")]
    BadFraction(f64),
}

/// One voter's effective candidate set at each sample time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VotingRecord {
    pub voter: AccountName,
    /// Sorted, deduplicated candidate lists, one per sample time.
    pub sets: Vec<Vec<AccountName>>,
}

impl VotingRecord {
    pub fn new(voter: AccountName, sets: Vec<Vec<AccountName>>) -> Self {
        let sets = sets
            .into_iter()
            .map(|mut s| {
                s.sort();
                s.dedup();
                s
            })
            .collect();
        VotingRecord { voter, sets }
    }

    pub fn is_silent(&self) -> bool {
        self.sets.iter().all(|s| s.is_empty())
    }
}

/// Builds a record for every requested voter; absence at a sample time is the
/// empty set.
pub fn sample_voting_records(
    snapshots: &[VotingSnapshot],
    voters: &BTreeSet<AccountName>,
) -> BTreeMap<AccountName, VotingRecord> {
    voters
        .iter()
        .map(|v| {
            let sets = snapshots
                .iter()
                .map(|s| s.per_voter.get(v).map(|e| e.effective.clone()).unwrap_or_default())
                .collect();
            (v.clone(), VotingRecord::new(v.clone(), sets))
        })
        .collect()
}

fn jaccard_sorted<T: Ord>(a: &[T], b: &[T]) -> Option<f64> {
    if a.is_empty() && b.is_empty() {
        return None;
    }
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    Some(inter as f64 / (a.len() + b.len() - inter) as f64)
}

fn mean_jaccard<T: Ord>(a: &[Vec<T>], b: &[Vec<T>]) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for (x, y) in a.iter().zip(b) {
        if let Some(j) = jaccard_sorted(x, y) {
            sum += j;
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Mean per-time Jaccard coefficient, skipping times where both sets are
/// empty. Two silent records have similarity 0.
pub fn record_similarity(a: &VotingRecord, b: &VotingRecord) -> Result<f64, ClusterError> {
    if a.sets.len() != b.sets.len() {
        return Err(ClusterError::LengthMismatch(a.sets.len(), b.sets.len()));
    }
    Ok(mean_jaccard(&a.sets, &b.sets))
}

fn check_theta(theta: f64) -> Result<(), ClusterError> {
    if theta > 0.0 && theta <= 1.0 {
        Ok(())
    } else {
        Err(ClusterError::ThetaOutOfRange(theta))
    }
}

/// Records re-encoded over dense candidate ids for the pairwise pass.
struct Encoded {
    sets: Vec<Vec<Vec<u32>>>,
}

impl Encoded {
    fn new(records: &[&VotingRecord]) -> Self {
        let mut ids: HashMap<&AccountName, u32> = HashMap::new();
        for r in records {
            for s in &r.sets {
                for c in s {
                    let next = ids.len() as u32;
                    ids.entry(c).or_insert(next);
                }
            }
        }
        let sets = records
            .iter()
            .map(|r| {
                r.sets
                    .iter()
                    .map(|s| {
                        let mut v: Vec<u32> = s.iter().map(|c| ids[c]).collect();
                        v.sort_unstable();
                        v
                    })
                    .collect()
            })
            .collect();
        Encoded { sets }
    }

    fn similarity(&self, i: usize, j: usize) -> f64 {
        mean_jaccard(&self.sets[i], &self.sets[j])
    }
}

/// For each voter (by position), the positions of all other voters with
/// similarity at least `theta`.
pub fn similarity_index(records: &[&VotingRecord], theta: f64, exec: Exec) -> Result<Vec<Vec<usize>>, ClusterError> {
    check_theta(theta)?;
    if let Some(first) = records.first() {
        for r in records {
            if r.sets.len() != first.sets.len() {
                return Err(ClusterError::LengthMismatch(first.sets.len(), r.sets.len()));
            }
        }
    }
    let enc = Encoded::new(records);
    let n = records.len();
    // upper triangle per row, then mirrored
    let upper = exec.map_range(n, |i| {
        if records[i].is_silent() {
            return Vec::new();
        }
        ((i + 1)..n).filter(|&j| enc.similarity(i, j) >= theta).collect::<Vec<_>>()
    });
    let mut full: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, row) in upper.iter().enumerate() {
        for &j in row {
            full[i].push(j);
            full[j].push(i);
        }
    }
    for row in &mut full {
        row.sort_unstable();
    }
    Ok(full)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoterCluster {
    pub id: usize,
    /// The center that opened the cluster.
    pub seed: AccountName,
    pub members: BTreeSet<AccountName>,
    /// Mean pairwise record similarity among members.
    pub mean_similarity: f64,
}

/// Iterates centers in ascending name order, absorbing every unvisited voter
/// reachable through θ-similar neighbours. Only clusters with at least two
/// members are returned.
pub fn cluster_voters(
    voters: &BTreeSet<AccountName>,
    records: &BTreeMap<AccountName, VotingRecord>,
    theta: f64,
    exec: Exec,
) -> Result<Vec<VoterCluster>, ClusterError> {
    check_theta(theta)?;
    let ordered: Vec<&VotingRecord> = voters
        .iter()
        .map(|v| records.get(v).ok_or_else(|| ClusterError::MissingRecord(v.clone())))
        .collect::<Result<_, _>>()?;
    let neighbours = similarity_index(&ordered, theta, exec)?;
    let enc = Encoded::new(&ordered);

    let n = ordered.len();
    let mut visited = vec![false; n];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for center in 0..n {
        if visited[center] {
            continue;
        }
        visited[center] = true;
        let mut members = vec![center];
        let mut frontier: Vec<usize> = neighbours[center].clone();
        while let Some(v) = frontier.pop() {
            if visited[v] {
                continue;
            }
            visited[v] = true;
            members.push(v);
            frontier.extend(neighbours[v].iter().copied().filter(|&u| !visited[u]));
        }
        if members.len() >= 2 {
            groups.push(members);
        }
    }

    let mean_sims = exec.map(&groups, |members| {
        let k = members.len();
        let mut sum = 0.0;
        for a in 0..k {
            for b in (a + 1)..k {
                sum += enc.similarity(members[a], members[b]);
            }
        }
        sum / (k * (k - 1) / 2) as f64
    });

    Ok(groups
        .into_iter()
        .zip(mean_sims)
        .enumerate()
        .map(|(id, (members, mean_similarity))| VoterCluster {
            id,
            seed: ordered[members[0]].voter.clone(),
            members: members.iter().map(|&i| ordered[i].voter.clone()).collect(),
            mean_similarity,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Concordance {
    pub cluster_id: usize,
    pub creators: BTreeMap<String, usize>,
    pub single_creator: bool,
}

/// Counts creators per cluster. Members missing from `creation` or mapped to
/// `None` count under [`ROOT_CREATOR`].
pub fn creator_concordance(
    clusters: &[VoterCluster],
    creation: &BTreeMap<AccountName, Option<AccountName>>,
) -> Vec<Concordance> {
    clusters
        .iter()
        .map(|c| {
            let mut creators: BTreeMap<String, usize> = BTreeMap::new();
            for m in &c.members {
                let key = match creation.get(m) {
                    Some(Some(creator)) => creator.to_string(),
                    _ => ROOT_CREATOR.to_string(),
                };
                *creators.entry(key).or_default() += 1;
            }
            Concordance { cluster_id: c.id, single_creator: creators.len() == 1, creators }
        })
        .collect()
}

/// Longest prefix shared by all member names; empty when there is none.
pub fn common_name_prefix(members: &BTreeSet<AccountName>) -> String {
    let mut it = members.iter();
    let Some(first) = it.next() else { return String::new() };
    let mut prefix = first.as_str().to_string();
    for m in it {
        let common = prefix.chars().zip(m.as_str().chars()).take_while(|(a, b)| a == b).count();
        prefix.truncate(common);
    }
    prefix
}

/// Voter populations that can be fed to [`cluster_voters`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Population {
    /// Top fraction of voters ranked by peak stake, proxies credited with
    /// the stake delegated to them.
    LargeStakeholders,
    /// Registered proxies that cast votes.
    Proxies,
    /// Accounts that voted directly at some sample time.
    DirectVoters,
}

impl Population {
    pub const ALL: [Population; 3] = [Population::LargeStakeholders, Population::Proxies, Population::DirectVoters];

    pub fn as_str(self) -> &'static str {
        match self {
            Population::LargeStakeholders => "large-stakeholders",
            Population::Proxies => "proxies",
            Population::DirectVoters => "direct-voters",
        }
    }
}

/// Top `ceil(pct * N)` voters by the largest accumulated stake each held at
/// any sample time (ties by name).
pub fn large_stakeholders(snapshots: &[VotingSnapshot], pct: f64) -> Result<BTreeSet<AccountName>, ClusterError> {
    if !(pct > 0.0 && pct <= 1.0) {
        return Err(ClusterError::BadFraction(pct));
    }
    let mut peak: BTreeMap<AccountName, StakeAmount> = BTreeMap::new();
    for s in snapshots {
        for (name, stake) in stake_distribution(s, true) {
            let e = peak.entry(name).or_insert(StakeAmount::ZERO);
            *e = (*e).max(stake);
        }
    }
    let mut ranked: Vec<(AccountName, StakeAmount)> = peak.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let k = (pct * ranked.len() as f64).ceil() as usize;
    Ok(ranked.into_iter().take(k).map(|(n, _)| n).collect())
}

pub fn select_population(
    snapshots: &[VotingSnapshot],
    population: Population,
    top_stake_pct: f64,
) -> Result<BTreeSet<AccountName>, ClusterError> {
    match population {
        Population::LargeStakeholders => large_stakeholders(snapshots, top_stake_pct),
        Population::Proxies => Ok(snapshots
            .iter()
            .flat_map(|s| s.per_voter.iter().filter(|(_, v)| v.is_proxy && v.proxy.is_none()).map(|(n, _)| n.clone()))
            .collect()),
        Population::DirectVoters => Ok(snapshots
            .iter()
            .flat_map(|s| s.per_voter.iter().filter(|(_, v)| v.proxy.is_none()).map(|(n, _)| n.clone()))
            .collect()),
    }
}
