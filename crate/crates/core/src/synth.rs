//! Seeded synthetic ledgers: power-law stakes, partial participation, proxy
//! delegation, a round-robin block schedule, and planted voting anomalies
//! with ground truth.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{
    vote_weight_at, write_trace, AccountName, Action, BlockHeader, StakeAmount, BASE_UNITS_PER_TOKEN,
    MAX_VOTED_PRODUCERS, SECONDS_PER_DAY,
};
use crate::motif::Shape;
use crate::replay::{replay, VotingState};
use crate::time::YearMonth;
use crate::trace::{TraceBuilder, SYSTEM_ACCOUNT};

/// 2018-06-08 00:00 UTC.
pub const DEFAULT_START: i64 = 1_528_416_000;
pub const PRODUCERS_PER_ROUND: usize = 21;
pub const BLOCKS_PER_TURN: usize = 6;
pub const BLOCKS_PER_ROUND: usize = PRODUCERS_PER_ROUND * BLOCKS_PER_TURN;
/// 126 half-second slots.
pub const ROUND_SECONDS: i64 = 63;

const HOUR: i64 = 3_600;
const DAY: i64 = SECONDS_PER_DAY;
/// Stakes are capped so weights stay far from overflow.
const MAX_STAKE_TOKENS: f64 = 1e9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("invalid config: {field}: {message}")]
    Config { field: String, message: String },
    #[error("plant {plant} ({kind}) needs {needed} more {pool} accounts but only {available} remain")]
    PlantBudget { plant: usize, kind: String, pool: &'static str, needed: usize, available: usize },
    #[error("plant {plant}: month offset {offset} does not fit inside the generated period")]
    PlantSchedule { plant: usize, offset: u32 },
    #[error("plant {plant}: no month of the generated period has room for it (days 8 to 20 of a month must fit)")]
    NoPlantMonths { plant: usize },
    #[error("block schedule needs {PRODUCERS_PER_ROUND} producers per round, round {round} has {found}")]
    TooFewProducers { round: usize, found: usize },
    #[error("generated trace was not admissible: {0}")]
    Inadmissible(String),
}

fn config_err(field: &str, message: impl Into<String>) -> GenError {
    GenError::Config { field: field.to_string(), message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantKind {
    SimilarCluster,
    LinearGang,
    TriangularGang,
    EightGang,
    NearClique,
}

impl PlantKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PlantKind::SimilarCluster => "similar_cluster",
            PlantKind::LinearGang => "linear_gang",
            PlantKind::TriangularGang => "triangular_gang",
            PlantKind::EightGang => "eight_gang",
            PlantKind::NearClique => "near_clique",
        }
    }

    fn is_candidate_plant(self) -> bool {
        self != PlantKind::SimilarCluster
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSpec {
    pub kind: PlantKind,
    /// Number of planted voters (candidates for gang kinds).
    pub size: usize,
    /// Route every member's account creation through one creator.
    #[serde(default)]
    pub shared_creator: bool,
    /// Probability that a member's monthly set deviates by one candidate.
    #[serde(default)]
    pub vote_jitter: f64,
    /// Month offsets from the start month; all months that fit when absent.
    #[serde(default)]
    pub schedule: Option<Vec<u32>>,
    /// Near-clique only: candidates that vote for exactly one member.
    #[serde(default)]
    pub decoys: usize,
    /// Eight-shaped only: both sides delegate to the same proxy.
    #[serde(default)]
    pub shared_proxy: bool,
}

fn default_alpha() -> f64 {
    1.5
}
fn default_start() -> i64 {
    DEFAULT_START
}
fn default_participation() -> f64 {
    0.05
}
fn default_rounds() -> u32 {
    4
}
fn default_revote() -> f64 {
    0.3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenConfig {
    pub seed: u64,
    /// Ordinary accounts (stakeholders); planted voters, creators and
    /// proxies are drawn from this pool.
    pub n_accounts: usize,
    /// Producer candidates; gang members and decoys are drawn from this pool.
    pub n_candidates: usize,
    /// Background proxies.
    pub n_proxies: usize,
    /// Density exponent of the stake distribution (tokens, minimum 1).
    #[serde(default = "default_alpha")]
    pub stake_powerlaw_alpha: f64,
    pub duration_days: u32,
    #[serde(default = "default_start")]
    pub start: i64,
    /// Fraction of background stakeholders that vote.
    #[serde(default = "default_participation")]
    pub participation_rate: f64,
    /// Target share of voting weight exercised through proxies.
    #[serde(default)]
    pub proxy_weight_target: f64,
    #[serde(default)]
    pub block_skip_rate: f64,
    /// Production rounds per day; each lasts 63 s.
    #[serde(default = "default_rounds")]
    pub rounds_per_day: u32,
    /// Fraction of non-planted candidates that vote for other candidates.
    #[serde(default)]
    pub candidate_vote_rate: f64,
    /// Chance per 30-day period that a background voter or proxy re-votes.
    #[serde(default = "default_revote")]
    pub revote_rate: f64,
    #[serde(default)]
    pub plants: Vec<PlantSpec>,
}

impl GenConfig {
    pub fn from_toml(text: &str) -> Result<GenConfig, GenError> {
        let cfg: GenConfig = toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            let field = match e.span() {
                Some(span) => {
                    let line = text[..span.start].matches('\n').count() + 1;
                    format!("line {line}")
                }
                None => "config".to_string(),
            };
            GenError::Config { field, message }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn end(&self) -> i64 {
        self.start + self.duration_days as i64 * DAY
    }

    pub fn validate(&self) -> Result<(), GenError> {
        if self.n_accounts == 0 {
            return Err(config_err("n_accounts", "must be positive"));
        }
        if self.n_candidates == 0 {
            return Err(config_err("n_candidates", "must be positive"));
        }
        if self.rounds_per_day > 0 && self.n_candidates < PRODUCERS_PER_ROUND {
            return Err(config_err("n_candidates", "block production needs at least 21 candidates"));
        }
        if self.n_proxies == 0 {
            return Err(config_err("n_proxies", "must be positive"));
        }
        if self.duration_days < 1 {
            return Err(config_err("duration_days", "must be at least 1"));
        }
        if !(self.stake_powerlaw_alpha > 1.0 && self.stake_powerlaw_alpha.is_finite()) {
            return Err(config_err("stake_powerlaw_alpha", "must be greater than 1"));
        }
        if self.start < crate::model::VOTE_INDEX_EPOCH {
            return Err(config_err("start", "must not precede 2000-01-01"));
        }
        if self.rounds_per_day as i64 * ROUND_SECONDS > DAY {
            return Err(config_err("rounds_per_day", "rounds would overlap (at most 1371 per day)"));
        }
        for (field, v) in [
            ("participation_rate", self.participation_rate),
            ("proxy_weight_target", self.proxy_weight_target),
            ("candidate_vote_rate", self.candidate_vote_rate),
            ("revote_rate", self.revote_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(config_err(field, format!("{v} is outside [0, 1]")));
            }
        }
        if !(0.0..1.0).contains(&self.block_skip_rate) {
            return Err(config_err("block_skip_rate", format!("{} is outside [0, 1)", self.block_skip_rate)));
        }
        for (i, p) in self.plants.iter().enumerate() {
            let field = |f: &str| format!("plants[{i}].{f}");
            if p.size < 2 {
                return Err(config_err(&field("size"), "must be at least 2"));
            }
            if !(0.0..=0.1).contains(&p.vote_jitter) {
                return Err(config_err(&field("vote_jitter"), format!("{} is outside [0, 0.1]", p.vote_jitter)));
            }
            let max = match p.kind {
                PlantKind::LinearGang | PlantKind::NearClique => MAX_VOTED_PRODUCERS + 1,
                PlantKind::EightGang if p.shared_proxy => MAX_VOTED_PRODUCERS,
                PlantKind::TriangularGang | PlantKind::EightGang => 2 * MAX_VOTED_PRODUCERS,
                PlantKind::SimilarCluster => usize::MAX,
            };
            if p.size > max {
                return Err(config_err(&field("size"), format!("{} exceeds {max} for {}", p.size, p.kind.as_str())));
            }
            if p.decoys > 0 && p.kind != PlantKind::NearClique {
                return Err(config_err(&field("decoys"), "only near_clique plants take decoys"));
            }
            if p.shared_proxy && p.kind != PlantKind::EightGang {
                return Err(config_err(&field("shared_proxy"), "only eight_gang plants take a shared proxy"));
            }
        }
        Ok(())
    }
}

/// Motif a plant is expected to produce.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ExpectedMotif {
    pub shape: Shape,
    pub participants: Vec<AccountName>,
    pub month: YearMonth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantTruth {
    pub id: usize,
    pub kind: PlantKind,
    /// Voters forming the anomaly (candidates for gang kinds).
    pub members: BTreeSet<AccountName>,
    /// Role of every planted account, members and helpers alike.
    pub roles: BTreeMap<AccountName, String>,
    pub shared_creator: bool,
    pub decoys: Vec<AccountName>,
    pub months: Vec<YearMonth>,
    /// Trace positions of the actions realizing the plant.
    pub actions: Vec<usize>,
    pub motifs: Vec<ExpectedMotif>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    /// SHA-256 of the trace in its JSON-lines form.
    pub trace_digest: String,
    pub plants: Vec<PlantTruth>,
}

#[derive(Debug, Clone)]
pub struct Ledger {
    pub trace: Vec<Action>,
    pub headers: Vec<BlockHeader>,
    pub truth: GroundTruth,
}

pub fn trace_digest(trace: &[Action]) -> String {
    let mut buf = Vec::new();
    write_trace(&mut buf, trace).expect("in-memory write");
    hex::encode(Sha256::digest(&buf))
}

mod stream {
    pub const STAKE: u64 = 1;
    pub const ACCOUNT: u64 = 2;
    pub const VOTER: u64 = 3;
    pub const PROXY: u64 = 4;
    pub const CANDIDATE: u64 = 5;
    pub const PLANT: u64 = 6;
    pub const BLOCKS: u64 = 7;
}

/// Independent generator per concern and index, so adding a plant or an
/// account never shifts the draws of anything else.
fn substream(seed: u64, concern: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((concern << 40) | index);
    rng
}

/// `prefix` followed by a four-letter base-26 index.
pub fn pool_name(prefix: &str, index: usize) -> AccountName {
    let mut s = prefix.to_string();
    let mut k = index;
    let mut letters = [b'a'; 4];
    for slot in letters.iter_mut().rev() {
        *slot = b'a' + (k % 26) as u8;
        k /= 26;
    }
    assert!(k == 0, "pool index {index} out of range");
    s.push_str(std::str::from_utf8(&letters).unwrap());
    s.parse().expect("generated names are valid")
}

fn pareto_tokens(rng: &mut ChaCha8Rng, alpha: f64) -> StakeAmount {
    let u: f64 = rng.random();
    let x = (1.0 - u).powf(-1.0 / (alpha - 1.0)).min(MAX_STAKE_TOKENS);
    StakeAmount(((x * BASE_UNITS_PER_TOKEN as f64).round() as u64).max(BASE_UNITS_PER_TOKEN))
}

fn random_set(rng: &mut ChaCha8Rng, pool: &[AccountName], k: usize) -> Vec<AccountName> {
    let k = k.min(pool.len());
    let mut v: Vec<AccountName> = sample(rng, pool.len(), k).into_iter().map(|i| pool[i].clone()).collect();
    v.sort();
    v
}

/// Replaces up to `n` members of `set` with candidates from `pool`.
fn mutate_set(rng: &mut ChaCha8Rng, set: &[AccountName], pool: &[AccountName], n: usize) -> Vec<AccountName> {
    let mut out: BTreeSet<AccountName> = set.iter().cloned().collect();
    for _ in 0..n {
        if out.len() > 1 {
            let drop = out.iter().nth(rng.random_range(0..out.len())).cloned().unwrap();
            out.remove(&drop);
        }
        let outside: Vec<&AccountName> = pool.iter().filter(|c| !out.contains(*c)).collect();
        if !outside.is_empty() {
            out.insert(outside[rng.random_range(0..outside.len())].clone());
        }
    }
    out.into_iter().collect()
}

/// A vote plan: first vote time and set, followed by re-votes.
type VotePlan = Vec<(i64, Vec<AccountName>)>;

fn plan_votes(
    rng: &mut ChaCha8Rng,
    pool: &[AccountName],
    k_range: (usize, usize),
    first: i64,
    end: i64,
    revote_rate: f64,
) -> VotePlan {
    let k = rng.random_range(k_range.0..=k_range.1.max(k_range.0));
    let mut set = random_set(rng, pool, k);
    let mut plan = vec![(first, set.clone())];
    let mut period = first + 30 * DAY;
    while period < end {
        let span = (end - period).min(30 * DAY);
        if rng.random::<f64>() < revote_rate {
            let n = rng.random_range(1..=3);
            set = mutate_set(rng, &set, pool, n);
            plan.push((period + rng.random_range(0..span), set.clone()));
        }
        period += 30 * DAY;
    }
    plan
}

fn last_time(plan: &VotePlan) -> i64 {
    plan.last().map_or(0, |p| p.0)
}

struct PlantBuilder {
    truth: PlantTruth,
    pending: Vec<usize>,
}

/// Months whose planting window (days 8 to 19) sits inside the period,
/// at least two days after the start and one day before the end.
fn eligible_months(cfg: &GenConfig) -> Vec<YearMonth> {
    let (start, end) = (cfg.start, cfg.end());
    YearMonth::of(start)
        .through(YearMonth::of(end))
        .into_iter()
        .filter(|m| m.start() + 8 * DAY >= start + 2 * DAY && m.start() + 20 * DAY <= end - DAY)
        .collect()
}

fn plant_months(cfg: &GenConfig, plant: usize, spec: &PlantSpec) -> Result<Vec<YearMonth>, GenError> {
    let eligible = eligible_months(cfg);
    let first = YearMonth::of(cfg.start);
    let months = match &spec.schedule {
        None => eligible,
        Some(offsets) => {
            let mut out = BTreeSet::new();
            for &o in offsets {
                let mut m = first;
                for _ in 0..o {
                    m = m.next();
                }
                if !eligible.contains(&m) {
                    return Err(GenError::PlantSchedule { plant, offset: o });
                }
                out.insert(m);
            }
            out.into_iter().collect()
        }
    };
    if months.is_empty() {
        return Err(GenError::NoPlantMonths { plant });
    }
    Ok(months)
}

fn pairs(members: &[AccountName]) -> impl Iterator<Item = (&AccountName, &AccountName)> {
    members.iter().enumerate().flat_map(move |(i, a)| members[i + 1..].iter().map(move |b| (a, b)))
}

struct Origin {
    created: i64,
    creator: AccountName,
    stake: StakeAmount,
    candidate: bool,
    proxy: bool,
}

/// Account creation, stake and registration; returns the push indices.
fn emit_creation(b: &mut TraceBuilder, acct: &AccountName, o: &Origin, creator: &AccountName, t: i64) -> Vec<usize> {
    let first = b.len();
    b.new_account(creator, acct, t);
    b.stake(acct, o.stake, t + 1);
    if o.candidate {
        b.reg_producer(acct, t + 2);
    }
    if o.proxy {
        b.reg_proxy(acct, true, t + 2);
    }
    (first..b.len()).collect()
}

pub fn generate_ledger(cfg: &GenConfig) -> Result<Ledger, GenError> {
    cfg.validate()?;
    let (start, end) = (cfg.start, cfg.end());
    let system = SYSTEM_ACCOUNT.parse::<AccountName>().expect("valid");
    let mut b = TraceBuilder::with_genesis(start);

    let accounts: Vec<AccountName> = (0..cfg.n_accounts).map(|i| pool_name("vt", i)).collect();
    let candidates: Vec<AccountName> = (0..cfg.n_candidates).map(|i| pool_name("bp", i)).collect();
    let proxies: Vec<AccountName> = (0..cfg.n_proxies).map(|i| pool_name("px", i)).collect();
    let n_registrars = (cfg.n_accounts / 100).clamp(5, 50);
    let registrars: Vec<AccountName> = (0..n_registrars).map(|i| pool_name("cr", i)).collect();

    // Plants take accounts from the end of each pool.
    let mut next_account = cfg.n_accounts;
    let mut next_candidate = cfg.n_candidates;
    let mut take = |plant: usize, kind: PlantKind, pool: &'static str, n: usize| -> Result<Vec<usize>, GenError> {
        let next = if pool == "candidate" { &mut next_candidate } else { &mut next_account };
        if n > *next {
            return Err(GenError::PlantBudget {
                plant,
                kind: kind.as_str().to_string(),
                pool,
                needed: n,
                available: *next,
            });
        }
        *next -= n;
        Ok((*next..*next + n).collect())
    };
    struct Alloc {
        members: Vec<usize>,
        decoys: Vec<usize>,
        helpers: Vec<usize>,
    }
    let mut allocs = Vec::new();
    for (i, p) in cfg.plants.iter().enumerate() {
        let (members, decoys) = if p.kind.is_candidate_plant() {
            (take(i, p.kind, "candidate", p.size)?, take(i, p.kind, "candidate", p.decoys)?)
        } else {
            (take(i, p.kind, "ordinary", p.size)?, Vec::new())
        };
        let n_helpers = match p.kind {
            PlantKind::TriangularGang => 1,
            PlantKind::EightGang if p.shared_proxy => 1,
            PlantKind::EightGang => 2,
            _ => 0,
        } + usize::from(p.shared_creator);
        let helpers = take(i, p.kind, "ordinary", n_helpers)?;
        allocs.push(Alloc { members, decoys, helpers });
    }
    let mut planted_accounts: BTreeSet<usize> = BTreeSet::new();
    let mut planted_candidates: BTreeSet<usize> = BTreeSet::new();
    let mut plant_members: BTreeSet<AccountName> = BTreeSet::new();
    for (a, p) in allocs.iter().zip(&cfg.plants) {
        planted_accounts.extend(&a.helpers);
        if p.kind.is_candidate_plant() {
            planted_candidates.extend(a.members.iter().chain(&a.decoys));
            plant_members.extend(a.members.iter().map(|&i| candidates[i].clone()));
        } else {
            planted_accounts.extend(&a.members);
            plant_members.extend(a.members.iter().map(|&i| accounts[i].clone()));
        }
    }

    // Day 0: registrars, then every pooled account with its stake.
    // Plant members are created later, by the plant.
    for r in &registrars {
        b.new_account(&system, r, start);
    }
    let mut origin: BTreeMap<AccountName, Origin> = BTreeMap::new();
    let mut creation_actions: BTreeMap<AccountName, Vec<usize>> = BTreeMap::new();
    for (pool_id, pool) in [&accounts, &candidates, &proxies].into_iter().enumerate() {
        for (i, acct) in pool.iter().enumerate() {
            let key = ((pool_id as u64) << 24) | i as u64;
            let mut rng = substream(cfg.seed, stream::ACCOUNT, key);
            let created = start + 60 + rng.random_range(0..DAY - 4 * HOUR);
            let creator = registrars[rng.random_range(0..registrars.len())].clone();
            let stake = pareto_tokens(&mut substream(cfg.seed, stream::STAKE, key), cfg.stake_powerlaw_alpha);
            let o = Origin { created, creator, stake, candidate: pool_id == 1, proxy: pool_id == 2 };
            if !plant_members.contains(acct) {
                creation_actions.insert(acct.clone(), emit_creation(&mut b, acct, &o, &o.creator, o.created));
            }
            origin.insert(acct.clone(), o);
        }
    }

    let first_vote_window = (start + DAY, end - HOUR);
    let vote_start = |rng: &mut ChaCha8Rng| rng.random_range(first_vote_window.0..first_vote_window.1.max(first_vote_window.0 + 1));
    let k_max = MAX_VOTED_PRODUCERS.min(candidates.len());

    // Background proxies vote early and re-vote.
    let mut proxy_plans: Vec<VotePlan> = Vec::new();
    for (i, p) in proxies.iter().enumerate() {
        let mut rng = substream(cfg.seed, stream::PROXY, i as u64);
        let first = start + DAY + rng.random_range(0..7 * DAY).min((end - start - DAY - HOUR).max(1));
        let plan = plan_votes(&mut rng, &candidates, (2.min(k_max), k_max), first, end, cfg.revote_rate);
        for (t, set) in &plan {
            b.vote(p, set.clone(), *t);
        }
        proxy_plans.push(plan);
    }

    // Background voters: participation, plans for both modes, then greedy
    // assignment of the largest voters first toward the proxy-weight target.
    struct Voter {
        name: AccountName,
        direct: VotePlan,
        proxy: usize,
        delegate_at: i64,
        w_direct: f64,
        w_proxy: f64,
    }
    let mut voters = Vec::new();
    for (i, a) in accounts.iter().enumerate() {
        if planted_accounts.contains(&i) {
            continue;
        }
        let mut rng = substream(cfg.seed, stream::VOTER, i as u64);
        if rng.random::<f64>() >= cfg.participation_rate {
            continue;
        }
        let first = vote_start(&mut rng);
        let direct = plan_votes(&mut rng, &candidates, (2.min(k_max), k_max), first, end, cfg.revote_rate);
        let proxy = rng.random_range(0..proxies.len());
        let delegate_at = first;
        let stake = origin[a].stake;
        let w = |t: i64| vote_weight_at(stake, t).map(|w| w.0).unwrap_or(0.0);
        let w_direct = w(last_time(&direct));
        let w_proxy = w(last_time(&proxy_plans[proxy]).max(delegate_at));
        voters.push(Voter { name: a.clone(), direct, proxy, delegate_at, w_direct, w_proxy });
    }
    let mut direct_total: f64 = proxies
        .iter()
        .zip(&proxy_plans)
        .map(|(p, plan)| vote_weight_at(origin[p].stake, last_time(plan)).map(|w| w.0).unwrap_or(0.0))
        .sum();
    let mut proxied_total = 0.0;
    let mut order: Vec<usize> = (0..voters.len()).collect();
    order.sort_by(|&x, &y| voters[y].w_direct.max(voters[y].w_proxy).total_cmp(&voters[x].w_direct.max(voters[x].w_proxy)).then(x.cmp(&y)));
    let target = cfg.proxy_weight_target;
    for &vi in &order {
        let v = &voters[vi];
        let if_proxy = (proxied_total + v.w_proxy) / (direct_total + proxied_total + v.w_proxy);
        let if_direct = proxied_total / (direct_total + proxied_total + v.w_direct);
        if target > 0.0 && (if_proxy - target).abs() < (if_direct - target).abs() {
            proxied_total += v.w_proxy;
            b.delegate(&v.name, &proxies[v.proxy], v.delegate_at);
        } else {
            direct_total += v.w_direct;
            for (t, set) in &v.direct {
                b.vote(&v.name, set.clone(), *t);
            }
        }
    }

    // Candidate noise votes.
    let background_candidates: Vec<AccountName> =
        (0..cfg.n_candidates).filter(|i| !planted_candidates.contains(i)).map(|i| candidates[i].clone()).collect();
    for (i, c) in candidates.iter().enumerate() {
        if planted_candidates.contains(&i) {
            continue;
        }
        let mut rng = substream(cfg.seed, stream::CANDIDATE, i as u64);
        if rng.random::<f64>() >= cfg.candidate_vote_rate {
            continue;
        }
        let others: Vec<AccountName> = background_candidates.iter().filter(|o| *o != c).cloned().collect();
        if others.is_empty() {
            continue;
        }
        let first = vote_start(&mut rng);
        for (t, set) in plan_votes(&mut rng, &others, (1, 5.min(others.len())), first, end, cfg.revote_rate) {
            b.vote(c, set, t);
        }
    }

    // Plants.
    let mut builders = Vec::new();
    for (pi, (spec, alloc)) in cfg.plants.iter().zip(&allocs).enumerate() {
        let mut rng = substream(cfg.seed, stream::PLANT, pi as u64);
        let months = plant_months(cfg, pi, spec)?;
        let pool = if spec.kind.is_candidate_plant() { &candidates } else { &accounts };
        let members: Vec<AccountName> = alloc.members.iter().map(|&i| pool[i].clone()).collect();
        let decoys: Vec<AccountName> = alloc.decoys.iter().map(|&i| candidates[i].clone()).collect();
        let mut helpers: Vec<AccountName> = alloc.helpers.iter().map(|&i| accounts[i].clone()).collect();
        let mut pb = PlantBuilder {
            truth: PlantTruth {
                id: pi,
                kind: spec.kind,
                members: members.iter().cloned().collect(),
                roles: BTreeMap::new(),
                shared_creator: spec.shared_creator,
                decoys: decoys.clone(),
                months: months.clone(),
                actions: Vec::new(),
                motifs: Vec::new(),
            },
            pending: Vec::new(),
        };
        let creator = if spec.shared_creator { Some(helpers.pop().expect("allocated")) } else { None };
        if let Some(cr) = &creator {
            pb.truth.roles.insert(cr.clone(), "creator".into());
            pb.pending.extend(creation_actions.get(cr).into_iter().flatten());
        }
        for (j, m) in members.iter().enumerate() {
            pb.truth.roles.insert(m.clone(), "member".into());
            let o = &origin[m];
            let idx = match &creator {
                Some(c) => emit_creation(&mut b, m, o, c, origin[c].created + 10 + 3 * j as i64),
                None => emit_creation(&mut b, m, o, &o.creator, o.created),
            };
            pb.pending.extend(idx);
        }
        for d in &decoys {
            pb.truth.roles.insert(d.clone(), "decoy".into());
            pb.pending.extend(creation_actions.get(d).into_iter().flatten());
        }
        for h in &helpers {
            pb.truth.roles.insert(h.clone(), "proxy".into());
            pb.pending.extend(creation_actions.get(h).into_iter().flatten());
            pb.pending.push(b.len());
            b.reg_proxy(h, true, origin[h].created + 2);
        }

        if spec.kind == PlantKind::SimilarCluster {
            let k = rng.random_range(10.min(candidates.len())..=k_max);
            let mut base = random_set(&mut rng, &candidates, k);
            for (mi, month) in months.iter().enumerate() {
                let tau = month.start() + 8 * DAY + rng.random_range(0..10 * DAY);
                if mi > 0 && rng.random::<f64>() < 0.5 {
                    base = mutate_set(&mut rng, &base, &candidates, 1);
                }
                for m in &members {
                    let mut set = base.clone();
                    if rng.random::<f64>() < spec.vote_jitter {
                        if set.len() < MAX_VOTED_PRODUCERS && set.len() < candidates.len() {
                            let outside: Vec<&AccountName> = candidates.iter().filter(|c| !set.contains(c)).collect();
                            set.push(outside[rng.random_range(0..outside.len())].clone());
                            set.sort();
                        } else if set.len() > 1 {
                            set.remove(rng.random_range(0..set.len()));
                        }
                    }
                    pb.pending.push(b.len());
                    b.vote(m, set, tau + rng.random_range(0..HOUR));
                }
            }
        } else {
            let half = members.len() / 2;
            let (side_a, side_b) = members.split_at(half.max(1));
            let delegation_time = start + DAY + rng.random_range(0..HOUR);
            match spec.kind {
                PlantKind::LinearGang | PlantKind::NearClique => {
                    let targets: Vec<AccountName> =
                        decoys.iter().map(|_| members[rng.random_range(0..members.len())].clone()).collect();
                    for month in &months {
                        let tau = month.start() + 8 * DAY + rng.random_range(0..10 * DAY);
                        for m in &members {
                            let set: Vec<AccountName> = members.iter().filter(|o| *o != m).cloned().collect();
                            pb.pending.push(b.len());
                            b.vote(m, set, tau + rng.random_range(0..6 * HOUR));
                        }
                        for (d, target) in decoys.iter().zip(&targets) {
                            pb.pending.push(b.len());
                            b.vote(d, vec![target.clone()], tau + rng.random_range(0..6 * HOUR));
                        }
                        for (x, y) in pairs(&members) {
                            let (a, c) = if x < y { (x, y) } else { (y, x) };
                            pb.truth.motifs.push(ExpectedMotif {
                                shape: Shape::Linear,
                                participants: vec![a.clone(), c.clone()],
                                month: *month,
                            });
                        }
                    }
                }
                PlantKind::TriangularGang => {
                    let p = &helpers[0];
                    for a in side_a {
                        pb.pending.push(b.len());
                        b.delegate(a, p, delegation_time);
                    }
                    for month in &months {
                        let tau = month.start() + 8 * DAY + rng.random_range(0..10 * DAY);
                        pb.pending.push(b.len());
                        b.vote(p, side_b.to_vec(), tau);
                        for bm in side_b {
                            pb.pending.push(b.len());
                            b.vote(bm, side_a.to_vec(), tau + rng.random_range(HOUR..6 * HOUR));
                        }
                        for a in side_a {
                            for bm in side_b {
                                pb.truth.motifs.push(ExpectedMotif {
                                    shape: Shape::Triangular,
                                    participants: vec![a.clone(), p.clone(), bm.clone()],
                                    month: *month,
                                });
                            }
                        }
                    }
                }
                PlantKind::EightGang => {
                    if spec.shared_proxy {
                        let p = &helpers[0];
                        for m in &members {
                            pb.pending.push(b.len());
                            b.delegate(m, p, delegation_time);
                        }
                        for month in &months {
                            let tau = month.start() + 8 * DAY + rng.random_range(0..10 * DAY);
                            pb.pending.push(b.len());
                            b.vote(p, members.clone(), tau);
                            for (x, y) in pairs(&members) {
                                let (a, c) = if x < y { (x, y) } else { (y, x) };
                                pb.truth.motifs.push(ExpectedMotif {
                                    shape: Shape::Eight,
                                    participants: vec![a.clone(), p.clone(), c.clone(), p.clone()],
                                    month: *month,
                                });
                            }
                        }
                    } else {
                        let (p1, p2) = (&helpers[0], &helpers[1]);
                        for a in side_a {
                            pb.pending.push(b.len());
                            b.delegate(a, p1, delegation_time);
                        }
                        for bm in side_b {
                            pb.pending.push(b.len());
                            b.delegate(bm, p2, delegation_time);
                        }
                        for month in &months {
                            let tau = month.start() + 8 * DAY + rng.random_range(0..10 * DAY);
                            pb.pending.push(b.len());
                            b.vote(p1, side_b.to_vec(), tau);
                            pb.pending.push(b.len());
                            b.vote(p2, side_a.to_vec(), tau + rng.random_range(HOUR..6 * HOUR));
                            for a in side_a {
                                for bm in side_b {
                                    let participants = if a < bm {
                                        vec![a.clone(), p1.clone(), bm.clone(), p2.clone()]
                                    } else {
                                        vec![bm.clone(), p2.clone(), a.clone(), p1.clone()]
                                    };
                                    pb.truth.motifs.push(ExpectedMotif { shape: Shape::Eight, participants, month: *month });
                                }
                            }
                        }
                    }
                }
                PlantKind::SimilarCluster => unreachable!(),
            }
        }
        pb.truth.motifs.sort();
        builders.push(pb);
    }

    let (trace, position) = b.finish_indexed();
    let outcome = replay(&trace).map_err(|e| GenError::Inadmissible(e.to_string()))?;
    if let Some(r) = outcome.log.rejected.first() {
        return Err(GenError::Inadmissible(format!("action {} by {}: {}", r.index, r.actor, r.reason)));
    }
    let plants = builders
        .into_iter()
        .map(|mut pb| {
            pb.truth.actions = pb.pending.iter().map(|&i| position[i]).collect();
            pb.truth.actions.sort_unstable();
            pb.truth
        })
        .collect();

    let round_starts = round_starts(cfg);
    let rounds = elect_rounds(&trace, &round_starts)?;
    let mut rng = substream(cfg.seed, stream::BLOCKS, 0);
    let headers = generate_block_schedule(&rounds, cfg.block_skip_rate, &mut rng, start)?;

    let truth = GroundTruth { seed: cfg.seed, trace_digest: trace_digest(&trace), plants };
    Ok(Ledger { trace, headers, truth })
}

fn round_starts(cfg: &GenConfig) -> Vec<i64> {
    if cfg.rounds_per_day == 0 {
        return Vec::new();
    }
    let spacing = DAY / cfg.rounds_per_day as i64;
    (1..cfg.duration_days as i64)
        .flat_map(|d| (0..cfg.rounds_per_day as i64).map(move |r| cfg.start + d * DAY + r * spacing))
        .collect()
}

/// Producers of one 63-second round, in production order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Round {
    pub start: i64,
    pub producers: Vec<AccountName>,
}

/// Top 21 candidates by received weight at each start time, ordered by name.
pub fn elect_rounds(trace: &[Action], starts: &[i64]) -> Result<Vec<Round>, GenError> {
    let mut state = VotingState::new();
    let mut next = 0;
    let mut rounds = Vec::with_capacity(starts.len());
    for &t in starts {
        while next < trace.len() && trace[next].timestamp <= t {
            let _ = state.apply(&trace[next]);
            next += 1;
        }
        let mut producers = state.top_n_producers(PRODUCERS_PER_ROUND);
        producers.sort();
        rounds.push(Round { start: t, producers });
    }
    Ok(rounds)
}

/// Six consecutive half-second slots per producer; each block is skipped
/// independently with `skip_rate`. Heights count half-second slots since
/// `genesis` (plus one), so skipped heights are never reused.
pub fn generate_block_schedule(
    rounds: &[Round],
    skip_rate: f64,
    rng: &mut impl Rng,
    genesis: i64,
) -> Result<Vec<BlockHeader>, GenError> {
    if !(0.0..1.0).contains(&skip_rate) {
        return Err(config_err("block_skip_rate", format!("{skip_rate} is outside [0, 1)")));
    }
    let mut out = Vec::with_capacity(rounds.len() * BLOCKS_PER_ROUND);
    for (ri, r) in rounds.iter().enumerate() {
        if r.producers.len() != PRODUCERS_PER_ROUND {
            return Err(GenError::TooFewProducers { round: ri, found: r.producers.len() });
        }
        let base = 2 * (r.start - genesis) as u64 + 1;
        for slot in 0..BLOCKS_PER_ROUND {
            if skip_rate > 0.0 && rng.random::<f64>() < skip_rate {
                continue;
            }
            out.push(BlockHeader {
                height: base + slot as u64,
                producer: r.producers[slot / BLOCKS_PER_TURN].clone(),
                timestamp: r.start + slot as i64 / 2,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{monthly_production, production_entropy, EntropyScope};

    fn small(seed: u64) -> GenConfig {
        GenConfig {
            seed,
            n_accounts: 300,
            n_candidates: 40,
            n_proxies: 4,
            stake_powerlaw_alpha: 1.8,
            duration_days: 90,
            start: DEFAULT_START,
            participation_rate: 0.3,
            proxy_weight_target: 0.5,
            block_skip_rate: 0.0,
            rounds_per_day: 1,
            candidate_vote_rate: 0.2,
            revote_rate: 0.3,
            plants: vec![],
        }
    }

    #[test]
    fn pool_names_are_valid_and_distinct() {
        assert_eq!(pool_name("vt", 0).as_str(), "vtaaaa");
        assert_eq!(pool_name("vt", 27).as_str(), "vtaabb");
        assert_ne!(pool_name("bp", 1), pool_name("bp", 26));
    }

    #[test]
    fn deterministic_and_admissible() {
        let a = generate_ledger(&small(3)).unwrap();
        let b = generate_ledger(&small(3)).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.headers, b.headers);
        assert_eq!(a.truth, b.truth);
        assert!(a.truth.plants.is_empty());
        assert!(replay(&a.trace).unwrap().log.rejected.is_empty());
        assert_ne!(generate_ledger(&small(4)).unwrap().truth.trace_digest, a.truth.trace_digest);
    }

    #[test]
    fn adding_a_plant_keeps_background_votes() {
        let base = generate_ledger(&small(5)).unwrap();
        let mut cfg = small(5);
        cfg.plants.push(PlantSpec {
            kind: PlantKind::LinearGang,
            size: 2,
            shared_creator: false,
            vote_jitter: 0.0,
            schedule: Some(vec![1]),
            decoys: 0,
            shared_proxy: false,
        });
        let planted = generate_ledger(&cfg).unwrap();
        let votes = |t: &[Action], who: &str| -> Vec<Action> {
            t.iter().filter(|a| a.actor.as_str() == who).cloned().map(|mut a| {
                a.block = 0;
                a.seq = 0;
                a
            }).collect()
        };
        assert_eq!(votes(&base.trace, "vtaaab"), votes(&planted.trace, "vtaaab"));
        assert_eq!(planted.truth.plants[0].motifs.len(), 1);
    }

    #[test]
    fn over_budget_names_the_plant() {
        let mut cfg = small(1);
        cfg.plants.push(PlantSpec {
            kind: PlantKind::NearClique,
            size: 30,
            shared_creator: false,
            vote_jitter: 0.0,
            schedule: None,
            decoys: 20,
            shared_proxy: false,
        });
        match generate_ledger(&cfg) {
            Err(GenError::PlantBudget { plant: 0, kind, .. }) => assert_eq!(kind, "near_clique"),
            other => panic!("{other:?}"),
        }
    }

    fn fixed_rounds(n: usize) -> Vec<Round> {
        let producers: Vec<AccountName> = (0..21).map(|i| pool_name("bp", i)).collect();
        (0..n).map(|r| Round { start: DEFAULT_START + r as i64 * 100, producers: producers.clone() }).collect()
    }

    #[test]
    fn one_round_is_126_blocks_over_63_seconds() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let h = generate_block_schedule(&fixed_rounds(1), 0.0, &mut rng, DEFAULT_START).unwrap();
        assert_eq!(h.len(), 126);
        let span_slots = h.last().unwrap().height - h[0].height + 1;
        assert_eq!(span_slots as f64 * 0.5, 63.0);
        let mut per: BTreeMap<&AccountName, usize> = BTreeMap::new();
        for x in &h {
            *per.entry(&x.producer).or_default() += 1;
        }
        assert!(per.values().all(|&c| c == 6));
        assert_eq!(per.len(), 21);
    }

    #[test]
    fn uniform_month_has_maximal_entropy() {
        let rounds: Vec<Round> = fixed_rounds(1)
            .into_iter()
            .cycle()
            .take(30)
            .enumerate()
            .map(|(d, mut r)| {
                r.start = DEFAULT_START + 7 * DAY + d as i64 * 3600;
                r
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let h = generate_block_schedule(&rounds, 0.0, &mut rng, DEFAULT_START).unwrap();
        let months = monthly_production(&h);
        assert_eq!(months.len(), 1);
        let e = production_entropy(&months[0], EntropyScope::All).unwrap();
        assert!((e - 21f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn short_round_is_rejected() {
        let mut r = fixed_rounds(1);
        r[0].producers.pop();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            generate_block_schedule(&r, 0.0, &mut rng, DEFAULT_START),
            Err(GenError::TooFewProducers { round: 0, found: 20 })
        );
    }

    #[test]
    fn config_round_trips_through_toml() {
        let mut cfg = small(9);
        cfg.plants.push(PlantSpec {
            kind: PlantKind::SimilarCluster,
            size: 4,
            shared_creator: true,
            vote_jitter: 0.05,
            schedule: None,
            decoys: 0,
            shared_proxy: false,
        });
        let text = cfg.to_toml();
        assert_eq!(GenConfig::from_toml(&text).unwrap(), cfg);
        let bad = text.replace("vote_jitter = 0.05", "vote_jitter = 0.5");
        match GenConfig::from_toml(&bad) {
            Err(GenError::Config { field, .. }) => assert_eq!(field, "plants[0].vote_jitter"),
            other => panic!("{other:?}"),
        }
    }
}
