//! Deterministic fold of an action trace into voting state.
//!
//! Every account that votes directly (or a proxy that votes on behalf of its
//! delegators) is a *root*: it applies one weight to each candidate it names.
//! Per-candidate received weight is kept as a map of root contributions and
//! summed on demand, so repeated re-votes never accumulate cancellation error.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{
    vote_weight_at, AccountName, Action, Payload, StakeAmount, VoteWeight, MAX_VOTED_PRODUCERS, SECONDS_PER_DAY,
};
use crate::time::YearMonth;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AccountRecord {
    pub stake: StakeAmount,
    pub last_vote_time: Option<i64>,
    pub votes: Vec<AccountName>,
    pub proxy: Option<AccountName>,
    pub is_proxy: bool,
    pub creator: Option<AccountName>,
    pub created_at: i64,
}

/// Why an action was not applied. The state is left untouched.
#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Rejection {
    #[error("action precedes current state ({block}, {seq})")]
    OutOfOrder { block: u64, seq: u64 },
    #[error("unknown account {account}")]
    UnknownAccount { account: AccountName },
    #[error("account {account} already exists")]
    AccountExists { account: AccountName },
    #[error("undelegate of {requested} exceeds stake {available}")]
    InsufficientStake { available: u64, requested: u64 },
    #[error("stake overflow")]
    StakeOverflow,
    #[error("{candidate} is not a registered producer candidate")]
    UnregisteredCandidate { candidate: AccountName },
    #[error("{proxy} is not a registered proxy")]
    NotAProxy { proxy: AccountName },
    #[error("an account cannot delegate to itself")]
    SelfProxy,
    #[error("a registered proxy cannot delegate its vote")]
    ProxyCannotDelegate,
    #[error("an account delegating to a proxy cannot register as proxy")]
    DelegatorCannotBeProxy,
    #[error("more than 30 producers")]
    TooManyProducers,
    #[error("vote timestamp {timestamp} is outside the weight formula's domain")]
    BadVoteTime { timestamp: i64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "notice", rename_all = "snake_case")]
pub enum Notice {
    /// Pooled contributions of the delegators are suspended until re-registration.
    ProxyDeregisteredWithDelegators { proxy: AccountName, delegators: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedAction {
    pub index: usize,
    pub block: u64,
    pub seq: u64,
    pub actor: AccountName,
    pub kind: String,
    #[serde(flatten)]
    pub reason: Rejection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedNotice {
    pub index: usize,
    #[serde(flatten)]
    pub notice: Notice,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplayLog {
    pub rejected: Vec<RejectedAction>,
    pub notices: Vec<LoggedNotice>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReplayError {
    #[error("trace is not sorted by (block, seq): action {index} at ({block}, {seq}) follows ({prev_block}, {prev_seq})")]
    Unsorted { index: usize, block: u64, seq: u64, prev_block: u64, prev_seq: u64 },
}

#[derive(Debug, Clone, Default)]
pub struct VotingState {
    accounts: BTreeMap<AccountName, AccountRecord>,
    /// candidate -> root -> weight applied by that root
    candidates: BTreeMap<AccountName, BTreeMap<AccountName, f64>>,
    proxies: BTreeSet<AccountName>,
    /// proxy -> accounts whose `proxy` field names it
    delegators: BTreeMap<AccountName, BTreeSet<AccountName>>,
    /// root -> candidates it currently contributes to
    applied: BTreeMap<AccountName, Vec<AccountName>>,
    as_of: Option<(u64, u64, i64)>,
}

fn weight(stake: StakeAmount, t_vote: i64) -> f64 {
    // Vote times are validated against the largest possible stake on entry.
    vote_weight_at(stake, t_vote).map(|w| w.0).unwrap_or(0.0)
}

impl VotingState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn accounts(&self) -> &BTreeMap<AccountName, AccountRecord> {
        &self.accounts
    }

    pub fn account(&self, name: &AccountName) -> Option<&AccountRecord> {
        self.accounts.get(name)
    }

    pub fn proxies(&self) -> &BTreeSet<AccountName> {
        &self.proxies
    }

    pub fn is_candidate(&self, name: &AccountName) -> bool {
        self.candidates.contains_key(name)
    }

    pub fn candidate_names(&self) -> impl Iterator<Item = &AccountName> {
        self.candidates.keys()
    }

    /// `(block, seq, timestamp)` of the last applied action.
    pub fn as_of(&self) -> Option<(u64, u64, i64)> {
        self.as_of
    }

    /// Accounts currently delegating to `proxy` (whether or not it is still registered).
    pub fn delegators_of(&self, proxy: &AccountName) -> impl Iterator<Item = &AccountName> {
        self.delegators.get(proxy).into_iter().flatten()
    }

    pub fn received_weight(&self, candidate: &AccountName) -> Option<VoteWeight> {
        self.candidates.get(candidate).map(|c| VoteWeight(c.values().sum()))
    }

    pub fn candidate_weights(&self) -> BTreeMap<AccountName, VoteWeight> {
        self.candidates.iter().map(|(k, c)| (k.clone(), VoteWeight(c.values().sum()))).collect()
    }

    /// Candidates by received weight, descending; ties by name ascending.
    pub fn top_n_producers(&self, n: usize) -> Vec<AccountName> {
        let mut ranked: Vec<(AccountName, f64)> =
            self.candidate_weights().into_iter().map(|(k, w)| (k, w.0)).collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.into_iter().take(n).map(|(k, _)| k).collect()
    }

    /// Weight one account contributes to each candidate it effectively votes for.
    ///
    /// Direct voters use their own last vote time; delegators use their
    /// proxy's, and contribute nothing while the proxy is unregistered or has
    /// not voted.
    pub fn voter_weight(&self, name: &AccountName) -> f64 {
        let Some(rec) = self.accounts.get(name) else { return 0.0 };
        match &rec.proxy {
            Some(p) => match self.accounts.get(p) {
                Some(prec) if prec.is_proxy && !prec.votes.is_empty() => {
                    prec.last_vote_time.map_or(0.0, |t| weight(rec.stake, t))
                }
                _ => 0.0,
            },
            None if !rec.votes.is_empty() => rec.last_vote_time.map_or(0.0, |t| weight(rec.stake, t)),
            None => 0.0,
        }
    }

    /// Candidates an account's weight currently reaches, after proxy resolution.
    pub fn effective_votes(&self, name: &AccountName) -> &[AccountName] {
        let Some(rec) = self.accounts.get(name) else { return &[] };
        match &rec.proxy {
            Some(p) => match self.accounts.get(p) {
                Some(prec) if prec.is_proxy => &prec.votes,
                _ => &[],
            },
            None => &rec.votes,
        }
    }

    fn root_weight(&self, root: &AccountName) -> f64 {
        let Some(rec) = self.accounts.get(root) else { return 0.0 };
        let Some(t) = rec.last_vote_time else { return 0.0 };
        let mut w = weight(rec.stake, t);
        if rec.is_proxy {
            for d in self.delegators_of(root) {
                w += weight(self.accounts[d].stake, t);
            }
        }
        w
    }

    fn refresh(&mut self, root: &AccountName) {
        if let Some(old) = self.applied.remove(root) {
            for c in old {
                if let Some(contrib) = self.candidates.get_mut(&c) {
                    contrib.remove(root);
                }
            }
        }
        let votes = match self.accounts.get(root) {
            Some(rec) if rec.proxy.is_none() && !rec.votes.is_empty() => rec.votes.clone(),
            _ => return,
        };
        let w = self.root_weight(root);
        for c in &votes {
            self.candidates.get_mut(c).expect("voted candidates are registered").insert(root.clone(), w);
        }
        self.applied.insert(root.clone(), votes);
    }

    fn root_of(&self, name: &AccountName) -> AccountName {
        match self.accounts.get(name).and_then(|r| r.proxy.clone()) {
            Some(p) => p,
            None => name.clone(),
        }
    }

    fn require_account(&self, name: &AccountName) -> Result<&AccountRecord, Rejection> {
        self.accounts.get(name).ok_or_else(|| Rejection::UnknownAccount { account: name.clone() })
    }

    /// Applies one action. On rejection the state is unchanged.
    pub fn apply(&mut self, action: &Action) -> Result<Vec<Notice>, Rejection> {
        if let Some((b, s, _)) = self.as_of {
            if (action.block, action.seq) < (b, s) {
                return Err(Rejection::OutOfOrder { block: action.block, seq: action.seq });
            }
        }
        let actor = &action.actor;
        let mut notices = Vec::new();
        match &action.payload {
            Payload::NewAccount { created } => {
                if self.accounts.contains_key(created) {
                    return Err(Rejection::AccountExists { account: created.clone() });
                }
                self.accounts.insert(
                    created.clone(),
                    AccountRecord { creator: Some(actor.clone()), created_at: action.timestamp, ..Default::default() },
                );
            }
            Payload::DelegateBw { amount } => {
                let rec = self.require_account(actor)?;
                let stake = rec.stake.checked_add(*amount).ok_or(Rejection::StakeOverflow)?;
                self.accounts.get_mut(actor).unwrap().stake = stake;
                let root = self.root_of(actor);
                self.refresh(&root);
            }
            Payload::UndelegateBw { amount } => {
                let rec = self.require_account(actor)?;
                let stake = rec.stake.checked_sub(*amount).ok_or(Rejection::InsufficientStake {
                    available: rec.stake.0,
                    requested: amount.0,
                })?;
                self.accounts.get_mut(actor).unwrap().stake = stake;
                let root = self.root_of(actor);
                self.refresh(&root);
            }
            Payload::RegProducer => {
                self.require_account(actor)?;
                self.candidates.entry(actor.clone()).or_default();
            }
            Payload::RegProxy { is_proxy } => {
                let rec = self.require_account(actor)?;
                if *is_proxy && rec.proxy.is_some() {
                    return Err(Rejection::DelegatorCannotBeProxy);
                }
                self.accounts.get_mut(actor).unwrap().is_proxy = *is_proxy;
                if *is_proxy {
                    self.proxies.insert(actor.clone());
                } else {
                    self.proxies.remove(actor);
                    let n = self.delegators_of(actor).count();
                    if n > 0 {
                        notices.push(Notice::ProxyDeregisteredWithDelegators { proxy: actor.clone(), delegators: n });
                    }
                }
                self.refresh(actor);
            }
            Payload::VoteProducer { proxy, producers } => {
                let rec = self.require_account(actor)?;
                if vote_weight_at(StakeAmount(u64::MAX), action.timestamp).is_err() {
                    return Err(Rejection::BadVoteTime { timestamp: action.timestamp });
                }
                if producers.len() > MAX_VOTED_PRODUCERS {
                    return Err(Rejection::TooManyProducers);
                }
                match proxy {
                    Some(p) => {
                        if p == actor {
                            return Err(Rejection::SelfProxy);
                        }
                        if rec.is_proxy {
                            return Err(Rejection::ProxyCannotDelegate);
                        }
                        if !self.accounts.get(p).is_some_and(|r| r.is_proxy) {
                            return Err(Rejection::NotAProxy { proxy: p.clone() });
                        }
                    }
                    None => {
                        if let Some(c) = producers.iter().find(|c| !self.candidates.contains_key(*c)) {
                            return Err(Rejection::UnregisteredCandidate { candidate: c.clone() });
                        }
                    }
                }
                let old_proxy = self.accounts[actor].proxy.clone();
                if let Some(old) = &old_proxy {
                    if let Some(set) = self.delegators.get_mut(old) {
                        set.remove(actor);
                        if set.is_empty() {
                            self.delegators.remove(old);
                        }
                    }
                }
                {
                    let rec = self.accounts.get_mut(actor).unwrap();
                    rec.last_vote_time = Some(action.timestamp);
                    rec.proxy = proxy.clone();
                    rec.votes = if proxy.is_some() { Vec::new() } else { producers.clone() };
                }
                if let Some(p) = proxy {
                    self.delegators.entry(p.clone()).or_default().insert(actor.clone());
                }
                self.refresh(actor);
                if let Some(old) = old_proxy.as_ref().filter(|o| proxy.as_ref() != Some(*o)) {
                    self.refresh(old);
                }
                if let Some(p) = proxy {
                    self.refresh(p);
                }
            }
        }
        self.as_of = Some((action.block, action.seq, action.timestamp));
        Ok(notices)
    }

    /// Resolves proxies into effective candidate sets at time `t`.
    pub fn snapshot(&self, taken_at: i64) -> VotingSnapshot {
        let mut per_voter = BTreeMap::new();
        for (name, rec) in &self.accounts {
            let has_delegators = self.delegators.get(name).is_some_and(|d| !d.is_empty());
            if rec.votes.is_empty() && rec.proxy.is_none() && !(rec.is_proxy && has_delegators) {
                continue;
            }
            let proxied_stake: StakeAmount = self.delegators_of(name).map(|d| self.accounts[d].stake).sum();
            per_voter.insert(
                name.clone(),
                VoterEntry {
                    effective: self.effective_votes(name).to_vec(),
                    stake: rec.stake,
                    is_proxy: rec.is_proxy,
                    proxy: rec.proxy.clone(),
                    proxied_stake,
                    weight: self.voter_weight(name),
                },
            );
        }
        let stakeholders = self.accounts.values().filter(|r| r.stake.0 > 0).count();
        VotingSnapshot {
            taken_at,
            per_voter,
            per_candidate: self.candidate_weights().into_iter().map(|(k, w)| (k, w.0)).collect(),
            accounts: self.accounts.len(),
            stakeholders,
            total_stake: self.accounts.values().map(|r| r.stake).sum(),
        }
    }

    /// JSON with sorted keys; the basis for determinism digests.
    pub fn canonical_json(&self) -> String {
        #[derive(Serialize)]
        struct Canonical<'a> {
            accounts: &'a BTreeMap<AccountName, AccountRecord>,
            candidates: BTreeMap<AccountName, f64>,
            proxies: &'a BTreeSet<AccountName>,
            as_of: Option<(u64, u64, i64)>,
        }
        let value = serde_json::to_value(Canonical {
            accounts: &self.accounts,
            candidates: self.candidate_weights().into_iter().map(|(k, w)| (k, w.0)).collect(),
            proxies: &self.proxies,
            as_of: self.as_of,
        })
        .expect("state serializes");
        // serde_json's default map is ordered, so keys come out sorted.
        value.to_string()
    }

    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoterEntry {
    /// Candidates reached by this voter's weight (proxy-resolved), sorted.
    pub effective: Vec<AccountName>,
    pub stake: StakeAmount,
    pub is_proxy: bool,
    pub proxy: Option<AccountName>,
    /// Total stake of accounts delegating to this voter.
    pub proxied_stake: StakeAmount,
    /// Per-candidate weight this voter contributes.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VotingSnapshot {
    pub taken_at: i64,
    pub per_voter: BTreeMap<AccountName, VoterEntry>,
    pub per_candidate: BTreeMap<AccountName, f64>,
    pub accounts: usize,
    pub stakeholders: usize,
    pub total_stake: StakeAmount,
}

#[derive(Debug, Clone)]
pub struct ReplayOutcome {
    pub state: VotingState,
    pub log: ReplayLog,
}

fn check_sorted(trace: &[Action]) -> Result<(), ReplayError> {
    for (i, w) in trace.windows(2).enumerate() {
        if w[1].order_key() < w[0].order_key() {
            return Err(ReplayError::Unsorted {
                index: i + 1,
                block: w[1].block,
                seq: w[1].seq,
                prev_block: w[0].block,
                prev_seq: w[0].seq,
            });
        }
    }
    Ok(())
}

fn step(state: &mut VotingState, log: &mut ReplayLog, index: usize, action: &Action) -> bool {
    match state.apply(action) {
        Ok(notices) => {
            log.notices.extend(notices.into_iter().map(|notice| LoggedNotice { index, notice }));
            true
        }
        Err(reason) => {
            log.rejected.push(RejectedAction {
                index,
                block: action.block,
                seq: action.seq,
                actor: action.actor.clone(),
                kind: action.kind().to_string(),
                reason,
            });
            false
        }
    }
}

/// Left fold of [`VotingState::apply`]; rejected actions are logged and skipped.
pub fn replay(trace: &[Action]) -> Result<ReplayOutcome, ReplayError> {
    check_sorted(trace)?;
    let mut state = VotingState::new();
    let mut log = ReplayLog::default();
    for (i, a) in trace.iter().enumerate() {
        step(&mut state, &mut log, i, a);
    }
    Ok(ReplayOutcome { state, log })
}

/// Replays and takes a snapshot at each of `sample_times` (ascending). A
/// snapshot at `t` reflects every action with timestamp `<= t`.
pub fn replay_sampled(trace: &[Action], sample_times: &[i64]) -> Result<(ReplayOutcome, Vec<VotingSnapshot>), ReplayError> {
    check_sorted(trace)?;
    let mut state = VotingState::new();
    let mut log = ReplayLog::default();
    let mut snapshots = Vec::with_capacity(sample_times.len());
    let mut next = 0;
    for (i, a) in trace.iter().enumerate() {
        while next < sample_times.len() && sample_times[next] < a.timestamp {
            snapshots.push(state.snapshot(sample_times[next]));
            next += 1;
        }
        step(&mut state, &mut log, i, a);
    }
    for &t in &sample_times[next..] {
        snapshots.push(state.snapshot(t));
    }
    Ok((ReplayOutcome { state, log }, snapshots))
}

/// Replays and hands the state to `visit` after every applied action.
pub fn replay_with<F>(trace: &[Action], mut visit: F) -> Result<ReplayOutcome, ReplayError>
where
    F: FnMut(usize, &Action, &VotingState, bool),
{
    check_sorted(trace)?;
    let mut state = VotingState::new();
    let mut log = ReplayLog::default();
    for (i, a) in trace.iter().enumerate() {
        let ok = step(&mut state, &mut log, i, a);
        visit(i, a, &state, ok);
    }
    Ok(ReplayOutcome { state, log })
}

/// How often snapshots are taken.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleCadence {
    /// Last second of every UTC month.
    #[default]
    Monthly,
    /// Every `n` days from the first action's UTC midnight.
    Days(u32),
}

impl fmt::Display for SampleCadence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SampleCadence::Monthly => f.write_str("monthly"),
            SampleCadence::Days(n) => write!(f, "{n}d"),
        }
    }
}

impl FromStr for SampleCadence {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "monthly" {
            return Ok(SampleCadence::Monthly);
        }
        s.strip_suffix('d')
            .and_then(|n| n.parse::<u32>().ok())
            .filter(|n| *n > 0)
            .map(SampleCadence::Days)
            .ok_or_else(|| format!("invalid cadence {s:?} (expected \"monthly\" or e.g. \"7d\")"))
    }
}

/// Sample times covering `[first, last]`; the final sample is at or after `last`.
pub fn sample_times(first: i64, last: i64, cadence: SampleCadence) -> Vec<i64> {
    if last < first {
        return Vec::new();
    }
    match cadence {
        SampleCadence::Monthly => YearMonth::of(first).through(YearMonth::of(last)).into_iter().map(|m| m.end()).collect(),
        SampleCadence::Days(n) => {
            let step = n as i64 * SECONDS_PER_DAY;
            let origin = first.div_euclid(SECONDS_PER_DAY) * SECONDS_PER_DAY;
            let mut out = Vec::new();
            let mut t = origin + step - 1;
            loop {
                out.push(t);
                if t >= last {
                    break;
                }
                t += step;
            }
            out
        }
    }
}

/// Sample times spanning a trace.
pub fn trace_sample_times(trace: &[Action], cadence: SampleCadence) -> Vec<i64> {
    match (trace.iter().map(|a| a.timestamp).min(), trace.iter().map(|a| a.timestamp).max()) {
        (Some(first), Some(last)) => sample_times(first, last, cadence),
        _ => Vec::new(),
    }
}
