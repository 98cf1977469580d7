//! Vote events and per-edge in-force statistics, gathered in one replay pass.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::model::{AccountName, Action, Payload};
use crate::replay::{replay_with, ReplayError, ReplayOutcome, VotingState};

/// One account's weight being directed at one candidate.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VoteEvent {
    pub timestamp: i64,
    /// Index of the originating action in the trace.
    pub action: usize,
    /// Account whose weight is exercised.
    pub src: AccountName,
    /// Candidate voted for.
    pub dst: AccountName,
    pub via_proxy: Option<AccountName>,
}

/// Aggregate of the relationship `src -> dst`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EdgeStats {
    /// Number of vote placements.
    pub f: u64,
    /// Seconds the vote was in force.
    pub t: i64,
    /// Time-averaged weight while in force; the mean placement weight when
    /// the vote was never in force for a positive duration.
    pub p: f64,
}

#[derive(Debug, Clone, Default)]
struct EdgeAcc {
    f: u64,
    t: i64,
    integral: f64,
    placed_weight: f64,
    open_since: Option<i64>,
    weight: f64,
}

impl EdgeAcc {
    fn flush(&mut self, now: i64) {
        if let Some(since) = self.open_since {
            let dt = now - since;
            self.t += dt;
            self.integral += self.weight * dt as f64;
            self.open_since = Some(now);
        }
    }

    fn stats(&self) -> EdgeStats {
        let p = if self.t > 0 {
            self.integral / self.t as f64
        } else if self.f > 0 {
            self.placed_weight / self.f as f64
        } else {
            0.0
        };
        EdgeStats { f: self.f, t: self.t, p }
    }
}

#[derive(Debug, Clone)]
pub struct Timeline {
    /// Ordered by action, then source, then candidate.
    pub events: Vec<VoteEvent>,
    /// Every non-self relationship that was ever placed.
    pub edges: BTreeMap<(AccountName, AccountName), EdgeStats>,
    /// Accounts registered as producer candidates by the end of the trace.
    pub candidates: BTreeSet<AccountName>,
    /// Creator of each account created in the trace.
    pub creators: BTreeMap<AccountName, Option<AccountName>>,
    pub start: i64,
    /// Open intervals are closed here (the last action's timestamp).
    pub end: i64,
}

fn effective(state: &VotingState, src: &AccountName) -> (Vec<AccountName>, f64, Option<AccountName>) {
    let votes = state.effective_votes(src).to_vec();
    let via = state.account(src).and_then(|r| r.proxy.clone());
    (votes, state.voter_weight(src), via)
}

/// Replays `trace`, emitting an event for every explicit vote (a proxy's vote
/// fans out to its current delegators) and for every relationship that
/// comes into force through another action, such as delegating to a proxy
/// that has already voted.
pub fn build_timeline(trace: &[Action]) -> Result<(Timeline, ReplayOutcome), ReplayError> {
    let mut events = Vec::new();
    let mut acc: HashMap<(AccountName, AccountName), EdgeAcc> = HashMap::new();
    let mut tracked: HashMap<AccountName, (Vec<AccountName>, f64)> = HashMap::new();

    let outcome = replay_with(trace, |i, action, state, ok| {
        if !ok {
            return;
        }
        let now = action.timestamp;
        let actor = &action.actor;
        let mut affected: BTreeSet<AccountName> = BTreeSet::new();
        affected.insert(actor.clone());
        affected.extend(state.delegators_of(actor).cloned());

        let mut explicit: BTreeSet<(AccountName, AccountName)> = BTreeSet::new();
        let mut emitted: Vec<VoteEvent> = Vec::new();
        if let Payload::VoteProducer { proxy: None, producers } = &action.payload {
            for c in producers {
                explicit.insert((actor.clone(), c.clone()));
                emitted.push(VoteEvent { timestamp: now, action: i, src: actor.clone(), dst: c.clone(), via_proxy: None });
            }
            if state.account(actor).is_some_and(|r| r.is_proxy) {
                for u in state.delegators_of(actor) {
                    for c in producers {
                        explicit.insert((u.clone(), c.clone()));
                        emitted.push(VoteEvent {
                            timestamp: now,
                            action: i,
                            src: u.clone(),
                            dst: c.clone(),
                            via_proxy: Some(actor.clone()),
                        });
                    }
                }
            }
        }

        for src in &affected {
            let (new_set, new_w, via) = effective(state, src);
            let (old_set, _) = tracked.remove(src).unwrap_or_default();
            for c in &old_set {
                if c == src {
                    continue;
                }
                let e = acc.get_mut(&(src.clone(), c.clone())).expect("tracked edges are open");
                e.flush(now);
                if new_set.binary_search(c).is_err() {
                    e.open_since = None;
                }
            }
            for c in &new_set {
                if old_set.binary_search(c).is_err() && !explicit.contains(&(src.clone(), c.clone())) {
                    emitted.push(VoteEvent {
                        timestamp: now,
                        action: i,
                        src: src.clone(),
                        dst: c.clone(),
                        via_proxy: via.clone(),
                    });
                }
                if c == src {
                    continue;
                }
                let e = acc.entry((src.clone(), c.clone())).or_default();
                e.weight = new_w;
                if e.open_since.is_none() {
                    e.open_since = Some(now);
                }
            }
            if !new_set.is_empty() {
                tracked.insert(src.clone(), (new_set, new_w));
            }
        }

        emitted.sort_by(|a, b| (&a.src, &a.dst).cmp(&(&b.src, &b.dst)));
        for ev in &emitted {
            if ev.src != ev.dst {
                let e = acc.entry((ev.src.clone(), ev.dst.clone())).or_default();
                e.f += 1;
                e.placed_weight += e.weight;
            }
        }
        events.extend(emitted);
    })?;

    let start = trace.first().map_or(0, |a| a.timestamp);
    let end = trace.last().map_or(0, |a| a.timestamp);
    let edges = acc
        .into_iter()
        .filter(|(_, e)| e.f > 0)
        .map(|(k, mut e)| {
            e.flush(end);
            (k, e.stats())
        })
        .collect();
    let state = &outcome.state;
    let timeline = Timeline {
        events,
        edges,
        candidates: state.candidate_names().cloned().collect(),
        creators: state.accounts().iter().map(|(k, r)| (k.clone(), r.creator.clone())).collect(),
        start,
        end,
    };
    Ok((timeline, outcome))
}

pub fn build_vote_events(trace: &[Action]) -> Result<Vec<VoteEvent>, ReplayError> {
    Ok(build_timeline(trace)?.0.events)
}
