//! Incremental construction of admissible action traces.

use crate::model::{AccountName, Action, Payload, StakeAmount};

/// Collects actions in any order; [`TraceBuilder::finish`] sorts them by
/// timestamp (stable) and assigns block heights and sequence numbers.
#[derive(Debug, Clone, Default)]
pub struct TraceBuilder {
    pending: Vec<(i64, AccountName, Payload)>,
    genesis: Option<i64>,
}

/// Genesis-style creator used for accounts created by the chain itself.
pub const SYSTEM_ACCOUNT: &str = "eosio";

impl TraceBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Heights count half-second slots from `genesis` instead of from the
    /// earliest action. Actions must not precede it.
    pub fn with_genesis(genesis: i64) -> Self {
        TraceBuilder { pending: Vec::new(), genesis: Some(genesis) }
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn push(&mut self, actor: &AccountName, timestamp: i64, payload: Payload) -> &mut Self {
        self.pending.push((timestamp, actor.clone(), payload));
        self
    }

    pub fn new_account(&mut self, creator: &AccountName, created: &AccountName, timestamp: i64) -> &mut Self {
        self.push(creator, timestamp, Payload::NewAccount { created: created.clone() })
    }

    pub fn stake(&mut self, actor: &AccountName, amount: StakeAmount, timestamp: i64) -> &mut Self {
        self.push(actor, timestamp, Payload::DelegateBw { amount })
    }

    pub fn unstake(&mut self, actor: &AccountName, amount: StakeAmount, timestamp: i64) -> &mut Self {
        self.push(actor, timestamp, Payload::UndelegateBw { amount })
    }

    pub fn reg_producer(&mut self, actor: &AccountName, timestamp: i64) -> &mut Self {
        self.push(actor, timestamp, Payload::RegProducer)
    }

    pub fn reg_proxy(&mut self, actor: &AccountName, is_proxy: bool, timestamp: i64) -> &mut Self {
        self.push(actor, timestamp, Payload::RegProxy { is_proxy })
    }

    pub fn vote(&mut self, actor: &AccountName, producers: Vec<AccountName>, timestamp: i64) -> &mut Self {
        self.push(actor, timestamp, Payload::vote(producers))
    }

    pub fn delegate(&mut self, actor: &AccountName, proxy: &AccountName, timestamp: i64) -> &mut Self {
        self.push(actor, timestamp, Payload::vote_via(proxy.clone()))
    }

    /// Block height is two per second since the earliest action (0.5 s
    /// slots); `seq` is a global counter, so `(block, seq)` follows time.
    pub fn finish(&self) -> Vec<Action> {
        self.finish_indexed().0
    }

    /// Like [`TraceBuilder::finish`], also returning the trace position of
    /// each pushed action (in push order).
    pub fn finish_indexed(&self) -> (Vec<Action>, Vec<usize>) {
        let mut order: Vec<usize> = (0..self.pending.len()).collect();
        order.sort_by_key(|&i| (self.pending[i].0, i));
        let base = self.genesis.or_else(|| order.first().map(|&i| self.pending[i].0)).unwrap_or(0);
        let mut position = vec![0; order.len()];
        let actions = order
            .into_iter()
            .enumerate()
            .map(|(seq, i)| {
                position[i] = seq;
                let (timestamp, actor, payload) = self.pending[i].clone();
                Action { actor, timestamp, block: ((timestamp - base) as u64) * 2 + 1, seq: seq as u64, payload }
            })
            .collect();
        (actions, position)
    }
}
