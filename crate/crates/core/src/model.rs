//! Action-trace data model and voting-weight arithmetic.
//!
//! Traces are UTF-8 JSON lines, one action per line:
//!
//! ```text
//! {"kind":"voteproducer","actor":"alice","timestamp":1530000000,"block":42,"seq":7,
//!  "payload":{"proxy":null,"producers":["bp1","bp2"]}}
//! ```
//!
//! Block headers live in a separate JSON-lines file of `{height, producer, timestamp}`.

use std::cmp::Ordering;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::exec::Exec;

/// Unix timestamp of 2000-01-01T00:00:00Z, the epoch of the vote index.
pub const VOTE_INDEX_EPOCH: i64 = 946_684_800;
pub const SECONDS_PER_DAY: i64 = 86_400;
pub const SECONDS_PER_WEEK: i64 = 7 * SECONDS_PER_DAY;
/// Base units per whole token (4 decimal places).
pub const BASE_UNITS_PER_TOKEN: u64 = 10_000;
/// Maximum number of candidates a single vote may name.
pub const MAX_VOTED_PRODUCERS: usize = 30;
pub const MAX_NAME_LEN: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid account name {name:?}: {reason}")]
    InvalidName { name: String, reason: &'static str },
    #[error("vote predates the index epoch ({t_vote} < {t_init})")]
    VoteBeforeEpoch { t_vote: i64, t_init: i64 },
    #[error("seconds-per-day must be positive, got {0}")]
    BadDayLength(i64),
    #[error("negative vote index {0}")]
    NegativeIndex(f64),
    #[error("vote weight overflow (stake {stake}, index {index})")]
    WeightOverflow { stake: u64, index: f64 },
}

/// Account identifier: 1-12 characters from `a-z`, `1-5` and `.`, no trailing dot.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct AccountName(String);

impl AccountName {
    pub fn new(name: impl Into<String>) -> Result<Self, ModelError> {
        let name = name.into();
        let reason = if name.is_empty() {
            Some("empty")
        } else if name.len() > MAX_NAME_LEN {
            Some("longer than 12 characters")
        } else if !name
            .bytes()
            .all(|b| b.is_ascii_lowercase() || (b'1'..=b'5').contains(&b) || b == b'.')
        {
            Some("characters outside a-z, 1-5 and '.'")
        } else if name.ends_with('.') {
            Some("trailing dot")
        } else {
            None
        };
        match reason {
            Some(reason) => Err(ModelError::InvalidName { name, reason }),
            None => Ok(AccountName(name)),
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for AccountName {
    type Error = ModelError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        AccountName::new(value)
    }
}

impl From<AccountName> for String {
    fn from(value: AccountName) -> Self {
        value.0
    }
}

impl FromStr for AccountName {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AccountName::new(s)
    }
}

impl fmt::Display for AccountName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for AccountName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl AsRef<str> for AccountName {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// Staked tokens in base units (1 token = 10,000 units).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StakeAmount(pub u64);

impl StakeAmount {
    pub const ZERO: StakeAmount = StakeAmount(0);

    pub fn from_tokens(tokens: u64) -> Self {
        StakeAmount(tokens * BASE_UNITS_PER_TOKEN)
    }

    pub fn units(self) -> u64 {
        self.0
    }

    pub fn as_tokens(self) -> f64 {
        self.0 as f64 / BASE_UNITS_PER_TOKEN as f64
    }

    pub fn checked_add(self, other: StakeAmount) -> Option<StakeAmount> {
        self.0.checked_add(other.0).map(StakeAmount)
    }

    pub fn checked_sub(self, other: StakeAmount) -> Option<StakeAmount> {
        self.0.checked_sub(other.0).map(StakeAmount)
    }
}

impl std::iter::Sum for StakeAmount {
    fn sum<I: Iterator<Item = StakeAmount>>(iter: I) -> Self {
        StakeAmount(iter.map(|s| s.0).fold(0u64, u64::saturating_add))
    }
}

/// Non-negative, finite voting weight.
#[derive(Debug, Clone, Copy, Default, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VoteWeight(pub f64);

impl VoteWeight {
    pub const ZERO: VoteWeight = VoteWeight(0.0);

    pub fn value(self) -> f64 {
        self.0
    }

    /// Equality up to a relative tolerance of 1e-9.
    pub fn approx_eq(self, other: VoteWeight) -> bool {
        approx_eq_rel(self.0, other.0, 1e-9)
    }
}

pub fn approx_eq_rel(a: f64, b: f64, rel: f64) -> bool {
    let scale = a.abs().max(b.abs());
    (a - b).abs() <= rel * scale || a == b
}

/// Vote index: `floor((t_vote - t_init) / (7 * t_day)) / 52`.
pub fn compute_vote_index(t_vote: i64, t_init: i64, t_day: i64) -> Result<f64, ModelError> {
    if t_day <= 0 {
        return Err(ModelError::BadDayLength(t_day));
    }
    if t_vote < t_init {
        return Err(ModelError::VoteBeforeEpoch { t_vote, t_init });
    }
    let weeks = (t_vote - t_init) / (7 * t_day);
    Ok(weeks as f64 / 52.0)
}

/// Vote index relative to the standard epoch.
pub fn vote_index_at(t_vote: i64) -> Result<f64, ModelError> {
    compute_vote_index(t_vote, VOTE_INDEX_EPOCH, SECONDS_PER_DAY)
}

/// `10000 * stake_tokens * 2^index`.
///
/// `10000 * stake_tokens` is exactly the stake in base units, so the product is
/// formed from the integer unit count. The power is split into an integral
/// part applied by exponent scaling and a fractional part, which keeps
/// `w(s, i) == 2 * w(s, i - 1)` exact.
pub fn compute_vote_weight(stake: StakeAmount, index: f64) -> Result<VoteWeight, ModelError> {
    if !(index >= 0.0) {
        return Err(ModelError::NegativeIndex(index));
    }
    // Indices from week counts are multiples of 1/52; splitting the week
    // count instead of the float keeps the fractional factor identical
    // across whole-year steps.
    let steps = (index * 52.0).round();
    let (whole, frac) = if (index * 52.0 - steps).abs() <= 1e-9 * steps.max(1.0) {
        ((steps / 52.0).floor(), (steps % 52.0) / 52.0)
    } else {
        (index.floor(), index - index.floor())
    };
    let overflow = || ModelError::WeightOverflow { stake: stake.0, index };
    if whole > f64::MAX_EXP as f64 {
        return Err(overflow());
    }
    let weight = stake.0 as f64 * frac.exp2() * 2f64.powi(whole as i32);
    if !weight.is_finite() {
        return Err(overflow());
    }
    Ok(VoteWeight(weight))
}

/// Weight of `stake` for a vote cast at `t_vote`.
pub fn vote_weight_at(stake: StakeAmount, t_vote: i64) -> Result<VoteWeight, ModelError> {
    compute_vote_weight(stake, vote_index_at(t_vote)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionKind {
    NewAccount,
    DelegateBw,
    UndelegateBw,
    RegProducer,
    RegProxy,
    VoteProducer,
}

impl ActionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::NewAccount => "newaccount",
            ActionKind::DelegateBw => "delegatebw",
            ActionKind::UndelegateBw => "undelegatebw",
            ActionKind::RegProducer => "regproducer",
            ActionKind::RegProxy => "regproxy",
            ActionKind::VoteProducer => "voteproducer",
        }
    }
}

impl FromStr for ActionKind {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "newaccount" => ActionKind::NewAccount,
            "delegatebw" => ActionKind::DelegateBw,
            "undelegatebw" => ActionKind::UndelegateBw,
            "regproducer" => ActionKind::RegProducer,
            "regproxy" => ActionKind::RegProxy,
            "voteproducer" => ActionKind::VoteProducer,
            other => return Err(ParseError::UnknownKind(other.to_string())),
        })
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    NewAccount { created: AccountName },
    DelegateBw { amount: StakeAmount },
    UndelegateBw { amount: StakeAmount },
    RegProducer,
    RegProxy { is_proxy: bool },
    /// Either `proxy` is set and `producers` is empty, or `proxy` is `None`.
    VoteProducer { proxy: Option<AccountName>, producers: Vec<AccountName> },
}

impl Payload {
    pub fn kind(&self) -> ActionKind {
        match self {
            Payload::NewAccount { .. } => ActionKind::NewAccount,
            Payload::DelegateBw { .. } => ActionKind::DelegateBw,
            Payload::UndelegateBw { .. } => ActionKind::UndelegateBw,
            Payload::RegProducer => ActionKind::RegProducer,
            Payload::RegProxy { .. } => ActionKind::RegProxy,
            Payload::VoteProducer { .. } => ActionKind::VoteProducer,
        }
    }

    /// Direct vote for a list of producers; the list is sorted and deduplicated.
    pub fn vote(mut producers: Vec<AccountName>) -> Payload {
        producers.sort();
        producers.dedup();
        Payload::VoteProducer { proxy: None, producers }
    }

    pub fn vote_via(proxy: AccountName) -> Payload {
        Payload::VoteProducer { proxy: Some(proxy), producers: Vec::new() }
    }
}

/// One ledger event. Trace order is `(block, seq)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Action {
    pub actor: AccountName,
    pub timestamp: i64,
    pub block: u64,
    pub seq: u64,
    pub payload: Payload,
}

impl Action {
    pub fn kind(&self) -> ActionKind {
        self.payload.kind()
    }

    pub fn order_key(&self) -> (u64, u64) {
        (self.block, self.seq)
    }

    /// Creator of the account created by a `newaccount`.
    pub fn created_account(&self) -> Option<&AccountName> {
        match &self.payload {
            Payload::NewAccount { created } => Some(created),
            _ => None,
        }
    }
}

impl PartialOrd for Action {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Action {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order_key().cmp(&other.order_key())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockHeader {
    pub height: u64,
    pub producer: AccountName,
    pub timestamp: i64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("record is not a JSON object")]
    NotAnObject,
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("field `{field}`: {reason}")]
    InvalidField { field: &'static str, reason: String },
    #[error("unknown action kind {0:?}")]
    UnknownKind(String),
    #[error("producers list exceeds 30 ({0} entries)")]
    TooManyProducers(usize),
    #[error("producers list is not sorted ascending and duplicate-free")]
    UnsortedProducers,
    #[error("ambiguous vote: both proxy and producers are set")]
    AmbiguousVote,
    #[error("newaccount creator must be the actor")]
    CreatorMismatch,
}

impl ParseError {
    /// Field the error refers to, when it is about a single field.
    pub fn field(&self) -> Option<&str> {
        match self {
            ParseError::MissingField(f) => Some(f),
            ParseError::InvalidField { field, .. } => Some(field),
            ParseError::UnknownKind(_) => Some("kind"),
            ParseError::TooManyProducers(_) | ParseError::UnsortedProducers => Some("payload.producers"),
            ParseError::AmbiguousVote => Some("payload"),
            ParseError::CreatorMismatch => Some("payload.creator"),
            _ => None,
        }
    }
}

fn get<'a>(obj: &'a Map<String, Value>, field: &'static str) -> Result<&'a Value, ParseError> {
    obj.get(field).ok_or(ParseError::MissingField(field))
}

fn name_field(value: &Value, field: &'static str) -> Result<AccountName, ParseError> {
    let s = value
        .as_str()
        .ok_or_else(|| ParseError::InvalidField { field, reason: "expected a string".into() })?;
    AccountName::new(s).map_err(|e| ParseError::InvalidField { field, reason: e.to_string() })
}

fn int_field(value: &Value, field: &'static str) -> Result<i64, ParseError> {
    value
        .as_i64()
        .ok_or_else(|| ParseError::InvalidField { field, reason: "expected an integer".into() })
}

fn uint_field(value: &Value, field: &'static str) -> Result<u64, ParseError> {
    value
        .as_u64()
        .ok_or_else(|| ParseError::InvalidField { field, reason: "expected a non-negative integer".into() })
}

fn parse_payload(kind: ActionKind, actor: &AccountName, payload: &Value) -> Result<Payload, ParseError> {
    let empty = Map::new();
    let obj = match payload {
        Value::Object(obj) => obj,
        Value::Null => &empty,
        _ => {
            return Err(ParseError::InvalidField { field: "payload", reason: "expected an object".into() })
        }
    };
    Ok(match kind {
        ActionKind::NewAccount => {
            let created = name_field(get(obj, "created")?, "payload.created")?;
            if let Some(creator) = obj.get("creator") {
                if &name_field(creator, "payload.creator")? != actor {
                    return Err(ParseError::CreatorMismatch);
                }
            }
            Payload::NewAccount { created }
        }
        ActionKind::DelegateBw => Payload::DelegateBw {
            amount: StakeAmount(uint_field(get(obj, "amount")?, "payload.amount")?),
        },
        ActionKind::UndelegateBw => Payload::UndelegateBw {
            amount: StakeAmount(uint_field(get(obj, "amount")?, "payload.amount")?),
        },
        ActionKind::RegProducer => Payload::RegProducer,
        ActionKind::RegProxy => {
            let v = get(obj, "isproxy")?;
            let is_proxy = match v {
                Value::Bool(b) => *b,
                Value::Number(n) if n.as_u64() == Some(0) => false,
                Value::Number(n) if n.as_u64() == Some(1) => true,
                _ => {
                    return Err(ParseError::InvalidField {
                        field: "payload.isproxy",
                        reason: "expected a boolean or 0/1".into(),
                    })
                }
            };
            Payload::RegProxy { is_proxy }
        }
        ActionKind::VoteProducer => {
            let proxy = match obj.get("proxy") {
                None | Some(Value::Null) => None,
                Some(Value::String(s)) if s.is_empty() => None,
                Some(v) => Some(name_field(v, "payload.proxy")?),
            };
            let producers = match obj.get("producers") {
                None | Some(Value::Null) => Vec::new(),
                Some(Value::Array(items)) => {
                    if items.len() > MAX_VOTED_PRODUCERS {
                        return Err(ParseError::TooManyProducers(items.len()));
                    }
                    items
                        .iter()
                        .map(|v| name_field(v, "payload.producers"))
                        .collect::<Result<Vec<_>, _>>()?
                }
                Some(_) => {
                    return Err(ParseError::InvalidField {
                        field: "payload.producers",
                        reason: "expected an array".into(),
                    })
                }
            };
            if proxy.is_some() && !producers.is_empty() {
                return Err(ParseError::AmbiguousVote);
            }
            if producers.windows(2).any(|w| w[0] >= w[1]) {
                return Err(ParseError::UnsortedProducers);
            }
            Payload::VoteProducer { proxy, producers }
        }
    })
}

/// Parses one trace line.
pub fn parse_action(line: &str) -> Result<Action, ParseError> {
    let value: Value = serde_json::from_str(line).map_err(|e| ParseError::Json(e.to_string()))?;
    let obj = value.as_object().ok_or(ParseError::NotAnObject)?;
    let kind_str = get(obj, "kind")?
        .as_str()
        .ok_or_else(|| ParseError::InvalidField { field: "kind", reason: "expected a string".into() })?;
    let kind: ActionKind = kind_str.parse()?;
    let actor = name_field(get(obj, "actor")?, "actor")?;
    let timestamp = int_field(get(obj, "timestamp")?, "timestamp")?;
    let block = uint_field(get(obj, "block")?, "block")?;
    let seq = uint_field(get(obj, "seq")?, "seq")?;
    let payload = parse_payload(kind, &actor, obj.get("payload").unwrap_or(&Value::Null))?;
    Ok(Action { actor, timestamp, block, seq, payload })
}

fn payload_json(payload: &Payload) -> Value {
    match payload {
        Payload::NewAccount { created } => json!({ "created": created }),
        Payload::DelegateBw { amount } | Payload::UndelegateBw { amount } => json!({ "amount": amount.0 }),
        Payload::RegProducer => json!({}),
        Payload::RegProxy { is_proxy } => json!({ "isproxy": is_proxy }),
        Payload::VoteProducer { proxy, producers } => json!({ "proxy": proxy, "producers": producers }),
    }
}

/// Serializes an action as one JSON line (no trailing newline).
pub fn serialize_action(action: &Action) -> String {
    // Key order is fixed: kind, actor, timestamp, block, seq, payload.
    #[derive(Serialize)]
    struct Line<'a> {
        kind: &'static str,
        actor: &'a AccountName,
        timestamp: i64,
        block: u64,
        seq: u64,
        payload: Value,
    }
    serde_json::to_string(&Line {
        kind: action.kind().as_str(),
        actor: &action.actor,
        timestamp: action.timestamp,
        block: action.block,
        seq: action.seq,
        payload: payload_json(&action.payload),
    })
    .expect("action serialization is infallible")
}

#[derive(Debug, Error)]
pub enum TraceIoError {
    #[error("line {line}: {source}")]
    Parse { line: usize, source: ParseError },
    #[error("line {line}: malformed header: {message}")]
    Header { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn non_blank_lines(reader: impl BufRead) -> Result<Vec<(usize, String)>, std::io::Error> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

/// Reads a JSON-lines trace. Lines are parsed independently (in parallel when enabled).
pub fn read_trace(reader: impl BufRead, exec: Exec) -> Result<Vec<Action>, TraceIoError> {
    let lines = non_blank_lines(reader)?;
    exec.map(&lines, |(n, l)| parse_action(l).map_err(|source| TraceIoError::Parse { line: *n, source }))
        .into_iter()
        .collect()
}

pub fn write_trace(mut writer: impl Write, actions: &[Action]) -> std::io::Result<()> {
    for a in actions {
        writeln!(writer, "{}", serialize_action(a))?;
    }
    Ok(())
}

pub fn read_headers(reader: impl BufRead) -> Result<Vec<BlockHeader>, TraceIoError> {
    non_blank_lines(reader)?
        .into_iter()
        .map(|(line, l)| {
            serde_json::from_str(&l).map_err(|e| TraceIoError::Header { line, message: e.to_string() })
        })
        .collect()
}

pub fn write_headers(mut writer: impl Write, headers: &[BlockHeader]) -> std::io::Result<()> {
    for h in headers {
        writeln!(writer, "{}", serde_json::to_string(h).expect("header serialization is infallible"))?;
    }
    Ok(())
}

/// Test and generator convenience: panics on an invalid literal.
pub fn name(s: &str) -> AccountName {
    AccountName::new(s).unwrap_or_else(|e| panic!("{e}"))
}
