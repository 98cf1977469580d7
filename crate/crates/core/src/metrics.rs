//! Decentralization measures: block-production entropy, stake and weight
//! concentration, power-law fits, proxy shares and producer turnover.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{AccountName, BlockHeader, StakeAmount};
use crate::replay::VotingSnapshot;
use crate::time::{utc_day, YearMonth};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no production data")]
    NoProductionData,
    #[error("entropy scope must be at least 1")]
    BadScope,
    #[error("empty distribution")]
    EmptyDistribution,
    #[error("fraction {0} outside (0, 1]")]
    BadFraction(f64),
    #[error("distribution sums to zero")]
    ZeroTotal,
    #[error("power-law fit needs at least 10 values, got {0}")]
    TooFewValues(usize),
    #[error("power-law fit needs positive finite values")]
    NonPositiveValue,
    #[error("values span fewer than three logarithmic bins; no slope can be fitted")]
    DegenerateFit,
}

/// Blocks produced per producer in one UTC month.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlyProduction {
    pub month: YearMonth,
    pub counts: BTreeMap<AccountName, u64>,
}

impl MonthlyProduction {
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }
}

/// Groups headers by the UTC month of their timestamp.
pub fn monthly_production(headers: &[BlockHeader]) -> Vec<MonthlyProduction> {
    let mut months: BTreeMap<YearMonth, BTreeMap<AccountName, u64>> = BTreeMap::new();
    for h in headers {
        *months.entry(YearMonth::of(h.timestamp)).or_default().entry(h.producer.clone()).or_default() += 1;
    }
    months.into_iter().map(|(month, counts)| MonthlyProduction { month, counts }).collect()
}

/// Which producers enter the entropy sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum EntropyScope {
    Top(usize),
    All,
}

impl std::str::FromStr for EntropyScope {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(EntropyScope::All);
        }
        match s.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(EntropyScope::Top(n)),
            _ => Err(format!("invalid entropy scope {s:?} (expected a positive integer or \"all\")")),
        }
    }
}

impl From<EntropyScope> for String {
    fn from(s: EntropyScope) -> String {
        s.to_string()
    }
}

impl TryFrom<String> for EntropyScope {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl std::fmt::Display for EntropyScope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EntropyScope::Top(n) => write!(f, "{n}"),
            EntropyScope::All => f.write_str("all"),
        }
    }
}

/// How shares are normalized when the scope is a top-n restriction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum EntropyNorm {
    /// Shares renormalized over the selected producers (bounded by `log2 n`).
    #[default]
    Restricted,
    /// Shares relative to the whole month's production.
    Global,
}

/// Shannon entropy (bits) of the month's block shares.
pub fn production_entropy(prod: &MonthlyProduction, scope: EntropyScope) -> Result<f64, MetricsError> {
    production_entropy_with(prod, scope, EntropyNorm::Restricted)
}

pub fn production_entropy_with(
    prod: &MonthlyProduction,
    scope: EntropyScope,
    norm: EntropyNorm,
) -> Result<f64, MetricsError> {
    let grand_total = prod.total();
    if grand_total == 0 {
        return Err(MetricsError::NoProductionData);
    }
    let mut counts: Vec<(&AccountName, u64)> = prod.counts.iter().map(|(k, v)| (k, *v)).filter(|(_, v)| *v > 0).collect();
    counts.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let take = match scope {
        EntropyScope::All => counts.len(),
        EntropyScope::Top(0) => return Err(MetricsError::BadScope),
        EntropyScope::Top(n) => n.min(counts.len()),
    };
    let selected = &counts[..take];
    let denom = match norm {
        EntropyNorm::Restricted => selected.iter().map(|(_, c)| *c).sum::<u64>(),
        EntropyNorm::Global => grand_total,
    } as f64;
    let h: f64 = selected
        .iter()
        .map(|(_, c)| {
            let p = *c as f64 / denom;
            -p * p.log2()
        })
        .sum();
    // -0.0 for a single producer
    Ok(h.max(0.0))
}

/// Voters' stakes, largest first (ties by name). With `accumulate_proxies`,
/// a proxy's entry also counts the stake delegated to it.
pub fn stake_distribution(snapshot: &VotingSnapshot, accumulate_proxies: bool) -> Vec<(AccountName, StakeAmount)> {
    let mut out: Vec<(AccountName, StakeAmount)> = snapshot
        .per_voter
        .iter()
        .map(|(name, v)| {
            let stake = if accumulate_proxies && v.is_proxy {
                v.stake.checked_add(v.proxied_stake).unwrap_or(StakeAmount(u64::MAX))
            } else {
                v.stake
            };
            (name.clone(), stake)
        })
        .collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

/// Share of the total held by the largest `ceil(p * N)` values.
pub fn top_share(values: &[f64], p: f64) -> Result<f64, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::EmptyDistribution);
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(MetricsError::BadFraction(p));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = sorted.iter().sum();
    if total <= 0.0 {
        return Err(MetricsError::ZeroTotal);
    }
    let k = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    if k == sorted.len() {
        return Ok(1.0);
    }
    Ok(sorted[..k].iter().sum::<f64>() / total)
}

pub fn stake_top_share(distribution: &[(AccountName, StakeAmount)], p: f64) -> Result<f64, MetricsError> {
    let values: Vec<f64> = distribution.iter().map(|(_, s)| s.0 as f64).collect();
    top_share(&values, p)
}

/// Power-law fit `y ~ x^-alpha` over a log-binned density histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub alpha: f64,
    pub r_squared: f64,
    /// `(bin geometric centre, density)` for every non-empty bin.
    pub bins: Vec<(f64, f64)>,
}

/// Ordinary least squares `y = a + b x`; returns `(a, b, r^2)`.
pub(crate) fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - b * mx;
    let r2 = if sxx > 0.0 && syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 0.0 };
    (a, b, r2)
}

/// Bins double in width starting at the smallest value; the density of each
/// bin is its count divided by width and sample size.
pub fn powerlaw_exponent(values: &[f64]) -> Result<PowerLawFit, MetricsError> {
    if values.len() < 10 {
        return Err(MetricsError::TooFewValues(values.len()));
    }
    if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(MetricsError::NonPositiveValue);
    }
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(0.0, f64::max);
    let n_bins = ((hi / lo).log2().floor() as usize) + 1;
    let mut counts = vec![0u64; n_bins];
    for v in values {
        let k = ((v / lo).log2().floor() as usize).min(n_bins - 1);
        counts[k] += 1;
    }
    let n = values.len() as f64;
    let bins: Vec<(f64, f64)> = counts
        .iter()
        .enumerate()
        .filter(|(_, c)| **c > 0)
        .map(|(k, c)| {
            let left = lo * 2f64.powi(k as i32);
            let right = left * 2.0;
            ((left * right).sqrt(), *c as f64 / (right - left) / n)
        })
        .collect();
    if bins.len() < 3 {
        return Err(MetricsError::DegenerateFit);
    }
    let xs: Vec<f64> = bins.iter().map(|b| b.0.log10()).collect();
    let ys: Vec<f64> = bins.iter().map(|b| b.1.log10()).collect();
    let (_, slope, r_squared) = least_squares(&xs, &ys);
    Ok(PowerLawFit { alpha: -slope, r_squared, bins })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharePoint {
    pub timestamp: i64,
    pub all_value: f64,
    pub proxied_value: f64,
    pub share: f64,
}

impl SharePoint {
    fn new(timestamp: i64, all_value: f64, proxied_value: f64) -> Self {
        let share = if all_value > 0.0 { (proxied_value / all_value).clamp(0.0, 1.0) } else { 0.0 };
        SharePoint { timestamp, all_value, proxied_value, share }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ShareSeries {
    pub points: Vec<SharePoint>,
}

/// Account-count, stake and weight shares of proxied voters over time.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProxyShares {
    pub accounts: ShareSeries,
    pub stake: ShareSeries,
    pub weight: ShareSeries,
}

pub fn proxy_share_series(snapshots: &[VotingSnapshot]) -> ProxyShares {
    let mut out = ProxyShares::default();
    for s in snapshots {
        let (mut n_all, mut n_px, mut st_all, mut st_px, mut w_all, mut w_px) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for v in s.per_voter.values() {
            let proxied = v.proxy.is_some();
            n_all += 1.0;
            st_all += v.stake.0 as f64;
            w_all += v.weight;
            if proxied {
                n_px += 1.0;
                st_px += v.stake.0 as f64;
                w_px += v.weight;
            }
        }
        out.accounts.points.push(SharePoint::new(s.taken_at, n_all, n_px));
        out.stake.points.push(SharePoint::new(s.taken_at, st_all, st_px));
        out.weight.points.push(SharePoint::new(s.taken_at, w_all, w_px));
    }
    out
}

/// Voter vs. stakeholder participation at one sample time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipationPoint {
    pub timestamp: i64,
    pub stakeholders: usize,
    pub voters: usize,
    pub total_stake: u64,
    pub voter_stake: u64,
}

pub fn participation_series(snapshots: &[VotingSnapshot]) -> Vec<ParticipationPoint> {
    snapshots
        .iter()
        .map(|s| ParticipationPoint {
            timestamp: s.taken_at,
            stakeholders: s.stakeholders,
            voters: s.per_voter.len(),
            total_stake: s.total_stake.0,
            voter_stake: s.per_voter.values().map(|v| v.stake.0).sum(),
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Turnover {
    /// Distinct producers seen in each month.
    pub monthly: Vec<(YearMonth, usize)>,
    /// Distinct producers seen up to and including each month.
    pub cumulative: Vec<(YearMonth, usize)>,
    /// Distinct UTC days on which each producer signed at least one block.
    pub active_days: BTreeMap<AccountName, usize>,
}

pub fn producer_turnover(headers: &[BlockHeader]) -> Turnover {
    let mut by_month: BTreeMap<YearMonth, BTreeSet<&AccountName>> = BTreeMap::new();
    let mut days: BTreeMap<&AccountName, BTreeSet<i64>> = BTreeMap::new();
    for h in headers {
        by_month.entry(YearMonth::of(h.timestamp)).or_default().insert(&h.producer);
        days.entry(&h.producer).or_default().insert(utc_day(h.timestamp));
    }
    let mut seen: BTreeSet<&AccountName> = BTreeSet::new();
    let mut out = Turnover::default();
    for (month, producers) in by_month {
        out.monthly.push((month, producers.len()));
        seen.extend(producers);
        out.cumulative.push((month, seen.len()));
    }
    out.active_days = days.into_iter().map(|(k, d)| (k.clone(), d.len())).collect();
    out
}
