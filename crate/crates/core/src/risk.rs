//! Per-user transaction profiling and risk scoring.
//!
//! The profile is a three-node Bayesian network: time of day (A) and recency
//! (C) are roots, amount (B) depends on both. Counts are kept rather than
//! probabilities so the smoothing constant can change without retraining.
//! Request-rate windows live next to the counts but are never persisted.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::authenticator::{self, AuthPolicy, Decision};

/// Amounts strictly below this are `Low`.
pub const LOW_AMOUNT_LIMIT: f64 = 1501.0;
/// Gaps strictly below this are `Recent`.
pub const RECENT_SECS: i64 = 7 * 86_400;
pub const DEFAULT_ALPHA: f64 = 1.0;

#[derive(Debug, Error)]
pub enum RiskError {
    #[error("negative amount {0}")]
    NegativeAmount(f64),
    #[error("invalid profile `{user}`: {reason}")]
    InvalidProfile { user: String, reason: String },
    #[error("profile file: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TimeClass {
    Morning,
    Afternoon,
    OffHours,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AmountClass {
    Low,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RecencyClass {
    Recent,
    Stale,
}

impl TimeClass {
    pub const ALL: [TimeClass; 3] = [TimeClass::Morning, TimeClass::Afternoon, TimeClass::OffHours];
    fn idx(self) -> usize {
        self as usize
    }
}

impl AmountClass {
    pub const ALL: [AmountClass; 2] = [AmountClass::Low, AmountClass::High];
    fn idx(self) -> usize {
        self as usize
    }
}

impl RecencyClass {
    pub const ALL: [RecencyClass; 2] = [RecencyClass::Recent, RecencyClass::Stale];
    fn idx(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TxFeatures {
    pub a: TimeClass,
    pub b: AmountClass,
    pub c: RecencyClass,
    pub raw_amount: f64,
    pub raw_ts: i64,
    pub prev_ts: Option<i64>,
}

/// `local_offset` is seconds east of UTC for the time-of-day bin.
pub fn discretize(
    raw_amount: f64,
    raw_ts: i64,
    prev_ts: Option<i64>,
    local_offset: i32,
) -> Result<TxFeatures, RiskError> {
    if raw_amount < 0.0 || raw_amount.is_nan() {
        return Err(RiskError::NegativeAmount(raw_amount));
    }
    let minute = (raw_ts + local_offset as i64).rem_euclid(86_400) / 60;
    let a = match minute {
        360..=719 => TimeClass::Morning,
        // 18:00 itself still counts as afternoon
        720..=1080 => TimeClass::Afternoon,
        _ => TimeClass::OffHours,
    };
    let b = if raw_amount < LOW_AMOUNT_LIMIT { AmountClass::Low } else { AmountClass::High };
    let c = match prev_ts {
        Some(p) if raw_ts - p < RECENT_SECS => RecencyClass::Recent,
        _ => RecencyClass::Stale,
    };
    Ok(TxFeatures { a, b, c, raw_amount, raw_ts, prev_ts })
}

/// Sliding-window parameters for the bot/abuse signals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    pub window_secs: i64,
    /// Requests tolerated in a window before the burst score rises.
    pub burst_free: usize,
    /// Extra requests over `burst_free` that take the score to 1.
    pub burst_span: usize,
    /// Invalid requests in a window that take the score to 1.
    pub invalid_limit: usize,
}

impl Default for RateParams {
    fn default() -> Self {
        Self { window_secs: 600, burst_free: 5, burst_span: 5, invalid_limit: 3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserProfile {
    pub user_id: String,
    pub n_transactions: u64,
    pub counts_a: [u64; 3],
    pub counts_c: [u64; 2],
    /// Indexed `[a][c][b]`.
    pub counts_b_given_ac: [[[u64; 2]; 2]; 3],
    pub alpha: f64,
    pub request_window: VecDeque<i64>,
    pub invalid_window: VecDeque<i64>,
    pub last_tx_ts: Option<i64>,
}

impl UserProfile {
    pub fn empty(user_id: impl Into<String>, alpha: f64) -> Self {
        Self {
            user_id: user_id.into(),
            n_transactions: 0,
            counts_a: [0; 3],
            counts_c: [0; 2],
            counts_b_given_ac: [[[0; 2]; 2]; 3],
            alpha,
            request_window: VecDeque::new(),
            invalid_window: VecDeque::new(),
            last_tx_ts: None,
        }
    }

    pub fn count_b(&self, a: TimeClass, c: RecencyClass, b: AmountClass) -> u64 {
        self.counts_b_given_ac[a.idx()][c.idx()][b.idx()]
    }

    pub fn prune(&mut self, now: i64, params: &RateParams) {
        for w in [&mut self.request_window, &mut self.invalid_window] {
            while w.front().is_some_and(|&t| now - t >= params.window_secs) {
                w.pop_front();
            }
        }
    }

    fn push(window: &mut VecDeque<i64>, ts: i64) {
        // keep ascending even if a late frame arrives out of order
        let at = window.partition_point(|&t| t <= ts);
        window.insert(at, ts);
    }

    pub fn record_request(&mut self, ts: i64, params: &RateParams) {
        Self::push(&mut self.request_window, ts);
        self.prune(ts, params);
    }

    pub fn record_invalid(&mut self, ts: i64, params: &RateParams) {
        Self::push(&mut self.invalid_window, ts);
        self.prune(ts, params);
    }

    fn check(&self) -> Result<(), String> {
        let n = self.n_transactions;
        if self.counts_a.iter().sum::<u64>() != n || self.counts_c.iter().sum::<u64>() != n {
            return Err("marginal counts do not sum to n_transactions".into());
        }
        let joint: u64 = self.counts_b_given_ac.iter().flatten().flatten().sum();
        if joint != n {
            return Err("conditional counts do not sum to n_transactions".into());
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err("alpha must be a finite non-negative number".into());
        }
        Ok(())
    }
}

pub fn fit_profile(user_id: &str, history: &[TxFeatures], alpha: f64) -> UserProfile {
    let mut p = UserProfile::empty(user_id, alpha);
    for f in history {
        update_profile(&mut p, f);
    }
    p
}

pub fn update_profile(profile: &mut UserProfile, features: &TxFeatures) {
    profile.counts_a[features.a.idx()] += 1;
    profile.counts_c[features.c.idx()] += 1;
    profile.counts_b_given_ac[features.a.idx()][features.c.idx()][features.b.idx()] += 1;
    profile.n_transactions += 1;
    profile.last_tx_ts = Some(profile.last_tx_ts.map_or(features.raw_ts, |t| t.max(features.raw_ts)));
}

fn laplace(count: u64, total: u64, alpha: f64, classes: usize) -> f64 {
    let den = total as f64 + alpha * classes as f64;
    if den == 0.0 {
        1.0 / classes as f64
    } else {
        (count as f64 + alpha) / den
    }
}

pub fn likelihood_of(profile: &UserProfile, a: TimeClass, b: AmountClass, c: RecencyClass) -> f64 {
    let n = profile.n_transactions;
    let pa = laplace(profile.counts_a[a.idx()], n, profile.alpha, 3);
    let pc = laplace(profile.counts_c[c.idx()], n, profile.alpha, 2);
    let row = profile.counts_b_given_ac[a.idx()][c.idx()];
    let pb = laplace(row[b.idx()], row[0] + row[1], profile.alpha, 2);
    pa * pc * pb
}

pub fn likelihood(profile: &UserProfile, features: &TxFeatures) -> f64 {
    likelihood_of(profile, features.a, features.b, features.c)
}

/// All twelve `(a, b, c)` configurations.
pub fn configurations() -> impl Iterator<Item = (TimeClass, AmountClass, RecencyClass)> {
    TimeClass::ALL.into_iter().flat_map(|a| {
        AmountClass::ALL
            .into_iter()
            .flat_map(move |b| RecencyClass::ALL.into_iter().map(move |c| (a, b, c)))
    })
}

pub fn bn_risk(profile: &UserProfile, features: &TxFeatures) -> f64 {
    let max = configurations()
        .map(|(a, b, c)| likelihood_of(profile, a, b, c))
        .fold(0.0_f64, f64::max);
    if max <= 0.0 {
        return 0.0;
    }
    (1.0 - likelihood(profile, features) / max).clamp(0.0, 1.0)
}

fn in_window(window: &VecDeque<i64>, now: i64, params: &RateParams) -> usize {
    window.iter().filter(|&&t| t <= now && now - t < params.window_secs).count()
}

pub fn rate_risk(profile: &UserProfile, now: i64, params: &RateParams) -> f64 {
    let requests = in_window(&profile.request_window, now, params);
    let invalid = in_window(&profile.invalid_window, now, params);
    let burst = requests.saturating_sub(params.burst_free) as f64 / params.burst_span.max(1) as f64;
    let invalid = invalid as f64 / params.invalid_limit.max(1) as f64;
    burst.max(invalid).clamp(0.0, 1.0)
}

/// One anomaly signal. Signals are combined by taking the maximum.
pub trait RiskSignal: Send + Sync {
    fn name(&self) -> &'static str;
    fn score(&self, profile: &UserProfile, features: &TxFeatures, now: i64) -> f64;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct BnSignal;

impl RiskSignal for BnSignal {
    fn name(&self) -> &'static str {
        "bn"
    }
    fn score(&self, profile: &UserProfile, features: &TxFeatures, _now: i64) -> f64 {
        bn_risk(profile, features)
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct RateSignal(pub RateParams);

impl RiskSignal for RateSignal {
    fn name(&self) -> &'static str {
        "rate"
    }
    fn score(&self, profile: &UserProfile, _features: &TxFeatures, now: i64) -> f64 {
        rate_risk(profile, now, &self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskReport {
    pub features: TxFeatures,
    pub likelihood: f64,
    pub bn_risk: f64,
    pub rate_risk: f64,
    pub risk: f64,
    pub threshold: f64,
    pub decision: Decision,
}

/// The enabled signals, in evaluation order.
pub struct RiskEngine {
    signals: Vec<Box<dyn RiskSignal>>,
}

impl RiskEngine {
    pub fn new(signals: Vec<Box<dyn RiskSignal>>) -> Self {
        Self { signals }
    }

    pub fn signal_names(&self) -> Vec<&'static str> {
        self.signals.iter().map(|s| s.name()).collect()
    }

    /// `available` is the number of past transactions usable as challenges.
    pub fn assess(
        &self,
        profile: &UserProfile,
        features: &TxFeatures,
        now: i64,
        policy: &AuthPolicy,
        available: usize,
    ) -> RiskReport {
        let mut bn = 0.0;
        let mut rate = 0.0;
        let mut risk = 0.0_f64;
        for s in &self.signals {
            let v = s.score(profile, features, now);
            match s.name() {
                "bn" => bn = v,
                "rate" => rate = v,
                _ => {}
            }
            risk = risk.max(v);
        }
        let threshold = authenticator::threshold(profile.n_transactions, policy);
        RiskReport {
            features: *features,
            likelihood: likelihood(profile, features),
            bn_risk: bn,
            rate_risk: rate,
            risk,
            threshold,
            decision: authenticator::decide(risk, threshold, available, policy),
        }
    }
}

impl Default for RiskEngine {
    fn default() -> Self {
        Self::new(vec![Box::new(BnSignal), Box::new(RateSignal::default())])
    }
}

/// Scores with both built-in signals.
pub fn assess(
    profile: &UserProfile,
    features: &TxFeatures,
    now: i64,
    policy: &AuthPolicy,
    available: usize,
) -> RiskReport {
    RiskEngine::new(vec![Box::new(BnSignal), Box::new(RateSignal(policy.rate))])
        .assess(profile, features, now, policy, available)
}

/// One row of a transaction log used for training.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRow {
    pub user_id: String,
    pub ts: i64,
    /// Seconds east of UTC the row was recorded in.
    pub utc_offset: i32,
    pub amount: f64,
    pub valid: bool,
}

/// Fits one profile per user from valid rows, in timestamp order.
pub fn train_profiles(rows: &[TrainingRow], alpha: f64) -> Result<BTreeMap<String, UserProfile>, RiskError> {
    let mut by_user: BTreeMap<&str, Vec<&TrainingRow>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.valid) {
        by_user.entry(&r.user_id).or_default().push(r);
    }
    let mut out = BTreeMap::new();
    for (user, mut rows) in by_user {
        rows.sort_by_key(|r| r.ts);
        let mut profile = UserProfile::empty(user, alpha);
        for r in rows {
            let f = discretize(r.amount, r.ts, profile.last_tx_ts, r.utc_offset)?;
            update_profile(&mut profile, &f);
        }
        out.insert(user.to_string(), profile);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ProfileRecord {
    user_id: String,
    alpha: f64,
    n_transactions: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    last_tx_ts: Option<i64>,
    time: BTreeMap<TimeClass, u64>,
    recency: BTreeMap<RecencyClass, u64>,
    /// Keyed `"<time>/<recency>"`.
    amount: BTreeMap<String, BTreeMap<AmountClass, u64>>,
}

fn ac_key(a: TimeClass, c: RecencyClass) -> String {
    format!("{a:?}/{c:?}")
}

impl From<&UserProfile> for ProfileRecord {
    fn from(p: &UserProfile) -> Self {
        let mut amount = BTreeMap::new();
        for a in TimeClass::ALL {
            for c in RecencyClass::ALL {
                let row = AmountClass::ALL.into_iter().map(|b| (b, p.count_b(a, c, b))).collect();
                amount.insert(ac_key(a, c), row);
            }
        }
        Self {
            user_id: p.user_id.clone(),
            alpha: p.alpha,
            n_transactions: p.n_transactions,
            last_tx_ts: p.last_tx_ts,
            time: TimeClass::ALL.into_iter().map(|a| (a, p.counts_a[a.idx()])).collect(),
            recency: RecencyClass::ALL.into_iter().map(|c| (c, p.counts_c[c.idx()])).collect(),
            amount,
        }
    }
}

impl TryFrom<ProfileRecord> for UserProfile {
    type Error = RiskError;

    fn try_from(r: ProfileRecord) -> Result<Self, RiskError> {
        let mut p = UserProfile::empty(&r.user_id, r.alpha);
        p.n_transactions = r.n_transactions;
        p.last_tx_ts = r.last_tx_ts;
        for a in TimeClass::ALL {
            p.counts_a[a.idx()] = r.time.get(&a).copied().unwrap_or(0);
            for c in RecencyClass::ALL {
                let row = r.amount.get(&ac_key(a, c));
                for b in AmountClass::ALL {
                    p.counts_b_given_ac[a.idx()][c.idx()][b.idx()] =
                        row.and_then(|m| m.get(&b)).copied().unwrap_or(0);
                }
            }
        }
        for c in RecencyClass::ALL {
            p.counts_c[c.idx()] = r.recency.get(&c).copied().unwrap_or(0);
        }
        p.check().map_err(|reason| RiskError::InvalidProfile { user: r.user_id.clone(), reason })?;
        Ok(p)
    }
}

/// Profiles as a JSON array of count records.
pub fn profiles_to_json(profiles: &BTreeMap<String, UserProfile>) -> String {
    let records: Vec<ProfileRecord> = profiles.values().map(ProfileRecord::from).collect();
    serde_json::to_string_pretty(&records).expect("profile records serialize")
}

pub fn profiles_from_json(text: &str) -> Result<BTreeMap<String, UserProfile>, RiskError> {
    let records: Vec<ProfileRecord> = serde_json::from_str(text)?;
    records
        .into_iter()
        .map(|r| UserProfile::try_from(r).map(|p| (p.user_id.clone(), p)))
        .collect()
}
