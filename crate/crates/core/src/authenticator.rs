//! Adaptive multi-factor rules: threshold policy, challenge generation from
//! ledger history, answer verification and escalation.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::{sha256_hex, EventFilter, EventStatus, Ledger, LedgerError, LedgerEvent};
use crate::mapper;
use crate::risk::RateParams;
use crate::workflow::{WorkflowDefinition, WorkflowError, WorkflowInstance, CHALLENGE_ISSUED};

#[derive(Debug, Error)]
pub enum AuthError {
    #[error("no challenge template for event `{0}`")]
    NoTemplateForEvent(String),
    #[error("no past transactions to build challenges from")]
    NoChallengeMaterial,
    #[error("challenge `{challenge_id}` does not match its ledger record")]
    LedgerMismatch { challenge_id: String },
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Workflow(#[from] WorkflowError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuthPolicy {
    pub theta_max: f64,
    pub theta_min: f64,
    pub tau: f64,
    pub k_questions: usize,
    pub max_rounds: u32,
    pub rate: RateParams,
}

impl Default for AuthPolicy {
    fn default() -> Self {
        Self { theta_max: 0.95, theta_min: 0.50, tau: 20.0, k_questions: 3, max_rounds: 2, rate: RateParams::default() }
    }
}

impl AuthPolicy {
    pub fn validate(&self) -> Result<(), AuthError> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.theta_min) || !unit(self.theta_max) || self.theta_min > self.theta_max {
            return Err(AuthError::InvalidPolicy("need 0 <= theta_min <= theta_max <= 1".into()));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(AuthError::InvalidPolicy("tau must be positive".into()));
        }
        if self.k_questions == 0 || self.max_rounds == 0 {
            return Err(AuthError::InvalidPolicy("k_questions and max_rounds must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Accept,
    Challenge(usize),
    Deny,
}

/// Risk level at or above which challenges are required. Starts at
/// `theta_max` for a new user and decays towards `theta_min`.
pub fn threshold(n_transactions: u64, policy: &AuthPolicy) -> f64 {
    policy.theta_min + (policy.theta_max - policy.theta_min) * (-(n_transactions as f64) / policy.tau).exp()
}

pub fn decide(risk: f64, threshold: f64, available: usize, policy: &AuthPolicy) -> Decision {
    if risk < threshold {
        return Decision::Accept;
    }
    match policy.k_questions.min(available) {
        0 => Decision::Deny,
        k => Decision::Challenge(k),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Challenge {
    pub challenge_id: String,
    pub question: String,
    pub answer_hash: String,
    pub source_event_id: String,
    pub round: u32,
    pub asked_ts: i64,
    pub template_id: String,
}

/// Canonical answer form: trimmed, single-spaced, uppercase, no currency
/// prefix, no digit-group commas.
pub fn normalize_answer(text: &str) -> String {
    let upper = text.split_whitespace().collect::<Vec<_>>().join(" ").to_uppercase();
    let stripped = upper.strip_prefix("KES").map(str::trim_start).unwrap_or(&upper);
    let chars: Vec<char> = stripped.chars().collect();
    let mut out = String::with_capacity(chars.len());
    for (i, &c) in chars.iter().enumerate() {
        let between_digits = c == ','
            && i > 0
            && chars[i - 1].is_ascii_digit()
            && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit());
        if !between_digits {
            out.push(c);
        }
    }
    out
}

pub fn answer_digest(text: &str) -> String {
    sha256_hex(normalize_answer(text))
}

/// Completed events of `user_id` that carry a hashed answer and have a
/// template, newest first.
pub fn challenge_material(ledger: &Ledger, user_id: &str, definition: &WorkflowDefinition) -> Vec<LedgerEvent> {
    ledger
        .query_events(&EventFilter {
            actor_id: Some(user_id.to_string()),
            status: Some(EventStatus::Completed),
            newest_first: true,
            ..Default::default()
        })
        .into_iter()
        .filter(|e| e.answer_hash.is_some() && definition.template_for_event(&e.event_name).is_some())
        .collect()
}

/// Up to `k` challenges from the user's most recent eligible events, skipping
/// events already used in this session.
#[allow(clippy::too_many_arguments)]
pub fn make_challenges(
    user_id: &str,
    k: usize,
    used: &BTreeSet<String>,
    round: u32,
    ledger: &Ledger,
    definition: &WorkflowDefinition,
    now: i64,
    mut next_id: impl FnMut() -> String,
) -> Result<Vec<Challenge>, AuthError> {
    let candidates = ledger.query_events(&EventFilter {
        actor_id: Some(user_id.to_string()),
        status: Some(EventStatus::Completed),
        newest_first: true,
        ..Default::default()
    });
    let mut out = Vec::new();
    for event in candidates {
        if out.len() == k {
            break;
        }
        let Some(answer_hash) = &event.answer_hash else { continue };
        if used.contains(&event.event_id) {
            continue;
        }
        // events without a template are skipped, not fatal
        let Some(template) = definition.template_for_event(&event.event_name) else { continue };
        let Ok(question) = mapper::render_question(template, &event.payload) else { continue };
        out.push(Challenge {
            challenge_id: next_id(),
            question,
            answer_hash: answer_hash.clone(),
            source_event_id: event.event_id.clone(),
            round,
            asked_ts: now,
            template_id: template.template_id.clone(),
        });
    }
    if out.is_empty() {
        return Err(AuthError::NoChallengeMaterial);
    }
    Ok(out)
}

/// Checks a response against both the in-memory challenge and its ledger
/// record. `Ok(false)` is a wrong answer; a disagreement between the two
/// copies is an integrity fault.
pub fn verify_answer(challenge: &Challenge, response: &str, ledger: &Ledger) -> Result<bool, AuthError> {
    let recorded = ledger
        .query_events(&EventFilter {
            event_name: Some(CHALLENGE_ISSUED.to_string()),
            newest_first: true,
            ..Default::default()
        })
        .into_iter()
        .find(|e| e.payload.get("challenge_id") == Some(&challenge.challenge_id));
    match recorded.and_then(|e| e.answer_hash) {
        Some(h) if h == challenge.answer_hash => Ok(answer_digest(response) == challenge.answer_hash),
        _ => Err(AuthError::LedgerMismatch { challenge_id: challenge.challenge_id.clone() }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
}

/// Verifies the instance's next pending challenge and, on success, commits
/// the resulting AugmentedAuthentication event.
pub fn answer_challenge(
    instance: &mut WorkflowInstance,
    ledger: &mut Ledger,
    actor_id: &str,
    response: &str,
    now: i64,
) -> Result<Verdict, AuthError> {
    let challenge = instance
        .pending_challenges()
        .first()
        .map(|c| (*c).clone())
        .ok_or(WorkflowError::NotAwaiting)?;
    if !verify_answer(&challenge, response, ledger)? {
        return Ok(Verdict::Fail);
    }
    let advance = instance.advance(actor_id, response, now)?;
    ledger.commit(advance.events)?;
    Ok(Verdict::Pass)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Escalation {
    /// A fresh round of challenges has been issued.
    Retry(Vec<Challenge>),
    /// Rounds or material exhausted; the instance is flagged.
    Fraud,
}

/// Handles a failed challenge: either the next round from older events, or a
/// fraud flag.
#[allow(clippy::too_many_arguments)]
pub fn on_fail(
    instance: &mut WorkflowInstance,
    ledger: &mut Ledger,
    user_id: &str,
    used: &BTreeSet<String>,
    round: u32,
    policy: &AuthPolicy,
    now: i64,
    next_id: impl FnMut() -> String,
) -> Result<Escalation, AuthError> {
    if round < policy.max_rounds {
        let definition = instance.definition.clone();
        match make_challenges(user_id, policy.k_questions, used, round + 1, ledger, &definition, now, next_id) {
            Ok(next) => {
                let events = instance.replace_challenges(&next, now)?;
                ledger.commit(events)?;
                return Ok(Escalation::Retry(next));
            }
            Err(AuthError::NoChallengeMaterial) => {}
            Err(e) => return Err(e),
        }
    }
    let flagged = instance.flag_fraud(now)?;
    ledger.commit(vec![flagged])?;
    Ok(Escalation::Fraud)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_endpoints() {
        let p = AuthPolicy::default();
        assert_eq!(threshold(0, &p), 0.95);
        assert!((threshold(20, &p) - 0.6655).abs() < 5e-4);
        assert!(threshold(10_000, &p) - 0.5 < 1e-12);
    }

    #[test]
    fn decide_rules() {
        let p = AuthPolicy::default();
        assert_eq!(decide(0.30, 0.6655, 5, &p), Decision::Accept);
        assert_eq!(decide(0.90, 0.6655, 5, &p), Decision::Challenge(3));
        assert_eq!(decide(0.90, 0.6655, 1, &p), Decision::Challenge(1));
        assert_eq!(decide(0.99, 0.6655, 0, &p), Decision::Deny);
        assert_eq!(decide(0.6655, 0.6655, 2, &p), Decision::Challenge(2));
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_answer(" 1,000 "), "1000");
        assert_eq!(normalize_answer("kes 1501"), "1501");
        assert_eq!(normalize_answer("KES1,500"), "1500");
        assert_eq!(normalize_answer("Yes"), "YES");
        assert_eq!(normalize_answer("  pay   later "), "PAY LATER");
        assert_eq!(normalize_answer("a, b"), "A, B");
    }

    #[test]
    fn policy_validation() {
        assert!(AuthPolicy::default().validate().is_ok());
        let bad = AuthPolicy { theta_min: 0.9, theta_max: 0.5, ..Default::default() };
        assert!(bad.validate().is_err());
        assert!(AuthPolicy { k_questions: 0, ..Default::default() }.validate().is_err());
    }
}
