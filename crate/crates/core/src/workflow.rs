//! Step-machine engine for compiled dialogs.
//!
//! A [`WorkflowInstance`] walks the definition's steps one input at a time.
//! Challenge steps can be spliced in front of the pending step; they are
//! answered before the business step continues. Notification steps that
//! follow a committed step are delivered and passed over immediately, so they
//! never need their own input and never produce a ledger event.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::authenticator::{answer_digest, Challenge};
use crate::ledger::{EventDraft, EventStatus, LedgerEvent};
use crate::mapper::{self, ChallengeTemplate, Tag};

pub const AUGMENTED_AUTHENTICATION: &str = "AugmentedAuthentication";
pub const CHALLENGE_ISSUED: &str = "ChallengeIssued";
pub const CHALLENGE_FAILED: &str = "ChallengeFailed";
pub const TRANSACTION_FLAGGED: &str = "TransactionFlagged";
pub const FRAUD_RESET: &str = "FraudReset";

/// Role allowed to clear a fraud flag.
pub const ADMIN_ROLE: &str = "admin";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorkflowError {
    #[error("no participant bound to role `{0}`")]
    MissingRoleBinding(String),
    #[error("workflow is closed")]
    WorkflowClosed,
    #[error("`{got}` may not act on this step (expected `{expected}`)")]
    WrongActor { expected: String, got: String },
    #[error("input does not match: {0}")]
    InputMismatch(String),
    #[error("instance is already awaiting a challenge")]
    AlreadyAwaiting,
    #[error("instance is not awaiting a challenge")]
    NotAwaiting,
    #[error("instance is not flagged")]
    NotFlagged,
    #[error("only the admin role may reset a flagged transaction")]
    NotAdmin,
    #[error("challenge set is empty")]
    EmptyChallengeSet,
    #[error("invalid definition: {0}")]
    InvalidDefinition(String),
    #[error("event {seq} (`{name}`) does not fit the workflow: {reason}")]
    History { seq: u64, name: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StepType {
    Notification,
    Confirmation,
    OptionSelection,
    ValueEntry,
    Challenge,
}

impl fmt::Display for StepType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for StepType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "Notification" => StepType::Notification,
            "Confirmation" => StepType::Confirmation,
            "OptionSelection" => StepType::OptionSelection,
            "ValueEntry" => StepType::ValueEntry,
            "Challenge" => StepType::Challenge,
            other => return Err(other.to_string()),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputPattern {
    Digit,
    Int,
    Text,
}

impl FromStr for InputPattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "digit" => Ok(InputPattern::Digit),
            "int" => Ok(InputPattern::Int),
            "text" => Ok(InputPattern::Text),
            other => Err(other.to_string()),
        }
    }
}

impl InputPattern {
    pub fn matches(&self, input: &str) -> bool {
        let input = input.trim();
        match self {
            InputPattern::Digit => input.len() == 1 && input.as_bytes()[0].is_ascii_digit(),
            InputPattern::Int => {
                let n = crate::authenticator::normalize_answer(input);
                !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit())
            }
            InputPattern::Text => !input.is_empty(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub step_id: String,
    pub step_type: StepType,
    pub actor_role: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reply_role: Option<String>,
    pub message_template: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expects: Option<InputPattern>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template_ref: Option<String>,
    pub event_name: String,
    #[serde(skip)]
    pub challenge: Option<Challenge>,
}

impl Step {
    /// Role whose input moves this step forward.
    pub fn responsible_role(&self) -> &str {
        match self.step_type {
            StepType::OptionSelection | StepType::ValueEntry | StepType::Challenge => {
                self.reply_role.as_deref().unwrap_or(&self.actor_role)
            }
            StepType::Notification | StepType::Confirmation => &self.actor_role,
        }
    }

    /// Role the step's message is addressed to; events are attributed to it.
    pub fn addressee_role(&self) -> &str {
        self.reply_role.as_deref().unwrap_or(&self.actor_role)
    }

    fn endorsers(&self) -> Vec<String> {
        let mut roles = vec![self.actor_role.clone()];
        if let Some(r) = &self.reply_role {
            if *r != self.actor_role {
                roles.push(r.clone());
            }
        }
        roles
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkflowDefinition {
    pub workflow_id: String,
    pub roles: BTreeSet<String>,
    pub steps: Vec<Step>,
    #[serde(default)]
    pub templates: Vec<ChallengeTemplate>,
}

impl WorkflowDefinition {
    pub fn validate(&self) -> Result<(), WorkflowError> {
        let bad = |m: String| Err(WorkflowError::InvalidDefinition(m));
        if self.steps.is_empty() {
            return bad("no steps".into());
        }
        let mut ids = BTreeSet::new();
        for s in &self.steps {
            if !ids.insert(&s.step_id) {
                return bad(format!("duplicate step id `{}`", s.step_id));
            }
            for role in std::iter::once(&s.actor_role).chain(s.reply_role.iter()) {
                if !self.roles.contains(role) {
                    return bad(format!("step `{}` uses undeclared role `{role}`", s.step_id));
                }
            }
            match s.step_type {
                StepType::OptionSelection | StepType::ValueEntry
                    if s.reply_role.is_none() || s.expects.is_none() =>
                {
                    return bad(format!("step `{}` needs reply role and expects", s.step_id));
                }
                StepType::Challenge if s.template_ref.is_none() => {
                    return bad(format!("challenge step `{}` has no template", s.step_id));
                }
                _ => {}
            }
            if let Some(t) = &s.template_ref {
                if self.template(t).is_none() {
                    return bad(format!("step `{}` references unknown template `{t}`", s.step_id));
                }
            }
        }
        Ok(())
    }

    pub fn step(&self, step_id: &str) -> Option<&Step> {
        self.steps.iter().find(|s| s.step_id == step_id)
    }

    pub fn template(&self, template_id: &str) -> Option<&ChallengeTemplate> {
        self.templates.iter().find(|t| t.template_id == template_id)
    }

    /// Template used to challenge on events named `event_name`.
    pub fn template_for_event(&self, event_name: &str) -> Option<&ChallengeTemplate> {
        self.steps
            .iter()
            .find(|s| s.event_name == event_name)
            .and_then(|s| s.template_ref.as_deref())
            .and_then(|t| self.template(t))
    }

    /// Slots whose values are challenge answers; never written to a payload.
    pub fn sensitive_slots(&self) -> BTreeSet<String> {
        self.templates.iter().map(|t| t.answer_slot.clone()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InstanceStatus {
    Active,
    AwaitingChallenge,
    Completed,
    FraudFlagged,
}

/// An event draft together with the roles allowed to endorse it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Emitted {
    pub draft: EventDraft,
    pub endorsers: Vec<String>,
}

/// A message for one participant. `prompt` is set when the text asks for
/// input on that step, so channels can render it as a menu.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outbound {
    pub actor_id: String,
    pub text: String,
    pub prompt: Option<Step>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Advance {
    pub events: Vec<Emitted>,
    pub outbound: Vec<Outbound>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpectedAction {
    pub step: Step,
    pub actor_id: String,
    pub prompt: String,
}

/// Event-sourced view of an instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WorkflowState {
    /// Number of definition steps already done.
    pub cursor: usize,
    pub status: InstanceStatus,
    pub pending_challenges: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InjectedStep {
    /// Definition index of the step this challenge precedes.
    pub position: usize,
    pub step: Step,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkflowInstance {
    pub instance_id: String,
    pub definition: Arc<WorkflowDefinition>,
    pub participants: BTreeMap<String, String>,
    pub cursor: usize,
    pub injected: Vec<InjectedStep>,
    pub status: InstanceStatus,
    pub slots: BTreeMap<String, String>,
}

impl WorkflowInstance {
    pub fn instantiate(
        instance_id: impl Into<String>,
        definition: Arc<WorkflowDefinition>,
        participants: BTreeMap<String, String>,
    ) -> Result<Self, WorkflowError> {
        if let Some(role) = definition.roles.iter().find(|r| !participants.contains_key(*r)) {
            return Err(WorkflowError::MissingRoleBinding(role.clone()));
        }
        Ok(Self {
            instance_id: instance_id.into(),
            definition,
            participants,
            cursor: 0,
            injected: Vec::new(),
            status: InstanceStatus::Active,
            slots: BTreeMap::new(),
        })
    }

    /// Definition steps with injected challenges in front of their position.
    pub fn effective_steps(&self) -> Vec<&Step> {
        let n = self.definition.steps.len();
        let mut out = Vec::with_capacity(n + self.injected.len());
        for i in 0..=n {
            out.extend(self.injected.iter().filter(|j| j.position == i).map(|j| &j.step));
            if let Some(s) = self.definition.steps.get(i) {
                out.push(s);
            }
        }
        out
    }

    pub fn effective_len(&self) -> usize {
        self.definition.steps.len() + self.injected.len()
    }

    pub fn current_step(&self) -> Option<&Step> {
        self.effective_steps().get(self.cursor).copied()
    }

    /// Definition steps already passed.
    pub fn main_cursor(&self) -> usize {
        self.effective_steps()[..self.cursor]
            .iter()
            .filter(|s| s.step_type != StepType::Challenge)
            .count()
    }

    pub fn pending_challenges(&self) -> Vec<&Challenge> {
        self.effective_steps()[self.cursor..]
            .iter()
            .filter_map(|s| s.challenge.as_ref())
            .collect()
    }

    pub fn state(&self) -> WorkflowState {
        WorkflowState {
            cursor: self.main_cursor(),
            status: self.status,
            pending_challenges: self.pending_challenges().len(),
        }
    }

    pub fn actor_for(&self, role: &str) -> Option<&str> {
        self.participants.get(role).map(String::as_str)
    }

    fn role_actor(&self, role: &str) -> String {
        self.participants.get(role).cloned().unwrap_or_default()
    }

    fn is_open(&self) -> Result<(), WorkflowError> {
        match self.status {
            InstanceStatus::Active | InstanceStatus::AwaitingChallenge => Ok(()),
            InstanceStatus::Completed | InstanceStatus::FraudFlagged => Err(WorkflowError::WorkflowClosed),
        }
    }

    pub fn expected_action(&self) -> Result<ExpectedAction, WorkflowError> {
        self.is_open()?;
        let step = self.current_step().ok_or(WorkflowError::WorkflowClosed)?.clone();
        let actor_id = self.role_actor(step.responsible_role());
        let prompt = mapper::render_slots(&step.message_template, &self.slots);
        Ok(ExpectedAction { step, actor_id, prompt })
    }

    /// Applies one input. On error the instance is left untouched.
    pub fn advance(&mut self, actor_id: &str, input: &str, now: i64) -> Result<Advance, WorkflowError> {
        self.is_open()?;
        let step = self.current_step().ok_or(WorkflowError::WorkflowClosed)?.clone();
        let expected = self.role_actor(step.responsible_role());
        if actor_id != expected {
            return Err(WorkflowError::WrongActor { expected, got: actor_id.to_string() });
        }

        let mut next = self.clone();
        let mut out = Advance::default();
        if let Some(challenge) = &step.challenge {
            if answer_digest(input) != challenge.answer_hash {
                return Err(WorkflowError::InputMismatch("wrong challenge answer".into()));
            }
            let role = step.responsible_role().to_string();
            let draft = EventDraft::new(&self.instance_id, AUGMENTED_AUTHENTICATION, actor_id, &role, now)
                .with_payload("challenge_id", &challenge.challenge_id)
                .with_payload("source_event_id", &challenge.source_event_id);
            out.events.push(Emitted { draft, endorsers: vec![role] });
            next.cursor += 1;
            if next.pending_challenges().is_empty() {
                next.status = InstanceStatus::Active;
            }
            *self = next;
            return Ok(out);
        }

        next.bind_input(&step, input)?;
        out.events.push(next.business_event(&step, now));
        next.deliver(&step, &mut out.outbound);
        next.cursor += 1;
        next.settle(&mut out.outbound);
        *self = next;
        Ok(out)
    }

    fn bind_input(&mut self, step: &Step, input: &str) -> Result<(), WorkflowError> {
        if let Some(pattern) = step.expects {
            if !pattern.matches(input) {
                return Err(WorkflowError::InputMismatch(format!("expected {pattern:?} input")));
            }
        }
        match step.step_type {
            StepType::OptionSelection => {
                let rendered = mapper::render_slots(&step.message_template, &self.slots);
                let options = mapper::option_lines(&rendered);
                let picked = input.trim();
                let choice = if options.is_empty() {
                    picked.to_string()
                } else {
                    let idx: u32 = picked
                        .parse()
                        .map_err(|_| WorkflowError::InputMismatch("not an option number".into()))?;
                    options
                        .into_iter()
                        .find(|(i, _)| *i == idx)
                        .map(|(_, text)| text)
                        .ok_or_else(|| WorkflowError::InputMismatch(format!("no option {idx}")))?
                };
                self.slots.insert("option".into(), picked.to_string());
                self.slots.insert("choice".into(), choice);
            }
            StepType::Confirmation | StepType::ValueEntry => {
                let wanted: Vec<String> = mapper::placeholders(&step.message_template)
                    .into_iter()
                    .filter(|s| !self.slots.contains_key(s) && mapper::capturable(step.step_type, s))
                    .collect();
                let tokens = mapper::tokenize_and_tag(input);
                let mut used = vec![false; tokens.len()];
                for slot in wanted {
                    if self.slots.contains_key(&slot) {
                        continue;
                    }
                    let tag = Tag::for_slot_name(&slot).expect("capturable slots have a tag");
                    let hit = tokens.iter().enumerate().find(|(i, t)| !used[*i] && t.tag == tag);
                    match hit {
                        Some((i, t)) => {
                            used[i] = true;
                            self.slots.insert(slot, t.text.clone());
                        }
                        None => {
                            return Err(WorkflowError::InputMismatch(format!("no {tag} value for `{slot}`")))
                        }
                    }
                }
                if step.step_type == StepType::ValueEntry {
                    self.slots.insert("value".into(), input.trim().to_string());
                }
            }
            StepType::Notification | StepType::Challenge => {}
        }
        Ok(())
    }

    fn business_event(&self, step: &Step, now: i64) -> Emitted {
        let role = step.addressee_role().to_string();
        let mut draft = EventDraft::new(&self.instance_id, &step.event_name, self.role_actor(&role), &role, now);
        let sensitive = self.definition.sensitive_slots();
        for slot in mapper::produced_slots(step) {
            if sensitive.contains(&slot) {
                continue;
            }
            if let Some(v) = self.slots.get(&slot) {
                draft.payload.insert(slot, v.clone());
            }
        }
        let template = step.template_ref.as_deref().and_then(|t| self.definition.template(t));
        if let Some(answer) = template.and_then(|t| self.slots.get(&t.answer_slot)) {
            draft.answer_hash = Some(answer_digest(answer));
        }
        Emitted { draft, endorsers: step.endorsers() }
    }

    fn deliver(&self, step: &Step, outbound: &mut Vec<Outbound>) {
        let text = mapper::render_slots(&step.message_template, &self.slots);
        let mut to = vec![self.role_actor(step.addressee_role())];
        if step.step_type == StepType::Confirmation {
            to.push(self.role_actor(&step.actor_role));
        }
        to.dedup();
        match step.step_type {
            StepType::Confirmation | StepType::Notification => {
                outbound.extend(to.into_iter().map(|actor_id| Outbound { actor_id, text: text.clone(), prompt: None }))
            }
            _ => {}
        }
    }

    /// Passes over notifications reachable from the cursor, then prompts for
    /// the next input step.
    fn settle(&mut self, outbound: &mut Vec<Outbound>) {
        while let Some(step) = self.current_step().cloned() {
            if step.step_type != StepType::Notification {
                break;
            }
            self.deliver(&step, outbound);
            self.cursor += 1;
        }
        match self.current_step().cloned() {
            None => self.status = InstanceStatus::Completed,
            Some(step) if matches!(step.step_type, StepType::OptionSelection | StepType::ValueEntry) => {
                outbound.push(Outbound {
                    actor_id: self.role_actor(step.responsible_role()),
                    text: mapper::render_slots(&step.message_template, &self.slots),
                    prompt: Some(step),
                });
            }
            Some(_) => {}
        }
    }

    fn challenge_steps(&self, challenges: &[Challenge], now: i64) -> (Vec<InjectedStep>, Vec<Emitted>) {
        let pending = self.current_step().expect("open instance has a pending step");
        let role = pending.responsible_role().to_string();
        let actor = self.role_actor(&role);
        let position = self.main_cursor();
        let mut steps = Vec::new();
        let mut events = Vec::new();
        for c in challenges {
            steps.push(InjectedStep {
                position,
                step: Step {
                    step_id: c.challenge_id.clone(),
                    step_type: StepType::Challenge,
                    actor_role: role.clone(),
                    reply_role: Some(role.clone()),
                    message_template: c.question.clone(),
                    expects: Some(InputPattern::Text),
                    template_ref: Some(c.template_id.clone()),
                    event_name: AUGMENTED_AUTHENTICATION.to_string(),
                    challenge: Some(c.clone()),
                },
            });
            let draft = EventDraft::new(&self.instance_id, CHALLENGE_ISSUED, &actor, &role, now)
                .with_status(EventStatus::Pending)
                .with_answer_hash(&c.answer_hash)
                .with_payload("challenge_id", &c.challenge_id)
                .with_payload("question", &c.question)
                .with_payload("round", c.round.to_string())
                .with_payload("source_event_id", &c.source_event_id);
            events.push(Emitted { draft, endorsers: vec![role.clone()] });
        }
        (steps, events)
    }

    /// Inserts challenge steps immediately before the pending step.
    pub fn augment(&mut self, challenges: &[Challenge], now: i64) -> Result<Vec<Emitted>, WorkflowError> {
        match self.status {
            InstanceStatus::Active => {}
            InstanceStatus::AwaitingChallenge => return Err(WorkflowError::AlreadyAwaiting),
            _ => return Err(WorkflowError::WorkflowClosed),
        }
        if challenges.is_empty() {
            return Err(WorkflowError::EmptyChallengeSet);
        }
        let (steps, events) = self.challenge_steps(challenges, now);
        self.injected.extend(steps);
        self.status = InstanceStatus::AwaitingChallenge;
        Ok(events)
    }

    fn withdraw_unanswered(&mut self) {
        let pending: BTreeSet<String> = self
            .pending_challenges()
            .into_iter()
            .map(|c| c.challenge_id.clone())
            .collect();
        self.injected.retain(|j| !pending.contains(&j.step.step_id));
    }

    fn challenged(&self) -> (String, String) {
        let role = self
            .current_step()
            .map(|s| s.responsible_role().to_string())
            .unwrap_or_default();
        (self.role_actor(&role), role)
    }

    /// Ends the current challenge round as failed and injects the next one.
    pub fn replace_challenges(&mut self, challenges: &[Challenge], now: i64) -> Result<Vec<Emitted>, WorkflowError> {
        if self.status != InstanceStatus::AwaitingChallenge {
            return Err(WorkflowError::NotAwaiting);
        }
        if challenges.is_empty() {
            return Err(WorkflowError::EmptyChallengeSet);
        }
        let failed = self.pending_challenges().first().map(|c| (*c).clone());
        let (actor, role) = self.challenged();
        let mut draft = EventDraft::new(&self.instance_id, CHALLENGE_FAILED, actor, &role, now);
        if let Some(c) = failed {
            draft = draft
                .with_payload("challenge_id", c.challenge_id)
                .with_payload("round", c.round.to_string());
        }
        let mut events = vec![Emitted { draft, endorsers: vec![role] }];
        self.withdraw_unanswered();
        let (steps, issued) = self.challenge_steps(challenges, now);
        self.injected.extend(steps);
        events.extend(issued);
        Ok(events)
    }

    fn flag_event(&self, now: i64, reason: &str) -> Emitted {
        let (actor, role) = self.challenged();
        let draft = EventDraft::new(&self.instance_id, TRANSACTION_FLAGGED, actor, &role, now)
            .with_status(EventStatus::Flagged)
            .with_payload("reason", reason);
        Emitted { draft, endorsers: vec![role] }
    }

    /// Challenge rounds exhausted: the transaction is flagged as fraudulent.
    pub fn flag_fraud(&mut self, now: i64) -> Result<Emitted, WorkflowError> {
        if self.status != InstanceStatus::AwaitingChallenge {
            return Err(WorkflowError::NotAwaiting);
        }
        let event = self.flag_event(now, "challenge");
        self.withdraw_unanswered();
        self.status = InstanceStatus::FraudFlagged;
        Ok(event)
    }

    /// Refuses an active transaction outright (no challenge material).
    pub fn deny(&mut self, now: i64) -> Result<Emitted, WorkflowError> {
        if self.status != InstanceStatus::Active {
            return Err(WorkflowError::WorkflowClosed);
        }
        let event = self.flag_event(now, "deny");
        self.status = InstanceStatus::FraudFlagged;
        Ok(event)
    }

    /// Clears a fraud flag; the instance resumes at its pending definition step.
    pub fn reset(&mut self, admin_id: &str, admin_role: &str, now: i64) -> Result<Emitted, WorkflowError> {
        if admin_role != ADMIN_ROLE {
            return Err(WorkflowError::NotAdmin);
        }
        if self.status != InstanceStatus::FraudFlagged {
            return Err(WorkflowError::NotFlagged);
        }
        self.cursor = self.main_cursor();
        self.injected.clear();
        self.status = if self.cursor == self.definition.steps.len() {
            InstanceStatus::Completed
        } else {
            InstanceStatus::Active
        };
        let draft = EventDraft::new(&self.instance_id, FRAUD_RESET, admin_id, ADMIN_ROLE, now);
        Ok(Emitted { draft, endorsers: vec![ADMIN_ROLE.to_string()] })
    }
}

/// Folds an instance's ledger events (seq order) into its state.
pub fn replay_state(
    definition: &WorkflowDefinition,
    events: &[LedgerEvent],
) -> Result<WorkflowState, WorkflowError> {
    let mut st = WorkflowState { cursor: 0, status: InstanceStatus::Active, pending_challenges: 0 };
    let steps = &definition.steps;
    for e in events {
        let misfit = |reason: &str| WorkflowError::History {
            seq: e.seq,
            name: e.event_name.clone(),
            reason: reason.to_string(),
        };
        match e.event_name.as_str() {
            CHALLENGE_ISSUED => {
                st.pending_challenges += 1;
                st.status = InstanceStatus::AwaitingChallenge;
            }
            AUGMENTED_AUTHENTICATION => {
                if st.pending_challenges == 0 {
                    return Err(misfit("no challenge outstanding"));
                }
                st.pending_challenges -= 1;
                if st.pending_challenges == 0 {
                    st.status = InstanceStatus::Active;
                }
            }
            CHALLENGE_FAILED => st.pending_challenges = 0,
            TRANSACTION_FLAGGED => {
                st.pending_challenges = 0;
                st.status = InstanceStatus::FraudFlagged;
            }
            FRAUD_RESET => {
                st.pending_challenges = 0;
                st.status = if st.cursor == steps.len() {
                    InstanceStatus::Completed
                } else {
                    InstanceStatus::Active
                };
            }
            name => {
                if st.status != InstanceStatus::Active {
                    return Err(misfit("business event while not active"));
                }
                match steps.get(st.cursor) {
                    Some(s) if s.event_name == name => st.cursor += 1,
                    _ => return Err(misfit("not the pending step")),
                }
                while steps.get(st.cursor).is_some_and(|s| s.step_type == StepType::Notification) {
                    st.cursor += 1;
                }
                if st.cursor == steps.len() {
                    st.status = InstanceStatus::Completed;
                }
            }
        }
    }
    Ok(st)
}
