//! Simulated SMS/USSD endpoint.
//!
//! Every inbound frame runs through one pipeline: session lookup, pending
//! challenge check, risk assessment of the implied transaction, then the
//! authentication decision. Locks are always taken in the order
//! session → instance → profile → ledger; the small lookup maps and the id
//! generator are leaves and are never held while taking another lock.

mod menu;
mod serve;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, Mutex, MutexGuard};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use menu::{render_menu, render_text};
pub use serve::{serve_lines, serve_tcp};

use crate::authenticator::{self, AuthError, AuthPolicy, Challenge, Decision, Escalation};
use crate::ledger::{Ledger, LedgerError};
use crate::registry::{self, UnknownStrategy};
use crate::risk::{self, RiskEngine, RiskReport, TxFeatures, UserProfile};
use crate::workflow::{
    InstanceStatus, Outbound, StepType, WorkflowDefinition, WorkflowError, WorkflowInstance, ADMIN_ROLE,
};

pub const MAX_TEXT_CHARS: usize = 480;

pub const UNKNOWN_USER: &str = "Unknown user";
pub const NO_PENDING: &str = "No pending action";
pub const NOT_YOUR_TURN: &str = "Not your turn";
pub const AWAITING_VERIFICATION: &str = "Transaction is awaiting verification";
pub const BLOCKED: &str = "Transaction blocked pending review";
pub const DENIED: &str = "Transaction denied pending review";
pub const FLAGGED: &str = "Verification failed. Transaction flagged for review";
pub const WRONG_ANSWER: &str = "Incorrect answer.";
pub const RECEIVED: &str = "Received";

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("unknown msisdn `{0}`")]
    UnknownMsisdn(String),
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("{0} step cannot be shown as a menu")]
    NotRenderable(StepType),
    #[error("users: {0}")]
    Directory(String),
    #[error(transparent)]
    Strategy(#[from] UnknownStrategy),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Workflow(#[from] WorkflowError),
    #[error(transparent)]
    Auth(#[from] AuthError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    In,
    Out,
}

impl Direction {
    fn is_in(&self) -> bool {
        *self == Direction::In
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmsFrame {
    #[serde(default, skip_serializing_if = "Direction::is_in")]
    pub dir: Direction,
    pub msisdn: String,
    pub text: String,
    pub ts: i64,
}

impl SmsFrame {
    pub fn inbound(msisdn: impl Into<String>, text: impl Into<String>, ts: i64) -> Self {
        Self { dir: Direction::In, msisdn: msisdn.into(), text: text.into(), ts }
    }

    pub fn outbound(msisdn: impl Into<String>, text: impl Into<String>, ts: i64) -> Self {
        Self { dir: Direction::Out, msisdn: msisdn.into(), text: text.into(), ts }
    }

    fn check_inbound(&self) -> Result<(), GatewayError> {
        if self.dir != Direction::In {
            return Err(GatewayError::InvalidFrame("expected an inbound frame".into()));
        }
        if self.text.trim().is_empty() {
            return Err(GatewayError::InvalidFrame("empty text".into()));
        }
        if self.text.chars().count() > MAX_TEXT_CHARS {
            return Err(GatewayError::InvalidFrame(format!("text longer than {MAX_TEXT_CHARS} characters")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Mode {
    #[default]
    Sms,
    Ussd,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserEntry {
    pub msisdn: String,
    pub user_id: String,
    pub role: String,
}

/// Registered users, looked up by msisdn or user id.
#[derive(Debug, Clone, Default)]
pub struct Directory {
    by_msisdn: HashMap<String, UserEntry>,
    by_user: HashMap<String, UserEntry>,
}

impl Directory {
    pub fn new(entries: impl IntoIterator<Item = UserEntry>) -> Result<Self, GatewayError> {
        let mut d = Directory::default();
        for e in entries {
            if d.by_msisdn.contains_key(&e.msisdn) {
                return Err(GatewayError::Directory(format!("duplicate msisdn {}", e.msisdn)));
            }
            if d.by_user.contains_key(&e.user_id) {
                return Err(GatewayError::Directory(format!("duplicate user {}", e.user_id)));
            }
            d.by_user.insert(e.user_id.clone(), e.clone());
            d.by_msisdn.insert(e.msisdn.clone(), e);
        }
        Ok(d)
    }

    pub fn by_msisdn(&self, msisdn: &str) -> Option<&UserEntry> {
        self.by_msisdn.get(msisdn)
    }

    pub fn by_user(&self, user_id: &str) -> Option<&UserEntry> {
        self.by_user.get(user_id)
    }

    /// The single user holding `role`, if exactly one does.
    pub fn unique_with_role(&self, role: &str) -> Option<&UserEntry> {
        let mut it = self.by_user.values().filter(|e| e.role == role);
        match (it.next(), it.next()) {
            (Some(e), None) => Some(e),
            _ => None,
        }
    }

    pub fn len(&self) -> usize {
        self.by_user.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_user.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub msisdn: String,
    pub user_id: String,
    pub role: String,
    pub instance_id: Option<String>,
    pub pending_challenge: Option<Challenge>,
    pub mode: Mode,
    /// Challenge round in progress (0 when none).
    pub round: u32,
    /// Ledger events already used as challenge material in this round sequence.
    pub used_sources: BTreeSet<String>,
    /// Input that triggered the challenges; applied once they are passed.
    pub deferred_input: Option<String>,
    pub last_report: Option<RiskReport>,
}

impl Session {
    fn clear_challenge(&mut self) {
        self.pending_challenge = None;
        self.round = 0;
        self.used_sources.clear();
        self.deferred_input = None;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatewayConfig {
    pub policy: AuthPolicy,
    /// Seconds east of UTC used for time-of-day bins.
    pub utc_offset: i32,
    pub seed: u64,
    /// Risk signal names, see [`registry::risk_signals`].
    pub signals: Vec<String>,
    /// Smoothing for profiles created on first contact.
    pub alpha: f64,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            policy: AuthPolicy::default(),
            utc_offset: 3 * 3600,
            seed: 0,
            signals: vec!["bn".into(), "rate".into()],
            alpha: risk::DEFAULT_ALPHA,
        }
    }
}

type Shared<T> = Arc<Mutex<T>>;

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

fn is_ussd_dial(text: &str) -> bool {
    let t = text.trim();
    t.len() >= 3 && t.starts_with('*') && t.ends_with('#') && t[1..t.len() - 1].bytes().all(|b| b.is_ascii_digit() || b == b'*')
}

pub struct Gateway {
    definition: Arc<WorkflowDefinition>,
    directory: Directory,
    config: GatewayConfig,
    engine: RiskEngine,
    sessions: Mutex<HashMap<String, Shared<Session>>>,
    instances: Mutex<HashMap<String, Shared<WorkflowInstance>>>,
    profiles: Mutex<HashMap<String, Shared<UserProfile>>>,
    ledger: Mutex<Ledger>,
    // leaves
    assignments: Mutex<HashMap<String, String>>,
    modes: Mutex<HashMap<String, Mode>>,
    rng: Mutex<ChaCha8Rng>,
}

/// Collects replies for one inbound frame.
struct Outbox<'a> {
    gateway: &'a Gateway,
    ts: i64,
    frames: Vec<SmsFrame>,
}

impl Outbox<'_> {
    fn send_to(&mut self, msisdn: &str, text: impl Into<String>) {
        self.frames.push(SmsFrame::outbound(msisdn, text, self.ts));
    }

    fn deliver(&mut self, messages: Vec<Outbound>) {
        for m in messages {
            let Some(user) = self.gateway.directory.by_user(&m.actor_id) else { continue };
            let mode = self.gateway.mode_of(&user.msisdn);
            let text = match &m.prompt {
                Some(step) => render_text(&m.text, step.step_type, mode).unwrap_or(m.text.clone()),
                None => m.text.clone(),
            };
            let msisdn = user.msisdn.clone();
            self.send_to(&msisdn, text);
        }
    }
}

impl Gateway {
    pub fn new(
        definition: WorkflowDefinition,
        directory: Directory,
        profiles: BTreeMap<String, UserProfile>,
        ledger: Ledger,
        config: GatewayConfig,
    ) -> Result<Self, GatewayError> {
        config.policy.validate()?;
        definition.validate()?;
        let engine = registry::risk_engine(&config.signals, config.policy.rate)?;
        let profiles = profiles.into_iter().map(|(k, v)| (k, Arc::new(Mutex::new(v)))).collect();
        Ok(Self {
            definition: Arc::new(definition),
            directory,
            engine,
            sessions: Mutex::new(HashMap::new()),
            instances: Mutex::new(HashMap::new()),
            profiles: Mutex::new(profiles),
            ledger: Mutex::new(ledger),
            assignments: Mutex::new(HashMap::new()),
            modes: Mutex::new(HashMap::new()),
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(config.seed)),
            config,
        })
    }

    pub fn definition(&self) -> &WorkflowDefinition {
        &self.definition
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    fn next_id(&self, prefix: &str) -> String {
        let n: u64 = lock(&self.rng).gen();
        format!("{prefix}-{n:016x}")
    }

    fn mode_of(&self, msisdn: &str) -> Mode {
        lock(&self.modes).get(msisdn).copied().unwrap_or_default()
    }

    /// Existing session for `msisdn`, or a new one bound to its registered user.
    pub fn session_for(&self, msisdn: &str) -> Result<Shared<Session>, GatewayError> {
        let user = self
            .directory
            .by_msisdn(msisdn)
            .ok_or_else(|| GatewayError::UnknownMsisdn(msisdn.to_string()))?;
        let mut sessions = lock(&self.sessions);
        let s = sessions.entry(msisdn.to_string()).or_insert_with(|| {
            Arc::new(Mutex::new(Session {
                msisdn: msisdn.to_string(),
                user_id: user.user_id.clone(),
                role: user.role.clone(),
                instance_id: None,
                pending_challenge: None,
                mode: Mode::Sms,
                round: 0,
                used_sources: BTreeSet::new(),
                deferred_input: None,
                last_report: None,
            }))
        });
        Ok(Arc::clone(s))
    }

    fn profile_handle(&self, user_id: &str) -> Shared<UserProfile> {
        let mut profiles = lock(&self.profiles);
        Arc::clone(
            profiles
                .entry(user_id.to_string())
                .or_insert_with(|| Arc::new(Mutex::new(UserProfile::empty(user_id, self.config.alpha)))),
        )
    }

    fn instance_handle(&self, instance_id: &str) -> Option<Shared<WorkflowInstance>> {
        lock(&self.instances).get(instance_id).cloned()
    }

    fn assigned_instance(&self, user_id: &str) -> Option<String> {
        lock(&self.assignments).get(user_id).cloned()
    }

    pub fn session_snapshot(&self, msisdn: &str) -> Option<Session> {
        let s = lock(&self.sessions).get(msisdn).cloned()?;
        let snapshot = lock(&s).clone();
        Some(snapshot)
    }

    pub fn instance_snapshot(&self, instance_id: &str) -> Option<WorkflowInstance> {
        let i = self.instance_handle(instance_id)?;
        let snapshot = lock(&i).clone();
        Some(snapshot)
    }

    /// Instance the user is currently taking part in, if any.
    pub fn instance_of(&self, user_id: &str) -> Option<String> {
        self.assigned_instance(user_id)
    }

    pub fn profile_snapshot(&self, user_id: &str) -> Option<UserProfile> {
        let p = lock(&self.profiles).get(user_id).cloned()?;
        let snapshot = lock(&p).clone();
        Some(snapshot)
    }

    pub fn with_ledger<R>(&self, f: impl FnOnce(&Ledger) -> R) -> R {
        f(&lock(&self.ledger))
    }

    pub fn flush(&self) -> Result<(), GatewayError> {
        Ok(lock(&self.ledger).flush()?)
    }

    /// Clears a fraud flag; only users registered with the admin role may.
    pub fn reset(&self, instance_id: &str, admin_user: &str, ts: i64) -> Result<(), GatewayError> {
        let role = self.directory.by_user(admin_user).map(|u| u.role.as_str()).unwrap_or("");
        let handle = self
            .instance_handle(instance_id)
            .ok_or_else(|| GatewayError::InvalidFrame(format!("unknown instance {instance_id}")))?;
        let mut inst = lock(&handle);
        let mut next = inst.clone();
        let emitted = next.reset(admin_user, role, ts)?;
        lock(&self.ledger).commit(vec![emitted])?;
        *inst = next;
        Ok(())
    }

    /// Runs one inbound frame through the pipeline and returns the replies.
    pub fn handle_frame(&self, frame: &SmsFrame) -> Result<Vec<SmsFrame>, GatewayError> {
        frame.check_inbound()?;
        let mut out = Outbox { gateway: self, ts: frame.ts, frames: Vec::new() };
        let session = match self.session_for(&frame.msisdn) {
            Ok(s) => s,
            Err(GatewayError::UnknownMsisdn(_)) => {
                out.send_to(&frame.msisdn, UNKNOWN_USER);
                return Ok(out.frames);
            }
            Err(e) => return Err(e),
        };
        let mut s = lock(&session);
        self.process(&mut s, frame, &mut out)?;
        Ok(out.frames)
    }

    fn process(&self, s: &mut Session, frame: &SmsFrame, out: &mut Outbox<'_>) -> Result<(), GatewayError> {
        let text = frame.text.trim();
        // every inbound frame counts towards the burst window
        lock(&self.profile_handle(&s.user_id)).record_request(frame.ts, &self.config.policy.rate);
        if is_ussd_dial(text) {
            s.mode = Mode::Ussd;
            lock(&self.modes).insert(s.msisdn.clone(), Mode::Ussd);
            return self.show_menu(s, out);
        }
        if s.role == ADMIN_ROLE {
            return self.admin_command(s, text, frame.ts, out);
        }

        s.instance_id = self.assigned_instance(&s.user_id);
        let existing = s.instance_id.as_deref().and_then(|id| self.instance_handle(id));
        let (handle, is_new) = match existing {
            Some(h) if lock(&h).status != InstanceStatus::Completed => (h, false),
            _ => {
                s.instance_id = None;
                s.clear_challenge();
                if self.definition.steps[0].responsible_role() != s.role {
                    out.send_to(&s.msisdn, NO_PENDING);
                    return Ok(());
                }
                match self.open_instance(s, text) {
                    Ok(inst) => (Arc::new(Mutex::new(inst)), true),
                    Err(e) => {
                        out.send_to(&s.msisdn, format!("Cannot start: {e}"));
                        return Ok(());
                    }
                }
            }
        };

        let mut inst = lock(&handle);
        self.sync_challenge(s, &inst);
        let profile_handle = self.profile_handle(&s.user_id);
        let mut profile = lock(&profile_handle);

        match inst.status {
            InstanceStatus::FraudFlagged => out.send_to(&s.msisdn, BLOCKED),
            InstanceStatus::Completed => out.send_to(&s.msisdn, NO_PENDING),
            InstanceStatus::AwaitingChallenge if s.pending_challenge.is_some() => {
                self.answer(s, &mut inst, &mut profile, text, frame.ts, out)?
            }
            InstanceStatus::AwaitingChallenge => out.send_to(&s.msisdn, AWAITING_VERIFICATION),
            InstanceStatus::Active => {
                let legal = self.transact(s, &mut inst, &mut profile, text, frame.ts, out)?;
                if is_new && legal {
                    let id = inst.instance_id.clone();
                    lock(&self.instances).insert(id.clone(), Arc::clone(&handle));
                    let mut assignments = lock(&self.assignments);
                    for user in inst.participants.values() {
                        assignments.insert(user.clone(), id.clone());
                    }
                    s.instance_id = Some(id);
                }
            }
        }
        Ok(())
    }

    fn open_instance(&self, s: &Session, text: &str) -> Result<WorkflowInstance, GatewayError> {
        let mut participants = BTreeMap::from([(s.role.clone(), s.user_id.clone())]);
        let mentions = text
            .split_whitespace()
            .filter_map(|w| w.strip_prefix('@'))
            .map(|w| w.trim_end_matches(|c: char| !c.is_alphanumeric() && c != '_' && c != '-'));
        for m in mentions {
            if let Some(u) = self.directory.by_user(m) {
                participants.entry(u.role.clone()).or_insert_with(|| u.user_id.clone());
            }
        }
        for role in &self.definition.roles {
            if !participants.contains_key(role) {
                if let Some(u) = self.directory.unique_with_role(role) {
                    participants.insert(role.clone(), u.user_id.clone());
                }
            }
        }
        let id = self.next_id("wf");
        Ok(WorkflowInstance::instantiate(id, Arc::clone(&self.definition), participants)?)
    }

    /// Keeps the session's challenge view in step with the instance.
    fn sync_challenge(&self, s: &mut Session, inst: &WorkflowInstance) {
        let mine = inst.status == InstanceStatus::AwaitingChallenge
            && inst.current_step().map(|st| st.responsible_role()) == Some(s.role.as_str())
            && inst.actor_for(&s.role) == Some(s.user_id.as_str());
        if mine {
            s.pending_challenge = inst.pending_challenges().first().map(|c| (*c).clone());
        } else {
            s.clear_challenge();
        }
    }

    fn features(&self, inst: &WorkflowInstance, profile: &UserProfile, ts: i64) -> TxFeatures {
        let amount = inst
            .slots
            .get("amount")
            .and_then(|a| authenticator::normalize_answer(a).parse::<f64>().ok())
            .filter(|a| *a >= 0.0)
            .unwrap_or(0.0);
        risk::discretize(amount, ts, profile.last_tx_ts, self.config.utc_offset)
            .expect("amount is non-negative")
    }

    /// Business input on an active instance. Returns whether the input was
    /// legal for the pending step.
    fn transact(
        &self,
        s: &mut Session,
        inst: &mut WorkflowInstance,
        profile: &mut UserProfile,
        text: &str,
        ts: i64,
        out: &mut Outbox<'_>,
    ) -> Result<bool, GatewayError> {
        let expected = inst.expected_action()?;
        if expected.actor_id != s.user_id {
            profile.record_invalid(ts, &self.config.policy.rate);
            out.send_to(&s.msisdn, NOT_YOUR_TURN);
            return Ok(false);
        }
        let mut dry = inst.clone();
        let advance = match dry.advance(&s.user_id, text, ts) {
            Ok(a) => a,
            Err(e) => {
                profile.record_invalid(ts, &self.config.policy.rate);
                out.send_to(&s.msisdn, format!("Invalid input: {e}"));
                return Ok(false);
            }
        };
        let features = self.features(&dry, profile, ts);
        let mut ledger = lock(&self.ledger);
        let available = authenticator::challenge_material(&ledger, &s.user_id, &self.definition).len();
        let report = self.engine.assess(profile, &features, ts, &self.config.policy, available);
        s.last_report = Some(report);
        match report.decision {
            Decision::Accept => {
                ledger.commit(advance.events)?;
                *inst = dry;
                risk::update_profile(profile, &features);
                let before = out.frames.len();
                out.deliver(advance.outbound);
                if !out.frames[before..].iter().any(|f| f.msisdn == s.msisdn) {
                    out.send_to(&s.msisdn, RECEIVED);
                }
            }
            Decision::Challenge(k) => {
                let challenges = authenticator::make_challenges(
                    &s.user_id,
                    k,
                    &BTreeSet::new(),
                    1,
                    &ledger,
                    &self.definition,
                    ts,
                    || self.next_id("ch"),
                )?;
                let mut next = inst.clone();
                let issued = next.augment(&challenges, ts)?;
                ledger.commit(issued)?;
                *inst = next;
                s.round = 1;
                s.used_sources = challenges.iter().map(|c| c.source_event_id.clone()).collect();
                s.deferred_input = Some(text.to_string());
                s.pending_challenge = challenges.first().cloned();
                out.send_to(&s.msisdn, challenges[0].question.clone());
            }
            Decision::Deny => {
                let mut next = inst.clone();
                let flagged = next.deny(ts)?;
                ledger.commit(vec![flagged])?;
                *inst = next;
                out.send_to(&s.msisdn, DENIED);
            }
        }
        Ok(true)
    }

    fn answer(
        &self,
        s: &mut Session,
        inst: &mut WorkflowInstance,
        profile: &mut UserProfile,
        text: &str,
        ts: i64,
        out: &mut Outbox<'_>,
    ) -> Result<(), GatewayError> {
        let challenge = s.pending_challenge.clone().expect("caller checked");
        let mut ledger = lock(&self.ledger);
        match authenticator::verify_answer(&challenge, text, &ledger) {
            Err(AuthError::LedgerMismatch { .. }) => {
                let flagged = inst.flag_fraud(ts)?;
                ledger.commit(vec![flagged])?;
                s.clear_challenge();
                out.send_to(&s.msisdn, FLAGGED);
            }
            Err(e) => return Err(e.into()),
            Ok(true) => {
                let mut next = inst.clone();
                let advance = next.advance(&s.user_id, text, ts)?;
                ledger.commit(advance.events)?;
                *inst = next;
                if let Some(c) = inst.pending_challenges().first().map(|c| (*c).clone()) {
                    out.send_to(&s.msisdn, c.question.clone());
                    s.pending_challenge = Some(c);
                    return Ok(());
                }
                let deferred = s.deferred_input.take();
                s.clear_challenge();
                drop(ledger);
                match deferred {
                    Some(input) => self.apply_verified(s, inst, profile, &input, ts, out)?,
                    None => out.send_to(&s.msisdn, RECEIVED),
                }
            }
            Ok(false) => {
                profile.record_invalid(ts, &self.config.policy.rate);
                let mut next = inst.clone();
                let escalation = authenticator::on_fail(
                    &mut next,
                    &mut ledger,
                    &s.user_id,
                    &s.used_sources,
                    s.round,
                    &self.config.policy,
                    ts,
                    || self.next_id("ch"),
                )?;
                *inst = next;
                match escalation {
                    Escalation::Retry(challenges) => {
                        s.round += 1;
                        s.used_sources.extend(challenges.iter().map(|c| c.source_event_id.clone()));
                        s.pending_challenge = challenges.first().cloned();
                        out.send_to(&s.msisdn, format!("{WRONG_ANSWER} {}", challenges[0].question));
                    }
                    Escalation::Fraud => {
                        s.clear_challenge();
                        out.send_to(&s.msisdn, FLAGGED);
                    }
                }
            }
        }
        Ok(())
    }

    /// Applies the input that was held back while challenges were answered.
    fn apply_verified(
        &self,
        s: &mut Session,
        inst: &mut WorkflowInstance,
        profile: &mut UserProfile,
        input: &str,
        ts: i64,
        out: &mut Outbox<'_>,
    ) -> Result<(), GatewayError> {
        let mut next = inst.clone();
        let advance = match next.advance(&s.user_id, input, ts) {
            Ok(a) => a,
            Err(e) => {
                out.send_to(&s.msisdn, format!("Invalid input: {e}"));
                return Ok(());
            }
        };
        let features = self.features(&next, profile, ts);
        lock(&self.ledger).commit(advance.events)?;
        *inst = next;
        risk::update_profile(profile, &features);
        let before = out.frames.len();
        out.deliver(advance.outbound);
        if !out.frames[before..].iter().any(|f| f.msisdn == s.msisdn) {
            out.send_to(&s.msisdn, RECEIVED);
        }
        Ok(())
    }

    fn show_menu(&self, s: &mut Session, out: &mut Outbox<'_>) -> Result<(), GatewayError> {
        let handle = self.assigned_instance(&s.user_id).and_then(|id| self.instance_handle(&id));
        let Some(handle) = handle else {
            out.send_to(&s.msisdn, NO_PENDING);
            return Ok(());
        };
        let inst = lock(&handle);
        self.sync_challenge(s, &inst);
        if let Some(c) = &s.pending_challenge {
            out.send_to(&s.msisdn, c.question.clone());
            return Ok(());
        }
        match inst.expected_action() {
            Ok(exp) if exp.actor_id == s.user_id => {
                let text = render_text(&exp.prompt, exp.step.step_type, s.mode)
                    .unwrap_or_else(|_| exp.prompt.clone());
                out.send_to(&s.msisdn, text);
            }
            _ => out.send_to(&s.msisdn, NO_PENDING),
        }
        Ok(())
    }

    fn admin_command(&self, s: &Session, text: &str, ts: i64, out: &mut Outbox<'_>) -> Result<(), GatewayError> {
        let mut words = text.split_whitespace();
        match (words.next().map(str::to_ascii_uppercase).as_deref(), words.next()) {
            (Some("RESET"), Some(id)) => match self.reset(id, &s.user_id, ts) {
                Ok(()) => out.send_to(&s.msisdn, format!("Reset {id}")),
                Err(e) => out.send_to(&s.msisdn, format!("Cannot reset {id}: {e}")),
            },
            _ => out.send_to(&s.msisdn, "Commands: RESET <instance>"),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapper::compile;

    const BUYER: &str = "+254700000001";
    const SELLER: &str = "+254700000002";
    const BANK: &str = "+254700000003";
    const ADMIN: &str = "+254700000009";

    fn directory() -> Directory {
        let e = |m: &str, u: &str, r: &str| UserEntry { msisdn: m.into(), user_id: u.into(), role: r.into() };
        Directory::new([
            e(BUYER, "buyer1", "buyer"),
            e(SELLER, "seller1", "seller"),
            e(BANK, "bank1", "intermediary"),
            e(ADMIN, "ops1", "admin"),
        ])
        .unwrap()
    }

    fn gateway(config: GatewayConfig) -> Gateway {
        let def = compile(include_str!("../../fixtures/order_financing.flow")).unwrap();
        Gateway::new(def, directory(), BTreeMap::new(), Ledger::in_memory(), config).unwrap()
    }

    fn send(gw: &Gateway, msisdn: &str, text: &str, ts: i64) -> Vec<SmsFrame> {
        gw.handle_frame(&SmsFrame::inbound(msisdn, text, ts)).unwrap()
    }

    fn names(gw: &Gateway) -> Vec<String> {
        gw.with_ledger(|l| l.events().iter().map(|e| e.event_name.clone()).collect())
    }

    #[test]
    fn unknown_msisdn_gets_reply_and_no_session() {
        let gw = gateway(GatewayConfig::default());
        let out = send(&gw, "+1555", "hello", 1);
        assert_eq!(out, vec![SmsFrame::outbound("+1555", UNKNOWN_USER, 1)]);
        assert!(gw.session_snapshot("+1555").is_none());
        assert!(matches!(gw.session_for("+1555"), Err(GatewayError::UnknownMsisdn(_))));
    }

    #[test]
    fn session_creation_is_idempotent() {
        let gw = gateway(GatewayConfig::default());
        let a = gw.session_for(BUYER).unwrap();
        let b = gw.session_for(BUYER).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(lock(&a).user_id, "buyer1");
    }

    #[test]
    fn happy_path_low_risk() {
        let gw = gateway(GatewayConfig::default());
        let t0 = 1_700_000_000;
        let out = send(&gw, SELLER, "@buyer1 Order No 2987 of 1000", t0);
        assert!(out.iter().any(|f| f.msisdn == BUYER && f.text == "Order No 2987 of 1000 confirmed"));
        assert!(out.iter().any(|f| f.msisdn == BUYER && f.text.starts_with("1. Pay 1050")));
        let out = send(&gw, BUYER, "1", t0 + 60);
        assert!(out.iter().any(|f| f.text == "Loan for Order No 2987 approved: Pay 1050 in 30 days"));
        assert_eq!(names(&gw), vec!["OrderConfirmation", "RequestForLoan"]);
        let id = gw.instance_of("buyer1").unwrap();
        assert_eq!(gw.instance_snapshot(&id).unwrap().status, InstanceStatus::Completed);
        assert!(gw.with_ledger(|l| l.verify_chain().ok));
    }

    #[test]
    fn wrong_sender_and_bad_input_are_invalid() {
        let gw = gateway(GatewayConfig::default());
        send(&gw, SELLER, "@buyer1 Order No 2987 of 1000", 100);
        assert_eq!(send(&gw, SELLER, "1", 101)[0].text, NOT_YOUR_TURN);
        assert!(send(&gw, BUYER, "9", 102)[0].text.starts_with("Invalid input"));
        assert_eq!(gw.profile_snapshot("buyer1").unwrap().invalid_window.len(), 1);
        assert_eq!(names(&gw), vec!["OrderConfirmation"]);
    }

    #[test]
    fn buyer_cannot_open_an_instance() {
        let gw = gateway(GatewayConfig::default());
        assert_eq!(send(&gw, BUYER, "1", 1)[0].text, NO_PENDING);
        assert!(names(&gw).is_empty());
    }

    #[test]
    fn malformed_first_message_opens_nothing() {
        let gw = gateway(GatewayConfig::default());
        assert!(send(&gw, SELLER, "hello there", 1)[0].text.starts_with("Invalid input"));
        assert!(gw.instance_of("seller1").is_none());
    }

    #[test]
    fn ussd_dial_renders_menu() {
        let gw = gateway(GatewayConfig::default());
        send(&gw, SELLER, "@buyer1 Order No 2987 of 1000", 100);
        let out = send(&gw, BUYER, "*384*1#", 101);
        assert_eq!(out[0].text, "1) Pay 1050 in 30 days\n2) Pay 1100 in 60 days\nReply with choice");
        assert_eq!(gw.session_snapshot(BUYER).unwrap().mode, Mode::Ussd);
    }

    #[test]
    fn forced_challenge_then_pass() {
        // theta pinned to zero: every transaction with material is challenged
        let policy = AuthPolicy { theta_max: 0.0, theta_min: 0.0, ..Default::default() };
        let gw = gateway(GatewayConfig { policy, ..Default::default() });
        // seller has no material, so the opening order is denied
        assert_eq!(send(&gw, SELLER, "@buyer1 Order No 1 of 10", 100)[0].text, DENIED);
        assert_eq!(names(&gw), vec!["TransactionFlagged"]);
        let id = gw.instance_of("seller1").unwrap();
        assert_eq!(send(&gw, BUYER, "1", 101)[0].text, BLOCKED);
        assert_eq!(send(&gw, ADMIN, &format!("RESET {id}"), 102)[0].text, format!("Reset {id}"));
        assert_eq!(gw.instance_snapshot(&id).unwrap().status, InstanceStatus::Active);
    }
}
