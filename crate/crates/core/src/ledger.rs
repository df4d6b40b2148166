//! Append-only, SHA-256 hash-chained event store.
//!
//! Every workflow action, issued challenge and fraud flag is sealed into a
//! [`LedgerEvent`] whose `this_hash` covers the previous event's hash and the
//! canonical serialization of its own fields. The store stands in for a
//! permissioned blockchain: endorsement is a role-membership check and commit
//! is a durable append to a newline-delimited file.
//!
//! ## Canonical serialization
//!
//! One `name=value` line per field, joined with `\n`, in this order:
//!
//! ```text
//! seq=<u64>
//! event_id=<str>
//! instance_id=<str>
//! event_name=<str>
//! actor_id=<str>
//! actor_role=<str>
//! timestamp=<i64>
//! payload.<key>=<value>      (zero or more, keys sorted)
//! answer_hash=<hex or empty>
//! status=<Pending|Completed|Flagged>
//! ```
//!
//! `this_hash = sha256_hex(prev_hash ++ body)` where `body` is the text above
//! with no trailing newline. A stored record appends `prev_hash=` and
//! `this_hash=` lines and is followed by a blank line.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::workflow::{self, WorkflowDefinition, WorkflowState};

/// `prev_hash` of the first event.
pub const GENESIS_HASH: &str = "0000000000000000000000000000000000000000000000000000000000000000";

const RECORD_SEPARATOR: &[u8] = b"\n\n";

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("endorsement rejected: role `{role}` is not an expected endorser")]
    EndorsementRejected { role: String },
    #[error("serialization invalid: {0}")]
    SerializationInvalid(String),
    #[error("unknown workflow instance `{0}`")]
    UnknownInstance(String),
    #[error("ledger file is corrupt at seq {seq}")]
    Corrupt { seq: u64 },
    #[error("inconsistent workflow history: {0}")]
    History(#[from] workflow::WorkflowError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: impl AsRef<[u8]>) -> String {
    hex::encode(Sha256::digest(bytes.as_ref()))
}

pub fn is_digest_hex(s: &str) -> bool {
    s.len() == 64 && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventStatus {
    Pending,
    Completed,
    Flagged,
}

impl EventStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventStatus::Pending => "Pending",
            EventStatus::Completed => "Completed",
            EventStatus::Flagged => "Flagged",
        }
    }
}

impl fmt::Display for EventStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventStatus {
    type Err = LedgerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Pending" => Ok(EventStatus::Pending),
            "Completed" => Ok(EventStatus::Completed),
            "Flagged" => Ok(EventStatus::Flagged),
            other => Err(LedgerError::SerializationInvalid(format!("unknown status `{other}`"))),
        }
    }
}

/// An event before sealing: everything except chain position and hashes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventDraft {
    pub event_id: String,
    pub instance_id: String,
    pub event_name: String,
    pub actor_id: String,
    pub actor_role: String,
    pub timestamp: i64,
    pub payload: BTreeMap<String, String>,
    pub answer_hash: Option<String>,
    pub status: EventStatus,
}

impl EventDraft {
    pub fn new(
        instance_id: impl Into<String>,
        event_name: impl Into<String>,
        actor_id: impl Into<String>,
        actor_role: impl Into<String>,
        timestamp: i64,
    ) -> Self {
        Self {
            event_id: String::new(),
            instance_id: instance_id.into(),
            event_name: event_name.into(),
            actor_id: actor_id.into(),
            actor_role: actor_role.into(),
            timestamp,
            payload: BTreeMap::new(),
            answer_hash: None,
            status: EventStatus::Completed,
        }
    }

    pub fn with_payload(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.payload.insert(key.into(), value.into());
        self
    }

    pub fn with_status(mut self, status: EventStatus) -> Self {
        self.status = status;
        self
    }

    pub fn with_answer_hash(mut self, hash: impl Into<String>) -> Self {
        self.answer_hash = Some(hash.into());
        self
    }

    pub fn with_event_id(mut self, id: impl Into<String>) -> Self {
        self.event_id = id.into();
        self
    }

    fn validate(&self) -> Result<(), LedgerError> {
        let scalar = [
            ("event_id", &self.event_id),
            ("instance_id", &self.instance_id),
            ("event_name", &self.event_name),
            ("actor_id", &self.actor_id),
            ("actor_role", &self.actor_role),
        ];
        for (name, value) in scalar {
            if value.is_empty() {
                return Err(LedgerError::SerializationInvalid(format!("{name} is empty")));
            }
            check_value(name, value)?;
        }
        for (key, value) in &self.payload {
            if key.is_empty() || key.contains(['=', '\n', '\r']) {
                return Err(LedgerError::SerializationInvalid(format!(
                    "payload key {key:?} contains a reserved delimiter"
                )));
            }
            check_value(key, value)?;
        }
        if let Some(hash) = &self.answer_hash {
            if !is_digest_hex(hash) {
                return Err(LedgerError::SerializationInvalid(
                    "answer_hash must be 64 lowercase hex characters".into(),
                ));
            }
        }
        Ok(())
    }
}

fn check_value(name: &str, value: &str) -> Result<(), LedgerError> {
    if value.contains(['\n', '\r']) {
        return Err(LedgerError::SerializationInvalid(format!(
            "{name} contains a line break"
        )));
    }
    Ok(())
}

/// One sealed, hash-chained ledger entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEvent {
    pub seq: u64,
    pub event_id: String,
    pub instance_id: String,
    pub event_name: String,
    pub actor_id: String,
    pub actor_role: String,
    pub timestamp: i64,
    pub payload: BTreeMap<String, String>,
    pub answer_hash: Option<String>,
    pub status: EventStatus,
    pub prev_hash: String,
    pub this_hash: String,
}

impl LedgerEvent {
    fn seal(seq: u64, draft: EventDraft, prev_hash: &str) -> Self {
        let mut event = LedgerEvent {
            seq,
            event_id: draft.event_id,
            instance_id: draft.instance_id,
            event_name: draft.event_name,
            actor_id: draft.actor_id,
            actor_role: draft.actor_role,
            timestamp: draft.timestamp,
            payload: draft.payload,
            answer_hash: draft.answer_hash,
            status: draft.status,
            prev_hash: prev_hash.to_string(),
            this_hash: String::new(),
        };
        event.this_hash = event.compute_hash();
        event
    }

    /// Canonical body covered by `this_hash` (everything but the two hashes).
    pub fn canonical_body(&self) -> String {
        let mut lines = vec![
            format!("seq={}", self.seq),
            format!("event_id={}", self.event_id),
            format!("instance_id={}", self.instance_id),
            format!("event_name={}", self.event_name),
            format!("actor_id={}", self.actor_id),
            format!("actor_role={}", self.actor_role),
            format!("timestamp={}", self.timestamp),
        ];
        lines.extend(self.payload.iter().map(|(k, v)| format!("payload.{k}={v}")));
        lines.push(format!("answer_hash={}", self.answer_hash.as_deref().unwrap_or("")));
        lines.push(format!("status={}", self.status));
        lines.join("\n")
    }

    pub fn compute_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.prev_hash.as_bytes());
        hasher.update(self.canonical_body().as_bytes());
        hex::encode(hasher.finalize())
    }

    /// Stored form: canonical body plus the two hash lines.
    pub fn to_record(&self) -> String {
        format!(
            "{}\nprev_hash={}\nthis_hash={}",
            self.canonical_body(),
            self.prev_hash,
            self.this_hash
        )
    }

    /// Strict parser: the record must re-serialize to exactly the same text.
    pub fn from_record(text: &str) -> Result<Self, LedgerError> {
        let bad = |why: String| LedgerError::SerializationInvalid(why);
        let lines: Vec<&str> = text.split('\n').collect();
        let mut pos = 0;
        let mut field = |name: &str| -> Result<String, LedgerError> {
            let value = lines
                .get(pos)
                .and_then(|l| l.strip_prefix(name))
                .and_then(|r| r.strip_prefix('='))
                .map(str::to_string)
                .ok_or_else(|| LedgerError::SerializationInvalid(format!("expected `{name}=`")))?;
            pos += 1;
            Ok(value)
        };
        let seq = field("seq")?.parse::<u64>().map_err(|_| bad("seq is not an integer".into()))?;
        let event_id = field("event_id")?;
        let instance_id = field("instance_id")?;
        let event_name = field("event_name")?;
        let actor_id = field("actor_id")?;
        let actor_role = field("actor_role")?;
        let timestamp = field("timestamp")?
            .parse::<i64>()
            .map_err(|_| bad("timestamp is not an integer".into()))?;

        let mut payload = BTreeMap::new();
        let mut next = 7;
        while let Some(entry) = lines.get(next).and_then(|l| l.strip_prefix("payload.")) {
            let (k, v) = entry
                .split_once('=')
                .ok_or_else(|| bad("payload line without `=`".into()))?;
            payload.insert(k.to_string(), v.to_string());
            next += 1;
        }
        let mut field = |name: &str| -> Result<String, LedgerError> {
            let value = lines
                .get(next)
                .and_then(|l| l.strip_prefix(name))
                .and_then(|r| r.strip_prefix('='))
                .map(str::to_string)
                .ok_or_else(|| LedgerError::SerializationInvalid(format!("expected `{name}=`")))?;
            next += 1;
            Ok(value)
        };
        let answer_hash = field("answer_hash")?;
        let status: EventStatus = field("status")?.parse()?;
        let prev_hash = field("prev_hash")?;
        let this_hash = field("this_hash")?;

        let event = LedgerEvent {
            seq,
            event_id,
            instance_id,
            event_name,
            actor_id,
            actor_role,
            timestamp,
            payload,
            answer_hash: (!answer_hash.is_empty()).then_some(answer_hash),
            status,
            prev_hash,
            this_hash,
        };
        if event.to_record() != text {
            return Err(bad("record is not in canonical form".into()));
        }
        Ok(event)
    }
}

/// Outcome of a chain verification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ChainReport {
    pub ok: bool,
    pub first_bad_seq: Option<u64>,
    pub length: u64,
}

impl ChainReport {
    fn good(length: u64) -> Self {
        Self { ok: true, first_bad_seq: None, length }
    }

    fn bad(seq: u64, length: u64) -> Self {
        Self { ok: false, first_bad_seq: Some(seq), length }
    }
}

/// Query over stored events. `None` fields match anything.
#[derive(Debug, Clone, Default)]
pub struct EventFilter {
    pub actor_id: Option<String>,
    pub event_name: Option<String>,
    pub status: Option<EventStatus>,
    pub instance_id: Option<String>,
    pub limit: Option<usize>,
    pub newest_first: bool,
}

impl EventFilter {
    pub fn instance(id: impl Into<String>) -> Self {
        Self { instance_id: Some(id.into()), ..Default::default() }
    }

    fn matches(&self, e: &LedgerEvent) -> bool {
        self.actor_id.as_ref().is_none_or(|a| *a == e.actor_id)
            && self.event_name.as_ref().is_none_or(|n| *n == e.event_name)
            && self.status.is_none_or(|s| s == e.status)
            && self.instance_id.as_ref().is_none_or(|i| *i == e.instance_id)
    }
}

/// Hash-chained event store with an optional file sink.
#[derive(Debug, Default)]
pub struct Ledger {
    events: Vec<LedgerEvent>,
    sink: Option<BufWriter<File>>,
    path: Option<PathBuf>,
}

impl Ledger {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Loads `path` (creating it if absent) and appends further events to it.
    /// A file that fails verification is refused.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, LedgerError> {
        let path = path.as_ref();
        let bytes = match std::fs::read(path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(e.into()),
        };
        let events = match parse_chain(&bytes) {
            Ok(events) => events,
            Err(seq) => return Err(LedgerError::Corrupt { seq }),
        };
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { events, sink: Some(BufWriter::new(file)), path: Some(path.to_path_buf()) })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn events(&self) -> &[LedgerEvent] {
        &self.events
    }

    pub fn head_hash(&self) -> &str {
        self.events.last().map_or(GENESIS_HASH, |e| e.this_hash.as_str())
    }

    /// Seals `draft` onto the chain after the simulated endorsement check.
    pub fn append<S: AsRef<str>>(
        &mut self,
        draft: EventDraft,
        expected_endorsers: &[S],
    ) -> Result<LedgerEvent, LedgerError> {
        if !expected_endorsers.iter().any(|r| r.as_ref() == draft.actor_role) {
            return Err(LedgerError::EndorsementRejected { role: draft.actor_role });
        }
        let mut draft = draft;
        if draft.event_id.is_empty() {
            draft.event_id = format!("evt-{:06}", self.events.len());
        }
        draft.validate()?;
        let event = LedgerEvent::seal(self.events.len() as u64, draft, self.head_hash());
        if let Some(sink) = self.sink.as_mut() {
            sink.write_all(event.to_record().as_bytes())?;
            sink.write_all(RECORD_SEPARATOR)?;
            sink.flush()?;
        }
        self.events.push(event.clone());
        Ok(event)
    }

    /// Appends workflow-emitted drafts in order, each with its own endorsers.
    pub fn commit(&mut self, emitted: Vec<workflow::Emitted>) -> Result<Vec<LedgerEvent>, LedgerError> {
        emitted
            .into_iter()
            .map(|e| self.append(e.draft, &e.endorsers))
            .collect()
    }

    pub fn flush(&mut self) -> Result<(), LedgerError> {
        if let Some(sink) = self.sink.as_mut() {
            sink.flush()?;
            sink.get_ref().sync_data()?;
        }
        Ok(())
    }

    pub fn verify_chain(&self) -> ChainReport {
        verify_events(&self.events)
    }

    /// Serialized form, identical to what the file sink writes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for e in &self.events {
            out.extend_from_slice(e.to_record().as_bytes());
            out.extend_from_slice(RECORD_SEPARATOR);
        }
        out
    }

    pub fn query_events(&self, filter: &EventFilter) -> Vec<LedgerEvent> {
        let limit = filter.limit.unwrap_or(usize::MAX);
        let matching = self.events.iter().filter(|e| filter.matches(e));
        if filter.newest_first {
            matching.rev().take(limit).cloned().collect()
        } else {
            matching.take(limit).cloned().collect()
        }
    }

    /// Up to `k` most recent completed events of `actor_id`, newest first.
    pub fn last_completed(&self, actor_id: &str, k: usize) -> Vec<LedgerEvent> {
        self.query_events(&EventFilter {
            actor_id: Some(actor_id.to_string()),
            status: Some(EventStatus::Completed),
            limit: Some(k),
            newest_first: true,
            ..Default::default()
        })
    }

    /// Reconstructs an instance's state by folding its events in seq order.
    pub fn workflow_state(
        &self,
        instance_id: &str,
        definition: &WorkflowDefinition,
    ) -> Result<WorkflowState, LedgerError> {
        let events = self.query_events(&EventFilter::instance(instance_id));
        if events.is_empty() {
            return Err(LedgerError::UnknownInstance(instance_id.to_string()));
        }
        Ok(workflow::replay_state(definition, &events)?)
    }
}

fn verify_events(events: &[LedgerEvent]) -> ChainReport {
    let length = events.len() as u64;
    let mut prev = GENESIS_HASH;
    for (i, e) in events.iter().enumerate() {
        let i = i as u64;
        if e.seq != i || e.prev_hash != prev || e.this_hash != e.compute_hash() {
            return ChainReport::bad(i, length);
        }
        prev = &e.this_hash;
    }
    ChainReport::good(length)
}

fn split_records(bytes: &[u8]) -> Vec<&[u8]> {
    let mut out = Vec::new();
    let mut rest = bytes;
    while !rest.is_empty() {
        match rest.windows(2).position(|w| w == RECORD_SEPARATOR) {
            Some(pos) => {
                out.push(&rest[..pos]);
                rest = &rest[pos + 2..];
            }
            None => {
                // unterminated tail is itself a malformed record
                out.push(rest);
                break;
            }
        }
    }
    out
}

/// Parses a ledger file; on failure returns the index of the first bad record.
fn parse_chain(bytes: &[u8]) -> Result<Vec<LedgerEvent>, u64> {
    let records = split_records(bytes);
    let mut events = Vec::with_capacity(records.len());
    for (i, raw) in records.iter().enumerate() {
        let parsed = std::str::from_utf8(raw)
            .ok()
            .and_then(|text| LedgerEvent::from_record(text).ok());
        match parsed {
            Some(e) => events.push(e),
            None => return Err(i as u64),
        }
    }
    if let Some(seq) = verify_events(&events).first_bad_seq {
        return Err(seq);
    }
    if !bytes.is_empty() && !bytes.ends_with(RECORD_SEPARATOR) {
        return Err(records.len() as u64 - 1);
    }
    Ok(events)
}

/// Verifies serialized ledger bytes (the file format) without loading a store.
pub fn verify_bytes(bytes: &[u8]) -> ChainReport {
    let length = split_records(bytes).len() as u64;
    match parse_chain(bytes) {
        Ok(events) => ChainReport::good(events.len() as u64),
        Err(seq) => ChainReport::bad(seq, length),
    }
}

pub fn verify_file(path: impl AsRef<Path>) -> Result<ChainReport, LedgerError> {
    Ok(verify_bytes(&std::fs::read(path)?))
}

/// Distinct roles, for callers building endorser sets.
pub fn endorsers<I, S>(roles: I) -> Vec<String>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    roles.into_iter().map(Into::into).collect::<BTreeSet<_>>().into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn order(ts: i64) -> EventDraft {
        EventDraft::new("wf-1", "OrderConfirmation", "buyer-1", "buyer", ts)
            .with_event_id(format!("evt-{ts}"))
            .with_payload("order_no", "2987")
            .with_payload("amount", "1000")
    }

    #[test]
    fn genesis_event() {
        let mut l = Ledger::in_memory();
        let e = l.append(order(1), &["buyer"]).unwrap();
        assert_eq!(e.seq, 0);
        assert_eq!(e.prev_hash, GENESIS_HASH);
        assert_eq!(e.prev_hash.len(), 64);
    }

    #[test]
    fn endorsement_is_role_membership() {
        let mut l = Ledger::in_memory();
        let err = l.append(order(1), &["seller"]).unwrap_err();
        assert!(matches!(err, LedgerError::EndorsementRejected { role } if role == "buyer"));
        assert!(l.is_empty());
    }

    #[test]
    fn reserved_delimiters_rejected() {
        let mut l = Ledger::in_memory();
        let d = order(1).with_payload("bad=key", "x");
        assert!(matches!(l.append(d, &["buyer"]), Err(LedgerError::SerializationInvalid(_))));
        let d = order(1).with_payload("note", "two\nlines");
        assert!(matches!(l.append(d, &["buyer"]), Err(LedgerError::SerializationInvalid(_))));
        let d = order(1).with_answer_hash("ABC");
        assert!(matches!(l.append(d, &["buyer"]), Err(LedgerError::SerializationInvalid(_))));
    }

    #[test]
    fn empty_store_verifies() {
        let r = Ledger::in_memory().verify_chain();
        assert_eq!(r, ChainReport { ok: true, first_bad_seq: None, length: 0 });
        assert_eq!(verify_bytes(b""), r);
    }

    #[test]
    fn record_roundtrip_is_strict() {
        let mut l = Ledger::in_memory();
        let e = l.append(order(5), &["buyer"]).unwrap();
        let rec = e.to_record();
        assert_eq!(LedgerEvent::from_record(&rec).unwrap(), e);
        let padded = rec.replace("seq=0", "seq=00");
        assert!(LedgerEvent::from_record(&padded).is_err());
    }

    #[test]
    fn payload_byte_mutation_detected_at_its_seq() {
        let mut l = Ledger::in_memory();
        for ts in 0..5 {
            l.append(order(ts), &["buyer"]).unwrap();
        }
        assert!(l.verify_chain().ok);
        let text = String::from_utf8(l.to_bytes()).unwrap();
        let records: Vec<&str> = text.split("\n\n").collect();
        let tampered: String = records
            .iter()
            .enumerate()
            .map(|(i, r)| if i == 2 { r.replace("amount=1000", "amount=1001") } else { r.to_string() })
            .collect::<Vec<_>>()
            .join("\n\n");
        let r = verify_bytes(tampered.as_bytes());
        assert!(!r.ok);
        assert_eq!(r.first_bad_seq, Some(2));
    }

    #[test]
    fn query_filters_and_limits() {
        let mut l = Ledger::in_memory();
        for ts in 0..3 {
            l.append(order(ts), &["buyer"]).unwrap();
        }
        for ts in 3..5 {
            l.append(order(ts).with_status(EventStatus::Pending), &["buyer"]).unwrap();
        }
        let completed = l.query_events(&EventFilter {
            status: Some(EventStatus::Completed),
            ..Default::default()
        });
        assert_eq!(completed.iter().map(|e| e.seq).collect::<Vec<_>>(), vec![0, 1, 2]);
        let none = l.query_events(&EventFilter { limit: Some(0), ..Default::default() });
        assert!(none.is_empty());
        let newest = l.query_events(&EventFilter { newest_first: true, limit: Some(2), ..Default::default() });
        assert_eq!(newest.iter().map(|e| e.seq).collect::<Vec<_>>(), vec![4, 3]);
    }

    #[test]
    fn last_completed_bounds() {
        let mut l = Ledger::in_memory();
        for ts in 0..5 {
            l.append(order(ts * 100), &["buyer"]).unwrap();
        }
        let last = l.last_completed("buyer-1", 3);
        assert_eq!(last.iter().map(|e| e.timestamp).collect::<Vec<_>>(), vec![400, 300, 200]);
        assert!(l.last_completed("nobody", 3).is_empty());
    }

    #[test]
    fn file_sink_reloads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger.log");
        {
            let mut l = Ledger::open(&path).unwrap();
            l.append(order(1), &["buyer"]).unwrap();
            l.append(order(2), &["buyer"]).unwrap();
        }
        let l = Ledger::open(&path).unwrap();
        assert_eq!(l.len(), 2);
        assert!(verify_file(&path).unwrap().ok);
        assert_eq!(std::fs::read(&path).unwrap(), l.to_bytes());
    }

    #[test]
    fn corrupt_file_refused() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger.log");
        {
            let mut l = Ledger::open(&path).unwrap();
            l.append(order(1), &["buyer"]).unwrap();
        }
        let text = std::fs::read_to_string(&path).unwrap().replace("2987", "2988");
        std::fs::write(&path, text).unwrap();
        assert!(matches!(Ledger::open(&path), Err(LedgerError::Corrupt { seq: 0 })));
    }
}
