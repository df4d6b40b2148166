//! One-time compiler from SMS/USSD dialog scripts to workflow definitions and
//! fill-in-the-blank challenge templates.

mod script;
mod tagger;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use script::{default_event_name, parse_script, DialogScript, StepDecl, RESERVED_EVENT_NAMES};
pub use tagger::{tokenize_and_tag, RuleTagger, Tag, TaggedToken, Tagger};

use crate::workflow::{Step, StepType, WorkflowDefinition};

/// Marker that replaces the answer slot in a template pattern.
pub const BLANK: &str = "___";

/// Minimum similarity at which a step reuses an existing template.
pub const REUSE_THRESHOLD: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MapperError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("step `{step}` references unbound slot `{{{slot}}}`")]
    UnboundSlot { step: String, slot: String },
    #[error("step `{step}` has no blankable slot")]
    NoAnswerSlot { step: String },
    #[error("missing value for slot `{slot}`")]
    MissingSlotValue { slot: String },
    #[error("workflow file line {line}: {reason}")]
    Portable { line: usize, reason: String },
}

impl MapperError {
    pub(crate) fn parse(line: usize, reason: impl Into<String>) -> Self {
        MapperError::Parse { line, reason: reason.into() }
    }
}

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{([A-Za-z_][A-Za-z0-9_]*)\}").expect("placeholder regex"))
}

fn option_line_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(\d+)[.)]\s+(\S.*)$").expect("option line regex"))
}

fn confirm_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\bconfirm(ed)?\b").expect("confirm regex"))
}

fn prompt_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)\b(enter|reply with|send|how much|how many)\b").expect("prompt regex")
    })
}

/// Slot names in order of appearance (duplicates kept).
pub fn placeholders(text: &str) -> Vec<String> {
    placeholder_re().captures_iter(text).map(|c| c[1].to_string()).collect()
}

/// Substitutes bound `{slot}`s; unbound placeholders stay literal.
pub fn render_slots(text: &str, slots: &BTreeMap<String, String>) -> String {
    placeholder_re()
        .replace_all(text, |c: &regex::Captures<'_>| {
            slots.get(&c[1]).cloned().unwrap_or_else(|| c[0].to_string())
        })
        .into_owned()
}

/// `(index, text)` of every enumerated option line (`1. …`, `2) …`).
pub fn option_lines(text: &str) -> Vec<(u32, String)> {
    text.lines()
        .filter_map(|l| {
            let c = option_line_re().captures(l)?;
            Some((c[1].parse().ok()?, c[2].trim_end().to_string()))
        })
        .collect()
}

/// Where a message sits in the dialog.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DialogPosition {
    pub index: usize,
    pub from_system: bool,
}

/// Rule-table step classification; Notification is the fallback.
pub fn classify_step(message: &str, position: DialogPosition) -> StepType {
    if option_lines(message).len() >= 2 {
        StepType::OptionSelection
    } else if position.from_system && confirm_re().is_match(message) {
        StepType::Confirmation
    } else if prompt_re().is_match(message) || message.trim_end().ends_with('?') {
        StepType::ValueEntry
    } else {
        StepType::Notification
    }
}

/// Tags of each slot occurrence in `message`. Conventional slot names map to
/// their tag; other slots are probed in context and only keep an ORDER_NO or
/// DAYS reading.
pub fn slot_tags(message: &str, tagger: &dyn Tagger) -> Vec<(String, Tag)> {
    let names = placeholders(message);
    names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            if let Some(tag) = Tag::for_slot_name(name) {
                return (name.clone(), tag);
            }
            let (probed, offsets) = substitute_probes(message, |j| if i == j { "7" } else { "x" });
            let tag = tagger
                .tag(&probed)
                .into_iter()
                .find(|t| t.char_span.0 == offsets[i])
                .map(|t| t.tag)
                .filter(|t| matches!(t, Tag::OrderNo | Tag::Days))
                .unwrap_or(Tag::Word);
            (name.clone(), tag)
        })
        .collect()
}

fn substitute_probes<'a>(message: &str, probe: impl Fn(usize) -> &'a str) -> (String, Vec<usize>) {
    let mut out = String::new();
    let mut offsets = Vec::new();
    let mut last = 0;
    for (i, m) in placeholder_re().find_iter(message).enumerate() {
        out.push_str(&message[last..m.start()]);
        offsets.push(out.chars().count());
        out.push_str(probe(i));
        last = m.end();
    }
    out.push_str(&message[last..]);
    (out, offsets)
}

/// Tag sequence of a step message with slot tokens carrying their slot tag.
pub fn tag_sequence(message: &str, tagger: &dyn Tagger) -> Vec<Tag> {
    let tags = slot_tags(message, tagger);
    let (probed, offsets) = substitute_probes(message, |_| "0");
    tagger
        .tag(&probed)
        .into_iter()
        .map(|t| match offsets.iter().position(|&o| o == t.char_span.0) {
            Some(i) => tags[i].1,
            None => t.tag,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Edge {
    Start,
    Tag(Tag),
    End,
}

fn features(step: &Step, tagger: &dyn Tagger) -> BTreeMap<(StepType, Edge, Edge), usize> {
    let mut seq = vec![Edge::Start];
    seq.extend(tag_sequence(&step.message_template, tagger).into_iter().map(Edge::Tag));
    seq.push(Edge::End);
    let mut bag = BTreeMap::new();
    for w in seq.windows(2) {
        *bag.entry((step.step_type, w[0], w[1])).or_insert(0) += 1;
    }
    bag
}

/// Multiset Jaccard index over `(step type, tag bigram)` features.
pub fn step_similarity(a: &Step, b: &Step) -> f64 {
    step_similarity_with(a, b, &RuleTagger)
}

pub fn step_similarity_with(a: &Step, b: &Step, tagger: &dyn Tagger) -> f64 {
    let fa = features(a, tagger);
    let fb = features(b, tagger);
    let keys: BTreeSet<_> = fa.keys().chain(fb.keys()).collect();
    let (mut inter, mut union) = (0usize, 0usize);
    for k in keys {
        let (x, y) = (fa.get(k).copied().unwrap_or(0), fb.get(k).copied().unwrap_or(0));
        inter += x.min(y);
        union += x.max(y);
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// A question pattern with exactly one blanked slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChallengeTemplate {
    pub template_id: String,
    pub question_prefix: String,
    pub pattern: String,
    pub answer_tag: Tag,
    pub answer_slot: String,
    pub source_step_type: StepType,
    pub source_step_id: String,
}

impl ChallengeTemplate {
    fn question(&self, payload: &BTreeMap<String, String>) -> Result<String, MapperError> {
        if let Some(slot) = placeholders(&self.pattern).into_iter().find(|s| !payload.contains_key(s)) {
            return Err(MapperError::MissingSlotValue { slot });
        }
        let body = render_slots(&self.pattern, payload).lines().collect::<Vec<_>>().join(" ");
        Ok(if self.question_prefix.is_empty() {
            body
        } else {
            format!("{} {}", self.question_prefix, body)
        })
    }
}

fn question_prefix(step_type: StepType, tag: Tag) -> &'static str {
    match (step_type, tag) {
        (StepType::Confirmation, Tag::Amount) => "What was the amount of your last order:",
        (StepType::Confirmation, Tag::OrderNo) => "What was the number of your last order:",
        (StepType::Confirmation, Tag::Days) => "How many days did your last order run:",
        (StepType::Confirmation, Tag::Date) => "What was the date of your last order:",
        _ => "",
    }
}

const ANSWER_PRIORITY: [Tag; 4] = [Tag::Amount, Tag::Days, Tag::OrderNo, Tag::Date];

/// Templates for a definition plus which step uses which template.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TemplateSet {
    pub templates: Vec<ChallengeTemplate>,
    pub assignments: BTreeMap<String, String>,
    pub skipped: Vec<MapperError>,
}

fn answer_slot(step: &Step, tagger: &dyn Tagger) -> Option<(String, Tag)> {
    let tags = slot_tags(&step.message_template, tagger);
    let occurrences = |name: &str| tags.iter().filter(|(n, _)| n == name).count();
    ANSWER_PRIORITY.iter().find_map(|want| {
        tags.iter()
            .find(|(name, tag)| tag == want && occurrences(name) == 1)
            .cloned()
    })
}

fn blank_out(message: &str, slot: &str) -> String {
    message.replacen(&format!("{{{slot}}}"), BLANK, 1)
}

pub fn build_templates(definition: &WorkflowDefinition) -> TemplateSet {
    build_templates_with(definition, &RuleTagger)
}

/// One template per Confirmation / OptionSelection / ValueEntry step, reusing
/// an earlier template when the steps are similar enough.
pub fn build_templates_with(definition: &WorkflowDefinition, tagger: &dyn Tagger) -> TemplateSet {
    let mut set = TemplateSet::default();
    let eligible = definition.steps.iter().filter(|s| {
        matches!(s.step_type, StepType::Confirmation | StepType::OptionSelection | StepType::ValueEntry)
    });
    for step in eligible {
        let Some((slot, tag)) = answer_slot(step, tagger) else {
            set.skipped.push(MapperError::NoAnswerSlot { step: step.step_id.clone() });
            continue;
        };
        let slots = placeholders(&step.message_template);
        let reuse = set.templates.iter().find(|t| {
            let Some(source) = definition.step(&t.source_step_id) else { return false };
            slots.iter().filter(|s| **s == t.answer_slot).count() == 1
                && step_similarity_with(source, step, tagger) >= REUSE_THRESHOLD
        });
        let template_id = match reuse {
            Some(t) => t.template_id.clone(),
            None => {
                let template = ChallengeTemplate {
                    template_id: format!("tpl_{}", step.step_id),
                    question_prefix: question_prefix(step.step_type, tag).to_string(),
                    pattern: blank_out(&step.message_template, &slot),
                    answer_tag: tag,
                    answer_slot: slot,
                    source_step_type: step.step_type,
                    source_step_id: step.step_id.clone(),
                };
                let id = template.template_id.clone();
                set.templates.push(template);
                id
            }
        };
        set.assignments.insert(step.step_id.clone(), template_id);
    }
    set
}

/// Instantiates a template: `(question, plaintext answer)`.
pub fn render_challenge(
    template: &ChallengeTemplate,
    source_payload: &BTreeMap<String, String>,
) -> Result<(String, String), MapperError> {
    let question = template.question(source_payload)?;
    let answer = source_payload
        .get(&template.answer_slot)
        .cloned()
        .ok_or_else(|| MapperError::MissingSlotValue { slot: template.answer_slot.clone() })?;
    Ok((question, answer))
}

/// Question only; used with ledger payloads where the answer is stored hashed.
pub fn render_question(
    template: &ChallengeTemplate,
    payload: &BTreeMap<String, String>,
) -> Result<String, MapperError> {
    template.question(payload)
}

/// Slots a step binds from its own input rather than from earlier steps.
pub(crate) fn capturable(step_type: StepType, slot: &str) -> bool {
    matches!(step_type, StepType::Confirmation | StepType::ValueEntry)
        && Tag::for_slot_name(slot).is_some()
}

/// Slots that exist once `step` has been committed.
pub(crate) fn produced_slots(step: &Step) -> Vec<String> {
    let mut out = placeholders(&step.message_template);
    match step.step_type {
        StepType::OptionSelection => out.extend(["option".to_string(), "choice".to_string()]),
        StepType::ValueEntry => out.push("value".to_string()),
        _ => {}
    }
    out
}

fn check_slots(steps: &[Step]) -> Result<(), MapperError> {
    let mut produced = BTreeSet::new();
    for step in steps {
        for slot in placeholders(&step.message_template) {
            if !produced.contains(&slot) && !capturable(step.step_type, &slot) {
                return Err(MapperError::UnboundSlot { step: step.step_id.clone(), slot });
            }
        }
        produced.extend(produced_slots(step));
    }
    Ok(())
}

pub fn compile(script: &str) -> Result<WorkflowDefinition, MapperError> {
    compile_with(script, &RuleTagger)
}

/// Parses, slot-checks and attaches challenge templates.
pub fn compile_with(script: &str, tagger: &dyn Tagger) -> Result<WorkflowDefinition, MapperError> {
    let parsed = parse_script(script)?;
    let steps: Vec<Step> = parsed.steps.into_iter().map(|d| d.step).collect();
    check_slots(&steps)?;
    let mut definition = WorkflowDefinition {
        workflow_id: parsed.workflow_id,
        roles: parsed.roles,
        steps,
        templates: Vec::new(),
    };
    let mut set = build_templates_with(&definition, tagger);
    // A step only challenges on a value it introduced itself; a slot carried
    // over from an earlier step must stay readable in that step's payload.
    let mut produced = BTreeSet::new();
    for step in &mut definition.steps {
        step.template_ref = set.assignments.get(&step.step_id).cloned().filter(|t| {
            set.templates
                .iter()
                .any(|tpl| tpl.template_id == *t && !produced.contains(&tpl.answer_slot))
        });
        produced.extend(produced_slots(step));
    }
    let used: BTreeSet<&String> = definition.steps.iter().filter_map(|s| s.template_ref.as_ref()).collect();
    set.templates.retain(|t| used.contains(&t.template_id));
    definition.templates = set.templates;
    Ok(definition)
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "lowercase")]
enum PortableRecord {
    Workflow { workflow_id: String, roles: Vec<String> },
    Step(Step),
    Template(ChallengeTemplate),
}

/// Compiled workflow file: one JSON record per line.
pub fn to_portable(definition: &WorkflowDefinition) -> String {
    let mut lines = vec![PortableRecord::Workflow {
        workflow_id: definition.workflow_id.clone(),
        roles: definition.roles.iter().cloned().collect(),
    }];
    lines.extend(definition.steps.iter().cloned().map(PortableRecord::Step));
    lines.extend(definition.templates.iter().cloned().map(PortableRecord::Template));
    let mut out = String::new();
    for rec in &lines {
        out.push_str(&serde_json::to_string(rec).expect("portable records serialize"));
        out.push('\n');
    }
    out
}

pub fn from_portable(text: &str) -> Result<WorkflowDefinition, MapperError> {
    let mut header = None;
    let mut steps = Vec::new();
    let mut templates = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: PortableRecord = serde_json::from_str(line)
            .map_err(|e| MapperError::Portable { line: i + 1, reason: e.to_string() })?;
        match rec {
            PortableRecord::Workflow { workflow_id, roles } => {
                if header.replace((workflow_id, roles)).is_some() {
                    return Err(MapperError::Portable { line: i + 1, reason: "duplicate workflow record".into() });
                }
            }
            PortableRecord::Step(s) => steps.push(s),
            PortableRecord::Template(t) => templates.push(t),
        }
    }
    let (workflow_id, roles) = header
        .ok_or_else(|| MapperError::Portable { line: 1, reason: "missing workflow record".into() })?;
    let definition = WorkflowDefinition {
        workflow_id,
        roles: roles.into_iter().collect(),
        steps,
        templates,
    };
    definition
        .validate()
        .map_err(|e| MapperError::Portable { line: 0, reason: e.to_string() })?;
    Ok(definition)
}
