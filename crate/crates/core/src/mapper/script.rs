//! Line-oriented dialog script parser.
//!
//! ```text
//! workflow <id>
//! role <name>
//! step <id> [type=<StepType>] actor=<role> [reply=<role>] [expects=<digit|int|text>]
//!      [event=<EventName>] text="<message with {slots}>"
//! ```
//!
//! `#` starts a comment outside quotes. Inside `text="…"` the escapes `\n`,
//! `\"` and `\\` are recognised. `type` may be omitted, in which case the step
//! is classified from its text.

use std::collections::BTreeSet;

use super::{classify_step, DialogPosition, MapperError};
use crate::workflow::{InputPattern, Step, StepType};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepDecl {
    pub line: usize,
    pub step: Step,
}

/// Parsed but not yet slot-checked script.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DialogScript {
    pub workflow_id: String,
    pub roles: BTreeSet<String>,
    pub steps: Vec<StepDecl>,
}

/// Event names the engine writes itself; scripts may not reuse them.
pub const RESERVED_EVENT_NAMES: &[&str] = &[
    crate::workflow::AUGMENTED_AUTHENTICATION,
    crate::workflow::CHALLENGE_ISSUED,
    crate::workflow::CHALLENGE_FAILED,
    crate::workflow::TRANSACTION_FLAGGED,
    crate::workflow::FRAUD_RESET,
];

fn lex(line: &str, lineno: usize) -> Result<Vec<String>, MapperError> {
    let mut words = Vec::new();
    let mut cur = String::new();
    let mut in_quotes = false;
    let mut chars = line.chars();
    while let Some(c) = chars.next() {
        if in_quotes {
            match c {
                '"' => in_quotes = false,
                '\\' => match chars.next() {
                    Some('n') => cur.push('\n'),
                    Some('"') => cur.push('"'),
                    Some('\\') => cur.push('\\'),
                    other => {
                        return Err(MapperError::parse(
                            lineno,
                            format!("unknown escape `\\{}`", other.map(String::from).unwrap_or_default()),
                        ))
                    }
                },
                _ => cur.push(c),
            }
            continue;
        }
        match c {
            '"' => in_quotes = true,
            '#' => break,
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    words.push(std::mem::take(&mut cur));
                }
            }
            _ => cur.push(c),
        }
    }
    if in_quotes {
        return Err(MapperError::parse(lineno, "unterminated quote"));
    }
    if !cur.is_empty() {
        words.push(cur);
    }
    Ok(words)
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

/// `confirm_order` → `ConfirmOrder`.
pub fn default_event_name(step_id: &str) -> String {
    step_id
        .split(['_', '-'])
        .filter(|p| !p.is_empty())
        .map(|p| {
            let mut c = p.chars();
            match c.next() {
                Some(f) => f.to_ascii_uppercase().to_string() + c.as_str(),
                None => String::new(),
            }
        })
        .collect()
}

pub fn parse_script(source: &str) -> Result<DialogScript, MapperError> {
    let mut workflow_id: Option<String> = None;
    let mut roles = BTreeSet::new();
    let mut steps: Vec<StepDecl> = Vec::new();
    let mut seen_ids = BTreeSet::new();

    for (idx, raw) in source.lines().enumerate() {
        let lineno = idx + 1;
        let words = lex(raw, lineno)?;
        let Some((head, rest)) = words.split_first() else { continue };
        match head.as_str() {
            "workflow" => {
                if workflow_id.is_some() {
                    return Err(MapperError::parse(lineno, "duplicate `workflow` declaration"));
                }
                match rest {
                    [id] if is_ident(id) => workflow_id = Some(id.clone()),
                    _ => return Err(MapperError::parse(lineno, "expected `workflow <id>`")),
                }
            }
            "role" => match rest {
                [name] if is_ident(name) => {
                    if !roles.insert(name.clone()) {
                        return Err(MapperError::parse(lineno, format!("duplicate role `{name}`")));
                    }
                }
                _ => return Err(MapperError::parse(lineno, "expected `role <name>`")),
            },
            "step" => {
                if workflow_id.is_none() {
                    return Err(MapperError::parse(lineno, "`step` before `workflow`"));
                }
                let step = parse_step(rest, lineno, &roles, steps.len())?;
                if !seen_ids.insert(step.step_id.clone()) {
                    return Err(MapperError::parse(
                        lineno,
                        format!("duplicate step id `{}`", step.step_id),
                    ));
                }
                steps.push(StepDecl { line: lineno, step });
            }
            other => return Err(MapperError::parse(lineno, format!("unknown directive `{other}`"))),
        }
    }

    let workflow_id =
        workflow_id.ok_or_else(|| MapperError::parse(1, "missing `workflow <id>` declaration"))?;
    if steps.is_empty() {
        return Err(MapperError::parse(source.lines().count().max(1), "script declares no steps"));
    }
    Ok(DialogScript { workflow_id, roles, steps })
}

fn parse_step(
    words: &[String],
    lineno: usize,
    roles: &BTreeSet<String>,
    position: usize,
) -> Result<Step, MapperError> {
    let (id, attrs) = words
        .split_first()
        .ok_or_else(|| MapperError::parse(lineno, "expected `step <id> …`"))?;
    if !is_ident(id) || id.contains('=') {
        return Err(MapperError::parse(lineno, format!("invalid step id `{id}`")));
    }

    let mut step_type = None;
    let mut actor = None;
    let mut reply = None;
    let mut expects = None;
    let mut event = None;
    let mut text = None;
    for attr in attrs {
        let (key, value) = attr
            .split_once('=')
            .ok_or_else(|| MapperError::parse(lineno, format!("expected key=value, got `{attr}`")))?;
        let slot = match key {
            "type" => &mut step_type,
            "actor" => &mut actor,
            "reply" => &mut reply,
            "expects" => &mut expects,
            "event" => &mut event,
            "text" => &mut text,
            other => return Err(MapperError::parse(lineno, format!("unknown attribute `{other}`"))),
        };
        if slot.replace(value.to_string()).is_some() {
            return Err(MapperError::parse(lineno, format!("attribute `{key}` given twice")));
        }
    }

    let check_role = |r: &str| -> Result<String, MapperError> {
        if roles.contains(r) {
            Ok(r.to_string())
        } else {
            Err(MapperError::parse(lineno, format!("undeclared role `{r}`")))
        }
    };
    let actor_role = check_role(
        &actor.ok_or_else(|| MapperError::parse(lineno, "step is missing `actor=`"))?,
    )?;
    let reply_role = reply.as_deref().map(check_role).transpose()?;
    let message = text.ok_or_else(|| MapperError::parse(lineno, "step is missing `text=`"))?;
    if message.trim().is_empty() {
        return Err(MapperError::parse(lineno, "step text is empty"));
    }
    let expects = expects
        .map(|e| {
            e.parse::<InputPattern>()
                .map_err(|_| MapperError::parse(lineno, format!("unknown expects pattern `{e}`")))
        })
        .transpose()?;
    let step_type = match step_type {
        Some(t) => match t.parse::<StepType>() {
            Ok(StepType::Challenge) | Err(_) => {
                return Err(MapperError::parse(lineno, format!("invalid step type `{t}`")))
            }
            Ok(t) => t,
        },
        None => classify_step(&message, DialogPosition { index: position, from_system: true }),
    };
    if matches!(step_type, StepType::OptionSelection | StepType::ValueEntry)
        && (reply_role.is_none() || expects.is_none())
    {
        return Err(MapperError::parse(
            lineno,
            format!("{step_type} step needs both `reply=` and `expects=`"),
        ));
    }
    let event_name = event.unwrap_or_else(|| default_event_name(id));
    if !is_ident(&event_name) || RESERVED_EVENT_NAMES.contains(&event_name.as_str()) {
        return Err(MapperError::parse(lineno, format!("invalid event name `{event_name}`")));
    }

    Ok(Step {
        step_id: id.clone(),
        step_type,
        actor_role,
        reply_role,
        message_template: message,
        expects,
        template_ref: None,
        event_name,
        challenge: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexer_handles_quotes_and_comments() {
        let w = lex(r#"step a text="x # y \"q\"\n2" # trailing"#, 1).unwrap();
        assert_eq!(w, vec!["step", "a", "text=x # y \"q\"\n2"]);
        assert!(lex(r#"text="open"#, 3).is_err());
    }

    #[test]
    fn event_name_defaults_to_pascal_case() {
        assert_eq!(default_event_name("confirm_order"), "ConfirmOrder");
        assert_eq!(default_event_name("loan-offer"), "LoanOffer");
    }

    #[test]
    fn duplicate_step_reports_line() {
        let src = "workflow w\nrole r\nstep a actor=r text=\"hi\"\n\nstep a actor=r text=\"again\"\n";
        match parse_script(src) {
            Err(MapperError::Parse { line, reason }) => {
                assert_eq!(line, 5);
                assert!(reason.contains("duplicate step id"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn option_selection_needs_reply_and_expects() {
        let src = "workflow w\nrole r\nstep a type=OptionSelection actor=r text=\"1. x\\n2. y\"\n";
        assert!(matches!(parse_script(src), Err(MapperError::Parse { line: 3, .. })));
    }

    #[test]
    fn type_inferred_when_omitted() {
        let src = "workflow w\nrole r\nstep a actor=r text=\"Welcome to the service\"\n";
        let s = parse_script(src).unwrap();
        assert_eq!(s.steps[0].step.step_type, StepType::Notification);
    }

    #[test]
    fn reserved_event_names_rejected() {
        let src = "workflow w\nrole r\nstep a actor=r event=AugmentedAuthentication text=\"x\"\n";
        assert!(parse_script(src).is_err());
    }
}
