//! Deterministic rule-based token tagging for SMS text.

use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Tag {
    OrderNo,
    Amount,
    Days,
    Date,
    OptionIndex,
    Word,
}

impl Tag {
    pub fn as_str(&self) -> &'static str {
        match self {
            Tag::OrderNo => "ORDER_NO",
            Tag::Amount => "AMOUNT",
            Tag::Days => "DAYS",
            Tag::Date => "DATE",
            Tag::OptionIndex => "OPTION_INDEX",
            Tag::Word => "WORD",
        }
    }

    /// Tags whose values can be blanked out of a challenge.
    pub fn is_answerable(&self) -> bool {
        matches!(self, Tag::OrderNo | Tag::Amount | Tag::Days | Tag::Date)
    }

    /// Slot name conventionally carrying a value of this tag.
    pub fn slot_name(&self) -> Option<&'static str> {
        match self {
            Tag::OrderNo => Some("order_no"),
            Tag::Amount => Some("amount"),
            Tag::Days => Some("days"),
            Tag::Date => Some("date"),
            _ => None,
        }
    }

    pub fn for_slot_name(name: &str) -> Option<Tag> {
        match name {
            "order_no" => Some(Tag::OrderNo),
            "amount" => Some(Tag::Amount),
            "days" => Some(Tag::Days),
            "date" => Some(Tag::Date),
            _ => None,
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A token with its tag and `[start, end)` span in characters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedToken {
    pub text: String,
    pub tag: Tag,
    pub char_span: (usize, usize),
}

/// A message tagger. The rule tagger is the only built-in; others can be
/// registered through [`crate::registry::taggers`].
pub trait Tagger: Send + Sync {
    fn name(&self) -> &'static str;
    fn tag(&self, message: &str) -> Vec<TaggedToken>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct RuleTagger;

impl Tagger for RuleTagger {
    fn name(&self) -> &'static str {
        "rule"
    }

    fn tag(&self, message: &str) -> Vec<TaggedToken> {
        tokenize_and_tag(message)
    }
}

fn numeric_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^(?i:kes)?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?$").expect("numeric regex")
    })
}

fn date_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(?:\d{2}/\d{2}/\d{4}|\d{4}-\d{2}-\d{2})$").expect("date regex"))
}

fn option_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\d+[.)]$").expect("option regex"))
}

pub(crate) fn is_numeric(token: &str) -> bool {
    numeric_re().is_match(token)
}

const LEADING_PUNCT: &[char] = &['(', '"', '\''];
const TRAILING_PUNCT: &[char] = &['.', ',', ':', ';', '!', '?', ')', '"', '\''];

#[derive(Debug)]
struct Piece {
    text: String,
    start: usize,
    end: usize,
    punct: bool,
    option_index: bool,
}

fn split_pieces(message: &str) -> Vec<Piece> {
    let chars: Vec<char> = message.chars().collect();
    let mut pieces = Vec::new();
    let mut i = 0;
    let mut line_start = true;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            if chars[i] == '\n' {
                line_start = true;
            }
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        let chunk: String = chars[start..i].iter().collect();
        if line_start && option_re().is_match(&chunk) {
            pieces.push(Piece { text: chunk, start, end: i, punct: false, option_index: true });
            line_start = false;
            continue;
        }
        line_start = false;

        let lead = chunk.chars().take_while(|c| LEADING_PUNCT.contains(c)).count();
        let body: Vec<char> = chunk.chars().skip(lead).collect();
        let trail = body.iter().rev().take_while(|c| TRAILING_PUNCT.contains(c)).count();
        let trail = if trail == body.len() { 0 } else { trail };
        let core_len = body.len() - trail;

        let mut at = start;
        if lead > 0 && core_len > 0 {
            pieces.push(Piece {
                text: chars[at..at + lead].iter().collect(),
                start: at,
                end: at + lead,
                punct: true,
                option_index: false,
            });
            at += lead;
        } else if core_len == 0 {
            // chunk made of punctuation only
            pieces.push(Piece { text: chunk, start, end: i, punct: true, option_index: false });
            continue;
        }
        pieces.push(Piece {
            text: chars[at..at + core_len].iter().collect(),
            start: at,
            end: at + core_len,
            punct: false,
            option_index: false,
        });
        at += core_len;
        if trail > 0 {
            pieces.push(Piece {
                text: chars[at..i].iter().collect(),
                start: at,
                end: i,
                punct: true,
                option_index: false,
            });
        }
    }
    pieces
}

/// Splits `message` into tokens and tags each one.
///
/// Numeric tag priority: ORDER_NO (after "No"/"Number"/"#") > DAYS (before
/// "day"/"days") > DATE > AMOUNT. Trailing punctuation becomes its own WORD
/// token; a leading `N.`/`N)` on a line is an OPTION_INDEX.
pub fn tokenize_and_tag(message: &str) -> Vec<TaggedToken> {
    let pieces = split_pieces(message);
    let words: Vec<usize> = (0..pieces.len()).filter(|&i| !pieces[i].punct).collect();
    let mut out = Vec::with_capacity(pieces.len());
    for (idx, piece) in pieces.iter().enumerate() {
        let tag = if piece.punct {
            Tag::Word
        } else if piece.option_index {
            Tag::OptionIndex
        } else {
            let pos = words.iter().position(|&w| w == idx).expect("word index");
            let prev = pos.checked_sub(1).map(|p| pieces[words[p]].text.to_ascii_lowercase());
            let next = words.get(pos + 1).map(|&n| pieces[n].text.to_ascii_lowercase());
            classify(&piece.text, prev.as_deref(), next.as_deref())
        };
        out.push(TaggedToken {
            text: piece.text.clone(),
            tag,
            char_span: (piece.start, piece.end),
        });
    }
    out
}

fn classify(token: &str, prev: Option<&str>, next: Option<&str>) -> Tag {
    if let Some(rest) = token.strip_prefix('#') {
        if is_numeric(rest) {
            return Tag::OrderNo;
        }
    }
    let numeric = is_numeric(token);
    if numeric && matches!(prev, Some("no" | "number" | "#")) {
        return Tag::OrderNo;
    }
    if numeric && matches!(next, Some("day" | "days")) {
        return Tag::Days;
    }
    if date_re().is_match(token) {
        return Tag::Date;
    }
    if numeric {
        return Tag::Amount;
    }
    Tag::Word
}
