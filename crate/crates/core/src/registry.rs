//! Named strategy registries.
//!
//! Interchangeable algorithms (taggers, risk signals) are registered under a
//! short name and picked at runtime from configuration or CLI flags.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::mapper::{RuleTagger, Tagger};
use crate::risk::{BnSignal, RateParams, RateSignal, RiskEngine, RiskSignal};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown {kind} `{name}` (known: {})", known.join(", "))]
pub struct UnknownStrategy {
    pub kind: &'static str,
    pub name: String,
    pub known: Vec<String>,
}

type Factory<T> = Box<dyn Fn() -> Box<T> + Send + Sync>;

pub struct Registry<T: ?Sized> {
    kind: &'static str,
    factories: BTreeMap<String, Factory<T>>,
}

impl<T: ?Sized> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Self { kind, factories: BTreeMap::new() }
    }

    /// Registers `factory` under `name`, replacing any previous entry.
    pub fn register(&mut self, name: impl Into<String>, factory: impl Fn() -> Box<T> + Send + Sync + 'static) {
        self.factories.insert(name.into(), Box::new(factory));
    }

    pub fn create(&self, name: &str) -> Result<Box<T>, UnknownStrategy> {
        self.factories.get(name).map(|f| f()).ok_or_else(|| UnknownStrategy {
            kind: self.kind,
            name: name.to_string(),
            known: self.names(),
        })
    }

    pub fn names(&self) -> Vec<String> {
        self.factories.keys().cloned().collect()
    }
}

impl<T: ?Sized> fmt::Debug for Registry<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry").field("kind", &self.kind).field("names", &self.names()).finish()
    }
}

pub fn taggers() -> Registry<dyn Tagger> {
    let mut r: Registry<dyn Tagger> = Registry::new("tagger");
    r.register("rule", || Box::new(RuleTagger));
    r
}

pub fn risk_signals(rate: RateParams) -> Registry<dyn RiskSignal> {
    let mut r: Registry<dyn RiskSignal> = Registry::new("risk signal");
    r.register("bn", || Box::new(BnSignal));
    r.register("rate", move || Box::new(RateSignal(rate)));
    r
}

/// Builds an engine from a list of signal names, e.g. `["bn", "rate"]`.
pub fn risk_engine<S: AsRef<str>>(names: &[S], rate: RateParams) -> Result<RiskEngine, UnknownStrategy> {
    let registry = risk_signals(rate);
    let signals = names.iter().map(|n| registry.create(n.as_ref())).collect::<Result<_, _>>()?;
    Ok(RiskEngine::new(signals))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_resolve_by_name() {
        assert_eq!(taggers().create("rule").unwrap().name(), "rule");
        let engine = risk_engine(&["rate", "bn"], RateParams::default()).unwrap();
        assert_eq!(engine.signal_names(), vec!["rate", "bn"]);
    }

    #[test]
    fn unknown_name_lists_known() {
        let err = risk_engine(&["bn", "neural"], RateParams::default()).err().unwrap();
        assert_eq!(err.name, "neural");
        assert_eq!(err.known, vec!["bn", "rate"]);
        assert!(taggers().create("crf").is_err());
    }

    #[test]
    fn custom_registration_overrides() {
        struct Upper;
        impl Tagger for Upper {
            fn name(&self) -> &'static str {
                "upper"
            }
            fn tag(&self, message: &str) -> Vec<crate::mapper::TaggedToken> {
                crate::mapper::tokenize_and_tag(&message.to_uppercase())
            }
        }
        let mut r = taggers();
        r.register("upper", || Box::new(Upper));
        assert_eq!(r.names(), vec!["rule", "upper"]);
        assert_eq!(r.create("upper").unwrap().name(), "upper");
    }
}
