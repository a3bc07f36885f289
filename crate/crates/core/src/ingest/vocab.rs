use std::collections::BTreeMap;
use std::path::Path;

use crate::config::{ConfigError, ConfigFile};

use super::record::Token;

pub const DEFAULT_TICKET_TYPES: &[&str] = &["ONE_WAY", "ROUND_TRIP", "ONE_TIME_ONE_WAY", "SUBSCRIPTION"];
pub const DEFAULT_BENEFIT_TYPES: &[&str] = &["FEDERAL", "REGIONAL", "RZD", "STUDENT", "MILITARY"];

/// Accepted ticket and benefit tokens. Lookups hand back shared tokens so
/// parsed records do not allocate per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    ticket_types: BTreeMap<String, Token>,
    benefit_types: BTreeMap<String, Token>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Vocabulary::new(DEFAULT_TICKET_TYPES, DEFAULT_BENEFIT_TYPES)
    }
}

impl Vocabulary {
    pub fn new<S: AsRef<str>>(ticket_types: &[S], benefit_types: &[S]) -> Self {
        let intern = |items: &[S]| {
            items
                .iter()
                .map(|s| (s.as_ref().to_string(), Token::new(s.as_ref())))
                .collect()
        };
        Vocabulary {
            ticket_types: intern(ticket_types),
            benefit_types: intern(benefit_types),
        }
    }

    /// Reads `ticket_types = A, B` and `benefit_types = X, Y`; a missing key
    /// keeps the built-in list.
    pub fn from_config(cfg: &ConfigFile) -> Result<Self, ConfigError> {
        let root = cfg.root();
        root.check_keys(&["ticket_types", "benefit_types"])?;
        let mut vocab = Vocabulary::default();
        for (key, slot) in [
            ("ticket_types", &mut vocab.ticket_types),
            ("benefit_types", &mut vocab.benefit_types),
        ] {
            if let Some(items) = root.list(key) {
                if items.is_empty() {
                    return Err(root.invalid(key, "", "empty token list"));
                }
                if let Some(bad) = items.iter().find(|t| t.contains([',', '"'])) {
                    return Err(root.invalid(key, bad, "tokens may not contain commas or quotes"));
                }
                *slot = items
                    .into_iter()
                    .map(|t| (t.to_string(), Token::new(t)))
                    .collect();
            }
        }
        Ok(vocab)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_config(&ConfigFile::load(path)?)
    }

    pub fn ticket_type(&self, s: &str) -> Option<Token> {
        self.ticket_types.get(s).cloned()
    }

    pub fn benefit_type(&self, s: &str) -> Option<Token> {
        self.benefit_types.get(s).cloned()
    }

    pub fn ticket_types(&self) -> impl Iterator<Item = &str> {
        self.ticket_types.keys().map(String::as_str)
    }

    pub fn benefit_types(&self) -> impl Iterator<Item = &str> {
        self.benefit_types.keys().map(String::as_str)
    }
}
