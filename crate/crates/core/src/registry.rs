//! Name-keyed strategy registries.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown {family} `{name}` (known: {known})")]
pub struct UnknownStrategy {
    pub family: &'static str,
    pub name: String,
    pub known: String,
}

/// A set of trait objects registered under unique names.
///
/// Lookups accept both `snake_case` and `kebab-case` spellings.
pub struct Registry<T: ?Sized> {
    family: &'static str,
    entries: BTreeMap<String, Box<T>>,
}

impl<T: ?Sized> Registry<T> {
    pub fn new(family: &'static str) -> Self {
        Self {
            family,
            entries: BTreeMap::new(),
        }
    }

    /// Registers `item` under `name`, replacing any previous entry.
    pub fn register(&mut self, name: &str, item: Box<T>) -> &mut Self {
        self.entries.insert(canonical_name(name), item);
        self
    }

    pub fn get(&self, name: &str) -> Result<&T, UnknownStrategy> {
        self.entries
            .get(&canonical_name(name))
            .map(|b| b.as_ref())
            .ok_or_else(|| UnknownStrategy {
                family: self.family,
                name: name.to_string(),
                known: self.names().join(", "),
            })
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(&canonical_name(name))
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.keys().cloned().collect()
    }
}

/// Lower-cases and maps `-` to `_`.
pub fn canonical_name(name: &str) -> String {
    name.trim().to_ascii_lowercase().replace('-', "_")
}
