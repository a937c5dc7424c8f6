//! Name-indexed registries of strategy constructors.
//!
//! Every interchangeable component of the optimizer (splitting rule,
//! weighting rule, bandwidth heuristic, benchmark function) is exposed as a
//! trait object. A [`Registry`] maps the name used in config files and on the
//! command line to a constructor for that trait object.

use crate::error::{Error, Result};

/// Static table of `(name, constructor)` pairs for one strategy family.
pub struct Registry<F: 'static> {
    kind: &'static str,
    entries: &'static [(&'static str, F)],
}

impl<F: Copy + 'static> Registry<F> {
    pub const fn new(kind: &'static str, entries: &'static [(&'static str, F)]) -> Self {
        Self { kind, entries }
    }

    pub fn kind(&self) -> &'static str {
        self.kind
    }

    /// Looks up a constructor by name.
    pub fn get(&self, name: &str) -> Result<F> {
        self.entries
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, f)| *f)
            .ok_or_else(|| Error::UnknownName {
                kind: self.kind,
                name: name.to_string(),
                known: self.names().collect::<Vec<_>>().join(", "),
            })
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.iter().map(|(n, _)| *n)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.iter().any(|(n, _)| *n == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one() -> u32 {
        1
    }
    fn two() -> u32 {
        2
    }

    static NUMBERS: Registry<fn() -> u32> = Registry::new("number", &[("one", one), ("two", two)]);

    #[test]
    fn lookup_by_name() {
        assert_eq!(NUMBERS.get("two").unwrap()(), 2);
        assert!(NUMBERS.contains("one"));
        assert_eq!(NUMBERS.names().collect::<Vec<_>>(), ["one", "two"]);
    }

    #[test]
    fn unknown_name_lists_known_entries() {
        let err = NUMBERS.get("three").unwrap_err().to_string();
        assert!(err.contains("unknown number `three`"), "{err}");
        assert!(err.contains("one, two"), "{err}");
    }
}
