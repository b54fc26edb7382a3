//! Name-keyed registries for interchangeable strategies.
//!
//! Executors, allreduce algorithms, interface flux solvers, diffusion
//! closures, hydro scenarios and benchmark applications are all selected at
//! runtime by name through a [`Registry`].

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown {kind} '{name}' (available: {available})")]
pub struct UnknownName {
    pub kind: &'static str,
    pub name: String,
    pub available: String,
}

pub struct Registry<F> {
    kind: &'static str,
    entries: Vec<Entry<F>>,
}

struct Entry<F> {
    name: &'static str,
    aliases: &'static [&'static str],
    summary: &'static str,
    factory: F,
}

impl<F> Registry<F> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: Vec::new(),
        }
    }

    /// Registers `factory` under `name`. A later registration with the same
    /// name replaces the earlier one.
    pub fn register(&mut self, name: &'static str, summary: &'static str, factory: F) -> &mut Self {
        self.register_with_aliases(name, &[], summary, factory)
    }

    pub fn register_with_aliases(
        &mut self,
        name: &'static str,
        aliases: &'static [&'static str],
        summary: &'static str,
        factory: F,
    ) -> &mut Self {
        self.entries.retain(|e| e.name != name);
        self.entries.push(Entry {
            name,
            aliases,
            summary,
            factory,
        });
        self
    }

    pub fn get(&self, name: &str) -> Result<&F, UnknownName> {
        let wanted = name.trim().to_ascii_lowercase();
        self.entries
            .iter()
            .find(|e| e.name == wanted || e.aliases.contains(&wanted.as_str()))
            .map(|e| &e.factory)
            .ok_or_else(|| UnknownName {
                kind: self.kind,
                name: name.to_string(),
                available: self.names().join(", "),
            })
    }

    /// Canonical name for `name` (resolves aliases).
    pub fn canonical(&self, name: &str) -> Result<&'static str, UnknownName> {
        let wanted = name.trim().to_ascii_lowercase();
        self.entries
            .iter()
            .find(|e| e.name == wanted || e.aliases.contains(&wanted.as_str()))
            .map(|e| e.name)
            .ok_or_else(|| UnknownName {
                kind: self.kind,
                name: name.to_string(),
                available: self.names().join(", "),
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.name).collect()
    }

    pub fn describe(&self) -> Vec<(&'static str, &'static str)> {
        self.entries.iter().map(|e| (e.name, e.summary)).collect()
    }
}

impl<F> fmt::Debug for Registry<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry")
            .field("kind", &self.kind)
            .field("names", &self.names())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_and_aliases() {
        let mut reg: Registry<fn() -> u32> = Registry::new("widget");
        reg.register("one", "first", || 1)
            .register_with_aliases("two", &["deux"], "second", || 2);
        assert_eq!((reg.get("one").unwrap())(), 1);
        assert_eq!((reg.get("DEUX").unwrap())(), 2);
        assert_eq!(reg.canonical("deux").unwrap(), "two");
        let err = reg.get("three").unwrap_err();
        assert!(err.to_string().contains("one, two"));
    }
}
