//! Name-keyed registries for interchangeable strategies.
//!
//! Each strategy family (split criteria, activity counters, heatmap
//! exporters) exposes a static [`Registry`] so configuration files and
//! CLI flags can select an implementation by name at runtime.

use crate::error::{Error, Result};

pub trait Named {
    fn name(&self) -> &'static str;
}

pub struct Registry<T: ?Sized + 'static> {
    kind: &'static str,
    entries: &'static [&'static T],
}

impl<T: ?Sized + Named + 'static> Registry<T> {
    pub const fn new(kind: &'static str, entries: &'static [&'static T]) -> Self {
        Registry { kind, entries }
    }

    pub fn get(&self, name: &str) -> Result<&'static T> {
        self.entries.iter().copied().find(|e| e.name() == name).ok_or_else(|| Error::UnknownStrategy {
            kind: self.kind,
            name: name.to_string(),
            known: self.names().join(", "),
        })
    }

    /// Registration rank, used where strategies need a stable ordering.
    pub fn rank(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.name() == name)
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.name()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &'static T> + '_ {
        self.entries.iter().copied()
    }
}
