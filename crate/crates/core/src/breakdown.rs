use std::fmt;

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::scalar::RewardScalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RewardComponent {
    Acc,
    Fmt,
    Eval,
    Imp,
    Align,
    Act,
}

impl RewardComponent {
    pub fn id(self) -> &'static str {
        match self {
            RewardComponent::Acc => "acc",
            RewardComponent::Fmt => "fmt",
            RewardComponent::Eval => "eval",
            RewardComponent::Imp => "imp",
            RewardComponent::Align => "align",
            RewardComponent::Act => "act",
        }
    }
}

impl fmt::Display for RewardComponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Named reward components and their sum.
///
/// The total is computed once at construction, left to right in component
/// order, so it is always the exact sum of what is stored.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardBreakdown<T = f64> {
    components: Vec<(RewardComponent, T)>,
    total: T,
}

impl<T: RewardScalar> RewardBreakdown<T> {
    /// Panics if a component id repeats.
    pub fn new(components: Vec<(RewardComponent, T)>) -> Self {
        for (i, (c, _)) in components.iter().enumerate() {
            assert!(components[..i].iter().all(|(d, _)| d != c), "duplicate reward component {c}");
        }
        let total = components.iter().fold(T::zero(), |acc, &(_, v)| acc + v);
        Self { components, total }
    }

    pub fn total(&self) -> T {
        self.total
    }

    pub fn get(&self, component: RewardComponent) -> Option<T> {
        self.components.iter().find(|(c, _)| *c == component).map(|&(_, v)| v)
    }

    pub fn components(&self) -> &[(RewardComponent, T)] {
        &self.components
    }
}

impl<T: RewardScalar> Serialize for RewardBreakdown<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.components.len() + 1))?;
        for (c, v) in &self.components {
            map.serialize_entry(c.id(), &v.to_f64())?;
        }
        map.serialize_entry("total", &self.total.to_f64())?;
        map.end()
    }
}
