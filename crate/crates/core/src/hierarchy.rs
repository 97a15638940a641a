//! Context hierarchy with named indexes, and the spare-context buffer.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::region::{AxisId, Context, ContextId, Region};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexKind {
    Objects,
    Actions,
    TimeIntervals,
    Locations,
    NarrativeParts,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ContextHierarchy {
    nodes: BTreeMap<ContextId, Context>,
    /// Creation order, for "most recent" lookups.
    order: Vec<ContextId>,
    indexes: BTreeMap<IndexKind, BTreeMap<String, ContextId>>,
}

impl ContextHierarchy {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn get(&self, id: &ContextId) -> Option<&Context> {
        self.nodes.get(id)
    }

    pub fn contains(&self, id: &ContextId) -> bool {
        self.nodes.contains_key(id)
    }

    /// Contexts in creation order.
    pub fn iter(&self) -> impl Iterator<Item = &Context> {
        self.order.iter().filter_map(|id| self.nodes.get(id))
    }

    pub fn insert(&mut self, context: Context) -> Result<()> {
        context.validate()?;
        if self.nodes.contains_key(&context.id) {
            return Err(Error::InvalidRegion(format!("context `{}` already exists", context.id)));
        }
        if let Some(p) = &context.parent {
            if !self.nodes.contains_key(p) {
                return Err(Error::InvalidRegion(format!("parent context `{p}` does not exist")));
            }
        }
        self.order.push(context.id.clone());
        self.nodes.insert(context.id.clone(), context);
        Ok(())
    }

    pub fn index(&mut self, kind: IndexKind, key: impl Into<String>, id: &ContextId) -> Result<()> {
        if !self.nodes.contains_key(id) {
            return Err(Error::InvalidRegion(format!("cannot index unknown context `{id}`")));
        }
        self.indexes.entry(kind).or_default().insert(key.into(), id.clone());
        Ok(())
    }

    pub fn lookup(&self, kind: IndexKind, key: &str) -> Option<&ContextId> {
        self.indexes.get(&kind)?.get(key)
    }

    pub fn index_entries(&self, kind: IndexKind) -> impl Iterator<Item = (&String, &ContextId)> {
        self.indexes.get(&kind).into_iter().flatten()
    }

    /// Path from `id` up to its root, starting with `id`.
    pub fn ancestors(&self, id: &ContextId) -> Vec<ContextId> {
        let mut out = Vec::new();
        let mut cur = self.nodes.get(id);
        while let Some(c) = cur {
            if out.contains(&c.id) || out.len() > self.nodes.len() {
                break;
            }
            out.push(c.id.clone());
            cur = c.parent.as_ref().and_then(|p| self.nodes.get(p));
        }
        out
    }

    pub fn depth(&self) -> usize {
        self.nodes.keys().map(|k| self.ancestors(k).len()).max().unwrap_or(0)
    }

    /// Most recently created context containing every axis in `axes`.
    pub fn most_recent_with(&self, axes: &[AxisId]) -> Option<&Context> {
        self.order.iter().rev().filter_map(|id| self.nodes.get(id)).find(|c| axes.iter().all(|a| c.contains(a)))
    }

    /// An id based on `base` that is not taken yet.
    pub fn fresh_id(&self, base: &str) -> ContextId {
        let plain = ContextId::new(base);
        if !self.nodes.contains_key(&plain) {
            return plain;
        }
        (2..).map(|n| ContextId::new(format!("{base}~{n}"))).find(|id| !self.nodes.contains_key(id)).expect("unbounded")
    }
}

/// A runner-up interpretation kept for later retry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpareSnapshot {
    pub context: Context,
    pub region: Region,
    /// Rendering of the candidate this snapshot came from.
    pub origin: String,
}

/// Ring buffer of spare contexts, most recent first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpareBuffer {
    limit: usize,
    items: VecDeque<SpareSnapshot>,
}

impl SpareBuffer {
    pub fn new(limit: usize) -> Self {
        SpareBuffer { limit, items: VecDeque::new() }
    }

    pub fn limit(&self) -> usize {
        self.limit
    }

    pub fn set_limit(&mut self, limit: usize) {
        self.limit = limit;
        self.items.truncate(limit);
    }

    pub fn push(&mut self, snapshot: SpareSnapshot) {
        if self.limit == 0 {
            return;
        }
        self.items.push_front(snapshot);
        self.items.truncate(self.limit);
    }

    pub fn pop(&mut self) -> Option<SpareSnapshot> {
        self.items.pop_front()
    }

    pub fn remove(&mut self, index: usize) -> Option<SpareSnapshot> {
        self.items.remove(index)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &SpareSnapshot> {
        self.items.iter()
    }
}
