use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Engine-enforced cap on the number of axes in one context.
pub const MAX_CONTEXT_AXES: usize = 50;

macro_rules! string_id {
    ($name:ident) => {
        #[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

string_id!(AxisId);
string_id!(ContextId);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisKind {
    Basic,
    Derived,
}

/// A property axis. Values always range over `[0, 1]`.
///
/// Derived axes carry the name of their reference region: the axis value at
/// a point of the reference context is that region's membership there.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub id: AxisId,
    pub name: String,
    pub kind: AxisKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    #[serde(default)]
    pub scale_note: String,
    /// Bound to a system effector; actionable regions on it become commands.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub effector: bool,
}

impl Axis {
    pub fn basic(id: impl Into<String>, name: impl Into<String>, scale_note: &str) -> Self {
        Axis {
            id: AxisId::new(id),
            name: name.into(),
            kind: AxisKind::Basic,
            reference: None,
            scale_note: scale_note.to_string(),
            effector: false,
        }
    }

    pub fn derived(id: impl Into<String>, name: impl Into<String>, reference: &str) -> Self {
        Axis {
            id: AxisId::new(id),
            name: name.into(),
            kind: AxisKind::Derived,
            reference: Some(reference.to_string()),
            scale_note: "relative".to_string(),
            effector: false,
        }
    }

    pub fn with_effector(mut self) -> Self {
        self.effector = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match (self.kind, &self.reference) {
            (AxisKind::Basic, None) | (AxisKind::Derived, Some(_)) => Ok(()),
            (AxisKind::Basic, Some(_)) => {
                Err(Error::InvalidRegion(format!("basic axis `{}` must not carry a reference region", self.id)))
            }
            (AxisKind::Derived, None) => Err(Error::MissingReference(self.id.clone())),
        }
    }
}

/// A coordinate system: an ordered set of axes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Context {
    pub id: ContextId,
    pub axes: Vec<AxisId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<ContextId>,
}

impl Context {
    pub fn new(id: impl Into<String>, axes: Vec<AxisId>) -> Result<Self> {
        let ctx = Context { id: ContextId::new(id), axes, parent: None };
        ctx.validate()?;
        Ok(ctx)
    }

    pub fn with_parent(mut self, parent: ContextId) -> Self {
        self.parent = Some(parent);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.axes.len() > MAX_CONTEXT_AXES {
            return Err(Error::TooManyAxes {
                context: self.id.clone(),
                count: self.axes.len(),
                limit: MAX_CONTEXT_AXES,
            });
        }
        for (i, a) in self.axes.iter().enumerate() {
            if self.axes[..i].contains(a) {
                return Err(Error::InvalidRegion(format!("axis `{a}` repeated in context `{}`", self.id)));
            }
        }
        Ok(())
    }

    pub fn contains(&self, axis: &AxisId) -> bool {
        self.axes.contains(axis)
    }

    /// Direct sum of two contexts over disjoint axis sets.
    pub fn direct_sum(a: &Context, b: &Context) -> Result<Context> {
        if let Some(shared) = a.axes.iter().find(|x| b.contains(x)) {
            return Err(Error::AxisConflict(shared.clone()));
        }
        let mut axes = a.axes.clone();
        axes.extend(b.axes.iter().cloned());
        let ctx = Context { id: ContextId::new(format!("{}+{}", a.id, b.id)), axes, parent: None };
        ctx.validate()?;
        Ok(ctx)
    }
}

/// A crisp point of a context's unit hypercube.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub context: ContextId,
    pub coords: BTreeMap<AxisId, f64>,
}

impl Point {
    pub fn new(context: &Context, coords: impl IntoIterator<Item = (AxisId, f64)>) -> Result<Self> {
        let coords: BTreeMap<AxisId, f64> = coords.into_iter().collect();
        if coords.len() != context.axes.len() || !context.axes.iter().all(|a| coords.contains_key(a)) {
            return Err(Error::InvalidRegion(format!("point must cover exactly the axes of context `{}`", context.id)));
        }
        if let Some((a, v)) = coords.iter().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidRegion(format!("coordinate {v} on axis `{a}` outside [0, 1]")));
        }
        Ok(Point { context: context.id.clone(), coords })
    }

    pub fn get(&self, axis: &AxisId) -> f64 {
        self.coords.get(axis).copied().unwrap_or(0.0)
    }
}
