//! Meaning-operators and their application to regions.
//!
//! Every operator is a pure function from regions to regions. Operators with
//! an internal context carry a parameter region; [`compose_block`] lets one
//! operator rewrite another's parameters, which is how "very fast walk"
//! becomes a single block-operator.

mod connective;
mod transform;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::region::{AxisId, Context, ContextId, Region};

pub use connective::{apply_and, apply_hedge, apply_not, apply_or, PointwiseFn};
pub use transform::{
    apply_general_transform, parameter_centroid, CoordinateMap, GeneralTransform, ShapeTemplate, Trajectory,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Junction {
    And,
    Or,
}

/// Where a projection operator takes its replacement membership from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum ProjectionSource {
    /// The parameter region itself is the replacement `Y*`.
    Parameters,
    /// `Y*` is synthesized from the parameter region.
    Template { shape: ShapeTemplate },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorKind {
    Identity,
    /// Applies `f` to every factor of the region.
    Pointwise {
        f: PointwiseFn,
    },
    /// `I(X) ⊕ P(Y)`: the factors over `target` are replaced.
    Projection {
        target: Vec<AxisId>,
        source: ProjectionSource,
    },
    /// `I(X) ⊕ G(Y)`.
    Transform {
        target: Vec<AxisId>,
        transform: GeneralTransform,
    },
    Conjunction {
        junction: Junction,
        operands: Vec<MeaningOperator>,
    },
    /// Complement of the operand's output on the operand's axes.
    Negation {
        operand: Box<MeaningOperator>,
    },
    /// Parts act independently on disjoint axis sets.
    DirectSum {
        parts: Vec<MeaningOperator>,
    },
    /// `inner` sees only the projection onto `axes`.
    Restricted {
        inner: Box<MeaningOperator>,
        axes: Vec<AxisId>,
    },
    /// Composition in `∘` order: the last element is applied first.
    Sequence {
        ops: Vec<MeaningOperator>,
    },
    /// Box blur of every factor.
    Blur {
        radius: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InternalContext {
    pub context: Context,
    pub parameters: Region,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeaningOperator {
    pub name: String,
    #[serde(flatten)]
    pub kind: OperatorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub internal: Option<InternalContext>,
}

impl MeaningOperator {
    pub fn new(name: impl Into<String>, kind: OperatorKind) -> Self {
        MeaningOperator { name: name.into(), kind, internal: None }
    }

    pub fn identity() -> Self {
        MeaningOperator::new("identity", OperatorKind::Identity)
    }

    pub fn pointwise(name: impl Into<String>, f: PointwiseFn) -> Self {
        MeaningOperator::new(name, OperatorKind::Pointwise { f })
    }

    /// Hedge from the named pointwise family.
    pub fn hedge(name: &str) -> Result<Self> {
        Ok(MeaningOperator::pointwise(name, PointwiseFn::named(name)?))
    }

    /// Adjective-style projection whose replacement is `parameters`.
    pub fn projection(name: impl Into<String>, parameters: Region) -> Self {
        let axes = parameters.context().axes.clone();
        MeaningOperator {
            name: name.into(),
            kind: OperatorKind::Projection { target: axes, source: ProjectionSource::Parameters },
            internal: Some(InternalContext { context: parameters.context().clone(), parameters }),
        }
    }

    pub fn with_internal(mut self, parameters: Region) -> Self {
        self.internal = Some(InternalContext { context: parameters.context().clone(), parameters });
        self
    }

    pub fn sequence(ops: Vec<MeaningOperator>) -> Self {
        let name = ops.iter().map(|o| o.name.as_str()).collect::<Vec<_>>().join("∘");
        MeaningOperator::new(name, OperatorKind::Sequence { ops })
    }

    pub fn conjunction(junction: Junction, operands: Vec<MeaningOperator>) -> Self {
        let word = match junction {
            Junction::And => " and ",
            Junction::Or => " or ",
        };
        let name = operands.iter().map(|o| o.name.as_str()).collect::<Vec<_>>().join(word);
        MeaningOperator::new(format!("({name})"), OperatorKind::Conjunction { junction, operands })
    }

    pub fn parameters(&self) -> Option<&Region> {
        self.internal.as_ref().map(|i| &i.parameters)
    }

    /// Axes of the narrative context this operator reads or writes.
    /// `None` for operators acting on whatever region they are given.
    pub fn external_axes(&self) -> Option<Vec<AxisId>> {
        fn union(ops: &[MeaningOperator]) -> Option<Vec<AxisId>> {
            let mut out: Vec<AxisId> = Vec::new();
            let mut any = false;
            for o in ops {
                if let Some(axes) = o.external_axes() {
                    any = true;
                    for a in axes {
                        if !out.contains(&a) {
                            out.push(a);
                        }
                    }
                }
            }
            any.then_some(out)
        }
        match &self.kind {
            OperatorKind::Identity | OperatorKind::Pointwise { .. } | OperatorKind::Blur { .. } => None,
            OperatorKind::Projection { target, .. } | OperatorKind::Transform { target, .. } => Some(target.clone()),
            OperatorKind::Restricted { axes, .. } => Some(axes.clone()),
            OperatorKind::Negation { operand } => operand.external_axes(),
            OperatorKind::Conjunction { operands: ops, .. }
            | OperatorKind::DirectSum { parts: ops }
            | OperatorKind::Sequence { ops } => union(ops),
        }
    }

    /// Numeric parameters read off the parameter region (membership-weighted
    /// centroid per internal axis).
    pub fn parameter_values(&self) -> Vec<(AxisId, f64)> {
        let Some(internal) = &self.internal else {
            return Vec::new();
        };
        if let OperatorKind::Projection { source: ProjectionSource::Template { shape }, .. } = &self.kind {
            return shape.parameters(&internal.parameters);
        }
        internal.context.axes.iter().map(|a| (a.clone(), parameter_centroid(&internal.parameters, a))).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(i) = &self.internal {
            i.context.validate()?;
            if i.parameters.context().axes != i.context.axes {
                return Err(Error::InvalidOperator(format!(
                    "`{}`: parameter region does not live in the internal context",
                    self.name
                )));
            }
        }
        match &self.kind {
            OperatorKind::Pointwise { f } => f.validate(),
            OperatorKind::Transform { transform, .. } => transform.validate(),
            OperatorKind::Projection { source: ProjectionSource::Parameters, target } => match &self.internal {
                None => Err(Error::NoInternalContext(self.name.clone())),
                Some(i) => match i.parameters.covered_axes().iter().find(|a| !target.contains(a)) {
                    Some(a) => Err(Error::AxisConflict(a.clone())),
                    None => Ok(()),
                },
            },
            OperatorKind::Projection { source: ProjectionSource::Template { .. }, .. } => match &self.internal {
                None => Err(Error::NoInternalContext(self.name.clone())),
                Some(_) => Ok(()),
            },
            OperatorKind::Conjunction { operands, .. } if operands.is_empty() => {
                Err(Error::InvalidOperator("conjunction without operands".into()))
            }
            OperatorKind::Conjunction { operands: ops, .. } | OperatorKind::Sequence { ops } => {
                ops.iter().try_for_each(MeaningOperator::validate)
            }
            OperatorKind::Negation { operand } => operand.validate(),
            OperatorKind::Restricted { inner, axes } => {
                if axes.is_empty() {
                    return Err(Error::InvalidOperator("restriction to an empty subspace".into()));
                }
                inner.validate()
            }
            OperatorKind::DirectSum { parts } => {
                let mut seen: Vec<AxisId> = Vec::new();
                for p in parts {
                    p.validate()?;
                    let axes = p
                        .external_axes()
                        .ok_or_else(|| Error::InvalidOperator(format!("direct-sum part `{}` has no axes", p.name)))?;
                    if let Some(a) = axes.iter().find(|a| seen.contains(a)) {
                        return Err(Error::AxisConflict(a.clone()));
                    }
                    seen.extend(axes);
                }
                Ok(())
            }
            OperatorKind::Blur { radius } if !(*radius >= 0.0 && radius.is_finite()) => {
                Err(Error::InvalidOperator(format!("blur radius {radius} must be non-negative")))
            }
            OperatorKind::Identity | OperatorKind::Blur { .. } => Ok(()),
        }
    }

    pub fn apply(&self, region: &Region) -> Result<Region> {
        match &self.kind {
            OperatorKind::Identity => Ok(region.clone()),
            OperatorKind::Pointwise { f } => f.apply(region, None),
            OperatorKind::Projection { target, source } => {
                let internal = self.internal.as_ref().ok_or_else(|| Error::NoInternalContext(self.name.clone()))?;
                match source {
                    ProjectionSource::Parameters => apply_projection_adjective(region, target, &internal.parameters),
                    ProjectionSource::Template { shape } => {
                        let axes = shape.target();
                        let res = if region.is_unspecified() {
                            internal.parameters.max_resolution()
                        } else {
                            region.max_resolution()
                        };
                        let grid = shape.render(&internal.parameters, res)?;
                        let ctx = Context::new(format!("{}:shape", self.name), axes.clone())?;
                        apply_projection_adjective(region, &axes, &Region::from_grid(ctx, grid)?)
                    }
                }
            }
            OperatorKind::Transform { target, transform } => apply_general_transform(region, target, transform),
            OperatorKind::Conjunction { junction, operands } => {
                let mut outs = operands.iter().map(|o| o.apply(region));
                let first = outs.next().ok_or_else(|| Error::InvalidOperator("empty conjunction".into()))??;
                outs.try_fold(first, |acc, next| match junction {
                    Junction::And => apply_and(&acc, &next?),
                    Junction::Or => apply_or(&acc, &next?),
                })
            }
            OperatorKind::Negation { operand } => {
                let out = operand.apply(region)?;
                PointwiseFn::Complement.apply(&out, operand.external_axes().as_deref())
            }
            OperatorKind::DirectSum { parts } => {
                let mut out = region.clone();
                for p in parts {
                    let axes = p
                        .external_axes()
                        .ok_or_else(|| Error::InvalidOperator(format!("direct-sum part `{}` has no axes", p.name)))?;
                    let sub = p.apply(&region.project(&axes)?)?;
                    out = out.substitute(&axes, &sub)?;
                }
                Ok(out)
            }
            OperatorKind::Restricted { inner, axes } => {
                // P_y ∘ inner ∘ embed: other axes enter unconstrained.
                let (inside, _) = region.split(axes)?;
                let embedded = region.rebuild(inside)?;
                let sub = inner.apply(&embedded)?.project(axes)?;
                region.substitute(axes, &sub)
            }
            OperatorKind::Sequence { ops } => ops.iter().rev().try_fold(region.clone(), |acc, op| op.apply(&acc)),
            OperatorKind::Blur { radius } => crate::abstraction::blur(region, *radius),
        }
    }
}

/// Replace the factors over `target` with those of `y_star`.
pub fn apply_projection_adjective(region: &Region, target: &[AxisId], y_star: &Region) -> Result<Region> {
    region.substitute(target, y_star)
}

/// Block-operator: `modifier` rewrites the parameter region of `target`.
/// The target's external behaviour follows from its new parameters.
pub fn compose_block(modifier: &MeaningOperator, target: &MeaningOperator) -> Result<MeaningOperator> {
    let internal = target.internal.as_ref().ok_or_else(|| Error::NoInternalContext(target.name.clone()))?;
    if let Some(axes) = modifier.external_axes() {
        if let Some(a) = axes.iter().find(|a| !internal.context.contains(a)) {
            return Err(Error::InvalidOperator(format!(
                "`{}` acts on `{a}`, outside the internal context of `{}`",
                modifier.name, target.name
            )));
        }
    }
    let parameters = modifier.apply(&internal.parameters)?;
    let parameters = parameters.with_context(internal.context.clone())?;
    Ok(MeaningOperator {
        name: format!("{} {}", modifier.name, target.name),
        kind: target.kind.clone(),
        internal: Some(InternalContext { context: internal.context.clone(), parameters }),
    })
}

/// "but": the second operator sees the region as it was before the first.
pub fn apply_but(first: &PhraseOperator, second: &PhraseOperator, a: &Region) -> Result<(Region, Region)> {
    Ok((first.apply(a)?, second.apply(a)?))
}

/// A line of block-operators applied left to right.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhraseOperator {
    pub line: Vec<MeaningOperator>,
    pub context: ContextId,
}

impl PhraseOperator {
    pub fn new(context: ContextId, line: Vec<MeaningOperator>) -> Self {
        PhraseOperator { line, context }
    }

    pub fn apply(&self, source: &Region) -> Result<Region> {
        Ok(self.apply_traced(source)?.pop().unwrap_or_else(|| source.clone()))
    }

    /// The source followed by the region after each line element.
    pub fn apply_traced(&self, source: &Region) -> Result<Vec<Region>> {
        if source.context().id != self.context {
            return Err(Error::ContextMismatch { expected: self.context.clone(), found: source.context().id.clone() });
        }
        let mut out = vec![source.clone()];
        for op in &self.line {
            let next = op.apply(out.last().expect("non-empty"))?;
            out.push(next);
        }
        Ok(out)
    }

    pub fn describe(&self) -> String {
        if self.line.is_empty() {
            return "[]".into();
        }
        format!("[{}]", self.line.iter().map(|o| o.name.as_str()).collect::<Vec<_>>().join(", "))
    }
}

pub fn apply_phrase(p: &PhraseOperator, source: &Region) -> Result<Region> {
    p.apply(source)
}
