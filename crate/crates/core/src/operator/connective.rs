use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::region::{AxisId, Context, Factor, MembershipGrid, Region};

/// Named pointwise membership modifiers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "fn", rename_all = "snake_case")]
pub enum PointwiseFn {
    Identity,
    /// `1 - x`
    Complement,
    /// `x^p`; "very" is `p = 2`.
    Power {
        p: f64,
    },
}

impl PointwiseFn {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            PointwiseFn::Identity => x,
            PointwiseFn::Complement => 1.0 - x,
            PointwiseFn::Power { p } => x.powf(p),
        }
    }

    /// Hedge family lookup by name.
    pub fn named(name: &str) -> Result<Self> {
        Ok(match name {
            "identity" => PointwiseFn::Identity,
            "not" | "complement" => PointwiseFn::Complement,
            "very" => PointwiseFn::Power { p: 2.0 },
            "extremely" => PointwiseFn::Power { p: 3.0 },
            "somewhat" => PointwiseFn::Power { p: 0.5 },
            other => return Err(Error::UnknownHedge(other.to_string())),
        })
    }

    pub(crate) fn validate(&self) -> Result<()> {
        match *self {
            PointwiseFn::Power { p } if !(p > 0.0 && p.is_finite()) => {
                Err(Error::InvalidOperator(format!("power {p} must be positive")))
            }
            _ => Ok(()),
        }
    }

    /// Apply to the factors over `scope`, or to the whole region.
    pub fn apply(&self, region: &Region, scope: Option<&[AxisId]>) -> Result<Region> {
        match self {
            PointwiseFn::Identity => Ok(region.clone()),
            PointwiseFn::Complement => complement(region, scope),
            PointwiseFn::Power { .. } => {
                let factors = region
                    .factors()
                    .iter()
                    .map(|f| {
                        let hit = scope.is_none_or(|s| f.axes().iter().all(|a| s.contains(a)));
                        let grid = if hit { f.grid.map(|v| self.eval(v)) } else { f.grid.clone() };
                        Factor::new(grid, f.exponent)
                    })
                    .collect();
                region.rebuild(factors)
            }
        }
    }
}

pub fn apply_not(region: &Region) -> Result<Region> {
    complement(region, None)
}

pub fn apply_hedge(name: &str, region: &Region) -> Result<Region> {
    PointwiseFn::named(name)?.apply(region, None)
}

fn coord<'a>(axes: &'a [AxisId], c: &'a [f64]) -> impl Fn(&AxisId) -> f64 + 'a {
    move |a| axes.iter().position(|x| x == a).map(|i| c[i]).unwrap_or(0.0)
}

/// Axes spanned by a set of factors, in context order.
fn span(context: &Context, factors: &[Factor]) -> Vec<AxisId> {
    context.axes.iter().filter(|a| factors.iter().any(|f| f.axes().contains(a))).cloned().collect()
}

fn resolution_of(factors: &[&Factor]) -> usize {
    factors.iter().map(|f| f.grid.resolution()).max().unwrap_or(crate::region::DEFAULT_RESOLUTION)
}

fn joint_product(factors: &[Factor], axes: &[AxisId], c: &[f64]) -> f64 {
    let at = coord(axes, c);
    factors
        .iter()
        .map(|f| {
            let xs: Vec<f64> = f.axes().iter().map(&at).collect();
            let v = f.grid.sample(&xs);
            if v == 0.0 {
                0.0
            } else {
                v.powf(f.exponent)
            }
        })
        .product()
}

fn complement(region: &Region, scope: Option<&[AxisId]>) -> Result<Region> {
    let (inside, outside) = match scope {
        Some(axes) => region.split(axes)?,
        None => (region.factors().to_vec(), Vec::new()),
    };
    match inside.len() {
        0 => {
            let axes: Vec<AxisId> = match scope {
                Some(axes) => axes.to_vec(),
                None => region.context().axes.clone(),
            };
            if !(1..=2).contains(&axes.len()) {
                return Err(Error::NonSeparable { axes });
            }
            let res = region.max_resolution();
            let zero = MembershipGrid::constant(axes.clone(), res, 0.0)?;
            let sub = Region::from_grid(region.context().clone(), zero)?;
            region.substitute(&axes, &sub)
        }
        1 => {
            let f = &inside[0];
            let mut factors = outside;
            factors.push(Factor::new(f.grid.map(|v| 1.0 - v), f.exponent));
            region.rebuild(factors)
        }
        _ => {
            let axes = span(region.context(), &inside);
            if axes.len() > 2 {
                return Err(Error::NonSeparable { axes });
            }
            let w: f64 = inside.iter().map(|f| f.exponent).sum();
            let res = resolution_of(&inside.iter().collect::<Vec<_>>());
            let grid =
                MembershipGrid::from_fn(axes.clone(), res, |c| (1.0 - joint_product(&inside, &axes, c)).powf(1.0 / w))?;
            let mut factors = outside;
            factors.push(Factor::new(grid, w));
            region.rebuild(factors)
        }
    }
}

/// Bring two regions into one context: identical contexts pass through,
/// disjoint ones are lifted into their direct sum.
fn lift(f: &Region, g: &Region) -> Result<(Region, Region)> {
    if f.context().id == g.context().id {
        return Ok((f.clone(), g.clone()));
    }
    let sum = Context::direct_sum(f.context(), g.context())
        .map_err(|_| Error::ContextMismatch { expected: f.context().id.clone(), found: g.context().id.clone() })?;
    Ok((f.with_context(sum.clone())?, g.with_context(sum)?))
}

fn build(template: &Region, factors: Vec<Factor>, normalized: bool) -> Result<Region> {
    if normalized {
        Region::new(template.context().clone(), factors)
    } else {
        Region::unnormalized(template.context().clone(), factors)
    }
}

/// `h = sqrt(f g)`. Factors keep their own grids with halved exponents;
/// factors of `f` and `g` over overlapping axes are merged into one grid.
pub fn apply_and(f: &Region, g: &Region) -> Result<Region> {
    let (f, g) = lift(f, g)?;
    let mut halves: Vec<Factor> =
        f.factors().iter().chain(g.factors()).map(|x| Factor::new(x.grid.clone(), x.exponent / 2.0)).collect();
    let mut merged: Vec<Factor> = Vec::new();
    while !halves.is_empty() {
        let mut group = vec![halves.remove(0)];
        loop {
            let axes: Vec<AxisId> = group.iter().flat_map(|x| x.axes().to_vec()).collect();
            let hit = halves.iter().position(|x| x.axes().iter().any(|a| axes.contains(a)));
            match hit {
                Some(i) => group.push(halves.remove(i)),
                None => break,
            }
        }
        if group.len() == 1 {
            merged.extend(group);
            continue;
        }
        let axes = span(f.context(), &group);
        if axes.len() > 2 {
            return Err(Error::NonSeparable { axes });
        }
        let w: f64 = group.iter().map(|x| x.exponent).sum();
        let res = resolution_of(&group.iter().collect::<Vec<_>>());
        let grid = MembershipGrid::from_fn(axes.clone(), res, |c| joint_product(&group, &axes, c).powf(1.0 / w))?;
        merged.push(Factor::new(grid, w));
    }
    let sum: f64 = merged.iter().map(|x| x.exponent).sum();
    let normalized = f.is_normalized() && g.is_normalized() && (sum - 1.0).abs() < 1e-12;
    build(&f, merged, normalized)
}

/// `h = 1 - sqrt((1 - f)(1 - g))` as one joint grid over the covered axes.
pub fn apply_or(f: &Region, g: &Region) -> Result<Region> {
    let (f, g) = lift(f, g)?;
    let normalized = f.is_normalized() && g.is_normalized();
    if f.is_unspecified() || g.is_unspecified() {
        return build(&f, Vec::new(), normalized);
    }
    let all: Vec<Factor> = f.factors().iter().chain(g.factors()).cloned().collect();
    let axes = span(f.context(), &all);
    if axes.len() > 2 {
        return Err(Error::NonSeparable { axes });
    }
    let res = resolution_of(&all.iter().collect::<Vec<_>>());
    let grid = MembershipGrid::from_fn(axes.clone(), res, |c| {
        let a = joint_product(f.factors(), &axes, c);
        let b = joint_product(g.factors(), &axes, c);
        1.0 - ((1.0 - a) * (1.0 - b)).sqrt()
    })?;
    build(&f, vec![Factor::new(grid, 1.0)], normalized)
}
