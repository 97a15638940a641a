use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::axis::{Axis, AxisId, AxisKind, Context, ContextId, Point};
use super::grid::{quantize, MembershipGrid, DEFAULT_RESOLUTION};
use crate::error::{Error, Result};

/// Joint sample grids larger than this are subsampled.
const MAX_JOINT_SAMPLES: usize = 1 << 21;
/// Distribution size kept when folding factor distributions for stats.
const MAX_DISTRIBUTION: usize = 1 << 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    #[serde(flatten)]
    pub grid: MembershipGrid,
    #[serde(rename = "alpha")]
    pub exponent: f64,
}

impl Factor {
    pub fn new(grid: MembershipGrid, exponent: f64) -> Self {
        Factor { grid, exponent }
    }

    pub fn axes(&self) -> &[AxisId] {
        self.grid.axes()
    }
}

/// A fuzzy region: `membership(p) = ∏ mᵢ(p)^αᵢ` over factors spanning
/// disjoint axis subsets. Axes without a factor are unconstrained.
///
/// Normalized regions keep `Σα = 1` whenever factors are added or removed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRegion")]
pub struct Region {
    context: Context,
    factors: Vec<Factor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    normalized: bool,
}

#[derive(Deserialize)]
struct RawRegion {
    context: Context,
    factors: Vec<Factor>,
    #[serde(default)]
    label: Option<String>,
    #[serde(default = "yes")]
    normalized: bool,
}

fn yes() -> bool {
    true
}

impl TryFrom<RawRegion> for Region {
    type Error = Error;

    fn try_from(raw: RawRegion) -> Result<Self> {
        let region =
            Region { context: raw.context, factors: raw.factors, label: raw.label, normalized: raw.normalized };
        region.validate()?;
        Ok(region)
    }
}

impl Region {
    /// The unspecified region: membership one everywhere.
    pub fn empty(context: Context) -> Self {
        Region { context, factors: Vec::new(), label: None, normalized: true }
    }

    /// Region with exponents rescaled to sum to one.
    pub fn new(context: Context, factors: Vec<Factor>) -> Result<Self> {
        let mut region = Region { context, factors, label: None, normalized: true };
        region.validate()?;
        region.renormalize();
        Ok(region)
    }

    /// Region whose exponents are kept exactly as given.
    pub fn unnormalized(context: Context, factors: Vec<Factor>) -> Result<Self> {
        let region = Region { context, factors, label: None, normalized: false };
        region.validate()?;
        Ok(region)
    }

    pub fn from_grid(context: Context, grid: MembershipGrid) -> Result<Self> {
        Region::new(context, vec![Factor::new(grid, 1.0)])
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn context(&self) -> &Context {
        &self.context
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn is_unspecified(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn exponent_sum(&self) -> f64 {
        self.factors.iter().map(|f| f.exponent).sum()
    }

    /// Axes constrained by some factor, in context order.
    pub fn covered_axes(&self) -> Vec<AxisId> {
        self.context.axes.iter().filter(|a| self.factors.iter().any(|f| f.axes().contains(a))).cloned().collect()
    }

    pub fn factor_for(&self, axis: &AxisId) -> Option<(usize, &Factor)> {
        self.factors.iter().enumerate().find(|(_, f)| f.axes().contains(axis))
    }

    fn validate(&self) -> Result<()> {
        self.context.validate()?;
        let mut seen: Vec<&AxisId> = Vec::new();
        for f in &self.factors {
            if !(f.exponent > 0.0 && f.exponent.is_finite()) {
                return Err(Error::InvalidRegion(format!("exponent {} must be positive", f.exponent)));
            }
            for a in f.axes() {
                if !self.context.contains(a) {
                    return Err(Error::InvalidRegion(format!(
                        "factor axis `{a}` not in context `{}`",
                        self.context.id
                    )));
                }
                if seen.contains(&a) {
                    return Err(Error::InvalidRegion(format!("axis `{a}` covered by two factors")));
                }
                seen.push(a);
            }
        }
        Ok(())
    }

    fn renormalize(&mut self) {
        if !self.normalized {
            return;
        }
        let sum = self.exponent_sum();
        if sum > 0.0 && sum != 1.0 {
            self.factors.iter_mut().for_each(|f| f.exponent /= sum);
        }
    }

    pub(crate) fn rebuild(&self, factors: Vec<Factor>) -> Result<Region> {
        let region = Region { context: self.context.clone(), factors, label: None, normalized: self.normalized };
        region.validate()?;
        Ok(region)
    }

    /// Same factors in another context with the same axes.
    pub fn with_context(&self, context: Context) -> Result<Region> {
        let region =
            Region { context, factors: self.factors.clone(), label: self.label.clone(), normalized: self.normalized };
        region.validate()?;
        Ok(region)
    }

    /// Append a factor, leaving every existing exponent untouched.
    pub fn absorb(&self, grid: MembershipGrid, exponent: f64) -> Result<Region> {
        let mut factors = self.factors.clone();
        factors.push(Factor::new(grid, exponent));
        self.rebuild(factors)
    }

    /// Append a factor and renormalize exponents (for normalized regions).
    pub fn join(&self, grid: MembershipGrid, exponent: f64) -> Result<Region> {
        let mut region = self.absorb(grid, exponent)?;
        region.renormalize();
        Ok(region)
    }

    pub fn membership(&self, point: &Point) -> Result<f64> {
        if point.context != self.context.id {
            return Err(Error::ContextMismatch { expected: self.context.id.clone(), found: point.context.clone() });
        }
        Ok(self.eval_with(|a| point.get(a)))
    }

    /// Membership at the point whose coordinates are given by `coord`.
    pub fn eval_with(&self, coord: impl Fn(&AxisId) -> f64) -> f64 {
        let mut m = 1.0;
        for f in &self.factors {
            let c: Vec<f64> = f.axes().iter().map(&coord).collect();
            let v = f.grid.sample(&c);
            if v == 0.0 {
                return 0.0;
            }
            m *= v.powf(f.exponent);
        }
        m
    }

    /// Membership at a point given as an axis map; missing axes read as 0.
    pub fn eval_map(&self, coords: &BTreeMap<AxisId, f64>) -> f64 {
        self.eval_with(|a| coords.get(a).copied().unwrap_or(0.0))
    }

    /// Factors split by `axes`: those inside and those outside.
    /// A factor straddling the boundary is an error.
    pub fn split(&self, axes: &[AxisId]) -> Result<(Vec<Factor>, Vec<Factor>)> {
        let mut inside = Vec::new();
        let mut outside = Vec::new();
        for f in &self.factors {
            let n_in = f.axes().iter().filter(|a| axes.contains(a)).count();
            if n_in == f.axes().len() {
                inside.push(f.clone());
            } else if n_in == 0 {
                outside.push(f.clone());
            } else {
                return Err(Error::NonSeparable { axes: f.axes().to_vec() });
            }
        }
        Ok((inside, outside))
    }

    /// Projection onto the sub-context spanned by `keep`, discarding the
    /// factors over other axes. A two-axis factor with one kept axis is
    /// replaced by its sup-marginal.
    pub fn project(&self, keep: &[AxisId]) -> Result<Region> {
        if let Some(a) = keep.iter().find(|a| !self.context.contains(a)) {
            return Err(Error::UnknownAxis(a.clone()));
        }
        if self.context.axes.iter().all(|a| keep.contains(a)) {
            return Ok(self.clone());
        }
        let mut inside = Vec::new();
        let mut dropped = false;
        for f in &self.factors {
            let kept: Vec<&AxisId> = f.axes().iter().filter(|a| keep.contains(a)).collect();
            if kept.len() == f.axes().len() {
                inside.push(f.clone());
            } else if kept.is_empty() {
                dropped = true;
            } else {
                // A joint factor straddling the cut: keep its sup-marginal.
                let axis = kept[0].clone();
                let values = f.grid.marginal_sup(&axis).expect("axis of the factor");
                let grid = MembershipGrid::from_values(vec![axis], f.grid.resolution(), values)?;
                inside.push(Factor::new(grid, f.exponent));
            }
        }
        let axes: Vec<AxisId> = self.context.axes.iter().filter(|a| keep.contains(a)).cloned().collect();
        let context = Context {
            id: ContextId::new(format!(
                "{}[{}]",
                self.context.id,
                axes.iter().map(AxisId::as_str).collect::<Vec<_>>().join(",")
            )),
            axes,
            parent: Some(self.context.id.clone()),
        };
        let mut region = Region { context, factors: inside, label: self.label.clone(), normalized: self.normalized };
        if dropped {
            region.renormalize();
        }
        Ok(region)
    }

    /// Replace the factors over `target` with the factors of `replacement`.
    ///
    /// Replacement factors share the exponent mass of the factors they
    /// replace. When nothing is replaced they enter as one more factor with
    /// the mean existing weight.
    pub fn substitute(&self, target: &[AxisId], replacement: &Region) -> Result<Region> {
        if let Some(a) = target.iter().find(|a| !self.context.contains(a)) {
            return Err(Error::UnknownAxis(a.clone()));
        }
        if let Some(f) = replacement.factors.iter().find(|f| f.axes().iter().any(|a| !target.contains(a))) {
            return Err(Error::InvalidOperator(format!(
                "replacement factor over {:?} leaves the target axes {:?}",
                f.axes(),
                target
            )));
        }
        let (removed, kept) = self.split(target)?;
        let removed_mass: f64 = removed.iter().map(|f| f.exponent).sum();
        let repl_mass = replacement.exponent_sum();
        let inserted_mass = if removed_mass > 0.0 {
            removed_mass
        } else if kept.is_empty() {
            if self.normalized {
                1.0
            } else {
                repl_mass
            }
        } else {
            kept.iter().map(|f| f.exponent).sum::<f64>() / kept.len() as f64
        };
        let mut factors = kept;
        if repl_mass > 0.0 {
            factors.extend(
                replacement.factors.iter().map(|f| Factor::new(f.grid.clone(), f.exponent * inserted_mass / repl_mass)),
            );
        }
        let mut region = self.rebuild(factors)?;
        region.renormalize();
        Ok(region)
    }

    /// Direct sum over disjoint contexts. Normalized operands are combined
    /// by geometric mean (halved exponents).
    pub fn direct_sum(a: &Region, b: &Region) -> Result<Region> {
        let context = Context::direct_sum(&a.context, &b.context)?;
        let normalized = a.normalized && b.normalized;
        let scale = if normalized && !a.factors.is_empty() && !b.factors.is_empty() { 0.5 } else { 1.0 };
        let factors =
            a.factors.iter().chain(&b.factors).map(|f| Factor::new(f.grid.clone(), f.exponent * scale)).collect();
        let region = Region { context, factors, label: None, normalized };
        region.validate()?;
        Ok(region)
    }

    /// Single joint grid over the covered axes (at most two).
    /// `None` for the unspecified region.
    pub fn flatten(&self) -> Result<Option<MembershipGrid>> {
        let axes = self.covered_axes();
        match axes.len() {
            0 => Ok(None),
            1 | 2 => {
                let res = self.max_resolution();
                let grid = MembershipGrid::from_fn(axes.clone(), res, |c| {
                    self.eval_with(|a| axes.iter().position(|x| x == a).map(|i| c[i]).unwrap_or(0.0))
                })?;
                Ok(Some(grid))
            }
            _ => Err(Error::NonSeparable { axes }),
        }
    }

    /// Collapse into a single factor with exponent one (at most two axes).
    pub fn flattened(&self) -> Result<Region> {
        match self.flatten()? {
            None => Ok(self.clone()),
            Some(grid) => self.rebuild(vec![Factor::new(grid, 1.0)]),
        }
    }

    pub fn max_resolution(&self) -> usize {
        self.factors.iter().map(|f| f.grid.resolution()).max().unwrap_or(DEFAULT_RESOLUTION)
    }

    /// Statistics over the full sample grid (cartesian product of factor
    /// grids).
    pub fn stats(&self) -> RegionStats {
        if self.factors.is_empty() {
            return RegionStats { max: 1.0, mean: 1.0, samples: vec![1.0] };
        }
        let mut max = 1.0;
        let mut mean = 1.0;
        let mut dist: Vec<f64> = vec![1.0];
        for f in &self.factors {
            let vals: Vec<f64> = f.grid.values().iter().map(|v| v.powf(f.exponent)).collect();
            max *= vals.iter().copied().fold(0.0, f64::max);
            mean *= vals.iter().sum::<f64>() / vals.len() as f64;
            dist = product_distribution(dist, vals);
        }
        dist.sort_by(f64::total_cmp);
        RegionStats { max, mean, samples: dist }
    }

    /// Pointwise membership at every node of the joint sample grid covering
    /// the given regions, paired per region.
    pub(crate) fn joint_samples(regions: &[&Region]) -> Result<(JointGrid, Vec<Vec<f64>>)> {
        let joint = JointGrid::covering(regions).limited(MAX_JOINT_SAMPLES);
        let evaluators: Vec<Evaluator> =
            regions.iter().map(|r| Evaluator::new(r, &joint.axes)).collect::<Result<_>>()?;
        let mut out = vec![Vec::with_capacity(joint.len()); regions.len()];
        let mut coords = vec![0.0; joint.axes.len()];
        for k in 0..joint.len() {
            joint.coords_into(k, &mut coords);
            for (o, e) in out.iter_mut().zip(&evaluators) {
                o.push(e.eval(&coords));
            }
        }
        Ok((joint, out))
    }

    /// L∞ distance of memberships over the joint sample grid.
    pub fn distance(&self, other: &Region) -> Result<f64> {
        if self.context.id != other.context.id {
            return Err(Error::ContextMismatch { expected: self.context.id.clone(), found: other.context.id.clone() });
        }
        let (_, samples) = Region::joint_samples(&[self, other])?;
        Ok(samples[0].iter().zip(&samples[1]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }
}

/// Pairwise products of two equally weighted samples, compressed to
/// evenly spaced quantiles once the result would exceed the size cap.
fn product_distribution(a: Vec<f64>, b: Vec<f64>) -> Vec<f64> {
    let cap = (MAX_DISTRIBUTION as f64).sqrt() as usize;
    let (a, b) = if a.len() * b.len() > MAX_DISTRIBUTION { (quantiles(a, cap), quantiles(b, cap)) } else { (a, b) };
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in &a {
        out.extend(b.iter().map(|y| x * y));
    }
    out
}

fn quantiles(mut v: Vec<f64>, n: usize) -> Vec<f64> {
    if v.len() <= n {
        return v;
    }
    v.sort_by(f64::total_cmp);
    (0..n).map(|i| v[((i as f64 + 0.5) * v.len() as f64 / n as f64) as usize]).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionStats {
    pub max: f64,
    pub mean: f64,
    /// Sorted membership samples of the joint grid.
    #[serde(skip)]
    samples: Vec<f64>,
}

impl RegionStats {
    /// Fraction of samples with membership strictly above `tau`.
    pub fn coverage_fraction(&self, tau: f64) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        let below = self.samples.partition_point(|v| *v <= tau);
        (self.samples.len() - below) as f64 / self.samples.len() as f64
    }
}

/// Regular grid over a set of axes with per-axis resolution.
#[derive(Clone, Debug)]
pub(crate) struct JointGrid {
    pub axes: Vec<AxisId>,
    pub res: Vec<usize>,
}

impl JointGrid {
    pub fn covering(regions: &[&Region]) -> JointGrid {
        let mut axes: Vec<AxisId> = Vec::new();
        let mut res: Vec<usize> = Vec::new();
        for r in regions {
            for a in &r.context.axes {
                let cover = r.factors.iter().find(|f| f.axes().contains(a));
                if let Some(f) = cover {
                    match axes.iter().position(|x| x == a) {
                        Some(i) => res[i] = res[i].max(f.grid.resolution()),
                        None => {
                            axes.push(a.clone());
                            res.push(f.grid.resolution());
                        }
                    }
                }
            }
        }
        JointGrid { axes, res }
    }

    pub fn limited(mut self, max: usize) -> JointGrid {
        while self.len() > max {
            for r in self.res.iter_mut() {
                *r = (*r / 2).max(2);
            }
        }
        self
    }

    pub fn len(&self) -> usize {
        self.res.iter().product()
    }

    pub fn coords_into(&self, mut k: usize, out: &mut [f64]) {
        for i in (0..self.axes.len()).rev() {
            let n = self.res[i];
            out[i] = (k % n) as f64 / (n - 1) as f64;
            k /= n;
        }
    }
}

/// Membership evaluation against a fixed joint-axis layout.
pub(crate) struct Evaluator<'a> {
    region: &'a Region,
    slots: Vec<Vec<Option<usize>>>,
}

impl<'a> Evaluator<'a> {
    pub fn new(region: &'a Region, axes: &[AxisId]) -> Result<Self> {
        let slots = region
            .factors
            .iter()
            .map(|f| f.axes().iter().map(|a| axes.iter().position(|x| x == a)).collect())
            .collect();
        Ok(Evaluator { region, slots })
    }

    pub fn eval(&self, coords: &[f64]) -> f64 {
        let mut m = 1.0;
        let mut c = [0.0; 2];
        for (f, slots) in self.region.factors.iter().zip(&self.slots) {
            for (i, s) in slots.iter().enumerate() {
                c[i] = s.map(|s| coords[s]).unwrap_or(0.0);
            }
            let v = f.grid.sample(&c[..slots.len()]);
            if v == 0.0 {
                return 0.0;
            }
            m *= v.powf(f.exponent);
        }
        m
    }
}

/// Rewrite a derived axis through its reference region by function
/// composition: the 1D factor `f(axis)` becomes `f(X(x₁, x₂))` over the
/// reference axes, spliced into the context where `axis` stood.
pub fn expand_axis(region: &Region, axis: &Axis, reference: &Region) -> Result<Region> {
    if axis.kind != AxisKind::Derived {
        return Err(Error::NotDerived(axis.id.clone()));
    }
    let ref_axes = reference.covered_axes();
    if ref_axes.is_empty() || ref_axes.len() > 2 {
        return Err(Error::InvalidRegion(format!("reference region for `{}` must span 1 or 2 axes", axis.id)));
    }
    if ref_axes.contains(&axis.id) {
        return Err(Error::ReferenceCycle(axis.id.clone()));
    }
    if let Some(a) = ref_axes.iter().find(|a| region.context.contains(a)) {
        return Err(Error::AxisConflict(a.clone()));
    }
    let (index, factor) = region.factor_for(&axis.id).ok_or_else(|| Error::MissingFactor(axis.id.clone()))?;
    if factor.axes().len() != 1 {
        return Err(Error::NonSeparable { axes: factor.axes().to_vec() });
    }
    let res = reference.max_resolution().max(factor.grid.resolution());
    let composed = MembershipGrid::from_fn(ref_axes.clone(), res, |c| {
        let x = reference.eval_with(|a| ref_axes.iter().position(|r| r == a).map(|i| c[i]).unwrap_or(0.0));
        factor.grid.sample(&[x])
    })?;
    let mut axes = Vec::with_capacity(region.context.axes.len() + ref_axes.len() - 1);
    for a in &region.context.axes {
        if *a == axis.id {
            axes.extend(ref_axes.iter().cloned());
        } else {
            axes.push(a.clone());
        }
    }
    let context = Context {
        id: ContextId::new(format!("{}<{}>", region.context.id, axis.id)),
        axes,
        parent: Some(region.context.id.clone()),
    };
    context.validate()?;
    let mut factors = region.factors.clone();
    factors[index] = Factor::new(composed, factor.exponent);
    let out = Region { context, factors, label: region.label.clone(), normalized: region.normalized };
    out.validate()?;
    Ok(out)
}

/// Quantized samples of a product of values; used by tests and callers that
/// need a flattened sample without building a grid.
pub fn weighted_product(values: &[(f64, f64)]) -> f64 {
    quantize(values.iter().map(|(m, a)| if *m == 0.0 { 0.0 } else { m.powf(*a) }).product())
}
