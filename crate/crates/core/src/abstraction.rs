//! Blurring, restriction to subspaces and the abstracting-operator test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{MeaningOperator, OperatorKind};
use crate::region::{AxisId, Context, Factor, MembershipGrid, Region};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbstractionParams {
    /// Parameter accuracy: admissible rigid shift.
    pub delta: f64,
    /// Membership accuracy.
    pub epsilon: f64,
    pub blur_radius: f64,
}

impl AbstractionParams {
    pub fn new(delta: f64, epsilon: f64) -> Result<Self> {
        let p = AbstractionParams { delta, epsilon, blur_radius: 0.0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let open = |v: f64| v > 0.0 && v < 1.0;
        if !open(self.delta) || !open(self.epsilon) || self.blur_radius.is_nan() || self.blur_radius < 0.0 {
            return Err(Error::Config(format!("need 0 < delta, epsilon < 1 and blur_radius >= 0, got {self:?}")));
        }
        Ok(())
    }
}

/// Box blur of every factor grid, clamping at the borders.
pub fn blur(region: &Region, radius: f64) -> Result<Region> {
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(Error::InvalidOperator(format!("blur radius {radius} must be non-negative")));
    }
    let factors = region
        .factors()
        .iter()
        .map(|f| Ok(Factor::new(blur_grid(&f.grid, radius)?, f.exponent)))
        .collect::<Result<Vec<_>>>()?;
    region.rebuild(factors)
}

pub fn blur_grid(grid: &MembershipGrid, radius: f64) -> Result<MembershipGrid> {
    let n = grid.resolution();
    let h = (radius * (n - 1) as f64).round() as usize;
    if h == 0 {
        return Ok(grid.clone());
    }
    let mut values = grid.values().to_vec();
    let smooth = |line: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let sum: f64 = (i as isize - h as isize..=i as isize + h as isize)
                    .map(|k| line[k.clamp(0, n as isize - 1) as usize])
                    .sum();
                sum / (2 * h + 1) as f64
            })
            .collect()
    };
    if grid.dims() == 1 {
        values = smooth(&values);
    } else {
        for i in 0..n {
            let row = smooth(&values[i * n..(i + 1) * n]);
            values[i * n..(i + 1) * n].copy_from_slice(&row);
        }
        for j in 0..n {
            let col: Vec<f64> = (0..n).map(|i| values[i * n + j]).collect();
            for (i, v) in smooth(&col).into_iter().enumerate() {
                values[i * n + j] = v;
            }
        }
    }
    let axes = grid.axes().to_vec();
    MembershipGrid::from_fn(axes, n, |c| {
        let idx: Vec<usize> = c.iter().map(|x| (x * (n - 1) as f64).round() as usize).collect();
        if idx.len() == 1 {
            values[idx[0]]
        } else {
            values[idx[0] * n + idx[1]]
        }
    })
}

/// The operator acting only on `subspace`.
pub fn restrict(op: &MeaningOperator, subspace: &[AxisId]) -> Result<MeaningOperator> {
    if subspace.is_empty() {
        return Err(Error::InvalidOperator("restriction to an empty subspace".into()));
    }
    let external = op.external_axes();
    if let Some(axes) = &external {
        if let Some(a) = subspace.iter().find(|a| !axes.contains(a)) {
            return Err(Error::UnknownAxis((*a).clone()));
        }
        if axes.iter().all(|a| subspace.contains(a)) {
            return Ok(op.clone());
        }
    }
    if let OperatorKind::DirectSum { parts } = &op.kind {
        let same = |p: &&MeaningOperator| {
            p.external_axes()
                .is_some_and(|axes| axes.len() == subspace.len() && axes.iter().all(|a| subspace.contains(a)))
        };
        if let Some(part) = parts.iter().find(same) {
            return Ok(part.clone());
        }
    }
    let name = format!("{}|{}", op.name, subspace.iter().map(AxisId::as_str).collect::<Vec<_>>().join(","));
    Ok(MeaningOperator::new(name, OperatorKind::Restricted { inner: Box::new(op.clone()), axes: subspace.to_vec() }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbstractionVerdict {
    pub holds: bool,
    /// Largest over (family member, probe) of the best residual found.
    pub residual: f64,
    pub probes: usize,
}

/// Offsets `k δ / 4` for `k = -3..=3`: the admissible shifts with `‖Δ‖∞ < δ`.
pub fn shift_grid(delta: f64) -> Vec<f64> {
    (-3..=3).map(|k| k as f64 * delta / 4.0).collect()
}

/// Sup-norm distance between `a` and `b` shifted by `shift` (per covered
/// axis), minimized over the admissible shift grid. Only points whose
/// shifted position stays inside the unit cube are compared.
pub fn best_shift_residual(a: &Region, b: &Region, delta: f64) -> Result<f64> {
    let mut axes: Vec<AxisId> = a.covered_axes();
    for x in b.covered_axes() {
        if !axes.contains(&x) {
            axes.push(x);
        }
    }
    if axes.len() > 2 {
        return Err(Error::NonSeparable { axes });
    }
    let res = a.max_resolution().max(b.max_resolution());
    let nodes: Vec<Vec<f64>> = (0..res.pow(axes.len() as u32))
        .map(|k| {
            let mut c = vec![0.0; axes.len()];
            let mut k = k;
            for i in (0..axes.len()).rev() {
                c[i] = (k % res) as f64 / (res - 1) as f64;
                k /= res;
            }
            c
        })
        .collect();
    let axes = &axes;
    let lhs: Vec<f64> = nodes.iter().map(|c| a.eval_with(at(axes, c))).collect();
    let steps = shift_grid(delta);
    let shifts: Vec<Vec<f64>> = match axes.len() {
        0 => vec![vec![]],
        1 => steps.iter().map(|s| vec![*s]).collect(),
        _ => steps.iter().flat_map(|s| steps.iter().map(move |t| vec![*s, *t])).collect(),
    };
    let mut best = f64::INFINITY;
    for shift in shifts {
        let mut worst: f64 = 0.0;
        for (c, l) in nodes.iter().zip(&lhs) {
            let moved: Vec<f64> = c.iter().zip(&shift).map(|(x, d)| x - d).collect();
            // Points shifted off the unit cube have no counterpart.
            if moved.iter().any(|x| !(-1e-12..=1.0 + 1e-12).contains(x)) {
                continue;
            }
            let moved: Vec<f64> = moved.into_iter().map(|x| x.clamp(0.0, 1.0)).collect();
            worst = worst.max((l - b.eval_with(at(axes, &moved))).abs());
            if worst >= best {
                break;
            }
        }
        best = best.min(worst);
    }
    Ok(best)
}

fn at<'a>(axes: &'a [AxisId], c: &'a [f64]) -> impl Fn(&AxisId) -> f64 + 'a {
    move |x| axes.iter().position(|y| y == x).map(|i| c[i]).unwrap_or(0.0)
}

/// Whether `b` reproduces every member of `family` on the subspace `y`:
/// for each member `A` and probe `x` some shift `‖Δy‖ < δ` makes
/// `‖B(P_y(x)) - P_y(A(x)) - Δy‖ < ε`.
pub fn is_abstracting(
    b: &MeaningOperator,
    family: &[MeaningOperator],
    y: &[AxisId],
    params: &AbstractionParams,
    probes: &[Region],
) -> Result<AbstractionVerdict> {
    params.validate()?;
    if probes.is_empty() {
        return Err(Error::Config("probe set is empty".into()));
    }
    if let Some(axes) = b.external_axes() {
        if let Some(a) = axes.iter().find(|a| !y.contains(a)) {
            return Err(Error::InvalidOperator(format!("`{}` acts on `{a}` outside the subspace", b.name)));
        }
    }
    let mut residual: f64 = 0.0;
    for a in family {
        for x in probes {
            let lhs = b.apply(&x.project(y)?)?;
            let rhs = a.apply(x)?.project(y)?.with_context(lhs.context().clone())?;
            residual = residual.max(best_shift_residual(&lhs, &rhs, params.delta)?);
        }
    }
    Ok(AbstractionVerdict { holds: residual < params.epsilon, residual, probes: probes.len() })
}

/// Eight structured probe regions over the first one or two axes of
/// `context`: constants 0, ½, 1, rising and falling ramps, bumps at 0.3 and
/// 0.7 and a smooth checkerboard. Sharp edges would make the shift search
/// depend on the grid resolution.
pub fn default_probes(context: &Context, resolution: usize) -> Result<Vec<Region>> {
    let axes: Vec<AxisId> = context.axes.iter().take(2).cloned().collect();
    if axes.is_empty() {
        return Err(Error::InvalidRegion("probe context has no axes".into()));
    }
    let bump = |m: f64| {
        move |c: &[f64]| {
            let d2: f64 = c.iter().map(|x| (x - m) * (x - m)).sum();
            (-d2 / (2.0 * 0.1 * 0.1)).exp()
        }
    };
    type Shape = Box<dyn Fn(&[f64]) -> f64>;
    let shapes: Vec<(&str, Shape)> = vec![
        ("zero", Box::new(|_| 0.0)),
        ("half", Box::new(|_| 0.5)),
        ("one", Box::new(|_| 1.0)),
        ("ramp-up", Box::new(|c| c[0])),
        ("ramp-down", Box::new(|c| 1.0 - c[c.len() - 1])),
        ("bump-0.3", Box::new(bump(0.3))),
        ("bump-0.7", Box::new(bump(0.7))),
        (
            "checker",
            Box::new(|c| 0.5 + 0.5 * c.iter().map(|x| (4.0 * std::f64::consts::PI * x).cos()).product::<f64>()),
        ),
    ];
    shapes
        .into_iter()
        .map(|(name, f)| {
            let grid = MembershipGrid::from_fn(axes.clone(), resolution, |c| f(c))?;
            Ok(Region::from_grid(context.clone(), grid)?.with_label(name))
        })
        .collect()
}
