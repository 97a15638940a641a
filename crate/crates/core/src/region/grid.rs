use serde::{Deserialize, Serialize};

use super::axis::AxisId;
use crate::error::{Error, Result};

/// Samples per axis unless configured otherwise.
pub const DEFAULT_RESOLUTION: usize = 64;

const LATTICE: f64 = 4_294_967_296.0; // 2^32

/// Clamp to `[0, 1]` and snap to the 2^-32 lattice.
///
/// Every grid write goes through here. On the lattice `1 - v` is exact, so
/// complement is a sample-exact involution.
pub fn quantize(v: f64) -> f64 {
    assert!(v.is_finite(), "membership value must be finite, got {v}");
    (v.clamp(0.0, 1.0) * LATTICE).round() / LATTICE
}

/// Interpolation scheme used to turn reference points into a grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kernel {
    /// Piecewise linear in 1D, bilinear on a rectilinear lattice in 2D.
    Linear,
    /// Inverse-distance weighting with a Gaussian falloff away from the
    /// point cloud.
    InverseDistance { power: f64, falloff_sigma: f64 },
}

impl Default for Kernel {
    fn default() -> Self {
        Kernel::InverseDistance { power: 2.0, falloff_sigma: 0.15 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefPoint {
    pub coords: Vec<f64>,
    pub membership: f64,
}

impl RefPoint {
    pub fn new(coords: impl Into<Vec<f64>>, membership: f64) -> Self {
        RefPoint { coords: coords.into(), membership }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferencePoints {
    pub points: Vec<RefPoint>,
    pub kernel: Kernel,
}

/// Membership samples over one or two axes on a regular grid.
///
/// Node `i` of an axis sits at `i / (resolution - 1)`. Two-dimensional grids
/// are row-major with the first axis as the slow index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid")]
pub struct MembershipGrid {
    axes: Vec<AxisId>,
    resolution: usize,
    values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source: Option<ReferencePoints>,
}

#[derive(Deserialize)]
struct RawGrid {
    axes: Vec<AxisId>,
    resolution: usize,
    values: Vec<f64>,
    #[serde(default)]
    source: Option<ReferencePoints>,
}

impl TryFrom<RawGrid> for MembershipGrid {
    type Error = Error;

    fn try_from(raw: RawGrid) -> Result<Self> {
        let grid =
            MembershipGrid { axes: raw.axes, resolution: raw.resolution, values: raw.values, source: raw.source };
        grid.validate()?;
        Ok(grid)
    }
}

impl MembershipGrid {
    fn validate(&self) -> Result<()> {
        let dims = self.axes.len();
        if !(1..=2).contains(&dims) {
            return Err(Error::InvalidGrid(format!("grids span 1 or 2 axes, got {dims}")));
        }
        if dims == 2 && self.axes[0] == self.axes[1] {
            return Err(Error::InvalidGrid("grid axes must be distinct".into()));
        }
        if self.resolution < 2 {
            return Err(Error::InvalidGrid("resolution must be at least 2".into()));
        }
        let expected = self.resolution.pow(dims as u32);
        if self.values.len() != expected {
            return Err(Error::InvalidGrid(format!("expected {expected} samples, found {}", self.values.len())));
        }
        if let Some(i) = self.values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidGrid(format!("sample {i} outside [0, 1]")));
        }
        Ok(())
    }

    /// Grid sampled from a function of the node coordinates.
    pub fn from_fn(axes: Vec<AxisId>, resolution: usize, mut f: impl FnMut(&[f64]) -> f64) -> Result<Self> {
        let dims = axes.len();
        if !(1..=2).contains(&dims) {
            return Err(Error::InvalidGrid(format!("grids span 1 or 2 axes, got {dims}")));
        }
        if resolution < 2 {
            return Err(Error::InvalidGrid("resolution must be at least 2".into()));
        }
        let mut grid = MembershipGrid { axes, resolution, values: Vec::new(), source: None };
        let step = 1.0 / (resolution - 1) as f64;
        let mut coords = vec![0.0; dims];
        let n = resolution.pow(dims as u32);
        grid.values = (0..n)
            .map(|k| {
                if dims == 1 {
                    coords[0] = k as f64 * step;
                } else {
                    coords[0] = (k / resolution) as f64 * step;
                    coords[1] = (k % resolution) as f64 * step;
                }
                quantize(f(&coords))
            })
            .collect();
        grid.validate()?;
        Ok(grid)
    }

    pub fn from_values(axes: Vec<AxisId>, resolution: usize, values: Vec<f64>) -> Result<Self> {
        let mut grid = MembershipGrid { axes, resolution, values, source: None };
        grid.validate()?;
        grid.values.iter_mut().for_each(|v| *v = quantize(*v));
        Ok(grid)
    }

    pub fn constant(axes: Vec<AxisId>, resolution: usize, value: f64) -> Result<Self> {
        Self::from_fn(axes, resolution, |_| value)
    }

    pub fn axes(&self) -> &[AxisId] {
        &self.axes
    }

    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn source(&self) -> Option<&ReferencePoints> {
        self.source.as_ref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn node_coord(&self, index: usize) -> f64 {
        index as f64 / (self.resolution - 1) as f64
    }

    /// Coordinates of sample `k` in axis order.
    pub fn sample_coords(&self, k: usize) -> Vec<f64> {
        if self.dims() == 1 {
            vec![self.node_coord(k)]
        } else {
            vec![self.node_coord(k / self.resolution), self.node_coord(k % self.resolution)]
        }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.resolution + j]
    }

    /// Linear (1D) or bilinear (2D) sampling; coordinates are clamped to `[0, 1]`.
    pub fn sample(&self, coords: &[f64]) -> f64 {
        let (i0, w0) = self.locate(coords[0]);
        if self.dims() == 1 {
            let a = self.values[i0];
            let b = self.values[(i0 + 1).min(self.resolution - 1)];
            return lerp(a, b, w0);
        }
        let (i1, w1) = self.locate(coords[1]);
        let n = self.resolution;
        let i0b = (i0 + 1).min(n - 1);
        let i1b = (i1 + 1).min(n - 1);
        let top = lerp(self.values[i0 * n + i1], self.values[i0 * n + i1b], w1);
        let bottom = lerp(self.values[i0b * n + i1], self.values[i0b * n + i1b], w1);
        lerp(top, bottom, w0)
    }

    fn locate(&self, x: f64) -> (usize, f64) {
        let scaled = x.clamp(0.0, 1.0) * (self.resolution - 1) as f64;
        let i = (scaled.floor() as usize).min(self.resolution - 2);
        (i, scaled - i as f64)
    }

    /// New grid with every sample replaced by `f(sample)`.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> MembershipGrid {
        MembershipGrid {
            axes: self.axes.clone(),
            resolution: self.resolution,
            values: self.values.iter().map(|v| quantize(f(*v))).collect(),
            source: None,
        }
    }

    /// Sample-wise combination of two grids with the same shape.
    pub fn zip_with(&self, other: &MembershipGrid, mut f: impl FnMut(f64, f64) -> f64) -> Result<MembershipGrid> {
        if self.axes != other.axes || self.resolution != other.resolution {
            return Err(Error::InvalidGrid("grids differ in axes or resolution".into()));
        }
        Ok(MembershipGrid {
            axes: self.axes.clone(),
            resolution: self.resolution,
            values: self.values.iter().zip(&other.values).map(|(a, b)| quantize(f(*a, *b))).collect(),
            source: None,
        })
    }

    /// Membership-weighted centroid along each axis of the grid.
    /// `None` when the grid carries no mass.
    pub fn centroids(&self, exponent: f64) -> Option<Vec<f64>> {
        let mut mass = 0.0;
        let mut sums = vec![0.0; self.dims()];
        for (k, v) in self.values.iter().enumerate() {
            let w = v.powf(exponent);
            if w == 0.0 {
                continue;
            }
            mass += w;
            for (s, c) in sums.iter_mut().zip(self.sample_coords(k)) {
                *s += w * c;
            }
        }
        (mass > 0.0).then(|| sums.into_iter().map(|s| s / mass).collect())
    }

    /// Sup-marginal along `axis`: for 1D grids the samples themselves.
    pub fn marginal_sup(&self, axis: &AxisId) -> Option<Vec<f64>> {
        let pos = self.axes.iter().position(|a| a == axis)?;
        if self.dims() == 1 {
            return Some(self.values.clone());
        }
        let n = self.resolution;
        Some(
            (0..n)
                .map(|i| (0..n).map(|j| if pos == 0 { self.at(i, j) } else { self.at(j, i) }).fold(0.0, f64::max))
                .collect(),
        )
    }
}

fn lerp(a: f64, b: f64, w: f64) -> f64 {
    if w == 0.0 {
        a
    } else {
        a + (b - a) * w
    }
}

/// Build a grid from scattered reference points.
///
/// After interpolation, the node nearest to each reference point is pinned to
/// that point's membership (averaged when several points share a node).
pub fn build_grid(axes: Vec<AxisId>, points: &[RefPoint], resolution: usize, kernel: Kernel) -> Result<MembershipGrid> {
    if points.is_empty() {
        return Err(Error::EmptyPoints);
    }
    let dims = axes.len();
    for (index, p) in points.iter().enumerate() {
        if p.coords.len() != dims {
            return Err(Error::InvalidPoint {
                index,
                reason: format!("expected {dims} coordinates, found {}", p.coords.len()),
            });
        }
        if let Some(c) = p.coords.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return Err(Error::InvalidPoint { index, reason: format!("coordinate {c} outside [0, 1]") });
        }
        if !(0.0..=1.0).contains(&p.membership) {
            return Err(Error::InvalidPoint { index, reason: format!("membership {} outside [0, 1]", p.membership) });
        }
    }
    let mut grid = match kernel {
        Kernel::Linear if dims == 1 => {
            let knots = linear_knots(points);
            MembershipGrid::from_fn(axes, resolution, |c| piecewise_linear(&knots, c[0]))?
        }
        Kernel::Linear => {
            let lattice = Lattice::new(points)?;
            MembershipGrid::from_fn(axes, resolution, |c| lattice.eval(c[0], c[1]))?
        }
        Kernel::InverseDistance { power, falloff_sigma } => {
            if power <= 0.0 || falloff_sigma <= 0.0 {
                return Err(Error::InvalidGrid("kernel parameters must be positive".into()));
            }
            let support = support_radii(points);
            MembershipGrid::from_fn(axes, resolution, |c| inverse_distance(points, &support, c, power, falloff_sigma))?
        }
    };
    pin_reference_points(&mut grid, points);
    grid.source = Some(ReferencePoints { points: points.to_vec(), kernel });
    Ok(grid)
}

fn pin_reference_points(grid: &mut MembershipGrid, points: &[RefPoint]) {
    let n = grid.resolution;
    let mut pinned: std::collections::BTreeMap<usize, (f64, usize)> = Default::default();
    for p in points {
        let idx: Vec<usize> = p.coords.iter().map(|c| (c * (n - 1) as f64).round() as usize).collect();
        let k = if idx.len() == 1 { idx[0] } else { idx[0] * n + idx[1] };
        let e = pinned.entry(k).or_insert((0.0, 0));
        e.0 += p.membership;
        e.1 += 1;
    }
    for (k, (sum, count)) in pinned {
        grid.values[k] = quantize(sum / count as f64);
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Half the distance from each point to its nearest neighbour; zero for a
/// lone point. Inside these radii the Gaussian falloff does not apply.
fn support_radii(points: &[RefPoint]) -> Vec<f64> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            points
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, q)| distance(&p.coords, &q.coords))
                .fold(f64::INFINITY, f64::min)
        })
        .map(|d| if d.is_finite() { d / 2.0 } else { 0.0 })
        .collect()
}

fn inverse_distance(points: &[RefPoint], support: &[f64], x: &[f64], power: f64, sigma: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut falloff: f64 = 0.0;
    for (p, r) in points.iter().zip(support) {
        let d = distance(&p.coords, x);
        let excess = (d - r).max(0.0);
        falloff = falloff.max((-excess * excess / (2.0 * sigma * sigma)).exp());
        if d < 1e-12 {
            // Coincident with a reference point: that point dominates.
            return p.membership;
        }
        let w = d.powf(-power);
        num += w * p.membership;
        den += w;
    }
    num / den * falloff
}

fn linear_knots(points: &[RefPoint]) -> Vec<(f64, f64)> {
    let mut knots: Vec<(f64, f64, usize)> = Vec::new();
    let mut sorted: Vec<&RefPoint> = points.iter().collect();
    sorted.sort_by(|a, b| a.coords[0].total_cmp(&b.coords[0]));
    for p in sorted {
        match knots.last_mut() {
            Some(last) if last.0 == p.coords[0] => {
                last.1 += p.membership;
                last.2 += 1;
            }
            _ => knots.push((p.coords[0], p.membership, 1)),
        }
    }
    knots.into_iter().map(|(x, s, n)| (x, s / n as f64)).collect()
}

pub(crate) fn piecewise_linear(knots: &[(f64, f64)], x: f64) -> f64 {
    let first = knots[0];
    let last = knots[knots.len() - 1];
    if x <= first.0 {
        return first.1;
    }
    if x >= last.0 {
        return last.1;
    }
    let k = knots.partition_point(|(kx, _)| *kx <= x);
    let (x0, y0) = knots[k - 1];
    let (x1, y1) = knots[k];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Reference points on a rectilinear lattice, evaluated bilinearly.
struct Lattice {
    xs: Vec<f64>,
    ys: Vec<f64>,
    values: Vec<f64>,
}

impl Lattice {
    fn new(points: &[RefPoint]) -> Result<Self> {
        let mut xs: Vec<f64> = points.iter().map(|p| p.coords[0]).collect();
        let mut ys: Vec<f64> = points.iter().map(|p| p.coords[1]).collect();
        for v in [&mut xs, &mut ys] {
            v.sort_by(f64::total_cmp);
            v.dedup();
        }
        let mut values = vec![f64::NAN; xs.len() * ys.len()];
        for p in points {
            let i = xs.iter().position(|x| *x == p.coords[0]).unwrap_or(0);
            let j = ys.iter().position(|y| *y == p.coords[1]).unwrap_or(0);
            values[i * ys.len() + j] = p.membership;
        }
        if let Some(k) = values.iter().position(|v| v.is_nan()) {
            return Err(Error::InvalidPoint {
                index: k,
                reason: "linear kernel in 2D needs points on a complete rectilinear lattice".into(),
            });
        }
        Ok(Lattice { xs, ys, values })
    }

    fn eval(&self, x: f64, y: f64) -> f64 {
        let row = |i: usize| -> Vec<(f64, f64)> {
            self.ys.iter().enumerate().map(|(j, yy)| (*yy, self.values[i * self.ys.len() + j])).collect()
        };
        let column: Vec<(f64, f64)> =
            self.xs.iter().enumerate().map(|(i, xx)| (*xx, piecewise_linear(&row(i), y))).collect();
        piecewise_linear(&column, x)
    }
}
