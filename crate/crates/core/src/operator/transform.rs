use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::region::{build_grid, AxisId, Factor, MembershipGrid, RefPoint, ReferencePoints, Region};

/// Shapes synthesized from a scalar parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "template", rename_all = "snake_case")]
pub enum ShapeTemplate {
    /// Ridge `exp(-(s - v t)^2 / 2w^2)` over position `s` and time `t`,
    /// with `v = gain * centroid(speed)` taken from the parameter region.
    Motion { speed: AxisId, space: AxisId, time: AxisId, gain: f64, width: f64 },
}

impl ShapeTemplate {
    pub fn target(&self) -> Vec<AxisId> {
        match self {
            ShapeTemplate::Motion { space, time, .. } => vec![space.clone(), time.clone()],
        }
    }

    /// Parameter values read from the parameter region.
    pub fn parameters(&self, params: &Region) -> Vec<(AxisId, f64)> {
        match self {
            ShapeTemplate::Motion { speed, .. } => vec![(speed.clone(), parameter_centroid(params, speed))],
        }
    }

    pub fn render(&self, params: &Region, resolution: usize) -> Result<MembershipGrid> {
        match self {
            ShapeTemplate::Motion { speed, space, time, gain, width } => {
                let v = gain * parameter_centroid(params, speed);
                MembershipGrid::from_fn(vec![space.clone(), time.clone()], resolution, |c| {
                    let d = c[0] - v * c[1];
                    (-d * d / (2.0 * width * width)).exp()
                })
            }
        }
    }
}

/// Membership-weighted centroid of the parameter region along `axis`.
/// An unconstrained or empty axis reads as the midpoint.
pub fn parameter_centroid(params: &Region, axis: &AxisId) -> f64 {
    let Some((_, f)) = params.factor_for(axis) else {
        return 0.5;
    };
    let pos = f.axes().iter().position(|a| a == axis).unwrap_or(0);
    f.grid.centroids(f.exponent).map(|c| c[pos]).unwrap_or(0.5)
}

/// Coordinate maps resampling the factor over one axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "map", rename_all = "snake_case")]
pub enum CoordinateMap {
    /// Compression by `k`: content at `x` moves to `x / k`; the result at
    /// `x` reads the input at `min(1, k x)`.
    Rescale { axis: AxisId, k: f64 },
    /// Translation: the result at `x` reads the input at `x - offset`
    /// (clamped to the axis).
    Shift { axis: AxisId, offset: f64 },
}

impl CoordinateMap {
    pub fn axis(&self) -> &AxisId {
        match self {
            CoordinateMap::Rescale { axis, .. } | CoordinateMap::Shift { axis, .. } => axis,
        }
    }

    fn source(&self, x: f64) -> f64 {
        match *self {
            CoordinateMap::Rescale { k, .. } => (k * x).min(1.0),
            CoordinateMap::Shift { offset, .. } => (x - offset).clamp(0.0, 1.0),
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        match *self {
            CoordinateMap::Rescale { k, .. } if !(k > 0.0 && k.is_finite()) => {
                Err(Error::InvalidOperator(format!("rescale factor {k} must be positive")))
            }
            CoordinateMap::Shift { offset, .. } if !offset.is_finite() => {
                Err(Error::InvalidOperator("shift offset must be finite".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Movement of one reference point: a quadratic Bézier displacement and a
/// piecewise-linear membership gain along the trajectory parameter `u`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub control: Vec<f64>,
    pub end: Vec<f64>,
    /// Knots `(u, gain)`; empty means unit gain.
    #[serde(default)]
    pub gain: Vec<(f64, f64)>,
}

impl Trajectory {
    pub fn still(dims: usize) -> Self {
        Trajectory { control: vec![0.0; dims], end: vec![0.0; dims], gain: Vec::new() }
    }

    pub fn displacement(&self, u: f64) -> Vec<f64> {
        self.control.iter().zip(&self.end).map(|(c, e)| 2.0 * (1.0 - u) * u * c + u * u * e).collect()
    }

    pub fn gain_at(&self, u: f64) -> f64 {
        if self.gain.is_empty() {
            1.0
        } else {
            crate::region::piecewise_linear(&self.gain, u)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum GeneralTransform {
    /// One trajectory per reference point of the target factor.
    Trajectories {
        moves: Vec<Trajectory>,
    },
    Coordinate {
        maps: Vec<CoordinateMap>,
    },
}

impl GeneralTransform {
    pub(crate) fn validate(&self) -> Result<()> {
        match self {
            GeneralTransform::Trajectories { .. } => Ok(()),
            GeneralTransform::Coordinate { maps } => maps.iter().try_for_each(CoordinateMap::validate),
        }
    }
}

pub fn apply_general_transform(region: &Region, target: &[AxisId], t: &GeneralTransform) -> Result<Region> {
    t.validate()?;
    if let Some(a) = target.iter().find(|a| !region.context().contains(a)) {
        return Err(Error::UnknownAxis(a.clone()));
    }
    match t {
        GeneralTransform::Coordinate { maps } => {
            let mut factors = region.factors().to_vec();
            for map in maps {
                if !region.context().contains(map.axis()) {
                    return Err(Error::UnknownAxis(map.axis().clone()));
                }
                // An axis with no factor is unconstrained and invariant.
                let Some(i) = factors.iter().position(|f| f.axes().contains(map.axis())) else {
                    continue;
                };
                let f = &factors[i];
                let pos = f.axes().iter().position(|a| a == map.axis()).unwrap_or(0);
                let grid = MembershipGrid::from_fn(f.axes().to_vec(), f.grid.resolution(), |c| {
                    let mut src = c.to_vec();
                    src[pos] = map.source(c[pos]);
                    f.grid.sample(&src)
                })?;
                factors[i] = Factor::new(grid, f.exponent);
            }
            region.rebuild(factors)
        }
        GeneralTransform::Trajectories { moves } => {
            let (inside, _) = region.split(target)?;
            let [factor] = inside.as_slice() else {
                return Err(Error::MissingFactor(target.first().cloned().unwrap_or_else(|| AxisId::new("?"))));
            };
            let source: &ReferencePoints = factor
                .grid
                .source()
                .ok_or_else(|| Error::InvalidOperator("trajectory transform needs a point-built factor".into()))?;
            if moves.len() != source.points.len() {
                return Err(Error::InvalidOperator(format!(
                    "{} trajectories for {} reference points",
                    moves.len(),
                    source.points.len()
                )));
            }
            let moved: Vec<RefPoint> = source
                .points
                .iter()
                .zip(moves)
                .map(|(p, m)| {
                    let d = m.displacement(1.0);
                    let coords = p
                        .coords
                        .iter()
                        .enumerate()
                        .map(|(i, c)| (c + d.get(i).copied().unwrap_or(0.0)).clamp(0.0, 1.0));
                    RefPoint::new(coords.collect::<Vec<_>>(), (p.membership * m.gain_at(1.0)).clamp(0.0, 1.0))
                })
                .collect();
            let grid = build_grid(factor.axes().to_vec(), &moved, factor.grid.resolution(), source.kernel)?;
            let factors = region
                .factors()
                .iter()
                .map(|f| if f == factor { Factor::new(grid.clone(), f.exponent) } else { f.clone() })
                .collect();
            region.rebuild(factors)
        }
    }
}
