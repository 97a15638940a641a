//! Contexts, axes and fuzzy regions.

mod axis;
mod fuzzy;
mod grid;

pub use axis::{Axis, AxisId, AxisKind, Context, ContextId, Point, MAX_CONTEXT_AXES};
pub use fuzzy::{expand_axis, weighted_product, Factor, Region, RegionStats};
#[allow(unused_imports)]
pub(crate) use fuzzy::{Evaluator, JointGrid};
pub(crate) use grid::piecewise_linear;
pub use grid::{build_grid, quantize, Kernel, MembershipGrid, RefPoint, ReferencePoints, DEFAULT_RESOLUTION};
