//! Implicit planar domains: signed distance, nearest-point projection,
//! normal-coordinate charts and the uniform chart constants.
//!
//! Sign conventions: `d > 0` inside the domain, the normal `n` points
//! outward, so `x = pi x - d(x) n(pi x)` and `grad d = -n`.

mod chart;
mod constants;
mod domain;
mod vec2;

pub use chart::{chart_deviation, neighborhood_contains, ChartDeviation, NormalChart};
pub use constants::{admissible_rho, overlap_bound, GeometryConstants, DIM};
pub use domain::{BoundaryPoint, Domain, Shape};
pub use vec2::{Rect, Vec2};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point has non-finite coordinates")]
    NonFinitePoint,
    #[error("invalid shape parameters: {0}")]
    InvalidShape(String),
    #[error("newton projection did not converge after {iterations} iterations")]
    NewtonDiverged { iterations: usize },
    #[error("point at distance {distance} is outside the reach {reach}")]
    OutsideReach { distance: f64, reach: f64 },
    #[error("projection of {point:?} is not unique")]
    AmbiguousProjection { point: Vec2 },
    #[error("chart coordinate {eta:?} outside V_rho with rho = {rho}")]
    OutsideChart { eta: Vec2, rho: f64 },
    #[error("point {point:?} is not in the chart neighbourhood")]
    NotInNeighborhood { point: Vec2 },
    #[error("chart degenerates at tangential coordinate {tangential}")]
    ChartDegenerate { tangential: f64 },
    #[error("scale {rho} must lie in (0, {limit})")]
    InvalidScale { rho: f64, limit: f64 },
    #[error("epsilon {0} must lie in (0, 1)")]
    InvalidEpsilon(f64),
    #[error("at least one sample is required")]
    NoSamples,
}
