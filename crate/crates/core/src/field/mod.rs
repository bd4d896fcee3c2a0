//! Cell-centred fields on uniform grids and the (semi)norm estimators built
//! on top of them.

mod quadrature;
mod seminorms;

pub use quadrature::{integrate_ball, integrate_window, lattice_mean_oscillation, mean_oscillation, Integrand};
pub(crate) use seminorms::lattice_half_widths;
pub use seminorms::{
    b_seminorm, bmo_seminorm, brute_force_oracle, composite_norms, holder_norm, l1_ul_norm, BOptions, BSide,
    CompositeNorms, HolderOptions, L1Region, Region, SeminormReport, Strategy, StrategyDescriptor, ORACLE_MAX_CELLS,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Domain, GeometryError, Rect, Vec2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("grid must have positive spacing and dimensions")]
    InvalidGrid,
    #[error("ball meets no masked cell")]
    EmptyIntersection,
    #[error("ball is not contained in the field region")]
    BallNotContained,
    #[error("no admissible ball for the requested scale")]
    NoAdmissibleBall,
    #[error("grid has {cells} cells, more than the oracle limit {limit}")]
    TooLarge { cells: usize, limit: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("parameter {name} = {value} is out of range")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Uniform grid with cell centres at `origin + (i + 1/2, j + 1/2) h`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x0: f64,
    pub y0: f64,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    pub fn new(x0: f64, y0: f64, h: f64, nx: usize, ny: usize) -> Result<Self, FieldError> {
        let g = Self { x0, y0, h, nx, ny };
        if !(h > 0.0 && h.is_finite() && x0.is_finite() && y0.is_finite() && nx > 0 && ny > 0) {
            return Err(FieldError::InvalidGrid);
        }
        Ok(g)
    }

    /// Grid whose cells tile `window` with spacing `h` (dimensions rounded
    /// to the nearest whole cell).
    pub fn covering(window: &Rect, h: f64) -> Result<Self, FieldError> {
        let nx = (window.width() / h).round() as usize;
        let ny = (window.height() / h).round() as usize;
        Self::new(window.min.x, window.min.y, h, nx, ny)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn center(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new(self.x0 + (i as f64 + 0.5) * self.h, self.y0 + (j as f64 + 0.5) * self.h)
    }

    #[inline]
    pub fn center_of(&self, k: usize) -> Vec2 {
        self.center(k % self.nx, k / self.nx)
    }

    /// Cell containing `p` (half-open cells), if any.
    pub fn cell_of(&self, p: Vec2) -> Option<(usize, usize)> {
        let u = ((p.x - self.x0) / self.h).floor();
        let v = ((p.y - self.y0) / self.h).floor();
        if u < 0.0 || v < 0.0 || u >= self.nx as f64 || v >= self.ny as f64 {
            return None;
        }
        Some((u as usize, v as usize))
    }

    pub fn window(&self) -> Rect {
        Rect::from_bounds(self.x0, self.x0 + self.nx as f64 * self.h, self.y0, self.y0 + self.ny as f64 * self.h)
    }

    /// Integer cell offset of `other` relative to `self`, when both grids
    /// share the spacing and their origins differ by whole cells.
    pub fn offset_to(&self, other: &Grid) -> Option<(i64, i64)> {
        if self.h != other.h {
            return None;
        }
        let di = (other.x0 - self.x0) / self.h;
        let dj = (other.y0 - self.y0) / self.h;
        let (ri, rj) = (di.round(), dj.round());
        if (di - ri).abs() > 1e-9 || (dj - rj).abs() > 1e-9 {
            return None;
        }
        Some((ri as i64, rj as i64))
    }
}

/// Closed ball `B_r(center)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec2,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec2, radius: f64) -> Self {
        debug_assert!(radius > 0.0);
        Self { center, radius }
    }
}

/// Cell samples with a membership mask. Unmasked cells hold `NaN`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    values: Vec<f64>,
    mask: Vec<bool>,
}

impl ScalarField {
    /// Fully unmasked field.
    pub fn empty(grid: Grid) -> Self {
        Self { grid, values: vec![f64::NAN; grid.len()], mask: vec![false; grid.len()] }
    }

    /// Field that is zero and masked on every cell.
    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![0.0; grid.len()], mask: vec![true; grid.len()] }
    }

    /// Builds a field from per-cell optional values; `None` leaves a cell
    /// unmasked.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(Vec2) -> Option<f64>) -> Self {
        let mut field = Self::empty(grid);
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                if let Some(v) = f(grid.center(i, j)) {
                    field.set(i, j, v);
                }
            }
        }
        field
    }

    /// Samples `f` on the cells whose centres lie in the domain (`d > 0`).
    pub fn sample_in(grid: Grid, domain: &Domain, f: impl Fn(Vec2) -> f64) -> Result<Self, FieldError> {
        let mut field = Self::empty(grid);
        for k in 0..grid.len() {
            let p = grid.center_of(k);
            if domain.signed_distance(p)? > 0.0 {
                field.values[k] = f(p);
                field.mask[k] = true;
            }
        }
        Ok(field)
    }

    /// Builds a field from raw parts; `NaN` entries of `values` are read as
    /// unmasked.
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self, FieldError> {
        if values.len() != grid.len() {
            return Err(FieldError::GridMismatch);
        }
        let mask = values.iter().map(|v| !v.is_nan()).collect();
        Ok(Self { grid, values, mask })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let k = self.grid.index(i, j);
        self.mask[k].then(|| self.values[k])
    }

    #[inline]
    pub fn at(&self, k: usize) -> Option<f64> {
        self.mask[k].then(|| self.values[k])
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.grid.index(i, j);
        self.values[k] = v;
        self.mask[k] = true;
    }

    #[inline]
    pub fn unset(&mut self, i: usize, j: usize) {
        let k = self.grid.index(i, j);
        self.values[k] = f64::NAN;
        self.mask[k] = false;
    }

    #[inline]
    pub fn is_masked(&self, i: usize, j: usize) -> bool {
        self.mask[self.grid.index(i, j)]
    }

    /// Raw values, `NaN` on unmasked cells.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn max_abs(&self) -> f64 {
        self.masked_values().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn masked_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().zip(&self.mask).filter(|(_, &m)| m).map(|(v, _)| *v)
    }

    /// Applies `f` to every masked value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let values = self.values.iter().zip(&self.mask).map(|(&v, &m)| if m { f(v) } else { f64::NAN }).collect();
        Self { grid: self.grid, values, mask: self.mask.clone() }
    }

    /// Applies `f(centre, value)` to every masked value.
    pub fn map_with_position(&self, f: impl Fn(Vec2, f64) -> f64) -> Self {
        let mut out = self.clone();
        for k in 0..self.grid.len() {
            if self.mask[k] {
                out.values[k] = f(self.grid.center_of(k), self.values[k]);
            }
        }
        out
    }

    /// `a self + b other` on the intersection of the masks.
    pub fn linear_combination(&self, a: f64, other: &Self, b: f64) -> Result<Self, FieldError> {
        if self.grid != other.grid {
            return Err(FieldError::GridMismatch);
        }
        let mut out = Self::empty(self.grid);
        for k in 0..self.grid.len() {
            if self.mask[k] && other.mask[k] {
                out.values[k] = a * self.values[k] + b * other.values[k];
                out.mask[k] = true;
            }
        }
        Ok(out)
    }

    /// Cellwise product on the intersection of the masks.
    pub fn product(&self, other: &Self) -> Result<Self, FieldError> {
        if self.grid != other.grid {
            return Err(FieldError::GridMismatch);
        }
        let mut out = Self::empty(self.grid);
        for k in 0..self.grid.len() {
            if self.mask[k] && other.mask[k] {
                out.values[k] = self.values[k] * other.values[k];
                out.mask[k] = true;
            }
        }
        Ok(out)
    }

    /// Keeps only the cells for which `keep(centre)` holds.
    pub fn restrict(&self, keep: impl Fn(Vec2) -> bool) -> Self {
        let mut out = self.clone();
        for k in 0..self.grid.len() {
            if out.mask[k] && !keep(self.grid.center_of(k)) {
                out.values[k] = f64::NAN;
                out.mask[k] = false;
            }
        }
        out
    }

    /// Max of `|self - other|` over cells masked in both.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64, FieldError> {
        if self.grid != other.grid {
            return Err(FieldError::GridMismatch);
        }
        Ok((0..self.grid.len())
            .filter(|&k| self.mask[k] && other.mask[k])
            .map(|k| (self.values[k] - other.values[k]).abs())
            .fold(0.0, f64::max))
    }
}

/// Two scalar components sharing one grid and one mask.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub u1: ScalarField,
    pub u2: ScalarField,
}

impl VectorField {
    pub fn new(u1: ScalarField, u2: ScalarField) -> Result<Self, FieldError> {
        if u1.grid != u2.grid || u1.mask != u2.mask {
            return Err(FieldError::GridMismatch);
        }
        Ok(Self { u1, u2 })
    }

    pub fn sample_in(grid: Grid, domain: &Domain, f: impl Fn(Vec2) -> Vec2) -> Result<Self, FieldError> {
        let u1 = ScalarField::sample_in(grid, domain, |p| f(p).x)?;
        let u2 = ScalarField::sample_in(grid, domain, |p| f(p).y)?;
        Self::new(u1, u2)
    }

    pub fn grid(&self) -> Grid {
        self.u1.grid
    }

    #[inline]
    pub fn at(&self, k: usize) -> Option<Vec2> {
        Some(Vec2::new(self.u1.at(k)?, self.u2.at(k)?))
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64, FieldError> {
        Ok(self.u1.max_abs_diff(&other.u1)?.max(self.u2.max_abs_diff(&other.u2)?))
    }
}
