//! Reflection extension across the boundary: even/odd/zero extensions and
//! the composite `v1^e + v2^{ze}` with `v1 = theta_rho v`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::covering::mollifier_theta;
use crate::field::{
    bmo_seminorm, holder_norm, l1_ul_norm, FieldError, Grid, HolderOptions, L1Region, Region, ScalarField,
    SeminormReport, Strategy,
};
use crate::geometry::{admissible_rho, Domain, GeometryError, Vec2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtensionError {
    #[error("point at distance {distance} is outside the reflection band {band}")]
    OutsideBand { distance: f64, band: f64 },
    #[error("invalid extension configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Mirror of `x` across the boundary along its normal ray. Works from
/// either side, so applying it twice returns `x`.
pub fn reflect_point(domain: &Domain, x: Vec2, band: f64) -> Result<Vec2, ExtensionError> {
    let d = domain.signed_distance(x)?;
    if !(d.abs() < band) {
        return Err(ExtensionError::OutsideBand { distance: d, band });
    }
    Ok(domain.mirror_point(x)?)
}

const SNAP: f64 = 1e-9;

/// Bilinear interpolation of the masked samples at `p`.
///
/// Fractional offsets within `1e-9` of a cell centre snap to it, so points
/// on the lattice read the sample itself. Stencil cells with zero weight are
/// ignored; unmasked cells borrow the value of the nearest masked stencil
/// cell. Returns `None` when no stencil cell is masked.
pub fn interpolate(field: &ScalarField, p: Vec2) -> Option<f64> {
    let g = field.grid;
    let locate = |t: f64| {
        let mut base = t.floor();
        let mut frac = t - base;
        if frac < SNAP {
            frac = 0.0;
        } else if frac > 1.0 - SNAP {
            base += 1.0;
            frac = 0.0;
        }
        (base as i64, frac)
    };
    let (i0, fx) = locate((p.x - g.x0) / g.h - 0.5);
    let (j0, fy) = locate((p.y - g.y0) / g.h - 0.5);
    let mut stencil = [(0i64, 0i64, 0.0f64, None::<f64>); 4];
    let mut n = 0;
    for (dj, wy) in [(0, 1.0 - fy), (1, fy)] {
        for (di, wx) in [(0, 1.0 - fx), (1, fx)] {
            let w = wx * wy;
            if w == 0.0 {
                continue;
            }
            let (i, j) = (i0 + di, j0 + dj);
            let v = (i >= 0 && j >= 0 && (i as usize) < g.nx && (j as usize) < g.ny)
                .then(|| field.get(i as usize, j as usize))
                .flatten();
            stencil[n] = (i, j, w, v);
            n += 1;
        }
    }
    let stencil = &stencil[..n];
    if stencil.iter().all(|s| s.3.is_some()) {
        return Some(stencil.iter().map(|s| s.2 * s.3.unwrap()).sum());
    }
    let mut full = Vec::with_capacity(4);
    for dj in 0..2 {
        for di in 0..2 {
            let (i, j) = (i0 + di, j0 + dj);
            if i >= 0 && j >= 0 && (i as usize) < g.nx && (j as usize) < g.ny {
                if let Some(v) = field.get(i as usize, j as usize) {
                    full.push((i, j, v));
                }
            }
        }
    }
    if full.is_empty() {
        return None;
    }
    Some(
        stencil
            .iter()
            .map(|&(i, j, w, v)| {
                let v = v.unwrap_or_else(|| {
                    full.iter().min_by_key(|c| (c.0 - i).pow(2) + (c.1 - j).pow(2)).map(|c| c.2).expect("non-empty")
                });
                w * v
            })
            .sum(),
    )
}

/// Extended field and the number of exterior cells whose interpolation
/// stencil had no masked sample (those cells are set to 0).
#[derive(Clone, Debug, PartialEq)]
pub struct Extended {
    pub field: ScalarField,
    pub failures: usize,
}

fn reflect_extend(field: &ScalarField, domain: &Domain, band: f64, sign: f64) -> Result<Extended, ExtensionError> {
    let g = field.grid;
    let updates: Vec<Option<(f64, bool)>> = (0..g.len())
        .into_par_iter()
        .map(|k| -> Result<_, ExtensionError> {
            let x = g.center_of(k);
            let d = domain.signed_distance(x)?;
            if d > 0.0 || -d >= band {
                return Ok(None);
            }
            let m = domain.mirror_point(x)?;
            Ok(Some(match interpolate(field, m) {
                Some(v) => (sign * v, false),
                None => (0.0, true),
            }))
        })
        .collect::<Result<_, _>>()?;
    let mut out = field.clone();
    let mut failures = 0;
    for (k, u) in updates.into_iter().enumerate() {
        if let Some((v, failed)) = u {
            out.set(k % g.nx, k / g.nx, v);
            failures += usize::from(failed);
        }
    }
    Ok(Extended { field: out, failures })
}

/// Even extension: exterior cells with `|d| < band` take the interpolated
/// value at their mirror point. Interior cells are unchanged.
pub fn even_extend(field: &ScalarField, domain: &Domain, band: f64) -> Result<Extended, ExtensionError> {
    reflect_extend(field, domain, band, 1.0)
}

/// Odd extension: as [`even_extend`] with the sign flipped outside.
pub fn odd_extend(field: &ScalarField, domain: &Domain, band: f64) -> Result<Extended, ExtensionError> {
    reflect_extend(field, domain, band, -1.0)
}

/// Copies the masked domain cells of `field` onto `target` (aligned with the
/// field grid) and sets every other cell to 0.
pub fn zero_extend(field: &ScalarField, domain: &Domain, target: &Grid) -> Result<ScalarField, ExtensionError> {
    let (oi, oj) = field
        .grid
        .offset_to(target)
        .ok_or_else(|| ExtensionError::InvalidConfig("target grid is not aligned with the field grid".into()))?;
    let mut out = ScalarField::zeros(*target);
    for j in 0..target.ny {
        for i in 0..target.nx {
            let (si, sj) = (i as i64 + oi, j as i64 + oj);
            if si < 0 || sj < 0 || si as usize >= field.grid.nx || sj as usize >= field.grid.ny {
                continue;
            }
            if let Some(v) = field.get(si as usize, sj as usize) {
                if domain.signed_distance(target.center(i, j))? > 0.0 {
                    out.set(i, j, v);
                }
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtensionConfig {
    /// Cutoff scale of `theta_rho`.
    pub rho: f64,
    /// Reflection band half-width; defaults to `2 rho`.
    #[serde(default)]
    pub band: Option<f64>,
    /// Chart deviation target used for the theorem threshold.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Output grid, aligned with the input grid; defaults to the input grid.
    #[serde(default)]
    pub target: Option<Grid>,
}

fn default_epsilon() -> f64 {
    0.1
}

impl ExtensionConfig {
    pub fn new(rho: f64) -> Self {
        Self { rho, band: None, epsilon: default_epsilon(), target: None }
    }

    pub fn band(&self) -> f64 {
        self.band.unwrap_or(2.0 * self.rho)
    }

    /// Checks `rho > 0` and `2 rho <= band <= R0`.
    pub fn validate(&self, domain: &Domain) -> Result<(), ExtensionError> {
        let band = self.band();
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(ExtensionError::InvalidConfig(format!("rho = {} must be positive", self.rho)));
        }
        if band < 2.0 * self.rho {
            return Err(ExtensionError::InvalidConfig(format!("band {band} is narrower than 2 rho")));
        }
        if band > domain.reach() {
            return Err(ExtensionError::InvalidConfig(format!("band {band} exceeds the reach {}", domain.reach())));
        }
        Ok(())
    }
}

/// Diagnostics of one extension run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtensionSummary {
    pub rho: f64,
    pub band: f64,
    /// `c* = c_eps / 64` for the configured epsilon.
    pub c_star: f64,
    /// Whether `rho < c*`, where the operator bound is guaranteed.
    pub below_threshold: bool,
    pub interpolation_failures: usize,
    pub support_violations: usize,
}

#[derive(Clone, Debug)]
pub struct ExtensionResult {
    /// `v` on domain cells, `v1^e` outside, 0 beyond `2 rho`.
    pub extended: ScalarField,
    /// Even extension of `v1 = theta_rho v`.
    pub v1_even: ScalarField,
    /// Zero extension of `v2 = v - v1`.
    pub v2_zero: ScalarField,
    pub config: ExtensionConfig,
    pub summary: ExtensionSummary,
}

/// Extends `v` (masked on domain cells) to the whole target grid.
pub fn bmo_extend(
    v: &ScalarField,
    domain: &Domain,
    config: &ExtensionConfig,
) -> Result<ExtensionResult, ExtensionError> {
    config.validate(domain)?;
    let rho = config.rho;
    let target = config.target.unwrap_or(v.grid);
    let (oi, oj) = v
        .grid
        .offset_to(&target)
        .ok_or_else(|| ExtensionError::InvalidConfig("target grid is not aligned with the field grid".into()))?;
    let gv = v.grid;

    let dist: Vec<f64> =
        (0..gv.len()).into_par_iter().map(|k| domain.signed_distance(gv.center_of(k))).collect::<Result<_, _>>()?;
    let mut v1 = ScalarField::empty(gv);
    let mut v2 = ScalarField::empty(gv);
    for k in 0..gv.len() {
        if let Some(val) = v.at(k) {
            if dist[k] > 0.0 {
                let t = mollifier_theta(dist[k] / rho);
                v1.set(k % gv.nx, k / gv.nx, t * val);
                v2.set(k % gv.nx, k / gv.nx, val - t * val);
            }
        }
    }

    let cells: Vec<(f64, f64, f64, bool)> = (0..target.len())
        .into_par_iter()
        .map(|k| -> Result<_, ExtensionError> {
            let x = target.center_of(k);
            let d = domain.signed_distance(x)?;
            let (si, sj) = ((k % target.nx) as i64 + oi, (k / target.nx) as i64 + oj);
            let src = (si >= 0 && sj >= 0 && (si as usize) < gv.nx && (sj as usize) < gv.ny)
                .then(|| gv.index(si as usize, sj as usize));
            if d > 0.0 {
                let val = src.and_then(|s| v.at(s));
                let a = src.and_then(|s| v1.at(s));
                let b = src.and_then(|s| v2.at(s));
                return Ok(match (val, a, b) {
                    (Some(val), Some(a), Some(b)) => (val, a, b, false),
                    _ => (0.0, 0.0, 0.0, true),
                });
            }
            if -d >= 2.0 * rho {
                return Ok((0.0, 0.0, 0.0, false));
            }
            let m = domain.mirror_point(x)?;
            Ok(match interpolate(&v1, m) {
                Some(e) => (e, e, 0.0, false),
                None => (0.0, 0.0, 0.0, true),
            })
        })
        .collect::<Result<_, _>>()?;

    let mut extended = ScalarField::zeros(target);
    let mut v1_even = ScalarField::zeros(target);
    let mut v2_zero = ScalarField::zeros(target);
    let mut failures = 0;
    for (k, &(e, a, b, failed)) in cells.iter().enumerate() {
        let (i, j) = (k % target.nx, k / target.nx);
        extended.set(i, j, e);
        v1_even.set(i, j, a);
        v2_zero.set(i, j, b);
        failures += usize::from(failed);
    }
    let c_star = admissible_rho(domain, config.epsilon)?.c_star;
    let support_violations = support_violations(&extended, domain, rho)?;
    Ok(ExtensionResult {
        extended,
        v1_even,
        v2_zero,
        config: *config,
        summary: ExtensionSummary {
            rho,
            band: config.band(),
            c_star,
            below_threshold: rho < c_star,
            interpolation_failures: failures,
            support_violations,
        },
    })
}

/// Number of nonzero cells at distance at least `2 rho + h` from the closed
/// domain.
pub fn support_violations(field: &ScalarField, domain: &Domain, rho: f64) -> Result<usize, ExtensionError> {
    let g = field.grid;
    let limit = 2.0 * rho + g.h;
    let n = (0..g.len())
        .into_par_iter()
        .map(|k| -> Result<usize, GeometryError> {
            match field.at(k) {
                Some(v) if v != 0.0 => Ok(usize::from((-domain.signed_distance(g.center_of(k))?).max(0.0) >= limit)),
                _ => Ok(0),
            }
        })
        .sum::<Result<usize, _>>()?;
    Ok(n)
}

/// Estimator settings shared by the norm comparisons.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormOptions {
    pub strategy: Strategy,
    pub l1_stride: usize,
    pub holder: HolderOptions,
}

impl Default for NormOptions {
    fn default() -> Self {
        Self {
            strategy: Strategy::strided(2, vec![1, 2, 4, 8, 16, 32]),
            l1_stride: 4,
            holder: HolderOptions::default(),
        }
    }
}

/// `[v]_{BMO^mu} + [v]_{L1_ul(band)}` with its two parts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalBmoNorm {
    pub bmo: SeminormReport,
    pub l1: SeminormReport,
    pub total: f64,
}

/// `||v||_{bmo^mu_delta}`: BMO over balls in `region`, L¹_ul over the inner
/// band of width `delta` (the whole field when `delta` is infinite).
pub fn local_bmo_norm(
    field: &ScalarField,
    domain: &Domain,
    region: Region,
    mu: f64,
    l1_region: L1Region,
    opts: &NormOptions,
) -> Result<LocalBmoNorm, ExtensionError> {
    let bmo = bmo_seminorm(field, domain, region, mu, &opts.strategy)?;
    let l1 = l1_ul_norm(field, domain, l1_region, opts.l1_stride)?;
    Ok(LocalBmoNorm { total: bmo.value + l1.value, bmo, l1 })
}

fn inner_band(delta: f64) -> L1Region {
    if delta.is_finite() {
        L1Region::InnerBand(delta)
    } else {
        L1Region::All
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductReport {
    pub gamma: f64,
    pub mu: f64,
    pub delta: f64,
    pub product_norm: f64,
    pub holder_norm: f64,
    pub field_norm: f64,
    /// `None` when the denominator vanishes.
    pub ratio: Option<f64>,
}

/// Empirical ratio `||phi v|| / (||phi||_{C^gamma} ||v||)` in `bmo^mu_delta`.
pub fn verify_product_estimate(
    phi: &ScalarField,
    v: &ScalarField,
    domain: &Domain,
    gamma: f64,
    mu: f64,
    delta: f64,
    opts: &NormOptions,
) -> Result<ProductReport, ExtensionError> {
    let pv = phi.product(v)?;
    let num = local_bmo_norm(&pv, domain, Region::Domain, mu, inner_band(delta), opts)?.total;
    let hn = holder_norm(phi, gamma, &opts.holder)?;
    let vn = local_bmo_norm(v, domain, Region::Domain, mu, inner_band(delta), opts)?.total;
    let den = hn * vn;
    Ok(ProductReport {
        gamma,
        mu,
        delta,
        product_norm: num,
        holder_norm: hn,
        field_norm: vn,
        ratio: (den > 0.0).then(|| num / den),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdmReport {
    pub rho: f64,
    pub mu: f64,
    pub delta: f64,
    /// `[v~]_{BMO^mu(R^2)}`.
    pub extended_bmo: f64,
    /// `[v~]_{L1_ul(two-sided band delta)}`.
    pub extended_l1: f64,
    /// `||v||_{bmo^mu_delta}`.
    pub input_norm: f64,
    pub ratio: Option<f64>,
    pub support_ok: bool,
    pub summary: ExtensionSummary,
}

/// Runs [`bmo_extend`] and compares the finite-parameter norms of the
/// extension with the input norm.
pub fn edm_extend_report(
    v: &ScalarField,
    domain: &Domain,
    mu: f64,
    delta: f64,
    rho: f64,
    opts: &NormOptions,
) -> Result<EdmReport, ExtensionError> {
    let ext = bmo_extend(v, domain, &ExtensionConfig::new(rho))?;
    let band = if delta.is_finite() { L1Region::TwoSidedBand(delta) } else { L1Region::All };
    let lhs = local_bmo_norm(&ext.extended, domain, Region::Whole, mu, band, opts)?;
    let rhs = local_bmo_norm(v, domain, Region::Domain, mu, inner_band(delta), opts)?;
    Ok(EdmReport {
        rho,
        mu,
        delta,
        extended_bmo: lhs.bmo.value,
        extended_l1: lhs.l1.value,
        input_norm: rhs.total,
        ratio: (rhs.total > 0.0).then(|| lhs.total / rhs.total),
        support_ok: ext.summary.support_violations == 0,
        summary: ext.summary,
    })
}
