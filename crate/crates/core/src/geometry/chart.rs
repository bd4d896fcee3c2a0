use serde::{Deserialize, Serialize};

use super::{BoundaryPoint, Domain, GeometryError, Vec2};

const BOUNDARY_NEWTON_ITER: usize = 50;

/// Normal coordinates around a boundary anchor `w0`.
///
/// `eta = (eta', eta_n)` maps to `x = p(eta') - eta_n n(p(eta'))`, where
/// `p(eta')` is the boundary point whose tangential coordinate relative to the
/// anchor is `eta'` and `n` is the outward normal. The inverse sends `x` to
/// `((pi x - w0) . t, d(x))`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct NormalChart {
    pub anchor: BoundaryPoint,
    pub rho: f64,
}

impl NormalChart {
    pub fn new(anchor: BoundaryPoint, rho: f64) -> Self {
        Self { anchor, rho }
    }

    /// Tangential chart coordinate of a point (normally a boundary point).
    #[inline]
    pub fn tangential(&self, p: Vec2) -> f64 {
        (p - self.anchor.position).dot(self.anchor.tangent)
    }

    /// Boundary point with tangential coordinate `s`: solves
    /// `d(w0 + s t + sigma grad d) = 0` for `sigma` by Newton's method.
    pub fn boundary_over(&self, domain: &Domain, s: f64) -> Result<BoundaryPoint, GeometryError> {
        let base = self.anchor.position + self.anchor.tangent * s;
        let up = self.anchor.inward();
        let mut sigma = 0.0;
        for _ in 0..BOUNDARY_NEWTON_ITER {
            let p = base + up * sigma;
            let d = domain.signed_distance(p)?;
            if d == 0.0 {
                return domain.project(p);
            }
            let slope = domain.project(p)?.inward().dot(up);
            if slope <= 0.0 {
                return Err(GeometryError::ChartDegenerate { tangential: s });
            }
            let step = d / slope;
            sigma -= step;
            if step.abs() <= 1e-15 * (1.0 + sigma.abs()) {
                return domain.project(base + up * sigma);
            }
        }
        Err(GeometryError::NewtonDiverged { iterations: BOUNDARY_NEWTON_ITER })
    }

    pub(crate) fn forward_unchecked(&self, domain: &Domain, eta: Vec2) -> Result<Vec2, GeometryError> {
        let p = self.boundary_over(domain, eta.x)?;
        Ok(p.position - p.normal * eta.y)
    }

    pub(crate) fn inverse_unchecked(&self, domain: &Domain, x: Vec2) -> Result<Vec2, GeometryError> {
        let d = domain.signed_distance(x)?;
        let bp = domain.project(x)?;
        Ok(Vec2::new(self.tangential(bp.position), d))
    }

    /// `F(eta)` for `eta` in `V_rho = (-rho, rho)^2`.
    pub fn forward(&self, domain: &Domain, eta: Vec2) -> Result<Vec2, GeometryError> {
        if !(eta.x.abs() < self.rho && eta.y.abs() < self.rho) {
            return Err(GeometryError::OutsideChart { eta, rho: self.rho });
        }
        self.forward_unchecked(domain, eta)
    }

    /// `F^{-1}(x)` for `x` in `U_rho(w0)`.
    pub fn inverse(&self, domain: &Domain, x: Vec2) -> Result<Vec2, GeometryError> {
        if !neighborhood_contains(domain, &self.anchor, self.rho, x) {
            return Err(GeometryError::NotInNeighborhood { point: x });
        }
        self.inverse_unchecked(domain, x)
    }
}

/// Membership in the normal-coordinate neighbourhood `U_rho(w0)`:
/// `|d(x)| < rho` and the tangential coordinate of `pi x` is below `rho`.
/// The projection must also stay within `2 rho` of the anchor, which keeps
/// the neighbourhood inside the anchor's local graph window (it separates
/// the two lines of a strip).
pub fn neighborhood_contains(domain: &Domain, w0: &BoundaryPoint, rho: f64, x: Vec2) -> bool {
    let Ok(d) = domain.signed_distance(x) else {
        return false;
    };
    if !(d.abs() < rho) {
        return false;
    }
    let Ok(bp) = domain.project(x) else {
        return false;
    };
    let offset = bp.position - w0.position;
    offset.dot(w0.tangent).abs() < rho && offset.norm() < 2.0 * rho
}

/// Measured chart distortion `max |grad F - I|` over `V_rho` and
/// `max |grad F^{-1} - I|` over `U_rho(w0)` (entrywise max norm).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ChartDeviation {
    pub forward: f64,
    pub inverse: f64,
}

impl ChartDeviation {
    pub fn max(&self) -> f64 {
        self.forward.max(self.inverse)
    }
}

/// Radical inverse of `i` in the given base (Halton sequence component).
pub(crate) fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Samples `V_rho` with a Halton sequence and measures the deviation of the
/// finite-difference Jacobians (step `1e-5 rho`) of `F` and `F^{-1}` from
/// the identity. Ambient points are written in the anchor frame
/// `(tangent, inward normal)`, so a straight boundary gives zero.
pub fn chart_deviation(
    domain: &Domain,
    w0: &BoundaryPoint,
    rho: f64,
    n_samples: usize,
) -> Result<ChartDeviation, GeometryError> {
    if !(rho > 0.0 && rho < domain.rho0()) {
        return Err(GeometryError::InvalidScale { rho, limit: domain.rho0() });
    }
    if n_samples == 0 {
        return Err(GeometryError::NoSamples);
    }
    let chart = NormalChart::new(*w0, rho);
    let (t, nu) = (w0.tangent, w0.inward());
    let frame = [[t.x, nu.x], [t.y, nu.y]];
    let step = 1e-5 * rho;
    // keep stencils inside the open box
    let half = rho * (1.0 - 1e-4);
    let mut dev = ChartDeviation { forward: 0.0, inverse: 0.0 };
    for k in 1..=n_samples as u64 {
        let eta = Vec2::new((2.0 * radical_inverse(k, 2) - 1.0) * half, (2.0 * radical_inverse(k, 3) - 1.0) * half);
        let jf = jacobian(|e| chart.forward_unchecked(domain, e), eta, step)?;
        dev.forward = dev.forward.max(identity_deviation(&mul(&transpose(&frame), &jf)));
        let x = chart.forward_unchecked(domain, eta)?;
        let ji = jacobian(|y| chart.inverse_unchecked(domain, y), x, step)?;
        dev.inverse = dev.inverse.max(identity_deviation(&mul(&ji, &frame)));
    }
    Ok(dev)
}

/// Central-difference Jacobian; `j[r][c] = d f_r / d x_c`.
pub(crate) fn jacobian(
    f: impl Fn(Vec2) -> Result<Vec2, GeometryError>,
    at: Vec2,
    step: f64,
) -> Result<[[f64; 2]; 2], GeometryError> {
    let ex = Vec2::new(step, 0.0);
    let ey = Vec2::new(0.0, step);
    let dx = (f(at + ex)? - f(at - ex)?) * (0.5 / step);
    let dy = (f(at + ey)? - f(at - ey)?) * (0.5 / step);
    Ok([[dx.x, dy.x], [dx.y, dy.y]])
}

type Mat2 = [[f64; 2]; 2];

fn mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[0.0; 2]; 2];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = a[r][0] * b[0][c] + a[r][1] * b[1][c];
        }
    }
    out
}

fn transpose(a: &Mat2) -> Mat2 {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

fn identity_deviation(j: &[[f64; 2]; 2]) -> f64 {
    let mut m: f64 = 0.0;
    for (r, row) in j.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            let id = if r == c { 1.0 } else { 0.0 };
            m = m.max((v - id).abs());
        }
    }
    m
}
