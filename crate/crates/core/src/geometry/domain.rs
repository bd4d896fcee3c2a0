use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{GeometryError, Rect, Vec2};

/// Number of coarse samples used to seed the Newton projection onto a graph boundary.
const COARSE_SAMPLES: usize = 64;
const NEWTON_MAX_ITER: usize = 50;
const NEWTON_STEP_TOL: f64 = 1e-12;

/// The closed catalog of boundary shapes.
///
/// Every shape knows its signed distance, nearest-point projection, curvature
/// bound and reach in closed form (or via Newton projection for the
/// perturbed strip), so the uniform-domain constants are exact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", content = "parameters", rename_all = "snake_case")]
pub enum Shape {
    /// `{x2 > level}`.
    HalfPlane {
        #[serde(default)]
        level: f64,
    },
    /// Open disk.
    Disk { center: Vec2, radius: f64 },
    /// `{lower < x2 < upper}`.
    Strip { lower: f64, upper: f64 },
    /// Region above the graph `x2 = amplitude * sin(2 pi x1 / wavelength) + offset`.
    PerturbedStrip {
        amplitude: f64,
        wavelength: f64,
        #[serde(default)]
        offset: f64,
    },
}

/// A point of the boundary together with its outward unit normal and the
/// tangent that makes `(tangent, -normal)` a positively oriented frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub position: Vec2,
    /// Outward unit normal `n`.
    pub normal: Vec2,
    pub tangent: Vec2,
}

impl BoundaryPoint {
    pub fn new(position: Vec2, normal: Vec2) -> Self {
        let inward = -normal;
        Self { position, normal, tangent: inward.perp_cw() }
    }

    /// `grad d` on the boundary, i.e. the inward normal.
    #[inline]
    pub fn inward(&self) -> Vec2 {
        -self.normal
    }
}

/// Nearest boundary point search result.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Closest {
    pub point: BoundaryPoint,
    pub distance: f64,
    pub ambiguous: bool,
}

/// An implicit planar domain: a catalog shape, optionally complemented.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    #[serde(flatten)]
    pub shape: Shape,
    /// When set the interior is the complement of the shape.
    #[serde(default)]
    pub complement: bool,
}

impl Domain {
    pub fn new(shape: Shape) -> Self {
        Self { shape, complement: false }
    }

    pub fn half_plane() -> Self {
        Self::new(Shape::HalfPlane { level: 0.0 })
    }

    pub fn disk(center: Vec2, radius: f64) -> Self {
        Self::new(Shape::Disk { center, radius })
    }

    pub fn strip(lower: f64, upper: f64) -> Self {
        Self::new(Shape::Strip { lower, upper })
    }

    pub fn perturbed_strip(amplitude: f64, wavelength: f64, offset: f64) -> Self {
        Self::new(Shape::PerturbedStrip { amplitude, wavelength, offset })
    }

    pub fn complemented(mut self) -> Self {
        self.complement = !self.complement;
        self
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let ok = match self.shape {
            Shape::HalfPlane { level } => level.is_finite(),
            Shape::Disk { center, radius } => center.is_finite() && radius.is_finite() && radius > 0.0,
            Shape::Strip { lower, upper } => lower.is_finite() && upper.is_finite() && upper > lower,
            Shape::PerturbedStrip { amplitude, wavelength, offset } => {
                amplitude.is_finite() && offset.is_finite() && wavelength.is_finite() && wavelength > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(GeometryError::InvalidShape(format!("{:?}", self.shape)))
        }
    }

    /// The same domain moved by `offset`.
    pub fn translated(&self, offset: Vec2) -> Self {
        let shape = match self.shape {
            Shape::HalfPlane { level } => Shape::HalfPlane { level: level + offset.y },
            Shape::Disk { center, radius } => Shape::Disk { center: center + offset, radius },
            Shape::Strip { lower, upper } => Shape::Strip { lower: lower + offset.y, upper: upper + offset.y },
            Shape::PerturbedStrip { amplitude, wavelength, offset: c } => {
                // Horizontal shifts are only exact for whole wavelengths.
                let turns = offset.x / wavelength;
                assert!(
                    (turns - turns.round()).abs() < 1e-12,
                    "perturbed strip can only be shifted horizontally by whole wavelengths"
                );
                Shape::PerturbedStrip { amplitude, wavelength, offset: c + offset.y }
            }
        };
        Self { shape, complement: self.complement }
    }

    #[inline]
    fn orient(&self) -> f64 {
        if self.complement {
            -1.0
        } else {
            1.0
        }
    }

    /// Signed distance: positive inside, negative outside, zero on the boundary.
    pub fn signed_distance(&self, x: Vec2) -> Result<f64, GeometryError> {
        if !x.is_finite() {
            return Err(GeometryError::NonFinitePoint);
        }
        let d = match self.shape {
            Shape::HalfPlane { level } => x.y - level,
            Shape::Disk { center, radius } => radius - (x - center).norm(),
            Shape::Strip { lower, upper } => (x.y - lower).min(upper - x.y),
            Shape::PerturbedStrip { .. } => {
                let c = self.closest_on_graph(x)?;
                let psi = self.graph_value(x.x);
                if x.y >= psi {
                    c.distance
                } else {
                    -c.distance
                }
            }
        };
        Ok(self.orient() * d)
    }

    /// Gradient of the signed distance at `x`, i.e. the inward normal at `pi x`.
    pub fn distance_gradient(&self, x: Vec2) -> Result<Vec2, GeometryError> {
        Ok(self.project(x)?.inward())
    }

    /// Nearest boundary point `pi x`, defined inside the reach band.
    pub fn project(&self, x: Vec2) -> Result<BoundaryPoint, GeometryError> {
        let c = self.closest(x)?;
        let reach = self.reach();
        if c.distance >= reach {
            return Err(GeometryError::OutsideReach { distance: c.distance, reach });
        }
        if c.ambiguous {
            return Err(GeometryError::AmbiguousProjection { point: x });
        }
        Ok(c.point)
    }

    pub(crate) fn closest(&self, x: Vec2) -> Result<Closest, GeometryError> {
        if !x.is_finite() {
            return Err(GeometryError::NonFinitePoint);
        }
        let s = self.orient();
        let mk = |position: Vec2, normal: Vec2, distance: f64, ambiguous: bool| Closest {
            point: BoundaryPoint::new(position, normal * s),
            distance,
            ambiguous,
        };
        Ok(match self.shape {
            Shape::HalfPlane { level } => mk(Vec2::new(x.x, level), Vec2::new(0.0, -1.0), (x.y - level).abs(), false),
            Shape::Disk { center, radius } => {
                let r = x - center;
                let rn = r.norm();
                if rn == 0.0 {
                    // Every boundary point is nearest; pick the north pole.
                    let n = Vec2::new(0.0, 1.0);
                    mk(center + n * radius, n, radius, true)
                } else {
                    let n = r * (1.0 / rn);
                    mk(center + n * radius, n, (radius - rn).abs(), false)
                }
            }
            Shape::Strip { lower, upper } => {
                let dl = (x.y - lower).abs();
                let du = (upper - x.y).abs();
                let ambiguous = x.y > lower && x.y < upper && dl == du;
                if dl <= du {
                    mk(Vec2::new(x.x, lower), Vec2::new(0.0, -1.0), dl, ambiguous)
                } else {
                    mk(Vec2::new(x.x, upper), Vec2::new(0.0, 1.0), du, ambiguous)
                }
            }
            Shape::PerturbedStrip { .. } => self.closest_on_graph(x)?,
        })
    }

    fn graph_params(&self) -> (f64, f64, f64) {
        match self.shape {
            Shape::PerturbedStrip { amplitude, wavelength, offset } => (amplitude, 2.0 * PI / wavelength, offset),
            _ => unreachable!("graph parameters requested for a non-graph shape"),
        }
    }

    /// `psi(s)` for the perturbed strip.
    pub(crate) fn graph_value(&self, s: f64) -> f64 {
        let (a, k, c) = self.graph_params();
        a * (k * s).sin() + c
    }

    /// Closest point on the graph `x2 = psi(x1)` by safeguarded Newton on the
    /// squared distance, seeded from the best of 64 coarse samples.
    fn closest_on_graph(&self, p: Vec2) -> Result<Closest, GeometryError> {
        let (a, k, c) = self.graph_params();
        let psi = |s: f64| a * (k * s).sin() + c;
        let dpsi = |s: f64| a * k * (k * s).cos();
        let ddpsi = |s: f64| -a * k * k * (k * s).sin();
        let dist2 = |s: f64| {
            let dx = p.x - s;
            let dy = p.y - psi(s);
            dx * dx + dy * dy
        };
        let orient = self.orient();
        let make = |s: f64, ambiguous: bool| {
            let slope = dpsi(s);
            let normal = Vec2::new(slope, -1.0).normalized() * orient;
            Closest { point: BoundaryPoint::new(Vec2::new(s, psi(s)), normal), distance: dist2(s).sqrt(), ambiguous }
        };

        let vertical = (p.y - psi(p.x)).abs();
        if vertical == 0.0 {
            return Ok(make(p.x, false));
        }
        // The minimiser lies within the vertical distance of p.x.
        let lo = p.x - vertical;
        let step = 2.0 * vertical / (COARSE_SAMPLES - 1) as f64;
        let samples: Vec<(f64, f64)> = (0..COARSE_SAMPLES)
            .map(|i| {
                let s = lo + step * i as f64;
                (s, dist2(s))
            })
            .collect();

        // Local minima of the sampled squared distance, best first.
        let mut minima: Vec<usize> = (0..COARSE_SAMPLES)
            .filter(|&i| {
                let left = i == 0 || samples[i].1 <= samples[i - 1].1;
                let right = i + 1 == COARSE_SAMPLES || samples[i].1 <= samples[i + 1].1;
                left && right
            })
            .collect();
        minima.sort_by(|&i, &j| samples[i].1.total_cmp(&samples[j].1).then(i.cmp(&j)));
        minima.dedup_by(|a, b| a.abs_diff(*b) <= 1);

        let refine = |i: usize| -> Result<f64, GeometryError> {
            let a0 = samples[i.saturating_sub(1)].0;
            let b0 = samples[(i + 1).min(COARSE_SAMPLES - 1)].0;
            newton_minimise(samples[i].0, a0, b0, |s| {
                let dx = p.x - s;
                let dy = p.y - psi(s);
                let d1 = dpsi(s);
                let g1 = -2.0 * dx - 2.0 * dy * d1;
                let g2 = 2.0 + 2.0 * d1 * d1 - 2.0 * dy * ddpsi(s);
                (g1, g2)
            })
        };

        let best = refine(minima[0])?;
        let mut ambiguous = false;
        if let Some(&second) = minima.get(1) {
            let alt = refine(second)?;
            let (d_best, d_alt) = (dist2(best).sqrt(), dist2(alt).sqrt());
            if (alt - best).abs() > 1e-6 && (d_best - d_alt).abs() <= 1e-9 {
                ambiguous = true;
            }
            if d_alt < d_best {
                return Ok(make(alt, ambiguous));
            }
        }
        Ok(make(best, ambiguous))
    }

    /// Upper bound on the second derivative of the local boundary graphs.
    pub fn curvature_bound(&self) -> f64 {
        match self.shape {
            Shape::HalfPlane { .. } | Shape::Strip { .. } => 0.0,
            Shape::Disk { radius, .. } => 1.0 / radius,
            Shape::PerturbedStrip { amplitude, wavelength, .. } => {
                let k = 2.0 * PI / wavelength;
                amplitude.abs() * k * k
            }
        }
    }

    /// Reach of the boundary, the smaller of the interior and exterior reaches.
    pub fn reach(&self) -> f64 {
        match self.shape {
            Shape::HalfPlane { .. } => f64::INFINITY,
            Shape::Disk { radius, .. } => radius,
            Shape::Strip { lower, upper } => 0.5 * (upper - lower),
            Shape::PerturbedStrip { .. } => {
                let l = self.curvature_bound();
                if l > 0.0 {
                    1.0 / l
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Local graph window sizes `(r_*, delta_*)`.
    pub fn graph_windows(&self) -> (f64, f64) {
        match self.shape {
            Shape::HalfPlane { .. } => (f64::INFINITY, f64::INFINITY),
            Shape::Disk { radius, .. } => (0.5 * radius, 0.5 * radius),
            Shape::Strip { lower, upper } => (f64::INFINITY, 0.5 * (upper - lower)),
            Shape::PerturbedStrip { wavelength, .. } => (0.25 * wavelength, self.reach()),
        }
    }

    /// Chart band half-width: half of `min{r_*, delta_*, R_0, 1}`.
    pub fn rho0(&self) -> f64 {
        let (r, delta) = self.graph_windows();
        0.5 * r.min(delta).min(self.reach()).min(1.0)
    }

    /// Boundary points inside `window`, spaced roughly `spacing` apart along
    /// the boundary, in a deterministic order.
    pub fn boundary_samples(&self, window: &Rect, spacing: f64) -> Vec<Vec2> {
        assert!(spacing > 0.0);
        let line = |y: f64, out: &mut Vec<Vec2>| {
            if y < window.min.y || y > window.max.y {
                return;
            }
            let n = (window.width() / spacing).floor() as usize;
            for i in 0..=n {
                out.push(Vec2::new(window.min.x + i as f64 * spacing, y));
            }
        };
        let mut out = Vec::new();
        match self.shape {
            Shape::HalfPlane { level } => line(level, &mut out),
            Shape::Strip { lower, upper } => {
                line(lower, &mut out);
                line(upper, &mut out);
            }
            Shape::Disk { center, radius } => {
                let n = ((2.0 * PI * radius / spacing).ceil() as usize).max(8);
                for i in 0..n {
                    let t = 2.0 * PI * i as f64 / n as f64;
                    let p = center + Vec2::new(t.cos(), t.sin()) * radius;
                    if window.contains(p) {
                        out.push(p);
                    }
                }
            }
            Shape::PerturbedStrip { .. } => {
                // Arclength is at most sqrt(1 + (a k)^2) per unit of x1.
                let (a, k, _) = self.graph_params();
                let dx = spacing / (1.0 + (a * k).powi(2)).sqrt();
                let n = (window.width() / dx).floor() as usize;
                for i in 0..=n {
                    let s = window.min.x + i as f64 * dx;
                    let p = Vec2::new(s, self.graph_value(s));
                    if window.contains(p) {
                        out.push(p);
                    }
                }
            }
        }
        out
    }

    /// Mirror image of `x` across the boundary along its normal ray:
    /// `pi x + d(x) n(pi x)`.
    pub fn mirror_point(&self, x: Vec2) -> Result<Vec2, GeometryError> {
        let d = self.signed_distance(x)?;
        let bp = self.project(x)?;
        Ok(bp.position + bp.normal * d)
    }
}

/// Safeguarded Newton iteration for a unimodal minimisation on `[a, b]`.
/// `derivs` returns the first and second derivative of the objective.
fn newton_minimise(
    start: f64,
    mut a: f64,
    mut b: f64,
    derivs: impl Fn(f64) -> (f64, f64),
) -> Result<f64, GeometryError> {
    let mut s = start;
    for _ in 0..NEWTON_MAX_ITER {
        let (g1, g2) = derivs(s);
        if g1 == 0.0 {
            return Ok(s);
        }
        if g1 > 0.0 {
            b = s;
        } else {
            a = s;
        }
        let mut next = if g2 > 0.0 { s - g1 / g2 } else { f64::NAN };
        if !(next >= a && next <= b) {
            next = 0.5 * (a + b);
        }
        let step = next - s;
        s = next;
        if step.abs() < NEWTON_STEP_TOL * (1.0 + s.abs()) {
            return Ok(s);
        }
    }
    Err(GeometryError::NewtonDiverged { iterations: NEWTON_MAX_ITER })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn closed_form_distances() {
        let hp = Domain::half_plane();
        assert_eq!(hp.signed_distance(Vec2::new(0.3, 0.7)).unwrap(), 0.7);
        let disk = Domain::disk(Vec2::ZERO, 1.0);
        assert_eq!(disk.signed_distance(Vec2::new(0.0, 0.5)).unwrap(), 0.5);
        assert_eq!(disk.signed_distance(Vec2::new(0.0, 1.5)).unwrap(), -0.5);
        let strip = Domain::strip(0.0, 1.0);
        assert!(close(strip.signed_distance(Vec2::new(5.0, 0.2)).unwrap(), 0.2, 1e-15));
        assert!(close(strip.signed_distance(Vec2::new(5.0, -0.3)).unwrap(), -0.3, 1e-15));
        assert!(close(strip.signed_distance(Vec2::new(5.0, 1.25)).unwrap(), -0.25, 1e-15));
    }

    #[test]
    fn complement_flips_sign_and_normal() {
        let d = Domain::disk(Vec2::ZERO, 1.0).complemented();
        assert_eq!(d.signed_distance(Vec2::new(0.0, 1.5)).unwrap(), 0.5);
        let bp = d.project(Vec2::new(0.0, 1.5)).unwrap();
        assert_eq!(bp.normal, Vec2::new(0.0, -1.0));
    }

    #[test]
    fn projections() {
        let disk = Domain::disk(Vec2::ZERO, 1.0);
        let bp = disk.project(Vec2::new(0.0, 0.5)).unwrap();
        assert_eq!(bp.position, Vec2::new(0.0, 1.0));
        assert_eq!(bp.normal, Vec2::new(0.0, 1.0));
        let hp = Domain::half_plane();
        let bp = hp.project(Vec2::new(0.4, -2.0)).unwrap();
        assert_eq!(bp.position, Vec2::new(0.4, 0.0));
        assert_eq!(bp.tangent, Vec2::new(1.0, 0.0));
        assert!(matches!(
            disk.project(Vec2::ZERO),
            Err(GeometryError::OutsideReach { .. }) | Err(GeometryError::AmbiguousProjection { .. })
        ));
    }

    #[test]
    fn strip_midline_is_outside_reach() {
        let strip = Domain::strip(0.0, 1.0);
        assert!(strip.project(Vec2::new(0.0, 0.5)).is_err());
        assert!(strip.project(Vec2::new(0.0, 0.49)).is_ok());
    }

    #[test]
    fn perturbed_projection_is_orthogonal() {
        let d = Domain::perturbed_strip(0.05, 2.0, 0.0);
        for &(x, y) in &[(0.1, 0.02), (0.37, -0.3), (1.2, 0.6), (-0.8, 0.1)] {
            let p = Vec2::new(x, y);
            let bp = d.project(p).unwrap();
            let r = p - bp.position;
            // residual is parallel to the normal
            assert!(r.dot(bp.tangent).abs() < 1e-12, "{r:?} {bp:?}");
            let dist = d.signed_distance(p).unwrap();
            assert!(close(r.norm(), dist.abs(), 1e-12));
            // p = pi p - d n
            let back = bp.position - bp.normal * dist;
            assert!(back.distance(p) < 1e-12);
        }
    }

    #[test]
    fn perturbed_flat_matches_half_plane() {
        let d = Domain::perturbed_strip(0.0, 2.0, 0.0);
        let p = Vec2::new(0.3, -0.4);
        assert!(close(d.signed_distance(p).unwrap(), -0.4, 1e-14));
    }

    #[test]
    fn constants_of_catalog() {
        assert_eq!(Domain::half_plane().rho0(), 0.5);
        assert_eq!(Domain::disk(Vec2::ZERO, 1.0).rho0(), 0.25);
        assert_eq!(Domain::strip(0.0, 1.0).rho0(), 0.25);
        assert_eq!(Domain::strip(0.0, 1.0).reach(), 0.5);
        let p = Domain::perturbed_strip(0.05, 2.0, 0.0);
        assert!(close(p.curvature_bound(), 0.05 * PI * PI, 1e-15));
        assert!(p.rho0() > 0.0 && p.rho0() < p.reach());
    }

    #[test]
    fn mirror_across_catalog() {
        let hp = Domain::half_plane();
        assert_eq!(hp.mirror_point(Vec2::new(0.3, -0.2)).unwrap(), Vec2::new(0.3, 0.2));
        let disk = Domain::disk(Vec2::ZERO, 1.0);
        let m = disk.mirror_point(Vec2::new(0.0, 1.1)).unwrap();
        assert!(m.distance(Vec2::new(0.0, 0.9)) < 1e-15);
        let strip = Domain::strip(0.0, 1.0);
        let m = strip.mirror_point(Vec2::new(5.0, 1.05)).unwrap();
        assert!(m.distance(Vec2::new(5.0, 0.95)) < 1e-15);
    }

    #[test]
    fn config_round_trip() {
        let d = Domain::perturbed_strip(0.05, 2.0, 0.5);
        let text = toml::to_string(&d).unwrap();
        let back: Domain = toml::from_str(&text).unwrap();
        assert_eq!(back, d);
        let parsed: Domain =
            toml::from_str("shape = \"disk\"\ncomplement = true\n[parameters]\ncenter = [0.0, 1.0]\nradius = 2.0\n")
                .unwrap();
        assert_eq!(parsed, Domain::disk(Vec2::new(0.0, 1.0), 2.0).complemented());
    }
}
