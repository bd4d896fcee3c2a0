use serde::{Deserialize, Serialize};

use super::{Domain, GeometryError};

/// Spatial dimension of every field computation in this crate.
pub const DIM: u32 = 2;

/// Uniform constants of a domain and the admissible chart scales derived
/// from them.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryConstants {
    pub curvature_bound: f64,
    pub r_star: f64,
    pub delta_star: f64,
    pub rho0: f64,
    pub reach: f64,
    pub epsilon: f64,
    /// `min{eps / (L ((n+1)!)^2 2^{2n+5}), rho0/2}`; the first argument is
    /// infinite when the boundary is flat.
    pub c_eps: f64,
    /// Same threshold with the `2^{2n+4}` denominator and `rho0` cap; kept
    /// for comparison only, `c_eps` is the smaller and is used throughout.
    pub c_eps_alt: f64,
    /// Extension threshold, `c_eps / 64`.
    pub c_star: f64,
    /// Vector extension threshold, `c_eps / 96`.
    pub c_star_star: f64,
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Evaluates the admissible chart scale `c_eps` and the derived extension
/// thresholds for `domain`.
pub fn admissible_rho(domain: &Domain, epsilon: f64) -> Result<GeometryConstants, GeometryError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(GeometryError::InvalidEpsilon(epsilon));
    }
    domain.validate()?;
    let l = domain.curvature_bound();
    let rho0 = domain.rho0();
    let (r_star, delta_star) = domain.graph_windows();
    let f = factorial(DIM + 1);
    let curvature_limit = |exp: i32| {
        if l > 0.0 {
            epsilon / (l * f * f * 2f64.powi(exp))
        } else {
            f64::INFINITY
        }
    };
    let c_eps = curvature_limit(2 * DIM as i32 + 5).min(0.5 * rho0);
    let c_eps_alt = curvature_limit(2 * DIM as i32 + 4).min(rho0);
    Ok(GeometryConstants {
        curvature_bound: l,
        r_star,
        delta_star,
        rho0,
        reach: domain.reach(),
        epsilon,
        c_eps,
        c_eps_alt,
        c_star: c_eps / 64.0,
        c_star_star: c_eps / 96.0,
    })
}

/// The overlap bound `24^n n^{n/2}` of the dyadic boundary cover.
pub fn overlap_bound() -> usize {
    let n = DIM as f64;
    (24f64.powf(n) * n.powf(n / 2.0)).round() as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;

    #[test]
    fn flat_boundary_uses_rho0() {
        let c = admissible_rho(&Domain::half_plane(), 0.1).unwrap();
        assert_eq!(c.rho0, 0.5);
        assert_eq!(c.c_eps, 0.25);
    }

    #[test]
    fn unit_disk_threshold() {
        let c = admissible_rho(&Domain::disk(Vec2::ZERO, 1.0), 0.1).unwrap();
        // 0.1 / (36 * 512)
        assert!((c.c_eps - 0.1 / 18432.0).abs() < 1e-18);
        assert!((c.c_eps - 5.4253e-6).abs() < 1e-9);
        assert!(c.c_eps <= c.c_eps_alt);
    }

    #[test]
    fn thresholds_ordered() {
        for d in [
            Domain::half_plane(),
            Domain::disk(Vec2::ZERO, 2.0),
            Domain::strip(0.0, 1.0),
            Domain::perturbed_strip(0.05, 2.0, 0.0),
        ] {
            let c = admissible_rho(&d, 0.3).unwrap();
            assert!(c.c_star <= c.c_eps / 64.0);
            assert!(c.c_star_star <= c.c_eps / 96.0);
            assert!(c.rho0 > 0.0 && c.rho0 < c.r_star.min(c.delta_star).min(c.reach).min(1.0));
        }
    }

    #[test]
    fn epsilon_range() {
        assert!(admissible_rho(&Domain::half_plane(), 0.0).is_err());
        assert!(admissible_rho(&Domain::half_plane(), 1.0).is_err());
    }

    #[test]
    fn overlap_bound_in_the_plane() {
        assert_eq!(overlap_bound(), 1152);
    }
}
