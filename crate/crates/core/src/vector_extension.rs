//! Normal/tangential splitting of vector fields and the extension that is
//! odd in the normal component and even in the tangential one.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covering::mollifier_theta;
use crate::extension::{
    interpolate, local_bmo_norm, support_violations, ExtensionConfig, ExtensionError, ExtensionSummary, LocalBmoNorm,
    NormOptions,
};
use crate::field::{b_seminorm, BOptions, BSide, L1Region, Region, ScalarField, SeminormReport, VectorField};
use crate::geometry::{admissible_rho, Domain, Vec2};

/// `P u = (grad d . u) grad d` and `Q u = u - P u`, masked on the cells of
/// `u` that lie within the reach, where `grad d` is a unit vector.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitField {
    pub normal_part: VectorField,
    pub tangential_part: VectorField,
}

fn in_reach(domain: &Domain, x: Vec2) -> Result<bool, ExtensionError> {
    Ok(domain.signed_distance(x)?.abs() < domain.reach())
}

pub fn normal_tangential_split(u: &VectorField, domain: &Domain) -> Result<SplitField, ExtensionError> {
    let g = u.grid();
    let parts: Vec<Option<(Vec2, Vec2)>> = (0..g.len())
        .into_par_iter()
        .map(|k| -> Result<_, ExtensionError> {
            let x = g.center_of(k);
            let Some(val) = u.at(k) else { return Ok(None) };
            if !in_reach(domain, x)? {
                return Ok(None);
            }
            let nu = domain.distance_gradient(x)?;
            let p = nu * nu.dot(val);
            Ok(Some((p, val - p)))
        })
        .collect::<Result<_, _>>()?;
    let mut pn = [ScalarField::empty(g), ScalarField::empty(g)];
    let mut qt = [ScalarField::empty(g), ScalarField::empty(g)];
    for (k, part) in parts.into_iter().enumerate() {
        if let Some((p, q)) = part {
            let (i, j) = (k % g.nx, k / g.nx);
            pn[0].set(i, j, p.x);
            pn[1].set(i, j, p.y);
            qt[0].set(i, j, q.x);
            qt[1].set(i, j, q.y);
        }
    }
    let [p1, p2] = pn;
    let [q1, q2] = qt;
    Ok(SplitField { normal_part: VectorField::new(p1, p2)?, tangential_part: VectorField::new(q1, q2)? })
}

/// `grad d . u` on the cells of `u` within the reach.
pub fn normal_component(u: &VectorField, domain: &Domain) -> Result<ScalarField, ExtensionError> {
    let g = u.grid();
    let values: Vec<f64> = (0..g.len())
        .into_par_iter()
        .map(|k| -> Result<f64, ExtensionError> {
            let x = g.center_of(k);
            match u.at(k) {
                Some(val) if in_reach(domain, x)? => Ok(domain.distance_gradient(x)?.dot(val)),
                _ => Ok(f64::NAN),
            }
        })
        .collect::<Result<_, _>>()?;
    Ok(ScalarField::from_values(g, values)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VbmoReport {
    /// `bmo` norm of each component.
    pub components: [LocalBmoNorm; 2],
    /// `[grad d . u]_{b^nu}`.
    pub normal_b: SeminormReport,
    pub total: f64,
}

/// `||u_1||_{bmo} + ||u_2||_{bmo} + [grad d . u]_{b^nu}`.
///
/// Domain fields use `BMO^inf(Omega) + L1_ul(Omega)` per component; with
/// `region = Whole` the component norms are taken over the whole grid.
pub fn vbmo_norm(
    u: &VectorField,
    domain: &Domain,
    region: Region,
    nu: Option<f64>,
    opts: &NormOptions,
    b_opts: &BOptions,
) -> Result<VbmoReport, ExtensionError> {
    let c1 = local_bmo_norm(&u.u1, domain, region, f64::INFINITY, L1Region::All, opts)?;
    let c2 = local_bmo_norm(&u.u2, domain, region, f64::INFINITY, L1Region::All, opts)?;
    let normal = normal_component(u, domain)?;
    let normal_b = if normal.masked_count() == 0 {
        b_seminorm(&ScalarField::zeros(u.grid()), domain, nu, b_opts)?
    } else {
        b_seminorm(&normal, domain, nu, b_opts)?
    };
    Ok(VbmoReport { total: c1.total + c2.total + normal_b.value, components: [c1, c2], normal_b })
}

#[derive(Clone, Debug)]
pub struct VectorExtensionResult {
    pub extended: VectorField,
    pub config: ExtensionConfig,
    pub summary: ExtensionSummary,
}

/// Extends `u` (masked on domain cells) to its grid.
///
/// With `u1 = theta_rho u` read at the mirror point `m` of an exterior cell
/// `x` (`|d(x)| < 2 rho`), the extension is `P u1^o + Q u1^e`, both
/// projections using `grad d(x)`: the normal component flips sign, the
/// tangential one is kept. Domain cells copy `u`; everything else is 0.
pub fn vbmo_extend(
    u: &VectorField,
    domain: &Domain,
    config: &ExtensionConfig,
) -> Result<VectorExtensionResult, ExtensionError> {
    config.validate(domain)?;
    if config.target.is_some_and(|t| t != u.grid()) {
        return Err(ExtensionError::InvalidConfig("vector extension runs on the input grid".into()));
    }
    let rho = config.rho;
    let g = u.grid();
    let dist: Vec<f64> =
        (0..g.len()).into_par_iter().map(|k| domain.signed_distance(g.center_of(k))).collect::<Result<_, _>>()?;
    let cut = |k: usize, c: &ScalarField| c.at(k).filter(|_| dist[k] > 0.0).map(|v| mollifier_theta(dist[k] / rho) * v);
    let u1 = [&u.u1, &u.u2].map(|c| {
        let values = (0..g.len()).map(|k| cut(k, c).unwrap_or(f64::NAN)).collect();
        ScalarField::from_values(g, values).expect("grid length")
    });

    let cells: Vec<(Vec2, bool)> = (0..g.len())
        .into_par_iter()
        .map(|k| -> Result<_, ExtensionError> {
            let d = dist[k];
            if d > 0.0 {
                return Ok(match u.at(k) {
                    Some(v) => (v, false),
                    None => (Vec2::ZERO, true),
                });
            }
            if -d >= 2.0 * rho {
                return Ok((Vec2::ZERO, false));
            }
            let x = g.center_of(k);
            let m = domain.mirror_point(x)?;
            let (Some(a), Some(b)) = (interpolate(&u1[0], m), interpolate(&u1[1], m)) else {
                return Ok((Vec2::ZERO, true));
            };
            let uu = Vec2::new(a, b);
            let nu = domain.distance_gradient(x)?;
            let s = nu.dot(uu);
            let normal_odd = nu * (-s);
            let tangential_even = uu - nu * s;
            Ok((normal_odd + tangential_even, false))
        })
        .collect::<Result<_, _>>()?;
    let mut e1 = ScalarField::zeros(g);
    let mut e2 = ScalarField::zeros(g);
    let mut failures = 0;
    for (k, &(v, failed)) in cells.iter().enumerate() {
        let (i, j) = (k % g.nx, k / g.nx);
        e1.set(i, j, v.x);
        e2.set(i, j, v.y);
        failures += usize::from(failed);
    }
    let violations = support_violations(&e1, domain, rho)? + support_violations(&e2, domain, rho)?;
    let c_star_star = admissible_rho(domain, config.epsilon)?.c_star_star;
    Ok(VectorExtensionResult {
        extended: VectorField::new(e1, e2)?,
        config: *config,
        summary: ExtensionSummary {
            rho,
            band: config.band(),
            c_star: c_star_star,
            below_threshold: rho < c_star_star,
            interpolation_failures: failures,
            support_violations: violations,
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VectorExtensionReport {
    pub summary: ExtensionSummary,
    /// `||u||_{vbmo}` of the input.
    pub input_norm: f64,
    /// `||u~_1||_{bmo} + ||u~_2||_{bmo}` over the whole grid.
    pub extended_bmo: f64,
    /// `[grad d . u~]_{b^inf}` with boundary balls on both sides.
    pub extended_normal_b: f64,
    pub ratio: Option<f64>,
}

pub fn vbmo_extend_report(
    u: &VectorField,
    domain: &Domain,
    config: &ExtensionConfig,
    opts: &NormOptions,
    b_opts: &BOptions,
) -> Result<(VectorExtensionResult, VectorExtensionReport), ExtensionError> {
    let ext = vbmo_extend(u, domain, config)?;
    let input = vbmo_norm(u, domain, Region::Domain, None, opts, b_opts)?;
    let both = BOptions { side: BSide::Both, ..b_opts.clone() };
    let out = vbmo_norm(&ext.extended, domain, Region::Whole, None, opts, &both)?;
    let extended_bmo = out.components[0].total + out.components[1].total;
    let report = VectorExtensionReport {
        summary: ext.summary.clone(),
        input_norm: input.total,
        extended_bmo,
        extended_normal_b: out.normal_b.value,
        ratio: (input.total > 0.0).then(|| out.total / input.total),
    };
    Ok((ext, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid;

    fn constant(grid: Grid, domain: &Domain, v: Vec2) -> VectorField {
        VectorField::sample_in(grid, domain, |_| v).unwrap()
    }

    #[test]
    fn split_on_half_plane_and_disk() {
        let hp = Domain::half_plane();
        let g = Grid::new(-1.0, -1.0, 0.25, 8, 8).unwrap();
        let s = normal_tangential_split(&constant(g, &hp, Vec2::new(0.0, 5.0)), &hp).unwrap();
        let k = g.index(3, 6);
        assert_eq!(s.normal_part.at(k), Some(Vec2::new(0.0, 5.0)));
        assert_eq!(s.tangential_part.at(k), Some(Vec2::ZERO));
        let s = normal_tangential_split(&constant(g, &hp, Vec2::new(3.0, 0.0)), &hp).unwrap();
        assert_eq!(s.normal_part.at(k), Some(Vec2::ZERO));
        assert_eq!(s.tangential_part.at(k), Some(Vec2::new(3.0, 0.0)));

        let disk = Domain::disk(Vec2::ZERO, 1.0);
        let g = Grid::new(-0.5, 0.0, 1.0, 1, 1).unwrap();
        assert_eq!(g.center(0, 0), Vec2::new(0.0, 0.5));
        let s = normal_tangential_split(&constant(g, &disk, Vec2::new(1.0, 0.0)), &disk).unwrap();
        let p = s.normal_part.at(0).unwrap();
        assert!(p.norm() < 1e-15);
        assert!(s.tangential_part.at(0).unwrap().distance(Vec2::new(1.0, 0.0)) < 1e-15);
    }

    #[test]
    fn flat_boundary_closed_forms() {
        let hp = Domain::half_plane();
        let rho = 0.125;
        let g = Grid::new(-0.5, -0.5, 1.0 / 32.0, 32, 32).unwrap();
        let u = VectorField::sample_in(g, &hp, |p| Vec2::new(0.0, p.y)).unwrap();
        let e = vbmo_extend(&u, &hp, &ExtensionConfig::new(rho)).unwrap();
        let t = VectorField::sample_in(g, &hp, |_| Vec2::new(1.0, 0.0)).unwrap();
        let et = vbmo_extend(&t, &hp, &ExtensionConfig::new(rho)).unwrap();
        for k in 0..g.len() {
            let p = g.center_of(k);
            if p.y < 0.0 {
                let th = mollifier_theta(p.y.abs() / rho);
                assert_eq!(e.extended.at(k), Some(Vec2::new(0.0, p.y * th)));
                assert_eq!(et.extended.at(k), Some(Vec2::new(th, 0.0)));
            } else {
                assert_eq!(e.extended.at(k), u.at(k));
            }
        }
        assert_eq!(e.summary.support_violations, 0);
    }

    #[test]
    fn zero_field_has_zero_norm() {
        let hp = Domain::half_plane();
        let g = Grid::new(-1.0, 0.0, 1.0 / 16.0, 32, 16).unwrap();
        let u = constant(g, &hp, Vec2::ZERO);
        let opts = NormOptions::default();
        let r =
            vbmo_norm(&u, &hp, Region::Domain, None, &opts, &BOptions { min_radius: 4, ..Default::default() }).unwrap();
        assert_eq!(r.total, 0.0);
    }
}
