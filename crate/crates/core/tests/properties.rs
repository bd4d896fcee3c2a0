use bmo_extension::covering::{build_atlas, partition_weights};
use bmo_extension::extension::{bmo_extend, reflect_point, ExtensionConfig};
use bmo_extension::field::{bmo_seminorm, Grid, Region, ScalarField, Strategy as Search};
use bmo_extension::geometry::{Domain, Rect, Vec2};
use bmo_extension::harness::RandomField;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn domains() -> Vec<Domain> {
    vec![
        Domain::half_plane(),
        Domain::disk(Vec2::ZERO, 1.0),
        Domain::strip(0.0, 1.0),
        Domain::perturbed_strip(0.05, 2.0, 0.0),
        Domain::disk(Vec2::new(0.2, 0.1), 0.8).complemented(),
    ]
}

fn domain_strategy() -> impl Strategy<Value = Domain> {
    (0..domains().len()).prop_map(|k| domains()[k].clone())
}

/// A point near the boundary: an anchor moved by `s` along its normal.
fn near_boundary(domain: &Domain, t: f64, s: f64) -> Vec2 {
    let probe = match domain.shape {
        bmo_extension::geometry::Shape::Disk { center, radius } => center + Vec2::new(t.cos(), t.sin()) * radius,
        _ => Vec2::new(t, 0.02),
    };
    let bp = domain.project(probe).unwrap();
    bp.position + bp.normal * s
}

fn random_field(seed: u64, grid: Grid, domain: &Domain) -> ScalarField {
    RandomField::new(&mut ChaCha8Rng::seed_from_u64(seed)).sample(grid, domain).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distance_is_eikonal(domain in domain_strategy(), t in -3.0f64..3.0, s in -0.3f64..0.3) {
        let x = near_boundary(&domain, t, s);
        let e = 1e-6;
        let d = |p: Vec2| domain.signed_distance(p).unwrap();
        let gx = (d(x + Vec2::new(e, 0.0)) - d(x - Vec2::new(e, 0.0))) / (2.0 * e);
        let gy = (d(x + Vec2::new(0.0, e)) - d(x - Vec2::new(0.0, e))) / (2.0 * e);
        prop_assert!((Vec2::new(gx, gy).norm() - 1.0).abs() < 1e-6);
        let grad = domain.distance_gradient(x).unwrap();
        prop_assert!(grad.distance(Vec2::new(gx, gy)) < 1e-6);
    }

    #[test]
    fn projection_is_consistent(domain in domain_strategy(), t in -3.0f64..3.0, s in -0.3f64..0.3) {
        let x = near_boundary(&domain, t, s);
        let bp = domain.project(x).unwrap();
        let d = domain.signed_distance(x).unwrap();
        prop_assert!(domain.signed_distance(bp.position).unwrap().abs() < 1e-9);
        prop_assert!((bp.position.distance(x) - d.abs()).abs() < 1e-9);
        prop_assert!((bp.position - bp.normal * d).distance(x) < 1e-9);
    }

    #[test]
    fn reflection_is_an_involution(domain in domain_strategy(), t in -3.0f64..3.0, s in -0.3f64..0.3) {
        let x = near_boundary(&domain, t, s);
        let once = reflect_point(&domain, x, 0.4).unwrap();
        let d0 = domain.signed_distance(x).unwrap();
        prop_assert!((domain.signed_distance(once).unwrap() + d0).abs() < 1e-9);
        prop_assert!(reflect_point(&domain, once, 0.4).unwrap().distance(x) < 1e-9);
    }

    #[test]
    fn extension_is_linear_and_restricts(
        k in 0usize..3,
        seed in any::<u64>(),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        rho in 0.05f64..0.2,
    ) {
        let domain = domains()[k].clone();
        let grid = Grid::new(-1.5, -1.5, 1.0 / 32.0, 96, 96).unwrap();
        let v = random_field(seed, grid, &domain);
        let w = random_field(seed.wrapping_add(1), grid, &domain);
        let cfg = ExtensionConfig::new(rho);
        let ev = bmo_extend(&v, &domain, &cfg).unwrap().extended;
        let ew = bmo_extend(&w, &domain, &cfg).unwrap().extended;
        let combo = bmo_extend(&v.linear_combination(a, &w, b).unwrap(), &domain, &cfg).unwrap().extended;
        prop_assert!(combo.max_abs_diff(&ev.linear_combination(a, &ew, b).unwrap()).unwrap() <= 1e-12);
        for k in 0..grid.len() {
            if let Some(x) = v.at(k) {
                prop_assert_eq!(ev.at(k), Some(x));
            }
        }
    }

    #[test]
    fn extension_commutes_with_translation(seed in any::<u64>(), di in -8i32..8, dj in -8i32..8) {
        let h = 1.0 / 32.0;
        let domain = Domain::disk(Vec2::new(0.1, -0.05), 0.9);
        let grid = Grid::new(-1.5, -1.5, h, 96, 96).unwrap();
        let offset = Vec2::new(di as f64 * h, dj as f64 * h);
        let moved_grid = Grid::new(grid.x0 + offset.x, grid.y0 + offset.y, h, 96, 96).unwrap();
        let moved = domain.translated(offset);
        let f = RandomField::new(&mut ChaCha8Rng::seed_from_u64(seed));
        let v = f.sample(grid, &domain).unwrap();
        let vm = ScalarField::sample_in(moved_grid, &moved, |p| f.value(p - offset)).unwrap();
        prop_assert_eq!(v.mask(), vm.mask());
        let cfg = ExtensionConfig::new(0.15);
        let a = bmo_extend(&v, &domain, &cfg).unwrap().extended;
        let b = bmo_extend(&vm, &moved, &cfg).unwrap().extended;
        let diff = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        prop_assert!(diff <= 1e-9, "{}", diff);
    }

    #[test]
    fn bmo_is_monotone_in_scale(seed in any::<u64>(), m1 in 0.1f64..0.5, m2 in 0.5f64..1.0) {
        let domain = Domain::half_plane();
        let grid = Grid::new(-1.0, -0.5, 1.0 / 16.0, 32, 32).unwrap();
        let v = random_field(seed, grid, &domain);
        let s = Search::strided(2, (1..=16).collect());
        let small = bmo_seminorm(&v, &domain, Region::Domain, m1, &s).unwrap().value;
        let large = bmo_seminorm(&v, &domain, Region::Domain, m2, &s).unwrap().value;
        prop_assert!(small <= large);
    }

    #[test]
    fn bmo_is_invariant_under_grid_translation(seed in any::<u64>(), di in -20i32..20, dj in -20i32..20) {
        let h = 1.0 / 16.0;
        let grid = Grid::new(-1.0, -1.0, h, 32, 32).unwrap();
        let moved = Grid::new(grid.x0 + di as f64 * h, grid.y0 + dj as f64 * h, h, 32, 32).unwrap();
        let v = random_field(seed, grid, &Domain::half_plane());
        let w = ScalarField::from_values(moved, v.values().to_vec()).unwrap();
        let s = Search::strided(1, (1..=16).collect());
        let dom = Domain::half_plane();
        let a = bmo_seminorm(&v, &dom, Region::Whole, f64::INFINITY, &s).unwrap().value;
        let b = bmo_seminorm(&w, &dom, Region::Whole, f64::INFINITY, &s).unwrap().value;
        prop_assert_eq!(a, b);
    }

    #[test]
    fn partition_sums_to_one_on_the_band(t in 0.0f64..6.28, s in -0.35f64..0.35) {
        let domain = Domain::disk(Vec2::ZERO, 1.0);
        let atlas = build_atlas(&domain, 0.2, Rect::from_bounds(-2.0, 2.0, -2.0, 2.0)).unwrap();
        let x = Vec2::new(t.cos(), t.sin()) * (1.0 + s);
        let w = partition_weights(&atlas, &domain, x).unwrap();
        prop_assert!((w.total() - 1.0).abs() <= 1e-10);
        prop_assert!(w.weights.iter().all(|&p| (0.0..=1.0).contains(&p)));
    }
}

#[test]
fn support_stays_in_the_band() {
    for domain in domains().into_iter().take(3) {
        let grid = Grid::new(-1.5, -1.5, 1.0 / 32.0, 96, 112).unwrap();
        let v = random_field(11, grid, &domain);
        for rho in [0.05, 0.1, 0.25] {
            let ext = bmo_extend(&v, &domain, &ExtensionConfig::new(rho)).unwrap().extended;
            for k in 0..grid.len() {
                if ext.at(k).is_some_and(|x| x != 0.0) {
                    let d = domain.signed_distance(grid.center_of(k)).unwrap();
                    assert!(-d < 2.0 * rho + grid.h, "{domain:?} rho {rho}: d = {d}");
                }
            }
        }
    }
}
