use std::f64::consts::PI;

use bmo_extension::covering::{build_atlas, mollifier_theta, partition_weight_of, partition_weights};
use bmo_extension::extension::{
    bmo_extend, edm_extend_report, even_extend, odd_extend, verify_product_estimate, zero_extend, ExtensionConfig,
    NormOptions,
};
use bmo_extension::field::{
    b_seminorm, bmo_seminorm, brute_force_oracle, composite_norms, holder_norm, l1_ul_norm, BOptions, Grid,
    HolderOptions, L1Region, Region, ScalarField, Strategy, VectorField,
};
use bmo_extension::geometry::{chart_deviation, Domain, NormalChart, Rect, Vec2};
use bmo_extension::harness::RandomField;
use bmo_extension::vector_extension::{vbmo_extend, vbmo_norm};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn shapes() -> Vec<Domain> {
    vec![
        Domain::half_plane(),
        Domain::disk(Vec2::ZERO, 1.0),
        Domain::strip(0.0, 1.0),
        Domain::perturbed_strip(0.05, 2.0, 0.0),
    ]
}

#[test]
fn chart_round_trip_on_every_shape() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for d in shapes() {
        let w0 = d.project(Vec2::new(0.3, 0.9)).unwrap();
        let rho = 0.1;
        let chart = NormalChart::new(w0, rho);
        for _ in 0..100 {
            let eta = Vec2::new(rng.gen_range(-rho..rho), rng.gen_range(-rho..rho)) * 0.999;
            let back = chart.inverse(&d, chart.forward(&d, eta).unwrap()).unwrap();
            assert!(back.distance(eta) < 1e-9, "{d:?} {eta:?} {back:?}");
        }
    }
}

#[test]
fn chart_deviation_scales_with_rho() {
    let disk = Domain::disk(Vec2::ZERO, 1.0);
    let w0 = disk.project(Vec2::new(0.0, 0.9)).unwrap();
    let dev = chart_deviation(&disk, &w0, 0.01, 2000).unwrap().max();
    assert!(dev <= 0.02 * disk.curvature_bound(), "{dev}");

    let wave = Domain::perturbed_strip(0.05, 2.0, 0.0);
    let crest = wave.project(Vec2::new(0.5, 0.1)).unwrap();
    let a = chart_deviation(&wave, &crest, 0.1, 2000).unwrap().max();
    let b = chart_deviation(&wave, &crest, 0.05, 2000).unwrap().max();
    assert!(a / b >= 1.8, "{a} {b}");
}

#[test]
fn atlas_seeds_lie_on_the_boundary() {
    for (d, rho) in [(Domain::disk(Vec2::ZERO, 1.0), 0.1), (Domain::perturbed_strip(0.05, 2.0, 0.0), 0.05)] {
        let atlas = build_atlas(&d, rho, Rect::from_bounds(-2.0, 2.0, -2.0, 2.0)).unwrap();
        for s in &atlas.seeds {
            assert!(d.signed_distance(s.position).unwrap().abs() <= 1e-9);
        }
        assert!(atlas.max_neighbors() <= 1152);
    }
}

#[test]
fn half_plane_partition_sums_to_one() {
    let d = Domain::half_plane();
    let atlas = build_atlas(&d, 0.2, Rect::from_bounds(-2.0, 2.0, -1.0, 1.0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let c = atlas.cover_scale();
    for _ in 0..500 {
        let x = Vec2::new(rng.gen_range(-1.5..1.5), rng.gen_range(-c..c));
        let w = partition_weights(&atlas, &d, x).unwrap();
        assert!((w.total() - 1.0).abs() <= 1e-10);
    }
}

fn max_partition_gradient(rho: f64) -> f64 {
    let d = Domain::half_plane();
    let atlas = build_atlas(&d, rho, Rect::from_bounds(-2.0, 2.0, -1.0, 1.0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let e = 1e-6;
    let mut best: f64 = 0.0;
    for _ in 0..2000 {
        let x = Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-0.9..0.9) * atlas.cover_scale());
        for i in partition_weights(&atlas, &d, x).unwrap().seeds {
            let phi = |p: Vec2| partition_weight_of(&atlas, &d, i, p);
            let gx = (phi(x + Vec2::new(e, 0.0)) - phi(x - Vec2::new(e, 0.0))) / (2.0 * e);
            let gy = (phi(x + Vec2::new(0.0, e)) - phi(x - Vec2::new(0.0, e))) / (2.0 * e);
            best = best.max(Vec2::new(gx, gy).norm());
        }
    }
    best
}

#[test]
fn partition_gradients_grow_like_inverse_rho() {
    let coarse = max_partition_gradient(0.2);
    let fine = max_partition_gradient(0.1);
    assert!(fine >= 1.6 * coarse, "{coarse} {fine}");
}

fn grid(x0: f64, x1: f64, y0: f64, y1: f64, h: f64) -> Grid {
    Grid::covering(&Rect::from_bounds(x0, x1, y0, y1), h).unwrap()
}

#[test]
fn bmo_of_constant_and_strip_jump() {
    let strip = Domain::strip(0.0, 1.0);
    let g = grid(-1.0, 1.0, 0.0, 1.0, 1.0 / 128.0);
    let one = ScalarField::sample_in(g, &strip, |_| 1.0).unwrap();
    for s in [Strategy::strided(4, vec![1, 8, 32]), Strategy::strided(16, vec![2, 40])] {
        assert_eq!(bmo_seminorm(&one, &strip, Region::Domain, 0.5, &s).unwrap().value, 0.0);
    }
    let jump = ScalarField::sample_in(g, &strip, |p| (p.y - 0.5).signum()).unwrap();
    let s = Strategy::strided(8, vec![8, 16, 32, 48, 63]);
    let v = bmo_seminorm(&jump, &strip, Region::Domain, 0.5, &s).unwrap().value;
    assert!((0.9..=1.0).contains(&v), "{v}");
}

#[test]
fn strided_never_exceeds_oracle() {
    let g = Grid::new(-0.5, -0.5, 1.0 / 16.0, 16, 16).unwrap();
    let d = Domain::half_plane();
    assert_eq!(brute_force_oracle(&ScalarField::from_fn(g, |_| Some(3.0)), &d, Region::Whole, 1.0).unwrap().value, 0.0);
    for seed in 0..8 {
        let f = RandomField::new(&mut ChaCha8Rng::seed_from_u64(seed));
        let v = ScalarField::from_fn(g, |p| Some(f.value(p)));
        let o = brute_force_oracle(&v, &d, Region::Whole, 0.4).unwrap().value;
        for stride in [2, 3, 5] {
            let s = bmo_seminorm(&v, &d, Region::Whole, 0.4, &Strategy::strided(stride, vec![1, 2, 3, 5])).unwrap();
            assert!(s.value <= o);
        }
    }
}

#[test]
fn l1_and_b_of_constant_on_half_plane() {
    let d = Domain::half_plane();
    let g = grid(-2.0, 2.0, -1.0, 2.0, 1.0 / 64.0);
    let one = ScalarField::sample_in(g, &d, |_| 1.0).unwrap();
    let l1 = l1_ul_norm(&one, &d, L1Region::All, 4).unwrap().value;
    assert!((l1 - PI).abs() < 0.02 * PI, "{l1}");
    let b = b_seminorm(&one, &d, None, &BOptions::default()).unwrap().value;
    assert!((b - PI / 2.0).abs() < 0.02 * PI / 2.0, "{b}");
    let zero = ScalarField::sample_in(g, &d, |_| 0.0).unwrap();
    assert_eq!(l1_ul_norm(&zero, &d, L1Region::All, 4).unwrap().value, 0.0);
    assert_eq!(b_seminorm(&zero, &d, None, &BOptions::default()).unwrap().value, 0.0);
}

#[test]
fn composites_of_zero_and_constant() {
    let d = Domain::half_plane();
    let g = grid(-2.0, 2.0, -1.0, 2.5, 1.0 / 64.0);
    let s = Strategy::strided(4, vec![4, 16, 48]);
    let zero = ScalarField::sample_in(g, &d, |_| 0.0).unwrap();
    let z = composite_norms(&zero, &d, 1.0, 1.0, None, &s, 4, &BOptions::default()).unwrap();
    assert_eq!((z.bmo_mu_delta, z.bmo_inf_inf, z.bmo_b), (0.0, 0.0, 0.0));

    let one = ScalarField::sample_in(g, &d, |_| 1.0).unwrap();
    let c = composite_norms(&one, &d, 1.0, 1.0, None, &s, 4, &BOptions::default()).unwrap();
    assert_eq!(c.bmo_mu.value, 0.0);
    // unit ball centred in the middle of the band of width 1
    let a: f64 = 0.5;
    let band_area = 2.0 * (a * (1.0 - a * a).sqrt() + a.asin());
    assert!((c.bmo_mu_delta - band_area).abs() < 0.02 * band_area, "{}", c.bmo_mu_delta);
    assert_eq!(c.bmo_mu_delta, c.bmo_mu.value + c.l1_delta.value);
    assert_eq!(c.bmo_inf_inf, c.bmo_inf.value + c.l1_all.value);
    assert_eq!(c.bmo_b, c.bmo_mu.value + c.b_nu.value);
}

#[test]
fn holder_norm_closed_forms() {
    let h = 1.0 / 32.0;
    let g = Grid::new(0.0, 0.0, h, 32, 32).unwrap();
    let opts = HolderOptions::default();
    let c = ScalarField::from_fn(g, |_| Some(-2.5));
    assert_eq!(holder_norm(&c, 0.5, &opts).unwrap(), 2.5);
    let phi = ScalarField::from_fn(g, |p| Some(p.x));
    let v = holder_norm(&phi, 0.5, &opts).unwrap();
    // sup |x1| plus the quotient of the widest same-row pair
    let expected = (1.0 - h / 2.0) + (1.0 - h).sqrt();
    assert!((v - expected).abs() < 1e-12, "{v} {expected}");
    let twice = holder_norm(&phi.map(|x| 2.0 * x), 0.5, &opts).unwrap();
    assert!((twice - 2.0 * v).abs() < 1e-12);
}

#[test]
fn radial_even_extension_of_disk() {
    let d = Domain::disk(Vec2::ZERO, 1.0);
    let h = 1.0 / 64.0;
    let g = grid(-1.5, 1.5, -1.5, 1.5, h);
    let q = |r: f64| (2.0 * r).cos() + r * r;
    let v = ScalarField::sample_in(g, &d, |p| q(p.norm())).unwrap();
    let band = 0.3;
    let even = even_extend(&v, &d, band).unwrap().field;
    let odd = odd_extend(&v, &d, band).unwrap().field;
    for k in 0..g.len() {
        let r = g.center_of(k).norm();
        if r > 1.0 && r < 1.0 + band {
            let e = even.at(k).unwrap();
            assert!((e - q(2.0 - r)).abs() <= 2.0 * h, "r = {r}");
            assert!((e + odd.at(k).unwrap()).abs() < 1e-12);
        }
    }
}

#[test]
fn odd_extension_of_x2_is_x2() {
    let d = Domain::half_plane();
    let g = Grid::new(-1.0, -1.0, 1.0 / 32.0, 64, 64).unwrap();
    let v = ScalarField::sample_in(g, &d, |p| p.y).unwrap();
    let odd = odd_extend(&v, &d, 0.5).unwrap().field;
    for k in 0..g.len() {
        let y = g.center_of(k).y;
        if y > -0.5 {
            assert!((odd.at(k).unwrap() - y).abs() < 1e-12);
        }
    }
}

#[test]
fn zero_extension_of_constant_is_indicator() {
    let d = Domain::disk(Vec2::ZERO, 1.0);
    let g = grid(-1.5, 1.5, -1.5, 1.5, 1.0 / 32.0);
    let v = ScalarField::sample_in(g, &d, |_| 1.0).unwrap();
    let z = zero_extend(&v, &d, &g).unwrap();
    for k in 0..g.len() {
        let inside = d.signed_distance(g.center_of(k)).unwrap() > 0.0;
        assert_eq!(z.at(k), Some(if inside { 1.0 } else { 0.0 }));
    }
}

#[test]
fn log_layer_extension_below_the_strip() {
    let d = Domain::strip(0.0, 1.0);
    let h = 1.0 / 128.0;
    let g = grid(-1.0, 1.0, -0.5, 1.5, h);
    let v = ScalarField::sample_in(g, &d, |p| p.y.ln()).unwrap();
    let rho = 0.25;
    let ext = bmo_extend(&v, &d, &ExtensionConfig::new(rho)).unwrap().extended;
    for k in 0..g.len() {
        let y = g.center_of(k).y;
        if y < 0.0 {
            let expected = y.abs().ln() * mollifier_theta(y.abs() / rho);
            assert!((ext.at(k).unwrap() - expected).abs() < 1e-9, "y = {y}");
        }
    }
}

fn product_options() -> NormOptions {
    NormOptions {
        strategy: Strategy::strided(2, vec![1, 2, 4, 8, 16]),
        l1_stride: 4,
        holder: HolderOptions { near_distance: 0.5, random_pairs: 2000, seed: 0 },
    }
}

#[test]
fn product_estimate_examples() {
    let d = Domain::half_plane();
    let g = grid(-1.0, 1.0, 0.0, 2.0, 1.0 / 32.0);
    let v = ScalarField::sample_in(g, &d, |p| p.y.ln()).unwrap();
    let opts = product_options();
    let one = ScalarField::sample_in(g, &d, |_| 1.0).unwrap();
    assert_eq!(verify_product_estimate(&one, &v, &d, 0.5, 1.0, 1.0, &opts).unwrap().ratio, Some(1.0));
    let zero = ScalarField::sample_in(g, &d, |_| 0.0).unwrap();
    let r = verify_product_estimate(&zero, &v, &d, 0.5, 1.0, 1.0, &opts).unwrap();
    assert_eq!(r.product_norm, 0.0);
    let gamma: f64 = 0.5;
    let ratios: Vec<f64> = [1.0, 2.0, 4.0, 8.0]
        .iter()
        .map(|&k: &f64| {
            let phi = ScalarField::sample_in(g, &d, |p| (k * p.x).cos() / k.powf(gamma)).unwrap();
            verify_product_estimate(&phi, &v, &d, gamma, 1.0, 1.0, &opts).unwrap().ratio.unwrap()
        })
        .collect();
    assert!(ratios.iter().all(|&r| r > 0.0 && r <= 1.0), "{ratios:?}");
}

#[test]
fn extension_report_of_zero_and_constant() {
    let d = Domain::half_plane();
    let g = grid(-1.0, 1.0, -0.5, 1.5, 1.0 / 32.0);
    let opts = product_options();
    let zero = ScalarField::sample_in(g, &d, |_| 0.0).unwrap();
    let z = edm_extend_report(&zero, &d, 1.0, 1.0, 0.1, &opts).unwrap();
    assert_eq!((z.extended_bmo, z.extended_l1, z.input_norm, z.ratio), (0.0, 0.0, 0.0, None));
    assert!(z.support_ok);
    let one = ScalarField::sample_in(g, &d, |_| 1.0).unwrap();
    let c = edm_extend_report(&one, &d, 1.0, 1.0, 0.1, &opts).unwrap();
    assert!(c.support_ok);
    assert!(c.ratio.is_some_and(f64::is_finite));
}

#[test]
fn vector_norm_b_term() {
    let d = Domain::half_plane();
    let g = grid(-2.0, 2.0, -1.0, 2.0, 1.0 / 64.0);
    let opts = product_options();
    let b = BOptions::default();
    let tangential = VectorField::sample_in(g, &d, |_| Vec2::new(1.0, 0.0)).unwrap();
    assert_eq!(vbmo_norm(&tangential, &d, Region::Domain, None, &opts, &b).unwrap().normal_b.value, 0.0);
    let normal = VectorField::sample_in(g, &d, |_| Vec2::new(0.0, 1.0)).unwrap();
    let v = vbmo_norm(&normal, &d, Region::Domain, None, &opts, &b).unwrap().normal_b.value;
    assert!((v - PI / 2.0).abs() < 0.02 * PI / 2.0, "{v}");
}

#[test]
fn vector_extension_restricts() {
    let g = grid(-1.0, 1.0, -0.5, 1.5, 1.0 / 32.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for d in [Domain::half_plane(), Domain::disk(Vec2::new(0.0, 0.5), 0.8)] {
        for _ in 0..5 {
            let (a, b) = (RandomField::new(&mut rng), RandomField::new(&mut rng));
            let u = VectorField::sample_in(g, &d, |p| Vec2::new(a.value(p), b.value(p))).unwrap();
            let ext = vbmo_extend(&u, &d, &ExtensionConfig::new(0.1)).unwrap().extended;
            for k in 0..g.len() {
                if let Some(x) = u.at(k) {
                    assert_eq!(ext.at(k), Some(x));
                }
            }
        }
    }
}
