use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::family::{RandomField, TestField, PRODUCT_MULTIPLIERS};
use super::{
    example_log_layer, layer_unit_integral, run_extension_experiment, EstimatorSpec, ExperimentConfig, GridSpec,
    HarnessError,
};
use crate::covering::{build_atlas, partition_weights};
use crate::extension::{bmo_extend, even_extend, odd_extend, reflect_point, verify_product_estimate, ExtensionConfig};
use crate::field::{bmo_seminorm, brute_force_oracle, mean_oscillation, Ball, Grid, Region, ScalarField, Strategy};
use crate::geometry::{
    admissible_rho, chart_deviation, neighborhood_contains, overlap_bound, BoundaryPoint, Domain, Rect, Vec2,
};

/// Result of one acceptance check: `measured <relation> tolerance`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub measured: f64,
    pub relation: String,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &str, measured: f64, relation: &str, tolerance: f64, detail: String) -> Self {
        let passed = match relation {
            "<" => measured < tolerance,
            "<=" => measured <= tolerance,
            ">=" => measured >= tolerance,
            "==" => measured == tolerance,
            _ => false,
        };
        Self { name: name.into(), measured, relation: relation.into(), tolerance, passed, detail }
    }

    /// Also requires `extra`, a side condition described in `detail`.
    fn and(mut self, extra: bool) -> Self {
        self.passed &= extra;
        self
    }

    pub fn line(&self) -> String {
        format!(
            "{} {:<24} measured {:.6e} {} {:.6e}  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.relation,
            self.tolerance,
            self.detail
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Chart tolerance used by the geometric checks.
    pub epsilon: f64,
    /// Runs only the named checks when non-empty.
    pub only: Vec<String>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { seed: 0, epsilon: 0.1, only: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub epsilon: f64,
    pub checks: Vec<CheckOutcome>,
    pub passed: bool,
}

impl VerifyReport {
    pub fn table(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            writeln!(out, "{}", c.line()).expect("string write");
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        writeln!(out, "{} checks, {} failed", self.checks.len(), failed).expect("string write");
        out
    }
}

type CheckFn = fn(&VerifyConfig) -> Result<CheckOutcome, HarnessError>;

const CHECKS: [(&str, CheckFn); 13] = [
    ("unit_integral", unit_integral),
    ("log_layer", log_layer),
    ("restriction", restriction),
    ("support", support),
    ("linearity", linearity),
    ("oracle_equivalence", oracle_equivalence),
    ("closed_forms", closed_forms),
    ("partition_of_unity", partition_of_unity),
    ("chart_bounds", chart_bounds),
    ("biu_inclusion", biu_inclusion),
    ("reflection", reflection),
    ("product_stability", product_stability),
    ("extension_stability", extension_stability),
];

pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|c| c.0).collect()
}

/// Runs one named check; errors are reported as a failed outcome.
pub fn run_check(name: &str, config: &VerifyConfig) -> Result<CheckOutcome, HarnessError> {
    let (_, f) =
        CHECKS.iter().find(|c| c.0 == name).ok_or_else(|| HarnessError::Config(format!("unknown check {name:?}")))?;
    Ok(f(config).unwrap_or_else(|e| CheckOutcome::new(name, f64::NAN, "==", 0.0, format!("error: {e}")).and(false)))
}

/// Runs the acceptance checks in a fixed order.
pub fn verify_all(config: &VerifyConfig) -> Result<VerifyReport, HarnessError> {
    for name in &config.only {
        if !CHECKS.iter().any(|c| c.0 == name) {
            return Err(HarnessError::Config(format!("unknown check {name:?}")));
        }
    }
    let mut checks = Vec::new();
    for (name, _) in CHECKS {
        if config.only.is_empty() || config.only.iter().any(|n| n == name) {
            checks.push(run_check(name, config)?);
        }
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport { seed: config.seed, epsilon: config.epsilon, checks, passed })
}

fn rng(config: &VerifyConfig, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(config.seed);
    r.set_stream(stream);
    r
}

fn shapes() -> [(&'static str, Domain); 4] {
    [
        ("half_plane", Domain::half_plane()),
        ("disk", Domain::disk(Vec2::ZERO, 1.0)),
        ("strip", Domain::strip(0.0, 1.0)),
        ("perturbed_strip", Domain::perturbed_strip(0.05, 2.0, 0.0)),
    ]
}

/// `n` boundary anchors spread along the boundary of `domain`.
fn anchors(name: &str, domain: &Domain, n: usize) -> Result<Vec<BoundaryPoint>, HarnessError> {
    (0..n)
        .map(|k| {
            let t = k as f64 / n as f64;
            let p = match name {
                "disk" => Vec2::new((2.0 * PI * t).cos(), (2.0 * PI * t).sin()) * 0.99,
                "strip" => Vec2::new(4.0 * t - 2.0, if k % 2 == 0 { 0.01 } else { 0.99 }),
                _ => Vec2::new(4.0 * t - 2.0, 0.01),
            };
            Ok(domain.project(p)?)
        })
        .collect()
}

fn max_exterior_excess(field: &ScalarField, domain: &Domain, limit: f64) -> Result<f64, HarnessError> {
    let g = field.grid;
    let mut worst = f64::NEG_INFINITY;
    for k in 0..g.len() {
        if matches!(field.at(k), Some(v) if v != 0.0) {
            let outside = (-domain.signed_distance(g.center_of(k))?).max(0.0);
            worst = worst.max(outside - limit);
        }
    }
    Ok(worst)
}

fn unit_integral(_: &VerifyConfig) -> Result<CheckOutcome, HarnessError> {
    let v = layer_unit_integral(1.0 / 512.0)?;
    Ok(CheckOutcome::new("unit_integral", (v - 1.0).abs(), "<=", 0.01, format!("integral {v:.6}")))
}

fn log_layer(_: &VerifyConfig) -> Result<CheckOutcome, HarnessError> {
    let r = example_log_layer(0.25, 1.0 / 512.0, 1)?;
    let finest = r.max_abs.last().map_or(0.0, |m| m.max_abs);
    let sups: Vec<String> = r.max_abs.iter().map(|m| format!("{:.3}@h={}", m.max_abs, m.h)).collect();
    let detail = format!(
        "support {} inside (1, 4): {}; max|g| {} (>= 4, growing: {}); BMO^inf {:.4}",
        r.support.map_or("empty".into(), |(a, b)| format!("[{a:.4}, {b:.4}]")),
        r.support_ok,
        sups.join(" "),
        r.max_abs_grows,
        r.bmo_inf.value
    );
    Ok(CheckOutcome::new("log_layer", r.b_inf.value, "<=", 2.1, detail)
        .and(r.support_ok && finest >= 4.0 && r.max_abs_grows))
}

fn restriction(config: &VerifyConfig) -> Result<CheckOutcome, HarnessError> {
    let mut rng = rng(config, 1);
    let grid = GridSpec { x0: -1.0, x1: 1.0, y0: -0.5, y1: 1.5, h: 1.0 / 64.0 }.grid()?;
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for domain in [Domain::half_plane(), Domain::strip(0.0, 1.0)] {
        for _ in 0..10 {
            let v = RandomField::new(&mut rng).sample(grid, &domain)?;
            let ext = bmo_extend(&v, &domain, &ExtensionConfig::new(0.1))?;
            for k in 0..grid.len() {
                if let Some(a) = v.at(k) {
                    let b = ext.extended.at(k).unwrap_or(f64::NAN);
                    let d = (a - b).abs();
                    worst = if d.is_nan() { f64::NAN } else { worst.max(d) };
                }
            }
            count += 1;
        }
    }
    Ok(CheckOutcome::new("restriction", worst, "==", 0.0, format!("{count} random fields on half_plane and strip")))
}

fn support(config: &VerifyConfig) -> Result<CheckOutcome, HarnessError> {
    let mut rng = rng(config, 2);
    let grid = GridSpec { x0: -1.5, x1: 1.5, y0: -1.5, y1: 2.0, h: 1.0 / 64.0 }.grid()?;
    let mut worst = f64::NEG_INFINITY;
    let mut failures = 0;
    for domain in [Domain::half_plane(), Domain::strip(0.0, 1.0), Domain::disk(Vec2::ZERO, 1.0)] {
        let v = RandomField::new(&mut rng).sample(grid, &domain)?;
        for rho in [0.05, 0.1, 0.25] {
            let ext = bmo_extend(&v, &domain, &ExtensionConfig::new(rho))?;
            worst = worst.max(max_exterior_excess(&ext.extended, &domain, 2.0 * rho + grid.h)?);
            failures += ext.summary.interpolation_failures;
        }
    }
    let detail = format!("max of d(x, closure) - (2 rho + h) over nonzero cells; {failures} interpolation failures");
    Ok(CheckOutcome::new("support", worst, "<", 0.0, detail))
}

fn linearity(config: &VerifyConfig) -> Result<CheckOutcome, HarnessError> {
    let mut rng = rng(config, 3);
    let grid = GridSpec { x0: -1.5, x1: 1.5, y0: -1.5, y1: 1.5, h: 1.0 / 64.0 }.grid()?;
    let mut worst: f64 = 0.0;
    for domain in [Domain::half_plane(), Domain::disk(Vec2::ZERO, 1.0)] {
        for _ in 0..3 {
            let (a, b) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let v = RandomField::new(&mut rng).sample(grid, &domain)?;
            let w = RandomField::new(&mut rng).sample(grid, &domain)?;
            let cfg = ExtensionConfig::new(0.1);
            let combo = bmo_extend(&v.linear_combination(a, &w, b)?, &domain, &cfg)?.extended;
            let ev = bmo_extend(&v, &domain, &cfg)?.extended;
            let ew = bmo_extend(&w, &domain, &cfg)?.extended;
            worst = worst.max(combo.max_abs_diff(&ev.linear_combination(a, &ew, b)?)?);
        }
    }
    Ok(CheckOutcome::new("linearity", worst, "<=", 1e-12, "6 random (a, b, v, w) on half_plane and disk".into()))
}

/// Sign jumps across lines `n . x = c` on a 16 x 16 grid of the unit square.
fn jump_family(grid: Grid) -> Vec<ScalarField> {
    let mut out = Vec::new();
    for normal in
        [Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0), Vec2::new(1.0, 1.0).normalized(), Vec2::new(2.0, -1.0).normalized()]
    {
        for c in [-0.2, 0.0, 0.15, 0.3] {
            out.push(ScalarField::from_fn(grid, |p| Some(if normal.dot(p) > c { 1.0 } else { -1.0 })));
        }
    }
    out
}

fn oracle_equivalence(config: &VerifyConfig) -> Result<CheckOutcome, HarnessError> {
    let mut rng = rng(config, 4);
    let h = 1.0 / 16.0;
    let square = Grid::new(-0.5, -0.5, h, 16, 16)?;
    let shifted = Grid::new(-0.5, -0.25, h, 16, 16)?;
    let half_plane = Domain::half_plane();
    let all_radii: Vec<usize> = (1..=16).collect();
    let exact = Strategy::strided(1, all_radii.clone());
    let coarse = Strategy::strided(4, all_radii);

    let jumps = jump_family(square);
    let mut instances: Vec<(ScalarField, Region)> = jumps.iter().map(|f| (f.clone(), Region::Whole)).collect();
    for _ in 0..4 {
        let f = RandomField::new(&mut rng);
        instances.push((ScalarField::from_fn(square, |p| Some(f.value(p))), Region::Whole));
        instances.push((f.sample(shifted, &half_plane)?, Region::Domain));
    }
    for t in [TestField::LogDistance, TestField::Linear, TestField::JumpAlong] {
        instances.push((t.sample(shifted, &half_plane)?, Region::Domain));
    }

    let mut max_diff: f64 = 0.0;
    for (f, region) in &instances {
        let a = bmo_seminorm(f, &half_plane, *region, f64::INFINITY, &exact)?.value;
        let b = brute_force_oracle(f, &half_plane, *region, f64::INFINITY)?.value;
        max_diff = max_diff.max((a - b).abs());
    }
    let mut min_ratio = f64::INFINITY;
    let mut above = false;
    for f in &jumps {
        let o = brute_force_oracle(f, &half_plane, Region::Whole, f64::INFINITY)?.value;
        let s = bmo_seminorm(f, &half_plane, Region::Whole, f64::INFINITY, &coarse)?.value;
        above |= s > o;
        min_ratio = min_ratio.min(s / o);
    }
    let detail = format!(
        "{} instances, max |stride 1 - oracle| = {max_diff:e}; stride 4 <= oracle: {}",
        instances.len(),
        !above
    );
    Ok(CheckOutcome::new("oracle_equivalence", min_ratio, ">=", 0.8, detail).and(max_diff == 0.0 && !above))
}

fn closed_forms(_: &VerifyConfig) -> Result<CheckOutcome, HarnessError> {
    let h = 1.0 / 256.0;
    let grid = Grid::new(-1.0, -1.0, h, 512, 512)?;
    let r = 0.5;
    let ball = Ball::new(Vec2::ZERO, r);
    let constant = mean_oscillation(&ScalarField::from_fn(grid, |_| Some(2.5)), &ball)?;
    let jump = mean_oscillation(&ScalarField::from_fn(grid, |p| Some(p.y.signum())), &ball)?;
    let linear = mean_oscillation(&ScalarField::from_fn(grid, |p| Some(p.y)), &ball)?;
    let linear_exact = 4.0 * r / (3.0 * PI);
    let err = ((jump - 1.0).abs()).max((linear - linear_exact).abs() / linear_exact);
    let detail = format!("constant {constant:e} (== 0), jump {jump:.5} (1), linear {linear:.5} ({linear_exact:.5})");
    Ok(CheckOutcome::new("closed_forms", err, "<=", 0.02, detail).and(constant == 0.0))
}

fn partition_of_unity(config: &VerifyConfig) -> Result<CheckOutcome, HarnessError> {
    let mut rng = rng(config, 5);
    let cases = [
        (Domain::half_plane(), 0.25, Rect::from_bounds(-3.0, 3.0, -1.0, 1.0)),
        (Domain::disk(Vec2::ZERO, 1.0), 0.2, Rect::from_bounds(-2.0, 2.0, -2.0, 2.0)),
    ];
    let mut worst_sum: f64 = 0.0;
    let mut in_range = true;
    let mut neighbors = 0;
    for (k, (domain, rho, bbox)) in cases.iter().enumerate() {
        let atlas = build_atlas(domain, *rho, *bbox)?;
        neighbors = neighbors.max(atlas.max_neighbors());
        let c = atlas.cover_scale();
        let points: Vec<Vec2> = (0..10_000)
            .map(|_| {
                let d = rng.gen_range(-c..c);
                if k == 0 {
                    Vec2::new(rng.gen_range(-2.0..2.0), -d)
                } else {
                    let t = rng.gen_range(0.0..2.0 * PI);
                    Vec2::new(t.cos(), t.sin()) * (1.0 - d)
                }
            })
            .collect();
        let results: Vec<(f64, bool)> = points
            .par_iter()
            .map(|&x| {
                let w = partition_weights(&atlas, domain, x)?;
                Ok(((w.total() - 1.0).abs(), w.weights.iter().all(|&p| (0.0..=1.0).contains(&p))))
            })
            .collect::<Result<_, HarnessError>>()?;
        for (e, ok) in results {
            worst_sum = worst_sum.max(e);
            in_range &= ok;
        }
    }
    let detail = format!(
        "2 x 10^4 band samples; weights in [0, 1]: {in_range}; max neighbours {neighbors} (<= {})",
        overlap_bound()
    );
    Ok(CheckOutcome::new("partition_of_unity", worst_sum, "<=", 1e-10, detail)
        .and(in_range && neighbors <= overlap_bound()))
}

fn chart_bounds(config: &VerifyConfig) -> Result<CheckOutcome, HarnessError> {
    let mut curved: f64 = 0.0;
    let mut flat: f64 = 0.0;
    let mut parts = Vec::new();
    for (name, domain) in shapes() {
        let rho = admissible_rho(&domain, config.epsilon)?.c_eps;
        let devs: Vec<f64> = anchors(name, &domain, 20)?
            .par_iter()
            .map(|w| Ok(chart_deviation(&domain, w, rho, 10_000)?.max()))
            .collect::<Result<_, HarnessError>>()?;
        let m = devs.into_iter().fold(0.0, f64::max);
        parts.push(format!("{name} {m:.2e} at rho {rho:.3e}"));
        if name == "half_plane" {
            flat = m;
        }
        curved = curved.max(m);
    }
    let detail = format!("{}; half-plane <= 1e-8: {}", parts.join(", "), flat <= 1e-8);
    Ok(CheckOutcome::new("chart_bounds", curved, "<", config.epsilon, detail).and(flat <= 1e-8))
}

fn biu_inclusion(config: &VerifyConfig) -> Result<CheckOutcome, HarnessError> {
    let mut rng = rng(config, 6);
    let eps = config.epsilon;
    let mut misses = 0usize;
    let mut samples = 0usize;
    for (name, domain) in shapes() {
        let l = domain.curvature_bound();
        let limit = if l > 0.0 { (eps / (8.0 * l)).min(domain.rho0()) } else { domain.rho0() };
        let rho = 0.5 * limit;
        let radius = rho * (1.0 - 0.5 * eps);
        for w in anchors(name, &domain, 10)? {
            for _ in 0..10_000 {
                let r = radius * rng.gen::<f64>().sqrt();
                let t = rng.gen_range(0.0..2.0 * PI);
                let x = w.position + Vec2::new(t.cos(), t.sin()) * r;
                misses += usize::from(!neighborhood_contains(&domain, &w, rho, x));
                samples += 1;
            }
        }
    }
    Ok(CheckOutcome::new("biu_inclusion", misses as f64, "==", 0.0, format!("{samples} points, 4 shapes x 10 anchors")))
}

fn reflection(config: &VerifyConfig) -> Result<CheckOutcome, HarnessError> {
    let mut rng = rng(config, 7);
    let half_plane = Domain::half_plane();
    let grid = Grid::new(-1.0, -1.0, 1.0 / 32.0, 64, 64)?;
    let v = RandomField::new(&mut rng).sample(grid, &half_plane)?;
    let even = even_extend(&v, &half_plane, 1.0)?.field;
    let odd = odd_extend(&v, &half_plane, 1.0)?.field;
    let mut mirrored = true;
    for j in 0..grid.ny / 2 {
        for i in 0..grid.nx {
            let src = v.get(i, grid.ny - 1 - j).map(f64::to_bits);
            mirrored &= even.get(i, j).map(f64::to_bits) == src;
            mirrored &= odd.get(i, j).map(|x| (-x).to_bits()) == src;
        }
    }
    let mut worst: f64 = 0.0;
    for (name, domain) in shapes() {
        let band = (0.5 * domain.reach()).min(0.5);
        for w in anchors(name, &domain, 50)? {
            for _ in 0..20 {
                let x = w.position + w.normal * rng.gen_range(-band..band) * 0.99;
                let once = reflect_point(&domain, x, band)?;
                worst = worst.max(reflect_point(&domain, once, band)?.distance(x));
            }
        }
    }
    let detail = format!("half-plane even/odd extensions are bit-exact mirrors: {mirrored}");
    Ok(CheckOutcome::new("reflection", worst, "<=", 1e-9, detail).and(mirrored))
}

fn product_ratio_max(h: f64, seed: u64) -> Result<f64, HarnessError> {
    let domain = Domain::half_plane();
    let grid = GridSpec { x0: -1.0, x1: 1.0, y0: 0.0, y1: 2.0, h }.grid()?;
    let opts = EstimatorSpec::default().norm_options(h, seed);
    let fields = [TestField::LogDistance, TestField::JumpAcross, TestField::Oscillatory];
    let mut best: f64 = 0.0;
    for (_, phi) in PRODUCT_MULTIPLIERS {
        let phi = ScalarField::sample_in(grid, &domain, phi)?;
        for t in fields {
            let v = t.sample(grid, &domain)?;
            let r = verify_product_estimate(&phi, &v, &domain, 0.5, 1.0, 1.0, &opts)?;
            let ratio = r
                .ratio
                .filter(|x| x.is_finite())
                .ok_or_else(|| HarnessError::Config(format!("product ratio undefined for {}", t.name())))?;
            best = best.max(ratio);
        }
    }
    Ok(best)
}

fn product_stability(config: &VerifyConfig) -> Result<CheckOutcome, HarnessError> {
    let coarse = product_ratio_max(1.0 / 32.0, config.seed)?;
    let fine = product_ratio_max(1.0 / 64.0, config.seed)?;
    let change = (fine - coarse).abs() / coarse;
    let detail = format!("max ratio {coarse:.4} at h = 1/32, {fine:.4} at h = 1/64");
    Ok(CheckOutcome::new("product_stability", change, "<=", 0.1, detail))
}

fn extension_stability(config: &VerifyConfig) -> Result<CheckOutcome, HarnessError> {
    let base = ExperimentConfig { rhos: vec![0.1, 0.25], seed: config.seed, ..Default::default() };
    let fine_cfg = ExperimentConfig { grid: base.grid.refined(), ..base.clone() };
    let coarse = run_extension_experiment(&base)?;
    let fine = run_extension_experiment(&fine_cfg)?;
    let mut worst: f64 = 0.0;
    for (a, b) in coarse.rows.iter().zip(&fine.rows) {
        if let (Some(x), Some(y)) = (a.ratio, b.ratio) {
            worst = worst.max((y - x).abs() / x);
        }
    }
    let slopes: Vec<String> = fine.fits.iter().filter_map(|f| Some(format!("{} {:.3}", f.field, f.slope?))).collect();
    let detail = format!("fitted exponents in rho: {}", slopes.join(", "));
    Ok(CheckOutcome::new("extension_stability", worst, "<=", 0.1, detail))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_check_is_rejected() {
        let cfg = VerifyConfig { only: vec!["nope".into()], ..Default::default() };
        assert!(verify_all(&cfg).is_err());
    }

    #[test]
    fn cheap_checks_pass_and_are_deterministic() {
        let cfg = VerifyConfig { only: vec!["reflection".into(), "biu_inclusion".into()], ..Default::default() };
        let a = verify_all(&cfg).unwrap();
        assert!(a.passed, "{}", a.table());
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&verify_all(&cfg).unwrap()).unwrap());
    }
}
