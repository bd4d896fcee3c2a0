use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::quadrature::{lattice_oscillation_unchecked, oscillation_sums};
use super::{Ball, FieldError, Grid, ScalarField};
use crate::geometry::{Domain, Rect};

/// Largest grid for which the exhaustive oracle runs.
pub const ORACLE_MAX_CELLS: usize = 4096;

/// Where the balls of a BMO search must lie.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// Any masked cells (fields on the whole plane).
    Whole,
    /// Masked cells with centre inside the domain.
    Domain,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Strategy {
    /// Every cell centre, every radius `k h` below the scale.
    Exhaustive,
    /// Centres on every `stride`-th cell (optionally inside `window`), radii
    /// `k h` for `k` in `radii`.
    Strided { stride: usize, radii: Vec<usize>, window: Option<Rect> },
}

impl Strategy {
    pub fn strided(stride: usize, radii: Vec<usize>) -> Self {
        Self::Strided { stride, radii, window: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyDescriptor {
    pub kind: String,
    pub h: f64,
    pub radii: Vec<f64>,
    pub center_stride: usize,
    pub window: Option<Rect>,
    /// Radius cap substituted for an infinite scale.
    pub cap: Option<f64>,
    pub candidates: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeminormReport {
    pub name: String,
    pub value: f64,
    pub maximizer: Option<Ball>,
    pub strategy: StrategyDescriptor,
    pub oracle: bool,
}

impl SeminormReport {
    fn zero(name: &str, strategy: StrategyDescriptor) -> Self {
        Self { name: name.to_owned(), value: 0.0, maximizer: None, strategy, oracle: false }
    }
}

/// `widths[dj]` is the largest `di` with `di^2 + dj^2 <= k^2`.
pub(crate) fn lattice_half_widths(k: usize) -> Vec<usize> {
    let k2 = (k * k) as u64;
    (0..=k)
        .map(|dj| {
            let rem = k2 - (dj * dj) as u64;
            let mut w = (rem as f64).sqrt() as u64;
            while (w + 1) * (w + 1) <= rem {
                w += 1;
            }
            while w * w > rem {
                w -= 1;
            }
            w as usize
        })
        .collect()
}

/// Half widths of the cell-centre lattice ball of real radius `r` (in cells).
fn real_half_widths(r: f64) -> Vec<usize> {
    let r2 = r * r * (1.0 + 1e-12);
    let n = r.floor() as usize;
    (0..=n)
        .map(|dj| {
            let rem = r2 - (dj * dj) as f64;
            let mut w = rem.max(0.0).sqrt().floor() as usize;
            while ((w + 1) * (w + 1)) as f64 <= rem {
                w += 1;
            }
            while w > 0 && (w * w) as f64 > rem {
                w -= 1;
            }
            w
        })
        .collect()
}

/// Deterministic parallel argmax: larger value wins, ties go to the smaller
/// candidate index.
fn argmax<F>(n: usize, eval: F) -> Option<(f64, usize)>
where
    F: Fn(usize) -> Option<(f64, usize)> + Sync + Send,
{
    (0..n)
        .into_par_iter()
        .filter_map(eval)
        .reduce_with(|a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a })
}

fn keep_better(best: &mut Option<(f64, usize)>, cand: (f64, usize)) {
    match best {
        Some(b) if !(cand.0 > b.0) => {}
        _ => *best = Some(cand),
    }
}

fn admissible_mask(field: &ScalarField, domain: &Domain, region: Region) -> Result<Vec<bool>, FieldError> {
    let g = field.grid;
    match region {
        Region::Whole => Ok(field.mask().to_vec()),
        Region::Domain => (0..g.len())
            .into_par_iter()
            .map(|k| Ok(field.mask()[k] && domain.signed_distance(g.center_of(k))? > 0.0))
            .collect(),
    }
}

/// Per-row prefix counts of admissible cells, `nx + 1` entries per row.
fn prefix_counts(grid: &Grid, adm: &[bool]) -> Vec<u32> {
    let mut out = vec![0u32; grid.ny * (grid.nx + 1)];
    for j in 0..grid.ny {
        let row = &mut out[j * (grid.nx + 1)..(j + 1) * (grid.nx + 1)];
        for i in 0..grid.nx {
            row[i + 1] = row[i] + u32::from(adm[grid.index(i, j)]);
        }
    }
    out
}

/// Per-row prefix sums of `|f|` over the kept cells, `nx + 1` entries per row.
fn prefix_abs(field: &ScalarField, keep: &[bool]) -> Vec<f64> {
    let g = field.grid;
    let mut out = vec![0.0; g.ny * (g.nx + 1)];
    out.par_chunks_mut(g.nx + 1).enumerate().for_each(|(j, row)| {
        for i in 0..g.nx {
            let k = g.index(i, j);
            let v = if keep[k] { field.values()[k].abs() } else { 0.0 };
            row[i + 1] = row[i] + v;
        }
    });
    out
}

fn contained(grid: &Grid, counts: &[u32], i: usize, j: usize, widths: &[usize]) -> bool {
    let k = widths.len() - 1;
    if i < k || j < k || i + k >= grid.nx || j + k >= grid.ny {
        return false;
    }
    let stride = grid.nx + 1;
    (0..=2 * k).all(|r| {
        let jj = j + r - k;
        let w = widths[r.abs_diff(k)];
        let row = &counts[jj * stride..];
        (row[i + w + 1] - row[i - w]) as usize == 2 * w + 1
    })
}

/// Largest `k` with `k h < mu`; infinite scales are capped at the window
/// diagonal.
fn max_radius_cells(grid: &Grid, mu: f64) -> (usize, Option<f64>) {
    let diag = grid.window().diagonal();
    let (limit, cap) = if mu.is_finite() { (mu, None) } else { (diag, Some(diag)) };
    let mut k = (limit / grid.h).ceil().max(1.0) as usize;
    while k > 0 && k as f64 * grid.h >= limit {
        k -= 1;
    }
    if cap.is_some() {
        k = k.max(1);
    }
    (k.min(grid.nx.min(grid.ny) / 2 + 1), cap)
}

/// Sup of the mean oscillation over lattice balls `B_{kh}(x)` with `kh < mu`
/// whose covered cells are all admissible. The result is a lower bound of
/// the continuous seminorm.
pub fn bmo_seminorm(
    field: &ScalarField,
    domain: &Domain,
    region: Region,
    mu: f64,
    strategy: &Strategy,
) -> Result<SeminormReport, FieldError> {
    if !(mu > 0.0) {
        return Err(FieldError::InvalidParameter { name: "mu", value: mu });
    }
    let g = field.grid;
    let (kmax, cap) = max_radius_cells(&g, mu);
    let (stride, mut radii, window, kind) = match strategy {
        Strategy::Exhaustive => (1, (1..=kmax).collect::<Vec<_>>(), None, "exhaustive"),
        Strategy::Strided { stride, radii, window } => (*stride, radii.clone(), *window, "strided"),
    };
    if stride == 0 {
        return Err(FieldError::InvalidParameter { name: "stride", value: 0.0 });
    }
    radii.retain(|&k| k >= 1 && k <= kmax);
    radii.sort_unstable();
    radii.dedup();
    if radii.is_empty() {
        return Err(FieldError::NoAdmissibleBall);
    }
    let adm = admissible_mask(field, domain, region)?;
    let counts = prefix_counts(&g, &adm);
    let centres: Vec<(usize, usize)> = (0..g.ny)
        .step_by(stride)
        .flat_map(|j| (0..g.nx).step_by(stride).map(move |i| (i, j)))
        .filter(|&(i, j)| adm[g.index(i, j)] && window.map_or(true, |w| w.contains(g.center(i, j))))
        .collect();
    let widths: Vec<Vec<usize>> = radii.iter().map(|&k| lattice_half_widths(k)).collect();
    let nr = radii.len();
    let best = argmax(centres.len(), |c| {
        let (i, j) = centres[c];
        let mut best = None;
        for (r, w) in widths.iter().enumerate() {
            if !contained(&g, &counts, i, j, w) {
                break;
            }
            keep_better(&mut best, (lattice_oscillation_unchecked(field, i, j, w), c * nr + r));
        }
        best
    });
    let descriptor = StrategyDescriptor {
        kind: kind.into(),
        h: g.h,
        radii: radii.iter().map(|&k| k as f64 * g.h).collect(),
        center_stride: stride,
        window,
        cap,
        candidates: centres.len() * nr,
    };
    let (value, cand) = best.ok_or(FieldError::NoAdmissibleBall)?;
    let (i, j) = centres[cand / nr];
    Ok(SeminormReport {
        name: format!("BMO^{mu}"),
        value,
        maximizer: Some(Ball::new(g.center(i, j), radii[cand % nr] as f64 * g.h)),
        strategy: descriptor,
        oracle: false,
    })
}

/// Exhaustive reference search for small grids: every admissible cell
/// centre and every radius, with containment checked cell by cell.
pub fn brute_force_oracle(
    field: &ScalarField,
    domain: &Domain,
    region: Region,
    mu: f64,
) -> Result<SeminormReport, FieldError> {
    let g = field.grid;
    if g.len() > ORACLE_MAX_CELLS {
        return Err(FieldError::TooLarge { cells: g.len(), limit: ORACLE_MAX_CELLS });
    }
    if !(mu > 0.0) {
        return Err(FieldError::InvalidParameter { name: "mu", value: mu });
    }
    let (kmax, cap) = max_radius_cells(&g, mu);
    let ok = |i: i64, j: i64| -> Result<Option<f64>, FieldError> {
        if i < 0 || j < 0 || i as usize >= g.nx || j as usize >= g.ny {
            return Ok(None);
        }
        let (i, j) = (i as usize, j as usize);
        let Some(v) = field.get(i, j) else { return Ok(None) };
        if region == Region::Domain && domain.signed_distance(g.center(i, j))? <= 0.0 {
            return Ok(None);
        }
        Ok(Some(v))
    };
    let mut best: Option<(f64, Ball)> = None;
    let mut candidates = 0;
    for j in 0..g.ny {
        for i in 0..g.nx {
            if ok(i as i64, j as i64)?.is_none() {
                continue;
            }
            'radii: for k in 1..=kmax {
                candidates += 1;
                let kk = (k * k) as i64;
                let mut values = Vec::new();
                for dj in -(k as i64)..=k as i64 {
                    for di in -(k as i64)..=k as i64 {
                        if di * di + dj * dj > kk {
                            continue;
                        }
                        match ok(i as i64 + di, j as i64 + dj)? {
                            Some(v) => values.push(v),
                            None => break 'radii,
                        }
                    }
                }
                let (n, _, total) = oscillation_sums(values.iter().copied()).expect("centre is admissible");
                let mo = total / n as f64;
                if best.map_or(true, |(b, _)| mo > b) {
                    best = Some((mo, Ball::new(g.center(i, j), k as f64 * g.h)));
                }
            }
        }
    }
    let (value, ball) = best.ok_or(FieldError::NoAdmissibleBall)?;
    Ok(SeminormReport {
        name: format!("BMO^{mu}"),
        value,
        maximizer: Some(ball),
        strategy: StrategyDescriptor {
            kind: "oracle".into(),
            h: g.h,
            radii: (1..=kmax).map(|k| k as f64 * g.h).collect(),
            center_stride: 1,
            window: None,
            cap,
            candidates,
        },
        oracle: true,
    })
}

/// Integration region of the uniformly local L¹ norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "delta")]
pub enum L1Region {
    /// Every masked cell.
    All,
    /// Masked cells with `0 < d < delta`.
    InnerBand(f64),
    /// Masked cells with `|d| < delta`.
    TwoSidedBand(f64),
}

fn region_mask(field: &ScalarField, domain: &Domain, region: L1Region) -> Result<Vec<bool>, FieldError> {
    let g = field.grid;
    (0..g.len())
        .into_par_iter()
        .map(|k| {
            if !field.mask()[k] {
                return Ok(false);
            }
            Ok(match region {
                L1Region::All => true,
                L1Region::InnerBand(delta) => {
                    let d = domain.signed_distance(g.center_of(k))?;
                    d > 0.0 && d < delta
                }
                L1Region::TwoSidedBand(delta) => domain.signed_distance(g.center_of(k))?.abs() < delta,
            })
        })
        .collect()
}

/// Sum of `|f|` over the cells with `|i - ci| <= widths[|j - cj|]`, clipped
/// to the grid.
fn lattice_abs_sum(g: &Grid, prefix: &[f64], ci: usize, cj: usize, widths: &[usize]) -> f64 {
    let k = widths.len() as i64 - 1;
    let stride = g.nx + 1;
    let mut s = 0.0;
    for dj in -k..=k {
        let j = cj as i64 + dj;
        if j < 0 || j >= g.ny as i64 {
            continue;
        }
        let w = widths[dj.unsigned_abs() as usize] as i64;
        let lo = (ci as i64 - w).max(0) as usize;
        let hi = ((ci as i64 + w) as usize).min(g.nx - 1);
        let row = &prefix[j as usize * stride..];
        s += row[hi + 1] - row[lo];
    }
    s
}

/// `sup_x int_{B_1(x) ∩ region} |f|` over every `stride`-th cell centre.
pub fn l1_ul_norm(
    field: &ScalarField,
    domain: &Domain,
    region: L1Region,
    stride: usize,
) -> Result<SeminormReport, FieldError> {
    if stride == 0 {
        return Err(FieldError::InvalidParameter { name: "stride", value: 0.0 });
    }
    let g = field.grid;
    let keep = region_mask(field, domain, region)?;
    let prefix = prefix_abs(field, &keep);
    let widths = real_half_widths(1.0 / g.h);
    let centres: Vec<(usize, usize)> =
        (0..g.ny).step_by(stride).flat_map(|j| (0..g.nx).step_by(stride).map(move |i| (i, j))).collect();
    let name = match region {
        L1Region::All => "L1_ul".to_owned(),
        L1Region::InnerBand(d) => format!("L1_ul(inner band {d})"),
        L1Region::TwoSidedBand(d) => format!("L1_ul(band {d})"),
    };
    let descriptor = StrategyDescriptor {
        kind: "unit balls".into(),
        h: g.h,
        radii: vec![1.0],
        center_stride: stride,
        window: None,
        cap: None,
        candidates: centres.len(),
    };
    let best = argmax(centres.len(), |c| {
        let (i, j) = centres[c];
        Some((lattice_abs_sum(&g, &prefix, i, j, &widths) * g.h * g.h, c))
    });
    match best {
        Some((value, c)) if value > 0.0 => {
            let (i, j) = centres[c];
            Ok(SeminormReport {
                name,
                value,
                maximizer: Some(Ball::new(g.center(i, j), 1.0)),
                strategy: descriptor,
                oracle: false,
            })
        }
        _ => Ok(SeminormReport::zero(&name, descriptor)),
    }
}

/// Which cells count towards the boundary-growth integral.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BSide {
    /// Masked cells inside the domain.
    Interior,
    /// Masked cells on both sides of the boundary.
    Both,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BOptions {
    /// Distance between boundary centres.
    pub spacing: f64,
    /// Radii are `k h` for `k = min_radius, min_radius + radius_stride, ...`.
    pub radius_stride: usize,
    /// Smallest radius in cells. Very small lattice balls over-count the
    /// half-disk area, so the default starts at 32 cells.
    pub min_radius: usize,
    pub side: BSide,
    /// Restricts boundary centres; defaults to the grid window.
    pub window: Option<Rect>,
}

impl Default for BOptions {
    fn default() -> Self {
        Self { spacing: 0.5, radius_stride: 1, min_radius: 32, side: BSide::Interior, window: None }
    }
}

/// `sup r^{-2} int_{B_r(x)} |f|` over boundary centres `x` and lattice radii
/// `r < nu` (`None` is infinite, capped at the window diagonal).
pub fn b_seminorm(
    field: &ScalarField,
    domain: &Domain,
    nu: Option<f64>,
    opts: &BOptions,
) -> Result<SeminormReport, FieldError> {
    if opts.radius_stride == 0 || !(opts.spacing > 0.0) {
        return Err(FieldError::InvalidParameter { name: "b options", value: opts.spacing });
    }
    let g = field.grid;
    let keep: Vec<bool> = match opts.side {
        BSide::Both => field.mask().to_vec(),
        BSide::Interior => admissible_mask(field, domain, Region::Domain)?,
    };
    let prefix = prefix_abs(field, &keep);
    let window = opts.window.unwrap_or_else(|| g.window());
    let centres = domain.boundary_samples(&window, opts.spacing);
    let diag = g.window().diagonal();
    let (limit, cap) = match nu {
        Some(nu) if nu.is_finite() => (nu, None),
        _ => (diag, Some(diag)),
    };
    let strict = cap.is_none();
    let radii: Vec<usize> = (opts.min_radius.max(1)..)
        .step_by(opts.radius_stride)
        .take_while(|&k| {
            let r = k as f64 * g.h;
            if strict {
                r < limit
            } else {
                r <= limit
            }
        })
        .collect();
    let nr = radii.len();
    let descriptor = StrategyDescriptor {
        kind: "boundary balls".into(),
        h: g.h,
        radii: radii.iter().map(|&k| k as f64 * g.h).collect(),
        center_stride: 0,
        window: Some(window),
        cap,
        candidates: centres.len() * nr,
    };
    let stride = g.nx + 1;
    let best = argmax(centres.len(), |c| {
        let x = centres[c];
        let mut best = None;
        for (ri, &k) in radii.iter().enumerate() {
            let r = k as f64 * g.h;
            let r2 = r * r;
            let j_lo = (((x.y - r - g.y0) / g.h - 0.5).ceil().max(0.0)) as usize;
            let j_hi = ((x.y + r - g.y0) / g.h - 0.5).floor();
            if j_hi < 0.0 {
                continue;
            }
            let j_hi = (j_hi as usize).min(g.ny - 1);
            let mut s = 0.0;
            for j in j_lo..=j_hi {
                let dy = g.y0 + (j as f64 + 0.5) * g.h - x.y;
                let w2 = r2 - dy * dy;
                if w2 < 0.0 {
                    continue;
                }
                let w = w2.sqrt();
                let lo = ((x.x - w - g.x0) / g.h - 0.5).ceil().max(0.0);
                let hi = ((x.x + w - g.x0) / g.h - 0.5).floor().min(g.nx as f64 - 1.0);
                if hi < lo {
                    continue;
                }
                let row = &prefix[j * stride..];
                s += row[hi as usize + 1] - row[lo as usize];
            }
            keep_better(&mut best, (s * g.h * g.h / r2, c * nr + ri));
        }
        best
    });
    let name = match nu {
        Some(nu) if nu.is_finite() => format!("b^{nu}"),
        _ => "b^inf".to_owned(),
    };
    match best {
        Some((value, cand)) if value > 0.0 => Ok(SeminormReport {
            name,
            value,
            maximizer: Some(Ball::new(centres[cand / nr], radii[cand % nr] as f64 * g.h)),
            strategy: descriptor,
            oracle: false,
        }),
        _ => Ok(SeminormReport::zero(&name, descriptor)),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositeNorms {
    pub mu: f64,
    pub delta: f64,
    pub nu: Option<f64>,
    pub bmo_mu: SeminormReport,
    pub l1_delta: SeminormReport,
    pub bmo_inf: SeminormReport,
    pub l1_all: SeminormReport,
    pub b_nu: SeminormReport,
    /// `[v]_{BMO^mu} + [v]_{L1_ul(inner band delta)}`.
    pub bmo_mu_delta: f64,
    /// `[v]_{BMO^inf} + [v]_{L1_ul}`.
    pub bmo_inf_inf: f64,
    /// `[v]_{BMO^mu} + [v]_{b^nu}`.
    pub bmo_b: f64,
}

/// Assembles the composite norms from the primitive estimators. Infinite
/// `mu`/`delta` reuse the corresponding primitive.
pub fn composite_norms(
    field: &ScalarField,
    domain: &Domain,
    mu: f64,
    delta: f64,
    nu: Option<f64>,
    strategy: &Strategy,
    l1_stride: usize,
    b_opts: &BOptions,
) -> Result<CompositeNorms, FieldError> {
    let bmo = |m: f64| match bmo_seminorm(field, domain, Region::Domain, m, strategy) {
        Err(FieldError::NoAdmissibleBall) if field.masked_count() == 0 => Ok(zero_bmo(field, m)),
        r => r,
    };
    let bmo_mu = bmo(mu)?;
    let bmo_inf = if mu.is_finite() { bmo(f64::INFINITY)? } else { bmo_mu.clone() };
    let l1_all = l1_ul_norm(field, domain, L1Region::All, l1_stride)?;
    let l1_delta = if delta.is_finite() {
        l1_ul_norm(field, domain, L1Region::InnerBand(delta), l1_stride)?
    } else {
        l1_all.clone()
    };
    let b_nu = b_seminorm(field, domain, nu, b_opts)?;
    Ok(CompositeNorms {
        mu,
        delta,
        nu,
        bmo_mu_delta: bmo_mu.value + l1_delta.value,
        bmo_inf_inf: bmo_inf.value + l1_all.value,
        bmo_b: bmo_mu.value + b_nu.value,
        bmo_mu,
        l1_delta,
        bmo_inf,
        l1_all,
        b_nu,
    })
}

fn zero_bmo(field: &ScalarField, mu: f64) -> SeminormReport {
    SeminormReport::zero(
        &format!("BMO^{mu}"),
        StrategyDescriptor {
            kind: "empty".into(),
            h: field.grid.h,
            radii: Vec::new(),
            center_stride: 0,
            window: None,
            cap: None,
            candidates: 0,
        },
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderOptions {
    /// Pairs closer than this distance are all visited.
    pub near_distance: f64,
    pub random_pairs: usize,
    pub seed: u64,
}

impl Default for HolderOptions {
    fn default() -> Self {
        Self { near_distance: 1.0, random_pairs: 10_000, seed: 0 }
    }
}

/// `sup |phi| + sup |phi(x) - phi(y)| / |x - y|^gamma`, the quotient taken
/// over every masked pair within `near_distance` and a seeded sample of
/// long-range pairs.
pub fn holder_norm(field: &ScalarField, gamma: f64, opts: &HolderOptions) -> Result<f64, FieldError> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(FieldError::InvalidParameter { name: "gamma", value: gamma });
    }
    let g = field.grid;
    let masked: Vec<usize> = (0..g.len()).filter(|&k| field.mask()[k]).collect();
    if masked.is_empty() {
        return Err(FieldError::EmptyIntersection);
    }
    let sup = field.max_abs();
    let reach = (opts.near_distance / g.h).floor() as i64;
    let r2 = (opts.near_distance / g.h).powi(2) * (1.0 + 1e-12);
    let offsets: Vec<(i64, i64, f64)> = (0..=reach)
        .flat_map(|dj| (-reach..=reach).map(move |di| (di, dj)))
        .filter(|&(di, dj)| (dj > 0 || di > 0) && ((di * di + dj * dj) as f64) <= r2)
        .map(|(di, dj)| (di, dj, (((di * di + dj * dj) as f64).sqrt() * g.h).powf(gamma)))
        .collect();
    let near = masked
        .par_iter()
        .map(|&k| {
            let (i, j) = ((k % g.nx) as i64, (k / g.nx) as i64);
            let v = field.values()[k];
            let mut m: f64 = 0.0;
            for &(di, dj, den) in &offsets {
                let (a, b) = (i + di, j + dj);
                if a < 0 || b < 0 || a >= g.nx as i64 || b >= g.ny as i64 {
                    continue;
                }
                if let Some(w) = field.get(a as usize, b as usize) {
                    m = m.max((v - w).abs() / den);
                }
            }
            m
        })
        .reduce(|| 0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut far: f64 = 0.0;
    for _ in 0..opts.random_pairs {
        let a = masked[rng.gen_range(0..masked.len())];
        let b = masked[rng.gen_range(0..masked.len())];
        if a == b {
            continue;
        }
        let dist = g.center_of(a).distance(g.center_of(b));
        far = far.max((field.values()[a] - field.values()[b]).abs() / dist.powf(gamma));
    }
    Ok(sup + near.max(far))
}
