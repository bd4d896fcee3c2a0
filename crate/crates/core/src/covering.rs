//! Dyadic boundary atlas, the smooth cutoff `theta`, and the partition of
//! unity subordinate to the boundary neighbourhoods.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{neighborhood_contains, BoundaryPoint, Domain, GeometryError, NormalChart, Rect, Vec2, DIM};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoveringError {
    #[error("atlas scale {rho} is invalid: 2 rho must stay below the reach {reach}")]
    InvalidScale { rho: f64, reach: f64 },
    #[error("bounding box does not meet the boundary")]
    EmptyAtlas,
    #[error("bounding box is degenerate")]
    InvalidWindow,
    #[error("point {0:?} is not covered by any seed neighbourhood")]
    UncoveredPoint(Vec2),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

const SUBSAMPLES: usize = 5;
const BISECTION_STEPS: usize = 60;
const ARC_SAMPLES: usize = 65;

/// `exp(-1/t)` for `t > 0`, else 0.
#[inline]
fn smooth_step_kernel(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Smooth cutoff, evaluated on `|t|`: 1 for `|t| <= 1`, 0 for `|t| >= 2`.
pub fn mollifier_theta(t: f64) -> f64 {
    let t = t.abs();
    let a = smooth_step_kernel(2.0 - t);
    let b = smooth_step_kernel(t - 1.0);
    a / (a + b)
}

/// `theta(d(x) / rho)`: 1 within `rho` of the boundary, 0 beyond `2 rho`.
pub fn boundary_cutoff(domain: &Domain, rho: f64, x: Vec2) -> Result<f64, GeometryError> {
    Ok(mollifier_theta(domain.signed_distance(x)? / rho))
}

/// Seeds of the dyadic boundary cover with their overlap graph.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundaryAtlas {
    pub rho: f64,
    pub k_star: i32,
    pub square_side: f64,
    pub bbox: Rect,
    /// Dyadic square index `(m1, m2)` of each seed, sorted.
    pub squares: Vec<(i64, i64)>,
    pub seeds: Vec<BoundaryPoint>,
    /// Indices `j != i` with `U_{2 rho}(x_i)` meeting `U_{2 rho}(x_j)`.
    pub neighbors: Vec<Vec<usize>>,
    /// Whether `rho < rho0 / 2`, the regime where the chart bounds apply.
    pub in_regime: bool,
    #[serde(skip)]
    index: SeedIndex,
}

impl BoundaryAtlas {
    /// Scale of the seed neighbourhoods, `2 rho`.
    pub fn cover_scale(&self) -> f64 {
        2.0 * self.rho
    }

    pub fn len(&self) -> usize {
        self.seeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seeds.is_empty()
    }

    pub fn max_neighbors(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Seeds within `radius` of `x`, in increasing index order.
    pub fn seeds_near(&self, x: Vec2, radius: f64) -> Vec<usize> {
        self.index.query(&self.seeds, x, radius)
    }

    /// Serializable dump consumed by plotting tools.
    pub fn dump(&self) -> AtlasDump {
        AtlasDump {
            rho: self.rho,
            k_star: self.k_star,
            square_side: self.square_side,
            bbox: self.bbox,
            in_regime: self.in_regime,
            seeds: self
                .seeds
                .iter()
                .zip(&self.squares)
                .enumerate()
                .map(|(index, (s, &square))| SeedRecord { index, square, position: s.position, normal: s.normal })
                .collect(),
            neighbors: self.neighbors.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SeedRecord {
    pub index: usize,
    pub square: (i64, i64),
    pub position: Vec2,
    pub normal: Vec2,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct AtlasDump {
    pub rho: f64,
    pub k_star: i32,
    pub square_side: f64,
    pub bbox: Rect,
    pub in_regime: bool,
    pub seeds: Vec<SeedRecord>,
    pub neighbors: Vec<Vec<usize>>,
}

/// Uniform hash grid over seed positions.
#[derive(Clone, Debug, Default)]
struct SeedIndex {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl SeedIndex {
    fn build(seeds: &[BoundaryPoint], cell: f64) -> Self {
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, s) in seeds.iter().enumerate() {
            buckets.entry(Self::key(s.position, cell)).or_default().push(i);
        }
        Self { cell, buckets }
    }

    fn key(p: Vec2, cell: f64) -> (i64, i64) {
        ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64)
    }

    fn query(&self, seeds: &[BoundaryPoint], x: Vec2, radius: f64) -> Vec<usize> {
        if self.cell <= 0.0 {
            return Vec::new();
        }
        let reach = (radius / self.cell).ceil() as i64;
        let (kx, ky) = Self::key(x, self.cell);
        let mut out = Vec::new();
        for dx in -reach..=reach {
            for dy in -reach..=reach {
                if let Some(b) = self.buckets.get(&(kx + dx, ky + dy)) {
                    out.extend(b.iter().copied().filter(|&i| seeds[i].position.distance(x) < radius));
                }
            }
        }
        out.sort_unstable();
        out
    }
}

/// Smallest integer `k` with `2^-k <= rho / sqrt(n)`.
pub fn dyadic_level(rho: f64) -> i32 {
    let target = rho / f64::from(DIM).sqrt();
    let mut k = (-target.log2()).ceil() as i32;
    while 2f64.powi(-(k - 1)) <= target {
        k -= 1;
    }
    while 2f64.powi(-k) > target {
        k += 1;
    }
    k
}

/// Builds the dyadic boundary cover at scale `rho` inside `bbox`.
///
/// Squares of side `2^-k*` meeting the boundary are detected by a sign
/// change of `d` over a 5x5 sub-sampling (interior is `d > 0`, so a square
/// whose top edge lies on the boundary does not count). One seed per square
/// is placed by bisection along the first sign-changing sub-edge.
pub fn build_atlas(domain: &Domain, rho: f64, bbox: Rect) -> Result<BoundaryAtlas, CoveringError> {
    let reach = domain.reach();
    if !(rho > 0.0 && rho.is_finite() && 2.0 * rho < reach) {
        return Err(CoveringError::InvalidScale { rho, reach });
    }
    if !bbox.is_valid() {
        return Err(CoveringError::InvalidWindow);
    }
    let k_star = dyadic_level(rho);
    let side = 2f64.powi(-k_star);
    let m_range = |lo: f64, hi: f64| ((lo / side).floor() as i64)..((hi / side).ceil() as i64);

    let mut squares = Vec::new();
    let mut seeds = Vec::new();
    for m2 in m_range(bbox.min.y, bbox.max.y) {
        for m1 in m_range(bbox.min.x, bbox.max.x) {
            if let Some(p) = seed_in_square(domain, m1, m2, side)? {
                let bp = domain.project(p)?;
                squares.push((m1, m2));
                seeds.push(bp);
            }
        }
    }
    if seeds.is_empty() {
        return Err(CoveringError::EmptyAtlas);
    }
    // sorted seed ordering by square index
    let mut order: Vec<usize> = (0..seeds.len()).collect();
    order.sort_by_key(|&i| squares[i]);
    let squares: Vec<_> = order.iter().map(|&i| squares[i]).collect();
    let seeds: Vec<_> = order.iter().map(|&i| seeds[i]).collect();

    let scale = 2.0 * rho;
    // sup_{y in U_{2rho}(x)} |y - x| < 5 rho, so overlaps need |x_i - x_j| < 10 rho.
    let index = SeedIndex::build(&seeds, 10.0 * rho);
    let arcs: Vec<Vec<Vec2>> = seeds.iter().map(|s| arc_samples(domain, s, scale)).collect::<Result<_, _>>()?;
    let mut neighbors = vec![Vec::new(); seeds.len()];
    for i in 0..seeds.len() {
        for j in index.query(&seeds, seeds[i].position, 10.0 * rho) {
            if j <= i {
                continue;
            }
            let overlap = arcs[i].iter().any(|&p| neighborhood_contains(domain, &seeds[j], scale, p))
                || arcs[j].iter().any(|&p| neighborhood_contains(domain, &seeds[i], scale, p));
            if overlap {
                neighbors[i].push(j);
                neighbors[j].push(i);
            }
        }
    }
    for n in &mut neighbors {
        n.sort_unstable();
    }

    Ok(BoundaryAtlas {
        rho,
        k_star,
        square_side: side,
        bbox,
        squares,
        seeds,
        neighbors,
        in_regime: rho < 0.5 * domain.rho0(),
        index: SeedIndex::build(&[], 0.0),
    }
    .with_index(5.0 * rho))
}

impl BoundaryAtlas {
    fn with_index(mut self, cell: f64) -> Self {
        self.index = SeedIndex::build(&self.seeds, cell);
        self
    }
}

/// Boundary points of the arc `{|eta'| < scale}` around `seed`, denser near
/// the ends so thin overlaps are still detected.
fn arc_samples(domain: &Domain, seed: &BoundaryPoint, scale: f64) -> Result<Vec<Vec2>, GeometryError> {
    let chart = NormalChart::new(*seed, scale);
    let mut s: Vec<f64> =
        (0..ARC_SAMPLES).map(|k| scale * (2.0 * k as f64 / (ARC_SAMPLES - 1) as f64 - 1.0) * (1.0 - 1e-9)).collect();
    s.extend([-1.0 + 1e-6, 1.0 - 1e-6].map(|f| f * scale));
    s.into_iter().map(|t| chart.boundary_over(domain, t).map(|b| b.position)).collect()
}

/// Seed inside the half-open square `[m1 s, (m1+1) s) x [m2 s, (m2+1) s)`,
/// or `None` when the sub-sampling sees no boundary crossing.
fn seed_in_square(domain: &Domain, m1: i64, m2: i64, side: f64) -> Result<Option<Vec2>, GeometryError> {
    let q = side / (SUBSAMPLES - 1) as f64;
    let origin = Vec2::new(m1 as f64 * side, m2 as f64 * side);
    let mut pts = [[Vec2::ZERO; SUBSAMPLES]; SUBSAMPLES];
    let mut ds = [[0.0; SUBSAMPLES]; SUBSAMPLES];
    let (mut any_in, mut any_out) = (false, false);
    for b in 0..SUBSAMPLES {
        for a in 0..SUBSAMPLES {
            let p = origin + Vec2::new(a as f64 * q, b as f64 * q);
            let d = domain.signed_distance(p)?;
            pts[b][a] = p;
            ds[b][a] = d;
            any_in |= d > 0.0;
            any_out |= d <= 0.0;
        }
    }
    if !(any_in && any_out) {
        return Ok(None);
    }
    let mut edges = Vec::with_capacity(2 * SUBSAMPLES * (SUBSAMPLES - 1));
    for b in 0..SUBSAMPLES {
        for a in 0..SUBSAMPLES - 1 {
            edges.push(((a, b), (a + 1, b)));
        }
    }
    for a in 0..SUBSAMPLES {
        for b in 0..SUBSAMPLES - 1 {
            edges.push(((a, b), (a, b + 1)));
        }
    }
    for ((a0, b0), (a1, b1)) in edges {
        let (d0, d1) = (ds[b0][a0], ds[b1][a1]);
        if (d0 > 0.0) == (d1 > 0.0) {
            continue;
        }
        // invariant: d(lo) <= 0 < d(hi)
        let (mut lo, mut hi) = if d0 > 0.0 { (pts[b1][a1], pts[b0][a0]) } else { (pts[b0][a0], pts[b1][a1]) };
        for _ in 0..BISECTION_STEPS {
            let mid = (lo + hi) * 0.5;
            if domain.signed_distance(mid)? > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        return Ok(Some(lo));
    }
    Ok(None)
}

/// Partition weights at a point: active seeds and their `phi_i(x)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PartitionWeights {
    pub point: Vec2,
    pub seeds: Vec<usize>,
    pub weights: Vec<f64>,
}

impl PartitionWeights {
    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Pre-weight `theta(2 |eta'_i(x)| / c)` with `c = 2 rho`, supported in
/// `U_c(x_i)`.
fn pre_weight(atlas: &BoundaryAtlas, domain: &Domain, i: usize, x: Vec2) -> f64 {
    let c = atlas.cover_scale();
    let seed = &atlas.seeds[i];
    if !neighborhood_contains(domain, seed, c, x) {
        return 0.0;
    }
    match domain.project(x) {
        Ok(bp) => {
            let eta = NormalChart::new(*seed, c).tangential(bp.position);
            mollifier_theta(2.0 * eta / c)
        }
        Err(_) => 0.0,
    }
}

/// `phi_i(x) = pre_i / (pre_i + sum over neighbours of i)`.
pub fn partition_weight_of(atlas: &BoundaryAtlas, domain: &Domain, i: usize, x: Vec2) -> f64 {
    let own = pre_weight(atlas, domain, i, x);
    if own == 0.0 {
        return 0.0;
    }
    let others: f64 = atlas.neighbors[i].iter().map(|&j| pre_weight(atlas, domain, j, x)).sum();
    own / (own + others)
}

/// Evaluates every partition function that is active at `x`.
pub fn partition_weights(atlas: &BoundaryAtlas, domain: &Domain, x: Vec2) -> Result<PartitionWeights, CoveringError> {
    let c = atlas.cover_scale();
    // sup over U_c(x_i) of |y - x_i| is below 2.5 c
    let candidates = atlas.seeds_near(x, 2.5 * c);
    let active: Vec<usize> =
        candidates.into_iter().filter(|&i| neighborhood_contains(domain, &atlas.seeds[i], c, x)).collect();
    if active.is_empty() {
        return Err(CoveringError::UncoveredPoint(x));
    }
    let pre: HashMap<usize, f64> = active.iter().map(|&i| (i, pre_weight(atlas, domain, i, x))).collect();
    let mut weights = Vec::with_capacity(active.len());
    for &i in &active {
        let own = pre[&i];
        let others: f64 = atlas.neighbors[i].iter().map(|j| pre.get(j).copied().unwrap_or(0.0)).sum();
        let denom = own + others;
        if denom <= 0.0 {
            return Err(CoveringError::UncoveredPoint(x));
        }
        weights.push(own / denom);
    }
    Ok(PartitionWeights { point: x, seeds: active, weights })
}
