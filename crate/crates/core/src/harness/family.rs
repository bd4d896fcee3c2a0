use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::field::{FieldError, Grid, ScalarField};
use crate::geometry::{Domain, Vec2};

/// Bumped whenever a member of [`TestField`] changes, since acceptance
/// numbers depend on the exact formulas.
pub const FAMILY_VERSION: u32 = 1;

/// The built-in test fields, each defined on the domain interior.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestField {
    Zero,
    Constant,
    /// `x1 / 2 + x2`.
    Linear,
    /// `sign(x1)`, a jump crossing the boundary.
    JumpAcross,
    /// `+1` within distance 1/4 of the boundary, `-1` beyond.
    JumpAlong,
    /// `log d(x)`.
    LogDistance,
    /// `sin(2 pi x1) cos(2 pi x2)`.
    Oscillatory,
}

impl TestField {
    pub const ALL: [TestField; 7] = [
        TestField::Zero,
        TestField::Constant,
        TestField::Linear,
        TestField::JumpAcross,
        TestField::JumpAlong,
        TestField::LogDistance,
        TestField::Oscillatory,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TestField::Zero => "zero",
            TestField::Constant => "constant",
            TestField::Linear => "linear",
            TestField::JumpAcross => "jump_across",
            TestField::JumpAlong => "jump_along",
            TestField::LogDistance => "log_distance",
            TestField::Oscillatory => "oscillatory",
        }
    }

    pub fn value(self, p: Vec2, d: f64) -> f64 {
        match self {
            TestField::Zero => 0.0,
            TestField::Constant => 1.0,
            TestField::Linear => 0.5 * p.x + p.y,
            TestField::JumpAcross => {
                if p.x >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
            TestField::JumpAlong => {
                if d < 0.25 {
                    1.0
                } else {
                    -1.0
                }
            }
            TestField::LogDistance => d.ln(),
            TestField::Oscillatory => (2.0 * PI * p.x).sin() * (2.0 * PI * p.y).cos(),
        }
    }

    pub fn sample(self, grid: Grid, domain: &Domain) -> Result<ScalarField, FieldError> {
        let d = |p: Vec2| domain.signed_distance(p).unwrap_or(f64::NAN);
        ScalarField::sample_in(grid, domain, |p| self.value(p, d(p)))
    }
}

/// Multipliers of the product sweep: `(name, phi)`.
pub const PRODUCT_MULTIPLIERS: [(&str, fn(Vec2) -> f64); 3] = [
    ("gaussian", |p| (-p.norm_squared()).exp()),
    ("wave", |p| 1.0 + 0.5 * (2.0 * PI * p.x).sin()),
    ("cusp", |p| p.x.abs().sqrt()),
];

/// A random smooth field plus a random jump:
/// `sum_k a_k sin(w_k . x + c_k) + b [n . x > t]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomField {
    pub modes: Vec<(f64, Vec2, f64)>,
    pub jump: f64,
    pub jump_normal: Vec2,
    pub jump_offset: f64,
}

impl RandomField {
    pub fn new(rng: &mut impl Rng) -> Self {
        let modes = (0..4)
            .map(|_| {
                let angle = rng.gen_range(0.0..2.0 * PI);
                let freq = rng.gen_range(0.5..6.0);
                (rng.gen_range(-1.0..1.0), Vec2::new(angle.cos(), angle.sin()) * freq, rng.gen_range(0.0..2.0 * PI))
            })
            .collect();
        let angle: f64 = rng.gen_range(0.0..2.0 * PI);
        Self {
            modes,
            jump: rng.gen_range(-1.0..1.0),
            jump_normal: Vec2::new(angle.cos(), angle.sin()),
            jump_offset: rng.gen_range(-0.5..0.5),
        }
    }

    pub fn value(&self, p: Vec2) -> f64 {
        let smooth: f64 = self.modes.iter().map(|&(a, w, c)| a * (w.dot(p) + c).sin()).sum();
        let step = if self.jump_normal.dot(p) > self.jump_offset { self.jump } else { 0.0 };
        smooth + step
    }

    pub fn sample(&self, grid: Grid, domain: &Domain) -> Result<ScalarField, FieldError> {
        ScalarField::sample_in(grid, domain, |p| self.value(p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn names_are_unique() {
        let mut names: Vec<_> = TestField::ALL.iter().map(|f| f.name()).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), TestField::ALL.len());
    }

    #[test]
    fn log_distance_on_half_plane() {
        let g = Grid::new(0.0, 0.0, 0.25, 2, 2).unwrap();
        let f = TestField::LogDistance.sample(g, &Domain::half_plane()).unwrap();
        assert_eq!(f.get(0, 0), Some(0.125f64.ln()));
    }

    #[test]
    fn random_fields_are_seeded() {
        let a = RandomField::new(&mut ChaCha8Rng::seed_from_u64(7));
        let b = RandomField::new(&mut ChaCha8Rng::seed_from_u64(7));
        assert_eq!(a, b);
        assert_ne!(a, RandomField::new(&mut ChaCha8Rng::seed_from_u64(8)));
    }
}
