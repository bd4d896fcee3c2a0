use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::extension::NormOptions;
use crate::field::{Grid, HolderOptions, Strategy};
use crate::geometry::{admissible_rho, Domain, GeometryConstants, Rect};

fn default_epsilon() -> f64 {
    0.1
}

/// A domain together with the chart tolerance used to derive its scales.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainConfig {
    #[serde(flatten)]
    pub domain: Domain,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

impl DomainConfig {
    pub fn new(domain: Domain) -> Self {
        Self { domain, epsilon: default_epsilon() }
    }

    pub fn constants(&self) -> Result<GeometryConstants, HarnessError> {
        Ok(admissible_rho(&self.domain, self.epsilon)?)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(&std::fs::read_to_string(path)?)?;
        cfg.constants()?;
        Ok(cfg)
    }
}

/// Cell-centred grid over `[x0, x1] x [y0, y1]` with spacing `h`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
    pub h: f64,
}

impl GridSpec {
    pub fn window(&self) -> Rect {
        Rect::from_bounds(self.x0, self.x1, self.y0, self.y1)
    }

    pub fn grid(&self) -> Result<Grid, HarnessError> {
        Ok(Grid::covering(&self.window(), self.h)?)
    }

    pub fn refined(&self) -> Self {
        Self { h: 0.5 * self.h, ..*self }
    }
}

/// Seminorm search settings in physical lengths, so the same settings
/// describe the same balls at every resolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    /// Spacing of candidate ball centres.
    pub center_spacing: f64,
    pub radii: Vec<f64>,
    /// Spacing of the unit-ball centres of the L¹_ul search.
    pub l1_spacing: f64,
    /// Visit every centre and radius instead.
    #[serde(default)]
    pub exhaustive: bool,
    #[serde(default = "default_near_distance")]
    pub holder_near_distance: f64,
    #[serde(default = "default_random_pairs")]
    pub holder_random_pairs: usize,
}

fn default_near_distance() -> f64 {
    0.5
}

fn default_random_pairs() -> usize {
    10_000
}

fn cells(len: f64, h: f64) -> usize {
    ((len / h).round() as usize).max(1)
}

impl Default for EstimatorSpec {
    fn default() -> Self {
        Self {
            center_spacing: 1.0 / 16.0,
            radii: vec![1.0 / 32.0, 1.0 / 16.0, 0.125, 0.25, 0.5, 1.0],
            l1_spacing: 0.125,
            exhaustive: false,
            holder_near_distance: default_near_distance(),
            holder_random_pairs: default_random_pairs(),
        }
    }
}

impl EstimatorSpec {
    pub fn strategy(&self, h: f64) -> Strategy {
        if self.exhaustive {
            Strategy::Exhaustive
        } else {
            Strategy::strided(cells(self.center_spacing, h), self.radii.iter().map(|&r| cells(r, h)).collect())
        }
    }

    pub fn norm_options(&self, h: f64, seed: u64) -> NormOptions {
        NormOptions {
            strategy: self.strategy(h),
            l1_stride: cells(self.l1_spacing, h),
            holder: HolderOptions {
                near_distance: self.holder_near_distance,
                random_pairs: self.holder_random_pairs,
                seed,
            },
        }
    }

    fn validate(&self) -> Result<(), HarnessError> {
        let lengths = [self.center_spacing, self.l1_spacing, self.holder_near_distance];
        if lengths.iter().chain(&self.radii).any(|&l| !(l > 0.0 && l.is_finite())) || self.radii.is_empty() {
            return Err(HarnessError::Config("estimator lengths must be positive and finite".into()));
        }
        Ok(())
    }
}

/// Settings of the extension-ratio experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub id: String,
    pub domain: DomainConfig,
    pub grid: GridSpec,
    pub rhos: Vec<f64>,
    /// Local scale of the extended norm.
    pub mu: f64,
    /// Inner band of the input norm in the product sweep.
    pub delta: f64,
    /// Boundary-growth scale; absent means unbounded.
    #[serde(default)]
    pub nu: Option<f64>,
    /// Hölder exponent of the product multipliers.
    pub gamma: f64,
    #[serde(default)]
    pub estimator: EstimatorSpec,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            id: "extension-half-plane".into(),
            domain: DomainConfig::new(Domain::half_plane()),
            grid: GridSpec { x0: -2.0, x1: 2.0, y0: -1.0, y1: 2.0, h: 1.0 / 32.0 },
            rhos: vec![0.05, 0.1, 0.25],
            mu: 1.0,
            delta: 1.0,
            nu: None,
            gamma: 0.5,
            estimator: EstimatorSpec::default(),
            out_dir: None,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let constants = self.domain.constants()?;
        let g = &self.grid;
        if !(g.h > 0.0 && g.x1 > g.x0 && g.y1 > g.y0) || !g.window().is_valid() {
            return Err(HarnessError::Config("grid window and spacing must be positive".into()));
        }
        if self.rhos.is_empty() {
            return Err(HarnessError::Config("at least one rho is required".into()));
        }
        for &rho in &self.rhos {
            if !(rho > 0.0 && 2.0 * rho <= constants.reach) {
                return Err(HarnessError::Config(format!("rho {rho} must satisfy 0 < 2 rho <= {}", constants.reach)));
            }
        }
        if !(self.mu > 0.0) || !(self.delta > 0.0) || self.nu.is_some_and(|n| !(n > 0.0)) {
            return Err(HarnessError::Config("mu, delta and nu must be positive".into()));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(HarnessError::Config(format!("gamma {} must lie in (0, 1)", self.gamma)));
        }
        self.estimator.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig { nu: Some(0.5), ..Default::default() };
        let text = toml::to_string(&cfg).unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn minimal_toml() {
        let text = r#"
id = "disk"
rhos = [0.1]
mu = 1.0
delta = inf
gamma = 0.5

[domain]
shape = "disk"
epsilon = 0.05
[domain.parameters]
center = [0.0, 0.0]
radius = 1.0

[grid]
x0 = -1.5
x1 = 1.5
y0 = -1.5
y1 = 1.5
h = 0.03125
"#;
        let cfg: ExperimentConfig = toml::from_str(text).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.domain.epsilon, 0.05);
        assert!(cfg.delta.is_infinite());
        assert_eq!(cfg.estimator, EstimatorSpec::default());
    }

    #[test]
    fn rejects_bad_values() {
        let mut cfg = ExperimentConfig::default();
        cfg.rhos = vec![-0.1];
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.gamma = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.grid.h = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn physical_estimator_scales_with_h() {
        let spec = EstimatorSpec::default();
        match spec.strategy(1.0 / 64.0) {
            Strategy::Strided { stride, radii, .. } => {
                assert_eq!(stride, 4);
                assert_eq!(radii, vec![2, 4, 8, 16, 32, 64]);
            }
            s => panic!("{s:?}"),
        }
        assert_eq!(spec.norm_options(1.0 / 64.0, 3).l1_stride, 8);
    }
}
