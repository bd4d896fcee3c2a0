use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::family::{TestField, FAMILY_VERSION, PRODUCT_MULTIPLIERS};
use super::{ExperimentConfig, HarnessError};
use crate::extension::{bmo_extend, local_bmo_norm, support_violations, verify_product_estimate, ExtensionConfig};
use crate::field::{L1Region, Region, ScalarField};
use crate::geometry::GeometryConstants;

/// One `(rho, field)` entry of the ratio table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub rho: f64,
    pub field: String,
    /// `[v~]_{BMO^mu(R^2)} + [v~]_{L1_ul}`.
    pub extended_norm: f64,
    /// `[v]_{BMO^inf(Omega)} + [v]_{L1_ul}`.
    pub input_norm: f64,
    pub ratio: Option<f64>,
    /// Set when the ratio is undefined; such rows are left out of the fits.
    pub flagged: bool,
    pub restriction_error: f64,
    pub support_violations: usize,
    pub interpolation_failures: usize,
    pub below_threshold: bool,
}

/// Least-squares slope of `log ratio` against `log rho`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub field: String,
    pub slope: Option<f64>,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductRow {
    pub multiplier: String,
    pub field: String,
    pub product_norm: f64,
    pub holder_norm: f64,
    pub field_norm: f64,
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub id: String,
    pub family_version: u32,
    pub config: ExperimentConfig,
    pub constants: GeometryConstants,
    pub rows: Vec<RatioRow>,
    pub fits: Vec<SlopeFit>,
    pub products: Vec<ProductRow>,
}

/// Slope of the least-squares line through `(ln x, ln y)`; `None` with
/// fewer than two distinct abscissae.
pub fn fit_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn restriction_error(v: &ScalarField, ext: &ScalarField) -> f64 {
    (0..v.grid.len()).filter_map(|k| Some((v.at(k)? - ext.at(k).unwrap_or(f64::NAN)).abs())).fold(0.0, |m, d| {
        if d > m || d.is_nan() {
            d
        } else {
            m
        }
    })
}

/// Extends every built-in test field at every `rho` and tabulates
/// `||v~||_{bmo(R^2)} / ||v||_{bmo^inf_inf(Omega)}`. Rows are computed in
/// parallel and assembled in `(rho, field)` order.
pub fn run_extension_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    config.validate()?;
    let domain = &config.domain.domain;
    let grid = config.grid.grid()?;
    let opts = config.estimator.norm_options(grid.h, config.seed);
    let fields: Vec<ScalarField> = TestField::ALL.iter().map(|f| f.sample(grid, domain)).collect::<Result<_, _>>()?;

    let input_norms: Vec<f64> = fields
        .par_iter()
        .map(|v| Ok(local_bmo_norm(v, domain, Region::Domain, f64::INFINITY, L1Region::All, &opts)?.total))
        .collect::<Result<_, HarnessError>>()?;

    let jobs: Vec<(f64, usize)> =
        config.rhos.iter().flat_map(|&rho| (0..fields.len()).map(move |f| (rho, f))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(rho, f)| -> Result<RatioRow, HarnessError> {
            let v = &fields[f];
            let ext = bmo_extend(
                v,
                domain,
                &ExtensionConfig { epsilon: config.domain.epsilon, ..ExtensionConfig::new(rho) },
            )?;
            let lhs = local_bmo_norm(&ext.extended, domain, Region::Whole, config.mu, L1Region::All, &opts)?.total;
            let rhs = input_norms[f];
            let ratio = (rhs > 0.0).then(|| lhs / rhs);
            Ok(RatioRow {
                rho,
                field: TestField::ALL[f].name().into(),
                extended_norm: lhs,
                input_norm: rhs,
                ratio,
                flagged: ratio.is_none(),
                restriction_error: restriction_error(v, &ext.extended),
                support_violations: support_violations(&ext.extended, domain, rho)?,
                interpolation_failures: ext.summary.interpolation_failures,
                below_threshold: ext.summary.below_threshold,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let fits = TestField::ALL
        .iter()
        .map(|f| {
            let pts: Vec<(f64, f64)> =
                rows.iter().filter(|r| r.field == f.name()).filter_map(|r| Some((r.rho, r.ratio?))).collect();
            SlopeFit { field: f.name().into(), slope: fit_slope(&pts), points: pts.len() }
        })
        .collect();

    let sweep = [TestField::LogDistance, TestField::JumpAcross, TestField::Oscillatory];
    let pairs: Vec<(usize, TestField)> =
        (0..PRODUCT_MULTIPLIERS.len()).flat_map(|m| sweep.iter().map(move |&f| (m, f))).collect();
    let products = pairs
        .par_iter()
        .map(|&(m, f)| -> Result<ProductRow, HarnessError> {
            let (name, phi) = PRODUCT_MULTIPLIERS[m];
            let phi = ScalarField::sample_in(grid, domain, phi)?;
            let v = &fields[TestField::ALL.iter().position(|&t| t == f).expect("member")];
            let r = verify_product_estimate(&phi, v, domain, config.gamma, config.mu, config.delta, &opts)?;
            Ok(ProductRow {
                multiplier: name.into(),
                field: f.name().into(),
                product_norm: r.product_norm,
                holder_norm: r.holder_norm,
                field_norm: r.field_norm,
                ratio: r.ratio,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    Ok(ExperimentReport {
        id: config.id.clone(),
        family_version: FAMILY_VERSION,
        config: config.clone(),
        constants: config.domain.constants()?,
        rows,
        fits,
        products,
    })
}

impl ExperimentReport {
    pub fn write_json(&self, w: impl Write) -> Result<(), HarnessError> {
        let mut w = w;
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w)?;
        Ok(())
    }

    /// `(rho, field, ratio, ...)` rows for external plotting.
    pub fn write_ratio_csv(&self, w: impl Write) -> Result<(), HarnessError> {
        let mut out = csv::Writer::from_writer(w);
        for row in &self.rows {
            out.serialize(row)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Writes `report.json`, `ratios.csv` and `products.csv` into `dir`.
    pub fn write_outputs(&self, dir: &Path) -> Result<(), HarnessError> {
        std::fs::create_dir_all(dir)?;
        self.write_json(BufWriter::new(File::create(dir.join("report.json"))?))?;
        self.write_ratio_csv(File::create(dir.join("ratios.csv"))?)?;
        let mut out = csv::Writer::from_path(dir.join("products.csv"))?;
        for row in &self.products {
            out.serialize(row)?;
        }
        out.flush()?;
        Ok(())
    }
}
