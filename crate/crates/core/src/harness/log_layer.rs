use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::extension::{bmo_extend, ExtensionConfig};
use crate::field::{
    b_seminorm, bmo_seminorm, integrate_window, BOptions, BSide, Grid, Integrand, Region, ScalarField, SeminormReport,
    Strategy,
};
use crate::geometry::{Domain, Rect};

/// Vertical shift applied to the extended layer field.
const SHIFT: f64 = 2.0;
/// The half-plane window the shifted field lives on.
const WINDOW: (f64, f64, f64, f64) = (-8.0, 8.0, 0.0, 8.0);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolutionMax {
    pub h: f64,
    pub max_abs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogLayerReport {
    pub rho: f64,
    pub h: f64,
    pub grid: Grid,
    /// Lowest and highest `x2` of a nonzero cell.
    pub support: Option<(f64, f64)>,
    /// Every nonzero cell has `1 < x2 < 4`.
    pub support_ok: bool,
    pub b_inf: SeminormReport,
    pub bmo_inf: SeminormReport,
    /// `max |g|`, coarsest resolution first.
    pub max_abs: Vec<ResolutionMax>,
    /// `max |g|` strictly increases as `h` decreases.
    pub max_abs_grows: bool,
    pub interpolation_failures: usize,
}

fn layer() -> Domain {
    Domain::strip(0.0, 1.0)
}

/// `log x2` on the unit layer over a grid covering `[-8, 8] x [-2 rho, 1 + 2 rho]`,
/// extended at scale `rho`.
fn extended_layer(rho: f64, h: f64) -> Result<(ScalarField, usize), HarnessError> {
    let domain = layer();
    let grid = Grid::covering(&Rect::from_bounds(WINDOW.0, WINDOW.1, -2.0 * rho, 1.0 + 2.0 * rho), h)?;
    let f = ScalarField::sample_in(grid, &domain, |p| p.y.ln())?;
    let ext = bmo_extend(&f, &domain, &ExtensionConfig::new(rho))?;
    Ok((ext.extended, ext.summary.interpolation_failures))
}

fn whole_cells(x: f64) -> Option<usize> {
    let n = x.round();
    ((x - n).abs() < 1e-9 && n >= 0.0).then_some(n as usize)
}

/// Builds `g(x1, x2) = f~(x1, x2 - 2)` on the half-plane window
/// `[-8, 8] x [0, 8]`, where `f~` is the extension of `log x2` from the unit
/// layer, and measures its support, `b^inf` and `BMO^inf` seminorms and sup.
/// `coarser` extra resolutions `2h, 4h, ...` are used for the sup only.
pub fn example_log_layer(rho: f64, h: f64, coarser: usize) -> Result<LogLayerReport, HarnessError> {
    if !(rho > 0.0 && rho <= 0.25) {
        return Err(HarnessError::Config(format!("rho {rho} must lie in (0, 1/4]")));
    }
    let shift_cells = whole_cells((SHIFT - 2.0 * rho) / h)
        .ok_or_else(|| HarnessError::Config(format!("(2 - 2 rho) / h must be a whole number, h = {h}")))?;
    let (ext, interpolation_failures) = extended_layer(rho, h)?;
    let fg = ext.grid;

    let grid = Grid::covering(&Rect::from_bounds(WINDOW.0, WINDOW.1, WINDOW.2, WINDOW.3), h)?;
    if grid.nx != fg.nx || shift_cells + fg.ny > grid.ny {
        return Err(HarnessError::Config("layer grid does not fit the half-plane window".into()));
    }
    let mut values = vec![0.0; grid.len()];
    for j in 0..fg.ny {
        let row = grid.index(0, j + shift_cells);
        for i in 0..fg.nx {
            values[row + i] = ext.get(i, j).unwrap_or(0.0);
        }
    }
    drop(ext);
    let g = ScalarField::from_values(grid, values)?;

    let mut support: Option<(f64, f64)> = None;
    for j in 0..grid.ny {
        let row = &g.values()[grid.index(0, j)..grid.index(0, j) + grid.nx];
        if row.iter().any(|&v| v != 0.0) {
            let y = grid.center(0, j).y;
            support = Some(support.map_or((y, y), |(lo, hi)| (lo.min(y), hi.max(y))));
        }
    }
    let support_ok = support.map_or(true, |(lo, hi)| lo > 1.0 && hi < 4.0);

    let half_plane = Domain::half_plane();
    let b_opts = BOptions { spacing: 1.0, radius_stride: 4, min_radius: 32, side: BSide::Interior, window: None };
    let b_inf = b_seminorm(&g, &half_plane, None, &b_opts)?;
    let cells = |len: f64| ((len / h).round() as usize).max(1);
    let strategy = Strategy::Strided {
        stride: cells(0.125),
        radii: [1.0 / 128.0, 1.0 / 32.0, 0.125, 0.5].iter().map(|&r| cells(r)).collect(),
        window: Some(Rect::from_bounds(-1.0, 1.0, 1.0, 4.0)),
    };
    let bmo_inf = bmo_seminorm(&g, &half_plane, Region::Domain, f64::INFINITY, &strategy)?;
    let finest = g.max_abs();
    drop(g);

    let mut max_abs = Vec::with_capacity(coarser + 1);
    for level in (1..=coarser).rev() {
        let hl = h * f64::from(1u32 << level);
        max_abs.push(ResolutionMax { h: hl, max_abs: extended_layer(rho, hl)?.0.max_abs() });
    }
    max_abs.push(ResolutionMax { h, max_abs: finest });
    let max_abs_grows = max_abs.windows(2).all(|w| w[1].max_abs > w[0].max_abs);

    Ok(LogLayerReport {
        rho,
        h,
        grid,
        support,
        support_ok,
        b_inf,
        bmo_inf,
        max_abs,
        max_abs_grows,
        interpolation_failures,
    })
}

/// Midpoint quadrature of `int |log x2|` over the unit window
/// `[0, 1) x [0, 1)` of the layer.
pub fn layer_unit_integral(h: f64) -> Result<f64, HarnessError> {
    let grid = Grid::covering(&Rect::from_bounds(-0.5, 1.5, 0.0, 1.0), h)?;
    let f = ScalarField::sample_in(grid, &layer(), |p| p.y.ln())?;
    Ok(integrate_window(&f, &Rect::from_bounds(0.0, 1.0, 0.0, 1.0), Integrand::Abs)?)
}
