use serde::{Deserialize, Serialize};

use super::{Ball, FieldError, ScalarField};
use crate::geometry::Rect;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrand {
    Raw,
    Abs,
    DeviationFromMean,
}

/// Cells of the infinite lattice whose centres lie in the closed ball, as
/// signed `(i, j)` indices relative to the grid origin.
pub(crate) fn ball_cells(field: &ScalarField, ball: &Ball) -> impl Iterator<Item = (i64, i64)> {
    let g = field.grid;
    let (c, r) = (ball.center, ball.radius);
    let j_lo = ((c.y - r - g.y0) / g.h - 0.5).ceil() as i64 - 1;
    let j_hi = ((c.y + r - g.y0) / g.h - 0.5).floor() as i64 + 1;
    let r2 = r * r;
    (j_lo..=j_hi).flat_map(move |j| {
        let yc = g.y0 + (j as f64 + 0.5) * g.h;
        let dy = yc - c.y;
        let w2 = r2 - dy * dy;
        let range = if w2 < 0.0 {
            1..=0
        } else {
            let w = w2.sqrt();
            let lo = ((c.x - w - g.x0) / g.h - 0.5).ceil() as i64 - 1;
            let hi = ((c.x + w - g.x0) / g.h - 0.5).floor() as i64 + 1;
            lo..=hi
        };
        range.filter_map(move |i| {
            let xc = g.x0 + (i as f64 + 0.5) * g.h;
            let dx = xc - c.x;
            (dx * dx + dy * dy <= r2).then_some((i, j))
        })
    })
}

fn in_grid(field: &ScalarField, (i, j): (i64, i64)) -> Option<(usize, usize)> {
    let g = field.grid;
    (i >= 0 && j >= 0 && (i as usize) < g.nx && (j as usize) < g.ny).then(|| (i as usize, j as usize))
}

/// Shifted two-pass statistics: `(count, mean, sum |f - mean|)`. Shifting by
/// the first value keeps constants exact.
pub(crate) fn oscillation_sums(values: impl Iterator<Item = f64> + Clone) -> Option<(usize, f64, f64)> {
    let mut it = values.clone();
    let shift = it.next()?;
    let (mut n, mut s) = (1usize, 0.0);
    for v in it {
        n += 1;
        s += v - shift;
    }
    let dev_mean = s / n as f64;
    let total: f64 = values.map(|v| ((v - shift) - dev_mean).abs()).sum();
    Some((n, shift + dev_mean, total))
}

/// Midpoint rule over the masked cells whose centres lie in the closed ball.
pub fn integrate_ball(field: &ScalarField, ball: &Ball, integrand: Integrand) -> Result<f64, FieldError> {
    let values: Vec<f64> =
        ball_cells(field, ball).filter_map(|c| in_grid(field, c)).filter_map(|(i, j)| field.get(i, j)).collect();
    if values.is_empty() {
        return Err(FieldError::EmptyIntersection);
    }
    let area = field.grid.h * field.grid.h;
    Ok(match integrand {
        Integrand::Raw => area * values.iter().sum::<f64>(),
        Integrand::Abs => area * values.iter().map(|v| v.abs()).sum::<f64>(),
        Integrand::DeviationFromMean => {
            let (_, _, total) = oscillation_sums(values.iter().copied()).expect("non-empty");
            area * total
        }
    })
}

/// Midpoint rule over the masked cells whose centres lie in the half-open
/// window `[x0, x1) x [y0, y1)`.
pub fn integrate_window(field: &ScalarField, window: &Rect, integrand: Integrand) -> Result<f64, FieldError> {
    let g = field.grid;
    let mut values = Vec::new();
    for j in 0..g.ny {
        for i in 0..g.nx {
            let p = g.center(i, j);
            if p.x >= window.min.x && p.x < window.max.x && p.y >= window.min.y && p.y < window.max.y {
                if let Some(v) = field.get(i, j) {
                    values.push(v);
                }
            }
        }
    }
    if values.is_empty() {
        return Err(FieldError::EmptyIntersection);
    }
    let area = g.h * g.h;
    Ok(match integrand {
        Integrand::Raw => area * values.iter().sum::<f64>(),
        Integrand::Abs => area * values.iter().map(|v| v.abs()).sum::<f64>(),
        Integrand::DeviationFromMean => area * oscillation_sums(values.iter().copied()).expect("non-empty").2,
    })
}

/// `|B|^{-1} int_B |f - f_B|` where `|B|` and `f_B` use the same cell set
/// as the integral. Every covered cell must exist and be masked.
pub fn mean_oscillation(field: &ScalarField, ball: &Ball) -> Result<f64, FieldError> {
    let mut values = Vec::new();
    for c in ball_cells(field, ball) {
        let v = in_grid(field, c).and_then(|(i, j)| field.get(i, j)).ok_or(FieldError::BallNotContained)?;
        values.push(v);
    }
    let (n, _, total) = oscillation_sums(values.iter().copied()).ok_or(FieldError::EmptyIntersection)?;
    Ok(total / n as f64)
}

/// Mean oscillation over the lattice ball of radius `k h` centred at cell
/// `(i, j)`: the cells with `di^2 + dj^2 <= k^2`.
pub fn lattice_mean_oscillation(field: &ScalarField, i: usize, j: usize, k: usize) -> Result<f64, FieldError> {
    let widths = super::lattice_half_widths(k);
    let (i, j, k) = (i as i64, j as i64, k as i64);
    let mut values = Vec::new();
    for dj in -k..=k {
        let w = widths[dj.unsigned_abs() as usize] as i64;
        for di in -w..=w {
            let v = in_grid(field, (i + di, j + dj))
                .and_then(|(a, b)| field.get(a, b))
                .ok_or(FieldError::BallNotContained)?;
            values.push(v);
        }
    }
    let (n, _, total) = oscillation_sums(values.iter().copied()).ok_or(FieldError::EmptyIntersection)?;
    Ok(total / n as f64)
}

/// Lattice mean oscillation without containment checks; the ball must lie
/// inside the grid and on masked cells.
pub(crate) fn lattice_oscillation_unchecked(field: &ScalarField, i: usize, j: usize, widths: &[usize]) -> f64 {
    let g = field.grid;
    let k = widths.len() - 1;
    let values = field.values();
    let cells = (0..=2 * k).flat_map(move |r| {
        let w = widths[r.abs_diff(k)];
        let base = g.index(i - w, j + r - k);
        values[base..=base + 2 * w].iter().copied()
    });
    let (n, _, total) = oscillation_sums(cells).expect("non-empty lattice ball");
    total / n as f64
}
