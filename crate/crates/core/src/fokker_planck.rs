//! Conservative push-forward transport with explicit diffusion.
//!
//! The advective part moves each cell's mass by `X = Δt V` and splits it
//! over the 3x3 neighborhood with tensor-product weights
//!
//! ```text
//! Γ¹ = [(X¹)⁻, Δx¹ - |X¹|, (X¹)⁺] / Δx¹   for offsets -1, 0, +1
//! ```
//!
//! and likewise for Γ². The step is written as a gather over targets so the
//! summation order per cell is fixed regardless of threading.

use crate::error::{Error, Result};
use crate::fields::{total_mass, DensityField};
use crate::grid::{Grid, Vec2};
use crate::interaction::WallMask;
use crate::model::Model;
use crate::par::for_each_row;

const CFL_SLACK: f64 = 1e-12;
const NEGATIVE_TOL: f64 = -1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub mass_before: f64,
    pub mass_after: f64,
    /// Mass that left through open exit sides during the step.
    pub mass_evacuated: f64,
    pub max_speed_seen: f64,
    /// `(cell, mass)` for every boundary cell that lost mass outside.
    pub outflow: Vec<(usize, f64)>,
}

/// Normalized 1-D weights for offsets `-1, 0, +1`.
#[inline]
fn axis_weights(x: f64, h: f64) -> [f64; 3] {
    let ax = x.abs().min(h);
    [(-x).max(0.0) / h, (h - ax) / h, x.max(0.0) / h]
}

fn check_displacement(x: Vec2, g: &Grid) -> Result<()> {
    if x.x.abs() > g.dx1 * (1.0 + CFL_SLACK) {
        return Err(Error::Cfl { displacement: x.x.abs(), cell: g.dx1 });
    }
    if x.y.abs() > g.dx2 * (1.0 + CFL_SLACK) {
        return Err(Error::Cfl { displacement: x.y.abs(), cell: g.dx2 });
    }
    if !(x.x.is_finite() && x.y.is_finite()) {
        return Err(Error::internal("non-finite displacement"));
    }
    Ok(())
}

/// Share of a cell's mass landing on each neighbor, indexed `[dj + 1][di + 1]`.
pub fn gamma_weights(x_disp: Vec2, g: &Grid) -> Result<[[f64; 3]; 3]> {
    check_displacement(x_disp, g)?;
    let wx = axis_weights(x_disp.x, g.dx1);
    let wy = axis_weights(x_disp.y, g.dx2);
    let mut w = [[0.0; 3]; 3];
    for (row, &b) in w.iter_mut().zip(&wy) {
        for (cell, &a) in row.iter_mut().zip(&wx) {
            *cell = a * b;
        }
    }
    Ok(w)
}

/// `4σΔt <= Δx¹Δx²`, under which the explicit diffusion keeps densities nonnegative.
pub fn diffusion_is_positive(g: &Grid, sigma: f64) -> bool {
    4.0 * sigma * g.dt <= g.cell_area() * (1.0 + CFL_SLACK)
}

/// Whether the combined step stays nonnegative when every displacement is at most
/// `vmax Δt` per axis: the share a cell keeps must cover the diffusive loss.
pub fn transport_diffusion_is_positive(g: &Grid, sigma: f64, vmax: f64) -> bool {
    let keep = (1.0 - vmax * g.dt / g.dx1).max(0.0) * (1.0 - vmax * g.dt / g.dx2).max(0.0);
    4.0 * sigma * g.dt / g.cell_area() <= keep * (1.0 + CFL_SLACK)
}

/// Advances `rho` by one step under the per-cell control indices `alpha`.
/// Only cells carrying mass are held to the CFL bound.
pub fn push_forward_step(
    model: &Model,
    rho: &DensityField,
    alpha: &[u16],
    walls: &WallMask,
) -> Result<(DensityField, StepReport)> {
    let g = &model.grid;
    let cells = g.cells();
    if alpha.len() != cells || rho.values.len() != cells {
        return Err(Error::internal("push_forward_step: shape mismatch"));
    }

    let mut weights = vec![[0.0f64; 6]; cells];
    let mut max_speed: f64 = 0.0;
    for c in 0..cells {
        let (i, j) = g.coords(c);
        let k = alpha[c] as usize;
        if k >= model.controls.len() {
            return Err(Error::internal(format!("control index {k} out of range")));
        }
        if rho.values[c] == 0.0 {
            continue;
        }
        let v = model.velocity(rho, i, j, k, walls);
        let x = v * g.dt;
        check_displacement(x, g)?;
        max_speed = max_speed.max(v.x.abs().max(v.y.abs()));
        let wx = axis_weights(x.x, g.dx1);
        let wy = axis_weights(x.y, g.dx2);
        weights[c] = [wx[0], wx[1], wx[2], wy[0], wy[1], wy[2]];
    }

    let (n1, n2) = (g.n1 as i64, g.n2 as i64);
    let coef = model.sigma * g.dt / g.cell_area();
    let src = &rho.values;
    let mut out = vec![0.0; cells];
    for_each_row(model.exec, &mut out, g.n1, |j, row| {
        let j = j as i64;
        for (i, slot) in row.iter_mut().enumerate() {
            let i = i as i64;
            let mut acc = 0.0;
            for oy in -1i64..=1 {
                let s = j - oy;
                if s < 0 || s >= n2 {
                    continue;
                }
                for ox in -1i64..=1 {
                    let r = i - ox;
                    if r < 0 || r >= n1 {
                        continue;
                    }
                    let sc = (s * n1 + r) as usize;
                    let w = &weights[sc];
                    acc += src[sc] * w[(ox + 1) as usize] * w[(oy + 4) as usize];
                }
            }
            if coef > 0.0 {
                let c = (j * n1 + i) as usize;
                let center = src[c];
                let nb = |di: i64, dj: i64| {
                    let (a, b) = (i + di, j + dj);
                    if a < 0 || b < 0 || a >= n1 || b >= n2 {
                        center
                    } else {
                        src[(b * n1 + a) as usize]
                    }
                };
                acc += coef * (nb(1, 0) + nb(-1, 0) + nb(0, 1) + nb(0, -1) - 4.0 * center);
            }
            *slot = acc;
        }
    });

    for (c, v) in out.iter_mut().enumerate() {
        if *v < 0.0 {
            if *v < NEGATIVE_TOL || !v.is_finite() {
                let (i, j) = g.coords(c);
                return Err(Error::internal(format!("negative density {v:e} at ({i}, {j})")));
            }
            *v = 0.0;
        } else if !v.is_finite() {
            return Err(Error::internal("non-finite density"));
        }
    }

    let mut outflow = Vec::new();
    for c in 0..cells {
        let (i, j) = g.coords(c);
        if !g.is_ring(i, j) || src[c] == 0.0 {
            continue;
        }
        let w = &weights[c];
        let mut lost = 0.0;
        for oy in -1i64..=1 {
            for ox in -1i64..=1 {
                let (a, b) = (i as i64 + ox, j as i64 + oy);
                if a < 0 || b < 0 || a >= n1 || b >= n2 {
                    lost += w[(ox + 1) as usize] * w[(oy + 4) as usize];
                }
            }
        }
        if lost > 0.0 {
            outflow.push((c, lost * src[c] * g.cell_area()));
        }
    }

    let next = DensityField {
        n1: g.n1,
        n2: g.n2,
        values: out,
    };
    let report = StepReport {
        mass_before: total_mass(rho, g),
        mass_after: total_mass(&next, g),
        mass_evacuated: outflow.iter().map(|&(_, m)| m).sum(),
        max_speed_seen: max_speed,
        outflow,
    };
    Ok((next, report))
}

/// Zeroes the density on target cells and returns what was removed, per cell.
pub fn absorb_target_mass(rho: &mut DensityField, target: &[bool], g: &Grid) -> Vec<(usize, f64)> {
    let area = g.cell_area();
    let mut removed = Vec::new();
    for (c, v) in rho.values.iter_mut().enumerate() {
        if target[c] && *v > 0.0 {
            removed.push((c, *v * area));
            *v = 0.0;
        }
    }
    removed
}
