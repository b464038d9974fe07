//! Uniform space-time grid over `[origin, origin + size] x [0, T]`.
//!
//! Every field stores one value per cell, located at the cell center
//! `x_i = origin + (i + 1/2) dx`. Cell `(i, j)` lives at linear index
//! `j * n1 + i`, so row `j = 0` is the bottom of the domain.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point or vector of the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub n1: usize,
    pub n2: usize,
    pub dx1: f64,
    pub dx2: f64,
    pub dt: f64,
    pub nt: usize,
    pub origin: Vec2,
}

impl Grid {
    /// Builds the grid for a `size[0] x size[1]` domain anchored at the origin.
    pub fn new(size: [f64; 2], n1: usize, n2: usize, horizon: f64, nt: usize) -> Result<Grid> {
        Self::with_origin(Vec2::ZERO, size, n1, n2, horizon, nt)
    }

    pub fn with_origin(
        origin: Vec2,
        size: [f64; 2],
        n1: usize,
        n2: usize,
        horizon: f64,
        nt: usize,
    ) -> Result<Grid> {
        if n1 == 0 {
            return Err(Error::config("grid.n1", "must be at least 1"));
        }
        if n2 == 0 {
            return Err(Error::config("grid.n2", "must be at least 1"));
        }
        if nt == 0 {
            return Err(Error::config("grid.nt", "must be at least 1"));
        }
        for (axis, s) in size.iter().enumerate() {
            if !(s.is_finite() && *s > 0.0) {
                return Err(Error::config(
                    format!("grid.size[{axis}]"),
                    format!("must be positive, got {s}"),
                ));
            }
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::config(
                "grid.horizon",
                format!("must be positive, got {horizon}"),
            ));
        }
        Ok(Grid {
            n1,
            n2,
            dx1: size[0] / n1 as f64,
            dx2: size[1] / n2 as f64,
            dt: horizon / nt as f64,
            nt,
            origin,
        })
    }

    pub fn cells(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn cell_area(&self) -> f64 {
        self.dx1 * self.dx2
    }

    pub fn min_spacing(&self) -> f64 {
        self.dx1.min(self.dx2)
    }

    pub fn horizon(&self) -> f64 {
        self.nt as f64 * self.dt
    }

    pub fn size(&self) -> [f64; 2] {
        [self.n1 as f64 * self.dx1, self.n2 as f64 * self.dx2]
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n1 + i
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.n1, idx / self.n1)
    }

    #[inline]
    pub fn center(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new(
            self.origin.x + (i as f64 + 0.5) * self.dx1,
            self.origin.y + (j as f64 + 0.5) * self.dx2,
        )
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    /// Nearest time index to `t`, clipped to `[0, nt]`.
    pub fn snap_time(&self, t: f64) -> usize {
        let n = (t / self.dt).round();
        if n <= 0.0 {
            0
        } else {
            (n as usize).min(self.nt)
        }
    }

    /// Number of whole steps covered by a duration, with rounding slack.
    pub fn steps_in(&self, duration: f64) -> usize {
        let raw = duration / self.dt;
        let n = (raw + 1e-9).floor();
        if n <= 0.0 {
            0
        } else {
            n as usize
        }
    }

    /// Cells touching `∂Ω`; the HJB pins them as walls or exits.
    #[inline]
    pub fn is_ring(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i + 1 == self.n1 || j + 1 == self.n2
    }

    /// Projects `p` onto the convex hull of the cell centers.
    #[inline]
    pub fn clamp_to_nodes(&self, p: Vec2) -> Vec2 {
        let lo = self.center(0, 0);
        let hi = self.center(self.n1 - 1, self.n2 - 1);
        Vec2::new(p.x.clamp(lo.x, hi.x), p.y.clamp(lo.y, hi.y))
    }

    /// Precomputes the four nodes and weights used to interpolate at `p`.
    #[inline]
    pub fn interp_stencil(&self, p: Vec2) -> InterpStencil {
        let p = self.clamp_to_nodes(p);
        let (i0, tx) = axis_cell((p.x - self.origin.x) / self.dx1 - 0.5, self.n1);
        let (j0, ty) = axis_cell((p.y - self.origin.y) / self.dx2 - 0.5, self.n2);
        InterpStencil {
            base: (j0 * self.n1 + i0) as u32,
            step_x: if self.n1 > 1 { 1 } else { 0 },
            step_y: if self.n2 > 1 { self.n1 as u32 } else { 0 },
            tx,
            ty,
        }
    }
}

#[inline]
fn axis_cell(f: f64, n: usize) -> (usize, f64) {
    if n == 1 {
        return (0, 0.0);
    }
    let f = f.clamp(0.0, (n - 1) as f64);
    // f >= 0, so truncation is floor and avoids a libm call on baseline x86-64
    let i0 = (f as usize).min(n - 2);
    (i0, f - i0 as f64)
}

/// Bilinear interpolation weights for one query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterpStencil {
    pub base: u32,
    pub step_x: u32,
    pub step_y: u32,
    pub tx: f64,
    pub ty: f64,
}

impl InterpStencil {
    #[inline]
    pub fn apply(&self, values: &[f64]) -> f64 {
        let b = self.base as usize;
        let sx = self.step_x as usize;
        let sy = self.step_y as usize;
        let lower = values[b] + self.tx * (values[b + sx] - values[b]);
        let upper = values[b + sy] + self.tx * (values[b + sy + sx] - values[b + sy]);
        lower + self.ty * (upper - lower)
    }
}

/// Bilinear interpolation of a cell-centered field at `p`.
///
/// Points outside the node hull are clamped onto it first.
pub fn bilinear_interpolate(grid: &Grid, values: &[f64], p: Vec2) -> f64 {
    debug_assert_eq!(values.len(), grid.cells());
    debug_assert!(p.x.is_finite() && p.y.is_finite(), "non-finite query {p:?}");
    grid.interp_stencil(p).apply(values)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CflReport {
    /// `dt * vmax / min(dx1, dx2)`; the condition holds iff this is at most 1.
    pub ratio: f64,
    pub passed: bool,
}

pub fn check_cfl(grid: &Grid, vmax: f64) -> CflReport {
    let ratio = grid.dt * vmax / grid.min_spacing();
    CflReport {
        ratio,
        passed: ratio <= 1.0 + 1e-12,
    }
}
