//! Nonlocal repulsion through a direction-dependent sensory region.
//!
//! A pedestrian at `y` heading along `a` is pushed away from the crowd it
//! sees in the half-annulus `R0 <= |ζ - y| <= R`, `(ζ - y)·a > 0`:
//!
//! ```text
//! V_int(y; a, ρ) = -C_rep ∫_S (ζ - y) / |ζ - y|² ρ(ζ) dζ
//! ```
//!
//! The integral is a midpoint sum over the cells whose centers fall in the
//! region. One [`SensoryStencil`] is precomputed per control direction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::DensityField;
use crate::grid::{Grid, Vec2};
use crate::hjb::ControlSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionParams {
    pub c_rep: f64,
    pub r0: f64,
    pub r: f64,
}

impl InteractionParams {
    pub fn none() -> Self {
        InteractionParams {
            c_rep: 0.0,
            r0: 0.01,
            r: 0.06,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c_rep.is_finite() && self.c_rep >= 0.0) {
            return Err(Error::config("model.c_rep", format!("must be >= 0, got {}", self.c_rep)));
        }
        if !(self.r0.is_finite() && self.r0 >= 0.0) {
            return Err(Error::config("model.r0", format!("must be >= 0, got {}", self.r0)));
        }
        if !(self.r.is_finite() && self.r > self.r0) {
            return Err(Error::config(
                "model.r",
                format!("outer radius {} must exceed inner radius {}", self.r, self.r0),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StencilTap {
    pub di: i32,
    pub dj: i32,
    /// `-(ζ - y) / |ζ - y|² * dx1 * dx2`.
    pub kernel: Vec2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensoryStencil {
    pub direction: Vec2,
    pub taps: Vec<StencilTap>,
}

impl SensoryStencil {
    /// `Σ |kernel|`: the repulsion speed per unit of density and `C_rep`
    /// when every tap is occupied.
    pub fn kernel_mass(&self) -> f64 {
        self.taps.iter().map(|t| t.kernel.norm()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StencilSet {
    pub stencils: Vec<SensoryStencil>,
    /// Largest |di| or |dj| over all taps.
    pub reach: usize,
}

impl StencilSet {
    pub fn get(&self, k: usize) -> &SensoryStencil {
        &self.stencils[k]
    }

    /// Every tap sits at a nonzero offset, so no reach means no taps.
    pub fn is_empty(&self) -> bool {
        self.reach == 0
    }

    /// Upper bound on `|V_int| / (C_rep ρ_max)` over all directions.
    pub fn max_kernel_mass(&self) -> f64 {
        self.stencils.iter().map(SensoryStencil::kernel_mass).fold(0.0, f64::max)
    }
}

// Half-plane membership is decided with a relative slack so that offsets
// orthogonal to `a` are excluded even when cos/sin round away from zero.
const HALF_PLANE_EPS: f64 = 1e-9;

fn in_half_plane(offset: Vec2, a: Vec2) -> bool {
    offset.dot(a) > HALF_PLANE_EPS * offset.norm()
}

pub fn build_stencils(grid: &Grid, params: &InteractionParams, controls: &ControlSet) -> StencilSet {
    let ri = (params.r / grid.dx1).ceil() as i32;
    let rj = (params.r / grid.dx2).ceil() as i32;
    let area = grid.cell_area();
    let mut reach = 0usize;
    let stencils = controls
        .directions
        .iter()
        .map(|&a| {
            let mut taps = Vec::new();
            for dj in -rj..=rj {
                for di in -ri..=ri {
                    let off = Vec2::new(di as f64 * grid.dx1, dj as f64 * grid.dx2);
                    let dist = off.norm();
                    if dist == 0.0 || dist < params.r0 || dist > params.r {
                        continue;
                    }
                    if !in_half_plane(off, a) {
                        continue;
                    }
                    reach = reach.max(di.unsigned_abs() as usize).max(dj.unsigned_abs() as usize);
                    taps.push(StencilTap {
                        di,
                        dj,
                        kernel: off * (-area / (dist * dist)),
                    });
                }
            }
            SensoryStencil { direction: a, taps }
        })
        .collect();
    StencilSet { stencils, reach }
}

/// Midpoint-rule repulsion at cell `(i, j)` for control direction `k`.
/// Neighbors outside the grid contribute nothing.
#[inline]
pub fn interaction_velocity(
    rho: &DensityField,
    i: usize,
    j: usize,
    k: usize,
    stencils: &StencilSet,
    params: &InteractionParams,
) -> Vec2 {
    if params.c_rep == 0.0 {
        return Vec2::ZERO;
    }
    let stencil = stencils.get(k);
    let (n1, n2) = (rho.n1 as i64, rho.n2 as i64);
    let r = stencils.reach as i64;
    let (ii, jj) = (i as i64, j as i64);
    let interior = ii >= r && jj >= r && ii + r < n1 && jj + r < n2;
    let mut acc = Vec2::ZERO;
    if interior {
        for t in &stencil.taps {
            let idx = ((jj + t.dj as i64) * n1 + ii + t.di as i64) as usize;
            let d = rho.values[idx];
            acc.x += t.kernel.x * d;
            acc.y += t.kernel.y * d;
        }
    } else {
        for t in &stencil.taps {
            let (ti, tj) = (ii + t.di as i64, jj + t.dj as i64);
            if ti < 0 || tj < 0 || ti >= n1 || tj >= n2 {
                continue;
            }
            let d = rho.values[(tj * n1 + ti) as usize];
            acc.x += t.kernel.x * d;
            acc.y += t.kernel.y * d;
        }
    }
    acc * params.c_rep
}

pub fn total_velocity(a: Vec2, v_int: Vec2) -> Vec2 {
    a + v_int
}

/// Sides of the rectangular domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

    fn bit(self) -> u8 {
        match self {
            Side::Left => 1,
            Side::Right => 2,
            Side::Bottom => 4,
            Side::Top => 8,
        }
    }
}

/// Which boundary sides of each cell let mass through (exits).
/// Everything else on `∂Ω` is an impermeable wall.
#[derive(Debug, Clone, PartialEq)]
pub struct WallMask {
    open: Vec<u8>,
}

impl WallMask {
    pub fn closed(grid: &Grid) -> Self {
        WallMask {
            open: vec![0; grid.cells()],
        }
    }

    pub fn open_side(&mut self, idx: usize, side: Side) {
        self.open[idx] |= side.bit();
    }

    #[inline]
    pub fn is_open(&self, idx: usize, side: Side) -> bool {
        self.open[idx] & side.bit() != 0
    }
}

/// Removes the outward normal component of `v` on every closed side the cell
/// touches. Corners treat both axes independently.
#[inline]
pub fn project_boundary_velocity(v: Vec2, i: usize, j: usize, grid: &Grid, walls: &WallMask) -> Vec2 {
    let idx = grid.index(i, j);
    let mut out = v;
    if i == 0 && out.x < 0.0 && !walls.is_open(idx, Side::Left) {
        out.x = 0.0;
    }
    if i + 1 == grid.n1 && out.x > 0.0 && !walls.is_open(idx, Side::Right) {
        out.x = 0.0;
    }
    if j == 0 && out.y < 0.0 && !walls.is_open(idx, Side::Bottom) {
        out.y = 0.0;
    }
    if j + 1 == grid.n2 && out.y > 0.0 && !walls.is_open(idx, Side::Top) {
        out.y = 0.0;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn paper_grid() -> Grid {
        Grid::new([1.0, 1.0], 50, 50, 1.0, 200).unwrap()
    }

    fn paper_params(c_rep: f64) -> InteractionParams {
        InteractionParams { c_rep, r0: 0.01, r: 0.06 }
    }

    fn offsets(s: &SensoryStencil) -> BTreeSet<(i32, i32)> {
        s.taps.iter().map(|t| (t.di, t.dj)).collect()
    }

    #[test]
    fn stencil_symmetric_about_heading() {
        let g = paper_grid();
        let set = build_stencils(&g, &paper_params(1.0), &ControlSet::new(32).unwrap());
        let east = offsets(set.get(0));
        assert!(!east.is_empty());
        let mirrored: BTreeSet<_> = east.iter().map(|&(a, b)| (a, -b)).collect();
        assert_eq!(east, mirrored);
        // (0, ±1) is orthogonal to east and must be excluded
        assert!(!east.contains(&(0, 1)) && !east.contains(&(0, -1)));
    }

    #[test]
    fn stencil_empty_below_one_cell() {
        let g = paper_grid();
        let p = InteractionParams { c_rep: 1.0, r0: 0.0, r: 0.009 };
        let set = build_stencils(&g, &p, &ControlSet::new(32).unwrap());
        assert!(set.is_empty());
    }

    #[test]
    fn stencil_matches_enumeration() {
        let g = paper_grid();
        let controls = ControlSet::new(32).unwrap();
        let set = build_stencils(&g, &paper_params(1.0), &controls);
        let reach = (0.06f64 / 0.02).ceil() as i32;
        for (k, a) in controls.directions.iter().enumerate() {
            let mut brute = BTreeSet::new();
            for di in -reach..=reach {
                for dj in -reach..=reach {
                    let (ox, oy) = (di as f64 * 0.02, dj as f64 * 0.02);
                    let d = (ox * ox + oy * oy).sqrt();
                    let dot = ox * a.x + oy * a.y;
                    if d >= 0.01 && d <= 0.06 && dot > 1e-9 * d {
                        brute.insert((di, dj));
                    }
                }
            }
            assert_eq!(offsets(set.get(k)), brute, "direction {k}");
            for t in &set.get(k).taps {
                let d = Vec2::new(t.di as f64 * 0.02, t.dj as f64 * 0.02).norm();
                assert!((0.01..=0.06).contains(&d));
            }
        }
    }

    #[test]
    fn opposite_directions_reflect() {
        let g = paper_grid();
        let controls = ControlSet::new(32).unwrap();
        let set = build_stencils(&g, &paper_params(1.0), &controls);
        for k in 0..16 {
            let a = offsets(set.get(k));
            let b: BTreeSet<_> = offsets(set.get(k + 16)).iter().map(|&(x, y)| (-x, -y)).collect();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn zero_density_or_strength_gives_no_repulsion() {
        let g = paper_grid();
        let controls = ControlSet::new(32).unwrap();
        let set = build_stencils(&g, &paper_params(6.0), &controls);
        let rho = DensityField::zeros(&g);
        assert_eq!(interaction_velocity(&rho, 20, 20, 3, &set, &paper_params(6.0)), Vec2::ZERO);
        let mut busy = DensityField::zeros(&g);
        busy.values.iter_mut().for_each(|v| *v = 4.0);
        assert_eq!(interaction_velocity(&busy, 20, 20, 3, &set, &paper_params(0.0)), Vec2::ZERO);
    }

    #[test]
    fn single_cell_ahead() {
        let g = paper_grid();
        let controls = ControlSet::new(32).unwrap();
        let p = paper_params(6.0);
        let set = build_stencils(&g, &p, &controls);
        let mut rho = DensityField::zeros(&g);
        let rho0 = 2.5;
        rho.values[g.index(22, 20)] = rho0;
        let v = interaction_velocity(&rho, 20, 20, 0, &set, &p);
        let d = 2.0 * g.dx1;
        let expected = -6.0 * rho0 * g.dx1 * g.dx2 / d;
        assert!((v.x - expected).abs() < 1e-12, "{v:?}");
        assert!(v.y.abs() < 1e-15);
    }

    #[test]
    fn velocity_sum_and_projection_examples() {
        let a = Vec2::new(1.0, 0.0);
        assert_eq!(total_velocity(a, Vec2::ZERO), a);
        assert_eq!(total_velocity(a, Vec2::new(-1.0, 0.0)), Vec2::ZERO);

        let g = Grid::new([1.0, 1.0], 5, 5, 1.0, 1).unwrap();
        let w = WallMask::closed(&g);
        let v = Vec2::new(-1.0, 0.5);
        assert_eq!(project_boundary_velocity(v, 2, 2, &g, &w), v);
        assert_eq!(project_boundary_velocity(v, 0, 2, &g, &w), Vec2::new(0.0, 0.5));
        assert_eq!(project_boundary_velocity(Vec2::new(-1.0, -1.0), 0, 0, &g, &w), Vec2::ZERO);

        let mut open = WallMask::closed(&g);
        open.open_side(g.index(2, 0), Side::Bottom);
        assert_eq!(project_boundary_velocity(Vec2::new(0.0, -1.0), 2, 0, &g, &open), Vec2::new(0.0, -1.0));
    }

    #[test]
    fn reflection_antisymmetry() {
        let g = Grid::new([1.0, 1.0], 21, 21, 1.0, 1).unwrap();
        let controls = ControlSet::new(32).unwrap();
        let p = InteractionParams { c_rep: 3.0, r0: 0.01, r: 0.2 };
        let set = build_stencils(&g, &p, &controls);
        // centrally symmetric bump around (10, 10)
        let vals = (0..g.cells())
            .map(|k| {
                let (i, j) = g.coords(k);
                let (a, b) = (i as f64 - 10.0, j as f64 - 10.0);
                (-(a * a + 0.5 * a * b + 2.0 * b * b) / 9.0).exp()
            })
            .collect();
        let rho = DensityField::from_values(&g, vals).unwrap();
        for k in 0..16 {
            let v = interaction_velocity(&rho, 10, 10, k, &set, &p);
            let w = interaction_velocity(&rho, 10, 10, k + 16, &set, &p);
            assert!((v + w).norm() < 1e-12, "k={k}: {v:?} vs {w:?}");
        }
    }

    proptest! {
        #[test]
        fn projection_idempotent(vx in -2.0..2.0f64, vy in -2.0..2.0f64, i in 0usize..5, j in 0usize..5) {
            let g = Grid::new([1.0, 1.0], 5, 5, 1.0, 1).unwrap();
            let w = WallMask::closed(&g);
            let once = project_boundary_velocity(Vec2::new(vx, vy), i, j, &g, &w);
            prop_assert_eq!(project_boundary_velocity(once, i, j, &g, &w), once);
        }

        #[test]
        fn added_mass_pushes_away(k in 0usize..32, tap in 0usize..64, extra in 0.1..5.0f64) {
            let g = paper_grid();
            let controls = ControlSet::new(32).unwrap();
            let p = paper_params(6.0);
            let set = build_stencils(&g, &p, &controls);
            let st = set.get(k);
            let t = st.taps[tap % st.taps.len()];
            let rho = DensityField::from_values(&g, vec![0.3; g.cells()]).unwrap();
            let mut more = rho.clone();
            more.values[g.index((25 + t.di) as usize, (25 + t.dj) as usize)] += extra;
            let off = Vec2::new(t.di as f64, t.dj as f64);
            let before = interaction_velocity(&rho, 25, 25, k, &set, &p).dot(off);
            let after = interaction_velocity(&more, 25, 25, k, &set, &p).dot(off);
            prop_assert!(after < before);
        }
    }
}
