//! Density, value and control storage.
//!
//! Space-time densities hold their slices behind `Arc` so that history shared
//! between iterates, and runs of identical frozen slices, cost one allocation.
//! Solvers use pointer identity between consecutive slices to skip recomputing
//! per-slice tables.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub n1: usize,
    pub n2: usize,
    pub values: Vec<f64>,
}

impl DensityField {
    pub fn zeros(grid: &Grid) -> Self {
        DensityField {
            n1: grid.n1,
            n2: grid.n2,
            values: vec![0.0; grid.cells()],
        }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cells() {
            return Err(Error::internal(format!(
                "density has {} values, grid has {} cells",
                values.len(),
                grid.cells()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::internal(format!("density value {v} is not a finite nonnegative number")));
        }
        Ok(DensityField {
            n1: grid.n1,
            n2: grid.n2,
            values,
        })
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.n1 + i]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn same_shape(&self, other: &DensityField) -> bool {
        self.n1 == other.n1 && self.n2 == other.n2
    }
}

pub fn total_mass(d: &DensityField, grid: &Grid) -> f64 {
    d.values.iter().sum::<f64>() * grid.cell_area()
}

/// Densities at every time level `0..=nt`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeDensity {
    pub slices: Vec<Arc<DensityField>>,
}

impl SpaceTimeDensity {
    /// `slice` repeated for `nt + 1` time levels, sharing one allocation.
    pub fn constant(slice: DensityField, nt: usize) -> Self {
        let s = Arc::new(slice);
        SpaceTimeDensity {
            slices: vec![s; nt + 1],
        }
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn slice(&self, n: usize) -> &DensityField {
        &self.slices[n]
    }
}

/// Discrete `L1(Ω x [0, T])` distance.
///
/// Time is integrated over the space-time cells `[t^n, t^{n+1})`,
/// `n = 0..nt-1`, so a unit field on the unit square over `[0, 1]` has norm 1.
pub fn l1_distance(a: &SpaceTimeDensity, b: &SpaceTimeDensity, grid: &Grid) -> Result<f64> {
    if a.len() != b.len() || a.len() != grid.nt + 1 {
        return Err(Error::internal(format!(
            "l1_distance: slice counts {} and {} (grid expects {})",
            a.len(),
            b.len(),
            grid.nt + 1
        )));
    }
    let mut total = 0.0;
    let mut last = 0.0;
    for n in 0..grid.nt {
        let (sa, sb) = (&a.slices[n], &b.slices[n]);
        if !sa.same_shape(sb) || sa.values.len() != grid.cells() {
            return Err(Error::internal(format!("l1_distance: shape mismatch at slice {n}")));
        }
        let d = if Arc::ptr_eq(sa, sb) {
            0.0
        } else if n > 0 && Arc::ptr_eq(sa, &a.slices[n - 1]) && Arc::ptr_eq(sb, &b.slices[n - 1]) {
            last
        } else {
            sa.values
                .iter()
                .zip(&sb.values)
                .map(|(x, y)| (x - y).abs())
                .sum::<f64>()
        };
        last = d;
        total += d;
    }
    Ok(total * grid.cell_area() * grid.dt)
}

/// Running uniform average of space-time densities (fictitious play memory).
#[derive(Debug, Clone)]
pub struct FictitiousPlay {
    count: usize,
    mean: Option<SpaceTimeDensity>,
}

impl Default for FictitiousPlay {
    fn default() -> Self {
        Self::new()
    }
}

impl FictitiousPlay {
    pub fn new() -> Self {
        FictitiousPlay {
            count: 0,
            mean: None,
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> Option<&SpaceTimeDensity> {
        self.mean.as_ref()
    }

    /// Folds in one iterate: `mean_k = ((k - 1) mean_{k-1} + rho_k) / k`.
    pub fn push(&mut self, rho: &SpaceTimeDensity) -> Result<()> {
        self.count += 1;
        let Some(prev) = self.mean.take() else {
            self.mean = Some(rho.clone());
            return Ok(());
        };
        if prev.len() != rho.len() {
            return Err(Error::internal("fictitious play: iterate length changed"));
        }
        let k = self.count as f64;
        let keep = (k - 1.0) / k;
        let mut out: Vec<Arc<DensityField>> = Vec::with_capacity(rho.len());
        for n in 0..rho.len() {
            let (p, r) = (&prev.slices[n], &rho.slices[n]);
            if !p.same_shape(r) {
                return Err(Error::internal(format!("fictitious play: shape mismatch at slice {n}")));
            }
            let slice = if Arc::ptr_eq(p, r) {
                // mean of identical slices is the slice itself
                Arc::clone(p)
            } else if n > 0
                && Arc::ptr_eq(p, &prev.slices[n - 1])
                && Arc::ptr_eq(r, &rho.slices[n - 1])
            {
                Arc::clone(&out[n - 1])
            } else {
                let values = p
                    .values
                    .iter()
                    .zip(&r.values)
                    .map(|(a, b)| keep * a + b / k)
                    .collect();
                Arc::new(DensityField {
                    n1: p.n1,
                    n2: p.n2,
                    values,
                })
            };
            out.push(slice);
        }
        self.mean = Some(SpaceTimeDensity { slices: out });
        Ok(())
    }
}

/// Uniform average of a non-empty history of iterates.
pub fn fictitious_play_average(history: &[SpaceTimeDensity]) -> Result<SpaceTimeDensity> {
    let mut fp = FictitiousPlay::new();
    for rho in history {
        fp.push(rho)?;
    }
    fp.mean
        .ok_or_else(|| Error::internal("fictitious play average of an empty history"))
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

impl Rect {
    /// Square of side `side` centered at `c`.
    pub fn square(c: [f64; 2], side: f64) -> Self {
        Rect {
            x: [c[0] - side / 2.0, c[0] + side / 2.0],
            y: [c[1] - side / 2.0, c[1] + side / 2.0],
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        const EPS: f64 = 1e-12;
        x >= self.x[0] - EPS && x <= self.x[1] + EPS && y >= self.y[0] - EPS && y <= self.y[1] + EPS
    }
}

/// A uniform group of pedestrians: `mass` spread over `region`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub region: Rect,
    pub mass: f64,
}

/// Cell-averaged initial density.
///
/// Each group's mass is spread uniformly over the cells whose centers fall in
/// its region; overlapping groups add up.
pub fn cell_average_init(groups: &[Group], grid: &Grid) -> Result<DensityField> {
    if groups.is_empty() {
        return Err(Error::config("rho0.groups", "at least one group is required"));
    }
    let mut field = DensityField::zeros(grid);
    for (g, group) in groups.iter().enumerate() {
        let r = group.region;
        if !(r.x[1] > r.x[0] && r.y[1] > r.y[0]) {
            return Err(Error::config(
                format!("rho0.groups[{g}].region"),
                "region must have positive area",
            ));
        }
        if !(group.mass.is_finite() && group.mass > 0.0) {
            return Err(Error::config(
                format!("rho0.groups[{g}].mass"),
                format!("must be positive, got {}", group.mass),
            ));
        }
        let cells: Vec<usize> = (0..grid.cells())
            .filter(|&k| {
                let (i, j) = grid.coords(k);
                let c = grid.center(i, j);
                r.contains(c.x, c.y)
            })
            .collect();
        if cells.is_empty() {
            return Err(Error::config(
                format!("rho0.groups[{g}].region"),
                "region contains no cell center",
            ));
        }
        let density = group.mass / (cells.len() as f64 * grid.cell_area());
        for k in cells {
            field.values[k] += density;
        }
    }
    Ok(field)
}

/// Value function `phi` on time levels `start..=nt`.
///
/// Window solves only need the levels at and after the current outer step,
/// so earlier levels are not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueField {
    pub start: usize,
    pub wall_value: f64,
    pub slices: Vec<Vec<f64>>,
}

impl ValueField {
    pub fn slice(&self, n: usize) -> &[f64] {
        assert!(n >= self.start, "value slice {n} precedes window start {}", self.start);
        &self.slices[n - self.start]
    }

    pub fn end(&self) -> usize {
        self.start + self.slices.len() - 1
    }
}

/// Optimal control indices (into the control set) on time levels `start..`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlField {
    pub start: usize,
    pub slices: Vec<Vec<u16>>,
}

impl ControlField {
    pub fn slice(&self, n: usize) -> &[u16] {
        assert!(n >= self.start, "control slice {n} precedes window start {}", self.start);
        &self.slices[n - self.start]
    }

    pub fn covers(&self, n: usize) -> bool {
        n >= self.start && n < self.start + self.slices.len()
    }
}
