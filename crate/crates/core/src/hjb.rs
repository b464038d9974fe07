//! Semi-Lagrangian solver for the backward Hamilton-Jacobi-Bellman equation.
//!
//! One backward step reads
//!
//! ```text
//! φ^{n-1}_{ij} = min_k { φ^n(ω^n_{ij}(a_k)) + Δt ℓ^n_{ij} } + σΔt/(Δx¹Δx²) L(φ^n)_{ij}
//! ω^n_{ij}(a)  = x_{ij} + Δt V^n_{ij}(a)
//! ```
//!
//! where `φ^n(ω)` is bilinear interpolation and `L` the five-point Laplacian.
//! The boundary ring is pinned to a finite wall value (the stand-in for
//! `+∞`); in minimum-time mode exit cells are pinned to zero instead.
//! The minimizing index at level `n` is the synthesized control `α*^n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{ControlField, DensityField, SpaceTimeDensity, ValueField};
use crate::grid::{Grid, InterpStencil, Vec2};
use crate::interaction::{Side, WallMask};
use crate::model::Model;
use crate::par::{for_each_row, for_each_row2};

/// Unit directions `a_k = (cos 2πk/K, sin 2πk/K)`, `k = 0..K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSet {
    pub directions: Vec<Vec2>,
}

impl ControlSet {
    pub fn new(k: usize) -> Result<Self> {
        if !(2..=u16::MAX as usize).contains(&k) {
            return Err(Error::config("model.controls", format!("need at least 2 directions, got {k}")));
        }
        let directions = (0..k)
            .map(|m| {
                let ang = std::f64::consts::TAU * m as f64 / k as f64;
                Vec2::new(ang.cos(), ang.sin())
            })
            .collect();
        Ok(ControlSet { directions })
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunningCost {
    Constant { value: f64 },
    /// `c0 + c1 x¹`
    LinearX1 { c0: f64, c1: f64 },
    /// `coeff ρ`
    LinearDensity { coeff: f64 },
}

impl RunningCost {
    #[inline]
    pub fn eval(&self, x: Vec2, rho: f64) -> f64 {
        match *self {
            RunningCost::Constant { value } => value,
            RunningCost::LinearX1 { c0, c1 } => c0 + c1 * x.x,
            RunningCost::LinearDensity { coeff } => coeff * rho,
        }
    }

    pub fn depends_on_density(&self) -> bool {
        matches!(self, RunningCost::LinearDensity { coeff } if *coeff != 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TerminalCost {
    Constant { value: f64 },
    /// `|x - center|`
    Distance { center: [f64; 2] },
    /// `c0 + c1 x¹ + c2 x²`
    Linear { c0: f64, c1: f64, c2: f64 },
}

impl TerminalCost {
    #[inline]
    pub fn eval(&self, x: Vec2) -> f64 {
        match *self {
            TerminalCost::Constant { value } => value,
            TerminalCost::Distance { center } => (x - Vec2::new(center[0], center[1])).norm(),
            TerminalCost::Linear { c0, c1, c2 } => c0 + c1 * x.x + c2 * x.y,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum CostSpec {
    FiniteHorizon {
        running: RunningCost,
        terminal: TerminalCost,
    },
    /// Running cost 1, zero on the exits, no terminal cost.
    MinimumTime,
}

impl CostSpec {
    pub fn depends_on_density(&self) -> bool {
        match self {
            CostSpec::FiniteHorizon { running, .. } => running.depends_on_density(),
            CostSpec::MinimumTime => false,
        }
    }
}

/// An exit: the boundary cells on `side` whose center coordinate along the
/// side lies within `center ± width/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitSegment {
    pub side: Side,
    pub center: f64,
    pub width: f64,
}

/// Exits open from `start` until the next phase begins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitPhase {
    pub start: f64,
    pub exits: Vec<ExitSegment>,
}

/// Time-dependent target `T(t) ⊆ ∂Ω`.
///
/// Phase `p` is active on `(start_p, start_{p+1}]` (the first phase also owns
/// `t = 0`). With a `forecast` horizon Θ, an agent deciding at time `s` knows
/// about phase `p` only once `s >= start_p - Θ`; until then it believes the
/// last known phase stays open forever. Without a forecast the schedule is
/// common knowledge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSchedule {
    pub phases: Vec<ExitPhase>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forecast: Option<f64>,
}

const TIME_EPS: f64 = 1e-9;

impl TargetSchedule {
    pub fn fixed(exits: Vec<ExitSegment>) -> Self {
        TargetSchedule {
            phases: vec![ExitPhase { start: 0.0, exits }],
            forecast: None,
        }
    }

    pub fn validate(&self, horizon: f64) -> Result<()> {
        if self.phases.is_empty() {
            return Err(Error::config("target.phases", "at least one phase is required"));
        }
        if self.phases[0].start.abs() > TIME_EPS {
            return Err(Error::config("target.phases[0].start", "first phase must start at 0"));
        }
        for (p, phase) in self.phases.iter().enumerate() {
            if p > 0 && !(phase.start > self.phases[p - 1].start && phase.start < horizon) {
                return Err(Error::config(
                    format!("target.phases[{p}].start"),
                    "phase starts must increase strictly and lie inside (0, T)",
                ));
            }
            if phase.exits.is_empty() {
                return Err(Error::config(format!("target.phases[{p}].exits"), "no exit is open in this phase"));
            }
            for (e, exit) in phase.exits.iter().enumerate() {
                if !(exit.width.is_finite() && exit.width > 0.0) || !exit.center.is_finite() {
                    return Err(Error::config(
                        format!("target.phases[{p}].exits[{e}]"),
                        "exit needs a finite center and positive width",
                    ));
                }
            }
        }
        if let Some(f) = self.forecast {
            let first_switch = self.phases.get(1).map(|p| p.start).unwrap_or(horizon);
            if !(f.is_finite() && f >= 0.0 && f <= first_switch + TIME_EPS) {
                return Err(Error::config(
                    "model.exit_forecast",
                    format!("must lie in [0, {first_switch}], got {f}"),
                ));
            }
        }
        Ok(())
    }

    /// Phase actually open at time `t`.
    pub fn phase_at(&self, t: f64) -> usize {
        self.phases
            .iter()
            .rposition(|p| p.start < t - TIME_EPS)
            .unwrap_or(0)
    }

    /// Phase an agent deciding at time `s` expects to be open at time `t`.
    pub fn believed_phase(&self, s: f64, t: f64) -> usize {
        let truth = self.phase_at(t);
        match self.forecast {
            None => truth,
            Some(forecast) => {
                let known = self
                    .phases
                    .iter()
                    .rposition(|p| p.start - forecast <= s + TIME_EPS)
                    .unwrap_or(0);
                truth.min(known)
            }
        }
    }
}

/// Boundary cells of each phase, resolved on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledPhase {
    /// Cells of each exit segment, in segment order.
    pub segments: Vec<Vec<usize>>,
    pub is_target: Vec<bool>,
    pub walls: WallMask,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompiledTargets {
    pub phases: Vec<CompiledPhase>,
}

impl CompiledTargets {
    pub fn compile(schedule: &TargetSchedule, grid: &Grid) -> Result<Self> {
        let mut phases = Vec::with_capacity(schedule.phases.len());
        for (p, phase) in schedule.phases.iter().enumerate() {
            let mut is_target = vec![false; grid.cells()];
            let mut walls = WallMask::closed(grid);
            let mut segments = Vec::new();
            for (e, exit) in phase.exits.iter().enumerate() {
                let cells = exit_cells(grid, exit);
                if cells.is_empty() {
                    return Err(Error::config(
                        format!("target.phases[{p}].exits[{e}]"),
                        "exit covers no boundary cell",
                    ));
                }
                for &c in &cells {
                    is_target[c] = true;
                    walls.open_side(c, exit.side);
                }
                segments.push(cells);
            }
            phases.push(CompiledPhase {
                segments,
                is_target,
                walls,
            });
        }
        Ok(CompiledTargets { phases })
    }
}

fn exit_cells(grid: &Grid, exit: &ExitSegment) -> Vec<usize> {
    let (lo, hi) = (exit.center - exit.width / 2.0, exit.center + exit.width / 2.0);
    let inside = |x: f64| x >= lo - 1e-12 && x <= hi + 1e-12;
    match exit.side {
        Side::Bottom | Side::Top => {
            let j = if exit.side == Side::Bottom { 0 } else { grid.n2 - 1 };
            (0..grid.n1)
                .filter(|&i| inside(grid.center(i, j).x))
                .map(|i| grid.index(i, j))
                .collect()
        }
        Side::Left | Side::Right => {
            let i = if exit.side == Side::Left { 0 } else { grid.n1 - 1 };
            (0..grid.n2)
                .filter(|&j| inside(grid.center(i, j).y))
                .map(|j| grid.index(i, j))
                .collect()
        }
    }
}

/// Which backward problem to solve.
#[derive(Debug, Clone, Copy)]
pub enum HjbProblem<'a> {
    FiniteHorizon {
        running: &'a RunningCost,
        terminal: &'a TerminalCost,
    },
    MinimumTime {
        targets: &'a CompiledTargets,
        schedule: &'a TargetSchedule,
        /// Outer time at which beliefs about the exits are formed.
        believed_at: f64,
    },
}

impl<'a> HjbProblem<'a> {
    pub fn from_costs(
        costs: &'a CostSpec,
        targets: Option<(&'a CompiledTargets, &'a TargetSchedule)>,
        believed_at: f64,
    ) -> Result<Self> {
        match costs {
            CostSpec::FiniteHorizon { running, terminal } => Ok(HjbProblem::FiniteHorizon { running, terminal }),
            CostSpec::MinimumTime => {
                let (targets, schedule) =
                    targets.ok_or_else(|| Error::config("target", "minimum-time mode needs a target"))?;
                Ok(HjbProblem::MinimumTime {
                    targets,
                    schedule,
                    believed_at,
                })
            }
        }
    }

    fn believed_targets(&self, grid: &Grid, n: usize) -> Option<&'a CompiledPhase> {
        match *self {
            HjbProblem::MinimumTime {
                targets,
                schedule,
                believed_at,
            } => Some(&targets.phases[schedule.believed_phase(believed_at, grid.time(n))]),
            HjbProblem::FiniteHorizon { .. } => None,
        }
    }
}

/// Foot of the characteristic `x_ij + Δt V(x_ij; a_k, ρ)`, clamped to the
/// node hull.
pub fn characteristic_foot(
    model: &Model,
    i: usize,
    j: usize,
    k: usize,
    rho: &DensityField,
    walls: &WallMask,
) -> Vec2 {
    let g = &model.grid;
    let v = model.velocity(rho, i, j, k, walls);
    g.clamp_to_nodes(g.center(i, j) + v * g.dt)
}

/// Interpolation stencils of every characteristic foot for one density slice.
#[derive(Clone)]
struct FootTable {
    k: usize,
    feet: Vec<InterpStencil>,
}

impl FootTable {
    /// Recomputes the feet of cells flagged in `active`, leaving the rest as in `self`.
    fn refresh(&mut self, model: &Model, rho: &DensityField, walls: &WallMask, active: Option<&[bool]>) {
        let g = &model.grid;
        let k = self.k;
        for_each_row(model.exec, &mut self.feet, g.n1 * k, |j, row| {
            for i in 0..g.n1 {
                if let Some(mask) = active {
                    if !mask[g.index(i, j)] {
                        continue;
                    }
                }
                let center = g.center(i, j);
                for m in 0..k {
                    let v = model.velocity(rho, i, j, m, walls);
                    row[i * k + m] = g.interp_stencil(center + v * g.dt);
                }
            }
        });
    }

    #[inline]
    fn cell(&self, idx: usize) -> &[InterpStencil] {
        &self.feet[idx * self.k..(idx + 1) * self.k]
    }
}

/// Relative density below which a cell is treated as empty when deciding
/// whose feet to recompute. Upwind transport leaves such tails everywhere;
/// the velocity they induce is of the order of rounding.
const SENSING_FLOOR: f64 = 1e-12;

/// Cells with some non-negligible mass within `reach` cells in each direction.
fn near_mass(g: &Grid, rho: &DensityField, reach: usize) -> Vec<bool> {
    let (n1, n2) = (g.n1, g.n2);
    let floor = SENSING_FLOOR * rho.max();
    let occupied = |c: usize| rho.values[c] > floor;
    let mut rows = vec![false; g.cells()];
    for j in 0..n2 {
        let mut last: Option<usize> = None;
        let mut first_after = vec![usize::MAX; n1];
        let mut next = usize::MAX;
        for i in (0..n1).rev() {
            if occupied(j * n1 + i) {
                next = i;
            }
            first_after[i] = next;
        }
        for i in 0..n1 {
            if occupied(j * n1 + i) {
                last = Some(i);
            }
            let behind = last.is_some_and(|l| i - l <= reach);
            let ahead = first_after[i] != usize::MAX && first_after[i] - i <= reach;
            rows[j * n1 + i] = behind || ahead;
        }
    }
    let mut out = vec![false; g.cells()];
    for j in 0..n2 {
        let lo = j.saturating_sub(reach);
        let hi = (j + reach).min(n2 - 1);
        for i in 0..n1 {
            out[j * n1 + i] = (lo..=hi).any(|b| rows[b * n1 + i]);
        }
    }
    out
}

/// Builds foot tables slice by slice. Without interaction one table serves
/// every slice; otherwise only cells that can sense some mass differ from
/// the free-motion table.
struct FootCache<'m> {
    model: &'m Model,
    walls: WallMask,
    free: Option<FootTable>,
    last: Option<(*const DensityField, FootTable)>,
}

impl<'m> FootCache<'m> {
    fn new(model: &'m Model) -> Self {
        FootCache {
            model,
            walls: WallMask::closed(&model.grid),
            free: None,
            last: None,
        }
    }

    fn free_table(&mut self) -> &FootTable {
        let (model, walls) = (self.model, &self.walls);
        self.free.get_or_insert_with(|| {
            let g = &model.grid;
            let k = model.controls.len();
            let placeholder = InterpStencil {
                base: 0,
                step_x: 0,
                step_y: 0,
                tx: 0.0,
                ty: 0.0,
            };
            let mut table = FootTable {
                k,
                feet: vec![placeholder; g.cells() * k],
            };
            table.refresh(model, &DensityField::zeros(g), walls, None);
            table
        })
    }

    fn get(&mut self, rho: &DensityField) -> &FootTable {
        if !self.model.interacting() {
            return self.free_table();
        }
        let key = rho as *const DensityField;
        if !matches!(&self.last, Some((k, _)) if *k == key) {
            let mut table = self.free_table().clone();
            let active = near_mass(&self.model.grid, rho, self.model.stencils.reach);
            table.refresh(self.model, rho, &self.walls, Some(&active));
            self.last = Some((key, table));
        }
        &self.last.as_ref().expect("foot table present").1
    }
}

fn running_costs(model: &Model, problem: &HjbProblem<'_>, rho: &DensityField) -> Vec<f64> {
    let g = &model.grid;
    match problem {
        HjbProblem::FiniteHorizon { running, .. } => (0..g.cells())
            .map(|c| {
                let (i, j) = g.coords(c);
                running.eval(g.center(i, j), rho.values[c])
            })
            .collect(),
        HjbProblem::MinimumTime { .. } => vec![1.0; g.cells()],
    }
}

fn wall_value(model: &Model, problem: &HjbProblem<'_>, rho_theta: &SpaceTimeDensity, start: usize) -> f64 {
    let g = &model.grid;
    let horizon = g.horizon();
    match problem {
        HjbProblem::FiniteHorizon { running, terminal } => {
            let mut ell_max: f64 = 1.0;
            let mut last: *const DensityField = std::ptr::null();
            for n in start..=g.nt {
                let slice = rho_theta.slice(n);
                if std::ptr::eq(slice, last) || (n > start && !running.depends_on_density()) {
                    continue;
                }
                last = slice;
                for c in 0..g.cells() {
                    let (i, j) = g.coords(c);
                    ell_max = ell_max.max(running.eval(g.center(i, j), slice.values[c]).abs());
                }
            }
            let g_max = (0..g.cells())
                .map(|c| {
                    let (i, j) = g.coords(c);
                    terminal.eval(g.center(i, j)).abs()
                })
                .fold(0.0, f64::max);
            10.0 * (horizon * ell_max + g_max)
        }
        HjbProblem::MinimumTime { .. } => 10.0 * horizon,
    }
}

/// Evaluates `min_k { φ^n(ω(a_k)) + Δt ℓ }` for every cell of one level.
fn minimize_level(
    model: &Model,
    feet: &FootTable,
    phi: &[f64],
    ell: &[f64],
    wall: f64,
    best: &mut [f64],
    arg: &mut [u16],
) {
    let g = &model.grid;
    let dt = g.dt;
    for_each_row2(model.exec, best, g.n1, arg, g.n1, |j, brow, arow| {
        for i in 0..g.n1 {
            let c = g.index(i, j);
            let offset = dt * ell[c];
            let mut b = f64::INFINITY;
            let mut a = 0u16;
            for (m, st) in feet.cell(c).iter().enumerate() {
                let q = st.apply(phi).min(wall) + offset;
                if q < b {
                    b = q;
                    a = m as u16;
                }
            }
            brow[i] = b;
            arow[i] = a;
        }
    });
}

fn pin_boundary(grid: &Grid, phi: &mut [f64], wall: f64, targets: Option<&CompiledPhase>) {
    for j in 0..grid.n2 {
        for i in 0..grid.n1 {
            if !grid.is_ring(i, j) {
                continue;
            }
            let c = grid.index(i, j);
            phi[c] = match targets {
                Some(t) if t.is_target[c] => 0.0,
                _ => wall,
            };
        }
    }
}

fn terminal_slice(model: &Model, problem: &HjbProblem<'_>, wall: f64) -> Vec<f64> {
    let g = &model.grid;
    let mut phi = match problem {
        HjbProblem::FiniteHorizon { terminal, .. } => (0..g.cells())
            .map(|c| {
                let (i, j) = g.coords(c);
                terminal.eval(g.center(i, j)).min(wall)
            })
            .collect(),
        HjbProblem::MinimumTime { .. } => vec![wall; g.cells()],
    };
    pin_boundary(g, &mut phi, wall, problem.believed_targets(g, g.nt));
    phi
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackwardSolution {
    pub value: ValueField,
    pub control: ControlField,
}

/// Solves the backward equation on levels `start..=nt` and synthesizes the
/// control on the same levels.
pub fn solve_backward(
    model: &Model,
    problem: &HjbProblem<'_>,
    rho_theta: &SpaceTimeDensity,
    start: usize,
) -> Result<BackwardSolution> {
    let g = &model.grid;
    if rho_theta.len() != g.nt + 1 {
        return Err(Error::internal(format!(
            "rho_theta has {} slices, expected {}",
            rho_theta.len(),
            g.nt + 1
        )));
    }
    if start > g.nt {
        return Err(Error::internal(format!("window start {start} beyond nt {}", g.nt)));
    }
    let cells = g.cells();
    let wall = wall_value(model, problem, rho_theta, start);
    let diffusion = match problem {
        HjbProblem::FiniteHorizon { .. } if model.sigma > 0.0 => model.sigma * g.dt / g.cell_area(),
        _ => 0.0,
    };

    let levels = g.nt - start + 1;
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); levels];
    let mut controls: Vec<Vec<u16>> = vec![Vec::new(); levels];
    values[levels - 1] = terminal_slice(model, problem, wall);

    let mut cache = FootCache::new(model);
    let mut ell_cache: Option<(*const DensityField, Vec<f64>)> = None;
    let mut best = vec![0.0; cells];
    for n in (start..=g.nt).rev() {
        let rho = rho_theta.slice(n);
        let key = rho as *const DensityField;
        let reuse_ell = matches!(&ell_cache, Some((k, _)) if *k == key
            || !matches!(problem, HjbProblem::FiniteHorizon { running, .. } if running.depends_on_density()));
        if !reuse_ell {
            ell_cache = Some((key, running_costs(model, problem, rho)));
        }
        let ell = &ell_cache.as_ref().expect("running cost present").1;
        let feet = cache.get(rho);

        let phi = &values[n - start];
        let mut arg = vec![0u16; cells];
        minimize_level(model, feet, phi, ell, wall, &mut best, &mut arg);
        controls[n - start] = arg;

        if n == start {
            break;
        }
        let mut next = best.clone();
        if diffusion > 0.0 {
            add_diffusion(g, phi, diffusion, &mut next);
        }
        for (c, v) in next.iter_mut().enumerate() {
            if !v.is_finite() {
                let (i, j) = g.coords(c);
                return Err(Error::internal(format!("non-finite value at level {} cell ({i}, {j})", n - 1)));
            }
            *v = v.min(wall);
        }
        pin_boundary(g, &mut next, wall, problem.believed_targets(g, n - 1));
        values[n - 1 - start] = next;
    }

    Ok(BackwardSolution {
        value: ValueField {
            start,
            wall_value: wall,
            slices: values,
        },
        control: ControlField {
            start,
            slices: controls,
        },
    })
}

/// Explicit Laplacian term on interior cells; ring neighbors are replaced by
/// the center value so saturated walls do not leak in.
fn add_diffusion(g: &Grid, phi: &[f64], coef: f64, out: &mut [f64]) {
    for j in 1..g.n2.saturating_sub(1) {
        for i in 1..g.n1.saturating_sub(1) {
            let c = g.index(i, j);
            let center = phi[c];
            let pick = |ni: usize, nj: usize| if g.is_ring(ni, nj) { center } else { phi[g.index(ni, nj)] };
            let lap = pick(i + 1, j) + pick(i - 1, j) + pick(i, j + 1) + pick(i, j - 1) - 4.0 * center;
            out[c] += coef * lap;
        }
    }
}

/// Finite-horizon value function on all levels `0..=nt`.
pub fn sl_backward_sweep(
    model: &Model,
    running: &RunningCost,
    terminal: &TerminalCost,
    rho_theta: &SpaceTimeDensity,
) -> Result<ValueField> {
    let problem = HjbProblem::FiniteHorizon { running, terminal };
    Ok(solve_backward(model, &problem, rho_theta, 0)?.value)
}

/// Minimum-time value function on all levels, with exits as believed at `believed_at`.
pub fn minimum_time_sweep(
    model: &Model,
    rho_theta: &SpaceTimeDensity,
    targets: &CompiledTargets,
    schedule: &TargetSchedule,
    believed_at: f64,
) -> Result<ValueField> {
    let problem = HjbProblem::MinimumTime {
        targets,
        schedule,
        believed_at,
    };
    Ok(solve_backward(model, &problem, rho_theta, 0)?.value)
}

/// Recomputes `argmin_k { φ^n(ω(a_k)) + Δt ℓ^n }` on every stored level of
/// `phi`; ties go to the lowest index.
pub fn synthesize_control(
    model: &Model,
    problem: &HjbProblem<'_>,
    rho_theta: &SpaceTimeDensity,
    phi: &ValueField,
) -> Result<ControlField> {
    let g = &model.grid;
    if rho_theta.len() != g.nt + 1 {
        return Err(Error::internal("rho_theta length does not match grid"));
    }
    let mut cache = FootCache::new(model);
    let mut best = vec![0.0; g.cells()];
    let mut slices = Vec::with_capacity(phi.slices.len());
    for n in phi.start..=phi.end() {
        let rho = rho_theta.slice(n);
        let ell = running_costs(model, problem, rho);
        let feet = cache.get(rho);
        let mut arg = vec![0u16; g.cells()];
        minimize_level(model, feet, phi.slice(n), &ell, phi.wall_value, &mut best, &mut arg);
        slices.push(arg);
    }
    Ok(ControlField {
        start: phi.start,
        slices,
    })
}
