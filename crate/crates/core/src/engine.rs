//! Windowed forward-backward fixed point and the outer time loop.
//!
//! At outer step `s` agents know the crowd up to `t^s`, predict it for
//! `θ` more time units and assume it then stays frozen. The resulting
//! space-time density `ρ^θ` feeds the backward solver; its control drives
//! the prediction again, until successive predictions agree. Only the
//! control at `t^s` is applied to the main density.

use std::fmt;
use std::ops::ControlFlow;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fields::{l1_distance, ControlField, DensityField, FictitiousPlay, SpaceTimeDensity};
use crate::fokker_planck::{absorb_target_mass, diffusion_is_positive, push_forward_step, transport_diffusion_is_positive};
use crate::grid::check_cfl;
use crate::hjb::{solve_backward, CompiledTargets, CostSpec, HjbProblem, TargetSchedule};
use crate::interaction::WallMask;
use crate::model::Model;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSolveOptions {
    pub max_iters: usize,
    /// Absolute tolerance on `E_k`.
    pub tol: f64,
    pub use_fictitious_play: bool,
    pub stagnation_window: usize,
    /// Seed each window with a prediction driven by the previous step's control.
    pub warm_start: bool,
}

impl Default for WindowSolveOptions {
    fn default() -> Self {
        WindowSolveOptions {
            max_iters: 50,
            tol: 1e-4,
            use_fictitious_play: false,
            stagnation_window: 5,
            warm_start: true,
        }
    }
}

impl WindowSolveOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::config("solver.max_iters", "must be at least 1"));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::config("solver.tol", format!("must be > 0, got {}", self.tol)));
        }
        if self.stagnation_window < 1 {
            return Err(Error::config("solver.stagnation_window", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Converged,
    /// `E_k` settled on a plateau above the tolerance.
    Stabilized,
    Exhausted,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Converged => "converged",
            Verdict::Stabilized => "stabilized",
            Verdict::Exhausted => "exhausted",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRecord {
    pub outer_step: usize,
    /// `E_1, E_2, ...`
    pub iterates: Vec<f64>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone)]
pub struct WindowOutcome {
    /// Synthesized control on levels `s..=nt` of the last iterate.
    pub control: ControlField,
    /// The last predicted space-time density.
    pub rho_theta: SpaceTimeDensity,
    pub record: ConvergenceRecord,
}

/// Mass that left through one exit segment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExitTally {
    pub phase: usize,
    pub segment: usize,
    pub mass: f64,
}

#[derive(Debug, Clone)]
pub struct SimulationResult {
    /// Main density on levels `0..=nt`.
    pub density: SpaceTimeDensity,
    /// Applied control on levels `0..nt`.
    pub controls: ControlField,
    pub convergence: Vec<ConvergenceRecord>,
    /// Cumulative evacuated mass on levels `0..=nt`.
    pub evacuated: Vec<f64>,
    pub exits: Vec<ExitTally>,
}

/// A fully validated problem ready to run.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub model: Model,
    pub costs: CostSpec,
    pub schedule: Option<TargetSchedule>,
    targets: Option<CompiledTargets>,
    /// Prediction window length in time steps.
    pub theta_steps: usize,
    pub options: WindowSolveOptions,
    pub rho0: DensityField,
}

impl Simulation {
    pub fn new(
        model: Model,
        costs: CostSpec,
        schedule: Option<TargetSchedule>,
        theta: f64,
        options: WindowSolveOptions,
        rho0: DensityField,
    ) -> Result<Simulation> {
        let g = &model.grid;
        if !(theta.is_finite() && theta >= 0.0 && theta <= g.horizon() * (1.0 + 1e-12)) {
            return Err(Error::config("model.theta", format!("must lie in [0, T], got {theta}")));
        }
        options.validate()?;
        if !rho0.same_shape(&DensityField::zeros(g)) {
            return Err(Error::config("rho0", "initial density does not match the grid"));
        }
        let targets = match (&costs, &schedule) {
            (CostSpec::MinimumTime, None) => {
                return Err(Error::config("target", "minimum-time mode needs a target schedule"));
            }
            (_, Some(s)) => {
                s.validate(g.horizon())?;
                Some(CompiledTargets::compile(s, g)?)
            }
            (_, None) => None,
        };
        if model.sigma > 0.0 && !diffusion_is_positive(g, model.sigma) {
            return Err(Error::config(
                "model.sigma",
                format!("4 sigma dt = {:e} exceeds the cell area {:e}", 4.0 * model.sigma * g.dt, g.cell_area()),
            ));
        }
        let vmax = model.vmax_bound(rho0.max());
        let cfl = check_cfl(g, vmax);
        if !cfl.passed {
            return Err(Error::Cfl {
                displacement: vmax * g.dt,
                cell: g.min_spacing(),
            });
        }
        if model.sigma > 0.0 && !transport_diffusion_is_positive(g, model.sigma, vmax) {
            return Err(Error::config(
                "grid.nt",
                format!(
                    "transport at speed {vmax:.3} leaves too little mass in place for sigma = {}; refine the time step",
                    model.sigma
                ),
            ));
        }
        let theta_steps = g.steps_in(theta).min(g.nt);
        Ok(Simulation {
            model,
            costs,
            schedule,
            targets,
            theta_steps,
            options,
            rho0,
        })
    }

    pub fn grid(&self) -> &crate::grid::Grid {
        &self.model.grid
    }

    fn problem(&self, s: usize) -> Result<HjbProblem<'_>> {
        let pair = self.targets.as_ref().zip(self.schedule.as_ref());
        HjbProblem::from_costs(&self.costs, pair, self.grid().time(s))
    }

    fn true_phase(&self, t: f64) -> Option<usize> {
        self.schedule.as_ref().map(|s| s.phase_at(t))
    }

    /// Walls and exit cells of a phase; fully closed without a target.
    fn phase_geometry(&self, phase: Option<usize>) -> (Option<&WallMask>, Option<&[bool]>) {
        match (phase, &self.targets) {
            (Some(p), Some(t)) => (Some(&t.phases[p].walls), Some(&t.phases[p].is_target[..])),
            _ => (None, None),
        }
    }

    /// Predicts `min(theta_steps, nt - s)` slices from `rho_s` under `control`,
    /// with exits as believed at `t^s`.
    pub fn predict_forward(&self, rho_s: &DensityField, control: &ControlField, s: usize) -> Result<Vec<DensityField>> {
        let g = self.grid();
        let steps = self.theta_steps.min(g.nt - s);
        let closed = WallMask::closed(g);
        let believed = |n: usize| {
            self.schedule
                .as_ref()
                .map(|sch| sch.believed_phase(g.time(s), g.time(n)))
        };
        let mut out = Vec::with_capacity(steps);
        let mut current = rho_s;
        for m in 0..steps {
            let n = s + m;
            if !control.covers(n) {
                return Err(Error::internal(format!("control missing level {n}")));
            }
            let (walls, _) = self.phase_geometry(believed(n));
            let (mut next, _) = push_forward_step(&self.model, current, control.slice(n), walls.unwrap_or(&closed))?;
            if let (_, Some(target)) = self.phase_geometry(believed(n + 1)) {
                absorb_target_mass(&mut next, target, g);
            }
            out.push(next);
            current = out.last().expect("just pushed");
        }
        Ok(out)
    }

    /// Runs the fixed point for the window starting at `s`.
    pub fn solve_window(
        &self,
        history: &[Arc<DensityField>],
        s: usize,
        warm: Option<&ControlField>,
    ) -> Result<WindowOutcome> {
        let g = self.grid();
        if history.len() < s + 1 {
            return Err(Error::internal(format!("history has {} slices, need {}", history.len(), s + 1)));
        }
        let opts = &self.options;
        let problem = self.problem(s)?;
        let rho_s = &history[s];

        let mut previous = match warm {
            Some(ctrl) if opts.warm_start && ctrl.covers(s) && ctrl.covers(g.nt) => {
                build_rho_theta(&history[..=s], self.predict_forward(rho_s, ctrl, s)?, g.nt)?
            }
            _ => build_rho_theta(&history[..=s], Vec::new(), g.nt)?,
        };
        let mut play = FictitiousPlay::new();
        if opts.use_fictitious_play {
            play.push(&previous)?;
        }

        let mut iterates = Vec::new();
        let mut verdict = Verdict::Exhausted;
        let mut control = None;
        for k in 1..=opts.max_iters {
            let input = if opts.use_fictitious_play {
                play.mean().expect("history is nonempty")
            } else {
                &previous
            };
            let solution = solve_backward(&self.model, &problem, input, s)?;
            let prediction = self.predict_forward(rho_s, &solution.control, s)?;
            let next = build_rho_theta(&history[..=s], prediction, g.nt)?;
            let e = l1_distance(&next, &previous, g)?;
            iterates.push(e);
            control = Some(solution.control);
            if opts.use_fictitious_play {
                play.push(&next)?;
            }
            previous = next;

            // E_1 compares against the seed, not an iterate: always take a second pass.
            if k >= 2 && e <= opts.tol {
                verdict = Verdict::Converged;
                break;
            }
            if stagnated(&iterates, opts) {
                verdict = Verdict::Stabilized;
                break;
            }
        }
        Ok(WindowOutcome {
            control: control.expect("max_iters >= 1"),
            rho_theta: previous,
            record: ConvergenceRecord {
                outer_step: s,
                iterates,
                verdict,
            },
        })
    }

    pub fn run(&self) -> Result<SimulationResult> {
        self.run_observed(|_, _| ControlFlow::Continue(()))
    }

    /// Like [`Simulation::run`], calling `observe` after each outer step with
    /// the new density slice and that step's convergence record.
    /// Returning `Break` stops the run; the result then covers only the steps taken.
    pub fn run_observed<F>(&self, mut observe: F) -> Result<SimulationResult>
    where
        F: FnMut(&DensityField, &ConvergenceRecord) -> ControlFlow<()>,
    {
        let g = self.grid();
        let closed = WallMask::closed(g);
        let segment_of = self.segment_lookup();
        let mut exits: Vec<ExitTally> = self
            .targets
            .iter()
            .flat_map(|t| t.phases.iter().enumerate())
            .flat_map(|(p, ph)| (0..ph.segments.len()).map(move |e| ExitTally { phase: p, segment: e, mass: 0.0 }))
            .collect();

        let mut history = vec![Arc::new(self.rho0.clone())];
        let mut applied = Vec::with_capacity(g.nt);
        let mut convergence = Vec::with_capacity(g.nt);
        let mut evacuated = vec![0.0];
        let mut warm: Option<ControlField> = None;

        for n in 0..g.nt {
            let outcome = self.solve_window(&history, n, warm.as_ref())?;
            let alpha = outcome.control.slice(n).to_vec();

            let phase_now = self.true_phase(g.time(n));
            let (walls, _) = self.phase_geometry(phase_now);
            let (mut next, report) = push_forward_step(&self.model, &history[n], &alpha, walls.unwrap_or(&closed))?;
            let mut step_evac = report.mass_evacuated;
            if let Some(p) = phase_now {
                record_exits(&mut exits, &segment_of[p], p, &report.outflow);
            }
            let phase_next = self.true_phase(g.time(n + 1));
            if let (Some(p), (_, Some(target))) = (phase_next, self.phase_geometry(phase_next)) {
                let removed = absorb_target_mass(&mut next, target, g);
                step_evac += removed.iter().map(|&(_, m)| m).sum::<f64>();
                record_exits(&mut exits, &segment_of[p], p, &removed);
            }
            evacuated.push(evacuated[n] + step_evac);

            let flow = observe(&next, &outcome.record);
            history.push(Arc::new(next));
            applied.push(alpha);
            convergence.push(outcome.record);
            warm = Some(outcome.control);
            if flow.is_break() {
                break;
            }
        }

        Ok(SimulationResult {
            density: SpaceTimeDensity { slices: history },
            controls: ControlField {
                start: 0,
                slices: applied,
            },
            convergence,
            evacuated,
            exits,
        })
    }

    /// For every phase, the segment index of each exit cell.
    fn segment_lookup(&self) -> Vec<Vec<Option<usize>>> {
        let cells = self.grid().cells();
        self.targets
            .iter()
            .flat_map(|t| t.phases.iter())
            .map(|ph| {
                let mut map = vec![None; cells];
                for (e, seg) in ph.segments.iter().enumerate() {
                    for &c in seg {
                        map[c].get_or_insert(e);
                    }
                }
                map
            })
            .collect()
    }
}

fn record_exits(exits: &mut [ExitTally], lookup: &[Option<usize>], phase: usize, removed: &[(usize, f64)]) {
    for &(c, m) in removed {
        if let Some(e) = lookup[c] {
            if let Some(t) = exits.iter_mut().find(|t| t.phase == phase && t.segment == e) {
                t.mass += m;
            }
        }
    }
}

fn stagnated(iterates: &[f64], opts: &WindowSolveOptions) -> bool {
    let w = opts.stagnation_window;
    if iterates.len() <= w {
        return false;
    }
    let tail = &iterates[iterates.len() - w - 1..];
    let hi = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = tail.iter().cloned().fold(f64::INFINITY, f64::min);
    hi - lo < opts.tol
}

/// Acquired history up to `s`, then the prediction, then the last known slice
/// frozen until level `nt`.
pub fn build_rho_theta(
    history: &[Arc<DensityField>],
    prediction: Vec<DensityField>,
    nt: usize,
) -> Result<SpaceTimeDensity> {
    if history.is_empty() {
        return Err(Error::internal("empty history"));
    }
    let s = history.len() - 1;
    if s + prediction.len() > nt {
        return Err(Error::internal("prediction runs past the final level"));
    }
    let mut slices: Vec<Arc<DensityField>> = Vec::with_capacity(nt + 1);
    slices.extend(history.iter().cloned());
    slices.extend(prediction.into_iter().map(Arc::new));
    let last = slices.last().cloned().expect("nonempty");
    slices.resize(nt + 1, last);
    Ok(SpaceTimeDensity { slices })
}

/// Convenience wrapper over [`Simulation::solve_window`].
pub fn solve_window_mfg(
    sim: &Simulation,
    history: &[Arc<DensityField>],
    s: usize,
    warm: Option<&ControlField>,
) -> Result<WindowOutcome> {
    sim.solve_window(history, s, warm)
}

pub fn predict_forward(sim: &Simulation, rho_s: &DensityField, control: &ControlField, s: usize) -> Result<Vec<DensityField>> {
    sim.predict_forward(rho_s, control, s)
}

pub fn run_simulation(sim: &Simulation) -> Result<SimulationResult> {
    sim.run()
}
