//! Scenario descriptions and their TOML form.
//!
//! A [`Scenario`] holds every physical and numerical parameter of a run.
//! The five built-in scenarios ship as annotated files under `scenarios/`
//! in this crate; `parse_config(include_str!(...))` reproduces them exactly.

use serde::{Deserialize, Serialize};

use crate::engine::{Simulation, WindowSolveOptions};
use crate::error::{Error, Result};
use crate::fields::{cell_average_init, Group, Rect};
use crate::grid::Grid;
use crate::hjb::{
    ControlSet, CostSpec, ExitPhase, ExitSegment, RunningCost, TargetSchedule, TerminalCost,
};
use crate::interaction::{InteractionParams, Side};
use crate::model::Model;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Domain `[0, size[0]] x [0, size[1]]`.
    pub size: [f64; 2],
    pub n1: usize,
    pub n2: usize,
    /// Final time `T`.
    pub horizon: f64,
    pub nt: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub sigma: f64,
    /// Prediction horizon, in time units.
    pub theta: f64,
    /// How long before a scheduled exit change agents learn of it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exit_forecast: Option<f64>,
    pub c_rep: f64,
    pub r0: f64,
    pub r: f64,
    /// Number of control directions on the unit circle.
    pub controls: usize,
    /// Values of `theta` compared in the reference experiments.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub theta_presets: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialDensity {
    pub groups: Vec<Group>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub phases: Vec<ExitPhase>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    /// Absolute tolerance on `E_k`; defaults to `1e-4` times the initial mass.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    pub max_iters: usize,
    pub fictitious_play: bool,
    pub stagnation_window: usize,
    #[serde(default = "default_true")]
    pub warm_start: bool,
}

fn default_true() -> bool {
    true
}

impl Default for SolverSpec {
    fn default() -> Self {
        let d = WindowSolveOptions::default();
        SolverSpec {
            tol: None,
            max_iters: d.max_iters,
            fictitious_play: d.use_fictitious_play,
            stagnation_window: d.stagnation_window,
            warm_start: d.warm_start,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub grid: GridSpec,
    pub model: ModelSpec,
    pub costs: CostSpec,
    pub rho0: InitialDensity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetSpec>,
    #[serde(default)]
    pub solver: SolverSpec,
}

/// Tolerance factor applied to the initial mass when `solver.tol` is unset.
pub const DEFAULT_RELATIVE_TOL: f64 = 1e-4;

pub const BUILTIN_NAMES: [&str; 5] = ["test1", "test2", "test3", "test4", "test5"];

impl Scenario {
    pub fn initial_mass(&self) -> f64 {
        self.rho0.groups.iter().map(|g| g.mass).sum()
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.size, self.grid.n1, self.grid.n2, self.grid.horizon, self.grid.nt)
    }

    pub fn schedule(&self) -> Option<TargetSchedule> {
        self.target.as_ref().map(|t| TargetSchedule {
            phases: t.phases.clone(),
            forecast: self.model.exit_forecast,
        })
    }

    pub fn solver_options(&self) -> WindowSolveOptions {
        let tol = self
            .solver
            .tol
            .unwrap_or_else(|| DEFAULT_RELATIVE_TOL * self.initial_mass().max(f64::MIN_POSITIVE));
        WindowSolveOptions {
            max_iters: self.solver.max_iters,
            tol,
            use_fictitious_play: self.solver.fictitious_play,
            stagnation_window: self.solver.stagnation_window,
            warm_start: self.solver.warm_start,
        }
    }

    /// Validates everything and assembles the solver state.
    pub fn build(&self) -> Result<Simulation> {
        let grid = self.grid()?;
        let controls = ControlSet::new(self.model.controls)?;
        let interaction = InteractionParams {
            c_rep: self.model.c_rep,
            r0: self.model.r0,
            r: self.model.r,
        };
        if self.model.exit_forecast.is_some() && self.target.is_none() {
            return Err(Error::config("model.exit_forecast", "only meaningful with a target"));
        }
        if matches!(self.costs, CostSpec::MinimumTime) && self.target.is_none() {
            return Err(Error::config("target", "minimum-time mode needs a target"));
        }
        for (p, t) in self.model.theta_presets.iter().enumerate() {
            if !(*t >= 0.0 && *t <= self.grid.horizon) {
                return Err(Error::config(format!("model.theta_presets[{p}]"), "must lie in [0, T]"));
            }
        }
        let rho0 = cell_average_init(&self.rho0.groups, &grid)?;
        let model = Model::new(grid, controls, interaction, self.model.sigma)?;
        Simulation::new(
            model,
            self.costs,
            self.schedule(),
            self.model.theta,
            self.solver_options(),
            rho0,
        )
    }

    pub fn with_theta(&self, theta: f64) -> Scenario {
        let mut s = self.clone();
        s.model.theta = theta;
        s
    }

    /// Same physics on a different mesh.
    pub fn with_resolution(&self, n1: usize, n2: usize, nt: usize) -> Scenario {
        let mut s = self.clone();
        s.grid.n1 = n1;
        s.grid.n2 = n2;
        s.grid.nt = nt;
        s
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::internal(format!("serializing scenario: {e}")))
    }
}

/// Parses and validates a TOML scenario document.
pub fn parse_config(document: &str) -> Result<Scenario> {
    let scenario: Scenario = toml::from_str(document).map_err(|e| {
        let reason = e.message().to_string();
        let field = e
            .span()
            .map(|sp| locate_key(document, sp.start))
            .unwrap_or_else(|| "document".to_string());
        Error::config(field, reason)
    })?;
    match scenario.build() {
        Ok(_) => Ok(scenario),
        Err(Error::Cfl { displacement, cell }) => Err(Error::config(
            "grid.nt",
            format!("a-priori CFL check fails: vmax dt = {displacement:.4e} > dx = {cell:.4e}"),
        )),
        Err(e) => Err(e),
    }
}

/// Best-effort dotted path of the key at byte `offset` of a TOML document.
fn locate_key(document: &str, offset: usize) -> String {
    let head = &document[..offset.min(document.len())];
    let table = head
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| l.starts_with('['))
        .map(|l| l.trim_matches(|c| c == '[' || c == ']').to_string());
    let line = head.rsplit('\n').next().unwrap_or("");
    let key = line.split('=').next().map(str::trim).filter(|k| !k.is_empty() && line.contains('='));
    match (table, key) {
        (Some(t), Some(k)) => format!("{t}.{k}"),
        (Some(t), None) => t,
        (None, Some(k)) => k.to_string(),
        (None, None) => "document".to_string(),
    }
}

pub fn builtin_scenario(name: &str) -> Result<Scenario> {
    let paper_model = |sigma: f64, theta: f64, c_rep: f64, presets: Vec<f64>| ModelSpec {
        sigma,
        theta,
        exit_forecast: None,
        c_rep,
        r0: 0.01,
        r: 0.06,
        controls: 32,
        theta_presets: presets,
    };
    let grid = |horizon: f64, nt: usize| GridSpec {
        size: [1.0, 1.0],
        n1: 50,
        n2: 50,
        horizon,
        nt,
    };
    let to_center = TerminalCost::Distance { center: [0.5, 0.5] };
    let corner = |mass: f64| InitialDensity {
        groups: vec![Group {
            region: Rect { x: [0.0, 0.1], y: [0.0, 0.1] },
            mass,
        }],
    };
    let bottom_exits = || TargetSpec {
        phases: vec![ExitPhase {
            start: 0.0,
            exits: vec![
                ExitSegment { side: Side::Bottom, center: 0.15, width: 0.2 },
                ExitSegment { side: Side::Bottom, center: 0.85, width: 0.2 },
            ],
        }],
    };
    let two_groups = || InitialDensity {
        groups: vec![
            Group { region: Rect { x: [0.45, 0.55], y: [0.1, 0.2] }, mass: 0.006 },
            Group { region: Rect { x: [0.8, 0.9], y: [0.45, 0.55] }, mass: 0.006 },
        ],
    };

    let s = match name {
        "test1" => Scenario {
            name: name.into(),
            description: "congestion-averse crowd heading for the center; convergence study".into(),
            grid: grid(0.5, 600),
            model: paper_model(0.05, 0.1, 0.0, vec![0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45]),
            costs: CostSpec::FiniteHorizon {
                running: RunningCost::LinearDensity { coeff: 3.0 },
                terminal: to_center,
            },
            rho0: corner(1.0),
            target: None,
            solver: SolverSpec::default(),
        },
        "test2" => Scenario {
            name: name.into(),
            description: "crowd drifting right under a sloped running cost, then turning to the center".into(),
            grid: grid(1.0, 200),
            model: paper_model(0.0, 0.25, 6.0, vec![0.0, 0.25, 1.0]),
            costs: CostSpec::FiniteHorizon {
                running: RunningCost::LinearX1 { c0: 3.0, c1: -2.0 },
                terminal: to_center,
            },
            rho0: corner(0.015),
            target: None,
            solver: SolverSpec::default(),
        },
        "test3" | "test4" => Scenario {
            name: name.into(),
            description: if name == "test3" {
                "two groups, two bottom exits; convergence study".into()
            } else {
                "two groups, two bottom exits; evacuation for several theta".into()
            },
            grid: grid(1.5, 200),
            model: paper_model(0.0, 0.15, 8.0, vec![0.0, 0.15, 0.75]),
            costs: CostSpec::MinimumTime,
            rho0: two_groups(),
            target: Some(bottom_exits()),
            solver: SolverSpec {
                fictitious_play: name == "test3",
                ..SolverSpec::default()
            },
        },
        "test5" => Scenario {
            name: name.into(),
            description: "exit moves from the top to the bottom side at t = 0.48, announced 0.24 ahead".into(),
            grid: grid(2.5, 200),
            model: ModelSpec {
                exit_forecast: Some(0.24),
                ..paper_model(0.0, 2.5, 8.0, vec![0.0, 0.25, 2.5])
            },
            costs: CostSpec::MinimumTime,
            rho0: InitialDensity {
                groups: vec![Group { region: Rect { x: [0.35, 0.65], y: [0.35, 0.65] }, mass: 0.0225 }],
            },
            target: Some(TargetSpec {
                phases: vec![
                    ExitPhase {
                        start: 0.0,
                        exits: vec![ExitSegment { side: Side::Top, center: 0.5, width: 0.2 }],
                    },
                    ExitPhase {
                        start: 0.48,
                        exits: vec![ExitSegment { side: Side::Bottom, center: 0.5, width: 0.2 }],
                    },
                ],
            }),
            solver: SolverSpec::default(),
        },
        other => {
            return Err(Error::config(
                "scenario",
                format!("unknown scenario `{other}`; expected one of {}", BUILTIN_NAMES.join(", ")),
            ))
        }
    };
    Ok(s)
}
