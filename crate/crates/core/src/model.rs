use crate::error::{Error, Result};
use crate::fields::DensityField;
use crate::grid::{Grid, Vec2};
use crate::hjb::ControlSet;
use crate::interaction::{
    build_stencils, interaction_velocity, project_boundary_velocity, total_velocity,
    InteractionParams, StencilSet, WallMask,
};
use crate::par::Execution;

/// Everything the forward and backward solvers share: the grid, the
/// discrete control set, the repulsion stencils and the diffusion strength.
#[derive(Debug, Clone)]
pub struct Model {
    pub grid: Grid,
    pub controls: ControlSet,
    pub stencils: StencilSet,
    pub interaction: InteractionParams,
    pub sigma: f64,
    pub exec: Execution,
}

impl Model {
    pub fn new(grid: Grid, controls: ControlSet, interaction: InteractionParams, sigma: f64) -> Result<Model> {
        interaction.validate()?;
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::config("model.sigma", format!("must be >= 0, got {sigma}")));
        }
        let stencils = build_stencils(&grid, &interaction, &controls);
        Ok(Model {
            grid,
            controls,
            stencils,
            interaction,
            sigma,
            exec: Execution::default(),
        })
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    /// Whether `V` depends on the density at all.
    pub fn interacting(&self) -> bool {
        self.interaction.c_rep > 0.0 && !self.stencils.is_empty()
    }

    /// Wall-projected total velocity `a_k + V_int` at cell `(i, j)`.
    #[inline]
    pub fn velocity(&self, rho: &DensityField, i: usize, j: usize, k: usize, walls: &WallMask) -> Vec2 {
        let a = self.controls.directions[k];
        let v = if self.interacting() {
            total_velocity(a, interaction_velocity(rho, i, j, k, &self.stencils, &self.interaction))
        } else {
            a
        };
        project_boundary_velocity(v, i, j, &self.grid, walls)
    }

    /// A-priori speed bound for densities not exceeding `rho_max`.
    ///
    /// Controls have unit length and the discrete repulsion obeys
    /// `|V_int| <= C_rep ρ_max Σ|kernel|`.
    pub fn vmax_bound(&self, rho_max: f64) -> f64 {
        1.0 + self.interaction.c_rep * rho_max * self.stencils.max_kernel_mass()
    }
}
