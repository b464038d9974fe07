//! Scalar diagnostics extracted from a finished run.

use crate::fields::{total_mass, DensityField, SpaceTimeDensity};
use crate::grid::{Grid, Vec2};
use crate::hjb::ControlSet;

const EPS: f64 = 1e-12;

/// Center of mass of cells accepted by `keep`, or `None` if they hold no mass.
pub fn barycenter_where(rho: &DensityField, g: &Grid, keep: impl Fn(Vec2) -> bool) -> Option<Vec2> {
    let mut m = 0.0;
    let mut acc = Vec2::ZERO;
    for j in 0..g.n2 {
        for i in 0..g.n1 {
            let x = g.center(i, j);
            if !keep(x) {
                continue;
            }
            let d = rho.at(i, j);
            m += d;
            acc += x * d;
        }
    }
    (m > 0.0).then(|| acc * (1.0 / m))
}

pub fn barycenter(rho: &DensityField, g: &Grid) -> Option<Vec2> {
    barycenter_where(rho, g, |_| true)
}

pub fn barycenter_trajectory(density: &SpaceTimeDensity, g: &Grid) -> Vec<Option<Vec2>> {
    density.slices.iter().map(|s| barycenter(s, g)).collect()
}

/// Finite-difference velocity of a trajectory; entry `n` is `(b^{n+1} - b^n) / Δt`.
pub fn velocity_series(traj: &[Option<Vec2>], dt: f64) -> Vec<Option<Vec2>> {
    traj.windows(2)
        .map(|w| match (w[0], w[1]) {
            (Some(a), Some(b)) => Some((b - a) * (1.0 / dt)),
            _ => None,
        })
        .collect()
}

/// Time `t^n` of the first step after which the barycenter moves left.
pub fn direction_turn_time(density: &SpaceTimeDensity, g: &Grid) -> Option<f64> {
    let vel = velocity_series(&barycenter_trajectory(density, g), g.dt);
    vel.iter()
        .position(|v| matches!(v, Some(v) if v.x < -EPS))
        .map(|n| g.time(n))
}

/// Vertical velocity of the barycenter of the mass in `x² < split`.
pub fn lower_part_vertical_velocity(density: &SpaceTimeDensity, g: &Grid, split: f64) -> Vec<Option<f64>> {
    let traj: Vec<_> = density
        .slices
        .iter()
        .map(|s| barycenter_where(s, g, |x| x.y < split))
        .collect();
    velocity_series(&traj, g.dt).into_iter().map(|v| v.map(|v| v.y)).collect()
}

/// Per step, the share of the present mass whose applied control points
/// mostly downward, within 45 degrees of straight down.
pub fn downward_fraction(density: &SpaceTimeDensity, controls: &[Vec<u16>], set: &ControlSet, g: &Grid) -> Vec<f64> {
    controls
        .iter()
        .enumerate()
        .map(|(n, alpha)| {
            let rho = density.slice(n);
            let total: f64 = rho.values.iter().sum();
            if total <= 0.0 {
                return 0.0;
            }
            let down: f64 = rho
                .values
                .iter()
                .zip(alpha)
                .filter(|(_, &k)| {
                    let a = set.directions[k as usize];
                    a.y < -a.x.abs() - EPS
                })
                .map(|(d, _)| d)
                .sum();
            let _ = g;
            down / total
        })
        .collect()
}

/// First level at which the evacuated mass reaches `fraction` of `initial`.
pub fn evacuation_time(evacuated: &[f64], initial: f64, fraction: f64, g: &Grid) -> Option<f64> {
    evacuated
        .iter()
        .position(|&e| e >= fraction * initial - EPS * initial.max(1.0))
        .map(|n| g.time(n))
}

/// Mass still inside the domain at each level.
pub fn mass_series(density: &SpaceTimeDensity, g: &Grid) -> Vec<f64> {
    density.slices.iter().map(|s| total_mass(s, g)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn grid() -> Grid {
        Grid::new([1.0, 1.0], 10, 10, 1.0, 10).unwrap()
    }

    fn point(g: &Grid, i: usize, j: usize) -> Arc<DensityField> {
        let mut d = DensityField::zeros(g);
        d.values[g.index(i, j)] = 1.0;
        Arc::new(d)
    }

    #[test]
    fn barycenter_of_two_points() {
        let g = grid();
        let mut d = DensityField::zeros(&g);
        d.values[g.index(1, 1)] = 1.0;
        d.values[g.index(3, 1)] = 1.0;
        let b = barycenter(&d, &g).unwrap();
        assert!((b.x - 0.25).abs() < 1e-15 && (b.y - 0.15).abs() < 1e-15);
        assert!(barycenter(&DensityField::zeros(&g), &g).is_none());
    }

    #[test]
    fn turn_time_detects_first_leftward_step() {
        let g = grid();
        let path = [1, 2, 3, 3, 2, 1];
        let density = SpaceTimeDensity {
            slices: path.iter().map(|&i| point(&g, i, 4)).collect(),
        };
        assert_eq!(direction_turn_time(&density, &g), Some(g.time(3)));
    }

    #[test]
    fn evacuation_threshold() {
        let g = grid();
        let evac = [0.0, 0.5, 0.95, 0.99, 1.0];
        assert_eq!(evacuation_time(&evac, 1.0, 0.99, &g), Some(g.time(3)));
        assert_eq!(evacuation_time(&evac[..3], 1.0, 0.99, &g), None);
    }

    #[test]
    fn lower_part_moving_down() {
        let g = grid();
        let density = SpaceTimeDensity {
            slices: vec![point(&g, 4, 3), point(&g, 4, 2), point(&g, 4, 2)],
        };
        let v = lower_part_vertical_velocity(&density, &g, 0.5);
        assert!(v[0].unwrap() < 0.0 && v[1].unwrap() == 0.0);
    }
}
