use mfg_crowd::fields::{DensityField, SpaceTimeDensity};
use mfg_crowd::grid::Grid;
use mfg_crowd::hjb::{
    minimum_time_sweep, sl_backward_sweep, CompiledTargets, ControlSet, ExitSegment, RunningCost,
    TargetSchedule, TerminalCost,
};
use mfg_crowd::interaction::{InteractionParams, Side};
use mfg_crowd::model::Model;
use mfg_oracle::{brute_force_value, fast_sweep_distance, projected_unit_controls, OracleGrid, Problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn decoupled_model(n1: usize, n2: usize, horizon: f64, nt: usize, k: usize, sigma: f64) -> Model {
    let g = Grid::new([1.0, 1.0], n1, n2, horizon, nt).unwrap();
    Model::new(g, ControlSet::new(k).unwrap(), InteractionParams::none(), sigma).unwrap()
}

fn empty_crowd(g: &Grid) -> SpaceTimeDensity {
    SpaceTimeDensity::constant(DensityField::zeros(g), g.nt)
}

#[test]
fn finite_horizon_matches_brute_force_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(20240917);
    let mut worst: f64 = 0.0;
    for case in 0..24 {
        let n1 = rng.gen_range(4..=15);
        let n2 = rng.gen_range(4..=15);
        let nt = rng.gen_range(1..=40);
        let k = [4, 8, 16, 32][rng.gen_range(0..4)];
        let h = 1.0 / n1.max(n2) as f64;
        let horizon = rng.gen_range(0.2..1.0) * h * nt as f64;
        let sigma_max = h * h / (4.0 * horizon / nt as f64);
        let sigma = if case % 3 == 0 { rng.gen_range(0.0..0.05f64.min(sigma_max)) } else { 0.0 };
        let m = decoupled_model(n1, n2, horizon, nt, k, sigma);

        let (c0, c1) = (rng.gen_range(0.5..3.0), rng.gen_range(-2.0..2.0));
        let (t0, t1, t2) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let center = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
        let running = if case % 2 == 0 {
            RunningCost::LinearX1 { c0, c1 }
        } else {
            RunningCost::Constant { value: c0 }
        };
        let terminal = if case % 4 < 2 {
            TerminalCost::Linear { c0: t0, c1: t1, c2: t2 }
        } else {
            TerminalCost::Distance { center }
        };
        let phi = sl_backward_sweep(&m, &running, &terminal, &empty_crowd(&m.grid)).unwrap();

        let og = OracleGrid::new(1.0, 1.0, n1, n2, horizon, nt).unwrap();
        let run = move |x: f64, _y: f64, _n: usize| match running {
            RunningCost::LinearX1 { c0, c1 } => c0 + c1 * x,
            RunningCost::Constant { value } => value,
            RunningCost::LinearDensity { .. } => unreachable!(),
        };
        let term = move |x: f64, y: f64| match terminal {
            TerminalCost::Linear { c0, c1, c2 } => c0 + c1 * x + c2 * y,
            TerminalCost::Distance { center } => ((x - center[0]).powi(2) + (y - center[1]).powi(2)).sqrt(),
            TerminalCost::Constant { value } => value,
        };
        let closed = |_: usize, _: usize| false;
        let vel = projected_unit_controls(&og, k, &closed);
        let problem = Problem::FiniteHorizon { running: &run, terminal: &term, sigma };
        let table = brute_force_value(&og, &problem, k, &vel, phi.wall_value);

        for n in 0..=nt {
            for j in 0..n2 {
                for i in 0..n1 {
                    let diff = (phi.slice(n)[j * n1 + i] - table[n][j][i]).abs();
                    worst = worst.max(diff);
                    assert!(diff <= 1e-12, "case {case} level {n} cell ({i},{j}): diff {diff:e}");
                }
            }
        }
    }
    assert!(worst <= 1e-12);
}

#[test]
fn minimum_time_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..6 {
        let n = rng.gen_range(8..=15);
        let nt = rng.gen_range(20..=40);
        let horizon = 0.8 * nt as f64 / n as f64;
        let m = decoupled_model(n, n, horizon, nt, 16, 0.0);
        let g = &m.grid;
        let side = [Side::Bottom, Side::Top, Side::Left, Side::Right][case % 4];
        let schedule = TargetSchedule::fixed(vec![ExitSegment { side, center: rng.gen_range(0.3..0.7), width: 0.3 }]);
        let targets = CompiledTargets::compile(&schedule, g).unwrap();
        let phi = minimum_time_sweep(&m, &empty_crowd(g), &targets, &schedule, 0.0).unwrap();

        let og = OracleGrid::new(1.0, 1.0, n, n, horizon, nt).unwrap();
        let is_exit = targets.phases[0].is_target.clone();
        let exit_n = |i: usize, j: usize, _n: usize| is_exit[j * n + i];
        let exit = |i: usize, j: usize| is_exit[j * n + i];
        let vel = projected_unit_controls(&og, 16, &exit);
        let table = brute_force_value(&og, &Problem::MinimumTime { exit: &exit_n }, 16, &vel, phi.wall_value);
        for lvl in 0..=nt {
            for c in 0..g.cells() {
                let (i, j) = g.coords(c);
                let diff = (phi.slice(lvl)[c] - table[lvl][j][i]).abs();
                assert!(diff <= 1e-12, "case {case} level {lvl} ({i},{j}) diff {diff:e}");
            }
        }
    }
}

#[test]
fn minimum_time_approximates_eikonal_distance() {
    for (n, side, center) in [(20, Side::Bottom, 0.5), (25, Side::Top, 0.3), (25, Side::Right, 0.6)] {
        let horizon = 2.5;
        let nt = 2 * n * 3;
        let m = decoupled_model(n, n, horizon, nt, 32, 0.0);
        let g = &m.grid;
        let schedule = TargetSchedule::fixed(vec![ExitSegment { side, center, width: 0.2 }]);
        let targets = CompiledTargets::compile(&schedule, g).unwrap();
        let phi = minimum_time_sweep(&m, &empty_crowd(g), &targets, &schedule, 0.0).unwrap();

        let og = OracleGrid::new(1.0, 1.0, n, n, 1.0, 1).unwrap();
        let exit_cells: Vec<(usize, usize)> = targets.phases[0].segments[0].iter().map(|&c| g.coords(c)).collect();
        let is_exit = |i: usize, j: usize| exit_cells.contains(&(i, j));
        let wall = |i: usize, j: usize| (i == 0 || j == 0 || i == n - 1 || j == n - 1) && !is_exit(i, j);
        let dist = fast_sweep_distance(&og, &exit_cells, &wall);

        let mut worst: f64 = 0.0;
        for c in 0..g.cells() {
            let (i, j) = g.coords(c);
            if g.is_ring(i, j) {
                continue;
            }
            worst = worst.max((phi.slice(0)[c] - dist[j][i]).abs());
        }
        assert!(worst <= 2.0 * g.dx1, "n={n} side={side:?}: max error {worst} > 2 dx");
    }
}

#[test]
fn minimum_time_is_monotone_away_from_exit() {
    let m = decoupled_model(15, 15, 2.0, 60, 32, 0.0);
    let g = &m.grid;
    let schedule = TargetSchedule::fixed(vec![ExitSegment { side: Side::Bottom, center: 0.5, width: 0.2 }]);
    let targets = CompiledTargets::compile(&schedule, g).unwrap();
    let phi = minimum_time_sweep(&m, &empty_crowd(g), &targets, &schedule, 0.0).unwrap();
    for j in 1..13 {
        assert!(phi.slice(0)[g.index(7, j + 1)] > phi.slice(0)[g.index(7, j)]);
    }
}
