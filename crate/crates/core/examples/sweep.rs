//! Runs a built-in scenario for several prediction horizons and prints the
//! summary diagnostics used in the reference comparisons.
//!
//! ```text
//! cargo run --release -p mfg-crowd --example sweep -- test4 30 100 0,0.15,0.75 [fp]
//! ```

use std::time::Instant;

use mfg_crowd::metrics::{direction_turn_time, downward_fraction, evacuation_time, lower_part_vertical_velocity};
use mfg_crowd::scenarios::builtin_scenario;
use mfg_crowd::Verdict;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.len() < 4 {
        eprintln!("usage: sweep NAME N NT THETAS [fp|plain] [mass=X] [iters=N] [group=I:X:Y:M] [dump]");
        std::process::exit(2);
    }
    let mut base = builtin_scenario(&args[0]).expect("scenario");
    let n: usize = args[1].parse().expect("N");
    let nt: usize = args[2].parse().expect("NT");
    base = base.with_resolution(n, n, nt);
    let mut dump = false;
    for extra in &args[4..] {
        match extra.split_once('=') {
            Some(("mass", v)) => {
                let scale = v.parse::<f64>().unwrap() / base.initial_mass();
                base.rho0.groups.iter_mut().for_each(|g| g.mass *= scale);
            }
            Some(("group", v)) => {
                let f: Vec<f64> = v.split(':').map(|x| x.parse().unwrap()).collect();
                let grp = &mut base.rho0.groups[f[0] as usize];
                let side = grp.region.x[1] - grp.region.x[0];
                grp.region = mfg_crowd::fields::Rect::square([f[1], f[2]], side);
                grp.mass = f[3];
            }
            Some(("iters", v)) => base.solver.max_iters = v.parse().unwrap(),
            Some(("tol", v)) => base.solver.tol = Some(v.parse().unwrap()),
            Some(("warm", v)) => base.solver.warm_start = v == "1",
            None if extra == "dump" => dump = true,
            None if extra == "fp" => base.solver.fictitious_play = true,
            None if extra == "plain" => base.solver.fictitious_play = false,
            _ => panic!("unknown option {extra}"),
        }
    }
    for theta in args[3].split(',').map(|t| t.parse::<f64>().unwrap()) {
        let scenario = base.with_theta(theta);
        let sim = scenario.build().expect("build");
        let start = Instant::now();
        let res = match sim.run() {
            Ok(r) => r,
            Err(e) => {
                println!("theta={theta:.3} error: {e}");
                continue;
            }
        };
        let g = sim.grid();
        let steps = res.convergence.len();
        let conv = res.convergence.iter().filter(|r| r.verdict == Verdict::Converged).count();
        let stab = res.convergence.iter().filter(|r| r.verdict == Verdict::Stabilized).count();
        let iters: usize = res.convergence.iter().map(|r| r.iterates.len()).sum();
        let worst = res
            .convergence
            .iter()
            .map(|r| *r.iterates.last().unwrap())
            .fold(0.0, f64::max);
        let first_bad = res.convergence.iter().position(|r| r.verdict != Verdict::Converged);
        print!(
            "theta={theta:.3} conv={conv}/{steps} stab={stab} iters={iters} worstE={worst:.2e} first_bad={first_bad:?} time={:.1}s",
            start.elapsed().as_secs_f64()
        );
        if let (true, Some(b)) = (dump, first_bad) {
            let e: Vec<String> = res.convergence[b].iterates.iter().map(|e| format!("{e:.3e}")).collect();
            println!("\n  step {b}: {}", e.join(" "));
        }
        let mass = scenario.initial_mass();
        if scenario.target.is_some() {
            let t99 = evacuation_time(&res.evacuated, mass, 0.99, g);
            let exits: Vec<String> = res.exits.iter().map(|e| format!("{:.3}", e.mass / mass)).collect();
            print!(" t99={t99:?} exits=[{}] evac_end={:.4}", exits.join(","), res.evacuated.last().unwrap() / mass);
            let vy = lower_part_vertical_velocity(&res.density, g, 0.5);
            let first_down = vy.iter().position(|v| matches!(v, Some(v) if *v < 0.0)).map(|n| g.time(n));
            let down = downward_fraction(&res.density, &res.controls.slices, &sim.model.controls, g);
            let first_frac = down.iter().position(|&f| f > 0.0).map(|n| g.time(n));
            print!(" lower_vy_neg={first_down:?} down_frac_pos={first_frac:?}");
            if let Some(sched) = scenario.schedule() {
                if let (Some(f), Some(p)) = (sched.forecast, sched.phases.get(1)) {
                    let from = g.steps_in(p.start - f);
                    let after = vy.iter().skip(from).position(|v| matches!(v, Some(v) if *v < 0.0));
                    let frac = down.iter().skip(from).position(|&f| f > 0.0);
                    print!(" announce_step={from} vy_neg_after={after:?} frac_after={frac:?}");
                    let series: Vec<String> = down[from.saturating_sub(3)..(from + 12).min(down.len())].iter().map(|f| format!("{f:.3}")).collect();
                    print!("\n  down[{}..]: {}", from.saturating_sub(3), series.join(" "));
                }
            }
        } else {
            print!(" turn={:?}", direction_turn_time(&res.density, g));
        }
        println!();
    }
}
