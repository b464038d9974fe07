use std::fs;
use std::path::Path;
use std::process::Command;

use mfg_crowd::fields::total_mass;
use mfg_crowd::scenarios::builtin_scenario;
use mfg_crowd::{ConvergenceRecord, DensityField, Grid, Verdict};
use mfg_crowd_cli::{read_density_csv, write_convergence_log, write_density_csv, write_pgm};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mfg-crowd"))
}

fn small_config(dir: &Path, name: &str, n: usize, nt: usize) -> std::path::PathBuf {
    let s = builtin_scenario(name).unwrap().with_resolution(n, n, nt);
    let path = dir.join(format!("{name}.toml"));
    fs::write(&path, s.to_toml().unwrap()).unwrap();
    path
}

#[test]
fn density_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let g = Grid::new([1.0, 1.0], 3, 2, 1.0, 4).unwrap();
    let vals = vec![0.1, 1.0 / 3.0, 2.5e-17, 7.0, 0.0, std::f64::consts::PI];
    let d = DensityField::from_values(&g, vals.clone()).unwrap();
    let path = dir.path().join("f.csv");
    write_density_csv(&d, &g, 0.25, &path).unwrap();
    let back = read_density_csv(&path).unwrap();
    assert_eq!((back.n1, back.n2), (3, 2));
    assert_eq!(back.values, vals);
    assert_eq!(back.time, 0.25);
    assert_eq!(back.mass, total_mass(&d, &g));
}

#[test]
fn pgm_examples() {
    let dir = tempfile::tempdir().unwrap();
    let g = Grid::new([1.0, 1.0], 2, 1, 1.0, 1).unwrap();
    let path = dir.path().join("a.pgm");
    write_pgm(&DensityField::zeros(&g), &path, 1.0).unwrap();
    let bytes = fs::read(&path).unwrap();
    assert!(bytes.starts_with(b"P5\n2 1\n255\n"));
    assert_eq!(&bytes[bytes.len() - 2..], &[0, 0]);

    let d = DensityField::from_values(&g, vec![2.0, 4.0]).unwrap();
    write_pgm(&d, &path, 2.0).unwrap();
    let bytes = fs::read(&path).unwrap();
    assert_eq!(&bytes[bytes.len() - 2..], &[255, 255]);
    assert!(write_pgm(&d, &path, 0.0).is_err());
}

#[test]
fn convergence_log_layout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.csv");
    write_convergence_log(&[], &path).unwrap();
    assert_eq!(fs::read_to_string(&path).unwrap(), "outer_step,k,E_k,verdict\n");

    let rec = ConvergenceRecord { outer_step: 3, iterates: vec![0.5, 0.0], verdict: Verdict::Converged };
    write_convergence_log(&[rec], &path).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows, ["3,1,5e-1,converged", "3,2,0e0,converged"]);
}

#[test]
fn decoupled_run_converges_in_two_iterations() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = builtin_scenario("test2").unwrap().with_resolution(12, 12, 30).with_theta(0.5);
    s.model.c_rep = 0.0;
    let cfg = dir.path().join("decoupled.toml");
    fs::write(&cfg, s.to_toml().unwrap()).unwrap();
    let out = dir.path().join("out");
    let status = bin().arg("--config").arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert!(status.success());
    let log = fs::read_to_string(out.join("convergence.csv")).unwrap();
    for step in 0..30 {
        let rows: Vec<&str> = log.lines().filter(|l| l.starts_with(&format!("{step},"))).collect();
        assert_eq!(rows.len(), 2, "step {step}: {rows:?}");
        assert_eq!(rows[1], format!("{step},2,0e0,converged"));
    }
}

#[test]
fn frames_manifest_and_mass_balance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "test4", 14, 40);
    let out = dir.path().join("run");
    let status = bin()
        .args(["--theta", "0.15", "--frames", "0.0,0.3,1.5", "--every", "10", "--seed", "9"])
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());

    let manifest: toml::Table = fs::read_to_string(out.join("manifest.toml")).unwrap().parse().unwrap();
    let run = manifest["run"].as_table().unwrap();
    assert_eq!(run["status"].as_str(), Some("complete"));
    assert_eq!(run["theta"].as_float(), Some(0.15));
    let files: Vec<&str> = run["files"].as_array().unwrap().iter().map(|f| f.as_str().unwrap()).collect();
    for f in &files {
        assert!(out.join(f).exists(), "listed file {f} missing");
    }
    for n in [0, 8, 10, 20, 30, 40] {
        assert!(files.contains(&format!("frame_{n:06}.csv").as_str()), "frame {n} not listed");
    }

    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    let evacuated: Vec<f64> = metrics.lines().skip(1).map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    let initial = read_density_csv(&out.join("frame_000000.csv")).unwrap().mass;
    for f in files.iter().filter(|f| f.ends_with(".csv") && f.starts_with("frame_")) {
        let n: usize = f[6..12].parse().unwrap();
        let frame = read_density_csv(&out.join(f)).unwrap();
        let balance = frame.mass + evacuated[n];
        assert!((balance - initial).abs() <= 1e-8 * initial, "level {n}: {balance} vs {initial}");
    }
}

#[test]
fn identical_runs_give_identical_frames() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "test2", 12, 30);
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        let ok = bin()
            .args(["--theta", "0.25", "--every", "5"])
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap()
            .success();
        assert!(ok);
        out
    };
    let (a, b) = (run("a"), run("b"));
    for n in (0..=30).step_by(5) {
        let name = format!("frame_{n:06}.csv");
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name}");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| bin().args(args).current_dir(dir.path()).status().unwrap().code();
    assert_eq!(code(&["--no-such-flag"]), Some(2));
    assert_eq!(code(&[]), Some(2));
    assert_eq!(code(&["--scenario", "test9"]), Some(3));
    assert_eq!(code(&["--scenario", "test2", "--theta=-1"]), Some(3));
    assert_eq!(code(&["--config", "missing.toml"]), Some(6));

    let mut s = builtin_scenario("test2").unwrap().with_resolution(20, 20, 10);
    s.model.c_rep = 0.0;
    let cfg = dir.path().join("fast.toml");
    fs::write(&cfg, s.to_toml().unwrap()).unwrap();
    // a config that can never satisfy CFL is rejected while parsing
    assert_eq!(code(&["--config", cfg.to_str().unwrap()]), Some(3));
    let cfl = mfg_crowd::Error::Cfl { displacement: 2.0, cell: 1.0 };
    assert_eq!(mfg_crowd_cli::CliError::from(cfl).exit_code(), 4);

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[grid]\nn1 = \"ten\"\n").unwrap();
    assert_eq!(code(&["--config", bad.to_str().unwrap()]), Some(3));
}
