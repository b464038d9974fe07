//! Command-line driver for `mfg-crowd`: runs a scenario and writes density
//! frames, grayscale images, convergence logs and summary metrics.

pub mod app;
pub mod output;

pub use app::{load_scenario, run, Cli, CliError, RunOutput};
pub use output::{read_density_csv, write_convergence_log, write_density_csv, write_pgm, DensityFrame};
