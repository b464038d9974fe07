use std::process::ExitCode;

use clap::Parser;
use mfg_crowd_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(out) => {
            let r = &out.result;
            let converged = r.convergence.iter().filter(|c| c.verdict == mfg_crowd::Verdict::Converged).count();
            println!(
                "{} steps, {converged} converged; outputs in {}",
                r.convergence.len(),
                cli.out.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
