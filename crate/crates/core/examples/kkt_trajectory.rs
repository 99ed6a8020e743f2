//! Residual decay over a fixed iteration budget, written as CSV and SVG.
//!
//!     cargo run --release --example kkt_trajectory -- [out_dir]

use std::fs::File;
use std::path::PathBuf;

use ib_abp::diagnostics::write_trajectory_csv;
use ib_abp::oracles::bernoulli_problem;
use ib_abp::{plot, solve_ri, SolverConfig, StopRule};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    let problem = bernoulli_problem(0.15)?;
    let mut runs = Vec::new();
    for seed in 1..=5 {
        let cfg = SolverConfig {
            stop_rule: StopRule::ResidualOnly,
            max_iter: 3000,
            ..SolverConfig::new(2, seed)
        };
        let report = solve_ri(&problem, 0.062566, &cfg)?;
        println!("seed {seed}: {} cycles, final residual {:.2e}", report.iterations, report.final_residual);
        write_trajectory_csv(&report, File::create(dir.join(format!("trajectory_seed{seed}.csv")))?)?;
        runs.push((format!("seed {seed}"), report.residual_trajectory));
    }
    std::fs::write(dir.join("residuals.svg"), plot::residual_trajectories(&runs))?;
    println!("wrote trajectories and residuals.svg to {}", dir.display());
    Ok(())
}
