//! Per-cycle split of the objective decrease into posterior, marginal and
//! encoder divergences, with the Pinsker lower bound.
//!
//!     cargo run --release --example descent_diagnostics

use ib_abp::oracles::gaussian_problem;
use ib_abp::{solve_ri_observed, DiagnosticsRecorder, SolverConfig};

fn main() -> ib_abp::Result<()> {
    let problem = gaussian_problem(1.0, 6.0, 40, 40)?;
    let mut recorder = DiagnosticsRecorder::new(&problem);
    let report = solve_ri_observed(&problem, 0.1, &SolverConfig::new(40, 3), &mut recorder)?;
    println!("R = {:.6} after {} cycles", report.value, report.iterations);
    println!("{:>4} {:>11} {:>11} {:>11} {:>11} {:>9} {:>11}", "n", "decrease", "z term", "r term", "w term", "gap", "pinsker");
    for step in recorder.steps.iter().take(15) {
        if let (Some(b), Some(bound)) = (step.descent, step.pinsker) {
            println!(
                "{:>4} {:>11.4e} {:>11.4e} {:>11.4e} {:>11.4e} {:>9.1e} {:>11.4e}",
                step.iter, b.lhs, b.term_z, b.term_r, b.term_w, b.gap, bound
            );
        }
    }
    for e in &recorder.errors {
        println!("skipped: {e}");
    }
    Ok(())
}
