//! ABP against Blahut–Arimoto with a bisection search on its fixed
//! multiplier, on the same relevance targets.
//!
//!     cargo run --release --example ba_comparison

use std::time::Instant;

use ib_abp::ba::DEFAULT_CURVE_TOL;
use ib_abp::oracles::bernoulli_problem;
use ib_abp::{ba_adaptive, solve_ri, SolverConfig};

fn main() -> ib_abp::Result<()> {
    let problem = bernoulli_problem(0.15)?;
    let cfg = SolverConfig::new(2, 42);
    println!("{:>8} | {:>9} {:>6} {:>8} | {:>9} {:>6} {:>6} {:>8}", "I", "ABP R", "iters", "ms", "BA R", "trials", "iters", "ms");
    for target in [0.062566, 0.090995, 0.125385, 0.166239] {
        let abp = solve_ri(&problem, target, &cfg)?;
        let started = Instant::now();
        let ba = ba_adaptive(&problem, target, DEFAULT_CURVE_TOL, &cfg)?;
        let ba_ms = started.elapsed().as_secs_f64() * 1e3;
        println!(
            "{target:>8} | {:>9.6} {:>6} {:>8.3} | {:>9.6} {:>6} {:>6} {:>8.3}",
            abp.value, abp.iterations, abp.wall_time_ms, ba.point.i_tx, ba.trials, ba.inner_iterations, ba_ms
        );
    }
    Ok(())
}
