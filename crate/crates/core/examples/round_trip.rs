//! R(I) followed by its inverse I(R) returns to the starting relevance.
//!
//!     cargo run --release --example round_trip

use ib_abp::oracles::bernoulli_problem;
use ib_abp::{solve_ir, solve_ri, SolverConfig};

fn main() -> ib_abp::Result<()> {
    let problem = bernoulli_problem(0.15)?;
    let cfg = SolverConfig::new(2, 7);
    for target in [0.05, 0.10, 0.13, 0.20] {
        let forward = solve_ri(&problem, target, &cfg)?;
        let back = solve_ir(&problem, forward.value, &cfg)?;
        println!(
            "I = {target:.3} -> R = {:.6} -> I = {:.6} (error {:.1e}, rate used {:.6})",
            forward.value,
            back.value,
            (back.value - target).abs(),
            back.i_tx
        );
    }
    let saturated = solve_ir(&problem, problem.h_x(), &cfg)?;
    println!("R = H(X): I = {:.6}, I(X;Y) = {:.6}", saturated.value, problem.mutual_information());
    Ok(())
}
