//! R(I) on the doubly symmetric binary source against its closed form.
//!
//! The encoder T = X ⊕ Bern(u) traces the curve, and the multiplier the
//! solver settles on is the slope dR/dI at that point.
//!
//!     cargo run --release --example bernoulli_curve

use ib_abp::oracles::{bernoulli_curve, bernoulli_problem};
use ib_abp::{solve_ri, SolverConfig};

fn main() -> ib_abp::Result<()> {
    let e = 0.15;
    let problem = bernoulli_problem(e)?;
    println!("I(X;Y) = {:.6} nats", problem.mutual_information());
    println!("{:>6} {:>10} {:>10} {:>10} {:>10} {:>8} {:>6}", "u", "I", "R exact", "R solver", "|err|", "lambda", "iters");
    for u in [0.1, 0.15, 0.2, 0.25, 0.35] {
        let (i, r) = bernoulli_curve(u, e)?;
        let report = solve_ri(&problem, i, &SolverConfig::new(2, 42))?;
        println!(
            "{u:>6} {i:>10.6} {r:>10.6} {:>10.6} {:>10.2e} {:>8.4} {:>6}",
            report.value,
            (report.value - r).abs(),
            report.lambda,
            report.iterations
        );
    }
    Ok(())
}
