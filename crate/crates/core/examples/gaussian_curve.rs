//! R(I) of a discretized jointly Gaussian pair (SNR 1, 100-point grids on
//! [−10, 10], |T| = 100) against −½ ln(2e^{−2I} − 1).
//!
//!     cargo run --release --example gaussian_curve

use ib_abp::oracles::{gaussian_curve, gaussian_problem};
use ib_abp::{solve_ri, SolverConfig};

fn main() -> ib_abp::Result<()> {
    let problem = gaussian_problem(1.0, 10.0, 100, 100)?;
    println!("discrete I(X;Y) = {:.6}, continuous ½ln 2 = {:.6}", problem.mutual_information(), 0.5 * 2f64.ln());
    for target in [0.04, 0.08, 0.12, 0.16, 0.20] {
        let report = solve_ri(&problem, target, &SolverConfig::new(100, 42))?;
        let exact = gaussian_curve(target, 1.0)?;
        println!(
            "I = {target:.2}  R = {:.6}  analytic {exact:.6}  diff {:+.1e}  lambda {:.4}  {} cycles, {:.0} ms",
            report.value,
            report.value - exact,
            report.lambda,
            report.iterations,
            report.wall_time_ms
        );
    }
    Ok(())
}
