//! Bin the Iris measurements in unit cells, then sweep R(I) across the
//! feasible range of the resulting empirical problem.
//!
//!     cargo run --release --example iris_sweep -- [path/to/iris.csv]

use ib_abp::ingest::{bin_samples, SampleTable};
use ib_abp::{solve_ri, SolverConfig};

fn main() -> ib_abp::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/iris.csv").to_string());
    let table = SampleTable::read_csv(&path)?;
    let binned = bin_samples(&table, 1.0)?;
    let problem = &binned.problem;
    println!(
        "{} samples, features {:?}, labels {:?}",
        table.len(),
        table.feature_names(),
        binned.labels
    );
    println!("{} occupied cells, I(X;Y) = {:.6}, H(Y) = {:.6}", problem.m(), problem.mutual_information(), problem.h_y());

    let cap = problem.mutual_information();
    for step in 1..=10 {
        let target = cap * step as f64 / 11.0;
        let report = solve_ri(problem, target, &SolverConfig::new(problem.m(), 42))?;
        println!(
            "I = {target:.4}  R = {:.6}  lambda = {:8.4}  converged = {}  ({} cycles)",
            report.value, report.lambda, report.converged, report.iterations
        );
    }
    Ok(())
}
