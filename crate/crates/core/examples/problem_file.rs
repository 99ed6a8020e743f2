//! Build a problem from an explicit channel, save it as JSON, reload it
//! and solve both directions.
//!
//!     cargo run --release --example problem_file

use ib_abp::ingest::{load_problem, save_problem};
use ib_abp::{solve_ir, solve_ri, CondMatrix, IbProblem, ProbVector, SolverConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // three inputs, two outputs; the middle input is pure noise
    let p = ProbVector::new(vec![0.3, 0.4, 0.3])?;
    let s = CondMatrix::from_columns(&[vec![0.9, 0.1], vec![0.5, 0.5], vec![0.1, 0.9]])?;
    let problem = IbProblem::new(p, s)?;

    let path = std::env::temp_dir().join("ib_abp_problem.json");
    save_problem(&problem, &path)?;
    let loaded = load_problem(&path)?;
    assert_eq!(loaded, problem);
    println!("saved and reloaded {}", path.display());

    let cfg = SolverConfig::new(3, 11);
    let target = 0.5 * loaded.mutual_information();
    let ri = solve_ri(&loaded, target, &cfg)?;
    let ir = solve_ir(&loaded, ri.value, &cfg)?;
    println!("R({target:.6}) = {:.6}, I({:.6}) = {:.6}", ri.value, ri.value, ir.value);
    println!("{}", ri.to_json(Some(3)));
    Ok(())
}
