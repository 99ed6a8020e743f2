//! Convergence instrumentation: the exact per-cycle descent decomposition,
//! its Pinsker lower bound, constraint-recovery errors and the KKT residual.

use std::io::Write;

use ndarray::{Array2, Axis};
use serde::Serialize;

use crate::error::{IbError, Result};
use crate::kernel::{metric_array, Dual, LambdaStatus, DEFAULT_LOG_FLOOR};
use crate::prob::{kl_view, l1_distance, marginal_array, posterior_array, rate_array, CondMatrix, IbProblem};
use crate::solver::{objective_ri, SolveReport, SolverState, StepObserver, StepRecord};

/// Split of one cycle's objective decrease into its three divergence terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DescentBreakdown {
    /// f⁽ⁿ⁻¹⁾ − f⁽ⁿ⁾
    pub lhs: f64,
    /// λ⁽ⁿ⁾ Σ_j r_j⁽ⁿ⁻¹⁾ D(z_j⁽ⁿ⁻¹⁾ ‖ z_j⁽ⁿ⁻²⁾)
    pub term_z: f64,
    /// D(r⁽ⁿ⁾ ‖ r⁽ⁿ⁻¹⁾)
    pub term_r: f64,
    /// Σ_i p_i D(w_i⁽ⁿ⁻¹⁾ ‖ w_i⁽ⁿ⁾)
    pub term_w: f64,
    /// |lhs − (term_z + term_r + term_w)|
    pub gap: f64,
    /// λ⁽ⁿ⁾ (A⁽ⁿ⁻¹⁾ − A⁽ⁿ⁾) with A⁽ⁿ⁾ = Σ p_i w_ji⁽ⁿ⁾ d_ij⁽ⁿ⁻¹⁾. Zero whenever the
    /// relevance constraint was met with equality in both cycles; otherwise
    /// lhs = term_z + term_r + term_w − constraint_shift.
    pub constraint_shift: f64,
}

impl DescentBreakdown {
    /// Residual of the decomposition once the constraint shift is accounted for.
    pub fn corrected_gap(&self) -> f64 {
        (self.lhs - (self.term_z + self.term_r + self.term_w - self.constraint_shift)).abs()
    }
}

fn weighted_column_kl(
    a: &Array2<f64>,
    b: &Array2<f64>,
    weights: ndarray::ArrayView1<'_, f64>,
    what: &str,
) -> Result<f64> {
    let mut acc = 0.0;
    for (j, (ca, cb)) in a.axis_iter(Axis(1)).zip(b.axis_iter(Axis(1))).enumerate() {
        let wj = weights[j];
        if wj == 0.0 {
            continue;
        }
        let kl = kl_view(ca, cb);
        if !kl.is_finite() {
            return Err(IbError::UndefinedDivergence(format!("{what}, column {j}")));
        }
        acc += wj * kl;
    }
    Ok(acc)
}

/// Σ_i p_i Σ_j w_ji d_ij
fn expected_metric(w: &Array2<f64>, d: &Array2<f64>, p: &ndarray::Array1<f64>) -> f64 {
    let mut acc = 0.0;
    for (i, drow) in d.outer_iter().enumerate() {
        let col = w.column(i);
        acc += p[i] * col.iter().zip(drow.iter()).map(|(a, b)| a * b).sum::<f64>();
    }
    acc
}

/// Exact descent decomposition for consecutive relevance-constrained cycles
/// `prev` (n−1) and `curr` (n), with `prev2_z` the posterior of cycle n−2.
pub fn descent_identity(
    prev2_z: &CondMatrix,
    prev: &SolverState,
    curr: &SolverState,
    problem: &IbProblem,
) -> Result<DescentBreakdown> {
    let p = problem.p().values();
    let lambda = curr.lambda;
    let lhs = objective_ri(&prev.w, &prev.r, problem) - objective_ri(&curr.w, &curr.r, problem);

    let term_z = lambda
        * weighted_column_kl(prev.z.entries(), prev2_z.entries(), prev.r.view(), "posterior")?;
    let term_r = kl_view(curr.r.view(), prev.r.view());
    if !term_r.is_finite() {
        return Err(IbError::UndefinedDivergence("bottleneck marginal".into()));
    }
    let term_w = weighted_column_kl(prev.w.entries(), curr.w.entries(), p.view(), "encoder")?;

    let d_prev2 = metric_array(prev2_z.entries(), problem.s().entries(), DEFAULT_LOG_FLOOR);
    let a_curr = expected_metric(curr.w.entries(), prev.d.entries(), p);
    let a_prev = expected_metric(prev.w.entries(), &d_prev2, p);
    let constraint_shift = lambda * (a_prev - a_curr);

    Ok(DescentBreakdown {
        lhs,
        term_z,
        term_r,
        term_w,
        gap: (lhs - (term_z + term_r + term_w)).abs(),
        constraint_shift,
    })
}

/// ½[λ Σ_j r_j ‖Δz_j‖₁² + ‖Δr‖₁² + Σ_i p_i ‖Δw_i‖₁²]: Pinsker's lower bound on
/// the decrease described by [`descent_identity`].
pub fn pinsker_bound(
    prev2_z: &CondMatrix,
    prev: &SolverState,
    curr: &SolverState,
    problem: &IbProblem,
) -> f64 {
    let sq = |x: f64| x * x;
    let z_term: f64 = prev
        .r
        .values()
        .iter()
        .enumerate()
        .map(|(j, &rj)| rj * sq(l1_distance(prev.z.column(j), prev2_z.column(j))))
        .sum();
    let r_term = sq(l1_distance(curr.r.view(), prev.r.view()));
    let w_term: f64 = problem
        .p()
        .values()
        .iter()
        .enumerate()
        .map(|(i, &pi)| pi * sq(l1_distance(prev.w.column(i), curr.w.column(i))))
        .sum();
    0.5 * (curr.lambda * z_term + r_term + w_term)
}

/// L1 errors of the recovered constraints at a cycle end:
/// (‖r − marginal(w,p)‖₁, Σ_j ‖z_j − posterior_j(w,p,s)‖₁).
pub fn constraint_recovery(state: &SolverState, problem: &IbProblem) -> (f64, f64) {
    let p = problem.p().values();
    let w = state.w.entries();
    let r = marginal_array(w, p);
    let z = posterior_array(w, p, problem.s().entries(), problem.q().view());
    let r_err = l1_distance(state.r.view(), r.view());
    let z_err = state
        .z
        .entries()
        .iter()
        .zip(z.iter())
        .map(|(a, b)| (a - b).abs())
        .sum();
    (r_err, z_err)
}

/// Σ_i p_i ‖w_i − bregman_i(λ, d, r)‖₁
fn stationarity_gap(state: &SolverState, problem: &IbProblem) -> f64 {
    let p = problem.p().values();
    let dual = Dual::new(state.d.entries(), state.r.view(), p);
    let mut projected = Array2::zeros(state.w.entries().dim());
    dual.project(state.lambda, &mut projected);
    (0..p.len())
        .map(|i| p[i] * l1_distance(state.w.column(i), projected.column(i)))
        .sum()
}

fn complementary(lambda: f64, violation: f64) -> f64 {
    // violation > 0 means the constraint is broken; with λ > 0 it must be tight
    if lambda > 0.0 {
        violation.abs()
    } else {
        violation.max(0.0)
    }
}

/// KKT residual of the relevance-constrained semi-relaxed model.
///
/// Sum of the L1 errors of the two recovered constraints, the fixed-point gap
/// of the encoder update, the complementary-slackness error of the relevance
/// constraint and the multiplier sign violation. Zero exactly at a KKT point.
pub fn kkt_residual(state: &SolverState, problem: &IbProblem, i_hat: f64) -> f64 {
    let (r_err, z_err) = constraint_recovery(state, problem);
    let w_err = stationarity_gap(state, problem);
    // Σ p w s ln z = −Σ p w d
    let relevance = -expected_metric(state.w.entries(), state.d.entries(), problem.p().values());
    let slack = complementary(state.lambda, i_hat - relevance);
    r_err + z_err + w_err + slack + (-state.lambda).max(0.0)
}

/// KKT residual of the rate-constrained model; same structure with the rate
/// constraint Σ p w ln(w/r) ≤ R.
pub fn kkt_residual_ir(state: &SolverState, problem: &IbProblem, rate: f64) -> f64 {
    let (r_err, z_err) = constraint_recovery(state, problem);
    let w_err = stationarity_gap(state, problem);
    let spent = rate_array(state.w.entries(), state.r.view(), problem.p().values());
    let slack = complementary(state.lambda, spent - rate);
    r_err + z_err + w_err + slack + (-state.lambda).max(0.0)
}

/// Per-cycle diagnostics collected by [`DiagnosticsRecorder`].
#[derive(Clone, Debug, Serialize)]
pub struct StepDiagnostics {
    pub iter: usize,
    pub objective: f64,
    pub residual: f64,
    pub lambda: f64,
    pub status: Option<LambdaStatus>,
    pub prev_status: Option<LambdaStatus>,
    /// `None` on the first cycle, which has no n−2 posterior.
    pub descent: Option<DescentBreakdown>,
    pub pinsker: Option<f64>,
    pub r_recovery: f64,
    pub z_recovery: f64,
}

impl StepDiagnostics {
    /// Whether the descent identity holds without the constraint shift:
    /// a zero multiplier now, or exact roots in both cycles.
    pub fn identity_is_exact(&self) -> bool {
        self.lambda == 0.0
            || (self.status == Some(LambdaStatus::Root) && self.prev_status == Some(LambdaStatus::Root))
    }
}

/// Observer that records descent, Pinsker and recovery diagnostics for a
/// relevance-constrained run.
pub struct DiagnosticsRecorder<'a> {
    problem: &'a IbProblem,
    prev2_z: Option<CondMatrix>,
    pub steps: Vec<StepDiagnostics>,
    pub errors: Vec<String>,
}

impl<'a> DiagnosticsRecorder<'a> {
    pub fn new(problem: &'a IbProblem) -> Self {
        DiagnosticsRecorder {
            problem,
            prev2_z: None,
            steps: Vec::new(),
            errors: Vec::new(),
        }
    }
}

impl StepObserver for DiagnosticsRecorder<'_> {
    fn observe(&mut self, rec: &StepRecord<'_>) {
        let (descent, pinsker) = match &self.prev2_z {
            Some(z2) => match descent_identity(z2, rec.prev, rec.curr, self.problem) {
                Ok(b) => (Some(b), Some(pinsker_bound(z2, rec.prev, rec.curr, self.problem))),
                Err(e) => {
                    self.errors.push(format!("cycle {}: {e}", rec.iter));
                    (None, None)
                }
            },
            None => (None, None),
        };
        let (r_recovery, z_recovery) = constraint_recovery(rec.curr, self.problem);
        self.steps.push(StepDiagnostics {
            iter: rec.iter,
            objective: rec.objective,
            residual: rec.residual,
            lambda: rec.curr.lambda,
            status: rec.curr.lambda_status,
            prev_status: rec.prev.lambda_status,
            descent,
            pinsker,
            r_recovery,
            z_recovery,
        });
        self.prev2_z = Some(rec.prev.z.clone());
    }
}

/// Writes `iteration,objective,residual,lambda` rows for plotting.
pub fn write_trajectory_csv<W: Write>(report: &SolveReport, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let to_err = |e: csv::Error| IbError::Parse {
        context: "trajectory csv".into(),
        message: e.to_string(),
    };
    wtr.write_record(["iteration", "objective", "residual", "lambda"])
        .map_err(to_err)?;
    for (n, ((f, res), lam)) in report
        .objective_trajectory
        .iter()
        .zip(&report.residual_trajectory)
        .zip(&report.lambda_trajectory)
        .enumerate()
    {
        wtr.write_record([
            (n + 1).to_string(),
            format!("{f:.17e}"),
            format!("{res:.17e}"),
            format!("{lam:.17e}"),
        ])
        .map_err(to_err)?;
    }
    wtr.flush().map_err(|e| IbError::io("trajectory csv", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::bernoulli_problem;
    use crate::prob::ProbVector;
    use crate::solver::{abp_step_ri, hat_i, init_state, SolverConfig, StopRule};
    use approx::assert_abs_diff_eq;

    fn run_states(problem: &IbProblem, target: f64, seed: u64, cycles: usize) -> Vec<SolverState> {
        let cfg = SolverConfig::new(problem.m(), seed);
        let i_hat = hat_i(target, problem.q());
        let mut states = vec![init_state(problem, &cfg).unwrap()];
        for _ in 0..cycles {
            let next = abp_step_ri(states.last().unwrap(), problem, i_hat, &cfg).unwrap();
            states.push(next);
        }
        states
    }

    #[test]
    fn identity_at_fixed_point_is_zero() {
        let problem = bernoulli_problem(0.15).unwrap();
        let states = run_states(&problem, 0.130812, 11, 600);
        let s = states.last().unwrap();
        let b = descent_identity(&s.z, s, s, &problem).unwrap();
        assert_eq!(b.lhs, 0.0);
        assert_eq!(b.term_z + b.term_r + b.term_w, 0.0);
        assert_eq!(pinsker_bound(&s.z, s, s, &problem), 0.0);
        assert!(kkt_residual(s, &problem, hat_i(0.130812, problem.q())) < 1e-9);
    }

    #[test]
    fn identity_on_bernoulli_second_cycle() {
        let problem = bernoulli_problem(0.15).unwrap();
        let states = run_states(&problem, 0.130812, 42, 60);
        for n in 2..states.len() {
            let b = descent_identity(&states[n - 2].z, &states[n - 1], &states[n], &problem).unwrap();
            if states[n].lambda_status == Some(LambdaStatus::Root)
                && states[n - 1].lambda_status == Some(LambdaStatus::Root)
            {
                assert!(b.gap <= 1e-10, "cycle {n}: {b:?}");
            }
            assert!(b.corrected_gap() <= 1e-10, "cycle {n}: {b:?}");
            let bound = pinsker_bound(&states[n - 2].z, &states[n - 1], &states[n], &problem);
            assert!(b.term_z + b.term_r + b.term_w >= bound - 1e-12);
        }
    }

    #[test]
    fn identity_on_random_three_by_three() {
        let p = ProbVector::new(vec![0.2, 0.5, 0.3]).unwrap();
        let s = CondMatrix::from_columns(&[vec![0.9, 0.1], vec![0.35, 0.65], vec![0.05, 0.95]]).unwrap();
        let problem = IbProblem::new(p, s).unwrap();
        let target = 0.6 * problem.mutual_information();
        let states = run_states(&problem, target, 5, 50);
        for n in 2..=50 {
            let b = descent_identity(&states[n - 2].z, &states[n - 1], &states[n], &problem).unwrap();
            assert!(b.corrected_gap() <= 1e-10, "cycle {n}: {b:?}");
            if states[n].lambda_status == Some(LambdaStatus::Root)
                && states[n - 1].lambda_status == Some(LambdaStatus::Root)
            {
                assert!(b.gap <= 1e-10);
            }
        }
    }

    #[test]
    fn pinsker_bound_on_marginal_only_change() {
        let problem = bernoulli_problem(0.15).unwrap();
        let base = init_state(&problem, &SolverConfig::new(2, 1)).unwrap();
        let mut moved = base.clone();
        moved.r = ProbVector::new(vec![base.r.values()[0] + 0.1, base.r.values()[1] - 0.1]).unwrap();
        let bound = pinsker_bound(&base.z, &base, &moved, &problem);
        assert_abs_diff_eq!(bound, 0.02, epsilon = 1e-12);
    }

    #[test]
    fn residual_detects_perturbation() {
        let problem = bernoulli_problem(0.15).unwrap();
        let target = 0.130812;
        let i_hat = hat_i(target, problem.q());
        let states = run_states(&problem, target, 3, 1500);
        let last = states.last().unwrap();
        assert!(kkt_residual(last, &problem, i_hat) < 1e-9);

        let mut w = last.w.entries().clone();
        w[[0, 0]] += 1e-3;
        w[[1, 0]] -= 1e-3;
        let mut perturbed = last.clone();
        perturbed.w = CondMatrix::new(w).unwrap();
        assert!(kkt_residual(&perturbed, &problem, i_hat) > 1e-4);
    }

    #[test]
    fn recorder_collects_every_cycle() {
        let problem = bernoulli_problem(0.15).unwrap();
        let mut rec = DiagnosticsRecorder::new(&problem);
        let mut cfg = SolverConfig::new(2, 9);
        cfg.stop_rule = StopRule::ResidualOnly;
        cfg.max_iter = 30;
        let report = crate::solver::solve_ri_observed(&problem, 0.1, &cfg, &mut rec).unwrap();
        assert_eq!(rec.steps.len(), report.iterations);
        assert!(rec.steps[0].descent.is_none());
        assert!(rec.steps[1..].iter().all(|s| s.descent.is_some()));
        assert!(rec.errors.is_empty());

        let mut buf = Vec::new();
        write_trajectory_csv(&report, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iteration,objective,residual,lambda\n"));
        assert_eq!(text.lines().count(), report.iterations + 1);
    }
}
