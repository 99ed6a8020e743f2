//! Alternating Bregman projection loops for the relevance-compression
//! function R(I) and its inverse I(R).
//!
//! One cycle updates, in order, the multiplier (root of the dual function),
//! the encoder `w`, the bottleneck marginal `r`, the posterior `z` and the
//! metric `d`. The marginal and posterior updates restore exactly the Markov
//! chain and transition-probability constraints that the semi-relaxed model
//! drops, so every cycle ends on a feasible point of the original problem.

use std::time::Instant;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::diagnostics::{kkt_residual, kkt_residual_ir};
use crate::error::{IbError, Result};
use crate::kernel::{
    metric_array, solve_lambda_from, Dual, LambdaStatus, Metric, RootConfig, DEFAULT_LOG_FLOOR,
};
use crate::prob::{
    entropy_of, marginal_array, posterior_array, rate_array, CondMatrix, IbProblem, ProbVector,
};

/// Slack allowed on the target before a converged run is flagged.
pub const TARGET_VIOLATION_TOL: f64 = 1e-4;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopRule {
    /// Stop on a small objective change or a small KKT residual, whichever comes first.
    #[default]
    Either,
    /// Ignore the objective change; run until the residual tolerance or `max_iter`.
    ResidualOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// |T|
    pub cardinality_n: usize,
    pub max_iter: usize,
    pub objective_tol: f64,
    pub residual_tol: f64,
    pub stop_rule: StopRule,
    pub rng_seed: u64,
    pub root: RootConfig,
    pub log_floor: f64,
}

impl SolverConfig {
    pub fn new(cardinality_n: usize, rng_seed: u64) -> Self {
        SolverConfig {
            cardinality_n,
            max_iter: 3000,
            objective_tol: 1e-6,
            residual_tol: 1e-12,
            stop_rule: StopRule::Either,
            rng_seed,
            root: RootConfig::default(),
            log_floor: DEFAULT_LOG_FLOOR,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cardinality_n == 0 || self.max_iter == 0 {
            return Err(IbError::Domain("cardinality and max_iter must be at least 1".into()));
        }
        if !(self.objective_tol > 0.0 && self.residual_tol > 0.0 && self.log_floor > 0.0) {
            return Err(IbError::Domain("tolerances and log floor must be positive".into()));
        }
        self.root.validate()
    }
}

/// One iterate of the alternating scheme.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverState {
    pub w: CondMatrix,
    pub r: ProbVector,
    pub z: CondMatrix,
    pub d: Metric,
    pub lambda: f64,
    /// How the multiplier of this cycle was obtained; `None` for the initial state.
    pub lambda_status: Option<LambdaStatus>,
    pub iter: usize,
}

impl SolverState {
    /// Completes a state from an encoder: r, z and d are derived from `w`.
    pub fn from_encoder(w: CondMatrix, problem: &IbProblem, lambda: f64, log_floor: f64) -> Result<Self> {
        if w.cols() != problem.m() {
            return Err(IbError::ShapeMismatch(format!(
                "encoder has {} input columns, problem has {}",
                w.cols(),
                problem.m()
            )));
        }
        Ok(Self::complete(w.entries().clone(), problem, lambda, None, 0, log_floor))
    }

    fn complete(
        w: Array2<f64>,
        problem: &IbProblem,
        lambda: f64,
        lambda_status: Option<LambdaStatus>,
        iter: usize,
        log_floor: f64,
    ) -> Self {
        let p = problem.p().values();
        let s = problem.s().entries();
        let r = marginal_array(&w, p);
        let z = posterior_array(&w, p, s, problem.q().view());
        let d = metric_array(&z, s, log_floor);
        SolverState {
            w: CondMatrix::from_array(w),
            r: ProbVector::from_array(r),
            z: CondMatrix::from_array(z),
            d: Metric::new(d).expect("floored metric is finite"),
            lambda,
            lambda_status,
            iter,
        }
    }
}

/// Î = I − H(Y): the constraint reads −H(Y|T) ≥ Î.
pub fn hat_i(target_i: f64, q: &ProbVector) -> f64 {
    target_i - q.entropy()
}

/// Seeded initial state: encoder columns drawn from a symmetric Dirichlet(1),
/// the rest derived from it, λ = 1.
pub fn init_state(problem: &IbProblem, cfg: &SolverConfig) -> Result<SolverState> {
    cfg.validate()?;
    let n = cfg.cardinality_n;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut w = Array2::zeros((n, problem.m()));
    for mut col in w.columns_mut() {
        for v in col.iter_mut() {
            let e: f64 = Exp1.sample(&mut rng);
            *v = e;
        }
        let total: f64 = col.sum();
        col.mapv_inplace(|v| v / total);
    }
    Ok(SolverState::complete(w, problem, 1.0, None, 0, cfg.log_floor))
}

/// Which constraint fixes the multiplier in a cycle.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Constraint {
    /// −Σ p w d ≥ Î
    Relevance { i_hat: f64 },
    /// Σ p w ln(w/r) ≤ R
    Rate { rate: f64 },
}

pub(crate) fn step(
    state: &SolverState,
    problem: &IbProblem,
    constraint: Constraint,
    cfg: &SolverConfig,
) -> Result<SolverState> {
    let p = problem.p().values();
    let dual = Dual::new(state.d.entries(), state.r.view(), p);
    let sol = match constraint {
        Constraint::Relevance { i_hat } => {
            solve_lambda_from(|x| dual.ri(x, i_hat), &cfg.root, state.lambda)?
        }
        Constraint::Rate { rate } => solve_lambda_from(
            |x| {
                let (v, dv) = dual.ir(x, rate);
                (-v, -dv)
            },
            &cfg.root,
            state.lambda,
        )?,
    };
    Ok(frozen_step(state, problem, sol.lambda, Some(sol.status), cfg, &dual))
}

/// One cycle with the multiplier held at `lambda`.
pub(crate) fn fixed_step(
    state: &SolverState,
    problem: &IbProblem,
    lambda: f64,
    cfg: &SolverConfig,
) -> SolverState {
    let dual = Dual::new(state.d.entries(), state.r.view(), problem.p().values());
    frozen_step(state, problem, lambda, None, cfg, &dual)
}

fn frozen_step(
    state: &SolverState,
    problem: &IbProblem,
    lambda: f64,
    status: Option<LambdaStatus>,
    cfg: &SolverConfig,
    dual: &Dual<'_>,
) -> SolverState {
    let mut w = Array2::zeros(state.w.entries().dim());
    dual.project(lambda, &mut w);
    SolverState::complete(w, problem, lambda, status, state.iter + 1, cfg.log_floor)
}

/// A single relevance-constrained cycle.
pub fn abp_step_ri(
    state: &SolverState,
    problem: &IbProblem,
    i_hat: f64,
    cfg: &SolverConfig,
) -> Result<SolverState> {
    step(state, problem, Constraint::Relevance { i_hat }, cfg)
}

/// A single rate-constrained cycle.
pub fn abp_step_ir(
    state: &SolverState,
    problem: &IbProblem,
    target_r: f64,
    cfg: &SolverConfig,
) -> Result<SolverState> {
    step(state, problem, Constraint::Rate { rate: target_r }, cfg)
}

/// f(w, r) = Σ p_i w_ji (ln w_ji − ln r_j)
pub fn objective_ri(w: &CondMatrix, r: &ProbVector, problem: &IbProblem) -> f64 {
    rate_array(w.entries(), r.view(), problem.p().values())
}

/// f_IR(w, z) = −Σ p_i w_ji s_ki ln z_kj
pub fn objective_ir(w: &CondMatrix, z: &CondMatrix, problem: &IbProblem) -> f64 {
    let sp = problem.s().entries() * problem.p().values();
    let joint = sp.dot(&w.entries().t());
    let mut acc = 0.0;
    for (m, zz) in joint.iter().zip(z.entries().iter()) {
        if *m > 0.0 {
            acc -= m * zz.ln();
        }
    }
    acc
}

/// Σ_j r_j H(z_j): the conditional entropy H(Y|T) when z is the posterior.
pub(crate) fn conditional_entropy(r: &ProbVector, z: &CondMatrix) -> f64 {
    r.values()
        .iter()
        .enumerate()
        .map(|(j, &rj)| if rj > 0.0 { rj * entropy_of(z.column(j)) } else { 0.0 })
        .sum()
}

/// Summary of one run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// R(I): minimal I(T;X) given I(T;Y) ≥ I.
    #[serde(rename = "RI")]
    Ri,
    /// I(R): maximal I(T;Y) given I(T;X) ≤ R.
    #[serde(rename = "IR")]
    Ir,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveReport {
    pub mode: Mode,
    pub target: f64,
    /// R(target) for [`Mode::Ri`], I(target) for [`Mode::Ir`], in nats.
    pub value: f64,
    /// Final objective: f for R(I), f_IR for I(R).
    pub objective: f64,
    pub i_tx: f64,
    pub i_ty: f64,
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
    pub final_residual: f64,
    pub objective_trajectory: Vec<f64>,
    pub residual_trajectory: Vec<f64>,
    pub lambda_trajectory: Vec<f64>,
    /// Cycles (1-based) whose multiplier hit the cap.
    pub capped_iterations: Vec<usize>,
    pub wall_time_ms: f64,
    pub status_notes: Vec<String>,
}

impl SolveReport {
    /// JSON text; trajectories longer than `trajectory_limit` keep only their tail.
    pub fn to_json(&self, trajectory_limit: Option<usize>) -> String {
        let mut copy = self.clone();
        if let Some(limit) = trajectory_limit {
            for t in [
                &mut copy.objective_trajectory,
                &mut copy.residual_trajectory,
                &mut copy.lambda_trajectory,
            ] {
                if t.len() > limit {
                    t.drain(..t.len() - limit);
                }
            }
        }
        serde_json::to_string_pretty(&copy).expect("report serializes")
    }

    /// Index from which the objective is guaranteed monotone: the cycle after
    /// the last capped multiplier.
    pub fn monotone_from(&self) -> usize {
        self.capped_iterations.last().copied().unwrap_or(0)
    }
}

/// Everything an observer sees after one cycle.
pub struct StepRecord<'a> {
    pub iter: usize,
    pub prev: &'a SolverState,
    pub curr: &'a SolverState,
    pub objective: f64,
    pub residual: f64,
}

/// Hook invoked after every cycle.
pub trait StepObserver {
    fn observe(&mut self, record: &StepRecord<'_>);
}

impl StepObserver for () {
    fn observe(&mut self, _: &StepRecord<'_>) {}
}

impl<F: FnMut(&StepRecord<'_>)> StepObserver for F {
    fn observe(&mut self, record: &StepRecord<'_>) {
        self(record)
    }
}

/// R(target_i) by the alternating Bregman projection iteration.
pub fn solve_ri(problem: &IbProblem, target_i: f64, cfg: &SolverConfig) -> Result<SolveReport> {
    solve_ri_observed(problem, target_i, cfg, &mut ())
}

pub fn solve_ri_observed(
    problem: &IbProblem,
    target_i: f64,
    cfg: &SolverConfig,
    observer: &mut dyn StepObserver,
) -> Result<SolveReport> {
    let limit = problem.mutual_information();
    if !(target_i >= 0.0) {
        return Err(IbError::Domain(format!("relevance target {target_i} must be non-negative")));
    }
    if target_i > limit * (1.0 + 1e-9) {
        return Err(IbError::InfeasibleTarget { target: target_i, limit });
    }
    let i_hat = hat_i(target_i, problem.q());
    run(problem, Mode::Ri, target_i, Constraint::Relevance { i_hat }, cfg, observer)
}

/// I(target_r) by the rate-constrained variant of the iteration.
pub fn solve_ir(problem: &IbProblem, target_r: f64, cfg: &SolverConfig) -> Result<SolveReport> {
    solve_ir_observed(problem, target_r, cfg, &mut ())
}

pub fn solve_ir_observed(
    problem: &IbProblem,
    target_r: f64,
    cfg: &SolverConfig,
    observer: &mut dyn StepObserver,
) -> Result<SolveReport> {
    if !(target_r >= 0.0) {
        return Err(IbError::Domain(format!("rate target {target_r} must be non-negative")));
    }
    run(problem, Mode::Ir, target_r, Constraint::Rate { rate: target_r }, cfg, observer)
}

fn run(
    problem: &IbProblem,
    mode: Mode,
    target: f64,
    constraint: Constraint,
    cfg: &SolverConfig,
    observer: &mut dyn StepObserver,
) -> Result<SolveReport> {
    cfg.validate()?;
    let started = Instant::now();
    let mut notes = Vec::new();
    let mut state = if target == 0.0 {
        // the zero target is met exactly by any input-independent encoder
        notes.push("zero target: started from the independent encoder".to_string());
        let column = ProbVector::uniform(cfg.cardinality_n)?;
        let w = CondMatrix::constant_columns(&column, problem.m());
        SolverState::from_encoder(w, problem, 0.0, cfg.log_floor)?
    } else {
        init_state(problem, cfg)?
    };
    let mut objectives = Vec::new();
    let mut residuals = Vec::new();
    let mut lambdas = Vec::new();
    let mut capped = Vec::new();
    let mut converged = false;

    for n in 1..=cfg.max_iter {
        let next = step(&state, problem, constraint, cfg)?;
        let (objective, residual) = match constraint {
            Constraint::Relevance { i_hat } => (
                objective_ri(&next.w, &next.r, problem),
                kkt_residual(&next, problem, i_hat),
            ),
            Constraint::Rate { rate } => (
                objective_ir(&next.w, &next.z, problem),
                kkt_residual_ir(&next, problem, rate),
            ),
        };
        if next.lambda_status == Some(LambdaStatus::CappedInfeasible) {
            capped.push(n);
        }
        observer.observe(&StepRecord {
            iter: n,
            prev: &state,
            curr: &next,
            objective,
            residual,
        });

        let change = objectives.last().map(|prev: &f64| (prev - objective).abs());
        objectives.push(objective);
        residuals.push(residual);
        lambdas.push(next.lambda);
        state = next;

        if residual < cfg.residual_tol {
            converged = true;
            notes.push(format!("KKT residual {residual:.3e} below tolerance at cycle {n}"));
            break;
        }
        let settled = state.lambda_status != Some(LambdaStatus::CappedInfeasible)
            && capped.last().is_none_or(|&c| c + 1 < n);
        if cfg.stop_rule == StopRule::Either && settled && change.is_some_and(|c| c < cfg.objective_tol) {
            converged = true;
            notes.push(format!("objective change below {:e} at cycle {n}", cfg.objective_tol));
            break;
        }
    }
    if !converged {
        notes.push(format!("reached max_iter = {}", cfg.max_iter));
    }
    if let (Some(first), Some(last)) = (capped.first(), capped.last()) {
        notes.push(format!(
            "multiplier capped at {:e} on {} cycle(s) ({first}..={last})",
            cfg.root.lambda_cap,
            capped.len()
        ));
    }

    let i_tx = objective_ri(&state.w, &state.r, problem).max(0.0);
    let i_ty = (problem.h_y() - conditional_entropy(&state.r, &state.z)).max(0.0);
    let objective = *objectives.last().expect("at least one cycle");
    let value = match mode {
        Mode::Ri => objective,
        Mode::Ir => problem.h_y() - objective,
    };
    let violation = match mode {
        Mode::Ri => target - i_ty,
        Mode::Ir => i_tx - target,
    };
    if violation > TARGET_VIOLATION_TOL {
        converged = false;
        notes.push(format!("final iterate misses the target by {violation:.3e}"));
    }
    Ok(SolveReport {
        mode,
        target,
        value,
        objective,
        i_tx,
        i_ty,
        lambda: state.lambda,
        iterations: objectives.len(),
        converged,
        final_residual: *residuals.last().expect("at least one cycle"),
        objective_trajectory: objectives,
        residual_trajectory: residuals,
        lambda_trajectory: lambdas,
        capped_iterations: capped,
        wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
        status_notes: notes,
    })
}
