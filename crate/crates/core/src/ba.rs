//! Blahut–Arimoto baseline: self-consistent iteration at a frozen multiplier
//! and a bisection search on that multiplier to hit a relevance target.

use serde::{Deserialize, Serialize};

use crate::error::{IbError, Result};
use crate::prob::{CondMatrix, IbProblem};
use crate::solver::{conditional_entropy, fixed_step, init_state, objective_ri, SolverConfig};

/// Upper end of the multiplier search.
pub const BETA_MAX: f64 = 1e3;
/// Default acceptance window on I(T;Y) for [`ba_adaptive`].
pub const DEFAULT_CURVE_TOL: f64 = 1e-4;
const MAX_TRIALS: usize = 200;

/// Fixed point of the iteration at multiplier `beta`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BaPoint {
    pub beta: f64,
    pub i_tx: f64,
    pub i_ty: f64,
    pub w: CondMatrix,
    pub iterations: usize,
    pub converged: bool,
}

/// Outcome of the multiplier search.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BaSearch {
    pub point: BaPoint,
    /// Number of [`ba_fixed`] solves.
    pub trials: usize,
    /// Inner cycles summed over all trials.
    pub inner_iterations: usize,
}

/// Iterate w ∝ r e^{−β d}, r, z, d from the seeded start until the
/// Lagrangian f + β Σ p w d changes by less than `cfg.objective_tol`.
pub fn ba_fixed(problem: &IbProblem, beta: f64, cfg: &SolverConfig) -> Result<BaPoint> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(IbError::Domain(format!("multiplier {beta} must be finite and non-negative")));
    }
    cfg.validate()?;
    let mut state = init_state(problem, cfg)?;
    let mut prev: Option<f64> = None;
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..cfg.max_iter {
        state = fixed_step(&state, problem, beta, cfg);
        iterations += 1;
        let lagrangian = objective_ri(&state.w, &state.r, problem)
            + beta * conditional_entropy(&state.r, &state.z);
        if !lagrangian.is_finite() {
            return Err(IbError::NumericalFailure(format!(
                "non-finite Lagrangian at beta = {beta}, cycle {iterations}"
            )));
        }
        if prev.is_some_and(|v| (v - lagrangian).abs() < cfg.objective_tol) {
            converged = true;
            break;
        }
        prev = Some(lagrangian);
    }
    Ok(BaPoint {
        beta,
        i_tx: objective_ri(&state.w, &state.r, problem).max(0.0),
        i_ty: (problem.h_y() - conditional_entropy(&state.r, &state.z)).max(0.0),
        w: state.w,
        iterations,
        converged,
    })
}

struct Search<'a> {
    problem: &'a IbProblem,
    cfg: &'a SolverConfig,
    trials: usize,
    inner: usize,
}

impl Search<'_> {
    fn solve(&mut self, beta: f64) -> Result<BaPoint> {
        let point = ba_fixed(self.problem, beta, self.cfg)?;
        self.trials += 1;
        self.inner += point.iterations;
        Ok(point)
    }

    fn finish(&self, point: BaPoint) -> BaSearch {
        BaSearch { point, trials: self.trials, inner_iterations: self.inner }
    }
}

/// Bisection on β until |I(T;Y) − target| ≤ `curve_tol`.
pub fn ba_adaptive(
    problem: &IbProblem,
    target_i: f64,
    curve_tol: f64,
    cfg: &SolverConfig,
) -> Result<BaSearch> {
    if !(target_i >= 0.0) {
        return Err(IbError::Domain(format!("target {target_i} must be non-negative")));
    }
    if !(curve_tol > 0.0) {
        return Err(IbError::Domain(format!("curve tolerance {curve_tol} must be positive")));
    }
    let limit = problem.mutual_information();
    if target_i >= limit {
        return Err(IbError::InfeasibleTarget { target: target_i, limit });
    }

    let mut search = Search { problem, cfg, trials: 0, inner: 0 };
    let hit = |point: &BaPoint| (point.i_ty - target_i).abs() <= curve_tol;

    let mut lo = search.solve(0.0)?;
    if hit(&lo) {
        return Ok(search.finish(lo));
    }
    let mut hi = search.solve(1.0)?;
    while hi.i_ty < target_i {
        if hit(&hi) {
            return Ok(search.finish(hi));
        }
        if hi.beta >= BETA_MAX {
            return Err(IbError::BracketFailure(format!(
                "I(T;Y) = {} at beta = {BETA_MAX} is still below {target_i}",
                hi.i_ty
            )));
        }
        let next = search.solve((2.0 * hi.beta).min(BETA_MAX))?;
        lo = std::mem::replace(&mut hi, next);
    }
    if hit(&hi) {
        return Ok(search.finish(hi));
    }

    while search.trials < MAX_TRIALS {
        let mid = search.solve(0.5 * (lo.beta + hi.beta))?;
        if hit(&mid) {
            return Ok(search.finish(mid));
        }
        if mid.i_ty < lo.i_ty - curve_tol || mid.i_ty > hi.i_ty + curve_tol {
            return Err(IbError::BracketFailure(format!(
                "I(T;Y) not monotone in beta: {} at {}, {} at {}, {} at {}",
                lo.i_ty, lo.beta, mid.i_ty, mid.beta, hi.i_ty, hi.beta
            )));
        }
        if mid.i_ty < target_i {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi.beta - lo.beta <= 1e-12 * hi.beta {
            return Err(IbError::BracketFailure(format!(
                "I(T;Y) jumps from {} to {} across beta = {}",
                lo.i_ty, hi.i_ty, hi.beta
            )));
        }
    }
    Err(IbError::BracketFailure(format!("no multiplier found within {MAX_TRIALS} trials")))
}
