//! Per-iteration kernel: the cross-entropy metric, the exponential-tilt
//! (Bregman projection) update of the encoder, the two dual functions whose
//! roots fix the multiplier, and a safeguarded Newton root finder.

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{IbError, Result};
use crate::prob::{CondMatrix, ProbVector};

/// Lower clamp applied to posterior entries before taking logarithms.
pub const DEFAULT_LOG_FLOOR: f64 = 1e-16;

/// Cross-entropy cost d_ij = −Σ_k s_ki ln z_kj, stored M×N.
#[derive(Clone, Debug, PartialEq)]
pub struct Metric(Array2<f64>);

impl Metric {
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        if let Some(bad) = entries.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(IbError::NumericalFailure(format!("metric entry {bad} is not a finite non-negative value")));
        }
        Ok(Metric(entries))
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[[i, j]]
    }

    /// |X|
    pub fn inputs(&self) -> usize {
        self.0.nrows()
    }

    /// |T|
    pub fn clusters(&self) -> usize {
        self.0.ncols()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootConfig {
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    pub lambda_cap: f64,
    pub bracket_growth: f64,
}

impl Default for RootConfig {
    fn default() -> Self {
        RootConfig {
            newton_tol: 1e-12,
            max_newton_iters: 100,
            lambda_cap: 1e4,
            bracket_growth: 2.0,
        }
    }
}

impl RootConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.newton_tol > 0.0
            && self.max_newton_iters > 0
            && self.lambda_cap > 0.0
            && self.bracket_growth > 1.0;
        if ok {
            Ok(())
        } else {
            Err(IbError::Domain(format!("invalid root configuration {self:?}")))
        }
    }
}

/// d = −sᵀ ln(max(z, floor))
pub fn compute_metric(z: &CondMatrix, s: &CondMatrix, floor: f64) -> Metric {
    Metric(metric_array(z.entries(), s.entries(), floor))
}

pub(crate) fn metric_array(z: &Array2<f64>, s: &Array2<f64>, floor: f64) -> Array2<f64> {
    let log_z = z.mapv(|v| v.max(floor).ln());
    let mut d = s.t().dot(&log_z);
    d.mapv_inplace(|v| (-v).max(0.0));
    d
}

/// Moments of one row of the metric under the tilted weights
/// w_j ∝ r_j e^{−λ d_j}.
#[derive(Clone, Copy, Debug)]
struct Tilt {
    log_partition: f64,
    mean: f64,
    variance: f64,
}

fn tilt(lambda: f64, d_row: ArrayView1<'_, f64>, log_r: &[f64]) -> Tilt {
    let mut max = f64::NEG_INFINITY;
    for (&lr, &d) in log_r.iter().zip(d_row.iter()) {
        max = max.max(lr - lambda * d);
    }
    let mut z = 0.0;
    let mut first = 0.0;
    for (&lr, &d) in log_r.iter().zip(d_row.iter()) {
        let e = (lr - lambda * d - max).exp();
        z += e;
        first += e * d;
    }
    let mean = first / z;
    let mut second = 0.0;
    for (&lr, &d) in log_r.iter().zip(d_row.iter()) {
        let e = (lr - lambda * d - max).exp();
        second += e * (d - mean) * (d - mean);
    }
    Tilt {
        log_partition: max + z.ln(),
        mean,
        variance: second / z,
    }
}

/// Precomputed state for evaluating the dual functions at many multipliers.
pub(crate) struct Dual<'a> {
    d: &'a Array2<f64>,
    p: &'a Array1<f64>,
    log_r: Vec<f64>,
}

impl<'a> Dual<'a> {
    pub(crate) fn new(d: &'a Array2<f64>, r: ArrayView1<'_, f64>, p: &'a Array1<f64>) -> Self {
        Dual {
            d,
            p,
            log_r: r.iter().map(|&x| x.ln()).collect(),
        }
    }

    /// (Σ p_i E[d_i], Σ p_i Var[d_i], Σ p_i ln Z_i)
    fn moments(&self, lambda: f64) -> (f64, f64, f64) {
        let mut mean = 0.0;
        let mut var = 0.0;
        let mut log_z = 0.0;
        for (i, row) in self.d.outer_iter().enumerate() {
            let pi = self.p[i];
            if pi == 0.0 {
                continue;
            }
            let t = tilt(lambda, row, &self.log_r);
            mean += pi * t.mean;
            var += pi * t.variance;
            log_z += pi * t.log_partition;
        }
        (mean, var, log_z)
    }

    /// G(λ) and G'(λ) for the relevance-constrained problem.
    pub(crate) fn ri(&self, lambda: f64, i_hat: f64) -> (f64, f64) {
        let (mean, var, _) = self.moments(lambda);
        (mean + i_hat, -var)
    }

    /// G_IR(λ) and its derivative for the rate-constrained problem.
    pub(crate) fn ir(&self, lambda: f64, rate: f64) -> (f64, f64) {
        let (mean, var, log_z) = self.moments(lambda);
        (-log_z - lambda * mean - rate, lambda * var)
    }

    /// w_ji ∝ r_j e^{−λ d_ij}, written into `out` (N×M).
    pub(crate) fn project(&self, lambda: f64, out: &mut Array2<f64>) {
        for (i, row) in self.d.outer_iter().enumerate() {
            let mut max = f64::NEG_INFINITY;
            for (&lr, &d) in self.log_r.iter().zip(row.iter()) {
                max = max.max(lr - lambda * d);
            }
            let mut z = 0.0;
            for (j, (&lr, &d)) in self.log_r.iter().zip(row.iter()).enumerate() {
                let e = (lr - lambda * d - max).exp();
                out[[j, i]] = e;
                z += e;
            }
            for j in 0..self.log_r.len() {
                out[[j, i]] /= z;
            }
        }
    }
}

fn check_dual_shapes(d: &Metric, r: &ProbVector, p: &ProbVector) -> Result<()> {
    if d.clusters() != r.len() || d.inputs() != p.len() {
        return Err(IbError::ShapeMismatch(format!(
            "metric is {}×{}, r has {} entries, p has {}",
            d.inputs(),
            d.clusters(),
            r.len(),
            p.len()
        )));
    }
    Ok(())
}

/// Bregman projection of the tilted prior onto the column-stochastic set.
pub fn bregman_update_w(lambda: f64, d: &Metric, r: &ProbVector) -> Result<CondMatrix> {
    if d.clusters() != r.len() {
        return Err(IbError::ShapeMismatch(format!(
            "metric has {} clusters, r has {} entries",
            d.clusters(),
            r.len()
        )));
    }
    if !(lambda >= 0.0) {
        return Err(IbError::Domain(format!("multiplier {lambda} must be non-negative")));
    }
    // p only weights the moments, which projection never reads
    let p = Array1::zeros(d.inputs());
    let dual = Dual::new(d.entries(), r.view(), &p);
    let mut w = Array2::zeros((r.len(), d.inputs()));
    dual.project(lambda, &mut w);
    if w.iter().any(|x| !x.is_finite()) {
        return Err(IbError::NumericalFailure("encoder column lost all mass".into()));
    }
    Ok(CondMatrix::from_array(w))
}

/// G(λ) = Σ_ij d_ij p_i w_ji(λ) + Î; non-increasing in λ.
pub fn g_ri(lambda: f64, d: &Metric, r: &ProbVector, p: &ProbVector, i_hat: f64) -> Result<f64> {
    check_dual_shapes(d, r, p)?;
    Ok(Dual::new(d.entries(), r.view(), p.values()).ri(lambda, i_hat).0)
}

/// G_IR(λ) = −Σ_i p_i ln Σ_j e^{−λ d_ij} r_j − λ Σ_ij p_i d_ij w_ji(λ) − R.
///
/// This is the rate of the tilted encoder against `r`, minus the budget, so it
/// is non-decreasing in λ.
pub fn g_ir(lambda: f64, d: &Metric, r: &ProbVector, p: &ProbVector, rate: f64) -> Result<f64> {
    check_dual_shapes(d, r, p)?;
    Ok(Dual::new(d.entries(), r.view(), p.values()).ir(lambda, rate).0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LambdaStatus {
    /// A sign change was found and refined.
    Root,
    /// g(0) ≤ 0: the constraint is slack and the multiplier is zero.
    InactiveAtZero,
    /// g stays positive up to the cap.
    CappedInfeasible,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LambdaSolution {
    pub lambda: f64,
    pub status: LambdaStatus,
    /// g at the returned multiplier.
    pub value: f64,
    pub evaluations: usize,
}

/// Root of a non-increasing `g` on `[0, lambda_cap]`, bracketing upward from 1.
///
/// `g` returns the value and derivative at a point.
pub fn solve_lambda<F>(g: F, cfg: &RootConfig) -> Result<LambdaSolution>
where
    F: FnMut(f64) -> (f64, f64),
{
    solve_lambda_from(g, cfg, 1.0)
}

/// Same as [`solve_lambda`] with the bracket search starting at `start`
/// (typically the previous iterate's multiplier).
pub fn solve_lambda_from<F>(mut g: F, cfg: &RootConfig, start: f64) -> Result<LambdaSolution>
where
    F: FnMut(f64) -> (f64, f64),
{
    let mut evaluations = 0;
    let mut eval = |x: f64| -> Result<(f64, f64)> {
        evaluations += 1;
        let (v, dv) = g(x);
        if !v.is_finite() {
            return Err(IbError::NumericalFailure(format!("dual function is {v} at λ = {x}")));
        }
        Ok((v, dv))
    };
    let cap = cfg.lambda_cap;
    let start = if start > 0.0 && start < cap { start } else { 1.0f64.min(cap) };

    let (mut x, (mut gx, mut sx)) = (start, eval(start)?);
    let (mut lo, mut hi);
    if gx > 0.0 {
        lo = x;
        loop {
            if x >= cap {
                return Ok(LambdaSolution {
                    lambda: cap,
                    status: LambdaStatus::CappedInfeasible,
                    value: gx,
                    evaluations,
                });
            }
            x = (x * cfg.bracket_growth).min(cap);
            (gx, sx) = eval(x)?;
            if gx <= 0.0 {
                hi = x;
                break;
            }
            lo = x;
        }
    } else {
        hi = x;
        let (g0, _) = eval(0.0)?;
        if g0 <= 0.0 {
            return Ok(LambdaSolution {
                lambda: 0.0,
                status: LambdaStatus::InactiveAtZero,
                value: g0,
                evaluations,
            });
        }
        lo = 0.0;
    }

    let mut best = (x, gx, sx);
    for _ in 0..cfg.max_newton_iters {
        if gx.abs() <= cfg.newton_tol {
            break;
        }
        if gx > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi.max(1.0) {
            break;
        }
        let newton = if sx < 0.0 { x - gx / sx } else { f64::NAN };
        x = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        (gx, sx) = eval(x)?;
        if gx.abs() < best.1.abs() {
            best = (x, gx, sx);
        }
    }
    (x, gx, sx) = best;
    // a few extra Newton steps take |g| from the tolerance down to rounding level
    for _ in 0..3 {
        if gx == 0.0 || !(sx < 0.0) {
            break;
        }
        let next = x - gx / sx;
        if next == x || !(next > 0.0 && next < cap) {
            break;
        }
        let (gn, sn) = eval(next)?;
        if gn.abs() >= gx.abs() {
            break;
        }
        (x, gx, sx) = (next, gn, sn);
    }
    Ok(LambdaSolution {
        lambda: x,
        status: LambdaStatus::Root,
        value: gx,
        evaluations,
    })
}
