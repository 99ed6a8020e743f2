//! Closed-form relevance-compression curves and the matching discrete
//! problem builders for the doubly symmetric binary source and the jointly
//! Gaussian pair.

use std::f64::consts::LN_2;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{IbError, Result};
use crate::prob::{binary_entropy, CondMatrix, IbProblem, ProbVector};

/// X ~ Bern(1/2), Y = X ⊕ noise with flip probability `e`.
pub fn bernoulli_problem(e: f64) -> Result<IbProblem> {
    if !(0.0..=0.5).contains(&e) {
        return Err(IbError::Domain(format!("flip probability {e} outside [0, 0.5]")));
    }
    let p = ProbVector::new(vec![0.5, 0.5])?;
    let s = CondMatrix::from_columns(&[vec![1.0 - e, e], vec![e, 1.0 - e]])?;
    IbProblem::new(p, s)
}

/// The analytic pair (I, R) for the encoder T = X ⊕ Bern(u), `u ∈ [0, 1/2]`:
/// I = ln 2 − h(e + (1 − 2e)u), R = ln 2 − h(u).
pub fn bernoulli_curve(u: f64, e: f64) -> Result<(f64, f64)> {
    if !(0.0..=0.5).contains(&e) || !(0.0..=0.5).contains(&u) {
        return Err(IbError::Domain(format!("need e, u in [0, 1/2], got e = {e}, u = {u}")));
    }
    let v = e + (1.0 - 2.0 * e) * u;
    Ok((LN_2 - binary_entropy(v)?, LN_2 - binary_entropy(u)?))
}

/// R(I) on the binary curve, inverting I(u) by bisection on u.
pub fn bernoulli_r_of_i(target_i: f64, e: f64) -> Result<f64> {
    let i_max = LN_2 - binary_entropy(e)?;
    if !(0.0..=i_max).contains(&target_i) {
        return Err(IbError::Domain(format!("relevance {target_i} outside [0, {i_max}]")));
    }
    // I(u) decreases on [0, 1/2]
    let (mut lo, mut hi) = (0.0, 0.5);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if bernoulli_curve(mid, e)?.0 > target_i {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(bernoulli_curve(0.5 * (lo + hi), e)?.1)
}

/// ½ ln(1 + snr)
pub fn gaussian_mutual_information(snr: f64) -> f64 {
    0.5 * snr.ln_1p()
}

/// R(I) = −½ ln(((1 + snr) e^{−2I} − 1) / snr)
pub fn gaussian_curve(target_i: f64, snr: f64) -> Result<f64> {
    if !(snr > 0.0) {
        return Err(IbError::Domain(format!("snr {snr} must be positive")));
    }
    let cap = gaussian_mutual_information(snr);
    if !(target_i >= 0.0 && target_i < cap) {
        return Err(IbError::Domain(format!("relevance {target_i} outside [0, {cap})")));
    }
    let ratio = ((1.0 + snr) * (-2.0 * target_i).exp() - 1.0) / snr;
    Ok(-0.5 * ratio.ln())
}

fn midpoint_grid(half_width: f64, points: usize) -> Vec<f64> {
    let delta = 2.0 * half_width / points as f64;
    (0..points)
        .map(|i| -half_width + (i as f64 + 0.5) * delta)
        .collect()
}

/// Discretized jointly Gaussian pair on `[−L, L]` midpoint grids.
///
/// Y, S ~ N(0, 1) independent and X = √snr Y + S, so X ~ N(0, 1 + snr) and
/// Y | X = x ~ N(√snr x / (1 + snr), 1 / (1 + snr)). Both densities are
/// point-evaluated on their grids and normalized.
pub fn gaussian_problem(snr: f64, half_width: f64, m: usize, k: usize) -> Result<IbProblem> {
    if m < 2 || k < 2 {
        return Err(IbError::Domain(format!("grid sizes must be at least 2, got {m} and {k}")));
    }
    if !(half_width > 0.0) || !(snr >= 0.0) {
        return Err(IbError::Domain(format!(
            "need L > 0 and snr ≥ 0, got L = {half_width}, snr = {snr}"
        )));
    }
    let xs = midpoint_grid(half_width, m);
    let ys = midpoint_grid(half_width, k);

    let var_x = 1.0 + snr;
    let mut p: Vec<f64> = xs.iter().map(|x| (-x * x / (2.0 * var_x)).exp()).collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    // exact mirror symmetry
    for i in 0..m / 2 {
        p[m - 1 - i] = p[i];
    }

    let var_y = 1.0 / (1.0 + snr);
    let gain = snr.sqrt() / (1.0 + snr);
    let mut s = Array2::zeros((k, m));
    for (i, &x) in xs.iter().enumerate() {
        let mean = gain * x;
        let mut col_total = 0.0;
        for (kk, &y) in ys.iter().enumerate() {
            let v = (-(y - mean) * (y - mean) / (2.0 * var_y)).exp();
            s[[kk, i]] = v;
            col_total += v;
        }
        for kk in 0..k {
            s[[kk, i]] /= col_total;
        }
    }
    IbProblem::new(ProbVector::new(p)?, CondMatrix::new(s)?)
}

/// A model with a known relevance-compression curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum AnalyticCurve {
    Bernoulli { e: f64 },
    Gaussian { snr: f64 },
}

impl AnalyticCurve {
    /// R at relevance `target_i`, in nats.
    pub fn eval(&self, target_i: f64) -> Result<f64> {
        match *self {
            AnalyticCurve::Bernoulli { e } => bernoulli_r_of_i(target_i, e),
            AnalyticCurve::Gaussian { snr } => gaussian_curve(target_i, snr),
        }
    }

    /// Supremum of the relevance axis.
    pub fn max_information(&self) -> Result<f64> {
        match *self {
            AnalyticCurve::Bernoulli { e } => Ok(LN_2 - binary_entropy(e)?),
            AnalyticCurve::Gaussian { snr } => Ok(gaussian_mutual_information(snr)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bernoulli_problem_examples() {
        let noiseless = bernoulli_problem(0.0).unwrap();
        assert_abs_diff_eq!(noiseless.mutual_information(), LN_2, epsilon = 1e-15);
        assert_eq!(noiseless.s().entries(), CondMatrix::identity(2).unwrap().entries());
        assert_abs_diff_eq!(bernoulli_problem(0.5).unwrap().mutual_information(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(bernoulli_problem(0.15).unwrap().mutual_information(), 0.270438, epsilon = 1e-6);
        assert!(bernoulli_problem(0.6).is_err());
    }

    #[test]
    fn bernoulli_curve_examples() {
        assert_eq!(bernoulli_curve(0.5, 0.15).unwrap(), (0.0, 0.0));
        let (i, r) = bernoulli_curve(0.25, 0.15).unwrap();
        assert_abs_diff_eq!(i, 0.062566, epsilon = 1e-6);
        assert_abs_diff_eq!(r, 0.130812, epsilon = 1e-6);
        let (i, r) = bernoulli_curve(0.1, 0.15).unwrap();
        assert_abs_diff_eq!(i, 0.166239, epsilon = 1e-6);
        assert_abs_diff_eq!(r, 0.368064, epsilon = 1e-6);
        // u = 0 is T = X
        let (i, r) = bernoulli_curve(0.0, 0.15).unwrap();
        assert_abs_diff_eq!(i, 0.270438, epsilon = 1e-6);
        assert_abs_diff_eq!(r, LN_2, epsilon = 1e-12);
        assert!(bernoulli_curve(0.6, 0.15).is_err());
    }

    #[test]
    fn bernoulli_curve_respects_data_processing() {
        for step in 0..=50 {
            let (i, r) = bernoulli_curve(step as f64 / 100.0, 0.15).unwrap();
            assert!(r >= i - 1e-15);
        }
    }

    #[test]
    fn bernoulli_slope_matches_table() {
        // dR/dI along the curve at u = 0.25
        let du = 1e-6;
        let (i0, r0) = bernoulli_curve(0.25 - du, 0.15).unwrap();
        let (i1, r1) = bernoulli_curve(0.25 + du, 0.15).unwrap();
        assert_abs_diff_eq!((r1 - r0) / (i1 - i0), 2.1478, epsilon = 1e-3);
    }

    #[test]
    fn bernoulli_r_of_i_inverts_the_curve() {
        for &u in &[0.0, 0.1, 0.15, 0.2, 0.25, 0.4] {
            let (i, r) = bernoulli_curve(u, 0.15).unwrap();
            assert_abs_diff_eq!(bernoulli_r_of_i(i, 0.15).unwrap(), r, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(bernoulli_r_of_i(0.0, 0.15).unwrap(), 0.0, epsilon = 1e-12);
        assert!(bernoulli_r_of_i(0.3, 0.15).is_err());
    }

    #[test]
    fn gaussian_curve_examples() {
        assert_abs_diff_eq!(gaussian_curve(0.0, 1.0).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(gaussian_curve(0.04, 1.0).unwrap(), 0.0834805, epsilon = 1e-6);
        assert_abs_diff_eq!(gaussian_curve(0.20, 1.0).unwrap(), 0.5384644, epsilon = 1e-6);
        assert!(gaussian_curve(0.5 * 2f64.ln(), 1.0).is_err());
        assert!(gaussian_curve(0.1, 0.0).is_err());
    }

    #[test]
    fn curves_are_increasing_and_bounded() {
        for curve in [AnalyticCurve::Bernoulli { e: 0.15 }, AnalyticCurve::Gaussian { snr: 1.0 }] {
            let cap = curve.max_information().unwrap();
            let mut prev = curve.eval(0.0).unwrap();
            assert_abs_diff_eq!(prev, 0.0, epsilon = 1e-15);
            for step in 1..50 {
                let r = curve.eval(cap * step as f64 / 50.0).unwrap();
                assert!(r > prev);
                prev = r;
            }
        }
        let cap = AnalyticCurve::Bernoulli { e: 0.15 }.max_information().unwrap();
        assert_abs_diff_eq!(bernoulli_r_of_i(cap, 0.15).unwrap(), LN_2, epsilon = 1e-9);
    }

    #[test]
    fn gaussian_problem_examples() {
        let problem = gaussian_problem(1.0, 10.0, 100, 100).unwrap();
        assert_abs_diff_eq!(problem.mutual_information(), 0.346574, epsilon = 2e-3);
        let p = problem.p().values();
        for i in 0..100 {
            assert_eq!(p[i], p[99 - i]);
        }

        let ys = midpoint_grid(10.0, 100);
        let mut std_normal: Vec<f64> = ys.iter().map(|y| (-y * y / 2.0).exp()).collect();
        let t: f64 = std_normal.iter().sum();
        std_normal.iter_mut().for_each(|v| *v /= t);
        let l1: f64 = problem.q().values().iter().zip(&std_normal).map(|(a, b)| (a - b).abs()).sum();
        assert!(l1 < 1e-6, "{l1}");

        let weak = gaussian_problem(1e-12, 10.0, 20, 20).unwrap();
        assert!(weak.mutual_information() < 1e-9);
        assert!(gaussian_problem(1.0, 10.0, 1, 5).is_err());
    }
}
