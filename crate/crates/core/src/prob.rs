//! Probability-simplex types and the information-theoretic primitives shared
//! by every solver in the crate.
//!
//! All quantities are in nats and use the convention `0 · ln 0 = 0`.
//! Conditional distributions are stored column-stochastic: column `i` of a
//! [`CondMatrix`] is the output distribution for input symbol `i`.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{IbError, Result};

/// Inputs whose mass is within this distance of 1 are renormalized;
/// anything further off is rejected.
pub const RENORMALIZE_TOL: f64 = 1e-9;

/// A point on the probability simplex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<f64>", try_from = "Vec<f64>")]
pub struct ProbVector(Array1<f64>);

impl From<ProbVector> for Vec<f64> {
    fn from(v: ProbVector) -> Self {
        v.0.to_vec()
    }
}

impl TryFrom<Vec<f64>> for ProbVector {
    type Error = IbError;
    fn try_from(values: Vec<f64>) -> Result<Self> {
        ProbVector::new(values)
    }
}

impl ProbVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let mut values = Array1::from(values);
        normalize_in_place(values.view_mut(), "vector")?;
        Ok(ProbVector(values))
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(IbError::InvalidDistribution("empty vector".into()));
        }
        Ok(ProbVector(Array1::from_elem(n, 1.0 / n as f64)))
    }

    /// Wraps an array the caller has already produced on the simplex.
    pub(crate) fn from_array(values: Array1<f64>) -> Self {
        debug_assert!((values.sum() - 1.0).abs() < 1e-9);
        ProbVector(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &Array1<f64> {
        &self.0
    }

    pub fn view(&self) -> ArrayView1<'_, f64> {
        self.0.view()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.to_vec()
    }

    pub fn entropy(&self) -> f64 {
        entropy_of(self.0.view())
    }
}

/// Column-stochastic conditional distribution, `rows` outputs by `cols` inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<f64>>", try_from = "Vec<Vec<f64>>")]
pub struct CondMatrix(Array2<f64>);

impl TryFrom<Vec<Vec<f64>>> for CondMatrix {
    type Error = IbError;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        CondMatrix::from_rows(&rows)
    }
}

impl From<CondMatrix> for Vec<Vec<f64>> {
    fn from(m: CondMatrix) -> Self {
        m.0.outer_iter().map(|row| row.to_vec()).collect()
    }
}

impl CondMatrix {
    /// Validates (and renormalizes within tolerance) every column.
    pub fn new(mut entries: Array2<f64>) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(IbError::InvalidDistribution("empty matrix".into()));
        }
        for (i, col) in entries.axis_iter_mut(Axis(1)).enumerate() {
            normalize_in_place(col, &format!("column {i}"))?;
        }
        Ok(CondMatrix(entries))
    }

    /// Builds a matrix from row vectors (`rows[k][i]`).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if let Some((k, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != n_cols) {
            return Err(IbError::ShapeMismatch(format!(
                "row {k} has {} entries, expected {n_cols}",
                row.len()
            )));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let entries = Array2::from_shape_vec((n_rows, n_cols), flat)
            .map_err(|e| IbError::ShapeMismatch(e.to_string()))?;
        CondMatrix::new(entries)
    }

    /// Builds a matrix whose column `i` is `columns[i]`.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let n_cols = columns.len();
        let n_rows = columns.first().map_or(0, Vec::len);
        let mut entries = Array2::zeros((n_rows, n_cols));
        for (i, col) in columns.iter().enumerate() {
            if col.len() != n_rows {
                return Err(IbError::ShapeMismatch(format!(
                    "column {i} has {} entries, expected {n_rows}",
                    col.len()
                )));
            }
            for (k, &v) in col.iter().enumerate() {
                entries[[k, i]] = v;
            }
        }
        CondMatrix::new(entries)
    }

    pub fn identity(n: usize) -> Result<Self> {
        CondMatrix::new(Array2::eye(n))
    }

    /// Every column equal to `column`.
    pub fn constant_columns(column: &ProbVector, cols: usize) -> Self {
        let mut entries = Array2::zeros((column.len(), cols));
        for mut c in entries.axis_iter_mut(Axis(1)) {
            c.assign(column.values());
        }
        CondMatrix(entries)
    }

    pub(crate) fn from_array(entries: Array2<f64>) -> Self {
        CondMatrix(entries)
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn column(&self, i: usize) -> ArrayView1<'_, f64> {
        self.0.column(i)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[[row, col]]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.0.outer_iter().map(|r| r.to_vec()).collect()
    }
}

fn normalize_in_place(mut v: ndarray::ArrayViewMut1<'_, f64>, what: &str) -> Result<()> {
    if v.is_empty() {
        return Err(IbError::InvalidDistribution(format!("{what} is empty")));
    }
    if let Some((idx, &x)) = v.iter().enumerate().find(|(_, x)| !x.is_finite() || **x < 0.0) {
        return Err(IbError::InvalidDistribution(format!(
            "{what} entry {idx} is {x}, expected a finite non-negative value"
        )));
    }
    let total: f64 = v.sum();
    if (total - 1.0).abs() > RENORMALIZE_TOL {
        return Err(IbError::InvalidDistribution(format!(
            "{what} sums to {total}, expected 1"
        )));
    }
    v.mapv_inplace(|x| x / total);
    Ok(())
}

/// Source distribution `p` over X and channel `s = P(Y|X)`, with the derived
/// output marginal `q` and its entropy.
#[derive(Clone, Debug, PartialEq)]
pub struct IbProblem {
    p: ProbVector,
    s: CondMatrix,
    q: ProbVector,
    h_y: f64,
}

impl IbProblem {
    pub fn new(p: ProbVector, s: CondMatrix) -> Result<Self> {
        if s.cols() != p.len() {
            return Err(IbError::ShapeMismatch(format!(
                "channel has {} input columns but source has {} symbols",
                s.cols(),
                p.len()
            )));
        }
        let mut q = s.entries().dot(p.values());
        let total = q.sum();
        q.mapv_inplace(|x| x / total);
        let q = ProbVector(q);
        let h_y = q.entropy();
        Ok(IbProblem { p, s, q, h_y })
    }

    pub fn p(&self) -> &ProbVector {
        &self.p
    }

    pub fn s(&self) -> &CondMatrix {
        &self.s
    }

    pub fn q(&self) -> &ProbVector {
        &self.q
    }

    /// H(Y) in nats.
    pub fn h_y(&self) -> f64 {
        self.h_y
    }

    /// H(X) in nats.
    pub fn h_x(&self) -> f64 {
        self.p.entropy()
    }

    /// |X|
    pub fn m(&self) -> usize {
        self.p.len()
    }

    /// |Y|
    pub fn k(&self) -> usize {
        self.s.rows()
    }

    /// I(X;Y) = Σ_i p_i D(s_i ‖ q).
    pub fn mutual_information(&self) -> f64 {
        let q = self.q.view();
        self.p
            .values()
            .iter()
            .enumerate()
            .map(|(i, &pi)| pi * kl_view(self.s.column(i), q))
            .sum::<f64>()
            .max(0.0)
    }
}

pub fn entropy(v: &ProbVector) -> f64 {
    v.entropy()
}

pub(crate) fn entropy_of(v: ArrayView1<'_, f64>) -> f64 {
    -v.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.ln())
        .sum::<f64>()
}

/// h(x) = −x ln x − (1−x) ln(1−x).
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(IbError::Domain(format!("binary entropy argument {x} outside [0, 1]")));
    }
    let term = |t: f64| if t > 0.0 { -t * t.ln() } else { 0.0 };
    Ok(term(x) + term(1.0 - x))
}

/// D(a ‖ b) in nats; `+∞` when `a` puts mass where `b` has none.
pub fn kl_divergence(a: &ProbVector, b: &ProbVector) -> Result<f64> {
    if a.len() != b.len() {
        return Err(IbError::ShapeMismatch(format!(
            "divergence between lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(kl_view(a.view(), b.view()))
}

/// Sum of the non-negative terms `a ln(a/b) − a + b`; equals D(a‖b) when both
/// sides sum to one and never goes negative through cancellation.
pub(crate) fn kl_view(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    let mut acc = 0.0;
    for (&x, &y) in a.iter().zip(b.iter()) {
        if x > 0.0 {
            if y <= 0.0 {
                return f64::INFINITY;
            }
            acc += x * (x / y).ln() - x + y;
        } else {
            acc += y;
        }
    }
    acc.max(0.0)
}

pub(crate) fn l1_distance(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).sum()
}

fn check_channel(w: &CondMatrix, p: &ProbVector) -> Result<()> {
    if w.cols() != p.len() {
        return Err(IbError::ShapeMismatch(format!(
            "conditional has {} input columns, distribution has {} entries",
            w.cols(),
            p.len()
        )));
    }
    Ok(())
}

/// r_j = Σ_i p_i w_ji
pub fn marginal(w: &CondMatrix, p: &ProbVector) -> Result<ProbVector> {
    check_channel(w, p)?;
    Ok(ProbVector(marginal_array(w.entries(), p.values())))
}

pub(crate) fn marginal_array(w: &Array2<f64>, p: &Array1<f64>) -> Array1<f64> {
    w.dot(p)
}

/// Bayes posterior z_kj = P(Y=k | T=j) under the joint p_i w_ji s_ki.
///
/// A bottleneck symbol with zero mass gets the output marginal `q` as its
/// posterior.
pub fn posterior(w: &CondMatrix, p: &ProbVector, s: &CondMatrix) -> Result<CondMatrix> {
    check_channel(w, p)?;
    check_channel(s, p)?;
    let mut q = s.entries().dot(p.values());
    let total = q.sum();
    q.mapv_inplace(|x| x / total);
    Ok(CondMatrix(posterior_array(
        w.entries(),
        p.values(),
        s.entries(),
        q.view(),
    )))
}

pub(crate) fn posterior_array(
    w: &Array2<f64>,
    p: &Array1<f64>,
    s: &Array2<f64>,
    q: ArrayView1<'_, f64>,
) -> Array2<f64> {
    let sp = s * p;
    let mut joint = sp.dot(&w.t());
    for mut col in joint.axis_iter_mut(Axis(1)) {
        let mass: f64 = col.sum();
        if mass > 0.0 {
            col.mapv_inplace(|x| x / mass);
        } else {
            col.assign(&q);
        }
    }
    joint
}

/// I(T;X) for the channel `w` driven by `p`.
pub fn mutual_information_tx(w: &CondMatrix, p: &ProbVector) -> Result<f64> {
    check_channel(w, p)?;
    let r = marginal_array(w.entries(), p.values());
    Ok(rate_array(w.entries(), r.view(), p.values()))
}

/// Σ_ij p_i w_ji (ln w_ji − ln r_j) for an arbitrary simplex point `r`.
pub(crate) fn rate_array(w: &Array2<f64>, r: ArrayView1<'_, f64>, p: &Array1<f64>) -> f64 {
    let mut acc = 0.0;
    for (j, row) in w.outer_iter().enumerate() {
        let lr = r[j].ln();
        for (i, &wji) in row.iter().enumerate() {
            let mass = p[i] * wji;
            if mass > 0.0 {
                acc += mass * (wji.ln() - lr);
            }
        }
    }
    acc
}
