//! Empirical joint distributions from labelled sample tables, and the JSON
//! problem file format.
//!
//! A sample table is a CSV file with a header row, one or more numeric
//! feature columns, and a final categorical label column. Binning anchors
//! bins at `floor(value / unit)` in every coordinate.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{IbError, Result};
use crate::prob::{CondMatrix, IbProblem, ProbVector};

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: String,
}

/// Labelled feature vectors of equal arity.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleTable {
    feature_names: Vec<String>,
    rows: Vec<Sample>,
}

impl SampleTable {
    pub fn new(feature_names: Vec<String>, rows: Vec<Sample>) -> Result<Self> {
        if rows.is_empty() {
            return Err(IbError::Domain("sample table has no rows".into()));
        }
        let arity = feature_names.len();
        if arity == 0 {
            return Err(IbError::Domain("sample table has no feature columns".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.features.len() != arity {
                return Err(IbError::ShapeMismatch(format!(
                    "row {i} has {} features, expected {arity}",
                    row.features.len()
                )));
            }
            if let Some(j) = row.features.iter().position(|v| !v.is_finite()) {
                return Err(IbError::Domain(format!("row {i}, feature {j} is not finite")));
            }
        }
        Ok(SampleTable { feature_names, rows })
    }

    /// Parse CSV text; `context` names the source in error messages.
    pub fn from_reader(reader: impl Read, context: &str) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let parse_err = |message: String| IbError::Parse { context: context.to_string(), message };

        let header = csv.headers().map_err(|e| parse_err(e.to_string()))?.clone();
        if header.len() < 2 {
            return Err(parse_err(format!(
                "need at least one feature column and a label column, found {} column(s)",
                header.len()
            )));
        }
        let names: Vec<String> = header.iter().take(header.len() - 1).map(String::from).collect();

        let mut rows = Vec::new();
        for record in csv.records() {
            let record = record.map_err(|e| parse_err(e.to_string()))?;
            let line = record.position().map_or(0, |p| p.line());
            let mut features = Vec::with_capacity(names.len());
            for (field, name) in record.iter().zip(&names) {
                let value = field.parse::<f64>().map_err(|_| {
                    parse_err(format!("line {line}, column '{name}': '{field}' is not a number"))
                })?;
                features.push(value);
            }
            let label = record.get(names.len()).unwrap_or_default().to_string();
            rows.push(Sample { features, label });
        }
        SampleTable::new(names, rows).map_err(|e| parse_err(e.to_string()))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| IbError::io(path, e))?;
        SampleTable::from_reader(BufReader::new(file), &path.display().to_string())
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn rows(&self) -> &[Sample] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Result of [`bin_samples`]: the problem plus the alphabets it is over.
#[derive(Clone, Debug)]
pub struct BinnedSamples {
    pub problem: IbProblem,
    /// Bin index vector of each X symbol, in lexicographic order.
    pub bins: Vec<Vec<i64>>,
    /// Label of each Y symbol, in order of first appearance.
    pub labels: Vec<String>,
    /// Sample count per X symbol.
    pub counts: Vec<usize>,
}

pub fn bin_samples(table: &SampleTable, unit: f64) -> Result<BinnedSamples> {
    if !(unit > 0.0) || !unit.is_finite() {
        return Err(IbError::Domain(format!("bin unit {unit} must be positive")));
    }
    let mut labels: Vec<String> = Vec::new();
    let mut label_index = BTreeMap::new();
    let mut cells: BTreeMap<Vec<i64>, BTreeMap<usize, usize>> = BTreeMap::new();
    for row in table.rows() {
        let k = *label_index.entry(row.label.clone()).or_insert_with(|| {
            labels.push(row.label.clone());
            labels.len() - 1
        });
        let bin: Vec<i64> = row.features.iter().map(|v| (v / unit).floor() as i64).collect();
        *cells.entry(bin).or_default().entry(k).or_insert(0) += 1;
    }

    let total = table.len() as f64;
    let m = cells.len();
    let mut p = Vec::with_capacity(m);
    let mut s = vec![vec![0.0; m]; labels.len()];
    let mut bins = Vec::with_capacity(m);
    let mut counts = Vec::with_capacity(m);
    for (i, (bin, by_label)) in cells.into_iter().enumerate() {
        let count: usize = by_label.values().sum();
        p.push(count as f64 / total);
        for (k, c) in by_label {
            s[k][i] = c as f64 / count as f64;
        }
        bins.push(bin);
        counts.push(count);
    }
    let problem = IbProblem::new(ProbVector::new(p)?, CondMatrix::from_rows(&s)?)?;
    Ok(BinnedSamples { problem, bins, labels, counts })
}

/// On-disk problem: `{"p": [..], "s": [[..], ..]}` with `s` stored row by row
/// (rows are Y symbols, columns are X symbols).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProblemFile {
    pub p: Vec<f64>,
    pub s: Vec<Vec<f64>>,
}

impl From<&IbProblem> for ProblemFile {
    fn from(problem: &IbProblem) -> Self {
        ProblemFile { p: problem.p().to_vec(), s: problem.s().to_rows() }
    }
}

impl ProblemFile {
    pub fn into_problem(self) -> Result<IbProblem> {
        let p = ProbVector::new(self.p)
            .map_err(|e| IbError::InvalidDistribution(format!("field \"p\": {e}")))?;
        let s = CondMatrix::from_rows(&self.s)
            .map_err(|e| IbError::InvalidDistribution(format!("field \"s\": {e}")))?;
        IbProblem::new(p, s)
    }
}

pub fn problem_from_json(text: &str, context: &str) -> Result<IbProblem> {
    let file: ProblemFile = serde_json::from_str(text).map_err(|e| IbError::Parse {
        context: context.to_string(),
        message: e.to_string(),
    })?;
    file.into_problem()
}

pub fn problem_to_json(problem: &IbProblem) -> String {
    serde_json::to_string_pretty(&ProblemFile::from(problem)).expect("plain numeric data")
}

pub fn load_problem(path: impl AsRef<Path>) -> Result<IbProblem> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| IbError::io(path, e))?;
    problem_from_json(&text, &path.display().to_string())
}

pub fn save_problem(problem: &IbProblem, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| IbError::io(path, e))?;
    let mut out = BufWriter::new(file);
    out.write_all(problem_to_json(problem).as_bytes())
        .and_then(|_| out.write_all(b"\n"))
        .and_then(|_| out.flush())
        .map_err(|e| IbError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::{bernoulli_problem, gaussian_problem};

    fn table(text: &str) -> Result<SampleTable> {
        SampleTable::from_reader(text.as_bytes(), "inline")
    }

    #[test]
    fn single_sample() {
        let binned = bin_samples(&table("x,y\n0.5,A\n").unwrap(), 1.0).unwrap();
        assert_eq!(binned.problem.p().to_vec(), vec![1.0]);
        assert_eq!(binned.problem.s().to_rows(), vec![vec![1.0]]);
        assert_eq!(binned.labels, vec!["A"]);
    }

    #[test]
    fn hand_counted_bins() {
        let binned = bin_samples(&table("x,label\n1.2,A\n1.7,A\n2.3,B\n").unwrap(), 1.0).unwrap();
        let p = binned.problem.p().to_vec();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15 && (p[1] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(binned.problem.s().to_rows(), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(binned.bins, vec![vec![1], vec![2]]);
        assert_eq!(binned.counts, vec![2, 1]);
    }

    #[test]
    fn negative_values_floor_down_and_order_lexicographically() {
        let binned = bin_samples(&table("a,b,c\n-0.5,3,X\n0.2,-1,Y\n-0.1,0,Y\n").unwrap(), 1.0).unwrap();
        assert_eq!(binned.bins, vec![vec![-1, 0], vec![-1, 3], vec![0, -1]]);
        assert_eq!(binned.labels, vec!["X", "Y"]);
    }

    #[test]
    fn rejects_bad_tables() {
        let err = table("x,y\n1.0,A\nfoo,B\n").unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("'x'"), "{err}");
        assert!(table("x,y\n").is_err());
        assert!(table("x,y\n1.0,A\n2.0\n").is_err());
        assert!(bin_samples(&table("x,y\n1,A\n").unwrap(), 0.0).is_err());
    }

    #[test]
    fn problem_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bern.json");
        let problem = bernoulli_problem(0.15).unwrap();
        save_problem(&problem, &path).unwrap();
        assert_eq!(load_problem(&path).unwrap(), problem);

        let gauss = gaussian_problem(1.0, 10.0, 100, 100).unwrap();
        let back = problem_from_json(&problem_to_json(&gauss), "inline").unwrap();
        let dev = (back.s().entries() - gauss.s().entries()).mapv(f64::abs).fold(0.0, |a: f64, &b| a.max(b));
        assert!(dev <= 1e-12);
        let dev_p = (back.p().values() - gauss.p().values()).mapv(f64::abs).fold(0.0, |a: f64, &b| a.max(b));
        assert!(dev_p <= 1e-12);
    }

    #[test]
    fn problem_json_validation() {
        let err = problem_from_json(r#"{"p": [0.5, 0.5], "s": [[0.5, 1.0], [0.4, 0.0]]}"#, "inline")
            .unwrap_err()
            .to_string();
        assert!(err.contains("\"s\"") && err.contains("column 0"), "{err}");
        let err = problem_from_json("{\"p\": [0.5,\n 0.5], \"s\": [[1.0, 1.0]", "f.json").unwrap_err().to_string();
        assert!(err.contains("f.json") && err.contains("line 2"), "{err}");
    }
}
