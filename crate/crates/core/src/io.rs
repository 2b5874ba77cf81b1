//! JSON problem files.
//!
//! One document with fields `P`, `q`, `A`, `B`, `l`, `u`, `beta`, `kappa`.
//! Matrices are arrays of rows; `P` may instead be `{"diag": [...]}`.
//! Infinite bounds are written as the strings `"inf"` and `"-inf"`.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CvqpError, Result};
use crate::problem::{CvqpProblem, Quadratic};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum QuadraticFile {
    Dense(Vec<Vec<f64>>),
    Diag { diag: Vec<f64> },
}

/// A number that may also be `"inf"` or `"-inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Extended(f64);

impl Serialize for Extended {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.0 {
            f64::INFINITY => s.serialize_str("inf"),
            f64::NEG_INFINITY => s.serialize_str("-inf"),
            v => s.serialize_f64(v),
        }
    }
}

impl<'de> Deserialize<'de> for Extended {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Extended(v)),
            Raw::Text(t) => match t.as_str() {
                "inf" | "+inf" => Ok(Extended(f64::INFINITY)),
                "-inf" => Ok(Extended(f64::NEG_INFINITY)),
                other => Err(serde::de::Error::custom(format!("expected a number, \"inf\" or \"-inf\", got {other:?}"))),
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    #[serde(rename = "P")]
    p: QuadraticFile,
    q: Vec<f64>,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    l: Vec<Extended>,
    u: Vec<Extended>,
    beta: f64,
    kappa: Extended,
}

fn rows_to_matrix(name: &str, rows: &[Vec<f64>], ncols: usize) -> Result<DMatrix<f64>> {
    if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(CvqpError::DimensionMismatch(format!(
            "{name} row {i} has {} entries, expected {ncols}",
            row.len()
        )));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn ensure_finite(name: &str, v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(CvqpError::InvalidData(format!("{name} entry {i} is not finite"))),
        None => Ok(()),
    }
}

impl ProblemFile {
    fn into_problem(self) -> Result<CvqpProblem> {
        let n = self.q.len();
        let p = match self.p {
            QuadraticFile::Dense(rows) => {
                if rows.len() != n {
                    return Err(CvqpError::DimensionMismatch(format!("P has {} rows, q has {n} entries", rows.len())));
                }
                Quadratic::Dense(rows_to_matrix("P", &rows, n)?)
            }
            QuadraticFile::Diag { diag } => Quadratic::Diagonal(DVector::from_vec(diag)),
        };
        ensure_finite("beta", &[self.beta])?;
        let problem = CvqpProblem {
            p,
            q: DVector::from_vec(self.q),
            a: rows_to_matrix("A", &self.a, n)?,
            b: rows_to_matrix("B", &self.b, n)?,
            l: DVector::from_iterator(self.l.len(), self.l.iter().map(|e| e.0)),
            u: DVector::from_iterator(self.u.len(), self.u.iter().map(|e| e.0)),
            beta: self.beta,
            kappa: self.kappa.0,
        };
        problem.validate()?;
        Ok(problem)
    }

    fn from_problem(problem: &CvqpProblem) -> Self {
        ProblemFile {
            p: match &problem.p {
                Quadratic::Dense(m) => QuadraticFile::Dense(matrix_to_rows(m)),
                Quadratic::Diagonal(d) => QuadraticFile::Diag { diag: d.as_slice().to_vec() },
            },
            q: problem.q.as_slice().to_vec(),
            a: matrix_to_rows(&problem.a),
            b: matrix_to_rows(&problem.b),
            l: problem.l.iter().map(|&v| Extended(v)).collect(),
            u: problem.u.iter().map(|&v| Extended(v)).collect(),
            beta: problem.beta,
            kappa: Extended(problem.kappa),
        }
    }
}

/// Parses and validates a problem document.
pub fn problem_from_json(text: &str) -> Result<CvqpProblem> {
    let file: ProblemFile = serde_json::from_str(text).map_err(|e| CvqpError::Parse(e.to_string()))?;
    file.into_problem()
}

pub fn problem_to_json(problem: &CvqpProblem) -> Result<String> {
    serde_json::to_string(&ProblemFile::from_problem(problem)).map_err(|e| CvqpError::Parse(e.to_string()))
}

pub fn read_problem(path: &Path) -> Result<CvqpProblem> {
    let text = fs::read_to_string(path)
        .map_err(|e| CvqpError::Parse(format!("cannot read {}: {e}", path.display())))?;
    problem_from_json(&text)
}

pub fn write_problem(path: &Path, problem: &CvqpProblem) -> Result<()> {
    let text = problem_to_json(problem)?;
    fs::write(path, text).map_err(|e| CvqpError::Parse(format!("cannot write {}: {e}", path.display())))
}
