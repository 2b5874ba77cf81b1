//! Dense kernels and the cached factorization of `M = P + rho (A'A + B'B)`.
//!
//! Products over large matrices are split into fixed-size blocks and run on
//! the rayon pool. Block boundaries depend only on the matrix shape and
//! partial results are combined in block order, so output is identical for
//! any thread count.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;

use crate::error::{CvqpError, Result};
use crate::problem::Quadratic;

const PAR_MIN_ENTRIES: usize = 1 << 18;
const ROW_BLOCK: usize = 4096;
const GRAM_ROW_BLOCK: usize = 8192;
const COL_BLOCK: usize = 8;

/// `A x`.
pub fn mul(a: &DMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    let (m, n) = a.shape();
    // Row blocks reproduce the plain product bit for bit; they only pay off
    // with more than one thread.
    if m * n < PAR_MIN_ENTRIES || rayon::current_num_threads() == 1 {
        return a * x;
    }
    let mut out = DVector::zeros(m);
    out.as_mut_slice()
        .par_chunks_mut(ROW_BLOCK)
        .enumerate()
        .for_each(|(b, chunk)| {
            let r0 = b * ROW_BLOCK;
            let part = a.rows(r0, chunk.len()) * x;
            chunk.copy_from_slice(part.as_slice());
        });
    out
}

/// `A' v`.
pub fn tr_mul(a: &DMatrix<f64>, v: &DVector<f64>) -> DVector<f64> {
    let (m, n) = a.shape();
    if m * n < PAR_MIN_ENTRIES {
        return a.tr_mul(v);
    }
    let mut out = DVector::zeros(n);
    out.as_mut_slice()
        .par_chunks_mut(COL_BLOCK)
        .enumerate()
        .for_each(|(b, chunk)| {
            let c0 = b * COL_BLOCK;
            let part = a.columns(c0, chunk.len()).tr_mul(v);
            chunk.copy_from_slice(part.as_slice());
        });
    out
}

/// `(A'v, A'w)` in one pass over `A`.
pub fn tr_mul_pair(a: &DMatrix<f64>, v: &DVector<f64>, w: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let (m, n) = a.shape();
    assert!(v.len() == m && w.len() == m, "tr_mul_pair: length mismatch");
    let (v, w) = (v.as_slice(), w.as_slice());
    let col_dots = |j: usize| dot_pair(&a.as_slice()[j * m..(j + 1) * m], v, w);
    let dots: Vec<(f64, f64)> = if m * n < PAR_MIN_ENTRIES {
        (0..n).map(col_dots).collect()
    } else {
        (0..n).into_par_iter().with_min_len(COL_BLOCK).map(col_dots).collect()
    };
    (
        DVector::from_iterator(n, dots.iter().map(|d| d.0)),
        DVector::from_iterator(n, dots.iter().map(|d| d.1)),
    )
}

/// `(c'v, c'w)` with four fixed accumulators per product.
fn dot_pair(c: &[f64], v: &[f64], w: &[f64]) -> (f64, f64) {
    let mut sv = [0.0; 4];
    let mut sw = [0.0; 4];
    let chunks = c.len() / 4;
    for i in 0..chunks {
        for l in 0..4 {
            let idx = 4 * i + l;
            sv[l] += c[idx] * v[idx];
            sw[l] += c[idx] * w[idx];
        }
    }
    let mut tv = (sv[0] + sv[1]) + (sv[2] + sv[3]);
    let mut tw = (sw[0] + sw[1]) + (sw[2] + sw[3]);
    for idx in 4 * chunks..c.len() {
        tv += c[idx] * v[idx];
        tw += c[idx] * w[idx];
    }
    (tv, tw)
}

/// `A'A`.
pub fn gram(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, n) = a.shape();
    if m * n < PAR_MIN_ENTRIES {
        return a.tr_mul(a);
    }
    let blocks = m.div_ceil(GRAM_ROW_BLOCK);
    let partial: Vec<DMatrix<f64>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let r0 = b * GRAM_ROW_BLOCK;
            let rows = a.rows(r0, GRAM_ROW_BLOCK.min(m - r0));
            rows.tr_mul(&rows)
        })
        .collect();
    let mut out = DMatrix::zeros(n, n);
    for g in &partial {
        out += g;
    }
    out
}

/// `sum_i (a_i - c)(a_i - c)'` over the rows `a_i` of `A`.
pub fn centered_gram(a: &DMatrix<f64>, c: &DVector<f64>) -> DMatrix<f64> {
    let (m, n) = a.shape();
    assert_eq!(c.len(), n, "centre has the wrong length");
    let blocks = m.div_ceil(GRAM_ROW_BLOCK).max(1);
    let block = |b: usize| {
        let r0 = b * GRAM_ROW_BLOCK;
        let mut rows = a.rows(r0, GRAM_ROW_BLOCK.min(m - r0)).into_owned();
        for mut row in rows.row_iter_mut() {
            row -= c.transpose();
        }
        rows.tr_mul(&rows)
    };
    let partial: Vec<DMatrix<f64>> = if m * n < PAR_MIN_ENTRIES {
        (0..blocks).map(block).collect()
    } else {
        (0..blocks).into_par_iter().map(block).collect()
    };
    let mut out = DMatrix::zeros(n, n);
    for g in &partial {
        out += g;
    }
    out
}

/// Cached Cholesky factor of `M = P + rho C` with `C = A'A + B'B`.
#[derive(Debug, Clone)]
pub struct KktFactor {
    chol: Cholesky<f64, Dyn>,
    rho: f64,
}

impl KktFactor {
    /// Factorizes `P + rho * gram`; fails when the sum is not positive definite.
    pub fn new(p: &Quadratic, gram: &DMatrix<f64>, rho: f64) -> Result<Self> {
        let mut m = gram * rho;
        p.add_to(&mut m);
        let chol = Cholesky::new(m).ok_or(CvqpError::NotPositiveDefinite)?;
        Ok(KktFactor { chol, rho })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Solves `M x = rhs` with the cached factor.
    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(rhs)
    }
}

/// Factorizes `M = P + rho (A'A + B'B)`.
pub fn factorize(p: &Quadratic, a: &DMatrix<f64>, b: &DMatrix<f64>, rho: f64) -> Result<KktFactor> {
    let c = gram(a) + gram(b);
    KktFactor::new(p, &c, rho)
}
