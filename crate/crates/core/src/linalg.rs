//! Exact Gaussian elimination over the rational-function scalar field.
//!
//! Nothing here is numeric: every entry is an exact `Scalar`, so reduced row
//! echelon form, consistency, and uniqueness of solutions are decided exactly.
//! Systems that arise in the engine are small (weight spaces at desk scale),
//! so dense rows are fine.

use crate::scalars::Scalar;
use crate::{EngineError, Result};

/// Reduce `rows` in place to reduced row echelon form with leftmost pivots.
/// Zero rows are dropped; returns the pivot column of each remaining row,
/// in increasing order.
pub fn rref_in_place(rows: &mut Vec<Vec<Scalar>>) -> Vec<usize> {
    let ncols = rows.first().map_or(0, |r| r.len());
    let mut pivots = Vec::new();
    let mut rank = 0usize;
    for col in 0..ncols {
        let Some(pivot_row) = (rank..rows.len()).find(|&r| !rows[r][col].is_zero()) else {
            continue;
        };
        rows.swap(rank, pivot_row);
        let inv = rows[rank][col].recip();
        for c in col..ncols {
            let scaled = &rows[rank][c] * &inv;
            rows[rank][c] = scaled;
        }
        for r in 0..rows.len() {
            if r != rank && !rows[r][col].is_zero() {
                let factor = rows[r][col].clone();
                for c in col..ncols {
                    let delta = &factor * &rows[rank][c];
                    let updated = &rows[r][c] - &delta;
                    rows[r][c] = updated;
                }
            }
        }
        pivots.push(col);
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    rows.truncate(rank);
    pivots
}

/// Solve A·x = b for each column of `b`, where `a` is given by rows (m×n) and
/// `b` by rows (m×k).  Errors unless the system is consistent with a unique
/// solution (all n columns are pivot columns).  Returns x by rows (n×k).
pub fn solve_unique(a: &[Vec<Scalar>], b: &[Vec<Scalar>]) -> Result<Vec<Vec<Scalar>>> {
    let m = a.len();
    if b.len() != m {
        return Err(EngineError::SingularSystem("rhs row count mismatch".into()));
    }
    let n = a.first().map_or(0, |r| r.len());
    let k = b.first().map_or(0, |r| r.len());
    let mut aug: Vec<Vec<Scalar>> = (0..m)
        .map(|r| {
            let mut row = a[r].clone();
            row.extend(b[r].iter().cloned());
            row
        })
        .collect();
    let pivots = rref_in_place(&mut aug);
    for &p in &pivots {
        if p >= n {
            return Err(EngineError::SingularSystem("inconsistent linear system".into()));
        }
    }
    if pivots.len() < n {
        return Err(EngineError::SingularSystem(format!(
            "underdetermined system: rank {} of {} unknowns",
            pivots.len(),
            n
        )));
    }
    // pivots are exactly 0..n in order
    let mut x = vec![vec![Scalar::zero(); k]; n];
    for (r, &p) in pivots.iter().enumerate() {
        for c in 0..k {
            x[p][c] = aug[r][n + c].clone();
        }
    }
    Ok(x)
}

/// Matrix-vector product with `a` given by rows.
pub fn mat_vec(a: &[Vec<Scalar>], x: &[Scalar]) -> Vec<Scalar> {
    a.iter()
        .map(|row| {
            let mut s = Scalar::zero();
            for (c, e) in row.iter().enumerate() {
                if !e.is_zero() && !x[c].is_zero() {
                    s += e * &x[c];
                }
            }
            s
        })
        .collect()
}
