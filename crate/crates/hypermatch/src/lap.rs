//! Exact rectangular linear assignment by the Hungarian method.
//!
//! Profit maximization over the assignment set: every source row gets exactly
//! one target column, every column is used at most once. Maximization is
//! reduced to square minimization by negating profits and padding with
//! zero-cost dummy rows; the augmenting-path core scans rows and columns in
//! ascending order, so ties resolve deterministically.

use crate::error::{Error, Result};
use crate::tensor3::ProblemDims;
use crate::Scalar;

/// An element of the assignment set: `cols[i]` is the target column of source
/// row `i`, all columns pairwise distinct.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AssignmentVec {
    dims: ProblemDims,
    cols: Vec<u32>,
}

impl AssignmentVec {
    pub fn new(dims: ProblemDims, cols: Vec<u32>) -> Result<Self> {
        if cols.len() != dims.n1() {
            return Err(Error::NotAnAssignment);
        }
        let mut used = vec![false; dims.n2()];
        for &j in &cols {
            let j = j as usize;
            if j >= dims.n2() || used[j] {
                return Err(Error::NotAnAssignment);
            }
            used[j] = true;
        }
        Ok(Self { dims, cols })
    }

    /// Row `i` mapped to column `i`.
    pub fn identity(dims: ProblemDims) -> Self {
        let cols = (0..dims.n1() as u32).collect();
        Self { dims, cols }
    }

    pub fn dims(&self) -> ProblemDims {
        self.dims
    }

    pub fn cols(&self) -> &[u32] {
        &self.cols
    }

    /// Linear indices of the ones in the induced binary vector, ascending.
    pub fn support(&self) -> Vec<usize> {
        self.cols
            .iter()
            .enumerate()
            .map(|(i, &j)| self.dims.linear(i, j as usize))
            .collect()
    }

    /// The induced binary vector of length `n1 * n2`.
    pub fn to_dense<T: Scalar>(&self) -> Vec<T> {
        let mut v = vec![T::zero(); self.dims.n()];
        for a in self.support() {
            v[a] = T::one();
        }
        v
    }

    /// Parses an exactly-binary vector back into an assignment.
    pub fn from_binary<T: Scalar>(dims: ProblemDims, v: &[T]) -> Result<Self> {
        if v.len() != dims.n() {
            return Err(Error::DimensionMismatch {
                expected: dims.n(),
                got: v.len(),
            });
        }
        let mut cols = vec![u32::MAX; dims.n1()];
        for (a, &x) in v.iter().enumerate() {
            if x == T::zero() {
                continue;
            }
            if x != T::one() {
                return Err(Error::NotAnAssignment);
            }
            let (i, j) = dims.unpack(a);
            if cols[i] != u32::MAX {
                return Err(Error::NotAnAssignment);
            }
            cols[i] = j as u32;
        }
        if cols.contains(&u32::MAX) {
            return Err(Error::NotAnAssignment);
        }
        Self::new(dims, cols)
    }

    /// Profit of this assignment under a row-major `n1 x n2` profit matrix.
    pub fn value_in<T: Scalar>(&self, profit: &[T]) -> T {
        self.cols
            .iter()
            .enumerate()
            .map(|(i, &j)| profit[i * self.dims.n2() + j as usize])
            .fold(T::zero(), |a, b| a + b)
    }
}

/// Maximizes `sum_i profit[i, cols[i]]` over assignments; globally optimal.
///
/// `profit` is row-major `n1 x n2` and may contain negative values.
pub fn solve_lap<T: Scalar>(dims: ProblemDims, profit: &[T]) -> Result<(AssignmentVec, T)> {
    let (n1, n2) = (dims.n1(), dims.n2());
    if profit.len() != n1 * n2 {
        return Err(Error::DimensionMismatch {
            expected: n1 * n2,
            got: profit.len(),
        });
    }
    for (idx, &p) in profit.iter().enumerate() {
        if !p.is_finite() {
            return Err(Error::NonFiniteEntry {
                row: idx / n2,
                col: idx % n2,
            });
        }
    }

    // Square minimization problem: cost = -profit, dummy rows cost zero.
    let dim = n2;
    let cost = |i: usize, j: usize| -> T {
        if i < n1 {
            -profit[i * n2 + j]
        } else {
            T::zero()
        }
    };

    const FREE: usize = usize::MAX;
    // p[j] = row matched to column j; column `dim` is the virtual root.
    let mut p = vec![FREE; dim + 1];
    let mut u = vec![T::zero(); dim];
    let mut v = vec![T::zero(); dim];

    for i in 0..dim {
        p[dim] = i;
        let mut j0 = dim;
        let mut minv = vec![T::infinity(); dim];
        let mut way = vec![dim; dim];
        let mut used = vec![false; dim + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let u0 = if i0 < dim { u[i0] } else { T::zero() };
            let mut delta = T::infinity();
            let mut j1 = dim;
            for j in 0..dim {
                if used[j] {
                    continue;
                }
                let cur = cost(i0, j) - u0 - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            debug_assert!(j1 < dim, "profit matrix must admit a perfect matching");
            for j in 0..dim {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            u[p[dim]] += delta;
            j0 = j1;
            if p[j0] == FREE {
                break;
            }
        }
        // Augment along the alternating path back to the virtual column.
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == dim {
                break;
            }
        }
    }

    let mut cols = vec![0u32; n1];
    for j in 0..dim {
        let row = p[j];
        if row < n1 {
            cols[row] = j as u32;
        }
    }
    let assignment = AssignmentVec::new(dims, cols)?;
    let value = assignment.value_in(profit);
    Ok((assignment, value))
}

/// Maximizes `<x, g>` over the assignment set: reshapes `g` row-major to
/// `n1 x n2` and solves the LAP.
pub fn argmax_over_m<T: Scalar>(g: &[T], dims: ProblemDims) -> Result<(AssignmentVec, T)> {
    if g.len() != dims.n() {
        return Err(Error::DimensionMismatch {
            expected: dims.n(),
            got: g.len(),
        });
    }
    solve_lap(dims, g)
}
