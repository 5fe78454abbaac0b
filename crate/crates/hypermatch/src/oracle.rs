//! Brute-force references for tests and acceptance checks.
//!
//! Everything here is an independent straight-line implementation: the dense
//! tensor is materialized in full, assignments are enumerated exhaustively,
//! and the structured modification is evaluated with an explicit double loop
//! over the perturbed basis vectors. None of it shares code with the sparse
//! contraction paths it is used to check. Size guards are hard errors.

use crate::error::{Error, Result};
use crate::lap::AssignmentVec;
use crate::tensor3::{ProblemDims, SparseTensor3};
use crate::{cast, Scalar};

/// Largest `n` for which the dense `n^3` array is materialized.
pub const DENSE_N_LIMIT: usize = 20;
/// Largest assignment-set size enumerated for score maximization.
pub const SCORE_ENUM_LIMIT: u128 = 100_000;
/// Largest tuple count enumerated for form maximization.
pub const FORM_ENUM_LIMIT: u128 = 1_000_000;

/// Every assignment of the given dimensions, in lexicographic column order.
#[derive(Clone, Debug)]
pub struct EnumeratedM {
    dims: ProblemDims,
    assignments: Vec<AssignmentVec>,
}

/// `n2! / (n2 - n1)!`, the number of assignments.
pub fn assignment_count(dims: ProblemDims) -> u128 {
    let (n1, n2) = (dims.n1() as u128, dims.n2() as u128);
    let mut c = 1u128;
    for k in 0..n1 {
        c = c.saturating_mul(n2 - k);
    }
    c
}

impl EnumeratedM {
    pub fn new(dims: ProblemDims) -> Result<Self> {
        let count = assignment_count(dims);
        if count > SCORE_ENUM_LIMIT {
            return Err(Error::TooLarge {
                what: "assignment count",
                size: count,
                limit: SCORE_ENUM_LIMIT,
            });
        }
        let mut assignments = Vec::with_capacity(count as usize);
        let mut cols = vec![0u32; dims.n1()];
        let mut used = vec![false; dims.n2()];
        fn rec(
            dims: ProblemDims,
            row: usize,
            cols: &mut Vec<u32>,
            used: &mut Vec<bool>,
            out: &mut Vec<AssignmentVec>,
        ) {
            if row == dims.n1() {
                out.push(AssignmentVec::new(dims, cols.clone()).expect("valid by construction"));
                return;
            }
            for j in 0..dims.n2() {
                if used[j] {
                    continue;
                }
                used[j] = true;
                cols[row] = j as u32;
                rec(dims, row + 1, cols, used, out);
                used[j] = false;
            }
        }
        rec(dims, 0, &mut cols, &mut used, &mut assignments);
        Ok(Self { dims, assignments })
    }

    pub fn dims(&self) -> ProblemDims {
        self.dims
    }

    pub fn assignments(&self) -> &[AssignmentVec] {
        &self.assignments
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }
}

/// Full `n^3` symmetric array of a sparse tensor.
pub fn dense_array<T: Scalar>(t: &SparseTensor3<T>) -> Result<Vec<T>> {
    let n = t.dims().n();
    if n > DENSE_N_LIMIT {
        return Err(Error::TooLarge {
            what: "dense tensor side n",
            size: n as u128,
            limit: DENSE_N_LIMIT as u128,
        });
    }
    let mut dense = vec![T::zero(); n * n * n];
    for e in t.entries() {
        let (a, b, c) = (e.a as usize, e.b as usize, e.c as usize);
        for (i, j, k) in [
            (a, b, c),
            (a, c, b),
            (b, a, c),
            (b, c, a),
            (c, a, b),
            (c, b, a),
        ] {
            dense[(i * n + j) * n + k] = e.w;
        }
    }
    Ok(dense)
}

/// `F(x, y, z)` summed over all `n^3` dense terms.
pub fn dense_eval<T: Scalar>(t: &SparseTensor3<T>, x: &[T], y: &[T], z: &[T]) -> Result<T> {
    let n = t.dims().n();
    for v in [x, y, z] {
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: v.len(),
            });
        }
    }
    let dense = dense_array(t)?;
    let mut acc = T::zero();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                acc += dense[(i * n + j) * n + k] * x[i] * y[j] * z[k];
            }
        }
    }
    Ok(acc)
}

/// Gradient `g[r] = sum_{s,t} F_rst y[s] z[t]` from the dense array.
pub fn dense_grad<T: Scalar>(t: &SparseTensor3<T>, y: &[T], z: &[T]) -> Result<Vec<T>> {
    let n = t.dims().n();
    let dense = dense_array(t)?;
    let mut g = vec![T::zero(); n];
    for r in 0..n {
        for s in 0..n {
            for u in 0..n {
                g[r] += dense[(r * n + s) * n + u] * y[s] * z[u];
            }
        }
    }
    Ok(g)
}

/// `F^4(x, y, z, w)` of the lifted fourth-order tensor
/// `F4_ijkl = F_ijk + F_ijl + F_ikl + F_jkl`, summed over all `n^4` terms.
pub fn dense_lifted_eval<T: Scalar>(
    t: &SparseTensor3<T>,
    x: &[T],
    y: &[T],
    z: &[T],
    w: &[T],
) -> Result<T> {
    let n = t.dims().n();
    let dense = dense_array(t)?;
    let at = |i: usize, j: usize, k: usize| dense[(i * n + j) * n + k];
    let mut acc = T::zero();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let f4 = at(i, j, k) + at(i, j, l) + at(i, k, l) + at(j, k, l);
                    acc += f4 * x[i] * y[j] * z[k] * w[l];
                }
            }
        }
    }
    Ok(acc)
}

/// Straight-line `G(x, y, z)` with explicit basis-vector inner products.
pub fn g_naive<T: Scalar>(x: &[T], y: &[T], z: &[T]) -> T {
    let n = x.len();
    let third: T = cast(1.0 / 3.0);
    let two_thirds: T = cast(2.0 / 3.0);
    let mut acc = T::zero();
    for i in 0..n {
        let mut dx = T::zero();
        let mut dy = T::zero();
        let mut dz = T::zero();
        for j in 0..n {
            let e = if i == j { third + two_thirds } else { third };
            dx += e * x[j];
            dy += e * y[j];
            dz += e * z[j];
        }
        acc += dx * dy * dz;
    }
    acc
}

/// Modified score `S_alpha(u)` evaluated through the dense array.
fn dense_score_alpha<T: Scalar>(dense: &[T], n: usize, alpha: T, u: &[T]) -> T {
    let mut acc = T::zero();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                acc += dense[(i * n + j) * n + k] * u[i] * u[j] * u[k];
            }
        }
    }
    acc + alpha * g_naive(u, u, u)
}

/// Exhaustive maximization of `S_alpha` over the assignment set. Ties go to
/// the lexicographically smallest assignment.
pub fn brute_score_max<T: Scalar>(
    t: &SparseTensor3<T>,
    alpha: T,
) -> Result<(AssignmentVec, T)> {
    let dims = t.dims();
    let ms = EnumeratedM::new(dims)?;
    let dense = dense_array(t)?;
    let n = dims.n();
    let mut best: Option<(AssignmentVec, T)> = None;
    for a in ms.assignments() {
        let v = a.to_dense::<T>();
        let s = dense_score_alpha(&dense, n, alpha, &v);
        match &best {
            Some((_, bv)) if s <= *bv => {}
            _ => best = Some((a.clone(), s)),
        }
    }
    Ok(best.expect("assignment set is never empty"))
}

/// Exhaustive maximization of `F_alpha(x, y, z)` over all assignment tuples.
pub fn brute_form_max<T: Scalar>(t: &SparseTensor3<T>, alpha: T) -> Result<T> {
    let dims = t.dims();
    let count = assignment_count(dims);
    let tuples = count.saturating_mul(count).saturating_mul(count);
    if tuples > FORM_ENUM_LIMIT {
        return Err(Error::TooLarge {
            what: "assignment tuple count",
            size: tuples,
            limit: FORM_ENUM_LIMIT,
        });
    }
    let ms = EnumeratedM::new(dims)?;
    let dense = dense_array(t)?;
    let n = dims.n();
    let vecs: Vec<Vec<T>> = ms.assignments().iter().map(|a| a.to_dense()).collect();
    let mut best = T::neg_infinity();
    for x in &vecs {
        for y in &vecs {
            for z in &vecs {
                let mut acc = T::zero();
                for i in 0..n {
                    for j in 0..n {
                        for k in 0..n {
                            acc += dense[(i * n + j) * n + k] * x[i] * y[j] * z[k];
                        }
                    }
                }
                acc += alpha * g_naive(x, y, z);
                if acc > best {
                    best = acc;
                }
            }
        }
    }
    Ok(best)
}

/// Smallest eigenvalue of a dense symmetric matrix by cyclic Jacobi
/// rotations; accuracy around `1e-9 * ||A||`.
pub fn min_eig_sym<T: Scalar>(a: &[T], n: usize) -> Result<T> {
    if a.len() != n * n {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            got: a.len(),
        });
    }
    let mut scale = T::zero();
    for &v in a {
        if v.abs() > scale {
            scale = v.abs();
        }
    }
    let sym_tol = cast::<T>(1e-10) * scale.max(T::one());
    for s in 0..n {
        for t in (s + 1)..n {
            if (a[s * n + t] - a[t * n + s]).abs() > sym_tol {
                return Err(Error::NotSymmetric);
            }
        }
    }
    let mut m = a.to_vec();
    let frob = m
        .iter()
        .map(|&v| v * v)
        .fold(T::zero(), |p, q| p + q)
        .sqrt();
    let target = cast::<T>(1e-12) * frob.max(T::one());
    for _sweep in 0..100 {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[p * n + q] * m[p * n + q];
            }
        }
        if off.sqrt() <= target {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == T::zero() {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (cast::<T>(2.0) * apq);
                let t_val = {
                    let sign = if theta >= T::zero() { T::one() } else { -T::one() };
                    sign / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t_val * t_val + T::one()).sqrt();
                let s = t_val * c;
                for k in 0..n {
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[p * n + k];
                    let aqk = m[q * n + k];
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut min = T::infinity();
    for i in 0..n {
        if m[i * n + i] < min {
            min = m[i * n + i];
        }
    }
    Ok(min)
}
