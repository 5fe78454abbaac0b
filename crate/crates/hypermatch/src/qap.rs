//! Monotonic-ascent subroutines for the quadratic assignment step.
//!
//! Both routines take a symmetric nonnegative operator `A` and a starting
//! assignment and return an assignment whose quadratic value `<y, A y>` is at
//! least the start's. That single guarantee (the ascent contract) is all the
//! outer block-coordinate solvers need; neither routine is required to solve
//! the QAP optimally. A final wrapper enforces the contract by falling back
//! to the start on non-improvement.

use crate::error::Result;
use crate::lap::{argmax_over_m, AssignmentVec};
use crate::modform::ModMatrix;
use crate::tensor3::{ProblemDims, SliceMatrix};
use crate::{cast, Scalar};

pub const IPFP_DEFAULT_MAX_ITER: usize = 50;
pub const MPM_DEFAULT_MAX_ITER: usize = 100;

/// Relative stagnation tolerance for both routines.
const STAGNATION_TOL: f64 = 1e-10;

/// Symmetric nonnegative operator on correspondence vectors.
///
/// `write_row` materializes one row at a time so max-pooling never needs the
/// dense matrix.
pub trait SymmetricOp<T: Scalar> {
    fn n(&self) -> usize;
    fn matvec(&self, v: &[T]) -> Vec<T>;
    fn write_row(&self, r: usize, out: &mut [T]);

    /// `<y, A z>`.
    fn quad(&self, y: &[T], z: &[T]) -> T {
        let az = self.matvec(z);
        y.iter()
            .zip(&az)
            .map(|(&a, &b)| a * b)
            .fold(T::zero(), |a, b| a + b)
    }
}

impl<T: Scalar> SymmetricOp<T> for ModMatrix<T> {
    fn n(&self) -> usize {
        ModMatrix::n(self)
    }
    fn matvec(&self, v: &[T]) -> Vec<T> {
        ModMatrix::matvec(self, v)
    }
    fn write_row(&self, r: usize, out: &mut [T]) {
        ModMatrix::write_row(self, r, out)
    }
    fn quad(&self, y: &[T], z: &[T]) -> T {
        ModMatrix::quad(self, y, z)
    }
}

impl<T: Scalar> SymmetricOp<T> for SliceMatrix<T> {
    fn n(&self) -> usize {
        SliceMatrix::n(self)
    }
    fn matvec(&self, v: &[T]) -> Vec<T> {
        SliceMatrix::matvec(self, v)
    }
    fn write_row(&self, r: usize, out: &mut [T]) {
        for o in out.iter_mut() {
            *o = T::zero();
        }
        for (c, w) in self.row(r) {
            out[c] = w;
        }
    }
    fn quad(&self, y: &[T], z: &[T]) -> T {
        SliceMatrix::quad(self, y, z)
    }
}

/// Dense symmetric matrix, used for pairwise affinities and in tests.
#[derive(Clone, Debug)]
pub struct DenseSym<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseSym<T> {
    /// Validates symmetry to `1e-10` relative.
    pub fn new(n: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != n * n {
            return Err(crate::Error::DimensionMismatch {
                expected: n * n,
                got: data.len(),
            });
        }
        let tol: T = cast(1e-10);
        let mut scale = T::one();
        for &v in &data {
            if v.abs() > scale {
                scale = v.abs();
            }
        }
        for s in 0..n {
            for t in (s + 1)..n {
                if (data[s * n + t] - data[t * n + s]).abs() > tol * scale {
                    return Err(crate::Error::NotSymmetric);
                }
            }
        }
        Ok(Self { n, data })
    }

    pub fn get(&self, s: usize, t: usize) -> T {
        self.data[s * self.n + t]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }
}

impl<T: Scalar> SymmetricOp<T> for DenseSym<T> {
    fn n(&self) -> usize {
        self.n
    }
    fn matvec(&self, v: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|r| {
                let row = &self.data[r * self.n..(r + 1) * self.n];
                row.iter()
                    .zip(v)
                    .map(|(&a, &b)| a * b)
                    .fold(T::zero(), |a, b| a + b)
            })
            .collect()
    }
    fn write_row(&self, r: usize, out: &mut [T]) {
        out.copy_from_slice(&self.data[r * self.n..(r + 1) * self.n]);
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| x * y)
        .fold(T::zero(), |a, b| a + b)
}

fn stagnated<T: Scalar>(new: T, old: T) -> bool {
    (new - old).abs() <= cast::<T>(STAGNATION_TOL) * new.abs().max(T::one())
}

/// Returns the better of `candidate` and `start` under `<y, A y>`; this is
/// what turns a heuristic into a contract-satisfying subroutine.
fn ascent_guard<T: Scalar, A: SymmetricOp<T> + ?Sized>(
    op: &A,
    start: &AssignmentVec,
    candidate: AssignmentVec,
) -> AssignmentVec {
    let qs = op.quad(&start.to_dense::<T>(), &start.to_dense::<T>());
    let cv = candidate.to_dense::<T>();
    if op.quad(&cv, &cv) >= qs {
        candidate
    } else {
        start.clone()
    }
}

/// Integer projected fixed point: alternate a linear-assignment projection of
/// the gradient with an exact line search on the quadratic, then project the
/// final iterate back to an assignment.
pub fn psi_ipfp<T: Scalar, A: SymmetricOp<T> + ?Sized>(
    op: &A,
    y0: &AssignmentVec,
    max_iter: usize,
) -> Result<AssignmentVec> {
    let dims = y0.dims();
    let mut x = y0.to_dense::<T>();
    let mut best = y0.clone();
    let mut best_q = op.quad(&x, &x);
    let mut q_cur = best_q;
    for _ in 0..max_iter {
        let ax = op.matvec(&x);
        let (b, _) = argmax_over_m(&ax, dims)?;
        let bv = b.to_dense::<T>();
        let qb = op.quad(&bv, &bv);
        if qb > best_q {
            best_q = qb;
            best = b.clone();
        }
        let d: Vec<T> = bv.iter().zip(&x).map(|(&p, &q)| p - q).collect();
        let c1 = dot(&d, &ax);
        let c2 = op.quad(&d, &d);
        if c2 >= T::zero() {
            // quadratic is non-concave along d: the maximum sits at t = 1
            if d.iter().all(|&v| v == T::zero()) {
                break;
            }
            x = bv;
        } else {
            let t = (-c1 / c2).min(T::one());
            if t <= T::zero() {
                break;
            }
            for (xi, di) in x.iter_mut().zip(&d) {
                *xi += t * *di;
            }
        }
        let q_new = op.quad(&x, &x);
        if stagnated(q_new, q_cur) {
            q_cur = q_new;
            break;
        }
        q_cur = q_new;
    }
    let _ = q_cur;
    let (proj, _) = argmax_over_m(&x, dims)?;
    let pv = proj.to_dense::<T>();
    if op.quad(&pv, &pv) > best_q {
        best = proj;
    }
    Ok(ascent_guard(op, y0, best))
}

/// Max-pooling power iteration: each candidate pools the best support it can
/// get from every other source point, the iterate is renormalized, and the
/// final vector is projected to an assignment by a LAP.
pub fn psi_mpm<T: Scalar, A: SymmetricOp<T> + ?Sized>(
    op: &A,
    y0: &AssignmentVec,
    max_iter: usize,
) -> Result<AssignmentVec> {
    let dims = y0.dims();
    let (n1, n2) = (dims.n1(), dims.n2());
    let n = dims.n();
    let mut x = y0.to_dense::<T>();
    let mut row = vec![T::zero(); n];
    for _ in 0..max_iter {
        let mut next = vec![T::zero(); n];
        for a in 0..n {
            op.write_row(a, &mut row);
            let (ia, _) = dims.unpack(a);
            let mut acc = x[a] * row[a];
            for ip in 0..n1 {
                if ip == ia {
                    continue;
                }
                let base = ip * n2;
                let mut group_best = T::zero();
                for j in 0..n2 {
                    let b = base + j;
                    let v = x[b] * row[b];
                    if v > group_best {
                        group_best = v;
                    }
                }
                acc += group_best;
            }
            next[a] = acc;
        }
        let norm = dot(&next, &next).sqrt();
        if norm == T::zero() {
            break;
        }
        for v in next.iter_mut() {
            *v /= norm;
        }
        let delta = x
            .iter()
            .zip(&next)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), |a, b| a.max(b));
        x = next;
        if delta <= cast::<T>(STAGNATION_TOL) {
            break;
        }
    }
    let (proj, _) = argmax_over_m(&x, dims)?;
    Ok(ascent_guard(op, y0, proj))
}

/// Which ascent subroutine a solver uses for its quadratic step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PsiKind {
    Ipfp,
    Mpm,
}

impl PsiKind {
    pub fn run<T: Scalar, A: SymmetricOp<T> + ?Sized>(
        &self,
        op: &A,
        y0: &AssignmentVec,
    ) -> Result<AssignmentVec> {
        match self {
            PsiKind::Ipfp => psi_ipfp(op, y0, IPFP_DEFAULT_MAX_ITER),
            PsiKind::Mpm => psi_mpm(op, y0, MPM_DEFAULT_MAX_ITER),
        }
    }
}

/// Deterministic seed for the quadratic step when the incoming block is not
/// an assignment (only the all-ones start): the LAP projection of `A 1`.
pub fn seed_assignment<T: Scalar, A: SymmetricOp<T> + ?Sized>(
    op: &A,
    current: &[T],
    dims: ProblemDims,
) -> Result<AssignmentVec> {
    if let Ok(a) = AssignmentVec::from_binary(dims, current) {
        return Ok(a);
    }
    let profile = op.matvec(current);
    Ok(argmax_over_m(&profile, dims)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modform::ModifiedForm;
    use crate::oracle::EnumeratedM;
    use crate::tensor3::SparseTensor3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn dims(n1: usize, n2: usize) -> ProblemDims {
        ProblemDims::new(n1, n2).unwrap()
    }

    fn zero_op(n: usize) -> DenseSym<f64> {
        DenseSym::new(n, vec![0.0; n * n]).unwrap()
    }

    #[test]
    fn zero_matrix_returns_start() {
        let d = dims(2, 2);
        let y0 = AssignmentVec::new(d, vec![1, 0]).unwrap();
        let op = zero_op(d.n());
        assert_eq!(psi_ipfp(&op, &y0, 50).unwrap(), y0);
        assert_eq!(psi_mpm(&op, &y0, 100).unwrap(), y0);
    }

    fn random_mod_matrix(rng: &mut ChaCha12Rng, d: ProblemDims, alpha: f64) -> ModMatrix<f64> {
        let t = SparseTensor3::<f64>::random(d, 3 * d.n(), rng);
        let m = ModifiedForm::new(&t, alpha);
        let x: Vec<f64> = (0..d.n()).map(|_| rng.random::<f64>()).collect();
        m.matrix(&x).unwrap()
    }

    #[test]
    fn ascent_contract_holds_on_random_cases() {
        let mut rng = ChaCha12Rng::seed_from_u64(101);
        let d = dims(3, 4);
        let ms = EnumeratedM::new(d).unwrap();
        for case in 0..200 {
            let alpha = if case % 2 == 0 { 0.0 } else { 0.3 };
            let op = random_mod_matrix(&mut rng, d, alpha);
            let y0 = ms.assignments()[rng.random_range(0..ms.assignments().len())].clone();
            let y0v = y0.to_dense::<f64>();
            let q0 = op.quad(&y0v, &y0v);
            for out in [
                psi_ipfp(&op, &y0, IPFP_DEFAULT_MAX_ITER).unwrap(),
                psi_mpm(&op, &y0, MPM_DEFAULT_MAX_ITER).unwrap(),
            ] {
                let ov = out.to_dense::<f64>();
                let q = op.quad(&ov, &ov);
                let scale = q.abs().max(1.0);
                assert!(q >= q0 - 1e-12 * scale, "case {case}: {q} < {q0}");
            }
        }
    }

    #[test]
    fn ipfp_reaches_enumerated_max_on_small_instances() {
        let mut rng = ChaCha12Rng::seed_from_u64(55);
        let d = dims(2, 2);
        let ms = EnumeratedM::new(d).unwrap();
        let mut hits = 0;
        let total = 40;
        for _ in 0..total {
            let op = random_mod_matrix(&mut rng, d, 0.0);
            let y0 = ms.assignments()[0].clone();
            let out = psi_ipfp(&op, &y0, IPFP_DEFAULT_MAX_ITER).unwrap();
            let ov = out.to_dense::<f64>();
            let q = op.quad(&ov, &ov);
            let best = ms
                .assignments()
                .iter()
                .map(|a| {
                    let v = a.to_dense::<f64>();
                    op.quad(&v, &v)
                })
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(q <= best + 1e-9 * best.abs().max(1.0));
            if (q - best).abs() <= 1e-9 * best.abs().max(1.0) {
                hits += 1;
            }
        }
        assert!(hits * 2 >= total, "IPFP hit the max only {hits}/{total} times");
    }

    #[test]
    fn mpm_recovers_rank_one_structure() {
        let d = dims(2, 3);
        let n = d.n();
        // v >= 0 encodes a clear best assignment; A = v v^T with zero diagonal.
        let v = [5.0, 0.5, 0.1, 0.2, 4.0, 0.3];
        let mut a = vec![0.0; n * n];
        for s in 0..n {
            for t in 0..n {
                if s != t {
                    a[s * n + t] = v[s] * v[t];
                }
            }
        }
        let op = DenseSym::new(n, a).unwrap();
        let ms = EnumeratedM::new(d).unwrap();
        let worst = ms
            .assignments()
            .iter()
            .min_by(|p, q| {
                let pv = p.to_dense::<f64>();
                let qv = q.to_dense::<f64>();
                op.quad(&pv, &pv).partial_cmp(&op.quad(&qv, &qv)).unwrap()
            })
            .unwrap()
            .clone();
        let out = psi_mpm(&op, &worst, MPM_DEFAULT_MAX_ITER).unwrap();
        let best = ms
            .assignments()
            .iter()
            .map(|x| {
                let xv = x.to_dense::<f64>();
                op.quad(&xv, &xv)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let ov = out.to_dense::<f64>();
        assert!((op.quad(&ov, &ov) - best).abs() <= 1e-9 * best.max(1.0));
    }

    #[test]
    fn determinism() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let d = dims(3, 3);
        let op = random_mod_matrix(&mut rng, d, 0.1);
        let y0 = AssignmentVec::identity(d);
        let a = psi_mpm(&op, &y0, MPM_DEFAULT_MAX_ITER).unwrap();
        let b = psi_mpm(&op, &y0, MPM_DEFAULT_MAX_ITER).unwrap();
        assert_eq!(a, b);
        let c = psi_ipfp(&op, &y0, IPFP_DEFAULT_MAX_ITER).unwrap();
        let e = psi_ipfp(&op, &y0, IPFP_DEFAULT_MAX_ITER).unwrap();
        assert_eq!(c, e);
    }
}
