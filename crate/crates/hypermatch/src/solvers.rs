//! Block-coordinate ascent solvers on the (modified) multilinear form.
//!
//! Four schemes share one driver:
//! - third order, pure linear-assignment sweeps (three LAPs per iteration);
//! - third order, one LAP plus one quadratic ascent subroutine;
//! - lifted fourth order with four LAP blocks;
//! - lifted fourth order with two quadratic blocks.
//!
//! Each runs under one of two modification schedules. The two-phase schedule
//! starts at `alpha = 0` and switches once to the convexification bound when
//! ascent stalls. The adaptive (homotopy) schedule instead grows `alpha`
//! just past the smallest value that restores the key inequality for the
//! current iterate, so `alpha` increases strictly and only as needed.
//!
//! Iterates stay inside the assignment set at all times; every candidate
//! accepted into the score trace strictly improves the raw matching score.

use std::io::Write;

use crate::error::{Error, Result};
use crate::lap::{argmax_over_m, AssignmentVec};
use crate::modform::{self, alpha_bound, GMatrix, ModifiedForm};
use crate::qap::{self, DenseSym, PsiKind, SymmetricOp};
use crate::tensor3::{ProblemDims, SliceMatrix, SparseTensor3};
use crate::{cast, Scalar};

/// Starting point for the block variables.
#[derive(Clone, Debug)]
pub enum Start<T> {
    /// The all-ones vector, the customary neutral start.
    AllOnes,
    Custom(Vec<T>),
}

#[derive(Clone, Debug)]
pub struct SolverConfig<T> {
    /// Homotopy increment added on top of the per-tuple threshold. `None`
    /// uses `1e-6` times the convexification bound (or `1e-6` for a zero
    /// tensor).
    pub xi: Option<T>,
    /// Relative tolerance for treating two form values as equal.
    pub eq_tol: T,
    /// Outer-iteration cap; `None` means `10 * n`.
    pub max_outer: Option<usize>,
    pub start: Start<T>,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            xi: None,
            eq_tol: cast(1e-9),
            max_outer: None,
            start: Start::AllOnes,
        }
    }
}

impl<T: Scalar> SolverConfig<T> {
    fn validate(&self, n: usize) -> Result<()> {
        if let Some(xi) = self.xi {
            if xi <= T::zero() || !xi.is_finite() {
                return Err(Error::ConfigInvalid("xi must be positive and finite".into()));
            }
        }
        if self.eq_tol < T::zero() || !self.eq_tol.is_finite() {
            return Err(Error::ConfigInvalid("eq_tol must be nonnegative".into()));
        }
        if self.max_outer == Some(0) {
            return Err(Error::ConfigInvalid("max_outer must be at least 1".into()));
        }
        if let Start::Custom(v) = &self.start {
            if v.len() != n {
                return Err(Error::ConfigInvalid(format!(
                    "start vector has length {}, expected {n}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::ConfigInvalid("start vector must be finite".into()));
            }
        }
        Ok(())
    }

    fn effective_xi(&self, bound: T) -> T {
        match self.xi {
            Some(xi) => xi,
            None => {
                let scale: T = cast(1e-6);
                if bound > T::zero() {
                    scale * bound
                } else {
                    scale
                }
            }
        }
    }
}

/// Outcome of one solver run with full trace capture.
#[derive(Clone, Debug)]
pub struct SolverResult<T> {
    /// Best assignment found.
    pub assignment: AssignmentVec,
    /// Raw matching score `S` of that assignment.
    pub score: T,
    /// Modified form value after each outer iteration.
    pub form_trace: Vec<T>,
    /// `alpha` in effect at each outer iteration; parallel to `form_trace`.
    pub alpha_trace: Vec<T>,
    /// Raw score visible after each outer iteration (`None` until the first
    /// homogeneous candidate exists); parallel to `form_trace`.
    pub score_at: Vec<Option<T>>,
    /// Raw scores of the accepted homogeneous candidates, in order; strictly
    /// increasing except possibly the final element.
    pub score_trace: Vec<T>,
    /// The candidates behind `score_trace`.
    pub u_trace: Vec<AssignmentVec>,
    /// Number of `alpha` changes.
    pub phase_switches: usize,
    /// Outer iterations executed.
    pub iterations: usize,
    /// True when the run ended because a sweep returned identical blocks
    /// (no larger `alpha` can improve such a state).
    pub homogeneous_exit: bool,
}

impl<T: Scalar> SolverResult<T> {
    /// Line-delimited trace `iteration,alpha,form,score` for plotting; the
    /// score column is empty until a homogeneous candidate exists.
    pub fn write_trace<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "iteration,alpha,form,score")?;
        for k in 0..self.form_trace.len() {
            let score = self.score_at[k].map(|s| s.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{}",
                k + 1,
                self.alpha_trace[k],
                self.form_trace[k],
                score
            )?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Schedule {
    TwoPhase,
    Adaptive,
}

/// One block-coordinate scheme: how to sweep the blocks and evaluate the
/// (modified) form they optimize.
trait Scheme<T: Scalar> {
    fn dims(&self) -> ProblemDims;
    fn block_count(&self) -> usize;
    fn sweep(&self, blocks: &[Vec<T>], alpha: T) -> Result<Vec<AssignmentVec>>;
    fn form(&self, blocks: &[Vec<T>], alpha: T) -> Result<T>;
    /// Form value of the homogeneous tuple `(u, ..., u)`.
    fn homo_form(&self, u: &AssignmentVec, alpha: T) -> Result<T>;
    /// Raw third-order matching score of an assignment.
    fn raw_score(&self, u: &AssignmentVec) -> Result<T>;
    /// Per-tuple threshold for the adaptive schedule; candidates are
    /// guaranteed non-homogeneous by the caller.
    fn tuple_threshold(&self, cands: &[AssignmentVec]) -> Result<T>;
    /// Exhaustive maximum of the per-tuple threshold, when small enough to
    /// enumerate.
    fn enumerated_threshold(&self) -> Result<Option<T>>;
    /// `alpha` used by the second phase of the two-phase schedule.
    fn bound_alpha(&self) -> T;
    /// Whether `alpha >= bound_alpha()` provably restores the inequality for
    /// every tuple (true for third order, unknown for the lifted schemes).
    fn bound_is_sufficient(&self) -> bool;
}

fn to_vecs<T: Scalar>(cands: &[AssignmentVec]) -> Vec<Vec<T>> {
    cands.iter().map(|c| c.to_dense()).collect()
}

fn run_scheme<T: Scalar, S: Scheme<T>>(
    scheme: &S,
    schedule: Schedule,
    cfg: &SolverConfig<T>,
) -> Result<SolverResult<T>> {
    let dims = scheme.dims();
    let n = dims.n();
    cfg.validate(n)?;
    let bound = scheme.bound_alpha();
    let xi = cfg.effective_xi(bound);
    let max_outer = cfg.max_outer.unwrap_or(10 * n.max(1));
    let tol = |v: T| cfg.eq_tol * v.abs().max(T::one());

    let start: Vec<T> = match &cfg.start {
        Start::AllOnes => vec![T::one(); n],
        Start::Custom(v) => v.clone(),
    };
    let mut blocks: Vec<Vec<T>> = vec![start; scheme.block_count()];
    let mut alpha = T::zero();
    let mut f_old = scheme.form(&blocks, alpha)?;

    let mut form_trace = Vec::new();
    let mut alpha_trace = Vec::new();
    let mut score_at: Vec<Option<T>> = Vec::new();
    let mut score_trace = Vec::new();
    let mut u_trace: Vec<AssignmentVec> = Vec::new();
    let mut best: Option<(AssignmentVec, T)> = None;
    let mut latest_score: Option<T> = None;
    let mut phase_switches = 0usize;
    let mut homogeneous_exit = false;
    let mut in_second_phase = false;
    let mut enumerated: Option<Option<T>> = None;
    let mut final_u: Option<AssignmentVec> = None;
    let mut last_cands: Option<Vec<AssignmentVec>> = None;
    let mut iterations = 0usize;

    for _ in 0..max_outer {
        let cands = scheme.sweep(&blocks, alpha)?;
        let cand_vecs = to_vecs::<T>(&cands);
        let f_new = scheme.form(&cand_vecs, alpha)?;
        iterations += 1;
        form_trace.push(f_new);
        alpha_trace.push(alpha);

        if (f_new - f_old).abs() > tol(f_new) {
            // Ascent, or (only on the first sweep away from a non-assignment
            // start) a drop; either way the fresh blocks are accepted.
            blocks = cand_vecs;
            f_old = f_new;
            last_cands = Some(cands);
            score_at.push(latest_score);
            continue;
        }

        // Stagnation: pick the best homogeneous candidate.
        let mut u_idx = 0usize;
        let mut u_val = T::neg_infinity();
        for (i, c) in cands.iter().enumerate() {
            let v = scheme.homo_form(c, alpha)?;
            if v > u_val {
                u_val = v;
                u_idx = i;
            }
        }
        let u = cands[u_idx].clone();

        if u_val - f_new > tol(u_val) {
            // Strict improvement in the modified form: restart all blocks
            // from u. Within a fixed alpha this always improves the raw
            // score as well; across alpha changes it need not, so the score
            // trace records only candidates that strictly improve it.
            let sc = scheme.raw_score(&u)?;
            if score_trace.last().is_none_or(|&prev| sc > prev) {
                score_trace.push(sc);
                u_trace.push(u.clone());
                latest_score = Some(sc);
            }
            if best.as_ref().is_none_or(|(_, b)| sc > *b) {
                best = Some((u.clone(), sc));
            }
            let uv = u.to_dense::<T>();
            blocks = vec![uv; scheme.block_count()];
            f_old = u_val;
            last_cands = Some(cands);
            score_at.push(latest_score);
            continue;
        }

        let homogeneous = cands.windows(2).all(|w| w[0] == w[1]);
        if homogeneous {
            homogeneous_exit = true;
            final_u = Some(u);
            score_at.push(latest_score);
            break;
        }

        match schedule {
            Schedule::TwoPhase => {
                if !in_second_phase {
                    in_second_phase = true;
                    phase_switches += 1;
                    alpha = bound;
                    blocks = cand_vecs;
                    f_old = scheme.form(&blocks, alpha)?;
                    last_cands = Some(cands);
                    score_at.push(latest_score);
                    continue;
                }
                final_u = Some(u);
                score_at.push(latest_score);
                break;
            }
            Schedule::Adaptive => {
                if enumerated.is_none() {
                    enumerated = Some(scheme.enumerated_threshold()?);
                }
                let satisfied = match enumerated.as_ref().unwrap() {
                    Some(thr) => alpha >= *thr,
                    None => scheme.bound_is_sufficient() && alpha >= bound,
                };
                if satisfied {
                    final_u = Some(u);
                    score_at.push(latest_score);
                    break;
                }
                // Grow alpha just past the current tuple's threshold. The
                // max with the old value only guards float dust: entering
                // this branch implies the threshold is at least alpha.
                let lam = scheme.tuple_threshold(&cands)?;
                alpha = lam.max(alpha) + xi;
                phase_switches += 1;
                blocks = cand_vecs;
                f_old = scheme.form(&blocks, alpha)?;
                last_cands = Some(cands);
                score_at.push(latest_score);
            }
        }
    }

    let u_final = match final_u {
        Some(u) => u,
        None => {
            // iteration cap: homogenize the last accepted candidates
            let cands = last_cands.ok_or_else(|| {
                Error::ConfigInvalid("max_outer too small to run a single sweep".into())
            })?;
            let mut u_idx = 0usize;
            let mut u_val = T::neg_infinity();
            for (i, c) in cands.iter().enumerate() {
                let v = scheme.homo_form(c, alpha)?;
                if v > u_val {
                    u_val = v;
                    u_idx = i;
                }
            }
            cands[u_idx].clone()
        }
    };
    let sc = scheme.raw_score(&u_final)?;
    score_trace.push(sc);
    u_trace.push(u_final.clone());
    if best.as_ref().is_none_or(|(_, b)| sc > *b) {
        best = Some((u_final, sc));
    }
    if let Some(last) = score_at.last_mut() {
        *last = Some(last.unwrap_or(sc).max(sc));
    }
    let (assignment, score) = best.expect("at least the final candidate exists");
    Ok(SolverResult {
        assignment,
        score,
        form_trace,
        alpha_trace,
        score_at,
        score_trace,
        u_trace,
        phase_switches,
        iterations,
        homogeneous_exit,
    })
}

// ---------------------------------------------------------------------------
// Third-order schemes

struct Lap3<'a, T> {
    tensor: &'a SparseTensor3<T>,
    bound: T,
}

impl<'a, T: Scalar> Lap3<'a, T> {
    fn new(tensor: &'a SparseTensor3<T>) -> Self {
        let bound = alpha_bound(tensor);
        Self { tensor, bound }
    }
}

impl<T: Scalar> Scheme<T> for Lap3<'_, T> {
    fn dims(&self) -> ProblemDims {
        self.tensor.dims()
    }
    fn block_count(&self) -> usize {
        3
    }
    fn sweep(&self, blocks: &[Vec<T>], alpha: T) -> Result<Vec<AssignmentVec>> {
        let m = ModifiedForm::new(self.tensor, alpha);
        let dims = self.dims();
        let (x, _) = argmax_over_m(&m.grad(&blocks[1], &blocks[2])?, dims)?;
        let xv = x.to_dense::<T>();
        let (y, _) = argmax_over_m(&m.grad(&xv, &blocks[2])?, dims)?;
        let yv = y.to_dense::<T>();
        let (z, _) = argmax_over_m(&m.grad(&xv, &yv)?, dims)?;
        Ok(vec![x, y, z])
    }
    fn form(&self, blocks: &[Vec<T>], alpha: T) -> Result<T> {
        ModifiedForm::new(self.tensor, alpha).eval(&blocks[0], &blocks[1], &blocks[2])
    }
    fn homo_form(&self, u: &AssignmentVec, alpha: T) -> Result<T> {
        ModifiedForm::new(self.tensor, alpha).score(&u.to_dense::<T>())
    }
    fn raw_score(&self, u: &AssignmentVec) -> Result<T> {
        self.tensor.score(&u.to_dense::<T>())
    }
    fn tuple_threshold(&self, cands: &[AssignmentVec]) -> Result<T> {
        modform::lambda(self.tensor, &cands[0], &cands[1], &cands[2])
    }
    fn enumerated_threshold(&self) -> Result<Option<T>> {
        max_lambda3(self.tensor)
    }
    fn bound_alpha(&self) -> T {
        self.bound
    }
    fn bound_is_sufficient(&self) -> bool {
        true
    }
}

struct Psi3<'a, T> {
    tensor: &'a SparseTensor3<T>,
    psi: PsiKind,
    bound: T,
}

impl<'a, T: Scalar> Psi3<'a, T> {
    fn new(tensor: &'a SparseTensor3<T>, psi: PsiKind) -> Self {
        let bound = alpha_bound(tensor);
        Self { tensor, psi, bound }
    }
}

impl<T: Scalar> Scheme<T> for Psi3<'_, T> {
    fn dims(&self) -> ProblemDims {
        self.tensor.dims()
    }
    fn block_count(&self) -> usize {
        2
    }
    fn sweep(&self, blocks: &[Vec<T>], alpha: T) -> Result<Vec<AssignmentVec>> {
        let m = ModifiedForm::new(self.tensor, alpha);
        let dims = self.dims();
        let (x, _) = argmax_over_m(&m.grad(&blocks[1], &blocks[1])?, dims)?;
        let a = m.matrix(&x.to_dense::<T>())?;
        let seed = qap::seed_assignment(&a, &blocks[1], dims)?;
        let y = self.psi.run(&a, &seed)?;
        Ok(vec![x, y])
    }
    fn form(&self, blocks: &[Vec<T>], alpha: T) -> Result<T> {
        ModifiedForm::new(self.tensor, alpha).eval(&blocks[0], &blocks[1], &blocks[1])
    }
    fn homo_form(&self, u: &AssignmentVec, alpha: T) -> Result<T> {
        ModifiedForm::new(self.tensor, alpha).score(&u.to_dense::<T>())
    }
    fn raw_score(&self, u: &AssignmentVec) -> Result<T> {
        self.tensor.score(&u.to_dense::<T>())
    }
    fn tuple_threshold(&self, cands: &[AssignmentVec]) -> Result<T> {
        modform::lambda(self.tensor, &cands[0], &cands[1], &cands[1])
    }
    fn enumerated_threshold(&self) -> Result<Option<T>> {
        max_lambda3(self.tensor)
    }
    fn bound_alpha(&self) -> T {
        self.bound
    }
    fn bound_is_sufficient(&self) -> bool {
        true
    }
}

/// Exhaustive maximum of the per-tuple threshold over non-homogeneous
/// assignment tuples; `None` when the tuple count exceeds the enumeration
/// budget.
fn max_lambda3<T: Scalar>(tensor: &SparseTensor3<T>) -> Result<Option<T>> {
    let dims = tensor.dims();
    let count = crate::oracle::assignment_count(dims);
    if count.saturating_mul(count).saturating_mul(count) > crate::oracle::FORM_ENUM_LIMIT {
        return Ok(None);
    }
    let ms = crate::oracle::EnumeratedM::new(dims)?;
    let vecs: Vec<Vec<T>> = ms.assignments().iter().map(|a| a.to_dense()).collect();
    let selfs: Vec<T> = vecs
        .iter()
        .map(|v| tensor.score(v))
        .collect::<Result<_>>()?;
    let g_homog = modform::g_eval(&vecs[0], &vecs[0], &vecs[0])?;
    let mut best = T::neg_infinity();
    for (ix, x) in vecs.iter().enumerate() {
        for (iy, y) in vecs.iter().enumerate() {
            for (iz, z) in vecs.iter().enumerate() {
                if ix == iy && iy == iz {
                    continue;
                }
                let f = tensor.eval(x, y, z)?;
                let smax = selfs[ix].max(selfs[iy]).max(selfs[iz]);
                let denom = g_homog - modform::g_eval(x, y, z)?;
                debug_assert!(denom > T::zero());
                let lam = (f - smax) / denom;
                if lam > best {
                    best = lam;
                }
            }
        }
    }
    Ok(Some(best))
}

// ---------------------------------------------------------------------------
// Lifted fourth-order schemes
//
// The lifted tensor F4_ijkl = F_ijk + F_ijl + F_ikl + F_jkl is never
// materialized: with s(v) = sum_i v_i,
//   F4(x, y, z, w) = s(w) F(x,y,z) + s(z) F(x,y,w) + s(y) F(x,z,w) + s(x) F(y,z,w).

fn vec_sum<T: Scalar>(v: &[T]) -> T {
    v.iter().copied().fold(T::zero(), |a, b| a + b)
}

/// `F4(x, y, z, w)` of the lifted tensor via the four-term identity.
pub fn lifted_eval<T: Scalar>(
    tensor: &SparseTensor3<T>,
    x: &[T],
    y: &[T],
    z: &[T],
    w: &[T],
) -> Result<T> {
    Ok(vec_sum(w) * tensor.eval(x, y, z)?
        + vec_sum(z) * tensor.eval(x, y, w)?
        + vec_sum(y) * tensor.eval(x, z, w)?
        + vec_sum(x) * tensor.eval(y, z, w)?)
}

fn lifted_eval_alpha<T: Scalar>(
    tensor: &SparseTensor3<T>,
    alpha: T,
    x: &[T],
    y: &[T],
    z: &[T],
    w: &[T],
) -> Result<T> {
    let mut v = lifted_eval(tensor, x, y, z, w)?;
    if alpha != T::zero() {
        v += alpha * modform::g4_eval(x, y, z, w)?;
    }
    Ok(v)
}

/// Gradient of the modified lifted form in its first slot.
fn lifted_grad_alpha<T: Scalar>(
    tensor: &SparseTensor3<T>,
    alpha: T,
    y: &[T],
    z: &[T],
    w: &[T],
) -> Result<Vec<T>> {
    let (sy, sz, sw) = (vec_sum(y), vec_sum(z), vec_sum(w));
    let gyz = tensor.grad(y, z)?;
    let gyw = tensor.grad(y, w)?;
    let gzw = tensor.grad(z, w)?;
    let fyzw = tensor.eval(y, z, w)?;
    let n = y.len();
    let mut out = vec![T::zero(); n];
    for r in 0..n {
        out[r] = sw * gyz[r] + sz * gyw[r] + sy * gzw[r] + fyzw;
    }
    if alpha != T::zero() {
        let third: T = cast(1.0 / 3.0);
        let two_thirds: T = cast(2.0 / 3.0);
        let b = modform::ebar_dots(y);
        let c = modform::ebar_dots(z);
        let d = modform::ebar_dots(w);
        let mut dot = T::zero();
        for i in 0..n {
            dot += b[i] * c[i] * d[i];
        }
        for r in 0..n {
            out[r] += alpha * (third * dot + two_thirds * b[r] * c[r] * d[r]);
        }
    }
    Ok(out)
}

/// The bilinear slice `F4_alpha(x, x, ., .)` as a sparse-plus-structured
/// operator: `2 s(x) * F(x,.,.) + g(x,x) 1^T + 1 g(x,x)^T` plus `alpha`
/// times the structured fourth-order part.
struct LiftedPairOp<T> {
    slice: SliceMatrix<T>,
    kappa: T,
    border: Vec<T>,
    g: GMatrix<T>,
    alpha: T,
}

impl<T: Scalar> LiftedPairOp<T> {
    fn new(tensor: &SparseTensor3<T>, alpha: T, x: &[T]) -> Result<Self> {
        let slice = tensor.slice(x)?;
        let kappa = cast::<T>(2.0) * vec_sum(x);
        let border = tensor.grad(x, x)?;
        let e = modform::ebar_dots(x);
        let coeffs: Vec<T> = e.iter().map(|&v| v * v).collect();
        Ok(Self {
            slice,
            kappa,
            border,
            g: GMatrix::from_coeffs(coeffs),
            alpha,
        })
    }
}

impl<T: Scalar> SymmetricOp<T> for LiftedPairOp<T> {
    fn n(&self) -> usize {
        self.slice.n()
    }
    fn matvec(&self, v: &[T]) -> Vec<T> {
        let sv = vec_sum(v);
        let bv: T = self
            .border
            .iter()
            .zip(v)
            .map(|(&a, &b)| a * b)
            .fold(T::zero(), |a, b| a + b);
        let mut out = self.slice.matvec(v);
        for (r, o) in out.iter_mut().enumerate() {
            *o = self.kappa * *o + self.border[r] * sv + bv;
        }
        if self.alpha != T::zero() {
            for (o, g) in out.iter_mut().zip(self.g.matvec(v)) {
                *o += self.alpha * g;
            }
        }
        out
    }
    fn write_row(&self, r: usize, out: &mut [T]) {
        for (t, o) in out.iter_mut().enumerate() {
            *o = self.border[r] + self.border[t];
        }
        for (c, w) in self.slice.row(r) {
            out[c] += self.kappa * w;
        }
        if self.alpha != T::zero() {
            self.g.add_row_to(r, self.alpha, out);
        }
    }
    fn quad(&self, y: &[T], z: &[T]) -> T {
        let (sy, sz) = (vec_sum(y), vec_sum(z));
        let by: T = self
            .border
            .iter()
            .zip(y)
            .map(|(&a, &b)| a * b)
            .fold(T::zero(), |a, b| a + b);
        let bz: T = self
            .border
            .iter()
            .zip(z)
            .map(|(&a, &b)| a * b)
            .fold(T::zero(), |a, b| a + b);
        let mut q = self.kappa * self.slice.quad(y, z) + by * sz + sy * bz;
        if self.alpha != T::zero() {
            q += self.alpha * self.g.quad(y, z);
        }
        q
    }
}

/// Adaptive threshold for a lifted four-tuple.
fn lambda4<T: Scalar>(tensor: &SparseTensor3<T>, vs: [&[T]; 4]) -> Result<T> {
    let f4 = lifted_eval(tensor, vs[0], vs[1], vs[2], vs[3])?;
    let mut smax = T::neg_infinity();
    for v in vs {
        let s = lifted_eval(tensor, v, v, v, v)?;
        if s > smax {
            smax = s;
        }
    }
    let g_h = modform::g4_eval(vs[0], vs[0], vs[0], vs[0])?;
    let g_t = modform::g4_eval(vs[0], vs[1], vs[2], vs[3])?;
    let denom = g_h - g_t;
    if denom <= T::zero() {
        return Err(Error::HomogeneousTuple);
    }
    Ok((f4 - smax) / denom)
}

/// Exhaustive maximum of the lifted threshold over non-homogeneous
/// four-tuples, when the tuple count is small enough. On the assignment set
/// every block sums to `n1`, so the four-term identity reduces to `n1` times
/// a sum of four triple values, which are precomputed.
fn max_lambda4<T: Scalar>(tensor: &SparseTensor3<T>) -> Result<Option<T>> {
    let dims = tensor.dims();
    let count = crate::oracle::assignment_count(dims);
    let tuples = count
        .saturating_mul(count)
        .saturating_mul(count)
        .saturating_mul(count);
    if tuples > crate::oracle::FORM_ENUM_LIMIT {
        return Ok(None);
    }
    let ms = crate::oracle::EnumeratedM::new(dims)?;
    let m = ms.len();
    let vecs: Vec<Vec<T>> = ms.assignments().iter().map(|a| a.to_dense()).collect();
    let n1: T = cast(dims.n1() as f64);
    // triples[(i * m + j) * m + k] = F(m_i, m_j, m_k), symmetric in (i, j, k)
    let mut triples = vec![T::zero(); m * m * m];
    for i in 0..m {
        for j in i..m {
            for k in j..m {
                let v = tensor.eval(&vecs[i], &vecs[j], &vecs[k])?;
                for (a, b, c) in [
                    (i, j, k),
                    (i, k, j),
                    (j, i, k),
                    (j, k, i),
                    (k, i, j),
                    (k, j, i),
                ] {
                    triples[(a * m + b) * m + c] = v;
                }
            }
        }
    }
    let ebars: Vec<Vec<T>> = vecs.iter().map(|v| modform::ebar_dots(v)).collect();
    let g_h = modform::g4_eval(&vecs[0], &vecs[0], &vecs[0], &vecs[0])?;
    let four: T = cast(4.0);
    let selfs: Vec<T> = (0..m)
        .map(|i| four * n1 * triples[(i * m + i) * m + i])
        .collect();
    let n = dims.n();
    let mut best = T::neg_infinity();
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                for d in 0..m {
                    if a == b && b == c && c == d {
                        continue;
                    }
                    let f4 = n1
                        * (triples[(a * m + b) * m + c]
                            + triples[(a * m + b) * m + d]
                            + triples[(a * m + c) * m + d]
                            + triples[(b * m + c) * m + d]);
                    let smax = selfs[a].max(selfs[b]).max(selfs[c]).max(selfs[d]);
                    let mut g_t = T::zero();
                    for i in 0..n {
                        g_t += ebars[a][i] * ebars[b][i] * ebars[c][i] * ebars[d][i];
                    }
                    let denom = g_h - g_t;
                    debug_assert!(denom > T::zero());
                    let lam = (f4 - smax) / denom;
                    if lam > best {
                        best = lam;
                    }
                }
            }
        }
    }
    Ok(Some(best))
}

struct Lap4<'a, T> {
    tensor: &'a SparseTensor3<T>,
    bound: T,
}

impl<'a, T: Scalar> Lap4<'a, T> {
    fn new(tensor: &'a SparseTensor3<T>) -> Self {
        // No exact fourth-order convexification constant is in scope; the
        // third-order bound serves as the fixed second-phase weight. The
        // ascent and termination guarantees do not depend on it.
        let bound = alpha_bound(tensor);
        Self { tensor, bound }
    }
}

impl<T: Scalar> Scheme<T> for Lap4<'_, T> {
    fn dims(&self) -> ProblemDims {
        self.tensor.dims()
    }
    fn block_count(&self) -> usize {
        4
    }
    fn sweep(&self, blocks: &[Vec<T>], alpha: T) -> Result<Vec<AssignmentVec>> {
        let dims = self.dims();
        let g1 = lifted_grad_alpha(self.tensor, alpha, &blocks[1], &blocks[2], &blocks[3])?;
        let (x, _) = argmax_over_m(&g1, dims)?;
        let xv = x.to_dense::<T>();
        let g2 = lifted_grad_alpha(self.tensor, alpha, &xv, &blocks[2], &blocks[3])?;
        let (y, _) = argmax_over_m(&g2, dims)?;
        let yv = y.to_dense::<T>();
        let g3 = lifted_grad_alpha(self.tensor, alpha, &xv, &yv, &blocks[3])?;
        let (z, _) = argmax_over_m(&g3, dims)?;
        let zv = z.to_dense::<T>();
        let g4 = lifted_grad_alpha(self.tensor, alpha, &xv, &yv, &zv)?;
        let (w, _) = argmax_over_m(&g4, dims)?;
        Ok(vec![x, y, z, w])
    }
    fn form(&self, blocks: &[Vec<T>], alpha: T) -> Result<T> {
        lifted_eval_alpha(
            self.tensor,
            alpha,
            &blocks[0],
            &blocks[1],
            &blocks[2],
            &blocks[3],
        )
    }
    fn homo_form(&self, u: &AssignmentVec, alpha: T) -> Result<T> {
        let v = u.to_dense::<T>();
        lifted_eval_alpha(self.tensor, alpha, &v, &v, &v, &v)
    }
    fn raw_score(&self, u: &AssignmentVec) -> Result<T> {
        self.tensor.score(&u.to_dense::<T>())
    }
    fn tuple_threshold(&self, cands: &[AssignmentVec]) -> Result<T> {
        let vs: Vec<Vec<T>> = to_vecs(cands);
        lambda4(self.tensor, [&vs[0], &vs[1], &vs[2], &vs[3]])
    }
    fn enumerated_threshold(&self) -> Result<Option<T>> {
        max_lambda4(self.tensor)
    }
    fn bound_alpha(&self) -> T {
        self.bound
    }
    fn bound_is_sufficient(&self) -> bool {
        false
    }
}

struct Psi4<'a, T> {
    tensor: &'a SparseTensor3<T>,
    psi: PsiKind,
    bound: T,
}

impl<'a, T: Scalar> Psi4<'a, T> {
    fn new(tensor: &'a SparseTensor3<T>, psi: PsiKind) -> Self {
        let bound = alpha_bound(tensor);
        Self { tensor, psi, bound }
    }
}

impl<T: Scalar> Scheme<T> for Psi4<'_, T> {
    fn dims(&self) -> ProblemDims {
        self.tensor.dims()
    }
    fn block_count(&self) -> usize {
        2
    }
    fn sweep(&self, blocks: &[Vec<T>], alpha: T) -> Result<Vec<AssignmentVec>> {
        let dims = self.dims();
        // x-step: quadratic ascent on F4_alpha(., ., y, y)
        let ax = LiftedPairOp::new(self.tensor, alpha, &blocks[1])?;
        let seed_x = qap::seed_assignment(&ax, &blocks[0], dims)?;
        let x = self.psi.run(&ax, &seed_x)?;
        let xv = x.to_dense::<T>();
        // y-step: quadratic ascent on F4_alpha(x, x, ., .)
        let ay = LiftedPairOp::new(self.tensor, alpha, &xv)?;
        let seed_y = qap::seed_assignment(&ay, &blocks[1], dims)?;
        let y = self.psi.run(&ay, &seed_y)?;
        Ok(vec![x, y])
    }
    fn form(&self, blocks: &[Vec<T>], alpha: T) -> Result<T> {
        lifted_eval_alpha(
            self.tensor,
            alpha,
            &blocks[0],
            &blocks[0],
            &blocks[1],
            &blocks[1],
        )
    }
    fn homo_form(&self, u: &AssignmentVec, alpha: T) -> Result<T> {
        let v = u.to_dense::<T>();
        lifted_eval_alpha(self.tensor, alpha, &v, &v, &v, &v)
    }
    fn raw_score(&self, u: &AssignmentVec) -> Result<T> {
        self.tensor.score(&u.to_dense::<T>())
    }
    fn tuple_threshold(&self, cands: &[AssignmentVec]) -> Result<T> {
        let vs: Vec<Vec<T>> = to_vecs(cands);
        lambda4(self.tensor, [&vs[0], &vs[0], &vs[1], &vs[1]])
    }
    fn enumerated_threshold(&self) -> Result<Option<T>> {
        max_lambda4(self.tensor)
    }
    fn bound_alpha(&self) -> T {
        self.bound
    }
    fn bound_is_sufficient(&self) -> bool {
        false
    }
}

// ---------------------------------------------------------------------------
// Public entry points

/// Third-order scheme with three exact linear-assignment steps per iteration
/// and the two-phase modification schedule.
pub fn bcagm3<T: Scalar>(
    tensor: &SparseTensor3<T>,
    cfg: &SolverConfig<T>,
) -> Result<SolverResult<T>> {
    run_scheme(&Lap3::new(tensor), Schedule::TwoPhase, cfg)
}

/// Third-order scheme alternating one linear-assignment step with one
/// quadratic ascent step, two-phase schedule.
pub fn bcagm3_psi<T: Scalar>(
    tensor: &SparseTensor3<T>,
    psi: PsiKind,
    cfg: &SolverConfig<T>,
) -> Result<SolverResult<T>> {
    run_scheme(&Psi3::new(tensor, psi), Schedule::TwoPhase, cfg)
}

/// Adaptive (homotopy) variant of [`bcagm3`].
pub fn adapt_bcagm3<T: Scalar>(
    tensor: &SparseTensor3<T>,
    cfg: &SolverConfig<T>,
) -> Result<SolverResult<T>> {
    run_scheme(&Lap3::new(tensor), Schedule::Adaptive, cfg)
}

/// Adaptive (homotopy) variant of [`bcagm3_psi`].
pub fn adapt_bcagm3_psi<T: Scalar>(
    tensor: &SparseTensor3<T>,
    psi: PsiKind,
    cfg: &SolverConfig<T>,
) -> Result<SolverResult<T>> {
    run_scheme(&Psi3::new(tensor, psi), Schedule::Adaptive, cfg)
}

/// Which lifted fourth-order scheme to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lifted4Variant {
    /// Four linear-assignment blocks.
    Bcagm,
    /// Two quadratic blocks with the given subroutine.
    BcagmPsi(PsiKind),
}

/// Lifted fourth-order comparison solvers; the lifted tensor is evaluated
/// through the four-term identity and never materialized.
pub fn lifted4_solve<T: Scalar>(
    tensor: &SparseTensor3<T>,
    variant: Lifted4Variant,
    adaptive: bool,
    cfg: &SolverConfig<T>,
) -> Result<SolverResult<T>> {
    let schedule = if adaptive {
        Schedule::Adaptive
    } else {
        Schedule::TwoPhase
    };
    match variant {
        Lifted4Variant::Bcagm => run_scheme(&Lap4::new(tensor), schedule, cfg),
        Lifted4Variant::BcagmPsi(psi) => run_scheme(&Psi4::new(tensor, psi), schedule, cfg),
    }
}

/// Result of the second-order baseline.
#[derive(Clone, Debug)]
pub struct PairwiseResult<T> {
    pub assignment: AssignmentVec,
    /// Quadratic value `<x, A x>` of the returned assignment.
    pub value: T,
}

/// Second-order baseline: quadratic ascent on a pairwise affinity matrix,
/// seeded from the all-ones vector.
pub fn pairwise_ipfp<T: Scalar>(
    affinity: &DenseSym<T>,
    dims: ProblemDims,
) -> Result<PairwiseResult<T>> {
    if affinity.n() != dims.n() {
        return Err(Error::DimensionMismatch {
            expected: dims.n(),
            got: affinity.n(),
        });
    }
    let ones = vec![T::one(); dims.n()];
    let seed = qap::seed_assignment(affinity, &ones, dims)?;
    let assignment = qap::psi_ipfp(affinity, &seed, qap::IPFP_DEFAULT_MAX_ITER)?;
    let v = assignment.to_dense::<T>();
    let value = affinity.quad(&v, &v);
    Ok(PairwiseResult { assignment, value })
}
