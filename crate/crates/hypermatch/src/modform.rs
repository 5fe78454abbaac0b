//! The structured modification form and its calculus.
//!
//! `G(x, y, z) = sum_i <e_i', x> <e_i', y> <e_i', z>` with perturbed basis
//! vectors `e_i' = (1/3) 1 + (2/3) e_i`. Adding `alpha * G` to the affinity
//! form makes the score Hessian positive semidefinite on the assignment set
//! once `alpha` reaches the bound of [`alpha_bound`], while leaving the
//! argmax over assignments unchanged because `G(x, x, x)` is constant there.
//! All contractions of `G` have closed forms costing `O(n)`.

use crate::error::{Error, Result};
use crate::lap::AssignmentVec;
use crate::tensor3::{SliceMatrix, SparseTensor3};
use crate::{cast, Scalar};

fn check_same_len<T>(vs: &[&[T]]) -> Result<()> {
    let n = vs[0].len();
    for v in vs {
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: v.len(),
            });
        }
    }
    Ok(())
}

fn sum<T: Scalar>(v: &[T]) -> T {
    v.iter().copied().fold(T::zero(), |a, b| a + b)
}

/// `<e_i', v>` for all `i` at once: `(1/3) sum(v) + (2/3) v[i]`.
pub(crate) fn ebar_dots<T: Scalar>(v: &[T]) -> Vec<T> {
    let third: T = cast(1.0 / 3.0);
    let two_thirds: T = cast(2.0 / 3.0);
    let s = third * sum(v);
    v.iter().map(|&x| s + two_thirds * x).collect()
}

/// `G(x, y, z)` in `O(n)`.
pub fn g_eval<T: Scalar>(x: &[T], y: &[T], z: &[T]) -> Result<T> {
    check_same_len(&[x, y, z])?;
    let (a, b, c) = (ebar_dots(x), ebar_dots(y), ebar_dots(z));
    let mut acc = T::zero();
    for i in 0..x.len() {
        acc += a[i] * b[i] * c[i];
    }
    Ok(acc)
}

/// Gradient of `G` in its first argument: `g[r] = (1/3) sum_i a_i b_i + (2/3) a_r b_r`
/// with `a = <e_i', y>`, `b = <e_i', z>`.
pub fn g_grad<T: Scalar>(y: &[T], z: &[T]) -> Result<Vec<T>> {
    check_same_len(&[y, z])?;
    let third: T = cast(1.0 / 3.0);
    let two_thirds: T = cast(2.0 / 3.0);
    let (a, b) = (ebar_dots(y), ebar_dots(z));
    let mut dot = T::zero();
    for i in 0..y.len() {
        dot += a[i] * b[i];
    }
    Ok((0..y.len())
        .map(|r| third * dot + two_thirds * a[r] * b[r])
        .collect())
}

/// Fourth-order analog `sum_i <e_i', x> <e_i', y> <e_i', z> <e_i', t>`.
pub fn g4_eval<T: Scalar>(x: &[T], y: &[T], z: &[T], t: &[T]) -> Result<T> {
    check_same_len(&[x, y, z, t])?;
    let (a, b, c, d) = (ebar_dots(x), ebar_dots(y), ebar_dots(z), ebar_dots(t));
    let mut acc = T::zero();
    for i in 0..x.len() {
        acc += a[i] * b[i] * c[i] * d[i];
    }
    Ok(acc)
}

/// The slice `G(x, ., .)` as `(1/9) C 11^T + (2/9)(c 1^T + 1 c^T) + (4/9) diag(c)`
/// with `c_i = <e_i', x>` and `C = sum c_i`. Matrix-vector products are `O(n)`.
#[derive(Clone, Debug)]
pub struct GMatrix<T> {
    c: Vec<T>,
    c_sum: T,
}

impl<T: Scalar> GMatrix<T> {
    pub fn new(x: &[T]) -> Self {
        let c = ebar_dots(x);
        let c_sum = sum(&c);
        Self { c, c_sum }
    }

    /// Same structure with an explicit coefficient vector; used by the lifted
    /// fourth-order operator where `c_i` is replaced by `<e_i', x>^2`.
    pub fn from_coeffs(c: Vec<T>) -> Self {
        let c_sum = sum(&c);
        Self { c, c_sum }
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        let ninth: T = cast(1.0 / 9.0);
        let two_ninths: T = cast(2.0 / 9.0);
        let four_ninths: T = cast(4.0 / 9.0);
        let sv = sum(v);
        let mut cv = T::zero();
        for i in 0..self.c.len() {
            cv += self.c[i] * v[i];
        }
        (0..self.c.len())
            .map(|s| {
                ninth * self.c_sum * sv
                    + two_ninths * (self.c[s] * sv + cv)
                    + four_ninths * self.c[s] * v[s]
            })
            .collect()
    }

    /// `<y, G(x,.,.) z>` in `O(n)`.
    pub fn quad(&self, y: &[T], z: &[T]) -> T {
        let ninth: T = cast(1.0 / 9.0);
        let two_ninths: T = cast(2.0 / 9.0);
        let four_ninths: T = cast(4.0 / 9.0);
        let (sy, sz) = (sum(y), sum(z));
        let mut cy = T::zero();
        let mut cz = T::zero();
        let mut cyz = T::zero();
        for i in 0..self.c.len() {
            cy += self.c[i] * y[i];
            cz += self.c[i] * z[i];
            cyz += self.c[i] * y[i] * z[i];
        }
        ninth * self.c_sum * sy * sz + two_ninths * (cy * sz + sy * cz) + four_ninths * cyz
    }

    pub fn entry(&self, s: usize, t: usize) -> T {
        let ninth: T = cast(1.0 / 9.0);
        let two_ninths: T = cast(2.0 / 9.0);
        let four_ninths: T = cast(4.0 / 9.0);
        let mut v = ninth * self.c_sum + two_ninths * (self.c[s] + self.c[t]);
        if s == t {
            v += four_ninths * self.c[s];
        }
        v
    }

    /// Adds `coef * row_r` of the structured matrix into `out`.
    pub fn add_row_to(&self, r: usize, coef: T, out: &mut [T]) {
        let ninth: T = cast(1.0 / 9.0);
        let two_ninths: T = cast(2.0 / 9.0);
        let four_ninths: T = cast(4.0 / 9.0);
        let base = ninth * self.c_sum + two_ninths * self.c[r];
        for (t, o) in out.iter_mut().enumerate() {
            *o += coef * (base + two_ninths * self.c[t]);
        }
        out[r] += coef * four_ninths * self.c[r];
    }
}

/// Convexification threshold `(27/4) max_i sqrt(sum_{j,k} F_ijk^2)` over the
/// symmetrized tensor; each canonical entry contributes two squared orderings
/// to each of its three index slices.
pub fn alpha_bound<T: Scalar>(tensor: &SparseTensor3<T>) -> T {
    let n = tensor.dims().n();
    let mut slice_sq = vec![T::zero(); n];
    let two: T = cast(2.0);
    for e in tensor.entries() {
        let sq = two * e.w * e.w;
        slice_sq[e.a as usize] += sq;
        slice_sq[e.b as usize] += sq;
        slice_sq[e.c as usize] += sq;
    }
    let max = slice_sq
        .into_iter()
        .fold(T::zero(), |a, b| if b > a { b } else { a });
    cast::<T>(27.0 / 4.0) * max.sqrt()
}

/// `F_alpha = F + alpha * G` with all three contraction shapes.
#[derive(Clone, Copy, Debug)]
pub struct ModifiedForm<'a, T> {
    base: &'a SparseTensor3<T>,
    alpha: T,
}

impl<'a, T: Scalar> ModifiedForm<'a, T> {
    pub fn new(base: &'a SparseTensor3<T>, alpha: T) -> Self {
        Self { base, alpha }
    }

    pub fn base(&self) -> &'a SparseTensor3<T> {
        self.base
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn eval(&self, x: &[T], y: &[T], z: &[T]) -> Result<T> {
        let f = self.base.eval(x, y, z)?;
        if self.alpha == T::zero() {
            return Ok(f);
        }
        Ok(f + self.alpha * g_eval(x, y, z)?)
    }

    /// `S_alpha(u) = F_alpha(u, u, u)`.
    pub fn score(&self, u: &[T]) -> Result<T> {
        self.eval(u, u, u)
    }

    pub fn grad(&self, y: &[T], z: &[T]) -> Result<Vec<T>> {
        let mut g = self.base.grad(y, z)?;
        if self.alpha != T::zero() {
            let gg = g_grad(y, z)?;
            for (a, b) in g.iter_mut().zip(gg) {
                *a += self.alpha * b;
            }
        }
        Ok(g)
    }

    /// The slice `F_alpha(x, ., .)` kept as a sparse + structured pair so
    /// that products stay cheap.
    pub fn matrix(&self, x: &[T]) -> Result<ModMatrix<T>> {
        Ok(ModMatrix {
            slice: self.base.slice(x)?,
            g: GMatrix::new(x),
            alpha: self.alpha,
        })
    }
}

/// Slice of a modified form: sparse affinity part plus `alpha` times the
/// structured part.
#[derive(Clone, Debug)]
pub struct ModMatrix<T> {
    pub slice: SliceMatrix<T>,
    pub g: GMatrix<T>,
    pub alpha: T,
}

impl<T: Scalar> ModMatrix<T> {
    pub fn n(&self) -> usize {
        self.slice.n()
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        let mut out = self.slice.matvec(v);
        if self.alpha != T::zero() {
            for (o, g) in out.iter_mut().zip(self.g.matvec(v)) {
                *o += self.alpha * g;
            }
        }
        out
    }

    pub fn quad(&self, y: &[T], z: &[T]) -> T {
        let mut q = self.slice.quad(y, z);
        if self.alpha != T::zero() {
            q += self.alpha * self.g.quad(y, z);
        }
        q
    }

    pub fn write_row(&self, r: usize, out: &mut [T]) {
        for o in out.iter_mut() {
            *o = T::zero();
        }
        for (c, w) in self.slice.row(r) {
            out[c] = w;
        }
        if self.alpha != T::zero() {
            self.g.add_row_to(r, self.alpha, out);
        }
    }

    pub fn to_dense(&self) -> Vec<T> {
        let n = self.n();
        let mut out = vec![T::zero(); n * n];
        for r in 0..n {
            self.write_row(r, &mut out[r * n..(r + 1) * n]);
        }
        out
    }
}

/// Smallest modification weight that restores the key inequality for one
/// non-homogeneous assignment tuple:
/// `(F(x,y,z) - max_u F(u,u,u)) / (G(x,x,x) - G(x,y,z))`.
///
/// The value may be negative (the inequality already holds); callers clamp
/// as needed. The denominator is strictly positive whenever the tuple is not
/// homogeneous.
pub fn lambda<T: Scalar>(
    tensor: &SparseTensor3<T>,
    x: &AssignmentVec,
    y: &AssignmentVec,
    z: &AssignmentVec,
) -> Result<T> {
    for v in [x, y, z] {
        if v.dims() != tensor.dims() {
            return Err(Error::DimensionMismatch {
                expected: tensor.dims().n(),
                got: v.dims().n(),
            });
        }
    }
    if x == y && y == z {
        return Err(Error::HomogeneousTuple);
    }
    let xv = x.to_dense::<T>();
    let yv = y.to_dense::<T>();
    let zv = z.to_dense::<T>();
    let f_xyz = tensor.eval(&xv, &yv, &zv)?;
    let mut best = T::neg_infinity();
    for v in [&xv, &yv, &zv] {
        let s = tensor.eval(v, v, v)?;
        if s > best {
            best = s;
        }
    }
    let denom = g_eval(&xv, &xv, &xv)? - g_eval(&xv, &yv, &zv)?;
    if denom <= T::zero() {
        return Err(Error::HomogeneousTuple);
    }
    Ok((f_xyz - best) / denom)
}
