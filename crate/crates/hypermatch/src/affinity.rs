//! Affinity construction from 2-D point sets, synthetic benchmark data, and
//! evaluation metrics.
//!
//! Triples of points are described by the sines of their interior angles
//! (scale-invariant by construction); a sparse affinity tensor is built by
//! sampling source triples and pairing each with its nearest target triples
//! in feature space, with weights `exp(-gamma * d^2)`. A pairwise
//! distance-difference affinity matrix is provided for the second-order
//! baseline.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lap::AssignmentVec;
use crate::qap::DenseSym;
use crate::tensor3::{DiagonalPolicy, ProblemDims, SparseTensor3};
use crate::{cast, Scalar};

/// A 2-D point set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct PointSet<T> {
    pub points: Vec<[T; 2]>,
}

impl<T: Scalar> PointSet<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// A matching instance: source points, target points, and (for synthetic
/// data) the target index of each source point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct MatchProblem<T> {
    pub source: PointSet<T>,
    pub target: PointSet<T>,
    pub ground_truth: Option<Vec<usize>>,
}

impl<T: Scalar> MatchProblem<T> {
    pub fn dims(&self) -> Result<ProblemDims> {
        ProblemDims::new(self.source.len(), self.target.len())
    }
}

/// How the weight decay rate is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GammaMode<T> {
    /// Inverse of the mean squared feature distance over all generated pairs.
    Auto,
    Fixed(T),
}

/// Which triangle descriptor to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum FeatureKind {
    /// Sines of the interior angles, in vertex order.
    #[default]
    AngleSines,
    /// Interior angles in radians, in vertex order.
    Angles,
}

#[derive(Clone, Debug)]
pub struct AffinityConfig<T> {
    pub gamma: GammaMode<T>,
    /// Number of ordered source triples to sample; `None` means `n^2` with
    /// `n = n1 * n2`, capped at `max_triples`.
    pub triples_sampled: Option<usize>,
    /// Hard cap on sampled triples.
    pub max_triples: usize,
    /// Nearest target triples kept per sampled source triple.
    pub knn: usize,
    /// Triangles with area below this are considered degenerate.
    pub min_area: T,
    pub feature: FeatureKind,
    pub seed: u64,
}

impl<T: Scalar> Default for AffinityConfig<T> {
    fn default() -> Self {
        Self {
            gamma: GammaMode::Auto,
            triples_sampled: None,
            max_triples: 200_000,
            knn: 300,
            min_area: cast(1e-12),
            feature: FeatureKind::AngleSines,
            seed: 0,
        }
    }
}

/// Synthetic matching instances: inliers from a unit Gaussian, copied to the
/// target, scaled, perturbed, and padded with Gaussian outliers.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct SyntheticConfig<T> {
    pub n_in: usize,
    pub n_out: usize,
    pub sigma: T,
    pub scale: T,
    pub seed: u64,
}

impl<T: Scalar> SyntheticConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.n_in < 1 {
            return Err(Error::ConfigInvalid("n_in must be at least 1".into()));
        }
        if self.sigma < T::zero() || !self.sigma.is_finite() {
            return Err(Error::ConfigInvalid("sigma must be nonnegative".into()));
        }
        if self.scale <= T::zero() || !self.scale.is_finite() {
            return Err(Error::ConfigInvalid("scale must be positive".into()));
        }
        Ok(())
    }
}

fn sub<T: Scalar>(a: [T; 2], b: [T; 2]) -> [T; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn cross<T: Scalar>(u: [T; 2], v: [T; 2]) -> T {
    u[0] * v[1] - u[1] * v[0]
}

fn dot2<T: Scalar>(u: [T; 2], v: [T; 2]) -> T {
    u[0] * v[0] + u[1] * v[1]
}

fn norm2<T: Scalar>(u: [T; 2]) -> T {
    dot2(u, u).sqrt()
}

/// Triangle descriptor for three distinct points, components in the order of
/// the given vertices. Sines lie in `(0, 1]`; angles in `(0, pi)`.
pub fn triangle_feature<T: Scalar>(
    ps: &PointSet<T>,
    triple: (usize, usize, usize),
    kind: FeatureKind,
    min_area: T,
) -> Result<[T; 3]> {
    let (p, q, r) = triple;
    let n = ps.len();
    for idx in [p, q, r] {
        if idx >= n {
            return Err(Error::IndexOutOfRange { index: idx, n });
        }
    }
    if p == q || q == r || p == r {
        return Err(Error::DegenerateTriangle);
    }
    let (a, b, c) = (ps.points[p], ps.points[q], ps.points[r]);
    let twice_area = cross(sub(b, a), sub(c, a)).abs();
    if twice_area / cast(2.0) < min_area {
        return Err(Error::DegenerateTriangle);
    }
    let vertex = |at: [T; 2], u: [T; 2], v: [T; 2]| -> T {
        let (du, dv) = (sub(u, at), sub(v, at));
        match kind {
            FeatureKind::AngleSines => twice_area / (norm2(du) * norm2(dv)),
            FeatureKind::Angles => twice_area.atan2(dot2(du, dv)),
        }
    };
    Ok([
        vertex(a, b, c),
        vertex(b, a, c),
        vertex(c, a, b),
    ])
}

/// Ordered index triple.
type Triple = (usize, usize, usize);
/// A sampled source triple, a matched target triple, and their squared
/// feature distance.
type MatchedPair<T> = (Triple, Triple, T);

fn feature_dist_sq<T: Scalar>(a: [T; 3], b: [T; 3]) -> T {
    let mut s = T::zero();
    for i in 0..3 {
        let d = a[i] - b[i];
        s += d * d;
    }
    s
}

/// All ordered triples of distinct indices below `n`, in lexicographic order.
fn ordered_triples(n: usize) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if j == i {
                continue;
            }
            for k in 0..n {
                if k == i || k == j {
                    continue;
                }
                out.push((i, j, k));
            }
        }
    }
    out
}

/// Samples `want` distinct ordered triples of source indices; takes the whole
/// population when it is not larger than `want`.
fn sample_triples(
    n: usize,
    want: usize,
    rng: &mut ChaCha12Rng,
) -> Vec<(usize, usize, usize)> {
    let population = if n < 3 { 0 } else { n * (n - 1) * (n - 2) };
    if want >= population {
        return ordered_triples(n);
    }
    if population <= 4 * want {
        let mut all = ordered_triples(n);
        all.shuffle(rng);
        all.truncate(want);
        all.sort_unstable();
        return all;
    }
    let mut seen = BTreeSet::new();
    while seen.len() < want {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        let k = rng.random_range(0..n);
        if i != j && j != k && i != k {
            seen.insert((i, j, k));
        }
    }
    seen.into_iter().collect()
}

/// Builds the third-order affinity tensor between two point sets.
///
/// Sampled ordered source triples are matched to their `knn` nearest target
/// triples in feature space (ties broken by ascending target triple index);
/// each pair becomes a raw entry with weight `exp(-gamma * d^2)` at the
/// linear correspondence indices. In auto mode `gamma` is the inverse mean
/// of the squared distances over all generated pairs.
pub fn build_tensor<T: Scalar>(
    source: &PointSet<T>,
    target: &PointSet<T>,
    cfg: &AffinityConfig<T>,
) -> Result<SparseTensor3<T>> {
    let (n1, n2) = (source.len(), target.len());
    if n1 < 3 {
        return Err(Error::TooFewPoints { need: 3, got: n1 });
    }
    let dims = ProblemDims::new(n1, n2)?;
    if cfg.knn < 1 || cfg.triples_sampled == Some(0) {
        return Err(Error::ConfigInvalid(
            "knn and triples_sampled must be at least 1".into(),
        ));
    }

    // Target features over all ordered non-degenerate triples.
    let mut target_feats: Vec<([T; 3], (usize, usize, usize))> = Vec::new();
    for t in ordered_triples(n2) {
        if let Ok(f) = triangle_feature(target, t, cfg.feature, cfg.min_area) {
            target_feats.push((f, t));
        }
    }
    if target_feats.is_empty() {
        return Err(Error::AllTriplesDegenerate);
    }

    let n = dims.n();
    let want = cfg.triples_sampled.unwrap_or(n * n).min(cfg.max_triples);
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let sampled = sample_triples(n1, want, &mut rng);

    // First pass: collect candidate pairs and squared feature distances.
    let k = cfg.knn.min(target_feats.len());
    let mut pairs: Vec<MatchedPair<T>> = Vec::new();
    let mut scratch: Vec<(T, usize)> = Vec::with_capacity(target_feats.len());
    for &s in &sampled {
        let sf = match triangle_feature(source, s, cfg.feature, cfg.min_area) {
            Ok(f) => f,
            Err(Error::DegenerateTriangle) => continue,
            Err(e) => return Err(e),
        };
        scratch.clear();
        for (idx, (tf, _)) in target_feats.iter().enumerate() {
            scratch.push((feature_dist_sq(sf, *tf), idx));
        }
        let cmp = |a: &(T, usize), b: &(T, usize)| {
            a.0.partial_cmp(&b.0)
                .expect("feature distances are finite")
                .then(a.1.cmp(&b.1))
        };
        if k < scratch.len() {
            scratch.select_nth_unstable_by(k - 1, cmp);
            scratch.truncate(k);
        }
        scratch.sort_unstable_by(cmp);
        for &(d2, idx) in scratch.iter() {
            pairs.push((s, target_feats[idx].1, d2));
        }
    }
    if pairs.is_empty() {
        return Err(Error::AllTriplesDegenerate);
    }

    let gamma = match cfg.gamma {
        GammaMode::Fixed(g) => {
            if g <= T::zero() || !g.is_finite() {
                return Err(Error::ConfigInvalid("gamma must be positive".into()));
            }
            g
        }
        GammaMode::Auto => {
            let mean = pairs
                .iter()
                .map(|&(_, _, d2)| d2)
                .fold(T::zero(), |a, b| a + b)
                / cast(pairs.len() as f64);
            if mean > T::zero() {
                T::one() / mean
            } else {
                T::one()
            }
        }
    };

    let mut raw: Vec<(usize, usize, usize, T)> = Vec::with_capacity(pairs.len());
    for &((i1, i2, i3), (j1, j2, j3), d2) in &pairs {
        let a = dims.linear(i1, j1);
        let b = dims.linear(i2, j2);
        let c = dims.linear(i3, j3);
        if a == b || b == c || a == c {
            continue;
        }
        raw.push((a, b, c, (-gamma * d2).exp()));
    }
    SparseTensor3::from_raw(dims, &raw, DiagonalPolicy::Drop)
}

/// Pairwise distance-difference affinity (used by second-order baselines):
/// entry `((i1,j1),(i2,j2)) = exp(-(dP[i1,i2] - dQ[j1,j2])^2 / sigma_s^2)`
/// when `i1 != i2` and `j1 != j2`, zero otherwise.
pub fn build_pairwise<T: Scalar>(
    source: &PointSet<T>,
    target: &PointSet<T>,
    sigma_s: T,
) -> Result<DenseSym<T>> {
    if sigma_s <= T::zero() || !sigma_s.is_finite() {
        return Err(Error::BadSigma(sigma_s.to_f64().unwrap_or(f64::NAN)));
    }
    let (n1, n2) = (source.len(), target.len());
    let dims = ProblemDims::new(n1, n2)?;
    let n = dims.n();
    let dp: Vec<T> = (0..n1 * n1)
        .map(|idx| norm2(sub(source.points[idx / n1], source.points[idx % n1])))
        .collect();
    let dq: Vec<T> = (0..n2 * n2)
        .map(|idx| norm2(sub(target.points[idx / n2], target.points[idx % n2])))
        .collect();
    let inv = T::one() / (sigma_s * sigma_s);
    let mut data = vec![T::zero(); n * n];
    for i1 in 0..n1 {
        for j1 in 0..n2 {
            let a = dims.linear(i1, j1);
            for i2 in 0..n1 {
                if i2 == i1 {
                    continue;
                }
                for j2 in 0..n2 {
                    if j2 == j1 {
                        continue;
                    }
                    let b = dims.linear(i2, j2);
                    let d = dp[i1 * n1 + i2] - dq[j1 * n2 + j2];
                    data[a * n + b] = (-(d * d) * inv).exp();
                }
            }
        }
    }
    DenseSym::new(n, data)
}

/// Generates a synthetic matching problem. The target is built from the
/// source by scaling, additive Gaussian noise, and appended outliers, in
/// that order, then shuffled with a recorded permutation so the ground truth
/// stays well defined.
pub fn gen_synthetic<T: Scalar>(cfg: &SyntheticConfig<T>) -> Result<MatchProblem<T>> {
    cfg.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let mut normal = || -> T { cast::<T>(rng.sample::<f64, _>(StandardNormal)) };

    let mut source_pts = Vec::with_capacity(cfg.n_in);
    for _ in 0..cfg.n_in {
        source_pts.push([normal(), normal()]);
    }
    let mut pre: Vec<[T; 2]> = Vec::with_capacity(cfg.n_in + cfg.n_out);
    for p in &source_pts {
        let noisy = [
            cfg.scale * p[0] + cfg.sigma * normal(),
            cfg.scale * p[1] + cfg.sigma * normal(),
        ];
        pre.push(noisy);
    }
    for _ in 0..cfg.n_out {
        pre.push([normal(), normal()]);
    }

    let total = pre.len();
    let mut order: Vec<usize> = (0..total).collect();
    order.shuffle(&mut rng);
    let mut target_pts = vec![[T::zero(); 2]; total];
    let mut position = vec![0usize; total];
    for (new_idx, &old_idx) in order.iter().enumerate() {
        target_pts[new_idx] = pre[old_idx];
        position[old_idx] = new_idx;
    }
    let ground_truth = position[..cfg.n_in].to_vec();

    Ok(MatchProblem {
        source: PointSet { points: source_pts },
        target: PointSet { points: target_pts },
        ground_truth: Some(ground_truth),
    })
}

/// Fraction of inliers matched to their ground-truth target.
pub fn accuracy<T: Scalar>(x: &AssignmentVec, ground_truth: &[usize]) -> T {
    if ground_truth.is_empty() {
        return T::zero();
    }
    let hits = x
        .cols()
        .iter()
        .zip(ground_truth)
        .filter(|(&col, &gt)| col as usize == gt)
        .count();
    cast::<T>(hits as f64) / cast(ground_truth.len() as f64)
}

/// Paired score comparison between two methods.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GainSummary<T> {
    /// Cases where the first method scored higher.
    pub a_better: usize,
    /// Mean relative gain (percent) of the first method over those cases.
    pub a_gain_pct: Option<T>,
    pub b_better: usize,
    pub b_gain_pct: Option<T>,
    pub equal: usize,
    /// Pairs excluded from a gain mean because the losing score was zero.
    pub zero_denominator: usize,
}

/// Compares paired score lists: counts wins each way, the mean relative gain
/// of the winner (in percent), and ties under `eq_tol` relative tolerance.
pub fn avg_gain<T: Scalar>(f: &[T], g: &[T], eq_tol: T) -> Result<GainSummary<T>> {
    if f.len() != g.len() {
        return Err(Error::LengthMismatch(f.len(), g.len()));
    }
    let mut a_better = 0usize;
    let mut b_better = 0usize;
    let mut equal = 0usize;
    let mut zero_denominator = 0usize;
    let mut a_sum = T::zero();
    let mut a_cnt = 0usize;
    let mut b_sum = T::zero();
    let mut b_cnt = 0usize;
    for (&fi, &gi) in f.iter().zip(g) {
        let scale = fi.abs().max(gi.abs()).max(T::one());
        if (fi - gi).abs() <= eq_tol * scale {
            equal += 1;
        } else if fi > gi {
            a_better += 1;
            if gi != T::zero() {
                a_sum += (fi - gi) / gi;
                a_cnt += 1;
            } else {
                zero_denominator += 1;
            }
        } else {
            b_better += 1;
            if fi != T::zero() {
                b_sum += (gi - fi) / fi;
                b_cnt += 1;
            } else {
                zero_denominator += 1;
            }
        }
    }
    let hundred: T = cast(100.0);
    Ok(GainSummary {
        a_better,
        a_gain_pct: (a_cnt > 0).then(|| hundred * a_sum / cast(a_cnt as f64)),
        b_better,
        b_gain_pct: (b_cnt > 0).then(|| hundred * b_sum / cast(b_cnt as f64)),
        equal,
        zero_denominator,
    })
}
