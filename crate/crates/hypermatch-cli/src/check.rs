//! `oracle-check`: desk-scale verification of the core machinery against the
//! brute-force references, one line per check.

use clap::Args;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use hypermatch::lap::{argmax_over_m, solve_lap};
use hypermatch::modform::{alpha_bound, g_eval, lambda, ModifiedForm};
use hypermatch::oracle;
use hypermatch::qap::PsiKind;
use hypermatch::solvers::{adapt_bcagm3, bcagm3, bcagm3_psi, lifted_eval, SolverConfig};
use hypermatch::tensor3::{ProblemDims, SparseTensor3};

use crate::CliError;

#[derive(Args)]
pub struct OracleCheckArgs {
    /// RNG seed (default: HYPERMATCH_SEED or 0)
    #[arg(long)]
    seed: Option<u64>,
    /// Random instances per check
    #[arg(long, default_value_t = 10)]
    cases: usize,
}

struct Reporter {
    failures: usize,
}

impl Reporter {
    fn check(&mut self, name: &str, pass: bool, detail: String) {
        if pass {
            println!("ok   {name}: {detail}");
        } else {
            println!("FAIL {name}: {detail}");
            self.failures += 1;
        }
    }
}

fn dims(n1: usize, n2: usize) -> ProblemDims {
    ProblemDims::new(n1, n2).unwrap()
}

pub fn run(args: OracleCheckArgs) -> Result<(), CliError> {
    let seed = crate::resolve_seed(args.seed)?;
    let cases = args.cases.max(1);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut rep = Reporter { failures: 0 };

    // exact assignment optimum vs enumeration
    {
        let mut ok = true;
        for case in 0..20 * cases {
            let n1 = 1 + case % 4;
            let n2 = n1 + case % 2;
            let d = dims(n1, n2);
            let profit: Vec<f64> = (0..d.n())
                .map(|_| rng.random_range(-9i32..=9) as f64)
                .collect();
            let (_, v) = solve_lap(d, &profit).map_err(CliError::from)?;
            let best = oracle::EnumeratedM::new(d)
                .map_err(CliError::from)?
                .assignments()
                .iter()
                .map(|x| x.value_in(&profit))
                .fold(f64::NEG_INFINITY, f64::max);
            ok &= v == best;
        }
        rep.check("lap-exact", ok, format!("{} random instances", 20 * cases));
    }

    // tuple maximum equals score maximum at the convexification bound
    {
        let d = dims(2, 3);
        let mut ok = true;
        for _ in 0..cases {
            let t = SparseTensor3::<f64>::random(d, 2 * d.n(), &mut rng);
            let bound = alpha_bound(&t);
            let fm = oracle::brute_form_max(&t, bound).map_err(CliError::from)?;
            let (_, sm) = oracle::brute_score_max(&t, bound).map_err(CliError::from)?;
            ok &= (fm - sm).abs() <= 1e-9 * sm.abs().max(1.0);
        }
        rep.check("equivalence-at-bound", ok, format!("{cases} instances, 2x3"));
    }

    // score Hessian PSD on every assignment at the bound
    {
        let d = dims(3, 3);
        let n = d.n();
        let ms = oracle::EnumeratedM::new(d).map_err(CliError::from)?;
        let mut ok = true;
        for _ in 0..cases {
            let t = SparseTensor3::<f64>::random(d, 2 * n, &mut rng);
            let m = ModifiedForm::new(&t, alpha_bound(&t));
            for x in ms.assignments() {
                let xv = x.to_dense::<f64>();
                let mut a = m.matrix(&xv).map_err(CliError::from)?.to_dense();
                for v in a.iter_mut() {
                    *v *= 6.0;
                }
                let norm: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
                let e = oracle::min_eig_sym(&a, n).map_err(CliError::from)?;
                ok &= e >= -1e-8 * norm.max(1.0);
            }
        }
        rep.check("hessian-psd-at-bound", ok, format!("{cases} instances, 3x3"));
    }

    // the homogeneous modification value is constant on the assignment set
    {
        let mut ok = true;
        let mut worst: f64 = 0.0;
        for n1 in 1..=4usize {
            for n2 in n1..=4usize {
                let ms = oracle::EnumeratedM::new(dims(n1, n2)).map_err(CliError::from)?;
                let vals: Vec<f64> = ms
                    .assignments()
                    .iter()
                    .map(|a| {
                        let v = a.to_dense::<f64>();
                        g_eval(&v, &v, &v).unwrap()
                    })
                    .collect();
                let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
                let rel = (max - min) / max.abs().max(1.0);
                worst = worst.max(rel);
                ok &= rel <= 1e-10;
            }
        }
        rep.check("g-constant", ok, format!("dims up to 4x4, worst spread {worst:.2e}"));
    }

    // per-tuple threshold is exactly the break-even point of the inequality
    {
        let d = dims(2, 3);
        let ms = oracle::EnumeratedM::new(d).map_err(CliError::from)?;
        let all = ms.assignments();
        let mut ok = true;
        for _ in 0..2 {
            let t = SparseTensor3::<f64>::random(d, 2 * d.n(), &mut rng);
            for x in all {
                for y in all {
                    for z in all {
                        if x == y && y == z {
                            continue;
                        }
                        let lam = lambda(&t, x, y, z).map_err(CliError::from)?;
                        let xi = 1e-8 * lam.abs().max(1.0);
                        let (xv, yv, zv) =
                            (x.to_dense::<f64>(), y.to_dense::<f64>(), z.to_dense::<f64>());
                        let side = |alpha: f64| -> (f64, f64) {
                            let f = oracle::dense_eval(&t, &xv, &yv, &zv).unwrap()
                                + alpha * oracle::g_naive(&xv, &yv, &zv);
                            let s = [&xv, &yv, &zv]
                                .iter()
                                .map(|v| {
                                    oracle::dense_eval(&t, v, v, v).unwrap()
                                        + alpha * oracle::g_naive(v, v, v)
                                })
                                .fold(f64::NEG_INFINITY, f64::max);
                            (f, s)
                        };
                        let (fh, sh) = side(lam + xi);
                        ok &= fh <= sh + 1e-12 * sh.abs().max(1.0);
                        if lam > 0.0 {
                            let (ff, sf) = side(lam - xi);
                            ok &= ff > sf;
                        }
                    }
                }
            }
        }
        rep.check("threshold-iff", ok, "all non-homogeneous tuples, 2x3".into());
    }

    // lifted four-term identity against the dense lifted sum
    {
        let d = dims(3, 3);
        let n = d.n();
        let mut ok = true;
        for _ in 0..cases {
            let t = SparseTensor3::<f64>::random(d, 2 * n, &mut rng);
            let mut rv = || -> Vec<f64> { (0..n).map(|_| rng.random::<f64>() - 0.5).collect() };
            let (x, y, z, w) = (rv(), rv(), rv(), rv());
            let fast = lifted_eval(&t, &x, &y, &z, &w).map_err(CliError::from)?;
            let dense = oracle::dense_lifted_eval(&t, &x, &y, &z, &w).map_err(CliError::from)?;
            ok &= (fast - dense).abs() <= 1e-11 * dense.abs().max(1.0);
        }
        rep.check("lifted-identity", ok, format!("{cases} instances, n = 9"));
    }

    // solver ascent, validity, and the brute-force score ceiling
    {
        let d = dims(3, 3);
        let cfg = SolverConfig::default();
        let mut ok = true;
        for _ in 0..cases {
            let t = SparseTensor3::<f64>::random(d, 2 * d.n(), &mut rng);
            let (_, brute) = oracle::brute_score_max(&t, 0.0).map_err(CliError::from)?;
            for r in [
                bcagm3(&t, &cfg).map_err(CliError::from)?,
                bcagm3_psi(&t, PsiKind::Mpm, &cfg).map_err(CliError::from)?,
                adapt_bcagm3(&t, &cfg).map_err(CliError::from)?,
            ] {
                ok &= r.score <= brute + 1e-9 * brute.abs().max(1.0);
                ok &= r.iterations < 100;
                for k in 1..r.form_trace.len() {
                    if r.alpha_trace[k] == r.alpha_trace[k - 1] {
                        ok &= r.form_trace[k]
                            >= r.form_trace[k - 1] - 1e-9 * r.form_trace[k].abs().max(1.0);
                    }
                }
            }
        }
        rep.check("solver-ascent", ok, format!("{cases} instances, 3 solvers"));
    }

    // the linear step really maximizes over the assignment set
    {
        let d = dims(3, 4);
        let mut ok = true;
        let ms = oracle::EnumeratedM::new(d).map_err(CliError::from)?;
        for _ in 0..cases {
            let g: Vec<f64> = (0..d.n()).map(|_| rng.random::<f64>() - 0.4).collect();
            let (_, v) = argmax_over_m(&g, d).map_err(CliError::from)?;
            let best = ms
                .assignments()
                .iter()
                .map(|x| x.value_in(&g))
                .fold(f64::NEG_INFINITY, f64::max);
            ok &= (v - best).abs() <= 1e-12 * best.abs().max(1.0);
        }
        rep.check("argmax-over-assignments", ok, format!("{cases} gradients, 3x4"));
    }

    if rep.failures > 0 {
        Err(CliError::Numeric(format!(
            "{} oracle check(s) failed",
            rep.failures
        )))
    } else {
        Ok(())
    }
}
