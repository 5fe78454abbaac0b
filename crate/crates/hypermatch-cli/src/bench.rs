//! Benchmark sweeps: synthetic problems swept over outliers or deformation,
//! every solver run on the same instances, results written as CSV.

use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::Deserialize;

use hypermatch::affinity::{
    accuracy, avg_gain, build_pairwise, build_tensor, gen_synthetic, GammaMode,
};
use hypermatch::solvers::pairwise_ipfp;
use hypermatch::{AffinityConfigF64, SolverConfigF64, SyntheticConfigF64};

use crate::algo::{AlgoSpec, Family};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepVar {
    Outliers,
    Deformation,
}

impl SweepVar {
    fn name(&self) -> &'static str {
        match self {
            SweepVar::Outliers => "outliers",
            SweepVar::Deformation => "deformation",
        }
    }
}

fn default_scale() -> f64 {
    1.0
}
fn default_knn() -> usize {
    300
}
fn default_sigma_s() -> f64 {
    0.5
}

/// Benchmark specification file (JSON).
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSpec {
    pub sweep: SweepVar,
    pub values: Vec<f64>,
    pub trials: usize,
    pub algos: Vec<String>,
    pub n_in: usize,
    #[serde(default)]
    pub n_out: usize,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_knn")]
    pub knn: usize,
    #[serde(default)]
    pub triples: Option<usize>,
    /// Fixed weight decay rate; omitted means automatic.
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default = "default_sigma_s")]
    pub sigma_s: f64,
}

impl BenchSpec {
    fn validate(&self) -> Result<Vec<AlgoSpec>, CliError> {
        if self.trials < 1 {
            return Err(CliError::usage("bench spec: trials must be at least 1"));
        }
        if self.values.is_empty() {
            return Err(CliError::usage("bench spec: values must be non-empty"));
        }
        if self.algos.is_empty() {
            return Err(CliError::usage("bench spec: algos must be non-empty"));
        }
        if self.sweep == SweepVar::Outliers {
            for &v in &self.values {
                if v < 0.0 || v.fract() != 0.0 {
                    return Err(CliError::usage(format!(
                        "bench spec: outlier counts must be nonnegative integers, got {v}"
                    )));
                }
            }
        }
        self.algos
            .iter()
            .map(|a| AlgoSpec::parse(a).map_err(CliError::usage))
            .collect()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-trial seed: the master seed mixed with the sweep-value index and the
/// trial index through splitmix64, so every (value, trial) cell is an
/// independent deterministic stream.
pub fn trial_seed(master: u64, value_idx: usize, trial: usize) -> u64 {
    splitmix64(master ^ splitmix64(((value_idx as u64) << 32) | trial as u64))
}

struct Row {
    value: f64,
    trial: usize,
    seed: u64,
    algo: String,
    score: f64,
    accuracy: f64,
    iterations: usize,
    runtime_ms: f64,
}

pub fn run(spec: &BenchSpec, out_dir: &Path, master_seed: u64) -> Result<(), CliError> {
    let algos = spec.validate()?;
    let solver_cfg = SolverConfigF64::default();
    let mut rows: Vec<Row> = Vec::new();

    for (vi, &value) in spec.values.iter().enumerate() {
        for trial in 0..spec.trials {
            let seed = trial_seed(master_seed, vi, trial);
            let syn = SyntheticConfigF64 {
                n_in: spec.n_in,
                n_out: match spec.sweep {
                    SweepVar::Outliers => value as usize,
                    SweepVar::Deformation => spec.n_out,
                },
                sigma: match spec.sweep {
                    SweepVar::Outliers => spec.sigma,
                    SweepVar::Deformation => value,
                },
                scale: spec.scale,
                seed,
            };
            let problem = gen_synthetic(&syn)?;
            let gt = problem.ground_truth.clone().unwrap_or_default();
            let dims = problem.dims()?;
            let needs_tensor = algos.iter().any(|a| a.family != Family::Pairwise);
            let tensor = if needs_tensor {
                let aff = AffinityConfigF64 {
                    gamma: match spec.gamma {
                        Some(g) => GammaMode::Fixed(g),
                        None => GammaMode::Auto,
                    },
                    triples_sampled: spec.triples,
                    knn: spec.knn,
                    seed: splitmix64(seed),
                    ..AffinityConfigF64::default()
                };
                Some(build_tensor(&problem.source, &problem.target, &aff)?)
            } else {
                None
            };
            for algo in &algos {
                let start = Instant::now();
                let (score, acc, iterations) = match algo.family {
                    Family::Pairwise => {
                        let w = build_pairwise(&problem.source, &problem.target, spec.sigma_s)?;
                        let r = pairwise_ipfp(&w, dims)?;
                        (r.value, accuracy::<f64>(&r.assignment, &gt), 1)
                    }
                    _ => {
                        let t = tensor.as_ref().expect("tensor built for tensor solvers");
                        let r = algo.run_tensor(t, &solver_cfg)?;
                        (
                            r.score,
                            accuracy::<f64>(&r.assignment, &gt),
                            r.iterations,
                        )
                    }
                };
                rows.push(Row {
                    value,
                    trial,
                    seed,
                    algo: algo.name(),
                    score,
                    accuracy: acc,
                    iterations,
                    runtime_ms: start.elapsed().as_secs_f64() * 1e3,
                });
            }
        }
    }

    fs::create_dir_all(out_dir)?;
    write_data(spec, out_dir, &rows)?;
    write_summary(spec, out_dir, &rows)?;
    write_pairs(spec, out_dir, &algos, &rows)?;
    Ok(())
}

fn write_data(spec: &BenchSpec, out_dir: &Path, rows: &[Row]) -> Result<(), CliError> {
    let mut text = String::from("sweep_var,value,trial,seed,algo,score,accuracy,iterations,runtime_ms\n");
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            spec.sweep.name(),
            r.value,
            r.trial,
            r.seed,
            r.algo,
            r.score,
            r.accuracy,
            r.iterations,
            r.runtime_ms
        ));
    }
    fs::write(out_dir.join("data.csv"), text)?;
    Ok(())
}

fn write_summary(spec: &BenchSpec, out_dir: &Path, rows: &[Row]) -> Result<(), CliError> {
    let mut text =
        String::from("sweep_var,value,algo,trials,mean_score,mean_accuracy,mean_iterations,mean_runtime_ms\n");
    for &value in &spec.values {
        for algo in &spec.algos {
            let canonical = AlgoSpec::parse(algo).expect("validated").name();
            let group: Vec<&Row> = rows
                .iter()
                .filter(|r| r.value == value && r.algo == canonical)
                .collect();
            if group.is_empty() {
                continue;
            }
            let count = group.len() as f64;
            let mean = |f: &dyn Fn(&Row) -> f64| group.iter().map(|r| f(r)).sum::<f64>() / count;
            text.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                spec.sweep.name(),
                value,
                canonical,
                group.len(),
                mean(&|r| r.score),
                mean(&|r| r.accuracy),
                mean(&|r| r.iterations as f64),
                mean(&|r| r.runtime_ms)
            ));
        }
    }
    fs::write(out_dir.join("summary.csv"), text)?;
    Ok(())
}

/// Pairwise score comparison in the (No., Avg(%)) schema, pooled over the
/// whole sweep. The second-order baseline is excluded: its quadratic value
/// is not on the matching-score scale.
fn write_pairs(
    _spec: &BenchSpec,
    out_dir: &Path,
    algos: &[AlgoSpec],
    rows: &[Row],
) -> Result<(), CliError> {
    let tensor_algos: Vec<String> = algos
        .iter()
        .filter(|a| a.family != Family::Pairwise)
        .map(|a| a.name())
        .collect();
    let scores_of = |name: &str| -> Vec<f64> {
        rows.iter()
            .filter(|r| r.algo == name)
            .map(|r| r.score)
            .collect()
    };
    let mut text = String::from("comparison,no,avg_pct\n");
    for (i, a) in tensor_algos.iter().enumerate() {
        for b in tensor_algos.iter().skip(i + 1) {
            let fa = scores_of(a);
            let fb = scores_of(b);
            let s = avg_gain(&fa, &fb, 1e-9)?;
            let fmt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_else(|| "0".into());
            text.push_str(&format!("{a} > {b},{},{}\n", s.a_better, fmt(s.a_gain_pct)));
            text.push_str(&format!("{a} < {b},{},{}\n", s.b_better, fmt(s.b_gain_pct)));
            text.push_str(&format!("{a} = {b},{},0\n", s.equal));
        }
    }
    fs::write(out_dir.join("pairs.csv"), text)?;
    Ok(())
}
