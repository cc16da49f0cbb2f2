//! Estimator validation: Gaussian MI accuracy, k-d tree against brute force,
//! and mean-aggregate fidelity on a synthetic ensemble.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use chordcorr_core::ensemble::{gen_synthetic, partition_by_edge, EnsembleStore, SyntheticSpec};
use chordcorr_core::estimators::{digamma_unchecked, knn_chebyshev, knn_chebyshev_brute, kraskov_mi_with, JointSampleSet};
use chordcorr_core::pipeline::{aggregate_fidelity, mean_relative_deviation};
use chordcorr_core::{MeasureKind, Strategy, StrategyConfig};

#[derive(Clone, Debug, Serialize)]
pub struct Criterion {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub passed: bool,
    pub criteria: Vec<Criterion>,
}

#[derive(Clone, Debug)]
pub struct ValidateOptions {
    pub perturb_digamma: bool,
    pub seeds: usize,
    pub samples: usize,
    pub knn_instances: usize,
    pub fidelity_dims: [usize; 3],
    pub fidelity_members: usize,
    pub fidelity_edge: usize,
    pub fidelity_pairs: usize,
    pub fidelity_runs: usize,
    pub fidelity_strategy: Strategy,
    pub fidelity_budget: usize,
    pub seed: u64,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            perturb_digamma: false,
            seeds: 20,
            samples: 1000,
            knn_instances: 200,
            fidelity_dims: [32, 32, 8],
            fidelity_members: 200,
            fidelity_edge: 8,
            fidelity_pairs: 50,
            fidelity_runs: 3,
            fidelity_strategy: Strategy::Bos,
            fidelity_budget: 100,
            seed: 42,
        }
    }
}

/// Reference deviations for f = 2 and f = 4, printed next to the measured
/// ones.
const REFERENCE_DEVIATION: [(usize, f64); 2] = [(2, 0.016), (4, 0.017)];

fn gaussian_pair(rng: &mut ChaCha8Rng, n: usize, rho: f64) -> (Vec<f64>, Vec<f64>) {
    let s = (1.0 - rho * rho).sqrt();
    (0..n)
        .map(|_| {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            (a, rho * a + s * b)
        })
        .unzip()
}

fn mi_accuracy(opts: &ValidateOptions) -> Vec<Criterion> {
    // Additive errors cancel in the estimator; a scaled digamma does not.
    let psi = |z: f64| if opts.perturb_digamma { 1.25 * digamma_unchecked(z) } else { digamma_unchecked(z) };
    [0.0, 0.5, 0.9]
        .iter()
        .map(|&rho: &f64| {
            let truth = -0.5 * (1.0 - rho * rho).ln();
            let mut worst: f64 = 0.0;
            let mut sum = 0.0;
            for s in 0..opts.seeds {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (s as u64) << 8 ^ (rho * 100.0) as u64);
                let (x, y) = gaussian_pair(&mut rng, opts.samples, rho);
                let est = kraskov_mi_with(&x, &y, None, psi).unwrap_or(f64::NAN);
                sum += est;
                worst = worst.max((est - truth).abs());
            }
            let mean_err = (sum / opts.seeds as f64 - truth).abs();
            Criterion {
                name: format!("gaussian_mi_rho_{rho}"),
                passed: mean_err <= 0.05,
                measured: mean_err,
                threshold: 0.05,
                detail: format!(
                    "true {truth:.4} nats, mean error {mean_err:.4}, worst single-seed error {worst:.4} over {} seeds of E = {}",
                    opts.seeds, opts.samples
                ),
            }
        })
        .collect()
}

fn knn_oracle(opts: &ValidateOptions) -> Criterion {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(1));
    let mut mismatches = 0;
    for i in 0..opts.knn_instances {
        let n = rng.random_range(16..=512);
        // Every fourth instance is quantised so ties are exercised.
        let q = if i % 4 == 0 { 8.0 } else { 0.0 };
        let draw = |rng: &mut ChaCha8Rng| {
            let v: f64 = rng.sample(StandardNormal);
            if q > 0.0 { (v * q).round() / q } else { v }
        };
        let x: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        let y: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        let set = match JointSampleSet::new(&x, &y, None) {
            Ok(s) => s,
            Err(_) => {
                mismatches += 1;
                continue;
            }
        };
        if knn_chebyshev(&set) != knn_chebyshev_brute(&set) {
            mismatches += 1;
        }
    }
    Criterion {
        name: "knn_tree_equals_brute_force".into(),
        passed: mismatches == 0,
        measured: mismatches as f64,
        threshold: 0.0,
        detail: format!("{mismatches} of {} instances differ", opts.knn_instances),
    }
}

fn fidelity(opts: &ValidateOptions) -> Result<Vec<Criterion>, String> {
    let spec = SyntheticSpec::two_cluster(opts.fidelity_dims, opts.fidelity_members, opts.seed);
    let store = EnsembleStore::new(gen_synthetic(&spec).map_err(|e| e.to_string())?);
    let partition = partition_by_edge(store.grid().dims(), opts.fidelity_edge);
    let mut sampling = StrategyConfig::with_strategy(opts.fidelity_strategy, opts.fidelity_budget);
    sampling.seed = opts.seed;
    let mut out = Vec::new();
    for f in [1usize, 2, 4] {
        let level = f.trailing_zeros() as usize;
        let pairs = aggregate_fidelity(
            &store,
            &partition,
            0,
            level,
            MeasureKind::Ppmcc,
            opts.fidelity_pairs,
            opts.fidelity_runs,
            &sampling,
        )
        .map_err(|e| e.to_string())?;
        let dev = mean_relative_deviation(&pairs).unwrap_or(f64::NAN);
        let reference = REFERENCE_DEVIATION.iter().find(|r| r.0 == f).map(|r| r.1);
        let mut detail = format!(
            "mean relative deviation {:.2}% over {} pairs, {} runs, {} @ {}",
            dev * 100.0,
            pairs.len(),
            opts.fidelity_runs,
            opts.fidelity_strategy.name(),
            opts.fidelity_budget
        );
        if let Some(r) = reference {
            detail.push_str(&format!("; reference {:.1}%", r * 100.0));
        }
        out.push(Criterion { name: format!("aggregate_fidelity_f{f}"), passed: dev <= 0.05, measured: dev, threshold: 0.05, detail });
    }
    Ok(out)
}

pub fn run(opts: &ValidateOptions) -> Result<Report, String> {
    let mut criteria = mi_accuracy(opts);
    criteria.push(knn_oracle(opts));
    criteria.extend(fidelity(opts)?);
    Ok(Report { passed: criteria.iter().all(|c| c.passed), criteria })
}
