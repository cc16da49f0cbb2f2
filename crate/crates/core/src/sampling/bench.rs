//! Convergence benchmarks of the sampling strategies against objectives
//! with known extrema.

use std::fmt::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{estimate_pair_maximum, PairObjective, SearchDomain6, Strategy, StrategyConfig};
use crate::par::{map_indexed, splitmix64};

/// A family of objectives with exactly known maximum and minimum.
pub trait BenchOracle: Sync {
    fn pairs(&self) -> usize;
    /// `(max_true, min_true)` of pair `i`.
    fn bounds(&self, i: usize) -> (f64, f64);
    fn objective(&self, i: usize) -> Box<dyn PairObjective + '_>;
}

/// Unnormalised diagonal Gaussian density over a pair of bricks. Separable,
/// so the discrete maximum is the voxel nearest the mean and the minimum
/// sits at the corner farthest from it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gaussian6 {
    pub domain: SearchDomain6,
    pub mean: [f64; 6],
    pub sigma: [f64; 6],
}

impl Gaussian6 {
    /// Random objective on `brick × brick`: mean within the central half of
    /// each axis, σ between 0.15 and 0.35 of the extent.
    pub fn random<R: Rng>(brick: [usize; 3], rng: &mut R) -> Self {
        let domain = SearchDomain6::new(brick, brick);
        let mut mean = [0.0; 6];
        let mut sigma = [1.0; 6];
        for a in 0..6 {
            let d = domain.extents[a] as f64;
            mean[a] = (d - 1.0) * rng.random_range(0.25..0.75);
            sigma[a] = d * rng.random_range(0.15..0.35);
        }
        Self { domain, mean, sigma }
    }

    pub fn value(&self, p: &[usize; 6]) -> f64 {
        let q: f64 = (0..6).map(|a| ((p[a] as f64 - self.mean[a]) / self.sigma[a]).powi(2)).sum();
        (-0.5 * q).exp()
    }

    pub fn argmax(&self) -> [usize; 6] {
        let mut p = [0; 6];
        for a in 0..6 {
            p[a] = (self.mean[a].round().max(0.0) as usize).min(self.domain.extents[a] - 1);
        }
        p
    }

    pub fn argmin(&self) -> [usize; 6] {
        let mut p = [0; 6];
        for a in 0..6 {
            let last = self.domain.extents[a] - 1;
            p[a] = if self.mean[a] > last as f64 - self.mean[a] { 0 } else { last };
        }
        p
    }
}

impl PairObjective for Gaussian6 {
    fn domain(&self) -> SearchDomain6 {
        self.domain
    }

    fn evaluate(&mut self, p: [usize; 6]) -> Option<f64> {
        Some(self.value(&p))
    }
}

/// Fixed set of random [`Gaussian6`] objectives.
#[derive(Clone, Debug)]
pub struct Gaussian6Oracle {
    pub objectives: Vec<Gaussian6>,
}

impl Gaussian6Oracle {
    pub fn new(brick: [usize; 3], pairs: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self { objectives: (0..pairs).map(|_| Gaussian6::random(brick, &mut rng)).collect() }
    }
}

impl BenchOracle for Gaussian6Oracle {
    fn pairs(&self) -> usize {
        self.objectives.len()
    }

    fn bounds(&self, i: usize) -> (f64, f64) {
        let g = &self.objectives[i];
        (g.value(&g.argmax()), g.value(&g.argmin()))
    }

    fn objective(&self, i: usize) -> Box<dyn PairObjective + '_> {
        Box::new(self.objectives[i].clone())
    }
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub strategy: Strategy,
    pub budget: usize,
    pub run: usize,
    pub pair_id: usize,
    pub normalized_error: f64,
    pub elapsed_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub strategy: Strategy,
    pub budget: usize,
    pub mean_error: f64,
    pub mean_elapsed_ms: f64,
    pub samples: usize,
}

/// `(max_true − found) / (max_true − min_true)`, clamped to [0, 1]; a pair
/// with no defined sample counts as error 1.
pub fn normalized_error(max_true: f64, min_true: f64, found: Option<f64>) -> f64 {
    let range = max_true - min_true;
    match found {
        None => 1.0,
        Some(_) if !(range > 0.0) => 0.0,
        Some(v) => ((max_true - v) / range).clamp(0.0, 1.0),
    }
}

/// Runs every strategy at every budget `runs` times on every oracle pair.
/// Rows are ordered by strategy, budget, run and pair.
pub fn bench_strategies(
    oracle: &dyn BenchOracle,
    strategies: &[Strategy],
    budgets: &[usize],
    runs: usize,
    base: &StrategyConfig,
) -> Vec<BenchRow> {
    let pairs = oracle.pairs();
    let mut jobs = Vec::new();
    for &s in strategies {
        for &b in budgets {
            for run in 0..runs {
                for pair in 0..pairs {
                    jobs.push((s, b, run, pair));
                }
            }
        }
    }
    map_indexed(jobs.len(), |j| {
        let (strategy, budget, run, pair_id) = jobs[j];
        let mut cfg = base.clone();
        cfg.strategy = Some(strategy);
        cfg.budget = budget;
        // The seed depends on run and pair only, so runs at growing budgets
        // share their sample prefix.
        cfg.seed = splitmix64(base.seed ^ splitmix64((run as u64) << 32 | pair_id as u64));
        let (max_true, min_true) = oracle.bounds(pair_id);
        let mut obj = oracle.objective(pair_id);
        let res = estimate_pair_maximum(obj.as_mut(), &cfg);
        let elapsed_ms = res.as_ref().map_or(0.0, |e| e.elapsed * 1e3);
        BenchRow {
            strategy,
            budget,
            run,
            pair_id,
            normalized_error: normalized_error(max_true, min_true, res.ok().map(|e| e.value)),
            elapsed_ms,
        }
    })
}

/// Mean error and time per (strategy, budget), in first-appearance order.
pub fn summarize(rows: &[BenchRow]) -> Vec<BenchSummary> {
    let mut out: Vec<BenchSummary> = Vec::new();
    for r in rows {
        let i = match out.iter().position(|s| s.strategy == r.strategy && s.budget == r.budget) {
            Some(i) => i,
            None => {
                out.push(BenchSummary {
                    strategy: r.strategy,
                    budget: r.budget,
                    mean_error: 0.0,
                    mean_elapsed_ms: 0.0,
                    samples: 0,
                });
                out.len() - 1
            }
        };
        let s = &mut out[i];
        s.mean_error += r.normalized_error;
        s.mean_elapsed_ms += r.elapsed_ms;
        s.samples += 1;
    }
    for s in &mut out {
        s.mean_error /= s.samples as f64;
        s.mean_elapsed_ms /= s.samples as f64;
    }
    out
}

pub fn rows_to_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from("strategy,budget,run,pair_id,normalized_error,elapsed_ms\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{:.3}",
            r.strategy.name(),
            r.budget,
            r.run,
            r.pair_id,
            r.normalized_error,
            r.elapsed_ms
        );
    }
    s
}
