//! Gaussian-process surrogate with an incrementally grown Cholesky factor.

use serde::{Deserialize, Serialize};

use super::SamplingError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    Matern52,
    Matern32,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpConfig {
    pub kernel: Kernel,
    pub length_scale: f64,
    pub signal_variance: f64,
    /// Observation noise relative to the signal variance.
    pub noise: f64,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self { kernel: Kernel::Matern52, length_scale: 0.25, signal_variance: 1.0, noise: 1e-6 }
    }
}

const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-6;

/// Posterior over inputs in [0, 1]^dim. The prior mean is the mean of the
/// observations.
#[derive(Clone, Debug)]
pub struct GpModel {
    cfg: GpConfig,
    dim: usize,
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Packed lower-triangular factor; row i starts at i(i+1)/2.
    chol: Vec<f64>,
    /// Reciprocal diagonal of the factor, so solves multiply instead of
    /// divide.
    inv_diag: Vec<f64>,
    /// Extra diagonal term, relative to the signal variance.
    jitter: f64,
    alpha: Vec<f64>,
    mean: f64,
}

impl GpModel {
    pub fn new(dim: usize, cfg: GpConfig) -> Self {
        Self { cfg, dim, xs: vec![], ys: vec![], chol: vec![], inv_diag: vec![], jitter: 0.0, alpha: vec![], mean: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn config(&self) -> &GpConfig {
        &self.cfg
    }

    pub fn prior_mean(&self) -> f64 {
        self.mean
    }

    pub fn kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        let r2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        let r = r2.sqrt() / self.cfg.length_scale;
        let s2 = self.cfg.signal_variance;
        match self.cfg.kernel {
            Kernel::Matern52 => {
                let t = 5f64.sqrt() * r;
                s2 * (1.0 + t + t * t / 3.0) * (-t).exp()
            }
            Kernel::Matern32 => {
                let t = 3f64.sqrt() * r;
                s2 * (1.0 + t) * (-t).exp()
            }
        }
    }

    fn diag(&self) -> f64 {
        self.cfg.signal_variance * (1.0 + self.cfg.noise + self.jitter)
    }

    fn x(&self, i: usize) -> &[f64] {
        &self.xs[i * self.dim..(i + 1) * self.dim]
    }

    /// Appends row `n` of the factor for the already stored point `n`.
    fn extend_factor(&mut self, n: usize) -> bool {
        let base = n * (n + 1) / 2;
        self.chol.truncate(base);
        self.inv_diag.truncate(n);
        let xn = self.x(n).to_vec();
        let mut ss = 0.0;
        for j in 0..n {
            let kj = self.kernel(&xn, self.x(j));
            let rj = j * (j + 1) / 2;
            let s = kj - dot(&self.chol[base..base + j], &self.chol[rj..rj + j]);
            let v = s * self.inv_diag[j];
            self.chol.push(v);
            ss += v * v;
        }
        let d2 = self.diag() - ss;
        if !(d2 > 0.0) || !d2.is_finite() {
            return false;
        }
        self.chol.push(d2.sqrt());
        self.inv_diag.push(1.0 / d2.sqrt());
        true
    }

    fn factor_all(&mut self) -> bool {
        self.chol.clear();
        self.inv_diag.clear();
        (0..self.len()).all(|i| self.extend_factor(i))
    }

    /// Refactors from scratch, escalating the diagonal jitter on failure.
    pub fn refit(&mut self) -> Result<(), SamplingError> {
        if self.factor_all() {
            self.solve_alpha();
            return Ok(());
        }
        let mut j = JITTER_START.max(self.jitter * 10.0);
        while j <= JITTER_MAX * (1.0 + 1e-9) {
            self.jitter = j;
            if self.factor_all() {
                self.solve_alpha();
                return Ok(());
            }
            j *= 10.0;
        }
        Err(SamplingError::Factorization(self.len()))
    }

    /// Conditions on one more observation.
    pub fn update(&mut self, x: &[f64], y: f64) -> Result<(), SamplingError> {
        assert_eq!(x.len(), self.dim);
        if !y.is_finite() {
            return Err(SamplingError::NonFinite);
        }
        self.xs.extend_from_slice(x);
        self.ys.push(y);
        let n = self.len() - 1;
        if self.extend_factor(n) {
            self.solve_alpha();
            Ok(())
        } else {
            self.refit()
        }
    }

    /// Replaces all observations and refits.
    pub fn set_observations(&mut self, xs: Vec<f64>, ys: Vec<f64>) -> Result<(), SamplingError> {
        assert_eq!(xs.len(), ys.len() * self.dim);
        self.xs = xs;
        self.ys = ys;
        self.jitter = 0.0;
        self.refit()
    }

    fn forward(&self, rhs: &mut [f64]) {
        let mut ri = 0;
        for i in 0..rhs.len() {
            let s = rhs[i] - dot(&self.chol[ri..ri + i], &rhs[..i]);
            rhs[i] = s * self.inv_diag[i];
            ri += i + 1;
        }
    }

    fn solve_alpha(&mut self) {
        let n = self.len();
        self.mean = self.ys.iter().sum::<f64>() / n.max(1) as f64;
        let mut a: Vec<f64> = self.ys.iter().map(|y| y - self.mean).collect();
        self.forward(&mut a);
        for i in (0..n).rev() {
            let mut s = a[i];
            for k in i + 1..n {
                s -= self.chol[k * (k + 1) / 2 + i] * a[k];
            }
            a[i] = s / self.chol[i * (i + 1) / 2 + i];
        }
        self.alpha = a;
    }

    /// Posterior mean and variance at `x`; `scratch` is reused storage.
    pub fn predict_with(&self, x: &[f64], scratch: &mut Vec<f64>) -> (f64, f64) {
        let n = self.len();
        scratch.clear();
        if self.dim == 0 {
            scratch.resize(n, self.cfg.signal_variance);
        } else {
            scratch.extend(self.xs.chunks_exact(self.dim).map(|xi| self.kernel(x, xi)));
        }
        let mu = self.mean + dot(scratch, &self.alpha);
        self.forward(scratch);
        let var = self.cfg.signal_variance - dot(scratch, scratch);
        (mu, var.max(0.0))
    }

    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        self.predict_with(x, &mut Vec::new())
    }
}

/// Dot product with four independent accumulators, which lets the
/// compiler keep several multiply-adds in flight.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Upper confidence bound μ + κσ.
pub fn ucb_score(mean: f64, variance: f64, kappa: f64) -> f64 {
    mean + kappa * variance.max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_model(n: usize, dim: usize, seed: u64) -> (GpModel, Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<f64> = (0..n * dim).map(|_| rng.random()).collect();
        let ys: Vec<f64> = (0..n).map(|i| (xs[i * dim] * 6.0).sin() + xs[i * dim + 1]).collect();
        let mut g = GpModel::new(dim, GpConfig::default());
        for i in 0..n {
            g.update(&xs[i * dim..(i + 1) * dim], ys[i]).unwrap();
        }
        (g, xs, ys)
    }

    #[test]
    fn ucb_arithmetic() {
        assert_eq!(ucb_score(1.0, 4.0, 2.0), 5.0);
        assert_eq!(ucb_score(0.3, 0.0, 2.0), 0.3);
        assert_eq!(ucb_score(0.3, 9.0, 0.0), 0.3);
    }

    #[test]
    fn interpolates_observations() {
        let (g, xs, ys) = random_model(30, 3, 1);
        for i in 0..30 {
            let (m, v) = g.predict(&xs[i * 3..i * 3 + 3]);
            assert!((m - ys[i]).abs() < 1e-4, "{m} vs {}", ys[i]);
            assert!(v <= g.config().signal_variance);
        }
    }

    #[test]
    fn incremental_equals_refit() {
        let (g, xs, ys) = random_model(60, 4, 2);
        let mut full = GpModel::new(4, GpConfig::default());
        full.set_observations(xs, ys).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let p: Vec<f64> = (0..4).map(|_| rng.random()).collect();
            let (a, va) = g.predict(&p);
            let (b, vb) = full.predict(&p);
            assert!((a - b).abs() < 1e-8 && (va - vb).abs() < 1e-8);
        }
    }

    #[test]
    fn mirrored_observations_give_symmetric_mean() {
        let mut g = GpModel::new(2, GpConfig::default());
        g.update(&[0.3, 0.5], 1.0).unwrap();
        g.update(&[0.7, 0.5], 1.0).unwrap();
        g.update(&[0.5, 0.5], -0.5).unwrap();
        for t in [0.0, 0.1, 0.25, 0.4] {
            let (a, _) = g.predict(&[0.5 - t, 0.2]);
            let (b, _) = g.predict(&[0.5 + t, 0.2]);
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn duplicate_points_escalate_jitter() {
        let mut cfg = GpConfig::default();
        cfg.noise = 0.0;
        let mut g = GpModel::new(1, cfg);
        g.update(&[0.5], 1.0).unwrap();
        g.update(&[0.5], 1.0).unwrap();
        assert!(g.jitter > 0.0);
        let (m, _) = g.predict(&[0.5]);
        assert!((m - 1.0).abs() < 1e-6);
    }

    #[test]
    fn matern32_variant() {
        let mut cfg = GpConfig::default();
        cfg.kernel = Kernel::Matern32;
        let mut g = GpModel::new(1, cfg);
        g.update(&[0.2], 0.0).unwrap();
        assert!((g.kernel(&[0.0], &[0.0]) - 1.0).abs() < 1e-15);
        let k = g.kernel(&[0.0], &[0.25]);
        assert!((k - (1.0 + 3f64.sqrt()) * (-(3f64.sqrt())).exp()).abs() < 1e-15);
    }
}
