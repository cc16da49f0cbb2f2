use super::digamma::digamma_unchecked;
use super::kdtree::KdTree2;
use super::EstimatorError;
use crate::par::splitmix64;

/// Neighbour order used when none is given: ⌈3n/100⌉ clamped to [1, n−1].
pub fn default_k(n: usize) -> usize {
    (3 * n).div_ceil(100).clamp(1, n.saturating_sub(1).max(1))
}

/// Paired samples prepared for neighbour search.
#[derive(Clone, Debug)]
pub struct JointSampleSet {
    x: Vec<f64>,
    y: Vec<f64>,
    k: usize,
    jittered: bool,
}

impl JointSampleSet {
    /// Takes the samples as given; duplicate joint points are separated by
    /// [`jitter_duplicates`].
    pub fn new(x: &[f64], y: &[f64], k: Option<usize>) -> Result<Self, EstimatorError> {
        if x.len() != y.len() {
            return Err(EstimatorError::LengthMismatch(x.len(), y.len()));
        }
        let n = x.len();
        if n < 2 {
            return Err(EstimatorError::TooFewSamples { needed: 2, got: n });
        }
        if x.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(EstimatorError::NonFinite);
        }
        let k = k.unwrap_or_else(|| default_k(n));
        if k == 0 || k >= n {
            return Err(EstimatorError::InvalidK { k, n });
        }
        let mut x = x.to_vec();
        let mut y = y.to_vec();
        let jittered = jitter_duplicates(&mut x, &mut y);
        Ok(Self { x, y, k, jittered })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Whether duplicate points forced the jitter rule.
    pub fn jittered(&self) -> bool {
        self.jittered
    }
}

/// Adds `u_i · 1e-10 · range` to both coordinates of every point when any
/// two joint points coincide. `u_i ∈ [-0.5, 0.5)` depends only on the index,
/// so the rule is reproducible and treats x and y alike.
pub fn jitter_duplicates(x: &mut [f64], y: &mut [f64]) -> bool {
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));
    let dup = order.windows(2).any(|w| x[w[0]] == x[w[1]] && y[w[0]] == y[w[1]]);
    if !dup {
        return false;
    }
    let range = |v: &[f64]| {
        let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &a| (l.min(a), h.max(a)));
        if hi > lo {
            hi - lo
        } else {
            1.0
        }
    };
    let (rx, ry) = (range(x), range(y));
    for i in 0..n {
        let u = (splitmix64(i as u64) >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
        x[i] += u * 1e-10 * rx;
        y[i] += u * 1e-10 * ry;
    }
    true
}

/// Per-sample k-th neighbour distance and strict marginal counts.
#[derive(Clone, Debug, PartialEq)]
pub struct KnnResult {
    pub eps: Vec<f64>,
    pub nx: Vec<usize>,
    pub ny: Vec<usize>,
}

/// #{j ≠ i : |v_j − v| < eps}, with `sorted` holding all values including v.
fn strict_count(sorted: &[f64], v: f64, eps: f64) -> usize {
    let start = sorted.partition_point(|&s| v - s >= eps);
    let end = sorted.partition_point(|&s| s - v < eps);
    let c = end.saturating_sub(start);
    if eps > 0.0 {
        c - 1
    } else {
        c
    }
}

fn counts(set: &JointSampleSet, eps: Vec<f64>) -> KnnResult {
    let mut sx = set.x.clone();
    let mut sy = set.y.clone();
    sx.sort_by(f64::total_cmp);
    sy.sort_by(f64::total_cmp);
    let nx = (0..set.len()).map(|i| strict_count(&sx, set.x[i], eps[i])).collect();
    let ny = (0..set.len()).map(|i| strict_count(&sy, set.y[i], eps[i])).collect();
    KnnResult { eps, nx, ny }
}

/// Chebyshev k-NN over the joint samples through a k-d tree.
pub fn knn_chebyshev(set: &JointSampleSet) -> KnnResult {
    let tree = KdTree2::new(&set.x, &set.y);
    let mut buf = Vec::with_capacity(set.k);
    let eps = (0..set.len()).map(|i| tree.kth_distance(i, set.k, &mut buf)).collect();
    counts(set, eps)
}

/// Quadratic reference path: full distance table per sample.
pub fn knn_chebyshev_brute(set: &JointSampleSet) -> KnnResult {
    let n = set.len();
    let mut eps = Vec::with_capacity(n);
    let mut nx = Vec::with_capacity(n);
    let mut ny = Vec::with_capacity(n);
    let mut d = Vec::with_capacity(n);
    for i in 0..n {
        d.clear();
        for j in 0..n {
            if j != i {
                d.push((set.x[i] - set.x[j]).abs().max((set.y[i] - set.y[j]).abs()));
            }
        }
        let (_, e, _) = d.select_nth_unstable_by(set.k - 1, f64::total_cmp);
        let e = *e;
        eps.push(e);
        nx.push((0..n).filter(|&j| j != i && (set.x[i] - set.x[j]).abs() < e).count());
        ny.push((0..n).filter(|&j| j != i && (set.y[i] - set.y[j]).abs() < e).count());
    }
    KnnResult { eps, nx, ny }
}

fn standardize(v: &[f64]) -> Result<Vec<f64>, EstimatorError> {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    if !var.is_finite() {
        return Err(EstimatorError::NonFinite);
    }
    let sd = var.sqrt();
    if sd == 0.0 || v.iter().all(|&a| a == v[0]) {
        return Err(EstimatorError::Degenerate);
    }
    Ok(v.iter().map(|a| (a - mean) / sd).collect())
}

/// Kraskov mutual information estimate in nats. Marginals are standardised
/// first; small negative values are returned unchanged.
pub fn kraskov_mi(x: &[f64], y: &[f64], k: Option<usize>) -> Result<f64, EstimatorError> {
    kraskov_mi_with(x, y, k, digamma_unchecked)
}

/// [`kraskov_mi`] with a caller-supplied digamma.
pub fn kraskov_mi_with(
    x: &[f64],
    y: &[f64],
    k: Option<usize>,
    psi: impl Fn(f64) -> f64,
) -> Result<f64, EstimatorError> {
    if x.len() != y.len() {
        return Err(EstimatorError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 4 {
        return Err(EstimatorError::TooFewSamples { needed: 4, got: x.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(EstimatorError::NonFinite);
    }
    let xs = standardize(x)?;
    let ys = standardize(y)?;
    let set = JointSampleSet::new(&xs, &ys, k)?;
    let knn = knn_chebyshev(&set);
    let n = set.len();
    let mut acc = 0.0;
    for i in 0..n {
        acc += psi(knn.nx[i].max(1) as f64) + psi(knn.ny[i].max(1) as f64);
    }
    Ok(psi(n as f64) + psi(set.k as f64) - acc / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn default_k_values() {
        assert_eq!(default_k(100), 3);
        assert_eq!(default_k(1000), 30);
        assert_eq!(default_k(101), 4);
        assert_eq!(default_k(2), 1);
    }

    #[test]
    fn three_points_on_diagonal() {
        let s = JointSampleSet::new(&[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0], Some(1)).unwrap();
        let r = knn_chebyshev(&s);
        assert_eq!(r.eps, vec![1.0, 1.0, 1.0]);
        assert_eq!(r.nx, vec![0, 0, 0]);
        assert_eq!(r, knn_chebyshev_brute(&s));
    }

    #[test]
    fn farthest_point_at_k_max() {
        let x = [0.0, 3.0, 1.0, 7.0, 2.5];
        let y = [1.0, -2.0, 0.5, 0.0, 4.0];
        let s = JointSampleSet::new(&x, &y, Some(4)).unwrap();
        let r = knn_chebyshev(&s);
        for i in 0..5 {
            let far = (0..5).filter(|&j| j != i).map(|j| (x[i] - x[j]).abs().max((y[i] - y[j]).abs())).fold(0.0, f64::max);
            assert_eq!(r.eps[i], far);
        }
    }

    #[test]
    fn tree_matches_brute_force_256() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..256).map(|_| rng.random()).collect();
        let y: Vec<f64> = (0..256).map(|_| rng.random()).collect();
        let s = JointSampleSet::new(&x, &y, Some(7)).unwrap();
        assert_eq!(knn_chebyshev(&s), knn_chebyshev_brute(&s));
    }

    #[test]
    fn duplicates_are_jittered() {
        let x = [1.0, 1.0, 2.0, 3.0, 1.0];
        let y = [5.0, 5.0, 1.0, 0.0, 5.0];
        let s = JointSampleSet::new(&x, &y, Some(1)).unwrap();
        assert!(s.jittered());
        let r = knn_chebyshev(&s);
        assert!(r.eps.iter().all(|&e| e > 0.0));
        assert_eq!(r, knn_chebyshev_brute(&s));
        let plain = JointSampleSet::new(&[1.0, 2.0], &[1.0, 1.0], Some(1)).unwrap();
        assert!(!plain.jittered());
    }

    #[test]
    fn counts_bounded_by_k_minus_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..300).map(|_| rng.random()).collect();
        let y: Vec<f64> = (0..300).map(|_| rng.random()).collect();
        let s = JointSampleSet::new(&x, &y, Some(9)).unwrap();
        let r = knn_chebyshev(&s);
        // the k-th neighbour sits on the boundary in one marginal
        assert!(r.nx.iter().chain(&r.ny).all(|&c| c + 1 >= 9));
    }

    #[test]
    fn errors() {
        assert_eq!(kraskov_mi(&[1.0; 10], &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0], None), Err(EstimatorError::Degenerate));
        assert!(matches!(kraskov_mi(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], None), Err(EstimatorError::TooFewSamples { .. })));
        assert!(matches!(JointSampleSet::new(&[1.0, 2.0], &[1.0, 2.0], Some(2)), Err(EstimatorError::InvalidK { .. })));
    }

    fn gaussian_pair(rho: f64, n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = (1.0 - rho * rho).sqrt();
        (0..n)
            .map(|_| {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                (a, rho * a + s * b)
            })
            .unzip()
    }

    #[test]
    fn gaussian_strong_dependence() {
        let m: f64 = (0..5).map(|s| {
            let (x, y) = gaussian_pair(0.9, 1000, s);
            kraskov_mi(&x, &y, None).unwrap()
        }).sum::<f64>() / 5.0;
        let truth = -0.5 * (1.0f64 - 0.81).ln();
        assert!((m - truth).abs() < 0.08, "{m} vs {truth}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn symmetric_and_affine_invariant(
            seed in 0u64..10_000,
            n in 8usize..200,
            a in 0.01f64..100.0,
            b in -50.0f64..50.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            let y: Vec<f64> = x.iter().map(|v| v * 0.5 + rng.random::<f64>()).collect();
            let mi = kraskov_mi(&x, &y, None).unwrap();
            prop_assert_eq!(mi, kraskov_mi(&y, &x, None).unwrap());
            let ax: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            prop_assert!((kraskov_mi(&ax, &y, None).unwrap() - mi).abs() < 1e-9);
        }

        #[test]
        fn tree_equals_brute(seed in 0u64..10_000, n in 16usize..300, coarse in any::<bool>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = |v: f64| if coarse { (v * 8.0).floor() } else { v };
            let x: Vec<f64> = (0..n).map(|_| q(rng.random())).collect();
            let y: Vec<f64> = (0..n).map(|_| q(rng.random())).collect();
            let s = JointSampleSet::new(&x, &y, None).unwrap();
            prop_assert_eq!(knn_chebyshev(&s), knn_chebyshev_brute(&s));
        }
    }
}
