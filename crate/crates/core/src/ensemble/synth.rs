//! Synthetic correlation-cluster ensembles.
//!
//! Each grid point blends i.i.d. standard-normal noise with a shared
//! per-member signal: `v(p, e) = (1 - w(p)) η(p, e) + w(p) s(c, e)`.
//! The weight `w` is 1 within `core` (l∞ distance) of the nearest cluster
//! centre and falls linearly to 0 at `radius`. Clusters with the same
//! `signal` id share their signal, so their cores are perfectly correlated.
//!
//! Text configuration (TOML):
//!
//! ```toml
//! dims = [64, 64, 8]
//! members = 200
//! seed = 42
//! variables = ["synth"]      # optional, default ["synth"]
//!
//! [[cluster]]
//! center = [16, 16, 4]
//! radius = 16.0
//! core = 7.0                 # optional, default 0
//! signal = 0                 # optional, default = cluster index
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Dims, EnsembleError, EnsembleGrid, VariableMeta};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSpec {
    pub center: [usize; 3],
    pub radius: f64,
    #[serde(default)]
    pub core: f64,
    #[serde(default)]
    pub signal: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub dims: [usize; 3],
    pub members: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_variables")]
    pub variables: Vec<String>,
    #[serde(default, rename = "cluster")]
    pub clusters: Vec<ClusterSpec>,
}

fn default_seed() -> u64 {
    42
}

fn default_variables() -> Vec<String> {
    vec!["synth".to_string()]
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    dims: [usize; 3],
    members: usize,
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default = "default_variables")]
    variables: Vec<String>,
    #[serde(default)]
    cluster: Vec<toml::Spanned<ClusterSpec>>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

impl SyntheticSpec {
    /// The two-cluster layout used throughout the tests and demos: two
    /// cluster cores sharing one signal, in opposite quadrants of the grid.
    pub fn two_cluster(dims: [usize; 3], members: usize, seed: u64) -> Self {
        let [x, y, z] = dims;
        let r = (x.min(y) as f64) / 4.0;
        Self {
            dims,
            members,
            seed,
            variables: default_variables(),
            clusters: vec![
                ClusterSpec { center: [x / 4, y / 4, z / 2], radius: r, core: r / 2.0, signal: Some(0) },
                ClusterSpec { center: [3 * x / 4, 3 * y / 4, z / 2], radius: r, core: r / 2.0, signal: Some(0) },
            ],
        }
    }

    /// Parses the TOML form; errors carry the offending line.
    pub fn from_toml(text: &str) -> Result<Self, EnsembleError> {
        let raw: RawSpec = toml::from_str(text).map_err(|e| EnsembleError::SpecParse {
            line: e.span().map(|s| line_of(text, s.start)).unwrap_or(1),
            message: e.message().to_string(),
        })?;
        let spec = SyntheticSpec {
            dims: raw.dims,
            members: raw.members,
            seed: raw.seed,
            variables: raw.variables,
            clusters: raw.cluster.iter().map(|c| c.get_ref().clone()).collect(),
        };
        if let Err(EnsembleError::InvalidSpec(msg)) = spec.validate() {
            // Attribute cluster errors to their table.
            let line = raw
                .cluster
                .iter()
                .enumerate()
                .find(|(i, _)| msg.starts_with(&format!("cluster {i}:")))
                .map(|(_, c)| line_of(text, c.span().start))
                .unwrap_or(1);
            return Err(EnsembleError::SpecParse { line, message: msg });
        }
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    pub fn validate(&self) -> Result<(), EnsembleError> {
        let d = self.dims;
        if d.iter().any(|&v| v == 0) {
            return Err(EnsembleError::InvalidSpec(format!("dims must be >= 1, got {d:?}")));
        }
        if self.members < 2 {
            return Err(EnsembleError::InvalidSpec(format!("members must be >= 2, got {}", self.members)));
        }
        if self.variables.is_empty() {
            return Err(EnsembleError::InvalidSpec("at least one variable is required".into()));
        }
        for (i, c) in self.clusters.iter().enumerate() {
            if (0..3).any(|a| c.center[a] >= d[a]) {
                return Err(EnsembleError::InvalidSpec(format!("cluster {i}: center {:?} outside grid {d:?}", c.center)));
            }
            if !(c.radius >= 0.0) || !c.radius.is_finite() {
                return Err(EnsembleError::InvalidSpec(format!("cluster {i}: radius must be >= 0")));
            }
            if !(c.core >= 0.0) || c.core > c.radius {
                return Err(EnsembleError::InvalidSpec(format!("cluster {i}: core must lie in [0, radius]")));
            }
        }
        Ok(())
    }

    /// Index of the nearest cluster (l∞ distance, lowest id on ties) and
    /// that distance.
    pub fn nearest_cluster(&self, p: [usize; 3]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, c) in self.clusters.iter().enumerate() {
            let d = (0..3).map(|a| (p[a] as f64 - c.center[a] as f64).abs()).fold(0.0, f64::max);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        best
    }

    /// Blend weight at `p` and the signal id it refers to.
    pub fn weight(&self, p: [usize; 3]) -> (f64, usize) {
        match self.nearest_cluster(p) {
            None => (0.0, 0),
            Some((i, d)) => {
                let c = &self.clusters[i];
                let w = if d <= c.core {
                    1.0
                } else if d >= c.radius {
                    0.0
                } else {
                    (c.radius - d) / (c.radius - c.core)
                };
                (w, c.signal.unwrap_or(i))
            }
        }
    }
}

/// Deterministic for a fixed spec (including its seed).
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<EnsembleGrid, EnsembleError> {
    spec.validate()?;
    let dims = Dims::from_array(spec.dims);
    let n = dims.count();
    let e = spec.members;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let n_signals =
        spec.clusters.iter().enumerate().map(|(i, c)| c.signal.unwrap_or(i) + 1).max().unwrap_or(0);
    let signals: Vec<f64> = (0..n_signals * e).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();

    let weights: Vec<(f32, usize)> = (0..n)
        .map(|i| {
            let (w, s) = spec.weight(dims.coords(i));
            (w as f32, s)
        })
        .collect();

    let mut values = Vec::with_capacity(n * e * spec.variables.len());
    for _ in &spec.variables {
        for m in 0..e {
            for &(w, s) in &weights {
                let eta = rng.sample::<f64, _>(StandardNormal) as f32;
                let v = if w > 0.0 {
                    let sig = signals[s * e + m] as f32;
                    (1.0 - w) * eta + w * sig
                } else {
                    eta
                };
                values.push(v);
            }
        }
    }
    let variables = spec.variables.iter().map(VariableMeta::new).collect();
    EnsembleGrid::new(dims, e, variables, values)
}
