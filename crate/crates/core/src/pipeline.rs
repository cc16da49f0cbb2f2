//! End-to-end computation of context, focus and matrix diagrams from an
//! [`EnsembleStore`]. Shared by the CLI, the HTTP service and the browser
//! demo so all three produce identical models for identical inputs.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensemble::{
    partition_by_edge, partition_grid, refine_brick, BrickPartition, EnsembleError, EnsembleGrid, EnsembleStore,
    LevelView, VoxelRange,
};
use crate::estimators::MeasureKind;
use crate::layout::{
    build_context_diagram, build_focus_diagram, build_matrix, DiagramModel, DiagramParams, EdgeInput, Filters,
    LayoutError, NodeInput, Selection, ZOrderMap,
};
use crate::par::map_indexed;
use crate::sampling::{
    estimate_pair_maximum, BenchOracle, MaxEstimate, PairObjective, SamplingError, SearchDomain6, Strategy,
    StrategyConfig,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("computation cancelled")]
    Cancelled,
}

/// How the grid is cut into context bricks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BrickSpec {
    /// Brick edge in voxels.
    Edge(usize),
    /// Brick count closest to this target.
    Count(usize),
}

impl Default for BrickSpec {
    fn default() -> Self {
        BrickSpec::Count(128)
    }
}

/// Everything that affects diagram values and geometry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComputeConfig {
    pub measure: MeasureKind,
    /// One or two variable names.
    pub variables: Vec<String>,
    /// Mean-tree level the measure is evaluated on (0 = raw voxels).
    pub level: usize,
    pub bricks: BrickSpec,
    /// Most children per side in a focus view.
    pub focus_capacity: usize,
    pub sampling: StrategyConfig,
    pub filters: Filters,
    pub beta: f64,
    pub spline_samples: usize,
    pub spacing: [f64; 3],
}

impl Default for ComputeConfig {
    fn default() -> Self {
        Self {
            measure: MeasureKind::Ppmcc,
            variables: Vec::new(),
            level: 0,
            bricks: BrickSpec::default(),
            focus_capacity: 64,
            sampling: StrategyConfig::default(),
            filters: Filters::default(),
            beta: 0.85,
            spline_samples: 64,
            spacing: [1.0; 3],
        }
    }
}

impl ComputeConfig {
    /// Stable fingerprint of the value-affecting fields (filters excluded).
    pub fn cache_key(&self, dataset: &str) -> String {
        let value_part = serde_json::json!({
            "measure": self.measure,
            "variables": self.variables,
            "level": self.level,
            "bricks": self.bricks,
            "focus_capacity": self.focus_capacity,
            "sampling": self.sampling,
        });
        fingerprint(&(dataset, value_part.to_string()))
    }

    fn params(&self, key: String) -> DiagramParams {
        let mut p = DiagramParams::new(key, self.measure, self.variables.clone());
        p.level = self.level;
        p.filters = self.filters.clone();
        p.beta = self.beta;
        p.samples = self.spline_samples;
        p.spacing = self.spacing;
        p
    }
}

/// Short hex digest used for cache keys and edge-id prefixes.
pub fn fingerprint<T: Hash>(value: &T) -> String {
    let mut h = DefaultHasher::new();
    value.hash(&mut h);
    format!("{:016x}", h.finish())
}

/// Content digest of a grid, used as the dataset part of view keys so the
/// same data gives the same keys wherever it was loaded.
pub fn dataset_fingerprint(grid: &EnsembleGrid) -> String {
    let mut h = DefaultHasher::new();
    grid.dims().hash(&mut h);
    grid.members().hash(&mut h);
    for v in grid.variables() {
        v.name.hash(&mut h);
    }
    for chunk in grid.values().chunks(4096) {
        for v in chunk {
            v.to_bits().hash(&mut h);
        }
    }
    format!("{:016x}", h.finish())
}

/// Progress reporting and cooperative cancellation for long computations.
#[derive(Clone, Copy, Default)]
pub struct Control<'a> {
    pub progress: Option<&'a (dyn Fn(usize, usize) + Sync)>,
    pub cancel: Option<&'a AtomicBool>,
}

impl Control<'_> {
    fn cancelled(&self) -> bool {
        self.cancel.is_some_and(|c| c.load(Ordering::Relaxed))
    }
}

/// Maximum of a measure between voxels of two bricks on one level.
pub struct BrickPairObjective<'a> {
    views: [LevelView<'a>; 2],
    /// Brick boxes in level coordinates.
    boxes: [VoxelRange; 2],
    same_variable: bool,
    measure: MeasureKind,
    buf: [Vec<f64>; 2],
}

impl<'a> BrickPairObjective<'a> {
    pub fn new(
        store: &'a EnsembleStore,
        bricks: [VoxelRange; 2],
        variables: [usize; 2],
        level: usize,
        measure: MeasureKind,
    ) -> Result<Self, EnsembleError> {
        let views = [store.view(variables[0], level)?, store.view(variables[1], level)?];
        let boxes = bricks.map(|b| b.at_level(level));
        Ok(Self { views, boxes, same_variable: variables[0] == variables[1], measure, buf: [Vec::new(), Vec::new()] })
    }

    fn point(&self, side: usize, p: &[usize; 6]) -> [usize; 3] {
        let o = 3 * side;
        let lo = self.boxes[side].lo;
        [lo[0] + p[o], lo[1] + p[o + 1], lo[2] + p[o + 2]]
    }
}

impl PairObjective for BrickPairObjective<'_> {
    fn domain(&self) -> SearchDomain6 {
        SearchDomain6::new(self.boxes[0].extent(), self.boxes[1].extent())
    }

    fn evaluate(&mut self, p: [usize; 6]) -> Option<f64> {
        let (pa, pb) = (self.point(0, &p), self.point(1, &p));
        // a voxel against itself is trivially dependent
        if self.same_variable && pa == pb {
            return None;
        }
        let [ba, bb] = &mut self.buf;
        if !self.views[0].try_series_into(pa, ba).ok()? || !self.views[1].try_series_into(pb, bb).ok()? {
            return None;
        }
        self.measure.evaluate(ba, bb).ok()
    }
}

/// Converts a level-space argmax back to raw voxels: the lower corner of
/// the aggregate cell, clamped into the brick.
fn argmax_to_raw(est: &mut MaxEstimate, bricks: [VoxelRange; 2], level: usize) {
    for s in 0..2 {
        let lvl = bricks[s].at_level(level);
        for a in 0..3 {
            let cell = lvl.lo[a] + est.argmax[s][a];
            est.argmax[s][a] = (cell << level).clamp(bricks[s].lo[a], bricks[s].hi[a] - 1);
        }
    }
}

/// Estimates the maximum of `measure` between voxels of two raw-space
/// bricks. The returned argmax is in raw voxel coordinates.
pub fn estimate_bricks(
    store: &EnsembleStore,
    bricks: [VoxelRange; 2],
    variables: [usize; 2],
    level: usize,
    measure: MeasureKind,
    config: &StrategyConfig,
) -> Result<MaxEstimate, PipelineError> {
    let mut obj = BrickPairObjective::new(store, bricks, variables, level, measure)?;
    let mut est = estimate_pair_maximum(&mut obj, config)?;
    argmax_to_raw(&mut est, bricks, level);
    Ok(est)
}

/// One brick pair with the variable evaluated on each side.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairTask {
    pub bricks: [VoxelRange; 2],
    pub variables: [usize; 2],
}

/// Estimates every task in parallel. Task `i` uses the seed derived from
/// `(config.sampling.seed, i)`, so results do not depend on scheduling.
pub fn estimate_tasks(
    store: &EnsembleStore,
    tasks: &[PairTask],
    config: &ComputeConfig,
    control: Control<'_>,
) -> Result<Vec<Result<MaxEstimate, String>>, PipelineError> {
    config.sampling.validate()?;
    let total = tasks.len();
    let done = AtomicUsize::new(0);
    if let Some(p) = control.progress {
        p(0, total);
    }
    let out = map_indexed(total, |i| {
        if control.cancelled() {
            return None;
        }
        let t = &tasks[i];
        let r = estimate_bricks(store, t.bricks, t.variables, config.level, config.measure, &config.sampling.for_item(i as u64))
            .map_err(|e| e.to_string());
        let n = done.fetch_add(1, Ordering::Relaxed) + 1;
        if let Some(p) = control.progress {
            p(n, total);
        }
        Some(r)
    });
    if control.cancelled() {
        return Err(PipelineError::Cancelled);
    }
    Ok(out.into_iter().map(|r| r.expect("not cancelled")).collect())
}

fn variable_ids(store: &EnsembleStore, names: &[String]) -> Result<Vec<usize>, PipelineError> {
    if names.is_empty() || names.len() > 2 {
        return Err(PipelineError::InvalidConfig(format!("expected one or two variables, got {}", names.len())));
    }
    Ok(names.iter().map(|n| store.grid().variable_index(n)).collect::<Result<_, _>>()?)
}

/// Variable pairs drawn as chords: each variable with itself and, for two
/// variables, both cross orientations.
fn chord_variable_pairs(n: usize) -> Vec<[usize; 2]> {
    if n == 1 {
        vec![[0, 0]]
    } else {
        vec![[0, 0], [1, 1], [0, 1], [1, 0]]
    }
}

fn node_inputs(store: &EnsembleStore, bricks: &[VoxelRange], vars: &[usize]) -> Vec<NodeInput> {
    bricks
        .iter()
        .map(|b| NodeInput {
            brick: *b,
            spread: vars.iter().map(|&v| Some(store.spread(v, b)).filter(|s| s.is_finite())).collect(),
        })
        .collect()
}

pub fn context_partition(store: &EnsembleStore, spec: BrickSpec) -> BrickPartition {
    let dims = store.grid().dims();
    match spec {
        BrickSpec::Edge(e) => partition_by_edge(dims, e),
        BrickSpec::Count(m) => partition_grid(dims, m),
    }
}

fn check_level(store: &EnsembleStore, level: usize) -> Result<(), PipelineError> {
    if level > store.max_level() {
        return Err(PipelineError::InvalidConfig(format!("level {level} beyond maximum {}", store.max_level())));
    }
    Ok(())
}

/// Which diagram a set of estimates belongs to.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViewKind {
    Context,
    Focus { first: VoxelRange, second: VoxelRange },
    Matrix { regions: Vec<VoxelRange> },
}

/// Cache key of one view; also the diagram key that prefixes edge ids.
pub fn view_key(dataset: &str, config: &ComputeConfig, kind: &ViewKind) -> String {
    fingerprint(&(config.cache_key(dataset), kind))
}

/// Estimates for one diagram, independent of filters and styling, so a
/// diagram can be re-rendered under new filters without resampling.
#[derive(Clone, Debug)]
pub struct ViewEstimates {
    pub kind: ViewKind,
    /// Diagram key; prefixes edge ids.
    pub key: String,
    nodes: Vec<NodeInput>,
    /// One map for context, two (A then B) for focus, none for matrix.
    zorders: Vec<ZOrderMap>,
    /// Row-major n×n grid for matrix views.
    edges: Vec<EdgeInput>,
}

impl ViewEstimates {
    pub fn nodes(&self) -> impl Iterator<Item = &VoxelRange> {
        self.nodes.iter().map(|n| &n.brick)
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Builds the diagram under the filters and styling of `config`.
    pub fn render(&self, config: &ComputeConfig) -> Result<DiagramModel, PipelineError> {
        let params = config.params(self.key.clone());
        Ok(match &self.kind {
            ViewKind::Context => build_context_diagram(&self.nodes, &self.zorders[0], &self.edges, &params)?,
            ViewKind::Focus { first, second } => {
                let na = self.zorders[0].len();
                build_focus_diagram(
                    &self.nodes[..na],
                    &self.zorders[0],
                    &self.nodes[na..],
                    &self.zorders[1],
                    &self.edges,
                    Selection::new(*first, *second),
                    &params,
                )?
            }
            ViewKind::Matrix { .. } => {
                let n = self.nodes.len();
                let grid: Vec<Vec<_>> = self.edges.chunks(n.max(1)).map(|r| r.iter().map(|e| e.estimate.clone()).collect()).collect();
                build_matrix(&self.nodes, &grid, &params)?
            }
        })
    }
}

fn fill(edges: &mut [EdgeInput], results: Vec<Result<MaxEstimate, String>>) {
    for (e, r) in edges.iter_mut().zip(results) {
        e.estimate = Some(r);
    }
}

/// All-pairs estimates over the configured context partition.
pub fn estimate_context(
    store: &EnsembleStore,
    dataset: &str,
    config: &ComputeConfig,
    control: Control<'_>,
) -> Result<ViewEstimates, PipelineError> {
    let vars = variable_ids(store, &config.variables)?;
    check_level(store, config.level)?;
    let partition = context_partition(store, config.bricks);
    let bricks = partition.bricks_in_zorder();
    let pairs = chord_variable_pairs(vars.len());
    let mut tasks = Vec::new();
    let mut edges = Vec::new();
    for a in 0..bricks.len() {
        for b in a + 1..bricks.len() {
            for vp in &pairs {
                tasks.push(PairTask { bricks: [bricks[a], bricks[b]], variables: [vars[vp[0]], vars[vp[1]]] });
                edges.push(EdgeInput { a, b, variable_pair: *vp, estimate: None });
            }
        }
    }
    fill(&mut edges, estimate_tasks(store, &tasks, config, control)?);
    Ok(ViewEstimates {
        kind: ViewKind::Context,
        key: view_key(dataset, config, &ViewKind::Context),
        nodes: node_inputs(store, &bricks, &vars),
        zorders: vec![partition.zorder()],
        edges,
    })
}

/// Children of a brick for a focus view, with their z-order map.
pub fn refine_for_focus(brick: &VoxelRange, capacity: usize) -> Result<(Vec<VoxelRange>, ZOrderMap), PipelineError> {
    let r = refine_brick(brick, capacity.max(1))?;
    let z = ZOrderMap::new(r.child_grid());
    Ok((r.children, z))
}

/// Focus estimates for two raw-space bricks (equal bricks for the
/// node-click variant). Every A child is paired with every B child.
pub fn estimate_focus(
    store: &EnsembleStore,
    dataset: &str,
    first: VoxelRange,
    second: VoxelRange,
    config: &ComputeConfig,
    control: Control<'_>,
) -> Result<ViewEstimates, PipelineError> {
    let vars = variable_ids(store, &config.variables)?;
    check_level(store, config.level)?;
    let (ca, za) = refine_for_focus(&first, config.focus_capacity)?;
    let (cb, zb) = refine_for_focus(&second, config.focus_capacity)?;
    let na = ca.len();
    let pairs = chord_variable_pairs(vars.len());
    let mut tasks = Vec::new();
    let mut edges = Vec::new();
    for (i, a) in ca.iter().enumerate() {
        for (j, b) in cb.iter().enumerate() {
            for vp in &pairs {
                tasks.push(PairTask { bricks: [*a, *b], variables: [vars[vp[0]], vars[vp[1]]] });
                edges.push(EdgeInput { a: i, b: na + j, variable_pair: *vp, estimate: None });
            }
        }
    }
    fill(&mut edges, estimate_tasks(store, &tasks, config, control)?);
    let mut nodes = node_inputs(store, &ca, &vars);
    nodes.extend(node_inputs(store, &cb, &vars));
    let kind = ViewKind::Focus { first, second };
    Ok(ViewEstimates {
        key: view_key(dataset, config, &kind),
        kind,
        nodes,
        zorders: vec![za, zb],
        edges,
    })
}

/// Inter-variable matrix estimates over `regions`: cell (r, c) holds the
/// first variable at region c against the second variable at region r.
pub fn estimate_matrix(
    store: &EnsembleStore,
    dataset: &str,
    regions: &[VoxelRange],
    config: &ComputeConfig,
    control: Control<'_>,
) -> Result<ViewEstimates, PipelineError> {
    let vars = variable_ids(store, &config.variables)?;
    if vars.len() != 2 {
        return Err(PipelineError::InvalidConfig("matrix mode needs two variables".into()));
    }
    check_level(store, config.level)?;
    let n = regions.len();
    let mut tasks = Vec::with_capacity(n * n);
    let mut edges = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            tasks.push(PairTask { bricks: [regions[c], regions[r]], variables: [vars[0], vars[1]] });
            edges.push(EdgeInput { a: c, b: r, variable_pair: [0, 1], estimate: None });
        }
    }
    fill(&mut edges, estimate_tasks(store, &tasks, config, control)?);
    let kind = ViewKind::Matrix { regions: regions.to_vec() };
    Ok(ViewEstimates {
        key: view_key(dataset, config, &kind),
        kind,
        nodes: node_inputs(store, regions, &vars),
        zorders: vec![],
        edges,
    })
}

/// All-pairs context diagram over the configured partition.
pub fn compute_context(
    store: &EnsembleStore,
    dataset: &str,
    config: &ComputeConfig,
    control: Control<'_>,
) -> Result<DiagramModel, PipelineError> {
    config.filters.validate()?;
    estimate_context(store, dataset, config, control)?.render(config)
}

pub fn compute_focus(
    store: &EnsembleStore,
    dataset: &str,
    first: VoxelRange,
    second: VoxelRange,
    config: &ComputeConfig,
    control: Control<'_>,
) -> Result<DiagramModel, PipelineError> {
    config.filters.validate()?;
    estimate_focus(store, dataset, first, second, config, control)?.render(config)
}

pub fn compute_matrix(
    store: &EnsembleStore,
    dataset: &str,
    regions: &[VoxelRange],
    config: &ComputeConfig,
    control: Control<'_>,
) -> Result<DiagramModel, PipelineError> {
    config.filters.validate()?;
    estimate_matrix(store, dataset, regions, config, control)?.render(config)
}

/// Raw and aggregate maxima of one brick pair, averaged over runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityPair {
    pub raw: f64,
    pub aggregate: f64,
}

/// Samples the maxima of `pairs` random brick pairs on raw data and on
/// mean-tree `level`, each averaged over `runs` seeds. Pairs undefined on
/// either level in some run are dropped.
#[allow(clippy::too_many_arguments)]
pub fn aggregate_fidelity(
    store: &EnsembleStore,
    partition: &BrickPartition,
    variable: usize,
    level: usize,
    measure: MeasureKind,
    pairs: usize,
    runs: usize,
    sampling: &StrategyConfig,
) -> Result<Vec<FidelityPair>, PipelineError> {
    check_level(store, level)?;
    let chosen = random_pairs(partition, pairs, sampling.seed);
    let jobs: Vec<(usize, usize)> = (0..chosen.len()).flat_map(|p| (0..runs).map(move |r| (p, r))).collect();
    let vals = map_indexed(jobs.len(), |j| {
        let (p, run) = jobs[j];
        let cfg = sampling.for_item(((run as u64) << 32) | p as u64);
        let raw = estimate_bricks(store, chosen[p], [variable; 2], 0, measure, &cfg).ok()?;
        let agg = estimate_bricks(store, chosen[p], [variable; 2], level, measure, &cfg).ok()?;
        Some((raw.value, agg.value))
    });
    Ok(vals
        .chunks(runs.max(1))
        .filter(|c| c.iter().all(Option::is_some))
        .map(|c| {
            let n = c.len() as f64;
            FidelityPair {
                raw: c.iter().map(|v| v.unwrap().0).sum::<f64>() / n,
                aggregate: c.iter().map(|v| v.unwrap().1).sum::<f64>() / n,
            }
        })
        .collect())
}

/// Mean of |aggregate − raw| / |raw| over pairs with a non-zero raw
/// maximum.
pub fn mean_relative_deviation(pairs: &[FidelityPair]) -> Option<f64> {
    let d: Vec<f64> =
        pairs.iter().filter(|p| p.raw != 0.0).map(|p| (p.aggregate - p.raw).abs() / p.raw.abs()).collect();
    (!d.is_empty()).then(|| d.iter().sum::<f64>() / d.len() as f64)
}

/// `count` distinct unordered brick pairs (all pairs if fewer exist).
pub fn random_pairs(partition: &BrickPartition, count: usize, seed: u64) -> Vec<[VoxelRange; 2]> {
    let bricks = partition.bricks_in_zorder();
    let m = bricks.len();
    let total = m * m.saturating_sub(1) / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, total, count.min(total)).into_vec();
    idx.sort_unstable();
    idx.into_iter()
        .map(|k| {
            // unrank k into (a, b) with a < b
            let mut a = 0;
            let mut rem = k;
            while rem >= m - 1 - a {
                rem -= m - 1 - a;
                a += 1;
            }
            [bricks[a], bricks[a + 1 + rem]]
        })
        .collect()
}

/// Benchmark oracle over real brick pairs with truth by full enumeration.
pub struct DatasetOracle<'a> {
    store: &'a EnsembleStore,
    variable: usize,
    level: usize,
    measure: MeasureKind,
    pairs: Vec<[VoxelRange; 2]>,
    bounds: Vec<(f64, f64)>,
}

impl<'a> DatasetOracle<'a> {
    /// Enumerates every voxel pair of `count` random brick pairs; keep the
    /// bricks small.
    pub fn new(
        store: &'a EnsembleStore,
        partition: &BrickPartition,
        variable: usize,
        level: usize,
        measure: MeasureKind,
        count: usize,
        seed: u64,
    ) -> Result<Self, PipelineError> {
        check_level(store, level)?;
        let mut pairs = Vec::new();
        let mut bounds = Vec::new();
        for p in random_pairs(partition, count, seed) {
            let mut obj = BrickPairObjective::new(store, p, [variable; 2], level, measure)?;
            let d = obj.domain();
            let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
            for k in 0..d.total() {
                if let Some(v) = obj.evaluate(d.index_of(k)) {
                    hi = hi.max(v);
                    lo = lo.min(v);
                }
            }
            if hi >= lo {
                pairs.push(p);
                bounds.push((hi, lo));
            }
        }
        Ok(Self { store, variable, level, measure, pairs, bounds })
    }
}

impl BenchOracle for DatasetOracle<'_> {
    fn pairs(&self) -> usize {
        self.pairs.len()
    }

    fn bounds(&self, i: usize) -> (f64, f64) {
        self.bounds[i]
    }

    fn objective(&self, i: usize) -> Box<dyn PairObjective + '_> {
        Box::new(
            BrickPairObjective::new(self.store, self.pairs[i], [self.variable; 2], self.level, self.measure)
                .expect("validated in new"),
        )
    }
}

/// Strategy that [`estimate_pair_maximum`] will pick for two raw bricks.
pub fn strategy_for(bricks: [VoxelRange; 2], level: usize, config: &StrategyConfig) -> Strategy {
    let [a, b] = bricks.map(|r| r.at_level(level).extent());
    let total: u128 = a.iter().chain(&b).map(|&e| e as u128).product();
    match config.strategy {
        _ if total <= config.budget as u128 => Strategy::Exhaustive,
        Some(s) => s,
        None => crate::sampling::choose_strategy(a, b, config),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{gen_synthetic, Dims, SyntheticSpec, VariableMeta};
    use crate::estimators::ppmcc;

    fn synth() -> EnsembleStore {
        EnsembleStore::new(gen_synthetic(&SyntheticSpec::two_cluster([16, 16, 2], 40, 3)).unwrap())
    }

    fn config(strategy: Strategy, budget: usize) -> ComputeConfig {
        ComputeConfig {
            variables: vec!["synth".into()],
            bricks: BrickSpec::Edge(4),
            sampling: StrategyConfig { acq_budget: 60, ..StrategyConfig::with_strategy(strategy, budget) },
            ..ComputeConfig::default()
        }
    }

    #[test]
    fn dataset_fingerprint_tracks_content() {
        let a = gen_synthetic(&SyntheticSpec::two_cluster([8, 8, 2], 10, 1)).unwrap();
        let b = gen_synthetic(&SyntheticSpec::two_cluster([8, 8, 2], 10, 1)).unwrap();
        let c = gen_synthetic(&SyntheticSpec::two_cluster([8, 8, 2], 10, 2)).unwrap();
        assert_eq!(dataset_fingerprint(&a), dataset_fingerprint(&b));
        assert_ne!(dataset_fingerprint(&a), dataset_fingerprint(&c));
    }

    #[test]
    fn exhaustive_context_matches_brute_force() {
        let store = synth();
        let cfg = config(Strategy::Exhaustive, 10);
        let d = compute_context(&store, "ds", &cfg, Control::default()).unwrap();
        assert_eq!(d.nodes.len(), 16);
        assert_eq!(d.candidate_edges, 120);
        let g = store.grid();
        for e in d.edges.iter().take(10) {
            let (a, b) = (d.nodes[e.a].brick, d.nodes[e.b].brick);
            let mut best = f64::NEG_INFINITY;
            for p in a.iter() {
                for q in b.iter() {
                    let x = store.series_at(0, 0, p).unwrap();
                    let y = store.series_at(0, 0, q).unwrap();
                    best = best.max(ppmcc(&x, &y).unwrap());
                }
            }
            assert_eq!(e.value, Some(best));
            let [pa, pb] = e.argmax.unwrap();
            assert!(a.contains(pa) && b.contains(pb));
            assert!(g.dims().contains(pa));
        }
    }

    #[test]
    fn deterministic_and_cancellable() {
        let store = synth();
        let cfg = config(Strategy::UniformRandom, 12);
        let a = compute_context(&store, "ds", &cfg, Control::default()).unwrap();
        let b = compute_context(&store, "ds", &cfg, Control::default()).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let flag = AtomicBool::new(true);
        let r = compute_context(&store, "ds", &cfg, Control { cancel: Some(&flag), progress: None });
        assert!(matches!(r, Err(PipelineError::Cancelled)));
    }

    #[test]
    fn progress_is_monotone() {
        let store = synth();
        let seen = std::sync::Mutex::new(Vec::new());
        let f = |d: usize, t: usize| seen.lock().unwrap().push((d, t));
        compute_context(&store, "ds", &config(Strategy::UniformRandom, 5), Control { progress: Some(&f), cancel: None })
            .unwrap();
        let v = seen.into_inner().unwrap();
        assert_eq!(v.first(), Some(&(0, 120)));
        assert_eq!(v.iter().map(|x| x.0).max(), Some(120));
    }

    #[test]
    fn focus_and_self_refinement() {
        let store = synth();
        let cfg = config(Strategy::UniformRandom, 8);
        let a = VoxelRange::new([0, 0, 0], [8, 8, 2]);
        let b = VoxelRange::new([8, 8, 0], [16, 16, 2]);
        let d = compute_focus(&store, "ds", a, b, &cfg, Control::default()).unwrap();
        assert_eq!(d.nodes.len(), 64 + 64);
        assert_eq!(d.candidate_edges, 64 * 64);
        let s = compute_focus(&store, "ds", a, a, &cfg, Control::default()).unwrap();
        assert_eq!(s.nodes.len(), 128);
        assert_ne!(d.key, s.key);
        let one = VoxelRange::new([3, 3, 1], [4, 4, 2]);
        assert!(matches!(
            compute_focus(&store, "ds", one, b, &cfg, Control::default()),
            Err(PipelineError::Ensemble(EnsembleError::FinestLevel))
        ));
    }

    #[test]
    fn aggregate_level_argmax_maps_into_raw_bricks() {
        let store = synth();
        let bricks = [VoxelRange::new([0, 0, 0], [5, 6, 2]), VoxelRange::new([9, 7, 0], [16, 13, 2])];
        let est = estimate_bricks(&store, bricks, [0, 0], 1, MeasureKind::Ppmcc, &StrategyConfig::default()).unwrap();
        assert!(bricks[0].contains(est.argmax[0]) && bricks[1].contains(est.argmax[1]));
    }

    #[test]
    fn matrix_orientation() {
        let dims = Dims::new(2, 1, 1);
        let e = 30;
        let mut vals = Vec::new();
        // variable u: voxel 0 = s, voxel 1 = noise-ish; variable t: voxel 1 = s
        for v in 0..2 {
            for m in 0..e {
                let s = (m as f32 * 0.7).sin();
                let n = (m as f32 * 1.9).cos();
                let (x0, x1) = if v == 0 { (s, n) } else { (n * 0.3 + (m as f32).sqrt(), s) };
                vals.push((m, 0usize, v, x0));
                vals.push((m, 1usize, v, x1));
            }
        }
        let mut flat = vec![0f32; 2 * e * 2];
        for (m, vox, v, x) in vals {
            flat[v * e * 2 + m * 2 + vox] = x;
        }
        let grid = EnsembleGrid::new(dims, e, vec![VariableMeta::new("u"), VariableMeta::new("t")], flat).unwrap();
        let store = EnsembleStore::new(grid);
        let regions = [VoxelRange::new([0, 0, 0], [1, 1, 1]), VoxelRange::new([1, 0, 0], [2, 1, 1])];
        let cfg = ComputeConfig { variables: vec!["u".into(), "t".into()], ..config(Strategy::Exhaustive, 1) };
        let d = compute_matrix(&store, "m", &regions, &cfg, Control::default()).unwrap();
        let m = d.matrix.unwrap();
        // u at region 0 against t at region 1 is the shared signal
        assert!((m.cells[1][0].value.unwrap() - 1.0).abs() < 1e-6);
        assert!(m.cells[0][1].value.unwrap() < 0.9);
    }

    #[test]
    fn random_pairs_are_distinct() {
        let p = partition_by_edge(Dims::new(16, 16, 2), 4);
        let pairs = random_pairs(&p, 50, 1);
        assert_eq!(pairs.len(), 50);
        let mut seen = std::collections::HashSet::new();
        for [a, b] in &pairs {
            assert_ne!(a, b);
            assert!(seen.insert((a.lo, b.lo)));
        }
        assert_eq!(random_pairs(&p, 1000, 1).len(), 120);
    }
}
