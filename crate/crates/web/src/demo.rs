//! Demo state without any JS types, so it runs and tests natively.

use chordcorr_core::ensemble::{gen_synthetic, SyntheticSpec, VoxelRange};
use chordcorr_core::layout::{export_svg, Palette};
use chordcorr_core::pipeline::{
    compute_context, compute_focus, dataset_fingerprint, BrickSpec, ComputeConfig, Control,
};
use chordcorr_core::sampling::{bench_strategies, summarize, BenchSummary, Gaussian6Oracle};
use chordcorr_core::{DiagramModel, EnsembleStore, Strategy, StrategyConfig};

pub struct Demo {
    store: EnsembleStore,
    key: String,
    config: ComputeConfig,
    /// Context diagram first, then one entry per focus step.
    stack: Vec<DiagramModel>,
}

impl Demo {
    /// Two-cluster synthetic ensemble of the given size.
    pub fn new(dims: [usize; 3], members: usize, seed: u64) -> Result<Self, String> {
        let grid = gen_synthetic(&SyntheticSpec::two_cluster(dims, members, seed)).map_err(|e| e.to_string())?;
        let key = dataset_fingerprint(&grid);
        let variables = vec![grid.variables()[0].name.clone()];
        let config = ComputeConfig { focus_capacity: 8, variables, ..ComputeConfig::default() };
        Ok(Self { store: EnsembleStore::new(grid), key, config, stack: Vec::new() })
    }

    pub fn depth(&self) -> usize {
        self.stack.len().saturating_sub(1)
    }

    pub fn current(&self) -> Option<&DiagramModel> {
        self.stack.last()
    }

    /// Recomputes the context view and clears the focus history.
    pub fn context(&mut self, strategy: &str, budget: usize, seed: u64, brick_edge: usize) -> Result<&DiagramModel, String> {
        let mut sampling = StrategyConfig { budget, seed, acq_budget: 200, ..StrategyConfig::default() };
        if strategy != "auto" {
            sampling.strategy = Some(strategy.parse::<Strategy>()?);
        }
        sampling.validate().map_err(|e| e.to_string())?;
        self.config.sampling = sampling;
        self.config.bricks = BrickSpec::Edge(brick_edge.max(1));
        let d = compute_context(&self.store, &self.key, &self.config, Control::default()).map_err(|e| e.to_string())?;
        self.stack = vec![d];
        Ok(&self.stack[0])
    }

    fn node_brick(&self, node: usize) -> Result<VoxelRange, String> {
        let d = self.current().ok_or("no diagram yet")?;
        d.nodes.get(node).map(|n| n.brick).ok_or_else(|| format!("no node {node}"))
    }

    fn push_focus(&mut self, first: VoxelRange, second: VoxelRange) -> Result<&DiagramModel, String> {
        let d = compute_focus(&self.store, &self.key, first, second, &self.config, Control::default())
            .map_err(|e| e.to_string())?;
        self.stack.push(d);
        Ok(self.stack.last().expect("just pushed"))
    }

    /// Refines one brick against itself.
    pub fn focus_node(&mut self, node: usize) -> Result<&DiagramModel, String> {
        let b = self.node_brick(node)?;
        self.push_focus(b, b)
    }

    /// Refines both bricks of an edge of the current diagram.
    pub fn focus_edge(&mut self, id: &str) -> Result<&DiagramModel, String> {
        let d = self.current().ok_or("no diagram yet")?;
        let e = d.edge(id).ok_or_else(|| format!("edge {id} is not in the current diagram"))?;
        let (a, b) = (e.a, e.b);
        let (first, second) = (self.node_brick(a)?, self.node_brick(b)?);
        self.push_focus(first, second)
    }

    /// Drops `k` focus levels.
    pub fn back(&mut self, k: usize) -> Result<&DiagramModel, String> {
        if k == 0 || k > self.depth() {
            return Err(format!("cannot go back {k} levels from depth {}", self.depth()));
        }
        self.stack.truncate(self.stack.len() - k);
        Ok(self.stack.last().expect("context remains"))
    }

    pub fn svg(&self, size: u32) -> Result<String, String> {
        let d = self.current().ok_or("no diagram yet")?;
        export_svg(d, size, &Palette::default()).map_err(|e| e.to_string())
    }
}

/// Mean normalised error of `strategy` on random Gaussian objectives over a
/// ladder of budgets up to `max_budget`.
pub fn strategy_curve(strategy: &str, max_budget: usize, seed: u64) -> Result<Vec<BenchSummary>, String> {
    let s = strategy.parse::<Strategy>()?;
    if max_budget == 0 {
        return Err("budget must be positive".into());
    }
    let mut budgets: Vec<usize> = [5, 10, 20, 40, 80, 160].into_iter().filter(|&b| b < max_budget).collect();
    budgets.push(max_budget);
    let oracle = Gaussian6Oracle::new([12, 12, 12], 6, seed);
    let base = StrategyConfig { seed, acq_budget: 150, ..StrategyConfig::default() };
    Ok(summarize(&bench_strategies(&oracle, &[s], &budgets, 2, &base)))
}
