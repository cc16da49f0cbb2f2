use std::sync::{Arc, OnceLock};

use super::{build_mean_tree, EnsembleError, EnsembleGrid, MeanLevel, MeanTree, VoxelRange};

/// Read-only ensemble with lazily built mean trees and spread fields.
#[derive(Debug)]
pub struct EnsembleStore {
    grid: Arc<EnsembleGrid>,
    trees: Vec<OnceLock<MeanTree>>,
    std: Vec<OnceLock<Vec<f32>>>,
}

impl EnsembleStore {
    pub fn new(grid: EnsembleGrid) -> Self {
        Self::from_arc(Arc::new(grid))
    }

    pub fn from_arc(grid: Arc<EnsembleGrid>) -> Self {
        let nv = grid.variables().len();
        Self { grid, trees: (0..nv).map(|_| OnceLock::new()).collect(), std: (0..nv).map(|_| OnceLock::new()).collect() }
    }

    pub fn grid(&self) -> &EnsembleGrid {
        &self.grid
    }

    pub fn mean_tree(&self, variable: usize) -> &MeanTree {
        self.trees[variable].get_or_init(|| build_mean_tree(&self.grid, variable))
    }

    pub fn std_field(&self, variable: usize) -> &[f32] {
        self.std[variable].get_or_init(|| self.grid.std_field(variable))
    }

    /// Ensemble spread of a voxel range: mean of the per-point standard
    /// deviations.
    pub fn spread(&self, variable: usize, range: &VoxelRange) -> f64 {
        let std = self.std_field(variable);
        let dims = self.grid.dims();
        let (mut sum, mut n) = (0.0f64, 0usize);
        for p in range.iter() {
            let s = std[dims.linear(p)];
            if s.is_finite() {
                sum += s as f64;
                n += 1;
            }
        }
        if n == 0 {
            f64::NAN
        } else {
            sum / n as f64
        }
    }

    /// Number of aggregate levels available (0 means raw only).
    pub fn max_level(&self) -> usize {
        let d = self.grid.dims().as_array();
        d.iter().map(|&e| crate::layout::zorder::bits_for(e)).max().unwrap_or(0) as usize
    }

    pub fn view(&self, variable: usize, level: usize) -> Result<LevelView<'_>, EnsembleError> {
        if variable >= self.grid.variables().len() {
            return Err(EnsembleError::UnknownVariable(variable.to_string()));
        }
        if level == 0 {
            return Ok(LevelView::Raw { grid: &self.grid, variable });
        }
        let tree = self.mean_tree(variable);
        tree.level(level)
            .map(|l| LevelView::Mean { level: l })
            .ok_or(EnsembleError::LevelOutOfRange { level, depth: tree.depth() })
    }

    /// Across-member series of `variable` at `index` on `level`
    /// (0 = raw voxels, ℓ ≥ 1 = mean-tree cells).
    pub fn series_at(&self, variable: usize, level: usize, index: [usize; 3]) -> Result<Vec<f64>, EnsembleError> {
        let view = self.view(variable, level)?;
        let mut out = Vec::with_capacity(self.grid.members());
        view.series_into(index, &mut out)?;
        Ok(out)
    }

    /// Smallest aggregate level whose data fits into `budget_bytes`.
    pub fn aggregate_level_for_budget(&self, budget_bytes: u64) -> usize {
        let raw = self.grid.byte_size();
        let mut level = 0;
        let mut size = raw;
        while size > budget_bytes && level < self.max_level() {
            level += 1;
            size = raw >> (3 * level);
        }
        level
    }
}

/// Series access on one level of one variable.
#[derive(Clone, Copy, Debug)]
pub enum LevelView<'a> {
    Raw { grid: &'a EnsembleGrid, variable: usize },
    Mean { level: &'a MeanLevel },
}

impl LevelView<'_> {
    pub fn level(&self) -> usize {
        match self {
            LevelView::Raw { .. } => 0,
            LevelView::Mean { level } => level.level,
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        match self {
            LevelView::Raw { grid, .. } => grid.dims().as_array(),
            LevelView::Mean { level } => level.dims.as_array(),
        }
    }

    /// Writes the series into `out`; `Ok(false)` if any value is missing.
    pub fn try_series_into(&self, index: [usize; 3], out: &mut Vec<f64>) -> Result<bool, EnsembleError> {
        let dims = self.dims();
        if (0..3).any(|a| index[a] >= dims[a]) {
            return Err(EnsembleError::OutOfRange { level: self.level(), index, dims });
        }
        let lin = (index[2] * dims[1] + index[1]) * dims[0] + index[0];
        Ok(match self {
            LevelView::Raw { grid, variable } => grid.series_into(*variable, lin, out),
            LevelView::Mean { level } => level.series_into(lin, out),
        })
    }

    pub fn series_into(&self, index: [usize; 3], out: &mut Vec<f64>) -> Result<(), EnsembleError> {
        if self.try_series_into(index, out)? {
            Ok(())
        } else {
            Err(EnsembleError::Missing { level: self.level(), index })
        }
    }
}
