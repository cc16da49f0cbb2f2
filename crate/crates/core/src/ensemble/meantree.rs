//! Mean aggregates over 2×2×2 blocks, level by level.

use super::{Dims, EnsembleGrid};
use crate::layout::zorder::bits_for;

/// One aggregate level; cell `c` covers voxels `[c·2^ℓ, (c+1)·2^ℓ)` per axis.
#[derive(Clone, Debug)]
pub struct MeanLevel {
    pub level: usize,
    pub dims: Dims,
    members: usize,
    /// (member, cell) mean; NaN when the cell holds no data for that member.
    means: Vec<f64>,
    /// (member, cell) non-missing voxel count.
    counts: Vec<u32>,
    spread_sum: Vec<f64>,
    spread_points: Vec<u32>,
}

impl MeanLevel {
    pub fn mean(&self, member: usize, cell: usize) -> f64 {
        self.means[member * self.dims.count() + cell]
    }

    pub fn count(&self, member: usize, cell: usize) -> u32 {
        self.counts[member * self.dims.count() + cell]
    }

    /// Average over covered grid points of the across-member standard
    /// deviation; NaN if no point in the cell has one.
    pub fn spread(&self, cell: usize) -> f64 {
        let n = self.spread_points[cell];
        if n == 0 {
            f64::NAN
        } else {
            self.spread_sum[cell] / n as f64
        }
    }

    pub fn is_missing(&self, cell: usize) -> bool {
        (0..self.members).any(|m| self.count(m, cell) == 0)
    }

    pub fn series_into(&self, cell: usize, out: &mut Vec<f64>) -> bool {
        out.clear();
        let n = self.dims.count();
        for m in 0..self.members {
            if self.counts[m * n + cell] == 0 {
                return false;
            }
            out.push(self.means[m * n + cell]);
        }
        true
    }

    /// Approximate resident size in bytes.
    pub fn byte_size(&self) -> u64 {
        (self.means.len() * 12 + self.spread_sum.len() * 12) as u64
    }
}

#[derive(Clone, Debug)]
pub struct MeanTree {
    pub variable: usize,
    /// `levels[0]` is aggregate level 1.
    pub levels: Vec<MeanLevel>,
}

impl MeanTree {
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Aggregate level `level >= 1`.
    pub fn level(&self, level: usize) -> Option<&MeanLevel> {
        level.checked_sub(1).and_then(|i| self.levels.get(i))
    }
}

fn aggregate_dims(d: Dims) -> Dims {
    Dims::new(d.x.div_ceil(2), d.y.div_ceil(2), d.z.div_ceil(2))
}

/// Builds all levels with factor 2 per axis down to a single cell. Each level
/// is derived from the one below with count weights, so the telescoping
/// identity holds by construction.
pub fn build_mean_tree(grid: &EnsembleGrid, variable: usize) -> MeanTree {
    let d0 = grid.dims();
    let depth = d0.as_array().iter().map(|&e| bits_for(e)).max().unwrap_or(0) as usize;
    let members = grid.members();
    let meta = &grid.variables()[variable];
    let std = grid.std_field(variable);
    let mut levels: Vec<MeanLevel> = Vec::with_capacity(depth);
    if depth == 0 {
        return MeanTree { variable, levels };
    }

    // Level 1 from raw values.
    let d1 = aggregate_dims(d0);
    let n0 = d0.count();
    let n1 = d1.count();
    let mut sums = vec![0.0f64; members * n1];
    let mut counts = vec![0u32; members * n1];
    let parent_of: Vec<usize> = (0..n0)
        .map(|v| {
            let c = d0.coords(v);
            d1.linear([c[0] / 2, c[1] / 2, c[2] / 2])
        })
        .collect();
    let slice = grid.variable_slice(variable);
    for m in 0..members {
        let row = &slice[m * n0..(m + 1) * n0];
        for (v, &val) in row.iter().enumerate() {
            if !meta.is_missing(val) {
                let p = m * n1 + parent_of[v];
                sums[p] += val as f64;
                counts[p] += 1;
            }
        }
    }
    let mut spread_sum = vec![0.0f64; n1];
    let mut spread_points = vec![0u32; n1];
    for (v, &s) in std.iter().enumerate() {
        if s.is_finite() {
            spread_sum[parent_of[v]] += s as f64;
            spread_points[parent_of[v]] += 1;
        }
    }
    let means = sums.iter().zip(&counts).map(|(s, &c)| if c > 0 { s / c as f64 } else { f64::NAN }).collect();
    levels.push(MeanLevel { level: 1, dims: d1, members, means, counts, spread_sum, spread_points });

    for level in 2..=depth {
        let prev = levels.last().expect("previous level");
        let dp = prev.dims;
        let dn = aggregate_dims(dp);
        let np = dp.count();
        let nn = dn.count();
        let parent_of: Vec<usize> = (0..np)
            .map(|v| {
                let c = dp.coords(v);
                dn.linear([c[0] / 2, c[1] / 2, c[2] / 2])
            })
            .collect();
        let mut sums = vec![0.0f64; members * nn];
        let mut counts = vec![0u32; members * nn];
        for m in 0..members {
            for v in 0..np {
                let c = prev.counts[m * np + v];
                if c > 0 {
                    let p = m * nn + parent_of[v];
                    sums[p] += prev.means[m * np + v] * c as f64;
                    counts[p] += c;
                }
            }
        }
        let mut spread_sum = vec![0.0f64; nn];
        let mut spread_points = vec![0u32; nn];
        for v in 0..np {
            spread_sum[parent_of[v]] += prev.spread_sum[v];
            spread_points[parent_of[v]] += prev.spread_points[v];
        }
        let means = sums.iter().zip(&counts).map(|(s, &c)| if c > 0 { s / c as f64 } else { f64::NAN }).collect();
        levels.push(MeanLevel { level, dims: dn, members, means, counts, spread_sum, spread_points });
    }
    MeanTree { variable, levels }
}
