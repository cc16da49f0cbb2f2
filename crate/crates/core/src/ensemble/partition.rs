//! Brick partitions and their recursive refinement.

use serde::{Deserialize, Serialize};

use super::{Dims, EnsembleError};
use crate::layout::zorder::{morton_code, ZOrderMap};

/// Half-open voxel box `[lo, hi)` in grid coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VoxelRange {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl VoxelRange {
    pub fn new(lo: [usize; 3], hi: [usize; 3]) -> Self {
        debug_assert!((0..3).all(|a| lo[a] < hi[a]), "empty range {lo:?}..{hi:?}");
        Self { lo, hi }
    }

    pub fn whole(dims: Dims) -> Self {
        Self { lo: [0; 3], hi: dims.as_array() }
    }

    pub fn extent(&self) -> [usize; 3] {
        [self.hi[0] - self.lo[0], self.hi[1] - self.lo[1], self.hi[2] - self.lo[2]]
    }

    pub fn count(&self) -> usize {
        self.extent().iter().product()
    }

    pub fn contains(&self, p: [usize; 3]) -> bool {
        (0..3).all(|a| p[a] >= self.lo[a] && p[a] < self.hi[a])
    }

    /// Geometric centre in voxel coordinates (voxel centres at integers).
    pub fn center(&self) -> [f64; 3] {
        [0, 1, 2].map(|a| (self.lo[a] + self.hi[a] - 1) as f64 / 2.0)
    }

    /// The cells of mean-tree level `level` covering this range.
    pub fn at_level(&self, level: usize) -> VoxelRange {
        let f = 1usize << level;
        VoxelRange { lo: self.lo.map(|v| v / f), hi: self.hi.map(|v| v.div_ceil(f)) }
    }

    pub fn iter(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        let [ex, ey, _] = self.extent();
        (0..self.count()).map(move |i| {
            [self.lo[0] + i % ex, self.lo[1] + (i / ex) % ey, self.lo[2] + i / (ex * ey)]
        })
    }
}

/// Regular tiling of a grid into bricks; boundary bricks may be smaller.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BrickPartition {
    pub grid: Dims,
    pub brick_dims: [usize; 3],
    pub bricks_per_axis: [usize; 3],
    pub level: usize,
}

impl BrickPartition {
    fn from_edges(grid: Dims, edges: [usize; 3]) -> Self {
        let g = grid.as_array();
        let brick_dims = [0, 1, 2].map(|a| edges[a].clamp(1, g[a]));
        let bricks_per_axis = [0, 1, 2].map(|a| g[a].div_ceil(brick_dims[a]));
        Self { grid, brick_dims, bricks_per_axis, level: 0 }
    }

    /// Total brick count M.
    pub fn count(&self) -> usize {
        self.bricks_per_axis.iter().product()
    }

    pub fn pair_count(&self) -> usize {
        let m = self.count();
        m * (m - 1) / 2
    }

    pub fn brick_range(&self, b: [usize; 3]) -> VoxelRange {
        let g = self.grid.as_array();
        let lo = [0, 1, 2].map(|a| b[a] * self.brick_dims[a]);
        let hi = [0, 1, 2].map(|a| ((b[a] + 1) * self.brick_dims[a]).min(g[a]));
        VoxelRange::new(lo, hi)
    }

    pub fn zorder(&self) -> ZOrderMap {
        ZOrderMap::new(self.bricks_per_axis)
    }

    /// Brick ranges listed in z-order.
    pub fn bricks_in_zorder(&self) -> Vec<VoxelRange> {
        let z = self.zorder();
        (0..z.len()).map(|i| self.brick_range(z.coords(i).expect("in range"))).collect()
    }

    /// max/min brick edge over axes whose grid extent exceeds one.
    pub fn anisotropy(&self) -> f64 {
        anisotropy(self.grid.as_array(), self.brick_dims)
    }
}

fn anisotropy(grid: [usize; 3], edges: [usize; 3]) -> f64 {
    let active: Vec<usize> = (0..3).filter(|&a| grid[a] > 1).map(|a| edges[a]).collect();
    match (active.iter().max(), active.iter().min()) {
        (Some(&mx), Some(&mn)) => mx as f64 / mn as f64,
        _ => 1.0,
    }
}

/// Bricks of (at most) `edge` grid points per axis; an axis shorter than
/// `edge` is covered by one slab.
pub fn partition_by_edge(dims: Dims, edge: usize) -> BrickPartition {
    BrickPartition::from_edges(dims, [edge.max(1); 3])
}

/// Distinct (edge, count) tilings of one axis.
fn axis_candidates(extent: usize) -> Vec<usize> {
    let mut edges: Vec<usize> = (1..=extent).map(|b| extent.div_ceil(b)).collect();
    edges.sort_unstable();
    edges.dedup();
    edges
}

/// The partition whose brick count is closest to `target_m`; among equal
/// counts the most isotropic one (smallest max/min edge ratio, then
/// smallest max-min edge difference).
pub fn partition_grid(dims: Dims, target_m: usize) -> BrickPartition {
    let target = target_m.max(2);
    let g = dims.as_array();
    let cands = g.map(axis_candidates);
    let mut best: Option<(usize, f64, usize, BrickPartition)> = None;
    for &ex in &cands[0] {
        for &ey in &cands[1] {
            for &ez in &cands[2] {
                let p = BrickPartition::from_edges(dims, [ex, ey, ez]);
                let dist = p.count().abs_diff(target);
                let ratio = p.anisotropy();
                let active: Vec<usize> = (0..3).filter(|&a| g[a] > 1).map(|a| p.brick_dims[a]).collect();
                let spread = active.iter().max().unwrap_or(&0) - active.iter().min().unwrap_or(&0);
                let better = match &best {
                    None => true,
                    Some((bd, br, bs, _)) => {
                        (dist, ratio, spread) < (*bd, *br, *bs)
                            && !(dist == *bd && ratio == *br && spread == *bs)
                    }
                };
                if better {
                    best = Some((dist, ratio, spread, p));
                }
            }
        }
    }
    best.expect("at least one candidate").3
}

/// Result of splitting one brick for a focus view.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub parent: VoxelRange,
    /// Number of halvings per axis; children form a 2^a grid per axis.
    pub exponents: [u32; 3],
    /// Children in local z-order.
    pub children: Vec<VoxelRange>,
}

impl Refinement {
    pub fn child_grid(&self) -> [usize; 3] {
        self.exponents.map(|a| 1usize << a)
    }
}

fn halve(lo: usize, hi: usize, times: u32, out: &mut Vec<(usize, usize)>) {
    if times == 0 {
        out.push((lo, hi));
    } else {
        let mid = lo + (hi - lo).div_ceil(2);
        halve(lo, mid, times - 1, out);
        halve(mid, hi, times - 1, out);
    }
}

/// Splits `brick` octree-style into at most `capacity` children by halving
/// axes (each axis at most down to extent one). Picks the largest child
/// count and, among equal counts, the most isotropic children.
pub fn refine_brick(brick: &VoxelRange, capacity: usize) -> Result<Refinement, EnsembleError> {
    let ext = brick.extent();
    let max_exp = ext.map(|e| usize::BITS - 1 - e.leading_zeros());
    let mut best: Option<(u32, f64, usize, [u32; 3])> = None;
    for ax in 0..=max_exp[0] {
        for ay in 0..=max_exp[1] {
            for az in 0..=max_exp[2] {
                let total = ax + ay + az;
                if (1usize << total) > capacity {
                    continue;
                }
                let child = [ext[0].div_ceil(1 << ax), ext[1].div_ceil(1 << ay), ext[2].div_ceil(1 << az)];
                let ratio = anisotropy(ext, child);
                let active: Vec<usize> = (0..3).filter(|&a| ext[a] > 1).map(|a| child[a]).collect();
                let spread = active.iter().max().unwrap_or(&0) - active.iter().min().unwrap_or(&0);
                let better = match &best {
                    None => true,
                    Some((bt, br, bs, _)) => {
                        total > *bt || (total == *bt && (ratio < *br || (ratio == *br && spread < *bs)))
                    }
                };
                if better {
                    best = Some((total, ratio, spread, [ax, ay, az]));
                }
            }
        }
    }
    let (total, _, _, exps) = best.expect("exponent 0 always fits");
    if total == 0 {
        return Err(EnsembleError::FinestLevel);
    }
    let segs: Vec<Vec<(usize, usize)>> = (0..3)
        .map(|a| {
            let mut s = Vec::new();
            halve(brick.lo[a], brick.hi[a], exps[a], &mut s);
            s
        })
        .collect();
    let mut children: Vec<(u64, VoxelRange)> = Vec::with_capacity(1 << total);
    for (k, sz) in segs[2].iter().enumerate() {
        for (j, sy) in segs[1].iter().enumerate() {
            for (i, sx) in segs[0].iter().enumerate() {
                let code = morton_code([i, j, k], exps);
                children.push((code, VoxelRange::new([sx.0, sy.0, sz.0], [sx.1, sy.1, sz.1])));
            }
        }
    }
    children.sort_unstable_by_key(|c| c.0);
    Ok(Refinement { parent: *brick, exponents: exps, children: children.into_iter().map(|c| c.1).collect() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HierarchyNode {
    pub range: VoxelRange,
    pub parent: Option<usize>,
    /// Indices into the next level.
    pub children: Vec<usize>,
    /// Position of this node in its level's z-order.
    pub zorder: usize,
}

/// Fully materialised refinement hierarchy. Intended for small grids; the
/// interactive path refines on demand with [`refine_brick`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrickHierarchy {
    pub capacity: usize,
    pub levels: Vec<Vec<HierarchyNode>>,
}

impl BrickHierarchy {
    pub fn build(partition: &BrickPartition, capacity: usize) -> Self {
        let mut levels: Vec<Vec<HierarchyNode>> = vec![partition
            .bricks_in_zorder()
            .into_iter()
            .enumerate()
            .map(|(i, range)| HierarchyNode { range, parent: None, children: vec![], zorder: i })
            .collect()];
        loop {
            let cur = levels.last_mut().expect("non-empty");
            let mut next = Vec::new();
            for (pi, node) in cur.iter_mut().enumerate() {
                if let Ok(r) = refine_brick(&node.range, capacity) {
                    for c in r.children {
                        node.children.push(next.len());
                        next.push(HierarchyNode { range: c, parent: Some(pi), children: vec![], zorder: next.len() });
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            levels.push(next);
        }
        Self { capacity, levels }
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }
}
