//! Two-dimensional k-d tree for Chebyshev k-th neighbour distances.

const LEAF_SIZE: usize = 8;
const NONE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug)]
struct Node {
    lo: u32,
    hi: u32,
    axis: u8,
    split: f64,
    left: u32,
    right: u32,
}

/// Median-split tree over `n` points; built once per sample set.
#[derive(Clone, Debug)]
pub struct KdTree2 {
    pts: Vec<[f64; 2]>,
    /// Point ids in leaf order.
    ids: Vec<u32>,
    nodes: Vec<Node>,
}

impl KdTree2 {
    pub fn new(x: &[f64], y: &[f64]) -> Self {
        assert_eq!(x.len(), y.len());
        let pts: Vec<[f64; 2]> = x.iter().zip(y).map(|(&a, &b)| [a, b]).collect();
        let mut ids: Vec<u32> = (0..pts.len() as u32).collect();
        let mut nodes: Vec<Node> = Vec::with_capacity(2 * pts.len() / LEAF_SIZE + 1);
        nodes.push(Node { lo: 0, hi: pts.len() as u32, axis: 0, split: 0.0, left: NONE, right: NONE });
        let mut work = vec![0u32];
        while let Some(ni) = work.pop() {
            let Node { lo, hi, .. } = nodes[ni as usize];
            let (lo_u, hi_u) = (lo as usize, hi as usize);
            if hi_u - lo_u <= LEAF_SIZE {
                continue;
            }
            let slice = &mut ids[lo_u..hi_u];
            let mut min = [f64::INFINITY; 2];
            let mut max = [f64::NEG_INFINITY; 2];
            for &i in slice.iter() {
                let p = pts[i as usize];
                for a in 0..2 {
                    min[a] = min[a].min(p[a]);
                    max[a] = max[a].max(p[a]);
                }
            }
            let axis = if max[1] - min[1] > max[0] - min[0] { 1 } else { 0 };
            let mid = slice.len() / 2;
            slice.select_nth_unstable_by(mid, |&a, &b| pts[a as usize][axis].total_cmp(&pts[b as usize][axis]));
            let split = pts[slice[mid] as usize][axis];
            let left = nodes.len() as u32;
            nodes.push(Node { lo, hi: lo + mid as u32, axis: 0, split: 0.0, left: NONE, right: NONE });
            nodes.push(Node { lo: lo + mid as u32, hi, axis: 0, split: 0.0, left: NONE, right: NONE });
            let n = &mut nodes[ni as usize];
            n.axis = axis as u8;
            n.split = split;
            n.left = left;
            n.right = left + 1;
            work.push(left);
            work.push(left + 1);
        }
        Self { pts, ids, nodes }
    }

    pub fn len(&self) -> usize {
        self.pts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pts.is_empty()
    }

    /// Chebyshev distance from point `i` to its k-th nearest other point.
    /// `best` is scratch space reused across queries.
    pub fn kth_distance(&self, i: usize, k: usize, best: &mut Vec<f64>) -> f64 {
        debug_assert!(k >= 1 && k < self.pts.len());
        let q = self.pts[i];
        best.clear();
        let mut stack: Vec<(u32, f64)> = Vec::with_capacity(64);
        stack.push((0, 0.0));
        while let Some((ni, lb)) = stack.pop() {
            let bound = if best.len() == k { best[k - 1] } else { f64::INFINITY };
            if lb >= bound {
                continue;
            }
            let node = &self.nodes[ni as usize];
            if node.left == NONE {
                for &j in &self.ids[node.lo as usize..node.hi as usize] {
                    if j as usize == i {
                        continue;
                    }
                    let p = self.pts[j as usize];
                    let d = (p[0] - q[0]).abs().max((p[1] - q[1]).abs());
                    if best.len() < k {
                        let pos = best.partition_point(|&b| b <= d);
                        best.insert(pos, d);
                    } else if d < best[k - 1] {
                        let pos = best.partition_point(|&b| b <= d);
                        best.pop();
                        best.insert(pos, d);
                    }
                }
                continue;
            }
            let diff = q[node.axis as usize] - node.split;
            let (near, far) = if diff <= 0.0 { (node.left, node.right) } else { (node.right, node.left) };
            stack.push((far, lb.max(diff.abs())));
            stack.push((near, lb));
        }
        best[k - 1]
    }
}
