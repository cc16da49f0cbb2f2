//! Octree over z-ordered leaves, placed inside the chord circle.

use serde::{Deserialize, Serialize};

use super::{polar_to_xy, LayoutError, ZOrderMap};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub depth: usize,
    pub angle: f64,
    pub radius: f64,
    /// Leaf index when this node is a leaf.
    pub leaf: Option<usize>,
}

impl TreeNode {
    pub fn position(&self) -> [f64; 2] {
        polar_to_xy(self.angle, self.radius)
    }
}

/// Hierarchy whose leaves are the chord nodes. Inner nodes sit at radius
/// depth/max_depth and at the mean angle of their children.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChordTree {
    pub nodes: Vec<TreeNode>,
    /// Tree node id of each leaf.
    pub leaf_nodes: Vec<usize>,
    pub depth: usize,
}

/// Builds the octree of one z-ordered brick set. `angles[i]` is the chord
/// angle of the brick with z-index `i`.
pub fn build_octree(zmap: &ZOrderMap, angles: &[f64]) -> ChordTree {
    ChordTree::build(&[(zmap, angles)])
}

impl ChordTree {
    /// One subtree per group; with several groups a common root joins them.
    /// Leaves are numbered group by group in z-order.
    pub fn build(groups: &[(&ZOrderMap, &[f64])]) -> Self {
        assert!(!groups.is_empty());
        for (z, a) in groups {
            assert_eq!(z.len(), a.len(), "one angle per brick");
        }
        let offset = usize::from(groups.len() > 1);
        let depth = offset + groups.iter().map(|(z, _)| z.depth() as usize).max().unwrap_or(0);
        let n_leaves: usize = groups.iter().map(|(z, _)| z.len()).sum();
        let mut nodes: Vec<TreeNode> = Vec::new();
        let mut leaf_nodes = vec![0usize; n_leaves];
        if offset == 1 {
            nodes.push(TreeNode { parent: None, children: vec![], depth: 0, angle: 0.0, radius: 0.0, leaf: None });
        }
        let mut leaf_base = 0;
        for (zmap, angles) in groups {
            let gd = zmap.depth();
            // node id of each brick at the previous depth
            let mut prev: Vec<usize> = Vec::new();
            for d in 0..=gd {
                let mut cur = Vec::with_capacity(zmap.len());
                let mut last: Option<u64> = None;
                for i in 0..zmap.len() {
                    let p = zmap.prefix(i, d);
                    if last != Some(p) {
                        let parent = if d == 0 { (offset == 1).then_some(0) } else { Some(prev[i]) };
                        let id = nodes.len();
                        let is_leaf = d == gd;
                        nodes.push(TreeNode {
                            parent,
                            children: vec![],
                            depth: offset + d as usize,
                            angle: 0.0,
                            radius: 0.0,
                            leaf: is_leaf.then_some(leaf_base + i),
                        });
                        if let Some(pa) = parent {
                            nodes[pa].children.push(id);
                        }
                        last = Some(p);
                    }
                    cur.push(nodes.len() - 1);
                }
                prev = cur;
            }
            for (i, &id) in prev.iter().enumerate() {
                leaf_nodes[leaf_base + i] = id;
                nodes[id].angle = angles[i];
            }
            leaf_base += zmap.len();
        }
        // children always have larger ids than their parents
        for id in (0..nodes.len()).rev() {
            let n = &nodes[id];
            if n.leaf.is_some() {
                nodes[id].radius = 1.0;
            } else {
                let mean = n.children.iter().map(|&c| nodes[c].angle).sum::<f64>() / n.children.len().max(1) as f64;
                let r = if depth == 0 { 0.0 } else { n.depth as f64 / depth as f64 };
                nodes[id].angle = mean;
                nodes[id].radius = r;
            }
        }
        Self { nodes, leaf_nodes, depth }
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_nodes.len()
    }

    /// Tree nodes from leaf `a` up to the lowest common ancestor and down to
    /// leaf `b`, both leaves included.
    pub fn path(&self, a: usize, b: usize) -> Result<Vec<usize>, LayoutError> {
        if a >= self.leaf_count() || b >= self.leaf_count() {
            return Err(LayoutError::OutOfRange(format!("leaf {a} or {b} >= {}", self.leaf_count())));
        }
        if a == b {
            return Err(LayoutError::SelfEdge);
        }
        let (mut x, mut y) = (self.leaf_nodes[a], self.leaf_nodes[b]);
        let mut up = vec![x];
        let mut down = vec![y];
        while self.nodes[x].depth > self.nodes[y].depth {
            x = self.nodes[x].parent.expect("non-root");
            up.push(x);
        }
        while self.nodes[y].depth > self.nodes[x].depth {
            y = self.nodes[y].parent.expect("non-root");
            down.push(y);
        }
        while x != y {
            x = self.nodes[x].parent.expect("common root");
            y = self.nodes[y].parent.expect("common root");
            up.push(x);
            down.push(y);
        }
        down.pop();
        up.extend(down.into_iter().rev());
        Ok(up)
    }

    /// Leaf indices under `node`.
    pub fn leaves_under(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(n) = stack.pop() {
            if let Some(l) = self.nodes[n].leaf {
                out.push(l);
            }
            stack.extend(self.nodes[n].children.iter().rev());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn context_tree(dims: [usize; 3]) -> ChordTree {
        let z = ZOrderMap::new(dims);
        let m = z.len();
        let angles: Vec<f64> = (0..m).map(|i| 2.0 * PI * i as f64 / m as f64).collect();
        build_octree(&z, &angles)
    }

    #[test]
    fn eight_leaves_one_root() {
        let t = context_tree([2, 2, 2]);
        assert_eq!(t.nodes.len(), 9);
        assert_eq!(t.nodes[0].radius, 0.0);
        assert_eq!(t.nodes[0].children.len(), 8);
        assert_eq!(t.nodes[0].position(), [0.0, -0.0]);
    }

    #[test]
    fn parent_angle_is_child_mean() {
        let z = ZOrderMap::new([2, 1, 1]);
        let t = build_octree(&z, &[10f64.to_radians(), 30f64.to_radians()]);
        assert!((t.nodes[0].angle - 20f64.to_radians()).abs() < 1e-15);
    }

    #[test]
    fn linear_radii() {
        let t = context_tree([8, 1, 1]);
        assert_eq!(t.depth, 3);
        let mut radii: Vec<f64> = t.nodes.iter().map(|n| n.radius).collect();
        radii.sort_by(f64::total_cmp);
        radii.dedup();
        assert_eq!(radii, vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]);
    }

    #[test]
    fn sibling_path_has_three_nodes() {
        let t = context_tree([4, 4, 1]);
        let p = t.path(0, 1).unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(t.nodes[p[1]].children.len(), 4);
        assert_eq!(t.path(0, 15).unwrap().len(), 5);
        assert_eq!(t.path(2, 2), Err(LayoutError::SelfEdge));
    }

    #[test]
    fn grouped_tree_joins_two_subtrees() {
        let za = ZOrderMap::new([2, 2, 1]);
        let zb = ZOrderMap::new([2, 1, 1]);
        let t = ChordTree::build(&[(&za, &[3.0, 3.2, 3.4, 3.6]), (&zb, &[0.2, 0.4])]);
        assert_eq!(t.leaf_count(), 6);
        assert_eq!(t.depth, 2);
        assert_eq!(t.nodes[0].children.len(), 2);
        // a to b passes the common root
        let p = t.path(0, 5).unwrap();
        assert_eq!(p.len(), 5);
        assert!(p.contains(&0));
    }

    #[test]
    fn leaves_of_every_node_are_contiguous() {
        for dims in [[8, 11, 1], [5, 3, 7], [1, 1, 9], [3, 3, 3]] {
            let t = context_tree(dims);
            for id in 0..t.nodes.len() {
                let mut l = t.leaves_under(id);
                l.sort_unstable();
                assert!(l.windows(2).all(|w| w[1] == w[0] + 1), "{dims:?} node {id}");
            }
        }
    }
}
