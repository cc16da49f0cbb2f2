//! Z-order (Morton) linearisation of brick grids.

use serde::{Deserialize, Serialize};

use super::LayoutError;

/// Number of bits needed to index `extent` positions.
pub fn bits_for(extent: usize) -> u32 {
    if extent <= 1 {
        0
    } else {
        usize::BITS - (extent - 1).leading_zeros()
    }
}

/// Interleaves coordinate bits starting at the least significant slot in
/// x, y, z order. Axes run out of bits independently.
pub fn morton_code(c: [usize; 3], bits: [u32; 3]) -> u64 {
    let max_bits = bits.iter().copied().max().unwrap_or(0);
    let mut code = 0u64;
    let mut pos = 0;
    for t in 0..max_bits {
        for a in 0..3 {
            if t < bits[a] {
                code |= (((c[a] >> t) & 1) as u64) << pos;
                pos += 1;
            }
        }
    }
    code
}

/// Bijection between brick grid coordinates and dense z-order indices.
///
/// For non-power-of-two grids the Morton codes are compacted to `0..M`
/// while preserving their order, so every Morton prefix (octree node) still
/// covers a contiguous index range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZOrderMap {
    dims: [usize; 3],
    bits: [u32; 3],
    forward: Vec<usize>,
    inverse: Vec<[usize; 3]>,
    codes: Vec<u64>,
}

impl ZOrderMap {
    pub fn new(dims: [usize; 3]) -> Self {
        assert!(dims.iter().all(|&d| d >= 1), "zero extent");
        let bits = dims.map(bits_for);
        let n = dims[0] * dims[1] * dims[2];
        let mut order: Vec<(u64, [usize; 3])> = Vec::with_capacity(n);
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    order.push((morton_code([x, y, z], bits), [x, y, z]));
                }
            }
        }
        order.sort_unstable_by_key(|&(code, _)| code);
        let mut forward = vec![0; n];
        let mut inverse = Vec::with_capacity(n);
        let mut codes = Vec::with_capacity(n);
        for (i, &(code, c)) in order.iter().enumerate() {
            forward[(c[2] * dims[1] + c[1]) * dims[0] + c[0]] = i;
            inverse.push(c);
            codes.push(code);
        }
        Self { dims, bits, forward, inverse, codes }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.inverse.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inverse.is_empty()
    }

    pub fn index(&self, c: [usize; 3]) -> Result<usize, LayoutError> {
        if (0..3).any(|a| c[a] >= self.dims[a]) {
            return Err(LayoutError::OutOfRange(format!("coords {c:?} outside {:?}", self.dims)));
        }
        Ok(self.forward[(c[2] * self.dims[1] + c[1]) * self.dims[0] + c[0]])
    }

    pub fn coords(&self, index: usize) -> Result<[usize; 3], LayoutError> {
        self.inverse
            .get(index)
            .copied()
            .ok_or_else(|| LayoutError::OutOfRange(format!("z-index {index} >= {}", self.len())))
    }

    /// Octree depth: number of bit levels.
    pub fn depth(&self) -> u32 {
        self.bits.iter().copied().max().unwrap_or(0)
    }

    /// Morton prefix identifying the octree node at `depth` (0 = root,
    /// `self.depth()` = the brick itself) that contains brick `index`.
    pub fn prefix(&self, index: usize, depth: u32) -> u64 {
        let levels = self.depth();
        let mut shift = 0;
        for t in 0..levels.saturating_sub(depth) {
            shift += self.bits.iter().filter(|&&b| t < b).count() as u32;
        }
        if shift >= 64 {
            0
        } else {
            self.codes[index] >> shift
        }
    }
}

/// Dense z-order index of `c` inside `dims`, without building a map.
pub fn zorder_index(c: [usize; 3], dims: [usize; 3]) -> Result<usize, LayoutError> {
    ZOrderMap::new(dims).index(c)
}
