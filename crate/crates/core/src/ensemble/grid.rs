use serde::{Deserialize, Serialize};

use super::EnsembleError;

/// Grid-point counts along x, y and z.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub x: usize,
    pub y: usize,
    pub z: usize,
}

impl Dims {
    pub const fn new(x: usize, y: usize, z: usize) -> Self {
        Self { x, y, z }
    }

    pub fn from_array(a: [usize; 3]) -> Self {
        Self { x: a[0], y: a[1], z: a[2] }
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.x, self.y, self.z]
    }

    pub fn count(&self) -> usize {
        self.x * self.y * self.z
    }

    /// Linear index in (z, y, x) order with x fastest.
    #[inline]
    pub fn linear(&self, p: [usize; 3]) -> usize {
        (p[2] * self.y + p[1]) * self.x + p[0]
    }

    #[inline]
    pub fn coords(&self, linear: usize) -> [usize; 3] {
        let x = linear % self.x;
        let rest = linear / self.x;
        [x, rest % self.y, rest / self.y]
    }

    pub fn contains(&self, p: [usize; 3]) -> bool {
        p[0] < self.x && p[1] < self.y && p[2] < self.z
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariableMeta {
    pub name: String,
    pub units: String,
    /// (min, max) over non-missing values.
    pub value_range: (f32, f32),
    pub missing_sentinel: Option<f32>,
}

impl VariableMeta {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), units: String::new(), value_range: (0.0, 0.0), missing_sentinel: None }
    }

    #[inline]
    pub fn is_missing(&self, v: f32) -> bool {
        match self.missing_sentinel {
            Some(s) => v.to_bits() == s.to_bits() || v == s,
            None => false,
        }
    }
}

/// Per-member, per-variable scalar fields on an X×Y×Z grid.
///
/// Values are stored in (variable, member, z, y, x) order, which is also the
/// on-disk order. The grid is immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleGrid {
    dims: Dims,
    members: usize,
    variables: Vec<VariableMeta>,
    values: Vec<f32>,
}

impl EnsembleGrid {
    /// Validates the invariants and computes per-variable value ranges.
    pub fn new(
        dims: Dims,
        members: usize,
        mut variables: Vec<VariableMeta>,
        values: Vec<f32>,
    ) -> Result<Self, EnsembleError> {
        if dims.x == 0 || dims.y == 0 || dims.z == 0 {
            return Err(EnsembleError::InvalidGrid(format!("grid dims must be >= 1, got {dims:?}")));
        }
        if members < 2 {
            return Err(EnsembleError::InvalidGrid(format!("need at least 2 members, got {members}")));
        }
        if variables.is_empty() {
            return Err(EnsembleError::InvalidGrid("no variables".into()));
        }
        let expected = dims.count() * members * variables.len();
        if values.len() != expected {
            return Err(EnsembleError::SizeMismatch { expected: expected as u64, actual: values.len() as u64 });
        }
        let per_var = dims.count() * members;
        for (vi, meta) in variables.iter_mut().enumerate() {
            let slice = &values[vi * per_var..(vi + 1) * per_var];
            let mut lo = f32::INFINITY;
            let mut hi = f32::NEG_INFINITY;
            for (i, &v) in slice.iter().enumerate() {
                if meta.is_missing(v) {
                    continue;
                }
                if !v.is_finite() {
                    let member = i / dims.count();
                    let voxel = i % dims.count();
                    return Err(EnsembleError::NonFinite {
                        offset: ((vi * per_var + i) * 4) as u64,
                        variable: vi,
                        member,
                        voxel,
                        value: v,
                    });
                }
                lo = lo.min(v);
                hi = hi.max(v);
            }
            meta.value_range = if lo <= hi { (lo, hi) } else { (0.0, 0.0) };
        }
        Ok(Self { dims, members, variables, values })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn members(&self) -> usize {
        self.members
    }

    pub fn variables(&self) -> &[VariableMeta] {
        &self.variables
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn variable_index(&self, name: &str) -> Result<usize, EnsembleError> {
        self.variables
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| EnsembleError::UnknownVariable(name.to_string()))
    }

    /// Raw data size in bytes.
    pub fn byte_size(&self) -> u64 {
        self.values.len() as u64 * 4
    }

    #[inline]
    pub fn value(&self, variable: usize, member: usize, voxel: usize) -> f32 {
        let n = self.dims.count();
        self.values[(variable * self.members + member) * n + voxel]
    }

    /// All member values of one variable, member-major.
    pub fn variable_slice(&self, variable: usize) -> &[f32] {
        let per_var = self.dims.count() * self.members;
        &self.values[variable * per_var..(variable + 1) * per_var]
    }

    /// Writes the across-member series at `voxel` into `out`.
    /// Returns `false` if any member value is missing.
    pub fn series_into(&self, variable: usize, voxel: usize, out: &mut Vec<f64>) -> bool {
        out.clear();
        let n = self.dims.count();
        let meta = &self.variables[variable];
        let base = variable * self.members * n + voxel;
        for e in 0..self.members {
            let v = self.values[base + e * n];
            if meta.is_missing(v) {
                return false;
            }
            out.push(v as f64);
        }
        true
    }

    /// Per-voxel across-member sample standard deviation (denominator E-1),
    /// NaN where fewer than two members are present.
    pub fn std_field(&self, variable: usize) -> Vec<f32> {
        let n = self.dims.count();
        let slice = self.variable_slice(variable);
        let meta = &self.variables[variable];
        let mut sum = vec![0.0f64; n];
        let mut cnt = vec![0u32; n];
        for e in 0..self.members {
            let row = &slice[e * n..(e + 1) * n];
            for (i, &v) in row.iter().enumerate() {
                if !meta.is_missing(v) {
                    sum[i] += v as f64;
                    cnt[i] += 1;
                }
            }
        }
        let mean: Vec<f64> = sum.iter().zip(&cnt).map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 }).collect();
        let mut ss = vec![0.0f64; n];
        for e in 0..self.members {
            let row = &slice[e * n..(e + 1) * n];
            for (i, &v) in row.iter().enumerate() {
                if !meta.is_missing(v) {
                    let d = v as f64 - mean[i];
                    ss[i] += d * d;
                }
            }
        }
        ss.iter()
            .zip(&cnt)
            .map(|(s, &c)| if c >= 2 { (s / (c - 1) as f64).sqrt() as f32 } else { f32::NAN })
            .collect()
    }
}
