//! Inter-variable correlation matrix.

use serde::{Deserialize, Serialize};

use super::diagram::{color_for, DiagramMode, DiagramModel, DiagramNode, DiagramParams, EdgeStatus, NodeInput, PENDING_COLOR};
use super::{polar_to_xy, LayoutError};
use crate::estimators::MeasureKind;
use crate::sampling::{MaxEstimate, Strategy};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixCell {
    pub status: EdgeStatus,
    pub value: Option<f64>,
    pub color: String,
    pub argmax: Option<[[usize; 3]; 2]>,
    pub samples_used: usize,
    pub strategy: Option<Strategy>,
    pub uncertainty: Option<f64>,
}

/// `cells[r][c]` relates the column variable at region `c` to the row
/// variable at region `r`, in every cell; both triangles are therefore
/// distinct orientations of the same region pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixModel {
    pub column_variable: String,
    pub row_variable: String,
    pub cells: Vec<Vec<MatrixCell>>,
    /// Spread of the column variable per column region.
    pub margin_top: Vec<Option<f64>>,
    /// Spread of the row variable per row region.
    pub margin_left: Vec<Option<f64>>,
}

impl MatrixModel {
    pub fn size(&self) -> usize {
        self.cells.len()
    }
}

/// Builds the matrix over `regions`; `estimates[r][c]` is the estimate of
/// (variable 0 at region c, variable 1 at region r). `regions[i].spread`
/// holds the spreads of both variables.
pub fn build_matrix(
    regions: &[NodeInput],
    estimates: &[Vec<Option<Result<MaxEstimate, String>>>],
    params: &DiagramParams,
) -> Result<DiagramModel, LayoutError> {
    params.filters.validate()?;
    if params.variables.len() != 2 {
        return Err(LayoutError::Inconsistent("matrix needs exactly two variables".into()));
    }
    let n = regions.len();
    if estimates.len() != n || estimates.iter().any(|r| r.len() != n) {
        return Err(LayoutError::Inconsistent(format!("matrix estimates must be {n}×{n}")));
    }
    let strength = |v: f64| match params.measure {
        MeasureKind::Ppmcc => v.abs(),
        MeasureKind::Kmi => v.max(0.0),
    };
    let color_range = params.filters.color_range.or(params.filters.value_range).unwrap_or_else(|| match params.measure {
        MeasureKind::Ppmcc => [0.0, 1.0],
        MeasureKind::Kmi => {
            let mx = estimates.iter().flatten().filter_map(|e| e.as_ref().and_then(|r| r.as_ref().ok())).map(|e| strength(e.value)).fold(0.0, f64::max);
            [0.0, if mx > 0.0 { mx } else { 1.0 }]
        }
    });
    let key = &params.key_colors[0];
    let cells = estimates
        .iter()
        .map(|row| {
            row.iter()
                .map(|e| match e {
                    Some(Ok(est)) => MatrixCell {
                        status: EdgeStatus::Computed,
                        value: Some(est.value),
                        color: color_for(strength(est.value), color_range, &params.background, key),
                        argmax: Some(est.argmax),
                        samples_used: est.samples_used,
                        strategy: Some(est.strategy),
                        uncertainty: est.uncertainty,
                    },
                    other => MatrixCell {
                        status: if other.is_none() { EdgeStatus::Pending } else { EdgeStatus::Undefined },
                        value: None,
                        color: PENDING_COLOR.into(),
                        argmax: None,
                        samples_used: 0,
                        strategy: None,
                        uncertainty: None,
                    },
                })
                .collect()
        })
        .collect();
    let spread = |i: usize, v: usize| regions[i].spread.get(v).copied().flatten().filter(|s| s.is_finite());
    let matrix = MatrixModel {
        column_variable: params.variables[0].clone(),
        row_variable: params.variables[1].clone(),
        cells,
        margin_top: (0..n).map(|i| spread(i, 0)).collect(),
        margin_left: (0..n).map(|i| spread(i, 1)).collect(),
    };
    let nodes = regions
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let angle = 2.0 * std::f64::consts::PI * i as f64 / n.max(1) as f64;
            DiagramNode {
                id: i,
                brick: r.brick,
                side: None,
                zorder: i,
                angle,
                radius: 1.0,
                position: polar_to_xy(angle, 1.0),
                spread: r.spread.clone(),
            }
        })
        .collect();
    Ok(DiagramModel {
        key: params.key.clone(),
        mode: DiagramMode::Matrix,
        measure: params.measure,
        variables: params.variables.clone(),
        level: params.level,
        nodes,
        tree: None,
        edges: vec![],
        candidate_edges: n * n,
        filters: params.filters.clone(),
        color_range,
        key_colors: params.key_colors.clone(),
        background: params.background.clone(),
        selection: None,
        matrix: Some(matrix),
    })
}
