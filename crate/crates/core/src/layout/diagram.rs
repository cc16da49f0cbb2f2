//! Context and focus chord diagrams.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::bspline::sample_bspline;
use super::matrix::MatrixModel;
use super::octree::{build_octree, ChordTree};
use super::{polar_to_xy, LayoutError, ZOrderMap};
use crate::ensemble::VoxelRange;
use crate::estimators::MeasureKind;
use crate::sampling::{MaxEstimate, Strategy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagramMode {
    Context,
    Focus,
    Matrix,
}

/// Semicircle of a focus node: A below, B above.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeStatus {
    Computed,
    Pending,
    /// The measure was undefined everywhere it was sampled.
    Undefined,
}

/// Value and distance predicates; ranges are inclusive `[lo, hi]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Filters {
    #[serde(default)]
    pub value_range: Option<[f64; 2]>,
    #[serde(default)]
    pub distance_range: Option<[f64; 2]>,
    #[serde(default)]
    pub color_range: Option<[f64; 2]>,
}

impl Filters {
    pub fn validate(&self) -> Result<(), LayoutError> {
        for (name, r) in [("value", self.value_range), ("distance", self.distance_range), ("color", self.color_range)] {
            if let Some([lo, hi]) = r {
                if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                    return Err(LayoutError::InvalidFilter(format!("{name} range [{lo}, {hi}]")));
                }
            }
        }
        Ok(())
    }

    pub fn accepts_strength(&self, s: f64) -> bool {
        self.value_range.is_none_or(|[lo, hi]| s >= lo && s <= hi)
    }

    pub fn accepts_distance(&self, d: f64) -> bool {
        self.distance_range.is_none_or(|[lo, hi]| d >= lo && d <= hi)
    }
}

/// Geometry and styling knobs shared by all diagram builders.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagramParams {
    /// Fingerprint of the inputs; prefixes edge ids.
    pub key: String,
    pub measure: MeasureKind,
    pub variables: Vec<String>,
    pub level: usize,
    pub filters: Filters,
    pub beta: f64,
    pub samples: usize,
    /// Physical size of one voxel per axis, for brick distances.
    pub spacing: [f64; 3],
    pub key_colors: Vec<String>,
    pub background: String,
}

impl DiagramParams {
    pub fn new(key: impl Into<String>, measure: MeasureKind, variables: Vec<String>) -> Self {
        Self {
            key: key.into(),
            measure,
            variables,
            level: 0,
            filters: Filters::default(),
            beta: 0.85,
            samples: 64,
            spacing: [1.0; 3],
            key_colors: vec!["#08519c".into(), "#a50f15".into()],
            background: "#e6e6e6".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeInput {
    pub brick: VoxelRange,
    /// Ensemble spread per variable; `None` when undefined.
    pub spread: Vec<Option<f64>>,
}

/// One brick pair; `estimate` is `None` while pending and `Err` when the
/// measure was undefined.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeInput {
    pub a: usize,
    pub b: usize,
    pub variable_pair: [usize; 2],
    pub estimate: Option<Result<MaxEstimate, String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagramNode {
    pub id: usize,
    pub brick: VoxelRange,
    pub side: Option<Side>,
    /// Position in the node's own z-order.
    pub zorder: usize,
    pub angle: f64,
    pub radius: f64,
    pub position: [f64; 2],
    pub spread: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagramEdge {
    pub id: String,
    pub a: usize,
    pub b: usize,
    pub variable_pair: [usize; 2],
    pub status: EdgeStatus,
    pub value: Option<f64>,
    /// Filter and colour quantity: |r| for PPMCC, max(MI, 0) for KMI.
    pub strength: Option<f64>,
    /// Draw order; higher ranks are drawn later.
    pub rank: usize,
    pub color: String,
    pub distance: f64,
    pub control_points: Vec<[f64; 2]>,
    pub polyline: Vec<[f64; 2]>,
    pub argmax: Option<[[usize; 3]; 2]>,
    pub samples_used: usize,
    pub strategy: Option<Strategy>,
    pub uncertainty: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub first: VoxelRange,
    pub second: VoxelRange,
    pub first_color: String,
    pub second_color: String,
}

impl Selection {
    pub fn new(first: VoxelRange, second: VoxelRange) -> Self {
        Self { first, second, first_color: "red".into(), second_color: "blue".into() }
    }
}

/// Wire format shared by the HTTP API, the CLI and the SVG exporter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagramModel {
    pub key: String,
    pub mode: DiagramMode,
    pub measure: MeasureKind,
    pub variables: Vec<String>,
    pub level: usize,
    pub nodes: Vec<DiagramNode>,
    pub tree: Option<ChordTree>,
    /// Post-filter edges sorted by rank.
    pub edges: Vec<DiagramEdge>,
    /// Brick pairs before filtering.
    pub candidate_edges: usize,
    pub filters: Filters,
    pub color_range: [f64; 2],
    pub key_colors: Vec<String>,
    pub background: String,
    pub selection: Option<Selection>,
    pub matrix: Option<MatrixModel>,
}

impl DiagramModel {
    pub fn edge(&self, id: &str) -> Option<&DiagramEdge> {
        self.edges.iter().find(|e| e.id == id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("diagram serialises")
    }
}

/// Ordering key for draw rank: magnitude for PPMCC so strong negative
/// correlations rank high, the plain value for KMI.
pub fn rank_key(measure: MeasureKind, value: f64) -> f64 {
    match measure {
        MeasureKind::Ppmcc => value.abs(),
        MeasureKind::Kmi => value,
    }
}

fn strength(measure: MeasureKind, value: f64) -> f64 {
    match measure {
        MeasureKind::Ppmcc => value.abs(),
        MeasureKind::Kmi => value.max(0.0),
    }
}

fn parse_hex(c: &str) -> [u8; 3] {
    let h = c.trim_start_matches('#');
    let v = u32::from_str_radix(h, 16).unwrap_or(0);
    [(v >> 16) as u8, (v >> 8) as u8, v as u8]
}

/// Linear blend from `background` (at `range[0]`) to `key` (at `range[1]`).
pub fn color_for(value: f64, range: [f64; 2], background: &str, key: &str) -> String {
    let t = if range[1] > range[0] { ((value - range[0]) / (range[1] - range[0])).clamp(0.0, 1.0) } else { 1.0 };
    let (b, k) = (parse_hex(background), parse_hex(key));
    let mix = |i: usize| (b[i] as f64 + t * (k[i] as f64 - b[i] as f64)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(0), mix(1), mix(2))
}

pub const PENDING_COLOR: &str = "#9e9e9e";

/// Bundled curve between two leaves of a chord tree.
#[derive(Clone, Debug, PartialEq)]
pub struct BundledEdge {
    pub leaf_a: usize,
    pub leaf_b: usize,
    pub control_points: Vec<[f64; 2]>,
    pub polyline: Vec<[f64; 2]>,
}

/// Control polygon along the tree path, straightened toward the chord by
/// `1 − beta`, sampled as a clamped B-spline at `samples` parameters.
pub fn bundle_edge(
    tree: &ChordTree,
    leaf_a: usize,
    leaf_b: usize,
    beta: f64,
    samples: usize,
) -> Result<BundledEdge, LayoutError> {
    let path = tree.path(leaf_a, leaf_b)?;
    let raw: Vec<[f64; 2]> = path.iter().map(|&n| tree.nodes[n].position()).collect();
    let n = raw.len();
    let (p0, pn) = (raw[0], raw[n - 1]);
    let control_points: Vec<[f64; 2]> = raw
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let t = i as f64 / (n - 1) as f64;
            let line = [p0[0] + t * (pn[0] - p0[0]), p0[1] + t * (pn[1] - p0[1])];
            [beta * p[0] + (1.0 - beta) * line[0], beta * p[1] + (1.0 - beta) * line[1]]
        })
        .collect();
    let polyline = sample_bspline(&control_points, samples);
    Ok(BundledEdge { leaf_a, leaf_b, control_points, polyline })
}

fn brick_distance(a: &VoxelRange, b: &VoxelRange, spacing: [f64; 3]) -> f64 {
    let (ca, cb) = (a.center(), b.center());
    (0..3).map(|k| ((ca[k] - cb[k]) * spacing[k]).powi(2)).sum::<f64>().sqrt()
}

fn make_nodes(inputs: &[NodeInput], angles: &[f64], sides: &[Option<Side>], zorders: &[usize]) -> Vec<DiagramNode> {
    inputs
        .iter()
        .enumerate()
        .map(|(i, n)| DiagramNode {
            id: i,
            brick: n.brick,
            side: sides[i],
            zorder: zorders[i],
            angle: angles[i],
            radius: 1.0,
            position: polar_to_xy(angles[i], 1.0),
            spread: n.spread.iter().map(|s| s.filter(|v| v.is_finite()).map(|v| v.max(0.0))).collect(),
        })
        .collect()
}

fn make_edges(
    tree: &ChordTree,
    nodes: &[DiagramNode],
    inputs: &[EdgeInput],
    params: &DiagramParams,
) -> Result<(Vec<DiagramEdge>, [f64; 2]), LayoutError> {
    params.filters.validate()?;
    let measure = params.measure;
    let mut kept: Vec<(&EdgeInput, f64, Option<f64>)> = Vec::new();
    for e in inputs {
        if e.a >= nodes.len() || e.b >= nodes.len() {
            return Err(LayoutError::OutOfRange(format!("edge {}-{} with {} nodes", e.a, e.b, nodes.len())));
        }
        let d = brick_distance(&nodes[e.a].brick, &nodes[e.b].brick, params.spacing);
        if !params.filters.accepts_distance(d) {
            continue;
        }
        let s = match &e.estimate {
            Some(Ok(est)) => {
                let s = strength(measure, est.value);
                if !params.filters.accepts_strength(s) {
                    continue;
                }
                Some(s)
            }
            Some(Err(_)) => continue,
            None => None,
        };
        kept.push((e, d, s));
    }
    let color_range = params.filters.color_range.or(params.filters.value_range).unwrap_or_else(|| match measure {
        MeasureKind::Ppmcc => [0.0, 1.0],
        MeasureKind::Kmi => {
            let mx = kept.iter().filter_map(|k| k.2).fold(0.0, f64::max);
            [0.0, if mx > 0.0 { mx } else { 1.0 }]
        }
    });
    let mut order: Vec<usize> = (0..kept.len()).collect();
    let key_of = |e: &EdgeInput| match &e.estimate {
        Some(Ok(est)) => rank_key(measure, est.value),
        _ => f64::NEG_INFINITY,
    };
    order.sort_by(|&i, &j| {
        let (a, b) = (kept[i].0, kept[j].0);
        key_of(a)
            .total_cmp(&key_of(b))
            .then(a.a.cmp(&b.a))
            .then(a.b.cmp(&b.b))
            .then(a.variable_pair.cmp(&b.variable_pair))
    });
    let mut edges = Vec::with_capacity(kept.len());
    for (rank, &i) in order.iter().enumerate() {
        let (e, distance, s) = kept[i];
        let bundled = bundle_edge(tree, e.a, e.b, params.beta, params.samples)?;
        let key_color = &params.key_colors[e.variable_pair[0] % params.key_colors.len().max(1)];
        let (status, est) = match &e.estimate {
            Some(Ok(est)) => (EdgeStatus::Computed, Some(est)),
            Some(Err(_)) => (EdgeStatus::Undefined, None),
            None => (EdgeStatus::Pending, None),
        };
        edges.push(DiagramEdge {
            id: format!("{}.{}.{}.{}.{}", params.key, e.a, e.b, e.variable_pair[0], e.variable_pair[1]),
            a: e.a,
            b: e.b,
            variable_pair: e.variable_pair,
            status,
            value: est.map(|x| x.value),
            strength: s,
            rank,
            color: match s {
                Some(s) => color_for(s, color_range, &params.background, key_color),
                None => PENDING_COLOR.to_string(),
            },
            distance,
            control_points: bundled.control_points,
            polyline: bundled.polyline,
            argmax: est.map(|x| x.argmax),
            samples_used: est.map_or(0, |x| x.samples_used),
            strategy: est.map(|x| x.strategy),
            uncertainty: est.and_then(|x| x.uncertainty),
        });
    }
    Ok((edges, color_range))
}

/// Context view: `nodes` in z-order of `zmap`, spaced 2πi/M clockwise from
/// 12 o'clock.
pub fn build_context_diagram(
    nodes: &[NodeInput],
    zmap: &ZOrderMap,
    edges: &[EdgeInput],
    params: &DiagramParams,
) -> Result<DiagramModel, LayoutError> {
    let m = nodes.len();
    if m != zmap.len() {
        return Err(LayoutError::Inconsistent(format!("{m} nodes for {} z-order slots", zmap.len())));
    }
    let angles: Vec<f64> = (0..m).map(|i| 2.0 * PI * i as f64 / m as f64).collect();
    let tree = build_octree(zmap, &angles);
    let dn = make_nodes(nodes, &angles, &vec![None; m], &(0..m).collect::<Vec<_>>());
    let (edges_out, color_range) = make_edges(&tree, &dn, edges, params)?;
    Ok(DiagramModel {
        key: params.key.clone(),
        mode: DiagramMode::Context,
        measure: params.measure,
        variables: params.variables.clone(),
        level: params.level,
        nodes: dn,
        tree: Some(tree),
        edges: edges_out,
        candidate_edges: edges.len(),
        filters: params.filters.clone(),
        color_range,
        key_colors: params.key_colors.clone(),
        background: params.background.clone(),
        selection: None,
        matrix: None,
    })
}

/// Focus view: children of A (ids `0..na`) on the bottom semicircle and
/// children of B (ids `na..`) on the top one, each in local z-order.
/// Edge endpoints use these ids.
#[allow(clippy::too_many_arguments)]
pub fn build_focus_diagram(
    a_children: &[NodeInput],
    a_zorder: &ZOrderMap,
    b_children: &[NodeInput],
    b_zorder: &ZOrderMap,
    edges: &[EdgeInput],
    selection: Selection,
    params: &DiagramParams,
) -> Result<DiagramModel, LayoutError> {
    let (na, nb) = (a_children.len(), b_children.len());
    if na != a_zorder.len() || nb != b_zorder.len() {
        return Err(LayoutError::Inconsistent("child counts differ from z-order maps".into()));
    }
    if let Some(e) = edges.iter().find(|e| !(e.a < na && e.b >= na)) {
        return Err(LayoutError::Inconsistent(format!("edge {}-{} is not an A-B cross pair", e.a, e.b)));
    }
    let angles_a: Vec<f64> = (0..na).map(|i| PI / 2.0 + PI * (i as f64 + 0.5) / na as f64).collect();
    let angles_b: Vec<f64> = (0..nb).map(|i| -PI / 2.0 + PI * (i as f64 + 0.5) / nb as f64).collect();
    let tree = ChordTree::build(&[(a_zorder, &angles_a), (b_zorder, &angles_b)]);
    let inputs: Vec<NodeInput> = a_children.iter().chain(b_children).cloned().collect();
    let angles: Vec<f64> = angles_a.iter().chain(&angles_b).copied().collect();
    let sides: Vec<Option<Side>> = (0..na + nb).map(|i| Some(if i < na { Side::A } else { Side::B })).collect();
    let zorders: Vec<usize> = (0..na).chain(0..nb).collect();
    let dn = make_nodes(&inputs, &angles, &sides, &zorders);
    let (edges_out, color_range) = make_edges(&tree, &dn, edges, params)?;
    Ok(DiagramModel {
        key: params.key.clone(),
        mode: DiagramMode::Focus,
        measure: params.measure,
        variables: params.variables.clone(),
        level: params.level,
        nodes: dn,
        tree: Some(tree),
        edges: edges_out,
        candidate_edges: edges.len(),
        filters: params.filters.clone(),
        color_range,
        key_colors: params.key_colors.clone(),
        background: params.background.clone(),
        selection: Some(selection),
        matrix: None,
    })
}
