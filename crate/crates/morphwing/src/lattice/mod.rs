//! Graded BCC beam lattice generation: internal lattice, refined surface
//! lattice, graph weld/merge, channel carving and build segmentation.

mod fibers;
mod format;

pub use fibers::{default_stations, route_fibers, FiberPath, FiberStation};
pub(crate) use fibers::turning_angles as turning_angles_of;
pub use format::{
    read_lattice_file, read_lattice_string, write_lattice_file, write_lattice_string, LatticeFile,
};

use std::collections::{HashMap, HashSet};

use nalgebra::Point3;
use thiserror::Error;

use crate::capsule::{point_segment_distance, segment_segment_distance};
use crate::geometry::{surface_point, CellMap, Side};

/// Node fusion tolerance, mm.
pub const WELD_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum LatticeError {
    #[error("zero-length edge between nodes {0} and {1}")]
    ZeroLengthEdge(usize, usize),
    #[error("lattice is disconnected: {0} components with sizes {1:?}")]
    Disconnected(usize, Vec<usize>),
    #[error(
        "rod channel intersects {count} beam(s) (first: edge {first_edge}, clearance {clearance:.3} mm)"
    )]
    RodInterference {
        count: usize,
        first_edge: usize,
        clearance: f64,
    },
    #[error("fiber {fiber} waypoint {waypoint} clearance {clearance:.3} mm below minimum {min:.3} mm")]
    RoutingClearance {
        fiber: usize,
        waypoint: usize,
        clearance: f64,
        min: f64,
    },
    #[error("cannot split {parts} segments across {sheets} spanwise sheets")]
    TooFewSheets { parts: usize, sheets: usize },
    #[error("lattice does not match the cell map it was supposedly generated from")]
    ProvenanceMismatch,
    #[error("lattice has no tip anchor nodes")]
    NoTipAnchors,
    #[error("invalid grading: {0}")]
    InvalidGrading(String),
    #[error("lattice format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Node classification flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NodeTags(u8);

impl NodeTags {
    pub const INTERNAL: NodeTags = NodeTags(1);
    pub const SURFACE: NodeTags = NodeTags(2);
    pub const ROD_ANCHOR: NodeTags = NodeTags(4);
    pub const TIP_ANCHOR: NodeTags = NodeTags(8);

    pub fn contains(self, other: NodeTags) -> bool {
        self.0 & other.0 == other.0
    }
    pub fn insert(&mut self, other: NodeTags) {
        self.0 |= other.0;
    }
    pub fn union(self, other: NodeTags) -> NodeTags {
        NodeTags(self.0 | other.0)
    }
    pub fn bits(self) -> u8 {
        self.0
    }
    pub fn from_bits(bits: u8) -> NodeTags {
        NodeTags(bits & 0x0f)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LatticeNode {
    pub position: Point3<f64>,
    pub tags: NodeTags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Internal,
    Surface,
}

#[derive(Debug, Clone, Copy)]
pub struct LatticeEdge {
    pub a: usize,
    pub b: usize,
    pub radius: f64,
    pub segment: Option<u8>,
    pub kind: EdgeKind,
}

/// Node/edge beam graph. The shared structure consumed by meshing, the
/// frame solver and the sensing model.
#[derive(Debug, Clone, Default)]
pub struct BeamLattice {
    pub nodes: Vec<LatticeNode>,
    pub edges: Vec<LatticeEdge>,
}

impl BeamLattice {
    pub fn edge_length(&self, e: &LatticeEdge) -> f64 {
        (self.nodes[e.b].position - self.nodes[e.a].position).norm()
    }

    /// Total beam material volume (sum of cylinder volumes), mm^3.
    pub fn material_volume(&self) -> f64 {
        self.edges
            .iter()
            .map(|e| std::f64::consts::PI * e.radius * e.radius * self.edge_length(e))
            .sum()
    }

    /// Structural fingerprint used to tie fibers and deformation states to
    /// the lattice they were computed from.
    pub fn fingerprint(&self) -> u64 {
        // FNV-1a over node coordinates and edge connectivity.
        let mut h: u64 = 0xcbf29ce484222325;
        let mut mix = |v: u64| {
            for byte in v.to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        mix(self.nodes.len() as u64);
        mix(self.edges.len() as u64);
        for n in &self.nodes {
            mix(n.position.x.to_bits());
            mix(n.position.y.to_bits());
            mix(n.position.z.to_bits());
        }
        for e in &self.edges {
            mix(e.a as u64);
            mix(e.b as u64);
            mix(e.radius.to_bits());
        }
        h
    }

    pub fn nodes_with_tag(&self, tag: NodeTags) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(move |(_, n)| n.tags.contains(tag))
            .map(|(i, _)| i)
    }

    fn check_edges(&self) -> Result<(), LatticeError> {
        for e in &self.edges {
            if self.edge_length(e) < WELD_TOL {
                return Err(LatticeError::ZeroLengthEdge(e.a, e.b));
            }
        }
        Ok(())
    }

    /// Connected component sizes (singleton isolated nodes included).
    pub fn components(&self) -> Vec<usize> {
        let mut uf = UnionFind::new(self.nodes.len());
        for e in &self.edges {
            uf.union(e.a, e.b);
        }
        uf.component_sizes()
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }
}

/// Continuous beam-radius field: smoothstep blend from `root_radius` to
/// `tip_radius` over the span, with a multiplier for surface-lattice beams.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradingField {
    pub root_radius: f64,
    pub tip_radius: f64,
    pub surface_radius_factor: f64,
}

impl GradingField {
    pub fn new(
        root_radius: f64,
        tip_radius: f64,
        surface_radius_factor: f64,
    ) -> Result<Self, LatticeError> {
        if !(root_radius > 0.0 && tip_radius > 0.0 && surface_radius_factor > 0.0) {
            return Err(LatticeError::InvalidGrading(format!(
                "radii and surface factor must be > 0, got {root_radius}, {tip_radius}, {surface_radius_factor}"
            )));
        }
        Ok(Self {
            root_radius,
            tip_radius,
            surface_radius_factor,
        })
    }

    pub fn uniform(radius: f64) -> Self {
        Self {
            root_radius: radius,
            tip_radius: radius,
            surface_radius_factor: 1.0,
        }
    }

    /// Beam radius at a point, given the total span and the owning edge kind.
    pub fn radius_at(&self, point: &Point3<f64>, span: f64, kind: EdgeKind) -> f64 {
        let s = (point.y / span).clamp(0.0, 1.0);
        let r = self.root_radius
            + (self.tip_radius - self.root_radius) * crate::geometry::smoothstep(s);
        match kind {
            EdgeKind::Internal => r,
            EdgeKind::Surface => r * self.surface_radius_factor,
        }
    }
}

/// One BCC cell per map cell: a center node at the mean of the 8 corners
/// and 8 center-to-corner struts.
pub fn generate_bcc(map: &CellMap, grading: &GradingField) -> Result<BeamLattice, LatticeError> {
    let (nu, nv, nw) = map.dims;
    let span = map.planform.span;
    let n_verts = (nu + 1) * (nv + 1) * (nw + 1);

    let mut nodes: Vec<LatticeNode> = map
        .vertices()
        .iter()
        .map(|&p| LatticeNode {
            position: p,
            tags: NodeTags::INTERNAL,
        })
        .collect();
    let mut edges = Vec::with_capacity(8 * nu * nv * nw);

    for k in 0..nw {
        for j in 0..nv {
            for i in 0..nu {
                let corners = map.cell_corners(i, j, k);
                let center = cell_center(&corners);
                let center_id = nodes.len();
                nodes.push(LatticeNode {
                    position: center,
                    tags: NodeTags::INTERNAL,
                });
                let corner_ids = [
                    map.vertex_index(i, j, k),
                    map.vertex_index(i + 1, j, k),
                    map.vertex_index(i + 1, j + 1, k),
                    map.vertex_index(i, j + 1, k),
                    map.vertex_index(i, j, k + 1),
                    map.vertex_index(i + 1, j, k + 1),
                    map.vertex_index(i + 1, j + 1, k + 1),
                    map.vertex_index(i, j + 1, k + 1),
                ];
                for (c, &cid) in corner_ids.iter().enumerate() {
                    let mid = nalgebra::center(&center, &corners[c]);
                    edges.push(LatticeEdge {
                        a: center_id,
                        b: cid,
                        radius: grading.radius_at(&mid, span, EdgeKind::Internal),
                        segment: None,
                        kind: EdgeKind::Internal,
                    });
                }
            }
        }
    }
    debug_assert_eq!(nodes.len(), n_verts + nu * nv * nw);

    let lattice = BeamLattice { nodes, edges };
    lattice.check_edges()?;
    Ok(lattice)
}

fn cell_center(corners: &[Point3<f64>; 8]) -> Point3<f64> {
    let mut c = nalgebra::Vector3::zeros();
    for p in corners {
        c += p.coords;
    }
    Point3::from(c / 8.0)
}

/// One-cell-thick BCC skin layer, 2x finer than the internal map in u and
/// v, with its outer node sheets lying exactly on the wing surfaces.
pub fn generate_surface_lattice(
    map: &CellMap,
    grading: &GradingField,
) -> Result<BeamLattice, LatticeError> {
    let (nu, nv, nw) = map.dims;
    let span = map.planform.span;
    let ru = refine_params(&map.u_params);
    let rs = refine_params(&map.s_params);
    let (mu, mv) = (2 * nu, 2 * nv);

    let mut nodes: Vec<LatticeNode> = Vec::new();
    let mut edges: Vec<LatticeEdge> = Vec::new();

    for side in [Side::Lower, Side::Upper] {
        // Inner sheet of the slab: the internal map sheet one layer in from
        // the surface (bilinear at refined params so shared positions weld).
        let k_in = match side {
            Side::Lower => 1.min(nw),
            Side::Upper => nw.saturating_sub(1),
        };
        let sheet_at = |a: usize, b: usize| -> Point3<f64> {
            let (i, fi) = (a / 2, a % 2);
            let (j, fj) = (b / 2, b % 2);
            match (fi, fj) {
                (0, 0) => map.vertex(i, j, k_in),
                (1, 0) => nalgebra::center(&map.vertex(i, j, k_in), &map.vertex(i + 1, j, k_in)),
                (0, 1) => nalgebra::center(&map.vertex(i, j, k_in), &map.vertex(i, j + 1, k_in)),
                _ => {
                    let p = nalgebra::center(&map.vertex(i, j, k_in), &map.vertex(i + 1, j + 1, k_in));
                    let q = nalgebra::center(&map.vertex(i + 1, j, k_in), &map.vertex(i, j + 1, k_in));
                    nalgebra::center(&p, &q)
                }
            }
        };

        let base = nodes.len();
        // Sheet 0 = inner, sheet 1 = outer for both sides; cell orientation
        // fixed below.
        for sheet in 0..2 {
            for b in 0..=mv {
                for a in 0..=mu {
                    let p = if sheet == 0 {
                        sheet_at(a, b)
                    } else {
                        surface_point(&map.planform, ru[a], rs[b], side)
                            .expect("refined params in range")
                    };
                    nodes.push(LatticeNode {
                        position: p,
                        tags: NodeTags::SURFACE,
                    });
                }
            }
        }
        let vid = |sheet: usize, a: usize, b: usize| base + (sheet * (mv + 1) + b) * (mu + 1) + a;

        for b in 0..mv {
            for a in 0..mu {
                // Keep the hexahedron right-handed: on the lower side the
                // outer sheet is below the inner one.
                let (k0, k1) = match side {
                    Side::Lower => (1, 0),
                    Side::Upper => (0, 1),
                };
                let corner_ids = [
                    vid(k0, a, b),
                    vid(k0, a + 1, b),
                    vid(k0, a + 1, b + 1),
                    vid(k0, a, b + 1),
                    vid(k1, a, b),
                    vid(k1, a + 1, b),
                    vid(k1, a + 1, b + 1),
                    vid(k1, a, b + 1),
                ];
                let corners: [Point3<f64>; 8] =
                    std::array::from_fn(|c| nodes[corner_ids[c]].position);
                let center = cell_center(&corners);
                let center_id = nodes.len();
                nodes.push(LatticeNode {
                    position: center,
                    tags: NodeTags::SURFACE,
                });
                for &cid in &corner_ids {
                    let mid = nalgebra::center(&center, &nodes[cid].position);
                    edges.push(LatticeEdge {
                        a: center_id,
                        b: cid,
                        radius: grading.radius_at(&mid, span, EdgeKind::Surface),
                        segment: None,
                        kind: EdgeKind::Surface,
                    });
                }
            }
        }
    }

    let lattice = weld(BeamLattice { nodes, edges });
    lattice.check_edges()?;
    Ok(lattice)
}

fn refine_params(p: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * p.len() - 1);
    for w in p.windows(2) {
        out.push(w[0]);
        out.push(0.5 * (w[0] + w[1]));
    }
    out.push(*p.last().unwrap());
    out
}

/// Fuse nodes within [`WELD_TOL`], remap edges, drop duplicates/self-loops.
pub fn weld(lattice: BeamLattice) -> BeamLattice {
    let mut grid: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    let mut remap = vec![usize::MAX; lattice.nodes.len()];
    let mut nodes: Vec<LatticeNode> = Vec::with_capacity(lattice.nodes.len());
    let inv = 1.0 / WELD_TOL;

    for (old, n) in lattice.nodes.iter().enumerate() {
        let key = (
            (n.position.x * inv).round() as i64,
            (n.position.y * inv).round() as i64,
            (n.position.z * inv).round() as i64,
        );
        let mut found = None;
        'search: for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(ids) = grid.get(&(key.0 + dx, key.1 + dy, key.2 + dz)) {
                        for &id in ids {
                            if (nodes[id].position - n.position).norm() <= WELD_TOL {
                                found = Some(id);
                                break 'search;
                            }
                        }
                    }
                }
            }
        }
        match found {
            Some(id) => {
                nodes[id].tags = nodes[id].tags.union(n.tags);
                remap[old] = id;
            }
            None => {
                let id = nodes.len();
                nodes.push(*n);
                grid.entry(key).or_default().push(id);
                remap[old] = id;
            }
        }
    }

    let mut seen: HashSet<(usize, usize)> = HashSet::with_capacity(lattice.edges.len());
    let mut edges = Vec::with_capacity(lattice.edges.len());
    for e in &lattice.edges {
        let (a, b) = (remap[e.a], remap[e.b]);
        if a == b {
            continue;
        }
        let key = (a.min(b), a.max(b));
        if seen.insert(key) {
            edges.push(LatticeEdge { a, b, ..*e });
        }
    }
    BeamLattice { nodes, edges }
}

/// Graph union of two lattices from the same planform: weld coincident
/// nodes, drop duplicate edges, require a connected result.
pub fn merge(a: &BeamLattice, b: &BeamLattice) -> Result<BeamLattice, LatticeError> {
    let mut nodes = a.nodes.clone();
    nodes.extend_from_slice(&b.nodes);
    let mut edges = a.edges.clone();
    let offset = a.nodes.len();
    edges.extend(b.edges.iter().map(|e| LatticeEdge {
        a: e.a + offset,
        b: e.b + offset,
        ..*e
    }));
    let merged = weld(BeamLattice { nodes, edges });
    let comps = merged.components();
    if comps.len() > 1 {
        return Err(LatticeError::Disconnected(comps.len(), comps));
    }
    merged.check_edges()?;
    Ok(merged)
}

/// Tag nodes near the actuation-rod axis as rod anchors; rod anchors on the
/// tip plane become tip anchors.
pub fn tag_anchors(
    lattice: &mut BeamLattice,
    rod_a: &Point3<f64>,
    rod_b: &Point3<f64>,
    anchor_radius: f64,
    span: f64,
) -> (usize, usize) {
    let (mut n_rod, mut n_tip) = (0, 0);
    for node in &mut lattice.nodes {
        if point_segment_distance(&node.position, rod_a, rod_b) <= anchor_radius {
            node.tags.insert(NodeTags::ROD_ANCHOR);
            n_rod += 1;
            if (node.position.y - span).abs() < WELD_TOL {
                node.tags.insert(NodeTags::TIP_ANCHOR);
                n_tip += 1;
            }
        }
    }
    (n_rod, n_tip)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    Rod,
    Fiber,
}

/// Empty region reserved through the lattice: actuation rod bore or a
/// sensor-fiber channel.
#[derive(Debug, Clone)]
pub struct Channel {
    pub axis: Vec<Point3<f64>>,
    pub radius: f64,
    pub kind: ChannelKind,
}

impl Channel {
    pub fn new(axis: Vec<Point3<f64>>, radius: f64, kind: ChannelKind) -> Self {
        assert!(axis.len() >= 2, "channel axis needs at least 2 points");
        assert!(radius >= 0.0);
        Self { axis, radius, kind }
    }

    /// Minimum clearance between the channel capsule and an edge capsule
    /// (negative means interference).
    fn edge_clearance(&self, lattice: &BeamLattice, e: &LatticeEdge) -> f64 {
        let pa = &lattice.nodes[e.a].position;
        let pb = &lattice.nodes[e.b].position;
        self.axis
            .windows(2)
            .map(|w| segment_segment_distance(pa, pb, &w[0], &w[1]) - e.radius - self.radius)
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone)]
pub struct ClearanceReport {
    pub kind: ChannelKind,
    /// Edges removed from the lattice (fiber channels only).
    pub removed: Vec<usize>,
    /// Edges thinned to half radius because removal would disconnect.
    pub thinned: Vec<usize>,
    /// Minimum clearance over all surviving edges, mm.
    pub min_clearance: f64,
}

/// Carve a channel out of the beam graph.
///
/// Rod channels must already be clear (the quarter-chord cell alignment
/// guarantees it); any interference is a hard error. Fiber channels remove
/// interfering beams, or thin them to half radius where removal would
/// disconnect the graph.
pub fn carve_channel(
    lattice: &BeamLattice,
    channel: &Channel,
) -> Result<(BeamLattice, ClearanceReport), LatticeError> {
    let clearances: Vec<f64> = lattice
        .edges
        .iter()
        .map(|e| channel.edge_clearance(lattice, e))
        .collect();
    let interfering: Vec<usize> = clearances
        .iter()
        .enumerate()
        .filter(|(_, &c)| c < 0.0)
        .map(|(i, _)| i)
        .collect();

    match channel.kind {
        ChannelKind::Rod => {
            if let Some(&first) = interfering.first() {
                return Err(LatticeError::RodInterference {
                    count: interfering.len(),
                    first_edge: first,
                    clearance: clearances[first],
                });
            }
            let min = clearances.iter().copied().fold(f64::INFINITY, f64::min);
            Ok((
                lattice.clone(),
                ClearanceReport {
                    kind: ChannelKind::Rod,
                    removed: Vec::new(),
                    thinned: Vec::new(),
                    min_clearance: min,
                },
            ))
        }
        ChannelKind::Fiber => {
            let mut out = lattice.clone();
            let mut removed = Vec::new();
            let mut thinned = Vec::new();
            let mut dropped: HashSet<usize> = HashSet::new();
            for &ei in &interfering {
                dropped.insert(ei);
                if connected_without(&out, &dropped) {
                    removed.push(ei);
                } else {
                    dropped.remove(&ei);
                    out.edges[ei].radius *= 0.5;
                    thinned.push(ei);
                }
            }
            let kept: Vec<LatticeEdge> = out
                .edges
                .iter()
                .enumerate()
                .filter(|(i, _)| !dropped.contains(i))
                .map(|(_, e)| *e)
                .collect();
            out.edges = kept;
            let min = out
                .edges
                .iter()
                .map(|e| channel.edge_clearance(&out, e))
                .fold(f64::INFINITY, f64::min);
            Ok((
                out,
                ClearanceReport {
                    kind: ChannelKind::Fiber,
                    removed,
                    thinned,
                    min_clearance: min,
                },
            ))
        }
    }
}

fn connected_without(lattice: &BeamLattice, dropped: &HashSet<usize>) -> bool {
    let mut uf = UnionFind::new(lattice.nodes.len());
    for (i, e) in lattice.edges.iter().enumerate() {
        if !dropped.contains(&i) {
            uf.union(e.a, e.b);
        }
    }
    uf.component_sizes().len() <= 1
}

#[derive(Debug, Clone)]
pub struct SegmentationReport {
    /// Spanwise cut positions, mm.
    pub cut_y: Vec<f64>,
    pub edges_per_segment: Vec<usize>,
    /// Nodes lying on a cut sheet, shared between neighbouring segments.
    pub interface_nodes: usize,
    /// Edges whose endpoints straddle a cut sheet (should be none for BCC).
    pub crossing_edges: usize,
}

/// Assign build-segment ids by splitting the span at `parts - 1` cut sheets
/// snapped to spanwise node sheets.
pub fn segment_lattice(
    lattice: &mut BeamLattice,
    parts: usize,
    sheet_y: &[f64],
) -> Result<SegmentationReport, LatticeError> {
    assert!(parts >= 1 && parts <= 255);
    let sheets = sheet_y.len().saturating_sub(1);
    if sheets < parts {
        return Err(LatticeError::TooFewSheets { parts, sheets });
    }
    let n_v = sheets;
    let cut_y: Vec<f64> = (1..parts)
        .map(|c| {
            let j = ((c * n_v) as f64 / parts as f64).round() as usize;
            sheet_y[j.clamp(1, n_v - 1)]
        })
        .collect();

    let mut per_segment = vec![0usize; parts];
    let mut crossing = 0usize;
    for e in &mut lattice.edges {
        let ya = lattice.nodes[e.a].position.y;
        let yb = lattice.nodes[e.b].position.y;
        let mid = 0.5 * (ya + yb);
        let seg = cut_y.iter().filter(|&&c| c < mid).count();
        e.segment = Some(seg as u8);
        per_segment[seg] += 1;
        for &c in &cut_y {
            let (lo, hi) = (ya.min(yb), ya.max(yb));
            if lo < c - WELD_TOL && hi > c + WELD_TOL {
                crossing += 1;
            }
        }
    }
    let interface_nodes = lattice
        .nodes
        .iter()
        .filter(|n| cut_y.iter().any(|&c| (n.position.y - c).abs() < WELD_TOL))
        .count();

    Ok(SegmentationReport {
        cut_y,
        edges_per_segment: per_segment,
        interface_nodes,
        crossing_edges: crossing,
    })
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }
    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
    fn component_sizes(&mut self) -> Vec<usize> {
        let n = self.parent.len();
        let mut counts: HashMap<usize, usize> = HashMap::new();
        for i in 0..n {
            let r = self.find(i);
            *counts.entry(r).or_insert(0) += 1;
        }
        let mut sizes: Vec<usize> = counts.into_values().collect();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        sizes
    }
}
