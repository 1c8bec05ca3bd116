//! Linear frame FEM of the beam lattice: Euler–Bernoulli elements on every
//! strut, root clamp, morphing load cases and the twist/camber/extension
//! compliance of the wing.

mod element;
mod solver;

pub use element::{global_stiffness, Section};
pub use solver::DenseMatrix;

use nalgebra::{Matrix3, SVector, Vector3};
use thiserror::Error;

use crate::geometry::CellMap;
use crate::lattice::{BeamLattice, NodeTags};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub type NodeState = SVector<f64, 6>;

#[derive(Debug, Error)]
pub enum StructuralError {
    #[error("stiffness matrix not positive definite at pivot {pivot} (value {value:.3e}); lattice under-constrained or disconnected")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("inertia factorization broke down at pivot {pivot}")]
    IndefiniteBreakdown { pivot: usize },
    #[error("no clamped nodes on the root plane")]
    NoConstraints,
    #[error("load case selects no nodes")]
    NoLoadedNodes,
    #[error("lattice has no nodes or edges")]
    EmptyLattice,
    #[error("deformation state belongs to a different lattice")]
    FingerprintMismatch,
    #[error("compliance matrix is singular; morph modes are not independent")]
    SingularCompliance,
    #[error("invalid material: {0}")]
    InvalidMaterial(String),
}

/// Isotropic elastomer. Stress unit MPa (N/mm^2), consistent with mm/N.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
}

impl Material {
    /// TPU-like elastomer used for the printed lattice.
    pub fn reference() -> Self {
        Self {
            youngs_modulus: 8.0,
            poisson_ratio: 0.45,
        }
    }

    pub fn shear_modulus(&self) -> f64 {
        self.youngs_modulus / (2.0 * (1.0 + self.poisson_ratio))
    }

    pub fn validate(&self) -> Result<(), StructuralError> {
        if !(self.youngs_modulus > 0.0) {
            return Err(StructuralError::InvalidMaterial(format!(
                "youngs_modulus must be > 0, got {}",
                self.youngs_modulus
            )));
        }
        if !(self.poisson_ratio > -1.0 && self.poisson_ratio < 0.5) {
            return Err(StructuralError::InvalidMaterial(format!(
                "poisson_ratio must be in (-1, 0.5), got {}",
                self.poisson_ratio
            )));
        }
        Ok(())
    }
}

/// Nodal forces/moments, sparse over nodes. Component order per node:
/// (fx, fy, fz, mx, my, mz) in N and N·mm.
#[derive(Debug, Clone, Default)]
pub struct LoadCase {
    pub loads: Vec<(usize, NodeState)>,
}

impl LoadCase {
    /// Spanwise torque (N·mm) split evenly over the tip anchor nodes; the
    /// actuation rod twisting the wingtip about the quarter-chord axis.
    pub fn twist(lattice: &BeamLattice, torque: f64) -> Result<Self, StructuralError> {
        let nodes: Vec<usize> = lattice.nodes_with_tag(NodeTags::TIP_ANCHOR).collect();
        Self::moments_y(&nodes, torque)
    }

    /// Spanwise force (N) split evenly over the tip anchor nodes; the rod
    /// pushing or pulling the wingtip.
    pub fn extension(lattice: &BeamLattice, force: f64) -> Result<Self, StructuralError> {
        if lattice.nodes.is_empty() {
            return Err(StructuralError::EmptyLattice);
        }
        let nodes: Vec<usize> = lattice.nodes_with_tag(NodeTags::TIP_ANCHOR).collect();
        if nodes.is_empty() {
            return Err(StructuralError::NoLoadedNodes);
        }
        let f = force / nodes.len() as f64;
        Ok(Self {
            loads: nodes
                .into_iter()
                .map(|n| (n, NodeState::new(0.0, f, 0.0, 0.0, 0.0, 0.0)))
                .collect(),
        })
    }

    /// Downward force (N, for positive `force`) split over the trailing-edge
    /// nodes of the spanwise sheet nearest `station` (span fraction),
    /// curling the section to increase camber.
    pub fn camber(map: &CellMap, force: f64, station: f64) -> Result<Self, StructuralError> {
        let nodes = trailing_edge_nodes(map, station);
        if nodes.is_empty() {
            return Err(StructuralError::NoLoadedNodes);
        }
        let f = -force / nodes.len() as f64;
        Ok(Self {
            loads: nodes
                .into_iter()
                .map(|n| (n, NodeState::new(0.0, 0.0, f, 0.0, 0.0, 0.0)))
                .collect(),
        })
    }

    fn moments_y(nodes: &[usize], total: f64) -> Result<Self, StructuralError> {
        if nodes.is_empty() {
            return Err(StructuralError::NoLoadedNodes);
        }
        let m = total / nodes.len() as f64;
        Ok(Self {
            loads: nodes
                .iter()
                .map(|&n| (n, NodeState::new(0.0, 0.0, 0.0, 0.0, m, 0.0)))
                .collect(),
        })
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            loads: self.loads.iter().map(|&(n, v)| (n, v * s)).collect(),
        }
    }

    pub fn plus(&self, other: &Self) -> Self {
        let mut loads = self.loads.clone();
        loads.extend(other.loads.iter().cloned());
        Self { loads }
    }
}

fn sheet_nearest(map: &CellMap, station: f64) -> usize {
    let stations = map.span_stations();
    let y = station * map.planform.span;
    let mut best = 0;
    for (j, &s) in stations.iter().enumerate() {
        if (s - y).abs() < (stations[best] - y).abs() {
            best = j;
        }
    }
    best
}

fn trailing_edge_nodes(map: &CellMap, station: f64) -> Vec<usize> {
    let (nu, _, nw) = map.dims;
    let j = sheet_nearest(map, station);
    (0..=nw).map(|k| map.vertex_index(nu, j, k)).collect()
}

fn leading_edge_nodes(map: &CellMap, station: f64) -> Vec<usize> {
    let (_, _, nw) = map.dims;
    let j = sheet_nearest(map, station);
    (0..=nw).map(|k| map.vertex_index(0, j, k)).collect()
}

/// Solved nodal displacements/rotations (mm, rad).
#[derive(Debug, Clone)]
pub struct DeformationState {
    pub displacements: Vec<NodeState>,
    pub lattice_fingerprint: u64,
}

impl DeformationState {
    pub fn zeros(n_nodes: usize, fingerprint: u64) -> Self {
        Self {
            displacements: vec![NodeState::zeros(); n_nodes],
            lattice_fingerprint: fingerprint,
        }
    }

    /// c0*s0 + c1*s1 + ... over states of the same lattice.
    pub fn linear_combination(
        states: &[&DeformationState],
        coeffs: &[f64],
    ) -> Result<Self, StructuralError> {
        assert_eq!(states.len(), coeffs.len());
        let first = states.first().expect("at least one state");
        let mut out = Self::zeros(first.displacements.len(), first.lattice_fingerprint);
        for (s, &c) in states.iter().zip(coeffs) {
            if s.lattice_fingerprint != first.lattice_fingerprint {
                return Err(StructuralError::FingerprintMismatch);
            }
            for (o, d) in out.displacements.iter_mut().zip(&s.displacements) {
                *o += d * c;
            }
        }
        Ok(out)
    }
}

/// Wing morph amplitudes as measured on a deformation state.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct MorphState {
    pub twist_deg: f64,
    pub camber_deg: f64,
    pub extension_mm: f64,
}

/// Aggregate morph amplitudes: mean spanwise rotation and y-displacement of
/// the tip sheet, and the chordwise rotation difference (trailing minus
/// leading edge) at the camber station.
pub fn morph_metrics(state: &DeformationState, map: &CellMap, camber_station: f64) -> MorphState {
    let (nu, nv, nw) = map.dims;
    let mut twist = 0.0;
    let mut ext = 0.0;
    let mut count = 0.0;
    for k in 0..=nw {
        for i in 0..=nu {
            let d = &state.displacements[map.vertex_index(i, nv, k)];
            twist += d[4];
            ext += d[1];
            count += 1.0;
        }
    }
    twist /= count;
    ext /= count;

    let mean_ry = |nodes: &[usize]| {
        nodes.iter().map(|&n| state.displacements[n][4]).sum::<f64>() / nodes.len() as f64
    };
    let camber = mean_ry(&trailing_edge_nodes(map, camber_station))
        - mean_ry(&leading_edge_nodes(map, camber_station));

    MorphState {
        twist_deg: twist.to_degrees(),
        camber_deg: camber.to_degrees(),
        extension_mm: ext,
    }
}

/// Assembled and factored frame model with the root sheet clamped.
pub struct FrameSolver {
    n_nodes: usize,
    maps: Vec<NodeMap>,
    n_free: usize,
    factor: DenseMatrix,
    pub lattice_fingerprint: u64,
}

/// Reduced-space mapping of one node's six DOFs.
#[derive(Clone, Copy)]
enum NodeMap {
    Clamped,
    /// Independent node: six consecutive reduced DOFs starting at `base`.
    Free(usize),
}

/// Expansion of one global DOF (component `c` of a node) into reduced DOFs.
fn dof_terms(map: NodeMap, c: usize) -> ([(usize, f64); 1], usize) {
    match map {
        NodeMap::Clamped => ([(0, 0.0)], 0),
        NodeMap::Free(base) => ([(base + c, 1.0)], 1),
    }
}

fn node_maps(lattice: &BeamLattice) -> Result<(Vec<NodeMap>, usize), StructuralError> {
    let mut maps = vec![NodeMap::Clamped; lattice.nodes.len()];
    let mut next = 0;
    let mut clamped_any = false;
    for (i, n) in lattice.nodes.iter().enumerate() {
        if n.position.y.abs() < 1e-9 {
            clamped_any = true;
            continue;
        }
        maps[i] = NodeMap::Free(next);
        next += 6;
    }
    if !clamped_any {
        return Err(StructuralError::NoConstraints);
    }
    Ok((maps, next))
}

fn element_matrices(
    lattice: &BeamLattice,
    material: &Material,
    parallel: bool,
) -> Vec<element::ElementMatrix> {
    let e = material.youngs_modulus;
    let g = material.shear_modulus();
    let compute = |edge: &crate::lattice::LatticeEdge| {
        global_stiffness(
            &lattice.nodes[edge.a].position,
            &lattice.nodes[edge.b].position,
            e,
            g,
            &Section::circular(edge.radius),
        )
    };
    #[cfg(feature = "parallel")]
    if parallel {
        return lattice.edges.par_iter().map(compute).collect();
    }
    let _ = parallel;
    lattice.edges.iter().map(compute).collect()
}

/// Full (unreduced, unconstrained) stiffness assembly.
fn assemble_full(lattice: &BeamLattice, material: &Material, parallel: bool) -> DenseMatrix {
    let mats = element_matrices(lattice, material, parallel);
    let mut k = DenseMatrix::zeros(6 * lattice.nodes.len());
    for (edge, ke) in lattice.edges.iter().zip(&mats) {
        for p in 0..12 {
            let gp = 6 * if p < 6 { edge.a } else { edge.b } + p % 6;
            for q in 0..12 {
                let gq = 6 * if q < 6 { edge.a } else { edge.b } + q % 6;
                k.add(gp, gq, ke[(p, q)]);
            }
        }
    }
    k
}

/// Reduced stiffness K' = Tᵀ K T for the clamp/free/hub DOF mapping.
fn assemble_reduced(
    lattice: &BeamLattice,
    material: &Material,
    maps: &[NodeMap],
    n: usize,
    parallel: bool,
) -> DenseMatrix {
    let mats = element_matrices(lattice, material, parallel);
    let mut k = DenseMatrix::zeros(n);
    for (edge, ke) in lattice.edges.iter().zip(&mats) {
        for p in 0..12 {
            let node_p = if p < 6 { edge.a } else { edge.b };
            let (tp, np) = dof_terms(maps[node_p], p % 6);
            if np == 0 {
                continue;
            }
            for q in 0..12 {
                let node_q = if q < 6 { edge.a } else { edge.b };
                let (tq, nq) = dof_terms(maps[node_q], q % 6);
                let v = ke[(p, q)];
                for &(ri, wi) in &tp[..np] {
                    for &(rj, wj) in &tq[..nq] {
                        k.add(ri, rj, v * wi * wj);
                    }
                }
            }
        }
    }
    k
}

impl FrameSolver {
    /// Assemble the root-clamped model and factor it.
    pub fn new(lattice: &BeamLattice, material: &Material) -> Result<Self, StructuralError> {
        Self::build(lattice, material, cfg!(feature = "parallel"))
    }

    /// Sequential assembly/factorization, kept for benchmarking.
    pub fn new_seq(lattice: &BeamLattice, material: &Material) -> Result<Self, StructuralError> {
        Self::build(lattice, material, false)
    }

    fn build(
        lattice: &BeamLattice,
        material: &Material,
        parallel: bool,
    ) -> Result<Self, StructuralError> {
        material.validate()?;
        if lattice.nodes.is_empty() || lattice.edges.is_empty() {
            return Err(StructuralError::EmptyLattice);
        }
        let (maps, n_free) = node_maps(lattice)?;
        let mut factor = assemble_reduced(lattice, material, &maps, n_free, parallel);
        if parallel {
            factor.cholesky_in_place()?;
        } else {
            factor.cholesky_in_place_seq()?;
        }
        Ok(Self {
            n_nodes: lattice.nodes.len(),
            maps,
            n_free,
            factor,
            lattice_fingerprint: lattice.fingerprint(),
        })
    }

    pub fn solve(&self, case: &LoadCase) -> Result<DeformationState, StructuralError> {
        let mut rhs = vec![0.0; self.n_free];
        let mut any = false;
        for (node, f) in &case.loads {
            for c in 0..6 {
                let (terms, n) = dof_terms(self.maps[*node], c);
                for &(r, w) in &terms[..n] {
                    rhs[r] += w * f[c];
                    any = true;
                }
            }
        }
        if !any {
            return Err(StructuralError::NoLoadedNodes);
        }
        self.factor.cholesky_solve(&mut rhs);
        let mut state = DeformationState::zeros(self.n_nodes, self.lattice_fingerprint);
        for i in 0..self.n_nodes {
            for c in 0..6 {
                let (terms, n) = dof_terms(self.maps[i], c);
                state.displacements[i][c] = terms[..n].iter().map(|&(r, w)| w * rhs[r]).sum();
            }
        }
        Ok(state)
    }
}

/// One-shot root-clamped solve.
pub fn assemble_and_solve(
    lattice: &BeamLattice,
    material: &Material,
    case: &LoadCase,
) -> Result<DeformationState, StructuralError> {
    FrameSolver::new(lattice, material)?.solve(case)
}

/// Largest force/moment imbalance |K·u - f| over the free DOF (N, N·mm),
/// recomputed edge by edge from the solved state. A correct solve leaves
/// this at solver round-off.
pub fn equilibrium_residual(
    lattice: &BeamLattice,
    material: &Material,
    state: &DeformationState,
    case: &LoadCase,
) -> Result<f64, StructuralError> {
    material.validate()?;
    if state.lattice_fingerprint != lattice.fingerprint() {
        return Err(StructuralError::FingerprintMismatch);
    }
    let mats = element_matrices(lattice, material, false);
    let mut internal = vec![0.0f64; 6 * lattice.nodes.len()];
    for (edge, ke) in lattice.edges.iter().zip(&mats) {
        let mut u = [0.0f64; 12];
        for c in 0..6 {
            u[c] = state.displacements[edge.a][c];
            u[6 + c] = state.displacements[edge.b][c];
        }
        for p in 0..12 {
            let node_p = if p < 6 { edge.a } else { edge.b };
            let f: f64 = (0..12).map(|q| ke[(p, q)] * u[q]).sum();
            internal[6 * node_p + p % 6] += f;
        }
    }
    let mut applied = vec![0.0f64; 6 * lattice.nodes.len()];
    for (node, f) in &case.loads {
        for c in 0..6 {
            applied[6 * node + c] += f[c];
        }
    }
    // Project onto the reduced space: hub nodes carry constraint forces
    // individually, but their resultant on the rigid hub must vanish.
    let (maps, n_free) = node_maps(lattice)?;
    let mut reduced = vec![0.0f64; n_free];
    for (i, &m) in maps.iter().enumerate() {
        for c in 0..6 {
            let g = 6 * i + c;
            let (terms, n) = dof_terms(m, c);
            for &(r, w) in &terms[..n] {
                reduced[r] += w * (internal[g] - applied[g]);
            }
        }
    }
    Ok(reduced.iter().fold(0.0f64, |acc, v| acc.max(v.abs())))
}

/// Number of near-zero stiffness eigenvalues of the unconstrained model:
/// eigenvalues below 1e-8 times the largest one, counted by the inertia of
/// the shifted matrix. A connected free-floating frame has exactly 6.
pub fn rigid_mode_count(
    lattice: &BeamLattice,
    material: &Material,
) -> Result<usize, StructuralError> {
    material.validate()?;
    if lattice.nodes.is_empty() || lattice.edges.is_empty() {
        return Err(StructuralError::EmptyLattice);
    }
    let mut k = assemble_full(lattice, material, cfg!(feature = "parallel"));
    let lambda_max = k.largest_eigenvalue(60);
    k.shift_diagonal(-1e-8 * lambda_max);
    k.ldlt_negative_pivots()
}

/// 3x3 morph compliance: column j holds the [twist, camber, extension]
/// response to unit amplitude of reference load case j.
pub struct ComplianceReport {
    pub matrix: Matrix3<f64>,
    /// States for unit twist torque (N·mm), unit camber force (N) and unit
    /// extension force (N), in that order.
    pub unit_states: [DeformationState; 3],
}

pub fn compliance_report(
    solver: &FrameSolver,
    lattice: &BeamLattice,
    map: &CellMap,
    camber_station: f64,
) -> Result<ComplianceReport, StructuralError> {
    let cases = [
        LoadCase::twist(lattice, 1.0)?,
        LoadCase::camber(map, 1.0, camber_station)?,
        LoadCase::extension(lattice, 1.0)?,
    ];
    let states = [
        solver.solve(&cases[0])?,
        solver.solve(&cases[1])?,
        solver.solve(&cases[2])?,
    ];
    let mut matrix = Matrix3::zeros();
    for (j, s) in states.iter().enumerate() {
        let m = morph_metrics(s, map, camber_station);
        matrix[(0, j)] = m.twist_deg;
        matrix[(1, j)] = m.camber_deg;
        matrix[(2, j)] = m.extension_mm;
    }
    Ok(ComplianceReport {
        matrix,
        unit_states: states,
    })
}

impl ComplianceReport {
    /// Load amplitudes (torque N·mm, camber force N, extension force N)
    /// that produce the target morph, by inverting the compliance.
    pub fn amplitudes_for(&self, target: &MorphState) -> Result<Vector3<f64>, StructuralError> {
        let inv = self
            .matrix
            .try_inverse()
            .ok_or(StructuralError::SingularCompliance)?;
        Ok(inv * Vector3::new(target.twist_deg, target.camber_deg, target.extension_mm))
    }

    /// Deformation achieving the target morph, by superposition.
    pub fn synthesize(&self, target: &MorphState) -> Result<DeformationState, StructuralError> {
        let c = self.amplitudes_for(target)?;
        DeformationState::linear_combination(
            &[
                &self.unit_states[0],
                &self.unit_states[1],
                &self.unit_states[2],
            ],
            c.as_slice(),
        )
    }
}
