//! Printable geometry: implicit capsule field, isosurface extraction and
//! binary STL I/O.

mod marching;
mod sdf;
mod stl;

pub use marching::polygonize;
pub use sdf::{smooth_min, CapsuleField, VoxelGrid};
pub use stl::{read_stl, write_stl, STL_HEADER_BYTES, STL_TRIANGLE_BYTES};

use nalgebra::Point3;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("no capsules to mesh")]
    EmptyField,
    #[error("bad meshing parameter: {0}")]
    BadParameter(String),
    #[error("malformed STL: {0}")]
    BadStl(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Indexed triangle mesh with shared vertices.
#[derive(Debug, Clone, Default)]
pub struct TriMesh {
    pub vertices: Vec<Point3<f64>>,
    pub triangles: Vec<[u32; 3]>,
}

/// Closed-manifold diagnosis of a [`TriMesh`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WatertightReport {
    /// Directed edges without an opposite partner.
    pub boundary_edges: usize,
    /// Undirected edges shared by a number of faces other than two.
    pub non_manifold_edges: usize,
    pub degenerate_triangles: usize,
    /// V - E + F; 2 per sphere-topology shell, 0 per torus.
    pub euler_characteristic: i64,
}

impl WatertightReport {
    pub fn is_watertight(&self) -> bool {
        self.boundary_edges == 0 && self.non_manifold_edges == 0 && self.degenerate_triangles == 0
    }
}

impl TriMesh {
    /// Edge-pairing check: every directed edge must be matched by exactly
    /// one reverse edge, i.e. the mesh is a closed, consistently oriented
    /// 2-manifold. Sort-based to stay cheap at tens of millions of edges.
    pub fn watertight_check(&self) -> WatertightReport {
        let mut degenerate = 0usize;
        let mut directed: Vec<u64> = Vec::with_capacity(3 * self.triangles.len());
        for t in &self.triangles {
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                degenerate += 1;
                continue;
            }
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                directed.push(((a as u64) << 32) | b as u64);
            }
        }
        directed.sort_unstable();
        // A directed edge repeated means two faces traverse it the same
        // way: non-manifold or inconsistently oriented.
        let mut boundary = 0usize;
        let mut non_manifold = 0usize;
        let mut undirected_count = 0u64;
        let mut i = 0;
        while i < directed.len() {
            let e = directed[i];
            let mut run = 1;
            while i + run < directed.len() && directed[i + run] == e {
                run += 1;
            }
            let rev = (e >> 32) | ((e & 0xffff_ffff) << 32);
            let rev_count = count_of(&directed, rev);
            if run > 1 || rev_count > 1 {
                non_manifold += 1;
            } else if rev_count == 0 {
                boundary += 1;
            }
            if e < rev {
                undirected_count += 1;
            } else if rev_count == 0 {
                undirected_count += 1;
            }
            i += run;
        }
        let v = self.vertices.len() as i64;
        let f = (self.triangles.len() - degenerate) as i64;
        WatertightReport {
            boundary_edges: boundary,
            non_manifold_edges: non_manifold,
            degenerate_triangles: degenerate,
            euler_characteristic: v - undirected_count as i64 + f,
        }
    }

    /// Signed enclosed volume (positive for outward-oriented shells).
    pub fn signed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let a = self.vertices[t[0] as usize].coords;
                let b = self.vertices[t[1] as usize].coords;
                let c = self.vertices[t[2] as usize].coords;
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    pub fn bounds(&self) -> Option<(Point3<f64>, Point3<f64>)> {
        let first = *self.vertices.first()?;
        let mut min = first;
        let mut max = first;
        for v in &self.vertices {
            for d in 0..3 {
                min[d] = min[d].min(v[d]);
                max[d] = max[d].max(v[d]);
            }
        }
        Some((min, max))
    }
}

fn count_of(sorted: &[u64], key: u64) -> usize {
    let lo = sorted.partition_point(|&x| x < key);
    let hi = sorted.partition_point(|&x| x <= key);
    hi - lo
}
