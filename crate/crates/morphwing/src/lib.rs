//! Generative design and analysis toolkit for functionally-graded lattice
//! morphing wings: conformal BCC lattice generation inside a tapered wing
//! volume, STL export through an implicit capsule field, linear frame FEM
//! of the three morphing modes, and fiber-optic sensor simulation with
//! regression-based state estimation.

pub mod capsule;
pub mod config;
pub mod geometry;
pub mod lattice;
pub mod mesh;
pub mod pipeline;
pub mod sensing;
pub mod structural;

pub use geometry::{
    build_cell_map, chord_at_span, naca4_half_thickness, surface_point, warp_scale, CellMap,
    GeometryError, Side, WarpProfile, WingPlanform,
};
