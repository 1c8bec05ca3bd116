//! Parametric wing volume and the structured cell map conformal to it.
//!
//! The wing is a tapered, symmetric-airfoil volume. A `CellMap` is a
//! structured hexahedral grid fitted between the upper and lower skin
//! surfaces; each cell later bounds one BCC unit cell of the lattice.

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Final coefficient of the 4-digit thickness polynomial, chosen so the
/// trailing edge closes exactly (upper and lower surfaces meet at x/c = 1).
const NACA4_TE_COEFF: f64 = 0.1036;

/// Default chordwise margin kept clear of the leading and trailing edges so
/// no cell collapses where the surfaces meet.
pub const DEFAULT_CHORD_MARGIN: f64 = 0.02;

/// Chord fraction of the actuation-rod axis. One chordwise grid line is
/// snapped here so the rod channel runs along a cell boundary.
pub const QUARTER_CHORD: f64 = 0.25;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("{name} = {value} outside valid range {range}")]
    Domain {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("cell ({i}, {j}, {k}) is degenerate (corner Jacobian {jacobian:.3e} <= 0)")]
    DegenerateCell {
        i: usize,
        j: usize,
        k: usize,
        jacobian: f64,
    },
    #[error("invalid planform: {0}")]
    InvalidPlanform(String),
    #[error("invalid warp profile: {0}")]
    InvalidWarp(String),
    #[error("grid dims must be >= 1, got ({0}, {1}, {2})")]
    InvalidDims(usize, usize, usize),
}

/// Tapered wing volume: symmetric 4-digit airfoil sections, straight
/// quarter-chord line, linear taper root to tip. Lengths in mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WingPlanform {
    /// Maximum section thickness as a fraction of chord (0.20 for NACA 0020).
    pub airfoil_thickness_ratio: f64,
    /// Span, mm.
    pub span: f64,
    /// Root chord, mm.
    pub root_chord: f64,
    /// Tip chord / root chord.
    pub taper_ratio: f64,
    /// Quarter-chord sweep, degrees (shears the sections chordwise).
    pub sweep_deg: f64,
}

impl WingPlanform {
    pub fn new(
        airfoil_thickness_ratio: f64,
        span: f64,
        root_chord: f64,
        taper_ratio: f64,
        sweep_deg: f64,
    ) -> Result<Self, GeometryError> {
        let p = Self {
            airfoil_thickness_ratio,
            span,
            root_chord,
            taper_ratio,
            sweep_deg,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.span > 0.0) {
            return Err(GeometryError::InvalidPlanform(format!(
                "span must be > 0, got {}",
                self.span
            )));
        }
        if !(self.root_chord > 0.0) {
            return Err(GeometryError::InvalidPlanform(format!(
                "root_chord must be > 0, got {}",
                self.root_chord
            )));
        }
        if !(self.taper_ratio > 0.0 && self.taper_ratio <= 1.0) {
            return Err(GeometryError::InvalidPlanform(format!(
                "taper_ratio must be in (0, 1], got {}",
                self.taper_ratio
            )));
        }
        if !(self.airfoil_thickness_ratio > 0.0 && self.airfoil_thickness_ratio < 0.5) {
            return Err(GeometryError::InvalidPlanform(format!(
                "airfoil_thickness_ratio must be in (0, 0.5), got {}",
                self.airfoil_thickness_ratio
            )));
        }
        Ok(())
    }

    /// Wing geometry of the reference design: NACA 0020, 250 mm span,
    /// 130 mm root chord, 60% taper, no sweep.
    pub fn reference() -> Self {
        Self {
            airfoil_thickness_ratio: 0.20,
            span: 250.0,
            root_chord: 130.0,
            taper_ratio: 0.6,
            sweep_deg: 0.0,
        }
    }

    /// Chordwise position of the quarter-chord axis at span position `y`.
    pub fn quarter_chord_x(&self, y: f64) -> f64 {
        QUARTER_CHORD * self.root_chord + self.sweep_deg.to_radians().tan() * y
    }

    /// Chordwise position of the leading edge at span position `y`.
    pub fn leading_edge_x(&self, y: f64) -> f64 {
        self.quarter_chord_x(y) - QUARTER_CHORD * self.chord_at(y)
    }

    fn chord_at(&self, y: f64) -> f64 {
        self.root_chord * (1.0 - (1.0 - self.taper_ratio) * y / self.span)
    }
}

/// Which skin surface of the symmetric section.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Upper,
    Lower,
}

/// Half-thickness of a closed-trailing-edge 4-digit section, as a fraction
/// of chord. Symmetric section; the camber line is the chord line.
pub fn naca4_half_thickness(x_frac: f64, t_ratio: f64) -> Result<f64, GeometryError> {
    if !(0.0..=1.0).contains(&x_frac) {
        return Err(GeometryError::Domain {
            name: "x_frac",
            value: x_frac,
            range: "[0, 1]",
        });
    }
    let x = x_frac;
    Ok(5.0
        * t_ratio
        * (0.2969 * x.sqrt() - 0.1260 * x - 0.3516 * x * x + 0.2843 * x * x * x
            - NACA4_TE_COEFF * x * x * x * x))
}

/// Local chord from linear taper: c(y) = c_root (1 - (1 - taper) y / span).
pub fn chord_at_span(planform: &WingPlanform, y: f64) -> Result<f64, GeometryError> {
    if !(0.0..=planform.span).contains(&y) {
        return Err(GeometryError::Domain {
            name: "y",
            value: y,
            range: "[0, span]",
        });
    }
    Ok(planform.chord_at(y))
}

/// Point on the upper or lower skin at chord fraction `u`, span fraction `s`.
pub fn surface_point(
    planform: &WingPlanform,
    u: f64,
    s: f64,
    side: Side,
) -> Result<Point3<f64>, GeometryError> {
    if !(0.0..=1.0).contains(&u) {
        return Err(GeometryError::Domain {
            name: "u",
            value: u,
            range: "[0, 1]",
        });
    }
    if !(0.0..=1.0).contains(&s) {
        return Err(GeometryError::Domain {
            name: "s",
            value: s,
            range: "[0, 1]",
        });
    }
    let y = s * planform.span;
    let chord = planform.chord_at(y);
    let x = planform.leading_edge_x(y) + u * chord;
    let half = naca4_half_thickness(u, planform.airfoil_thickness_ratio)? * chord;
    let z = match side {
        Side::Upper => half,
        Side::Lower => -half,
    };
    Ok(Point3::new(x, y, z))
}

/// Cubic-Hermite smoothstep on [0, 1]: 3s^2 - 2s^3. Zero slope at both ends.
pub fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * (3.0 - 2.0 * s)
}

/// Spanwise cell-size scaling profile. Blends `root_scale` into `tip_scale`
/// with a smoothstep so the gradient vanishes at both ends of the span.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WarpProfile {
    pub root_scale: f64,
    pub tip_scale: f64,
}

impl WarpProfile {
    pub fn new(root_scale: f64, tip_scale: f64) -> Result<Self, GeometryError> {
        if !(root_scale > 0.0 && tip_scale > 0.0) {
            return Err(GeometryError::InvalidWarp(format!(
                "scales must be > 0, got root {root_scale}, tip {tip_scale}"
            )));
        }
        Ok(Self {
            root_scale,
            tip_scale,
        })
    }

    pub fn identity() -> Self {
        Self {
            root_scale: 1.0,
            tip_scale: 1.0,
        }
    }
}

/// Relative spanwise cell size at span fraction `s`.
pub fn warp_scale(profile: &WarpProfile, s: f64) -> f64 {
    profile.root_scale + (profile.tip_scale - profile.root_scale) * smoothstep(s)
}

/// Options for [`build_cell_map`] beyond the planform and grid dims.
#[derive(Debug, Clone, Copy)]
pub struct CellMapOptions {
    /// Chordwise margin kept clear of the leading and trailing edges.
    pub chord_margin: f64,
    /// Snap the nearest chordwise grid line to the quarter chord.
    pub snap_quarter_chord: bool,
}

impl Default for CellMapOptions {
    fn default() -> Self {
        Self {
            chord_margin: DEFAULT_CHORD_MARGIN,
            snap_quarter_chord: true,
        }
    }
}

/// Structured hexahedral grid between the lower (k = 0) and upper (k = n_w)
/// skin surfaces. Vertex (i, j, k) is chordwise i, spanwise j, thickness k.
#[derive(Debug, Clone)]
pub struct CellMap {
    pub dims: (usize, usize, usize),
    vertices: Vec<Point3<f64>>,
    /// Chord fractions of the chordwise grid lines (n_u + 1 values).
    pub u_params: Vec<f64>,
    /// Span fractions of the spanwise sheets (n_v + 1 values).
    pub s_params: Vec<f64>,
    pub planform: WingPlanform,
    pub warp: WarpProfile,
}

impl CellMap {
    pub fn n_u(&self) -> usize {
        self.dims.0
    }
    pub fn n_v(&self) -> usize {
        self.dims.1
    }
    pub fn n_w(&self) -> usize {
        self.dims.2
    }

    pub fn vertex_index(&self, i: usize, j: usize, k: usize) -> usize {
        let (nu, nv, _) = self.dims;
        debug_assert!(i <= nu && j <= self.dims.1 && k <= self.dims.2);
        (k * (nv + 1) + j) * (nu + 1) + i
    }

    pub fn vertex(&self, i: usize, j: usize, k: usize) -> Point3<f64> {
        self.vertices[self.vertex_index(i, j, k)]
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    /// Spanwise vertex positions (mm) of the sheets.
    pub fn span_stations(&self) -> Vec<f64> {
        self.s_params.iter().map(|s| s * self.planform.span).collect()
    }

    /// The 8 corner positions of cell (i, j, k), in the usual hexahedral
    /// order: k-low face counter-clockwise, then k-high face.
    pub fn cell_corners(&self, i: usize, j: usize, k: usize) -> [Point3<f64>; 8] {
        [
            self.vertex(i, j, k),
            self.vertex(i + 1, j, k),
            self.vertex(i + 1, j + 1, k),
            self.vertex(i, j + 1, k),
            self.vertex(i, j, k + 1),
            self.vertex(i + 1, j, k + 1),
            self.vertex(i + 1, j + 1, k + 1),
            self.vertex(i, j + 1, k + 1),
        ]
    }

    /// Index of the chordwise grid line lying on the quarter chord, if any.
    pub fn quarter_chord_line(&self) -> Option<usize> {
        self.u_params
            .iter()
            .position(|&u| (u - QUARTER_CHORD).abs() < 1e-12)
    }
}

/// Build the conformal cell map. Spanwise sheet spacing is proportional to
/// the warp profile and renormalized so the sheets span exactly `[0, span]`.
pub fn build_cell_map(
    planform: &WingPlanform,
    n_u: usize,
    n_v: usize,
    n_w: usize,
    profile: &WarpProfile,
) -> Result<CellMap, GeometryError> {
    build_cell_map_with_opts(planform, n_u, n_v, n_w, profile, CellMapOptions::default())
}

pub fn build_cell_map_with_opts(
    planform: &WingPlanform,
    n_u: usize,
    n_v: usize,
    n_w: usize,
    profile: &WarpProfile,
    opts: CellMapOptions,
) -> Result<CellMap, GeometryError> {
    planform.validate()?;
    if n_u < 1 || n_v < 1 || n_w < 1 {
        return Err(GeometryError::InvalidDims(n_u, n_v, n_w));
    }
    if !(0.0..0.5).contains(&opts.chord_margin) {
        return Err(GeometryError::Domain {
            name: "chord_margin",
            value: opts.chord_margin,
            range: "[0, 0.5)",
        });
    }

    let u_params = chordwise_params(n_u, opts);
    let s_params = spanwise_params(n_v, profile);

    let mut vertices = Vec::with_capacity((n_u + 1) * (n_v + 1) * (n_w + 1));
    for k in 0..=n_w {
        let f = k as f64 / n_w as f64;
        for &s in &s_params {
            for &u in &u_params {
                let lower = surface_point(planform, u, s, Side::Lower)?;
                let upper = surface_point(planform, u, s, Side::Upper)?;
                vertices.push(lower + (upper - lower) * f);
            }
        }
    }

    let map = CellMap {
        dims: (n_u, n_v, n_w),
        vertices,
        u_params,
        s_params,
        planform: *planform,
        warp: *profile,
    };
    check_jacobians(&map)?;
    Ok(map)
}

/// Cosine-clustered chord fractions over [margin, 1 - margin], densest at
/// the leading edge, with the nearest line snapped onto the quarter chord.
fn chordwise_params(n_u: usize, opts: CellMapOptions) -> Vec<f64> {
    let m = opts.chord_margin;
    let mut u: Vec<f64> = (0..=n_u)
        .map(|i| {
            let t = i as f64 / n_u as f64;
            m + (1.0 - 2.0 * m) * (1.0 - (std::f64::consts::FRAC_PI_2 * t).cos())
        })
        .collect();
    if opts.snap_quarter_chord {
        let nearest = u
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                (*a - QUARTER_CHORD)
                    .abs()
                    .total_cmp(&(*b - QUARTER_CHORD).abs())
            })
            .map(|(i, _)| i)
            .unwrap();
        u[nearest] = QUARTER_CHORD;
        // Snapping must not break monotonicity; nudge neighbours if it did.
        for i in 1..u.len() {
            if u[i] <= u[i - 1] {
                u[i] = u[i - 1] + 1e-6;
            }
        }
    }
    u
}

/// Span fractions with sheet gaps proportional to the warp scale at the gap
/// midpoint, renormalized to end exactly at 1.
fn spanwise_params(n_v: usize, profile: &WarpProfile) -> Vec<f64> {
    let gaps: Vec<f64> = (0..n_v)
        .map(|j| warp_scale(profile, (j as f64 + 0.5) / n_v as f64))
        .collect();
    let total: f64 = gaps.iter().sum();
    let mut s = Vec::with_capacity(n_v + 1);
    let mut acc = 0.0;
    s.push(0.0);
    for g in &gaps[..n_v - 1] {
        acc += g;
        s.push(acc / total);
    }
    s.push(1.0);
    s
}

fn check_jacobians(map: &CellMap) -> Result<(), GeometryError> {
    let (nu, nv, nw) = map.dims;
    for k in 0..nw {
        for j in 0..nv {
            for i in 0..nu {
                let c = map.cell_corners(i, j, k);
                let jac = min_corner_jacobian(&c);
                if jac <= 0.0 {
                    return Err(GeometryError::DegenerateCell {
                        i,
                        j,
                        k,
                        jacobian: jac,
                    });
                }
            }
        }
    }
    Ok(())
}

/// Minimum of the 8 corner Jacobians of a hexahedron in standard ordering.
pub fn min_corner_jacobian(c: &[Point3<f64>; 8]) -> f64 {
    // Edge triples (u, v, w) at each corner, oriented consistently.
    const EDGES: [(usize, usize, usize, usize); 8] = [
        (0, 1, 3, 4),
        (1, 2, 0, 5),
        (2, 3, 1, 6),
        (3, 0, 2, 7),
        (4, 7, 5, 0),
        (5, 4, 6, 1),
        (6, 5, 7, 2),
        (7, 6, 4, 3),
    ];
    let mut min = f64::INFINITY;
    for &(p, a, b, t) in &EDGES {
        let (ea, eb, et): (Vector3<f64>, Vector3<f64>, Vector3<f64>) =
            (c[a] - c[p], c[b] - c[p], c[t] - c[p]);
        // Corners 4..8 see the w edge pointing back down; flip to keep a
        // right-handed triple.
        let det = if p < 4 {
            ea.cross(&eb).dot(&et)
        } else {
            eb.cross(&ea).dot(&(-et))
        };
        min = min.min(det);
    }
    min
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reference() -> WingPlanform {
        WingPlanform::reference()
    }

    #[test]
    fn half_thickness_endpoints_closed() {
        assert_eq!(naca4_half_thickness(0.0, 0.20).unwrap(), 0.0);
        assert!(naca4_half_thickness(1.0, 0.20).unwrap().abs() < 1e-12);
    }

    #[test]
    fn half_thickness_max_for_naca0020() {
        let v = naca4_half_thickness(0.3, 0.20).unwrap();
        assert!((v - 0.1000).abs() < 1e-4, "got {v}");
    }

    #[test]
    fn half_thickness_domain_error() {
        assert!(naca4_half_thickness(-0.1, 0.2).is_err());
        assert!(naca4_half_thickness(1.1, 0.2).is_err());
    }

    #[test]
    fn chord_taper() {
        let p = reference();
        assert_relative_eq!(chord_at_span(&p, 0.0).unwrap(), 130.0);
        assert_relative_eq!(chord_at_span(&p, 250.0).unwrap(), 78.0);
        assert_relative_eq!(chord_at_span(&p, 125.0).unwrap(), 104.0);
        assert!(chord_at_span(&p, -1.0).is_err());
        assert!(chord_at_span(&p, 251.0).is_err());
    }

    #[test]
    fn surface_points_meet_at_leading_edge() {
        let p = reference();
        let up = surface_point(&p, 0.0, 0.0, Side::Upper).unwrap();
        let lo = surface_point(&p, 0.0, 0.0, Side::Lower).unwrap();
        assert_relative_eq!(up.z, 0.0);
        assert_relative_eq!((up - lo).norm(), 0.0);
    }

    #[test]
    fn surface_point_thickness_scales_with_chord() {
        let p = reference();
        let root = surface_point(&p, 0.3, 0.0, Side::Upper).unwrap();
        let tip = surface_point(&p, 0.3, 1.0, Side::Upper).unwrap();
        assert!((root.z - 13.0).abs() < 0.02, "root z = {}", root.z);
        assert!((tip.z - 7.8).abs() < 0.02, "tip z = {}", tip.z);
    }

    #[test]
    fn warp_scale_endpoints_and_midpoint() {
        let w = WarpProfile::new(1.5, 0.5).unwrap();
        assert_relative_eq!(warp_scale(&w, 0.0), 1.5);
        assert_relative_eq!(warp_scale(&w, 1.0), 0.5);
        assert_relative_eq!(warp_scale(&w, 0.5), 1.0);
    }

    #[test]
    fn warp_profile_tangent_continuity() {
        let w = WarpProfile::new(1.4, 0.7).unwrap();
        let h = 1e-6;
        let d0 = (warp_scale(&w, h) - warp_scale(&w, 0.0)) / h;
        let d1 = (warp_scale(&w, 1.0) - warp_scale(&w, 1.0 - h)) / h;
        assert!(d0.abs() < 1e-4);
        assert!(d1.abs() < 1e-4);
    }

    #[test]
    fn single_cell_map() {
        let p = reference();
        let map = build_cell_map(&p, 1, 1, 1, &WarpProfile::identity()).unwrap();
        assert_eq!(map.vertices().len(), 8);
    }

    #[test]
    fn uniform_spanwise_spacing() {
        let p = reference();
        let map = build_cell_map(&p, 4, 10, 2, &WarpProfile::identity()).unwrap();
        let y = map.span_stations();
        for j in 0..10 {
            assert_relative_eq!(y[j + 1] - y[j], 25.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn warped_spacing_monotone_and_renormalized() {
        let p = reference();
        let w = WarpProfile::new(1.5, 0.5).unwrap();
        let map = build_cell_map(&p, 4, 10, 2, &w).unwrap();
        let y = map.span_stations();
        assert!(y[1] - y[0] > y[10] - y[9]);
        assert_relative_eq!(y[10], 250.0, epsilon = 1e-9);
        for j in 0..9 {
            let a = y[j + 1] - y[j];
            let b = y[j + 2] - y[j + 1];
            assert!(a >= b - 1e-12, "gap sequence not non-increasing at {j}");
        }
    }

    #[test]
    fn conformality_to_surfaces() {
        let p = reference();
        let map = build_cell_map(&p, 6, 12, 3, &WarpProfile::new(1.4, 0.7).unwrap()).unwrap();
        for j in 0..=12 {
            for (i, &u) in map.u_params.iter().enumerate() {
                let s = map.s_params[j];
                let lo = surface_point(&p, u, s, Side::Lower).unwrap();
                let up = surface_point(&p, u, s, Side::Upper).unwrap();
                assert!((map.vertex(i, j, 0) - lo).norm() < 1e-6);
                assert!((map.vertex(i, j, 3) - up).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn mirror_symmetry_about_chord_plane() {
        let p = reference();
        let map = build_cell_map(&p, 6, 12, 3, &WarpProfile::identity()).unwrap();
        let (nu, nv, nw) = map.dims;
        for k in 0..=nw {
            for j in 0..=nv {
                for i in 0..=nu {
                    let a = map.vertex(i, j, k);
                    let b = map.vertex(i, j, nw - k);
                    assert!((a.z + b.z).abs() < 1e-9);
                    assert!((a.x - b.x).abs() < 1e-9);
                    assert!((a.y - b.y).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn quarter_chord_line_snapped() {
        let p = reference();
        let map = build_cell_map(&p, 6, 12, 3, &WarpProfile::identity()).unwrap();
        assert!(map.quarter_chord_line().is_some());
        let map = build_cell_map_with_opts(
            &p,
            6,
            12,
            3,
            &WarpProfile::identity(),
            CellMapOptions {
                snap_quarter_chord: false,
                ..CellMapOptions::default()
            },
        )
        .unwrap();
        assert!(map.quarter_chord_line().is_none());
    }

    #[test]
    fn zero_margin_trailing_edge_degenerates() {
        let p = reference();
        let err = build_cell_map_with_opts(
            &p,
            4,
            4,
            2,
            &WarpProfile::identity(),
            CellMapOptions {
                chord_margin: 0.0,
                snap_quarter_chord: false,
            },
        )
        .unwrap_err();
        assert!(matches!(err, GeometryError::DegenerateCell { .. }));
    }
}
