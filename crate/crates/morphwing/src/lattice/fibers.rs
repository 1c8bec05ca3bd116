//! Optical-fiber loop routing through the lattice.
//!
//! Each fiber runs root-to-tip along one clear spanwise corridor, turns
//! around through the tip anchor region next to the rod axis, and returns
//! to the root along a second corridor. Corridors follow chordwise grid
//! planes at cell-row mid-height, the positions farthest from the BCC
//! struts, so the fibers keep clearance from every beam.

use nalgebra::Point3;

use super::{BeamLattice, Channel, ChannelKind, LatticeError, NodeTags, WELD_TOL};
use crate::capsule::point_segment_distance;
use crate::geometry::{CellMap, QUARTER_CHORD};

/// Chordwise/thickness placement of one fiber loop, as fractions.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberStation {
    /// Chord fraction of the outbound corridor.
    pub u_out: f64,
    /// Thickness fraction of the outbound corridor (0 = lower skin).
    pub w_out: f64,
    /// Chord fraction of the return corridor.
    pub u_back: f64,
    /// Thickness fraction of the return corridor.
    pub w_back: f64,
}

/// A routed fiber loop with per-waypoint lattice attachments.
#[derive(Debug, Clone)]
pub struct FiberPath {
    pub id: usize,
    pub waypoints: Vec<Point3<f64>>,
    /// Per-waypoint (node id, weight) pairs; weights sum to 1 and have
    /// linear precision, so affine node motions carry over exactly.
    pub attachments: Vec<Vec<(usize, f64)>>,
    /// Fingerprint of the lattice the attachments index into.
    pub lattice_fingerprint: u64,
}

impl FiberPath {
    pub fn length(&self) -> f64 {
        self.waypoints
            .windows(2)
            .map(|w| (w[1] - w[0]).norm())
            .sum()
    }

    /// Turning angle (rad) at each interior waypoint of the rest path.
    pub fn turning_angles(&self) -> Vec<f64> {
        turning_angles(&self.waypoints)
    }

    /// Capsule channel reserved around this fiber for mesh subtraction.
    pub fn channel(&self, radius: f64) -> Channel {
        Channel::new(self.waypoints.clone(), radius, ChannelKind::Fiber)
    }
}

pub(crate) fn turning_angles(points: &[Point3<f64>]) -> Vec<f64> {
    let mut out = Vec::with_capacity(points.len().saturating_sub(2));
    for w in points.windows(3) {
        let d0 = w[1] - w[0];
        let d1 = w[2] - w[1];
        let (n0, n1) = (d0.norm(), d1.norm());
        if n0 < 1e-12 || n1 < 1e-12 {
            out.push(0.0);
            continue;
        }
        let c = (d0.dot(&d1) / (n0 * n1)).clamp(-1.0, 1.0);
        out.push(c.acos());
    }
    out
}

struct Router<'a> {
    lattice: &'a BeamLattice,
    map: &'a CellMap,
    qc_plane: Option<usize>,
}

/// One waypoint plus the cell-local coordinates it was constructed at.
struct RawPoint {
    position: Point3<f64>,
    cell: (usize, usize, usize),
    local: (f64, f64, f64),
}

impl<'a> Router<'a> {
    /// Nearest interior chordwise grid plane to chord fraction `u`. The
    /// quarter-chord (rod) plane is admissible for the upper/lower cell rows,
    /// which clear the rod channel vertically, but not for the mid row that
    /// the rod runs through.
    fn snap_plane_for_row(&self, u: f64, row: usize) -> usize {
        let nu = self.map.n_u();
        let exclude_qc = row == self.mid_row();
        let mut best = 1;
        let mut best_d = f64::INFINITY;
        for i in 1..nu {
            if exclude_qc && Some(i) == self.qc_plane {
                continue;
            }
            let d = (self.map.u_params[i] - u).abs();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    fn snap_row(&self, w: f64) -> usize {
        let nw = self.map.n_w();
        (((w * nw as f64).floor() as isize).clamp(0, nw as isize - 1)) as usize
    }

    fn mid_row(&self) -> usize {
        self.map.n_w() / 2
    }

    /// Anchor cell column: the column just inboard of the rod plane.
    fn anchor_column(&self, near: usize) -> usize {
        let qc = self
            .qc_plane
            .unwrap_or_else(|| self.snap_plane_for_row(QUARTER_CHORD, self.mid_row()));
        let col = if near <= qc { qc.saturating_sub(1) } else { qc };
        col.min(self.map.n_u() - 1)
    }

    /// Corridor point: on chordwise plane `i`, spanwise sheet `j`, at the
    /// mid-height of cell row `r`.
    fn plane_point(&self, i: usize, j: usize, r: usize) -> RawPoint {
        let p = nalgebra::center(&self.map.vertex(i, j, r), &self.map.vertex(i, j, r + 1));
        let (ci, xi) = if i == 0 { (0, 0.0) } else { (i - 1, 1.0) };
        let (cj, eta) = if j == 0 { (0, 0.0) } else { (j - 1, 1.0) };
        RawPoint {
            position: p,
            cell: (ci, cj, r),
            local: (xi, eta, 0.5),
        }
    }

    /// Center of cell column `col` at the tip sheet, row `r` mid-height.
    fn tip_cell_mid(&self, col: usize, r: usize) -> RawPoint {
        let j = self.map.n_v();
        let p0 = self.map.vertex(col, j, r);
        let p1 = self.map.vertex(col + 1, j, r);
        let p2 = self.map.vertex(col, j, r + 1);
        let p3 = self.map.vertex(col + 1, j, r + 1);
        let position = Point3::from((p0.coords + p1.coords + p2.coords + p3.coords) / 4.0);
        RawPoint {
            position,
            cell: (col, j - 1, r),
            local: (0.5, 1.0, 0.5),
        }
    }

    /// Chordwise transit at the tip sheet between a grid plane and a cell
    /// mid, adding a waypoint at every plane crossed (except the rod plane).
    fn tip_chordwise(&self, points: &mut Vec<RawPoint>, from_plane: usize, to_col: usize, r: usize) {
        if from_plane <= to_col {
            for i in (from_plane + 1)..=to_col {
                if Some(i) != self.qc_plane {
                    points.push(self.plane_point(i, self.map.n_v(), r));
                }
            }
        } else {
            for i in ((to_col + 1)..from_plane).rev() {
                if Some(i) != self.qc_plane {
                    points.push(self.plane_point(i, self.map.n_v(), r));
                }
            }
        }
        points.push(self.tip_cell_mid(to_col, r));
    }

    /// Vertical transit at a tip cell mid between rows.
    fn tip_vertical(&self, points: &mut Vec<RawPoint>, col: usize, from_r: usize, to_r: usize) {
        if from_r == to_r {
            return;
        }
        let step: isize = if to_r > from_r { 1 } else { -1 };
        let mut r = from_r as isize;
        loop {
            r += step;
            points.push(self.tip_cell_mid(col, r as usize));
            if r == to_r as isize {
                break;
            }
        }
    }

    fn route_one(&self, id: usize, st: &FiberStation) -> Vec<RawPoint> {
        let n_v = self.map.n_v();
        let i_out = self.snap_plane_for_row(st.u_out, self.snap_row(st.w_out));
        let mut i_back = self.snap_plane_for_row(st.u_back, self.snap_row(st.w_back));
        if i_back == i_out && self.snap_row(st.w_back) == self.snap_row(st.w_out) {
            // Out and return corridors collapsed onto each other; shift the
            // return corridor one plane over.
            let nu = self.map.n_u();
            i_back = if i_back + 1 < nu && Some(i_back + 1) != self.qc_plane {
                i_back + 1
            } else if i_back > 1 && Some(i_back - 1) != self.qc_plane {
                i_back - 1
            } else {
                i_back
            };
        }
        let r_out = self.snap_row(st.w_out);
        let r_back = self.snap_row(st.w_back);
        let m = self.mid_row();
        let _ = id;

        let mut pts = Vec::new();
        // Outbound leg, root to tip.
        for j in 0..=n_v {
            pts.push(self.plane_point(i_out, j, r_out));
        }
        // Turnaround at the tip face, through the anchor region by the rod.
        let c_a = self.anchor_column(i_out);
        self.tip_chordwise(&mut pts, i_out, c_a, r_out);
        self.tip_vertical(&mut pts, c_a, r_out, m);
        let c_b = self.anchor_column(i_back);
        if c_b != c_a {
            // Cross the rod plane at mid-height; the rod terminates at the
            // tip structure, the loop passes around it.
            pts.push(self.tip_cell_mid(c_b, m));
        }
        self.tip_vertical(&mut pts, c_b, m, r_back);
        // Hop onto the return plane and descend tip to root.
        for j in (0..=n_v).rev() {
            pts.push(self.plane_point(i_back, j, r_back));
        }

        // Drop consecutive duplicates.
        let mut out: Vec<RawPoint> = Vec::with_capacity(pts.len());
        for p in pts {
            if out
                .last()
                .map_or(true, |q: &RawPoint| (q.position - p.position).norm() > WELD_TOL)
            {
                out.push(p);
            }
        }
        out
    }

    fn attachments(&self, p: &RawPoint) -> Vec<(usize, f64)> {
        let (i, j, k) = p.cell;
        let (xi, eta, ze) = p.local;
        let ids = [
            self.map.vertex_index(i, j, k),
            self.map.vertex_index(i + 1, j, k),
            self.map.vertex_index(i + 1, j + 1, k),
            self.map.vertex_index(i, j + 1, k),
            self.map.vertex_index(i, j, k + 1),
            self.map.vertex_index(i + 1, j, k + 1),
            self.map.vertex_index(i + 1, j + 1, k + 1),
            self.map.vertex_index(i, j + 1, k + 1),
        ];
        let w = [
            (1.0 - xi) * (1.0 - eta) * (1.0 - ze),
            xi * (1.0 - eta) * (1.0 - ze),
            xi * eta * (1.0 - ze),
            (1.0 - xi) * eta * (1.0 - ze),
            (1.0 - xi) * (1.0 - eta) * ze,
            xi * (1.0 - eta) * ze,
            xi * eta * ze,
            (1.0 - xi) * eta * ze,
        ];
        ids.iter()
            .zip(w.iter())
            .filter(|(_, &w)| w > 1e-12)
            .map(|(&id, &w)| (id, w))
            .collect()
    }
}

/// Route the sensor-fiber loops and validate beam clearance.
///
/// The lattice must contain the cell map's vertex block unchanged (it is
/// the internal lattice, or a merge that kept it first) and must have tip
/// anchor nodes tagged.
pub fn route_fibers(
    lattice: &BeamLattice,
    map: &CellMap,
    stations: &[FiberStation],
    min_clearance: f64,
) -> Result<Vec<FiberPath>, LatticeError> {
    if !lattice
        .nodes
        .iter()
        .any(|n| n.tags.contains(NodeTags::TIP_ANCHOR))
    {
        return Err(LatticeError::NoTipAnchors);
    }
    // The attachment node ids index the map vertex block; verify it.
    let (nu, nv, nw) = map.dims;
    let n_verts = (nu + 1) * (nv + 1) * (nw + 1);
    if lattice.nodes.len() < n_verts {
        return Err(LatticeError::ProvenanceMismatch);
    }
    for (idx, &p) in map.vertices().iter().enumerate().step_by(7) {
        if (lattice.nodes[idx].position - p).norm() > WELD_TOL {
            return Err(LatticeError::ProvenanceMismatch);
        }
    }

    let router = Router {
        lattice,
        map,
        qc_plane: map.quarter_chord_line(),
    };

    let mut paths = Vec::with_capacity(stations.len());
    for (id, st) in stations.iter().enumerate() {
        let raw = router.route_one(id, st);
        let waypoints: Vec<Point3<f64>> = raw.iter().map(|p| p.position).collect();

        for (wi, p) in waypoints.iter().enumerate() {
            let clearance = router
                .lattice
                .edges
                .iter()
                .map(|e| {
                    point_segment_distance(
                        p,
                        &lattice.nodes[e.a].position,
                        &lattice.nodes[e.b].position,
                    ) - e.radius
                })
                .fold(f64::INFINITY, f64::min);
            if clearance < min_clearance {
                return Err(LatticeError::RoutingClearance {
                    fiber: id,
                    waypoint: wi,
                    clearance,
                    min: min_clearance,
                });
            }
        }

        let attachments = raw.iter().map(|p| router.attachments(p)).collect();
        paths.push(FiberPath {
            id,
            waypoints,
            attachments,
            lattice_fingerprint: lattice.fingerprint(),
        });
    }
    Ok(paths)
}

/// Reference six-fiber layout: three upper-biased, three lower-biased
/// loops at spread chordwise stations.
pub fn default_stations() -> Vec<FiberStation> {
    vec![
        FiberStation { u_out: 0.10, w_out: 0.83, u_back: 0.45, w_back: 0.83 },
        FiberStation { u_out: 0.60, w_out: 0.83, u_back: 0.88, w_back: 0.83 },
        // Hugging the quarter-chord twist axis: near-zero moment arm under
        // twist, full exposure to camber. The physical wing's camber
        // specialist sits by the spar the same way.
        FiberStation { u_out: 0.24, w_out: 0.83, u_back: 0.24, w_back: 0.17 },
        FiberStation { u_out: 0.10, w_out: 0.17, u_back: 0.45, w_back: 0.17 },
        FiberStation { u_out: 0.60, w_out: 0.17, u_back: 0.88, w_back: 0.17 },
        FiberStation { u_out: 0.45, w_out: 0.50, u_back: 0.70, w_back: 0.50 },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_cell_map, WarpProfile, WingPlanform};
    use crate::lattice::{generate_bcc, tag_anchors, GradingField};

    fn fixture() -> (BeamLattice, CellMap) {
        let p = WingPlanform::reference();
        let map = build_cell_map(&p, 6, 12, 3, &WarpProfile::new(1.4, 0.7).unwrap()).unwrap();
        let mut l = generate_bcc(&map, &GradingField::new(1.2, 0.6, 0.6).unwrap()).unwrap();
        let qc_x = p.quarter_chord_x(0.0);
        tag_anchors(
            &mut l,
            &Point3::new(qc_x, -5.0, 0.0),
            &Point3::new(qc_x, 255.0, 0.0),
            6.0,
            p.span,
        );
        (l, map)
    }

    #[test]
    fn six_default_fibers_route() {
        let (l, map) = fixture();
        let fibers = route_fibers(&l, &map, &default_stations(), 0.4).unwrap();
        assert_eq!(fibers.len(), 6);
        for f in &fibers {
            assert!(f.length() > 2.0 * 250.0, "fiber {} too short", f.id);
            // Loop: starts and ends on the root plane.
            assert!(f.waypoints.first().unwrap().y.abs() < WELD_TOL);
            assert!(f.waypoints.last().unwrap().y.abs() < WELD_TOL);
            // Reaches the tip plane.
            assert!(f
                .waypoints
                .iter()
                .any(|p| (p.y - 250.0).abs() < WELD_TOL));
        }
    }

    #[test]
    fn attachment_weights_sum_to_one() {
        let (l, map) = fixture();
        let fibers = route_fibers(&l, &map, &default_stations(), 0.4).unwrap();
        for f in &fibers {
            assert_eq!(f.waypoints.len(), f.attachments.len());
            for at in &f.attachments {
                let s: f64 = at.iter().map(|(_, w)| w).sum();
                assert!((s - 1.0).abs() < 1e-12);
                assert!(at.len() <= 9);
                for &(id, _) in at {
                    assert!(id < l.nodes.len());
                }
            }
        }
    }

    #[test]
    fn attachment_reproduces_spanwise_affine_motion() {
        let (l, map) = fixture();
        let fibers = route_fibers(&l, &map, &default_stations(), 0.4).unwrap();
        // Displace every node by an affine function of y; the interpolated
        // waypoint displacement must equal the same function at the
        // waypoint because sheets are constant-y.
        for f in &fibers {
            for (wp, at) in f.waypoints.iter().zip(&f.attachments) {
                let interp: f64 = at
                    .iter()
                    .map(|&(id, w)| w * (0.01 * l.nodes[id].position.y + 3.0))
                    .sum();
                assert!((interp - (0.01 * wp.y + 3.0)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn missing_tip_anchor_is_error() {
        let p = WingPlanform::reference();
        let map = build_cell_map(&p, 6, 12, 3, &WarpProfile::identity()).unwrap();
        let l = generate_bcc(&map, &GradingField::new(1.2, 0.6, 0.6).unwrap()).unwrap();
        assert!(matches!(
            route_fibers(&l, &map, &default_stations(), 0.4),
            Err(LatticeError::NoTipAnchors)
        ));
    }
}
