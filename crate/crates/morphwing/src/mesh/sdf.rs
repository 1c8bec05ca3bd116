//! Implicit surface of the printed part: smooth-min union of one capsule
//! per beam, minus the rod and fiber channels. A uniform spatial hash
//! keeps per-point evaluation local; far-field values are clamped to a
//! narrow band, which is all the polygonizer needs.

use std::collections::HashMap;

use nalgebra::Point3;

use crate::capsule::point_segment_distance;
use crate::lattice::{BeamLattice, Channel};

use super::MeshError;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy)]
struct CapsuleSpec {
    a: Point3<f64>,
    b: Point3<f64>,
    radius: f64,
}

impl CapsuleSpec {
    #[inline]
    fn distance(&self, p: &Point3<f64>) -> f64 {
        point_segment_distance(p, &self.a, &self.b) - self.radius
    }
}

/// Polynomial smooth minimum; exact `min` at `k = 0`, and within
/// `[min - k/4, min]` otherwise.
#[inline]
pub fn smooth_min(a: f64, b: f64, k: f64) -> f64 {
    if k <= 0.0 {
        return a.min(b);
    }
    let h = (0.5 + 0.5 * (b - a) / k).clamp(0.0, 1.0);
    b + (a - b) * h - k * h * (1.0 - h)
}

/// Signed distance field of the beam solid (negative inside).
pub struct CapsuleField {
    capsules: Vec<CapsuleSpec>,
    channels: Vec<CapsuleSpec>,
    blend: f64,
    /// Positive clamp distance; values are exact below it.
    band: f64,
    bucket: f64,
    /// Bucket -> (beam capsule ids, channel segment ids).
    grid: HashMap<(i32, i32, i32), (Vec<u32>, Vec<u32>)>,
    min: Point3<f64>,
    max: Point3<f64>,
}

impl CapsuleField {
    /// `band` is the distance out to which values must be exact; anything
    /// beyond evaluates to `band`. Pass at least a few voxels plus the
    /// largest beam radius.
    pub fn new(
        lattice: &BeamLattice,
        channels: &[Channel],
        blend: f64,
        band: f64,
    ) -> Result<Self, MeshError> {
        if lattice.edges.is_empty() {
            return Err(MeshError::EmptyField);
        }
        if !(blend >= 0.0) || !(band > 0.0) {
            return Err(MeshError::BadParameter(format!(
                "blend {blend} and band {band} must be non-negative/positive"
            )));
        }
        let capsules: Vec<CapsuleSpec> = lattice
            .edges
            .iter()
            .map(|e| CapsuleSpec {
                a: lattice.nodes[e.a].position,
                b: lattice.nodes[e.b].position,
                radius: e.radius,
            })
            .collect();
        let chan_caps: Vec<CapsuleSpec> = channels
            .iter()
            .flat_map(|c| {
                c.axis.windows(2).map(|w| CapsuleSpec {
                    a: w[0],
                    b: w[1],
                    radius: c.radius,
                })
            })
            .collect();

        let max_radius = capsules
            .iter()
            .chain(&chan_caps)
            .map(|c| c.radius)
            .fold(0.0, f64::max);
        let reach = max_radius + blend + band;
        let bucket = (2.0 * reach).max(4.0);

        let mut min = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut max = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for c in &capsules {
            for p in [&c.a, &c.b] {
                for d in 0..3 {
                    min[d] = min[d].min(p[d] - c.radius);
                    max[d] = max[d].max(p[d] + c.radius);
                }
            }
        }

        let mut grid: HashMap<(i32, i32, i32), (Vec<u32>, Vec<u32>)> = HashMap::new();
        let mut insert = |spec: &CapsuleSpec, id: u32, channel: bool| {
            let r = spec.radius + blend + band;
            let lo: Vec<i32> = (0..3)
                .map(|d| ((spec.a[d].min(spec.b[d]) - r) / bucket).floor() as i32)
                .collect();
            let hi: Vec<i32> = (0..3)
                .map(|d| ((spec.a[d].max(spec.b[d]) + r) / bucket).floor() as i32)
                .collect();
            for x in lo[0]..=hi[0] {
                for y in lo[1]..=hi[1] {
                    for z in lo[2]..=hi[2] {
                        let cell = grid.entry((x, y, z)).or_default();
                        if channel {
                            cell.1.push(id);
                        } else {
                            cell.0.push(id);
                        }
                    }
                }
            }
        };
        for (i, c) in capsules.iter().enumerate() {
            insert(c, i as u32, false);
        }
        for (i, c) in chan_caps.iter().enumerate() {
            insert(c, i as u32, true);
        }

        Ok(Self {
            capsules,
            channels: chan_caps,
            blend,
            band,
            bucket,
            grid,
            min,
            max,
        })
    }

    /// Tight axis-aligned bounds of the solid.
    pub fn bounds(&self) -> (Point3<f64>, Point3<f64>) {
        (self.min, self.max)
    }

    /// Signed distance, exact within `band` of the surface, `band` beyond.
    pub fn distance(&self, p: &Point3<f64>) -> f64 {
        let key = (
            (p.x / self.bucket).floor() as i32,
            (p.y / self.bucket).floor() as i32,
            (p.z / self.bucket).floor() as i32,
        );
        let Some((beams, chans)) = self.grid.get(&key) else {
            return self.band;
        };
        let mut d = self.band;
        for &i in beams {
            d = smooth_min(d, self.capsules[i as usize].distance(p), self.blend);
        }
        if !chans.is_empty() {
            let mut dc = f64::INFINITY;
            for &i in chans {
                dc = dc.min(self.channels[i as usize].distance(p));
            }
            d = d.max(-dc);
        }
        d.min(self.band)
    }

    /// Sample onto a uniform grid covering the solid plus a margin.
    pub fn sample_grid(&self, voxel: f64) -> Result<VoxelGrid, MeshError> {
        self.sample_impl(voxel, cfg!(feature = "parallel"))
    }

    /// Sequential sampling, kept for benchmarking.
    pub fn sample_grid_seq(&self, voxel: f64) -> Result<VoxelGrid, MeshError> {
        self.sample_impl(voxel, false)
    }

    fn sample_impl(&self, voxel: f64, parallel: bool) -> Result<VoxelGrid, MeshError> {
        if !(voxel > 0.0) {
            return Err(MeshError::BadParameter(format!(
                "voxel size must be > 0, got {voxel}"
            )));
        }
        let margin = 2.0 * voxel + self.blend;
        let origin = Point3::new(
            self.min.x - margin,
            self.min.y - margin,
            self.min.z - margin,
        );
        let npts: [usize; 3] = std::array::from_fn(|d| {
            ((self.max[d] + margin - origin[d]) / voxel).ceil() as usize + 1
        });
        let n_total = npts[0] * npts[1] * npts[2];
        let mut values = vec![0.0f32; n_total];

        let slab = npts[0] * npts[1];
        let fill = |(k, chunk): (usize, &mut [f32])| {
            let z = origin.z + k as f64 * voxel;
            for j in 0..npts[1] {
                let y = origin.y + j as f64 * voxel;
                let row = &mut chunk[j * npts[0]..(j + 1) * npts[0]];
                for (i, v) in row.iter_mut().enumerate() {
                    let p = Point3::new(origin.x + i as f64 * voxel, y, z);
                    *v = self.distance(&p) as f32;
                }
            }
        };
        #[cfg(feature = "parallel")]
        if parallel {
            values.par_chunks_mut(slab).enumerate().for_each(fill);
        } else {
            values.chunks_mut(slab).enumerate().for_each(fill);
        }
        #[cfg(not(feature = "parallel"))]
        {
            let _ = parallel;
            values.chunks_mut(slab).enumerate().for_each(fill);
        }

        Ok(VoxelGrid {
            origin,
            voxel,
            npts,
            values,
        })
    }
}

/// Scalar field sampled at uniform grid points.
pub struct VoxelGrid {
    pub origin: Point3<f64>,
    pub voxel: f64,
    /// Grid points per axis.
    pub npts: [usize; 3],
    /// x-fastest, then y, then z.
    pub values: Vec<f32>,
}

impl VoxelGrid {
    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.npts[1] + j) * self.npts[0] + i
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize, k: usize) -> f32 {
        self.values[self.index(i, j, k)]
    }

    #[inline]
    pub fn point(&self, i: usize, j: usize, k: usize) -> Point3<f64> {
        Point3::new(
            self.origin.x + i as f64 * self.voxel,
            self.origin.y + j as f64 * self.voxel,
            self.origin.z + k as f64 * self.voxel,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{ChannelKind, EdgeKind, LatticeEdge, LatticeNode, NodeTags};
    use approx::assert_relative_eq;

    fn two_beam_lattice() -> BeamLattice {
        let pts = [
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(10.0, 0.0, 0.0),
            Point3::new(10.0, 10.0, 0.0),
        ];
        BeamLattice {
            nodes: pts
                .iter()
                .map(|&position| LatticeNode {
                    position,
                    tags: NodeTags::INTERNAL,
                })
                .collect(),
            edges: vec![
                LatticeEdge {
                    a: 0,
                    b: 1,
                    radius: 1.0,
                    segment: None,
                    kind: EdgeKind::Internal,
                },
                LatticeEdge {
                    a: 1,
                    b: 2,
                    radius: 1.0,
                    segment: None,
                    kind: EdgeKind::Internal,
                },
            ],
        }
    }

    #[test]
    fn zero_blend_union_is_exact_min() {
        let l = two_beam_lattice();
        let f = CapsuleField::new(&l, &[], 0.0, 5.0).unwrap();
        for p in [
            Point3::new(5.0, 2.5, 0.0),
            Point3::new(10.0, 5.0, 1.0),
            Point3::new(-1.0, -1.0, 0.5),
        ] {
            let expect = l
                .edges
                .iter()
                .map(|e| {
                    point_segment_distance(&p, &l.nodes[e.a].position, &l.nodes[e.b].position)
                        - e.radius
                })
                .fold(f64::INFINITY, f64::min);
            assert_relative_eq!(f.distance(&p), expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn smooth_min_bounds() {
        for (a, b) in [(0.3, 0.5), (-0.2, 0.1), (2.0, -1.0)] {
            let k = 0.2;
            let s = smooth_min(a, b, k);
            let m = a.min(b);
            assert!(s <= m + 1e-15);
            assert!(s >= m - k / 4.0 - 1e-15);
        }
        assert_eq!(smooth_min(0.4, 0.7, 0.0), 0.4);
    }

    #[test]
    fn channel_subtraction_opens_bore() {
        let l = two_beam_lattice();
        let chan = Channel::new(
            vec![Point3::new(5.0, -5.0, 0.0), Point3::new(5.0, 5.0, 0.0)],
            0.5,
            ChannelKind::Rod,
        );
        let f = CapsuleField::new(&l, std::slice::from_ref(&chan), 0.0, 5.0).unwrap();
        // On the beam axis inside the bore: carved out, so positive.
        let p = Point3::new(5.0, 0.0, 0.0);
        assert!(f.distance(&p) > 0.0);
        // The bore wall sits at the channel radius.
        assert_relative_eq!(f.distance(&p), 0.5, epsilon = 1e-12);
        // Away from the channel the beam is untouched.
        assert!(f.distance(&Point3::new(8.0, 0.0, 0.0)) < 0.0);
    }

    #[test]
    fn far_points_clamp_to_band() {
        let f = CapsuleField::new(&two_beam_lattice(), &[], 0.2, 3.0).unwrap();
        assert_eq!(f.distance(&Point3::new(100.0, 100.0, 100.0)), 3.0);
    }

    #[test]
    fn grid_sampling_parallel_matches_sequential() {
        let f = CapsuleField::new(&two_beam_lattice(), &[], 0.2, 3.0).unwrap();
        let a = f.sample_grid(0.7).unwrap();
        let b = f.sample_grid_seq(0.7).unwrap();
        assert_eq!(a.npts, b.npts);
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn grid_covers_solid_with_outside_boundary() {
        let f = CapsuleField::new(&two_beam_lattice(), &[], 0.0, 3.0).unwrap();
        let g = f.sample_grid(0.5).unwrap();
        let [nx, ny, nz] = g.npts;
        // Every boundary grid point is outside the solid.
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    if i == 0 || j == 0 || k == 0 || i == nx - 1 || j == ny - 1 || k == nz - 1 {
                        assert!(g.value(i, j, k) > 0.0);
                    }
                }
            }
        }
        // And some interior point is inside.
        assert!(g.values.iter().any(|&v| v < 0.0));
    }
}
