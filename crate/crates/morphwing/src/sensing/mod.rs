//! Fiber-optic sensor simulation: waypoint deformation through lattice
//! attachments, exponential light attenuation, morph-sweep dataset
//! synthesis and a ridge-regression state estimator.

mod dataset;
mod estimator;

pub use dataset::{
    read_dataset_csv, read_dataset_string, write_dataset_csv, write_dataset_string,
    DATASET_HEADER,
};
pub use estimator::{
    fit_estimator, holdout_split, read_model_file, write_model_file, EstimatorModel,
    FEATURES_DEG1, FEATURES_DEG2,
};

use nalgebra::{Point3, Vector3};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::lattice::FiberPath;
use crate::structural::{ComplianceReport, DeformationState, MorphState, StructuralError};

pub const SENSOR_COUNT: usize = 6;

/// Morph ranges the wing is rated for; estimates are clamped to these.
pub const TWIST_RANGE_DEG: (f64, f64) = (-90.0, 90.0);
pub const CAMBER_RANGE_DEG: (f64, f64) = (0.0, 60.0);
pub const EXTENSION_RANGE_MM: (f64, f64) = (-20.0, 30.0);

#[derive(Debug, Error)]
pub enum SensingError {
    #[error("deformation state and fiber belong to different lattices")]
    FingerprintMismatch,
    #[error("expected {SENSOR_COUNT} fibers, got {0}")]
    WrongFiberCount(usize),
    #[error("sensor amplitude {value} outside [0, 1] at index {index}")]
    AmplitudeOutOfRange { index: usize, value: f64 },
    #[error("invalid attenuation model: {0}")]
    InvalidModel(String),
    #[error("normal equations are rank deficient; use ridge lambda > 0")]
    RankDeficient,
    #[error("estimator needs at least {need} rows, got {got}")]
    TooFewRows { need: usize, got: usize },
    #[error("unsupported polynomial degree {0}; use 1 or 2")]
    BadDegree(usize),
    #[error("{path}:{line}: {msg}")]
    Schema {
        path: String,
        line: usize,
        msg: String,
    },
    #[error(transparent)]
    Structural(#[from] StructuralError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Normalized light throughput of the six fibers (1 = undeformed).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorReading {
    pub amplitudes: [f64; SENSOR_COUNT],
}

impl SensorReading {
    pub fn validate(&self) -> Result<(), SensingError> {
        for (index, &value) in self.amplitudes.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(SensingError::AmplitudeOutOfRange { index, value });
            }
        }
        Ok(())
    }
}

/// Exponential ray-loss model A = exp(-a·strain - b·curvature) + noise.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttenuationModel {
    /// Per unit strain.
    pub stretch_coefficient: f64,
    /// Per radian of accumulated extra bend.
    pub bend_coefficient: f64,
    pub noise_sigma: f64,
}

impl AttenuationModel {
    pub fn validate(&self) -> Result<(), SensingError> {
        if !(self.stretch_coefficient >= 0.0
            && self.bend_coefficient >= 0.0
            && self.noise_sigma >= 0.0)
        {
            return Err(SensingError::InvalidModel(format!(
                "coefficients must be non-negative, got a={} b={} sigma={}",
                self.stretch_coefficient, self.bend_coefficient, self.noise_sigma
            )));
        }
        Ok(())
    }
}

/// Deformation summary of one fiber loop.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FiberStrain {
    /// (deformed length - rest length) / rest length; negative when slack.
    pub elongation_strain: f64,
    /// Sum of positive turning-angle increases over interior waypoints, rad.
    pub curvature_increase: f64,
}

/// Waypoints displaced by their attachment-weighted node motions
/// (translation components of the node states).
pub fn deformed_waypoints(
    path: &FiberPath,
    state: &DeformationState,
) -> Result<Vec<Point3<f64>>, SensingError> {
    if path.lattice_fingerprint != state.lattice_fingerprint {
        return Err(SensingError::FingerprintMismatch);
    }
    Ok(path
        .waypoints
        .iter()
        .zip(&path.attachments)
        .map(|(w, at)| {
            let mut d = Vector3::zeros();
            for &(node, weight) in at {
                let u = &state.displacements[node];
                d += weight * Vector3::new(u[0], u[1], u[2]);
            }
            w + d
        })
        .collect())
}

fn polyline_length(points: &[Point3<f64>]) -> f64 {
    points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

fn strain_of(path: &FiberPath, deformed: &[Point3<f64>]) -> FiberStrain {
    let rest_len = path.length();
    let new_len = polyline_length(deformed);
    let rest_angles = path.turning_angles();
    let new_angles = crate::lattice::turning_angles_of(deformed);
    let curvature_increase = rest_angles
        .iter()
        .zip(&new_angles)
        .map(|(r, n)| (n - r).max(0.0))
        .sum();
    FiberStrain {
        elongation_strain: (new_len - rest_len) / rest_len,
        curvature_increase,
    }
}

/// Elongation strain and accumulated curvature increase of a fiber under a
/// deformation state.
pub fn fiber_deformation(
    path: &FiberPath,
    state: &DeformationState,
) -> Result<FiberStrain, SensingError> {
    let deformed = deformed_waypoints(path, state)?;
    Ok(strain_of(path, &deformed))
}

/// Standard normal via Box-Muller on the given stream.
fn sample_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Amplitude for one fiber; strictly decreasing in both inputs at zero
/// noise, clamped to [0, 1].
pub fn attenuate(
    model: &AttenuationModel,
    strain: &FiberStrain,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let clean = (-model.stretch_coefficient * strain.elongation_strain
        - model.bend_coefficient * strain.curvature_increase)
        .exp();
    let noisy = if model.noise_sigma > 0.0 {
        clean + model.noise_sigma * sample_normal(rng)
    } else {
        clean
    };
    noisy.clamp(0.0, 1.0)
}

/// Uniform min..=max sweep axis.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl AxisSpec {
    pub fn values(&self) -> Vec<f64> {
        let mut out = Vec::new();
        if !(self.step > 0.0) || self.max < self.min {
            return out;
        }
        let n = ((self.max - self.min) / self.step).round() as usize;
        for i in 0..=n {
            let v = self.min + i as f64 * self.step;
            if v <= self.max + 1e-9 {
                out.push(v);
            }
        }
        out
    }
}

/// Cartesian morph sweep mirroring the physical test increments.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub twist: AxisSpec,
    pub camber: AxisSpec,
    pub extension: AxisSpec,
}

impl SweepGrid {
    pub fn reference() -> Self {
        Self {
            twist: AxisSpec {
                min: -90.0,
                max: 90.0,
                step: 10.0,
            },
            camber: AxisSpec {
                min: 0.0,
                max: 60.0,
                step: 15.0,
            },
            extension: AxisSpec {
                min: -20.0,
                max: 30.0,
                step: 10.0,
            },
        }
    }

    /// Fixed iteration order: twist outermost, extension innermost.
    pub fn states(&self) -> Vec<MorphState> {
        let mut out = Vec::new();
        for &t in &self.twist.values() {
            for &c in &self.camber.values() {
                for &e in &self.extension.values() {
                    out.push(MorphState {
                        twist_deg: t,
                        camber_deg: c,
                        extension_mm: e,
                    });
                }
            }
        }
        out
    }
}

/// One dataset row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub state: MorphState,
    pub reading: SensorReading,
    /// Target outside the rated morph ranges (linear model extrapolating).
    pub flagged: bool,
}

fn in_rated_range(s: &MorphState) -> bool {
    (TWIST_RANGE_DEG.0..=TWIST_RANGE_DEG.1).contains(&s.twist_deg)
        && (CAMBER_RANGE_DEG.0..=CAMBER_RANGE_DEG.1).contains(&s.camber_deg)
        && (EXTENSION_RANGE_MM.0..=EXTENSION_RANGE_MM.1).contains(&s.extension_mm)
}

/// Simulate the sensor response over a morph grid.
///
/// The three unit states of the compliance report are superposed to hit
/// each target exactly (the model is linear), fibers are re-measured per
/// grid point, and noise is drawn from one seeded stream in grid order.
pub fn synthesize_sweep(
    compliance: &ComplianceReport,
    fibers: &[FiberPath],
    model: &AttenuationModel,
    grid: &SweepGrid,
    seed: u64,
) -> Result<Vec<SweepRow>, SensingError> {
    model.validate()?;
    if fibers.len() != SENSOR_COUNT {
        return Err(SensingError::WrongFiberCount(fibers.len()));
    }
    for f in fibers {
        if f.lattice_fingerprint != compliance.unit_states[0].lattice_fingerprint {
            return Err(SensingError::FingerprintMismatch);
        }
    }

    // Per fiber, per unit case: displacement of each waypoint. Rows then
    // combine by scaling three small vectors per waypoint.
    let mut unit_disp: Vec<[Vec<Vector3<f64>>; 3]> = Vec::with_capacity(fibers.len());
    for f in fibers {
        let mut per_case: [Vec<Vector3<f64>>; 3] = Default::default();
        for (c, case_state) in compliance.unit_states.iter().enumerate() {
            per_case[c] = deformed_waypoints(f, case_state)?
                .iter()
                .zip(&f.waypoints)
                .map(|(d, w)| d - w)
                .collect();
        }
        unit_disp.push(per_case);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut deformed: Vec<Point3<f64>> = Vec::new();
    for target in grid.states() {
        let coeffs = compliance.amplitudes_for(&target)?;
        let mut amplitudes = [0.0; SENSOR_COUNT];
        for (fi, f) in fibers.iter().enumerate() {
            deformed.clear();
            deformed.extend(f.waypoints.iter().enumerate().map(|(wi, w)| {
                w + coeffs[0] * unit_disp[fi][0][wi]
                    + coeffs[1] * unit_disp[fi][1][wi]
                    + coeffs[2] * unit_disp[fi][2][wi]
            }));
            let strain = strain_of(f, &deformed);
            amplitudes[fi] = attenuate(model, &strain, &mut rng);
        }
        rows.push(SweepRow {
            state: target,
            reading: SensorReading { amplitudes },
            flagged: !in_rated_range(&target),
        });
    }
    Ok(rows)
}

/// Clamp a raw prediction to the rated morph ranges.
pub fn clamp_to_ranges(s: MorphState) -> MorphState {
    MorphState {
        twist_deg: s.twist_deg.clamp(TWIST_RANGE_DEG.0, TWIST_RANGE_DEG.1),
        camber_deg: s.camber_deg.clamp(CAMBER_RANGE_DEG.0, CAMBER_RANGE_DEG.1),
        extension_mm: s
            .extension_mm
            .clamp(EXTENSION_RANGE_MM.0, EXTENSION_RANGE_MM.1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_cell_map, WarpProfile, WingPlanform};
    use crate::lattice::{
        default_stations, generate_bcc, route_fibers, tag_anchors, GradingField,
    };
    use approx::assert_relative_eq;

    fn fixture() -> (Vec<FiberPath>, DeformationState, u64, usize) {
        let p = WingPlanform::reference();
        let map = build_cell_map(&p, 6, 12, 3, &WarpProfile::identity()).unwrap();
        let mut l = generate_bcc(&map, &GradingField::new(1.2, 0.6, 0.6).unwrap()).unwrap();
        let qc = p.quarter_chord_x(0.0);
        tag_anchors(
            &mut l,
            &nalgebra::Point3::new(qc, -5.0, 0.0),
            &nalgebra::Point3::new(qc, 255.0, 0.0),
            6.0,
            p.span,
        );
        let fibers = route_fibers(&l, &map, &default_stations(), 0.4).unwrap();
        let fp = l.fingerprint();
        let n = l.nodes.len();
        (fibers, DeformationState::zeros(n, fp), fp, n)
    }

    #[test]
    fn zero_deformation_zero_strain() {
        let (fibers, state, _, _) = fixture();
        for f in &fibers {
            let s = fiber_deformation(f, &state).unwrap();
            assert_eq!(s.elongation_strain, 0.0);
            assert_eq!(s.curvature_increase, 0.0);
        }
    }

    #[test]
    fn rigid_translation_is_isometry() {
        let (fibers, mut state, _, _) = fixture();
        for d in &mut state.displacements {
            d[0] = 3.0;
            d[1] = -2.0;
            d[2] = 7.0;
        }
        for f in &fibers {
            let s = fiber_deformation(f, &state).unwrap();
            assert!(s.elongation_strain.abs() < 1e-12);
            assert!(s.curvature_increase.abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_spanwise_stretch_matches_oracle() {
        let (fibers, mut state, fp, n) = fixture();
        let _ = (fp, n);
        // y -> 1.01 y on every node. Per-segment stretch of the rest
        // polyline is the oracle.
        let p = WingPlanform::reference();
        let map = build_cell_map(&p, 6, 12, 3, &WarpProfile::identity()).unwrap();
        let l = generate_bcc(&map, &GradingField::new(1.2, 0.6, 0.6).unwrap()).unwrap();
        for (d, node) in state.displacements.iter_mut().zip(&l.nodes) {
            d[1] = 0.01 * node.position.y;
        }
        for f in &fibers {
            let s = fiber_deformation(f, &state).unwrap();
            let rest = &f.waypoints;
            let expected_len: f64 = rest
                .windows(2)
                .map(|w| {
                    let mut d = w[1] - w[0];
                    d.y *= 1.01;
                    d.norm()
                })
                .sum();
            let oracle = (expected_len - f.length()) / f.length();
            assert_relative_eq!(s.elongation_strain, oracle, epsilon = 1e-6);
        }
    }

    #[test]
    fn fingerprint_mismatch_rejected() {
        let (fibers, mut state, _, _) = fixture();
        state.lattice_fingerprint ^= 1;
        assert!(matches!(
            fiber_deformation(&fibers[0], &state),
            Err(SensingError::FingerprintMismatch)
        ));
    }

    #[test]
    fn attenuation_closed_form_and_monotone() {
        let model = AttenuationModel {
            stretch_coefficient: 5.0,
            bend_coefficient: 0.1,
            noise_sigma: 0.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let at = |e: f64, k: f64, rng: &mut ChaCha8Rng| {
            attenuate(
                &model,
                &FiberStrain {
                    elongation_strain: e,
                    curvature_increase: k,
                },
                rng,
            )
        };
        assert_eq!(at(0.0, 0.0, &mut rng), 1.0);
        assert_relative_eq!(at(0.1, 0.0, &mut rng), (-0.5f64).exp(), epsilon = 1e-12);
        let mut prev = f64::INFINITY;
        for i in 1..=10 {
            let a = at(0.01 * i as f64, 0.0, &mut rng);
            assert!(a < prev);
            prev = a;
        }
        let a1 = at(0.02, 0.1, &mut rng);
        let a2 = at(0.02, 0.3, &mut rng);
        assert!(a2 < a1);
    }

    #[test]
    fn noise_is_seed_deterministic() {
        let model = AttenuationModel {
            stretch_coefficient: 5.0,
            bend_coefficient: 0.1,
            noise_sigma: 0.01,
        };
        let s = FiberStrain {
            elongation_strain: 0.05,
            curvature_increase: 0.2,
        };
        let mut r1 = ChaCha8Rng::seed_from_u64(7);
        let mut r2 = ChaCha8Rng::seed_from_u64(7);
        let a: Vec<f64> = (0..5).map(|_| attenuate(&model, &s, &mut r1)).collect();
        let b: Vec<f64> = (0..5).map(|_| attenuate(&model, &s, &mut r2)).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn axis_values_inclusive() {
        let a = AxisSpec {
            min: -20.0,
            max: 30.0,
            step: 10.0,
        };
        assert_eq!(a.values(), vec![-20.0, -10.0, 0.0, 10.0, 20.0, 30.0]);
        assert_eq!(SweepGrid::reference().states().len(), 19 * 5 * 6);
    }
}
