//! Pipeline configuration: one TOML file, versioned schema, unknown keys
//! rejected, every section optional with reference-design defaults.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{WarpProfile, WingPlanform};
use crate::lattice::{default_stations, FiberStation, GradingField};
use crate::sensing::{AttenuationModel, SweepGrid};
use crate::structural::Material;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("unsupported schema_version {0}, expected {SCHEMA_VERSION}")]
    UnsupportedSchema(u32),
    #[error("{field}: {msg}")]
    Invalid { field: String, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        msg: msg.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlanformCfg {
    pub airfoil_thickness_ratio: f64,
    pub span: f64,
    pub root_chord: f64,
    pub taper_ratio: f64,
    pub sweep_deg: f64,
}

impl Default for PlanformCfg {
    fn default() -> Self {
        let p = WingPlanform::reference();
        Self {
            airfoil_thickness_ratio: p.airfoil_thickness_ratio,
            span: p.span,
            root_chord: p.root_chord,
            taper_ratio: p.taper_ratio,
            sweep_deg: p.sweep_deg,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridCfg {
    pub n_u: usize,
    pub n_v: usize,
    pub n_w: usize,
    /// Chord fraction trimmed at both ends so no cell degenerates at the
    /// leading/trailing edge.
    pub chord_margin: f64,
}

impl Default for GridCfg {
    fn default() -> Self {
        Self {
            n_u: 6,
            n_v: 12,
            n_w: 3,
            chord_margin: crate::geometry::DEFAULT_CHORD_MARGIN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WarpCfg {
    pub root_scale: f64,
    pub tip_scale: f64,
}

impl Default for WarpCfg {
    fn default() -> Self {
        Self {
            root_scale: 1.4,
            tip_scale: 0.7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradingCfg {
    pub root_radius: f64,
    pub tip_radius: f64,
    pub surface_radius_factor: f64,
}

impl Default for GradingCfg {
    fn default() -> Self {
        Self {
            root_radius: 1.2,
            tip_radius: 0.6,
            surface_radius_factor: 0.6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelsCfg {
    pub rod_radius: f64,
    /// Chordwise shift of the rod axis off the quarter-chord line, mm.
    /// Nonzero values break the clearance guarantee (test fixture knob).
    pub rod_offset_x: f64,
    pub anchor_radius: f64,
    pub fiber_radius: f64,
    pub fiber_min_clearance: f64,
}

impl Default for ChannelsCfg {
    fn default() -> Self {
        Self {
            rod_radius: 1.5,
            rod_offset_x: 0.0,
            anchor_radius: 6.0,
            fiber_radius: 0.4,
            fiber_min_clearance: 0.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoadsCfg {
    /// Reference actuation torque about the span axis, N·mm.
    pub torque_nmm: f64,
    /// Reference trailing-edge camber force, N.
    pub camber_force_n: f64,
    /// Reference spanwise extension force, N.
    pub extension_force_n: f64,
    /// Span fraction of the camber force application sheet.
    pub camber_station: f64,
}

impl Default for LoadsCfg {
    fn default() -> Self {
        Self {
            torque_nmm: 800.0,
            camber_force_n: 1.0,
            extension_force_n: 1.0,
            camber_station: 0.49,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SegmentationCfg {
    pub parts: usize,
}

impl Default for SegmentationCfg {
    fn default() -> Self {
        Self { parts: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshCfg {
    pub voxel: f64,
    pub blend: f64,
}

impl Default for MeshCfg {
    fn default() -> Self {
        Self {
            voxel: 0.3,
            blend: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorCfg {
    pub degree: usize,
    pub ridge_lambda: f64,
    /// Hold out every n-th sweep row for evaluation.
    pub holdout_every: usize,
}

impl Default for EstimatorCfg {
    fn default() -> Self {
        Self {
            degree: 2,
            ridge_lambda: 1e-8,
            holdout_every: 5,
        }
    }
}

fn default_material() -> Material {
    Material::reference()
}

fn default_attenuation() -> AttenuationModel {
    AttenuationModel {
        stretch_coefficient: 25.0,
        bend_coefficient: 0.1,
        noise_sigma: 0.01,
    }
}

fn default_sweep() -> SweepGrid {
    SweepGrid::reference()
}

fn default_fibers() -> Vec<FiberStation> {
    default_stations()
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub schema_version: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub planform: PlanformCfg,
    #[serde(default)]
    pub grid: GridCfg,
    #[serde(default)]
    pub warp: WarpCfg,
    #[serde(default)]
    pub grading: GradingCfg,
    #[serde(default)]
    pub channels: ChannelsCfg,
    #[serde(default = "default_material")]
    pub material: Material,
    #[serde(default)]
    pub loads: LoadsCfg,
    #[serde(default)]
    pub segmentation: SegmentationCfg,
    #[serde(default)]
    pub mesh: MeshCfg,
    #[serde(default = "default_sweep")]
    pub sweep: SweepGrid,
    #[serde(default = "default_attenuation")]
    pub attenuation: AttenuationModel,
    #[serde(default)]
    pub estimator: EstimatorCfg,
    #[serde(default = "default_fibers")]
    pub fibers: Vec<FiberStation>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: default_seed(),
            planform: PlanformCfg::default(),
            grid: GridCfg::default(),
            warp: WarpCfg::default(),
            grading: GradingCfg::default(),
            channels: ChannelsCfg::default(),
            material: default_material(),
            loads: LoadsCfg::default(),
            segmentation: SegmentationCfg::default(),
            mesh: MeshCfg::default(),
            sweep: default_sweep(),
            attenuation: default_attenuation(),
            estimator: EstimatorCfg::default(),
            fibers: default_fibers(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, ConfigError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn planform(&self) -> Result<WingPlanform, ConfigError> {
        WingPlanform::new(
            self.planform.airfoil_thickness_ratio,
            self.planform.span,
            self.planform.root_chord,
            self.planform.taper_ratio,
            self.planform.sweep_deg,
        )
        .map_err(|e| invalid("planform", e))
    }

    pub fn warp_profile(&self) -> Result<WarpProfile, ConfigError> {
        WarpProfile::new(self.warp.root_scale, self.warp.tip_scale)
            .map_err(|e| invalid("warp", e))
    }

    pub fn grading_field(&self) -> Result<GradingField, ConfigError> {
        GradingField::new(
            self.grading.root_radius,
            self.grading.tip_radius,
            self.grading.surface_radius_factor,
        )
        .map_err(|e| invalid("grading", e))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::UnsupportedSchema(self.schema_version));
        }
        self.planform()?;
        self.warp_profile()?;
        self.grading_field()?;
        self.material
            .validate()
            .map_err(|e| invalid("material", e))?;
        self.attenuation
            .validate()
            .map_err(|e| invalid("attenuation", e))?;

        let g = &self.grid;
        if g.n_u == 0 || g.n_v == 0 || g.n_w == 0 {
            return Err(invalid("grid", "cell counts must be >= 1"));
        }
        if !(0.0..0.5).contains(&g.chord_margin) {
            return Err(invalid(
                "grid.chord_margin",
                format!("must be in [0, 0.5), got {}", g.chord_margin),
            ));
        }
        let c = &self.channels;
        for (name, v) in [
            ("channels.rod_radius", c.rod_radius),
            ("channels.anchor_radius", c.anchor_radius),
            ("channels.fiber_radius", c.fiber_radius),
            ("channels.fiber_min_clearance", c.fiber_min_clearance),
        ] {
            if !(v > 0.0) {
                return Err(invalid(name, format!("must be > 0, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.loads.camber_station) {
            return Err(invalid(
                "loads.camber_station",
                format!("must be in [0, 1], got {}", self.loads.camber_station),
            ));
        }
        if self.segmentation.parts == 0 || self.segmentation.parts > 255 {
            return Err(invalid(
                "segmentation.parts",
                format!("must be in [1, 255], got {}", self.segmentation.parts),
            ));
        }
        if !(self.mesh.voxel > 0.0) || !(self.mesh.blend >= 0.0) {
            return Err(invalid(
                "mesh",
                format!(
                    "voxel must be > 0 and blend >= 0, got {} / {}",
                    self.mesh.voxel, self.mesh.blend
                ),
            ));
        }
        if !matches!(self.estimator.degree, 1 | 2) {
            return Err(invalid(
                "estimator.degree",
                format!("must be 1 or 2, got {}", self.estimator.degree),
            ));
        }
        if !(self.estimator.ridge_lambda >= 0.0) {
            return Err(invalid(
                "estimator.ridge_lambda",
                format!("must be >= 0, got {}", self.estimator.ridge_lambda),
            ));
        }
        if self.fibers.len() != crate::sensing::SENSOR_COUNT {
            return Err(invalid(
                "fibers",
                format!(
                    "exactly {} fiber stations required, got {}",
                    crate::sensing::SENSOR_COUNT,
                    self.fibers.len()
                ),
            ));
        }
        for (i, f) in self.fibers.iter().enumerate() {
            for (name, v) in [
                ("u_out", f.u_out),
                ("w_out", f.w_out),
                ("u_back", f.u_back),
                ("w_back", f.w_back),
            ] {
                if !(0.0..=1.0).contains(&v) {
                    return Err(invalid(
                        &format!("fibers[{i}].{name}"),
                        format!("must be in [0, 1], got {v}"),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_reference_defaults() {
        let cfg = PipelineConfig::from_toml("schema_version = 1").unwrap();
        assert_eq!(cfg, PipelineConfig::default());
        assert_eq!(cfg.grid.n_u, 6);
        assert_eq!(cfg.planform.span, 250.0);
        assert_eq!(cfg.fibers.len(), 6);
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = PipelineConfig::from_toml("schema_version = 1\nbogus = 3").unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
        let err =
            PipelineConfig::from_toml("schema_version = 1\n[grid]\nn_x = 5").unwrap_err();
        assert!(err.to_string().contains("n_x"), "{err}");
    }

    #[test]
    fn wrong_schema_version_rejected() {
        assert!(matches!(
            PipelineConfig::from_toml("schema_version = 99"),
            Err(ConfigError::UnsupportedSchema(99))
        ));
    }

    #[test]
    fn invalid_fields_named_by_path() {
        let err = PipelineConfig::from_toml("schema_version = 1\n[mesh]\nvoxel = -1.0")
            .unwrap_err();
        assert!(err.to_string().starts_with("mesh"), "{err}");
        let err = PipelineConfig::from_toml(
            "schema_version = 1\n[loads]\ncamber_station = 1.5",
        )
        .unwrap_err();
        assert!(err.to_string().contains("camber_station"), "{err}");
    }

    #[test]
    fn roundtrips_through_toml() {
        let cfg = PipelineConfig::default();
        let text = toml::to_string_pretty(&cfg).unwrap();
        let back = PipelineConfig::from_toml(&text).unwrap();
        assert_eq!(cfg, back);
    }
}
