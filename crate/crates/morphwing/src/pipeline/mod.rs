//! End-to-end commands behind the CLI: design generation, STL export,
//! frame analysis, sensor sweep synthesis, estimator fitting and state
//! estimation. Every command is a pure function of the config plus its
//! input files, so equal seeds give byte-identical outputs.

mod svg;

pub use svg::{line_chart, Series};

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Point3;
use thiserror::Error;

use crate::config::{ConfigError, PipelineConfig};
use crate::geometry::{build_cell_map_with_opts, CellMap, CellMapOptions, GeometryError};
use crate::lattice::{
    carve_channel, generate_bcc, generate_surface_lattice, merge, read_lattice_file,
    route_fibers, segment_lattice, tag_anchors, write_lattice_file, BeamLattice, Channel,
    ChannelKind, ClearanceReport, FiberPath, LatticeEdge, LatticeError, LatticeFile,
    SegmentationReport,
};
use crate::mesh::{polygonize, write_stl, CapsuleField, MeshError, TriMesh, WatertightReport};
use crate::sensing::{
    fit_estimator, holdout_split, read_dataset_csv, read_model_file, synthesize_sweep,
    write_dataset_csv, write_model_file, SensingError, SensorReading, SENSOR_COUNT,
};
use crate::structural::{
    compliance_report, equilibrium_residual, morph_metrics, ComplianceReport, DeformationState,
    FrameSolver, LoadCase, MorphState, StructuralError,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Structural(#[from] StructuralError),
    #[error(transparent)]
    Sensing(#[from] SensingError),
    #[error("mesh not watertight: {0}")]
    NotWatertight(String),
    #[error("{0}")]
    Provenance(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PipelineError {
    /// Process exit code: 2 invalid input, 3 generation failure, 4 numeric
    /// failure, 5 I/O failure.
    pub fn exit_code(&self) -> i32 {
        use PipelineError::*;
        match self {
            Config(ConfigError::Io(_)) => 5,
            Config(_) => 2,
            Geometry(_) => 3,
            Lattice(LatticeError::Io(_)) => 5,
            Lattice(LatticeError::Format(_) | LatticeError::ProvenanceMismatch { .. }) => 2,
            Lattice(_) => 3,
            Mesh(MeshError::Io(_)) => 5,
            Mesh(MeshError::BadStl(_)) => 2,
            Mesh(_) => 3,
            NotWatertight(_) => 3,
            Structural(_) => 4,
            Sensing(SensingError::Io(_)) => 5,
            Sensing(
                SensingError::Schema { .. }
                | SensingError::AmplitudeOutOfRange { .. }
                | SensingError::WrongFiberCount(_)
                | SensingError::FingerprintMismatch
                | SensingError::InvalidModel(_)
                | SensingError::BadDegree(_)
                | SensingError::TooFewRows { .. },
            ) => 2,
            Sensing(_) => 4,
            Provenance(_) => 2,
            Io(_) => 5,
        }
    }
}

pub const LATTICE_FILE: &str = "lattice.txt";
pub const DATASET_FILE: &str = "sweep.csv";
pub const MODEL_FILE: &str = "estimator.txt";

/// Everything derived from one config: the cell map, the frame model the
/// solver and fibers live on, and the carved, segmented lattice that gets
/// printed.
pub struct Design {
    pub map: CellMap,
    /// Internal BCC lattice with anchor tags; the structural model and the
    /// lattice the fiber attachments index into.
    pub frame: BeamLattice,
    /// Frame plus surface skin, channels carved out, segment ids assigned.
    pub printed: BeamLattice,
    pub channels: Vec<Channel>,
    pub fibers: Vec<FiberPath>,
    pub rod_clearance: ClearanceReport,
    pub fiber_carves: Vec<ClearanceReport>,
    pub segmentation: SegmentationReport,
    pub rod_anchor_count: usize,
    pub tip_anchor_count: usize,
}

/// File name for report text; reports must not embed the output directory
/// so identical runs into different directories stay byte-identical.
fn short_name(path: &Path) -> std::borrow::Cow<'_, str> {
    match path.file_name() {
        Some(n) => n.to_string_lossy(),
        None => path.to_string_lossy(),
    }
}

fn rod_axis(cfg: &PipelineConfig) -> Result<(Point3<f64>, Point3<f64>), PipelineError> {
    let p = cfg.planform()?;
    let off = cfg.channels.rod_offset_x;
    const OVERHANG: f64 = 5.0;
    Ok((
        Point3::new(p.quarter_chord_x(0.0) + off, -OVERHANG, 0.0),
        Point3::new(p.quarter_chord_x(p.span) + off, p.span + OVERHANG, 0.0),
    ))
}

pub fn build_design(cfg: &PipelineConfig) -> Result<Design, PipelineError> {
    cfg.validate()?;
    let planform = cfg.planform()?;
    let profile = cfg.warp_profile()?;
    let grading = cfg.grading_field()?;
    let map = build_cell_map_with_opts(
        &planform,
        cfg.grid.n_u,
        cfg.grid.n_v,
        cfg.grid.n_w,
        &profile,
        CellMapOptions {
            chord_margin: cfg.grid.chord_margin,
            snap_quarter_chord: true,
        },
    )?;

    let mut frame = generate_bcc(&map, &grading)?;
    let surface = generate_surface_lattice(&map, &grading)?;
    let mut printed = merge(&frame, &surface)?;

    let (rod_a, rod_b) = rod_axis(cfg)?;
    tag_anchors(&mut frame, &rod_a, &rod_b, cfg.channels.anchor_radius, planform.span);
    let (rod_anchor_count, tip_anchor_count) =
        tag_anchors(&mut printed, &rod_a, &rod_b, cfg.channels.anchor_radius, planform.span);

    let rod = Channel::new(
        vec![rod_a, rod_b],
        cfg.channels.rod_radius,
        ChannelKind::Rod,
    );
    // Rod carving never removes beams; it fails hard on any interference.
    let (_, _) = carve_channel(&frame, &rod)?;
    let (printed_carved, rod_clearance) = carve_channel(&printed, &rod)?;
    let mut printed = printed_carved;

    let fibers = route_fibers(&frame, &map, &cfg.fibers, cfg.channels.fiber_min_clearance)?;

    let mut channels = vec![rod];
    let mut fiber_carves = Vec::new();
    for f in &fibers {
        let ch = f.channel(cfg.channels.fiber_radius);
        let (next, report) = carve_channel(&printed, &ch)?;
        printed = next;
        fiber_carves.push(report);
        channels.push(ch);
    }

    let segmentation = segment_lattice(
        &mut printed,
        cfg.segmentation.parts,
        &map.span_stations(),
    )?;

    Ok(Design {
        map,
        frame,
        printed,
        channels,
        fibers,
        rod_clearance,
        fiber_carves,
        segmentation,
        rod_anchor_count,
        tip_anchor_count,
    })
}

/// Refuse to mix outputs from different designs: if a lattice file already
/// exists in `out_dir` it must match the design the config produces.
fn check_existing_lattice(out_dir: &Path, design: &Design) -> Result<(), PipelineError> {
    let path = out_dir.join(LATTICE_FILE);
    if !path.exists() {
        return Ok(());
    }
    let file = read_lattice_file(&path)?;
    let (found, expected) = (file.lattice.fingerprint(), design.printed.fingerprint());
    if found != expected {
        return Err(PipelineError::Provenance(format!(
            "{} was generated from a different design (fingerprint {found:016x}, config gives {expected:016x}); \
             regenerate or point --out-dir elsewhere",
            path.display()
        )));
    }
    Ok(())
}

pub struct GenerateReport {
    pub lattice_path: PathBuf,
    pub frame_nodes: usize,
    pub frame_edges: usize,
    pub printed_nodes: usize,
    pub printed_edges: usize,
    pub material_volume_mm3: f64,
    pub rod_clearance_mm: f64,
    pub rod_anchor_count: usize,
    pub tip_anchor_count: usize,
    pub fiber_lengths_mm: Vec<f64>,
    pub edges_removed: usize,
    pub edges_thinned: usize,
    pub segmentation: SegmentationReport,
    pub fingerprint: u64,
}

impl fmt::Display for GenerateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "lattice: {}", short_name(&self.lattice_path))?;
        writeln!(f, "fingerprint: {:016x}", self.fingerprint)?;
        writeln!(
            f,
            "frame: {} nodes, {} edges; printed: {} nodes, {} edges",
            self.frame_nodes, self.frame_edges, self.printed_nodes, self.printed_edges
        )?;
        writeln!(f, "material volume: {:.1} mm^3", self.material_volume_mm3)?;
        writeln!(
            f,
            "rod channel clearance: {:.3} mm ({} rod anchors, {} tip anchors)",
            self.rod_clearance_mm, self.rod_anchor_count, self.tip_anchor_count
        )?;
        for (i, len) in self.fiber_lengths_mm.iter().enumerate() {
            writeln!(f, "fiber {}: {:.1} mm", i + 1, len)?;
        }
        writeln!(
            f,
            "fiber channels: {} edges removed, {} thinned",
            self.edges_removed, self.edges_thinned
        )?;
        writeln!(
            f,
            "segments: {:?} edges each, {} interface nodes, {} crossing edges",
            self.segmentation.edges_per_segment,
            self.segmentation.interface_nodes,
            self.segmentation.crossing_edges
        )
    }
}

pub fn cmd_generate(cfg: &PipelineConfig, out_dir: &Path) -> Result<GenerateReport, PipelineError> {
    let design = build_design(cfg)?;
    fs::create_dir_all(out_dir)?;
    let lattice_path = out_dir.join(LATTICE_FILE);
    let file = LatticeFile {
        lattice: design.printed.clone(),
        channels: design.channels.clone(),
        fibers: design.fibers.clone(),
    };
    write_lattice_file(&lattice_path, &file)?;
    let report = GenerateReport {
        lattice_path,
        frame_nodes: design.frame.nodes.len(),
        frame_edges: design.frame.edges.len(),
        printed_nodes: design.printed.nodes.len(),
        printed_edges: design.printed.edges.len(),
        material_volume_mm3: design.printed.material_volume(),
        rod_clearance_mm: design.rod_clearance.min_clearance,
        rod_anchor_count: design.rod_anchor_count,
        tip_anchor_count: design.tip_anchor_count,
        fiber_lengths_mm: design.fibers.iter().map(|f| f.length()).collect(),
        edges_removed: design.fiber_carves.iter().map(|r| r.removed.len()).sum(),
        edges_thinned: design.fiber_carves.iter().map(|r| r.thinned.len()).sum(),
        segmentation: design.segmentation.clone(),
        fingerprint: design.printed.fingerprint(),
    };
    fs::write(out_dir.join("generate_report.txt"), report.to_string())?;
    Ok(report)
}

fn segment_sublattice(l: &BeamLattice, seg: u8) -> BeamLattice {
    let mut remap = vec![usize::MAX; l.nodes.len()];
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    for e in &l.edges {
        if e.segment != Some(seg) {
            continue;
        }
        for id in [e.a, e.b] {
            if remap[id] == usize::MAX {
                remap[id] = nodes.len();
                nodes.push(l.nodes[id]);
            }
        }
        edges.push(LatticeEdge {
            a: remap[e.a],
            b: remap[e.b],
            ..*e
        });
    }
    BeamLattice { nodes, edges }
}

pub struct MeshedPart {
    pub path: PathBuf,
    pub triangles: usize,
    pub file_bytes: u64,
    pub volume_mm3: f64,
    pub watertight: WatertightReport,
}

pub struct ExportReport {
    pub parts: Vec<MeshedPart>,
}

impl fmt::Display for ExportReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.parts {
            writeln!(
                f,
                "{}: {} triangles, {} bytes, {:.1} mm^3, watertight: {}",
                short_name(&p.path),
                p.triangles,
                p.file_bytes,
                p.volume_mm3,
                p.watertight.is_watertight()
            )?;
        }
        Ok(())
    }
}

fn mesh_lattice(
    lattice: &BeamLattice,
    channels: &[Channel],
    cfg: &PipelineConfig,
) -> Result<TriMesh, PipelineError> {
    let band = 3.0 * cfg.mesh.voxel + cfg.mesh.blend;
    let field = CapsuleField::new(lattice, channels, cfg.mesh.blend, band)?;
    let grid = field.sample_grid(cfg.mesh.voxel)?;
    Ok(polygonize(&grid))
}

fn export_one(
    lattice: &BeamLattice,
    channels: &[Channel],
    cfg: &PipelineConfig,
    path: PathBuf,
) -> Result<MeshedPart, PipelineError> {
    let mesh = mesh_lattice(lattice, channels, cfg)?;
    let watertight = mesh.watertight_check();
    if !watertight.is_watertight() {
        return Err(PipelineError::NotWatertight(format!(
            "{}: {} boundary edges, {} non-manifold edges, {} degenerate triangles",
            path.display(),
            watertight.boundary_edges,
            watertight.non_manifold_edges,
            watertight.degenerate_triangles
        )));
    }
    write_stl(&path, &mesh)?;
    let file_bytes = fs::metadata(&path)?.len();
    Ok(MeshedPart {
        path,
        triangles: mesh.triangles.len(),
        file_bytes,
        volume_mm3: mesh.signed_volume(),
        watertight,
    })
}

pub fn cmd_export(
    cfg: &PipelineConfig,
    out_dir: &Path,
    per_segment: bool,
) -> Result<ExportReport, PipelineError> {
    let design = build_design(cfg)?;
    fs::create_dir_all(out_dir)?;
    check_existing_lattice(out_dir, &design)?;
    let mut parts = Vec::new();
    if per_segment {
        for seg in 0..cfg.segmentation.parts {
            let sub = segment_sublattice(&design.printed, seg as u8);
            parts.push(export_one(
                &sub,
                &design.channels,
                cfg,
                out_dir.join(format!("wing_segment_{}.stl", seg + 1)),
            )?);
        }
    } else {
        parts.push(export_one(
            &design.printed,
            &design.channels,
            cfg,
            out_dir.join("wing.stl"),
        )?);
    }
    let report = ExportReport { parts };
    fs::write(out_dir.join("export_report.txt"), report.to_string())?;
    Ok(report)
}

/// Mean spanwise rotation (deg) of grid sheet `j`.
fn sheet_twist_deg(state: &DeformationState, map: &CellMap, j: usize) -> f64 {
    let (nu, _, nw) = map.dims;
    let mut sum = 0.0;
    for k in 0..=nw {
        for i in 0..=nu {
            sum += state.displacements[map.vertex_index(i, j, k)][4];
        }
    }
    (sum / ((nu + 1) * (nw + 1)) as f64).to_degrees()
}

/// Mean vertical deflection (mm) of the trailing edge relative to the
/// leading edge on grid sheet `j`.
fn sheet_camber_mm(state: &DeformationState, map: &CellMap, j: usize) -> f64 {
    let (nu, _, nw) = map.dims;
    let column = |i: usize| {
        (0..=nw)
            .map(|k| state.displacements[map.vertex_index(i, j, k)][2])
            .sum::<f64>()
            / (nw + 1) as f64
    };
    column(nu) - column(0)
}

/// Fraction of the tip twist that accumulates over the outer half of the
/// span; 0.5 means a linear twist distribution.
pub fn outer_half_twist_fraction(state: &DeformationState, map: &CellMap) -> f64 {
    let (_, nv, _) = map.dims;
    let stations = map.span_stations();
    let half = map.planform.span / 2.0;
    let mut mid = 0;
    for (j, &y) in stations.iter().enumerate() {
        if (y - half).abs() < (stations[mid] - half).abs() {
            mid = j;
        }
    }
    let tip = sheet_twist_deg(state, map, nv);
    if tip.abs() < 1e-12 {
        return 0.0;
    }
    (tip - sheet_twist_deg(state, map, mid)) / tip
}

pub struct ModeResult {
    pub name: &'static str,
    pub morph: MorphState,
    pub outer_half_twist_fraction: f64,
    pub equilibrium_residual: f64,
}

pub struct AnalyzeReport {
    pub modes: Vec<ModeResult>,
    pub compliance: nalgebra::Matrix3<f64>,
}

impl fmt::Display for AnalyzeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for m in &self.modes {
            writeln!(
                f,
                "{}: twist {:.3} deg, camber {:.3} deg, extension {:.3} mm, \
                 outer-half twist fraction {:.3}, residual {:.2e}",
                m.name,
                m.morph.twist_deg,
                m.morph.camber_deg,
                m.morph.extension_mm,
                m.outer_half_twist_fraction,
                m.equilibrium_residual
            )?;
        }
        writeln!(f, "compliance (rows twist deg / camber deg / extension mm):")?;
        for r in 0..3 {
            writeln!(
                f,
                "  [{:>12.5e} {:>12.5e} {:>12.5e}]",
                self.compliance[(r, 0)],
                self.compliance[(r, 1)],
                self.compliance[(r, 2)]
            )?;
        }
        Ok(())
    }
}

fn write_mode_csv(
    path: &Path,
    state: &DeformationState,
    map: &CellMap,
) -> Result<(), PipelineError> {
    let mut out = String::from("station_mm,twist_deg,camber_mm\n");
    let stations = map.span_stations();
    for (j, &y) in stations.iter().enumerate() {
        out.push_str(&format!(
            "{y},{},{}\n",
            sheet_twist_deg(state, map, j),
            sheet_camber_mm(state, map, j)
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Solve the three reference load cases and report spanwise responses.
pub fn cmd_analyze(cfg: &PipelineConfig, out_dir: &Path) -> Result<AnalyzeReport, PipelineError> {
    let design = build_design(cfg)?;
    fs::create_dir_all(out_dir)?;
    check_existing_lattice(out_dir, &design)?;
    let solver = FrameSolver::new(&design.frame, &cfg.material)?;
    let station = cfg.loads.camber_station;
    let cases = [
        ("twist", LoadCase::twist(&design.frame, cfg.loads.torque_nmm)?),
        ("camber", LoadCase::camber(&design.map, cfg.loads.camber_force_n, station)?),
        ("extension", LoadCase::extension(&design.frame, cfg.loads.extension_force_n)?),
    ];

    let mut modes = Vec::new();
    let mut twist_series = Vec::new();
    let mut camber_series = Vec::new();
    let stations = design.map.span_stations();
    for (name, case) in &cases {
        let state = solver.solve(case)?;
        write_mode_csv(&out_dir.join(format!("response_{name}.csv")), &state, &design.map)?;
        twist_series.push(Series {
            name: (*name).to_string(),
            points: stations
                .iter()
                .enumerate()
                .map(|(j, &y)| (y, sheet_twist_deg(&state, &design.map, j)))
                .collect(),
        });
        camber_series.push(Series {
            name: (*name).to_string(),
            points: stations
                .iter()
                .enumerate()
                .map(|(j, &y)| (y, sheet_camber_mm(&state, &design.map, j)))
                .collect(),
        });
        modes.push(ModeResult {
            name,
            morph: morph_metrics(&state, &design.map, station),
            outer_half_twist_fraction: outer_half_twist_fraction(&state, &design.map),
            equilibrium_residual: equilibrium_residual(
                &design.frame,
                &cfg.material,
                &state,
                case,
            )?,
        });
    }

    let mut summary = String::from(
        "mode,twist_deg,camber_deg,extension_mm,outer_half_twist_fraction,equilibrium_residual\n",
    );
    for m in &modes {
        summary.push_str(&format!(
            "{},{},{},{},{},{}\n",
            m.name,
            m.morph.twist_deg,
            m.morph.camber_deg,
            m.morph.extension_mm,
            m.outer_half_twist_fraction,
            m.equilibrium_residual
        ));
    }
    fs::write(out_dir.join("analysis_summary.csv"), summary)?;
    fs::write(
        out_dir.join("twist_distribution.svg"),
        line_chart(
            "Spanwise twist per load case",
            "span station (mm)",
            "twist (deg)",
            &twist_series,
        ),
    )?;
    fs::write(
        out_dir.join("camber_distribution.svg"),
        line_chart(
            "Trailing-edge drop per load case",
            "span station (mm)",
            "TE - LE deflection (mm)",
            &camber_series,
        ),
    )?;

    let compliance =
        compliance_report(&solver, &design.frame, &design.map, station)?;
    let report = AnalyzeReport {
        modes,
        compliance: compliance.matrix,
    };
    fs::write(out_dir.join("analyze_report.txt"), report.to_string())?;
    Ok(report)
}

fn design_compliance(
    cfg: &PipelineConfig,
    design: &Design,
) -> Result<ComplianceReport, PipelineError> {
    let solver = FrameSolver::new(&design.frame, &cfg.material)?;
    Ok(compliance_report(
        &solver,
        &design.frame,
        &design.map,
        cfg.loads.camber_station,
    )?)
}

pub struct SenseReport {
    pub dataset_path: PathBuf,
    pub rows: usize,
    pub flagged: usize,
}

impl fmt::Display for SenseReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{}: {} rows ({} outside rated ranges)",
            short_name(&self.dataset_path),
            self.rows,
            self.flagged
        )
    }
}

/// Simulate the fiber sensors over the configured morph grid.
pub fn cmd_sense(cfg: &PipelineConfig, out_dir: &Path) -> Result<SenseReport, PipelineError> {
    let design = build_design(cfg)?;
    fs::create_dir_all(out_dir)?;
    check_existing_lattice(out_dir, &design)?;
    let compliance = design_compliance(cfg, &design)?;
    let rows = synthesize_sweep(
        &compliance,
        &design.fibers,
        &cfg.attenuation,
        &cfg.sweep,
        cfg.seed,
    )?;
    let dataset_path = out_dir.join(DATASET_FILE);
    write_dataset_csv(&dataset_path, &rows)?;

    // Amplitude vs twist along the camber = 0, extension = 0 grid line.
    let series: Vec<Series> = (0..SENSOR_COUNT)
        .map(|s| Series {
            name: format!("s{}", s + 1),
            points: rows
                .iter()
                .filter(|r| r.state.camber_deg == 0.0 && r.state.extension_mm == 0.0)
                .map(|r| (r.state.twist_deg, r.reading.amplitudes[s]))
                .collect(),
        })
        .collect();
    fs::write(
        out_dir.join("sensor_response.svg"),
        line_chart(
            "Sensor amplitude vs twist",
            "twist (deg)",
            "amplitude",
            &series,
        ),
    )?;

    let report = SenseReport {
        dataset_path,
        rows: rows.len(),
        flagged: rows.iter().filter(|r| r.flagged).count(),
    };
    Ok(report)
}

pub struct FitReport {
    pub model_path: PathBuf,
    pub train_rows: usize,
    pub holdout_rows: usize,
    /// Holdout RMSE for twist (deg), camber (deg), extension (mm).
    pub holdout_rmse: [f64; 3],
}

impl fmt::Display for FitReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{}: trained on {} rows, {} held out",
            short_name(&self.model_path),
            self.train_rows,
            self.holdout_rows
        )?;
        writeln!(
            f,
            "holdout rmse: twist {:.4} deg, camber {:.4} deg, extension {:.4} mm",
            self.holdout_rmse[0], self.holdout_rmse[1], self.holdout_rmse[2]
        )
    }
}

/// Fit the amplitude-to-morph estimator from a sweep dataset.
pub fn cmd_fit(
    cfg: &PipelineConfig,
    out_dir: &Path,
    dataset: &Path,
) -> Result<FitReport, PipelineError> {
    let rows = read_dataset_csv(dataset)?;
    let (train, held) = holdout_split(&rows, cfg.estimator.holdout_every);
    let model = fit_estimator(
        &train,
        cfg.estimator.degree,
        cfg.estimator.ridge_lambda,
        cfg.seed,
    )?;
    fs::create_dir_all(out_dir)?;
    let model_path = out_dir.join(MODEL_FILE);
    write_model_file(&model_path, &model)?;
    let report = FitReport {
        model_path,
        train_rows: train.len(),
        holdout_rows: held.len(),
        holdout_rmse: model.rmse(&held),
    };
    fs::write(out_dir.join("fit_report.txt"), report.to_string())?;
    Ok(report)
}

pub const READINGS_HEADER: &str = "s1,s2,s3,s4,s5,s6";
pub const ESTIMATES_HEADER: &str = "twist_deg,camber_deg,extension_mm";

fn read_readings_csv(path: &Path) -> Result<Vec<SensorReading>, PipelineError> {
    let text = fs::read_to_string(path)?;
    let origin = path.display().to_string();
    let schema = |line: usize, msg: String| {
        PipelineError::Sensing(SensingError::Schema {
            path: origin.clone(),
            line,
            msg,
        })
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == READINGS_HEADER => {}
        Some((_, h)) => {
            return Err(schema(1, format!("expected header `{READINGS_HEADER}`, got `{h}`")))
        }
        None => return Err(schema(1, "empty readings file".into())),
    }
    let mut out = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != SENSOR_COUNT {
            return Err(schema(
                line_no,
                format!("expected {SENSOR_COUNT} fields, got {}", fields.len()),
            ));
        }
        let mut amplitudes = [0.0f64; SENSOR_COUNT];
        for (i, field) in fields.iter().enumerate() {
            amplitudes[i] = field
                .trim()
                .parse()
                .map_err(|_| schema(line_no, format!("bad number `{field}` in column {}", i + 1)))?;
        }
        let reading = SensorReading { amplitudes };
        reading
            .validate()
            .map_err(|e| schema(line_no, e.to_string()))?;
        out.push(reading);
    }
    Ok(out)
}

pub struct EstimateReport {
    pub estimates_path: PathBuf,
    pub states: Vec<MorphState>,
}

impl fmt::Display for EstimateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{}: {} states",
            short_name(&self.estimates_path),
            self.states.len()
        )
    }
}

/// Run the fitted estimator over a file of sensor readings.
pub fn cmd_estimate(
    out_dir: &Path,
    model_path: &Path,
    readings_path: &Path,
) -> Result<EstimateReport, PipelineError> {
    let model = read_model_file(model_path)?;
    let readings = read_readings_csv(readings_path)?;
    let mut states = Vec::with_capacity(readings.len());
    let mut out = String::from(ESTIMATES_HEADER);
    out.push('\n');
    for r in &readings {
        let s = model.estimate(r).map_err(PipelineError::Sensing)?;
        out.push_str(&format!("{},{},{}\n", s.twist_deg, s.camber_deg, s.extension_mm));
        states.push(s);
    }
    fs::create_dir_all(out_dir)?;
    let estimates_path = out_dir.join("estimates.csv");
    fs::write(&estimates_path, out)?;
    Ok(EstimateReport {
        estimates_path,
        states,
    })
}
