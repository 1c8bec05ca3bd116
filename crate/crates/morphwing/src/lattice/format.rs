//! Line-oriented text serialization for lattices, channels and fibers.
//!
//! ```text
//! # morphwing lattice 1
//! # nodes <n> edges <m> fingerprint <hex>
//! N <x> <y> <z> <tags>            tags: comma list of internal,surface,rod_anchor,tip_anchor or -
//! E <a> <b> <radius> <segment> <kind>   segment: 0-based id or -; kind: internal|surface
//! C <kind> <radius> <x y z ...>   channel polyline; kind: rod|fiber
//! F <id> <fingerprint>            fiber header
//! FW <x> <y> <z> <n0> <w0> ...    fiber waypoint + attachment pairs
//! ```
//!
//! Floats use Rust's shortest round-trip formatting, so write/read/write is
//! byte-stable.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::Point3;

use super::{
    BeamLattice, Channel, ChannelKind, EdgeKind, FiberPath, LatticeEdge, LatticeError, LatticeNode,
    NodeTags,
};

const FORMAT_VERSION: u32 = 1;

/// A lattice plus the routed channels and fibers that reference it.
#[derive(Debug, Clone, Default)]
pub struct LatticeFile {
    pub lattice: BeamLattice,
    pub channels: Vec<Channel>,
    pub fibers: Vec<FiberPath>,
}

fn tags_to_str(t: NodeTags) -> String {
    let mut parts = Vec::new();
    if t.contains(NodeTags::INTERNAL) {
        parts.push("internal");
    }
    if t.contains(NodeTags::SURFACE) {
        parts.push("surface");
    }
    if t.contains(NodeTags::ROD_ANCHOR) {
        parts.push("rod_anchor");
    }
    if t.contains(NodeTags::TIP_ANCHOR) {
        parts.push("tip_anchor");
    }
    if parts.is_empty() {
        "-".to_string()
    } else {
        parts.join(",")
    }
}

fn tags_from_str(s: &str) -> Result<NodeTags, LatticeError> {
    let mut t = NodeTags::default();
    if s == "-" {
        return Ok(t);
    }
    for part in s.split(',') {
        t.insert(match part {
            "internal" => NodeTags::INTERNAL,
            "surface" => NodeTags::SURFACE,
            "rod_anchor" => NodeTags::ROD_ANCHOR,
            "tip_anchor" => NodeTags::TIP_ANCHOR,
            other => {
                return Err(LatticeError::Format(format!("unknown node tag `{other}`")))
            }
        });
    }
    Ok(t)
}

pub fn write_lattice_string(file: &LatticeFile) -> String {
    let l = &file.lattice;
    let mut out = String::new();
    let _ = writeln!(out, "# morphwing lattice {FORMAT_VERSION}");
    let _ = writeln!(
        out,
        "# nodes {} edges {} fingerprint {:016x}",
        l.nodes.len(),
        l.edges.len(),
        l.fingerprint()
    );
    for n in &l.nodes {
        let _ = writeln!(
            out,
            "N {} {} {} {}",
            n.position.x,
            n.position.y,
            n.position.z,
            tags_to_str(n.tags)
        );
    }
    for e in &l.edges {
        let seg = e
            .segment
            .map_or_else(|| "-".to_string(), |s| s.to_string());
        let kind = match e.kind {
            EdgeKind::Internal => "internal",
            EdgeKind::Surface => "surface",
        };
        let _ = writeln!(out, "E {} {} {} {} {}", e.a, e.b, e.radius, seg, kind);
    }
    for c in &file.channels {
        let kind = match c.kind {
            ChannelKind::Rod => "rod",
            ChannelKind::Fiber => "fiber",
        };
        let _ = write!(out, "C {kind} {}", c.radius);
        for p in &c.axis {
            let _ = write!(out, " {} {} {}", p.x, p.y, p.z);
        }
        out.push('\n');
    }
    for f in &file.fibers {
        let _ = writeln!(out, "F {} {:016x}", f.id, f.lattice_fingerprint);
        for (p, at) in f.waypoints.iter().zip(&f.attachments) {
            let _ = write!(out, "FW {} {} {}", p.x, p.y, p.z);
            for &(id, w) in at {
                let _ = write!(out, " {id} {w}");
            }
            out.push('\n');
        }
    }
    out
}

pub fn write_lattice_file(path: &Path, file: &LatticeFile) -> Result<(), LatticeError> {
    fs::write(path, write_lattice_string(file))?;
    Ok(())
}

fn bad(line_no: usize, msg: impl std::fmt::Display) -> LatticeError {
    LatticeError::Format(format!("line {line_no}: {msg}"))
}

fn parse_f64(tok: &str, line_no: usize) -> Result<f64, LatticeError> {
    tok.parse()
        .map_err(|_| bad(line_no, format!("bad float `{tok}`")))
}

fn parse_usize(tok: &str, line_no: usize) -> Result<usize, LatticeError> {
    tok.parse()
        .map_err(|_| bad(line_no, format!("bad index `{tok}`")))
}

pub fn read_lattice_string(text: &str) -> Result<LatticeFile, LatticeError> {
    let mut file = LatticeFile::default();
    let mut header_fingerprint: Option<u64> = None;
    let mut saw_header = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let toks: Vec<&str> = rest.split_whitespace().collect();
            if toks.first() == Some(&"morphwing") {
                saw_header = true;
                if toks.get(1) != Some(&"lattice") || toks.get(2) != Some(&"1") {
                    return Err(bad(line_no, "unsupported lattice format version"));
                }
            } else if toks.first() == Some(&"nodes") {
                if let Some(pos) = toks.iter().position(|&t| t == "fingerprint") {
                    let hex = toks
                        .get(pos + 1)
                        .ok_or_else(|| bad(line_no, "missing fingerprint"))?;
                    header_fingerprint = Some(
                        u64::from_str_radix(hex, 16)
                            .map_err(|_| bad(line_no, "bad fingerprint"))?,
                    );
                }
            }
            continue;
        }

        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks[0] {
            "N" => {
                if toks.len() != 5 {
                    return Err(bad(line_no, "N needs 4 fields"));
                }
                file.lattice.nodes.push(LatticeNode {
                    position: Point3::new(
                        parse_f64(toks[1], line_no)?,
                        parse_f64(toks[2], line_no)?,
                        parse_f64(toks[3], line_no)?,
                    ),
                    tags: tags_from_str(toks[4])?,
                });
            }
            "E" => {
                if toks.len() != 6 {
                    return Err(bad(line_no, "E needs 5 fields"));
                }
                let a = parse_usize(toks[1], line_no)?;
                let b = parse_usize(toks[2], line_no)?;
                let n = file.lattice.nodes.len();
                if a >= n || b >= n {
                    return Err(bad(line_no, format!("edge endpoint out of range ({a}, {b})")));
                }
                let segment = if toks[4] == "-" {
                    None
                } else {
                    Some(
                        toks[4]
                            .parse::<u8>()
                            .map_err(|_| bad(line_no, "bad segment id"))?,
                    )
                };
                let kind = match toks[5] {
                    "internal" => EdgeKind::Internal,
                    "surface" => EdgeKind::Surface,
                    other => return Err(bad(line_no, format!("unknown edge kind `{other}`"))),
                };
                file.lattice.edges.push(LatticeEdge {
                    a,
                    b,
                    radius: parse_f64(toks[3], line_no)?,
                    segment,
                    kind,
                });
            }
            "C" => {
                if toks.len() < 9 || (toks.len() - 3) % 3 != 0 {
                    return Err(bad(line_no, "C needs kind, radius and >= 2 points"));
                }
                let kind = match toks[1] {
                    "rod" => ChannelKind::Rod,
                    "fiber" => ChannelKind::Fiber,
                    other => return Err(bad(line_no, format!("unknown channel kind `{other}`"))),
                };
                let radius = parse_f64(toks[2], line_no)?;
                let axis = toks[3..]
                    .chunks(3)
                    .map(|c| {
                        Ok(Point3::new(
                            parse_f64(c[0], line_no)?,
                            parse_f64(c[1], line_no)?,
                            parse_f64(c[2], line_no)?,
                        ))
                    })
                    .collect::<Result<Vec<_>, LatticeError>>()?;
                file.channels.push(Channel { axis, radius, kind });
            }
            "F" => {
                if toks.len() != 3 {
                    return Err(bad(line_no, "F needs id and fingerprint"));
                }
                file.fibers.push(FiberPath {
                    id: parse_usize(toks[1], line_no)?,
                    waypoints: Vec::new(),
                    attachments: Vec::new(),
                    lattice_fingerprint: u64::from_str_radix(toks[2], 16)
                        .map_err(|_| bad(line_no, "bad fiber fingerprint"))?,
                });
            }
            "FW" => {
                if toks.len() < 4 || (toks.len() - 4) % 2 != 0 {
                    return Err(bad(line_no, "FW needs a point and (node, weight) pairs"));
                }
                let fiber = file
                    .fibers
                    .last_mut()
                    .ok_or_else(|| bad(line_no, "FW before any F line"))?;
                fiber.waypoints.push(Point3::new(
                    parse_f64(toks[1], line_no)?,
                    parse_f64(toks[2], line_no)?,
                    parse_f64(toks[3], line_no)?,
                ));
                let at = toks[4..]
                    .chunks(2)
                    .map(|c| Ok((parse_usize(c[0], line_no)?, parse_f64(c[1], line_no)?)))
                    .collect::<Result<Vec<_>, LatticeError>>()?;
                fiber.attachments.push(at);
            }
            other => return Err(bad(line_no, format!("unknown record `{other}`"))),
        }
    }

    if !saw_header {
        return Err(LatticeError::Format("missing format header".into()));
    }
    if let Some(fp) = header_fingerprint {
        if fp != file.lattice.fingerprint() {
            return Err(LatticeError::ProvenanceMismatch);
        }
    }
    for f in &file.fibers {
        for at in &f.attachments {
            for &(id, _) in at {
                if id >= file.lattice.nodes.len() {
                    return Err(LatticeError::Format(format!(
                        "fiber {} attachment node {id} out of range",
                        f.id
                    )));
                }
            }
        }
    }
    Ok(file)
}

pub fn read_lattice_file(path: &Path) -> Result<LatticeFile, LatticeError> {
    read_lattice_string(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_cell_map, WarpProfile, WingPlanform};
    use crate::lattice::fibers::{default_stations, route_fibers};
    use crate::lattice::{generate_bcc, tag_anchors, GradingField};

    fn sample() -> LatticeFile {
        let p = WingPlanform::reference();
        let map = build_cell_map(&p, 6, 12, 3, &WarpProfile::identity()).unwrap();
        let mut l = generate_bcc(&map, &GradingField::new(1.2, 0.6, 0.6).unwrap()).unwrap();
        let qc = p.quarter_chord_x(0.0);
        tag_anchors(
            &mut l,
            &Point3::new(qc, -5.0, 0.0),
            &Point3::new(qc, 255.0, 0.0),
            6.0,
            p.span,
        );
        let fibers = route_fibers(&l, &map, &default_stations(), 0.4).unwrap();
        let rod = Channel::new(
            vec![Point3::new(qc, -5.0, 0.0), Point3::new(qc, 255.0, 0.0)],
            1.5,
            ChannelKind::Rod,
        );
        LatticeFile {
            lattice: l,
            channels: vec![rod],
            fibers,
        }
    }

    #[test]
    fn roundtrip_is_lossless_and_byte_stable() {
        let file = sample();
        let text = write_lattice_string(&file);
        let back = read_lattice_string(&text).unwrap();
        assert_eq!(back.lattice.nodes.len(), file.lattice.nodes.len());
        assert_eq!(back.lattice.edges.len(), file.lattice.edges.len());
        assert_eq!(back.lattice.fingerprint(), file.lattice.fingerprint());
        assert_eq!(back.channels.len(), 1);
        assert_eq!(back.fibers.len(), file.fibers.len());
        for (a, b) in back.fibers.iter().zip(&file.fibers) {
            assert_eq!(a.waypoints.len(), b.waypoints.len());
            assert_eq!(a.attachments, b.attachments);
        }
        let again = write_lattice_string(&back);
        assert_eq!(text, again);
    }

    #[test]
    fn node_tags_roundtrip() {
        let file = sample();
        let back = read_lattice_string(&write_lattice_string(&file)).unwrap();
        for (a, b) in back.lattice.nodes.iter().zip(&file.lattice.nodes) {
            assert_eq!(a.tags, b.tags);
        }
        assert!(back
            .lattice
            .nodes
            .iter()
            .any(|n| n.tags.contains(NodeTags::TIP_ANCHOR)));
    }

    #[test]
    fn corrupt_fingerprint_detected() {
        let file = sample();
        let text = write_lattice_string(&file);
        // Perturb one node coordinate but keep the header fingerprint.
        let tampered = text.replacen("N ", "N 1000 1000 1000 -\nN ", 1);
        assert!(matches!(
            read_lattice_string(&tampered),
            Err(LatticeError::ProvenanceMismatch) | Err(LatticeError::Format(_))
        ));
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(read_lattice_string("N 1 2 3 -").is_err()); // no header
        let hdr = "# morphwing lattice 1\n";
        assert!(read_lattice_string(&format!("{hdr}X 1 2")).is_err());
        assert!(read_lattice_string(&format!("{hdr}N 1 2 3 bogus")).is_err());
        assert!(read_lattice_string(&format!("{hdr}N 0 0 0 -\nE 0 5 1.0 - internal")).is_err());
        assert!(read_lattice_string(&format!("{hdr}FW 0 0 0")).is_err());
    }
}
