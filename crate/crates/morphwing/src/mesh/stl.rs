//! Binary STL: 80-byte header, u32 triangle count, then per triangle a
//! float32 normal, three float32 vertices and a zero attribute word.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{Point3, Vector3};

use super::{MeshError, TriMesh};

pub const STL_HEADER_BYTES: u64 = 84;
pub const STL_TRIANGLE_BYTES: u64 = 50;

pub fn write_stl(path: &Path, mesh: &TriMesh) -> Result<(), MeshError> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    let mut header = [0u8; 80];
    let tag = b"morphwing binary stl";
    header[..tag.len()].copy_from_slice(tag);
    w.write_all(&header)?;
    w.write_all(&(mesh.triangles.len() as u32).to_le_bytes())?;

    for t in &mesh.triangles {
        let a = mesh.vertices[t[0] as usize];
        let b = mesh.vertices[t[1] as usize];
        let c = mesh.vertices[t[2] as usize];
        let n = (b - a).cross(&(c - a));
        let n = if n.norm() > 0.0 {
            n.normalize()
        } else {
            Vector3::zeros()
        };
        for v in [n.x, n.y, n.z] {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
        for p in [a, b, c] {
            for v in [p.x, p.y, p.z] {
                w.write_all(&(v as f32).to_le_bytes())?;
            }
        }
        w.write_all(&[0u8; 2])?;
    }
    w.flush()?;
    Ok(())
}

/// Read a binary STL into a soup mesh (no vertex sharing).
pub fn read_stl(path: &Path) -> Result<TriMesh, MeshError> {
    let file = File::open(path)?;
    let mut r = BufReader::new(file);
    let mut header = [0u8; 80];
    r.read_exact(&mut header)
        .map_err(|_| MeshError::BadStl("short header".into()))?;
    let mut count_buf = [0u8; 4];
    r.read_exact(&mut count_buf)
        .map_err(|_| MeshError::BadStl("missing triangle count".into()))?;
    let count = u32::from_le_bytes(count_buf) as usize;

    let mut mesh = TriMesh::default();
    let mut tri = [0u8; 50];
    for i in 0..count {
        r.read_exact(&mut tri)
            .map_err(|_| MeshError::BadStl(format!("truncated at triangle {i}")))?;
        let f = |off: usize| {
            f32::from_le_bytes([tri[off], tri[off + 1], tri[off + 2], tri[off + 3]]) as f64
        };
        let base = mesh.vertices.len() as u32;
        for v in 0..3 {
            let off = 12 + 12 * v;
            mesh.vertices.push(Point3::new(f(off), f(off + 4), f(off + 8)));
        }
        mesh.triangles.push([base, base + 1, base + 2]);
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(MeshError::BadStl(format!(
            "{} trailing bytes after {count} triangles",
            rest.len()
        )));
    }
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::tests::unit_cube;
    use approx::assert_relative_eq;

    #[test]
    fn file_size_formula() {
        let dir = tempfile::tempdir().unwrap();
        let cube = dir.path().join("cube.stl");
        write_stl(&cube, &unit_cube()).unwrap();
        let size = std::fs::metadata(&cube).unwrap().len();
        assert_eq!(size, STL_HEADER_BYTES + 12 * STL_TRIANGLE_BYTES);
        assert_eq!(size, 684);

        let empty = dir.path().join("empty.stl");
        write_stl(&empty, &TriMesh::default()).unwrap();
        assert_eq!(std::fs::metadata(&empty).unwrap().len(), 84);
    }

    #[test]
    fn roundtrip_preserves_geometry() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cube.stl");
        let cube = unit_cube();
        write_stl(&path, &cube).unwrap();
        let back = read_stl(&path).unwrap();
        assert_eq!(back.triangles.len(), cube.triangles.len());
        assert_relative_eq!(back.signed_volume(), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn truncated_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.stl");
        let cube = unit_cube();
        write_stl(&path, &cube).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 10]).unwrap();
        assert!(matches!(read_stl(&path), Err(MeshError::BadStl(_))));
        std::fs::write(&path, [bytes.clone(), vec![0u8; 7]].concat()).unwrap();
        assert!(matches!(read_stl(&path), Err(MeshError::BadStl(_))));
    }
}
