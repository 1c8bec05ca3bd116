//! 3D Euler–Bernoulli frame element: circular section properties, local
//! 12x12 stiffness and local-to-global rotation.

use nalgebra::{Matrix3, Point3, SMatrix, Vector3};

pub type ElementMatrix = SMatrix<f64, 12, 12>;

/// Area, bending inertia and torsion constant of a solid circular section.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Section {
    pub area: f64,
    pub inertia: f64,
    pub torsion: f64,
}

impl Section {
    pub fn circular(radius: f64) -> Self {
        let r2 = radius * radius;
        let i = std::f64::consts::PI * r2 * r2 / 4.0;
        Self {
            area: std::f64::consts::PI * r2,
            inertia: i,
            torsion: 2.0 * i,
        }
    }
}

/// Local stiffness with the element x axis along the beam. DOF order per
/// node: (ux, uy, uz, rx, ry, rz).
pub fn local_stiffness(e: f64, g: f64, s: &Section, l: f64) -> ElementMatrix {
    let mut k = ElementMatrix::zeros();
    let (a, i, j) = (s.area, s.inertia, s.torsion);
    let l2 = l * l;
    let l3 = l2 * l;

    // Axial.
    let ka = e * a / l;
    for (p, q, v) in [(0, 0, ka), (0, 6, -ka), (6, 6, ka)] {
        k[(p, q)] = v;
        k[(q, p)] = v;
    }
    // Torsion.
    let kt = g * j / l;
    for (p, q, v) in [(3, 3, kt), (3, 9, -kt), (9, 9, kt)] {
        k[(p, q)] = v;
        k[(q, p)] = v;
    }
    // Bending in the x-y plane (uy, rz).
    let b = e * i;
    let pairs = [
        (1, 1, 12.0 * b / l3),
        (1, 5, 6.0 * b / l2),
        (1, 7, -12.0 * b / l3),
        (1, 11, 6.0 * b / l2),
        (5, 5, 4.0 * b / l),
        (5, 7, -6.0 * b / l2),
        (5, 11, 2.0 * b / l),
        (7, 7, 12.0 * b / l3),
        (7, 11, -6.0 * b / l2),
        (11, 11, 4.0 * b / l),
    ];
    for (p, q, v) in pairs {
        k[(p, q)] = v;
        k[(q, p)] = v;
    }
    // Bending in the x-z plane (uz, ry); mirrored signs.
    let pairs = [
        (2, 2, 12.0 * b / l3),
        (2, 4, -6.0 * b / l2),
        (2, 8, -12.0 * b / l3),
        (2, 10, -6.0 * b / l2),
        (4, 4, 4.0 * b / l),
        (4, 8, 6.0 * b / l2),
        (4, 10, 2.0 * b / l),
        (8, 8, 12.0 * b / l3),
        (8, 10, 6.0 * b / l2),
        (10, 10, 4.0 * b / l),
    ];
    for (p, q, v) in pairs {
        k[(p, q)] = v;
        k[(q, p)] = v;
    }
    k
}

/// Rotation whose rows are the element's local axes in global coordinates.
pub fn element_rotation(pa: &Point3<f64>, pb: &Point3<f64>) -> Matrix3<f64> {
    let ex = (pb - pa).normalize();
    // Reference vector: global z, or global x when the beam is near-vertical.
    let r = if ex.z.abs() > 0.9 {
        Vector3::x()
    } else {
        Vector3::z()
    };
    let ey = r.cross(&ex).normalize();
    let ez = ex.cross(&ey);
    Matrix3::from_rows(&[ex.transpose(), ey.transpose(), ez.transpose()])
}

/// Global element stiffness T^T K_local T.
pub fn global_stiffness(
    pa: &Point3<f64>,
    pb: &Point3<f64>,
    e: f64,
    g: f64,
    s: &Section,
) -> ElementMatrix {
    let l = (pb - pa).norm();
    let kl = local_stiffness(e, g, s, l);
    let r = element_rotation(pa, pb);
    let mut t = ElementMatrix::zeros();
    for blk in 0..4 {
        t.fixed_view_mut::<3, 3>(3 * blk, 3 * blk).copy_from(&r);
    }
    t.transpose() * kl * t
}
