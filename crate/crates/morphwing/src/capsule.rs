//! Distance primitives for beam capsules (segment + radius).

use nalgebra::Point3;

/// Distance from `p` to the segment `a`-`b`.
pub fn point_segment_distance(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Minimum distance between segments `p0`-`p1` and `q0`-`q1`.
pub fn segment_segment_distance(
    p0: &Point3<f64>,
    p1: &Point3<f64>,
    q0: &Point3<f64>,
    q1: &Point3<f64>,
) -> f64 {
    let d1 = p1 - p0;
    let d2 = q1 - q0;
    let r = p0 - q0;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);

    let (mut s, mut t);
    if a <= f64::EPSILON && e <= f64::EPSILON {
        return (p0 - q0).norm();
    }
    if a <= f64::EPSILON {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= f64::EPSILON {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            s = if denom != 0.0 {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            t = (b * s + f) / e;
            if t < 0.0 {
                t = 0.0;
                s = (-c / a).clamp(0.0, 1.0);
            } else if t > 1.0 {
                t = 1.0;
                s = ((b - c) / a).clamp(0.0, 1.0);
            }
        }
    }
    let cp = p0 + d1 * s;
    let cq = q0 + d2 * t;
    (cp - cq).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn point_to_segment() {
        let a = Point3::new(0.0, 0.0, 0.0);
        let b = Point3::new(10.0, 0.0, 0.0);
        assert_relative_eq!(
            point_segment_distance(&Point3::new(5.0, 3.0, 0.0), &a, &b),
            3.0
        );
        assert_relative_eq!(
            point_segment_distance(&Point3::new(-4.0, 3.0, 0.0), &a, &b),
            5.0
        );
    }

    #[test]
    fn crossing_segments() {
        let d = segment_segment_distance(
            &Point3::new(-1.0, 0.0, 0.0),
            &Point3::new(1.0, 0.0, 0.0),
            &Point3::new(0.0, -1.0, 1.0),
            &Point3::new(0.0, 1.0, 1.0),
        );
        assert_relative_eq!(d, 1.0);
    }

    #[test]
    fn parallel_segments() {
        let d = segment_segment_distance(
            &Point3::new(0.0, 0.0, 0.0),
            &Point3::new(1.0, 0.0, 0.0),
            &Point3::new(3.0, 4.0, 0.0),
            &Point3::new(4.0, 4.0, 0.0),
        );
        assert_relative_eq!(d, (4.0f64 * 4.0 + 2.0 * 2.0).sqrt());
    }
}
