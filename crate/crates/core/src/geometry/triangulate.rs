use super::{Point2, Polygon};
use crate::numerics::quad::Triangle;

/// Triangulation of the polygon. Polygons star-shaped about their centroid
/// are fanned from it; others are ear-clipped.
pub fn triangulate(poly: &Polygon) -> Vec<Triangle> {
    let v = poly.vertices();
    let n = v.len();
    let c = poly.centroid();
    let star = (0..n).all(|i| v[i].sub(c).cross(v[(i + 1) % n].sub(c)) > 0.0);
    if star {
        return (0..n)
            .map(|i| Triangle([c.to_array(), v[i].to_array(), v[(i + 1) % n].to_array()]))
            .collect();
    }
    ear_clip(v)
}

fn ear_clip(v: &[Point2]) -> Vec<Triangle> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    let mut out = Vec::with_capacity(v.len().saturating_sub(2));
    let inside = |p: Point2, a: Point2, b: Point2, c: Point2| {
        b.sub(a).cross(p.sub(a)) >= 0.0 && c.sub(b).cross(p.sub(b)) >= 0.0 && a.sub(c).cross(p.sub(c)) >= 0.0
    };
    let mut guard = 0;
    while idx.len() > 3 && guard < 4 * v.len() * v.len() {
        guard += 1;
        let m = idx.len();
        let mut clipped = false;
        for k in 0..m {
            let (ia, ib, ic) = (idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]);
            let (a, b, c) = (v[ia], v[ib], v[ic]);
            if b.sub(a).cross(c.sub(b)) <= 0.0 {
                continue;
            }
            let blocked = idx
                .iter()
                .any(|&j| j != ia && j != ib && j != ic && inside(v[j], a, b, c));
            if !blocked {
                out.push(Triangle([a.to_array(), b.to_array(), c.to_array()]));
                idx.remove(k);
                clipped = true;
                break;
            }
        }
        if !clipped {
            break;
        }
    }
    if idx.len() == 3 {
        out.push(Triangle([
            v[idx[0]].to_array(),
            v[idx[1]].to_array(),
            v[idx[2]].to_array(),
        ]));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_snowflake, regular_polygon, SnowflakeSpec};

    fn total_area(t: &[Triangle]) -> f64 {
        t.iter().map(|t| t.area()).sum()
    }

    #[test]
    fn fan_for_convex() {
        let p = regular_polygon(64, 0.5, Point2::new(0.1, 0.0)).unwrap();
        let t = triangulate(&p);
        assert_eq!(t.len(), 64);
        assert!((total_area(&t) - p.area()).abs() < 1e-14);
    }

    #[test]
    fn ear_clip_for_snowflake() {
        let p = build_snowflake(&SnowflakeSpec::new(3.0, 3)).unwrap();
        let t = ear_clip(p.vertices());
        assert_eq!(t.len(), p.len() - 2);
        assert!((total_area(&t) - p.area()).abs() < 1e-12);
        assert!((total_area(&triangulate(&p)) - p.area()).abs() < 1e-12);
    }
}
