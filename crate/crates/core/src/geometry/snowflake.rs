use serde::{Deserialize, Serialize};

use super::{Point2, Polygon};
use crate::error::{Error, Result};

/// Koch snowflake of scale `eta`: each edge becomes four edges with ratios
/// `r1, r2, r2, r1`, the middle pair forming an outward equilateral bump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnowflakeSpec {
    pub eta: f64,
    pub depth: u32,
    pub side: f64,
}

impl SnowflakeSpec {
    pub fn new(eta: f64, depth: u32) -> Self {
        Self { eta, depth, side: 1.0 }
    }

    pub fn with_side(mut self, side: f64) -> Self {
        self.side = side;
        self
    }

    pub fn r1(&self) -> f64 {
        (self.eta - 1.0) / (2.0 * self.eta)
    }

    pub fn r2(&self) -> f64 {
        1.0 / self.eta
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta > 1.0) {
            return Err(Error::invalid(format!("eta = {} must exceed 1", self.eta)));
        }
        if !(self.side.is_finite() && self.side > 0.0) {
            return Err(Error::invalid(format!("side = {} must be positive", self.side)));
        }
        if self.depth > 12 {
            return Err(Error::invalid(format!("depth {} exceeds 12", self.depth)));
        }
        Ok(())
    }

    pub fn edge_count(&self) -> usize {
        3 * 4usize.pow(self.depth)
    }

    pub fn perimeter(&self) -> f64 {
        3.0 * self.side * ((self.eta + 1.0) / self.eta).powi(self.depth as i32)
    }

    pub fn smallest_edge(&self) -> f64 {
        self.side * self.r1().min(self.r2()).powi(self.depth as i32)
    }
}

/// Vertices of the base triangle: centered at the origin, one vertex up,
/// counterclockwise.
pub(crate) fn base_triangle(side: f64) -> [Point2; 3] {
    let r = side / 3f64.sqrt();
    let h = side / 2.0;
    [Point2::new(0.0, r), Point2::new(-h, -r / 2.0), Point2::new(h, -r / 2.0)]
}

/// One refinement of the edge `a -> b`, pushing `a` and the three new
/// interior vertices.
#[inline]
pub(crate) fn refine_edge(a: Point2, b: Point2, r1: f64, r2: f64, out: &mut Vec<Point2>) {
    let d = b.sub(a);
    let p1 = a.add(d.scale(r1));
    let p2 = b.sub(d.scale(r1));
    let h = 0.5 * 3f64.sqrt() * r2;
    let apex = Point2::new(0.5 * (p1.x + p2.x) + h * d.y, 0.5 * (p1.y + p2.y) - h * d.x);
    out.extend_from_slice(&[a, p1, apex, p2]);
}

pub(crate) fn snowflake_vertices(spec: &SnowflakeSpec) -> Vec<Point2> {
    let (r1, r2) = (spec.r1(), spec.r2());
    let mut v: Vec<Point2> = base_triangle(spec.side).to_vec();
    for _ in 0..spec.depth {
        let n = v.len();
        let mut next = Vec::with_capacity(4 * n);
        for i in 0..n {
            refine_edge(v[i], v[(i + 1) % n], r1, r2, &mut next);
        }
        v = next;
    }
    v
}

/// Builds the depth-`depth` snowflake polygon. Small `eta` can produce a
/// self-intersecting curve, reported with the first failing depth.
pub fn build_snowflake(spec: &SnowflakeSpec) -> Result<Polygon> {
    spec.validate()?;
    let verts = snowflake_vertices(spec);
    let poly = Polygon::assemble(verts, None)?;
    if poly.index.first_intersection(poly.vertices()).is_some() {
        let first_bad = (1..=spec.depth)
            .find(|&d| {
                let s = SnowflakeSpec { depth: d, ..*spec };
                let p = Polygon::assemble(snowflake_vertices(&s), None);
                p.map(|p| p.index.first_intersection(p.vertices()).is_some())
                    .unwrap_or(true)
            })
            .unwrap_or(spec.depth);
        return Err(Error::SelfIntersection {
            eta: spec.eta,
            depth: first_bad,
        });
    }
    Ok(poly.with_feature_scale(spec.smallest_edge()))
}

/// Exact area from the geometric series of added bumps.
pub fn snowflake_area(spec: &SnowflakeSpec) -> f64 {
    let (r1, r2) = (spec.r1(), spec.r2());
    let s2 = spec.side * spec.side;
    let q = 2.0 * r1 * r1 + 2.0 * r2 * r2;
    let mut added = 0.0;
    let mut pow = 1.0;
    for _ in 0..spec.depth {
        added += 3.0 * s2 * pow;
        pow *= q;
    }
    3f64.sqrt() / 4.0 * (s2 + r2 * r2 * added)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn classical_koch(depth: u32) -> Vec<Point2> {
        // Complex-number construction with four equal thirds.
        let (c, s) = (
            (-std::f64::consts::FRAC_PI_3).cos(),
            (-std::f64::consts::FRAC_PI_3).sin(),
        );
        let mut v = base_triangle(1.0).to_vec();
        for _ in 0..depth {
            let n = v.len();
            let mut out = Vec::with_capacity(4 * n);
            for i in 0..n {
                let (a, b) = (v[i], v[(i + 1) % n]);
                let d = b.sub(a).scale(1.0 / 3.0);
                let p1 = a.add(d);
                let rot = Point2::new(d.x * c - d.y * s, d.x * s + d.y * c);
                out.extend_from_slice(&[a, p1, p1.add(rot), a.add(d.scale(2.0))]);
            }
            v = out;
        }
        v
    }

    #[test]
    fn base_cases() {
        let p = build_snowflake(&SnowflakeSpec::new(3.0, 0)).unwrap();
        assert_eq!(p.len(), 3);
        assert!((p.perimeter() - 3.0).abs() < 1e-14);
        let p = build_snowflake(&SnowflakeSpec::new(3.0, 1)).unwrap();
        assert_eq!(p.len(), 12);
        for (a, b) in p.edges() {
            assert!((a.dist(b) - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!((p.perimeter() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn eta_five_depth_two() {
        let spec = SnowflakeSpec::new(5.0, 2);
        let p = build_snowflake(&spec).unwrap();
        assert_eq!(p.len(), 48);
        assert!((p.perimeter() - 4.32).abs() < 1e-13);
        let (r1, r2) = (0.4, 0.2);
        let mut lens: Vec<f64> = p.edges().map(|(a, b)| a.dist(b)).collect();
        lens.sort_by(|a, b| a.total_cmp(b));
        let mut expect: Vec<f64> = [r1 * r1, r1 * r2, r2 * r1, r2 * r2]
            .iter()
            .flat_map(|&l| std::iter::repeat_n(l, 12))
            .collect();
        expect.sort_by(|a, b| a.total_cmp(b));
        for (a, b) in lens.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn matches_classical_koch() {
        for d in 0..=6 {
            let p = build_snowflake(&SnowflakeSpec::new(3.0, d)).unwrap();
            let q = classical_koch(d);
            assert_eq!(p.len(), q.len());
            for (a, b) in p.vertices().iter().zip(&q) {
                assert!(a.dist(*b) < 1e-12);
            }
        }
    }

    #[test]
    fn area_closed_form_eta_three() {
        for k in 0..=6 {
            let spec = SnowflakeSpec::new(3.0, k);
            let p = build_snowflake(&spec).unwrap();
            let closed = 3f64.sqrt() / 4.0 * (1.6 - 0.6 * (4.0f64 / 9.0).powi(k as i32));
            assert!((p.area() - closed).abs() < 1e-10);
            assert!((snowflake_area(&spec) - closed).abs() < 1e-14);
        }
        let limit = 2.0 * 3f64.sqrt() / 5.0;
        assert!((snowflake_area(&SnowflakeSpec::new(3.0, 40)) - limit).abs() < 1e-12);
    }

    #[test]
    fn small_eta_self_intersects() {
        match build_snowflake(&SnowflakeSpec::new(1.2, 3)) {
            Err(Error::SelfIntersection { depth, .. }) => assert!((1..=3).contains(&depth)),
            other => panic!("expected self-intersection, got {other:?}"),
        }
        assert!(build_snowflake(&SnowflakeSpec::new(1.0, 1)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn edge_count_perimeter_area(eta in 3.0f64..20.0, depth in 0u32..5, side in 0.1f64..3.0) {
            let spec = SnowflakeSpec::new(eta, depth).with_side(side);
            let p = build_snowflake(&spec).unwrap();
            prop_assert_eq!(p.len(), spec.edge_count());
            prop_assert!((p.perimeter() - spec.perimeter()).abs() <= 1e-12 * spec.perimeter());
            prop_assert!((p.area() - snowflake_area(&spec)).abs() <= 1e-12 * p.area());
        }
    }
}
