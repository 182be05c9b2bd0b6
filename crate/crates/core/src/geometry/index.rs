//! Edge indices: horizontal bands for ray casting and an R-tree for
//! distance queries.

use rstar::primitives::{GeomWithData, Line};
use rstar::{PointDistance, RTree, RTreeObject, AABB};

use super::{segment_distance2, segments_intersect, BBox, Point2, BOUNDARY_EPS};

type Seg = GeomWithData<Line<[f64; 2]>, u32>;

#[derive(Debug)]
pub(crate) struct EdgeIndex {
    y0: f64,
    inv_h: f64,
    /// CSR layout: edges overlapping band `k` are `edges[start[k]..start[k+1]]`.
    start: Vec<u32>,
    edges: Vec<u32>,
    tree: RTree<Seg>,
}

impl EdgeIndex {
    pub(crate) fn build(v: &[Point2], bbox: &BBox) -> Self {
        let n = v.len();
        let bands = (n / 2).clamp(1, 1 << 20);
        let pad = 2.0 * BOUNDARY_EPS;
        let y0 = bbox.min.y - pad;
        let h = (bbox.height() + 2.0 * pad) / bands as f64;
        let inv_h = 1.0 / h;
        let band = |y: f64| (((y - y0) * inv_h).floor().max(0.0) as usize).min(bands - 1);
        let range = |i: usize| {
            let (a, b) = (v[i], v[(i + 1) % n]);
            let lo = band(a.y.min(b.y) - pad);
            let hi = band(a.y.max(b.y) + pad);
            (lo, hi)
        };
        let mut count = vec![0u32; bands + 1];
        for i in 0..n {
            let (lo, hi) = range(i);
            for k in lo..=hi {
                count[k + 1] += 1;
            }
        }
        for k in 0..bands {
            count[k + 1] += count[k];
        }
        let mut fill = count.clone();
        let mut edges = vec![0u32; count[bands] as usize];
        for i in 0..n {
            let (lo, hi) = range(i);
            for k in lo..=hi {
                edges[fill[k] as usize] = i as u32;
                fill[k] += 1;
            }
        }
        let segs: Vec<Seg> = (0..n)
            .map(|i| {
                let (a, b) = (v[i], v[(i + 1) % n]);
                GeomWithData::new(Line::new(a.to_array(), b.to_array()), i as u32)
            })
            .collect();
        EdgeIndex {
            y0,
            inv_h,
            start: count,
            edges,
            tree: RTree::bulk_load(segs),
        }
    }

    #[inline]
    pub(crate) fn contains(&self, v: &[Point2], p: Point2) -> bool {
        let bands = self.start.len() - 1;
        let k = (p.y - self.y0) * self.inv_h;
        if !(k >= 0.0 && k < bands as f64) {
            return false;
        }
        let k = k as usize;
        let n = v.len();
        let mut inside = false;
        for &e in &self.edges[self.start[k] as usize..self.start[k + 1] as usize] {
            let e = e as usize;
            let (a, b) = (v[e], v[(e + 1) % n]);
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if x > p.x {
                    inside = !inside;
                }
            }
            if p.x >= a.x.min(b.x) - BOUNDARY_EPS
                && p.x <= a.x.max(b.x) + BOUNDARY_EPS
                && segment_distance2(p, a, b) <= BOUNDARY_EPS * BOUNDARY_EPS
            {
                return true;
            }
        }
        inside
    }

    pub(crate) fn nearest(&self, p: Point2) -> (usize, f64) {
        let q = p.to_array();
        let s = self.tree.nearest_neighbor(&q).expect("nonempty polygon");
        (s.data as usize, s.distance_2(&q))
    }

    #[inline]
    pub(crate) fn within(&self, p: Point2, t: f64) -> bool {
        self.tree
            .locate_within_distance(p.to_array(), t * t)
            .any(|s| s.distance_2(&p.to_array()) < t * t)
    }

    pub(crate) fn edges_within(&self, p: Point2, r: f64) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .tree
            .locate_within_distance(p.to_array(), r * r)
            .map(|s| s.data as usize)
            .collect();
        out.sort_unstable();
        out
    }

    pub(crate) fn edges_near_segment(&self, a: Point2, b: Point2) -> Vec<usize> {
        let env = AABB::from_corners([a.x.min(b.x), a.y.min(b.y)], [a.x.max(b.x), a.y.max(b.y)]);
        self.tree
            .locate_in_envelope_intersecting(&env)
            .map(|s| s.data as usize)
            .collect()
    }

    /// First pair of non-adjacent edges that intersect, or adjacent edges
    /// that fold back onto each other.
    pub(crate) fn first_intersection(&self, v: &[Point2]) -> Option<(usize, usize)> {
        let n = v.len();
        let mut hits: Vec<(usize, usize)> = Vec::new();
        for s in self.tree.iter() {
            let i = s.data as usize;
            let (a, b) = (v[i], v[(i + 1) % n]);
            let c = v[(i + 2) % n];
            let (d1, d2) = (b.sub(a), c.sub(b));
            if d1.cross(d2) == 0.0 && d1.dot(d2) < 0.0 {
                hits.push((i, (i + 1) % n));
                continue;
            }
            for o in self.tree.locate_in_envelope_intersecting(&s.envelope()) {
                let j = o.data as usize;
                if j <= i || j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                let (c, d) = (v[j], v[(j + 1) % n]);
                if segments_intersect(a, b, c, d) {
                    hits.push((i, j));
                }
            }
        }
        hits.into_iter().min()
    }
}
