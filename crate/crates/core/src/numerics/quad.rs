//! Quadrature rules: Gauss-Legendre and Gauss-Laguerre nodes, adaptive
//! Gauss-Kronrod on intervals, and adaptive cubature on triangles.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use faer::{Mat, Side};
use rayon::prelude::*;

use super::stats::neumaier_sum;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Family {
    Legendre,
    Laguerre,
}

fn cache() -> &'static Mutex<HashMap<(Family, usize), Arc<Rule>>> {
    static C: OnceLock<Mutex<HashMap<(Family, usize), Arc<Rule>>>> = OnceLock::new();
    C.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Golub-Welsch: nodes are eigenvalues of the Jacobi matrix, weights come
/// from the first eigenvector components.
fn golub_welsch(diag: &[f64], off: &[f64], mu0: f64) -> Rule {
    let n = diag.len();
    let j = Mat::<f64>::from_fn(n, n, |i, k| {
        if i == k {
            diag[i]
        } else if i == k + 1 {
            off[k]
        } else if k == i + 1 {
            off[i]
        } else {
            0.0
        }
    });
    let evd = j
        .self_adjoint_eigen(Side::Lower)
        .expect("symmetric tridiagonal eigensolver");
    let s = evd.S().column_vector();
    let u = evd.U();
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        nodes.push(s[i]);
        weights.push(mu0 * u[(0, i)] * u[(0, i)]);
    }
    Rule { nodes, weights }
}

fn cached(family: Family, n: usize) -> Arc<Rule> {
    assert!(n >= 1, "rule needs at least one node");
    if let Some(r) = cache().lock().unwrap().get(&(family, n)) {
        return r.clone();
    }
    let rule = match family {
        Family::Legendre => {
            let diag = vec![0.0; n];
            let off: Vec<f64> = (1..n)
                .map(|k| {
                    let k = k as f64;
                    k / (4.0 * k * k - 1.0).sqrt()
                })
                .collect();
            let mut r = golub_welsch(&diag, &off, 2.0);
            // Symmetrize to remove eigensolver round-off.
            for i in 0..n / 2 {
                let j = n - 1 - i;
                let x = 0.5 * (r.nodes[j] - r.nodes[i]);
                let w = 0.5 * (r.weights[i] + r.weights[j]);
                r.nodes[i] = -x;
                r.nodes[j] = x;
                r.weights[i] = w;
                r.weights[j] = w;
            }
            if n % 2 == 1 {
                r.nodes[n / 2] = 0.0;
            }
            r
        }
        Family::Laguerre => {
            let diag: Vec<f64> = (0..n).map(|k| 2.0 * k as f64 + 1.0).collect();
            let off: Vec<f64> = (1..n).map(|k| k as f64).collect();
            golub_welsch(&diag, &off, 1.0)
        }
    };
    let rule = Arc::new(rule);
    cache().lock().unwrap().insert((family, n), rule.clone());
    rule
}

/// Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> Arc<Rule> {
    cached(Family::Legendre, n)
}

/// Gauss-Laguerre rule for `∫_0^∞ e^{-x} f(x) dx`.
pub fn gauss_laguerre(n: usize) -> Arc<Rule> {
    cached(Family::Laguerre, n)
}

/// Fixed Gauss-Legendre integral of `f` over `[a, b]`.
pub fn gl_integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let r = gauss_legendre(n);
    let h = 0.5 * (b - a);
    let m = 0.5 * (a + b);
    h * r
        .nodes
        .iter()
        .zip(&r.weights)
        .map(|(x, w)| w * f(m + h * x))
        .sum::<f64>()
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod panel: returns (estimate, error estimate).
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        rk += WGK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    (rk * h, ((rk - rg) * h).abs())
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_panels: usize,
}

impl Tolerance {
    pub fn rel(rel: f64) -> Self {
        Self {
            rel,
            abs: 0.0,
            max_panels: 4000,
        }
    }

    pub fn with_abs(mut self, abs: f64) -> Self {
        self.abs = abs;
        self
    }

    fn met(&self, value: f64, err: f64) -> bool {
        err <= self.abs.max(self.rel * value.abs())
    }
}

struct Panel<T> {
    err: f64,
    value: f64,
    region: T,
}

impl<T> PartialEq for Panel<T> {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl<T> Eq for Panel<T> {}
impl<T> PartialOrd for Panel<T> {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl<T> Ord for Panel<T> {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// Globally adaptive Gauss-Kronrod integration on a finite interval.
pub fn adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let mut heap = BinaryHeap::new();
    let (v, e) = gk15(&f, a, b);
    heap.push(Panel {
        err: e,
        value: v,
        region: (a, b),
    });
    let mut total = v;
    let mut err = e;
    let mut panels = 1;
    while !tol.met(total, err) {
        if panels >= tol.max_panels {
            return Err(Error::Quadrature(format!(
                "interval [{a}, {b}]: error {err:.3e} after {panels} panels"
            )));
        }
        let p = heap.pop().unwrap();
        let (lo, hi) = p.region;
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        total += v1 + v2 - p.value;
        err += e1 + e2 - p.err;
        heap.push(Panel {
            err: e1,
            value: v1,
            region: (lo, mid),
        });
        heap.push(Panel {
            err: e2,
            value: v2,
            region: (mid, hi),
        });
        panels += 1;
        if !total.is_finite() {
            return Err(Error::Quadrature("non-finite integrand".into()));
        }
    }
    let mut leaves: Vec<_> = heap.into_vec();
    leaves.sort_by(|p, q| p.region.0.total_cmp(&q.region.0));
    Ok(neumaier_sum(leaves.iter().map(|p| p.value)))
}

/// `∫_a^∞ f`, via the map `x = a + (1 - s) / s`.
pub fn adaptive_to_inf<F: Fn(f64) -> f64>(f: F, a: f64, tol: Tolerance) -> Result<f64> {
    adaptive(
        |s| {
            let x = a + (1.0 - s) / s;
            let v = f(x) / (s * s);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        tol,
    )
}

pub type P2 = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle(pub [P2; 3]);

impl Triangle {
    pub fn area(&self) -> f64 {
        let [a, b, c] = self.0;
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs()
    }

    pub fn diameter(&self) -> f64 {
        let [a, b, c] = self.0;
        let d = |p: P2, q: P2| (p[0] - q[0]).hypot(p[1] - q[1]);
        d(a, b).max(d(b, c)).max(d(c, a))
    }

    pub fn point(&self, l: [f64; 3]) -> P2 {
        let [a, b, c] = self.0;
        [
            l[0] * a[0] + l[1] * b[0] + l[2] * c[0],
            l[0] * a[1] + l[1] * b[1] + l[2] * c[1],
        ]
    }

    /// Midpoint subdivision into four similar triangles.
    pub fn split(&self) -> [Triangle; 4] {
        let [a, b, c] = self.0;
        let m = |p: P2, q: P2| [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
        let (ab, bc, ca) = (m(a, b), m(b, c), m(c, a));
        [
            Triangle([a, ab, ca]),
            Triangle([ab, b, bc]),
            Triangle([ca, bc, c]),
            Triangle([ab, bc, ca]),
        ]
    }
}

/// Cubature rule on the reference triangle: barycentric nodes and weights
/// summing to one.
#[derive(Debug, Clone)]
pub struct TriRule {
    pub nodes: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl TriRule {
    /// Radon's 7-point rule, exact for degree 5.
    pub fn radon7() -> Self {
        let s = 15f64.sqrt();
        let a1 = (6.0 - s) / 21.0;
        let b1 = (9.0 + 2.0 * s) / 21.0;
        let a2 = (6.0 + s) / 21.0;
        let b2 = (9.0 - 2.0 * s) / 21.0;
        let w1 = (155.0 - s) / 1200.0;
        let w2 = (155.0 + s) / 1200.0;
        let t = 1.0 / 3.0;
        TriRule {
            nodes: vec![
                [t, t, t],
                [a1, a1, b1],
                [a1, b1, a1],
                [b1, a1, a1],
                [a2, a2, b2],
                [a2, b2, a2],
                [b2, a2, a2],
            ],
            weights: vec![9.0 / 40.0, w1, w1, w1, w2, w2, w2],
        }
    }

    /// Collapsed (Duffy) tensor Gauss-Legendre rule with `n * n` nodes.
    pub fn duffy(n: usize) -> Self {
        let g = gauss_legendre(n);
        let mut nodes = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for (xu, wu) in g.nodes.iter().zip(&g.weights) {
            let u = 0.5 * (xu + 1.0);
            for (xv, wv) in g.nodes.iter().zip(&g.weights) {
                let v = 0.5 * (xv + 1.0);
                nodes.push([u, (1.0 - u) * v, (1.0 - u) * (1.0 - v)]);
                weights.push(0.5 * wu * wv * (1.0 - u));
            }
        }
        TriRule { nodes, weights }
    }

    pub fn apply<F: Fn(P2) -> f64>(&self, t: &Triangle, f: &F) -> f64 {
        let s: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(l, w)| w * f(t.point(*l)))
            .sum();
        s * t.area()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CubatureOptions {
    pub rel: f64,
    pub abs: f64,
    /// Initial triangles are split until their diameter is at most this.
    pub max_initial_diameter: f64,
    pub max_evals: usize,
}

impl Default for CubatureOptions {
    fn default() -> Self {
        Self {
            rel: 1e-8,
            abs: 0.0,
            max_initial_diameter: f64::INFINITY,
            max_evals: 20_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CubatureResult {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

/// Globally adaptive cubature over a union of triangles. Each region is
/// estimated by the sum of the 7-point rule over its four children; the error
/// is the difference from the rule on the parent. Refinement proceeds in
/// deterministic batches, evaluated in parallel.
pub fn adaptive_triangles<F>(tris: &[Triangle], f: F, opts: CubatureOptions) -> Result<CubatureResult>
where
    F: Fn(P2) -> f64 + Sync,
{
    let rule = TriRule::radon7();
    let mut init = Vec::new();
    let mut stack: Vec<Triangle> = tris.to_vec();
    while let Some(t) = stack.pop() {
        if t.diameter() > opts.max_initial_diameter {
            stack.extend(t.split());
        } else {
            init.push(t);
        }
    }
    let eval = |t: &Triangle| -> Panel<Triangle> {
        let coarse = rule.apply(t, &f);
        let fine: f64 = t.split().iter().map(|c| rule.apply(c, &f)).sum();
        Panel {
            err: (fine - coarse).abs(),
            value: fine,
            region: *t,
        }
    };
    let per_region = 35;
    let mut evals = init.len() * per_region;
    if evals > opts.max_evals {
        return Err(Error::Quadrature(format!(
            "initial mesh needs {evals} evaluations, budget {}",
            opts.max_evals
        )));
    }
    let first: Vec<Panel<Triangle>> = init.par_iter().map(eval).collect();
    let mut total: f64 = first.iter().map(|p| p.value).sum();
    let mut err: f64 = first.iter().map(|p| p.err).sum();
    let mut heap: BinaryHeap<Panel<Triangle>> = first.into_iter().collect();
    while err > opts.abs.max(opts.rel * total.abs()) {
        let batch = (heap.len() / 8).clamp(1, 256);
        if evals + 4 * batch * per_region > opts.max_evals {
            return Err(Error::Quadrature(format!(
                "cubature error {err:.3e} on value {total:.6e} after {evals} evaluations"
            )));
        }
        let parents: Vec<Panel<Triangle>> = (0..batch).filter_map(|_| heap.pop()).collect();
        let kids: Vec<Triangle> = parents.iter().flat_map(|p| p.region.split()).collect();
        let children: Vec<Panel<Triangle>> = kids.par_iter().map(eval).collect();
        evals += children.len() * per_region;
        for p in &parents {
            total -= p.value;
            err -= p.err;
        }
        for c in children {
            total += c.value;
            err += c.err;
            heap.push(c);
        }
        if !total.is_finite() {
            return Err(Error::Quadrature("non-finite integrand".into()));
        }
    }
    let mut leaves = heap.into_vec();
    leaves.sort_by(|p, q| {
        let a = p.region.0[0];
        let b = q.region.0[0];
        a[0].total_cmp(&b[0])
            .then(a[1].total_cmp(&b[1]))
            .then(p.region.area().total_cmp(&q.region.area()))
    });
    let value = neumaier_sum(leaves.iter().map(|p| p.value));
    let error = leaves.iter().map(|p| p.err).sum();
    Ok(CubatureResult { value, error, evals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn legendre_integrates_polynomials() {
        let r = gauss_legendre(10);
        let s: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(18)).sum();
        assert!((s - 2.0 / 19.0).abs() < 1e-14);
        assert!((r.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn laguerre_integrates_moments() {
        let r = gauss_laguerre(20);
        // ∫ x^k e^{-x} = k!
        let s: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(7)).sum();
        assert!((s / 5040.0 - 1.0).abs() < 1e-11);
    }

    #[test]
    fn adaptive_handles_peaks() {
        let v = adaptive(|x| 1.0 / (1e-4 + x * x), -1.0, 1.0, Tolerance::rel(1e-12)).unwrap();
        let exact = 2.0 * (1.0f64 / 1e-2).atan() / 1e-2;
        assert!((v / exact - 1.0).abs() < 1e-11);
    }

    #[test]
    fn adaptive_to_infinity() {
        let v = adaptive_to_inf(|x| (-x * x).exp(), 0.0, Tolerance::rel(1e-12)).unwrap();
        assert!((v - PI.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn adaptive_reports_budget() {
        let t = Tolerance {
            rel: 1e-15,
            abs: 0.0,
            max_panels: 3,
        };
        assert!(matches!(
            adaptive(|x: f64| x.abs().sqrt(), -1.0, 2.0, t),
            Err(Error::Quadrature(_))
        ));
    }

    #[test]
    fn radon_is_degree_five() {
        let t = Triangle([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        let r = TriRule::radon7();
        // ∫ x^a y^b over the unit simplex = a! b! / (a + b + 2)!
        let v = r.apply(&t, &|p| p[0].powi(2) * p[1].powi(3));
        assert!((v - 2.0 * 6.0 / 5040.0).abs() < 1e-15);
        let d = TriRule::duffy(6);
        let v = d.apply(&t, &|p| p[0].powi(4) * p[1].powi(5));
        assert!((v - 24.0 * 120.0 / 39916800.0).abs() < 1e-16);
    }

    #[test]
    fn adaptive_cubature_of_boundary_layer() {
        let sq = [
            Triangle([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]]),
            Triangle([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0]]),
        ];
        let n = 400.0_f64;
        let f = |p: P2| (-n * p[0] * p[0]).exp();
        let opts = CubatureOptions {
            rel: 1e-9,
            max_initial_diameter: 0.2,
            ..Default::default()
        };
        let r = adaptive_triangles(&sq, f, opts).unwrap();
        let exact = 0.5 * (PI / n).sqrt() * statrs::function::erf::erf(n.sqrt());
        assert!((r.value / exact - 1.0).abs() < 1e-8, "{} vs {exact}", r.value);
    }
}
