//! Deterministic kernel integrals: `Var X_N(Ω)`, `Cov(X_N(Ω₁), X_N(Ω₂))`
//! and `Var X_N(φ)` for a smooth bump.

use std::cmp::Ordering;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use faer::c64;

use super::weights::{gaussian_tails, kernel_ratio, poisson_split};
use crate::error::{Error, Result};
use crate::geometry::{triangulate, Point2, Polygon};
use crate::numerics::quad::{
    adaptive, adaptive_triangles, gauss_laguerre, gauss_legendre, CubatureOptions, CubatureResult, Tolerance, TriRule,
    Triangle,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelQuadrature {
    /// Relative tolerance of the outer cubature over `Ω`.
    pub rel: f64,
    pub abs: f64,
    pub max_evals: usize,
}

impl Default for KernelQuadrature {
    fn default() -> Self {
        Self {
            rel: 1e-9,
            abs: 1e-13,
            max_evals: 50_000_000,
        }
    }
}

impl KernelQuadrature {
    pub fn with_rel(mut self, rel: f64) -> Self {
        self.rel = rel;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelIntegral {
    pub value: f64,
    /// Cubature error estimate.
    pub error: f64,
    pub evals: usize,
    /// Bound on `∫∫ |W_N - G_N|` over the region; the gaussian path is taken
    /// when it is negligible.
    pub truncation_bound: f64,
    pub direct: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Covariance {
    /// Signed covariance (nonpositive for disjoint sets).
    pub value: f64,
    pub error: f64,
    /// `|Cov| / √N`.
    pub normalized: f64,
    pub direct: bool,
}

/// Pointwise bound on `|W_N(x, y) - G_N(x, y)|` for `|x|, |y| ≤ λ < 1`.
pub fn truncation_bound(n: usize, lambda: f64) -> f64 {
    let a = lambda * lambda;
    let nf = n as f64;
    let ratio = a * nf / (nf + 1.0);
    if ratio >= 1.0 {
        return f64::INFINITY;
    }
    if a == 0.0 {
        return 0.0;
    }
    let b = (nf * (nf * a).ln() - ln_gamma(nf + 1.0) - nf * a).exp() / (1.0 - ratio);
    let c = nf / PI;
    c * c * (2.0 * b + b * b)
}

/// Absolute threshold below which the truncation correction is dropped.
const TRUNCATION_NEGLIGIBLE: f64 = 1e-14;

fn require_inside_unit_disk(poly: &Polygon) -> Result<f64> {
    let lambda = poly.max_radius();
    if lambda >= 1.0 {
        return Err(Error::invalid(format!(
            "polygon reaches radius {lambda}; kernel integrals need it inside the unit disk"
        )));
    }
    Ok(lambda)
}

fn outer_options(n: usize, quad: &KernelQuadrature) -> CubatureOptions {
    CubatureOptions {
        rel: quad.rel,
        abs: quad.abs,
        max_initial_diameter: 6.0 / (n as f64).sqrt(),
        max_evals: quad.max_evals,
    }
}

/// Largest `N` for the finite-rank moment expansion.
pub const MOMENT_MAX_N: usize = 256;

fn refine(base: &[Triangle], h: f64) -> Vec<Triangle> {
    let mut out = Vec::new();
    let mut stack: Vec<Triangle> = base.to_vec();
    while let Some(t) = stack.pop() {
        if t.diameter() > h {
            stack.extend(t.split());
        } else {
            out.push(t);
        }
    }
    out
}

/// `B_{mk} = ∫ p_m(x) conj(p_k(x)) e^{-N|x|²} dx` over the triangles, with
/// `p_m(x) = (√N x)^m / √(m!)`; row-major, upper triangle filled.
fn moments_on(n: usize, tris: &[Triangle], rule: &TriRule) -> Vec<c64> {
    use rayon::prelude::*;
    let sn = (n as f64).sqrt();
    let chunks: Vec<Vec<c64>> = tris
        .par_chunks(32)
        .map(|chunk| {
            let mut acc = vec![c64::new(0.0, 0.0); n * n];
            let mut p = vec![c64::new(0.0, 0.0); n];
            for t in chunk {
                let area = t.area();
                for (l, w) in rule.nodes.iter().zip(&rule.weights) {
                    let q = t.point(*l);
                    let z = c64::new(sn * q[0], sn * q[1]);
                    // Split e^{-N|x|²} evenly between the two factors.
                    p[0] = c64::new((-0.5 * z.norm_sqr()).exp(), 0.0);
                    for m in 1..n {
                        p[m] = p[m - 1] * z / (m as f64).sqrt();
                    }
                    let wt = w * area;
                    for m in 0..n {
                        let pm = p[m] * wt;
                        let row = &mut acc[m * n..(m + 1) * n];
                        for k in m..n {
                            row[k] += pm * p[k].conj();
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let mut out = vec![c64::new(0.0, 0.0); n * n];
    for c in chunks {
        for (o, v) in out.iter_mut().zip(c) {
            *o += v;
        }
    }
    out
}

/// `Σ_{m,k} B¹_{mk} conj(B²_{mk})` from upper triangles of Hermitian arrays.
fn hermitian_inner(n: usize, a: &[c64], b: &[c64]) -> f64 {
    let mut s = 0.0;
    for m in 0..n {
        s += (a[m * n + m] * b[m * n + m].conj()).re;
        for k in m + 1..n {
            s += 2.0 * (a[m * n + k] * b[m * n + k].conj()).re;
        }
    }
    s
}

/// Refines a uniform mesh until `value` changes by less than the tolerance
/// between successive levels.
fn converge_moments<F>(n: usize, quad: &KernelQuadrature, mut value: F) -> Result<(f64, f64, usize)>
where
    F: FnMut(f64, &TriRule) -> (f64, usize),
{
    if n > MOMENT_MAX_N {
        return Err(Error::Quadrature(format!(
            "kernel truncation is not negligible and N = {n} exceeds the moment expansion limit {MOMENT_MAX_N}; \
             shrink the polygon away from the unit circle"
        )));
    }
    let rule = TriRule::duffy(8);
    let mut h = (2.0 / (n as f64).sqrt()).min(0.25);
    let mut prev: Option<f64> = None;
    let mut evals = 0;
    for _ in 0..8 {
        let (v, e) = value(h, &rule);
        evals += e;
        if evals > quad.max_evals {
            break;
        }
        if let Some(p) = prev {
            let err = (v - p).abs();
            if err <= quad.abs.max(quad.rel * v.abs()) {
                return Ok((v, err, evals));
            }
        }
        prev = Some(v);
        h *= 0.5;
    }
    Err(Error::Quadrature(format!(
        "moment expansion did not converge (N = {n})"
    )))
}

/// A failed inner quadrature surfaces as NaN; the outer cubature turns it
/// into an error.
fn check_finite(r: Result<CubatureResult>) -> Result<CubatureResult> {
    let r = r?;
    if !r.value.is_finite() {
        return Err(Error::Quadrature("inner integral did not converge".into()));
    }
    Ok(r)
}

/// `Var X_N(Ω) = ∫_Ω ∫_{Ω^c} W_N(x, y) dy dx`.
///
/// The inner integral is `ρ₁(x) - ∫_Ω W_N(x, ·)`. When the truncation bound
/// is negligible it is evaluated as `-(N/π) P(N, N|x|²) + ∫_{Ω^c} G_N(x, ·)`
/// with the complement mass from exact edge wedges. Otherwise the rank-`N`
/// structure of `K_N` reduces everything to the moments `B_mk`.
pub fn kernel_variance_exact(n: usize, poly: &Polygon, quad: &KernelQuadrature) -> Result<KernelIntegral> {
    if n == 0 {
        return Err(Error::invalid("N must be at least 1"));
    }
    let lambda = require_inside_unit_disk(poly)?;
    let tris = triangulate(poly);
    let bound = truncation_bound(n, lambda) * poly.area() * poly.area();
    let direct = bound > TRUNCATION_NEGLIGIBLE;
    let nf = n as f64;
    let c = nf / PI;
    if direct {
        // Var = (N/π) Σ_m B_mm - (N/π)² Σ_{m,k} |B_mk|².
        let (value, error, evals) = converge_moments(n, quad, |h, rule| {
            let t = refine(&tris, h);
            let b = moments_on(n, &t, rule);
            let trace: f64 = (0..n).map(|m| b[m * n + m].re).sum();
            (
                c * trace - c * c * hermitian_inner(n, &b, &b),
                t.len() * rule.weights.len(),
            )
        })?;
        return Ok(KernelIntegral {
            value,
            error,
            evals,
            truncation_bound: bound,
            direct,
        });
    }
    let r = {
        adaptive_triangles(
            &tris,
            |x| {
                let x = Point2::new(x[0], x[1]);
                let p = poisson_split(n, nf * x.dot(x)).0;
                match gaussian_tails(n, poly, x) {
                    Ok(t) => c * c * t - c * p,
                    Err(_) => f64::NAN,
                }
            },
            outer_options(n, quad),
        )
    };
    let r = check_finite(r)?;
    Ok(KernelIntegral {
        value: r.value,
        error: r.error,
        evals: r.evals,
        truncation_bound: bound,
        direct,
    })
}

fn lexicographic(a: &Polygon, b: &Polygon) -> Ordering {
    let key = |p: &Polygon| p.vertices().iter().flat_map(|v| [v.x, v.y]).collect::<Vec<f64>>();
    let (ka, kb) = (key(a), key(b));
    for (x, y) in ka.iter().zip(&kb) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    ka.len().cmp(&kb.len())
}

/// `Cov(X_N(Ω₁), X_N(Ω₂)) = -∫_{Ω₁} ∫_{Ω₂} W_N` for sets with disjoint
/// interiors. The pair is put in a canonical order first so the result is
/// symmetric in its arguments.
pub fn covariance_two_sets(n: usize, p1: &Polygon, p2: &Polygon, quad: &KernelQuadrature) -> Result<Covariance> {
    if n == 0 {
        return Err(Error::invalid("N must be at least 1"));
    }
    if p1.interiors_overlap(p2) {
        return Err(Error::OverlappingPolygons);
    }
    let (a, b) = if lexicographic(p1, p2) == Ordering::Greater {
        (p2, p1)
    } else {
        (p1, p2)
    };
    let lambda = require_inside_unit_disk(a)?.max(require_inside_unit_disk(b)?);
    let bound = truncation_bound(n, lambda) * a.area() * b.area();
    let direct = bound > TRUNCATION_NEGLIGIBLE;
    let c = n as f64 / PI;
    let ta = triangulate(a);
    if direct {
        let tb = triangulate(b);
        let (value, error, _) = converge_moments(n, quad, |h, rule| {
            let (t1, t2) = (refine(&ta, h), refine(&tb, h));
            let (b1, b2) = (moments_on(n, &t1, rule), moments_on(n, &t2, rule));
            (
                -c * c * hermitian_inner(n, &b1, &b2),
                (t1.len() + t2.len()) * rule.weights.len(),
            )
        })?;
        return Ok(Covariance {
            value,
            error,
            normalized: value.abs() / (n as f64).sqrt(),
            direct,
        });
    }
    let r = {
        // From outside Ω₂ the signed tails are minus its gaussian mass.
        adaptive_triangles(
            &ta,
            |x| match gaussian_tails(n, b, Point2::new(x[0], x[1])) {
                Ok(t) => c * c * t,
                Err(_) => f64::NAN,
            },
            outer_options(n, quad),
        )
    };
    let r = check_finite(r)?;
    Ok(Covariance {
        value: r.value,
        error: r.error,
        normalized: r.value.abs() / (n as f64).sqrt(),
        direct,
    })
}

/// Bump `φ(x) = A exp(1 - 1/(1 - |x - c|²/ρ²))` on `|x - c| < ρ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Point2,
    pub radius: f64,
    pub amplitude: f64,
}

impl Bump {
    pub fn new(center: Point2, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::invalid("bump radius must be positive"));
        }
        let reach = center.norm() + radius;
        if reach >= 1.0 {
            return Err(Error::SupportTouchesUnitCircle { reach });
        }
        Ok(Self {
            center,
            radius,
            amplitude: 1.0,
        })
    }

    pub fn scaled(mut self, a: f64) -> Self {
        self.amplitude *= a;
        self
    }

    /// Radial profile at `u = |x - c|/ρ`.
    pub fn profile(u: f64) -> f64 {
        if u >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - u * u)).exp()
        }
    }

    pub fn value(&self, x: Point2) -> f64 {
        self.amplitude * Self::profile(x.dist(self.center) / self.radius)
    }

    /// `∫|∇φ|²`, by adaptive quadrature of the radial profile.
    pub fn dirichlet_energy(&self) -> Result<f64> {
        let f = |u: f64| {
            if u >= 1.0 {
                return 0.0;
            }
            let d = 1.0 - u * u;
            let g = Self::profile(u) * 2.0 * u / (d * d);
            g * g * u
        };
        let i = adaptive(f, 0.0, 1.0, Tolerance::rel(1e-13).with_abs(1e-300))?;
        Ok(self.amplitude * self.amplitude * 2.0 * PI * i)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SobolevQuadrature {
    /// Gauss-Laguerre nodes in `s = N r²`.
    pub laguerre: usize,
    /// Trapezoid nodes in the inner angle.
    pub inner_angles: usize,
    /// Gauss-Legendre nodes per radial panel of the outer disk.
    pub radial: usize,
    pub outer_angles: usize,
}

impl Default for SobolevQuadrature {
    fn default() -> Self {
        Self {
            laguerre: 48,
            inner_angles: 32,
            radial: 48,
            outer_angles: 48,
        }
    }
}

/// `Var X_N(φ) = ½ ∬ |φ(x) - φ(y)|² W_N(x, y) dx dy`.
///
/// Inner: `y = x + r e^{iθ}` with Gauss-Laguerre in `s = N r²` against
/// `e^{-s}` and a periodic trapezoid in `θ`. Outer: polar Gauss-Legendre
/// over `B(c, ρ + sqrt(45/N))` split at `ρ`.
pub fn bump_variance(n: usize, bump: &Bump, q: &SobolevQuadrature) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("N must be at least 1"));
    }
    let nf = n as f64;
    let lag = gauss_laguerre(q.laguerre);
    let leg = gauss_legendre(q.radial);
    let rho = bump.radius;
    let outer = rho + (45.0 / nf).sqrt();
    let dth_in = 2.0 * PI / q.inner_angles as f64;
    let dth_out = 2.0 * PI / q.outer_angles as f64;
    let c2 = (nf / PI).powi(2);
    let inner = |x: Point2| -> f64 {
        let fx = bump.value(x);
        let mut acc = 0.0;
        for (s, w) in lag.nodes.iter().zip(&lag.weights) {
            let r = (s / nf).sqrt();
            let mut ring = 0.0;
            for k in 0..q.inner_angles {
                let th = (k as f64 + 0.5) * dth_in;
                let y = Point2::new(x.x + r * th.cos(), x.y + r * th.sin());
                let d = fx - bump.value(y);
                if d != 0.0 {
                    // W e^{s} = (N/π)² W/G; the e^{-s} factor is carried by the rule.
                    ring += d * d * kernel_ratio(n, x, y);
                }
            }
            acc += w * ring * c2 * dth_in / (2.0 * nf);
        }
        acc
    };
    let panels = [(0.0, rho), (rho, outer)];
    let mut rows: Vec<(f64, f64)> = Vec::new();
    for &(a, b) in &panels {
        for (t, w) in leg.nodes.iter().zip(&leg.weights) {
            rows.push((0.5 * (a + b) + 0.5 * (b - a) * t, 0.5 * (b - a) * w));
        }
    }
    use rayon::prelude::*;
    let parts: Vec<f64> = rows
        .par_iter()
        .map(|&(r, w)| {
            let mut ring = 0.0;
            for k in 0..q.outer_angles {
                let th = (k as f64 + 0.5) * dth_out;
                let x = Point2::new(bump.center.x + r * th.cos(), bump.center.y + r * th.sin());
                ring += inner(x);
            }
            w * r * ring * dth_out
        })
        .collect();
    Ok(0.5 * crate::numerics::stats::neumaier_sum(parts))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolevTable {
    pub center: Point2,
    pub radius: f64,
    pub n_grid: Vec<usize>,
    pub variances: Vec<f64>,
    /// `|V_{k+1} - V_k|`.
    pub gaps: Vec<f64>,
    /// `gap_k / gap_{k+1}`.
    pub shrink: Vec<f64>,
    /// `(1/4π) ∫|∇φ|²`.
    pub target: f64,
    /// `2 V_last - V_prev` (first-order extrapolation for doubling `N`).
    pub extrapolated: Option<f64>,
}

impl SobolevTable {
    pub fn gaps_shrink(&self) -> bool {
        self.shrink.iter().all(|&s| s > 1.0)
    }
}

pub fn sobolev_variance_check(center: Point2, radius: f64, n_grid: &[usize]) -> Result<SobolevTable> {
    if n_grid.is_empty() || n_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("N grid must be nonempty and increasing"));
    }
    let bump = Bump::new(center, radius)?;
    let q = SobolevQuadrature::default();
    let variances = n_grid
        .iter()
        .map(|&n| bump_variance(n, &bump, &q))
        .collect::<Result<Vec<_>>>()?;
    let gaps: Vec<f64> = variances.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let shrink = gaps.windows(2).map(|g| g[0] / g[1]).collect();
    let extrapolated = (variances.len() >= 2).then(|| {
        let k = variances.len();
        2.0 * variances[k - 1] - variances[k - 2]
    });
    Ok(SobolevTable {
        center,
        radius,
        n_grid: n_grid.to_vec(),
        variances,
        gaps,
        shrink,
        target: bump.dirichlet_energy()? / (4.0 * PI),
        extrapolated,
    })
}
