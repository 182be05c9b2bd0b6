//! Radial two-point kernels `J(|z|)` and their moments `∫ J(z) |z|^γ dz`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::{Mutex, OnceLock};

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::numerics::quad::{adaptive, Tolerance};
use crate::rng::Rng;

/// Below this radius the gef kernel is evaluated from its power series.
pub const GEF_SWITCH: f64 = 0.5;

/// The gef kernel is treated as zero beyond this radius (`|J| < 1e-30`).
const GEF_RMAX: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    Exponential,
    BallIndicator { radius: f64 },
    Gef,
}

/// Which part of a kernel a sampler or moment refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Whole,
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialKernel {
    pub family: Family,
    /// Ambient dimension.
    pub n: u32,
    /// Constant multiplier applied to the family's profile.
    pub scale: f64,
}

impl RadialKernel {
    pub fn new(family: Family, n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("ambient dimension must be positive"));
        }
        if let Family::BallIndicator { radius } = family {
            if !(radius.is_finite() && radius > 0.0) {
                return Err(Error::invalid(format!("ball radius {radius} must be positive")));
            }
        }
        Ok(Self { family, n, scale: 1.0 })
    }

    pub fn gaussian() -> Self {
        Self::new(Family::Gaussian, 2).unwrap()
    }

    pub fn exponential() -> Self {
        Self::new(Family::Exponential, 2).unwrap()
    }

    pub fn ball(radius: f64) -> Result<Self> {
        Self::new(Family::BallIndicator { radius }, 2)
    }

    pub fn gef() -> Self {
        Self::new(Family::Gef, 2).unwrap()
    }

    pub fn with_dimension(mut self, n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("ambient dimension must be positive"));
        }
        self.n = n;
        Ok(self)
    }

    pub fn scaled(mut self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::invalid(format!("kernel scale {c} must be positive")));
        }
        self.scale *= c;
        Ok(self)
    }

    pub fn is_nonnegative(&self) -> bool {
        !matches!(self.family, Family::Gef)
    }

    /// `J(r)`, rejecting negative or non-finite radii.
    pub fn eval(&self, r: f64) -> Result<f64> {
        if !r.is_finite() {
            return Err(Error::NonFinite("kernel radius"));
        }
        if r < 0.0 {
            return Err(Error::invalid(format!("kernel radius {r} is negative")));
        }
        Ok(self.value(r))
    }

    /// Unchecked evaluation for hot loops; `r` must be finite and nonnegative.
    #[inline]
    pub fn value(&self, r: f64) -> f64 {
        self.scale
            * match self.family {
                Family::Gaussian => (-r * r).exp(),
                Family::Exponential => (-r).exp(),
                Family::BallIndicator { radius } => {
                    if r <= radius {
                        1.0
                    } else {
                        0.0
                    }
                }
                Family::Gef => gef(r),
            }
    }

    /// Value of the requested part: `max(J, 0)` or `max(-J, 0)`.
    #[inline]
    pub fn part_value(&self, part: Part, r: f64) -> f64 {
        let v = self.value(r);
        match part {
            Part::Whole => v,
            Part::Positive => v.max(0.0),
            Part::Negative => (-v).max(0.0),
        }
    }

    fn surface(&self) -> f64 {
        let n = self.n as f64;
        2.0 * PI.powf(n / 2.0) / gamma(n / 2.0)
    }

    fn check_gamma(&self, g: f64) -> Result<()> {
        if !(g.is_finite() && (0.0..=self.n as f64).contains(&g)) {
            return Err(Error::invalid(format!("moment order {g} outside [0, {}]", self.n)));
        }
        Ok(())
    }

    /// `∫ J(z) |z|^γ dz` over ℝⁿ, signed for gef.
    pub fn moment(&self, gamma_: f64) -> Result<f64> {
        let (p, m) = self.split_moment(gamma_)?;
        Ok(p - m)
    }

    /// Moments of the positive and negative parts. Nonnegative families have
    /// a zero negative part.
    pub fn split_moment(&self, g: f64) -> Result<(f64, f64)> {
        self.check_gamma(g)?;
        let n = self.n as f64;
        let s = self.surface();
        let v = match self.family {
            Family::Gaussian => (s * gamma((n + g) / 2.0) / 2.0, 0.0),
            Family::Exponential => (s * gamma(n + g), 0.0),
            Family::BallIndicator { radius } => (s * radius.powf(n + g) / (n + g), 0.0),
            Family::Gef => {
                let (p, m) = gef_split_radial(self.n, g)?;
                (s * p, s * m)
            }
        };
        Ok((self.scale * v.0, self.scale * v.1))
    }

    /// Independent adaptive quadrature of `|S^{n-1}| ∫ J(r) r^{n-1+γ} dr`.
    pub fn moment_by_quadrature(&self, g: f64) -> Result<f64> {
        self.check_gamma(g)?;
        let p = self.n as f64 - 1.0 + g;
        let f = |r: f64| self.value(r) * r.powf(p);
        let tol = Tolerance::rel(1e-11);
        let radial = match self.family {
            Family::Gaussian => adaptive(f, 0.0, 3.0, tol)? + adaptive(f, 3.0, 12.0, tol)?,
            Family::Exponential => adaptive(f, 0.0, 10.0, tol)? + adaptive(f, 10.0, 80.0, tol)?,
            Family::BallIndicator { radius } => adaptive(f, 0.0, radius, tol)?,
            Family::Gef => adaptive(f, 0.0, 5.0, tol)? + adaptive(f, 5.0, GEF_RMAX, tol)?,
        };
        Ok(self.surface() * radial)
    }

    /// A certified pair `(c_J, a_J)` with `J(r) ≥ c_J` for `r ≤ a_J`.
    pub fn lower_bound_on_ball(&self) -> Result<(f64, f64)> {
        match self.family {
            Family::Gaussian | Family::Exponential => Ok(((-1.0f64).exp() * self.scale, 1.0)),
            Family::BallIndicator { radius } => Ok((self.scale, radius)),
            Family::Gef => Err(Error::SignChangingKernel {
                kernel: self.to_string(),
                what: "a lower bound on a ball",
            }),
        }
    }

    /// `∫_{|z| > R} |J(z)| dz` in the plane.
    pub fn tail_mass(&self, big_r: f64) -> Result<f64> {
        if self.n != 2 {
            return Err(Error::invalid("tail mass is implemented for n = 2"));
        }
        let r = big_r.max(0.0);
        let v = match self.family {
            Family::Gaussian => PI * (-r * r).exp(),
            Family::Exponential => 2.0 * PI * (1.0 + r) * (-r).exp(),
            Family::BallIndicator { radius } => {
                if r >= radius {
                    0.0
                } else {
                    PI * (radius * radius - r * r)
                }
            }
            Family::Gef => {
                if r >= GEF_RMAX {
                    0.0
                } else {
                    let f = |x: f64| gef(x).abs() * x;
                    2.0 * PI * adaptive(f, r, GEF_RMAX, Tolerance::rel(1e-8).with_abs(1e-16))?
                }
            }
        };
        Ok(self.scale * v)
    }

    /// Radius beyond which the planar tail mass is below `tail`.
    pub fn effective_radius(&self, tail: f64) -> Result<f64> {
        let (mut lo, mut hi) = (0.0, 1.0);
        while self.tail_mass(hi)? > tail {
            lo = hi;
            hi *= 2.0;
            if hi > 1e3 {
                return Err(Error::invalid("kernel tail does not decay"));
            }
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.tail_mass(mid)? > tail {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    }

    /// Planar sampler for `z` with weights `w` such that
    /// `E[w g(z)] = ∫ J_part(z) g(z) dz`.
    pub fn sampler(&self, part: Part) -> Result<RadialSampler> {
        if self.n != 2 {
            return Err(Error::invalid("samplers are implemented for n = 2"));
        }
        match (self.family, part) {
            (Family::Gef, Part::Whole) => Err(Error::SignChangingKernel {
                kernel: self.to_string(),
                what: "direct sampling",
            }),
            (Family::Gef, p) => Ok(RadialSampler::tabulated(self, p)),
            (_, Part::Negative) => Err(Error::invalid(format!("kernel {self} has no negative part"))),
            (f, _) => {
                let mass = self.moment(0.0)?;
                let kind = match f {
                    Family::Gaussian => SamplerKind::Gaussian,
                    Family::Exponential => SamplerKind::Exponential,
                    Family::BallIndicator { radius } => SamplerKind::Ball(radius),
                    Family::Gef => unreachable!(),
                };
                Ok(RadialSampler { kind, mass })
            }
        }
    }

    pub fn name(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for RadialKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Family::Gaussian => write!(f, "gaussian")?,
            Family::Exponential => write!(f, "exponential")?,
            Family::BallIndicator { radius } => write!(f, "ball:{radius}")?,
            Family::Gef => write!(f, "gef")?,
        }
        if self.scale != 1.0 {
            write!(f, "*{}", self.scale)?;
        }
        Ok(())
    }
}

impl FromStr for RadialKernel {
    type Err = Error;

    /// Accepts `gaussian`, `exponential`, `ball:<radius>` and `gef`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "gaussian" => Ok(Self::gaussian()),
            "exponential" => Ok(Self::exponential()),
            "gef" => Ok(Self::gef()),
            _ => {
                if let Some(r) = lower
                    .strip_prefix("ball:")
                    .or_else(|| lower.strip_prefix("ball_indicator:"))
                {
                    let radius: f64 = r
                        .parse()
                        .map_err(|_| Error::invalid(format!("bad ball radius `{r}`")))?;
                    Self::ball(radius)
                } else {
                    Err(Error::invalid(format!(
                        "unknown kernel `{s}`; expected gaussian, exponential, ball:<radius> or gef"
                    )))
                }
            }
        }
    }
}

const BERNOULLI_EVEN: [(f64, f64); 16] = [
    (1.0, 1.0),
    (1.0, 6.0),
    (-1.0, 30.0),
    (1.0, 42.0),
    (-1.0, 30.0),
    (5.0, 66.0),
    (-691.0, 2730.0),
    (7.0, 6.0),
    (-3617.0, 510.0),
    (43867.0, 798.0),
    (-174611.0, 330.0),
    (854513.0, 138.0),
    (-236364091.0, 2730.0),
    (8553103.0, 6.0),
    (-23749461029.0, 870.0),
    (8615841276005.0, 14322.0),
];

/// Coefficients `a_k` with `J(r) = -1 + Σ_{k≥1} a_k r^{2k-1}` near zero.
fn gef_series_coefficients() -> &'static [f64; 16] {
    static C: OnceLock<[f64; 16]> = OnceLock::new();
    C.get_or_init(|| {
        let mut a = [0.0; 16];
        let mut fact = 1.0; // (2k)!
        for (k, (num, den)) in BERNOULLI_EVEN.iter().enumerate() {
            if k > 0 {
                let kk = 2.0 * k as f64;
                fact *= kk * (kk - 1.0);
                // r coth r = Σ 2^{2k} B_{2k} r^{2k} / (2k)!
                let c = 4f64.powi(k as i32) * num / den / fact;
                a[k] = c * (2.0 * k as f64 + 1.0) * k as f64;
            }
        }
        a
    })
}

fn gef_series(r: f64) -> f64 {
    let a = gef_series_coefficients();
    let r2 = r * r;
    let mut acc = 0.0;
    for k in (1..16).rev() {
        acc = acc * r2 + a[k];
    }
    -1.0 + r * acc
}

fn gef_closed(r: f64) -> f64 {
    let q = (-2.0 * r).exp();
    let one_minus_q = -(-2.0 * r).exp_m1();
    let d = q / one_minus_q;
    2.0 * d - 8.0 * r * d / one_minus_q + 4.0 * r * r * d * (1.0 + q) / (one_minus_q * one_minus_q)
}

/// `(1/2) d²/dr² [r² (coth r - 1)]`.
pub fn gef(r: f64) -> f64 {
    if r < GEF_SWITCH {
        gef_series(r)
    } else if r > 700.0 {
        0.0
    } else {
        gef_closed(r)
    }
}

/// Evaluate both branches; exposed for consistency tests.
pub fn gef_branches(r: f64) -> (f64, f64) {
    (gef_series(r), gef_closed(r))
}

/// The unique sign change of the gef kernel.
pub fn gef_root() -> f64 {
    static R: OnceLock<f64> = OnceLock::new();
    *R.get_or_init(|| {
        let (mut lo, mut hi) = (0.0, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if gef(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    })
}

/// Radial integrals of `J_±(r) r^{n-1+γ}`, memoized.
fn gef_split_radial(n: u32, g: f64) -> Result<(f64, f64)> {
    type Memo = Mutex<HashMap<(u32, u64), (f64, f64)>>;
    static MEMO: OnceLock<Memo> = OnceLock::new();
    let memo = MEMO.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (n, g.to_bits());
    if let Some(v) = memo.lock().unwrap().get(&key) {
        return Ok(*v);
    }
    let p = n as f64 - 1.0 + g;
    let r0 = gef_root();
    let tol = Tolerance::rel(1e-11);
    let f = |r: f64| gef(r).abs() * r.powf(p);
    let neg = adaptive(f, 0.0, r0, tol)?;
    let pos = adaptive(f, r0, 5.0, tol)? + adaptive(f, 5.0, GEF_RMAX, tol)?;
    memo.lock().unwrap().insert(key, (pos, neg));
    Ok((pos, neg))
}

#[derive(Debug, Clone)]
enum SamplerKind {
    Gaussian,
    Exponential,
    Ball(f64),
    Tabulated(Box<Tabulated>),
}

#[derive(Debug, Clone)]
struct Tabulated {
    kernel: RadialKernel,
    part: Part,
    edges: Vec<f64>,
    density: Vec<f64>,
    cumulative: Vec<f64>,
    total: f64,
}

/// Draws planar displacements from a kernel (or one of its parts).
#[derive(Debug, Clone)]
pub struct RadialSampler {
    kind: SamplerKind,
    /// `‖J‖₁` for exact samplers; unused by tabulated ones.
    mass: f64,
}

impl RadialSampler {
    fn tabulated(kernel: &RadialKernel, part: Part) -> Self {
        let bins = 4000;
        let h = GEF_RMAX / bins as f64;
        let r0 = gef_root();
        let mut edges = Vec::with_capacity(bins + 1);
        let mut density = Vec::with_capacity(bins);
        for i in 0..=bins {
            edges.push(i as f64 * h);
        }
        for i in 0..bins {
            let (a, b) = (edges[i], edges[i + 1]);
            let mut m: f64 = 0.0;
            for j in 0..=8 {
                let r = a + (b - a) * j as f64 / 8.0;
                m = m.max(kernel.part_value(part, r) * r);
            }
            density.push(m);
        }
        let peak = density.iter().cloned().fold(0.0, f64::max);
        for i in 0..bins {
            let (a, b) = (edges[i], edges[i + 1]);
            let touches = match part {
                Part::Negative => a < r0,
                _ => b > r0,
            };
            if touches {
                density[i] = density[i].max(1e-9 * peak);
            }
        }
        let mut cumulative = Vec::with_capacity(bins);
        let mut acc = 0.0;
        for d in &density {
            acc += d * h;
            cumulative.push(acc);
        }
        RadialSampler {
            kind: SamplerKind::Tabulated(Box::new(Tabulated {
                kernel: *kernel,
                part,
                edges,
                density,
                cumulative,
                total: acc,
            })),
            mass: 0.0,
        }
    }

    /// Returns `(z, w)`.
    #[inline]
    pub fn sample(&self, rng: &mut Rng) -> ([f64; 2], f64) {
        let theta = 2.0 * PI * rng.random::<f64>();
        let (r, w) = match &self.kind {
            SamplerKind::Gaussian => {
                let u: f64 = 1.0 - rng.random::<f64>();
                ((-u.ln()).sqrt(), self.mass)
            }
            SamplerKind::Exponential => {
                let u1: f64 = 1.0 - rng.random::<f64>();
                let u2: f64 = 1.0 - rng.random::<f64>();
                (-(u1 * u2).ln(), self.mass)
            }
            SamplerKind::Ball(rho) => (rho * rng.random::<f64>().sqrt(), self.mass),
            SamplerKind::Tabulated(t) => {
                let u = rng.random::<f64>() * t.total;
                let i = t.cumulative.partition_point(|&c| c < u).min(t.density.len() - 1);
                let (a, b) = (t.edges[i], t.edges[i + 1]);
                let r = a + (b - a) * rng.random::<f64>();
                let q = t.density[i] / t.total;
                let w = 2.0 * PI * t.kernel.part_value(t.part, r) * r / q;
                (r, w)
            }
        };
        ([r * theta.cos(), r * theta.sin()], w)
    }

    /// `‖J_part‖₁` (exact for closed-form samplers, tabulated otherwise).
    pub fn mass(&self) -> f64 {
        match &self.kind {
            SamplerKind::Tabulated(t) => {
                let p = t.kernel.split_moment(0.0).unwrap_or((0.0, 0.0));
                match t.part {
                    Part::Negative => p.1,
                    _ => p.0,
                }
            }
            _ => self.mass,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Moments;
    use proptest::prelude::*;

    fn zeta(s: f64) -> f64 {
        // Direct sum with an Euler-Maclaurin tail.
        let m = 1000;
        let mut acc = 0.0;
        for k in 1..m {
            acc += (k as f64).powf(-s);
        }
        let mf = m as f64;
        acc + mf.powf(1.0 - s) / (s - 1.0) + 0.5 * mf.powf(-s) + s * mf.powf(-s - 1.0) / 12.0
    }

    fn g(r: f64) -> f64 {
        r * r * (1.0 / r.tanh() - 1.0)
    }

    #[test]
    fn trivial_values() {
        assert_eq!(RadialKernel::gaussian().eval(0.0).unwrap(), 1.0);
        assert_eq!(RadialKernel::ball(1.0).unwrap().eval(2.0).unwrap(), 0.0);
        assert!(RadialKernel::gaussian().eval(f64::NAN).is_err());
        assert!(RadialKernel::gaussian().eval(f64::INFINITY).is_err());
    }

    #[test]
    fn gef_matches_finite_difference() {
        // In f64 a three-point stencil at h = 1e-5 carries ~1e-5 relative
        // round-off, so the five-point stencil at h = 1e-3 is used instead.
        let h = 1e-3;
        let fd = 0.5 * (-g(1.0 + 2.0 * h) + 16.0 * g(1.0 + h) - 30.0 * g(1.0) + 16.0 * g(1.0 - h) - g(1.0 - 2.0 * h))
            / (12.0 * h * h);
        let v = RadialKernel::gef().eval(1.0).unwrap();
        assert!(((v - fd) / v).abs() < 1e-7, "{v} vs {fd}");
        let h = 1e-5;
        let fd3 = 0.5 * (g(1.0 + h) - 2.0 * g(1.0) + g(1.0 - h)) / (h * h);
        assert!(((v - fd3) / v).abs() < 5e-5);
    }

    #[test]
    fn gef_changes_sign() {
        let k = RadialKernel::gef();
        let vals: Vec<f64> = (0..1000).map(|i| k.value(i as f64 * 0.01)).collect();
        assert!(vals.iter().any(|v| *v < 0.0));
        assert!(vals.iter().any(|v| *v > 0.0));
        let r0 = gef_root();
        assert!(r0 > 0.0 && r0 < 10.0);
        assert!(k.value(r0 - 1e-6) < 0.0 && k.value(r0 + 1e-6) > 0.0);
    }

    #[test]
    fn gef_branches_agree_near_switch() {
        for i in 0..=40 {
            let r = 0.4 + 0.2 * i as f64 / 40.0;
            let (s, c) = gef_branches(r);
            assert!((s - c).abs() < 1e-9, "r = {r}: {s} vs {c}");
        }
    }

    #[test]
    fn gef_series_leading_terms() {
        let r: f64 = 0.01;
        let expect = -1.0 + r - 2.0 / 9.0 * r.powi(3) + 2.0 / 45.0 * r.powi(5);
        assert!((gef(r) - expect).abs() < 1e-15);
        assert_eq!(gef(0.0), -1.0);
    }

    #[test]
    fn closed_form_moments() {
        let k = RadialKernel::gaussian();
        assert!((k.moment(1.0).unwrap() - PI.powf(1.5) / 2.0).abs() < 1e-12);
        assert!((k.moment(0.0).unwrap() - PI).abs() < 1e-12);
        let b = RadialKernel::ball(1.0).unwrap();
        assert!((b.moment(0.0).unwrap() - PI).abs() < 1e-14);
        let e = RadialKernel::exponential();
        assert!((e.moment(0.0).unwrap() - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn gef_moments_match_zeta_formula() {
        let k = RadialKernel::gef();
        for gm in [0.5, 1.0, 1.5, 2.0] {
            let expect = 2.0 * PI * gm * (1.0 + gm) * gamma(gm + 2.0) * zeta(gm + 2.0) / 2f64.powf(gm + 2.0);
            let v = k.moment(gm).unwrap();
            assert!((v / expect - 1.0).abs() < 1e-8, "γ = {gm}: {v} vs {expect}");
        }
        assert!(k.moment(0.0).unwrap().abs() < 1e-9);
        assert!(k.moment(1.0).unwrap() > 0.0);
        let (p, m) = k.split_moment(1.0).unwrap();
        assert!(p > 0.0 && m > 0.0);
    }

    #[test]
    fn moment_rejects_bad_order() {
        let k = RadialKernel::gaussian();
        assert!(k.moment(-0.1).is_err());
        assert!(k.moment(2.1).is_err());
        assert!(k.moment(f64::NAN).is_err());
    }

    #[test]
    fn closed_forms_agree_with_quadrature() {
        for k in [
            RadialKernel::gaussian(),
            RadialKernel::exponential(),
            RadialKernel::ball(0.7).unwrap(),
            RadialKernel::gaussian().with_dimension(3).unwrap(),
            RadialKernel::exponential().with_dimension(1).unwrap(),
        ] {
            for gm in [0.0, 0.5, 1.0, 1.5, 2.0] {
                if gm > k.n as f64 {
                    continue;
                }
                let a = k.moment(gm).unwrap();
                let b = k.moment_by_quadrature(gm).unwrap();
                assert!((a / b - 1.0).abs() < 1e-6, "{k} n={} γ={gm}: {a} vs {b}", k.n);
            }
        }
    }

    #[test]
    fn lower_bounds() {
        let (c, a) = RadialKernel::gaussian().lower_bound_on_ball().unwrap();
        assert_eq!((c, a), ((-1.0f64).exp(), 1.0));
        assert!(RadialKernel::gaussian().value(a) >= c);
        assert_eq!(
            RadialKernel::ball(0.3).unwrap().lower_bound_on_ball().unwrap(),
            (1.0, 0.3)
        );
        assert!(matches!(
            RadialKernel::gef().lower_bound_on_ball(),
            Err(Error::SignChangingKernel { .. })
        ));
    }

    #[test]
    fn parse_names() {
        assert_eq!("gaussian".parse::<RadialKernel>().unwrap(), RadialKernel::gaussian());
        assert_eq!(
            "ball:0.5".parse::<RadialKernel>().unwrap(),
            RadialKernel::ball(0.5).unwrap()
        );
        assert_eq!("gef".parse::<RadialKernel>().unwrap(), RadialKernel::gef());
        assert!("ball:-1".parse::<RadialKernel>().is_err());
        assert!("cauchy".parse::<RadialKernel>().is_err());
        assert_eq!(RadialKernel::ball(0.5).unwrap().to_string(), "ball:0.5");
    }

    #[test]
    fn tail_mass_and_radius() {
        let k = RadialKernel::gaussian();
        let r = k.effective_radius(1e-6).unwrap();
        assert!((k.tail_mass(r).unwrap() - 1e-6).abs() < 1e-9);
        assert_eq!(RadialKernel::ball(0.5).unwrap().tail_mass(0.6).unwrap(), 0.0);
        let gt = RadialKernel::gef().tail_mass(0.0).unwrap();
        let (p, m) = RadialKernel::gef().split_moment(0.0).unwrap();
        assert!((gt / (p + m) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn samplers_reproduce_second_moment() {
        // E[w |z|^2] = ∫ J |z|^2.
        for (k, part) in [
            (RadialKernel::gaussian(), Part::Whole),
            (RadialKernel::exponential(), Part::Whole),
            (RadialKernel::ball(0.8).unwrap(), Part::Whole),
            (RadialKernel::gef(), Part::Positive),
            (RadialKernel::gef(), Part::Negative),
        ] {
            let s = k.sampler(part).unwrap();
            let mut rng = crate::rng::stream(1, "sampler", 0);
            let mut m = Moments::default();
            for _ in 0..200_000 {
                let (z, w) = s.sample(&mut rng);
                m.push(w * (z[0] * z[0] + z[1] * z[1]));
            }
            let (p, n) = k.split_moment(2.0).unwrap();
            let exact = if part == Part::Negative { n } else { p };
            let e = m.estimate();
            assert!(
                (e.value - exact).abs() < 4.0 * e.stderr,
                "{k} {part:?}: {e:?} vs {exact}"
            );
        }
        assert!(RadialKernel::gef().sampler(Part::Whole).is_err());
    }

    proptest! {
        #[test]
        fn nonnegative_families_are_nonnegative(r in 0.0f64..50.0, rho in 0.01f64..5.0) {
            for k in [RadialKernel::gaussian(), RadialKernel::exponential(), RadialKernel::ball(rho).unwrap()] {
                let v = k.eval(r).unwrap();
                prop_assert!(v >= 0.0 && v.is_finite());
            }
        }

        #[test]
        fn moment_scales_linearly(c in 0.01f64..100.0, gm in 0.0f64..2.0) {
            for k in [RadialKernel::gaussian(), RadialKernel::ball(0.4).unwrap(), RadialKernel::gef()] {
                let a = k.moment(gm).unwrap();
                let (p, m) = k.split_moment(gm).unwrap();
                let b = k.scaled(c).unwrap().moment(gm).unwrap();
                prop_assert!((b - c * a).abs() <= 1e-14 * c * (p + m));
            }
        }

        #[test]
        fn gef_is_finite(r in 0.0f64..1e3) {
            prop_assert!(gef(r).is_finite());
        }
    }
}
