//! Self-similar renewal structure of the snowflake energy.
//!
//! `F(t)` is the energy carried by one self-similar boundary block: the
//! refinement of the first side of the base triangle. A point belongs to the
//! block when its nearest polygon edge does; `U` is the interior part and `V`
//! the exterior part, and `F(t) = ∫_{U×V} J((x - y)/t)`.
//!
//! The block is the union of four sub-blocks with ratios `r₁, r₂, r₂, r₁`, so
//! `Σ_j r_j⁴ F(t/r_j) = F(t) + R(t)` with a remainder `R` that only sees the
//! neighbourhoods of the five sub-block junctions. `R` is estimated directly
//! by sampling those neighbourhoods, comparing the in-place sub-block
//! attribution with the attribution pulled back through the similarity.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dimension::solve_alpha;
use crate::error::{Error, Result};
use crate::geometry::{build_snowflake, segment_distance2, Point2, Polygon, SnowflakeSpec};
use crate::kernel::{Part, RadialKernel, RadialSampler};
use crate::numerics::{Estimate, Moments};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenewalOptions {
    pub eta: f64,
    pub depth: u32,
    pub side: f64,
    pub kernel: RadialKernel,
    pub t0: f64,
    /// Halving levels `t0, t0/2, ...` for the remainder.
    pub levels: usize,
    pub samples: u64,
    pub seed: u64,
    /// Log-periods of `G(s)` to scan; 0 skips the scan.
    pub periods: usize,
    pub points_per_period: usize,
}

impl Default for RenewalOptions {
    fn default() -> Self {
        Self {
            eta: 3.0,
            depth: 8,
            side: 1.0,
            kernel: RadialKernel::gaussian(),
            t0: 0.1,
            levels: 4,
            samples: 1_000_000,
            seed: 0,
            periods: 0,
            points_per_period: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenewalLevel {
    pub t: f64,
    /// `F(t)` of the block.
    pub energy: Estimate,
    /// `4F(t) - 81F(t/3)` for η = 3, `Σ_j r_j⁴ F(t/r_j) - F(t)` otherwise.
    pub remainder: Estimate,
    /// `|remainder| / t⁴`.
    pub normalized: Estimate,
    /// η = 3 only: the same difference from two independent estimates of `F`.
    pub literal: Option<Estimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenewalReport {
    pub eta: f64,
    pub depth: u32,
    pub alpha: f64,
    pub kernel: String,
    pub levels: Vec<RenewalLevel>,
    /// `normalized[k+1] / normalized[k]`.
    pub ratios: Vec<f64>,
    /// Log-period of `G(s) = e^{(4-α)s} F(e^{-s})`, `-ln r₂`.
    pub period: f64,
    pub g_curve: Vec<(f64, Estimate)>,
    /// `(max - min) / mean` of `G` per log-period.
    pub amplitudes: Vec<f64>,
}

impl RenewalReport {
    /// Consecutive normalized remainders within a factor 5 of each other.
    pub fn remainder_bounded(&self) -> bool {
        !self.ratios.is_empty() && self.ratios.iter().all(|r| (0.2..=5.0).contains(r))
    }

    pub fn amplitudes_decreasing(&self) -> bool {
        self.amplitudes.len() >= 2 && self.amplitudes.windows(2).all(|w| w[1] < w[0])
    }
}

/// Complex multiplication and division on `Point2`.
#[cfg(test)]
fn cmul(a: Point2, b: Point2) -> Point2 {
    Point2::new(a.x * b.x - a.y * b.y, a.x * b.y + a.y * b.x)
}

fn cdiv(a: Point2, b: Point2) -> Point2 {
    let d = b.x * b.x + b.y * b.y;
    Point2::new((a.x * b.x + a.y * b.y) / d, (a.y * b.x - a.x * b.y) / d)
}

/// Orientation-preserving similarity `x -> q0 + b (x - e0)`.
#[derive(Debug, Clone, Copy)]
struct Similarity {
    e0: Point2,
    q0: Point2,
    b: Point2,
}

impl Similarity {
    fn through(e0: Point2, e1: Point2, q0: Point2, q1: Point2) -> Self {
        Self {
            e0,
            q0,
            b: cdiv(q1.sub(q0), e1.sub(e0)),
        }
    }

    #[cfg(test)]
    fn ratio(&self) -> f64 {
        self.b.norm()
    }

    fn inverse(&self, x: Point2) -> Point2 {
        self.e0.add(cdiv(x.sub(self.q0), self.b))
    }

    #[cfg(test)]
    fn apply(&self, x: Point2) -> Point2 {
        self.q0.add(cmul(self.b, x.sub(self.e0)))
    }
}

/// Interior/exterior side and owning edge, computed lazily.
#[inline]
fn owner(poly: &Polygon, p: Point2) -> usize {
    poly.nearest_edge(p).0
}

struct Geometry {
    fine: Polygon,
    coarse: Polygon,
    /// Edges per sub-block of `fine` (= edges of the block in `coarse`).
    sub: usize,
    maps: [Similarity; 4],
    junctions: [Point2; 5],
}

impl Geometry {
    fn new(spec: &SnowflakeSpec) -> Result<Self> {
        if spec.depth < 1 {
            return Err(Error::invalid("renewal check needs depth >= 1"));
        }
        let fine = build_snowflake(spec)?;
        let coarse = build_snowflake(&SnowflakeSpec {
            depth: spec.depth - 1,
            ..*spec
        })?;
        let sub = 4usize.pow(spec.depth - 1);
        let fv = fine.vertices();
        let cv = coarse.vertices();
        let junctions = [0, 1, 2, 3, 4].map(|i| fv[i * sub]);
        let maps = [0, 1, 2, 3].map(|j| Similarity::through(cv[0], cv[sub], junctions[j], junctions[j + 1]));
        Ok(Self {
            fine,
            coarse,
            sub,
            maps,
            junctions,
        })
    }

    /// In-place integrand of `F`: `x ∈ U`, `y ∈ V`; returns the sub-blocks.
    #[inline]
    fn fine_pair(&self, x: Point2, y: Point2) -> Option<(usize, usize)> {
        if !self.fine.contains(x) || self.fine.contains(y) {
            return None;
        }
        self.owners(x, y)
    }

    #[inline]
    fn owners(&self, x: Point2, y: Point2) -> Option<(usize, usize)> {
        let (jx, jy) = (owner(&self.fine, x) / self.sub, owner(&self.fine, y) / self.sub);
        (jx < 4 && jy < 4).then_some((jx, jy))
    }

    #[inline]
    fn coarse_pair(&self, x: Point2, y: Point2) -> bool {
        self.coarse.contains(x)
            && !self.coarse.contains(y)
            && owner(&self.coarse, x) < self.sub
            && owner(&self.coarse, y) < self.sub
    }

    /// `Σ_j m_j - Σ_{j,k} 1{x ∈ U_j, y ∈ V_k}` for one pair.
    #[inline]
    fn remainder_integrand(&self, x: Point2, y: Point2) -> f64 {
        let mut d = 0.0;
        for s in &self.maps {
            if self.coarse_pair(s.inverse(x), s.inverse(y)) {
                d += 1.0;
            }
        }
        if self.fine_pair(x, y).is_some() {
            d -= 1.0;
        }
        d
    }
}

fn kernel_reach(kernel: &RadialKernel) -> Result<f64> {
    let mass = kernel.sampler(Part::Whole)?.mass();
    kernel.effective_radius(1e-9 * mass)
}

/// Multiplier on `t · reach` for the junction neighbourhoods.
const JUNCTION_FACTOR: f64 = 4.0;

fn remainder_mc(
    g: &Geometry,
    sampler: &RadialSampler,
    t: f64,
    reach: f64,
    samples: u64,
    seed: u64,
    index: u64,
) -> Estimate {
    let rho = JUNCTION_FACTOR * reach * t;
    let area = 5.0 * std::f64::consts::PI * rho * rho;
    let label = format!("renewal_remainder/{index}");
    let m = rng::chunked(seed, &label, samples, |r: &mut Rng, n| {
        let mut m = Moments::default();
        for _ in 0..n {
            let i = r.random_range(0..5usize);
            let rad = rho * r.random::<f64>().sqrt();
            let th = 2.0 * std::f64::consts::PI * r.random::<f64>();
            let x = g.junctions[i].add(Point2::new(rad * th.cos(), rad * th.sin()));
            let (z, w) = sampler.sample(r);
            // Each point is scored by its nearest junction only.
            let nearest = (0..5)
                .min_by(|&a, &b| x.dist(g.junctions[a]).total_cmp(&x.dist(g.junctions[b])))
                .unwrap();
            if nearest != i {
                m.push(0.0);
                continue;
            }
            let y = Point2::new(x.x - t * z[0], x.y - t * z[1]);
            m.push(w * g.remainder_integrand(x, y));
        }
        m
    });
    Moments::merge_all(m).estimate().scale(t * t * area)
}

/// Square cells covering the `reach · t` neighbourhood of the block.
fn block_cover(g: &Geometry, t: f64, reach: f64) -> (Vec<Point2>, f64) {
    let h = t;
    let r = reach * t + h * std::f64::consts::FRAC_1_SQRT_2;
    let mut cells = std::collections::BTreeSet::new();
    for e in 0..4 * g.sub {
        let (a, b) = g.fine.edge(e);
        let (i0, i1) = (
            ((a.x.min(b.x) - r) / h).floor() as i64,
            ((a.x.max(b.x) + r) / h).floor() as i64,
        );
        let (j0, j1) = (
            ((a.y.min(b.y) - r) / h).floor() as i64,
            ((a.y.max(b.y) + r) / h).floor() as i64,
        );
        for i in i0..=i1 {
            for j in j0..=j1 {
                let c = Point2::new((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
                if segment_distance2(c, a, b) <= r * r {
                    cells.insert((i, j));
                }
            }
        }
    }
    let cells = cells
        .into_iter()
        .map(|(i, j)| Point2::new(i as f64 * h, j as f64 * h))
        .collect();
    (cells, h)
}

fn block_energy_mc(
    g: &Geometry,
    sampler: &RadialSampler,
    t: f64,
    reach: f64,
    samples: u64,
    seed: u64,
    label: &str,
) -> Estimate {
    let (cells, h) = block_cover(g, t, reach);
    let area = cells.len() as f64 * h * h;
    let m = rng::chunked(seed, label, samples, |r: &mut Rng, n| {
        let mut m = Moments::default();
        for _ in 0..n {
            let c = cells[r.random_range(0..cells.len())];
            let x = Point2::new(c.x + h * r.random::<f64>(), c.y + h * r.random::<f64>());
            let (z, w) = sampler.sample(r);
            let y = Point2::new(x.x - t * z[0], x.y - t * z[1]);
            // Symmetrized: J is even, so U×V and V×U carry the same energy.
            let (ix, iy) = (g.fine.contains(x), g.fine.contains(y));
            let hit = ix != iy && g.owners(x, y).is_some();
            m.push(if hit { 0.5 * w } else { 0.0 });
        }
        m
    });
    Moments::merge_all(m).estimate().scale(t * t * area)
}

/// Remainder of the renewal identity at halving levels and, optionally, the
/// oscillation of `G(s) = e^{(4-α)s} F(e^{-s})` over successive log-periods.
pub fn renewal_check(opts: &RenewalOptions) -> Result<RenewalReport> {
    let spec = SnowflakeSpec::new(opts.eta, opts.depth).with_side(opts.side);
    spec.validate()?;
    if !opts.kernel.is_nonnegative() {
        return Err(Error::SignChangingKernel {
            kernel: opts.kernel.to_string(),
            what: "the renewal check",
        });
    }
    if opts.levels < 2 {
        return Err(Error::invalid("renewal check needs at least two levels"));
    }
    if !(opts.t0.is_finite() && opts.t0 > 0.0) {
        return Err(Error::invalid(format!("t0 = {} must be positive", opts.t0)));
    }
    let alpha = solve_alpha(opts.eta)?;
    let g = Geometry::new(&spec)?;
    let floor = g.fine.resolution_floor().unwrap_or(0.0);
    let lattice3 = (opts.eta - 3.0).abs() < 1e-12;
    let r2 = spec.r2();
    let period = -r2.ln();
    let t_min_levels = opts.t0 * 0.5f64.powi(opts.levels as i32 - 1) * if lattice3 { 1.0 / 3.0 } else { 1.0 };
    let t_min_g = opts.t0 * (-(opts.periods as f64) * period).exp();
    let t_min = if opts.periods > 0 {
        t_min_levels.min(t_min_g)
    } else {
        t_min_levels
    };
    if t_min < floor {
        return Err(Error::BelowResolutionFloor { t: t_min, floor });
    }
    let sampler = opts.kernel.sampler(Part::Whole)?;
    let reach = kernel_reach(&opts.kernel)?;
    log::debug!(
        "renewal: eta={} depth={} alpha={alpha:.6} reach={reach:.3}",
        opts.eta,
        opts.depth
    );

    let mut levels = Vec::with_capacity(opts.levels);
    for k in 0..opts.levels {
        let t = opts.t0 * 0.5f64.powi(k as i32);
        let energy = block_energy_mc(
            &g,
            &sampler,
            t,
            reach,
            opts.samples,
            opts.seed,
            &format!("renewal_f/{k}"),
        );
        let (remainder, literal) = if lattice3 {
            // 4F(t) - 81F(t/3) = 81 (4·3⁻⁴F(t) - F(t/3)).
            let rem = remainder_mc(&g, &sampler, t / 3.0, reach, opts.samples, opts.seed, k as u64).scale(81.0);
            let f3 = block_energy_mc(
                &g,
                &sampler,
                t / 3.0,
                reach,
                opts.samples,
                opts.seed,
                &format!("renewal_f3/{k}"),
            );
            (rem, Some(energy.scale(4.0).minus(f3.scale(81.0))))
        } else {
            (
                remainder_mc(&g, &sampler, t, reach, opts.samples, opts.seed, k as u64),
                None,
            )
        };
        let t4 = t.powi(4);
        let normalized = Estimate::new(remainder.value.abs() / t4, remainder.stderr / t4);
        levels.push(RenewalLevel {
            t,
            energy,
            remainder,
            normalized,
            literal,
        });
    }
    let ratios = levels
        .windows(2)
        .map(|w| w[1].normalized.value / w[0].normalized.value)
        .collect();

    let mut g_curve = Vec::new();
    let mut amplitudes = Vec::new();
    if opts.periods > 0 {
        let m = opts.points_per_period.max(2);
        let s0 = -opts.t0.ln();
        for k in 0..opts.periods * m {
            let s = s0 + period * k as f64 / m as f64;
            let t = (-s).exp();
            let f = block_energy_mc(
                &g,
                &sampler,
                t,
                reach,
                opts.samples,
                opts.seed,
                &format!("renewal_g/{k}"),
            );
            g_curve.push((s, f.scale(((4.0 - alpha) * s).exp())));
        }
        for w in g_curve.chunks(m) {
            let v: Vec<f64> = w.iter().map(|(_, e)| e.value).collect();
            let (lo, hi) = v
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            amplitudes.push((hi - lo) / mean);
        }
    }
    Ok(RenewalReport {
        eta: opts.eta,
        depth: opts.depth,
        alpha,
        kernel: opts.kernel.to_string(),
        levels,
        ratios,
        period,
        g_curve,
        amplitudes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn similarities_map_coarse_block_onto_sub_blocks() {
        for eta in [3.0, 5.0] {
            let spec = SnowflakeSpec::new(eta, 3);
            let g = Geometry::new(&spec).unwrap();
            let ratios = [spec.r1(), spec.r2(), spec.r2(), spec.r1()];
            for (j, s) in g.maps.iter().enumerate() {
                assert!((s.ratio() - ratios[j]).abs() < 1e-12);
                for i in 0..=g.sub {
                    let p = s.apply(g.coarse.vertices()[i]);
                    let q = g.fine.vertices()[j * g.sub + i];
                    assert!(p.dist(q) < 1e-12, "eta={eta} j={j} i={i}");
                    assert!(s.inverse(q).dist(g.coarse.vertices()[i]) < 1e-12);
                }
            }
        }
    }

    #[test]
    fn complex_helpers_invert() {
        let a = Point2::new(0.3, -1.2);
        let b = Point2::new(-2.0, 0.7);
        let c = cdiv(cmul(a, b), b);
        assert!(c.dist(a) < 1e-15);
    }

    #[test]
    fn remainder_integrand_vanishes_inside_sub_blocks() {
        let spec = SnowflakeSpec::new(3.0, 4);
        let g = Geometry::new(&spec).unwrap();
        // Pairs straddling an edge in the middle of sub-block 1.
        let (a, b) = g.fine.edge(g.sub + g.sub / 2);
        let mid = a.add(b).scale(0.5);
        let n = Point2::new(b.y - a.y, a.x - b.x).scale(1e-3 / a.dist(b));
        for s in [1.0, -1.0] {
            let x = mid.add(n.scale(s));
            let y = mid.sub(n.scale(s));
            assert_eq!(g.remainder_integrand(x, y), 0.0);
        }
    }

    #[test]
    fn rejects_deep_t() {
        let opts = RenewalOptions {
            depth: 3,
            t0: 0.01,
            ..Default::default()
        };
        assert!(matches!(renewal_check(&opts), Err(Error::BelowResolutionFloor { .. })));
    }
}
