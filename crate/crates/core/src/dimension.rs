//! Self-similar dimension of the η-snowflake, lattice classification of its
//! scale ratios, and Minkowski dimension estimates from tube volumes.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point2, Polygon};
use crate::numerics::fit::loglog_fit;
use crate::numerics::Estimate;
use crate::rng;

/// `2 r1^α + 2 r2^α - 1` with `r1 = (η-1)/(2η)`, `r2 = 1/η`.
pub fn phi(eta: f64, alpha: f64) -> f64 {
    let r1 = (eta - 1.0) / (2.0 * eta);
    let r2 = 1.0 / eta;
    2.0 * r1.powf(alpha) + 2.0 * r2.powf(alpha) - 1.0
}

fn dphi(eta: f64, alpha: f64) -> f64 {
    let r1 = (eta - 1.0) / (2.0 * eta);
    let r2 = 1.0 / eta;
    2.0 * r1.powf(alpha) * r1.ln() + 2.0 * r2.powf(alpha) * r2.ln()
}

/// Root of `phi(eta, ·)` in (1, 2).
pub fn solve_alpha(eta: f64) -> Result<f64> {
    if !(eta.is_finite() && eta > 1.0) {
        return Err(Error::invalid(format!("eta = {eta} must exceed 1")));
    }
    if phi(eta, 2.0) >= 0.0 {
        return Err(Error::EtaOutOfRange { eta });
    }
    let (mut lo, mut hi) = (1.0, 2.0);
    if phi(eta, lo) <= 0.0 {
        // Only possible through round-off as r1 + r2 -> 1/2 + 0.
        return Ok(1.0);
    }
    let mut a = 1.5;
    for _ in 0..200 {
        let f = phi(eta, a);
        if f.abs() < 1e-15 {
            break;
        }
        if f > 0.0 {
            lo = a;
        } else {
            hi = a;
        }
        let step = a - f / dphi(eta, a);
        a = if step > lo && step < hi { step } else { 0.5 * (lo + hi) };
        if hi - lo < 1e-16 {
            break;
        }
    }
    Ok(a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    Lattice { p: u64, q: u64 },
    NonlatticeUpTo { denominator_bound: u64 },
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeVerdict {
    pub verdict: Verdict,
    pub ratio_value: f64,
}

/// `log(2η/(η-1)) / log η`, equal to `log r1 / log r2`.
pub fn scale_ratio(eta: f64) -> f64 {
    (2.0 * eta / (eta - 1.0)).ln() / eta.ln()
}

fn ulp(x: f64) -> f64 {
    let b = x.abs().to_bits();
    f64::from_bits(b + 1) - f64::from_bits(b)
}

/// Bounded-denominator rationality test of the scale ratio by continued
/// fractions. A convergent within 10 ulp gives a lattice verdict; exhausting
/// the denominator bound gives `NonlatticeUpTo`. If double precision runs out
/// before the bound is reached the verdict is `Undecided`.
pub fn check_nonlattice(eta: f64, max_denominator: u64) -> Result<LatticeVerdict> {
    if !(eta.is_finite() && eta > 1.0) {
        return Err(Error::invalid(format!("eta = {eta} must exceed 1")));
    }
    if max_denominator == 0 {
        return Err(Error::invalid("max_denominator must be at least 1"));
    }
    let rho = scale_ratio(eta);
    let tol = 10.0 * ulp(rho);
    let (mut p0, mut q0, mut p1, mut q1) = (0u128, 1u128, 1u128, 0u128);
    let mut x = rho;
    let done = |verdict| {
        Ok(LatticeVerdict {
            verdict,
            ratio_value: rho,
        })
    };
    for _ in 0..64 {
        let a = x.floor();
        if a > 1e15 {
            break;
        }
        let ai = a as u128;
        let (p2, q2) = (ai * p1 + p0, ai * q1 + q0);
        if q2 > max_denominator as u128 {
            return done(Verdict::NonlatticeUpTo {
                denominator_bound: max_denominator,
            });
        }
        // |rho - p/q| ≈ 1/(q q') cannot be resolved below ~100 ulp.
        if 1.0 / ((q2 as f64) * (q2 as f64)) < 100.0 * ulp(rho) {
            return done(Verdict::Undecided);
        }
        if (rho - p2 as f64 / q2 as f64).abs() <= tol {
            return done(Verdict::Lattice {
                p: p2 as u64,
                q: q2 as u64,
            });
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let frac = x - a;
        if frac <= 0.0 {
            break;
        }
        x = 1.0 / frac;
    }
    done(Verdict::Undecided)
}

/// Monte Carlo estimate of `|{x : dist(x, ∂Ω) < t}|` from uniform samples in
/// the bounding box inflated by `t`.
pub fn tube_volume(poly: &Polygon, t: f64, samples: u64, seed: u64) -> Result<Estimate> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::invalid(format!("tube radius {t} must be nonnegative")));
    }
    if t == 0.0 {
        return Ok(Estimate::exact(0.0));
    }
    if samples < 1000 {
        return Err(Error::invalid(format!("{samples} samples, need at least 1000")));
    }
    let b = poly.bbox().inflate(t);
    let hits: u64 = rng::chunked(seed, "tube_volume", samples, |r, n| {
        let mut h = 0u64;
        for _ in 0..n {
            let p = Point2::new(
                b.min.x + b.width() * r.random::<f64>(),
                b.min.y + b.height() * r.random::<f64>(),
            );
            if poly.within(p, t) {
                h += 1;
            }
        }
        h
    })
    .into_iter()
    .sum();
    let f = hits as f64 / samples as f64;
    let a = b.area();
    Ok(Estimate::new(f * a, a * (f * (1.0 - f) / samples as f64).sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionFit {
    /// `n - slope`, clamped to `[n-1, n]`.
    pub alpha_hat: f64,
    /// Raw least-squares slope of `log V` against `log t`.
    pub slope: f64,
    pub slope_stderr: f64,
    pub content_lower: f64,
    pub content_upper: f64,
    pub t_grid: Vec<f64>,
    pub volumes: Vec<Estimate>,
}

/// Checks a grid is strictly decreasing, positive and above the polygon's
/// resolution floor.
pub fn validate_grid(poly: &Polygon, t_grid: &[f64]) -> Result<()> {
    if t_grid.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "{} grid points, need at least 3",
            t_grid.len()
        )));
    }
    if t_grid.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::invalid("grid values must be positive"));
    }
    if t_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("grid must be strictly decreasing"));
    }
    if let Some(floor) = poly.resolution_floor() {
        let t = *t_grid.last().unwrap();
        if t < floor {
            return Err(Error::BelowResolutionFloor { t, floor });
        }
    }
    Ok(())
}

/// `k` log-spaced values from `hi` down to `lo`.
pub fn log_grid(hi: f64, lo: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![hi];
    }
    let (a, b) = (hi.ln(), lo.ln());
    (0..k)
        .map(|i| (a + (b - a) * i as f64 / (k - 1) as f64).exp())
        .collect()
}

pub fn fit_minkowski(poly: &Polygon, t_grid: &[f64], samples: u64, seed: u64) -> Result<DimensionFit> {
    validate_grid(poly, t_grid)?;
    let volumes = t_grid
        .iter()
        .map(|&t| tube_volume(poly, t, samples, seed))
        .collect::<Result<Vec<_>>>()?;
    let v: Vec<f64> = volumes.iter().map(|e| e.value).collect();
    let fit = loglog_fit(t_grid, &v)?;
    let n = 2.0;
    let alpha_hat = (n - fit.slope).clamp(n - 1.0, n);
    let contents: Vec<f64> = t_grid.iter().zip(&v).map(|(t, v)| v / t.powf(n - alpha_hat)).collect();
    Ok(DimensionFit {
        alpha_hat,
        slope: fit.slope,
        slope_stderr: fit.slope_stderr,
        content_lower: contents.iter().cloned().fold(f64::INFINITY, f64::min),
        content_upper: contents.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        t_grid: t_grid.to_vec(),
        volumes,
    })
}
