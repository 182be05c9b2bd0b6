//! Nonlocal energy `J_t(Ω) = ∫_Ω ∫_{Ω^c} J((x - y)/t) dx dy`: a direct
//! importance-sampling estimator, a covariogram cross-check, decay-exponent
//! fits and the self-similar renewal check.

mod renewal;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dimension::validate_grid;
use crate::error::{Error, Result};
use crate::geometry::{Point2, Polygon};
use crate::kernel::{Part, RadialKernel, RadialSampler};
use crate::numerics::fit::{linear_fit, loglog_fit};
use crate::numerics::{Estimate, Moments};
use crate::rng::{self, Rng};

pub use renewal::{renewal_check, RenewalOptions, RenewalReport};

/// Uniform points in a polygon by rejection from its bounding box.
#[derive(Debug, Clone)]
pub struct InteriorSampler<'a> {
    poly: &'a Polygon,
    lo: Point2,
    w: f64,
    h: f64,
}

impl<'a> InteriorSampler<'a> {
    pub fn new(poly: &'a Polygon) -> Result<Self> {
        let b = poly.bbox();
        let efficiency = poly.area() / b.area();
        if !(efficiency >= 1e-3) {
            return Err(Error::RejectionEfficiency { efficiency });
        }
        Ok(Self {
            poly,
            lo: b.min,
            w: b.width(),
            h: b.height(),
        })
    }

    #[inline]
    pub fn sample(&self, rng: &mut Rng) -> Point2 {
        loop {
            let p = Point2::new(
                self.lo.x + self.w * rng.random::<f64>(),
                self.lo.y + self.h * rng.random::<f64>(),
            );
            if self.poly.contains(p) {
                return p;
            }
        }
    }
}

fn direct_part(
    poly: &Polygon,
    sampler: &RadialSampler,
    t: f64,
    n_samples: u64,
    seed: u64,
    label: &str,
) -> Result<Estimate> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::invalid(format!("t = {t} must be positive")));
    }
    if n_samples < 2 {
        return Err(Error::invalid("need at least two samples"));
    }
    let interior = InteriorSampler::new(poly)?;
    let scale = t * t * poly.area();
    let m = rng::chunked(seed, label, n_samples, |r, n| {
        let mut m = Moments::default();
        for _ in 0..n {
            let x = interior.sample(r);
            let (z, w) = sampler.sample(r);
            let y = Point2::new(x.x - t * z[0], x.y - t * z[1]);
            m.push(if poly.contains(y) { 0.0 } else { w });
        }
        m
    });
    Ok(Moments::merge_all(m).estimate().scale(scale))
}

/// Unbiased estimate of `J_t(Ω)` for a nonnegative kernel: draw `x` uniform
/// in Ω and `z ~ J/‖J‖₁`, score `t² ‖J‖₁ |Ω| 1{x - t z ∉ Ω}`.
pub fn energy_direct_mc(poly: &Polygon, kernel: &RadialKernel, t: f64, n_samples: u64, seed: u64) -> Result<Estimate> {
    if !kernel.is_nonnegative() {
        return Err(Error::SignChangingKernel {
            kernel: kernel.to_string(),
            what: "the direct estimator (use signed_energy)",
        });
    }
    let s = kernel.sampler(Part::Whole)?;
    direct_part(poly, &s, t, n_samples, seed, "energy_direct")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignedEnergy {
    pub positive_part: Estimate,
    pub negative_part: Estimate,
    pub net: Estimate,
}

/// Energy of the sign-changing gef kernel as the difference of the energies
/// of its positive and negative parts, estimated independently.
pub fn signed_energy(poly: &Polygon, t: f64, samples: u64, seed: u64) -> Result<SignedEnergy> {
    let k = RadialKernel::gef();
    let pos = direct_part(poly, &k.sampler(Part::Positive)?, t, samples, seed, "energy_gef_pos")?;
    let neg = direct_part(poly, &k.sampler(Part::Negative)?, t, samples, seed, "energy_gef_neg")?;
    Ok(SignedEnergy {
        positive_part: pos,
        negative_part: neg,
        net: pos.minus(neg),
    })
}

/// Mean over directions of `|Ω ∩ (Ω^c + s e^{iθ})|`.
pub fn covariogram_deficit(poly: &Polygon, s: f64, samples: u64, seed: u64, index: u64) -> Result<Estimate> {
    if s == 0.0 {
        return Ok(Estimate::exact(0.0));
    }
    let interior = InteriorSampler::new(poly)?;
    let label = format!("covariogram/{index}");
    let m = rng::chunked(seed, &label, samples, |r, n| {
        let mut m = Moments::default();
        for k in 0..n {
            let x = interior.sample(r);
            // Stratified directions within each chunk.
            let th = 2.0 * std::f64::consts::PI * (k as f64 + r.random::<f64>()) / n as f64;
            let y = Point2::new(x.x - s * th.cos(), x.y - s * th.sin());
            m.push(if poly.contains(y) { 0.0 } else { 1.0 });
        }
        m
    });
    let e = Moments::merge_all(m).estimate();
    Ok(e.scale(poly.area()))
}

/// `t² ∫_0^∞ J(ρ) V̄(tρ) 2πρ dρ` by the trapezoid rule on `radial_grid`,
/// with `V̄` estimated at each node from `angular_samples` draws.
pub fn energy_covariogram(
    poly: &Polygon,
    kernel: &RadialKernel,
    t: f64,
    radial_grid: &[f64],
    angular_samples: u64,
    seed: u64,
) -> Result<Estimate> {
    if radial_grid.len() < 2 {
        return Err(Error::invalid("radial grid needs at least two nodes"));
    }
    if radial_grid.windows(2).any(|w| !(w[1] > w[0])) || radial_grid[0] < 0.0 {
        return Err(Error::invalid("radial grid must be increasing and nonnegative"));
    }
    let grid_max = *radial_grid.last().unwrap();
    let tail = kernel.tail_mass(grid_max)?;
    if tail > 1e-6 {
        return Err(Error::RadialGridTooShort { grid_max, tail });
    }
    let mut grid = radial_grid.to_vec();
    if grid[0] > 0.0 {
        grid.insert(0, 0.0);
    }
    let m = grid.len();
    let mut value = 0.0;
    let mut var = 0.0;
    for (k, &rho) in grid.iter().enumerate() {
        let w = match k {
            0 => 0.5 * (grid[1] - grid[0]),
            _ if k == m - 1 => 0.5 * (grid[k] - grid[k - 1]),
            _ => 0.5 * (grid[k + 1] - grid[k - 1]),
        };
        let f = kernel.value(rho) * 2.0 * std::f64::consts::PI * rho;
        if f == 0.0 || w == 0.0 {
            continue;
        }
        let v = covariogram_deficit(poly, t * rho, angular_samples, seed, k as u64)?;
        value += w * f * v.value;
        var += (w * f * v.stderr).powi(2);
    }
    Ok(Estimate::new(t * t * value, t * t * var.sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySweep {
    pub t_grid: Vec<f64>,
    pub estimates: Vec<Estimate>,
    pub beta_hat: f64,
    pub beta_stderr: f64,
    pub beta_ref: Option<f64>,
    /// `J_t / t^{β_ref}` per grid point.
    pub prefactor_series: Option<Vec<Estimate>>,
    /// Linear extrapolation in `t` of the last three prefactors to `t = 0`.
    pub extrapolated_prefactor: Option<Estimate>,
}

/// Extrapolates `y(t)` to `t = 0` by a least-squares line through the last
/// three points; errors are propagated as if independent.
pub fn richardson_last_three(t: &[f64], y: &[Estimate]) -> Result<Estimate> {
    if t.len() < 3 || t.len() != y.len() {
        return Err(Error::DegenerateFit("need three points to extrapolate".into()));
    }
    let k = t.len() - 3;
    let (ts, ys) = (&t[k..], &y[k..]);
    let v: Vec<f64> = ys.iter().map(|e| e.value).collect();
    let fit = linear_fit(ts, &v)?;
    // Intercept = Σ c_i y_i with c_i = 1/3 - mean(t) (t_i - mean(t)) / Sxx.
    let mt = ts.iter().sum::<f64>() / 3.0;
    let sxx: f64 = ts.iter().map(|x| (x - mt).powi(2)).sum();
    let var: f64 = ts
        .iter()
        .zip(ys)
        .map(|(x, e)| {
            let c = 1.0 / 3.0 - mt * (x - mt) / sxx;
            (c * e.stderr).powi(2)
        })
        .sum();
    Ok(Estimate::new(fit.intercept, var.sqrt()))
}

/// Energies over a decreasing `t` grid (common random numbers across `t`)
/// and the log-log slope `β̂`.
pub fn sweep_and_fit(
    poly: &Polygon,
    kernel: &RadialKernel,
    t_grid: &[f64],
    samples: u64,
    seed: u64,
    beta_ref: Option<f64>,
) -> Result<EnergySweep> {
    validate_grid(poly, t_grid)?;
    let estimates = t_grid
        .iter()
        .map(|&t| energy_direct_mc(poly, kernel, t, samples, seed))
        .collect::<Result<Vec<_>>>()?;
    let v: Vec<f64> = estimates.iter().map(|e| e.value).collect();
    let fit = loglog_fit(t_grid, &v)?;
    let prefactor_series = beta_ref.map(|b| {
        t_grid
            .iter()
            .zip(&estimates)
            .map(|(t, e)| e.scale(t.powf(-b)))
            .collect::<Vec<_>>()
    });
    let extrapolated_prefactor = match &prefactor_series {
        Some(p) => Some(richardson_last_three(t_grid, p)?),
        None => None,
    };
    Ok(EnergySweep {
        t_grid: t_grid.to_vec(),
        estimates,
        beta_hat: fit.slope,
        beta_stderr: fit.slope_stderr,
        beta_ref,
        prefactor_series,
        extrapolated_prefactor,
    })
}
