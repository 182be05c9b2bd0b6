//! Ginibre ensemble: eigenvalue Monte Carlo, exact determinantal-kernel
//! integrals, the gaussian-kernel approximation, and scaling/CLT checks.

mod exact;
pub mod weights;

use std::f64::consts::PI;

use faer::{c64, Mat};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::energy::{energy_direct_mc, richardson_last_three};
use crate::error::{Error, Result};
use crate::geometry::{Point2, Polygon};
use crate::kernel::RadialKernel;
use crate::numerics::fit::{linear_fit, loglog_fit};
use crate::numerics::stats::{bootstrap_variance_stderr, ks_test, mean_and_variance, normal_cdf};
use crate::numerics::Estimate;
use crate::rng::{self, Rng};

pub use exact::{
    bump_variance, covariance_two_sets, kernel_variance_exact, sobolev_variance_check, truncation_bound, Bump,
    Covariance, KernelIntegral, KernelQuadrature, SobolevQuadrature, SobolevTable,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GinibreConfig {
    pub n: usize,
    pub trials: u64,
    pub seed: u64,
}

impl GinibreConfig {
    pub fn new(n: usize, trials: u64, seed: u64) -> Result<Self> {
        if n == 0 || trials == 0 {
            return Err(Error::invalid("N and trials must be at least 1"));
        }
        Ok(Self { n, trials, seed })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountStats {
    pub counts: Vec<u32>,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    /// Bootstrap standard error of `variance` (1000 resamples).
    pub variance_stderr: f64,
}

impl CountStats {
    pub fn from_counts(counts: Vec<u32>, seed: u64) -> Result<Self> {
        let x: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        let (mean, variance) = mean_and_variance(&x)?;
        let mut r = rng::stream(seed, "bootstrap", 0);
        let variance_stderr = bootstrap_variance_stderr(&counts, 1000, &mut r);
        Ok(Self {
            counts,
            mean,
            variance,
            variance_stderr,
        })
    }

    pub fn variance_estimate(&self) -> Estimate {
        Estimate::new(self.variance, self.variance_stderr)
    }

    pub fn mean_stderr(&self) -> f64 {
        (self.variance / self.counts.len() as f64).sqrt()
    }
}

const EIGEN_ATTEMPTS: u32 = 3;

/// Roots of `λ² - (a + d)λ + (ad - bc)` for the matrix `[[a, b], [c, d]]`.
fn eigenvalues_2x2(a: c64, b: c64, c: c64, d: c64) -> [c64; 2] {
    let h = (a - d) * 0.5;
    let s = (h * h + b * c).sqrt();
    let m = (a + d) * 0.5;
    [m + s, m - s]
}

/// Eigenvalues of an `N × N` matrix of iid complex gaussians with variance
/// `1/N`. `N ≤ 2` uses the closed form; larger sizes use a dense solver,
/// retried with a random diagonal shift on failure.
pub fn sample_eigenvalues(n: usize, rng: &mut Rng) -> Result<Vec<Point2>> {
    let sd = (0.5 / n as f64).sqrt();
    let mut draw = || {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c64::new(sd * re, sd * im)
    };
    let p = |z: c64| Point2::new(z.re, z.im);
    match n {
        1 => Ok(vec![p(draw())]),
        2 => {
            let (a, b, c, d) = (draw(), draw(), draw(), draw());
            Ok(eigenvalues_2x2(a, b, c, d).map(p).to_vec())
        }
        _ => {
            let entries: Vec<c64> = (0..n * n).map(|_| draw()).collect();
            let base = Mat::from_fn(n, n, |i, j| entries[i * n + j]);
            let mut shift = c64::new(0.0, 0.0);
            for attempt in 0..EIGEN_ATTEMPTS {
                if attempt > 0 {
                    let th = 2.0 * PI * rng.random::<f64>();
                    shift = c64::new(th.cos(), th.sin());
                }
                let m = Mat::from_fn(n, n, |i, j| if i == j { base[(i, j)] + shift } else { base[(i, j)] });
                if let Ok(ev) = m.eigenvalues() {
                    return Ok(ev.into_iter().map(|z| p(z - shift)).collect());
                }
                log::warn!("eigensolver failed (attempt {}), retrying with a shift", attempt + 1);
            }
            Err(Error::EigenSolver {
                attempts: EIGEN_ATTEMPTS,
            })
        }
    }
}

/// Per-trial eigenvalue counts in `poly`.
pub fn sample_counts(cfg: &GinibreConfig, poly: &Polygon) -> Result<CountStats> {
    if poly.max_radius() >= 1.0 {
        log::warn!("polygon reaches outside the unit disk (radius {})", poly.max_radius());
    }
    faer::set_global_parallelism(faer::Par::Seq);
    let label = format!("ginibre_mc/{}", cfg.n);
    let chunks = rng::chunked(cfg.seed, &label, cfg.trials, |r, k| -> Result<Vec<u32>> {
        (0..k)
            .map(|_| {
                let ev = sample_eigenvalues(cfg.n, r)?;
                Ok(ev.iter().filter(|&&z| poly.contains(z)).count() as u32)
            })
            .collect()
    });
    let mut counts = Vec::with_capacity(cfg.trials as usize);
    for c in chunks {
        counts.extend(c?);
    }
    CountStats::from_counts(counts, cfg.seed)
}

/// `(N/π)² J_{1/√N}(Ω)` with the gaussian kernel `e^{-|z|²}`.
pub fn gaussian_approx_variance(n: usize, poly: &Polygon, samples: u64, seed: u64) -> Result<Estimate> {
    if n == 0 {
        return Err(Error::invalid("N must be at least 1"));
    }
    let t = 1.0 / (n as f64).sqrt();
    let c = n as f64 / PI;
    Ok(energy_direct_mc(poly, &RadialKernel::gaussian(), t, samples, seed)?.scale(c * c))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingMethod {
    ExactKernel,
    EigenMc,
    GaussianApprox,
}

impl std::str::FromStr for ScalingMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact-kernel" | "exact_kernel" => Ok(Self::ExactKernel),
            "eigen-mc" | "eigen_mc" => Ok(Self::EigenMc),
            "gaussian-approx" | "gaussian_approx" => Ok(Self::GaussianApprox),
            _ => Err(Error::invalid(format!(
                "unknown method `{s}` (exact-kernel, eigen-mc, gaussian-approx)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub method: ScalingMethod,
    pub n_grid: Vec<usize>,
    pub variances: Vec<Estimate>,
    pub exponent_hat: f64,
    pub exponent_stderr: f64,
    pub alpha_ref: f64,
    /// `Var / N^{α_ref/2}`.
    pub prefactor_series: Vec<Estimate>,
    /// Last three prefactors extrapolated linearly in `N^{-1/2}`.
    pub extrapolated_prefactor: Option<Estimate>,
}

/// Relative tolerance of each exact-kernel variance in a scaling fit.
pub const SCALING_REL_TOL: f64 = 1e-6;

/// Log-log slope of `Var X_N(Ω)` against `N`. `budget` is the trial count
/// (eigen-mc), the sample count (gaussian-approx) or the evaluation budget
/// (exact-kernel).
pub fn variance_scaling_fit(
    poly: &Polygon,
    n_grid: &[usize],
    method: ScalingMethod,
    budget: u64,
    seed: u64,
    alpha_ref: f64,
) -> Result<ScalingFit> {
    if n_grid.len() < 3 || n_grid.windows(2).any(|w| w[1] <= w[0]) || n_grid[0] == 0 {
        return Err(Error::invalid("N grid needs at least three increasing positive values"));
    }
    if poly.max_radius() >= 1.0 {
        return Err(Error::invalid("polygon must lie inside the unit disk"));
    }
    let variances = n_grid
        .iter()
        .map(|&n| -> Result<Estimate> {
            match method {
                ScalingMethod::ExactKernel => {
                    let q = KernelQuadrature {
                        max_evals: budget as usize,
                        ..Default::default()
                    }
                    .with_rel(SCALING_REL_TOL);
                    let r = kernel_variance_exact(n, poly, &q)?;
                    Ok(Estimate::new(r.value, r.error))
                }
                ScalingMethod::EigenMc => {
                    let s = sample_counts(&GinibreConfig::new(n, budget, seed)?, poly)?;
                    Ok(s.variance_estimate())
                }
                ScalingMethod::GaussianApprox => gaussian_approx_variance(n, poly, budget, seed),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let ns: Vec<f64> = n_grid.iter().map(|&n| n as f64).collect();
    let v: Vec<f64> = variances.iter().map(|e| e.value).collect();
    let fit = loglog_fit(&ns, &v)?;
    let prefactor_series: Vec<Estimate> = ns
        .iter()
        .zip(&variances)
        .map(|(n, e)| e.scale(n.powf(-alpha_ref / 2.0)))
        .collect();
    let t: Vec<f64> = ns.iter().map(|n| n.powf(-0.5)).collect();
    let extrapolated_prefactor = richardson_last_three(&t, &prefactor_series).ok();
    Ok(ScalingFit {
        method,
        n_grid: n_grid.to_vec(),
        variances,
        exponent_hat: fit.slope,
        exponent_stderr: fit.slope_stderr,
        alpha_ref,
        prefactor_series,
        extrapolated_prefactor,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// KS test of standardized integer data against the standard normal. A
/// uniform jitter on `(-½, ½)` is added first so that ties do not dominate
/// the statistic.
pub fn ks_normal_jittered(values: &[f64], seed: u64, label: &str) -> Result<KsResult> {
    let (_, var) = mean_and_variance(values)?;
    if var == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let mut r = rng::stream(seed, label, 0);
    let x: Vec<f64> = values.iter().map(|v| v + r.random::<f64>() - 0.5).collect();
    let (m, v) = mean_and_variance(&x)?;
    let sd = v.sqrt();
    let z: Vec<f64> = x.iter().map(|a| (a - m) / sd).collect();
    let (statistic, p_value) = ks_test(&z, normal_cdf)?;
    Ok(KsResult { statistic, p_value })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub n: usize,
    pub trials: u64,
    pub mean: f64,
    pub variance: f64,
    pub ks: KsResult,
    /// The same pipeline applied to the squared counts.
    pub negative_control: KsResult,
}

pub fn clt_test(poly: &Polygon, n: usize, trials: u64, seed: u64) -> Result<CltReport> {
    if trials < 500 {
        return Err(Error::invalid("CLT test needs at least 500 trials"));
    }
    let s = sample_counts(&GinibreConfig::new(n, trials, seed)?, poly)?;
    clt_from_counts(&s, n, seed)
}

pub fn clt_from_counts(s: &CountStats, n: usize, seed: u64) -> Result<CltReport> {
    let x: Vec<f64> = s.counts.iter().map(|&c| c as f64).collect();
    let ks = ks_normal_jittered(&x, seed, "clt_jitter")?;
    let sq: Vec<f64> = x.iter().map(|c| c * c).collect();
    let negative_control = ks_normal_jittered(&sq, seed, "clt_jitter_control")?;
    Ok(CltReport {
        n,
        trials: s.counts.len() as u64,
        mean: s.mean,
        variance: s.variance,
        ks,
        negative_control,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemainderRow {
    pub n: usize,
    /// `max ρ_N` over probes.
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemainderTable {
    pub lambda: f64,
    /// `λ e^{1-λ}`.
    pub delta: f64,
    pub rows: Vec<RemainderRow>,
    /// `exp` of the slope of `ln max ρ_N` against `N`.
    pub rate: f64,
    /// First `N` from which `max ρ_N` is nonincreasing.
    pub monotone_from: Option<usize>,
}

pub fn delta(lambda: f64) -> f64 {
    lambda * (1.0 - lambda).exp()
}

/// Geometric decay of the truncation error of `K_N` on probes inside
/// `B(0, λ)`.
pub fn remainder_check(lambda: f64, n_list: &[usize], probe_pairs: usize, seed: u64) -> Result<RemainderTable> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::invalid(format!("lambda = {lambda} must lie in (0, 1)")));
    }
    if n_list.len() < 3 || n_list.windows(2).any(|w| w[1] <= w[0]) || n_list[0] == 0 {
        return Err(Error::invalid("N list needs at least three increasing positive values"));
    }
    if probe_pairs == 0 {
        return Err(Error::invalid("need at least one probe pair"));
    }
    let mut r = rng::stream(seed, "remainder_probes", 0);
    let point = |r: &mut Rng| {
        let rad = lambda * r.random::<f64>().sqrt() * (1.0 - 1e-12);
        let th = 2.0 * PI * r.random::<f64>();
        Point2::new(rad * th.cos(), rad * th.sin())
    };
    let probes: Vec<(Point2, Point2)> = (0..probe_pairs).map(|_| (point(&mut r), point(&mut r))).collect();
    let rows: Vec<RemainderRow> = n_list
        .iter()
        .map(|&n| {
            let ln_rho = probes
                .iter()
                .map(|&(z, w)| weights::ln_normalized_tail(n, z, w))
                .fold(f64::NEG_INFINITY, f64::max);
            RemainderRow { n, rho: ln_rho.exp() }
        })
        .collect();
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let ln: Vec<f64> = rows.iter().map(|r| r.rho.ln()).collect();
    if ln.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonPositiveOnLogAxis);
    }
    let fit = linear_fit(&ns, &ln)?;
    let mut monotone_from = None;
    for k in (0..rows.len()).rev() {
        if k + 1 < rows.len() && rows[k + 1].rho > rows[k].rho {
            break;
        }
        monotone_from = Some(rows[k].n);
    }
    Ok(RemainderTable {
        lambda,
        delta: delta(lambda),
        rows,
        rate: fit.slope.exp(),
        monotone_from,
    })
}

#[cfg(test)]
mod tests;
