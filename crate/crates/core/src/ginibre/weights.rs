//! Ginibre kernel evaluation: the one-point function, the weighted kernel
//! `W_N(x, y) = |K_N(x, y)|² (N/π)² e^{-N(|x|² + |y|²)}`, its gaussian limit
//! and the truncation tail `e^{N z w̄} - K_N(z, w)`.

use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

use crate::error::Result;
use crate::geometry::{Point2, Polygon};
use crate::numerics::quad::{adaptive, Tolerance};

fn ln_factorial(m: usize) -> f64 {
    ln_gamma(m as f64 + 1.0)
}

/// `(P, Q)` with `Q = e^{-a} Σ_{m<n} a^m/m!` and `P = 1 - Q`, each computed
/// from whichever series does not cancel.
pub fn poisson_split(n: usize, a: f64) -> (f64, f64) {
    assert!(n >= 1 && a >= 0.0);
    if a == 0.0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    if a < nf {
        // P = e^{-a} a^n/n! Σ_k a^k / ((n+1)...(n+k)).
        let lead = (nf * a.ln() - a - ln_factorial(n)).exp();
        let (mut term, mut sum, mut k) = (1.0, 1.0, 1.0);
        while term > 1e-17 * sum {
            term *= a / (nf + k);
            sum += term;
            k += 1.0;
        }
        let p = lead * sum;
        (p, 1.0 - p)
    } else {
        // Q = e^{-a} a^{n-1}/(n-1)! Σ_k (n-1)(n-2).../a^k.
        let lead = ((nf - 1.0) * a.ln() - a - ln_factorial(n - 1)).exp();
        let (mut term, mut sum) = (1.0, 1.0);
        for j in (1..n).rev() {
            term *= j as f64 / a;
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        let q = lead * sum;
        (1.0 - q, q)
    }
}

/// One-point density `ρ₁(x) = (N/π) Q(N, N|x|²)`.
pub fn one_point(n: usize, x: Point2) -> f64 {
    n as f64 / PI * poisson_split(n, n as f64 * x.dot(x)).1
}

/// `Σ_{m<N} (N x ȳ)^m/m!` times `e^{-N(|x|²+|y|²)/2}` as `(re, im)`, summed
/// outward from the largest term with compensated accumulation.
fn scaled_partial_sum(n: usize, x: Point2, y: Point2) -> (f64, f64) {
    let nf = n as f64;
    let damp = -0.5 * nf * (x.dot(x) + y.dot(y));
    // x ȳ = (x.x + i x.y)(y.x - i y.y).
    let zr = x.x * y.x + x.y * y.y;
    let zi = x.y * y.x - x.x * y.y;
    let a = (zr * zr + zi * zi).sqrt();
    if a == 0.0 {
        return (damp.exp(), 0.0);
    }
    let phi = zi.atan2(zr);
    let na = nf * a;
    let mstar = (na.floor() as usize).min(n - 1);
    let lstar = mstar as f64 * na.ln() - ln_factorial(mstar) + damp;
    let mut acc = Compensated::default();
    let (s, c) = (mstar as f64 * phi).sin_cos();
    let top = lstar.exp();
    acc.add(top * c, top * s);
    let (ds, dc) = phi.sin_cos();
    // Upward.
    let (mut mag, mut re, mut im) = (top, c, s);
    for m in mstar + 1..n {
        mag *= na / m as f64;
        (re, im) = (re * dc - im * ds, re * ds + im * dc);
        if mag < 1e-300 {
            break;
        }
        acc.add(mag * re, mag * im);
    }
    // Downward.
    let (mut mag, mut re, mut im) = (top, c, s);
    for m in (0..mstar).rev() {
        mag *= (m + 1) as f64 / na;
        (re, im) = (re * dc + im * ds, im * dc - re * ds);
        if mag < 1e-300 {
            break;
        }
        acc.add(mag * re, mag * im);
    }
    acc.total()
}

#[derive(Default)]
struct Compensated {
    re: (f64, f64),
    im: (f64, f64),
}

impl Compensated {
    fn add(&mut self, re: f64, im: f64) {
        fn step(s: &mut (f64, f64), x: f64) {
            let t = s.0 + x;
            if s.0.abs() >= x.abs() {
                s.1 += (s.0 - t) + x;
            } else {
                s.1 += (x - t) + s.0;
            }
            s.0 = t;
        }
        step(&mut self.re, re);
        step(&mut self.im, im);
    }

    fn total(&self) -> (f64, f64) {
        (self.re.0 + self.re.1, self.im.0 + self.im.1)
    }
}

/// `W_N(x, y)`.
pub fn weighted_kernel(n: usize, x: Point2, y: Point2) -> f64 {
    let (re, im) = scaled_partial_sum(n, x, y);
    let c = n as f64 / PI;
    c * c * (re * re + im * im)
}

/// `G_N(x, y) = (N/π)² e^{-N|x-y|²}`, the untruncated kernel.
pub fn gaussian_kernel(n: usize, x: Point2, y: Point2) -> f64 {
    let c = n as f64 / PI;
    let d = x.sub(y);
    c * c * (-(n as f64) * d.dot(d)).exp()
}

/// Edges farther than `sqrt(PRUNE / N)` contribute below `e^{-PRUNE}`.
const PRUNE: f64 = 40.0;

/// `∫ e^{-N|x-y|²} s(y) dy` with `s = 1_{Ω^c}` when `x ∈ Ω` and `s = -1_Ω`
/// otherwise: each edge contributes the gaussian mass of the region beyond it
/// inside the wedge it subtends from `x`, signed by orientation.
pub fn gaussian_tails(n: usize, poly: &Polygon, x: Point2) -> Result<f64> {
    let nf = n as f64;
    let reach = (PRUNE / nf).sqrt();
    let tol = Tolerance::rel(1e-12).with_abs(1e-16);
    let mut total = 0.0;
    for e in poly.edges_within(x, reach) {
        let (a, b) = poly.edge(e);
        let (u, v, d) = (a.sub(x), b.sub(x), b.sub(a));
        let len = d.norm();
        let c = u.cross(v).abs() / len;
        if c == 0.0 {
            continue;
        }
        let mut nrm = Point2::new(d.y / len, -d.x / len);
        if nrm.dot(u) < 0.0 {
            nrm = nrm.scale(-1.0);
        }
        let (tu, tv) = (nrm.cross(u).atan2(nrm.dot(u)), nrm.cross(v).atan2(nrm.dot(v)));
        let kappa = nf * c * c;
        let f = |t: f64| {
            let cs = t.cos();
            (-kappa / (cs * cs)).exp()
        };
        total += adaptive(f, tu, tv, tol)?;
    }
    Ok(total / (2.0 * nf))
}

/// `Σ_{k≥0} (Na)^k N!/(N+k)! e^{ikφ}` as `(re, im)`.
fn scaled_tail(n: usize, na: f64, phi: f64) -> (f64, f64) {
    let (ds, dc) = phi.sin_cos();
    let mut acc = Compensated::default();
    let (mut mag, mut re, mut im) = (1.0f64, 1.0f64, 0.0f64);
    let mut m = n;
    loop {
        acc.add(mag * re, mag * im);
        m += 1;
        mag *= na / m as f64;
        (re, im) = (re * dc - im * ds, re * ds + im * dc);
        let (sr, si) = acc.total();
        if (na < m as f64 && mag < 1e-18 * (sr * sr + si * si).sqrt()) || m > n + 10_000_000 {
            break;
        }
    }
    acc.total()
}

/// `x ȳ` as `(|x ȳ|, arg, re, im)`.
fn conj_product(x: Point2, y: Point2) -> (f64, f64, f64, f64) {
    let zr = x.x * y.x + x.y * y.y;
    let zi = x.y * y.x - x.x * y.y;
    ((zr * zr + zi * zi).sqrt(), zi.atan2(zr), zr, zi)
}

/// `ln(|e^{N z w̄} - K_N(z, w)| √N e^{-N|z||w|})`; `-∞` when `z w̄ = 0`.
pub fn ln_normalized_tail(n: usize, z: Point2, w: Point2) -> f64 {
    let nf = n as f64;
    let (a, phi, _, _) = conj_product(z, w);
    if a == 0.0 {
        return f64::NEG_INFINITY;
    }
    let na = nf * a;
    let lead = nf * na.ln() - ln_factorial(n) - na;
    let (sr, si) = scaled_tail(n, na, phi);
    lead + 0.5 * (sr * sr + si * si).ln() + 0.5 * nf.ln()
}

/// `W_N(x, y) / G_N(x, y) = |1 - e^{-N x ȳ} Σ_{m≥N} (N x ȳ)^m/m!|²`.
///
/// The tail series has no cancellation for `|x ȳ| < ½`, where the partial
/// sum behind [`weighted_kernel`] loses everything once `x` and `y` are far
/// apart in angle. Larger products fall back to the quotient.
pub fn kernel_ratio(n: usize, x: Point2, y: Point2) -> f64 {
    let nf = n as f64;
    let (a, phi, zr, zi) = conj_product(x, y);
    if a == 0.0 {
        return 1.0;
    }
    if a >= 0.5 {
        return weighted_kernel(n, x, y) / gaussian_kernel(n, x, y);
    }
    let na = nf * a;
    let (sr, si) = scaled_tail(n, na, phi);
    let mag = (nf * na.ln() - ln_factorial(n) - nf * zr).exp();
    let (s, c) = (nf * (phi - zi)).sin_cos();
    let (rr, ri) = (mag * (c * sr - s * si), mag * (s * sr + c * si));
    (1.0 - rr).powi(2) + ri * ri
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{rectangle, regular_polygon};
    use crate::numerics::quad::gl_integrate;
    use proptest::prelude::*;

    fn naive_w(n: usize, x: Point2, y: Point2) -> f64 {
        // Direct complex sum for small N.
        let (mut re, mut im) = (0.0, 0.0);
        let (zr, zi) = (n as f64 * (x.x * y.x + x.y * y.y), n as f64 * (x.y * y.x - x.x * y.y));
        let (mut tr, mut ti) = (1.0, 0.0);
        for m in 0..n {
            re += tr;
            im += ti;
            let k = (m + 1) as f64;
            (tr, ti) = ((tr * zr - ti * zi) / k, (tr * zi + ti * zr) / k);
        }
        let c = n as f64 / PI;
        c * c * (re * re + im * im) * (-(n as f64) * (x.dot(x) + y.dot(y))).exp()
    }

    #[test]
    fn weighted_kernel_matches_naive_sum() {
        let pts = [
            Point2::new(0.1, 0.2),
            Point2::new(-0.3, 0.05),
            Point2::new(0.0, -0.45),
            Point2::new(0.6, 0.3),
        ];
        for n in [1, 2, 5, 17, 40] {
            for &x in &pts {
                for &y in &pts {
                    let (a, b) = (weighted_kernel(n, x, y), naive_w(n, x, y));
                    let scale = (n as f64 / PI).powi(2);
                    assert!((a - b).abs() <= 1e-12 * b + 1e-15 * scale, "n={n} {a} {b}");
                }
            }
        }
    }

    #[test]
    fn n_one_kernel_is_product_of_gaussians() {
        let (x, y) = (Point2::new(0.3, -0.1), Point2::new(-0.2, 0.4));
        let w = weighted_kernel(1, x, y);
        let want = (-(x.dot(x)) - y.dot(y)).exp() / (PI * PI);
        assert!((w - want).abs() < 1e-16);
    }

    #[test]
    fn large_n_kernel_approaches_gaussian_inside_disk() {
        let (x, y) = (Point2::new(0.3, -0.1), Point2::new(0.32, -0.08));
        for n in [200, 800, 5000] {
            let (w, g) = (weighted_kernel(n, x, y), gaussian_kernel(n, x, y));
            assert!((w / g - 1.0).abs() < 1e-10, "n={n}");
        }
    }

    #[test]
    fn poisson_split_matches_finite_sum() {
        for n in [1, 3, 10, 50] {
            for a in [0.01, 0.5, 3.0, 9.5, 10.0, 40.0, 80.0] {
                let q: f64 = (0..n)
                    .map(|m| (m as f64 * f64::ln(a) - a - ln_factorial(m)).exp())
                    .sum();
                let (p, qq) = poisson_split(n, a);
                assert!((qq - q).abs() < 1e-13, "n={n} a={a}");
                assert!((p + qq - 1.0).abs() < 1e-15);
                assert!(p >= 0.0 && qq >= 0.0);
            }
        }
        // Tiny P without cancellation: n = 1 gives 1 - e^{-a}.
        let (p, _) = poisson_split(1, 1e-9);
        assert!((p / (-f64::exp_m1(-1e-9)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_tails_on_rectangle_match_erf() {
        // Mass of the complement seen from inside, and of the set from outside.
        let r = rectangle(-0.2, -0.1, 0.3, 0.25).unwrap();
        let n = 50;
        // One-dimensional factors by high-order Gauss-Legendre.
        let g = |a: f64, b: f64| gl_integrate(|u| (-(n as f64) * u * u).exp(), a, b, 200);
        let mass = |p: Point2| g(-0.2 - p.x, 0.3 - p.x) * g(-0.1 - p.y, 0.25 - p.y);
        for p in [Point2::new(0.0, 0.0), Point2::new(0.29, 0.2), Point2::new(-0.19, -0.05)] {
            let want = PI / n as f64 - mass(p);
            let got = gaussian_tails(n, &r, p).unwrap();
            assert!((got - want).abs() < 1e-14, "{p:?}: {got} {want}");
        }
        for p in [Point2::new(0.35, 0.0), Point2::new(-0.25, 0.3)] {
            let got = gaussian_tails(n, &r, p).unwrap();
            assert!((got + mass(p)).abs() < 1e-14, "{p:?}");
        }
    }

    #[test]
    fn kernel_ratio_matches_extended_precision() {
        // 60-digit values of |e^{-Nz} Σ_{m<N} (Nz)^m/m!|².
        let x = Point2::new(0.6, 0.3);
        let y = Point2::new(-0.5, 0.4);
        let r3 = kernel_ratio(3, x, y);
        assert!((r3 - 0.871_168_905_827_451_9).abs() < 1e-14, "{r3}");
        let r40 = kernel_ratio(40, x, y);
        assert!((r40 / 1_126_319_231.880_000_3 - 1.0).abs() < 1e-11, "{r40}");
        // Far apart in angle: the quotient W/G is meaningless here.
        let r = kernel_ratio(400, Point2::new(0.25, 0.0), Point2::new(-0.2, 0.1));
        assert!((r - 1.0).abs() < 1e-15, "{r}");
    }

    #[test]
    fn zero_probe_has_no_tail() {
        for n in [1, 10, 100] {
            assert_eq!(
                ln_normalized_tail(n, Point2::default(), Point2::new(0.5, 0.1)),
                f64::NEG_INFINITY
            );
        }
    }

    #[test]
    fn tail_matches_direct_difference_for_small_n() {
        let (z, w) = (Point2::new(0.4, 0.2), Point2::new(-0.1, 0.5));
        for n in [1, 4, 12] {
            let nf = n as f64;
            let (zr, zi) = (nf * (z.x * w.x + z.y * w.y), nf * (z.y * w.x - z.x * w.y));
            // e^{N z w̄} minus the partial sum, directly.
            let (er, ei) = (zr.exp() * zi.cos(), zr.exp() * zi.sin());
            let (mut kr, mut ki, mut tr, mut ti) = (0.0, 0.0, 1.0, 0.0);
            for m in 0..n {
                kr += tr;
                ki += ti;
                let k = (m + 1) as f64;
                (tr, ti) = ((tr * zr - ti * zi) / k, (tr * zi + ti * zr) / k);
            }
            let d = ((er - kr).powi(2) + (ei - ki).powi(2)).sqrt();
            let want = (d * nf.sqrt() * (-nf * z.norm() * w.norm()).exp()).ln();
            assert!((ln_normalized_tail(n, z, w) - want).abs() < 1e-9, "n={n}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn one_point_density_is_bounded(n in 1usize..400, r in 0.0f64..1.5, th in 0.0f64..6.3) {
            let x = Point2::new(r * th.cos(), r * th.sin());
            let rho = one_point(n, x);
            let q = poisson_split(n, n as f64 * x.dot(x)).1;
            prop_assert!(q > 0.0 && q <= 1.0);
            prop_assert!((rho * PI / n as f64 - q).abs() <= 1e-15);
            // ρ₁(x) = sqrt(W(x, x)).
            let w = weighted_kernel(n, x, x);
            prop_assert!((w.sqrt() - rho).abs() <= 1e-10 * rho.max(1e-300));
        }

        #[test]
        fn weighted_kernel_is_symmetric(n in 1usize..100, a in -0.9f64..0.9, b in -0.9f64..0.9, c in -0.9f64..0.9, d in -0.9f64..0.9) {
            let (x, y) = (Point2::new(a, b), Point2::new(c, d));
            let (p, q) = (weighted_kernel(n, x, y), weighted_kernel(n, y, x));
            prop_assert!((p - q).abs() <= 1e-12 * p.max(q).max(1e-300));
        }

        #[test]
        fn tails_inside_disk_polygon_are_bounded(n in 5usize..500, r in 0.0f64..0.45, th in 0.0f64..6.3) {
            let p = regular_polygon(64, 0.5, Point2::default()).unwrap();
            let x = Point2::new(r * th.cos(), r * th.sin());
            let t = gaussian_tails(n, &p, x).unwrap();
            prop_assert!(t >= -1e-15 && t <= PI / n as f64);
        }
    }
}
