use super::*;
use crate::geometry::{half_disks, rectangle, regular_polygon};

fn gaussian_mass_rect(x0: f64, y0: f64, x1: f64, y1: f64) -> f64 {
    // ∫ (1/π) e^{-|z|²} over the rectangle, by separable Gauss-Legendre.
    let g = |a: f64, b: f64| crate::numerics::quad::gl_integrate(|u| (-u * u).exp(), a, b, 64);
    g(x0, x1) * g(y0, y1) / PI
}

#[test]
fn n_one_variance_is_bernoulli() {
    let r = rectangle(-0.3, -0.2, 0.4, 0.5).unwrap();
    let p = gaussian_mass_rect(-0.3, -0.2, 0.4, 0.5);
    let v = kernel_variance_exact(1, &r, &KernelQuadrature::default()).unwrap();
    assert!(v.direct);
    assert!(
        (v.value - p * (1.0 - p)).abs() < 1e-8,
        "{} vs {}",
        v.value,
        p * (1.0 - p)
    );
}

#[test]
fn n_one_counts_are_bernoulli() {
    let r = rectangle(-0.3, -0.2, 0.4, 0.5).unwrap();
    let p = gaussian_mass_rect(-0.3, -0.2, 0.4, 0.5);
    let s = sample_counts(&GinibreConfig::new(1, 40_000, 3).unwrap(), &r).unwrap();
    let se = (p * (1.0 - p) / 40_000.0).sqrt();
    assert!((s.mean - p).abs() < 3.0 * se);
    assert!(s.counts.iter().all(|&c| c <= 1));
}

#[test]
fn closed_form_2x2_matches_dense_solver() {
    let mut r = rng::stream(1, "test_2x2", 0);
    for _ in 0..20 {
        let e: Vec<c64> = (0..4)
            .map(|_| c64::new(r.sample::<f64, _>(StandardNormal), r.sample::<f64, _>(StandardNormal)))
            .collect();
        let mut cf = eigenvalues_2x2(e[0], e[1], e[2], e[3]).to_vec();
        let m = Mat::from_fn(2, 2, |i, j| e[2 * i + j]);
        let mut dn = m.eigenvalues().unwrap();
        let key = |z: &c64| (z.re, z.im);
        cf.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        dn.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        for (a, b) in cf.iter().zip(&dn) {
            assert!((a - b).norm() < 1e-10);
        }
    }
}

#[test]
fn eigenvalue_trace_and_reproducibility() {
    let mut a = rng::stream(5, "t", 0);
    let mut b = rng::stream(5, "t", 0);
    let x = sample_eigenvalues(30, &mut a).unwrap();
    let y = sample_eigenvalues(30, &mut b).unwrap();
    assert_eq!(x, y);
    // Circular law: nearly all eigenvalues within radius ~1.
    let outside = x.iter().filter(|z| z.norm() > 1.3).count();
    assert!(outside <= 2);
}

#[test]
fn mean_count_matches_density() {
    let disk = regular_polygon(256, 0.5, Point2::default()).unwrap();
    let s = sample_counts(&GinibreConfig::new(100, 400, 7).unwrap(), &disk).unwrap();
    let want = 100.0 / PI * disk.area();
    assert!((s.mean - want).abs() < 3.0 * s.mean_stderr(), "{} vs {want}", s.mean);
    assert!(s.counts.iter().all(|&c| c <= 100));
    assert!(s.variance_stderr > 0.0);
}

#[test]
fn exact_variance_small_n_matches_mc() {
    let disk = regular_polygon(64, 0.4, Point2::default()).unwrap();
    let q = KernelQuadrature::default().with_rel(1e-7);
    let v = kernel_variance_exact(2, &disk, &q).unwrap();
    let s = sample_counts(&GinibreConfig::new(2, 100_000, 2).unwrap(), &disk).unwrap();
    assert!(
        (v.value - s.variance).abs() < 3.5 * s.variance_stderr,
        "{} vs {}±{}",
        v.value,
        s.variance,
        s.variance_stderr
    );
}

#[test]
fn large_n_variance_matches_gaussian_approx() {
    let disk = regular_polygon(128, 0.5, Point2::default()).unwrap();
    let v = kernel_variance_exact(100, &disk, &KernelQuadrature::default().with_rel(1e-7)).unwrap();
    assert!(!v.direct);
    let g = gaussian_approx_variance(100, &disk, 400_000, 1).unwrap();
    assert!((v.value - g.value).abs() < 3.5 * g.stderr, "{} vs {g:?}", v.value);
}

#[test]
fn covariance_is_symmetric_and_nonpositive() {
    let (up, lo) = half_disks(0.5, 32).unwrap();
    let q = KernelQuadrature::default().with_rel(1e-7);
    let a = covariance_two_sets(50, &up, &lo, &q).unwrap();
    let b = covariance_two_sets(50, &lo, &up, &q).unwrap();
    assert_eq!(a.value, b.value);
    assert!(a.value < 0.0);
    assert!(matches!(
        covariance_two_sets(50, &up, &up, &q),
        Err(Error::OverlappingPolygons)
    ));
    // Small N goes through the direct inner integral.
    let c = covariance_two_sets(3, &up, &lo, &q).unwrap();
    assert!(c.direct && c.value < 0.0);
}

#[test]
fn covariance_direct_and_gaussian_paths_agree() {
    // At moderate N both paths apply; the truncation term is below tolerance.
    let a = rectangle(-0.3, 0.0, 0.3, 0.3).unwrap();
    let b = rectangle(-0.3, -0.3, 0.3, 0.0).unwrap();
    let n = 12;
    let q = KernelQuadrature::default().with_rel(1e-8);
    let g = covariance_two_sets(n, &a, &b, &q).unwrap();
    assert!(g.direct);
    // Gaussian path by hand: (N/π)² ∫_a tails_b.
    let c = n as f64 / PI;
    let tris = crate::geometry::triangulate(&a);
    let h = crate::numerics::quad::adaptive_triangles(
        &tris,
        |x| c * c * weights::gaussian_tails(n, &b, Point2::new(x[0], x[1])).unwrap(),
        crate::numerics::quad::CubatureOptions {
            rel: 1e-9,
            ..Default::default()
        },
    )
    .unwrap();
    let bound = truncation_bound(n, a.max_radius()) * a.area() * b.area();
    assert!(
        (g.value - h.value).abs() <= bound + 1e-7,
        "{} {} {bound}",
        g.value,
        h.value
    );
}

#[test]
fn rejects_polygons_outside_unit_disk() {
    let big = regular_polygon(16, 1.2, Point2::default()).unwrap();
    assert!(kernel_variance_exact(10, &big, &KernelQuadrature::default()).is_err());
}

#[test]
fn dirichlet_energy_matches_grid_oracle() {
    let b = Bump::new(Point2::new(0.1, -0.1), 0.3).unwrap();
    let e = b.dirichlet_energy().unwrap();
    // Central differences on a grid over the support.
    let m = 600;
    let h = 0.6 / m as f64;
    let mut acc = 0.0;
    for i in 0..m {
        for j in 0..m {
            let x = Point2::new(-0.2 + (i as f64 + 0.5) * h, -0.4 + (j as f64 + 0.5) * h);
            let gx = (b.value(Point2::new(x.x + 1e-6, x.y)) - b.value(Point2::new(x.x - 1e-6, x.y))) / 2e-6;
            let gy = (b.value(Point2::new(x.x, x.y + 1e-6)) - b.value(Point2::new(x.x, x.y - 1e-6))) / 2e-6;
            acc += (gx * gx + gy * gy) * h * h;
        }
    }
    assert!((e / acc - 1.0).abs() < 1e-4, "{e} vs {acc}");
}

#[test]
fn bump_variance_vanishes_for_zero_bump() {
    let b = Bump::new(Point2::default(), 0.3).unwrap().scaled(0.0);
    assert_eq!(bump_variance(50, &b, &SobolevQuadrature::default()).unwrap(), 0.0);
    assert!(matches!(
        Bump::new(Point2::new(0.8, 0.0), 0.3),
        Err(Error::SupportTouchesUnitCircle { .. })
    ));
}

#[test]
fn remainder_rate_is_below_delta() {
    let ns: Vec<usize> = (2..=10).map(|k| 20 * k).collect();
    let t = remainder_check(0.7, &ns, 32, 1).unwrap();
    assert!(t.rate <= t.delta + 0.02, "{}", t.rate);
    assert!(t.rows.iter().all(|r| r.rho > 0.0));
    assert!(remainder_check(1.0, &ns, 4, 1).is_err());
}

#[test]
fn degenerate_polygon_has_zero_variance() {
    let tiny = rectangle(0.6, 0.6, 0.6 + 1e-5, 0.6 + 1e-5).unwrap();
    assert!(matches!(clt_test(&tiny, 5, 500, 1), Err(Error::ZeroVariance)));
}

#[test]
fn jittered_ks_accepts_binomial_and_rejects_squares() {
    // Binomial(400, 0.5) counts are close to normal.
    let mut r = rng::stream(2, "binom", 0);
    let x: Vec<f64> = (0..3000)
        .map(|_| (0..400).filter(|_| r.random::<bool>()).count() as f64)
        .collect();
    let ok = ks_normal_jittered(&x, 1, "j").unwrap();
    assert!(ok.p_value > 0.01, "{ok:?}");
    let y: Vec<f64> = (0..3000).map(|i| ((i % 7) as f64).powi(4)).collect();
    assert!(ks_normal_jittered(&y, 1, "j").unwrap().p_value < 0.01);
}

#[test]
fn scaling_method_parses() {
    assert_eq!(
        "gaussian-approx".parse::<ScalingMethod>().unwrap(),
        ScalingMethod::GaussianApprox
    );
    assert!("x".parse::<ScalingMethod>().is_err());
}
