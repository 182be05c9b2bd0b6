use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use nlab_core::dimension::{solve_alpha, tube_volume};
use nlab_core::energy::energy_direct_mc;
use nlab_core::geometry::build_snowflake;
use nlab_core::ginibre::weights::kernel_ratio;
use nlab_core::ginibre::{kernel_variance_exact, sample_eigenvalues, KernelQuadrature};
use nlab_core::{rng, Point2, RadialKernel, ShapeSpec, SnowflakeSpec};

fn geometry(c: &mut Criterion) {
    let mut g = c.benchmark_group("snowflake");
    for depth in [4u32, 6, 8] {
        g.bench_with_input(BenchmarkId::new("build", depth), &depth, |b, &d| {
            b.iter(|| build_snowflake(&SnowflakeSpec::new(3.0, d)).unwrap())
        });
    }
    let poly = build_snowflake(&SnowflakeSpec::new(3.0, 8)).unwrap();
    let p = Point2::new(0.1, 0.2);
    g.bench_function("distance_to_boundary/depth8", |b| {
        b.iter(|| poly.distance_to_boundary(black_box(p)))
    });
    g.bench_function("contains/depth8", |b| b.iter(|| poly.contains(black_box(p))));
    g.finish();
}

fn dimension(c: &mut Criterion) {
    c.bench_function("solve_alpha", |b| b.iter(|| solve_alpha(black_box(5.0)).unwrap()));
    let poly = build_snowflake(&SnowflakeSpec::new(3.0, 6)).unwrap();
    c.bench_function("tube_volume/1e4", |b| {
        b.iter(|| tube_volume(&poly, 0.01, 10_000, 1).unwrap())
    });
}

fn energy(c: &mut Criterion) {
    let k = RadialKernel::gaussian();
    let mut g = c.benchmark_group("energy_direct_mc/1e4");
    for shape in ["disk:1", "square", "snowflake:3:6"] {
        let poly = shape.parse::<ShapeSpec>().unwrap().build().unwrap();
        g.bench_function(shape, |b| {
            b.iter(|| energy_direct_mc(&poly, &k, 0.02, 10_000, 7).unwrap())
        });
    }
    g.finish();
}

fn ginibre(c: &mut Criterion) {
    let mut g = c.benchmark_group("ginibre");
    g.sample_size(10);
    for n in [50usize, 200] {
        g.bench_with_input(BenchmarkId::new("eigenvalues", n), &n, |b, &n| {
            let mut r = rng::stream(3, "bench", n as u64);
            b.iter(|| sample_eigenvalues(n, &mut r).unwrap())
        });
    }
    let disk = "disk:0.5".parse::<ShapeSpec>().unwrap().build().unwrap();
    let q = KernelQuadrature::default().with_rel(1e-6);
    g.bench_function("kernel_variance_exact/20", |b| {
        b.iter(|| kernel_variance_exact(20, &disk, &q).unwrap())
    });
    let (x, y) = (Point2::new(0.6, 0.3), Point2::new(-0.5, 0.4));
    g.bench_function("kernel_ratio/400", |b| {
        b.iter(|| kernel_ratio(400, black_box(x), black_box(y)))
    });
    g.finish();
}

criterion_group!(benches, geometry, dimension, energy, ginibre);
criterion_main!(benches);
