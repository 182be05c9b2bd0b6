use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use nlab_core::dimension::{check_nonlattice, fit_minkowski, log_grid, solve_alpha};
use nlab_core::energy::{
    energy_covariogram, energy_direct_mc, renewal_check, signed_energy, sweep_and_fit, RenewalOptions,
};
use nlab_core::geometry::io::{to_svg, write_csv};
use nlab_core::ginibre::{
    self, covariance_two_sets, kernel_variance_exact, remainder_check, sample_counts, sobolev_variance_check,
    variance_scaling_fit, GinibreConfig, KernelQuadrature, ScalingMethod,
};
use nlab_core::harness::{self, config, run_experiment, Cache, Experiment, ExperimentSpec};
use nlab_core::{Error, Point2, Polygon, RadialKernel, Result, ShapeSpec, SnowflakeSpec};

#[derive(Parser)]
#[command(
    name = "nlab",
    version,
    about = "Nonlocal energies of fractal domains and Ginibre fluctuations"
)]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Snowflake dimension, lattice test and Minkowski fits.
    #[command(subcommand)]
    Dimension(DimensionCmd),
    /// Polygon export.
    #[command(subcommand)]
    Geometry(GeometryCmd),
    /// Kernel moments.
    #[command(subcommand)]
    Kernel(KernelCmd),
    /// Nonlocal energy estimates, sweeps and the renewal check.
    #[command(subcommand)]
    Energy(EnergyCmd),
    /// Ginibre ensemble experiments.
    #[command(subcommand)]
    Ginibre(GinibreCmd),
    /// Run an experiment from a spec file.
    Run(RunArgs),
    /// List the experiments and their parameters.
    ListExperiments {
        /// Also print each experiment's parameters.
        #[arg(long)]
        params: bool,
    },
}

#[derive(Args, Clone)]
struct ShapeArgs {
    /// `disk[:r]`, `square[:side]`, `rect:x0:y0:x1:y1`, `halfdisk:upper:r`,
    /// `snowflake[:eta:depth[:side]]`.
    #[arg(long, default_value = "disk:1")]
    shape: String,
    /// Snowflake scale when `--shape snowflake`.
    #[arg(long, default_value_t = 3.0)]
    eta: f64,
    /// Snowflake depth when `--shape snowflake`.
    #[arg(long, default_value_t = 6)]
    depth: u32,
    /// Snowflake side when `--shape snowflake`.
    #[arg(long, default_value_t = 1.0)]
    side: f64,
}

impl ShapeArgs {
    fn spec(&self) -> Result<ShapeSpec> {
        match self.shape.trim() {
            "snowflake" => Ok(ShapeSpec::Snowflake(
                SnowflakeSpec::new(self.eta, self.depth).with_side(self.side),
            )),
            "disk" => "disk:1".parse(),
            s => s.parse(),
        }
    }

    fn build(&self) -> Result<(ShapeSpec, Polygon)> {
        let s = self.spec()?;
        let p = s.build()?;
        Ok((s, p))
    }
}

#[derive(Subcommand)]
enum DimensionCmd {
    /// Root of the dimension equation.
    Solve {
        #[arg(long)]
        eta: f64,
    },
    /// Lattice classification of the scale ratio.
    Lattice {
        #[arg(long)]
        eta: f64,
        #[arg(long, default_value = "1000000")]
        max_den: String,
    },
    /// Minkowski dimension from tube volumes.
    Fit {
        #[command(flatten)]
        shape: ShapeArgs,
        #[arg(long, default_value_t = 1e-3)]
        tmin: f64,
        #[arg(long, default_value_t = 1e-1)]
        tmax: f64,
        #[arg(long, default_value_t = 12)]
        points: usize,
        #[arg(long, default_value = "2e6")]
        samples: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV of (t, volume, stderr).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum GeometryCmd {
    Export {
        #[command(flatten)]
        shape: ShapeArgs,
        #[arg(long, default_value = "svg")]
        format: String,
        /// Output file; standard output if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum KernelCmd {
    Info {
        #[arg(long, default_value = "gaussian")]
        kernel: String,
        /// Moment orders.
        #[arg(long, default_value = "0,1")]
        gamma: String,
    },
}

#[derive(Subcommand)]
enum EnergyCmd {
    /// Energy at a single scale.
    Estimate {
        #[command(flatten)]
        shape: ShapeArgs,
        #[arg(long, default_value = "gaussian")]
        kernel: String,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value = "1e6")]
        samples: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// `direct` or `covariogram`.
        #[arg(long, default_value = "direct")]
        method: String,
    },
    /// Energy over a grid of scales with the log-log slope.
    Sweep {
        #[command(flatten)]
        shape: ShapeArgs,
        #[arg(long, default_value = "gaussian")]
        kernel: String,
        #[arg(long, default_value = "0.2:0.0125:log12")]
        tgrid: String,
        #[arg(long, default_value = "1e6")]
        samples: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Exponent for the prefactor series; 3, or 4 - alpha for snowflakes,
        /// if absent.
        #[arg(long)]
        beta_ref: Option<f64>,
        /// CSV of (t, estimate, stderr, prefactor).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Self-similar remainder and log-periodic profile.
    Renewal {
        #[arg(long, default_value_t = 3.0)]
        eta: f64,
        #[arg(long, default_value_t = 8)]
        depth: u32,
        #[arg(long, default_value_t = 0.1)]
        t0: f64,
        #[arg(long, default_value_t = 4)]
        levels: usize,
        #[arg(long, default_value = "1e6")]
        samples: String,
        #[arg(long, default_value_t = 0)]
        periods: usize,
        #[arg(long, default_value_t = 8)]
        points_per_period: usize,
        #[arg(long, default_value = "gaussian")]
        kernel: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct CacheArgs {
    #[arg(long, default_value = ".nlab-cache")]
    cache_dir: PathBuf,
    #[arg(long)]
    no_cache: bool,
}

#[derive(Subcommand)]
enum GinibreCmd {
    /// Eigenvalue counts from sampled matrices.
    Mc {
        #[arg(long = "N")]
        n: usize,
        #[arg(long, default_value = "2000")]
        trials: String,
        #[command(flatten)]
        shape: ShapeArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        cache: CacheArgs,
    },
    /// Kernel variance by quadrature.
    Exact {
        #[arg(long = "N")]
        n: usize,
        #[command(flatten)]
        shape: ShapeArgs,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[command(flatten)]
        cache: CacheArgs,
    },
    /// Log-log growth of the variance.
    Scaling {
        #[command(flatten)]
        shape: ShapeArgs,
        /// `exact-kernel`, `eigen-mc` or `gaussian-approx`.
        #[arg(long, default_value = "gaussian-approx")]
        method: String,
        #[arg(long = "Ngrid", default_value = "1e2:1e5:log8")]
        n_grid: String,
        /// Trials, samples or cubature evaluations per size.
        #[arg(long, default_value = "1e6")]
        budget: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        cache: CacheArgs,
    },
    /// Kolmogorov-Smirnov test of standardized counts.
    Clt {
        #[arg(long = "N", default_value_t = 200)]
        n: usize,
        #[arg(long, default_value = "2000")]
        trials: String,
        #[command(flatten)]
        shape: ShapeArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        cache: CacheArgs,
    },
    /// Decay of the truncated kernel.
    Remainder {
        #[arg(long, default_value_t = 0.7)]
        lambda: f64,
        #[arg(long = "Nmin", default_value_t = 10)]
        n_min: usize,
        #[arg(long = "Nmax", default_value_t = 200)]
        n_max: usize,
        #[arg(long, default_value_t = 10)]
        step: usize,
        #[arg(long, default_value_t = 200)]
        probes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Covariance of the counts in two disjoint polygons.
    Covariance {
        #[arg(long = "N")]
        n: usize,
        #[arg(long, default_value = "halfdisk:upper:0.5")]
        first: String,
        #[arg(long, default_value = "halfdisk:lower:0.5")]
        second: String,
        #[command(flatten)]
        cache: CacheArgs,
    },
    /// Variance of a smooth bump statistic.
    Sobolev {
        #[arg(long, default_value_t = 0.0)]
        cx: f64,
        #[arg(long, default_value_t = 0.0)]
        cy: f64,
        #[arg(long, default_value_t = 0.3)]
        radius: f64,
        #[arg(long = "Ngrid", default_value = "50,100,200,400")]
        n_grid: String,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Output directory, overriding `out` in the INI file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed, overriding the INI file.
    #[arg(long)]
    seed: Option<u64>,
    /// Parameter overrides `key=value`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn count(key: &str, v: &str) -> Result<u64> {
    config::int(key, v)
}

fn cached<T, F>(c: &CacheArgs, namespace: &str, key: &serde_json::Value, f: F) -> Result<T>
where
    T: serde::Serialize + serde::de::DeserializeOwned,
    F: FnOnce() -> Result<T>,
{
    if c.no_cache {
        return f();
    }
    let (v, hit) = Cache::new(&c.cache_dir).get_or_compute(namespace, key, f)?;
    if hit {
        log::info!("cache hit in {}", c.cache_dir.display());
    }
    Ok(v)
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => Ok(fs::write(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn dimension(cmd: DimensionCmd) -> Result<()> {
    match cmd {
        DimensionCmd::Solve { eta } => {
            let alpha = solve_alpha(eta)?;
            print_json(&json!({ "eta": eta, "alpha": alpha, "residual": nlab_core::dimension::phi(eta, alpha) }))
        }
        DimensionCmd::Lattice { eta, max_den } => {
            let v = check_nonlattice(eta, count("max-den", &max_den)?)?;
            print_json(&json!({ "eta": eta, "result": v }))
        }
        DimensionCmd::Fit {
            shape,
            tmin,
            tmax,
            points,
            samples,
            seed,
            csv,
        } => {
            let (spec, poly) = shape.build()?;
            let grid = log_grid(tmax, tmin, points);
            let fit = fit_minkowski(&poly, &grid, count("samples", &samples)?, seed)?;
            if let Some(path) = csv {
                let rows = fit
                    .t_grid
                    .iter()
                    .zip(&fit.volumes)
                    .map(|(t, v)| vec![*t, v.value, v.stderr]);
                write_table(&path, &["t", "volume", "stderr"], rows.collect())?;
            }
            print_json(&json!({ "shape": spec, "seed": seed, "fit": fit }))
        }
    }
}

fn write_table(path: &Path, header: &[&str], rows: Vec<Vec<f64>>) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("`{}` is not a file path", path.display())))?;
    let mut t = harness::Table::new(name.to_string_lossy(), header);
    for r in rows {
        t.push(r);
    }
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    t.write(dir)
}

fn energy(cmd: EnergyCmd) -> Result<()> {
    match cmd {
        EnergyCmd::Estimate {
            shape,
            kernel,
            t,
            samples,
            seed,
            method,
        } => {
            let (spec, poly) = shape.build()?;
            let k: RadialKernel = kernel.parse()?;
            let n = count("samples", &samples)?;
            let value = match (method.as_str(), k.is_nonnegative()) {
                ("direct", true) => json!(energy_direct_mc(&poly, &k, t, n, seed)?),
                ("direct", false) => json!(signed_energy(&poly, t, n, seed)?),
                ("covariogram", _) => {
                    let reach = k.effective_radius(1e-9)?;
                    let grid: Vec<f64> = (0..64).map(|i| reach * i as f64 / 63.0).collect();
                    json!(energy_covariogram(&poly, &k, t, &grid, n / 64, seed)?)
                }
                _ => return Err(Error::invalid(format!("unknown method `{method}`"))),
            };
            print_json(&json!({ "shape": spec, "kernel": k.to_string(), "t": t, "energy": value }))
        }
        EnergyCmd::Sweep {
            shape,
            kernel,
            tgrid,
            samples,
            seed,
            beta_ref,
            out,
        } => {
            let (spec, poly) = shape.build()?;
            let k: RadialKernel = kernel.parse()?;
            let grid = config::grid("tgrid", &tgrid)?;
            let beta = match (beta_ref, spec.snowflake()) {
                (Some(b), _) => b,
                (None, Some(s)) => 4.0 - solve_alpha(s.eta)?,
                (None, None) => 3.0,
            };
            let sweep = sweep_and_fit(&poly, &k, &grid, count("samples", &samples)?, seed, Some(beta))?;
            if let Some(path) = out {
                let pre = sweep.prefactor_series.clone().unwrap_or_default();
                let rows = sweep.t_grid.iter().zip(&sweep.estimates).zip(&pre);
                let rows = rows.map(|((t, e), p)| vec![*t, e.value, e.stderr, p.value]);
                write_table(&path, &["t", "estimate", "stderr", "prefactor"], rows.collect())?;
            }
            print_json(&json!({
                "shape": spec,
                "kernel": k.to_string(),
                "seed": seed,
                "beta_hat": sweep.beta_hat,
                "beta_stderr": sweep.beta_stderr,
                "beta_ref": beta,
                "extrapolated_prefactor": sweep.extrapolated_prefactor,
            }))
        }
        EnergyCmd::Renewal {
            eta,
            depth,
            t0,
            levels,
            samples,
            periods,
            points_per_period,
            kernel,
            seed,
        } => {
            let r = renewal_check(&RenewalOptions {
                eta,
                depth,
                side: 1.0,
                kernel: kernel.parse()?,
                t0,
                levels,
                samples: count("samples", &samples)?,
                seed,
                periods,
                points_per_period,
            })?;
            print_json(&json!({
                "report": r,
                "remainder_bounded": r.remainder_bounded(),
                "amplitudes_decreasing": r.amplitudes_decreasing(),
            }))
        }
    }
}

fn ginibre_cmd(cmd: GinibreCmd) -> Result<()> {
    match cmd {
        GinibreCmd::Mc {
            n,
            trials,
            shape,
            seed,
            cache,
        } => {
            let (spec, poly) = shape.build()?;
            let trials = count("trials", &trials)?;
            let key = json!({ "n": n, "trials": trials, "shape": spec, "seed": seed });
            let s = cached(&cache, "ginibre-mc", &key, || {
                sample_counts(&GinibreConfig::new(n, trials, seed)?, &poly)
            })?;
            print_json(&json!({
                "N": n,
                "trials": trials,
                "shape": spec,
                "mean": s.mean,
                "mean_stderr": s.mean_stderr(),
                "variance": s.variance,
                "variance_stderr": s.variance_stderr,
            }))
        }
        GinibreCmd::Exact { n, shape, tol, cache } => {
            let (spec, poly) = shape.build()?;
            let key = json!({ "n": n, "shape": spec, "tol": tol });
            let r = cached(&cache, "ginibre-exact", &key, || {
                kernel_variance_exact(n, &poly, &KernelQuadrature::default().with_rel(tol))
            })?;
            print_json(&json!({ "N": n, "shape": spec, "variance": r }))
        }
        GinibreCmd::Scaling {
            shape,
            method,
            n_grid,
            budget,
            seed,
            cache,
        } => {
            let (spec, poly) = shape.build()?;
            let m: ScalingMethod = method.parse()?;
            let grid = config::int_grid("Ngrid", &n_grid)?;
            let budget = count("budget", &budget)?;
            let alpha = match spec.snowflake() {
                Some(s) => solve_alpha(s.eta)?,
                None => 1.0,
            };
            let key = json!({ "shape": spec, "method": m, "grid": grid, "budget": budget, "seed": seed });
            let fit = cached(&cache, "ginibre-scaling", &key, || {
                variance_scaling_fit(&poly, &grid, m, budget, seed, alpha)
            })?;
            print_json(&json!({ "shape": spec, "fit": fit, "exponent_ref": alpha / 2.0 }))
        }
        GinibreCmd::Clt {
            n,
            trials,
            shape,
            seed,
            cache,
        } => {
            let (spec, poly) = shape.build()?;
            let trials = count("trials", &trials)?;
            let key = json!({ "n": n, "trials": trials, "shape": spec, "seed": seed });
            let s = cached(&cache, "ginibre-mc", &key, || {
                sample_counts(&GinibreConfig::new(n, trials, seed)?, &poly)
            })?;
            let r = ginibre::clt_from_counts(&s, n, seed)?;
            print_json(&json!({ "shape": spec, "report": r }))
        }
        GinibreCmd::Remainder {
            lambda,
            n_min,
            n_max,
            step,
            probes,
            seed,
        } => {
            let ns: Vec<usize> = (n_min..=n_max).step_by(step.max(1)).collect();
            let r = remainder_check(lambda, &ns, probes, seed)?;
            print_json(&json!({ "table": r, "bound": ginibre::delta(lambda) }))
        }
        GinibreCmd::Covariance {
            n,
            first,
            second,
            cache,
        } => {
            let a: ShapeSpec = first.parse()?;
            let b: ShapeSpec = second.parse()?;
            let key = json!({ "n": n, "a": a, "b": b });
            let c = cached(&cache, "ginibre-covariance", &key, || {
                covariance_two_sets(n, &a.build()?, &b.build()?, &KernelQuadrature::default())
            })?;
            print_json(&json!({ "N": n, "first": a, "second": b, "covariance": c }))
        }
        GinibreCmd::Sobolev { cx, cy, radius, n_grid } => {
            let grid = config::int_grid("Ngrid", &n_grid)?;
            let t = sobolev_variance_check(Point2::new(cx, cy), radius, &grid)?;
            print_json(&json!({ "table": t, "gaps_shrink": t.gaps_shrink() }))
        }
    }
}

fn run(args: RunArgs) -> Result<bool> {
    let mut over = Vec::new();
    for kv in &args.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("`--set {kv}`: expected KEY=VALUE")))?;
        over.push((k.trim().to_string(), v.trim().to_string()));
    }
    if let Some(s) = args.seed {
        over.push(("seed".into(), s.to_string()));
    }
    if let Some(o) = &args.out {
        over.push(("out".into(), o.display().to_string()));
    }
    let spec = ExperimentSpec::load(&args.spec, &over)?;
    let record = run_experiment(&spec)?;
    for m in &record.metrics {
        println!("{}", m.line());
    }
    println!(
        "{} {} in {:.1}s -> {}",
        if record.passed { "PASSED" } else { "FAILED" },
        record.experiment,
        record.wall_time_s,
        spec.out_dir.display()
    );
    Ok(record.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Dimension(c) => dimension(c).map(|_| true),
        Command::Geometry(GeometryCmd::Export { shape, format, out }) => (|| {
            let (_, poly) = shape.build()?;
            let text = match format.as_str() {
                "svg" => to_svg(&poly),
                "csv" => {
                    let mut buf = Vec::new();
                    write_csv(&poly, &mut buf)?;
                    String::from_utf8(buf).expect("ascii")
                }
                f => return Err(Error::invalid(format!("unknown format `{f}` (svg, csv)"))),
            };
            write_or_print(out.as_deref(), &text)
        })()
        .map(|_| true),
        Command::Kernel(KernelCmd::Info { kernel, gamma }) => (|| {
            let k: RadialKernel = kernel.parse()?;
            let mut moments = Vec::new();
            for g in config::grid("gamma", &gamma)? {
                moments.push(json!({ "gamma": g, "moment": k.moment(g)? }));
            }
            print_json(&json!({ "kernel": k.to_string(), "nonnegative": k.is_nonnegative(), "moments": moments }))
        })()
        .map(|_| true),
        Command::Energy(c) => energy(c).map(|_| true),
        Command::Ginibre(c) => ginibre_cmd(c).map(|_| true),
        Command::Run(a) => run(a),
        Command::ListExperiments { params } => {
            for e in Experiment::ALL {
                println!("{:<20} {}", e.name(), e.description());
                if params {
                    for p in e.params() {
                        println!("    {:<18} = {:<36} {}", p.key, p.default, p.help);
                    }
                }
            }
            Ok(true)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::from(2)
        }
    }
}
