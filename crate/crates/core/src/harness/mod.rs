//! Experiment recipes, result records and artifact emission.
//!
//! An experiment is described by a flat `key = value` file holding
//! `experiment`, `seed`, optionally `out`, and the experiment's own
//! parameters. Values given on the command line override the file, which
//! overrides the defaults. A run writes `summary.json`, one CSV per table,
//! `details.json` and SVG figures into the output directory.

pub mod cache;
pub mod config;
mod experiments;
pub mod svg;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use cache::Cache;
pub use config::{Kind, Param, Params};
pub use svg::{render_svg, Dataset, PlotKind, Series};

/// Content hash of the library sources at build time.
pub const CODE_VERSION: &str = env!("NLAB_SOURCE_HASH");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    DimensionEquation,
    Lattice,
    SnowflakeGeometry,
    MinkowskiFit,
    DiskPrefactor,
    FractalExponent,
    Renewal,
    GinibreLadder,
    Remainder,
    VarianceScaling,
    Clt,
    Covariance,
    Sobolev,
}

impl Experiment {
    pub const ALL: [Experiment; 13] = [
        Experiment::DimensionEquation,
        Experiment::Lattice,
        Experiment::SnowflakeGeometry,
        Experiment::MinkowskiFit,
        Experiment::DiskPrefactor,
        Experiment::FractalExponent,
        Experiment::Renewal,
        Experiment::GinibreLadder,
        Experiment::Remainder,
        Experiment::VarianceScaling,
        Experiment::Clt,
        Experiment::Covariance,
        Experiment::Sobolev,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::DimensionEquation => "dimension-equation",
            Experiment::Lattice => "lattice",
            Experiment::SnowflakeGeometry => "snowflake-geometry",
            Experiment::MinkowskiFit => "minkowski-fit",
            Experiment::DiskPrefactor => "disk-prefactor",
            Experiment::FractalExponent => "fractal-exponent",
            Experiment::Renewal => "renewal",
            Experiment::GinibreLadder => "ginibre-ladder",
            Experiment::Remainder => "remainder",
            Experiment::VarianceScaling => "variance-scaling",
            Experiment::Clt => "clt",
            Experiment::Covariance => "covariance",
            Experiment::Sobolev => "sobolev",
        }
    }

    pub fn description(self) -> &'static str {
        experiments::description(self)
    }

    pub fn params(self) -> &'static [Param] {
        experiments::params(self)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s.trim())
            .ok_or_else(|| Error::UnknownExperiment {
                name: s.trim().to_string(),
                valid: Experiment::ALL.map(|e| e.name()).join(", "),
            })
    }
}

pub fn list_experiments() -> Vec<(&'static str, &'static str)> {
    Experiment::ALL.iter().map(|e| (e.name(), e.description())).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub experiment: Experiment,
    pub params: Params,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl ExperimentSpec {
    /// Builds a spec from merged key-value pairs. `experiment` and `seed` are
    /// required; `out` defaults to `results/<experiment>`.
    pub fn from_map(mut map: BTreeMap<String, String>) -> Result<Self> {
        let experiment: Experiment = map
            .remove("experiment")
            .ok_or_else(|| Error::Config("missing key `experiment`".into()))?
            .parse()?;
        let seed = config::int(
            "seed",
            &map.remove("seed")
                .ok_or_else(|| Error::Config("missing key `seed`".into()))?,
        )?;
        let out_dir = map
            .remove("out")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("results").join(experiment.name()));
        let params = Params::resolve(experiment.params(), &map)?;
        Ok(Self {
            experiment,
            params,
            seed,
            out_dir,
        })
    }

    pub fn parse(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut map = config::parse_ini(text)?;
        for (k, v) in overrides {
            map.insert(k.clone(), v.clone());
        }
        Self::from_map(map)
    }

    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, overrides)
    }

    /// Defaults for `experiment` with the given seed.
    pub fn defaults(experiment: Experiment, seed: u64) -> Self {
        let mut map = BTreeMap::new();
        map.insert("experiment".to_string(), experiment.name().to_string());
        map.insert("seed".to_string(), seed.to_string());
        Self::from_map(map).expect("defaults validate")
    }

    pub fn with(mut self, key: &str, value: &str) -> Result<Self> {
        let mut map = self.params.map().clone();
        map.insert(key.to_string(), value.to_string());
        self.params = Params::resolve(self.experiment.params(), &map)?;
        Ok(self)
    }

    pub fn with_out(mut self, dir: impl Into<PathBuf>) -> Self {
        self.out_dir = dir.into();
        self
    }

    /// The canonical text form: experiment, seed and every effective
    /// parameter, sorted. The output directory is not part of it.
    pub fn canonical(&self) -> String {
        let mut s = format!("experiment = {}\nseed = {}\n", self.experiment, self.seed);
        for (k, v) in self.params.map() {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))[..16].to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Threshold {
    /// `|value - target| ≤ tol`.
    Within {
        target: f64,
        tol: f64,
    },
    /// `|value / target - 1| ≤ rel`.
    WithinRel {
        target: f64,
        rel: f64,
    },
    AtMost {
        max: f64,
    },
    Below {
        max: f64,
    },
    Above {
        min: f64,
    },
    Range {
        min: f64,
        max: f64,
    },
    /// `value = 1`.
    Holds,
    /// Reported only.
    Info,
}

impl Threshold {
    pub fn accepts(&self, v: f64) -> bool {
        match *self {
            Threshold::Within { target, tol } => (v - target).abs() <= tol,
            Threshold::WithinRel { target, rel } => (v / target - 1.0).abs() <= rel,
            Threshold::AtMost { max } => v <= max,
            Threshold::Below { max } => v < max,
            Threshold::Above { min } => v > min,
            Threshold::Range { min, max } => (min..=max).contains(&v),
            Threshold::Holds => v == 1.0,
            Threshold::Info => true,
        }
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Threshold::Within { target, tol } => write!(f, "{target} ± {tol:e}"),
            Threshold::WithinRel { target, rel } => write!(f, "{target} ± {}%", rel * 100.0),
            Threshold::AtMost { max } => write!(f, "≤ {}", shortest(max)),
            Threshold::Below { max } => write!(f, "< {}", shortest(max)),
            Threshold::Above { min } => write!(f, "> {}", shortest(min)),
            Threshold::Range { min, max } => write!(f, "in [{min}, {max}]"),
            Threshold::Holds => write!(f, "holds"),
            Threshold::Info => write!(f, "info"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub name: String,
    /// `None` when the computed value was not finite.
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    pub threshold: Threshold,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Metric {
    pub fn new(name: impl Into<String>, value: f64, threshold: Threshold) -> Self {
        let finite = value.is_finite();
        Self {
            name: name.into(),
            value: finite.then_some(value),
            stderr: None,
            threshold,
            pass: finite && threshold.accepts(value),
            note: None,
        }
    }

    pub fn flag(name: impl Into<String>, holds: bool) -> Self {
        Self::new(name, if holds { 1.0 } else { 0.0 }, Threshold::Holds)
    }

    pub fn info(name: impl Into<String>, value: f64) -> Self {
        Self::new(name, value, Threshold::Info)
    }

    pub fn with_stderr(mut self, se: f64) -> Self {
        self.stderr = se.is_finite().then_some(se);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn is_info(&self) -> bool {
        self.threshold == Threshold::Info
    }

    /// One human-readable line.
    pub fn line(&self) -> String {
        let status = match (self.is_info(), self.pass) {
            (true, _) => "INFO",
            (false, true) => "PASS",
            (false, false) => "FAIL",
        };
        let value = match self.value {
            Some(v) if v == 0.0 || (1e-3..1e6).contains(&v.abs()) => format!("{v:.6}"),
            Some(v) => format!("{v:.4e}"),
            None => "non-finite".into(),
        };
        let se = self.stderr.map(|s| format!(" ± {s:.2e}")).unwrap_or_default();
        let note = self.note.as_deref().map(|n| format!("  ({n})")).unwrap_or_default();
        format!("{status} {} = {value}{se} [{}]{note}", self.name, self.threshold)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub experiment: Experiment,
    pub spec_hash: String,
    pub code_version: String,
    pub seed: u64,
    pub params: BTreeMap<String, String>,
    pub metrics: Vec<Metric>,
    pub passed: bool,
    pub wall_time_s: f64,
}

impl ResultRecord {
    pub fn metric(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// The JSON form without timing fields.
    pub fn canonical_json(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("wall_time_s");
        }
        Ok(serde_json::to_string_pretty(&v)? + "\n")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }
}

/// Drops the timing field from a stored `summary.json`.
pub fn strip_timing(summary: &str) -> Result<String> {
    let mut v: serde_json::Value = serde_json::from_str(summary)?;
    if let Some(obj) = v.as_object_mut() {
        obj.remove("wall_time_s");
    }
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

/// Numeric table persisted as CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(file: impl Into<String>, header: &[&str]) -> Self {
        Self {
            file: file.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(dir.join(&self.file))?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|v| shortest(*v)))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest decimal that reads back to the same `f64`.
pub fn shortest(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub struct Plot {
    pub file: String,
    pub data: Dataset,
    pub kind: PlotKind,
}

/// Everything an experiment produces besides timing.
#[derive(Default)]
pub struct Outcome {
    pub metrics: Vec<Metric>,
    pub tables: Vec<Table>,
    pub plots: Vec<Plot>,
    pub details: serde_json::Map<String, serde_json::Value>,
}

impl Outcome {
    pub fn metric(&mut self, m: Metric) {
        self.metrics.push(m);
    }

    pub fn plot(&mut self, file: impl Into<String>, data: Dataset, kind: PlotKind) {
        self.plots.push(Plot {
            file: file.into(),
            data,
            kind,
        });
    }

    pub fn detail<T: Serialize>(&mut self, key: &str, value: &T) -> Result<()> {
        self.details.insert(key.to_string(), serde_json::to_value(value)?);
        Ok(())
    }
}

/// Runs the experiment, writes its artifacts and returns the record. Module
/// errors carry the name of the failing stage.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultRecord> {
    let start = Instant::now();
    log::info!("running {} (spec {})", spec.experiment, spec.hash());
    let outcome = experiments::run(spec)?;
    let passed = outcome.metrics.iter().all(|m| m.pass);
    let record = ResultRecord {
        experiment: spec.experiment,
        spec_hash: spec.hash(),
        code_version: CODE_VERSION.to_string(),
        seed: spec.seed,
        params: spec.params.map().clone(),
        metrics: outcome.metrics.clone(),
        passed,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    persist(spec, &record, &outcome).map_err(|e| e.in_stage("persist"))?;
    Ok(record)
}

fn persist(spec: &ExperimentSpec, record: &ResultRecord, outcome: &Outcome) -> Result<()> {
    let dir = &spec.out_dir;
    fs::create_dir_all(dir)?;
    fs::write(dir.join("spec.ini"), spec.canonical())?;
    fs::write(dir.join("summary.json"), record.to_json()?)?;
    let details = serde_json::Value::Object(outcome.details.clone());
    fs::write(dir.join("details.json"), serde_json::to_string_pretty(&details)? + "\n")?;
    for t in &outcome.tables {
        t.write(dir)?;
    }
    for p in &outcome.plots {
        fs::write(dir.join(&p.file), render_svg(&p.data, p.kind)?)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unknown_experiment_lists_valid_names() {
        let e = ExperimentSpec::parse("experiment = nope\nseed = 1\n", &[]).unwrap_err();
        let msg = e.to_string();
        assert!(
            msg.contains("nope") && msg.contains("disk-prefactor") && msg.contains("sobolev"),
            "{msg}"
        );
    }

    #[test]
    fn seed_is_required() {
        let e = ExperimentSpec::parse("experiment = remainder\n", &[]).unwrap_err();
        assert!(e.to_string().contains("seed"));
    }

    #[test]
    fn cli_overrides_file_overrides_defaults() {
        let text = "experiment = remainder\nseed = 4\nlambda = 0.6\nprobes = 50\n";
        let over = [("probes".to_string(), "70".to_string())];
        let s = ExperimentSpec::parse(text, &over).unwrap();
        assert_eq!(s.params.float("lambda"), 0.6);
        assert_eq!(s.params.usize("probes"), 70);
        assert_eq!(s.params.usize("n_max"), 200);
        assert_eq!(s.out_dir, PathBuf::from("results/remainder"));
    }

    #[test]
    fn hash_ignores_output_dir_but_not_parameters() {
        let a = ExperimentSpec::defaults(Experiment::Remainder, 1);
        let b = a.clone().with_out("/tmp/elsewhere");
        assert_eq!(a.hash(), b.hash());
        let c = a.clone().with("lambda", "0.5").unwrap();
        assert_ne!(a.hash(), c.hash());
        let d = ExperimentSpec::defaults(Experiment::Remainder, 2);
        assert_ne!(a.hash(), d.hash());
    }

    #[test]
    fn every_experiment_has_valid_defaults() {
        for e in Experiment::ALL {
            let s = ExperimentSpec::defaults(e, 0);
            assert_eq!(s.experiment, e);
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
            assert!(!e.description().is_empty());
        }
    }

    #[test]
    fn thresholds() {
        assert!(Threshold::Within { target: 1.0, tol: 0.1 }.accepts(1.05));
        assert!(!Threshold::Within { target: 1.0, tol: 0.1 }.accepts(1.2));
        assert!(!Threshold::WithinRel { target: 2.0, rel: 0.01 }.accepts(2.1));
        assert!(!Threshold::Below { max: 1.0 }.accepts(1.0));
        assert!(Threshold::AtMost { max: 1.0 }.accepts(1.0));
        assert!(Threshold::Info.accepts(-5.0));
        assert!(!Metric::new("x", f64::NAN, Threshold::Info).pass);
        assert!(Metric::flag("ok", true).pass);
    }

    fn metric_strategy() -> impl Strategy<Value = Metric> {
        (
            "[a-z_]{1,12}",
            prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO,
            prop::option::of(0.0f64..1e3),
            -1e6f64..1e6,
            1e-16f64..1.0,
        )
            .prop_map(|(name, v, se, target, tol)| {
                let mut m = Metric::new(name, v, Threshold::Within { target, tol });
                m.stderr = se;
                m
            })
    }

    proptest! {
        #[test]
        fn record_round_trips_through_json(
            metrics in prop::collection::vec(metric_strategy(), 0..6),
            seed in any::<u64>(),
            wall in 0.0f64..1e5,
        ) {
            let r = ResultRecord {
                experiment: Experiment::Clt,
                spec_hash: "abc".into(),
                code_version: CODE_VERSION.into(),
                seed,
                params: BTreeMap::from([("n".to_string(), "200".to_string())]),
                passed: metrics.iter().all(|m| m.pass),
                metrics,
                wall_time_s: wall,
            };
            let back: ResultRecord = serde_json::from_str(&r.to_json().unwrap()).unwrap();
            prop_assert_eq!(back, r);
        }

        #[test]
        fn shortest_round_trips(v in prop::num::f64::ANY) {
            let s = shortest(v);
            if v.is_nan() {
                prop_assert_eq!(s, "NaN");
            } else {
                prop_assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits());
            }
        }
    }
}
