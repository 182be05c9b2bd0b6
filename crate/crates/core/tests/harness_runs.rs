use std::fs;

use nlab_core::harness::{run_experiment, strip_timing, Experiment, ExperimentSpec, ResultRecord};

fn spec(text: &str, out: &std::path::Path) -> ExperimentSpec {
    ExperimentSpec::parse(text, &[]).unwrap().with_out(out)
}

#[test]
fn remainder_run_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let s = spec(
        "experiment = remainder\nseed = 5\nn_max = 60\nprobes = 40\n",
        dir.path(),
    );
    let rec = run_experiment(&s).unwrap();
    assert!(rec.passed, "{:?}", rec.metrics);
    for f in [
        "summary.json",
        "details.json",
        "spec.ini",
        "remainder.csv",
        "remainder.svg",
    ] {
        assert!(dir.path().join(f).is_file(), "missing {f}");
    }
    let back = ResultRecord::load(&dir.path().join("summary.json")).unwrap();
    assert_eq!(back, rec);
    // The stored spec reproduces the run's hash.
    let stored = fs::read_to_string(dir.path().join("spec.ini")).unwrap();
    assert_eq!(ExperimentSpec::parse(&stored, &[]).unwrap().hash(), rec.spec_hash);
}

#[test]
fn same_spec_gives_identical_summaries_and_seed_matters() {
    let text = "experiment = clt\nseed = 11\nn = 12\ntrials = 150\n";
    let (a, b, c) = (
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
    );
    run_experiment(&spec(text, a.path())).unwrap();
    run_experiment(&spec(text, b.path())).unwrap();
    run_experiment(&spec(&text.replace("seed = 11", "seed = 12"), c.path())).unwrap();
    let read =
        |d: &tempfile::TempDir| strip_timing(&fs::read_to_string(d.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
    assert_eq!(
        fs::read(a.path().join("details.json")).unwrap(),
        fs::read(b.path().join("details.json")).unwrap()
    );
}

#[test]
fn disk_prefactor_writes_sweep_csv() {
    let dir = tempfile::tempdir().unwrap();
    let s = ExperimentSpec::defaults(Experiment::DiskPrefactor, 3)
        .with("shapes", "disk:1")
        .unwrap()
        .with("tgrid", "0.2:0.1:log3")
        .unwrap()
        .with("samples", "2e4")
        .unwrap()
        .with("dual_samples", "2e3")
        .unwrap()
        .with_out(dir.path());
    let rec = run_experiment(&s).unwrap();
    assert!(rec.metric("beta_hat[disk:1]").unwrap().value.is_some());
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,estimate,stderr,prefactor"));
    assert_eq!(lines.count(), 3);
}

#[test]
fn module_errors_name_their_stage() {
    let dir = tempfile::tempdir().unwrap();
    // Depth 2 cannot resolve t = 1e-3.
    let s = spec(
        "experiment = fractal-exponent\nseed = 1\nshapes = snowflake:3:2\ntgrid = 0.1:0.001:log3\nsamples = 100\n",
        dir.path(),
    );
    let e = run_experiment(&s).unwrap_err().to_string();
    assert!(e.contains("sweep:snowflake:3:2"), "{e}");
    assert!(!dir.path().join("summary.json").exists());
}
