//! End-to-end behaviour of the run pipeline and the command line: exit
//! codes, output determinism and run comparison.

use std::fs;
use std::path::Path;
use std::process::Command;

use shocklab::config::RunConfig;
use shocklab::error::ShockError;
use shocklab::grid::{read_snapshot, CsvSeries};
use shocklab::runner::{compare, read_manifest, run, run_text, Overrides, RunFailure};

const SHORT_BURGERS: &str = "mode = burgers-1d\nepsilon = 0.05\nstop.max_steps = 150\naudit.every = 50\n";

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_shocklab"))
}

fn run_in(text: &str, dir: &Path) -> shocklab::runner::RunReport {
    run(&RunConfig::parse(text).unwrap(), dir).unwrap()
}

#[test]
fn malformed_config_exits_with_status_two_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.cfg");
    let out = tmp.path().join("out");
    fs::write(&cfg, "mode = burgers-1d\nthis line has no equals sign\n").unwrap();
    let status = cli().arg("run").arg(&cfg).arg("--out").arg(&out).output().unwrap().status;
    assert_eq!(status.code(), Some(2));
    assert!(!out.exists());

    fs::write(&cfg, "mode = burgers-1d\nepsilon = 0.5\n").unwrap();
    let status = cli().arg("run").arg(&cfg).arg("--out").arg(&out).output().unwrap().status;
    assert_eq!(status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn unknown_keys_are_config_errors() {
    let ov = Overrides { out: Some(tempfile::tempdir().unwrap().path().join("x")), ..Overrides::default() };
    match run_text("mode = burgers-1d\nepsilonn = 0.05\n", &ov) {
        Err(e @ RunFailure::Config(_)) => assert_eq!(e.exit_code(), 2),
        other => panic!("expected a config failure, got {other:?}"),
    }
}

#[test]
fn profile_certification_passes_from_the_command_line() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("profile");
    let output = cli().arg("certify-profile").arg("--out").arg(&out).output().unwrap();
    assert_eq!(output.status.code(), Some(0), "{}", String::from_utf8_lossy(&output.stdout));
    let table = CsvSeries::read(&out.join("profile_bounds.csv")).unwrap();
    assert_eq!(table.rows.len(), 5);
    for sup in table.column("sup").unwrap() {
        assert!(sup <= 1.0 + 1e-12);
    }
}

#[test]
fn identical_runs_produce_identical_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_in(SHORT_BURGERS, &a);
    run_in(SHORT_BURGERS, &b);
    let (ma, mb) = (read_manifest(&a).unwrap(), read_manifest(&b).unwrap());
    assert!(!ma.is_empty());
    assert_eq!(ma, mb);
    for name in ["stats.csv", "modulation.csv", "ledger.csv", "blowup.txt", "config.txt"] {
        assert!(ma.iter().any(|(_, n)| n == name), "{name} missing from manifest");
    }
}

#[test]
fn run_outputs_are_readable_and_consistent() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("r");
    let rep = run_in(SHORT_BURGERS, &dir);
    assert_eq!(rep.out, dir);
    let stats = CsvSeries::read(&dir.join("stats.csv")).unwrap();
    let steps = stats.column("step").unwrap();
    assert_eq!(steps.len(), 150);
    let t = stats.column("t").unwrap();
    assert!(t.windows(2).all(|p| p[1] > p[0]));
    let snap = read_snapshot(&dir.join("final.snap")).unwrap();
    assert!((snap.time - t[t.len() - 1]).abs() <= 1e-15 * t[t.len() - 1].abs().max(1.0));
    let modulation = CsvSeries::read(&dir.join("modulation.csv")).unwrap();
    assert_eq!(modulation.rows.len(), 2 * 151);
    let ledger = CsvSeries::read(&dir.join("ledger.csv")).unwrap();
    let audited: Vec<f64> = ledger.column("step").unwrap();
    for s in [0.0, 50.0, 100.0, 150.0] {
        assert!(audited.contains(&s), "no audit at step {s}");
    }
}

#[test]
fn comparing_a_run_with_itself_gives_unit_ratio() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    run_in(SHORT_BURGERS, &a);
    let rep = compare(&a, &a).unwrap();
    assert_eq!(rep.ratio, 1.0);
    let output = cli().arg("compare").arg(&a).arg(&a).output().unwrap();
    assert_eq!(output.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&output.stdout).contains("ratio: 1.000000e0"));
}

fn fake_run(dir: &Path, config: &str, t_star: f64) {
    fs::create_dir_all(dir).unwrap();
    fs::write(dir.join("config.txt"), config).unwrap();
    fs::write(dir.join("blowup.txt"), format!("method: slope-fit\nT_star: {t_star:.12e}\n")).unwrap();
}

#[test]
fn comparison_scales_by_epsilon_squared() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    fake_run(&a, "mode = euler-poisson-3d\nepsilon = 0.1\n", 0.02);
    fake_run(&b, "mode = euler-poisson-3d\nepsilon = 0.05\nout = elsewhere\n", 0.005);
    let rep = compare(&a, &b).unwrap();
    assert!((rep.scaled[0] - 2.0).abs() < 1e-12);
    assert!((rep.scaled[1] - 2.0).abs() < 1e-12);
    assert!((rep.ratio - 1.0).abs() < 1e-12);
}

#[test]
fn comparison_rejects_runs_that_differ_beyond_epsilon() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    fake_run(&a, "mode = euler-poisson-3d\nepsilon = 0.1\n", 0.02);
    fake_run(&b, "mode = euler-poisson-3d\nepsilon = 0.07\ngamma = 2\n", 0.01);
    match compare(&a, &b) {
        Err(e @ ShockError::Incompatible(_)) => {
            let msg = e.to_string();
            assert!(msg.starts_with("incompatible configs"), "{msg}");
            assert!(msg.contains("gamma"), "{msg}");
        }
        other => panic!("expected incompatible configs, got {other:?}"),
    }
    let output = cli().arg("compare").arg(&a).arg(&b).output().unwrap();
    assert_ne!(output.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&output.stderr).contains("incompatible configs"));
}

#[test]
fn overrides_are_recorded_in_the_canonical_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.cfg");
    let out = tmp.path().join("o");
    fs::write(&cfg, "mode = burgers-1d\nepsilon = 0.05\nstop.max_steps = 20\n").unwrap();
    let status = cli()
        .arg("run")
        .arg(&cfg)
        .args(["--audit-every", "10", "--snapshots-every", "10"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap()
        .status;
    assert!(matches!(status.code(), Some(0) | Some(1)));
    let text = fs::read_to_string(out.join("config.txt")).unwrap();
    assert!(text.contains("audit.every = 10"));
    assert!(text.contains("snapshots.every = 10"));
    assert!(out.join("snap_000010.snap").exists());
    assert!(out.join("snap_000020.snap").exists());
}
