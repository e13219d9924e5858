//! Acceptance run: executes the eight headline criteria and prints one
//! `PASS`/`FAIL` line per criterion.
//!
//! The process exits with status zero unless `ACCEPTANCE_STRICT=1` is set,
//! in which case any failed criterion makes it exit with status one.  Set
//! `ACCEPTANCE_SKIP_3D=1` to skip the two three-dimensional runs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use shocklab::config::RunConfig;
use shocklab::diagnostics::{BOOTSTRAP_CATALOG, PHYSICAL_CATALOG};
use shocklab::grid::{derivative, CsvSeries, Field, Grid};
use shocklab::initdata::{build_initial_data, parity_defect};
use shocklab::profile::eval_wstar;
use shocklab::runner::{compare, read_manifest, run, RunReport};
use shocklab::solver::Solver;

struct Outcome {
    id: &'static str,
    title: &'static str,
    pass: bool,
    detail: String,
}

struct LedgerLine {
    step: Option<usize>,
    id: String,
    measured: f64,
    status: String,
}

struct Finished {
    report: RunReport,
    elapsed: Duration,
}

impl Finished {
    fn dir(&self) -> &Path {
        &self.report.out
    }

    fn blowup(&self) -> BTreeMap<String, String> {
        let text = fs::read_to_string(self.dir().join("blowup.txt")).unwrap_or_default();
        text.lines()
            .filter_map(|l| l.split_once(": "))
            .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
            .collect()
    }

    fn number(&self, key: &str) -> f64 {
        self.blowup().get(key).and_then(|v| v.parse().ok()).unwrap_or(f64::NAN)
    }

    fn ledger(&self) -> Vec<LedgerLine> {
        let mut out = Vec::new();
        for name in ["init_ledger.csv", "ledger.csv", "run_ledger.csv"] {
            let Ok(csv) = CsvSeries::read(&self.dir().join(name)) else {
                continue;
            };
            let col = |c: &str| csv.header.iter().position(|h| h == c);
            let (Some(id), Some(measured), Some(status)) = (col("id"), col("measured"), col("status")) else {
                continue;
            };
            let step = col("step");
            for r in &csv.rows {
                out.push(LedgerLine {
                    step: step.and_then(|k| r[k].parse::<f64>().ok()).map(|v| v as usize),
                    id: r[id].clone(),
                    measured: r[measured].parse().unwrap_or(f64::NAN),
                    status: r[status].clone(),
                });
            }
        }
        out
    }

    fn rows<'a>(lines: &'a [LedgerLine], id: &'a str) -> impl Iterator<Item = &'a LedgerLine> + 'a {
        lines.iter().filter(move |l| l.id == id)
    }
}

fn execute(text: &str, out: PathBuf) -> Result<Finished, String> {
    let cfg = RunConfig::parse(text).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let report = run(&cfg, &out).map_err(|e| e.to_string())?;
    Ok(Finished { report, elapsed: start.elapsed() })
}

fn secs(d: Duration) -> String {
    format!("{:.1} s", d.as_secs_f64())
}

fn all_rows_pass(lines: &[LedgerLine], id: &str) -> (bool, usize, f64) {
    let mut ok = true;
    let mut n = 0;
    let mut worst = 0.0f64;
    for l in Finished::rows(lines, id) {
        if l.status == "skipped" {
            continue;
        }
        n += 1;
        ok &= l.status == "pass";
        worst = worst.max(l.measured);
    }
    (ok && n > 0, n, worst)
}

fn p1(root: &Path) -> Outcome {
    let title = "profile certification";
    match execute("mode = profile-certify\n", root.join("p1")) {
        Ok(f) => {
            let time_ok = f.elapsed < Duration::from_secs(5);
            Outcome {
                id: "P1",
                title,
                pass: f.report.all_pass && time_ok,
                detail: format!("failed rows {:?}, runtime {}", f.report.failures, secs(f.elapsed)),
            }
        }
        Err(e) => Outcome { id: "P1", title, pass: false, detail: e },
    }
}

fn p2(root: &Path) -> Outcome {
    let title = "Poisson oracle";
    match execute("mode = poisson-test\n", root.join("p2")) {
        Ok(f) => {
            let lines = f.ledger();
            let g = Finished::rows(&lines, "poisson.gaussian").map(|l| l.measured).next().unwrap_or(f64::NAN);
            let time_ok = f.elapsed < Duration::from_secs(30);
            Outcome {
                id: "P2",
                title,
                pass: f.report.all_pass && time_ok,
                detail: format!(
                    "gaussian relative error {g:.2e}, failed rows {:?}, runtime {}",
                    f.report.failures,
                    secs(f.elapsed)
                ),
            }
        }
        Err(e) => Outcome { id: "P2", title, pass: false, detail: e },
    }
}

fn p3(root: &Path) -> Outcome {
    let title = "Burgers baseline";
    match execute("mode = burgers-1d\nepsilon = 0.05\n", root.join("p3")) {
        Ok(f) => {
            let lines = f.ledger();
            let (c_ok, _, c_err) = all_rows_pass(&lines, "run.blowup.characteristic");
            let (s_ok, _, _) = all_rows_pass(&lines, "run.blowup.slope_law");
            let time_ok = f.elapsed < Duration::from_secs(120);
            Outcome {
                id: "P3",
                title,
                pass: c_ok && s_ok && time_ok,
                detail: format!(
                    "|T*-T_char|/eps {:.3e}, slope-law compliance {:.3}, runtime {}",
                    c_err,
                    f.number("compliance"),
                    secs(f.elapsed)
                ),
            }
        }
        Err(e) => Outcome { id: "P3", title, pass: false, detail: e },
    }
}

fn p4(f: &Result<Finished, String>) -> Outcome {
    let title = "self-similar convergence";
    let f = match f {
        Ok(f) => f,
        Err(e) => return Outcome { id: "P4", title, pass: false, detail: e.clone() },
    };
    let conv = CsvSeries::read(&f.dir().join("convergence.csv")).and_then(|c| c.column("sup_dev"));
    let sup = conv.unwrap_or_default();
    let tail = &sup[sup.len().saturating_sub(10)..];
    let monotone = tail.len() == 10 && tail.windows(2).all(|p| p[1] < p[0]);
    let last = tail.last().copied().unwrap_or(f64::NAN);
    let lines = f.ledger();
    let constraints_ok = ["boot.W.origin", "boot.W.origin1", "boot.W.origin2"]
        .iter()
        .all(|id| all_rows_pass(&lines, id).0);
    Outcome {
        id: "P4",
        title,
        pass: monotone && last <= 0.05 && constraints_ok,
        detail: format!(
            "last 10 sup deviations {} decreasing, final {:.3e}, constraint rows {}",
            if monotone { "" } else { "not" },
            last,
            if constraints_ok { "pass" } else { "fail" }
        )
        .replace("  ", " "),
    }
}

fn p5(f: &Result<Finished, String>) -> Outcome {
    let title = "modulation consistency";
    let f = match f {
        Ok(f) => f,
        Err(e) => return Outcome { id: "P5", title, pass: false, detail: e.clone() },
    };
    let lines = f.ledger();
    let (cross_ok, _, cross) = all_rows_pass(&lines, "run.modulation.cross_check");
    let Ok(modu) = CsvSeries::read(&f.dir().join("modulation.csv")) else {
        return Outcome { id: "P5", title, pass: false, detail: "modulation.csv missing".into() };
    };
    let (Ok(taudot), Ok(beta), Ok(s)) = (modu.column("taudot"), modu.column("beta_tau"), modu.column("s")) else {
        return Outcome { id: "P5", title, pass: false, detail: "modulation.csv malformed".into() };
    };
    let route = modu.header.iter().position(|h| h == "route").unwrap_or(0);
    let identity = taudot
        .iter()
        .zip(&beta)
        .map(|(td, b)| (b * (1.0 - td) - 1.0).abs())
        .fold(0.0f64, f64::max);
    // Trend of |τ̇| along the ODE route: least-squares slope of |τ̇| against s.
    let ode: Vec<(f64, f64)> = modu
        .rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r[route] == "ode")
        .map(|(k, _)| (s[k], taudot[k].abs()))
        .skip(1)
        .collect();
    let n = ode.len() as f64;
    let sm = ode.iter().map(|p| p.0).sum::<f64>() / n;
    let vm = ode.iter().map(|p| p.1).sum::<f64>() / n;
    let trend = ode.iter().map(|p| (p.0 - sm) * (p.1 - vm)).sum::<f64>()
        / ode.iter().map(|p| (p.0 - sm).powi(2)).sum::<f64>();
    let m = f.number("smallest_passing_M");
    let bound_ok = m.is_finite() && ode.iter().all(|(sv, td)| *td <= 2.0 * m * (-sv).exp());
    Outcome {
        id: "P5",
        title,
        pass: cross_ok && identity <= 1e-12 && trend < 0.0 && bound_ok,
        detail: format!(
            "cross-check {cross:.3e}, beta_tau identity {identity:.1e}, |taudot| trend {trend:.3e}, \
             |taudot| <= 2M e^-s at M = {m:.3e}: {bound_ok}"
        ),
    }
}

fn p6(f: &Result<Finished, String>) -> Outcome {
    let title = "3D run at eps = 0.1";
    let f = match f {
        Ok(f) => f,
        Err(e) => return Outcome { id: "P6", title, pass: false, detail: e.clone() },
    };
    let lines = f.ledger();
    let (support_ok, _, support) = all_rows_pass(&lines, "run.support.steps");
    let (sound_ok, _, sound) = all_rows_pass(&lines, "phys.sound");
    let (vort_ok, _, vort) = all_rows_pass(&lines, "phys.vorticity");
    let (mass_ok, _, mass) = all_rows_pass(&lines, "phys.mass");
    let boot_fail: Vec<&str> = lines
        .iter()
        .filter(|l| l.step.is_some() && l.id.starts_with("boot.") && l.status == "fail")
        .map(|l| l.id.as_str())
        .collect();
    let mut boot_ids = boot_fail.clone();
    boot_ids.sort_unstable();
    boot_ids.dedup();
    let time_ok = f.elapsed < Duration::from_secs(1800);
    Outcome {
        id: "P6",
        title,
        pass: support_ok && sound_ok && vort_ok && mass_ok && boot_fail.is_empty() && time_ok,
        detail: format!(
            "support ratio {support:.3}, sound {sound:.3e}, vorticity {vort:.3e}, mass drift {mass:.2e}, \
             bootstrap failures {boot_ids:?}, stop: {}, runtime {}",
            f.blowup().get("stop_reason").cloned().unwrap_or_default(),
            secs(f.elapsed)
        ),
    }
}

fn p7(a: &Result<Finished, String>, root: &Path) -> Outcome {
    let title = "blowup scaling trend";
    let a = match a {
        Ok(a) => a,
        Err(e) => return Outcome { id: "P7", title, pass: false, detail: e.clone() },
    };
    let b = match execute("mode = euler-poisson-3d\nepsilon = 0.07\n", root.join("p7")) {
        Ok(b) => b,
        Err(e) => return Outcome { id: "P7", title, pass: false, detail: e },
    };
    match compare(a.dir(), b.dir()) {
        Ok(r) => Outcome {
            id: "P7",
            title,
            pass: r.ratio.is_finite() && (0.5..=2.0).contains(&r.ratio),
            detail: format!(
                "T*/eps^2 = {:.3e} and {:.3e}, ratio {:.3e}",
                r.scaled[0], r.scaled[1], r.ratio
            ),
        },
        Err(e) => Outcome { id: "P7", title, pass: false, detail: e.to_string() },
    }
}

fn p8(root: &Path) -> Outcome {
    let title = "invariant suite";
    let mut notes = Vec::new();

    // Oddness, monotonicity and cube-root asymptotics of the profile.
    let ys: Vec<f64> = (1..400).map(|k| 0.05 * k as f64).collect();
    let odd = ys.iter().map(|&y| (eval_wstar(-y) + eval_wstar(y)).abs()).fold(0.0f64, f64::max);
    let mono = ys.windows(2).all(|p| eval_wstar(p[1]) < eval_wstar(p[0]));
    let big = 1e6;
    let asym = (eval_wstar(big) / big.cbrt() + 1.0).abs();
    let profile_ok = odd <= 1e-12 && mono && asym <= 1e-3;
    notes.push(format!("profile odd {odd:.1e} monotone {mono} asymptotic {asym:.1e}"));

    // Derivative convergence ratio under halving.
    let err = |n: usize| {
        let g = Grid::new(1, [n, 1, 1], [1.0, 0.0, 0.0]).expect("grid");
        let f = Field::from_fn(g, "f", |x| (-8.0 * x[0] * x[0]).exp());
        let d = derivative(&f, 1, 1).expect("derivative");
        (0..g.len())
            .filter(|&i| g.point(i)[0].abs() <= 0.5)
            .map(|i| {
                let x = g.point(i)[0];
                (d.values[i] + 16.0 * x * (-8.0 * x * x).exp()).abs()
            })
            .fold(0.0f64, f64::max)
    };
    let ratio = err(101) / err(201);
    let ratio_ok = (12.0..=20.0).contains(&ratio);
    notes.push(format!("derivative ratio {ratio:.2}"));

    // Transverse reflection symmetry after a few steps of the 3D solver.
    let sym = (|| -> Result<f64, String> {
        let cfg = RunConfig::parse(
            "mode = euler-poisson-3d\nepsilon = 0.1\ngrid.n1 = 64\ngrid.n2 = 48\ngrid.n3 = 48\ngrid.ext2 = 0.96\ngrid.ext3 = 0.96\n",
        )
        .map_err(|e| e.to_string())?;
        let data = build_initial_data(&cfg.init).map_err(|e| e.to_string())?;
        let mut solver =
            Solver::new(data.state.grid(), cfg.betas().alpha, true, data.ions).map_err(|e| e.to_string())?;
        let mut st = data.state.clone();
        for _ in 0..3 {
            let dt = solver.stable_dt(&st, cfg.cfl);
            st = solver.step(&st, dt).map_err(|e| e.to_string())?.0;
        }
        Ok(parity_defect(&st))
    })();
    let sym_ok = matches!(sym, Ok(d) if d <= 1e-10);
    notes.push(match &sym {
        Ok(d) => format!("parity defect {d:.1e}"),
        Err(e) => format!("symmetry run failed: {e}"),
    });

    // Determinism: two identical runs produce identical manifests.
    let text = "mode = burgers-1d\nepsilon = 0.05\nstop.max_steps = 200\n";
    let manifests: Vec<_> = ["p8a", "p8b"]
        .iter()
        .map(|d| {
            execute(text, root.join(d)).ok().and_then(|f| read_manifest(f.dir()).ok())
        })
        .collect();
    let determ_ok = matches!((&manifests[0], &manifests[1]), (Some(a), Some(b)) if a == b && !a.is_empty());
    notes.push(format!("deterministic outputs {determ_ok}"));

    // Ledger catalog pinned against the rows a run actually reports.
    let catalog_ok = execute(text, root.join("p8c"))
        .map(|f| {
            let lines = f.ledger();
            let seen = |id: &str| lines.iter().any(|l| l.id == id && l.step.is_some());
            BOOTSTRAP_CATALOG.iter().chain(PHYSICAL_CATALOG.iter()).all(|id| seen(id))
                && lines
                    .iter()
                    .filter(|l| l.step.is_some())
                    .all(|l| BOOTSTRAP_CATALOG.contains(&l.id.as_str()) || PHYSICAL_CATALOG.contains(&l.id.as_str()))
        })
        .unwrap_or(false);
    notes.push(format!("catalog pinned {catalog_ok}"));

    Outcome {
        id: "P8",
        title,
        pass: profile_ok && ratio_ok && sym_ok && determ_ok && catalog_ok,
        detail: notes.join(", "),
    }
}

fn main() {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let root = tmp.path();
    let skip_3d = std::env::var("ACCEPTANCE_SKIP_3D").is_ok_and(|v| v == "1");
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");

    let mut outcomes = vec![p1(root), p2(root), p3(root)];
    let ep1d = execute("mode = euler-poisson-1d\nepsilon = 0.05\n", root.join("p4"));
    outcomes.push(p4(&ep1d));
    outcomes.push(p5(&ep1d));
    if skip_3d {
        for (id, title) in [("P6", "3D run at eps = 0.1"), ("P7", "blowup scaling trend")] {
            outcomes.push(Outcome { id, title, pass: false, detail: "skipped".into() });
        }
    } else {
        let ep3d = execute("mode = euler-poisson-3d\nepsilon = 0.1\n", root.join("p6"));
        outcomes.push(p6(&ep3d));
        outcomes.push(p7(&ep3d, root));
    }
    outcomes.push(p8(root));

    for o in &outcomes {
        println!("{} {:<26} {}  {}", o.id, o.title, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    println!("{} of {} criteria passed", outcomes.len() - failed, outcomes.len());
    if strict && failed > 0 {
        std::process::exit(1);
    }
}
