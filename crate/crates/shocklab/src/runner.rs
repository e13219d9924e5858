//! End-to-end experiment pipelines behind the command line.
//!
//! A run parses a configuration, executes the pipeline of its mode and
//! writes every artifact into one output directory: per-step statistics,
//! both modulation series, audit ledgers, the blowup report, snapshots, the
//! canonical configuration and a manifest with a SHA-256 hash per file.
//! Outputs contain no timestamps or timings, so a configuration and seed
//! reproduce the same bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::{parse_pairs, Mode, RunConfig};
use crate::diagnostics::{
    blowup_from_modulation, bootstrap_ledger, energy_trend, energy_value, estimate_blowup,
    physical_bounds_audit, profile_convergence, BlowupEstimate, PhysicalAuditInput,
};
use crate::error::{Result, ShockError};
use crate::grid::{write_snapshot, CsvSeries, Grid};
use crate::initdata::{build_initial_data, parity_defect, validate_initial_data_with, DataGeometry};
use crate::ledger::{LedgerReport, RowStatus};
use crate::poisson::poisson_oracle;
use crate::profile::{
    barw_derivative, certify_profile_bounds, exact_burgers_residual, SampleBox, PROFILE_BOUND_NAMES,
};
use crate::renorm::{
    cross_check_modulation, modulation_from_constraints, push_modulation, support_extent_x,
    to_riemann, to_selfsimilar, CrossCheck, Modulation, OdeTracker, MODULATION_HEADER,
};
use crate::solver::{min_d1w, PhysicalState, Solver, StepStats, StopReason, StopRule};

/// Tolerance of the five profile bounds (the second is attained at `y = 0`).
pub const PROFILE_SLACK: f64 = 1e-12;
/// Tolerance of the genericity condition `∂₁∇²W̄(0) = diag(6, 2, 2)`.
pub const GENERICITY_TOL: f64 = 1e-8;
/// Tolerance of the stationary Burgers residual of `W̄`.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Tolerance of the Gaussian-charge Poisson oracle.
pub const POISSON_TOL: f64 = 1e-3;
/// Radius of the profile convergence window.
pub const CONVERGENCE_RADIUS: f64 = 1.0;

/// Command-line overrides of configuration keys.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub snapshots_every: Option<usize>,
    pub audit_every: Option<usize>,
    pub stop_slope: Option<f64>,
    pub out: Option<PathBuf>,
}

/// Summary of a finished run.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub out: PathBuf,
    /// Every enabled audit passed.
    pub all_pass: bool,
    /// Ids of failed audit rows (deduplicated, in first-seen order).
    pub failures: Vec<String>,
    /// Human-readable one-paragraph summary.
    pub summary: String,
}

/// Why a run did not complete.
#[derive(Debug)]
pub enum RunFailure {
    /// The configuration could not be parsed; nothing was written.
    Config(ShockError),
    /// The pipeline failed after outputs were started.
    Runtime(ShockError),
}

impl RunFailure {
    /// Process exit status of the failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunFailure::Config(_) => 2,
            RunFailure::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunFailure::Config(e) => write!(f, "{e}"),
            RunFailure::Runtime(e) => write!(f, "run failed: {e}"),
        }
    }
}

/// Parse a configuration text and apply command-line overrides.  The
/// overrides are recorded in the canonical text.
pub fn load_config(text: &str, ov: &Overrides) -> Result<RunConfig> {
    let mut raw = parse_pairs(text)?;
    if let Some(v) = ov.snapshots_every {
        raw.insert("snapshots.every".into(), v.to_string());
    }
    if let Some(v) = ov.audit_every {
        raw.insert("audit.every".into(), v.to_string());
    }
    if let Some(v) = ov.stop_slope {
        raw.insert("stop.slope".into(), format!("{v:e}"));
    }
    if let Some(v) = &ov.out {
        raw.insert("out".into(), v.display().to_string());
    }
    let mut text = String::new();
    for (k, v) in &raw {
        let _ = writeln!(text, "{k} = {v}");
    }
    RunConfig::parse(&text)
}

/// Output directory of a configuration (`out` key or `runs/<mode>`).
pub fn output_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out.as_ref().map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs").join(cfg.mode.name()))
}

/// Parse, then run.  Parse errors and unusable output directories are
/// reported before anything is written.
pub fn run_text(text: &str, ov: &Overrides) -> std::result::Result<RunReport, RunFailure> {
    let cfg = load_config(text, ov).map_err(RunFailure::Config)?;
    let out = output_dir(&cfg);
    prepare_output_dir(&out).map_err(RunFailure::Config)?;
    run(&cfg, &out).map_err(RunFailure::Runtime)
}

/// [`run_text`] on a configuration file.
pub fn run_file(path: &Path, ov: &Overrides) -> std::result::Result<RunReport, RunFailure> {
    let text = fs::read_to_string(path)
        .map_err(|e| RunFailure::Config(ShockError::Config(format!("cannot read {}: {e}", path.display()))))?;
    run_text(&text, ov)
}

fn prepare_output_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out)
        .map_err(|e| ShockError::Config(format!("output directory {} not writable: {e}", out.display())))?;
    let probe = out.join(".write-probe");
    fs::write(&probe, b"")
        .and_then(|_| fs::remove_file(&probe))
        .map_err(|e| ShockError::Config(format!("output directory {} not writable: {e}", out.display())))
}

/// Execute the pipeline of `cfg.mode`, writing into `out`.
pub fn run(cfg: &RunConfig, out: &Path) -> Result<RunReport> {
    fs::create_dir_all(out)?;
    let mut files = Artifacts::new(out);
    files.text("config.txt", &cfg.canonical_text())?;
    let result = match cfg.mode {
        Mode::ProfileCertify => profile_pipeline(cfg, &mut files),
        Mode::PoissonTest => poisson_pipeline(cfg, &mut files),
        Mode::Burgers1d | Mode::EulerPoisson1d | Mode::EulerPoisson3d => evolution_pipeline(cfg, &mut files),
    };
    files.write_manifest()?;
    let (ledger, summary) = result?;
    let mut failures: Vec<String> = Vec::new();
    for r in ledger.failures() {
        if !failures.contains(&r.id) {
            failures.push(r.id.clone());
        }
    }
    Ok(RunReport { out: out.to_path_buf(), all_pass: failures.is_empty(), failures, summary })
}

/// Files written by a run, hashed into the manifest.
struct Artifacts {
    dir: PathBuf,
    names: Vec<String>,
}

impl Artifacts {
    fn new(dir: &Path) -> Artifacts {
        Artifacts { dir: dir.to_path_buf(), names: Vec::new() }
    }

    fn path(&mut self, name: &str) -> PathBuf {
        if !self.names.iter().any(|n| n == name) {
            self.names.push(name.to_string());
        }
        self.dir.join(name)
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let p = self.path(name);
        fs::write(p, body)?;
        Ok(())
    }

    fn csv(&mut self, name: &str, series: &CsvSeries) -> Result<()> {
        let p = self.path(name);
        series.write(&p)
    }

    fn snapshot(&mut self, name: &str, state: &PhysicalState) -> Result<()> {
        let p = self.path(name);
        write_snapshot(&p, state.t, &state.snapshot_fields())
    }

    fn ledger(&mut self, stem: &str, rep: &LedgerReport) -> Result<()> {
        self.csv(&format!("{stem}.csv"), &rep.to_csv(&[]))?;
        self.text(&format!("{stem}.txt"), &rep.to_table())
    }

    fn write_manifest(&mut self) -> Result<()> {
        let mut names = self.names.clone();
        names.sort();
        let mut body = String::new();
        for n in names {
            let bytes = fs::read(self.dir.join(&n))?;
            let _ = writeln!(body, "{}  {n}", hex::encode(Sha256::digest(&bytes)));
        }
        fs::write(self.dir.join("manifest.txt"), body)?;
        Ok(())
    }
}

/// Parse a manifest into `(hash, file)` pairs.
pub fn read_manifest(dir: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(dir.join("manifest.txt"))?;
    text.lines()
        .map(|l| {
            l.split_once("  ")
                .map(|(h, n)| (h.to_string(), n.to_string()))
                .ok_or_else(|| ShockError::Malformed(format!("manifest line {l:?}")))
        })
        .collect()
}

type PipelineOutput = Result<(LedgerReport, String)>;

fn profile_pipeline(cfg: &RunConfig, files: &mut Artifacts) -> PipelineOutput {
    let sample = SampleBox { half: cfg.ygrid_ext, n: cfg.ygrid_n };
    let cert = certify_profile_bounds(&sample);
    let mut table = CsvSeries::new(&["bound", "sup", "slack", "y1", "y2", "y3"]);
    let mut rep = LedgerReport::new();
    rep.meta("samples", cert.samples);
    for k in 0..5 {
        let y = cert.argmax[k];
        table.push_cells(vec![
            PROFILE_BOUND_NAMES[k].to_string(),
            format!("{:e}", cert.sup[k]),
            format!("{:e}", 1.0 - cert.sup[k]),
            format!("{:e}", y[0]),
            format!("{:e}", y[1]),
            format!("{:e}", y[2]),
        ]);
        rep.check(&format!("profile.bound.{}", k + 1), PROFILE_BOUND_NAMES[k], 1.0 + PROFILE_SLACK, cert.sup[k]);
    }
    let expected = [([3, 0, 0], 6.0), ([1, 2, 0], 2.0), ([1, 0, 2], 2.0), ([2, 1, 0], 0.0), ([2, 0, 1], 0.0), ([1, 1, 1], 0.0)];
    let mut gen = 0.0f64;
    for (gamma, v) in expected {
        gen = gen.max((barw_derivative([0.0; 3], gamma)? - v).abs());
    }
    rep.check("profile.genericity", "genericity", GENERICITY_TOL, gen);
    let g = Grid::new(3, cfg.ygrid_n, cfg.ygrid_ext)?;
    let residual = (0..g.len()).map(|i| exact_burgers_residual(g.point(i)).abs()).fold(0.0, f64::max);
    rep.check("profile.residual", "self-similar Burgers", RESIDUAL_TOL, residual);
    files.csv("profile_bounds.csv", &table)?;
    files.ledger("ledger", &rep)?;
    let summary = format!(
        "profile-certify: {} samples, max bound {:.6}, genericity defect {:.3e}, residual {:.3e}",
        cert.samples,
        cert.sup.iter().cloned().fold(0.0, f64::max),
        gen,
        residual
    );
    Ok((rep, summary))
}

fn poisson_pipeline(cfg: &RunConfig, files: &mut Artifacts) -> PipelineOutput {
    let n = cfg.init.n;
    if n[1] != n[0] || n[2] != n[0] {
        return Err(ShockError::Config("poisson-test needs a cubic grid (grid.n1 = grid.n2 = grid.n3)".into()));
    }
    let r = poisson_oracle(n[0])?;
    let mut rep = LedgerReport::new();
    rep.meta("grid", n[0]);
    rep.check("poisson.gaussian", "Gaussian charge", POISSON_TOL, r.gaussian_rel_err);
    rep.check("poisson.zero", "zero density", 0.0, r.zero_max);
    let mut table = CsvSeries::new(&["radius", "decay_exponent"]);
    let mut worst = f64::NEG_INFINITY;
    for (rad, e) in r.dipole_radii.iter().zip(&r.dipole_exponents) {
        table.push(&[*rad, *e]);
        worst = worst.max(2.0 - e);
    }
    rep.check("poisson.dipole", "dipole far field", 0.0, worst);
    files.csv("dipole.csv", &table)?;
    files.ledger("ledger", &rep)?;
    let summary = format!(
        "poisson-test: Gaussian relative error {:.3e}, zero-density max {:.1e}, smallest dipole exponent {:.4}",
        r.gaussian_rel_err,
        r.zero_max,
        2.0 - worst
    );
    Ok((rep, summary))
}

const STATS_HEADER: [&str; 14] = [
    "step", "t", "dt", "max_speed", "min_d1w", "argmin1", "argmin2", "argmin3", "max_u", "max_sigma", "cfl",
    "tracked_d1w", "mass", "support_ratio",
];

/// Accumulated series of an evolution run.
struct Evolution {
    state: PhysicalState,
    step: usize,
    route_a: Vec<Modulation>,
    route_b: Vec<Modulation>,
    stats: CsvSeries,
    modulation: CsvSeries,
    ledger: CsvSeries,
    convergence: CsvSeries,
    energy: CsvSeries,
    energy_pairs: (Vec<f64>, Vec<f64>),
    slope: (Vec<f64>, Vec<f64>, Vec<[f64; 3]>),
    /// Every audit row of the run, for the pass/fail decision.
    all_rows: LedgerReport,
    last_audit: Option<LedgerReport>,
    last_audit_step: Option<usize>,
    support_worst: f64,
}

/// Fixed inputs of the audits of one run.
struct AuditContext<'a> {
    cfg: &'a RunConfig,
    geo: &'a DataGeometry,
    ygrid: Grid,
    initial_mass: f64,
}

impl Evolution {
    fn new(state: PhysicalState, a: Modulation, b: Modulation, d1w: f64) -> Evolution {
        let ledger_header: Vec<&str> =
            ["step", "s", "t", "id", "family", "constant", "measured", "margin", "ratio", "status"].to_vec();
        let mut ev = Evolution {
            state,
            step: 0,
            route_a: vec![a],
            route_b: vec![b],
            stats: CsvSeries::new(&STATS_HEADER),
            modulation: CsvSeries::new(&MODULATION_HEADER),
            ledger: CsvSeries::new(&ledger_header),
            convergence: CsvSeries::new(&["step", "s", "t", "sup_dev", "weighted_sup_dev"]),
            energy: CsvSeries::new(&["step", "s", "t", "energy"]),
            energy_pairs: (Vec::new(), Vec::new()),
            slope: (vec![a.t], vec![d1w], vec![a.xi]),
            all_rows: LedgerReport::new(),
            last_audit: None,
            last_audit_step: None,
            support_worst: 0.0,
        };
        push_modulation(&mut ev.modulation, &a, 0, "constraints");
        push_modulation(&mut ev.modulation, &b, 0, "ode");
        ev
    }

    fn audit(&mut self, ctx: &AuditContext) -> Result<()> {
        let cfg = ctx.cfg;
        let eps = cfg.init.epsilon;
        let a = *self.route_a.last().expect("non-empty series");
        let ss = to_selfsimilar(&to_riemann(&self.state, &a), &a, ctx.ygrid, eps)?;
        let mut rep = bootstrap_ledger(&ss, cfg.m_audit, eps)?;
        rep.extend(physical_bounds_audit(&PhysicalAuditInput {
            state: &self.state,
            ss: &ss,
            modulation: &a,
            epsilon: eps,
            kappa0: cfg.init.kappa0,
            m_audit: cfg.m_audit,
            core: core_margin(ctx.geo, &self.state.grid()),
            vacuum: cfg.init.vacuum,
            initial_mass: ctx.initial_mass,
        })?);
        let prefix =
            [("step", self.step.to_string()), ("s", format!("{:e}", ss.s)), ("t", format!("{:e}", ss.t))];
        self.ledger.rows.extend(rep.to_csv(&prefix).rows);
        let radius = CONVERGENCE_RADIUS.min(ctx.ygrid.ext[0]);
        let conv = profile_convergence(&ss, radius)?;
        self.convergence.push(&[self.step as f64, ss.s, ss.t, conv[0], conv[1]]);
        let e = energy_value(&ss, cfg.energy_k, cfg.delta)?;
        self.energy.push(&[self.step as f64, ss.s, ss.t, e]);
        self.energy_pairs.0.push(ss.s);
        self.energy_pairs.1.push(e);
        rep.meta("step", self.step);
        rep.meta("s", format!("{:.12e}", ss.s));
        rep.meta("t", format!("{:.12e}", ss.t));
        self.all_rows.rows.extend(rep.rows.iter().cloned());
        self.last_audit = Some(rep);
        self.last_audit_step = Some(self.step);
        Ok(())
    }

    fn record_step(&mut self, st: &StepStats, d1w: f64, support_ratio: f64) {
        let row = [
            self.step as f64,
            st.t,
            st.dt,
            st.max_speed,
            st.min_d1w,
            st.argmin[0],
            st.argmin[1],
            st.argmin[2],
            st.max_u,
            st.max_sigma,
            st.cfl,
            d1w,
            self.state.electron_mass(),
            support_ratio,
        ];
        self.stats.push(&row);
    }

    fn write_series(&self, files: &mut Artifacts) -> Result<()> {
        files.csv("stats.csv", &self.stats)?;
        files.csv("modulation.csv", &self.modulation)?;
        files.csv("ledger.csv", &self.ledger)?;
        files.csv("convergence.csv", &self.convergence)?;
        files.csv("energy.csv", &self.energy)
    }
}

/// Largest ratio of the non-vacuum extent to the support box
/// `(2ε^{1/2}, 2ε^{1/6})` around the tracked point.
fn support_ratio(state: &PhysicalState, xi: [f64; 3], eps: f64) -> f64 {
    let ext = support_extent_x(&state.sigma, xi);
    let r1 = ext[0] / (2.0 * eps.sqrt());
    if state.grid().dim == 3 {
        r1.max(ext[1] / (2.0 * eps.powf(1.0 / 6.0)))
    } else {
        r1
    }
}

/// Stop reasons raised by the tracking and audit stages.
/// Core half-widths shrunk by the reach of a doubled-spacing stencil.
fn core_margin(geo: &DataGeometry, g: &Grid) -> [f64; 2] {
    let across = if g.dim == 3 { 4.0 * g.h[1].max(g.h[2]) } else { 0.0 };
    [geo.p1 - 4.0 * g.h[0], geo.q1 - across]
}

fn tracking_stop(stage: &str, e: &ShockError) -> StopReason {
    StopReason::Observer(format!("{stage}: {e}"))
}

fn evolution_pipeline(cfg: &RunConfig, files: &mut Artifacts) -> PipelineOutput {
    let betas = cfg.betas();
    let eps = cfg.init.epsilon;
    let kappa0 = cfg.init.kappa0;
    let data = build_initial_data(&cfg.init)?;
    let init_rep = validate_initial_data_with(&data.state, &cfg.init, cfg.m_audit)?;
    files.ledger("init_ledger", &init_rep)?;
    files.snapshot("snap_000000.snap", &data.state)?;
    let g = data.state.grid();
    let ctx = AuditContext {
        cfg,
        geo: &data.geometry,
        ygrid: Grid::new(g.dim, cfg.ygrid_n, cfg.ygrid_ext)?,
        initial_mass: data.state.electron_mass(),
    };
    let pot = cfg.mode.potential();
    let mut solver = Solver::new(g, betas.alpha, pot, data.ions)?;
    let rule = StopRule {
        time: cfg.stop_time,
        slope: cfg.stop_slope,
        cells: cfg.resolution_cells,
        jump_scale: kappa0,
        dt_floor: 1e-10 * eps,
        max_steps: cfg.max_steps,
        cfl: cfg.cfl,
    };

    let t0 = data.state.t;
    let fit = modulation_from_constraints(&to_riemann(&data.state, &Modulation::initial(t0, kappa0)), [0.0; 3])?;
    let a0 = Modulation { kappa: fit.kappa, tau: fit.tau, xi: fit.xi, ..Modulation::initial(t0, kappa0) };
    let mut ode = OdeTracker::new(a0);
    let gp = if pot { Some(solver.potential_fields(&data.state)?) } else { None };
    ode.sample_rates(&data.state, gp.as_ref(), &betas)?;
    let mut ev = Evolution::new(data.state.clone(), a0, ode.current, fit.d1w);
    ev.support_worst = support_ratio(&ev.state, a0.xi, eps);
    ev.audit(&ctx)?;

    let h1 = g.h[0];
    let outcome = (|| -> Result<StopReason> {
        loop {
            let dt = match rule.next_dt(ev.state.t, ev.step, solver.stable_dt(&ev.state, cfg.cfl)) {
                Ok(dt) => dt,
                Err(r) => return Ok(r),
            };
            let (next, st) = solver.step(&ev.state, dt)?;
            let prev_a = *ev.route_a.last().expect("non-empty series");
            let fit = match modulation_from_constraints(&to_riemann(&next, &prev_a), prev_a.xi) {
                Ok(f) => f,
                Err(e) => return Ok(tracking_stop("constraint fit lost", &e)),
            };
            let a = match (Modulation { t: next.t, kappa: fit.kappa, tau: fit.tau, xi: fit.xi, ..prev_a })
                .with_rates_fit(&ev.route_a[ev.route_a.len().saturating_sub(cfg.rate_window)..], &betas)
            {
                Ok(m) => m,
                Err(e) => return Ok(tracking_stop("constraint rates lost", &e)),
            };
            let gp = if pot { Some(solver.potential_fields(&next)?) } else { None };
            let b = match ode.advance(&next, gp.as_ref(), &betas) {
                Ok(m) => m,
                Err(e) => return Ok(tracking_stop("modulation ODE failed", &e)),
            };
            ev.state = next;
            ev.step += 1;
            ev.route_a.push(a);
            ev.route_b.push(b);
            push_modulation(&mut ev.modulation, &a, ev.step, "constraints");
            push_modulation(&mut ev.modulation, &b, ev.step, "ode");
            ev.slope.0.push(a.t);
            ev.slope.1.push(fit.d1w);
            ev.slope.2.push(a.xi);
            let ratio = if cfg.init.vacuum { support_ratio(&ev.state, a.xi, eps) } else { 0.0 };
            ev.support_worst = ev.support_worst.max(ratio);
            ev.record_step(&st, fit.d1w, ratio);
            if cfg.snapshots_every > 0 && ev.step % cfg.snapshots_every == 0 {
                files.snapshot(&format!("snap_{:06}.snap", ev.step), &ev.state)?;
            }
            if cfg.audit_every > 0 && ev.step % cfg.audit_every == 0 {
                if let Err(e) = ev.audit(&ctx) {
                    return Ok(tracking_stop("audit window lost", &e));
                }
            }
            if let Some(r) = rule.after_step(&st, h1) {
                return Ok(r);
            }
            if cfg.core_cells > 0.0 && h1 * fit.d1w.abs().powf(1.5) > 2.0 / cfg.core_cells {
                return Ok(StopReason::ResolutionLimit(format!(
                    "core |y1| <= 1 spans fewer than {} cells",
                    cfg.core_cells
                )));
            }
        }
    })();
    let reason = match outcome {
        Ok(r) => r,
        Err(e) => {
            files.snapshot("last.snap", &ev.state)?;
            ev.write_series(files)?;
            return Err(e);
        }
    };
    if ev.last_audit_step != Some(ev.step) {
        if let Err(e) = ev.audit(&ctx) {
            ev.all_rows.mark("run.final_audit", "audit", 0.0, 1.0, RowStatus::Fail);
            let _ = e;
        }
    }
    files.snapshot("final.snap", &ev.state)?;
    ev.write_series(files)?;
    finish_evolution(cfg, files, ev, &init_rep, &data.state, reason)
}

/// Largest tolerated relative parity defect of a three-dimensional state.
pub const PARITY_TOL: f64 = 1e-10;
/// Tolerance of the constraint/ODE modulation cross-check.
pub const CROSS_CHECK_TOL: f64 = 0.01;
/// Tolerance of the blowup time against the characteristic prediction, in
/// units of `ε`.
pub const CHARACTERISTIC_TOL: f64 = 0.02;
/// Required fraction of steepening samples obeying the two-sided slope law.
pub const SLOPE_LAW_FRACTION: f64 = 0.95;

fn finish_evolution(
    cfg: &RunConfig,
    files: &mut Artifacts,
    ev: Evolution,
    init_rep: &LedgerReport,
    initial: &PhysicalState,
    reason: StopReason,
) -> PipelineOutput {
    let betas = cfg.betas();
    let eps = cfg.init.epsilon;
    let dim = initial.grid().dim;
    let mut run_rows = LedgerReport::new();
    if cfg.init.vacuum {
        run_rows.check("run.support.steps", "support", 1.0, ev.support_worst);
    }
    if dim == 3 {
        run_rows.check("run.parity", "symmetry", PARITY_TOL, parity_defect(&ev.state));
    }
    let cross = cross_check_modulation(&ev.route_a, &ev.route_b)?;
    run_rows.check("run.modulation.cross_check", "modulation", CROSS_CHECK_TOL, cross.max());
    let energy = energy_trend(ev.energy_pairs.0.clone(), ev.energy_pairs.1.clone(), eps)?;
    run_rows.check("run.energy.envelope", "energy", 2.0, energy.envelope_ratio);

    let (est, fit_error) = match estimate_blowup(&ev.slope.0, &ev.slope.1, &ev.slope.2) {
        Ok(e) => (e, None),
        Err(e) => (blowup_from_modulation(&ev.route_a, 2.0 * betas.beta1)?, Some(e.to_string())),
    };
    let mut extra = String::new();
    if cfg.mode == Mode::Burgers1d {
        let (m0, _) = min_d1w(initial)?;
        let t_char = initial.t - 1.0 / m0;
        let err = (est.t_star - t_char).abs() / eps;
        let _ = writeln!(extra, "characteristic_T_star: {t_char:.12e}");
        let _ = writeln!(extra, "characteristic_error_over_epsilon: {err:.6e}");
        run_rows.check("run.blowup.characteristic", "blowup time", CHARACTERISTIC_TOL, err);
        let miss = if est.compliance.is_finite() { 1.0 - est.compliance } else { 1.0 };
        run_rows.check("run.blowup.slope_law", "slope law", 1.0 - SLOPE_LAW_FRACTION, miss);
    }
    let last = ev.route_a.last().expect("non-empty series");
    let steep = ev.slope.1.last().copied().unwrap_or(f64::NAN) / ev.slope.1[0];
    let mut report = est.to_text();
    let _ = writeln!(report, "stop_reason: {}", reason.label());
    let _ = writeln!(report, "steps: {}", ev.step);
    let _ = writeln!(report, "t_final: {:.12e}", ev.state.t);
    let _ = writeln!(report, "s_final: {:.12e}", last.s().unwrap_or(f64::NAN));
    let _ = writeln!(report, "steepening: {steep:.6e}");
    if let Some(e) = &fit_error {
        let _ = writeln!(report, "slope_fit_error: {e}");
    }
    report.push_str(&extra);
    write_cross(&mut report, &cross);
    let _ = writeln!(report, "energy_c1: {:.6e}", energy.c1);
    let _ = writeln!(report, "energy_c2: {:.6e}", energy.c2);
    let _ = writeln!(report, "energy_envelope_ratio: {:.6e}", energy.envelope_ratio);
    let mut total = LedgerReport::new();
    total.extend(init_rep.clone());
    total.extend(ev.all_rows.clone());
    total.extend(run_rows.clone());
    match total.smallest_passing_m() {
        Some(m) => {
            let _ = writeln!(report, "smallest_passing_M: {m:.6e}");
        }
        None => {
            let _ = writeln!(report, "smallest_passing_M: none");
        }
    }
    files.text("blowup.txt", &report)?;

    let mut table = ev.last_audit.clone().unwrap_or_default();
    table.extend(run_rows.clone());
    table.meta("stop_reason", reason.label());
    files.ledger("run_ledger", &run_rows)?;
    files.text("ledger.txt", &table.to_table())?;

    let nfail = total.failures().len();
    let summary = format!(
        "{}: {} steps, stopped by {}, T* = {:.6e} ({}), {} failed audit rows",
        cfg.mode.name(),
        ev.step,
        reason.label(),
        est.t_star,
        est.method,
        nfail
    );
    Ok((total, summary))
}

fn write_cross(report: &mut String, c: &CrossCheck) {
    let _ = writeln!(report, "cross_check_kappa: {:.6e}", c.kappa);
    let _ = writeln!(report, "cross_check_tau: {:.6e}", c.tau);
    let _ = writeln!(
        report,
        "cross_check_xi: [{:.6e}, {:.6e}, {:.6e}]",
        c.xi[0], c.xi[1], c.xi[2]
    );
}

/// Keys allowed to differ between runs that are compared.
const COMPARE_FREE_KEYS: [&str; 4] = ["epsilon", "out", "audit.every", "snapshots.every"];

/// `T*/ε²` of two runs and their ratio.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalingReport {
    pub epsilon: [f64; 2],
    pub t_star: [f64; 2],
    pub scaled: [f64; 2],
    /// `scaled[0] / scaled[1]`.
    pub ratio: f64,
}

impl ScalingReport {
    /// Key/value text block.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for k in 0..2 {
            let _ = writeln!(
                s,
                "run{}: epsilon {:.6e} T_star {:.12e} T_star/epsilon^2 {:.6e}",
                k + 1,
                self.epsilon[k],
                self.t_star[k],
                self.scaled[k]
            );
        }
        let _ = writeln!(s, "ratio: {:.6e}", self.ratio);
        s
    }
}

/// Compare the blowup times of two completed runs differing only in `ε`.
pub fn compare(a: &Path, b: &Path) -> Result<ScalingReport> {
    let read = |d: &Path| -> Result<(std::collections::BTreeMap<String, String>, f64)> {
        let cfg = parse_pairs(&fs::read_to_string(d.join("config.txt"))?)?;
        let t = BlowupEstimate::parse_t_star(&fs::read_to_string(d.join("blowup.txt"))?)?;
        Ok((cfg, t))
    };
    let (ca, ta) = read(a)?;
    let (cb, tb) = read(b)?;
    let keys: std::collections::BTreeSet<&String> = ca.keys().chain(cb.keys()).collect();
    for k in keys {
        if COMPARE_FREE_KEYS.contains(&k.as_str()) {
            continue;
        }
        let (va, vb) = (ca.get(k), cb.get(k));
        if va != vb {
            return Err(ShockError::Incompatible(format!(
                "{k} differs ({} vs {})",
                va.map_or("unset", |v| v.as_str()),
                vb.map_or("unset", |v| v.as_str())
            )));
        }
    }
    let eps = |c: &std::collections::BTreeMap<String, String>| -> Result<f64> {
        let mut text = String::new();
        for (k, v) in c {
            let _ = writeln!(text, "{k} = {v}");
        }
        Ok(RunConfig::parse(&text)?.init.epsilon)
    };
    let epsilon = [eps(&ca)?, eps(&cb)?];
    let t_star = [ta, tb];
    let scaled = [ta / (epsilon[0] * epsilon[0]), tb / (epsilon[1] * epsilon[1])];
    Ok(ScalingReport { epsilon, t_star, scaled, ratio: scaled[0] / scaled[1] })
}
