//! Runtime audits of the bootstrap bounds and blowup estimates.
//!
//! The bootstrap ledger checks the weighted derivative bounds of `W`, `W̃`,
//! `Z` and `U_ν` on a self-similar state; the physical audit adds the sound
//! speed, specific vorticity, support and modulation bounds.  Blowup time
//! and location are estimated from the steepening of `∂₁w` at the tracked
//! point.

use std::fmt::Write as _;

use crate::config::BetaConstants;
use crate::error::{Result, ShockError};
use crate::grid::{energy_lambda, interpolate_values, sobolev_seminorm, Field, Grid};
use crate::ledger::{Combine, DerivativeRow, LedgerReport, RowStatus};
use crate::profile::{eta, eval_barw};
use crate::renorm::{Modulation, SelfSimilarState};
use crate::solver::PhysicalState;

/// Identifiers of the bootstrap ledger, in report order.
pub const BOOTSTRAP_CATALOG: [&str; 25] = [
    "boot.W.0",
    "boot.W.1",
    "boot.W.nu",
    "boot.W.11",
    "boot.W.1nu",
    "boot.W.nunu",
    "boot.W.lbd",
    "boot.tdW.0",
    "boot.tdW.1",
    "boot.tdW.nu",
    "boot.tdW.3",
    "boot.tdW.4",
    "boot.tdW.origin3",
    "boot.Z.0",
    "boot.Z.1",
    "boot.Z.2",
    "boot.Z.nu",
    "boot.Z.nunu",
    "boot.U.0",
    "boot.U.1",
    "boot.U.nu",
    "boot.U.nunu",
    "boot.W.origin",
    "boot.W.origin1",
    "boot.W.origin2",
];

/// Identifiers of the physical audit, in report order.
pub const PHYSICAL_CATALOG: [&str; 14] = [
    "phys.sound",
    "phys.vorticity",
    "phys.support.y1",
    "phys.support.ycheck",
    "phys.taudot",
    "phys.kappadot",
    "phys.xidot",
    "phys.kappa.lower",
    "phys.kappa.upper",
    "phys.xi",
    "phys.beta_tau",
    "phys.tstar",
    "phys.density",
    "phys.mass",
];

fn unit(a: usize) -> [usize; 3] {
    let mut g = [0; 3];
    g[a] = 1;
    g
}

fn ones(gs: &[[usize; 3]]) -> Vec<([usize; 3], f64)> {
    gs.iter().map(|g| (*g, 1.0)).collect()
}

/// `W̃ = W - W̄` on the grid of a self-similar state.
pub fn perturbation(ss: &SelfSimilarState) -> Vec<f64> {
    let g = ss.grid();
    ss.w.values
        .iter()
        .enumerate()
        .map(|(i, w)| w - eval_barw(g.point(i), false).value)
        .collect()
}

fn norm3(y: [f64; 3]) -> f64 {
    (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt()
}

/// Audit the bootstrap bounds on a self-similar state with constant `M`.
/// Rows of derivative order two and higher carry the resolution test.
pub fn bootstrap_ledger(ss: &SelfSimilarState, m_audit: f64, epsilon: f64) -> Result<LedgerReport> {
    let g = ss.grid();
    let s = ss.s;
    let mut rep = LedgerReport::new();
    rep.meta("s", s);
    rep.meta("epsilon", epsilon);
    rep.meta("M_audit", m_audit);
    let big_l = epsilon.powf(-0.1);
    let small_l = m_audit.powf(-1.0 / 200.0);
    let e20 = epsilon.powf(1.0 / 20.0);
    let e18 = epsilon.powf(1.0 / 18.0);
    let tdw = perturbation(ss);

    let weight = |p: f64| move |y: [f64; 3]| Some(eta(y).powf(p));
    let inside = |r: f64, p: f64| move |y: [f64; 3]| (norm3(y) <= r).then(|| eta(y).powf(p));
    let origin = |y: [f64; 3]| (0..g.dim).all(|a| y[a].abs() <= 1e-9 * g.h[a]).then_some(1.0);

    let (e1, e2, e3) = (unit(0), unit(1), unit(2));
    let d11 = [2, 0, 0];
    let mixed = [[1, 1, 0], [1, 0, 1]];
    let trans2 = [[0, 2, 0], [0, 1, 1], [0, 0, 2]];
    let order3 = crate::grid::multi_indices(3, 3);
    let order4 = crate::grid::multi_indices(3, 4);
    let active = |gs: Vec<[usize; 3]>| -> Vec<([usize; 3], f64)> {
        ones(&gs.into_iter().filter(|gm| (0..3).all(|a| gm[a] == 0 || a < g.dim)).collect::<Vec<_>>())
    };

    struct Spec<'a> {
        id: &'a str,
        family: &'a str,
        values: &'a [f64],
        gammas: Vec<([usize; 3], f64)>,
        region: &'a dyn Fn([f64; 3]) -> Option<f64>,
        coef: f64,
        power: f64,
    }
    let w0 = weight(-1.0 / 6.0);
    let w1 = weight(1.0 / 3.0);
    let w16 = weight(1.0 / 6.0);
    let flat = weight(0.0);
    let l0 = inside(big_l, -1.0 / 6.0);
    let l1 = inside(big_l, 1.0 / 3.0);
    let lf = inside(big_l, 0.0);
    let ls = inside(small_l, 0.0);
    let e32 = (-1.5 * s).exp();
    let es = (-s).exp();
    let se = epsilon.sqrt();
    let specs_w = vec![
        Spec { id: "boot.W.0", family: "W", values: &ss.w.values, gammas: ones(&[[0, 0, 0]]), region: &w0, coef: 2.0, power: 0.0 },
        Spec { id: "boot.W.1", family: "W", values: &ss.w.values, gammas: ones(&[e1]), region: &w1, coef: 2.0, power: 0.0 },
        Spec { id: "boot.W.nu", family: "W", values: &ss.w.values, gammas: ones(&[e2, e3]), region: &flat, coef: 2.0, power: 0.0 },
        Spec { id: "boot.W.11", family: "W", values: &ss.w.values, gammas: ones(&[d11]), region: &w1, coef: 2.0, power: 1.0 / 3.0 },
        Spec { id: "boot.W.1nu", family: "W", values: &ss.w.values, gammas: ones(&mixed), region: &w1, coef: 2.0, power: 2.0 / 3.0 },
        Spec { id: "boot.W.nunu", family: "W", values: &ss.w.values, gammas: ones(&trans2), region: &w16, coef: 2.0, power: 1.0 },
    ];
    for sp in specs_w {
        let constant = sp.coef * m_audit.powf(sp.power);
        let order: usize = sp.gammas.iter().map(|(gm, _)| gm.iter().sum::<usize>()).max().unwrap_or(0);
        rep.audit(
            &g,
            sp.values,
            &DerivativeRow {
                id: sp.id,
                family: sp.family,
                constant,
                gammas: sp.gammas,
                combine: Combine::Max,
                value_scale: 1.0,
                axis_scale: [1.0; 3],
                region: sp.region,
                resolution_test: order >= 2,
                m_coef: if sp.power > 0.0 { sp.coef } else { 0.0 },
                m_power: sp.power,
            },
        )?;
    }
    rep.audit(
        &g,
        &ss.w.values,
        &DerivativeRow {
            id: "boot.W.lbd",
            family: "W",
            constant: 1.0 + e20,
            gammas: ones(&[e1]),
            combine: Combine::Max,
            value_scale: 1.0,
            axis_scale: [1.0; 3],
            region: &flat,
            resolution_test: false,
            m_coef: 0.0,
            m_power: 0.0,
        },
    )?;

    let specs_tdw: Vec<Spec> = vec![
        Spec { id: "boot.tdW.0", family: "W-tilde", values: &tdw, gammas: ones(&[[0, 0, 0]]), region: &l0, coef: e20, power: 0.0 },
        Spec { id: "boot.tdW.1", family: "W-tilde", values: &tdw, gammas: ones(&[e1]), region: &l1, coef: e20, power: 0.0 },
        Spec { id: "boot.tdW.nu", family: "W-tilde", values: &tdw, gammas: ones(&[e2, e3]), region: &lf, coef: e20, power: 0.0 },
        Spec { id: "boot.tdW.3", family: "W-tilde", values: &tdw, gammas: active(order3.clone()), region: &ls, coef: 2.0 / 3.0 * e18 * small_l, power: 1.0 },
        Spec { id: "boot.tdW.4", family: "W-tilde", values: &tdw, gammas: active(order4), region: &ls, coef: 2.0 / 3.0 * e18, power: 1.0 },
        Spec { id: "boot.tdW.origin3", family: "W-tilde", values: &tdw, gammas: active(order3), region: &origin, coef: epsilon.powf(0.1), power: 0.0 },
    ];
    for sp in specs_tdw {
        let constant = sp.coef * m_audit.powf(sp.power);
        let order: usize = sp.gammas.iter().map(|(gm, _)| gm.iter().sum::<usize>()).max().unwrap_or(0);
        rep.audit(
            &g,
            sp.values,
            &DerivativeRow {
                id: sp.id,
                family: sp.family,
                constant,
                gammas: sp.gammas,
                combine: Combine::Max,
                value_scale: 1.0,
                axis_scale: [1.0; 3],
                region: sp.region,
                resolution_test: order >= 2,
                m_coef: if sp.power > 0.0 { sp.coef } else { 0.0 },
                m_power: sp.power,
            },
        )?;
    }

    // Z and U_ν rows: constant M · scale.
    let zspecs: [(&str, Vec<[usize; 3]>, f64); 5] = [
        ("boot.Z.0", vec![[0, 0, 0]], se),
        ("boot.Z.1", vec![e1], e32),
        ("boot.Z.2", vec![d11, [1, 1, 0], [1, 0, 1]], e32),
        ("boot.Z.nu", vec![e2, e3], se * (-0.5 * s).exp()),
        ("boot.Z.nunu", trans2.to_vec(), es),
    ];
    for (id, gs, scale) in zspecs {
        let order = gs.iter().map(|gm| gm.iter().sum::<usize>()).max().unwrap_or(0);
        rep.audit(
            &g,
            &ss.z.values,
            &DerivativeRow {
                id,
                family: "Z",
                constant: m_audit * scale,
                gammas: ones(&gs),
                combine: Combine::Max,
                value_scale: 1.0,
                axis_scale: [1.0; 3],
                region: &flat,
                resolution_test: order >= 2,
                m_coef: scale,
                m_power: 1.0,
            },
        )?;
    }
    let uspecs: [(&str, Vec<[usize; 3]>, f64); 4] = [
        ("boot.U.0", vec![[0, 0, 0]], se),
        ("boot.U.1", vec![e1], e32),
        ("boot.U.nu", vec![e2, e3], se * (-0.5 * s).exp()),
        ("boot.U.nunu", trans2.to_vec(), es),
    ];
    for (id, gs, scale) in uspecs {
        let order = gs.iter().map(|gm| gm.iter().sum::<usize>()).max().unwrap_or(0);
        let mut sub = LedgerReport::new();
        for nu in 1..3 {
            sub.audit(
                &g,
                &ss.u[nu].values,
                &DerivativeRow {
                    id,
                    family: "U",
                    constant: m_audit * scale,
                    gammas: ones(&gs),
                    combine: Combine::Max,
                    value_scale: 1.0,
                    axis_scale: [1.0; 3],
                    region: &flat,
                    resolution_test: order >= 2,
                    m_coef: scale,
                    m_power: 1.0,
                },
            )?;
        }
        // Worst of the two components (a failure or limitation dominates).
        let pick = sub
            .rows
            .iter()
            .max_by(|a, b| {
                let rank = |r: &crate::ledger::LedgerRow| match r.status {
                    RowStatus::Fail => 3,
                    RowStatus::ResolutionLimited => 2,
                    RowStatus::Pass => 1,
                    RowStatus::Skipped => 0,
                };
                rank(a).cmp(&rank(b)).then(a.measured.total_cmp(&b.measured))
            })
            .cloned()
            .expect("two rows");
        rep.rows.push(pick);
    }

    // Normalization at the origin (constraints), to interpolation tolerance.
    let at0 = |gamma: [usize; 3]| -> Result<f64> {
        crate::grid::point_derivative(&g, &ss.w.values, [0.0; 3], gamma)
    };
    rep.check("boot.W.origin", "constraints", CONSTRAINT_TOL, interpolate_values(&g, &ss.w.values, [0.0; 3]).unwrap_or(f64::NAN).abs());
    let mut grad_dev = (at0(e1)? + 1.0).abs();
    for nu in 1..g.dim {
        grad_dev = grad_dev.max(at0(unit(nu))?.abs());
    }
    rep.check("boot.W.origin1", "constraints", CONSTRAINT_TOL, grad_dev);
    let mut hess = 0.0f64;
    for i in 0..g.dim {
        for j in i..g.dim {
            let gm = [
                (i == 0) as usize + (j == 0) as usize,
                (i == 1) as usize + (j == 1) as usize,
                (i == 2) as usize + (j == 2) as usize,
            ];
            hess = hess.max(at0(gm)?.abs());
        }
    }
    rep.check("boot.W.origin2", "constraints", CONSTRAINT_TOL, hess);
    Ok(rep)
}

/// Tolerance of the normalization rows at `y = 0`.
pub const CONSTRAINT_TOL: f64 = 1e-3;

/// Inputs of the physical audit beyond the self-similar state.
pub struct PhysicalAuditInput<'a> {
    pub state: &'a PhysicalState,
    pub ss: &'a SelfSimilarState,
    pub modulation: &'a Modulation,
    pub epsilon: f64,
    pub kappa0: f64,
    pub m_audit: f64,
    /// Half-widths `(p₁, q₁)` of the core where the data are unmodified by cutoffs.
    pub core: [f64; 2],
    /// Whether the state has a vacuum boundary (support rows apply).
    pub vacuum: bool,
    /// Electron mass at the initial time.
    pub initial_mass: f64,
}

/// Blowup time implied by the `τ` bookkeeping: the root of `τ(t) = t` with `τ`
/// extended linearly from the current record.
pub fn tstar_from_modulation(m: &Modulation) -> f64 {
    (m.tau - m.taudot * m.t) / (1.0 - m.taudot)
}

/// Sound-speed, vorticity, support, modulation and density rows.
pub fn physical_bounds_audit(inp: &PhysicalAuditInput) -> Result<LedgerReport> {
    let mut rep = LedgerReport::new();
    let ss = inp.ss;
    let m = inp.modulation;
    let eps = inp.epsilon;
    let s = ss.s;
    let half = inp.kappa0 / 2.0;
    let sound_dev = ss.sound.values.iter().map(|v| (v - half).abs()).fold(0.0, f64::max);
    rep.check("phys.sound", "sound speed", eps.powf(0.125), sound_dev);

    let zeta = inp.state.specific_vorticity()?;
    let g = zeta.grid;
    let mut vort = 0.0f64;
    for (i, v) in zeta.values.iter().enumerate() {
        let p = g.point(i);
        let x = [p[0] - m.xi[0], p[1] - m.xi[1], p[2] - m.xi[2]];
        let r = (x[1] * x[1] + x[2] * x[2]).sqrt();
        if x[0].abs() <= inp.core[0] && (g.dim == 1 || r <= inp.core[1]) {
            vort = vort.max(v.abs());
        }
    }
    rep.check("phys.vorticity", "specific vorticity", 2.0, vort);

    if inp.vacuum {
        rep.check("phys.support.y1", "support", ss.support_box[0], ss.support_extent[0]);
        if g.dim == 3 {
            rep.check("phys.support.ycheck", "support", ss.support_box[1], ss.support_extent[1]);
        } else {
            rep.mark("phys.support.ycheck", "support", ss.support_box[1], 0.0, RowStatus::Skipped);
        }
    } else {
        rep.mark("phys.support.y1", "support", ss.support_box[0], 0.0, RowStatus::Skipped);
        rep.mark("phys.support.ycheck", "support", ss.support_box[1], 0.0, RowStatus::Skipped);
    }

    let ma = inp.m_audit;
    let xidot = m.xidot.iter().map(|v| v * v).sum::<f64>().sqrt();
    rep.check_m("phys.taudot", "modulation", 2.0 * ma * (-s).exp(), m.taudot.abs(), 2.0 * (-s).exp(), 1.0);
    rep.check_m("phys.kappadot", "modulation", ma, m.kappadot.abs(), 1.0, 1.0);
    rep.check_m("phys.xidot", "modulation", ma.sqrt(), xidot, 1.0, 0.5);
    rep.check("phys.kappa.lower", "modulation", m.kappa.abs(), 0.5 * inp.kappa0);
    rep.check("phys.kappa.upper", "modulation", 2.0 * inp.kappa0, m.kappa.abs());
    let xi = m.xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    rep.check_m("phys.xi", "modulation", ma * eps, xi, eps, 1.0);
    rep.check_m("phys.beta_tau", "modulation", 2.0 * ma * (-s).exp(), (1.0 - m.beta_tau).abs(), 2.0 * (-s).exp(), 1.0);
    let tstar = tstar_from_modulation(m);
    rep.check_m("phys.tstar", "blowup time", 3.0 * ma * eps * eps, tstar.abs(), 3.0 * eps * eps, 1.0);

    let alpha = inp.state.alpha;
    let dens = ss.sound.values.iter().map(|v| (alpha * v - alpha * half).abs()).fold(0.0, f64::max);
    rep.check("phys.density", "density", eps.powf(0.1), dens);

    if inp.vacuum {
        let mass = inp.state.electron_mass();
        let rel = (mass - inp.initial_mass).abs() / inp.initial_mass.abs().max(f64::MIN_POSITIVE);
        rep.check("phys.mass", "mass", MASS_TOL, rel);
    } else {
        // Fluid crosses the boundaries of an open domain.
        rep.mark("phys.mass", "mass", MASS_TOL, 0.0, RowStatus::Skipped);
    }
    Ok(rep)
}

/// Relative tolerance of electron mass conservation.
pub const MASS_TOL: f64 = 1e-6;

/// Blowup time and point estimated from the steepening of `∂₁w`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlowupEstimate {
    pub t_star: f64,
    pub xi_star: [f64; 3],
    /// RMS residual of the line fit of `-1/∂₁w` against `t`.
    pub fit_residual: f64,
    /// Fraction of fitted samples with `1/(2(T*-t)) ≤ |∂₁w| ≤ 2/(T*-t)`.
    pub compliance: f64,
    /// Time window `[t_first, t_last]` of the fitted samples.
    pub window: [f64; 2],
    pub samples: usize,
    /// How the estimate was obtained (`slope-fit` or `tau-bookkeeping`).
    pub method: String,
}

impl BlowupEstimate {
    /// Key/value text block.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "method: {}", self.method);
        let _ = writeln!(s, "T_star: {:.12e}", self.t_star);
        let _ = writeln!(
            s,
            "xi_star: [{:.12e}, {:.12e}, {:.12e}]",
            self.xi_star[0], self.xi_star[1], self.xi_star[2]
        );
        let _ = writeln!(s, "fit_residual: {:.6e}", self.fit_residual);
        let _ = writeln!(s, "compliance: {:.6}", self.compliance);
        let _ = writeln!(s, "window: [{:.12e}, {:.12e}]", self.window[0], self.window[1]);
        let _ = writeln!(s, "samples: {}", self.samples);
        s
    }

    /// Parse the `T_star` entry of a text block.
    pub fn parse_t_star(text: &str) -> Result<f64> {
        text.lines()
            .find_map(|l| l.strip_prefix("T_star:"))
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| ShockError::Malformed("blowup report without T_star".into()))
    }
}

/// Minimum number of fitted samples.
pub const MIN_BLOWUP_SAMPLES: usize = 10;

/// Required growth of `|∂₁w|` over the series.
pub const MIN_STEEPENING: f64 = 5.0;

/// Fit `-1/m = a + b t` on the final decade of steepening (samples with
/// `|m| ≥ |m_last|/10`) and return its root as `T*`.  `xi` holds the tracked
/// point at the same times (may be empty); the last two entries give the
/// linear extrapolation to `ξ*`.
pub fn estimate_blowup(t: &[f64], slope: &[f64], xi: &[[f64; 3]]) -> Result<BlowupEstimate> {
    if t.len() != slope.len() || (!xi.is_empty() && xi.len() != t.len()) {
        return Err(ShockError::ShapeMismatch("blowup series lengths differ".into()));
    }
    let no_trend = || ShockError::InsufficientData("no blowup trend".into());
    if t.len() < MIN_BLOWUP_SAMPLES || slope.iter().any(|m| !(m.is_finite() && *m < 0.0)) {
        return Err(no_trend());
    }
    let first = slope[0].abs();
    let last = slope[slope.len() - 1].abs();
    if !(last >= MIN_STEEPENING * first) {
        return Err(no_trend());
    }
    let idx: Vec<usize> = (0..t.len()).filter(|&i| slope[i].abs() >= last / 10.0).collect();
    if idx.len() < MIN_BLOWUP_SAMPLES {
        return Err(no_trend());
    }
    // Centre the abscissa for conditioning.
    let n = idx.len() as f64;
    let tm = idx.iter().map(|&i| t[i]).sum::<f64>() / n;
    let vm = idx.iter().map(|&i| -1.0 / slope[i]).sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &i in &idx {
        let dx = t[i] - tm;
        sxx += dx * dx;
        sxy += dx * (-1.0 / slope[i] - vm);
    }
    if !(sxx > 0.0) {
        return Err(no_trend());
    }
    let b = sxy / sxx;
    if !(b < 0.0) {
        return Err(no_trend());
    }
    let t_star = tm - vm / b;
    let t_last = t[t.len() - 1];
    if !(t_star > t_last) {
        return Err(ShockError::InsufficientData(format!(
            "fitted blowup time {t_star} precedes the last sample {t_last}"
        )));
    }
    let mut res = 0.0;
    let mut ok = 0usize;
    for &i in &idx {
        let fit = vm + b * (t[i] - tm);
        res += (-1.0 / slope[i] - fit).powi(2);
        let gap = t_star - t[i];
        let m = slope[i].abs();
        if gap > 0.0 && m >= 0.5 / gap && m <= 2.0 / gap {
            ok += 1;
        }
    }
    let xi_star = extrapolate_xi(t, xi, t_star);
    Ok(BlowupEstimate {
        t_star,
        xi_star,
        fit_residual: (res / n).sqrt(),
        compliance: ok as f64 / n,
        window: [t[idx[0]], t_last],
        samples: idx.len(),
        method: "slope-fit".into(),
    })
}

fn extrapolate_xi(t: &[f64], xi: &[[f64; 3]], t_star: f64) -> [f64; 3] {
    let n = xi.len();
    if n == 0 {
        return [0.0; 3];
    }
    if n == 1 {
        return xi[0];
    }
    let dt = t[n - 1] - t[n - 2];
    std::array::from_fn(|a| xi[n - 1][a] + (xi[n - 1][a] - xi[n - 2][a]) / dt * (t_star - t[n - 1]))
}

/// Blowup estimate from the modulation bookkeeping, used when the slope
/// series shows no trend before the run stops.
pub fn blowup_from_modulation(series: &[Modulation], v_track: f64) -> Result<BlowupEstimate> {
    let last = series
        .last()
        .ok_or_else(|| ShockError::InsufficientData("empty modulation series".into()))?;
    let t_star = tstar_from_modulation(last);
    let xi_star = std::array::from_fn(|a| last.xi[a] + v_track * last.xidot[a] * (t_star - last.t));
    Ok(BlowupEstimate {
        t_star,
        xi_star,
        fit_residual: 0.0,
        compliance: f64::NAN,
        window: [series[0].t, last.t],
        samples: series.len(),
        method: "tau-bookkeeping".into(),
    })
}

/// `sup_{|y|≤R} |W - W̄|` and `sup_{|y|≤R} η^{-1/6} |W - W̄|`.
pub fn profile_convergence(ss: &SelfSimilarState, radius: f64) -> Result<[f64; 2]> {
    let g = ss.grid();
    for a in 0..g.dim {
        if radius > g.ext[a] * (1.0 + 1e-12) {
            return Err(ShockError::OutOfRange(format!(
                "radius {radius} exceeds the resolved region along axis {}",
                a + 1
            )));
        }
    }
    let mut out = [0.0f64; 2];
    for (i, w) in ss.w.values.iter().enumerate() {
        let y = g.point(i);
        if norm3(y) <= radius {
            let d = (w - eval_barw(y, false).value).abs();
            out[0] = out[0].max(d);
            out[1] = out[1].max(d * eta(y).powf(-1.0 / 6.0));
        }
    }
    Ok(out)
}

/// Path of a Lagrangian trajectory in self-similar variables.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub s: Vec<f64>,
    pub y: Vec<[f64; 3]>,
    /// The path left the region where the velocity is defined.
    pub exited: bool,
    /// `|Ψ(s)| ≥ |y₀| e^{(s-s₀)/5}` at every recorded point.
    pub escape_ok: bool,
}

/// Integrate `dy/ds = V(y, s)` by RK4 from `s0` to `s1` in `steps` steps.
/// The sampler returns `None` outside its domain; the path is then cut and
/// flagged.
pub fn integrate_trajectory(
    velocity: &dyn Fn([f64; 3], f64) -> Option<[f64; 3]>,
    y0: [f64; 3],
    s0: f64,
    s1: f64,
    steps: usize,
) -> Result<Trajectory> {
    if steps == 0 || !(s1 > s0) {
        return Err(ShockError::InsufficientData("empty trajectory interval".into()));
    }
    let ds = (s1 - s0) / steps as f64;
    let r0 = norm3(y0);
    let mut tr = Trajectory { s: vec![s0], y: vec![y0], exited: false, escape_ok: true };
    let mut y = y0;
    let axpy = |y: [f64; 3], k: [f64; 3], h: f64| [y[0] + h * k[0], y[1] + h * k[1], y[2] + h * k[2]];
    for n in 0..steps {
        let s = s0 + n as f64 * ds;
        let stage = || -> Option<[f64; 3]> {
            let k1 = velocity(y, s)?;
            let k2 = velocity(axpy(y, k1, 0.5 * ds), s + 0.5 * ds)?;
            let k3 = velocity(axpy(y, k2, 0.5 * ds), s + 0.5 * ds)?;
            let k4 = velocity(axpy(y, k3, ds), s + ds)?;
            Some(std::array::from_fn(|a| {
                y[a] + ds / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a])
            }))
        };
        match stage() {
            Some(next) => {
                y = next;
                let sn = s0 + (n + 1) as f64 * ds;
                if norm3(y) < r0 * ((sn - s0) / 5.0).exp() * (1.0 - 1e-12) {
                    tr.escape_ok = false;
                }
                tr.s.push(sn);
                tr.y.push(y);
            }
            None => {
                tr.exited = true;
                break;
            }
        }
    }
    Ok(tr)
}

/// Transport velocity `(g_W + 3y₁/2, h² + y₂/2, h³ + y₃/2)` of `W` on a
/// self-similar state, with `g_W = β_τ W + G_W`,
/// `G_W = β_τ e^{s/2} (κ + β₂ Z - 2β₁ ξ̇₁)` and
/// `h^ν = 2β₁ β_τ e^{-s/2} (U_ν - ξ̇_ν)`.  `None` outside the grid.
pub fn transport_velocity(
    ss: &SelfSimilarState,
    m: &Modulation,
    betas: &BetaConstants,
    y: [f64; 3],
) -> Option<[f64; 3]> {
    let g = ss.grid();
    let bt = m.beta_tau;
    let es2 = (0.5 * ss.s).exp();
    let w = interpolate_values(&g, &ss.w.values, y)?;
    let z = interpolate_values(&g, &ss.z.values, y)?;
    let gw = bt * w + bt * es2 * (m.kappa + betas.beta2 * z - 2.0 * betas.beta1 * m.xidot[0]);
    let mut v = [gw + 1.5 * y[0], 0.0, 0.0];
    for nu in 1..g.dim {
        let u = interpolate_values(&g, &ss.u[nu].values, y)?;
        v[nu] = 2.0 * betas.beta1 * bt / es2 * (u - m.xidot[nu]) + 0.5 * y[nu];
    }
    Some(v)
}

/// Energy series and its trend check.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergySeries {
    pub s: Vec<f64>,
    pub energy: Vec<f64>,
    /// Least-squares coefficients of `E(s) ≈ c₁ e^{-(s - s₀)} + c₂`.
    pub c1: f64,
    pub c2: f64,
    /// Largest ratio of `E` to the fitted envelope (with both coefficients
    /// clamped to be non-negative).
    pub envelope_ratio: f64,
    /// `envelope_ratio ≤ 2`.
    pub bounded: bool,
}

/// `E_k(s) = (Σ_{|γ|=k} λ^{|γ̌|} (‖∂^γU‖² + ‖∂^γS‖²))^{1/2}` of one state.
pub fn energy_value(ss: &SelfSimilarState, k: usize, delta: f64) -> Result<f64> {
    if k > 4 {
        return Err(ShockError::UnsupportedOrder(k));
    }
    let fields: Vec<&Field> = vec![&ss.u[0], &ss.u[1], &ss.u[2], &ss.sound];
    sobolev_seminorm(&fields, k, energy_lambda(delta, k))
}

/// Fit of the trend `c₁ e^{-(s+log ε)} + c₂` to recorded `(s, E)` pairs.
pub fn energy_trend(s: Vec<f64>, e: Vec<f64>, epsilon: f64) -> Result<EnergySeries> {
    if s.len() != e.len() {
        return Err(ShockError::ShapeMismatch("energy series lengths differ".into()));
    }
    let s0 = -epsilon.ln();
    let basis: Vec<f64> = s.iter().map(|v| (-(v - s0)).exp()).collect();
    let (c1, c2) = fit_two(&basis, &e);
    let (c1p, c2p) = (c1.max(0.0), c2.max(0.0));
    let mut ratio = 0.0f64;
    for (b, v) in basis.iter().zip(&e) {
        let env = c1p * b + c2p;
        if *v > 0.0 {
            ratio = ratio.max(if env > 0.0 { v / env } else { f64::INFINITY });
        }
    }
    Ok(EnergySeries { s, energy: e, c1, c2, envelope_ratio: ratio, bounded: ratio <= 2.0 })
}

/// [`energy_value`] of every state followed by [`energy_trend`].
pub fn energy_series(states: &[&SelfSimilarState], k: usize, delta: f64, epsilon: f64) -> Result<EnergySeries> {
    let mut s = Vec::new();
    let mut e = Vec::new();
    for ss in states {
        s.push(ss.s);
        e.push(energy_value(ss, k, delta)?);
    }
    energy_trend(s, e, epsilon)
}

fn fit_two(b: &[f64], y: &[f64]) -> (f64, f64) {
    let n = b.len() as f64;
    if b.is_empty() {
        return (0.0, 0.0);
    }
    let bm = b.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let sbb: f64 = b.iter().map(|v| (v - bm).powi(2)).sum();
    let sby: f64 = b.iter().zip(y).map(|(u, v)| (u - bm) * (v - ym)).sum();
    if sbb <= 1e-300 {
        return (0.0, ym);
    }
    let c1 = sby / sbb;
    (c1, ym - c1 * bm)
}

/// Profile samples on a grid for comparisons (`W̄` at every node).
pub fn sample_profile(g: Grid) -> Field {
    Field::from_fn(g, "Wbar", |y| eval_barw(y, false).value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn ss_from(g: Grid, s: f64, w: impl Fn([f64; 3]) -> f64, z: impl Fn([f64; 3]) -> f64) -> SelfSimilarState {
        SelfSimilarState {
            s,
            t: 0.0,
            w: Field::from_fn(g, "W", w),
            z: Field::from_fn(g, "Z", z),
            u: [Field::zeros(g, "U1"), Field::zeros(g, "U2"), Field::zeros(g, "U3")],
            sound: Field::from_fn(g, "S", |_| 3.0),
            support_box: [1.0, 1.0],
            support_extent: [0.5, 0.5],
        }
    }

    #[test]
    fn catalog_is_pinned() {
        let g = Grid::new(1, [161, 1, 1], [4.0, 0.0, 0.0]).unwrap();
        let ss = ss_from(g, 4.0, |y| eval_barw(y, false).value, |_| 0.0);
        let rep = bootstrap_ledger(&ss, 20.0, 0.05).unwrap();
        let ids: Vec<&str> = rep.rows.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, BOOTSTRAP_CATALOG.to_vec());
    }

    #[test]
    fn profile_passes_w_rows() {
        let g = Grid::new(1, [321, 1, 1], [4.0, 0.0, 0.0]).unwrap();
        let ss = ss_from(g, 4.0, |y| eval_barw(y, false).value, |_| 0.0);
        let rep = bootstrap_ledger(&ss, 2.0, 0.05).unwrap();
        for r in rep.rows.iter().filter(|r| r.id.starts_with("boot.W")) {
            assert_ne!(r.status, RowStatus::Fail, "{}", rep.to_table());
        }
        assert_eq!(profile_convergence(&ss, 1.0).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn injected_violation_fails() {
        let g = Grid::new(1, [161, 1, 1], [4.0, 0.0, 0.0]).unwrap();
        let ss = ss_from(g, 4.0, |y| 3.0 * eta(y).powf(1.0 / 6.0), |_| 0.0);
        let rep = bootstrap_ledger(&ss, 20.0, 0.05).unwrap();
        let r = rep.row("boot.W.0").unwrap();
        assert_eq!(r.status, RowStatus::Fail);
        assert!((r.margin + 1.0).abs() < 1e-12);
    }

    #[test]
    fn z_row_at_half_constant() {
        let g = Grid::new(1, [161, 1, 1], [4.0, 0.0, 0.0]).unwrap();
        let (m, eps): (f64, f64) = (20.0, 0.05);
        let amp = 0.5 * m * eps.sqrt();
        let ss = ss_from(g, 4.0, |y| eval_barw(y, false).value, |y| amp * (-(y[0] * y[0])).exp());
        let rep = bootstrap_ledger(&ss, m, eps).unwrap();
        let r = rep.row("boot.Z.0").unwrap();
        assert!((r.ratio() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn synthetic_blowup() {
        let ts: Vec<f64> = (0..200).map(|i| -0.05 + 0.0599 * i as f64 / 200.0).collect();
        let ms: Vec<f64> = ts.iter().map(|t| -1.0 / (0.01 - t)).collect();
        let e = estimate_blowup(&ts, &ms, &[]).unwrap();
        assert!((e.t_star - 0.01).abs() < 1e-6);
        assert_eq!(e.compliance, 1.0);
        let flat = vec![-1.0; 50];
        assert!(estimate_blowup(&ts[..50], &flat, &[]).is_err());
    }

    #[test]
    fn trajectory_linear_flow() {
        let v = |y: [f64; 3], _s: f64| Some([1.5 * y[0], 0.5 * y[1], 0.5 * y[2]]);
        let tr = integrate_trajectory(&v, [1.0, 1.0, 1.0], 0.0, 1.0, 200).unwrap();
        let y = tr.y.last().unwrap();
        assert!((y[0] - 1.5f64.exp()).abs() < 1e-9);
        assert!((y[1] - 0.5f64.exp()).abs() < 1e-9);
        assert!(tr.escape_ok && !tr.exited);
    }

    #[test]
    fn zero_energy() {
        let g = Grid::new(1, [64, 1, 1], [4.0, 0.0, 0.0]).unwrap();
        let mut ss = ss_from(g, 4.0, |_| 0.0, |_| 0.0);
        ss.sound = Field::zeros(g, "S");
        let e = energy_series(&[&ss, &ss], 2, 1.0 / 32.0, 0.05).unwrap();
        assert_eq!(e.energy, vec![0.0, 0.0]);
    }
}
