//! Modulation variables and the self-similar renormalization.
//!
//! The modulation `(κ, τ, ξ)` fixes the normalization
//! `W(0,s)=0, ∂₁W(0,s)=-1, ∇̌W(0,s)=0, ∇²W(0,s)=0` of
//!
//! ```text
//! s = -log(τ - t),  y₁ = e^{3s/2} x₁,  y_ν = e^{s/2} x_ν,  x = x_phys - ξ,
//! w = e^{-s/2} W(y,s) + κ,  z = Z,  u = U,  σ = S.
//! ```
//!
//! Two routes compute it: Newton tracking of the critical point of `∂₁w`
//! (constraint route) and integration of the modulation ODEs sampled at the
//! tracked point (ODE route).

use crate::config::BetaConstants;
use crate::error::{Result, ShockError};
use crate::grid::{derivative, interpolate, point_derivative, CsvSeries, Field, Grid};
use crate::solver::{PhysicalState, VACUUM_FLOOR};

/// Maximum Newton iterations of the constraint route.
pub const NEWTON_MAX_ITER: usize = 20;
/// Newton step, in cells, below which the constraint fit has converged.
pub const NEWTON_TOL: f64 = 1e-7;
/// Final Newton step, in cells, accepted when the iteration cycles.
pub const NEWTON_CYCLE_TOL: f64 = 1e-3;

/// Modulation variables and their rates.  `xidot` is the rate entering the
/// modulation equations; the tracked point moves with velocity `2β₁ ξ̇`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Modulation {
    pub t: f64,
    pub kappa: f64,
    pub tau: f64,
    pub xi: [f64; 3],
    pub kappadot: f64,
    pub taudot: f64,
    pub xidot: [f64; 3],
    /// `1 / (1 - τ̇)`.
    pub beta_tau: f64,
}

impl Modulation {
    /// Values at the initial time: `κ = κ₀`, `τ = 0`, `ξ = 0`, zero rates.
    pub fn initial(t: f64, kappa0: f64) -> Modulation {
        Modulation {
            t,
            kappa: kappa0,
            tau: 0.0,
            xi: [0.0; 3],
            kappadot: 0.0,
            taudot: 0.0,
            xidot: [0.0; 3],
            beta_tau: 1.0,
        }
    }

    /// Self-similar time `-log(τ - t)`.
    pub fn s(&self) -> Result<f64> {
        let gap = self.tau - self.t;
        if !(gap > 0.0) {
            return Err(ShockError::Modulation(format!(
                "tau {} does not exceed t {} (past blowup)",
                self.tau, self.t
            )));
        }
        Ok(-gap.ln())
    }

    /// Set `τ̇` and the matching `β_τ`.
    pub fn set_taudot(&mut self, taudot: f64) -> Result<()> {
        if !(taudot < 1.0) {
            return Err(ShockError::Modulation(format!(
                "beta_tau not positive (taudot = {taudot})"
            )));
        }
        self.taudot = taudot;
        self.beta_tau = 1.0 / (1.0 - taudot);
        Ok(())
    }

    /// Rates by finite differencing against an earlier record.
    pub fn with_rates_from(mut self, prev: &Modulation, betas: &BetaConstants) -> Result<Modulation> {
        let dt = self.t - prev.t;
        if !(dt > 0.0) {
            return Err(ShockError::Modulation("records not increasing in time".into()));
        }
        self.kappadot = (self.kappa - prev.kappa) / dt;
        for a in 0..3 {
            self.xidot[a] = (self.xi[a] - prev.xi[a]) / (2.0 * betas.beta1 * dt);
        }
        self.set_taudot((self.tau - prev.tau) / dt)?;
        Ok(self)
    }
}

impl Modulation {
    /// Rates as least-squares slopes over `history` (oldest first) and this
    /// record.  A single earlier record reduces to a finite difference.
    pub fn with_rates_fit(mut self, history: &[Modulation], betas: &BetaConstants) -> Result<Modulation> {
        let Some(first) = history.first() else {
            return Err(ShockError::Modulation("no earlier record for the rates".into()));
        };
        if history.windows(2).any(|p| !(p[1].t > p[0].t)) || !(self.t > history[history.len() - 1].t) {
            return Err(ShockError::Modulation("records not increasing in time".into()));
        }
        if history.len() == 1 {
            return self.with_rates_from(first, betas);
        }
        let cur = self;
        let recs: Vec<&Modulation> = history.iter().chain(std::iter::once(&cur)).collect();
        let n = recs.len() as f64;
        let tm = recs.iter().map(|m| m.t).sum::<f64>() / n;
        let stt: f64 = recs.iter().map(|m| (m.t - tm).powi(2)).sum();
        let slope = |f: &dyn Fn(&Modulation) -> f64| {
            let fm = recs.iter().map(|m| f(m)).sum::<f64>() / n;
            recs.iter().map(|m| (m.t - tm) * (f(m) - fm)).sum::<f64>() / stt
        };
        self.kappadot = slope(&|m| m.kappa);
        for a in 0..3 {
            self.xidot[a] = slope(&|m| m.xi[a]) / (2.0 * betas.beta1);
        }
        self.set_taudot(slope(&|m| m.tau))?;
        Ok(self)
    }
}

/// Riemann variables in coordinates centred at the tracked point.
#[derive(Clone, Debug)]
pub struct RiemannState {
    pub t: f64,
    /// Tracked point; the fields live on the physical grid and the centred
    /// coordinates are `x = x_phys - xi`.
    pub xi: [f64; 3],
    pub w: Field,
    pub z: Field,
    /// Velocity components (`u₁ = (w+z)/2`).
    pub u: [Field; 3],
    pub sigma: Field,
}

impl RiemannState {
    /// Physical point of translated coordinates `x`.
    pub fn physical_point(&self, x: [f64; 3]) -> [f64; 3] {
        [x[0] + self.xi[0], x[1] + self.xi[1], x[2] + self.xi[2]]
    }

    /// `u₁ = (w + z)/2`.
    pub fn u1(&self) -> Field {
        let v = self.w.values.iter().zip(&self.z.values).map(|(w, z)| 0.5 * (w + z)).collect();
        Field::from_values(self.w.grid, "u1", v).expect("same grid")
    }

    /// `σ = (w - z)/2`.
    pub fn sound_speed(&self) -> Field {
        let v = self.w.values.iter().zip(&self.z.values).map(|(w, z)| 0.5 * (w - z)).collect();
        Field::from_values(self.w.grid, "sigma", v).expect("same grid")
    }
}

/// Riemann variables `w = u₁ + σ`, `z = u₁ - σ` centred at `ξ`.
pub fn to_riemann(state: &PhysicalState, m: &Modulation) -> RiemannState {
    RiemannState {
        t: state.t,
        xi: m.xi,
        w: state.w(),
        z: state.z(),
        u: state.u.clone(),
        sigma: state.sigma.clone(),
    }
}

/// Fields in self-similar variables on a fixed `y` grid.
#[derive(Clone, Debug)]
pub struct SelfSimilarState {
    pub s: f64,
    pub t: f64,
    pub w: Field,
    pub z: Field,
    pub u: [Field; 3],
    pub sound: Field,
    /// Half-widths `(2ε^{1/2} e^{3s/2}, 2ε^{1/6} e^{s/2})` of the support box.
    pub support_box: [f64; 2],
    /// Extent `(max |y₁|, max |y̌|)` of the non-vacuum region.
    pub support_extent: [f64; 2],
}

impl SelfSimilarState {
    /// Grid of the fields.
    pub fn grid(&self) -> Grid {
        self.w.grid
    }

    /// Support margins (box minus extent) along `y₁` and `|y̌|`.
    pub fn support_margin(&self) -> [f64; 2] {
        [self.support_box[0] - self.support_extent[0], self.support_box[1] - self.support_extent[1]]
    }
}

/// Stretch factors `∂_{y_a} = scale[a] ∂_{x_a}`.
pub fn axis_scales(s: f64) -> [f64; 3] {
    [(-1.5 * s).exp(), (-0.5 * s).exp(), (-0.5 * s).exp()]
}

/// Extent `(max |x₁|, max |x̌|)` of the nodes with `σ` above the vacuum floor,
/// in coordinates centred at `xi`.
pub fn support_extent_x(sigma: &Field, xi: [f64; 3]) -> [f64; 2] {
    let g = sigma.grid;
    let mut out = [0.0f64; 2];
    for (idx, v) in sigma.values.iter().enumerate() {
        if *v > VACUUM_FLOOR {
            let p = g.point(idx);
            out[0] = out[0].max((p[0] - xi[0]).abs());
            let r = ((p[1] - xi[1]).powi(2) + (p[2] - xi[2]).powi(2)).sqrt();
            out[1] = out[1].max(r);
        }
    }
    out
}

/// Resample Riemann data onto the `y` grid: `W = e^{s/2}(w - κ)`, `Z`, `U`,
/// `S` by relabelling, with cubic interpolation.
pub fn to_selfsimilar(
    riem: &RiemannState,
    m: &Modulation,
    ygrid: Grid,
    epsilon: f64,
) -> Result<SelfSimilarState> {
    let s = Modulation { t: riem.t, ..*m }.s()?;
    let inv = [(1.5 * s).exp(), (0.5 * s).exp(), (0.5 * s).exp()];
    let sc = axis_scales(s);
    let es2 = (0.5 * s).exp();
    let n = ygrid.len();
    let mut vals: [Vec<f64>; 6] = std::array::from_fn(|_| Vec::with_capacity(n));
    let sigma = riem.sound_speed();
    for idx in 0..n {
        let y = ygrid.point(idx);
        let x = [y[0] * sc[0], y[1] * sc[1], y[2] * sc[2]];
        let p = riem.physical_point(x);
        let w = interpolate(&riem.w, p)?;
        vals[0].push(es2 * (w - m.kappa));
        vals[1].push(interpolate(&riem.z, p)?);
        for a in 0..3 {
            vals[2 + a].push(interpolate(&riem.u[a], p)?);
        }
        vals[5].push(interpolate(&sigma, p)?.max(0.0));
    }
    let [w, z, u1, u2, u3, sd] = vals;
    let ext = support_extent_x(&riem.sigma, riem.xi);
    Ok(SelfSimilarState {
        s,
        t: riem.t,
        w: Field::from_values(ygrid, "W", w)?,
        z: Field::from_values(ygrid, "Z", z)?,
        u: [
            Field::from_values(ygrid, "U1", u1)?,
            Field::from_values(ygrid, "U2", u2)?,
            Field::from_values(ygrid, "U3", u3)?,
        ],
        sound: Field::from_values(ygrid, "S", sd)?,
        support_box: [2.0 * epsilon.sqrt() * inv[0], 2.0 * epsilon.powf(1.0 / 6.0) * inv[1]],
        support_extent: [ext[0] * inv[0], ext[1] * inv[1]],
    })
}

fn unit(a: usize) -> [usize; 3] {
    let mut g = [0; 3];
    g[a] = 1;
    g
}

fn add(a: [usize; 3], b: [usize; 3]) -> [usize; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

/// Cholesky test of positive definiteness for the leading `d × d` block.
pub fn is_positive_definite(h: &[[f64; 3]; 3], d: usize) -> bool {
    let mut l = [[0.0f64; 3]; 3];
    for i in 0..d {
        for j in 0..=i {
            let mut s = h[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(s > 0.0) {
                    return false;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    true
}

/// Solve `h x = b` for the leading `d × d` block (Gaussian elimination with
/// partial pivoting).
pub fn solve_small(h: &[[f64; 3]; 3], b: &[f64; 3], d: usize) -> Result<[f64; 3]> {
    let mut a = *h;
    let mut r = *b;
    for c in 0..d {
        let p = (c..d)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .expect("non-empty");
        if a[p][c] == 0.0 || !a[p][c].is_finite() {
            return Err(ShockError::Modulation("singular matrix".into()));
        }
        a.swap(c, p);
        r.swap(c, p);
        for i in c + 1..d {
            let f = a[i][c] / a[c][c];
            for j in c..d {
                a[i][j] -= f * a[c][j];
            }
            r[i] -= f * r[c];
        }
    }
    let mut x = [0.0; 3];
    for i in (0..d).rev() {
        let mut s = r[i];
        for j in i + 1..d {
            s -= a[i][j] * x[j];
        }
        x[i] = s / a[i][i];
    }
    Ok(x)
}

/// Result of the constraint route at one time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstraintFit {
    pub kappa: f64,
    pub tau: f64,
    pub xi: [f64; 3],
    /// `∂₁w(ξ)`.
    pub d1w: f64,
    pub iterations: usize,
}

/// Locate the critical point of `∂₁w` near `guess` by Newton iteration and
/// read off `κ = w(ξ)` and `τ = t - 1/∂₁w(ξ)`.
pub fn modulation_from_constraints(riem: &RiemannState, guess: [f64; 3]) -> Result<ConstraintFit> {
    let g = riem.w.grid;
    let d = g.dim;
    let e1 = unit(0);
    let vals = &riem.w.values;
    let finish = |x: [f64; 3], iterations: usize| -> Result<ConstraintFit> {
        let kappa = interpolate(&riem.w, x)?;
        let d1w = point_derivative(&g, vals, x, e1)?;
        if !(d1w < 0.0) {
            return Err(ShockError::Modulation(format!("tracked slope {d1w} is not negative")));
        }
        Ok(ConstraintFit { kappa, tau: riem.t - 1.0 / d1w, xi: x, d1w, iterations })
    };
    let mut x = guess;
    let mut last = f64::INFINITY;
    for it in 0..NEWTON_MAX_ITER {
        let mut grad = [0.0; 3];
        let mut hess = [[0.0; 3]; 3];
        for i in 0..d {
            grad[i] = point_derivative(&g, vals, x, add(e1, unit(i)))?;
            for j in 0..=i {
                let v = point_derivative(&g, vals, x, add(add(e1, unit(i)), unit(j)))?;
                hess[i][j] = v;
                hess[j][i] = v;
            }
        }
        if !is_positive_definite(&hess, d) {
            return Err(ShockError::Modulation(format!(
                "Hessian not positive definite at {x:?}"
            )));
        }
        let step = solve_small(&hess, &grad, d)?;
        last = 0.0;
        for a in 0..d {
            let st = step[a].clamp(-2.0 * g.h[a], 2.0 * g.h[a]);
            x[a] -= st;
            last = last.max(st.abs() / g.h[a]);
        }
        if last <= NEWTON_TOL {
            return finish(x, it + 1);
        }
    }
    // The interpolated Hessian jumps across cell faces, so the iteration may
    // cycle at a tiny amplitude; such a point is accepted.
    if last <= NEWTON_CYCLE_TOL {
        return finish(x, NEWTON_MAX_ITER);
    }
    Err(ShockError::Modulation(format!(
        "Newton did not converge in {NEWTON_MAX_ITER} iterations (last step {last:.3e} cells)"
    )))
}

/// Self-similar quantities at `y = 0` entering the modulation ODEs.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct LocalSample {
    pub s: f64,
    pub kappa: f64,
    /// `F⁰_W`, `∂₁F⁰_W` and `∂₁∇F⁰_W`.
    pub f0: f64,
    pub d1f0: f64,
    pub d1_grad_f: [f64; 3],
    /// `Z⁰`, `∂₁Z⁰`, `∂₁∇Z⁰`.
    pub z0: f64,
    pub d1z0: f64,
    pub d1_grad_z: [f64; 3],
    /// `U⁰_ν` (index 0 unused).
    pub u0: [f64; 3],
    /// `∇²∂₁W(0)`.
    pub hessian: [[f64; 3]; 3],
    pub dim: usize,
}

/// Rates from the modulation ODEs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeRates {
    pub kappadot: f64,
    pub taudot: f64,
    pub xidot: [f64; 3],
    /// `G⁰_W` and `h^{ν,0}` (index 0 holds `G⁰_W`).
    pub g_h: [f64; 3],
}

/// Solve the modulation relations for `κ̇`, `τ̇`, `ξ̇` with lagged `β_τ`:
///
/// ```text
/// ∇²∂₁W(0) · (G⁰, h²⁰, h³⁰) = ∂₁∇F⁰ + β_τ e^{s/2} β₂ ∂₁∇Z⁰
/// κ̇ = e^{s/2} (F⁰ + G⁰) / β_τ
/// τ̇ = (∂₁F⁰ + β_τ e^{s/2} β₂ ∂₁Z⁰) / β_τ
/// 2β₁ ξ̇₁ = κ + β₂ Z⁰ - e^{-s/2} G⁰ / β_τ
/// 2β₁ ξ̇_ν = 2β₁ U⁰_ν - e^{s/2} h^{ν,0} / β_τ
/// ```
pub fn modulation_rates_from_odes(
    local: &LocalSample,
    beta_tau: f64,
    betas: &BetaConstants,
) -> Result<OdeRates> {
    if !(beta_tau > 0.0) {
        return Err(ShockError::Modulation(format!("beta_tau = {beta_tau} not positive")));
    }
    let es2 = (0.5 * local.s).exp();
    let d = local.dim;
    let mut rhs = [0.0; 3];
    for i in 0..d {
        rhs[i] = local.d1_grad_f[i] + beta_tau * es2 * betas.beta2 * local.d1_grad_z[i];
    }
    let g_h = if rhs[..d].iter().all(|v| *v == 0.0) {
        [0.0; 3]
    } else {
        solve_small(&local.hessian, &rhs, d)?
    };
    let g0 = g_h[0];
    let kappadot = es2 * (local.f0 + g0) / beta_tau;
    let taudot = (local.d1f0 + beta_tau * es2 * betas.beta2 * local.d1z0) / beta_tau;
    let mut xidot = [0.0; 3];
    xidot[0] = (local.kappa + betas.beta2 * local.z0 - g0 / (es2 * beta_tau)) / (2.0 * betas.beta1);
    for nu in 1..d {
        xidot[nu] = local.u0[nu] - es2 * g_h[nu] / (2.0 * betas.beta1 * beta_tau);
    }
    Ok(OdeRates { kappadot, taudot, xidot, g_h })
}

/// Sample the local quantities of the ODE route at the point `xi` with
/// modulation values `kappa`, `tau`.  `grad_phi` is the potential gradient
/// (absent without a potential).
pub fn sample_local(
    state: &PhysicalState,
    grad_phi: Option<&[Field; 3]>,
    xi: [f64; 3],
    kappa: f64,
    tau: f64,
    beta_tau: f64,
    betas: &BetaConstants,
) -> Result<LocalSample> {
    let g = state.grid();
    let d = g.dim;
    let s = Modulation { t: state.t, tau, ..Modulation::initial(state.t, kappa) }.s()?;
    let sc = axis_scales(s);
    let es2 = (0.5 * s).exp();
    let e1 = unit(0);
    // f = 2β₃ σ ∇̌·ǔ + 2β₁ ∂₁φ in physical variables; F_W = -β_τ e^{-s/2} f.
    let mut f = vec![0.0; g.len()];
    for nu in 1..d {
        let du = derivative(&state.u[nu], nu, 1)?;
        for (i, v) in f.iter_mut().enumerate() {
            *v += 2.0 * betas.beta3 * state.sigma.values[i] * du.values[i];
        }
    }
    if let Some(gp) = grad_phi {
        for (i, v) in f.iter_mut().enumerate() {
            *v += 2.0 * betas.beta1 * gp[0].values[i];
        }
    }
    let ff = -beta_tau / es2;
    let w = state.w();
    let z = state.z();
    let mut out = LocalSample { s, kappa, dim: d, ..Default::default() };
    out.f0 = ff * crate::grid::interpolate_values(&g, &f, xi)
        .ok_or_else(|| ShockError::OutOfRange(format!("{xi:?}")))?;
    out.d1f0 = ff * sc[0] * point_derivative(&g, &f, xi, e1)?;
    out.z0 = interpolate(&z, xi)?;
    out.d1z0 = sc[0] * point_derivative(&g, &z.values, xi, e1)?;
    for nu in 1..d {
        out.u0[nu] = interpolate(&state.u[nu], xi)?;
    }
    for i in 0..d {
        let gi = add(e1, unit(i));
        out.d1_grad_f[i] = ff * sc[0] * sc[i] * point_derivative(&g, &f, xi, gi)?;
        out.d1_grad_z[i] = sc[0] * sc[i] * point_derivative(&g, &z.values, xi, gi)?;
        for j in 0..=i {
            let v = es2
                * sc[0]
                * sc[i]
                * sc[j]
                * point_derivative(&g, &w.values, xi, add(gi, unit(j)))?;
            out.hessian[i][j] = v;
            out.hessian[j][i] = v;
        }
    }
    Ok(out)
}

/// Integrator of the ODE route: trapezoidal accumulation of sampled rates.
#[derive(Clone, Debug)]
pub struct OdeTracker {
    pub current: Modulation,
}

impl OdeTracker {
    /// Start from a modulation record (rates are filled at the first sample).
    pub fn new(start: Modulation) -> OdeTracker {
        OdeTracker { current: start }
    }

    /// Fill the rates of the current record from the state at the same time.
    pub fn sample_rates(
        &mut self,
        state: &PhysicalState,
        grad_phi: Option<&[Field; 3]>,
        betas: &BetaConstants,
    ) -> Result<()> {
        let c = &mut self.current;
        let local = sample_local(state, grad_phi, c.xi, c.kappa, c.tau, c.beta_tau, betas)?;
        let r = modulation_rates_from_odes(&local, c.beta_tau, betas)?;
        c.kappadot = r.kappadot;
        c.xidot = r.xidot;
        c.set_taudot(r.taudot)
    }

    /// Advance to the state's time: predict with the old rates, sample the
    /// rates at the predicted values and correct with the trapezoid rule.
    pub fn advance(
        &mut self,
        state: &PhysicalState,
        grad_phi: Option<&[Field; 3]>,
        betas: &BetaConstants,
    ) -> Result<Modulation> {
        let old = self.current;
        let dt = state.t - old.t;
        if !(dt > 0.0) {
            return Err(ShockError::Modulation("ODE route: time not increasing".into()));
        }
        let v = 2.0 * betas.beta1;
        let mut next = old;
        next.t = state.t;
        next.kappa = old.kappa + dt * old.kappadot;
        next.tau = old.tau + dt * old.taudot;
        for a in 0..3 {
            next.xi[a] = old.xi[a] + dt * v * old.xidot[a];
        }
        self.current = next;
        self.sample_rates(state, grad_phi, betas)?;
        let pred = self.current;
        let mut corr = pred;
        corr.kappa = old.kappa + 0.5 * dt * (old.kappadot + pred.kappadot);
        corr.tau = old.tau + 0.5 * dt * (old.taudot + pred.taudot);
        for a in 0..3 {
            corr.xi[a] = old.xi[a] + 0.5 * dt * v * (old.xidot[a] + pred.xidot[a]);
        }
        self.current = corr;
        Ok(corr)
    }
}

/// Largest componentwise relative deviation `|A-B| / (|A|+|B|+ε_mach)` of
/// `κ`, `τ`, `ξ` between two aligned modulation series.
pub fn cross_check_modulation(a: &[Modulation], b: &[Modulation]) -> Result<CrossCheck> {
    if a.len() != b.len() {
        return Err(ShockError::ShapeMismatch(format!(
            "series lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let rel = |x: f64, y: f64| (x - y).abs() / (x.abs() + y.abs() + f64::EPSILON);
    let mut out = CrossCheck::default();
    for (ma, mb) in a.iter().zip(b) {
        if (ma.t - mb.t).abs() > 1e-12 * ma.t.abs().max(1e-300) {
            return Err(ShockError::ShapeMismatch("time grids not aligned".into()));
        }
        out.kappa = out.kappa.max(rel(ma.kappa, mb.kappa));
        out.tau = out.tau.max(rel(ma.tau, mb.tau));
        for k in 0..3 {
            out.xi[k] = out.xi[k].max(rel(ma.xi[k], mb.xi[k]));
        }
    }
    Ok(out)
}

/// Componentwise maxima of [`cross_check_modulation`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CrossCheck {
    pub kappa: f64,
    pub tau: f64,
    pub xi: [f64; 3],
}

impl CrossCheck {
    /// Largest component.
    pub fn max(&self) -> f64 {
        self.kappa.max(self.tau).max(self.xi.iter().cloned().fold(0.0, f64::max))
    }
}

/// Header of the modulation CSV.
pub const MODULATION_HEADER: [&str; 16] = [
    "t", "s", "kappa", "tau", "xi1", "xi2", "xi3", "kappadot", "taudot", "xidot1", "xidot2",
    "xidot3", "beta_tau", "tau_minus_t", "step", "route",
];

/// Append a record to a modulation CSV.
pub fn push_modulation(csv: &mut CsvSeries, m: &Modulation, step: usize, route: &str) {
    let s = m.s().unwrap_or(f64::NAN);
    let mut cells: Vec<String> = [
        m.t, s, m.kappa, m.tau, m.xi[0], m.xi[1], m.xi[2], m.kappadot, m.taudot, m.xidot[0],
        m.xidot[1], m.xidot[2], m.beta_tau, m.tau - m.t,
    ]
    .iter()
    .map(|v| format!("{v:e}"))
    .collect();
    cells.push(step.to_string());
    cells.push(route.to_string());
    csv.push_cells(cells);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::beta_constants;
    use crate::grid::Grid;

    fn state_1d(g: Grid, w: impl Fn(f64) -> f64) -> PhysicalState {
        let wf = Field::from_fn(g, "w", |p| w(p[0]));
        let half = wf.map("u1", |v| 0.5 * v);
        PhysicalState {
            t: -0.05,
            alpha: 1.0,
            u: [half.clone(), Field::zeros(g, "u2"), Field::zeros(g, "u3")],
            sigma: half.renamed("sigma"),
            nplus: Field::zeros(g, "nplus"),
        }
    }

    #[test]
    fn riemann_round_trip() {
        let g = Grid::new(1, [64, 1, 1], [1.0, 0.0, 0.0]).unwrap();
        let mut st = state_1d(g, |x| 3.0 + x.sin());
        st.u[0] = Field::from_fn(g, "u1", |p| p[0].cos());
        let r = to_riemann(&st, &Modulation::initial(st.t, 6.0));
        let u1 = r.u1();
        let sd = r.sound_speed();
        for i in 0..g.len() {
            assert!((u1.values[i] - st.u[0].values[i]).abs() < 1e-15);
            assert!((sd.values[i] - st.sigma.values[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn newton_finds_shifted_critical_point() {
        // w = 6 - tanh((x - a)/ε) / 1 has its steepest point at a.
        let g = Grid::new(1, [801, 1, 1], [1.0, 0.0, 0.0]).unwrap();
        let a = 0.0123;
        let st = state_1d(g, |x| 6.0 - 0.1 * ((x - a) / 0.1).tanh());
        let r = to_riemann(&st, &Modulation::initial(st.t, 6.0));
        let fit = modulation_from_constraints(&r, [0.0; 3]).unwrap();
        assert!((fit.xi[0] - a).abs() < 1e-9, "{:?}", fit);
        assert!((fit.kappa - 6.0).abs() < 1e-9);
        assert!((fit.d1w + 1.0).abs() < 1e-6);
        assert!((fit.tau - (st.t + 1.0 / 1.0)).abs() < 1e-5);
    }

    #[test]
    fn plateau_is_rejected() {
        let g = Grid::new(1, [101, 1, 1], [1.0, 0.0, 0.0]).unwrap();
        let st = state_1d(g, |x| 6.0 - x);
        let r = to_riemann(&st, &Modulation::initial(st.t, 6.0));
        let e = modulation_from_constraints(&r, [0.0; 3]).unwrap_err();
        assert!(e.to_string().contains("Hessian not positive definite"));
    }

    #[test]
    fn ode_relations() {
        let b = beta_constants(3.0).unwrap();
        let mut l = LocalSample { s: 2.0, kappa: 6.0, dim: 1, ..Default::default() };
        l.hessian[0][0] = 6.0;
        let r = modulation_rates_from_odes(&l, 1.0, &b).unwrap();
        assert_eq!(r.kappadot, 0.0);
        assert_eq!(r.taudot, 0.0);
        assert!((r.xidot[0] - 6.0 / (2.0 * b.beta1)).abs() < 1e-14);
        assert!(modulation_rates_from_odes(&l, 0.0, &b).is_err());
        let mut m = Modulation::initial(0.0, 6.0);
        m.set_taudot(0.25).unwrap();
        assert!((m.beta_tau - 1.0 - m.taudot * m.beta_tau).abs() <= 4.0 * f64::EPSILON);
    }

    #[test]
    fn chain_rule_at_origin() {
        let g = Grid::new(1, [2001, 1, 1], [0.5, 0.0, 0.0]).unwrap();
        let st = state_1d(g, |x| 6.0 - 0.05 * (x / 0.05).tanh() + 0.3 * x * x);
        let m = Modulation { tau: 0.05, ..Modulation::initial(-0.05, 6.0) };
        let r = to_riemann(&st, &m);
        let yg = Grid::new(1, [201, 1, 1], [2.0, 0.0, 0.0]).unwrap();
        let ss = to_selfsimilar(&r, &m, yg, 0.05).unwrap();
        assert!((ss.s + (0.1f64).ln()).abs() < 1e-14);
        let d1w = point_derivative(&g, &r.w.values, [0.0; 3], [1, 0, 0]).unwrap();
        let d1big = point_derivative(&yg, &ss.w.values, [0.0; 3], [1, 0, 0]).unwrap();
        assert!((d1w - ss.s.exp() * d1big).abs() < 1e-3 * d1w.abs(), "{d1w} {d1big}");
    }

    #[test]
    fn identical_series_agree() {
        let m = vec![Modulation::initial(0.0, 6.0), Modulation { t: 0.1, tau: 0.2, ..Modulation::initial(0.1, 6.1) }];
        assert_eq!(cross_check_modulation(&m, &m).unwrap().max(), 0.0);
    }
}
