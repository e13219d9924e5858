//! Method-of-lines integration of the electron Euler-Poisson system in
//! sound-speed form, in the rescaled time `t = (1+α)/2 · t_phys`:
//!
//! ```text
//! ∂_t u = -c [ (u·∇)u + α σ ∇σ + ∇φ ]
//! ∂_t σ = -c [ ∇·(σ u) + (α-1) σ ∇·u ]        c = 2/(1+α)
//! Δφ = 4π (n₊ - n_e),   n_e = (α σ)^{1/α}
//! ```
//!
//! Spatial derivatives are 4th-order central differences, time stepping is
//! classical RK4 and the potential is refreshed at every stage.

use crate::error::{Result, ShockError};
use crate::grid::{derivative_into, Field, Grid};
use crate::poisson::{solve_potential_1d, ChargeDensity, IonBackground, PoissonSolver};

/// Sound speed below which a node counts as vacuum.
pub const VACUUM_FLOOR: f64 = 1e-9;

/// Largest admissible CFL number.
pub const MAX_CFL: f64 = 0.5;

/// Electron density `(α σ)^{1/α}` of a sound speed (zero for `σ ≤ 0`).
pub fn density_from_sigma(alpha: f64, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        0.0
    } else if alpha == 1.0 {
        sigma
    } else {
        (alpha * sigma).powf(1.0 / alpha)
    }
}

/// Sound speed `n^α / α` of a density.
pub fn sigma_from_density(alpha: f64, n: f64) -> f64 {
    if n <= 0.0 {
        0.0
    } else {
        n.powf(alpha) / alpha
    }
}

/// Fluid state in physical coordinates at rescaled time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalState {
    pub t: f64,
    pub alpha: f64,
    pub u: [Field; 3],
    pub sigma: Field,
    /// Static ion density sampled on the grid.
    pub nplus: Field,
}

impl PhysicalState {
    /// Grid of the state.
    pub fn grid(&self) -> Grid {
        self.sigma.grid
    }

    /// Physical time `2t/(1+α)`.
    pub fn physical_time(&self) -> f64 {
        2.0 * self.t / (1.0 + self.alpha)
    }

    /// Electron density.
    pub fn density(&self) -> Field {
        let a = self.alpha;
        self.sigma.map("ne", |s| density_from_sigma(a, s))
    }

    /// Total electron number.
    pub fn electron_mass(&self) -> f64 {
        self.density().integral()
    }

    /// Riemann variable `w = u₁ + σ`.
    pub fn w(&self) -> Field {
        let values = self.u[0].values.iter().zip(&self.sigma.values).map(|(u, s)| u + s).collect();
        Field::from_values(self.grid(), "w", values).expect("same grid")
    }

    /// Riemann variable `z = u₁ - σ`.
    pub fn z(&self) -> Field {
        let values = self.u[0].values.iter().zip(&self.sigma.values).map(|(u, s)| u - s).collect();
        Field::from_values(self.grid(), "z", values).expect("same grid")
    }

    /// Check finiteness, `σ ≥ 0` and `u = 0` in vacuum.
    pub fn check(&self) -> Result<()> {
        for f in self.u.iter().chain([&self.sigma, &self.nplus]) {
            if f.grid != self.grid() {
                return Err(ShockError::ShapeMismatch(format!("{} on a different grid", f.name)));
            }
            if let Some(i) = f.first_non_finite() {
                return Err(ShockError::NonFinite(format!("{} at index {i}", f.name)));
            }
        }
        for (i, s) in self.sigma.values.iter().enumerate() {
            if *s < 0.0 {
                return Err(ShockError::NonPhysical(format!("negative sound speed at index {i}")));
            }
            if *s < VACUUM_FLOOR && self.u.iter().any(|f| f.values[i] != 0.0) {
                return Err(ShockError::NonPhysical(format!("velocity in vacuum at index {i}")));
            }
        }
        Ok(())
    }

    /// Fields in snapshot order: `u1, u2, u3, sigma, nplus`.
    pub fn snapshot_fields(&self) -> Vec<&Field> {
        vec![&self.u[0], &self.u[1], &self.u[2], &self.sigma, &self.nplus]
    }

    /// Rebuild a state from snapshot fields.
    pub fn from_snapshot(snap: &crate::grid::Snapshot, alpha: f64) -> Result<PhysicalState> {
        if snap.fields.len() != 5 {
            return Err(ShockError::Malformed(format!(
                "expected 5 fields, found {}",
                snap.fields.len()
            )));
        }
        let g = snap.grid;
        let f = |i: usize, name: &str| Field::from_values(g, name, snap.fields[i].clone());
        Ok(PhysicalState {
            t: snap.time,
            alpha,
            u: [f(0, "u1")?, f(1, "u2")?, f(2, "u3")?],
            sigma: f(3, "sigma")?,
            nplus: f(4, "nplus")?,
        })
    }

    /// Specific vorticity magnitude `|∇×u| / n_e` (zero where `n_e = 0`).
    pub fn specific_vorticity(&self) -> Result<Field> {
        let g = self.grid();
        let n = g.len();
        let mut d = vec![vec![vec![0.0; n]; 3]; 3];
        for comp in 0..3 {
            for a in 0..g.dim {
                if comp != a {
                    derivative_into(&g, &self.u[comp].values, a + 1, 1, &mut d[comp][a])?;
                }
            }
        }
        let ne = self.density();
        let values = (0..n)
            .map(|i| {
                if ne.values[i] <= 0.0 {
                    return 0.0;
                }
                let w1 = d[2][1][i] - d[1][2][i];
                let w2 = d[0][2][i] - d[2][0][i];
                let w3 = d[1][0][i] - d[0][1][i];
                (w1 * w1 + w2 * w2 + w3 * w3).sqrt() / ne.values[i]
            })
            .collect();
        Field::from_values(g, "specific vorticity", values)
    }

    /// Set `σ` below the vacuum floor to zero and the velocity in vacuum to zero.
    pub fn clamp_vacuum(&mut self) {
        for i in 0..self.sigma.values.len() {
            if self.sigma.values[i] < VACUUM_FLOOR {
                self.sigma.values[i] = 0.0;
                for f in self.u.iter_mut() {
                    f.values[i] = 0.0;
                }
            }
        }
    }
}

/// Per-step statistics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepStats {
    /// Time after the step.
    pub t: f64,
    pub dt: f64,
    /// `max c Σ_a (|u_a| + ασ)` before the step.
    pub max_speed: f64,
    /// Minimum of `∂₁w` after the step.
    pub min_d1w: f64,
    pub argmin: [f64; 3],
    pub max_u: f64,
    pub max_sigma: f64,
    pub cfl: f64,
}

/// Why an integration stopped.
#[derive(Clone, Debug, PartialEq)]
pub enum StopReason {
    Time,
    Slope,
    ResolutionLimit(String),
    DtFloor,
    MaxSteps,
    /// Requested by the step observer.
    Observer(String),
}

impl StopReason {
    /// Short label used in reports.
    pub fn label(&self) -> String {
        match self {
            StopReason::Time => "time".into(),
            StopReason::Slope => "slope".into(),
            StopReason::ResolutionLimit(m) => format!("resolution limit ({m})"),
            StopReason::DtFloor => "resolution limit (time step floor)".into(),
            StopReason::MaxSteps => "max steps".into(),
            StopReason::Observer(m) => m.clone(),
        }
    }
}

/// Stop criteria of [`Solver::run_until`].
#[derive(Clone, Debug, PartialEq)]
pub struct StopRule {
    pub time: Option<f64>,
    /// Stop once `min ∂₁w ≤ slope`.
    pub slope: Option<f64>,
    /// Stop once the steepest front (jump `jump_scale`) spans fewer than
    /// `cells` grid cells, i.e. `h₁ |min ∂₁w| > jump_scale / cells`.
    pub cells: f64,
    pub jump_scale: f64,
    /// Stop once the stable time step falls below this value.
    pub dt_floor: f64,
    pub max_steps: usize,
    pub cfl: f64,
}

impl StopRule {
    /// Time step of the next step, or the reason to stop before taking it.
    pub fn next_dt(&self, t: f64, steps: usize, stable_dt: f64) -> std::result::Result<f64, StopReason> {
        if steps >= self.max_steps {
            return Err(StopReason::MaxSteps);
        }
        let mut dt = stable_dt;
        if let Some(tend) = self.time {
            if t >= tend - 1e-14 * tend.abs().max(1.0) {
                return Err(StopReason::Time);
            }
            dt = dt.min(tend - t);
        }
        if dt < self.dt_floor {
            return Err(StopReason::DtFloor);
        }
        Ok(dt)
    }

    /// Criteria evaluated on the statistics of an accepted step.
    pub fn after_step(&self, st: &StepStats, h1: f64) -> Option<StopReason> {
        if let Some(sl) = self.slope {
            if st.min_d1w <= sl {
                return Some(StopReason::Slope);
            }
        }
        if self.cells > 0.0 && h1 * st.min_d1w.abs() > self.jump_scale / self.cells {
            return Some(StopReason::ResolutionLimit(format!(
                "steepest front spans fewer than {} cells",
                self.cells
            )));
        }
        None
    }
}

/// Result of an integration.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub state: PhysicalState,
    pub stats: Vec<StepStats>,
    pub reason: StopReason,
}

/// Time-derivative fields.
#[derive(Clone, Debug)]
pub struct Rhs {
    pub du: [Vec<f64>; 3],
    pub dsigma: Vec<f64>,
    pub grad_phi: [Vec<f64>; 3],
}

/// Integrator for one grid.
pub struct Solver {
    grid: Grid,
    alpha: f64,
    potential: bool,
    ions: Option<IonBackground>,
    ion_grad: Option<[Vec<f64>; 3]>,
    poisson: Option<PoissonSolver>,
}

impl Solver {
    /// Solver for states on `grid`.  With `potential` off the force vanishes.
    /// In three dimensions an ion ball, when given, enters through its
    /// closed-form field; in one dimension the sampled `nplus` field is used.
    pub fn new(grid: Grid, alpha: f64, potential: bool, ions: Option<IonBackground>) -> Result<Solver> {
        if !(alpha > 0.0) {
            return Err(ShockError::Config(format!("alpha {alpha} must be positive")));
        }
        if potential && grid.dim == 2 {
            return Err(ShockError::InvalidGrid("no planar-2D potential solver".into()));
        }
        let (poisson, ion_grad) = if potential && grid.dim == 3 {
            let ion_grad = ions.map(|ion| {
                let mut g = [vec![0.0; grid.len()], vec![0.0; grid.len()], vec![0.0; grid.len()]];
                for idx in 0..grid.len() {
                    let (_, d) = ion.potential_3d(grid.point(idx));
                    for a in 0..3 {
                        g[a][idx] = d[a];
                    }
                }
                g
            });
            (Some(PoissonSolver::new(grid)?), ion_grad)
        } else {
            (None, None)
        };
        Ok(Solver {
            grid,
            alpha,
            potential,
            ions,
            ion_grad,
            poisson,
        })
    }

    /// Grid of the solver.
    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Whether the self-consistent force is on.
    pub fn has_potential(&self) -> bool {
        self.potential
    }

    /// Ion background used for the force in three dimensions.
    pub fn ions(&self) -> Option<IonBackground> {
        self.ions
    }

    /// `∇φ` for the given sound speed and ion density arrays.
    pub fn potential_gradient(&mut self, sigma: &[f64], nplus: &[f64]) -> Result<[Vec<f64>; 3]> {
        let g = self.grid;
        let n = g.len();
        if !self.potential {
            return Ok([vec![0.0; n], vec![0.0; n], vec![0.0; n]]);
        }
        let a = self.alpha;
        if g.dim == 1 {
            let rho: Vec<f64> =
                sigma.iter().zip(nplus).map(|(s, p)| p - density_from_sigma(a, *s)).collect();
            let pot = solve_potential_1d(&ChargeDensity::new(Field::from_values(g, "rho", rho)?))?;
            let [g1, _, _] = pot.grad;
            return Ok([g1.values, vec![0.0; n], vec![0.0; n]]);
        }
        let solver = self.poisson.as_mut().expect("3D solver present");
        let rho: Vec<f64> = match &self.ion_grad {
            Some(_) => sigma.iter().map(|s| -density_from_sigma(a, *s)).collect(),
            None => sigma.iter().zip(nplus).map(|(s, p)| p - density_from_sigma(a, *s)).collect(),
        };
        let [_, mut g1, mut g2, mut g3] = solver.solve_values(&rho)?;
        if let Some(ig) = &self.ion_grad {
            for i in 0..n {
                g1[i] += ig[0][i];
                g2[i] += ig[1][i];
                g3[i] += ig[2][i];
            }
        }
        Ok([g1, g2, g3])
    }

    /// Potential gradient fields of a state.
    pub fn potential_fields(&mut self, state: &PhysicalState) -> Result<[Field; 3]> {
        let [a, b, c] = self.potential_gradient(&state.sigma.values, &state.nplus.values)?;
        let g = self.grid;
        Ok([
            Field::from_values(g, "d1 phi", a)?,
            Field::from_values(g, "d2 phi", b)?,
            Field::from_values(g, "d3 phi", c)?,
        ])
    }

    fn rhs_values(&mut self, u: &[Vec<f64>; 3], sigma: &[f64], nplus: &[f64]) -> Result<Rhs> {
        let g = self.grid;
        let n = g.len();
        let alpha = self.alpha;
        let c = 2.0 / (1.0 + alpha);
        let grad_phi = self.potential_gradient(sigma, nplus)?;
        let mut du = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let mut dsigma = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut flux = vec![0.0; n];
        let mut div = vec![0.0; n];
        for a in 0..g.dim {
            // Transport of every velocity component along axis a.
            for (comp, out) in du.iter_mut().enumerate() {
                derivative_into(&g, &u[comp], a + 1, 1, &mut d)?;
                for i in 0..n {
                    out[i] += u[a][i] * d[i];
                }
                if comp == a {
                    for i in 0..n {
                        div[i] += d[i];
                    }
                }
            }
            derivative_into(&g, sigma, a + 1, 1, &mut d)?;
            for i in 0..n {
                du[a][i] += alpha * sigma[i] * d[i] + grad_phi[a][i];
            }
            for i in 0..n {
                flux[i] = sigma[i] * u[a][i];
            }
            derivative_into(&g, &flux, a + 1, 1, &mut d)?;
            for i in 0..n {
                dsigma[i] += d[i];
            }
        }
        for i in 0..n {
            dsigma[i] = -c * (dsigma[i] + (alpha - 1.0) * sigma[i] * div[i]);
            for out in du.iter_mut() {
                out[i] *= -c;
            }
        }
        for comp in g.dim..3 {
            du[comp].iter_mut().for_each(|v| *v = 0.0);
        }
        for v in du.iter().chain([&dsigma]) {
            if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                return Err(ShockError::NonFinite(format!("right-hand side at index {i}")));
            }
        }
        Ok(Rhs { du, dsigma, grad_phi })
    }

    /// Time derivative of a state.
    pub fn rhs(&mut self, state: &PhysicalState) -> Result<Rhs> {
        self.check_grid(state)?;
        let u = [state.u[0].values.clone(), state.u[1].values.clone(), state.u[2].values.clone()];
        self.rhs_values(&u, &state.sigma.values, &state.nplus.values)
    }

    fn check_grid(&self, state: &PhysicalState) -> Result<()> {
        if state.grid() != self.grid || state.alpha != self.alpha {
            return Err(ShockError::ShapeMismatch("state does not match the solver".into()));
        }
        Ok(())
    }

    /// `max c Σ_a (|u_a| + ασ)/h_a`, the inverse of the stable step at CFL 1.
    pub fn speed_over_h(&self, state: &PhysicalState) -> f64 {
        let g = self.grid;
        let c = 2.0 / (1.0 + self.alpha);
        let mut m = 0.0f64;
        for i in 0..g.len() {
            let cs = self.alpha * state.sigma.values[i].max(0.0);
            let mut s = 0.0;
            for a in 0..g.dim {
                s += (state.u[a].values[i].abs() + cs) / g.h[a];
            }
            m = m.max(c * s);
        }
        m
    }

    /// Largest step allowed at the given CFL number.
    pub fn stable_dt(&self, state: &PhysicalState, cfl: f64) -> f64 {
        let s = self.speed_over_h(state);
        if s > 0.0 {
            cfl / s
        } else {
            f64::INFINITY
        }
    }

    /// One RK4 step.
    pub fn step(&mut self, state: &PhysicalState, dt: f64) -> Result<(PhysicalState, StepStats)> {
        self.check_grid(state)?;
        let soh = self.speed_over_h(state);
        let cfl = dt * soh;
        if !(dt > 0.0) || cfl > MAX_CFL * (1.0 + 1e-12) {
            return Err(ShockError::Cfl(format!("dt {dt:e} gives CFL number {cfl:.4} > {MAX_CFL}")));
        }
        let n = self.grid.len();
        let u0 = [state.u[0].values.clone(), state.u[1].values.clone(), state.u[2].values.clone()];
        let s0 = state.sigma.values.clone();
        let np = &state.nplus.values;
        let k1 = self.rhs_values(&u0, &s0, np)?;
        let stage = |k: &Rhs, f: f64| -> ([Vec<f64>; 3], Vec<f64>) {
            let mut u = u0.clone();
            let mut s = s0.clone();
            for i in 0..n {
                for a in 0..3 {
                    u[a][i] += f * dt * k.du[a][i];
                }
                s[i] += f * dt * k.dsigma[i];
                if s[i] < VACUUM_FLOOR {
                    s[i] = 0.0;
                    for c in u.iter_mut() {
                        c[i] = 0.0;
                    }
                }
            }
            (u, s)
        };
        let (u1, s1) = stage(&k1, 0.5);
        let k2 = self.rhs_values(&u1, &s1, np)?;
        let (u2, s2) = stage(&k2, 0.5);
        let k3 = self.rhs_values(&u2, &s2, np)?;
        let (u3, s3) = stage(&k3, 1.0);
        let k4 = self.rhs_values(&u3, &s3, np)?;
        let mut next = state.clone();
        next.t = state.t + dt;
        for i in 0..n {
            for a in 0..3 {
                next.u[a].values[i] += dt / 6.0
                    * (k1.du[a][i] + 2.0 * k2.du[a][i] + 2.0 * k3.du[a][i] + k4.du[a][i]);
            }
            next.sigma.values[i] += dt / 6.0
                * (k1.dsigma[i] + 2.0 * k2.dsigma[i] + 2.0 * k3.dsigma[i] + k4.dsigma[i]);
        }
        next.clamp_vacuum();
        for f in next.u.iter().chain([&next.sigma]) {
            if let Some(i) = f.first_non_finite() {
                return Err(ShockError::NonFinite(format!("{} at index {i} after step", f.name)));
            }
        }
        let (min_d1w, argmin) = min_d1w(&next)?;
        let stats = StepStats {
            t: next.t,
            dt,
            max_speed: max_speed(&next),
            min_d1w,
            argmin,
            max_u: next.u.iter().map(|f| f.max_abs()).fold(0.0, f64::max),
            max_sigma: next.sigma.max_abs(),
            cfl,
        };
        Ok((next, stats))
    }

    /// Integrate until the first stop criterion holds.  The observer sees
    /// every accepted step and may request a stop by returning a reason.
    pub fn run_until(
        &mut self,
        state: PhysicalState,
        rule: &StopRule,
        mut observer: impl FnMut(&PhysicalState, &StepStats) -> Result<Option<String>>,
    ) -> Result<RunOutcome> {
        if !(rule.cfl > 0.0 && rule.cfl <= MAX_CFL) {
            return Err(ShockError::Cfl(format!("CFL number {} outside (0, {MAX_CFL}]", rule.cfl)));
        }
        if rule.time.is_none() && rule.slope.is_none() && rule.max_steps == 0 {
            return Err(ShockError::Config("no stop criterion".into()));
        }
        let mut cur = state;
        let mut stats = Vec::new();
        let h1 = self.grid.h[0];
        let reason = loop {
            let dt = match rule.next_dt(cur.t, stats.len(), self.stable_dt(&cur, rule.cfl)) {
                Ok(dt) => dt,
                Err(r) => break r,
            };
            let (next, st) = self.step(&cur, dt)?;
            cur = next;
            stats.push(st);
            if let Some(msg) = observer(&cur, &st)? {
                break StopReason::Observer(msg);
            }
            if let Some(r) = rule.after_step(&st, h1) {
                break r;
            }
        };
        Ok(RunOutcome { state: cur, stats, reason })
    }
}

/// `max c Σ_a (|u_a| + ασ)` over the grid.
pub fn max_speed(state: &PhysicalState) -> f64 {
    let g = state.grid();
    let c = 2.0 / (1.0 + state.alpha);
    let mut m = 0.0f64;
    for i in 0..g.len() {
        let cs = state.alpha * state.sigma.values[i].max(0.0);
        let s: f64 = (0..g.dim).map(|a| state.u[a].values[i].abs() + cs).sum();
        m = m.max(c * s);
    }
    m
}

/// Minimum of `∂₁w` over the grid and its location.
pub fn min_d1w(state: &PhysicalState) -> Result<(f64, [f64; 3])> {
    let g = state.grid();
    let w = state.w();
    let mut d = vec![0.0; g.len()];
    derivative_into(&g, &w.values, 1, 1, &mut d)?;
    let (mut best, mut at) = (f64::INFINITY, 0);
    for (i, v) in d.iter().enumerate() {
        if *v < best {
            best = *v;
            at = i;
        }
    }
    Ok((best, g.point(at)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state_1d(n: usize, ext: f64, alpha: f64, u1: impl Fn(f64) -> f64, s: impl Fn(f64) -> f64) -> PhysicalState {
        let g = Grid::new(1, [n, 1, 1], [ext, 0.0, 0.0]).unwrap();
        PhysicalState {
            t: 0.0,
            alpha,
            u: [
                Field::from_fn(g, "u1", |x| u1(x[0])),
                Field::zeros(g, "u2"),
                Field::zeros(g, "u3"),
            ],
            sigma: Field::from_fn(g, "sigma", |x| s(x[0])),
            nplus: Field::zeros(g, "nplus"),
        }
    }

    #[test]
    fn density_sigma_round_trip() {
        for alpha in [0.5, 1.0, 1.0 / 3.0] {
            for n in [0.1, 1.0, 3.7] {
                let s = sigma_from_density(alpha, n);
                assert!((density_from_sigma(alpha, s) - n).abs() < 1e-12 * n);
            }
        }
        assert_eq!(density_from_sigma(0.5, -1.0), 0.0);
    }

    #[test]
    fn equilibrium_is_stationary() {
        // u = 0, constant σ and n_e = n₊ pointwise: every term vanishes.
        let mut st = state_1d(256, 1.2, 1.0, |_| 0.0, |_| 1.7);
        st.nplus = st.sigma.renamed("nplus");
        let mut solver = Solver::new(st.grid(), 1.0, true, None).unwrap();
        let r = solver.rhs(&st).unwrap();
        for v in r.du.iter().chain([&r.dsigma]).chain(r.grad_phi.iter()) {
            assert!(v.iter().all(|x| x.abs() < 1e-10), "{:e}", v.iter().fold(0.0f64, |m, x| m.max(x.abs())));
        }
        let (next, _) = solver.step(&st, 1e-3).unwrap();
        for (a, b) in next.sigma.values.iter().zip(&st.sigma.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cfl_violation_is_rejected() {
        let st = state_1d(64, 1.0, 1.0, |_| 1.0, |_| 1.0);
        let mut s = Solver::new(st.grid(), 1.0, false, None).unwrap();
        let dt = s.stable_dt(&st, 0.5);
        assert!(s.step(&st, dt * 1.01).is_err());
        assert!(s.step(&st, dt).is_ok());
    }

    #[test]
    fn vacuum_clamp() {
        let mut st = state_1d(64, 1.0, 1.0, |_| 0.3, |x| x);
        st.clamp_vacuum();
        st.check().unwrap();
        let g = st.grid();
        for i in 0..g.len() {
            if g.coord(0, i) <= 0.0 {
                assert_eq!(st.u[0].values[i], 0.0);
                assert_eq!(st.sigma.values[i], 0.0);
            }
        }
    }
}
