//! Admissible initial data: generator and validator.
//!
//! At the initial time `t₀ = -ε` the Riemann variable `w = u₁ + σ` is
//!
//! ```text
//! w₀(x) = κ₀ χ_bulk(x) + ε^{1/2} χ_pert(x) [ W̄(y) + W̃(y) ],
//! y = (ε^{-3/2} x₁, ε^{-1/2} x̌),
//! ```
//!
//! with `z₀ = u₁ - σ = 0` and `u_ν = 0`.  The perturbation cutoff `χ_pert` is
//! identically one on `|x₁| ≤ 2Lε^{3/2}` (`|y₁| ≤ 2L`, `L = ε^{-1/10}`) and
//! `|x̌| ≤ 0.6 ε^{1/6}`; the bulk cutoff `χ_bulk` brings the fluid to vacuum
//! at the edge of the box `{|x₁| ≤ ε^{1/2}, |x̌| ≤ ε^{1/6}}`.  Without the
//! vacuum envelope `χ_bulk ≡ 1` and only `w₀ - κ₀` is compactly supported.
//!
//! `W̃ = A (y₁⁴ + c y₁²|y̌|²) exp(-4|y|²/r²)` is a smooth bump vanishing to
//! fourth order at the origin, so the normalisation of `W̄` at `y = 0` is kept
//! exactly; `A` is fixed so that the largest of the three weighted norms of
//! `W̃` equals `amp · ε^{1/4}`, unless that would spend more than half of the
//! profile's margin in a second-derivative bound, in which case `A` is
//! lowered to that limit.  The mixing coefficient `c ∈ [-1, 1]` is drawn from
//! the seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{beta_constants, kappa0_min, IonKind, InitConfig};
use crate::error::{Result, ShockError};
use crate::grid::{Field, Grid};
use crate::ledger::{Combine, DerivativeRow, LedgerReport, RowStatus};
use crate::poisson::{IonBackground, PADDING_CELLS};
use crate::profile::{eta, eval_barw};
use crate::solver::{density_from_sigma, PhysicalState};

/// Flat fraction of the ramp derivative profile.
const RAMP_DELTA: f64 = 0.25;

fn smoothstep(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        u.powi(4) * (35.0 + u * (-84.0 + u * (70.0 - 20.0 * u)))
    }
}

fn smoothstep_integral(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u.powi(5) * (7.0 + u * (-14.0 + u * (10.0 - 2.5 * u)))
}

/// Decreasing `C⁴` ramp on `[0, 1]`: `R = 1` for `t ≤ 0`, `R = 0` for `t ≥ 1`.
pub fn ramp(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t >= 1.0 {
        return 0.0;
    }
    let d = RAMP_DELTA;
    let total = 1.0 - d;
    let integral = if t <= d {
        d * smoothstep_integral(t / d)
    } else if t <= 1.0 - d {
        0.5 * d + (t - d)
    } else {
        total - d * smoothstep_integral((1.0 - t) / d)
    };
    1.0 - integral / total
}

/// Derivative of [`ramp`].
pub fn ramp_derivative(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        return 0.0;
    }
    let d = RAMP_DELTA;
    -smoothstep(t / d) * smoothstep((1.0 - t) / d) / (1.0 - d)
}

/// Radial cutoff: one for `|x| ≤ a`, zero for `|x| ≥ b`.
pub fn cut(x: f64, a: f64, b: f64) -> f64 {
    ramp((x.abs() - a) / (b - a))
}

/// Derivative of [`cut`] with respect to `x`.
pub fn cut_derivative(x: f64, a: f64, b: f64) -> f64 {
    x.signum() * ramp_derivative((x.abs() - a) / (b - a)) / (b - a)
}

/// Upper bounds of `η^{1/3}|∂₁∇W̄|` and `η^{1/6}|∇̌²W̄|` over all of space.
pub const PROFILE_SECOND_SUP: [f64; 2] = [0.92, 0.9429];

/// Geometry and amplitudes of the generated data.
#[derive(Clone, Debug, PartialEq)]
pub struct DataGeometry {
    pub epsilon: f64,
    pub kappa0: f64,
    pub dim: usize,
    pub vacuum: bool,
    /// `L = ε^{-1/10}`.
    pub big_l: f64,
    /// Perturbation cutoff plateau and end along `x₁`.
    pub p1: f64,
    pub p2: f64,
    /// Perturbation cutoff plateau and end across `x̌`.
    pub q1: f64,
    pub q2: f64,
    /// Support half-widths `ε^{1/2}` and `ε^{1/6}`.
    pub support: [f64; 2],
    /// Scale `r` of the bump `W̃` in `y` (Gaussian envelope of width `r/2`).
    pub bump_radius: f64,
    /// Amplitude `A` and mixing coefficient `c` of `W̃`.
    pub bump_amp: f64,
    pub bump_mix: f64,
}

impl DataGeometry {
    /// Geometry for a configuration (bump amplitude left at zero).
    pub fn new(cfg: &InitConfig) -> Result<DataGeometry> {
        let eps = cfg.epsilon;
        if !(eps > 0.0 && eps <= 0.2) {
            return Err(ShockError::InvalidInitialData(format!("epsilon {eps} outside (0, 0.2]")));
        }
        let big_l = eps.powf(-0.1);
        let s1 = eps.sqrt();
        let s2 = eps.powf(1.0 / 6.0);
        let p1 = 2.0 * big_l * eps.powf(1.5);
        let p2 = p1 + 0.15 * (s1 - p1);
        let (q1, q2) = if cfg.vacuum { (0.6 * s2, 0.75 * s2) } else { (0.6 * s2, s2) };
        if !(p1 < p2 && p2 < s1 + 1e-15 && q1 < q2) {
            return Err(ShockError::InvalidInitialData(format!(
                "cutoff plateau 2Lε^(3/2) = {p1} does not fit inside the support {s1}"
            )));
        }
        let bump_radius = if cfg.dim == 3 { big_l.min(0.9 * q1 / s1) } else { big_l };
        Ok(DataGeometry {
            epsilon: eps,
            kappa0: cfg.kappa0,
            dim: cfg.dim,
            vacuum: cfg.vacuum,
            big_l,
            p1,
            p2,
            q1,
            q2,
            support: [s1, s2],
            bump_radius,
            bump_amp: 0.0,
            bump_mix: 0.0,
        })
    }

    /// Self-similar coordinates of a physical point at `s = -log ε`.
    pub fn to_y(&self, x: [f64; 3]) -> [f64; 3] {
        let e = self.epsilon;
        [x[0] * e.powf(-1.5), x[1] / e.sqrt(), x[2] / e.sqrt()]
    }

    fn transverse(&self, x: [f64; 3]) -> f64 {
        if self.dim == 3 {
            (x[1] * x[1] + x[2] * x[2]).sqrt()
        } else {
            0.0
        }
    }

    /// Perturbation cutoff `χ_pert`.
    pub fn chi_pert(&self, x: [f64; 3]) -> f64 {
        let t = self.transverse(x);
        let c1 = cut(x[0], self.p1, self.p2);
        if self.dim == 3 {
            c1 * cut(t, self.q1, self.q2)
        } else {
            c1
        }
    }

    /// Bulk envelope `χ_bulk` (identically one without vacuum).
    pub fn chi_bulk(&self, x: [f64; 3]) -> f64 {
        if !self.vacuum {
            return 1.0;
        }
        let c1 = cut(x[0], self.p2, self.support[0]);
        if self.dim == 3 {
            c1 * cut(self.transverse(x), self.q2, self.support[1])
        } else {
            c1
        }
    }

    fn bump_shape(&self, y: [f64; 3]) -> (f64, f64, f64) {
        // Unit-amplitude bump, its y₁ derivative and its |y̌| derivative.
        let width = 0.5 * self.bump_radius;
        let yc2 = if self.dim == 3 { y[1] * y[1] + y[2] * y[2] } else { 0.0 };
        let y1 = y[0];
        let env = (-(y1 * y1 + yc2) / (width * width)).exp();
        let poly = y1.powi(4) + self.bump_mix * y1 * y1 * yc2;
        let dpoly1 = 4.0 * y1.powi(3) + 2.0 * self.bump_mix * y1 * yc2;
        let yc = yc2.sqrt();
        let dpolyc = 2.0 * self.bump_mix * y1 * y1 * yc;
        let k = -2.0 / (width * width);
        (poly * env, (dpoly1 + poly * k * y1) * env, (dpolyc + poly * k * yc) * env)
    }

    /// Perturbation `W̃(y)`.
    pub fn bump(&self, y: [f64; 3]) -> f64 {
        self.bump_amp * self.bump_shape(y).0
    }

    /// The three weighted norms of `W̃` (value, `∂₁`, `∇̌`), sampled in
    /// `(y₁, |y̌|)` over the ball of radius `2r` outside which the Gaussian
    /// envelope is below `e^{-16}`.
    pub fn bump_norms(&self) -> [f64; 3] {
        let r = 2.0 * self.bump_radius;
        let n1 = 801;
        let n2 = if self.dim == 3 { 401 } else { 1 };
        let mut out = [0.0f64; 3];
        for i in 0..n1 {
            let y1 = -r + 2.0 * r * i as f64 / (n1 - 1) as f64;
            for j in 0..n2 {
                let yc = if n2 > 1 { r * j as f64 / (n2 - 1) as f64 } else { 0.0 };
                let y = [y1, yc, 0.0];
                let (v, d1, dc) = self.bump_shape(y);
                let e = eta(y);
                out[0] = out[0].max(e.powf(-1.0 / 6.0) * (self.bump_amp * v).abs());
                out[1] = out[1].max(e.powf(1.0 / 3.0) * (self.bump_amp * d1).abs());
                out[2] = out[2].max((self.bump_amp * dc).abs());
            }
        }
        out
    }

    /// The two weighted second-derivative norms of `W̃`:
    /// `η^{1/3} max(|∂₁²W̃|, |∂₁∇̌W̃|)` and `η^{1/6} |∇̌²W̃|`, sampled like
    /// [`DataGeometry::bump_norms`] with central differences of the shape.
    pub fn bump_second_norms(&self) -> [f64; 2] {
        let r = 2.0 * self.bump_radius;
        let hh = 1e-3 * self.bump_radius;
        let n1 = 401;
        let n2 = if self.dim == 3 { 201 } else { 1 };
        let f = |y: [f64; 3]| self.bump_shape(y).0;
        let second = |y: [f64; 3], a: usize, b: usize| {
            let shift = |y: [f64; 3], da: f64, db: f64| {
                let mut p = y;
                p[a] += da;
                p[b] += db;
                f(p)
            };
            if a == b {
                (shift(y, hh, 0.0) - 2.0 * f(y) + shift(y, -hh, 0.0)) / (hh * hh)
            } else {
                (shift(y, hh, hh) - shift(y, hh, -hh) - shift(y, -hh, hh) + shift(y, -hh, -hh))
                    / (4.0 * hh * hh)
            }
        };
        let mut out = [0.0f64; 2];
        for i in 0..n1 {
            let y1 = -r + 2.0 * r * i as f64 / (n1 - 1) as f64;
            for j in 0..n2 {
                let yc = if n2 > 1 { r * j as f64 / (n2 - 1) as f64 } else { 0.0 };
                let y = [y1, yc, 0.0];
                let e = eta(y);
                let mut mixed = second(y, 0, 0).abs();
                if self.dim == 3 {
                    mixed = mixed.max(second(y, 0, 1).abs()).max(second(y, 0, 2).abs());
                    let (a, b, c) = (second(y, 1, 1), second(y, 1, 2), second(y, 2, 2));
                    let frob = (a * a + 2.0 * b * b + c * c).sqrt();
                    out[1] = out[1].max(e.powf(1.0 / 6.0) * self.bump_amp.abs() * frob);
                }
                out[0] = out[0].max(e.powf(1.0 / 3.0) * self.bump_amp.abs() * mixed);
            }
        }
        out
    }

    /// `w₀` at a physical point.
    pub fn w0(&self, x: [f64; 3]) -> f64 {
        let y = self.to_y(x);
        let chi = self.chi_pert(x);
        let bar = if chi > 0.0 { eval_barw(y, false).value } else { 0.0 };
        self.kappa0 * self.chi_bulk(x) + self.epsilon.sqrt() * chi * (bar + self.bump(y))
    }

    /// Whether `x` lies in the audited core, where both cutoffs are one.
    pub fn in_core(&self, x: [f64; 3]) -> bool {
        self.in_core_with_margin(x, [0.0, 0.0])
    }

    /// Whether `x` lies in the core shrunk by `margin` along `x₁` and across
    /// `x̌`, so that finite-difference stencils of that reach see only core data.
    pub fn in_core_with_margin(&self, x: [f64; 3], margin: [f64; 2]) -> bool {
        x[0].abs() <= self.p1 - margin[0] && (self.dim == 1 || self.transverse(x) <= self.q1 - margin[1])
    }

    /// Whether `x` lies in the closed support box.
    pub fn in_support(&self, x: [f64; 3]) -> bool {
        let tol = 1e-12;
        x[0].abs() <= self.support[0] * (1.0 + tol)
            && (self.dim == 1 || self.transverse(x) <= self.support[1] * (1.0 + tol))
    }
}

/// Generated data with its geometry and ion background.
#[derive(Clone, Debug)]
pub struct InitialData {
    pub state: PhysicalState,
    pub geometry: DataGeometry,
    /// Ion background (closed form in three dimensions).
    pub ions: Option<IonBackground>,
    /// `∂₁w₀(0)` measured by finite differences of the generator.
    pub slope_probe: f64,
    /// `|∇̌²w₀(0)|` in self-similar units.
    pub transverse_hessian_probe: f64,
}

fn fd1(f: &dyn Fn(f64) -> f64, h: f64) -> f64 {
    (-f(2.0 * h) + 8.0 * f(h) - 8.0 * f(-h) + f(-2.0 * h)) / (12.0 * h)
}

fn fd2(f: &dyn Fn(f64) -> f64, h: f64) -> f64 {
    (-f(2.0 * h) + 16.0 * f(h) - 30.0 * f(0.0) + 16.0 * f(-h) - f(-2.0 * h)) / (12.0 * h * h)
}

/// Build initial data for a configuration.
pub fn build_initial_data(cfg: &InitConfig) -> Result<InitialData> {
    let betas = beta_constants(cfg.gamma)?;
    let kmin = kappa0_min(&betas);
    if !(cfg.kappa0 >= kmin * (1.0 - 1e-12)) {
        return Err(ShockError::InvalidInitialData(format!(
            "kappa0 {} below the admissible minimum {kmin}",
            cfg.kappa0
        )));
    }
    if !(0.0..=0.5).contains(&cfg.perturbation_amp) {
        return Err(ShockError::InvalidInitialData(
            "perturbation amplitude must lie in [0, 1/2] of eps^(1/4)".into(),
        ));
    }
    let mut geo = DataGeometry::new(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    geo.bump_mix = if cfg.dim == 3 { rng.gen_range(-1.0..=1.0) } else { 0.0 };
    geo.bump_amp = 1.0;
    let unit = geo.bump_norms();
    let largest = unit.iter().cloned().fold(0.0, f64::max);
    let unit2 = geo.bump_second_norms();
    // W̄ + W̃ must keep the unit second-derivative bounds: W̃ may use at most
    // half of the margin left by the profile.
    let caps = [
        0.5 * (1.0 - PROFILE_SECOND_SUP[0]) / unit2[0],
        if cfg.dim == 3 { 0.5 * (1.0 - PROFILE_SECOND_SUP[1]) / unit2[1] } else { f64::INFINITY },
    ];
    geo.bump_amp = (cfg.perturbation_amp * cfg.epsilon.powf(0.25) / largest).min(caps[0]).min(caps[1]);

    let grid = Grid::new(cfg.dim, cfg.n, cfg.ext)?;
    let eps = cfg.epsilon;
    let cells = 2.0 * geo.support[0] / grid.h[0];
    if cells < 8.0 {
        return Err(ShockError::InvalidInitialData(format!(
            "only {cells:.1} cells across the x1 support; need at least 8"
        )));
    }
    let pad = (PADDING_CELLS + 1) as f64;
    if grid.ext[0] < geo.support[0] + pad * grid.h[0] {
        return Err(ShockError::InvalidInitialData("grid does not contain the x1 support".into()));
    }
    if cfg.dim == 3 {
        for a in 1..3 {
            if grid.ext[a] < geo.support[1] + pad * grid.h[a] {
                return Err(ShockError::InvalidInitialData(format!(
                    "grid does not contain the support along axis {}",
                    a + 1
                )));
            }
        }
    }

    // Normalisation probes on the generator itself.
    let slope_probe = fd1(&|s| geo.w0([s, 0.0, 0.0]), 1e-3 * eps.powf(1.5));
    if ((slope_probe * eps) + 1.0).abs() > 1e-6 {
        return Err(ShockError::InvalidInitialData(format!(
            "slope at the origin is {slope_probe}, expected {}",
            -1.0 / eps
        )));
    }
    let transverse_hessian_probe = if cfg.dim == 3 {
        let h = 1e-2 * eps.sqrt();
        let d22 = fd2(&|s| geo.w0([0.0, s, 0.0]), h);
        let d33 = fd2(&|s| geo.w0([0.0, 0.0, s]), h);
        // ∂²_{y_ν} W = ε^{1/2} ∂²_{x_ν} w.
        eps.sqrt() * d22.abs().max(d33.abs())
    } else {
        0.0
    };
    if transverse_hessian_probe > 1e-6 {
        return Err(ShockError::InvalidInitialData(format!(
            "transverse Hessian at the origin is {transverse_hessian_probe}"
        )));
    }

    let w = Field::from_fn(grid, "w", |x| geo.w0(x));
    if let Some(i) = w.values.iter().position(|v| *v < 0.0) {
        return Err(ShockError::InvalidInitialData(format!(
            "negative sound speed at {:?}",
            grid.point(i)
        )));
    }
    let sigma = w.map("sigma", |v| 0.5 * v);
    let u1 = w.map("u1", |v| 0.5 * v);
    let alpha = betas.alpha;
    let mass: f64 = sigma.map("ne", |s| density_from_sigma(alpha, s)).integral();

    let (nplus, ions) = match cfg.nplus {
        IonKind::None => (Field::zeros(grid, "nplus"), None),
        IonKind::Ball if cfg.dim == 3 => {
            let ion = IonBackground::unit(1.0, 3).with_total(mass);
            (ion.sample(grid), Some(ion))
        }
        IonKind::Ball => {
            if cfg.dim != 1 || grid.ext[0] < 1.0 + pad * grid.h[0] {
                return Err(ShockError::InvalidInitialData(
                    "the ion slab |x1| <= 1 must fit inside the grid".into(),
                ));
            }
            let slab = IonBackground::unit(1.0, 1).sample(grid);
            let scale = mass / slab.integral();
            let ion = IonBackground::unit(1.0, 1);
            let ion = IonBackground {
                amplitude: scale,
                ..ion
            };
            (slab.map("nplus", |v| v * scale), Some(ion))
        }
    };
    let mut state = PhysicalState {
        t: -eps,
        alpha,
        u: [u1, Field::zeros(grid, "u2"), Field::zeros(grid, "u3")],
        sigma,
        nplus,
    };
    state.clamp_vacuum();
    state.check()?;
    Ok(InitialData {
        state,
        geometry: geo,
        ions,
        slope_probe,
        transverse_hessian_probe,
    })
}

/// Validate initial data with the default audit constant `M = 20`.
pub fn validate_initial_data(state: &PhysicalState, cfg: &InitConfig) -> Result<LedgerReport> {
    validate_initial_data_with(state, cfg, 20.0)
}

fn mirror(g: &Grid, m: [usize; 3], axis: usize) -> usize {
    let mut r = m;
    r[axis] = g.n[axis] - 1 - m[axis];
    g.index(r)
}

/// Largest relative deviation from the reflection parities of the state:
/// `u₁, σ` even in `x₂, x₃`; `u₂` odd in `x₂`, even in `x₃`; `u₃` even in
/// `x₂`, odd in `x₃`.
pub fn parity_defect(state: &PhysicalState) -> f64 {
    let g = state.grid();
    if g.dim < 3 {
        return 0.0;
    }
    let fields: [(&Field, [f64; 2]); 4] = [
        (&state.u[0], [1.0, 1.0]),
        (&state.sigma, [1.0, 1.0]),
        (&state.u[1], [-1.0, 1.0]),
        (&state.u[2], [1.0, -1.0]),
    ];
    let mut worst = 0.0f64;
    for (f, parity) in fields {
        let scale = f.max_abs();
        if scale == 0.0 {
            continue;
        }
        for idx in 0..g.len() {
            let m = g.unravel(idx);
            for (k, axis) in [1usize, 2].into_iter().enumerate() {
                let d = f.values[idx] - parity[k] * f.values[mirror(&g, m, axis)];
                worst = worst.max(d.abs() / scale);
            }
        }
    }
    worst
}

/// Validate initial data against the admissibility bounds, with audit
/// constant `m_audit` for the higher-derivative rows.
pub fn validate_initial_data_with(
    state: &PhysicalState,
    cfg: &InitConfig,
    m_audit: f64,
) -> Result<LedgerReport> {
    let geo = &DataGeometry::new(cfg)?;
    let g = state.grid();
    let eps = cfg.epsilon;
    let kappa0 = cfg.kappa0;
    let mut rep = LedgerReport::new();
    rep.meta("epsilon", eps);
    rep.meta("kappa0", kappa0);
    rep.meta("gamma", cfg.gamma);
    rep.meta("M_audit", m_audit);

    let big_l = geo.big_l;
    let small_l = m_audit.powf(-1.0 / 200.0);
    let axis_scale = [eps.powf(1.5), eps.sqrt(), eps.sqrt()];
    let e14 = eps.powf(0.25);
    let far = 1.0 + eps.powf(0.1);
    let m18 = m_audit * eps.powf(1.0 / 18.0);

    let w = state.w();
    let z = state.z();
    let w_shift: Vec<f64> = w.values.iter().map(|v| v - kappa0).collect();
    let tdw: Vec<f64> = (0..g.len())
        .map(|i| {
            let x = g.point(i);
            let y = geo.to_y(x);
            let bar = if y[0].abs() <= 2.0 * big_l + 1.0 { eval_barw(y, false).value } else { 0.0 };
            w_shift[i] / eps.sqrt() - bar
        })
        .collect();
    let y_norm = |x: [f64; 3]| {
        let y = geo.to_y(x);
        (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt()
    };
    let e1 = [1, 0, 0];
    let (e2, e3) = ([0, 1, 0], [0, 0, 1]);
    let tdw_region = |p: f64| move |x: [f64; 3]| (y_norm(x) <= big_l).then(|| eta(geo.to_y(x)).powf(p));
    let near_origin = |x: [f64; 3]| (0..g.dim).all(|a| x[a].abs() <= g.h[a] * (1.0 + 1e-9)).then_some(1.0);
    let inner = |x: [f64; 3]| (y_norm(x) <= small_l).then_some(1.0);
    // Derivative rows are read where the doubled-spacing stencil stays in the core.
    let margin = [4.0 * g.h[0], if g.dim == 3 { 4.0 * g.h[1].max(g.h[2]) } else { 0.0 }];
    let in_core = move |x: [f64; 3]| geo.in_core_with_margin(x, margin);
    let far_region =
        |p: f64| move |x: [f64; 3]| (in_core(x) && y_norm(x) >= big_l).then(|| eta(geo.to_y(x)).powf(p));
    let core = |p: f64| move |x: [f64; 3]| in_core(x).then(|| eta(geo.to_y(x)).powf(p));
    let everywhere = |_: [f64; 3]| Some(1.0);

    let order = |k: usize| -> Vec<([usize; 3], f64)> {
        crate::grid::multi_indices(3, k).into_iter().map(|gm| (gm, 1.0)).collect()
    };

    // W̃ rows on |y| ≤ L.
    let r0 = tdw_region(-1.0 / 6.0);
    let r1 = tdw_region(1.0 / 3.0);
    let r2 = tdw_region(0.0);
    let rows_tdw = [
        ("init.tdW.0", vec![([0, 0, 0], 1.0)], Combine::Max, &r0 as &dyn Fn([f64; 3]) -> Option<f64>),
        ("init.tdW.1", vec![(e1, 1.0)], Combine::Max, &r1),
        ("init.tdW.check", vec![(e2, 1.0), (e3, 1.0)], Combine::Euclid, &r2),
    ];
    for (id, gammas, combine, region) in rows_tdw {
        rep.audit(
            &g,
            &tdw,
            &DerivativeRow {
                id,
                family: "initial W-tilde",
                constant: e14,
                gammas,
                combine,
                value_scale: 1.0,
                axis_scale,
                region,
                resolution_test: false,
                m_coef: 0.0,
                m_power: 0.0,
            },
        )?;
    }
    for (id, k, region) in [
        ("init.tdW.4", 4usize, &inner as &dyn Fn([f64; 3]) -> Option<f64>),
        ("init.tdW.3", 3usize, &near_origin),
    ] {
        rep.audit(
            &g,
            &tdw,
            &DerivativeRow {
                id,
                family: "initial W-tilde high order",
                constant: m18,
                gammas: order(k).into_iter().filter(|(gm, _)| (0..3).all(|a| gm[a] == 0 || a < g.dim)).collect(),
                combine: Combine::Max,
                value_scale: 1.0,
                axis_scale,
                region,
                resolution_test: true,
                m_coef: eps.powf(1.0 / 18.0),
                m_power: 1.0,
            },
        )?;
    }

    // Far-field W rows on the core with |y| ≥ L.
    let f0 = far_region(-1.0 / 6.0);
    let f1 = far_region(1.0 / 3.0);
    let f2 = far_region(0.0);
    let c13 = core(1.0 / 3.0);
    let c16 = core(1.0 / 6.0);
    let w_rows: [(&str, Vec<([usize; 3], f64)>, Combine, f64, &dyn Fn([f64; 3]) -> Option<f64>, bool); 5] = [
        ("init.W.0", vec![([0, 0, 0], 1.0)], Combine::Max, far, &f0, false),
        ("init.W.1", vec![(e1, 1.0)], Combine::Max, far, &f1, false),
        ("init.W.check", vec![(e2, 1.0), (e3, 1.0)], Combine::Euclid, far, &f2, false),
        (
            "init.W.2",
            vec![([2, 0, 0], 1.0), ([1, 1, 0], 1.0), ([1, 0, 1], 1.0)],
            Combine::Max,
            1.0,
            &c13,
            true,
        ),
        (
            "init.W.2check",
            vec![([0, 2, 0], 1.0), ([0, 1, 1], 2.0), ([0, 0, 2], 1.0)],
            Combine::Euclid,
            1.0,
            &c16,
            true,
        ),
    ];
    for (id, gammas, combine, constant, region, res) in w_rows {
        rep.audit(
            &g,
            &w_shift,
            &DerivativeRow {
                id,
                family: "initial W",
                constant,
                gammas,
                combine,
                value_scale: 1.0 / eps.sqrt(),
                axis_scale,
                region,
                resolution_test: res,
                m_coef: 0.0,
                m_power: 0.0,
            },
        )?;
    }

    // Z and U_ν everywhere.
    let e32 = eps.powf(1.5);
    let z_rows: [(&str, Vec<([usize; 3], f64)>, f64, bool); 5] = [
        ("init.Z.0", vec![([0, 0, 0], 1.0)], eps, false),
        ("init.Z.1", vec![(e1, 1.0)], e32, false),
        ("init.Z.check1", vec![(e2, 1.0), (e3, 1.0)], eps, false),
        ("init.Z.2", vec![([2, 0, 0], 1.0), ([1, 1, 0], 1.0), ([1, 0, 1], 1.0)], e32, true),
        ("init.Z.check2", vec![([0, 2, 0], 1.0), ([0, 1, 1], 1.0), ([0, 0, 2], 1.0)], eps, true),
    ];
    for (id, gammas, constant, res) in z_rows {
        rep.audit(
            &g,
            &z.values,
            &DerivativeRow {
                id,
                family: "initial Z",
                constant,
                gammas,
                combine: Combine::Max,
                value_scale: 1.0,
                axis_scale,
                region: &everywhere,
                resolution_test: res,
                m_coef: 0.0,
                m_power: 0.0,
            },
        )?;
    }
    let u_rows: [(&str, Vec<([usize; 3], f64)>, f64, bool); 4] = [
        ("init.U.0", vec![([0, 0, 0], 1.0)], eps, false),
        ("init.U.1", vec![(e1, 1.0)], e32, false),
        ("init.U.check1", vec![(e2, 1.0), (e3, 1.0)], eps, false),
        ("init.U.check2", vec![([0, 2, 0], 1.0), ([0, 1, 1], 1.0), ([0, 0, 2], 1.0)], eps, true),
    ];
    for (id, gammas, constant, res) in u_rows {
        if g.dim < 3 {
            rep.mark(id, "initial U", constant, 0.0, RowStatus::Skipped);
            continue;
        }
        let mut worst: Option<crate::ledger::LedgerRow> = None;
        for comp in 1..3 {
            let mut sub = LedgerReport::new();
            sub.audit(
                &g,
                &state.u[comp].values,
                &DerivativeRow {
                    id,
                    family: "initial U",
                    constant,
                    gammas: gammas.clone(),
                    combine: Combine::Max,
                    value_scale: 1.0,
                    axis_scale,
                    region: &everywhere,
                    resolution_test: res,
                    m_coef: 0.0,
                    m_power: 0.0,
                },
            )?;
            let r = sub.rows.remove(0);
            let replace = match &worst {
                None => true,
                Some(w) => {
                    (r.status == RowStatus::Fail && w.status != RowStatus::Fail)
                        || (r.status == w.status && r.measured > w.measured)
                        || (r.status == RowStatus::ResolutionLimited && w.status == RowStatus::Pass)
                }
            };
            if replace {
                worst = Some(r);
            }
        }
        rep.rows.push(worst.expect("two components audited"));
    }

    // Specific vorticity on the core.
    let omega = state.specific_vorticity()?;
    let mut om = 0.0f64;
    for (i, v) in omega.values.iter().enumerate() {
        if in_core(g.point(i)) {
            om = om.max(*v);
        }
    }
    rep.check("init.Omega", "initial vorticity", 1.0, om);

    // Symmetry, support, positivity, neutrality, resolution.
    rep.check("init.even", "symmetry", 1e-12, parity_defect(state));
    let ne = state.density();
    let mut outside = 0.0f64;
    let mut nonpositive = 0.0;
    let background = if cfg.vacuum { 0.0 } else { kappa0 };
    let open_tol = 1.0 - 1e-9;
    for i in 0..g.len() {
        let x = g.point(i);
        if !geo.in_support(x) {
            let mut v = (w.values[i] - background).abs().max(z.values[i].abs());
            v = v.max(state.u[1].values[i].abs()).max(state.u[2].values[i].abs());
            if cfg.vacuum {
                v = v.max(ne.values[i].abs());
            }
            outside = outside.max(v);
        }
        let interior = x[0].abs() < geo.support[0] * open_tol
            && (g.dim == 1 || (x[1] * x[1] + x[2] * x[2]).sqrt() < geo.support[1] * open_tol);
        // Nodes where the bulk envelope is below the vacuum floor count as vacuum.
        let expected = !cfg.vacuum || geo.chi_bulk(x) * kappa0 > 1e-6;
        if state.sigma.values[i] < 0.0 || (interior && expected && ne.values[i] <= 0.0) {
            nonpositive += 1.0;
        }
    }
    rep.check("init.support", "support", 0.0, outside);
    rep.check("init.positivity", "positivity", 0.0, nonpositive);
    let q_e = ne.integral();
    match cfg.nplus {
        IonKind::None => rep.mark("init.neutrality", "neutrality", 1e-10, 0.0, RowStatus::Skipped),
        IonKind::Ball => {
            let q_plus = ion_total(&state.nplus);
            rep.check("init.neutrality", "neutrality", 1e-10, ((q_plus - q_e) / q_e).abs());
        }
    }
    rep.check("init.resolution", "resolution", 1.0, 8.0 / (2.0 * geo.support[0] / g.h[0]));
    Ok(rep)
}

/// Total charge of a sampled ion background: the grid integral in one
/// dimension, the closed-form ball total (amplitude read off the samples)
/// in three.
pub fn ion_total(nplus: &Field) -> f64 {
    let g = nplus.grid;
    if g.dim != 3 {
        return nplus.integral();
    }
    let mut amp = 0.0f64;
    let mut best_r = f64::INFINITY;
    for (i, v) in nplus.values.iter().enumerate() {
        let x = g.point(i);
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        if r2 < best_r && *v > 0.0 {
            best_r = r2;
            amp = v / (1.0 - r2).powi(5);
        }
    }
    IonBackground {
        amplitude: amp,
        radius: 1.0,
        dim: 3,
    }
    .total()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(dim: usize, vacuum: bool) -> InitConfig {
        let eps: f64 = 0.1;
        let (n, ext) = if dim == 3 {
            ([64, 48, 48], [1.3 * eps.sqrt(), 1.4 * eps.powf(1.0 / 6.0), 1.4 * eps.powf(1.0 / 6.0)])
        } else {
            ([4096, 1, 1], [1.1, 0.0, 0.0])
        };
        InitConfig {
            epsilon: eps,
            kappa0: 6.0,
            gamma: 3.0,
            dim,
            n,
            ext,
            seed: 7,
            perturbation_amp: 0.1,
            nplus: IonKind::Ball,
            vacuum,
        }
    }

    #[test]
    fn ramp_is_smooth_and_monotone() {
        assert_eq!(ramp(0.0), 1.0);
        assert_eq!(ramp(1.0), 0.0);
        assert!((ramp(0.5) - 0.5).abs() < 1e-15);
        let mut prev = 1.0;
        for i in 1..1000 {
            let t = i as f64 / 1000.0;
            let r = ramp(t);
            assert!(r <= prev);
            prev = r;
            let h = 1e-6;
            let fd = (ramp(t + h) - ramp(t - h)) / (2.0 * h);
            assert!((fd - ramp_derivative(t)).abs() < 1e-6);
        }
    }

    #[test]
    fn one_dimensional_data() {
        let c = cfg(1, true);
        let d = build_initial_data(&c).unwrap();
        assert!((d.slope_probe * c.epsilon + 1.0).abs() < 1e-6);
        let q_e = d.state.electron_mass();
        assert!((d.state.nplus.integral() - q_e).abs() <= 1e-10 * q_e);
        let rep = validate_initial_data(&d.state, &c).unwrap();
        assert!(rep.all_pass(), "{}", rep.to_table());
    }

    #[test]
    fn bump_norm_normalisation() {
        let c = cfg(3, true);
        let d = build_initial_data(&c).unwrap();
        let n = d.geometry.bump_norms();
        let m = n.iter().cloned().fold(0.0, f64::max);
        let n2 = d.geometry.bump_second_norms();
        let caps = [0.5 * (1.0 - PROFILE_SECOND_SUP[0]), 0.5 * (1.0 - PROFILE_SECOND_SUP[1])];
        assert!(m <= 0.1 * c.epsilon.powf(0.25) * (1.0 + 1e-12));
        assert!(n2[0] <= caps[0] * (1.0 + 1e-12) && n2[1] <= caps[1] * (1.0 + 1e-12));
        let active = [
            m / (0.1 * c.epsilon.powf(0.25)),
            n2[0] / caps[0],
            n2[1] / caps[1],
        ];
        assert!(active.iter().any(|a| (a - 1.0).abs() < 1e-12), "{active:?}");
    }

    #[test]
    fn profile_second_derivative_bounds_cover_the_profile() {
        use crate::profile::{certify_profile_bounds, SampleBox};
        // The core peak sits near y₁ = -0.28; the transverse row keeps
        // growing towards its limit along the y₁ axis.
        let near = certify_profile_bounds(&SampleBox { half: [10.0, 10.0, 0.0], n: [1601, 801, 1] });
        let far = certify_profile_bounds(&SampleBox { half: [1e8, 0.0, 0.0], n: [4001, 1, 1] });
        for c in [near, far] {
            assert!(c.sup[3] <= PROFILE_SECOND_SUP[0], "{}", c.sup[3]);
            assert!(c.sup[4] <= PROFILE_SECOND_SUP[1], "{}", c.sup[4]);
        }
    }

    #[test]
    fn rejects_small_kappa() {
        let mut c = cfg(1, true);
        c.kappa0 = 5.0;
        assert!(build_initial_data(&c).is_err());
    }
}
