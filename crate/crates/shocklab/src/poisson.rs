//! Free-space Poisson solver `Δφ = 4πρ`, `φ → 0` at infinity.
//!
//! The potential is `φ = -4π G * ρ` with `G(x) = 1/(4π|x|)`.  In three
//! dimensions the convolution is evaluated on a doubled grid with a kernel
//! truncated at a radius `L` larger than the domain diameter.  The truncated
//! kernel has the closed-form transform `(1 - cos(L|k|))/|k|²`, which is
//! smooth, so sampling it on a sufficiently long period and transforming back
//! yields the aperiodic kernel to spectral accuracy.  The doubled-grid
//! spectra of the kernel and of its gradient are precomputed once; each solve
//! then costs one forward and two inverse transforms, packing two real
//! outputs into one complex transform.
//!
//! Planar one-dimensional problems are integrated directly, and a radially
//! symmetric ion background has a closed-form potential.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Result, ShockError};
use crate::grid::{Field, Grid};

/// Number of cells next to each boundary that must carry zero charge.
pub const PADDING_CELLS: usize = 4;

/// Charge density `n₊ - n_e` with its cached total charge.
#[derive(Clone, Debug)]
pub struct ChargeDensity {
    pub rho: Field,
    pub total_charge: f64,
}

impl ChargeDensity {
    /// Wrap a density field, caching its integral.
    pub fn new(rho: Field) -> ChargeDensity {
        let total_charge = rho.integral();
        ChargeDensity { rho, total_charge }
    }
}

/// Potential and its gradient.
#[derive(Clone, Debug)]
pub struct Potential {
    pub phi: Field,
    pub grad: [Field; 3],
}

/// Check finiteness and the zero-padding requirement.
pub fn check_density(rho: &Field) -> Result<()> {
    if let Some(i) = rho.first_non_finite() {
        return Err(ShockError::NonFinite(format!("charge density at index {i}")));
    }
    let g = rho.grid;
    for (idx, v) in rho.values.iter().enumerate() {
        if *v != 0.0 {
            let m = g.unravel(idx);
            for a in 0..g.dim {
                if m[a] < PADDING_CELLS || m[a] + PADDING_CELLS >= g.n[a] {
                    return Err(ShockError::SupportTooLarge(format!(
                        "nonzero density at node {m:?} within {PADDING_CELLS} cells of the boundary"
                    )));
                }
            }
        }
    }
    Ok(())
}

fn smooth_size(min: usize) -> usize {
    let mut n = min.max(2);
    loop {
        let mut r = n;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 && n % 2 == 0 {
            return n;
        }
        n += 1;
    }
}

/// In-place 3D transform over a row-major array of shape `dims`.
struct Fft3 {
    dims: [usize; 3],
    plans: [Arc<dyn Fft<f64>>; 3],
    line: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Fft3 {
    fn new(planner: &mut FftPlanner<f64>, dims: [usize; 3], inverse: bool) -> Fft3 {
        let plan = |p: &mut FftPlanner<f64>, n| {
            if inverse {
                p.plan_fft_inverse(n)
            } else {
                p.plan_fft_forward(n)
            }
        };
        let plans = [
            plan(planner, dims[0]),
            plan(planner, dims[1]),
            plan(planner, dims[2]),
        ];
        let scratch_len = plans.iter().map(|p| p.get_inplace_scratch_len()).max().unwrap_or(0);
        let maxd = *dims.iter().max().expect("three dims");
        Fft3 {
            dims,
            plans,
            line: vec![Complex64::new(0.0, 0.0); maxd * 16],
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len.max(1)],
        }
    }

    fn process(&mut self, data: &mut [Complex64]) {
        let [n0, n1, n2] = self.dims;
        // Contiguous axis.
        for chunk in data.chunks_mut(n2) {
            self.plans[2].process_with_scratch(chunk, &mut self.scratch);
        }
        // Middle axis: gather batches of lines sharing the outer index.
        const BATCH: usize = 16;
        for i0 in 0..n0 {
            let base = i0 * n1 * n2;
            let mut i2 = 0;
            while i2 < n2 {
                let b = BATCH.min(n2 - i2);
                for k in 0..b {
                    for i1 in 0..n1 {
                        self.line[k * n1 + i1] = data[base + i1 * n2 + i2 + k];
                    }
                }
                self.plans[1].process_with_scratch(&mut self.line[..b * n1], &mut self.scratch);
                for k in 0..b {
                    for i1 in 0..n1 {
                        data[base + i1 * n2 + i2 + k] = self.line[k * n1 + i1];
                    }
                }
                i2 += b;
            }
        }
        // Outer axis.
        let stride = n1 * n2;
        let mut j = 0;
        while j < stride {
            let b = BATCH.min(stride - j);
            for k in 0..b {
                for i0 in 0..n0 {
                    self.line[k * n0 + i0] = data[i0 * stride + j + k];
                }
            }
            self.plans[0].process_with_scratch(&mut self.line[..b * n0], &mut self.scratch);
            for k in 0..b {
                for i0 in 0..n0 {
                    data[i0 * stride + j + k] = self.line[k * n0 + i0];
                }
            }
            j += b;
        }
    }
}

/// Free-space solver for a fixed three-dimensional grid.
pub struct PoissonSolver {
    grid: Grid,
    pdims: [usize; 3],
    /// Spectra of the scaled kernel and its three partial derivatives.
    spectra: [Vec<Complex64>; 4],
    fwd: Fft3,
    inv: Fft3,
    buf: Vec<Complex64>,
    out: Vec<Complex64>,
}

impl PoissonSolver {
    /// Precompute kernel spectra for `grid` (must be three-dimensional).
    pub fn new(grid: Grid) -> Result<PoissonSolver> {
        if grid.dim != 3 {
            return Err(ShockError::InvalidGrid(
                "the free-space convolution solver needs a 3D grid".into(),
            ));
        }
        let n = grid.n;
        let h = grid.h;
        let pdims = [2 * n[0], 2 * n[1], 2 * n[2]];
        let span = [0, 1, 2].map(|a| (n[a] - 1) as f64 * h[a]);
        let diam = (span[0] * span[0] + span[1] * span[1] + span[2] * span[2]).sqrt();
        let trunc = 1.05 * diam;
        let bdims = [0, 1, 2].map(|a| {
            let need = ((trunc + span[a]) / h[a]).ceil() as usize + 2;
            smooth_size(need.max(pdims[a]))
        });

        let mut planner = FftPlanner::new();
        let mut big_inv = Fft3::new(&mut planner, bdims, true);
        let mut fwd = Fft3::new(&mut planner, pdims, false);
        let inv = Fft3::new(&mut planner, pdims, true);

        let big_len = bdims[0] * bdims[1] * bdims[2];
        let plen = pdims[0] * pdims[1] * pdims[2];
        let period = [0, 1, 2].map(|a| bdims[a] as f64 * h[a]);
        let volume = period[0] * period[1] * period[2];
        let cell = h[0] * h[1] * h[2];
        let scale = -4.0 * PI * cell / (volume * plen as f64);
        let freq = |a: usize, m: usize| -> (f64, bool) {
            let b = bdims[a];
            let nyq = m == b / 2;
            let mm = if m <= b / 2 { m as f64 } else { m as f64 - b as f64 };
            (2.0 * PI * mm / period[a], nyq)
        };

        let mut big = vec![Complex64::new(0.0, 0.0); big_len];
        let mut spectra: [Vec<Complex64>; 4] = Default::default();
        for (which, spec) in spectra.iter_mut().enumerate() {
            for m0 in 0..bdims[0] {
                let (k0, q0) = freq(0, m0);
                for m1 in 0..bdims[1] {
                    let (k1, q1) = freq(1, m1);
                    for m2 in 0..bdims[2] {
                        let (k2, q2) = freq(2, m2);
                        let kk = k0 * k0 + k1 * k1 + k2 * k2;
                        let g = if kk == 0.0 {
                            0.5 * trunc * trunc
                        } else {
                            let s = (0.5 * trunc * kk.sqrt()).sin();
                            2.0 * s * s / kk
                        };
                        let v = match which {
                            0 => Complex64::new(g, 0.0),
                            1 if !q0 => Complex64::new(0.0, k0 * g),
                            2 if !q1 => Complex64::new(0.0, k1 * g),
                            3 if !q2 => Complex64::new(0.0, k2 * g),
                            _ => Complex64::new(0.0, 0.0),
                        };
                        big[(m0 * bdims[1] + m1) * bdims[2] + m2] = v;
                    }
                }
            }
            big_inv.process(&mut big);
            let mut small = vec![Complex64::new(0.0, 0.0); plen];
            let src = |a: usize, j: usize| -> Option<usize> {
                // Offset j on the doubled grid maps to a signed offset.
                let p = pdims[a];
                if j < n[a] {
                    Some(j)
                } else if j > p - n[a] {
                    Some(bdims[a] - (p - j))
                } else {
                    None
                }
            };
            for j0 in 0..pdims[0] {
                let Some(b0) = src(0, j0) else { continue };
                for j1 in 0..pdims[1] {
                    let Some(b1) = src(1, j1) else { continue };
                    for j2 in 0..pdims[2] {
                        let Some(b2) = src(2, j2) else { continue };
                        let v = big[(b0 * bdims[1] + b1) * bdims[2] + b2].re;
                        small[(j0 * pdims[1] + j1) * pdims[2] + j2] =
                            Complex64::new(v * scale, 0.0);
                    }
                }
            }
            fwd.process(&mut small);
            *spec = small;
        }
        drop(big);

        Ok(PoissonSolver {
            grid,
            pdims,
            spectra,
            fwd,
            inv,
            buf: vec![Complex64::new(0.0, 0.0); plen],
            out: vec![Complex64::new(0.0, 0.0); plen],
        })
    }

    /// Grid this solver was built for.
    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Solve for `φ` and `∇φ` given a raw density array on the solver grid.
    pub fn solve_values(&mut self, rho: &[f64]) -> Result<[Vec<f64>; 4]> {
        let g = self.grid;
        let p = self.pdims;
        let rho_field = Field::from_values(g, "rho", rho.to_vec())?;
        check_density(&rho_field)?;
        self.buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        for i0 in 0..g.n[0] {
            for i1 in 0..g.n[1] {
                let s = g.index([i0, i1, 0]);
                let d = (i0 * p[1] + i1) * p[2];
                for i2 in 0..g.n[2] {
                    self.buf[d + i2] = Complex64::new(rho[s + i2], 0.0);
                }
            }
        }
        self.fwd.process(&mut self.buf);
        let mut res: [Vec<f64>; 4] = [
            vec![0.0; g.len()],
            vec![0.0; g.len()],
            vec![0.0; g.len()],
            vec![0.0; g.len()],
        ];
        let i = Complex64::new(0.0, 1.0);
        for pair in 0..2 {
            let (a, b) = (2 * pair, 2 * pair + 1);
            for (k, o) in self.out.iter_mut().enumerate() {
                *o = self.buf[k] * (self.spectra[a][k] + i * self.spectra[b][k]);
            }
            self.inv.process(&mut self.out);
            for i0 in 0..g.n[0] {
                for i1 in 0..g.n[1] {
                    let s = g.index([i0, i1, 0]);
                    let d = (i0 * p[1] + i1) * p[2];
                    for i2 in 0..g.n[2] {
                        let c = self.out[d + i2];
                        res[a][s + i2] = c.re;
                        res[b][s + i2] = c.im;
                    }
                }
            }
        }
        Ok(res)
    }

    /// Solve `Δφ = 4πρ` with decay at infinity.
    pub fn solve_potential(&mut self, rho: &ChargeDensity) -> Result<Potential> {
        if rho.rho.grid != self.grid {
            return Err(ShockError::ShapeMismatch("density grid differs from solver grid".into()));
        }
        let [phi, g1, g2, g3] = self.solve_values(&rho.rho.values)?;
        let g = self.grid;
        Ok(Potential {
            phi: Field::from_values(g, "phi", phi)?,
            grad: [
                Field::from_values(g, "d1 phi", g1)?,
                Field::from_values(g, "d2 phi", g2)?,
                Field::from_values(g, "d3 phi", g3)?,
            ],
        })
    }
}

/// Integral of `f` from the left end, 4th-order accurate per cell.
fn cumulative_integral(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    for i in 0..n - 1 {
        let cell = if i == 0 {
            h * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]) / 24.0
        } else if i == n - 2 {
            h * (9.0 * f[n - 1] + 19.0 * f[n - 2] - 5.0 * f[n - 3] + f[n - 4]) / 24.0
        } else {
            h * (-f[i - 1] + 13.0 * f[i] + 13.0 * f[i + 1] - f[i + 2]) / 24.0
        };
        out[i + 1] = out[i] + cell;
    }
    out
}

/// Planar solve of `φ'' = 4πρ(x₁)` with `φ' = 0` and `φ = 0` at the left end.
///
/// For a neutral slab the field also vanishes beyond the right end; the
/// potential there is constant (a planar problem has no decay at infinity).
pub fn solve_potential_1d(rho: &ChargeDensity) -> Result<Potential> {
    let g = rho.rho.grid;
    if g.dim != 1 {
        return Err(ShockError::InvalidGrid("planar solver needs a 1D grid".into()));
    }
    check_density(&rho.rho)?;
    let src: Vec<f64> = rho.rho.values.iter().map(|v| 4.0 * PI * v).collect();
    let e = cumulative_integral(&src, g.h[0]);
    let phi = cumulative_integral(&e, g.h[0]);
    Ok(Potential {
        phi: Field::from_values(g, "phi", phi)?,
        grad: [
            Field::from_values(g, "d1 phi", e)?,
            Field::zeros(g, "d2 phi"),
            Field::zeros(g, "d3 phi"),
        ],
    })
}

/// Static ion background `n₊ = A (1 - |x|²/R²)⁵` supported in `|x| ≤ R`.
///
/// In three dimensions `|x|` is the Euclidean radius and the potential is
/// evaluated in closed form from Gauss's law; in one dimension it is a slab
/// profile in `x₁`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IonBackground {
    pub amplitude: f64,
    pub radius: f64,
    pub dim: usize,
}

const BINOM5: [f64; 6] = [1.0, -5.0, 10.0, -10.0, 5.0, -1.0];

impl IonBackground {
    /// Background of unit amplitude.
    pub fn unit(radius: f64, dim: usize) -> IonBackground {
        IonBackground {
            amplitude: 1.0,
            radius,
            dim,
        }
    }

    fn radius_of(&self, x: [f64; 3]) -> f64 {
        if self.dim == 3 {
            (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
        } else {
            x[0].abs()
        }
    }

    /// Density at a point.
    pub fn density(&self, x: [f64; 3]) -> f64 {
        let r = self.radius_of(x) / self.radius;
        if r >= 1.0 {
            0.0
        } else {
            self.amplitude * (1.0 - r * r).powi(5)
        }
    }

    /// Total charge (per unit transverse area in 1D).
    pub fn total(&self) -> f64 {
        let r = self.radius;
        if self.dim == 3 {
            let s: f64 = (0..6).map(|j| BINOM5[j] / (2 * j + 3) as f64).sum();
            4.0 * PI * self.amplitude * r.powi(3) * s
        } else {
            let s: f64 = (0..6).map(|j| BINOM5[j] / (2 * j + 1) as f64).sum();
            2.0 * self.amplitude * r * s
        }
    }

    /// Copy rescaled so that the total charge equals `q`.
    pub fn with_total(&self, q: f64) -> IonBackground {
        let unit = IonBackground {
            amplitude: 1.0,
            ..*self
        };
        IonBackground {
            amplitude: q / unit.total(),
            ..*self
        }
    }

    /// Potential `φ₊` with `Δφ₊ = 4π n₊` and `φ₊ → 0` at infinity, and its
    /// gradient, in three dimensions.
    pub fn potential_3d(&self, x: [f64; 3]) -> (f64, [f64; 3]) {
        let big_r = self.radius;
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        let total = self.total();
        if r >= big_r {
            let r3 = r * r * r;
            return (-total / r, [total * x[0] / r3, total * x[1] / r3, total * x[2] / r3]);
        }
        let u = r / big_r;
        let c = 4.0 * PI * self.amplitude;
        // M(r)/r³ and the interior integral of M(s)/s² in closed form.
        let mut m_over_r3 = 0.0;
        let mut inner = 0.0;
        for j in 0..6 {
            let p = (2 * j) as i32;
            m_over_r3 += BINOM5[j] * u.powi(p) / (2 * j + 3) as f64;
            inner += BINOM5[j] * (1.0 - u.powi(p + 2)) / ((2 * j + 3) * (2 * j + 2)) as f64;
        }
        let phi = -total / big_r - c * big_r * big_r * inner;
        let k = c * m_over_r3;
        (phi, [k * x[0], k * x[1], k * x[2]])
    }

    /// Sample the density on a grid.
    pub fn sample(&self, g: Grid) -> Field {
        Field::from_fn(g, "nplus", |x| self.density(x))
    }
}

/// Error function, accurate to about `1e-15`.
pub fn erf(x: f64) -> f64 {
    if x < 0.0 {
        return -erf(-x);
    }
    if x < 3.0 {
        let mut sum = x;
        let mut term = x;
        let mut k = 0.0;
        while term.abs() > 1e-17 * sum.abs() {
            k += 1.0;
            term *= -x * x / k;
            sum += term / (2.0 * k + 1.0);
        }
        2.0 / PI.sqrt() * sum
    } else {
        let mut f = 0.0;
        for k in (1..60).rev() {
            f = k as f64 / 2.0 / (x + f);
        }
        1.0 - (-x * x).exp() / PI.sqrt() / (x + f)
    }
}

/// Normalised Gaussian charge of width `sg` centred at `c`, with the
/// padding cells cleared.
fn gaussian_charge(g: Grid, sg: f64, centres: &[([f64; 3], f64)]) -> Field {
    let norm = 1.0 / (2.0 * PI * sg * sg).powf(1.5);
    let mut rho = Field::from_fn(g, "rho", |x| {
        centres
            .iter()
            .map(|(c, q)| {
                let r2: f64 = (0..3).map(|a| (x[a] - c[a]).powi(2)).sum();
                q * norm * (-r2 / (2.0 * sg * sg)).exp()
            })
            .sum()
    });
    for (idx, v) in rho.values.iter_mut().enumerate() {
        let m = g.unravel(idx);
        if (0..3).any(|a| m[a] < PADDING_CELLS || m[a] + PADDING_CELLS >= g.n[a]) || v.abs() < 1e-300 {
            *v = 0.0;
        }
    }
    rho
}

/// Results of the reference problems of the three-dimensional solver.
#[derive(Clone, Debug, PartialEq)]
pub struct PoissonOracleReport {
    /// Relative sup error of the Gaussian-charge potential against
    /// `φ = -erf(r/(√2 s))/r`.
    pub gaussian_rel_err: f64,
    /// Largest `|φ|` for zero density.
    pub zero_max: f64,
    /// Radii and local decay exponents `-d log|φ| / d log r` of a neutral
    /// dipole along its axis.
    pub dipole_radii: Vec<f64>,
    pub dipole_exponents: Vec<f64>,
}

/// Run the reference problems on an `n³` grid over `[-1, 1]³`.
pub fn poisson_oracle(n: usize) -> Result<PoissonOracleReport> {
    let g = Grid::new(3, [n, n, n], [1.0, 1.0, 1.0])?;
    let mut solver = PoissonSolver::new(g)?;
    let sg = 0.15;
    let p = solver.solve_potential(&ChargeDensity::new(gaussian_charge(g, sg, &[([0.0; 3], 1.0)])))?;
    let mut err = 0.0f64;
    let mut scale = 0.0f64;
    for idx in 0..g.len() {
        let x = g.point(idx);
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        let exact = if r < 1e-12 { -(2.0 / PI).sqrt() / sg } else { -erf(r / (sg * 2f64.sqrt())) / r };
        err = err.max((p.phi.values[idx] - exact).abs());
        scale = scale.max(exact.abs());
    }
    let zero = solver.solve_potential(&ChargeDensity::new(Field::zeros(g, "rho")))?;
    let (d, sd) = (0.12, 0.06);
    let dip = gaussian_charge(g, sd, &[([d, 0.0, 0.0], 1.0), ([-d, 0.0, 0.0], -1.0)]);
    let pd = solver.solve_potential(&ChargeDensity::new(dip))?;
    let radii: Vec<f64> = vec![0.4, 0.5, 0.6, 0.7, 0.8];
    let at = |r: f64| crate::grid::interpolate_values(&g, &pd.phi.values, [r, 0.0, 0.0]);
    let mut exps = Vec::new();
    for w in radii.windows(2) {
        let (a, b) = (at(w[0]), at(w[1]));
        match (a, b) {
            (Some(a), Some(b)) if a != 0.0 && b != 0.0 => {
                exps.push(-(b.abs() / a.abs()).ln() / (w[1] / w[0]).ln())
            }
            _ => return Err(ShockError::OutOfRange("dipole sample outside the grid".into())),
        }
    }
    Ok(PoissonOracleReport {
        gaussian_rel_err: err / scale,
        zero_max: zero.phi.max_abs(),
        dipole_radii: radii[..radii.len() - 1].to_vec(),
        dipole_exponents: exps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_potential_accuracy() {
        let g = Grid::new(3, [32, 32, 32], [1.0, 1.0, 1.0]).unwrap();
        let sg = 0.15;
        let norm = 1.0 / (2.0 * PI * sg * sg).powf(1.5);
        let rho = Field::from_fn(g, "rho", |x| {
            let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
            let v = norm * (-r2 / (2.0 * sg * sg)).exp();
            if v < 1e-300 { 0.0 } else { v }
        });
        let mut rho = rho;
        for (idx, v) in rho.values.iter_mut().enumerate() {
            let m = g.unravel(idx);
            if (0..3).any(|a| m[a] < PADDING_CELLS || m[a] + PADDING_CELLS >= g.n[a]) {
                *v = 0.0;
            }
        }
        let mut s = PoissonSolver::new(g).unwrap();
        let p = s.solve_potential(&ChargeDensity::new(rho)).unwrap();
        let mut err = 0.0f64;
        let mut scale = 0.0f64;
        for idx in 0..g.len() {
            let x = g.point(idx);
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            let exact = if r < 1e-12 {
                -(2.0 / PI).sqrt() / sg
            } else {
                -erf(r / (sg * 2f64.sqrt())) / r
            };
            err = err.max((p.phi.values[idx] - exact).abs());
            scale = scale.max(exact.abs());
        }
        assert!(err / scale < 1e-4, "relative error {}", err / scale);
    }

    #[test]
    fn erf_reference_values() {
        assert!((erf(1.0) - 0.842_700_792_949_714_9).abs() < 1e-15);
        assert!((erf(-0.5) + 0.520_499_877_813_046_5).abs() < 1e-15);
        assert!((erf(3.5) - 0.999_999_256_901_627_7).abs() < 1e-15);
    }

    #[test]
    fn oracle_problems_on_a_coarse_grid() {
        let r = poisson_oracle(32).unwrap();
        assert!(r.gaussian_rel_err < 1e-3, "{}", r.gaussian_rel_err);
        assert_eq!(r.zero_max, 0.0);
        assert!(r.dipole_exponents.iter().all(|e| *e >= 2.0), "{:?}", r.dipole_exponents);
    }

    #[test]
    fn zero_density_and_padding() {
        let g = Grid::new(3, [16, 16, 16], [1.0, 1.0, 1.0]).unwrap();
        let mut s = PoissonSolver::new(g).unwrap();
        let p = s.solve_potential(&ChargeDensity::new(Field::zeros(g, "0"))).unwrap();
        assert_eq!(p.phi.max_abs(), 0.0);
        let mut bad = Field::zeros(g, "b");
        bad.values[g.index([2, 8, 8])] = 1.0;
        assert!(matches!(
            s.solve_potential(&ChargeDensity::new(bad)),
            Err(ShockError::SupportTooLarge(_))
        ));
    }

    #[test]
    fn ion_ball_potential_is_consistent() {
        let ion = IonBackground::unit(1.0, 3).with_total(2.5);
        assert!((ion.total() - 2.5).abs() < 1e-14);
        // Gradient matches finite differences of the potential.
        for x in [[0.3, 0.1, -0.2], [0.7, 0.5, 0.1], [1.2, 0.0, 0.3]] {
            let (_, grad) = ion.potential_3d(x);
            let h = 1e-5;
            for a in 0..3 {
                let mut xp = x;
                let mut xm = x;
                xp[a] += h;
                xm[a] -= h;
                let fd = (ion.potential_3d(xp).0 - ion.potential_3d(xm).0) / (2.0 * h);
                assert!((fd - grad[a]).abs() < 1e-8);
            }
        }
        // Laplacian equals 4π n₊ inside.
        let x = [0.2, -0.3, 0.25];
        let h = 1e-3;
        let mut lap = 0.0;
        for a in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[a] += h;
            xm[a] -= h;
            lap += (ion.potential_3d(xp).0 - 2.0 * ion.potential_3d(x).0 + ion.potential_3d(xm).0)
                / (h * h);
        }
        assert!((lap - 4.0 * PI * ion.density(x)).abs() < 1e-4);
    }

    #[test]
    fn planar_solver_field_of_neutral_slab() {
        let g = Grid::new(1, [801, 1, 1], [2.0, 0.0, 0.0]).unwrap();
        let ion = IonBackground::unit(1.0, 1).with_total(1.0);
        let el = IonBackground::unit(0.5, 1).with_total(1.0);
        let rho = Field::from_fn(g, "rho", |x| ion.density(x) - el.density(x));
        let p = solve_potential_1d(&ChargeDensity::new(rho)).unwrap();
        let n = g.n[0];
        assert!(p.grad[0].values[n - 1].abs() < 1e-8);
    }
}
