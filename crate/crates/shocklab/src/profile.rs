//! Self-similar Burgers profiles and the anisotropic weight η.
//!
//! The one-dimensional profile `W*` is the real root of the cubic
//! `y = -W - W^3`.  It is odd, strictly decreasing, satisfies `W*(0) = 0`,
//! `W*'(0) = -1`, `W*'''(0) = 6`, and solves the stationary self-similar
//! Burgers equation `-W/2 + (3y/2 + W) W' = 0`.  The three-dimensional
//! profile is
//!
//! ```text
//! W̄(y) = (1 + |y̌|²)^{1/2} W*((1 + |y̌|²)^{-3/2} y₁),   y̌ = (y₂, y₃),
//! ```
//!
//! whose derivatives are computed exactly by propagating truncated Taylor
//! jets through the formula.

use crate::error::{Result, ShockError};
use crate::grid::{derivative, Field};
use crate::jet::Jet;

/// Value, gradient and Hessian of `W̄` at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfilePoint {
    pub y: [f64; 3],
    pub value: f64,
    pub grad: [f64; 3],
    pub hess: [[f64; 3]; 3],
}

/// The anisotropic weight `η(y) = 1 + y₁² + |y̌|⁶`.
#[derive(Clone, Copy, Debug, Default)]
pub struct EtaWeight;

impl EtaWeight {
    /// Evaluate η at `y`.
    pub fn eval(&self, y: [f64; 3]) -> f64 {
        eta(y)
    }
}

/// `η(y) = 1 + y₁² + (y₂² + y₃²)³`.
pub fn eta(y: [f64; 3]) -> f64 {
    let r2 = y[1] * y[1] + y[2] * y[2];
    1.0 + y[0] * y[0] + r2 * r2 * r2
}

/// Real root `W` of `y = -W - W³`.
pub fn eval_wstar(y: f64) -> f64 {
    if y == 0.0 {
        return 0.0;
    }
    // Depressed cubic W³ + W + y = 0 with a single real root.  The larger
    // Cardano term is taken first and the smaller recovered from the product
    // relation a·b = -1/3, which avoids cancellation for large |y|.
    let half = 0.5 * y;
    let disc = (half * half + 1.0 / 27.0).sqrt();
    let a = (-half - half.signum() * disc).cbrt();
    let b = -1.0 / (3.0 * a);
    let mut w = a + b;
    let f = w * w * w + w + y;
    w -= f / (3.0 * w * w + 1.0);
    w
}

/// Derivatives of `W*` at `y` of order `0..=4`, by implicit differentiation.
pub fn wstar_derivs(y: f64) -> [f64; 5] {
    let w = eval_wstar(y);
    let d = 1.0 + 3.0 * w * w;
    let d2 = d * d;
    let d3 = d2 * d;
    let d4 = d3 * d;
    let d5 = d4 * d;
    let d6 = d5 * d;
    let d7 = d6 * d;
    [
        w,
        -1.0 / d,
        -6.0 * w / d3,
        6.0 / d4 - 108.0 * w * w / d5,
        360.0 * w / d6 - 3240.0 * w * w * w / d7,
    ]
}

/// Derivative of `W*` of the given order (1 to 4).
pub fn eval_wstar_deriv(y: f64, order: usize) -> Result<f64> {
    if !(1..=4).contains(&order) {
        return Err(ShockError::UnsupportedOrder(order));
    }
    Ok(wstar_derivs(y)[order])
}

/// Taylor jet of `W̄` around `y` truncated at total degree `degree ≤ 4`.
pub fn barw_jet(y: [f64; 3], degree: usize) -> Jet {
    let y1 = Jet::variable(y[0], 0, degree);
    let y2 = Jet::variable(y[1], 1, degree);
    let y3 = Jet::variable(y[2], 2, degree);
    let q = Jet::constant(1.0, degree)
        .add(&y2.mul(&y2))
        .add(&y3.mul(&y3));
    let arg = y1.mul(&q.powf(-1.5));
    let ws = wstar_derivs(arg.value());
    q.powf(0.5).mul(&arg.compose(&ws[..=degree]))
}

/// `W̄(y)` together with its gradient and Hessian when `derivs` is set.
pub fn eval_barw(y: [f64; 3], derivs: bool) -> ProfilePoint {
    if !derivs {
        let q = 1.0 + y[1] * y[1] + y[2] * y[2];
        let value = q.sqrt() * eval_wstar(y[0] * q.powf(-1.5));
        return ProfilePoint {
            y,
            value,
            grad: [0.0; 3],
            hess: [[0.0; 3]; 3],
        };
    }
    let j = barw_jet(y, 2);
    let mut grad = [0.0; 3];
    let mut hess = [[0.0; 3]; 3];
    for a in 0..3 {
        let mut g = [0usize; 3];
        g[a] = 1;
        grad[a] = j.derivative(g);
        for b in 0..3 {
            let mut g2 = [0usize; 3];
            g2[a] += 1;
            g2[b] += 1;
            hess[a][b] = j.derivative(g2);
        }
    }
    ProfilePoint {
        y,
        value: j.value(),
        grad,
        hess,
    }
}

/// Mixed derivative `∂^γ W̄(y)` for `|γ| ≤ 4`.
pub fn barw_derivative(y: [f64; 3], gamma: [usize; 3]) -> Result<f64> {
    let d = gamma[0] + gamma[1] + gamma[2];
    if d > 4 {
        return Err(ShockError::UnsupportedOrder(d));
    }
    Ok(barw_jet(y, d.max(1)).derivative(gamma))
}

/// Axis-aligned sampling box for profile certification.
#[derive(Clone, Debug)]
pub struct SampleBox {
    /// Half-widths along each axis.
    pub half: [f64; 3],
    /// Samples per axis (1 means the single coordinate 0).
    pub n: [usize; 3],
}

impl SampleBox {
    fn coord(&self, axis: usize, i: usize) -> f64 {
        if self.n[axis] <= 1 {
            0.0
        } else {
            -self.half[axis] + 2.0 * self.half[axis] * i as f64 / (self.n[axis] - 1) as f64
        }
    }
}

/// Names of the five certified weighted norms, in report order.
pub const PROFILE_BOUND_NAMES: [&str; 5] = [
    "eta^(-1/6)|W|",
    "eta^(1/3)|d1 W|",
    "|grad_perp W|",
    "eta^(1/3)|d1 grad W|",
    "eta^(1/6)|grad_perp^2 W|",
];

/// Result of a profile certification sweep.
#[derive(Clone, Debug)]
pub struct ProfileCertificate {
    /// Sampled suprema of the five weighted norms.
    pub sup: [f64; 5],
    /// Sample point where each supremum is attained.
    pub argmax: [[f64; 3]; 5],
    /// Number of samples evaluated.
    pub samples: usize,
}

impl ProfileCertificate {
    /// True when every norm is at most `1 + tol`.
    pub fn passes(&self, tol: f64) -> bool {
        self.sup.iter().all(|&v| v <= 1.0 + tol)
    }

    /// First failing bound, if any.
    pub fn first_failure(&self, tol: f64) -> Option<(usize, [f64; 3], f64)> {
        (0..5)
            .find(|&k| self.sup[k] > 1.0 + tol)
            .map(|k| (k, self.argmax[k], self.sup[k]))
    }
}

/// The five weighted quantities of the profile bounds at one point, for a
/// profile scaled by `scale` (1 for the standard profile).
pub fn weighted_profile_norms(y: [f64; 3], scale: f64) -> [f64; 5] {
    let p = eval_barw(y, true);
    let e = eta(y);
    let v = scale * p.value;
    let g = p.grad.map(|x| scale * x);
    let h = p.hess.map(|r| r.map(|x| scale * x));
    let perp = (g[1] * g[1] + g[2] * g[2]).sqrt();
    let d1grad = (h[0][0] * h[0][0] + h[0][1] * h[0][1] + h[0][2] * h[0][2]).sqrt();
    let perp2 =
        (h[1][1] * h[1][1] + h[1][2] * h[1][2] + h[2][1] * h[2][1] + h[2][2] * h[2][2]).sqrt();
    [
        e.powf(-1.0 / 6.0) * v.abs(),
        e.powf(1.0 / 3.0) * g[0].abs(),
        perp,
        e.powf(1.0 / 3.0) * d1grad,
        e.powf(1.0 / 6.0) * perp2,
    ]
}

/// Sampled suprema of the five weighted norms of `scale·W̄` over a box.
pub fn certify_scaled_profile(b: &SampleBox, scale: f64) -> ProfileCertificate {
    let mut sup = [0.0f64; 5];
    let mut argmax = [[0.0; 3]; 5];
    let mut samples = 0;
    for i in 0..b.n[0].max(1) {
        let y1 = b.coord(0, i);
        for j in 0..b.n[1].max(1) {
            let y2 = b.coord(1, j);
            for k in 0..b.n[2].max(1) {
                let y = [y1, y2, b.coord(2, k)];
                let v = weighted_profile_norms(y, scale);
                for q in 0..5 {
                    if v[q] > sup[q] {
                        sup[q] = v[q];
                        argmax[q] = y;
                    }
                }
                samples += 1;
            }
        }
    }
    ProfileCertificate {
        sup,
        argmax,
        samples,
    }
}

/// Sampled suprema of the five weighted norms of the standard profile.
pub fn certify_profile_bounds(b: &SampleBox) -> ProfileCertificate {
    certify_scaled_profile(b, 1.0)
}

/// Pointwise residual of the stationary self-similar Burgers equation
/// `-W/2 + (3y₁/2 + W)∂₁W + (y₂∂₂W + y₃∂₃W)/2` with grid derivatives.
pub fn selfsim_burgers_residual(field: &Field) -> Result<Field> {
    let g = field.grid;
    let d1 = derivative(field, 1, 1)?;
    let d2 = if g.dim >= 2 { Some(derivative(field, 2, 1)?) } else { None };
    let d3 = if g.dim >= 3 { Some(derivative(field, 3, 1)?) } else { None };
    let mut out = Field::zeros(g, "burgers_residual");
    for idx in 0..g.len() {
        let y = g.point(idx);
        let w = field.values[idx];
        let mut r = -0.5 * w + (1.5 * y[0] + w) * d1.values[idx];
        if let Some(d) = &d2 {
            r += 0.5 * y[1] * d.values[idx];
        }
        if let Some(d) = &d3 {
            r += 0.5 * y[2] * d.values[idx];
        }
        out.values[idx] = r;
    }
    Ok(out)
}

/// Residual of the same equation using the exact profile derivatives.
pub fn exact_burgers_residual(y: [f64; 3]) -> f64 {
    let p = eval_barw(y, true);
    -0.5 * p.value
        + (1.5 * y[0] + p.value) * p.grad[0]
        + 0.5 * (y[1] * p.grad[1] + y[2] * p.grad[2])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wstar_examples() {
        assert_eq!(eval_wstar(0.0), 0.0);
        assert!((eval_wstar(-2.0) - 1.0).abs() < 1e-15);
        assert!((eval_wstar(2.0) + 1.0).abs() < 1e-15);
        assert_eq!(eval_wstar_deriv(0.0, 1).unwrap(), -1.0);
        assert_eq!(eval_wstar_deriv(0.0, 2).unwrap(), 0.0);
        assert_eq!(eval_wstar_deriv(0.0, 3).unwrap(), 6.0);
        assert!(eval_wstar_deriv(0.0, 5).is_err());
    }

    #[test]
    fn implicit_derivatives_match_finite_differences() {
        for &y in &[-3.0, -0.7, 0.2, 1.3, 5.0] {
            let d = wstar_derivs(y);
            let h = 1e-3;
            for k in 1..=4 {
                let f = |x: f64| wstar_derivs(x)[k - 1];
                let fd = (-f(y + 2.0 * h) + 8.0 * f(y + h) - 8.0 * f(y - h) + f(y - 2.0 * h))
                    / (12.0 * h);
                assert!((fd - d[k]).abs() < 1e-8, "order {k} at {y}: {fd} vs {}", d[k]);
            }
        }
    }

    #[test]
    fn wstar_solves_ode() {
        for i in -50..=50 {
            let y = i as f64 * 0.37;
            let d = wstar_derivs(y);
            let r = -0.5 * d[0] + (1.5 * y + d[0]) * d[1];
            assert!(r.abs() < 1e-14, "residual {r} at {y}");
        }
    }

    #[test]
    fn barw_examples() {
        assert_eq!(eval_barw([0.0; 3], false).value, 0.0);
        let y = [-16.0, 3f64.sqrt(), 0.0];
        assert!((eval_barw(y, false).value - 2.0).abs() < 1e-14);
        let p = eval_barw([0.0; 3], true);
        assert_eq!(p.grad, [-1.0, 0.0, 0.0]);
        for r in p.hess {
            for v in r {
                assert!(v.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn third_derivative_tensor_at_origin() {
        let j = barw_jet([0.0; 3], 3);
        let diag = [
            j.derivative([3, 0, 0]),
            j.derivative([1, 2, 0]),
            j.derivative([1, 0, 2]),
        ];
        assert!((diag[0] - 6.0).abs() < 1e-12);
        assert!((diag[1] - 2.0).abs() < 1e-12);
        assert!((diag[2] - 2.0).abs() < 1e-12);
        assert!(j.derivative([1, 1, 1]).abs() < 1e-14);
        assert!(j.derivative([2, 1, 0]).abs() < 1e-14);
    }

    #[test]
    fn jet_gradient_matches_finite_differences() {
        let y = [0.8, -0.6, 1.1];
        let p = eval_barw(y, true);
        let h = 1e-4;
        for a in 0..3 {
            let mut yp = y;
            let mut ym = y;
            yp[a] += h;
            ym[a] -= h;
            let fd = (eval_barw(yp, false).value - eval_barw(ym, false).value) / (2.0 * h);
            assert!((fd - p.grad[a]).abs() < 1e-7);
            let fdg = (eval_barw(yp, true).grad[0] - eval_barw(ym, true).grad[0]) / (2.0 * h);
            assert!((fdg - p.hess[0][a]).abs() < 1e-7);
        }
    }

    #[test]
    fn exact_residual_vanishes() {
        for &y in &[[0.3, 0.2, -0.1], [5.0, 2.0, 1.0], [-7.0, 0.0, 3.0]] {
            assert!(exact_burgers_residual(y).abs() < 1e-13);
        }
    }

    #[test]
    fn certification_single_point_and_corruption() {
        let b = SampleBox {
            half: [0.0; 3],
            n: [1, 1, 1],
        };
        let c = certify_profile_bounds(&b);
        assert_eq!(c.sup[0], 0.0);
        assert_eq!(c.sup[1], 1.0);
        assert_eq!(c.sup[2], 0.0);
        let b = SampleBox {
            half: [10.0, 5.0, 5.0],
            n: [21, 11, 11],
        };
        let bad = certify_scaled_profile(&b, 1.5);
        assert_eq!(bad.first_failure(1e-12).map(|f| f.0), Some(0));
    }
}
