//! Truncated multivariate Taylor polynomials in three variables.
//!
//! A [`Jet`] stores the Taylor coefficients of a smooth function around a
//! base point up to total degree four.  Arithmetic on jets propagates every
//! partial derivative exactly (up to rounding), which lets the profile module
//! evaluate mixed derivatives of composite expressions without finite
//! differences.

use std::sync::OnceLock;

/// Largest supported total degree.
pub const MAX_DEGREE: usize = 4;
const NTERMS: usize = 35;

struct Tables {
    monos: Vec<[usize; 3]>,
    index: [[[usize; 5]; 5]; 5],
    count_upto: [usize; MAX_DEGREE + 1],
    pairs: Vec<Vec<(usize, usize, usize)>>,
}

fn tables() -> &'static Tables {
    static T: OnceLock<Tables> = OnceLock::new();
    T.get_or_init(|| {
        let mut monos = Vec::with_capacity(NTERMS);
        let mut index = [[[usize::MAX; 5]; 5]; 5];
        let mut count_upto = [0; MAX_DEGREE + 1];
        for d in 0..=MAX_DEGREE {
            for a in (0..=d).rev() {
                for b in (0..=(d - a)).rev() {
                    let c = d - a - b;
                    index[a][b][c] = monos.len();
                    monos.push([a, b, c]);
                }
            }
            count_upto[d] = monos.len();
        }
        let mut pairs = Vec::with_capacity(MAX_DEGREE + 1);
        for d in 0..=MAX_DEGREE {
            let mut list = Vec::new();
            for (i, mi) in monos.iter().enumerate().take(count_upto[d]) {
                for (j, mj) in monos.iter().enumerate().take(count_upto[d]) {
                    let s = [mi[0] + mj[0], mi[1] + mj[1], mi[2] + mj[2]];
                    if s[0] + s[1] + s[2] <= d {
                        list.push((i, j, index[s[0]][s[1]][s[2]]));
                    }
                }
            }
            pairs.push(list);
        }
        Tables {
            monos,
            index,
            count_upto,
            pairs,
        }
    })
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Truncated Taylor polynomial of total degree at most `degree`.
#[derive(Clone, Debug)]
pub struct Jet {
    coef: [f64; NTERMS],
    degree: usize,
}

impl Jet {
    /// Constant jet.
    pub fn constant(value: f64, degree: usize) -> Self {
        assert!(degree <= MAX_DEGREE, "jet degree above {MAX_DEGREE}");
        let mut coef = [0.0; NTERMS];
        coef[0] = value;
        Jet { coef, degree }
    }

    /// The coordinate function `y_axis` expanded around `value` (axis in 0..3).
    pub fn variable(value: f64, axis: usize, degree: usize) -> Self {
        let mut j = Jet::constant(value, degree);
        if degree >= 1 {
            let mut m = [0usize; 3];
            m[axis] = 1;
            j.coef[tables().index[m[0]][m[1]][m[2]]] = 1.0;
        }
        j
    }

    /// Total degree of truncation.
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Value at the base point.
    pub fn value(&self) -> f64 {
        self.coef[0]
    }

    /// Partial derivative `∂^γ` at the base point, `γ = (g1, g2, g3)`.
    pub fn derivative(&self, gamma: [usize; 3]) -> f64 {
        let d = gamma[0] + gamma[1] + gamma[2];
        assert!(d <= self.degree, "derivative order exceeds jet degree");
        let k = tables().index[gamma[0]][gamma[1]][gamma[2]];
        self.coef[k] * factorial(gamma[0]) * factorial(gamma[1]) * factorial(gamma[2])
    }

    fn nterms(&self) -> usize {
        tables().count_upto[self.degree]
    }

    /// Sum of two jets.
    pub fn add(&self, other: &Jet) -> Jet {
        let mut out = self.clone();
        for k in 0..self.nterms() {
            out.coef[k] += other.coef[k];
        }
        out
    }

    /// Jet multiplied by a scalar.
    pub fn scale(&self, a: f64) -> Jet {
        let mut out = self.clone();
        for k in 0..self.nterms() {
            out.coef[k] *= a;
        }
        out
    }

    /// Truncated product of two jets of equal degree.
    pub fn mul(&self, other: &Jet) -> Jet {
        debug_assert_eq!(self.degree, other.degree);
        let mut out = Jet::constant(0.0, self.degree);
        for &(i, j, k) in &tables().pairs[self.degree] {
            out.coef[k] += self.coef[i] * other.coef[j];
        }
        out
    }

    /// Composition `f ∘ self` for a univariate `f` given its derivatives
    /// `f^(k)` at the base value, `k = 0..=degree`.
    pub fn compose(&self, derivs: &[f64]) -> Jet {
        assert!(derivs.len() > self.degree, "not enough derivatives for composition");
        let mut h = self.clone();
        h.coef[0] = 0.0;
        let d = self.degree;
        let mut r = Jet::constant(derivs[d] / factorial(d), d);
        for k in (0..d).rev() {
            r = r.mul(&h);
            r.coef[0] += derivs[k] / factorial(k);
        }
        r
    }

    /// Power `self^p` for a positive base value.
    pub fn powf(&self, p: f64) -> Jet {
        let x = self.value();
        let mut derivs = vec![0.0; self.degree + 1];
        let mut c = 1.0;
        for (k, d) in derivs.iter_mut().enumerate() {
            *d = c * x.powf(p - k as f64);
            c *= p - k as f64;
        }
        self.compose(&derivs)
    }

    /// Multi-index of coefficient slot `k` (for iteration in tests).
    pub fn monomial(k: usize) -> [usize; 3] {
        tables().monos[k]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule_on_polynomials() {
        let x = Jet::variable(0.5, 0, 4);
        let y = Jet::variable(-1.5, 1, 4);
        let p = x.mul(&x).mul(&y);
        assert!((p.value() - 0.25 * -1.5).abs() < 1e-15);
        assert!((p.derivative([2, 1, 0]) - 2.0).abs() < 1e-15);
        assert!((p.derivative([1, 1, 0]) - 1.0).abs() < 1e-15);
        assert!(p.derivative([3, 0, 0]).abs() < 1e-15);
    }

    #[test]
    fn composition_matches_exponential() {
        let x = Jet::variable(0.3, 2, 4);
        let e = x.scale(2.0);
        let v = (0.6f64).exp();
        let d: Vec<f64> = (0..5).map(|k| 2f64.powi(0) * v * 1.0f64.powi(k)).collect();
        let ex = e.compose(&d);
        for k in 0..=4 {
            let expected = v * 2f64.powi(k as i32);
            assert!((ex.derivative([0, 0, k]) - expected).abs() < 1e-12 * expected);
        }
    }

    #[test]
    fn power_matches_closed_form() {
        let x = Jet::variable(2.0, 0, 3).add(&Jet::constant(1.0, 3));
        let p = x.powf(-1.5);
        assert!((p.value() - 3f64.powf(-1.5)).abs() < 1e-15);
        assert!((p.derivative([1, 0, 0]) + 1.5 * 3f64.powf(-2.5)).abs() < 1e-15);
        assert!((p.derivative([2, 0, 0]) - 3.75 * 3f64.powf(-3.5)).abs() < 1e-15);
    }
}
