//! Truncated univariate Taylor series ("jets").
//!
//! A jet of order `K` stores the coefficients `c[0..=K]` of
//! `c[0] + c[1] t + ... + c[K] t^K`. Products and the exponential are
//! truncated at the same order, which is all the bracket series need.

use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub c: Vec<f64>,
}

impl Jet {
    pub fn constant(value: f64, order: usize) -> Self {
        let mut c = vec![0.0; order + 1];
        c[0] = value;
        Self { c }
    }

    pub fn zero(order: usize) -> Self {
        Self {
            c: vec![0.0; order + 1],
        }
    }

    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            c: self.c.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add_scalar(&self, s: f64) -> Jet {
        let mut out = self.clone();
        out.c[0] += s;
        out
    }

    /// `exp` via the recurrence `k e_k = sum_{j=1..k} j a_j e_{k-j}`.
    pub fn exp(&self) -> Jet {
        let k_max = self.order();
        let mut e = vec![0.0; k_max + 1];
        e[0] = self.c[0].exp();
        for k in 1..=k_max {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += j as f64 * self.c[j] * e[k - j];
            }
            e[k] = acc / k as f64;
        }
        Jet { c: e }
    }

    /// Horner evaluation of `sum coeffs[i] * self^i`.
    pub fn polynomial(&self, coeffs: &[f64]) -> Jet {
        let order = self.order();
        let mut acc = Jet::zero(order);
        for &a in coeffs.iter().rev() {
            acc = &acc * self;
            acc.c[0] += a;
        }
        acc
    }
}

impl<'a> Mul<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn mul(self, rhs: &'a Jet) -> Jet {
        let n = self.c.len().min(rhs.c.len());
        let mut c = vec![0.0; n];
        for (i, ci) in c.iter_mut().enumerate() {
            let mut acc = 0.0;
            for j in 0..=i {
                acc += self.c[j] * rhs.c[i - j];
            }
            *ci = acc;
        }
        Jet { c }
    }
}

impl<'a> Add<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn add(self, rhs: &'a Jet) -> Jet {
        Jet {
            c: self.c.iter().zip(&rhs.c).map(|(a, b)| a + b).collect(),
        }
    }
}

impl<'a> Sub<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn sub(self, rhs: &'a Jet) -> Jet {
        Jet {
            c: self.c.iter().zip(&rhs.c).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_of_linear_matches_series() {
        // exp(2t) = sum (2t)^k / k!
        let t = Jet { c: vec![0.0, 2.0, 0.0, 0.0, 0.0] };
        let e = t.exp();
        let mut fact = 1.0;
        for k in 0..5 {
            if k > 0 {
                fact *= k as f64;
            }
            assert!((e.c[k] - 2f64.powi(k as i32) / fact).abs() < 1e-14);
        }
    }

    #[test]
    fn polynomial_of_shifted_variable() {
        // (1 + t)^3 = 1 + 3t + 3t^2 + t^3
        let x = Jet { c: vec![1.0, 1.0, 0.0, 0.0] };
        let p = x.polynomial(&[0.0, 0.0, 0.0, 1.0]);
        assert_eq!(p.c, vec![1.0, 3.0, 3.0, 1.0]);
    }
}
