//! Pair interaction potentials `Φ` and their derivatives.
//!
//! Every builtin is either an exponential `A e^{r t}` or a polynomial in
//! `t - center`; both admit closed-form derivatives of any order and exact
//! evaluation on [`Jet`]s.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::Jet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialKind {
    Toda,
    Harmonic,
    Quartic,
    ShiftedOdd,
    Polynomial,
}

impl PotentialKind {
    pub fn name(&self) -> &'static str {
        match self {
            PotentialKind::Toda => "toda",
            PotentialKind::Harmonic => "harmonic",
            PotentialKind::Quartic => "quartic",
            PotentialKind::ShiftedOdd => "shifted-odd",
            PotentialKind::Polynomial => "polynomial",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum Shape {
    /// `Φ(t) = amplitude * exp(rate * t)`
    Exponential { amplitude: f64, rate: f64 },
    /// `Φ(t) = sum coeffs[k] * (t - center)^k`
    Polynomial { center: f64, coeffs: Vec<f64> },
}

/// An odd polynomial `F(t) = a1 t + a3 t^3 + ...`, stored densely by degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddPolynomial {
    coeffs: Vec<f64>,
}

impl OddPolynomial {
    /// Fails with [`Error::NotOdd`] if any even-degree coefficient is nonzero.
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        for (degree, &value) in coeffs.iter().enumerate() {
            if degree % 2 == 0 && value != 0.0 {
                return Err(Error::NotOdd { degree, value });
            }
        }
        Ok(Self { coeffs })
    }

    /// Convenience for `a1 t + a3 t^3 + a5 t^5`.
    pub fn from_odd_terms(a1: f64, a3: f64, a5: f64) -> Self {
        Self {
            coeffs: vec![0.0, a1, 0.0, a3, 0.0, a5],
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &a| acc * t + a)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&a| a == 0.0)
    }

    /// The even primitive `G` with `G' = F` and `G(0) = 0`.
    fn primitive(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.coeffs.len() + 1];
        for (k, &a) in self.coeffs.iter().enumerate() {
            out[k + 1] = a / (k + 1) as f64;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub kind: PotentialKind,
    pub shape: Shape,
    /// Declared `B >= 0` with `Φ(y) >= -B` everywhere, when known.
    pub lower_bound: Option<f64>,
    /// Whether `Φ(y) -> +inf` as `y -> +inf`.
    pub grows: bool,
    pub params: BTreeMap<String, f64>,
}

impl Potential {
    /// The Toda interaction `Φ(x) = e^{2x}`.
    pub fn toda() -> Self {
        Self {
            kind: PotentialKind::Toda,
            shape: Shape::Exponential {
                amplitude: 1.0,
                rate: 2.0,
            },
            lower_bound: Some(0.0),
            grows: true,
            params: BTreeMap::new(),
        }
    }

    /// `Φ(t) = t^2 / 2`
    pub fn harmonic() -> Self {
        Self {
            kind: PotentialKind::Harmonic,
            shape: Shape::Polynomial {
                center: 0.0,
                coeffs: vec![0.0, 0.0, 0.5],
            },
            lower_bound: Some(0.0),
            grows: true,
            params: BTreeMap::new(),
        }
    }

    /// `Φ(t) = t^4 / 4`
    pub fn quartic() -> Self {
        Self {
            kind: PotentialKind::Quartic,
            shape: Shape::Polynomial {
                center: 0.0,
                coeffs: vec![0.0, 0.0, 0.0, 0.0, 0.25],
            },
            lower_bound: Some(0.0),
            grows: true,
            params: BTreeMap::new(),
        }
    }

    /// Potential whose force is `φ(t) = F(t - b) + offset` with `F` odd, so
    /// that `φ'` is even about `b`.
    pub fn shifted_odd(force: &OddPolynomial, shift: f64, offset: f64) -> Self {
        // Φ(t) = G(s) + offset * (s + shift), s = t - shift
        let mut coeffs = force.primitive();
        if coeffs.len() < 2 {
            coeffs.resize(2, 0.0);
        }
        coeffs[0] += offset * shift;
        coeffs[1] += offset;
        let mut params = BTreeMap::new();
        params.insert("b".to_string(), shift);
        params.insert("offset".to_string(), offset);
        for (k, &a) in force.coeffs().iter().enumerate() {
            if k % 2 == 1 {
                params.insert(format!("a{k}"), a);
            }
        }
        let grows = polynomial_grows(&coeffs);
        Self {
            kind: PotentialKind::ShiftedOdd,
            shape: Shape::Polynomial {
                center: shift,
                coeffs,
            },
            lower_bound: None,
            grows,
            params,
        }
    }

    /// A general polynomial `Φ(t) = sum coeffs[k] (t - center)^k`.
    pub fn polynomial(coeffs: Vec<f64>, center: f64) -> Self {
        let mut params = BTreeMap::new();
        params.insert("center".to_string(), center);
        for (k, &a) in coeffs.iter().enumerate() {
            params.insert(format!("c{k}"), a);
        }
        let grows = polynomial_grows(&coeffs);
        Self {
            kind: PotentialKind::Polynomial,
            shape: Shape::Polynomial { center, coeffs },
            lower_bound: None,
            grows,
            params,
        }
    }

    pub fn with_lower_bound(mut self, bound: f64) -> Self {
        self.lower_bound = Some(bound);
        self
    }

    /// `Φ^{(order)}(t)`.
    pub fn derivative(&self, order: usize, t: f64) -> f64 {
        match &self.shape {
            Shape::Exponential { amplitude, rate } => {
                amplitude * rate.powi(order as i32) * (rate * t).exp()
            }
            Shape::Polynomial { center, coeffs } => {
                let d = differentiate(coeffs, order);
                let s = t - center;
                d.iter().rev().fold(0.0, |acc, &a| acc * s + a)
            }
        }
    }

    /// `Φ^{(order)}` evaluated on a jet.
    pub fn derivative_jet(&self, order: usize, t: &Jet) -> Jet {
        match &self.shape {
            Shape::Exponential { amplitude, rate } => t
                .scale(*rate)
                .exp()
                .scale(amplitude * rate.powi(order as i32)),
            Shape::Polynomial { center, coeffs } => {
                let d = differentiate(coeffs, order);
                t.add_scalar(-center).polynomial(&d)
            }
        }
    }

    /// `Φ(t)`
    pub fn value(&self, t: f64) -> f64 {
        self.derivative(0, t)
    }

    /// The force law `φ = Φ'`.
    pub fn phi(&self, t: f64) -> f64 {
        self.derivative(1, t)
    }

    /// `φ' = Φ''`
    pub fn phi_prime(&self, t: f64) -> f64 {
        self.derivative(2, t)
    }

    /// `φ'' = Φ'''`
    pub fn phi_second(&self, t: f64) -> f64 {
        self.derivative(3, t)
    }

    /// Stiffness `k` when the force is affine, `φ(t) = k t + const`.
    pub fn linear_stiffness(&self) -> Option<f64> {
        match &self.shape {
            Shape::Polynomial { coeffs, .. } => {
                if coeffs.iter().skip(3).all(|&a| a == 0.0) {
                    Some(2.0 * coeffs.get(2).copied().unwrap_or(0.0))
                } else {
                    None
                }
            }
            Shape::Exponential { .. } => None,
        }
    }

    /// Builtins known to be convex, for which the minimum of the periodic
    /// bond sum under `sum of bonds = 0` is `n Φ(0)`.
    pub fn is_known_convex(&self) -> bool {
        matches!(
            self.kind,
            PotentialKind::Toda | PotentialKind::Harmonic | PotentialKind::Quartic
        )
    }
}

fn differentiate(coeffs: &[f64], order: usize) -> Vec<f64> {
    let mut d = coeffs.to_vec();
    for _ in 0..order {
        if d.len() <= 1 {
            return vec![0.0];
        }
        d = d
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &a)| k as f64 * a)
            .collect();
    }
    if d.is_empty() {
        d.push(0.0);
    }
    d
}

fn polynomial_grows(coeffs: &[f64]) -> bool {
    match coeffs.iter().rposition(|&a| a != 0.0) {
        Some(deg) if deg >= 1 => coeffs[deg] > 0.0,
        _ => false,
    }
}
