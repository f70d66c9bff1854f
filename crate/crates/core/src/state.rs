use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A phase-space point: positions `q` and momenta `p` (unit masses).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl State {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if q.len() != p.len() {
            return Err(Error::DimensionMismatch {
                expected: q.len(),
                got: p.len(),
            });
        }
        if q.iter().chain(&p).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { time: 0.0 });
        }
        Ok(Self { q, p })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            q: vec![0.0; n],
            p: vec![0.0; n],
        }
    }

    /// Builds a state from the flat layout `[q_1..q_n, p_1..p_n]`.
    pub fn from_flat(x: &[f64]) -> Self {
        let n = x.len() / 2;
        Self {
            q: x[..n].to_vec(),
            p: x[n..].to_vec(),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(2 * self.n());
        x.extend_from_slice(&self.q);
        x.extend_from_slice(&self.p);
        x
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    /// Total momentum `P = sum p_k`.
    pub fn total_momentum(&self) -> f64 {
        self.p.iter().sum()
    }

    /// Total position `Q = sum q_k`.
    pub fn total_position(&self) -> f64 {
        self.q.iter().sum()
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(&self.p).all(|v| v.is_finite())
    }

    /// Euclidean distance on `(q, p)`.
    pub fn distance(&self, other: &State) -> f64 {
        self.q
            .iter()
            .zip(&other.q)
            .chain(self.p.iter().zip(&other.p))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn norm(&self) -> f64 {
        self.q.iter().chain(&self.p).map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// A tangent vector in the flat layout `[dq_1..dq_n, dp_1..dp_n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentVector(pub Vec<f64>);

impl TangentVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; 2 * n])
    }

    pub fn n(&self) -> usize {
        self.0.len() / 2
    }

    pub fn q(&self) -> &[f64] {
        &self.0[..self.n()]
    }

    pub fn p(&self) -> &[f64] {
        &self.0[self.n()..]
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}
