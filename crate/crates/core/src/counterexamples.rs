//! The degenerate trimers whose orbits are confined to 4-dimensional planes.
//!
//! With `φ(t) = F(t − b)` for an odd `F`, the periodic trimer forced at
//! particle 1 keeps `p₃ − p₂ = 0, q₃ − q₂ = 2b` (given `F(−3b) = 0`), and
//! the open trimer forced at particle 2 keeps `p₃ − p₁ = 0, q₃ − q₁ = −2b`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::control::ControlSignal;
use crate::error::{Error, Result};
use crate::integrate::{controlled_flow, IntegratorPolicy};
use crate::potential::{OddPolynomial, Potential};
use crate::state::State;
use crate::system::{LatticeConfig, LatticeSystem};

/// Pass threshold for plane residuals along a controlled run.
pub const RESIDUAL_TOL: f64 = 1e-7;

/// `⟨coeffs, (q, p)⟩ = offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub offset: f64,
}

/// An affine subspace of phase space cut out by independent constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub label: String,
    pub constraints: Vec<Constraint>,
}

impl Plane {
    pub fn new(label: impl Into<String>, constraints: Vec<Constraint>) -> Result<Self> {
        let dim = constraints.first().map_or(0, |c| c.coeffs.len());
        if constraints.iter().any(|c| c.coeffs.len() != dim) {
            return Err(Error::InvalidConfig("constraints have different lengths".into()));
        }
        if dim % 2 != 0 {
            return Err(Error::InvalidConfig("constraint length must be 2n".into()));
        }
        if !constraints.is_empty() {
            let m = DMatrix::from_fn(constraints.len(), dim, |i, j| constraints[i].coeffs[j]);
            let sv = m.svd(false, false).singular_values;
            let max = sv.max();
            if max == 0.0 || sv.iter().filter(|&&s| s > 1e-12 * max).count() < constraints.len() {
                return Err(Error::InvalidConfig("plane constraints are linearly dependent".into()));
            }
        }
        Ok(Self {
            label: label.into(),
            constraints,
        })
    }

    /// `Σ_k a_k x_k = offset` from sparse `(flat index, coefficient)` terms.
    fn sparse(n: usize, terms: &[(usize, f64)], offset: f64) -> Constraint {
        let mut coeffs = vec![0.0; 2 * n];
        for &(i, a) in terms {
            coeffs[i] += a;
        }
        Constraint { coeffs, offset }
    }

    /// The zero-momentum hyperplane `Σ p = 0`.
    pub fn zero_momentum(n: usize) -> Self {
        let terms: Vec<(usize, f64)> = (n..2 * n).map(|i| (i, 1.0)).collect();
        Self {
            label: "zero momentum".into(),
            constraints: vec![Self::sparse(n, &terms, 0.0)],
        }
    }

    /// `Σ p = 0, Σ q = total`.
    pub fn momentum_slice(n: usize, total: f64) -> Self {
        let mut plane = Self::zero_momentum(n);
        let terms: Vec<(usize, f64)> = (0..n).map(|i| (i, 1.0)).collect();
        plane.constraints.push(Self::sparse(n, &terms, total));
        plane.label = format!("zero momentum, sum q = {total}");
        plane
    }

    /// Codimension.
    pub fn codim(&self) -> usize {
        self.constraints.len()
    }

    pub fn residual(&self, x: &State) -> f64 {
        let flat = x.to_flat();
        self.constraints
            .iter()
            .map(|c| {
                let v: f64 = c.coeffs.iter().zip(&flat).map(|(a, b)| a * b).sum();
                (v - c.offset).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Periodic trimer forced at particle 1 with `φ(t) = F(t − b)`, and the
/// plane `p₃ − p₂ = 0, q₃ − q₂ = 2b`. Requires `F(−3b) = 0`.
pub fn build_periodic_degenerate_trimer(force: &OddPolynomial, b: f64) -> Result<(LatticeSystem, Plane)> {
    let at = force.eval(-3.0 * b);
    if at.abs() > 1e-10 {
        return Err(Error::NotInvariant(format!(
            "F(-3b) = {at:e} must vanish for the plane to be invariant"
        )));
    }
    let sys = LatticeSystem::new(
        LatticeConfig::periodic(3).with_sites(vec![1]),
        Potential::shifted_odd(force, b, 0.0),
    )?;
    let plane = Plane::new(
        format!("p3 - p2 = 0, q3 - q2 = {}", 2.0 * b),
        vec![
            Plane::sparse(3, &[(5, 1.0), (4, -1.0)], 0.0),
            Plane::sparse(3, &[(2, 1.0), (1, -1.0)], 2.0 * b),
        ],
    )?;
    Ok((sys, plane))
}

/// Open trimer forced at particle 2 with `φ(t) = F(t − b)`, and the plane
/// `q₃ − q₁ = −2b, p₃ − p₁ = 0`.
pub fn build_nonperiodic_trimer(force: &OddPolynomial, b: f64) -> Result<(LatticeSystem, Plane)> {
    let sys = LatticeSystem::new(
        LatticeConfig::open(3).with_sites(vec![2]),
        Potential::shifted_odd(force, b, 0.0),
    )?;
    let plane = Plane::new(
        format!("q3 - q1 = {}, p3 - p1 = 0", -2.0 * b),
        vec![
            Plane::sparse(3, &[(2, 1.0), (0, -1.0)], -2.0 * b),
            Plane::sparse(3, &[(5, 1.0), (3, -1.0)], 0.0),
        ],
    )?;
    Ok((sys, plane))
}

/// Largest plane residual over the trajectory driven by `u` (cut or
/// zero-padded to `horizon`) from a point `x0` of the plane.
pub fn invariant_plane_residual(
    sys: &LatticeSystem,
    plane: &Plane,
    x0: &State,
    u: &ControlSignal,
    horizon: f64,
    policy: &IntegratorPolicy,
) -> Result<f64> {
    let start = plane.residual(x0);
    if start >= 1e-12 {
        return Err(Error::Precondition(format!(
            "initial state is off the plane (residual {start:e})"
        )));
    }
    if !(horizon > 0.0) {
        return Ok(start);
    }
    let traj = controlled_flow(x0, &u.fitted_to(horizon), sys, policy)?;
    Ok(traj
        .states
        .iter()
        .map(|s| plane.residual(s))
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub case: String,
    pub system: LatticeSystem,
    pub plane: Plane,
    pub initial: State,
    pub signal: ControlSignal,
    pub horizon: f64,
    pub residual: f64,
    pub threshold: f64,
    /// Whether the run behaved as the case predicts (stayed on the plane,
    /// or, for a negative control, left it).
    pub pass: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic() -> OddPolynomial {
        OddPolynomial::from_odd_terms(0.0, 1.0, 0.0)
    }

    #[test]
    fn periodic_quartic_plane() {
        let (sys, plane) = build_periodic_degenerate_trimer(&cubic(), 0.0).unwrap();
        assert!((sys.potential.value(2.0) - 4.0).abs() < 1e-12);
        let x0 = State::new(vec![0.5, -0.2, -0.2], vec![0.1, 0.3, 0.3]).unwrap();
        assert_eq!(plane.residual(&x0), 0.0);
        let u = ControlSignal::steps(1, &[(2.0, 1.0), (3.0, -0.5), (5.0, 0.25)]);
        let r = invariant_plane_residual(&sys, &plane, &x0, &u, 10.0, &IntegratorPolicy::default()).unwrap();
        assert!(r < RESIDUAL_TOL, "{r}");
    }

    #[test]
    fn f_must_vanish_at_minus_three_b() {
        let linear = OddPolynomial::from_odd_terms(1.0, 0.0, 0.0);
        assert!(matches!(
            build_periodic_degenerate_trimer(&linear, 0.5),
            Err(Error::NotInvariant(_))
        ));
        assert!(OddPolynomial::new(vec![0.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn open_trimer_plane_offset() {
        let (sys, plane) = build_nonperiodic_trimer(&cubic(), 0.5).unwrap();
        assert_eq!(sys.control_sites(), &[2]);
        let x0 = State::new(vec![0.0, 0.3, -1.0], vec![0.2, -0.1, 0.2]).unwrap();
        assert_eq!(plane.residual(&x0), 0.0);
        let u = ControlSignal::steps(2, &[(1.0, 0.7), (1.0, -2.0)]);
        let r = invariant_plane_residual(&sys, &plane, &x0, &u, 5.0, &IntegratorPolicy::default()).unwrap();
        assert!(r < RESIDUAL_TOL, "{r}");
    }

    #[test]
    fn dependent_constraints_rejected() {
        let c = Constraint {
            coeffs: vec![1.0, 0.0, 0.0, 0.0],
            offset: 0.0,
        };
        assert!(Plane::new("bad", vec![c.clone(), c]).is_err());
    }
}
