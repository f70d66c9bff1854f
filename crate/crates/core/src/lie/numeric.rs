//! Vector-field handles and finite-difference Lie brackets.
//!
//! Brackets follow `[X, Y] = DY·X − DX·Y`, so `[f, g] = −∂/∂q_1` for the
//! drift `f` and `g = ∂/∂p_1`.

use std::fmt;
use std::sync::Arc;

use crate::dynamics::drift_flat;
use crate::error::{Error, Result};
use crate::state::{State, TangentVector};
use crate::system::LatticeSystem;

type FieldFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// Finite-difference stencil used for directional derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stencil {
    /// Two-point central difference, error `O(h²)`.
    #[default]
    Central,
    /// Four-point central difference, error `O(h⁴)`.
    Central4,
}

/// Step rule for nested numeric brackets: `h = scale · (1 + ‖x‖)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRule {
    pub scale: f64,
    pub stencil: Stencil,
}

impl Default for StepRule {
    fn default() -> Self {
        Self {
            scale: 1e-4,
            stencil: Stencil::Central,
        }
    }
}

impl StepRule {
    /// Four-point rule with a larger step, for brackets nested two or more
    /// levels deep where the two-point rule amplifies roundoff.
    pub fn nested() -> Self {
        Self {
            scale: 3e-3,
            stencil: Stencil::Central4,
        }
    }

    pub fn step_at(&self, x: &[f64]) -> f64 {
        self.scale * (1.0 + norm(x))
    }
}

/// A labelled vector field on the flat `(q, p)` state space.
#[derive(Clone)]
pub struct VectorField {
    label: String,
    eval: Arc<FieldFn>,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField").field("label", &self.label).finish()
    }
}

impl VectorField {
    pub fn new<F>(label: impl Into<String>, eval: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self {
            label: label.into(),
            eval: Arc::new(eval),
        }
    }

    /// The drift `f` of `sys`.
    pub fn drift(sys: &LatticeSystem) -> Self {
        let sys = sys.clone();
        Self::new("f", move |x| drift_flat(x, &sys))
    }

    /// `g = ∂/∂p_site`.
    pub fn control(site: usize, sys: &LatticeSystem) -> Result<Self> {
        let v = crate::dynamics::control_field(site, sys)?;
        let label = if sys.control_sites().len() == 1 {
            "g".to_string()
        } else {
            format!("g{site}")
        };
        Ok(Self::constant(label, v))
    }

    pub fn constant(label: impl Into<String>, v: TangentVector) -> Self {
        Self::new(label, move |_| v.0.clone())
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval_flat(&self, x: &[f64]) -> Vec<f64> {
        (self.eval)(x)
    }

    pub fn eval(&self, x: &State) -> Result<TangentVector> {
        let v = self.eval_flat(&x.to_flat());
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite { time: 0.0 });
        }
        Ok(TangentVector(v))
    }

    /// The field `x ↦ [self, other](x)` estimated by finite differences.
    pub fn bracket(&self, other: &VectorField, rule: StepRule) -> VectorField {
        let x_field = self.clone();
        let y_field = other.clone();
        let label = format!("[{},{}]", self.label, other.label);
        Self::new(label, move |x| {
            bracket_flat(&x_field, &y_field, x, rule.step_at(x), rule.stencil)
        })
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// `DY(x)·v` by central differences along the unit direction of `v`.
fn directional(y: &VectorField, x: &[f64], v: &[f64], h: f64, stencil: Stencil) -> Vec<f64> {
    let len = norm(v);
    if len == 0.0 {
        return vec![0.0; x.len()];
    }
    let at = |s: f64| {
        let pt: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + s * h * b / len).collect();
        y.eval_flat(&pt)
    };
    match stencil {
        Stencil::Central => {
            let (plus, minus) = (at(1.0), at(-1.0));
            plus.iter()
                .zip(&minus)
                .map(|(a, b)| len * (a - b) / (2.0 * h))
                .collect()
        }
        Stencil::Central4 => {
            let (p1, m1, p2, m2) = (at(1.0), at(-1.0), at(2.0), at(-2.0));
            (0..p1.len())
                .map(|i| len * (8.0 * (p1[i] - m1[i]) - (p2[i] - m2[i])) / (12.0 * h))
                .collect()
        }
    }
}

fn bracket_flat(x_field: &VectorField, y_field: &VectorField, x: &[f64], h: f64, stencil: Stencil) -> Vec<f64> {
    let xv = x_field.eval_flat(x);
    let yv = y_field.eval_flat(x);
    let dy_x = directional(y_field, x, &xv, h, stencil);
    let dx_y = directional(x_field, x, &yv, h, stencil);
    dy_x.iter().zip(&dx_y).map(|(a, b)| a - b).collect()
}

/// `[X, Y](x) = DY·X − DX·Y` by central differences with step `h`.
pub fn numeric_bracket(x_field: &VectorField, y_field: &VectorField, x: &State, h: f64) -> Result<TangentVector> {
    numeric_bracket_with(x_field, y_field, x, h, Stencil::Central)
}

pub fn numeric_bracket_with(
    x_field: &VectorField,
    y_field: &VectorField,
    x: &State,
    h: f64,
    stencil: Stencil,
) -> Result<TangentVector> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Precondition(format!("difference step must be positive, got {h}")));
    }
    let v = bracket_flat(x_field, y_field, &x.to_flat(), h, stencil);
    if v.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite { time: 0.0 });
    }
    Ok(TangentVector(v))
}
