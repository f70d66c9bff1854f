//! Reverse-time flows, for verification only.
//!
//! The steering pipeline never executes these: plans contain forward flows
//! exclusively. They exist so tests (and the distance checks of
//! [`crate::steering::reverse_flow_approx`]) can compute `e^{-tf}(x)`.

use crate::control::ControlSignal;
use crate::error::{Error, Result};
use crate::integrate::{controlled_flow_backward, IntegratorPolicy};
use crate::state::State;
use crate::system::LatticeSystem;

/// `e^{-tf}(x)` for `t >= 0`.
pub fn reverse_free_flow(state: &State, t: f64, sys: &LatticeSystem, policy: &IntegratorPolicy) -> Result<State> {
    if !(t >= 0.0) {
        return Err(Error::Precondition(format!("reverse duration must be nonnegative, got {t}")));
    }
    if t == 0.0 {
        return Ok(state.clone());
    }
    controlled_flow_backward(state, &ControlSignal::zero(sys, t), sys, policy)
}

/// The point from which `signal` drives the system to `end`.
pub fn reverse_controlled_flow(
    end: &State,
    signal: &ControlSignal,
    sys: &LatticeSystem,
    policy: &IntegratorPolicy,
) -> Result<State> {
    controlled_flow_backward(end, signal, sys, policy)
}
