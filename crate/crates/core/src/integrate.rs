//! Fixed-step symplectic integration of free and controlled motion.
//!
//! The Hamiltonian is separable, so every step is a kick–drift–kick
//! Störmer–Verlet splitting. The default policy composes three Verlet
//! substeps (Yoshida's fourth-order triple jump); plain Verlet is kept for
//! comparison. A constant control enters the kicks as an extra force.

use serde::{Deserialize, Serialize};

use crate::control::{ControlSignal, Piece};
use crate::dynamics::forces_into;
use crate::error::{Error, Result};
use crate::state::State;
use crate::system::LatticeSystem;
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Second-order Störmer–Verlet.
    Verlet,
    /// Fourth-order composition of three Verlet substeps.
    Yoshida4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorPolicy {
    pub method: Method,
    /// Nominal step; each constant-control piece is split into equal steps
    /// no longer than this.
    pub dt: f64,
    /// Record a trajectory sample every this many steps (piece ends are
    /// always recorded).
    pub record_every: usize,
    /// Optional symmetric clamp on control magnitudes. `None` is unbounded.
    pub control_clamp: Option<f64>,
}

impl Default for IntegratorPolicy {
    fn default() -> Self {
        Self {
            method: Method::Yoshida4,
            dt: 1e-3,
            record_every: 10,
            control_clamp: None,
        }
    }
}

impl IntegratorPolicy {
    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_record_every(mut self, every: usize) -> Self {
        self.record_every = every.max(1);
        self
    }

    pub(crate) fn steps_for(&self, duration: f64) -> usize {
        ((duration / self.dt) - 1e-9).ceil().max(1.0) as usize
    }
}

const YOSHIDA_W1: f64 = 1.351_207_191_959_657_8; // 1 / (2 - 2^{1/3})
const YOSHIDA_W0: f64 = -1.702_414_383_919_315_3; // -2^{1/3} / (2 - 2^{1/3})

/// Scratch space for stepping one system.
pub(crate) struct Stepper<'a> {
    sys: &'a LatticeSystem,
    method: Method,
    force: Vec<f64>,
    ext: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(sys: &'a LatticeSystem, method: Method) -> Self {
        let n = sys.n();
        Self {
            sys,
            method,
            force: vec![0.0; n],
            ext: vec![0.0; n],
        }
    }

    /// Sets the external force from values ordered like the control sites.
    pub fn set_controls(&mut self, values: &[f64]) {
        self.ext.iter_mut().for_each(|v| *v = 0.0);
        for (&site, &u) in self.sys.control_sites().iter().zip(values) {
            self.ext[site - 1] += u;
        }
    }

    pub fn clear_controls(&mut self) {
        self.ext.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Must be called whenever `q` changed outside of [`Self::step`].
    pub fn prime(&mut self, q: &[f64]) {
        forces_into(q, self.sys, &mut self.force);
    }

    #[inline]
    fn verlet(&mut self, q: &mut [f64], p: &mut [f64], h: f64) {
        let half = 0.5 * h;
        for k in 0..q.len() {
            p[k] += half * (self.force[k] + self.ext[k]);
            q[k] += h * p[k];
        }
        forces_into(q, self.sys, &mut self.force);
        for k in 0..q.len() {
            p[k] += half * (self.force[k] + self.ext[k]);
        }
    }

    /// One step of size `h` (negative `h` runs time backwards exactly for
    /// these symmetric schemes).
    #[inline]
    pub fn step(&mut self, q: &mut [f64], p: &mut [f64], h: f64) {
        match self.method {
            Method::Verlet => self.verlet(q, p, h),
            Method::Yoshida4 => {
                self.verlet(q, p, YOSHIDA_W1 * h);
                self.verlet(q, p, YOSHIDA_W0 * h);
                self.verlet(q, p, YOSHIDA_W1 * h);
            }
        }
    }
}

fn check_state(state: &State, sys: &LatticeSystem) -> Result<()> {
    sys.check_dim(state.q.len())?;
    sys.check_dim(state.p.len())?;
    if !state.is_finite() {
        return Err(Error::NonFinite { time: 0.0 });
    }
    Ok(())
}

/// Advances `(q, p)` by `duration` (may be negative) under constant controls.
pub(crate) fn advance(
    q: &mut [f64],
    p: &mut [f64],
    stepper: &mut Stepper<'_>,
    duration: f64,
    policy: &IntegratorPolicy,
) {
    if duration == 0.0 {
        return;
    }
    let steps = policy.steps_for(duration.abs());
    let h = duration / steps as f64;
    stepper.prime(q);
    for _ in 0..steps {
        stepper.step(q, p, h);
    }
}

/// `e^{tf}(x)`: the free (uncontrolled) flow for `t >= 0`.
pub fn free_flow(state: &State, t: f64, sys: &LatticeSystem, policy: &IntegratorPolicy) -> Result<State> {
    check_state(state, sys)?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Precondition(format!(
            "free flow duration must be finite and nonnegative, got {t}"
        )));
    }
    let mut out = state.clone();
    let mut stepper = Stepper::new(sys, policy.method);
    advance(&mut out.q, &mut out.p, &mut stepper, t, policy);
    if !out.is_finite() {
        return Err(Error::NonFinite { time: t });
    }
    Ok(out)
}

/// Endpoint of `ẋ = f(x) + Σ g_site u_site` for constant controls over `t >= 0`.
pub fn constant_control_flow(
    state: &State,
    controls: &[f64],
    t: f64,
    sys: &LatticeSystem,
    policy: &IntegratorPolicy,
) -> Result<State> {
    check_state(state, sys)?;
    if controls.len() != sys.control_sites().len() {
        return Err(Error::DimensionMismatch {
            expected: sys.control_sites().len(),
            got: controls.len(),
        });
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Precondition(format!(
            "flow duration must be finite and nonnegative, got {t}"
        )));
    }
    let values: Vec<f64> = match policy.control_clamp {
        Some(b) => controls.iter().map(|u| u.clamp(-b, b)).collect(),
        None => controls.to_vec(),
    };
    let mut out = state.clone();
    let mut stepper = Stepper::new(sys, policy.method);
    stepper.set_controls(&values);
    advance(&mut out.q, &mut out.p, &mut stepper, t, policy);
    if !out.is_finite() {
        return Err(Error::NonFinite { time: t });
    }
    Ok(out)
}

/// Free motion sampled over `[0, horizon]`.
pub fn free_trajectory(
    state: &State,
    horizon: f64,
    sys: &LatticeSystem,
    policy: &IntegratorPolicy,
) -> Result<Trajectory> {
    controlled_flow(state, &ControlSignal::zero(sys, horizon), sys, policy)
}

/// Trajectory of the controlled system under a piecewise-constant signal.
pub fn controlled_flow(
    state: &State,
    signal: &ControlSignal,
    sys: &LatticeSystem,
    policy: &IntegratorPolicy,
) -> Result<Trajectory> {
    check_state(state, sys)?;
    signal.validate(sys)?;
    let signal = match policy.control_clamp {
        Some(b) => signal.clamped(b),
        None => signal.clone(),
    };
    let pieces = signal.pieces(sys);
    let mut traj = Trajectory::start(state.clone(), signal.values_at(sys, 0.0), *policy);
    let mut q = state.q.clone();
    let mut p = state.p.clone();
    let mut stepper = Stepper::new(sys, policy.method);
    let every = policy.record_every.max(1);
    let mut t0 = 0.0;
    let mut since_record = 0usize;
    for (i, piece) in pieces.iter().enumerate() {
        let Piece { duration, values } = piece;
        stepper.set_controls(values);
        stepper.prime(&q);
        let steps = policy.steps_for(*duration);
        let h = duration / steps as f64;
        for k in 1..=steps {
            stepper.step(&mut q, &mut p, h);
            since_record += 1;
            let last = k == steps;
            if since_record >= every || last {
                let t = if last { t0 + duration } else { t0 + k as f64 * h };
                if q.iter().chain(&p).any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite { time: t });
                }
                // hold the value of the piece just finished at the final time
                let u = if last && i + 1 < pieces.len() {
                    pieces[i + 1].values.clone()
                } else {
                    values.clone()
                };
                traj.push(t, State { q: q.clone(), p: p.clone() }, u);
                since_record = 0;
            }
        }
        t0 += duration;
    }
    traj.signal = Some(signal);
    Ok(traj)
}

/// Runs a control signal backwards from its endpoint: the exact inverse of
/// [`controlled_flow`] for the symmetric schemes, up to roundoff.
pub(crate) fn controlled_flow_backward(
    end: &State,
    signal: &ControlSignal,
    sys: &LatticeSystem,
    policy: &IntegratorPolicy,
) -> Result<State> {
    check_state(end, sys)?;
    signal.validate(sys)?;
    let mut q = end.q.clone();
    let mut p = end.p.clone();
    let mut stepper = Stepper::new(sys, policy.method);
    for piece in signal.pieces(sys).iter().rev() {
        stepper.set_controls(&piece.values);
        advance(&mut q, &mut p, &mut stepper, -piece.duration, policy);
    }
    stepper.clear_controls();
    let out = State { q, p };
    if !out.is_finite() {
        return Err(Error::NonFinite {
            time: -signal.horizon(),
        });
    }
    Ok(out)
}
