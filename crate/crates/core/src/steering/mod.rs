//! Steering with forward-time flows only.
//!
//! The primitives are the free flow `e^{tf}`, the conjugated flows
//! `e^{±g} ∘ e^{tf} ∘ e^{∓g}` (which map the zero-momentum hyperplane to
//! itself), the idealised momentum shift `e^{a g}`, its admissible
//! realisation by a short strong pulse, and constant-control legs that move
//! total momentum (`Ṗ = u`).

mod planner;
mod recurrence;

pub use planner::{plan_steering, PlanOutcome, PlannerBudget};
pub use recurrence::{bond_period, recurrence_search, reverse_flow_approx, RecurrenceResult, ReverseApprox};

use serde::{Deserialize, Serialize};

use crate::control::{Channel, ControlSignal, Segment};
use crate::error::{Error, Result};
use crate::integrate::{constant_control_flow, controlled_flow, free_flow, IntegratorPolicy};
use crate::state::State;
use crate::system::LatticeSystem;
use crate::trajectory::Trajectory;

/// Pulse strength used by admissible plans unless stated otherwise.
pub const DEFAULT_THETA: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Primitive {
    FreeFlow { t: f64 },
    /// `e^{±g} ∘ e^{tf} ∘ e^{∓g}`.
    ConjugatedFlow { sign: Sign, t: f64 },
    /// Idealised `e^{amount·g}`: an instantaneous momentum jump.
    GShift { amount: f64 },
    /// `e^{θ^{-1}(f ± θ g)}`: control `±θ` for time `1/θ`.
    Pulse { sign: Sign, theta: f64 },
    ConstantLeg { u: f64, duration: f64 },
}

impl Primitive {
    fn check(&self) -> Result<()> {
        let ok = match *self {
            Primitive::FreeFlow { t } | Primitive::ConjugatedFlow { t, .. } => t >= 0.0 && t.is_finite(),
            Primitive::GShift { amount } => amount.is_finite(),
            Primitive::Pulse { theta, .. } => theta > 0.0 && theta.is_finite(),
            Primitive::ConstantLeg { u, duration } => u.is_finite() && duration >= 0.0 && duration.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Precondition(format!("invalid primitive {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum PlanMode {
    /// Shifts are applied exactly.
    Idealized,
    /// Shifts are realised by pulses of strength `theta`.
    Admissible { theta: f64 },
}

impl PlanMode {
    pub fn admissible() -> Self {
        PlanMode::Admissible { theta: DEFAULT_THETA }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeringPlan {
    pub mode: PlanMode,
    pub primitives: Vec<Primitive>,
}

impl SteeringPlan {
    pub fn empty(mode: PlanMode) -> Self {
        Self {
            mode,
            primitives: Vec::new(),
        }
    }

    pub fn new(mode: PlanMode, primitives: Vec<Primitive>) -> Result<Self> {
        let plan = Self { mode, primitives };
        plan.validate()?;
        Ok(plan)
    }

    pub fn len(&self) -> usize {
        self.primitives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primitives.is_empty()
    }

    /// Admissible plans contain no exact shifts; all durations are nonnegative.
    pub fn validate(&self) -> Result<()> {
        if let PlanMode::Admissible { theta } = self.mode {
            if !(theta > 0.0) || !theta.is_finite() {
                return Err(Error::Precondition(format!("pulse strength must be positive, got {theta}")));
            }
        }
        for p in &self.primitives {
            p.check()?;
            if matches!(self.mode, PlanMode::Admissible { .. }) && matches!(p, Primitive::GShift { .. }) {
                return Err(Error::Precondition(
                    "admissible plans cannot contain exact momentum shifts".into(),
                ));
            }
        }
        Ok(())
    }

    /// Total momentum the plan injects: legs contribute `u·duration`,
    /// shifts their amount, pulses `±1`, conjugated flows nothing.
    pub fn momentum_change(&self) -> f64 {
        self.primitives
            .iter()
            .map(|p| match *p {
                Primitive::ConstantLeg { u, duration } => u * duration,
                Primitive::GShift { amount } => amount,
                Primitive::Pulse { sign, .. } => sign.value(),
                Primitive::FreeFlow { .. } | Primitive::ConjugatedFlow { .. } => 0.0,
            })
            .sum()
    }

    /// Plain `(duration, value)` control segments on the forced site.
    /// Fails for idealised plans that need exact shifts.
    pub fn control_segments(&self) -> Result<Vec<(f64, f64)>> {
        self.validate()?;
        let theta = match self.mode {
            PlanMode::Admissible { theta } => Some(theta),
            PlanMode::Idealized => None,
        };
        let mut out = Vec::new();
        let mut push = |d: f64, u: f64| {
            if d > 0.0 {
                out.push((d, u));
            }
        };
        for p in &self.primitives {
            match *p {
                Primitive::FreeFlow { t } => push(t, 0.0),
                Primitive::ConstantLeg { u, duration } => push(duration, u),
                Primitive::Pulse { sign, theta } => push(1.0 / theta, sign.value() * theta),
                Primitive::ConjugatedFlow { sign, t } => {
                    let theta = theta.ok_or_else(|| {
                        Error::Precondition("idealised conjugated flows have no control realisation".into())
                    })?;
                    push(1.0 / theta, -sign.value() * theta);
                    push(t, 0.0);
                    push(1.0 / theta, sign.value() * theta);
                }
                Primitive::GShift { .. } => {
                    return Err(Error::Precondition(
                        "exact momentum shifts have no control realisation".into(),
                    ))
                }
            }
        }
        Ok(out)
    }

    /// The piecewise-constant control realising an admissible plan.
    pub fn to_signal(&self, sys: &LatticeSystem) -> Result<ControlSignal> {
        signal_on_primary(sys, &self.control_segments()?)
    }
}

/// A signal driving only the primary control site; other sites get zero.
pub(crate) fn signal_on_primary(sys: &LatticeSystem, steps: &[(f64, f64)]) -> Result<ControlSignal> {
    let primary = sys.primary_site()?;
    let horizon: f64 = steps.iter().map(|s| s.0).sum();
    let channels = sys
        .control_sites()
        .iter()
        .map(|&site| Channel {
            site,
            segments: if site == primary {
                steps
                    .iter()
                    .map(|&(duration, value)| Segment { duration, value })
                    .collect()
            } else {
                vec![Segment {
                    duration: horizon,
                    value: 0.0,
                }]
            },
        })
        .collect();
    Ok(ControlSignal { channels })
}

fn primary_controls(sys: &LatticeSystem, u: f64) -> Result<Vec<f64>> {
    let primary = sys.primary_site()?;
    Ok(sys
        .control_sites()
        .iter()
        .map(|&s| if s == primary { u } else { 0.0 })
        .collect())
}

/// `e^{amount·g}`: adds `amount` to the momentum of the forced particle.
pub fn g_shift(x: &State, amount: f64, sys: &LatticeSystem) -> Result<State> {
    let idx = sys.site_index(sys.primary_site()?)?;
    let mut out = x.clone();
    out.p[idx] += amount;
    Ok(out)
}

/// Control `±θ` for time `1/θ`; approaches `g_shift(x, ±1)` as `θ → ∞`.
pub fn pulse(x: &State, sign: Sign, theta: f64, sys: &LatticeSystem, policy: &IntegratorPolicy) -> Result<State> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::Precondition(format!("pulse strength must be positive, got {theta}")));
    }
    constant_control_flow(x, &primary_controls(sys, sign.value() * theta)?, 1.0 / theta, sys, policy)
}

/// `e^{±g} ∘ e^{tf} ∘ e^{∓g}`, with the shifts exact or realised by pulses.
pub fn conjugated_flow(
    x: &State,
    sign: Sign,
    t: f64,
    sys: &LatticeSystem,
    mode: PlanMode,
    policy: &IntegratorPolicy,
) -> Result<State> {
    if !(t >= 0.0) {
        return Err(Error::Precondition(format!("flow duration must be nonnegative, got {t}")));
    }
    match mode {
        PlanMode::Idealized => {
            let y = g_shift(x, -sign.value(), sys)?;
            let y = free_flow(&y, t, sys, policy)?;
            g_shift(&y, sign.value(), sys)
        }
        PlanMode::Admissible { theta } => {
            let y = pulse(x, sign.flip(), theta, sys, policy)?;
            let y = free_flow(&y, t, sys, policy)?;
            pulse(&y, sign, theta, sys, policy)
        }
    }
}

/// Endpoint of one primitive.
pub fn apply_primitive(
    x: &State,
    prim: &Primitive,
    mode: PlanMode,
    sys: &LatticeSystem,
    policy: &IntegratorPolicy,
) -> Result<State> {
    prim.check()?;
    match *prim {
        Primitive::FreeFlow { t } => free_flow(x, t, sys, policy),
        Primitive::ConjugatedFlow { sign, t } => conjugated_flow(x, sign, t, sys, mode, policy),
        Primitive::GShift { amount } => {
            if matches!(mode, PlanMode::Admissible { .. }) {
                return Err(Error::Precondition(
                    "admissible plans cannot contain exact momentum shifts".into(),
                ));
            }
            g_shift(x, amount, sys)
        }
        Primitive::Pulse { sign, theta } => pulse(x, sign, theta, sys, policy),
        Primitive::ConstantLeg { u, duration } => {
            constant_control_flow(x, &primary_controls(sys, u)?, duration, sys, policy)
        }
    }
}

/// Endpoint of a plan without recording a trajectory.
pub fn plan_endpoint(x: &State, plan: &SteeringPlan, sys: &LatticeSystem, policy: &IntegratorPolicy) -> Result<State> {
    plan.validate()?;
    plan.primitives
        .iter()
        .try_fold(x.clone(), |y, p| apply_primitive(&y, p, plan.mode, sys, policy))
}

/// Trajectory of a plan. Admissible plans run as one controlled flow whose
/// signal is stored on the trajectory; idealised shifts replace the newest
/// sample, so sample times stay strictly increasing.
pub fn execute_plan(x: &State, plan: &SteeringPlan, sys: &LatticeSystem, policy: &IntegratorPolicy) -> Result<Trajectory> {
    plan.validate()?;
    let zero = primary_controls(sys, 0.0)?;
    if plan.is_empty() {
        let mut traj = controlled_flow(x, &signal_on_primary(sys, &[(1.0, 0.0)])?, sys, policy)?;
        traj.times.truncate(1);
        traj.states.truncate(1);
        traj.controls.truncate(1);
        traj.signal = None;
        return Ok(traj);
    }
    if matches!(plan.mode, PlanMode::Admissible { .. }) {
        let segments = plan.control_segments()?;
        if segments.is_empty() {
            return execute_plan(x, &SteeringPlan::empty(plan.mode), sys, policy);
        }
        return controlled_flow(x, &signal_on_primary(sys, &segments)?, sys, policy);
    }
    let mut traj: Option<Trajectory> = None;
    let mut current = x.clone();
    let run = |traj: &mut Option<Trajectory>, current: &mut State, steps: &[(f64, f64)]| -> Result<()> {
        if steps.iter().all(|s| s.0 == 0.0) {
            return Ok(());
        }
        let steps: Vec<(f64, f64)> = steps.iter().copied().filter(|s| s.0 > 0.0).collect();
        let piece = controlled_flow(current, &signal_on_primary(sys, &steps)?, sys, policy)?;
        *current = piece.last().clone();
        match traj {
            Some(t) => t.append(piece),
            None => {
                let mut piece = piece;
                piece.signal = None;
                *traj = Some(piece);
            }
        }
        Ok(())
    };
    let jump = |traj: &mut Option<Trajectory>, current: &mut State, amount: f64| -> Result<()> {
        *current = g_shift(current, amount, sys)?;
        let t = traj.get_or_insert_with(|| {
            let mut t = Trajectory::start(x.clone(), zero.clone(), *policy);
            t.signal = None;
            t
        });
        let u = t.controls.last().cloned().unwrap_or_default();
        t.replace_last(current.clone(), u);
        Ok(())
    };
    for p in &plan.primitives {
        match *p {
            Primitive::FreeFlow { t } => run(&mut traj, &mut current, &[(t, 0.0)])?,
            Primitive::ConstantLeg { u, duration } => run(&mut traj, &mut current, &[(duration, u)])?,
            Primitive::Pulse { sign, theta } => {
                run(&mut traj, &mut current, &[(1.0 / theta, sign.value() * theta)])?
            }
            Primitive::GShift { amount } => jump(&mut traj, &mut current, amount)?,
            Primitive::ConjugatedFlow { sign, t } => {
                jump(&mut traj, &mut current, -sign.value())?;
                run(&mut traj, &mut current, &[(t, 0.0)])?;
                jump(&mut traj, &mut current, sign.value())?;
            }
        }
    }
    Ok(traj.unwrap_or_else(|| Trajectory::start(x.clone(), zero, *policy)))
}

/// Constant control `u = −P(x)` on the forced site for time 1, which lands
/// on the zero-momentum hyperplane.
pub fn project_to_zero_momentum(x: &State, sys: &LatticeSystem, policy: &IntegratorPolicy) -> Result<(f64, State)> {
    let u = -x.total_momentum();
    let end = constant_control_flow(x, &primary_controls(sys, u)?, 1.0, sys, policy)?;
    Ok((u, end))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Potential;

    fn toda3() -> LatticeSystem {
        LatticeSystem::periodic(3, Potential::toda()).unwrap()
    }

    fn x0() -> State {
        State::new(vec![0.1, 0.0, -0.1], vec![0.2, -0.1, -0.1]).unwrap()
    }

    #[test]
    fn shift_examples() {
        let sys = toda3();
        assert_eq!(g_shift(&x0(), 0.0, &sys).unwrap(), x0());
        // exact on dyadic values, within an ulp otherwise
        let dyadic = State::new(vec![0.5, 0.0, -0.5], vec![0.25, -0.125, -0.125]).unwrap();
        let back = g_shift(&g_shift(&dyadic, 1.0, &sys).unwrap(), -1.0, &sys).unwrap();
        assert_eq!(back, dyadic);
        let back = g_shift(&g_shift(&x0(), 1.0, &sys).unwrap(), -1.0, &sys).unwrap();
        assert!(back.distance(&x0()) < 1e-15);
        let y = g_shift(&x0(), -0.3, &sys).unwrap();
        assert!((y.p[0] + 0.1).abs() < 1e-15);
    }

    #[test]
    fn pulse_approaches_shift() {
        let sys = toda3();
        let policy = IntegratorPolicy::default();
        let y = pulse(&x0(), Sign::Plus, 1e3, &sys, &policy).unwrap();
        assert!(y.distance(&g_shift(&x0(), 1.0, &sys).unwrap()) < 1e-2);
        let free = LatticeSystem::periodic(3, Potential::polynomial(vec![0.0], 0.0)).unwrap();
        let z = State::new(vec![0.3, 0.1, -0.2], vec![0.0; 3]).unwrap();
        let y = pulse(&z, Sign::Plus, 10.0, &free, &policy).unwrap();
        // constant force on a free particle: q moves by 1/(2θ)
        assert!((y.p[0] - 1.0).abs() < 1e-12);
        assert!((y.q[0] - 0.3 - 0.05).abs() < 1e-12);
    }

    #[test]
    fn conjugated_flow_composition_order() {
        let sys = toda3();
        let policy = IntegratorPolicy::default();
        let a = conjugated_flow(&x0(), Sign::Plus, 1.0, &sys, PlanMode::Idealized, &policy).unwrap();
        let b = g_shift(
            &free_flow(&g_shift(&x0(), -1.0, &sys).unwrap(), 1.0, &sys, &policy).unwrap(),
            1.0,
            &sys,
        )
        .unwrap();
        assert_eq!(a, b);
        assert!(a.total_momentum().abs() < 1e-10);
        let id = conjugated_flow(&x0(), Sign::Minus, 0.0, &sys, PlanMode::Idealized, &policy).unwrap();
        assert!(id.distance(&x0()) < 1e-15);
    }

    #[test]
    fn projection_examples() {
        let sys = toda3();
        let policy = IntegratorPolicy::default();
        let (u, y) = project_to_zero_momentum(&x0(), &sys, &policy).unwrap();
        assert_eq!(u, 0.0);
        assert_eq!(y, free_flow(&x0(), 1.0, &sys, &policy).unwrap());
        let z = State::new(vec![0.0; 3], vec![1.0, 2.0, -1.0]).unwrap();
        let (u, y) = project_to_zero_momentum(&z, &sys, &policy).unwrap();
        assert_eq!(u, -2.0);
        assert!(y.total_momentum().abs() < 1e-9);
    }

    #[test]
    fn plan_execution_modes() {
        let sys = toda3();
        let policy = IntegratorPolicy::default();
        let prims = vec![
            Primitive::ConstantLeg { u: 0.5, duration: 1.0 },
            Primitive::ConjugatedFlow { sign: Sign::Plus, t: 0.7 },
            Primitive::FreeFlow { t: 0.4 },
            Primitive::ConjugatedFlow { sign: Sign::Minus, t: 0.3 },
        ];
        let ideal = SteeringPlan::new(PlanMode::Idealized, prims.clone()).unwrap();
        let adm = SteeringPlan::new(PlanMode::admissible(), prims).unwrap();
        let ti = execute_plan(&x0(), &ideal, &sys, &policy).unwrap();
        let ta = execute_plan(&x0(), &adm, &sys, &policy).unwrap();
        assert!(ti.times.windows(2).all(|w| w[1] > w[0]));
        assert!(ta.signal.is_some());
        assert!(ti.last().distance(&plan_endpoint(&x0(), &ideal, &sys, &policy).unwrap()) < 1e-12);
        assert!(ti.last().distance(ta.last()) < 5e-2 * 4.0);
        for t in [&ti, &ta] {
            let dp = t.last().total_momentum() - x0().total_momentum();
            assert!((dp - 0.5).abs() < 1e-9, "{dp}");
        }
        let bad = SteeringPlan {
            mode: PlanMode::admissible(),
            primitives: vec![Primitive::GShift { amount: 1.0 }],
        };
        assert!(bad.validate().is_err());
        let empty = execute_plan(&x0(), &SteeringPlan::empty(PlanMode::Idealized), &sys, &policy).unwrap();
        assert_eq!(empty.len(), 1);
    }
}
