//! Return times of the free flow and the forward-only substitute for
//! reverse-time flows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{free_flow, IntegratorPolicy};
use crate::oracle::reverse_free_flow;
use crate::state::State;
use crate::system::LatticeSystem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceResult {
    pub found: bool,
    /// Return time when found, otherwise the time of the closest sample.
    pub tau: f64,
    /// Distance at `tau`, recomputed by a fresh integration when found.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReverseApprox {
    pub tau: f64,
    pub state: State,
    /// `e^{-tf}(x)`, from the verification oracle.
    pub target: State,
    pub distance: f64,
}

/// Walks the free flow forward from `x`, calling `visit(t, state)` every
/// `record_every` steps from `t_start` (after an initial jump to it) up to
/// `t_end`. Stops early when `visit` returns `true`.
fn scan(
    x: &State,
    t_start: f64,
    t_end: f64,
    sys: &LatticeSystem,
    policy: &IntegratorPolicy,
    mut visit: impl FnMut(f64, &State) -> bool,
) -> Result<()> {
    let mut y = free_flow(x, t_start, sys, policy)?;
    if visit(t_start, &y) {
        return Ok(());
    }
    let stride = policy.dt * policy.record_every.max(1) as f64;
    let samples = ((t_end - t_start) / stride).floor() as usize;
    for k in 1..=samples {
        y = free_flow(&y, stride, sys, policy)?;
        if visit(t_start + k as f64 * stride, &y) {
            break;
        }
    }
    Ok(())
}

/// Golden-section minimisation of `f` over `[lo, hi]` down to width `tol`.
pub(crate) fn golden_section(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > tol {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - r * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + r * (hi - lo);
            fb = f(b);
        }
    }
    if fa <= fb {
        (a, fa)
    } else {
        (b, fb)
    }
}

fn distance_after(x: &State, t: f64, target: &State, sys: &LatticeSystem, policy: &IntegratorPolicy) -> f64 {
    free_flow(x, t, sys, policy).map_or(f64::INFINITY, |y| y.distance(target))
}

/// First sampled time in `[tmin, tmax]` at which the free flow is back
/// within `epsilon` of `target`, refined to the nearby distance minimum and
/// checked by a fresh integration.
fn first_approach(
    x: &State,
    target: &State,
    epsilon: f64,
    t_min: f64,
    t_max: f64,
    sys: &LatticeSystem,
    policy: &IntegratorPolicy,
) -> Result<RecurrenceResult> {
    let stride = policy.dt * policy.record_every.max(1) as f64;
    let mut hit: Option<(f64, State)> = None;
    let mut prev: Option<(f64, State)> = None;
    let mut best = (t_min, f64::INFINITY);
    scan(x, t_min, t_max, sys, policy, |t, y| {
        let d = y.distance(target);
        if d < best.1 {
            best = (t, d);
        }
        if d <= epsilon {
            hit = Some(prev.take().unwrap_or((t, y.clone())));
            true
        } else {
            prev = Some((t, y.clone()));
            false
        }
    })?;
    let Some((t0, y0)) = hit else {
        return Ok(RecurrenceResult {
            found: false,
            tau: best.0,
            distance: best.1,
        });
    };
    let span = (2.0 * stride).min(t_max - t0);
    let mut candidates = vec![best.0];
    if span > 0.0 {
        let (s, _) = golden_section(|s| distance_after(&y0, s, target, sys, policy), 0.0, span, 1e-4);
        candidates.insert(0, t0 + s);
    }
    let mut chosen = RecurrenceResult {
        found: false,
        tau: best.0,
        distance: f64::INFINITY,
    };
    for tau in candidates {
        let distance = distance_after(x, tau, target, sys, policy);
        if distance < chosen.distance || (distance == chosen.distance && tau < chosen.tau) {
            chosen = RecurrenceResult {
                found: distance <= epsilon,
                tau,
                distance,
            };
        }
    }
    Ok(chosen)
}

/// Looks for a return of the free flow to within `epsilon` of `x` at some
/// `τ ∈ [t_min, t_max]`. Points of the zero-momentum hyperplane are
/// nonwandering, so a return exists for small enough energies and long
/// enough horizons; not finding one is a result, not an error.
pub fn recurrence_search(
    x: &State,
    epsilon: f64,
    t_min: f64,
    t_max: f64,
    sys: &LatticeSystem,
    policy: &IntegratorPolicy,
) -> Result<RecurrenceResult> {
    if x.total_momentum().abs() >= 1e-10 {
        return Err(Error::Precondition(format!(
            "recurrence search needs zero total momentum, got {:e}",
            x.total_momentum()
        )));
    }
    if !(t_min > 0.0 && t_max > t_min) {
        return Err(Error::Precondition(format!(
            "need 0 < t_min < t_max, got {t_min} and {t_max}"
        )));
    }
    first_approach(x, x, epsilon, t_min, t_max, sys, policy)
}

/// A forward time `τ' > 0` with `e^{τ'f}(x)` within `epsilon` of
/// `e^{-tf}(x)`. The target is computed by the reverse oracle and only used
/// to measure distances; the returned state comes from the forward flow.
pub fn reverse_flow_approx(
    x: &State,
    t: f64,
    epsilon: f64,
    t_max: f64,
    sys: &LatticeSystem,
    policy: &IntegratorPolicy,
) -> Result<ReverseApprox> {
    if x.total_momentum().abs() >= 1e-10 {
        return Err(Error::Precondition(format!(
            "reverse-flow approximation needs zero total momentum, got {:e}",
            x.total_momentum()
        )));
    }
    if !(t > 0.0) {
        return Err(Error::Precondition(format!("reverse time must be positive, got {t}")));
    }
    let target = reverse_free_flow(x, t, sys, policy)?;
    let stride = policy.dt * policy.record_every.max(1) as f64;
    let r = first_approach(x, &target, epsilon, stride, t_max, sys, policy)?;
    if !r.found {
        return Err(Error::NotFound {
            epsilon,
            t_max,
            best_distance: r.distance,
            best_time: r.tau,
        });
    }
    Ok(ReverseApprox {
        tau: r.tau,
        state: free_flow(x, r.tau, sys, policy)?,
        target,
        distance: r.distance,
    })
}

/// Mean period of bond `(bond, bond+1)` (0-based) from successive upward
/// crossings of its mid-range value over `[0, t_max]`. `None` when fewer
/// than two crossings occur.
pub fn bond_period(
    x: &State,
    bond: usize,
    t_max: f64,
    sys: &LatticeSystem,
    policy: &IntegratorPolicy,
) -> Result<Option<f64>> {
    if bond >= sys.bond_count() {
        return Err(Error::InvalidConfig(format!("no bond {bond} in a chain of {}", sys.n())));
    }
    let (a, b) = sys.bond(bond);
    let mut samples = Vec::new();
    scan(x, 0.0, t_max, sys, policy, |t, y| {
        samples.push((t, y.q[a] - y.q[b]));
        false
    })?;
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.1), hi.max(s.1)));
    let mid = 0.5 * (lo + hi);
    let crossings: Vec<f64> = samples
        .windows(2)
        .filter(|w| w[0].1 < mid && w[1].1 >= mid)
        .map(|w| {
            let (t0, v0) = w[0];
            let (t1, v1) = w[1];
            t0 + (mid - v0) * (t1 - t0) / (v1 - v0)
        })
        .collect();
    if crossings.len() < 2 {
        return Ok(None);
    }
    Ok(Some(
        (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Potential;

    #[test]
    fn equilibrium_returns_immediately() {
        let sys = LatticeSystem::periodic(3, Potential::toda()).unwrap();
        let x = State::zeros(3);
        let r = recurrence_search(&x, 0.05, 1.0, 10.0, &sys, &IntegratorPolicy::default()).unwrap();
        assert!(r.found);
        assert_eq!(r.tau, 1.0);
        assert_eq!(r.distance, 0.0);
        let a = reverse_flow_approx(&x, 2.0, 1e-2, 10.0, &sys, &IntegratorPolicy::default()).unwrap();
        assert_eq!(a.state, x);
        assert_eq!(a.distance, 0.0);
    }

    #[test]
    fn dimer_returns_after_one_period() {
        let sys = LatticeSystem::periodic(2, Potential::toda()).unwrap();
        let policy = IntegratorPolicy::default();
        let x = State::new(vec![0.3, -0.3], vec![0.0, 0.0]).unwrap();
        let period = bond_period(&x, 0, 20.0, &sys, &policy).unwrap().unwrap();
        let r = recurrence_search(&x, 1e-3, 0.5 * period, 3.0 * period, &sys, &policy).unwrap();
        assert!(r.found);
        assert!((r.tau - period).abs() < 1e-2, "{} vs {}", r.tau, period);
    }

    #[test]
    fn requires_zero_momentum() {
        let sys = LatticeSystem::periodic(3, Potential::toda()).unwrap();
        let x = State::new(vec![0.0; 3], vec![1.0, 0.0, 0.0]).unwrap();
        assert!(recurrence_search(&x, 0.1, 1.0, 2.0, &sys, &IntegratorPolicy::default()).is_err());
    }
}
