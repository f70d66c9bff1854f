//! Energy boxes for sublevel sets of `H` and conservation diagnostics.
//!
//! On `Σp = 0, Σq = Q` the set `{H ≤ c}` of a periodic chain is bounded:
//! every bond obeys `Φ(y) ≤ c + (n−1)B`, hence `y ≤ b`, and summing the
//! bond inequalities confines each `q_j` to
//! `[Q/n − b(n+1)/2, Q/n + b(n−1)/2]`. Momenta satisfy `‖p‖² ≤ 2(c + nB)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::hamiltonian;
use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::state::State;
use crate::system::LatticeSystem;
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyBox {
    pub energy: f64,
    /// `B` with `Φ ≥ −B`.
    pub lower_bound: f64,
    pub n: usize,
    /// True when `{H ≤ c}` is empty; the bounds are then meaningless.
    pub empty: bool,
    /// `b = sup{y : Φ(y) ≤ c + (n−1)B}`.
    pub bond_bound: f64,
    /// `2(c + nB)`.
    pub momentum_bound_sq: f64,
}

impl EnergyBox {
    pub fn momentum_bound(&self) -> f64 {
        self.momentum_bound_sq.sqrt()
    }

    /// Interval for every `q_j` on the slice `Σq = total_q`.
    pub fn interval(&self, total_q: f64) -> (f64, f64) {
        let n = self.n as f64;
        let b = self.bond_bound;
        (total_q / n - b * (n + 1.0) / 2.0, total_q / n + b * (n - 1.0) / 2.0)
    }

    /// Membership in the box and the momentum ball, with slack `tol`.
    pub fn contains(&self, x: &State, total_q: f64, tol: f64) -> bool {
        let (lo, hi) = self.interval(total_q);
        let p_sq: f64 = x.p.iter().map(|v| v * v).sum();
        p_sq <= self.momentum_bound_sq + tol && x.q.iter().all(|&q| q >= lo - tol && q <= hi + tol)
    }
}

/// Bond and momentum bounds of `{H ≤ c}` on the zero-momentum slices of a
/// periodic chain of `n` particles.
pub fn lebesgue_bound(pot: &Potential, c: f64, n: usize) -> Result<EnergyBox> {
    if n < 2 {
        return Err(Error::Precondition("need at least two particles".into()));
    }
    if !pot.grows {
        return Err(Error::Precondition(
            "potential is not declared to grow; the sublevel set may be unbounded".into(),
        ));
    }
    let big_b = pot.lower_bound.ok_or_else(|| {
        Error::Precondition("potential has no declared lower bound".into())
    })?;
    if !c.is_finite() {
        return Err(Error::Precondition(format!("energy level must be finite, got {c}")));
    }
    let nf = n as f64;
    let empty = EnergyBox {
        energy: c,
        lower_bound: big_b,
        n,
        empty: true,
        bond_bound: f64::NAN,
        momentum_bound_sq: f64::NAN,
    };
    // bonds of a periodic chain sum to zero; for convex Φ the minimum of ΣΦ is nΦ(0)
    let floor = if pot.is_known_convex() {
        nf * pot.value(0.0)
    } else {
        -nf * big_b
    };
    if c < floor {
        return Ok(empty);
    }
    let target = c + (nf - 1.0) * big_b;
    let Some(b) = sup_sublevel(pot, target) else {
        return Ok(empty);
    };
    Ok(EnergyBox {
        energy: c,
        lower_bound: big_b,
        n,
        empty: false,
        bond_bound: b,
        momentum_bound_sq: 2.0 * (c + nf * big_b),
    })
}

/// `sup{y : Φ(y) ≤ target}` for a potential growing at `+∞`.
fn sup_sublevel(pot: &Potential, target: f64) -> Option<f64> {
    let mut hi = 1.0;
    while pot.value(hi) <= target {
        hi *= 2.0;
        if hi > 1e12 {
            return None;
        }
    }
    let mut lo = -hi;
    while pot.value(lo) > target && lo > -1e12 {
        let all_above = {
            let grid = 4096;
            (0..=grid).all(|i| pot.value(lo + (hi - lo) * i as f64 / grid as f64) > target)
        };
        if !all_above {
            break;
        }
        lo *= 2.0;
    }
    let grid = 4096;
    let step = (hi - lo) / grid as f64;
    let last_ok = (0..=grid).rev().find(|&i| pot.value(lo + step * i as f64) <= target)?;
    let mut a = lo + step * last_ok as f64;
    let mut z = (a + step).min(hi);
    for _ in 0..80 {
        let mid = 0.5 * (a + z);
        if pot.value(mid) <= target {
            a = mid;
        } else {
            z = mid;
        }
    }
    Some(a)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactnessReport {
    pub energy_box: EnergyBox,
    pub total_q: f64,
    pub accepted: usize,
    pub proposals: usize,
    pub violations: usize,
    pub acceptance_rate: f64,
    /// Acceptance fell below `1e-6`.
    pub starved: bool,
    pub max_momentum_sq: f64,
    pub q_min: f64,
    pub q_max: f64,
}

/// Rejection-samples `{H ≤ c} ∩ {Σp = 0, Σq = total_q}` from a region
/// strictly larger than the claimed box and counts accepted samples that
/// fall outside it.
pub fn verify_compactness(
    pot: &Potential,
    c: f64,
    total_q: f64,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<CompactnessReport> {
    Ok(sample_compactness(pot, c, total_q, n, samples, seed)?.0)
}

/// [`verify_compactness`] that also returns the accepted samples.
pub fn sample_compactness(
    pot: &Potential,
    c: f64,
    total_q: f64,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<(CompactnessReport, Vec<State>)> {
    let energy_box = lebesgue_bound(pot, c, n)?;
    let mut report = CompactnessReport {
        energy_box: energy_box.clone(),
        total_q,
        accepted: 0,
        proposals: 0,
        violations: 0,
        acceptance_rate: 0.0,
        starved: false,
        max_momentum_sq: 0.0,
        q_min: f64::INFINITY,
        q_max: f64::NEG_INFINITY,
    };
    let mut kept = Vec::new();
    if energy_box.empty || samples == 0 {
        return Ok((report, kept));
    }
    let sys = LatticeSystem::periodic(n, pot.clone())?;
    let (lo, hi) = energy_box.interval(total_q);
    let centre = 0.5 * (lo + hi);
    let half = 0.75 * (hi - lo);
    let radius = 1.5 * energy_box.momentum_bound();
    let max_proposals = (1000 * samples).max(1_000_000);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nf = n as f64;
    while report.accepted < samples && report.proposals < max_proposals {
        report.proposals += 1;
        let mut q: Vec<f64> = (0..n).map(|_| centre + rng.random_range(-half..half)).collect();
        let shift = total_q / nf - q.iter().sum::<f64>() / nf;
        q.iter_mut().for_each(|v| *v += shift);
        // uniform in the (n−1)-ball of Σp = 0: Gaussian direction, radius R·U^{1/(n−1)}
        let mut p: Vec<f64> = (0..n).map(|_| gaussian(&mut rng)).collect();
        let mean = p.iter().sum::<f64>() / nf;
        p.iter_mut().for_each(|v| *v -= mean);
        let len = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        if len == 0.0 {
            continue;
        }
        let r = radius * rng.random::<f64>().powf(1.0 / (nf - 1.0));
        p.iter_mut().for_each(|v| *v *= r / len);
        let x = State { q, p };
        if hamiltonian(&x, &sys)? > c {
            continue;
        }
        report.accepted += 1;
        let p_sq: f64 = x.p.iter().map(|v| v * v).sum();
        report.max_momentum_sq = report.max_momentum_sq.max(p_sq);
        for &v in &x.q {
            report.q_min = report.q_min.min(v);
            report.q_max = report.q_max.max(v);
        }
        if !energy_box.contains(&x, total_q, 1e-12) {
            report.violations += 1;
        }
        kept.push(x);
    }
    report.acceptance_rate = report.accepted as f64 / report.proposals.max(1) as f64;
    report.starved = report.acceptance_rate < 1e-6;
    Ok((report, kept))
}

fn gaussian(rng: &mut impl Rng) -> f64 {
    // Box–Muller
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConservationReport {
    pub samples: usize,
    pub duration: f64,
    pub initial_energy: f64,
    pub max_energy_drift: f64,
    pub max_relative_energy_drift: f64,
    /// `max_t |P(t) − P(0) − ∫_0^t u|`.
    pub max_momentum_defect: f64,
    pub momentum_change: f64,
    pub impulse: f64,
    /// Largest energy change between consecutive samples with zero control.
    pub max_free_step_energy_jump: f64,
    /// Whether any control was nonzero; energy is then not expected to be conserved.
    pub controlled: bool,
}

pub fn conservation_report(traj: &Trajectory, sys: &LatticeSystem) -> Result<ConservationReport> {
    if traj.is_empty() {
        return Err(Error::Precondition("trajectory is empty".into()));
    }
    let energies = traj
        .states
        .iter()
        .map(|s| hamiltonian(s, sys))
        .collect::<Result<Vec<f64>>>()?;
    let h0 = energies[0];
    let p0 = traj.first().total_momentum();
    let impulse_at = |t: f64| traj.signal.as_ref().map_or(0.0, |s| s.impulse_until(t));
    let mut report = ConservationReport {
        samples: traj.len(),
        duration: traj.end_time(),
        initial_energy: h0,
        max_energy_drift: 0.0,
        max_relative_energy_drift: 0.0,
        max_momentum_defect: 0.0,
        momentum_change: traj.last().total_momentum() - p0,
        impulse: impulse_at(traj.end_time()),
        max_free_step_energy_jump: 0.0,
        controlled: traj.controls.iter().flatten().any(|&u| u != 0.0)
            || traj.signal.as_ref().is_some_and(|s| s.channels.iter().any(|c| c.segments.iter().any(|g| g.value != 0.0))),
    };
    for (k, (&t, s)) in traj.times.iter().zip(&traj.states).enumerate() {
        let dh = (energies[k] - h0).abs();
        report.max_energy_drift = report.max_energy_drift.max(dh);
        let defect = (s.total_momentum() - p0 - impulse_at(t)).abs();
        report.max_momentum_defect = report.max_momentum_defect.max(defect);
        if k > 0 {
            let free = traj.signal.as_ref().map_or(true, |sig| {
                sig.impulse_until(t) == sig.impulse_until(traj.times[k - 1])
                    && traj.controls[k - 1].iter().all(|&u| u == 0.0)
            });
            if free {
                report.max_free_step_energy_jump =
                    report.max_free_step_energy_jump.max((energies[k] - energies[k - 1]).abs());
            }
        }
    }
    report.max_relative_energy_drift = if h0 != 0.0 {
        report.max_energy_drift / h0.abs()
    } else {
        report.max_energy_drift
    };
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::ControlSignal;
    use crate::integrate::{controlled_flow, free_trajectory, IntegratorPolicy};

    #[test]
    fn toda_box() {
        let c = 2f64.exp();
        let bx = lebesgue_bound(&Potential::toda(), c, 3).unwrap();
        assert!((bx.bond_bound - 1.0).abs() < 1e-10);
        assert!((Potential::toda().value(bx.bond_bound) - c).abs() < 1e-10);
        let (lo, hi) = bx.interval(0.0);
        assert!((lo + 2.0).abs() < 1e-10 && (hi - 1.0).abs() < 1e-10);
        let (lo3, hi3) = bx.interval(3.0);
        assert!((hi3 - lo3 - 3.0).abs() < 1e-10 && (lo3 + 1.0).abs() < 1e-10);
    }

    #[test]
    fn quartic_and_empty() {
        let bx = lebesgue_bound(&Potential::quartic(), 4.0, 3).unwrap();
        assert!((bx.bond_bound - 2.0).abs() < 1e-10);
        assert!(lebesgue_bound(&Potential::toda(), 2.0, 3).unwrap().empty);
        let mut flat = Potential::toda();
        flat.grows = false;
        assert!(lebesgue_bound(&flat, 10.0, 3).is_err());
    }

    #[test]
    fn sampler_finds_no_violations() {
        let r = verify_compactness(&Potential::toda(), 2f64.exp(), 0.0, 3, 2000, 1).unwrap();
        assert_eq!(r.accepted, 2000);
        assert_eq!(r.violations, 0);
        assert!(!r.starved);
        let r = verify_compactness(&Potential::toda(), 1e6, 0.0, 3, 100, 2).unwrap();
        assert_eq!(r.violations, 0);
    }

    #[test]
    fn conservation_examples() {
        let sys = LatticeSystem::periodic(3, Potential::toda()).unwrap();
        let policy = IntegratorPolicy::default();
        let x = State::new(vec![0.1, 0.0, -0.1], vec![0.2, -0.1, -0.1]).unwrap();
        let free = free_trajectory(&x, 10.0, &sys, &policy).unwrap();
        let r = conservation_report(&free, &sys).unwrap();
        assert!(r.max_relative_energy_drift < 1e-8);
        assert!(!r.controlled);
        let pushed = controlled_flow(&x, &ControlSignal::constant(1, 1.0, 2.0), &sys, &policy).unwrap();
        let r = conservation_report(&pushed, &sys).unwrap();
        assert!((r.momentum_change - 2.0).abs() < 1e-9);
        assert!(r.max_momentum_defect < 1e-9);
        assert!(r.controlled);
    }
}
