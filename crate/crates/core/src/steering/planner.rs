//! Searching for plans that steer one state to another.
//!
//! The pipeline: if the goal lies on the free orbit of the start, a single
//! free flow does it. Otherwise a constant leg moves the start onto the
//! zero-momentum hyperplane, a composition of free and conjugated flows
//! (which keep the hyperplane invariant) moves along it, and a final
//! constant leg restores the goal's momentum. The composition is found by
//! beam search over primitive sequences; durations are fitted by damped
//! Gauss–Newton on the endpoint error.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::recurrence::golden_section;
use super::{apply_primitive, plan_endpoint, PlanMode, Primitive, Sign, SteeringPlan};
use crate::error::{Error, Result};
use crate::integrate::{free_flow, IntegratorPolicy};
use crate::state::State;
use crate::system::LatticeSystem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerBudget {
    /// Longest in-plane composition tried.
    pub max_primitives: usize,
    pub beam_width: usize,
    /// Cap on plan evaluations during the search.
    pub max_evaluations: usize,
    /// Upper bound on each primitive's duration.
    pub max_duration: f64,
    /// Horizon of the pure-drift scan.
    pub drift_horizon: f64,
    /// Step used while searching; the result is re-checked with the
    /// caller's policy.
    pub search_dt: f64,
    pub fit_iterations: usize,
    /// Random restarts per beam level.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for PlannerBudget {
    fn default() -> Self {
        Self {
            max_primitives: 8,
            beam_width: 8,
            max_evaluations: 200_000,
            max_duration: 50.0,
            drift_horizon: 50.0,
            search_dt: 1e-2,
            fit_iterations: 40,
            restarts: 2,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanOutcome {
    pub plan: SteeringPlan,
    /// Distance between the executed endpoint and the goal.
    pub distance: f64,
    pub success: bool,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Kind {
    Free,
    Plus,
    Minus,
}

const KINDS: [Kind; 3] = [Kind::Free, Kind::Plus, Kind::Minus];

impl Kind {
    fn primitive(self, t: f64) -> Primitive {
        match self {
            Kind::Free => Primitive::FreeFlow { t },
            Kind::Plus => Primitive::ConjugatedFlow { sign: Sign::Plus, t },
            Kind::Minus => Primitive::ConjugatedFlow { sign: Sign::Minus, t },
        }
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    kinds: Vec<Kind>,
    durations: Vec<f64>,
    distance: f64,
}

impl Candidate {
    fn order(&self, other: &Candidate) -> std::cmp::Ordering {
        self.distance
            .total_cmp(&other.distance)
            .then(self.kinds.len().cmp(&other.kinds.len()))
            .then(self.kinds.cmp(&other.kinds))
    }
}

struct Search<'a> {
    sys: &'a LatticeSystem,
    mode: PlanMode,
    goal: &'a State,
    /// Start after the leg onto the hyperplane.
    on_plane: State,
    /// Final leg `(u, 1)` restoring the goal's momentum.
    suffix: Option<Primitive>,
    policy: IntegratorPolicy,
    budget: PlannerBudget,
    evaluations: usize,
}

impl Search<'_> {
    fn exhausted(&self) -> bool {
        self.evaluations >= self.budget.max_evaluations
    }

    fn endpoint(&mut self, kinds: &[Kind], durations: &[f64]) -> Option<State> {
        self.evaluations += 1;
        let mut y = self.on_plane.clone();
        for (k, &d) in kinds.iter().zip(durations) {
            y = apply_primitive(&y, &k.primitive(d), self.mode, self.sys, &self.policy).ok()?;
        }
        if let Some(leg) = &self.suffix {
            y = apply_primitive(&y, leg, self.mode, self.sys, &self.policy).ok()?;
        }
        Some(y)
    }

    fn residual(&mut self, kinds: &[Kind], durations: &[f64]) -> Option<DVector<f64>> {
        let y = self.endpoint(kinds, durations)?;
        let r: Vec<f64> = y.to_flat().iter().zip(self.goal.to_flat()).map(|(a, b)| a - b).collect();
        r.iter().all(|v| v.is_finite()).then(|| DVector::from_vec(r))
    }

    fn clamp(&self, d: f64) -> f64 {
        d.clamp(0.0, self.budget.max_duration)
    }

    /// Damped Gauss–Newton (Levenberg–Marquardt) on the durations.
    fn fit(&mut self, kinds: &[Kind], init: Vec<f64>, target: f64) -> Candidate {
        let mut d: Vec<f64> = init.into_iter().map(|v| self.clamp(v)).collect();
        let failed = |kinds: &[Kind], d: Vec<f64>| Candidate {
            kinds: kinds.to_vec(),
            durations: d,
            distance: f64::INFINITY,
        };
        let Some(mut r) = self.residual(kinds, &d) else {
            return failed(kinds, d);
        };
        let mut cost = r.norm_squared();
        let mut lambda = 1e-2;
        let m = d.len();
        for _ in 0..self.budget.fit_iterations {
            if cost.sqrt() <= target || self.exhausted() {
                break;
            }
            let mut jac = DMatrix::zeros(r.len(), m);
            for i in 0..m {
                let mut h = 1e-5 * (1.0 + d[i]);
                if d[i] + h > self.budget.max_duration {
                    h = -h;
                }
                let mut dp = d.clone();
                dp[i] += h;
                match self.residual(kinds, &dp) {
                    Some(ri) => jac.set_column(i, &((ri - &r) / h)),
                    None => return Candidate {
                        kinds: kinds.to_vec(),
                        durations: d,
                        distance: cost.sqrt(),
                    },
                }
            }
            let jtj = jac.transpose() * &jac;
            let grad = jac.transpose() * &r;
            let mut improved = false;
            for _ in 0..10 {
                let mut a = jtj.clone();
                for k in 0..m {
                    a[(k, k)] += lambda * (jtj[(k, k)] + 1e-9);
                }
                let Some(step) = a.lu().solve(&(-&grad)) else {
                    lambda *= 4.0;
                    continue;
                };
                let trial: Vec<f64> = d.iter().zip(step.iter()).map(|(v, s)| self.clamp(v + s)).collect();
                if trial == d {
                    break;
                }
                let Some(rt) = self.residual(kinds, &trial) else {
                    lambda *= 4.0;
                    continue;
                };
                let ct = rt.norm_squared();
                if ct < cost {
                    let gain = (cost - ct) / cost;
                    d = trial;
                    r = rt;
                    cost = ct;
                    lambda = (lambda / 3.0).max(1e-12);
                    improved = gain > 1e-12;
                    break;
                }
                lambda *= 4.0;
            }
            if !improved {
                break;
            }
        }
        Candidate {
            kinds: kinds.to_vec(),
            durations: d,
            distance: cost.sqrt(),
        }
    }

    fn beam(&mut self, target: f64) -> Candidate {
        let root_distance = self
            .residual(&[], &[])
            .map_or(f64::INFINITY, |r| r.norm());
        let root = Candidate {
            kinds: Vec::new(),
            durations: Vec::new(),
            distance: root_distance,
        };
        let mut best = root.clone();
        let mut beam = vec![root];
        let mut rng = ChaCha8Rng::seed_from_u64(self.budget.seed);
        for level in 1..=self.budget.max_primitives {
            if best.distance <= target || self.exhausted() {
                break;
            }
            let mut children: Vec<Candidate> = Vec::new();
            for parent in &beam {
                for kind in KINDS {
                    if parent.kinds.last() == Some(&kind) {
                        continue;
                    }
                    let mut kinds = parent.kinds.clone();
                    kinds.push(kind);
                    let mut best_child: Option<Candidate> = None;
                    for init in [0.5, 1.5] {
                        if self.exhausted() {
                            break;
                        }
                        let mut d0 = parent.durations.clone();
                        d0.push(init);
                        let c = self.fit(&kinds, d0, target);
                        if best_child.as_ref().map_or(true, |b| c.order(b).is_lt()) {
                            best_child = Some(c);
                        }
                    }
                    children.extend(best_child);
                }
            }
            for _ in 0..self.budget.restarts {
                if self.exhausted() {
                    break;
                }
                let mut kinds: Vec<Kind> = Vec::with_capacity(level);
                while kinds.len() < level {
                    let k = KINDS[rng.random_range(0..3)];
                    if kinds.last() != Some(&k) {
                        kinds.push(k);
                    }
                }
                let d0: Vec<f64> = (0..level).map(|_| rng.random_range(0.1..2.0)).collect();
                children.push(self.fit(&kinds, d0, target));
            }
            children.sort_by(|a, b| a.order(b));
            children.dedup_by(|a, b| a.kinds == b.kinds);
            children.truncate(self.budget.beam_width);
            if let Some(top) = children.first() {
                if top.order(&best).is_lt() {
                    best = top.clone();
                }
            }
            if children.is_empty() {
                break;
            }
            beam = children;
        }
        best
    }
}

/// The best pure-drift time in `[0, horizon]`: sampled, then refined by
/// golden section around the closest samples.
fn drift_match(start: &State, goal: &State, horizon: f64, sys: &LatticeSystem, policy: &IntegratorPolicy) -> Option<(f64, f64)> {
    let stride = policy.dt * policy.record_every.max(1) as f64;
    let samples = (horizon / stride).floor() as usize;
    let mut states = Vec::with_capacity(samples + 1);
    let mut dist = Vec::with_capacity(samples + 1);
    let mut y = start.clone();
    for k in 0..=samples {
        if k > 0 {
            y = free_flow(&y, stride, sys, policy).ok()?;
        }
        dist.push(y.distance(goal));
        states.push(y.clone());
    }
    let mut minima: Vec<usize> = (0..dist.len())
        .filter(|&k| (k == 0 || dist[k] <= dist[k - 1]) && (k + 1 == dist.len() || dist[k] <= dist[k + 1]))
        .collect();
    minima.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]));
    minima.truncate(3);
    let mut best: Option<(f64, f64)> = None;
    for k in minima {
        let base = k.saturating_sub(1);
        let t0 = base as f64 * stride;
        let span = ((k + 1).min(samples) - base) as f64 * stride;
        let (s, _) = golden_section(
            |s| free_flow(&states[base], s, sys, policy).map_or(f64::INFINITY, |y| y.distance(goal)),
            0.0,
            span,
            1e-12,
        );
        for t in [t0 + s, k as f64 * stride] {
            let d = free_flow(start, t, sys, policy).map_or(f64::INFINITY, |y| y.distance(goal));
            if best.map_or(true, |b| d < b.1) {
                best = Some((t, d));
            }
        }
    }
    best
}

/// Plans a forward-time steering from `start` to `goal`. When the budget
/// runs out the closest plan found is returned with `success = false`.
pub fn plan_steering(
    start: &State,
    goal: &State,
    tol: f64,
    budget: &PlannerBudget,
    sys: &LatticeSystem,
    mode: PlanMode,
    policy: &IntegratorPolicy,
) -> Result<PlanOutcome> {
    if start.n() != sys.n() || goal.n() != sys.n() {
        return Err(Error::DimensionMismatch {
            expected: sys.n(),
            got: if start.n() != sys.n() { start.n() } else { goal.n() },
        });
    }
    if !(tol > 0.0) {
        return Err(Error::Precondition(format!("tolerance must be positive, got {tol}")));
    }
    let d0 = start.distance(goal);
    if d0 <= tol {
        return Ok(PlanOutcome {
            plan: SteeringPlan::empty(mode),
            distance: d0,
            success: true,
            evaluations: 0,
        });
    }

    if let Some((t, d)) = drift_match(start, goal, budget.drift_horizon, sys, policy) {
        if d <= tol {
            return Ok(PlanOutcome {
                plan: SteeringPlan::new(mode, vec![Primitive::FreeFlow { t }])?,
                distance: d,
                success: true,
                evaluations: 0,
            });
        }
    }

    let search_policy = policy.with_dt(budget.search_dt.max(policy.dt));
    let mut prefix = Vec::new();
    let p_start = start.total_momentum();
    if p_start.abs() > 1e-12 {
        prefix.push(Primitive::ConstantLeg {
            u: -p_start,
            duration: 1.0,
        });
    }
    let p_goal = goal.total_momentum();
    let suffix = (p_goal.abs() > 1e-12).then_some(Primitive::ConstantLeg {
        u: p_goal,
        duration: 1.0,
    });
    let on_plane = plan_endpoint(start, &SteeringPlan::new(mode, prefix.clone())?, sys, &search_policy)?;
    let mut search = Search {
        sys,
        mode,
        goal,
        on_plane,
        suffix,
        policy: search_policy,
        budget: *budget,
        evaluations: 0,
    };
    let mut best = search.beam(0.1 * tol);

    let assemble = |c: &Candidate| -> Result<SteeringPlan> {
        let mut prims = prefix.clone();
        for (k, &d) in c.kinds.iter().zip(&c.durations) {
            let drop = d == 0.0 && (*k == Kind::Free || mode == PlanMode::Idealized);
            if !drop {
                prims.push(k.primitive(d));
            }
        }
        prims.extend(suffix);
        SteeringPlan::new(mode, prims)
    };
    let mut plan = assemble(&best)?;
    let mut distance = plan_endpoint(start, &plan, sys, policy)?.distance(goal);
    if distance > tol && best.distance.is_finite() && !best.kinds.is_empty() {
        // polish with the caller's step
        let on_plane = plan_endpoint(start, &SteeringPlan::new(mode, prefix.clone())?, sys, policy)?;
        search.on_plane = on_plane;
        search.policy = *policy;
        search.budget.fit_iterations = 10;
        search.budget.max_evaluations = search.evaluations + 200;
        let polished = search.fit(&best.kinds, best.durations.clone(), 0.1 * tol);
        let p2 = assemble(&polished)?;
        let d2 = plan_endpoint(start, &p2, sys, policy)?.distance(goal);
        if d2 < distance {
            best = polished;
            plan = p2;
            distance = d2;
        }
    }
    let _ = best;
    Ok(PlanOutcome {
        plan,
        distance,
        success: distance <= tol,
        evaluations: search.evaluations,
    })
}
