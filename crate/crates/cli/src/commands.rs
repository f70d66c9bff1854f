use std::path::{Path, PathBuf};

use multiparticle::analysis::{conservation_report, sample_compactness};
use multiparticle::config::KeyValues;
use multiparticle::counterexamples::{
    build_nonperiodic_trimer, build_periodic_degenerate_trimer, invariant_plane_residual, CounterexampleReport,
    Plane, RESIDUAL_TOL,
};
use multiparticle::lie::{
    degeneracy_scan, default_depth, genericity_determinant, kalman_rank, lie_rank, Classification, ScanGrid,
    DEFAULT_RANK_TOL,
};
use multiparticle::steering::{
    execute_plan, plan_steering, recurrence_search, PlanMode, PlannerBudget, DEFAULT_THETA,
};
use multiparticle::{
    controlled_flow, ControlSignal, IntegratorPolicy, LatticeSystem, Method, OddPolynomial, Potential, State,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::io::{control_csv, parse_control_csv, states_csv, trajectory_csv};
use crate::{Case, Failure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    NotFound,
}

impl Verdict {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

pub struct Report {
    pub command: &'static str,
    pub verdict: Verdict,
    pub result: Value,
    /// Extra files for `--out`, as `(name, contents)`.
    pub files: Vec<(String, String)>,
}

impl Report {
    fn new(command: &'static str, verdict: Verdict, result: Value) -> Self {
        Self {
            command,
            verdict,
            result,
            files: Vec::new(),
        }
    }

    pub fn to_json(&self, ctx: &Context) -> String {
        let doc = json!({
            "command": self.command,
            "config": ctx.kv.to_map(),
            "config_path": ctx.path.as_ref().map(|p| p.display().to_string()),
            "seed": ctx.seed,
            "verdict": self.verdict,
            "result": self.result,
        });
        serde_json::to_string_pretty(&doc).expect("reports are plain data")
    }
}

pub struct Context {
    kv: KeyValues,
    path: Option<PathBuf>,
    seed: u64,
    out: Option<PathBuf>,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports are plain data")
}

impl Context {
    pub fn load(path: Option<&Path>, seed: u64, out: Option<PathBuf>) -> Result<Self, Failure> {
        let kv = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", p.display())))?;
                KeyValues::parse(&text).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?
            }
            None => KeyValues::parse("").expect("empty config parses"),
        };
        Ok(Self {
            kv,
            path: path.map(Path::to_path_buf),
            seed,
            out,
        })
    }

    pub fn write(&self, name: &str, body: &str) -> Result<(), Failure> {
        if let Some(dir) = &self.out {
            let path = dir.join(name);
            std::fs::write(&path, body)
                .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?;
        }
        Ok(())
    }

    fn system(&self) -> Result<LatticeSystem, Failure> {
        if self.path.is_none() {
            return Err(Failure::Usage("this command needs --config".into()));
        }
        Ok(self.kv.system()?)
    }

    fn policy(&self) -> Result<IntegratorPolicy, Failure> {
        let mut policy = IntegratorPolicy::default();
        policy.dt = self.kv.f64_or("dt", policy.dt)?;
        policy.record_every = self.kv.usize_or("record_every", policy.record_every)?;
        if let Some(m) = self.kv.raw("method") {
            policy.method = match m {
                "yoshida4" => Method::Yoshida4,
                "verlet" => Method::Verlet,
                other => return Err(Failure::Usage(format!("unknown method `{other}` (expected yoshida4|verlet)"))),
            };
        }
        if !(policy.dt > 0.0) || !policy.dt.is_finite() || policy.record_every == 0 {
            return Err(Failure::Usage("dt must be positive and record_every at least 1".into()));
        }
        policy.control_clamp = self.kv.opt_f64("control_clamp")?;
        Ok(policy)
    }

    /// State from `{prefix}q` and `{prefix}p`, or `fallback` when both are absent.
    fn state(&self, q_key: &str, p_key: &str, fallback: State) -> Result<State, Failure> {
        let q = self.kv.list::<f64>(q_key)?;
        let p = self.kv.list::<f64>(p_key)?;
        let n = fallback.n();
        let q = q.unwrap_or_else(|| fallback.q.clone());
        let p = p.unwrap_or_else(|| fallback.p.clone());
        if q.len() != n || p.len() != n {
            return Err(Failure::Usage(format!(
                "`{q_key}` and `{p_key}` need {n} entries, got {} and {}",
                q.len(),
                p.len()
            )));
        }
        Ok(State::new(q, p)?)
    }

    fn initial_state(&self, sys: &LatticeSystem) -> Result<State, Failure> {
        self.state("q0", "p0", default_point(sys.n()))
    }
}

/// A fixed generic point with zero total momentum.
fn default_point(n: usize) -> State {
    let q: Vec<f64> = (0..n).map(|j| 0.3 * ((j + 1) as f64).sin()).collect();
    let raw: Vec<f64> = (0..n).map(|j| 0.2 * ((j + 1) as f64).cos()).collect();
    let mean = raw.iter().sum::<f64>() / n as f64;
    State {
        q,
        p: raw.iter().map(|v| v - mean).collect(),
    }
}

pub fn simulate(ctx: &Context, control: Option<&Path>) -> Result<Report, Failure> {
    let sys = ctx.system()?;
    let policy = ctx.policy()?;
    let x0 = ctx.initial_state(&sys)?;
    let signal = match control {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read control file {}: {e}", path.display())))?;
            parse_control_csv(&text, &sys)?
        }
        None => {
            let horizon = ctx.kv.f64_or("horizon", 10.0)?;
            if !(horizon > 0.0) {
                return Err(Failure::Usage(format!("horizon must be positive, got {horizon}")));
            }
            ControlSignal::zero(&sys, horizon)
        }
    };
    let traj = controlled_flow(&x0, &signal, &sys, &policy)?;
    let summary = conservation_report(&traj, &sys)?;
    let mut report = Report::new(
        "simulate",
        Verdict::Pass,
        json!({
            "system": to_value(&sys),
            "policy": to_value(&policy),
            "initial": to_value(&x0),
            "final": to_value(traj.last()),
            "summary": to_value(&summary),
        }),
    );
    report.files.push(("trajectory.csv".into(), trajectory_csv(&traj)?));
    report.files.push(("control.csv".into(), control_csv(&signal, &sys)));
    Ok(report)
}

pub fn rank(ctx: &Context) -> Result<Report, Failure> {
    let sys = ctx.system()?;
    let x = ctx.initial_state(&sys)?;
    let depth = ctx.kv.usize_or("depth", default_depth(&sys))?;
    let tol = ctx.kv.f64_or("rank_tol", DEFAULT_RANK_TOL)?;
    let r = lie_rank(&x, &sys, depth, tol)?;
    let full = 2 * sys.n();
    Ok(Report::new(
        "rank",
        Verdict::from_bool(r.rank == full),
        json!({
            "system": to_value(&sys),
            "depth": depth,
            "full_rank": full,
            "rank": r.rank,
            "rank_with_drift": r.rank_with_drift,
            "report": to_value(&r),
        }),
    ))
}

pub fn generic_check(ctx: &Context) -> Result<Report, Failure> {
    let sys = ctx.system()?;
    let x = ctx.initial_state(&sys)?;
    let defaults = ScanGrid::default();
    let grid = ScanGrid {
        t_min: ctx.kv.f64_or("scan.t_min", defaults.t_min)?,
        t_max: ctx.kv.f64_or("scan.t_max", defaults.t_max)?,
        t_points: ctx.kv.usize_or("scan.t_points", defaults.t_points)?,
        b_min: ctx.kv.f64_or("scan.b_min", defaults.b_min)?,
        b_max: ctx.kv.f64_or("scan.b_max", defaults.b_max)?,
        b_step: ctx.kv.f64_or("scan.b_step", defaults.b_step)?,
    };
    let scan = degeneracy_scan(&sys.potential, &grid)?;
    let n = sys.n();
    let s = sys.primary_site()? - 1;
    let a = x.q[s] - x.q[(s + 1) % n];
    let d = x.q[(s + n - 1) % n] - x.q[s];
    let kalman = if sys.potential.linear_stiffness().is_some() {
        Some(kalman_rank(&sys, sys.primary_site()?)?)
    } else {
        None
    };
    Ok(Report::new(
        "generic-check",
        Verdict::from_bool(scan.classification == Classification::Generic),
        json!({
            "potential": to_value(&sys.potential),
            "scan": to_value(&scan),
            "determinant": { "a": a, "d": d, "value": genericity_determinant(&sys.potential, a, d) },
            "kalman_rank": kalman,
        }),
    ))
}

fn random_signal(rng: &mut ChaCha8Rng, site: usize, horizon: f64, pieces: usize, amplitude: f64) -> ControlSignal {
    let mut cuts: Vec<f64> = (1..pieces).map(|_| rng.random_range(0.0..horizon)).collect();
    cuts.push(0.0);
    cuts.push(horizon);
    cuts.sort_by(f64::total_cmp);
    let steps: Vec<(f64, f64)> = cuts
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| (w[1] - w[0], rng.random_range(-amplitude..amplitude)))
        .collect();
    ControlSignal::steps(site, &steps)
}

pub fn counterexample(ctx: &Context, case: Case) -> Result<Report, Failure> {
    let policy = ctx.policy()?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let cubic = OddPolynomial::from_odd_terms(0.0, 1.0, 0.0);
    let (sys, plane, x0, name): (LatticeSystem, Plane, State, &str) = match case {
        Case::PeriodicQuartic => {
            let (sys, plane) = build_periodic_degenerate_trimer(&cubic, 0.0)?;
            let (q, p) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let x = State::new(vec![rng.random_range(-1.0..1.0), q, q], vec![rng.random_range(-1.0..1.0), p, p])?;
            (sys, plane, x, "periodic-quartic")
        }
        Case::NonperiodicHarmonic => {
            let b = ctx.kv.f64_or("param.b", 0.0)?;
            let (sys, plane) = build_nonperiodic_trimer(&OddPolynomial::from_odd_terms(1.0, 0.0, 0.0), b)?;
            let (q, p) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let x = State::new(
                vec![q, rng.random_range(-1.0..1.0), q - 2.0 * b],
                vec![p, rng.random_range(-1.0..1.0), p],
            )?;
            (sys, plane, x, "nonperiodic-harmonic")
        }
        Case::TodaNegative => {
            let (_, plane) = build_periodic_degenerate_trimer(&cubic, 0.0)?;
            let sys = LatticeSystem::periodic(3, Potential::toda())?;
            let x = State::new(vec![0.5, 0.0, 0.0], vec![0.0; 3])?;
            (sys, plane, x, "toda-negative")
        }
    };
    let negative = case == Case::TodaNegative;
    let horizon = ctx.kv.f64_or("horizon", if negative { 1.0 } else { 10.0 })?;
    let pieces = ctx.kv.usize_or("control_pieces", 5)?.max(1);
    let amplitude = ctx.kv.f64_or("control_amplitude", 2.0)?;
    let site = sys.primary_site()?;
    let signal = random_signal(&mut rng, site, horizon, pieces, amplitude);
    let residual = invariant_plane_residual(&sys, &plane, &x0, &signal, horizon, &policy)?;
    let threshold = if negative { 1e-3 } else { RESIDUAL_TOL };
    let pass = if negative { residual > threshold } else { residual < threshold };
    let report = CounterexampleReport {
        case: name.into(),
        system: sys,
        plane,
        initial: x0,
        signal,
        horizon,
        residual,
        threshold,
        pass,
    };
    Ok(Report::new("counterexample", Verdict::from_bool(pass), to_value(&report)))
}

pub fn steer(ctx: &Context) -> Result<Report, Failure> {
    let sys = ctx.system()?;
    let policy = ctx.policy()?;
    let start = ctx.initial_state(&sys)?;
    let goal = ctx.state("goal_q", "goal_p", start.clone())?;
    let mode = match ctx.kv.raw("mode").unwrap_or("idealized") {
        "idealized" => PlanMode::Idealized,
        "admissible" => PlanMode::Admissible {
            theta: ctx.kv.f64_or("theta", DEFAULT_THETA)?,
        },
        other => return Err(Failure::Usage(format!("unknown mode `{other}` (expected idealized|admissible)"))),
    };
    let tol = ctx.kv.f64_or("tol", 1e-2)?;
    let defaults = PlannerBudget::default();
    let budget = PlannerBudget {
        max_primitives: ctx.kv.usize_or("max_primitives", defaults.max_primitives)?,
        beam_width: ctx.kv.usize_or("beam_width", defaults.beam_width)?,
        max_evaluations: ctx.kv.usize_or("max_evaluations", defaults.max_evaluations)?,
        max_duration: ctx.kv.f64_or("max_duration", defaults.max_duration)?,
        drift_horizon: ctx.kv.f64_or("drift_horizon", defaults.drift_horizon)?,
        seed: ctx.seed,
        ..defaults
    };
    let outcome = plan_steering(&start, &goal, tol, &budget, &sys, mode, &policy)?;
    let traj = execute_plan(&start, &outcome.plan, &sys, &policy)?;
    let mut report = Report::new(
        "steer",
        Verdict::from_bool(outcome.success),
        json!({
            "system": to_value(&sys),
            "start": to_value(&start),
            "goal": to_value(&goal),
            "tol": tol,
            "budget": to_value(&budget),
            "plan": to_value(&outcome.plan),
            "distance": outcome.distance,
            "success": outcome.success,
            "evaluations": outcome.evaluations,
            "final": to_value(traj.last()),
        }),
    );
    if let Ok(signal) = outcome.plan.to_signal(&sys) {
        report.files.push(("control.csv".into(), control_csv(&signal, &sys)));
    }
    report.files.push(("trajectory.csv".into(), trajectory_csv(&traj)?));
    Ok(report)
}

pub fn recurrence(ctx: &Context) -> Result<Report, Failure> {
    let sys = ctx.system()?;
    let policy = ctx.policy()?;
    let x = ctx.initial_state(&sys)?;
    let eps = ctx.kv.f64_or("epsilon", 0.05)?;
    let t_min = ctx.kv.f64_or("t_min", 1.0)?;
    let t_max = ctx.kv.f64_or("t_max", 100.0)?;
    let r = recurrence_search(&x, eps, t_min, t_max, &sys, &policy)?;
    Ok(Report::new(
        "recurrence",
        if r.found { Verdict::Pass } else { Verdict::NotFound },
        json!({
            "system": to_value(&sys),
            "initial": to_value(&x),
            "epsilon": eps,
            "t_min": t_min,
            "t_max": t_max,
            "found": r.found,
            "tau": r.tau,
            "distance": r.distance,
        }),
    ))
}

pub fn bounds(ctx: &Context, samples_csv: bool) -> Result<Report, Failure> {
    let sys = ctx.system()?;
    let c: f64 = ctx
        .kv
        .require("energy")?
        .parse()
        .map_err(|_| Failure::Usage("`energy` must be a number".into()))?;
    let total_q = ctx.kv.f64_or("total_q", 0.0)?;
    let samples = ctx.kv.usize_or("samples", 10_000)?;
    let (check, states) = sample_compactness(&sys.potential, c, total_q, sys.n(), samples, ctx.seed)?;
    let interval = (!check.energy_box.empty).then(|| check.energy_box.interval(total_q));
    let mut report = Report::new(
        "bounds",
        Verdict::from_bool(check.violations == 0),
        json!({
            "potential": to_value(&sys.potential),
            "box": to_value(&check.energy_box),
            "interval": interval,
            "check": to_value(&check),
        }),
    );
    if samples_csv {
        if ctx.out.is_none() {
            return Err(Failure::Usage("--samples-csv needs --out".into()));
        }
        report.files.push(("samples.csv".into(), states_csv(&states)));
    }
    Ok(report)
}
