use multiparticle::analysis::{conservation_report, lebesgue_bound};
use multiparticle::counterexamples::build_nonperiodic_trimer;
use multiparticle::lie::{degeneracy_scan, lie_rank, ScanGrid, DEFAULT_RANK_TOL};
use multiparticle::steering::{PlanMode, Primitive, Sign, SteeringPlan};
use multiparticle::{controlled_flow, ControlSignal, IntegratorPolicy, LatticeSystem, OddPolynomial, Potential, State};
use serde::de::DeserializeOwned;
use serde::Serialize;

fn round_trip<T: Serialize + DeserializeOwned + PartialEq + std::fmt::Debug>(value: &T) {
    let text = serde_json::to_string(value).unwrap();
    let back: T = serde_json::from_str(&text).unwrap();
    assert_eq!(&back, value, "{text}");
}

#[test]
fn reports_round_trip() {
    let sys = LatticeSystem::periodic(3, Potential::toda()).unwrap();
    let x = State::new(vec![0.1, -0.2, 0.1], vec![0.3, 0.0, -0.3]).unwrap();
    round_trip(&sys);
    round_trip(&x);
    round_trip(&lie_rank(&x, &sys, 6, DEFAULT_RANK_TOL).unwrap());
    round_trip(&degeneracy_scan(&Potential::quartic(), &ScanGrid::default()).unwrap());
    round_trip(&lebesgue_bound(&Potential::toda(), 5.0, 3).unwrap());
    let signal = ControlSignal::steps(1, &[(0.5, 1.0), (0.25, -2.0)]);
    round_trip(&signal);
    let traj = controlled_flow(&x, &signal, &sys, &IntegratorPolicy::default()).unwrap();
    round_trip(&traj);
    round_trip(&conservation_report(&traj, &sys).unwrap());
    let (open, plane) = build_nonperiodic_trimer(&OddPolynomial::from_odd_terms(1.0, 0.5, 0.0), 0.3).unwrap();
    round_trip(&open);
    round_trip(&plane);
}

#[test]
fn plans_use_tagged_primitives() {
    let plan = SteeringPlan::new(
        PlanMode::admissible(),
        vec![
            Primitive::ConstantLeg { u: -0.5, duration: 1.0 },
            Primitive::ConjugatedFlow { sign: Sign::Minus, t: 0.75 },
            Primitive::Pulse { sign: Sign::Plus, theta: 1e3 },
        ],
    )
    .unwrap();
    round_trip(&plan);
    let json = serde_json::to_value(&plan).unwrap();
    assert_eq!(json["mode"]["mode"], "admissible");
    assert_eq!(json["primitives"][1]["kind"], "conjugated-flow");
    assert_eq!(json["primitives"][1]["sign"], "-");
}
