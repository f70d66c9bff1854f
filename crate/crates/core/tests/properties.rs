use multiparticle::analysis::lebesgue_bound;
use multiparticle::counterexamples::{build_periodic_degenerate_trimer, invariant_plane_residual, RESIDUAL_TOL};
use multiparticle::dynamics::controlled_rhs;
use multiparticle::lie::{
    closed_form_bracket_family, degeneracy_scan, default_depth, genericity_determinant, lie_rank, numeric_bracket,
    Classification, ScanGrid, StepRule, VectorField, DEFAULT_RANK_TOL,
};
use multiparticle::oracle::reverse_free_flow;
use multiparticle::steering::{g_shift, plan_endpoint, pulse, PlanMode, Primitive, Sign, SteeringPlan};
use multiparticle::{
    feedback_decouple, free_flow, ControlSignal, IntegratorPolicy, LatticeConfig, LatticeSystem, OddPolynomial,
    Potential, State,
};
use proptest::prelude::*;

fn toda(n: usize) -> LatticeSystem {
    LatticeSystem::periodic(n, Potential::toda()).unwrap()
}

fn state(n: usize, r: f64) -> impl Strategy<Value = State> {
    (prop::collection::vec(-r..r, n), prop::collection::vec(-r..r, n)).prop_map(|(q, p)| State::new(q, p).unwrap())
}

fn steps(site_value_bound: f64) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.1..2.0f64, -site_value_bound..site_value_bound), 1..6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn trimer_plane_is_invariant(
        a3 in 0.2..2.0f64,
        b in -0.5..0.5f64,
        q in prop::collection::vec(-1.0..1.0f64, 2),
        p in prop::collection::vec(-1.0..1.0f64, 2),
        u in steps(2.0),
    ) {
        // F(t) = a3 t (t² − 9b²) is odd with F(−3b) = 0
        let force = OddPolynomial::from_odd_terms(-9.0 * b * b * a3, a3, 0.0);
        let (sys, plane) = build_periodic_degenerate_trimer(&force, b).unwrap();
        let x = State::new(vec![q[0], q[1], q[1] + 2.0 * b], vec![p[0], p[1], p[1]]).unwrap();
        prop_assume!(plane.residual(&x) < 1e-12);
        let signal = ControlSignal::steps(1, &u);
        let horizon = signal.horizon();
        let r = invariant_plane_residual(&sys, &plane, &x, &signal, horizon, &IntegratorPolicy::default()).unwrap();
        prop_assert!(r < RESIDUAL_TOL, "residual {r}");
    }

    #[test]
    fn numeric_brackets_match_closed_form(x in state(3, 1.0), which in 0usize..3) {
        let pot = [Potential::toda(), Potential::harmonic(), Potential::quartic()][which].clone();
        let sys = LatticeSystem::periodic(3, pot).unwrap();
        let f = VectorField::drift(&sys);
        let g = VectorField::control(1, &sys).unwrap();
        let closed = closed_form_bracket_family(&x, &sys).unwrap();
        let h = StepRule::default().step_at(&x.to_flat());
        let ad1 = numeric_bracket(&f, &g, &x, h).unwrap();
        let diff: f64 = ad1.0.iter().zip(&closed[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(diff < 1e-7, "ad f g off by {diff}");
        let ad2 = f.bracket(&f.bracket(&g, StepRule::nested()), StepRule::nested()).eval(&x).unwrap();
        let diff: f64 = ad2.0.iter().zip(&closed[1].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(diff < 1e-7 * closed[1].norm().max(1.0), "ad^2 f g off by {diff}");
    }

    #[test]
    fn toda_rank_is_full_along_orbits(x in state(3, 1.0), t in 0.1..5.0f64) {
        let sys = toda(3);
        let y = free_flow(&x, t, &sys, &IntegratorPolicy::default()).unwrap();
        for z in [&x, &y] {
            let r = lie_rank(z, &sys, default_depth(&sys), DEFAULT_RANK_TOL).unwrap();
            prop_assert_eq!(r.rank, 6);
        }
    }

    #[test]
    fn box_width_is_bond_bound_times_n(c in 0.5..50.0f64, total in -10.0..10.0f64, n in 2usize..6) {
        let bx = lebesgue_bound(&Potential::toda(), c * (n as f64), n).unwrap();
        prop_assume!(!bx.empty);
        let (lo, hi) = bx.interval(total);
        prop_assert!(((hi - lo) - bx.bond_bound * n as f64).abs() < 1e-9);
        prop_assert!(((lo + hi) * 0.5 - (total / n as f64 - bx.bond_bound / 2.0)).abs() < 1e-9);
    }

    #[test]
    fn bond_bound_solves_the_level_equation(c in 3.0..100.0f64, which in 0usize..3) {
        let pot = [Potential::toda(), Potential::harmonic(), Potential::quartic()][which].clone();
        let n = 3;
        let bx = lebesgue_bound(&pot, c, n).unwrap();
        let target = c + (n as f64 - 1.0) * pot.lower_bound.unwrap();
        prop_assert!((pot.value(bx.bond_bound) - target).abs() < 1e-10 * target.max(1.0));
    }

    #[test]
    fn plans_move_momentum_by_their_bookkeeping(
        x in state(3, 0.5),
        kinds in prop::collection::vec((0usize..4, 0.1..1.5f64, -1.5..1.5f64), 1..6),
    ) {
        let sys = toda(3);
        let prims: Vec<Primitive> = kinds
            .iter()
            .map(|&(k, t, a)| match k {
                0 => Primitive::FreeFlow { t },
                1 => Primitive::ConjugatedFlow { sign: if a > 0.0 { Sign::Plus } else { Sign::Minus }, t },
                2 => Primitive::GShift { amount: a },
                _ => Primitive::ConstantLeg { u: a, duration: t },
            })
            .collect();
        let plan = SteeringPlan::new(PlanMode::Idealized, prims).unwrap();
        let end = plan_endpoint(&x, &plan, &sys, &IntegratorPolicy::default()).unwrap();
        let dp = end.total_momentum() - x.total_momentum();
        prop_assert!((dp - plan.momentum_change()).abs() < 1e-10);
    }

    #[test]
    fn pulses_approach_the_shift(x in state(3, 1.0)) {
        let sys = toda(3);
        let policy = IntegratorPolicy::default();
        let ideal = g_shift(&x, -1.0, &sys).unwrap();
        let errs: Vec<f64> = [10.0, 100.0, 1000.0]
            .iter()
            .map(|&th| pulse(&x, Sign::Minus, th, &sys, &policy).unwrap().distance(&ideal))
            .collect();
        prop_assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
        // the pulse drifts along f for time 1/θ
        let speed = multiparticle::drift(&x, &sys).unwrap().norm() + 1.0;
        prop_assert!(errs[2] < 2.0 * speed / 1000.0, "{errs:?}");
    }

    #[test]
    fn feedback_turns_periodic_into_open(x in state(4, 1.0), u in -3.0..3.0f64, v in -3.0..3.0f64) {
        let periodic = LatticeSystem::new(LatticeConfig::periodic(4).with_sites(vec![1, 4]), Potential::toda()).unwrap();
        let open = LatticeSystem::new(LatticeConfig::open(4).with_sites(vec![1, 4]), Potential::toda()).unwrap();
        let (ut, vt) = feedback_decouple(&periodic, u, v, &x).unwrap();
        let a = controlled_rhs(&x, &periodic, &[u, v]).unwrap();
        let b = controlled_rhs(&x, &open, &[ut, vt]).unwrap();
        let diff = a.0.iter().zip(&b.0).map(|(s, t)| (s - t).abs()).fold(0.0, f64::max);
        prop_assert!(diff < 1e-12 * a.norm().max(1.0), "residual {diff}");
    }

    #[test]
    fn reverse_flow_undoes_forward_flow(x in state(3, 1.0), t in 0.0..5.0f64) {
        let sys = toda(3);
        let policy = IntegratorPolicy::default();
        let y = free_flow(&x, t, &sys, &policy).unwrap();
        let back = reverse_free_flow(&y, t, &sys, &policy).unwrap();
        prop_assert!(back.distance(&x) < 1e-10, "{}", back.distance(&x));
    }
}

#[test]
fn determinant_and_degeneracy_agree_on_builtins() {
    let grid = ScanGrid::default();
    let toda = degeneracy_scan(&Potential::toda(), &grid).unwrap();
    assert_eq!(toda.classification, Classification::Generic);
    assert!(genericity_determinant(&Potential::toda(), 0.3, -0.3).abs() > 1e-3);

    let quartic = degeneracy_scan(&Potential::quartic(), &grid).unwrap();
    assert_ne!(quartic.classification, Classification::Generic);
    for a in [-2.0, -0.5, 0.1, 1.7] {
        let d = 2.0 * quartic.shift - a;
        assert!(genericity_determinant(&Potential::quartic(), a, d).abs() < 1e-12);
    }

    let harmonic = degeneracy_scan(&Potential::harmonic(), &grid).unwrap();
    assert_ne!(harmonic.classification, Classification::Generic);
    assert_eq!(genericity_determinant(&Potential::harmonic(), 0.4, 1.1), 0.0);
}

#[test]
fn rank_survives_deep_families() {
    // stiff bond q1 − q2 ≈ 1.53: high ad_f powers dwarf g by ~14 orders
    let sys = toda(4);
    let x = State::new(
        vec![0.6858221764202646, -0.8445308055006913, -0.7924095057875502, -0.49125365768248797],
        vec![0.44231983440331657, -0.7207143001326703, -0.6074240018021082, 0.006704727437232716],
    )
    .unwrap();
    for depth in [4, 8, 16] {
        assert_eq!(lie_rank(&x, &sys, depth, DEFAULT_RANK_TOL).unwrap().rank, 8, "depth {depth}");
    }
}

#[test]
fn harmonic_family_stays_at_kalman_rank() {
    let sys = LatticeSystem::periodic(3, Potential::harmonic()).unwrap();
    let x = State::new(vec![0.2, -0.7, 0.4], vec![1.0, 0.3, -0.5]).unwrap();
    let r = lie_rank(&x, &sys, 12, DEFAULT_RANK_TOL).unwrap();
    assert_eq!(r.rank, 4);
    assert_eq!(r.rank_with_drift, 5);
}
