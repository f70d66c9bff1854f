//! Hamiltonian, drift field and control fields of the particle chain.

use crate::error::{Error, Result};
use crate::state::{State, TangentVector};
use crate::system::{LatticeSystem, Topology};

/// `H = ½ Σ p_k² + Σ_bonds Φ(q_j − q_{j+1})`.
pub fn hamiltonian(state: &State, sys: &LatticeSystem) -> Result<f64> {
    sys.check_dim(state.q.len())?;
    sys.check_dim(state.p.len())?;
    let kinetic = 0.5 * state.p.iter().map(|p| p * p).sum::<f64>();
    Ok(kinetic + potential_energy(&state.q, sys))
}

pub fn potential_energy(q: &[f64], sys: &LatticeSystem) -> f64 {
    (0..sys.bond_count())
        .map(|j| {
            let (a, b) = sys.bond(j);
            sys.potential.value(q[a] - q[b])
        })
        .sum()
}

/// Writes `ṗ = −∂V/∂q` into `out`; the kernel shared by every integrator.
#[inline]
pub fn forces_into(q: &[f64], sys: &LatticeSystem, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for j in 0..sys.bond_count() {
        let (a, b) = sys.bond(j);
        let f = sys.potential.phi(q[a] - q[b]);
        out[a] -= f;
        out[b] += f;
    }
}

/// The drift `f(x)`: `q̇_k = p_k`, `ṗ_k = φ(q_{k−1}−q_k) − φ(q_k−q_{k+1})`.
pub fn drift(state: &State, sys: &LatticeSystem) -> Result<TangentVector> {
    sys.check_dim(state.q.len())?;
    sys.check_dim(state.p.len())?;
    let n = sys.n();
    let mut v = vec![0.0; 2 * n];
    v[..n].copy_from_slice(&state.p);
    forces_into(&state.q, sys, &mut v[n..]);
    Ok(TangentVector(v))
}

/// Drift on the flat layout, used by the bracket machinery.
pub(crate) fn drift_flat(x: &[f64], sys: &LatticeSystem) -> Vec<f64> {
    let n = sys.n();
    let mut v = vec![0.0; 2 * n];
    v[..n].copy_from_slice(&x[n..]);
    forces_into(&x[..n], sys, &mut v[n..]);
    v
}

/// The constant field `g = ∂/∂p_site` of a (1-based) control site.
pub fn control_field(site: usize, sys: &LatticeSystem) -> Result<TangentVector> {
    let idx = sys.control_index(site)?;
    let n = sys.n();
    let mut v = vec![0.0; 2 * n];
    v[n + idx] = 1.0;
    Ok(TangentVector(v))
}

/// Right-hand side `f(x) + Σ g_site u_site`.
pub fn controlled_rhs(state: &State, sys: &LatticeSystem, controls: &[f64]) -> Result<TangentVector> {
    if controls.len() != sys.control_sites().len() {
        return Err(Error::DimensionMismatch {
            expected: sys.control_sites().len(),
            got: controls.len(),
        });
    }
    let mut v = drift(state, sys)?;
    let n = sys.n();
    for (&site, &u) in sys.control_sites().iter().zip(controls) {
        v.0[n + site - 1] += u;
    }
    Ok(v)
}

/// Feedback that turns the doubly forced periodic chain (sites `1` and `n`)
/// into the doubly forced open chain: returns `(u + φ(q_n − q_1), v − φ(q_n − q_1))`.
pub fn feedback_decouple(sys: &LatticeSystem, u: f64, v: f64, state: &State) -> Result<(f64, f64)> {
    let n = sys.n();
    if sys.topology() != Topology::Periodic {
        return Err(Error::Precondition(
            "feedback decoupling requires a periodic chain".into(),
        ));
    }
    let sites = sys.control_sites();
    if sites.len() != 2 || !sites.contains(&1) || !sites.contains(&n) {
        return Err(Error::InvalidConfig(format!(
            "feedback decoupling needs control sites {{1, {n}}}, got {sites:?}"
        )));
    }
    sys.check_dim(state.q.len())?;
    let offset = sys.potential.phi(state.q[n - 1] - state.q[0]);
    Ok((u + offset, v - offset))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Potential;
    use crate::system::LatticeConfig;

    fn toda3() -> LatticeSystem {
        LatticeSystem::periodic(3, Potential::toda()).unwrap()
    }

    #[test]
    fn hamiltonian_examples() {
        let sys = toda3();
        assert_eq!(hamiltonian(&State::zeros(3), &sys).unwrap(), 3.0);

        let quartic = LatticeSystem::periodic(2, Potential::quartic()).unwrap();
        let s = State::new(vec![0.0, 0.0], vec![1.0, -1.0]).unwrap();
        assert_eq!(hamiltonian(&s, &quartic).unwrap(), 1.0);

        let s = State::new(vec![1.0, 0.0, -1.0], vec![0.0; 3]).unwrap();
        let h = hamiltonian(&s, &sys).unwrap();
        assert!((h - 14.796428).abs() < 1e-6, "{h}");
        assert!((h - (2.0 * 1f64.exp().powi(2) + (-4f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn open_chain_drops_closing_bond() {
        let sys = LatticeSystem::open(3, Potential::toda()).unwrap();
        assert_eq!(hamiltonian(&State::zeros(3), &sys).unwrap(), 2.0);
        let d = drift(&State::zeros(3), &sys).unwrap();
        // ends feel a single neighbour
        assert_eq!(d.p(), &[-2.0, 0.0, 2.0]);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let sys = toda3();
        let s = State::zeros(4);
        assert!(matches!(
            hamiltonian(&s, &sys),
            Err(Error::DimensionMismatch { expected: 3, got: 4 })
        ));
        assert!(drift(&s, &sys).is_err());
    }

    #[test]
    fn drift_examples() {
        let sys = toda3();
        assert!(drift(&State::zeros(3), &sys).unwrap().0.iter().all(|&v| v == 0.0));

        let s = State::new(vec![1.0, 0.0, -1.0], vec![0.0; 3]).unwrap();
        let d = drift(&s, &sys).unwrap();
        let e2 = 2f64.exp();
        let em4 = (-4f64).exp();
        assert!((d.p()[0] - (2.0 * em4 - 2.0 * e2)).abs() < 1e-12);
        assert!((d.p()[0] + 14.741481).abs() < 1e-6);
        assert_eq!(d.p()[1], 0.0);
        assert!((d.p()[2] - 14.741481).abs() < 1e-6);
        assert!(d.q().iter().all(|&v| v == 0.0));

        let harmonic = LatticeSystem::periodic(3, Potential::harmonic()).unwrap();
        let d = drift(&s, &harmonic).unwrap();
        assert_eq!(d.p(), &[-3.0, 0.0, 3.0]);
    }

    #[test]
    fn control_field_examples() {
        let sys = LatticeSystem::new(LatticeConfig::periodic(3).with_sites(vec![1, 3]), Potential::toda()).unwrap();
        assert_eq!(control_field(1, &sys).unwrap().0, vec![0., 0., 0., 1., 0., 0.]);
        assert_eq!(control_field(3, &sys).unwrap().0, vec![0., 0., 0., 0., 0., 1.]);
        let open = LatticeSystem::new(LatticeConfig::open(3).with_sites(vec![2]), Potential::toda()).unwrap();
        assert_eq!(control_field(2, &open).unwrap().0, vec![0., 0., 0., 0., 1., 0.]);
        assert!(matches!(control_field(1, &open), Err(Error::InvalidSite { .. })));
        assert!(control_field(4, &open).is_err());
    }

    #[test]
    fn feedback_examples() {
        let sys = LatticeSystem::new(LatticeConfig::periodic(3).with_sites(vec![1, 3]), Potential::toda()).unwrap();
        let s = State::new(vec![0.4, -0.2, 0.4], vec![0.0; 3]).unwrap();
        assert_eq!(feedback_decouple(&sys, 0.0, 0.0, &s).unwrap(), (2.0, -2.0));

        let h = LatticeSystem::new(LatticeConfig::periodic(3).with_sites(vec![1, 3]), Potential::harmonic()).unwrap();
        assert_eq!(feedback_decouple(&h, 0.3, -0.7, &s).unwrap(), (0.3, -0.7));

        let single = toda3();
        assert!(matches!(
            feedback_decouple(&single, 0.0, 0.0, &s),
            Err(Error::InvalidConfig(_))
        ));
    }
}
