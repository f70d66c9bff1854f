//! Exact iterated brackets `ad_f^k V` by Taylor expansion along the drift.
//!
//! With `x(t) = e^{tf}(x0)` and `M(t) = De^{tf}(x0)`, the pulled-back field
//! `W(t) = M(t)^{-1} V(x(t))` has Taylor coefficients `W_k = ad_f^k V / k!`.
//! Everything is a polynomial recurrence in jets of the bond values, so the
//! result is exact up to roundoff.

use nalgebra::DMatrix;

use crate::jet::Jet;
use crate::system::LatticeSystem;

/// Fields whose `ad_f` series can be expanded.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Seed {
    /// A constant field on the flat layout.
    Constant(Vec<f64>),
    /// `(0; S_j(q))` with `S_j = ∂^j/∂q_s^j` of `∂F/∂q_s` for the 0-based site `s`.
    /// `S_0 = ad_f² g`, `S_1 = [ad_f² g, ad_f g]`, `S_{j+1} = [S_j, ad_f g]`.
    SiteDerivative { site: usize, j: usize },
}

/// `S_j(q)` as a jet-valued p-vector.
fn site_derivative_jets(sys: &LatticeSystem, q: &[Jet], site: usize, j: usize, order: usize) -> Vec<Jet> {
    let n = sys.n();
    let mut out = vec![Jet::zero(order); n];
    let parity = if j % 2 == 0 { 1.0 } else { -1.0 };
    for b in 0..sys.bond_count() {
        let (lo, hi) = sys.bond(b);
        if lo != site && hi != site {
            continue;
        }
        let d = sys.potential.derivative_jet(j + 2, &(&q[lo] - &q[hi]));
        let mut add = |idx: usize, s: f64| out[idx] = &out[idx] + &d.scale(s);
        // lo == site: coef (e_hi − e_lo); hi == site: (−1)^j coef (e_lo − e_hi)
        if lo == site {
            add(hi, 1.0);
            add(lo, -1.0);
        }
        if hi == site {
            add(lo, parity);
            add(hi, -parity);
        }
    }
    out
}

/// `S_j(q)` at a point.
pub(crate) fn site_derivative(sys: &LatticeSystem, q: &[f64], site: usize, j: usize) -> Vec<f64> {
    let jets: Vec<Jet> = q.iter().map(|&v| Jet::constant(v, 0)).collect();
    site_derivative_jets(sys, &jets, site, j, 0)
        .into_iter()
        .map(|c| c.value())
        .collect()
}

fn force_jets(sys: &LatticeSystem, q: &[Jet], order: usize) -> Vec<Jet> {
    let mut out = vec![Jet::zero(order); sys.n()];
    for b in 0..sys.bond_count() {
        let (lo, hi) = sys.bond(b);
        let phi = sys.potential.derivative_jet(1, &(&q[lo] - &q[hi]));
        out[lo] = &out[lo] - &phi;
        out[hi] = &out[hi] + &phi;
    }
    out
}

/// Taylor jets of `q(t)` and `p(t)` along the free flow from `x`.
fn orbit_jets(sys: &LatticeSystem, x: &[f64], order: usize) -> Vec<Jet> {
    let n = sys.n();
    let mut q: Vec<Jet> = x[..n].iter().map(|&v| Jet::constant(v, order)).collect();
    let mut p: Vec<Jet> = x[n..].iter().map(|&v| Jet::constant(v, order)).collect();
    for k in 0..order {
        let force = force_jets(sys, &q, order);
        for i in 0..n {
            q[i].c[k + 1] = p[i].c[k] / (k + 1) as f64;
            p[i].c[k + 1] = force[i].c[k] / (k + 1) as f64;
        }
    }
    q.extend(p);
    q
}

/// `[ad_f^0 V, ad_f^1 V, ..., ad_f^depth V]` at `x` (flat layout).
pub(crate) fn ad_drift_series(sys: &LatticeSystem, x: &[f64], seed: &Seed, depth: usize) -> Vec<Vec<f64>> {
    let n = sys.n();
    let dim = 2 * n;
    let order = depth;
    let jets = orbit_jets(sys, x, order);
    let q = &jets[..n];

    // Taylor coefficients of the Jacobian Df(x(t)) = [[0, I], [J, 0]]
    let mut stiff: Vec<DMatrix<f64>> = vec![DMatrix::zeros(n, n); order + 1];
    for b in 0..sys.bond_count() {
        let (lo, hi) = sys.bond(b);
        let k = sys.potential.derivative_jet(2, &(&q[lo] - &q[hi]));
        for (i, m) in stiff.iter_mut().enumerate() {
            let c = k.c[i];
            m[(lo, lo)] -= c;
            m[(hi, hi)] -= c;
            m[(lo, hi)] += c;
            m[(hi, lo)] += c;
        }
    }
    let df: Vec<DMatrix<f64>> = stiff
        .iter()
        .enumerate()
        .map(|(i, j)| {
            let mut m = DMatrix::zeros(dim, dim);
            if i == 0 {
                for r in 0..n {
                    m[(r, n + r)] = 1.0;
                }
            }
            m.view_mut((n, 0), (n, n)).copy_from(j);
            m
        })
        .collect();

    // M' = Df M, M(0) = I
    let mut m: Vec<DMatrix<f64>> = vec![DMatrix::identity(dim, dim)];
    for k in 0..order {
        let mut acc = DMatrix::zeros(dim, dim);
        for i in 0..=k {
            acc += &df[i] * &m[k - i];
        }
        m.push(acc / (k + 1) as f64);
    }

    // coefficients of V(x(t))
    let v: Vec<Vec<f64>> = match seed {
        Seed::Constant(c) => {
            let mut v = vec![vec![0.0; dim]; order + 1];
            v[0] = c.clone();
            v
        }
        Seed::SiteDerivative { site, j } => {
            let s = site_derivative_jets(sys, q, *site, *j, order);
            (0..=order)
                .map(|k| {
                    let mut row = vec![0.0; dim];
                    for i in 0..n {
                        row[n + i] = s[i].c[k];
                    }
                    row
                })
                .collect()
        }
    };

    // M W = V, order by order
    let mut w: Vec<nalgebra::DVector<f64>> = Vec::with_capacity(order + 1);
    let mut factorial = 1.0;
    let mut out = Vec::with_capacity(order + 1);
    for k in 0..=order {
        let mut wk = nalgebra::DVector::from_vec(v[k].clone());
        for i in 1..=k {
            wk -= &m[i] * &w[k - i];
        }
        if k > 0 {
            factorial *= k as f64;
        }
        out.push(wk.iter().map(|c| c * factorial).collect());
        w.push(wk);
    }
    out
}
