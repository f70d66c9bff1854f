//! Closed-form brackets, the inductive spanning chain and accessibility rank.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::series::{ad_drift_series, site_derivative, Seed};
use crate::dynamics::drift_flat;
use crate::error::{Error, Result};
use crate::state::{State, TangentVector};
use crate::system::LatticeSystem;

/// Default singular-value threshold relative to the largest singular value.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyMember {
    pub label: String,
    pub vector: TangentVector,
    /// Number of brackets with `f` applied to the member's seed. Members of
    /// equal order have comparable scale; see [`rank_of_family`].
    #[serde(default)]
    pub order: usize,
}

impl FamilyMember {
    pub fn new(label: impl Into<String>, v: Vec<f64>, order: usize) -> Self {
        Self {
            label: label.into(),
            vector: TangentVector(v),
            order,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub point: State,
    pub family: Vec<String>,
    /// Descending.
    pub singular_values: Vec<f64>,
    pub rank: usize,
    pub tolerance: f64,
    /// Rank once the drift `f` itself is added to the family.
    pub rank_with_drift: usize,
}

fn check(x: &State, sys: &LatticeSystem) -> Result<()> {
    if x.q.len() != sys.n() || x.p.len() != sys.n() {
        return Err(Error::DimensionMismatch {
            expected: sys.n(),
            got: x.q.len(),
        });
    }
    Ok(())
}

fn p_vector(n: usize, p: &[f64]) -> Vec<f64> {
    let mut v = vec![0.0; 2 * n];
    v[n..].copy_from_slice(p);
    v
}

fn unit(dim: usize, i: usize, s: f64) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[i] = s;
    v
}

/// `[ad_f g, ad_f² g, [ad_f² g, ad_f g]]` at `x` for the primary control site.
///
/// At site 1 of a periodic chain these are `−∂q₁`,
/// `φ'(q₁−q₂)(∂p₂−∂p₁) + φ'(q_n−q₁)(∂p_n−∂p₁)` and
/// `φ''(q₁−q₂)(∂p₂−∂p₁) − φ''(q_n−q₁)(∂p_n−∂p₁)`.
pub fn closed_form_bracket_family(x: &State, sys: &LatticeSystem) -> Result<Vec<TangentVector>> {
    check(x, sys)?;
    let s = sys.site_index(sys.primary_site()?)?;
    let n = sys.n();
    Ok(vec![
        TangentVector(unit(2 * n, s, -1.0)),
        TangentVector(p_vector(n, &site_derivative(sys, &x.q, s, 0))),
        TangentVector(p_vector(n, &site_derivative(sys, &x.q, s, 1))),
    ])
}

/// `[ad_f^0 V, ..., ad_f^depth V]` for a constant field `V`, exact up to roundoff.
pub fn ad_drift_powers(x: &State, sys: &LatticeSystem, v: &TangentVector, depth: usize) -> Result<Vec<TangentVector>> {
    check(x, sys)?;
    if v.0.len() != 2 * sys.n() {
        return Err(Error::DimensionMismatch {
            expected: 2 * sys.n(),
            got: v.0.len(),
        });
    }
    Ok(ad_drift_series(sys, &x.to_flat(), &Seed::Constant(v.0.clone()), depth)
        .into_iter()
        .map(TangentVector)
        .collect())
}

/// `−φ'(a)φ''(d) − φ'(d)φ''(a)`: nonzero iff `ad_f² g` and
/// `[ad_f² g, ad_f g]` span both neighbour directions of the forced particle.
pub fn genericity_determinant(pot: &crate::potential::Potential, a: f64, d: f64) -> f64 {
    -pot.phi_prime(a) * pot.phi_second(d) - pot.phi_prime(d) * pot.phi_second(a)
}

/// Neighbour `k` of site `s` with the coefficients of `ad_f² g` and
/// `[ad_f² g, ad_f g]` along `∂p_k − ∂p_s`.
fn neighbour_coefficients(x: &State, sys: &LatticeSystem, s: usize) -> Vec<(usize, f64, f64)> {
    let mut out: Vec<(usize, f64, f64)> = Vec::new();
    for b in 0..sys.bond_count() {
        let (lo, hi) = sys.bond(b);
        let (k, a, c) = if lo == s {
            let v = x.q[lo] - x.q[hi];
            (hi, sys.potential.phi_prime(v), sys.potential.phi_second(v))
        } else if hi == s {
            let v = x.q[lo] - x.q[hi];
            (lo, sys.potential.phi_prime(v), -sys.potential.phi_second(v))
        } else {
            continue;
        };
        match out.iter_mut().find(|e| e.0 == k) {
            Some(e) => {
                e.1 += a;
                e.2 += c;
            }
            None => out.push((k, a, c)),
        }
    }
    out
}

fn neighbours_recoverable(coeffs: &[(usize, f64, f64)]) -> bool {
    match coeffs {
        [(_, a, c)] => *a != 0.0 || *c != 0.0,
        [(_, a1, c1), (_, a2, c2)] => {
            let det = a1 * c2 - a2 * c1;
            let scale = (a1.abs() + a2.abs()) * (c1.abs() + c2.abs());
            scale > 0.0 && det.abs() > 1e-12 * scale
        }
        _ => false,
    }
}

/// The inductive chain: `f, g, ad_f g, ad_f² g, [ad_f² g, ad_f g]`, then
/// `Y^k = ∂p_k − ∂p_s` for the neighbours `k` of the forced site when the
/// genericity determinant allows recovering them, followed by
/// `[Y^k, f], [[Y^k, f], f], ...` up to `depth` brackets with `f`. When the
/// neighbours cannot be separated the chains `ad_f^j` of the two brackets
/// are appended instead. Labels use 1-based particle indices.
pub fn spanning_chain(x: &State, sys: &LatticeSystem, depth: usize) -> Result<Vec<FamilyMember>> {
    check(x, sys)?;
    if depth == 0 {
        return Err(Error::Precondition("spanning chain depth must be at least 1".into()));
    }
    let n = sys.n();
    let site = sys.primary_site()?;
    let s = sys.site_index(site)?;
    let flat = x.to_flat();
    let closed = closed_form_bracket_family(x, sys)?;
    let mut out = vec![
        FamilyMember::new("f", drift_flat(&flat, sys), 0),
        FamilyMember::new("g", unit(2 * n, n + s, 1.0), 0),
        FamilyMember::new("ad f g", closed[0].0.clone(), 1),
        FamilyMember::new("ad^2 f g", closed[1].0.clone(), 2),
        FamilyMember::new("[ad^2 f g, ad f g]", closed[2].0.clone(), 0),
    ];
    let coeffs = neighbour_coefficients(x, sys, s);
    if neighbours_recoverable(&coeffs) {
        for &(k, _, _) in &coeffs {
            let mut y = vec![0.0; 2 * n];
            y[n + k] = 1.0;
            y[n + s] -= 1.0;
            let series = ad_drift_series(sys, &flat, &Seed::Constant(y), depth);
            let mut label = format!("Y^{}", k + 1);
            for (j, v) in series.into_iter().enumerate() {
                // [W, f] = −ad_f W
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j > 0 {
                    label = format!("[{label},f]");
                }
                out.push(FamilyMember::new(label.clone(), v.iter().map(|c| sign * c).collect(), j));
            }
        }
    } else {
        for (j, name) in [(0, "ad^2 f g"), (1, "[ad^2 f g, ad f g]")] {
            let series = ad_drift_series(sys, &flat, &Seed::SiteDerivative { site: s, j }, depth);
            for (k, v) in series.into_iter().enumerate().skip(1) {
                out.push(FamilyMember::new(format!("ad^{k} f ({name})"), v, k));
            }
        }
    }
    Ok(out)
}

/// Default bracket depth, `2n`.
pub fn default_depth(sys: &LatticeSystem) -> usize {
    2 * sys.n()
}

/// Members of the ideal generated by the control fields, evaluated at `x`:
/// for every control site `g`, `ad_f^k g`, and `ad_f^k` of
/// `[ad_f² g, ad_f g]` and `[[ad_f² g, ad_f g], ad_f g]`, `k ≤ depth`.
pub fn accessibility_family(x: &State, sys: &LatticeSystem, depth: usize) -> Result<Vec<FamilyMember>> {
    check(x, sys)?;
    let n = sys.n();
    let flat = x.to_flat();
    let mut out = Vec::new();
    for &site in sys.control_sites() {
        let s = sys.site_index(site)?;
        let g = if sys.control_sites().len() == 1 {
            "g".to_string()
        } else {
            format!("g{site}")
        };
        let seeds = [
            (g.clone(), Seed::Constant(unit(2 * n, n + s, 1.0))),
            (format!("[ad^2 f {g}, ad f {g}]"), Seed::SiteDerivative { site: s, j: 1 }),
            (
                format!("[[ad^2 f {g}, ad f {g}], ad f {g}]"),
                Seed::SiteDerivative { site: s, j: 2 },
            ),
        ];
        for (name, seed) in seeds {
            for (k, v) in ad_drift_series(sys, &flat, &seed, depth).into_iter().enumerate() {
                let label = match k {
                    0 => name.clone(),
                    1 => format!("ad f ({name})"),
                    _ => format!("ad^{k} f ({name})"),
                };
                out.push(FamilyMember::new(label, v, k));
            }
        }
    }
    Ok(out)
}

/// Singular values (descending) of the column-normalised family.
fn normalized_singular_values(vectors: &[&[f64]], dim: usize) -> Vec<f64> {
    if vectors.is_empty() {
        return Vec::new();
    }
    let mut m = DMatrix::zeros(dim, vectors.len());
    for (j, v) in vectors.iter().enumerate() {
        let len = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        for i in 0..dim {
            m[(i, j)] = v[i] / len;
        }
    }
    let mut s: Vec<f64> = m.svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

fn threshold_rank(sv: &[f64], tol: f64) -> usize {
    match sv.first() {
        Some(&max) if max > 0.0 => sv.iter().filter(|&&s| s > tol * max).count(),
        _ => 0,
    }
}

/// Rank of `family` by singular-value thresholding. Vectors that vanish
/// are dropped first: zero, or below `1e-12` of the largest member of the
/// same order. High powers of `ad_f` grow like powers of the stiffness, so
/// comparing across orders would discard the low-order fields.
pub fn rank_of_family(point: &State, family: &[FamilyMember], tol: f64) -> Result<RankReport> {
    if family
        .iter()
        .any(|m| m.vector.0.iter().any(|c| !c.is_finite()))
    {
        return Err(Error::NonFinite { time: 0.0 });
    }
    let dim = 2 * point.n();
    let norms: Vec<f64> = family.iter().map(|m| m.vector.norm()).collect();
    let peak = |order: usize| {
        family
            .iter()
            .zip(&norms)
            .filter(|(m, _)| m.order == order)
            .fold(0.0, |acc: f64, (_, &len)| acc.max(len))
    };
    let kept: Vec<&FamilyMember> = family
        .iter()
        .zip(&norms)
        .filter(|(m, &len)| len > 0.0 && len > 1e-12 * peak(m.order))
        .map(|(m, _)| m)
        .collect();
    let vectors: Vec<&[f64]> = kept.iter().map(|m| m.vector.as_slice()).collect();
    let sv = normalized_singular_values(&vectors, dim);
    let rank = threshold_rank(&sv, tol);
    Ok(RankReport {
        point: point.clone(),
        family: kept.iter().map(|m| m.label.clone()).collect(),
        singular_values: sv,
        rank,
        tolerance: tol,
        rank_with_drift: rank,
    })
}

/// Dimension of the span of the accessibility family at `x`.
///
/// The family is the ideal generated by the control fields (see
/// [`accessibility_family`]); `rank_with_drift` also includes `f`.
pub fn lie_rank(x: &State, sys: &LatticeSystem, depth: usize, tol: f64) -> Result<RankReport> {
    let family = accessibility_family(x, sys, depth)?;
    let mut report = rank_of_family(x, &family, tol)?;
    let mut with_drift = family;
    with_drift.push(FamilyMember::new("f", drift_flat(&x.to_flat(), sys), 0));
    report.rank_with_drift = rank_of_family(x, &with_drift, tol)?.rank;
    Ok(report)
}
