//! Even/odd shift symmetry of `φ'` and the linear (Kalman) rank oracle.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::system::LatticeSystem;

/// Below this residual a symmetry `φ'(b+t) = c φ'(b−t)` is accepted.
pub const SYMMETRY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    Generic,
    /// `φ'(b+t) = φ'(b−t)`
    EvenShift,
    /// `φ'(b+t) = −φ'(b−t)`
    OddShift,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub t_points: usize,
    pub b_min: f64,
    pub b_max: f64,
    pub b_step: f64,
}

impl Default for ScanGrid {
    fn default() -> Self {
        Self {
            t_min: -5.0,
            t_max: 5.0,
            t_points: 201,
            b_min: -10.0,
            b_max: 10.0,
            b_step: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyReport {
    pub classification: Classification,
    /// Best-fitting centre `b`.
    pub shift: f64,
    /// `+1` or `−1`, the sign of the better fit.
    pub sign: i32,
    pub residual: f64,
    pub even_fit: (f64, f64),
    pub odd_fit: (f64, f64),
}

/// `‖φ'(b+t) − c φ'(b−t)‖ / (‖φ'(b+t)‖ + ‖φ'(b−t)‖)` over the `t` grid.
fn residual(pot: &Potential, ts: &[f64], b: f64, c: f64) -> f64 {
    let (mut diff, mut plus, mut minus) = (0.0, 0.0, 0.0);
    for &t in ts {
        let a = pot.phi_prime(b + t);
        let m = pot.phi_prime(b - t);
        diff += (a - c * m).powi(2);
        plus += a * a;
        minus += m * m;
    }
    let scale = plus.sqrt() + minus.sqrt();
    if scale == 0.0 {
        return 0.0;
    }
    let r = diff.sqrt() / scale;
    if r.is_nan() {
        f64::INFINITY
    } else {
        r
    }
}

fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> (f64, f64) {
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..iters {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Best `(b, residual)` for sign `c`. The coarse grid is visited in order of
/// increasing `|b|` and only strict improvements are taken, so flat
/// residuals resolve to the smallest `|b|`.
fn fit(pot: &Potential, ts: &[f64], grid: &ScanGrid, c: f64) -> (f64, f64) {
    let steps = ((grid.b_max.max(-grid.b_min)) / grid.b_step).ceil() as i64;
    let mut best = (0.0, f64::INFINITY);
    for k in 0..=steps {
        for b in [k as f64 * grid.b_step, -(k as f64) * grid.b_step] {
            if b < grid.b_min || b > grid.b_max {
                continue;
            }
            let r = residual(pot, ts, b, c);
            if r < best.1 {
                best = (b, r);
            }
        }
    }
    if best.1 > 0.0 {
        let lo = (best.0 - grid.b_step).max(grid.b_min);
        let hi = (best.0 + grid.b_step).min(grid.b_max);
        let refined = golden_min(|b| residual(pot, ts, b, c), lo, hi, 80);
        if refined.1 < best.1 {
            best = refined;
        }
    }
    best
}

/// Looks for a centre `b` and sign `c` with `φ'(b+t) = c φ'(b−t)` on the grid.
pub fn degeneracy_scan(pot: &Potential, grid: &ScanGrid) -> Result<DegeneracyReport> {
    if grid.t_min > -5.0 || grid.t_max < 5.0 || grid.t_points < 201 {
        return Err(Error::Precondition(
            "scan grid must cover [-5, 5] with at least 201 points".into(),
        ));
    }
    if !(grid.b_step > 0.0) || grid.b_min > 0.0 || grid.b_max < 0.0 {
        return Err(Error::Precondition(
            "shift range must contain 0 and have a positive step".into(),
        ));
    }
    let ts: Vec<f64> = (0..grid.t_points)
        .map(|i| grid.t_min + (grid.t_max - grid.t_min) * i as f64 / (grid.t_points - 1) as f64)
        .collect();
    let even = fit(pot, &ts, grid, 1.0);
    let odd = fit(pot, &ts, grid, -1.0);
    let (shift, sign, res) = if odd.1 < even.1 {
        (odd.0, -1, odd.1)
    } else {
        (even.0, 1, even.1)
    };
    let classification = if res >= SYMMETRY_TOL {
        Classification::Generic
    } else if sign == 1 {
        Classification::EvenShift
    } else {
        Classification::OddShift
    };
    Ok(DegeneracyReport {
        classification,
        shift,
        sign,
        residual: res,
        even_fit: even,
        odd_fit: odd,
    })
}

/// Rank of the Kalman matrix `[B, AB, ..., A^{2n−1}B]` for an affine force
/// law, with `B = ∂/∂p_site`.
pub fn kalman_rank(sys: &LatticeSystem, site: usize) -> Result<usize> {
    let n = sys.n();
    if n < 2 {
        return Err(Error::Precondition("need at least two particles".into()));
    }
    let k = sys.potential.linear_stiffness().ok_or_else(|| {
        Error::Precondition("Kalman rank needs an affine force law (quadratic potential)".into())
    })?;
    let s = sys.site_index(site)?;
    let dim = 2 * n;
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    for r in 0..n {
        a[(r, n + r)] = 1.0;
    }
    for b in 0..sys.bond_count() {
        let (lo, hi) = sys.bond(b);
        a[(n + lo, lo)] -= k;
        a[(n + hi, hi)] -= k;
        a[(n + lo, hi)] += k;
        a[(n + hi, lo)] += k;
    }
    let mut krylov = DMatrix::<f64>::zeros(dim, dim);
    let mut v = nalgebra::DVector::<f64>::zeros(dim);
    v[n + s] = 1.0;
    for j in 0..dim {
        let len = v.norm();
        if len > 0.0 {
            krylov.set_column(j, &(&v / len));
        }
        v = &a * v;
    }
    let sv = krylov.svd(false, false).singular_values;
    let max = sv.max();
    if max == 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&x| x > 1e-8 * max).count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::OddPolynomial;

    #[test]
    fn builtin_classification() {
        let g = ScanGrid::default();
        let toda = degeneracy_scan(&Potential::toda(), &g).unwrap();
        assert_eq!(toda.classification, Classification::Generic);
        assert!(toda.residual > 1e-3);
        let quartic = degeneracy_scan(&Potential::quartic(), &g).unwrap();
        assert_eq!(quartic.classification, Classification::EvenShift);
        assert_eq!(quartic.shift, 0.0);
        assert!(quartic.residual < 1e-12);
        let harmonic = degeneracy_scan(&Potential::harmonic(), &g).unwrap();
        assert_eq!(harmonic.classification, Classification::EvenShift);
        assert_eq!(harmonic.shift, 0.0);
    }

    #[test]
    fn shifted_potentials_are_located() {
        let g = ScanGrid::default();
        let cubic = OddPolynomial::from_odd_terms(0.0, 1.0, 0.0);
        let r = degeneracy_scan(&Potential::shifted_odd(&cubic, 0.73, 0.0), &g).unwrap();
        assert_eq!(r.classification, Classification::EvenShift);
        assert!((r.shift - 0.73).abs() < 1e-6, "{r:?}");
        // φ' = (t − 1.2): odd about 1.2
        let p = Potential::polynomial(vec![0.0, 0.0, 0.0, 1.0 / 6.0], 1.2);
        let r = degeneracy_scan(&p, &g).unwrap();
        assert_eq!(r.classification, Classification::OddShift);
        assert!((r.shift - 1.2).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn small_grid_rejected() {
        let g = ScanGrid {
            t_points: 50,
            ..ScanGrid::default()
        };
        assert!(degeneracy_scan(&Potential::toda(), &g).is_err());
    }

    #[test]
    fn kalman_examples() {
        let periodic = LatticeSystem::periodic(3, Potential::harmonic()).unwrap();
        assert_eq!(kalman_rank(&periodic, 1).unwrap(), 4);
        let open = LatticeSystem::open(3, Potential::harmonic()).unwrap();
        assert_eq!(kalman_rank(&open, 1).unwrap(), 6);
        let toda = LatticeSystem::periodic(3, Potential::toda()).unwrap();
        assert!(kalman_rank(&toda, 1).is_err());
    }
}
