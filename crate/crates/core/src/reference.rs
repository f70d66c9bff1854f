//! Adaptive Dormand–Prince 5(4) integration, used only to cross-check the
//! fixed-step symplectic schemes.

use crate::control::ControlSignal;
use crate::dynamics::forces_into;
use crate::error::{Error, Result};
use crate::state::State;
use crate::system::LatticeSystem;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn rhs(sys: &LatticeSystem, ext: &[f64], x: &[f64], out: &mut [f64]) {
    let n = sys.n();
    out[..n].copy_from_slice(&x[n..]);
    forces_into(&x[..n], sys, &mut out[n..]);
    for k in 0..n {
        out[n + k] += ext[k];
    }
}

fn integrate_piece(sys: &LatticeSystem, ext: &[f64], x: &mut Vec<f64>, duration: f64, rtol: f64, t_offset: f64) -> Result<()> {
    let dim = x.len();
    let atol = rtol * 1e-2;
    let mut k = vec![vec![0.0; dim]; 7];
    let mut tmp = vec![0.0; dim];
    let mut t = 0.0;
    let mut h = (duration * 0.01).min(1e-2);
    rhs(sys, ext, x, &mut k[0]);
    while t < duration {
        if t + h > duration {
            h = duration - t;
        }
        if h < 1e-14 * (1.0 + t.abs()) && t + h < duration {
            return Err(Error::StepUnderflow { time: t_offset + t, step: h });
        }
        let stage = |tmp: &mut Vec<f64>, k: &Vec<Vec<f64>>, coeffs: &[(usize, f64)]| {
            for i in 0..dim {
                let mut acc = x[i];
                for &(j, a) in coeffs {
                    acc += h * a * k[j][i];
                }
                tmp[i] = acc;
            }
        };
        stage(&mut tmp, &k, &[(0, A21)]);
        rhs(sys, ext, &tmp, &mut k[1]);
        stage(&mut tmp, &k, &[(0, A31), (1, A32)]);
        rhs(sys, ext, &tmp, &mut k[2]);
        stage(&mut tmp, &k, &[(0, A41), (1, A42), (2, A43)]);
        rhs(sys, ext, &tmp, &mut k[3]);
        stage(&mut tmp, &k, &[(0, A51), (1, A52), (2, A53), (3, A54)]);
        rhs(sys, ext, &tmp, &mut k[4]);
        stage(&mut tmp, &k, &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)]);
        rhs(sys, ext, &tmp, &mut k[5]);
        stage(&mut tmp, &k, &[(0, B1), (2, B3), (3, B4), (4, B5), (5, B6)]);
        let y_new = tmp.clone();
        rhs(sys, ext, &y_new, &mut k[6]);
        let mut err = 0.0;
        for i in 0..dim {
            let e = h * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
            let sc = atol + rtol * x[i].abs().max(y_new[i].abs());
            err += (e / sc) * (e / sc);
        }
        let err = (err / dim as f64).sqrt();
        if !err.is_finite() {
            return Err(Error::NonFinite { time: t_offset + t });
        }
        if err <= 1.0 {
            t += h;
            x.copy_from_slice(&y_new);
            k.swap(0, 6);
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
    }
    Ok(())
}

/// Endpoint of the controlled motion over `[0, horizon]` computed with
/// adaptive step control at relative tolerance `rtol`. Without a signal
/// the motion is free.
pub fn reference_flow(
    state: &State,
    signal: Option<&ControlSignal>,
    horizon: f64,
    sys: &LatticeSystem,
    rtol: f64,
) -> Result<State> {
    sys.check_dim(state.q.len())?;
    let n = sys.n();
    let mut x = state.to_flat();
    let pieces = match signal {
        Some(s) => {
            s.validate(sys)?;
            s.pieces(sys)
        }
        None => vec![crate::control::Piece {
            duration: horizon,
            values: vec![0.0; sys.control_sites().len()],
        }],
    };
    let mut t0 = 0.0;
    for piece in pieces {
        let mut ext = vec![0.0; n];
        for (&site, &u) in sys.control_sites().iter().zip(&piece.values) {
            ext[site - 1] += u;
        }
        integrate_piece(sys, &ext, &mut x, piece.duration, rtol, t0)?;
        t0 += piece.duration;
    }
    Ok(State::from_flat(&x))
}
