use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::control::ControlSignal;
use crate::integrate::IntegratorPolicy;
use crate::state::State;

/// Sampled solution of the (controlled) equations of motion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    /// Control values at each sample, ordered like the system's control sites.
    pub controls: Vec<Vec<f64>>,
    pub policy: IntegratorPolicy,
    /// The signal that produced the trajectory, when there was one.
    pub signal: Option<ControlSignal>,
}

impl Trajectory {
    pub(crate) fn start(state: State, controls: Vec<f64>, policy: IntegratorPolicy) -> Self {
        Self {
            times: vec![0.0],
            states: vec![state],
            controls: vec![controls],
            policy,
            signal: None,
        }
    }

    pub(crate) fn push(&mut self, t: f64, state: State, controls: Vec<f64>) {
        self.times.push(t);
        self.states.push(state);
        self.controls.push(controls);
    }

    /// Replaces the newest sample (used for instantaneous jumps).
    pub(crate) fn replace_last(&mut self, state: State, controls: Vec<f64>) {
        *self.states.last_mut().unwrap() = state;
        *self.controls.last_mut().unwrap() = controls;
    }

    /// Appends `other` shifted to start at this trajectory's end time. The
    /// first sample of `other` coincides with our last one and is dropped.
    pub(crate) fn append(&mut self, other: Trajectory) {
        let t0 = self.end_time();
        for ((t, s), u) in other
            .times
            .into_iter()
            .zip(other.states)
            .zip(other.controls)
            .skip(1)
        {
            self.push(t0 + t, s, u);
        }
    }

    pub fn first(&self) -> &State {
        &self.states[0]
    }

    pub fn last(&self) -> &State {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().expect("trajectory is never empty")
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Writes `t,q1..qn,p1..pn,u1..um` with 17 significant digits and LF endings.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let n = self.states[0].n();
        let m = self.controls.first().map_or(0, Vec::len);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|k| format!("q{k}")));
        header.extend((1..=n).map(|k| format!("p{k}")));
        header.extend((1..=m).map(|k| format!("u{k}")));
        writeln!(out, "{}", header.join(","))?;
        for ((t, s), u) in self.times.iter().zip(&self.states).zip(&self.controls) {
            let mut row = Vec::with_capacity(1 + 2 * n + m);
            row.push(format_sig17(*t));
            row.extend(s.q.iter().map(|v| format_sig17(*v)));
            row.extend(s.p.iter().map(|v| format_sig17(*v)));
            row.extend(u.iter().map(|v| format_sig17(*v)));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Scientific notation with 17 significant digits (round-trips any f64).
pub fn format_sig17(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::free_trajectory;
    use crate::potential::Potential;
    use crate::system::LatticeSystem;

    #[test]
    fn csv_header_and_round_trip() {
        let sys = LatticeSystem::periodic(3, Potential::toda()).unwrap();
        let x = State::new(vec![0.1, 0.0, -0.1], vec![0.2, -0.1, -0.1]).unwrap();
        let traj = free_trajectory(&x, 0.05, &sys, &IntegratorPolicy::default()).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,q1,q2,q3,p1,p2,p3,u1");
        let row: Vec<f64> = lines
            .next()
            .unwrap()
            .split(',')
            .map(|f| f.parse().unwrap())
            .collect();
        assert_eq!(row[1], 0.1);
        assert_eq!(row[5], -0.1);
        assert!(!text.contains('\r'));
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 7.0e21] {
            assert_eq!(format_sig17(v).parse::<f64>().unwrap(), v);
        }
    }
}
