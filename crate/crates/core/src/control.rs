//! Piecewise-constant admissible controls.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::LatticeSystem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub duration: f64,
    pub value: f64,
}

/// The force applied at one (1-based) particle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub site: usize,
    pub segments: Vec<Segment>,
}

impl Channel {
    pub fn horizon(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// `∫ u dt` over the channel's horizon.
    pub fn integral(&self) -> f64 {
        self.segments.iter().map(|s| s.duration * s.value).sum()
    }

    /// Right-continuous value at `t`; the last value is held at the horizon.
    pub fn value_at(&self, t: f64) -> f64 {
        let mut start = 0.0;
        for seg in &self.segments {
            if t < start + seg.duration {
                return seg.value;
            }
            start += seg.duration;
        }
        self.segments.last().map_or(0.0, |s| s.value)
    }
}

/// Piecewise-constant control on `[0, T]`, one channel per forced particle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSignal {
    pub channels: Vec<Channel>,
}

/// A maximal interval on which every channel is constant. `values` follows
/// the order of the system's control sites.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Piece {
    pub duration: f64,
    pub values: Vec<f64>,
}

impl ControlSignal {
    pub fn single(site: usize, segments: Vec<Segment>) -> Self {
        Self {
            channels: vec![Channel { site, segments }],
        }
    }

    /// `(duration, value)` pairs on a single site.
    pub fn steps(site: usize, steps: &[(f64, f64)]) -> Self {
        Self::single(
            site,
            steps
                .iter()
                .map(|&(duration, value)| Segment { duration, value })
                .collect(),
        )
    }

    pub fn constant(site: usize, value: f64, horizon: f64) -> Self {
        Self::steps(site, &[(horizon, value)])
    }

    /// Zero force on every control site of `sys` for `horizon`.
    pub fn zero(sys: &LatticeSystem, horizon: f64) -> Self {
        Self {
            channels: sys
                .control_sites()
                .iter()
                .map(|&site| Channel {
                    site,
                    segments: vec![Segment {
                        duration: horizon,
                        value: 0.0,
                    }],
                })
                .collect(),
        }
    }

    pub fn horizon(&self) -> f64 {
        self.channels.first().map_or(0.0, Channel::horizon)
    }

    /// Sum of `∫ u dt` over all channels: the total momentum injected.
    pub fn impulse(&self) -> f64 {
        self.channels.iter().map(Channel::integral).sum()
    }

    /// Total `∫_0^t u dt` over all channels.
    pub fn impulse_until(&self, t: f64) -> f64 {
        self.channels
            .iter()
            .map(|ch| {
                let mut start = 0.0;
                let mut acc = 0.0;
                for seg in &ch.segments {
                    if t <= start {
                        break;
                    }
                    acc += seg.value * seg.duration.min(t - start);
                    start += seg.duration;
                }
                acc
            })
            .sum()
    }

    pub fn channel(&self, site: usize) -> Option<&Channel> {
        self.channels.iter().find(|c| c.site == site)
    }

    /// Values at `t`, ordered like `sys.control_sites()`.
    pub fn values_at(&self, sys: &LatticeSystem, t: f64) -> Vec<f64> {
        sys.control_sites()
            .iter()
            .map(|&s| self.channel(s).map_or(0.0, |c| c.value_at(t)))
            .collect()
    }

    /// Appends the segments of `other` (same channel layout) after `self`.
    pub fn concat(&mut self, other: &ControlSignal) -> Result<()> {
        if self.channels.is_empty() {
            *self = other.clone();
            return Ok(());
        }
        for ch in &mut self.channels {
            let tail = other.channel(ch.site).ok_or_else(|| {
                Error::InvalidConfig(format!("control site {} missing from appended signal", ch.site))
            })?;
            ch.segments.extend_from_slice(&tail.segments);
        }
        Ok(())
    }

    /// The signal cut or zero-padded to exactly `horizon`.
    pub fn fitted_to(&self, horizon: f64) -> Self {
        let channels = self
            .channels
            .iter()
            .map(|ch| {
                let mut segments = Vec::new();
                let mut used = 0.0;
                for seg in &ch.segments {
                    let room = horizon - used;
                    if room <= 1e-12 * horizon.max(1.0) {
                        break;
                    }
                    let duration = seg.duration.min(room);
                    segments.push(Segment {
                        duration,
                        value: seg.value,
                    });
                    used += duration;
                }
                let room = horizon - used;
                if room > 1e-12 * horizon.max(1.0) {
                    segments.push(Segment {
                        duration: room,
                        value: 0.0,
                    });
                }
                Channel {
                    site: ch.site,
                    segments,
                }
            })
            .collect();
        Self { channels }
    }

    pub fn validate(&self, sys: &LatticeSystem) -> Result<()> {
        let sites = sys.control_sites();
        if self.channels.len() != sites.len()
            || !sites.iter().all(|s| self.channel(*s).is_some())
        {
            let got: Vec<usize> = self.channels.iter().map(|c| c.site).collect();
            return Err(Error::InvalidConfig(format!(
                "control signal sites {got:?} do not match system control sites {sites:?}"
            )));
        }
        for ch in &self.channels {
            for seg in &ch.segments {
                if !(seg.duration > 0.0) || !seg.duration.is_finite() {
                    return Err(Error::InvalidConfig(format!(
                        "control segment durations must be positive, got {}",
                        seg.duration
                    )));
                }
                if !seg.value.is_finite() {
                    return Err(Error::InvalidConfig("control value is not finite".into()));
                }
            }
        }
        let horizon = self.horizon();
        for ch in &self.channels {
            if (ch.horizon() - horizon).abs() > 1e-12 * (1.0 + horizon) {
                return Err(Error::InvalidConfig(format!(
                    "channel for site {} has horizon {} but expected {}",
                    ch.site,
                    ch.horizon(),
                    horizon
                )));
            }
        }
        Ok(())
    }

    /// Clips every value into `[-bound, bound]`.
    pub fn clamped(&self, bound: f64) -> Self {
        let mut out = self.clone();
        for ch in &mut out.channels {
            for seg in &mut ch.segments {
                seg.value = seg.value.clamp(-bound, bound);
            }
        }
        out
    }

    /// Merges all channels onto their common breakpoints.
    pub(crate) fn pieces(&self, sys: &LatticeSystem) -> Vec<Piece> {
        if let [ch] = self.channels.as_slice() {
            return ch
                .segments
                .iter()
                .map(|seg| Piece {
                    duration: seg.duration,
                    values: vec![seg.value],
                })
                .collect();
        }
        let horizon = self.horizon();
        let mut cuts: Vec<f64> = Vec::new();
        for ch in &self.channels {
            let mut t = 0.0;
            for seg in &ch.segments {
                t += seg.duration;
                cuts.push(t.min(horizon));
            }
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let tol = 1e-12 * (1.0 + horizon);
        let mut pieces = Vec::new();
        let mut start = 0.0;
        for cut in cuts {
            if cut - start <= tol {
                continue;
            }
            let mid = 0.5 * (start + cut);
            pieces.push(Piece {
                duration: cut - start,
                values: self.values_at(sys, mid),
            });
            start = cut;
        }
        pieces
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Potential;
    use crate::system::LatticeConfig;

    #[test]
    fn pieces_merge_breakpoints() {
        let sys = LatticeSystem::new(LatticeConfig::periodic(3).with_sites(vec![1, 3]), Potential::toda()).unwrap();
        let sig = ControlSignal {
            channels: vec![
                Channel {
                    site: 1,
                    segments: vec![
                        Segment { duration: 1.0, value: 1.0 },
                        Segment { duration: 1.0, value: 2.0 },
                    ],
                },
                Channel {
                    site: 3,
                    segments: vec![
                        Segment { duration: 0.5, value: -1.0 },
                        Segment { duration: 1.5, value: 0.0 },
                    ],
                },
            ],
        };
        sig.validate(&sys).unwrap();
        let pieces = sig.pieces(&sys);
        assert_eq!(pieces.len(), 3);
        assert_eq!(pieces[0].values, vec![1.0, -1.0]);
        assert_eq!(pieces[1].values, vec![1.0, 0.0]);
        assert_eq!(pieces[2].values, vec![2.0, 0.0]);
        assert_eq!(sig.impulse(), 3.0 - 0.5);
    }

    #[test]
    fn fitting_pads_and_truncates() {
        let sig = ControlSignal::steps(1, &[(1.0, 2.0), (1.0, -1.0)]);
        let short = sig.fitted_to(1.5);
        assert_eq!(short.channels[0].segments.len(), 2);
        assert_eq!(short.horizon(), 1.5);
        assert_eq!(short.impulse(), 1.5);
        let long = sig.fitted_to(3.0);
        assert_eq!(long.channels[0].segments.last().unwrap().value, 0.0);
        assert_eq!(long.horizon(), 3.0);
    }

    #[test]
    fn rejects_bad_durations_and_sites() {
        let sys = LatticeSystem::periodic(3, Potential::toda()).unwrap();
        assert!(ControlSignal::steps(1, &[(0.0, 1.0)]).validate(&sys).is_err());
        assert!(ControlSignal::steps(1, &[(-1.0, 1.0)]).validate(&sys).is_err());
        assert!(ControlSignal::steps(2, &[(1.0, 1.0)]).validate(&sys).is_err());
        assert!(ControlSignal::steps(1, &[(1.0, 1.0)]).validate(&sys).is_ok());
    }

    #[test]
    fn right_continuous_values() {
        let ch = Channel {
            site: 1,
            segments: vec![
                Segment { duration: 1.0, value: 1.0 },
                Segment { duration: 1.0, value: 2.0 },
            ],
        };
        assert_eq!(ch.value_at(0.0), 1.0);
        assert_eq!(ch.value_at(1.0), 2.0);
        assert_eq!(ch.value_at(2.0), 2.0);
    }
}
