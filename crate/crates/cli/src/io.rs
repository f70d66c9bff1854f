//! CSV input and output.

use multiparticle::trajectory::format_sig17;
use multiparticle::{Channel, ControlSignal, LatticeSystem, Segment, State, Trajectory};

use crate::Failure;

/// Parses `duration,u1[,u2]` rows, one value per control site. A first
/// line that does not start with a number is taken as a header.
pub fn parse_control_csv(text: &str, sys: &LatticeSystem) -> Result<ControlSignal, Failure> {
    let sites = sys.control_sites();
    let mut channels: Vec<Channel> = sites
        .iter()
        .map(|&site| Channel {
            site,
            segments: Vec::new(),
        })
        .collect();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if i == 0 && fields[0].parse::<f64>().is_err() {
            continue;
        }
        let bad = |msg: String| Failure::Usage(format!("control file line {}: {msg}", i + 1));
        if fields.len() != 1 + sites.len() {
            return Err(bad(format!(
                "expected {} columns (duration and one value per control site), got {}",
                1 + sites.len(),
                fields.len()
            )));
        }
        let values = fields
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| bad(format!("`{f}` is not a number"))))
            .collect::<Result<Vec<f64>, Failure>>()?;
        let duration = values[0];
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(bad(format!("durations must be positive, got {duration}")));
        }
        for (ch, &value) in channels.iter_mut().zip(&values[1..]) {
            ch.segments.push(Segment { duration, value });
        }
    }
    if channels.iter().all(|c| c.segments.is_empty()) {
        return Err(Failure::Usage("control file has no rows".into()));
    }
    Ok(ControlSignal { channels })
}

/// `duration,u1..um` rows at the breakpoints of every channel.
pub fn control_csv(signal: &ControlSignal, sys: &LatticeSystem) -> String {
    let mut cuts: Vec<f64> = vec![0.0];
    for ch in &signal.channels {
        let mut t = 0.0;
        for s in &ch.segments {
            t += s.duration;
            cuts.push(t);
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut out = String::from("duration");
    for k in 1..=sys.control_sites().len() {
        out.push_str(&format!(",u{k}"));
    }
    out.push('\n');
    for w in cuts.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        out.push_str(&format_sig17(w[1] - w[0]));
        for v in signal.values_at(sys, mid) {
            out.push(',');
            out.push_str(&format_sig17(v));
        }
        out.push('\n');
    }
    out
}

pub fn trajectory_csv(traj: &Trajectory) -> Result<String, Failure> {
    let mut buf = Vec::new();
    traj.write_csv(&mut buf)
        .map_err(|e| Failure::Numeric(format!("cannot format trajectory: {e}")))?;
    String::from_utf8(buf).map_err(|e| Failure::Numeric(e.to_string()))
}

pub fn states_csv(states: &[State]) -> String {
    let n = states.first().map_or(0, State::n);
    let mut out: Vec<String> = (1..=n).map(|k| format!("q{k}")).collect();
    out.extend((1..=n).map(|k| format!("p{k}")));
    let mut text = out.join(",");
    text.push('\n');
    for s in states {
        let row: Vec<String> = s.q.iter().chain(&s.p).map(|v| format_sig17(*v)).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    text
}
