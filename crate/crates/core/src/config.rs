//! Flat `key=value` configuration files.
//!
//! ```text
//! # periodic Toda trimer
//! n=3
//! topology=periodic
//! potential=toda
//! control_sites=1
//! param.b=0
//! ```
//!
//! Lists are comma separated. Keys other than the system keys are kept for
//! the caller (initial states, horizons, tolerances).

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::potential::{OddPolynomial, Potential};
use crate::system::{LatticeConfig, LatticeSystem, Topology};

#[derive(Debug, Clone, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, (String, usize)>,
    line_count: usize,
}

fn err_at(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::InvalidConfig(format!("line {line}: {msg}"))
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut line_count = 0;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            line_count = line_no;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err_at(line_no, format!("expected `key=value`, got `{line}`")))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(err_at(line_no, "empty key"));
            }
            if entries
                .insert(key.to_string(), (value.trim().to_string(), line_no))
                .is_some()
            {
                return Err(err_at(line_no, format!("duplicate key `{key}`")));
            }
        }
        Ok(Self { entries, line_count })
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// All entries as plain strings, for echoing the resolved configuration.
    pub fn to_map(&self) -> BTreeMap<String, String> {
        self.entries
            .iter()
            .map(|(k, (v, _))| (k.clone(), v.clone()))
            .collect()
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(key.to_string(), (value.to_string(), 0));
    }

    fn missing(&self, key: &str) -> Error {
        Error::InvalidConfig(format!(
            "line {}: missing required key `{key}`",
            self.line_count.max(1)
        ))
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.raw(key).ok_or_else(|| self.missing(key))
    }

    fn parse_value<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| err_at(*line, format!("cannot parse `{v}` for key `{key}`"))),
        }
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.parse_value(key)?.unwrap_or(default))
    }

    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>> {
        self.parse_value(key)
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        Ok(self.parse_value(key)?.unwrap_or(default))
    }

    pub fn required_usize(&self, key: &str) -> Result<usize> {
        self.parse_value(key)?.ok_or_else(|| self.missing(key))
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((v, line)) => v
                .split(',')
                .map(|s| {
                    let s = s.trim();
                    s.parse::<T>()
                        .map_err(|_| err_at(*line, format!("cannot parse `{s}` in list `{key}`")))
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    fn line_of(&self, key: &str) -> usize {
        self.entries.get(key).map_or(self.line_count, |(_, l)| *l)
    }

    /// Builds the lattice system described by the system keys.
    pub fn system(&self) -> Result<LatticeSystem> {
        let n = self.required_usize("n")?;
        let topology = match self.require("topology")? {
            "periodic" => Topology::Periodic,
            "open" => Topology::Open,
            other => {
                return Err(err_at(
                    self.line_of("topology"),
                    format!("unknown topology `{other}` (expected periodic|open)"),
                ))
            }
        };
        let sites = self.list::<usize>("control_sites")?.unwrap_or_else(|| vec![1]);
        let potential = self.potential()?;
        let config = LatticeConfig {
            n,
            topology,
            control_sites: sites,
        };
        LatticeSystem::new(config, potential)
            .map_err(|e| err_at(self.line_of("n"), e))
    }

    pub fn potential(&self) -> Result<Potential> {
        let kind = self.require("potential")?;
        let mut pot = match kind {
            "toda" => Potential::toda(),
            "harmonic" => Potential::harmonic(),
            "quartic" => Potential::quartic(),
            "shifted-odd" => {
                let force = OddPolynomial::from_odd_terms(
                    self.f64_or("param.a1", 0.0)?,
                    self.f64_or("param.a3", 0.0)?,
                    self.f64_or("param.a5", 0.0)?,
                );
                Potential::shifted_odd(
                    &force,
                    self.f64_or("param.b", 0.0)?,
                    self.f64_or("param.offset", 0.0)?,
                )
            }
            "polynomial" => {
                let mut coeffs = Vec::new();
                for k in 0..=12 {
                    coeffs.push(self.f64_or(&format!("param.c{k}"), 0.0)?);
                }
                while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
                    coeffs.pop();
                }
                Potential::polynomial(coeffs, self.f64_or("param.center", 0.0)?)
            }
            other => {
                return Err(err_at(
                    self.line_of("potential"),
                    format!("unknown potential `{other}`"),
                ))
            }
        };
        if let Some(b) = self.opt_f64("lower_bound")? {
            if b < 0.0 {
                return Err(err_at(self.line_of("lower_bound"), "lower_bound must be >= 0"));
            }
            pot.lower_bound = Some(b);
        }
        Ok(pot)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_system() {
        let kv = KeyValues::parse("# trimer\nn=3\ntopology=periodic\npotential=toda  # Φ = e^{2x}\ncontrol_sites=1,3\n").unwrap();
        let sys = kv.system().unwrap();
        assert_eq!(sys.n(), 3);
        assert_eq!(sys.control_sites(), &[1, 3]);
        assert_eq!(sys.potential, Potential::toda());
    }

    #[test]
    fn missing_potential_names_a_line() {
        let kv = KeyValues::parse("n=3\ntopology=periodic\n").unwrap();
        let err = kv.system().unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        assert!(err.contains("potential"), "{err}");
    }

    #[test]
    fn bad_lines_are_located() {
        let err = KeyValues::parse("n=3\nnonsense\n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        let kv = KeyValues::parse("n=three\ntopology=open\npotential=toda\n").unwrap();
        assert!(kv.system().unwrap_err().to_string().contains("line 1"));
    }

    #[test]
    fn shifted_odd_parameters() {
        let kv = KeyValues::parse("n=3\ntopology=open\npotential=shifted-odd\nparam.a3=1\nparam.b=0.5\ncontrol_sites=2\n").unwrap();
        let sys = kv.system().unwrap();
        assert!((sys.potential.phi(0.5)).abs() < 1e-15);
        assert!((sys.potential.phi(1.5) - 1.0).abs() < 1e-12);
    }
}
