use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::Potential;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    /// `q_0 = q_n`, `q_{n+1} = q_1`: particle `n` interacts with particle 1.
    Periodic,
    /// Open chain with `n - 1` bonds.
    Open,
}

/// Particle count, boundary convention and the (1-based) forced particles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeConfig {
    pub n: usize,
    pub topology: Topology,
    pub control_sites: Vec<usize>,
}

impl LatticeConfig {
    pub fn periodic(n: usize) -> Self {
        Self {
            n,
            topology: Topology::Periodic,
            control_sites: vec![1],
        }
    }

    pub fn open(n: usize) -> Self {
        Self {
            n,
            topology: Topology::Open,
            control_sites: vec![1],
        }
    }

    pub fn with_sites(mut self, sites: Vec<usize>) -> Self {
        self.control_sites = sites;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidConfig(format!(
                "particle count must be at least 2, got {}",
                self.n
            )));
        }
        for (i, &s) in self.control_sites.iter().enumerate() {
            if s == 0 || s > self.n {
                return Err(Error::InvalidSite { site: s, n: self.n });
            }
            if self.control_sites[..i].contains(&s) {
                return Err(Error::InvalidConfig(format!("control site {s} listed twice")));
            }
        }
        Ok(())
    }
}

/// A nearest-neighbour particle chain with its interaction potential. This
/// fixes the drift `f` and the control fields `g = d/dp_site`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSystem {
    pub config: LatticeConfig,
    pub potential: Potential,
}

impl LatticeSystem {
    pub fn new(config: LatticeConfig, potential: Potential) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, potential })
    }

    pub fn periodic(n: usize, potential: Potential) -> Result<Self> {
        Self::new(LatticeConfig::periodic(n), potential)
    }

    pub fn open(n: usize, potential: Potential) -> Result<Self> {
        Self::new(LatticeConfig::open(n), potential)
    }

    pub fn n(&self) -> usize {
        self.config.n
    }

    pub fn topology(&self) -> Topology {
        self.config.topology
    }

    pub fn control_sites(&self) -> &[usize] {
        &self.config.control_sites
    }

    /// Number of bonds: `n` when periodic, `n - 1` for an open chain.
    pub fn bond_count(&self) -> usize {
        match self.config.topology {
            Topology::Periodic => self.config.n,
            Topology::Open => self.config.n - 1,
        }
    }

    /// 0-based endpoints `(j, j+1)` of bond `j`; the bond value is `q_j - q_{j+1}`.
    #[inline]
    pub fn bond(&self, j: usize) -> (usize, usize) {
        (j, (j + 1) % self.config.n)
    }

    /// 0-based index of a 1-based control site, checked against the chain.
    pub fn site_index(&self, site: usize) -> Result<usize> {
        if site == 0 || site > self.config.n {
            return Err(Error::InvalidSite {
                site,
                n: self.config.n,
            });
        }
        Ok(site - 1)
    }

    /// Like [`Self::site_index`] but also requires `site` to be a control site.
    pub fn control_index(&self, site: usize) -> Result<usize> {
        let idx = self.site_index(site)?;
        if !self.config.control_sites.contains(&site) {
            return Err(Error::InvalidSite {
                site,
                n: self.config.n,
            });
        }
        Ok(idx)
    }

    /// The first control site (1-based); the steering primitives act there.
    pub fn primary_site(&self) -> Result<usize> {
        self.config
            .control_sites
            .first()
            .copied()
            .ok_or_else(|| Error::InvalidConfig("system has no control sites".into()))
    }

    pub(crate) fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.config.n {
            return Err(Error::DimensionMismatch {
                expected: self.config.n,
                got: len,
            });
        }
        Ok(())
    }
}
