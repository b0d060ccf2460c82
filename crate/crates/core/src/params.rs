use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The seven parameters of the network model. All probabilities are per
/// simulation step (one week).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Expected population size.
    pub n: f64,
    /// Probability for a node to leave the population.
    pub mu: f64,
    /// Probability for a single to seek a steady partner.
    pub rho: f64,
    /// Concurrency damping; degree-k nodes seek with probability `rho * xi^k`.
    pub xi: f64,
    /// Probability for a steady edge to dissolve.
    pub sigma: f64,
    /// Probability to seek a casual contact when single.
    pub omega0: f64,
    /// Probability to seek a casual contact when partnered.
    pub omega1: f64,
}

/// The six inferred probabilities, in table column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Param {
    Mu,
    Rho,
    Xi,
    Sigma,
    Omega0,
    Omega1,
}

impl Param {
    pub const ALL: [Param; 6] = [
        Param::Mu,
        Param::Rho,
        Param::Xi,
        Param::Sigma,
        Param::Omega0,
        Param::Omega1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Param::Mu => "mu",
            Param::Rho => "rho",
            Param::Xi => "xi",
            Param::Sigma => "sigma",
            Param::Omega0 => "omega0",
            Param::Omega1 => "omega1",
        }
    }

    pub fn from_name(name: &str) -> Option<Param> {
        Param::ALL.into_iter().find(|p| p.name() == name)
    }

    /// Whether the parameter is an event probability with an inverse-odds
    /// (expected waiting time) reading. The concurrency factor is not.
    pub fn has_waiting_time(self) -> bool {
        self != Param::Xi
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl ModelParams {
    pub fn get(&self, p: Param) -> f64 {
        match p {
            Param::Mu => self.mu,
            Param::Rho => self.rho,
            Param::Xi => self.xi,
            Param::Sigma => self.sigma,
            Param::Omega0 => self.omega0,
            Param::Omega1 => self.omega1,
        }
    }

    pub fn set(&mut self, p: Param, value: f64) {
        match p {
            Param::Mu => self.mu = value,
            Param::Rho => self.rho = value,
            Param::Xi => self.xi = value,
            Param::Sigma => self.sigma = value,
            Param::Omega0 => self.omega0 = value,
            Param::Omega1 => self.omega1 = value,
        }
    }

    /// The six probabilities in [`Param::ALL`] order.
    pub fn probabilities(&self) -> [f64; 6] {
        Param::ALL.map(|p| self.get(p))
    }

    pub fn with_probabilities(n: f64, values: [f64; 6]) -> Self {
        let mut out = ModelParams {
            n,
            mu: 0.0,
            rho: 0.0,
            xi: 0.0,
            sigma: 0.0,
            omega0: 0.0,
            omega1: 0.0,
        };
        for (p, v) in Param::ALL.into_iter().zip(values) {
            out.set(p, v);
        }
        out
    }

    /// Point estimates reported for the Stockholm survey fit, converted from
    /// expected waiting times to weekly probabilities.
    pub fn stockholm(n: f64) -> Self {
        let from_wait = |weeks: f64| 1.0 / (1.0 + weeks);
        ModelParams {
            n,
            mu: from_wait(15.7 * 52.0),
            rho: from_wait(24.9),
            xi: 0.23,
            sigma: from_wait(42.2),
            omega0: from_wait(1.8),
            omega1: from_wait(4.5),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.n.is_finite() || self.n <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "n",
                value: self.n,
                reason: "expected population size must be positive and finite",
            });
        }
        for p in Param::ALL {
            let v = self.get(p);
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter {
                    name: p.name(),
                    value: v,
                    reason: "probability must lie in [0, 1]",
                });
            }
        }
        Ok(())
    }
}
