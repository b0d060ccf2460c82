//! Large-population (thermodynamic limit) results under serial monogamy and
//! conversions between probability scales.
//!
//! The fraction-paired results assume `xi = 0`; they are exact in the limit
//! of infinite population and serve as oracles for the simulator.

use serde::Serialize;

use crate::{Error, Result};

fn check_prob(name: &'static str, p: f64) -> Result<()> {
    if p.is_finite() && (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value: p,
            reason: "probability must lie in [0, 1]",
        })
    }
}

/// Per-step survival probability of a steady edge, `(1 - mu)^2 (1 - sigma)`.
pub fn edge_survival(mu: f64, sigma: f64) -> f64 {
    (1.0 - mu).powi(2) * (1.0 - sigma)
}

/// `alpha = (1 - mu)^2 (1 - rho)(1 - sigma)`.
pub fn alpha(mu: f64, rho: f64, sigma: f64) -> f64 {
    (1.0 - mu).powi(2) * (1.0 - rho) * (1.0 - sigma)
}

/// `beta = (1 - mu)(1 - sigma)(1 - rho)`.
pub fn beta(mu: f64, rho: f64, sigma: f64) -> f64 {
    (1.0 - mu) * (1.0 - sigma) * (1.0 - rho)
}

/// Expected number of further steps a steady relationship survives,
/// `s / (1 - s)` with per-step survival `s`. Errors when `s = 1`.
pub fn expected_relationship_length(mu: f64, sigma: f64) -> Result<f64> {
    check_prob("mu", mu)?;
    check_prob("sigma", sigma)?;
    let s = edge_survival(mu, sigma);
    if s >= 1.0 {
        return Err(Error::Undefined("relationships never end"));
    }
    Ok(s / (1.0 - s))
}

/// Steady-state fraction of nodes with a steady partner, `rho / (1 - alpha)`.
pub fn steady_state_fraction_paired(mu: f64, rho: f64, sigma: f64) -> Result<f64> {
    check_prob("mu", mu)?;
    check_prob("rho", rho)?;
    check_prob("sigma", sigma)?;
    let a = alpha(mu, rho, sigma);
    if a >= 1.0 {
        return Err(Error::Undefined("no dynamics: steady state undefined"));
    }
    Ok(rho / (1.0 - a))
}

/// Expected fraction paired among the members of a cohort that are still in
/// the population `tau` steps after it was sampled:
/// `rho / (1 - beta) * [1 - beta^(tau + 1) * mu / (1 - alpha)]`.
pub fn cohort_fraction_paired(mu: f64, rho: f64, sigma: f64, tau: u32) -> Result<f64> {
    check_prob("mu", mu)?;
    check_prob("rho", rho)?;
    check_prob("sigma", sigma)?;
    let a = alpha(mu, rho, sigma);
    let b = beta(mu, rho, sigma);
    if a >= 1.0 || b >= 1.0 {
        return Err(Error::Undefined("no dynamics: steady state undefined"));
    }
    let ratio = mu / (1.0 - a);
    let log_pow = (f64::from(tau) + 1.0) * b.ln();
    let decay = if log_pow < 1e-300f64.ln() {
        // product formed in log space so it cannot underflow in two stages
        if ratio > 0.0 {
            (log_pow + ratio.ln()).exp()
        } else {
            0.0
        }
    } else {
        log_pow.exp() * ratio
    };
    Ok(rho / (1.0 - b) * (1.0 - decay))
}

/// Expected fraction of a cohort still present after `tau` steps, `(1 - mu)^tau`.
pub fn expected_retained_nodes(mu: f64, tau: u32) -> Result<f64> {
    check_prob("mu", mu)?;
    Ok((1.0 - mu).powf(f64::from(tau)))
}

/// Expected fraction of steady edges still present after `tau` steps,
/// `[(1 - mu)^2 (1 - sigma)]^tau`.
pub fn expected_retained_edges(mu: f64, sigma: f64, tau: u32) -> Result<f64> {
    check_prob("mu", mu)?;
    check_prob("sigma", sigma)?;
    Ok(edge_survival(mu, sigma).powf(f64::from(tau)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyStateReport {
    pub f: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Weeks.
    pub expected_relationship_length: f64,
}

pub fn steady_state_report(mu: f64, rho: f64, sigma: f64) -> Result<SteadyStateReport> {
    Ok(SteadyStateReport {
        f: steady_state_fraction_paired(mu, rho, sigma)?,
        alpha: alpha(mu, rho, sigma),
        beta: beta(mu, rho, sigma),
        expected_relationship_length: expected_relationship_length(mu, sigma)?,
    })
}

fn check_steps(k: f64) -> Result<()> {
    if k.is_finite() && k >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "k",
            value: k,
            reason: "steps per coarse step must be at least 1",
        })
    }
}

/// Probability of at least one event in `k` fine steps given per-step
/// probability `q`: `1 - (1 - q)^k`.
pub fn prob_rescale(q: f64, k: f64) -> Result<f64> {
    check_prob("q", q)?;
    check_steps(k)?;
    Ok(-(k * (-q).ln_1p()).exp_m1())
}

/// Inverse of [`prob_rescale`]: `1 - (1 - p)^(1/k)`.
pub fn prob_rescale_inverse(p: f64, k: f64) -> Result<f64> {
    check_prob("p", p)?;
    check_steps(k)?;
    Ok(-((-p).ln_1p() / k).exp_m1())
}

/// First-moment match of `x` expected events per period `tau` to a
/// per-step probability at time scale `kappa`: `min(1, x * kappa / tau)`.
pub fn rate_to_prob(x: f64, tau: f64, kappa: f64) -> Result<f64> {
    if !(x.is_finite() && x >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "x",
            value: x,
            reason: "expected event count must be non-negative",
        });
    }
    for (name, v) in [("tau", tau), ("kappa", kappa)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidParameter {
                name,
                value: v,
                reason: "must be positive",
            });
        }
    }
    Ok((x * kappa / tau).min(1.0))
}

/// Expected waiting time before an event of per-step probability `p`,
/// `(1 - p) / p`, in steps.
pub fn prob_to_inverse_odds(p: f64) -> Result<f64> {
    check_prob("p", p)?;
    if p == 0.0 {
        return Err(Error::Undefined("event never occurs"));
    }
    Ok((1.0 - p) / p)
}

/// Inverse of [`prob_to_inverse_odds`]: `1 / (1 + w)`.
pub fn inverse_odds_to_prob(w: f64) -> Result<f64> {
    if !(w >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "w",
            value: w,
            reason: "waiting time must be non-negative",
        });
    }
    Ok(1.0 / (1.0 + w))
}
