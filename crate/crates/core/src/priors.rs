//! Beta priors over the six weekly probabilities.
//!
//! The population size is not inferred; every prior draw uses `n_fixed`.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Beta as BetaDist, Distribution};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{Beta, Continuous, ContinuousCDF};

use crate::params::Param;
use crate::survey::fmt_f64;
use crate::{Error, ModelParams, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(f64, f64)", into = "(f64, f64)")]
pub struct BetaShape {
    pub a: f64,
    pub b: f64,
}

impl From<(f64, f64)> for BetaShape {
    fn from((a, b): (f64, f64)) -> Self {
        BetaShape { a, b }
    }
}

impl From<BetaShape> for (f64, f64) {
    fn from(s: BetaShape) -> Self {
        (s.a, s.b)
    }
}

impl BetaShape {
    pub const fn new(a: f64, b: f64) -> Self {
        BetaShape { a, b }
    }

    pub fn mean(&self) -> f64 {
        self.a / (self.a + self.b)
    }

    pub fn variance(&self) -> f64 {
        let s = self.a + self.b;
        self.a * self.b / (s * s * (s + 1.0))
    }

    fn dist(&self) -> Beta {
        Beta::new(self.a, self.b).expect("validated shape")
    }

    pub fn density(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        let d = self.dist().pdf(x);
        if d.is_finite() {
            d
        } else {
            f64::INFINITY
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.dist().cdf(x.clamp(0.0, 1.0))
    }

    pub fn quantile(&self, p: f64) -> f64 {
        self.dist().inverse_cdf(p)
    }

    fn validate(&self, name: &'static str) -> Result<()> {
        for v in [self.a, self.b] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidParameter {
                    name,
                    value: v,
                    reason: "beta shape parameters must be positive",
                });
            }
        }
        Ok(())
    }
}

/// Independent beta priors per probability plus the fixed population size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    pub mu: BetaShape,
    pub rho: BetaShape,
    pub xi: BetaShape,
    pub sigma: BetaShape,
    pub omega0: BetaShape,
    pub omega1: BetaShape,
    pub n_fixed: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            mu: BetaShape::new(2.0, 1500.0),
            rho: BetaShape::new(3.0, 80.0),
            xi: BetaShape::new(2.0, 2.0),
            sigma: BetaShape::new(2.0, 60.0),
            omega0: BetaShape::new(2.0, 4.0),
            omega1: BetaShape::new(2.0, 6.0),
            n_fixed: 5000.0,
        }
    }
}

impl PriorConfig {
    /// Same shape for every parameter.
    pub fn uniform_shape(shape: BetaShape, n_fixed: f64) -> Self {
        PriorConfig {
            mu: shape,
            rho: shape,
            xi: shape,
            sigma: shape,
            omega0: shape,
            omega1: shape,
            n_fixed,
        }
    }

    pub fn shape(&self, p: Param) -> BetaShape {
        match p {
            Param::Mu => self.mu,
            Param::Rho => self.rho,
            Param::Xi => self.xi,
            Param::Sigma => self.sigma,
            Param::Omega0 => self.omega0,
            Param::Omega1 => self.omega1,
        }
    }

    pub fn set_shape(&mut self, p: Param, shape: BetaShape) {
        match p {
            Param::Mu => self.mu = shape,
            Param::Rho => self.rho = shape,
            Param::Xi => self.xi = shape,
            Param::Sigma => self.sigma = shape,
            Param::Omega0 => self.omega0 = shape,
            Param::Omega1 => self.omega1 = shape,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for p in Param::ALL {
            self.shape(p).validate(p.name())?;
        }
        if !self.n_fixed.is_finite() || self.n_fixed <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "n_fixed",
                value: self.n_fixed,
                reason: "population size must be positive",
            });
        }
        Ok(())
    }

    pub fn mean(&self) -> ModelParams {
        ModelParams::with_probabilities(self.n_fixed, Param::ALL.map(|p| self.shape(p).mean()))
    }

    /// Flat `name = [a, b]` text, also the on-disk format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for p in Param::ALL {
            let sh = self.shape(p);
            let _ = writeln!(s, "{} = [{}, {}]", p.name(), fmt_f64(sh.a), fmt_f64(sh.b));
        }
        let _ = writeln!(s, "n_fixed = {}", fmt_f64(self.n_fixed));
        s
    }

    /// Parses [`PriorConfig::to_text`] output. Missing entries keep their
    /// defaults.
    pub fn from_text(text: &str) -> std::result::Result<PriorConfig, String> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| e.to_string())?;
        let mut out = PriorConfig::default();
        let number = |v: &toml::Value| v.as_float().or_else(|| v.as_integer().map(|i| i as f64));
        for (key, value) in &table {
            if key == "n_fixed" {
                out.n_fixed = number(value).ok_or("n_fixed must be a number")?;
                continue;
            }
            let p = Param::from_name(key).ok_or_else(|| format!("unknown prior parameter {key:?}"))?;
            let pair = value
                .as_array()
                .filter(|a| a.len() == 2)
                .and_then(|a| Some((number(&a[0])?, number(&a[1])?)))
                .ok_or_else(|| format!("{key} must be a pair [a, b]"))?;
            out.set_shape(p, BetaShape::new(pair.0, pair.1));
        }
        out.validate().map_err(|e| e.to_string())?;
        Ok(out)
    }

    pub fn load(path: &std::path::Path) -> Result<PriorConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        PriorConfig::from_text(&text).map_err(|m| Error::parse(path, m))
    }

    /// Hex SHA-256 of the canonical text form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Independent draws from every prior; `n` is set to `n_fixed`.
pub fn sample_prior<R: Rng + ?Sized>(config: &PriorConfig, rng: &mut R) -> ModelParams {
    let values = Param::ALL.map(|p| {
        let sh = config.shape(p);
        BetaDist::new(sh.a, sh.b).expect("validated shape").sample(rng)
    });
    ModelParams::with_probabilities(config.n_fixed, values)
}

/// Product of the six beta densities; zero outside the unit hypercube.
pub fn prior_density(config: &PriorConfig, params: &ModelParams) -> f64 {
    Param::ALL
        .into_iter()
        .map(|p| config.shape(p).density(params.get(p)))
        .product()
}

/// A published point estimate, as a weekly probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiteratureValue {
    pub param: Param,
    pub value: f64,
    pub source: &'static str,
}

fn weekly_from_wait(weeks: f64) -> f64 {
    1.0 / (1.0 + weeks)
}

/// Point estimates used to calibrate the default priors. Values reported on
/// other timescales are converted to weekly probabilities.
pub fn literature_values() -> Vec<LiteratureValue> {
    use Param::*;
    let lit = |param, value, source| LiteratureValue { param, value, source };
    vec![
        lit(Mu, weekly_from_wait(10.0 * 52.0), "sexually active period of 10 years"),
        lit(Mu, weekly_from_wait(30.0 * 52.0), "sexually active period of 30 years"),
        lit(Mu, weekly_from_wait(60.0 * 52.0), "sexually active period of 60 years"),
        lit(Mu, weekly_from_wait(15.7 * 52.0), "Stockholm model, 15.7 years"),
        lit(Rho, 1.0 - 0.99f64.powi(7), "daily probability 0.01"),
        lit(Rho, 0.73 / 52.0, "0.73 partnerships per year"),
        lit(Rho, weekly_from_wait(24.9), "Stockholm model, 24.9 weeks"),
        lit(Sigma, weekly_from_wait(42.2), "Stockholm model, 42.2 weeks"),
        lit(Omega0, weekly_from_wait(1.8), "Stockholm model, singles 1.8 weeks"),
        lit(Omega1, weekly_from_wait(4.5), "Stockholm model, partnered 4.5 weeks"),
    ]
}

/// Literature values outside the central `level` interval of their prior.
pub fn uncovered_literature(config: &PriorConfig, level: f64) -> Vec<LiteratureValue> {
    let tail = (1.0 - level) / 2.0;
    literature_values()
        .into_iter()
        .filter(|lit| {
            let sh = config.shape(lit.param);
            lit.value < sh.quantile(tail) || lit.value > sh.quantile(1.0 - tail)
        })
        .collect()
}

/// Human-readable prior summary with probability and waiting-time quantiles.
pub fn describe(config: &PriorConfig) -> String {
    let mut s = String::from("parameter,a,b,mean,q01,median,q99,wait_median_weeks\n");
    for p in Param::ALL {
        let sh = config.shape(p);
        let med = sh.quantile(0.5);
        let wait = if p.has_waiting_time() {
            fmt_f64((1.0 - med) / med)
        } else {
            String::new()
        };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            p.name(),
            fmt_f64(sh.a),
            fmt_f64(sh.b),
            fmt_f64(sh.mean()),
            fmt_f64(sh.quantile(0.01)),
            fmt_f64(med),
            fmt_f64(sh.quantile(0.99)),
            wait
        );
    }
    let _ = writeln!(s, "n_fixed,,,{},,,,", fmt_f64(config.n_fixed));
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, Purpose};
    use crate::stats;

    #[test]
    fn defaults_cover_literature() {
        assert!(uncovered_literature(&PriorConfig::default(), 0.98).is_empty());
    }

    #[test]
    fn density_examples() {
        let flat = PriorConfig::uniform_shape(BetaShape::new(1.0, 1.0), 100.0);
        let p = ModelParams::with_probabilities(100.0, [0.3, 0.2, 0.9, 0.5, 0.1, 0.7]);
        assert!((prior_density(&flat, &p) - 1.0).abs() < 1e-12);
        let outside = ModelParams::with_probabilities(100.0, [1.2, 0.2, 0.9, 0.5, 0.1, 0.7]);
        assert_eq!(prior_density(&flat, &outside), 0.0);
        let cfg = PriorConfig::default();
        let mut boundary = cfg.mean();
        boundary.rho = 0.0;
        assert_eq!(prior_density(&cfg, &boundary), 0.0);
        assert!((BetaShape::new(2.0, 2.0).density(0.5) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn uniform_draws_pass_ks() {
        let cfg = PriorConfig::uniform_shape(BetaShape::new(1.0, 1.0), 10.0);
        let mut r = rng::stream(1, Purpose::Prior, 0);
        let draws: Vec<ModelParams> = (0..10_000).map(|_| sample_prior(&cfg, &mut r)).collect();
        for p in Param::ALL {
            let xs: Vec<f64> = draws.iter().map(|d| d.get(p)).collect();
            let (d, _) = stats::ks_one_sample(&xs, |x| x.clamp(0.0, 1.0));
            assert!(d < 0.02, "{p}: {d}");
        }
        assert!(draws.iter().all(|d| d.n == 10.0));
    }

    #[test]
    fn xi_mean_and_concentration() {
        let cfg = PriorConfig::default();
        let mut r = rng::stream(2, Purpose::Prior, 0);
        let xi: Vec<f64> = (0..100_000).map(|_| sample_prior(&cfg, &mut r).xi).collect();
        assert!((stats::mean(&xi) - 0.5).abs() < 0.005);
        let tight = PriorConfig::uniform_shape(BetaShape::new(1e6, 1e6), 10.0);
        for _ in 0..100 {
            let d = sample_prior(&tight, &mut r);
            assert!(d.probabilities().iter().all(|v| (v - 0.5).abs() < 1e-2));
        }
    }

    #[test]
    fn text_round_trip_and_errors() {
        let cfg = PriorConfig::default();
        assert_eq!(PriorConfig::from_text(&cfg.to_text()).unwrap(), cfg);
        let partial = PriorConfig::from_text("xi = [3, 4]").unwrap();
        assert_eq!(partial.xi, BetaShape::new(3.0, 4.0));
        assert_eq!(partial.rho, cfg.rho);
        assert!(PriorConfig::from_text("xi = [0, 4]").is_err());
        assert!(PriorConfig::from_text("lambda = [1, 1]").is_err());
        assert!(PriorConfig::from_text("xi = [1]").is_err());
        assert_ne!(cfg.hash(), partial.hash());
        assert_eq!(cfg.hash().len(), 64);
    }

    #[test]
    fn describe_lists_all_parameters() {
        let text = describe(&PriorConfig::default());
        assert_eq!(text.lines().count(), 8);
        assert!(text.contains("\nxi,2.0,2.0,0.5,"));
    }
}
