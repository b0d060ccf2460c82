//! Python bindings for the `contactnet` crate.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use contactnet::abc::{self, AdjustOptions, ReferenceTable};
use contactnet::analytic;
use contactnet::params::Param;
use contactnet::priors::{self, BetaShape, PriorConfig};
use contactnet::rng::{self, Purpose};
use contactnet::sim::{self, SimSettings};
use contactnet::survey::{self, SummaryKey, SummaryVector, SurveyDesign};
use contactnet::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter { .. }
        | Error::InvalidConfig(_)
        | Error::LayoutMismatch(_)
        | Error::CohortTooLarge { .. }
        | Error::Undefined(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Weekly probabilities of the network model plus the expected population size.
#[pyclass(name = "ModelParams", from_py_object)]
#[derive(Clone, Copy)]
struct PyModelParams {
    inner: contactnet::ModelParams,
}

#[pymethods]
impl PyModelParams {
    #[new]
    #[pyo3(signature = (n, mu, rho, xi, sigma, omega0, omega1))]
    fn new(n: f64, mu: f64, rho: f64, xi: f64, sigma: f64, omega0: f64, omega1: f64) -> PyResult<Self> {
        let inner = contactnet::ModelParams {
            n,
            mu,
            rho,
            xi,
            sigma,
            omega0,
            omega1,
        };
        inner.validate().map_err(to_py)?;
        Ok(PyModelParams { inner })
    }

    /// Point estimates of the Stockholm fit.
    #[staticmethod]
    #[pyo3(signature = (n = 5000.0))]
    fn stockholm(n: f64) -> Self {
        PyModelParams {
            inner: contactnet::ModelParams::stockholm(n),
        }
    }

    #[getter]
    fn n(&self) -> f64 {
        self.inner.n
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.inner.mu
    }

    #[getter]
    fn rho(&self) -> f64 {
        self.inner.rho
    }

    #[getter]
    fn xi(&self) -> f64 {
        self.inner.xi
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.inner.sigma
    }

    #[getter]
    fn omega0(&self) -> f64 {
        self.inner.omega0
    }

    #[getter]
    fn omega1(&self) -> f64 {
        self.inner.omega1
    }

    fn to_dict(&self) -> BTreeMap<&'static str, f64> {
        let mut d: BTreeMap<&'static str, f64> = Param::ALL.iter().map(|p| (p.name(), self.inner.get(*p))).collect();
        d.insert("n", self.inner.n);
        d
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "ModelParams(n={}, mu={}, rho={}, xi={}, sigma={}, omega0={}, omega1={})",
            p.n, p.mu, p.rho, p.xi, p.sigma, p.omega0, p.omega1
        )
    }
}

/// Survey design: respondents, waves, lag between waves and recall windows.
#[pyclass(name = "SurveyDesign", from_py_object)]
#[derive(Clone, Copy)]
struct PySurveyDesign {
    inner: SurveyDesign,
}

#[pymethods]
impl PySurveyDesign {
    #[new]
    #[pyo3(signature = (m = 403, waves = 1, lag = 0, tlfb_window = 52, casual_recall = 1, dropout = 0.0, duration_origin = "window"))]
    fn new(
        m: usize,
        waves: u32,
        lag: u32,
        tlfb_window: u32,
        casual_recall: u32,
        dropout: f64,
        duration_origin: &str,
    ) -> PyResult<Self> {
        let inner = SurveyDesign {
            m,
            waves,
            lag,
            tlfb_window,
            casual_recall,
            dropout,
            duration_origin: duration_origin.parse().map_err(to_py)?,
        };
        inner.validate().map_err(to_py)?;
        Ok(PySurveyDesign { inner })
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m
    }

    #[getter]
    fn waves(&self) -> u32 {
        self.inner.waves
    }

    #[getter]
    fn lag(&self) -> u32 {
        self.inner.lag
    }
}

/// Beta priors over the six probabilities.
#[pyclass(name = "PriorConfig", from_py_object)]
#[derive(Clone, Copy)]
struct PyPriorConfig {
    inner: PriorConfig,
}

#[pymethods]
impl PyPriorConfig {
    /// Defaults, optionally overriding shapes with `{"rho": (a, b), ...}`.
    #[new]
    #[pyo3(signature = (shapes = None, n_fixed = None))]
    fn new(shapes: Option<BTreeMap<String, (f64, f64)>>, n_fixed: Option<f64>) -> PyResult<Self> {
        let mut inner = PriorConfig::default();
        for (name, (a, b)) in shapes.unwrap_or_default() {
            let p = Param::from_name(&name).ok_or_else(|| PyValueError::new_err(format!("unknown parameter {name}")))?;
            inner.set_shape(p, BetaShape::new(a, b));
        }
        if let Some(n) = n_fixed {
            inner.n_fixed = n;
        }
        inner.validate().map_err(to_py)?;
        Ok(PyPriorConfig { inner })
    }

    fn shape(&self, name: &str) -> PyResult<(f64, f64)> {
        let p = Param::from_name(name).ok_or_else(|| PyValueError::new_err(format!("unknown parameter {name}")))?;
        let s = self.inner.shape(p);
        Ok((s.a, s.b))
    }

    #[getter]
    fn n_fixed(&self) -> f64 {
        self.inner.n_fixed
    }

    fn sample(&self, seed: u64) -> PyModelParams {
        PyModelParams {
            inner: priors::sample_prior(&self.inner, &mut rng::stream(seed, Purpose::Prior, 0)),
        }
    }

    fn density(&self, params: &PyModelParams) -> f64 {
        priors::prior_density(&self.inner, &params.inner)
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }
}

fn summary_dict(v: &SummaryVector) -> BTreeMap<&'static str, f64> {
    v.present().map(|(k, x)| (k.name(), x)).collect()
}

fn summary_from_dict(d: &BTreeMap<String, f64>) -> PyResult<SummaryVector> {
    let mut out = SummaryVector::default();
    for (name, &v) in d {
        let key = SummaryKey::from_name(name).ok_or_else(|| PyValueError::new_err(format!("unknown summary {name}")))?;
        out.set(key, v, 1);
    }
    Ok(out)
}

/// A reference table of prior draws and simulated survey summaries.
#[pyclass(name = "ReferenceTable")]
struct PyReferenceTable {
    inner: ReferenceTable,
}

#[pymethods]
impl PyReferenceTable {
    #[staticmethod]
    #[pyo3(signature = (prior, design, rows, seed, burn_in = 1560, workers = 1))]
    fn build(
        prior: &PyPriorConfig,
        design: &PySurveyDesign,
        rows: usize,
        seed: u64,
        burn_in: u32,
        workers: usize,
    ) -> PyResult<Self> {
        let inner = abc::build_reference_table(&prior.inner, &design.inner, rows, burn_in, seed, workers).map_err(to_py)?;
        Ok(PyReferenceTable { inner })
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        Ok(PyReferenceTable {
            inner: ReferenceTable::load(&path).map_err(to_py)?,
        })
    }

    fn save(&self, path: std::path::PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn row(&self, i: usize) -> PyResult<(u64, PyModelParams, BTreeMap<&'static str, f64>)> {
        let r = self
            .inner
            .rows
            .get(i)
            .ok_or_else(|| PyValueError::new_err("row index out of range"))?;
        Ok((r.seed, PyModelParams { inner: r.theta }, summary_dict(&r.summaries)))
    }

    /// Rejection ABC; returns accepted (adjusted) draws as `ModelParams`.
    #[pyo3(signature = (observed, accept = 0.01, adjust = true))]
    fn fit(&self, observed: BTreeMap<String, f64>, accept: f64, adjust: bool) -> PyResult<Vec<PyModelParams>> {
        let obs = summary_from_dict(&observed)?;
        let rejection = abc::abc_reject(&self.inner, &obs, accept).map_err(to_py)?;
        let samples = if adjust {
            abc::regression_adjust(&rejection.samples, &rejection.observed, AdjustOptions::default())
                .map_err(to_py)?
                .samples
        } else {
            rejection.samples
        };
        Ok(samples.iter().map(|s| PyModelParams { inner: s.theta() }).collect())
    }
}

/// Simulates one trajectory; returns steady edges `(u, v, formed_at)`.
#[pyfunction]
#[pyo3(signature = (params, steps = 1560, seed = 0))]
fn simulate(params: &PyModelParams, steps: u32, seed: u64) -> PyResult<Vec<(u64, u64, u32)>> {
    let settings = SimSettings {
        total_steps: steps,
        burn_in: steps,
        ..SimSettings::default()
    };
    let (net, _) = sim::simulate(&params.inner, &settings, seed).map_err(to_py)?;
    Ok(net.sorted_steady_edges().iter().map(|e| (e.a, e.b, e.formed_at)).collect())
}

/// Simulates a survey and returns its present summaries.
#[pyfunction]
#[pyo3(signature = (params, design, seed = 0, burn_in = 1560))]
fn run_survey(params: &PyModelParams, design: &PySurveyDesign, seed: u64, burn_in: u32) -> PyResult<BTreeMap<&'static str, f64>> {
    let v = survey::run_survey(&params.inner, &design.inner, burn_in, seed).map_err(to_py)?;
    Ok(summary_dict(&v))
}

/// Posterior quantiles as `{param: [(level, probability, wait_weeks)]}`.
#[pyfunction]
#[pyo3(signature = (samples, levels = vec![0.025, 0.5, 0.975]))]
#[allow(clippy::type_complexity)]
fn posterior_quantiles(
    samples: Vec<PyModelParams>,
    levels: Vec<f64>,
) -> PyResult<BTreeMap<&'static str, Vec<(f64, f64, Option<f64>)>>> {
    let thetas: Vec<_> = samples.iter().map(|s| s.inner).collect();
    let rows = abc::posterior_quantiles(&thetas, &levels).map_err(to_py)?;
    let mut out: BTreeMap<&'static str, Vec<(f64, f64, Option<f64>)>> = BTreeMap::new();
    for r in rows {
        out.entry(r.param.name()).or_default().push((r.level, r.probability, r.wait_weeks));
    }
    Ok(out)
}

#[pyfunction]
fn steady_state_fraction_paired(mu: f64, rho: f64, sigma: f64) -> PyResult<f64> {
    analytic::steady_state_fraction_paired(mu, rho, sigma).map_err(to_py)
}

#[pyfunction]
fn cohort_fraction_paired(mu: f64, rho: f64, sigma: f64, tau: u32) -> PyResult<f64> {
    analytic::cohort_fraction_paired(mu, rho, sigma, tau).map_err(to_py)
}

#[pyfunction]
fn prob_rescale(q: f64, k: f64) -> PyResult<f64> {
    analytic::prob_rescale(q, k).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (x, tau, kappa = 1.0))]
fn rate_to_prob(x: f64, tau: f64, kappa: f64) -> PyResult<f64> {
    analytic::rate_to_prob(x, tau, kappa).map_err(to_py)
}

#[pyfunction]
fn prob_to_inverse_odds(p: f64) -> PyResult<f64> {
    analytic::prob_to_inverse_odds(p).map_err(to_py)
}

#[pymodule]
#[pyo3(name = "contactnet")]
fn contactnet_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModelParams>()?;
    m.add_class::<PySurveyDesign>()?;
    m.add_class::<PyPriorConfig>()?;
    m.add_class::<PyReferenceTable>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(run_survey, m)?)?;
    m.add_function(wrap_pyfunction!(posterior_quantiles, m)?)?;
    m.add_function(wrap_pyfunction!(steady_state_fraction_paired, m)?)?;
    m.add_function(wrap_pyfunction!(cohort_fraction_paired, m)?)?;
    m.add_function(wrap_pyfunction!(prob_rescale, m)?)?;
    m.add_function(wrap_pyfunction!(rate_to_prob, m)?)?;
    m.add_function(wrap_pyfunction!(prob_to_inverse_odds, m)?)?;
    Ok(())
}
