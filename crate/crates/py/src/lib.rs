//! Python bindings for `binflux`.

use std::path::PathBuf;

use binflux::baseline::{self, SinglePixelSpec};
use binflux::exact::{coherent_click_distribution, fock_click_distribution};
use binflux::inference::{self, credible_interval, posterior_multi, posterior_single, CredibleInterval};
use binflux::matrix::{build_matrix, load_matrix, save_matrix, Method, Support};
use binflux::mc::{simulate_batch, PulseSource};
use binflux::multiplexer::validate_timing;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(e: binflux::Error) -> PyErr {
    match e {
        binflux::Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for binflux::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

#[pyclass(name = "SystemConfig", module = "binflux_py", skip_from_py_object)]
#[derive(Clone)]
pub struct PySystemConfig {
    inner: binflux::SystemConfig,
}

#[pymethods]
impl PySystemConfig {
    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        Ok(Self { inner: binflux::SystemConfig::preset(name).py()? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: binflux::SystemConfig =
            serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        inner.validate().py()?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }

    #[getter]
    fn bins(&self) -> usize {
        self.inner.bins()
    }

    /// `(weight, arrival_time, apd)` per bin.
    fn bin_weights(&self) -> PyResult<Vec<(f64, f64, u8)>> {
        let w = self.inner.bin_weights().py()?;
        Ok((0..w.bins()).map(|b| (w.weights[b], w.arrival_times[b], w.detector_of_bin[b])).collect())
    }

    fn timing<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let w = self.inner.bin_weights().py()?;
        let t = validate_timing(&w, self.inner.detector.deadtime, self.inner.guard());
        let d = PyDict::new(py);
        d.set_item("min_spacing", t.min_spacing)?;
        d.set_item("train_length", t.train_length)?;
        d.set_item("max_rep_rate", t.max_rep_rate)?;
        d.set_item("violation", t.violation)?;
        Ok(d)
    }

    fn shot_dark_probability(&self) -> PyResult<f64> {
        let w = self.inner.bin_weights().py()?;
        Ok(binflux::detector::shot_dark_probability(&self.inner.detector, w.bins_per_apd()))
    }

    /// Exact click-count distribution for a coherent pulse.
    fn click_distribution(&self, mu: f64) -> PyResult<Vec<f64>> {
        let w = self.inner.bin_weights().py()?;
        Ok(coherent_click_distribution(mu, &w, &self.inner.detector).py()?.probs)
    }

    fn fock_distribution(&self, n_photons: u64) -> PyResult<Vec<f64>> {
        let w = self.inner.bin_weights().py()?;
        Ok(fock_click_distribution(n_photons, &w, &self.inner.detector).py()?.probs)
    }

    /// Monte Carlo click-count histogram. Pass exactly one of `mu` or `fock`.
    #[pyo3(signature = (shots, seed, mu=None, fock=None))]
    fn simulate(
        &self,
        py: Python<'_>,
        shots: u64,
        seed: u64,
        mu: Option<f64>,
        fock: Option<u64>,
    ) -> PyResult<Vec<u64>> {
        let source = match (mu, fock) {
            (Some(mu), None) => PulseSource::Coherent { mu },
            (None, Some(n_photons)) => PulseSource::Fock { n_photons },
            _ => return Err(PyValueError::new_err("pass exactly one of mu or fock")),
        };
        let w = self.inner.bin_weights().py()?;
        let det = self.inner.detector.clone();
        let batch = py.detach(|| simulate_batch(&source, &w, &det, shots, seed, false)).py()?;
        Ok(batch.histogram.counts)
    }

    fn __repr__(&self) -> String {
        format!("SystemConfig(bins={}, fingerprint={})", self.inner.bins(), self.inner.fingerprint())
    }
}

#[pyclass(name = "ResponseMatrix", module = "binflux_py", skip_from_py_object)]
#[derive(Clone)]
pub struct PyResponseMatrix {
    inner: binflux::ResponseMatrix,
}

#[pymethods]
impl PyResponseMatrix {
    /// `method` is `"exact"` or `"mc"`; `support` lists the rows to compute,
    /// the rest are interpolated.
    #[staticmethod]
    #[pyo3(signature = (config, mu_max, method="exact", shots=None, seed=None, support=None))]
    fn build(
        py: Python<'_>,
        config: &PySystemConfig,
        mu_max: usize,
        method: &str,
        shots: Option<u64>,
        seed: Option<u64>,
        support: Option<Vec<usize>>,
    ) -> PyResult<Self> {
        let method = match method {
            "exact" => Method::Exact,
            "mc" => Method::MonteCarlo {
                shots: shots.unwrap_or(1_000_000),
                seed: seed.ok_or_else(|| PyValueError::new_err("seed is required for method='mc'"))?,
            },
            other => return Err(PyValueError::new_err(format!("unknown method {other:?}"))),
        };
        let support = support.map_or(Support::All, Support::Points);
        let cfg = config.inner.clone();
        let inner = py.detach(|| build_matrix(&cfg, mu_max, method, support)).py()?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: load_matrix(&path).py()? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_matrix(&self.inner, &path).py()
    }

    #[getter]
    fn mu_max(&self) -> usize {
        self.inner.mu_max
    }

    #[getter]
    fn bins(&self) -> usize {
        self.inner.bins
    }

    #[getter]
    fn fingerprint(&self) -> String {
        self.inner.fingerprint.clone()
    }

    #[getter]
    fn method(&self) -> String {
        self.inner.method.to_string()
    }

    fn row(&self, mu: usize) -> PyResult<Vec<f64>> {
        self.inner
            .rows
            .get(mu)
            .cloned()
            .ok_or_else(|| PyValueError::new_err(format!("mu={mu} outside [0, {}]", self.inner.mu_max)))
    }

    fn posterior_single(&self, n: usize) -> PyResult<Vec<f64>> {
        Ok(posterior_single(&self.inner, n).py()?.probs)
    }

    fn posterior_multi(&self, observations: Vec<usize>) -> PyResult<Vec<f64>> {
        Ok(posterior_multi(&self.inner, &observations).py()?.probs)
    }
}

fn interval_dict<'py>(py: Python<'py>, ci: &CredibleInterval, wavelength: f64) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("mode", ci.mode)?;
    d.set_item("lo", ci.lo)?;
    d.set_item("hi", ci.hi)?;
    d.set_item("mass", ci.mass)?;
    d.set_item("level", ci.level)?;
    d.set_item("width", ci.width())?;
    d.set_item("energy_J", inference::interval_to_energy(ci.width() as f64, wavelength))?;
    Ok(d)
}

/// Response matrix plus the stability cutoff for its configuration.
#[pyclass(name = "Estimator", module = "binflux_py")]
pub struct PyEstimator {
    inner: binflux::Estimator,
}

#[pymethods]
impl PyEstimator {
    #[new]
    #[pyo3(signature = (config, matrix, tolerance=inference::DEFAULT_STABILITY_TOLERANCE))]
    fn new(py: Python<'_>, config: &PySystemConfig, matrix: &PyResponseMatrix, tolerance: f64) -> PyResult<Self> {
        let (cfg, m) = (config.inner.clone(), matrix.inner.clone());
        let inner = py.detach(|| binflux::Estimator::new(&cfg, m, tolerance)).py()?;
        Ok(Self { inner })
    }

    #[getter]
    fn max_admissible_n(&self) -> Option<usize> {
        self.inner.max_admissible_n
    }

    /// Credible interval for one or more click counts; rejects counts above
    /// the stability cutoff.
    #[pyo3(signature = (observations, level=inference::DEFAULT_LEVEL, wavelength=1550e-9))]
    fn infer<'py>(
        &self,
        py: Python<'py>,
        observations: Vec<usize>,
        level: f64,
        wavelength: f64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let post = self.inner.multi(&observations).py()?;
        interval_dict(py, &credible_interval(&post, level), wavelength)
    }
}

/// Smallest-width credible interval of a posterior given as a list over mu.
#[pyfunction]
#[pyo3(signature = (posterior, level=inference::DEFAULT_LEVEL, wavelength=1550e-9))]
fn credible_interval_of<'py>(
    py: Python<'py>,
    posterior: Vec<f64>,
    level: f64,
    wavelength: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let total: f64 = posterior.iter().sum();
    let valid = total > 0.0 && total.is_finite() && posterior.iter().all(|p| *p >= 0.0);
    if !valid {
        return Err(PyValueError::new_err("posterior must be non-negative with positive mass"));
    }
    let probs: Vec<f64> = posterior.iter().map(|p| p / total).collect();
    // First maximum, so ties resolve toward smaller mu.
    let mode = probs.iter().enumerate().fold(0, |best, (i, p)| if *p > probs[best] { i } else { best });
    let post = binflux::Posterior { probs, mode, norm: total };
    interval_dict(py, &credible_interval(&post, level), wavelength)
}

#[pyfunction]
#[pyo3(signature = (width_photons, wavelength=1550e-9))]
fn interval_to_energy(width_photons: f64, wavelength: f64) -> f64 {
    inference::interval_to_energy(width_photons, wavelength)
}

/// Single-pixel estimate `(mu, delta_mu_90)` from detections over gates.
#[pyfunction]
fn estimate_mu(n_det: u64, n_gate: u64, efficiency: f64, attenuation: f64) -> PyResult<(f64, f64)> {
    let e = baseline::estimate_mu(n_det, n_gate, &SinglePixelSpec { efficiency, attenuation }).py()?;
    Ok((e.mu, e.delta_mu_90))
}

#[pyfunction]
fn presets() -> Vec<&'static str> {
    binflux::config::PRESET_NAMES.to_vec()
}

#[pymodule]
fn binflux_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySystemConfig>()?;
    m.add_class::<PyResponseMatrix>()?;
    m.add_class::<PyEstimator>()?;
    m.add_function(wrap_pyfunction!(credible_interval_of, m)?)?;
    m.add_function(wrap_pyfunction!(interval_to_energy, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_mu, m)?)?;
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
