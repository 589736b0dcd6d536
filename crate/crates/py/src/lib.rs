use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use peakpower::cli::{self, SimulateConfig};
use peakpower::model::{CovarianceModel, DomainSpec, MeanModel, Threshold};
use peakpower::{emu, randfield, Error};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Quadrature { .. } | Error::Solver(_) | Error::Io(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(format!("{}: {e}", e.kind())),
    }
}

/// Isotropic noise covariance given by rho'(0) < 0 and rho''(0) > 0.
#[pyclass(name = "CovarianceModel", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyCovariance {
    inner: CovarianceModel,
}

#[pymethods]
impl PyCovariance {
    #[new]
    fn new(rho_prime: f64, rho_double_prime: f64) -> PyResult<Self> {
        CovarianceModel::new(rho_prime, rho_double_prime).map(|inner| Self { inner }).map_err(to_py)
    }

    /// Squared-exponential covariance exp(-d^2 / (2 nu^2)).
    #[staticmethod]
    fn from_kernel_bandwidth(nu: f64) -> PyResult<Self> {
        CovarianceModel::from_kernel_bandwidth(nu).map(|inner| Self { inner }).map_err(to_py)
    }

    /// Noise smoothed by a Gaussian kernel with standard deviation `sd`.
    #[staticmethod]
    fn from_smoothing_kernel(sd: f64) -> PyResult<Self> {
        CovarianceModel::from_smoothing_kernel(sd).map(|inner| Self { inner }).map_err(to_py)
    }

    #[getter]
    fn rho_prime(&self) -> f64 {
        self.inner.rho_prime()
    }

    #[getter]
    fn rho_double_prime(&self) -> f64 {
        self.inner.rho_double_prime()
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa()
    }

    fn __repr__(&self) -> String {
        format!(
            "CovarianceModel(rho_prime={}, rho_double_prime={}, kappa={})",
            self.inner.rho_prime(),
            self.inner.rho_double_prime(),
            self.inner.kappa()
        )
    }
}

/// Signal shape: constant, paraboloid or Gaussian bump.
#[pyclass(name = "MeanModel", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyMean {
    inner: MeanModel,
}

#[pymethods]
impl PyMean {
    #[staticmethod]
    fn constant(theta0: f64, center: Vec<f64>) -> PyResult<Self> {
        MeanModel::constant(theta0, center).map(|inner| Self { inner }).map_err(to_py)
    }

    #[staticmethod]
    fn paraboloid(theta0: f64, theta_pp: f64, center: Vec<f64>) -> PyResult<Self> {
        MeanModel::paraboloid(theta0, theta_pp, center).map(|inner| Self { inner }).map_err(to_py)
    }

    #[staticmethod]
    fn gaussian_bump(theta0: f64, xi: f64, center: Vec<f64>) -> PyResult<Self> {
        MeanModel::gaussian_bump(theta0, xi, center).map(|inner| Self { inner }).map_err(to_py)
    }

    fn value(&self, s: Vec<f64>) -> f64 {
        self.inner.value(&s)
    }

    fn eta(&self, cov: &PyCovariance) -> PyResult<f64> {
        peakpower::model::eta(&self.inner, &cov.inner).map_err(to_py)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!("MeanModel({})", serde_json::to_string(&self.inner).unwrap_or_default())
    }
}

/// H(x_tilde) in `dim` dimensions.
#[pyfunction]
fn h(dim: usize, x_tilde: f64, kappa: f64) -> PyResult<f64> {
    emu::h_nd(dim, x_tilde, kappa).map_err(to_py)
}

/// E[M_u] on a ball of `radius`; returns (value, error estimate).
/// `u = float("-inf")` counts all peaks.
#[pyfunction]
fn expected_peaks(cov: &PyCovariance, mean: &PyMean, radius: f64, u: f64) -> PyResult<(f64, f64)> {
    let dom = DomainSpec::ball(mean.inner.dim(), radius).map_err(to_py)?;
    let q = emu::expected_peaks_with(&cov.inner, &mean.inner, &dom, Threshold::from(u)).map_err(to_py)?;
    Ok((q.value, q.err))
}

/// E[M_u], adjusted E[M_u] and the sharp-signal limit over a threshold grid.
#[pyfunction]
fn power_curve<'py>(
    py: Python<'py>,
    cov: &PyCovariance,
    mean: &PyMean,
    radius: f64,
    u_grid: Vec<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let dom = DomainSpec::ball(mean.inner.dim(), radius).map_err(to_py)?;
    let r = py
        .detach(|| emu::power_curve(&cov.inner, &mean.inner, &dom, &u_grid))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("u", r.u_grid)?;
    d.set_item("e_mu", r.e_mu)?;
    d.set_item("e_mu_adj", r.e_mu_adj)?;
    d.set_item("e_m_total", r.e_m_total)?;
    d.set_item("sharp_approx", r.sharp_approx)?;
    d.set_item("quad_err", r.quadrature_err)?;
    d.set_item("quadratic_approx", r.quadratic_approx)?;
    Ok(d)
}

#[pyfunction]
fn null_overshoot_survival(cov: &PyCovariance, dim: usize, u: f64) -> PyResult<f64> {
    emu::null_overshoot_survival(&cov.inner, dim, u).map_err(to_py)
}

#[pyfunction]
fn threshold_for_alpha(cov: &PyCovariance, dim: usize, alpha: f64) -> PyResult<f64> {
    emu::threshold_for_alpha(&cov.inner, dim, alpha).map_err(to_py)
}

/// Monte Carlo estimate of H; returns (estimate, standard error).
#[pyfunction]
fn mc_h(py: Python<'_>, x_tilde: f64, kappa: f64, dim: usize, n_samples: usize, seed: u64) -> PyResult<(f64, f64)> {
    py.detach(|| randfield::mc_h(x_tilde, kappa, dim, n_samples, seed)).map_err(to_py)
}

/// Runs the `simulate` command from a JSON config string and returns the
/// CSV text.
#[pyfunction]
#[pyo3(signature = (config_json, threads=None))]
fn simulate(py: Python<'_>, config_json: &str, threads: Option<usize>) -> PyResult<String> {
    let cfg: SimulateConfig =
        serde_json::from_str(config_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let r = py.detach(|| cli::cmd_simulate(&cfg, threads)).map_err(to_py)?;
    Ok(cli::simulate_csv(&r))
}

#[pymodule]
fn peakpower_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCovariance>()?;
    m.add_class::<PyMean>()?;
    m.add_function(wrap_pyfunction!(h, m)?)?;
    m.add_function(wrap_pyfunction!(expected_peaks, m)?)?;
    m.add_function(wrap_pyfunction!(power_curve, m)?)?;
    m.add_function(wrap_pyfunction!(null_overshoot_survival, m)?)?;
    m.add_function(wrap_pyfunction!(threshold_for_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(mc_h, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
