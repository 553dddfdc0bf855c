//! Python bindings for the edgeweyl toolkit: spectrum generators, encoding
//! rules, counting, estimation, transforms, and the string realization.
//!
//! Build the importable module with
//! `cargo build --release -p edgeweyl-py --features extension-module`
//! and rename/copy `libedgeweyl_py.so` to `edgeweyl_py.so` on the Python
//! path (see `python/smoke_test.py`).

use edgeweyl::counting as ecount;
use edgeweyl::encoding as eenc;
use edgeweyl::estimation as eest;
use edgeweyl::krein as ekrein;
use edgeweyl::spectra as espec;
use edgeweyl::transforms as etrans;
use nalgebra::DMatrix;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn pyerr(e: edgeweyl::Error) -> PyErr {
    use edgeweyl::Error as E;
    match e {
        E::RootFinding { .. }
        | E::BracketFailure { .. }
        | E::IllConditioned(_)
        | E::DegenerateResidual
        | E::Breakdown { .. }
        | E::QdPositivity { .. }
        | E::UncontrolledTail { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Sorted atomic spectral measure with geometry metadata.
#[pyclass(name = "SpectralMeasure", skip_from_py_object)]
#[derive(Clone)]
struct PySpectralMeasure {
    inner: espec::SpectralMeasure,
}

#[pymethods]
impl PySpectralMeasure {
    /// Round sphere S^d.
    #[staticmethod]
    fn sphere(d: u32, lambda_max: f64) -> PyResult<Self> {
        Ok(Self { inner: espec::sphere_spectrum(d, lambda_max).map_err(pyerr)? })
    }

    /// Flat torus from a dual-lattice Gram matrix (list of rows).
    #[staticmethod]
    fn torus(gram: Vec<Vec<f64>>, lambda_max: f64) -> PyResult<Self> {
        let d = gram.len();
        if d == 0 || gram.iter().any(|r| r.len() != d) {
            return Err(PyValueError::new_err("gram must be a square matrix"));
        }
        let m = DMatrix::from_fn(d, d, |i, j| gram[i][j]);
        Ok(Self { inner: espec::torus_spectrum(&m, lambda_max).map_err(pyerr)? })
    }

    /// Berger sphere with deformation parameter k.
    #[staticmethod]
    fn berger(k: f64, lambda_max: f64) -> PyResult<Self> {
        Ok(Self { inner: espec::berger_spectrum(k, lambda_max).map_err(pyerr)? })
    }

    /// Lens space L(p, q).
    #[staticmethod]
    fn lens(p: u32, q: u32, lambda_max: f64) -> PyResult<Self> {
        Ok(Self { inner: espec::lens_spectrum(p, q, lambda_max).map_err(pyerr)? })
    }

    /// Dirichlet unit ball in R^3.
    #[staticmethod]
    fn ball3(lambda_max: f64) -> PyResult<Self> {
        Ok(Self { inner: espec::ball3_spectrum(lambda_max).map_err(pyerr)? })
    }

    /// Synthetic Weyl-law spectrum; `remainder` is None, "powerlaw", or
    /// "jitter".
    #[staticmethod]
    #[pyo3(signature = (d, gamma, lambda_max, seed = 0, remainder = None, coeff = 1.0, exponent = 0.5, amplitude = 0.1))]
    #[allow(clippy::too_many_arguments)]
    fn synthetic(
        d: u32,
        gamma: f64,
        lambda_max: f64,
        seed: u64,
        remainder: Option<&str>,
        coeff: f64,
        exponent: f64,
        amplitude: f64,
    ) -> PyResult<Self> {
        let remainder = match remainder {
            None | Some("none") => espec::RemainderModel::None,
            Some("powerlaw") => espec::RemainderModel::PowerLaw { coeff, exponent },
            Some("jitter") => espec::RemainderModel::JitterUniform { amplitude },
            Some(other) => {
                return Err(PyValueError::new_err(format!("unknown remainder '{other}'")))
            }
        };
        let spec = espec::SyntheticWeyl { d, gamma, remainder, seed };
        Ok(Self { inner: espec::synthetic_spectrum(&spec, lambda_max).map_err(pyerr)? })
    }

    /// `(lambda, weight)` pairs, ascending.
    fn atoms(&self) -> Vec<(f64, f64)> {
        self.inner.atoms().iter().map(|a| (a.lambda, a.weight)).collect()
    }

    fn total_weight(&self) -> f64 {
        self.inner.total_weight()
    }

    /// Counting function N(lambda).
    fn count(&self, lam: f64) -> f64 {
        ecount::count_lambda(&self.inner, lam)
    }

    #[getter]
    fn dimension(&self) -> Option<u32> {
        self.inner.dimension
    }

    #[getter]
    fn volume(&self) -> Option<f64> {
        self.inner.volume
    }

    #[getter]
    fn gamma_expected(&self) -> Option<f64> {
        self.inner.gamma_expected
    }

    #[getter]
    fn lambda_max(&self) -> f64 {
        self.inner.lambda_max
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "SpectralMeasure(label='{}', atoms={}, lambda_max={})",
            self.inner.label,
            self.inner.len(),
            self.inner.lambda_max
        )
    }
}

/// Monotone encoding rule `lambda -> C`.
#[pyclass(name = "EncodingRule", skip_from_py_object)]
#[derive(Clone)]
struct PyEncodingRule {
    inner: eenc::EncodingRule,
}

#[pymethods]
impl PyEncodingRule {
    /// Affine rule `C = pi - epsilon * lambda`.
    #[staticmethod]
    fn affine(epsilon: f64) -> PyResult<Self> {
        let rule = eenc::EncodingRule::affine(epsilon);
        rule.validate().map_err(pyerr)?;
        Ok(Self { inner: rule })
    }

    /// Polynomial-type rule `C = a - b lambda^k` (constant slow factor).
    #[staticmethod]
    #[pyo3(signature = (b, k, a = std::f64::consts::PI))]
    fn poly(b: f64, k: f64, a: f64) -> PyResult<Self> {
        let rule = eenc::EncodingRule::PolyType {
            a,
            b,
            k,
            l: eenc::SlowVariation::Const { ell_inf: 1.0 },
        };
        rule.validate().map_err(pyerr)?;
        Ok(Self { inner: rule })
    }

    /// Perturbed-affine rule `C = pi - epsilon lambda + delta(lambda)`;
    /// families: logdistortion, iterlog, slowfactor, boundedoffset, sublog,
    /// oscbv, subpower.
    #[staticmethod]
    #[pyo3(signature = (epsilon, family, alpha = 1.0, beta = 1.0, c = 2.0, q = 0.5, l_alpha = -1.0, theta_amp = 0.5, theta_rate = 1.0))]
    #[allow(clippy::too_many_arguments)]
    fn perturbed(
        epsilon: f64,
        family: &str,
        alpha: f64,
        beta: f64,
        c: f64,
        q: f64,
        l_alpha: f64,
        theta_amp: f64,
        theta_rate: f64,
    ) -> PyResult<Self> {
        let delta = match family {
            "logdistortion" => eenc::PerturbationSpec::LogDistortion { alpha },
            "iterlog" => eenc::PerturbationSpec::IterLog { alpha, beta },
            "slowfactor" => eenc::PerturbationSpec::SlowFactor {
                l: eenc::SlowVariation::LogPower { alpha: l_alpha },
            },
            "boundedoffset" => eenc::PerturbationSpec::BoundedOffset { c },
            "sublog" => eenc::PerturbationSpec::SubLog { beta },
            "oscbv" => eenc::PerturbationSpec::OscBV {
                l: eenc::SlowVariation::LogPower { alpha: l_alpha },
                theta_amp,
                theta_rate,
            },
            "subpower" => eenc::PerturbationSpec::SubPower { q },
            other => return Err(PyValueError::new_err(format!("unknown family '{other}'"))),
        };
        let rule = eenc::EncodingRule::Perturbed { epsilon, delta };
        rule.validate().map_err(pyerr)?;
        Ok(Self { inner: rule })
    }

    /// `C(lambda)`.
    fn apply(&self, lam: f64) -> f64 {
        self.inner.apply(lam)
    }

    /// Numerical inverse `Lambda(C)`.
    fn invert(&self, c: f64) -> PyResult<f64> {
        eenc::invert_rule(&self.inner, c).map_err(pyerr)
    }

    /// Theoretical relative-error envelope at edge distance y (perturbed
    /// rules only).
    fn envelope(&self, y: f64) -> PyResult<f64> {
        eenc::theoretical_envelope(&self.inner, y).map_err(pyerr)
    }

    fn __repr__(&self) -> String {
        format!("EncodingRule({})", serde_json::to_string(&self.inner).unwrap_or_default())
    }
}

/// Pushforward of a spectral measure under an encoding rule.
#[pyclass(name = "EncodedMeasure", skip_from_py_object)]
#[derive(Clone)]
struct PyEncodedMeasure {
    inner: eenc::EncodedMeasure,
}

#[pymethods]
impl PyEncodedMeasure {
    /// `(C, weight)` pairs, strictly decreasing in C.
    fn atoms(&self) -> Vec<(f64, f64)> {
        self.inner.atoms().iter().map(|a| (a.c, a.weight)).collect()
    }

    /// Edge distances `y = edge - C`, ascending.
    fn edge_distances(&self) -> Vec<f64> {
        self.inner.edge_distances()
    }

    /// Mass of atoms with `C_n >= c`.
    fn count_edge(&self, c: f64) -> f64 {
        ecount::count_edge(&self.inner, c)
    }

    #[getter]
    fn edge(&self) -> f64 {
        self.inner.edge
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon()
    }

    #[getter]
    fn above_edge(&self) -> bool {
        self.inner.above_edge
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("EncodedMeasure(atoms={}, edge={})", self.inner.len(), self.inner.edge)
    }
}

/// Pushforward `measure` under `rule` (validates monotonicity).
#[pyfunction]
fn encode(measure: &PySpectralMeasure, rule: &PyEncodingRule) -> PyResult<PyEncodedMeasure> {
    Ok(PyEncodedMeasure { inner: eenc::encode(&measure.inner, &rule.inner).map_err(pyerr)? })
}

/// Max |N_edge(C) - N_lambda((pi - C)/eps)| over the grid; exactly 0 for
/// affine rules.
#[pyfunction]
fn composition_max_discrepancy(
    measure: &PySpectralMeasure,
    encoded: &PyEncodedMeasure,
    c_values: Vec<f64>,
) -> PyResult<f64> {
    let report =
        ecount::check_composition(&measure.inner, &encoded.inner, &c_values).map_err(pyerr)?;
    Ok(report.max_abs_discrepancy)
}

/// Samples `(y, N, N_smoothed, rho)` on the given ascending grid.
#[pyfunction]
#[pyo3(signature = (encoded, y_values, h0 = 1.0, theta = 0.5))]
fn smoothed_curve(
    encoded: &PyEncodedMeasure,
    y_values: Vec<f64>,
    h0: f64,
    theta: f64,
) -> PyResult<Vec<(f64, f64, f64, f64)>> {
    let moll = ecount::MollifierSpec::new(h0, theta).map_err(pyerr)?;
    let curve = ecount::smoothed_curve(&encoded.inner, &y_values, moll).map_err(pyerr)?;
    Ok(curve.samples.iter().map(|s| (s.y, s.n, s.n_smoothed, s.rho)).collect())
}

fn build_curve(
    encoded: &PyEncodedMeasure,
    y_lo: f64,
    y_hi: f64,
    points: usize,
    h0: f64,
    theta: f64,
) -> PyResult<ecount::CountingCurve> {
    if !(y_lo > 0.0 && y_hi > y_lo) {
        return Err(PyValueError::new_err("need 0 < y_lo < y_hi"));
    }
    let grid = edgeweyl::log_spaced(y_lo, y_hi, points.max(8));
    let moll = ecount::MollifierSpec::new(h0, theta).map_err(pyerr)?;
    ecount::smoothed_curve(&encoded.inner, &grid, moll).map_err(pyerr)
}

/// Tauberian (d, gamma) estimate over `[y_lo, y_hi]`; returns a dict with
/// alpha_hat, d_hat, gamma_hat, r_squared, n_points.
#[pyfunction]
#[pyo3(signature = (encoded, y_lo, y_hi, points = 200, h0 = 1.0, theta = 0.5))]
fn estimate_weyl(
    py: Python<'_>,
    encoded: &PyEncodedMeasure,
    y_lo: f64,
    y_hi: f64,
    points: usize,
    h0: f64,
    theta: f64,
) -> PyResult<Py<PyDict>> {
    let curve = build_curve(encoded, y_lo, y_hi, points, h0, theta)?;
    let est =
        eest::estimate_weyl(&curve, encoded.inner.epsilon(), (y_lo, y_hi)).map_err(pyerr)?;
    let d = PyDict::new(py);
    d.set_item("alpha_hat", est.slope.alpha_hat)?;
    d.set_item("d_hat", est.d_hat)?;
    d.set_item("gamma_hat", est.gamma_hat)?;
    d.set_item("r_squared", est.slope.r_squared)?;
    d.set_item("n_points", est.slope.n_points)?;
    d.set_item("d_nearest", est.d_nearest)?;
    Ok(d.into())
}

/// Encoding-exponent estimate `k = d/(2 alpha)` over `[y_lo, y_hi]`.
#[pyfunction]
#[pyo3(signature = (encoded, d, y_lo, y_hi, points = 200))]
fn estimate_k(
    encoded: &PyEncodedMeasure,
    d: u32,
    y_lo: f64,
    y_hi: f64,
    points: usize,
) -> PyResult<f64> {
    let curve = build_curve(encoded, y_lo, y_hi, points, 1.0, 0.5)?;
    Ok(eest::estimate_k(&curve, d, (y_lo, y_hi)).map_err(pyerr)?.k_hat)
}

/// Jump mass, cluster count, and average multiplicity in `[c - delta, c]`.
#[pyfunction]
fn window_stats(
    py: Python<'_>,
    encoded: &PyEncodedMeasure,
    c: f64,
    delta: f64,
) -> PyResult<Py<PyDict>> {
    let w = ecount::window_stats(&encoded.inner, c, delta).map_err(pyerr)?;
    let d = PyDict::new(py);
    d.set_item("c", w.c)?;
    d.set_item("delta", w.delta)?;
    d.set_item("jump_total", w.jump_total)?;
    d.set_item("cluster_count", w.cluster_count)?;
    d.set_item("mbar", w.mbar)?;
    Ok(d.into())
}

/// Analytic and Monte-Carlo edge hit probability for cluster `ell`.
#[pyfunction]
#[pyo3(signature = (ell, d, epsilon, delta, trials = 100_000, seed = 0))]
fn edge_hit_probability(
    ell: u32,
    d: u32,
    epsilon: f64,
    delta: f64,
    trials: u64,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let hp =
        ecount::edge_hit_probability(ell, d, epsilon, delta, trials, seed).map_err(pyerr)?;
    Ok((hp.analytic, hp.empirical))
}

fn heat_dict(py: Python<'_>, hs: etrans::HeatSample) -> PyResult<Py<PyDict>> {
    let d = PyDict::new(py);
    d.set_item("t", hs.t)?;
    d.set_item("theta", hs.theta)?;
    d.set_item("tail_bound", hs.truncation_bound)?;
    d.set_item("status", format!("{:?}", hs.status).to_lowercase())?;
    Ok(d.into())
}

/// Truncated heat trace with certified tail control.
#[pyfunction]
fn heat_trace(py: Python<'_>, measure: &PySpectralMeasure, t: f64) -> PyResult<Py<PyDict>> {
    heat_dict(py, etrans::heat_trace(&measure.inner, t).map_err(pyerr)?)
}

/// Edge heat trace `H_edge(s)`.
#[pyfunction]
fn edge_heat(py: Python<'_>, encoded: &PyEncodedMeasure, s: f64) -> PyResult<Py<PyDict>> {
    heat_dict(py, etrans::edge_heat(&encoded.inner, s).map_err(pyerr)?)
}

/// Truncated spectral zeta `zeta(u)` for `u > d/2`.
#[pyfunction]
#[pyo3(signature = (measure, u, tail_gamma = None))]
fn zeta(
    py: Python<'_>,
    measure: &PySpectralMeasure,
    u: f64,
    tail_gamma: Option<f64>,
) -> PyResult<Py<PyDict>> {
    let z = etrans::zeta(&measure.inner, u, tail_gamma).map_err(pyerr)?;
    let d = PyDict::new(py);
    d.set_item("u", z.u)?;
    d.set_item("value", z.value)?;
    d.set_item("tail_bound", z.tail_bound)?;
    d.set_item("status", format!("{:?}", z.status).to_lowercase())?;
    d.set_item("excluded_weight", z.excluded_weight)?;
    Ok(d.into())
}

/// Edge zeta; equals `eps^{-u} zeta(u)` exactly for affine rules.
#[pyfunction]
fn edge_zeta(encoded: &PyEncodedMeasure, u: f64) -> PyResult<f64> {
    etrans::edge_zeta(&encoded.inner, u).map_err(pyerr)
}

fn fit_dict(py: Python<'_>, fit: etrans::SeeleyFit) -> PyResult<Py<PyDict>> {
    let d = PyDict::new(py);
    d.set_item("a0_hat", fit.a0_hat)?;
    d.set_item("a2_hat", fit.a2_hat)?;
    d.set_item("window", fit.fit_window)?;
    d.set_item("residual_norm", fit.residual_norm)?;
    Ok(d.into())
}

/// Heat-coefficient fit `(4 pi t)^{d/2} Theta(t) ~ a0 + a2 t`.
#[pyfunction]
fn seeley_fit(
    py: Python<'_>,
    measure: &PySpectralMeasure,
    t_values: Vec<f64>,
    d: u32,
) -> PyResult<Py<PyDict>> {
    fit_dict(py, etrans::seeley_fit(&measure.inner, &t_values, d).map_err(pyerr)?)
}

/// Edge-side heat-coefficient fit.
#[pyfunction]
fn seeley_fit_edge(
    py: Python<'_>,
    encoded: &PyEncodedMeasure,
    s_values: Vec<f64>,
    d: u32,
) -> PyResult<Py<PyDict>> {
    fit_dict(py, etrans::seeley_fit_edge(&encoded.inner, &s_values, d).map_err(pyerr)?)
}

/// Realize an atomic measure on (0, inf) as a Stieltjes string; returns the
/// alternating continued-fraction coefficients and the Weyl-match residual.
#[pyfunction]
fn realize_measure(
    py: Python<'_>,
    points: Vec<f64>,
    weights: Vec<f64>,
) -> PyResult<Py<PyDict>> {
    if points.len() != weights.len() {
        return Err(PyValueError::new_err("points and weights must have equal length"));
    }
    let mu = ekrein::AtomicMeasurePlus::new(points.into_iter().zip(weights).collect())
        .map_err(pyerr)?;
    let jac = ekrein::measure_to_jacobi(&mu).map_err(pyerr)?;
    let string = ekrein::jacobi_to_string(&jac).map_err(pyerr)?;
    let residual =
        ekrein::weyl_match_residual(&string, &mu, &ekrein::weyl_test_points()).map_err(pyerr)?;
    let d = PyDict::new(py);
    d.set_item("coefficients", string.coefficients().to_vec())?;
    d.set_item("match_residual", residual)?;
    d.set_item("n_atoms", mu.len())?;
    Ok(d.into())
}

/// Realize the lowest `n_keep` positive edge distances of an affine-encoded
/// measure as a Stieltjes string.
#[pyfunction]
fn realize_encoded(
    py: Python<'_>,
    encoded: &PyEncodedMeasure,
    n_keep: usize,
) -> PyResult<Py<PyDict>> {
    let (string, report) = ekrein::realize_encoded(&encoded.inner, n_keep).map_err(pyerr)?;
    let d = PyDict::new(py);
    d.set_item("coefficients", string.coefficients().to_vec())?;
    d.set_item("match_residual", report.match_residual)?;
    d.set_item("roundtrip_residual", report.roundtrip_residual)?;
    d.set_item("n_atoms", report.n_atoms)?;
    Ok(d.into())
}

/// `n` log-spaced points on `[lo, hi]`.
#[pyfunction]
fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    edgeweyl::log_spaced(lo, hi, n)
}

#[pymodule]
fn edgeweyl_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpectralMeasure>()?;
    m.add_class::<PyEncodingRule>()?;
    m.add_class::<PyEncodedMeasure>()?;
    m.add_function(wrap_pyfunction!(encode, m)?)?;
    m.add_function(wrap_pyfunction!(composition_max_discrepancy, m)?)?;
    m.add_function(wrap_pyfunction!(smoothed_curve, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_weyl, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_k, m)?)?;
    m.add_function(wrap_pyfunction!(window_stats, m)?)?;
    m.add_function(wrap_pyfunction!(edge_hit_probability, m)?)?;
    m.add_function(wrap_pyfunction!(heat_trace, m)?)?;
    m.add_function(wrap_pyfunction!(edge_heat, m)?)?;
    m.add_function(wrap_pyfunction!(zeta, m)?)?;
    m.add_function(wrap_pyfunction!(edge_zeta, m)?)?;
    m.add_function(wrap_pyfunction!(seeley_fit, m)?)?;
    m.add_function(wrap_pyfunction!(seeley_fit_edge, m)?)?;
    m.add_function(wrap_pyfunction!(realize_measure, m)?)?;
    m.add_function(wrap_pyfunction!(realize_encoded, m)?)?;
    m.add_function(wrap_pyfunction!(log_spaced, m)?)?;
    Ok(())
}
