//! Python bindings. Invalid input raises `ValueError`; numerical failures
//! (tolerance, grid coarseness, overflow) raise `fqhe_torus.NumericalError`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use fqhe_core::curvature::{
    gram_field, profile_curvature, trace_form_and_degree, CurvatureOptions, FieldBackend, FieldModel, Provenance,
};
use fqhe_core::error::FqheError;
use fqhe_core::geometry::LineBundleSpec;
use fqhe_core::gram::GramMatrix;
use fqhe_core::integration::{GridSpec, Integrator};
use fqhe_core::laughlin::{self, OneLayerModel, DEFAULT_REL_TOL};
use fqhe_core::theta::{self, Characteristics1D, PeriodMatrix, Tolerance, TorusParams};
use fqhe_core::wen::{self, enumerate_pi, KvwModel, WenError};

create_exception!(fqhe_torus, NumericalError, PyRuntimeError);

fn to_py(e: FqheError) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        NumericalError::new_err(e.to_string())
    }
}

fn wen_to_py(e: WenError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn torus(tau: Complex64) -> PyResult<TorusParams> {
    TorusParams::new(tau).map_err(to_py)
}

/// Builds the integrator named by `backend`; `seed` is required for "qmc".
pub fn make_integrator(backend: &str, grid: usize, samples: usize, seed: Option<u64>, replicates: usize) -> Result<Integrator, FqheError> {
    match backend {
        "grid" => Ok(Integrator::grid(grid)),
        "qmc" => {
            let seed = seed.ok_or_else(|| FqheError::InvalidInput("the qmc backend needs a seed".into()))?;
            Ok(Integrator::qmc(samples, seed, replicates))
        }
        other => Err(FqheError::InvalidInput(format!("unknown backend {other:?}, expected \"grid\" or \"qmc\""))),
    }
}

/// Row-major nested lists.
pub fn rows(m: &GramMatrix) -> Vec<Vec<Complex64>> {
    (0..m.size()).map(|p| (0..m.size()).map(|q| m.matrix[(p, q)]).collect()).collect()
}

fn gram_dict<'py>(py: Python<'py>, g: &GramMatrix) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("matrix", rows(g))?;
    d.set_item("error_estimate", g.error_estimate)?;
    d.set_item("evaluations", g.evaluations)?;
    d.set_item("backend", g.backend.name())?;
    d.set_item("off_diagonal_max", g.off_diagonal_max())?;
    d.set_item("diagonal_mean", g.diagonal_mean())?;
    d.set_item("scalar_residual", g.scalar_residual())?;
    Ok(d)
}

/// θ[a,b](z|τ) to absolute tolerance `tol`.
#[pyfunction]
#[pyo3(signature = (a, b, z, tau, tol = 1e-13))]
fn theta1d(a: f64, b: f64, z: Complex64, tau: Complex64, tol: f64) -> PyResult<Complex64> {
    let tol = Tolerance::new(tol).map_err(to_py)?;
    theta::theta1d(Characteristics1D::new(a, b), z, tau, tol).map_err(to_py)
}

/// Θ[a,b](z|Ω) with Ω = τK for an integer matrix K.
#[pyfunction]
#[pyo3(signature = (a, b, z, tau, k, tol = 1e-13))]
fn theta_g(a: Vec<f64>, b: Vec<f64>, z: Vec<Complex64>, tau: Complex64, k: Vec<Vec<i64>>, tol: f64) -> PyResult<Complex64> {
    let g = k.len();
    if k.iter().any(|r| r.len() != g) {
        return Err(PyValueError::new_err("K must be square"));
    }
    let kf = DMatrix::from_fn(g, g, |p, q| k[p][q] as f64);
    let omega = PeriodMatrix::scaled(tau, &kf).map_err(to_py)?;
    let tol = Tolerance::new(tol).map_err(to_py)?;
    theta::theta_g(&a, &b, &z, &omega, tol).map_err(to_py)
}

/// A validated Wen datum (K, n).
#[pyclass(name = "WenDatum", module = "fqhe_torus", frozen)]
struct PyWenDatum {
    inner: wen::WenDatum,
}

#[pymethods]
impl PyWenDatum {
    #[new]
    fn new(k: Vec<Vec<i64>>, n: Vec<i64>) -> PyResult<Self> {
        wen::validate_wen(&k, &n).map(|inner| Self { inner }).map_err(wen_to_py)
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        wen::WenDatum::from_text(text).map(|inner| Self { inner }).map_err(wen_to_py)
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    #[getter]
    fn k(&self) -> Vec<Vec<i64>> {
        self.inner.k.clone()
    }

    #[getter]
    fn n(&self) -> Vec<i64> {
        self.inner.n_vec.clone()
    }

    #[getter]
    fn d(&self) -> i64 {
        self.inner.d
    }

    #[getter]
    fn delta(&self) -> i64 {
        self.inner.delta
    }

    #[getter]
    fn n_total(&self) -> i64 {
        self.inner.n_total
    }

    #[getter]
    fn cyclic(&self) -> bool {
        self.inner.cyclic
    }

    #[getter]
    fn epsilon_k(&self) -> i8 {
        self.inner.epsilon_k
    }

    /// u = K⁻¹e as (numerator, denominator) pairs.
    #[getter]
    fn u(&self) -> Vec<(i64, i64)> {
        self.inner.u.iter().map(|r| (*r.numer(), *r.denom())).collect()
    }

    #[getter]
    fn invariant_factors(&self) -> Vec<i64> {
        self.inner.invariant_factors.clone()
    }

    #[getter]
    fn n_delta_over_d(&self) -> i64 {
        self.inner.n_delta_over_d()
    }

    /// +1 for the plain particle bundle, -1 for the sharp one.
    #[getter]
    fn automorphy_sign(&self) -> i8 {
        self.inner.automorphy_sign()
    }

    /// Elements of Π = K⁻¹ℤ^g/ℤ^g as (numerators, common denominator).
    fn pi(&self) -> Vec<(Vec<i64>, i64)> {
        enumerate_pi(&self.inner).iter().map(|c| (c.numerators().to_vec(), c.denominator())).collect()
    }

    fn __repr__(&self) -> String {
        format!("WenDatum(K={:?}, n={:?}, d={}, delta={})", self.inner.k, self.inner.n_vec, self.inner.d, self.inner.delta)
    }
}

/// Validates (K, n); raises ValueError naming the violated invariant.
#[pyfunction]
fn validate_wen(k: Vec<Vec<i64>>, n: Vec<i64>) -> PyResult<PyWenDatum> {
    PyWenDatum::new(k, n)
}

/// Closed-form centre-of-mass constant κ and the alternative prefactor.
#[pyfunction]
fn kappa(k: Vec<Vec<i64>>, a: Vec<f64>, t: f64) -> PyResult<(f64, f64)> {
    let kap = wen::kappa_closed(&k, &a, t).map_err(to_py)?;
    Ok((kap.value, kap.alternative))
}

/// ‖s_j‖² = √(1/2kt)·e^{2πta²/k}.
#[pyfunction]
fn one_particle_norm_sq(k: i64, t: f64, a: f64) -> f64 {
    laughlin::one_particle_norm_sq_closed(k, t, a)
}

/// ‖Φ‖ = (1/2nt)^{n/4}·e^{πta²}.
#[pyfunction]
fn slater_norm(n: usize, t: f64, a: f64) -> f64 {
    laughlin::slater_norm_closed(n, t, a)
}

/// One-particle Gram matrix of H⁰(L_{k,ξ}) by grid quadrature.
#[pyfunction]
#[pyo3(signature = (k, tau, xi_a = 0.0, xi_b = 0.0, grid = 64))]
fn one_particle_gram<'py>(py: Python<'py>, k: i64, tau: Complex64, xi_a: f64, xi_b: f64, grid: usize) -> PyResult<Bound<'py, PyDict>> {
    let torus = torus(tau)?;
    let spec = LineBundleSpec::new(k, xi_a, xi_b);
    let g = py
        .detach(|| GridSpec::new(grid, 2).and_then(|gs| laughlin::one_particle_gram(&spec, &torus, gs, DEFAULT_REL_TOL)))
        .map_err(to_py)?;
    gram_dict(py, &g)
}

/// Gram matrix of the m Haldane–Rezayi states.
#[pyfunction]
#[pyo3(signature = (m, n, tau, xi_a = 0.0, xi_b = 0.0, backend = "grid", grid = 16, samples = 65536, seed = None, replicates = 16))]
#[allow(clippy::too_many_arguments)]
fn hr_gram<'py>(
    py: Python<'py>,
    m: usize,
    n: usize,
    tau: Complex64,
    xi_a: f64,
    xi_b: f64,
    backend: &str,
    grid: usize,
    samples: usize,
    seed: Option<u64>,
    replicates: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let integrator = make_integrator(backend, grid, samples, seed, replicates).map_err(to_py)?;
    let model = OneLayerModel::new(m, n, torus(tau)?, xi_a, xi_b).map_err(to_py)?;
    let g = py.detach(|| laughlin::hr_gram(&model, &integrator, DEFAULT_REL_TOL)).map_err(to_py)?;
    gram_dict(py, &g)
}

/// Keski-Vakkuri–Wen Gram matrix over Π on the slice ζ = ξ(1,…,1).
#[pyfunction]
#[pyo3(signature = (datum, tau, xi_a = 0.0, xi_b = 0.0, backend = "grid", grid = 12, samples = 65536, seed = None, replicates = 16))]
#[allow(clippy::too_many_arguments)]
fn kvw_gram<'py>(
    py: Python<'py>,
    datum: &PyWenDatum,
    tau: Complex64,
    xi_a: f64,
    xi_b: f64,
    backend: &str,
    grid: usize,
    samples: usize,
    seed: Option<u64>,
    replicates: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let integrator = make_integrator(backend, grid, samples, seed, replicates).map_err(to_py)?;
    let model = KvwModel::new(datum.inner.clone(), torus(tau)?).map_err(to_py)?;
    let frame = enumerate_pi(&datum.inner);
    let g = py.detach(|| model.gram(xi_a, xi_b, &frame, &integrator, DEFAULT_REL_TOL)).map_err(to_py)?;
    gram_dict(py, &g)
}

/// Centre-of-mass Gram matrix over Π by grid quadrature in 2g dimensions.
#[pyfunction]
#[pyo3(signature = (k, tau, a = None, b = None, grid = 32))]
fn center_mass_gram<'py>(py: Python<'py>, k: Vec<Vec<i64>>, tau: Complex64, a: Option<Vec<f64>>, b: Option<Vec<f64>>, grid: usize) -> PyResult<Bound<'py, PyDict>> {
    let g = k.len();
    let a = a.unwrap_or_else(|| vec![0.0; g]);
    let b = b.unwrap_or_else(|| vec![0.0; g]);
    let torus = torus(tau)?;
    let gram = py
        .detach(|| GridSpec::new(grid, 2 * g).and_then(|gs| wen::center_mass_gram(&k, &torus, &a, &b, gs, DEFAULT_REL_TOL)))
        .map_err(to_py)?;
    gram_dict(py, &gram)
}

/// Parses a curvature model name and its parameters.
pub fn field_model(model: &str, k: i64, m: usize, n: Vec<i64>, big_k: Option<Vec<Vec<i64>>>, alpha: f64, rank: usize) -> Result<FieldModel, FqheError> {
    let need_k = || big_k.clone().ok_or_else(|| FqheError::InvalidInput(format!("model {model:?} needs K")));
    Ok(match model {
        "one-particle" | "one_particle" => FieldModel::OneParticle { k },
        "one-layer" | "one_layer" => {
            let n = n.first().copied().filter(|&x| x > 0).ok_or_else(|| FqheError::InvalidInput("n must be positive".into()))?;
            FieldModel::OneLayer { m, n: n as usize }
        }
        "multilayer" => FieldModel::Multilayer { datum: wen::validate_wen(&need_k()?, &n)? },
        "center-mass" | "center_mass" => FieldModel::CenterMass { k: need_k()? },
        "profile" => FieldModel::ScalarProfile { rank, alpha },
        other => return Err(FqheError::InvalidInput(format!("unknown field model {other:?}"))),
    })
}

/// Curvature, trace form and degree of a Gram field sampled on an
/// `na × nb` grid over the dual torus.
#[pyfunction]
#[pyo3(signature = (model, tau, k = 1, m = 1, n = vec![1], big_k = None, alpha = 1.0, rank = 1, na = 64, nb = None, order = 8, fit = false))]
#[allow(clippy::too_many_arguments)]
fn curvature<'py>(
    py: Python<'py>,
    model: &str,
    tau: Complex64,
    k: i64,
    m: usize,
    n: Vec<i64>,
    big_k: Option<Vec<Vec<i64>>>,
    alpha: f64,
    rank: usize,
    na: usize,
    nb: Option<usize>,
    order: usize,
    fit: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let model = field_model(model, k, m, n, big_k, alpha, rank).map_err(to_py)?;
    let torus = torus(tau)?;
    let opts = CurvatureOptions { order, ..Default::default() };
    let halo = if fit { 0 } else { opts.halo() };
    let (report, expected) = py
        .detach(|| {
            let field = gram_field(&model, FieldBackend::ClosedForm, torus, na, nb.unwrap_or(na), halo, DEFAULT_REL_TOL)?;
            debug_assert_eq!(field.provenance, Provenance::ClosedForm);
            let report = if fit { profile_curvature(&field)? } else { trace_form_and_degree(&field, &opts)? };
            Ok((report, model.expected_degree(torus.t())?))
        })
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("backend", report.backend.name())?;
    d.set_item("rank", report.rank)?;
    d.set_item("degree", report.degree)?;
    d.set_item("expected_degree", expected)?;
    d.set_item("slope", report.slope)?;
    d.set_item("trace_mean", report.trace_mean)?;
    d.set_item("flatness_residual", report.flatness_residual)?;
    d.set_item("richardson_error", report.richardson_error)?;
    Ok(d)
}

/// Runs the command-line driver with `argv` (without the program name) and
/// returns its exit code.
#[pyfunction]
fn run_cli(py: Python<'_>, argv: Vec<String>) -> i32 {
    let full: Vec<String> = std::iter::once("fqhe".to_string()).chain(argv).collect();
    py.detach(|| fqhe_core::cli::run(full))
}

#[pymodule]
fn fqhe_torus(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add_class::<PyWenDatum>()?;
    m.add_function(wrap_pyfunction!(theta1d, m)?)?;
    m.add_function(wrap_pyfunction!(theta_g, m)?)?;
    m.add_function(wrap_pyfunction!(validate_wen, m)?)?;
    m.add_function(wrap_pyfunction!(kappa, m)?)?;
    m.add_function(wrap_pyfunction!(one_particle_norm_sq, m)?)?;
    m.add_function(wrap_pyfunction!(slater_norm, m)?)?;
    m.add_function(wrap_pyfunction!(one_particle_gram, m)?)?;
    m.add_function(wrap_pyfunction!(hr_gram, m)?)?;
    m.add_function(wrap_pyfunction!(kvw_gram, m)?)?;
    m.add_function(wrap_pyfunction!(center_mass_gram, m)?)?;
    m.add_function(wrap_pyfunction!(curvature, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qmc_needs_a_seed() {
        assert!(make_integrator("qmc", 8, 1024, None, 4).unwrap_err().is_validation());
        assert!(matches!(make_integrator("qmc", 8, 1024, Some(1), 4).unwrap(), Integrator::Qmc { seed: 1, .. }));
        assert!(matches!(make_integrator("grid", 8, 0, None, 0).unwrap(), Integrator::Grid { points_per_axis: 8, .. }));
        assert!(make_integrator("mc", 8, 0, None, 0).is_err());
    }

    #[test]
    fn field_models_parse() {
        assert!(matches!(field_model("one_particle", 3, 1, vec![1], None, 0.0, 1).unwrap(), FieldModel::OneParticle { k: 3 }));
        assert!(field_model("multilayer", 1, 1, vec![1, 1], None, 0.0, 1).is_err());
        let ml = field_model("multilayer", 1, 1, vec![1, 1], Some(vec![vec![2, 1], vec![1, 2]]), 0.0, 1).unwrap();
        assert_eq!(ml.rank().unwrap(), 3);
        assert!(field_model("one-layer", 1, 2, vec![0], None, 0.0, 1).is_err());
    }

    #[test]
    fn gram_rows_are_row_major() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0].map(|x| Complex64::new(x, 0.0)));
        let g = GramMatrix::from_matrix(m, fqhe_core::integration::Backend::Grid);
        let r = rows(&g);
        assert_eq!(r[0][1], Complex64::new(2.0, 0.0));
        assert_eq!(r[1][0], Complex64::new(3.0, 0.0));
    }

}
