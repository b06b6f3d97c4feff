//! Python bindings. Matrices cross the boundary as lists of rows; every
//! library error becomes a `ValueError`.

use extremal_kpca::stats;
use extremal_kpca::theory;
use extremal_kpca::{
    self as core, ExtremeRule, FactorLaw, FactorModelSpec, KernelFamily, PgdSettings, ProjectionWeighting, StepRule,
};
use nalgebra::DMatrix;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err("rows have different lengths"));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[pyclass(name = "KernelSpec", frozen, from_py_object)]
#[derive(Clone)]
struct PyKernel(core::KernelSpec);

#[pymethods]
impl PyKernel {
    #[new]
    #[pyo3(signature = (family = "gaussian", gamma = 1.0))]
    fn new(family: &str, gamma: f64) -> PyResult<Self> {
        let family = match family.to_ascii_lowercase().as_str() {
            "gaussian" => KernelFamily::Gaussian,
            "exponential" => KernelFamily::Exponential,
            other => return Err(PyValueError::new_err(format!("unknown kernel family '{other}'"))),
        };
        core::KernelSpec::new(family, gamma).map(Self).map_err(err)
    }

    #[getter]
    fn family(&self) -> &'static str {
        match self.0.family() {
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::Exponential => "exponential",
        }
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.0.gamma()
    }

    /// `R(x)` for a displacement `x`.
    fn __call__(&self, x: Vec<f64>) -> f64 {
        self.0.eval(&x)
    }

    fn __repr__(&self) -> String {
        format!("KernelSpec('{}', gamma={})", self.family(), self.gamma())
    }
}

/// Linear factor model `X = A Z + noise` with i.i.d. heavy-tailed factors.
#[pyclass(name = "FactorModel", frozen, from_py_object)]
#[derive(Clone)]
struct PyFactorModel(FactorModelSpec);

#[pymethods]
impl PyFactorModel {
    #[new]
    #[pyo3(signature = (loadings = None, alpha = 1.0, sigma = 0.0, law = "frechet"))]
    fn new(loadings: Option<Vec<Vec<f64>>>, alpha: f64, sigma: f64, law: &str) -> PyResult<Self> {
        let a = match loadings {
            Some(r) => matrix(&r)?,
            None => FactorModelSpec::two_factor_loadings(),
        };
        let law = match law.to_ascii_lowercase().as_str() {
            "frechet" => FactorLaw::Frechet,
            "pareto" => FactorLaw::Pareto,
            other => return Err(PyValueError::new_err(format!("unknown factor law '{other}'"))),
        };
        FactorModelSpec::new(a, alpha, law, sigma).map(Self).map_err(err)
    }

    #[getter]
    fn loadings(&self) -> Vec<Vec<f64>> {
        rows(self.0.loadings())
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.0.alpha()
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.0.sigma()
    }

    /// `(points, labels)` with labels "signal" or "noise".
    fn sample(&self, n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<&'static str>) {
        let s = core::gen_contaminated_lfm(&self.0, n, &mut core::seeded_rng(seed));
        (s.points, s.labels.iter().map(|l| l.as_str()).collect())
    }

    /// The limiting angular atoms `a_k / ‖a_k‖`.
    fn spectral_atoms(&self) -> PyResult<Vec<Vec<f64>>> {
        theory::spectral_atoms(&self.0).map(|a| a.atoms).map_err(err)
    }

    /// `draws` independent draws of the cluster-`k` limit law.
    fn sample_limit_law(&self, k: usize, draws: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
        let spec = theory::LimitLawSpec::new(self.0.clone()).map_err(err)?;
        let mut rng = core::seeded_rng(seed);
        (0..draws).map(|_| theory::sample_limit_law(&spec, k, &mut rng).map_err(err)).collect()
    }

    fn level_for_exceedances(&self, n: usize, exceedances: f64) -> PyResult<f64> {
        theory::level_for_exceedances(&self.0, n, exceedances).map_err(err)
    }
}

#[pyfunction]
fn circle_model(sigma: f64, n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<&'static str>) {
    let s = core::gen_circle_model(sigma, n, &mut core::seeded_rng(seed));
    (s.points, s.labels.iter().map(|l| l.as_str()).collect())
}

#[pyfunction]
#[pyo3(signature = (n, seed, spikes = None, sigma0 = 1.0, sigma = 0.1))]
fn spiked_model(
    n: usize,
    seed: u64,
    spikes: Option<Vec<Vec<f64>>>,
    sigma0: f64,
    sigma: f64,
) -> PyResult<(Vec<Vec<f64>>, Vec<&'static str>)> {
    let b = match spikes {
        Some(r) => matrix(&r)?,
        None => core::SpikedModelSpec::reference_spikes(),
    };
    let spec = core::SpikedModelSpec::new(b, sigma0, sigma).map_err(err)?;
    let s = core::gen_spiked_angular_gaussian(&spec, n, &mut core::seeded_rng(seed));
    Ok((s.points, s.labels.iter().map(|l| l.as_str()).collect()))
}

/// Consecutive pairs `(Y_{t-1}, Y_t)` of the integrated ARCH(1) recursion.
#[pyfunction]
fn arch_pairs(length: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    let spec = core::ArchSpec::new(length).map_err(err)?;
    Ok(core::gen_arch_pairs(&spec, &mut core::seeded_rng(seed)))
}

#[pyclass(name = "ExtremalSample", frozen, skip_from_py_object)]
struct PySample(core::ExtremalSample);

#[pymethods]
impl PySample {
    #[getter]
    fn angles(&self) -> Vec<Vec<f64>> {
        self.0.angles.clone()
    }

    #[getter]
    fn radii(&self) -> Vec<f64> {
        self.0.radii.clone()
    }

    #[getter]
    fn threshold(&self) -> f64 {
        self.0.threshold
    }

    #[getter]
    fn source_indices(&self) -> Vec<usize> {
        self.0.source_indices.clone()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

/// Angular parts of the `top_k` largest observations, or of all observations
/// above `threshold`.
#[pyfunction]
#[pyo3(signature = (points, top_k = None, threshold = None))]
fn extract_extremes(points: Vec<Vec<f64>>, top_k: Option<usize>, threshold: Option<f64>) -> PyResult<PySample> {
    let rule = match (top_k, threshold) {
        (Some(k), None) => ExtremeRule::TopK(k),
        (None, Some(u)) => ExtremeRule::Threshold(u),
        _ => return Err(PyValueError::new_err("give exactly one of top_k and threshold")),
    };
    core::extract_extremes(&points, rule).map(PySample).map_err(err)
}

fn result_dict<'py>(py: Python<'py>, r: &core::PreimageResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("preimage", r.preimage.clone())?;
    d.set_item("iterations", r.iterations)?;
    d.set_item("objective", r.final_objective)?;
    d.set_item("converged", r.converged)?;
    d.set_item("stationarity", r.stationarity)?;
    Ok(d)
}

#[pyclass(name = "KpcaModel", frozen, skip_from_py_object)]
struct PyKpca(core::KpcaModel);

fn settings(max_iterations: usize, tolerance: f64, step: Option<f64>) -> PgdSettings {
    PgdSettings {
        max_iterations,
        stationarity_tol: tolerance,
        step_rule: step.map_or(StepRule::PaperLipschitz, StepRule::Fixed),
        record_trace: false,
    }
}

#[pymethods]
impl PyKpca {
    #[new]
    #[pyo3(signature = (kernel, angles, m, eigenvalue_weighted = false))]
    fn new(kernel: &PyKernel, angles: Vec<Vec<f64>>, m: usize, eigenvalue_weighted: bool) -> PyResult<Self> {
        let mut model = core::fit_kpca(&kernel.0, &angles, m).map_err(err)?;
        if eigenvalue_weighted {
            model = model.with_weighting(ProjectionWeighting::EigenvalueWeighted);
        }
        Ok(Self(model))
    }

    #[getter]
    fn m(&self) -> usize {
        self.0.m()
    }

    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.0.eigenpairs().eigenvalues().iter().copied().collect()
    }

    /// Value of the preimage objective `f(v)` for query `w`.
    fn objective(&self, w: Vec<f64>, v: Vec<f64>) -> PyResult<f64> {
        Ok(self.0.objective(&w).map_err(err)?.value(&v))
    }

    #[pyo3(signature = (w, max_iterations = 500, tolerance = 1e-8, step = None))]
    fn preimage<'py>(
        &self,
        py: Python<'py>,
        w: Vec<f64>,
        max_iterations: usize,
        tolerance: f64,
        step: Option<f64>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let obj = self.0.objective(&w).map_err(err)?;
        let r = core::solve_preimage(&obj, &w, &settings(max_iterations, tolerance, step)).map_err(err)?;
        result_dict(py, &r)
    }

    /// Preimages of every query, each started at the query.
    #[pyo3(signature = (queries, max_iterations = 500, tolerance = 1e-8, step = None))]
    fn preimages<'py>(
        &self,
        py: Python<'py>,
        queries: Vec<Vec<f64>>,
        max_iterations: usize,
        tolerance: f64,
        step: Option<f64>,
    ) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let batch = core::batch_preimages(&self.0, &queries, &settings(max_iterations, tolerance, step));
        if let Some((i, e)) = batch.errors.into_iter().next() {
            return Err(PyValueError::new_err(format!("query {i}: {e}")));
        }
        batch.results.iter().flatten().map(|r| result_dict(py, r)).collect()
    }
}

/// One Davis-Kahan replicate; returns `bound` (None for a zero gap),
/// `residual`, `gap` and `satisfied`.
#[pyfunction]
fn davis_kahan_replicate<'py>(
    py: Python<'py>,
    model: &PyFactorModel,
    kernel: &PyKernel,
    n: usize,
    top_k: usize,
    m: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let o = theory::davis_kahan_replicate(&model.0, &kernel.0, n, top_k, m, &mut core::seeded_rng(seed)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("bound", o.bound)?;
    d.set_item("residual", o.residual)?;
    d.set_item("gap", o.gap)?;
    d.set_item("satisfied", o.satisfied)?;
    Ok(d)
}

/// Log-log regression of the mean block perturbation norm on the level grid.
#[pyfunction]
fn rate_check<'py>(
    py: Python<'py>,
    model: &PyFactorModel,
    kernel: &PyKernel,
    n: usize,
    levels: Vec<f64>,
    replicates: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let c = theory::rate_check(&model.0, &kernel.0, n, &levels, replicates, &mut core::seeded_rng(seed)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("regime", c.regime.map(|r| r.as_str()))?;
    d.set_item("levels", c.u_grid.clone())?;
    d.set_item("mean_frobenius", c.statistic_per_u.clone())?;
    d.set_item("fitted_slope", c.fitted_slope)?;
    d.set_item("expected_slope", c.expected_slope)?;
    d.set_item("scaled_medians", c.scaled_medians())?;
    Ok(d)
}

#[pyfunction]
fn hill_estimator(sample: Vec<f64>, k_top: usize) -> PyResult<f64> {
    stats::hill_estimator(&sample, k_top).map_err(err)
}

#[pyfunction]
fn ks_two_sample(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    stats::ks_two_sample(&a, &b).map_err(err)
}

#[pyfunction]
fn auto_scree_m(eigenvalues: Vec<f64>) -> usize {
    stats::auto_scree_m(&eigenvalues)
}

#[pymodule]
fn extremal_kpca_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", core::VERSION)?;
    m.add_class::<PyKernel>()?;
    m.add_class::<PyFactorModel>()?;
    m.add_class::<PySample>()?;
    m.add_class::<PyKpca>()?;
    m.add_function(wrap_pyfunction!(circle_model, m)?)?;
    m.add_function(wrap_pyfunction!(spiked_model, m)?)?;
    m.add_function(wrap_pyfunction!(arch_pairs, m)?)?;
    m.add_function(wrap_pyfunction!(extract_extremes, m)?)?;
    m.add_function(wrap_pyfunction!(davis_kahan_replicate, m)?)?;
    m.add_function(wrap_pyfunction!(rate_check, m)?)?;
    m.add_function(wrap_pyfunction!(hill_estimator, m)?)?;
    m.add_function(wrap_pyfunction!(ks_two_sample, m)?)?;
    m.add_function(wrap_pyfunction!(auto_scree_m, m)?)?;
    Ok(())
}
