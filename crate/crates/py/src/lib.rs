//! Python bindings: problems, trajectories, equilibria and connection
//! graphs. Fields cross the boundary as lists of sine coefficients.

use attractor_lab::attractor::{
    build_attractor, certify_dissipation, dimension_scan, energy_descent_audit, linf_bound, run_trials, trial_suite,
    verify_linf, BuildParams, ConnectionGraph,
};
use attractor_lab::equilibria::{find_all, linearize, Equilibrium, SearchStrategy};
use attractor_lab::msflow::check_semiflow_inclusion;
use attractor_lab::spectral::{energy_equality_residual, energy_series, GalerkinBundle, IntegratorOptions, Scheme};
use attractor_lab::{
    make_basis, BranchPolicy, Domain, Error, GalerkinProblem, NonlinearTerm, SpectralField, TrajectorySample,
};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter(_)
        | Error::Resonant { .. }
        | Error::UnknownNonlinearity(_)
        | Error::UnsupportedDomain(_)
        | Error::Precondition(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn parse_scheme(name: &str) -> PyResult<Scheme> {
    match name {
        "etd1" => Ok(Scheme::ExponentialEuler),
        "etd2" => Ok(Scheme::Etd2),
        other => Err(PyValueError::new_err(format!("unknown scheme `{other}` (etd1 or etd2)"))),
    }
}

/// Galerkin truncation of `u_t − Δu + f(u) = h` on `(0, π)`.
#[pyclass(module = "attractor_lab", frozen)]
struct Problem {
    inner: GalerkinProblem,
}

impl Problem {
    fn field(&self, coeffs: Vec<f64>) -> PyResult<SpectralField> {
        SpectralField::new(self.inner.basis().clone(), coeffs).map_err(py_err)
    }
}

#[pymethods]
impl Problem {
    #[new]
    #[pyo3(signature = (m, nonlinearity = "chafee_infante(lambda=5)", forcing = None))]
    fn new(m: usize, nonlinearity: &str, forcing: Option<Vec<f64>>) -> PyResult<Self> {
        let basis = make_basis(m, Domain::unit()).map_err(py_err)?;
        let term = NonlinearTerm::parse(nonlinearity).map_err(py_err)?;
        let inner = match forcing {
            Some(h) => GalerkinProblem::new(term, SpectralField::new(basis, h).map_err(py_err)?),
            None => GalerkinProblem::unforced(&basis, term),
        };
        Ok(Self { inner })
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.basis().mode_count()
    }

    #[getter]
    fn nonlinearity(&self) -> String {
        self.inner.term().spec_string()
    }

    /// Interior quadrature nodes.
    #[getter]
    fn nodes(&self) -> Vec<f64> {
        self.inner.basis().nodes().to_vec()
    }

    fn mode(&self, j: usize, amplitude: f64) -> PyResult<Vec<f64>> {
        Ok(SpectralField::mode(self.inner.basis(), j, amplitude).map_err(py_err)?.into_coeffs())
    }

    fn grid_values(&self, coeffs: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.field(coeffs)?.grid_values())
    }

    fn energy(&self, coeffs: Vec<f64>) -> PyResult<f64> {
        Ok(self.inner.energy(&self.field(coeffs)?))
    }

    fn rhs(&self, coeffs: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.inner.rhs(&self.field(coeffs)?).into_coeffs())
    }

    /// `{"l2", "h1", "sup"}` norms of a field.
    fn norms<'py>(&self, py: Python<'py>, coeffs: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
        let u = self.field(coeffs)?;
        let d = PyDict::new(py);
        d.set_item("l2", u.l2())?;
        d.set_item("h1", u.h1())?;
        d.set_item("sup", u.sup_norm())?;
        Ok(d)
    }

    #[pyo3(signature = (u0, dt = 1e-3, t_end = 1.0, stride = 1, scheme = "etd1"))]
    fn integrate(&self, py: Python<'_>, u0: Vec<f64>, dt: f64, t_end: f64, stride: usize, scheme: &str) -> PyResult<Trajectory> {
        let u0 = self.field(u0)?;
        let opts = IntegratorOptions::new(dt, t_end).with_stride(stride).with_scheme(parse_scheme(scheme)?);
        let traj = py.detach(|| self.inner.integrate(&u0, &opts)).map_err(py_err)?;
        Ok(Trajectory { problem: self.inner.clone(), inner: traj })
    }

    /// Perturbation ensemble of `size` members around `u0`.
    #[pyo3(signature = (u0, size, amplitude, seed, dt = 1e-3, t_end = 1.0, stride = 1))]
    #[allow(clippy::too_many_arguments)]
    fn integrate_ensemble(
        &self,
        py: Python<'_>,
        u0: Vec<f64>,
        size: usize,
        amplitude: f64,
        seed: u64,
        dt: f64,
        t_end: f64,
        stride: usize,
    ) -> PyResult<Vec<Trajectory>> {
        let u0 = self.field(u0)?;
        let policy = BranchPolicy::perturbation(size, amplitude, seed);
        policy.validate().map_err(py_err)?;
        let opts = IntegratorOptions::new(dt, t_end).with_stride(stride);
        let runs = py.detach(|| self.inner.integrate_ensemble(&u0, &opts, &policy)).map_err(py_err)?;
        Ok(runs.into_iter().map(|inner| Trajectory { problem: self.inner.clone(), inner }).collect())
    }

    /// All stationary solutions found by the default multi-start search.
    fn equilibria(&self, py: Python<'_>) -> PyResult<Vec<Stationary>> {
        let set = py.detach(|| find_all(&self.inner, &SearchStrategy::default())).map_err(py_err)?;
        Ok(set.members.into_iter().map(|inner| Stationary { inner }).collect())
    }

    /// Sorted spectrum of the linearization and its unstable dimension.
    fn linearize(&self, coeffs: Vec<f64>) -> PyResult<(Vec<f64>, usize)> {
        let s = linearize(&self.inner, &self.field(coeffs)?);
        Ok((s.values, s.unstable_dim))
    }

    #[pyo3(signature = (check_stable_side = true, check_eps = false))]
    fn attractor(&self, py: Python<'_>, check_stable_side: bool, check_eps: bool) -> PyResult<Graph> {
        let params = BuildParams { check_stable_side, check_eps, ..BuildParams::default() };
        let graph = py
            .detach(|| {
                let set = find_all(&self.inner, &SearchStrategy::default())?;
                build_attractor(&self.inner, &set, &params)
            })
            .map_err(py_err)?;
        Ok(Graph { problem: self.inner.clone(), inner: graph })
    }

    /// `{"alpha_tilde", "c2_tilde", "h_sup", "m"}`.
    fn linf_bound<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let b = linf_bound(&self.inner);
        let d = PyDict::new(py);
        d.set_item("alpha_tilde", b.alpha_tilde)?;
        d.set_item("c2_tilde", b.c2_tilde)?;
        d.set_item("h_sup", b.h_sup)?;
        d.set_item("m", b.m)?;
        Ok(d)
    }

    /// `‖u(t)‖² ≤ e^{−λ₁t}‖u₀‖² + R₂` over a seeded trial suite. With
    /// `r2 = None` the smallest admissible offset is fitted.
    #[pyo3(signature = (trials = 20, max_norm = 100.0, t_end = 5.0, dt = 1e-3, seed = 0, r2 = None))]
    #[allow(clippy::too_many_arguments)]
    fn certify_dissipation<'py>(
        &self,
        py: Python<'py>,
        trials: usize,
        max_norm: f64,
        t_end: f64,
        dt: f64,
        seed: u64,
        r2: Option<f64>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let cert = py
            .detach(|| {
                let starts = trial_suite(self.inner.basis(), trials, max_norm, seed);
                let runs = run_trials(&self.inner, &starts, dt, t_end, 0.01)?;
                certify_dissipation(&self.inner, &runs, r2, None)
            })
            .map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("passed", cert.passed)?;
        d.set_item("worst_slack", cert.worst_slack)?;
        d.set_item("trials", cert.trials)?;
        for (k, v) in &cert.constants {
            d.set_item(k, v)?;
        }
        Ok(d)
    }

    /// Sampled `G(t+s, u0) ⊂ G(t, G(s, u0))` for a perturbation ensemble.
    #[pyo3(signature = (u0, t, s, size = 8, amplitude = 1e-9, seed = 0, dt = 1e-3, stride = 100, tol = 1e-3))]
    #[allow(clippy::too_many_arguments)]
    fn semiflow_inclusion<'py>(
        &self,
        py: Python<'py>,
        u0: Vec<f64>,
        t: f64,
        s: f64,
        size: usize,
        amplitude: f64,
        seed: u64,
        dt: f64,
        stride: usize,
        tol: f64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let u0 = self.field(u0)?;
        let policy = if size == 1 { BranchPolicy::none() } else { BranchPolicy::perturbation(size, amplitude, seed) };
        let mut bundle = GalerkinBundle::new(self.inner.clone(), dt, policy);
        bundle.output_stride = stride;
        let rep = py.detach(|| check_semiflow_inclusion(&bundle, &u0, t, s, size, tol)).map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("passed", rep.passed)?;
        d.set_item("max_semidist", rep.max_semidist)?;
        d.set_item("direct_diameter", rep.direct_diameter)?;
        d.set_item("strictness_gap", rep.strictness_gap)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!("Problem(m={}, nonlinearity='{}')", self.m(), self.nonlinearity())
    }
}

#[pyclass(module = "attractor_lab", frozen)]
struct Trajectory {
    problem: GalerkinProblem,
    inner: TrajectorySample<SpectralField>,
}

#[pymethods]
impl Trajectory {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times().to_vec()
    }

    #[getter]
    fn states(&self) -> Vec<Vec<f64>> {
        self.inner.states().iter().map(|u| u.coeffs().to_vec()).collect()
    }

    #[getter]
    fn last(&self) -> Vec<f64> {
        self.inner.last_state().coeffs().to_vec()
    }

    /// `(t, E(u(t)), 2∫₀ᵗ‖u_t‖²)` at every sample.
    fn energy(&self) -> Vec<(f64, f64, f64)> {
        energy_series(&self.problem, &self.inner).iter().map(|r| (r.t, r.energy, r.dissipation)).collect()
    }

    /// Largest `|E(t) + 2∫₀ᵗ‖u_t‖² − E(0)|`.
    fn energy_residual(&self) -> f64 {
        energy_equality_residual(&energy_series(&self.problem, &self.inner))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyclass(module = "attractor_lab", name = "Equilibrium", frozen)]
struct Stationary {
    inner: Equilibrium,
}

#[pymethods]
impl Stationary {
    #[getter]
    fn coeffs(&self) -> Vec<f64> {
        self.inner.field.coeffs().to_vec()
    }

    #[getter]
    fn energy(&self) -> f64 {
        self.inner.energy
    }

    #[getter]
    fn residual(&self) -> f64 {
        self.inner.residual
    }

    #[getter]
    fn unstable_dim(&self) -> usize {
        self.inner.unstable_dim()
    }

    #[getter]
    fn sup_norm(&self) -> f64 {
        self.inner.sup_norm
    }

    #[getter]
    fn spectrum(&self) -> Vec<f64> {
        self.inner.spectrum.values.clone()
    }

    fn __repr__(&self) -> String {
        format!("Equilibrium(energy={:.6}, unstable_dim={}, sup={:.6})", self.inner.energy, self.unstable_dim(), self.inner.sup_norm)
    }
}

#[pyclass(module = "attractor_lab", frozen)]
struct Graph {
    problem: GalerkinProblem,
    inner: ConnectionGraph,
}

#[pymethods]
impl Graph {
    #[getter]
    fn nodes(&self) -> Vec<Stationary> {
        self.inner.nodes.members.iter().map(|e| Stationary { inner: e.clone() }).collect()
    }

    /// Distinct `(source, sink)` pairs.
    #[getter]
    fn adjacency(&self) -> Vec<(usize, usize)> {
        self.inner.adjacency()
    }

    #[getter]
    fn edge_count(&self) -> usize {
        self.inner.edges.len()
    }

    fn forward_resolved(&self) -> bool {
        self.inner.forward_resolved()
    }

    fn backward_resolved(&self) -> bool {
        self.inner.backward_resolved()
    }

    /// Strict energy descent along every edge.
    #[pyo3(signature = (tol = 1e-8))]
    fn energy_audit(&self, tol: f64) -> bool {
        energy_descent_audit(&self.problem, &self.inner, tol).passed
    }

    /// Largest grid sup-norm over the attractor sample.
    fn sample_sup(&self) -> f64 {
        self.inner.attractor_sample.iter().map(|u| u.sup_norm()).fold(0.0, f64::max)
    }

    /// Every sampled state within `M + tol` in sup-norm.
    #[pyo3(signature = (tol = 1e-2))]
    fn linf_holds(&self, tol: f64) -> bool {
        verify_linf(&linf_bound(&self.problem), &self.inner.attractor_sample, tol).passed
    }

    fn to_json(&self) -> PyResult<String> {
        attractor_lab::io::to_json(&self.inner.report()).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("Graph({} nodes, {} connections)", self.inner.nodes.len(), self.inner.adjacency().len())
    }
}

/// `(k, n_k, linearized)` rows for the remark3 family at `m` modes.
#[pyfunction]
#[pyo3(signature = (ks, m = 20))]
fn scan_dimensions(ks: Vec<u64>, m: usize) -> PyResult<Vec<(u64, usize, usize)>> {
    let basis = make_basis(m, Domain::unit()).map_err(py_err)?;
    let scan = dimension_scan(&ks, &basis).map_err(py_err)?;
    Ok(scan.rows.iter().map(|r| (r.k, r.n_k, r.linearized)).collect())
}

#[pymodule]
#[pyo3(name = "attractor_lab")]
fn py_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", attractor_lab::VERSION)?;
    m.add_class::<Problem>()?;
    m.add_class::<Trajectory>()?;
    m.add_class::<Stationary>()?;
    m.add_class::<Graph>()?;
    m.add_function(wrap_pyfunction!(scan_dimensions, m)?)?;
    Ok(())
}
