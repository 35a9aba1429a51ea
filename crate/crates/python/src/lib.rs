//! Python bindings for `kfield`.

use std::collections::{BTreeMap, HashMap};

use kfield::calculus::{build_chi, build_lambda, chi_from_derivations, forms_equal, lambda_from_derivations};
use kfield::equations::{
    derive_el, derive_hdw, derive_implicit_el, derive_nh_hdw, derive_nh_implicit_el, ConstraintSet, PdeSystem,
};
use kfield::mechanics::{
    generalized_energy, hamiltonian_from_lagrangian, legendre_map, velocity_hessian, EnergyFlavor, Regularity,
};
use kfield::oracle::fd_derivative_check;
use kfield::problem::ProblemFile;
use kfield::solvers::{solve_cosserat, solve_navier, SolveReport};
use kfield::symexpr::{self, Assignment, Sym, VarRef};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(pykfield, KfieldError, PyException);

fn err(e: kfield::Error) -> PyErr {
    KfieldError::new_err(e.to_string())
}

fn var_of(name: &str, n: usize, k: usize) -> PyResult<VarRef> {
    match symexpr::parse_with(name, n, k).map_err(err)? {
        symexpr::Expr::Sym(Sym::Var(v)) => Ok(v),
        _ => Err(KfieldError::new_err(format!("`{name}` is not a chart variable"))),
    }
}

fn assignment(values: &HashMap<String, f64>, n: usize, k: usize) -> PyResult<Assignment> {
    let mut a = Assignment::new();
    for (name, value) in values {
        match symexpr::parse_with(name, n, k) {
            Ok(symexpr::Expr::Sym(Sym::Var(v))) => a.set_var(v, *value),
            _ => a.set_param(name, *value),
        };
    }
    Ok(a)
}

/// Symbolic expression over chart variables `q[i]`, `v[i,a]`, `p[a,i]`, `x[a]` and parameters.
#[pyclass(name = "Expr", module = "pykfield", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyExpr {
    inner: symexpr::Expr,
    n: usize,
    k: usize,
}

#[pymethods]
impl PyExpr {
    #[new]
    #[pyo3(signature = (text, n=3, k=3))]
    fn new(text: &str, n: usize, k: usize) -> PyResult<Self> {
        Ok(PyExpr { inner: symexpr::parse_with(text, n, k).map_err(err)?, n, k })
    }

    fn diff(&self, var: &str) -> PyResult<Self> {
        let v = var_of(var, self.n, self.k)?;
        Ok(PyExpr { inner: symexpr::differentiate(&self.inner, v).simplify(), n: self.n, k: self.k })
    }

    /// Numerical value with `values` mapping variable and parameter names to floats.
    fn evaluate(&self, values: HashMap<String, f64>) -> PyResult<f64> {
        symexpr::evaluate(&self.inner, &assignment(&values, self.n, self.k)?).map_err(err)
    }

    fn equivalent(&self, other: &PyExpr) -> PyResult<bool> {
        Ok(symexpr::equivalent(&self.inner, &other.inner).map_err(err)?.equal)
    }

    fn is_polynomial(&self) -> bool {
        self.inner.is_polynomial()
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Expr('{}')", self.inner)
    }
}

/// First-order Lagrangian field theory with `n` fields over `k` parameters.
#[pyclass(name = "Lagrangian", module = "pykfield", frozen)]
struct PyLagrangian {
    inner: kfield::mechanics::LagrangianProblem,
}

fn system_of(p: &kfield::mechanics::LagrangianProblem, system: &str) -> PyResult<PdeSystem> {
    match system {
        "el" => Ok(derive_el(p)),
        "implicit-el" => Ok(derive_implicit_el(p)),
        "nh-el" => {
            let mut q = p.clone();
            if q.constraints.is_none() {
                q.constraints = Some(ConstraintSet::empty());
            }
            derive_nh_implicit_el(&q).map_err(err)
        }
        "hdw" => derive_hdw(&hamiltonian_from_lagrangian(p).map_err(err)?, p.n, p.k).map_err(err),
        "nh-hdw" => derive_nh_hdw(p).map_err(err),
        other => Err(KfieldError::new_err(format!("unknown system `{other}`"))),
    }
}

#[pymethods]
impl PyLagrangian {
    /// `constraints` is a list of `(phi, [eta_1, ..., eta_k])` string pairs.
    #[new]
    #[pyo3(signature = (n, k, lagrangian, params=None, body_force=None, constraints=None))]
    fn new(
        n: usize,
        k: usize,
        lagrangian: &str,
        params: Option<HashMap<String, f64>>,
        body_force: Option<Vec<String>>,
        constraints: Option<Vec<(String, Vec<String>)>>,
    ) -> PyResult<Self> {
        let mut p = kfield::mechanics::LagrangianProblem::parse(n, k, lagrangian).map_err(err)?;
        for (name, v) in params.unwrap_or_default() {
            p = p.with_param(&name, v);
        }
        if let Some(force) = body_force {
            let exprs = force.iter().map(|t| symexpr::parse_with(t, n, k)).collect::<kfield::Result<Vec<_>>>();
            p = p.with_body_force(exprs.map_err(err)?).map_err(err)?;
        }
        if let Some(items) = constraints {
            p = p.with_constraints(ConstraintSet::parse(n, k, &items).map_err(err)?).map_err(err)?;
        }
        Ok(PyLagrangian { inner: p })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k
    }

    /// Text rendering of `el`, `implicit-el`, `nh-el`, `hdw` or `nh-hdw`.
    fn derive(&self, system: &str) -> PyResult<String> {
        Ok(system_of(&self.inner, system)?.to_text())
    }

    /// JSON tree rendering of a derived system.
    fn derive_tree(&self, system: &str) -> PyResult<String> {
        Ok(system_of(&self.inner, system)?.to_tree().to_string())
    }

    /// Momenta `p[a,i] = ∂L/∂v[i,a]` as `(name, expression)` pairs.
    fn legendre(&self) -> Vec<(String, String)> {
        legendre_map(&self.inner).entries().into_iter().map(|(v, e)| (v.to_string(), e.to_string())).collect()
    }

    fn hessian_determinant(&self) -> PyResult<String> {
        Ok(velocity_hessian(&self.inner, None).map_err(err)?.determinant_text())
    }

    /// Numeric regularity at a point given by variable and parameter values.
    fn is_regular(&self, at: HashMap<String, f64>) -> PyResult<bool> {
        let a = assignment(&at, self.inner.n, self.inner.k)?;
        let rep = velocity_hessian(&self.inner, Some(&a)).map_err(err)?;
        Ok(rep.verdict == Some(Regularity::Regular))
    }

    #[pyo3(signature = (flavor="pontryagin"))]
    fn energy(&self, flavor: &str) -> PyResult<String> {
        let f = match flavor {
            "pontryagin" => EnergyFlavor::Pontryagin,
            "lagrangian" => EnergyFlavor::Lagrangian,
            other => return Err(KfieldError::new_err(format!("unknown energy flavor `{other}`"))),
        };
        Ok(generalized_energy(&self.inner, f).to_string())
    }

    fn hamiltonian(&self) -> PyResult<String> {
        Ok(hamiltonian_from_lagrangian(&self.inner).map_err(err)?.to_string())
    }

    /// Largest relative error of finite differences against symbolic partials.
    #[pyo3(signature = (points=20, seed=0))]
    fn fd_check(&self, points: usize, seed: u64) -> PyResult<f64> {
        let l = self.inner.full_lagrangian();
        let params = self.inner.param_assignment();
        let mut worst = 0.0f64;
        for (i, v) in self.inner.tangent_chart().coords().into_iter().enumerate() {
            worst = worst.max(fd_derivative_check(&l, v, points, seed.wrapping_add(i as u64), &params).map_err(err)?);
        }
        Ok(worst)
    }
}

fn report_dict<'py>(py: Python<'py>, rep: &SolveReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("iterations", rep.iterations)?;
    d.set_item("linear_residual", rep.linear_residual)?;
    d.set_item("constraint_violation", rep.constraint_violation.clone())?;
    let metrics: BTreeMap<String, f64> = rep.metrics.clone();
    d.set_item("metrics", metrics)?;
    let grid = &rep.field.grid;
    let coords: Vec<Vec<f64>> = (0..grid.len()).map(|node| grid.position(node)).collect();
    let names: Vec<String> = rep.field.chart.coords().iter().map(|v| v.to_string()).collect();
    let values: Vec<Vec<f64>> = (0..grid.len()).map(|node| rep.field.node_values(node).to_vec()).collect();
    d.set_item("sizes", grid.sizes.clone())?;
    d.set_item("coordinates", coords)?;
    d.set_item("components", names)?;
    d.set_item("values", values)?;
    Ok(d)
}

/// A parsed problem file.
#[pyclass(name = "ProblemFile", module = "pykfield", frozen)]
struct PyProblemFile {
    inner: ProblemFile,
}

#[pymethods]
impl PyProblemFile {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(PyProblemFile { inner: ProblemFile::parse(text).map_err(err)? })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyProblemFile { inner: ProblemFile::load(std::path::Path::new(path)).map_err(err)? })
    }

    fn lagrangian(&self) -> PyResult<PyLagrangian> {
        Ok(PyLagrangian { inner: self.inner.lagrangian_problem().map_err(err)? })
    }

    /// Solves the Dirichlet problem on `[grid]`; with `mms` against the manufactured solution.
    #[pyo3(signature = (mms=false, rtol=1e-10))]
    fn solve_navier<'py>(&self, py: Python<'py>, mms: bool, rtol: f64) -> PyResult<Bound<'py, PyDict>> {
        let mut ep = self.inner.elliptic_problem(mms).map_err(err)?;
        ep.rtol = rtol;
        let rep = py.detach(|| solve_navier(&ep)).map_err(err)?;
        report_dict(py, &rep)
    }

    /// Runs the rod simulation of `[cosserat]`.
    fn solve_cosserat<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let cp = self.inner.cosserat_problem().map_err(err)?;
        let run = py.detach(|| solve_cosserat(&cp)).map_err(err)?;
        let d = report_dict(py, &run.report)?;
        d.set_item("torsion_energy", run.torsion_energy)?;
        Ok(d)
    }
}

/// Checks `Σ d_T Θ = λ` and `Σ i_T Ω = χ` coefficientwise.
#[pyfunction]
fn construction_identity(n: usize, k: usize) -> PyResult<bool> {
    let lam = forms_equal(&lambda_from_derivations(n, k).map_err(err)?, &build_lambda(n, k).map_err(err)?);
    let chi = forms_equal(&chi_from_derivations(n, k).map_err(err)?, &build_chi(n, k).map_err(err)?);
    Ok(lam.map_err(err)? && chi.map_err(err)?)
}

/// Runs the command-line front end; returns `(exit_code, stdout, stderr)`.
#[pyfunction]
fn run_cli(argv: Vec<String>) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut errs = Vec::new();
    let args = std::iter::once("kfield".to_string()).chain(argv);
    let code = kfield::cli::run(args, &mut out, &mut errs);
    (code, String::from_utf8_lossy(&out).into_owned(), String::from_utf8_lossy(&errs).into_owned())
}

#[pyfunction]
fn set_threads(count: usize) -> PyResult<()> {
    if count == 0 {
        return Err(KfieldError::new_err("thread count must be at least 1"));
    }
    kfield::parallel::set_threads(count);
    Ok(())
}

#[pymodule]
fn pykfield(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("KfieldError", m.py().get_type::<KfieldError>())?;
    m.add_class::<PyExpr>()?;
    m.add_class::<PyLagrangian>()?;
    m.add_class::<PyProblemFile>()?;
    m.add_function(wrap_pyfunction!(construction_identity, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    m.add_function(wrap_pyfunction!(set_threads, m)?)?;
    Ok(())
}
