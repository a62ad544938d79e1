//! Python bindings. Models are passed as the same JSON accepted by the command line tool.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use normsol::branch::{self, BranchConfig, BranchError, MassSolution, WindowConfig};
use normsol::identities::{identity_report, Sample};
use normsol::model::{ModelError, ModelSpec, NonlinearityModel};
use normsol::variational::{self, MinimizeOptions, VariationalError};

fn model_from(json: &str) -> PyResult<NonlinearityModel> {
    let spec = ModelSpec::from_json(json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    spec.build().map_err(model_err)
}

fn model_err(e: ModelError) -> PyErr {
    match e {
        ModelError::Invalid(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn branch_err(e: BranchError) -> PyErr {
    match e {
        BranchError::InvalidInput(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn var_err(e: VariationalError) -> PyErr {
    match e {
        VariationalError::InvalidOptions(_) | VariationalError::InvalidField(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Peak amplitude m_lambda.
#[pyfunction]
fn m_lambda(model: &str, lam: f64) -> PyResult<f64> {
    let model = model_from(model)?;
    branch::m_lambda(&model, lam, &Default::default()).map_err(branch_err)
}

/// (m_lambda, rho_lambda) at one lambda.
#[pyfunction]
fn rho_lambda(model: &str, lam: f64) -> PyResult<(f64, f64)> {
    let model = model_from(model)?;
    let p = branch::rho_lambda(&model, lam, &BranchConfig::default()).map_err(branch_err)?;
    Ok((p.m_lambda, p.rho_lambda))
}

/// Every lambda in [lo, hi] with rho_lambda = rho, bracketed on an n-point log grid.
#[pyfunction]
#[pyo3(signature = (model, rho, lo=1e-3, hi=1e3, n=25))]
fn solve_mass(model: &str, rho: f64, lo: f64, hi: f64, n: usize) -> PyResult<Vec<f64>> {
    let model = model_from(model)?;
    match branch::solve_mass(&model, rho, lo, hi, n, &BranchConfig::default()).map_err(branch_err)? {
        MassSolution::Roots(roots) => Ok(roots.iter().map(|r| r.lambda).collect()),
        MassSolution::FlatCurve { .. } => Err(PyRuntimeError::new_err("rho_lambda is constant on the sampled range")),
    }
}

/// (x, u, du/dx) of the soliton profile.
#[pyfunction]
#[pyo3(signature = (model, lam, nodes=2001, x_max=20.0))]
fn profile(model: &str, lam: f64, nodes: usize, x_max: f64) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let model = model_from(model)?;
    let p = branch::reconstruct_profile(&model, lam, nodes, x_max, &BranchConfig::default()).map_err(branch_err)?;
    Ok((p.x, p.u, p.du_dx))
}

/// Existence window: list of (case, lo, hi) with infinite endpoints as float('inf').
#[pyfunction]
fn window(model: &str) -> PyResult<Vec<(String, f64, f64)>> {
    let model = model_from(model)?;
    let w = branch::existence_window(&model, &WindowConfig::default()).map_err(branch_err)?;
    Ok(w.cases.iter().zip(&w.windows).map(|(c, i)| (c.label().to_string(), i.lo.value(), i.hi.value())).collect())
}

/// Estimate of C_p^p.
#[pyfunction]
#[pyo3(signature = (p, m=1, n=1024, half_length=40.0))]
fn gn_constant(p: f64, m: u32, n: usize, half_length: f64) -> PyResult<f64> {
    let opts = variational::GnOptions { n, half_length, ..Default::default() };
    Ok(variational::gn_constant(p, m, &opts).map_err(var_err)?.c_p_pth_power)
}

/// Constrained minimizer. `regime` is "sub" (mass ball) or "super" (ball and manifold).
#[pyfunction]
#[pyo3(signature = (model, rho, m=1, regime="sub", n=1024, half_length=40.0))]
fn minimize<'py>(
    py: Python<'py>,
    model: &str,
    rho: f64,
    m: u32,
    regime: &str,
    n: usize,
    half_length: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let model = model_from(model)?;
    let opts = MinimizeOptions { n, half_length, ..MinimizeOptions::default() };
    let r = match regime {
        "sub" => variational::minimize_on_d(&model, m, rho, &opts),
        "super" => variational::minimize_on_dm(&model, m, rho, &opts),
        other => return Err(PyValueError::new_err(format!("regime must be 'sub' or 'super', got {other:?}"))),
    }
    .map_err(var_err)?;
    let d = PyDict::new(py);
    d.set_item("energy", r.energy)?;
    d.set_item("lambda", r.lambda)?;
    d.set_item("mass", r.mass)?;
    d.set_item("m_residual", r.m_residual)?;
    d.set_item("pohozaev_residual", r.pohozaev_residual)?;
    d.set_item("nehari_residual", r.nehari_residual)?;
    d.set_item("iterations", r.iterations)?;
    d.set_item("converged", r.converged)?;
    d.set_item("x", r.field.grid())?;
    d.set_item("u", r.field.values)?;
    Ok(d)
}

/// Nehari, Pohozaev and equipartition residuals of a profile sampled on a uniform grid.
#[pyfunction]
fn verify_profile<'py>(
    py: Python<'py>,
    model: &str,
    lam: f64,
    x: Vec<f64>,
    u: Vec<f64>,
    du_dx: Vec<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let model = model_from(model)?;
    if x.len() != u.len() || x.len() != du_dx.len() || x.len() < 3 {
        return Err(PyValueError::new_err("x, u and du_dx must have equal length of at least 3"));
    }
    let peak = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let p = branch::SolitonProfile { x, u, du_dx, lambda: lam, peak, half_support: normsol::extended::ExtReal::INFINITY };
    let r = identity_report(Sample::Profile(&p), &model, lam, 1).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let d = PyDict::new(py);
    d.set_item("nehari_rel", r.nehari_rel)?;
    d.set_item("pohozaev_rel", r.pohozaev_rel)?;
    d.set_item("equipartition_sup", r.equipartition_sup)?;
    d.set_item("mass_K", r.mass_k)?;
    Ok(d)
}

#[pymodule]
fn pynormsol(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(m_lambda, m)?)?;
    m.add_function(wrap_pyfunction!(rho_lambda, m)?)?;
    m.add_function(wrap_pyfunction!(solve_mass, m)?)?;
    m.add_function(wrap_pyfunction!(profile, m)?)?;
    m.add_function(wrap_pyfunction!(window, m)?)?;
    m.add_function(wrap_pyfunction!(gn_constant, m)?)?;
    m.add_function(wrap_pyfunction!(minimize, m)?)?;
    m.add_function(wrap_pyfunction!(verify_profile, m)?)?;
    Ok(())
}
