//! Global branch of homoclinic solutions for `m = 1`.
//!
//! For each `lambda > 0` the even solution of `-u'' + lambda G'(u) = F'(u)` peaks at the
//! first zero `m_lambda` of `W_lambda = lambda G - F` above `m0`, and its constrained mass
//! is `rho_lambda = sqrt2 int_0^{m_lambda} K / sqrt(W_lambda)`.

mod profile;
mod window;

pub use profile::{reconstruct_profile, SolitonProfile};
pub use window::{existence_window, ExistenceWindow, Interval, WindowCase, WindowConfig, WindowInputs};

use std::f64::consts::SQRT_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelError, NonlinearityModel};
use crate::quadrature::{
    bisect_root, find_first_root_above, integrate_to_simple_zero, QuadConfig, QuadError, RootConfig, SimpleZero,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BranchError {
    #[error("W_lambda has a degenerate zero at {zero} for lambda = {lambda} (slope {slope:e})")]
    DegenerateZero { lambda: f64, zero: f64, slope: f64 },
    #[error("every sampled lambda gave a degenerate zero")]
    AllPointsDegenerate { lambdas: Vec<f64> },
    #[error("no lambda in range gives mass {rho}: sampled masses lie in [{sampled_min}, {sampled_max}]")]
    NoSolutionInRange { rho: f64, sampled_min: f64, sampled_max: f64 },
    #[error("time map is not strictly decreasing near u = {u}")]
    InversionFailure { u: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Quad(#[from] QuadError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchConfig {
    pub quad: QuadConfig,
    pub root: RootConfig,
    /// Mass tolerance for [`solve_mass`]: spread below this counts as a flat curve.
    pub mass_tol: f64,
}

impl Default for BranchConfig {
    fn default() -> Self {
        BranchConfig { quad: QuadConfig::default(), root: RootConfig::default(), mass_tol: 1e-7 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub lambda: f64,
    pub m_lambda: f64,
    pub rho_lambda: f64,
    pub quad_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegeneratePoint {
    pub lambda: f64,
    pub zero: f64,
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchCurve {
    pub model: String,
    pub points: Vec<BranchPoint>,
    pub degenerate: Vec<DegeneratePoint>,
    pub monotone_m_flag: bool,
}

const DEGENERACY_TOL: f64 = 1e-8;

fn check_lambda(lambda: f64) -> Result<(), BranchError> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(BranchError::InvalidInput(format!("lambda must be positive and finite, got {lambda}")))
    }
}

/// Peak amplitude: the first zero of `W_lambda` above `m0`, required to be non-degenerate
/// relative to the size of the two terms of `W'_lambda = lambda G' - F'`.
pub fn m_lambda(model: &NonlinearityModel, lambda: f64, cfg: &RootConfig) -> Result<f64, BranchError> {
    check_lambda(lambda)?;
    let m0 = model.m_zero()?;
    let zero = find_first_root_above(|s| model.w_lambda(lambda, s), m0, cfg)?;
    let slope = model.w_lambda_prime(lambda, zero);
    let scale = (lambda * model.g_prime(zero)).abs().max(model.f_prime(zero).abs());
    if slope.abs() <= DEGENERACY_TOL * scale {
        return Err(BranchError::DegenerateZero { lambda, zero, slope });
    }
    Ok(zero)
}

pub fn rho_lambda(model: &NonlinearityModel, lambda: f64, cfg: &BranchConfig) -> Result<BranchPoint, BranchError> {
    let m = m_lambda(model, lambda, &cfg.root)?;
    let zero = SimpleZero::from_derivative(m, |s| model.w_lambda_prime(lambda, s));
    let r = integrate_to_simple_zero(|u| model.k(u), |u| model.w_lambda(lambda, u), &zero, &cfg.quad)?;
    Ok(BranchPoint { lambda, m_lambda: m, rho_lambda: SQRT_2 * r.value, quad_error: SQRT_2 * r.error })
}

/// `n` points spaced evenly in `log lambda`, endpoints included exactly.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut v: Vec<f64> = (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect();
    v[0] = lo;
    v[n - 1] = hi;
    v
}

fn check_range(lo: f64, hi: f64, n: usize) -> Result<(), BranchError> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(BranchError::InvalidInput(format!("need 0 < lambda_lo < lambda_hi, got [{lo}, {hi}]")));
    }
    if n < 2 {
        return Err(BranchError::InvalidInput(format!("need at least 2 samples, got {n}")));
    }
    Ok(())
}

/// Samples the branch at `n` log-spaced `lambda`. Degenerate samples are skipped and
/// listed in [`BranchCurve::degenerate`]; other failures abort.
pub fn trace_branch(
    model: &NonlinearityModel,
    lambda_lo: f64,
    lambda_hi: f64,
    n: usize,
    cfg: &BranchConfig,
) -> Result<BranchCurve, BranchError> {
    check_range(lambda_lo, lambda_hi, n)?;
    let lambdas = log_space(lambda_lo, lambda_hi, n);
    let results: Vec<Result<BranchPoint, BranchError>> =
        lambdas.par_iter().map(|&l| rho_lambda(model, l, cfg)).collect();
    let mut points = Vec::with_capacity(n);
    let mut degenerate = Vec::new();
    for r in results {
        match r {
            Ok(p) => points.push(p),
            Err(BranchError::DegenerateZero { lambda, zero, slope }) => {
                degenerate.push(DegeneratePoint { lambda, zero, slope })
            }
            Err(e) => return Err(e),
        }
    }
    if points.is_empty() {
        return Err(BranchError::AllPointsDegenerate { lambdas });
    }
    let monotone_m_flag = points.windows(2).all(|w| w[1].m_lambda > w[0].m_lambda);
    Ok(BranchCurve { model: model.name().to_string(), points, degenerate, monotone_m_flag })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassRoot {
    pub lambda: f64,
    pub rho_lambda: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassSolution {
    Roots(Vec<MassRoot>),
    /// The sampled curve is constant and equal to the requested mass, so every `lambda`
    /// in range is a solution.
    FlatCurve { rho_min: f64, rho_max: f64 },
}

/// All `lambda` in `[lambda_lo, lambda_hi]` with `rho_lambda = rho` that are bracketed
/// by adjacent samples of an `n`-point log-spaced grid.
pub fn solve_mass(
    model: &NonlinearityModel,
    rho: f64,
    lambda_lo: f64,
    lambda_hi: f64,
    n: usize,
    cfg: &BranchConfig,
) -> Result<MassSolution, BranchError> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(BranchError::InvalidInput(format!("rho must be positive, got {rho}")));
    }
    let curve = trace_branch(model, lambda_lo, lambda_hi, n, cfg)?;
    let pts = &curve.points;
    let (rho_max, rho_min) = pts
        .iter()
        .fold((f64::NEG_INFINITY, f64::INFINITY), |(hi, lo), p| (hi.max(p.rho_lambda), lo.min(p.rho_lambda)));
    if rho_max - rho_min < cfg.mass_tol && pts.iter().all(|p| (p.rho_lambda - rho).abs() < cfg.mass_tol) {
        return Ok(MassSolution::FlatCurve { rho_min, rho_max });
    }

    let mut roots = Vec::new();
    for (i, p) in pts.iter().enumerate() {
        let d = p.rho_lambda - rho;
        if d == 0.0 {
            roots.push(MassRoot { lambda: p.lambda, rho_lambda: p.rho_lambda, residual: 0.0 });
            continue;
        }
        let Some(next) = pts.get(i + 1) else { continue };
        let dn = next.rho_lambda - rho;
        if d * dn >= 0.0 {
            continue;
        }
        let mut failure = None;
        let residual = |log_l: f64| match rho_lambda(model, log_l.exp(), cfg) {
            Ok(bp) => bp.rho_lambda - rho,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        };
        let root_cfg = RootConfig { x_tol: 1e-13, ..cfg.root };
        let log_l = bisect_root(residual, p.lambda.ln(), next.lambda.ln(), &root_cfg)?;
        if let Some(e) = failure {
            return Err(e);
        }
        let bp = rho_lambda(model, log_l.exp(), cfg)?;
        roots.push(MassRoot { lambda: bp.lambda, rho_lambda: bp.rho_lambda, residual: (bp.rho_lambda - rho).abs() });
    }
    if roots.is_empty() {
        return Err(BranchError::NoSolutionInRange { rho, sampled_min: rho_min, sampled_max: rho_max });
    }
    Ok(MassSolution::Roots(roots))
}
