use serde::{Deserialize, Serialize};

use super::fiber::{energy_j, m_residual, moments, project_to_m};
use super::field::{recenter, FieldState, Spectral};
use super::gn::{gn_constant, GnOptions};
use super::VariationalError;
use crate::extended::ExtReal;
use crate::identities::{nehari_residual, pohozaev_residual, Sample};
use crate::model::{ConditionReport, NonlinearityModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimizeOptions {
    pub n: usize,
    pub half_length: f64,
    pub max_iter: usize,
    /// Relative energy decrease regarded as stagnation.
    pub energy_tol: f64,
    /// Consecutive stagnating iterations needed to stop.
    pub stall_iters: usize,
    /// Bound on the manifold defect and on `|mass - rho|` for a converged run.
    pub residual_tol: f64,
    /// Relative Euler-Lagrange residual that stops the iteration early.
    pub stationarity_tol: f64,
    pub armijo: f64,
    pub max_enlargements: usize,
    /// `C_{2+4m}^{2+4m}`; estimated with [`gn_constant`] when needed and not given.
    pub gn_c: Option<f64>,
    pub check_conditions: bool,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            n: 1024,
            half_length: 40.0,
            max_iter: 100_000,
            energy_tol: 1e-10,
            stall_iters: 5,
            residual_tol: 1e-6,
            stationarity_tol: 1e-9,
            armijo: 1e-4,
            max_enlargements: 3,
            gn_c: None,
            check_conditions: true,
        }
    }
}

impl MinimizeOptions {
    fn validate(&self) -> Result<(), VariationalError> {
        let bad = |msg: &str| Err(VariationalError::InvalidOptions(msg.to_string()));
        if self.n < 64 || !self.n.is_power_of_two() {
            return bad("n must be a power of two >= 64");
        }
        if !(self.half_length > 0.0) {
            return bad("half_length must be positive");
        }
        if !(self.energy_tol > 0.0 && self.residual_tol > 0.0 && self.stationarity_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) {
            return bad("armijo factor must lie in (0, 1)");
        }
        if self.stall_iters == 0 {
            return bad("stall_iters must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizationReport {
    pub field: FieldState,
    pub energy: f64,
    pub lambda: f64,
    pub mass: f64,
    pub rho: f64,
    pub m_residual: f64,
    pub pohozaev_residual: f64,
    pub nehari_residual: f64,
    /// `|(-d^2)^m u + lambda u - F'(u)|_2 / |F'(u)|_2`.
    pub stationarity_residual: f64,
    pub iterations: usize,
    pub enlargements: usize,
    pub converged: bool,
    pub notes: Vec<String>,
    /// `J` after each accepted step, one segment per box size; each segment starts with
    /// the energy of the admitted seed or of the enlarged field.
    pub energy_history: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Constraint {
    /// `{ |u|_2^2 <= rho }`
    Ball,
    /// `{ |u|_2^2 <= rho } intersected with the Nehari-Pohozaev manifold`
    BallAndManifold,
}

fn conditions(
    model: &NonlinearityModel,
    m: u32,
    rho: f64,
    opts: &MinimizeOptions,
    uses: impl Fn(&ConditionReport) -> ExtReal,
) -> Result<ConditionReport, VariationalError> {
    let provisional = model.check_structural_conditions(m, rho, opts.gn_c.unwrap_or(1.0));
    let v = uses(&provisional).value();
    if opts.gn_c.is_some() || !(v.is_finite() && v > 0.0) {
        return Ok(provisional);
    }
    let p = 2.0 + 4.0 * m as f64;
    let estimate = gn_constant(p, m, &GnOptions::default())?;
    Ok(model.check_structural_conditions(m, rho, estimate.c_p_pth_power))
}

/// Minimizes `J` over `{ |u|_2^2 <= rho }` intersected with the manifold (supercritical growth).
pub fn minimize_on_dm(
    model: &NonlinearityModel,
    m: u32,
    rho: f64,
    opts: &MinimizeOptions,
) -> Result<MinimizationReport, VariationalError> {
    check_inputs(m, rho, opts)?;
    if opts.check_conditions {
        let report = conditions(model, m, rho, opts, |r| r.eta)?;
        let failures = report.supercritical_failures();
        if !failures.is_empty() {
            return Err(VariationalError::PreconditionFailed(failures.iter().map(|s| s.to_string()).collect()));
        }
    }
    descend(model, m, rho, opts, Constraint::BallAndManifold)
}

/// Minimizes `J` over `{ |u|_2^2 <= rho }` (subcritical growth).
pub fn minimize_on_d(
    model: &NonlinearityModel,
    m: u32,
    rho: f64,
    opts: &MinimizeOptions,
) -> Result<MinimizationReport, VariationalError> {
    check_inputs(m, rho, opts)?;
    if opts.check_conditions {
        let report = conditions(model, m, rho, opts, |r| r.sigma)?;
        let failures = report.subcritical_failures();
        if !failures.is_empty() {
            return Err(VariationalError::PreconditionFailed(failures.iter().map(|s| s.to_string()).collect()));
        }
    }
    descend(model, m, rho, opts, Constraint::Ball)
}

fn check_inputs(m: u32, rho: f64, opts: &MinimizeOptions) -> Result<(), VariationalError> {
    opts.validate()?;
    if m == 0 {
        return Err(VariationalError::InvalidOptions("m must be positive".into()));
    }
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(VariationalError::InvalidOptions(format!("rho must be positive, got {rho}")));
    }
    Ok(())
}

/// Gaussian `exp(-x^2)` scaled to mass `rho`.
pub fn gaussian_seed(n: usize, half_length: f64, m: u32, rho: f64) -> Result<FieldState, VariationalError> {
    let g = FieldState::from_fn(half_length, n, m, |x| (-x * x).exp())?;
    let mass = g.mass();
    Ok(g.scaled((rho / mass).sqrt()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Iterate {
    field: FieldState,
    energy: f64,
}

fn admit(
    spectral: &Spectral,
    mut field: FieldState,
    model: &NonlinearityModel,
    rho: f64,
    constraint: Constraint,
) -> Result<Iterate, VariationalError> {
    let mass = field.mass();
    if mass > rho {
        field = field.scaled((rho / mass).sqrt());
    }
    if constraint == Constraint::BallAndManifold {
        field = project_to_m(spectral, &field, model)?.field;
    }
    let energy = energy_j(spectral, &field, model);
    Ok(Iterate { field, energy })
}

/// Nehari multiplier `(int F'(u) u - D) / |u|_2^2` and the relative Euler-Lagrange residual.
fn multiplier(spectral: &Spectral, field: &FieldState, model: &NonlinearityModel) -> (f64, f64) {
    let mo = moments(spectral, field, model);
    let lambda = (mo.fpu_int - mo.d) / mo.mass;
    let lap = spectral.polyharmonic(&field.values, field.half_length, field.m);
    let (mut num, mut den) = (0.0, 0.0);
    for (u, l) in field.values.iter().zip(&lap) {
        let fp = model.f_prime(*u);
        num += (l + lambda * u - fp).powi(2);
        den += fp * fp;
    }
    (lambda, (num / den).sqrt())
}

fn descend(
    model: &NonlinearityModel,
    m: u32,
    rho: f64,
    opts: &MinimizeOptions,
    constraint: Constraint,
) -> Result<MinimizationReport, VariationalError> {
    let mut spectral = Spectral::new(opts.n);
    let seed = gaussian_seed(opts.n, opts.half_length, m, rho)?;
    let mut it = admit(&spectral, seed, model, rho, constraint)?;
    let mut notes = Vec::new();
    let mut enlargements = 0;
    let mut stalled = 0;
    let mut iterations = 0;
    let mut converged = false;
    let mut history = vec![vec![it.energy]];

    while iterations < opts.max_iter {
        iterations += 1;
        let u = &it.field;
        let m_exp = 2 * m as i32;
        let mo = moments(&spectral, u, model);
        let lap = spectral.polyharmonic(&u.values, u.half_length, m);
        let grad: Vec<f64> = u.values.iter().zip(&lap).map(|(&v, l)| l - model.f_prime(v)).collect();
        let nehari_lambda = (mo.fpu_int - mo.d) / mo.mass;
        let shift = if nehari_lambda > 0.0 { nehari_lambda } else { (mo.d / mo.mass).max(1e-12) };
        let precond = |xi: f64| 1.0 / (shift + xi.powi(m_exp));
        let pg = spectral.apply_symbol(&grad, u.half_length, precond);
        let on_sphere = mo.mass >= rho * (1.0 - 1e-12);
        let dir: Vec<f64> = if on_sphere {
            let pu = spectral.apply_symbol(&u.values, u.half_length, precond);
            let mu = dot(&pg, &u.values) / dot(&pu, &u.values);
            pg.iter().zip(&pu).map(|(g, p)| g - mu * p).collect()
        } else {
            pg
        };
        let slope = u.dx() * dot(&grad, &dir);

        let mut accepted = None;
        if slope > 0.0 {
            let mut alpha = 1.0;
            while alpha > 1e-14 {
                let values = u.values.iter().zip(&dir).map(|(v, d)| v - alpha * d).collect();
                let trial = FieldState { values, ..u.clone() };
                if let Ok(next) = admit(&spectral, trial, model, rho, constraint) {
                    if next.energy <= it.energy - opts.armijo * alpha * slope {
                        accepted = Some(next);
                        break;
                    }
                }
                alpha *= 0.5;
            }
        }

        let decrease = match accepted {
            Some(next) => {
                let d = (it.energy - next.energy) / next.energy.abs().max(1e-300);
                history.last_mut().expect("segment").push(next.energy);
                it = next;
                d
            }
            None => 0.0,
        };
        stalled = if decrease < opts.energy_tol { stalled + 1 } else { 0 };

        if !it.field.decays() {
            if enlargements >= opts.max_enlargements {
                notes.push("decay guard still tripped after the maximum number of box enlargements".into());
                break;
            }
            enlargements += 1;
            let padded = it.field.zero_padded();
            spectral = Spectral::for_field(&padded);
            it = admit(&spectral, padded, model, rho, constraint)?;
            history.push(vec![it.energy]);
            stalled = 0;
            continue;
        }

        let (_, stationarity) = multiplier(&spectral, &it.field, model);
        let on_manifold = m_residual(&spectral, &it.field, model) < opts.residual_tol;
        if (stalled >= opts.stall_iters && on_manifold) || stationarity <= opts.stationarity_tol {
            converged = true;
            break;
        }
    }
    if !converged && iterations >= opts.max_iter {
        notes.push(format!("iteration limit {} reached", opts.max_iter));
    }

    // the mass constraint is active at the minimizer: normalize to exactly rho
    let mut field = it.field.scaled((rho / it.field.mass()).sqrt());
    if constraint == Constraint::BallAndManifold {
        field = project_to_m(&spectral, &field, model)?.field;
    }
    let field = recenter(&spectral, &field);
    let mut outcome = finish(&spectral, field, model, rho, constraint, opts, iterations, enlargements, converged, notes);
    match &mut outcome {
        Ok(r) => r.energy_history = history,
        Err(VariationalError::NotConverged(r)) => r.energy_history = history,
        Err(_) => {}
    }
    outcome
}

#[allow(clippy::too_many_arguments)]
fn finish(
    spectral: &Spectral,
    field: FieldState,
    model: &NonlinearityModel,
    rho: f64,
    constraint: Constraint,
    opts: &MinimizeOptions,
    iterations: usize,
    enlargements: usize,
    mut converged: bool,
    mut notes: Vec<String>,
) -> Result<MinimizationReport, VariationalError> {
    let energy = energy_j(spectral, &field, model);
    let (lambda, stationarity) = multiplier(spectral, &field, model);
    let mass = field.mass();
    let m_res = m_residual(spectral, &field, model);
    let m = field.m;
    let sample = Sample::Field(&field);
    let nehari = nehari_residual(sample, model, lambda, m)?;
    let pohozaev = pohozaev_residual(sample, model, lambda, m)?;

    if (mass - rho).abs() > opts.residual_tol {
        converged = false;
        notes.push(format!("final mass {mass} misses rho = {rho}"));
    }
    if constraint == Constraint::BallAndManifold && m_res > opts.residual_tol {
        converged = false;
        notes.push(format!("manifold defect {m_res:e} above tolerance"));
    }
    if converged {
        let sign_ok = match constraint {
            Constraint::BallAndManifold => energy > 0.0 && lambda > 0.0,
            Constraint::Ball => energy < 0.0 && lambda > 0.0,
        };
        if !sign_ok {
            converged = false;
            notes.push(format!("unexpected signs at the limit: J = {energy}, lambda = {lambda}"));
        }
    }
    let report = MinimizationReport {
        field,
        energy,
        lambda,
        mass,
        rho,
        m_residual: m_res,
        pohozaev_residual: pohozaev,
        nehari_residual: nehari,
        stationarity_residual: stationarity,
        iterations,
        enlargements,
        converged,
        notes,
        energy_history: Vec::new(),
    };
    if report.converged {
        Ok(report)
    } else {
        Err(VariationalError::NotConverged(Box::new(report)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::catalog::*;

    #[test]
    fn cubic_on_d_small_mass() {
        let opts = MinimizeOptions { n: 512, half_length: 80.0, ..MinimizeOptions::default() };
        let r = minimize_on_d(&cubic(), 1, 1.0, &opts).unwrap();
        let lambda = 1.0 / 16.0;
        assert!((r.lambda - lambda).abs() < 1e-5, "{}", r.lambda);
        assert!((r.energy + 2.0 / 3.0 * lambda.powf(1.5)).abs() < 1e-5, "{}", r.energy);
    }

    #[test]
    fn cubic_rejected_on_dm() {
        let r = minimize_on_dm(&cubic(), 1, 4.0, &MinimizeOptions::default());
        match r {
            Err(VariationalError::PreconditionFailed(f)) => assert!(f.contains(&"F2".to_string()), "{f:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn options_are_validated() {
        let opts = MinimizeOptions { n: 100, ..MinimizeOptions::default() };
        assert!(matches!(minimize_on_d(&cubic(), 1, 1.0, &opts), Err(VariationalError::InvalidOptions(_))));
        assert!(minimize_on_d(&cubic(), 1, -1.0, &MinimizeOptions::default()).is_err());
    }
}
