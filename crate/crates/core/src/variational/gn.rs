//! Sharp Gagliardo-Nirenberg constants `|v|_p^p <= C_p^p |v^{(m)}|_2^{p delta} |v|_2^{p (1 - delta)}`.

use serde::{Deserialize, Serialize};

use super::field::{recenter, FieldState, Spectral};
use super::VariationalError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GnOptions {
    pub n: usize,
    pub half_length: f64,
    pub max_iter: usize,
    /// Relative increase of the quotient regarded as stagnation.
    pub tol: f64,
    pub stall_iters: usize,
    pub armijo: f64,
}

impl Default for GnOptions {
    fn default() -> Self {
        GnOptions { n: 1024, half_length: 40.0, max_iter: 20_000, tol: 1e-12, stall_iters: 5, armijo: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GNEstimate {
    pub p: f64,
    pub m: u32,
    pub delta_p: f64,
    /// Best quotient found; a lower bound for `C_p^p`.
    pub c_p_pth_power: f64,
    pub maximizer: FieldState,
    pub seed_quotient: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn delta_p(p: f64, m: u32) -> f64 {
    (0.5 - 1.0 / p) / m as f64
}

/// Weinstein quotient `|v|_p^p / (|v^{(m)}|_2^{p delta} |v|_2^{p (1 - delta)})`.
pub fn gn_quotient(spectral: &Spectral, field: &FieldState, p: f64) -> f64 {
    let delta = delta_p(p, field.m);
    let n = field.integrate(|v| v.abs().powf(p));
    let d = spectral.derivative_norm_sq(&field.values, field.half_length, field.m);
    let mass = field.mass();
    n / (d.powf(0.5 * p * delta) * mass.powf(0.5 * p * (1.0 - delta)))
}

pub fn gn_constant(p: f64, m: u32, opts: &GnOptions) -> Result<GNEstimate, VariationalError> {
    if !(p > 2.0 && p.is_finite()) {
        return Err(VariationalError::InvalidOptions(format!("p must exceed 2, got {p}")));
    }
    if m == 0 {
        return Err(VariationalError::InvalidOptions("m must be positive".into()));
    }
    if opts.n < 64 || !opts.n.is_power_of_two() || !(opts.half_length > 0.0) || !(opts.tol > 0.0) {
        return Err(VariationalError::InvalidOptions("bad grid or tolerance".into()));
    }
    let delta = delta_p(p, m);
    let spectral = Spectral::new(opts.n);
    let mut v = FieldState::from_fn(opts.half_length, opts.n, m, |x| (-x * x).exp())?;
    v = v.scaled(v.mass().sqrt().recip());
    let seed_quotient = gn_quotient(&spectral, &v, p);
    let mut q = seed_quotient;
    let mut stalled = 0;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iter {
        iterations += 1;
        let l = v.half_length;
        let big_n = v.integrate(|x| x.abs().powf(p));
        let d = spectral.derivative_norm_sq(&v.values, l, m);
        let mass = v.mass();
        let lap = spectral.polyharmonic(&v.values, l, m);
        let grad: Vec<f64> = v
            .values
            .iter()
            .zip(&lap)
            .map(|(&x, y)| p * x.abs().powf(p - 2.0) * x / big_n - p * delta * y / d - p * (1.0 - delta) * x / mass)
            .collect();
        // inverse of the quadratic part of the Hessian of log Q
        let (a, b) = (p * delta / d, p * (1.0 - delta) / mass);
        let m_exp = 2 * m as i32;
        let dir = spectral.apply_symbol(&grad, l, |xi| 1.0 / (a * xi.powi(m_exp) + b));
        let slope = v.dx() * grad.iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>();

        let mut accepted = None;
        if slope > 0.0 {
            let log_q = q.ln();
            let mut alpha = 1.0;
            while alpha > 1e-14 {
                let values: Vec<f64> = v.values.iter().zip(&dir).map(|(x, g)| x + alpha * g).collect();
                let trial = FieldState { values, ..v.clone() };
                let tm = trial.mass();
                if tm > 0.0 && tm.is_finite() {
                    let trial = trial.scaled(tm.sqrt().recip());
                    let tq = gn_quotient(&spectral, &trial, p);
                    if tq.is_finite() && tq.ln() >= log_q + opts.armijo * alpha * slope {
                        accepted = Some((trial, tq));
                        break;
                    }
                }
                alpha *= 0.5;
            }
        }
        let gain = match accepted {
            Some((trial, tq)) => {
                let g = (tq - q) / q;
                v = trial;
                q = tq;
                g
            }
            None => 0.0,
        };
        stalled = if gain < opts.tol { stalled + 1 } else { 0 };
        if stalled >= opts.stall_iters {
            converged = true;
            break;
        }
    }

    let estimate = GNEstimate {
        p,
        m,
        delta_p: delta,
        c_p_pth_power: q,
        maximizer: recenter(&spectral, &v),
        seed_quotient,
        iterations,
        converged: converged && v.decays(),
    };
    if estimate.converged {
        Ok(estimate)
    } else {
        Err(VariationalError::GnNotConverged(Box::new(estimate)))
    }
}
