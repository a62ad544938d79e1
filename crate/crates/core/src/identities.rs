//! Nehari, Pohozaev and equipartition residuals of a candidate solution `(lambda, u)`.
//!
//! With general `G` the identities read (derived by testing the equation against `u` and
//! `x u'` respectively):
//!
//! * Nehari: `|u^{(m)}|_2^2 + lambda int G'(u) u = int F'(u) u`
//! * Pohozaev: `(1 - 2m) |u^{(m)}|_2^2 + 2 lambda int G(u) = 2 int F(u)`
//!
//! Residuals are relative: `|lhs - rhs| / max(|lhs|, |rhs|)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::branch::SolitonProfile;
use crate::model::NonlinearityModel;
use crate::variational::{FieldState, Spectral};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IdentityError {
    #[error("not applicable: {0}")]
    NotApplicable(&'static str),
    #[error("the sampled function vanishes identically")]
    ZeroField,
}

/// A solution candidate: a reconstructed `m = 1` profile (uniform grid, trapezoid rule,
/// derivatives from the stored `u'`) or a periodic field (spectral derivatives).
#[derive(Debug, Clone, Copy)]
pub enum Sample<'a> {
    Profile(&'a SolitonProfile),
    Field(&'a FieldState),
}

impl Sample<'_> {
    fn values(&self) -> &[f64] {
        match self {
            Sample::Profile(p) => &p.u,
            Sample::Field(f) => &f.values,
        }
    }

    /// `int g(u(x)) dx` on the sample's grid.
    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> f64 {
        match self {
            Sample::Profile(p) => trapezoid(p.spacing(), p.u.iter().map(|&u| g(u))),
            Sample::Field(f) => f.integrate(g),
        }
    }

    /// `|u^{(m)}|_2^2`.
    pub fn derivative_norm_sq(&self, m: u32) -> Result<f64, IdentityError> {
        match self {
            Sample::Profile(p) => {
                if m != 1 {
                    return Err(IdentityError::NotApplicable("profiles carry first derivatives only"));
                }
                Ok(trapezoid(p.spacing(), p.du_dx.iter().map(|d| d * d)))
            }
            Sample::Field(f) => {
                if m != f.m {
                    return Err(IdentityError::NotApplicable("field was built for a different derivative order"));
                }
                Ok(Spectral::for_field(f).derivative_norm_sq(&f.values, f.half_length, m))
            }
        }
    }

    fn check_nonzero(&self) -> Result<(), IdentityError> {
        if self.values().iter().all(|&v| v == 0.0) {
            Err(IdentityError::ZeroField)
        } else {
            Ok(())
        }
    }
}

fn trapezoid(h: f64, values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len();
    let sum: f64 = values.enumerate().map(|(i, v)| if i == 0 || i + 1 == n { 0.5 * v } else { v }).sum();
    h * sum
}

fn relative(lhs: f64, rhs: f64) -> f64 {
    let scale = lhs.abs().max(rhs.abs());
    if scale == 0.0 {
        0.0
    } else {
        (lhs - rhs).abs() / scale
    }
}

/// Nehari terms `(|u^{(m)}|^2 + lambda int G'(u) u, int F'(u) u)`.
pub fn nehari_sides(sample: Sample<'_>, model: &NonlinearityModel, lambda: f64, m: u32) -> Result<(f64, f64), IdentityError> {
    sample.check_nonzero()?;
    let d = sample.derivative_norm_sq(m)?;
    let lhs = d + lambda * sample.integrate(|u| model.g_prime(u) * u);
    let rhs = sample.integrate(|u| model.f_prime(u) * u);
    Ok((lhs, rhs))
}

pub fn nehari_residual(sample: Sample<'_>, model: &NonlinearityModel, lambda: f64, m: u32) -> Result<f64, IdentityError> {
    let (lhs, rhs) = nehari_sides(sample, model, lambda, m)?;
    Ok(relative(lhs, rhs))
}

/// Pohozaev terms `((1 - 2m) |u^{(m)}|^2 + 2 lambda int G(u), 2 int F(u))`.
pub fn pohozaev_sides(sample: Sample<'_>, model: &NonlinearityModel, lambda: f64, m: u32) -> Result<(f64, f64), IdentityError> {
    sample.check_nonzero()?;
    let d = sample.derivative_norm_sq(m)?;
    let lhs = (1.0 - 2.0 * m as f64) * d + 2.0 * lambda * sample.integrate(|u| model.g(u));
    let rhs = 2.0 * sample.integrate(|u| model.f(u));
    Ok((lhs, rhs))
}

pub fn pohozaev_residual(sample: Sample<'_>, model: &NonlinearityModel, lambda: f64, m: u32) -> Result<f64, IdentityError> {
    let (lhs, rhs) = pohozaev_sides(sample, model, lambda, m)?;
    Ok(relative(lhs, rhs))
}

/// Pohozaev residual in the `G(s) = s^2/2` form `(1 - 2m) |u^{(m)}|^2 + lambda |u|_2^2 = 2 int F(u)`.
pub fn pohozaev_residual_l2(sample: Sample<'_>, model: &NonlinearityModel, lambda: f64, m: u32) -> Result<f64, IdentityError> {
    sample.check_nonzero()?;
    let d = sample.derivative_norm_sq(m)?;
    let lhs = (1.0 - 2.0 * m as f64) * d + lambda * sample.integrate(|u| u * u);
    let rhs = 2.0 * sample.integrate(|u| model.f(u));
    Ok(relative(lhs, rhs))
}

/// `sup |u'^2 - 2 W_lambda(u)|` over interior nodes of an `m = 1` profile.
pub fn equipartition_residual(sample: Sample<'_>, model: &NonlinearityModel, lambda: f64) -> Result<f64, IdentityError> {
    let Sample::Profile(p) = sample else {
        return Err(IdentityError::NotApplicable("equipartition holds for m = 1 profiles only"));
    };
    let n = p.u.len();
    Ok((1..n.saturating_sub(1))
        .map(|i| (p.du_dx[i] * p.du_dx[i] - 2.0 * model.w_lambda(lambda, p.u[i])).abs())
        .fold(0.0, f64::max))
}

/// `int K(u) dx`.
pub fn mass_k(sample: Sample<'_>, model: &NonlinearityModel) -> f64 {
    sample.integrate(|u| model.k(u))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub nehari_rel: f64,
    pub pohozaev_rel: f64,
    /// Only defined for `m = 1` profiles.
    pub equipartition_sup: Option<f64>,
    #[serde(rename = "mass_K")]
    pub mass_k: f64,
    pub lambda: f64,
    pub m: u32,
    pub model: String,
}

pub fn identity_report(
    sample: Sample<'_>,
    model: &NonlinearityModel,
    lambda: f64,
    m: u32,
) -> Result<IdentityReport, IdentityError> {
    let equipartition_sup = match equipartition_residual(sample, model, lambda) {
        Ok(v) => Some(v),
        Err(IdentityError::NotApplicable(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(IdentityReport {
        nehari_rel: nehari_residual(sample, model, lambda, m)?,
        pohozaev_rel: pohozaev_residual(sample, model, lambda, m)?,
        equipartition_sup,
        mass_k: mass_k(sample, model),
        lambda,
        m,
        model: model.name().to_string(),
    })
}
