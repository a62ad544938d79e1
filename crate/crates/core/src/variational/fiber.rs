//! Energy, the Nehari-Pohozaev manifold and the mass-preserving fiber `s * u = sqrt(s) u(s .)`.

use super::field::{FieldState, Spectral, GUARD_FRACTION, GUARD_LEVEL};
use super::VariationalError;
use crate::model::NonlinearityModel;
use crate::quadrature::{bisect_root, RootConfig};

/// Scalars of a field that the fiber map acts on in closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldMoments {
    /// `|u^{(m)}|_2^2`.
    pub d: f64,
    /// `|u|_2^2`.
    pub mass: f64,
    /// `int F(u)`.
    pub f_int: f64,
    /// `int H(u)`.
    pub h_int: f64,
    /// `int F'(u) u`.
    pub fpu_int: f64,
}

pub fn moments(spectral: &Spectral, field: &FieldState, model: &NonlinearityModel) -> FieldMoments {
    FieldMoments {
        d: spectral.derivative_norm_sq(&field.values, field.half_length, field.m),
        mass: field.mass(),
        f_int: field.integrate(|u| model.f(u)),
        h_int: field.integrate(|u| model.h(u)),
        fpu_int: field.integrate(|u| model.f_prime(u) * u),
    }
}

/// `J(u) = 1/2 |u^{(m)}|_2^2 - int F(u)`.
pub fn energy_j(spectral: &Spectral, field: &FieldState, model: &NonlinearityModel) -> f64 {
    0.5 * spectral.derivative_norm_sq(&field.values, field.half_length, field.m) - field.integrate(|u| model.f(u))
}

/// `phi_u(s) = J(s * u) = s^{2m}/2 D - (1/s) int F(sqrt(s) u)`.
pub fn phi_u(spectral: &Spectral, field: &FieldState, model: &NonlinearityModel, s: f64) -> f64 {
    let d = spectral.derivative_norm_sq(&field.values, field.half_length, field.m);
    phi_from(d, field, model, s)
}

fn phi_from(d: f64, field: &FieldState, model: &NonlinearityModel, s: f64) -> f64 {
    let r = s.sqrt();
    0.5 * s.powi(2 * field.m as i32) * d - field.integrate(|u| model.f(r * u)) / s
}

/// `psi(s) = (1/2m) int H(sqrt(s) u) / s^{1+2m}`.
pub fn psi(field: &FieldState, model: &NonlinearityModel, s: f64) -> f64 {
    let m = field.m as i32;
    let r = s.sqrt();
    field.integrate(|u| model.h(r * u)) / (2.0 * field.m as f64 * s.powi(1 + 2 * m))
}

/// `phi_u'(s) = m s^{2m-1} (D - psi(s))`.
pub fn phi_u_prime(spectral: &Spectral, field: &FieldState, model: &NonlinearityModel, s: f64) -> f64 {
    let d = spectral.derivative_norm_sq(&field.values, field.half_length, field.m);
    let m = field.m;
    m as f64 * s.powi(2 * m as i32 - 1) * (d - psi(field, model, s))
}

/// Relative distance from the manifold: `|D - (1/2m) int H| / D`.
pub fn m_residual(spectral: &Spectral, field: &FieldState, model: &NonlinearityModel) -> f64 {
    let d = spectral.derivative_norm_sq(&field.values, field.half_length, field.m);
    (d - psi(field, model, 1.0)).abs() / d
}

/// `sqrt(s) u(s .)` interpolated back onto the grid of `field`, renormalized to the
/// original mass.
pub fn fiber_scale(spectral: &Spectral, field: &FieldState, s: f64) -> Result<FieldState, VariationalError> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(VariationalError::InvalidField(format!("scaling factor {s} must be positive")));
    }
    if s == 1.0 {
        return Ok(field.clone());
    }
    let l = field.half_length;
    let points: Vec<f64> = field
        .grid()
        .iter()
        .map(|&x| {
            // wrap into the periodic box
            let y = s * x + l;
            y.rem_euclid(2.0 * l) - l
        })
        .collect();
    let r = s.sqrt();
    let values: Vec<f64> = spectral.interpolate(field, &points).into_iter().map(|v| r * v).collect();
    let mut out = FieldState { values, ..field.clone() };
    if s < 1.0 && out.guard_ratio() > GUARD_LEVEL {
        return Err(VariationalError::SupportOverflow { s, outer_fraction: GUARD_FRACTION });
    }
    let target = field.mass();
    let have = out.mass();
    if have > 0.0 {
        out = out.scaled((target / have).sqrt());
    }
    Ok(out)
}

/// Result of projecting a field onto the manifold along its fiber.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub s_star: f64,
    /// `s_star * u`, realized exactly on a rescaled box.
    pub field: FieldState,
}

const FIBER_RANGE: (f64, f64) = (1e-6, 1e6);

/// Finds `s*` with `psi(s*) = D` and returns `s* * u`.
pub fn project_to_m(spectral: &Spectral, field: &FieldState, model: &NonlinearityModel) -> Result<Projection, VariationalError> {
    let d = spectral.derivative_norm_sq(&field.values, field.half_length, field.m);
    if !(d > 0.0) {
        return Err(VariationalError::InvalidField("field has no derivative energy".into()));
    }
    let gap = |log_s: f64| {
        let v = psi(field, model, log_s.exp()) - d;
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let g1 = gap(0.0);
    if g1 == 0.0 {
        return Ok(Projection { s_star: 1.0, field: field.clone() });
    }
    // psi is monotone in s but its direction depends on the growth of F, so widen both ways
    let (lo_lim, hi_lim) = (FIBER_RANGE.0.ln(), FIBER_RANGE.1.ln());
    let step = std::f64::consts::LN_2;
    let (mut up, mut down) = (0.0, 0.0);
    let bracket = loop {
        let can_up = up + step <= hi_lim + 1e-12;
        let can_down = down - step >= lo_lim - 1e-12;
        if !can_up && !can_down {
            return Err(VariationalError::NoCrossing);
        }
        if can_up {
            let g = gap(up + step);
            if (g > 0.0) != (g1 > 0.0) || g == 0.0 {
                break (up, up + step);
            }
            up += step;
        }
        if can_down {
            let g = gap(down - step);
            if (g > 0.0) != (g1 > 0.0) || g == 0.0 {
                break (down - step, down);
            }
            down -= step;
        }
    };
    let (a, b) = bracket;
    let cfg = RootConfig { x_tol: 1e-15, ..RootConfig::default() };
    let log_s = bisect_root(gap, a, b, &cfg).map_err(|_| VariationalError::NoCrossing)?;
    let s_star = log_s.exp();
    Ok(Projection { s_star, field: field.fiber_regrid(s_star) })
}
