//! Spectral discretization of `H^m(R)`, the energy and its constrained minimizers.

mod fiber;
mod field;
mod gn;
mod minimize;

use thiserror::Error;

pub use fiber::{
    energy_j, fiber_scale, m_residual, moments, phi_u, phi_u_prime, project_to_m, psi, FieldMoments, Projection,
};
pub use field::{recenter, FieldState, Spectral, GUARD_FRACTION, GUARD_LEVEL};
pub use gn::{delta_p, gn_constant, gn_quotient, GNEstimate, GnOptions};
pub use minimize::{gaussian_seed, minimize_on_d, minimize_on_dm, MinimizationReport, MinimizeOptions};

#[derive(Debug, Error)]
pub enum VariationalError {
    #[error("invalid field: {0}")]
    InvalidField(String),
    #[error("scaling by s = {s} pushes mass into the outer {outer_fraction} of the box")]
    SupportOverflow { s: f64, outer_fraction: f64 },
    #[error("psi never reaches the derivative norm for s in [1e-6, 1e6]")]
    NoCrossing,
    #[error("minimization did not converge after {} iterations", .0.iterations)]
    NotConverged(Box<MinimizationReport>),
    #[error("structural conditions fail: {}", .0.join(", "))]
    PreconditionFailed(Vec<String>),
    #[error("Gagliardo-Nirenberg ascent did not converge after {} iterations", .0.iterations)]
    GnNotConverged(Box<GNEstimate>),
    #[error("invalid options: {0}")]
    InvalidOptions(String),
    #[error(transparent)]
    Identity(#[from] crate::identities::IdentityError),
}
