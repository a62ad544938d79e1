//! Double-exponential quadrature for integrands with endpoint singularities, and the
//! bracketing root finders used throughout the crate.
//!
//! The tanh-sinh rule maps `(a, b)` onto the real line with `x = tanh(pi/2 sinh t)`.
//! Abscissae are generated together with their exact distance to each endpoint so that
//! integrands which blow up at an endpoint can be evaluated without cancellation, see
//! [`integrate_singular_with`].

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Behavior expected at an endpoint. Any class other than `None` forces the truncation
/// range to reach its maximum before convergence is accepted; two `None` endpoints let
/// smooth integrands stop as soon as successive levels agree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum EndpointClass {
    None,
    InverseSqrt,
    #[default]
    GeneralIntegrable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_levels: usize,
    pub endpoint_classes: (EndpointClass, EndpointClass),
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_levels: 12,
            endpoint_classes: (EndpointClass::GeneralIntegrable, EndpointClass::GeneralIntegrable),
        }
    }
}

impl QuadConfig {
    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn validate(&self) -> Result<(), QuadError> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(QuadError::InvalidConfig("tolerances must be positive".into()));
        }
        if self.max_levels < 4 {
            return Err(QuadError::InvalidConfig("max_levels must be at least 4".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootConfig {
    pub x_tol: f64,
    pub f_tol: f64,
    pub max_iter: usize,
}

impl Default for RootConfig {
    fn default() -> Self {
        RootConfig { x_tol: 1e-14, f_tol: 1e-10, max_iter: 400 }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("quadrature did not converge: value {value}, error estimate {error}")]
    NoConvergence { value: f64, error: f64 },
    #[error("integral appears to diverge (level sums {last_sums:?})")]
    DivergenceSuspected { last_sums: Vec<f64> },
    #[error("no sign change found above {start}")]
    NoBracket { start: f64 },
    #[error("f(lo) = {f_lo} and f(hi) = {f_hi} do not bracket a root")]
    BadBracket { f_lo: f64, f_hi: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Result of a converged quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub levels: usize,
    pub evaluations: usize,
}

/// A quadrature node together with its distance to both endpoints.
///
/// `from_a` and `to_b` are computed directly from the transformation, not as `x - a`,
/// so they keep full relative precision even when `x` rounds to an endpoint.
#[derive(Debug, Clone, Copy)]
pub struct Abscissa {
    pub x: f64,
    pub from_a: f64,
    pub to_b: f64,
}

const INITIAL_SPAN: f64 = 3.5;
const SPAN_GROWTH: f64 = 0.5;
const MAX_SPAN: f64 = 6.5;
const DIVERGENCE_RATIO: f64 = 1.5;
const DIVERGENCE_RUN: usize = 3;

fn span_at(level: usize) -> f64 {
    (INITIAL_SPAN + SPAN_GROWTH * level as f64).min(MAX_SPAN)
}

/// Weight and endpoint distance (on `[-1, 1]`) for the node at `t`.
fn node(t: f64) -> (f64, f64) {
    let u = FRAC_PI_2 * t.sinh();
    let e = (-2.0 * u.abs()).exp();
    let delta = 2.0 * e / (1.0 + e);
    let w = FRAC_PI_2 * t.cosh() * 4.0 * e / ((1.0 + e) * (1.0 + e));
    (w, delta)
}

/// Tanh-sinh quadrature of `f` over `(a, b)`. `f` is never evaluated at `a` or `b`.
pub fn integrate_singular<F>(mut f: F, a: f64, b: f64, cfg: &QuadConfig) -> Result<Integral, QuadError>
where
    F: FnMut(f64) -> f64,
{
    integrate_singular_with(
        |p: Abscissa| {
            if p.x <= a || p.x >= b {
                f64::NAN
            } else {
                f(p.x)
            }
        },
        a,
        b,
        cfg,
    )
}

/// Tanh-sinh quadrature where the integrand also receives each node's distance to the
/// endpoints. Nodes whose distance underflows to zero are skipped, as are non-finite
/// integrand values (these only arise at nodes that round onto an endpoint).
pub fn integrate_singular_with<F>(mut f: F, a: f64, b: f64, cfg: &QuadConfig) -> Result<Integral, QuadError>
where
    F: FnMut(Abscissa) -> f64,
{
    cfg.validate()?;
    if !(a < b) {
        return Err(QuadError::InvalidConfig(format!("empty interval ({a}, {b})")));
    }
    let half = 0.5 * (b - a);
    let width = b - a;

    let mut eval = |t: f64, evaluations: &mut usize| -> f64 {
        let (w, delta) = node(t);
        if delta == 0.0 || w == 0.0 {
            return 0.0;
        }
        let d = half * delta;
        let p = if t < 0.0 {
            Abscissa { x: a + d, from_a: d, to_b: width - d }
        } else {
            Abscissa { x: b - d, from_a: width - d, to_b: d }
        };
        *evaluations += 1;
        let v = f(p);
        if v.is_finite() {
            w * v
        } else {
            0.0
        }
    };

    let mut evaluations = 0usize;
    let mut h = 1.0;
    let mut span = span_at(0);
    let n0 = span.floor() as i64;
    let mut sum: f64 = (-n0..=n0).map(|k| eval(k as f64, &mut evaluations)).sum();
    let mut estimate = half * h * sum;
    let mut sums = vec![estimate];
    let mut growth_run = 0usize;

    for level in 1..cfg.max_levels {
        let prev_span = span;
        span = span_at(level);
        h *= 0.5;
        let kmax = (span / h).floor() as i64;
        for k in -kmax..=kmax {
            let t = k as f64 * h;
            if k % 2 != 0 || t.abs() > prev_span {
                sum += eval(t, &mut evaluations);
            }
        }
        let next = half * h * sum;
        if !next.is_finite() {
            sums.push(next);
            return Err(QuadError::DivergenceSuspected { last_sums: sums });
        }
        let error = (next - estimate).abs();
        if estimate != 0.0 && (next / estimate).abs() > DIVERGENCE_RATIO {
            growth_run += 1;
        } else {
            growth_run = 0;
        }
        sums.push(next);
        estimate = next;
        if growth_run >= DIVERGENCE_RUN {
            let tail = sums[sums.len().saturating_sub(DIVERGENCE_RUN + 1)..].to_vec();
            return Err(QuadError::DivergenceSuspected { last_sums: tail });
        }
        let tol = cfg.abs_tol.max(cfg.rel_tol * next.abs());
        let smooth = cfg.endpoint_classes == (EndpointClass::None, EndpointClass::None);
        if (smooth || span >= MAX_SPAN) && level >= 3 && error <= tol {
            return Ok(Integral { value: next, error, levels: level + 1, evaluations });
        }
    }
    let error = (sums[sums.len() - 1] - sums[sums.len() - 2]).abs();
    Err(QuadError::NoConvergence { value: estimate, error })
}

/// Local description of a simple zero `z` of a function `g` that is positive on `(0, z)`:
/// `g(z - d) = slope_mag * d + half_curvature * d^2 + O(d^3)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SimpleZero {
    pub zero: f64,
    pub slope_mag: f64,
    pub half_curvature: f64,
}

impl SimpleZero {
    /// Builds the local expansion from `g'`; the curvature comes from a central difference.
    pub fn from_derivative<D: Fn(f64) -> f64>(zero: f64, g_prime: D) -> Self {
        let slope = g_prime(zero);
        let h = (f64::EPSILON.cbrt() * zero.abs().max(1.0)).min(0.25 * zero);
        let curvature = (g_prime(zero + h) - g_prime(zero - h)) / (2.0 * h);
        SimpleZero { zero, slope_mag: -slope, half_curvature: 0.5 * curvature }
    }
}

const PATCH_FRACTION: f64 = 1e-5;

/// `int_0^z num(u) / sqrt(g(u)) du` where `g > 0` on `(0, z)` has a simple zero at `z`.
///
/// The upper half is integrated in `v = sqrt(z - u)`, which removes the inverse square
/// root. Within `PATCH_FRACTION * z` of the zero, `g` is replaced by its quadratic
/// expansion so the integrand is anchored to the computed zero rather than to a
/// cancellation-dominated evaluation of `g`.
pub(crate) fn integrate_to_simple_zero<N, G>(
    num: N,
    g: G,
    zero: &SimpleZero,
    cfg: &QuadConfig,
) -> Result<Integral, QuadError>
where
    N: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let z = zero.zero;
    let split = 0.5 * z;
    let lower = integrate_singular(|u| num(u) / g(u).sqrt(), 0.0, split, cfg)?;
    let patch = PATCH_FRACTION * z;
    let upper = integrate_singular_with(
        |p: Abscissa| {
            let v = p.x;
            let d = p.from_a * p.from_a;
            let ratio = if d < patch {
                let local = zero.slope_mag + zero.half_curvature * d;
                let local = if local > 0.0 { local } else { zero.slope_mag };
                1.0 / local.sqrt()
            } else {
                v / g(z - d).sqrt()
            };
            2.0 * num(z - d) * ratio
        },
        0.0,
        (z - split).sqrt(),
        cfg,
    )?;
    Ok(Integral {
        value: lower.value + upper.value,
        error: lower.error + upper.error,
        levels: lower.levels.max(upper.levels),
        evaluations: lower.evaluations + upper.evaluations,
    })
}

/// Bisection on a sign change. Stops when the bracket is narrower than `x_tol`, when it
/// can no longer be split in floating point, or after `max_iter` halvings.
pub fn bisect_root<F>(mut f: F, lo: f64, hi: f64, cfg: &RootConfig) -> Result<f64, QuadError>
where
    F: FnMut(f64) -> f64,
{
    let (mut lo, mut hi) = (lo.min(hi), lo.max(hi));
    let f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if !(f_lo * f_hi < 0.0) {
        return Err(QuadError::BadBracket { f_lo, f_hi });
    }
    let lo_positive = f_lo > 0.0;
    for _ in 0..cfg.max_iter {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= cfg.x_tol || mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

const BRACKET_LIMIT: f64 = 1e300;
const MESH_POINTS: usize = 64;

/// Smallest `s > s0` with `f(s) = 0`, for `f` positive just above `s0`.
///
/// A positive starting point is located (shrinking towards `s0` if needed), then the step
/// is doubled until `f <= 0`. The bracket is scanned on a uniform mesh so that the first
/// non-positive sample is the one refined, and bisection finishes the job.
pub fn find_first_root_above<F>(f: F, s0: f64, cfg: &RootConfig) -> Result<f64, QuadError>
where
    F: Fn(f64) -> f64,
{
    let no_bracket = || QuadError::NoBracket { start: s0 };
    let mut step = 1e-3 * s0.abs().max(1.0);
    let mut lo = s0;
    if !(f(s0) > 0.0) {
        let mut found = false;
        for _ in 0..1100 {
            let s = s0 + step;
            if s == s0 {
                break;
            }
            if f(s) > 0.0 {
                lo = s;
                found = true;
                break;
            }
            step *= 0.5;
        }
        if !found {
            return Err(no_bracket());
        }
    }
    let mut hi;
    loop {
        hi = lo + step;
        if !hi.is_finite() || hi > BRACKET_LIMIT {
            return Err(no_bracket());
        }
        if !(f(hi) > 0.0) {
            break;
        }
        lo = hi;
        step *= 2.0;
    }
    let dx = (hi - lo) / MESH_POINTS as f64;
    for i in 1..MESH_POINTS {
        let s = lo + dx * i as f64;
        if f(s) > 0.0 {
            continue;
        }
        hi = s;
        lo = s - dx;
        break;
    }
    let root = bisect_root(|s| if f(s) > 0.0 { 1.0 } else { -1.0 }, lo, hi, cfg)?;
    Ok(root)
}
