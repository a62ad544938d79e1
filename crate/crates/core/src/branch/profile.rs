use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{m_lambda, BranchConfig, BranchError};
use crate::extended::ExtReal;
use crate::model::NonlinearityModel;
use crate::quadrature::{integrate_singular, EndpointClass, QuadConfig, QuadError, SimpleZero};

/// Even homoclinic profile sampled on a symmetric uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolitonProfile {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub du_dx: Vec<f64>,
    pub lambda: f64,
    pub peak: f64,
    /// `T_lambda`: the profile vanishes for `|x| >= T_lambda`.
    pub half_support: ExtReal,
}

impl SolitonProfile {
    pub fn spacing(&self) -> f64 {
        self.x[1] - self.x[0]
    }
}

const UPPER_NODES: usize = 64;
const PATCH_FRACTION: f64 = 1e-5;
const MAX_LOWER_NODES: usize = 200_000;

/// Time map `x(u) = int_u^m dv / sqrt(2 W(v))`, tabulated in two smooth parametrizations:
/// `u = m - t^2` on `[m/2, m]` and `u = e^w` below `m/2`.
struct TimeMap<'a> {
    model: &'a NonlinearityModel,
    lambda: f64,
    peak: f64,
    zero: SimpleZero,
    quad: QuadConfig,
    /// `(t, x)`, both increasing.
    upper: Vec<(f64, f64)>,
    /// `(w, x)`, `w` decreasing and `x` increasing; starts at `w = ln(m/2)`.
    lower: Vec<(f64, f64)>,
    half_support: ExtReal,
}

impl<'a> TimeMap<'a> {
    fn w(&self, u: f64) -> f64 {
        self.model.w_lambda(self.lambda, u)
    }

    /// `dx/dt` on the upper arc.
    fn upper_rate(&self, t: f64) -> f64 {
        let d = t * t;
        if d < PATCH_FRACTION * self.peak {
            let local = self.zero.slope_mag + self.zero.half_curvature * d;
            let local = if local > 0.0 { local } else { self.zero.slope_mag };
            return 2.0 / (2.0 * local).sqrt();
        }
        2.0 * t / (2.0 * self.w(self.peak - d)).sqrt()
    }

    /// `-dx/dw` on the lower arc.
    fn lower_rate(&self, w: f64) -> f64 {
        let u = w.exp();
        u / (2.0 * self.w(u)).sqrt()
    }

    fn upper_integral(&self, a: f64, b: f64) -> Result<f64, QuadError> {
        if a == b {
            return Ok(0.0);
        }
        integrate_singular(|t| self.upper_rate(t), a, b, &self.quad).map(|r| r.value)
    }

    fn lower_integral(&self, a: f64, b: f64) -> Result<f64, QuadError> {
        if a == b {
            return Ok(0.0);
        }
        integrate_singular(|w| self.lower_rate(w), a, b, &self.quad).map(|r| r.value)
    }

    fn ensure_positive(&self, u: f64) -> Result<(), BranchError> {
        if self.w(u) > 0.0 {
            Ok(())
        } else {
            Err(BranchError::InversionFailure { u })
        }
    }

    fn build(
        model: &'a NonlinearityModel,
        lambda: f64,
        x_max: f64,
        cfg: &BranchConfig,
    ) -> Result<Self, BranchError> {
        let peak = m_lambda(model, lambda, &cfg.root)?;
        let zero = SimpleZero::from_derivative(peak, |s| model.w_lambda_prime(lambda, s));
        let quad = QuadConfig {
            abs_tol: 1e-15,
            rel_tol: 1e-13,
            endpoint_classes: (EndpointClass::None, EndpointClass::None),
            ..cfg.quad
        };
        let mut map = TimeMap {
            model,
            lambda,
            peak,
            zero,
            quad,
            upper: Vec::new(),
            lower: Vec::new(),
            half_support: ExtReal::INFINITY,
        };

        let t_half = (0.5 * peak).sqrt();
        let mut x = 0.0;
        map.upper.push((0.0, 0.0));
        for k in 1..=UPPER_NODES {
            let c = (std::f64::consts::PI * k as f64 / UPPER_NODES as f64).cos();
            let t = if k == UPPER_NODES { t_half } else { 0.5 * t_half * (1.0 - c) };
            let prev = map.upper[k - 1].0;
            map.ensure_positive(peak - t * t)?;
            map.ensure_positive(peak - (0.5 * (t + prev)).powi(2))?;
            let dx = map.upper_integral(prev, t)?;
            if !(dx > 0.0) {
                return Err(BranchError::InversionFailure { u: peak - t * t });
            }
            x += dx;
            map.upper.push((t, x));
        }

        map.half_support = map.half_support_from(x, &cfg.quad)?;

        let target_dx = (x_max / 400.0).max(1e-3);
        let mut dw: f64 = 0.05;
        let mut w = (0.5 * peak).ln();
        map.lower.push((w, x));
        let t_total = map.half_support.value();
        while x < x_max && map.lower.len() < MAX_LOWER_NODES {
            if t_total.is_finite() && t_total - x <= 1e-14 * t_total {
                break;
            }
            let next = w - dw;
            if next.exp() < 1e-300 {
                break;
            }
            map.ensure_positive(next.exp())?;
            let dx = map.lower_integral(next, w)?;
            if !(dx > 0.0) {
                return Err(BranchError::InversionFailure { u: next.exp() });
            }
            x += dx;
            w = next;
            map.lower.push((w, x));
            dw = (dw * target_dx / dx).clamp(0.01, 1.0);
        }
        Ok(map)
    }

    /// `T = x(m/2) + int_0^{m/2} dv / sqrt(2W)`. When `W` vanishes at least quadratically at
    /// 0 the integral diverges and `T = inf`.
    fn half_support_from(&self, x_half: f64, quad: &QuadConfig) -> Result<ExtReal, BranchError> {
        let (v1, v2) = (1e-5 * self.peak, 1e-6 * self.peak);
        let order = (self.w(v1) / self.w(v2)).ln() / (v1 / v2).ln();
        if !(order < 2.0 - 1e-2) {
            return Ok(ExtReal::INFINITY);
        }
        match integrate_singular(|v| 1.0 / (2.0 * self.w(v)).sqrt(), 0.0, 0.5 * self.peak, quad) {
            Ok(r) => Ok(ExtReal::new(x_half + r.value)),
            Err(QuadError::DivergenceSuspected { .. }) => Ok(ExtReal::INFINITY),
            Err(e) => Err(e.into()),
        }
    }

    /// Solves `x(u) = target` for `target >= 0`.
    fn invert(&self, target: f64) -> Result<f64, BranchError> {
        if target == 0.0 {
            return Ok(self.peak);
        }
        if target >= self.half_support.value() {
            return Ok(0.0);
        }
        let x_half = self.upper.last().expect("table").1;
        if target <= x_half {
            let k = bracket(&self.upper, target);
            let (t0, x0) = self.upper[k];
            let (t1, x1) = self.upper[k + 1];
            let t = safeguarded_newton(
                target,
                (t0, x0),
                (t1, x1),
                |t| Ok(x0 + self.upper_integral(t0, t)?),
                |t| self.upper_rate(t),
            )?;
            return Ok(self.peak - t * t);
        }
        let last = self.lower.last().expect("table");
        if target > last.1 {
            return Ok(0.0);
        }
        let k = bracket(&self.lower, target);
        let (w0, x0) = self.lower[k];
        let (w1, x1) = self.lower[k + 1];
        // parametrize by s = w0 - w so that x increases with s
        let s = safeguarded_newton(
            target,
            (0.0, x0),
            (w0 - w1, x1),
            |s| Ok(x0 + self.lower_integral(w0 - s, w0)?),
            |s| self.lower_rate(w0 - s),
        )?;
        Ok((w0 - s).exp())
    }
}

/// Index `k` with `table[k].1 <= x <= table[k + 1].1`.
fn bracket(table: &[(f64, f64)], x: f64) -> usize {
    let k = table.partition_point(|&(_, xk)| xk <= x);
    k.clamp(1, table.len() - 1) - 1
}

/// Root of `x(s) = target` on `[a.0, b.0]` where `x` is increasing with derivative `rate`.
fn safeguarded_newton(
    target: f64,
    a: (f64, f64),
    b: (f64, f64),
    eval: impl Fn(f64) -> Result<f64, QuadError>,
    rate: impl Fn(f64) -> f64,
) -> Result<f64, QuadError> {
    let (mut lo, mut hi) = (a.0, b.0);
    let mut s = if b.1 > a.1 { a.0 + (b.0 - a.0) * (target - a.1) / (b.1 - a.1) } else { a.0 };
    for _ in 0..80 {
        let g = eval(s)? - target;
        if g == 0.0 {
            return Ok(s);
        }
        if g < 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        let step = g / rate(s);
        let mut next = s - step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - s).abs() <= 4.0 * f64::EPSILON * s.abs().max(hi.abs()) || hi - lo <= f64::EPSILON * hi.abs() {
            return Ok(next);
        }
        s = next;
    }
    Ok(s)
}

/// Profile `u_lambda` on `n_nodes` (odd) uniform points of `[-x_max, x_max]`.
pub fn reconstruct_profile(
    model: &NonlinearityModel,
    lambda: f64,
    n_nodes: usize,
    x_max: f64,
    cfg: &BranchConfig,
) -> Result<SolitonProfile, BranchError> {
    if n_nodes < 3 || n_nodes.is_multiple_of(2) {
        return Err(BranchError::InvalidInput(format!("n_nodes must be odd and at least 3, got {n_nodes}")));
    }
    if !(x_max > 0.0 && x_max.is_finite()) {
        return Err(BranchError::InvalidInput(format!("x_max must be positive, got {x_max}")));
    }
    let map = TimeMap::build(model, lambda, x_max, cfg)?;
    let c = (n_nodes - 1) / 2;
    let h = x_max / c as f64;
    let half: Vec<f64> = (0..=c)
        .into_par_iter()
        .map(|j| map.invert(j as f64 * h))
        .collect::<Result<_, _>>()?;

    let mut x = Vec::with_capacity(n_nodes);
    let mut u = Vec::with_capacity(n_nodes);
    let mut du = Vec::with_capacity(n_nodes);
    for i in 0..n_nodes {
        let j = i.abs_diff(c);
        let xi = (i as f64 - c as f64) * h;
        let ui = half[j];
        let slope = if ui > 0.0 && j > 0 { (2.0 * model.w_lambda(lambda, ui)).max(0.0).sqrt() } else { 0.0 };
        x.push(xi);
        u.push(ui);
        du.push(if i < c { slope } else { -slope });
    }
    Ok(SolitonProfile { x, u, du_dx: du, lambda, peak: map.peak, half_support: map.half_support })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::catalog::*;
    use crate::model::PowerTerm;

    fn sup_error(p: &SolitonProfile, exact: impl Fn(f64) -> f64, window: f64) -> f64 {
        p.x.iter().zip(&p.u).filter(|(x, _)| x.abs() <= window).map(|(&x, &u)| (u - exact(x)).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn cubic_profile_matches_sech() {
        let p = reconstruct_profile(&cubic(), 1.0, 2001, 20.0, &BranchConfig::default()).unwrap();
        let err = sup_error(&p, |x| 2f64.sqrt() / x.cosh(), 10.0);
        assert!(err < 1e-6, "{err}");
        assert_eq!(p.u[1000], p.peak);
        assert!(p.half_support.is_pos_infinite());
    }

    #[test]
    fn quintic_profile_matches_closed_form() {
        let p = reconstruct_profile(&quintic(), 1.0, 2001, 20.0, &BranchConfig::default()).unwrap();
        let err = sup_error(&p, |x| 3f64.powf(0.25) / (2.0 * x).cosh().sqrt(), 10.0);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn profile_is_even_and_monotone() {
        let p = reconstruct_profile(&sign_changing(), 0.3, 801, 30.0, &BranchConfig::default()).unwrap();
        let n = p.u.len();
        for i in 0..n {
            assert!((p.u[i] - p.u[n - 1 - i]).abs() <= 1e-12);
        }
        for i in n / 2..n - 1 {
            assert!(p.u[i + 1] <= p.u[i]);
        }
        assert!(p.u[0] < 1e-6 && p.u[n - 1] < 1e-6);
    }

    #[test]
    fn compact_support_when_g_is_sublinear() {
        let model =
            NonlinearityModel::power_sum(1.5, 2.0, vec![PowerTerm { coeff: 0.25, exponent: 4.0 }]).unwrap();
        let p = reconstruct_profile(&model, 1.0, 801, 10.0, &BranchConfig::default()).unwrap();
        let t = p.half_support.value();
        assert!(t.is_finite() && t < 10.0, "{t}");
        for (x, u) in p.x.iter().zip(&p.u) {
            if x.abs() >= t {
                assert_eq!(*u, 0.0);
            }
        }
        let c = p.u.len() / 2;
        assert!(p.u[c] > 0.0 && p.u[c + 1] < p.u[c]);
    }

    #[test]
    fn rejects_even_node_count() {
        assert!(reconstruct_profile(&cubic(), 1.0, 100, 10.0, &BranchConfig::default()).is_err());
    }
}
