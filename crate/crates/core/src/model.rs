//! The nonlinearity triple `(F, G, K)` and every scalar quantity derived from it.
//!
//! Models come in two tiers. A [`PowerSum`] model has `G(s) = s^p / p`, `K(s) = s^q` and
//! `F(s) = sum c_i s^{r_i}`; all limits are then read off the exponents exactly. A generic
//! model wraps arbitrary callables and any limit is estimated by sampling, with the result
//! flagged [`Provenance::Sampled`].
//!
//! Power sums are extended evenly to negative arguments (`F(-s) = F(s)`), which is what
//! the variational solvers need for sign-changing fields.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extended::ExtReal;
use crate::quadrature::{
    bisect_root, integrate_singular, integrate_to_simple_zero, QuadConfig, QuadError, RootConfig, SimpleZero,
};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("F <= 0 on the whole scanned range up to {scanned_to}")]
    NoFiniteMZero { scanned_to: f64 },
    #[error("K/sqrt(G) does not appear to be integrable near 0")]
    DivergentNearZero,
    #[error("not applicable: {0}")]
    NotApplicable(&'static str),
    #[error(transparent)]
    Quad(#[from] QuadError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerTerm {
    #[serde(rename = "c")]
    pub coeff: f64,
    #[serde(rename = "r")]
    pub exponent: f64,
}

/// Exact metadata of a power-sum model.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSum {
    /// `p` in `G(s) = s^p / p`.
    pub g_power: f64,
    /// `q` in `K(s) = s^q`.
    pub k_power: f64,
    pub terms: Vec<PowerTerm>,
}

fn pow(s: f64, r: f64) -> f64 {
    if r.fract() == 0.0 && r.abs() < 64.0 {
        s.powi(r as i32)
    } else {
        s.powf(r)
    }
}

const EXPONENT_MERGE: f64 = 1e-12;

impl PowerSum {
    fn f(&self, s: f64) -> f64 {
        let a = s.abs();
        self.terms.iter().map(|t| t.coeff * pow(a, t.exponent)).sum()
    }

    fn f_prime(&self, s: f64) -> f64 {
        let a = s.abs();
        let v: f64 = self.terms.iter().map(|t| t.coeff * t.exponent * pow(a, t.exponent - 1.0)).sum();
        v * s.signum()
    }

    /// `F'(s) s - shift F(s)` evaluated term by term, free of cancellation.
    fn shifted(&self, s: f64, shift: f64) -> f64 {
        let a = s.abs();
        self.terms.iter().map(|t| t.coeff * (t.exponent - shift) * pow(a, t.exponent)).sum()
    }

    fn shifted_prime(&self, s: f64, shift: f64) -> f64 {
        let a = s.abs();
        let v: f64 = self
            .terms
            .iter()
            .map(|t| t.coeff * (t.exponent - shift) * t.exponent * pow(a, t.exponent - 1.0))
            .sum();
        v * s.signum()
    }

    /// Terms of `sum c_i w(r_i) s^{r_i - offset}` merged by exponent, zero coefficients
    /// dropped, sorted by exponent.
    fn scaled_exponents(&self, weight: impl Fn(&PowerTerm) -> f64, offset: f64) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        let mut terms = self.terms.clone();
        terms.sort_by(|a, b| a.exponent.total_cmp(&b.exponent));
        for t in &terms {
            let e = t.exponent - offset;
            let c = t.coeff * weight(t);
            match out.last_mut() {
                Some(last) if (last.0 - e).abs() <= EXPONENT_MERGE * e.abs().max(1.0) => last.1 += c,
                _ => out.push((e, c)),
            }
        }
        out.retain(|&(_, c)| c.abs() > 1e-300);
        out
    }

    fn shifted_limits(&self, shift: f64, offset: f64) -> (ExtReal, ExtReal) {
        let terms = self.scaled_exponents(|t| t.exponent - shift, offset);
        (
            leading_limit(terms.first().copied()),
            leading_limit(terms.last().copied().map(|(e, c)| (-e, c))),
        )
    }

    fn min_exponent(&self) -> Option<f64> {
        self.scaled_exponents(|_| 1.0, 0.0).first().map(|t| t.0)
    }

    /// `q - p/2 + 1`, positive for valid models.
    pub fn phi_exponent(&self) -> f64 {
        self.k_power - 0.5 * self.g_power + 1.0
    }
}

/// Limit of `c s^e` as `s -> 0+`.
fn leading_limit(term: Option<(f64, f64)>) -> ExtReal {
    match term {
        None => ExtReal::ZERO,
        Some((e, _)) if e > 0.0 => ExtReal::ZERO,
        Some((0.0, c)) => ExtReal::new(c),
        Some((_, c)) if c > 0.0 => ExtReal::INFINITY,
        Some(_) => ExtReal::NEG_INFINITY,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    PowerSum(PowerSum),
    Generic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Exact,
    Sampled,
}

#[derive(Clone)]
pub struct NonlinearityModel {
    name: String,
    f: ScalarFn,
    f_prime: ScalarFn,
    g: ScalarFn,
    g_prime: ScalarFn,
    k: ScalarFn,
    kind: ModelKind,
}

impl fmt::Debug for NonlinearityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonlinearityModel").field("name", &self.name).field("kind", &self.kind).finish()
    }
}

/// Limits of `Z / Phi'` at `0+` and at `+inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticLimits {
    #[serde(rename = "L0")]
    pub sup_at_zero: ExtReal,
    #[serde(rename = "l0")]
    pub inf_at_zero: ExtReal,
    #[serde(rename = "Linf")]
    pub sup_at_infinity: ExtReal,
    #[serde(rename = "linf")]
    pub inf_at_infinity: ExtReal,
    pub provenance: Provenance,
}

/// Sampling windows for the generic tier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitsConfig {
    pub near: (f64, f64),
    pub far: (f64, f64),
    pub points: usize,
    pub quad: QuadConfig,
}

impl Default for LimitsConfig {
    fn default() -> Self {
        LimitsConfig { near: (1e-8, 1e-3), far: (1e3, 1e8), points: 200, quad: QuadConfig::default() }
    }
}

/// Magnitudes beyond these are reported as `inf` / `0` by the sampled tier.
const SAMPLED_INFINITE: f64 = 1e12;
const SAMPLED_ZERO: f64 = 1e-12;

fn classify_sample(v: f64) -> ExtReal {
    if v.is_nan() {
        ExtReal::ZERO
    } else if v.abs() >= SAMPLED_INFINITE {
        if v > 0.0 {
            ExtReal::INFINITY
        } else {
            ExtReal::NEG_INFINITY
        }
    } else if v.abs() <= SAMPLED_ZERO {
        ExtReal::ZERO
    } else {
        ExtReal::new(v)
    }
}

fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

fn sup_inf(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::NEG_INFINITY, f64::INFINITY), |(hi, lo), v| (hi.max(v), lo.min(v)))
}

/// `Phi(t)` together with its derivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiValue {
    pub phi: f64,
    pub phi_prime: f64,
}

const M_ZERO_SCAN: (f64, f64) = (1e-8, 1e6);
const M_ZERO_POINTS_PER_DECADE: usize = 40;

impl NonlinearityModel {
    /// Power-sum model `G = s^p/p`, `K = s^q`, `F = sum c_i s^{r_i}`.
    pub fn power_sum(g_power: f64, k_power: f64, terms: Vec<PowerTerm>) -> Result<Self, ModelError> {
        let p = g_power;
        let q = k_power;
        if !(p > 1.0 && p.is_finite()) {
            return Err(ModelError::Invalid(format!("G exponent p = {p} must exceed 1")));
        }
        if !(q > (0.5 * p - 1.0).max(0.0) && q.is_finite()) {
            return Err(ModelError::Invalid(format!("K exponent q = {q} must exceed max(p/2 - 1, 0)")));
        }
        if terms.is_empty() {
            return Err(ModelError::Invalid("F needs at least one term".into()));
        }
        for t in &terms {
            if !t.coeff.is_finite() || !t.exponent.is_finite() || t.exponent <= 1.0 {
                return Err(ModelError::Invalid(format!(
                    "term {}*s^{} must have a finite coefficient and exponent > 1",
                    t.coeff, t.exponent
                )));
            }
        }
        let ps = PowerSum { g_power: p, k_power: q, terms };
        let name = describe_power_sum(&ps);
        let (a, b) = (Arc::new(ps.clone()), Arc::new(ps.clone()));
        Ok(NonlinearityModel {
            name,
            f: Arc::new(move |s| a.f(s)),
            f_prime: Arc::new(move |s| b.f_prime(s)),
            g: Arc::new(move |s: f64| pow(s.abs(), p) / p),
            g_prime: Arc::new(move |s: f64| pow(s.abs(), p - 1.0) * s.signum()),
            k: Arc::new(move |s: f64| pow(s.abs(), q)),
            kind: ModelKind::PowerSum(ps),
        })
    }

    /// Generic model built from callables. The basic sign conditions are checked on a
    /// sample of points; anything finer is the caller's responsibility.
    pub fn generic(
        name: impl Into<String>,
        f: ScalarFn,
        f_prime: ScalarFn,
        g: ScalarFn,
        g_prime: ScalarFn,
        k: ScalarFn,
    ) -> Result<Self, ModelError> {
        let model = NonlinearityModel { name: name.into(), f, f_prime, g, g_prime, k, kind: ModelKind::Generic };
        model.validate_samples()?;
        Ok(model)
    }

    fn validate_samples(&self) -> Result<(), ModelError> {
        let at_zero = [self.f(0.0), self.g(0.0), self.f_prime(0.0), self.g_prime(0.0)];
        if at_zero.iter().any(|v| v.abs() > 1e-12) {
            return Err(ModelError::Invalid(format!("F, G, F', G' must vanish at 0, got {at_zero:?}")));
        }
        for &s in &[1e-3, 0.1, 0.5, 1.0, 2.0, 3.0, 5.0, 10.0] {
            if !(self.g_prime(s) > 0.0) {
                return Err(ModelError::Invalid(format!("G'({s}) must be positive")));
            }
            if !(self.k(s) > 0.0) {
                return Err(ModelError::Invalid(format!("K({s}) must be positive")));
            }
            let h = 1e-6 * s.max(1.0);
            let fd = (self.f(s + h) - self.f(s - h)) / (2.0 * h);
            let fp = self.f_prime(s);
            if (fd - fp).abs() > 1e-4 * (1.0 + fp.abs()) {
                return Err(ModelError::Invalid(format!("F'({s}) = {fp} disagrees with difference quotient {fd}")));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn power_data(&self) -> Option<&PowerSum> {
        match &self.kind {
            ModelKind::PowerSum(ps) => Some(ps),
            ModelKind::Generic => None,
        }
    }

    pub fn provenance(&self) -> Provenance {
        match self.kind {
            ModelKind::PowerSum(_) => Provenance::Exact,
            ModelKind::Generic => Provenance::Sampled,
        }
    }

    pub fn f(&self, s: f64) -> f64 {
        (self.f)(s)
    }
    pub fn f_prime(&self, s: f64) -> f64 {
        (self.f_prime)(s)
    }
    pub fn g(&self, s: f64) -> f64 {
        (self.g)(s)
    }
    pub fn g_prime(&self, s: f64) -> f64 {
        (self.g_prime)(s)
    }
    pub fn k(&self, s: f64) -> f64 {
        (self.k)(s)
    }

    /// `W_lambda(s) = lambda G(s) - F(s)`.
    pub fn w_lambda(&self, lambda: f64, s: f64) -> f64 {
        lambda * self.g(s) - self.f(s)
    }

    pub fn w_lambda_prime(&self, lambda: f64, s: f64) -> f64 {
        lambda * self.g_prime(s) - self.f_prime(s)
    }

    /// Largest `t` with `F <= 0` on `[0, t]`.
    ///
    /// The scan runs over a geometric grid on `[1e-8, 1e6]`; the first positive sample is
    /// bracketed against its predecessor and refined by bisection. A positive first sample
    /// means `m0 = 0`.
    pub fn m_zero(&self) -> Result<f64, ModelError> {
        let (lo, hi) = M_ZERO_SCAN;
        let decades = (hi / lo).log10().round() as usize;
        let grid = geometric_grid(lo, hi, decades * M_ZERO_POINTS_PER_DECADE + 1);
        let Some(first_positive) = grid.iter().position(|&s| self.f(s) > 0.0) else {
            return Err(ModelError::NoFiniteMZero { scanned_to: hi });
        };
        if first_positive == 0 {
            return Ok(0.0);
        }
        let (a, b) = (grid[first_positive - 1], grid[first_positive]);
        let cfg = RootConfig { x_tol: 0.0, ..RootConfig::default() };
        let root = bisect_root(|s| if self.f(s) > 0.0 { 1.0 } else { -1.0 }, a, b, &cfg)?;
        Ok(root)
    }

    /// `Z(s) = (F/G)'(s)`.
    pub fn z(&self, s: f64) -> f64 {
        match &self.kind {
            ModelKind::PowerSum(ps) => {
                let p = ps.g_power;
                p * ps.shifted(s, p) / pow(s, p + 1.0)
            }
            ModelKind::Generic => {
                let g = self.g(s);
                (self.f_prime(s) * g - self.f(s) * self.g_prime(s)) / (g * g)
            }
        }
    }

    /// `Phi(t) = (int_0^t K / sqrt(G))^2` and `Phi'(t)`.
    pub fn big_phi(&self, t: f64, cfg: &QuadConfig) -> Result<PhiValue, ModelError> {
        match &self.kind {
            ModelKind::PowerSum(ps) => {
                let (p, q) = (ps.g_power, ps.k_power);
                let e = ps.phi_exponent();
                Ok(PhiValue {
                    phi: p * pow(t, 2.0 * q - p + 2.0) / (e * e),
                    phi_prime: 2.0 * p * pow(t, 2.0 * q - p + 1.0) / e,
                })
            }
            ModelKind::Generic => {
                let root = self.generic_phi_root(t, cfg)?;
                Ok(PhiValue { phi: root * root, phi_prime: 2.0 * root * self.k(t) / self.g(t).sqrt() })
            }
        }
    }

    /// `int_0^t K / sqrt(G)` by quadrature, regardless of tier.
    pub fn generic_phi_root(&self, t: f64, cfg: &QuadConfig) -> Result<f64, ModelError> {
        integrate_singular(|s| self.k(s) / self.g(s).sqrt(), 0.0, t, cfg)
            .map(|r| r.value)
            .map_err(|e| match e {
                QuadError::DivergenceSuspected { .. } => ModelError::DivergentNearZero,
                other => ModelError::Quad(other),
            })
    }

    /// `(K0, k0, Kinf, kinf)`: limits of `(F'(s)s - pF(s)) / s^{2q+2}` for power sums.
    pub fn power_constants(&self) -> Option<[ExtReal; 4]> {
        let ps = self.power_data()?;
        let (at_zero, at_inf) = ps.shifted_limits(ps.g_power, 2.0 * ps.k_power + 2.0);
        Some([at_zero, at_zero, at_inf, at_inf])
    }

    pub fn asymptotic_limits(&self, cfg: &LimitsConfig) -> Result<AsymptoticLimits, ModelError> {
        if let Some(ps) = self.power_data() {
            let scale = 0.5 * ps.phi_exponent();
            let [k0, _, kinf, _] = self.power_constants().expect("power sum");
            let scaled = |v: ExtReal| if v.is_finite() { ExtReal::new(scale * v.value()) } else { v };
            return Ok(AsymptoticLimits {
                sup_at_zero: scaled(k0),
                inf_at_zero: scaled(k0),
                sup_at_infinity: scaled(kinf),
                inf_at_infinity: scaled(kinf),
                provenance: Provenance::Exact,
            });
        }
        let near = self.sampled_ratio(cfg.near, cfg)?;
        let far = self.sampled_ratio(cfg.far, cfg)?;
        Ok(AsymptoticLimits {
            sup_at_zero: classify_sample(near.0),
            inf_at_zero: classify_sample(near.1),
            sup_at_infinity: classify_sample(far.0),
            inf_at_infinity: classify_sample(far.1),
            provenance: Provenance::Sampled,
        })
    }

    /// Sup and inf of `Z / Phi'` over a geometric window, with `Phi` accumulated
    /// piece by piece along the grid.
    fn sampled_ratio(&self, window: (f64, f64), cfg: &LimitsConfig) -> Result<(f64, f64), ModelError> {
        let grid = geometric_grid(window.0, window.1, cfg.points);
        let mut root = self.generic_phi_root(grid[0], &cfg.quad)?;
        let mut ratios = Vec::with_capacity(grid.len());
        for (i, &s) in grid.iter().enumerate() {
            if i > 0 {
                root += integrate_singular(|x| self.k(x) / self.g(x).sqrt(), grid[i - 1], s, &cfg.quad)?.value;
            }
            let phi_prime = 2.0 * root * self.k(s) / self.g(s).sqrt();
            ratios.push(self.z(s) / phi_prime);
        }
        Ok(sup_inf(ratios.into_iter().filter(|v| !v.is_nan())))
    }

    /// `I_F = sqrt2 int_0^{m0} K / sqrt|F|`, `+inf` when the integral diverges.
    pub fn i_f(&self, cfg: &QuadConfig) -> Result<ExtReal, ModelError> {
        let m0 = self.m_zero()?;
        if m0 == 0.0 {
            return Err(ModelError::NotApplicable("I_F requires m0 > 0"));
        }
        let slope = self.f_prime(m0);
        if !(slope > 1e-10 * (1.0 + self.g_prime(m0))) {
            // |F| = O((m0 - s)^2) at a tangential zero, so K / sqrt|F| is not integrable.
            return Ok(ExtReal::INFINITY);
        }
        let zero = SimpleZero::from_derivative(m0, |s| -self.f_prime(s));
        let r = integrate_to_simple_zero(|s| self.k(s), |s| -self.f(s), &zero, cfg)?;
        Ok(ExtReal::new(SQRT_2 * r.value))
    }

    /// `H(s) = F'(s) s - 2F(s)`, always assembled from the `F` and `F'` callables.
    pub fn h(&self, s: f64) -> f64 {
        self.f_prime(s) * s - 2.0 * self.f(s)
    }

    /// `H'(s)`: exact for power sums, central difference otherwise.
    pub fn h_prime(&self, s: f64) -> f64 {
        match &self.kind {
            ModelKind::PowerSum(ps) => ps.shifted_prime(s, 2.0),
            ModelKind::Generic => {
                let step = f64::EPSILON.cbrt() * s.abs().max(1.0);
                (self.h(s + step) - self.h(s - step)) / (2.0 * step)
            }
        }
    }

    /// Growth conditions used by the variational solvers, for derivative order `m`,
    /// mass `rho` and `gn_c` = `C_{2+4m}^{2+4m}` (the Gagliardo-Nirenberg constant to the
    /// power `2+4m`).
    pub fn check_structural_conditions(&self, m: u32, rho: f64, gn_c: f64) -> ConditionReport {
        let crit = 2.0 + 4.0 * m as f64;
        let mut notes = Vec::new();
        let (eta, sigma, near_exp) = match &self.kind {
            ModelKind::PowerSum(ps) => {
                let eta = ps.shifted_limits(2.0, crit).0;
                let sigma = ps.shifted_limits(0.0, crit).1;
                (eta, sigma, ps.min_exponent())
            }
            ModelKind::Generic => {
                notes.push("limits sampled on |s| in [1e-8, 1e-3] and [1e3, 1e8]; heuristic".to_string());
                let near = geometric_grid(1e-8, 1e-3, 200);
                let far = geometric_grid(1e3, 1e8, 200);
                let eta = sup_inf(near.iter().flat_map(|&s| [s, -s]).map(|s| self.h(s) / s.abs().powf(crit))).0;
                let sigma = sup_inf(far.iter().flat_map(|&s| [s, -s]).map(|s| self.f(s) / s.abs().powf(crit))).0;
                (classify_sample(eta), classify_sample(sigma), None)
            }
        };

        let samples: Vec<f64> = geometric_grid(1e-6, 1e6, 241).into_iter().flat_map(|s| [s, -s]).collect();
        let rel = 1e-10;
        let f3 = samples.iter().all(|&s| {
            let lhs = self.h_prime(s) * s;
            let rhs = crit * self.h(s);
            lhs - rhs >= -rel * (lhs.abs() + rhs.abs())
        });
        let f4 = samples.iter().all(|&s| {
            let f = 4.0 * m as f64 * self.f(s);
            let h = self.h(s);
            f >= -rel * f.abs() && f <= h + rel * (f.abs() + h.abs())
        });
        let strict_near_zero = samples.iter().filter(|s| s.abs() <= 1e-2).all(|&s| {
            let lhs = self.h_prime(s) * s;
            let rhs = crit * self.h(s);
            lhs - rhs > 1e-9 * (lhs.abs() + rhs.abs())
        });
        let strict = f3 && strict_near_zero;

        let small_grid = geometric_grid(1e-8, 1e-4, 9);
        let linear_near_zero = |d: &dyn Fn(f64) -> f64| {
            let ratios: Vec<f64> = small_grid.iter().map(|&s| (d(s) / s).abs()).collect();
            ratios.iter().all(|r| r.is_finite()) && ratios[0] <= 10.0 * ratios[ratios.len() - 1] + 1e-12
        };
        let (f0, sub_f0, sub_f1, sub_f3) = match (&self.kind, near_exp) {
            (ModelKind::PowerSum(ps), Some(e)) => {
                let lead = ps.scaled_exponents(|_| 1.0, 0.0)[0].1;
                (e >= 2.0, e >= 2.0, e > 2.0, e < crit && lead > 0.0)
            }
            (ModelKind::PowerSum(_), None) => (true, true, true, false),
            (ModelKind::Generic, _) => {
                let f0 = linear_near_zero(&|s| self.f_prime(s)) && linear_near_zero(&|s| self.h_prime(s));
                let f_over_s2 = self.f(1e-6) / 1e-12;
                let f_over_crit = small_grid.iter().map(|&s| self.f(s) / s.powf(crit)).fold(f64::INFINITY, f64::min);
                (f0, linear_near_zero(&|s| self.f_prime(s)), f_over_s2.abs() < 1e-3, f_over_crit >= SAMPLED_INFINITE)
            }
        };

        let f1 = eta < ExtReal::INFINITY;
        let f2 = sigma.is_pos_infinite();
        let rho_pow = rho.powi(2 * m as i32);
        let rho_condition = threshold_holds(eta, gn_c * rho_pow, 2.0 * m as f64);
        let mass_condition = threshold_holds(sigma, 2.0 * gn_c * rho_pow, 1.0);

        ConditionReport {
            m,
            rho,
            gn_c,
            eta,
            sigma,
            provenance: self.provenance(),
            f0,
            f1,
            f2,
            f3,
            f4,
            strict,
            rho_condition,
            sub_f0,
            sub_f1,
            sub_f2: sigma < ExtReal::INFINITY,
            sub_f3,
            mass_condition,
            notes,
        }
    }
}

/// `value * factor < bound` with `0 * anything = 0` and `inf * positive = inf`.
fn threshold_holds(value: ExtReal, factor: f64, bound: f64) -> bool {
    let v = value.value();
    if v <= 0.0 {
        return 0.0f64.max(v * factor) < bound || v < 0.0;
    }
    if !v.is_finite() {
        return false;
    }
    v * factor < bound
}

fn describe_power_sum(ps: &PowerSum) -> String {
    let terms: Vec<String> = ps.terms.iter().map(|t| format!("{}*s^{}", t.coeff, t.exponent)).collect();
    format!("power-sum(p={}, q={}, F={})", ps.g_power, ps.k_power, terms.join(" + "))
}

/// Outcome of [`NonlinearityModel::check_structural_conditions`].
///
/// `f0`..`f4` and `strict` refer to the supercritical growth conditions, `sub_f0`..`sub_f3`
/// to the subcritical ones. `eta` is `limsup_{s->0} H(s)/s^{2+4m}`, `sigma` is
/// `limsup_{|s|->inf} F(s)/s^{2+4m}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub m: u32,
    pub rho: f64,
    pub gn_c: f64,
    pub eta: ExtReal,
    pub sigma: ExtReal,
    pub provenance: Provenance,
    pub f0: bool,
    pub f1: bool,
    pub f2: bool,
    pub f3: bool,
    pub f4: bool,
    pub strict: bool,
    pub rho_condition: bool,
    pub sub_f0: bool,
    pub sub_f1: bool,
    pub sub_f2: bool,
    pub sub_f3: bool,
    pub mass_condition: bool,
    pub notes: Vec<String>,
}

impl ConditionReport {
    /// Hypotheses of the supercritical minimization: growth conditions, strictness and
    /// the small-mass condition at the origin.
    pub fn supercritical_failures(&self) -> Vec<&'static str> {
        let checks = [
            (self.f0, "F0"),
            (self.f1, "F1"),
            (self.f2, "F2"),
            (self.f3, "F3"),
            (self.f4, "F4"),
            (self.strict, "strict"),
            (self.rho_condition, "rho"),
        ];
        checks.iter().filter(|c| !c.0).map(|c| c.1).collect()
    }

    pub fn subcritical_failures(&self) -> Vec<&'static str> {
        let checks = [
            (self.sub_f0, "f0"),
            (self.sub_f1, "f1"),
            (self.sub_f2, "f2"),
            (self.sub_f3, "f3"),
            (self.mass_condition, "mass"),
        ];
        checks.iter().filter(|c| !c.0).map(|c| c.1).collect()
    }
}

/// JSON model description: `{"G": {"power": p}, "K": {"power": q}, "F": {"terms": [{"c": .., "r": ..}]}}`,
/// or `{"builtin": name, "p": ..}` for the catalog models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSpec {
    PowerSum {
        #[serde(rename = "G")]
        g: PowerSpec,
        #[serde(rename = "K")]
        k: PowerSpec,
        #[serde(rename = "F")]
        f: TermsSpec,
    },
    Builtin {
        builtin: String,
        #[serde(default)]
        p: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSpec {
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermsSpec {
    pub terms: Vec<PowerTerm>,
}

impl ModelSpec {
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        serde_json::from_str(text).map_err(|e| ModelError::Invalid(format!("model file: {e}")))
    }

    pub fn build(&self) -> Result<NonlinearityModel, ModelError> {
        match self {
            ModelSpec::PowerSum { g, k, f } => NonlinearityModel::power_sum(g.power, k.power, f.terms.clone()),
            ModelSpec::Builtin { builtin, p } => match builtin.as_str() {
                "cubic" => Ok(catalog::cubic()),
                "quintic" => Ok(catalog::quintic()),
                "sign-changing" => Ok(catalog::sign_changing()),
                "cosine-gap" => catalog::cosine_gap(p.unwrap_or(3.0)),
                other => Err(ModelError::Invalid(format!("unknown builtin model {other:?}"))),
            },
        }
    }
}

impl From<&PowerSum> for ModelSpec {
    fn from(ps: &PowerSum) -> Self {
        ModelSpec::PowerSum {
            g: PowerSpec { power: ps.g_power },
            k: PowerSpec { power: ps.k_power },
            f: TermsSpec { terms: ps.terms.clone() },
        }
    }
}

/// Reference models.
pub mod catalog {
    use std::f64::consts::PI;
    use std::sync::Arc;

    use super::{ModelError, NonlinearityModel, PowerTerm};

    fn term(coeff: f64, exponent: f64) -> PowerTerm {
        PowerTerm { coeff, exponent }
    }

    /// `G = s^2/2`, `K = s^2`, `F = s^beta / beta`.
    pub fn pure_power(beta: f64) -> Result<NonlinearityModel, ModelError> {
        NonlinearityModel::power_sum(2.0, 2.0, vec![term(1.0 / beta, beta)])
    }

    pub fn cubic() -> NonlinearityModel {
        pure_power(4.0).expect("valid model")
    }

    pub fn quintic() -> NonlinearityModel {
        pure_power(6.0).expect("valid model")
    }

    /// `F = s^4/4 - s^3/3`: negative on `(0, 4/3)`.
    pub fn sign_changing() -> NonlinearityModel {
        NonlinearityModel::power_sum(2.0, 2.0, vec![term(0.25, 4.0), term(-1.0 / 3.0, 3.0)]).expect("valid model")
    }

    /// `G = s^2/2`, `K = s^2` and `F = s^2/2 + cos s - 1` on `[0, 2pi]`, continued by
    /// `s^2/2 + (s - 2pi)^p`. At `lambda = 1` the first zero of `W` is `2pi` with zero slope.
    pub fn cosine_gap(p: f64) -> Result<NonlinearityModel, ModelError> {
        if !(p > 2.0) {
            return Err(ModelError::Invalid(format!("cosine-gap model needs p > 2, got {p}")));
        }
        let two_pi = 2.0 * PI;
        // Series below 0.1 avoid the cancellation in a^2/2 + cos a - 1 and a - sin a.
        let f = move |s: f64| {
            let a = s.abs();
            if a < 0.1 {
                let a2 = a * a;
                a2 * a2 * (1.0 / 24.0 - a2 * (1.0 / 720.0 - a2 * (1.0 / 40320.0 - a2 / 3628800.0)))
            } else if a <= two_pi {
                0.5 * a * a + a.cos() - 1.0
            } else {
                0.5 * a * a + (a - two_pi).powf(p)
            }
        };
        let fp = move |s: f64| {
            let a = s.abs();
            let v = if a < 0.1 {
                let a2 = a * a;
                a2 * a * (1.0 / 6.0 - a2 * (1.0 / 120.0 - a2 * (1.0 / 5040.0 - a2 / 362880.0)))
            } else if a <= two_pi {
                a - a.sin()
            } else {
                a + p * (a - two_pi).powf(p - 1.0)
            };
            v * s.signum()
        };
        NonlinearityModel::generic(
            format!("cosine-gap(p={p})"),
            Arc::new(f),
            Arc::new(fp),
            Arc::new(|s: f64| 0.5 * s * s),
            Arc::new(|s: f64| s),
            Arc::new(|s: f64| s * s),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::catalog::*;
    use super::*;
    use std::f64::consts::PI;

    fn generic_copy(model: &NonlinearityModel) -> NonlinearityModel {
        let m1 = model.clone();
        let m2 = model.clone();
        let m3 = model.clone();
        let m4 = model.clone();
        let m5 = model.clone();
        NonlinearityModel::generic(
            "generic copy",
            Arc::new(move |s| m1.f(s)),
            Arc::new(move |s| m2.f_prime(s)),
            Arc::new(move |s| m3.g(s)),
            Arc::new(move |s| m4.g_prime(s)),
            Arc::new(move |s| m5.k(s)),
        )
        .unwrap()
    }

    #[test]
    fn w_lambda_examples() {
        assert_eq!(cubic().w_lambda(1.0, 0.0), 0.0);
        assert!((cubic().w_lambda(1.0, 1.0) - 0.25).abs() < 1e-15);
        assert!(quintic().w_lambda(1.0, 3f64.powf(0.25)).abs() < 1e-15);
    }

    #[test]
    fn m_zero_examples() {
        assert_eq!(cubic().m_zero().unwrap(), 0.0);
        assert_eq!(quintic().m_zero().unwrap(), 0.0);
        assert!((sign_changing().m_zero().unwrap() - 4.0 / 3.0).abs() < 1e-14);
        assert_eq!(cosine_gap(3.0).unwrap().m_zero().unwrap(), 0.0);
    }

    #[test]
    fn m_zero_requires_eventual_positivity() {
        let m = NonlinearityModel::power_sum(2.0, 2.0, vec![PowerTerm { coeff: -1.0, exponent: 3.0 }]).unwrap();
        assert!(matches!(m.m_zero(), Err(ModelError::NoFiniteMZero { .. })));
    }

    #[test]
    fn z_examples() {
        assert!((cubic().z(2.0) - 2.0).abs() < 1e-14);
        assert!((quintic().z(1.0) - 4.0 / 3.0).abs() < 1e-14);
        assert!((sign_changing().z(1.0) - 1.0 / 3.0).abs() < 1e-14);
        // generic tier agrees with the exact reduction
        let g = generic_copy(&sign_changing());
        for s in [0.3, 1.0, 2.5] {
            assert!((g.z(s) - sign_changing().z(s)).abs() < 1e-12);
        }
    }

    #[test]
    fn phi_examples() {
        let cfg = QuadConfig::default();
        let v = cubic().big_phi(1.0, &cfg).unwrap();
        assert!((v.phi - 0.5).abs() < 1e-15 && (v.phi_prime - 2.0).abs() < 1e-15);
        assert!((cubic().big_phi(2.0, &cfg).unwrap().phi - 8.0).abs() < 1e-13);
        let exact = cubic().big_phi(1.7, &cfg).unwrap();
        let generic = generic_copy(&cubic()).big_phi(1.7, &cfg).unwrap();
        assert!((exact.phi - generic.phi).abs() < 1e-10);
        assert!((exact.phi_prime - generic.phi_prime).abs() < 1e-10);
    }

    #[test]
    fn phi_tiers_agree_across_scales() {
        let cfg = QuadConfig { rel_tol: 1e-13, abs_tol: 1e-15, ..QuadConfig::default() };
        let models = [
            cubic(),
            sign_changing(),
            NonlinearityModel::power_sum(3.0, 1.5, vec![PowerTerm { coeff: 1.0, exponent: 5.0 }]).unwrap(),
            NonlinearityModel::power_sum(1.5, 0.5, vec![PowerTerm { coeff: 1.0, exponent: 3.0 }]).unwrap(),
        ];
        for m in &models {
            for t in [0.1, 1.0, 10.0] {
                let exact = m.big_phi(t, &cfg).unwrap().phi;
                let root = m.generic_phi_root(t, &cfg).unwrap();
                assert!((exact - root * root).abs() <= 1e-9 * exact, "{} at {t}", m.name());
            }
        }
    }

    #[test]
    fn limits_examples() {
        let cfg = LimitsConfig::default();
        let l = cubic().asymptotic_limits(&cfg).unwrap();
        assert!(l.sup_at_zero.is_pos_infinite() && l.inf_at_zero.is_pos_infinite());
        assert_eq!(l.sup_at_infinity, ExtReal::ZERO);
        assert_eq!(l.inf_at_infinity, ExtReal::ZERO);

        let l = quintic().asymptotic_limits(&cfg).unwrap();
        for v in [l.sup_at_zero, l.inf_at_zero, l.sup_at_infinity, l.inf_at_infinity] {
            assert!((v.value() - 2.0 / 3.0).abs() < 1e-15);
        }
        let rho = l.sup_at_zero.pi_over_sqrt_twice().unwrap().value();
        assert!((rho - PI * 3f64.sqrt() / 2.0).abs() < 1e-12);

        let l = sign_changing().asymptotic_limits(&cfg).unwrap();
        assert_eq!(l.sup_at_infinity, ExtReal::ZERO);
        assert_eq!(l.inf_at_infinity, ExtReal::ZERO);
        // Z < 0 near the origin where F < 0
        assert_eq!(l.sup_at_zero, ExtReal::NEG_INFINITY);
    }

    #[test]
    fn sampled_limits_track_exact_ones() {
        let cfg = LimitsConfig::default();
        let l = generic_copy(&quintic()).asymptotic_limits(&cfg).unwrap();
        assert_eq!(l.provenance, Provenance::Sampled);
        for v in [l.sup_at_zero, l.inf_at_zero, l.sup_at_infinity, l.inf_at_infinity] {
            assert!((v.value() - 2.0 / 3.0).abs() < 1e-6, "{v:?}");
        }
        let l = generic_copy(&cubic()).asymptotic_limits(&cfg).unwrap();
        assert!(l.sup_at_zero.is_pos_infinite());
        assert!(l.inf_at_infinity.value() < 1e-6);
    }

    #[test]
    fn corollary_mapping() {
        let models = [
            quintic(),
            NonlinearityModel::power_sum(
                3.0,
                2.5,
                vec![PowerTerm { coeff: 2.0, exponent: 7.0 }, PowerTerm { coeff: 1.0, exponent: 9.0 }],
            )
            .unwrap(),
        ];
        for m in &models {
            let ps = m.power_data().unwrap();
            let l = m.asymptotic_limits(&LimitsConfig::default()).unwrap();
            let [k0, _, kinf, _] = m.power_constants().unwrap();
            for (lim, k) in [(l.sup_at_zero, k0), (l.sup_at_infinity, kinf)] {
                let a = lim.pi_over_sqrt_twice().unwrap();
                let b = if k.is_finite() && k.value() > 0.0 {
                    PI / (ps.phi_exponent() * k.value()).sqrt()
                } else if k.is_pos_infinite() {
                    0.0
                } else {
                    f64::INFINITY
                };
                assert!(a.value() == b || (a.value() - b).abs() < 1e-12, "{a:?} vs {b}");
            }
        }
    }

    #[test]
    fn i_f_examples() {
        let cfg = QuadConfig { rel_tol: 1e-13, abs_tol: 1e-14, ..QuadConfig::default() };
        let v = sign_changing().i_f(&cfg).unwrap().value();
        assert!((v - 4.0 * SQRT_2 * PI / 3.0).abs() < 1e-10, "{v}");
        assert!(matches!(cubic().i_f(&cfg), Err(ModelError::NotApplicable(_))));

        // K = s^3: the substitution s = (4/3) sin^2(theta) gives the same 4 sqrt2 pi / 3
        let k3 = NonlinearityModel::power_sum(
            2.0,
            3.0,
            vec![PowerTerm { coeff: 0.25, exponent: 4.0 }, PowerTerm { coeff: -1.0 / 3.0, exponent: 3.0 }],
        )
        .unwrap();
        let v = k3.i_f(&cfg).unwrap().value();
        assert!((v - 4.0 * SQRT_2 * PI / 3.0).abs() < 1e-10, "{v}");
    }

    #[test]
    fn i_f_diverges_at_tangential_zero() {
        // F = s^2 (s-1)^2 sign(s-1) leaves zero with F'(1) = 0
        let touch = NonlinearityModel::generic(
            "tangent",
            Arc::new(|s: f64| s * s * (s - 1.0).powi(2) * (s - 1.0).signum()),
            Arc::new(|s: f64| {
                let d = s - 1.0;
                (2.0 * s * d * d + 2.0 * s * s * d) * d.signum()
            }),
            Arc::new(|s: f64| 0.5 * s * s),
            Arc::new(|s: f64| s),
            Arc::new(|s: f64| s * s),
        )
        .unwrap();
        assert!((touch.m_zero().unwrap() - 1.0).abs() < 1e-12);
        let v = touch.i_f(&QuadConfig::default()).unwrap();
        assert!(v.is_pos_infinite(), "{v:?}");
    }

    #[test]
    fn h_examples() {
        let square = pure_power(2.0).unwrap();
        for s in [0.1, 1.0, 3.7, -2.0] {
            assert_eq!(square.h(s), 0.0);
            assert_eq!(square.h_prime(s), 0.0);
        }
        assert!((cubic().h(1.0) - 0.5).abs() < 1e-15);
        let twelve = pure_power(12.0).unwrap();
        assert!((twelve.h(2.0) - 10.0 / 12.0 * 4096.0).abs() < 1e-10);
        // generic tier finite differences
        let g = generic_copy(&twelve);
        assert!((g.h_prime(1.3) - twelve.h_prime(1.3)).abs() < 1e-7 * twelve.h_prime(1.3));
    }

    #[test]
    fn h_is_assembled_from_callables() {
        for model in [cubic(), sign_changing(), cosine_gap(3.0).unwrap()] {
            for s in [0.2, 1.0, 5.0, 7.0] {
                let direct = model.f_prime(s) * s - 2.0 * model.f(s);
                assert_eq!(model.h(s).to_bits(), direct.to_bits());
            }
        }
    }

    #[test]
    fn structural_examples() {
        let r = pure_power(12.0).unwrap().check_structural_conditions(2, 1.0, 1.0);
        assert_eq!(r.eta, ExtReal::ZERO);
        assert!(r.f3 && r.f4 && r.strict && r.f0 && r.f1 && r.f2 && r.rho_condition, "{r:?}");
        assert!(r.supercritical_failures().is_empty());

        let r = quintic().check_structural_conditions(1, 1.0, 1.0);
        assert!((r.eta.value() - 2.0 / 3.0).abs() < 1e-15);
        assert!(!r.strict && r.f3);

        let r = cubic().check_structural_conditions(1, 4.0, 1.0);
        assert_eq!(r.sigma, ExtReal::ZERO);
        assert!(r.mass_condition);
        assert!(r.subcritical_failures().is_empty(), "{r:?}");
        assert!(r.supercritical_failures().contains(&"F2"));
        for rho in [1e-3, 1.0, 1e3] {
            assert!(cubic().check_structural_conditions(1, rho, 10.0).mass_condition);
        }
    }

    #[test]
    fn rho_condition_depends_on_eta() {
        // quintic at m = 1 has eta = 2/3: eta C rho^2 < 2 fails for large rho
        let q = quintic();
        assert!(q.check_structural_conditions(1, 0.1, 1.0).rho_condition);
        assert!(!q.check_structural_conditions(1, 10.0, 1.0).rho_condition);
    }

    #[test]
    fn construction_rejects_bad_models() {
        assert!(NonlinearityModel::power_sum(1.0, 2.0, vec![PowerTerm { coeff: 1.0, exponent: 4.0 }]).is_err());
        assert!(NonlinearityModel::power_sum(4.0, 0.5, vec![PowerTerm { coeff: 1.0, exponent: 4.0 }]).is_err());
        assert!(NonlinearityModel::power_sum(2.0, 2.0, vec![PowerTerm { coeff: 1.0, exponent: 1.0 }]).is_err());
        let bad = NonlinearityModel::generic(
            "negative G'",
            Arc::new(|s: f64| s.powi(4)),
            Arc::new(|s: f64| 4.0 * s.powi(3)),
            Arc::new(|s: f64| -0.5 * s * s),
            Arc::new(|s: f64| -s),
            Arc::new(|s: f64| s * s),
        );
        assert!(bad.is_err());
        let wrong_derivative = NonlinearityModel::generic(
            "wrong F'",
            Arc::new(|s: f64| s.powi(4)),
            Arc::new(|s: f64| s.powi(3)),
            Arc::new(|s: f64| 0.5 * s * s),
            Arc::new(|s: f64| s),
            Arc::new(|s: f64| s * s),
        );
        assert!(wrong_derivative.is_err());
    }

    #[test]
    fn model_spec_json() {
        let text = r#"{"G": {"power": 2}, "K": {"power": 2}, "F": {"terms": [{"c": 0.25, "r": 4}]}}"#;
        let m = ModelSpec::from_json(text).unwrap().build().unwrap();
        assert_eq!(m.power_data(), cubic().power_data());
        let gap = ModelSpec::from_json(r#"{"builtin": "cosine-gap", "p": 3}"#).unwrap().build().unwrap();
        assert_eq!(gap.provenance(), Provenance::Sampled);
        assert!(ModelSpec::from_json(r#"{"builtin": "nope"}"#).unwrap().build().is_err());
        assert!(ModelSpec::from_json("{").is_err());
    }
}
