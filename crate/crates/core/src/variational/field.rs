use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::VariationalError;

/// A real field on the periodic box `[-L, L)` sampled at `n` uniform nodes `x_j = -L + j dx`.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub half_length: f64,
    pub values: Vec<f64>,
    /// Derivative order of the energy this field belongs to.
    pub m: u32,
}

impl fmt::Debug for FieldState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FieldState")
            .field("half_length", &self.half_length)
            .field("n", &self.values.len())
            .field("m", &self.m)
            .field("max_abs", &self.max_abs())
            .finish_non_exhaustive()
    }
}

/// Fraction of the box, at each end, that must be essentially empty.
pub const GUARD_FRACTION: f64 = 0.1;
/// Relative amplitude allowed in the guard region.
pub const GUARD_LEVEL: f64 = 1e-8;

impl FieldState {
    pub fn new(half_length: f64, values: Vec<f64>, m: u32) -> Result<Self, VariationalError> {
        let f = FieldState { half_length, values, m };
        f.validate()?;
        Ok(f)
    }

    /// Samples `f` on the grid.
    pub fn from_fn(half_length: f64, n: usize, m: u32, f: impl Fn(f64) -> f64) -> Result<Self, VariationalError> {
        let dx = 2.0 * half_length / n as f64;
        let values = (0..n).map(|j| f(-half_length + j as f64 * dx)).collect();
        FieldState::new(half_length, values, m)
    }

    pub fn validate(&self) -> Result<(), VariationalError> {
        let n = self.values.len();
        if n < 64 || !n.is_power_of_two() {
            return Err(VariationalError::InvalidField(format!("n = {n} must be a power of two >= 64")));
        }
        if !(self.half_length > 0.0 && self.half_length.is_finite()) {
            return Err(VariationalError::InvalidField(format!("half length {} must be positive", self.half_length)));
        }
        if self.m == 0 {
            return Err(VariationalError::InvalidField("derivative order m must be positive".into()));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(VariationalError::InvalidField("field has non-finite values".into()));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_length / self.n() as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.half_length + j as f64 * self.dx()
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.n()).map(|j| self.x(j)).collect()
    }

    /// `int g(u) dx` by the (periodic) trapezoid rule.
    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.dx() * self.values.iter().map(|&u| g(u)).sum::<f64>()
    }

    /// `|u|_2^2`.
    pub fn mass(&self) -> f64 {
        self.integrate(|u| u * u)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Largest `|u|` in the outer `GUARD_FRACTION` of the box, relative to `max |u|`.
    pub fn guard_ratio(&self) -> f64 {
        let peak = self.max_abs();
        if peak == 0.0 {
            return 0.0;
        }
        let edge = (1.0 - GUARD_FRACTION) * self.half_length;
        let outer = (0..self.n()).filter(|&j| self.x(j).abs() > edge).fold(0.0f64, |a, j| a.max(self.values[j].abs()));
        outer / peak
    }

    pub fn decays(&self) -> bool {
        self.guard_ratio() <= GUARD_LEVEL
    }

    pub fn scaled(&self, factor: f64) -> FieldState {
        FieldState { values: self.values.iter().map(|v| v * factor).collect(), ..self.clone() }
    }

    /// Same field on a box twice as large with the same spacing.
    pub fn zero_padded(&self) -> FieldState {
        let n = self.n();
        let mut values = vec![0.0; 2 * n];
        values[n / 2..n / 2 + n].copy_from_slice(&self.values);
        FieldState { half_length: 2.0 * self.half_length, values, m: self.m }
    }

    /// `s * u = sqrt(s) u(s .)` realized exactly by relabelling the grid: the values are
    /// multiplied by `sqrt(s)` and the box shrinks to `[-L/s, L/s)`.
    pub fn fiber_regrid(&self, s: f64) -> FieldState {
        FieldState { half_length: self.half_length / s, ..self.scaled(s.sqrt()) }
    }
}

/// FFT plans for a fixed number of nodes. Wavenumbers depend on the box and are
/// passed per call.
#[derive(Clone)]
pub struct Spectral {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Spectral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Spectral").field("n", &self.n).finish()
    }
}

impl Spectral {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Spectral { n, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
    }

    pub fn for_field(field: &FieldState) -> Self {
        Spectral::new(field.n())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Angular wavenumber of mode `k` on a box of half length `half_length`.
    pub fn wavenumber(&self, k: usize, half_length: f64) -> f64 {
        let signed = if k <= self.n / 2 { k as f64 } else { k as f64 - self.n as f64 };
        PI * signed / half_length
    }

    fn check(&self, values: &[f64]) {
        assert_eq!(values.len(), self.n, "field size does not match FFT plan");
    }

    pub fn transform(&self, values: &[f64]) -> Vec<Complex<f64>> {
        self.check(values);
        let mut buf: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        buf
    }

    pub fn inverse_real(&self, mut spectrum: Vec<Complex<f64>>) -> Vec<f64> {
        self.inverse.process(&mut spectrum);
        let scale = 1.0 / self.n as f64;
        spectrum.into_iter().map(|c| c.re * scale).collect()
    }

    /// Applies a real, even Fourier multiplier `symbol(xi)`.
    pub fn apply_symbol(&self, values: &[f64], half_length: f64, symbol: impl Fn(f64) -> f64) -> Vec<f64> {
        let mut spec = self.transform(values);
        for (k, c) in spec.iter_mut().enumerate() {
            *c *= symbol(self.wavenumber(k, half_length));
        }
        self.inverse_real(spec)
    }

    /// `k`-th derivative with multiplier `(i xi)^k`; the Nyquist mode is dropped for odd `k`.
    pub fn derivative(&self, field: &FieldState, order: u32) -> FieldState {
        let mut spec = self.transform(&field.values);
        let i_pow = Complex::new(0.0, 1.0).powu(order);
        for (k, c) in spec.iter_mut().enumerate() {
            if order % 2 == 1 && k == self.n / 2 {
                *c = Complex::new(0.0, 0.0);
                continue;
            }
            let xi = self.wavenumber(k, field.half_length);
            *c *= i_pow * xi.powi(order as i32);
        }
        FieldState { values: self.inverse_real(spec), ..field.clone() }
    }

    /// `|u^{(m)}|_2^2 = (dx/n) sum xi^{2m} |u_hat|^2`.
    pub fn derivative_norm_sq(&self, values: &[f64], half_length: f64, m: u32) -> f64 {
        let spec = self.transform(values);
        let dx = 2.0 * half_length / self.n as f64;
        let sum: f64 = spec
            .iter()
            .enumerate()
            .map(|(k, c)| self.wavenumber(k, half_length).powi(2 * m as i32) * c.norm_sqr())
            .sum();
        dx * sum / self.n as f64
    }

    /// `(-d^2/dx^2)^m u`.
    pub fn polyharmonic(&self, values: &[f64], half_length: f64, m: u32) -> Vec<f64> {
        self.apply_symbol(values, half_length, |xi| xi.powi(2 * m as i32))
    }

    /// Evaluates the trigonometric interpolant of `field` at arbitrary points.
    pub fn interpolate(&self, field: &FieldState, points: &[f64]) -> Vec<f64> {
        let spec = self.transform(&field.values);
        let x0 = -field.half_length;
        let half = self.n / 2;
        let base = PI / field.half_length;
        points
            .par_iter()
            .map(|&y| {
                // real data: c_{n-k} = conj(c_k), so sum the positive half twice
                let theta = base * (y - x0);
                let step = Complex::from_polar(1.0, theta);
                let mut z = step;
                let mut acc = 0.0;
                for c in &spec[1..half] {
                    acc += (c * z).re;
                    z *= step;
                }
                // Nyquist mode split evenly between +xi and -xi
                let nyquist = spec[half].re * (half as f64 * theta).cos();
                (spec[0].re + 2.0 * acc + nyquist) / self.n as f64
            })
            .collect()
    }

    /// Circular shift of the field by `shift` (in x units): returns `u(x - shift)`.
    pub fn translate(&self, field: &FieldState, shift: f64) -> FieldState {
        let mut spec = self.transform(&field.values);
        for (k, c) in spec.iter_mut().enumerate() {
            let xi = self.wavenumber(k, field.half_length);
            if k == self.n / 2 {
                *c *= (xi * shift).cos();
            } else {
                *c *= Complex::from_polar(1.0, -xi * shift);
            }
        }
        FieldState { values: self.inverse_real(spec), ..field.clone() }
    }
}

/// Moves the peak of `|u|` to `x = 0` (integer roll plus spectral sub-grid shift).
pub fn recenter(spectral: &Spectral, field: &FieldState) -> FieldState {
    let n = field.n();
    let (j, _) = field
        .values
        .iter()
        .enumerate()
        .fold((0, 0.0), |best, (j, v)| if v.abs() > best.1 { (j, v.abs()) } else { best });
    let centre = n / 2;
    let mut values = vec![0.0; n];
    for (i, v) in field.values.iter().enumerate() {
        values[(i + n + centre - j) % n] = *v;
    }
    let rolled = FieldState { values, ..field.clone() };
    let (a, b, c) = (rolled.values[centre - 1].abs(), rolled.values[centre].abs(), rolled.values[centre + 1].abs());
    let denom = a - 2.0 * b + c;
    if denom >= 0.0 {
        return rolled;
    }
    // parabolic guess, then Newton on the interpolant's derivative
    let mut peak = rolled.x(centre) + 0.5 * (a - c) / denom * field.dx();
    let d1 = spectral.derivative(&rolled, 1);
    let d2 = spectral.derivative(&rolled, 2);
    for _ in 0..4 {
        let g = spectral.interpolate(&d1, &[peak])[0];
        let h = spectral.interpolate(&d2, &[peak])[0];
        if !(h != 0.0) {
            break;
        }
        let next = peak - g / h;
        if (next - rolled.x(centre)).abs() > field.dx() {
            break;
        }
        peak = next;
    }
    spectral.translate(&rolled, rolled.x(centre) - peak)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_of_sine() {
        let l = 5.0;
        let f = FieldState::from_fn(l, 128, 1, |x| (PI * x / l).sin()).unwrap();
        let s = Spectral::for_field(&f);
        let d = s.derivative(&f, 1);
        for (j, v) in d.values.iter().enumerate() {
            assert!((v - PI / l * (PI * f.x(j) / l).cos()).abs() < 1e-10);
        }
        let c = FieldState::from_fn(l, 64, 1, |_| 3.0).unwrap();
        assert!(Spectral::for_field(&c).derivative(&c, 2).values.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn sech_derivative_norm() {
        let f = FieldState::from_fn(40.0, 1024, 1, |x| 2f64.sqrt() / x.cosh()).unwrap();
        let s = Spectral::for_field(&f);
        assert!((s.derivative_norm_sq(&f.values, f.half_length, 1) - 4.0 / 3.0).abs() < 1e-8);
        assert!((f.mass() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        assert!(FieldState::new(1.0, vec![0.0; 100], 1).is_err());
        assert!(FieldState::new(1.0, vec![0.0; 32], 1).is_err());
        assert!(FieldState::new(-1.0, vec![0.0; 64], 1).is_err());
        assert!(FieldState::new(1.0, vec![0.0; 64], 0).is_err());
    }

    #[test]
    fn interpolation_reproduces_nodes_and_translates() {
        let f = FieldState::from_fn(20.0, 256, 1, |x| (-(x - 0.3) * (x - 0.3)).exp()).unwrap();
        let s = Spectral::for_field(&f);
        let back = s.interpolate(&f, &f.grid());
        for (a, b) in back.iter().zip(&f.values) {
            assert!((a - b).abs() < 1e-12);
        }
        let mid = s.interpolate(&f, &[0.3, 1.05]);
        assert!((mid[0] - 1.0).abs() < 1e-10 && (mid[1] - (-0.5625f64).exp()).abs() < 1e-10);
        let centred = recenter(&s, &f);
        let c = centred.n() / 2;
        assert!((centred.values[c] - 1.0).abs() < 1e-10, "{}", centred.values[c]);
    }

    #[test]
    fn padding_and_regrid() {
        let f = FieldState::from_fn(10.0, 128, 2, |x| (-x * x).exp()).unwrap();
        let p = f.zero_padded();
        assert_eq!(p.n(), 256);
        assert_eq!(p.dx(), f.dx());
        assert!((p.mass() - f.mass()).abs() < 1e-15);
        let r = f.fiber_regrid(3.0);
        assert!((r.mass() - f.mass()).abs() < 1e-13);
        assert!(f.decays());
    }
}
