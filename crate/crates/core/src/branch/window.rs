use serde::{Deserialize, Serialize};

use super::BranchError;
use crate::extended::ExtReal;
use crate::model::{AsymptoticLimits, LimitsConfig, ModelError, NonlinearityModel, Provenance};
use crate::quadrature::QuadConfig;

/// Open interval of masses with extended-real endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: ExtReal,
    pub hi: ExtReal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WindowCase {
    #[serde(rename = "m0=0, L0 < linf")]
    VanishingM0LowAtZero,
    #[serde(rename = "m0=0, Linf < l0")]
    VanishingM0LowAtInfinity,
    #[serde(rename = "m0>0, I_F > pi/sqrt(2 linf)")]
    PositiveM0BelowIf,
    #[serde(rename = "m0>0, F'(m0) != 0")]
    PositiveM0AboveIf,
}

impl WindowCase {
    pub fn label(self) -> &'static str {
        match self {
            WindowCase::VanishingM0LowAtZero => "m0=0, L0 < linf",
            WindowCase::VanishingM0LowAtInfinity => "m0=0, Linf < l0",
            WindowCase::PositiveM0BelowIf => "m0>0, I_F > pi/sqrt(2 linf)",
            WindowCase::PositiveM0AboveIf => "m0>0, F'(m0) != 0",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowInputs {
    pub m0: f64,
    pub i_f: Option<ExtReal>,
    pub limits: AsymptoticLimits,
    pub f_prime_m0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExistenceWindow {
    pub cases: Vec<WindowCase>,
    pub windows: Vec<Interval>,
    pub inputs: WindowInputs,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct WindowConfig {
    pub limits: LimitsConfig,
    pub quad: QuadConfig,
}

/// Mass intervals on which a normalized solution is guaranteed, one per applicable case.
pub fn existence_window(model: &NonlinearityModel, cfg: &WindowConfig) -> Result<ExistenceWindow, BranchError> {
    let m0 = model.m_zero()?;
    let limits = model.asymptotic_limits(&cfg.limits)?;
    let f_prime_m0 = model.f_prime(m0);
    let i_f = match model.i_f(&cfg.quad) {
        Ok(v) => Some(v),
        Err(ModelError::NotApplicable(_)) => None,
        Err(e) => return Err(e.into()),
    };

    let mut warnings = Vec::new();
    if limits.provenance == Provenance::Sampled {
        warnings.push("asymptotic limits were sampled on finite windows and are heuristic".to_string());
    }
    let mut threshold = |name: &str, v: ExtReal| {
        let t = v.pi_over_sqrt_twice();
        if t.is_none() {
            warnings.push(format!("{name} = {v} is negative; cases using it are skipped"));
        }
        t
    };

    let mut cases = Vec::new();
    let mut windows = Vec::new();
    let mut push = |case, lo: ExtReal, hi: ExtReal| {
        if lo < hi {
            cases.push(case);
            windows.push(Interval { lo, hi });
        }
    };

    if m0 == 0.0 {
        let (sup0, inf0, sup_inf, inf_inf) = (
            threshold("L0", limits.sup_at_zero),
            threshold("l0", limits.inf_at_zero),
            threshold("Linf", limits.sup_at_infinity),
            threshold("linf", limits.inf_at_infinity),
        );
        if limits.sup_at_zero < limits.inf_at_infinity {
            if let (Some(lo), Some(hi)) = (inf_inf, sup0) {
                push(WindowCase::VanishingM0LowAtZero, lo, hi);
            }
        }
        if limits.sup_at_infinity < limits.inf_at_zero {
            if let (Some(lo), Some(hi)) = (inf0, sup_inf) {
                push(WindowCase::VanishingM0LowAtInfinity, lo, hi);
            }
        }
    } else if let Some(i_f) = i_f {
        let sup_inf = threshold("Linf", limits.sup_at_infinity);
        let inf_inf = threshold("linf", limits.inf_at_infinity);
        if let Some(lo) = inf_inf {
            if i_f > lo {
                push(WindowCase::PositiveM0BelowIf, lo, i_f);
            }
        }
        if let Some(hi) = sup_inf {
            if f_prime_m0 != 0.0 && i_f.is_finite() && i_f < hi {
                push(WindowCase::PositiveM0AboveIf, i_f, hi);
            }
        }
    }

    Ok(ExistenceWindow { cases, windows, inputs: WindowInputs { m0, i_f, limits, f_prime_m0 }, warnings })
}
