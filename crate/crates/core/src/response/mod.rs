//! Linear response of `⟨Q(x_t)⟩` to the perturbation
//! `W_s(x, y) = W(x, y) exp(h_s [b V(y) - a V(x)])` started from a law `μ`:
//!
//! ```text
//! ⟨Q(t)⟩^h_μ = ⟨Q(t)⟩_μ + ∫_0^t h_s R(t, s) ds + o(h)
//! R(t, s) = b ∂_s⟨V_s Q_t⟩ - a ∂_t⟨V_s Q_t⟩ + b [⟨V_s (LQ)_t⟩ - ⟨(LV)_s Q_t⟩]
//! ```
//!
//! Every term is evaluated exactly through the generator. Finite
//! differences appear only in [`oracle`], which integrates the perturbed
//! master equation directly and shares no formula with the kernel above.

pub mod oracle;
mod susceptibility;

use rayon::prelude::*;
use thiserror::Error;

pub use oracle::{response_fd_oracle, response_fd_oracle_with, response_kernel_fd, FdEstimate, FdOptions};
pub use susceptibility::{chi_fd, chi_formula, generator_identity_check, SusceptibilityPair};

use crate::markov::{
    check_len, correlation, correlation_derivatives, stationarity_residual, Distribution, Generator,
    MarkovError, Observable,
};
use crate::numerics::{integrate_adaptive, QuadratureError};
use crate::perturbation::{AmplitudeSchedule, PerturbationError};

/// Relative stationarity residual accepted for a supplied `ρ`.
pub const STATIONARITY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResponseError {
    #[error("NotStationary: supplied law has stationarity residual {residual:e}")]
    NotStationary { residual: f64 },
    #[error("StepSizeUnderflow: {0}")]
    StepSizeUnderflow(String),
    #[error("InvalidTimes: {0}")]
    InvalidTimes(String),
    #[error(transparent)]
    Markov(#[from] MarkovError),
    #[error(transparent)]
    Perturbation(#[from] PerturbationError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

pub(crate) fn ensure_stationary(generator: &Generator, rho: &Distribution) -> Result<(), ResponseError> {
    let residual = stationarity_residual(generator, rho)?;
    if residual > STATIONARITY_TOL {
        Err(ResponseError::NotStationary { residual })
    } else {
        Ok(())
    }
}

fn check_window(s: f64, t: f64) -> Result<(), ResponseError> {
    if !(s.is_finite() && t.is_finite()) || s < 0.0 || s > t {
        return Err(MarkovError::TimeOrder { s, t }.into());
    }
    Ok(())
}

/// The four contributions to `R(t, s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResponseTerms {
    /// `b ∂_s⟨V_s Q_t⟩`
    pub b_ds: f64,
    /// `a ∂_t⟨V_s Q_t⟩`
    pub a_dt: f64,
    /// `b ⟨V_s (LQ)_t⟩`
    pub b_vlq: f64,
    /// `b ⟨(LV)_s Q_t⟩`
    pub b_lvq: f64,
}

impl ResponseTerms {
    pub fn total(&self) -> f64 {
        self.b_ds - self.a_dt + self.b_vlq - self.b_lvq
    }
}

/// Term-by-term evaluation of the response kernel for `0 ≤ s ≤ t`.
#[allow(clippy::too_many_arguments)]
pub fn response_terms(
    generator: &Generator,
    mu: &Distribution,
    v: &Observable,
    q: &Observable,
    a: f64,
    b: f64,
    s: f64,
    t: f64,
) -> Result<ResponseTerms, ResponseError> {
    check_window(s, t)?;
    check_len(generator.n(), v.len())?;
    check_len(generator.n(), q.len())?;
    let derivatives = correlation_derivatives(generator, mu, v, q, s, t)?;
    let lq = generator.apply_L(q)?;
    let lv = generator.apply_L(v)?;
    Ok(ResponseTerms {
        b_ds: b * derivatives.d_ds,
        a_dt: a * derivatives.d_dt,
        b_vlq: b * correlation(generator, mu, v, &lq, s, t)?,
        b_lvq: b * correlation(generator, mu, &lv, q, s, t)?,
    })
}

/// `R(t, s)` for the `(a, b)` perturbation of potential `v`, observable `q`.
#[allow(clippy::too_many_arguments)]
pub fn response_exact(
    generator: &Generator,
    mu: &Distribution,
    v: &Observable,
    q: &Observable,
    a: f64,
    b: f64,
    s: f64,
    t: f64,
) -> Result<f64, ResponseError> {
    Ok(response_terms(generator, mu, v, q, a, b, s, t)?.total())
}

/// Stationary form `a ∂_s⟨V_s Q_t⟩_ρ - b ⟨(LV)_s Q_t⟩_ρ`, a function of the
/// lag `t - s` only.
pub fn response_exact_stationary(
    generator: &Generator,
    rho: &Distribution,
    v: &Observable,
    q: &Observable,
    a: f64,
    b: f64,
    lag: f64,
) -> Result<f64, ResponseError> {
    if !(lag.is_finite() && lag >= 0.0) {
        return Err(ResponseError::InvalidTimes(format!("lag {lag} must be nonnegative")));
    }
    check_len(generator.n(), v.len())?;
    ensure_stationary(generator, rho)?;
    let d_ds = correlation_derivatives(generator, rho, v, q, 0.0, lag)?.d_ds;
    let lv = generator.apply_L(v)?;
    let lv_q = correlation(generator, rho, &lv, q, 0.0, lag)?;
    Ok(a * d_ds - b * lv_q)
}

/// Response kernel sampled on a set of `s` points at fixed `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseGrid {
    pub t: f64,
    pub s_points: Vec<f64>,
    pub values: Vec<f64>,
    pub terms: Vec<ResponseTerms>,
    pub a: f64,
    pub b: f64,
    /// Free-form description of the initial law.
    pub initial: String,
}

/// Evaluates [`response_terms`] at every `s` in `s_points` (strictly inside
/// `(0, t)`), in parallel.
#[allow(clippy::too_many_arguments)]
pub fn response_grid(
    generator: &Generator,
    mu: &Distribution,
    v: &Observable,
    q: &Observable,
    a: f64,
    b: f64,
    t: f64,
    s_points: &[f64],
    initial: impl Into<String>,
) -> Result<ResponseGrid, ResponseError> {
    if let Some(bad) = s_points.iter().find(|s| !(**s > 0.0 && **s < t)) {
        return Err(ResponseError::InvalidTimes(format!(
            "grid point {bad} is not inside (0, {t})"
        )));
    }
    if s_points.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ResponseError::InvalidTimes(
            "grid points must be increasing".into(),
        ));
    }
    let terms = s_points
        .par_iter()
        .map(|&s| response_terms(generator, mu, v, q, a, b, s, t))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ResponseGrid {
        t,
        s_points: s_points.to_vec(),
        values: terms.iter().map(ResponseTerms::total).collect(),
        terms,
        a,
        b,
        initial: initial.into(),
    })
}

/// Absolute tolerance of [`integrated_response`].
pub const INTEGRATION_TOL: f64 = 1e-9;

/// `∫_0^t h_s R(t, s) ds` by adaptive Gauss–Kronrod quadrature, split at the
/// schedule's knots.
#[allow(clippy::too_many_arguments)]
pub fn integrated_response(
    generator: &Generator,
    mu: &Distribution,
    v: &Observable,
    q: &Observable,
    a: f64,
    b: f64,
    schedule: &AmplitudeSchedule,
    t: f64,
) -> Result<f64, ResponseError> {
    integrated_response_with(generator, mu, v, q, a, b, schedule, t, INTEGRATION_TOL)
}

#[allow(clippy::too_many_arguments)]
pub fn integrated_response_with(
    generator: &Generator,
    mu: &Distribution,
    v: &Observable,
    q: &Observable,
    a: f64,
    b: f64,
    schedule: &AmplitudeSchedule,
    t: f64,
    abs_tol: f64,
) -> Result<f64, ResponseError> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(ResponseError::InvalidTimes(format!("horizon {t} must be nonnegative")));
    }
    // surface support problems before quadrature swallows them
    schedule.value(0.0)?;
    schedule.value(t)?;
    if t == 0.0 || schedule.is_identically_zero() {
        return Ok(0.0);
    }
    let mut failure: Option<ResponseError> = None;
    let result = integrate_adaptive(
        |s| {
            let value = schedule
                .value(s)
                .map_err(ResponseError::from)
                .and_then(|h| Ok(h * response_exact(generator, mu, v, q, a, b, s, t)?));
            match value {
                Ok(x) => x,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            }
        },
        &schedule.breakpoints(0.0, t),
        abs_tol,
        500,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(result?.value)
}
