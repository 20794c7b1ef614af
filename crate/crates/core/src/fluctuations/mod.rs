//! Dynamical fluctuations of the occupation measure and their relation to
//! the stationary response under small constant perturbations.

mod dv;

use rayon::prelude::*;
use thiserror::Error;

pub use dv::{dv_gradient, dv_objective, dv_rate_function, dv_rate_function_with, DvOptions, DvResult};

use crate::markov::{check_len, stationary_distribution, Distribution, Generator, MarkovError, Observable};
use crate::numerics::{compensated_sum, loglog_slope, CompensatedSum};
use crate::perturbation::{perturbed_generator_constant, PerturbationError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FluctuationError {
    #[error("MaxIterations: Newton stopped after {iterations} iterations with gradient norm {grad_norm:e}")]
    MaxIterations { iterations: usize, grad_norm: f64 },
    #[error("SolverFailure: Hessian is not positive definite even with jitter")]
    Singular,
    #[error("InvalidParameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Markov(#[from] MarkovError),
    #[error(transparent)]
    Perturbation(#[from] PerturbationError),
}

/// `-F((bh/2) M)`: the variational expression restricted to
/// `g = exp(bhM/2)`.
pub fn dv_restricted(
    generator: &Generator,
    mu: &Distribution,
    m: &Observable,
    b: f64,
    h: f64,
) -> Result<f64, FluctuationError> {
    check_len(generator.n(), m.len())?;
    let u: Vec<f64> = m.values().iter().map(|v| 0.5 * b * h * v).collect();
    Ok(-dv_objective(generator, mu, &u)?)
}

/// Stationary law of the constant-amplitude perturbed generator.
pub fn perturbed_stationary(
    generator: &Generator,
    v: &Observable,
    a: f64,
    b: f64,
    h: f64,
) -> Result<Distribution, FluctuationError> {
    let perturbed = perturbed_generator_constant(generator, v, a, b, h)?;
    Ok(stationary_distribution(&perturbed)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prop3Row {
    pub h: f64,
    /// `I(μ^h)` for the unperturbed generator.
    pub rate: f64,
    /// `-(bh/4) Σ_x μ^h(x) LV(x)`.
    pub rhs: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prop3Table {
    pub a: f64,
    pub b: f64,
    pub rows: Vec<Prop3Row>,
    /// Log-log slope of `error` against `h` over rows with `h > 0` and
    /// `error > 0`.
    pub fitted_slope: Option<f64>,
}

/// Compares `I(μ^h)` with `-(bh/4) Σ μ^h LV` over `h_list`.
pub fn prop3_check(
    generator: &Generator,
    v: &Observable,
    a: f64,
    b: f64,
    h_list: &[f64],
    tol: f64,
) -> Result<Prop3Table, FluctuationError> {
    check_len(generator.n(), v.len())?;
    if let Some(h) = h_list.iter().find(|h| !(h.is_finite() && **h >= 0.0)) {
        return Err(FluctuationError::InvalidParameter(format!("h = {h} must be finite and nonnegative")));
    }
    let lv = generator.apply_L(v)?;
    let rows = h_list
        .par_iter()
        .map(|&h| -> Result<Prop3Row, FluctuationError> {
            let mu_h = perturbed_stationary(generator, v, a, b, h)?;
            let rate = dv_rate_function(generator, &mu_h, tol)?.rate;
            let rhs = -0.25 * b * h * compensated_sum((0..generator.n()).map(|x| mu_h[x] * lv[x]));
            Ok(Prop3Row {
                h,
                rate,
                rhs,
                error: (rate - rhs).abs(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.h > 0.0 && r.error > 0.0)
        .map(|r| (r.h, r.error))
        .unzip();
    let fitted_slope = if xs.len() >= 2 { loglog_slope(&xs, &ys) } else { None };
    Ok(Prop3Table {
        a,
        b,
        rows,
        fitted_slope,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EscapeRateCheck {
    /// `Σ_{x,y} μ(x) W(x,y) [1 - e^{bh[V(y) - V(x)]/2}]`
    pub lhs: f64,
    /// `-(bh/2) Σ μ(x)W(x,y)[V(y) - V(x)] - (b²h²/8) Σ ρ(x)W(x,y)[V(y) - V(x)]²`
    pub rhs: f64,
}

/// Second-order expansion of the escape-rate difference, with `ρ` in the
/// quadratic term. The gap is `O(h³)` when `μ - ρ = O(h)`.
pub fn escape_rate_interpretation(
    generator: &Generator,
    mu: &Distribution,
    v: &Observable,
    b: f64,
    h: f64,
) -> Result<EscapeRateCheck, FluctuationError> {
    check_len(generator.n(), mu.len())?;
    check_len(generator.n(), v.len())?;
    let rho = stationary_distribution(generator)?;
    let (mut lhs, mut first, mut second) = (CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new());
    for (x, y, w) in generator.edges() {
        let dv = v[y] - v[x];
        lhs.add(-mu[x] * w * (0.5 * b * h * dv).exp_m1());
        first.add(mu[x] * w * dv);
        second.add(rho[x] * w * dv * dv);
    }
    Ok(EscapeRateCheck {
        lhs: lhs.value(),
        rhs: -0.5 * b * h * first.value() - b * b * h * h / 8.0 * second.value(),
    })
}
