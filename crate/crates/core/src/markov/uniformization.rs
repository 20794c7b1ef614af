//! `e^{tL}` by uniformization.
//!
//! With `Λ ≥ max escape`, `P = I + L/Λ` is a stochastic matrix and
//! `e^{tL} = Σ_k Poisson(k; Λt) P^k`. Every term is nonnegative for the row
//! action, so probability vectors stay nonnegative up to rounding. Long
//! horizons are split into chunks with Poisson mean at most
//! `max_chunk_mean` so the leading weight `e^{-Λt}` never underflows.

use super::{check_len, check_time, Distribution, Generator, MarkovError, Observable};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformizationOptions {
    /// `Λ = factor · max escape`.
    pub factor: f64,
    /// Poisson tail mass discarded per chunk.
    pub tail_mass: f64,
    pub max_chunk_mean: f64,
}

impl Default for UniformizationOptions {
    fn default() -> Self {
        Self {
            factor: 1.05,
            tail_mass: 1e-13,
            max_chunk_mean: 100.0,
        }
    }
}

#[derive(Clone, Copy)]
enum Action {
    Row,
    Column,
}

fn step(generator: &Generator, lambda: f64, action: Action, v: &[f64]) -> Vec<f64> {
    let lv = match action {
        Action::Row => generator.row_action_slice(v),
        Action::Column => generator.apply_l_slice(v),
    };
    v.iter().zip(lv).map(|(a, b)| a + b / lambda).collect()
}

fn uniformize(
    generator: &Generator,
    v: &[f64],
    t: f64,
    action: Action,
    opts: &UniformizationOptions,
) -> Vec<f64> {
    let lambda = opts.factor * generator.max_escape();
    if t == 0.0 || lambda == 0.0 {
        return v.to_vec();
    }
    let total_mean = lambda * t;
    let chunks = (total_mean / opts.max_chunk_mean).ceil().max(1.0) as usize;
    let mean = total_mean / chunks as f64;
    let max_terms = (mean + 20.0 * mean.sqrt() + 50.0).ceil() as usize;

    let mut current = v.to_vec();
    for _ in 0..chunks {
        let mut weight = (-mean).exp();
        let mut cumulative = weight;
        let mut acc: Vec<f64> = current.iter().map(|x| weight * x).collect();
        let mut term = current;
        let mut k = 0;
        while cumulative < 1.0 - opts.tail_mass && k < max_terms {
            k += 1;
            term = step(generator, lambda, action, &term);
            weight *= mean / k as f64;
            cumulative += weight;
            for (a, t) in acc.iter_mut().zip(&term) {
                *a += weight * t;
            }
        }
        // condition on the retained Poisson mass so constants and total
        // probability are preserved exactly
        current = acc.into_iter().map(|a| a / cumulative).collect();
    }
    current
}

/// `μ_t = μ_0 e^{tL}` with default options.
pub fn propagate(generator: &Generator, mu0: &Distribution, t: f64) -> Result<Distribution, MarkovError> {
    propagate_with(generator, mu0, t, &UniformizationOptions::default())
}

pub fn propagate_with(
    generator: &Generator,
    mu0: &Distribution,
    t: f64,
    opts: &UniformizationOptions,
) -> Result<Distribution, MarkovError> {
    check_time(t)?;
    check_len(generator.n(), mu0.len())?;
    if t == 0.0 {
        return Ok(mu0.clone());
    }
    let mut p = uniformize(generator, mu0.probabilities(), t, Action::Row, opts);
    let most_negative = p.iter().cloned().fold(0.0, f64::min);
    if most_negative < -1e-14 {
        log::warn!("propagate: clamping negative probability {most_negative:e}");
    }
    for v in &mut p {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Distribution::from_weights(p)
}

/// `e^{tL} f` with default options.
pub fn semigroup_apply(generator: &Generator, f: &Observable, t: f64) -> Result<Observable, MarkovError> {
    semigroup_apply_with(generator, f, t, &UniformizationOptions::default())
}

pub fn semigroup_apply_with(
    generator: &Generator,
    f: &Observable,
    t: f64,
    opts: &UniformizationOptions,
) -> Result<Observable, MarkovError> {
    check_time(t)?;
    check_len(generator.n(), f.len())?;
    if t == 0.0 {
        return Ok(f.clone());
    }
    Ok(Observable::from_vec_unchecked(uniformize(
        generator,
        f.values(),
        t,
        Action::Column,
        opts,
    )))
}
