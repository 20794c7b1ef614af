use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{girsanov_log_density, girsanov_log_density_linear, sample_path_with, sample_state, PathError, RngStream};
use crate::markov::{check_len, propagate, semigroup_apply, Distribution, Generator, Observable};
use crate::numerics::{compensated_sum, integrate_adaptive, CompensatedSum};
use crate::perturbation::PerturbationSpec;

pub const MIN_SAMPLES: usize = 100;

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

/// Compensated mean and `sd / √n` of `values`, summed in slice order.
pub fn mc_mean(values: &[f64]) -> McEstimate {
    let n = values.len();
    if n == 0 {
        return McEstimate {
            estimate: f64::NAN,
            std_error: f64::NAN,
            n_samples: 0,
        };
    }
    let mean = compensated_sum(values.iter().copied()) / n as f64;
    let var = if n > 1 {
        compensated_sum(values.iter().map(|v| (v - mean) * (v - mean))) / (n - 1) as f64
    } else {
        0.0
    };
    McEstimate {
        estimate: mean,
        std_error: (var / n as f64).sqrt(),
        n_samples: n,
    }
}

/// Runs `f` on stream `i` of `seed` for `i in 0..n`, in parallel, keeping
/// the output in stream order.
pub fn ensemble<T, F>(n: usize, seed: u64, f: F) -> Result<Vec<T>, PathError>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> Result<T, PathError> + Sync,
{
    (0..n as u64)
        .into_par_iter()
        .map(|i| f(&mut RngStream::new(seed, i).rng()))
        .collect()
}

fn check_samples(n: usize) -> Result<(), PathError> {
    if n < MIN_SAMPLES {
        Err(PathError::TooFewSamples { found: n, min: MIN_SAMPLES })
    } else {
        Ok(())
    }
}

/// Monte Carlo `⟨V(x_s) Q(x_t)⟩_μ` from unperturbed paths.
#[allow(clippy::too_many_arguments)]
pub fn mc_correlation(
    generator: &Generator,
    mu: &Distribution,
    v: &Observable,
    q: &Observable,
    s: f64,
    t: f64,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate, PathError> {
    check_len(generator.n(), mu.len())?;
    check_len(generator.n(), v.len())?;
    check_len(generator.n(), q.len())?;
    if !(s >= 0.0 && s <= t) {
        return Err(crate::markov::MarkovError::TimeOrder { s, t }.into());
    }
    let values = ensemble(n_samples, seed, |rng| {
        let x0 = sample_state(mu, rng);
        let path = sample_path_with(generator, x0, t.max(f64::MIN_POSITIVE), rng)?;
        Ok(v[path.state_at(s)] * q[path.state_at(t)])
    })?;
    Ok(mc_mean(&values))
}

/// `⟨Q(x_T)⟩^h - ⟨Q(x_T)⟩` to first order in `h`, as the mean of the
/// linearized log-density times the centered `Q(x_T)` over unperturbed paths.
#[allow(clippy::too_many_arguments)]
pub fn mc_response(
    generator: &Generator,
    mu: &Distribution,
    spec: &PerturbationSpec,
    q: &Observable,
    horizon: f64,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate, PathError> {
    check_samples(n_samples)?;
    check_len(generator.n(), mu.len())?;
    check_len(generator.n(), q.len())?;
    let pairs = ensemble(n_samples, seed, |rng| {
        let x0 = sample_state(mu, rng);
        let path = sample_path_with(generator, x0, horizon, rng)?;
        let density = girsanov_log_density_linear(&path, generator, spec, horizon)?;
        Ok((density, q[path.final_state()]))
    })?;
    let q_bar = compensated_sum(pairs.iter().map(|p| p.1)) / n_samples as f64;
    let centered: Vec<f64> = pairs.iter().map(|(d, q)| d * (q - q_bar)).collect();
    Ok(mc_mean(&centered))
}

/// Mean of `exp(log-density)` over unperturbed paths; equals one.
pub fn girsanov_normalization(
    generator: &Generator,
    mu: &Distribution,
    spec: &PerturbationSpec,
    horizon: f64,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate, PathError> {
    check_samples(n_samples)?;
    check_len(generator.n(), mu.len())?;
    let weights = ensemble(n_samples, seed, |rng| {
        let x0 = sample_state(mu, rng);
        let path = sample_path_with(generator, x0, horizon, rng)?;
        Ok(girsanov_log_density(&path, generator, spec, horizon)?.exp())
    })?;
    Ok(mc_mean(&weights))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpMeasureCheck {
    /// Monte Carlo `⟨Σ_{jumps s ≤ T} h_s V(x_s) Q(x_T)⟩_μ`.
    pub lhs: f64,
    /// `∫_0^T h_s Σ_{x,y} μ_s(y) W(y,x) V(x) (e^{(T-s)L}Q)(x) ds`.
    pub rhs: f64,
    pub std_error: f64,
}

/// Compensator identity for the jump measure: the sum over jumps against
/// its intensity.
#[allow(clippy::too_many_arguments)]
pub fn jump_measure_identity_check(
    generator: &Generator,
    mu: &Distribution,
    spec: &PerturbationSpec,
    q: &Observable,
    horizon: f64,
    n_samples: usize,
    seed: u64,
) -> Result<JumpMeasureCheck, PathError> {
    check_samples(n_samples)?;
    check_len(generator.n(), mu.len())?;
    check_len(generator.n(), q.len())?;
    let v = spec.potential();
    check_len(generator.n(), v.len())?;
    let schedule = spec.schedule();
    let samples = ensemble(n_samples, seed, |rng| {
        let x0 = sample_state(mu, rng);
        let path = sample_path_with(generator, x0, horizon, rng)?;
        let mut sum = CompensatedSum::new();
        for &(t, x) in &path.jumps {
            sum.add(schedule.value(t)? * v[x]);
        }
        Ok(sum.value() * q[path.final_state()])
    })?;
    let mc = mc_mean(&samples);

    let escape = generator.escape();
    let mut failure: Option<PathError> = None;
    let integrand = |s: f64| -> Result<f64, PathError> {
        let h = schedule.value(s)?;
        let mu_s = propagate(generator, mu, s)?;
        let flow = generator.row_action(mu_s.probabilities())?;
        let g = semigroup_apply(generator, q, horizon - s)?;
        // inflow into x: Σ_y μ_s(y) W(y, x) = (μ_s L)(x) + μ_s(x) escape(x)
        Ok(h * compensated_sum((0..generator.n()).map(|x| (flow[x] + mu_s[x] * escape[x]) * v[x] * g[x])))
    };
    let rhs = integrate_adaptive(
        |s| match integrand(s) {
            Ok(value) => value,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        &schedule.breakpoints(0.0, horizon),
        1e-10,
        500,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(JumpMeasureCheck {
        lhs: mc.estimate,
        rhs: rhs?.value,
        std_error: mc.std_error,
    })
}
