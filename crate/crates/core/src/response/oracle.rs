//! Finite-difference oracle: integrate the perturbed master equation
//! `dμ/dt = μ L_t` with classical RK4 and difference against the
//! unperturbed run on the same step grid.

use super::ResponseError;
use crate::markov::{check_len, check_time, propagate, semigroup_apply, Distribution, Generator, Observable};
use crate::numerics::{compensated_sum, dot};
use crate::perturbation::{perturbed_generator_constant, max_perturbed_escape, AmplitudeSchedule, PerturbationSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdOptions {
    /// Amplitude multiplier applied to the schedule.
    pub h_scale: f64,
    /// `‖L‖ dt` per step; `0.0104` keeps the RK4 local error near `1e-12`.
    pub step_norm: f64,
    pub max_steps: usize,
}

impl Default for FdOptions {
    fn default() -> Self {
        Self {
            h_scale: 1e-5,
            step_norm: 0.0104,
            max_steps: 50_000_000,
        }
    }
}

/// Difference quotients at `h` and at `10 h`, and their two-point
/// Richardson extrapolation `(10 v(h) - v(10 h)) / 9`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdEstimate {
    pub h_scale: f64,
    pub value: f64,
    pub coarse_value: f64,
    pub extrapolated: f64,
}

struct Edges {
    from: Vec<usize>,
    to: Vec<usize>,
    rate: Vec<f64>,
    exponent: Vec<f64>,
}

impl Edges {
    fn new(generator: &Generator, potential: &Observable, a: f64, b: f64) -> Self {
        let mut edges = Edges {
            from: Vec::with_capacity(generator.edge_count()),
            to: Vec::with_capacity(generator.edge_count()),
            rate: Vec::with_capacity(generator.edge_count()),
            exponent: Vec::with_capacity(generator.edge_count()),
        };
        for (x, y, w) in generator.edges() {
            edges.from.push(x);
            edges.to.push(y);
            edges.rate.push(w);
            edges.exponent.push(b * potential[y] - a * potential[x]);
        }
        edges
    }

    fn rates_at(&self, h: f64, out: &mut [f64]) {
        for ((r, w), c) in out.iter_mut().zip(&self.rate).zip(&self.exponent) {
            *r = w * (h * c).exp();
        }
    }

    fn flow(&self, rates: &[f64], mu: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for e in 0..rates.len() {
            let j = mu[self.from[e]] * rates[e];
            out[self.from[e]] -= j;
            out[self.to[e]] += j;
        }
    }
}

/// RK4 over `[0, t]` with amplitude `h(s)`, segments split at `breaks`.
fn integrate_master(
    edges: &Edges,
    mu0: &[f64],
    breaks: &[f64],
    dt_max: f64,
    max_steps: usize,
    amplitude: &dyn Fn(f64) -> Result<f64, ResponseError>,
) -> Result<Vec<f64>, ResponseError> {
    let n = mu0.len();
    let m = edges.rate.len();
    let mut mu = mu0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut stage = vec![0.0; n];
    let (mut r0, mut r_half, mut r1) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    let mut steps_taken = 0usize;
    for window in breaks.windows(2) {
        let (lo, hi) = (window[0], window[1]);
        if hi <= lo {
            continue;
        }
        let steps = ((hi - lo) / dt_max).ceil().max(1.0);
        if !steps.is_finite() || steps as usize > max_steps.saturating_sub(steps_taken) {
            return Err(ResponseError::StepSizeUnderflow(format!(
                "interval [{lo}, {hi}] needs {steps} steps, limit {max_steps}"
            )));
        }
        let steps = steps as usize;
        steps_taken += steps;
        let dt = (hi - lo) / steps as f64;
        edges.rates_at(amplitude(lo)?, &mut r0);
        for i in 0..steps {
            let s = lo + dt * i as f64;
            let s1 = if i + 1 == steps { hi } else { lo + dt * (i + 1) as f64 };
            edges.rates_at(amplitude(s + 0.5 * dt)?, &mut r_half);
            edges.rates_at(amplitude(s1)?, &mut r1);
            edges.flow(&r0, &mu, &mut k1);
            for x in 0..n {
                stage[x] = mu[x] + 0.5 * dt * k1[x];
            }
            edges.flow(&r_half, &stage, &mut k2);
            for x in 0..n {
                stage[x] = mu[x] + 0.5 * dt * k2[x];
            }
            edges.flow(&r_half, &stage, &mut k3);
            for x in 0..n {
                stage[x] = mu[x] + dt * k3[x];
            }
            edges.flow(&r1, &stage, &mut k4);
            for x in 0..n {
                mu[x] += dt / 6.0 * (k1[x] + 2.0 * k2[x] + 2.0 * k3[x] + k4[x]);
            }
            std::mem::swap(&mut r0, &mut r1);
        }
    }
    Ok(mu)
}

/// `(⟨Q(t)⟩^{εh} - ⟨Q(t)⟩) / ε` with `ε = h_scale`, using the default
/// step control.
#[allow(clippy::too_many_arguments)]
pub fn response_fd_oracle(
    generator: &Generator,
    mu: &Distribution,
    v: &Observable,
    q: &Observable,
    a: f64,
    b: f64,
    schedule: &AmplitudeSchedule,
    t: f64,
    h_scale: f64,
) -> Result<FdEstimate, ResponseError> {
    let options = FdOptions {
        h_scale,
        ..FdOptions::default()
    };
    response_fd_oracle_with(generator, mu, v, q, a, b, schedule, t, &options)
}

#[allow(clippy::too_many_arguments)]
pub fn response_fd_oracle_with(
    generator: &Generator,
    mu: &Distribution,
    v: &Observable,
    q: &Observable,
    a: f64,
    b: f64,
    schedule: &AmplitudeSchedule,
    t: f64,
    options: &FdOptions,
) -> Result<FdEstimate, ResponseError> {
    check_time(t)?;
    check_len(generator.n(), mu.len())?;
    check_len(generator.n(), v.len())?;
    check_len(generator.n(), q.len())?;
    let eps = options.h_scale;
    if !(eps.is_finite() && eps > 0.0) {
        return Err(ResponseError::InvalidTimes(format!("h_scale {eps} must be positive")));
    }
    schedule.value(0.0)?;
    schedule.value(t)?;
    let coarse = schedule.scaled(10.0 * eps);
    let spec = PerturbationSpec::new(v.clone(), a, b, coarse.clone())?;
    let lambda = max_perturbed_escape(generator, &spec, 0.0, t)?.max(generator.max_escape());
    // the row action has 1-norm at most twice the largest escape rate
    let dt_max = options.step_norm / (2.0 * lambda);
    if !(dt_max.is_finite() && dt_max > 0.0) {
        return Err(ResponseError::StepSizeUnderflow(format!("step {dt_max} for rate bound {lambda}")));
    }
    let breaks = schedule.breakpoints(0.0, t);
    let edges = Edges::new(generator, v, a, b);
    let mu0 = mu.probabilities();
    let run = |scale: f64| {
        integrate_master(&edges, mu0, &breaks, dt_max, options.max_steps, &|s| {
            Ok(scale * schedule.value(s)?)
        })
    };
    let base = run(0.0)?;
    let fine = run(eps)?;
    let wide = run(10.0 * eps)?;
    let diff = |p: &[f64]| compensated_sum(p.iter().zip(&base).zip(q.values()).map(|((p, b), q)| (p - b) * q));
    let value = diff(&fine) / eps;
    let coarse_value = diff(&wide) / (10.0 * eps);
    Ok(FdEstimate {
        h_scale: eps,
        value,
        coarse_value,
        extrapolated: (10.0 * value - coarse_value) / 9.0,
    })
}

/// Pointwise kernel by a central difference in the generator,
/// `Σ_x [μ_s (L_ε - L_{-ε})](x) (e^{(t-s)L} Q)(x) / (2ε)`.
#[allow(clippy::too_many_arguments)]
pub fn response_kernel_fd(
    generator: &Generator,
    mu: &Distribution,
    v: &Observable,
    q: &Observable,
    a: f64,
    b: f64,
    s: f64,
    t: f64,
    h_scale: f64,
) -> Result<f64, ResponseError> {
    if !(s >= 0.0 && s <= t) {
        return Err(crate::markov::MarkovError::TimeOrder { s, t }.into());
    }
    let mu_s = propagate(generator, mu, s)?;
    let g = semigroup_apply(generator, q, t - s)?;
    let plus = perturbed_generator_constant(generator, v, a, b, h_scale)?;
    let minus = perturbed_generator_constant(generator, v, a, b, -h_scale)?;
    let up = plus.row_action(mu_s.probabilities())?;
    let down = minus.row_action(mu_s.probabilities())?;
    let delta: Vec<f64> = up.iter().zip(&down).map(|(u, d)| u - d).collect();
    Ok(dot(&delta, g.values()) / (2.0 * h_scale))
}
