//! Log Radon–Nikodym densities of the perturbed path measure with respect
//! to the unperturbed one, on `[0, T]`.

use super::{PathError, Trajectory};
use crate::markov::{check_len, Generator};
use crate::numerics::{integrate_adaptive, CompensatedSum};
use crate::perturbation::PerturbationSpec;

const SEGMENT_TOL: f64 = 1e-10;

fn check(trajectory: &Trajectory, generator: &Generator, spec: &PerturbationSpec, horizon: f64) -> Result<(), PathError> {
    check_len(generator.n(), spec.potential().len())?;
    if !(horizon.is_finite() && horizon > 0.0 && horizon <= trajectory.horizon) {
        return Err(PathError::InvalidHorizon(horizon));
    }
    spec.schedule().value(0.0)?;
    spec.schedule().value(horizon)?;
    Ok(())
}

/// Pieces of the path clipped to `[0, horizon]`.
fn clipped(trajectory: &Trajectory, horizon: f64) -> impl Iterator<Item = (f64, f64, usize)> + '_ {
    trajectory
        .segments()
        .filter(move |(t0, _, _)| *t0 < horizon)
        .map(move |(t0, t1, x)| (t0, t1.min(horizon), x))
}

fn clipped_transitions(trajectory: &Trajectory, horizon: f64) -> impl Iterator<Item = (f64, usize, usize)> + '_ {
    trajectory.transitions().take_while(move |(t, _, _)| *t <= horizon)
}

/// `Σ_jumps h_s [bV(x_s) - aV(x_{s-})] - ∫_0^T Σ_y W(x_s, y) (e^{h_s [bV(y) - aV(x_s)]} - 1) ds`.
pub fn girsanov_log_density(
    trajectory: &Trajectory,
    generator: &Generator,
    spec: &PerturbationSpec,
    horizon: f64,
) -> Result<f64, PathError> {
    check(trajectory, generator, spec, horizon)?;
    let schedule = spec.schedule();
    if schedule.is_identically_zero() {
        return Ok(0.0);
    }
    let mut total = CompensatedSum::new();
    for (t, from, to) in clipped_transitions(trajectory, horizon) {
        total.add(schedule.value(t)? * spec.exponent(from, to));
    }
    let excess = |x: usize, h: f64| -> f64 {
        generator
            .row(x)
            .map(|(y, w)| w * (h * spec.exponent(x, y)).exp_m1())
            .sum()
    };
    if let Some(h) = schedule.constant_value() {
        for (t0, t1, x) in clipped(trajectory, horizon) {
            total.add(-(t1 - t0) * excess(x, h));
        }
    } else {
        for (t0, t1, x) in clipped(trajectory, horizon) {
            if t1 <= t0 {
                continue;
            }
            let integral = integrate_adaptive(
                |s| schedule.value(s).map_or(f64::NAN, |h| excess(x, h)),
                &schedule.breakpoints(t0, t1),
                SEGMENT_TOL,
                200,
            )?;
            total.add(-integral.value);
        }
    }
    Ok(total.value())
}

/// First-order part in `h`:
/// `(b-a) Σ_jumps h_s V(x_s) + a Σ_jumps h_s [V(x_s) - V(x_{s-})]
///  - b ∫ h_s LV(x_s) ds - (b-a) ∫ h_s escape(x_s) V(x_s) ds`.
pub fn girsanov_log_density_linear(
    trajectory: &Trajectory,
    generator: &Generator,
    spec: &PerturbationSpec,
    horizon: f64,
) -> Result<f64, PathError> {
    check(trajectory, generator, spec, horizon)?;
    let schedule = spec.schedule();
    let (a, b) = (spec.a(), spec.b());
    let v = spec.potential();
    let lv = generator.apply_L(v)?;
    let escape = generator.escape();
    let mut total = CompensatedSum::new();
    for (t, from, to) in clipped_transitions(trajectory, horizon) {
        let h = schedule.value(t)?;
        total.add((b - a) * h * v[to]);
        total.add(a * h * (v[to] - v[from]));
    }
    for (t0, t1, x) in clipped(trajectory, horizon) {
        let area = schedule.integral(t0, t1)?;
        total.add(-area * (b * lv[x] + (b - a) * escape[x] * v[x]));
    }
    Ok(total.value())
}

/// [`girsanov_log_density_linear`] with the `a`-sum over jumps summed by
/// parts, `Σ h_s [V(x_s) - V(x_{s-})] = h_T V(x_T) - h_0 V(x_0) - ∫ ḣ_s V(x_s) ds`.
/// The two agree exactly for continuously differentiable schedules.
pub fn girsanov_log_density_summed(
    trajectory: &Trajectory,
    generator: &Generator,
    spec: &PerturbationSpec,
    horizon: f64,
) -> Result<f64, PathError> {
    check(trajectory, generator, spec, horizon)?;
    let schedule = spec.schedule();
    let (a, b) = (spec.a(), spec.b());
    let v = spec.potential();
    let lv = generator.apply_L(v)?;
    let escape = generator.escape();
    let mut total = CompensatedSum::new();
    for (t, _, to) in clipped_transitions(trajectory, horizon) {
        total.add((b - a) * schedule.value(t)? * v[to]);
    }
    let x_end = trajectory.state_at(horizon);
    total.add(a * (schedule.value(horizon)? * v[x_end] - schedule.value(0.0)? * v[trajectory.x0]));
    for (t0, t1, x) in clipped(trajectory, horizon) {
        let area = schedule.integral(t0, t1)?;
        total.add(-area * (b * lv[x] + (b - a) * escape[x] * v[x]));
        // ∫ ḣ = h(t1) - h(t0)
        let rise = schedule.value(t1)? - schedule.value(t0)?;
        total.add(-a * rise * v[x]);
    }
    Ok(total.value())
}
