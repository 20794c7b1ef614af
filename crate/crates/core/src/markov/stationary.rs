use nalgebra::{DMatrix, DVector};

use super::{stationarity_residual, Distribution, Generator, MarkovError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryOptions {
    /// Residual (relative to the largest outflow `ρ(x)·escape(x)`) above which a
    /// warning is logged.
    pub residual_tol: f64,
    /// Residual above which the solve is reported as failed.
    pub failure_tol: f64,
    /// Condition-number estimate above which a warning is logged.
    pub condition_warn: f64,
    pub refinement_steps: usize,
}

impl Default for StationaryOptions {
    fn default() -> Self {
        Self {
            residual_tol: 1e-12,
            failure_tol: 1e-6,
            condition_warn: 1e12,
            refinement_steps: 2,
        }
    }
}

pub fn stationary_distribution(generator: &Generator) -> Result<Distribution, MarkovError> {
    stationary_distribution_with(generator, &StationaryOptions::default())
}

/// Solves `ρL = 0`, `Σρ = 1` as a dense linear system: the transposed
/// generator with its last equation replaced by the normalization row.
pub fn stationary_distribution_with(
    generator: &Generator,
    opts: &StationaryOptions,
) -> Result<Distribution, MarkovError> {
    let n = generator.n();
    let mut a = generator.dense_l().transpose();
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;

    let lu = a.clone().lu();
    let mut rho = lu
        .solve(&rhs)
        .ok_or_else(|| MarkovError::SolverFailure("singular stationary system".into()))?;
    for _ in 0..opts.refinement_steps {
        let residual = &rhs - &a * &rho;
        match lu.solve(&residual) {
            Some(correction) => rho += correction,
            None => break,
        }
    }
    if rho.iter().any(|v| !v.is_finite()) {
        return Err(MarkovError::SolverFailure(
            "non-finite stationary solution".into(),
        ));
    }

    let condition = condition_estimate(&a, &lu);
    if condition > opts.condition_warn {
        log::warn!("stationary solve: condition number estimate {condition:.3e}");
    }

    let most_negative = rho.iter().cloned().fold(0.0, f64::min);
    if most_negative < -1e-10 {
        return Err(MarkovError::SolverFailure(format!(
            "stationary solution has negative entry {most_negative:e}"
        )));
    }
    let weights: Vec<f64> = rho.iter().map(|v| v.max(0.0)).collect();
    let rho = Distribution::from_weights(weights)?;

    let residual = stationarity_residual(generator, &rho)?;
    if residual > opts.failure_tol {
        return Err(MarkovError::SolverFailure(format!(
            "stationarity residual {residual:e} exceeds {:e}",
            opts.failure_tol
        )));
    }
    if residual > opts.residual_tol {
        log::warn!("stationary solve: residual {residual:e} above {:e}", opts.residual_tol);
    }
    Ok(rho)
}

/// Cheap lower-bound estimate of `‖A‖₁ ‖A⁻¹‖₁` from a handful of solves.
fn condition_estimate(a: &DMatrix<f64>, lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>) -> f64 {
    let n = a.nrows();
    let norm_a = (0..n)
        .map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let probes = [
        DVector::from_element(n, 1.0),
        DVector::from_fn(n, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 }),
        DVector::from_fn(n, |i, _| ((i as f64 + 1.0) * 0.618_033_988_75).fract() - 0.5),
    ];
    let mut inv_norm: f64 = 0.0;
    for probe in &probes {
        let denom = probe.iter().map(|v| v.abs()).sum::<f64>();
        if let Some(x) = lu.solve(probe) {
            inv_norm = inv_norm.max(x.iter().map(|v| v.abs()).sum::<f64>() / denom);
        }
    }
    norm_a * inv_norm
}
