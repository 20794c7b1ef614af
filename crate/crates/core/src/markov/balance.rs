use nalgebra::DMatrix;

use super::{check_len, Distribution, Generator, MarkovError};

/// Outcome of a detailed-balance scan.
#[derive(Debug, Clone, PartialEq)]
pub struct DetailedBalanceReport {
    pub is_reversible: bool,
    /// `max |ρ(x)W(x,y) - ρ(y)W(y,x)|`, normalized by `max ρ(x)W(x,y)`.
    pub max_violation: f64,
    pub worst_edge: (usize, usize),
}

pub fn check_detailed_balance(
    generator: &Generator,
    rho: &Distribution,
    tol: f64,
) -> Result<DetailedBalanceReport, MarkovError> {
    check_len(generator.n(), rho.len())?;
    let normalizer = generator
        .edges()
        .map(|(x, _, w)| rho[x] * w)
        .fold(0.0, f64::max);
    let mut max_violation = 0.0;
    let mut worst_edge = (0, 0);
    for (x, y, w) in generator.edges() {
        let violation = (rho[x] * w - rho[y] * generator.rate(y, x)).abs();
        if violation > max_violation {
            max_violation = violation;
            worst_edge = (x, y);
        }
    }
    if normalizer > 0.0 {
        max_violation /= normalizer;
    }
    Ok(DetailedBalanceReport {
        is_reversible: max_violation <= tol,
        max_violation,
        worst_edge,
    })
}

/// `max_x |(pL)(x)| / max_x p(x)·escape(x)`: zero exactly when `p` is stationary.
pub fn stationarity_residual(generator: &Generator, p: &Distribution) -> Result<f64, MarkovError> {
    let flow = generator.row_action(p.probabilities())?;
    let normalizer = p
        .probabilities()
        .iter()
        .zip(generator.escape())
        .map(|(p, e)| p * e)
        .fold(0.0, f64::max);
    let worst = flow.iter().map(|v| v.abs()).fold(0.0, f64::max);
    Ok(if normalizer > 0.0 { worst / normalizer } else { worst })
}

/// Adjoint of `L` in the `ρ`-weighted scalar product,
/// `L*(x, y) = ρ(y) L(y, x) / ρ(x)`.
pub fn adjoint_in_rho(generator: &Generator, rho: &Distribution) -> Result<DMatrix<f64>, MarkovError> {
    check_len(generator.n(), rho.len())?;
    if let Some(x) = rho.probabilities().iter().position(|p| *p <= 0.0) {
        return Err(MarkovError::ZeroProbabilityState(x));
    }
    let n = generator.n();
    let mut adjoint = DMatrix::zeros(n, n);
    for (y, x, w) in generator.edges() {
        adjoint[(x, y)] = rho[y] * w / rho[x];
    }
    for x in 0..n {
        adjoint[(x, x)] = -generator.escape()[x];
    }
    Ok(adjoint)
}
