//! Two-time correlations `⟨V(x_s) Q(x_t)⟩_μ` of the unperturbed process and
//! their exact time derivatives.

use super::{check_len, propagate, semigroup_apply, Distribution, Generator, MarkovError, Observable};
use crate::numerics::compensated_sum;

/// Exact partial derivatives of `C(s, t) = ⟨V(x_s) Q(x_t)⟩_μ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationDerivatives {
    pub d_ds: f64,
    pub d_dt: f64,
}

fn check_order(s: f64, t: f64) -> Result<(), MarkovError> {
    if s > t {
        Err(MarkovError::TimeOrder { s, t })
    } else {
        Ok(())
    }
}

struct Pieces {
    mu_s: Distribution,
    /// `e^{(t-s)L} Q`
    evolved: Observable,
}

fn pieces(
    generator: &Generator,
    mu: &Distribution,
    q: &Observable,
    s: f64,
    t: f64,
) -> Result<Pieces, MarkovError> {
    check_order(s, t)?;
    Ok(Pieces {
        mu_s: propagate(generator, mu, s)?,
        evolved: semigroup_apply(generator, q, t - s)?,
    })
}

/// `Σ_x μ_s(x) V(x) (e^{(t-s)L} Q)(x)` for `0 ≤ s ≤ t`.
pub fn correlation(
    generator: &Generator,
    mu: &Distribution,
    v: &Observable,
    q: &Observable,
    s: f64,
    t: f64,
) -> Result<f64, MarkovError> {
    check_len(generator.n(), v.len())?;
    let p = pieces(generator, mu, q, s, t)?;
    let mu_s = p.mu_s.probabilities();
    Ok(compensated_sum(
        (0..generator.n()).map(|x| mu_s[x] * v[x] * p.evolved[x]),
    ))
}

/// Analytic `∂_s` and `∂_t` of [`correlation`]:
///
/// * `∂_t C = Σ μ_s V · L e^{(t-s)L} Q`
/// * `∂_s C = Σ (μ_s L) V · e^{(t-s)L} Q - ∂_t C`
pub fn correlation_derivatives(
    generator: &Generator,
    mu: &Distribution,
    v: &Observable,
    q: &Observable,
    s: f64,
    t: f64,
) -> Result<CorrelationDerivatives, MarkovError> {
    check_len(generator.n(), v.len())?;
    let p = pieces(generator, mu, q, s, t)?;
    let mu_s = p.mu_s.probabilities();
    let mu_dot = generator.row_action_slice(mu_s);
    let l_evolved = generator.apply_l_slice(p.evolved.values());
    let d_dt = compensated_sum((0..generator.n()).map(|x| mu_s[x] * v[x] * l_evolved[x]));
    let flow = compensated_sum((0..generator.n()).map(|x| mu_dot[x] * v[x] * p.evolved[x]));
    Ok(CorrelationDerivatives {
        d_ds: flow - d_dt,
        d_dt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::{stationary_distribution, StateSpace};

    fn ring(p: f64, q: f64) -> Generator {
        let triples = (0..3).flat_map(|i| [(i, (i + 1) % 3, p), (i, (i + 2) % 3, q)]);
        Generator::build(StateSpace::indexed(3).unwrap(), triples).unwrap()
    }

    #[test]
    fn constant_observables_give_one() {
        let g = ring(2.0, 1.0);
        let one = Observable::constant(3, 1.0);
        let mu = Distribution::point_mass(3, 1);
        for &(s, t) in &[(0.0, 0.0), (0.2, 1.7), (3.0, 3.5)] {
            let c = correlation(&g, &mu, &one, &one, s, t).unwrap();
            assert!((c - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn equal_time_contraction() {
        let g = ring(2.0, 1.0);
        let rho = stationary_distribution(&g).unwrap();
        let v = Observable::new(vec![1.0, -2.0, 0.5]).unwrap();
        let q = Observable::new(vec![0.3, 0.1, 4.0]).unwrap();
        let c = correlation(&g, &rho, &v, &q, 0.8, 0.8).unwrap();
        let expected: f64 = (0..3).map(|x| rho[x] * v[x] * q[x]).sum();
        assert!((c - expected).abs() < 1e-13);
    }

    #[test]
    fn stationary_derivatives_cancel() {
        let g = ring(2.0, 1.0);
        let rho = stationary_distribution(&g).unwrap();
        let v = Observable::new(vec![1.0, -2.0, 0.5]).unwrap();
        let q = Observable::new(vec![0.3, 0.1, 4.0]).unwrap();
        let d = correlation_derivatives(&g, &rho, &v, &q, 0.4, 1.3).unwrap();
        assert!((d.d_ds + d.d_dt).abs() < 1e-11);
    }

    #[test]
    fn constant_v_has_no_s_dependence() {
        let g = ring(2.0, 1.0);
        let mu = Distribution::new(vec![0.6, 0.3, 0.1]).unwrap();
        let v = Observable::constant(3, 2.5);
        let q = Observable::new(vec![0.3, 0.1, 4.0]).unwrap();
        let (s, t) = (0.3, 0.9);
        let d = correlation_derivatives(&g, &mu, &v, &q, s, t).unwrap();
        assert!(d.d_ds.abs() < 1e-13);
        let mu_s = propagate(&g, &mu, s).unwrap();
        let lg = g.apply_L(&semigroup_apply(&g, &q, t - s).unwrap()).unwrap();
        let expected = 2.5 * mu_s.expectation(&lg).unwrap();
        assert!((d.d_dt - expected).abs() < 1e-13);
    }

    #[test]
    fn time_order_is_enforced() {
        let g = ring(2.0, 1.0);
        let one = Observable::constant(3, 1.0);
        let mu = Distribution::uniform(3);
        assert!(matches!(
            correlation(&g, &mu, &one, &one, 2.0, 1.0),
            Err(MarkovError::TimeOrder { .. })
        ));
        assert!(matches!(
            correlation_derivatives(&g, &mu, &one, &one, 2.0, 1.0),
            Err(MarkovError::TimeOrder { .. })
        ));
    }
}
