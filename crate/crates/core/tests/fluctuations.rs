mod common;

use common::*;
use neqresponse_core::fluctuations::{
    dv_rate_function, dv_restricted, escape_rate_interpretation, perturbed_stationary, prop3_check,
};
use neqresponse_core::markov::{stationary_distribution, Distribution, Observable};
use rand::Rng;

#[test]
fn b_zero_rate_is_quadratic() {
    let mut r = rng(500);
    for _ in 0..3 {
        let g = random_nonequilibrium(&mut r, 5);
        let v = random_observable(&mut r, 5);
        let table = prop3_check(&g, &v, 1.2, 0.0, &[1e-1, 3e-2, 1e-2, 3e-3, 1e-3], 1e-12).unwrap();
        assert!(table.rows.iter().all(|row| row.rhs == 0.0));
        let slope = table.fitted_slope.unwrap();
        assert!((slope - 2.0).abs() <= 0.1, "{slope}");
    }
}

#[test]
fn splits_of_a_random_model() {
    let mut r = rng(501);
    let g = random_nonequilibrium(&mut r, 5);
    let v = random_observable(&mut r, 5);
    let beta = 0.8;
    for (a, b) in [(beta / 2.0, beta / 2.0), (beta, 0.0), (0.0, beta)] {
        let table = prop3_check(&g, &v, a, b, &[1e-1, 3e-2, 1e-2, 3e-3, 1e-3], 1e-12).unwrap();
        let slope = table.fitted_slope.unwrap();
        assert!((slope - 2.0).abs() <= 0.1, "({a},{b}): {slope}");
    }
}

#[test]
fn perturbed_law_approaches_rho_linearly() {
    let mut r = rng(502);
    let model = random_reversible(&mut r, 6);
    let v = random_observable(&mut r, 6);
    let rho = stationary_distribution(&model.generator).unwrap();
    assert_eq!(perturbed_stationary(&model.generator, &v, 0.3, 0.5, 0.0).unwrap(), rho);
    let hs = [1e-1, 1e-2, 1e-3];
    let distances: Vec<f64> = hs
        .iter()
        .map(|&h| {
            perturbed_stationary(&model.generator, &v, 0.3 * model.beta, 0.7 * model.beta, h)
                .unwrap()
                .total_variation(&rho)
                .unwrap()
        })
        .collect();
    assert!((loglog_slope(&hs, &distances) - 1.0).abs() <= 0.1);
}

#[test]
fn escape_rate_expansion_is_third_order() {
    let mut r = rng(503);
    let g = random_nonequilibrium(&mut r, 5);
    let v = random_observable(&mut r, 5);
    let (a, b) = (0.4, 0.6);
    let hs = [1e-1, 3e-2, 1e-2, 3e-3];
    let gaps: Vec<f64> = hs
        .iter()
        .map(|&h| {
            let mu = perturbed_stationary(&g, &v, a, b, h).unwrap();
            let check = escape_rate_interpretation(&g, &mu, &v, b, h).unwrap();
            (check.lhs - check.rhs).abs()
        })
        .collect();
    let slope = loglog_slope(&hs, &gaps);
    assert!((slope - 3.0).abs() <= 0.2, "{slope}");
}

#[test]
fn zero_mass_state_against_barrier_continuation() {
    let g = random_nonequilibrium(&mut rng(504), 4);
    let mu = Distribution::new(vec![0.5, 0.0, 0.3, 0.2]).unwrap();
    let exact = dv_rate_function(&g, &mu, 1e-12).unwrap();
    assert_eq!(exact.minimizer[1], f64::NEG_INFINITY);
    // I(μ_ε) = I(μ) + c √ε + O(ε): extrapolate in √ε.
    let at = |eps: f64| {
        let mut p = mu.probabilities().to_vec();
        p[1] = eps;
        dv_rate_function(&g, &Distribution::from_weights(p).unwrap(), 1e-12).unwrap().rate
    };
    let (coarse, fine) = (at(1e-6), at(1e-8));
    let extrapolated = (10.0 * fine - coarse) / 9.0;
    assert!((extrapolated - exact.rate).abs() < 1e-6, "{extrapolated} vs {}", exact.rate);
}

/// Maximizes `dv_restricted` over `M` by cyclic golden-section search.
fn maximize_restricted(g: &neqresponse_core::markov::Generator, mu: &Distribution, b: f64, h: f64) -> f64 {
    let n = g.n();
    let mut m = vec![0.0; n];
    let value = |m: &[f64]| dv_restricted(g, mu, &Observable::new(m.to_vec()).unwrap(), b, h).unwrap();
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        for k in 1..n {
            let (mut lo, mut hi) = (m[k] - 50.0, m[k] + 50.0);
            let probe = |x: f64, m: &mut Vec<f64>| {
                m[k] = x;
                value(m)
            };
            for _ in 0..80 {
                let x1 = hi - phi * (hi - lo);
                let x2 = lo + phi * (hi - lo);
                if probe(x1, &mut m) < probe(x2, &mut m) {
                    lo = x1;
                } else {
                    hi = x2;
                }
            }
            m[k] = 0.5 * (lo + hi);
        }
    }
    value(&m)
}

#[test]
fn restricted_family_reaches_the_rate() {
    let g = biased_ring(2.0, 1.0);
    let mu = Distribution::new(vec![0.5, 0.2, 0.3]).unwrap();
    let exact = dv_rate_function(&g, &mu, 1e-12).unwrap().rate;
    let best = maximize_restricted(&g, &mu, 0.8, 0.1);
    assert!((best - exact).abs() < 1e-6, "{best} vs {exact}");
    assert_eq!(dv_restricted(&g, &mu, &Observable::constant(3, 0.0), 0.8, 0.1).unwrap(), 0.0);
}

#[test]
fn rate_is_nonnegative() {
    let mut r = rng(505);
    for _ in 0..10 {
        let n = r.random_range(2..10);
        let g = random_nonequilibrium(&mut r, n);
        let mu = random_law(&mut r, n);
        let result = dv_rate_function(&g, &mu, 1e-10).unwrap();
        assert!(result.rate >= -1e-12);
        assert!(result.grad_norm <= 1e-10);
    }
}
