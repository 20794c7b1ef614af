mod common;

use common::*;
use neqresponse_core::markov::Observable;
use neqresponse_core::perturbation::{
    check_local_detailed_balance, perturbed_generator, symmetric_prefactor_split, AmplitudeSchedule, PerturbationError,
    PerturbationSpec,
};
use rand::Rng;

#[test]
fn b_zero_rates_entrywise() {
    let mut r = rng(300);
    let g = random_nonequilibrium(&mut r, 4);
    let v = random_observable(&mut r, 4);
    let (beta, h) = (1.3, 0.7);
    let spec = PerturbationSpec::new(v.clone(), beta, 0.0, AmplitudeSchedule::constant(h)).unwrap();
    let perturbed = perturbed_generator(&g, &spec, 0.2).unwrap();
    for (x, y, w) in g.edges() {
        let expected = w * (-beta * h * v[x]).exp();
        assert!((perturbed.rate(x, y) - expected).abs() <= 1e-15 * expected);
    }
}

#[test]
fn force_model_ignores_constant_potential() {
    let g = random_nonequilibrium(&mut rng(301), 5);
    let spec = PerturbationSpec::new(Observable::constant(5, 2.5), 0.4, 0.4, AmplitudeSchedule::constant(0.9)).unwrap();
    let perturbed = perturbed_generator(&g, &spec, 0.0).unwrap();
    for (x, y, w) in g.edges() {
        assert_eq!(perturbed.rate(x, y), w);
    }
}

#[test]
fn local_balance_holds_only_at_beta() {
    let mut r = rng(302);
    let model = random_reversible(&mut r, 6);
    let v = random_observable(&mut r, 6);
    let h = 0.3;
    for _ in 0..5 {
        let a = r.random_range(-1.0..2.0);
        let spec = PerturbationSpec::new(v.clone(), a, model.beta - a, AmplitudeSchedule::constant(h)).unwrap();
        let report = check_local_detailed_balance(&model.generator, &spec, model.beta, 0.0, 1e-12).unwrap();
        assert!(report.satisfied, "{report:?}");
    }
    let off = 0.25;
    let spec = PerturbationSpec::new(v.clone(), 0.5, model.beta - 0.5 + off, AmplitudeSchedule::constant(h)).unwrap();
    let report = check_local_detailed_balance(&model.generator, &spec, model.beta, 0.0, 1e-12).unwrap();
    let max_dv = model
        .generator
        .edges()
        .map(|(x, y, _)| (v[y] - v[x]).abs())
        .fold(0.0, f64::max);
    assert!(!report.satisfied);
    assert!((report.max_residual - off * h * max_dv).abs() < 1e-12);
}

#[test]
fn one_way_ring_has_no_ratio() {
    let g = neqresponse_core::markov::Generator::build(
        neqresponse_core::markov::StateSpace::indexed(3).unwrap(),
        [(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)],
    )
    .unwrap();
    let spec = PerturbationSpec::new(Observable::indicator(3, 0), 0.5, 0.5, AmplitudeSchedule::constant(0.1)).unwrap();
    assert!(matches!(
        check_local_detailed_balance(&g, &spec, 1.0, 0.0, 1e-12),
        Err(PerturbationError::MissingReverseEdge { .. })
    ));
}

#[test]
fn prefactor_split_reconstructs_rates() {
    let mut r = rng(303);
    let g = random_nonequilibrium(&mut r, 6);
    let v = random_observable(&mut r, 6);
    let schedule = AmplitudeSchedule::grid(vec![0.0, 1.0, 2.0], vec![0.2, -0.5, 0.4]).unwrap();
    let spec = PerturbationSpec::new(v, 0.9, -0.2, schedule).unwrap();
    for s in [0.0, 0.3, 1.7] {
        let split = symmetric_prefactor_split(&g, &spec, s).unwrap();
        let perturbed = perturbed_generator(&g, &spec, s).unwrap();
        for (k, &(x, y)) in split.edges.iter().enumerate() {
            let rebuilt = g.rate(x, y) * split.symmetric[k] * split.force[k];
            assert!((rebuilt - perturbed.rate(x, y)).abs() <= 1e-13 * perturbed.rate(x, y));
        }
    }
}

#[test]
fn prefactor_special_cases() {
    let g = biased_ring(2.0, 1.0);
    let v = Observable::new(vec![0.3, -1.0, 2.0]).unwrap();
    let equal = PerturbationSpec::new(v, 0.7, 0.7, AmplitudeSchedule::constant(0.5)).unwrap();
    let split = symmetric_prefactor_split(&g, &equal, 0.0).unwrap();
    assert!(split.symmetric.iter().all(|&p| p == 1.0));

    let (c, h, a, b) = (1.5, 0.4, 0.2, 0.9);
    let flat = PerturbationSpec::new(Observable::constant(3, c), a, b, AmplitudeSchedule::constant(h)).unwrap();
    let split = symmetric_prefactor_split(&g, &flat, 0.0).unwrap();
    assert!(split.force.iter().all(|&f| f == 1.0));
    for &p in &split.symmetric {
        assert!((p - (h * (b - a) * c).exp()).abs() < 1e-15);
    }
}

#[test]
fn schedule_domain_is_enforced() {
    let g = biased_ring(2.0, 1.0);
    let schedule = AmplitudeSchedule::grid(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
    let spec = PerturbationSpec::new(Observable::indicator(3, 0), 0.5, 0.5, schedule).unwrap();
    assert!(matches!(
        perturbed_generator(&g, &spec, 1.5),
        Err(PerturbationError::ScheduleDomain { .. })
    ));
    assert!(matches!(
        AmplitudeSchedule::grid(vec![0.0, 0.0], vec![1.0, 2.0]),
        Err(PerturbationError::InvalidGrid(_))
    ));
}
