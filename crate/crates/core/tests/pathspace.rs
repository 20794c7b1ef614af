mod common;

use std::io::Read;

use common::*;
use nalgebra::DVector;
use neqresponse_core::fluctuations::dv_rate_function;
use neqresponse_core::markov::{correlation, stationary_distribution, Distribution, Generator, Observable, StateSpace};
use neqresponse_core::pathspace::{
    ensemble, girsanov_normalization, jump_measure_identity_check, mc_correlation, mc_mean, mc_response,
    occupation_measure, sample_path, sample_path_inhomogeneous, sample_path_with, sample_state, write_trajectory_csv,
    PathError, RngStream, Trajectory,
};
use neqresponse_core::perturbation::{perturbed_generator, perturbed_generator_constant, AmplitudeSchedule, PerturbationSpec};
use neqresponse_core::response::integrated_response;

fn two_state() -> Generator {
    Generator::build(StateSpace::indexed(2).unwrap(), [(0, 1, 1.0), (1, 0, 2.0)]).unwrap()
}

fn four_state() -> Generator {
    random_nonequilibrium(&mut rng(200), 4)
}

/// Two-sample Kolmogorov–Smirnov statistic.
fn ks_statistic(mut xs: Vec<f64>, mut ys: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < xs.len() && j < ys.len() {
        let t = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= t {
            i += 1;
        }
        while j < ys.len() && ys[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

fn ks_accepts(xs: Vec<f64>, ys: Vec<f64>) -> bool {
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    ks_statistic(xs, ys) <= 1.628 * ((n + m) / (n * m)).sqrt()
}

fn censored_first_jump(path: &Trajectory) -> f64 {
    path.first_jump_time().unwrap_or(path.horizon)
}

#[test]
fn jump_count_is_poisson() {
    let g = biased_ring(1.5, 0.5);
    let horizon = 3.0;
    let counts = ensemble(100_000, 1, |r| Ok(sample_path_with(&g, 0, horizon, r)?.jump_count() as f64)).unwrap();
    let est = mc_mean(&counts);
    assert!((est.estimate - 6.0).abs() <= 3.0 * est.std_error, "{est:?}");
    // Poisson: variance equals the mean.
    let var = est.std_error.powi(2) * est.n_samples as f64;
    assert!((var / 6.0 - 1.0).abs() < 0.02);
}

#[test]
fn ergodic_fraction_of_two_state_chain() {
    let horizon = 1e4;
    let path = sample_path(&two_state(), 0, horizon, &RngStream::new(2, 0)).unwrap();
    let occupation = occupation_measure(&path, 2).unwrap();
    // Telegraph process: Var of the time average ≈ 2 ρ0 ρ1 / ((k01 + k10) T).
    let sigma = (2.0 * (2.0 / 9.0) / 3.0 / horizon).sqrt();
    assert!((occupation[0] - 2.0 / 3.0).abs() <= 3.0 * sigma);
    assert_eq!(occupation[0] + occupation[1], 1.0);
}

#[test]
fn rates_are_recovered_from_one_long_path() {
    let g = random_nonequilibrium(&mut rng(3), 5);
    let path = sample_path(&g, 0, 2e4, &RngStream::new(3, 0)).unwrap();
    let mut time = [0.0; 5];
    for (t0, t1, x) in path.segments() {
        time[x] += t1 - t0;
    }
    let mut counts = [[0.0f64; 5]; 5];
    for (_, x, y) in path.transitions() {
        counts[x][y] += 1.0;
    }
    for (x, y, w) in g.edges() {
        let estimate = counts[x][y] / time[x];
        let sigma = counts[x][y].sqrt() / time[x];
        assert!((estimate - w).abs() <= 3.0 * sigma, "{x}->{y}: {estimate} vs {w}");
    }
}

#[test]
fn zero_schedule_thinning_matches_plain_sampling() {
    let g = four_state();
    let spec = PerturbationSpec::new(Observable::new(vec![1.0, 0.0, -1.0, 0.5]).unwrap(), 0.5, 0.5, AmplitudeSchedule::zero())
        .unwrap();
    let plain: Vec<f64> = (0..10_000)
        .map(|i| censored_first_jump(&sample_path(&g, 1, 2.0, &RngStream::new(4, i)).unwrap()))
        .collect();
    let thinned: Vec<f64> = (0..10_000)
        .map(|i| censored_first_jump(&sample_path_inhomogeneous(&g, &spec, 1, 2.0, &RngStream::new(5, i)).unwrap()))
        .collect();
    assert!(ks_accepts(plain, thinned));
}

#[test]
fn constant_schedule_thinning_matches_frozen_generator() {
    let g = four_state();
    let v = Observable::new(vec![1.0, 0.0, -1.0, 0.5]).unwrap();
    let spec = PerturbationSpec::new(v.clone(), 0.3, 0.7, AmplitudeSchedule::constant(0.8)).unwrap();
    let frozen = perturbed_generator_constant(&g, &v, 0.3, 0.7, 0.8).unwrap();
    let plain: Vec<f64> = (0..10_000)
        .map(|i| censored_first_jump(&sample_path(&frozen, 2, 2.0, &RngStream::new(6, i)).unwrap()))
        .collect();
    let thinned: Vec<f64> = (0..10_000)
        .map(|i| censored_first_jump(&sample_path_inhomogeneous(&g, &spec, 2, 2.0, &RngStream::new(7, i)).unwrap()))
        .collect();
    assert!(ks_accepts(plain, thinned));
}

/// `μ_T` for the time-dependent generator by classical RK4 on a fine grid.
fn master_equation(g: &Generator, spec: &PerturbationSpec, mu: &Distribution, horizon: f64, steps: usize) -> Vec<f64> {
    let dt = horizon / steps as f64;
    let rhs = |s: f64, p: &DVector<f64>| -> DVector<f64> {
        let l = perturbed_generator(g, spec, s).unwrap().dense_l();
        l.transpose() * p
    };
    let mut p = DVector::from_row_slice(mu.probabilities());
    for k in 0..steps {
        let s = k as f64 * dt;
        let k1 = rhs(s, &p);
        let k2 = rhs(s + dt / 2.0, &(&p + &k1 * (dt / 2.0)));
        let k3 = rhs(s + dt / 2.0, &(&p + &k2 * (dt / 2.0)));
        let k4 = rhs(s + dt, &(&p + &k3 * dt));
        p += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    }
    p.iter().copied().collect()
}

#[test]
fn thinning_matches_master_equation() {
    let g = four_state();
    let mu = Distribution::new(vec![0.4, 0.3, 0.2, 0.1]).unwrap();
    let v = Observable::new(vec![1.0, 0.0, -1.0, 0.5]).unwrap();
    let q = Observable::new(vec![0.0, 1.0, 2.0, -1.0]).unwrap();
    let schedule = AmplitudeSchedule::callable(|s| 0.8 * (2.0 * s).sin(), |s| 1.6 * (2.0 * s).cos(), (-0.8, 0.8), 2.0);
    let spec = PerturbationSpec::new(v, 0.6, 0.4, schedule).unwrap();
    let horizon = 2.0;
    let values = ensemble(100_000, 8, |r| {
        let x0 = sample_state(&mu, r);
        let bound = neqresponse_core::pathspace::thinning_bound(&g, &spec, horizon)?;
        let path = neqresponse_core::pathspace::sample_path_inhomogeneous_with(&g, &spec, x0, horizon, bound, r)?;
        Ok(q[path.final_state()])
    })
    .unwrap();
    let est = mc_mean(&values);
    let p_t = master_equation(&g, &spec, &mu, horizon, 4000);
    let exact: f64 = (0..4).map(|x| p_t[x] * q[x]).sum();
    assert!((est.estimate - exact).abs() <= 3.0 * est.std_error, "{} vs {exact}", est.estimate);
}

#[test]
fn unbounded_schedule_is_refused() {
    let g = four_state();
    let schedule = AmplitudeSchedule::callable(|s| 1.0 / (1.0 - s), |s| (1.0 - s).powi(-2), (1.0, f64::INFINITY), 2.0);
    let spec = PerturbationSpec::new(Observable::indicator(4, 0), 0.5, 0.5, schedule).unwrap();
    let err = sample_path_inhomogeneous(&g, &spec, 0, 2.0, &RngStream::new(0, 0)).unwrap_err();
    assert!(matches!(err, PathError::UnboundedSchedule(_)), "{err}");
}

#[test]
fn normalization_across_splits_and_schedules() {
    let g = four_state();
    let mu = Distribution::uniform(4);
    let v = Observable::new(vec![1.0, 0.0, -1.0, 0.5]).unwrap();
    let grid = AmplitudeSchedule::grid(vec![0.0, 0.5, 1.0, 1.5], vec![0.0, 0.4, -0.2, 0.3]).unwrap();
    for (a, b) in [(0.5, 0.5), (1.0, 0.0), (0.0, 1.0), (1.5, -0.5)] {
        for schedule in [AmplitudeSchedule::constant(0.3), grid.clone()] {
            let spec = PerturbationSpec::new(v.clone(), a, b, schedule).unwrap();
            let est = girsanov_normalization(&g, &mu, &spec, 1.5, 20_000, 9).unwrap();
            assert!((est.estimate - 1.0).abs() <= 3.0 * est.std_error, "({a},{b}): {est:?}");
        }
    }
}

#[test]
fn mc_response_of_constant_potential_vanishes() {
    let g = biased_ring(2.0, 1.0);
    let mu = Distribution::new(vec![0.6, 0.3, 0.1]).unwrap();
    let spec = PerturbationSpec::new(Observable::constant(3, 1.0), 0.5, 0.5, AmplitudeSchedule::constant(0.1)).unwrap();
    let est = mc_response(&g, &mu, &spec, &Observable::indicator(3, 0), 1.0, 100_000, 10).unwrap();
    assert!(est.estimate.abs() <= 3.0 * est.std_error, "{est:?}");
}

#[test]
fn mc_response_in_equilibrium() {
    let mut r = rng(11);
    let model = random_reversible(&mut r, 4);
    let rho = Distribution::new(model.gibbs()).unwrap();
    let v = random_observable(&mut r, 4);
    let q = random_observable(&mut r, 4);
    let (h, horizon) = (0.1, 1.0);
    // βh [⟨V(T) Q(T)⟩ - ⟨V(0) Q(T)⟩]
    let closed = model.beta
        * h
        * (correlation(&model.generator, &rho, &v, &q, horizon, horizon).unwrap()
            - correlation(&model.generator, &rho, &v, &q, 0.0, horizon).unwrap());
    let spec = PerturbationSpec::new(v, 0.3 * model.beta, 0.7 * model.beta, AmplitudeSchedule::constant(h)).unwrap();
    let est = mc_response(&model.generator, &rho, &spec, &q, horizon, 100_000, 12).unwrap();
    assert!((est.estimate - closed).abs() <= 3.0 * est.std_error, "{est:?} vs {closed}");
    let exact =
        integrated_response(&model.generator, &rho, spec.potential(), &q, spec.a(), spec.b(), spec.schedule(), horizon).unwrap();
    assert!((exact - closed).abs() < 1e-9);
}

#[test]
fn jump_measure_compensator() {
    let g = four_state();
    let mu = Distribution::new(vec![0.4, 0.3, 0.2, 0.1]).unwrap();
    let v = Observable::new(vec![1.0, 0.0, -1.0, 0.5]).unwrap();
    let q = Observable::new(vec![0.0, 1.0, 2.0, -1.0]).unwrap();
    let spec = PerturbationSpec::new(v.clone(), 0.5, 0.5, AmplitudeSchedule::constant(0.7)).unwrap();
    let check = jump_measure_identity_check(&g, &mu, &spec, &q, 1.0, 100_000, 13).unwrap();
    assert!((check.lhs - check.rhs).abs() <= 3.0 * check.std_error, "{check:?}");

    let silent = spec_with(&v, 0.0);
    let zero = jump_measure_identity_check(&g, &mu, &silent, &q, 1.0, 1000, 13).unwrap();
    assert_eq!((zero.lhs, zero.rhs), (0.0, 0.0));

    let short = 0.01;
    let check = jump_measure_identity_check(&g, &mu, &spec, &q, short, 1000, 14).unwrap();
    let leading: f64 = g.edges().map(|(y, x, w)| mu[y] * w * v[x] * q[x]).sum::<f64>() * 0.7 * short;
    assert!((check.rhs - leading).abs() <= 0.05 * leading.abs(), "{} vs {leading}", check.rhs);
}

fn spec_with(v: &Observable, scale: f64) -> PerturbationSpec {
    PerturbationSpec::new(
        Observable::new(v.values().iter().map(|x| x * scale).collect()).unwrap(),
        0.5,
        0.5,
        AmplitudeSchedule::constant(0.7),
    )
    .unwrap()
}

#[test]
fn correlation_by_sampling() {
    let g = four_state();
    let mu = Distribution::new(vec![0.4, 0.3, 0.2, 0.1]).unwrap();
    let v = Observable::new(vec![1.0, 0.0, -1.0, 0.5]).unwrap();
    let q = Observable::new(vec![0.0, 1.0, 2.0, -1.0]).unwrap();
    let est = mc_correlation(&g, &mu, &v, &q, 0.3, 1.1, 1_000_000, 15).unwrap();
    let exact = correlation(&g, &mu, &v, &q, 0.3, 1.1).unwrap();
    assert!((est.estimate - exact).abs() <= 3.0 * est.std_error, "{est:?} vs {exact}");
}

#[test]
fn standard_error_shrinks_as_inverse_root() {
    let g = four_state();
    let mu = Distribution::uniform(4);
    let v = Observable::new(vec![1.0, 0.0, -1.0, 0.5]).unwrap();
    let ns = [1_000usize, 10_000, 100_000];
    let errors: Vec<f64> = ns
        .iter()
        .map(|&n| mc_correlation(&g, &mu, &v, &v, 0.0, 0.5, n, 16).unwrap().std_error)
        .collect();
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let slope = loglog_slope(&xs, &errors);
    assert!((slope + 0.5).abs() <= 0.05, "{slope}");
}

#[test]
fn too_few_samples() {
    let g = two_state();
    let err = mc_correlation(&g, &Distribution::uniform(2), &Observable::indicator(2, 0), &Observable::indicator(2, 0), 0.0, 1.0, 10, 0);
    assert!(err.is_ok(), "plain correlation sampling has no minimum");
    let spec = PerturbationSpec::new(Observable::indicator(2, 0), 0.5, 0.5, AmplitudeSchedule::constant(0.1)).unwrap();
    let err = mc_response(&g, &Distribution::uniform(2), &spec, &Observable::indicator(2, 0), 1.0, 99, 0).unwrap_err();
    assert!(matches!(err, PathError::TooFewSamples { found: 99, min: 100 }));
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let g = four_state();
    let mu = Distribution::new(vec![0.4, 0.3, 0.2, 0.1]).unwrap();
    let spec = PerturbationSpec::new(Observable::new(vec![1.0, 0.0, -1.0, 0.5]).unwrap(), 0.5, 0.5, AmplitudeSchedule::constant(0.2))
        .unwrap();
    let q = Observable::indicator(4, 2);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| mc_response(&g, &mu, &spec, &q, 1.0, 20_000, 17).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(8));
    let a = sample_path(&g, 0, 5.0, &RngStream::new(18, 4)).unwrap();
    let b = sample_path(&g, 0, 5.0, &RngStream::new(18, 4)).unwrap();
    let c = sample_path(&g, 0, 5.0, &RngStream::new(18, 5)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn occupation_of_a_path_without_jumps() {
    let path = Trajectory { x0: 2, jumps: vec![], horizon: 3.0 };
    let occupation = occupation_measure(&path, 4).unwrap();
    assert_eq!(occupation.probabilities(), &[0.0, 0.0, 1.0, 0.0]);
}

#[test]
fn occupation_rate_decreases_with_horizon() {
    let g = biased_ring(2.0, 1.0);
    let mean_rate = |tau: f64| -> f64 {
        (0..20)
            .map(|i| {
                let path = sample_path(&g, 0, tau, &RngStream::new(19, i)).unwrap();
                let p = occupation_measure(&path, 3).unwrap();
                dv_rate_function(&g, &p, 1e-10).unwrap().rate
            })
            .sum::<f64>()
            / 20.0
    };
    let rates: Vec<f64> = [10.0, 100.0, 1000.0].into_iter().map(mean_rate).collect();
    assert!(rates[0] > rates[1] && rates[1] > rates[2], "{rates:?}");
    let rho = stationary_distribution(&g).unwrap();
    assert!(dv_rate_function(&g, &rho, 1e-12).unwrap().rate.abs() < 1e-12);
}

#[test]
fn trajectory_csv_round_trip() {
    let g = four_state();
    let path = sample_path(&g, 1, 3.0, &RngStream::new(20, 0)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let plain = dir.path().join("path.csv");
    let packed = dir.path().join("path.csv.gz");
    write_trajectory_csv(&path, &plain, false).unwrap();
    write_trajectory_csv(&path, &packed, true).unwrap();
    let text = std::fs::read_to_string(&plain).unwrap();
    let mut unpacked = String::new();
    flate2::read::GzDecoder::new(std::fs::File::open(&packed).unwrap())
        .read_to_string(&mut unpacked)
        .unwrap();
    assert_eq!(text, unpacked);

    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("time,state"));
    let mut rows = Vec::new();
    let mut horizon = None;
    for line in lines {
        if let Some(h) = line.strip_prefix("# horizon=") {
            horizon = Some(h.parse::<f64>().unwrap());
        } else {
            let (t, x) = line.split_once(',').unwrap();
            rows.push((t.parse::<f64>().unwrap(), x.parse::<usize>().unwrap()));
        }
    }
    let rebuilt = Trajectory { x0: rows[0].1, jumps: rows[1..].to_vec(), horizon: horizon.unwrap() };
    assert_eq!(rebuilt, path);
}
