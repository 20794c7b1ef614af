#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use neqresponse_core::markov::{Distribution, Generator, Observable, StateSpace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Reversible generator with respect to `exp(-βU)`: a ring with random chords,
/// symmetric prefactors and rates `ψ(x,y) exp(-β[U(y) - U(x)]/2)`.
pub struct Reversible {
    pub generator: Generator,
    pub beta: f64,
    pub energy: Vec<f64>,
}

impl Reversible {
    pub fn gibbs(&self) -> Vec<f64> {
        let w: Vec<f64> = self.energy.iter().map(|u| (-self.beta * u).exp()).collect();
        let z: f64 = w.iter().sum();
        w.iter().map(|x| x / z).collect()
    }
}

pub fn random_reversible(rng: &mut ChaCha8Rng, n: usize) -> Reversible {
    let beta = rng.random_range(0.5..2.0);
    let energy: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut pairs = Vec::new();
    for x in 0..n {
        let y = (x + 1) % n;
        pairs.push((x.min(y), x.max(y)));
        for y in x + 2..n {
            if rng.random_bool(0.2) {
                pairs.push((x, y));
            }
        }
    }
    pairs.sort();
    pairs.dedup();
    let mut triples = Vec::new();
    for (x, y) in pairs {
        if x == y {
            continue;
        }
        let psi = rng.random_range(0.5..2.0);
        let du = energy[y] - energy[x];
        triples.push((x, y, psi * (-0.5 * beta * du).exp()));
        triples.push((y, x, psi * (0.5 * beta * du).exp()));
    }
    let generator = Generator::build(StateSpace::indexed(n).unwrap(), triples).unwrap();
    Reversible { generator, beta, energy }
}

/// Random rates on a directed ring plus random extra edges; generically
/// breaks detailed balance.
pub fn random_nonequilibrium(rng: &mut ChaCha8Rng, n: usize) -> Generator {
    let mut triples = Vec::new();
    for x in 0..n {
        for y in 0..n {
            if x == y {
                continue;
            }
            if y == (x + 1) % n || rng.random_bool(0.5) {
                triples.push((x, y, rng.random_range(0.2..2.0)));
            }
        }
    }
    Generator::build(StateSpace::indexed(n).unwrap(), triples).unwrap()
}

/// Three states, rate `p` clockwise and `q` counter-clockwise.
pub fn biased_ring(p: f64, q: f64) -> Generator {
    let triples = (0..3).flat_map(|i| [(i, (i + 1) % 3, p), (i, (i + 2) % 3, q)]);
    Generator::build(StateSpace::indexed(3).unwrap(), triples).unwrap()
}

pub fn random_observable(rng: &mut ChaCha8Rng, n: usize) -> Observable {
    Observable::new((0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

pub fn random_law(rng: &mut ChaCha8Rng, n: usize) -> Distribution {
    Distribution::from_weights((0..n).map(|_| rng.random_range(0.05..1.0)).collect()).unwrap()
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Spectral form of a reversible generator: `L = D^{-1/2} S D^{1/2}` with
/// `D = diag(π)` and `S` symmetric. Gives `e^{τL}` and `L e^{τL}` without
/// series or uniformization.
pub struct Spectral {
    sqrt_pi: DVector<f64>,
    eigen: SymmetricEigen<f64, nalgebra::Dyn>,
}

impl Spectral {
    pub fn new(generator: &Generator, pi: &[f64]) -> Self {
        let l = generator.dense_l();
        let n = pi.len();
        let sqrt_pi = DVector::from_iterator(n, pi.iter().map(|p| p.sqrt()));
        let s = DMatrix::from_fn(n, n, |i, j| sqrt_pi[i] * l[(i, j)] / sqrt_pi[j]);
        let s = (&s + s.transpose()) * 0.5;
        Self {
            sqrt_pi,
            eigen: SymmetricEigen::new(s),
        }
    }

    /// `L^k e^{τL} f` for `k ∈ {0, 1}`.
    pub fn evolve(&self, f: &[f64], tau: f64, k: i32) -> Vec<f64> {
        let n = f.len();
        let g = DVector::from_iterator(n, (0..n).map(|i| self.sqrt_pi[i] * f[i]));
        let u = &self.eigen.eigenvectors;
        let coeffs = u.transpose() * g;
        let scaled = DVector::from_iterator(
            n,
            (0..n).map(|i| {
                let l = self.eigen.eigenvalues[i];
                coeffs[i] * (tau * l).exp() * l.powi(k)
            }),
        );
        let back = u * scaled;
        (0..n).map(|i| back[i] / self.sqrt_pi[i]).collect()
    }
}
