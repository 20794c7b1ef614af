//! Trajectories of the jump process: exact sampling, path-space densities
//! and Monte Carlo estimators.
//!
//! Trajectory `i` of any ensemble is drawn from stream `i` of a ChaCha8
//! generator keyed by the run seed, so results do not depend on how the
//! work is spread across threads.

mod estimators;
mod girsanov;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use flate2::write::GzEncoder;
use flate2::Compression;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Exp1};
use thiserror::Error;

pub use estimators::{
    ensemble, girsanov_normalization, jump_measure_identity_check, mc_correlation, mc_mean, mc_response,
    JumpMeasureCheck, McEstimate, MIN_SAMPLES,
};
pub use girsanov::{girsanov_log_density, girsanov_log_density_linear, girsanov_log_density_summed};

use crate::markov::{Distribution, Generator, MarkovError};
use crate::numerics::QuadratureError;
use crate::perturbation::{max_perturbed_escape, PerturbationError, PerturbationSpec};

#[derive(Debug, Error)]
pub enum PathError {
    #[error("UnboundedSchedule: {0}")]
    UnboundedSchedule(String),
    #[error("ThinningBound: perturbed escape rate {rate} exceeds dominating rate {bound}")]
    ThinningBound { rate: f64, bound: f64 },
    #[error("InvalidHorizon: {0} must be positive and finite")]
    InvalidHorizon(f64),
    #[error("InvalidState: {state} is not a state of a {n}-state space")]
    InvalidState { state: usize, n: usize },
    #[error("TooFewSamples: {found} samples, at least {min} required")]
    TooFewSamples { found: usize, min: usize },
    #[error(transparent)]
    Markov(#[from] MarkovError),
    #[error(transparent)]
    Perturbation(#[from] PerturbationError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("Io: {0}")]
    Io(#[from] io::Error),
}

/// Stream `stream_index` of the ChaCha8 generator keyed by `seed`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_index: u64) -> Self {
        Self { seed, stream_index }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

/// Right-continuous path: `x0` on `[0, t_1)`, then the `k`-th jump's state
/// on `[t_k, t_{k+1})`, up to `horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub x0: usize,
    pub jumps: Vec<(f64, usize)>,
    pub horizon: f64,
}

impl Trajectory {
    pub fn jump_count(&self) -> usize {
        self.jumps.len()
    }

    pub fn final_state(&self) -> usize {
        self.jumps.last().map_or(self.x0, |j| j.1)
    }

    /// State at time `t`; at a jump time this is the state jumped to.
    pub fn state_at(&self, t: f64) -> usize {
        let k = self.jumps.partition_point(|(s, _)| *s <= t);
        if k == 0 {
            self.x0
        } else {
            self.jumps[k - 1].1
        }
    }

    pub fn first_jump_time(&self) -> Option<f64> {
        self.jumps.first().map(|j| j.0)
    }

    /// Constant pieces `(start, end, state)` covering `[0, horizon]`.
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, usize)> + '_ {
        let starts = std::iter::once((0.0, self.x0)).chain(self.jumps.iter().copied());
        let ends = self.jumps.iter().map(|j| j.0).chain(std::iter::once(self.horizon));
        starts.zip(ends).map(|((t0, x), t1)| (t0, t1, x))
    }

    /// Jumps as `(time, from, to)`.
    pub fn transitions(&self) -> impl Iterator<Item = (f64, usize, usize)> + '_ {
        let froms = std::iter::once(self.x0).chain(self.jumps.iter().map(|j| j.1));
        self.jumps.iter().zip(froms).map(|(&(t, to), from)| (t, from, to))
    }
}

fn check_horizon(t: f64) -> Result<(), PathError> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(PathError::InvalidHorizon(t))
    }
}

fn check_state(generator: &Generator, x: usize) -> Result<(), PathError> {
    if x < generator.n() {
        Ok(())
    } else {
        Err(PathError::InvalidState { state: x, n: generator.n() })
    }
}

fn exponential<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    let e: f64 = Exp1.sample(rng);
    e / rate
}

/// Draws a state from `mu` by inversion.
pub fn sample_state<R: Rng + ?Sized>(mu: &Distribution, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (x, p) in mu.probabilities().iter().enumerate() {
        acc += p;
        if u < acc {
            return x;
        }
    }
    mu.probabilities().iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

fn pick<R: Rng + ?Sized>(rng: &mut R, total: f64, weights: impl Iterator<Item = (usize, f64)>) -> usize {
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = usize::MAX;
    for (y, w) in weights {
        acc += w;
        last = y;
        if target < acc {
            return y;
        }
    }
    last
}

/// Gillespie sampling under the unperturbed generator.
pub fn sample_path_with<R: Rng + ?Sized>(
    generator: &Generator,
    x0: usize,
    horizon: f64,
    rng: &mut R,
) -> Result<Trajectory, PathError> {
    check_horizon(horizon)?;
    check_state(generator, x0)?;
    let escape = generator.escape();
    let mut jumps = Vec::new();
    let (mut t, mut x) = (0.0, x0);
    loop {
        t += exponential(rng, escape[x]);
        if t > horizon {
            break;
        }
        x = pick(rng, escape[x], generator.row(x));
        jumps.push((t, x));
    }
    Ok(Trajectory { x0, jumps, horizon })
}

pub fn sample_path(generator: &Generator, x0: usize, horizon: f64, rng: &RngStream) -> Result<Trajectory, PathError> {
    sample_path_with(generator, x0, horizon, &mut rng.rng())
}

/// Dominating rate for thinning over `[0, horizon]`.
pub fn thinning_bound(generator: &Generator, spec: &PerturbationSpec, horizon: f64) -> Result<f64, PathError> {
    let bound = max_perturbed_escape(generator, spec, 0.0, horizon).map_err(|e| match e {
        PerturbationError::InvalidParameter(msg) => PathError::UnboundedSchedule(msg),
        other => other.into(),
    })?;
    if !(bound.is_finite() && bound > 0.0) {
        return Err(PathError::UnboundedSchedule(format!("dominating rate {bound}")));
    }
    Ok(bound)
}

/// Exact sampling of the time-dependent perturbed dynamics by thinning
/// against a constant rate `Λ*`; `bound` is computed once per ensemble.
pub fn sample_path_inhomogeneous_with<R: Rng + ?Sized>(
    generator: &Generator,
    spec: &PerturbationSpec,
    x0: usize,
    horizon: f64,
    bound: f64,
    rng: &mut R,
) -> Result<Trajectory, PathError> {
    check_horizon(horizon)?;
    check_state(generator, x0)?;
    let potential = spec.potential();
    let (a, b) = (spec.a(), spec.b());
    let mut jumps = Vec::new();
    let (mut t, mut x) = (0.0, x0);
    let mut rates: Vec<(usize, f64)> = Vec::new();
    let mut proposals = 0usize;
    loop {
        t += exponential(rng, bound);
        if t > horizon {
            break;
        }
        proposals += 1;
        let h = spec.schedule().value(t)?;
        rates.clear();
        rates.extend(
            generator
                .row(x)
                .map(|(y, w)| (y, w * (h * (b * potential[y] - a * potential[x])).exp())),
        );
        let escape: f64 = rates.iter().map(|r| r.1).sum();
        if escape > bound * (1.0 + 1e-12) {
            return Err(PathError::ThinningBound { rate: escape, bound });
        }
        if rng.random::<f64>() * bound < escape {
            x = pick(rng, escape, rates.iter().copied());
            jumps.push((t, x));
        }
    }
    log::trace!(
        "thinning: {} of {} proposals accepted at bound {bound}",
        jumps.len(),
        proposals
    );
    Ok(Trajectory { x0, jumps, horizon })
}

pub fn sample_path_inhomogeneous(
    generator: &Generator,
    spec: &PerturbationSpec,
    x0: usize,
    horizon: f64,
    rng: &RngStream,
) -> Result<Trajectory, PathError> {
    let bound = thinning_bound(generator, spec, horizon)?;
    sample_path_inhomogeneous_with(generator, spec, x0, horizon, bound, &mut rng.rng())
}

/// Fraction of `[0, horizon]` spent in each state.
pub fn occupation_measure(trajectory: &Trajectory, n: usize) -> Result<Distribution, PathError> {
    check_horizon(trajectory.horizon)?;
    let mut time = vec![0.0; n];
    for (t0, t1, x) in trajectory.segments() {
        if x >= n {
            return Err(PathError::InvalidState { state: x, n });
        }
        time[x] += t1 - t0;
    }
    Ok(Distribution::from_weights(time)?)
}

/// Writes `time,state` rows (the initial state at time 0 first), gzip
/// compressed when `gzip` is set.
pub fn write_trajectory_csv(trajectory: &Trajectory, path: &Path, gzip: bool) -> Result<(), PathError> {
    let file = BufWriter::new(File::create(path)?);
    if gzip {
        let mut encoder = GzEncoder::new(file, Compression::default());
        write_rows(trajectory, &mut encoder)?;
        encoder.finish()?.flush()?;
    } else {
        let mut file = file;
        write_rows(trajectory, &mut file)?;
        file.flush()?;
    }
    Ok(())
}

fn write_rows<W: Write>(trajectory: &Trajectory, out: &mut W) -> io::Result<()> {
    writeln!(out, "time,state")?;
    writeln!(out, "0,{}", trajectory.x0)?;
    for (t, x) in &trajectory.jumps {
        writeln!(out, "{t:?},{x}")?;
    }
    writeln!(out, "# horizon={:?}", trajectory.horizon)
}
