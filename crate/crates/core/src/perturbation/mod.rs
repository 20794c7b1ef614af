//! Potential perturbations of the transition rates,
//! `W_s(x, y) = W(x, y) exp(h_s [b V(y) - a V(x)])`.
//!
//! Local detailed balance at inverse temperature `β` only constrains
//! `a + b = β`; the split between `a` and `b` is a modelling choice. `a = b`
//! is the symmetric (force) split, `b = 0` only lowers the depth of the
//! states without touching the barriers between them.

mod schedule;

use thiserror::Error;

pub use schedule::AmplitudeSchedule;

use crate::markov::{check_len, Generator, MarkovError, Observable};
use crate::numerics::QuadratureError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerturbationError {
    #[error("ScheduleDomain: s = {s} outside schedule support [{start}, {end}]")]
    ScheduleDomain { s: f64, start: f64, end: f64 },
    #[error("InvalidGrid: {0}")]
    InvalidGrid(String),
    #[error("InvalidParameter: {0}")]
    InvalidParameter(String),
    #[error("MissingReverseEdge: edge {from} -> {to} has no reverse rate")]
    MissingReverseEdge { from: usize, to: usize },
    #[error("RateOverflow: perturbed rate on {from} -> {to} is not finite")]
    RateOverflow { from: usize, to: usize },
    #[error(transparent)]
    Markov(#[from] MarkovError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// Potential `V`, split constants `(a, b)` and amplitude schedule `h_s`.
#[derive(Debug, Clone)]
pub struct PerturbationSpec {
    potential: Observable,
    a: f64,
    b: f64,
    schedule: AmplitudeSchedule,
}

impl PerturbationSpec {
    pub fn new(
        potential: Observable,
        a: f64,
        b: f64,
        schedule: AmplitudeSchedule,
    ) -> Result<Self, PerturbationError> {
        if !(a.is_finite() && b.is_finite()) {
            return Err(PerturbationError::InvalidParameter(format!(
                "a = {a} and b = {b} must be finite"
            )));
        }
        Ok(Self {
            potential,
            a,
            b,
            schedule,
        })
    }

    pub fn potential(&self) -> &Observable {
        &self.potential
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// `a + b`, the inverse temperature of the reservoir the perturbation couples to.
    pub fn beta(&self) -> f64 {
        self.a + self.b
    }

    pub fn schedule(&self) -> &AmplitudeSchedule {
        &self.schedule
    }

    pub fn with_schedule(&self, schedule: AmplitudeSchedule) -> Self {
        Self {
            schedule,
            ..self.clone()
        }
    }

    /// `b V(y) - a V(x)`: the rate exponent per unit amplitude.
    pub fn exponent(&self, x: usize, y: usize) -> f64 {
        self.b * self.potential[y] - self.a * self.potential[x]
    }
}

/// Rates `W(x, y) exp(h [b V(y) - a V(x)])` for a fixed amplitude `h`.
pub fn perturbed_generator_constant(
    generator: &Generator,
    potential: &Observable,
    a: f64,
    b: f64,
    h: f64,
) -> Result<Generator, PerturbationError> {
    check_len(generator.n(), potential.len())?;
    if !(a.is_finite() && b.is_finite() && h.is_finite()) {
        return Err(PerturbationError::InvalidParameter(format!(
            "a = {a}, b = {b}, h = {h} must be finite"
        )));
    }
    if h == 0.0 {
        return Ok(generator.clone());
    }
    for (x, y, w) in generator.edges() {
        let r = w * (h * (b * potential[y] - a * potential[x])).exp();
        if !(r.is_finite() && r > 0.0) {
            return Err(PerturbationError::RateOverflow { from: x, to: y });
        }
    }
    Ok(generator.map_rates(|x, y, w| w * (h * (b * potential[y] - a * potential[x])).exp()))
}

/// Frozen-time generator with rates `W_s(x, y)`.
pub fn perturbed_generator(
    generator: &Generator,
    spec: &PerturbationSpec,
    s: f64,
) -> Result<Generator, PerturbationError> {
    let h = spec.schedule.value(s)?;
    perturbed_generator_constant(generator, &spec.potential, spec.a, spec.b, h)
}

/// Upper bound on the perturbed escape rates over `[s0, s1]`:
/// `max_x max_{h ∈ [h_min, h_max]} Σ_y W(x,y) e^{h [bV(y) - aV(x)]}`.
///
/// Each summand is convex in `h`, so the maximum over the amplitude range
/// sits at one of its ends and the bound is tight.
pub fn max_perturbed_escape(
    generator: &Generator,
    spec: &PerturbationSpec,
    s0: f64,
    s1: f64,
) -> Result<f64, PerturbationError> {
    check_len(generator.n(), spec.potential.len())?;
    let (h_min, h_max) = spec.schedule.bounds_on(s0, s1)?;
    if !(h_min.is_finite() && h_max.is_finite()) {
        return Err(PerturbationError::InvalidParameter(format!(
            "amplitude bounds [{h_min}, {h_max}] are not finite"
        )));
    }
    let mut bound: f64 = 0.0;
    for x in 0..generator.n() {
        let (mut lo, mut hi) = (0.0, 0.0);
        for (y, w) in generator.row(x) {
            let c = spec.exponent(x, y);
            lo += w * (h_min * c).exp();
            hi += w * (h_max * c).exp();
        }
        bound = bound.max(lo).max(hi);
    }
    Ok(bound)
}

/// Result of a local-detailed-balance scan over all edges.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalBalanceReport {
    pub max_residual: f64,
    pub worst_edge: (usize, usize),
    pub satisfied: bool,
}

/// Largest deviation of `log[W_s(x,y)/W_s(y,x)] - log[W(x,y)/W(y,x)]` from
/// `β h_s [V(y) - V(x)]` over all edges, computed from the materialized
/// perturbed rates. `beta` is the target inverse temperature, which need not
/// equal `spec.beta()`.
pub fn check_local_detailed_balance(
    generator: &Generator,
    spec: &PerturbationSpec,
    beta: f64,
    s: f64,
    tol: f64,
) -> Result<LocalBalanceReport, PerturbationError> {
    let h = spec.schedule.value(s)?;
    let perturbed = perturbed_generator(generator, spec, s)?;
    let v = &spec.potential;
    let mut max_residual = 0.0;
    let mut worst_edge = (0, 0);
    for (x, y, w) in generator.edges() {
        let reverse = generator.rate(y, x);
        if reverse == 0.0 {
            return Err(PerturbationError::MissingReverseEdge { from: x, to: y });
        }
        let perturbed_log_ratio = (perturbed.rate(x, y) / perturbed.rate(y, x)).ln();
        let base_log_ratio = (w / reverse).ln();
        let residual = (perturbed_log_ratio - base_log_ratio - beta * h * (v[y] - v[x])).abs();
        if residual > max_residual {
            max_residual = residual;
            worst_edge = (x, y);
        }
    }
    Ok(LocalBalanceReport {
        max_residual,
        worst_edge,
        satisfied: max_residual <= tol,
    })
}

/// Factorization of the rate multiplier into an `x ↔ y` symmetric prefactor
/// `ψ_s(x,y) = exp(h_s (b-a)/2 [V(y)+V(x)])` and the force part
/// `exp(h_s β/2 [V(y)-V(x)])`, listed per edge in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct PrefactorSplit {
    pub edges: Vec<(usize, usize)>,
    pub symmetric: Vec<f64>,
    pub force: Vec<f64>,
}

impl PrefactorSplit {
    pub fn symmetric_factor(&self, x: usize, y: usize) -> Option<f64> {
        self.position(x, y).map(|k| self.symmetric[k])
    }

    pub fn force_factor(&self, x: usize, y: usize) -> Option<f64> {
        self.position(x, y).map(|k| self.force[k])
    }

    fn position(&self, x: usize, y: usize) -> Option<usize> {
        self.edges.binary_search(&(x, y)).ok()
    }
}

pub fn symmetric_prefactor_split(
    generator: &Generator,
    spec: &PerturbationSpec,
    s: f64,
) -> Result<PrefactorSplit, PerturbationError> {
    check_len(generator.n(), spec.potential.len())?;
    let h = spec.schedule.value(s)?;
    let v = &spec.potential;
    let (a, b) = (spec.a, spec.b);
    let mut split = PrefactorSplit {
        edges: Vec::with_capacity(generator.edge_count()),
        symmetric: Vec::with_capacity(generator.edge_count()),
        force: Vec::with_capacity(generator.edge_count()),
    };
    for (x, y, _) in generator.edges() {
        split.edges.push((x, y));
        split.symmetric.push((h * (b - a) / 2.0 * (v[y] + v[x])).exp());
        split.force.push((h * (a + b) / 2.0 * (v[y] - v[x])).exp());
    }
    Ok(split)
}
