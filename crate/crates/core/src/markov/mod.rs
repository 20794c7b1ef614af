//! Finite-state continuous-time Markov chains.
//!
//! A [`Generator`] stores the off-diagonal transition rates `W(x, y)` of an
//! irreducible jump process in compressed row form together with the escape
//! rates `Σ_y W(x, y)`. The backward generator it induces acts on observables
//! as `Lf(x) = Σ_y W(x, y) [f(y) - f(x)]`, and on distributions (row action)
//! as `(μL)(y) = Σ_x μ(x) W(x, y) - μ(y) escape(y)`.
//!
//! Time carries units of inverse rate; no unit system is enforced.

mod balance;
mod correlation;
mod stationary;
mod uniformization;

use std::collections::HashSet;
use std::fmt;
use std::ops::Index;
use std::sync::Arc;

use nalgebra::DMatrix;
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use thiserror::Error;

pub use balance::{
    adjoint_in_rho, check_detailed_balance, stationarity_residual, DetailedBalanceReport,
};
pub use correlation::{correlation, correlation_derivatives, CorrelationDerivatives};
pub use stationary::{stationary_distribution, stationary_distribution_with, StationaryOptions};
pub use uniformization::{
    propagate, propagate_with, semigroup_apply, semigroup_apply_with, UniformizationOptions,
};

/// Largest state space the dense exact pipeline accepts.
pub const MAX_STATES: usize = 4096;

/// Absolute tolerance on `Σ p = 1` for [`Distribution`].
pub const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarkovError {
    #[error("InvalidStateSpace: {0}")]
    InvalidStateSpace(String),
    #[error("NegativeRate: rate {rate} on edge {from} -> {to} must be strictly positive and finite")]
    NegativeRate { from: usize, to: usize, rate: f64 },
    #[error("InvalidEdge: edge {from} -> {to} is a self-loop or leaves the state space")]
    InvalidEdge { from: usize, to: usize },
    #[error("DuplicateEdge: more than one rate given for {from} -> {to}")]
    DuplicateEdge { from: usize, to: usize },
    #[error("NotIrreducible: rate graph splits into strongly connected components {}", format_components(.components))]
    NotIrreducible { components: Vec<Vec<String>> },
    #[error("ModelTooLarge: {n} states exceeds the exact-pipeline limit of {max}; use path sampling instead")]
    ModelTooLarge { n: usize, max: usize },
    #[error("DimensionMismatch: expected length {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("InvalidDistribution: {0}")]
    InvalidDistribution(String),
    #[error("InvalidObservable: entry {index} is not finite")]
    InvalidObservable { index: usize },
    #[error("SolverFailure: {0}")]
    SolverFailure(String),
    #[error("NonFiniteTime: {0}")]
    NonFiniteTime(f64),
    #[error("NegativeTime: {0}")]
    NegativeTime(f64),
    #[error("TimeOrder: s = {s} must not exceed t = {t}")]
    TimeOrder { s: f64, t: f64 },
    #[error("ZeroProbabilityState: state {0} has zero probability")]
    ZeroProbabilityState(usize),
}

fn format_components(components: &[Vec<String>]) -> String {
    components
        .iter()
        .map(|c| format!("{{{}}}", c.join(", ")))
        .collect::<Vec<_>>()
        .join(" ")
}

pub(crate) fn check_time(t: f64) -> Result<(), MarkovError> {
    if !t.is_finite() {
        return Err(MarkovError::NonFiniteTime(t));
    }
    if t < 0.0 {
        return Err(MarkovError::NegativeTime(t));
    }
    Ok(())
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<(), MarkovError> {
    if expected == found {
        Ok(())
    } else {
        Err(MarkovError::DimensionMismatch { expected, found })
    }
}

/// Ordered, labelled set of states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpace {
    labels: Vec<String>,
}

impl StateSpace {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self, MarkovError> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() < 2 {
            return Err(MarkovError::InvalidStateSpace(format!(
                "need at least 2 states, got {}",
                labels.len()
            )));
        }
        let mut seen = HashSet::with_capacity(labels.len());
        for label in &labels {
            if !seen.insert(label.as_str()) {
                return Err(MarkovError::InvalidStateSpace(format!(
                    "duplicate label '{label}'"
                )));
            }
        }
        Ok(Self { labels })
    }

    /// States labelled `"0"`, `"1"`, ... `"n-1"`.
    pub fn indexed(n: usize) -> Result<Self, MarkovError> {
        Self::new((0..n).map(|i| i.to_string()))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// Real-valued function on the states.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    values: Vec<f64>,
}

impl Observable {
    pub fn new(values: Vec<f64>) -> Result<Self, MarkovError> {
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(MarkovError::InvalidObservable { index });
        }
        Ok(Self { values })
    }

    pub fn constant(n: usize, value: f64) -> Self {
        Self {
            values: vec![value; n],
        }
    }

    /// Indicator of a single state.
    pub fn indicator(n: usize, state: usize) -> Self {
        let mut values = vec![0.0; n];
        values[state] = 1.0;
        Self { values }
    }

    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Pointwise product.
    pub fn product(&self, other: &Observable) -> Result<Observable, MarkovError> {
        check_len(self.len(), other.len())?;
        Ok(Self {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect(),
        })
    }

    pub fn is_constant(&self) -> bool {
        self.values.windows(2).all(|w| w[0] == w[1])
    }

    /// `max f - min f`.
    pub fn range(&self) -> f64 {
        let max = self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = self.values.iter().cloned().fold(f64::INFINITY, f64::min);
        max - min
    }
}

impl Index<usize> for Observable {
    type Output = f64;
    fn index(&self, index: usize) -> &f64 {
        &self.values[index]
    }
}

/// Probability vector over the states.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    p: Vec<f64>,
}

impl Distribution {
    pub fn new(p: Vec<f64>) -> Result<Self, MarkovError> {
        if let Some((i, v)) = p.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(MarkovError::InvalidDistribution(format!(
                "entry {i} = {v} is negative or not finite"
            )));
        }
        let total: f64 = crate::numerics::compensated_sum(p.iter().copied());
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(MarkovError::InvalidDistribution(format!(
                "entries sum to {total}, not 1"
            )));
        }
        Ok(Self { p })
    }

    /// Normalizes nonnegative weights with a positive total.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self, MarkovError> {
        if weights.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(MarkovError::InvalidDistribution(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = crate::numerics::compensated_sum(weights.iter().copied());
        if total <= 0.0 {
            return Err(MarkovError::InvalidDistribution(
                "weights sum to zero".into(),
            ));
        }
        Ok(Self {
            p: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            p: vec![1.0 / n as f64; n],
        }
    }

    pub fn point_mass(n: usize, state: usize) -> Self {
        let mut p = vec![0.0; n];
        p[state] = 1.0;
        Self { p }
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    pub fn into_probabilities(self) -> Vec<f64> {
        self.p
    }

    /// `Σ_x p(x) f(x)`.
    pub fn expectation(&self, f: &Observable) -> Result<f64, MarkovError> {
        check_len(self.len(), f.len())?;
        Ok(crate::numerics::dot(&self.p, f.values()))
    }

    /// Total variation distance `½ Σ |p - q|`.
    pub fn total_variation(&self, other: &Distribution) -> Result<f64, MarkovError> {
        check_len(self.len(), other.len())?;
        Ok(0.5 * self.p.iter().zip(&other.p).map(|(a, b)| (a - b).abs()).sum::<f64>())
    }
}

impl Index<usize> for Distribution {
    type Output = f64;
    fn index(&self, index: usize) -> &f64 {
        &self.p[index]
    }
}

/// Rate matrix of an irreducible jump process, stored by rows.
#[derive(Clone, PartialEq)]
pub struct Generator {
    space: Arc<StateSpace>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    rates: Vec<f64>,
    escape: Vec<f64>,
}

impl fmt::Debug for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Generator")
            .field("states", &self.n())
            .field("edges", &self.rates.len())
            .finish()
    }
}

impl Generator {
    /// Builds a generator from `(from, to, rate)` triples and checks
    /// irreducibility of the positive-rate graph.
    pub fn build(
        space: StateSpace,
        triples: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self, MarkovError> {
        let n = space.len();
        if n > MAX_STATES {
            return Err(MarkovError::ModelTooLarge { n, max: MAX_STATES });
        }
        let mut edges: Vec<(usize, usize, f64)> = Vec::new();
        for (from, to, rate) in triples {
            if from >= n || to >= n || from == to {
                return Err(MarkovError::InvalidEdge { from, to });
            }
            if !(rate > 0.0 && rate.is_finite()) {
                return Err(MarkovError::NegativeRate { from, to, rate });
            }
            edges.push((from, to, rate));
        }
        edges.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        if let Some(w) = edges.windows(2).find(|w| w[0].0 == w[1].0 && w[0].1 == w[1].1) {
            return Err(MarkovError::DuplicateEdge {
                from: w[0].0,
                to: w[0].1,
            });
        }
        let generator = Self::from_sorted_edges(Arc::new(space), &edges);
        generator.check_irreducible()?;
        Ok(generator)
    }

    fn from_sorted_edges(space: Arc<StateSpace>, edges: &[(usize, usize, f64)]) -> Self {
        let n = space.len();
        let mut row_ptr = vec![0usize; n + 1];
        for &(from, _, _) in edges {
            row_ptr[from + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let cols = edges.iter().map(|e| e.1).collect();
        let rates: Vec<f64> = edges.iter().map(|e| e.2).collect();
        let escape = (0..n)
            .map(|x| rates[row_ptr[x]..row_ptr[x + 1]].iter().sum())
            .collect();
        Self {
            space,
            row_ptr,
            cols,
            rates,
            escape,
        }
    }

    fn check_irreducible(&self) -> Result<(), MarkovError> {
        let n = self.n();
        let mut graph = DiGraph::<(), ()>::with_capacity(n, self.rates.len());
        let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
        for (x, y, _) in self.edges() {
            graph.add_edge(nodes[x], nodes[y], ());
        }
        let sccs = tarjan_scc(&graph);
        if sccs.len() == 1 {
            return Ok(());
        }
        let mut components: Vec<Vec<usize>> = sccs
            .into_iter()
            .map(|c| {
                let mut c: Vec<usize> = c.into_iter().map(|ix| ix.index()).collect();
                c.sort_unstable();
                c
            })
            .collect();
        components.sort();
        Err(MarkovError::NotIrreducible {
            components: components
                .into_iter()
                .map(|c| c.into_iter().map(|i| self.space.label(i).to_string()).collect())
                .collect(),
        })
    }

    /// Same graph, rates replaced by `f(from, to, rate)`.
    ///
    /// The caller guarantees the new rates are strictly positive and finite,
    /// which keeps irreducibility intact.
    pub(crate) fn map_rates(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Self {
        let mut rates = Vec::with_capacity(self.rates.len());
        for x in 0..self.n() {
            for k in self.row_ptr[x]..self.row_ptr[x + 1] {
                let r = f(x, self.cols[k], self.rates[k]);
                debug_assert!(r > 0.0 && r.is_finite());
                rates.push(r);
            }
        }
        let escape = (0..self.n())
            .map(|x| rates[self.row_ptr[x]..self.row_ptr[x + 1]].iter().sum())
            .collect();
        Self {
            space: Arc::clone(&self.space),
            row_ptr: self.row_ptr.clone(),
            cols: self.cols.clone(),
            rates,
            escape,
        }
    }

    pub fn n(&self) -> usize {
        self.space.len()
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn escape(&self) -> &[f64] {
        &self.escape
    }

    pub fn max_escape(&self) -> f64 {
        self.escape.iter().cloned().fold(0.0, f64::max)
    }

    pub fn max_rate(&self) -> f64 {
        self.rates.iter().cloned().fold(0.0, f64::max)
    }

    pub fn edge_count(&self) -> usize {
        self.rates.len()
    }

    /// `W(x, y)`, zero when there is no edge.
    pub fn rate(&self, x: usize, y: usize) -> f64 {
        let row = &self.cols[self.row_ptr[x]..self.row_ptr[x + 1]];
        match row.binary_search(&y) {
            Ok(k) => self.rates[self.row_ptr[x] + k],
            Err(_) => 0.0,
        }
    }

    /// Outgoing `(y, W(x, y))` pairs of state `x`, in increasing `y`.
    pub fn row(&self, x: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[x]..self.row_ptr[x + 1];
        self.cols[range.clone()]
            .iter()
            .copied()
            .zip(self.rates[range].iter().copied())
    }

    /// All `(x, y, W(x, y))` triples in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n()).flat_map(move |x| self.row(x).map(move |(y, w)| (x, y, w)))
    }

    /// `Lf(x) = Σ_y W(x, y) [f(y) - f(x)]` on a raw slice.
    pub(crate) fn apply_l_slice(&self, f: &[f64]) -> Vec<f64> {
        (0..self.n())
            .map(|x| {
                let fx = f[x];
                self.row(x).map(|(y, w)| w * (f[y] - fx)).sum()
            })
            .collect()
    }

    /// `(μL)(y) = Σ_x μ(x) W(x, y) - μ(y) escape(y)` on a raw slice.
    pub(crate) fn row_action_slice(&self, mu: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = mu.iter().zip(&self.escape).map(|(m, e)| -m * e).collect();
        for (x, y, w) in self.edges() {
            out[y] += mu[x] * w;
        }
        out
    }

    /// Backward generator applied to an observable.
    #[allow(non_snake_case)]
    pub fn apply_L(&self, f: &Observable) -> Result<Observable, MarkovError> {
        check_len(self.n(), f.len())?;
        Ok(Observable::from_vec_unchecked(self.apply_l_slice(f.values())))
    }

    /// Forward (row) action `μL`; for a probability vector this is the
    /// right-hand side of the master equation.
    pub fn row_action(&self, mu: &[f64]) -> Result<Vec<f64>, MarkovError> {
        check_len(self.n(), mu.len())?;
        Ok(self.row_action_slice(mu))
    }

    /// Dense `L` with `L(x, x) = -escape(x)`.
    pub fn dense_l(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut l = DMatrix::zeros(n, n);
        for (x, y, w) in self.edges() {
            l[(x, y)] = w;
        }
        for x in 0..n {
            l[(x, x)] = -self.escape[x];
        }
        l
    }
}

/// Free-function form of [`Generator::build`].
pub fn build_generator(
    space: StateSpace,
    triples: impl IntoIterator<Item = (usize, usize, f64)>,
) -> Result<Generator, MarkovError> {
    Generator::build(space, triples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state() -> Generator {
        Generator::build(StateSpace::indexed(2).unwrap(), [(0, 1, 1.0), (1, 0, 2.0)]).unwrap()
    }

    #[test]
    fn escape_rates_are_row_sums() {
        let g = two_state();
        assert_eq!(g.escape(), &[1.0, 2.0]);
        assert_eq!(g.rate(0, 1), 1.0);
        assert_eq!(g.rate(1, 1), 0.0);
    }

    #[test]
    fn one_way_ring_is_irreducible() {
        let g = Generator::build(
            StateSpace::indexed(3).unwrap(),
            [(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)],
        );
        assert!(g.is_ok());
    }

    #[test]
    fn absorbing_state_is_rejected() {
        let err = Generator::build(StateSpace::indexed(2).unwrap(), [(0, 1, 1.0)]).unwrap_err();
        match err {
            MarkovError::NotIrreducible { components } => {
                assert_eq!(components, vec![vec!["0".to_string()], vec!["1".to_string()]]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_triples_are_rejected() {
        let space = StateSpace::indexed(2).unwrap();
        assert!(matches!(
            Generator::build(space.clone(), [(0, 1, -1.0), (1, 0, 1.0)]),
            Err(MarkovError::NegativeRate { .. })
        ));
        assert!(matches!(
            Generator::build(space.clone(), [(0, 1, 0.0), (1, 0, 1.0)]),
            Err(MarkovError::NegativeRate { .. })
        ));
        assert!(matches!(
            Generator::build(space.clone(), [(0, 1, 1.0), (0, 1, 2.0), (1, 0, 1.0)]),
            Err(MarkovError::DuplicateEdge { from: 0, to: 1 })
        ));
        assert!(matches!(
            Generator::build(space, [(0, 0, 1.0)]),
            Err(MarkovError::InvalidEdge { .. })
        ));
    }

    #[test]
    fn state_space_validation() {
        assert!(StateSpace::new(["a"]).is_err());
        assert!(StateSpace::new(["a", "b", "a"]).is_err());
        assert_eq!(StateSpace::new(["a", "b"]).unwrap().index_of("b"), Some(1));
    }

    #[test]
    fn too_many_states() {
        let space = StateSpace::indexed(MAX_STATES + 1).unwrap();
        assert!(matches!(
            Generator::build(space, []),
            Err(MarkovError::ModelTooLarge { .. })
        ));
    }

    #[test]
    fn generator_annihilates_constants() {
        let g = two_state();
        let lf = g.apply_L(&Observable::constant(2, 3.5)).unwrap();
        assert_eq!(lf.values(), &[0.0, 0.0]);
    }

    #[test]
    fn two_state_backward_generator() {
        let g = two_state();
        let lf = g.apply_L(&Observable::new(vec![0.0, 1.0]).unwrap()).unwrap();
        assert_eq!(lf.values(), &[1.0, -2.0]);
        assert!(matches!(
            g.apply_L(&Observable::constant(3, 1.0)),
            Err(MarkovError::DimensionMismatch { expected: 2, found: 3 })
        ));
    }

    #[test]
    fn dense_rows_sum_to_zero() {
        let g = two_state();
        let l = g.dense_l();
        for x in 0..2 {
            assert_eq!(l.row(x).sum(), 0.0);
        }
    }

    #[test]
    fn distribution_validation() {
        assert!(Distribution::new(vec![0.5, 0.5]).is_ok());
        assert!(Distribution::new(vec![0.5, 0.6]).is_err());
        assert!(Distribution::new(vec![1.5, -0.5]).is_err());
        let d = Distribution::from_weights(vec![2.0, 1.0]).unwrap();
        assert!((d[0] - 2.0 / 3.0).abs() < 1e-16);
    }
}
