//! Built-in models: stochastic Ising dynamics on a finite graph, with
//! optional spin exchange along edges, and the JSON model format.
//!
//! A configuration `σ ∈ {-1, +1}^Λ` is stored as the integer whose bit `i`
//! is `(σ(i) + 1) / 2`. Labels spell the configuration as `+`/`-` in vertex
//! order.

mod experiments;
mod io;

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

pub use experiments::{flux_identity_check, redi_experiment, redi_site_resolved, RediResult};
pub use io::{load_model, parse_model, save_model, write_model, Model};

use crate::markov::{Distribution, Generator, MarkovError, Observable, StateSpace};
use crate::perturbation::PerturbationError;
use crate::response::ResponseError;

/// Largest number of spins the exact pipeline handles (`2^12 = 4096` states).
pub const MAX_SPINS: usize = 12;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("ParseError: line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("SchemaError: {0}")]
    Schema(String),
    #[error("InvalidGraph: {0}")]
    InvalidGraph(String),
    #[error("AsymmetricPsi: prefactor at configuration {config}, site {site} changes under the flip")]
    AsymmetricPsi { config: usize, site: usize },
    #[error("InvalidParameter: {0}")]
    InvalidParameter(String),
    #[error("ModelTooLarge: {spins} spins exceeds the limit of {max}")]
    ModelTooLarge { spins: usize, max: usize },
    #[error(transparent)]
    Markov(#[from] MarkovError),
    #[error(transparent)]
    Perturbation(#[from] PerturbationError),
    #[error(transparent)]
    Response(#[from] ResponseError),
    #[error("Io: {0}")]
    Io(#[from] std::io::Error),
}

/// Simple undirected graph on vertices `0..vertices`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpinGraph {
    vertices: usize,
    edges: Vec<(usize, usize)>,
}

#[derive(Deserialize)]
struct GraphFile {
    vertices: usize,
    edges: Vec<(usize, usize)>,
}

impl SpinGraph {
    pub fn new(vertices: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, ModelError> {
        if vertices == 0 {
            return Err(ModelError::InvalidGraph("graph has no vertices".into()));
        }
        if vertices > MAX_SPINS {
            return Err(ModelError::ModelTooLarge { spins: vertices, max: MAX_SPINS });
        }
        let mut list = Vec::new();
        for (i, j) in edges {
            if i >= vertices || j >= vertices || i == j {
                return Err(ModelError::InvalidGraph(format!("edge ({i}, {j}) is a loop or out of range")));
            }
            let e = (i.min(j), i.max(j));
            if list.contains(&e) {
                return Err(ModelError::InvalidGraph(format!("edge ({i}, {j}) listed twice")));
            }
            list.push(e);
        }
        Ok(Self { vertices, edges: list })
    }

    pub fn cycle(n: usize) -> Result<Self, ModelError> {
        if n < 3 {
            return Self::path(n);
        }
        Self::new(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    pub fn path(n: usize) -> Result<Self, ModelError> {
        Self::new(n, (1..n).map(|i| (i - 1, i)))
    }

    pub fn complete(n: usize) -> Result<Self, ModelError> {
        Self::new(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
    }

    /// JSON `{"vertices": N, "edges": [[i, j], ...]}`.
    pub fn from_file(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path)?;
        let file: GraphFile = serde_json::from_str(&text).map_err(io::classify)?;
        Self::new(file.vertices, file.edges)
    }

    /// `cycle:N`, `path:N`, `complete:N` or `file:PATH`.
    pub fn parse(descriptor: &str) -> Result<Self, ModelError> {
        let (kind, arg) = descriptor
            .split_once(':')
            .ok_or_else(|| ModelError::InvalidGraph(format!("'{descriptor}' is not KIND:ARG")))?;
        let count = || {
            arg.parse::<usize>()
                .map_err(|_| ModelError::InvalidGraph(format!("'{arg}' is not a vertex count")))
        };
        match kind {
            "cycle" => Self::cycle(count()?),
            "path" => Self::path(count()?),
            "complete" => Self::complete(count()?),
            "file" => Self::from_file(Path::new(arg)),
            other => Err(ModelError::InvalidGraph(format!("unknown graph kind '{other}'"))),
        }
    }

    pub fn vertices(&self) -> usize {
        self.vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }
}

/// `U(σ) = -Σ_{i~j} J_ij σ(i)σ(j) - Σ_i f_i σ(i)`, or an explicit table.
#[derive(Debug, Clone, PartialEq)]
pub enum Energy {
    Quadratic { couplings: Vec<f64>, fields: Vec<f64> },
    Table(Vec<f64>),
}

impl Energy {
    /// Same coupling on every edge and same field on every vertex.
    pub fn uniform(graph: &SpinGraph, coupling: f64, field: f64) -> Self {
        Energy::Quadratic {
            couplings: vec![coupling; graph.edges.len()],
            fields: vec![field; graph.vertices],
        }
    }
}

/// Symmetric prefactor `ψ(σ, j)` of the flip rates.
#[derive(Debug, Clone, PartialEq)]
pub enum Psi {
    One,
    /// `[2 cosh(β ΔU / 2)]^{-1}` with `ΔU = U(σ^j) - U(σ)`.
    HeatBath,
    /// `table[σ][j]`.
    Table(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsingSpec {
    pub graph: SpinGraph,
    pub beta: f64,
    pub energy: Energy,
    pub psi: Psi,
    /// Exchange rate per edge.
    pub lambda: f64,
}

impl IsingSpec {
    /// Nearest-neighbour model with uniform coupling and field, `ψ = 1`.
    pub fn new(graph: SpinGraph, beta: f64, coupling: f64, field: f64, lambda: f64) -> Self {
        let energy = Energy::uniform(&graph, coupling, field);
        Self {
            graph,
            beta,
            energy,
            psi: Psi::One,
            lambda,
        }
    }

    pub fn with_psi(mut self, psi: Psi) -> Self {
        self.psi = psi;
        self
    }

    pub fn states(&self) -> usize {
        1 << self.graph.vertices
    }

    /// `U` on every configuration.
    pub fn energies(&self) -> Result<Vec<f64>, ModelError> {
        let n = self.states();
        match &self.energy {
            Energy::Table(table) => {
                if table.len() != n {
                    return Err(ModelError::InvalidParameter(format!(
                        "energy table has {} entries for {n} configurations",
                        table.len()
                    )));
                }
                Ok(table.clone())
            }
            Energy::Quadratic { couplings, fields } => {
                if couplings.len() != self.graph.edges.len() || fields.len() != self.graph.vertices {
                    return Err(ModelError::InvalidParameter(
                        "need one coupling per edge and one field per vertex".into(),
                    ));
                }
                Ok((0..n)
                    .map(|c| {
                        let pair: f64 = self
                            .graph
                            .edges
                            .iter()
                            .zip(couplings)
                            .map(|(&(i, j), k)| k * spin(c, i) * spin(c, j))
                            .sum();
                        let single: f64 = fields.iter().enumerate().map(|(i, f)| f * spin(c, i)).sum();
                        -pair - single
                    })
                    .collect())
            }
        }
    }

    fn psi_table(&self, energies: &[f64]) -> Result<Vec<Vec<f64>>, ModelError> {
        let (n, m) = (self.states(), self.graph.vertices);
        let table = match &self.psi {
            Psi::One => vec![vec![1.0; m]; n],
            Psi::HeatBath => (0..n)
                .map(|c| {
                    (0..m)
                        .map(|j| 1.0 / (2.0 * (0.5 * self.beta * (energies[flip(c, j)] - energies[c])).cosh()))
                        .collect()
                })
                .collect(),
            Psi::Table(table) => {
                if table.len() != n || table.iter().any(|row| row.len() != m) {
                    return Err(ModelError::InvalidParameter(format!("psi table must be {n} x {m}")));
                }
                table.clone()
            }
        };
        for (c, row) in table.iter().enumerate() {
            for (j, &p) in row.iter().enumerate() {
                if !(p.is_finite() && p > 0.0) {
                    return Err(ModelError::InvalidParameter(format!(
                        "psi({c}, {j}) = {p} must be positive"
                    )));
                }
                let mirrored = table[flip(c, j)][j];
                if (p - mirrored).abs() > 1e-12 * p.abs().max(mirrored.abs()) {
                    return Err(ModelError::AsymmetricPsi { config: c, site: j });
                }
            }
        }
        Ok(table)
    }

    /// `ρ ∝ e^{-βU}`.
    pub fn gibbs(&self) -> Result<Distribution, ModelError> {
        let energies = self.energies()?;
        let low = energies.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(Distribution::from_weights(
            energies.iter().map(|u| (-self.beta * (u - low)).exp()).collect(),
        )?)
    }
}

/// `σ(i)` of configuration `c`.
pub fn spin(c: usize, i: usize) -> f64 {
    if c >> i & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// `σ^j`.
pub fn flip(c: usize, j: usize) -> usize {
    c ^ (1 << j)
}

/// `σ^{ij}`: spins at `i` and `j` swapped.
pub fn exchange(c: usize, i: usize, j: usize) -> usize {
    if (c >> i & 1) != (c >> j & 1) {
        c ^ (1 << i) ^ (1 << j)
    } else {
        c
    }
}

fn label(c: usize, m: usize) -> String {
    (0..m).map(|i| if spin(c, i) > 0.0 { '+' } else { '-' }).collect()
}

/// Ising generator and its named observables.
#[derive(Debug, Clone)]
pub struct IsingModel {
    pub spec: IsingSpec,
    pub generator: Generator,
    pub observables: BTreeMap<String, Observable>,
}

impl IsingModel {
    pub fn observable(&self, name: &str) -> Result<&Observable, ModelError> {
        self.observables
            .get(name)
            .ok_or_else(|| ModelError::Schema(format!("observable '{name}' not found")))
    }

    pub fn magnetization(&self) -> &Observable {
        &self.observables["magnetization"]
    }

    pub fn into_model(self) -> Model {
        Model {
            generator: self.generator,
            observables: self.observables,
        }
    }
}

/// Flip rates `ψ(σ,j) exp(-(β/2)[U(σ^j) - U(σ)])` and exchange at rate `λ`
/// along every edge whose end spins differ. Registers `magnetization`,
/// `energy`, `sigma_i` and the local fluxes `J_i = -2σ(i)W(σ,σ^i)`.
pub fn build_ising_generator(spec: &IsingSpec) -> Result<IsingModel, ModelError> {
    let m = spec.graph.vertices;
    if m > MAX_SPINS {
        return Err(ModelError::ModelTooLarge { spins: m, max: MAX_SPINS });
    }
    if !(spec.beta.is_finite() && spec.lambda.is_finite() && spec.lambda >= 0.0) {
        return Err(ModelError::InvalidParameter(format!(
            "beta = {} must be finite and lambda = {} nonnegative",
            spec.beta, spec.lambda
        )));
    }
    let n = spec.states();
    let energies = spec.energies()?;
    let psi = spec.psi_table(&energies)?;
    let flip_rate = |c: usize, j: usize| psi[c][j] * (-0.5 * spec.beta * (energies[flip(c, j)] - energies[c])).exp();
    let mut triples = Vec::new();
    for c in 0..n {
        for j in 0..m {
            triples.push((c, flip(c, j), flip_rate(c, j)));
        }
        if spec.lambda > 0.0 {
            for &(i, j) in &spec.graph.edges {
                let d = exchange(c, i, j);
                if d != c {
                    triples.push((c, d, spec.lambda));
                }
            }
        }
    }
    let space = StateSpace::new((0..n).map(|c| label(c, m)))?;
    let generator = Generator::build(space, triples)?;

    let mut observables = BTreeMap::new();
    let mag: Vec<f64> = (0..n).map(|c| (0..m).map(|i| spin(c, i)).sum()).collect();
    observables.insert("magnetization".to_string(), Observable::new(mag)?);
    observables.insert("energy".to_string(), Observable::new(energies.clone())?);
    for i in 0..m {
        observables.insert(format!("sigma_{i}"), Observable::new((0..n).map(|c| spin(c, i)).collect())?);
        observables.insert(
            format!("J_{i}"),
            Observable::new((0..n).map(|c| -2.0 * spin(c, i) * flip_rate(c, i)).collect())?,
        );
    }
    Ok(IsingModel {
        spec: spec.clone(),
        generator,
        observables,
    })
}
