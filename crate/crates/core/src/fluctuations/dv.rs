//! Occupation-measure rate function
//! `I(μ) = -inf_u F(u)`, `F(u) = Σ_{x,y} μ(x) W(x,y) (e^{u(y) - u(x)} - 1)`.

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use super::FluctuationError;
use crate::markov::{check_len, Distribution, Generator};
use crate::numerics::CompensatedSum;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DvOptions {
    /// Sup-norm tolerance on the gradient.
    pub tol: f64,
    pub max_iterations: usize,
    pub jitter: f64,
}

impl Default for DvOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iterations: 200,
            jitter: 1e-14,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DvResult {
    pub rate: f64,
    /// Optimal `u = log g`, zero at the first state of each strongly
    /// connected piece of the support and `-∞` on states without mass.
    pub minimizer: Vec<f64>,
    pub grad_norm: f64,
    pub iterations: usize,
    /// Number of strongly connected pieces the support splits into.
    pub components: usize,
}

/// `F(u)`.
pub fn dv_objective(generator: &Generator, mu: &Distribution, u: &[f64]) -> Result<f64, FluctuationError> {
    check_len(generator.n(), mu.len())?;
    check_len(generator.n(), u.len())?;
    let mut acc = CompensatedSum::new();
    for (x, y, w) in generator.edges() {
        if mu[x] > 0.0 {
            acc.add(mu[x] * w * (u[y] - u[x]).exp_m1());
        }
    }
    Ok(acc.value())
}

/// `∇F(u)`; at `u = 0` this is the row action `μL`.
pub fn dv_gradient(generator: &Generator, mu: &Distribution, u: &[f64]) -> Result<Vec<f64>, FluctuationError> {
    check_len(generator.n(), mu.len())?;
    check_len(generator.n(), u.len())?;
    let mut grad = vec![0.0; generator.n()];
    for (x, y, w) in generator.edges() {
        if mu[x] > 0.0 {
            let c = mu[x] * w * (u[y] - u[x]).exp();
            grad[y] += c;
            grad[x] -= c;
        }
    }
    Ok(grad)
}

/// Edges `(from, to, μ(from) W)` inside one component, in local indices.
struct Piece {
    states: Vec<usize>,
    edges: Vec<(usize, usize, f64)>,
}

impl Piece {
    fn objective(&self, u: &[f64]) -> f64 {
        let mut acc = CompensatedSum::new();
        for &(x, y, c) in &self.edges {
            acc.add(c * (u[y] - u[x]).exp_m1());
        }
        acc.value()
    }

    /// `Σ μ(x) W(x, y)` over the piece.
    fn scale(&self) -> f64 {
        self.edges.iter().map(|e| e.2).sum()
    }

    fn gradient(&self, u: &[f64]) -> Vec<f64> {
        let mut grad = vec![0.0; self.states.len()];
        for &(x, y, c) in &self.edges {
            let e = c * (u[y] - u[x]).exp();
            grad[y] += e;
            grad[x] -= e;
        }
        grad
    }

    /// Hessian with the gauge coordinate 0 dropped.
    fn reduced_hessian(&self, u: &[f64]) -> DMatrix<f64> {
        let m = self.states.len() - 1;
        let mut hess = DMatrix::zeros(m, m);
        for &(x, y, c) in &self.edges {
            let e = c * (u[y] - u[x]).exp();
            let (x, y) = (x.checked_sub(1), y.checked_sub(1));
            if let Some(x) = x {
                hess[(x, x)] += e;
            }
            if let Some(y) = y {
                hess[(y, y)] += e;
            }
            if let (Some(x), Some(y)) = (x, y) {
                hess[(x, y)] -= e;
                hess[(y, x)] -= e;
            }
        }
        hess
    }

    /// Newton with backtracking line search; returns `(F*, u*, |∇F|_∞, iterations)`.
    fn minimize(&self, options: &DvOptions) -> Result<(f64, Vec<f64>, f64, usize), FluctuationError> {
        let k = self.states.len();
        let mut u = vec![0.0; k];
        if k == 1 {
            return Ok((0.0, u, 0.0, 0));
        }
        let mut f = self.objective(&u);
        for iteration in 0..options.max_iterations {
            let grad = self.gradient(&u);
            let norm = grad.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
            if norm <= options.tol {
                return Ok((f, u, norm, iteration));
            }
            let hess = self.reduced_hessian(&u);
            let rhs = DVector::from_iterator(k - 1, grad[1..].iter().map(|g| -g));
            let step = solve_spd(hess, &rhs, options.jitter)?;
            let slope: f64 = -rhs.dot(&step);
            let mut candidate = u.clone();
            // once the Newton decrement is below the rounding level of F the
            // line search can no longer tell steps apart; take the full step
            if -slope <= 1e-13 * self.scale() {
                for i in 1..k {
                    candidate[i] = u[i] + step[i - 1];
                }
                f = self.objective(&candidate);
                u.copy_from_slice(&candidate);
                continue;
            }
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                for i in 1..k {
                    candidate[i] = u[i] + t * step[i - 1];
                }
                let f_new = self.objective(&candidate);
                if f_new <= f + 1e-4 * t * slope {
                    f = f_new;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                return Err(FluctuationError::MaxIterations {
                    iterations: iteration,
                    grad_norm: norm,
                });
            }
            u.copy_from_slice(&candidate);
        }
        let norm = self.gradient(&u).iter().fold(0.0_f64, |m, g| m.max(g.abs()));
        if norm <= options.tol {
            return Ok((f, u, norm, options.max_iterations));
        }
        Err(FluctuationError::MaxIterations {
            iterations: options.max_iterations,
            grad_norm: norm,
        })
    }
}

fn solve_spd(hess: DMatrix<f64>, rhs: &DVector<f64>, jitter: f64) -> Result<DVector<f64>, FluctuationError> {
    let scale = hess.diagonal().iter().fold(0.0_f64, |m, d| m.max(d.abs())).max(f64::MIN_POSITIVE);
    let mut eps = 0.0;
    for _ in 0..12 {
        let mut h = hess.clone();
        for i in 0..h.nrows() {
            h[(i, i)] += eps * scale;
        }
        if let Some(chol) = h.cholesky() {
            return Ok(chol.solve(rhs));
        }
        eps = if eps == 0.0 { jitter } else { eps * 100.0 };
    }
    Err(FluctuationError::Singular)
}

pub fn dv_rate_function(generator: &Generator, mu: &Distribution, tol: f64) -> Result<DvResult, FluctuationError> {
    dv_rate_function_with(
        generator,
        mu,
        &DvOptions {
            tol,
            ..DvOptions::default()
        },
    )
}

/// Minimizes `F`. States of zero mass drop out exactly: their `u` runs to
/// `-∞`, which turns every term leading into them into `-μ(x)W(x,y)`. The
/// support is then split into strongly connected pieces of the positive-rate
/// graph, each minimized on its own; edges running between pieces likewise
/// contribute their full outflow.
pub fn dv_rate_function_with(
    generator: &Generator,
    mu: &Distribution,
    options: &DvOptions,
) -> Result<DvResult, FluctuationError> {
    check_len(generator.n(), mu.len())?;
    let n = generator.n();
    let mut graph = DiGraph::<usize, ()>::with_capacity(n, generator.edge_count());
    let nodes: Vec<_> = (0..n).map(|x| graph.add_node(x)).collect();
    for (x, y, _) in generator.edges() {
        if mu[x] > 0.0 && mu[y] > 0.0 {
            graph.add_edge(nodes[x], nodes[y], ());
        }
    }
    let mut label = vec![usize::MAX; n];
    let mut pieces: Vec<Piece> = Vec::new();
    for scc in tarjan_scc(&graph) {
        let mut states: Vec<usize> = scc.iter().map(|i| graph[*i]).collect();
        if states.iter().any(|x| mu[*x] == 0.0) {
            continue;
        }
        states.sort_unstable();
        for (local, &x) in states.iter().enumerate() {
            label[x] = pieces.len() * n + local;
        }
        pieces.push(Piece { states, edges: Vec::new() });
    }
    let mut leak = CompensatedSum::new();
    for (x, y, w) in generator.edges() {
        if mu[x] == 0.0 {
            continue;
        }
        let (px, lx) = (label[x] / n, label[x] % n);
        if mu[y] > 0.0 && label[y] / n == px {
            pieces[px].edges.push((lx, label[y] % n, mu[x] * w));
        } else {
            leak.add(mu[x] * w);
        }
    }
    let mut minimizer = vec![f64::NEG_INFINITY; n];
    let mut rate = leak;
    let mut grad_norm: f64 = 0.0;
    let mut iterations = 0;
    for piece in &pieces {
        let (f, u, norm, its) = piece.minimize(options)?;
        rate.add(-f);
        grad_norm = grad_norm.max(norm);
        iterations = iterations.max(its);
        for (local, &x) in piece.states.iter().enumerate() {
            minimizer[x] = u[local];
        }
    }
    Ok(DvResult {
        rate: rate.value(),
        minimizer,
        grad_norm,
        iterations,
        components: pieces.len(),
    })
}
