//! Weighted digraphs, their Laplacians and stepsize bounds.
//!
//! Edge direction convention: an edge (i, j) with weight a_ij > 0 means agent
//! i receives the state of agent j. Out-neighbors of i are the agents i
//! listens to; in-neighbors of j are the agents that listen to j. The
//! Laplacian is L = Diag(d_out) - A where d_out is the vector of row sums.
//!
//! Node indices are 0-based everywhere in this library. File formats and
//! reports use 1-based labels; [`GraphFile`] converts at that boundary.

use std::sync::OnceLock;

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::linalg::{eigenvalues, EigenError, Mat};
use crate::scalar::Scalar;

/// Dense-solver node limit for spectrum computations.
pub const MAX_DENSE_NODES: usize = 128;

/// Default tolerance for the weight-balance check.
pub const DEFAULT_BALANCE_TOL: f64 = 1e-9;

/// Relative threshold under which an eigenvalue counts as zero.
pub const ZERO_EIGENVALUE_TOL: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("graph needs at least one node")]
    Empty,
    #[error("node {node} out of range for {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("edge ({from}, {to}) has non-positive weight {weight}")]
    NonPositiveWeight { from: usize, to: usize, weight: f64 },
    #[error("self-loop on node {node} is not allowed")]
    SelfLoop { node: usize },
    #[error("duplicate edge ({from}, {to})")]
    DuplicateEdge { from: usize, to: usize },
    #[error("graph is not weight-balanced: node {node} has out-degree {out} vs in-degree {r#in}")]
    NotWeightBalanced { node: usize, out: f64, r#in: f64 },
    #[error("graph is not strongly connected")]
    NotStronglyConnected,
    #[error("operation requires symmetric weights (undirected graph)")]
    NotUndirected,
    #[error("{n} nodes exceed the dense-solver limit of {max}")]
    TooLarge { n: usize, max: usize },
    #[error("zero eigenvalue has multiplicity {count}, expected exactly 1")]
    ZeroEigenvalueMultiplicity { count: usize },
    #[error("spectrum has a nonzero eigenvalue with non-positive real part")]
    DegenerateSpectrum,
    #[error("eigenvalue computation failed: {0}")]
    Eigen(#[from] EigenError),
    #[error("induced subgraph selection is invalid: {0}")]
    BadSelection(String),
}

/// Immutable weighted digraph with cached Laplacian.
#[derive(Debug, Clone)]
pub struct WeightedDigraph<S> {
    n: usize,
    weights: Mat<S>,
    /// Sorted (from, to) pairs with positive weight.
    edges: Vec<(usize, usize)>,
    laplacian: OnceLock<Mat<S>>,
}

impl<S: PartialEq> PartialEq for WeightedDigraph<S> {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.weights == other.weights
    }
}

impl<S: Scalar> WeightedDigraph<S> {
    /// Builds a digraph from 0-based (from, to, weight) triples.
    pub fn new(n: usize, edge_list: &[(usize, usize, S)]) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let mut weights = Mat::zeros(n, n);
        for &(from, to, w) in edge_list {
            for node in [from, to] {
                if node >= n {
                    return Err(GraphError::NodeOutOfRange { node, n });
                }
            }
            if from == to {
                return Err(GraphError::SelfLoop { node: from });
            }
            if !(w > S::zero()) {
                return Err(GraphError::NonPositiveWeight {
                    from,
                    to,
                    weight: w.to_f64().unwrap_or(f64::NAN),
                });
            }
            if weights[(from, to)] != S::zero() {
                return Err(GraphError::DuplicateEdge { from, to });
            }
            weights[(from, to)] = w;
        }
        Ok(Self::from_weight_matrix(weights))
    }

    /// Builds an undirected graph: each 0-based (i, j, w) installs both
    /// directions with the same weight.
    pub fn undirected(n: usize, edge_list: &[(usize, usize, S)]) -> Result<Self, GraphError> {
        let mut doubled = Vec::with_capacity(edge_list.len() * 2);
        for &(i, j, w) in edge_list {
            doubled.push((i, j, w));
            doubled.push((j, i, w));
        }
        Self::new(n, &doubled)
    }

    /// Wraps a validated weight matrix (zero diagonal, non-negative entries).
    /// Internal constructor for trusted inputs; panics on a non-square matrix.
    pub fn from_weight_matrix(weights: Mat<S>) -> Self {
        assert_eq!(weights.rows(), weights.cols(), "weight matrix must be square");
        let n = weights.rows();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if weights[(i, j)] > S::zero() {
                    edges.push((i, j));
                }
            }
        }
        Self { n, weights, edges, laplacian: OnceLock::new() }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Sorted (from, to) pairs; `from` receives from `to`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn weight(&self, from: usize, to: usize) -> S {
        self.weights[(from, to)]
    }

    /// Agents that `i` receives from: { j : a_ij > 0 }.
    pub fn out_neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.n).filter(|&j| self.weights[(i, j)] > S::zero()).collect()
    }

    /// Agents that receive from `j`: { i : a_ij > 0 }.
    pub fn in_neighbors(&self, j: usize) -> Vec<usize> {
        (0..self.n).filter(|&i| self.weights[(i, j)] > S::zero()).collect()
    }

    /// Weighted out-degree: row sum of the weight matrix.
    pub fn out_degree(&self, i: usize) -> S {
        (0..self.n).map(|j| self.weights[(i, j)]).sum()
    }

    /// Weighted in-degree: column sum of the weight matrix.
    pub fn in_degree(&self, j: usize) -> S {
        (0..self.n).map(|i| self.weights[(i, j)]).sum()
    }

    /// Checks max_i |d_out(i) - d_in(i)| <= tol.
    pub fn is_weight_balanced(&self, tol: S) -> bool {
        (0..self.n).all(|i| (self.out_degree(i) - self.in_degree(i)).abs() <= tol)
    }

    /// Returns the first balance violation, if any.
    pub fn check_weight_balanced(&self, tol: S) -> Result<(), GraphError> {
        for i in 0..self.n {
            let out = self.out_degree(i);
            let r#in = self.in_degree(i);
            if (out - r#in).abs() > tol {
                return Err(GraphError::NotWeightBalanced {
                    node: i,
                    out: out.to_f64().unwrap_or(f64::NAN),
                    r#in: r#in.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        Ok(())
    }

    pub fn is_undirected(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| self.weights[(i, j)] == self.weights[(j, i)]))
    }

    /// True when a directed path exists between every ordered node pair.
    pub fn is_strongly_connected(&self) -> bool {
        self.reaches_all(false) && self.reaches_all(true)
    }

    fn reaches_all(&self, reversed: bool) -> bool {
        let mut seen = vec![false; self.n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = stack.pop() {
            for j in 0..self.n {
                let w = if reversed { self.weights[(j, i)] } else { self.weights[(i, j)] };
                if w > S::zero() && !seen[j] {
                    seen[j] = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
        count == self.n
    }

    /// Laplacian L = Diag(d_out) - A. A correction pass nudges each
    /// diagonal entry so the ascending-index row sum vanishes; the
    /// achievable residual is bounded by half an ulp of the diagonal.
    pub fn laplacian(&self) -> &Mat<S> {
        self.laplacian.get_or_init(|| {
            let n = self.n;
            let mut l = Mat::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        l[(i, j)] = -self.weights[(i, j)];
                    }
                }
                l[(i, i)] = self.out_degree(i);
            }
            for _ in 0..4 {
                let mut clean = true;
                for i in 0..n {
                    let s: S = (0..n).map(|j| l[(i, j)]).sum();
                    if s != S::zero() {
                        l[(i, i)] = l[(i, i)] - s;
                        clean = false;
                    }
                }
                if clean {
                    break;
                }
            }
            l
        })
    }

    /// All Laplacian eigenvalues, sorted by real part then imaginary part.
    pub fn spectrum(&self) -> Result<Spectrum<S>, GraphError> {
        if self.n > MAX_DENSE_NODES {
            return Err(GraphError::TooLarge { n: self.n, max: MAX_DENSE_NODES });
        }
        let eigenvalues = eigenvalues(self.laplacian())?;
        Ok(Spectrum { eigenvalues })
    }

    /// Largest stable stepsize for the plain Laplacian iteration, with the
    /// derived per-protocol stepsize ranges.
    ///
    /// Requires a weight-balanced (default tolerance), strongly connected
    /// graph whose Laplacian has a simple zero eigenvalue.
    pub fn stepsize_bound(&self) -> Result<StepsizeBound<S>, GraphError> {
        self.check_weight_balanced(S::lit(DEFAULT_BALANCE_TOL))?;
        if !self.is_strongly_connected() {
            return Err(GraphError::NotStronglyConnected);
        }
        let spectrum = self.spectrum()?;
        let scale = spectrum
            .eigenvalues
            .iter()
            .map(|z| z.norm())
            .fold(S::one(), |acc, x| if x > acc { x } else { acc });
        let zero_tol = S::lit(ZERO_EIGENVALUE_TOL) * scale;
        let zero_count = spectrum.eigenvalues.iter().filter(|z| z.norm() <= zero_tol).count();
        if zero_count != 1 {
            return Err(GraphError::ZeroEigenvalueMultiplicity { count: zero_count });
        }
        let two = S::lit(2.0);
        let mut delta_bar = S::infinity();
        for z in spectrum.eigenvalues.iter().filter(|z| z.norm() > zero_tol) {
            if z.re <= S::zero() {
                return Err(GraphError::DegenerateSpectrum);
            }
            let candidate = two * z.re / z.norm_sqr();
            if candidate < delta_bar {
                delta_bar = candidate;
            }
        }
        if !delta_bar.is_finite() {
            return Err(GraphError::ZeroEigenvalueMultiplicity { count: self.n });
        }
        Ok(StepsizeBound {
            delta_bar,
            alg1_range: (S::zero(), delta_bar),
            alg2_range: (S::zero(), if delta_bar < two { delta_bar } else { two }),
        })
    }

    /// Subgraph induced by `nodes` (0-based, distinct). Position in `nodes`
    /// becomes the new node index.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Result<Self, GraphError> {
        if nodes.is_empty() {
            return Err(GraphError::BadSelection("empty node selection".into()));
        }
        let mut seen = vec![false; self.n];
        for &v in nodes {
            if v >= self.n {
                return Err(GraphError::NodeOutOfRange { node: v, n: self.n });
            }
            if seen[v] {
                return Err(GraphError::BadSelection(format!("node {v} selected twice")));
            }
            seen[v] = true;
        }
        let m = nodes.len();
        let weights = Mat::from_fn(m, m, |i, j| self.weights[(nodes[i], nodes[j])]);
        Ok(Self::from_weight_matrix(weights))
    }

    /// SHA-256 over a canonical rendering; stable for identical graphs.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(b"consim-graph-v1\n");
        hasher.update(format!("n={}\n", self.n).as_bytes());
        for &(i, j) in &self.edges {
            hasher.update(format!("{},{},{}\n", i + 1, j + 1, self.weights[(i, j)]).as_bytes());
        }
        format!("sha256:{:x}", hasher.finalize())
    }
}

/// Laplacian eigenvalues, sorted by real part ascending (ties by imaginary
/// part).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<S> {
    pub eigenvalues: Vec<Complex<S>>,
}

/// Stable stepsize ranges derived from the Laplacian spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepsizeBound<S> {
    /// min over nonzero eigenvalues of 2 Re(lambda) / |lambda|^2.
    pub delta_bar: S,
    /// Open interval for the memoryless Laplacian iteration.
    pub alg1_range: (S, S),
    /// Open interval for the dynamic-state protocol: (0, min(2, delta_bar)).
    pub alg2_range: (S, S),
}

/// On-disk graph description with 1-based node labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFile<S> {
    pub n: usize,
    /// (from, to, weight) with labels in 1..=n.
    pub edges: Vec<(usize, usize, S)>,
}

impl<S: Scalar> GraphFile<S> {
    pub fn into_graph(&self) -> Result<WeightedDigraph<S>, GraphError> {
        let mut shifted = Vec::with_capacity(self.edges.len());
        for &(from, to, w) in &self.edges {
            for label in [from, to] {
                if label == 0 || label > self.n {
                    return Err(GraphError::NodeOutOfRange { node: label, n: self.n });
                }
            }
            shifted.push((from - 1, to - 1, w));
        }
        WeightedDigraph::new(self.n, &shifted)
    }

    pub fn from_graph(g: &WeightedDigraph<S>) -> Self {
        Self {
            n: g.node_count(),
            edges: g
                .edges()
                .iter()
                .map(|&(i, j)| (i + 1, j + 1, g.weight(i, j)))
                .collect(),
        }
    }
}
