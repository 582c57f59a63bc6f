//! Consensus protocol engines and their execution traces.
//!
//! All engines iterate synchronous discrete-time dynamics over a
//! weight-balanced, strongly connected digraph and record every state and
//! every transmitted signal. Traces are deterministic: identical spec (seed
//! included) gives a bit-identical trace on the same build.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphError, WeightedDigraph, DEFAULT_BALANCE_TOL};
use crate::linalg::{spectral_radius, Mat};
use crate::scalar::Scalar;
use crate::transforms::{OrthonormalSplit, TransformError};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error("protocols need at least 2 agents, got {n}")]
    TooFewAgents { n: usize },
    #[error("{what} has length {got}, expected {expected}")]
    WrongLength { what: &'static str, got: usize, expected: usize },
    #[error("horizon must be at least 1 step")]
    HorizonZero,
    #[error("stepsize {delta} outside the stable open interval ({lo}, {hi})")]
    StepsizeOutOfRange { delta: f64, lo: f64, hi: f64 },
    #[error("auxiliary state must sum to zero, got {sum}")]
    AuxiliarySumNonzero { sum: f64 },
    #[error("stepsize {delta} makes the linearized iteration unstable (spectral radius {spectral_radius})")]
    UnstableStepsize { delta: f64, spectral_radius: f64 },
    #[error("this algorithm requires a noise config")]
    MissingNoise,
    #[error("this algorithm requires per-agent perturbation signals")]
    MissingPerturbation,
    #[error("invalid noise config: {0}")]
    InvalidNoise(String),
    #[error("invalid perturbation signal: {0}")]
    InvalidSignal(String),
}

/// Protocol selector; the serialized names are the config-file vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Memoryless Laplacian iteration initialized at the references.
    Alg1,
    /// Dynamic-state protocol: free x0, auxiliary state summing to zero,
    /// only x transmitted.
    Alg2,
    /// Initialization-free variant for undirected graphs; transmits x and v.
    Alg3,
    /// Alg2 with an additive per-agent perturbation inside the x-update.
    Alg2Perturbed,
    /// Laplacian iteration over noise-masked transmissions with a decaying
    /// telescoping mask.
    M1,
}

impl Algorithm {
    pub fn uses_auxiliary_state(self) -> bool {
        matches!(self, Algorithm::Alg2 | Algorithm::Alg3 | Algorithm::Alg2Perturbed)
    }
}

/// Deterministic per-agent perturbation applied inside the x-update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbationSignal<S> {
    /// f(k) = 0.
    Zero,
    /// f(k) = values[k] while in range, 0 afterwards.
    FiniteSupport(Vec<S>),
    /// f(k) = scale * ratio^k with |ratio| < 1.
    Geometric { scale: S, ratio: S },
    /// f(k) = value for all k; never vanishing, so never admissible unless 0.
    Constant(S),
}

impl<S: Scalar> PerturbationSignal<S> {
    pub fn value(&self, k: usize) -> S {
        match self {
            Self::Zero => S::zero(),
            Self::FiniteSupport(values) => values.get(k).copied().unwrap_or(S::zero()),
            Self::Geometric { scale, ratio } => *scale * ratio.powi(k as i32),
            Self::Constant(value) => *value,
        }
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        match self {
            Self::Geometric { scale, ratio } => {
                if !scale.is_finite() || !ratio.is_finite() {
                    return Err(ProtocolError::InvalidSignal("non-finite geometric signal".into()));
                }
                if ratio.abs() >= S::one() {
                    return Err(ProtocolError::InvalidSignal(format!(
                        "geometric ratio {ratio} must satisfy |ratio| < 1"
                    )));
                }
                Ok(())
            }
            Self::FiniteSupport(values) => {
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(ProtocolError::InvalidSignal("non-finite support value".into()));
                }
                Ok(())
            }
            Self::Constant(value) => {
                if !value.is_finite() {
                    return Err(ProtocolError::InvalidSignal("non-finite constant".into()));
                }
                Ok(())
            }
            Self::Zero => Ok(()),
        }
    }
}

/// Result of the decaying-convolution admissibility check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport<S> {
    pub admissible: bool,
    /// max |S(k)| over the inspected tail, S(k+1) = (1-delta) S(k) + f(k+1).
    pub residual: S,
}

/// Fraction of the horizon inspected by [`check_admissibility`] (the tail).
pub const ADMISSIBILITY_TAIL_FRACTION: f64 = 0.1;

/// Decides whether the discounted running sum of the signal vanishes.
///
/// Computes S(k) recursively over the horizon and inspects the last 10% of
/// steps (at least one): the signal is admissible when every |S(k)| there
/// stays within `tol`.
pub fn check_admissibility<S: Scalar>(
    signal: &PerturbationSignal<S>,
    delta: S,
    horizon: usize,
    tol: S,
) -> Result<AdmissibilityReport<S>, ProtocolError> {
    signal.validate()?;
    if horizon == 0 {
        return Err(ProtocolError::HorizonZero);
    }
    let (zero, two) = (S::zero(), S::lit(2.0));
    if !(delta > zero && delta < two) {
        return Err(ProtocolError::StepsizeOutOfRange {
            delta: delta.to_f64().unwrap_or(f64::NAN),
            lo: 0.0,
            hi: 2.0,
        });
    }
    let decay = S::one() - delta;
    let tail_len = ((horizon as f64 * ADMISSIBILITY_TAIL_FRACTION).ceil() as usize).max(1);
    let tail_start = horizon + 1 - tail_len;
    let mut running = signal.value(0);
    let mut residual = if tail_start == 0 { running.abs() } else { zero };
    for k in 1..=horizon {
        running = decay * running + signal.value(k);
        if k >= tail_start {
            let mag = running.abs();
            if mag > residual {
                residual = mag;
            }
        }
    }
    Ok(AdmissibilityReport { admissible: residual <= tol, residual })
}

/// Gaussian mask parameters for the masked Laplacian iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct M1NoiseConfig<S> {
    /// Mask decay factor, 0 < phi < 1.
    pub phi: S,
    /// Standard deviation of the i.i.d. Gaussian draws, sigma >= 0.
    pub sigma: S,
    /// PRNG seed; identical seeds reproduce the trace bit for bit.
    pub seed: u64,
}

impl<S: Scalar> M1NoiseConfig<S> {
    fn validate(&self) -> Result<(), ProtocolError> {
        if !(self.phi > S::zero() && self.phi < S::one()) {
            return Err(ProtocolError::InvalidNoise(format!(
                "phi {} must lie in (0, 1)",
                self.phi
            )));
        }
        if !(self.sigma >= S::zero() && self.sigma.is_finite()) {
            return Err(ProtocolError::InvalidNoise(format!(
                "sigma {} must be finite and non-negative",
                self.sigma
            )));
        }
        Ok(())
    }
}

/// Complete description of one protocol run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSpec<S> {
    pub algorithm: Algorithm,
    pub delta: S,
    /// Number of update steps; the trace stores horizon + 1 states.
    pub horizon: usize,
    pub reference: Vec<S>,
    pub x0: Vec<S>,
    /// Auxiliary initial state; zeros where the algorithm has none.
    pub v0: Vec<S>,
    #[serde(default = "Option::default")]
    pub perturbation: Option<Vec<PerturbationSignal<S>>>,
    #[serde(default = "Option::default")]
    pub noise: Option<M1NoiseConfig<S>>,
}

impl<S: Scalar> ProtocolSpec<S> {
    /// Laplacian iteration; x0 is forced to the reference vector.
    pub fn alg1(delta: S, horizon: usize, reference: Vec<S>) -> Self {
        let n = reference.len();
        Self {
            algorithm: Algorithm::Alg1,
            delta,
            horizon,
            x0: reference.clone(),
            v0: vec![S::zero(); n],
            reference,
            perturbation: None,
            noise: None,
        }
    }

    /// Dynamic-state protocol with free x0 and zero auxiliary state.
    pub fn alg2(delta: S, horizon: usize, reference: Vec<S>, x0: Vec<S>) -> Self {
        let n = reference.len();
        Self {
            algorithm: Algorithm::Alg2,
            delta,
            horizon,
            reference,
            x0,
            v0: vec![S::zero(); n],
            perturbation: None,
            noise: None,
        }
    }

    /// Dynamic-state protocol with an explicit auxiliary initialization
    /// (must sum to zero).
    pub fn alg2_with_v0(delta: S, horizon: usize, reference: Vec<S>, x0: Vec<S>, v0: Vec<S>) -> Self {
        Self { v0, ..Self::alg2(delta, horizon, reference, x0) }
    }

    /// Perturbed dynamic-state protocol.
    pub fn alg2_perturbed(
        delta: S,
        horizon: usize,
        reference: Vec<S>,
        x0: Vec<S>,
        perturbation: Vec<PerturbationSignal<S>>,
    ) -> Self {
        Self {
            algorithm: Algorithm::Alg2Perturbed,
            perturbation: Some(perturbation),
            ..Self::alg2(delta, horizon, reference, x0)
        }
    }

    /// Initialization-free protocol for undirected graphs.
    pub fn alg3(delta: S, horizon: usize, reference: Vec<S>, x0: Vec<S>, v0: Vec<S>) -> Self {
        Self {
            algorithm: Algorithm::Alg3,
            delta,
            horizon,
            reference,
            x0,
            v0,
            perturbation: None,
            noise: None,
        }
    }

    /// Masked Laplacian iteration; x0 is forced to the reference vector.
    pub fn m1(delta: S, horizon: usize, reference: Vec<S>, noise: M1NoiseConfig<S>) -> Self {
        Self {
            algorithm: Algorithm::M1,
            noise: Some(noise),
            ..Self::alg1(delta, horizon, reference)
        }
    }
}

/// Recorded run: per-step states and per-edge transmissions.
///
/// Row k of every table is the value at time k, k = 0..=horizon; updates
/// consume rows 0..horizon. Transmission row k on edge (i, j) is the signal
/// agent i received from agent j at step k: the sender's state, plus its
/// mask for the masked protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionTrace<S> {
    pub spec: ProtocolSpec<S>,
    pub graph: WeightedDigraph<S>,
    pub states_x: Vec<Vec<S>>,
    pub states_v: Option<Vec<Vec<S>>>,
    pub transmitted_x: Vec<Vec<S>>,
    /// Present only for protocols that also exchange the auxiliary state.
    pub transmitted_v: Option<Vec<Vec<S>>>,
    /// Perturbation values actually applied, row k = f(k).
    pub perturbations: Option<Vec<Vec<S>>>,
    /// Additive masks actually applied, row k = w(k).
    pub masks: Option<Vec<Vec<S>>>,
}

impl<S: Scalar> ExecutionTrace<S> {
    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    pub fn horizon(&self) -> usize {
        self.states_x.len() - 1
    }

    pub fn final_x(&self) -> &[S] {
        self.states_x.last().expect("trace has at least one state")
    }

    /// State series of one agent across all steps.
    pub fn x_series(&self, agent: usize) -> Vec<S> {
        self.states_x.iter().map(|row| row[agent]).collect()
    }

    pub fn sum_x(&self, k: usize) -> S {
        self.states_x[k].iter().copied().sum()
    }

    pub fn sum_v(&self, k: usize) -> Option<S> {
        self.states_v.as_ref().map(|sv| sv[k].iter().copied().sum())
    }

    /// max_k |sum_i x_i(k) - sum_i x_i(0)|.
    pub fn max_sum_x_drift(&self) -> S {
        let base = self.sum_x(0);
        (0..self.states_x.len())
            .map(|k| (self.sum_x(k) - base).abs())
            .fold(S::zero(), |acc, d| if d > acc { d } else { acc })
    }

    /// max_k |sum_i v_i(k)|, when the algorithm has auxiliary state.
    pub fn max_sum_v(&self) -> Option<S> {
        self.states_v.as_ref().map(|sv| {
            sv.iter()
                .map(|row| row.iter().copied().sum::<S>().abs())
                .fold(S::zero(), |acc, d| if d > acc { d } else { acc })
        })
    }

    /// Total variation of the state trajectories:
    /// sum over steps and agents of |x_i(k+1) - x_i(k)|.
    pub fn total_variation(&self) -> S {
        let mut acc = S::zero();
        for k in 0..self.states_x.len() - 1 {
            for i in 0..self.node_count() {
                acc = acc + (self.states_x[k + 1][i] - self.states_x[k][i]).abs();
            }
        }
        acc
    }

    /// Checks that every recorded transmission equals the sender's recorded
    /// state (plus its recorded mask for the masked protocol) and that all
    /// tables have horizon + 1 rows.
    pub fn validate_transmissions(&self) -> Result<(), String> {
        let rows = self.states_x.len();
        if self.transmitted_x.len() != rows {
            return Err(format!(
                "transmission table has {} rows, states have {rows}",
                self.transmitted_x.len()
            ));
        }
        let edges = self.graph.edges();
        for k in 0..rows {
            if self.transmitted_x[k].len() != edges.len() {
                return Err(format!("transmission row {k} has wrong width"));
            }
            for (e, &(_, j)) in edges.iter().enumerate() {
                let mut expected = self.states_x[k][j];
                if let Some(masks) = &self.masks {
                    expected = expected + masks[k][j];
                }
                if self.transmitted_x[k][e] != expected {
                    return Err(format!(
                        "transmission mismatch at step {k}, edge index {e}"
                    ));
                }
            }
            if let (Some(tv), Some(sv)) = (&self.transmitted_v, &self.states_v) {
                for (e, &(_, j)) in edges.iter().enumerate() {
                    if tv[k][e] != sv[k][j] {
                        return Err(format!(
                            "auxiliary transmission mismatch at step {k}, edge index {e}"
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Runs the algorithm selected by the spec.
pub fn run<S: Scalar>(
    g: &WeightedDigraph<S>,
    spec: &ProtocolSpec<S>,
) -> Result<ExecutionTrace<S>, ProtocolError>
where
    StandardNormal: Distribution<S>,
{
    match spec.algorithm {
        Algorithm::Alg1 => run_alg1(g, spec),
        Algorithm::Alg2 => run_alg2(g, spec),
        Algorithm::Alg3 => run_alg3(g, spec),
        Algorithm::Alg2Perturbed => run_alg2_perturbed(g, spec),
        Algorithm::M1 => run_m1(g, spec),
    }
}

/// s_i = sum_j a_ij (y_i - y_j).
fn laplacian_differences<S: Scalar>(g: &WeightedDigraph<S>, y: &[S]) -> Vec<S> {
    let n = g.node_count();
    (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| g.weight(i, j) > S::zero())
                .map(|j| g.weight(i, j) * (y[i] - y[j]))
                .sum()
        })
        .collect()
}

fn validate_common<S: Scalar>(
    g: &WeightedDigraph<S>,
    spec: &ProtocolSpec<S>,
) -> Result<(), ProtocolError> {
    let n = g.node_count();
    if n < 2 {
        return Err(ProtocolError::TooFewAgents { n });
    }
    if spec.horizon == 0 {
        return Err(ProtocolError::HorizonZero);
    }
    for (what, v) in [
        ("reference", &spec.reference),
        ("x0", &spec.x0),
        ("v0", &spec.v0),
    ] {
        if v.len() != n {
            return Err(ProtocolError::WrongLength { what, got: v.len(), expected: n });
        }
    }
    g.check_weight_balanced(S::lit(DEFAULT_BALANCE_TOL))?;
    if !g.is_strongly_connected() {
        return Err(GraphError::NotStronglyConnected.into());
    }
    Ok(())
}

fn check_delta_in<S: Scalar>(delta: S, range: (S, S)) -> Result<(), ProtocolError> {
    if !(delta > range.0 && delta < range.1) {
        return Err(ProtocolError::StepsizeOutOfRange {
            delta: delta.to_f64().unwrap_or(f64::NAN),
            lo: range.0.to_f64().unwrap_or(f64::NAN),
            hi: range.1.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(())
}

fn record_transmissions<S: Scalar>(g: &WeightedDigraph<S>, sent: &[S]) -> Vec<S> {
    g.edges().iter().map(|&(_, j)| sent[j]).collect()
}

/// Memoryless Laplacian iteration, x(0) = r.
pub fn run_alg1<S: Scalar>(
    g: &WeightedDigraph<S>,
    spec: &ProtocolSpec<S>,
) -> Result<ExecutionTrace<S>, ProtocolError> {
    validate_common(g, spec)?;
    check_delta_in(spec.delta, g.stepsize_bound()?.alg1_range)?;
    let k_steps = spec.horizon;
    let mut x = spec.reference.clone();
    let mut states_x = Vec::with_capacity(k_steps + 1);
    let mut transmitted_x = Vec::with_capacity(k_steps + 1);
    states_x.push(x.clone());
    transmitted_x.push(record_transmissions(g, &x));
    for _ in 0..k_steps {
        let s = laplacian_differences(g, &x);
        x = x.iter().zip(&s).map(|(&xi, &si)| xi - spec.delta * si).collect();
        states_x.push(x.clone());
        transmitted_x.push(record_transmissions(g, &x));
    }
    Ok(ExecutionTrace {
        spec: spec.clone(),
        graph: g.clone(),
        states_x,
        states_v: None,
        transmitted_x,
        transmitted_v: None,
        perturbations: None,
        masks: None,
    })
}

/// Dynamic-state protocol, optionally perturbed. Shared stepper: the
/// unperturbed run is the perturbed one with identically zero signals.
fn run_alg2_family<S: Scalar>(
    g: &WeightedDigraph<S>,
    spec: &ProtocolSpec<S>,
    signals: Option<&[PerturbationSignal<S>]>,
) -> Result<ExecutionTrace<S>, ProtocolError> {
    validate_common(g, spec)?;
    check_delta_in(spec.delta, g.stepsize_bound()?.alg2_range)?;
    let n = g.node_count();
    let v0_sum: S = spec.v0.iter().copied().sum();
    let v0_scale = spec
        .v0
        .iter()
        .map(|v| v.abs())
        .fold(S::one(), |acc, m| if m > acc { m } else { acc });
    if v0_sum.abs() > S::lit(1e-12) * v0_scale * S::from_count(n) {
        return Err(ProtocolError::AuxiliarySumNonzero {
            sum: v0_sum.to_f64().unwrap_or(f64::NAN),
        });
    }
    if let Some(signals) = signals {
        if signals.len() != n {
            return Err(ProtocolError::WrongLength {
                what: "perturbation",
                got: signals.len(),
                expected: n,
            });
        }
        for signal in signals {
            signal.validate()?;
        }
    }
    let k_steps = spec.horizon;
    let delta = spec.delta;
    let mut x = spec.x0.clone();
    let mut v = spec.v0.clone();
    let mut states_x = vec![x.clone()];
    let mut states_v = vec![v.clone()];
    let mut transmitted_x = vec![record_transmissions(g, &x)];
    let f_at = |k: usize| -> Vec<S> {
        match signals {
            Some(signals) => signals.iter().map(|s| s.value(k)).collect(),
            None => vec![S::zero(); n],
        }
    };
    let mut perturbations = signals.map(|_| vec![f_at(0)]);
    for k in 0..k_steps {
        let s = laplacian_differences(g, &x);
        let f = f_at(k);
        let new_v: Vec<S> = v.iter().zip(&s).map(|(&vi, &si)| vi + delta * si).collect();
        let new_x: Vec<S> = (0..n)
            .map(|i| {
                let inner = -(x[i] - spec.reference[i]) - s[i] - v[i] + f[i];
                x[i] + delta * inner
            })
            .collect();
        x = new_x;
        v = new_v;
        states_x.push(x.clone());
        states_v.push(v.clone());
        transmitted_x.push(record_transmissions(g, &x));
        if let Some(p) = perturbations.as_mut() {
            p.push(f_at(k + 1));
        }
    }
    Ok(ExecutionTrace {
        spec: spec.clone(),
        graph: g.clone(),
        states_x,
        states_v: Some(states_v),
        transmitted_x,
        transmitted_v: None,
        perturbations,
        masks: None,
    })
}

/// Dynamic-state protocol; only x is transmitted.
pub fn run_alg2<S: Scalar>(
    g: &WeightedDigraph<S>,
    spec: &ProtocolSpec<S>,
) -> Result<ExecutionTrace<S>, ProtocolError> {
    run_alg2_family(g, spec, None)
}

/// Dynamic-state protocol with additive per-agent perturbations.
pub fn run_alg2_perturbed<S: Scalar>(
    g: &WeightedDigraph<S>,
    spec: &ProtocolSpec<S>,
) -> Result<ExecutionTrace<S>, ProtocolError> {
    let signals = spec.perturbation.as_ref().ok_or(ProtocolError::MissingPerturbation)?;
    run_alg2_family(g, spec, Some(signals))
}

/// Spectral radius of the linearized disagreement iteration of the
/// initialization-free protocol.
///
/// In split coordinates the disagreement block of (v, x) evolves by
/// [[I, -delta L+], [delta L+, I - delta (I + L+)]]; the run is accepted
/// when this block is a strict contraction and |1 - delta| < 1.
pub fn alg3_disagreement_radius<S: Scalar>(
    g: &WeightedDigraph<S>,
    delta: S,
) -> Result<S, ProtocolError> {
    let n = g.node_count();
    let split = OrthonormalSplit::new(n)?;
    let lplus = split.reduced_laplacian(g)?;
    let m = n - 1;
    let block = Mat::from_fn(2 * m, 2 * m, |i, j| {
        let one = S::one();
        match (i < m, j < m) {
            (true, true) => {
                if i == j {
                    one
                } else {
                    S::zero()
                }
            }
            (true, false) => -delta * lplus[(i, j - m)],
            (false, true) => delta * lplus[(i - m, j)],
            (false, false) => {
                let base = if i == j { one - delta } else { S::zero() };
                base - delta * lplus[(i - m, j - m)]
            }
        }
    });
    spectral_radius(&block).map_err(|e| ProtocolError::Graph(e.into()))
}

/// Initialization-free protocol on undirected graphs; x and v are both
/// transmitted and x0, v0 are arbitrary.
pub fn run_alg3<S: Scalar>(
    g: &WeightedDigraph<S>,
    spec: &ProtocolSpec<S>,
) -> Result<ExecutionTrace<S>, ProtocolError> {
    validate_common(g, spec)?;
    if !g.is_undirected() {
        return Err(GraphError::NotUndirected.into());
    }
    let one = S::one();
    let rho = alg3_disagreement_radius(g, spec.delta)?;
    if !(rho < one && (one - spec.delta).abs() < one && spec.delta > S::zero()) {
        return Err(ProtocolError::UnstableStepsize {
            delta: spec.delta.to_f64().unwrap_or(f64::NAN),
            spectral_radius: rho.to_f64().unwrap_or(f64::NAN),
        });
    }
    let n = g.node_count();
    let delta = spec.delta;
    let k_steps = spec.horizon;
    let mut x = spec.x0.clone();
    let mut v = spec.v0.clone();
    let mut states_x = vec![x.clone()];
    let mut states_v = vec![v.clone()];
    let mut transmitted_x = vec![record_transmissions(g, &x)];
    let mut transmitted_v = vec![record_transmissions(g, &v)];
    for _ in 0..k_steps {
        let s = laplacian_differences(g, &x);
        let t = laplacian_differences(g, &v);
        let new_v: Vec<S> = v.iter().zip(&s).map(|(&vi, &si)| vi - delta * si).collect();
        let new_x: Vec<S> = (0..n)
            .map(|i| {
                let inner = -(x[i] - spec.reference[i]) - s[i] + t[i];
                x[i] + delta * inner
            })
            .collect();
        x = new_x;
        v = new_v;
        states_x.push(x.clone());
        states_v.push(v.clone());
        transmitted_x.push(record_transmissions(g, &x));
        transmitted_v.push(record_transmissions(g, &v));
    }
    Ok(ExecutionTrace {
        spec: spec.clone(),
        graph: g.clone(),
        states_x,
        states_v: Some(states_v),
        transmitted_x,
        transmitted_v: Some(transmitted_v),
        perturbations: None,
        masks: None,
    })
}

/// Masked Laplacian iteration: every agent transmits its state plus a
/// decaying telescoping Gaussian mask and applies the update to the masked
/// values (its own included), so the running total of injected noise
/// telescopes to phi^k nu(k).
pub fn run_m1<S: Scalar>(
    g: &WeightedDigraph<S>,
    spec: &ProtocolSpec<S>,
) -> Result<ExecutionTrace<S>, ProtocolError>
where
    StandardNormal: Distribution<S>,
{
    validate_common(g, spec)?;
    check_delta_in(spec.delta, g.stepsize_bound()?.alg1_range)?;
    let noise = spec.noise.as_ref().ok_or(ProtocolError::MissingNoise)?;
    noise.validate()?;
    let n = g.node_count();
    let k_steps = spec.horizon;
    let normal = Normal::new(S::zero(), noise.sigma)
        .map_err(|e| ProtocolError::InvalidNoise(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    // Draw order: step-major, agent ascending.
    let nu: Vec<Vec<S>> = (0..=k_steps)
        .map(|_| (0..n).map(|_| normal.sample(&mut rng)).collect())
        .collect();
    let mut masks = Vec::with_capacity(k_steps + 1);
    let mut phi_pow = S::one(); // phi^k
    for k in 0..=k_steps {
        if k == 0 {
            masks.push(nu[0].clone());
        } else {
            let prev = phi_pow;
            phi_pow = phi_pow * noise.phi;
            let row: Vec<S> = (0..n)
                .map(|i| phi_pow * nu[k][i] - prev * nu[k - 1][i])
                .collect();
            masks.push(row);
        }
    }
    let mut x = spec.reference.clone();
    let mut states_x = Vec::with_capacity(k_steps + 1);
    let mut transmitted_x = Vec::with_capacity(k_steps + 1);
    states_x.push(x.clone());
    let masked0: Vec<S> = x.iter().zip(&masks[0]).map(|(&a, &b)| a + b).collect();
    transmitted_x.push(record_transmissions(g, &masked0));
    for k in 0..k_steps {
        let masked: Vec<S> = x.iter().zip(&masks[k]).map(|(&a, &b)| a + b).collect();
        let s = laplacian_differences(g, &masked);
        x = masked.iter().zip(&s).map(|(&mi, &si)| mi - spec.delta * si).collect();
        states_x.push(x.clone());
        let masked_next: Vec<S> =
            x.iter().zip(&masks[k + 1]).map(|(&a, &b)| a + b).collect();
        transmitted_x.push(record_transmissions(g, &masked_next));
    }
    Ok(ExecutionTrace {
        spec: spec.clone(),
        graph: g.clone(),
        states_x,
        states_v: None,
        transmitted_x,
        transmitted_v: None,
        perturbations: None,
        masks: Some(masks),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_two_node() -> WeightedDigraph<f64> {
        WeightedDigraph::undirected(2, &[(0, 1, 1.0)]).unwrap()
    }

    fn path_three() -> WeightedDigraph<f64> {
        WeightedDigraph::undirected(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap()
    }

    #[test]
    fn alg1_two_node_hand_iteration() {
        let g = unit_two_node();
        let spec = ProtocolSpec::alg1(0.25, 2, vec![0.0, 2.0]);
        let t = run_alg1(&g, &spec).unwrap();
        assert_eq!(t.states_x[0], vec![0.0, 2.0]);
        assert_eq!(t.states_x[1], vec![0.5, 1.5]);
        assert_eq!(t.states_x[2], vec![0.75, 1.25]);
        t.validate_transmissions().unwrap();
    }

    #[test]
    fn alg1_rejects_stepsize_at_or_beyond_bound() {
        let g = unit_two_node();
        for bad in [0.0, 1.0, 1.5, -0.1] {
            let spec = ProtocolSpec::alg1(bad, 10, vec![0.0, 2.0]);
            assert!(matches!(
                run_alg1(&g, &spec),
                Err(ProtocolError::StepsizeOutOfRange { .. })
            ));
        }
        let ok = ProtocolSpec::alg1(0.999, 10, vec![0.0, 2.0]);
        assert!(run_alg1(&g, &ok).is_ok());
    }

    #[test]
    fn alg1_conserves_state_sum_and_converges_to_average() {
        let g = path_three();
        let spec = ProtocolSpec::alg1(0.3, 200, vec![3.0, 6.0, 12.0]);
        let t = run_alg1(&g, &spec).unwrap();
        assert!(t.max_sum_x_drift() < 1e-9 * 3.0 * 12.0);
        for &x in t.final_x() {
            assert!((x - 7.0).abs() < 1e-9);
        }
    }

    #[test]
    fn alg2_converges_with_free_x0_and_keeps_v_sum_zero() {
        let g = path_three();
        let spec = ProtocolSpec::alg2(0.3, 400, vec![3.0, 6.0, 12.0], vec![50.0, -20.0, 0.0]);
        let t = run_alg2(&g, &spec).unwrap();
        for &x in t.final_x() {
            assert!((x - 7.0).abs() < 1e-8);
        }
        assert!(t.max_sum_v().unwrap() < 1e-9 * 3.0 * 50.0);
        t.validate_transmissions().unwrap();
        assert!(t.transmitted_v.is_none(), "only x is exchanged");
    }

    #[test]
    fn alg2_rejects_nonzero_auxiliary_sum() {
        let g = unit_two_node();
        let spec = ProtocolSpec::alg2_with_v0(
            0.5,
            10,
            vec![1.0, 2.0],
            vec![0.0, 0.0],
            vec![1.0, 0.5],
        );
        assert!(matches!(
            run_alg2(&g, &spec),
            Err(ProtocolError::AuxiliarySumNonzero { .. })
        ));
    }

    #[test]
    fn alg2_from_reference_start_tracks_alg1() {
        let g = path_three();
        let r = vec![3.0, 6.0, 12.0];
        let t1 = run_alg1(&g, &ProtocolSpec::alg1(0.3, 50, r.clone())).unwrap();
        let t2 = run_alg2(&g, &ProtocolSpec::alg2(0.3, 50, r.clone(), r)).unwrap();
        for k in 0..=50 {
            for i in 0..3 {
                assert!(
                    (t1.states_x[k][i] - t2.states_x[k][i]).abs() < 1e-9,
                    "step {k} agent {i}"
                );
            }
        }
    }

    #[test]
    fn perturbed_with_zero_signals_matches_plain_run() {
        let g = path_three();
        let r = vec![3.0, 6.0, 12.0];
        let x0 = vec![1.0, 0.0, -1.0];
        let plain = run_alg2(&g, &ProtocolSpec::alg2(0.4, 60, r.clone(), x0.clone())).unwrap();
        let spec = ProtocolSpec::alg2_perturbed(
            0.4,
            60,
            r,
            x0,
            vec![PerturbationSignal::Zero; 3],
        );
        let perturbed = run_alg2_perturbed(&g, &spec).unwrap();
        assert_eq!(plain.states_x, perturbed.states_x);
        assert_eq!(plain.states_v, perturbed.states_v);
        assert!(perturbed.perturbations.is_some());
    }

    #[test]
    fn admissible_perturbation_still_reaches_the_average() {
        let g = path_three();
        let signals = vec![
            PerturbationSignal::Geometric { scale: 5.0, ratio: 0.8 },
            PerturbationSignal::FiniteSupport(vec![10.0, -4.0, 2.0]),
            PerturbationSignal::Zero,
        ];
        let spec =
            ProtocolSpec::alg2_perturbed(0.3, 600, vec![3.0, 6.0, 12.0], vec![0.0; 3], signals);
        let t = run_alg2_perturbed(&g, &spec).unwrap();
        for &x in t.final_x() {
            assert!((x - 7.0).abs() < 1e-8);
        }
    }

    #[test]
    fn constant_perturbation_biases_the_limit() {
        // One agent pushing a constant c shifts the agreement value by c/n
        // (the average of the injected signal).
        let g = path_three();
        let signals = vec![
            PerturbationSignal::Constant(3.0),
            PerturbationSignal::Zero,
            PerturbationSignal::Zero,
        ];
        let spec =
            ProtocolSpec::alg2_perturbed(0.3, 800, vec![3.0, 6.0, 12.0], vec![0.0; 3], signals);
        let t = run_alg2_perturbed(&g, &spec).unwrap();
        for &x in t.final_x() {
            assert!((x - 8.0).abs() < 1e-6, "expected 7 + 3/3 = 8, got {x}");
        }
    }

    #[test]
    fn alg3_converges_from_arbitrary_initialization() {
        let g = path_three();
        let spec = ProtocolSpec::alg3(
            0.3,
            800,
            vec![3.0, 6.0, 12.0],
            vec![100.0, -40.0, 7.0],
            vec![9.0, 9.0, -1.0],
        );
        let t = run_alg3(&g, &spec).unwrap();
        for &x in t.final_x() {
            assert!((x - 7.0).abs() < 1e-8);
        }
        assert!(t.transmitted_v.is_some(), "x and v are both exchanged");
        t.validate_transmissions().unwrap();
    }

    #[test]
    fn alg3_rejects_directed_graphs_and_unstable_stepsizes() {
        let cycle =
            WeightedDigraph::new(3, &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)]).unwrap();
        let spec = ProtocolSpec::alg3(0.2, 10, vec![1.0; 3], vec![0.0; 3], vec![0.0; 3]);
        assert!(matches!(
            run_alg3(&cycle, &spec),
            Err(ProtocolError::Graph(GraphError::NotUndirected))
        ));

        let g = path_three();
        let unstable = ProtocolSpec::alg3(1.99, 10, vec![1.0; 3], vec![0.0; 3], vec![0.0; 3]);
        assert!(matches!(
            run_alg3(&g, &unstable),
            Err(ProtocolError::UnstableStepsize { .. })
        ));
    }

    #[test]
    fn m1_with_zero_sigma_equals_plain_laplacian_iteration() {
        let g = path_three();
        let r = vec![3.0, 6.0, 12.0];
        let plain = run_alg1(&g, &ProtocolSpec::alg1(0.3, 40, r.clone())).unwrap();
        let masked = run_m1(
            &g,
            &ProtocolSpec::m1(0.3, 40, r, M1NoiseConfig { phi: 0.9, sigma: 0.0, seed: 7 }),
        )
        .unwrap();
        assert_eq!(plain.states_x, masked.states_x);
    }

    #[test]
    fn m1_is_deterministic_per_seed_and_varies_across_seeds() {
        let g = path_three();
        let spec = |seed| {
            ProtocolSpec::m1(
                0.3,
                30,
                vec![3.0, 6.0, 12.0],
                M1NoiseConfig { phi: 0.9, sigma: 2.0, seed },
            )
        };
        let a = run_m1(&g, &spec(42)).unwrap();
        let b = run_m1(&g, &spec(42)).unwrap();
        let c = run_m1(&g, &spec(43)).unwrap();
        assert_eq!(a, b, "same seed must reproduce the trace bit for bit");
        assert_ne!(a.states_x, c.states_x);
        a.validate_transmissions().unwrap();
    }

    #[test]
    fn m1_mask_running_total_telescopes() {
        let g = path_three();
        let spec = ProtocolSpec::m1(
            0.3,
            50,
            vec![3.0, 6.0, 12.0],
            M1NoiseConfig { phi: 0.9, sigma: 5.0, seed: 11 },
        );
        let t = run_m1(&g, &spec).unwrap();
        let masks = t.masks.as_ref().unwrap();
        // sum_i x_i(k) - sum_i r_i equals the running mask total
        // sum_i sum_{m<k} w_i(m), which telescopes to sum_i phi^(k-1) nu_i(k-1).
        let mut running = 0.0;
        let base = t.sum_x(0);
        for k in 1..=50 {
            running += masks[k - 1].iter().sum::<f64>();
            let drift = t.sum_x(k) - base;
            assert!(
                (drift - running).abs() < 1e-9,
                "step {k}: drift {drift} vs mask total {running}"
            );
        }
    }

    #[test]
    fn admissibility_report_matches_hand_analysis() {
        let delta = 0.25;
        let zero = check_admissibility(&PerturbationSignal::<f64>::Zero, delta, 100, 1e-8).unwrap();
        assert!(zero.admissible);
        assert_eq!(zero.residual, 0.0);

        let finite = check_admissibility(
            &PerturbationSignal::FiniteSupport(vec![100.0, -3.0]),
            delta,
            400,
            1e-8,
        )
        .unwrap();
        assert!(finite.admissible);

        let geometric = check_admissibility(
            &PerturbationSignal::Geometric { scale: 10.0, ratio: -0.5 },
            delta,
            400,
            1e-8,
        )
        .unwrap();
        assert!(geometric.admissible);

        let constant =
            check_admissibility(&PerturbationSignal::Constant(2.0), delta, 400, 1e-8).unwrap();
        assert!(!constant.admissible);
        assert!((constant.residual - 2.0 / delta).abs() < 1e-9, "S -> c/delta");
    }

    #[test]
    fn admissibility_validates_inputs() {
        assert!(matches!(
            check_admissibility(&PerturbationSignal::<f64>::Zero, 2.5, 10, 1e-8),
            Err(ProtocolError::StepsizeOutOfRange { .. })
        ));
        assert!(matches!(
            check_admissibility(
                &PerturbationSignal::Geometric { scale: 1.0, ratio: 1.5 },
                0.5,
                10,
                1e-8
            ),
            Err(ProtocolError::InvalidSignal(_))
        ));
    }

    #[test]
    fn wrong_lengths_and_missing_configs_are_rejected() {
        let g = unit_two_node();
        let mut spec = ProtocolSpec::alg1(0.5, 10, vec![1.0, 2.0, 3.0]);
        assert!(matches!(
            run_alg1(&g, &spec),
            Err(ProtocolError::WrongLength { what: "reference", .. })
        ));
        spec = ProtocolSpec::alg1(0.5, 10, vec![1.0, 2.0]);
        spec.algorithm = Algorithm::M1;
        assert!(matches!(run_m1(&g, &spec), Err(ProtocolError::MissingNoise)));
        spec.algorithm = Algorithm::Alg2Perturbed;
        assert!(matches!(
            run_alg2_perturbed(&g, &spec),
            Err(ProtocolError::MissingPerturbation)
        ));
    }

    #[test]
    fn spec_serializes_with_kebab_case_algorithm_names() {
        let spec = ProtocolSpec::<f64>::alg2_perturbed(
            0.3,
            5,
            vec![1.0, 2.0],
            vec![0.0, 0.0],
            vec![PerturbationSignal::Zero, PerturbationSignal::Constant(1.5)],
        );
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("\"alg2-perturbed\""), "{json}");
        let back: ProtocolSpec<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(spec, back);
    }
}
