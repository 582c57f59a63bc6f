//! Constructive privacy certificates: for a private (adversary, target)
//! pair, builds a second execution with a different target reference whose
//! observable signals coincide with the first, and checks the coincidence
//! plus the underlying error-dynamics laws on actual traces.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{privacy_classifier, AdversaryError};
use crate::graph::WeightedDigraph;
use crate::protocols::{Algorithm, ExecutionTrace, ProtocolSpec};
use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum IndistError {
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
    #[error("no witness: the adversary surveils every receiver of agent {target}")]
    NoWitness { adversary: usize, target: usize },
    #[error("deviation size must be nonzero (zero makes the executions identical)")]
    DegenerateDeviation,
    #[error("the construction applies to the dynamic-state protocol, got {got:?}")]
    NotDynamicStateBase { got: Algorithm },
    #[error("the construction requires a zero auxiliary initialization")]
    AuxiliaryInitNotZero,
    #[error("witness {witness} out of range for {n} agents")]
    BadWitness { witness: usize, n: usize },
    #[error("traces are not comparable: {0}")]
    ShapeMismatch(String),
}

/// A Lemma-style pair of run descriptions: the base and an alternative
/// whose signals the adversary cannot tell apart.
#[derive(Debug, Clone, PartialEq)]
pub struct AlternativeExecution<S> {
    pub adversary: usize,
    pub target: usize,
    /// Agent whose state deviation carries the construction.
    pub witness: usize,
    /// Initial state deviation planted at the witness (base minus alternative).
    pub e: S,
    pub base: ProtocolSpec<S>,
    pub alt: ProtocolSpec<S>,
    /// Agents whose references differ between base and alternative.
    pub moved_references: Vec<usize>,
}

/// Picks the deterministic witness for a private (adversary, target) pair:
/// the smallest-index receiver of the target's signals that the adversary
/// does not observe; the target itself qualifies (and is the fallback)
/// when the adversary does not hear it.
pub fn find_witness<S: Scalar>(
    g: &WeightedDigraph<S>,
    adversary: usize,
    target: usize,
) -> Result<usize, IndistError> {
    if !privacy_classifier(g, adversary, target)? {
        return Err(IndistError::NoWitness { adversary, target });
    }
    let heard =
        |w: usize| w == adversary || g.weight(adversary, w) > S::zero();
    for w in g.out_neighbors(target) {
        if !heard(w) {
            return Ok(w);
        }
    }
    // The classifier guarantees a witness exists; if no proper out-neighbor
    // qualifies it must be the target itself.
    debug_assert!(!heard(target));
    Ok(target)
}

/// Applies the reference/initial-state surgery at an explicitly chosen
/// witness, independent of any adversary:
/// r_alt[w] = r[w] - d_out(w) e, r_alt[i] = r[i] + a_iw e for receivers i
/// of w, x0_alt[w] = x0[w] - e. Weight balance makes the reference sum,
/// and hence the consensus value, invariant.
pub fn construct_with_witness<S: Scalar>(
    g: &WeightedDigraph<S>,
    base: &ProtocolSpec<S>,
    witness: usize,
    e: S,
) -> Result<(ProtocolSpec<S>, Vec<usize>), IndistError> {
    let n = g.node_count();
    if witness >= n {
        return Err(IndistError::BadWitness { witness, n });
    }
    if e == S::zero() || !e.is_finite() {
        return Err(IndistError::DegenerateDeviation);
    }
    if base.algorithm != Algorithm::Alg2 {
        return Err(IndistError::NotDynamicStateBase { got: base.algorithm });
    }
    if base.v0.iter().any(|&v| v != S::zero()) {
        return Err(IndistError::AuxiliaryInitNotZero);
    }
    let mut alt = base.clone();
    let mut moved = Vec::new();
    alt.reference[witness] = base.reference[witness] - g.out_degree(witness) * e;
    moved.push(witness);
    for i in g.in_neighbors(witness) {
        alt.reference[i] = base.reference[i] + g.weight(i, witness) * e;
        if i != witness {
            moved.push(i);
        }
    }
    moved.sort_unstable();
    alt.x0[witness] = base.x0[witness] - e;
    Ok((alt, moved))
}

/// Builds the indistinguishable alternative for a private
/// (adversary, target) pair, choosing the witness deterministically.
pub fn construct_alternative<S: Scalar>(
    g: &WeightedDigraph<S>,
    adversary: usize,
    target: usize,
    e: S,
    base: &ProtocolSpec<S>,
) -> Result<AlternativeExecution<S>, IndistError> {
    let witness = find_witness(g, adversary, target)?;
    let (alt, moved_references) = construct_with_witness(g, base, witness, e)?;
    Ok(AlternativeExecution {
        adversary,
        target,
        witness,
        e,
        base: base.clone(),
        alt,
        moved_references,
    })
}

/// Largest difference, over every step and every signal the adversary
/// receives, between two executions. Zero (or roundoff-sized) deviation
/// means the adversary's observations cannot separate the runs.
pub fn verify_indistinguishable<S: Scalar>(
    t1: &ExecutionTrace<S>,
    t2: &ExecutionTrace<S>,
    adversary: usize,
) -> Result<S, IndistError> {
    if t1.graph != t2.graph {
        return Err(IndistError::ShapeMismatch("different graphs".into()));
    }
    if t1.horizon() != t2.horizon() {
        return Err(IndistError::ShapeMismatch(format!(
            "horizons {} vs {}",
            t1.horizon(),
            t2.horizon()
        )));
    }
    let n = t1.node_count();
    if adversary >= n {
        return Err(AdversaryError::NodeOutOfRange { node: adversary, n }.into());
    }
    let mut max_dev = S::zero();
    let mut track = |a: &Vec<Vec<S>>, b: &Vec<Vec<S>>| {
        for (e, &(i, _)) in t1.graph.edges().iter().enumerate() {
            if i != adversary {
                continue;
            }
            for k in 0..a.len() {
                let d = (a[k][e] - b[k][e]).abs();
                if d > max_dev {
                    max_dev = d;
                }
            }
        }
    };
    track(&t1.transmitted_x, &t2.transmitted_x);
    if let (Some(a), Some(b)) = (&t1.transmitted_v, &t2.transmitted_v) {
        track(a, b);
    }
    Ok(max_dev)
}

/// Residuals of the deviation dynamics between a Lemma-style pair of
/// traces, all normalized by max(1, |e|).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorDynamicsReport<S> {
    pub witness: usize,
    /// Planted initial deviation, inferred from the traces.
    pub e: S,
    /// max |x1_i(k) - x2_i(k)| over i != witness and all k.
    pub max_off_witness: S,
    /// max |e_x_w(k) - (1-delta)^k e| over all k.
    pub max_witness_law: S,
    /// max residual of e_v_i(k+1) = e_v_i(k) - delta a_iw e_x_w(k) over
    /// receivers i of the witness.
    pub max_aux_recursion: S,
    /// max |sum of e_v over the witness and its receivers| over all k.
    pub max_aux_sum: S,
    /// |x1(K) - x2(K)| averaged gap: both runs must end at the same value.
    pub final_gap: S,
    pub violations: Vec<String>,
}

impl<S: Scalar> ErrorDynamicsReport<S> {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every law the planted deviation must obey: it stays confined to
/// the witness, decays there by exactly (1-delta) per step, drives the
/// receivers' auxiliary deviations by their incoming weights, sums to zero
/// over the witness and its receivers, and leaves the limit untouched.
pub fn error_dynamics_check<S: Scalar>(
    t1: &ExecutionTrace<S>,
    t2: &ExecutionTrace<S>,
    witness: usize,
) -> Result<ErrorDynamicsReport<S>, IndistError> {
    if t1.graph != t2.graph {
        return Err(IndistError::ShapeMismatch("different graphs".into()));
    }
    if t1.horizon() != t2.horizon() {
        return Err(IndistError::ShapeMismatch("different horizons".into()));
    }
    let n = t1.node_count();
    if witness >= n {
        return Err(IndistError::BadWitness { witness, n });
    }
    let (sv1, sv2) = match (&t1.states_v, &t2.states_v) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(IndistError::ShapeMismatch(
                "traces lack auxiliary state".into(),
            ))
        }
    };
    let horizon = t1.horizon();
    let delta = t1.spec.delta;
    let e = t1.states_x[0][witness] - t2.states_x[0][witness];
    let scale = e.abs().max(S::one());
    let tol = S::lit(1e-9) * scale;
    let mut report = ErrorDynamicsReport {
        witness,
        e,
        max_off_witness: S::zero(),
        max_witness_law: S::zero(),
        max_aux_recursion: S::zero(),
        max_aux_sum: S::zero(),
        final_gap: S::zero(),
        violations: Vec::new(),
    };
    let receivers = t1.graph.in_neighbors(witness);
    let decay = S::one() - delta;
    let mut predicted = e; // (1-delta)^k e
    for k in 0..=horizon {
        for i in 0..n {
            let d = (t1.states_x[k][i] - t2.states_x[k][i]).abs();
            if i == witness {
                let law = (t1.states_x[k][witness] - t2.states_x[k][witness] - predicted).abs();
                if law > report.max_witness_law {
                    report.max_witness_law = law;
                }
            } else if d > report.max_off_witness {
                report.max_off_witness = d;
            }
        }
        let mut sum = sv1[k][witness] - sv2[k][witness];
        for &i in &receivers {
            sum = sum + (sv1[k][i] - sv2[k][i]);
        }
        let sum = sum.abs();
        if sum > report.max_aux_sum {
            report.max_aux_sum = sum;
        }
        if k < horizon {
            let exw = t1.states_x[k][witness] - t2.states_x[k][witness];
            for &i in &receivers {
                let ev_now = sv1[k][i] - sv2[k][i];
                let ev_next = sv1[k + 1][i] - sv2[k + 1][i];
                let residual =
                    (ev_next - (ev_now - delta * t1.graph.weight(i, witness) * exw)).abs();
                if residual > report.max_aux_recursion {
                    report.max_aux_recursion = residual;
                }
            }
        }
        predicted = predicted * decay;
    }
    for i in 0..n {
        let d = (t1.final_x()[i] - t2.final_x()[i]).abs();
        if d > report.final_gap {
            report.final_gap = d;
        }
    }
    if report.max_off_witness > tol {
        report
            .violations
            .push(format!("deviation leaked off the witness: {}", report.max_off_witness));
    }
    if report.max_witness_law > tol {
        report
            .violations
            .push(format!("witness decay law violated: {}", report.max_witness_law));
    }
    if report.max_aux_recursion > tol {
        report
            .violations
            .push(format!("auxiliary recursion violated: {}", report.max_aux_recursion));
    }
    if report.max_aux_sum > tol {
        report
            .violations
            .push(format!("auxiliary deviations do not cancel: {}", report.max_aux_sum));
    }
    Ok(report)
}

/// Serializable certificate for one (adversary, target, e) probe. Node
/// labels are 1-based to match the on-disk graph format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndistReport<S> {
    /// 1-based label of the eavesdropping agent.
    pub adversary: usize,
    /// 1-based label of the protected agent.
    pub target: usize,
    /// 1-based label of the witness carrying the deviation.
    pub witness: usize,
    pub e: S,
    pub max_deviation: S,
    /// Target's reference in the alternative execution.
    pub r_alt: S,
    /// Target's reference in the base execution.
    pub r_base: S,
}

impl<S: Scalar> IndistReport<S> {
    pub fn new(alt: &AlternativeExecution<S>, max_deviation: S) -> Self {
        Self {
            adversary: alt.adversary + 1,
            target: alt.target + 1,
            witness: alt.witness + 1,
            e: alt.e,
            max_deviation,
            r_alt: alt.alt.reference[alt.target],
            r_base: alt.base.reference[alt.target],
        }
    }
}
