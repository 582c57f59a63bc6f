//! Eavesdropper analyses: what a single curious agent can see, decide, and
//! reconstruct from its own trace slice.
//!
//! The attack functions consume [`AdversaryView`] only — a strict projection
//! of an execution trace — so they cannot accidentally read hidden state.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::WeightedDigraph;
use crate::protocols::{Algorithm, ExecutionTrace};
use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum AdversaryError {
    #[error("node {node} out of range for {n} agents")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("adversary and target must be distinct nodes")]
    IdenticalNodes,
    #[error("adversary does not surveil all communications of agent {target}: agent {missing} is not observed")]
    NotFullySurveilled { target: usize, missing: usize },
    #[error("attack applies to traces of {need}, not {got:?}")]
    UnsupportedAlgorithm { need: &'static str, got: Algorithm },
    #[error("need at least {need} recorded steps, trace has {got}")]
    TraceTooShort { need: usize, got: usize },
    #[error("step {k} outside the recorded range 1..={horizon}")]
    StepOutOfRange { k: usize, horizon: usize },
}

/// Everything a single passive agent knows: the network (public), the
/// protocol and its parameters (public), the agreed auxiliary
/// initialization (public), its own reference and state series, and the
/// signal series received from each of its out-neighbors. Nothing else.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversaryView<S> {
    pub adversary: usize,
    pub algorithm: Algorithm,
    pub delta: S,
    pub horizon: usize,
    pub graph: WeightedDigraph<S>,
    /// Auxiliary initialization assumed publicly known (zeros by protocol).
    pub v0_known: Vec<S>,
    pub own_reference: S,
    pub own_x: Vec<S>,
    pub own_v: Option<Vec<S>>,
    /// sender -> received signal series, one entry per out-neighbor.
    pub received: BTreeMap<usize, Vec<S>>,
    /// Auxiliary signal series, present only when the protocol exchanges v.
    pub received_v: Option<BTreeMap<usize, Vec<S>>>,
}

/// Projects an execution trace onto the knowledge of one agent.
pub fn extract_view<S: Scalar>(
    trace: &ExecutionTrace<S>,
    adversary: usize,
) -> Result<AdversaryView<S>, AdversaryError> {
    let n = trace.node_count();
    if adversary >= n {
        return Err(AdversaryError::NodeOutOfRange { node: adversary, n });
    }
    let g = &trace.graph;
    let mut received = BTreeMap::new();
    let mut received_v: Option<BTreeMap<usize, Vec<S>>> =
        trace.transmitted_v.as_ref().map(|_| BTreeMap::new());
    for (e, &(i, j)) in g.edges().iter().enumerate() {
        if i != adversary {
            continue;
        }
        let series: Vec<S> = trace.transmitted_x.iter().map(|row| row[e]).collect();
        received.insert(j, series);
        if let (Some(map), Some(tv)) = (received_v.as_mut(), trace.transmitted_v.as_ref()) {
            map.insert(j, tv.iter().map(|row| row[e]).collect());
        }
    }
    Ok(AdversaryView {
        adversary,
        algorithm: trace.spec.algorithm,
        delta: trace.spec.delta,
        horizon: trace.horizon(),
        graph: g.clone(),
        v0_known: trace.spec.v0.clone(),
        own_reference: trace.spec.reference[adversary],
        own_x: trace.x_series(adversary),
        own_v: trace.states_v.as_ref().map(|sv| sv.iter().map(|row| row[adversary]).collect()),
        received,
        received_v,
    })
}

/// True when the adversary hears the target and every out-neighbor of the
/// target: the premise under which algebraic recovery works.
pub fn full_surveillance<S: Scalar>(
    g: &WeightedDigraph<S>,
    adversary: usize,
    target: usize,
) -> bool {
    if g.weight(adversary, target) <= S::zero() {
        return false;
    }
    g.out_neighbors(target)
        .into_iter()
        .all(|j| j == adversary || g.weight(adversary, j) > S::zero())
}

/// Decides from topology alone whether the target's reference stays private
/// against the given passive adversary.
///
/// Private iff some agent receives the target's signals out of the
/// adversary's earshot: there is a witness w in N_out(target) ∪ {target}
/// with w ∉ N_out(adversary) ∪ {adversary}. (The target itself is a valid
/// witness when the adversary does not hear it; perturbing the target's
/// reference and initial state together then leaves every observable
/// signal unchanged.) Equivalently: not private exactly when the adversary
/// fully surveils the target's communications.
pub fn privacy_classifier<S: Scalar>(
    g: &WeightedDigraph<S>,
    adversary: usize,
    target: usize,
) -> Result<bool, AdversaryError> {
    let n = g.node_count();
    for node in [adversary, target] {
        if node >= n {
            return Err(AdversaryError::NodeOutOfRange { node, n });
        }
    }
    if adversary == target {
        return Err(AdversaryError::IdenticalNodes);
    }
    Ok(!full_surveillance(g, adversary, target))
}

fn check_attack_preconditions<S: Scalar>(
    view: &AdversaryView<S>,
    target: usize,
    allow_perturbed: bool,
) -> Result<(), AdversaryError> {
    let n = view.graph.node_count();
    if target >= n {
        return Err(AdversaryError::NodeOutOfRange { node: target, n });
    }
    if target == view.adversary {
        return Err(AdversaryError::IdenticalNodes);
    }
    let supported = view.algorithm == Algorithm::Alg2
        || (allow_perturbed && view.algorithm == Algorithm::Alg2Perturbed);
    if !supported {
        return Err(AdversaryError::UnsupportedAlgorithm {
            need: if allow_perturbed {
                "the dynamic-state protocol (perturbed or not)"
            } else {
                "the dynamic-state protocol"
            },
            got: view.algorithm,
        });
    }
    if !view.received.contains_key(&target) {
        return Err(AdversaryError::NotFullySurveilled { target, missing: target });
    }
    for j in view.graph.out_neighbors(target) {
        if j != view.adversary && !view.received.contains_key(&j) {
            return Err(AdversaryError::NotFullySurveilled { target, missing: j });
        }
    }
    Ok(())
}

/// Signal series of `agent` as the adversary sees it: its own states for
/// itself, the received series otherwise. Callers must have verified the
/// agent is observed.
fn observed_series<'a, S: Scalar>(view: &'a AdversaryView<S>, agent: usize) -> &'a [S] {
    if agent == view.adversary {
        &view.own_x
    } else {
        &view.received[&agent]
    }
}

/// sum_j a_tj (x_t(m) - x_j(m)) computed from observed series.
fn observed_laplacian_difference<S: Scalar>(
    view: &AdversaryView<S>,
    target: usize,
    m: usize,
) -> S {
    let xt = observed_series(view, target)[m];
    view.graph
        .out_neighbors(target)
        .into_iter()
        .map(|j| view.graph.weight(target, j) * (xt - observed_series(view, j)[m]))
        .sum()
}

/// Reconstructs the target's reference from observed signals alone,
/// using the first k update steps of the trace.
///
/// Replays the auxiliary recursion v(m+1) = v(m) + delta * s(m) from the
/// publicly known v(0), then solves the x-update for the reference:
/// r = (x(k) - x(k-1))/delta + x(k-1) + s(k-1) + v(k-1).
/// Exact (within roundoff) at every k >= 1 when the preconditions hold.
pub fn recover_reference_at<S: Scalar>(
    view: &AdversaryView<S>,
    target: usize,
    k: usize,
) -> Result<S, AdversaryError> {
    check_attack_preconditions(view, target, false)?;
    if view.horizon < 1 {
        return Err(AdversaryError::TraceTooShort { need: 2, got: view.horizon + 1 });
    }
    if k < 1 || k > view.horizon {
        return Err(AdversaryError::StepOutOfRange { k, horizon: view.horizon });
    }
    let delta = view.delta;
    let mut v_hat = view.v0_known[target];
    for m in 0..k - 1 {
        v_hat = v_hat + delta * observed_laplacian_difference(view, target, m);
    }
    let x = observed_series(view, target);
    let s_prev = observed_laplacian_difference(view, target, k - 1);
    Ok((x[k] - x[k - 1]) / delta + x[k - 1] + s_prev + v_hat)
}

/// Reconstructs the target's reference using the full recorded trace.
pub fn recover_reference<S: Scalar>(
    view: &AdversaryView<S>,
    target: usize,
) -> Result<S, AdversaryError> {
    recover_reference_at(view, target, view.horizon)
}

/// Runs the asymptotic observer against the target for `steps` update
/// steps (at most the recorded horizon) and returns the estimate
/// trajectory ẑ(0..=steps).
///
/// State: v̂(0) = known v0 of the target, x̂(0) = 0;
/// x̂(k+1) = x̂(k) + delta (s(k) + v̂(k) - x̂(k)),
/// v̂(k+1) = v̂(k) + delta s(k),
/// ẑ(k) = x̂(k) + x_t(k), with s(k) the observed Laplacian difference.
/// v̂ then reproduces the target's auxiliary state exactly, and ẑ obeys
/// ẑ(k+1) = ẑ(k) + delta (r_t + f_t(k) - ẑ(k)): a geometric approach to
/// the target's reference, shifted by the perturbation's discounted tail.
pub fn run_observer<S: Scalar>(
    view: &AdversaryView<S>,
    target: usize,
    steps: usize,
) -> Result<Vec<S>, AdversaryError> {
    check_attack_preconditions(view, target, true)?;
    if steps > view.horizon {
        return Err(AdversaryError::StepOutOfRange { k: steps, horizon: view.horizon });
    }
    let delta = view.delta;
    let x_t = observed_series(view, target);
    let mut v_hat = view.v0_known[target];
    let mut x_hat = S::zero();
    let mut z = Vec::with_capacity(steps + 1);
    z.push(x_hat + x_t[0]);
    for m in 0..steps {
        let s = observed_laplacian_difference(view, target, m);
        x_hat = x_hat + delta * (s + v_hat - x_hat);
        v_hat = v_hat + delta * s;
        z.push(x_hat + x_t[m + 1]);
    }
    Ok(z)
}

/// Serializable record of one reconstruction attempt. Node labels are
/// 1-based to match the on-disk graph format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport<S> {
    /// 1-based label of the attacked agent.
    pub target: usize,
    pub method: String,
    pub estimate: S,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub true_value: Option<S>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abs_error: Option<S>,
    pub steps_used: usize,
}

impl<S: Scalar> AttackReport<S> {
    pub fn new(
        target_zero_based: usize,
        method: &str,
        estimate: S,
        true_value: Option<S>,
        steps_used: usize,
    ) -> Self {
        Self {
            target: target_zero_based + 1,
            method: method.to_string(),
            estimate,
            true_value,
            abs_error: true_value.map(|t| (estimate - t).abs()),
            steps_used,
        }
    }
}
