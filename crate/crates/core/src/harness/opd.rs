//! Economic dispatch demo: n generators with quadratic costs
//! (1/(2 beta_i))(p + alpha_i)^2 share a total demand. The collective
//! optimum needs only the network-wide means of alpha and beta, so each
//! agent computes them by average consensus and then dispatches locally.

use serde::{Deserialize, Serialize};

use crate::graph::WeightedDigraph;
use crate::harness::presets::{
    default_delta, default_horizon, demo_graph, OPD_ALPHA, OPD_BETA, OPD_DEMAND,
};
use crate::harness::HarnessError;
use crate::protocols::{run_alg2, ProtocolSpec};

/// Closed-form optimal dispatch:
/// p*_i = beta_i (P_D + n alpha_bar) / (n beta_bar) - alpha_i.
/// The caller supplies the means so consensus estimates can stand in for
/// the exact values.
pub fn opd_dispatch(
    alpha: &[f64],
    beta: &[f64],
    p_d: f64,
    alpha_bar: f64,
    beta_bar: f64,
    n: usize,
) -> Result<Vec<f64>, HarnessError> {
    if alpha.len() != n || beta.len() != n {
        return Err(HarnessError::Config(format!(
            "dispatch data length mismatch: alpha {}, beta {}, n {}",
            alpha.len(),
            beta.len(),
            n
        )));
    }
    if !(beta_bar > 0.0) {
        return Err(HarnessError::Config(format!(
            "mean cost scale must be positive, got {beta_bar}"
        )));
    }
    let price = (p_d + n as f64 * alpha_bar) / (n as f64 * beta_bar);
    Ok((0..n).map(|i| beta[i] * price - alpha[i]).collect())
}

/// Outcome of the end-to-end dispatch demo: consensus estimates of the
/// cost-data means, the dispatches they induce, and their distance from
/// the closed-form optimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpdOutcome {
    pub delta: f64,
    pub horizon: usize,
    /// Per-agent consensus estimate of mean(alpha).
    pub alpha_estimates: Vec<f64>,
    /// Per-agent consensus estimate of mean(beta).
    pub beta_estimates: Vec<f64>,
    pub alpha_bar_exact: f64,
    pub beta_bar_exact: f64,
    /// Worst per-agent estimate error for each consensus task.
    pub consensus_error_alpha: f64,
    pub consensus_error_beta: f64,
    /// Dispatch from exact means.
    pub p_star_exact: Vec<f64>,
    /// Dispatch where each agent i uses its own estimates.
    pub p_star_consensus: Vec<f64>,
    pub dispatch_error_max: f64,
    /// |sum p* - demand| for the exact and consensus dispatches.
    pub demand_gap_exact: f64,
    pub demand_gap_consensus: f64,
}

/// Runs the two consensus tasks (mean of alpha, mean of beta) with the
/// dynamic-state protocol on the demo network, then dispatches.
pub fn run_opd_demo(
    g: Option<&WeightedDigraph<f64>>,
    delta: Option<f64>,
    horizon: Option<usize>,
) -> Result<OpdOutcome, HarnessError> {
    let default_g;
    let g = match g {
        Some(g) => g,
        None => {
            default_g = demo_graph();
            &default_g
        }
    };
    let n = g.node_count();
    if n != OPD_ALPHA.len() {
        return Err(HarnessError::Config(format!(
            "dispatch demo data is for {} agents, graph has {n}",
            OPD_ALPHA.len()
        )));
    }
    let delta = match delta {
        Some(d) => d,
        None => default_delta(g)?,
    };
    let horizon = horizon.unwrap_or_else(|| default_horizon(delta));
    let alpha = OPD_ALPHA.to_vec();
    let beta = OPD_BETA.to_vec();
    let run_task = |reference: Vec<f64>| -> Result<Vec<f64>, HarnessError> {
        let spec = ProtocolSpec::alg2(delta, horizon, reference.clone(), reference);
        Ok(run_alg2(g, &spec)?.final_x().to_vec())
    };
    let alpha_estimates = run_task(alpha.clone())?;
    let beta_estimates = run_task(beta.clone())?;
    let alpha_bar_exact = alpha.iter().sum::<f64>() / n as f64;
    let beta_bar_exact = beta.iter().sum::<f64>() / n as f64;
    let consensus_error_alpha = alpha_estimates
        .iter()
        .map(|e| (e - alpha_bar_exact).abs())
        .fold(0.0, f64::max);
    let consensus_error_beta = beta_estimates
        .iter()
        .map(|e| (e - beta_bar_exact).abs())
        .fold(0.0, f64::max);
    let p_star_exact =
        opd_dispatch(&alpha, &beta, OPD_DEMAND, alpha_bar_exact, beta_bar_exact, n)?;
    // Agent i dispatches with its own estimates of the means.
    let mut p_star_consensus = Vec::with_capacity(n);
    for i in 0..n {
        let p = opd_dispatch(
            &alpha,
            &beta,
            OPD_DEMAND,
            alpha_estimates[i],
            beta_estimates[i],
            n,
        )?;
        p_star_consensus.push(p[i]);
    }
    let dispatch_error_max = p_star_consensus
        .iter()
        .zip(&p_star_exact)
        .map(|(c, e)| (c - e).abs())
        .fold(0.0, f64::max);
    let demand_gap_exact = (p_star_exact.iter().sum::<f64>() - OPD_DEMAND).abs();
    let demand_gap_consensus = (p_star_consensus.iter().sum::<f64>() - OPD_DEMAND).abs();
    Ok(OpdOutcome {
        delta,
        horizon,
        alpha_estimates,
        beta_estimates,
        alpha_bar_exact,
        beta_bar_exact,
        consensus_error_alpha,
        consensus_error_beta,
        p_star_exact,
        p_star_consensus,
        dispatch_error_max,
        demand_gap_exact,
        demand_gap_consensus,
    })
}
