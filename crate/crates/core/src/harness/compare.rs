//! Side-by-side privacy comparison of the two protection mechanisms on
//! the demo tasks: additive decaying masks (noisy transients, spread-based
//! protection) versus the dynamic-state protocol (deterministic traces,
//! indistinguishability-based protection).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::extract_view;
use crate::graph::WeightedDigraph;
use crate::harness::presets::{
    default_delta, default_horizon, demo_graph, OPD_ALPHA, OPD_ADVERSARY, OPD_BETA,
};
use crate::harness::HarnessError;
use crate::indistinguishability::{construct_alternative, verify_indistinguishable, IndistReport};
use crate::protocols::{run_alg2, run_m1, M1NoiseConfig, ProtocolSpec};

/// Tunables for the comparison; defaults match the demo writeup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareParams {
    pub sigma: f64,
    pub phi: f64,
    /// Monte-Carlo batch size; run m is seeded with base_seed + m.
    pub mc_runs: usize,
    pub base_seed: u64,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub horizon: Option<usize>,
    /// Witness deviations probed for the indistinguishability certificate.
    pub e_grid: Vec<f64>,
}

impl Default for CompareParams {
    fn default() -> Self {
        Self {
            sigma: 100.0,
            phi: 0.9,
            mc_runs: 400,
            base_seed: 2024,
            delta: None,
            horizon: None,
            e_grid: vec![-1500.0, -10.0, -1.0, 1.0, 10.0, 1500.0],
        }
    }
}

/// Transient-noisiness comparison on one consensus task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskComparison {
    pub label: String,
    /// Total variation of the masked iteration's state trajectories.
    pub tv_masked: f64,
    /// Total variation of the dynamic-state protocol's trajectories.
    pub tv_dynamic: f64,
    /// tv_masked / tv_dynamic.
    pub tv_ratio: f64,
}

/// Empirical spread of the naive first-message estimate "r_j is the first
/// signal agent j sends" across Monte-Carlo masked runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedAgentSpread {
    /// 1-based label of the observed agent.
    pub agent: usize,
    pub empirical_std: f64,
    pub expected_sigma: f64,
    /// |empirical_std - sigma| / sigma.
    pub relative_gap: f64,
}

/// Full comparison record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub delta: f64,
    pub horizon: usize,
    pub sigma: f64,
    pub phi: f64,
    pub mc_runs: usize,
    pub tasks: Vec<TaskComparison>,
    /// Largest masked/dynamic total-variation ratio across the tasks.
    pub tv_ratio_max: f64,
    pub first_message_spread: Vec<ObservedAgentSpread>,
    /// With sigma = 0 the first transmitted value equals the reference
    /// bit for bit: the mask provides no protection at all.
    pub zero_sigma_first_message_discloses_reference: bool,
    /// Indistinguishability certificates for the dynamic-state protocol
    /// over the deviation grid (adversary and first private target of the
    /// demo network).
    pub certificates: Vec<IndistReport<f64>>,
    pub r_alt_min: f64,
    pub r_alt_max: f64,
    pub max_deviation: f64,
    pub notes: Vec<String>,
}

fn sample_std(values: &[f64]) -> f64 {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    var.sqrt()
}

/// Runs the full comparison on the given graph (demo network by default).
pub fn compare_privacy(
    g: Option<&WeightedDigraph<f64>>,
    params: &CompareParams,
) -> Result<ComparisonReport, HarnessError> {
    let default_g;
    let g = match g {
        Some(g) => g,
        None => {
            default_g = demo_graph();
            &default_g
        }
    };
    if !g.is_undirected() {
        return Err(HarnessError::Config(
            "the comparison needs an undirected graph (the masked iteration's demo setting)"
                .into(),
        ));
    }
    let n = g.node_count();
    if n != OPD_ALPHA.len() {
        return Err(HarnessError::Config(format!(
            "comparison data is for {} agents, graph has {n}",
            OPD_ALPHA.len()
        )));
    }
    if params.mc_runs < 2 {
        return Err(HarnessError::Config(
            "need at least 2 Monte-Carlo runs to estimate a spread".into(),
        ));
    }
    let delta = match params.delta {
        Some(d) => d,
        None => default_delta(g)?,
    };
    let horizon = params.horizon.unwrap_or_else(|| default_horizon(delta));
    let adversary = OPD_ADVERSARY;

    // (a) Transient noisiness: both protocols start at the references, so
    // the dynamic-state trajectories coincide with the plain Laplacian
    // iteration and the difference isolates the injected masks.
    let mut tasks = Vec::new();
    for (label, reference) in [
        ("alpha-costs", OPD_ALPHA.to_vec()),
        ("beta-costs", OPD_BETA.to_vec()),
    ] {
        let dynamic = run_alg2(
            g,
            &ProtocolSpec::alg2(delta, horizon, reference.clone(), reference.clone()),
        )?;
        let noise = M1NoiseConfig { phi: params.phi, sigma: params.sigma, seed: params.base_seed };
        let masked = run_m1(g, &ProtocolSpec::m1(delta, horizon, reference, noise))?;
        let tv_dynamic = dynamic.total_variation();
        let tv_masked = masked.total_variation();
        tasks.push(TaskComparison {
            label: label.to_string(),
            tv_masked,
            tv_dynamic,
            tv_ratio: tv_masked / tv_dynamic,
        });
    }
    let tv_ratio_max = tasks.iter().map(|t| t.tv_ratio).fold(f64::NEG_INFINITY, f64::max);

    // (b) Monte-Carlo spread of the first transmitted value per observed
    // agent. Only step 0 matters, so the batch runs a 1-step horizon.
    let observed: Vec<usize> = g.out_neighbors(adversary);
    let firsts: Vec<Vec<f64>> = (0..params.mc_runs)
        .into_par_iter()
        .map(|m| -> Result<Vec<f64>, HarnessError> {
            let noise = M1NoiseConfig {
                phi: params.phi,
                sigma: params.sigma,
                seed: params.base_seed + m as u64,
            };
            let spec = ProtocolSpec::m1(delta, 1, OPD_ALPHA.to_vec(), noise);
            let trace = run_m1(g, &spec)?;
            let view = extract_view(&trace, adversary)
                .map_err(|e| HarnessError::Config(e.to_string()))?;
            Ok(observed.iter().map(|j| view.received[j][0]).collect())
        })
        .collect::<Result<_, _>>()?;
    let first_message_spread: Vec<ObservedAgentSpread> = observed
        .iter()
        .enumerate()
        .map(|(idx, &agent)| {
            let series: Vec<f64> = firsts.iter().map(|row| row[idx]).collect();
            let empirical_std = sample_std(&series);
            ObservedAgentSpread {
                agent: agent + 1,
                empirical_std,
                expected_sigma: params.sigma,
                relative_gap: if params.sigma > 0.0 {
                    (empirical_std - params.sigma).abs() / params.sigma
                } else {
                    empirical_std
                },
            }
        })
        .collect();

    // Degenerate masking: sigma = 0 sends the reference itself.
    let zero_noise = M1NoiseConfig { phi: params.phi, sigma: 0.0, seed: params.base_seed };
    let zero_trace = run_m1(g, &ProtocolSpec::m1(delta, 1, OPD_ALPHA.to_vec(), zero_noise))?;
    let zero_view =
        extract_view(&zero_trace, adversary).map_err(|e| HarnessError::Config(e.to_string()))?;
    let zero_sigma_first_message_discloses_reference = observed
        .iter()
        .all(|j| zero_view.received[j][0] == OPD_ALPHA[*j]);

    // (c) Indistinguishability certificate for the dynamic-state protocol:
    // probe the demo's first private target across the deviation grid.
    let target = 0usize;
    let base = ProtocolSpec::alg2(delta, horizon, OPD_ALPHA.to_vec(), OPD_ALPHA.to_vec());
    let base_trace = run_alg2(g, &base)?;
    let mut certificates = Vec::new();
    for &e in &params.e_grid {
        let alt = construct_alternative(g, adversary, target, e, &base)
            .map_err(|err| HarnessError::Config(err.to_string()))?;
        let alt_trace = run_alg2(g, &alt.alt)?;
        let deviation = verify_indistinguishable(&base_trace, &alt_trace, adversary)
            .map_err(|err| HarnessError::Config(err.to_string()))?;
        certificates.push(IndistReport::new(&alt, deviation));
    }
    let r_alt_min = certificates.iter().map(|c| c.r_alt).fold(f64::INFINITY, f64::min);
    let r_alt_max = certificates.iter().map(|c| c.r_alt).fold(f64::NEG_INFINITY, f64::max);
    let max_deviation = certificates.iter().map(|c| c.max_deviation).fold(0.0, f64::max);

    let notes = vec![
        "The masked/dynamic total-variation ratio depends on the reference scale: tasks \
         whose references span a wide range (alpha-costs) have large deterministic \
         transients that dwarf the injected noise, while flatter tasks (beta-costs) \
         expose it clearly; tv_ratio_max is the headline number."
            .to_string(),
        "Closed-form per-agent estimation error rates for the masked scheme are specific \
         to a benchmark topology that is not part of this repository; the Monte-Carlo \
         first-message spread above is the noise-level check used instead."
            .to_string(),
        "For the dynamic-state protocol the certificate column r_alt grows affinely and \
         unboundedly in the planted deviation while the adversary-visible deviation stays \
         at roundoff level: no estimator, however clever, can pin the target's reference."
            .to_string(),
    ];

    Ok(ComparisonReport {
        delta,
        horizon,
        sigma: params.sigma,
        phi: params.phi,
        mc_runs: params.mc_runs,
        tasks,
        tv_ratio_max,
        first_message_spread,
        zero_sigma_first_message_discloses_reference,
        certificates,
        r_alt_min,
        r_alt_max,
        max_deviation,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comparison_report_has_expected_shape_and_spread() {
        let params = CompareParams { mc_runs: 400, ..CompareParams::default() };
        let report = compare_privacy(None, &params).unwrap();
        assert_eq!(report.tasks.len(), 2);
        assert_eq!(report.first_message_spread.len(), 2, "adversary hears agents 1 and 4");
        for spread in &report.first_message_spread {
            assert!(
                spread.relative_gap < 0.15,
                "agent {} std {} off by {}",
                spread.agent,
                spread.empirical_std,
                spread.relative_gap
            );
        }
        assert!(report.zero_sigma_first_message_discloses_reference);
        assert!(report.tv_ratio_max >= 5.0, "headline ratio {}", report.tv_ratio_max);
        assert!(report.max_deviation <= 1e-9 * 1500.0);
        assert!(report.r_alt_max - report.r_alt_min >= 2999.0, "unbounded alternative range");
        // Deterministic: same params, same report.
        let again = compare_privacy(None, &params).unwrap();
        assert_eq!(report, again);
    }

    #[test]
    fn too_few_runs_is_an_error() {
        let params = CompareParams { mc_runs: 1, ..CompareParams::default() };
        assert!(compare_privacy(None, &params).is_err());
    }
}
