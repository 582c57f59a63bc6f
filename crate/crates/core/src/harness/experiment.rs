//! Batch experiment driver: executes configured runs, re-validates
//! invariants, performs the requested adversary analyses, and writes
//! traces plus structured reports into the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adversary::{
    extract_view, privacy_classifier, recover_reference, run_observer, AttackReport,
};
use crate::export::{write_json, write_trace_csv, RunManifest};
use crate::graph::WeightedDigraph;
use crate::harness::config::ExperimentConfig;
use crate::harness::figures::{deviation_triple_csv, trajectories_long_csv};
use crate::harness::HarnessError;
use crate::indistinguishability::{
    construct_alternative, error_dynamics_check, verify_indistinguishable, IndistReport,
};
use crate::protocols::{run, Algorithm, ExecutionTrace};

/// Per-run outcome line in the experiment summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub label: String,
    pub algorithm: Algorithm,
    pub delta: f64,
    pub horizon: usize,
    /// Mean of the final states: the consensus estimate.
    pub consensus_estimate: f64,
    /// Mean of the references: the target value.
    pub reference_average: f64,
    /// Worst per-agent distance from the reference average at the end.
    pub max_final_error: f64,
    /// max_k |sum x(k) - sum x(0)|.
    pub sum_x_drift: f64,
    /// max_k |sum v(k)| where the algorithm has auxiliary state.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sum_v_max: Option<f64>,
    pub trace_csv: String,
}

/// Topology verdict for one (adversary, target) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyVerdict {
    /// 1-based target label.
    pub target: usize,
    pub private: bool,
}

/// Everything the experiment produced, also written as `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub graph_hash: String,
    pub node_count: usize,
    pub runs: Vec<RunSummary>,
    pub privacy: Vec<PrivacyVerdict>,
    pub attack_reports: Vec<AttackReport<f64>>,
    pub indist_reports: Vec<IndistReport<f64>>,
    /// Invariant violations; a non-empty list makes the CLI exit nonzero.
    pub violations: Vec<String>,
}

fn sanitize_label(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '-' })
        .collect()
}

fn check_run_invariants(
    label: &str,
    trace: &ExecutionTrace<f64>,
    violations: &mut Vec<String>,
) {
    if let Err(e) = trace.validate_transmissions() {
        violations.push(format!("run '{label}': {e}"));
    }
    let scale = trace.states_x[0]
        .iter()
        .map(|x| x.abs())
        .fold(1.0, f64::max)
        * trace.node_count() as f64;
    match trace.spec.algorithm {
        Algorithm::Alg1 => {
            let drift = trace.max_sum_x_drift();
            if drift > 1e-9 * scale {
                violations.push(format!(
                    "run '{label}': state sum drifted by {drift} (limit {})",
                    1e-9 * scale
                ));
            }
        }
        Algorithm::Alg2 | Algorithm::Alg2Perturbed | Algorithm::Alg3 => {
            // The auxiliary sum is conserved; with a zero start it must stay
            // at roundoff scale. (Alg3 conserves it at whatever it started.)
            if trace.spec.v0.iter().all(|&v| v == 0.0) {
                if let Some(sum_v) = trace.max_sum_v() {
                    let v_scale = scale.max(
                        trace.spec.reference.iter().map(|r| r.abs()).fold(1.0, f64::max)
                            * trace.node_count() as f64,
                    );
                    if sum_v > 1e-9 * v_scale {
                        violations.push(format!(
                            "run '{label}': auxiliary sum reached {sum_v} (limit {})",
                            1e-9 * v_scale
                        ));
                    }
                }
            }
        }
        Algorithm::M1 => {}
    }
}

/// Executes the whole configured experiment. `base_dir` anchors relative
/// graph paths (usually the config file's directory); all outputs go to
/// `out_dir`, created if needed.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    base_dir: &Path,
    out_dir: &Path,
) -> Result<ExperimentSummary, HarnessError> {
    let g: WeightedDigraph<f64> = cfg.load_graph(base_dir)?;
    let n = g.node_count();
    fs::create_dir_all(out_dir)
        .map_err(|e| HarnessError::Io(format!("cannot create {}: {e}", out_dir.display())))?;

    let mut violations = Vec::new();
    let mut run_summaries = Vec::new();
    let mut traces: Vec<(String, ExecutionTrace<f64>)> = Vec::new();

    for run_cfg in &cfg.runs {
        let spec = run_cfg.to_spec(&g)?;
        let trace = run(&g, &spec)?;
        check_run_invariants(&run_cfg.label, &trace, &mut violations);
        let file_stem = sanitize_label(&run_cfg.label);
        let csv_name = format!("{file_stem}.csv");
        write_trace_csv(&out_dir.join(&csv_name), &trace)
            .map_err(|e| HarnessError::Io(e.to_string()))?;
        let manifest = RunManifest::from_trace(&run_cfg.label, &csv_name, &trace);
        write_json(&out_dir.join(format!("{file_stem}.manifest.json")), &manifest)
            .map_err(|e| HarnessError::Io(e.to_string()))?;
        let reference_average =
            spec.reference.iter().sum::<f64>() / spec.reference.len() as f64;
        let consensus_estimate =
            trace.final_x().iter().sum::<f64>() / trace.final_x().len() as f64;
        let max_final_error = trace
            .final_x()
            .iter()
            .map(|x| (x - reference_average).abs())
            .fold(0.0, f64::max);
        run_summaries.push(RunSummary {
            label: run_cfg.label.clone(),
            algorithm: spec.algorithm,
            delta: spec.delta,
            horizon: spec.horizon,
            consensus_estimate,
            reference_average,
            max_final_error,
            sum_x_drift: trace.max_sum_x_drift(),
            sum_v_max: trace.max_sum_v(),
            trace_csv: csv_name,
        });
        traces.push((run_cfg.label.clone(), trace));
    }

    // Adversary analyses operate on the first dynamic-state run.
    let adversary = cfg.adversary_index(n)?;
    let targets = cfg.target_indices(n)?;
    let mut privacy = Vec::new();
    let mut attack_reports = Vec::new();
    let mut indist_reports = Vec::new();

    if let Some(adv) = adversary {
        for &t in &targets {
            if t == adv {
                continue;
            }
            let private = privacy_classifier(&g, adv, t)
                .map_err(|e| HarnessError::Config(e.to_string()))?;
            privacy.push(PrivacyVerdict { target: t + 1, private });
        }

        let base_run = traces
            .iter()
            .find(|(_, trace)| trace.spec.algorithm == Algorithm::Alg2);
        let needs_base = cfg.attacks.recovery
            || cfg.attacks.observer
            || cfg.indistinguishability.is_some();
        if needs_base && base_run.is_none() {
            return Err(HarnessError::Config(
                "adversary analyses need at least one dynamic-state (alg2) run".into(),
            ));
        }
        if let Some((_, base_trace)) = base_run {
            let view = extract_view(base_trace, adv)
                .map_err(|e| HarnessError::Config(e.to_string()))?;
            for &t in &targets {
                if t == adv {
                    continue;
                }
                let true_value = base_trace.spec.reference[t];
                if cfg.attacks.recovery {
                    if let Ok(estimate) = recover_reference(&view, t) {
                        let report = AttackReport::new(
                            t,
                            "algebraic-recovery",
                            estimate,
                            Some(true_value),
                            view.horizon,
                        );
                        if report.abs_error.unwrap_or(f64::INFINITY) > 1e-9 {
                            violations.push(format!(
                                "recovery on target {} missed by {}",
                                t + 1,
                                report.abs_error.unwrap()
                            ));
                        }
                        attack_reports.push(report);
                    }
                }
                if cfg.attacks.observer {
                    if let Ok(z) = run_observer(&view, t, view.horizon) {
                        attack_reports.push(AttackReport::new(
                            t,
                            "asymptotic-observer",
                            *z.last().expect("observer returns at least one step"),
                            Some(true_value),
                            view.horizon,
                        ));
                    }
                }
            }

            if let Some(indist) = &cfg.indistinguishability {
                let base_spec = &base_trace.spec;
                let mut first_triple: Option<(ExecutionTrace<f64>, ExecutionTrace<f64>)> = None;
                for &t in &targets {
                    if t == adv
                        || !privacy
                            .iter()
                            .any(|p| p.target == t + 1 && p.private)
                    {
                        continue;
                    }
                    let mut alt_traces = Vec::new();
                    for &e in &indist.e_grid {
                        let alt = construct_alternative(&g, adv, t, e, base_spec)
                            .map_err(|err| HarnessError::Config(err.to_string()))?;
                        let alt_trace = run(&g, &alt.alt)?;
                        let deviation =
                            verify_indistinguishable(base_trace, &alt_trace, adv)
                                .map_err(|err| HarnessError::Config(err.to_string()))?;
                        if deviation > 1e-9 * e.abs().max(1.0) {
                            violations.push(format!(
                                "indistinguishability broken for target {} at e={e}: deviation {deviation}",
                                t + 1
                            ));
                        }
                        let dynamics = error_dynamics_check(base_trace, &alt_trace, alt.witness)
                            .map_err(|err| HarnessError::Config(err.to_string()))?;
                        for v in &dynamics.violations {
                            violations
                                .push(format!("error dynamics for target {}: {v}", t + 1));
                        }
                        indist_reports.push(IndistReport::new(&alt, deviation));
                        alt_traces.push(alt_trace);
                    }
                    if first_triple.is_none() && alt_traces.len() >= 2 {
                        let mut it = alt_traces.into_iter();
                        first_triple = Some((it.next().unwrap(), it.next().unwrap()));
                    }
                }
                if let Some((ta, tb)) = &first_triple {
                    let csv = deviation_triple_csv(base_trace, ta, tb)?;
                    fs::write(out_dir.join("deviations.csv"), csv)
                        .map_err(|e| HarnessError::Io(e.to_string()))?;
                }
            }
        }
    }

    if !traces.is_empty() {
        let labeled: Vec<(&str, &ExecutionTrace<f64>)> =
            traces.iter().map(|(l, t)| (l.as_str(), t)).collect();
        fs::write(out_dir.join("trajectories.csv"), trajectories_long_csv(&labeled))
            .map_err(|e| HarnessError::Io(e.to_string()))?;
    }

    let summary = ExperimentSummary {
        graph_hash: g.content_hash(),
        node_count: n,
        runs: run_summaries,
        privacy,
        attack_reports,
        indist_reports,
        violations,
    };
    write_json(&out_dir.join("summary.json"), &summary)
        .map_err(|e| HarnessError::Io(e.to_string()))?;
    Ok(summary)
}

/// Resolves the output directory: CLI flag, then environment variable
/// `CONSIM_OUT_DIR`, then the config's `output_dir`, then `./consim-out`.
pub fn resolve_out_dir(flag: Option<&str>, cfg: &ExperimentConfig) -> PathBuf {
    if let Some(f) = flag {
        return PathBuf::from(f);
    }
    if let Ok(env_dir) = std::env::var("CONSIM_OUT_DIR") {
        if !env_dir.is_empty() {
            return PathBuf::from(env_dir);
        }
    }
    if let Some(dir) = &cfg.output_dir {
        return PathBuf::from(dir);
    }
    PathBuf::from("consim-out")
}
