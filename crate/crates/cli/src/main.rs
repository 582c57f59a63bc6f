//! Command-line driver around the consensus simulation core.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use consim_core::harness::{
    compare_privacy, resolve_out_dir, run_experiment, run_invariant_suite, run_opd_demo,
    CompareParams, ExperimentConfig,
};
use consim_core::{Digraph, GraphFile};

#[derive(Parser)]
#[command(
    name = "consim",
    version,
    about = "Average-consensus simulation: protocols, eavesdropper analyses, and demos"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute a JSON experiment config: runs, attacks, and probes.
    Run {
        /// Path to the experiment config (JSON).
        config: PathBuf,
        /// Output directory (overrides CONSIM_OUT_DIR and the config).
        #[arg(long)]
        out: Option<String>,
    },
    /// Economic dispatch demo: two consensus tasks feed the optimal split.
    Opd {
        /// Stepsize (default: 45% of the graph's stability bound).
        #[arg(long)]
        delta: Option<f64>,
        /// Number of consensus steps (default: decay below 1e-8).
        #[arg(long)]
        steps: Option<usize>,
        /// Graph file (default: built-in 5-node demo network).
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Output directory for opd.json.
        #[arg(long)]
        out: Option<String>,
    },
    /// Compare the masking and dynamic-state privacy mechanisms.
    Compare {
        /// Monte-Carlo batch size (default 400).
        #[arg(long)]
        runs: Option<usize>,
        /// Mask standard deviation (default 100).
        #[arg(long)]
        sigma: Option<f64>,
        /// Mask decay factor (default 0.9).
        #[arg(long)]
        phi: Option<f64>,
        /// Base PRNG seed (default 2024).
        #[arg(long)]
        seed: Option<u64>,
        /// Graph file (default: built-in 5-node demo network).
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Output directory for compare.json.
        #[arg(long)]
        out: Option<String>,
    },
    /// Run the fast invariant self-check suite.
    Verify,
    /// Print a graph's Laplacian spectrum and stable stepsize ranges.
    Spectrum {
        /// Graph file (JSON with 1-based node labels).
        graph: PathBuf,
    },
}

fn load_graph(path: &Path) -> Result<Digraph> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let file: GraphFile<f64> = serde_json::from_str(&text).map_err(|e| {
        anyhow::anyhow!(
            "graph parse error in {} at line {}, column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        )
    })?;
    Ok(file.into_graph()?)
}

fn plain_out_dir(flag: Option<&str>) -> PathBuf {
    if let Some(f) = flag {
        return PathBuf::from(f);
    }
    if let Ok(env_dir) = std::env::var("CONSIM_OUT_DIR") {
        if !env_dir.is_empty() {
            return PathBuf::from(env_dir);
        }
    }
    PathBuf::from("consim-out")
}

fn write_report<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create {}", dir.display()))?;
    let path = dir.join(name);
    consim_core::write_json(&path, value)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Cmd::Run { config, out } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let base_dir = config.parent().unwrap_or(Path::new(".")).to_path_buf();
            let out_dir = resolve_out_dir(out.as_deref(), &cfg);
            let summary = run_experiment(&cfg, &base_dir, &out_dir)?;
            for run in &summary.runs {
                println!(
                    "run '{}': {:?} delta={} steps={} estimate={} (target {}, max error {:.3e})",
                    run.label,
                    run.algorithm,
                    run.delta,
                    run.horizon,
                    run.consensus_estimate,
                    run.reference_average,
                    run.max_final_error
                );
            }
            for verdict in &summary.privacy {
                println!(
                    "privacy: target {} is {}",
                    verdict.target,
                    if verdict.private { "private" } else { "not private" }
                );
            }
            for report in &summary.attack_reports {
                println!(
                    "attack [{}] target {}: estimate {}{}",
                    report.method,
                    report.target,
                    report.estimate,
                    report
                        .abs_error
                        .map(|e| format!(" (|error| {e:.3e})"))
                        .unwrap_or_default()
                );
            }
            for report in &summary.indist_reports {
                println!(
                    "indistinguishable: target {} r_alt={} (witness {}, e={}, deviation {:.3e})",
                    report.target, report.r_alt, report.witness, report.e, report.max_deviation
                );
            }
            println!("wrote {}", out_dir.join("summary.json").display());
            if summary.violations.is_empty() {
                Ok(ExitCode::SUCCESS)
            } else {
                for v in &summary.violations {
                    eprintln!("violation: {v}");
                }
                Ok(ExitCode::FAILURE)
            }
        }
        Cmd::Opd { delta, steps, graph, out } => {
            let loaded = graph.as_deref().map(load_graph).transpose()?;
            let outcome = run_opd_demo(loaded.as_ref(), delta, steps)?;
            println!(
                "consensus means: alpha {} (exact {}), beta {} (exact {})",
                outcome.alpha_estimates[0],
                outcome.alpha_bar_exact,
                outcome.beta_estimates[0],
                outcome.beta_bar_exact
            );
            for (i, (c, e)) in outcome
                .p_star_consensus
                .iter()
                .zip(&outcome.p_star_exact)
                .enumerate()
            {
                println!("generator {}: dispatch {c} (exact {e})", i + 1);
            }
            println!(
                "demand gap: exact {:.3e}, consensus {:.3e}; worst dispatch error {:.3e}",
                outcome.demand_gap_exact, outcome.demand_gap_consensus, outcome.dispatch_error_max
            );
            let path = write_report(&plain_out_dir(out.as_deref()), "opd.json", &outcome)?;
            println!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Compare { runs, sigma, phi, seed, graph, out } => {
            let mut params = CompareParams::default();
            if let Some(r) = runs {
                params.mc_runs = r;
            }
            if let Some(s) = sigma {
                params.sigma = s;
            }
            if let Some(p) = phi {
                params.phi = p;
            }
            if let Some(s) = seed {
                params.base_seed = s;
            }
            let loaded = graph.as_deref().map(load_graph).transpose()?;
            let report = compare_privacy(loaded.as_ref(), &params)?;
            for task in &report.tasks {
                println!(
                    "task {}: masked TV {:.4e}, dynamic TV {:.4e}, ratio {:.2}",
                    task.label, task.tv_masked, task.tv_dynamic, task.tv_ratio
                );
            }
            println!("headline masked/dynamic ratio: {:.2}", report.tv_ratio_max);
            for spread in &report.first_message_spread {
                println!(
                    "first-message spread at agent {}: std {:.2} (sigma {}, gap {:.1}%)",
                    spread.agent,
                    spread.empirical_std,
                    spread.expected_sigma,
                    100.0 * spread.relative_gap
                );
            }
            println!(
                "dynamic-state certificate: deviation {:.3e} while r_alt spans [{}, {}]",
                report.max_deviation, report.r_alt_min, report.r_alt_max
            );
            let path = write_report(&plain_out_dir(out.as_deref()), "compare.json", &report)?;
            println!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Verify => {
            let results = run_invariant_suite();
            let mut ok = true;
            for r in &results {
                println!("{} {} — {}", if r.pass { "PASS" } else { "FAIL" }, r.name, r.detail);
                ok &= r.pass;
            }
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Cmd::Spectrum { graph } => {
            let g = load_graph(&graph)?;
            println!("nodes: {}, edges: {}", g.node_count(), g.edge_count());
            println!("hash: {}", g.content_hash());
            let spectrum = g.spectrum()?;
            for z in &spectrum.eigenvalues {
                println!("eigenvalue: {} {:+}i", z.re, z.im);
            }
            let bound = g.stepsize_bound()?;
            println!("stepsize bound: {}", bound.delta_bar);
            println!(
                "stable ranges: memoryless ({}, {}), dynamic-state ({}, {})",
                bound.alg1_range.0, bound.alg1_range.1, bound.alg2_range.0, bound.alg2_range.1
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}
