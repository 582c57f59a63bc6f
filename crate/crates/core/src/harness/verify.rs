//! Fast self-contained invariant suite behind the `verify` CLI command:
//! re-derives the library's key guarantees on the demo network in well
//! under a second, reporting one pass/fail line per property.

use serde::{Deserialize, Serialize};

use crate::adversary::{extract_view, recover_reference_at, run_observer};
use crate::harness::presets::{default_delta, default_horizon, demo_graph, OPD_ALPHA};
use crate::indistinguishability::{
    construct_alternative, error_dynamics_check, verify_indistinguishable,
};
use crate::graph::WeightedDigraph;
use crate::protocols::{
    run_alg1, run_alg2, run_alg3, run_m1, M1NoiseConfig, ProtocolSpec,
};
use crate::transforms::{to_qp, qp_step_alg2, OrthonormalSplit};

/// One verified property.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &str, pass: bool, detail: String) -> CheckResult {
    CheckResult { name: name.to_string(), pass, detail }
}

/// Runs every check; all should pass on a healthy build.
pub fn run_invariant_suite() -> Vec<CheckResult> {
    let mut results = Vec::new();

    // Stability bounds on hand-solvable graphs.
    {
        let two = WeightedDigraph::undirected(2, &[(0, 1, 1.0)]).unwrap();
        let cycle =
            WeightedDigraph::new(3, &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)]).unwrap();
        let b2 = two.stepsize_bound().map(|b| b.delta_bar).unwrap_or(f64::NAN);
        let b3 = cycle.stepsize_bound().map(|b| b.delta_bar).unwrap_or(f64::NAN);
        let pass = (b2 - 1.0).abs() < 1e-9 && (b3 - 1.0).abs() < 1e-9;
        results.push(check(
            "stepsize-bound-hand-values",
            pass,
            format!("2-node bound {b2}, directed 3-cycle bound {b3} (expected 1, 1)"),
        ));
    }

    let g = demo_graph();
    let delta = default_delta(&g).unwrap_or(0.18);
    let horizon = default_horizon(delta);
    let reference = OPD_ALPHA.to_vec();
    let r_avg = reference.iter().sum::<f64>() / reference.len() as f64;

    // Convergence of every protocol to the reference average.
    {
        let mut worst: f64 = 0.0;
        let mut detail = String::new();
        let traces = [
            ("plain", run_alg1(&g, &ProtocolSpec::alg1(delta, horizon, reference.clone()))),
            (
                "dynamic",
                run_alg2(
                    &g,
                    &ProtocolSpec::alg2(delta, horizon, reference.clone(), reference.clone()),
                ),
            ),
            (
                "init-free",
                run_alg3(
                    &g,
                    &ProtocolSpec::alg3(
                        delta,
                        4 * horizon,
                        reference.clone(),
                        vec![0.0; 5],
                        vec![3.0, -1.0, 2.0, 0.5, 1.5],
                    ),
                ),
            ),
        ];
        let mut pass = true;
        for (label, trace) in traces {
            match trace {
                Ok(t) => {
                    let err = t
                        .final_x()
                        .iter()
                        .map(|x| (x - r_avg).abs())
                        .fold(0.0, f64::max);
                    worst = worst.max(err);
                    if err >= 1e-4 {
                        pass = false;
                    }
                    detail.push_str(&format!("{label} err {err:.2e}; "));
                }
                Err(e) => {
                    pass = false;
                    detail.push_str(&format!("{label} failed: {e}; "));
                }
            }
        }
        let masked = run_m1(
            &g,
            &ProtocolSpec::m1(
                delta,
                6 * horizon,
                reference.clone(),
                M1NoiseConfig { phi: 0.9, sigma: 100.0, seed: 2024 },
            ),
        );
        match masked {
            Ok(t) => {
                let err =
                    t.final_x().iter().map(|x| (x - r_avg).abs()).fold(0.0, f64::max);
                if err >= 1e-2 {
                    pass = false;
                }
                detail.push_str(&format!("masked err {err:.2e}"));
            }
            Err(e) => {
                pass = false;
                detail.push_str(&format!("masked failed: {e}"));
            }
        }
        results.push(check("protocol-convergence", pass, detail));
    }

    // Conservation laws.
    {
        let t1 = run_alg1(&g, &ProtocolSpec::alg1(delta, horizon, reference.clone())).unwrap();
        let drift = t1.max_sum_x_drift();
        let t2 = run_alg2(
            &g,
            &ProtocolSpec::alg2(delta, horizon, reference.clone(), vec![0.0; 5]),
        )
        .unwrap();
        let sum_v = t2.max_sum_v().unwrap();
        let scale = 5.0 * 2567.2;
        let pass = drift <= 1e-9 * scale && sum_v <= 1e-9 * scale;
        results.push(check(
            "conservation-laws",
            pass,
            format!("state-sum drift {drift:.2e}, auxiliary sum {sum_v:.2e}"),
        ));
    }

    // View projection: received signals equal sender states.
    {
        let t = run_alg2(
            &g,
            &ProtocolSpec::alg2(delta, 30, reference.clone(), reference.clone()),
        )
        .unwrap();
        let view = extract_view(&t, 4).unwrap();
        let senders: Vec<usize> = view.received.keys().copied().collect();
        let mut pass = senders == vec![0, 3];
        for (j, series) in &view.received {
            if series != &t.x_series(*j) {
                pass = false;
            }
        }
        results.push(check(
            "view-projection",
            pass,
            format!("adversary 5 observes agents {:?}", senders.iter().map(|s| s + 1).collect::<Vec<_>>()),
        ));
    }

    // Algebraic recovery of the surveilled target, exact at every step.
    {
        let t = run_alg2(
            &g,
            &ProtocolSpec::alg2(delta, 50, reference.clone(), vec![0.0; 5]),
        )
        .unwrap();
        let view = extract_view(&t, 4).unwrap();
        let mut worst: f64 = 0.0;
        for k in 1..=50 {
            if let Ok(est) = recover_reference_at(&view, 3, k) {
                worst = worst.max((est - reference[3]).abs());
            } else {
                worst = f64::INFINITY;
            }
        }
        results.push(check(
            "algebraic-recovery",
            worst < 1e-9,
            format!("worst error across steps {worst:.2e}"),
        ));
    }

    // Observer decay law on the surveilled target. The window is sized so
    // the geometric decay beats the initial gap (~1.8e3) down to 1e-6.
    {
        let window = 2 * horizon;
        let t = run_alg2(
            &g,
            &ProtocolSpec::alg2(delta, window, reference.clone(), vec![0.0; 5]),
        )
        .unwrap();
        let view = extract_view(&t, 4).unwrap();
        match run_observer(&view, 3, window) {
            Ok(z) => {
                let gap0 = (z[0] - reference[3]).abs();
                let predicted = gap0 * (1.0 - delta).powi(window as i32);
                let actual = (z[window] - reference[3]).abs();
                let pass = actual < 1e-6 && (actual - predicted).abs() < 1e-6;
                results.push(check(
                    "observer-decay",
                    pass,
                    format!("final error {actual:.2e}, geometric prediction {predicted:.2e}"),
                ));
            }
            Err(e) => results.push(check("observer-decay", false, e.to_string())),
        }
    }

    // Indistinguishability construction on a private target.
    {
        let base = ProtocolSpec::alg2(delta, horizon, reference.clone(), reference.clone());
        match construct_alternative(&g, 4, 0, 1500.0, &base) {
            Ok(alt) => {
                let t1 = run_alg2(&g, &base).unwrap();
                let t2 = run_alg2(&g, &alt.alt).unwrap();
                let dev = verify_indistinguishable(&t1, &t2, 4).unwrap_or(f64::INFINITY);
                let dynamics = error_dynamics_check(&t1, &t2, alt.witness);
                let clean = dynamics.as_ref().map(|d| d.is_clean()).unwrap_or(false);
                results.push(check(
                    "indistinguishability",
                    dev <= 1e-9 * 1500.0 && clean,
                    format!(
                        "observable deviation {dev:.2e} while target reference moved by {}",
                        alt.alt.reference[0] - base.reference[0]
                    ),
                ));
            }
            Err(e) => results.push(check("indistinguishability", false, e.to_string())),
        }
    }

    // Transformed block dynamics agree with the direct engine.
    {
        let split = OrthonormalSplit::new(5).unwrap();
        let lplus = split.reduced_laplacian(&g).unwrap();
        let spec = ProtocolSpec::alg2(delta, 50, reference.clone(), vec![0.0; 5]);
        let t = run_alg2(&g, &spec).unwrap();
        let sv = t.states_v.as_ref().unwrap();
        let mut qp = to_qp(&split, &sv[0], &t.states_x[0], &spec.reference).unwrap();
        let mut worst: f64 = 0.0;
        for k in 0..50 {
            qp = qp_step_alg2(&qp, delta, &lplus);
            let direct = to_qp(&split, &sv[k + 1], &t.states_x[k + 1], &spec.reference).unwrap();
            worst = worst.max((qp.q1 - direct.q1).abs());
            worst = worst.max((qp.p1 - direct.p1).abs());
            for i in 0..4 {
                worst = worst.max((qp.q_rest[i] - direct.q_rest[i]).abs());
                worst = worst.max((qp.p_rest[i] - direct.p_rest[i]).abs());
            }
        }
        let scale = 5.0 * 2567.2;
        results.push(check(
            "split-coordinate-consistency",
            worst <= 1e-8 * scale,
            format!("max residual {worst:.2e} over 50 steps"),
        ));
    }

    results
}
