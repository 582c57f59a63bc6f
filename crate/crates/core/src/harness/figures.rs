//! Plot-ready CSV bundles: consensus trajectories across labeled runs,
//! and indistinguishable-execution triples with their pairwise state
//! deviations.

use std::fmt::Write as _;

use crate::harness::HarnessError;
use crate::protocols::ExecutionTrace;

/// Long-format trajectories of several labeled runs:
/// `k,agent,label,x` with 1-based agents. Suited to overlaying runs of
/// different algorithms on one axis.
pub fn trajectories_long_csv(runs: &[(&str, &ExecutionTrace<f64>)]) -> String {
    let mut out = String::from("k,agent,label,x\n");
    for (label, trace) in runs {
        let n = trace.node_count();
        for k in 0..trace.states_x.len() {
            for i in 0..n {
                let _ = writeln!(out, "{},{},{},{}", k, i + 1, label, trace.states_x[k][i]);
            }
        }
    }
    out
}

/// Wide-format comparison of three executions of the same shape:
/// `k,agent,x_base,x_alt_a,x_alt_b,e_a,e_b` with e_a = x_base - x_alt_a
/// and e_b = x_base - x_alt_b. For a valid indistinguishable triple the
/// deviation columns vanish everywhere except at the witness, where they
/// decay geometrically.
pub fn deviation_triple_csv(
    base: &ExecutionTrace<f64>,
    alt_a: &ExecutionTrace<f64>,
    alt_b: &ExecutionTrace<f64>,
) -> Result<String, HarnessError> {
    let n = base.node_count();
    let rows = base.states_x.len();
    for (name, t) in [("first", alt_a), ("second", alt_b)] {
        if t.node_count() != n || t.states_x.len() != rows {
            return Err(HarnessError::Config(format!(
                "{name} alternative trace has a different shape than the base run"
            )));
        }
    }
    let mut out = String::from("k,agent,x_base,x_alt_a,x_alt_b,e_a,e_b\n");
    for k in 0..rows {
        for i in 0..n {
            let xb = base.states_x[k][i];
            let xa = alt_a.states_x[k][i];
            let xc = alt_b.states_x[k][i];
            let _ = writeln!(out, "{},{},{},{},{},{},{}", k, i + 1, xb, xa, xc, xb - xa, xb - xc);
        }
    }
    Ok(out)
}
