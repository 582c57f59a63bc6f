//! Built-in demo assets: the 5-node preset network, the power-dispatch
//! cost data, and the default stepsize/horizon rules.

use crate::graph::WeightedDigraph;
use crate::harness::HarnessError;
use crate::indistinguishability::construct_with_witness;
use crate::protocols::{M1NoiseConfig, ProtocolSpec};

/// Generator cost curvature offsets (1/(2 beta) (p + alpha)^2 cost form),
/// one per agent.
pub const OPD_ALPHA: [f64; 5] = [188.3, 592.5, 2567.2, 1793.3, 2567.2];
/// Generator cost curvature scales, one per agent.
pub const OPD_BETA: [f64; 5] = [7.17, 45.9, 208.2, 166.6, 208.2];
/// Total demand (MW) the dispatch must meet.
pub const OPD_DEMAND: f64 = 1500.0;
/// 0-based index of the eavesdropping agent in the demo (agent 5).
pub const OPD_ADVERSARY: usize = 4;

/// Default mask decay factor for the masked iteration.
pub const DEFAULT_PHI: f64 = 0.9;
/// Default mask standard deviation for the masked iteration.
pub const DEFAULT_SIGMA: f64 = 100.0;
/// Default PRNG seed for demo runs.
pub const DEFAULT_SEED: u64 = 2024;

/// The 5-node undirected demo network (unit weights).
///
/// Edges (1-based): 1-2, 1-3, 1-4, 1-5, 2-3, 4-5. Agent 5 hears agents 1
/// and 4, so the references of agents 1, 2, 3 stay private against it
/// while agent 4 is fully surveilled. Laplacian spectrum {0, 1, 3, 3, 5}.
pub fn demo_graph() -> WeightedDigraph<f64> {
    WeightedDigraph::undirected(
        5,
        &[(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0), (0, 4, 1.0), (1, 2, 1.0), (3, 4, 1.0)],
    )
    .expect("demo graph is valid")
}

/// Default stepsize: 45% of the tighter stability bound, safely inside
/// the stable range of every protocol on the graph.
pub fn default_delta(g: &WeightedDigraph<f64>) -> Result<f64, HarnessError> {
    let bound = g.stepsize_bound()?;
    Ok(0.45 * bound.delta_bar.min(2.0))
}

/// Default horizon: smallest K with (1 - delta)^K < 1e-8.
pub fn default_horizon(delta: f64) -> usize {
    let decay = (1.0 - delta).abs();
    if decay <= 0.0 {
        return 1;
    }
    ((1e-8f64).ln() / decay.ln()).ceil().max(1.0) as usize
}

/// Default mask parameters for demo masked runs.
pub fn default_noise(seed: u64) -> M1NoiseConfig<f64> {
    M1NoiseConfig { phi: DEFAULT_PHI, sigma: DEFAULT_SIGMA, seed }
}

/// The two alternative cost-offset vectors the demo uses to exhibit
/// indistinguishability: generated by the witness construction at agent 2
/// (0-based 1) with deviations -1500 and +1500 applied to the demo alpha
/// data. Their sums match the original exactly.
pub fn alternative_alpha_vectors() -> (Vec<f64>, Vec<f64>) {
    let g = demo_graph();
    let base = ProtocolSpec::alg2(0.18, 1, OPD_ALPHA.to_vec(), OPD_ALPHA.to_vec());
    let (minus, _) =
        construct_with_witness(&g, &base, 1, -1500.0).expect("construction is valid");
    let (plus, _) =
        construct_with_witness(&g, &base, 1, 1500.0).expect("construction is valid");
    (minus.reference, plus.reference)
}
