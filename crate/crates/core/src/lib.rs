//! Average-consensus simulation core: weight-balanced digraphs, consensus
//! protocol engines with full transmission traces, eavesdropper analyses,
//! and coordinate transforms that separate agreement from disagreement.
//!
//! The crate is generic over the floating-point scalar via [`Scalar`]
//! (implemented for `f32` and `f64`); the `f64` instantiations are exported
//! as type aliases at the crate root.

pub mod adversary;
pub mod export;
pub mod graph;
pub mod harness;
pub mod indistinguishability;
pub mod linalg;
pub mod protocols;
pub mod scalar;
pub mod transforms;

pub use adversary::{
    extract_view, full_surveillance, privacy_classifier, recover_reference,
    recover_reference_at, run_observer, AdversaryView, AttackReport,
};
pub use export::{trace_to_csv, write_json, write_trace_csv, RunManifest};
pub use graph::{GraphFile, Spectrum, StepsizeBound, WeightedDigraph};
pub use indistinguishability::{
    construct_alternative, construct_with_witness, error_dynamics_check, find_witness,
    verify_indistinguishable, AlternativeExecution, ErrorDynamicsReport, IndistReport,
};
pub use linalg::Mat;
pub use num_complex::Complex;
pub use protocols::{
    check_admissibility, run, run_alg1, run_alg2, run_alg2_perturbed, run_alg3, run_m1,
    AdmissibilityReport, Algorithm, ExecutionTrace, M1NoiseConfig, PerturbationSignal,
    ProtocolSpec,
};
pub use scalar::Scalar;
pub use transforms::{OrthonormalSplit, QpState};

/// Weight-balanced digraph over `f64`.
pub type Digraph = WeightedDigraph<f64>;
/// Protocol run description over `f64`.
pub type RunSpec = ProtocolSpec<f64>;
/// Recorded protocol run over `f64`.
pub type Trace = ExecutionTrace<f64>;
/// Perturbation signal over `f64`.
pub type Signal = PerturbationSignal<f64>;
/// Adversary's trace slice over `f64`.
pub type View = AdversaryView<f64>;
/// Indistinguishable execution pair over `f64`.
pub type Alternative = AlternativeExecution<f64>;
