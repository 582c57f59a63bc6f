//! Shared fixtures for the integration suite: an eigenvalue oracle that
//! goes through the characteristic polynomial (a different route than the
//! library's Hessenberg/QR iteration), seeded random graph families, and
//! brute-force privacy deciders built on exhaustive simulation.
#![allow(dead_code)]

use consim_core::{
    construct_with_witness, extract_view, recover_reference, run_alg2,
    verify_indistinguishable, Complex, Digraph, Mat, RunSpec, Trace,
};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------------------
// Eigenvalue oracle: characteristic polynomial + simultaneous root finding.
// ---------------------------------------------------------------------------

/// Coefficients c[0..=n] of det(lambda I - A) = sum c[k] lambda^k with
/// c[n] = 1, by the Faddeev–LeVerrier trace recursion.
pub fn char_poly(a: &Mat<f64>) -> Vec<f64> {
    let n = a.rows();
    assert_eq!(n, a.cols(), "characteristic polynomial needs a square matrix");
    let mut coeffs = vec![0.0; n + 1];
    coeffs[n] = 1.0;
    let mut m = a.clone(); // M_1 = A
    for k in 1..=n {
        let trace: f64 = (0..n).map(|i| m[(i, i)]).sum();
        let c = -trace / k as f64;
        coeffs[n - k] = c;
        if k == n {
            break;
        }
        // M_{k+1} = A (M_k + c I)
        let mut shifted = m;
        for i in 0..n {
            shifted[(i, i)] += c;
        }
        m = a.mul(&shifted);
    }
    coeffs
}

/// Evaluates the polynomial sum c[k] z^k by Horner's rule.
fn eval_poly(coeffs: &[Complex<f64>], z: Complex<f64>) -> Complex<f64> {
    let mut acc = Complex::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        acc = acc * z + c;
    }
    acc
}

/// All roots of the real polynomial by the Durand–Kerner simultaneous
/// iteration. Good to roughly sqrt(machine epsilon) on multiple roots,
/// which is the conditioning limit of any coefficient-based method.
pub fn poly_roots(coeffs: &[f64]) -> Vec<Complex<f64>> {
    let n = coeffs.len() - 1;
    let lead = coeffs[n];
    assert!(lead != 0.0, "leading coefficient must be nonzero");
    let monic: Vec<Complex<f64>> =
        coeffs.iter().map(|&c| Complex::new(c / lead, 0.0)).collect();
    // Cauchy-style inclusion radius: all roots lie within 1 + max |c_k|.
    let radius = 1.0 + monic.iter().take(n).map(|c| c.norm()).fold(0.0, f64::max);
    let seed = Complex::new(0.4, 0.9);
    let mut roots: Vec<Complex<f64>> = (0..n)
        .map(|i| seed.powu(i as u32 + 1) * radius)
        .collect();
    for _ in 0..2000 {
        let mut max_step = 0.0f64;
        for i in 0..n {
            let mut denom = Complex::new(1.0, 0.0);
            for j in 0..n {
                if j != i {
                    denom *= roots[i] - roots[j];
                }
            }
            let step = eval_poly(&monic, roots[i]) / denom;
            roots[i] -= step;
            max_step = max_step.max(step.norm());
        }
        if max_step < 1e-13 * radius.max(1.0) {
            break;
        }
    }
    roots
}

/// Sorts eigenvalues by real part, ties by imaginary part.
pub fn sort_eigenvalues(values: &mut [Complex<f64>]) {
    values.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap()
            .then(a.im.partial_cmp(&b.im).unwrap())
    });
}

/// Laplacian spectrum via the characteristic-polynomial route, sorted.
pub fn oracle_laplacian_spectrum(g: &Digraph) -> Vec<Complex<f64>> {
    let mut roots = poly_roots(&char_poly(g.laplacian()));
    sort_eigenvalues(&mut roots);
    roots
}

/// Expands the monic polynomial with the given roots back into real
/// coefficients c[0..=n] (imaginary residue must cancel for a spectrum of
/// a real matrix; the caller's tolerance absorbs roundoff).
pub fn poly_from_roots(roots: &[Complex<f64>]) -> Vec<f64> {
    let mut coeffs = vec![Complex::new(1.0, 0.0)];
    for &root in roots {
        let mut next = vec![Complex::new(0.0, 0.0); coeffs.len() + 1];
        for (k, &c) in coeffs.iter().enumerate() {
            next[k + 1] += c;
            next[k] -= c * root;
        }
        coeffs = next;
    }
    coeffs.iter().map(|c| c.re).collect()
}

/// Asserts two eigenvalue multisets agree: greedily pairs each left value
/// with its nearest unused right value and checks every pair within `tol`.
/// Robust to ordering flips between nearly-equal values (conjugate pairs
/// whose real parts differ in the last ulp).
pub fn assert_spectra_match(
    name: &str,
    left: &[Complex<f64>],
    right: &[Complex<f64>],
    tol: f64,
) {
    assert_eq!(left.len(), right.len(), "{name}: eigenvalue count");
    let mut used = vec![false; right.len()];
    for a in left {
        let mut best: Option<(usize, f64)> = None;
        for (j, b) in right.iter().enumerate() {
            if used[j] {
                continue;
            }
            let d = (a - b).norm();
            if best.map(|(_, bd)| d < bd).unwrap_or(true) {
                best = Some((j, d));
            }
        }
        let (j, d) = best.expect("multisets have equal size");
        assert!(d <= tol, "{name}: {a} has no counterpart within {tol:.2e} (closest {})", right[j]);
        used[j] = true;
    }
}

// ---------------------------------------------------------------------------
// Graph families.
// ---------------------------------------------------------------------------

/// Small named graphs exercising every structural corner: directed and
/// undirected, unit and non-unit weights, dense and sparse.
pub fn structured_graphs() -> Vec<(String, Digraph)> {
    let mut set: Vec<(String, Digraph)> = Vec::new();
    let mut push = |name: &str, g: Digraph| set.push((name.to_string(), g));

    push("two-node", Digraph::undirected(2, &[(0, 1, 1.0)]).unwrap());
    push(
        "path-4",
        Digraph::undirected(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]).unwrap(),
    );
    push(
        "star-5",
        Digraph::undirected(5, &[(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0), (0, 4, 1.0)]).unwrap(),
    );
    push(
        "weighted-triangle",
        Digraph::undirected(3, &[(0, 1, 0.6), (1, 2, 1.7), (0, 2, 2.3)]).unwrap(),
    );
    push(
        "directed-3-cycle",
        Digraph::new(3, &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)]).unwrap(),
    );
    push(
        "directed-5-ring",
        Digraph::new(
            5,
            &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0), (4, 0, 1.0)],
        )
        .unwrap(),
    );
    push(
        "two-directed-cycles-4",
        // Cycle 0->1->2->3->0 (weight 1) plus cycle 0->2->1->0 (weight 0.5):
        // balanced because each constant-weight cycle is.
        Digraph::new(
            4,
            &[
                (0, 1, 1.0),
                (1, 2, 1.0),
                (2, 3, 1.0),
                (3, 0, 1.0),
                (0, 2, 0.5),
                (2, 1, 0.5),
                (1, 0, 0.5),
            ],
        )
        .unwrap(),
    );
    push(
        "complete-4",
        Digraph::undirected(
            4,
            &[(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0), (1, 2, 1.0), (1, 3, 1.0), (2, 3, 1.0)],
        )
        .unwrap(),
    );
    push("demo-5", consim_core::harness::demo_graph());
    set
}

fn add_cycle(w: &mut Mat<f64>, nodes: &[usize], weight: f64) {
    for i in 0..nodes.len() {
        let a = nodes[i];
        let b = nodes[(i + 1) % nodes.len()];
        w[(a, b)] += weight;
    }
}

/// Random weight-balanced strongly connected digraph: a sum of directed
/// cycles with constant weight along each cycle (every such cycle adds the
/// same amount to each touched node's in- and out-degree, so the sum stays
/// balanced). A full-length cycle is always included, forcing strong
/// connectivity.
pub fn random_balanced_digraph(rng: &mut ChaCha8Rng, n: usize, unit_weights: bool) -> Digraph {
    assert!(n >= 2);
    let mut w = Mat::zeros(n, n);
    let weight = |rng: &mut ChaCha8Rng| {
        if unit_weights {
            1.0
        } else {
            rng.gen_range(0.5..1.5)
        }
    };
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let w0 = weight(rng);
    add_cycle(&mut w, &perm, w0);
    let extra = rng.gen_range(0..=n);
    for _ in 0..extra {
        let len = rng.gen_range(2..=n);
        let mut nodes: Vec<usize> = (0..n).collect();
        nodes.shuffle(rng);
        nodes.truncate(len);
        let wc = weight(rng);
        add_cycle(&mut w, &nodes, wc);
    }
    Digraph::from_weight_matrix(w)
}

/// Random connected undirected graph: a uniform random spanning tree shape
/// plus extra edges, each with a symmetric positive weight.
pub fn random_undirected_graph(rng: &mut ChaCha8Rng, n: usize) -> Digraph {
    assert!(n >= 2);
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    for i in 1..n {
        let parent = rng.gen_range(0..i);
        edges.push((parent, i, rng.gen_range(0.5..2.0)));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let present = edges.iter().any(|&(a, b, _)| (a, b) == (i, j));
            if !present && rng.gen_bool(0.3) {
                edges.push((i, j, rng.gen_range(0.5..2.0)));
            }
        }
    }
    Digraph::undirected(n, &edges).unwrap()
}

/// The full graph set the cross-cutting suites run over: every structured
/// graph plus seeded random balanced digraphs and undirected graphs with
/// 2..=6 nodes.
pub fn test_graph_set() -> Vec<(String, Digraph)> {
    let mut set = structured_graphs();
    let mut rng = ChaCha8Rng::seed_from_u64(7_031);
    for n in 2..=6usize {
        for copy in 0..2 {
            set.push((
                format!("balanced-{n}n-{copy}"),
                random_balanced_digraph(&mut rng, n, copy == 0),
            ));
            set.push((format!("undirected-{n}n-{copy}"), random_undirected_graph(&mut rng, n)));
        }
    }
    set
}

// ---------------------------------------------------------------------------
// Run-description helpers.
// ---------------------------------------------------------------------------

/// References drawn uniformly from [-5, 5].
pub fn random_reference(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect()
}

/// A comfortably stable stepsize: 45% of the protocol's admissible range.
pub fn safe_delta(g: &Digraph) -> f64 {
    let bound = g.stepsize_bound().expect("test graphs have valid spectra");
    0.45 * bound.delta_bar.min(2.0)
}

/// Dynamic-state run with random references, started at the reference.
pub fn random_alg2_spec(g: &Digraph, rng: &mut ChaCha8Rng, horizon: usize) -> RunSpec {
    let r = random_reference(rng, g.node_count());
    RunSpec::alg2(safe_delta(g), horizon, r.clone(), r)
}

// ---------------------------------------------------------------------------
// Brute-force privacy deciders (independent of the topology classifier).
// ---------------------------------------------------------------------------

/// Size of the deviation planted by the exhaustive search.
pub const PROBE_E: f64 = 7.5;

/// Decides privacy by exhaustive search: the target's reference is private
/// iff SOME witness surgery (a) moves the target's reference, (b) leaves
/// everything the adversary knows first-hand — its own reference and
/// initial state — untouched, and (c) produces bit-near-identical signals
/// at every edge the adversary listens on, checked on actual simulated
/// trace pairs. Never consults the topology classifier.
pub fn brute_force_private(
    g: &Digraph,
    base: &RunSpec,
    base_trace: &Trace,
    adversary: usize,
    target: usize,
) -> bool {
    for witness in 0..g.node_count() {
        let Ok((alt, _)) = construct_with_witness(g, base, witness, PROBE_E) else {
            continue;
        };
        if alt.reference[adversary] != base.reference[adversary]
            || alt.x0[adversary] != base.x0[adversary]
        {
            continue; // the adversary would notice its own data changing
        }
        if alt.reference[target] == base.reference[target] {
            continue; // the target's reference must actually move
        }
        let alt_trace = run_alg2(g, &alt).expect("alternative spec must run");
        let deviation = verify_indistinguishable(base_trace, &alt_trace, adversary)
            .expect("comparable traces");
        if deviation <= 1e-9 * PROBE_E.max(1.0) {
            return true;
        }
    }
    false
}

/// Decides reconstructability by attempting the algebraic recovery on a
/// simulated run: true iff the attack runs to completion and lands on the
/// target's true reference.
pub fn brute_force_recovers(base: &RunSpec, base_trace: &Trace, adversary: usize, target: usize) -> bool {
    let view = extract_view(base_trace, adversary).expect("adversary in range");
    match recover_reference(&view, target) {
        Ok(estimate) => {
            let truth = base.reference[target];
            (estimate - truth).abs() <= 1e-6 * truth.abs().max(1.0)
        }
        Err(_) => false,
    }
}
