//! Change of variables separating the average from the disagreement.
//!
//! The split pairs the normalized ones vector with an orthonormal basis of
//! its complement. In these coordinates the consensus protocols become block
//! triangular: the average component evolves on its own and the disagreement
//! block is driven by the reduced Laplacian.

use thiserror::Error;

use crate::graph::WeightedDigraph;
use crate::linalg::Mat;
use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum TransformError {
    #[error("vector length {got} does not match {expected} nodes")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("split needs at least two nodes")]
    TooSmall,
}

/// Orthonormal basis [r | R] of R^n with r the normalized ones vector and
/// the columns of R spanning its orthogonal complement.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalSplit<S> {
    n: usize,
    /// (1/sqrt(n)) * ones; length n.
    r_vec: Vec<S>,
    /// n x (n-1), columns orthonormal and orthogonal to r_vec.
    r_mat: Mat<S>,
}

impl<S: Scalar> OrthonormalSplit<S> {
    /// Householder construction: the reflector mapping e1 to r_vec is
    /// orthogonal and symmetric; its trailing columns form the complement.
    pub fn new(n: usize) -> Result<Self, TransformError> {
        if n < 2 {
            return Err(TransformError::TooSmall);
        }
        let inv_sqrt = S::one() / S::from_count(n).sqrt();
        let r_vec = vec![inv_sqrt; n];
        // u = e1 - r_vec; H = I - 2 u u^T / (u^T u); columns 2..n of H.
        let mut u = vec![-inv_sqrt; n];
        u[0] = S::one() - inv_sqrt;
        let unorm2: S = u.iter().map(|&x| x * x).sum();
        let two = S::lit(2.0);
        let r_mat = Mat::from_fn(n, n - 1, |i, j| {
            let col = j + 1;
            let delta = if i == col { S::one() } else { S::zero() };
            delta - two * u[i] * u[col] / unorm2
        });
        Ok(Self { n, r_vec, r_mat })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn r_vec(&self) -> &[S] {
        &self.r_vec
    }

    pub fn r_mat(&self) -> &Mat<S> {
        &self.r_mat
    }

    fn check_len(&self, v: &[S]) -> Result<(), TransformError> {
        if v.len() != self.n {
            return Err(TransformError::DimensionMismatch { got: v.len(), expected: self.n });
        }
        Ok(())
    }

    /// r_vec^T x: scaled average component.
    pub fn average_component(&self, x: &[S]) -> Result<S, TransformError> {
        self.check_len(x)?;
        Ok(x.iter().zip(&self.r_vec).map(|(&a, &b)| a * b).sum())
    }

    /// R^T x: disagreement coordinates, length n-1.
    pub fn disagreement_components(&self, x: &[S]) -> Result<Vec<S>, TransformError> {
        self.check_len(x)?;
        Ok((0..self.n - 1)
            .map(|j| (0..self.n).map(|i| self.r_mat[(i, j)] * x[i]).sum())
            .collect())
    }

    /// Projects a per-agent signal vector: (r_vec^T f, R^T f).
    pub fn project(&self, f: &[S]) -> Result<(S, Vec<S>), TransformError> {
        Ok((self.average_component(f)?, self.disagreement_components(f)?))
    }

    /// Reassembles r_vec * a + R * d.
    pub fn lift(&self, a: S, d: &[S]) -> Result<Vec<S>, TransformError> {
        if d.len() != self.n - 1 {
            return Err(TransformError::DimensionMismatch { got: d.len(), expected: self.n - 1 });
        }
        Ok((0..self.n)
            .map(|i| {
                let tail: S = (0..self.n - 1).map(|j| self.r_mat[(i, j)] * d[j]).sum();
                self.r_vec[i] * a + tail
            })
            .collect())
    }

    /// Reduced Laplacian R^T L R; its eigenvalues are the nonzero Laplacian
    /// eigenvalues of a weight-balanced strongly connected graph.
    pub fn reduced_laplacian(&self, g: &WeightedDigraph<S>) -> Result<Mat<S>, TransformError> {
        if g.node_count() != self.n {
            return Err(TransformError::DimensionMismatch {
                got: g.node_count(),
                expected: self.n,
            });
        }
        let l = g.laplacian();
        Ok(self.r_mat.transpose().mul(&l.mul(&self.r_mat)))
    }
}

/// Protocol state in split coordinates.
///
/// q captures the auxiliary state (shifted by the projected reference), p
/// the agreement error: q1 = r_vec^T (v - PI r), q_rest = R^T (v - PI r) +
/// R^T (x - r_bar), p1 = r_vec^T (x - r_bar), p_rest = R^T (x - r_bar),
/// where r_bar is the average reference spread over all agents and PI the
/// centering projector.
#[derive(Debug, Clone, PartialEq)]
pub struct QpState<S> {
    pub q1: S,
    pub q_rest: Vec<S>,
    pub p1: S,
    pub p_rest: Vec<S>,
}

/// Maps protocol state (v, x) with reference r into split coordinates.
pub fn to_qp<S: Scalar>(
    split: &OrthonormalSplit<S>,
    v: &[S],
    x: &[S],
    r: &[S],
) -> Result<QpState<S>, TransformError> {
    let n = split.node_count();
    for vec in [v, x, r] {
        if vec.len() != n {
            return Err(TransformError::DimensionMismatch { got: vec.len(), expected: n });
        }
    }
    let r_avg = r.iter().copied().sum::<S>() / S::from_count(n);
    let x_centered: Vec<S> = x.iter().map(|&xi| xi - r_avg).collect();
    // PI r = r - r_avg * ones, so v - PI r = v - r + r_avg * ones.
    let v_shifted: Vec<S> = v.iter().zip(r).map(|(&vi, &ri)| vi - ri + r_avg).collect();
    let p1 = split.average_component(&x_centered)?;
    let p_rest = split.disagreement_components(&x_centered)?;
    let q1 = split.average_component(&v_shifted)?;
    let q_shift = split.disagreement_components(&v_shifted)?;
    let q_rest = q_shift.iter().zip(&p_rest).map(|(&a, &b)| a + b).collect();
    Ok(QpState { q1, q_rest, p1, p_rest })
}

/// Inverse of [`to_qp`]: recovers (v, x).
pub fn from_qp<S: Scalar>(
    split: &OrthonormalSplit<S>,
    qp: &QpState<S>,
    r: &[S],
) -> Result<(Vec<S>, Vec<S>), TransformError> {
    let n = split.node_count();
    if r.len() != n {
        return Err(TransformError::DimensionMismatch { got: r.len(), expected: n });
    }
    let r_avg = r.iter().copied().sum::<S>() / S::from_count(n);
    let x_centered = split.lift(qp.p1, &qp.p_rest)?;
    let x: Vec<S> = x_centered.iter().map(|&xi| xi + r_avg).collect();
    let v_shift: Vec<S> = qp.q_rest.iter().zip(&qp.p_rest).map(|(&a, &b)| a - b).collect();
    let v_shifted = split.lift(qp.q1, &v_shift)?;
    let v: Vec<S> = v_shifted.iter().zip(r).map(|(&vi, &ri)| vi + ri - r_avg).collect();
    Ok((v, x))
}

/// One step of the memoryless Laplacian iteration in split coordinates:
/// p1 is invariant, p_rest multiplies by (I - delta L+).
pub fn qp_step_alg1<S: Scalar>(qp: &QpState<S>, delta: S, lplus: &Mat<S>) -> QpState<S> {
    let lp = lplus.mul_vec(&qp.p_rest);
    QpState {
        q1: qp.q1,
        q_rest: qp.q_rest.clone(),
        p1: qp.p1,
        p_rest: qp.p_rest.iter().zip(&lp).map(|(&p, &l)| p - delta * l).collect(),
    }
}

/// One step of the dynamic-state protocol in split coordinates.
pub fn qp_step_alg2<S: Scalar>(qp: &QpState<S>, delta: S, lplus: &Mat<S>) -> QpState<S> {
    qp_step_alg2_perturbed(qp, delta, lplus, S::zero(), None)
}

/// Perturbed variant; `f_avg` and `f_rest` are the projections of the
/// per-agent perturbation at the current step (r_vec^T f, R^T f).
pub fn qp_step_alg2_perturbed<S: Scalar>(
    qp: &QpState<S>,
    delta: S,
    lplus: &Mat<S>,
    f_avg: S,
    f_rest: Option<&[S]>,
) -> QpState<S> {
    let one = S::one();
    let lp = lplus.mul_vec(&qp.p_rest);
    let zero_f = vec![S::zero(); qp.p_rest.len()];
    let f_rest = f_rest.unwrap_or(&zero_f);
    QpState {
        q1: qp.q1,
        q_rest: qp
            .q_rest
            .iter()
            .zip(f_rest)
            .map(|(&q, &f)| (one - delta) * q + delta * f)
            .collect(),
        p1: -delta * qp.q1 + (one - delta) * qp.p1 + delta * f_avg,
        p_rest: qp
            .p_rest
            .iter()
            .zip(&lp)
            .zip(&qp.q_rest)
            .zip(f_rest)
            .map(|(((&p, &l), &q), &f)| p - delta * l - delta * q + delta * f)
            .collect(),
    }
}

/// Explicit solution of the scalar agreement-error recursion
/// p1(k+1) = (1 - delta) p1(k) + delta * g(k):
/// p1(k) = (1-delta)^k p1(0) + delta * sum_{m<k} (1-delta)^(k-1-m) g(m).
pub fn p1_closed_form<S: Scalar>(p1_0: S, delta: S, driving: &[S], k: usize) -> S {
    let decay = S::one() - delta;
    let mut acc = p1_0;
    for m in 0..k {
        let g = driving.get(m).copied().unwrap_or(S::zero());
        acc = decay * acc + delta * g;
    }
    acc
}
