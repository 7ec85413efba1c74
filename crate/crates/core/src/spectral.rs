//! Eigendecomposition of Floquet unitaries.
//!
//! Convention: `U·v_n = exp(−iφ_n)·v_n` with `φ_n ∈ [0, 2π)` sorted ascending,
//! so a small positive potential shifts phases upward. The dense eigensolver's
//! vectors are re-orthonormalized (QR in phase order, Rayleigh–Ritz inside
//! quasi-degenerate clusters) and every decomposition carries its residual and
//! Gram certificates.

use std::f64::consts::TAU;

use faer::{c64, Mat};

use crate::error::{Error, Result};
use crate::quantization::FloquetOperator;

pub const RESIDUAL_TOL: f64 = 1e-10;
pub const GRAM_TOL: f64 = 1e-10;
/// Absolute phase gap below which levels are treated as one cluster.
pub const DEGENERACY_GAP: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct SpectralData {
    pub n: usize,
    /// Eigenphases in `[0, 2π)`, ascending.
    pub phases: Vec<f64>,
    /// Column `k` is the eigenvector of `phases[k]`.
    pub vectors: Mat<c64>,
    /// `max_n ‖U v_n − e^{−iφ_n} v_n‖`.
    pub max_residual: f64,
    /// `max |(V†V − I)_jk|`.
    pub gram_error: f64,
}

impl SpectralData {
    /// `2π/N`.
    pub fn mean_spacing(&self) -> f64 {
        TAU / self.n as f64
    }

    pub fn eigenvalue(&self, k: usize) -> c64 {
        c64::cis(-self.phases[k])
    }
}

/// Signed circular distance `a − b` reduced into `(−π, π]`.
pub fn wrapped_difference(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > std::f64::consts::PI {
        d - TAU
    } else {
        d
    }
}

fn phase_of(lambda: c64) -> f64 {
    let phi = (-lambda.arg()).rem_euclid(TAU);
    if phi >= TAU {
        0.0
    } else {
        phi
    }
}

/// Groups of consecutive sorted phases closer than `gap`, including the wrap
/// from the last phase back to the first.
pub fn clusters(phases: &[f64], gap: f64) -> Vec<Vec<usize>> {
    let n = phases.len();
    if n == 0 {
        return Vec::new();
    }
    let mut out: Vec<Vec<usize>> = vec![vec![0]];
    for k in 1..n {
        if phases[k] - phases[k - 1] < gap {
            out.last_mut().unwrap().push(k);
        } else {
            out.push(vec![k]);
        }
    }
    if out.len() > 1 && phases[0] + TAU - phases[n - 1] < gap {
        let last = out.pop().unwrap();
        out[0].splice(0..0, last);
    }
    out
}

fn column_norm(m: &Mat<c64>, j: usize) -> f64 {
    (0..m.nrows()).map(|i| m[(i, j)].norm_sqr()).sum::<f64>().sqrt()
}

fn gram_error(v: &Mat<c64>) -> f64 {
    crate::quantization::unitarity_defect(v)
}

/// Rayleigh–Ritz inside one cluster: diagonalize `C†UC` and rotate the block.
fn refine_cluster(u: &Mat<c64>, vectors: &mut Mat<c64>, idx: &[usize]) -> Result<()> {
    let n = vectors.nrows();
    let k = idx.len();
    let block = Mat::from_fn(n, k, |i, j| vectors[(i, idx[j])]);
    let small = block.adjoint() * u * &block;
    let eig = small.eigen().map_err(|e| {
        Error::numerical("spectral", "cluster refinement", format!("{e:?}"))
    })?;
    let rotated = &block * eig.U();
    let q = rotated.qr().compute_thin_Q();
    for (j, &col) in idx.iter().enumerate() {
        for i in 0..n {
            vectors[(i, col)] = q[(i, j)];
        }
    }
    Ok(())
}

pub fn diagonalize(floquet: &FloquetOperator) -> Result<SpectralData> {
    diagonalize_unitary(&floquet.matrix)
}

/// Full eigendecomposition of a unitary matrix with certificates.
pub fn diagonalize_unitary(u: &Mat<c64>) -> Result<SpectralData> {
    let n = u.nrows();
    let eig = u
        .eigen()
        .map_err(|e| Error::numerical("spectral", "eigensolver", format!("{e:?}")))?;
    let raw = eig.U();
    let diag = eig.S().column_vector();

    let mut order: Vec<usize> = (0..n).collect();
    let raw_phases: Vec<f64> = (0..n).map(|k| phase_of(diag[k])).collect();
    order.sort_by(|&a, &b| raw_phases[a].total_cmp(&raw_phases[b]));
    let sorted = Mat::from_fn(n, n, |i, j| raw[(i, order[j])]);

    let mut vectors = sorted.qr().compute_Q();
    let mut phases: Vec<f64> = order.iter().map(|&k| raw_phases[k]).collect();

    for cluster in clusters(&phases, DEGENERACY_GAP) {
        if cluster.len() > 1 {
            refine_cluster(u, &mut vectors, &cluster)?;
        }
    }

    // Rayleigh quotients, residuals
    let uv = u * &vectors;
    let mut max_residual: f64 = 0.0;
    let mut bad = Vec::new();
    for k in 0..n {
        let rq: c64 = (0..n).map(|i| vectors[(i, k)].conj() * uv[(i, k)]).sum();
        let lambda = rq / rq.norm();
        phases[k] = phase_of(lambda);
        let res = (0..n)
            .map(|i| (uv[(i, k)] - lambda * vectors[(i, k)]).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if !(res <= RESIDUAL_TOL) {
            bad.push(k);
        }
        max_residual = max_residual.max(res);
    }
    if !bad.is_empty() {
        return Err(Error::numerical(
            "spectral",
            "eigen-residual",
            format!("max residual {max_residual:e} at indices {bad:?}"),
        ));
    }

    // Rayleigh phases can reorder levels closer than the solver error
    let mut perm: Vec<usize> = (0..n).collect();
    perm.sort_by(|&a, &b| phases[a].total_cmp(&phases[b]));
    if perm.iter().enumerate().any(|(i, &p)| i != p) {
        vectors = Mat::from_fn(n, n, |i, j| vectors[(i, perm[j])]);
        phases = perm.iter().map(|&k| phases[k]).collect();
    }

    let gram = gram_error(&vectors);
    if !(gram <= GRAM_TOL) {
        return Err(Error::numerical(
            "spectral",
            "orthonormality",
            format!("max |V†V − I| = {gram:e}"),
        ));
    }
    debug_assert!((0..n).all(|k| (column_norm(&vectors, k) - 1.0).abs() < 1e-12));

    Ok(SpectralData {
        n,
        phases,
        vectors,
        max_residual,
        gram_error: gram,
    })
}
