//! Quantum-ergodicity diagnostics on Floquet eigenstates.
//!
//! For an observable `Â` with a classical limit, the eigenstate matrix elements
//! `A_nm = ⟨n|Â|m⟩` give
//!
//! * the diagonal variance about the phase-space average `a0` (the `ε²` estimate),
//! * the Gaussian time-averaged correlator
//!   `F(T) = (1/N) Σ_{n,m} |A_nm|² exp(−Δ²_nm T²/2)`, with `Δ` the circular
//!   eigenphase distance, and its limit `F(∞) = (1/N) Σ_n |A_nn|²`,
//! * the largest off-diagonal element between (quasi-)degenerate states.
//!
//! `F(∞) ≤ F(T)` holds term by term. The correlator `f(t) = tr(Â·UᵗÂU⁻ᵗ)/N` is
//! also computed by direct propagation, independently of the eigenbasis, for
//! comparison with the classical autocorrelation.

use faer::{c64, Mat};
use serde::Serialize;

use crate::classical::CorrelatorCurve;
use crate::error::{Error, Result};
use crate::quantization::{FloquetOperator, ObservableMatrix};
use crate::spectral::{clusters, wrapped_difference, SpectralData};

/// Largest tolerated imaginary part of a diagonal element.
pub const HERMITICITY_TOL: f64 = 1e-8;
/// Largest tolerated imaginary part of `f(t)`.
pub const CORRELATOR_IMAG_TOL: f64 = 1e-9;

fn check_dims(n: usize, a: &ObservableMatrix) -> Result<()> {
    if a.n() != n {
        return Err(Error::Domain(format!(
            "observable is {}×{} but the spectrum has N = {n}",
            a.n(),
            a.n()
        )));
    }
    Ok(())
}

/// `V†·A·V`: the observable in the eigenbasis.
pub fn eigenbasis_elements(spectral: &SpectralData, a: &ObservableMatrix) -> Result<Mat<c64>> {
    check_dims(spectral.n, a)?;
    Ok(spectral.vectors.adjoint() * &a.matrix * &spectral.vectors)
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagonalReport {
    pub diagonals: Vec<f64>,
    pub mean: f64,
    /// `(1/N) Σ_n (A_nn − a0)²`.
    pub variance: f64,
    pub a0: f64,
}

pub fn diagonal_elements_report(
    spectral: &SpectralData,
    a: &ObservableMatrix,
    a0: f64,
) -> Result<DiagonalReport> {
    let b = eigenbasis_elements(spectral, a)?;
    diagonal_report_from_elements(&b, a0)
}

fn diagonal_report_from_elements(b: &Mat<c64>, a0: f64) -> Result<DiagonalReport> {
    let n = b.nrows();
    let mut diagonals = Vec::with_capacity(n);
    for k in 0..n {
        let d = b[(k, k)];
        if d.im.abs() > HERMITICITY_TOL {
            return Err(Error::numerical(
                "ergodicity",
                "hermiticity",
                format!("Im⟨{k}|A|{k}⟩ = {:e}", d.im),
            ));
        }
        diagonals.push(d.re);
    }
    let nf = n as f64;
    let mean = diagonals.iter().sum::<f64>() / nf;
    let variance = diagonals.iter().map(|d| (d - a0).powi(2)).sum::<f64>() / nf;
    Ok(DiagonalReport {
        diagonals,
        mean,
        variance,
        a0,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FCurve {
    /// `(T, F(T))` on the requested grid.
    pub points: Vec<(f64, f64)>,
    /// `(1/N) Σ_n |A_nn|²`.
    pub f_infinity: f64,
}

impl FCurve {
    pub fn min(&self) -> f64 {
        self.points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min)
    }

    pub fn is_non_increasing(&self) -> bool {
        self.points.windows(2).all(|w| w[1].1 <= w[0].1)
    }
}

pub fn quantum_f_curve(
    spectral: &SpectralData,
    a: &ObservableMatrix,
    t_grid: &[f64],
) -> Result<FCurve> {
    let b = eigenbasis_elements(spectral, a)?;
    f_curve_from_elements(spectral, &b, t_grid)
}

fn f_curve_from_elements(spectral: &SpectralData, b: &Mat<c64>, t_grid: &[f64]) -> Result<FCurve> {
    if t_grid.iter().any(|t| !(*t > 0.0))
        || t_grid.windows(2).any(|w| !(w[1] > w[0]))
    {
        return Err(Error::Domain("T grid must be positive and strictly ascending".into()));
    }
    let n = spectral.n;
    let nf = n as f64;
    let f_infinity = (0..n).map(|k| b[(k, k)].norm_sqr()).sum::<f64>() / nf;

    // off-diagonal weights and squared gaps, collected once
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(n * (n - 1) / 2);
    for m in 0..n {
        for k in (m + 1)..n {
            let w = b[(k, m)].norm_sqr() + b[(m, k)].norm_sqr();
            let d = wrapped_difference(spectral.phases[k], spectral.phases[m]);
            pairs.push((w, d * d));
        }
    }
    let points = t_grid
        .iter()
        .map(|&t| {
            let off: f64 = pairs
                .iter()
                .map(|&(w, d2)| w * (-0.5 * d2 * t * t).exp())
                .sum();
            (t, f_infinity + off / nf)
        })
        .collect();
    Ok(FCurve { points, f_infinity })
}

#[derive(Debug, Clone, Serialize)]
pub struct OffDiagonalReport {
    pub gap_tol: f64,
    pub pair_count: usize,
    pub max_element: f64,
    /// Sorted-phase indices of the pair attaining `max_element`.
    pub argmax: (usize, usize),
}

/// Largest `|⟨n|A|m⟩|` over pairs with circular phase gap below `gap_tol`;
/// `None` if there are no such pairs.
pub fn offdiag_near_degenerate(
    spectral: &SpectralData,
    a: &ObservableMatrix,
    gap_tol: f64,
) -> Result<Option<OffDiagonalReport>> {
    if !(gap_tol > 0.0) {
        return Err(Error::Domain("gap_tol must be positive".into()));
    }
    let n = spectral.n;
    let close: Vec<(usize, usize)> = (0..n)
        .flat_map(|m| ((m + 1)..n).map(move |k| (m, k)))
        .filter(|&(m, k)| wrapped_difference(spectral.phases[k], spectral.phases[m]).abs() < gap_tol)
        .collect();
    if close.is_empty() {
        return Ok(None);
    }
    let b = eigenbasis_elements(spectral, a)?;
    let mut best = (0.0, close[0]);
    for &(m, k) in &close {
        let v = b[(m, k)].norm();
        if v > best.0 {
            best = (v, (m, k));
        }
    }
    Ok(Some(OffDiagonalReport {
        gap_tol,
        pair_count: close.len(),
        max_element: best.0,
        argmax: best.1,
    }))
}

/// Rotates each cluster of levels closer than `gap_tol` so that `A` is
/// diagonal inside it. Any orthonormal basis of a degenerate eigenspace is an
/// eigenbasis; this picks the one adapted to `A`.
pub fn adapt_degenerate_basis(
    spectral: &SpectralData,
    a: &ObservableMatrix,
    gap_tol: f64,
) -> Result<SpectralData> {
    check_dims(spectral.n, a)?;
    let n = spectral.n;
    let mut out = spectral.clone();
    for cluster in clusters(&spectral.phases, gap_tol) {
        if cluster.len() < 2 {
            continue;
        }
        let k = cluster.len();
        let block = Mat::from_fn(n, k, |i, j| spectral.vectors[(i, cluster[j])]);
        let small = block.adjoint() * &a.matrix * &block;
        let eig = small
            .self_adjoint_eigen(faer::Side::Lower)
            .map_err(|e| Error::numerical("ergodicity", "cluster diagonalization", format!("{e:?}")))?;
        let rotated = &block * eig.U();
        for (j, &col) in cluster.iter().enumerate() {
            for i in 0..n {
                out.vectors[(i, col)] = rotated[(i, j)];
            }
        }
    }
    Ok(out)
}

/// `f(t) = tr(Â·UᵗÂU⁻ᵗ)/N` for `t = 0..=t_max`, by repeated conjugation.
pub fn quantum_correlator(
    floquet: &FloquetOperator,
    a: &ObservableMatrix,
    t_max: usize,
) -> Result<Vec<f64>> {
    let n = floquet.n();
    check_dims(n, a)?;
    let u = &floquet.matrix;
    let u_dag = u.adjoint().to_owned();
    let mut evolved = a.matrix.clone();
    let mut out = Vec::with_capacity(t_max + 1);
    for t in 0..=t_max {
        if t > 0 {
            evolved = u * &evolved * &u_dag;
        }
        // tr(A·M) = Σ_ij A_ij M_ji
        let mut tr = c64::new(0.0, 0.0);
        for j in 0..n {
            for i in 0..n {
                tr += a.matrix[(i, j)] * evolved[(j, i)];
            }
        }
        let f = tr / n as f64;
        if f.im.abs() > CORRELATOR_IMAG_TOL {
            return Err(Error::numerical(
                "ergodicity",
                "correlator reality",
                format!("Im f({t}) = {:e}", f.im),
            ));
        }
        out.push(f.re);
    }
    Ok(out)
}

/// `f(t)` from the eigenbasis: `(1/N) Σ_{n,m} |A_nm|² cos((φ_n − φ_m)t)`.
pub fn eigenbasis_correlator(spectral: &SpectralData, a: &ObservableMatrix, t: usize) -> Result<f64> {
    let b = eigenbasis_elements(spectral, a)?;
    let n = spectral.n;
    let mut sum = 0.0;
    for m in 0..n {
        for k in 0..n {
            let d = spectral.phases[k] - spectral.phases[m];
            sum += b[(k, m)].norm_sqr() * (d * t as f64).cos();
        }
    }
    Ok(sum / n as f64)
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrespondenceReport {
    pub f_quantum: Vec<f64>,
    pub c_classical: Vec<f64>,
    /// `max_t |f(t) − C_cl(t)|` over `0 ≤ t ≤ t_range`.
    pub max_deviation: f64,
}

pub fn quantum_classical_compare(
    floquet: &FloquetOperator,
    a: &ObservableMatrix,
    classical: &CorrelatorCurve,
    t_range: usize,
) -> Result<CorrespondenceReport> {
    if t_range > classical.t_max() {
        return Err(Error::Domain(format!(
            "t_range {t_range} exceeds the classical t_max {}",
            classical.t_max()
        )));
    }
    if classical.observable != a.label {
        return Err(Error::Domain(format!(
            "classical curve is for {} but the observable is {}",
            classical.observable.name(),
            a.label.name()
        )));
    }
    let f_quantum = quantum_correlator(floquet, a, t_range)?;
    let c_classical: Vec<f64> = (0..=t_range).map(|t| classical.at(t)).collect();
    let max_deviation = f_quantum
        .iter()
        .zip(&c_classical)
        .map(|(f, c)| (f - c).abs())
        .fold(0.0, f64::max);
    Ok(CorrespondenceReport {
        f_quantum,
        c_classical,
        max_deviation,
    })
}

/// Everything the ergodicity run reports for one `N`.
#[derive(Debug, Clone, Serialize)]
pub struct ErgodicityReport {
    pub n: usize,
    pub diagonal: DiagonalReport,
    pub f_curve: FCurve,
    pub offdiag: Option<OffDiagonalReport>,
    pub classical_deviation: Option<f64>,
}

pub fn ergodicity_report(
    spectral: &SpectralData,
    a: &ObservableMatrix,
    a0: f64,
    t_grid: &[f64],
    gap_tol: f64,
) -> Result<ErgodicityReport> {
    let b = eigenbasis_elements(spectral, a)?;
    let diagonal = diagonal_report_from_elements(&b, a0)?;
    let f_curve = f_curve_from_elements(spectral, &b, t_grid)?;
    let offdiag = offdiag_near_degenerate(spectral, a, gap_tol)?;
    Ok(ErgodicityReport {
        n: spectral.n,
        diagonal,
        f_curve,
        offdiag,
        classical_deviation: None,
    })
}
