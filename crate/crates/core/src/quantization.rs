//! Quantization on the `N`-state torus Hilbert space.
//!
//! Position grid `q_j = (j + a)/N`, momentum grid `p_k = (k + b)/N`, with
//! Bloch offsets `a = b = 0` unless requested otherwise. The one-period
//! propagator is `U = F⁻¹·D_T·F·D_V` (kick, then free motion) where
//! `D_V = diag(exp(−2πiN·V(q_j)))`, `D_T = diag(exp(−2πiN·T(p_k)))` and `F` is
//! the unitary DFT from position to momentum. `F⁻¹·D·F` is (up to the Bloch
//! phase) a circulant, so `U` is assembled in `O(N²)` without any transform.

use std::f64::consts::PI;

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MapFamily, Observable, PlanckScale, Site};

/// Unitarity tolerance on `max |(U†U − I)_jk|`.
pub const UNITARITY_TOL: f64 = 1e-12;

/// Bloch phases of the position and momentum grids, as fractions of a grid step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridOffsets {
    pub position: f64,
    pub momentum: f64,
}

impl GridOffsets {
    pub fn is_zero(&self) -> bool {
        self.position == 0.0 && self.momentum == 0.0
    }
}

#[derive(Debug, Clone)]
pub struct FloquetOperator {
    pub family: MapFamily,
    pub scale: PlanckScale,
    pub offsets: GridOffsets,
    /// `U` in the position basis.
    pub matrix: Mat<c64>,
    /// `max |(U†U − I)_jk|`.
    pub certificate: f64,
}

impl FloquetOperator {
    pub fn n(&self) -> usize {
        self.scale.n()
    }
}

/// Matrix of a quantized observable, always stored in the position basis.
#[derive(Debug, Clone)]
pub struct ObservableMatrix {
    pub label: Observable,
    /// Basis in which the operator is diagonal.
    pub basis: Site,
    pub matrix: Mat<c64>,
}

impl ObservableMatrix {
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> c64 {
        (0..self.n()).map(|i| self.matrix[(i, i)]).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let n = self.n();
        let mut err: f64 = 0.0;
        for j in 0..n {
            for i in 0..n {
                err = err.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        err
    }
}

fn cis(theta: f64) -> c64 {
    c64::new(theta.cos(), theta.sin())
}

/// `π·(j + offset)²/N`, reduced exactly when the offset is zero.
fn half_square_phase(j: usize, offset: f64, n: usize) -> f64 {
    if offset == 0.0 {
        let m = (j as u128 * j as u128) % (2 * n as u128);
        PI * m as f64 / n as f64
    } else {
        let x = j as f64 + offset;
        PI * x * x / n as f64
    }
}

/// Kick propagator `exp(−2πiN·V(q_j))`.
pub fn kick_phases(family: &MapFamily, scale: &PlanckScale, offsets: GridOffsets) -> Vec<c64> {
    let n = scale.n();
    let amp = match family.perturbation_site() {
        Site::Position => family.r * scale.h() * scale.h(),
        Site::Momentum => 0.0,
    };
    let nf = n as f64;
    let quad = match family.variant {
        crate::model::Variant::Chaotic => -1.0,
        crate::model::Variant::Regular => 1.0,
        _ => 0.0,
    };
    (0..n)
        .map(|j| {
            let q = (j as f64 + offsets.position) / nf;
            // split off the ±q²/2 term so its large phase can be reduced exactly
            let rest = family.potential(q, amp) - quad * 0.5 * q * q;
            let phase = -quad * half_square_phase(j, offsets.position, n) - 2.0 * PI * nf * rest;
            cis(phase)
        })
        .collect()
}

/// Free propagator `exp(−2πiN·T(p_k))` in the momentum basis.
pub fn free_phases(family: &MapFamily, scale: &PlanckScale, offsets: GridOffsets) -> Vec<c64> {
    let n = scale.n();
    let amp = match family.perturbation_site() {
        Site::Momentum => family.r * scale.h() * scale.h(),
        Site::Position => 0.0,
    };
    let nf = n as f64;
    (0..n)
        .map(|k| {
            let p = (k as f64 + offsets.momentum) / nf;
            let rest = family.kinetic(p, amp) - 0.5 * p * p;
            cis(-half_square_phase(k, offsets.momentum, n) - 2.0 * PI * nf * rest)
        })
        .collect()
}

/// Kernel `c(m) = (1/N) Σ_k exp(2πi(k + b)m/N)·d_k` for `m ∈ (−N, N)`, indexed by `m + N − 1`.
/// `(F⁻¹·diag(d)·F)_jl = c(j − l)`.
fn momentum_kernel(diag: &[c64], momentum_offset: f64) -> Vec<c64> {
    let n = diag.len();
    let nf = n as f64;
    let twiddle: Vec<c64> = (0..n).map(|s| cis(2.0 * PI * s as f64 / nf)).collect();
    (0..2 * n - 1)
        .map(|idx| {
            let m = idx as i64 - (n as i64 - 1);
            let sum: c64 = if momentum_offset == 0.0 {
                let m = m.rem_euclid(n as i64) as usize;
                diag.iter()
                    .enumerate()
                    .map(|(k, d)| twiddle[(k * m) % n] * d)
                    .sum()
            } else {
                diag.iter()
                    .enumerate()
                    .map(|(k, d)| cis(2.0 * PI * (k as f64 + momentum_offset) * m as f64 / nf) * d)
                    .sum()
            };
            sum / nf
        })
        .collect()
}

fn conjugate_diagonal(diag: &[c64], momentum_offset: f64) -> Mat<c64> {
    let n = diag.len();
    let kernel = momentum_kernel(diag, momentum_offset);
    Mat::from_fn(n, n, |j, l| kernel[j + n - 1 - l])
}

/// Unitary DFT `F_kj = exp(−2πi(j + a)(k + b)/N)/√N` mapping position to momentum amplitudes.
pub fn fourier_matrix(n: usize, offsets: GridOffsets) -> Mat<c64> {
    let nf = n as f64;
    let norm = 1.0 / nf.sqrt();
    Mat::from_fn(n, n, |k, j| {
        let phase = if offsets.is_zero() {
            ((j * k) % n) as f64
        } else {
            (j as f64 + offsets.position) * (k as f64 + offsets.momentum)
        };
        cis(-2.0 * PI * phase / nf) * norm
    })
}

/// `max |(M†M − I)_jk|`.
pub fn unitarity_defect(m: &Mat<c64>) -> f64 {
    let g = m.adjoint() * m;
    let n = g.nrows();
    let mut err: f64 = 0.0;
    for j in 0..n {
        for i in 0..n {
            let target = if i == j { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) };
            err = err.max((g[(i, j)] - target).norm());
        }
    }
    err
}

pub fn build_floquet(family: &MapFamily, scale: &PlanckScale) -> Result<FloquetOperator> {
    build_floquet_with_offsets(family, scale, GridOffsets::default())
}

pub fn build_floquet_with_offsets(
    family: &MapFamily,
    scale: &PlanckScale,
    offsets: GridOffsets,
) -> Result<FloquetOperator> {
    family.check_scale(scale)?;
    let n = scale.n();
    let kick = kick_phases(family, scale, offsets);
    let free = free_phases(family, scale, offsets);
    let kernel = momentum_kernel(&free, offsets.momentum);
    let matrix = Mat::from_fn(n, n, |j, l| kernel[j + n - 1 - l] * kick[l]);
    let certificate = unitarity_defect(&matrix);
    if !(certificate < UNITARITY_TOL) {
        return Err(Error::numerical(
            "quantization",
            "unitarity",
            format!("max |U†U − I| = {certificate:e} for N = {n}"),
        ));
    }
    Ok(FloquetOperator {
        family: *family,
        scale: *scale,
        offsets,
        matrix,
        certificate,
    })
}

pub fn quantize_observable(label: Observable, scale: &PlanckScale) -> ObservableMatrix {
    let n = scale.n();
    let nf = n as f64;
    let cos_grid: Vec<c64> = (0..n)
        .map(|j| c64::new((2.0 * PI * j as f64 / nf).cos(), 0.0))
        .collect();
    match label {
        Observable::CosQ => ObservableMatrix {
            label,
            basis: Site::Position,
            matrix: Mat::from_fn(n, n, |i, j| if i == j { cos_grid[i] } else { c64::new(0.0, 0.0) }),
        },
        Observable::CosP => ObservableMatrix {
            label,
            basis: Site::Momentum,
            matrix: conjugate_diagonal(&cos_grid, 0.0),
        },
        Observable::Identity => ObservableMatrix {
            label,
            basis: Site::Position,
            matrix: Mat::identity(n, n),
        },
    }
}
