//! Scaling of the mean-squared level shift with the effective Planck constant.
//!
//! Three candidate laws are fitted to `y = ln(mean_sq)` against the ladder of
//! dimensions `N` (with `h = 1/N`):
//!
//! * `power_law`: `mean_sq = A·h^s`,
//! * `constant`: `mean_sq = A`,
//! * `log_model`: `mean_sq = c/(α + β ln N)²` with the scale fixed at `c = 1`
//!   (`c` is redundant with an overall rescaling of `α` and `β`).
//!
//! For two-dimensional systems the shift relative to a spacing is
//! `ħ^{2−d}·ε`, so an RMT-like `ε ∼ ħ^{(d−1)/2}` gives `s = 1`, regular
//! dynamics gives `s = 0`, and logarithmic equidistribution gives the log model.
//! All residual sums are in `ln(mean_sq)` so the models are directly comparable;
//! the winner is chosen by the small-sample corrected Akaike criterion.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{MapFamily, PlanckScale};
use crate::sweep::{shift_statistics, sweep_quantization, uniform_grid, SweepOptions, DEFAULT_R_STEP};

/// Dimension of the underlying autonomous system.
pub const DIMENSION: u32 = 2;
pub const MIN_LADDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    PowerLaw,
    Constant,
    LogModel,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::PowerLaw => "power_law",
            Model::Constant => "constant",
            Model::LogModel => "log_model",
        }
    }

    fn parameter_count(self) -> usize {
        match self {
            Model::Constant => 1,
            Model::PowerLaw | Model::LogModel => 2,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelFit {
    pub model: Model,
    pub params: BTreeMap<String, f64>,
    /// Sum of squared residuals in `ln(mean_sq)`.
    pub residual_sum: f64,
    pub aicc: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingFit {
    /// `(N, mean squared shift in spacing units)`.
    pub points: Vec<(usize, f64)>,
    pub models: Vec<ModelFit>,
    pub winner: Model,
    /// Power-law exponent `s` of `mean_sq ∝ h^s`.
    pub exponent: f64,
    pub d: u32,
}

impl ScalingFit {
    pub fn model(&self, model: Model) -> &ModelFit {
        self.models.iter().find(|m| m.model == model).expect("all models are fitted")
    }

    /// Predicted `mean_sq` at `n` under `model`.
    pub fn predict(&self, model: Model, n: usize) -> f64 {
        let p = &self.model(model).params;
        let nf = n as f64;
        match model {
            Model::PowerLaw => p["amplitude"] * nf.recip().powf(p["exponent"]),
            Model::Constant => p["amplitude"],
            Model::LogModel => p["c"] / (p["alpha"] + p["beta"] * nf.ln()).powi(2),
        }
    }
}

/// Least squares `y = a + b·x`; returns `(a, b)`.
fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if !(sxx > 1e-14 * (1.0 + mx * mx) * n) {
        return Err(Error::Fit("singular normal equations (abscissae coincide)".into()));
    }
    let b = sxy / sxx;
    Ok((my - b * mx, b))
}

fn rss(residuals: impl Iterator<Item = f64>) -> f64 {
    residuals.map(|r| r * r).sum()
}

fn aicc(rss: f64, n: usize, k: usize) -> f64 {
    let nf = n as f64;
    let kf = k as f64;
    let base = nf * (rss.max(1e-300) / nf).ln() + 2.0 * kf;
    if n > k + 1 {
        base + 2.0 * kf * (kf + 1.0) / (nf - kf - 1.0)
    } else {
        f64::INFINITY
    }
}

/// Gauss–Newton fit of `y = −2 ln(α + β x)`, started from the linear fit of
/// `exp(−y/2)` against `x`.
fn fit_log_model(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    let g: Vec<f64> = y.iter().map(|v| (-0.5 * v).exp()).collect();
    let (mut alpha, mut beta) = linear_fit(x, &g)?;
    let resid = |a: f64, b: f64| -> Option<Vec<f64>> {
        x.iter()
            .zip(y)
            .map(|(xi, yi)| {
                let z = a + b * xi;
                (z > 0.0).then(|| yi + 2.0 * z.ln())
            })
            .collect()
    };
    let mut current = resid(alpha, beta)
        .map(|r| rss(r.into_iter()))
        .ok_or_else(|| Error::Fit("log model start has α + β ln N ≤ 0".into()))?;
    for _ in 0..100 {
        // normal equations of the linearized residual r + J·δ
        let (mut jtj, mut jtr) = ([[0.0; 2]; 2], [0.0; 2]);
        let r = resid(alpha, beta).unwrap();
        for (i, xi) in x.iter().enumerate() {
            let z = alpha + beta * xi;
            let j = [2.0 / z, 2.0 * xi / z];
            for a in 0..2 {
                jtr[a] += j[a] * r[i];
                for b in 0..2 {
                    jtj[a][b] += j[a] * j[b];
                }
            }
        }
        let det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[1][0];
        if det.abs() < 1e-300 {
            break;
        }
        let da = -(jtj[1][1] * jtr[0] - jtj[0][1] * jtr[1]) / det;
        let db = -(-jtj[1][0] * jtr[0] + jtj[0][0] * jtr[1]) / det;
        let mut step = 1.0;
        let mut improved = false;
        while step > 1e-6 {
            if let Some(r) = resid(alpha + step * da, beta + step * db) {
                let trial = rss(r.into_iter());
                if trial < current {
                    alpha += step * da;
                    beta += step * db;
                    improved = current - trial > 1e-15 * current.max(1e-300);
                    current = trial;
                    break;
                }
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok((alpha, beta, current))
}

/// Fits all three models to `(N, mean_sq)` points.
pub fn fit_scaling(points: &[(usize, f64)]) -> Result<ScalingFit> {
    if points.len() < 2 {
        return Err(Error::Fit("need at least two points".into()));
    }
    if points.iter().any(|p| !(p.1 > 0.0) || !p.1.is_finite()) {
        return Err(Error::Fit("mean squared shifts must be positive and finite".into()));
    }
    let ln_n: Vec<f64> = points.iter().map(|p| (p.0 as f64).ln()).collect();
    let ln_h: Vec<f64> = ln_n.iter().map(|v| -v).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let count = points.len();

    let (a, s) = linear_fit(&ln_h, &y)?;
    let power_rss = rss(ln_h.iter().zip(&y).map(|(x, yi)| yi - a - s * x));

    let mean = y.iter().sum::<f64>() / count as f64;
    let const_rss = rss(y.iter().map(|yi| yi - mean));

    let (alpha, beta, log_rss) = fit_log_model(&ln_n, &y)?;

    let make = |model: Model, params: &[(&str, f64)], residual_sum: f64| ModelFit {
        model,
        params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        residual_sum,
        aicc: aicc(residual_sum, count, model.parameter_count()),
    };
    let models = vec![
        make(Model::PowerLaw, &[("amplitude", a.exp()), ("exponent", s)], power_rss),
        make(Model::Constant, &[("amplitude", mean.exp())], const_rss),
        make(Model::LogModel, &[("c", 1.0), ("alpha", alpha), ("beta", beta)], log_rss),
    ];
    // ties go to the simpler model, listed first by parameter count
    let winner = models
        .iter()
        .min_by(|p, q| {
            p.aicc
                .total_cmp(&q.aicc)
                .then(p.model.parameter_count().cmp(&q.model.parameter_count()))
        })
        .map(|m| m.model)
        .unwrap();
    Ok(ScalingFit {
        points: points.to_vec(),
        models,
        winner,
        exponent: s,
        d: DIMENSION,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct ScalingOptions {
    pub r_step: f64,
    pub subtract_mean: bool,
    pub sweep: SweepOptions,
}

impl Default for ScalingOptions {
    fn default() -> Self {
        Self {
            r_step: DEFAULT_R_STEP,
            subtract_mean: true,
            sweep: SweepOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LadderPoint {
    pub n: usize,
    pub h: f64,
    pub mean_sq: f64,
    pub mean_shift: f64,
    pub max_abs_shift: f64,
    pub crossings: usize,
    pub min_overlap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingStudy {
    pub ladder: Vec<LadderPoint>,
    pub fit: ScalingFit,
}

/// Sweeps `r` from `r0` to `r1` at each `N` and fits the shift scaling.
pub fn ladder_point(
    family: &MapFamily,
    n: usize,
    r0: f64,
    r1: f64,
    options: &ScalingOptions,
) -> Result<LadderPoint> {
    let scale = PlanckScale::for_family(n, family)?;
    let grid = uniform_grid(r0.min(r1), r0.max(r1), options.r_step);
    let traj = sweep_quantization(family, &scale, &grid, options.sweep)?;
    let stats = shift_statistics(&traj, r0, r1, options.subtract_mean)?;
    let center = if options.subtract_mean { stats.mean_shift } else { 0.0 };
    Ok(LadderPoint {
        n,
        h: scale.h(),
        mean_sq: stats.mean_sq,
        mean_shift: stats.mean_shift,
        max_abs_shift: stats.shifts.iter().map(|d| (d - center).abs()).fold(0.0, f64::max),
        crossings: traj.crossings,
        min_overlap: traj.min_overlap,
    })
}

pub fn scaling_study(
    family: &MapFamily,
    n_list: &[usize],
    r0: f64,
    r1: f64,
    options: ScalingOptions,
) -> Result<ScalingStudy> {
    if n_list.len() < MIN_LADDER {
        return Err(Error::Domain(format!(
            "scaling study needs at least {MIN_LADDER} values of N, got {}",
            n_list.len()
        )));
    }
    for &n in n_list {
        PlanckScale::for_family(n, family)?;
    }
    let ladder = n_list
        .par_iter()
        .map(|&n| ladder_point(family, n, r0, r1, &options))
        .collect::<Result<Vec<_>>>()?;
    let points: Vec<(usize, f64)> = ladder.iter().map(|p| (p.n, p.mean_sq)).collect();
    let fit = fit_scaling(&points)?;
    Ok(ScalingStudy { ladder, fit })
}
