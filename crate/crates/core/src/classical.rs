//! Classical dynamics of the kicked maps: orbit iteration, Lyapunov
//! exponents from the renormalized tangent-map product, and Monte Carlo
//! autocorrelation functions under the uniform (Liouville) measure.

use std::f64::consts::PI;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{wrap_unit, MapFamily, Observable, PhaseSpacePoint};

pub const MIN_LYAPUNOV_STEPS: usize = 10_000;
pub const MIN_LYAPUNOV_SEEDS: usize = 5;
pub const MIN_CORRELATOR_SAMPLES: usize = 10_000;

/// Samples per independent RNG substream.
const CHUNK: usize = 4096;

/// One application of the map: kick `p̃ = p − V'(q)`, then drift `q̃ = q + p̃`.
/// The O(ħ²) part of the family is not part of the classical map.
pub fn map_step(point: PhaseSpacePoint, family: &MapFamily) -> PhaseSpacePoint {
    let p = wrap_unit(point.p - family.force(point.q, 0.0));
    let q = wrap_unit(point.q + p);
    PhaseSpacePoint { q, p }
}

pub fn iterate(mut point: PhaseSpacePoint, family: &MapFamily, steps: usize) -> PhaseSpacePoint {
    for _ in 0..steps {
        point = map_step(point, family);
    }
    point
}

/// RNG for substream `stream` of `seed`. ChaCha8 with the stream counter set,
/// so chunked Monte Carlo is reproducible independent of the worker count.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn random_points(count: usize, seed: u64) -> Vec<PhaseSpacePoint> {
    let mut rng = substream(seed, u64::MAX);
    (0..count)
        .map(|_| PhaseSpacePoint::new(rng.random::<f64>(), rng.random::<f64>()))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct LyapunovReport {
    /// Mean exponent per map step over all seeds.
    pub lambda: f64,
    pub per_seed: Vec<f64>,
    pub steps: usize,
    pub seed_count: usize,
    /// max − min of the per-seed exponents.
    pub spread: f64,
}

impl LyapunovReport {
    pub fn median(&self) -> f64 {
        let mut v = self.per_seed.clone();
        v.sort_by(f64::total_cmp);
        let m = v.len() / 2;
        if v.len().is_multiple_of(2) {
            0.5 * (v[m - 1] + v[m])
        } else {
            v[m]
        }
    }

    /// `ln(2πN)/λ`, i.e. `λ⁻¹ ln ħ⁻¹`. Undefined for non-positive `λ`.
    pub fn ehrenfest_time(&self, n: usize) -> Option<f64> {
        (self.lambda > 0.0).then(|| (2.0 * PI * n as f64).ln() / self.lambda)
    }
}

fn seed_exponent(family: &MapFamily, start: PhaseSpacePoint, steps: usize) -> Result<f64> {
    let mut x = start;
    let (mut dq, mut dp) = (std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2);
    let mut log_growth = 0.0;
    for _ in 0..steps {
        // tangent map: δp̃ = δp − V''(q)δq, δq̃ = δq + δp̃
        let dp_new = dp - family.curvature(x.q, 0.0) * dq;
        let dq_new = dq + dp_new;
        x = map_step(x, family);
        let norm = dq_new.hypot(dp_new);
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::numerical(
                "classical_dynamics",
                "tangent norm",
                format!("non-finite tangent growth from seed ({}, {})", start.q, start.p),
            ));
        }
        log_growth += norm.ln();
        dq = dq_new / norm;
        dp = dp_new / norm;
    }
    Ok(log_growth / steps as f64)
}

pub fn lyapunov_exponent(
    family: &MapFamily,
    seeds: &[PhaseSpacePoint],
    steps: usize,
) -> Result<LyapunovReport> {
    if steps < MIN_LYAPUNOV_STEPS {
        return Err(Error::Domain(format!(
            "lyapunov_exponent needs at least {MIN_LYAPUNOV_STEPS} steps, got {steps}"
        )));
    }
    if seeds.len() < MIN_LYAPUNOV_SEEDS {
        return Err(Error::Domain(format!(
            "lyapunov_exponent needs at least {MIN_LYAPUNOV_SEEDS} seeds, got {}",
            seeds.len()
        )));
    }
    let family = family.classical_limit();
    let per_seed = seeds
        .par_iter()
        .map(|&s| seed_exponent(&family, s, steps))
        .collect::<Result<Vec<_>>>()?;
    let lambda = per_seed.iter().sum::<f64>() / per_seed.len() as f64;
    let max = per_seed.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = per_seed.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(LyapunovReport {
        lambda,
        steps,
        seed_count: per_seed.len(),
        spread: max - min,
        per_seed,
    })
}

/// Classical autocorrelation `C(t) = ⟨A(x)·A(Φᵗx)⟩` over uniform points.
#[derive(Debug, Clone, Serialize)]
pub struct CorrelatorCurve {
    pub observable: Observable,
    /// `(t, C(t))` for `t = 0..=t_max`.
    pub values: Vec<(usize, f64)>,
    /// Monte Carlo standard error of each `C(t)`.
    pub std_err: Vec<f64>,
    /// Exact phase-space average of the observable.
    pub a0: f64,
    /// Sample estimate of the same average.
    pub a0_sample: f64,
    pub sample_count: usize,
    pub rng_seed: u64,
}

impl CorrelatorCurve {
    pub fn t_max(&self) -> usize {
        self.values.len() - 1
    }

    pub fn at(&self, t: usize) -> f64 {
        self.values[t].1
    }

    /// Gaussian time average `Σ_t w(t)C(|t|) / Σ_t w(t)` with
    /// `w(t) = exp(−t²/2T²)` over `t ∈ [−t_max, t_max]`.
    pub fn gaussian_average(&self, big_t: f64) -> f64 {
        if big_t <= 0.0 {
            return self.at(0);
        }
        let (mut num, mut den) = (0.0, 0.0);
        for &(t, c) in &self.values {
            let w = (-((t * t) as f64) / (2.0 * big_t * big_t)).exp();
            let mult = if t == 0 { 1.0 } else { 2.0 };
            num += mult * w * c;
            den += mult * w;
        }
        num / den
    }
}

struct ChunkSums {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    a_sum: f64,
}

fn correlator_chunk(
    family: &MapFamily,
    observable: Observable,
    t_max: usize,
    count: usize,
    seed: u64,
    stream: u64,
) -> ChunkSums {
    let mut rng = substream(seed, stream);
    let mut sum = vec![0.0; t_max + 1];
    let mut sum_sq = vec![0.0; t_max + 1];
    let mut a_sum = 0.0;
    for _ in 0..count {
        let mut x = PhaseSpacePoint::new(rng.random::<f64>(), rng.random::<f64>());
        let a0 = observable.classical(x);
        a_sum += a0;
        for t in 0..=t_max {
            let prod = a0 * observable.classical(x);
            sum[t] += prod;
            sum_sq[t] += prod * prod;
            if t < t_max {
                x = map_step(x, family);
            }
        }
    }
    ChunkSums { sum, sum_sq, a_sum }
}

pub fn classical_correlator(
    family: &MapFamily,
    observable: Observable,
    t_max: usize,
    samples: usize,
    rng_seed: u64,
) -> Result<CorrelatorCurve> {
    if t_max == 0 {
        return Err(Error::Domain("t_max must be positive".into()));
    }
    if samples < MIN_CORRELATOR_SAMPLES {
        return Err(Error::Domain(format!(
            "classical_correlator needs at least {MIN_CORRELATOR_SAMPLES} samples, got {samples}"
        )));
    }
    let family = family.classical_limit();
    let chunks = samples.div_ceil(CHUNK);
    let parts: Vec<ChunkSums> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = CHUNK.min(samples - c * CHUNK);
            correlator_chunk(&family, observable, t_max, count, rng_seed, c as u64)
        })
        .collect();

    // reduce in chunk order
    let mut sum = vec![0.0; t_max + 1];
    let mut sum_sq = vec![0.0; t_max + 1];
    let mut a_sum = 0.0;
    for part in &parts {
        for t in 0..=t_max {
            sum[t] += part.sum[t];
            sum_sq[t] += part.sum_sq[t];
        }
        a_sum += part.a_sum;
    }
    let n = samples as f64;
    let values = sum.iter().enumerate().map(|(t, s)| (t, s / n)).collect::<Vec<_>>();
    let std_err = values
        .iter()
        .zip(&sum_sq)
        .map(|(&(_, mean), sq)| ((sq / n - mean * mean).max(0.0) / (n - 1.0)).sqrt())
        .collect();
    Ok(CorrelatorCurve {
        observable,
        values,
        std_err,
        a0: observable.torus_average(),
        a0_sample: a_sum / n,
        sample_count: samples,
        rng_seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Variant;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn free_shear() {
        let f = MapFamily::new(Variant::Free, 0.0);
        let x = map_step(PhaseSpacePoint::new(0.25, 0.5), &f);
        assert_eq!((x.q, x.p), (0.75, 0.5));
    }

    #[test]
    fn chaotic_step_by_hand() {
        let f = MapFamily::new(Variant::Chaotic, 0.0);
        let x = map_step(PhaseSpacePoint::new(0.0, 0.5), &f);
        let expected = 0.5 - 0.4 / (2.0 * PI);
        assert!(close(x.p, expected, 1e-15));
        assert!(close(x.q, expected, 1e-15));
        assert!(close(x.p, 0.4363380, 1e-7));
    }

    #[test]
    fn sawtooth_step_by_hand() {
        let f = MapFamily::new(Variant::SlowErgodic, 0.0);
        let x = map_step(PhaseSpacePoint::new(0.75, 0.0), &f);
        assert!(close(x.p, 0.7, 1e-15));
        assert!(close(x.q, 0.45, 1e-15));
    }

    #[test]
    fn classical_step_ignores_r() {
        let a = MapFamily::new(Variant::Chaotic, 0.0);
        let b = MapFamily::new(Variant::Chaotic, 3.0);
        let x = PhaseSpacePoint::new(0.3, 0.8);
        assert_eq!(map_step(x, &a), map_step(x, &b));
    }

    #[test]
    fn free_lyapunov_is_zero() {
        let f = MapFamily::new(Variant::Free, 0.0);
        let rep = lyapunov_exponent(&f, &random_points(5, 1), 10_000).unwrap();
        // linear growth: λ ≈ ln(t)/t
        assert!(rep.lambda < 2e-3, "{}", rep.lambda);
        assert!(rep.ehrenfest_time(64).unwrap() > 0.0);
    }

    #[test]
    fn lyapunov_preconditions() {
        let f = MapFamily::new(Variant::Chaotic, 0.0);
        assert!(matches!(
            lyapunov_exponent(&f, &random_points(5, 1), 9_999),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            lyapunov_exponent(&f, &random_points(4, 1), 10_000),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn ehrenfest_undefined_without_growth() {
        let rep = LyapunovReport {
            lambda: 0.0,
            per_seed: vec![0.0; 5],
            steps: 10_000,
            seed_count: 5,
            spread: 0.0,
        };
        assert!(rep.ehrenfest_time(512).is_none());
    }

    #[test]
    fn correlator_at_zero_and_a0() {
        let f = MapFamily::new(Variant::Chaotic, 0.0);
        for obs in [Observable::CosQ, Observable::CosP] {
            let c = classical_correlator(&f, obs, 3, 20_000, 7).unwrap();
            assert_eq!(c.a0, 0.0);
            assert!(close(c.at(0), 0.5, 5.0 * c.std_err[0]));
            assert!(c.a0_sample.abs() < 0.03);
        }
        let c = classical_correlator(&f, Observable::Identity, 3, 10_000, 7).unwrap();
        assert!(c.values.iter().all(|&(_, v)| v == 1.0));
    }

    #[test]
    fn correlator_preconditions() {
        let f = MapFamily::new(Variant::Chaotic, 0.0);
        assert!(matches!(
            classical_correlator(&f, Observable::CosQ, 0, 10_000, 1),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            classical_correlator(&f, Observable::CosQ, 5, 100, 1),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn correlator_is_reproducible() {
        let f = MapFamily::new(Variant::Regular, 0.0);
        let a = classical_correlator(&f, Observable::CosQ, 10, 10_000, 42).unwrap();
        let b = classical_correlator(&f, Observable::CosQ, 10, 10_000, 42).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn gaussian_average_limits() {
        let curve = CorrelatorCurve {
            observable: Observable::CosQ,
            values: vec![(0, 0.5), (1, 0.1), (2, 0.0)],
            std_err: vec![0.0; 3],
            a0: 0.0,
            a0_sample: 0.0,
            sample_count: 0,
            rng_seed: 0,
        };
        assert_eq!(curve.gaussian_average(0.0), 0.5);
        assert!(close(curve.gaussian_average(1e-3), 0.5, 1e-12));
        // uniform weights over t ∈ [−2, 2]
        assert!(close(curve.gaussian_average(1e9), (0.5 + 0.2) / 5.0, 1e-9));
    }
}
