//! Quantization-parameter sweeps: eigenlevel tracking by eigenvector overlap
//! and level-shift statistics in units of the mean spacing.

use std::f64::consts::{PI, TAU};

use faer::{c64, Mat};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MapFamily, PlanckScale};
use crate::quantization::build_floquet;
use crate::spectral::{diagonalize, wrapped_difference, SpectralData};

/// Greedy matches below this overlap trigger the exact assignment.
pub const GREEDY_MIN_OVERLAP: f64 = 0.5;
/// Matches below this overlap (after exact assignment) mean the step is too large.
pub const MIN_TRACK_OVERLAP: f64 = 0.25;
pub const DEFAULT_MAX_REFINEMENTS: usize = 3;
pub const DEFAULT_R_STEP: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    /// Maximal eigenvector overlap (diabatic following through crossings).
    #[default]
    Overlap,
    /// Pair by position in the sorted spectrum, up to a cyclic shift.
    Sorted,
}

/// Pairing of the levels of two nearby spectra.
#[derive(Debug, Clone)]
pub struct Tracking {
    /// `permutation[i]` is the index in `next` that continues level `i` of `prev`.
    pub permutation: Vec<usize>,
    /// `|⟨v_i|w_{π(i)}⟩|²` per level.
    pub overlaps: Vec<f64>,
    pub min_overlap: f64,
    /// Whether the exact assignment was needed.
    pub exact: bool,
}

fn overlap_matrix(prev: &SpectralData, next: &SpectralData) -> Mat<f64> {
    let o: Mat<c64> = prev.vectors.adjoint() * &next.vectors;
    Mat::from_fn(o.nrows(), o.ncols(), |i, j| o[(i, j)].norm_sqr())
}

fn finish(permutation: Vec<usize>, ov: &Mat<f64>, exact: bool) -> Tracking {
    let overlaps: Vec<f64> = permutation.iter().enumerate().map(|(i, &j)| ov[(i, j)]).collect();
    let min_overlap = overlaps.iter().copied().fold(f64::INFINITY, f64::min);
    Tracking {
        permutation,
        overlaps,
        min_overlap,
        exact,
    }
}

/// Greedy matching on descending overlaps. `None` if some level is left
/// unmatched or a match falls under [`GREEDY_MIN_OVERLAP`].
fn greedy_assignment(ov: &Mat<f64>) -> Option<Vec<usize>> {
    let n = ov.nrows();
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let w = ov[(i, j)];
            if w >= GREEDY_MIN_OVERLAP {
                candidates.push((w, i, j));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut row = vec![usize::MAX; n];
    let mut col_used = vec![false; n];
    for (_, i, j) in candidates {
        if row[i] == usize::MAX && !col_used[j] {
            row[i] = j;
            col_used[j] = true;
        }
    }
    row.iter().all(|&j| j != usize::MAX).then_some(row)
}

/// Minimum-cost perfect matching (Hungarian algorithm, potentials form).
/// Returns `assignment[row] = col`.
pub fn min_cost_assignment(cost: &Mat<f64>) -> Vec<usize> {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols());
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[p[j] - 1] = j - 1;
    }
    assignment
}

/// Pairs levels maximizing `Σ |⟨v_i|w_j⟩|²` without the step-size check.
pub fn match_levels(prev: &SpectralData, next: &SpectralData) -> Result<Tracking> {
    if prev.n != next.n {
        return Err(Error::Domain(format!(
            "cannot track N = {} against N = {}",
            prev.n, next.n
        )));
    }
    let ov = overlap_matrix(prev, next);
    if let Some(perm) = greedy_assignment(&ov) {
        return Ok(finish(perm, &ov, false));
    }
    let cost = Mat::from_fn(ov.nrows(), ov.ncols(), |i, j| -ov[(i, j)]);
    Ok(finish(min_cost_assignment(&cost), &ov, true))
}

/// [`match_levels`] plus the step check: fails when any match falls under
/// [`MIN_TRACK_OVERLAP`].
pub fn track_levels(prev: &SpectralData, next: &SpectralData) -> Result<Tracking> {
    let t = match_levels(prev, next)?;
    if t.min_overlap < MIN_TRACK_OVERLAP {
        return Err(Error::StepTooLarge {
            r_prev: f64::NAN,
            r_next: f64::NAN,
            min_overlap: t.min_overlap,
        });
    }
    Ok(t)
}

/// Sorted-index pairing up to the cyclic shift that best aligns the phases.
pub fn sorted_pairing(prev: &SpectralData, next: &SpectralData) -> Result<Tracking> {
    let n = prev.n;
    if n != next.n {
        return Err(Error::Domain(format!("cannot pair N = {} against N = {}", n, next.n)));
    }
    let cost = |s: usize| -> f64 {
        (0..n)
            .map(|i| wrapped_difference(next.phases[(i + s) % n], prev.phases[i]).powi(2))
            .sum()
    };
    let shift = (0..n).min_by(|&a, &b| cost(a).total_cmp(&cost(b))).unwrap_or(0);
    let ov = overlap_matrix(prev, next);
    Ok(finish((0..n).map(|i| (i + shift) % n).collect(), &ov, false))
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelTrajectories {
    pub n: usize,
    pub r_grid: Vec<f64>,
    /// `phases[level][k]`: unwrapped eigenphase of a tracked level at `r_grid[k]`.
    /// Levels are labelled by their sorted position at `r_grid[0]`.
    pub phases: Vec<Vec<f64>>,
    /// Composite pairing between consecutive grid points.
    pub permutations: Vec<Vec<usize>>,
    pub min_overlap: f64,
    /// Number of times two tracked levels pass each other on the circle.
    pub crossings: usize,
    /// Grid intervals that needed bisection.
    pub refinements: usize,
    pub pairing: Pairing,
}

impl LevelTrajectories {
    pub fn mean_spacing(&self) -> f64 {
        TAU / self.n as f64
    }

    pub fn grid_index(&self, r: f64) -> Option<usize> {
        self.r_grid.iter().position(|&x| (x - r).abs() <= 1e-9 * (1.0 + r.abs()))
    }

    /// `|φ_n(r_end) − φ_n(r_start)|` in spacing units, maximized over levels.
    pub fn max_total_displacement(&self) -> f64 {
        let last = self.r_grid.len() - 1;
        self.phases
            .iter()
            .map(|p| (p[last] - p[0]).abs() / self.mean_spacing())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    pub pairing: Pairing,
    pub max_refinements: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            pairing: Pairing::Overlap,
            max_refinements: DEFAULT_MAX_REFINEMENTS,
        }
    }
}

/// `n_steps + 1` equally spaced points from `lo` to `hi` with `n_steps = ⌈(hi − lo)/step⌉`.
pub fn uniform_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    if hi <= lo {
        return vec![lo];
    }
    let steps = ((hi - lo) / step - 1e-9).ceil().max(1.0) as usize;
    (0..=steps)
        .map(|k| if k == steps { hi } else { lo + (hi - lo) * k as f64 / steps as f64 })
        .collect()
}

fn spectrum_at(family: &MapFamily, scale: &PlanckScale, r: f64) -> Result<SpectralData> {
    diagonalize(&build_floquet(&family.with_r(r), scale)?)
}

struct Link {
    permutation: Vec<usize>,
    min_overlap: f64,
    refined: bool,
}

fn connect(
    family: &MapFamily,
    scale: &PlanckScale,
    options: &SweepOptions,
    (r_prev, prev): (f64, &SpectralData),
    (r_next, next): (f64, &SpectralData),
    depth: usize,
) -> Result<Link> {
    let t = match options.pairing {
        Pairing::Overlap => match_levels(prev, next)?,
        Pairing::Sorted => {
            return sorted_pairing(prev, next).map(|t| Link {
                min_overlap: t.min_overlap,
                permutation: t.permutation,
                refined: false,
            })
        }
    };
    if t.min_overlap >= MIN_TRACK_OVERLAP {
        return Ok(Link {
            permutation: t.permutation,
            min_overlap: t.min_overlap,
            refined: false,
        });
    }
    if depth >= options.max_refinements {
        return Err(Error::StepTooLarge {
            r_prev,
            r_next,
            min_overlap: t.min_overlap,
        });
    }
    let r_mid = 0.5 * (r_prev + r_next);
    let mid = spectrum_at(family, scale, r_mid)?;
    let a = connect(family, scale, options, (r_prev, prev), (r_mid, &mid), depth + 1)?;
    let b = connect(family, scale, options, (r_mid, &mid), (r_next, next), depth + 1)?;
    Ok(Link {
        permutation: a.permutation.iter().map(|&j| b.permutation[j]).collect(),
        min_overlap: a.min_overlap.min(b.min_overlap),
        refined: true,
    })
}

/// Counts how often the tracked levels pass each other between two grid points.
fn count_crossings(before: &[f64], after: &[f64]) -> usize {
    let n = before.len();
    let mut count = 0;
    for a in 0..n {
        for b in (a + 1)..n {
            let w0 = ((before[a] - before[b]) / TAU).floor();
            let w1 = ((after[a] - after[b]) / TAU).floor();
            count += (w1 - w0).abs() as usize;
        }
    }
    count
}

pub fn sweep_quantization(
    family: &MapFamily,
    scale: &PlanckScale,
    r_grid: &[f64],
    options: SweepOptions,
) -> Result<LevelTrajectories> {
    if r_grid.is_empty() {
        return Err(Error::Domain("empty r grid".into()));
    }
    if r_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("r grid must be strictly ascending".into()));
    }
    family.check_scale(scale)?;
    let n = scale.n();
    let g = r_grid.len();

    let first = spectrum_at(family, scale, r_grid[0])?;
    let mut phases: Vec<Vec<f64>> = first.phases.iter().map(|&p| {
        let mut v = Vec::with_capacity(g);
        v.push(p);
        v
    }).collect();
    // sorted index currently occupied by each tracked level
    let mut position: Vec<usize> = (0..n).collect();
    let mut permutations = Vec::with_capacity(g.saturating_sub(1));
    let mut min_overlap: f64 = 1.0;
    let mut crossings = 0;
    let mut refinements = 0;

    let mut prev = first;
    let batch = rayon::current_num_threads().max(1);
    let mut k = 1;
    while k < g {
        let end = (k + batch).min(g);
        let spectra: Vec<SpectralData> = r_grid[k..end]
            .par_iter()
            .map(|&r| spectrum_at(family, scale, r))
            .collect::<Result<_>>()?;
        for (offset, next) in spectra.into_iter().enumerate() {
            let idx = k + offset;
            let link = connect(
                family,
                scale,
                &options,
                (r_grid[idx - 1], &prev),
                (r_grid[idx], &next),
                0,
            )?;
            min_overlap = min_overlap.min(link.min_overlap);
            refinements += usize::from(link.refined);
            let before: Vec<f64> = phases.iter().map(|p| p[idx - 1]).collect();
            for (level, pos) in position.iter_mut().enumerate() {
                let old_wrapped = prev.phases[*pos];
                *pos = link.permutation[*pos];
                let step = wrapped_difference(next.phases[*pos], old_wrapped);
                debug_assert!(step.abs() <= PI);
                let last = phases[level][idx - 1];
                phases[level].push(last + step);
            }
            let after: Vec<f64> = phases.iter().map(|p| p[idx]).collect();
            crossings += count_crossings(&before, &after);
            permutations.push(link.permutation);
            prev = next;
        }
        k = end;
    }

    Ok(LevelTrajectories {
        n,
        r_grid: r_grid.to_vec(),
        phases,
        permutations,
        min_overlap,
        crossings,
        refinements,
        pairing: options.pairing,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ShiftStatistics {
    /// Per-level shift in units of the mean spacing, before mean subtraction.
    pub shifts: Vec<f64>,
    /// Spectral average of `shifts`.
    pub mean_shift: f64,
    pub mean_sq: f64,
    pub subtract_mean: bool,
}

pub fn shift_statistics(
    traj: &LevelTrajectories,
    r0: f64,
    r1: f64,
    subtract_mean: bool,
) -> Result<ShiftStatistics> {
    let i0 = traj
        .grid_index(r0)
        .ok_or_else(|| Error::Domain(format!("r0 = {r0} is not on the sweep grid")))?;
    let i1 = traj
        .grid_index(r1)
        .ok_or_else(|| Error::Domain(format!("r1 = {r1} is not on the sweep grid")))?;
    let spacing = traj.mean_spacing();
    let shifts: Vec<f64> = traj.phases.iter().map(|p| (p[i1] - p[i0]) / spacing).collect();
    let nf = shifts.len() as f64;
    let mean_shift = shifts.iter().sum::<f64>() / nf;
    let center = if subtract_mean { mean_shift } else { 0.0 };
    let mean_sq = shifts.iter().map(|d| (d - center).powi(2)).sum::<f64>() / nf;
    Ok(ShiftStatistics {
        shifts,
        mean_shift,
        mean_sq,
        subtract_mean,
    })
}
