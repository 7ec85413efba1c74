//! Run specifications: JSON config files merged with command-line overrides.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::classical::{MIN_CORRELATOR_SAMPLES, MIN_LYAPUNOV_SEEDS, MIN_LYAPUNOV_STEPS};
use crate::error::{Error, Result};
use crate::model::{MapFamily, Observable, PlanckScale};
use crate::quantization::GridOffsets;
use crate::scaling::MIN_LADDER;
use crate::spectral::DEGENERACY_GAP;
use crate::sweep::DEFAULT_R_STEP;

pub const DEFAULT_R_MIN: f64 = 0.0;
pub const DEFAULT_R_MAX: f64 = 3.0;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_SAMPLES: usize = 1_000_000;
pub const DEFAULT_T_MAX: usize = 200;
pub const DEFAULT_T_RANGE: usize = 5;
pub const DEFAULT_T_POINTS: usize = 20;
pub const DEFAULT_LYAPUNOV_STEPS: usize = 100_000;
pub const DEFAULT_LYAPUNOV_SEEDS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Classical,
    Spectrum,
    Sweep,
    Scaling,
    Ergodicity,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Classical => "classical",
            Command::Spectrum => "spectrum",
            Command::Sweep => "sweep",
            Command::Scaling => "scaling",
            Command::Ergodicity => "ergodicity",
        }
    }
}

fn default_r_step() -> f64 {
    DEFAULT_R_STEP
}
fn default_observable() -> Observable {
    Observable::CosQ
}
fn default_seed() -> u64 {
    DEFAULT_SEED
}
fn default_samples() -> usize {
    DEFAULT_SAMPLES
}
fn default_t_max() -> usize {
    DEFAULT_T_MAX
}
fn default_t_range() -> usize {
    DEFAULT_T_RANGE
}
fn default_gap_tol() -> f64 {
    DEGENERACY_GAP
}
fn default_lyapunov_steps() -> usize {
    DEFAULT_LYAPUNOV_STEPS
}
fn default_lyapunov_seeds() -> usize {
    DEFAULT_LYAPUNOV_SEEDS
}
fn default_out() -> PathBuf {
    PathBuf::from("runs")
}
fn yes() -> bool {
    true
}

/// A complete description of one run. After [`RunSpec::resolve`] every field
/// the command reads is filled in, so the serialized form reproduces the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub command: Command,
    pub family: MapFamily,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(rename = "N_list", default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_max: Option<f64>,
    #[serde(default = "default_r_step")]
    pub r_step: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r1: Option<f64>,
    #[serde(default = "default_observable")]
    pub observable: Observable,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_t_max")]
    pub t_max: usize,
    #[serde(default = "default_t_range")]
    pub t_range: usize,
    #[serde(rename = "T_grid", default, skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<Vec<f64>>,
    #[serde(default = "default_gap_tol")]
    pub gap_tol: f64,
    #[serde(default = "default_lyapunov_steps")]
    pub lyapunov_steps: usize,
    #[serde(default = "default_lyapunov_seeds")]
    pub lyapunov_seeds: usize,
    #[serde(default)]
    pub grid_offsets: GridOffsets,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "yes")]
    pub subtract_mean: bool,
    #[serde(default)]
    pub sorted_pairing: bool,
    #[serde(default)]
    pub emit_plot: bool,
}

/// `count` log-spaced points from `lo` to `hi`.
pub fn geometric_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![hi];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Default `T` grid for `F(T)`: from a tenth of a step to `100·N/2π`, where the
/// Gaussian window resolves every non-degenerate phase gap.
pub fn default_t_grid(n_max: usize) -> Vec<f64> {
    geometric_grid(0.1, 100.0 * n_max as f64 / TAU, DEFAULT_T_POINTS)
}

impl RunSpec {
    /// Parses a JSON object into a spec, without validation.
    pub fn from_value(value: Value) -> Result<Self> {
        serde_json::from_value(value).map_err(|e| Error::Invalid(vec![e.to_string()]))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("run spec serializes")
    }

    /// Ladder of Hilbert dimensions the command runs over.
    pub fn dimensions(&self) -> Vec<usize> {
        match (&self.n_list, self.n) {
            (Some(list), _) => list.clone(),
            (None, Some(n)) => vec![n],
            (None, None) => Vec::new(),
        }
    }

    /// Collects every problem with the spec, each prefixed by its field path.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut bad = |field: &str, msg: String| out.push(format!("{field}: {msg}"));

        if !self.family.r.is_finite() {
            bad("family.r", "must be finite".into());
        }
        match self.command {
            Command::Spectrum | Command::Sweep => {
                if self.n.is_none() {
                    bad("N", format!("required for `{}`", self.command.name()));
                }
                if self.n_list.is_some() {
                    bad("N_list", format!("not accepted by `{}`; use N", self.command.name()));
                }
            }
            Command::Scaling => {
                if self.n.is_some() {
                    bad("N", "not accepted by `scaling`; use N_list".into());
                }
                match &self.n_list {
                    None => bad("N_list", "required for `scaling`".into()),
                    Some(l) if l.len() < MIN_LADDER => bad(
                        "N_list",
                        format!("needs at least {MIN_LADDER} values, got {}", l.len()),
                    ),
                    _ => {}
                }
            }
            Command::Ergodicity => {
                if self.n.is_some() == self.n_list.is_some() {
                    bad("N", "exactly one of N or N_list is required".into());
                }
            }
            Command::Classical => {
                if self.n_list.is_some() {
                    bad("N_list", "not accepted by `classical`; use N".into());
                }
            }
        }
        if let Some(n) = self.n {
            if let Err(e) = PlanckScale::for_family(n, &self.family) {
                bad("N", e.to_string());
            }
        }
        if let Some(list) = &self.n_list {
            for (i, &n) in list.iter().enumerate() {
                if let Err(e) = PlanckScale::for_family(n, &self.family) {
                    bad(&format!("N_list[{i}]"), e.to_string());
                }
            }
            if list.windows(2).any(|w| w[1] <= w[0]) {
                bad("N_list", "must be strictly increasing".into());
            }
        }

        if !(self.r_step.is_finite() && self.r_step > 0.0) {
            bad("r_step", "must be positive".into());
        }
        for (field, v) in [
            ("r_min", self.r_min),
            ("r_max", self.r_max),
            ("r0", self.r0),
            ("r1", self.r1),
        ] {
            if v.is_some_and(|x| !x.is_finite()) {
                bad(field, "must be finite".into());
            }
        }
        if let (Some(lo), Some(hi)) = (self.r_min, self.r_max) {
            if lo > hi {
                bad("r_max", format!("must be ≥ r_min ({lo})"));
            }
        }
        if self.command == Command::Scaling && self.r0.is_some() && self.r0 == self.r1 {
            bad("r1", "must differ from r0 for a scaling study".into());
        }

        if self.samples < MIN_CORRELATOR_SAMPLES {
            bad("samples", format!("must be ≥ {MIN_CORRELATOR_SAMPLES}"));
        }
        if self.t_max == 0 {
            bad("t_max", "must be positive".into());
        }
        if self.t_range > self.t_max {
            bad("t_range", format!("must be ≤ t_max ({})", self.t_max));
        }
        if self.lyapunov_steps < MIN_LYAPUNOV_STEPS {
            bad("lyapunov_steps", format!("must be ≥ {MIN_LYAPUNOV_STEPS}"));
        }
        if self.lyapunov_seeds < MIN_LYAPUNOV_SEEDS {
            bad("lyapunov_seeds", format!("must be ≥ {MIN_LYAPUNOV_SEEDS}"));
        }
        if let Some(grid) = &self.t_grid {
            if grid.is_empty() {
                bad("T_grid", "must not be empty".into());
            }
            if grid.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
                bad("T_grid", "entries must be positive".into());
            }
            if grid.windows(2).any(|w| w[1] <= w[0]) {
                bad("T_grid", "must be strictly ascending".into());
            }
        }
        if !(self.gap_tol.is_finite() && self.gap_tol > 0.0) {
            bad("gap_tol", "must be positive".into());
        }
        let GridOffsets { position, momentum } = self.grid_offsets;
        if !(position.is_finite() && momentum.is_finite()) {
            bad("grid_offsets", "must be finite".into());
        }
        if !self.grid_offsets.is_zero() && self.command != Command::Spectrum {
            bad("grid_offsets", "only supported by `spectrum`".into());
        }
        out
    }

    /// Validates and fills every command-relevant default.
    pub fn resolve(mut self) -> Result<Self> {
        let problems = self.problems();
        if !problems.is_empty() {
            return Err(Error::Invalid(problems));
        }
        match self.command {
            Command::Sweep => {
                self.r_min.get_or_insert(DEFAULT_R_MIN);
                self.r_max.get_or_insert(DEFAULT_R_MAX);
            }
            Command::Scaling => {
                self.r0.get_or_insert(DEFAULT_R_MIN);
                self.r1.get_or_insert(DEFAULT_R_MAX);
            }
            Command::Ergodicity | Command::Classical => {
                if self.t_grid.is_none() {
                    let n_max = self.dimensions().into_iter().max().unwrap_or(1);
                    self.t_grid = Some(default_t_grid(n_max));
                }
            }
            Command::Spectrum => {}
        }
        Ok(self)
    }

    /// Reads and resolves a spec file.
    pub fn load(path: &Path) -> Result<Self> {
        Self::from_value(read_config(path)?)?.resolve()
    }
}

/// Reads a config file as a JSON object.
pub fn read_config(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    if !value.is_object() {
        return Err(Error::Config(format!("{}: expected a JSON object", path.display())));
    }
    Ok(value)
}

/// Overlays `overrides` onto `base`, merging nested objects key by key.
pub fn merge(base: &mut Map<String, Value>, overrides: Map<String, Value>) {
    for (k, v) in overrides {
        match (base.get_mut(&k), v) {
            (Some(Value::Object(b)), Value::Object(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn spec(v: Value) -> Result<RunSpec> {
        RunSpec::from_value(v)?.resolve()
    }

    #[test]
    fn spectrum_spec_gets_defaults() {
        let s = spec(json!({"command":"spectrum","family":{"variant":"chaotic","r":0.0},"N":512})).unwrap();
        assert_eq!(s.n, Some(512));
        assert_eq!(s.seed, DEFAULT_SEED);
        assert_eq!(s.samples, DEFAULT_SAMPLES);
        assert!(s.subtract_mean && !s.sorted_pairing && !s.emit_plot);
        assert!(s.grid_offsets.is_zero());
    }

    #[test]
    fn odd_dimension_is_rejected() {
        let e = spec(json!({"command":"sweep","family":{"variant":"regular","r":0},"N":511})).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let msg = e.to_string();
        assert!(msg.contains("N:") && msg.contains("even"), "{msg}");
    }

    #[test]
    fn scaling_spec_with_default_r() {
        let s = spec(json!({"command":"scaling","N_list":[64,128,256,512],
            "family":{"variant":"slow_ergodic"},"r0":0.0,"r1":3.0}))
        .unwrap();
        assert_eq!(s.family.r, 0.0);
        assert_eq!(s.dimensions(), vec![64, 128, 256, 512]);
        assert_eq!((s.r0, s.r1), (Some(0.0), Some(3.0)));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = spec(json!({"command":"spectrum","family":{"variant":"chaotic"},"N":64,"nn":1})).unwrap_err();
        assert!(e.to_string().contains("nn"), "{e}");
        let e = spec(json!({"command":"spectrum","family":{"variant":"chaotic","k":1},"N":64})).unwrap_err();
        assert!(e.to_string().contains('k'), "{e}");
    }

    #[test]
    fn problems_are_aggregated() {
        let e = spec(json!({"command":"scaling","family":{"variant":"chaotic"},
            "N_list":[64,65],"r_step":-1.0,"samples":10,"T_grid":[2.0,1.0]}))
        .unwrap_err();
        let Error::Invalid(list) = e else { panic!("{e}") };
        for field in ["N_list:", "N_list[1]:", "r_step:", "samples:", "T_grid:"] {
            assert!(list.iter().any(|m| m.starts_with(field)), "{field} missing in {list:?}");
        }
    }

    #[test]
    fn ergodicity_grid_reaches_large_t() {
        let s = spec(json!({"command":"ergodicity","family":{"variant":"chaotic"},"N_list":[64,128]})).unwrap();
        let g = s.t_grid.unwrap();
        assert_eq!(g.len(), DEFAULT_T_POINTS);
        assert!((g[g.len() - 1] - 100.0 * 128.0 / TAU).abs() < 1e-9);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn resolved_spec_round_trips() {
        let s = spec(json!({"command":"sweep","family":{"variant":"regular","r":0.5},"N":64})).unwrap();
        let back = RunSpec::from_value(serde_json::from_str(&s.to_json()).unwrap()).unwrap();
        assert_eq!(back, s);
        assert_eq!((s.r_min, s.r_max), (Some(DEFAULT_R_MIN), Some(DEFAULT_R_MAX)));
    }

    #[test]
    fn merge_overrides_nested_keys() {
        let mut base = json!({"family":{"variant":"chaotic","r":1.0},"N":64});
        let o = json!({"family":{"r":2.0},"out":"x"});
        merge(base.as_object_mut().unwrap(), o.as_object().unwrap().clone());
        assert_eq!(base, json!({"family":{"variant":"chaotic","r":2.0},"N":64,"out":"x"}));
    }
}
