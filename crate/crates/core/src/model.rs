//! Kicked-map families on the unit torus and the one-parameter family of
//! quantizations `r·h²·cos 2πx` that differ only at second order in ħ.
//!
//! A family is a pair of functions `V(q)` (kick) and `T(p)` (free motion).
//! The perturbation term is proportional to `h² = 1/N²`, so it vanishes in the
//! classical limit and only makes sense together with a [`PlanckScale`].

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Amplitude of the parity-breaking `sin 2πq` term of the quadratic potentials.
pub const SIN_STRENGTH: f64 = 0.4;
/// Slope of the sawtooth potential `0.3·|q − 1/2|`.
pub const SAWTOOTH_SLOPE: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `V = −q²/2 + 0.4/(2π)²·sin 2πq`: fully chaotic (perturbed cat map).
    Chaotic,
    /// `V = +q²/2 + 0.4/(2π)²·sin 2πq`: mostly regular phase space.
    Regular,
    /// `V = 0.3·|q − 1/2|`, perturbation in the kinetic term: ergodic, not hyperbolic.
    SlowErgodic,
    /// `V ≡ 0`: free shear, used as an analytically solvable reference.
    Free,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Chaotic,
        Variant::Regular,
        Variant::SlowErgodic,
        Variant::Free,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Chaotic => "chaotic",
            Variant::Regular => "regular",
            Variant::SlowErgodic => "slow_ergodic",
            Variant::Free => "free",
        }
    }

    /// Whether `V` or `T` contains a quadratic term. All current variants
    /// carry `p²/2`, so this is always true; kept explicit for the N-parity check.
    pub fn has_quadratic_term(self) -> bool {
        true
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown variant `{s}` (expected chaotic, regular, slow_ergodic or free)"
                ))
            })
    }
}

/// Where the `r·h²·cos 2πx` perturbation acts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Site {
    Position,
    Momentum,
}

/// Function component of a family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    V,
    Vprime,
    T,
}

/// A kicked map together with its quantization parameter `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapFamily {
    pub variant: Variant,
    #[serde(default)]
    pub r: f64,
}

impl MapFamily {
    pub fn new(variant: Variant, r: f64) -> Self {
        Self { variant, r }
    }

    pub fn with_r(self, r: f64) -> Self {
        Self { r, ..self }
    }

    /// The same map with the O(ħ²) term removed.
    pub fn classical_limit(self) -> Self {
        self.with_r(0.0)
    }

    pub fn perturbation_site(&self) -> Site {
        match self.variant {
            Variant::SlowErgodic => Site::Momentum,
            _ => Site::Position,
        }
    }

    /// `r·h²`, or an error if a nonzero `r` is evaluated without a scale.
    fn amplitude(&self, scale: Option<&PlanckScale>) -> Result<f64> {
        match scale {
            Some(s) => Ok(self.r * s.h() * s.h()),
            None if self.r == 0.0 => Ok(0.0),
            None => Err(Error::Config(format!(
                "r = {} needs a Planck scale to evaluate the r·h² term",
                self.r
            ))),
        }
    }

    pub fn evaluate(
        &self,
        component: Component,
        x: f64,
        scale: Option<&PlanckScale>,
    ) -> Result<f64> {
        if !(0.0..1.0).contains(&x) {
            return Err(Error::Domain(format!("coordinate {x} outside [0, 1)")));
        }
        let amp = self.amplitude(scale)?;
        Ok(match component {
            Component::V => self.potential(x, amp),
            Component::Vprime => self.force(x, amp),
            Component::T => self.kinetic(x, amp),
        })
    }

    /// `V(q)` with perturbation amplitude `amp = r·h²` (position-site variants only).
    pub(crate) fn potential(&self, q: f64, amp: f64) -> f64 {
        let c = 2.0 * PI * q;
        let smooth = SIN_STRENGTH / (4.0 * PI * PI) * c.sin() + amp * c.cos();
        match self.variant {
            Variant::Chaotic => -0.5 * q * q + smooth,
            Variant::Regular => 0.5 * q * q + smooth,
            Variant::SlowErgodic => SAWTOOTH_SLOPE * (q - 0.5).abs(),
            Variant::Free => amp * c.cos(),
        }
    }

    /// `V'(q)`. The sawtooth derivative is `0.3·sign(q − 1/2)` with `V'(1/2) = 0`.
    pub(crate) fn force(&self, q: f64, amp: f64) -> f64 {
        let c = 2.0 * PI * q;
        let smooth =
            SIN_STRENGTH / (2.0 * PI) * c.cos() - 2.0 * PI * amp * c.sin();
        match self.variant {
            Variant::Chaotic => -q + smooth,
            Variant::Regular => q + smooth,
            Variant::SlowErgodic => {
                if q == 0.5 {
                    0.0
                } else {
                    SAWTOOTH_SLOPE * (q - 0.5).signum()
                }
            }
            Variant::Free => -2.0 * PI * amp * c.sin(),
        }
    }

    /// `V''(q)`, zero for the sawtooth away from its kinks.
    pub(crate) fn curvature(&self, q: f64, amp: f64) -> f64 {
        let c = 2.0 * PI * q;
        let smooth = -SIN_STRENGTH * c.sin() - 4.0 * PI * PI * amp * c.cos();
        match self.variant {
            Variant::Chaotic => -1.0 + smooth,
            Variant::Regular => 1.0 + smooth,
            Variant::SlowErgodic => 0.0,
            Variant::Free => -4.0 * PI * PI * amp * c.cos(),
        }
    }

    /// `T(p) = p²/2`, plus `amp·cos 2πp` for the momentum-site variant.
    pub(crate) fn kinetic(&self, p: f64, amp: f64) -> f64 {
        let base = 0.5 * p * p;
        match self.perturbation_site() {
            Site::Momentum => base + amp * (2.0 * PI * p).cos(),
            Site::Position => base,
        }
    }

    /// Checks that `scale` is compatible with this family.
    pub fn check_scale(&self, scale: &PlanckScale) -> Result<()> {
        if self.variant.has_quadratic_term() && !scale.n().is_multiple_of(2) {
            return Err(Error::Constraint(format!(
                "N = {} is odd; the {} variant has a quadratic term and needs even N",
                scale.n(),
                self.variant
            )));
        }
        Ok(())
    }
}

/// Hilbert-space dimension `N`, with `h = 1/N` and `ħ = 1/(2πN)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PlanckScale {
    n: usize,
}

impl PlanckScale {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Constraint(format!("N = {n}; need N >= 2")));
        }
        Ok(Self { n })
    }

    /// Builds a scale and checks it against `family` in one go.
    pub fn for_family(n: usize, family: &MapFamily) -> Result<Self> {
        let scale = Self::new(n)?;
        family.check_scale(&scale)?;
        Ok(scale)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn hbar(&self) -> f64 {
        1.0 / (2.0 * PI * self.n as f64)
    }

    /// Mean eigenphase spacing `2π/N`.
    pub fn mean_spacing(&self) -> f64 {
        2.0 * PI / self.n as f64
    }
}

/// Observables that are functions of `q` alone or `p` alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Observable {
    #[serde(rename = "cos2pi_q")]
    CosQ,
    #[serde(rename = "cos2pi_p")]
    CosP,
    #[serde(rename = "identity")]
    Identity,
}

impl Observable {
    pub fn name(self) -> &'static str {
        match self {
            Observable::CosQ => "cos2pi_q",
            Observable::CosP => "cos2pi_p",
            Observable::Identity => "identity",
        }
    }

    pub fn classical(self, point: PhaseSpacePoint) -> f64 {
        match self {
            Observable::CosQ => (2.0 * PI * point.q).cos(),
            Observable::CosP => (2.0 * PI * point.p).cos(),
            Observable::Identity => 1.0,
        }
    }

    /// Uniform phase-space average.
    pub fn torus_average(self) -> f64 {
        match self {
            Observable::CosQ | Observable::CosP => 0.0,
            Observable::Identity => 1.0,
        }
    }
}

impl std::str::FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Observable::CosQ, Observable::CosP, Observable::Identity]
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown observable `{s}` (expected cos2pi_q, cos2pi_p or identity)"
                ))
            })
    }
}

/// Reduces `x` into `[0, 1)`.
pub fn wrap_unit(x: f64) -> f64 {
    let y = x.rem_euclid(1.0);
    // rem_euclid can round up to exactly 1.0 for tiny negative inputs
    if y >= 1.0 {
        0.0
    } else {
        y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpacePoint {
    pub q: f64,
    pub p: f64,
}

impl PhaseSpacePoint {
    pub fn new(q: f64, p: f64) -> Self {
        Self {
            q: wrap_unit(q),
            p: wrap_unit(p),
        }
    }
}
