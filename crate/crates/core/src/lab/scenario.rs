use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::carleson::{FactorSpec, ShellGrid, DEFAULT_CUTOFF};
use crate::error::{Error, Result};
use crate::estimate::{Budget, SearchSpace};
use crate::geometry::{generate_lattice, DiskPoint, Lattice};
use crate::kernel::DEFAULT_GAMMA;
use crate::measures::{Measure, MeasureSpec};
use crate::weights::{RadialWeight, WeightSpec};

fn two() -> f64 {
    2.0
}
fn one() -> f64 {
    1.0
}
fn default_budget() -> usize {
    400
}
fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}
fn default_basis() -> usize {
    crate::toeplitz::DEFAULT_BASIS
}
fn default_cutoff() -> f64 {
    DEFAULT_CUTOFF
}
fn default_k_max() -> usize {
    12
}
fn default_angles() -> usize {
    4
}
fn default_id() -> String {
    "scenario".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeParams {
    pub separation: f64,
    pub covering: f64,
    pub cutoff: f64,
}

impl Default for LatticeParams {
    fn default() -> Self {
        Self {
            separation: 0.5,
            covering: 1.0,
            cutoff: DEFAULT_CUTOFF,
        }
    }
}

/// `(ω_i, p_i, q_i)` for multi-function experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorConfig {
    pub weight: WeightSpec,
    pub p: f64,
    pub q: f64,
}

/// One experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_id")]
    pub id: String,
    pub omega: WeightSpec,
    /// Defaults to `omega`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<WeightSpec>,
    /// Defaults to `omega`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upsilon: Option<WeightSpec>,
    #[serde(default = "two")]
    pub p: f64,
    #[serde(default = "two")]
    pub q: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub factors: Vec<FactorConfig>,
    pub measure: MeasureSpec,
    #[serde(default = "one")]
    pub scale: f64,
    /// Hyperbolic radius of the testing disks.
    #[serde(default = "one")]
    pub radius: f64,
    /// Shell radii (or tail radii for compactness); geometric by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    #[serde(default)]
    pub lattice: LatticeParams,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_basis")]
    pub basis: usize,
    /// Radius cutoff `1 - |z|` for grids, atoms and disk norms.
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    /// Angles per radius for kernel-atom centres in the optimizer.
    #[serde(default = "default_angles")]
    pub angles: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_vanishing: Option<bool>,
    /// `a` when `μ ≍ (1-|z|)^a dA` near the boundary; absent for compact
    /// support or when unknown.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_exponent: Option<f64>,
}

/// Top-level config file: `{"scenario": {...}}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub scenario: Scenario,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

impl Default for Scenario {
    /// Unit atom at the origin, `standard(0)`, `p = q = 2`.
    fn default() -> Self {
        Self {
            id: default_id(),
            omega: WeightSpec::Standard { alpha: 0.0 },
            eta: None,
            upsilon: None,
            p: 2.0,
            q: 2.0,
            factors: Vec::new(),
            measure: MeasureSpec::Atomic {
                points: vec![DiskPoint::ORIGIN],
                masses: vec![1.0],
            },
            scale: 1.0,
            radius: 1.0,
            radii: None,
            lattice: LatticeParams::default(),
            budget: default_budget(),
            seed: 0,
            gamma: default_gamma(),
            basis: default_basis(),
            cutoff: default_cutoff(),
            k_max: default_k_max(),
            angles: default_angles(),
            expect_vanishing: None,
            boundary_exponent: None,
        }
    }
}

/// A scenario with its objects built.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub scenario: Scenario,
    pub omega: RadialWeight,
    pub eta: RadialWeight,
    pub upsilon: RadialWeight,
    pub mu: Measure,
    pub grid: ShellGrid,
    pub space: SearchSpace,
    pub budget: Budget,
}

/// Atoms used as extra optimizer centres when there are few of them.
const MAX_EXTRA_CENTERS: usize = 16;

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("p", self.p)?;
        positive("q", self.q)?;
        positive("scale", self.scale)?;
        positive("radius", self.radius)?;
        positive("gamma", self.gamma)?;
        if !(self.cutoff > 0.0 && self.cutoff < 1.0) {
            return Err(Error::Config(format!("cutoff must lie in (0, 1), got {}", self.cutoff)));
        }
        if self.basis == 0 {
            return Err(Error::Config("basis must be at least 1".into()));
        }
        for f in &self.factors {
            positive("factor p", f.p)?;
            positive("factor q", f.q)?;
        }
        Ok(())
    }

    /// Geometric shells out to `1 - |z| >= cutoff`, or the configured radii.
    pub fn grid(&self) -> Result<ShellGrid> {
        match &self.radii {
            Some(r) => ShellGrid::with_radii(r.clone()),
            None => Ok(ShellGrid::geometric((1.0 / self.cutoff).log2().floor() as u32)),
        }
    }

    pub fn lattice(&self) -> Result<Lattice> {
        let l = self.lattice;
        generate_lattice(l.separation, l.covering, l.cutoff)
    }

    pub fn factor_specs(&self) -> Result<Vec<FactorSpec>> {
        self.factors
            .iter()
            .map(|f| {
                Ok(FactorSpec {
                    weight: f.weight.build()?,
                    p: f.p,
                    q: f.q,
                })
            })
            .collect()
    }

    pub fn with_scale(&self, c: f64) -> Self {
        Self {
            scale: self.scale * c,
            ..self.clone()
        }
    }

    /// The same scenario truncated `factor` times further from the boundary.
    pub fn coarsened(&self, factor: f64) -> Self {
        let mut s = self.clone();
        s.cutoff = (s.cutoff * factor).min(0.5);
        s.basis = ((s.basis as f64 / factor).round() as usize).max(1);
        s.lattice.cutoff = (s.lattice.cutoff * factor).min(0.5);
        s.radii = None;
        s
    }

    pub fn prepare(&self) -> Result<Prepared> {
        self.validate()?;
        let omega = self.omega.build()?;
        let eta = match &self.eta {
            Some(s) => s.build()?,
            None => omega.clone(),
        };
        let upsilon = match &self.upsilon {
            Some(s) => s.build()?,
            None => omega.clone(),
        };
        let mut mu = self.measure.build()?;
        if self.scale != 1.0 {
            mu = mu.scale(self.scale)?;
        }
        let extra: Vec<DiskPoint> = match &mu {
            Measure::Atomic { points, .. } if points.len() <= MAX_EXTRA_CENTERS => points.clone(),
            _ => Vec::new(),
        };
        Ok(Prepared {
            scenario: self.clone(),
            omega,
            eta,
            upsilon,
            mu,
            grid: self.grid()?,
            space: SearchSpace::standard(self.cutoff, self.angles, &extra),
            budget: Budget {
                evaluations: self.budget,
                seed: self.seed,
            },
        })
    }
}
