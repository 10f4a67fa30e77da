//! JSON scenario configuration.
//!
//! Parsing is strict: unknown keys anywhere are rejected and the offending
//! key is named in the error. Stepper, basis, convergence and output blocks
//! may be omitted and take the documented defaults.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{FieldConfig, Perturbation, StaticPotential, UnitsConfig};
use crate::grid::{build_grid, Grid1D};
use crate::operator::{DampingConfig, DEFAULT_K_MAX};
use crate::propagator::{StepperConfig, DEFAULT_DT, DEFAULT_FIXED_POINT_TOL, DEFAULT_MAX_FIXED_POINT_ITERS};

pub const DEFAULT_STRIDE: usize = 10;
pub const DEFAULT_POPULATION_THRESHOLD: f64 = 0.999;
pub const DEFAULT_POWER_THRESHOLD: f64 = 1e-8;
pub const DEFAULT_HOLD_TIME: f64 = 5.0;
/// Allowed deviation of `sum |C_n|^2` from one.
pub const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub n_interior: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepperSpec {
    pub dt: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for StepperSpec {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            tol: DEFAULT_FIXED_POINT_TOL,
            max_iters: DEFAULT_MAX_FIXED_POINT_ITERS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub n: usize,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Eigenstate {
        n: usize,
    },
    Superposition {
        terms: Vec<Term>,
    },
    /// `exp(-(x - center)^2 / (4 width^2) + i k x)`, normalized on the grid.
    Gaussian {
        center: f64,
        width: f64,
        momentum: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    #[serde(default)]
    pub t0: f64,
    pub t_final: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BasisSpec {
    pub k_max: usize,
}

impl Default for BasisSpec {
    fn default() -> Self {
        Self { k_max: DEFAULT_K_MAX }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceSpec {
    pub population: f64,
    pub power: f64,
    pub hold: f64,
    /// End the run as soon as convergence is detected.
    pub stop_early: bool,
}

impl Default for ConvergenceSpec {
    fn default() -> Self {
        Self {
            population: DEFAULT_POPULATION_THRESHOLD,
            power: DEFAULT_POWER_THRESHOLD,
            hold: DEFAULT_HOLD_TIME,
            stop_early: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    /// Directory receiving `timeseries.csv` and `summary.json`.
    pub path: PathBuf,
    pub stride: usize,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            path: PathBuf::from("output"),
            stride: DEFAULT_STRIDE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub grid: GridSpec,
    pub potential: StaticPotential,
    #[serde(default)]
    pub perturbation: Perturbation,
    #[serde(default)]
    pub beta: f64,
    #[serde(default)]
    pub stepper: StepperSpec,
    pub initial: InitialSpec,
    pub time: TimeSpec,
    #[serde(default)]
    pub basis: BasisSpec,
    #[serde(default)]
    pub convergence: ConvergenceSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ScenarioConfig {
    /// Minimal config: a well, an initial state and a time span; everything else defaulted.
    pub fn new(grid: GridSpec, potential: StaticPotential, initial: InitialSpec, t_final: f64) -> Self {
        Self {
            grid,
            potential,
            perturbation: Perturbation::None,
            beta: 0.0,
            stepper: StepperSpec::default(),
            initial,
            time: TimeSpec { t0: 0.0, t_final },
            basis: BasisSpec::default(),
            convergence: ConvergenceSpec::default(),
            output: OutputSpec::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn build_grid(&self) -> Result<Grid1D> {
        build_grid(self.grid.x_min, self.grid.x_max, self.grid.n_interior)
    }

    pub fn fields(&self) -> FieldConfig {
        FieldConfig {
            static_potential: self.potential.clone(),
            perturbation: self.perturbation.clone(),
        }
    }

    pub fn units(&self) -> UnitsConfig {
        UnitsConfig::default()
    }

    pub fn damping(&self) -> Result<DampingConfig> {
        DampingConfig::new(self.beta)
    }

    pub fn stepper(&self) -> StepperConfig {
        StepperConfig {
            dt: self.stepper.dt,
            fixed_point_tol: self.stepper.tol,
            max_fixed_point_iters: self.stepper.max_iters,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.build_grid()?;
        self.fields().validate(&grid)?;
        self.damping()?;
        self.stepper().validate()?;
        if !(self.time.t0.is_finite() && self.time.t_final.is_finite() && self.time.t_final > self.time.t0) {
            return Err(Error::Config(format!(
                "time.t_final ({}) must exceed time.t0 ({})",
                self.time.t_final, self.time.t0
            )));
        }
        if self.basis.k_max == 0 {
            return Err(Error::Config("basis.k_max must be at least 1".into()));
        }
        if self.basis.k_max > grid.len() {
            return Err(Error::BasisTooLarge {
                requested: self.basis.k_max,
                available: grid.len(),
            });
        }
        if self.output.stride == 0 {
            return Err(Error::Config("output.stride must be at least 1".into()));
        }
        let c = &self.convergence;
        if !(c.population > 0.0 && c.population <= 1.0) || !(c.power > 0.0) || !(c.hold >= 0.0) {
            return Err(Error::Config(format!(
                "convergence thresholds out of range: population {}, power {}, hold {}",
                c.population, c.power, c.hold
            )));
        }
        match &self.initial {
            InitialSpec::Eigenstate { n } => self.check_level(*n)?,
            InitialSpec::Superposition { terms } => {
                if terms.is_empty() {
                    return Err(Error::Config("superposition needs at least one term".into()));
                }
                let mut seen = vec![false; self.basis.k_max];
                for t in terms {
                    self.check_level(t.n)?;
                    if std::mem::replace(&mut seen[t.n], true) {
                        return Err(Error::Config(format!("superposition lists level {} twice", t.n)));
                    }
                }
                let sum: f64 = terms.iter().map(|t| t.re * t.re + t.im * t.im).sum();
                if !((sum - 1.0).abs() <= NORMALIZATION_TOL) {
                    return Err(Error::NotNormalized { sum, deficit: 1.0 - sum });
                }
            }
            InitialSpec::Gaussian { center, width, momentum } => {
                if !(center.is_finite() && momentum.is_finite() && width.is_finite() && *width > 0.0) {
                    return Err(Error::Config("gaussian needs finite center/momentum and positive width".into()));
                }
            }
        }
        Ok(())
    }

    fn check_level(&self, n: usize) -> Result<()> {
        if n >= self.basis.k_max {
            return Err(Error::Config(format!(
                "level {n} is outside the basis (k_max = {})",
                self.basis.k_max
            )));
        }
        Ok(())
    }
}

impl InitialSpec {
    pub fn coefficients(&self) -> Option<Vec<(usize, Complex64)>> {
        match self {
            Self::Eigenstate { n } => Some(vec![(*n, Complex64::new(1.0, 0.0))]),
            Self::Superposition { terms } => Some(terms.iter().map(|t| (t.n, Complex64::new(t.re, t.im))).collect()),
            Self::Gaussian { .. } => None,
        }
    }
}

pub fn parse_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ScenarioConfig::from_json(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}
