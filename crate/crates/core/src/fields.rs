//! External potential energy `V(x, t) = q*phi(x, t)` with the vector potential fixed to zero.
//!
//! The static part never depends on time; all time dependence sits in the
//! perturbation, whose time derivative is available in closed form for the
//! external-work integral.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid1D, RealField};

/// Natural units. The charge is folded into the potential energy and never used directly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitsConfig {
    pub hbar: f64,
    pub mass: f64,
    pub charge: f64,
}

impl Default for UnitsConfig {
    fn default() -> Self {
        Self {
            hbar: 1.0,
            mass: 1.0,
            charge: 1.0,
        }
    }
}

impl UnitsConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("hbar", self.hbar), ("mass", self.mass), ("charge", self.charge)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidField(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum StaticPotential {
    /// `V = 0` between the walls.
    SquareWell,
    /// `V = m * omega0^2 * x^2 / 2`.
    Harmonic {
        #[serde(rename = "omega0")]
        omega0: f64,
    },
    /// One value per interior grid point.
    Tabulated { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum Perturbation {
    #[default]
    None,
    /// `V1 = eps * x * exp(-(t - t_c)^2 / tau^2)`.
    DipolePulse {
        epsilon: f64,
        t_center: f64,
        tau: f64,
    },
    /// `V1 = eps * x * s(t) * sin(omega * t)` with `s(t) = clamp(t / t_ramp, 0, 1)`.
    DipolePeriodic {
        epsilon: f64,
        omega: f64,
        t_ramp: f64,
    },
}

/// Pulse envelope widths past the center after which `exp(-64)` is treated as zero.
pub const PULSE_CUTOFF_WIDTHS: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    pub static_potential: StaticPotential,
    #[serde(default)]
    pub perturbation: Perturbation,
}

impl FieldConfig {
    pub fn square_well() -> Self {
        Self {
            static_potential: StaticPotential::SquareWell,
            perturbation: Perturbation::None,
        }
    }

    pub fn harmonic(omega0: f64) -> Self {
        Self {
            static_potential: StaticPotential::Harmonic { omega0 },
            perturbation: Perturbation::None,
        }
    }

    pub fn with_perturbation(mut self, perturbation: Perturbation) -> Self {
        self.perturbation = perturbation;
        self
    }

    pub fn validate(&self, grid: &Grid1D) -> Result<()> {
        match &self.static_potential {
            StaticPotential::SquareWell => {}
            StaticPotential::Harmonic { omega0 } => {
                if !omega0.is_finite() {
                    return Err(Error::InvalidField(format!("omega0 must be finite, got {omega0}")));
                }
            }
            StaticPotential::Tabulated { values } => {
                if values.len() != grid.len() {
                    return Err(Error::InvalidField(format!(
                        "tabulated potential has {} values, grid has {} interior points",
                        values.len(),
                        grid.len()
                    )));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidField("tabulated potential has non-finite values".into()));
                }
            }
        }
        match self.perturbation {
            Perturbation::None => {}
            Perturbation::DipolePulse { epsilon, t_center, tau } => {
                if !(epsilon.is_finite() && t_center.is_finite()) {
                    return Err(Error::InvalidField("pulse parameters must be finite".into()));
                }
                if !(tau.is_finite() && tau > 0.0) {
                    return Err(Error::InvalidField(format!("pulse tau must be positive, got {tau}")));
                }
            }
            Perturbation::DipolePeriodic { epsilon, omega, t_ramp } => {
                if !(epsilon.is_finite() && omega.is_finite()) {
                    return Err(Error::InvalidField("drive parameters must be finite".into()));
                }
                if !(t_ramp.is_finite() && t_ramp > 0.0) {
                    return Err(Error::InvalidField(format!("t_ramp must be positive, got {t_ramp}")));
                }
            }
        }
        Ok(())
    }

    pub fn is_time_dependent(&self) -> bool {
        !matches!(self.perturbation, Perturbation::None)
    }

    /// Time after which the perturbation is negligible: `t_c + 8 tau` for a
    /// pulse, never for a periodic drive.
    pub fn settled_after(&self) -> f64 {
        match self.perturbation {
            Perturbation::None => f64::NEG_INFINITY,
            Perturbation::DipolePulse { t_center, tau, .. } => t_center + PULSE_CUTOFF_WIDTHS * tau.abs(),
            Perturbation::DipolePeriodic { .. } => f64::INFINITY,
        }
    }

    pub fn static_potential(&self, grid: &Grid1D, units: &UnitsConfig) -> Result<RealField> {
        self.validate(grid)?;
        Ok(match &self.static_potential {
            StaticPotential::SquareWell => RealField::zeros(*grid),
            StaticPotential::Harmonic { omega0 } => {
                let k = units.mass * omega0 * omega0;
                RealField::from_fn(*grid, |x| 0.5 * k * x * x)
            }
            StaticPotential::Tabulated { values } => RealField::new(*grid, values.clone())?,
        })
    }

    /// Time profile `g(t)` and its derivative for the dipole perturbation `eps * x * g(t)`.
    fn profile(&self, t: f64) -> (f64, f64, f64) {
        match self.perturbation {
            Perturbation::None => (0.0, 0.0, 0.0),
            Perturbation::DipolePulse { epsilon, t_center, tau } => {
                let u = (t - t_center) / tau;
                let g = (-u * u).exp();
                (epsilon, g, -2.0 * u / tau * g)
            }
            Perturbation::DipolePeriodic { epsilon, omega, t_ramp } => {
                let (s, ds) = if t <= 0.0 {
                    (0.0, 0.0)
                } else if t < t_ramp {
                    (t / t_ramp, 1.0 / t_ramp)
                } else {
                    (1.0, 0.0)
                };
                let (sin, cos) = (omega * t).sin_cos();
                (epsilon, s * sin, ds * sin + s * omega * cos)
            }
        }
    }

    pub fn perturbation_at(&self, grid: &Grid1D, t: f64) -> RealField {
        let (eps, g, _) = self.profile(t);
        RealField::from_fn(*grid, |x| eps * x * g)
    }

    pub fn potential_at(&self, grid: &Grid1D, units: &UnitsConfig, t: f64) -> Result<RealField> {
        let stat = self.static_potential(grid, units)?;
        if !self.is_time_dependent() {
            return Ok(stat);
        }
        stat.zip_map(&self.perturbation_at(grid, t), |a, b| a + b)
    }

    /// Analytic `dV/dt`; the static part contributes nothing.
    pub fn dv_dt_at(&self, grid: &Grid1D, t: f64) -> RealField {
        let (eps, _, dg) = self.profile(t);
        RealField::from_fn(*grid, |x| eps * x * dg)
    }
}

pub fn potential_at(cfg: &FieldConfig, grid: &Grid1D, units: &UnitsConfig, t: f64) -> Result<RealField> {
    cfg.potential_at(grid, units, t)
}

pub fn dv_dt_at(cfg: &FieldConfig, grid: &Grid1D, t: f64) -> RealField {
    cfg.dv_dt_at(grid, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use approx::assert_relative_eq;

    fn units() -> UnitsConfig {
        UnitsConfig::default()
    }

    #[test]
    fn square_well_is_zero() {
        let g = build_grid(0.0, 1.0, 63).unwrap();
        for t in [0.0, 1.5, -3.0] {
            let v = potential_at(&FieldConfig::square_well(), &g, &units(), t).unwrap();
            assert!(v.values().iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn harmonic_value() {
        // dx = 1/8, so x = 0.5 is a grid point.
        let g = build_grid(-1.0, 1.0, 15).unwrap();
        let v = potential_at(&FieldConfig::harmonic(1.0), &g, &units(), 0.0).unwrap();
        let i = g.points().position(|x| (x - 0.5).abs() < 1e-12).unwrap();
        assert_relative_eq!(v.values()[i], 0.125, epsilon = 1e-15);
    }

    #[test]
    fn pulse_peak_is_pure_dipole() {
        let g = build_grid(-2.0, 2.0, 31).unwrap();
        let cfg = FieldConfig::square_well().with_perturbation(Perturbation::DipolePulse {
            epsilon: 0.01,
            t_center: 3.0,
            tau: 0.7,
        });
        let v = potential_at(&cfg, &g, &units(), 3.0).unwrap();
        for (x, val) in g.points().zip(v.values()) {
            assert_eq!(*val, 0.01 * x);
        }
        assert!(dv_dt_at(&cfg, &g, 3.0).values().iter().all(|&d| d == 0.0));
    }

    #[test]
    fn no_perturbation_has_zero_rate() {
        let g = build_grid(-2.0, 2.0, 31).unwrap();
        let d = dv_dt_at(&FieldConfig::harmonic(2.0), &g, 1.3);
        assert!(d.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn tabulated_length_checked() {
        let g = build_grid(0.0, 1.0, 16).unwrap();
        let cfg = FieldConfig {
            static_potential: StaticPotential::Tabulated { values: vec![0.0; 15] },
            perturbation: Perturbation::None,
        };
        assert!(potential_at(&cfg, &g, &units(), 0.0).is_err());
        let ok = FieldConfig {
            static_potential: StaticPotential::Tabulated { values: (0..16).map(f64::from).collect() },
            perturbation: Perturbation::None,
        };
        assert_eq!(potential_at(&ok, &g, &units(), 0.0).unwrap().values()[3], 3.0);
    }

    #[test]
    fn invalid_parameters_rejected() {
        let g = build_grid(0.0, 1.0, 16).unwrap();
        let bad_tau = FieldConfig::square_well().with_perturbation(Perturbation::DipolePulse {
            epsilon: 0.1,
            t_center: 0.0,
            tau: 0.0,
        });
        assert!(bad_tau.validate(&g).is_err());
        let bad_ramp = FieldConfig::square_well().with_perturbation(Perturbation::DipolePeriodic {
            epsilon: 0.1,
            omega: 1.0,
            t_ramp: -1.0,
        });
        assert!(bad_ramp.validate(&g).is_err());
    }

    #[test]
    fn periodic_rate_after_ramp() {
        let g = build_grid(-3.0, 3.0, 41).unwrap();
        let (eps, omega) = (0.02, 1.7);
        let cfg = FieldConfig::harmonic(1.0).with_perturbation(Perturbation::DipolePeriodic {
            epsilon: eps,
            omega,
            t_ramp: 2.0,
        });
        let t = 5.3;
        let d = dv_dt_at(&cfg, &g, t);
        let h = 1e-6;
        let vp = potential_at(&cfg, &g, &units(), t + h).unwrap();
        let vm = potential_at(&cfg, &g, &units(), t - h).unwrap();
        for (i, x) in g.points().enumerate() {
            let exact = eps * x * omega * (omega * t).cos();
            assert_relative_eq!(d.values()[i], exact, epsilon = 1e-15);
            let fd = (vp.values()[i] - vm.values()[i]) / (2.0 * h);
            assert!((fd - exact).abs() < 1e-8, "x = {x}");
        }
    }

    fn fd_gap(cfg: &FieldConfig, g: &Grid1D, t: f64, h: f64) -> f64 {
        let vp = cfg.potential_at(g, &units(), t + h).unwrap();
        let vm = cfg.potential_at(g, &units(), t - h).unwrap();
        let d = cfg.dv_dt_at(g, t);
        (0..g.len())
            .map(|i| ((vp.values()[i] - vm.values()[i]) / (2.0 * h) - d.values()[i]).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn rate_matches_finite_difference() {
        let g = build_grid(-4.0, 4.0, 63).unwrap();
        let pulse = FieldConfig::harmonic(1.0).with_perturbation(Perturbation::DipolePulse {
            epsilon: 0.3,
            t_center: 2.0,
            tau: 0.8,
        });
        let periodic = FieldConfig::square_well().with_perturbation(Perturbation::DipolePeriodic {
            epsilon: 0.3,
            omega: 4.0,
            t_ramp: 1.0,
        });
        for cfg in [&pulse, &periodic] {
            for t in [0.5, 1.7, 2.9] {
                // O(h^2) truncation plus roundoff of order eps_machine / h.
                let big = fd_gap(cfg, &g, t, 1e-3);
                let mid = fd_gap(cfg, &g, t, 1e-4);
                assert!(mid < big / 50.0 || mid < 1e-9, "t = {t}: {big} -> {mid}");
                assert!(fd_gap(cfg, &g, t, 1e-5) < 1e-8);
            }
        }
    }

    #[test]
    fn pulse_decays() {
        let g = build_grid(-12.0, 12.0, 255).unwrap();
        let (eps, tc, tau) = (0.05, 16.0, 2.0);
        let cfg = FieldConfig::harmonic(1.0).with_perturbation(Perturbation::DipolePulse {
            epsilon: eps,
            t_center: tc,
            tau,
        });
        assert_eq!(cfg.settled_after(), tc + 8.0 * tau);
        let v1 = cfg.perturbation_at(&g, cfg.settled_after());
        let xmax = g.points().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(v1.max_abs() < 1e-20 * eps * xmax);
    }
}
