//! Discrete Hamiltonian, its eigenbasis, and the radiation-damping term.
//!
//! The damping term acts multiplicatively, `R psi = beta * (d rho / dt) * psi`.
//! Because `psi^* R psi` is real, `R` drops out of the continuity equation and
//! `d rho / dt = (2 / hbar) Im(psi^* H psi)` holds pointwise; that identity is
//! what makes `R psi` computable from the current state alone.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eigen::SymTridiagonal;
use crate::error::{Error, Result};
use crate::fields::UnitsConfig;
use crate::grid::{ComplexField, Grid1D, RealField};

pub const DEFAULT_K_MAX: usize = 32;

/// `H = -(hbar^2 / 2m) d^2/dx^2 + V` on the three-point stencil.
#[derive(Debug, Clone)]
pub struct HamiltonianMatrix {
    grid: Grid1D,
    diagonal: Vec<f64>,
    off_diagonal: f64,
    t: f64,
    units: UnitsConfig,
}

impl HamiltonianMatrix {
    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn off_diagonal(&self) -> f64 {
        self.off_diagonal
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn units(&self) -> &UnitsConfig {
        &self.units
    }

    /// The potential energy on the diagonal.
    pub fn potential(&self) -> RealField {
        let kinetic = -2.0 * self.off_diagonal;
        RealField::from_vec_unchecked(self.grid, self.diagonal.iter().map(|d| d - kinetic).collect())
    }

    pub fn apply(&self, psi: &ComplexField) -> Result<ComplexField> {
        self.grid.same_as(psi.grid())?;
        Ok(self.apply_unchecked(psi))
    }

    pub(crate) fn apply_unchecked(&self, psi: &ComplexField) -> ComplexField {
        let v = psi.values();
        let n = v.len();
        let o = self.off_diagonal;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut s = v[i] * self.diagonal[i];
            if i > 0 {
                s += v[i - 1] * o;
            }
            if i + 1 < n {
                s += v[i + 1] * o;
            }
            out.push(s);
        }
        ComplexField::from_vec_unchecked(self.grid, out)
    }

    pub(crate) fn as_tridiagonal(&self) -> SymTridiagonal {
        SymTridiagonal::new(self.diagonal.clone(), vec![self.off_diagonal; self.grid.len() - 1])
    }

    /// Upper bound on the spectral radius (Gershgorin).
    pub fn norm_bound(&self) -> f64 {
        self.as_tridiagonal().norm_inf()
    }
}

pub fn assemble_hamiltonian(grid: &Grid1D, v: &RealField, units: &UnitsConfig) -> Result<HamiltonianMatrix> {
    assemble_hamiltonian_at(grid, v, units, 0.0)
}

pub fn assemble_hamiltonian_at(
    grid: &Grid1D,
    v: &RealField,
    units: &UnitsConfig,
    t: f64,
) -> Result<HamiltonianMatrix> {
    grid.same_as(v.grid())?;
    units.validate()?;
    let dx2 = grid.dx() * grid.dx();
    let kinetic = units.hbar * units.hbar / (units.mass * dx2);
    Ok(HamiltonianMatrix {
        grid: *grid,
        diagonal: v.values().iter().map(|vi| kinetic + vi).collect(),
        off_diagonal: -0.5 * kinetic,
        t,
        units: *units,
    })
}

pub fn apply_hamiltonian(h: &HamiltonianMatrix, psi: &ComplexField) -> Result<ComplexField> {
    h.apply(psi)
}

/// Orthonormal real eigenstates of a static Hamiltonian under `<f, g> = dx * sum(f_i g_i)`.
#[derive(Debug, Clone)]
pub struct EigenBasis {
    grid: Grid1D,
    energies: Vec<f64>,
    states: Vec<RealField>,
}

/// Relative gap below which neighbouring levels are treated as one degenerate subspace.
pub const DEGENERACY_TOL: f64 = 1e-9;

impl EigenBasis {
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn states(&self) -> &[RealField] {
        &self.states
    }

    pub fn state(&self, n: usize) -> &RealField {
        &self.states[n]
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    /// `phi_n` as a complex field.
    pub fn complex_state(&self, n: usize) -> ComplexField {
        ComplexField::from_real(&self.states[n])
    }

    /// Index ranges of (near-)degenerate levels; singletons included.
    pub fn degenerate_groups(&self) -> Vec<std::ops::Range<usize>> {
        let mut groups = Vec::new();
        let mut start = 0;
        for i in 1..=self.energies.len() {
            let split = i == self.energies.len() || {
                let (a, b) = (self.energies[i - 1], self.energies[i]);
                (b - a).abs() > DEGENERACY_TOL * a.abs().max(b.abs()).max(1.0)
            };
            if split {
                groups.push(start..i);
                start = i;
            }
        }
        groups
    }

    /// `sum_n C_n phi_n`.
    pub fn synthesize(&self, coefficients: &[Complex64]) -> ComplexField {
        let mut out = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        for (c, phi) in coefficients.iter().zip(&self.states) {
            for (o, p) in out.iter_mut().zip(phi.values()) {
                *o += c * p;
            }
        }
        ComplexField::from_vec_unchecked(self.grid, out)
    }
}

pub fn solve_eigenbasis(h: &HamiltonianMatrix, k_max: usize) -> Result<EigenBasis> {
    let n = h.grid.len();
    if k_max > n {
        return Err(Error::BasisTooLarge {
            requested: k_max,
            available: n,
        });
    }
    let (_, vectors) = h.as_tridiagonal().lowest_eigenpairs(k_max)?;
    let scale = 1.0 / h.grid.dx().sqrt();
    let mut energies = Vec::with_capacity(k_max);
    let mut states = Vec::with_capacity(k_max);
    for v in vectors {
        let peak = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        // Sign convention: the first component above roundoff level is positive.
        let lead = v.iter().find(|x| x.abs() > 1e-8 * peak).copied().unwrap_or(1.0);
        let sign = if lead < 0.0 { -scale } else { scale };
        let phi = RealField::from_vec_unchecked(h.grid, v.into_iter().map(|x| sign * x).collect());
        // Rayleigh quotient: second-order accurate in the vector error.
        let c = ComplexField::from_real(&phi);
        energies.push(c.inner(&h.apply_unchecked(&c)).re);
        states.push(phi);
    }
    Ok(EigenBasis {
        grid: h.grid,
        energies,
        states,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub coefficients: Vec<Complex64>,
    /// `||psi||^2 - sum |C_n|^2`, the weight outside the truncated basis.
    pub residual: f64,
    /// Total population of each degenerate group, in basis order.
    pub subspace_populations: Vec<(std::ops::Range<usize>, f64)>,
}

impl Projection {
    pub fn populations(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c.norm_sqr()).collect()
    }
}

pub fn project_coefficients(psi: &ComplexField, basis: &EigenBasis) -> Result<Projection> {
    basis.grid.same_as(psi.grid())?;
    let dx = basis.grid.dx();
    let coefficients: Vec<Complex64> = basis
        .states
        .iter()
        .map(|phi| {
            let s: Complex64 = phi.values().iter().zip(psi.values()).map(|(p, v)| v * p).sum();
            s * dx
        })
        .collect();
    let captured: f64 = coefficients.iter().map(|c| c.norm_sqr()).sum();
    let subspace_populations = basis
        .degenerate_groups()
        .into_iter()
        .map(|r| {
            let p = coefficients[r.clone()].iter().map(|c| c.norm_sqr()).sum();
            (r, p)
        })
        .collect();
    Ok(Projection {
        coefficients,
        residual: psi.norm_sqr() - captured,
        subspace_populations,
    })
}

/// `d rho / dt = (2 / hbar) Im(psi_i^* (H psi)_i)`.
pub fn drho_dt(psi: &ComplexField, h: &HamiltonianMatrix) -> Result<RealField> {
    let hpsi = h.apply(psi)?;
    Ok(drho_dt_from(psi, &hpsi, h.units.hbar))
}

pub(crate) fn drho_dt_from(psi: &ComplexField, hpsi: &ComplexField, hbar: f64) -> RealField {
    let k = 2.0 / hbar;
    RealField::from_vec_unchecked(
        *psi.grid(),
        psi.values()
            .iter()
            .zip(hpsi.values())
            .map(|(p, hp)| k * (p.conj() * hp).im)
            .collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DampingConfig {
    pub beta: f64,
}

impl DampingConfig {
    pub fn new(beta: f64) -> Result<Self> {
        if !beta.is_finite() {
            return Err(Error::Config(format!("beta must be finite, got {beta}")));
        }
        Ok(Self { beta })
    }

    pub fn is_active(&self) -> bool {
        self.beta != 0.0
    }
}

/// The real multiplier `beta * d rho / dt` that `R` applies to `psi`.
pub fn damping_field(cfg: &DampingConfig, psi: &ComplexField, h: &HamiltonianMatrix) -> Result<RealField> {
    if !cfg.is_active() {
        h.grid.same_as(psi.grid())?;
        return Ok(RealField::zeros(h.grid));
    }
    Ok(drho_dt(psi, h)?.scaled(cfg.beta))
}

pub fn apply_damping(cfg: &DampingConfig, psi: &ComplexField, h: &HamiltonianMatrix) -> Result<ComplexField> {
    Ok(psi.mul_real(&damping_field(cfg, psi, h)?))
}
