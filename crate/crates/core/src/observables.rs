//! Physical diagnostics and the residuals of the balance identities.
//!
//! All expectation values use the discrete inner product of [`ComplexField`].
//! Velocity is `v = -(i hbar / m) D1` with `D1` the central first difference,
//! and forces are expectation values of `(m / i hbar) [v, .]`, so the discrete
//! Ehrenfest relation holds exactly along the continuous-time flow. For the
//! hard-wall box this Lorentz term is the wall force, which a density-weighted
//! `-integral rho dV/dx` cannot see; for smooth potentials the two agree to O(dx^2).
//!
//! Time derivatives of sampled quantities are central differences over one
//! sample interval `h`, so every rate residual is O(h^2).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::UnitsConfig;
use crate::grid::{ComplexField, RealField};
use crate::operator::{drho_dt_from, project_coefficients, DampingConfig, EigenBasis, HamiltonianMatrix};
use crate::propagator::System;

/// Central first difference with zero ghost values.
fn d1(v: &[Complex64], dx: f64) -> Vec<Complex64> {
    let n = v.len();
    let z = Complex64::new(0.0, 0.0);
    (0..n)
        .map(|i| {
            let next = if i + 1 < n { v[i + 1] } else { z };
            let prev = if i > 0 { v[i - 1] } else { z };
            (next - prev) / (2.0 * dx)
        })
        .collect()
}

fn inner(a: &[Complex64], b: &[Complex64], dx: f64) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>() * dx
}

/// `J_i = (hbar / m) Im(psi_i^* (D1 psi)_i)`.
pub fn current_density(psi: &ComplexField, units: &UnitsConfig) -> RealField {
    let dx = psi.grid().dx();
    let dpsi = d1(psi.values(), dx);
    let k = units.hbar / units.mass;
    RealField::from_vec_unchecked(
        *psi.grid(),
        psi.values().iter().zip(&dpsi).map(|(p, d)| k * (p.conj() * d).im).collect(),
    )
}

/// Current on the links between grid points, `J_{i+1/2}`, including both wall links (always zero).
fn staggered_current(psi: &[Complex64], dx: f64, units: &UnitsConfig) -> Vec<f64> {
    let n = psi.len();
    let k = units.hbar / (units.mass * dx);
    let mut j = Vec::with_capacity(n + 1);
    j.push(0.0);
    for i in 0..n - 1 {
        j.push(k * (psi[i].conj() * psi[i + 1]).im);
    }
    j.push(0.0);
    j
}

/// `<v> = <psi, v psi>` with the velocity operator applied directly.
pub fn average_velocity(psi: &ComplexField, units: &UnitsConfig) -> f64 {
    let dx = psi.grid().dx();
    let factor = Complex64::new(0.0, -units.hbar / units.mass);
    let vpsi: Vec<Complex64> = d1(psi.values(), dx).into_iter().map(|d| factor * d).collect();
    inner(psi.values(), &vpsi, dx).re
}

pub fn average_energy(psi: &ComplexField, h: &HamiltonianMatrix) -> Result<f64> {
    let hpsi = h.apply(psi)?;
    Ok(psi.inner(&hpsi).re)
}

/// `P = -(1 / i hbar) <psi, [H, R] psi>`, from two operator applications and two inner products.
pub fn radiation_power(psi: &ComplexField, h: &HamiltonianMatrix, damping: &DampingConfig) -> Result<f64> {
    let hpsi = h.apply(psi)?;
    Ok(power_from(psi, &hpsi, h, damping).0)
}

/// Returns `(P, beta * integral (d rho/dt)^2)`.
fn power_from(psi: &ComplexField, hpsi: &ComplexField, h: &HamiltonianMatrix, damping: &DampingConfig) -> (f64, f64) {
    if !damping.is_active() {
        return (0.0, 0.0);
    }
    let hbar = h.units().hbar;
    let rate = drho_dt_from(psi, hpsi, hbar);
    let r = rate.scaled(damping.beta);
    let rpsi = psi.mul_real(&r);
    let h_rpsi = h.apply_unchecked(&rpsi);
    let r_hpsi = hpsi.mul_real(&r);
    let commutator = psi.inner(&h_rpsi) - psi.inner(&r_hpsi);
    let p = Complex64::new(0.0, 1.0 / hbar) * commutator;
    let scale = hpsi.norm_sqr().sqrt() * r.max_abs() * psi.norm_sqr().sqrt();
    debug_assert!(p.im.abs() <= 1e-12 * scale.max(1.0), "power has imaginary part {}", p.im);
    let formula = damping.beta * rate.values().iter().map(|v| v * v).sum::<f64>() * psi.grid().dx();
    (p.re, formula)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Forces {
    pub lorentz: f64,
    pub recoil: f64,
    /// `-integral rho d(beta drho/dt)/dx`, the reduced form of the recoil commutator.
    pub recoil_reduced: f64,
}

/// `-<psi, [D1, A] psi>` for a Hermitian `A` given as its action on vectors.
fn commutator_force(psi: &[Complex64], a_psi: &[Complex64], a_dpsi: &[Complex64], dx: f64) -> f64 {
    let d_apsi = d1(a_psi, dx);
    let diff: Vec<Complex64> = d_apsi.iter().zip(a_dpsi).map(|(x, y)| x - y).collect();
    -inner(psi, &diff, dx).re
}

/// Lorentz and recoil forces, `(m / i hbar) <[v, H]>` and `(m / i hbar) <[v, R]>`.
pub fn forces(psi: &ComplexField, h: &HamiltonianMatrix, damping: &DampingConfig) -> Result<Forces> {
    let hpsi = h.apply(psi)?;
    Ok(forces_from(psi, &hpsi, h, damping))
}

fn forces_from(psi: &ComplexField, hpsi: &ComplexField, h: &HamiltonianMatrix, damping: &DampingConfig) -> Forces {
    let dx = psi.grid().dx();
    let v = psi.values();
    let dpsi = ComplexField::from_vec_unchecked(*psi.grid(), d1(v, dx));
    let h_dpsi = h.apply_unchecked(&dpsi);
    let lorentz = commutator_force(v, hpsi.values(), h_dpsi.values(), dx);
    if !damping.is_active() {
        return Forces {
            lorentz,
            recoil: 0.0,
            recoil_reduced: 0.0,
        };
    }
    let r = drho_dt_from(psi, hpsi, h.units().hbar).scaled(damping.beta);
    let rpsi = psi.mul_real(&r);
    let r_dpsi = dpsi.mul_real(&r);
    let recoil = commutator_force(v, rpsi.values(), r_dpsi.values(), dx);
    let rv = r.values();
    let n = rv.len();
    let recoil_reduced = -dx
        * (0..n)
            .map(|i| {
                let next = if i + 1 < n { rv[i + 1] } else { 0.0 };
                let prev = if i > 0 { rv[i - 1] } else { 0.0 };
                v[i].norm_sqr() * (next - prev) / (2.0 * dx)
            })
            .sum::<f64>();
    Forces {
        lorentz,
        recoil,
        recoil_reduced,
    }
}

/// `-integral rho dV/dx dx` for a given potential gradient field.
pub fn density_weighted_force(psi: &ComplexField, dv_dx: &RealField) -> f64 {
    -psi.density().zip_map(dv_dx, |a, b| a * b).map(|f| f.integrate()).unwrap_or(f64::NAN)
}

/// Central-difference residuals attached to an interior sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualSample {
    pub continuity: f64,
    pub ehrenfest: f64,
    pub energy_ledger: f64,
    pub condition24: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableRecord {
    pub t: f64,
    pub norm: f64,
    pub energy: f64,
    pub velocity: f64,
    pub power: f64,
    pub populations: Vec<f64>,
    /// Integral of `power` up to `t`.
    pub radiated: f64,
    /// Integral of `work_rate` up to `t`.
    pub external_work: f64,
    pub lorentz_force: f64,
    pub recoil_force: f64,
    pub recoil_force_reduced: f64,
    /// `integral (dV/dt) rho dx`.
    pub work_rate: f64,
    /// `(hbar^2 / 2m) integral |grad psi|^2 dx`.
    pub kinetic: f64,
    /// `integral V (d rho/dt) dx`.
    pub potential_rate: f64,
    /// `beta * integral (d rho/dt)^2 dx`.
    pub power_formula: f64,
    /// Wave-packet estimate `-<F_r> <v>`; logged only.
    pub packet_power: f64,
    pub truncation_residual: f64,
    pub residuals: Option<ResidualSample>,
}

impl ObservableRecord {
    pub fn dominant_population(&self) -> Option<(usize, f64)> {
        self.populations
            .iter()
            .copied()
            .enumerate()
            .fold(None, |best, (i, p)| match best {
                Some((_, bp)) if bp >= p => best,
                _ => Some((i, p)),
            })
    }
}

/// Instantaneous observables at one state. Accumulators and residuals are left at zero.
pub fn snapshot(
    psi: &ComplexField,
    t: f64,
    system: &System,
    damping: &DampingConfig,
    basis: &EigenBasis,
) -> Result<ObservableRecord> {
    let h = system.hamiltonian_at(t);
    let hpsi = h.apply(psi)?;
    let units = system.units();
    let energy = psi.inner(&hpsi).re;
    let (power, power_formula) = power_from(psi, &hpsi, &h, damping);
    let f = forces_from(psi, &hpsi, &h, damping);
    let velocity = average_velocity(psi, units);
    let rho = psi.density();
    let work_rate = if system.fields().is_time_dependent() {
        rho.zip_map(&system.dv_dt_at(t), |a, b| a * b)?.integrate()
    } else {
        0.0
    };
    let rate = drho_dt_from(psi, &hpsi, units.hbar);
    let potential_rate = rate.zip_map(&h.potential(), |a, b| a * b)?.integrate();
    let kinetic = units.hbar * units.hbar / (2.0 * units.mass) * psi.gradient_norm_sqr();
    let projection = project_coefficients(psi, basis)?;
    Ok(ObservableRecord {
        t,
        norm: psi.norm_sqr(),
        energy,
        velocity,
        power,
        populations: projection.populations(),
        radiated: 0.0,
        external_work: 0.0,
        lorentz_force: f.lorentz,
        recoil_force: f.recoil,
        recoil_force_reduced: f.recoil_reduced,
        work_rate,
        kinetic,
        potential_rate,
        power_formula,
        packet_power: -f.recoil * velocity,
        truncation_residual: projection.residual,
        residuals: None,
    })
}

/// Integrated pointwise continuity residual
/// `integral |(rho_next - rho_prev) / 2h + div J| dx` at the middle state.
pub fn continuity_residual(prev: &ComplexField, cur: &ComplexField, next: &ComplexField, h: f64, units: &UnitsConfig) -> f64 {
    let dx = cur.grid().dx();
    let j = staggered_current(cur.values(), dx, units);
    let (p, q) = (prev.values(), next.values());
    dx * (0..cur.values().len())
        .map(|i| {
            let drho = (q[i].norm_sqr() - p[i].norm_sqr()) / (2.0 * h);
            let div = (j[i + 1] - j[i]) / dx;
            (drho + div).abs()
        })
        .sum::<f64>()
}

fn rate_residuals(prev: &ObservableRecord, cur: &ObservableRecord, next: &ObservableRecord, mass: f64) -> (f64, f64, f64) {
    let span = next.t - prev.t;
    let dv = mass * (next.velocity - prev.velocity) / span;
    let de = (next.energy - prev.energy) / span;
    let dk = (next.kinetic - prev.kinetic) / span;
    let ehrenfest = (dv - cur.lorentz_force - cur.recoil_force).abs();
    let ledger = (de - cur.work_rate + cur.power).abs();
    let cond24 = (-cur.power - (cur.potential_rate + dk)).abs();
    (ehrenfest, ledger, cond24)
}

/// Max-over-time residuals of the balance identities.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct IdentityResiduals {
    pub continuity: f64,
    pub ehrenfest: f64,
    pub energy_ledger: f64,
    pub condition24: f64,
    pub power_formula_gap: f64,
}

impl IdentityResiduals {
    pub fn is_finite(&self) -> bool {
        [self.continuity, self.ehrenfest, self.energy_ledger, self.condition24, self.power_formula_gap]
            .iter()
            .all(|v| v.is_finite())
    }

    /// Aggregates the per-sample residuals already attached to `records`.
    pub fn from_records(records: &[ObservableRecord]) -> Self {
        let mut out = Self::default();
        for r in records {
            out.power_formula_gap = out.power_formula_gap.max((r.power - r.power_formula).abs());
            if let Some(s) = r.residuals {
                out.continuity = out.continuity.max(s.continuity);
                out.ehrenfest = out.ehrenfest.max(s.ehrenfest);
                out.energy_ledger = out.energy_ledger.max(s.energy_ledger);
                out.condition24 = out.condition24.max(s.condition24);
            }
        }
        out
    }
}

/// Recomputes all residuals from a record series and the states at the same sample times.
pub fn identity_residuals(records: &[ObservableRecord], states: &[ComplexField], units: &UnitsConfig) -> Result<IdentityResiduals> {
    if records.len() < 3 || states.len() < 3 {
        return Err(Error::InsufficientSamples {
            needed: 3,
            found: records.len().min(states.len()),
        });
    }
    if records.len() != states.len() {
        return Err(Error::Config(format!(
            "{} records but {} states",
            records.len(),
            states.len()
        )));
    }
    let mut out = IdentityResiduals::default();
    for r in records {
        out.power_formula_gap = out.power_formula_gap.max((r.power - r.power_formula).abs());
    }
    for k in 1..records.len() - 1 {
        let h = 0.5 * (records[k + 1].t - records[k - 1].t);
        let c = continuity_residual(&states[k - 1], &states[k], &states[k + 1], h, units);
        let (e, l, c24) = rate_residuals(&records[k - 1], &records[k], &records[k + 1], units.mass);
        out.continuity = out.continuity.max(c);
        out.ehrenfest = out.ehrenfest.max(e);
        out.energy_ledger = out.energy_ledger.max(l);
        out.condition24 = out.condition24.max(c24);
    }
    Ok(out)
}

/// Streaming sampler used by the propagator: accumulates the two time
/// integrals and attaches residuals to each sample once its successor arrives.
pub struct Observer<'a> {
    system: &'a System,
    damping: &'a DampingConfig,
    basis: &'a EigenBasis,
    records: Vec<ObservableRecord>,
    prev_state: Option<ComplexField>,
    cur_state: Option<ComplexField>,
}

impl<'a> Observer<'a> {
    pub fn new(system: &'a System, damping: &'a DampingConfig, basis: &'a EigenBasis) -> Self {
        Self {
            system,
            damping,
            basis,
            records: Vec::new(),
            prev_state: None,
            cur_state: None,
        }
    }

    pub fn records(&self) -> &[ObservableRecord] {
        &self.records
    }

    /// Adds a sample, integrating power and work rate by the trapezoid rule over samples.
    pub fn push(&mut self, psi: &ComplexField, t: f64) {
        self.push_inner(psi, t, None);
    }

    /// Adds a sample whose radiated energy and external work were accumulated by the stepper.
    pub fn push_totals(&mut self, psi: &ComplexField, t: f64, radiated: f64, external_work: f64) {
        self.push_inner(psi, t, Some((radiated, external_work)));
    }

    fn push_inner(&mut self, psi: &ComplexField, t: f64, totals: Option<(f64, f64)>) {
        let mut rec = snapshot(psi, t, self.system, self.damping, self.basis)
            .expect("state lives on the system grid");
        match (totals, self.records.last()) {
            (Some((radiated, work)), _) => {
                rec.radiated = radiated;
                rec.external_work = work;
            }
            (None, Some(last)) => {
                let dt = t - last.t;
                rec.radiated = last.radiated + 0.5 * dt * (last.power + rec.power);
                rec.external_work = last.external_work + 0.5 * dt * (last.work_rate + rec.work_rate);
            }
            (None, None) => {}
        }
        let n = self.records.len();
        if n >= 2 {
            if let (Some(prev), Some(cur)) = (&self.prev_state, &self.cur_state) {
                let h = 0.5 * (t - self.records[n - 2].t);
                let continuity = continuity_residual(prev, cur, psi, h, self.system.units());
                let (ehrenfest, energy_ledger, condition24) =
                    rate_residuals(&self.records[n - 2], &self.records[n - 1], &rec, self.system.units().mass);
                self.records[n - 1].residuals = Some(ResidualSample {
                    continuity,
                    ehrenfest,
                    energy_ledger,
                    condition24,
                });
            }
        }
        self.records.push(rec);
        self.prev_state = self.cur_state.take();
        self.cur_state = Some(psi.clone());
    }

    pub fn finish(self) -> Vec<ObservableRecord> {
        self.records
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::FieldConfig;
    use crate::grid::build_grid;
    use crate::operator::solve_eigenbasis;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn harmonic() -> System {
        System::new(build_grid(-12.0, 12.0, 511).unwrap(), UnitsConfig::default(), FieldConfig::harmonic(1.0)).unwrap()
    }

    fn square() -> System {
        System::new(build_grid(0.0, 1.0, 511).unwrap(), UnitsConfig::default(), FieldConfig::square_well()).unwrap()
    }

    fn packet(sys: &System, x0: f64, k0: f64) -> ComplexField {
        ComplexField::from_fn(*sys.grid(), |x| Complex64::from_polar((-(x - x0).powi(2)).exp(), k0 * x)).normalized()
    }

    #[test]
    fn real_and_stationary_states_carry_no_current() {
        let sys = harmonic();
        let real = ComplexField::from_fn(*sys.grid(), |x| Complex64::new((-x * x).exp() * (1.0 + x), 0.0));
        assert!(current_density(&real, sys.units()).values().iter().all(|&j| j == 0.0));
        let basis = solve_eigenbasis(&sys.static_hamiltonian(), 3).unwrap();
        let phased = basis.complex_state(2).scaled(Complex64::from_polar(1.0, -2.5 * 1.7));
        assert!(current_density(&phased, sys.units()).max_abs() < 1e-14);
    }

    #[test]
    fn current_integrates_to_velocity() {
        let sys = harmonic();
        let psi = packet(&sys, 0.7, 1.3);
        let j = current_density(&psi, sys.units()).integrate();
        let v = average_velocity(&psi, sys.units());
        assert!((j - v).abs() < 1e-10);
        // Central differences see the plane wave at the lattice wavenumber sin(k dx)/dx.
        let dx = sys.grid().dx();
        assert!((v - (1.3 * dx).sin() / dx).abs() < 2.0 * dx * dx, "{v}");
    }

    #[test]
    fn energies_of_eigenstates_and_mixtures() {
        let sys = harmonic();
        let h = sys.static_hamiltonian();
        let basis = solve_eigenbasis(&h, 4).unwrap();
        for n in 0..4 {
            assert!((average_energy(&basis.complex_state(n), &h).unwrap() - basis.energies()[n]).abs() < 1e-10);
        }
        let psi = basis.synthesize(&[Complex64::new(FRAC_1_SQRT_2, 0.0), Complex64::new(0.0, FRAC_1_SQRT_2)]);
        let e = average_energy(&psi, &h).unwrap();
        assert!((e - 0.5 * (basis.energies()[0] + basis.energies()[1])).abs() < 1e-10);
        let e_packet = average_energy(&packet(&sys, 2.0, -0.5), &h).unwrap();
        assert!(e_packet >= basis.energies()[0] - 1e-8);
    }

    #[test]
    fn power_vanishes_on_eigenstates_and_without_damping() {
        let sys = square();
        let h = sys.static_hamiltonian();
        let basis = solve_eigenbasis(&h, 3).unwrap();
        let d = DampingConfig::new(0.05).unwrap();
        for n in 0..3 {
            assert!(radiation_power(&basis.complex_state(n), &h, &d).unwrap().abs() < 1e-10);
        }
        let psi = basis.synthesize(&[Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)]);
        assert_eq!(radiation_power(&psi, &h, &DampingConfig::default()).unwrap(), 0.0);
    }

    #[test]
    fn power_identity_and_sign() {
        let sys = harmonic();
        let h = sys.static_hamiltonian();
        for (x0, k0) in [(0.5, 0.3), (-1.5, 2.0), (2.5, -1.0)] {
            let psi = packet(&sys, x0, k0);
            let hpsi = h.apply(&psi).unwrap();
            for beta in [0.01, -0.01] {
                let d = DampingConfig::new(beta).unwrap();
                let (p, formula) = power_from(&psi, &hpsi, &h, &d);
                assert!((p - formula).abs() <= 1e-8 * formula.abs().max(1e-300), "{p} vs {formula}");
                assert_eq!(p > 0.0, beta > 0.0);
            }
        }
    }

    #[test]
    fn recoil_is_zero_on_eigenstates() {
        let sys = harmonic();
        let h = sys.static_hamiltonian();
        let basis = solve_eigenbasis(&h, 3).unwrap();
        for n in 0..3 {
            let f = forces(&basis.complex_state(n), &h, &DampingConfig::new(0.5).unwrap()).unwrap();
            assert!(f.recoil.abs() < 1e-10);
        }
    }

    #[test]
    fn recoil_forms_agree() {
        let sys = harmonic();
        let h = sys.static_hamiltonian();
        let psi = packet(&sys, 1.0, 0.8);
        let f = forces(&psi, &h, &DampingConfig::new(0.2).unwrap()).unwrap();
        assert!(f.recoil.abs() > 1e-4);
        assert!((f.recoil - f.recoil_reduced).abs() < 1e-2 * f.recoil.abs());
    }

    #[test]
    fn lorentz_zero_inside_flat_well_and_smooth_potential_matches_density_form() {
        // A packet well away from the walls feels no force in the flat box.
        let sys = System::new(build_grid(-10.0, 10.0, 511).unwrap(), UnitsConfig::default(), FieldConfig::square_well()).unwrap();
        let psi = packet(&sys, 0.0, 1.0);
        let f = forces(&psi, &sys.static_hamiltonian(), &DampingConfig::default()).unwrap();
        assert!(f.lorentz.abs() < 1e-10, "{}", f.lorentz);

        let osc = harmonic();
        let psi = packet(&osc, 1.2, 0.0);
        let f = forces(&psi, &osc.static_hamiltonian(), &DampingConfig::default()).unwrap();
        let grad = RealField::from_fn(*osc.grid(), |x| x);
        let dens = density_weighted_force(&psi, &grad);
        let dx = osc.grid().dx();
        assert!((f.lorentz - dens).abs() < dx * dx, "{} vs {}", f.lorentz, dens);
        assert!((dens + 1.2).abs() < 1e-6);
    }

    #[test]
    fn box_wall_force_shows_up_in_lorentz_term() {
        let sys = square();
        let basis = solve_eigenbasis(&sys.static_hamiltonian(), 2).unwrap();
        let psi = basis.synthesize(&[Complex64::new(FRAC_1_SQRT_2, 0.0), Complex64::new(FRAC_1_SQRT_2, 0.0)]);
        let f = forces(&psi, &sys.static_hamiltonian(), &DampingConfig::default()).unwrap();
        // Continuum wall force (hbar^2 / 2m)(|psi'(0)|^2 - |psi'(L)|^2) with psi'(0) = 3 pi, psi'(1) = pi.
        let expect = 0.5 * (9.0 - 1.0) * PI * PI;
        assert!((f.lorentz - expect).abs() < 1e-3 * expect, "{} vs {}", f.lorentz, expect);
    }

    #[test]
    fn identity_residuals_need_three_samples() {
        let sys = square();
        let basis = solve_eigenbasis(&sys.static_hamiltonian(), 2).unwrap();
        let psi = basis.complex_state(0);
        let rec = snapshot(&psi, 0.0, &sys, &DampingConfig::default(), &basis).unwrap();
        let out = identity_residuals(&[rec.clone(), rec], &[psi.clone(), psi], sys.units());
        assert!(matches!(out, Err(Error::InsufficientSamples { needed: 3, found: 2 })));
    }
}
