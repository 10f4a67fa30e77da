//! Trapezoidal (Crank-Nicolson) propagation of the linear and damped equations.
//!
//! Each step solves
//!
//! ```text
//! (I + i dt/(2 hbar) (H_mid + r)) psi_new = (I - i dt/(2 hbar) (H_mid + r)) psi_old
//! ```
//!
//! where `H_mid` is assembled at `t + dt/2` and `r = beta * d rho/dt` is the
//! real damping multiplier evaluated at `(psi_old + psi_new) / 2`. The
//! unknown `psi_new` inside `r` is resolved by fixed-point iteration. Since
//! `H_mid + r` is real symmetric for every iterate, each inner solve is a
//! Cayley transform and the norm is preserved up to roundoff whether or not
//! the iteration has fully converged.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{FieldConfig, UnitsConfig};
use crate::grid::{ComplexField, Grid1D, RealField};
use crate::observables::{ObservableRecord, Observer};
use crate::operator::{assemble_hamiltonian_at, DampingConfig, EigenBasis, HamiltonianMatrix};

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_FIXED_POINT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_FIXED_POINT_ITERS: usize = 50;
/// Deepest dt-halving attempted when the fixed point fails to converge.
pub const MAX_HALVINGS: u32 = 4;

/// Grid, units, and external field bundled with the cached static potential.
#[derive(Debug, Clone)]
pub struct System {
    grid: Grid1D,
    units: UnitsConfig,
    fields: FieldConfig,
    static_potential: RealField,
}

impl System {
    pub fn new(grid: Grid1D, units: UnitsConfig, fields: FieldConfig) -> Result<Self> {
        units.validate()?;
        let static_potential = fields.static_potential(&grid, &units)?;
        Ok(Self {
            grid,
            units,
            fields,
            static_potential,
        })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn units(&self) -> &UnitsConfig {
        &self.units
    }

    pub fn fields(&self) -> &FieldConfig {
        &self.fields
    }

    pub fn potential_at(&self, t: f64) -> RealField {
        if !self.fields.is_time_dependent() {
            return self.static_potential.clone();
        }
        let v1 = self.fields.perturbation_at(&self.grid, t);
        RealField::from_vec_unchecked(
            self.grid,
            self.static_potential
                .values()
                .iter()
                .zip(v1.values())
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn dv_dt_at(&self, t: f64) -> RealField {
        self.fields.dv_dt_at(&self.grid, t)
    }

    pub fn hamiltonian_at(&self, t: f64) -> HamiltonianMatrix {
        assemble_hamiltonian_at(&self.grid, &self.potential_at(t), &self.units, t)
            .expect("potential built on this grid")
    }

    pub fn static_hamiltonian(&self) -> HamiltonianMatrix {
        assemble_hamiltonian_at(&self.grid, &self.static_potential, &self.units, 0.0)
            .expect("potential built on this grid")
    }
}

#[derive(Debug, Clone)]
pub struct WaveState {
    pub psi: ComplexField,
    pub t: f64,
}

impl WaveState {
    pub fn new(psi: ComplexField, t: f64) -> Self {
        Self { psi, t }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepperConfig {
    pub dt: f64,
    pub fixed_point_tol: f64,
    pub max_fixed_point_iters: usize,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            fixed_point_tol: DEFAULT_FIXED_POINT_TOL,
            max_fixed_point_iters: DEFAULT_MAX_FIXED_POINT_ITERS,
        }
    }
}

impl StepperConfig {
    pub fn with_dt(dt: f64) -> Self {
        Self {
            dt,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidStepper(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.fixed_point_tol.is_finite() && self.fixed_point_tol > 0.0) {
            return Err(Error::InvalidStepper(format!(
                "fixed_point_tol must be positive, got {}",
                self.fixed_point_tol
            )));
        }
        if self.max_fixed_point_iters == 0 {
            return Err(Error::InvalidStepper("max_fixed_point_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub iterations_used: usize,
    pub norm_drift: f64,
    pub converged: bool,
    /// Energy removed by the damping term: `dt * dx * sum r_i (d rho/dt)_i` at the midpoint state.
    pub radiated: f64,
    /// Energy added by the time-dependent potential over the step.
    pub work: f64,
}

/// Reusable buffers for the inner tridiagonal solves.
#[derive(Debug, Clone)]
pub struct Workspace {
    hpsi_old: Vec<Complex64>,
    mid: Vec<Complex64>,
    hmid: Vec<Complex64>,
    r: Vec<f64>,
    rhs: Vec<Complex64>,
    cprime: Vec<Complex64>,
    cand: Vec<Complex64>,
}

impl Workspace {
    pub fn new(n: usize) -> Self {
        let z = Complex64::new(0.0, 0.0);
        Self {
            hpsi_old: vec![z; n],
            mid: vec![z; n],
            hmid: vec![z; n],
            r: vec![0.0; n],
            rhs: vec![z; n],
            cprime: vec![z; n],
            cand: vec![z; n],
        }
    }
}

fn tridiag_apply(diag: &[f64], off: f64, x: &[Complex64], out: &mut [Complex64]) {
    let n = x.len();
    for i in 0..n {
        let mut s = x[i] * diag[i];
        if i > 0 {
            s += x[i - 1] * off;
        }
        if i + 1 < n {
            s += x[i + 1] * off;
        }
        out[i] = s;
    }
}

/// Solves `(I + i c (H + r)) x = rhs` in place of `out` by the Thomas algorithm.
///
/// The matrix has a positive definite Hermitian part (the identity), so
/// elimination without pivoting cannot break down.
fn cayley_solve(diag: &[f64], off: f64, r: &[f64], c: f64, rhs: &[Complex64], cprime: &mut [Complex64], out: &mut [Complex64]) {
    let n = rhs.len();
    let a = Complex64::new(0.0, c * off);
    let b0 = Complex64::new(1.0, c * (diag[0] + r[0]));
    cprime[0] = a / b0;
    out[0] = rhs[0] / b0;
    for i in 1..n {
        let b = Complex64::new(1.0, c * (diag[i] + r[i]));
        let denom = b - a * cprime[i - 1];
        cprime[i] = a / denom;
        out[i] = (rhs[i] - a * out[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        let next = out[i + 1];
        out[i] -= cprime[i] * next;
    }
}

fn sq_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// One trapezoidal step of length `dt` from `state`.
pub fn step_with(
    state: &WaveState,
    system: &System,
    damping: &DampingConfig,
    stepper: &StepperConfig,
    dt: f64,
    ws: &mut Workspace,
) -> Result<(WaveState, StepReport)> {
    let grid = system.grid;
    grid.same_as(state.psi.grid())?;
    let hbar = system.units.hbar;
    let h = system.hamiltonian_at(state.t + 0.5 * dt);
    let diag = h.diagonal();
    let off = h.off_diagonal();
    let c = dt / (2.0 * hbar);
    let old = state.psi.values();
    let n = old.len();
    tridiag_apply(diag, off, old, &mut ws.hpsi_old);

    let mut new: Vec<Complex64> = old.to_vec();
    let mut iterations = 0;
    let mut converged = false;
    let mut last_change = f64::INFINITY;

    while iterations < stepper.max_fixed_point_iters {
        iterations += 1;
        if damping.is_active() {
            for i in 0..n {
                ws.mid[i] = 0.5 * (old[i] + new[i]);
            }
            tridiag_apply(diag, off, &ws.mid, &mut ws.hmid);
            let k = damping.beta * 2.0 / hbar;
            for i in 0..n {
                ws.r[i] = k * (ws.mid[i].conj() * ws.hmid[i]).im;
            }
        } else {
            ws.r.iter_mut().for_each(|x| *x = 0.0);
        }
        let minus_ic = Complex64::new(0.0, -c);
        for i in 0..n {
            ws.rhs[i] = old[i] + minus_ic * (ws.hpsi_old[i] + ws.r[i] * old[i]);
        }
        cayley_solve(diag, off, &ws.r, c, &ws.rhs, &mut ws.cprime, &mut ws.cand);
        if !damping.is_active() {
            std::mem::swap(&mut new, &mut ws.cand);
            converged = true;
            last_change = 0.0;
            break;
        }
        let mut diff = 0.0;
        for i in 0..n {
            diff += (ws.cand[i] - new[i]).norm_sqr();
        }
        last_change = (diff / sq_norm(&ws.cand)).sqrt();
        std::mem::swap(&mut new, &mut ws.cand);
        if last_change < stepper.fixed_point_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::FixedPointDiverged {
            iterations,
            last_change,
        });
    }
    let dx = grid.dx();
    let norm_drift = (dx * sq_norm(&new) - dx * sq_norm(old)).abs();
    // With H and r frozen over the step, the energy change splits exactly into
    // these two terms, so the accumulated ledger closes to roundoff.
    let mut radiated = 0.0;
    if damping.is_active() {
        for i in 0..n {
            ws.mid[i] = 0.5 * (old[i] + new[i]);
        }
        tridiag_apply(diag, off, &ws.mid, &mut ws.hmid);
        let rate: f64 = (0..n).map(|i| ws.r[i] * (ws.mid[i].conj() * ws.hmid[i]).im).sum();
        radiated = dt * dx * 2.0 / hbar * rate;
    }
    let mut work = 0.0;
    if system.fields.is_time_dependent() {
        let v_old = system.fields.perturbation_at(&grid, state.t);
        let v_mid = system.fields.perturbation_at(&grid, state.t + 0.5 * dt);
        let v_new = system.fields.perturbation_at(&grid, state.t + dt);
        let (vo, vm, vn) = (v_old.values(), v_mid.values(), v_new.values());
        work = dx
            * (0..n)
                .map(|i| new[i].norm_sqr() * (vn[i] - vm[i]) + old[i].norm_sqr() * (vm[i] - vo[i]))
                .sum::<f64>();
    }
    Ok((
        WaveState::new(ComplexField::from_vec_unchecked(grid, new), state.t + dt),
        StepReport {
            iterations_used: iterations,
            norm_drift,
            converged,
            radiated,
            work,
        },
    ))
}

/// One step of `stepper.dt`. On fixed-point failure the error is returned; see [`evolve`] for retries.
pub fn step(
    state: &WaveState,
    system: &System,
    damping: &DampingConfig,
    stepper: &StepperConfig,
) -> Result<(WaveState, StepReport)> {
    stepper.validate()?;
    let mut ws = Workspace::new(system.grid.len());
    step_with(state, system, damping, stepper, stepper.dt, &mut ws)
}

/// Advances by `dt`, splitting into halves (recursively) when the fixed point fails.
fn robust_step(
    state: &WaveState,
    system: &System,
    damping: &DampingConfig,
    stepper: &StepperConfig,
    dt: f64,
    depth: u32,
    ws: &mut Workspace,
) -> Result<(WaveState, StepReport, usize)> {
    match step_with(state, system, damping, stepper, dt, ws) {
        Ok((s, r)) => Ok((s, r, 0)),
        Err(Error::FixedPointDiverged { .. }) if depth < MAX_HALVINGS => {
            let (half, r1, h1) = robust_step(state, system, damping, stepper, 0.5 * dt, depth + 1, ws)?;
            let (mut full, r2, h2) = robust_step(&half, system, damping, stepper, 0.5 * dt, depth + 1, ws)?;
            // Land exactly on the nominal time grid.
            full.t = state.t + dt;
            Ok((
                full,
                StepReport {
                    iterations_used: r1.iterations_used.max(r2.iterations_used),
                    norm_drift: r1.norm_drift + r2.norm_drift,
                    converged: true,
                    radiated: r1.radiated + r2.radiated,
                    work: r1.work + r2.work,
                },
                1 + h1 + h2,
            ))
        }
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone)]
pub struct Evolution {
    pub records: Vec<ObservableRecord>,
    pub final_state: WaveState,
    pub total_steps: usize,
    pub max_iterations: usize,
    pub halved_steps: usize,
    /// Set when a step failed and the run was cut short.
    pub failure: Option<String>,
    pub stopped_early: bool,
}

/// Number of steps of size `dt` covering `[t0, t_final]`.
pub fn step_count(t0: f64, t_final: f64, dt: f64) -> usize {
    ((t_final - t0) / dt).round().max(0.0) as usize
}

/// Evolves from `initial` to `t_final`, sampling observables every `stride` steps.
pub fn evolve(
    initial: &WaveState,
    t_final: f64,
    system: &System,
    damping: &DampingConfig,
    stepper: &StepperConfig,
    stride: usize,
    basis: &EigenBasis,
) -> Result<Evolution> {
    evolve_until(initial, t_final, system, damping, stepper, stride, basis, |_| false)
}

/// As [`evolve`], but stops after any sample for which `stop` returns true.
#[allow(clippy::too_many_arguments)]
pub fn evolve_until(
    initial: &WaveState,
    t_final: f64,
    system: &System,
    damping: &DampingConfig,
    stepper: &StepperConfig,
    stride: usize,
    basis: &EigenBasis,
    mut stop: impl FnMut(&[ObservableRecord]) -> bool,
) -> Result<Evolution> {
    stepper.validate()?;
    if stride == 0 {
        return Err(Error::InvalidStepper("observer stride must be at least 1".into()));
    }
    let t0 = initial.t;
    if !(t_final > t0) {
        return Err(Error::InvalidStepper(format!("t_final ({t_final}) must exceed t0 ({t0})")));
    }
    system.grid.same_as(initial.psi.grid())?;
    let n_steps = step_count(t0, t_final, stepper.dt);
    let mut observer = Observer::new(system, damping, basis);
    observer.push_totals(&initial.psi, t0, 0.0, 0.0);

    let mut ws = Workspace::new(system.grid.len());
    let mut state = initial.clone();
    let mut max_iterations = 0;
    let mut halved_steps = 0;
    let mut failure = None;
    let mut stopped_early = false;
    let mut taken = 0;
    let (mut radiated, mut work) = (0.0, 0.0);
    for k in 1..=n_steps {
        match robust_step(&state, system, damping, stepper, stepper.dt, 0, &mut ws) {
            Ok((mut next, report, halvings)) => {
                // Times are k*dt from the start, never accumulated.
                next.t = t0 + k as f64 * stepper.dt;
                halved_steps += halvings;
                max_iterations = max_iterations.max(report.iterations_used);
                radiated += report.radiated;
                work += report.work;
                state = next;
                taken = k;
            }
            Err(e) => {
                failure = Some(format!("step {k} at t = {}: {e}", state.t));
                break;
            }
        }
        if k % stride == 0 {
            observer.push_totals(&state.psi, state.t, radiated, work);
            if stop(observer.records()) {
                stopped_early = true;
                break;
            }
        }
    }
    Ok(Evolution {
        records: observer.finish(),
        final_state: state,
        total_steps: taken,
        max_iterations,
        halved_steps,
        failure,
        stopped_early,
    })
}
