//! Running a configured scenario end to end.

use std::time::{Duration, Instant};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ConvergenceSpec, InitialSpec, ScenarioConfig};
use crate::error::{Error, Result};
use crate::grid::ComplexField;
use crate::observables::{IdentityResiduals, ObservableRecord};
use crate::operator::{project_coefficients, solve_eigenbasis, EigenBasis};
use crate::propagator::{evolve_until, System, WaveState};

/// Largest initial-state weight allowed outside the truncated basis.
pub const TRUNCATION_TOL: f64 = 1e-6;
/// Balance closure at a detected eigenstate, in units of `E_1 - E_0`.
pub const BALANCE_TOL: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct RunResult {
    pub config: ScenarioConfig,
    pub records: Vec<ObservableRecord>,
    pub final_state: WaveState,
    pub energies: Vec<f64>,
    pub initial_energy: f64,
    pub final_eigenstate: Option<usize>,
    pub radiated_total: f64,
    pub work_total: f64,
    /// `radiated - (E(t0) - E_k) - work` at the detected `k`; otherwise
    /// `radiated - (E(t0) - E(t)) - work` at the last sample.
    pub balance_residual: f64,
    /// Largest `|E(t) - E(t0) - work(t) + radiated(t)|` over the samples.
    pub ledger_closure: f64,
    pub converged: bool,
    /// False when convergence was detected but the balance does not close.
    pub consistent: bool,
    pub residuals: IdentityResiduals,
    pub total_steps: usize,
    pub max_iterations: usize,
    pub halved_steps: usize,
    pub failure: Option<String>,
    pub wall_time: Duration,
}

impl RunResult {
    /// `E_1 - E_0` of the static well, the scale of the balance tolerances.
    pub fn level_gap(&self) -> f64 {
        level_gap(&self.energies)
    }
}

fn level_gap(energies: &[f64]) -> f64 {
    match energies {
        [e0, e1, ..] => e1 - e0,
        _ => 1.0,
    }
}

pub fn initial_state(cfg: &ScenarioConfig, basis: &EigenBasis) -> Result<ComplexField> {
    let grid = *basis.grid();
    let psi = match (&cfg.initial, cfg.initial.coefficients()) {
        (_, Some(terms)) => {
            let mut c = vec![Complex64::new(0.0, 0.0); basis.len()];
            for (n, cn) in terms {
                c[n] = cn;
            }
            basis.synthesize(&c)
        }
        (InitialSpec::Gaussian { center, width, momentum }, None) => ComplexField::from_fn(grid, |x| {
            let u = (x - center) / width;
            Complex64::from_polar((-0.25 * u * u).exp(), momentum * x)
        })
        .normalized(),
        _ => unreachable!("only gaussians lack coefficients"),
    };
    let projection = project_coefficients(&psi, basis)?;
    if projection.residual > TRUNCATION_TOL {
        return Err(Error::BasisTruncation {
            residual: projection.residual,
        });
    }
    Ok(psi)
}

/// Index `k` if the trailing `hold` window has `population_k >= population`
/// and `power < power` at every sample; the window must fit in the series.
pub fn detect_final_eigenstate(series: &[ObservableRecord], spec: &ConvergenceSpec) -> Option<usize> {
    let last = series.last()?;
    let start = series.first()?.t;
    if last.t - start < spec.hold {
        return None;
    }
    let (k, _) = last.dominant_population()?;
    let t_from = last.t - spec.hold;
    let ok = series
        .iter()
        .rev()
        .take_while(|r| r.t >= t_from - 1e-9 * spec.hold.max(1.0))
        .all(|r| r.populations.get(k).is_some_and(|&p| p >= spec.population) && r.power.abs() < spec.power);
    ok.then_some(k)
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunResult> {
    cfg.validate()?;
    let started = Instant::now();
    let grid = cfg.build_grid()?;
    let system = System::new(grid, cfg.units(), cfg.fields())?;
    let damping = cfg.damping()?;
    let stepper = cfg.stepper();
    let basis = solve_eigenbasis(&system.static_hamiltonian(), cfg.basis.k_max)?;
    let psi = initial_state(cfg, &basis)?;
    let initial = WaveState::new(psi, cfg.time.t0);
    let conv = cfg.convergence;
    // Only samples taken once the drive has died out count toward detection.
    let settled = cfg.fields().settled_after();
    let detect = |records: &[ObservableRecord]| {
        let from = records.partition_point(|r| r.t < settled);
        detect_final_eigenstate(&records[from..], &conv)
    };
    let evolution = evolve_until(
        &initial,
        cfg.time.t_final,
        &system,
        &damping,
        &stepper,
        cfg.output.stride,
        &basis,
        |records| conv.stop_early && detect(records).is_some(),
    )?;
    let records = evolution.records;
    let energies = basis.energies().to_vec();
    let first = records.first().expect("initial sample is always recorded");
    let last = records.last().expect("initial sample is always recorded");
    let initial_energy = first.energy;
    let final_eigenstate = detect(&records);
    let radiated_total = last.radiated;
    let work_total = last.external_work;
    let gap = level_gap(&energies);
    let (balance_residual, consistent) = match final_eigenstate {
        Some(k) => {
            let r = radiated_total - (initial_energy - energies[k]) - work_total;
            (r, r.abs() <= BALANCE_TOL * gap)
        }
        None => (radiated_total - (initial_energy - last.energy) - work_total, true),
    };
    let ledger_closure = records
        .iter()
        .map(|r| (r.energy - initial_energy - r.external_work + r.radiated).abs())
        .fold(0.0, f64::max);
    let residuals = IdentityResiduals::from_records(&records);
    Ok(RunResult {
        config: cfg.clone(),
        final_state: evolution.final_state,
        energies,
        initial_energy,
        final_eigenstate,
        radiated_total,
        work_total,
        balance_residual,
        ledger_closure,
        converged: final_eigenstate.is_some(),
        consistent,
        residuals,
        total_steps: evolution.total_steps,
        max_iterations: evolution.max_iterations,
        halved_steps: evolution.halved_steps,
        failure: evolution.failure,
        wall_time: started.elapsed(),
        records,
    })
}

/// Runs independent scenarios concurrently; results keep the input order.
pub fn run_batch(cfgs: &[ScenarioConfig]) -> Vec<Result<RunResult>> {
    cfgs.par_iter().map(run_scenario).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateReport {
    pub beta: f64,
    pub min_power: f64,
    /// Some sample had `P < 0`: energy pumped in rather than radiated.
    pub negative_power: bool,
    pub converged: bool,
    pub final_eigenstate: Option<usize>,
    /// First time after which the dominant population stays above the threshold.
    pub concentration_time: Option<f64>,
    pub ledger_closure: f64,
    pub balance_residual: f64,
    pub t_end: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub candidates: Vec<CandidateReport>,
    /// Smallest positive candidate that converged consistently within the budget.
    pub recommended: Option<f64>,
}

fn concentration_time(records: &[ObservableRecord], threshold: f64) -> Option<f64> {
    let (k, p) = records.last()?.dominant_population()?;
    if p < threshold {
        return None;
    }
    let below = records.iter().rposition(|r| r.populations[k] < threshold);
    match below {
        None => records.first().map(|r| r.t),
        Some(i) => records.get(i + 1).map(|r| r.t),
    }
}

/// Runs `base` once per candidate `beta` (stopping at convergence) and reports each.
pub fn calibrate_beta(base: &ScenarioConfig, betas: &[f64]) -> Result<CalibrationReport> {
    if betas.is_empty() {
        return Err(Error::Config("calibration needs at least one beta candidate".into()));
    }
    let candidates: Vec<CandidateReport> = betas
        .par_iter()
        .map(|&beta| {
            let mut cfg = base.clone();
            cfg.beta = beta;
            cfg.convergence.stop_early = true;
            match run_scenario(&cfg) {
                Ok(r) => {
                    let min_power = r.records.iter().map(|s| s.power).fold(f64::INFINITY, f64::min);
                    CandidateReport {
                        beta,
                        min_power,
                        negative_power: min_power < 0.0,
                        converged: r.converged,
                        final_eigenstate: r.final_eigenstate,
                        concentration_time: concentration_time(&r.records, cfg.convergence.population),
                        ledger_closure: r.ledger_closure,
                        balance_residual: r.balance_residual,
                        t_end: r.records.last().map_or(cfg.time.t0, |s| s.t),
                        error: r.failure.clone().or_else(|| (!r.consistent).then(|| "energy balance does not close".into())),
                    }
                }
                Err(e) => CandidateReport {
                    beta,
                    min_power: f64::NAN,
                    negative_power: false,
                    converged: false,
                    final_eigenstate: None,
                    concentration_time: None,
                    ledger_closure: f64::NAN,
                    balance_residual: f64::NAN,
                    t_end: cfg.time.t0,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let recommended = candidates
        .iter()
        .filter(|c| c.beta > 0.0 && c.converged && c.error.is_none())
        .map(|c| c.beta)
        .min_by(f64::total_cmp);
    Ok(CalibrationReport { candidates, recommended })
}
