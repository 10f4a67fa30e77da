//! CSV time series and JSON summary.
//!
//! Everything written is a pure function of the run result: no timestamps,
//! no wall time, fixed column order, fixed number formatting.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ScenarioConfig;
use super::scenario::RunResult;
use crate::error::{Error, Result};
use crate::observables::IdentityResiduals;

pub const CSV_NAME: &str = "timeseries.csv";
pub const SUMMARY_NAME: &str = "summary.json";

const FIXED_COLUMNS: [&str; 11] = [
    "t",
    "norm",
    "energy",
    "velocity",
    "power",
    "radiated",
    "work",
    "res_continuity",
    "res_ehrenfest",
    "res_ledger",
    "res_cond24",
];

/// 17 significant digits: round-trips every f64.
fn num(out: &mut String, v: f64) {
    write!(out, "{v:.16e}").expect("writing to a String");
}

pub fn csv_header(k_max: usize) -> String {
    let mut cols: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    cols.extend((0..k_max).map(|k| format!("pop_{k}")));
    cols.join(",")
}

/// Residual cells are empty on the first and last rows, where no central difference exists.
pub fn render_csv(result: &RunResult) -> String {
    let k_max = result.config.basis.k_max;
    let mut out = csv_header(k_max);
    out.push('\n');
    for r in &result.records {
        for v in [r.t, r.norm, r.energy, r.velocity, r.power, r.radiated, r.external_work] {
            num(&mut out, v);
            out.push(',');
        }
        match r.residuals {
            Some(s) => {
                for v in [s.continuity, s.ehrenfest, s.energy_ledger, s.condition24] {
                    num(&mut out, v);
                    out.push(',');
                }
            }
            None => out.push_str(",,,,"),
        }
        for (k, p) in r.populations.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            num(&mut out, *p);
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Serialize)]
pub struct Summary<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub final_eigenstate: Option<usize>,
    pub converged: bool,
    pub consistent: bool,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub radiated_total: f64,
    pub work_total: f64,
    pub balance_residual: f64,
    pub ledger_closure: f64,
    pub residual_maxima: IdentityResiduals,
    pub samples: usize,
    pub total_steps: usize,
    pub t_end: f64,
    pub max_fixed_point_iterations: usize,
    pub halved_steps: usize,
    pub failure: Option<&'a str>,
    pub energies: &'a [f64],
    pub config: &'a ScenarioConfig,
}

pub fn summary(result: &RunResult) -> Summary<'_> {
    let last = result.records.last().expect("runs always hold the initial sample");
    Summary {
        tool: env!("CARGO_PKG_NAME"),
        version: crate::VERSION,
        final_eigenstate: result.final_eigenstate,
        converged: result.converged,
        consistent: result.consistent,
        initial_energy: result.initial_energy,
        final_energy: last.energy,
        radiated_total: result.radiated_total,
        work_total: result.work_total,
        balance_residual: result.balance_residual,
        ledger_closure: result.ledger_closure,
        residual_maxima: result.residuals,
        samples: result.records.len(),
        total_steps: result.total_steps,
        t_end: last.t,
        max_fixed_point_iterations: result.max_iterations,
        halved_steps: result.halved_steps,
        failure: result.failure.as_deref(),
        energies: &result.energies,
        config: &result.config,
    }
}

pub fn render_summary(result: &RunResult) -> String {
    let mut s = serde_json::to_string_pretty(&summary(result)).expect("summary serializes");
    s.push('\n');
    s
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(contents.as_bytes()).map_err(io)?;
    f.sync_all().map_err(io)
}

/// Writes `timeseries.csv` and `summary.json` into `dir`, creating it if needed.
pub fn emit_results(result: &RunResult, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let csv = dir.join(CSV_NAME);
    let json = dir.join(SUMMARY_NAME);
    write_file(&csv, &render_csv(result))?;
    write_file(&json, &render_summary(result))?;
    Ok((csv, json))
}

/// Fails on the first output directory shared by two runs of a batch.
pub fn check_distinct_outputs(dirs: &[PathBuf]) -> Result<()> {
    let mut seen = std::collections::BTreeSet::new();
    for d in dirs {
        let key = fs::canonicalize(d).unwrap_or_else(|_| d.components().collect());
        if !seen.insert(key) {
            return Err(Error::PathCollision(d.clone()));
        }
    }
    Ok(())
}
