#![allow(dead_code)]

use std::path::PathBuf;

use num_complex::Complex64;
use tdnlse::harness::{parse_config, ScenarioConfig};

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

pub fn load(name: &str) -> ScenarioConfig {
    parse_config(&config_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// `d rho / dt = -(J_{i+1/2} - J_{i-1/2}) / dx` with the staggered lattice
/// flux `J_{i+1/2} = Im(conj(psi_i) psi_{i+1}) / dx` (hbar = m = 1) and zero
/// flux through the walls.
pub fn drho_dt_from_flux(psi: &[Complex64], dx: f64) -> Vec<f64> {
    let n = psi.len();
    let flux: Vec<f64> = (0..n - 1).map(|i| (psi[i].conj() * psi[i + 1]).im / dx).collect();
    (0..n)
        .map(|i| {
            let right = if i + 1 < n { flux[i] } else { 0.0 };
            let left = if i > 0 { flux[i - 1] } else { 0.0 };
            -(right - left) / dx
        })
        .collect()
}

pub fn l2_distance(a: &[Complex64], b: &[Complex64], dx: f64) -> f64 {
    (dx * a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>()).sqrt()
}
