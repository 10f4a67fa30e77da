//! One-dimensional simulator for the Schrodinger equation with a
//! radiation-damping nonlinearity `R psi = beta * (d rho / dt) * psi`,
//! alongside the linear equation, with diagnostics for the energy ledger
//! (work done by the field, energy carried off by radiation) and the
//! relaxation of superpositions into eigenstates.

pub mod eigen;
pub mod error;
pub mod fields;
pub mod grid;
pub mod harness;
pub mod observables;
pub mod operator;
pub mod propagator;

pub use error::{Error, Result};
pub use fields::{FieldConfig, Perturbation, StaticPotential, UnitsConfig};
pub use grid::{build_grid, ComplexField, Grid1D, RealField};
pub use observables::{IdentityResiduals, ObservableRecord};
pub use operator::{DampingConfig, EigenBasis, HamiltonianMatrix};
pub use propagator::{StepReport, StepperConfig, System, WaveState};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
