//! Uniform 1D lattice with hard-wall (Dirichlet) boundaries and the fields living on it.
//!
//! Only interior points are stored. The two boundary points carry a value of
//! exactly zero and enter the stencils as ghost values.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_INTERIOR: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    n_interior: usize,
    dx: f64,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n_interior: usize) -> Result<Self> {
        if !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "bounds must be finite (x_min = {x_min}, x_max = {x_max})"
            )));
        }
        if x_max <= x_min {
            return Err(Error::InvalidGrid(format!(
                "x_max ({x_max}) must exceed x_min ({x_min})"
            )));
        }
        if n_interior < MIN_INTERIOR {
            return Err(Error::InvalidGrid(format!(
                "n_interior = {n_interior} is below the minimum of {MIN_INTERIOR}"
            )));
        }
        let dx = (x_max - x_min) / (n_interior + 1) as f64;
        Ok(Self {
            x_min,
            x_max,
            n_interior,
            dx,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n_interior
    }

    pub fn is_empty(&self) -> bool {
        self.n_interior == 0
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    /// Position of interior point `i` (0-based).
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + (i + 1) as f64 * self.dx
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n_interior).map(move |i| self.x(i))
    }

    pub(crate) fn check_len(&self, found: usize) -> Result<()> {
        if found != self.n_interior {
            return Err(Error::GridMismatch {
                expected: self.n_interior,
                found,
            });
        }
        Ok(())
    }

    pub(crate) fn same_as(&self, other: &Grid1D) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch {
                expected: self.n_interior,
                found: other.n_interior,
            });
        }
        Ok(())
    }
}

/// Real scalar per interior point.
#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    grid: Grid1D,
    values: Vec<f64>,
}

impl RealField {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        grid.check_len(values.len())?;
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid1D) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.points().map(f).collect();
        Self { grid, values }
    }

    pub(crate) fn from_vec_unchecked(grid: Grid1D, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Rectangle rule: `dx * sum(f_i)` over interior points.
    pub fn integrate(&self) -> f64 {
        self.grid.dx * self.values.iter().sum::<f64>()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self::from_vec_unchecked(self.grid, self.values.iter().map(|v| a * v).collect())
    }

    pub fn zip_map(&self, other: &RealField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.same_as(&other.grid)?;
        Ok(Self::from_vec_unchecked(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }
}

/// Complex amplitude per interior point.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: Grid1D,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: Grid1D, values: Vec<Complex64>) -> Result<Self> {
        grid.check_len(values.len())?;
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid1D) -> Self {
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> Complex64) -> Self {
        let values = grid.points().map(f).collect();
        Self { grid, values }
    }

    pub fn from_real(field: &RealField) -> Self {
        Self {
            grid: field.grid,
            values: field.values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    pub(crate) fn from_vec_unchecked(grid: Grid1D, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Discrete inner product `<self, other> = dx * sum(conj(self_i) * other_i)`.
    pub fn inner(&self, other: &ComplexField) -> Complex64 {
        debug_assert_eq!(self.grid, other.grid);
        let s: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum();
        s * self.grid.dx
    }

    /// `<psi, psi>`, i.e. the integral of the density.
    pub fn norm_sqr(&self) -> f64 {
        self.grid.dx * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()
    }

    pub fn density(&self) -> RealField {
        RealField::from_vec_unchecked(self.grid, self.values.iter().map(|v| v.norm_sqr()).collect())
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm_sqr().sqrt();
        self.scaled(Complex64::new(1.0 / n, 0.0))
    }

    pub fn scaled(&self, a: Complex64) -> Self {
        Self::from_vec_unchecked(self.grid, self.values.iter().map(|v| a * v).collect())
    }

    pub fn axpy(&self, a: Complex64, other: &ComplexField) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self::from_vec_unchecked(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| x + a * y)
                .collect(),
        )
    }

    /// Pointwise product with a real field.
    pub fn mul_real(&self, f: &RealField) -> Self {
        debug_assert_eq!(self.grid, f.grid);
        Self::from_vec_unchecked(
            self.grid,
            self.values
                .iter()
                .zip(&f.values)
                .map(|(v, r)| v * r)
                .collect(),
        )
    }

    /// Central differences of order 1 or 2 with zero ghost values outside the interior.
    pub fn differentiate(&self, order: u32) -> Result<ComplexField> {
        let n = self.values.len();
        let dx = self.grid.dx;
        let at = |i: isize| -> Complex64 {
            if i < 0 || i as usize >= n {
                Complex64::new(0.0, 0.0)
            } else {
                self.values[i as usize]
            }
        };
        let values = match order {
            1 => (0..n as isize)
                .map(|i| (at(i + 1) - at(i - 1)) / (2.0 * dx))
                .collect(),
            2 => (0..n as isize)
                .map(|i| (at(i + 1) - 2.0 * at(i) + at(i - 1)) / (dx * dx))
                .collect(),
            other => return Err(Error::DerivativeOrder(other)),
        };
        Ok(Self::from_vec_unchecked(self.grid, values))
    }

    /// Squared L2 norm of the forward-difference gradient, boundary links included.
    ///
    /// Equals `2 * <psi, T psi>` for the three-point kinetic stencil with unit
    /// `hbar^2 / m`, so it is the discrete `integral |grad psi|^2 dx`.
    pub fn gradient_norm_sqr(&self) -> f64 {
        let n = self.values.len();
        let dx = self.grid.dx;
        let zero = Complex64::new(0.0, 0.0);
        let mut acc = self.values[0].norm_sqr();
        for i in 0..n - 1 {
            acc += (self.values[i + 1] - self.values[i]).norm_sqr();
        }
        acc += (zero - self.values[n - 1]).norm_sqr();
        acc / dx
    }
}

pub fn build_grid(x_min: f64, x_max: f64, n_interior: usize) -> Result<Grid1D> {
    Grid1D::new(x_min, x_max, n_interior)
}

pub fn integrate(f: &RealField) -> f64 {
    f.integrate()
}

pub fn differentiate(f: &ComplexField, order: u32) -> Result<ComplexField> {
    f.differentiate(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn small_grid_spacing_and_points() {
        // n_interior = 3 is below the working minimum; the arithmetic is checked on 8.
        assert!(Grid1D::new(0.0, 1.0, 3).is_err());
        let g = Grid1D::new(0.0, 1.0, 8).unwrap();
        assert_relative_eq!(g.dx(), 1.0 / 9.0);
        assert_relative_eq!(g.x(0), 1.0 / 9.0);
        assert_relative_eq!(g.x(7), 8.0 / 9.0);
    }

    #[test]
    fn spacing_for_symmetric_box() {
        let g = build_grid(-5.0, 5.0, 511).unwrap();
        assert_eq!(g.dx(), 10.0 / 512.0);
        let g = build_grid(0.0, 1.0, 511).unwrap();
        assert_eq!(g.x(255), 0.5);
    }

    #[test]
    fn rejects_bad_bounds() {
        assert!(build_grid(f64::NAN, 1.0, 16).is_err());
        assert!(build_grid(0.0, f64::INFINITY, 16).is_err());
        assert!(build_grid(1.0, 1.0, 16).is_err());
        assert!(build_grid(2.0, 1.0, 16).is_err());
        assert!(build_grid(0.0, 1.0, 7).is_err());
    }

    #[test]
    fn integrate_constants() {
        let g = build_grid(0.0, 1.0, 511).unwrap();
        let one = RealField::from_fn(g, |_| 1.0);
        assert_relative_eq!(integrate(&one), 511.0 / 512.0, epsilon = 1e-14);
        assert_eq!(integrate(&RealField::zeros(g)), 0.0);
    }

    #[test]
    fn normalized_density_integrates_to_one() {
        let g = build_grid(-3.0, 4.0, 300).unwrap();
        let psi = ComplexField::from_fn(g, |x| Complex64::new((-x * x).exp(), 0.3 * x)).normalized();
        assert!((integrate(&psi.density()) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn field_constructors_validate() {
        let g = build_grid(0.0, 1.0, 10).unwrap();
        assert!(RealField::new(g, vec![0.0; 9]).is_err());
        let mut v = vec![0.0; 10];
        v[4] = f64::NAN;
        assert!(matches!(RealField::new(g, v), Err(Error::NonFinite { index: 4 })));
        assert!(ComplexField::new(g, vec![c(0.0); 11]).is_err());
    }

    #[test]
    fn derivatives_of_zero_and_bad_order() {
        let g = build_grid(0.0, 1.0, 64).unwrap();
        let z = ComplexField::zeros(g);
        assert!(z.differentiate(1).unwrap().values().iter().all(|v| v.norm() == 0.0));
        assert!(z.differentiate(2).unwrap().values().iter().all(|v| v.norm() == 0.0));
        assert!(matches!(z.differentiate(3), Err(Error::DerivativeOrder(3))));
        assert!(z.differentiate(0).is_err());
    }

    fn max_err(n: usize, order: u32, k: f64) -> f64 {
        let g = build_grid(0.0, 1.0, n).unwrap();
        let f = ComplexField::from_fn(g, |x| c((k * PI * x).sin()));
        let d = f.differentiate(order).unwrap();
        g.points()
            .zip(d.values())
            .map(|(x, v)| {
                let exact = if order == 1 {
                    k * PI * (k * PI * x).cos()
                } else {
                    -(k * PI).powi(2) * (k * PI * x).sin()
                };
                (v - c(exact)).norm()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn second_derivative_matches_analytic() {
        let err = max_err(511, 2, 1.0);
        let dx = 1.0 / 512.0;
        // Leading truncation term is (pi^4/12) dx^2.
        assert!(err < PI.powi(4) / 12.0 * dx * dx * 1.01, "err = {err}");
    }

    #[test]
    fn first_derivative_matches_analytic() {
        // sin vanishes at both walls so the zero ghost values are exact.
        let err = max_err(511, 1, 1.0);
        let dx = 1.0 / 512.0;
        assert!(err < PI.powi(3) / 6.0 * dx * dx * 1.01, "err = {err}");
    }

    #[test]
    fn second_order_convergence() {
        for k in [1.0, 3.0] {
            let e1 = max_err(255, 2, k);
            let e2 = max_err(511, 2, k);
            let ratio = e1 / e2;
            assert!((3.8..4.2).contains(&ratio), "k = {k}, ratio = {ratio}");
        }
    }

    #[test]
    fn gradient_norm_matches_kinetic_form() {
        let g = build_grid(0.0, 1.0, 511).unwrap();
        let f = ComplexField::from_fn(g, |x| Complex64::new((PI * x).sin(), 0.2 * (2.0 * PI * x).sin()));
        // -<f, f''> equals the forward-difference gradient norm exactly (summation by parts).
        let lap = f.differentiate(2).unwrap();
        let sbp = -f.inner(&lap).re;
        assert_relative_eq!(f.gradient_norm_sqr(), sbp, max_relative = 1e-12);
    }

    fn bump(g: Grid1D, a: f64, b: f64, phase: f64) -> ComplexField {
        ComplexField::from_fn(g, |x| {
            let s = (PI * x).sin().powi(2);
            Complex64::from_polar(a * s + b * s * s, phase * x)
        })
    }

    proptest! {
        #[test]
        fn integrate_is_linear(a in -5.0..5.0f64, b in -5.0..5.0f64, k in 1.0..6.0f64) {
            let g = build_grid(0.0, 1.0, 97).unwrap();
            let f = RealField::from_fn(g, |x| (k * x).sin());
            let h = RealField::from_fn(g, |x| x * x - k);
            let combo = f.zip_map(&h, |u, v| a * u + b * v).unwrap();
            let lhs = combo.integrate();
            let rhs = a * f.integrate() + b * h.integrate();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }

        #[test]
        fn summation_by_parts(a in 0.1..2.0f64, b in -1.0..1.0f64, p in -8.0..8.0f64, q in -8.0..8.0f64) {
            let g = build_grid(0.0, 1.0, 400).unwrap();
            let f = bump(g, a, b, p);
            let h = bump(g, b + 1.5, a, q);
            let df = f.differentiate(1).unwrap();
            let dh = h.differentiate(1).unwrap();
            let lhs = f.inner(&dh).re;
            let rhs = -df.inner(&h).re;
            // The central difference matrix is exactly skew-symmetric with zero ghosts.
            prop_assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()));
        }
    }
}
