//! Real symmetric tridiagonal eigensolver.
//!
//! Eigenvalues come from the implicit QL iteration with Wilkinson shifts
//! (no vector accumulation, O(n^2)); eigenvectors for the requested lowest
//! levels come from inverse iteration on the pivoted tridiagonal LU, with
//! Gram-Schmidt against the vectors already found.

use crate::error::{Error, Result};

const MAX_QL_SWEEPS: usize = 60;
const INVERSE_ITERATIONS: usize = 3;

#[derive(Debug, Clone)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    /// `off[i]` couples rows `i` and `i + 1`; length `n - 1`.
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert_eq!(off.len() + 1, diag.len(), "off-diagonal must have n - 1 entries");
        Self { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Infinity norm.
    pub fn norm_inf(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i].abs();
                if i > 0 {
                    s += self.off[i - 1].abs();
                }
                if i + 1 < n {
                    s += self.off[i].abs();
                }
                s
            })
            .fold(0.0, f64::max)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.off[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// All eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let n = self.len();
        let mut d = self.diag.clone();
        let mut e = self.off.clone();
        e.push(0.0);
        for l in 0..n {
            let mut sweeps = 0;
            loop {
                let mut m = l;
                while m + 1 < n {
                    let dd = d[m].abs() + d[m + 1].abs();
                    if e[m].abs() <= f64::EPSILON * dd {
                        break;
                    }
                    m += 1;
                }
                if m == l {
                    break;
                }
                sweeps += 1;
                if sweeps > MAX_QL_SWEEPS {
                    return Err(Error::EigenNoConvergence {
                        index: l,
                        iterations: sweeps,
                    });
                }
                let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                let mut r = g.hypot(1.0);
                g = d[m] - d[l] + e[l] / (g + r.copysign(g));
                let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
                let mut i = m;
                let mut deflated = false;
                while i > l {
                    i -= 1;
                    let f = s * e[i];
                    let b = c * e[i];
                    r = f.hypot(g);
                    e[i + 1] = r;
                    if r == 0.0 {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        deflated = true;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                }
                if deflated {
                    continue;
                }
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        }
        d.sort_by(|a, b| a.total_cmp(b));
        Ok(d)
    }

    /// Lowest `k` eigenpairs, ascending. Vectors have unit Euclidean norm.
    pub fn lowest_eigenpairs(&self, k: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let n = self.len();
        if k > n {
            return Err(Error::BasisTooLarge {
                requested: k,
                available: n,
            });
        }
        let values = self.eigenvalues()?;
        let tiny = f64::EPSILON * self.norm_inf().max(f64::MIN_POSITIVE);
        let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
        for (index, &lambda) in values.iter().take(k).enumerate() {
            let lu = ShiftedLu::factor(self, lambda, tiny);
            // Deterministic start vector with components in every mode.
            let mut v: Vec<f64> = (0..n)
                .map(|i| 1.0 + 0.5 * ((i as f64 + 1.0) * 0.618_033_988_749_895).fract())
                .collect();
            orthogonalize(&mut v, &vectors);
            normalize(&mut v);
            for _ in 0..INVERSE_ITERATIONS {
                lu.solve(&mut v);
                orthogonalize(&mut v, &vectors);
                if !normalize(&mut v) {
                    return Err(Error::EigenNoConvergence {
                        index,
                        iterations: INVERSE_ITERATIONS,
                    });
                }
            }
            vectors.push(v);
        }
        Ok((values.into_iter().take(k).collect(), vectors))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    // Two passes of classical Gram-Schmidt.
    for _ in 0..2 {
        for b in basis {
            let c = dot(v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
    }
}

fn normalize(v: &mut [f64]) -> bool {
    let n = dot(v, v).sqrt();
    if !(n.is_finite() && n > 0.0) {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= n);
    true
}

/// LU factorization of `T - shift*I` with partial pivoting.
struct ShiftedLu {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl ShiftedLu {
    fn factor(t: &SymTridiagonal, shift: f64, tiny: f64) -> Self {
        let n = t.len();
        let mut dl = t.off.clone();
        let mut d: Vec<f64> = t.diag.iter().map(|x| x - shift).collect();
        let mut du = t.off.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n - 1 {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    d[i] = tiny;
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        for x in d.iter_mut() {
            if x.abs() < tiny {
                *x = tiny.copysign(*x);
            }
        }
        Self {
            dl,
            d,
            du,
            du2,
            swapped,
        }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = self.d.len();
        for i in 0..n - 1 {
            if self.swapped[i] {
                let temp = b[i] - self.dl[i] * b[i + 1];
                b[i] = b[i + 1];
                b[i + 1] = temp;
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}
