//! Physical-space evaluation of the two trigonometric eigenbases and the
//! collocation transforms used by the nonlinearity and noise-operator
//! quadrature. Grids are oversampled so that cubic products of retained modes
//! project back without aliasing.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Eigenbasis of the model's linear operator, by index convention:
///
/// * `DirichletSine`: `e_k(x) = sqrt(2/pi) sin(kx)` on `[0, pi]`, state index
///   `k-1`, for k = 1..=k_max.
/// * `PeriodicMeanZero`: interleaved `[sin 1, cos 1, sin 2, cos 2, ...]`, each
///   `1/sqrt(pi)` normalized on `[0, 2pi]`; the constant mode is excluded from
///   the state space (see the surface-growth model notes).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    DirichletSine { k_max: usize },
    PeriodicMeanZero { k_max: usize },
}

impl Basis {
    /// Number of state coefficients.
    pub fn dim(&self) -> usize {
        match self {
            Basis::DirichletSine { k_max } => *k_max,
            Basis::PeriodicMeanZero { k_max } => 2 * k_max,
        }
    }

    /// Collocation grid, exact for products up to cubic degree of the
    /// retained modes.
    pub fn grid(&self) -> Vec<f64> {
        match self {
            Basis::DirichletSine { k_max } => {
                let m = 2 * k_max;
                (1..=m).map(|j| j as f64 * PI / (m + 1) as f64).collect()
            }
            Basis::PeriodicMeanZero { k_max } => {
                let m = 4 * k_max + 2;
                (0..m).map(|j| 2.0 * PI * j as f64 / m as f64).collect()
            }
        }
    }

    /// Value of the normalized basis function with state index `idx` at `x`.
    pub fn eval(&self, idx: usize, x: f64) -> f64 {
        match self {
            Basis::DirichletSine { .. } => {
                let k = (idx + 1) as f64;
                (2.0 / PI).sqrt() * (k * x).sin()
            }
            Basis::PeriodicMeanZero { .. } => {
                let k = (idx / 2 + 1) as f64;
                if idx % 2 == 0 {
                    (k * x).sin() / PI.sqrt()
                } else {
                    (k * x).cos() / PI.sqrt()
                }
            }
        }
    }

    /// Field values on the collocation grid.
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        let grid = self.grid();
        grid.iter()
            .map(|&x| {
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(idx, c)| c * self.eval(idx, x))
                    .sum()
            })
            .collect()
    }

    /// Project grid values back onto the retained normalized modes. Exact for
    /// trigonometric polynomials whose degree stays below the alias limit of
    /// the grid.
    pub fn analyze(&self, values: &[f64]) -> Vec<f64> {
        match self {
            Basis::DirichletSine { k_max } => {
                let m = 2 * k_max;
                debug_assert_eq!(values.len(), m);
                let w = (PI / 2.0).sqrt() * 2.0 / (m + 1) as f64;
                (1..=*k_max)
                    .map(|k| {
                        w * values
                            .iter()
                            .enumerate()
                            .map(|(j, u)| u * ((j + 1) as f64 * k as f64 * PI / (m + 1) as f64).sin())
                            .sum::<f64>()
                    })
                    .collect()
            }
            Basis::PeriodicMeanZero { k_max } => {
                let m = 4 * k_max + 2;
                debug_assert_eq!(values.len(), m);
                let w = PI.sqrt() * 2.0 / m as f64;
                let mut out = vec![0.0; 2 * k_max];
                for k in 1..=*k_max {
                    let (mut s, mut c) = (0.0, 0.0);
                    for (j, u) in values.iter().enumerate() {
                        let x = 2.0 * PI * j as f64 * k as f64 / m as f64;
                        s += u * x.sin();
                        c += u * x.cos();
                    }
                    out[2 * (k - 1)] = w * s;
                    out[2 * (k - 1) + 1] = w * c;
                }
                out
            }
        }
    }

    /// Domain length: pi for the Dirichlet case, 2 pi for the periodic case.
    pub fn domain_len(&self) -> f64 {
        match self {
            Basis::DirichletSine { .. } => PI,
            Basis::PeriodicMeanZero { .. } => 2.0 * PI,
        }
    }
}

/// Composite Simpson quadrature on [a, b] with `n` panels (n made even).
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = if n % 2 == 0 { n } else { n + 1 };
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for j in 1..n {
        let w = if j % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + j as f64 * h);
    }
    acc * h / 3.0
}
