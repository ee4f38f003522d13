//! Coefficient-space representation of the scale of fractional spaces
//! attached to the diagonal operator `A`: theta-norms, dominant/stable
//! projections and the analytic semigroup, all diagonal in the eigenbasis.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Eigenstructure of the linear operator plus the regularity exponents.
///
/// `eigenvalues[k]` is the k-th eigenvalue of `-A` (nondecreasing, the first
/// `n_dominant` equal to zero), so the kernel of `A` is spanned by the first
/// `n_dominant` modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceSpec {
    eigenvalues: Vec<f64>,
    n_dominant: usize,
    theta: f64,
    sigma: f64,
}

impl SpaceSpec {
    pub fn new(eigenvalues: Vec<f64>, n_dominant: usize, theta: f64, sigma: f64) -> Result<Self> {
        if eigenvalues.is_empty() || n_dominant == 0 || n_dominant >= eigenvalues.len() {
            return Err(Error::Config(format!(
                "need 1 <= n_dominant < K, got n_dominant = {n_dominant}, K = {}",
                eigenvalues.len()
            )));
        }
        if !(0.0..1.0).contains(&sigma) {
            return Err(Error::Config(format!("sigma must lie in [0, 1), got {sigma}")));
        }
        if eigenvalues.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Config("eigenvalues must be nondecreasing".into()));
        }
        if eigenvalues[..n_dominant].iter().any(|l| *l != 0.0) {
            return Err(Error::Config("leading n_dominant eigenvalues must be 0".into()));
        }
        if eigenvalues[n_dominant] <= 0.0 {
            return Err(Error::Config("lambda_{n+1} must be positive".into()));
        }
        Ok(Self { eigenvalues, n_dominant, theta, sigma })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn n_dominant(&self) -> usize {
        self.n_dominant
    }

    pub fn eigenvalue(&self, k: usize) -> f64 {
        self.eigenvalues[k]
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Spectral gap (lambda_n, lambda_{n+1}) available for the semigroup bound.
    pub fn gap(&self) -> (f64, f64) {
        (
            self.eigenvalues[self.n_dominant - 1],
            self.eigenvalues[self.n_dominant],
        )
    }

    /// Default rho: midpoint of the spectral gap.
    pub fn default_rho(&self) -> f64 {
        let (lo, hi) = self.gap();
        0.5 * (lo + hi)
    }
}

/// Element of the space, stored as real coefficients on the eigenbasis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralField {
    pub coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn zeros(dim: usize) -> Self {
        Self { coeffs: vec![0.0; dim] }
    }

    pub fn unit(dim: usize, mode: usize) -> Self {
        let mut coeffs = vec![0.0; dim];
        coeffs[mode] = 1.0;
        Self { coeffs }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b).sum()
    }
}

fn check_dims(h: &SpectralField, spec: &SpaceSpec) -> Result<()> {
    if h.dim() != spec.dim() {
        return Err(Error::DimensionMismatch { got: h.dim(), want: spec.dim() });
    }
    Ok(())
}

/// Fractional norm `|h|_theta = sqrt(sum (lambda_k + 1)^{2 theta} h_k^2)`.
pub fn theta_norm(h: &SpectralField, spec: &SpaceSpec, theta: f64) -> f64 {
    debug_assert_eq!(h.dim(), spec.dim());
    let mut acc = 0.0;
    for (hk, lk) in h.coeffs.iter().zip(spec.eigenvalues()) {
        let w = if theta == 0.0 { 1.0 } else { (lk + 1.0).powf(2.0 * theta) };
        acc += w * hk * hk;
    }
    acc.sqrt()
}

/// Projection onto the dominant (kernel) modes.
pub fn project_c(h: &SpectralField, spec: &SpaceSpec) -> SpectralField {
    let mut out = h.clone();
    out.coeffs[spec.n_dominant..].iter_mut().for_each(|c| *c = 0.0);
    out
}

/// Projection onto the stable complement.
pub fn project_s(h: &SpectralField, spec: &SpaceSpec) -> SpectralField {
    let mut out = h.clone();
    out.coeffs[..spec.n_dominant].iter_mut().for_each(|c| *c = 0.0);
    out
}

/// Apply the analytic semigroup: coefficient k multiplied by `exp(-lambda_k t)`.
pub fn semigroup_apply(h: &SpectralField, t: f64, spec: &SpaceSpec) -> Result<SpectralField> {
    check_dims(h, spec)?;
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    Ok(SpectralField {
        coeffs: h
            .coeffs
            .iter()
            .zip(spec.eigenvalues())
            .map(|(hk, lk)| hk * (-lk * t).exp())
            .collect(),
    })
}

/// Empirical probe of the analytic-semigroup estimate
/// `|e^{tA} P_s h|_theta <= M t^{-(theta-sigma)} e^{-rho t} |P_s h|_sigma`:
/// returns the max over random trial fields and grid times of the ratio
/// `|e^{tA} P_s h|_theta t^{theta-sigma} e^{rho t} / |P_s h|_sigma`.
pub fn check_semigroup_bound(
    spec: &SpaceSpec,
    theta: f64,
    sigma: f64,
    rho: f64,
    t_grid: &[f64],
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let (lo, hi) = spec.gap();
    if !(rho > lo && rho < hi) {
        return Err(Error::RhoOutsideGap { rho, lo, hi });
    }
    if t_grid.iter().any(|t| *t <= 0.0) {
        return Err(Error::NegativeTime(0.0));
    }
    let mut rng = crate::stable::derive_rng(seed, 0, 0);
    let mut max_ratio: f64 = 0.0;
    for _ in 0..trials {
        let h = SpectralField {
            coeffs: (0..spec.dim()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
        };
        let hs = project_s(&h, spec);
        let denom = theta_norm(&hs, spec, sigma);
        if denom == 0.0 {
            continue;
        }
        for &t in t_grid {
            let decayed = semigroup_apply(&hs, t, spec)?;
            let num = theta_norm(&decayed, spec, theta);
            let ratio = num * t.powf(theta - sigma) * (rho * t).exp() / denom;
            max_ratio = max_ratio.max(ratio);
        }
    }
    Ok(max_ratio)
}

/// Dyadic time grid `t0 * 2^j` clipped to `[t0, t1]`.
pub fn dyadic_grid(t0: f64, t1: f64) -> Vec<f64> {
    let mut grid = Vec::new();
    let mut t = t0;
    while t < t1 {
        grid.push(t);
        t *= 2.0;
    }
    grid.push(t1);
    grid
}
