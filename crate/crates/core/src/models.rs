//! Concrete model definitions: the stochastic Allen-Cahn equation on
//! `[0, pi]` with Dirichlet boundary conditions and the surface-growth model
//! on `[0, 2pi]` with periodic boundary conditions. Both carry a cubic
//! nonlinearity and linear multiplicative noise `G(u) = u Q^{1/2}`.
//!
//! The surface-growth state lives in the mean-zero subspace: the constant
//! mode is also in the kernel of `A` but is not part of the dominant pattern,
//! and keeping it would break the spectral-gap structure the stable-part
//! estimates rely on. The noise, however, keeps its `k = 0` cylinder mode, so
//! the reduced two-mode noise still depends on the constant-mode process as
//! well as the wavenumber-2 ones.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::basis::Basis;
use crate::error::{Error, Result};
use crate::spectral::{SpaceSpec, SpectralField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    AllenCahn,
    SurfaceGrowth,
}

/// Eigenvalue `k^2 - 1` of the Allen-Cahn linear part, k >= 1.
pub fn allen_cahn_eigenvalue(k: usize) -> f64 {
    assert!(k >= 1);
    (k * k) as f64 - 1.0
}

/// Eigenvalue `k^4 - k^2` of the surface-growth linear part, k >= 0.
pub fn surface_growth_eigenvalue(k: usize) -> f64 {
    let k2 = (k * k) as f64;
    k2 * k2 - k2
}

/// Projection coefficient of `sin(x) e_k(x)` back onto `sin` for the
/// Allen-Cahn basis: `(2/pi)^{3/2} * 2 (cos(k pi) - 1) / (k (k^2 - 4))`,
/// zero at k = 2 (and at every even k, where `cos(k pi) = 1`).
pub fn delta_k(k: usize) -> f64 {
    assert!(k >= 1);
    if k == 2 {
        return 0.0;
    }
    if k % 2 == 0 {
        return 0.0;
    }
    let kf = k as f64;
    (2.0 / PI).powf(1.5) * 2.0 * ((kf * PI).cos() - 1.0) / (kf * (kf * kf - 4.0))
}

/// Reduced cubic on the surface-growth dominant plane:
/// `F_c(g1 sin + g2 cos) = -3/4 |g|^2 (g1 sin, g2 cos)`.
pub fn surface_growth_fc(gamma1: f64, gamma2: f64) -> (f64, f64) {
    let r2 = gamma1 * gamma1 + gamma2 * gamma2;
    (-0.75 * r2 * gamma1, -0.75 * r2 * gamma2)
}

/// Covariance weights `beta_k = b0 * k^{-q}` of `Q^{1/2}` over noise modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovSpec {
    betas: Vec<f64>,
    b0: f64,
    q: f64,
}

impl CovSpec {
    /// Power-law decay over wavenumbers. `wavenumbers[i]` is the wavenumber of
    /// noise mode i; wavenumber 0 gets weight `b0`.
    pub fn power_law(b0: f64, q: f64, wavenumbers: &[usize]) -> Result<Self> {
        if b0 < 0.0 {
            return Err(Error::Config(format!("b0 must be >= 0, got {b0}")));
        }
        let betas = wavenumbers
            .iter()
            .map(|&k| if k == 0 { b0 } else { b0 * (k as f64).powf(-q) })
            .collect();
        Ok(Self { betas, b0, q })
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn b0(&self) -> f64 {
        self.b0
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Summability contracts: `sum beta_k` finite needs q > 1; the
    /// Hilbert-Schmidt condition needs `sum beta_k^2 k^2` (Allen-Cahn) or
    /// `sum beta_k^2 k^4` (surface growth) finite.
    pub fn validate(&self, kind: ModelKind) -> Result<()> {
        if self.b0 == 0.0 {
            return Ok(());
        }
        let needed = match kind {
            ModelKind::AllenCahn => 1.5,
            ModelKind::SurfaceGrowth => 2.5,
        };
        if self.q <= 1.0 {
            return Err(Error::Config(format!(
                "covariance decay q = {} is not summable (A5 requires q > 1)",
                self.q
            )));
        }
        if self.q <= needed {
            return Err(Error::Config(format!(
                "covariance decay q = {} too slow for {:?} (needs q > {needed})",
                self.q, kind
            )));
        }
        Ok(())
    }
}

/// A model: eigenstructure, per-mode perturbation multipliers, cubic
/// nonlinearity evaluator and the noise operator data.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub space: SpaceSpec,
    pub basis: Basis,
    /// Bifurcation parameter: gamma for Allen-Cahn (`L = gamma I`), the slow
    /// part mu of `mu = 1 + eps^2 gamma` for surface growth (`L = -gamma Laplace`).
    pub gamma: f64,
    /// Diagonal multipliers of `L` per state mode.
    pub ell: Vec<f64>,
    pub cov: CovSpec,
    /// Values of each noise-basis function on the collocation grid.
    noise_modes: Vec<Vec<f64>>,
    /// Per noise mode k, the n x n matrix `m` with
    /// `P_c[s_i e_k] = sum_j m[i][j] s_j` over the unnormalized dominant
    /// shapes `s_j` (sin for Allen-Cahn; sin, cos for surface growth).
    noise_projection: Vec<Vec<Vec<f64>>>,
    /// Norm of a dominant shape, converting shape amplitudes to coefficients
    /// on the normalized eigenbasis.
    shape_norm: f64,
}

impl ModelSpec {
    pub fn allen_cahn(gamma: f64, k_max: usize, b0: f64, q: f64) -> Result<Self> {
        let eigs: Vec<f64> = (1..=k_max).map(allen_cahn_eigenvalue).collect();
        let space = SpaceSpec::new(eigs, 1, 1.0, 0.0)?;
        let basis = Basis::DirichletSine { k_max };
        let wavenumbers: Vec<usize> = (1..=k_max).collect();
        let cov = CovSpec::power_law(b0, q, &wavenumbers)?;
        cov.validate(ModelKind::AllenCahn)?;
        let ell = vec![gamma; k_max];
        Ok(Self::assemble(ModelKind::AllenCahn, space, basis, gamma, ell, cov))
    }

    pub fn surface_growth(gamma: f64, k_max: usize, b0: f64, q: f64) -> Result<Self> {
        let mut eigs = Vec::with_capacity(2 * k_max);
        let mut ell = Vec::with_capacity(2 * k_max);
        for k in 1..=k_max {
            let lambda = surface_growth_eigenvalue(k);
            // L = -gamma Laplace acts as gamma k^2 on wavenumber k.
            let l = gamma * (k * k) as f64;
            eigs.extend([lambda, lambda]);
            ell.extend([l, l]);
        }
        let space = SpaceSpec::new(eigs, 2, 0.5, 0.5)?;
        let basis = Basis::PeriodicMeanZero { k_max };
        // Noise modes: constant, then sin/cos pairs up to k_max.
        let mut wavenumbers = vec![0usize];
        for k in 1..=k_max {
            wavenumbers.extend([k, k]);
        }
        let cov = CovSpec::power_law(b0, q, &wavenumbers)?;
        cov.validate(ModelKind::SurfaceGrowth)?;
        Ok(Self::assemble(ModelKind::SurfaceGrowth, space, basis, gamma, ell, cov))
    }

    fn assemble(
        kind: ModelKind,
        space: SpaceSpec,
        basis: Basis,
        gamma: f64,
        ell: Vec<f64>,
        cov: CovSpec,
    ) -> Self {
        let grid = basis.grid();
        let n_noise = cov.betas().len();
        let noise_modes: Vec<Vec<f64>> = (0..n_noise)
            .map(|k| grid.iter().map(|&x| noise_eval(kind, k, x)).collect())
            .collect();
        let shape_norm = match kind {
            ModelKind::AllenCahn => (PI / 2.0).sqrt(),
            ModelKind::SurfaceGrowth => PI.sqrt(),
        };
        let n = space.n_dominant();
        // Tensor of dominant-shape/noise-mode products projected back onto
        // the dominant shapes. On the periodic basis the products are trig
        // polynomials inside the analysis band, so collocation is exact; the
        // sine-basis products contain cosines, so Allen-Cahn takes the closed
        // form instead.
        let mut noise_projection = Vec::with_capacity(n_noise);
        for (mode_idx, mode) in noise_modes.iter().enumerate() {
            let mut m = vec![vec![0.0; n]; n];
            match kind {
                ModelKind::AllenCahn => {
                    m[0][0] = delta_k(mode_idx + 1);
                }
                ModelKind::SurfaceGrowth => {
                    for (i, row) in m.iter_mut().enumerate() {
                        let shape: Vec<f64> = grid
                            .iter()
                            .map(|&x| shape_norm * basis.eval(i, x))
                            .collect();
                        let product: Vec<f64> =
                            shape.iter().zip(mode).map(|(a, b)| a * b).collect();
                        let coeffs = basis.analyze(&product);
                        for (j, slot) in row.iter_mut().enumerate() {
                            *slot = coeffs[j] / shape_norm;
                        }
                    }
                }
            }
            noise_projection.push(m);
        }
        Self {
            kind,
            space,
            basis,
            gamma,
            ell,
            cov,
            noise_modes,
            noise_projection,
            shape_norm,
        }
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn n_dominant(&self) -> usize {
        self.space.n_dominant()
    }

    pub fn n_noise_modes(&self) -> usize {
        self.noise_modes.len()
    }

    /// Norm of one dominant shape: converts a paper-convention amplitude into
    /// a coefficient on the normalized eigenbasis.
    pub fn shape_norm(&self) -> f64 {
        self.shape_norm
    }

    /// Projection matrix of dominant-shape/noise-mode products, per noise mode.
    pub fn noise_projection(&self, mode: usize) -> &Vec<Vec<f64>> {
        &self.noise_projection[mode]
    }

    /// Dominant amplitudes (paper convention) of a field.
    pub fn dominant_amplitudes(&self, u: &SpectralField) -> Vec<f64> {
        (0..self.n_dominant())
            .map(|j| u.coeffs[j] / self.shape_norm)
            .collect()
    }

    /// Field supported on the dominant modes with the given amplitudes.
    pub fn field_from_amplitudes(&self, phi: &[f64]) -> SpectralField {
        let mut f = SpectralField::zeros(self.dim());
        for (j, p) in phi.iter().enumerate() {
            f.coeffs[j] = p * self.shape_norm;
        }
        f
    }

    /// Galerkin projection of the cubic nonlinearity onto the retained modes.
    pub fn cubic_nonlinearity(&self, u: &SpectralField) -> Result<SpectralField> {
        let out = self.trilinear(u, u, u);
        if !out.is_finite() {
            return Err(Error::NonFinite("cubic nonlinearity"));
        }
        Ok(out)
    }

    /// Polarized trilinear form `F(u, v, w)`, symmetric in its arguments:
    /// `-uvw` for Allen-Cahn, `d/dx (u' v' w')` for surface growth.
    pub fn trilinear(&self, u: &SpectralField, v: &SpectralField, w: &SpectralField) -> SpectralField {
        match self.kind {
            ModelKind::AllenCahn => {
                let (a, b, c) = (
                    self.basis.synthesize(&u.coeffs),
                    self.basis.synthesize(&v.coeffs),
                    self.basis.synthesize(&w.coeffs),
                );
                let prod: Vec<f64> = a
                    .iter()
                    .zip(&b)
                    .zip(&c)
                    .map(|((x, y), z)| -x * y * z)
                    .collect();
                SpectralField { coeffs: self.basis.analyze(&prod) }
            }
            ModelKind::SurfaceGrowth => {
                let du = self.derivative(u);
                let dv = self.derivative(v);
                let dw = self.derivative(w);
                let (a, b, c) = (
                    self.basis.synthesize(&du.coeffs),
                    self.basis.synthesize(&dv.coeffs),
                    self.basis.synthesize(&dw.coeffs),
                );
                let prod: Vec<f64> = a
                    .iter()
                    .zip(&b)
                    .zip(&c)
                    .map(|((x, y), z)| x * y * z)
                    .collect();
                let cubed = SpectralField { coeffs: self.basis.analyze(&prod) };
                self.derivative(&cubed)
            }
        }
    }

    /// Spatial derivative in coefficient space (surface-growth basis only).
    fn derivative(&self, u: &SpectralField) -> SpectralField {
        let mut out = SpectralField::zeros(u.dim());
        for k in 1..=u.dim() / 2 {
            let s = u.coeffs[2 * (k - 1)];
            let c = u.coeffs[2 * (k - 1) + 1];
            out.coeffs[2 * (k - 1)] = -(k as f64) * c;
            out.coeffs[2 * (k - 1) + 1] = k as f64 * s;
        }
        out
    }

    /// Per-noise-mode images `G(u) e_k`: projection of `u * beta_k e_k`.
    pub fn g_apply(&self, u: &SpectralField) -> Vec<SpectralField> {
        let uv = self.basis.synthesize(&u.coeffs);
        self.noise_modes
            .iter()
            .zip(self.cov.betas())
            .map(|(mode, beta)| {
                let prod: Vec<f64> = uv.iter().zip(mode).map(|(a, b)| a * b * beta).collect();
                SpectralField { coeffs: self.basis.analyze(&prod) }
            })
            .collect()
    }

    /// Projection of `u * sum_k beta_k dL_k e_k` onto the retained modes; the
    /// multiplicative noise term of one step, built from shared increments.
    pub fn noise_field(&self, u: &SpectralField, increments: &[f64]) -> SpectralField {
        debug_assert_eq!(increments.len(), self.noise_modes.len());
        let uv = self.basis.synthesize(&u.coeffs);
        let mut w = vec![0.0; uv.len()];
        for ((mode, beta), dl) in self.noise_modes.iter().zip(self.cov.betas()).zip(increments) {
            if *dl == 0.0 {
                continue;
            }
            let g = beta * dl;
            for (wj, mj) in w.iter_mut().zip(mode) {
                *wj += g * mj;
            }
        }
        let prod: Vec<f64> = uv.iter().zip(&w).map(|(a, b)| a * b).collect();
        SpectralField { coeffs: self.basis.analyze(&prod) }
    }

    /// Drift of the amplitude equation in shape-amplitude coordinates:
    /// `gamma phi - 3/4 phi^3` (Allen-Cahn) or
    /// `mu gamma_j - 3/4 |gamma|^2 gamma_j` (surface growth).
    pub fn amplitude_drift(&self, phi: &[f64]) -> Vec<f64> {
        let r2: f64 = phi.iter().map(|p| p * p).sum();
        phi.iter()
            .map(|p| self.gamma * p - 0.75 * r2 * p)
            .collect()
    }

    /// Amplitude noise increment: for dominant amplitudes `phi` and shared
    /// per-mode increments, returns `sum_k beta_k dL_k m_k^T phi` per component.
    pub fn amplitude_noise(&self, phi: &[f64], increments: &[f64]) -> Vec<f64> {
        let n = phi.len();
        let mut out = vec![0.0; n];
        for ((m, beta), dl) in self
            .noise_projection
            .iter()
            .zip(self.cov.betas())
            .zip(increments)
        {
            if *dl == 0.0 {
                continue;
            }
            let g = beta * dl;
            for (i, p) in phi.iter().enumerate() {
                for (j, slot) in out.iter_mut().enumerate() {
                    *slot += g * p * m[i][j];
                }
            }
        }
        out
    }
}

/// Value of noise-basis mode `k` at `x` under each model's convention.
fn noise_eval(kind: ModelKind, mode: usize, x: f64) -> f64 {
    match kind {
        ModelKind::AllenCahn => {
            let k = (mode + 1) as f64;
            (2.0 / PI).sqrt() * (k * x).sin()
        }
        ModelKind::SurfaceGrowth => {
            if mode == 0 {
                1.0 / (2.0 * PI).sqrt()
            } else {
                let k = ((mode + 1) / 2) as f64;
                if mode % 2 == 1 {
                    (k * x).sin() / PI.sqrt()
                } else {
                    (k * x).cos() / PI.sqrt()
                }
            }
        }
    }
}

/// Per-mode amplitude noise weights `w_k = beta_k delta_k` for the Allen-Cahn
/// reduction, and their sum.
pub fn amplitude_noise_weights(cov: &CovSpec) -> (Vec<f64>, f64) {
    let weights: Vec<f64> = cov
        .betas()
        .iter()
        .enumerate()
        .map(|(i, beta)| beta * delta_k(i + 1))
        .collect();
    let sum = weights.iter().sum();
    (weights, sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::simpson;
    use crate::spectral::{project_c, theta_norm};
    use rand::Rng;

    fn ac(k_max: usize) -> ModelSpec {
        ModelSpec::allen_cahn(0.4, k_max, 1.0, 3.0).unwrap()
    }

    fn sg(k_max: usize) -> ModelSpec {
        ModelSpec::surface_growth(1.0, k_max, 1.0, 4.0).unwrap()
    }

    #[test]
    fn eigenvalue_formulas() {
        assert_eq!(allen_cahn_eigenvalue(1), 0.0);
        assert_eq!(allen_cahn_eigenvalue(2), 3.0);
        assert_eq!(allen_cahn_eigenvalue(10), 99.0);
        assert_eq!(surface_growth_eigenvalue(0), 0.0);
        assert_eq!(surface_growth_eigenvalue(1), 0.0);
        assert_eq!(surface_growth_eigenvalue(2), 12.0);
    }

    #[test]
    fn delta_parity_and_values() {
        assert_eq!(delta_k(2), 0.0);
        assert_eq!(delta_k(4), 0.0);
        for k in (2..=50).step_by(2) {
            assert_eq!(delta_k(k), 0.0);
        }
        let expect = (4.0 / 3.0) * (2.0 / PI).powf(1.5);
        assert!((delta_k(1) - expect).abs() < 1e-14);
        assert!((expect - 0.677265).abs() < 1e-6);
    }

    #[test]
    fn delta_matches_quadrature_oracle() {
        for k in 1..=50 {
            let oracle = (2.0 / PI).powf(1.5)
                * simpson(|y| y.sin().powi(2) * (k as f64 * y).sin(), 0.0, PI, 40_000);
            assert!(
                (delta_k(k) - oracle).abs() < 1e-10,
                "k = {k}: {} vs {oracle}",
                delta_k(k)
            );
        }
    }

    #[test]
    fn cubic_of_zero_is_zero() {
        for model in [ac(8), sg(4)] {
            let z = SpectralField::zeros(model.dim());
            let out = model.cubic_nonlinearity(&z).unwrap();
            assert!(out.coeffs.iter().all(|c| *c == 0.0));
        }
    }

    #[test]
    fn allen_cahn_dominant_cubic_reduction() {
        // P_c F(phi sin) has sin-amplitude -(3/4) phi^3.
        let model = ac(16);
        for phi in [0.3, 1.0, 2.0] {
            let u = model.field_from_amplitudes(&[phi]);
            let f = model.cubic_nonlinearity(&u).unwrap();
            let fc = project_c(&f, &model.space);
            let amp = model.dominant_amplitudes(&fc)[0];
            assert!(
                (amp + 0.75 * phi * phi * phi).abs() < 1e-10,
                "phi = {phi}: {amp}"
            );
        }
    }

    #[test]
    fn allen_cahn_mode_three_cubic_against_quadrature() {
        // Full projection of -e_1^3 onto mode 3 vs a quadrature oracle.
        let model = ac(16);
        let u = SpectralField::unit(model.dim(), 0);
        let f = model.cubic_nonlinearity(&u).unwrap();
        let oracle = simpson(
            |y| {
                let e1 = (2.0 / PI).sqrt() * y.sin();
                let e3 = (2.0 / PI).sqrt() * (3.0 * y).sin();
                -e1.powi(3) * e3
            },
            0.0,
            PI,
            20_000,
        );
        assert!((f.coeffs[2] - oracle).abs() < 1e-10, "{} vs {oracle}", f.coeffs[2]);
    }

    #[test]
    fn trilinear_is_symmetric() {
        let mut rng = crate::stable::derive_rng(77, 0, 0);
        for model in [ac(8), sg(4)] {
            let rand_field = |rng: &mut rand_chacha::ChaCha8Rng| SpectralField {
                coeffs: (0..model.dim()).map(|_| rng.gen::<f64>() - 0.5).collect(),
            };
            let(u, v, w) = (rand_field(&mut rng), rand_field(&mut rng), rand_field(&mut rng));
            let a = model.trilinear(&u, &v, &w);
            let b = model.trilinear(&w, &u, &v);
            let c = model.trilinear(&v, &w, &u);
            let scale = theta_norm(&a, &model.space, 0.0).max(1e-12);
            for ((x, y), z) in a.coeffs.iter().zip(&b.coeffs).zip(&c.coeffs) {
                assert!((x - y).abs() / scale < 1e-12);
                assert!((x - z).abs() / scale < 1e-12);
            }
        }
    }

    #[test]
    fn dominant_cubic_is_dissipative() {
        let mut rng = crate::stable::derive_rng(78, 0, 0);
        for model in [ac(8), sg(4)] {
            for _ in 0..50 {
                let n = model.n_dominant();
                let phi: Vec<f64> = (0..n).map(|_| 2.0 * rng.gen::<f64>() - 1.0).collect();
                let psi: Vec<f64> = (0..n).map(|_| 2.0 * rng.gen::<f64>() - 1.0).collect();
                let u = model.field_from_amplitudes(&phi);
                let w = model.field_from_amplitudes(&psi);
                let fc = project_c(&model.trilinear(&u, &u, &u), &model.space);
                assert!(fc.dot(&u) <= 1e-12);
                let fuw = project_c(&model.trilinear(&u, &u, &w), &model.space);
                assert!(fuw.dot(&w) <= 1e-12);
            }
        }
    }

    #[test]
    fn surface_growth_fc_identity() {
        assert_eq!(surface_growth_fc(0.0, 0.0), (0.0, 0.0));
        assert_eq!(surface_growth_fc(1.0, 0.0), (-0.75, 0.0));
        // <F_c(u), u> = -(3 pi / 4) |gamma|^4 under the L2 pairing.
        let (g1, g2) = (1.0, 1.0);
        let (f1, f2) = surface_growth_fc(g1, g2);
        let pairing = PI * (f1 * g1 + f2 * g2); // |sin|^2 = |cos|^2 = pi
        let r2 = g1 * g1 + g2 * g2;
        assert!((pairing + 0.75 * PI * r2 * r2).abs() < 1e-12);
        assert!((pairing + 3.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn surface_growth_cubic_matches_reduced_form() {
        // The collocation evaluator restricted to the dominant plane must
        // reproduce the closed-form F_c.
        let model = sg(6);
        let (g1, g2) = (0.7, -0.4);
        let u = model.field_from_amplitudes(&[g1, g2]);
        let f = model.cubic_nonlinearity(&u).unwrap();
        let fc = model.dominant_amplitudes(&project_c(&f, &model.space));
        let (w1, w2) = surface_growth_fc(g1, g2);
        assert!((fc[0] - w1).abs() < 1e-10, "{} vs {w1}", fc[0]);
        assert!((fc[1] - w2).abs() < 1e-10, "{} vs {w2}", fc[1]);
    }

    #[test]
    fn g_of_zero_is_zero_and_linear() {
        let model = ac(8);
        let z = SpectralField::zeros(model.dim());
        for img in model.g_apply(&z) {
            assert!(img.coeffs.iter().all(|c| *c == 0.0));
        }
        let mut rng = crate::stable::derive_rng(79, 0, 0);
        let u = SpectralField {
            coeffs: (0..model.dim()).map(|_| rng.gen::<f64>() - 0.5).collect(),
        };
        let v = SpectralField {
            coeffs: (0..model.dim()).map(|_| rng.gen::<f64>() - 0.5).collect(),
        };
        let lin = model.g_apply(&u.scaled(2.0).add(&v.scaled(-3.0)));
        let gu = model.g_apply(&u);
        let gv = model.g_apply(&v);
        for ((l, a), b) in lin.iter().zip(&gu).zip(&gv) {
            let direct = a.scaled(2.0).add(&b.scaled(-3.0));
            for (x, y) in l.coeffs.iter().zip(&direct.coeffs) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn g_mode_image_against_quadrature() {
        // u = e_1, noise mode k = 1: mode-2 coefficient of beta_1 * e_1^2.
        let model = ac(8);
        let u = SpectralField::unit(model.dim(), 0);
        let images = model.g_apply(&u);
        let beta1 = model.cov.betas()[0];
        let oracle = beta1
            * simpson(
                |y| {
                    let e1 = (2.0 / PI).sqrt() * y.sin();
                    let e2 = (2.0 / PI).sqrt() * (2.0 * y).sin();
                    e1 * e1 * e2
                },
                0.0,
                PI,
                20_000,
            );
        assert!((images[0].coeffs[1] - oracle).abs() < 1e-10);
    }

    #[test]
    fn g_hilbert_schmidt_ratio_is_bounded() {
        let model = ac(16);
        let mut rng = crate::stable::derive_rng(80, 0, 0);
        let mut max_ratio: f64 = 0.0;
        for _ in 0..100 {
            let mut u = SpectralField {
                coeffs: (0..model.dim()).map(|_| rng.gen::<f64>() - 0.5).collect(),
            };
            let norm = theta_norm(&u, &model.space, 1.0);
            u = u.scaled(1.0 / norm.max(1e-300));
            let hs: f64 = model
                .g_apply(&u)
                .iter()
                .map(|img| theta_norm(img, &model.space, 1.0).powi(2))
                .sum();
            assert!(hs.is_finite());
            max_ratio = max_ratio.max(hs);
        }
        // Empirical l_r for the unit theta-ball; finite is the contract.
        assert!(max_ratio < 1e3, "HS ratio {max_ratio}");
    }

    #[test]
    fn amplitude_weights_sparsity_and_sum() {
        let model = ac(64);
        let (w, sum) = amplitude_noise_weights(&model.cov);
        assert_eq!(w[1], 0.0); // delta_2 = 0
        for (i, wk) in w.iter().enumerate() {
            if (i + 1) % 2 == 0 {
                assert_eq!(*wk, 0.0);
            }
        }
        // 128-term reference with tail bound below 1e-9.
        let reference: f64 = (1..=128)
            .map(|k| (k as f64).powf(-3.0) * delta_k(k))
            .sum();
        assert!((sum - reference).abs() < 1e-9, "{sum} vs {reference}");

        let zero = CovSpec::power_law(0.0, 3.0, &(1..=8).collect::<Vec<_>>()).unwrap();
        let (wz, sz) = amplitude_noise_weights(&zero);
        assert!(wz.iter().all(|w| *w == 0.0) && sz == 0.0);
    }

    #[test]
    fn allen_cahn_noise_projection_matches_delta() {
        let model = ac(32);
        for k in 1..=32 {
            let m = model.noise_projection(k - 1);
            let oracle = (2.0 / PI).powf(1.5)
                * simpson(|y| y.sin().powi(2) * (k as f64 * y).sin(), 0.0, PI, 40_000);
            assert!(
                (m[0][0] - oracle).abs() < 1e-10,
                "k = {k}: {} vs {oracle}",
                m[0][0]
            );
        }
    }

    #[test]
    fn surface_growth_noise_projection_structure() {
        // The reduced noise depends only on the constant and wavenumber-2
        // modes; verify against a quadrature oracle.
        let model = sg(6);
        let shapes: [fn(f64) -> f64; 2] = [f64::sin, f64::cos];
        for mode in 0..model.n_noise_modes() {
            let m = model.noise_projection(mode);
            for i in 0..2 {
                for j in 0..2 {
                    let oracle = simpson(
                        |x| shapes[i](x) * noise_eval(ModelKind::SurfaceGrowth, mode, x) * shapes[j](x),
                        0.0,
                        2.0 * PI,
                        40_000,
                    ) / PI;
                    assert!(
                        (m[i][j] - oracle).abs() < 1e-10,
                        "mode {mode} [{i}][{j}]: {} vs {oracle}",
                        m[i][j]
                    );
                }
            }
            // wavenumbers other than 0 and 2 contribute nothing
            let wavenumber = if mode == 0 { 0 } else { (mode + 1) / 2 };
            if wavenumber != 0 && wavenumber != 2 {
                for row in m {
                    for v in row {
                        assert!(v.abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn cov_validation() {
        assert!(ModelSpec::allen_cahn(0.4, 8, 1.0, 0.5).is_err());
        assert!(ModelSpec::allen_cahn(0.4, 8, 1.0, 1.2).is_err());
        assert!(ModelSpec::surface_growth(1.0, 4, 1.0, 2.0).is_err());
        assert!(ModelSpec::allen_cahn(0.4, 8, 0.0, 0.5).is_ok()); // noise off
    }
}
