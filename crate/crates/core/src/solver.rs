//! Time stepping of the full SPDE in mild form. One step applies the
//! explicit update and then the exact semigroup (Lawson exponential Euler);
//! a semi-implicit resolvent variant is available for cross-validation.
//! Stepping happens on the fast grid, one stable increment per slow step per
//! mode, so coupled runs share increments with the amplitude integrator
//! exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ModelSpec;
use crate::spectral::{project_c, project_s, theta_norm, SpectralField};
use crate::stable::{rescale_to_fast, sample_standard_increment, NoisePath, StableParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    ExponentialEuler,
    SemiImplicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt_slow: f64,
    pub epsilon: f64,
    pub t0: f64,
    pub blowup_cap: f64,
    pub scheme: Scheme,
    /// Independent substep increments per slow step; 1 disables substepping
    /// (coupled harness runs require 1 so both systems share increments).
    pub substeps: usize,
    pub nonlinearity: bool,
    pub linear_term: bool,
    pub noise: bool,
    /// Multiplier on the noise operator G; scales the stochastic term of the
    /// full equation exactly as the same factor scales the amplitude noise.
    pub noise_mult: f64,
}

impl SolverConfig {
    pub fn new(dt_slow: f64, epsilon: f64, t0: f64) -> Result<Self> {
        if dt_slow <= 0.0 || t0 <= 0.0 {
            return Err(Error::Config(format!(
                "need positive dt_slow and t0, got {dt_slow}, {t0}"
            )));
        }
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::EpsilonOutOfRange(epsilon));
        }
        Ok(Self {
            dt_slow,
            epsilon,
            t0,
            blowup_cap: 1e6,
            scheme: Scheme::ExponentialEuler,
            substeps: 1,
            nonlinearity: true,
            linear_term: true,
            noise: true,
            noise_mult: 1.0,
        })
    }

    /// Fast-grid step corresponding to one slow step.
    pub fn dt_fast(&self) -> f64 {
        self.dt_slow * self.epsilon.powi(-2)
    }

    pub fn n_steps(&self) -> usize {
        (self.t0 / self.dt_slow).round().max(1.0) as usize
    }
}

/// Full trajectory on the slow grid, with the `u = eps (a + b)` split stored
/// alongside the state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub u_series: Vec<SpectralField>,
    pub a_series: Vec<SpectralField>,
    pub b_series: Vec<SpectralField>,
    pub exploded_at: Option<f64>,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// One fast step of the mild formulation:
/// `u+ = e^{dt A}[u + dt (eps^2 L u + F(u)) + eps^{2/alpha} sum_k G(u) e_k dL_k]`.
/// `increments` are fast-grid per-mode increments. Signals blowup when the
/// post-step theta-norm exceeds the cap.
pub fn step_mild(
    u: &SpectralField,
    increments: &[f64],
    alpha: f64,
    model: &ModelSpec,
    config: &SolverConfig,
) -> Result<SpectralField> {
    let dt = config.dt_fast();
    let eps2 = config.epsilon * config.epsilon;
    let mut bracket = u.clone();

    if config.linear_term {
        for (b, (uk, lk)) in bracket
            .coeffs
            .iter_mut()
            .zip(u.coeffs.iter().zip(&model.ell))
        {
            *b += dt * eps2 * lk * uk;
        }
    }
    if config.nonlinearity {
        let f = model.cubic_nonlinearity(u)?;
        for (b, fk) in bracket.coeffs.iter_mut().zip(&f.coeffs) {
            *b += dt * fk;
        }
    }
    if config.noise {
        let g = model.noise_field(u, increments);
        let amp = config.noise_mult * config.epsilon.powf(2.0 / alpha);
        for (b, gk) in bracket.coeffs.iter_mut().zip(&g.coeffs) {
            *b += amp * gk;
        }
    }

    let next = SpectralField {
        coeffs: bracket
            .coeffs
            .iter()
            .zip(model.space.eigenvalues())
            .map(|(bk, lk)| match config.scheme {
                Scheme::ExponentialEuler => bk * (-lk * dt).exp(),
                Scheme::SemiImplicit => bk / (1.0 + lk * dt),
            })
            .collect(),
    };

    if !next.is_finite() {
        return Err(Error::NonFinite("mild step"));
    }
    let norm = theta_norm(&next, &model.space, model.space.theta());
    if norm > config.blowup_cap {
        return Err(Error::Blowup { norm, cap: config.blowup_cap, t: f64::NAN });
    }
    Ok(next)
}

/// Run the full SPDE over `[0, t0]` on the slow grid, consuming one shared
/// slow-grid noise path (rescaled to the fast grid internally). On blowup the
/// record is truncated and `exploded_at` set; the process never aborts.
pub fn simulate_full(
    u0: &SpectralField,
    path: &NoisePath,
    model: &ModelSpec,
    config: &SolverConfig,
) -> Result<TrajectoryRecord> {
    let n_steps = config.n_steps();
    if path.n_steps() < n_steps {
        return Err(Error::GridMismatch(format!(
            "path has {} steps, solver needs {n_steps}",
            path.n_steps()
        )));
    }
    if path.n_modes() != model.n_noise_modes() {
        return Err(Error::GridMismatch(format!(
            "path has {} modes, model expects {}",
            path.n_modes(),
            model.n_noise_modes()
        )));
    }
    let fast = rescale_to_fast(path, config.epsilon)?;
    let eps = config.epsilon;
    let alpha = path.alpha();

    let mut record = TrajectoryRecord {
        times: Vec::with_capacity(n_steps + 1),
        u_series: Vec::with_capacity(n_steps + 1),
        a_series: Vec::with_capacity(n_steps + 1),
        b_series: Vec::with_capacity(n_steps + 1),
        exploded_at: None,
    };
    let push = |rec: &mut TrajectoryRecord, t: f64, u: &SpectralField| {
        rec.times.push(t);
        rec.a_series.push(project_c(u, &model.space).scaled(1.0 / eps));
        rec.b_series.push(project_s(u, &model.space).scaled(1.0 / eps));
        rec.u_series.push(u.clone());
    };

    let mut u = u0.clone();
    push(&mut record, 0.0, &u);
    let mut incr = vec![0.0; path.n_modes()];
    for i in 0..n_steps {
        let t_next = (i + 1) as f64 * config.dt_slow;
        let result = if config.substeps <= 1 {
            for (slot, x) in incr.iter_mut().zip(fast.step_row(i)) {
                *slot = x;
            }
            step_mild(&u, &incr, alpha, model, config)
        } else {
            substep(&u, i, &fast, alpha, model, config)
        };
        match result {
            Ok(next) => {
                u = next;
                push(&mut record, t_next, &u);
            }
            Err(Error::Blowup { .. }) | Err(Error::NonFinite(_)) => {
                record.exploded_at = Some(t_next);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(record)
}

/// Substepped variant: fresh independent increments at the substep scale
/// (their sum is not constrained to the parent increment).
fn substep(
    u: &SpectralField,
    step: usize,
    fast: &NoisePath,
    alpha: f64,
    model: &ModelSpec,
    config: &SolverConfig,
) -> Result<SpectralField> {
    let m = config.substeps;
    let sub_config = SolverConfig {
        dt_slow: config.dt_slow / m as f64,
        ..*config
    };
    let params = StableParams::new(alpha)?;
    let scale = sub_config.dt_fast().powf(1.0 / alpha);
    let mut state = u.clone();
    let mut incr = vec![0.0; fast.n_modes()];
    for s in 0..m {
        for (k, slot) in incr.iter_mut().enumerate() {
            let mut rng = crate::stable::derive_rng(
                fast.seed() ^ 0x5b5e_9d1a_c0ff_ee00,
                k as u64,
                (step * m + s) as u64,
            );
            *slot = scale * sample_standard_increment(params, &mut rng);
        }
        state = step_mild(&state, &incr, alpha, model, &sub_config)?;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelSpec;
    use crate::stable::sample_path;

    fn ac(k_max: usize) -> ModelSpec {
        ModelSpec::allen_cahn(0.4, k_max, 1.0, 3.0).unwrap()
    }

    fn deterministic_config(dt: f64, eps: f64, t0: f64) -> SolverConfig {
        let mut c = SolverConfig::new(dt, eps, t0).unwrap();
        c.noise = false;
        c
    }

    #[test]
    fn pure_semigroup_step() {
        let model = ac(8);
        let mut config = deterministic_config(1.0, 1.0, 1.0);
        config.nonlinearity = false;
        config.linear_term = false;
        let u = SpectralField::unit(model.dim(), 1);
        let incr = vec![0.0; model.n_noise_modes()];
        let next = step_mild(&u, &incr, 1.5, &model, &config).unwrap();
        assert!((next.coeffs[1] - (-3.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn zero_increment_step_equals_deterministic_step() {
        let model = ac(8);
        let mut u = SpectralField::zeros(model.dim());
        u.coeffs[0] = 0.1;
        u.coeffs[2] = -0.05;
        let config = SolverConfig::new(0.01, 0.5, 1.0).unwrap();
        let zero_noise = vec![0.0; model.n_noise_modes()];
        let with = step_mild(&u, &zero_noise, 1.5, &model, &config).unwrap();
        let mut det_cfg = config;
        det_cfg.noise = false;
        let without = step_mild(&u, &zero_noise, 1.5, &model, &det_cfg).unwrap();
        assert_eq!(with, without);
    }

    #[test]
    fn dominant_step_matches_scalar_ode() {
        // Noise off, dominant initial data: the scheme reduces to explicit
        // Euler on phi' = gamma phi - 3/4 phi^3; compare against RK4.
        let model = ac(16);
        let config = deterministic_config(1e-5, 0.5, 1e-3);
        let phi0 = 0.6;
        let mut u = model.field_from_amplitudes(&[phi0]).scaled(config.epsilon);
        let incr = vec![0.0; model.n_noise_modes()];
        let mut phi = phi0;
        let f = |p: f64| model.gamma * p - 0.75 * p * p * p;
        for _ in 0..100 {
            u = step_mild(&u, &incr, 1.5, &model, &config).unwrap();
            let h = config.dt_slow;
            let k1 = f(phi);
            let k2 = f(phi + 0.5 * h * k1);
            let k3 = f(phi + 0.5 * h * k2);
            let k4 = f(phi + h * k3);
            phi += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        let amp = model.dominant_amplitudes(&u)[0] / config.epsilon;
        assert!((amp - phi).abs() < 1e-8, "{amp} vs {phi}");
    }

    #[test]
    fn zero_initial_data_stays_zero() {
        let params = StableParams::new(1.5).unwrap();
        let model = ac(8);
        let config = SolverConfig::new(0.01, 0.2, 0.5).unwrap();
        let path = sample_path(params, model.n_noise_modes(), config.n_steps(), 0.01, 33);
        let rec = simulate_full(&SpectralField::zeros(model.dim()), &path, &model, &config).unwrap();
        assert!(rec.exploded_at.is_none());
        for u in &rec.u_series {
            assert!(u.coeffs.iter().all(|c| *c == 0.0));
        }
    }

    #[test]
    fn split_reconstructs_state() {
        let params = StableParams::new(1.5).unwrap();
        let model = ac(8);
        let config = SolverConfig::new(0.01, 0.2, 0.5).unwrap();
        let path = sample_path(params, model.n_noise_modes(), config.n_steps(), 0.01, 34);
        let u0 = model.field_from_amplitudes(&[0.5]).scaled(config.epsilon);
        let rec = simulate_full(&u0, &path, &model, &config).unwrap();
        for ((u, a), b) in rec.u_series.iter().zip(&rec.a_series).zip(&rec.b_series) {
            let rebuilt = a.add(b).scaled(config.epsilon);
            for (x, y) in rebuilt.coeffs.iter().zip(&u.coeffs) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn linear_regime_matches_closed_form() {
        // F and noise off: n steps equal one semigroup application of size
        // n dt composed with the diagonal Euler factor per mode.
        let model = ac(8);
        let mut config = deterministic_config(0.002, 0.5, 0.02);
        config.nonlinearity = false;
        let dt = config.dt_fast();
        let eps2 = config.epsilon * config.epsilon;
        let mut u = SpectralField {
            coeffs: (0..model.dim()).map(|k| 1.0 / (k + 1) as f64).collect(),
        };
        let u0 = u.clone();
        let incr = vec![0.0; model.n_noise_modes()];
        let n = config.n_steps();
        for _ in 0..n {
            u = step_mild(&u, &incr, 1.5, &model, &config).unwrap();
        }
        for (k, (got, init)) in u.coeffs.iter().zip(&u0.coeffs).enumerate() {
            let lk = model.space.eigenvalue(k);
            let factor = (-lk * dt * n as f64).exp() * (1.0 + dt * eps2 * model.ell[k]).powi(n as i32);
            if dt * (lk + eps2 * model.ell[k].abs()) < 0.1 {
                let want = init * factor;
                assert!(
                    (got - want).abs() <= 1e-10 * want.abs().max(1e-30),
                    "mode {k}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn decay_regime_stays_small() {
        // gamma < 0, moderate noise: median sup-norm stays within a small
        // multiple of eps.
        let params = StableParams::new(1.5).unwrap();
        let model = ModelSpec::allen_cahn(-0.05, 16, 1.0, 3.0).unwrap();
        let config = SolverConfig::new(0.01, 0.2, 1.0).unwrap();
        let phi0 = 0.5;
        let u0 = model.field_from_amplitudes(&[phi0]).scaled(config.epsilon);
        let mut sups: Vec<f64> = (0..50)
            .map(|p| {
                let path =
                    sample_path(params, model.n_noise_modes(), config.n_steps(), 0.01, 500 + p);
                let rec = simulate_full(&u0, &path, &model, &config).unwrap();
                rec.u_series
                    .iter()
                    .map(|u| theta_norm(u, &model.space, 1.0))
                    .fold(0.0f64, f64::max)
            })
            .collect();
        sups.sort_by(f64::total_cmp);
        let median = sups[25];
        assert!(
            median < 3.0 * config.epsilon * (phi0 + 1.0),
            "median sup norm {median}"
        );
    }

    #[test]
    fn blowup_is_flagged_not_fatal() {
        let params = StableParams::new(1.5).unwrap();
        let model = ModelSpec::allen_cahn(5.0, 8, 1.0, 3.0).unwrap();
        let mut config = SolverConfig::new(0.05, 0.9, 5.0).unwrap();
        config.blowup_cap = 1e-4; // force the flag
        let path = sample_path(params, model.n_noise_modes(), config.n_steps(), 0.05, 35);
        let u0 = model.field_from_amplitudes(&[1.0]);
        let rec = simulate_full(&u0, &path, &model, &config).unwrap();
        assert!(rec.exploded_at.is_some());
        assert_eq!(rec.times.len(), rec.u_series.len());
    }

    #[test]
    fn schemes_agree_on_deterministic_runs() {
        let model = ac(8);
        let mut config = deterministic_config(1e-4, 0.5, 0.05);
        let u0 = model.field_from_amplitudes(&[0.5]).scaled(config.epsilon);
        let params = StableParams::new(1.5).unwrap();
        let path = sample_path(params, model.n_noise_modes(), config.n_steps(), 1e-4, 36);
        let a = simulate_full(&u0, &path, &model, &config).unwrap();
        config.scheme = Scheme::SemiImplicit;
        let b = simulate_full(&u0, &path, &model, &config).unwrap();
        let ua = a.u_series.last().unwrap();
        let ub = b.u_series.last().unwrap();
        for (x, y) in ua.coeffs.iter().zip(&ub.coeffs) {
            assert!((x - y).abs() < 1e-6, "{x} vs {y}");
        }
    }
}
