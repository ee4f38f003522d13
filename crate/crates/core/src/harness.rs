//! Error harness: coupled full/amplitude runs on a shared noise path,
//! residual decomposition, stopping times, and the epsilon sweep that probes
//! the approximation-error scaling.
//!
//! Conventions: the full solution is written `u = eps(a + b)` with `a` the
//! dominant part and `b` the stable remainder (both in slow variables). The
//! residuals are `R_c = eps (a - phi)` and `R_s = eps b`, measured in the
//! theta-norm of the model's state space. Exceedance thresholds are
//! `eps^{2 - 19 kappa}` for `sup R_c` and `eps^{3 - 7 kappa}` for the L^p-
//! in-time norm of `R_s`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amplitude::{step_amplitude, AmplitudeConfig, AmplitudeState};
use crate::error::{Error, Result};
use crate::models::ModelSpec;
use crate::solver::{simulate_full, SolverConfig, TrajectoryRecord};
use crate::spectral::{theta_norm, SpectralField};
use crate::stable::{sample_path, NoisePath, StableParams};
use crate::stats::{binomial_se, loglog_slope, median, wilson_interval};

/// Upper bound (exclusive) for the exceedance exponent parameter kappa.
pub const KAPPA_MAX: f64 = 2.0 / 19.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HarnessConfig {
    pub kappa: f64,
    /// Moment order for the time-integrated stable residual; must sit in
    /// `(1, alpha)`.
    pub p: f64,
    pub t0: f64,
    pub dt_slow: f64,
    pub n_paths: usize,
    pub noise_mult: f64,
    /// Initial dominant amplitude(s); `u(0) = eps * phi0 . s` with no stable
    /// component, and the amplitude equation starts from the same `phi0`.
    pub phi0: Vec<f64>,
    pub seed: u64,
}

impl HarnessConfig {
    pub fn new(kappa: f64, p: f64, alpha: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa < KAPPA_MAX) {
            return Err(Error::Config(format!(
                "kappa must lie in (0, 2/19), got {kappa}"
            )));
        }
        if !(p > 1.0 && p < alpha) {
            return Err(Error::Config(format!(
                "p must lie in (1, alpha) = (1, {alpha}), got {p}"
            )));
        }
        Ok(Self {
            kappa,
            p,
            t0: 1.0,
            dt_slow: 1e-3,
            n_paths: 200,
            noise_mult: 1.0,
            phi0: vec![0.5],
            seed: 0,
        })
    }

    /// Default moment order for a given alpha: 1.2, pulled down to the
    /// midpoint `(1 + alpha) / 2` when alpha leaves too little room above 1.
    pub fn default_p(alpha: f64) -> f64 {
        1.2f64.min((1.0 + alpha) / 2.0)
    }

    pub fn n_steps(&self) -> usize {
        (self.t0 / self.dt_slow).round() as usize
    }
}

/// A full SPDE run and an amplitude-equation run driven by the same slow
/// noise path.
#[derive(Debug, Clone)]
pub struct CoupledRun {
    pub full: TrajectoryRecord,
    /// Amplitude trajectory on the same slow grid as `full.times` (truncated
    /// with it on blowup of either system).
    pub phi_series: Vec<Vec<f64>>,
    pub epsilon: f64,
    /// True when `|u(0)|_theta <= eps^{1 - kappa/2}`, the regime the error
    /// bounds are calibrated for.
    pub initial_in_range: bool,
}

/// Toggles for cross-checks: both systems drop the same terms.
#[derive(Debug, Clone, Copy)]
pub struct CoupledOptions {
    pub noise: bool,
    pub nonlinearity: bool,
    pub taming: bool,
}

impl Default for CoupledOptions {
    fn default() -> Self {
        Self { noise: true, nonlinearity: true, taming: true }
    }
}

/// Run the full solver and the amplitude integrator over `[0, t0]` from
/// `u(0) = eps * phi0 . s`, sharing one slow-grid noise path.
pub fn coupled_run(
    model: &ModelSpec,
    alpha: f64,
    epsilon: f64,
    config: &HarnessConfig,
    options: CoupledOptions,
    path_seed: u64,
) -> Result<CoupledRun> {
    let params = StableParams::new(alpha)?;
    let n_steps = config.n_steps();
    let path = sample_path(
        params,
        model.n_noise_modes(),
        n_steps,
        config.dt_slow,
        path_seed,
    );
    coupled_run_on_path(model, epsilon, config, options, &path)
}

/// Same as [`coupled_run`] but consuming a caller-supplied path (for tests
/// that need hand-built increments).
pub fn coupled_run_on_path(
    model: &ModelSpec,
    epsilon: f64,
    config: &HarnessConfig,
    options: CoupledOptions,
    path: &NoisePath,
) -> Result<CoupledRun> {
    if config.phi0.len() != model.n_dominant() {
        return Err(Error::DimensionMismatch {
            got: config.phi0.len(),
            want: model.n_dominant(),
        });
    }
    let mut solver = SolverConfig::new(config.dt_slow, epsilon, config.t0)?;
    solver.noise = options.noise;
    solver.nonlinearity = options.nonlinearity;
    solver.noise_mult = config.noise_mult;

    let u0 = model.field_from_amplitudes(&config.phi0).scaled(epsilon);
    let full = simulate_full(&u0, path, model, &solver)?;

    let amp_config = AmplitudeConfig {
        dt: config.dt_slow,
        noise_mult: if options.noise { config.noise_mult } else { 0.0 },
        taming: options.taming,
        cubic: options.nonlinearity,
    };
    let mut phi_series = Vec::with_capacity(full.len());
    let mut state = AmplitudeState::new(config.phi0.clone());
    phi_series.push(state.phi.clone());
    let mut incr = vec![0.0; path.n_modes()];
    for i in 0..full.len().saturating_sub(1) {
        for (slot, x) in incr.iter_mut().zip(path.step_row(i)) {
            *slot = x;
        }
        match step_amplitude(&state, &incr, model, &amp_config) {
            Ok(next) => {
                state = next;
                phi_series.push(state.phi.clone());
            }
            Err(Error::NonFinite(_)) => break,
            Err(e) => return Err(e),
        }
    }

    let kappa = config.kappa;
    let bound = epsilon.powf(1.0 - kappa / 2.0);
    let initial_in_range = theta_norm(&u0, &model.space, model.space.theta()) <= bound;
    Ok(CoupledRun { full, phi_series, epsilon, initial_in_range })
}

/// Residual norms on the common slow grid (truncated to the shorter of the
/// two trajectories when one blew up).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualSeries {
    pub times: Vec<f64>,
    /// `|R_c(T)|_theta = eps |a(T) - phi(T)|_theta`.
    pub rc: Vec<f64>,
    /// `|R_s(T)|_theta = eps |b(T)|_theta`.
    pub rs: Vec<f64>,
}

impl ResidualSeries {
    pub fn sup_rc(&self) -> f64 {
        self.rc.iter().copied().fold(0.0, f64::max)
    }

    pub fn sup_rs(&self) -> f64 {
        self.rs.iter().copied().fold(0.0, f64::max)
    }

    /// Trapezoid `( int_0^{T0} |R_s|_theta^p dT )^{1/p}`.
    pub fn lp_rs(&self, p: f64) -> f64 {
        if self.times.len() < 2 {
            return 0.0;
        }
        let mut acc = 0.0;
        for i in 1..self.times.len() {
            let dt = self.times[i] - self.times[i - 1];
            acc += 0.5 * dt * (self.rs[i - 1].powf(p) + self.rs[i].powf(p));
        }
        acc.powf(1.0 / p)
    }
}

/// Compute residual norms for a coupled run.
pub fn residual(run: &CoupledRun, model: &ModelSpec) -> ResidualSeries {
    let n = run.full.len().min(run.phi_series.len());
    let eps = run.epsilon;
    let theta = model.space.theta();
    let mut rc = Vec::with_capacity(n);
    let mut rs = Vec::with_capacity(n);
    for i in 0..n {
        let phi_field = model.field_from_amplitudes(&run.phi_series[i]);
        let diff = run.full.a_series[i].sub(&phi_field);
        rc.push(eps * theta_norm(&diff, &model.space, theta));
        rs.push(eps * theta_norm(&run.full.b_series[i], &model.space, theta));
    }
    ResidualSeries { times: run.full.times[..n].to_vec(), rc, rs }
}

/// First grid time where `|a|_theta > eps^{-kappa}` or
/// `|b|_theta > eps^{-2 kappa}`; the horizon itself if neither is hit.
pub fn stopping_time(
    record: &TrajectoryRecord,
    model: &ModelSpec,
    epsilon: f64,
    kappa: f64,
) -> f64 {
    let theta = model.space.theta();
    let a_cap = epsilon.powf(-kappa);
    let b_cap = epsilon.powf(-2.0 * kappa);
    for i in 0..record.len() {
        let na = theta_norm(&record.a_series[i], &model.space, theta);
        let nb = theta_norm(&record.b_series[i], &model.space, theta);
        if na > a_cap || nb > b_cap {
            return record.times[i];
        }
    }
    match record.exploded_at {
        Some(t) => t,
        None => *record.times.last().unwrap_or(&0.0),
    }
}

/// Additive decomposition of the stable part: at each grid time
/// `b = Q + I + J + K` where `Q` carries the initial condition, `I` the slow
/// linear forcing, `J` the nonlinearity, and `K` the stochastic convolution.
/// Each component is pushed through the same per-step propagator as the
/// solver, so the sum telescopes to `b` up to roundoff.
#[derive(Debug, Clone)]
pub struct BDecomposition {
    pub times: Vec<f64>,
    pub q: Vec<SpectralField>,
    pub i: Vec<SpectralField>,
    pub j: Vec<SpectralField>,
    pub k: Vec<SpectralField>,
}

impl BDecomposition {
    /// Max over the grid of `|(Q+I+J+K) - b|_theta / (1 + |b|_theta)`.
    pub fn reconstruction_error(&self, record: &TrajectoryRecord, model: &ModelSpec) -> f64 {
        let theta = model.space.theta();
        let mut worst: f64 = 0.0;
        for idx in 0..self.times.len() {
            let sum = self.q[idx]
                .add(&self.i[idx])
                .add(&self.j[idx])
                .add(&self.k[idx]);
            let b = &record.b_series[idx];
            let err = theta_norm(&sum.sub(b), &model.space, theta);
            worst = worst.max(err / (1.0 + theta_norm(b, &model.space, theta)));
        }
        worst
    }
}

/// Rebuild `b`'s mild-form components from a recorded trajectory and the
/// noise path that produced it. Requires the same solver configuration
/// (single substep) so the per-step arithmetic matches exactly.
pub fn decompose_b(
    record: &TrajectoryRecord,
    path: &NoisePath,
    model: &ModelSpec,
    config: &SolverConfig,
) -> Result<BDecomposition> {
    if config.substeps > 1 {
        return Err(Error::Config(
            "decomposition requires substeps = 1".into(),
        ));
    }
    let fast = crate::stable::rescale_to_fast(path, config.epsilon)?;
    let dt = config.dt_fast();
    let eps = config.epsilon;
    let eps2 = eps * eps;
    let alpha = path.alpha();
    let dim = model.dim();
    let nd = model.n_dominant();

    let propagate = |h: &SpectralField| -> SpectralField {
        SpectralField {
            coeffs: h
                .coeffs
                .iter()
                .zip(model.space.eigenvalues())
                .map(|(hk, lk)| match config.scheme {
                    crate::solver::Scheme::ExponentialEuler => hk * (-lk * dt).exp(),
                    crate::solver::Scheme::SemiImplicit => hk / (1.0 + lk * dt),
                })
                .collect(),
        }
    };

    let n = record.len();
    let mut out = BDecomposition {
        times: record.times.clone(),
        q: Vec::with_capacity(n),
        i: Vec::with_capacity(n),
        j: Vec::with_capacity(n),
        k: Vec::with_capacity(n),
    };
    let mut q = record.b_series[0].clone();
    let mut ii = SpectralField::zeros(dim);
    let mut jj = SpectralField::zeros(dim);
    let mut kk = SpectralField::zeros(dim);
    out.q.push(q.clone());
    out.i.push(ii.clone());
    out.j.push(jj.clone());
    out.k.push(kk.clone());

    let mut incr = vec![0.0; fast.n_modes()];
    let noise_amp = config.noise_mult * eps.powf(2.0 / alpha) / eps;
    for step in 0..n - 1 {
        let u = &record.u_series[step];
        let b = &record.b_series[step];

        // Mirror the solver's bracket, divided by eps and restricted to the
        // stable modes; the dominant entries of each component stay zero.
        if config.linear_term {
            for k in nd..dim {
                ii.coeffs[k] += dt * eps2 * model.ell[k] * b.coeffs[k];
            }
        }
        if config.nonlinearity {
            let f = model.cubic_nonlinearity(u)?;
            for k in nd..dim {
                jj.coeffs[k] += dt * f.coeffs[k] / eps;
            }
        }
        if config.noise {
            for (slot, x) in incr.iter_mut().zip(fast.step_row(step)) {
                *slot = x;
            }
            let g = model.noise_field(u, &incr);
            for k in nd..dim {
                kk.coeffs[k] += noise_amp * g.coeffs[k];
            }
        }
        q = propagate(&q);
        ii = propagate(&ii);
        jj = propagate(&jj);
        kk = propagate(&kk);
        out.q.push(q.clone());
        out.i.push(ii.clone());
        out.j.push(jj.clone());
        out.k.push(kk.clone());
    }
    Ok(out)
}

/// Per-epsilon sweep statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpsilonCell {
    pub epsilon: f64,
    pub n_paths: usize,
    pub n_exploded: usize,
    pub rc_threshold: f64,
    pub rs_threshold: f64,
    pub rc_exceed: usize,
    pub rs_exceed: usize,
    pub rc_prob: f64,
    pub rs_prob: f64,
    /// 95% Wilson intervals for the exceedance probabilities.
    pub rc_wilson: (f64, f64),
    pub rs_wilson: (f64, f64),
    pub median_sup_rc: f64,
    pub median_lp_rs: f64,
    /// Fraction of paths whose norm-cap stopping time fires before the
    /// horizon.
    pub early_stop_frac: f64,
    pub median_tau: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub alpha: f64,
    pub kappa: f64,
    pub p: f64,
    pub t0: f64,
    pub dt_slow: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub cells: Vec<EpsilonCell>,
    /// Log-log slope of `median sup R_c` against epsilon; `None` when fewer
    /// than two usable cells.
    pub rc_slope: Option<f64>,
}

impl SweepReport {
    fn cells_desc(&self) -> Vec<&EpsilonCell> {
        let mut cells: Vec<&EpsilonCell> = self.cells.iter().collect();
        cells.sort_by(|a, b| b.epsilon.partial_cmp(&a.epsilon).unwrap());
        cells
    }

    /// Whether the two exceedance probabilities are non-increasing as epsilon
    /// decreases, with one binomial standard error of slack per comparison.
    pub fn exceedance_non_increasing(&self) -> (bool, bool) {
        let cells = self.cells_desc();
        let ok = |probs: &dyn Fn(&EpsilonCell) -> (usize, f64)| {
            cells.windows(2).all(|w| {
                let (prev_k, prev_p) = probs(w[0]);
                let (next_k, next_p) = probs(w[1]);
                let se = binomial_se(prev_k, w[0].n_paths)
                    .max(binomial_se(next_k, w[1].n_paths));
                next_p <= prev_p + se
            })
        };
        (
            ok(&|c: &EpsilonCell| (c.rc_exceed, c.rc_prob)),
            ok(&|c: &EpsilonCell| (c.rs_exceed, c.rs_prob)),
        )
    }

    /// Whether the fraction of paths that stop before the horizon is
    /// non-increasing as epsilon decreases, within one binomial SE.
    pub fn early_stop_non_increasing(&self) -> bool {
        let cells = self.cells_desc();
        cells.windows(2).all(|w| {
            let prev_k = (w[0].early_stop_frac * w[0].n_paths as f64).round() as usize;
            let next_k = (w[1].early_stop_frac * w[1].n_paths as f64).round() as usize;
            let se = binomial_se(prev_k, w[0].n_paths).max(binomial_se(next_k, w[1].n_paths));
            w[1].early_stop_frac <= w[0].early_stop_frac + se
        })
    }
}

/// Run `n_paths` coupled runs per epsilon and tabulate residual exceedances,
/// medians, and stopping times. Deterministic in `config.seed`; paths are
/// independent across epsilons and path indices.
pub fn epsilon_sweep(
    model: &ModelSpec,
    alpha: f64,
    epsilons: &[f64],
    config: &HarnessConfig,
) -> Result<SweepReport> {
    let params = StableParams::new(alpha)?;
    if epsilons.is_empty() {
        return Err(Error::Config("empty epsilon list".into()));
    }
    let mut cells = Vec::with_capacity(epsilons.len());
    for (ei, &eps) in epsilons.iter().enumerate() {
        let cell = sweep_cell(model, params, eps, ei as u64, config)?;
        cells.push(cell);
    }

    let usable: Vec<(f64, f64)> = cells
        .iter()
        .filter(|c| c.median_sup_rc > 0.0)
        .map(|c| (c.epsilon, c.median_sup_rc))
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = usable.into_iter().unzip();
    let rc_slope = loglog_slope(&xs, &ys);

    Ok(SweepReport {
        alpha,
        kappa: config.kappa,
        p: config.p,
        t0: config.t0,
        dt_slow: config.dt_slow,
        n_paths: config.n_paths,
        seed: config.seed,
        cells,
        rc_slope,
    })
}

/// One sweep cell: `n_paths` coupled runs at a single epsilon. `eps_index`
/// keys the seed stream, so cells can be recomputed independently (and
/// resumed) without disturbing each other.
pub fn sweep_cell(
    model: &ModelSpec,
    params: StableParams,
    epsilon: f64,
    eps_index: u64,
    config: &HarnessConfig,
) -> Result<EpsilonCell> {
    let kappa = config.kappa;
    let rc_threshold = epsilon.powf(2.0 - 19.0 * kappa);
    let rs_threshold = epsilon.powf(3.0 - 7.0 * kappa);
    let n_steps = config.n_steps();

    struct PathOut {
        sup_rc: f64,
        lp_rs: f64,
        tau: f64,
        exploded: bool,
    }

    let outs: Vec<Result<PathOut>> = (0..config.n_paths)
        .into_par_iter()
        .map(|pi| {
            let path_seed = config
                .seed
                .wrapping_add(eps_index.wrapping_mul(0xd1b5_4a32_d192_ed03))
                .wrapping_add((pi as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let path = sample_path(
                params,
                model.n_noise_modes(),
                n_steps,
                config.dt_slow,
                path_seed,
            );
            let run = coupled_run_on_path(
                model,
                epsilon,
                config,
                CoupledOptions::default(),
                &path,
            )?;
            let res = residual(&run, model);
            Ok(PathOut {
                sup_rc: res.sup_rc(),
                lp_rs: res.lp_rs(config.p),
                tau: stopping_time(&run.full, model, epsilon, kappa),
                exploded: run.full.exploded_at.is_some(),
            })
        })
        .collect();

    let mut sup_rcs = Vec::with_capacity(config.n_paths);
    let mut lp_rss = Vec::with_capacity(config.n_paths);
    let mut taus = Vec::with_capacity(config.n_paths);
    let mut rc_exceed = 0;
    let mut rs_exceed = 0;
    let mut n_exploded = 0;
    let mut early = 0;
    for out in outs {
        let o = out?;
        if o.exploded {
            n_exploded += 1;
        }
        // Blown-up paths count as exceedances: the residual certainly left
        // the small band.
        if o.exploded || o.sup_rc >= rc_threshold {
            rc_exceed += 1;
        }
        if o.exploded || o.lp_rs >= rs_threshold {
            rs_exceed += 1;
        }
        if o.tau < config.t0 - 0.5 * config.dt_slow {
            early += 1;
        }
        sup_rcs.push(o.sup_rc);
        lp_rss.push(o.lp_rs);
        taus.push(o.tau);
    }
    let n = config.n_paths;
    Ok(EpsilonCell {
        epsilon,
        n_paths: n,
        n_exploded,
        rc_threshold,
        rs_threshold,
        rc_exceed,
        rs_exceed,
        rc_prob: rc_exceed as f64 / n as f64,
        rs_prob: rs_exceed as f64 / n as f64,
        rc_wilson: wilson_interval(rc_exceed, n, 1.96),
        rs_wilson: wilson_interval(rs_exceed, n, 1.96),
        median_sup_rc: median(&sup_rcs),
        median_lp_rs: median(&lp_rss),
        early_stop_frac: early as f64 / n as f64,
        median_tau: median(&taus),
    })
}

/// Empirical check of `E sup_{t<=T} |c L(t)|^p ~ T^{p/alpha}`: the ratio of
/// the estimate at `2T` to the estimate at `T` should approach `2^{p/alpha}`.
/// Both horizons are read off the same sample paths, which cancels most of
/// the heavy-tail sampling noise in the ratio.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentScaling {
    pub alpha: f64,
    pub p: f64,
    pub t_base: f64,
    pub n_samples: usize,
    pub mean_sup_t: f64,
    pub mean_sup_2t: f64,
    pub ratio: f64,
    pub expected: f64,
}

pub fn moment_scaling_check(
    alpha: f64,
    p: f64,
    scale: f64,
    t_base: f64,
    n_samples: usize,
    steps_per_t: usize,
    seed: u64,
) -> Result<MomentScaling> {
    let params = StableParams::new(alpha)?;
    if !(p > 0.0 && p < alpha) {
        return Err(Error::Config(format!(
            "moment order p must lie in (0, alpha) = (0, {alpha}), got {p}"
        )));
    }
    if t_base <= 0.0 {
        return Err(Error::NegativeTime(t_base));
    }
    let dt = t_base / steps_per_t as f64;
    let n_steps = 2 * steps_per_t;
    let step_scale = scale.abs() * dt.powf(1.0 / alpha);

    let sums: Vec<(f64, f64)> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = crate::stable::derive_rng(seed, 0, i as u64);
            let mut level = 0.0f64;
            let mut sup_t = 0.0f64;
            let mut sup_2t = 0.0f64;
            for s in 0..n_steps {
                level += step_scale * crate::stable::sample_standard_increment(params, &mut rng);
                let a = level.abs();
                if s < steps_per_t {
                    sup_t = sup_t.max(a);
                }
                sup_2t = sup_2t.max(a);
            }
            (sup_t.powf(p), sup_2t.powf(p))
        })
        .collect();

    let n = n_samples as f64;
    let mean_sup_t = sums.iter().map(|s| s.0).sum::<f64>() / n;
    let mean_sup_2t = sums.iter().map(|s| s.1).sum::<f64>() / n;
    let ratio = if scale == 0.0 {
        f64::NAN
    } else {
        mean_sup_2t / mean_sup_t
    };
    Ok(MomentScaling {
        alpha,
        p,
        t_base,
        n_samples,
        mean_sup_t,
        mean_sup_2t,
        ratio,
        expected: 2.0f64.powf(p / alpha),
    })
}

// For the degenerate zero-integrand case callers should check the sums, not
// the ratio.
impl MomentScaling {
    pub fn within(&self, rel_tol: f64) -> bool {
        self.ratio.is_finite() && (self.ratio / self.expected - 1.0).abs() <= rel_tol
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::Scheme;
    use crate::stable::rescale_to_slow;

    fn ac(gamma: f64) -> ModelSpec {
        ModelSpec::allen_cahn(gamma, 16, 1.0, 2.0).unwrap()
    }

    fn base_config(alpha: f64) -> HarnessConfig {
        let mut c = HarnessConfig::new(0.05, HarnessConfig::default_p(alpha), alpha).unwrap();
        c.dt_slow = 1e-2;
        c.t0 = 0.5;
        c.n_paths = 32;
        c
    }

    #[test]
    fn config_validation() {
        assert!(HarnessConfig::new(0.05, 1.2, 1.5).is_ok());
        assert!(HarnessConfig::new(0.0, 1.2, 1.5).is_err());
        assert!(HarnessConfig::new(2.0 / 19.0, 1.2, 1.5).is_err());
        assert!(HarnessConfig::new(0.05, 1.0, 1.5).is_err());
        assert!(HarnessConfig::new(0.05, 1.5, 1.5).is_err());
        assert!(HarnessConfig::default_p(1.9) == 1.2);
        let p = HarnessConfig::default_p(1.1);
        assert!(p > 1.0 && p < 1.1 && (p - 1.05).abs() < 1e-15);
    }

    #[test]
    fn amplitude_matches_linearized_run() {
        // With the cubic and the noise off and taming disabled, both systems
        // reduce to the same scalar discrete map on the dominant mode.
        let model = ac(0.4);
        let mut config = base_config(1.5);
        config.phi0 = vec![0.3];
        let options = CoupledOptions { noise: false, nonlinearity: false, taming: false };
        let run = coupled_run(&model, 1.5, 0.1, &config, options, 7).unwrap();
        let res = residual(&run, &model);
        assert!(run.initial_in_range);
        assert!(res.sup_rc() < 1e-8, "sup rc = {}", res.sup_rc());
        assert_eq!(res.sup_rs(), 0.0);
    }

    #[test]
    fn residual_vanishes_when_systems_agree() {
        // phi0 = 0 is a fixed point of both systems absent noise.
        let model = ac(0.4);
        let mut config = base_config(1.5);
        config.phi0 = vec![0.0];
        let options = CoupledOptions { noise: false, nonlinearity: true, taming: true };
        let run = coupled_run(&model, 1.5, 0.1, &config, options, 3).unwrap();
        let res = residual(&run, &model);
        assert_eq!(res.sup_rc(), 0.0);
        assert_eq!(res.lp_rs(1.2), 0.0);
    }

    #[test]
    fn pythagoras_for_the_residual() {
        // R_c and R_s live on orthogonal mode ranges, so the squared norms of
        // the full residual split exactly.
        let model = ac(0.4);
        let config = base_config(1.5);
        let run = coupled_run(&model, 1.5, 0.2, &config, CoupledOptions::default(), 11).unwrap();
        let res = residual(&run, &model);
        let theta = model.space.theta();
        for i in (0..run.full.len()).step_by(13) {
            let phi_field = model.field_from_amplitudes(&run.phi_series[i]);
            let r = run.full.u_series[i].sub(&phi_field.scaled(run.epsilon));
            let total = theta_norm(&r, &model.space, theta);
            let split = (res.rc[i].powi(2) + res.rs[i].powi(2)).sqrt();
            assert!((total - split).abs() <= 1e-12 * (1.0 + total));
        }
    }

    #[test]
    fn stopping_time_hits_horizon_on_calm_paths() {
        let model = ac(-0.5);
        let mut config = base_config(1.8);
        config.phi0 = vec![0.2];
        let run = coupled_run(&model, 1.8, 0.1, &config, CoupledOptions::default(), 5).unwrap();
        let tau = stopping_time(&run.full, &model, 0.1, config.kappa);
        assert_eq!(tau, config.t0);
    }

    #[test]
    fn stopping_time_fires_on_large_states() {
        let model = ac(0.4);
        let config = base_config(1.5);
        // Fabricate a record whose dominant amplitude breaches eps^{-kappa}.
        let mut run = coupled_run(&model, 1.5, 0.1, &config, CoupledOptions::default(), 9).unwrap();
        let big = model.field_from_amplitudes(&[100.0]);
        let idx = run.full.len() / 2;
        run.full.a_series[idx] = big;
        let tau = stopping_time(&run.full, &model, 0.1, config.kappa);
        assert!((tau - run.full.times[idx]).abs() < 1e-12);
    }

    #[test]
    fn decomposition_telescopes() {
        let model = ac(0.4);
        let alpha = 1.5;
        let config = base_config(alpha);
        let params = StableParams::new(alpha).unwrap();
        let path = sample_path(params, model.n_noise_modes(), config.n_steps(), config.dt_slow, 21);
        let mut solver = SolverConfig::new(config.dt_slow, 0.2, config.t0).unwrap();
        // Start from a state with a stable component so Q is nontrivial.
        let mut u0 = model.field_from_amplitudes(&[0.4]).scaled(0.2);
        u0.coeffs[2] = 0.05;
        u0.coeffs[4] = -0.02;
        let record = simulate_full(&u0, &path, &model, &solver).unwrap();
        let dec = decompose_b(&record, &path, &model, &solver).unwrap();
        let err = dec.reconstruction_error(&record, &model);
        assert!(err < 1e-10, "reconstruction error {err}");
        // Components are genuinely nonzero.
        let theta = model.space.theta();
        let last = dec.times.len() - 1;
        assert!(theta_norm(&dec.j[last], &model.space, theta) > 0.0);
        assert!(theta_norm(&dec.k[last], &model.space, theta) > 0.0);

        solver.scheme = Scheme::SemiImplicit;
        let record = simulate_full(&u0, &path, &model, &solver).unwrap();
        let dec = decompose_b(&record, &path, &model, &solver).unwrap();
        assert!(dec.reconstruction_error(&record, &model) < 1e-10);
    }

    #[test]
    fn decomposition_components_isolate_terms() {
        // With the noise switched off K stays zero; with the nonlinearity off
        // J stays zero.
        let model = ac(0.4);
        let config = base_config(1.5);
        let params = StableParams::new(1.5).unwrap();
        let path = sample_path(params, model.n_noise_modes(), config.n_steps(), config.dt_slow, 4);
        let mut u0 = model.field_from_amplitudes(&[0.4]).scaled(0.2);
        u0.coeffs[3] = 0.05;

        let mut solver = SolverConfig::new(config.dt_slow, 0.2, config.t0).unwrap();
        solver.noise = false;
        let record = simulate_full(&u0, &path, &model, &solver).unwrap();
        let dec = decompose_b(&record, &path, &model, &solver).unwrap();
        assert!(dec.k.iter().all(|f| f.coeffs.iter().all(|c| *c == 0.0)));
        assert!(dec.reconstruction_error(&record, &model) < 1e-10);

        let mut solver = SolverConfig::new(config.dt_slow, 0.2, config.t0).unwrap();
        solver.nonlinearity = false;
        let record = simulate_full(&u0, &path, &model, &solver).unwrap();
        let dec = decompose_b(&record, &path, &model, &solver).unwrap();
        assert!(dec.j.iter().all(|f| f.coeffs.iter().all(|c| *c == 0.0)));
        assert!(dec.reconstruction_error(&record, &model) < 1e-10);
    }

    #[test]
    fn sweep_is_deterministic_and_sane() {
        let model = ac(0.4);
        let mut config = base_config(1.5);
        config.n_paths = 16;
        config.t0 = 0.25;
        let eps = [0.4, 0.2];
        let r1 = epsilon_sweep(&model, 1.5, &eps, &config).unwrap();
        let r2 = epsilon_sweep(&model, 1.5, &eps, &config).unwrap();
        assert_eq!(
            serde_json::to_string(&r1).unwrap(),
            serde_json::to_string(&r2).unwrap()
        );
        for cell in &r1.cells {
            assert!(cell.rc_prob >= cell.rc_wilson.0 - 1e-12);
            assert!(cell.rc_prob <= cell.rc_wilson.1 + 1e-12);
            assert!(cell.median_sup_rc.is_finite());
            assert!(cell.median_tau <= config.t0 + 1e-12);
        }
    }

    #[test]
    fn sweep_residual_medians_shrink_with_epsilon() {
        let model = ac(0.4);
        let mut config = base_config(1.5);
        config.n_paths = 24;
        config.t0 = 0.25;
        let eps = [0.4, 0.2, 0.1];
        let report = epsilon_sweep(&model, 1.5, &eps, &config).unwrap();
        let meds: Vec<f64> = report.cells.iter().map(|c| c.median_sup_rc).collect();
        assert!(meds[0] > meds[1] && meds[1] > meds[2], "medians {meds:?}");
        let slope = report.rc_slope.unwrap();
        assert!(slope > 1.0, "slope {slope}");
    }

    #[test]
    fn moment_scaling_near_theory() {
        for &(alpha, p) in &[(1.5, 1.2), (1.9, 1.5)] {
            let ms = moment_scaling_check(alpha, p, 1.0, 1.0, 4000, 64, 1234).unwrap();
            assert!(
                ms.within(0.2),
                "alpha {alpha} p {p}: ratio {} vs {}",
                ms.ratio,
                ms.expected
            );
        }
    }

    #[test]
    fn moment_scaling_rejects_bad_p_and_handles_zero() {
        assert!(moment_scaling_check(1.5, 1.5, 1.0, 1.0, 10, 8, 0).is_err());
        assert!(moment_scaling_check(1.5, 1.6, 1.0, 1.0, 10, 8, 0).is_err());
        let ms = moment_scaling_check(1.5, 1.2, 0.0, 1.0, 10, 8, 0).unwrap();
        assert_eq!(ms.mean_sup_t, 0.0);
        assert_eq!(ms.mean_sup_2t, 0.0);
        assert!(ms.ratio.is_nan());
    }

    #[test]
    fn coupled_run_shares_the_path() {
        // The amplitude series must consume slow increments: feeding the
        // rescaled path back through must not change anything.
        let model = ac(0.4);
        let config = base_config(1.5);
        let params = StableParams::new(1.5).unwrap();
        let path = sample_path(params, model.n_noise_modes(), config.n_steps(), config.dt_slow, 2);
        let run_a =
            coupled_run_on_path(&model, 0.2, &config, CoupledOptions::default(), &path).unwrap();
        let round = rescale_to_slow(&crate::stable::rescale_to_fast(&path, 0.2).unwrap());
        let run_b =
            coupled_run_on_path(&model, 0.2, &config, CoupledOptions::default(), &round).unwrap();
        assert_eq!(run_a.phi_series, run_b.phi_series);
        assert_eq!(
            run_a.full.u_series.last().unwrap().coeffs,
            run_b.full.u_series.last().unwrap().coeffs
        );
    }
}
