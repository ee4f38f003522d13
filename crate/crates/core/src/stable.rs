//! Symmetric alpha-stable increments, mode by mode, on slow and fast time grids.
//!
//! One-dimensional draws use the Chambers-Mallows-Stuck transformation, which
//! is exact in distribution for the symmetric law with characteristic function
//! `exp(-|xi|^alpha)`. Per-mode streams derive from a splittable seeding
//! scheme `seed -> (seed, mode, step)`, so path generation is order-independent
//! and parallelizable.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// Stability index of the driving noise, restricted to the operating range (1, 2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableParams {
    alpha: f64,
}

impl StableParams {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 1.0 && alpha < 2.0) {
            return Err(Error::AlphaOutOfRange(alpha));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// Per-mode stable increment matrix on a fixed time grid.
///
/// Increments are stored on the slow grid; rescaling to the fast grid is kept
/// as metadata (`epsilon`) so that a fast/slow round trip is bit-exact. The
/// effective increment is `raw * epsilon^{-2/alpha}` over steps of size
/// `dt_slow * epsilon^{-2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisePath {
    n_modes: usize,
    n_steps: usize,
    dt_slow: f64,
    alpha: f64,
    seed: u64,
    epsilon: f64,
    gain: f64,
    raw: Vec<f64>,
}

impl NoisePath {
    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Rescale factor currently applied to the raw slow-grid increments.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Step size of the grid this path currently lives on.
    pub fn step(&self) -> f64 {
        self.dt_slow * self.epsilon.powi(-2)
    }

    /// Effective increment of mode `mode` over step `step`.
    pub fn increment(&self, step: usize, mode: usize) -> f64 {
        self.raw[step * self.n_modes + mode] * self.gain
    }

    /// Effective increments of all modes over one step.
    pub fn step_row(&self, step: usize) -> impl Iterator<Item = f64> + '_ {
        self.raw[step * self.n_modes..(step + 1) * self.n_modes]
            .iter()
            .map(move |x| x * self.gain)
    }

    /// Materialize the full [n_steps x n_modes] matrix, row-major.
    pub fn to_matrix(&self) -> Vec<f64> {
        self.raw.iter().map(|x| x * self.gain).collect()
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive an owned stream for one (seed, mode, step) cell.
pub fn derive_rng(seed: u64, mode: u64, step: u64) -> ChaCha8Rng {
    let mut state = seed ^ 0x853c_49e6_748f_ea9b;
    let mut key = [0u8; 32];
    state ^= splitmix64(&mut state).wrapping_add(mode);
    state ^= splitmix64(&mut state).wrapping_add(step);
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// One draw of a standard symmetric alpha-stable variable, characteristic
/// function `exp(-|xi|^alpha)`, via the Chambers-Mallows-Stuck construction.
pub fn sample_standard_increment<R: Rng + ?Sized>(params: StableParams, rng: &mut R) -> f64 {
    let alpha = params.alpha;
    // U uniform on (-pi/2, pi/2), W standard exponential.
    let u: f64 = (rng.gen::<f64>() - 0.5) * PI;
    let w: f64 = {
        let x: f64 = rng.gen::<f64>();
        -(1.0 - x).ln()
    };
    let u = u.clamp(-FRAC_PI_2 + 1e-15, FRAC_PI_2 - 1e-15);
    let w = w.max(1e-300);
    let s = (alpha * u).sin() / u.cos().powf(1.0 / alpha);
    s * (((1.0 - alpha) * u).cos() / w).powf((1.0 - alpha) / alpha)
}

/// The constant `c(1, alpha)` of the stable Levy measure
/// `nu(dy) = c(1, alpha) |y|^{-1-alpha} dy`.
pub fn levy_measure_constant(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::GammaPole(alpha));
    }
    let num = alpha * gamma((1.0 + alpha) / 2.0);
    let den = 2f64.powf(1.0 - alpha) * PI.sqrt() * gamma(1.0 - alpha / 2.0);
    Ok(num / den)
}

/// Sample a slow-grid path: `increments[i][k] = dT^{1/alpha} * standard draw`,
/// deterministic given the seed, columns driven by independent derived streams.
pub fn sample_path(
    params: StableParams,
    n_modes: usize,
    n_steps: usize,
    dt_slow: f64,
    seed: u64,
) -> NoisePath {
    assert!(n_modes >= 1 && n_steps >= 1 && dt_slow > 0.0);
    let scale = dt_slow.powf(1.0 / params.alpha);
    let mut raw = vec![0.0; n_steps * n_modes];
    for (i, row) in raw.chunks_exact_mut(n_modes).enumerate() {
        for (k, slot) in row.iter_mut().enumerate() {
            let mut rng = derive_rng(seed, k as u64, i as u64);
            *slot = scale * sample_standard_increment(params, &mut rng);
        }
    }
    NoisePath {
        n_modes,
        n_steps,
        dt_slow,
        alpha: params.alpha,
        seed,
        epsilon: 1.0,
        gain: 1.0,
        raw,
    }
}

/// View the path on the fast grid: increments scaled by `epsilon^{-2/alpha}`,
/// step `epsilon^{-2} * dT`. The raw data is untouched, so
/// [`rescale_to_slow`] recovers the input bit-exactly.
pub fn rescale_to_fast(path: &NoisePath, epsilon: f64) -> Result<NoisePath> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::EpsilonOutOfRange(epsilon));
    }
    let mut out = path.clone();
    out.epsilon = epsilon;
    out.gain = epsilon.powf(-2.0 / path.alpha);
    Ok(out)
}

/// Undo [`rescale_to_fast`]: the paper's forward rescaling back to slow time.
pub fn rescale_to_slow(path: &NoisePath) -> NoisePath {
    let mut out = path.clone();
    out.epsilon = 1.0;
    out.gain = 1.0;
    out
}

/// Number of steps per mode whose |effective increment| exceeds `threshold`.
pub fn count_large_jumps(path: &NoisePath, threshold: f64) -> Vec<usize> {
    assert!(threshold > 0.0);
    let mut counts = vec![0usize; path.n_modes];
    for i in 0..path.n_steps {
        for (k, x) in path.step_row(i).enumerate() {
            if x.abs() > threshold {
                counts[k] += 1;
            }
        }
    }
    counts
}
