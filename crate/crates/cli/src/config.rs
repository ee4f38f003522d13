//! Run configuration: one TOML file, overridable field-by-field from the
//! command line. Every run echoes its effective config into the manifest so
//! an output set can be replayed from the manifest alone.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use levyamp::harness::{HarnessConfig, KAPPA_MAX};
use levyamp::models::ModelSpec;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// "allen-cahn" or "surface-growth".
    pub model: String,
    pub alpha: f64,
    /// Bifurcation parameter (gamma for Allen-Cahn, the slow part of mu for
    /// surface growth).
    pub gamma: f64,
    pub epsilons: Vec<f64>,
    pub kappa: f64,
    /// Moment order; defaults to a value safely inside (1, alpha).
    pub p: Option<f64>,
    /// Number of state wavenumbers kept by the Galerkin truncation.
    pub k_max: usize,
    /// Covariance weights beta_k = b0 k^{-q}.
    pub b0: f64,
    pub q: f64,
    pub dt_slow: f64,
    pub t0: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub noise_mult: f64,
    /// Initial dominant amplitude(s).
    pub phi0: Vec<f64>,
    /// "csv" or "json" for the tabular outputs (JSON summaries are always
    /// written).
    pub format: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: "allen-cahn".into(),
            alpha: 1.5,
            gamma: 0.4,
            epsilons: vec![0.4, 0.2, 0.1],
            kappa: 0.05,
            p: None,
            k_max: 32,
            b0: 1.0,
            q: 2.0,
            dt_slow: 1e-3,
            t0: 1.0,
            n_paths: 200,
            seed: 0,
            noise_mult: 1.0,
            phi0: vec![0.5],
            format: "csv".into(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: Self =
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(config)
    }

    pub fn effective_p(&self) -> f64 {
        self.p.unwrap_or_else(|| HarnessConfig::default_p(self.alpha))
    }

    /// Range checks mirrored from the library constructors, surfaced at parse
    /// time with the offending field named.
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 1.0 && self.alpha < 2.0) {
            bail!("alpha must lie in (1, 2), got {}", self.alpha);
        }
        if !(self.kappa > 0.0 && self.kappa < KAPPA_MAX) {
            bail!("kappa must lie in (0, 2/19), got {}", self.kappa);
        }
        let p = self.effective_p();
        if !(p > 1.0 && p < self.alpha) {
            bail!("p must lie in (1, alpha) = (1, {}), got {p}", self.alpha);
        }
        if self.epsilons.is_empty() {
            bail!("epsilons must be non-empty");
        }
        for &e in &self.epsilons {
            if !(e > 0.0 && e < 1.0) {
                bail!("every epsilon must lie in (0, 1), got {e}");
            }
        }
        if self.dt_slow <= 0.0 || self.t0 <= 0.0 {
            bail!("dt_slow and t0 must be positive");
        }
        if self.n_paths == 0 {
            bail!("n_paths must be positive");
        }
        if self.format != "csv" && self.format != "json" {
            bail!("format must be csv or json, got {}", self.format);
        }
        self.build_model().map(|_| ())
    }

    pub fn build_model(&self) -> Result<ModelSpec> {
        let model = match self.model.as_str() {
            "allen-cahn" => ModelSpec::allen_cahn(self.gamma, self.k_max, self.b0, self.q),
            "surface-growth" => {
                ModelSpec::surface_growth(self.gamma, self.k_max, self.b0, self.q)
            }
            other => bail!("unknown model {other:?} (expected allen-cahn or surface-growth)"),
        };
        model.map_err(|e| anyhow::anyhow!("{e}"))
    }

    pub fn harness_config(&self) -> Result<HarnessConfig> {
        let mut hc = HarnessConfig::new(self.kappa, self.effective_p(), self.alpha)
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        hc.t0 = self.t0;
        hc.dt_slow = self.dt_slow;
        hc.n_paths = self.n_paths;
        hc.noise_mult = self.noise_mult;
        hc.phi0 = self.phi0.clone();
        hc.seed = self.seed;
        Ok(hc)
    }
}

/// Flag-level overrides shared by the subcommands; `None` keeps the config
/// file (or default) value.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
    /// Comma-separated list, e.g. `--epsilons 0.4,0.2,0.1`.
    #[arg(long, value_delimiter = ',')]
    pub epsilons: Option<Vec<f64>>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long)]
    pub b0: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub dt_slow: Option<f64>,
    #[arg(long)]
    pub t0: Option<f64>,
    #[arg(long = "paths")]
    pub n_paths: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub noise_mult: Option<f64>,
    /// Comma-separated initial amplitude(s).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub phi0: Option<Vec<f64>>,
    #[arg(long)]
    pub format: Option<String>,
}

impl Overrides {
    pub fn apply(&self, config: &mut RunConfig) {
        macro_rules! set {
            ($field:ident) => {
                if let Some(v) = &self.$field {
                    config.$field = v.clone();
                }
            };
        }
        set!(model);
        set!(alpha);
        set!(gamma);
        set!(epsilons);
        set!(kappa);
        set!(k_max);
        set!(b0);
        set!(q);
        set!(dt_slow);
        set!(t0);
        set!(n_paths);
        set!(seed);
        set!(noise_mult);
        set!(phi0);
        set!(format);
        if self.p.is_some() {
            config.p = self.p;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn bad_fields_are_named() {
        let mut c = RunConfig::default();
        c.alpha = 2.5;
        assert!(c.validate().unwrap_err().to_string().contains("alpha"));
        let mut c = RunConfig::default();
        c.kappa = 0.2;
        assert!(c.validate().unwrap_err().to_string().contains("kappa"));
        let mut c = RunConfig::default();
        c.epsilons = vec![1.0];
        assert!(c.validate().unwrap_err().to_string().contains("epsilon"));
        let mut c = RunConfig::default();
        c.q = 0.5;
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("not summable") && msg.contains("A5"), "{msg}");
    }

    #[test]
    fn toml_round_trip_and_overrides() {
        let config = RunConfig::default();
        let text = toml::to_string(&config).unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back.alpha, config.alpha);

        let mut config = RunConfig::default();
        let over = Overrides {
            alpha: Some(1.8),
            epsilons: Some(vec![0.3]),
            ..Default::default()
        };
        over.apply(&mut config);
        assert_eq!(config.alpha, 1.8);
        assert_eq!(config.epsilons, vec![0.3]);
    }
}
