//! Serialization helpers: CSV tables for sweep and trajectory output, plus a
//! run manifest. All data files are deterministic given the configuration;
//! wall-clock information is confined to the manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::amplitude::EnsembleStats;
use crate::error::{Error, Result};
use crate::harness::{ResidualSeries, SweepReport};
use crate::solver::TrajectoryRecord;

fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.17e}")
    } else {
        format!("{x}")
    }
}

/// One row per epsilon: thresholds, exceedance counts and intervals, medians.
pub fn sweep_csv(report: &SweepReport) -> String {
    let mut out = String::from(
        "epsilon,n_paths,n_exploded,rc_threshold,rc_exceed,rc_prob,rc_lo,rc_hi,\
         rs_threshold,rs_exceed,rs_prob,rs_lo,rs_hi,median_sup_rc,median_lp_rs,\
         early_stop_frac,median_tau\n",
    );
    for c in &report.cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt_f64(c.epsilon),
            c.n_paths,
            c.n_exploded,
            fmt_f64(c.rc_threshold),
            c.rc_exceed,
            fmt_f64(c.rc_prob),
            fmt_f64(c.rc_wilson.0),
            fmt_f64(c.rc_wilson.1),
            fmt_f64(c.rs_threshold),
            c.rs_exceed,
            fmt_f64(c.rs_prob),
            fmt_f64(c.rs_wilson.0),
            fmt_f64(c.rs_wilson.1),
            fmt_f64(c.median_sup_rc),
            fmt_f64(c.median_lp_rs),
            fmt_f64(c.early_stop_frac),
            fmt_f64(c.median_tau),
        );
    }
    out
}

/// Time series of residual norms for one coupled run.
pub fn residual_csv(res: &ResidualSeries) -> String {
    let mut out = String::from("t,rc,rs\n");
    for i in 0..res.times.len() {
        let _ = writeln!(
            out,
            "{},{},{}",
            fmt_f64(res.times[i]),
            fmt_f64(res.rc[i]),
            fmt_f64(res.rs[i])
        );
    }
    out
}

/// Dominant amplitudes of a full trajectory, one column per dominant mode.
pub fn amplitude_csv(record: &TrajectoryRecord, headers: &[&str]) -> String {
    let mut out = String::from("t");
    for h in headers {
        let _ = write!(out, ",{h}");
    }
    out.push('\n');
    for i in 0..record.len() {
        let _ = write!(out, "{}", fmt_f64(record.times[i]));
        for k in 0..headers.len() {
            let _ = write!(out, ",{}", fmt_f64(record.a_series[i].coeffs[k]));
        }
        out.push('\n');
    }
    out
}

/// Terminal values and jump counts of an amplitude ensemble, one row per path.
pub fn ensemble_csv(stats: &EnsembleStats) -> String {
    let n_dom = stats
        .paths
        .first()
        .map(|p| p.terminal.len())
        .unwrap_or(0);
    let mut out = String::from("path,seed,finite,large_jumps");
    for k in 0..n_dom {
        let _ = write!(out, ",phi{k}");
    }
    out.push('\n');
    for p in &stats.paths {
        let _ = write!(
            out,
            "{},{},{},{}",
            p.path_id, p.seed, p.finite as u8, p.large_jumps
        );
        for v in &p.terminal {
            let _ = write!(out, ",{}", fmt_f64(*v));
        }
        out.push('\n');
    }
    out
}

/// Recorded ensemble trajectories in long format: `path,t,phi0[,phi1]`. Paths
/// without stored trajectories are skipped.
pub fn ensemble_trajectories_csv(stats: &EnsembleStats) -> String {
    let n_dom = stats
        .paths
        .first()
        .map(|p| p.terminal.len())
        .unwrap_or(0);
    let mut out = String::from("path,t");
    for k in 0..n_dom {
        let _ = write!(out, ",phi{k}");
    }
    out.push('\n');
    for p in &stats.paths {
        for (t, phi) in &p.trajectory {
            let _ = write!(out, "{},{}", p.path_id, fmt_f64(*t));
            for v in phi {
                let _ = write!(out, ",{}", fmt_f64(*v));
            }
            out.push('\n');
        }
    }
    out
}

/// Run manifest: the only artifact allowed to carry wall-clock data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    pub started_at: String,
    pub config_echo: serde_json::Value,
    pub outputs: Vec<String>,
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::Config(e.to_string()))?;
    }
    fs::write(path, text).map_err(|e| Error::Config(e.to_string()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    write_text(path, &(text + "\n"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amplitude::{simulate_ensemble, AmplitudeConfig};
    use crate::harness::{epsilon_sweep, HarnessConfig};
    use crate::models::ModelSpec;

    #[test]
    fn sweep_csv_shape() {
        let model = ModelSpec::allen_cahn(0.4, 8, 1.0, 2.0).unwrap();
        let mut config = HarnessConfig::new(0.05, 1.2, 1.5).unwrap();
        config.n_paths = 4;
        config.t0 = 0.1;
        config.dt_slow = 1e-2;
        let report = epsilon_sweep(&model, 1.5, &[0.3, 0.15], &config).unwrap();
        let csv = sweep_csv(&report);
        let lines: Vec<&str> = csv.trim_end().lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("epsilon,"));
        assert_eq!(lines[1].split(',').count(), 17);
    }

    #[test]
    fn ensemble_csv_round_numbers() {
        let model = ModelSpec::allen_cahn(0.4, 8, 1.0, 2.0).unwrap();
        let config = AmplitudeConfig::new(0.01, 0.1);
        let stats = simulate_ensemble(
            3,
            &model,
            1.5,
            &config,
            0.1,
            &[vec![0.5]],
            42,
            1.0,
            5,
        )
        .unwrap();
        let csv = ensemble_csv(&stats);
        assert_eq!(csv.trim_end().lines().count(), 4);
        let traj = ensemble_trajectories_csv(&stats);
        assert!(traj.lines().count() > 4);
        assert!(traj.starts_with("path,t,phi0"));
    }

    #[test]
    fn values_survive_csv_round_trip() {
        let x = 0.123456789012345678e-3;
        let s = fmt_f64(x);
        assert_eq!(s.parse::<f64>().unwrap(), x);
    }
}
