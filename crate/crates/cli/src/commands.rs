//! Subcommand implementations. Every command writes its data files plus a
//! `manifest.json`; the manifest is the only artifact carrying wall-clock
//! information, so data files are byte-reproducible from config + seed.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use serde_json::json;

use levyamp::amplitude::{
    default_jump_threshold, simulate_ensemble, AmplitudeConfig, EnsembleStats,
};
use levyamp::basis::simpson;
use levyamp::harness::{sweep_cell, EpsilonCell, SweepReport};
use levyamp::models::{delta_k, surface_growth_fc, ModelSpec};
use levyamp::report;
use levyamp::solver::{simulate_full, SolverConfig};
use levyamp::spectral::{check_semigroup_bound, dyadic_grid, SpaceSpec};
use levyamp::stable::{
    derive_rng, levy_measure_constant, sample_path, sample_standard_increment, StableParams,
};

use crate::config::RunConfig;

pub const SCHEMA_VERSION: u32 = 1;

fn to_anyhow(e: levyamp::Error) -> anyhow::Error {
    anyhow!("{e}")
}

fn write_manifest(
    out_dir: &Path,
    command: &str,
    config: &RunConfig,
    outputs: &[String],
) -> Result<()> {
    let manifest = report::Manifest {
        command: command.to_string(),
        seed: config.seed,
        started_at: chrono::Utc::now().to_rfc3339(),
        config_echo: serde_json::to_value(config)?,
        outputs: outputs.to_vec(),
    };
    report::write_json(&out_dir.join("manifest.json"), &manifest).map_err(to_anyhow)
}

fn write_table(path_base: &Path, format: &str, csv: &str, rows: &impl Serialize) -> Result<PathBuf> {
    let path = path_base.with_extension(format);
    match format {
        "json" => report::write_json(&path, rows).map_err(to_anyhow)?,
        _ => report::write_text(&path, csv).map_err(to_anyhow)?,
    }
    Ok(path)
}

fn run_ensemble(
    config: &RunConfig,
    model: &ModelSpec,
    alpha: f64,
    initials: &[Vec<f64>],
    jump_threshold: f64,
) -> Result<EnsembleStats> {
    let amp = AmplitudeConfig::new(config.dt_slow, config.noise_mult);
    let n_steps = (config.t0 / config.dt_slow).round().max(1.0) as usize;
    let stride = (n_steps / 1000).max(1);
    simulate_ensemble(
        config.n_paths,
        model,
        alpha,
        &amp,
        config.t0,
        initials,
        config.seed,
        jump_threshold,
        stride,
    )
    .map_err(to_anyhow)
}

fn ensemble_summary(stats: &EnsembleStats) -> serde_json::Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "alpha": stats.alpha,
        "gamma": stats.gamma,
        "noise_mult": stats.noise_mult,
        "seed": stats.seed,
        "horizon": stats.horizon,
        "dt": stats.dt,
        "jump_threshold": stats.jump_threshold,
        "n_paths": stats.paths.len(),
        "n_nonfinite": stats.n_nonfinite,
        "terminal_quantiles_q10_q50_q90": stats.terminal_quantiles(&[0.1, 0.5, 0.9]),
        "median_large_jumps": stats.median_jump_count(),
    })
}

pub fn cmd_simulate_amplitude(config: &RunConfig, out_dir: &Path) -> Result<()> {
    config.validate()?;
    let model = config.build_model()?;
    let threshold = default_jump_threshold(&model, config.alpha, config.noise_mult);
    let stats = run_ensemble(config, &model, config.alpha, &[config.phi0.clone()], threshold)?;

    let mut outputs = Vec::new();
    let p = write_table(
        &out_dir.join("ensemble"),
        &config.format,
        &report::ensemble_csv(&stats),
        &stats.paths.iter().map(|p| (p.path_id, p.seed, p.finite, p.large_jumps, p.terminal.clone())).collect::<Vec<_>>(),
    )?;
    outputs.push(p.display().to_string());
    let p = write_table(
        &out_dir.join("trajectories"),
        &config.format,
        &report::ensemble_trajectories_csv(&stats),
        &stats.paths.iter().map(|p| (p.path_id, p.trajectory.clone())).collect::<Vec<_>>(),
    )?;
    outputs.push(p.display().to_string());
    let summary_path = out_dir.join("summary.json");
    report::write_json(&summary_path, &ensemble_summary(&stats)).map_err(to_anyhow)?;
    outputs.push(summary_path.display().to_string());

    write_manifest(out_dir, "simulate-amplitude", config, &outputs)?;
    println!(
        "simulate-amplitude: {} paths, median jumps {:.1}, outputs in {}",
        config.n_paths,
        stats.median_jump_count(),
        out_dir.display()
    );
    Ok(())
}

pub fn cmd_simulate_spde(config: &RunConfig, epsilon: f64, out_dir: &Path) -> Result<()> {
    config.validate()?;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        bail!("epsilon must lie in (0, 1), got {epsilon}");
    }
    let model = config.build_model()?;
    let params = StableParams::new(config.alpha).map_err(to_anyhow)?;
    let mut solver = SolverConfig::new(config.dt_slow, epsilon, config.t0).map_err(to_anyhow)?;
    solver.noise_mult = config.noise_mult;
    let u0 = model.field_from_amplitudes(&config.phi0).scaled(epsilon);
    let headers: Vec<String> = (0..model.n_dominant()).map(|k| format!("a{k}")).collect();
    let header_refs: Vec<&str> = headers.iter().map(|s| s.as_str()).collect();

    let mut outputs = Vec::new();
    let mut terminals = Vec::new();
    for i in 0..config.n_paths {
        let seed = config
            .seed
            .wrapping_add((i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let path = sample_path(params, model.n_noise_modes(), solver.n_steps(), config.dt_slow, seed);
        let record = simulate_full(&u0, &path, &model, &solver).map_err(to_anyhow)?;
        let p = write_table(
            &out_dir.join(format!("spde_path{i}")),
            &config.format,
            &report::amplitude_csv(&record, &header_refs),
            &record.a_series.iter().map(|a| a.coeffs.clone()).collect::<Vec<_>>(),
        )?;
        outputs.push(p.display().to_string());
        terminals.push(json!({
            "path": i,
            "seed": seed,
            "exploded_at": record.exploded_at,
            "terminal_a": record.a_series.last().map(|a| a.coeffs.clone()),
        }));
    }
    let summary_path = out_dir.join("summary.json");
    report::write_json(
        &summary_path,
        &json!({
            "schema_version": SCHEMA_VERSION,
            "epsilon": epsilon,
            "alpha": config.alpha,
            "gamma": config.gamma,
            "paths": terminals,
        }),
    )
    .map_err(to_anyhow)?;
    outputs.push(summary_path.display().to_string());
    write_manifest(out_dir, "simulate-spde", config, &outputs)?;
    println!("simulate-spde: {} paths at epsilon {epsilon}, outputs in {}", config.n_paths, out_dir.display());
    Ok(())
}

fn cell_file(out_dir: &Path, epsilon: f64) -> PathBuf {
    out_dir.join(format!("sweep_cell_eps{epsilon:.6}.json"))
}

pub fn cmd_sweep(config: &RunConfig, resume: bool, out_dir: &Path) -> Result<()> {
    config.validate()?;
    let model = config.build_model()?;
    let hc = config.harness_config()?;
    let params = StableParams::new(config.alpha).map_err(to_anyhow)?;

    let mut outputs = Vec::new();
    let mut cells: Vec<EpsilonCell> = Vec::with_capacity(config.epsilons.len());
    for (ei, &eps) in config.epsilons.iter().enumerate() {
        let file = cell_file(out_dir, eps);
        if resume && file.exists() {
            let text = std::fs::read_to_string(&file)
                .with_context(|| format!("reading {}", file.display()))?;
            cells.push(serde_json::from_str(&text)?);
            eprintln!("sweep: reused {}", file.display());
        } else {
            eprintln!(
                "sweep: epsilon {eps} ({}/{}), {} paths",
                ei + 1,
                config.epsilons.len(),
                hc.n_paths
            );
            let cell = sweep_cell(&model, params, eps, ei as u64, &hc).map_err(to_anyhow)?;
            report::write_json(&file, &cell).map_err(to_anyhow)?;
            cells.push(cell);
        }
        outputs.push(file.display().to_string());
    }

    // Assemble the report from the (possibly reloaded) cells; the slope uses
    // cells with a usable median.
    let usable: Vec<(f64, f64)> = cells
        .iter()
        .filter(|c| c.median_sup_rc > 0.0)
        .map(|c| (c.epsilon, c.median_sup_rc))
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = usable.into_iter().unzip();
    let report_struct = SweepReport {
        alpha: config.alpha,
        kappa: hc.kappa,
        p: hc.p,
        t0: hc.t0,
        dt_slow: hc.dt_slow,
        n_paths: hc.n_paths,
        seed: hc.seed,
        cells,
        rc_slope: levyamp::stats::loglog_slope(&xs, &ys),
    };
    let (rc_mono, rs_mono) = report_struct.exceedance_non_increasing();
    let tau_mono = report_struct.early_stop_non_increasing();

    let csv_path = out_dir.join("sweep.csv");
    report::write_text(&csv_path, &report::sweep_csv(&report_struct)).map_err(to_anyhow)?;
    outputs.push(csv_path.display().to_string());
    let json_path = out_dir.join("sweep.json");
    report::write_json(
        &json_path,
        &json!({
            "schema_version": SCHEMA_VERSION,
            "report": report_struct,
            "checks": {
                "rc_exceedance_non_increasing": if rc_mono { "PASS" } else { "FAIL" },
                "rs_exceedance_non_increasing": if rs_mono { "PASS" } else { "FAIL" },
                "early_stop_non_increasing": if tau_mono { "PASS" } else { "FAIL" },
            },
        }),
    )
    .map_err(to_anyhow)?;
    outputs.push(json_path.display().to_string());
    write_manifest(out_dir, "sweep", config, &outputs)?;

    println!(
        "sweep: {} epsilons, rc slope {:?}, monotone rc {} rs {} tau {}",
        report_struct.cells.len(),
        report_struct.rc_slope,
        rc_mono,
        rs_mono,
        tau_mono
    );
    Ok(())
}

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn oracle_checks(config: &RunConfig) -> Result<Vec<Check>> {
    let mut checks = Vec::new();

    // Projection coefficients against quadrature.
    let mut worst: f64 = 0.0;
    for k in 1..=50 {
        let oracle = (2.0 / PI).powf(1.5)
            * simpson(|y| y.sin().powi(2) * (k as f64 * y).sin(), 0.0, PI, 40_000);
        worst = worst.max((delta_k(k) - oracle).abs());
    }
    checks.push(Check {
        name: "projection-coefficients",
        pass: worst < 1e-10,
        detail: format!("max |delta_k - quadrature| = {worst:.3e}"),
    });

    // Dominant cubic reduction.
    let model = ModelSpec::allen_cahn(0.4, 16, 1.0, 2.0).map_err(to_anyhow)?;
    let mut worst: f64 = 0.0;
    for phi in [0.3, 1.0, 2.0] {
        let u = model.field_from_amplitudes(&[phi]);
        let f = model.cubic_nonlinearity(&u).map_err(to_anyhow)?;
        let got = model.dominant_amplitudes(&f)[0];
        worst = worst.max((got + 0.75 * phi * phi * phi).abs());
    }
    checks.push(Check {
        name: "cubic-reduction",
        pass: worst < 1e-10,
        detail: format!("max |P_c F(phi s) + (3/4) phi^3| = {worst:.3e}"),
    });

    // Surface-growth pairing identity.
    let sg = ModelSpec::surface_growth(1.0, 8, 1.0, 4.0).map_err(to_anyhow)?;
    let mut rng = derive_rng(config.seed, 77, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        use rand::Rng;
        let g1: f64 = rng.gen_range(-2.0..2.0);
        let g2: f64 = rng.gen_range(-2.0..2.0);
        let u = sg.field_from_amplitudes(&[g1, g2]);
        let f = sg.cubic_nonlinearity(&u).map_err(to_anyhow)?;
        let pairing = f.dot(&u);
        let r2 = g1 * g1 + g2 * g2;
        worst = worst.max((pairing + 0.75 * PI * r2 * r2).abs());
        let (f1, f2) = surface_growth_fc(g1, g2);
        let fc = sg.dominant_amplitudes(&f);
        worst = worst.max((fc[0] - f1).abs().max((fc[1] - f2).abs()));
    }
    checks.push(Check {
        name: "surface-growth-identity",
        pass: worst < 1e-10,
        detail: format!("max pairing/reduction defect = {worst:.3e}"),
    });

    // Semigroup decay probe.
    let eigs: Vec<f64> = (1..=32).map(|k| (k * k - 1) as f64).collect();
    let spec = SpaceSpec::new(eigs, 1, 1.0, 0.0).map_err(to_anyhow)?;
    let grid = dyadic_grid(1e-3, 10.0);
    let ratio =
        check_semigroup_bound(&spec, 1.0, 0.0, 2.9, &grid, 100, config.seed).map_err(to_anyhow)?;
    let ratio_eq =
        check_semigroup_bound(&spec, 1.0, 1.0, 2.9, &grid, 100, config.seed).map_err(to_anyhow)?;
    checks.push(Check {
        name: "semigroup-bound",
        pass: ratio.is_finite() && ratio < 10.0 && ratio_eq <= 1.0 + 1e-12,
        detail: format!("max ratio {ratio:.4} (equal-exponent {ratio_eq:.12})"),
    });

    // Sampler characteristic function.
    let n = 20_000usize;
    let tol = 3.0 / (n as f64).sqrt();
    let mut worst: f64 = 0.0;
    for &alpha in &[1.1, 1.5, 1.9] {
        let params = StableParams::new(alpha).map_err(to_anyhow)?;
        let mut rng = derive_rng(config.seed, 99, (alpha * 1000.0) as u64);
        let xs: Vec<f64> = (0..n).map(|_| sample_standard_increment(params, &mut rng)).collect();
        for &xi in &[0.5, 1.0, 2.0] {
            let emp = xs.iter().map(|x| (xi * x).cos()).sum::<f64>() / n as f64;
            let target = (-(xi as f64).abs().powf(alpha)).exp();
            worst = worst.max((emp - target).abs());
        }
    }
    checks.push(Check {
        name: "characteristic-function",
        pass: worst < tol,
        detail: format!("max |CF defect| = {worst:.4} (tol {tol:.4})"),
    });

    // Jump-intensity constant at the closed-form point.
    let c1 = levy_measure_constant(1.0).map_err(to_anyhow)?;
    let defect = (c1 - 1.0 / PI).abs();
    checks.push(Check {
        name: "levy-constant",
        pass: defect < 1e-12,
        detail: format!("|c(1,1) - 1/pi| = {defect:.3e}"),
    });

    // The run configuration itself.
    let config_result = config.validate();
    checks.push(Check {
        name: "run-config",
        pass: config_result.is_ok(),
        detail: match &config_result {
            Ok(()) => "valid".to_string(),
            Err(e) => e.to_string(),
        },
    });

    Ok(checks)
}

pub fn cmd_validate(config: &RunConfig, as_json: bool, out_dir: &Path) -> Result<()> {
    let checks = oracle_checks(config)?;
    let all_pass = checks.iter().all(|c| c.pass);
    if as_json {
        let value = json!({
            "schema_version": SCHEMA_VERSION,
            "pass": all_pass,
            "checks": checks.iter().map(|c| json!({
                "name": c.name,
                "pass": c.pass,
                "detail": c.detail,
            })).collect::<Vec<_>>(),
        });
        println!("{}", serde_json::to_string_pretty(&value)?);
        report::write_json(&out_dir.join("validate.json"), &value).map_err(to_anyhow)?;
    } else {
        for c in &checks {
            println!(
                "{:<28} {}  {}",
                c.name,
                if c.pass { "PASS" } else { "FAIL" },
                c.detail
            );
        }
    }
    if !all_pass {
        bail!("validation failed");
    }
    Ok(())
}

/// Ensemble presets mirroring the two bundled figure setups. `alphas` also
/// fixes the order of the per-alpha output files; the jump threshold is held
/// fixed across alphas so the counts are comparable.
fn figure_preset(
    name: &str,
    base: &RunConfig,
    alphas: &[f64],
    initials: &[Vec<f64>],
    out_dir: &Path,
) -> Result<()> {
    let model = base.build_model()?;
    let threshold = default_jump_threshold(&model, 1.5, base.noise_mult);
    let mut outputs = Vec::new();
    let mut summaries = Vec::new();
    for &alpha in alphas {
        let mut config = base.clone();
        config.alpha = alpha;
        config.validate()?;
        let stats = run_ensemble(&config, &model, alpha, initials, threshold)?;
        let traj_path = out_dir.join(format!("{name}_alpha{alpha}_trajectories.csv"));
        report::write_text(&traj_path, &report::ensemble_trajectories_csv(&stats))
            .map_err(to_anyhow)?;
        outputs.push(traj_path.display().to_string());
        let ens_path = out_dir.join(format!("{name}_alpha{alpha}_ensemble.csv"));
        report::write_text(&ens_path, &report::ensemble_csv(&stats)).map_err(to_anyhow)?;
        outputs.push(ens_path.display().to_string());
        summaries.push(ensemble_summary(&stats));
        println!(
            "{name}: alpha {alpha}, median jumps {:.1}",
            stats.median_jump_count()
        );
    }
    let summary_path = out_dir.join(format!("{name}_summary.json"));
    report::write_json(
        &summary_path,
        &json!({
            "schema_version": SCHEMA_VERSION,
            "preset": name,
            "jump_threshold": threshold,
            "runs": summaries,
        }),
    )
    .map_err(to_anyhow)?;
    outputs.push(summary_path.display().to_string());
    write_manifest(out_dir, name, base, &outputs)?;
    Ok(())
}

/// Subcritical ensemble: gamma = -0.05, noise level 0.1, alphas 1.9 / 1.5 /
/// 1.1; trajectories decay toward zero, heavier tails jump more.
pub fn cmd_reproduce_fig2(seed: Option<u64>, paths: Option<usize>, out_dir: &Path) -> Result<()> {
    let mut base = RunConfig::default();
    base.gamma = -0.05;
    base.noise_mult = 0.1;
    base.n_paths = paths.unwrap_or(50);
    base.t0 = 100.0;
    base.dt_slow = 0.01;
    base.phi0 = vec![1.0];
    base.seed = seed.unwrap_or(0);
    figure_preset("fig2", &base, &[1.9, 1.5, 1.1], &[vec![1.0]], out_dir)
}

/// Supercritical ensemble: gamma = 0.4, noise level 0.05, alphas 1.8 / 1.2;
/// paths started at +/- 0.5 settle near the same-signed fixed point
/// +/- 2 sqrt(gamma/3).
pub fn cmd_reproduce_fig3(seed: Option<u64>, paths: Option<usize>, out_dir: &Path) -> Result<()> {
    let mut base = RunConfig::default();
    base.gamma = 0.4;
    base.noise_mult = 0.05;
    base.n_paths = paths.unwrap_or(50);
    base.t0 = 100.0;
    base.dt_slow = 0.01;
    base.phi0 = vec![0.5];
    base.seed = seed.unwrap_or(0);
    figure_preset(
        "fig3",
        &base,
        &[1.8, 1.2],
        &[vec![0.5], vec![-0.5]],
        out_dir,
    )
}
