//! Subcommand implementations: simulate, roc, analytic, fit, gain, selftest.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use qtms_core::analytic::{
    analytic_pdet, analytic_pfa, analytic_roc, fit_rho, invert_pfa, AnalyticModel,
    DEFAULT_SERIES_TOL,
};
use qtms_core::detectors::{run_experiment, DetectorId, DetectorSeries};
use qtms_core::roc::{
    integration_gain, read_roc_csv, roc_from_series, summarize, write_roc_csv,
    write_series_csv, GainEstimate,
};
use qtms_core::sampler::{Condition, WindowSampler, WindowSpec};
use qtms_core::signal_model::{
    squeezed_variances, tmsv_covariance, validate_physical, TmsvParams, Units,
};

use crate::config::RunConfig;
use crate::manifest::Manifest;
use crate::CliError;

fn ensure_out(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out)?;
    Ok(())
}

fn apply_seed(spec: WindowSpec, seed: Option<u64>) -> WindowSpec {
    match seed {
        Some(s) => WindowSpec { seed: s, ..spec },
        None => spec,
    }
}

pub fn simulate(
    config_path: &Path,
    seed: Option<u64>,
    out: &Path,
    dump_samples: bool,
) -> Result<(), CliError> {
    let cfg = RunConfig::load(config_path)?;
    let model = cfg.require_model()?;
    let spec = apply_seed(cfg.require_window()?, seed);
    let id = cfg.require_detector()?;
    let cov = model.covariance()?;
    ensure_out(out)?;

    let (on, off) = run_experiment(&cov, &cov, spec, id)?;
    let series_path = out.join("series.csv");
    write_series_csv(&on, &off, BufWriter::new(File::create(&series_path)?))?;

    let mut manifest = Manifest::new("simulate", Some(spec.seed));
    manifest.echo_config(&cfg.entries);
    manifest.record(&series_path)?;

    if dump_samples {
        for condition in [Condition::On, Condition::Off] {
            let sampler = WindowSampler::new(&cov, spec, condition)?;
            let path = out.join(format!("samples_{}.csv", condition.as_str()));
            let mut w = BufWriter::new(File::create(&path)?);
            writeln!(w, "i1,q1,i2,q2")?;
            for window in 0..spec.num_windows {
                sampler.fold_window(window, Ok::<(), std::io::Error>(()), |acc, s| {
                    acc.and_then(|()| {
                        writeln!(
                            w,
                            "{:.16e},{:.16e},{:.16e},{:.16e}",
                            s.i1, s.q1, s.i2, s.q2
                        )
                    })
                })?;
            }
            w.flush()?;
            manifest.record(&path)?;
        }
    }
    manifest.write(out)?;

    println!("model: {} | detector {}", model.kind(), id.index());
    println!(
        "windows: {} x {} samples, seed {}",
        spec.num_windows, spec.window_len, spec.seed
    );
    println!(
        "on : mean = {:.6e}  se = {:.3e}",
        on.mean(),
        on.standard_error()
    );
    println!(
        "off: mean = {:.6e}  se = {:.3e}",
        off.mean(),
        off.standard_error()
    );
    if let Some(scale) = cfg.vacuum_unit_scale()? {
        if scale > 0.0 {
            let report = validate_physical(&cov.scaled(1.0 / scale), Units::Vacuum);
            println!(
                "vacuum-units physicality (scale {scale:e}): symmetric={} psd={} mode1_uncertainty={:?} mode2_uncertainty={:?}",
                report.symmetric,
                report.positive_semidefinite,
                report.mode1_uncertainty,
                report.mode2_uncertainty
            );
        }
    }
    Ok(())
}

pub fn roc(config_path: &Path, seed: Option<u64>, out: &Path) -> Result<(), CliError> {
    let cfg = RunConfig::load(config_path)?;
    let model = cfg.require_model()?;
    let spec = apply_seed(cfg.require_window()?, seed);
    let id = cfg.require_detector()?;
    let cov = model.covariance()?;
    ensure_out(out)?;

    let (on, off) = run_experiment(&cov, &cov, spec, id)?;
    let curve = roc_from_series(&on, &off)?;
    let roc_path = out.join("roc.csv");
    write_roc_csv(&curve, BufWriter::new(File::create(&roc_path)?))?;

    let mut manifest = Manifest::new("roc", Some(spec.seed));
    manifest.echo_config(&cfg.entries);
    manifest.record(&roc_path)?;
    manifest.write(out)?;

    println!("model: {} | detector {}", model.kind(), id.index());
    println!(
        "curve: {} points, auc = {:.4}, resolvable p_fa >= {:.2e}",
        curve.points.len(),
        curve.auc(),
        curve.pfa_floor()
    );
    Ok(())
}

fn default_pfa_grid() -> Vec<f64> {
    let (lo, hi) = (1e-4_f64.ln(), 0.5_f64.ln());
    (0..40)
        .map(|i| (lo + (hi - lo) * i as f64 / 39.0).exp())
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub fn analytic(
    config_path: Option<&Path>,
    n: Option<f64>,
    rho: Option<f64>,
    sigma1: f64,
    sigma2: f64,
    pfa_grid: Option<Vec<f64>>,
    out: &Path,
) -> Result<(), CliError> {
    let model = match (config_path, n, rho) {
        (Some(path), None, None) => RunConfig::load(path)?.require_analytic()?,
        (None, Some(n), Some(rho)) => {
            let m = AnalyticModel {
                n_samples: n,
                rho,
                sigma1,
                sigma2,
            };
            m.validate().map_err(CliError::from)?;
            m
        }
        _ => {
            return Err(CliError::Config(
                "pass either --config with an [analytic] section, or both --n and --rho".into(),
            ))
        }
    };
    let grid = pfa_grid.unwrap_or_else(default_pfa_grid);
    for &pfa in &grid {
        if !(0.0 < pfa && pfa < 1.0) {
            return Err(CliError::Config(format!(
                "p_fa targets must lie in (0, 1), got {pfa}"
            )));
        }
    }
    ensure_out(out)?;
    let curve = analytic_roc(&model, &grid)?;
    let roc_path = out.join("roc.csv");
    write_roc_csv(&curve, BufWriter::new(File::create(&roc_path)?))?;
    let mut manifest = Manifest::new("analytic", None);
    manifest.record(&roc_path)?;
    manifest.write(out)?;
    println!(
        "analytic model: n = {}, rho = {}, sigma1 = {}, sigma2 = {}",
        model.n_samples, model.rho, model.sigma1, model.sigma2
    );
    println!("curve: {} points -> {}", curve.points.len(), roc_path.display());
    Ok(())
}

pub fn fit(roc_path: &Path, nominal_n: f64, out: &Path) -> Result<(), CliError> {
    let file = File::open(roc_path)
        .map_err(|e| CliError::Config(format!("cannot open {}: {e}", roc_path.display())))?;
    let curve = read_roc_csv(std::io::BufReader::new(file))?;
    let fit = fit_rho(&curve, nominal_n)?;
    ensure_out(out)?;
    let mut manifest = Manifest::new("fit", None);
    manifest.config.insert("fit.nominal_n".into(), format!("{nominal_n}"));
    manifest
        .config
        .insert("fit.rho_hat".into(), format!("{:.16e}", fit.rho));
    manifest
        .config
        .insert("fit.residual".into(), format!("{:.16e}", fit.residual));
    manifest.write(out)?;
    println!("rho_hat = {:.6}", fit.rho);
    println!("residual = {:.6e}", fit.residual);
    println!("points = {}", fit.points);
    Ok(())
}

fn analytic_pd_on_grid(model: &AnalyticModel, grid: &[f64]) -> Result<Vec<f64>, CliError> {
    grid.iter()
        .map(|&pfa| {
            let t = invert_pfa(model.n_samples, pfa)?;
            analytic_pdet(model, t, DEFAULT_SERIES_TOL)
        })
        .collect::<Result<_, _>>()
        .map_err(CliError::from)
}

pub fn gain(
    config_a: &Path,
    config_b: &Path,
    pfa_grid: Option<Vec<f64>>,
    out: &Path,
) -> Result<(), CliError> {
    let model_a = RunConfig::load(config_a)?.require_analytic()?;
    let model_b = RunConfig::load(config_b)?.require_analytic()?;
    let grid = pfa_grid.unwrap_or_else(|| vec![1e-3, 1e-2, 1e-1]);
    let est: GainEstimate = integration_gain(
        |g: &[f64]| analytic_pd_on_grid(&model_a, g),
        |k, g: &[f64]| {
            // the family is not defined below one sample; the scan's small-k
            // corner clamps there (those points never win anyway)
            let scaled = AnalyticModel {
                n_samples: (k * model_b.n_samples).max(1.0),
                ..model_b
            };
            analytic_pd_on_grid(&scaled, g)
        },
        &grid,
    )?;
    ensure_out(out)?;
    let trace_path = out.join("gain_trace.csv");
    {
        let mut w = BufWriter::new(File::create(&trace_path)?);
        writeln!(w, "k,objective")?;
        for (k, obj) in &est.trace {
            writeln!(w, "{k:.16e},{obj:.16e}")?;
        }
    }
    let mut manifest = Manifest::new("gain", None);
    manifest
        .config
        .insert("gain.factor".into(), format!("{:.16e}", est.factor));
    manifest.record(&trace_path)?;
    manifest.write(out)?;

    println!("objective trace (k, sum of squared p_d differences):");
    for (k, obj) in &est.trace {
        println!("  k = {k:<12.6} objective = {obj:.6e}");
    }
    println!("gain_factor = {:.4}", est.factor);
    println!(
        "radar B needs {:.2}x the samples of radar A for matching detection probabilities",
        est.factor
    );
    Ok(())
}

pub fn selftest() -> Result<(), CliError> {
    let mut failed = 0usize;
    let mut check = |name: &str, ok: bool| {
        println!("selftest {name}: {}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failed += 1;
        }
    };

    // covariance identities
    let mut identity_ok = true;
    for r in [0.0_f64, 0.5, 1.0, 3.0] {
        let p = TmsvParams::ideal(r, 0.0);
        let (minus, plus) = squeezed_variances(&p).map_err(CliError::config)?;
        let tol = 1e-12;
        identity_ok &= (minus - (-2.0 * r).exp()).abs() <= tol * (-2.0 * r).exp().max(1.0);
        identity_ok &= (plus - (2.0 * r).exp()).abs() <= tol * (2.0 * r).exp().max(1.0);
        identity_ok &= (p.c_plus_s() * p.c_minus_s() - 1.0).abs() <= 1e-12;
    }
    check("squeezed-variance identities", identity_ok);

    // deterministic sampling
    let cov = tmsv_covariance(&TmsvParams::ideal(0.4, 0.2)).map_err(CliError::config)?;
    let spec = WindowSpec::new(64, 8, 1234);
    let a = WindowSampler::new(&cov, spec, Condition::On)?;
    let b = WindowSampler::new(&cov, spec, Condition::On)?;
    check(
        "sampler determinism",
        (0..8).all(|w| a.window(w) == b.window(w)),
    );

    // detector orderings
    let sampler = WindowSampler::new(&cov, WindowSpec::new(32, 200, 77), Condition::On)?;
    let mut order_ok = true;
    for w in 0..200 {
        let window = sampler.window(w);
        let d2 = qtms_core::detectors::detector(DetectorId::D2, &window)?;
        let d3 = qtms_core::detectors::detector(DetectorId::D3, &window)?;
        let d4 = qtms_core::detectors::detector(DetectorId::D4, &window)?;
        order_ok &= d2 <= d3 * (1.0 + 1e-12) && d3 <= std::f64::consts::SQRT_2 * d4 * (1.0 + 1e-12);
    }
    check("detector orderings", order_ok);

    // analytic limits
    let mut analytic_ok = true;
    for n in [1.0f64, 8.0, 300.0] {
        let t = 0.4 * n.sqrt();
        let model = AnalyticModel::new(n, 0.0);
        let pd = analytic_pdet(&model, t, 1e-12)?;
        let pf = analytic_pfa(&model, t)?;
        analytic_ok &= pd.to_bits() == pf.to_bits();
    }
    check("detection law reduces to false-alarm law at rho = 0", analytic_ok);

    let n = 1e5;
    let t = invert_pfa(n, 1e-3)?;
    let p = analytic_pfa(&AnalyticModel::new(n, 0.0), t)?;
    check(
        "false-alarm law finite and invertible at N = 1e5",
        p.is_finite() && (p - 1e-3).abs() < 1e-8,
    );

    // empirical roc of identical distributions sits near the diagonal
    let (on, off) = run_experiment(&cov, &cov, WindowSpec::new(64, 400, 99), DetectorId::D5)?;
    let on = DetectorSeries {
        values: off.values.clone(),
        ..on
    };
    let curve = roc_from_series(&on, &off)?;
    check(
        "roc of identical series is the diagonal",
        curve.points.iter().all(|p| p.p_fa == p.p_d),
    );
    let summary = summarize(&on, &off, 16)?;
    check(
        "histogram counts are conserved",
        summary.bins.iter().map(|b| b.count_on).sum::<usize>() == 400,
    );

    if failed > 0 {
        Err(CliError::Check(format!("{failed} selftest check(s) failed")))
    } else {
        println!("selftest: all checks passed");
        Ok(())
    }
}
