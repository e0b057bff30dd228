//! Cross-module pipeline properties: ROC ordering in integration length,
//! statistical null behavior, and the golden covariance text format.

use qtms_core::detectors::{run_experiment, DetectorId};
use qtms_core::roc::{pd_at_pfa, roc_from_series};
use qtms_core::sampler::WindowSpec;
use qtms_core::signal_model::{
    tmn_covariance, tmsv_covariance, Covariance4, TmnParams, TmsvParams,
};

/// Two-sample Kolmogorov-Smirnov p-value (asymptotic distribution of the
/// scaled statistic).
fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        let fa = i as f64 / a.len() as f64;
        let fb = j as f64 / b.len() as f64;
        d = d.max((fa - fb).abs());
    }
    let ne = (a.len() * b.len()) as f64 / (a.len() + b.len()) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    // Q(lambda) = 2 sum_k (-1)^(k-1) exp(-2 k^2 lambda^2)
    let mut q = 0.0;
    let mut sign = 1.0;
    for k in 1..101 {
        let term = (-2.0 * (k as f64 * lambda).powi(2)).exp();
        q += 2.0 * sign * term;
        if term < 1e-12 {
            break;
        }
        sign = -sign;
    }
    q.clamp(0.0, 1.0)
}

#[test]
fn zero_correlation_makes_on_off_indistinguishable() {
    // rho = 0 model: on and off distributions are identical; two-sample KS
    // should not reject at the 1% level with 1000 windows per side
    let p = TmnParams {
        sigma_sq: 0.0,
        noise1_sq: 1.0,
        noise2_sq: 1.3,
        gain1: 1.0,
        gain2: 1.0,
        phase: 0.0,
    };
    let cov = tmn_covariance(&p).unwrap();
    let spec = WindowSpec::new(128, 1_000, 0x6a11);
    let (on, off) = run_experiment(&cov, &cov, spec, DetectorId::D1).unwrap();
    let p_value = ks_two_sample(&on.values, &off.values);
    assert!(p_value > 0.01, "KS p-value {p_value}");
}

#[test]
fn roc_auc_of_null_experiment_is_half() {
    let cov = tmsv_covariance(&TmsvParams::ideal(0.0, 0.0)).unwrap();
    let spec = WindowSpec::new(64, 2_000, 0x6a12);
    let (on, off) = run_experiment(&cov, &cov, spec, DetectorId::D1).unwrap();
    let curve = roc_from_series(&on, &off).unwrap();
    // SE of the AUC for continuous identical distributions
    let (n1, n2) = (on.values.len() as f64, off.values.len() as f64);
    let se = ((n1 + n2 + 1.0) / (12.0 * n1 * n2)).sqrt();
    assert!(
        (curve.auc() - 0.5).abs() <= 3.0 * se,
        "auc {} (se {se})",
        curve.auc()
    );
}

#[test]
fn longer_integration_dominates() {
    // same model, 10x the samples per window: the ROC must dominate
    // pointwise within statistical error
    let p = TmnParams::with_power_and_rho(1.0, 0.03, 0.0).unwrap();
    let cov = tmn_covariance(&p).unwrap();
    let short = WindowSpec::new(2_000, 800, 0x6a13);
    let long = WindowSpec::new(20_000, 800, 0x6a14);
    let (on_s, off_s) = run_experiment(&cov, &cov, short, DetectorId::D1).unwrap();
    let (on_l, off_l) = run_experiment(&cov, &cov, long, DetectorId::D1).unwrap();
    let curve_s = roc_from_series(&on_s, &off_s).unwrap();
    let curve_l = roc_from_series(&on_l, &off_l).unwrap();
    for pfa in [0.01, 0.05, 0.1, 0.3] {
        let ps = pd_at_pfa(&curve_s, pfa).unwrap().p_d;
        let pl = pd_at_pfa(&curve_l, pfa).unwrap().p_d;
        let se = ((ps * (1.0 - ps) + pl * (1.0 - pl)) / 800.0).sqrt();
        assert!(
            pl >= ps - 2.0 * se,
            "pfa={pfa}: long {pl} vs short {ps} (se {se})"
        );
    }
}

#[test]
fn golden_covariance_file_round_trips() {
    let golden = include_str!("golden/tmsv_r05.txt");
    let computed = tmsv_covariance(&TmsvParams::ideal(0.5, 0.0)).unwrap();
    let parsed = Covariance4::from_text(golden).unwrap();
    assert_eq!(parsed, computed);
    assert_eq!(computed.to_text(), golden);
}
