//! The five detector statistics computed over an integration window, plus the
//! full sample covariance.
//!
//! With m_ij the zero-mean sample moments (1/N divisor) of (I1, Q1, I2, Q2):
//!
//! 1. `<I1 I2 - Q1 Q2>` = m02 - m13
//! 2. `|<I1 I2 - Q1 Q2>|`
//! 3. `sqrt((m02 - m13)^2 + (m03 + m12)^2)`
//! 4. `sqrt(m02^2 + m03^2 + m12^2 + m13^2)`
//! 5. `cov(sqrt(I1^2 + Q1^2), sqrt(I2^2 + Q2^2))` with mean subtraction and
//!    the 1/(N-1) divisor, since the envelopes are not zero-mean.
//!
//! Detectors 1 and 2 depend on the correlation phase; 3-5 are invariant under
//! the mode-1 quadrature rotation. None is claimed optimal.

use crate::sampler::{Condition, QuadratureSample, WindowSampler, WindowSpec};
use crate::signal_model::Covariance4;
use thiserror::Error;

/// Errors from detector evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DetectorError {
    #[error("window has {0} samples; at least 2 are required")]
    TooFewSamples(usize),
    #[error(transparent)]
    Sampler(#[from] crate::sampler::SamplerError),
}

/// Identifies one of the five detector functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DetectorId {
    D1,
    D2,
    D3,
    D4,
    D5,
}

impl DetectorId {
    pub const ALL: [DetectorId; 5] = [
        DetectorId::D1,
        DetectorId::D2,
        DetectorId::D3,
        DetectorId::D4,
        DetectorId::D5,
    ];

    pub fn from_index(k: u8) -> Option<Self> {
        match k {
            1 => Some(DetectorId::D1),
            2 => Some(DetectorId::D2),
            3 => Some(DetectorId::D3),
            4 => Some(DetectorId::D4),
            5 => Some(DetectorId::D5),
            _ => None,
        }
    }

    pub fn index(self) -> u8 {
        match self {
            DetectorId::D1 => 1,
            DetectorId::D2 => 2,
            DetectorId::D3 => 3,
            DetectorId::D4 => 4,
            DetectorId::D5 => 5,
        }
    }
}

impl std::fmt::Display for DetectorId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "detector {}", self.index())
    }
}

/// Streaming accumulator of the window statistics every detector needs:
/// the ten second moments plus the envelope sums for detector 5.
#[derive(Debug, Clone, Copy, Default)]
pub struct WindowMoments {
    n: usize,
    /// Upper triangle of sum x x^T in row-major order.
    xx: [f64; 10],
    env1: f64,
    env2: f64,
    env12: f64,
}

impl WindowMoments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_samples(window: &[QuadratureSample]) -> Self {
        let mut acc = Self::new();
        for s in window {
            acc.push(s);
        }
        acc
    }

    #[inline]
    pub fn push(&mut self, s: &QuadratureSample) {
        let x = [s.i1, s.q1, s.i2, s.q2];
        let mut k = 0;
        for i in 0..4 {
            for j in i..4 {
                self.xx[k] += x[i] * x[j];
                k += 1;
            }
        }
        let e1 = s.i1.hypot(s.q1);
        let e2 = s.i2.hypot(s.q2);
        self.env1 += e1;
        self.env2 += e2;
        self.env12 += e1 * e2;
        self.n += 1;
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Zero-mean second moment <x_i x_j> with the 1/N divisor.
    pub fn moment(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        // index into the packed upper triangle
        let k = a * 4 + b - a * (a + 1) / 2;
        self.xx[k] / self.n as f64
    }

    /// The (1/N) sum x x^T moment matrix; symmetric PSD by construction.
    pub fn sample_covariance(&self) -> Result<Covariance4, DetectorError> {
        if self.n < 2 {
            return Err(DetectorError::TooFewSamples(self.n));
        }
        let mut m = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                m[i][j] = self.moment(i, j);
            }
        }
        Ok(Covariance4::from_entries(m).expect("moment matrix is symmetric by construction"))
    }

    /// Centered envelope covariance with the 1/(N-1) divisor (detector 5).
    pub fn envelope_covariance(&self) -> Result<f64, DetectorError> {
        if self.n < 2 {
            return Err(DetectorError::TooFewSamples(self.n));
        }
        let n = self.n as f64;
        Ok((self.env12 - self.env1 * self.env2 / n) / (n - 1.0))
    }

    /// One detector output for this window.
    pub fn detector(&self, id: DetectorId) -> Result<f64, DetectorError> {
        if self.n < 2 {
            return Err(DetectorError::TooFewSamples(self.n));
        }
        let d1 = self.moment(0, 2) - self.moment(1, 3);
        let cross = self.moment(0, 3) + self.moment(1, 2);
        Ok(match id {
            DetectorId::D1 => d1,
            DetectorId::D2 => d1.abs(),
            DetectorId::D3 => d1.hypot(cross),
            DetectorId::D4 => (self.moment(0, 2).powi(2)
                + self.moment(0, 3).powi(2)
                + self.moment(1, 2).powi(2)
                + self.moment(1, 3).powi(2))
            .sqrt(),
            DetectorId::D5 => self.envelope_covariance()?,
        })
    }
}

/// Sample covariance of a window (moment matrix, 1/N divisor).
pub fn sample_covariance(window: &[QuadratureSample]) -> Result<Covariance4, DetectorError> {
    WindowMoments::from_samples(window).sample_covariance()
}

/// One detector output over a window of samples.
pub fn detector(id: DetectorId, window: &[QuadratureSample]) -> Result<f64, DetectorError> {
    WindowMoments::from_samples(window).detector(id)
}

/// Ordered per-window detector outputs for one on/off condition.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorSeries {
    pub detector_id: DetectorId,
    pub condition: Condition,
    pub window_len: usize,
    pub values: Vec<f64>,
}

impl DetectorSeries {
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Standard error of the mean.
    pub fn standard_error(&self) -> f64 {
        let n = self.values.len() as f64;
        let mean = self.mean();
        let var = self
            .values
            .iter()
            .map(|v| (v - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        (var / n).sqrt()
    }
}

/// Runs one detector over every window under both conditions, with
/// independent substreams for on and off. Window generation is parallel when
/// the `parallel` feature is on; outputs do not depend on scheduling.
pub fn run_experiment(
    cov_on: &Covariance4,
    cov_off: &Covariance4,
    spec: WindowSpec,
    id: DetectorId,
) -> Result<(DetectorSeries, DetectorSeries), DetectorError> {
    let on = detector_series(cov_on, spec, Condition::On, id, false)?;
    let off = detector_series(cov_off, spec, Condition::Off, id, false)?;
    Ok((on, off))
}

/// Sequential reference version of [`run_experiment`] (used by the benchmark
/// suite and the determinism tests).
pub fn run_experiment_seq(
    cov_on: &Covariance4,
    cov_off: &Covariance4,
    spec: WindowSpec,
    id: DetectorId,
) -> Result<(DetectorSeries, DetectorSeries), DetectorError> {
    let on = detector_series(cov_on, spec, Condition::On, id, true)?;
    let off = detector_series(cov_off, spec, Condition::Off, id, true)?;
    Ok((on, off))
}

/// Like [`run_experiment`] but evaluates all five detectors from a single
/// pass over the windows.
pub fn run_experiment_all(
    cov_on: &Covariance4,
    cov_off: &Covariance4,
    spec: WindowSpec,
) -> Result<[(DetectorSeries, DetectorSeries); 5], DetectorError> {
    if spec.window_len < 2 {
        return Err(DetectorError::TooFewSamples(spec.window_len));
    }
    let all = |cov: &Covariance4, condition: Condition| -> Result<Vec<[f64; 5]>, DetectorError> {
        let sampler = WindowSampler::new(cov, spec, condition)?;
        Ok(sampler.map_windows(|w, s| {
            let m = s.fold_window(w, WindowMoments::new(), |mut acc, sample| {
                acc.push(&sample);
                acc
            });
            let mut out = [0.0; 5];
            for (v, id) in out.iter_mut().zip(DetectorId::ALL) {
                *v = m.detector(id).expect("window length checked above");
            }
            out
        }))
    };
    let on = all(cov_on, Condition::On)?;
    let off = all(cov_off, Condition::Off)?;
    let series = |rows: &[[f64; 5]], condition: Condition, k: usize| DetectorSeries {
        detector_id: DetectorId::ALL[k],
        condition,
        window_len: spec.window_len,
        values: rows.iter().map(|r| r[k]).collect(),
    };
    Ok(std::array::from_fn(|k| {
        (
            series(&on, Condition::On, k),
            series(&off, Condition::Off, k),
        )
    }))
}

fn detector_series(
    cov: &Covariance4,
    spec: WindowSpec,
    condition: Condition,
    id: DetectorId,
    sequential: bool,
) -> Result<DetectorSeries, DetectorError> {
    if spec.window_len < 2 {
        return Err(DetectorError::TooFewSamples(spec.window_len));
    }
    let sampler = WindowSampler::new(cov, spec, condition)?;
    let eval = |w: usize, s: &WindowSampler| {
        let moments = s.fold_window(w, WindowMoments::new(), |mut acc, sample| {
            acc.push(&sample);
            acc
        });
        moments.detector(id).expect("window length checked above")
    };
    let values = if sequential {
        sampler.map_windows_seq(eval)
    } else {
        sampler.map_windows(eval)
    };
    Ok(DetectorSeries {
        detector_id: id,
        condition,
        window_len: spec.window_len,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::WindowSpec;
    use crate::signal_model::{tmn_covariance, tmsv_covariance, TmnParams, TmsvParams};
    use approx::assert_relative_eq;

    /// Eight deterministic samples whose 1/N moment matrix equals `cov`
    /// exactly (up to factorization rounding): +/- 2 F e_k for each column k.
    fn window_with_exact_moments(cov: &Covariance4) -> Vec<QuadratureSample> {
        let eig = cov.as_matrix().symmetric_eigen();
        let mut window = Vec::with_capacity(8);
        for k in 0..4 {
            let root = eig.eigenvalues[k].max(0.0).sqrt();
            let col = [
                2.0 * eig.eigenvectors[(0, k)] * root,
                2.0 * eig.eigenvectors[(1, k)] * root,
                2.0 * eig.eigenvectors[(2, k)] * root,
                2.0 * eig.eigenvectors[(3, k)] * root,
            ];
            for sign in [1.0, -1.0] {
                window.push(QuadratureSample {
                    i1: sign * col[0],
                    q1: sign * col[1],
                    i2: sign * col[2],
                    q2: sign * col[3],
                });
            }
        }
        window
    }

    #[test]
    fn constant_window_gives_outer_product() {
        let s = QuadratureSample {
            i1: 1.0,
            q1: -2.0,
            i2: 0.5,
            q2: 3.0,
        };
        let cov = sample_covariance(&[s; 4]).unwrap();
        let x = [s.i1, s.q1, s.i2, s.q2];
        for i in 0..4 {
            for j in 0..4 {
                assert_relative_eq!(cov.entry(i, j), x[i] * x[j], max_relative = 1e-15);
            }
        }
    }

    #[test]
    fn exact_moments_recover_model_covariance() {
        let model = tmsv_covariance(&TmsvParams::ideal(0.5, 0.3)).unwrap();
        let window = window_with_exact_moments(&model);
        let cov = sample_covariance(&window).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!(
                    (cov.entry(i, j) - model.entry(i, j)).abs() < 1e-13,
                    "({i},{j}): {} vs {}",
                    cov.entry(i, j),
                    model.entry(i, j)
                );
            }
        }
    }

    #[test]
    fn detectors_on_rotated_moments() {
        // At phi = 0: D1 = 2 rho s1 s2, D3 = D2 = |D1|, D4 = sqrt(2) rho s1 s2
        let p = TmnParams::with_power_and_rho(2.0, 0.4, 0.0).unwrap();
        let cov = tmn_covariance(&p).unwrap();
        let window = window_with_exact_moments(&cov);
        let moments = WindowMoments::from_samples(&window);
        let rs = p.rho() * (p.sigma1_sq() * p.sigma2_sq()).sqrt();
        assert_relative_eq!(
            moments.detector(DetectorId::D1).unwrap(),
            2.0 * rs,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            moments.detector(DetectorId::D2).unwrap(),
            moments.detector(DetectorId::D3).unwrap(),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            moments.detector(DetectorId::D4).unwrap(),
            std::f64::consts::SQRT_2 * rs,
            max_relative = 1e-12
        );
    }

    #[test]
    fn detectors_vanish_without_correlation() {
        let cov = tmsv_covariance(&TmsvParams::ideal(0.7, 0.9))
            .unwrap()
            .with_zero_cross_blocks();
        let window = window_with_exact_moments(&cov);
        let moments = WindowMoments::from_samples(&window);
        assert!(moments.detector(DetectorId::D1).unwrap().abs() < 1e-13);
        assert!(moments.detector(DetectorId::D4).unwrap().abs() < 1e-13);
    }

    #[test]
    fn detector_ordering_is_pure_algebra() {
        // D2 <= D3 <= sqrt(2) D4 for every window
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let window: Vec<QuadratureSample> = (0..8)
                .map(|_| QuadratureSample {
                    i1: rng.random::<f64>() * 4.0 - 2.0,
                    q1: rng.random::<f64>() * 4.0 - 2.0,
                    i2: rng.random::<f64>() * 4.0 - 2.0,
                    q2: rng.random::<f64>() * 4.0 - 2.0,
                })
                .collect();
            let m = WindowMoments::from_samples(&window);
            let d2 = m.detector(DetectorId::D2).unwrap();
            let d3 = m.detector(DetectorId::D3).unwrap();
            let d4 = m.detector(DetectorId::D4).unwrap();
            assert!(d2 <= d3 * (1.0 + 1e-12));
            assert!(d3 <= std::f64::consts::SQRT_2 * d4 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn too_few_samples_is_an_error() {
        let w = vec![QuadratureSample {
            i1: 1.0,
            q1: 0.0,
            i2: 0.0,
            q2: 0.0,
        }];
        assert!(matches!(
            detector(DetectorId::D1, &w),
            Err(DetectorError::TooFewSamples(1))
        ));
        assert!(sample_covariance(&w).is_err());
    }

    #[test]
    fn experiment_mean_matches_model() {
        // TMSV r = 0.5: E[D1] = 2 sinh(1)
        let cov = tmsv_covariance(&TmsvParams::ideal(0.5, 0.0)).unwrap();
        let spec = WindowSpec::new(10_000, 400, 13);
        let (on, off) = run_experiment(&cov, &cov, spec, DetectorId::D1).unwrap();
        let want = 2.0 * 1.0_f64.sinh();
        assert!(
            (on.mean() - want).abs() <= 5.0 * on.standard_error(),
            "on mean {} vs {want} (se {})",
            on.mean(),
            on.standard_error()
        );
        assert!(
            off.mean().abs() <= 5.0 * off.standard_error(),
            "off mean {} (se {})",
            off.mean(),
            off.standard_error()
        );
    }

    #[test]
    fn unrotated_d1_mean_tracks_phase() {
        // E[D1] = 2 rho s1 s2 cos(phi) under the unrotated model
        for (rho, phase) in [(0.2, 0.0), (0.5, 1.1), (0.8, -2.3)] {
            let p = TmnParams::with_power_and_rho(1.5, rho, phase).unwrap();
            let cov = tmn_covariance(&p).unwrap();
            let spec = WindowSpec::new(2_000, 300, 17);
            let (on, _) = run_experiment(&cov, &cov, spec, DetectorId::D1).unwrap();
            let want = 2.0 * rho * (p.sigma1_sq() * p.sigma2_sq()).sqrt() * phase.cos();
            assert!(
                (on.mean() - want).abs() <= 5.0 * on.standard_error(),
                "rho={rho} phase={phase}: mean {} vs {want}",
                on.mean()
            );
        }
    }

    #[test]
    fn parallel_and_sequential_agree_bitwise() {
        let cov = tmsv_covariance(&TmsvParams::ideal(0.4, 0.1)).unwrap();
        let spec = WindowSpec::new(256, 32, 23);
        let (on_a, off_a) = run_experiment(&cov, &cov, spec, DetectorId::D3).unwrap();
        let (on_b, off_b) = run_experiment_seq(&cov, &cov, spec, DetectorId::D3).unwrap();
        assert_eq!(on_a, on_b);
        assert_eq!(off_a, off_b);
    }
}
