//! Covariance models for the two radar signal sources.
//!
//! The classical two-mode noise (TMN) radar mixes a carrier with band-limited
//! Gaussian noise, producing two correlated sidebands; after demodulation and
//! the amplifier chain its quadratures are zero-mean Gaussian with the block
//! covariance built by [`tmn_covariance`]. The quantum radar transmits one
//! mode of a two-mode squeezed vacuum (TMSV) state, whose ideal covariance is
//! built by [`tmsv_covariance`]; amplifier noise enters as per-quadrature
//! diagonal additions. Index order everywhere is (I1, Q1, I2, Q2).

use nalgebra::Matrix4;
use thiserror::Error;

/// Errors from covariance-model construction and parsing.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SignalModelError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("phase must be zero (rotate the data first), got {0}")]
    PhaseNonzero(f64),
    #[error("matrix is not symmetric: |m[{i}][{j}] - m[{j}][{i}]| = {delta:e}")]
    NotSymmetric { i: usize, j: usize, delta: f64 },
    #[error("covariance parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Parameters of the classical two-mode noise model.
///
/// `sigma_sq` is the per-quadrature variance of the source Gaussian noise,
/// `noise1_sq`/`noise2_sq` are the added-noise variances of the two receiver
/// chains, `gain1`/`gain2` the amplitude factors, and `phase` the
/// inter-digitizer phase offset (radians).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TmnParams {
    pub sigma_sq: f64,
    pub noise1_sq: f64,
    pub noise2_sq: f64,
    pub gain1: f64,
    pub gain2: f64,
    pub phase: f64,
}

impl TmnParams {
    pub fn validate(&self) -> Result<(), SignalModelError> {
        let all_finite = [
            self.sigma_sq,
            self.noise1_sq,
            self.noise2_sq,
            self.gain1,
            self.gain2,
            self.phase,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !all_finite {
            return Err(SignalModelError::InvalidParams(
                "TMN parameters must be finite".into(),
            ));
        }
        if self.sigma_sq < 0.0 || self.noise1_sq < 0.0 || self.noise2_sq < 0.0 {
            return Err(SignalModelError::InvalidParams(
                "variances must be non-negative".into(),
            ));
        }
        if self.gain1 <= 0.0 || self.gain2 <= 0.0 {
            return Err(SignalModelError::InvalidParams(
                "gains must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Pearson correlation rho = [(1 + n1/s)(1 + n2/s)]^(-1/2).
    ///
    /// A source with zero variance carries no correlated component, so
    /// rho = 0 in that limit; with zero added noise rho = 1 (degenerate but
    /// allowed for oracle tests).
    pub fn rho(&self) -> f64 {
        if self.sigma_sq == 0.0 {
            return 0.0;
        }
        ((1.0 + self.noise1_sq / self.sigma_sq) * (1.0 + self.noise2_sq / self.sigma_sq)).sqrt()
            .recip()
    }

    /// Per-quadrature variance of mode 1: A1^2 (s + n1).
    pub fn sigma1_sq(&self) -> f64 {
        self.gain1 * self.gain1 * (self.sigma_sq + self.noise1_sq)
    }

    /// Per-quadrature variance of mode 2: A2^2 (s + n2).
    pub fn sigma2_sq(&self) -> f64 {
        self.gain2 * self.gain2 * (self.sigma_sq + self.noise2_sq)
    }

    /// Symmetric parameters hitting a target per-quadrature power and
    /// correlation: unit source variance, equal added noise fixing rho, and
    /// equal gains fixing the power.
    pub fn with_power_and_rho(power: f64, rho: f64, phase: f64) -> Result<Self, SignalModelError> {
        if !power.is_finite() || power <= 0.0 || !rho.is_finite() || rho <= 0.0 || rho > 1.0 {
            return Err(SignalModelError::InvalidParams(format!(
                "need power > 0 and 0 < rho <= 1, got power={power}, rho={rho}"
            )));
        }
        let noise_sq = 1.0 / rho - 1.0;
        let gain = (power * rho).sqrt();
        let params = Self {
            sigma_sq: 1.0,
            noise1_sq: noise_sq,
            noise2_sq: noise_sq,
            gain1: gain,
            gain2: gain,
            phase,
        };
        params.validate()?;
        Ok(params)
    }
}

/// Parameters of the two-mode squeezed vacuum model.
///
/// `squeeze_r` and `phase` are the magnitude and phase of the squeezing
/// parameter; the two `extra_noise*_sq` terms model the amplifier chain as
/// per-quadrature additive noise on top of the ideal state (amplification
/// destroys the entanglement but not the correlation).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TmsvParams {
    pub squeeze_r: f64,
    pub phase: f64,
    pub extra_noise1_sq: f64,
    pub extra_noise2_sq: f64,
}

impl TmsvParams {
    /// Ideal state with no added noise.
    pub fn ideal(squeeze_r: f64, phase: f64) -> Self {
        Self {
            squeeze_r,
            phase,
            extra_noise1_sq: 0.0,
            extra_noise2_sq: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), SignalModelError> {
        let all_finite = [
            self.squeeze_r,
            self.phase,
            self.extra_noise1_sq,
            self.extra_noise2_sq,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !all_finite {
            return Err(SignalModelError::InvalidParams(
                "TMSV parameters must be finite".into(),
            ));
        }
        if self.squeeze_r < 0.0 {
            return Err(SignalModelError::InvalidParams(
                "squeeze_r must be non-negative".into(),
            ));
        }
        if self.extra_noise1_sq < 0.0 || self.extra_noise2_sq < 0.0 {
            return Err(SignalModelError::InvalidParams(
                "extra noise must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// C = cosh 2r, evaluated through expm1 so that C - S stays meaningful
    /// at small r.
    pub fn c(&self) -> f64 {
        let e = (2.0 * self.squeeze_r).exp_m1();
        1.0 + e * e / (2.0 * (1.0 + e))
    }

    /// S = sinh 2r, same expm1-based evaluation.
    pub fn s(&self) -> f64 {
        let e = (2.0 * self.squeeze_r).exp_m1();
        e * (e + 2.0) / (2.0 * (1.0 + e))
    }

    /// C + S = e^{2r} without cancellation.
    pub fn c_plus_s(&self) -> f64 {
        (2.0 * self.squeeze_r).exp()
    }

    /// C - S = e^{-2r} without cancellation.
    pub fn c_minus_s(&self) -> f64 {
        (-2.0 * self.squeeze_r).exp()
    }

    /// Per-quadrature variance of mode 1 including extra noise.
    pub fn sigma1_sq(&self) -> f64 {
        self.c() + self.extra_noise1_sq
    }

    /// Per-quadrature variance of mode 2 including extra noise.
    pub fn sigma2_sq(&self) -> f64 {
        self.c() + self.extra_noise2_sq
    }

    /// Correlation coefficient S / sqrt((C + n1)(C + n2)).
    pub fn rho(&self) -> f64 {
        self.s() / (self.sigma1_sq() * self.sigma2_sq()).sqrt()
    }

    /// Parameters hitting a target per-quadrature power and correlation by
    /// choosing r so that sinh 2r = rho * power and absorbing the remaining
    /// power into symmetric extra noise.
    pub fn with_power_and_rho(power: f64, rho: f64, phase: f64) -> Result<Self, SignalModelError> {
        if !power.is_finite() || power <= 0.0 || !rho.is_finite() || rho <= 0.0 || rho >= 1.0 {
            return Err(SignalModelError::InvalidParams(format!(
                "need power > 0 and 0 < rho < 1, got power={power}, rho={rho}"
            )));
        }
        let s = rho * power;
        let c = s.hypot(1.0); // cosh from sinh
        if c > power {
            return Err(SignalModelError::InvalidParams(format!(
                "power {power} too small to carry correlation {rho} (needs >= {c})"
            )));
        }
        let extra = power - c;
        let params = Self {
            squeeze_r: 0.5 * s.asinh(),
            phase,
            extra_noise1_sq: extra,
            extra_noise2_sq: extra,
        };
        params.validate()?;
        Ok(params)
    }
}

/// Symmetric 4x4 covariance of one joint quadrature measurement, index order
/// (I1, Q1, I2, Q2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Covariance4 {
    m: [[f64; 4]; 4],
}

impl Covariance4 {
    /// Asymmetry beyond this (relative to the largest entry) is rejected.
    pub const SYMMETRY_TOL: f64 = 1e-9;

    /// Builds from row-major entries, rejecting non-finite or asymmetric
    /// input. Positive semidefiniteness is not enforced here; see
    /// [`validate_physical`] and the sampler.
    pub fn from_entries(m: [[f64; 4]; 4]) -> Result<Self, SignalModelError> {
        let mut scale = 0.0_f64;
        for row in &m {
            for &v in row {
                if !v.is_finite() {
                    return Err(SignalModelError::InvalidParams(
                        "covariance entries must be finite".into(),
                    ));
                }
                scale = scale.max(v.abs());
            }
        }
        for i in 0..4 {
            for j in (i + 1)..4 {
                let delta = (m[i][j] - m[j][i]).abs();
                if delta > Self::SYMMETRY_TOL * scale.max(1.0) {
                    return Err(SignalModelError::NotSymmetric { i, j, delta });
                }
            }
        }
        Ok(Self { m })
    }

    pub fn entries(&self) -> &[[f64; 4]; 4] {
        &self.m
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.m[i][j]
    }

    /// Off-diagonal block R12 relating mode 1 to mode 2; its statistics drive
    /// the matched filtering.
    pub fn cross_block(&self) -> [[f64; 2]; 2] {
        [
            [self.m[0][2], self.m[0][3]],
            [self.m[1][2], self.m[1][3]],
        ]
    }

    /// Per-quadrature variance of mode 1, averaged over I1 and Q1.
    pub fn sigma1_sq(&self) -> f64 {
        0.5 * (self.m[0][0] + self.m[1][1])
    }

    /// Per-quadrature variance of mode 2, averaged over I2 and Q2.
    pub fn sigma2_sq(&self) -> f64 {
        0.5 * (self.m[2][2] + self.m[3][3])
    }

    /// Every entry multiplied by `factor` (unit conversions).
    pub fn scaled(&self, factor: f64) -> Self {
        let mut m = self.m;
        for row in &mut m {
            for v in row.iter_mut() {
                *v *= factor;
            }
        }
        Self { m }
    }

    /// The same diagonal blocks with R12 = 0: the covariance seen when the
    /// signal generator is off but the receiver chains still run.
    pub fn with_zero_cross_blocks(&self) -> Self {
        let mut m = self.m;
        for i in 0..2 {
            for j in 2..4 {
                m[i][j] = 0.0;
                m[j][i] = 0.0;
            }
        }
        Self { m }
    }

    /// Conjugates by the mode-1 quadrature rotation, shifting the correlation
    /// phase of a TMN/TMSV-shaped matrix by `delta` while leaving the
    /// diagonal blocks untouched.
    pub fn rephased(&self, delta: f64) -> Self {
        let (c, s) = (delta.cos(), delta.sin());
        // G = blockdiag(R(delta), I), result = G * M * G^T
        let g = Matrix4::new(
            c, -s, 0.0, 0.0, //
            s, c, 0.0, 0.0, //
            0.0, 0.0, 1.0, 0.0, //
            0.0, 0.0, 0.0, 1.0,
        );
        let m = Matrix4::from_fn(|i, j| self.m[i][j]);
        let out = g * m * g.transpose();
        let mut res = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                res[i][j] = out[(i, j)];
            }
        }
        // restore exact symmetry lost to rounding
        for i in 0..4 {
            for j in (i + 1)..4 {
                let v = 0.5 * (res[i][j] + res[j][i]);
                res[i][j] = v;
                res[j][i] = v;
            }
        }
        Self { m: res }
    }

    pub(crate) fn as_matrix(&self) -> Matrix4<f64> {
        Matrix4::from_fn(|i, j| self.m[i][j])
    }

    /// Plain-text serialization: four rows of four values, whitespace
    /// separated, 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for row in &self.m {
            let fields: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            out.push_str(&fields.join(" "));
            out.push('\n');
        }
        out
    }

    /// Parses the [`to_text`](Self::to_text) format; accepts any whitespace
    /// layout as long as 16 values appear in row-major order.
    pub fn from_text(text: &str) -> Result<Self, SignalModelError> {
        let mut values = Vec::with_capacity(16);
        for (idx, line) in text.lines().enumerate() {
            for tok in line.split_whitespace() {
                let v: f64 = tok.parse().map_err(|_| SignalModelError::Parse {
                    line: idx + 1,
                    message: format!("not a number: {tok:?}"),
                })?;
                values.push(v);
            }
        }
        if values.len() != 16 {
            return Err(SignalModelError::Parse {
                line: text.lines().count(),
                message: format!("expected 16 values, found {}", values.len()),
            });
        }
        let mut m = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                m[i][j] = values[4 * i + j];
            }
        }
        Self::from_entries(m)
    }
}

/// Covariance of the classical two-mode noise radar: diagonal blocks
/// sigma_i^2 I, off-diagonal block rho*s [[cos phi, sin phi], [sin phi,
/// -cos phi]]. The negative `<Q1 Q2>` entry (for cos phi > 0) is the signature
/// of the sideband generation: the quadratures are anticorrelated.
pub fn tmn_covariance(params: &TmnParams) -> Result<Covariance4, SignalModelError> {
    params.validate()?;
    let s1 = params.sigma1_sq();
    let s2 = params.sigma2_sq();
    let rs = params.rho() * (s1 * s2).sqrt();
    let (c, s) = (params.phase.cos(), params.phase.sin());
    Covariance4::from_entries([
        [s1, 0.0, rs * c, rs * s],
        [0.0, s1, rs * s, -rs * c],
        [rs * c, rs * s, s2, 0.0],
        [rs * s, -rs * c, 0.0, s2],
    ])
}

/// Covariance of the two-mode squeezed vacuum model: the ideal state has
/// diagonal C = cosh 2r and the same off-diagonal pattern as the TMN matrix
/// with S = sinh 2r in place of rho*s; extra noise adds to the diagonal only.
///
/// With zero extra noise this equals the TMN matrix under the substitution
/// sigma1^2 = sigma2^2 = cosh 2r, rho = tanh 2r.
pub fn tmsv_covariance(params: &TmsvParams) -> Result<Covariance4, SignalModelError> {
    params.validate()?;
    let big_c = params.c();
    let big_s = params.s();
    let (c, s) = (params.phase.cos(), params.phase.sin());
    Covariance4::from_entries([
        [big_c + params.extra_noise1_sq, 0.0, big_s * c, big_s * s],
        [0.0, big_c + params.extra_noise1_sq, big_s * s, -big_s * c],
        [big_s * c, big_s * s, big_c + params.extra_noise2_sq, 0.0],
        [big_s * s, -big_s * c, 0.0, big_c + params.extra_noise2_sq],
    ])
}

/// Variances of the squeezed combinations (I1 - I2)/sqrt(2) and
/// (I1 + I2)/sqrt(2) for an ideal state at phase zero, evaluated as quadratic
/// forms on the covariance matrix (not from the e^{±2r} closed form, so the
/// identity with it is a testable property).
pub fn squeezed_variances(params: &TmsvParams) -> Result<(f64, f64), SignalModelError> {
    params.validate()?;
    if params.phase != 0.0 {
        return Err(SignalModelError::PhaseNonzero(params.phase));
    }
    if params.extra_noise1_sq != 0.0 || params.extra_noise2_sq != 0.0 {
        return Err(SignalModelError::InvalidParams(
            "squeezed variances are defined for the ideal state (no extra noise)".into(),
        ));
    }
    let cov = tmsv_covariance(params)?;
    let quad = |v: [f64; 4]| {
        let mut acc = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                acc += v[i] * cov.entry(i, j) * v[j];
            }
        }
        acc
    };
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let minus = quad([inv_sqrt2, 0.0, -inv_sqrt2, 0.0]);
    let plus = quad([inv_sqrt2, 0.0, inv_sqrt2, 0.0]);
    Ok((minus, plus))
}

/// det(R12), the paper's necessary entanglement-side condition: negative for
/// any correlated two-mode model of this family (also for the ideal TMN
/// matrix, which is why TMN is a fair baseline).
pub fn entanglement_witness(cov: &Covariance4) -> f64 {
    let b = cov.cross_block();
    b[0][0] * b[1][1] - b[0][1] * b[1][0]
}

/// Unit system for physicality checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Units {
    /// Arbitrary volts^2; only symmetry and positive semidefiniteness apply.
    Volts,
    /// Natural units where the vacuum uncertainty product is 1/4; enables the
    /// per-mode sigma_I^2 sigma_Q^2 >= 1/4 check.
    Vacuum,
}

/// Outcome of [`validate_physical`]; carries one flag per check so callers
/// can report failures individually.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalityReport {
    pub symmetric: bool,
    pub positive_semidefinite: bool,
    /// Smallest eigenvalue found (diagnostic).
    pub min_eigenvalue: f64,
    /// Per-mode uncertainty products, vacuum units only.
    pub mode1_uncertainty: Option<bool>,
    pub mode2_uncertainty: Option<bool>,
}

impl PhysicalityReport {
    pub fn all_pass(&self) -> bool {
        self.symmetric
            && self.positive_semidefinite
            && self.mode1_uncertainty.unwrap_or(true)
            && self.mode2_uncertainty.unwrap_or(true)
    }
}

/// Checks symmetry and positive semidefiniteness, and in vacuum units the
/// per-mode uncertainty products sigma_I^2 sigma_Q^2 >= 1/4. Never errors;
/// failures are carried in the report.
pub fn validate_physical(cov: &Covariance4, units: Units) -> PhysicalityReport {
    let m = cov.entries();
    let mut scale = 0.0_f64;
    for row in m {
        for &v in row {
            scale = scale.max(v.abs());
        }
    }
    let mut symmetric = true;
    for i in 0..4 {
        for j in (i + 1)..4 {
            if (m[i][j] - m[j][i]).abs() > Covariance4::SYMMETRY_TOL * scale.max(1.0) {
                symmetric = false;
            }
        }
    }
    let eig = cov.as_matrix().symmetric_eigen();
    let min_eigenvalue = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let positive_semidefinite = min_eigenvalue >= -1e-10 * scale.max(1.0);
    let (mode1_uncertainty, mode2_uncertainty) = match units {
        Units::Volts => (None, None),
        Units::Vacuum => (
            Some(m[0][0] * m[1][1] >= 0.25),
            Some(m[2][2] * m[3][3] >= 0.25),
        ),
    };
    PhysicalityReport {
        symmetric,
        positive_semidefinite,
        min_eigenvalue,
        mode1_uncertainty,
        mode2_uncertainty,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn assert_matrix_eq(cov: &Covariance4, want: [[f64; 4]; 4], tol: f64) {
        for i in 0..4 {
            for j in 0..4 {
                assert!(
                    (cov.entry(i, j) - want[i][j]).abs() <= tol,
                    "entry ({i},{j}): got {}, want {}",
                    cov.entry(i, j),
                    want[i][j]
                );
            }
        }
    }

    #[test]
    fn tmn_noiseless_limit() {
        let p = TmnParams {
            sigma_sq: 1.0,
            noise1_sq: 0.0,
            noise2_sq: 0.0,
            gain1: 1.0,
            gain2: 1.0,
            phase: 0.0,
        };
        assert_eq!(p.rho(), 1.0);
        let cov = tmn_covariance(&p).unwrap();
        assert_matrix_eq(
            &cov,
            [
                [1.0, 0.0, 1.0, 0.0],
                [0.0, 1.0, 0.0, -1.0],
                [1.0, 0.0, 1.0, 0.0],
                [0.0, -1.0, 0.0, 1.0],
            ],
            0.0,
        );
    }

    #[test]
    fn tmn_equal_noise_halves_rho() {
        let p = TmnParams {
            sigma_sq: 1.0,
            noise1_sq: 1.0,
            noise2_sq: 1.0,
            gain1: 1.0,
            gain2: 1.0,
            phase: 0.0,
        };
        assert_relative_eq!(p.rho(), 0.5, max_relative = 1e-15);
        let cov = tmn_covariance(&p).unwrap();
        // rho * s = 0.5 * sqrt(2) * sqrt(2) = 1
        assert_relative_eq!(cov.entry(0, 2), 1.0, max_relative = 1e-15);
        assert_relative_eq!(cov.entry(1, 3), -1.0, max_relative = 1e-15);
    }

    #[test]
    fn tmn_quarter_turn_moves_correlation_to_cross_terms() {
        let p = TmnParams {
            sigma_sq: 2.0,
            noise1_sq: 0.5,
            noise2_sq: 1.0,
            gain1: 1.2,
            gain2: 0.7,
            phase: std::f64::consts::FRAC_PI_2,
        };
        let cov = tmn_covariance(&p).unwrap();
        let rs = p.rho() * (p.sigma1_sq() * p.sigma2_sq()).sqrt();
        assert!(cov.entry(0, 2).abs() < 1e-15 * rs);
        assert_relative_eq!(cov.entry(0, 3), rs, max_relative = 1e-12);
        assert_relative_eq!(cov.entry(1, 2), rs, max_relative = 1e-12);
    }

    #[test]
    fn tmsv_vacuum_is_identity() {
        let cov = tmsv_covariance(&TmsvParams::ideal(0.0, 1.3)).unwrap();
        assert_matrix_eq(
            &cov,
            [
                [1.0, 0.0, 0.0, 0.0],
                [0.0, 1.0, 0.0, 0.0],
                [0.0, 0.0, 1.0, 0.0],
                [0.0, 0.0, 0.0, 1.0],
            ],
            0.0,
        );
    }

    #[test]
    fn tmsv_half_squeeze() {
        let cov = tmsv_covariance(&TmsvParams::ideal(0.5, 0.0)).unwrap();
        let c = 1.0_f64.cosh();
        let s = 1.0_f64.sinh();
        assert_relative_eq!(cov.entry(0, 0), c, max_relative = 1e-15);
        assert_relative_eq!(cov.entry(0, 2), s, max_relative = 1e-15);
        assert_relative_eq!(cov.entry(1, 3), -s, max_relative = 1e-15);
    }

    #[test]
    fn tmsv_equals_tmn_under_substitution() {
        for r in [0.0f64, 0.1, 0.5, 1.0, 3.0] {
            for phase in [0.0, 0.9, -2.0] {
                let tmsv = TmsvParams::ideal(r, phase);
                let quantum = tmsv_covariance(&tmsv).unwrap();
                let rho = (2.0 * r).tanh();
                let classical = if rho == 0.0 {
                    tmn_covariance(&TmnParams {
                        sigma_sq: 0.0,
                        noise1_sq: 1.0,
                        noise2_sq: 1.0,
                        gain1: 1.0,
                        gain2: 1.0,
                        phase,
                    })
                    .unwrap()
                } else {
                    tmn_covariance(
                        &TmnParams::with_power_and_rho((2.0 * r).cosh(), rho, phase).unwrap(),
                    )
                    .unwrap()
                };
                for i in 0..4 {
                    for j in 0..4 {
                        assert!(
                            (quantum.entry(i, j) - classical.entry(i, j)).abs() <= 1e-12,
                            "r={r} phase={phase} ({i},{j}): {} vs {}",
                            quantum.entry(i, j),
                            classical.entry(i, j)
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn squeezed_variances_match_exponentials() {
        let (lo, hi) = squeezed_variances(&TmsvParams::ideal(0.0, 0.0)).unwrap();
        assert_relative_eq!(lo, 1.0, max_relative = 1e-15);
        assert_relative_eq!(hi, 1.0, max_relative = 1e-15);
        for r in [0.1f64, 0.5, 1.0, 3.0] {
            let (lo, hi) = squeezed_variances(&TmsvParams::ideal(r, 0.0)).unwrap();
            let tol = 1e-12;
            assert!(
                (lo - (-2.0 * r).exp()).abs() <= tol * (-2.0 * r).exp().max(1.0),
                "r={r}: var_minus {lo}"
            );
            assert!(
                (hi - (2.0 * r).exp()).abs() <= tol * (2.0 * r).exp().max(1.0),
                "r={r}: var_plus {hi}"
            );
            assert_relative_eq!(lo * hi, 1.0, max_relative = 1e-11);
        }
    }

    #[test]
    fn squeezed_variances_reject_nonzero_phase_or_noise() {
        assert!(matches!(
            squeezed_variances(&TmsvParams::ideal(0.5, 0.1)),
            Err(SignalModelError::PhaseNonzero(_))
        ));
        let mut p = TmsvParams::ideal(0.5, 0.0);
        p.extra_noise1_sq = 0.5;
        assert!(squeezed_variances(&p).is_err());
    }

    #[test]
    fn witness_is_minus_s_squared() {
        for r in [0.2f64, 1.0, 2.5] {
            for phase in [0.0, 0.7, 2.9] {
                let cov = tmsv_covariance(&TmsvParams::ideal(r, phase)).unwrap();
                let s = (2.0 * r).sinh();
                assert_relative_eq!(
                    entanglement_witness(&cov),
                    -s * s,
                    max_relative = 1e-12
                );
            }
        }
        let vac = tmsv_covariance(&TmsvParams::ideal(0.0, 0.0)).unwrap();
        assert_eq!(entanglement_witness(&vac), 0.0);
    }

    #[test]
    fn witness_on_tmn_block() {
        // rho = 1/2, s = sqrt(2 * 2) = 2, phi = 0: det [[1, 0], [0, -1]] = -1
        let p = TmnParams {
            sigma_sq: 1.0,
            noise1_sq: 1.0,
            noise2_sq: 1.0,
            gain1: 1.0,
            gain2: 1.0,
            phase: 0.0,
        };
        let cov = tmn_covariance(&p).unwrap();
        assert_relative_eq!(entanglement_witness(&cov), -1.0, max_relative = 1e-12);
    }

    #[test]
    fn physicality_checks() {
        let identity = Covariance4::from_entries([
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ])
        .unwrap();
        assert!(validate_physical(&identity, Units::Vacuum).all_pass());

        let squeezed_modes = Covariance4::from_entries([
            [0.4, 0.0, 0.0, 0.0],
            [0.0, 0.4, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ])
        .unwrap();
        let report = validate_physical(&squeezed_modes, Units::Vacuum);
        assert_eq!(report.mode1_uncertainty, Some(false));
        assert_eq!(report.mode2_uncertainty, Some(true));
        assert!(!report.all_pass());
        // same matrix in volts: no uncertainty check applies
        assert!(validate_physical(&squeezed_modes, Units::Volts).all_pass());

        let indefinite = Covariance4::from_entries([
            [1.0, 0.0, 2.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [2.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ])
        .unwrap();
        assert!(!validate_physical(&indefinite, Units::Volts).positive_semidefinite);
    }

    #[test]
    fn tmsv_outputs_are_psd_by_minor_oracle() {
        // independent PSD oracle: Sylvester's criterion on leading principal
        // minors (the production check goes through the eigendecomposition)
        fn leading_minors(cov: &Covariance4) -> [f64; 4] {
            let m = cov.entries();
            let d1 = m[0][0];
            let d2 = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            let sub3 =
                nalgebra::Matrix3::from_fn(|i, j| m[i][j]);
            let sub4 = cov.as_matrix();
            [d1, d2, sub3.determinant(), sub4.determinant()]
        }
        for r in [0.0, 0.2, 0.7, 1.5, 3.0] {
            for phase in [0.0, 1.0, -2.5] {
                for extra in [0.0, 0.8] {
                    let mut p = TmsvParams::ideal(r, phase);
                    p.extra_noise1_sq = extra;
                    let cov = tmsv_covariance(&p).unwrap();
                    let minors = leading_minors(&cov);
                    let scale = cov.entry(0, 0).powi(4).max(1.0);
                    for (k, d) in minors.iter().enumerate() {
                        assert!(
                            *d >= -1e-10 * scale,
                            "r={r} phase={phase} extra={extra}: minor {k} = {d:e}"
                        );
                    }
                    assert!(validate_physical(&cov, Units::Volts).positive_semidefinite);
                }
            }
        }
    }

    #[test]
    fn hyperbolic_identity_stable_to_large_r() {
        for r in [0.0f64, 1e-9, 0.3, 1.0, 5.0, 10.0] {
            let p = TmsvParams::ideal(r, 0.0);
            assert_relative_eq!(p.c_plus_s() * p.c_minus_s(), 1.0, max_relative = 1e-12);
            // the rounded C and S themselves agree with the stable pair
            assert_relative_eq!(p.c() + p.s(), p.c_plus_s(), max_relative = 1e-13);
        }
    }

    #[test]
    fn text_round_trip() {
        let cov = tmsv_covariance(&TmsvParams::ideal(0.7, 0.4)).unwrap();
        let parsed = Covariance4::from_text(&cov.to_text()).unwrap();
        assert_eq!(&cov, &parsed);
    }

    #[test]
    fn text_parse_errors_carry_line_numbers() {
        let err = Covariance4::from_text("1 2 3 4\n5 banana 7 8\n").unwrap_err();
        match err {
            SignalModelError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_asymmetric_entries() {
        let err = Covariance4::from_entries([
            [1.0, 0.0, 0.5, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.4, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ])
        .unwrap_err();
        assert!(matches!(err, SignalModelError::NotSymmetric { .. }));
    }

    #[test]
    fn invalid_params_rejected() {
        let p = TmnParams {
            sigma_sq: -1.0,
            noise1_sq: 0.0,
            noise2_sq: 0.0,
            gain1: 1.0,
            gain2: 1.0,
            phase: 0.0,
        };
        assert!(tmn_covariance(&p).is_err());
        let q = TmsvParams::ideal(-0.1, 0.0);
        assert!(tmsv_covariance(&q).is_err());
    }
}
