//! Phase estimation and rotation preprocessing.
//!
//! The two digitizers' local oscillators drift against each other, which shows
//! up as a slowly wandering correlation phase phi. Detection does not need the
//! phase, so each data block is rotated back to phi = 0 before the detectors
//! run: estimate phi from the block's cross moments, then rotate the mode-1
//! quadratures. After rotation the cross moments concentrate in `<I1 I2>` and
//! `<Q1 Q2>` and the covariance takes its phase-zero form.

use crate::detectors::WindowMoments;
use crate::sampler::QuadratureSample;
use thiserror::Error;

/// Errors from phase estimation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PreprocessError {
    #[error("window has {0} samples; at least 2 are required")]
    TooFewSamples(usize),
    #[error("phase unavailable: all cross moments vanish")]
    PhaseUnavailable,
}

/// Result of [`estimate_phase`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseEstimate {
    /// atan2 of the two rotation-covariant cross-moment combinations.
    pub phi: f64,
    /// Magnitude of the cross-moment vector the angle was read from (this is
    /// the detector-3 statistic of the block).
    pub magnitude: f64,
    /// Set when the magnitude is below the 99th percentile of its
    /// off-condition (no correlation) distribution, i.e. the angle is likely
    /// reading noise.
    pub low_confidence: bool,
}

/// Estimates the correlation phase of a block from its sample moments:
/// phi = atan2(`<I1 Q2>` + `<Q1 I2>`, `<I1 I2>` - `<Q1 Q2>`).
///
/// On exact model moments this recovers the generative phi; on finite data it
/// is the angle of the cross-moment vector, flagged `low_confidence` when that
/// vector is within the off-condition noise floor.
pub fn estimate_phase(window: &[QuadratureSample]) -> Result<PhaseEstimate, PreprocessError> {
    if window.len() < 2 {
        return Err(PreprocessError::TooFewSamples(window.len()));
    }
    let m = WindowMoments::from_samples(window);
    estimate_phase_from_moments(&m)
}

/// Moment-level variant of [`estimate_phase`] for streaming pipelines.
pub fn estimate_phase_from_moments(
    moments: &WindowMoments,
) -> Result<PhaseEstimate, PreprocessError> {
    let n = moments.len();
    if n < 2 {
        return Err(PreprocessError::TooFewSamples(n));
    }
    let in_phase = moments.moment(0, 2) - moments.moment(1, 3);
    let quadrature = moments.moment(0, 3) + moments.moment(1, 2);
    if in_phase == 0.0 && quadrature == 0.0 {
        return Err(PreprocessError::PhaseUnavailable);
    }
    let magnitude = in_phase.hypot(quadrature);
    // Under H0 the normalized magnitude N D3 / (4 s1 s2) is Rayleigh with
    // P(> u sqrt(N)/2) = exp(-u^2); the 99th percentile gives the floor.
    let s1s2 = (moments.moment(0, 0) + moments.moment(1, 1)) * 0.5
        * ((moments.moment(2, 2) + moments.moment(3, 3)) * 0.5);
    let u = (100.0_f64).ln().sqrt();
    let floor = 2.0 * u * s1s2.sqrt() / (n as f64).sqrt();
    Ok(PhaseEstimate {
        phi: quadrature.atan2(in_phase),
        magnitude,
        low_confidence: magnitude < floor,
    })
}

/// Rotates the mode-1 quadratures so a block with correlation phase `phi`
/// takes the phase-zero covariance form; mode 2 is untouched:
/// I1' = I1 cos(phi) + Q1 sin(phi), Q1' = -I1 sin(phi) + Q1 cos(phi).
pub fn rotate_to_zero_phase(window: &[QuadratureSample], phi: f64) -> Vec<QuadratureSample> {
    let mut out = window.to_vec();
    rotate_in_place(&mut out, phi);
    out
}

/// In-place version of [`rotate_to_zero_phase`].
pub fn rotate_in_place(window: &mut [QuadratureSample], phi: f64) {
    let (sin, cos) = phi.sin_cos();
    for s in window {
        let i1 = s.i1 * cos + s.q1 * sin;
        let q1 = -s.i1 * sin + s.q1 * cos;
        s.i1 = i1;
        s.q1 = q1;
    }
}
