//! Seeded, reproducible Gaussian sampling of quadrature windows.
//!
//! Every window draws from its own ChaCha substream derived by a counter-based
//! mix of (seed, window index, condition), so the stream is a pure function of
//! (seed, window index, sample index) and identical no matter how windows are
//! scheduled across threads. The off condition keeps the diagonal blocks of
//! the covariance and zeroes R12: the receiver still sees amplifier and
//! thermal noise when the source is off, it just loses the correlation.

use crate::signal_model::Covariance4;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Errors from sampler construction.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplerError {
    #[error("covariance is not positive semidefinite (eigenvalue {0:e})")]
    NotPositiveSemidefinite(f64),
    #[error("invalid window spec: {0}")]
    InvalidSpec(String),
}

/// One joint quadrature measurement, in consistent (arbitrary) voltage units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSample {
    pub i1: f64,
    pub q1: f64,
    pub i2: f64,
    pub q2: f64,
}

/// Shape of a simulation run: `window_len` samples are integrated per window,
/// `num_windows` windows are drawn, all randomness flows from `seed`, and
/// `drift_stddev` is the per-window random-walk increment of the correlation
/// phase (radians; 0 disables drift).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSpec {
    pub window_len: usize,
    pub num_windows: usize,
    pub seed: u64,
    pub drift_stddev: f64,
}

impl WindowSpec {
    pub fn new(window_len: usize, num_windows: usize, seed: u64) -> Self {
        Self {
            window_len,
            num_windows,
            seed,
            drift_stddev: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.window_len < 1 {
            return Err(SamplerError::InvalidSpec("window_len must be >= 1".into()));
        }
        if self.num_windows < 1 {
            return Err(SamplerError::InvalidSpec("num_windows must be >= 1".into()));
        }
        if !self.drift_stddev.is_finite() || self.drift_stddev < 0.0 {
            return Err(SamplerError::InvalidSpec(
                "drift_stddev must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Whether the signal generator is on (full covariance) or off (R12 = 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    On,
    Off,
}

impl Condition {
    pub fn as_str(self) -> &'static str {
        match self {
            Condition::On => "on",
            Condition::Off => "off",
        }
    }

    fn tag(self) -> u64 {
        match self {
            Condition::On => 1,
            Condition::Off => 2,
        }
    }
}

const DRIFT_TAG: u64 = 3;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// 32-byte ChaCha seed from (seed, stream tag, counter) via a SplitMix64
/// chain; scheduling-independent by construction.
fn substream_seed(seed: u64, tag: u64, counter: u64) -> [u8; 32] {
    let mut state = seed ^ tag.wrapping_mul(0xd6e8_feb8_6659_fd93);
    let _ = splitmix64(&mut state);
    state ^= counter;
    let mut bytes = [0u8; 32];
    for chunk in bytes.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    bytes
}

fn substream_rng(seed: u64, tag: u64, counter: u64) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(substream_seed(seed, tag, counter))
}

/// Draws windows of zero-mean Gaussian quadrature samples from a covariance.
///
/// The covariance is factored once by symmetric eigendecomposition; negative
/// eigenvalues below -1e-10 (relative to the matrix scale) are rejected and
/// small negative ones are clamped to zero, which keeps the degenerate
/// rho -> 1 oracle cases sampleable where a triangular factorization fails.
pub struct WindowSampler {
    factor: [[f64; 4]; 4],
    spec: WindowSpec,
    condition: Condition,
    /// Cumulative phase offset per window when drift is enabled.
    phases: Option<Vec<f64>>,
}

impl WindowSampler {
    pub fn new(
        cov: &Covariance4,
        spec: WindowSpec,
        condition: Condition,
    ) -> Result<Self, SamplerError> {
        spec.validate()?;
        let effective = match condition {
            Condition::On => *cov,
            Condition::Off => cov.with_zero_cross_blocks(),
        };
        let factor = factorize(&effective)?;
        let phases = if spec.drift_stddev > 0.0 {
            // Random-walk increments come from their own substream so the
            // per-window phases are reproducible regardless of scheduling.
            let mut rng = substream_rng(spec.seed, DRIFT_TAG, condition.tag());
            let mut phases = Vec::with_capacity(spec.num_windows);
            let mut phi = 0.0;
            for w in 0..spec.num_windows {
                if w > 0 {
                    let step: f64 = StandardNormal.sample(&mut rng);
                    phi += spec.drift_stddev * step;
                }
                phases.push(phi);
            }
            Some(phases)
        } else {
            None
        };
        Ok(Self {
            factor,
            spec,
            condition,
            phases,
        })
    }

    pub fn spec(&self) -> &WindowSpec {
        &self.spec
    }

    pub fn condition(&self) -> Condition {
        self.condition
    }

    /// Cumulative drift phase applied to a window (0 without drift).
    pub fn window_phase(&self, index: usize) -> f64 {
        self.phases.as_ref().map_or(0.0, |p| p[index])
    }

    fn window_factor(&self, index: usize) -> [[f64; 4]; 4] {
        match &self.phases {
            None => self.factor,
            Some(phases) => {
                // Rotating the factor rotates the covariance: (G F)(G F)^T = G C G^T.
                let (c, s) = (phases[index].cos(), phases[index].sin());
                let f = &self.factor;
                let mut out = *f;
                for j in 0..4 {
                    out[0][j] = c * f[0][j] - s * f[1][j];
                    out[1][j] = s * f[0][j] + c * f[1][j];
                }
                out
            }
        }
    }

    /// Streams one window's samples into a fold, without materializing it.
    pub fn fold_window<A>(
        &self,
        index: usize,
        init: A,
        mut f: impl FnMut(A, QuadratureSample) -> A,
    ) -> A {
        assert!(index < self.spec.num_windows, "window index out of range");
        let factor = self.window_factor(index);
        let mut rng = substream_rng(self.spec.seed, self.condition.tag(), index as u64);
        let mut acc = init;
        for _ in 0..self.spec.window_len {
            acc = f(acc, draw(&factor, &mut rng));
        }
        acc
    }

    /// Fills `out` with one window's samples (reusing its capacity).
    pub fn fill_window(&self, index: usize, out: &mut Vec<QuadratureSample>) {
        out.clear();
        out.reserve(self.spec.window_len);
        self.fold_window(index, &mut *out, |buf, s| {
            buf.push(s);
            buf
        });
    }

    /// One window as a fresh vector.
    pub fn window(&self, index: usize) -> Vec<QuadratureSample> {
        let mut out = Vec::new();
        self.fill_window(index, &mut out);
        out
    }

    /// Maps every window through `f` in index order. Runs on the rayon pool
    /// when the `parallel` feature is enabled; the output is identical either
    /// way because each window owns its substream.
    pub fn map_windows<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize, &Self) -> T + Sync,
    {
        #[cfg(feature = "parallel")]
        {
            (0..self.spec.num_windows)
                .into_par_iter()
                .map(|w| f(w, self))
                .collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            self.map_windows_seq(f)
        }
    }

    /// Sequential reference path for [`map_windows`](Self::map_windows); the
    /// benchmark suite compares the two.
    pub fn map_windows_seq<T, F>(&self, f: F) -> Vec<T>
    where
        F: Fn(usize, &Self) -> T,
    {
        (0..self.spec.num_windows).map(|w| f(w, self)).collect()
    }
}

#[inline]
fn draw(factor: &[[f64; 4]; 4], rng: &mut ChaCha8Rng) -> QuadratureSample {
    let z: [f64; 4] = [
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
    ];
    let mut x = [0.0_f64; 4];
    for (xi, row) in x.iter_mut().zip(factor.iter()) {
        *xi = row[0] * z[0] + row[1] * z[1] + row[2] * z[2] + row[3] * z[3];
    }
    QuadratureSample {
        i1: x[0],
        q1: x[1],
        i2: x[2],
        q2: x[3],
    }
}

/// Symmetric eigenfactorization F = V sqrt(diag(lambda)) with clamping.
fn factorize(cov: &Covariance4) -> Result<[[f64; 4]; 4], SamplerError> {
    let m = cov.as_matrix();
    let scale = m.iter().fold(0.0_f64, |a, &v| a.max(v.abs())).max(1.0);
    let eig = m.symmetric_eigen();
    let mut factor = [[0.0; 4]; 4];
    for j in 0..4 {
        let lambda = eig.eigenvalues[j];
        if lambda < -1e-10 * scale {
            return Err(SamplerError::NotPositiveSemidefinite(lambda));
        }
        let root = lambda.max(0.0).sqrt();
        for i in 0..4 {
            factor[i][j] = eig.eigenvectors[(i, j)] * root;
        }
    }
    Ok(factor)
}
