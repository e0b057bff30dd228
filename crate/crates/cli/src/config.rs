//! Run-configuration files: flat `key = value` text under `[section]`
//! headers, with `#` comments. Easy to parse from any language and friendly
//! to diffing in golden tests.
//!
//! Recognized sections:
//!
//! ```text
//! `[model]`      type = tmn | tmsv, plus that model's parameters
//! `[window]`     window_len, num_windows, seed, drift_stddev
//! `[detector]`   id = 1..5
//! `[analytic]`   n_samples, rho, sigma1, sigma2
//! `[metadata]`   free-form, echoed into the run manifest (Table-like radar
//!              parameters such as center frequencies live here; they do not
//!              affect the simulation)
//! ```

use qtms_core::analytic::AnalyticModel;
use qtms_core::detectors::DetectorId;
use qtms_core::sampler::WindowSpec;
use qtms_core::signal_model::{tmn_covariance, tmsv_covariance, Covariance4, TmnParams, TmsvParams};

use crate::CliError;

/// Which generative model a simulation uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelBlock {
    Tmn(TmnParams),
    Tmsv(TmsvParams),
}

impl ModelBlock {
    pub fn covariance(&self) -> Result<Covariance4, CliError> {
        match self {
            ModelBlock::Tmn(p) => tmn_covariance(p).map_err(CliError::config),
            ModelBlock::Tmsv(p) => tmsv_covariance(p).map_err(CliError::config),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ModelBlock::Tmn(_) => "tmn",
            ModelBlock::Tmsv(_) => "tmsv",
        }
    }
}

/// Parsed configuration; blocks are optional and commands check for the ones
/// they need.
#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    pub model: Option<ModelBlock>,
    pub window: Option<WindowSpec>,
    pub detector: Option<DetectorId>,
    pub analytic: Option<AnalyticModel>,
    /// Every (section, key, value) as read, echoed into the manifest.
    pub entries: Vec<(String, String, String)>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = Vec::new();
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| {
                    CliError::Config(format!("line {}: malformed section header {raw:?}", idx + 1))
                })?;
                section = name.trim().to_lowercase();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {}: expected 'key = value', got {raw:?}", idx + 1))
            })?;
            if section.is_empty() {
                return Err(CliError::Config(format!(
                    "line {}: key outside any [section]",
                    idx + 1
                )));
            }
            entries.push((
                section.clone(),
                key.trim().to_lowercase(),
                value.trim().to_string(),
            ));
        }
        Self::from_entries(entries)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn from_entries(entries: Vec<(String, String, String)>) -> Result<Self, CliError> {
        let get = |section: &str, key: &str| -> Option<&str> {
            entries
                .iter()
                .find(|(s, k, _)| s == section && k == key)
                .map(|(_, _, v)| v.as_str())
        };
        let num = |section: &str, key: &str, default: f64| -> Result<f64, CliError> {
            match get(section, key) {
                None => Ok(default),
                Some(v) => v.parse().map_err(|_| {
                    CliError::Config(format!("[{section}] {key}: not a number: {v:?}"))
                }),
            }
        };
        let require_num = |section: &str, key: &str| -> Result<f64, CliError> {
            get(section, key)
                .ok_or_else(|| CliError::Config(format!("[{section}] missing key '{key}'")))?
                .parse()
                .map_err(|_| CliError::Config(format!("[{section}] {key}: not a number")))
        };

        let model = match get("model", "type") {
            None => None,
            Some("tmn") => {
                let p = TmnParams {
                    sigma_sq: require_num("model", "sigma_sq")?,
                    noise1_sq: num("model", "noise1_sq", 0.0)?,
                    noise2_sq: num("model", "noise2_sq", 0.0)?,
                    gain1: num("model", "gain1", 1.0)?,
                    gain2: num("model", "gain2", 1.0)?,
                    phase: num("model", "phase", 0.0)?,
                };
                p.validate().map_err(CliError::config)?;
                Some(ModelBlock::Tmn(p))
            }
            Some("tmsv") => {
                let p = TmsvParams {
                    squeeze_r: require_num("model", "squeeze_r")?,
                    phase: num("model", "phase", 0.0)?,
                    extra_noise1_sq: num("model", "extra_noise1_sq", 0.0)?,
                    extra_noise2_sq: num("model", "extra_noise2_sq", 0.0)?,
                };
                p.validate().map_err(CliError::config)?;
                Some(ModelBlock::Tmsv(p))
            }
            Some(other) => {
                return Err(CliError::Config(format!(
                    "[model] type must be 'tmn' or 'tmsv', got {other:?}"
                )))
            }
        };

        let window = if entries.iter().any(|(s, _, _)| s == "window") {
            let spec = WindowSpec {
                window_len: require_num("window", "window_len")? as usize,
                num_windows: require_num("window", "num_windows")? as usize,
                seed: num("window", "seed", 0.0)? as u64,
                drift_stddev: num("window", "drift_stddev", 0.0)?,
            };
            spec.validate().map_err(CliError::config)?;
            Some(spec)
        } else {
            None
        };

        let detector = match get("detector", "id") {
            None => None,
            Some(v) => {
                let k: u8 = v.parse().map_err(|_| {
                    CliError::Config(format!("[detector] id: not an integer: {v:?}"))
                })?;
                Some(DetectorId::from_index(k).ok_or_else(|| {
                    CliError::Config(format!("[detector] id must be 1..5, got {k}"))
                })?)
            }
        };

        let analytic = if entries.iter().any(|(s, _, _)| s == "analytic") {
            let model = AnalyticModel {
                n_samples: require_num("analytic", "n_samples")?,
                rho: require_num("analytic", "rho")?,
                sigma1: num("analytic", "sigma1", 1.0)?,
                sigma2: num("analytic", "sigma2", 1.0)?,
            };
            model.validate().map_err(CliError::config)?;
            Some(model)
        } else {
            None
        };

        Ok(Self {
            model,
            window,
            detector,
            analytic,
            entries,
        })
    }

    pub fn require_model(&self) -> Result<&ModelBlock, CliError> {
        self.model
            .as_ref()
            .ok_or_else(|| CliError::Config("config is missing the [model] section".into()))
    }

    pub fn require_window(&self) -> Result<WindowSpec, CliError> {
        self.window
            .ok_or_else(|| CliError::Config("config is missing the [window] section".into()))
    }

    pub fn require_detector(&self) -> Result<DetectorId, CliError> {
        self.detector
            .ok_or_else(|| CliError::Config("config is missing the [detector] section".into()))
    }

    pub fn require_analytic(&self) -> Result<AnalyticModel, CliError> {
        self.analytic
            .ok_or_else(|| CliError::Config("config is missing the [analytic] section".into()))
    }

    /// Optional volts^2-per-vacuum-unit conversion from the metadata block;
    /// there is deliberately no default.
    pub fn vacuum_unit_scale(&self) -> Result<Option<f64>, CliError> {
        match self
            .entries
            .iter()
            .find(|(s, k, _)| s == "metadata" && k == "vacuum_unit_scale")
        {
            None => Ok(None),
            Some((_, _, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::Config(format!("vacuum_unit_scale: not a number: {v:?}"))),
        }
    }
}
