//! Run configuration: a TOML file with `[bath]`, `[protocol]` and `[run]`.
//!
//! Unknown keys are rejected. Every field has a default, so an empty file
//! reproduces the default `fig2` bath (α = 0.1, ω_c = 10, β = 100, t = t₂ = 0.1, N = 100).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use seqtherm::bath::{OhmicClass, ThermalBath};
use seqtherm::correlations::{CorrelationOptions, WindowKernel};
use seqtherm::sequential::MeasurementProtocol;
use seqtherm::spectroscopy::SpectralWindow;
use seqtherm::Execution;

/// How `simulate` draws records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    /// Gaussian auxiliary field; any N.
    #[default]
    Field,
    /// Exact path-sum distribution; N ≤ `run.exact_max`.
    Exact,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BathConfig {
    pub alpha: f64,
    /// Ohmic exponent `s`.
    pub s: f64,
    pub omega_c: f64,
    pub beta: f64,
    pub t2: f64,
}

impl Default for BathConfig {
    fn default() -> Self {
        BathConfig {
            alpha: 0.1,
            s: 1.0,
            omega_c: 10.0,
            beta: 100.0,
            t2: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolConfig {
    pub n: usize,
    pub t: f64,
    pub theta: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            n: 100,
            t: 0.1,
            theta: std::f64::consts::FRAC_PI_2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub trials: usize,
    pub out: PathBuf,
    pub kernel: WindowKernel,
    pub include_quantum: bool,
    pub execution: Execution,
    pub sampler: Sampler,
    pub spectral_window: SpectralWindow,
    pub beta_lo: f64,
    pub beta_hi: f64,
    /// Largest N of the `fig2` sweep.
    pub n_max: usize,
    /// Largest N of the exact path sum.
    pub exact_max: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seed: 0,
            trials: 2000,
            out: PathBuf::from("out"),
            kernel: WindowKernel::Exact,
            include_quantum: false,
            execution: Execution::Parallel,
            sampler: Sampler::Field,
            spectral_window: SpectralWindow::Rectangular,
            beta_lo: 1.0,
            beta_hi: 400.0,
            n_max: 10_000,
            exact_max: seqtherm::sequential::DEFAULT_EXACT_MAX,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub bath: BathConfig,
    pub protocol: ProtocolConfig,
    pub run: RunSection,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serialisable")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let b = &self.bath;
        for (name, v) in [
            ("bath.alpha", b.alpha),
            ("bath.s", b.s),
            ("bath.omega_c", b.omega_c),
            ("bath.beta", b.beta),
            ("bath.t2", b.t2),
            ("protocol.t", self.protocol.t),
            ("run.beta_lo", self.run.beta_lo),
            ("run.beta_hi", self.run.beta_hi),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::Invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.protocol.n == 0 {
            return Err(ConfigError::Invalid("protocol.n must be at least 1".into()));
        }
        if !(0.0..=std::f64::consts::PI).contains(&self.protocol.theta) {
            return Err(ConfigError::Invalid(format!(
                "protocol.theta must lie in [0, π], got {}",
                self.protocol.theta
            )));
        }
        if self.run.beta_lo >= self.run.beta_hi {
            return Err(ConfigError::Invalid("run.beta_lo must be below run.beta_hi".into()));
        }
        if self.run.n_max < 2 {
            return Err(ConfigError::Invalid("run.n_max must be at least 2".into()));
        }
        Ok(())
    }

    pub fn thermal_bath(&self) -> seqtherm::Result<ThermalBath> {
        let b = &self.bath;
        ThermalBath::new(b.beta, OhmicClass::new(b.alpha, b.s, b.omega_c)?, b.t2)
    }

    pub fn protocol(&self) -> seqtherm::Result<MeasurementProtocol> {
        MeasurementProtocol::new(self.protocol.n, self.protocol.t, self.protocol.theta)
    }

    pub fn correlation_options(&self) -> CorrelationOptions {
        CorrelationOptions {
            kernel: self.run.kernel,
            include_quantum: self.run.include_quantum,
            execution: self.run.execution,
            ..Default::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn round_trip() {
        let mut cfg = RunConfig::default();
        cfg.bath.beta = 10.0;
        cfg.protocol.theta = 0.3;
        cfg.run.kernel = WindowKernel::SmallWindow;
        cfg.run.include_quantum = true;
        cfg.run.sampler = Sampler::Exact;
        let text = cfg.to_toml();
        let back = RunConfig::parse(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_toml(), text);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(RunConfig::parse("[bath]\nalpah = 0.1\n"), Err(ConfigError::Parse(_))));
        assert!(matches!(RunConfig::parse("[extra]\n"), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(matches!(RunConfig::parse("[bath]\nbeta = -1.0\n"), Err(ConfigError::Invalid(_))));
        assert!(matches!(
            RunConfig::parse("[protocol]\ntheta = 4.0\n"),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(RunConfig::parse("[protocol]\nn = 0\n"), Err(ConfigError::Invalid(_))));
        assert!(RunConfig::parse("[run]\nkernel = \"small-window\"\n").is_ok());
    }
}
