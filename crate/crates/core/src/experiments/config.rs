//! JSON configuration shared by the CLI subcommands.
//!
//! ```json
//! {
//!   "kernel": {"kind": "fractional", "alpha": 0.9, "rho": 0.0},
//!   "model": {"kind": "delay_tanh_vol", "mu0": 2.0, "lambda": 0.2, "kappa2": 0.384,
//!             "a": 0.095, "kappa0": 0.0025, "eta1": 1.0, "eta2": 1.0, "c": 1.0, "x0": 0.0},
//!   "horizon": 1.0,
//!   "n_ladder": [25, 50, 100, 200, 400],
//!   "mc_paths": 1000,
//!   "seed": 1
//! }
//! ```
//!
//! Every field has a default; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coefficients::{CoefficientModel, DelayAtom, InitialCondition};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::kernels::KernelSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKindConfig {
    Fractional,
    ExponentialFractional,
    Markovian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub kind: KernelKindConfig,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub rho: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            kind: KernelKindConfig::Fractional,
            alpha: Some(0.9),
            rho: 0.0,
        }
    }
}

impl KernelConfig {
    pub fn build(&self) -> Result<KernelSpec> {
        let alpha = || {
            self.alpha
                .ok_or_else(|| Error::Config(format!("kernel kind {:?} needs alpha", self.kind)))
        };
        match self.kind {
            KernelKindConfig::Fractional => KernelSpec::fractional(alpha()?),
            KernelKindConfig::ExponentialFractional => {
                KernelSpec::exponential_fractional(alpha()?, self.rho)
            }
            KernelKindConfig::Markovian => Ok(KernelSpec::markovian()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    DelayTanhVol,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub mu0: f64,
    #[serde(alias = "lambda_rev")]
    pub lambda: f64,
    pub kappa2: f64,
    pub a: f64,
    pub kappa0: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub c: f64,
    pub x0: f64,
    #[serde(alias = "delay_atoms")]
    pub delay: Vec<DelayAtom>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let m = CoefficientModel::default();
        Self {
            kind: ModelKind::DelayTanhVol,
            mu0: m.mu0,
            lambda: m.lambda,
            kappa2: m.kappa2,
            a: m.a,
            kappa0: m.kappa0,
            eta1: m.eta1,
            eta2: m.eta2,
            c: m.c,
            x0: 0.0,
            delay: Vec::new(),
        }
    }
}

impl ModelConfig {
    pub fn build(&self) -> Result<(CoefficientModel, InitialCondition)> {
        match self.kind {
            ModelKind::DelayTanhVol => {
                let model = CoefficientModel {
                    mu0: self.mu0,
                    lambda: self.lambda,
                    delay: self.delay.clone(),
                    eta1: self.eta1,
                    eta2: self.eta2,
                    c: self.c,
                    kappa2: self.kappa2,
                    kappa0: self.kappa0,
                    a: self.a,
                };
                model.validate()?;
                if !self.x0.is_finite() {
                    return Err(Error::invalid("x0 must be finite"));
                }
                Ok((model, InitialCondition::constant(self.x0)))
            }
        }
    }
}

fn default_horizon() -> f64 {
    1.0
}

fn default_ladder() -> Vec<usize> {
    vec![25, 50, 100, 200, 400]
}

fn default_paths() -> usize {
    1000
}

fn default_steps() -> usize {
    400
}

/// The on-disk configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_ladder")]
    pub n_ladder: Vec<usize>,
    #[serde(default = "default_paths")]
    pub mc_paths: usize,
    #[serde(default)]
    pub seed: u64,
    /// Grid size for trajectory simulation and diagnostics.
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default)]
    pub outputs: Option<PathBuf>,
}

impl Default for ConfigFile {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config uses defaults")
    }
}

impl ConfigFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.horizon, self.steps)
    }

    pub fn rate_config(&self) -> Result<RateConfig> {
        let kernel = self.kernel.build()?;
        let (model, init) = self.model.build()?;
        let cfg = RateConfig {
            kernel,
            model,
            init,
            horizon: self.horizon,
            n_ladder: self.n_ladder.clone(),
            mc_paths: self.mc_paths,
            seed: self.seed,
            outputs: self.outputs.clone(),
            echo: serde_json::to_value(self)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// A validated rate study.
#[derive(Debug, Clone)]
pub struct RateConfig {
    pub kernel: KernelSpec,
    pub model: CoefficientModel,
    pub init: InitialCondition,
    pub horizon: f64,
    pub n_ladder: Vec<usize>,
    pub mc_paths: usize,
    pub seed: u64,
    pub outputs: Option<PathBuf>,
    /// Configuration document echoed into the summary.
    pub echo: serde_json::Value,
}

impl RateConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::Config(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if self.n_ladder.is_empty() {
            return Err(Error::Config("n_ladder is empty".into()));
        }
        if self.n_ladder.iter().any(|&n| n < 2) {
            return Err(Error::Config("every ladder entry must be >= 2".into()));
        }
        if self.n_ladder.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("n_ladder must be strictly increasing".into()));
        }
        if self.mc_paths < 2 {
            return Err(Error::Config("mc_paths must be >= 2".into()));
        }
        self.model.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_model() {
        let c = ConfigFile::default();
        assert_eq!(c.n_ladder, vec![25, 50, 100, 200, 400]);
        assert_eq!(c.mc_paths, 1000);
        let (m, init) = c.model.build().unwrap();
        assert_eq!(m, CoefficientModel::default());
        assert_eq!(init.x0, 0.0);
        assert_eq!(c.kernel.build().unwrap().alpha(), Some(0.9));
    }

    #[test]
    fn parses_documented_blocks() {
        let c = ConfigFile::from_json(
            r#"{"kernel": {"kind": "fractional", "alpha": 0.6, "rho": 0.0},
                "model": {"kind": "delay_tanh_vol", "mu0": 2.0, "lambda": 0.2, "kappa2": 0.384,
                          "a": 0.095, "kappa0": 0.0025, "eta1": 1.0, "eta2": 1.0, "c": 1.0, "x0": 0.0},
                "n_ladder": [4, 8], "mc_paths": 10, "seed": 9}"#,
        )
        .unwrap();
        assert_eq!(c.kernel.alpha, Some(0.6));
        let rc = c.rate_config().unwrap();
        assert_eq!(rc.n_ladder, vec![4, 8]);
        assert_eq!(rc.seed, 9);
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(ConfigFile::from_json(r#"{"kernal": {}}"#).is_err());
        assert!(ConfigFile::from_json(
            r#"{"kernel": {"kind": "fractional", "alpha": 0.6, "beta": 1}}"#
        )
        .is_err());
        assert!(ConfigFile::from_json(r#"{"model": {"mu": 1}}"#).is_err());
        assert!(ConfigFile::from_json(r#"{"kernel": {"kind": "bessel"}}"#).is_err());
    }

    #[test]
    fn rejects_bad_studies() {
        for bad in [
            r#"{"n_ladder": []}"#,
            r#"{"n_ladder": [1, 4]}"#,
            r#"{"n_ladder": [8, 4]}"#,
            r#"{"mc_paths": 1}"#,
            r#"{"horizon": -1}"#,
            r#"{"kernel": {"kind": "fractional"}}"#,
            r#"{"kernel": {"kind": "fractional", "alpha": 2.0}}"#,
            r#"{"model": {"c": 0.2}}"#,
        ] {
            let c = ConfigFile::from_json(bad).unwrap();
            assert!(c.rate_config().is_err(), "{bad}");
        }
    }
}
