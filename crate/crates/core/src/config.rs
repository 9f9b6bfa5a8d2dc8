//! Run configuration shared by the command-line tools.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::dynamics::{self, GammaRule};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::sample::SampleSet;

/// Ridge parameter: a fixed value or `"auto"` for `1 / n̄`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum Lambda {
    #[default]
    Auto,
    Value(f64),
}

impl Lambda {
    pub fn resolve(self, sets: &[SampleSet]) -> f64 {
        match self {
            Lambda::Auto => dynamics::default_lambda(sets),
            Lambda::Value(v) => v,
        }
    }
}

impl std::str::FromStr for Lambda {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Lambda::Auto);
        }
        s.parse::<f64>().map(Lambda::Value).map_err(|_| {
            Error::InvalidArgument(format!("lambda must be a number or \"auto\", got {s:?}"))
        })
    }
}

impl Serialize for Lambda {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Lambda::Auto => s.serialize_str("auto"),
            Lambda::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Lambda {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Lambda::Value(v)),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HerdingSettings {
    /// Output size; defaults to the mean observed set size.
    pub m: Option<usize>,
    /// Extra uniform grid points added to the candidate pool for 1-D data.
    pub grid_points: usize,
    /// Grid padding beyond the observed range, in kernel standard deviations.
    pub pad_sigmas: f64,
    pub refine_steps: usize,
    pub refine_step_size: f64,
}

impl Default for HerdingSettings {
    fn default() -> Self {
        Self {
            m: None,
            grid_points: 2048,
            pad_sigmas: 3.0,
            refine_steps: 0,
            refine_step_size: 0.1,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IoPaths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pool: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub kernel: KernelSpec,
    pub lambda: Lambda,
    pub gamma_rule: GammaRule,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub herding: Option<HerdingSettings>,
    pub seed: u64,
    pub io: IoPaths,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            kernel: KernelSpec::gaussian(1.0),
            lambda: Lambda::Auto,
            gamma_rule: GammaRule::None,
            herding: None,
            seed: 0,
            io: IoPaths::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        if let Lambda::Value(v) = self.lambda {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "lambda must be >= 0, got {v}"
                )));
            }
        }
        if let GammaRule::Exponential { rho } = self.gamma_rule {
            if !(rho > 0.0 && rho < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "exponential weighting needs 0 < rho < 1, got {rho}"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_forms() {
        assert_eq!("auto".parse::<Lambda>().unwrap(), Lambda::Auto);
        assert_eq!("0.5".parse::<Lambda>().unwrap(), Lambda::Value(0.5));
        assert!("x".parse::<Lambda>().is_err());
        let sets = vec![
            SampleSet::from_scalars(0, &[0.0, 1.0]).unwrap(),
            SampleSet::from_scalars(1, &[0.0, 1.0, 2.0, 3.0]).unwrap(),
        ];
        assert!((Lambda::Auto.resolve(&sets) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn config_json() {
        let cfg = RunConfig::from_json(
            r#"{"kernel": {"kind": "gaussian", "bandwidth": 2.0}, "lambda": "auto",
                "gamma_rule": {"kind": "exponential", "rho": 0.5}}"#,
        )
        .unwrap();
        assert_eq!(cfg.kernel, KernelSpec::gaussian(2.0));
        assert_eq!(cfg.gamma_rule, GammaRule::Exponential { rho: 0.5 });
        let back = RunConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert!(
            RunConfig::from_json(r#"{"gamma_rule": {"kind": "exponential", "rho": 1.5}}"#).is_err()
        );
        assert!(RunConfig::from_json(r#"{"lambda": 0.001}"#).is_ok());
    }
}
