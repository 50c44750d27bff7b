//! TOML run configurations. Every table rejects unknown keys, and parse
//! errors carry the line and column of the offending key.

use std::fs;
use std::path::{Path, PathBuf};

use fa_core::network::{ActivationKind, InitScheme};
use fa_core::trainers::{FeedbackInit, Loss, Rule};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, LabError, Result};

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse(&text, path)
}

pub fn parse<T: DeserializeOwned>(text: &str, origin: &Path) -> Result<T> {
    toml::from_str(text).map_err(|e| LabError::Config {
        path: origin.to_path_buf(),
        message: e.to_string().trim_end().to_string(),
    })
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub workers: usize,
}

impl RunOptions {
    pub fn new(out: impl Into<PathBuf>) -> Self {
        RunOptions {
            out: out.into(),
            seed: None,
            workers: 1,
        }
    }

    pub fn seed_or(&self, configured: u64) -> u64 {
        self.seed.unwrap_or(configured)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Erf,
    Relu,
    Tanh,
    Linear,
}

impl From<Activation> for ActivationKind {
    fn from(a: Activation) -> Self {
        match a {
            Activation::Erf => ActivationKind::ScaledErf,
            Activation::Relu => ActivationKind::Relu,
            Activation::Tanh => ActivationKind::Tanh,
            Activation::Linear => ActivationKind::Linear,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleName {
    Bp,
    Fa,
    Dfa,
    Drtp,
}

impl From<RuleName> for Rule {
    fn from(r: RuleName) -> Self {
        match r {
            RuleName::Bp => Rule::Bp,
            RuleName::Fa => Rule::Fa,
            RuleName::Dfa => Rule::Dfa,
            RuleName::Drtp => Rule::Drtp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossName {
    Mse,
    SoftmaxCe,
}

impl From<LossName> for Loss {
    fn from(l: LossName) -> Self {
        match l {
            LossName::Mse => Loss::Mse,
            LossName::SoftmaxCe => Loss::SoftmaxCrossEntropy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitName {
    Zero,
    Gaussian,
    FanInUniform,
}

impl InitName {
    pub fn scheme(self, std: f64) -> InitScheme {
        match self {
            InitName::Zero => InitScheme::Zero,
            InitName::Gaussian => InitScheme::GaussianStd(std),
            InitName::FanInUniform => InitScheme::FanInUniform,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeedbackInitName {
    Uniform,
    Gaussian,
    LeftOrthogonal,
}

impl From<FeedbackInitName> for FeedbackInit {
    fn from(f: FeedbackInitName) -> Self {
        match f {
            FeedbackInitName::Uniform => FeedbackInit::Uniform,
            FeedbackInitName::Gaussian => FeedbackInit::Gaussian,
            FeedbackInitName::LeftOrthogonal => FeedbackInit::LeftOrthogonal,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Small {
        #[allow(dead_code)]
        eta: f64,
    }

    #[test]
    fn unknown_keys_report_their_line() {
        let err = parse::<Small>("eta = 0.1\netaa = 2\n", Path::new("x.toml")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "{msg}");
        assert!(msg.contains("etaa"), "{msg}");
    }

    #[test]
    fn kebab_case_names() {
        #[derive(Deserialize)]
        struct A {
            a: Activation,
            r: RuleName,
            l: LossName,
        }
        let v: A = toml::from_str("a = 'erf'\nr = 'dfa'\nl = 'softmax-ce'").unwrap();
        assert_eq!(v.a, Activation::Erf);
        assert_eq!(v.r, RuleName::Dfa);
        assert_eq!(v.l, LossName::SoftmaxCe);
    }
}
