//! Fixed scalar nonlinearities: hidden activations and the [0, 1]-ranged
//! squashing maps used ahead of basis expansions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActivationKind {
    #[serde(rename = "sigmoid")]
    Logistic,
    #[serde(rename = "tanh")]
    Tanh,
    #[serde(rename = "relu")]
    Relu,
    #[serde(rename = "tanhunit")]
    TanhUnit,
}

#[derive(Debug, Error)]
#[error("unknown activation {0:?}; expected sigmoid, tanh, relu or tanhunit")]
pub struct UnknownActivation(String);

impl ActivationKind {
    pub const ALL: [ActivationKind; 4] = [Self::Logistic, Self::Tanh, Self::Relu, Self::TanhUnit];

    pub fn name(self) -> &'static str {
        match self {
            Self::Logistic => "sigmoid",
            Self::Tanh => "tanh",
            Self::Relu => "relu",
            Self::TanhUnit => "tanhunit",
        }
    }

    /// True for kinds whose range lies in [0, 1], i.e. kinds usable as g.
    pub fn unit_range(self) -> bool {
        matches!(self, Self::Logistic | Self::TanhUnit)
    }

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Self::Logistic => 1.0 / (1.0 + (-x).exp()),
            Self::Tanh => x.tanh(),
            Self::Relu => x.max(0.0),
            Self::TanhUnit => (x.tanh() + 1.0) / 2.0,
        }
    }

    /// Derivative; ReLU at 0 returns 0 by the subgradient convention.
    #[inline]
    pub fn apply_deriv(self, x: f64) -> f64 {
        match self {
            Self::Logistic => {
                let s = 1.0 / (1.0 + (-x).exp());
                s * (1.0 - s)
            }
            Self::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Self::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::TanhUnit => {
                let t = x.tanh();
                (1.0 - t * t) / 2.0
            }
        }
    }
}

impl std::fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ActivationKind {
    type Err = UnknownActivation;

    fn from_str(s: &str) -> Result<Self, UnknownActivation> {
        match s.to_ascii_lowercase().as_str() {
            "sigmoid" | "logistic" => Ok(Self::Logistic),
            "tanh" => Ok(Self::Tanh),
            "relu" => Ok(Self::Relu),
            "tanhunit" => Ok(Self::TanhUnit),
            _ => Err(UnknownActivation(s.to_string())),
        }
    }
}
