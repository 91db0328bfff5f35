use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

const LEAK: f64 = 0.3;

/// Elementwise nonlinearity applied after a dense connection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Sigmoid,
    Tanh,
    /// Slope 0.3 for negative inputs.
    LeakyRelu,
    /// `tanh` followed by the leaky ReLU.
    TanhLeakyRelu,
}

#[inline]
fn leaky(v: f64) -> f64 {
    if v >= 0.0 {
        v
    } else {
        LEAK * v
    }
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Tanh => z.tanh(),
            Activation::LeakyRelu => leaky(z),
            Activation::TanhLeakyRelu => leaky(z.tanh()),
        }
    }

    /// Derivative with respect to the pre-activation `z`.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Sigmoid => {
                let s = 1.0 / (1.0 + (-z).exp());
                s * (1.0 - s)
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::LeakyRelu => {
                if z >= 0.0 {
                    1.0
                } else {
                    LEAK
                }
            }
            Activation::TanhLeakyRelu => {
                let t = z.tanh();
                let slope = if t >= 0.0 { 1.0 } else { LEAK };
                slope * (1.0 - t * t)
            }
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::LeakyRelu => "leaky_relu",
            Activation::TanhLeakyRelu => "tanh_leaky_relu",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "identity" => Activation::Identity,
            "sigmoid" => Activation::Sigmoid,
            "tanh" => Activation::Tanh,
            "leaky_relu" => Activation::LeakyRelu,
            "tanh_leaky_relu" => Activation::TanhLeakyRelu,
            other => return Err(Error::invalid(format!("unknown activation `{other}`"))),
        })
    }
}
