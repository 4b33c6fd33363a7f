//! The two reference architectures.
//!
//! Both have two dense ReLU layers of 256 units. The dropout variant follows
//! each dense layer with a dropout layer at rate 0.5; counting those dropout
//! layers it has four hidden layers, hence the name.

use crate::dataset::NUM_FEATURES;
use crate::network::LayerSpec;

pub const HIDDEN_UNITS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Two ReLU hidden layers of 256, no regularization.
    Paper2h,
    /// Two ReLU layers of 256, each followed by a dropout layer at 0.5.
    Paper4hDropout,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Paper2h => "paper-2h",
            Preset::Paper4hDropout => "paper-4h-dropout",
        }
    }

    /// Dense hidden layers (dropout layers not counted).
    pub fn dense_layers(self) -> usize {
        2
    }

    pub fn dropout(self) -> f64 {
        match self {
            Preset::Paper2h => 0.0,
            Preset::Paper4hDropout => 0.5,
        }
    }

    pub fn batch_size(self) -> usize {
        128
    }

    pub fn epochs(self) -> usize {
        50
    }

    pub fn layers(self) -> Vec<LayerSpec> {
        LayerSpec::stack(NUM_FEATURES, HIDDEN_UNITS, self.dense_layers(), self.dropout())
    }
}

impl std::str::FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper-2h" => Ok(Preset::Paper2h),
            "paper-4h-dropout" => Ok(Preset::Paper4hDropout),
            other => Err(format!("unknown preset '{other}' (expected paper-2h or paper-4h-dropout)")),
        }
    }
}
