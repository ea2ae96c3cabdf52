use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Result of a single probe pulse.
///
/// `On` means resonance scattering was seen and the ion sits in the ground
/// state; `Off` means no scattering and the ion sits in the metastable level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    On,
    Off,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::On => "on",
            Outcome::Off => "off",
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Outcome::On => Outcome::Off,
            Outcome::Off => Outcome::On,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Outcome {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "on" => Ok(Outcome::On),
            "off" => Ok(Outcome::Off),
            other => Err(format!("expected \"on\" or \"off\", found {other:?}")),
        }
    }
}
