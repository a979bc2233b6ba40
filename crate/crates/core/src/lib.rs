//! Monte Carlo simulation and decoding of GKP-qubit error correction over
//! the Gaussian displacement channel.
//!
//! Each physical GKP qubit is tracked only through its quadrature deviation
//! from the ideal lattice point. Two codes are provided, the three-qubit
//! bit-flip code ([`bitflip`]) and the concatenated C4/C6 code ([`c4c6`]),
//! each with a conventional decoder that sees only bit values and an analog
//! maximum-likelihood decoder that also uses the measured residuals.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub mod bitflip;
pub mod c4c6;
pub mod cli;
pub mod error;
pub mod gkp;
pub mod montecarlo;
pub mod quad;

pub use error::{Error, Result};

/// Which information a decoder is allowed to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decoder {
    /// Bit values plus measured deviations (likelihood decoding).
    Analog,
    /// Bit values only.
    Digital,
}

impl Decoder {
    pub const BOTH: [Decoder; 2] = [Decoder::Analog, Decoder::Digital];

    pub fn as_str(self) -> &'static str {
        match self {
            Decoder::Analog => "analog",
            Decoder::Digital => "digital",
        }
    }
}

impl fmt::Display for Decoder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Decoder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analog" => Ok(Decoder::Analog),
            "digital" => Ok(Decoder::Digital),
            other => Err(Error::InvalidParameter(format!(
                "unknown decoder '{other}'"
            ))),
        }
    }
}
