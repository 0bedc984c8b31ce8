use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::array::{decode, Challenge};
use crate::error::Error;
use crate::variation::{ARRAY_DIM, CELL_COUNT};

/// How a challenge is presented to a learner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureEncoding {
    /// The 8 challenge bits, LSB first.
    RawBits,
    /// One-hot word line followed by one-hot bit line.
    OneHotRowCol,
    /// One-hot cell index.
    OneHotCell,
}

impl FeatureEncoding {
    pub const ALL: [FeatureEncoding; 3] = [Self::RawBits, Self::OneHotRowCol, Self::OneHotCell];

    pub fn width(self) -> usize {
        match self {
            Self::RawBits => 8,
            Self::OneHotRowCol => 2 * ARRAY_DIM,
            Self::OneHotCell => CELL_COUNT,
        }
    }

    pub fn encode(self, ch: Challenge) -> Vec<f64> {
        let mut x = vec![0.0; self.width()];
        match self {
            Self::RawBits => {
                for (i, xi) in x.iter_mut().enumerate() {
                    *xi = f64::from((ch.0 >> i) & 1);
                }
            }
            Self::OneHotRowCol => {
                let addr = decode(ch);
                x[addr.row()] = 1.0;
                x[ARRAY_DIM + addr.col()] = 1.0;
            }
            Self::OneHotCell => x[decode(ch).index()] = 1.0,
        }
        x
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::RawBits => "raw",
            Self::OneHotRowCol => "rowcol",
            Self::OneHotCell => "cell",
        }
    }
}

impl fmt::Display for FeatureEncoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureEncoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Self::ALL
            .into_iter()
            .find(|e| e.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown feature encoding `{s}`")))
    }
}
