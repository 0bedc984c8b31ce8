//! Challenge decoding, cell selection and the challenge-to-voltage path.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::analog::{Conditions, TransferModel};
use crate::error::{Error, Result};
use crate::variation::{ChipInstance, ARRAY_DIM};

/// An 8-bit challenge word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Challenge(pub u8);

impl Challenge {
    /// All 256 challenges in ascending order.
    pub fn all() -> impl Iterator<Item = Challenge> {
        (0..=u8::MAX).map(Challenge)
    }

    pub fn word(self) -> u8 {
        self.0
    }

    /// Two-digit lowercase hex, as written in CRP files.
    pub fn to_hex(self) -> String {
        format!("{:02x}", self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        let s = s.trim();
        let digits = s.strip_prefix("0x").unwrap_or(s);
        if digits.len() != 2 {
            return Err(Error::Parse(format!("challenge `{s}` is not two hex digits")));
        }
        u8::from_str_radix(digits, 16)
            .map(Challenge)
            .map_err(|_| Error::Parse(format!("challenge `{s}` is not hex")))
    }
}

impl fmt::Display for Challenge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{:02x}", self.0)
    }
}

impl From<u8> for Challenge {
    fn from(word: u8) -> Self {
        Challenge(word)
    }
}

/// Word-line (row) and bit-line (column) of one bit cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellAddress {
    row: u8,
    col: u8,
}

impl CellAddress {
    pub fn new(row: usize, col: usize) -> Result<Self> {
        if row >= ARRAY_DIM || col >= ARRAY_DIM {
            return Err(Error::InvalidArgument(format!(
                "cell address ({row}, {col}) outside the {ARRAY_DIM}x{ARRAY_DIM} array"
            )));
        }
        Ok(Self {
            row: row as u8,
            col: col as u8,
        })
    }

    pub fn row(&self) -> usize {
        self.row as usize
    }

    pub fn col(&self) -> usize {
        self.col as usize
    }

    /// Row-major index into the chip's cell list.
    pub fn index(&self) -> usize {
        self.row() * ARRAY_DIM + self.col()
    }
}

/// High nibble selects the word line, low nibble the bit line.
pub fn decode(ch: Challenge) -> CellAddress {
    CellAddress {
        row: ch.0 >> 4,
        col: ch.0 & 0x0f,
    }
}

/// Which cell (if any) is powered. Power gating allows at most one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PowerState {
    selected: Option<CellAddress>,
}

impl PowerState {
    pub fn idle() -> Self {
        Self { selected: None }
    }

    pub fn select(addr: CellAddress) -> Self {
        Self {
            selected: Some(addr),
        }
    }

    pub fn selected(&self) -> Option<CellAddress> {
        self.selected
    }

    pub fn active_cells(&self) -> usize {
        usize::from(self.selected.is_some())
    }

    pub fn static_power(&self, model: &TransferModel) -> f64 {
        static_power(self.selected, model)
    }
}

/// Static power of the analog path: only the selected cell draws bias
/// current, unselected cells are gated off.
pub fn static_power(selected: Option<CellAddress>, model: &TransferModel) -> f64 {
    match selected {
        Some(_) => model.vdd * model.mirror.bias_current,
        None => 0.0,
    }
}

/// Output voltage of the cell addressed by `ch`.
pub fn evaluate(chip: &ChipInstance, model: &TransferModel, ch: Challenge, cond: &Conditions) -> f64 {
    let addr = decode(ch);
    let cell = &chip.cells()[addr.index()];
    model.cell_output(cell, chip.corner(), cond, u64::from(ch.0))
}
