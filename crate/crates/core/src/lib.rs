//! Behavioral simulator for an adaptive multi-bit, current-mirror based
//! analog PUF built as a 16×16 array of four-transistor bit cells.
//!
//! The pipeline mirrors the hardware:
//!
//! 1. [`variation`] draws per-transistor threshold mismatch for a chip.
//! 2. [`analog`] turns a cell's mismatch into an output voltage.
//! 3. [`array`] decodes an 8-bit challenge to the cell that is powered.
//! 4. [`quantizer`] picks the voltage region, and with it the precision.
//! 5. [`adc`] runs the single-slope conversion and packs an 11-bit word.
//!
//! On top of that, [`crp`] builds challenge-response datasets and quality
//! metrics, and [`attack`] runs modeling attacks against them.

pub mod adc;
pub mod analog;
pub mod array;
pub mod attack;
pub mod crp;
pub mod error;
pub mod quantizer;
pub mod variation;

pub use adc::{AdcConfig, Comparator, ResponseWord};
pub use analog::{Conditions, MirrorConfig, MirrorKind, SwitchingConfig, SwitchingKind, TransferModel};
pub use array::{CellAddress, Challenge};
pub use crp::{CrpDataset, CrpRecord};
pub use error::{Error, Result};
pub use quantizer::{EmpiricalDistribution, QuantizerSpec};
pub use variation::{ChipInstance, MismatchVector, ProcessCorner, VariationConfig};
