//! Configurable single-slope ADC: region-selected precision, comparator
//! selection, response encoding and energy accounting.
//!
//! Every response is packed into a fixed 11-bit word so that responses of
//! different precision can be compared bit by bit:
//!
//! ```text
//!  10  9  8 | 7  6  5  4  3  2  1  0
//!  region+1 | code, right-aligned, zero-padded
//! ```

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::analog::DEFAULT_VDD;
use crate::error::{Error, Result};
use crate::quantizer::QuantizerSpec;

pub const ENCODED_WIDTH: usize = 11;
pub const REGION_TAG_WIDTH: usize = 3;
pub const CODE_FIELD_WIDTH: usize = 8;
pub const CODE_FIELD_MASK: u16 = 0x00ff;
pub const REGION_TAG_MASK: u16 = 0x0700;
pub const ENCODED_MASK: u16 = 0x07ff;
/// Largest region index representable by the 3-bit tag.
pub const MAX_REGION_INDEX: usize = 6;
pub const MAX_QUANTIZE_BITS: u32 = 16;

pub const DEFAULT_CLOCK_FREQ: f64 = 6.4e9;
pub const DEFAULT_ADC_POWER: f64 = 306.54e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdcConfig {
    pub vdd: f64,
    pub clock_freq: f64,
    pub comparator_residual_offset: f64,
    pub power: f64,
}

impl Default for AdcConfig {
    fn default() -> Self {
        Self {
            vdd: DEFAULT_VDD,
            clock_freq: DEFAULT_CLOCK_FREQ,
            comparator_residual_offset: 0.0,
            power: DEFAULT_ADC_POWER,
        }
    }
}

impl AdcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.vdd > 0.0 && self.vdd.is_finite()) {
            return Err(Error::InvalidConfig(format!("vdd must be positive, got {}", self.vdd)));
        }
        if !(self.clock_freq > 0.0 && self.clock_freq.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "clock frequency must be positive, got {}",
                self.clock_freq
            )));
        }
        if !(self.power >= 0.0 && self.power.is_finite()) {
            return Err(Error::InvalidConfig(format!("power must be non-negative, got {}", self.power)));
        }
        if !self.comparator_residual_offset.is_finite() {
            return Err(Error::InvalidConfig("comparator offset must be finite".into()));
        }
        Ok(())
    }

    fn check_range(&self, v: f64) -> Result<()> {
        if (0.0..=self.vdd).contains(&v) {
            Ok(())
        } else {
            Err(Error::OutOfRange {
                value: v,
                vdd: self.vdd,
            })
        }
    }
}

/// NMOS-input (A) or PMOS-input (B) ramp comparator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    A,
    B,
}

/// Full-scale single-slope code: `floor(v / vdd * 2^bits)`, clamped to the
/// top code.
pub fn quantize(cfg: &AdcConfig, v: f64, bits: u32) -> Result<u32> {
    cfg.check_range(v)?;
    if bits == 0 || bits > MAX_QUANTIZE_BITS {
        return Err(Error::InvalidArgument(format!(
            "precision {bits} outside 1..={MAX_QUANTIZE_BITS}"
        )));
    }
    let levels = 1u32 << bits;
    let code = (v / cfg.vdd * f64::from(levels)).floor() as u32;
    Ok(code.min(levels - 1))
}

/// Comparator C's choice: A above `vdd/2 + offset`, otherwise B.
pub fn select_comparator(cfg: &AdcConfig, v: f64) -> Comparator {
    if v > 0.5 * cfg.vdd + cfg.comparator_residual_offset {
        Comparator::A
    } else {
        Comparator::B
    }
}

/// One conversion result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "ResponseFields", into = "ResponseFields")]
pub struct ResponseWord {
    region: usize,
    code: u32,
    bits: u32,
}

#[derive(Serialize, Deserialize)]
struct ResponseFields {
    region: usize,
    code: u32,
    bits: u32,
    encoded: String,
}

impl TryFrom<ResponseFields> for ResponseWord {
    type Error = Error;

    fn try_from(f: ResponseFields) -> Result<Self> {
        let word = ResponseWord::new(f.region, f.code, f.bits)?;
        if word.encoded_string() != f.encoded {
            return Err(Error::Parse(format!(
                "encoded `{}` disagrees with region {} code {}",
                f.encoded, f.region, f.code
            )));
        }
        Ok(word)
    }
}

impl From<ResponseWord> for ResponseFields {
    fn from(w: ResponseWord) -> Self {
        ResponseFields {
            region: w.region,
            code: w.code,
            bits: w.bits,
            encoded: w.encoded_string(),
        }
    }
}

impl ResponseWord {
    pub fn new(region: usize, code: u32, bits: u32) -> Result<Self> {
        if region > MAX_REGION_INDEX {
            return Err(Error::InvalidArgument(format!(
                "region {region} does not fit the {REGION_TAG_WIDTH}-bit tag"
            )));
        }
        if bits == 0 || bits as usize > CODE_FIELD_WIDTH {
            return Err(Error::InvalidArgument(format!(
                "precision {bits} does not fit the {CODE_FIELD_WIDTH}-bit code field"
            )));
        }
        if code >= 1 << bits {
            return Err(Error::InvalidArgument(format!("code {code} needs more than {bits} bits")));
        }
        Ok(Self { region, code, bits })
    }

    pub fn region(&self) -> usize {
        self.region
    }

    pub fn code(&self) -> u32 {
        self.code
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// The 11-bit canonical word.
    pub fn encoded(&self) -> u16 {
        (((self.region + 1) as u16) << CODE_FIELD_WIDTH) | self.code as u16
    }

    /// The 11-bit word as `0`/`1` characters, most significant first.
    pub fn encoded_string(&self) -> String {
        format!("{:011b}", self.encoded())
    }

    /// Recovers a response from its 11-bit word; the precision comes from
    /// the region's configuration in `spec`.
    pub fn decode(encoded: u16, spec: &QuantizerSpec) -> Result<Self> {
        if encoded & !ENCODED_MASK != 0 {
            return Err(Error::Parse(format!("encoded word {encoded:#x} wider than 11 bits")));
        }
        let tag = (encoded >> CODE_FIELD_WIDTH) as usize;
        if tag == 0 || tag > spec.region_count() {
            return Err(Error::Parse(format!("region tag {tag} not defined by the quantizer")));
        }
        let region = tag - 1;
        let bits = spec.bits_per_region()[region];
        Self::new(region, u32::from(encoded & CODE_FIELD_MASK), bits)
    }

    pub fn parse_encoded(s: &str) -> Result<u16> {
        if s.len() != ENCODED_WIDTH || !s.bytes().all(|b| b == b'0' || b == b'1') {
            return Err(Error::Parse(format!("`{s}` is not an {ENCODED_WIDTH}-bit string")));
        }
        Ok(u16::from_str_radix(s, 2).expect("validated binary digits"))
    }
}

impl fmt::Display for ResponseWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.encoded_string();
        write!(f, "{}|{}", &s[..REGION_TAG_WIDTH], &s[REGION_TAG_WIDTH..])
    }
}

/// Region lookup plus ramp conversion for one voltage.
pub fn convert(cfg: &AdcConfig, spec: &QuantizerSpec, v: f64) -> Result<ResponseWord> {
    convert_traced(cfg, spec, v).map(|(word, _)| word)
}

/// Like [`convert`], also reporting which comparator latched the code.
///
/// The selected comparator's residual offset shifts the voltage seen by the
/// ramp (A: `+offset`, B: `-offset`); region selection uses the raw input.
pub fn convert_traced(cfg: &AdcConfig, spec: &QuantizerSpec, v: f64) -> Result<(ResponseWord, Comparator)> {
    cfg.check_range(v)?;
    let (region, bits) = spec.region_of(v)?;
    let comparator = select_comparator(cfg, v);
    let sensed = match comparator {
        Comparator::A => v + cfg.comparator_residual_offset,
        Comparator::B => v - cfg.comparator_residual_offset,
    }
    .clamp(0.0, cfg.vdd);
    let code = quantize(cfg, sensed, bits)?;
    Ok((ResponseWord::new(region, code, bits)?, comparator))
}

/// Worst-case ramp duration in clock cycles.
pub fn conversion_cycles(bits: u32) -> u64 {
    1u64 << bits
}

pub fn energy_per_cycle(power: f64, freq: f64) -> Result<f64> {
    if !(freq > 0.0) {
        return Err(Error::InvalidArgument(format!("frequency must be positive, got {freq}")));
    }
    Ok(power / freq)
}

/// Energy of one worst-case conversion at `bits` precision.
pub fn conversion_energy(cfg: &AdcConfig, bits: u32) -> Result<f64> {
    Ok(energy_per_cycle(cfg.power, cfg.clock_freq)? * conversion_cycles(bits) as f64)
}

/// One reported power/speed comparison entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub name: &'static str,
    pub power: f64,
    pub freq: f64,
    pub reported_energy: f64,
}

/// Power @ speed and reported energy per cycle of the compared PUFs.
pub const COMPARISON_TABLE: [ComparisonRow; 5] = [
    ComparisonRow {
        name: "Super-threshold",
        power: 136.4e-6,
        freq: 1e9,
        reported_energy: 0.136e-12,
    },
    ComparisonRow {
        name: "Sub-threshold",
        power: 0.047e-6,
        freq: 1e6,
        reported_energy: 0.047e-12,
    },
    ComparisonRow {
        name: "ICID",
        power: 250e-6,
        freq: 0.5e6,
        reported_energy: 500e-12,
    },
    ComparisonRow {
        name: "TV-PUF",
        power: 0.181e-6,
        freq: 1e9,
        reported_energy: 0.0018e-12,
    },
    ComparisonRow {
        name: "Proposed PUF",
        power: 306.54e-6,
        freq: 6.4e9,
        reported_energy: 0.0478e-12,
    },
];

/// Relative tolerance for a reported energy to count as rounding of the
/// computed one.
pub const ROUNDING_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyCheck {
    pub name: &'static str,
    pub power: f64,
    pub freq: f64,
    pub computed: f64,
    pub reported: f64,
    pub relative_error: f64,
    /// Reported value is not a rounding of power / frequency.
    pub inconsistent: bool,
}

pub fn check_row(row: &ComparisonRow) -> Result<EnergyCheck> {
    let computed = energy_per_cycle(row.power, row.freq)?;
    let relative_error = (computed - row.reported_energy).abs() / row.reported_energy;
    Ok(EnergyCheck {
        name: row.name,
        power: row.power,
        freq: row.freq,
        computed,
        reported: row.reported_energy,
        relative_error,
        inconsistent: relative_error > ROUNDING_TOLERANCE,
    })
}

pub fn comparison_table() -> Vec<EnergyCheck> {
    COMPARISON_TABLE
        .iter()
        .map(|r| check_row(r).expect("table frequencies are positive"))
        .collect()
}
