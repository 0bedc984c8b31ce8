//! Manufacturing mismatch: per-transistor threshold-voltage deviations and
//! the seeded 16×16 chip instances built from them.
//!
//! Sampling order is fixed so that a `(seed, sigma, corner)` triple always
//! yields the same chip: cells are visited row-major, and within a cell the
//! draws go PM1, PM2, NM1, NM2. Every draw is `sigma * z` with `z` standard
//! normal from a ChaCha8 stream seeded with `rng_seed`.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Side length of the bit-cell array.
pub const ARRAY_DIM: usize = 16;
/// Number of bit cells on a chip.
pub const CELL_COUNT: usize = ARRAY_DIM * ARRAY_DIM;

pub const DEFAULT_SIGMA_VTH: f64 = 0.030;

/// Threshold-voltage deviations of the four bit-cell transistors, in volts.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct MismatchVector {
    pub dvth_pm1: f64,
    pub dvth_pm2: f64,
    pub dvth_nm1: f64,
    pub dvth_nm2: f64,
}

impl MismatchVector {
    pub const ZERO: Self = Self {
        dvth_pm1: 0.0,
        dvth_pm2: 0.0,
        dvth_nm1: 0.0,
        dvth_nm2: 0.0,
    };

    pub fn as_array(&self) -> [f64; 4] {
        [self.dvth_pm1, self.dvth_pm2, self.dvth_nm1, self.dvth_nm2]
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }
}

impl From<[f64; 4]> for MismatchVector {
    fn from(v: [f64; 4]) -> Self {
        Self {
            dvth_pm1: v[0],
            dvth_pm2: v[1],
            dvth_nm1: v[2],
            dvth_nm2: v[3],
        }
    }
}

impl From<MismatchVector> for [f64; 4] {
    fn from(v: MismatchVector) -> Self {
        v.as_array()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub enum ProcessCorner {
    #[default]
    TT,
    SS,
    FF,
    SF,
    FS,
}

impl ProcessCorner {
    pub const ALL: [ProcessCorner; 5] = [Self::TT, Self::SS, Self::FF, Self::SF, Self::FS];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::TT => "TT",
            Self::SS => "SS",
            Self::FF => "FF",
            Self::SF => "SF",
            Self::FS => "FS",
        }
    }
}

impl fmt::Display for ProcessCorner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProcessCorner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown process corner `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariationConfig {
    pub sigma_vth: f64,
    pub rng_seed: u64,
    pub corner: ProcessCorner,
}

impl VariationConfig {
    pub fn new(sigma_vth: f64, rng_seed: u64, corner: ProcessCorner) -> Result<Self> {
        let cfg = Self {
            sigma_vth,
            rng_seed,
            corner,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_seed(rng_seed: u64) -> Self {
        Self {
            sigma_vth: DEFAULT_SIGMA_VTH,
            rng_seed,
            corner: ProcessCorner::TT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.sigma_vth.is_finite() || self.sigma_vth < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "sigma_vth must be finite and non-negative, got {}",
                self.sigma_vth
            )));
        }
        Ok(())
    }

    fn sampler(&self) -> MismatchSampler {
        MismatchSampler {
            rng: ChaCha8Rng::seed_from_u64(self.rng_seed),
            sigma: self.sigma_vth,
        }
    }
}

impl Default for VariationConfig {
    fn default() -> Self {
        Self::with_seed(0)
    }
}

struct MismatchSampler {
    rng: ChaCha8Rng,
    sigma: f64,
}

impl MismatchSampler {
    fn draw(&mut self) -> f64 {
        let z: f64 = StandardNormal.sample(&mut self.rng);
        self.sigma * z
    }

    fn next_vector(&mut self) -> MismatchVector {
        MismatchVector {
            dvth_pm1: self.draw(),
            dvth_pm2: self.draw(),
            dvth_nm1: self.draw(),
            dvth_nm2: self.draw(),
        }
    }
}

/// One simulated die: its identity and the mismatch of all 256 cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChipFile", into = "ChipFile")]
pub struct ChipInstance {
    chip_id: String,
    config: VariationConfig,
    cells: Vec<MismatchVector>,
}

impl ChipInstance {
    /// Builds a chip directly from a row-major cell list.
    pub fn from_cells(
        chip_id: impl Into<String>,
        config: VariationConfig,
        cells: Vec<MismatchVector>,
    ) -> Result<Self> {
        config.validate()?;
        if cells.len() != CELL_COUNT {
            return Err(Error::InvalidConfig(format!(
                "a chip needs {CELL_COUNT} cells, got {}",
                cells.len()
            )));
        }
        if let Some(i) = cells.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidConfig(format!("cell {i} has a non-finite mismatch")));
        }
        Ok(Self {
            chip_id: chip_id.into(),
            config,
            cells,
        })
    }

    pub fn chip_id(&self) -> &str {
        &self.chip_id
    }

    pub fn config(&self) -> &VariationConfig {
        &self.config
    }

    pub fn corner(&self) -> ProcessCorner {
        self.config.corner
    }

    /// Row-major cell slice (`row * 16 + col`).
    pub fn cells(&self) -> &[MismatchVector] {
        &self.cells
    }

    pub fn cell(&self, row: usize, col: usize) -> &MismatchVector {
        &self.cells[row * ARRAY_DIM + col]
    }

    pub fn cell_mut(&mut self, row: usize, col: usize) -> &mut MismatchVector {
        &mut self.cells[row * ARRAY_DIM + col]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Serialize, Deserialize)]
struct ChipFile {
    chip_id: String,
    config: VariationConfig,
    /// `cells[row][col] = [pm1, pm2, nm1, nm2]`
    cells: Vec<Vec<MismatchVector>>,
}

impl TryFrom<ChipFile> for ChipInstance {
    type Error = Error;

    fn try_from(file: ChipFile) -> Result<Self> {
        if file.cells.len() != ARRAY_DIM || file.cells.iter().any(|r| r.len() != ARRAY_DIM) {
            return Err(Error::Parse(format!(
                "chip `{}`: cell grid must be {ARRAY_DIM}x{ARRAY_DIM}",
                file.chip_id
            )));
        }
        let cells = file.cells.into_iter().flatten().collect();
        ChipInstance::from_cells(file.chip_id, file.config, cells)
    }
}

impl From<ChipInstance> for ChipFile {
    fn from(chip: ChipInstance) -> Self {
        ChipFile {
            chip_id: chip.chip_id,
            config: chip.config,
            cells: chip.cells.chunks(ARRAY_DIM).map(|r| r.to_vec()).collect(),
        }
    }
}

/// Synthesizes a chip from its variation config.
pub fn synth_chip(config: &VariationConfig, chip_id: impl Into<String>) -> Result<ChipInstance> {
    config.validate()?;
    let mut sampler = config.sampler();
    let cells = (0..CELL_COUNT).map(|_| sampler.next_vector()).collect();
    Ok(ChipInstance {
        chip_id: chip_id.into(),
        config: *config,
        cells,
    })
}

/// Draws `n` i.i.d. mismatch vectors for Monte Carlo studies.
///
/// Uses the same stream as [`synth_chip`], so the first 256 vectors of a
/// population equal the cells of the chip with the same config.
pub fn sample_population(config: &VariationConfig, n: usize) -> Result<Vec<MismatchVector>> {
    config.validate()?;
    if n == 0 {
        return Err(Error::InvalidArgument("population size must be at least 1".into()));
    }
    let mut sampler = config.sampler();
    Ok((0..n).map(|_| sampler.next_vector()).collect())
}
