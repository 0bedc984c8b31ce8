//! Challenge-response datasets, their file formats, and PUF quality metrics.
//!
//! All metrics work on the 11-bit encoded words. The 3 region-tag bits are
//! far from uniform by construction, so uniqueness and uniformity can also
//! be restricted to the 8-bit code field via [`BitSelection`].

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adc::{self, AdcConfig, ResponseWord, CODE_FIELD_MASK, ENCODED_MASK, ENCODED_WIDTH, REGION_TAG_MASK};
use crate::analog::{Conditions, TransferModel};
use crate::array::{self, Challenge};
use crate::error::{Error, Result};
use crate::quantizer::QuantizerSpec;
use crate::variation::ChipInstance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrpRecord {
    pub chip_id: String,
    pub challenge: Challenge,
    pub response: ResponseWord,
    pub conditions: Conditions,
}

/// Provenance of a generated dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub model_digest: String,
    pub quantizer_digest: String,
    pub adc_digest: String,
    pub noise_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CrpDataset {
    pub records: Vec<CrpRecord>,
    pub metadata: Option<DatasetMetadata>,
}

/// SHA-256 of the compact JSON form of `value`, hex encoded.
pub fn digest<T: Serialize>(value: &T) -> Result<String> {
    Ok(digest_bytes(&serde_json::to_vec(value)?))
}

/// SHA-256 of raw bytes, hex encoded.
pub fn digest_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl CrpDataset {
    pub fn new(records: Vec<CrpRecord>) -> Self {
        Self {
            records,
            metadata: None,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Chip ids in order of first appearance.
    pub fn chip_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = Vec::new();
        for r in &self.records {
            if ids.last() != Some(&r.chip_id.as_str()) && !ids.contains(&r.chip_id.as_str()) {
                ids.push(&r.chip_id);
            }
        }
        ids
    }

    /// Distinct challenges, ascending.
    pub fn challenges(&self) -> Vec<Challenge> {
        let mut chs: Vec<Challenge> = self.records.iter().map(|r| r.challenge).collect();
        chs.sort();
        chs.dedup();
        chs
    }

    pub fn for_chip(&self, chip_id: &str) -> Result<CrpDataset> {
        let records: Vec<CrpRecord> = self
            .records
            .iter()
            .filter(|r| r.chip_id == chip_id)
            .cloned()
            .collect();
        if records.is_empty() {
            return Err(Error::UnknownChip(chip_id.to_string()));
        }
        Ok(CrpDataset {
            records,
            metadata: self.metadata.clone(),
        })
    }

    /// Keeps records whose challenge satisfies `keep`.
    pub fn filter_challenges(&self, keep: impl Fn(Challenge) -> bool) -> CrpDataset {
        CrpDataset {
            records: self.records.iter().filter(|r| keep(r.challenge)).cloned().collect(),
            metadata: self.metadata.clone(),
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.records {
            w.serialize(CrpRow::from(r))?;
        }
        if self.records.is_empty() {
            w.write_record(CRP_COLUMNS)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().ne(CRP_COLUMNS.iter().copied()) {
            return Err(Error::Parse(format!(
                "unexpected CRP header `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let records = rdr
            .deserialize::<CrpRow>()
            .map(|row| row.map_err(Error::from).and_then(CrpRecord::try_from))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(records))
    }

    pub fn write_jsonl<W: Write>(&self, mut writer: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut writer, &CrpRow::from(r))?;
            writer.write_all(b"\n")?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Self> {
        let mut records = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row: CrpRow = serde_json::from_str(&line)
                .map_err(|e| Error::Parse(format!("line {}: {e}", n + 1)))?;
            records.push(CrpRecord::try_from(row)?);
        }
        Ok(Self::new(records))
    }
}

const CRP_COLUMNS: [&str; 9] = [
    "chip_id",
    "challenge",
    "region",
    "code",
    "bits",
    "encoded",
    "temperature",
    "noise_seed",
    "noise_sigma",
];

/// Flat on-disk form shared by the CSV and JSON-lines variants.
#[derive(Debug, Serialize, Deserialize)]
struct CrpRow {
    chip_id: String,
    challenge: String,
    region: usize,
    code: u32,
    bits: u32,
    encoded: String,
    temperature: f64,
    noise_seed: u64,
    noise_sigma: f64,
}

impl From<&CrpRecord> for CrpRow {
    fn from(r: &CrpRecord) -> Self {
        CrpRow {
            chip_id: r.chip_id.clone(),
            challenge: r.challenge.to_hex(),
            region: r.response.region(),
            code: r.response.code(),
            bits: r.response.bits(),
            encoded: r.response.encoded_string(),
            temperature: r.conditions.temperature,
            noise_seed: r.conditions.noise_seed,
            noise_sigma: r.conditions.noise_sigma,
        }
    }
}

impl TryFrom<CrpRow> for CrpRecord {
    type Error = Error;

    fn try_from(row: CrpRow) -> Result<Self> {
        let response = ResponseWord::new(row.region, row.code, row.bits)?;
        if response.encoded_string() != row.encoded {
            return Err(Error::Parse(format!(
                "chip {} challenge {}: encoded `{}` disagrees with region/code",
                row.chip_id, row.challenge, row.encoded
            )));
        }
        Ok(CrpRecord {
            chip_id: row.chip_id,
            challenge: Challenge::from_hex(&row.challenge)?,
            response,
            conditions: Conditions {
                temperature: row.temperature,
                noise_sigma: row.noise_sigma,
                noise_seed: row.noise_seed,
            },
        })
    }
}

/// Response of one chip to one challenge.
pub fn respond(
    chip: &ChipInstance,
    model: &TransferModel,
    spec: &QuantizerSpec,
    cfg: &AdcConfig,
    ch: Challenge,
    cond: &Conditions,
) -> Result<ResponseWord> {
    let v = array::evaluate(chip, model, ch, cond);
    adc::convert(cfg, spec, v)
}

fn check_pipeline(model: &TransferModel, spec: &QuantizerSpec, cfg: &AdcConfig) -> Result<()> {
    model.validate()?;
    cfg.validate()?;
    if model.vdd != cfg.vdd || spec.vdd() != cfg.vdd {
        return Err(Error::InvalidConfig(format!(
            "supply mismatch: model {} V, quantizer {} V, ADC {} V",
            model.vdd,
            spec.vdd(),
            cfg.vdd
        )));
    }
    Ok(())
}

/// One record per (chip, challenge), chip-major and in the given challenge
/// order. Chips are evaluated in parallel.
pub fn generate(
    chips: &[ChipInstance],
    model: &TransferModel,
    spec: &QuantizerSpec,
    cfg: &AdcConfig,
    challenges: &[Challenge],
    cond: &Conditions,
) -> Result<CrpDataset> {
    if chips.is_empty() || challenges.is_empty() {
        return Err(Error::InvalidArgument("need at least one chip and one challenge".into()));
    }
    check_pipeline(model, spec, cfg)?;
    cond.validate()?;
    let per_chip = chips
        .par_iter()
        .map(|chip| {
            challenges
                .iter()
                .map(|&ch| {
                    Ok(CrpRecord {
                        chip_id: chip.chip_id().to_string(),
                        challenge: ch,
                        response: respond(chip, model, spec, cfg, ch, cond)?,
                        conditions: *cond,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CrpDataset {
        records: per_chip.into_iter().flatten().collect(),
        metadata: Some(DatasetMetadata {
            model_digest: digest(model)?,
            quantizer_digest: digest(spec)?,
            adc_digest: digest(cfg)?,
            noise_seed: cond.noise_seed,
        }),
    })
}

/// Which bits of the 11-bit word a metric looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BitSelection {
    #[default]
    All,
    CodeField,
    RegionTag,
}

impl BitSelection {
    pub fn mask(self) -> u16 {
        match self {
            Self::All => ENCODED_MASK,
            Self::CodeField => CODE_FIELD_MASK,
            Self::RegionTag => REGION_TAG_MASK,
        }
    }

    pub fn width(self) -> u32 {
        self.mask().count_ones()
    }
}

pub fn fractional_hamming(a: u16, b: u16, sel: BitSelection) -> f64 {
    f64::from(((a ^ b) & sel.mask()).count_ones()) / f64::from(sel.width())
}

/// Per-chip challenge→word tables with a shared challenge set.
fn response_tables(ds: &CrpDataset, min_chips: usize) -> Result<Vec<(String, BTreeMap<Challenge, u16>)>> {
    let mut tables: Vec<(String, BTreeMap<Challenge, u16>)> = Vec::new();
    for r in &ds.records {
        let idx = match tables.iter().position(|(id, _)| *id == r.chip_id) {
            Some(i) => i,
            None => {
                tables.push((r.chip_id.clone(), BTreeMap::new()));
                tables.len() - 1
            }
        };
        if tables[idx].1.insert(r.challenge, r.response.encoded()).is_some() {
            return Err(Error::InvalidArgument(format!(
                "chip {} has several records for challenge {}",
                r.chip_id, r.challenge
            )));
        }
    }
    if tables.len() < min_chips {
        return Err(Error::InsufficientChips {
            needed: min_chips,
            found: tables.len(),
        });
    }
    let first: Vec<&Challenge> = tables[0].1.keys().collect();
    if let Some((id, _)) = tables.iter().find(|(_, t)| t.keys().ne(first.iter().copied())) {
        return Err(Error::InvalidArgument(format!(
            "chip {id} was queried with a different challenge set"
        )));
    }
    Ok(tables)
}

/// Mean pairwise inter-chip fractional Hamming distance over all 11 bits.
pub fn uniqueness(ds: &CrpDataset) -> Result<f64> {
    uniqueness_over(ds, BitSelection::All)
}

pub fn uniqueness_over(ds: &CrpDataset, sel: BitSelection) -> Result<f64> {
    let tables = response_tables(ds, 2)?;
    let words: Vec<Vec<u16>> = tables.iter().map(|(_, t)| t.values().copied().collect()).collect();
    let n = words.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let hd: f64 = words[i]
                .iter()
                .zip(&words[j])
                .map(|(&a, &b)| fractional_hamming(a, b, sel))
                .sum();
            total += hd / words[i].len() as f64;
        }
    }
    Ok(total / (n * (n - 1) / 2) as f64)
}

/// Fraction of ones over all encoded bits of one chip.
pub fn uniformity(ds: &CrpDataset, chip_id: &str) -> Result<f64> {
    uniformity_over(ds, chip_id, BitSelection::All)
}

pub fn uniformity_over(ds: &CrpDataset, chip_id: &str, sel: BitSelection) -> Result<f64> {
    let mut ones = 0u64;
    let mut count = 0u64;
    for r in ds.records.iter().filter(|r| r.chip_id == chip_id) {
        ones += u64::from((r.response.encoded() & sel.mask()).count_ones());
        count += u64::from(sel.width());
    }
    if count == 0 {
        return Err(Error::UnknownChip(chip_id.to_string()));
    }
    Ok(ones as f64 / count as f64)
}

/// `1 - mean intra-chip fractional Hamming distance` between responses at
/// `ref_cond` and at each test condition, over all 256 challenges.
pub fn reliability(
    chip: &ChipInstance,
    model: &TransferModel,
    spec: &QuantizerSpec,
    cfg: &AdcConfig,
    ref_cond: &Conditions,
    test_conds: &[Conditions],
) -> Result<f64> {
    if test_conds.is_empty() {
        return Err(Error::InvalidArgument("need at least one test condition".into()));
    }
    check_pipeline(model, spec, cfg)?;
    ref_cond.validate()?;
    let reference = Challenge::all()
        .map(|ch| respond(chip, model, spec, cfg, ch, ref_cond).map(|w| w.encoded()))
        .collect::<Result<Vec<_>>>()?;
    let mut total = 0.0;
    for cond in test_conds {
        cond.validate()?;
        for (ch, &r) in Challenge::all().zip(&reference) {
            let w = respond(chip, model, spec, cfg, ch, cond)?.encoded();
            total += fractional_hamming(r, w, BitSelection::All);
        }
    }
    Ok(1.0 - total / (test_conds.len() * reference.len()) as f64)
}

/// Across-chip mean of each of the 11 encoded bits; index 0 is the most
/// significant (leftmost) bit.
pub fn bit_aliasing(ds: &CrpDataset) -> Result<Vec<f64>> {
    let tables = response_tables(ds, 2)?;
    let mut ones = [0u64; ENCODED_WIDTH];
    let mut count = 0u64;
    for (_, t) in &tables {
        for &w in t.values() {
            for (pos, slot) in ones.iter_mut().enumerate() {
                *slot += u64::from((w >> (ENCODED_WIDTH - 1 - pos)) & 1);
            }
            count += 1;
        }
    }
    Ok(ones.iter().map(|&o| o as f64 / count as f64).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChipFraction {
    pub chip_id: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub uniqueness: f64,
    pub uniqueness_code_field: f64,
    pub uniformity: Vec<ChipFraction>,
    pub reliability: Vec<ChipFraction>,
    pub bit_aliasing: Vec<f64>,
}

impl MetricsReport {
    /// Dataset-only metrics; reliability needs the chips and is filled in
    /// by the caller.
    pub fn from_dataset(ds: &CrpDataset) -> Result<Self> {
        let uniformity = ds
            .chip_ids()
            .into_iter()
            .map(|id| {
                Ok(ChipFraction {
                    chip_id: id.to_string(),
                    value: uniformity(ds, id)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            uniqueness: uniqueness(ds)?,
            uniqueness_code_field: uniqueness_over(ds, BitSelection::CodeField)?,
            uniformity,
            reliability: Vec::new(),
            bit_aliasing: bit_aliasing(ds)?,
        })
    }
}
