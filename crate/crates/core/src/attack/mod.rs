//! Machine-learning modeling attacks on the simulated PUF.
//!
//! Two attackers are provided: one logistic-regression predictor per
//! encoded response bit, and an evolution strategy that fits a per-cell
//! parametric clone through the public transfer/ADC pipeline. Both are
//! scored against held-out challenges with [`attack_report`].

mod es;
mod features;
mod lr;
mod report;

pub use es::{es_fit, EsClone, EsHyper};
pub use features::FeatureEncoding;
pub use lr::{bce_loss_and_gradient, lr_train, BitPredictor, LrHyper, LrModel};
pub use report::{attack_report, masked_word_accuracy, AttackReport, BitAccuracy, ResponsePredictor};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::adc::ENCODED_WIDTH;
use crate::crp::CrpDataset;
use crate::error::{Error, Result};

/// Bit `index` of an encoded word, index 0 being the leftmost (region MSB).
pub fn encoded_bit(word: u16, index: usize) -> u8 {
    ((word >> (ENCODED_WIDTH - 1 - index)) & 1) as u8
}

pub(crate) fn single_chip(ds: &CrpDataset) -> Result<()> {
    match ds.chip_ids().len() {
        0 => Err(Error::InvalidArgument("dataset is empty".into())),
        1 => Ok(()),
        n => Err(Error::MultiChipDataset(n)),
    }
}

/// Splits by challenge: every record of a challenge lands on the same side.
/// The challenge order is shuffled with `seed`, and the first
/// `round(train_fraction * n)` challenges train.
pub fn split(ds: &CrpDataset, train_fraction: f64, seed: u64) -> Result<(CrpDataset, CrpDataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must lie strictly between 0 and 1, got {train_fraction}"
        )));
    }
    let mut challenges = ds.challenges();
    let n = challenges.len();
    let n_train = (train_fraction * n as f64).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::InvalidArgument(format!(
            "train fraction {train_fraction} leaves one side empty with {n} challenges"
        )));
    }
    challenges.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut is_train = [false; 256];
    for ch in &challenges[..n_train] {
        is_train[ch.0 as usize] = true;
    }
    Ok((
        ds.filter_challenges(|c| is_train[c.0 as usize]),
        ds.filter_challenges(|c| !is_train[c.0 as usize]),
    ))
}
