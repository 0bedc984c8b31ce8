use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{encoded_bit, EsClone, LrModel};
use crate::adc::{ENCODED_MASK, ENCODED_WIDTH};
use crate::array::Challenge;
use crate::crp::CrpDataset;
use crate::error::{Error, Result};

/// Anything that forecasts the 11-bit response word of a challenge.
pub trait ResponsePredictor {
    fn predict_word(&self, ch: Challenge) -> u16;
}

impl ResponsePredictor for LrModel {
    fn predict_word(&self, ch: Challenge) -> u16 {
        self.predict(ch)
    }
}

impl ResponsePredictor for EsClone {
    fn predict_word(&self, ch: Challenge) -> u16 {
        self.predict(ch).encoded()
    }
}

impl<F: Fn(Challenge) -> u16> ResponsePredictor for F {
    fn predict_word(&self, ch: Challenge) -> u16 {
        self(ch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BitAccuracy {
    /// 0 is the leftmost encoded bit.
    pub bit_index: usize,
    pub train_acc: f64,
    pub test_acc: f64,
    /// Majority-class fraction of the training labels.
    pub train_chance: f64,
    /// Test accuracy of always answering the training majority class.
    pub chance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub bits: Vec<BitAccuracy>,
    pub train_word_acc: f64,
    pub test_word_acc: f64,
    pub train_size: usize,
    pub test_size: usize,
}

/// Fraction of records whose predicted word agrees with the recorded one on
/// every bit selected by `mask`.
pub fn masked_word_accuracy(ds: &CrpDataset, predictor: &impl ResponsePredictor, mask: u16) -> Result<f64> {
    if ds.is_empty() {
        return Err(Error::InvalidArgument("cannot score an empty dataset".into()));
    }
    let hits = ds
        .records
        .iter()
        .filter(|r| (predictor.predict_word(r.challenge) ^ r.response.encoded()) & mask == 0)
        .count();
    Ok(hits as f64 / ds.len() as f64)
}

/// Scores `predictor` on both sides of a split.
pub fn attack_report(train: &CrpDataset, test: &CrpDataset, predictor: &impl ResponsePredictor) -> Result<AttackReport> {
    if train.is_empty() || test.is_empty() {
        return Err(Error::InvalidArgument("train and test sets must be non-empty".into()));
    }
    let score = |ds: &CrpDataset| -> (Vec<usize>, Vec<usize>, usize) {
        let mut correct = vec![0; ENCODED_WIDTH];
        let mut ones = vec![0; ENCODED_WIDTH];
        let mut words = 0;
        for r in &ds.records {
            let truth = r.response.encoded();
            let guess = predictor.predict_word(r.challenge);
            for bit in 0..ENCODED_WIDTH {
                let t = encoded_bit(truth, bit);
                correct[bit] += usize::from(t == encoded_bit(guess, bit));
                ones[bit] += usize::from(t);
            }
            words += usize::from((truth ^ guess) & ENCODED_MASK == 0);
        }
        (correct, ones, words)
    };
    let (train_correct, train_ones, train_words) = score(train);
    let (test_correct, test_ones, test_words) = score(test);
    let (n_tr, n_te) = (train.len(), test.len());

    let bits = (0..ENCODED_WIDTH)
        .map(|bit| {
            // ties go to 0, like an untrained predictor
            let majority_one = 2 * train_ones[bit] > n_tr;
            let train_majority = train_ones[bit].max(n_tr - train_ones[bit]);
            let test_agree = if majority_one { test_ones[bit] } else { n_te - test_ones[bit] };
            BitAccuracy {
                bit_index: bit,
                train_acc: train_correct[bit] as f64 / n_tr as f64,
                test_acc: test_correct[bit] as f64 / n_te as f64,
                train_chance: train_majority as f64 / n_tr as f64,
                chance: test_agree as f64 / n_te as f64,
            }
        })
        .collect();
    Ok(AttackReport {
        bits,
        train_word_acc: train_words as f64 / n_tr as f64,
        test_word_acc: test_words as f64 / n_te as f64,
        train_size: n_tr,
        test_size: n_te,
    })
}

impl AttackReport {
    /// `bit_index,train_acc,test_acc,chance` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["bit_index", "train_acc", "test_acc", "chance"])?;
        for b in &self.bits {
            w.write_record([
                b.bit_index.to_string(),
                b.train_acc.to_string(),
                b.test_acc.to_string(),
                b.chance.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Mean test accuracy and mean chance over the given bit positions.
    pub fn mean_test_vs_chance(&self, positions: impl IntoIterator<Item = usize>) -> (f64, f64) {
        let (mut acc, mut chance, mut n) = (0.0, 0.0, 0.0);
        for i in positions {
            acc += self.bits[i].test_acc;
            chance += self.bits[i].chance;
            n += 1.0;
        }
        (acc / n, chance / n)
    }

    pub fn summary(&self) -> String {
        format!(
            "word accuracy: train {:.4} ({} CRPs), test {:.4} ({} CRPs)",
            self.train_word_acc, self.train_size, self.test_word_acc, self.test_size
        )
    }
}
