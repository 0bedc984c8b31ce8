//! Behavioral model of the bit-cell output voltage.
//!
//! The four threshold deviations are folded into one input-referred
//! mismatch, shifted by the switching scheme's corner offset, the mirror's
//! asymmetry and a linear temperature drift. A tanh stage then maps it to
//! an output that saturates at the supply rails:
//!
//! ```text
//! delta = w . dvth + corner_offset + temp_coeff * (T - T_ref) + asymmetry
//! v_out = vdd / 2 * (1 + tanh(gain * delta / vdd))
//! ```

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::variation::{MismatchVector, ProcessCorner};

pub const DEFAULT_VDD: f64 = 1.8;
/// Bias current at zero mismatch.
pub const DEFAULT_BIAS_CURRENT: f64 = 4.3e-6;
pub const DEFAULT_TEMP_COEFF: f64 = 1e-4;
pub const REFERENCE_TEMPERATURE: f64 = 25.0;
pub const SUPPORTED_TEMPERATURE: (f64, f64) = (-20.0, 100.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MirrorKind {
    WideSwingCascode,
    ReducedHeadroomCascode,
    SimpleCascode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MirrorConfig {
    pub kind: MirrorKind,
    pub gain: f64,
    pub asymmetry_offset: f64,
    pub bias_current: f64,
}

impl MirrorConfig {
    pub fn wide_swing() -> Self {
        Self {
            kind: MirrorKind::WideSwingCascode,
            gain: 300.0,
            asymmetry_offset: 0.0,
            bias_current: DEFAULT_BIAS_CURRENT,
        }
    }

    pub fn reduced_headroom() -> Self {
        Self {
            kind: MirrorKind::ReducedHeadroomCascode,
            gain: 180.0,
            asymmetry_offset: 0.05,
            bias_current: DEFAULT_BIAS_CURRENT,
        }
    }

    pub fn simple_cascode() -> Self {
        Self {
            kind: MirrorKind::SimpleCascode,
            gain: 120.0,
            asymmetry_offset: -0.08,
            bias_current: DEFAULT_BIAS_CURRENT,
        }
    }

    pub fn preset(kind: MirrorKind) -> Self {
        match kind {
            MirrorKind::WideSwingCascode => Self::wide_swing(),
            MirrorKind::ReducedHeadroomCascode => Self::reduced_headroom(),
            MirrorKind::SimpleCascode => Self::simple_cascode(),
        }
    }
}

impl Default for MirrorConfig {
    fn default() -> Self {
        Self::wide_swing()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SwitchingKind {
    Naive,
    PowerGated,
}

/// Output shift introduced by the cell switching scheme at each corner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchingConfig {
    pub kind: SwitchingKind,
    pub corner_offsets: BTreeMap<ProcessCorner, f64>,
}

impl SwitchingConfig {
    fn with_skew(kind: SwitchingKind, skew: f64) -> Self {
        let corner_offsets = ProcessCorner::ALL
            .into_iter()
            .map(|c| {
                let off = match c {
                    ProcessCorner::SF => skew,
                    ProcessCorner::FS => -skew,
                    _ => 0.0,
                };
                (c, off)
            })
            .collect();
        Self {
            kind,
            corner_offsets,
        }
    }

    /// Switches inside the bit cell; skewed corners shift the output.
    pub fn naive() -> Self {
        Self::with_skew(SwitchingKind::Naive, 0.04)
    }

    /// External power-gating blocks; corner shifts stay sub-millivolt.
    pub fn power_gated() -> Self {
        Self::with_skew(SwitchingKind::PowerGated, 0.5e-3)
    }

    pub fn preset(kind: SwitchingKind) -> Self {
        match kind {
            SwitchingKind::Naive => Self::naive(),
            SwitchingKind::PowerGated => Self::power_gated(),
        }
    }

    pub fn offset(&self, corner: ProcessCorner) -> f64 {
        self.corner_offsets.get(&corner).copied().unwrap_or(0.0)
    }

    pub fn max_abs_offset(&self) -> f64 {
        self.corner_offsets.values().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Default for SwitchingConfig {
    fn default() -> Self {
        Self::power_gated()
    }
}

/// Environmental conditions of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conditions {
    /// Degrees Celsius.
    pub temperature: f64,
    /// Output-referred noise standard deviation in volts.
    pub noise_sigma: f64,
    pub noise_seed: u64,
}

impl Conditions {
    /// 25 °C, noiseless.
    pub fn reference() -> Self {
        Self {
            temperature: REFERENCE_TEMPERATURE,
            noise_sigma: 0.0,
            noise_seed: 0,
        }
    }

    pub fn at_temperature(temperature: f64) -> Self {
        Self {
            temperature,
            ..Self::reference()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = SUPPORTED_TEMPERATURE;
        if !(lo..=hi).contains(&self.temperature) {
            return Err(Error::InvalidConfig(format!(
                "temperature {} °C outside supported range [{lo}, {hi}] °C",
                self.temperature
            )));
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "noise_sigma must be finite and non-negative, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }
}

impl Default for Conditions {
    fn default() -> Self {
        Self::reference()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferModel {
    pub vdd: f64,
    pub mirror: MirrorConfig,
    pub switching: SwitchingConfig,
    /// Sensitivities of PM1, PM2, NM1, NM2.
    pub weights: [f64; 4],
    /// Input-referred drift in V/°C.
    pub temp_coeff: f64,
    pub temp_ref: f64,
}

impl Default for TransferModel {
    fn default() -> Self {
        Self {
            vdd: DEFAULT_VDD,
            mirror: MirrorConfig::wide_swing(),
            switching: SwitchingConfig::power_gated(),
            weights: [1.0, 0.3, -0.3, -1.0],
            temp_coeff: DEFAULT_TEMP_COEFF,
            temp_ref: REFERENCE_TEMPERATURE,
        }
    }
}

impl TransferModel {
    pub fn with_mirror(mut self, mirror: MirrorConfig) -> Self {
        self.mirror = mirror;
        self
    }

    pub fn with_switching(mut self, switching: SwitchingConfig) -> Self {
        self.switching = switching;
        self
    }

    pub fn with_gain(mut self, gain: f64) -> Self {
        self.mirror.gain = gain;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.vdd > 0.0 && self.vdd.is_finite()) {
            return Err(Error::InvalidConfig(format!("vdd must be positive, got {}", self.vdd)));
        }
        if !(self.mirror.gain > 0.0 && self.mirror.gain.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "mirror gain must be positive, got {}",
                self.mirror.gain
            )));
        }
        if !self.mirror.bias_current.is_finite() || self.mirror.bias_current < 0.0 {
            return Err(Error::InvalidConfig("bias current must be non-negative".into()));
        }
        let finite = self.weights.iter().all(|w| w.is_finite())
            && self.temp_coeff.is_finite()
            && self.temp_ref.is_finite()
            && self.mirror.asymmetry_offset.is_finite()
            && self.switching.corner_offsets.values().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidConfig("transfer model has non-finite parameters".into()));
        }
        Ok(())
    }

    /// Input-referred mismatch seen by the output stage, in volts.
    pub fn effective_mismatch(
        &self,
        cell: &MismatchVector,
        corner: ProcessCorner,
        cond: &Conditions,
    ) -> f64 {
        let weighted: f64 = self
            .weights
            .iter()
            .zip(cell.as_array())
            .map(|(w, d)| w * d)
            .sum();
        weighted
            + self.switching.offset(corner)
            + self.temp_coeff * (cond.temperature - self.temp_ref)
            + self.mirror.asymmetry_offset
    }

    /// Noiseless output voltage for an effective mismatch.
    pub fn transfer(&self, delta_eff: f64) -> f64 {
        0.5 * self.vdd * (1.0 + (self.mirror.gain * delta_eff / self.vdd).tanh())
    }

    /// Output voltage of one cell, with optional Gaussian noise, clamped
    /// to the rails.
    ///
    /// `stream` selects an independent noise stream under `cond.noise_seed`;
    /// the array uses the challenge word so that distinct cells see
    /// independent noise.
    pub fn cell_output(
        &self,
        cell: &MismatchVector,
        corner: ProcessCorner,
        cond: &Conditions,
        stream: u64,
    ) -> f64 {
        let mut v = self.transfer(self.effective_mismatch(cell, corner, cond));
        if cond.noise_sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(cond.noise_seed);
            rng.set_stream(stream);
            let z: f64 = StandardNormal.sample(&mut rng);
            v += cond.noise_sigma * z;
        }
        v.clamp(0.0, self.vdd)
    }

    /// Sweeps the PM1 deviation over `range` with all other mismatch zero,
    /// at the TT corner and reference temperature.
    pub fn transfer_curve(&self, range: (f64, f64), points: usize) -> Result<Vec<(f64, f64)>> {
        let (lo, hi) = range;
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::InvalidArgument(format!(
                "sweep range [{lo}, {hi}] is degenerate"
            )));
        }
        if points < 2 {
            return Err(Error::InvalidArgument("a sweep needs at least 2 points".into()));
        }
        let cond = Conditions::reference();
        let step = (hi - lo) / (points - 1) as f64;
        Ok((0..points)
            .map(|i| {
                let x = if i == points - 1 { hi } else { lo + step * i as f64 };
                let cell = MismatchVector {
                    dvth_pm1: x,
                    ..MismatchVector::ZERO
                };
                let delta = self.effective_mismatch(&cell, ProcessCorner::TT, &cond);
                (x, self.transfer(delta))
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(t: f64) -> Conditions {
        Conditions::at_temperature(t)
    }

    #[test]
    fn effective_mismatch_terms() {
        let m = TransferModel::default();
        let zero = MismatchVector::ZERO;
        assert_eq!(m.effective_mismatch(&zero, ProcessCorner::TT, &at(25.0)), 0.0);

        let mut drift = m.clone();
        drift.temp_coeff = 5e-4;
        let d = drift.effective_mismatch(&zero, ProcessCorner::TT, &at(35.0));
        assert!((d - 0.005).abs() < 1e-15);

        let mut one = m.clone();
        one.weights = [1.0, 0.0, 0.0, 0.0];
        let cell = MismatchVector {
            dvth_pm1: 0.01,
            ..MismatchVector::ZERO
        };
        assert_eq!(one.effective_mismatch(&cell, ProcessCorner::TT, &at(25.0)), 0.01);
    }

    #[test]
    fn transfer_midpoint_and_saturation() {
        let m = TransferModel::default();
        assert_eq!(m.transfer(0.0), 0.9);
        assert!(m.transfer(3.0 * 0.030) > 1.8 - 0.05);
        assert!(m.transfer(-3.0 * 0.030) < 0.05);
        for d in [1e-4, 3e-3, 0.02, 0.5] {
            assert!((m.transfer(d) + m.transfer(-d) - 1.8).abs() < 1e-12);
        }
    }

    #[test]
    fn cell_output_noise_is_deterministic() {
        let m = TransferModel::default();
        let cond = Conditions {
            noise_sigma: 0.01,
            noise_seed: 11,
            ..Conditions::reference()
        };
        let zero = MismatchVector::ZERO;
        let a = m.cell_output(&zero, ProcessCorner::TT, &cond, 3);
        let b = m.cell_output(&zero, ProcessCorner::TT, &cond, 3);
        assert_eq!(a, b);
        assert_ne!(a, m.cell_output(&zero, ProcessCorner::TT, &cond, 4));
        assert_eq!(m.cell_output(&zero, ProcessCorner::TT, &Conditions::reference(), 0), 0.9);
    }

    #[test]
    fn noise_stddev_matches_config() {
        let m = TransferModel::default();
        let zero = MismatchVector::ZERO;
        let n = 10_000;
        let v: Vec<f64> = (0..n)
            .map(|seed| {
                let cond = Conditions {
                    noise_sigma: 0.01,
                    noise_seed: seed,
                    ..Conditions::reference()
                };
                m.cell_output(&zero, ProcessCorner::TT, &cond, 0)
            })
            .collect();
        let mean = v.iter().sum::<f64>() / n as f64;
        let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((sd - 0.01).abs() < 0.002, "sd = {sd}");
    }

    #[test]
    fn output_clamped_to_rails() {
        let m = TransferModel::default();
        let cond = Conditions {
            noise_sigma: 0.5,
            noise_seed: 1,
            ..Conditions::reference()
        };
        let cell = MismatchVector {
            dvth_pm1: 0.2,
            ..MismatchVector::ZERO
        };
        for s in 0..200 {
            let v = m.cell_output(&cell, ProcessCorner::TT, &cond, s);
            assert!((0.0..=1.8).contains(&v));
        }
    }

    #[test]
    fn presets_respect_invariants() {
        let wide = MirrorConfig::wide_swing();
        assert_eq!(wide.asymmetry_offset, 0.0);
        assert!(wide.gain > MirrorConfig::reduced_headroom().gain);
        assert!(wide.gain > MirrorConfig::simple_cascode().gain);
        let pg = SwitchingConfig::power_gated();
        assert!(pg.max_abs_offset() <= 1e-3);
        assert!(SwitchingConfig::naive().max_abs_offset() > pg.max_abs_offset());
        let w = TransferModel::default().weights;
        assert_eq!(w[0], -w[3]);
        assert_eq!(w[1], -w[2]);
    }

    #[test]
    fn transfer_curve_shape() {
        let m = TransferModel::default();
        let curve = m.transfer_curve((-0.05, 0.05), 101).unwrap();
        assert_eq!(curve.len(), 101);
        for i in 0..101 {
            let (x, y) = curve[i];
            let (xr, yr) = curve[100 - i];
            assert!((x + xr).abs() < 1e-12);
            assert!((y + yr - 1.8).abs() < 1e-12);
        }
        let two = m.transfer_curve((-0.05, 0.05), 2).unwrap();
        assert_eq!(two.iter().map(|p| p.0).collect::<Vec<_>>(), vec![-0.05, 0.05]);
        assert!(m.transfer_curve((0.05, -0.05), 10).is_err());
        assert!(m.transfer_curve((0.0, 0.0), 10).is_err());
        assert!(m.transfer_curve((-0.05, 0.05), 1).is_err());
    }

    #[test]
    fn conditions_range_checked() {
        assert!(at(0.0).validate().is_ok());
        assert!(at(60.0).validate().is_ok());
        assert!(at(-40.0).validate().is_err());
        assert!(at(125.0).validate().is_err());
    }

    #[test]
    fn model_json_round_trip() {
        let m = TransferModel::default().with_switching(SwitchingConfig::naive());
        let text = serde_json::to_string(&m).unwrap();
        let back: TransferModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
    }
}
