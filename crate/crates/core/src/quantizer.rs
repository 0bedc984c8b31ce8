//! Voltage regions and their ADC precisions, plus Lloyd-Max fitting of the
//! region boundaries from Monte Carlo output samples.

use serde::{Deserialize, Serialize};

use crate::analog::DEFAULT_VDD;
use crate::error::{Error, Result};

/// Boundaries of the five default regions.
pub const DEFAULT_BOUNDARIES: [f64; 6] = [0.0, 0.1451, 0.6596, 1.3308, 1.6978, 1.8];
/// ADC precision per default region.
pub const DEFAULT_BITS: [u32; 5] = [8, 7, 6, 7, 8];

pub const MAX_REGION_BITS: u32 = 8;

/// Ordered regions `[b_i, b_{i+1})` over `[0, vdd]` (the last one closed)
/// with a bit precision and a reconstruction centroid each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "QuantizerFile", into = "QuantizerFile")]
pub struct QuantizerSpec {
    boundaries: Vec<f64>,
    bits_per_region: Vec<u32>,
    centroids: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct QuantizerFile {
    boundaries: Vec<f64>,
    bits_per_region: Vec<u32>,
    centroids: Vec<f64>,
}

impl TryFrom<QuantizerFile> for QuantizerSpec {
    type Error = Error;

    fn try_from(f: QuantizerFile) -> Result<Self> {
        QuantizerSpec::new(f.boundaries, f.bits_per_region, f.centroids)
    }
}

impl From<QuantizerSpec> for QuantizerFile {
    fn from(s: QuantizerSpec) -> Self {
        QuantizerFile {
            boundaries: s.boundaries,
            bits_per_region: s.bits_per_region,
            centroids: s.centroids,
        }
    }
}

impl QuantizerSpec {
    pub fn new(boundaries: Vec<f64>, bits_per_region: Vec<u32>, centroids: Vec<f64>) -> Result<Self> {
        let invalid = |msg: String| Err(Error::InvalidConfig(msg));
        if boundaries.len() < 2 {
            return invalid("a quantizer needs at least two boundaries".into());
        }
        let k = boundaries.len() - 1;
        if boundaries.iter().any(|b| !b.is_finite()) {
            return invalid("boundaries must be finite".into());
        }
        if boundaries[0] != 0.0 {
            return invalid(format!("first boundary must be 0, got {}", boundaries[0]));
        }
        if !(boundaries[k] > 0.0) {
            return invalid("last boundary (vdd) must be positive".into());
        }
        if boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("boundaries must be strictly increasing".into());
        }
        if bits_per_region.len() != k || centroids.len() != k {
            return invalid(format!(
                "{k} regions need {k} precisions and {k} centroids, got {} and {}",
                bits_per_region.len(),
                centroids.len()
            ));
        }
        if let Some(b) = bits_per_region.iter().find(|&&b| b == 0 || b > MAX_REGION_BITS) {
            return invalid(format!("region precision {b} outside 1..={MAX_REGION_BITS}"));
        }
        for (i, c) in centroids.iter().enumerate() {
            let (lo, hi) = (boundaries[i], boundaries[i + 1]);
            let inside = *c >= lo && (*c < hi || (i == k - 1 && *c <= hi));
            if !inside {
                return invalid(format!("centroid {c} lies outside region {i} [{lo}, {hi})"));
            }
        }
        Ok(Self {
            boundaries,
            bits_per_region,
            centroids,
        })
    }

    /// The five default regions with precisions 8/7/6/7/8 and midpoint
    /// centroids.
    pub fn standard() -> Self {
        let boundaries = DEFAULT_BOUNDARIES.to_vec();
        let centroids = boundaries.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        Self::new(boundaries, DEFAULT_BITS.to_vec(), centroids).expect("default regions are valid")
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn bits_per_region(&self) -> &[u32] {
        &self.bits_per_region
    }

    pub fn centroids(&self) -> &[f64] {
        &self.centroids
    }

    pub fn region_count(&self) -> usize {
        self.bits_per_region.len()
    }

    pub fn vdd(&self) -> f64 {
        *self.boundaries.last().unwrap()
    }

    /// Region index (0-based) containing `v` and that region's precision.
    pub fn region_of(&self, v: f64) -> Result<(usize, u32)> {
        let vdd = self.vdd();
        if !(0.0..=vdd).contains(&v) {
            return Err(Error::OutOfRange { value: v, vdd });
        }
        // number of interior boundaries <= v
        let interior = &self.boundaries[1..self.boundaries.len() - 1];
        let idx = interior.partition_point(|&b| b <= v);
        Ok((idx, self.bits_per_region[idx]))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

impl Default for QuantizerSpec {
    fn default() -> Self {
        Self::standard()
    }
}

/// Output-voltage samples over `[0, vdd]`, kept sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    samples: Vec<f64>,
    vdd: f64,
}

impl EmpiricalDistribution {
    pub fn new(mut samples: Vec<f64>, vdd: f64) -> Result<Self> {
        if !(vdd > 0.0 && vdd.is_finite()) {
            return Err(Error::InvalidConfig(format!("vdd must be positive, got {vdd}")));
        }
        if samples.is_empty() {
            return Err(Error::InvalidArgument("distribution has no samples".into()));
        }
        if let Some(v) = samples.iter().find(|v| !(0.0..=vdd).contains(*v)) {
            return Err(Error::OutOfRange { value: *v, vdd });
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self { samples, vdd })
    }

    pub fn with_default_vdd(samples: Vec<f64>) -> Result<Self> {
        Self::new(samples, DEFAULT_VDD)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn vdd(&self) -> f64 {
        self.vdd
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn distinct_count(&self) -> usize {
        1 + self.samples.windows(2).filter(|w| w[0] != w[1]).count()
    }

    /// Mean squared error of quantizing every sample to the centroid of the
    /// region it falls in.
    pub fn mse(&self, boundaries: &[f64], centroids: &[f64]) -> f64 {
        let total: f64 = self
            .region_slices(boundaries)
            .zip(centroids)
            .map(|(slice, c)| slice.iter().map(|x| (x - c) * (x - c)).sum::<f64>())
            .sum();
        total / self.samples.len() as f64
    }

    /// Sample slices per region `[b_i, b_{i+1})`, last region closed.
    fn region_slices<'a>(&'a self, boundaries: &'a [f64]) -> impl Iterator<Item = &'a [f64]> + 'a {
        let k = boundaries.len() - 1;
        let mut cuts = Vec::with_capacity(k + 1);
        cuts.push(0);
        for b in &boundaries[1..k] {
            cuts.push(self.samples.partition_point(|x| x < b));
        }
        cuts.push(self.samples.len());
        (0..k).map(move |i| &self.samples[cuts[i]..cuts[i + 1]])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LloydMaxOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LloydMaxOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 1000,
        }
    }
}

/// Result of a Lloyd-Max run: boundaries and centroids, with the MSE after
/// every centroid update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LloydMaxFit {
    pub boundaries: Vec<f64>,
    pub centroids: Vec<f64>,
    pub mse_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl LloydMaxFit {
    pub fn mse(&self) -> f64 {
        *self.mse_history.last().unwrap()
    }

    /// Attaches per-region precisions to produce a usable spec.
    pub fn into_spec(self, bits_per_region: Vec<u32>) -> Result<QuantizerSpec> {
        QuantizerSpec::new(self.boundaries, bits_per_region, self.centroids)
    }

    /// Largest `|b_i - (c_{i-1} + c_i) / 2|` over interior boundaries.
    pub fn fixed_point_residual(&self) -> f64 {
        self.boundaries[1..self.boundaries.len() - 1]
            .iter()
            .zip(self.centroids.windows(2))
            .map(|(b, c)| (b - 0.5 * (c[0] + c[1])).abs())
            .fold(0.0, f64::max)
    }
}

/// Lloyd-Max scalar quantizer design on raw samples.
///
/// Starts from `k` equal-width regions and alternates centroid updates
/// (region means) with boundary updates (centroid midpoints) until no
/// boundary would move by `tol` or more. An empty region has its centroid
/// re-seeded at the midpoint of the most populous region.
pub fn lloyd_max(dist: &EmpiricalDistribution, k: usize, opts: LloydMaxOptions) -> Result<LloydMaxFit> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if k > dist.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds the {} available samples",
            dist.len()
        )));
    }
    if k > dist.distinct_count() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds the {} distinct sample values",
            dist.distinct_count()
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }

    let vdd = dist.vdd();
    let mut boundaries: Vec<f64> = (0..=k).map(|i| vdd * i as f64 / k as f64).collect();
    boundaries[k] = vdd;
    let mut centroids = update_centroids(dist, &boundaries);
    let mut mse_history = vec![dist.mse(&boundaries, &centroids)];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iter {
        let next = midpoint_boundaries(&ordered(&centroids), vdd);
        let movement = next
            .iter()
            .zip(&boundaries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if movement < opts.tol {
            converged = true;
            break;
        }
        boundaries = next;
        centroids = update_centroids(dist, &boundaries);
        mse_history.push(dist.mse(&boundaries, &centroids));
        iterations += 1;
    }
    let centroids = ordered(&centroids);
    if !converged {
        let next = midpoint_boundaries(&centroids, vdd);
        converged = next
            .iter()
            .zip(&boundaries)
            .all(|(a, b)| (a - b).abs() < opts.tol);
    }

    Ok(LloydMaxFit {
        boundaries,
        centroids,
        mse_history,
        iterations,
        converged,
    })
}

/// Region means, paired with their regions; empty regions get a re-seeded
/// value that may lie outside them.
fn update_centroids(dist: &EmpiricalDistribution, boundaries: &[f64]) -> Vec<f64> {
    let slices: Vec<&[f64]> = dist.region_slices(boundaries).collect();
    let mut centroids: Vec<Option<f64>> = slices
        .iter()
        .map(|s| (!s.is_empty()).then(|| s.iter().sum::<f64>() / s.len() as f64))
        .collect();
    let mut population: Vec<f64> = slices.iter().map(|s| s.len() as f64).collect();
    for i in 0..centroids.len() {
        if centroids[i].is_some() {
            continue;
        }
        // first index wins ties
        let busiest = (0..population.len())
            .fold(0, |best, j| if population[j] > population[best] { j } else { best });
        centroids[i] = Some(0.5 * (boundaries[busiest] + boundaries[busiest + 1]));
        population[busiest] /= 2.0;
    }
    centroids.into_iter().map(Option::unwrap).collect()
}

/// Sorted copy of `centroids` with coincident values nudged apart.
fn ordered(centroids: &[f64]) -> Vec<f64> {
    let mut centroids = centroids.to_vec();
    centroids.sort_by(f64::total_cmp);
    // coincident centroids would collapse a region
    for i in 1..centroids.len() {
        if centroids[i] <= centroids[i - 1] {
            centroids[i] = next_up(centroids[i - 1]);
        }
    }
    centroids
}

fn midpoint_boundaries(centroids: &[f64], vdd: f64) -> Vec<f64> {
    let mut b = Vec::with_capacity(centroids.len() + 1);
    b.push(0.0);
    for c in centroids.windows(2) {
        let mid = 0.5 * (c[0] + c[1]);
        let prev = *b.last().unwrap();
        b.push(if mid > prev { mid } else { next_up(prev) });
    }
    b.push(vdd);
    b
}

fn next_up(x: f64) -> f64 {
    f64::from_bits(if x >= 0.0 { x.to_bits() + 1 } else { x.to_bits() - 1 })
}
