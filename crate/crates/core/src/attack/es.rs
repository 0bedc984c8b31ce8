use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::single_chip;
use crate::adc::{self, AdcConfig, ResponseWord, ENCODED_WIDTH};
use crate::array::{decode, Challenge};
use crate::crp::CrpDataset;
use crate::error::{Error, Result};
use crate::analog::TransferModel;
use crate::quantizer::QuantizerSpec;
use crate::variation::CELL_COUNT;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EsHyper {
    /// μ, survivors per generation.
    pub parents: usize,
    /// λ, offspring per generation.
    pub offspring: usize,
    /// Spread of the initial population and the first mutation step, volts.
    pub sigma_init: f64,
    pub sigma_min: f64,
    /// Per-coordinate probability of being mutated.
    pub mutation_rate: f64,
    pub generations: usize,
    /// Generations without improvement before the step size is halved.
    pub stagnation: usize,
    pub seed: u64,
}

impl Default for EsHyper {
    fn default() -> Self {
        Self {
            parents: 4,
            offspring: 16,
            sigma_init: 0.03,
            sigma_min: 1e-6,
            mutation_rate: 4.0 / CELL_COUNT as f64,
            generations: 20_000,
            stagnation: 20,
            seed: 0,
        }
    }
}

impl EsHyper {
    fn validate(&self) -> Result<()> {
        let ok = self.parents >= 1
            && self.offspring >= 1
            && self.sigma_init > 0.0
            && self.sigma_min > 0.0
            && self.sigma_min <= self.sigma_init
            && self.mutation_rate > 0.0
            && self.mutation_rate <= 1.0
            && self.stagnation >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid ES hyperparameters {self:?}")))
        }
    }
}

/// A fitted software clone: one effective mismatch per cell, pushed through
/// the public transfer and ADC stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsClone {
    pub params: Vec<f64>,
    /// Mean fractional Hamming distance on the training CRPs.
    pub fitness: f64,
    /// Best fitness after initialization and after every generation.
    pub fitness_history: Vec<f64>,
    pub hyper: EsHyper,
    model: TransferModel,
    spec: QuantizerSpec,
    cfg: AdcConfig,
}

impl EsClone {
    pub fn predict(&self, ch: Challenge) -> ResponseWord {
        predict_with(&self.params, &self.model, &self.spec, &self.cfg, ch)
    }
}

fn predict_with(
    params: &[f64],
    model: &TransferModel,
    spec: &QuantizerSpec,
    cfg: &AdcConfig,
    ch: Challenge,
) -> ResponseWord {
    let v = model.transfer(params[decode(ch).index()]).clamp(0.0, cfg.vdd);
    adc::convert(cfg, spec, v).expect("clamped voltage is in range")
}

struct Individual {
    params: Vec<f64>,
    /// Mismatched encoded bits per cell, summed over that cell's records.
    costs: Vec<u32>,
    errors: u32,
}

/// (μ+λ) evolution strategy over the 256 per-cell effective mismatches,
/// minimizing mean encoded-response Hamming distance on `train`.
///
/// Each offspring copies a uniformly chosen parent and perturbs every
/// coordinate with probability `mutation_rate` (at least one) by
/// `N(0, sigma²)`. `sigma` halves after `stagnation` generations without
/// improvement of the best fitness and restarts at `sigma_init` once it
/// falls below `sigma_min`.
///
/// A challenge addresses exactly one cell, so the fitness is a sum of
/// per-cell terms and offspring are scored by re-evaluating only the cells
/// they mutated.
pub fn es_fit(
    train: &CrpDataset,
    model: &TransferModel,
    spec: &QuantizerSpec,
    cfg: &AdcConfig,
    hyper: &EsHyper,
) -> Result<EsClone> {
    single_chip(train)?;
    hyper.validate()?;
    model.validate()?;
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidArgument("cannot fit an empty dataset".into()));
    }
    let mut targets: Vec<Vec<(Challenge, u16)>> = vec![Vec::new(); CELL_COUNT];
    for r in &train.records {
        targets[decode(r.challenge).index()].push((r.challenge, r.response.encoded()));
    }
    let total_bits = (train.len() * ENCODED_WIDTH) as f64;
    let cell_cost = |params: &[f64], cell: usize| -> u32 {
        targets[cell]
            .iter()
            .map(|&(ch, w)| (predict_with(params, model, spec, cfg, ch).encoded() ^ w).count_ones())
            .sum()
    };
    let individual = |params: Vec<f64>| -> Individual {
        let costs: Vec<u32> = (0..CELL_COUNT).map(|c| cell_cost(&params, c)).collect();
        let errors = costs.iter().sum();
        Individual { params, costs, errors }
    };
    let fitness = |ind: &Individual| f64::from(ind.errors) / total_bits;

    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let normal = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };

    let initial: Vec<Vec<f64>> = (0..hyper.parents)
        .map(|_| (0..CELL_COUNT).map(|_| hyper.sigma_init * normal(&mut rng)).collect())
        .collect();
    let mut population: Vec<Individual> = initial.into_par_iter().map(individual).collect();
    population.sort_by_key(|ind| ind.errors);

    let mut sigma = hyper.sigma_init;
    let mut best = population[0].errors;
    let mut history = vec![fitness(&population[0])];
    let mut since_improvement = 0;

    for _ in 0..hyper.generations {
        if best == 0 {
            history.push(0.0);
            continue;
        }
        let mutations: Vec<(usize, Vec<(usize, f64)>)> = (0..hyper.offspring)
            .map(|_| {
                let parent = rng.random_range(0..population.len());
                let mut steps = Vec::new();
                for j in 0..CELL_COUNT {
                    if rng.random_bool(hyper.mutation_rate) {
                        steps.push((j, sigma * normal(&mut rng)));
                    }
                }
                if steps.is_empty() {
                    let j = rng.random_range(0..CELL_COUNT);
                    steps.push((j, sigma * normal(&mut rng)));
                }
                (parent, steps)
            })
            .collect();
        let mut pool: Vec<Individual> = mutations
            .into_par_iter()
            .map(|(parent, steps)| {
                let parent = &population[parent];
                let mut params = parent.params.clone();
                let mut costs = parent.costs.clone();
                for &(j, step) in &steps {
                    params[j] += step;
                }
                for &(j, _) in &steps {
                    costs[j] = cell_cost(&params, j);
                }
                let errors = costs.iter().sum();
                Individual { params, costs, errors }
            })
            .collect();
        // offspring ahead of parents so that ties move the population
        pool.append(&mut population);
        pool.sort_by_key(|ind| ind.errors);
        pool.truncate(hyper.parents);
        population = pool;

        if population[0].errors < best {
            best = population[0].errors;
            since_improvement = 0;
        } else {
            since_improvement += 1;
            if since_improvement >= hyper.stagnation {
                sigma *= 0.5;
                if sigma < hyper.sigma_min {
                    sigma = hyper.sigma_init;
                }
                since_improvement = 0;
            }
        }
        history.push(fitness(&population[0]));
    }

    let fitness = fitness(&population[0]);
    let winner = population.swap_remove(0);
    Ok(EsClone {
        params: winner.params,
        fitness,
        fitness_history: history,
        hyper: *hyper,
        model: model.clone(),
        spec: spec.clone(),
        cfg: *cfg,
    })
}
