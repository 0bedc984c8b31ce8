//! One PASS/FAIL line per acceptance criterion. Exits non-zero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use mbpuf_core::adc::{self, comparison_table, quantize, AdcConfig, ResponseWord, ENCODED_MASK};
use mbpuf_core::analog::{Conditions, SwitchingConfig, TransferModel};
use mbpuf_core::array::Challenge;
use mbpuf_core::attack::{
    attack_report, bce_loss_and_gradient, lr_train, masked_word_accuracy, split, FeatureEncoding, LrHyper,
};
use mbpuf_core::crp::{generate, reliability, uniqueness_over, BitSelection, CrpDataset};
use mbpuf_core::quantizer::{
    lloyd_max, EmpiricalDistribution, LloydMaxOptions, QuantizerSpec, DEFAULT_BITS, DEFAULT_BOUNDARIES,
};
use mbpuf_core::variation::{sample_population, synth_chip, ChipInstance, MismatchVector, ProcessCorner, VariationConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

type Outcome = Result<String, String>;

fn require(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_1() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for row in comparison_table() {
        let pj = row.computed * 1e12;
        if row.name == "TV-PUF" {
            ok &= row.inconsistent && (pj - 0.000181).abs() < 1e-12;
            parts.push(format!("{} {pj:.6} pJ flagged={}", row.name, row.inconsistent));
        } else {
            ok &= !row.inconsistent;
            parts.push(format!("{} {pj:.4} pJ err={:.2}%", row.name, 100.0 * row.relative_error));
        }
    }
    require(ok, parts.join("; "))
}

fn criterion_2() -> Outcome {
    let spec = QuantizerSpec::standard();
    let constants = spec.boundaries() == [0.0, 0.1451, 0.6596, 1.3308, 1.6978, 1.8]
        && spec.bits_per_region() == [8, 7, 6, 7, 8]
        && spec.boundaries() == DEFAULT_BOUNDARIES
        && spec.bits_per_region() == DEFAULT_BITS;
    let b = spec.boundaries();
    let mut disagreements = 0;
    for i in 0..10_000 {
        let v = 1.8 * i as f64 / 9_999.0;
        let scan = (0..5).find(|&r| b[r] <= v && v < b[r + 1]).unwrap_or(4);
        disagreements += usize::from(spec.region_of(v).unwrap().0 != scan);
    }
    require(
        constants && disagreements == 0,
        format!("constants exact: {constants}; region_of disagreements on 10^4 points: {disagreements}"),
    )
}

fn two_level_mse(samples: &[f64], t: f64) -> f64 {
    let (lo, hi): (Vec<f64>, Vec<f64>) = samples.iter().partition(|&&x| x < t);
    let sse = |v: &[f64]| {
        if v.is_empty() {
            return 0.0;
        }
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>()
    };
    (sse(&lo) + sse(&hi)) / samples.len() as f64
}

/// Least two-level MSE over 1 mV thresholds and the span attaining it.
fn grid_oracle(samples: &[f64]) -> (f64, f64, f64) {
    let scored: Vec<(f64, f64)> = (1..1800)
        .map(|i| i as f64 * 1e-3)
        .map(|t| (t, two_level_mse(samples, t)))
        .collect();
    let best = scored.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let argmin: Vec<f64> = scored.iter().filter(|s| s.1 <= best * (1.0 + 1e-12)).map(|s| s.0).collect();
    (best, argmin[0], *argmin.last().unwrap())
}

fn mixture(rng: &mut ChaCha8Rng, parts: &[(f64, f64, f64)], n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let mut u: f64 = rng.random();
            let &(_, mu, sd) = parts
                .iter()
                .find(|(w, _, _)| {
                    u -= w;
                    u < 0.0
                })
                .unwrap_or(parts.last().unwrap());
            Normal::new(mu, sd).unwrap().sample(rng).clamp(0.0, 1.8)
        })
        .collect()
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut monotone = 0;
    let mut worst_residual: f64 = 0.0;
    for _ in 0..10 {
        let parts: Vec<(f64, f64, f64)> = (0..3)
            .map(|_| (1.0 / 3.0, rng.random_range(0.0..1.8), rng.random_range(0.02..0.3)))
            .collect();
        let samples = mixture(&mut rng, &parts, 2000);
        let dist = EmpiricalDistribution::with_default_vdd(samples).unwrap();
        let fit = lloyd_max(&dist, 5, LloydMaxOptions::default()).unwrap();
        monotone += usize::from(fit.mse_history.windows(2).all(|w| w[1] <= w[0]));
        if !fit.converged {
            return Err("Lloyd-Max did not converge".into());
        }
        worst_residual = worst_residual.max(fit.fixed_point_residual());
    }

    let mixtures: [&[(f64, f64, f64)]; 3] = [
        &[(0.5, 0.5, 0.2), (0.5, 1.3, 0.2)],
        &[(0.3, 0.2, 0.1), (0.7, 1.2, 0.15)],
        &[(0.4, 0.2, 0.1), (0.2, 0.9, 0.2), (0.4, 1.6, 0.1)],
    ];
    let mut oracle_gap: f64 = 0.0;
    for parts in mixtures {
        let samples = mixture(&mut rng, parts, 2000);
        let (_, lo, hi) = grid_oracle(&samples);
        let dist = EmpiricalDistribution::with_default_vdd(samples).unwrap();
        let b = lloyd_max(&dist, 2, LloydMaxOptions::default()).unwrap().boundaries[1];
        oracle_gap = oracle_gap.max((lo - b).max(b - hi).max(0.0));
    }
    require(
        monotone == 10 && worst_residual <= 1e-6 && oracle_gap < 0.01,
        format!(
            "MSE non-increasing on {monotone}/10; worst midpoint residual {worst_residual:.2e} V; \
             k=2 distance to grid optimum {oracle_gap:.4} V"
        ),
    )
}

fn corner_spread(model: &TransferModel) -> f64 {
    let outs: Vec<f64> = ProcessCorner::ALL
        .iter()
        .map(|&c| model.cell_output(&MismatchVector::ZERO, c, &Conditions::reference(), 0))
        .collect();
    outs.iter().cloned().fold(f64::MIN, f64::max) - outs.iter().cloned().fold(f64::MAX, f64::min)
}

fn criterion_4() -> Outcome {
    let model = TransferModel::default();
    let grid: Vec<f64> = (0..1000).map(|i| -0.05 + 0.1 * i as f64 / 999.0).collect();
    let symmetry = grid
        .iter()
        .map(|&d| (model.transfer(d) + model.transfer(-d) - 1.8).abs())
        .fold(0.0, f64::max);
    let grid: Vec<f64> = (0..1000).map(|i| -0.01 + 0.02 * i as f64 / 999.0).collect();
    let monotone = grid.windows(2).all(|w| model.transfer(w[0]) < model.transfer(w[1]));
    let zero = model.cell_output(&MismatchVector::ZERO, ProcessCorner::TT, &Conditions::reference(), 0);
    let naive = corner_spread(&TransferModel::default().with_switching(SwitchingConfig::naive()));
    let gated = corner_spread(&TransferModel::default().with_switching(SwitchingConfig::power_gated()));
    require(
        symmetry < 1e-12 && monotone && zero == 0.9 && naive > gated,
        format!(
            "max symmetry error {symmetry:.1e}; strictly increasing: {monotone}; zero-mismatch {zero} V; \
             corner spread naive {naive:.4} V > gated {gated:.4} V"
        ),
    )
}

fn criterion_5() -> Outcome {
    let model = TransferModel::default();
    let spec = QuantizerSpec::standard();
    let mut counts = [0usize; 5];
    for m in sample_population(&VariationConfig::with_seed(5), 100_000).unwrap() {
        let v = model.cell_output(&m, ProcessCorner::TT, &Conditions::reference(), 0);
        counts[spec.region_of(v).unwrap().0] += 1;
    }
    let outer = counts[0] + counts[4];
    require(
        outer > counts[2],
        format!("region counts {counts:?}; regions 1+5 = {outer} vs region 3 = {}", counts[2]),
    )
}

fn criterion_6() -> Outcome {
    let cfg = AdcConfig::default();
    let spec = QuantizerSpec::standard();
    let mut monotone = true;
    let mut in_bounds = true;
    let mut all_codes_hit = true;
    for bits in 1..=16u32 {
        let levels = 1usize << bits;
        let mut hit = vec![false; levels];
        let steps = 4 * levels.max(10_000);
        let mut last = 0;
        for i in 0..=steps {
            let v = 1.8 * i as f64 / steps as f64;
            let code = quantize(&cfg, v, bits).unwrap();
            monotone &= code >= last;
            in_bounds &= (code as usize) < levels;
            last = code;
            if (code as usize) < levels {
                hit[code as usize] = true;
            }
        }
        all_codes_hit &= hit.iter().all(|&h| h);
    }
    let mut round_trips = 0;
    let mut failures = 0;
    for (region, &bits) in spec.bits_per_region().iter().enumerate() {
        for code in 0..(1u32 << bits) {
            let w = ResponseWord::new(region, code, bits).unwrap();
            let ok = ResponseWord::decode(w.encoded(), &spec).ok() == Some(w)
                && ResponseWord::parse_encoded(&w.encoded_string()).ok() == Some(w.encoded());
            round_trips += 1;
            failures += usize::from(!ok);
        }
    }
    let deterministic = (0..=10_000).all(|i| {
        let v = 1.8 * i as f64 / 10_000.0;
        adc::convert(&cfg, &spec, v).unwrap() == adc::convert(&cfg, &spec, v).unwrap()
    });
    require(
        monotone && in_bounds && all_codes_hit && failures == 0 && deterministic,
        format!(
            "monotone {monotone}; codes in bounds {in_bounds}; every code reachable {all_codes_hit}; \
             {round_trips} encodings round-tripped with {failures} failures; convert deterministic {deterministic}"
        ),
    )
}

fn population(n: u64) -> Vec<ChipInstance> {
    (0..n)
        .map(|i| synth_chip(&VariationConfig::with_seed(7000 + i), format!("chip-{i:03}")).unwrap())
        .collect()
}

fn all_crps(chips: &[ChipInstance]) -> CrpDataset {
    let all: Vec<Challenge> = Challenge::all().collect();
    generate(
        chips,
        &TransferModel::default(),
        &QuantizerSpec::standard(),
        &AdcConfig::default(),
        &all,
        &Conditions::reference(),
    )
    .unwrap()
}

fn reliability_over(model: &TransferModel, chips: &[ChipInstance], temps: &[Conditions]) -> (f64, f64) {
    let spec = QuantizerSpec::standard();
    let cfg = AdcConfig::default();
    let values: Vec<f64> = chips
        .iter()
        .map(|c| reliability(c, model, &spec, &cfg, &Conditions::reference(), temps).unwrap())
        .collect();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    (mean, values.iter().cloned().fold(f64::INFINITY, f64::min))
}

fn criterion_7() -> Outcome {
    let chips = population(100);
    let uniq = uniqueness_over(&all_crps(&chips), BitSelection::CodeField).unwrap();
    let temps = [0.0, 30.0, 60.0].map(Conditions::at_temperature);
    let model = TransferModel::default();
    let (mean, worst) = reliability_over(&model, &chips, &temps);
    let (at_ref, _) = reliability_over(&model, &chips, &[Conditions::reference()]);
    let steep = TransferModel {
        temp_coeff: 5e-4,
        ..TransferModel::default()
    };
    let (steep_mean, _) = reliability_over(&steep, &chips, &temps);
    require(
        (uniq - 0.5).abs() <= 0.05 && worst >= 0.90 && at_ref == 1.0,
        format!(
            "code-field uniqueness {uniq:.4}; reliability over 0/30/60 C mean {mean:.4} worst chip {worst:.4} \
             (drift {} V/C; 5e-4 V/C would give {steep_mean:.4}); reference reliability {at_ref}",
            model.temp_coeff
        ),
    )
}

fn criterion_8() -> Outcome {
    // analytic gradient vs central differences
    let mut worst_rel: f64 = 0.0;
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..20).map(|_| (0..10).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let y: Vec<f64> = (0..20).map(|_| f64::from(rng.random_bool(0.5))).collect();
        let w: Vec<f64> = (0..10).map(|_| rng.random_range(-0.5..0.5)).collect();
        let b = rng.random_range(-0.5..0.5);
        let (_, gw, gb) = bce_loss_and_gradient(&x, &y, &w, b, 0.1);
        let h = 1e-5;
        let loss = |w: &[f64], b: f64| bce_loss_and_gradient(&x, &y, w, b, 0.1).0;
        for j in 0..w.len() {
            let (mut wp, mut wm) = (w.clone(), w.clone());
            wp[j] += h;
            wm[j] -= h;
            let fd = (loss(&wp, b) - loss(&wm, b)) / (2.0 * h);
            worst_rel = worst_rel.max((fd - gw[j]).abs() / fd.abs().max(gw[j].abs()));
        }
        let fd = (loss(&w, b + h) - loss(&w, b - h)) / (2.0 * h);
        worst_rel = worst_rel.max((fd - gb).abs() / fd.abs().max(gb.abs()));
    }

    let chips = population(10);
    let single = all_crps(&chips[..1]);
    let memo = lr_train(&single, FeatureEncoding::OneHotCell, &LrHyper::default()).unwrap();
    let memo_acc = masked_word_accuracy(&single, &memo, ENCODED_MASK).unwrap();

    let mut held_out = Vec::new();
    let mut word_vs_bit = true;
    for encoding in FeatureEncoding::ALL {
        let (mut acc, mut chance) = (0.0, 0.0);
        for (seed, chip) in chips.iter().enumerate() {
            let ds = all_crps(std::slice::from_ref(chip));
            let (train, test) = split(&ds, 0.8, seed as u64).unwrap();
            let hyper = LrHyper {
                seed: seed as u64,
                ..LrHyper::default()
            };
            let model = lr_train(&train, encoding, &hyper).unwrap();
            let (a, c) = attack_report(&train, &test, &model).unwrap().mean_test_vs_chance(3..11);
            acc += a;
            chance += c;
            let word = masked_word_accuracy(&test, &model, ENCODED_MASK).unwrap();
            let msb = masked_word_accuracy(&test, &model, 1 << 10).unwrap();
            word_vs_bit &= word <= msb;
        }
        held_out.push((encoding, acc / 10.0, chance / 10.0));
    }
    let held_ok = held_out.iter().all(|(_, a, c)| (a - c).abs() <= 0.05);
    let held_text: Vec<String> = held_out
        .iter()
        .map(|(e, a, c)| format!("{e} {:.3} vs chance {:.3}", a, c))
        .collect();
    require(
        worst_rel < 1e-5 && memo_acc >= 0.95 && held_ok && word_vs_bit,
        format!(
            "gradient rel. err {worst_rel:.1e}; memorization word accuracy {memo_acc:.4}; \
             held-out code bits over 10 seeds: {}; full word <= MSB held-out: {word_vs_bit}",
            held_text.join(", ")
        ),
    )
}

fn mbpuf(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_mbpuf"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("mbpuf {args:?} failed: {}", String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    mbpuf(
        d,
        &["crps", "--seed", "11", "--chips", "4", "--noise-sigma", "0.002", "--noise-seed", "9", "--out", "first.csv"],
    )?;
    mbpuf(d, &["replay", "first.csv.manifest.json", "--out", "second.csv"])?;
    mbpuf(d, &["replay", "first.csv.manifest.json", "--out", "third.csv"])?;
    let read = |name: &str| std::fs::read(d.join(name)).map_err(|e| e.to_string());
    let (a, b, c) = (read("first.csv")?, read("second.csv")?, read("third.csv")?);
    require(
        a == b && b == c && !a.is_empty(),
        format!("two replays of one manifest: {} bytes each, identical: {}", a.len(), a == b && b == c),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("energy table", criterion_1),
        ("region constants", criterion_2),
        ("Lloyd-Max", criterion_3),
        ("analog core", criterion_4),
        ("rail skew", criterion_5),
        ("ADC", criterion_6),
        ("PUF metrics", criterion_7),
        ("attack harness", criterion_8),
        ("end-to-end determinism", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name} ({secs:.1}s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL  {name} ({secs:.1}s): {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
