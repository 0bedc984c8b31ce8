use mbpuf_core::adc::{self, quantize, AdcConfig, ResponseWord};
use mbpuf_core::analog::{Conditions, TransferModel};
use mbpuf_core::array::Challenge;
use mbpuf_core::crp::{CrpDataset, CrpRecord};
use mbpuf_core::quantizer::{lloyd_max, EmpiricalDistribution, LloydMaxOptions, QuantizerSpec};
use mbpuf_core::variation::{synth_chip, ProcessCorner, VariationConfig};
use proptest::prelude::*;

fn corner() -> impl Strategy<Value = ProcessCorner> {
    prop::sample::select(ProcessCorner::ALL.to_vec())
}

fn record() -> impl Strategy<Value = CrpRecord> {
    let spec = QuantizerSpec::standard();
    (
        "[a-z][a-z0-9_-]{0,11}",
        any::<u8>(),
        0usize..5,
        any::<u32>(),
        -20.0f64..100.0,
        0.0f64..0.05,
        any::<u64>(),
    )
        .prop_map(move |(chip_id, ch, region, raw, temperature, noise_sigma, noise_seed)| {
            let bits = spec.bits_per_region()[region];
            CrpRecord {
                chip_id,
                challenge: Challenge(ch),
                response: ResponseWord::new(region, raw % (1 << bits), bits).unwrap(),
                conditions: Conditions {
                    temperature,
                    noise_sigma,
                    noise_seed,
                },
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn quantize_is_monotone(a in 0.0f64..=1.8, b in 0.0f64..=1.8, bits in 1u32..=16) {
        let cfg = AdcConfig::default();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(quantize(&cfg, lo, bits).unwrap() <= quantize(&cfg, hi, bits).unwrap());
    }

    #[test]
    fn quantize_stays_in_code_range(v in 0.0f64..=1.8, bits in 1u32..=16) {
        let code = quantize(&AdcConfig::default(), v, bits).unwrap();
        prop_assert!(code < 1 << bits);
    }

    #[test]
    fn region_of_partitions_the_supply(a in 0.0f64..=1.8, b in 0.0f64..=1.8) {
        let spec = QuantizerSpec::standard();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (ra, _) = spec.region_of(lo).unwrap();
        let (rb, _) = spec.region_of(hi).unwrap();
        prop_assert!(ra <= rb);
        let bounds = spec.boundaries();
        prop_assert!(bounds[ra] <= lo && (lo < bounds[ra + 1] || ra == spec.region_count() - 1));
    }

    #[test]
    fn convert_is_deterministic(v in 0.0f64..=1.8, offset in -0.01f64..0.01) {
        let cfg = AdcConfig { comparator_residual_offset: offset, ..AdcConfig::default() };
        let spec = QuantizerSpec::standard();
        prop_assert_eq!(adc::convert(&cfg, &spec, v).unwrap(), adc::convert(&cfg, &spec, v).unwrap());
    }

    #[test]
    fn transfer_is_increasing_and_symmetric(a in -0.5f64..0.5, b in -0.5f64..0.5, gain in 10.0f64..1000.0) {
        let model = TransferModel::default().with_gain(gain);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(model.transfer(lo) <= model.transfer(hi));
        prop_assert!((model.transfer(a) + model.transfer(-a) - model.vdd).abs() < 1e-12);
        let v = model.transfer(a);
        prop_assert!((0.0..=model.vdd).contains(&v));
    }

    #[test]
    fn chip_json_round_trips(seed in any::<u64>(), sigma in 0.0f64..0.1, corner in corner()) {
        let cfg = VariationConfig::new(sigma, seed, corner).unwrap();
        let chip = synth_chip(&cfg, format!("chip-{seed}")).unwrap();
        let back = mbpuf_core::ChipInstance::from_json(&chip.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, chip);
    }

    #[test]
    fn crp_files_round_trip(records in prop::collection::vec(record(), 0..40)) {
        let ds = CrpDataset::new(records);
        let mut csv = Vec::new();
        ds.write_csv(&mut csv).unwrap();
        prop_assert_eq!(&CrpDataset::read_csv(csv.as_slice()).unwrap().records, &ds.records);
        let mut jsonl = Vec::new();
        ds.write_jsonl(&mut jsonl).unwrap();
        prop_assert_eq!(&CrpDataset::read_jsonl(jsonl.as_slice()).unwrap().records, &ds.records);
    }

    #[test]
    fn lloyd_max_mse_never_increases(
        samples in prop::collection::vec(0.0f64..=1.8, 50..300),
        k in 2usize..6,
    ) {
        let dist = EmpiricalDistribution::with_default_vdd(samples).unwrap();
        prop_assume!(dist.samples().windows(2).filter(|w| w[0] != w[1]).count() + 1 >= k);
        let fit = lloyd_max(&dist, k, LloydMaxOptions::default()).unwrap();
        prop_assert!(fit.mse_history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        if fit.converged {
            prop_assert!(fit.fixed_point_residual() < 1e-6);
        }
    }
}
