use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use mbpuf_core::adc::comparison_table;
use mbpuf_core::analog::Conditions;
use mbpuf_core::attack::{attack_report, es_fit, lr_train, split, AttackReport, EsHyper, LrHyper};
use mbpuf_core::crp::{generate, reliability, ChipFraction, MetricsReport};
use mbpuf_core::quantizer::{lloyd_max, EmpiricalDistribution, LloydMaxOptions, DEFAULT_BITS};
use mbpuf_core::variation::{sample_population, synth_chip};
use mbpuf_core::{AdcConfig, Challenge, ChipInstance, CrpDataset, QuantizerSpec, VariationConfig};
use serde::Serialize;

use crate::args::*;
use crate::manifest::{manifest_path, Io, Manifest};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Replay(args) => replay(&args),
        other => execute(other).map(|_| ()),
    }
}

/// Runs one command and writes its manifest; returns the manifest.
fn execute(command: Command) -> Result<Manifest> {
    let mut io = Io::default();
    let (out, is_dir) = match &command {
        Command::Synth(a) => (synth(a, &mut io)?, true),
        Command::Mc(a) => (mc(a, &mut io)?, false),
        Command::FitQuantizer(a) => (fit_quantizer(a, &mut io)?, false),
        Command::Crps(a) => (crps(a, &mut io)?, false),
        Command::Metrics(a) => (metrics(a, &mut io)?, false),
        Command::Attack(a) => (attack(a, &mut io)?, false),
        Command::Energy(a) => (energy(a, &mut io)?, false),
        Command::Curve(a) => (curve(a, &mut io)?, false),
        Command::Replay(_) => bail!("a manifest cannot record a replay"),
    };
    let manifest = Manifest::new(command, io);
    manifest.write(&manifest_path(&out, is_dir))?;
    Ok(manifest)
}

fn replay(args: &ReplayArgs) -> Result<()> {
    let recorded = Manifest::load(&args.manifest)?;
    recorded.check_inputs()?;
    let mut invocation = recorded.invocation.clone();
    if let Some(out) = &args.out {
        *invocation.out_mut().context("manifest has no output path")? = out.clone();
    }
    let fresh = execute(invocation)?;
    ensure!(
        fresh.outputs.len() == recorded.outputs.len(),
        "replay wrote {} files, manifest records {}",
        fresh.outputs.len(),
        recorded.outputs.len()
    );
    for (new, old) in fresh.outputs.iter().zip(&recorded.outputs) {
        ensure!(
            new.sha256 == old.sha256,
            "{} differs from recorded {}",
            new.path.display(),
            old.path.display()
        );
    }
    println!("replay reproduced {} file(s)", fresh.outputs.len());
    Ok(())
}

fn csv_bytes<R: Serialize>(rows: impl IntoIterator<Item = R>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(w.into_inner()?)
}

fn variation(seed: u64, corner: Corner, sigma_vth: f64) -> Result<VariationConfig> {
    Ok(VariationConfig::new(sigma_vth, seed, corner.into())?)
}

fn chip_id(i: usize) -> String {
    format!("chip-{i:03}")
}

fn synth_chips(v: &VariationArgs) -> Result<Vec<ChipInstance>> {
    ensure!(v.chips >= 1, "--chips must be at least 1");
    (0..v.chips)
        .map(|i| {
            let cfg = variation(v.seed.wrapping_add(i as u64), v.corner, v.sigma_vth)?;
            Ok(synth_chip(&cfg, chip_id(i))?)
        })
        .collect()
}

fn load_chips(io: &mut Io, dir: &Path) -> Result<Vec<ChipInstance>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("cannot list {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| {
        p.file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.starts_with("chip-") && n.ends_with(".json"))
    });
    paths.sort();
    ensure!(!paths.is_empty(), "no chip-*.json files in {}", dir.display());
    paths
        .iter()
        .map(|p| {
            ChipInstance::from_json(&io.read_string(p)?).with_context(|| format!("malformed chip file {}", p.display()))
        })
        .collect()
}

fn load_quantizer(io: &mut Io, path: Option<&Path>) -> Result<QuantizerSpec> {
    match path {
        Some(p) => QuantizerSpec::from_json(&io.read_string(p)?)
            .with_context(|| format!("malformed quantizer spec {}", p.display())),
        None => Ok(QuantizerSpec::standard()),
    }
}

fn is_jsonl(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "jsonl")
}

fn load_crps(io: &mut Io, path: &Path) -> Result<CrpDataset> {
    let bytes = io.read(path)?;
    let ds = if is_jsonl(path) {
        CrpDataset::read_jsonl(bytes.as_slice())
    } else {
        CrpDataset::read_csv(bytes.as_slice())
    };
    let ds = ds.with_context(|| format!("malformed CRP file {}", path.display()))?;
    ensure!(!ds.is_empty(), "{} holds no CRPs", path.display());
    Ok(ds)
}

fn synth(a: &SynthArgs, io: &mut Io) -> Result<PathBuf> {
    for (i, chip) in synth_chips(&a.variation)?.iter().enumerate() {
        let mut text = chip.to_json()?;
        text.push('\n');
        io.write(&a.out.join(format!("{}.json", chip_id(i))), text.as_bytes())?;
    }
    Ok(a.out.clone())
}

#[derive(Serialize)]
struct Bin {
    bin_center: f64,
    count: usize,
}

#[derive(Serialize)]
struct Sample {
    voltage: f64,
}

fn mc(a: &McArgs, io: &mut Io) -> Result<PathBuf> {
    ensure!(a.bins >= 2, "--bins must be at least 2");
    let model = a.model.build();
    model.validate()?;
    let cond = Conditions::at_temperature(a.temp);
    cond.validate()?;
    let corner = a.corner.into();
    let population = sample_population(&variation(a.seed, a.corner, a.sigma_vth)?, a.samples)?;
    let volts: Vec<f64> = population
        .iter()
        .map(|m| model.cell_output(m, corner, &cond, 0))
        .collect();
    let mut counts = vec![0usize; a.bins];
    for &v in &volts {
        let i = ((v / model.vdd) * a.bins as f64).floor() as usize;
        counts[i.min(a.bins - 1)] += 1;
    }
    let width = model.vdd / a.bins as f64;
    let bins = counts.iter().enumerate().map(|(i, &count)| Bin {
        bin_center: (i as f64 + 0.5) * width,
        count,
    });
    io.write(&a.out, &csv_bytes(bins)?)?;
    if let Some(path) = &a.samples_out {
        io.write(path, &csv_bytes(volts.iter().map(|&voltage| Sample { voltage }))?)?;
    }
    Ok(a.out.clone())
}

fn read_voltages(bytes: &[u8]) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_reader(bytes);
    let column = rdr.headers()?.iter().position(|h| h == "voltage").unwrap_or(0);
    rdr.records()
        .enumerate()
        .map(|(n, rec)| {
            let rec = rec?;
            let field = rec.get(column).with_context(|| format!("row {} has no column {column}", n + 1))?;
            field
                .trim()
                .parse::<f64>()
                .with_context(|| format!("row {}: `{field}` is not a number", n + 1))
        })
        .collect()
}

fn fit_quantizer(a: &FitArgs, io: &mut Io) -> Result<PathBuf> {
    let samples = read_voltages(&io.read(&a.samples)?)?;
    let dist = EmpiricalDistribution::with_default_vdd(samples)?;
    let opts = LloydMaxOptions {
        tol: a.tol,
        max_iter: a.max_iter,
    };
    let fit = lloyd_max(&dist, a.k, opts)?;
    if !fit.converged {
        eprintln!("warning: Lloyd-Max stopped after {} iterations without converging", fit.iterations);
    }
    let bits = match &a.bits {
        Some(b) => b.clone(),
        None if a.k == DEFAULT_BITS.len() => DEFAULT_BITS.to_vec(),
        None => vec![8; a.k],
    };
    let spec = fit.into_spec(bits)?;
    let mut text = spec.to_json()?;
    text.push('\n');
    io.write(&a.out, text.as_bytes())?;
    Ok(a.out.clone())
}

fn crps(a: &CrpsArgs, io: &mut Io) -> Result<PathBuf> {
    let chips = match &a.chips_dir {
        Some(dir) => load_chips(io, dir)?,
        None => synth_chips(&a.variation)?,
    };
    let spec = load_quantizer(io, a.quantizer.as_deref())?;
    let cfg = AdcConfig {
        comparator_residual_offset: a.comparator_offset,
        ..AdcConfig::default()
    };
    let cond = Conditions {
        temperature: a.conditions.temp,
        noise_sigma: a.conditions.noise_sigma,
        noise_seed: a.conditions.noise_seed,
    };
    let challenges: Vec<Challenge> = Challenge::all().collect();
    let ds = generate(&chips, &a.model.build(), &spec, &cfg, &challenges, &cond)?;
    let mut bytes = Vec::new();
    if is_jsonl(&a.out) {
        ds.write_jsonl(&mut bytes)?;
    } else {
        ds.write_csv(&mut bytes)?;
    }
    io.write(&a.out, &bytes)?;
    Ok(a.out.clone())
}

fn metrics(a: &MetricsArgs, io: &mut Io) -> Result<PathBuf> {
    let ds = load_crps(io, &a.crps)?;
    let mut report = MetricsReport::from_dataset(&ds)?;
    if let Some(dir) = &a.chips_dir {
        ensure!(!a.temps.is_empty(), "--temps needs at least one temperature");
        let chips = load_chips(io, dir)?;
        let model = a.model.build();
        let spec = load_quantizer(io, a.quantizer.as_deref())?;
        let cfg = AdcConfig::default();
        let tests: Vec<Conditions> = a
            .temps
            .iter()
            .map(|&temperature| Conditions {
                temperature,
                noise_sigma: a.noise_sigma,
                noise_seed: a.noise_seed,
            })
            .collect();
        for id in ds.chip_ids() {
            let chip = chips
                .iter()
                .find(|c| c.chip_id() == id)
                .with_context(|| format!("chip {id} not found in {}", dir.display()))?;
            report.reliability.push(ChipFraction {
                chip_id: id.to_string(),
                value: reliability(chip, &model, &spec, &cfg, &Conditions::reference(), &tests)?,
            });
        }
    }
    println!("uniqueness {:.4} (code field {:.4})", report.uniqueness, report.uniqueness_code_field);
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    io.write(&a.out, text.as_bytes())?;
    Ok(a.out.clone())
}

fn attack(a: &AttackArgs, io: &mut Io) -> Result<PathBuf> {
    let ds = load_crps(io, &a.crps)?;
    let id = match &a.chip {
        Some(id) => id.clone(),
        None => ds.chip_ids()[0].to_string(),
    };
    let ds = ds.for_chip(&id)?;
    let (train, test) = split(&ds, a.train_frac, a.seed)?;
    let report: AttackReport = match a.model {
        AttackModel::Lr => {
            let hyper = LrHyper {
                learning_rate: a.learning_rate,
                l2: a.l2,
                epochs: a.epochs,
                seed: a.seed,
            };
            let model = lr_train(&train, a.encoding.into(), &hyper)?;
            attack_report(&train, &test, &model)?
        }
        AttackModel::Es => {
            let hyper = EsHyper {
                parents: a.parents,
                offspring: a.offspring,
                generations: a.generations,
                seed: a.seed,
                ..EsHyper::default()
            };
            let spec = load_quantizer(io, a.quantizer.as_deref())?;
            let clone = es_fit(&train, &a.pipeline.build(), &spec, &AdcConfig::default(), &hyper)?;
            attack_report(&train, &test, &clone)?
        }
    };
    println!("{id}: {}", report.summary());
    let mut bytes = Vec::new();
    report.write_csv(&mut bytes)?;
    io.write(&a.out, &bytes)?;
    Ok(a.out.clone())
}

#[derive(Serialize)]
struct EnergyRow {
    name: &'static str,
    power_w: f64,
    freq_hz: f64,
    computed_pj: f64,
    reported_pj: f64,
    relative_error: f64,
    inconsistent: bool,
}

fn energy(a: &EnergyArgs, io: &mut Io) -> Result<PathBuf> {
    let rows: Vec<EnergyRow> = comparison_table()
        .into_iter()
        .map(|c| EnergyRow {
            name: c.name,
            power_w: c.power,
            freq_hz: c.freq,
            computed_pj: c.computed * 1e12,
            reported_pj: c.reported * 1e12,
            relative_error: c.relative_error,
            inconsistent: c.inconsistent,
        })
        .collect();
    for r in &rows {
        let flag = if r.inconsistent { "  INCONSISTENT with reported value" } else { "" };
        println!("{:<16} {:>12.6} pJ (reported {:.4} pJ){flag}", r.name, r.computed_pj, r.reported_pj);
    }
    io.write(&a.out, &csv_bytes(rows)?)?;
    Ok(a.out.clone())
}

#[derive(Serialize)]
struct CurvePoint {
    delta_v: f64,
    v_out: f64,
}

fn curve(a: &CurveArgs, io: &mut Io) -> Result<PathBuf> {
    let model = a.model.build();
    model.validate()?;
    let points = model.transfer_curve((a.from, a.to), a.points)?;
    io.write(
        &a.out,
        &csv_bytes(points.into_iter().map(|(delta_v, v_out)| CurvePoint { delta_v, v_out }))?,
    )?;
    Ok(a.out.clone())
}
