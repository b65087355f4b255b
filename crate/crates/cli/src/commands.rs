//! Subcommand implementations.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use spkver::corpus::{load_manifest, synthesize_corpus, ManifestSource, SynthSpec};
use spkver::eval::{
    collect_cell, compute_thresholds, evaluate_fixed_cell, run_protocol, write_protocol_output,
    write_results_csv, Condition, ConditionPair, FrameSource, ModelDirectory, ModelProvider, ProtocolConfig,
    ProtocolOutput, Role, Skipped, ThresholdFile, TrainingModels,
};
use spkver::features::{apply_chain, ParamChain};
use spkver::model::{train_covariance, write_model, SpeakerModel};
use spkver::pipeline::FrontendConfig;

use crate::config::{RunConfig, CONFIG_ECHO};

pub const THRESHOLD_EXTENSION: &str = "thr";

/// Creates the output directory, refusing to write into a non-empty one
/// unless `force` is set, and echoes the resolved config into it.
pub fn prepare_output(cfg: &RunConfig) -> Result<()> {
    let out = &cfg.out;
    if out.exists() {
        let non_empty = std::fs::read_dir(out)
            .with_context(|| format!("reading output directory {}", out.display()))?
            .next()
            .is_some();
        if non_empty && !cfg.force {
            bail!("output directory {} is not empty (use --force to write into it)", out.display());
        }
    }
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    std::fs::write(out.join(CONFIG_ECHO), cfg.render_echo()?)?;
    Ok(())
}

fn frontend(cfg: &RunConfig) -> FrontendConfig {
    FrontendConfig {
        order: cfg.order,
        ..FrontendConfig::default()
    }
}

fn protocol_config(cfg: &RunConfig, chains: Vec<ParamChain>) -> ProtocolConfig {
    ProtocolConfig {
        chains,
        cohort_mode: cfg.cohort_mode,
        cohort_size: cfg.cohorts,
        likelihood_scale: cfg.likelihood_scale,
        grid_size: cfg.grid,
        ..ProtocolConfig::default()
    }
}

fn manifest_source(cfg: &RunConfig) -> Result<ManifestSource> {
    let Some(path) = &cfg.manifest else {
        bail!("no manifest: pass --manifest or set `manifest` in the config file");
    };
    let manifest = load_manifest(path)?;
    Ok(ManifestSource::new(manifest, frontend(cfg)))
}

pub fn synth(cfg: &RunConfig, spec: SynthSpec) -> Result<()> {
    let spec = SynthSpec { seed: cfg.seed, ..spec };
    spec.validate()?;
    prepare_output(cfg)?;
    let manifest = synthesize_corpus(&spec, &cfg.out)?;
    println!(
        "wrote {} utterances for {} speakers to {}",
        manifest.records.len(),
        spec.n_speakers,
        cfg.out.display()
    );
    Ok(())
}

/// Writes one feature CSV per (utterance, chain) under `features/<chain>/`.
pub fn extract(cfg: &RunConfig, roles: &[Role]) -> Result<()> {
    let source = manifest_source(cfg)?;
    prepare_output(cfg)?;
    let records: Vec<_> = source
        .manifest()
        .records
        .iter()
        .filter(|r| roles.is_empty() || roles.contains(&r.role))
        .collect();
    for chain in &cfg.chains {
        let dir = cfg.out.join("features").join(chain.file_stem());
        std::fs::create_dir_all(&dir)?;
        for r in &records {
            let analysis = source
                .analysis(&r.utterance_id)
                .with_context(|| format!("utterance {}", r.utterance_id))?;
            let f = apply_chain(&analysis.frames, chain).with_context(|| format!("utterance {}", r.utterance_id))?;
            let mut w = std::io::BufWriter::new(File::create(dir.join(format!("{}.csv", r.utterance_id)))?);
            let header: Vec<String> = (0..f.dim()).map(|i| format!("c{}", chain.drop_first + i + 1)).collect();
            writeln!(w, "{}", header.join(","))?;
            for row in f.matrix().row_iter() {
                let vals: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                writeln!(w, "{}", vals.join(","))?;
            }
        }
        println!("{}: {} feature files in {}", chain, records.len(), dir.display());
    }
    Ok(())
}

/// Trains one model file per (speaker, train condition, chain) into
/// `<out>/models/`.
pub fn train(cfg: &RunConfig, conditions: &[Condition]) -> Result<()> {
    let source = manifest_source(cfg)?;
    let conditions: Vec<Condition> = if conditions.is_empty() {
        source.conditions(Role::Train)
    } else {
        conditions.to_vec()
    };
    if conditions.is_empty() {
        bail!("manifest has no training utterances");
    }
    prepare_output(cfg)?;
    let dir = cfg.out.join("models");
    std::fs::create_dir_all(&dir)?;
    let store = ModelDirectory { dir };
    let trainer = TrainingModels {
        source: &source,
        min_train_seconds: cfg.min_train_seconds,
    };
    let mut summary = csv_writer(&cfg.out.join("train_summary.csv"))?;
    writeln!(summary, "speaker_id,condition,chain,frames,regularized,file")?;
    let mut count = 0;
    for cond in &conditions {
        for speaker in source.speakers() {
            for chain in &cfg.chains {
                let context = || format!("training speaker {speaker} under {cond} with {chain}");
                let Some(features) = trainer.train_features(&speaker, cond, chain).with_context(context)? else {
                    continue;
                };
                let model = train_covariance(&features, &speaker).with_context(context)?;
                let path = store.path(&speaker, cond, chain);
                write_model(&path, &model).with_context(context)?;
                let name = path.file_name().unwrap().to_string_lossy();
                println!(
                    "{speaker} {cond} {chain}: {} frames{}",
                    model.n_frames,
                    if model.regularized { ", regularized" } else { "" }
                );
                writeln!(
                    summary,
                    "{speaker},{cond},{chain},{},{},{name}",
                    model.n_frames, model.regularized
                )?;
                count += 1;
            }
        }
    }
    if count == 0 {
        bail!("no speaker has training data under the requested conditions");
    }
    println!("wrote {count} models to {}", store.dir.display());
    Ok(())
}

fn csv_writer(path: &Path) -> Result<std::io::BufWriter<File>> {
    Ok(std::io::BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

/// Stored model files, or models trained on demand from the manifest.
enum Models<'a> {
    Stored(ModelDirectory),
    Trained(TrainingModels<'a, ManifestSource>),
}

impl<'a> Models<'a> {
    fn new(cfg: &RunConfig, source: &'a ManifestSource, dir: Option<&Path>) -> Self {
        match dir {
            Some(dir) => Models::Stored(ModelDirectory { dir: dir.to_path_buf() }),
            None => Models::Trained(TrainingModels {
                source,
                min_train_seconds: cfg.min_train_seconds,
            }),
        }
    }
}

impl ModelProvider for Models<'_> {
    fn model(&self, speaker: &str, condition: &Condition, chain: &ParamChain) -> spkver::Result<Option<SpeakerModel>> {
        match self {
            Models::Stored(m) => m.model(speaker, condition, chain),
            Models::Trained(m) => m.model(speaker, condition, chain),
        }
    }
}

fn require_protocol(cfg: &RunConfig) -> Result<()> {
    if cfg.protocol.is_empty() {
        bail!("no protocol: pass --protocol (e.g. \"M1M1,M1M3\" with --base S4c, or \"S4cM1S2cM2\")");
    }
    Ok(())
}

/// Fixes per-speaker thresholds (and cohorts) on each protocol pair and
/// writes one threshold file per (pair, chain, cohort setting).
pub fn thresholds(cfg: &RunConfig, models: Option<&Path>) -> Result<()> {
    require_protocol(cfg)?;
    let source = manifest_source(cfg)?;
    prepare_output(cfg)?;
    let dir = cfg.out.join("thresholds");
    std::fs::create_dir_all(&dir)?;
    let pcfg = protocol_config(cfg, cfg.chains.clone());
    let models = Models::new(cfg, &source, models);
    for pair in &cfg.protocol {
        for chain in &cfg.chains {
            let cell = collect_cell(&source, &models, *pair, chain, &pcfg)
                .with_context(|| format!("fixing thresholds on {pair} with {chain}"))?;
            for &cohort in cfg.cohort_mode.settings() {
                let file = compute_thresholds(&cell, cohort, &pcfg)?;
                let path = dir.join(threshold_file_name(pair, chain, cohort));
                std::fs::write(&path, file.render())?;
                println!("{pair} {chain} cohort {}: {}", on_off(cohort), path.display());
            }
        }
    }
    Ok(())
}

pub fn threshold_file_name(pair: &ConditionPair, chain: &ParamChain, cohort: bool) -> String {
    format!("{pair}__{}__cohort-{}.{THRESHOLD_EXTENSION}", chain.file_stem(), on_off(cohort))
}

fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

/// Threshold files named directly or found (sorted) inside directories.
pub fn collect_threshold_files(paths: &[PathBuf]) -> Result<Vec<(PathBuf, ThresholdFile)>> {
    let mut files = BTreeSet::new();
    for p in paths {
        if p.is_dir() {
            for entry in std::fs::read_dir(p).with_context(|| format!("reading {}", p.display()))? {
                let path = entry?.path();
                if path.extension().is_some_and(|e| e == THRESHOLD_EXTENSION) {
                    files.insert(path);
                }
            }
        } else {
            files.insert(p.clone());
        }
    }
    if files.is_empty() {
        bail!("no threshold files found");
    }
    files
        .into_iter()
        .map(|path| {
            let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let file = ThresholdFile::parse(&text).with_context(|| format!("parsing {}", path.display()))?;
            Ok((path, file))
        })
        .collect()
}

/// Runs the protocol: dev EER and test HTER per cell, or, with fixed
/// thresholds, test HTER under thresholds fixed elsewhere.
pub fn evaluate(cfg: &RunConfig, models: Option<&Path>, fixed: &[PathBuf]) -> Result<()> {
    require_protocol(cfg)?;
    let source = manifest_source(cfg)?;
    let fixed = if fixed.is_empty() {
        Vec::new()
    } else {
        collect_threshold_files(fixed)?
    };
    prepare_output(cfg)?;
    let models = Models::new(cfg, &source, models);
    let out = if fixed.is_empty() {
        run_protocol(&source, &models, &cfg.protocol, &protocol_config(cfg, cfg.chains.clone()))
    } else {
        evaluate_fixed(cfg, &source, &models, &fixed)?
    };
    finish(cfg, &out)
}

fn evaluate_fixed<S: FrameSource, M: ModelProvider>(
    cfg: &RunConfig,
    source: &S,
    models: &M,
    fixed: &[(PathBuf, ThresholdFile)],
) -> Result<ProtocolOutput> {
    let mut out = ProtocolOutput::default();
    for pair in &cfg.protocol {
        for (path, file) in fixed {
            if file.fix_pair.train != pair.train {
                continue;
            }
            let chain: ParamChain = file.chain.parse()?;
            let pcfg = protocol_config(cfg, vec![chain.clone()]);
            match collect_cell(source, models, *pair, &chain, &pcfg).and_then(|cell| evaluate_fixed_cell(&cell, file)) {
                Ok(row) => out.rows.push(row),
                Err(e) => {
                    log::warn!("skipping {pair} with {}: {e}", path.display());
                    out.skipped.push(Skipped {
                        pair: *pair,
                        chain: chain.to_string(),
                        reason: e.to_string(),
                    });
                }
            }
        }
    }
    if out.rows.is_empty() && out.skipped.is_empty() {
        bail!("no threshold file matches the training condition of any protocol pair");
    }
    Ok(out)
}

/// Sweeps every standard chain over the protocol.
pub fn sweep(cfg: &RunConfig, models: Option<&Path>) -> Result<()> {
    let cfg = RunConfig {
        chains: ParamChain::standard_chains(),
        ..cfg.clone()
    };
    evaluate(&cfg, models, &[])
}

fn finish(cfg: &RunConfig, out: &ProtocolOutput) -> Result<()> {
    write_protocol_output(&cfg.out, out)?;
    write_results_csv(std::io::stdout().lock(), &out.rows)?;
    if !out.skipped.is_empty() {
        log::warn!("{} cell(s) skipped; see skipped.csv", out.skipped.len());
    }
    Ok(())
}
