//! Subcommand implementations shared by the binary and the tests.

use std::path::{Path, PathBuf};

use morsedyn_core::systems::AnalyticSystem;

use crate::config::LoadedConfig;
use crate::error::{CliError, CliResult};
use crate::formats::{self, MorseFile};
use crate::run::{self, Analysis, Artifacts, Source, TrainOutput};

/// Overrides taken from the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

pub fn load(config: Option<&Path>, overrides: &Overrides) -> CliResult<LoadedConfig> {
    let mut loaded = match config {
        Some(p) => LoadedConfig::load(p)?,
        None => LoadedConfig::defaults(),
    };
    if let Some(seed) = overrides.seed {
        loaded.config.ensemble.base_seed = seed;
    }
    if let Some(out) = &overrides.out {
        loaded.config.output.directory = out.clone();
    }
    Ok(loaded)
}

pub fn validate_config(config: &Path, overrides: &Overrides) -> CliResult<String> {
    let loaded = load(Some(config), overrides)?;
    loaded.config.validate()?;
    Ok(loaded.config.resolved_json())
}

pub fn train(config: &Path, overrides: &Overrides) -> CliResult<(TrainOutput, Artifacts)> {
    let loaded = load(Some(config), overrides)?;
    let out = run::with_threads(overrides.threads, || run::train(&loaded))??;
    let artifacts = run::train_artifacts(&loaded.config, &out);
    artifacts.write(&loaded.config.output.directory)?;
    Ok((out, artifacts))
}

/// Input of the analyze command.
#[derive(Debug, Clone)]
pub enum AnalyzeInput {
    Records(PathBuf),
    Pairs(PathBuf),
    System(String),
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::read(path, e))
}

pub fn analyze(
    config: Option<&Path>,
    input: &AnalyzeInput,
    overrides: &Overrides,
) -> CliResult<(Analysis, Artifacts)> {
    let loaded = load(config, overrides)?;
    loaded.config.validate()?;
    let source = match input {
        AnalyzeInput::Records(p) => Source::Records(formats::parse_records(&read(p)?)?),
        AnalyzeInput::Pairs(p) => Source::Pairs(formats::parse_pairs(p)?),
        AnalyzeInput::System(name) => Source::System(AnalyticSystem::from_name(name).ok_or_else(|| {
            CliError::Validation(format!(
                "unknown system {name:?} (expected contraction, double-well or saddle)"
            ))
        })?),
    };
    let cfg = &loaded.config;
    let analysis = run::with_threads(overrides.threads, || run::analyze(cfg, source))??;
    let artifacts = run::analysis_artifacts(cfg, &analysis)?;
    artifacts.write(&cfg.output.directory)?;
    truncation(&analysis)?;
    Ok((analysis, artifacts))
}

fn truncation(a: &Analysis) -> CliResult<()> {
    if a.result.truncated {
        return Err(CliError::Truncated(format!(
            "leaf cap reached: refinement stopped at {} leaves (depth {}); outputs describe the last completed level",
            a.result.grid.len(),
            a.result.grid.max_depth()
        )));
    }
    Ok(())
}

/// Train, then analyze the records exactly as `analyze --records` would read them.
pub fn pipeline(config: &Path, overrides: &Overrides) -> CliResult<(Analysis, Artifacts)> {
    let loaded = load(Some(config), overrides)?;
    let cfg = &loaded.config;
    let (train_out, analysis) = run::with_threads(overrides.threads, || -> CliResult<_> {
        let t = run::train(&loaded)?;
        let text = formats::records_jsonl(&t.records);
        let records = formats::parse_records(&text)?;
        let a = run::analyze(cfg, Source::Records(records))?;
        Ok((t, a))
    })??;
    let mut artifacts = run::train_artifacts(cfg, &train_out);
    artifacts.extend(run::analysis_artifacts(cfg, &analysis)?);
    // Both stages echo the same config; keep one copy.
    let mut seen = std::collections::BTreeSet::new();
    artifacts.files.retain(|(n, _)| seen.insert(n.clone()));
    artifacts.write(&cfg.output.directory)?;
    truncation(&analysis)?;
    Ok((analysis, artifacts))
}

pub fn export(path: &Path, format: &str) -> CliResult<String> {
    let file = MorseFile::parse(&read(path)?)?;
    match format {
        "json" => Ok(file.to_json()),
        "dot" => file.to_dot(),
        "csv" => Ok(file.basins_csv()),
        other => Err(CliError::Validation(format!(
            "unknown format {other:?} (expected dot, json or csv)"
        ))),
    }
}
