//! Named regime presets. The multiscale-analysis bootstrap is not among them.

use fracmom_core::criterion::ConsistencyReport;
use fracmom_core::moments::Workers;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::config::{apply_seed_override, ExperimentConfig, Stage};
use crate::error::{CliError, Result};
use crate::runner::{CorrelatorPayload, DecayPayload, IdsPayload, Run};

pub const PRESET_NAMES: [&str; 3] = ["band-edge", "large-disorder-1d", "large-disorder-2d"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresetStage {
    Decay,
    Criterion,
    Correlator,
    Ids,
}

impl PresetStage {
    fn stage(self) -> Stage {
        match self {
            PresetStage::Decay => Stage::Decay,
            PresetStage::Criterion => Stage::Criterion,
            PresetStage::Correlator => Stage::Correlator,
            PresetStage::Ids => Stage::Ids,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetFile {
    pub name: String,
    pub description: String,
    pub stages: Vec<PresetStage>,
    pub config: ExperimentConfig,
}

pub fn preset_source(name: &str) -> Option<&'static str> {
    match name {
        "band-edge" => Some(include_str!("../presets/band-edge.json")),
        "large-disorder-1d" => Some(include_str!("../presets/large-disorder-1d.json")),
        "large-disorder-2d" => Some(include_str!("../presets/large-disorder-2d.json")),
        _ => None,
    }
}

pub fn load_preset(name: &str) -> Result<PresetFile> {
    let text = preset_source(name).ok_or_else(|| CliError::UnknownPreset(name.to_string()))?;
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| CliError::Schema {
        path: e.path().to_string(),
        message: e.into_inner().to_string(),
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PresetOutcome {
    pub decay: Vec<DecayPayload>,
    pub consistency: Vec<ConsistencyReport<f64>>,
    pub correlator: Option<CorrelatorPayload>,
    pub ids: Vec<IdsPayload>,
    pub notes: Vec<String>,
}

/// Runs every stage of the preset in one experiment directory. All stages are
/// checked before the first one starts.
pub fn run_preset(preset: &PresetFile, workers: Workers, out: Option<&Path>) -> Result<PresetOutcome> {
    let mut cfg = preset.config.clone();
    apply_seed_override(&mut cfg)?;
    for s in &preset.stages {
        crate::config::check(&cfg, s.stage())?;
    }
    let mut run = Run::new(cfg, workers, out)?;
    let mut outcome = PresetOutcome::default();
    let result = run_stages(preset, &mut run, &mut outcome);
    let tables = run.finish();
    result.and(tables).map(|_| outcome)
}

fn run_stages(preset: &PresetFile, run: &mut Run, outcome: &mut PresetOutcome) -> Result<()> {
    for stage in &preset.stages {
        match stage {
            PresetStage::Decay => outcome.decay = run.decay()?,
            PresetStage::Ids => outcome.ids = run.ids()?,
            PresetStage::Criterion => {
                let threshold_missed = outcome.ids.first().and_then(|p| p.small) == Some(false);
                if threshold_missed {
                    outcome
                        .notes
                        .push("density of states near the target energy is not small; criterion skipped".into());
                    continue;
                }
                outcome.consistency = run.criterion()?;
                if outcome.consistency.is_empty() {
                    outcome
                        .notes
                        .push("criterion factor >= 1 for every scanned L; consistency fit not run".into());
                }
            }
            PresetStage::Correlator => {
                let mu = outcome.decay.first().map(|d| d.fit.mu);
                outcome.correlator = Some(run.correlator(mu)?);
            }
        }
    }
    Ok(())
}
