//! Experiment configuration: one JSON file per experiment.

use fracmom_core::criterion::{BoundaryLayer, DistanceLadder, MomentPrefactor};
use fracmom_core::model::{
    assemble_h0, ground_energy, BackgroundFields, BumpShape, CouplingDensity, DisorderLaw, GridSpec, ModelEnsemble,
    SingleSiteProfile,
};
use fracmom_core::moments::{EpsilonSchedule, DEFAULT_STABILITY_TOLERANCE};
use fracmom_core::resolvent::{IndicatorSet, SolverMethod, SolverOptions, DEFAULT_LAYER_DEPTH};
use fracmom_core::validation::DEFAULT_ETA_POINTS;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

use crate::error::{CliError, Result};

pub const SEED_ENV: &str = "FRACMOM_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment_id: String,
    /// Master seed; overridden by `FRACMOM_SEED`.
    #[serde(default)]
    pub seed: u64,
    pub model: ModelConfig,
    pub run: RunConfig,
    #[serde(default)]
    pub constants: ConstantsConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub grid: GridConfig,
    #[serde(default)]
    pub background: BackgroundConfig,
    pub profile: ProfileConfig,
    pub law: LawConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Box side lengths; the box is `[0, extents[0]] x ...`.
    pub extents: Vec<f64>,
    pub spacing: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct BackgroundConfig {
    /// Constant electric potential `V0`.
    #[serde(default)]
    pub potential: f64,
    /// Uniform magnetic field strength (d >= 2), symmetric gauge about the box centre.
    #[serde(default)]
    pub magnetic_field: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeConfig {
    #[default]
    Indicator,
    CosineBump,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    pub radius: f64,
    #[serde(default)]
    pub shape: ShapeConfig,
    #[serde(default = "one")]
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum DensityConfig {
    #[default]
    Uniform,
    /// Piecewise-linear density through equally spaced nodes on `[0, 1]`.
    Tabulated(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct LawConfig {
    pub lambda: f64,
    #[serde(default)]
    pub density: DensityConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum EnergyReference {
    #[default]
    Absolute,
    /// Energies are offsets from the ground energy `E0` of the background operator.
    Ground,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Fractional exponents.
    pub s: Vec<f64>,
    #[serde(default = "default_energies")]
    pub energies: Vec<f64>,
    #[serde(default)]
    pub energy_reference: EnergyReference,
    #[serde(default)]
    pub eps: EpsConfig,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub pairs: Vec<PairConfig>,
    #[serde(default)]
    pub ladder: Option<LadderConfig>,
    #[serde(default)]
    pub criterion: Option<CriterionConfig>,
    #[serde(default)]
    pub window: Option<WindowConfig>,
    #[serde(default)]
    pub ids: Option<IdsConfig>,
    #[serde(default)]
    pub holder: Option<HolderConfig>,
    #[serde(default)]
    pub validation: ValidationConfig,
    #[serde(default)]
    pub solver: SolverConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct EpsConfig {
    /// Explicit strictly decreasing schedule; overrides the geometric one.
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    #[serde(default = "default_eps_start")]
    pub start: f64,
    #[serde(default = "default_eps_ratio")]
    pub ratio: f64,
    #[serde(default = "default_eps_count")]
    pub count: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

impl Default for EpsConfig {
    fn default() -> Self {
        Self {
            values: None,
            start: default_eps_start(),
            ratio: default_eps_ratio(),
            count: default_eps_count(),
            tolerance: default_tolerance(),
        }
    }
}

/// Source ball `x` and target ball `y`, both of radius `radius`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct PairConfig {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct LadderConfig {
    pub source: Vec<f64>,
    /// Target offsets along the first axis.
    pub offsets: Vec<f64>,
    pub radius: f64,
    /// Weight the log fit by the relative standard errors.
    #[serde(default)]
    pub weighted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct CriterionConfig {
    /// Ball radii to scan.
    #[serde(rename = "L")]
    pub l: Vec<f64>,
    /// Bump radius; defaults to the profile radius.
    #[serde(default)]
    pub r: Option<f64>,
    /// Ball centres; defaults to the box centre.
    #[serde(default)]
    pub alphas: Option<Vec<Vec<f64>>>,
    /// Run each `L` in its own box `[0, 2L]^d` centred on the ball instead of the model box.
    #[serde(default)]
    pub per_scale_box: bool,
    /// After a satisfied criterion, fit the decay along `run.ladder` in the model box.
    #[serde(default = "yes")]
    pub consistency: bool,
    #[serde(default = "default_r2")]
    pub r2_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub a: f64,
    pub b: f64,
    #[serde(default)]
    pub reference: EnergyReference,
    /// Realizations whose window eigenfunctions get individual decay fits.
    #[serde(default = "default_decay_samples")]
    pub decay_samples: usize,
    /// Correlator ladder offsets from `run.ladder.source`; defaults to the ladder's own.
    #[serde(default)]
    pub offsets: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct IdsConfig {
    pub energies: Vec<f64>,
    #[serde(default)]
    pub reference: EnergyReference,
    /// IDS value below which the density of states counts as small.
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default)]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct HolderConfig {
    pub eps0: f64,
    pub spacing: f64,
    #[serde(default = "default_side")]
    pub side: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ValidationConfig {
    #[serde(default = "default_oracle_configs")]
    pub oracle_configs: usize,
    #[serde(default = "default_oracle_points")]
    pub max_points: usize,
    #[serde(default = "default_weak11_pairs")]
    pub weak11_pairs: usize,
    #[serde(default = "default_weak11_dim")]
    pub weak11_dim: usize,
    #[serde(default = "default_eta_points")]
    pub eta_points: usize,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            oracle_configs: default_oracle_configs(),
            max_points: default_oracle_points(),
            weak11_pairs: default_weak11_pairs(),
            weak11_dim: default_weak11_dim(),
            eta_points: default_eta_points(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum MethodConfig {
    #[default]
    Auto,
    Direct,
    Iterative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_solver_tol")]
    pub tol: f64,
    #[serde(default)]
    pub method: MethodConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: default_solver_tol(),
            method: MethodConfig::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ConstantsConfig {
    #[serde(rename = "C_const", default = "one")]
    pub c_const: f64,
    #[serde(rename = "M_const", default = "one")]
    pub m_const: f64,
    /// Use this value for the whole prefactor `M` instead of `M_const (1 + λ)^{5s(d+4)} / (1 - 3s)`.
    #[serde(rename = "M_explicit", default)]
    pub m_explicit: Option<f64>,
    /// Boundary-layer depth in units of the bump radius.
    #[serde(default = "default_layer_depth")]
    pub layer_depth: f64,
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        Self {
            c_const: 1.0,
            m_const: 1.0,
            m_explicit: None,
            layer_depth: DEFAULT_LAYER_DEPTH,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: String,
    #[serde(default = "yes")]
    pub csv: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_out_dir(),
            csv: true,
        }
    }
}

fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_energies() -> Vec<f64> {
    vec![0.0]
}
fn default_samples() -> usize {
    100
}
fn default_eps_start() -> f64 {
    1e-2
}
fn default_eps_ratio() -> f64 {
    0.1
}
fn default_eps_count() -> usize {
    4
}
fn default_tolerance() -> f64 {
    DEFAULT_STABILITY_TOLERANCE
}
fn default_r2() -> f64 {
    0.8
}
fn default_decay_samples() -> usize {
    10
}
fn default_side() -> usize {
    5
}
fn default_oracle_configs() -> usize {
    50
}
fn default_oracle_points() -> usize {
    500
}
fn default_weak11_pairs() -> usize {
    20
}
fn default_weak11_dim() -> usize {
    5
}
fn default_eta_points() -> usize {
    DEFAULT_ETA_POINTS
}
fn default_solver_tol() -> f64 {
    1e-10
}
fn default_layer_depth() -> f64 {
    DEFAULT_LAYER_DEPTH
}
fn default_out_dir() -> String {
    "out".into()
}

/// Parses a config, reporting the field path of the first violation.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Schema {
            path,
            message: e.into_inner().to_string(),
        }
    })
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

/// `FRACMOM_SEED` wins over the seed in the file.
pub fn apply_seed_override(cfg: &mut ExperimentConfig) -> Result<()> {
    if let Ok(v) = std::env::var(SEED_ENV) {
        cfg.seed = v
            .trim()
            .parse()
            .map_err(|_| CliError::Invalid(format!("{SEED_ENV}={v} is not an unsigned integer")))?;
    }
    Ok(())
}

pub fn json_schema() -> serde_json::Value {
    serde_json::to_value(schemars::schema_for!(ExperimentConfig)).expect("schema serializes")
}

const VALIDATION_DEFAULT: &str = r#"{
    "experiment_id": "validate",
    "model": {
        "grid": { "extents": [16.0], "spacing": 0.5 },
        "profile": { "radius": 1.0 },
        "law": { "lambda": 1.0 }
    },
    "run": { "s": [0.5] }
}"#;

impl ExperimentConfig {
    /// Config used by `validate` when no file is given.
    pub fn validation_default() -> Self {
        parse_config(VALIDATION_DEFAULT).expect("built-in config parses")
    }

    /// SHA-256 of the canonical serialization of the effective config.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn dim(&self) -> usize {
        self.model.grid.extents.len()
    }

    pub fn grid(&self) -> Result<GridSpec<f64>> {
        Ok(GridSpec::new(self.model.grid.extents.clone(), self.model.grid.spacing)?)
    }

    pub fn background(&self) -> BackgroundFields<f64> {
        background_for(&self.model.background, &self.model.grid.extents)
    }

    pub fn profile(&self) -> Result<SingleSiteProfile<f64>> {
        let shape = match self.model.profile.shape {
            ShapeConfig::Indicator => BumpShape::Indicator,
            ShapeConfig::CosineBump => BumpShape::CosineBump,
        };
        Ok(SingleSiteProfile::new(self.model.profile.radius, shape, self.model.profile.amplitude)?)
    }

    pub fn density(&self) -> Result<CouplingDensity<f64>> {
        Ok(match &self.model.law.density {
            DensityConfig::Uniform => CouplingDensity::Uniform,
            DensityConfig::Tabulated(v) => CouplingDensity::tabulated(v.clone())?,
        })
    }

    /// The model ensemble on the configured box.
    pub fn ensemble(&self) -> Result<ModelEnsemble<f64>> {
        self.ensemble_on(&self.model.grid.extents)
    }

    /// Same model on the box `[0, extents]`.
    pub fn ensemble_on(&self, extents: &[f64]) -> Result<ModelEnsemble<f64>> {
        let grid = GridSpec::new(extents.to_vec(), self.model.grid.spacing)?;
        let law = DisorderLaw::new(self.model.law.lambda, self.density()?, grid.site_lattice())?;
        let bg = background_for(&self.model.background, extents);
        Ok(ModelEnsemble::new(grid, &bg, self.profile()?, law)?)
    }

    /// Ground energy of the background operator on the model box.
    pub fn ground_energy(&self) -> Result<f64> {
        let h0 = assemble_h0(&self.grid()?, &self.background())?;
        Ok(ground_energy(&h0)?)
    }

    pub fn resolve_energy(&self, value: f64, reference: EnergyReference, e0: f64) -> f64 {
        match reference {
            EnergyReference::Absolute => value,
            EnergyReference::Ground => e0 + value,
        }
    }

    pub fn energies(&self, e0: f64) -> Vec<f64> {
        self.run
            .energies
            .iter()
            .map(|&e| self.resolve_energy(e, self.run.energy_reference, e0))
            .collect()
    }

    pub fn schedule(&self) -> Result<EpsilonSchedule<f64>> {
        let eps = &self.run.eps;
        Ok(match &eps.values {
            Some(v) => EpsilonSchedule::new(v.clone(), eps.tolerance)?,
            None => EpsilonSchedule::new(
                EpsilonSchedule::geometric(eps.start, eps.ratio, eps.count)?.values().to_vec(),
                eps.tolerance,
            )?,
        })
    }

    pub fn solver(&self) -> SolverOptions<f64> {
        SolverOptions {
            tol: self.run.solver.tol,
            method: match self.run.solver.method {
                MethodConfig::Auto => SolverMethod::Auto,
                MethodConfig::Direct => SolverMethod::Direct,
                MethodConfig::Iterative => SolverMethod::Iterative,
            },
            ..SolverOptions::default()
        }
    }

    pub fn prefactor(&self) -> MomentPrefactor<f64> {
        match self.constants.m_explicit {
            Some(value) => MomentPrefactor::Explicit { value },
            None => MomentPrefactor::Formula {
                m_const: self.constants.m_const,
            },
        }
    }

    pub fn bump_radius(&self) -> f64 {
        self.run
            .criterion
            .as_ref()
            .and_then(|c| c.r)
            .unwrap_or(self.model.profile.radius)
    }

    pub fn layer(&self, l: f64) -> Result<BoundaryLayer<f64>> {
        let r = self.bump_radius();
        Ok(BoundaryLayer::with_depth(l, r, self.constants.layer_depth * r)?)
    }

    pub fn ladder(&self) -> Option<DistanceLadder<f64>> {
        self.run
            .ladder
            .as_ref()
            .map(|l| DistanceLadder::along_first_axis(l.source.clone(), &l.offsets, l.radius))
    }

    /// Ladder for the eigenfunction correlator.
    pub fn correlator_ladder(&self) -> Option<DistanceLadder<f64>> {
        let l = self.run.ladder.as_ref()?;
        let offsets = self.run.window.as_ref().and_then(|w| w.offsets.clone()).unwrap_or_else(|| l.offsets.clone());
        Some(DistanceLadder::along_first_axis(l.source.clone(), &offsets, l.radius))
    }

    /// Indicator sets of each configured pair.
    pub fn pair_sets(&self, grid: &GridSpec<f64>) -> Vec<(IndicatorSet<f64>, IndicatorSet<f64>)> {
        self.run
            .pairs
            .iter()
            .map(|p| (IndicatorSet::ball(grid, &p.x, p.radius), IndicatorSet::ball(grid, &p.y, p.radius)))
            .collect()
    }

    /// Ball centres for the criterion at radius `l`, and the box they live in.
    pub fn criterion_geometry(&self, l: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
        let d = self.dim();
        let crit = self.run.criterion.as_ref();
        if crit.is_some_and(|c| c.per_scale_box) {
            return (vec![2.0 * l; d], vec![vec![l; d]]);
        }
        let extents = self.model.grid.extents.clone();
        let alphas = crit
            .and_then(|c| c.alphas.clone())
            .unwrap_or_else(|| vec![extents.iter().map(|e| e / 2.0).collect()]);
        (extents, alphas)
    }
}

fn background_for(cfg: &BackgroundConfig, extents: &[f64]) -> BackgroundFields<f64> {
    let mut bg = BackgroundFields::free();
    if cfg.potential != 0.0 {
        bg = bg.constant_potential(cfg.potential);
    }
    if let Some(b) = cfg.magnetic_field {
        bg = bg.uniform_magnetic_field(b, extents.iter().map(|e| e / 2.0).collect());
    }
    bg
}

fn ball_fits(extents: &[f64], center: &[f64], radius: f64) -> bool {
    center.len() == extents.len()
        && center
            .iter()
            .zip(extents)
            .all(|(&c, &e)| c - radius >= 0.0 && c + radius <= e)
}

fn inside(extents: &[f64], p: &[f64]) -> bool {
    p.len() == extents.len() && p.iter().zip(extents).all(|(&c, &e)| c > 0.0 && c < e)
}

/// Which parts of the config a subcommand needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Moment,
    EpsilonScan,
    Criterion,
    Decay,
    Correlator,
    Ids,
    Validate,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Moment => "moment",
            Stage::EpsilonScan => "epsilon-scan",
            Stage::Criterion => "criterion",
            Stage::Decay => "decay",
            Stage::Correlator => "correlator",
            Stage::Ids => "ids",
            Stage::Validate => "validate",
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Invalid(msg.into())
}

/// Cross-field constraints for `stage`, checked before any computation.
pub fn check(cfg: &ExperimentConfig, stage: Stage) -> Result<()> {
    if cfg.experiment_id.is_empty() || cfg.experiment_id.contains(['/', '\\']) {
        return Err(invalid("experiment_id must be a nonempty name without path separators"));
    }
    let ext = &cfg.model.grid.extents;
    cfg.grid().map_err(|e| invalid(format!("model.grid: {e}")))?;
    cfg.profile().map_err(|e| invalid(format!("model.profile: {e}")))?;
    cfg.density().map_err(|e| invalid(format!("model.law.density: {e}")))?;
    if !(cfg.model.law.lambda >= 0.0) || !cfg.model.law.lambda.is_finite() {
        return Err(invalid("model.law.lambda must be finite and >= 0"));
    }
    if cfg.model.background.magnetic_field.is_some() && cfg.dim() < 2 {
        return Err(invalid("model.background.magnetic_field needs d >= 2"));
    }
    if stage == Stage::Validate {
        return Ok(());
    }
    if cfg.run.samples == 0 {
        return Err(invalid("run.samples must be positive"));
    }
    if cfg.run.s.is_empty() {
        return Err(invalid("run.s must list at least one exponent"));
    }
    if cfg.run.energies.is_empty() {
        return Err(invalid("run.energies must list at least one energy"));
    }
    for &s in &cfg.run.s {
        let ok = match stage {
            Stage::Criterion => s > 0.0 && s < 1.0 / 3.0,
            Stage::Decay => s > 0.0 && s < 1.0,
            _ => s > 0.0 && s.is_finite(),
        };
        if !ok && matches!(stage, Stage::Moment | Stage::EpsilonScan | Stage::Criterion | Stage::Decay) {
            return Err(invalid(format!("run.s = {s} outside the admissible range for {}", stage.name())));
        }
    }
    cfg.schedule().map_err(|e| invalid(format!("run.eps: {e}")))?;
    match stage {
        Stage::Moment | Stage::EpsilonScan => {
            if cfg.run.pairs.is_empty() {
                return Err(invalid(format!("{} needs run.pairs", stage.name())));
            }
            for (k, p) in cfg.run.pairs.iter().enumerate() {
                if !ball_fits(ext, &p.x, p.radius) || !ball_fits(ext, &p.y, p.radius) {
                    return Err(invalid(format!("run.pairs[{k}]: balls must fit the box")));
                }
            }
        }
        Stage::Decay => check_ladder(cfg)?,
        Stage::Criterion => {
            let crit = cfg
                .run
                .criterion
                .as_ref()
                .ok_or_else(|| invalid("criterion needs run.criterion"))?;
            if crit.l.is_empty() {
                return Err(invalid("run.criterion.L must list at least one radius"));
            }
            let r = cfg.bump_radius();
            for &l in &crit.l {
                if !(l > 24.0 * r) {
                    return Err(invalid(format!("run.criterion.L = {l} must exceed 24 r = {}", 24.0 * r)));
                }
                cfg.layer(l).map_err(|e| invalid(format!("run.criterion.L = {l}: {e}")))?;
                let (extents, alphas) = cfg.criterion_geometry(l);
                for a in &alphas {
                    if !ball_fits(&extents, a, l) {
                        return Err(invalid(format!("run.criterion: ball B({a:?}, {l}) does not fit the box")));
                    }
                }
            }
            if crit.consistency {
                check_ladder(cfg)?;
            }
        }
        Stage::Correlator => {
            let w = cfg
                .run
                .window
                .as_ref()
                .ok_or_else(|| invalid("correlator needs run.window"))?;
            if !(w.a < w.b) {
                return Err(invalid("run.window needs a < b"));
            }
            check_ladder(cfg)?;
            if let (Some(offsets), Some(l)) = (&w.offsets, &cfg.run.ladder) {
                if offsets.len() < 3 {
                    return Err(invalid("run.window.offsets needs at least 3 offsets"));
                }
                for &t in offsets {
                    let mut p = l.source.clone();
                    p[0] += t;
                    if !ball_fits(ext, &p, l.radius) {
                        return Err(invalid(format!("run.window offset {t} does not fit the box")));
                    }
                }
            }
        }
        Stage::Ids => {
            let ids = cfg.run.ids.as_ref().ok_or_else(|| invalid("ids needs run.ids"))?;
            if ids.energies.is_empty() {
                return Err(invalid("run.ids.energies must be nonempty"));
            }
        }
        Stage::Validate => {}
    }
    if let Some(h) = &cfg.run.holder {
        if !(h.eps0 > 0.0) || !(h.spacing > 0.0) || h.side % 2 == 0 {
            return Err(invalid("run.holder needs eps0 > 0, spacing > 0 and an odd side"));
        }
        if h.eps0 - h.spacing * (h.side / 2) as f64 <= 0.0 {
            return Err(invalid("run.holder grid reaches eps <= 0"));
        }
    }
    Ok(())
}

fn check_ladder(cfg: &ExperimentConfig) -> Result<()> {
    let l = cfg.run.ladder.as_ref().ok_or_else(|| invalid("run.ladder is required"))?;
    let ext = &cfg.model.grid.extents;
    if l.offsets.len() < 3 {
        return Err(invalid("run.ladder needs at least 3 offsets"));
    }
    if !inside(ext, &l.source) || !ball_fits(ext, &l.source, l.radius) {
        return Err(invalid("run.ladder.source ball must fit the box"));
    }
    for &t in &l.offsets {
        let mut p = l.source.clone();
        p[0] += t;
        if !ball_fits(ext, &p, l.radius) {
            return Err(invalid(format!("run.ladder target at offset {t} does not fit the box")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> &'static str {
        r#"{"experiment_id":"t","model":{"grid":{"extents":[8.0],"spacing":0.5},
            "profile":{"radius":1.0},"law":{"lambda":1.0}},"run":{"s":[0.3]}}"#
    }

    #[test]
    fn defaults_fill_in() {
        let c = parse_config(minimal()).unwrap();
        assert_eq!(c.run.samples, 100);
        assert_eq!(c.constants.m_const, 1.0);
        assert_eq!(c.constants.layer_depth, 23.0);
        assert_eq!(c.run.energies, vec![0.0]);
        assert_eq!(c.schedule().unwrap().values().len(), 4);
    }

    #[test]
    fn missing_s_reports_path() {
        let text = minimal().replace(r#""s":[0.3]"#, r#""samples":3"#);
        let err = parse_config(&text).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let msg = err.to_string();
        assert!(msg.contains("run") && msg.contains("missing field `s`"), "{msg}");
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = minimal().replace(r#""lambda":1.0"#, r#""lambda":1.0,"lambada":2"#);
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.contains("model.law"), "{err}");
    }

    #[test]
    fn hash_tracks_content() {
        let a = parse_config(minimal()).unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn criterion_checks() {
        let mut c = parse_config(minimal()).unwrap();
        c.run.criterion = Some(CriterionConfig {
            l: vec![20.0],
            r: None,
            alphas: None,
            per_scale_box: true,
            consistency: false,
            r2_threshold: 0.8,
        });
        assert!(check(&c, Stage::Criterion).unwrap_err().to_string().contains("24 r"));
        c.run.criterion.as_mut().unwrap().l = vec![26.0];
        check(&c, Stage::Criterion).unwrap();
        c.run.criterion.as_mut().unwrap().per_scale_box = false;
        assert!(check(&c, Stage::Criterion).unwrap_err().to_string().contains("fit"));
        c.run.criterion.as_mut().unwrap().per_scale_box = true;
        c.run.s = vec![0.4];
        assert!(check(&c, Stage::Criterion).is_err());
    }

    #[test]
    fn pair_balls_must_fit() {
        let mut c = parse_config(minimal()).unwrap();
        c.run.pairs = vec![PairConfig {
            x: vec![0.5],
            y: vec![4.0],
            radius: 1.0,
        }];
        assert!(check(&c, Stage::Moment).is_err());
        c.run.pairs[0].x = vec![2.0];
        check(&c, Stage::Moment).unwrap();
    }
}
