use clap::{Parser, Subcommand, ValueEnum};
use fracmom::config::{apply_seed_override, check, json_schema, load_config, ExperimentConfig, Stage};
use fracmom::plot::{emit_tables, PlotKind};
use fracmom::presets::{load_preset, run_preset};
use fracmom::{read_records, CliError, Run};
use fracmom_core::Workers;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "fracmom", version, about = "Fractional-moment localization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for sampling; never changes any emitted number.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Output root; records go to `<out>/<experiment_id>/`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Fractional moments at the smallest eps for every (s, E, pair).
    Moment,
    /// Moments along the eps schedule with a stability verdict.
    EpsilonScan,
    /// Boundary moments, criterion factor and the decay consistency fit.
    Criterion,
    /// Moment decay along the distance ladder.
    Decay,
    /// Eigenfunction correlator ladder and per-eigenfunction decay rates.
    Correlator,
    /// Integrated density of states.
    Ids,
    /// Dense-oracle and weak 1-1 suites.
    Validate,
    /// Run a named regime preset.
    Preset { name: PresetName },
    /// CSV table from a records file.
    PlotData {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        kind: String,
    },
    /// Print the config JSON schema.
    Schema,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetName {
    BandEdge,
    #[value(name = "large-disorder-1d")]
    LargeDisorder1d,
    #[value(name = "large-disorder-2d")]
    LargeDisorder2d,
}

impl PresetName {
    fn as_str(self) -> &'static str {
        match self {
            PresetName::BandEdge => "band-edge",
            PresetName::LargeDisorder1d => "large-disorder-1d",
            PresetName::LargeDisorder2d => "large-disorder-2d",
        }
    }
}

fn stage_config(cli: &Cli, stage: Stage) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match (&cli.config, stage) {
        (Some(path), _) => load_config(path)?,
        (None, Stage::Validate) => ExperimentConfig::validation_default(),
        (None, _) => return Err(CliError::Invalid(format!("{} needs --config", stage.name()))),
    };
    apply_seed_override(&mut cfg)?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let workers = Workers::new(cli.workers)?;
    let stage = match &cli.command {
        Command::Moment => Stage::Moment,
        Command::EpsilonScan => Stage::EpsilonScan,
        Command::Criterion => Stage::Criterion,
        Command::Decay => Stage::Decay,
        Command::Correlator => Stage::Correlator,
        Command::Ids => Stage::Ids,
        Command::Validate => Stage::Validate,
        Command::Preset { name } => {
            let preset = load_preset(name.as_str())?;
            let outcome = run_preset(&preset, workers, cli.out.as_deref())?;
            for d in &outcome.decay {
                println!("[{}] decay s={} E={:.6}: mu={:.4} r2={:.4}", preset.name, d.s, d.energy, d.fit.mu, d.fit.r2);
            }
            for c in &outcome.consistency {
                println!(
                    "[{}] consistency L={}: factor={:.3e} mu={:.4} r2={:.4} predicted_rate={:?}",
                    preset.name, c.criterion.l, c.criterion.factor, c.fit.mu, c.fit.r2, c.predicted_rate
                );
            }
            if let Some(c) = &outcome.correlator {
                println!(
                    "[{}] correlator mu={:.4} r2={:.4}, {} eigenfunctions, all nu>0: {}",
                    preset.name,
                    c.fit.mu,
                    c.fit.r2,
                    c.eigenfunctions.len(),
                    c.all_positive
                );
            }
            for i in &outcome.ids {
                println!("[{}] ids E={:.6}: {:.4e} small={:?}", preset.name, i.estimate.energy, i.estimate.ids, i.small);
            }
            for n in &outcome.notes {
                println!("[{}] {n}", preset.name);
            }
            return Ok(());
        }
        Command::PlotData { records, kind } => {
            let kind = PlotKind::parse(kind).ok_or_else(|| CliError::Invalid(format!("unknown plot kind `{kind}`")))?;
            let recs = read_records(records)?;
            let dir = cli
                .out
                .clone()
                .or_else(|| records.parent().map(|p| p.to_path_buf()))
                .unwrap_or_else(|| PathBuf::from("."));
            let path = emit_tables(&recs, kind, &dir)?;
            println!("{}", path.display());
            return Ok(());
        }
        Command::Schema => {
            println!("{}", serde_json::to_string_pretty(&json_schema())?);
            return Ok(());
        }
    };
    let cfg = stage_config(cli, stage)?;
    check(&cfg, stage)?;
    let mut run = Run::new(cfg, workers, cli.out.as_deref())?;
    let result = run.execute(stage);
    println!("[{}] {} records -> {}", stage.name(), run.records().len(), run.records_path().display());
    result
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
