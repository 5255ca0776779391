//! Subcommand orchestration: config in, records and CSV tables out.

use fracmom_core::criterion::{
    criterion_factor, estimate_raw_boundary_moment, fit_exponential_decay, fit_exponential_decay_weighted,
    ladder_points, moment_ladder, verify_criterion_consistency, ConsistencyReport, CriterionParams, CriterionReport,
    DecayFit, LadderPoint, RawBoundaryMoment,
};
use fracmom_core::localization::{
    correlator_ladder, ids_estimate, window_decay_rates, CorrelatorPoint, EigenWindow, IdsEstimate, WindowDecay,
};
use fracmom_core::moments::{
    holder_grid, sample_block_norms, scan_from_norms, summarize_columns, FractionalExponent, MomentEstimate, Workers,
};
use fracmom_core::resolvent::SpectralShift;
use fracmom_core::validation::{oracle_suite, scalar_weak11_check, weak11_suite, OracleCase, ScalarWeak11Check, Weak11Case};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::config::{check, ExperimentConfig, Stage};
use crate::error::{CliError, Result};
use crate::plot::{emit_tables, PlotKind};
use crate::records::{start, RecordKind, RecordSink, ResultRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayPayload {
    pub s: f64,
    #[serde(rename = "E")]
    pub energy: f64,
    pub eps: f64,
    pub ladder: Vec<LadderPoint<f64>>,
    pub fit: DecayFit<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionPayload {
    pub raw: RawBoundaryMoment<f64>,
    pub report: CriterionReport<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorPayload {
    pub window: EigenWindow<f64>,
    pub points: Vec<CorrelatorPoint<f64>>,
    pub fit: DecayFit<f64>,
    pub eigenfunctions: Vec<WindowDecay<f64>>,
    /// Every fitted `ν̂` is positive.
    pub all_positive: bool,
    /// The moment-decay rate of the same run, when a ladder of moments was fitted.
    pub moment_mu: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdsPayload {
    pub estimate: IdsEstimate<f64>,
    #[serde(rename = "E0")]
    pub e0: f64,
    pub threshold: Option<f64>,
    pub small: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "suite", rename_all = "kebab-case")]
pub enum ValidationPayload {
    Oracle { cases: Vec<OracleCase<f64>>, pass: bool },
    Weak11 { cases: Vec<Weak11Case<f64>>, pass: bool },
    Weak11Scalar { check: ScalarWeak11Check<f64> },
}

impl ValidationPayload {
    pub fn pass(&self) -> bool {
        match self {
            Self::Oracle { pass, .. } | Self::Weak11 { pass, .. } => *pass,
            Self::Weak11Scalar { check } => check.pass,
        }
    }
}

/// One subcommand invocation; records go to `<out>/<experiment_id>/`.
pub struct Run {
    pub cfg: ExperimentConfig,
    pub workers: Workers,
    pub dir: PathBuf,
    sink: RecordSink,
    labels: Vec<&'static str>,
}

impl Run {
    pub fn new(cfg: ExperimentConfig, workers: Workers, out: Option<&Path>) -> Result<Self> {
        let root = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
        let dir = root.join(&cfg.experiment_id);
        let sink = RecordSink::open(&dir, &cfg.experiment_id, &cfg.hash())?;
        Ok(Self {
            cfg,
            workers,
            dir,
            sink,
            labels: Vec::new(),
        })
    }

    pub fn records(&self) -> &[ResultRecord] {
        self.sink.written()
    }

    pub fn records_path(&self) -> &Path {
        self.sink.path()
    }

    fn mark(&mut self, label: &'static str) {
        if !self.labels.contains(&label) {
            self.labels.push(label);
        }
    }

    /// CSV summaries of everything this run produced.
    pub fn finish(&self) -> Result<()> {
        if !self.cfg.output.csv {
            return Ok(());
        }
        for label in &self.labels {
            if let Some(kind) = PlotKind::for_label(label) {
                emit_tables(self.sink.written(), kind, &self.dir)?;
            }
        }
        Ok(())
    }

    pub fn execute(&mut self, stage: Stage) -> Result<()> {
        check(&self.cfg, stage)?;
        let outcome = match stage {
            Stage::Moment => self.moment(),
            Stage::EpsilonScan => self.epsilon_scan(),
            Stage::Criterion => self.criterion().map(|_| ()),
            Stage::Decay => self.decay().map(|_| ()),
            Stage::Correlator => self.correlator(None).map(|_| ()),
            Stage::Ids => self.ids().map(|_| ()),
            Stage::Validate => self.validate(),
        };
        // partial records are already flushed; tables are best effort
        let tables = self.finish();
        outcome.and(tables)
    }

    fn e0(&self) -> Result<f64> {
        self.cfg.ground_energy()
    }

    pub fn moment(&mut self) -> Result<()> {
        let ens = self.cfg.ensemble()?;
        let grid = ens.grid().clone();
        let e0 = self.e0()?;
        let eps = self.cfg.schedule()?.smallest();
        let opts = self.cfg.solver();
        let n = self.cfg.run.samples;
        let seed = self.cfg.seed;
        for energy in self.cfg.energies(e0) {
            let z = SpectralShift::new(energy, eps)?;
            for (k, (x, y)) in self.cfg.pair_sets(&grid).iter().enumerate() {
                let t0 = start();
                let norms = sample_block_norms(&ens, &[z], x, y, n, seed, opts, &self.workers)?;
                let pair = &self.cfg.run.pairs[k];
                for &s in &self.cfg.run.s {
                    let summary = summarize_columns(&norms, s)?.remove(0);
                    let est = MomentEstimate::from_summary(s, z, pair.x.clone(), pair.y.clone(), summary, seed);
                    self.sink.emit(RecordKind::Moment, "moment", &est, t0)?;
                }
                if let Some(hc) = self.cfg.run.holder.clone() {
                    for &s in &self.cfg.run.s {
                        let t0 = start();
                        let exp = FractionalExponent::diagnostic(s)?;
                        let grid =
                            holder_grid(&ens, exp, energy, hc.eps0, hc.spacing, hc.side, x, y, n, seed, opts, &self.workers)?;
                        self.sink.emit(RecordKind::Moment, "holder", &grid, t0)?;
                    }
                    self.mark("holder");
                }
            }
        }
        self.mark("moment");
        Ok(())
    }

    pub fn epsilon_scan(&mut self) -> Result<()> {
        let ens = self.cfg.ensemble()?;
        let grid = ens.grid().clone();
        let e0 = self.e0()?;
        let schedule = self.cfg.schedule()?;
        let opts = self.cfg.solver();
        let n = self.cfg.run.samples;
        let seed = self.cfg.seed;
        for energy in self.cfg.energies(e0) {
            let shifts = schedule.shifts(energy)?;
            for (k, (x, y)) in self.cfg.pair_sets(&grid).iter().enumerate() {
                let t0 = start();
                let norms = sample_block_norms(&ens, &shifts, x, y, n, seed, opts, &self.workers)?;
                let pair = &self.cfg.run.pairs[k];
                for &s in &self.cfg.run.s {
                    let scan = scan_from_norms(&norms, s, &shifts, pair.x.clone(), pair.y.clone(), schedule.tolerance(), seed)?;
                    self.sink.emit(RecordKind::Moment, "epsilon-scan", &scan, t0)?;
                }
            }
        }
        self.mark("epsilon-scan");
        Ok(())
    }

    /// Criterion reports for every `(s, E, L)`, then the consistency check for
    /// the first satisfied `L` of each `(s, E)`.
    pub fn criterion(&mut self) -> Result<Vec<ConsistencyReport<f64>>> {
        let crit = self.cfg.run.criterion.clone().expect("checked");
        let e0 = self.e0()?;
        let schedule = self.cfg.schedule()?;
        let opts = self.cfg.solver();
        let n = self.cfg.run.samples;
        let seed = self.cfg.seed;
        let d = self.cfg.dim();
        let mut consistency = Vec::new();
        for &s in &self.cfg.run.s {
            let exp = FractionalExponent::new(s)?;
            for energy in self.cfg.energies(e0) {
                let mut first_ok: Option<CriterionReport<f64>> = None;
                for &l in &crit.l {
                    let t0 = start();
                    let (extents, alphas) = self.cfg.criterion_geometry(l);
                    let ens = self.cfg.ensemble_on(&extents)?;
                    let layer = self.cfg.layer(l)?;
                    let raw = estimate_raw_boundary_moment(
                        &ens, exp, energy, layer, &schedule, &alphas, n, seed, opts, &self.workers,
                    )?;
                    let report = criterion_factor(&CriterionParams {
                        s,
                        lambda: self.cfg.model.law.lambda,
                        energy,
                        e0,
                        l,
                        r: layer.r,
                        d,
                        raw_moment: raw.value,
                        prefactor: self.cfg.prefactor(),
                    })?;
                    if report.satisfied() && first_ok.is_none() {
                        first_ok = Some(report);
                    }
                    self.sink
                        .emit(RecordKind::Criterion, "criterion", &CriterionPayload { raw, report }, t0)?;
                }
                if let (Some(report), true) = (first_ok, crit.consistency) {
                    let t0 = start();
                    let ens = self.cfg.ensemble()?;
                    let ladder = self.cfg.ladder().expect("checked");
                    let z = SpectralShift::new(energy, schedule.smallest())?;
                    let rep = verify_criterion_consistency(
                        &ens, &report, z, &ladder, n, seed, crit.r2_threshold, opts, &self.workers,
                    )?;
                    self.sink.emit(RecordKind::Fit, "consistency", &rep, t0)?;
                    consistency.push(rep);
                }
            }
        }
        self.mark("criterion");
        self.mark("consistency");
        Ok(consistency)
    }

    pub fn decay(&mut self) -> Result<Vec<DecayPayload>> {
        let ens = self.cfg.ensemble()?;
        let e0 = self.e0()?;
        let eps = self.cfg.schedule()?.smallest();
        let opts = self.cfg.solver();
        let lc = self.cfg.run.ladder.clone().expect("checked");
        let ladder = self.cfg.ladder().expect("checked");
        let mut out = Vec::new();
        for &s in &self.cfg.run.s {
            for energy in self.cfg.energies(e0) {
                let t0 = start();
                let z = SpectralShift::new(energy, eps)?;
                let points = moment_ladder(
                    &ens,
                    FractionalExponent::new(s)?,
                    z,
                    &ladder,
                    self.cfg.run.samples,
                    self.cfg.seed,
                    opts,
                    &self.workers,
                )?;
                let pts = ladder_points(&points);
                let fit = if lc.weighted {
                    let se: Vec<f64> = points.iter().map(|p| p.estimate.stderr).collect();
                    fit_exponential_decay_weighted(&pts, &se)?
                } else {
                    fit_exponential_decay(&pts)?
                };
                let payload = DecayPayload {
                    s,
                    energy,
                    eps,
                    ladder: points,
                    fit,
                };
                self.sink.emit(RecordKind::Fit, "decay", &payload, t0)?;
                out.push(payload);
            }
        }
        self.mark("decay");
        Ok(out)
    }

    pub fn correlator(&mut self, moment_mu: Option<f64>) -> Result<CorrelatorPayload> {
        let ens = self.cfg.ensemble()?;
        let e0 = self.e0()?;
        let wc = self.cfg.run.window.clone().expect("checked");
        let window = EigenWindow::new(
            self.cfg.resolve_energy(wc.a, wc.reference, e0),
            self.cfg.resolve_energy(wc.b, wc.reference, e0),
        )?;
        let ladder = self.cfg.correlator_ladder().expect("checked");
        let t0 = start();
        let points = correlator_ladder(&ens, window, &ladder, self.cfg.run.samples, self.cfg.seed, &self.workers)?;
        let pts: Vec<(f64, f64)> = points.iter().map(|p| (p.distance, p.mean)).collect();
        let fit = fit_exponential_decay(&pts)?;
        let eigenfunctions = window_decay_rates(
            &ens,
            window,
            self.cfg.model.profile.radius,
            wc.decay_samples.min(self.cfg.run.samples),
            self.cfg.seed,
            &self.workers,
        )?;
        let all_positive = !eigenfunctions.is_empty() && eigenfunctions.iter().all(|w| w.decay.nu > 0.0);
        let payload = CorrelatorPayload {
            window,
            points,
            fit,
            eigenfunctions,
            all_positive,
            moment_mu,
        };
        self.sink.emit(RecordKind::Correlator, "correlator", &payload, t0)?;
        self.mark("correlator");
        self.mark("eigen");
        Ok(payload)
    }

    pub fn ids(&mut self) -> Result<Vec<IdsPayload>> {
        let ens = self.cfg.ensemble()?;
        let e0 = self.e0()?;
        let ic = self.cfg.run.ids.clone().expect("checked");
        let n = ic.samples.unwrap_or(self.cfg.run.samples);
        let mut out = Vec::new();
        for &e in &ic.energies {
            let t0 = start();
            let energy = self.cfg.resolve_energy(e, ic.reference, e0);
            let estimate = ids_estimate(&ens, energy, n, self.cfg.seed, &self.workers)?;
            let payload = IdsPayload {
                estimate,
                e0,
                threshold: ic.threshold,
                small: ic.threshold.map(|t| estimate.ids <= t),
            };
            self.sink.emit(RecordKind::Ids, "ids", &payload, t0)?;
            out.push(payload);
        }
        self.mark("ids");
        Ok(out)
    }

    /// Oracle and weak 1-1 suites; fails after writing all reports when any case fails.
    pub fn validate(&mut self) -> Result<()> {
        let v = self.cfg.run.validation.clone();
        let seed = self.cfg.seed;
        let t0 = start();
        let cases = oracle_suite(v.oracle_configs, v.max_points, seed, self.cfg.solver(), &self.workers)?;
        let pass = cases.iter().all(|c| c.report.pass);
        let oracle = ValidationPayload::Oracle { cases, pass };
        self.sink.emit(RecordKind::Validation, "validate", &oracle, t0)?;
        let t0 = start();
        let cases = weak11_suite(v.weak11_pairs, v.weak11_dim, v.eta_points, seed, &self.workers)?;
        let pass = cases.iter().all(|c| c.pass);
        let weak = ValidationPayload::Weak11 { cases, pass };
        self.sink.emit(RecordKind::Validation, "validate", &weak, t0)?;
        let t0 = start();
        let scalar = ValidationPayload::Weak11Scalar {
            check: scalar_weak11_check(v.eta_points, &self.workers)?,
        };
        self.sink.emit(RecordKind::Validation, "validate", &scalar, t0)?;
        let failed: Vec<&str> = [("oracle", &oracle), ("weak11", &weak), ("weak11-scalar", &scalar)]
            .iter()
            .filter(|(_, p)| !p.pass())
            .map(|(n, _)| *n)
            .collect();
        if failed.is_empty() {
            Ok(())
        } else {
            Err(CliError::ValidationFailed(failed.join(", ")))
        }
    }
}
