//! Tidy CSV tables from persisted records.

use fracmom_core::criterion::ConsistencyReport;
use fracmom_core::moments::{EpsilonScan, MomentEstimate};
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::records::ResultRecord;
use crate::runner::{CorrelatorPayload, CriterionPayload, DecayPayload, IdsPayload};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Decay,
    Consistency,
    EpsilonScan,
    Moment,
    Criterion,
    Correlator,
    Eigen,
    Ids,
}

impl PlotKind {
    pub const ALL: [PlotKind; 8] = [
        PlotKind::Decay,
        PlotKind::Consistency,
        PlotKind::EpsilonScan,
        PlotKind::Moment,
        PlotKind::Criterion,
        PlotKind::Correlator,
        PlotKind::Eigen,
        PlotKind::Ids,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlotKind::Decay => "decay",
            PlotKind::Consistency => "consistency",
            PlotKind::EpsilonScan => "epsilon-scan",
            PlotKind::Moment => "moment",
            PlotKind::Criterion => "criterion",
            PlotKind::Correlator => "correlator",
            PlotKind::Eigen => "eigen",
            PlotKind::Ids => "ids",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Table produced from records with this label, if any.
    pub fn for_label(label: &str) -> Option<Self> {
        Self::parse(label)
    }

    /// Label of the records the table is built from.
    fn source_label(self) -> &'static str {
        match self {
            PlotKind::Eigen => "correlator",
            k => k.name(),
        }
    }

    pub fn header(self) -> &'static [&'static str] {
        match self {
            PlotKind::Decay => &["dist", "mean", "stderr", "s", "E"],
            PlotKind::Consistency => &["dist", "mean", "stderr", "s", "E", "L"],
            PlotKind::EpsilonScan => &["eps", "mean", "stderr", "s", "E", "x", "y"],
            PlotKind::Moment => &["eps", "mean", "stderr", "s", "E", "x", "y"],
            PlotKind::Criterion => &["L", "raw_moment", "stderr", "factor", "gamma", "s", "E"],
            PlotKind::Correlator => &["dist", "mean", "stderr", "a", "b"],
            PlotKind::Eigen => &["sample", "energy", "nu", "r2", "shells"],
            PlotKind::Ids => &["E", "ids", "stderr", "N"],
        }
    }
}

/// Shortest round-trip form, scientific outside `[1e-4, 1e16)`.
fn num(v: f64) -> String {
    if v != 0.0 && v.is_finite() && (v.abs() < 1e-4 || v.abs() >= 1e16) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn point(p: &[f64]) -> String {
    p.iter().map(|v| num(*v)).collect::<Vec<_>>().join(";")
}

fn estimate_row(e: &MomentEstimate<f64>) -> Vec<String> {
    vec![num(e.eps), num(e.mean), num(e.stderr), num(e.s), num(e.energy), point(&e.x), point(&e.y)]
}

/// Rows of the table for `kind`, in record order.
pub fn plot_rows(records: &[ResultRecord], kind: PlotKind) -> Result<Vec<Vec<String>>> {
    let mut rows = Vec::new();
    for rec in records.iter().filter(|r| r.label == kind.source_label()) {
        let value = rec.payload.clone();
        match kind {
            PlotKind::Decay => {
                let p: DecayPayload = serde_json::from_value(value)?;
                for lp in &p.ladder {
                    rows.push(vec![num(lp.distance), num(lp.estimate.mean), num(lp.estimate.stderr), num(p.s), num(p.energy)]);
                }
            }
            PlotKind::Consistency => {
                let p: ConsistencyReport<f64> = serde_json::from_value(value)?;
                for lp in &p.ladder {
                    rows.push(vec![
                        num(lp.distance),
                        num(lp.estimate.mean),
                        num(lp.estimate.stderr),
                        num(p.criterion.s),
                        num(p.criterion.energy),
                        num(p.criterion.l),
                    ]);
                }
            }
            PlotKind::EpsilonScan => {
                let p: EpsilonScan<f64> = serde_json::from_value(value)?;
                rows.extend(p.estimates.iter().map(estimate_row));
            }
            PlotKind::Moment => {
                let p: MomentEstimate<f64> = serde_json::from_value(value)?;
                rows.push(estimate_row(&p));
            }
            PlotKind::Criterion => {
                let p: CriterionPayload = serde_json::from_value(value)?;
                let best = p.raw.estimate(p.raw.argmax);
                rows.push(vec![
                    num(p.report.l),
                    num(p.report.raw_moment),
                    num(best.stderr),
                    num(p.report.factor),
                    p.report.gamma.map_or_else(String::new, num),
                    num(p.report.s),
                    num(p.report.energy),
                ]);
            }
            PlotKind::Correlator => {
                let p: CorrelatorPayload = serde_json::from_value(value)?;
                for c in &p.points {
                    rows.push(vec![num(c.distance), num(c.mean), num(c.stderr), num(p.window.a), num(p.window.b)]);
                }
            }
            PlotKind::Eigen => {
                let p: CorrelatorPayload = serde_json::from_value(value)?;
                for w in &p.eigenfunctions {
                    rows.push(vec![
                        w.sample.to_string(),
                        num(w.energy),
                        num(w.decay.nu),
                        num(w.decay.r2),
                        w.decay.shells.len().to_string(),
                    ]);
                }
            }
            PlotKind::Ids => {
                let p: IdsPayload = serde_json::from_value(value)?;
                let e = p.estimate;
                rows.push(vec![num(e.energy), num(e.ids), num(e.stderr), e.samples.to_string()]);
            }
        }
    }
    Ok(rows)
}

/// Writes `<dir>/<kind>.csv`; with no matching records only the header is
/// written and a warning goes to stderr.
pub fn emit_tables(records: &[ResultRecord], kind: PlotKind, dir: &Path) -> Result<PathBuf> {
    let rows = plot_rows(records, kind)?;
    if rows.is_empty() {
        eprintln!("warning: no `{}` records; writing header only", kind.name());
    }
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("{}.csv", kind.name()));
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(kind.header())?;
    for r in &rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(path)
}
