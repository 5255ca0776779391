//! Append-only JSON-lines persistence.

use serde::{Deserialize, Serialize};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecordKind {
    Moment,
    Criterion,
    Fit,
    Correlator,
    Ids,
    Validation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timestamps {
    pub started_unix_ms: u128,
    pub wall_time_ms: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub experiment_id: String,
    pub config_hash: String,
    pub kind: RecordKind,
    /// Producing subcommand, e.g. `epsilon-scan` or `decay`.
    pub label: String,
    pub payload: serde_json::Value,
    pub timestamps: Timestamps,
}

impl ResultRecord {
    /// Payload bytes, the part that must not depend on timing or workers.
    pub fn payload_string(&self) -> String {
        serde_json::to_string(&self.payload).expect("payload serializes")
    }
}

pub fn unix_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

/// Appends records to `<dir>/records.jsonl`, flushing after each line.
pub struct RecordSink {
    experiment_id: String,
    config_hash: String,
    path: PathBuf,
    file: File,
    written: Vec<ResultRecord>,
}

impl RecordSink {
    pub fn open(dir: &Path, experiment_id: &str, config_hash: &str) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("records.jsonl");
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self {
            experiment_id: experiment_id.to_string(),
            config_hash: config_hash.to_string(),
            path,
            file,
            written: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Records written through this sink, in order.
    pub fn written(&self) -> &[ResultRecord] {
        &self.written
    }

    pub fn emit<P: Serialize>(&mut self, kind: RecordKind, label: &str, payload: &P, started: (u128, Instant)) -> Result<()> {
        let record = ResultRecord {
            experiment_id: self.experiment_id.clone(),
            config_hash: self.config_hash.clone(),
            kind,
            label: label.to_string(),
            payload: serde_json::to_value(payload)?,
            timestamps: Timestamps {
                started_unix_ms: started.0,
                wall_time_ms: started.1.elapsed().as_millis(),
            },
        };
        let mut line = serde_json::to_string(&record)?;
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.flush()?;
        self.written.push(record);
        Ok(())
    }
}

pub fn start() -> (u128, Instant) {
    (unix_ms(), Instant::now())
}

pub fn read_records(path: &Path) -> Result<Vec<ResultRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn append_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut sink = RecordSink::open(dir.path(), "e", "abc").unwrap();
        let payload = serde_json::json!({"mean": 0.1f64 + 0.2, "xs": [1.0, 1e-300]});
        sink.emit(RecordKind::Moment, "moment", &payload, start()).unwrap();
        sink.emit(RecordKind::Fit, "decay", &payload, start()).unwrap();
        drop(sink);
        let mut again = RecordSink::open(dir.path(), "e", "abc").unwrap();
        again.emit(RecordKind::Ids, "ids", &payload, start()).unwrap();
        let back = read_records(again.path()).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(back[0].payload, payload);
        assert_eq!(back[2].kind, RecordKind::Ids);
        let text = serde_json::to_string(&back[1]).unwrap();
        assert_eq!(serde_json::from_str::<ResultRecord>(&text).unwrap(), back[1]);
    }
}
