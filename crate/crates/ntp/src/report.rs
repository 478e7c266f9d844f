//! Training logs (`log.jsonl`) and metrics reports (`metrics.json`).

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use ntp_core::trainer::EpochRecord;
use serde::{Deserialize, Serialize};

/// One line of `log.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub epoch: usize,
    pub loss: f64,
    pub dev_metric: Option<f64>,
}

impl From<&EpochRecord> for LogRecord {
    fn from(r: &EpochRecord) -> Self {
        LogRecord {
            epoch: r.epoch,
            loss: r.loss,
            dev_metric: r.dev_metric,
        }
    }
}

/// Appends records as they arrive, flushing each line.
pub struct LogWriter {
    out: BufWriter<File>,
}

impl LogWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        Ok(LogWriter { out: BufWriter::new(file) })
    }

    pub fn write(&mut self, rec: &LogRecord) -> Result<()> {
        serde_json::to_writer(&mut self.out, rec)?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        Ok(())
    }
}

pub fn read_log(path: &Path) -> Result<Vec<LogRecord>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).context("malformed log line"))
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FactReport {
    pub fact: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank_first: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank_second: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mrr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hits1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hits3: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hits10: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auc_pr: Option<f64>,
    pub per_fact: Vec<FactReport>,
}

impl Metrics {
    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?).with_context(|| format!("writing {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// One line per metric that is set.
    pub fn summary(&self) -> String {
        let mut parts = Vec::new();
        for (name, v) in [
            ("AUC-PR", self.auc_pr),
            ("MRR", self.mrr),
            ("HITS@1", self.hits1),
            ("HITS@3", self.hits3),
            ("HITS@10", self.hits10),
        ] {
            if let Some(v) = v {
                parts.push(format!("{name:<8} {v:.4}"));
            }
        }
        parts.join("\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        let recs = [
            LogRecord { epoch: 1, loss: 2.5, dev_metric: None },
            LogRecord { epoch: 2, loss: 1.25, dev_metric: Some(0.5) },
        ];
        let mut w = LogWriter::create(&path).unwrap();
        for r in &recs {
            w.write(r).unwrap();
        }
        drop(w);
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), r#"{"epoch":1,"loss":2.5,"dev_metric":null}"#);
        assert_eq!(read_log(&path).unwrap(), recs);
    }

    #[test]
    fn metrics_skip_unset() {
        let m = Metrics { auc_pr: Some(0.75), ..Metrics::default() };
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(json, r#"{"auc_pr":0.75,"per_fact":[]}"#);
        assert_eq!(m.summary(), "AUC-PR   0.7500");
    }
}
