//! JSON Lines metric streams with 17-significant-digit floats.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::fmt_g17;
use crate::search::{EpochRecord, SearchEpochRecord};

/// Writes floats with `%.17g` so equal runs give equal bytes.
#[derive(Clone, Copy, Debug, Default)]
pub struct G17Formatter;

impl serde_json::ser::Formatter for G17Formatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        writer.write_all(fmt_g17(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

pub fn to_json_line<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, G17Formatter);
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Serialize(e.to_string()))?;
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    // Pretty layout with g17 floats: round-trip the compact form through Value.
    let compact = to_json_line(value)?;
    let v: serde_json::Value = serde_json::from_str(&compact).map_err(|e| Error::Serialize(e.to_string()))?;
    let mut buf = Vec::new();
    let fmt = PrettyG17(serde_json::ser::PrettyFormatter::new());
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
    v.serialize(&mut ser).map_err(|e| Error::Serialize(e.to_string()))?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

struct PrettyG17<'a>(serde_json::ser::PrettyFormatter<'a>);

impl serde_json::ser::Formatter for PrettyG17<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        writer.write_all(fmt_g17(value).as_bytes())
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// One line of `metrics.jsonl`. Every key is present on every line; fields
/// that do not apply to the mode are `null` or empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub run_id: String,
    pub mode: String,
    pub epoch: usize,
    pub learning_rate: f64,
    /// Factor in force for single-model runs when it is row-independent.
    pub a: Option<f64>,
    pub mu_before: Option<f64>,
    pub mu_after: Option<f64>,
    pub factors: Vec<f64>,
    pub candidate_losses: Vec<f64>,
    pub candidate_rewards: Vec<f64>,
    pub normalized_rewards: Vec<f64>,
    pub winner: Option<usize>,
    /// Mean training loss of the epoch (the winner's, for search).
    pub mean_loss: f64,
    /// Validation score of the model carried into the next epoch.
    pub reward: f64,
}

impl MetricRecord {
    pub fn from_epoch(run_id: &str, mode: &str, r: &EpochRecord) -> Self {
        MetricRecord {
            run_id: run_id.to_owned(),
            mode: mode.to_owned(),
            epoch: r.epoch,
            learning_rate: r.learning_rate,
            a: r.a,
            mu_before: None,
            mu_after: None,
            factors: Vec::new(),
            candidate_losses: Vec::new(),
            candidate_rewards: Vec::new(),
            normalized_rewards: Vec::new(),
            winner: None,
            mean_loss: r.mean_loss,
            reward: r.reward,
        }
    }

    pub fn from_search(run_id: &str, r: &SearchEpochRecord) -> Self {
        let w = &r.candidates[r.winner];
        MetricRecord {
            run_id: run_id.to_owned(),
            mode: "search".to_owned(),
            epoch: r.epoch,
            learning_rate: r.learning_rate,
            a: None,
            mu_before: Some(r.mu_before),
            mu_after: Some(r.mu_after),
            factors: r.candidates.iter().map(|c| c.factor).collect(),
            candidate_losses: r.candidates.iter().map(|c| c.mean_loss).collect(),
            candidate_rewards: r.candidates.iter().map(|c| c.raw_reward).collect(),
            normalized_rewards: r.candidates.iter().map(|c| c.normalized_reward).collect(),
            winner: Some(r.winner),
            mean_loss: w.mean_loss,
            reward: w.raw_reward,
        }
    }
}

/// Wall-clock time per epoch, kept out of `metrics.jsonl` so that file stays
/// byte-reproducible.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub run_id: String,
    pub epoch: usize,
    pub seconds: f64,
}

/// Append-only JSON Lines writer; each line is flushed before the next epoch.
pub struct JsonlWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl JsonlWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
        Ok(JsonlWriter {
            path: path.to_owned(),
            out: BufWriter::new(file),
        })
    }

    pub fn append<T: Serialize>(&mut self, record: &T) -> Result<()> {
        let line = to_json_line(record)?;
        writeln!(self.out, "{line}")
            .and_then(|_| self.out.flush())
            .map_err(|e| Error::io(format!("writing {}", self.path.display()), e))
    }
}

/// Reads every line of a metrics file.
pub fn read_metrics(path: &Path) -> Result<Vec<MetricRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| Error::Parse {
                path: path.to_owned(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_use_seventeen_digits() {
        let line = to_json_line(&serde_json::json!({"x": 0.1, "y": 1.0, "z": -0.0, "n": f64::NAN})).unwrap();
        assert_eq!(line, r#"{"n":null,"x":0.10000000000000001,"y":1,"z":-0}"#);
        let back: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(back["x"].as_f64(), Some(0.1));
    }

    #[test]
    fn pretty_keeps_g17() {
        let s = to_json_pretty(&serde_json::json!({"v": [0.1]})).unwrap();
        assert!(s.contains("0.10000000000000001"));
        assert!(s.contains('\n'));
    }

    #[test]
    fn records_round_trip_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        let rec = MetricRecord::from_epoch(
            "train-fixed-1",
            "train-fixed",
            &EpochRecord {
                epoch: 0,
                learning_rate: 0.1,
                a: Some(0.0),
                mean_loss: 2.5,
                reward: 0.75,
            },
        );
        let mut w = JsonlWriter::create(&path).unwrap();
        w.append(&rec).unwrap();
        w.append(&rec).unwrap();
        drop(w);
        assert_eq!(read_metrics(&path).unwrap(), vec![rec.clone(), rec]);
        let text = std::fs::read_to_string(&path).unwrap();
        let keys = serde_json::from_str::<serde_json::Value>(text.lines().next().unwrap()).unwrap();
        assert_eq!(keys.as_object().unwrap().len(), 14);
    }
}
