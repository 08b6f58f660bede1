//! Dataset ingestion, artifact persistence and run configuration.
//!
//! Datasets and per-prompt artifacts are JSON lines; tables, labels and
//! reports are single JSON documents. Reals are written in shortest
//! round-trip form, so reading an artifact back reproduces it exactly.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::calibration::{CalibrationSizeSpec, LabelingConfig, ScanStrategy};
use crate::conformal::DetectorConfig;
use crate::error::{Error, Result};
use crate::eval::EvalConfig;
use crate::numerics::RngSeed;
use crate::scores::{GenerationRecord, ScoreConfig};

/// Environment variable naming a default `--config` file.
pub const CONFIG_ENV: &str = "HALLUDETECT_CONFIG";

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

/// Parses every non-blank line of a JSON-lines file.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (idx, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push(item);
    }
    Ok(out)
}

/// Reads and validates a dataset of generation records.
pub fn read_dataset(path: &Path) -> Result<Vec<GenerationRecord>> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let where_ = format!("{}:{}", path.display(), idx + 1);
        let record: GenerationRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        record
            .validate()
            .map_err(|e| Error::Validation(format!("{where_}: {e}")))?;
        if !seen.insert(record.id.clone()) {
            return Err(Error::Validation(format!("{where_}: duplicate record id `{}`", record.id)));
        }
        records.push(record);
    }
    Ok(records)
}

fn serialization_error(e: serde_json::Error) -> Error {
    if e.is_io() {
        Error::io("<output>", std::io::Error::other(e))
    } else {
        Error::Validation(format!("serialization failed: {e}"))
    }
}

pub fn write_jsonl<T: Serialize>(writer: &mut (impl Write + ?Sized), items: &[T]) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut *writer, item).map_err(serialization_error)?;
        writer
            .write_all(b"\n")
            .map_err(|e| Error::io("<output>", e))?;
    }
    Ok(())
}

pub fn write_json<T: Serialize>(writer: &mut (impl Write + ?Sized), value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *writer, value).map_err(serialization_error)?;
    writer
        .write_all(b"\n")
        .map_err(|e| Error::io("<output>", e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_reader(open(path)?).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })
}

/// Writes to `path`, or to standard output when `path` is `None`.
pub fn with_output(path: Option<&Path>, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| Error::io(p, e))?;
            let mut w = BufWriter::new(file);
            body(&mut w)?;
            w.flush().map_err(|e| Error::io(p, e))
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            body(&mut w)?;
            w.flush().map_err(|e| Error::io("<stdout>", e))
        }
    }
}

/// Parameters of the `calsize` subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalsizeConfig {
    pub alpha: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub k: usize,
    pub n_max: usize,
    pub strategy: ScanStrategy,
}

impl Default for CalsizeConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            epsilon: 0.1,
            delta: 0.1,
            k: 4,
            n_max: 1_000_000,
            strategy: ScanStrategy::default(),
        }
    }
}

impl CalsizeConfig {
    pub fn spec(&self) -> CalibrationSizeSpec {
        CalibrationSizeSpec {
            alpha: self.alpha,
            epsilon: self.epsilon,
            delta: self.delta,
            k: self.k,
        }
    }
}

/// Every tunable of a run in one JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scores: ScoreConfig,
    pub detector: DetectorConfig,
    pub labeling: LabelingConfig,
    pub evaluation: EvalConfig,
    pub calsize: CalsizeConfig,
    pub seed: u64,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: RunConfig = read_json(path)?;
        cfg.labeling.validate()?;
        cfg.scores.validate()?;
        Ok(cfg)
    }

    pub fn seed(&self) -> RngSeed {
        RngSeed(self.seed)
    }

    /// Score configuration with the run seed attached.
    pub fn score_config(&self) -> ScoreConfig {
        ScoreConfig {
            seed: self.seed(),
            ..self.scores.clone()
        }
    }
}
