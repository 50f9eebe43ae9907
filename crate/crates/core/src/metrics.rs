//! Per-round metrics, their CSV persistence, and run manifests.

use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::math::ParamVector;
use crate::models::{Classifier, Objective};
use crate::protocol::ClientState;

pub const METRICS_FILE: &str = "metrics.csv";
pub const MANIFEST_FILE: &str = "manifest.toml";

/// One CSV row. Columns appear in field order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub round: usize,
    /// Mean full-shard client loss at `x̄`.
    pub train_loss: f64,
    /// Held-out accuracy of `x̄`; empty for tasks without a test set.
    pub test_accuracy: Option<f64>,
    /// `‖(1/n) Σ ∇f_i(x̄)‖²` over full shards.
    pub grad_norm_sq: f64,
    pub consensus_error: f64,
    pub min_w: f64,
    pub max_w: f64,
    pub wall_ms: u64,
    pub test_loss: Option<f64>,
    pub w_mass_residual: f64,
    pub x_mass_residual: f64,
}

/// Held-out evaluation model and data; both absent for synthetic objectives.
#[derive(Debug, Clone, Default)]
pub struct Evaluator {
    pub model: Option<Classifier>,
    pub test: Option<Arc<Dataset>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalEval {
    pub x_bar: ParamVector,
    pub train_loss: f64,
    pub grad_norm_sq: f64,
    pub test_loss: Option<f64>,
    pub test_accuracy: Option<f64>,
}

/// Evaluates `x̄ = (1/n) Σ x_i` (the raw iterates, not the de-biased ones).
pub fn evaluate_global(
    states: &[ClientState],
    objectives: &[Box<dyn Objective>],
    evaluator: &Evaluator,
) -> Result<GlobalEval> {
    if states.len() != objectives.len() {
        return Err(Error::InvalidArgument(format!(
            "{} states for {} objectives",
            states.len(),
            objectives.len()
        )));
    }
    let x_bar = ParamVector::mean(states.iter().map(|s| &s.x))?;
    let per_client: Vec<(f64, ParamVector)> = objectives
        .par_iter()
        .map(|o| o.full_loss_and_gradient(&x_bar))
        .collect::<Result<_>>()?;
    let n = per_client.len() as f64;
    let train_loss = per_client.iter().map(|(l, _)| l).sum::<f64>() / n;
    let grad = ParamVector::mean(per_client.iter().map(|(_, g)| g))?;
    let (test_loss, test_accuracy) = match (&evaluator.model, &evaluator.test) {
        (Some(model), Some(test)) => {
            let (loss, acc) = model.evaluate(&x_bar, test)?;
            (Some(loss), Some(acc))
        }
        _ => (None, None),
    };
    Ok(GlobalEval {
        train_loss,
        grad_norm_sq: grad.squared_norm(),
        x_bar,
        test_loss,
        test_accuracy,
    })
}

/// Append-only CSV writer enforcing consecutive rounds.
pub struct MetricsSink {
    writer: csv::Writer<File>,
    last: Option<usize>,
}

impl MetricsSink {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        Ok(MetricsSink {
            writer: csv::Writer::from_path(path)?,
            last: None,
        })
    }

    pub fn append(&mut self, m: &RoundMetrics) -> Result<()> {
        let expected = self.last.map_or(0, |l| l + 1);
        if m.round != expected {
            return Err(Error::OutOfOrder {
                got: m.round as u64,
                last: self.last.map(|l| l as u64),
            });
        }
        self.writer.serialize(m)?;
        self.writer.flush()?;
        self.last = Some(m.round);
        Ok(())
    }
}

pub fn append_metrics(sink: &mut MetricsSink, m: &RoundMetrics) -> Result<()> {
    sink.append(m)
}

pub fn read_metrics(path: impl AsRef<Path>) -> Result<Vec<RoundMetrics>> {
    let mut reader = csv::Reader::from_path(path)?;
    Ok(reader.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Provenance written next to the metrics before round 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub seed: u64,
    pub code_version: String,
    /// Seconds since the Unix epoch.
    pub started_at: u64,
    pub config: ExperimentConfig,
}

impl RunManifest {
    pub fn new(config: ExperimentConfig) -> Self {
        RunManifest {
            seed: config.seed,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            started_at: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            config,
        }
    }

    /// Writes `manifest.toml` into `dir`, creating it as needed.
    pub fn write(&self, dir: impl AsRef<Path>, overwrite: bool) -> Result<PathBuf> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let path = dir.join(MANIFEST_FILE);
        if path.exists() && !overwrite {
            return Err(Error::RunDirectoryInUse(dir.to_path_buf()));
        }
        let text = toml::to_string(self).map_err(|e| Error::Config(e.to_string()))?;
        fs::write(&path, text)?;
        Ok(path)
    }

    pub fn read(dir: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(dir.as_ref().join(MANIFEST_FILE))?;
        toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))
    }
}
