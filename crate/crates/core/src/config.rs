//! Experiment configuration, loadable from TOML.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ModelKind;
use crate::protocol::Mixing;
use crate::topology::{default_k_out, Generator};

/// Every algorithm the simulator can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AlgorithmKind {
    #[serde(rename = "dfedsgpsm")]
    DFedSgpsm,
    #[serde(rename = "dfedsgpsm-s")]
    DFedSgpsmS,
    #[serde(rename = "osgp")]
    Osgp,
    #[serde(rename = "sgp")]
    Sgp,
    #[serde(rename = "d-psgd")]
    DPsgd,
    #[serde(rename = "dfedavg")]
    DFedAvg,
    #[serde(rename = "dfedavgm")]
    DFedAvgM,
    #[serde(rename = "dfedsam")]
    DFedSam,
    #[serde(rename = "fedavg")]
    FedAvg,
}

impl AlgorithmKind {
    pub const ALL: [AlgorithmKind; 9] = [
        AlgorithmKind::DFedSgpsm,
        AlgorithmKind::DFedSgpsmS,
        AlgorithmKind::Osgp,
        AlgorithmKind::Sgp,
        AlgorithmKind::DPsgd,
        AlgorithmKind::DFedAvg,
        AlgorithmKind::DFedAvgM,
        AlgorithmKind::DFedSam,
        AlgorithmKind::FedAvg,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmKind::DFedSgpsm => "dfedsgpsm",
            AlgorithmKind::DFedSgpsmS => "dfedsgpsm-s",
            AlgorithmKind::Osgp => "osgp",
            AlgorithmKind::Sgp => "sgp",
            AlgorithmKind::DPsgd => "d-psgd",
            AlgorithmKind::DFedAvg => "dfedavg",
            AlgorithmKind::DFedAvgM => "dfedavgm",
            AlgorithmKind::DFedSam => "dfedsam",
            AlgorithmKind::FedAvg => "fedavg",
        }
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlgorithmKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        AlgorithmKind::ALL
            .into_iter()
            .find(|a| a.name() == lower)
            .ok_or_else(|| {
                let names: Vec<_> = AlgorithmKind::ALL.iter().map(|a| a.name()).collect();
                Error::Config(format!("unknown algorithm `{s}` (one of {})", names.join(", ")))
            })
    }
}

/// Graph shape; the directed or symmetric variant follows from the algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopologyKind {
    Ring,
    Random,
    Complete,
}

impl FromStr for TopologyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ring" => Ok(TopologyKind::Ring),
            "random" => Ok(TopologyKind::Random),
            "complete" => Ok(TopologyKind::Complete),
            _ => Err(Error::Config(format!(
                "unknown topology `{s}` (ring, random, complete)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataSource {
    Synthetic,
    Idx,
}

impl FromStr for DataSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "synthetic" => Ok(DataSource::Synthetic),
            "idx" => Ok(DataSource::Idx),
            _ => Err(Error::Config(format!("unknown data source `{s}` (synthetic, idx)"))),
        }
    }
}

/// What to do when a B-round window is not strongly connected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConnectivityPolicy {
    Abort,
    Ignore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct SyntheticConfig {
    pub classes: usize,
    pub per_class: usize,
    pub features: usize,
    pub separation: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            classes: 4,
            per_class: 200,
            features: 8,
            separation: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct QuadraticConfig {
    pub dim: usize,
    /// Standard deviation of the client centers around the origin.
    pub spread: f64,
}

impl Default for QuadraticConfig {
    fn default() -> Self {
        QuadraticConfig { dim: 4, spread: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ExperimentConfig {
    pub algorithm: AlgorithmKind,
    pub clients: usize,
    pub rounds: usize,
    pub seed: u64,

    pub topology: TopologyKind,
    /// Out-degree for random graphs; `max(1, clients/10)` when unset.
    pub k_out: Option<usize>,
    pub time_varying: bool,
    /// Connectivity window `B`.
    pub window: usize,
    pub connectivity: ConnectivityPolicy,

    pub lr: f64,
    /// Per-round multiplicative learning-rate decay.
    pub lr_decay: f64,
    pub rho: f64,
    pub alpha: f64,
    /// Local minibatch iterations `K`. Mutually exclusive with `local-epochs`.
    pub local_steps: Option<usize>,
    /// Local passes over the shard; `K = epochs · ceil(shard / batch)` per client.
    pub local_epochs: Option<usize>,
    pub batch_size: usize,
    /// FedAvg client sampling ratio.
    pub participation: f64,
    /// FedAvg server step size.
    pub global_lr: f64,

    pub model: ModelKind,
    /// MLP hidden width.
    pub hidden: usize,
    pub data: DataSource,
    pub synthetic: SyntheticConfig,
    pub idx_images: Option<PathBuf>,
    pub idx_labels: Option<PathBuf>,
    pub limit: usize,
    /// Dirichlet concentration for the non-IID split; unset means IID.
    pub dirichlet_alpha: Option<f64>,
    pub quadratic: QuadraticConfig,

    /// Worker threads for client updates; 0 picks the rayon default.
    pub workers: usize,
    /// Fill the `wall_ms` column. Off by default so metrics files are reproducible.
    pub record_wall_time: bool,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            algorithm: AlgorithmKind::DFedSgpsm,
            clients: 16,
            rounds: 100,
            seed: 0,
            topology: TopologyKind::Random,
            k_out: None,
            time_varying: true,
            window: 10,
            connectivity: ConnectivityPolicy::Abort,
            lr: 0.1,
            lr_decay: 0.998,
            rho: 0.1,
            alpha: 0.9,
            local_steps: Some(5),
            local_epochs: None,
            batch_size: 32,
            participation: 0.1,
            global_lr: 1.0,
            model: ModelKind::Logistic,
            hidden: 16,
            data: DataSource::Synthetic,
            synthetic: SyntheticConfig::default(),
            idx_images: None,
            idx_labels: None,
            limit: 4000,
            dirichlet_alpha: Some(0.3),
            quadratic: QuadraticConfig::default(),
            workers: 0,
            record_wall_time: false,
            out: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn k_out(&self) -> usize {
        self.k_out.unwrap_or_else(|| default_k_out(self.clients))
    }

    /// Learning rate in round `t`: `lr · decay^t`.
    pub fn lr_at(&self, t: usize) -> f64 {
        self.lr * self.lr_decay.powi(t as i32)
    }

    /// Concrete graph generator for this algorithm's topology family.
    pub fn generator(&self) -> Generator {
        let symmetric = self.algorithm.mixing() == Mixing::Symmetric;
        match (self.topology, symmetric) {
            (TopologyKind::Ring, false) => Generator::DirectedRing,
            (TopologyKind::Ring, true) => Generator::UndirectedRing,
            (TopologyKind::Random, false) => Generator::RandomOut { k_out: self.k_out() },
            (TopologyKind::Random, true) => Generator::RandomSymmetric { k: self.k_out() },
            (TopologyKind::Complete, _) => Generator::Complete,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.clients == 0 {
            return bad("clients must be >= 1".into());
        }
        if self.topology == TopologyKind::Random
            && self.algorithm != AlgorithmKind::FedAvg
            && !(1..self.clients).contains(&self.k_out())
        {
            return bad(format!(
                "k-out {} must lie in [1, {}]",
                self.k_out(),
                self.clients.saturating_sub(1)
            ));
        }
        if self.window == 0 {
            return bad("window must be >= 1".into());
        }
        if !(self.lr >= 0.0) || !(self.lr_decay > 0.0) {
            return bad("lr must be >= 0 and lr-decay > 0".into());
        }
        if !(self.rho >= 0.0) {
            return bad("rho must be >= 0".into());
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return bad("alpha (momentum) must lie in [0, 1)".into());
        }
        match (self.local_steps, self.local_epochs) {
            (Some(_), Some(_)) => return bad("set only one of local-steps and local-epochs".into()),
            (Some(0), _) | (_, Some(0)) => return bad("local steps/epochs must be >= 1".into()),
            _ => {}
        }
        if self.batch_size == 0 {
            return bad("batch-size must be >= 1".into());
        }
        if !(self.participation > 0.0 && self.participation <= 1.0) {
            return bad("participation must lie in (0, 1]".into());
        }
        if let Some(a) = self.dirichlet_alpha {
            if !(a > 0.0) {
                return bad("dirichlet-alpha must be > 0".into());
            }
        }
        if self.model != ModelKind::Quadratic && self.data == DataSource::Idx {
            if self.idx_images.is_none() || self.idx_labels.is_none() {
                return bad("idx data needs idx-images and idx-labels".into());
            }
            if self.limit == 0 {
                return bad("limit must be >= 1".into());
            }
        }
        if self.model == ModelKind::Mlp && self.hidden == 0 {
            return bad("hidden must be >= 1".into());
        }
        Ok(())
    }

    /// Applies a `key=value` override using the TOML key names.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let mut table: toml::Table =
            toml::from_str(&self.to_toml_string()?).map_err(|e| Error::Config(e.to_string()))?;
        let parsed: toml::Value = match toml::from_str::<toml::Table>(&format!("v = {value}")) {
            Ok(mut t) => t.remove("v").expect("key v"),
            Err(_) => toml::Value::String(value.to_string()),
        };
        let mut slot = &mut table;
        let mut parts: Vec<&str> = key.split('.').collect();
        let last = parts.pop().expect("split yields one part");
        for p in parts {
            slot = slot
                .entry(p)
                .or_insert_with(|| toml::Value::Table(Default::default()))
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("`{p}` is not a table")))?;
        }
        slot.insert(last.to_string(), parsed);
        let text = toml::to_string(&table).map_err(|e| Error::Config(e.to_string()))?;
        *self = Self::from_toml_str(&text)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_toml_fills_defaults() {
        let cfg =
            ExperimentConfig::from_toml_str("algorithm = \"osgp\"\nclients = 8\n[synthetic]\nclasses = 3\n").unwrap();
        assert_eq!(cfg.algorithm, AlgorithmKind::Osgp);
        assert_eq!(cfg.synthetic.classes, 3);
        assert_eq!(cfg.synthetic.per_class, 200);
        assert_eq!(cfg.k_out(), 1);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ExperimentConfig::from_toml_str("clientz = 3").is_err());
    }

    #[test]
    fn overrides() {
        let mut cfg = ExperimentConfig::default();
        cfg.set("rho", "0.25").unwrap();
        cfg.set("algorithm", "dfedsam").unwrap();
        cfg.set("synthetic.classes", "6").unwrap();
        cfg.set("topology", "ring").unwrap();
        assert_eq!(cfg.rho, 0.25);
        assert_eq!(cfg.algorithm, AlgorithmKind::DFedSam);
        assert_eq!(cfg.synthetic.classes, 6);
        assert_eq!(cfg.generator(), Generator::UndirectedRing);
        assert!(cfg.set("alpha", "1.5").is_err());
    }

    #[test]
    fn k_out_default_scales() {
        let mut cfg = ExperimentConfig {
            clients: 100,
            ..Default::default()
        };
        assert_eq!(cfg.k_out(), 10);
        cfg.clients = 7;
        assert_eq!(cfg.k_out(), 1);
    }

    #[test]
    fn algorithm_names_parse() {
        for a in AlgorithmKind::ALL {
            assert_eq!(a.name().parse::<AlgorithmKind>().unwrap(), a);
        }
        assert!("sgd".parse::<AlgorithmKind>().is_err());
    }

    #[test]
    fn lr_decays_geometrically() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.lr_at(0), 0.1);
        assert!((cfg.lr_at(2) - 0.1 * 0.998 * 0.998).abs() < 1e-17);
    }
}
