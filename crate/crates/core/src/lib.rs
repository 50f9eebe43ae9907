//! Deterministic simulator for decentralized federated learning over
//! time-varying directed graphs.
//!
//! Clients run `K` local steps of sharpness-aware momentum SGD on de-biased
//! Push-Sum iterates, then push weighted copies of `(x, w)` to their
//! out-neighbors. Baselines (OSGP, SGP, D-PSGD, DFedAvg, DFedAvgM, DFedSAM,
//! FedAvg) share the same engine.
//!
//! Every random draw comes from a stream keyed by `(seed, domain, client,
//! round, iteration)`, so a run is reproducible bit for bit whatever the
//! worker count.
//!
//! The `examples/` directory walks through each capability:
//! `quadratic_consensus`, `push_sum_mixing`, `topology_check`,
//! `dirichlet_partition`, `gradient_check`, `mnist_ablation`,
//! `neighbor_selection`, `baselines_comparison` and `gradient_decay`.

pub mod config;
pub mod data;
pub mod error;
pub mod local;
pub mod math;
pub mod metrics;
pub mod models;
pub mod protocol;
pub mod topology;
pub mod verify;

pub use config::{AlgorithmKind, ExperimentConfig};
pub use error::{Error, Result};
pub use math::{ParamVector, SeededRng};
pub use metrics::RoundMetrics;
pub use protocol::{run_experiment, ClientState, Simulation};
