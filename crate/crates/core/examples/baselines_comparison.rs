//! Every algorithm on the same synthetic non-IID task, with directed graphs
//! for the Push-Sum family, Metropolis–Hastings weights for the symmetric
//! family, and a sampled server for FedAvg.
//!
//! ```text
//! cargo run --release --example baselines_comparison -- [rounds] [out-dir]
//! ```

use std::path::PathBuf;

use dfedsgpsm::config::{AlgorithmKind, ExperimentConfig};
use dfedsgpsm::protocol::{run_experiment_with, Mixing};
use dfedsgpsm::Result;

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let rounds: usize = args.next().map_or(100, |a| a.parse().expect("rounds"));
    let out: Option<PathBuf> = args.next().map(PathBuf::from);

    println!(
        "{:<12} {:>10} {:>10} {:>12}",
        "algorithm", "test acc", "loss", "consensus"
    );
    for algorithm in AlgorithmKind::ALL {
        let cfg = ExperimentConfig {
            algorithm,
            rounds,
            rho: if algorithm.mixing() == Mixing::Symmetric {
                0.25
            } else {
                0.1
            },
            local_steps: None,
            // SGP and D-PSGD override this with a single step.
            local_epochs: Some(5),
            out: out.as_ref().map(|d| d.join(algorithm.name())),
            ..Default::default()
        };
        let series = run_experiment_with(&cfg, true)?;
        let last = series.last().expect("round-0 row");
        println!(
            "{:<12} {:>10.4} {:>10.4} {:>12.3e}",
            algorithm.name(),
            last.test_accuracy.unwrap_or(f64::NAN),
            last.train_loss,
            last.consensus_error
        );
    }
    Ok(())
}
