//! Non-convex training curve: a one-hidden-layer tanh MLP on Gaussian blobs
//! split Dir(0.3) over sixteen clients. Prints the running average of
//! `‖∇f(x̄^t)‖²` at a few horizons, which should not increase.
//!
//! ```text
//! cargo run --release --example gradient_decay -- [seed] [rounds]
//! ```

use dfedsgpsm::config::{AlgorithmKind, ExperimentConfig};
use dfedsgpsm::models::ModelKind;
use dfedsgpsm::{run_experiment, Result};

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(0, |a| a.parse().expect("seed"));
    let rounds: usize = args.next().map_or(400, |a| a.parse().expect("rounds"));

    let cfg = ExperimentConfig {
        algorithm: AlgorithmKind::DFedSgpsm,
        clients: 16,
        rounds,
        seed,
        model: ModelKind::Mlp,
        hidden: 16,
        dirichlet_alpha: Some(0.3),
        ..Default::default()
    };
    let series = run_experiment(&cfg)?;

    let mut running = 0.0;
    let mut checkpoints = vec![50, 100, 200, 400, rounds];
    checkpoints.retain(|&c| c <= rounds);
    checkpoints.dedup();
    println!(
        "{:>6} {:>14} {:>14} {:>10}",
        "T", "avg |grad|^2", "|grad|^2", "test acc"
    );
    for (t, m) in series.iter().enumerate() {
        running += m.grad_norm_sq;
        let horizon = t + 1;
        if checkpoints.contains(&horizon) {
            println!(
                "{:>6} {:>14.6e} {:>14.6e} {:>10.4}",
                horizon,
                running / horizon as f64,
                m.grad_norm_sq,
                m.test_accuracy.unwrap_or(f64::NAN)
            );
        }
    }
    Ok(())
}
