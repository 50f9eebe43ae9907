//! Pure Push-Sum mixing on a time-varying directed graph.
//!
//! With the learning rate at zero, clients only gossip. The weights `w_i`
//! drift away from 1 because the graph is not doubly stochastic, yet the
//! de-biased values `x_i / w_i` still converge to the initial average.

use dfedsgpsm::config::AlgorithmKind;
use dfedsgpsm::math::SeededRng;
use dfedsgpsm::models::{LocalObjective, Objective};
use dfedsgpsm::protocol::{consensus_error, run_round, ClientState, CommRound, RoundContext, RoundHyper};
use dfedsgpsm::topology::{gen_round, Generator, NeighborSelection, TopologySchedule};
use dfedsgpsm::{ParamVector, Result};

fn main() -> Result<()> {
    let n = 8;
    let values: Vec<f64> = (0..n).map(|i| (i * i) as f64).collect();
    let average = values.iter().sum::<f64>() / n as f64;

    // Objectives are irrelevant at lr = 0 but fix the parameter dimension.
    let objectives: Vec<Box<dyn Objective>> = (0..n)
        .map(|_| Box::new(LocalObjective::quadratic(ParamVector::zeros(1))) as Box<dyn Objective>)
        .collect();
    let mut states: Vec<ClientState> = values
        .iter()
        .enumerate()
        .map(|(i, &v)| Ok(ClientState::new(i, ParamVector::new(vec![v])?)))
        .collect::<Result<_>>()?;

    let schedule = TopologySchedule {
        n,
        generator: Generator::RandomOut { k_out: 1 },
        time_varying: true,
        window: 4,
    };
    let hyper = RoundHyper {
        lr: 0.0,
        rho: 0.0,
        alpha: 0.0,
        steps: vec![1; n],
        batch_size: 1,
        global_lr: 1.0,
    };
    let rng = SeededRng::new(7);
    println!("target average {average}");
    for t in 0..40 {
        let graph = gen_round(&schedule, t, rng, NeighborSelection::Uniform)?;
        let ctx = RoundContext {
            round: t,
            rng,
            objectives: &objectives,
        };
        states = run_round(
            &states,
            AlgorithmKind::DFedSgpsm,
            &CommRound::Graph(graph),
            &hyper,
            &ctx,
        )?
        .states;
        if t % 5 == 4 {
            let w: Vec<String> = states.iter().map(|s| format!("{:.3}", s.w)).collect();
            println!(
                "round {:>2}  consensus {:.3e}  z_0 {:.6}  w [{}]",
                t + 1,
                consensus_error(&states),
                states[0].z()[0],
                w.join(" ")
            );
        }
    }
    Ok(())
}
