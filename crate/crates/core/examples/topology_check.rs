//! Draws time-varying random out-neighbor graphs and checks that every
//! window of `B` consecutive rounds has a strongly connected union.

use dfedsgpsm::math::SeededRng;
use dfedsgpsm::topology::{check_b_connectivity, gen_round, Generator, NeighborSelection, TopologySchedule};
use dfedsgpsm::Result;

fn main() -> Result<()> {
    let n = 16;
    for k_out in [1, 2, 4] {
        let sched = TopologySchedule {
            n,
            generator: Generator::RandomOut { k_out },
            time_varying: true,
            window: 1,
        };
        let rounds = (0..200)
            .map(|t| gen_round(&sched, t, SeededRng::new(0), NeighborSelection::Uniform))
            .collect::<Result<Vec<_>>>()?;
        let residual = rounds.iter().map(|g| g.column_residual()).fold(0.0, f64::max);
        // Smallest window length that keeps every window strongly connected.
        let smallest =
            (1..=rounds.len()).find(|&b| check_b_connectivity(&rounds, b).map(|c| c.connected).unwrap_or(false));
        println!(
            "k_out {k_out}: max column residual {residual:.1e}, smallest connected window B = {}",
            smallest.map_or("none".to_string(), |b| b.to_string())
        );
    }
    Ok(())
}
