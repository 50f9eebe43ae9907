//! Loss-aware out-neighbor selection: clients whose losses differ most from
//! the sender's are the likeliest receivers.

use dfedsgpsm::math::SeededRng;
use dfedsgpsm::topology::{gen_round, neighbor_select_probs, Generator, NeighborSelection, TopologySchedule};
use dfedsgpsm::Result;

fn main() -> Result<()> {
    let losses = [0.2, 0.25, 0.3, 1.1, 2.4, 0.22];
    let probs = neighbor_select_probs(&losses, 0)?;
    println!("losses            {losses:?}");
    let shown: Vec<String> = probs.iter().map(|p| format!("{p:.3}")).collect();
    println!("client 0 selects  [{}]", shown.join(", "));

    // How often each client is chosen as a receiver by anyone, over many rounds.
    let sched = TopologySchedule {
        n: losses.len(),
        generator: Generator::RandomOut { k_out: 1 },
        time_varying: true,
        window: 1,
    };
    let mut uniform = vec![0usize; losses.len()];
    let mut aware = vec![0usize; losses.len()];
    for t in 0..2000 {
        for (counts, sel) in [
            (&mut uniform, NeighborSelection::Uniform),
            (&mut aware, NeighborSelection::LossAware(&losses)),
        ] {
            let g = gen_round(&sched, t, SeededRng::new(1), sel)?;
            for i in 0..g.n() {
                for j in g.out_neighbors(i) {
                    if j != i {
                        counts[j] += 1;
                    }
                }
            }
        }
    }
    println!("receiver counts, uniform     {uniform:?}");
    println!("receiver counts, loss-aware  {aware:?}");
    Ok(())
}
