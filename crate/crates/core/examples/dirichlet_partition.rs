//! Label skew of Dirichlet partitions: the mean label entropy per client
//! drops as the concentration parameter shrinks.

use dfedsgpsm::data::{dirichlet_partition, iid_partition, make_synthetic, mean_label_entropy};
use dfedsgpsm::math::SeededRng;
use dfedsgpsm::Result;

fn main() -> Result<()> {
    let rng = SeededRng::new(3);
    let train = make_synthetic(10, 200, 10, 3.0, rng)?.train;
    let clients = 16;
    println!(
        "{} samples, {} classes, {clients} clients",
        train.len(),
        train.n_classes()
    );
    println!("max entropy ln(10) = {:.3}", (10f64).ln());

    let iid = iid_partition(&train, clients, rng)?;
    println!("IID       mean label entropy {:.3}", mean_label_entropy(&train, &iid));
    for alpha in [1.0, 0.6, 0.3, 0.1] {
        let p = dirichlet_partition(&train, clients, alpha, rng)?;
        let sizes: Vec<usize> = p.shards.iter().map(|s| s.len()).collect();
        println!(
            "Dir({alpha:<3}) mean label entropy {:.3}  shard sizes {:?}",
            mean_label_entropy(&train, &p),
            sizes
        );
    }
    Ok(())
}
