//! Compares analytic gradients of every model against central finite
//! differences at random points.

use std::sync::Arc;

use dfedsgpsm::data::make_synthetic;
use dfedsgpsm::math::{finite_diff_grad, SeededRng, FD_STEP};
use dfedsgpsm::models::{Classifier, LocalObjective, Minibatch, Objective};
use dfedsgpsm::{ParamVector, Result};
use rand_distr::{Distribution, StandardNormal};

fn main() -> Result<()> {
    let rng = SeededRng::new(11);
    let data = Arc::new(make_synthetic(3, 30, 5, 2.0, rng)?.train);
    let shard: Vec<usize> = (0..data.len()).collect();
    let models: Vec<(&str, LocalObjective)> = vec![
        (
            "quadratic",
            LocalObjective::quadratic(ParamVector::new(vec![1.0, -2.0, 0.5, 3.0])?),
        ),
        (
            "logistic",
            LocalObjective::classifier(
                Classifier::Logistic {
                    features: 5,
                    classes: 3,
                },
                data.clone(),
                shard.clone(),
            )?,
        ),
        (
            "mlp",
            LocalObjective::classifier(
                Classifier::Mlp {
                    features: 5,
                    hidden: 7,
                    classes: 3,
                },
                data,
                shard,
            )?,
        ),
    ];
    let mut r = rng.aux(0);
    for (name, obj) in &models {
        let batch = Minibatch::full(obj.shard_len());
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let x: Vec<f64> = (0..obj.dim()).map(|_| StandardNormal.sample(&mut r)).collect();
            let x = ParamVector::new(x)?;
            let analytic = obj.gradient(&x, &batch)?;
            let numeric = finite_diff_grad(|p| obj.loss(p, &batch).unwrap_or(f64::NAN), &x, FD_STEP)?;
            worst = worst.max(analytic.sub(&numeric)?.l2_norm() / numeric.l2_norm().max(1e-8));
        }
        println!(
            "{name:<10} dim {:>3}  worst relative error over 20 points {worst:.2e}",
            obj.dim()
        );
    }
    Ok(())
}
