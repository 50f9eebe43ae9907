//! Local objectives `f_i` with analytic minibatch gradients.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::math::{Domain, ParamVector, SeededRng, StreamId};

/// Positions into a client's shard (`0..shard_len`), not dataset rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Minibatch {
    pub indices: Vec<usize>,
}

impl Minibatch {
    pub fn new(indices: Vec<usize>) -> Self {
        Minibatch { indices }
    }

    pub fn full(shard_len: usize) -> Self {
        Minibatch {
            indices: (0..shard_len).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// A differentiable per-client loss.
///
/// `gradient` must be the mean of per-sample gradients over the batch so that
/// uniformly sampled batches give an unbiased estimate of the full-shard gradient.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;

    fn shard_len(&self) -> usize;

    fn loss(&self, x: &ParamVector, batch: &Minibatch) -> Result<f64>;

    fn gradient(&self, x: &ParamVector, batch: &Minibatch) -> Result<ParamVector>;

    fn full_loss(&self, x: &ParamVector) -> Result<f64> {
        self.loss(x, &Minibatch::full(self.shard_len()))
    }

    fn full_gradient(&self, x: &ParamVector) -> Result<ParamVector> {
        self.gradient(x, &Minibatch::full(self.shard_len()))
    }

    /// Full-shard loss and gradient, in one pass where the model allows it.
    fn full_loss_and_gradient(&self, x: &ParamVector) -> Result<(f64, ParamVector)> {
        Ok((self.full_loss(x)?, self.full_gradient(x)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Quadratic,
    Logistic,
    Mlp,
}

/// Parameter layout of a classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classifier {
    /// Softmax regression; each class row is `features + 1` wide, bias last.
    Logistic { features: usize, classes: usize },
    /// One tanh hidden layer, softmax output. Layout `W1 | b1 | W2 | b2`.
    Mlp {
        features: usize,
        hidden: usize,
        classes: usize,
    },
}

impl Classifier {
    pub fn dim(&self) -> usize {
        match *self {
            Classifier::Logistic { features, classes } => classes * (features + 1),
            Classifier::Mlp {
                features,
                hidden,
                classes,
            } => hidden * features + hidden + classes * hidden + classes,
        }
    }

    fn features(&self) -> usize {
        match *self {
            Classifier::Logistic { features, .. } | Classifier::Mlp { features, .. } => features,
        }
    }

    fn classes(&self) -> usize {
        match *self {
            Classifier::Logistic { classes, .. } | Classifier::Mlp { classes, .. } => classes,
        }
    }

    /// Shared starting point. Logistic starts at zero; the MLP draws every
    /// weight and bias uniformly from `±1/√fan_in` on the client-0 init stream.
    pub fn init(&self, rng: SeededRng) -> ParamVector {
        match *self {
            Classifier::Logistic { .. } => ParamVector::zeros(self.dim()),
            Classifier::Mlp {
                features,
                hidden,
                classes,
            } => {
                let mut r = rng.stream(StreamId::new(Domain::Init, 0, 0, 0));
                let mut v = Vec::with_capacity(self.dim());
                let b1 = 1.0 / (features as f64).sqrt();
                let b2 = 1.0 / (hidden as f64).sqrt();
                for (count, bound) in [(hidden * features + hidden, b1), (classes * hidden + classes, b2)] {
                    v.extend((0..count).map(|_| r.random_range(-bound..bound)));
                }
                ParamVector::from_raw(v)
            }
        }
    }

    /// Writes the class logits for one input into `logits`; fills `hidden`
    /// with tanh activations for the MLP.
    fn forward(&self, x: &[f64], row: &[f64], hidden_out: &mut [f64], logits: &mut [f64]) {
        match *self {
            Classifier::Logistic { features, classes } => {
                let w = features + 1;
                for c in 0..classes {
                    let wc = &x[c * w..(c + 1) * w];
                    logits[c] = crate::math::dot(&wc[..features], row) + wc[features];
                }
            }
            Classifier::Mlp {
                features,
                hidden,
                classes,
            } => {
                let (w1, rest) = x.split_at(hidden * features);
                let (b1, rest) = rest.split_at(hidden);
                let (w2, b2) = rest.split_at(classes * hidden);
                for h in 0..hidden {
                    hidden_out[h] = (crate::math::dot(&w1[h * features..(h + 1) * features], row) + b1[h]).tanh();
                }
                for c in 0..classes {
                    logits[c] = crate::math::dot(&w2[c * hidden..(c + 1) * hidden], hidden_out) + b2[c];
                }
            }
        }
    }

    fn hidden_width(&self) -> usize {
        match *self {
            Classifier::Logistic { .. } => 0,
            Classifier::Mlp { hidden, .. } => hidden,
        }
    }

    /// Cross-entropy of one sample; accumulates `scale · ∇` into `grad` if given.
    fn sample_loss(
        &self,
        x: &[f64],
        row: &[f64],
        label: usize,
        scratch: &mut Scratch,
        grad: Option<(&mut [f64], f64)>,
    ) -> f64 {
        let Scratch { hidden, logits, delta } = scratch;
        self.forward(x, row, hidden, logits);
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let shifted_label = logits[label] - max;
        let mut sum = 0.0;
        for l in logits.iter_mut() {
            *l = (*l - max).exp();
            sum += *l;
        }
        // logits now hold unnormalized probabilities exp(l - max).
        let loss = sum.ln() - shifted_label;
        let Some((g, scale)) = grad else {
            return loss;
        };
        for c in 0..logits.len() {
            let p = logits[c] / sum;
            logits[c] = p - if c == label { 1.0 } else { 0.0 };
        }
        match *self {
            Classifier::Logistic { features, classes } => {
                let w = features + 1;
                for c in 0..classes {
                    let d = scale * logits[c];
                    if d == 0.0 {
                        continue;
                    }
                    let gc = &mut g[c * w..(c + 1) * w];
                    for (gk, rk) in gc[..features].iter_mut().zip(row) {
                        *gk += d * rk;
                    }
                    gc[features] += d;
                }
            }
            Classifier::Mlp {
                features,
                hidden: hw,
                classes,
            } => {
                let w2 = &x[hw * features + hw..hw * features + hw + classes * hw];
                for h in 0..hw {
                    let back: f64 = (0..classes).map(|c| w2[c * hw + h] * logits[c]).sum();
                    delta[h] = back * (1.0 - hidden[h] * hidden[h]);
                }
                let (gw1, rest) = g.split_at_mut(hw * features);
                let (gb1, rest) = rest.split_at_mut(hw);
                let (gw2, gb2) = rest.split_at_mut(classes * hw);
                for h in 0..hw {
                    let d = scale * delta[h];
                    for (gk, rk) in gw1[h * features..(h + 1) * features].iter_mut().zip(row) {
                        *gk += d * rk;
                    }
                    gb1[h] += d;
                }
                for c in 0..classes {
                    let d = scale * logits[c];
                    for (gk, hk) in gw2[c * hw..(c + 1) * hw].iter_mut().zip(hidden.iter()) {
                        *gk += d * hk;
                    }
                    gb2[c] += d;
                }
            }
        }
        loss
    }

    pub fn predict(&self, x: &ParamVector, row: &[f64]) -> usize {
        let mut scratch = Scratch::new(self);
        self.forward(x.as_slice(), row, &mut scratch.hidden, &mut scratch.logits);
        argmax(&scratch.logits)
    }

    /// Mean cross-entropy and top-1 accuracy over a whole dataset.
    pub fn evaluate(&self, x: &ParamVector, ds: &Dataset) -> Result<(f64, f64)> {
        if ds.is_empty() {
            return Err(Error::EmptyDataset("evaluation set".into()));
        }
        let mut scratch = Scratch::new(self);
        let mut loss = 0.0;
        let mut correct = 0usize;
        for i in 0..ds.len() {
            loss += self.sample_loss(x.as_slice(), ds.row(i), ds.label(i), &mut scratch, None);
            // sample_loss leaves exp(l - max) in logits; argmax is unchanged.
            if argmax(&scratch.logits) == ds.label(i) {
                correct += 1;
            }
        }
        Ok((loss / ds.len() as f64, correct as f64 / ds.len() as f64))
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

struct Scratch {
    hidden: Vec<f64>,
    logits: Vec<f64>,
    delta: Vec<f64>,
}

impl Scratch {
    fn new(model: &Classifier) -> Self {
        Scratch {
            hidden: vec![0.0; model.hidden_width()],
            logits: vec![0.0; model.classes()],
            delta: vec![0.0; model.hidden_width()],
        }
    }
}

/// One client's objective: a quadratic bowl or a classifier over a data shard.
#[derive(Debug, Clone)]
pub enum LocalObjective {
    /// `½‖x − c‖²`; the shard is the single point `c`.
    Quadratic { center: ParamVector },
    Classifier {
        model: Classifier,
        data: Arc<Dataset>,
        /// Dataset rows owned by this client.
        shard: Vec<usize>,
    },
}

impl LocalObjective {
    pub fn quadratic(center: ParamVector) -> Self {
        LocalObjective::Quadratic { center }
    }

    pub fn classifier(model: Classifier, data: Arc<Dataset>, shard: Vec<usize>) -> Result<Self> {
        if data.n_features() != model.features() {
            return Err(Error::DimensionMismatch {
                left: model.features(),
                right: data.n_features(),
            });
        }
        if data.n_classes() > model.classes() {
            return Err(Error::InvalidArgument(format!(
                "dataset has {} classes, model only {}",
                data.n_classes(),
                model.classes()
            )));
        }
        if shard.is_empty() {
            return Err(Error::EmptyDataset("client shard".into()));
        }
        if let Some(&bad) = shard.iter().find(|&&i| i >= data.len()) {
            return Err(Error::SampleOutOfRange {
                index: bad,
                len: data.len(),
            });
        }
        Ok(LocalObjective::Classifier { model, data, shard })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            LocalObjective::Quadratic { .. } => ModelKind::Quadratic,
            LocalObjective::Classifier { model, .. } => match model {
                Classifier::Logistic { .. } => ModelKind::Logistic,
                Classifier::Mlp { .. } => ModelKind::Mlp,
            },
        }
    }

    fn check(&self, x: &ParamVector, batch: &Minibatch) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                left: x.dim(),
                right: self.dim(),
            });
        }
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let len = self.shard_len();
        if let Some(&index) = batch.indices.iter().find(|&&i| i >= len) {
            return Err(Error::SampleOutOfRange { index, len });
        }
        Ok(())
    }

    fn loss_and_grad(&self, x: &ParamVector, batch: &Minibatch, want_grad: bool) -> Result<(f64, Option<ParamVector>)> {
        self.check(x, batch)?;
        match self {
            LocalObjective::Quadratic { center } => {
                let diff = x.sub(center)?;
                let loss = 0.5 * diff.squared_norm();
                Ok((loss, want_grad.then_some(diff)))
            }
            LocalObjective::Classifier { model, data, shard } => {
                let mut scratch = Scratch::new(model);
                let scale = 1.0 / batch.len() as f64;
                let mut g = if want_grad { vec![0.0; model.dim()] } else { Vec::new() };
                let mut loss = 0.0;
                for &pos in &batch.indices {
                    let row = shard[pos];
                    let grad = want_grad.then_some((g.as_mut_slice(), scale));
                    loss += model.sample_loss(x.as_slice(), data.row(row), data.label(row), &mut scratch, grad);
                }
                loss *= scale;
                if !loss.is_finite() {
                    return Err(Error::NonFinite {
                        context: "objective loss",
                        coordinate: 0,
                        value: loss,
                    });
                }
                let grad = if want_grad { Some(ParamVector::new(g)?) } else { None };
                Ok((loss, grad))
            }
        }
    }
}

impl Objective for LocalObjective {
    fn dim(&self) -> usize {
        match self {
            LocalObjective::Quadratic { center } => center.dim(),
            LocalObjective::Classifier { model, .. } => model.dim(),
        }
    }

    fn shard_len(&self) -> usize {
        match self {
            LocalObjective::Quadratic { .. } => 1,
            LocalObjective::Classifier { shard, .. } => shard.len(),
        }
    }

    fn loss(&self, x: &ParamVector, batch: &Minibatch) -> Result<f64> {
        Ok(self.loss_and_grad(x, batch, false)?.0)
    }

    fn gradient(&self, x: &ParamVector, batch: &Minibatch) -> Result<ParamVector> {
        Ok(self.loss_and_grad(x, batch, true)?.1.expect("gradient requested"))
    }

    fn full_loss_and_gradient(&self, x: &ParamVector) -> Result<(f64, ParamVector)> {
        let (loss, g) = self.loss_and_grad(x, &Minibatch::full(self.shard_len()), true)?;
        Ok((loss, g.expect("gradient requested")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_synthetic, Split};
    use crate::math::{finite_diff_grad, FD_STEP};
    use rand_distr::{Distribution, StandardNormal};

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::new(v.to_vec()).unwrap()
    }

    fn toy_data(features: usize, classes: usize, n: usize, seed: u64) -> Arc<Dataset> {
        let mut r = SeededRng::new(seed).aux(0);
        let xs: Vec<f64> = (0..n * features).map(|_| StandardNormal.sample(&mut r)).collect();
        let ys: Vec<usize> = (0..n).map(|i| i % classes).collect();
        Arc::new(Dataset::new(xs, ys, features, classes, Split::Train).unwrap())
    }

    fn rel_err(a: &ParamVector, b: &ParamVector) -> f64 {
        let diff = a.sub(b).unwrap().l2_norm();
        diff / a.l2_norm().max(b.l2_norm()).max(1e-12)
    }

    #[test]
    fn quadratic_examples() {
        let f = LocalObjective::quadratic(pv(&[0.0, 0.0]));
        assert_eq!(f.full_loss(&pv(&[0.0, 0.0])).unwrap(), 0.0);
        let f = LocalObjective::quadratic(pv(&[1.0, 0.0]));
        assert_eq!(f.full_loss(&pv(&[3.0, 0.0])).unwrap(), 2.0);
        assert_eq!(f.full_gradient(&pv(&[3.0, 0.0])).unwrap(), pv(&[2.0, 0.0]));
    }

    #[test]
    fn logistic_zero_logit_is_ln2() {
        let data = Arc::new(Dataset::new(vec![0.0, 0.0, 0.0], vec![0], 3, 2, Split::Train).unwrap());
        let model = Classifier::Logistic {
            features: 3,
            classes: 2,
        };
        let f = LocalObjective::classifier(model, data, vec![0]).unwrap();
        // arbitrary weights, zero biases
        let x = pv(&[0.3, -2.0, 5.0, 0.0, 1.5, 0.25, -0.75, 0.0]);
        assert!((f.full_loss(&x).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn errors_on_bad_inputs() {
        let f = LocalObjective::quadratic(pv(&[1.0, 0.0]));
        assert!(matches!(f.full_loss(&pv(&[1.0])), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(
            f.loss(&pv(&[1.0, 0.0]), &Minibatch::new(vec![])),
            Err(Error::EmptyBatch)
        ));
        assert!(matches!(
            f.gradient(&pv(&[1.0, 0.0]), &Minibatch::new(vec![1])),
            Err(Error::SampleOutOfRange { .. })
        ));
        let data = toy_data(2, 2, 4, 0);
        assert!(LocalObjective::classifier(
            Classifier::Logistic {
                features: 3,
                classes: 2
            },
            data.clone(),
            vec![0]
        )
        .is_err());
        assert!(LocalObjective::classifier(
            Classifier::Logistic {
                features: 2,
                classes: 2
            },
            data,
            vec![]
        )
        .is_err());
    }

    #[test]
    fn logistic_gradient_matches_fd() {
        let data = toy_data(3, 2, 3, 1);
        let model = Classifier::Logistic {
            features: 3,
            classes: 2,
        };
        let f = LocalObjective::classifier(model, data, vec![0, 1, 2]).unwrap();
        let mut r = SeededRng::new(2).aux(0);
        for _ in 0..20 {
            let x = pv(&(0..model.dim())
                .map(|_| StandardNormal.sample(&mut r))
                .collect::<Vec<f64>>());
            let fd = finite_diff_grad(|p| f.full_loss(p).unwrap(), &x, FD_STEP).unwrap();
            assert!(rel_err(&f.full_gradient(&x).unwrap(), &fd) < 1e-5);
        }
    }

    #[test]
    fn mlp_gradient_matches_fd() {
        let data = toy_data(4, 3, 12, 3);
        let model = Classifier::Mlp {
            features: 4,
            hidden: 5,
            classes: 3,
        };
        let f = LocalObjective::classifier(model, data, (0..12).collect()).unwrap();
        let mut r = SeededRng::new(4).aux(0);
        for _ in 0..20 {
            let x = pv(&(0..model.dim())
                .map(|_| StandardNormal.sample(&mut r))
                .collect::<Vec<f64>>());
            let fd = finite_diff_grad(|p| f.full_loss(p).unwrap(), &x, FD_STEP).unwrap();
            assert!(rel_err(&f.full_gradient(&x).unwrap(), &fd) < 1e-4);
        }
    }

    #[test]
    fn size_one_batches_average_to_full_gradient() {
        let data = toy_data(3, 3, 9, 5);
        for model in [
            Classifier::Logistic {
                features: 3,
                classes: 3,
            },
            Classifier::Mlp {
                features: 3,
                hidden: 4,
                classes: 3,
            },
        ] {
            let shard: Vec<usize> = (0..9).rev().collect();
            let f = LocalObjective::classifier(model, data.clone(), shard).unwrap();
            let x = model.init(SeededRng::new(6)).scaled(3.0).unwrap();
            let x = ParamVector::axpy(0.1, &ParamVector::filled(x.dim(), 1.0).unwrap(), &x).unwrap();
            let singles: Vec<ParamVector> = (0..9)
                .map(|i| f.gradient(&x, &Minibatch::new(vec![i])).unwrap())
                .collect();
            let mean = ParamVector::mean(&singles).unwrap();
            let full = f.full_gradient(&x).unwrap();
            assert!(mean.max_abs_diff(&full).unwrap() < 1e-12);
        }
    }

    #[test]
    fn quadratic_is_one_smooth() {
        let f = LocalObjective::quadratic(pv(&[0.5, -1.0, 2.0]));
        let mut r = SeededRng::new(7).aux(0);
        for _ in 0..50 {
            let a = pv(&(0..3).map(|_| StandardNormal.sample(&mut r)).collect::<Vec<f64>>());
            let b = pv(&(0..3).map(|_| StandardNormal.sample(&mut r)).collect::<Vec<f64>>());
            let dg = f.full_gradient(&a).unwrap().sub(&f.full_gradient(&b).unwrap()).unwrap();
            assert!(dg.l2_norm() <= a.sub(&b).unwrap().l2_norm() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn mlp_init_is_bounded_and_seeded() {
        let model = Classifier::Mlp {
            features: 16,
            hidden: 4,
            classes: 3,
        };
        let x = model.init(SeededRng::new(1));
        assert_eq!(x, model.init(SeededRng::new(1)));
        assert!(x.as_slice()[..16 * 4 + 4].iter().all(|v| v.abs() <= 0.25));
        assert!(x.as_slice()[16 * 4 + 4..].iter().all(|v| v.abs() <= 0.5));
    }

    #[test]
    fn logistic_separates_wide_blobs() {
        let tt = make_synthetic(2, 50, 2, 10.0, SeededRng::new(8)).unwrap();
        let model = Classifier::Logistic {
            features: 2,
            classes: 2,
        };
        let data = Arc::new(tt.train);
        let f = LocalObjective::classifier(model, data.clone(), (0..data.len()).collect()).unwrap();
        let mut x = model.init(SeededRng::new(0));
        for _ in 0..500 {
            let g = f.full_gradient(&x).unwrap();
            x.add_scaled(-0.5, &g).unwrap();
        }
        let (_, acc) = model.evaluate(&x, &tt.test).unwrap();
        assert_eq!(acc, 1.0);
    }
}
