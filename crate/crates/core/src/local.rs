//! The K-iteration client update: de-bias by the Push-Sum weight, take a
//! sharpness-aware gradient on one minibatch, fold it into a momentum buffer
//! that starts at zero each round, and descend.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{check_finite, Domain, ParamVector, SeededRng, StreamId};
use crate::models::{Minibatch, Objective};

/// Gradients at or below this norm are not normalized for the SAM ascent.
pub const SAM_EPS: f64 = 1e-12;

/// Push-Sum weights below this are treated as protocol corruption.
pub const MIN_PUSH_SUM_WEIGHT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalHyper {
    /// Learning rate for this round, decay already applied.
    pub lr: f64,
    pub rho: f64,
    pub alpha: f64,
    /// Minibatch iterations `K`.
    pub steps: usize,
    pub batch_size: usize,
}

impl LocalHyper {
    pub fn validate(&self) -> Result<()> {
        // lr = 0 is allowed: pure-mixing runs freeze the local models.
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate {} must be >= 0",
                self.lr
            )));
        }
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidArgument(format!("rho {} must be >= 0", self.rho)));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::InvalidArgument(format!(
                "momentum {} must lie in [0, 1)",
                self.alpha
            )));
        }
        if self.steps == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument("local steps and batch size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-iteration record of a local round.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub batch: Minibatch,
    /// De-biased iterate `z = x / w`.
    pub z: ParamVector,
    /// Gradient at `z`.
    pub g1: ParamVector,
    /// Ascent point `z + ρ·g1/‖g1‖`, absent when no perturbation was applied.
    pub z_perturbed: Option<ParamVector>,
    /// Gradient used for the update.
    pub g: ParamVector,
    pub v: ParamVector,
    /// Iterate after the step.
    pub x: ParamVector,
}

pub type LocalTrace = Vec<TraceStep>;

#[derive(Debug, Clone)]
pub struct LocalOutcome {
    pub x: ParamVector,
    pub trace: Option<LocalTrace>,
}

/// Minibatches for one client in one round.
///
/// Each epoch pass over the shard uses a fresh permutation drawn from the
/// `(client, round, epoch)` stream and hands out consecutive slices; the last
/// slice of an epoch may be short.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    rng: SeededRng,
    client: usize,
    round: usize,
    shard_len: usize,
    batch_size: usize,
    epoch: usize,
    perm: Vec<usize>,
}

impl BatchSampler {
    pub fn new(rng: SeededRng, client: usize, round: usize, shard_len: usize, batch_size: usize) -> Self {
        BatchSampler {
            rng,
            client,
            round,
            shard_len,
            batch_size: batch_size.min(shard_len).max(1),
            epoch: usize::MAX,
            perm: Vec::new(),
        }
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.shard_len.div_ceil(self.batch_size)
    }

    /// The `k`-th minibatch of the round.
    pub fn batch(&mut self, k: usize) -> Minibatch {
        let per_epoch = self.batches_per_epoch();
        let epoch = k / per_epoch;
        if epoch != self.epoch {
            self.perm = (0..self.shard_len).collect();
            self.perm.shuffle(
                &mut self
                    .rng
                    .stream(StreamId::new(Domain::Minibatch, self.client, self.round, epoch)),
            );
            self.epoch = epoch;
        }
        let start = (k % per_epoch) * self.batch_size;
        let end = (start + self.batch_size).min(self.shard_len);
        Minibatch::new(self.perm[start..end].to_vec())
    }
}

/// `x / w`.
pub fn debias(x: &ParamVector, w: f64) -> Result<ParamVector> {
    if !(w > 0.0 && w.is_finite()) {
        return Err(Error::ProtocolCorruption {
            client: usize::MAX,
            weight: w,
        });
    }
    let out: Vec<f64> = x.iter().map(|v| v / w).collect();
    check_finite(&out, "debias")?;
    Ok(ParamVector::from_raw(out))
}

/// Gradients of one SAM step.
#[derive(Debug, Clone, PartialEq)]
pub struct SamGradient {
    pub g1: ParamVector,
    pub z_perturbed: Option<ParamVector>,
    pub g: ParamVector,
}

/// `∇F(z + ρ·g1/‖g1‖; batch)` with `g1 = ∇F(z; batch)`, both on the same batch.
/// Returns `g1` itself when `ρ = 0` or `‖g1‖ ≤ SAM_EPS`.
pub fn sam_gradient(obj: &dyn Objective, z: &ParamVector, batch: &Minibatch, rho: f64) -> Result<SamGradient> {
    let g1 = obj.gradient(z, batch)?;
    let norm = g1.l2_norm();
    if rho == 0.0 || norm <= SAM_EPS {
        return Ok(SamGradient {
            g: g1.clone(),
            g1,
            z_perturbed: None,
        });
    }
    let z_perturbed = ParamVector::axpy(rho / norm, &g1, z)?;
    let g = obj.gradient(&z_perturbed, batch)?;
    Ok(SamGradient {
        g1,
        z_perturbed: Some(z_perturbed),
        g,
    })
}

/// Runs `K` local iterations from `x_in` with round-constant Push-Sum weight `w`:
///
/// ```text
/// v ← 0
/// for k in 0..K:  z ← x / w;  g ← SAM gradient at z;  v ← α·v + g;  x ← x − lr·v
/// ```
pub fn local_round(
    obj: &dyn Objective,
    x_in: &ParamVector,
    w: f64,
    hyper: &LocalHyper,
    sampler: &mut BatchSampler,
    record_trace: bool,
) -> Result<LocalOutcome> {
    hyper.validate()?;
    let mut x = x_in.clone();
    let mut v = ParamVector::zeros(x.dim());
    let mut trace = record_trace.then(|| Vec::with_capacity(hyper.steps));
    for k in 0..hyper.steps {
        let z = debias(&x, w)?;
        let batch = sampler.batch(k);
        let sam = sam_gradient(obj, &z, &batch, hyper.rho)?;
        for (vi, gi) in v.as_mut_slice().iter_mut().zip(sam.g.iter()) {
            *vi = hyper.alpha * *vi + gi;
        }
        check_finite(v.as_slice(), "momentum buffer")?;
        x.add_scaled(-hyper.lr, &v)?;
        if let Some(t) = trace.as_mut() {
            t.push(TraceStep {
                batch,
                z,
                g1: sam.g1,
                z_perturbed: sam.z_perturbed,
                g: sam.g,
                v: v.clone(),
                x: x.clone(),
            });
        }
    }
    Ok(LocalOutcome { x, trace })
}

/// Plain local SGD, `x ← x − lr·∇F(x/w; batch)`, with no perturbation and no momentum.
pub fn local_sgd(
    obj: &dyn Objective,
    x_in: &ParamVector,
    w: f64,
    lr: f64,
    steps: usize,
    sampler: &mut BatchSampler,
) -> Result<ParamVector> {
    let mut x = x_in.clone();
    for k in 0..steps {
        let z = debias(&x, w)?;
        let g = obj.gradient(&z, &sampler.batch(k))?;
        x.add_scaled(-lr, &g)?;
    }
    Ok(x)
}
