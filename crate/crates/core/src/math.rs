//! Flat parameter vectors, keyed random streams and the central-difference
//! gradient oracle.

use std::ops::Index;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// A flat real-valued parameter vector of fixed dimension.
///
/// Every public constructor and arithmetic method rejects NaN and infinities, so
/// a `ParamVector` in hand is always finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn zeros(dim: usize) -> Self {
        ParamVector(vec![0.0; dim])
    }

    pub fn filled(dim: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; dim])
    }

    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_finite(&values, "ParamVector::new")?;
        Ok(ParamVector(values))
    }

    /// Wraps values produced by arithmetic that is finite by construction.
    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        ParamVector(values)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    /// `a·x + y`, coordinate-wise.
    pub fn axpy(a: f64, x: &ParamVector, y: &ParamVector) -> Result<ParamVector> {
        same_dim(x, y)?;
        let out: Vec<f64> = x.0.iter().zip(&y.0).map(|(xi, yi)| a * xi + yi).collect();
        check_finite(&out, "axpy")?;
        Ok(ParamVector(out))
    }

    /// In-place `self += a·x`.
    pub fn add_scaled(&mut self, a: f64, x: &ParamVector) -> Result<()> {
        same_dim(self, x)?;
        for (yi, xi) in self.0.iter_mut().zip(&x.0) {
            *yi += a * xi;
        }
        check_finite(&self.0, "add_scaled")
    }

    pub fn scaled(&self, a: f64) -> Result<ParamVector> {
        let out: Vec<f64> = self.0.iter().map(|v| a * v).collect();
        check_finite(&out, "scaled")?;
        Ok(ParamVector(out))
    }

    pub fn sub(&self, other: &ParamVector) -> Result<ParamVector> {
        same_dim(self, other)?;
        let out: Vec<f64> = self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect();
        check_finite(&out, "sub")?;
        Ok(ParamVector(out))
    }

    pub fn dot(&self, other: &ParamVector) -> Result<f64> {
        same_dim(self, other)?;
        Ok(dot(&self.0, &other.0))
    }

    /// Euclidean norm. Zero iff every coordinate is zero.
    pub fn l2_norm(&self) -> f64 {
        dot(&self.0, &self.0).sqrt()
    }

    pub fn squared_norm(&self) -> f64 {
        dot(&self.0, &self.0)
    }

    pub fn max_abs_diff(&self, other: &ParamVector) -> Result<f64> {
        same_dim(self, other)?;
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Arithmetic mean of equally sized vectors, summed in slice order.
    pub fn mean<'a, I>(vectors: I) -> Result<ParamVector>
    where
        I: IntoIterator<Item = &'a ParamVector>,
    {
        let mut iter = vectors.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| Error::InvalidArgument("mean of zero vectors".into()))?;
        let mut acc = first.0.clone();
        let mut count = 1usize;
        for v in iter {
            if v.dim() != acc.len() {
                return Err(Error::DimensionMismatch {
                    left: acc.len(),
                    right: v.dim(),
                });
            }
            for (a, b) in acc.iter_mut().zip(&v.0) {
                *a += b;
            }
            count += 1;
        }
        let inv = count as f64;
        for a in acc.iter_mut() {
            *a /= inv;
        }
        check_finite(&acc, "mean")?;
        Ok(ParamVector(acc))
    }
}

impl Index<usize> for ParamVector {
    type Output = f64;

    fn index(&self, index: usize) -> &f64 {
        &self.0[index]
    }
}

/// Free-function form of [`ParamVector::axpy`].
pub fn axpy(a: f64, x: &ParamVector, y: &ParamVector) -> Result<ParamVector> {
    ParamVector::axpy(a, x, y)
}

pub fn l2_norm(x: &ParamVector) -> f64 {
    x.l2_norm()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn same_dim(a: &ParamVector, b: &ParamVector) -> Result<()> {
    if a.dim() == b.dim() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        })
    }
}

pub(crate) fn check_finite(values: &[f64], context: &'static str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        None => Ok(()),
        Some(coordinate) => Err(Error::NonFinite {
            context,
            coordinate,
            value: values[coordinate],
        }),
    }
}

/// Central-difference gradient `(f(x+h·e_k) − f(x−h·e_k)) / 2h` per coordinate.
pub fn finite_diff_grad<F>(f: F, x: &ParamVector, h: f64) -> Result<ParamVector>
where
    F: Fn(&ParamVector) -> f64,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step {h} must be > 0"
        )));
    }
    let mut probe = x.clone();
    let mut grad = Vec::with_capacity(x.dim());
    for k in 0..x.dim() {
        let orig = probe.0[k];
        probe.0[k] = orig + h;
        let plus = f(&probe);
        probe.0[k] = orig - h;
        let minus = f(&probe);
        probe.0[k] = orig;
        for value in [plus, minus] {
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    context: "finite_diff_grad objective",
                    coordinate: k,
                    value,
                });
            }
        }
        grad.push((plus - minus) / (2.0 * h));
    }
    Ok(ParamVector(grad))
}

/// Purpose tag separating independent random streams under one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Domain {
    Minibatch = 1,
    Topology = 2,
    Selection = 3,
    Dataset = 4,
    Partition = 5,
    Init = 6,
    Server = 7,
    /// Free-form streams for tests, examples and oracle inputs.
    Aux = 8,
}

/// Identifies one random stream: `(client, round, iteration)` under a domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamId {
    pub domain: Domain,
    pub client: u64,
    pub round: u64,
    pub iteration: u64,
}

impl StreamId {
    pub fn new(domain: Domain, client: usize, round: usize, iteration: usize) -> Self {
        StreamId {
            domain,
            client: client as u64,
            round: round as u64,
            iteration: iteration as u64,
        }
    }
}

/// Experiment-wide seed from which every random stream is derived.
///
/// Streams are a pure function of `(seed, stream id)`, so the draws a client
/// sees do not depend on which worker runs it or in what order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeededRng {
    pub seed: u64,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng { seed }
    }

    pub fn stream(&self, id: StreamId) -> ChaCha8Rng {
        let mut state = splitmix(self.seed ^ 0x6a09_e667_f3bc_c908);
        let mut key = [0u8; 32];
        for (chunk, word) in key
            .chunks_mut(8)
            .zip([id.domain as u64, id.client, id.round, id.iteration])
        {
            state = splitmix(state ^ word.wrapping_mul(0x9e37_79b9_7f4a_7c15));
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }

    /// Convenience for single-purpose streams.
    pub fn aux(&self, tag: usize) -> ChaCha8Rng {
        self.stream(StreamId::new(Domain::Aux, tag, 0, 0))
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
