//! Datasets, the IDX reader/writer and non-IID client partitioning.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use byteorder::{BigEndian, ByteOrder, WriteBytesExt};
use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{Domain, SeededRng, StreamId};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Fraction of each class that lands in the training split.
pub const TRAIN_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Labelled samples stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<usize>,
    n_features: usize,
    n_classes: usize,
    split: Split,
}

impl Dataset {
    pub fn new(
        features: Vec<f64>,
        labels: Vec<usize>,
        n_features: usize,
        n_classes: usize,
        split: Split,
    ) -> Result<Self> {
        if n_features == 0 || features.len() != labels.len() * n_features {
            return Err(Error::InvalidArgument(format!(
                "{} feature values do not form {} rows of width {}",
                features.len(),
                labels.len(),
                n_features
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::InvalidArgument(format!("label {bad} outside [0, {n_classes})")));
        }
        crate::math::check_finite(&features, "dataset features")?;
        Ok(Dataset {
            features,
            labels,
            n_features,
            n_classes,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Deterministic stratified holdout: within each class, the first
    /// `TRAIN_FRACTION` of samples (in file order) train and the rest test.
    pub fn train_test_split(&self) -> TrainTest {
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); self.n_classes];
        for (i, &l) in self.labels.iter().enumerate() {
            by_class[l].push(i);
        }
        let mut train_idx = Vec::new();
        let mut test_idx = Vec::new();
        for members in &by_class {
            let cut = train_count(members.len());
            train_idx.extend_from_slice(&members[..cut]);
            test_idx.extend_from_slice(&members[cut..]);
        }
        train_idx.sort_unstable();
        test_idx.sort_unstable();
        TrainTest {
            train: self.select(&train_idx, Split::Train),
            test: self.select(&test_idx, Split::Test),
        }
    }

    fn select(&self, idx: &[usize], split: Split) -> Dataset {
        let mut features = Vec::with_capacity(idx.len() * self.n_features);
        let mut labels = Vec::with_capacity(idx.len());
        for &i in idx {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            features,
            labels,
            n_features: self.n_features,
            n_classes: self.n_classes,
            split,
        }
    }
}

fn train_count(m: usize) -> usize {
    if m == 0 {
        0
    } else {
        ((TRAIN_FRACTION * m as f64).round() as usize).clamp(1, m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainTest {
    pub train: Dataset,
    pub test: Dataset,
}

/// Gaussian blobs with unit covariance. Class means sit at `sep/√2 · e_c`, so
/// every pair of means is exactly `sep` apart (a regular simplex).
pub fn make_synthetic(classes: usize, per_class: usize, d: usize, sep: f64, rng: SeededRng) -> Result<TrainTest> {
    if classes < 2 || per_class < 1 || !(sep > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "synthetic data needs classes >= 2, per-class >= 1, sep > 0 (got {classes}, {per_class}, {sep})"
        )));
    }
    if d < classes {
        return Err(Error::InvalidArgument(format!(
            "{classes} simplex means need at least {classes} feature dimensions, got {d}"
        )));
    }
    let offset = sep / std::f64::consts::SQRT_2;
    let cut = train_count(per_class);
    let mut parts = [(Vec::new(), Vec::new()), (Vec::new(), Vec::new())];
    for c in 0..classes {
        let mut r = rng.stream(StreamId::new(Domain::Dataset, c, 0, 0));
        for s in 0..per_class {
            let part = if s < cut { &mut parts[0] } else { &mut parts[1] };
            for k in 0..d {
                let noise: f64 = StandardNormal.sample(&mut r);
                part.0.push(if k == c { offset + noise } else { noise });
            }
            part.1.push(c);
        }
    }
    let [(train_x, train_y), (test_x, test_y)] = parts;
    let train = shuffled(
        Dataset::new(train_x, train_y, d, classes, Split::Train)?,
        &mut rng.stream(StreamId::new(Domain::Dataset, usize::MAX, 1, 0)),
    );
    let test = Dataset::new(test_x, test_y, d, classes, Split::Test)?;
    Ok(TrainTest { train, test })
}

fn shuffled<R: Rng>(ds: Dataset, rng: &mut R) -> Dataset {
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(rng);
    ds.select(&order, ds.split)
}

/// Raw contents of an IDX image file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn count(&self) -> usize {
        if self.rows * self.cols == 0 {
            0
        } else {
            self.pixels.len() / (self.rows * self.cols)
        }
    }
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..]).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn header(path: &Path, bytes: &[u8], expected: u32, words: usize) -> Result<Vec<usize>> {
    let truncated = |needed| Error::Truncated {
        path: path.to_path_buf(),
        needed,
        available: bytes.len(),
    };
    if bytes.len() < 4 {
        return Err(truncated(4));
    }
    let magic = BigEndian::read_u32(&bytes[0..4]);
    if magic != expected {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            found: magic,
            expected,
        });
    }
    if bytes.len() < 4 * words {
        return Err(truncated(4 * words));
    }
    Ok((1..words)
        .map(|w| BigEndian::read_u32(&bytes[4 * w..4 * w + 4]) as usize)
        .collect())
}

/// Reads an IDX3 image file (plain or gzip-compressed).
pub fn read_idx_images(path: impl AsRef<Path>) -> Result<IdxImages> {
    let path = path.as_ref();
    let bytes = read_maybe_gz(path)?;
    let dims = header(path, &bytes, IDX_IMAGES_MAGIC, 4)?;
    let (n, rows, cols) = (dims[0], dims[1], dims[2]);
    let needed = 16 + n * rows * cols;
    if bytes.len() < needed {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            needed,
            available: bytes.len(),
        });
    }
    Ok(IdxImages {
        rows,
        cols,
        pixels: bytes[16..needed].to_vec(),
    })
}

/// Reads an IDX1 label file (plain or gzip-compressed).
pub fn read_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    let bytes = read_maybe_gz(path)?;
    let n = header(path, &bytes, IDX_LABELS_MAGIC, 2)?[0];
    if bytes.len() < 8 + n {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            needed: 8 + n,
            available: bytes.len(),
        });
    }
    Ok(bytes[8..8 + n].to_vec())
}

/// Writes an IDX image/label pair; a `.gz` extension selects gzip output.
pub fn write_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    images: &IdxImages,
    labels: &[u8],
) -> Result<()> {
    if images.count() != labels.len() || images.pixels.len() != labels.len() * images.rows * images.cols {
        return Err(Error::CountMismatch {
            images: images.count(),
            labels: labels.len(),
        });
    }
    let mut img = Vec::with_capacity(16 + images.pixels.len());
    img.write_u32::<BigEndian>(IDX_IMAGES_MAGIC)?;
    for v in [labels.len(), images.rows, images.cols] {
        img.write_u32::<BigEndian>(v as u32)?;
    }
    img.extend_from_slice(&images.pixels);
    let mut lab = Vec::with_capacity(8 + labels.len());
    lab.write_u32::<BigEndian>(IDX_LABELS_MAGIC)?;
    lab.write_u32::<BigEndian>(labels.len() as u32)?;
    lab.extend_from_slice(labels);
    write_maybe_gz(images_path.as_ref(), &img)?;
    write_maybe_gz(labels_path.as_ref(), &lab)
}

fn write_maybe_gz(path: &Path, bytes: &[u8]) -> Result<()> {
    if path.extension().is_some_and(|e| e == "gz") {
        let mut enc = GzEncoder::new(fs::File::create(path)?, Compression::default());
        enc.write_all(bytes)?;
        enc.finish()?;
    } else {
        fs::write(path, bytes)?;
    }
    Ok(())
}

/// Loads the first `limit` samples of an IDX pair with pixels scaled to [0, 1].
///
/// The class count is taken from the full label file so that a short prefix
/// keeps the same output dimension.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>, limit: usize) -> Result<Dataset> {
    if limit == 0 {
        return Err(Error::EmptyDataset("IDX limit is 0".into()));
    }
    let images = read_idx_images(&images_path)?;
    let labels = read_idx_labels(&labels_path)?;
    if images.count() != labels.len() {
        return Err(Error::CountMismatch {
            images: images.count(),
            labels: labels.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "{} holds no samples",
            labels_path.as_ref().display()
        )));
    }
    let n_classes = *labels.iter().max().unwrap() as usize + 1;
    let take = limit.min(labels.len());
    let width = images.rows * images.cols;
    let features = images.pixels[..take * width]
        .iter()
        .map(|&p| p as f64 / 255.0)
        .collect();
    let labels = labels[..take].iter().map(|&l| l as usize).collect();
    Dataset::new(features, labels, width, n_classes.max(2), Split::Train)
}

/// Assignment of training-sample indices to clients.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub shards: Vec<Vec<usize>>,
    /// Dirichlet concentration; `None` for the IID split.
    pub alpha: Option<f64>,
}

impl Partition {
    pub fn n_clients(&self) -> usize {
        self.shards.len()
    }

    /// Checks disjointness, coverage of `0..pool` and non-empty shards.
    pub fn validate(&self, pool: usize) -> Result<()> {
        let mut all: Vec<usize> = self.shards.iter().flatten().copied().collect();
        all.sort_unstable();
        if all != (0..pool).collect::<Vec<_>>() {
            return Err(Error::InvalidArgument(
                "partition shards are not a set partition of the training pool".into(),
            ));
        }
        if let Some(c) = self.shards.iter().position(|s| s.is_empty()) {
            return Err(Error::InvalidArgument(format!("client {c} has no samples")));
        }
        Ok(())
    }
}

pub const PARTITION_RETRIES: usize = 100;

/// Per-class Dirichlet split: for each class, client proportions are drawn
/// from `Dir(alpha)` and turned into counts by largest-remainder rounding.
/// `alpha = ∞` gives the IID split.
pub fn dirichlet_partition(ds: &Dataset, n_clients: usize, alpha: f64, rng: SeededRng) -> Result<Partition> {
    if n_clients == 0 {
        return Err(Error::InvalidArgument("n-clients must be >= 1".into()));
    }
    if alpha.is_infinite() && alpha > 0.0 {
        return iid_partition(ds, n_clients, rng);
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!("Dirichlet alpha {alpha} must be > 0")));
    }
    let by_class = indices_by_class(ds)?;
    let gamma = Gamma::new(alpha, 1.0).map_err(|e| Error::InvalidArgument(e.to_string()))?;

    'attempt: for attempt in 0..PARTITION_RETRIES {
        let mut shards = vec![Vec::new(); n_clients];
        for (c, members) in by_class.iter().enumerate() {
            let mut r = rng.stream(StreamId::new(Domain::Partition, c, attempt, 0));
            let draws: Vec<f64> = (0..n_clients).map(|_| gamma.sample(&mut r)).collect();
            let total: f64 = draws.iter().sum();
            if !(total > 0.0 && total.is_finite()) {
                continue 'attempt;
            }
            let props: Vec<f64> = draws.iter().map(|g| g / total).collect();
            let counts = largest_remainder(&props, members.len());
            let mut order = members.clone();
            order.shuffle(&mut rng.stream(StreamId::new(Domain::Partition, c, attempt, 1)));
            let mut start = 0;
            for (client, &count) in counts.iter().enumerate() {
                shards[client].extend_from_slice(&order[start..start + count]);
                start += count;
            }
        }
        if shards.iter().all(|s| !s.is_empty()) {
            for s in shards.iter_mut() {
                s.sort_unstable();
            }
            return Ok(Partition {
                shards,
                alpha: Some(alpha),
            });
        }
    }
    Err(Error::PartitionExhausted {
        attempts: PARTITION_RETRIES,
    })
}

/// Stratified IID split: each class is dealt out evenly, and the leftover
/// samples of successive classes rotate through the clients.
pub fn iid_partition(ds: &Dataset, n_clients: usize, rng: SeededRng) -> Result<Partition> {
    if n_clients == 0 {
        return Err(Error::InvalidArgument("n-clients must be >= 1".into()));
    }
    if ds.len() < n_clients {
        return Err(Error::InvalidArgument(format!(
            "{} samples cannot cover {n_clients} clients",
            ds.len()
        )));
    }
    let by_class = indices_by_class(ds)?;
    let mut clients: Vec<usize> = (0..n_clients).collect();
    clients.shuffle(&mut rng.stream(StreamId::new(Domain::Partition, usize::MAX, 0, 0)));
    let mut shards = vec![Vec::new(); n_clients];
    let mut cursor = 0;
    for (c, members) in by_class.iter().enumerate() {
        let mut order = members.clone();
        order.shuffle(&mut rng.stream(StreamId::new(Domain::Partition, c, 0, 1)));
        let base = members.len() / n_clients;
        let extra = members.len() % n_clients;
        let mut start = 0;
        for slot in 0..n_clients {
            let client = clients[(cursor + slot) % n_clients];
            let count = base + usize::from(slot < extra);
            shards[client].extend_from_slice(&order[start..start + count]);
            start += count;
        }
        cursor = (cursor + extra) % n_clients;
    }
    for s in shards.iter_mut() {
        s.sort_unstable();
    }
    Ok(Partition { shards, alpha: None })
}

fn indices_by_class(ds: &Dataset) -> Result<Vec<Vec<usize>>> {
    let mut by_class = vec![Vec::new(); ds.n_classes()];
    for i in 0..ds.len() {
        by_class[ds.label(i)].push(i);
    }
    if let Some(c) = by_class.iter().position(|m| m.is_empty()) {
        return Err(Error::InvalidArgument(format!("class {c} has no training samples")));
    }
    Ok(by_class)
}

/// Rounds `props · total` to integers summing exactly to `total`.
pub(crate) fn largest_remainder(props: &[f64], total: usize) -> Vec<usize> {
    let exact: Vec<f64> = props.iter().map(|p| p * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..props.len()).collect();
    // Stable sort keeps lower indices first among equal remainders.
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra)
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Shannon entropy (nats) of a shard's label histogram.
pub fn label_entropy(ds: &Dataset, shard: &[usize]) -> f64 {
    let mut counts = vec![0usize; ds.n_classes()];
    for &i in shard {
        counts[ds.label(i)] += 1;
    }
    let n = shard.len() as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

pub fn mean_label_entropy(ds: &Dataset, partition: &Partition) -> f64 {
    partition.shards.iter().map(|s| label_entropy(ds, s)).sum::<f64>() / partition.n_clients() as f64
}
