//! Synthetic long-tailed datasets, the head/tail class split and batching.

use std::collections::BTreeSet;
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::LabeledBatch;
use crate::tensor::Tensor;

/// Where the class-conditional Gaussians sit.
///
/// Means lie on a sphere of radius `radius`: along the coordinate axes when
/// `K ≤ feature_dim` (so all pairs are equidistant), otherwise evenly spaced on
/// a circle in the first two coordinates. Each sample adds isotropic noise with
/// standard deviation `noise_std`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassGeometry {
    pub radius: f64,
    pub noise_std: f64,
}

impl Default for ClassGeometry {
    fn default() -> Self {
        Self {
            radius: 2.0,
            noise_std: 1.0,
        }
    }
}

impl ClassGeometry {
    pub fn class_means(&self, num_classes: usize, feature_dim: usize) -> Vec<Vec<f64>> {
        (0..num_classes)
            .map(|k| {
                let mut mu = vec![0.0; feature_dim];
                if num_classes <= feature_dim {
                    mu[k] = self.radius;
                } else if feature_dim == 1 {
                    mu[0] = -self.radius + 2.0 * self.radius * k as f64 / (num_classes - 1) as f64;
                } else {
                    let angle = 2.0 * std::f64::consts::PI * k as f64 / num_classes as f64;
                    mu[0] = self.radius * angle.cos();
                    mu[1] = self.radius * angle.sin();
                }
                mu
            })
            .collect()
    }
}

/// Labeled samples with per-class counts. Labels are `0..num_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct LongTailedDataset {
    features: Vec<f64>,
    labels: Vec<usize>,
    class_counts: Vec<usize>,
    feature_dim: usize,
}

impl LongTailedDataset {
    /// Validates that every class in `0..num_classes` has at least one sample.
    pub fn new(features: Vec<f64>, labels: Vec<usize>, num_classes: usize, feature_dim: usize) -> Result<Self> {
        if feature_dim == 0 {
            return Err(Error::invalid("feature dimension must be positive"));
        }
        crate::error::check_len("dataset features", labels.len() * feature_dim, features.len())?;
        let mut class_counts = vec![0usize; num_classes];
        for &y in &labels {
            if y >= num_classes {
                return Err(Error::invalid(format!(
                    "label {y} out of range for {num_classes} classes"
                )));
            }
            class_counts[y] += 1;
        }
        if let Some(k) = class_counts.iter().position(|&c| c == 0) {
            return Err(Error::MissingClass(k));
        }
        Ok(Self {
            features,
            labels,
            class_counts,
            feature_dim,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.class_counts.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn class_counts(&self) -> &[usize] {
        &self.class_counts
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn sample(&self, i: usize) -> (&[f64], usize) {
        let d = self.feature_dim;
        (&self.features[i * d..(i + 1) * d], self.labels[i])
    }

    /// Copies the selected samples into a contiguous batch.
    pub fn gather(&self, indices: &[usize]) -> Result<LabeledBatch> {
        if indices.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let d = self.feature_dim;
        let mut x = Vec::with_capacity(indices.len() * d);
        let mut y = Vec::with_capacity(indices.len());
        for &i in indices {
            let (f, label) = self.sample(i);
            x.extend_from_slice(f);
            y.push(label);
        }
        Ok(LabeledBatch {
            features: Tensor::matrix(indices.len(), d, x)?,
            labels: y,
        })
    }

    pub fn all(&self) -> Result<LabeledBatch> {
        Ok(LabeledBatch {
            features: Tensor::matrix(self.len(), self.feature_dim, self.features.clone())?,
            labels: self.labels.clone(),
        })
    }

    /// Indices of samples whose class is in `classes`.
    pub fn indices_of(&self, classes: &BTreeSet<usize>) -> Vec<usize> {
        (0..self.len()).filter(|&i| classes.contains(&self.labels[i])).collect()
    }

    /// SHA-256 over labels and the bit patterns of all features.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.feature_dim as u64).to_le_bytes());
        h.update((self.num_classes() as u64).to_le_bytes());
        for &y in &self.labels {
            h.update((y as u64).to_le_bytes());
        }
        for v in &self.features {
            h.update(v.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    /// Writes a header `f0,…,f{d-1},y` and one row per sample.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..self.feature_dim).map(|j| format!("f{j}")).collect();
        header.push("y".into());
        w.write_record(&header)?;
        for i in 0..self.len() {
            let (x, y) = self.sample(i);
            let mut row: Vec<String> = x.iter().map(|v| v.to_string()).collect();
            row.push(y.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the format produced by [`write_csv`](Self::write_csv). The class
    /// count is taken from the largest label present.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        let d = header.len().saturating_sub(1);
        let well_formed =
            d > 0 && header.get(d) == Some("y") && (0..d).all(|j| header.get(j) == Some(format!("f{j}").as_str()));
        if !well_formed {
            return Err(Error::invalid("dataset CSV header must be f0,...,f{d-1},y"));
        }
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            for j in 0..d {
                features.push(parse_field::<f64>(&rec, j)?);
            }
            labels.push(parse_field::<usize>(&rec, d)?);
        }
        let k = labels.iter().max().map_or(0, |m| m + 1);
        Self::new(features, labels, k, d)
    }
}

fn parse_field<T: std::str::FromStr>(rec: &csv::StringRecord, j: usize) -> Result<T> {
    rec.get(j)
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::invalid(format!("unparseable CSV field {j} in {rec:?}")))
}

/// Per-class counts `round(n_max · IF^{−k/(K−1)})` for `k = 0..K`.
pub fn exponential_profile(num_classes: usize, n_max: usize, imbalance_factor: f64) -> Result<Vec<usize>> {
    if num_classes < 2 {
        return Err(Error::invalid("need at least 2 classes"));
    }
    if !(imbalance_factor >= 1.0) || !imbalance_factor.is_finite() {
        return Err(Error::invalid(format!(
            "imbalance factor must be >= 1, got {imbalance_factor}"
        )));
    }
    if (n_max as f64) < imbalance_factor {
        return Err(Error::invalid(format!(
            "n_max = {n_max} is smaller than the imbalance factor {imbalance_factor}"
        )));
    }
    let denom = (num_classes - 1) as f64;
    Ok((0..num_classes)
        .map(|k| {
            let n = (n_max as f64 * imbalance_factor.powf(-(k as f64) / denom)).round() as usize;
            n.max(1)
        })
        .collect())
}

fn draw_samples(
    rng: &mut ChaCha8Rng,
    counts: &[usize],
    feature_dim: usize,
    geometry: &ClassGeometry,
) -> (Vec<f64>, Vec<usize>) {
    let means = geometry.class_means(counts.len(), feature_dim);
    let total: usize = counts.iter().sum();
    let mut features = Vec::with_capacity(total * feature_dim);
    let mut labels = Vec::with_capacity(total);
    for (k, (&n, mu)) in counts.iter().zip(&means).enumerate() {
        for _ in 0..n {
            for &m in mu {
                let z: f64 = StandardNormal.sample(rng);
                features.push(m + geometry.noise_std * z);
            }
            labels.push(k);
        }
    }
    (features, labels)
}

/// Parameters of a synthetic long-tailed training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongTailedSpec {
    pub seed: u64,
    pub num_classes: usize,
    pub feature_dim: usize,
    pub n_max: usize,
    pub imbalance_factor: f64,
    #[serde(default)]
    pub geometry: ClassGeometry,
}

/// Gaussian classes with an exponentially decaying count profile.
pub fn generate_longtailed(spec: &LongTailedSpec) -> Result<LongTailedDataset> {
    if spec.feature_dim == 0 {
        return Err(Error::invalid("feature dimension must be positive"));
    }
    let counts = exponential_profile(spec.num_classes, spec.n_max, spec.imbalance_factor)?;
    generate_with_counts(spec.seed, &counts, spec.feature_dim, &spec.geometry)
}

/// Gaussian classes with explicit per-class counts, drawn from stream 0 of `seed`.
pub fn generate_with_counts(
    seed: u64,
    counts: &[usize],
    feature_dim: usize,
    geometry: &ClassGeometry,
) -> Result<LongTailedDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (features, labels) = draw_samples(&mut rng, counts, feature_dim, geometry);
    LongTailedDataset::new(features, labels, counts.len(), feature_dim)
}

/// A balanced evaluation set from the same class geometry as the training
/// set but an independent random stream.
pub fn generate_balanced_test(spec: &LongTailedSpec, per_class: usize) -> Result<LongTailedDataset> {
    if per_class == 0 {
        return Err(Error::invalid("test set needs at least one sample per class"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(1);
    let counts = vec![per_class; spec.num_classes];
    let (features, labels) = draw_samples(&mut rng, &counts, spec.feature_dim, &spec.geometry);
    LongTailedDataset::new(features, labels, spec.num_classes, spec.feature_dim)
}

/// `max_k |S^k| / min_k |S^k|`.
pub fn imbalance_factor(dataset: &LongTailedDataset) -> f64 {
    counts_imbalance(dataset.class_counts())
}

pub fn counts_imbalance(counts: &[usize]) -> f64 {
    let max = counts.iter().copied().max().unwrap_or(0);
    let min = counts.iter().copied().min().unwrap_or(0);
    max as f64 / min as f64
}

/// Head classes have more than `eta` training samples; the rest are tail.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSplit {
    pub eta: usize,
    pub head: BTreeSet<usize>,
    pub tail: BTreeSet<usize>,
}

impl ClassSplit {
    pub fn from_counts(counts: &[usize], eta: usize) -> Self {
        let (head, tail) = (0..counts.len()).partition(|&k| counts[k] > eta);
        Self { eta, head, tail }
    }

    pub fn is_head(&self, class: usize) -> bool {
        self.head.contains(&class)
    }
}

pub fn split_classes(dataset: &LongTailedDataset, eta: usize) -> ClassSplit {
    ClassSplit::from_counts(dataset.class_counts(), eta)
}

/// A mini-batch of dataset indices with its head/tail partition; both parts
/// keep the batch order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub indices: Vec<usize>,
    pub head: Vec<usize>,
    pub tail: Vec<usize>,
}

/// One epoch of shuffled batches. The permutation is drawn from stream
/// `epoch` of `seed`; the last partial batch is kept.
pub fn batches(
    dataset: &LongTailedDataset,
    split: &ClassSplit,
    batch_size: usize,
    seed: u64,
    epoch: u64,
) -> Result<Vec<Batch>> {
    if batch_size == 0 {
        return Err(Error::invalid("batch size must be at least 1"));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    order.shuffle(&mut rng);
    Ok(order
        .chunks(batch_size)
        .map(|chunk| {
            let (head, tail) = chunk.iter().partition(|&&i| split.is_head(dataset.labels()[i]));
            Batch {
                indices: chunk.to_vec(),
                head,
                tail,
            }
        })
        .collect())
}

/// Count thresholds for the Many/Medium/Few evaluation groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitThresholds {
    /// Many: count strictly above this.
    pub many_above: usize,
    /// Few: count strictly below this.
    pub few_below: usize,
}

impl Default for SplitThresholds {
    fn default() -> Self {
        Self {
            many_above: 100,
            few_below: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalSplits {
    pub many: BTreeSet<usize>,
    pub medium: BTreeSet<usize>,
    pub few: BTreeSet<usize>,
}

/// Many `> many_above`, Few `< few_below`, Medium everything in between (inclusive).
pub fn evaluation_splits(train_counts: &[usize], thresholds: SplitThresholds) -> EvalSplits {
    let mut s = EvalSplits {
        many: BTreeSet::new(),
        medium: BTreeSet::new(),
        few: BTreeSet::new(),
    };
    for (k, &c) in train_counts.iter().enumerate() {
        if c > thresholds.many_above {
            s.many.insert(k);
        } else if c < thresholds.few_below {
            s.few.insert(k);
        } else {
            s.medium.insert(k);
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(k: usize, n_max: usize, imb: f64) -> LongTailedSpec {
        LongTailedSpec {
            seed: 3,
            num_classes: k,
            feature_dim: 4,
            n_max,
            imbalance_factor: imb,
            geometry: ClassGeometry::default(),
        }
    }

    fn counts_dataset(counts: &[usize]) -> LongTailedDataset {
        generate_with_counts(0, counts, 2, &ClassGeometry::default()).unwrap()
    }

    #[test]
    fn balanced_limit() {
        let d = generate_longtailed(&spec(5, 40, 1.0)).unwrap();
        assert_eq!(d.class_counts(), &[40; 5]);
        assert_eq!(imbalance_factor(&d), 1.0);
    }

    #[test]
    fn two_class_profile() {
        assert_eq!(exponential_profile(2, 500, 100.0).unwrap(), vec![500, 5]);
    }

    #[test]
    fn ten_class_profile_recovers_factor() {
        let d = generate_longtailed(&spec(10, 500, 100.0)).unwrap();
        assert_eq!(d.class_counts()[0], 500);
        assert_eq!(d.class_counts()[9], 5);
        assert_eq!(imbalance_factor(&d), 100.0);
        assert!(d.class_counts().windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(d.len(), d.class_counts().iter().sum::<usize>());
    }

    #[test]
    fn bad_generation_arguments() {
        assert!(generate_longtailed(&spec(3, 50, 0.5)).is_err());
        assert!(generate_longtailed(&spec(3, 50, 100.0)).is_err());
        assert!(generate_longtailed(&spec(1, 50, 1.0)).is_err());
    }

    #[test]
    fn generation_is_seeded() {
        let a = generate_longtailed(&spec(4, 30, 10.0)).unwrap();
        let b = generate_longtailed(&spec(4, 30, 10.0)).unwrap();
        assert_eq!(a, b);
        let mut other = spec(4, 30, 10.0);
        other.seed = 4;
        assert_ne!(a.features(), generate_longtailed(&other).unwrap().features());
        let test = generate_balanced_test(&spec(4, 30, 10.0), 30).unwrap();
        assert_eq!(test.class_counts(), &[30; 4]);
        assert_ne!(&test.features()[..120], &a.features()[..120]);
    }

    #[test]
    fn imbalance_of_explicit_counts() {
        assert_eq!(imbalance_factor(&counts_dataset(&[500, 5])), 100.0);
        assert_eq!(imbalance_factor(&counts_dataset(&[1280, 640, 5])), 256.0);
    }

    #[test]
    fn split_boundary_goes_to_tail() {
        let s = ClassSplit::from_counts(&[150, 100, 20], 100);
        assert_eq!(s.head, BTreeSet::from([0]));
        assert_eq!(s.tail, BTreeSet::from([1, 2]));

        let all_head = ClassSplit::from_counts(&[150, 100, 20], 0);
        assert_eq!(all_head.head.len(), 3);
        let all_tail = ClassSplit::from_counts(&[150, 100, 20], 150);
        assert_eq!(all_tail.tail.len(), 3);
    }

    #[test]
    fn batch_sizes_and_permutation() {
        let d = counts_dataset(&[6, 4]);
        let split = split_classes(&d, 5);
        let bs = batches(&d, &split, 4, 9, 0).unwrap();
        assert_eq!(bs.iter().map(|b| b.indices.len()).collect::<Vec<_>>(), vec![4, 4, 2]);
        let mut all: Vec<usize> = bs.iter().flat_map(|b| b.indices.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        for b in &bs {
            assert_eq!(b.head.len() + b.tail.len(), b.indices.len());
            assert!(b.head.iter().all(|&i| d.labels()[i] == 0));
        }
        assert_ne!(bs, batches(&d, &split, 4, 9, 1).unwrap());
        assert_eq!(bs, batches(&d, &split, 4, 9, 0).unwrap());
        assert!(batches(&d, &split, 0, 9, 0).is_err());
    }

    #[test]
    fn full_tail_batches_have_no_head() {
        let d = counts_dataset(&[30, 8, 2]);
        let split = split_classes(&d, 30);
        for b in batches(&d, &split, 7, 1, 0).unwrap() {
            assert!(b.head.is_empty());
        }
    }

    #[test]
    fn evaluation_split_examples() {
        let t = SplitThresholds::default();
        let s = evaluation_splits(&[500, 100, 19], t);
        assert_eq!(
            (s.many, s.medium, s.few),
            (BTreeSet::from([0]), BTreeSet::from([1]), BTreeSet::from([2]))
        );
        let s = evaluation_splits(&[50; 4], t);
        assert_eq!(s.medium.len(), 4);
        let s = evaluation_splits(&[101, 20], t);
        assert_eq!((s.many, s.medium), (BTreeSet::from([0]), BTreeSet::from([1])));
    }

    #[test]
    fn evaluation_boundary_convention_by_enumeration() {
        // Exactly one of the three predicates holds for every count.
        for c in 0..300 {
            let many = c > 100;
            let medium = (20..=100).contains(&c);
            let few = c < 20;
            assert_eq!(many as u8 + medium as u8 + few as u8, 1);
            let s = evaluation_splits(&[c], SplitThresholds::default());
            assert_eq!(
                (s.many.len() == 1, s.medium.len() == 1, s.few.len() == 1),
                (many, medium, few)
            );
        }
    }

    #[test]
    fn csv_round_trip() {
        let d = generate_longtailed(&spec(3, 12, 4.0)).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("f0,f1,f2,f3,y\n"));
        let back = LongTailedDataset::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.content_hash(), d.content_hash());
    }

    #[test]
    fn csv_rejects_bad_header() {
        assert!(LongTailedDataset::read_csv("a,b,y\n1,2,0\n".as_bytes()).is_err());
        assert!(LongTailedDataset::read_csv("f0,f1,label\n1,2,0\n".as_bytes()).is_err());
    }

    #[test]
    fn missing_class_rejected() {
        assert!(matches!(
            LongTailedDataset::new(vec![0.0, 1.0], vec![0, 2], 3, 1),
            Err(Error::MissingClass(1))
        ));
    }
}
