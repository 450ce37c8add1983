//! Independent oracles shared by the integration tests. Nothing here calls the
//! crate's own finite-difference or ranking code.

#![allow(dead_code)]

use imbsam_core::model::{Activation, LabeledBatch, MlpSpec};
use imbsam_core::{ParamVector, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Central-difference gradient with step `cbrt(eps)·(|θ_j| + 1)` per coordinate.
pub fn fd_gradient(f: impl Fn(&ParamVector) -> f64, params: &ParamVector) -> Vec<f64> {
    let base = f64::EPSILON.cbrt();
    (0..params.len())
        .map(|j| {
            let h = base * (params.values()[j].abs() + 1.0);
            let mut plus = params.clone();
            plus.values_mut()[j] += h;
            let mut minus = params.clone();
            minus.values_mut()[j] -= h;
            let step = plus.values()[j] - minus.values()[j];
            (f(&plus) - f(&minus)) / step
        })
        .collect()
}

pub fn rel_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

/// A random small MLP with random parameters, batch and sample weights.
pub struct RandomInstance {
    pub spec: MlpSpec,
    pub params: ParamVector,
    pub batch: LabeledBatch,
    pub weights: Vec<f64>,
}

pub fn random_instance(seed: u64) -> RandomInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let input_dim = rng.random_range(1..=6);
    let depth = rng.random_range(0..=2);
    let hidden_dims = (0..depth).map(|_| rng.random_range(1..=6)).collect();
    let num_classes = rng.random_range(2..=5);
    let activation = if rng.random_bool(0.75) {
        Activation::Tanh
    } else {
        Activation::Relu
    };
    let spec = MlpSpec {
        input_dim,
        hidden_dims,
        num_classes,
        activation,
        init_seed: seed,
    };
    let mut params = spec.init_params().unwrap();
    for v in params.values_mut() {
        *v += rng.random_range(-0.5..0.5);
    }
    let n = rng.random_range(1..=8);
    let features = (0..n * input_dim).map(|_| rng.random_range(-2.0..2.0)).collect();
    let labels = (0..n).map(|_| rng.random_range(0..num_classes)).collect();
    let weights = (0..n).map(|_| rng.random_range(0.1..3.0)).collect();
    RandomInstance {
        spec,
        params,
        batch: LabeledBatch {
            features: Tensor::matrix(n, input_dim, features).unwrap(),
            labels,
        },
        weights,
    }
}

/// AUCROC by enumerating every (positive, negative) pair.
pub fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut num, mut pairs) = (0.0, 0.0);
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li && !lj {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    num += 1.0;
                } else if scores[i] == scores[j] {
                    num += 0.5;
                }
            }
        }
    }
    num / pairs
}

/// Average precision by sweeping every distinct score as a threshold
/// `s ≥ t` and summing `ΔRecall · Precision`.
pub fn threshold_ap(scores: &[f64], labels: &[bool]) -> f64 {
    let pos = labels.iter().filter(|&&l| l).count() as f64;
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for t in thresholds {
        let selected: Vec<bool> = scores
            .iter()
            .zip(labels)
            .filter(|(&s, _)| s >= t)
            .map(|(_, &l)| l)
            .collect();
        let tp = selected.iter().filter(|&&l| l).count() as f64;
        let recall = tp / pos;
        ap += (recall - prev_recall) * tp / selected.len() as f64;
        prev_recall = recall;
    }
    ap
}

/// Calls `f` on every (scores, labels) pair of length `2..=max_len` with
/// scores drawn from `alphabet` and both labels present.
pub fn for_all_binary_inputs(max_len: usize, alphabet: &[f64], mut f: impl FnMut(&[f64], &[bool])) {
    for n in 2..=max_len {
        let mut scores = vec![0.0; n];
        let total = alphabet.len().pow(n as u32);
        for code in 0..total {
            let mut c = code;
            for s in scores.iter_mut() {
                *s = alphabet[c % alphabet.len()];
                c /= alphabet.len();
            }
            for mask in 1..(1u32 << n) - 1 {
                let labels: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
                f(&scores, &labels);
            }
        }
    }
}
