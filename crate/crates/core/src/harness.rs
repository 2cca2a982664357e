//! Training harness: a small fully connected classifier trained repeatedly
//! from uniformly sampled initial weights, plus the ensemble statistics used
//! downstream (prediction entropy, balanced accuracy, coordinate selection).

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::grid::Rect;
use crate::surrogate::SamplePair;

/// Nonlinearity applied after every hidden layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Identity => "identity",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "tanh" => Some(Activation::Tanh),
            "relu" => Some(Activation::Relu),
            "sigmoid" => Some(Activation::Sigmoid),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }

    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => libm::tanh(z),
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + libm::exp(-z)),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation value `a`.
    fn slope(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Identity => 1.0,
        }
    }
}

/// Architecture and optimizer settings. The loss is always softmax
/// cross-entropy and the optimizer plain minibatch SGD.
#[derive(Debug, Clone, PartialEq)]
pub struct NetConfig {
    /// Widths from input to output, e.g. `[4, 1, 3]`.
    pub layers: Vec<usize>,
    pub activation: Activation,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers.len() < 2 {
            return Err(invalid!("network needs at least input and output layers"));
        }
        if self.layers.contains(&0) {
            return Err(invalid!("layer widths must be positive"));
        }
        if *self.layers.last().unwrap() < 2 {
            return Err(invalid!("output layer needs at least two classes"));
        }
        if self.batch_size == 0 {
            return Err(invalid!("batch size must be positive"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(invalid!("learning rate must be positive and finite"));
        }
        Ok(())
    }

    pub fn inputs(&self) -> usize {
        self.layers[0]
    }

    pub fn classes(&self) -> usize {
        *self.layers.last().unwrap()
    }

    /// Length of the flattened parameter vector.
    ///
    /// Layer by layer: the `out x in` weight matrix row-major, then `out` biases.
    pub fn weight_count(&self) -> usize {
        self.layers.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
    }
}

/// Labelled feature table.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(invalid!(
                "{} feature rows but {} labels",
                features.len(),
                labels.len()
            ));
        }
        if features.is_empty() {
            return Err(invalid!("dataset is empty"));
        }
        let d = features[0].len();
        if d == 0 || features.iter().any(|r| r.len() != d) {
            return Err(invalid!("feature rows must share a positive width"));
        }
        if features.iter().flatten().any(|v| !v.is_finite()) {
            return Err(invalid!("features must be finite"));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= classes) {
            return Err(invalid!("label {l} outside 0..{classes}"));
        }
        Ok(Dataset {
            features,
            labels,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn width(&self) -> usize {
        self.features[0].len()
    }

    fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: rows.iter().map(|&r| self.features[r].clone()).collect(),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            classes: self.classes,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
}

impl Split {
    /// Rescales every feature to zero mean and unit variance using training
    /// statistics only. Constant features are centred but not scaled.
    pub fn standardized(mut self) -> Split {
        let d = self.train.width();
        let n = self.train.len() as f64;
        for j in 0..d {
            let mean = self.train.features.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = self
                .train
                .features
                .iter()
                .map(|r| (r[j] - mean) * (r[j] - mean))
                .sum::<f64>()
                / n;
            let sd = libm::sqrt(var);
            let scale = if sd > 0.0 { sd } else { 1.0 };
            for row in self.train.features.iter_mut().chain(self.test.features.iter_mut()) {
                row[j] = (row[j] - mean) / scale;
            }
        }
        self
    }
}

/// Per-class shuffled split; each class contributes `round(train_fraction * n_c)`
/// rows to training. Row order within each part follows the original order.
pub fn stratified_split(data: &Dataset, train_fraction: f64, seed: u64) -> Result<Split> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(invalid!("train fraction must lie strictly between 0 and 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for c in 0..data.classes {
        let mut rows: Vec<usize> = (0..data.len()).filter(|&r| data.labels[r] == c).collect();
        if rows.is_empty() {
            continue;
        }
        rows.shuffle(&mut rng);
        let k = libm::round(train_fraction * rows.len() as f64) as usize;
        let k = k.clamp(1, rows.len().saturating_sub(1).max(1));
        train.extend_from_slice(&rows[..k]);
        test.extend_from_slice(&rows[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    if test.is_empty() {
        return Err(invalid!("split leaves no test rows"));
    }
    Ok(Split {
        train: data.subset(&train),
        test: data.subset(&test),
    })
}

/// Network with a flat parameter vector.
struct Mlp<'a> {
    net: &'a NetConfig,
}

impl Mlp<'_> {
    /// Returns activations of every layer; the last entry holds softmax probabilities.
    fn forward(&self, w: &[f64], x: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let layers = &self.net.layers;
        let mut pre = Vec::with_capacity(layers.len() - 1);
        let mut act = Vec::with_capacity(layers.len());
        act.push(x.to_vec());
        let mut off = 0;
        for l in 0..layers.len() - 1 {
            let (n_in, n_out) = (layers[l], layers[l + 1]);
            let (mat, rest) = w[off..].split_at(n_in * n_out);
            let bias = &rest[..n_out];
            let input = &act[l];
            let z: Vec<f64> = (0..n_out)
                .map(|o| bias[o] + (0..n_in).map(|i| mat[o * n_in + i] * input[i]).sum::<f64>())
                .collect();
            let a = if l + 2 == layers.len() {
                softmax(&z)
            } else {
                z.iter().map(|&v| self.net.activation.apply(v)).collect()
            };
            pre.push(z);
            act.push(a);
            off += n_in * n_out + n_out;
        }
        (pre, act)
    }

    fn predict(&self, w: &[f64], x: &[f64]) -> usize {
        let (_, act) = self.forward(w, x);
        argmax(act.last().unwrap())
    }

    /// Accumulates the gradient of the cross-entropy at one sample into `grad`
    /// and returns the loss.
    fn backprop(&self, w: &[f64], x: &[f64], label: usize, grad: &mut [f64]) -> f64 {
        let layers = &self.net.layers;
        let (pre, act) = self.forward(w, x);
        let probs = act.last().unwrap();
        let loss = if probs[label].is_nan() {
            f64::NAN
        } else {
            -libm::log(probs[label].max(f64::MIN_POSITIVE))
        };
        let mut delta: Vec<f64> = probs.clone();
        delta[label] -= 1.0;

        let offsets: Vec<usize> = layers
            .windows(2)
            .scan(0, |acc, p| {
                let o = *acc;
                *acc += p[0] * p[1] + p[1];
                Some(o)
            })
            .collect();
        for l in (0..layers.len() - 1).rev() {
            let (n_in, n_out) = (layers[l], layers[l + 1]);
            let off = offsets[l];
            let input = &act[l];
            for o in 0..n_out {
                for i in 0..n_in {
                    grad[off + o * n_in + i] += delta[o] * input[i];
                }
                grad[off + n_in * n_out + o] += delta[o];
            }
            if l > 0 {
                let mat = &w[off..off + n_in * n_out];
                delta = (0..n_in)
                    .map(|i| {
                        let back: f64 = (0..n_out).map(|o| mat[o * n_in + i] * delta[o]).sum();
                        back * self.net.activation.slope(pre[l - 1][i], act[l][i])
                    })
                    .collect();
            }
        }
        loss
    }
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|&v| libm::exp(v - m)).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|&v| v / s).collect()
}

/// First index of the largest value; NaN never wins.
fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] || v[best].is_nan() {
            best = i;
        }
    }
    best
}

/// Result of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub final_weights: Vec<f64>,
    pub predictions: Vec<usize>,
    pub balanced_accuracy: f64,
    /// Training stopped because the loss or the weights became non-finite.
    /// `final_weights` then holds the last finite iterate.
    pub diverged: bool,
}

/// Trains for exactly `net.epochs` epochs of minibatch SGD.
///
/// Batch order is reshuffled every epoch from a generator seeded by `seed`.
pub fn train_once(net: &NetConfig, split: &Split, initial: &[f64], seed: u64) -> Result<TrainOutcome> {
    net.validate()?;
    if initial.len() != net.weight_count() {
        return Err(invalid!(
            "initial weights have length {}, architecture needs {}",
            initial.len(),
            net.weight_count()
        ));
    }
    if split.train.width() != net.inputs() || split.test.width() != net.inputs() {
        return Err(invalid!(
            "dataset has {} features, network expects {}",
            split.train.width(),
            net.inputs()
        ));
    }
    if split.train.classes > net.classes() {
        return Err(invalid!(
            "dataset has {} classes, network outputs {}",
            split.train.classes,
            net.classes()
        ));
    }
    let mlp = Mlp { net };
    let mut rng = shuffle_rng(seed);
    let mut w = initial.to_vec();
    let mut grad = vec![0.0; w.len()];
    let mut order: Vec<usize> = (0..split.train.len()).collect();
    let mut diverged = false;
    'epochs: for _ in 0..net.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(net.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut loss = 0.0;
            for &r in batch {
                loss += mlp.backprop(&w, &split.train.features[r], split.train.labels[r], &mut grad);
            }
            let scale = net.learning_rate / batch.len() as f64;
            let next: Vec<f64> = w.iter().zip(&grad).map(|(wi, gi)| wi - scale * gi).collect();
            if !loss.is_finite() || next.iter().any(|v| !v.is_finite()) {
                diverged = true;
                break 'epochs;
            }
            w = next;
        }
    }
    let predictions: Vec<usize> = split
        .test
        .features
        .iter()
        .map(|x| mlp.predict(&w, x))
        .collect();
    let ba = balanced_accuracy(&predictions, &split.test.labels, split.test.classes)?;
    Ok(TrainOutcome {
        final_weights: w,
        predictions,
        balanced_accuracy: ba,
        diverged,
    })
}

/// Ensemble settings.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub cycles: usize,
    pub base_seed: u64,
    /// Uniform sampling region for the flattened initial weight vector.
    pub init_box: Rect,
}

impl EnsembleConfig {
    /// The box `[lo, hi]^n`.
    pub fn cube(cycles: usize, base_seed: u64, n: usize, lo: f64, hi: f64) -> Result<Self> {
        Ok(EnsembleConfig {
            cycles,
            base_seed,
            init_box: Rect::new(vec![lo; n], vec![hi; n])?,
        })
    }

    pub fn validate(&self, net: &NetConfig) -> Result<()> {
        if self.cycles == 0 {
            return Err(invalid!("cycle count must be positive"));
        }
        if self.init_box.dim() != net.weight_count() {
            return Err(invalid!(
                "init box has dimension {}, architecture has {} weights",
                self.init_box.dim(),
                net.weight_count()
            ));
        }
        Ok(())
    }
}

/// One training cycle with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleRecord {
    pub cycle: usize,
    pub seed: u64,
    pub diverged: bool,
    pub initial: Vec<f64>,
    pub final_weights: Vec<f64>,
    pub predictions: Vec<usize>,
    pub balanced_accuracy: f64,
}

/// Seed of cycle `cycle`: a SplitMix64 finalizer over the pair.
pub fn cycle_seed(base_seed: u64, cycle: usize) -> u64 {
    let mut z = base_seed ^ (cycle as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn init_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    rng
}

fn shuffle_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// Uniform draw from `init_box`, one coordinate at a time.
pub fn sample_initial_weights(init_box: &Rect, seed: u64) -> Vec<f64> {
    let mut rng = init_rng(seed);
    init_box
        .lower()
        .iter()
        .zip(init_box.upper())
        .map(|(&lo, &hi)| {
            let u: f64 = rng.random();
            lo + (hi - lo) * u
        })
        .collect()
}

/// Runs cycle `cycle` of the ensemble. Cycles are independent, so callers may
/// run them in any order or in parallel.
pub fn train_cycle(net: &NetConfig, ens: &EnsembleConfig, split: &Split, cycle: usize) -> Result<EnsembleRecord> {
    let seed = cycle_seed(ens.base_seed, cycle);
    let initial = sample_initial_weights(&ens.init_box, seed);
    let out = train_once(net, split, &initial, seed)?;
    Ok(EnsembleRecord {
        cycle,
        seed,
        diverged: out.diverged,
        initial,
        final_weights: out.final_weights,
        predictions: out.predictions,
        balanced_accuracy: out.balanced_accuracy,
    })
}

/// Runs all cycles sequentially.
pub fn train_ensemble(net: &NetConfig, ens: &EnsembleConfig, split: &Split) -> Result<Vec<EnsembleRecord>> {
    net.validate()?;
    ens.validate(net)?;
    let records = (0..ens.cycles)
        .map(|c| train_cycle(net, ens, split, c))
        .collect::<Result<Vec<_>>>()?;
    check_not_all_diverged(&records)?;
    Ok(records)
}

pub fn check_not_all_diverged(records: &[EnsembleRecord]) -> Result<()> {
    if !records.is_empty() && records.iter().all(|r| r.diverged) {
        return Err(Error::Numerical(alloc::format!(
            "all {} training cycles diverged",
            records.len()
        )));
    }
    Ok(())
}

/// Shannon entropy in bits of each test point's predicted class across
/// non-diverged cycles.
pub fn prediction_entropy(records: &[EnsembleRecord], classes: usize) -> Result<Vec<f64>> {
    let live: Vec<&EnsembleRecord> = records.iter().filter(|r| !r.diverged).collect();
    let first = live
        .first()
        .ok_or_else(|| invalid!("entropy needs at least one non-diverged record"))?;
    let t = first.predictions.len();
    if live.iter().any(|r| r.predictions.len() != t) {
        return Err(invalid!("records disagree on the number of test points"));
    }
    let mut out = Vec::with_capacity(t);
    for p in 0..t {
        let mut counts = vec![0usize; classes];
        for r in &live {
            let c = r.predictions[p];
            if c >= classes {
                return Err(invalid!("prediction {c} outside 0..{classes}"));
            }
            counts[c] += 1;
        }
        out.push(entropy_bits(&counts));
    }
    Ok(out)
}

/// Entropy in bits of the empirical distribution given by `counts`.
pub fn entropy_bits(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let h: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n as f64;
            -p * libm::log2(p)
        })
        .sum();
    // Avoid printing -0.
    h.max(0.0)
}

/// Mean over classes of per-class recall.
pub fn balanced_accuracy(predictions: &[usize], labels: &[usize], classes: usize) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(invalid!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        ));
    }
    let mut hits = vec![0usize; classes];
    let mut totals = vec![0usize; classes];
    for (&p, &l) in predictions.iter().zip(labels) {
        if l >= classes {
            return Err(invalid!("label {l} outside 0..{classes}"));
        }
        totals[l] += 1;
        if p == l {
            hits[l] += 1;
        }
    }
    if let Some(c) = totals.iter().position(|&t| t == 0) {
        return Err(invalid!("class {c} does not occur in the labels"));
    }
    let sum: f64 = hits.iter().zip(&totals).map(|(&h, &t)| h as f64 / t as f64).sum();
    Ok(sum / classes as f64)
}

/// Indices of the `k` coordinates whose displacement `final - initial` varies
/// most across non-diverged cycles; ties go to the lower index.
pub fn select_coordinates(records: &[EnsembleRecord], k: usize) -> Result<Vec<usize>> {
    let live: Vec<&EnsembleRecord> = records.iter().filter(|r| !r.diverged).collect();
    if live.len() < 2 {
        return Err(invalid!("coordinate selection needs at least two non-diverged records"));
    }
    let n = live[0].initial.len();
    if live
        .iter()
        .any(|r| r.initial.len() != n || r.final_weights.len() != n)
    {
        return Err(invalid!("weight vectors differ in length across records"));
    }
    if k == 0 || k > n {
        return Err(invalid!("cannot select {k} of {n} coordinates"));
    }
    let m = live.len() as f64;
    let variance: Vec<f64> = (0..n)
        .map(|j| {
            let disp: Vec<f64> = live.iter().map(|r| r.final_weights[j] - r.initial[j]).collect();
            let mean = disp.iter().sum::<f64>() / m;
            disp.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / m
        })
        .collect();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| variance[b].total_cmp(&variance[a]).then(a.cmp(&b)));
    idx.truncate(k);
    Ok(idx)
}

/// Restricts every non-diverged record to `indices`, in cycle order.
pub fn project(records: &[EnsembleRecord], indices: &[usize]) -> Result<Vec<SamplePair>> {
    let mut pairs = Vec::with_capacity(records.len());
    for r in records.iter().filter(|r| !r.diverged) {
        if let Some(&j) = indices
            .iter()
            .find(|&&j| j >= r.initial.len() || j >= r.final_weights.len())
        {
            return Err(invalid!("coordinate {j} out of range for cycle {}", r.cycle));
        }
        pairs.push(SamplePair::new(
            indices.iter().map(|&j| r.initial[j]).collect(),
            indices.iter().map(|&j| r.final_weights[j]).collect(),
        ));
    }
    Ok(pairs)
}
