use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{registry, AdamConfig, ModelKind, NetDims, Network};
use crate::neural::Adam;
use crate::{seed, Error, Result};

/// A supervised pair: input window (newest first) and target vector.
pub trait Sample: Sync {
    fn input(&self) -> &[f64];
    fn target(&self) -> &[f64];
}

impl Sample for (Vec<f64>, Vec<f64>) {
    fn input(&self) -> &[f64] {
        &self.0
    }
    fn target(&self) -> &[f64] {
        &self.1
    }
}

/// One z-score transform shared by inputs and targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: f64,
    pub std: f64,
}

impl Normalization {
    pub const IDENTITY: Normalization = Normalization { mean: 0.0, std: 1.0 };

    /// Pooled mean and standard deviation over every input and target value.
    /// A zero spread falls back to `std = 1`.
    pub fn fit<S: Sample>(samples: &[S]) -> Result<Self> {
        let mut n = 0usize;
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for v in samples.iter().flat_map(|s| s.input().iter().chain(s.target())) {
            n += 1;
            let delta = v - mean;
            mean += delta / n as f64;
            m2 += delta * (v - mean);
        }
        if n == 0 {
            return Err(Error::EmptyData("normalization fit".into()));
        }
        let std = (m2 / n as f64).sqrt();
        let std = if std > 0.0 && std.is_finite() { std } else { 1.0 };
        Ok(Normalization { mean, std })
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }

    pub fn invert(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Worker threads for gradient accumulation; 1 keeps training serial.
    /// Results do not depend on this value.
    #[serde(default = "one")]
    pub jobs: usize,
}

fn one() -> usize {
    1
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        TrainConfig {
            epochs: 200,
            batch_size: 256,
            learning_rate: adam.learning_rate,
            seed: 0,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
            jobs: 1,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        self.adam().validate()
    }
}

/// Result of a training run. Losses are MSE in dB² of the original scale.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub network: Box<dyn Network>,
    pub normalization: Normalization,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
}

struct Normalized {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Sample for Normalized {
    fn input(&self) -> &[f64] {
        &self.x
    }
    fn target(&self) -> &[f64] {
        &self.y
    }
}

fn normalize<S: Sample>(samples: &[S], norm: Normalization, dims: NetDims) -> Result<Vec<Normalized>> {
    samples
        .iter()
        .map(|s| {
            super::check_len("sample input", dims.input, s.input().len())?;
            super::check_len("sample target", dims.output, s.target().len())?;
            Ok(Normalized {
                x: s.input().iter().map(|&v| norm.apply(v)).collect(),
                y: s.target().iter().map(|&v| norm.apply(v)).collect(),
            })
        })
        .collect()
}

/// Samples per parallel gradient chunk. Fixed so that the reduction order,
/// and therefore every rounding, is independent of the thread count.
const CHUNK: usize = 32;

fn batch_gradient(net: &dyn Network, batch: &[&Normalized], grad: &mut [f64], pool: Option<&rayon::ThreadPool>) -> Result<f64> {
    grad.fill(0.0);
    let loss = match pool {
        None => {
            let mut loss = 0.0;
            for s in batch {
                loss += net.backprop(&s.x, &s.y, grad)?;
            }
            loss
        }
        Some(pool) => {
            let partial: Vec<Result<(Vec<f64>, f64)>> = pool.install(|| {
                batch
                    .par_chunks(CHUNK)
                    .map(|chunk| {
                        let mut g = vec![0.0; grad.len()];
                        let mut loss = 0.0;
                        for s in chunk {
                            loss += net.backprop(&s.x, &s.y, &mut g)?;
                        }
                        Ok((g, loss))
                    })
                    .collect()
            });
            let mut loss = 0.0;
            for part in partial {
                let (g, l) = part?;
                grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
                loss += l;
            }
            loss
        }
    };
    let inv = 1.0 / batch.len() as f64;
    grad.iter_mut().for_each(|g| *g *= inv);
    Ok(loss)
}

fn mean_loss(net: &dyn Network, data: &[Normalized]) -> Result<f64> {
    let mut total = 0.0;
    for s in data {
        let pred = net.forward(&s.x)?;
        total += super::mse_loss(&pred, &s.y)?;
    }
    Ok(total / data.len() as f64)
}

/// Fits a `kind` network with hidden width `hidden` by mini-batch Adam.
///
/// Normalization statistics come from `train_set` only. The initial
/// parameters and each epoch's shuffle are drawn from streams derived from
/// `cfg.seed`, so a fixed seed reproduces the run bit for bit.
pub fn train<S: Sample>(kind: ModelKind, hidden: usize, train_set: &[S], val_set: &[S], cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyData("training split".into()));
    }
    if val_set.is_empty() {
        return Err(Error::EmptyData("validation split".into()));
    }
    let first = &train_set[0];
    let dims = NetDims::new(first.input().len(), hidden, first.target().len())?;
    let norm = Normalization::fit(train_set)?;
    let train_n = normalize(train_set, norm, dims)?;
    let val_n = normalize(val_set, norm, dims)?;

    let factory = registry().for_kind(kind);
    let mut init_rng = ChaCha8Rng::seed_from_u64(seed::derive(cfg.seed, &[kind.code() as u64, 0]));
    let mut net = factory.init(dims, &mut init_rng);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(seed::derive(cfg.seed, &[kind.code() as u64, 1]));
    let mut adam = Adam::new(cfg.adam(), net.params().len());

    let pool = if cfg.jobs > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.jobs)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?,
        )
    } else {
        None
    };

    let db2 = norm.std * norm.std;
    let mut order: Vec<usize> = (0..train_n.len()).collect();
    let mut grad = vec![0.0; net.params().len()];
    let mut batch: Vec<&Normalized> = Vec::with_capacity(cfg.batch_size);
    let mut train_loss = Vec::with_capacity(cfg.epochs);
    let mut val_loss = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for idx in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(idx.iter().map(|&i| &train_n[i]));
            epoch_loss += batch_gradient(net.as_ref(), &batch, &mut grad, pool.as_ref())?;
            adam.update(net.params_mut(), &grad);
        }
        if net.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter("training diverged to non-finite parameters".into()));
        }
        train_loss.push(epoch_loss / train_n.len() as f64 * db2);
        val_loss.push(mean_loss(net.as_ref(), &val_n)? * db2);
    }
    Ok(TrainReport {
        network: net,
        normalization: norm,
        train_loss,
        val_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn constant_set(n: usize, v: f64) -> Vec<(Vec<f64>, Vec<f64>)> {
        (0..n).map(|_| (vec![v; 5], vec![v; 3])).collect()
    }

    /// Windows over noiseless AR(1) trajectories `s ← a s + c` from random
    /// starting points.
    fn ar1_set(n: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
        let (a, c) = (0.9, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let mut s: f64 = rng.gen_range(-5.0..25.0);
                let mut seq = Vec::with_capacity(8);
                for _ in 0..8 {
                    seq.push(s);
                    s = a * s + c;
                }
                let mut x = seq[..5].to_vec();
                x.reverse();
                (x, seq[5..].to_vec())
            })
            .collect()
    }

    #[test]
    fn normalization_pools_inputs_and_targets() {
        let data = vec![(vec![1.0, 3.0], vec![5.0]), (vec![7.0, 9.0], vec![11.0])];
        let n = Normalization::fit(&data).unwrap();
        assert!((n.mean - 6.0).abs() < 1e-12);
        let var = [1.0f64, 3.0, 5.0, 7.0, 9.0, 11.0].iter().map(|v| (v - 6.0).powi(2)).sum::<f64>() / 6.0;
        assert!((n.std - var.sqrt()).abs() < 1e-12);
        assert_eq!(n.invert(n.apply(4.2)), 4.2);
        let flat = Normalization::fit(&constant_set(3, 2.0)).unwrap();
        assert_eq!(flat, Normalization { mean: 2.0, std: 1.0 });
    }

    #[test]
    fn constant_series_is_fitted() {
        let data = constant_set(512, 7.5);
        let cfg = TrainConfig {
            epochs: 50,
            batch_size: 64,
            ..Default::default()
        };
        for kind in [ModelKind::Dnn, ModelKind::Lstm] {
            let r = train(kind, 4, &data, &data[..64], &cfg).unwrap();
            assert!(*r.val_loss.last().unwrap() < 1e-3);
            assert!(r.train_loss[5..].windows(2).all(|w| w[1] <= w[0]));
            assert_eq!(r.train_loss.len(), 50);
        }
    }

    #[test]
    fn loss_descends_on_offset_constant() {
        // Inputs and targets differ, so the model has to learn a bias.
        let data: Vec<_> = (0..256).map(|i| (vec![(i % 2) as f64; 3], vec![4.0, 4.0])).collect();
        let cfg = TrainConfig {
            epochs: 40,
            batch_size: 256,
            learning_rate: 1e-2,
            ..Default::default()
        };
        let r = train(ModelKind::Dnn, 4, &data, &data, &cfg).unwrap();
        assert!(r.train_loss[5..].windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(r.train_loss.last().unwrap() < &r.train_loss[0]);
    }

    #[test]
    fn linear_recursion_is_learned() {
        let tr = ar1_set(4000, 1);
        let va = ar1_set(500, 2);
        let cfg = TrainConfig {
            epochs: 60,
            batch_size: 32,
            ..Default::default()
        };
        let r = train(ModelKind::Dnn, 16, &tr, &va, &cfg).unwrap();
        let (mut err, mut pow) = (0.0, 0.0);
        for (x, y) in &va {
            let z: Vec<f64> = x.iter().map(|&v| r.normalization.apply(v)).collect();
            let pred = r.network.forward(&z).unwrap();
            for (p, t) in pred.iter().zip(y) {
                err += (r.normalization.invert(*p) - t).powi(2);
                pow += t * t;
            }
        }
        let nmse = 10.0 * (err / pow).log10();
        assert!(nmse < -20.0, "nmse {nmse}");
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let tr = ar1_set(300, 3);
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 16,
            seed: 9,
            ..Default::default()
        };
        for kind in [ModelKind::Dnn, ModelKind::Lstm] {
            let a = train(kind, 3, &tr, &tr[..20], &cfg).unwrap();
            let b = train(kind, 3, &tr, &tr[..20], &cfg).unwrap();
            assert_eq!(a.train_loss, b.train_loss);
            assert_eq!(a.network.params(), b.network.params());
            let par = train(kind, 3, &tr, &tr[..20], &TrainConfig { jobs: 2, ..cfg }).unwrap();
            assert_eq!(a.network.params(), par.network.params());
        }
    }

    #[test]
    fn rejects_empty_and_bad_config() {
        let data = constant_set(4, 1.0);
        let cfg = TrainConfig::default();
        assert!(matches!(train(ModelKind::Dnn, 2, &data[..0], &data, &cfg), Err(Error::EmptyData(_))));
        assert!(matches!(train(ModelKind::Dnn, 2, &data, &data[..0], &cfg), Err(Error::EmptyData(_))));
        let bad = TrainConfig { epochs: 0, ..cfg };
        assert!(train(ModelKind::Dnn, 2, &data, &data, &bad).is_err());
    }
}
