//! Dense autoencoder baseline operating on raw feature vectors.
//! Anomaly score is the reconstruction MSE.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::layers::{dense_backward, dense_forward, leaky_relu, leaky_relu_backward};
use super::svdd::{TrainReport, TrainingMeta, LEAKY_SLOPE};
use super::tensor::Tensor;
use super::NeuralError;

pub const DEFAULT_HIDDEN: [usize; 3] = [128, 30, 128];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AeOptions {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for AeOptions {
    fn default() -> Self {
        Self {
            epochs: 100,
            lr: 1e-3,
            batch_size: 64,
            seed: 0,
        }
    }
}

/// Layer sizes `[input, hidden.., input]`; weights and biases interleaved in `params`.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderModel {
    pub sizes: Vec<usize>,
    pub params: Vec<Tensor>,
    pub threshold: Option<f64>,
    pub meta: TrainingMeta,
}

struct AeCache {
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl AutoencoderModel {
    pub fn new(input_dim: usize, hidden: &[usize], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(input_dim);
        let mut params = Vec::new();
        for w in sizes.windows(2) {
            params.push(Tensor::he_normal(&[w[1], w[0]], w[0], &mut rng));
            params.push(Tensor::zeros(&[w[1]]));
        }
        Self {
            sizes,
            params,
            threshold: None,
            meta: TrainingMeta::default(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    fn layers(&self) -> usize {
        self.sizes.len() - 1
    }

    fn forward_cached(&self, x: &[f64]) -> (Vec<f64>, AeCache) {
        let mut inputs = Vec::with_capacity(self.layers());
        let mut pre = Vec::with_capacity(self.layers());
        let mut a = x.to_vec();
        for l in 0..self.layers() {
            let z = dense_forward(
                self.params[2 * l].data(),
                Some(self.params[2 * l + 1].data()),
                &a,
                self.sizes[l + 1],
            );
            inputs.push(a);
            a = if l + 1 < self.layers() {
                leaky_relu(&z, LEAKY_SLOPE)
            } else {
                z.clone()
            };
            pre.push(z);
        }
        (a, AeCache { inputs, pre })
    }

    fn check(&self, x: &[f64]) -> Result<(), NeuralError> {
        if x.len() != self.input_dim() {
            return Err(NeuralError::ShapeMismatch {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    pub fn reconstruct(&self, x: &[f64]) -> Result<Vec<f64>, NeuralError> {
        self.check(x)?;
        Ok(self.forward_cached(x).0)
    }

    /// Reconstruction mean squared error.
    pub fn score(&self, x: &[f64]) -> Result<f64, NeuralError> {
        let y = self.reconstruct(x)?;
        Ok(mse(&y, x))
    }

    /// Mean batch MSE and its parameter gradients.
    pub fn loss_and_grad(&self, batch: &[&[f64]]) -> (f64, Vec<Tensor>) {
        let mut grads: Vec<Tensor> = self.params.iter().map(|t| Tensor::zeros(t.shape())).collect();
        let n = batch.len() as f64;
        let d = self.input_dim() as f64;
        let mut loss = 0.0;
        for x in batch {
            let (y, cache) = self.forward_cached(x);
            loss += mse(&y, x);
            let mut dy: Vec<f64> = y.iter().zip(x.iter()).map(|(a, b)| 2.0 * (a - b) / (d * n)).collect();
            for l in (0..self.layers()).rev() {
                if l + 1 < self.layers() {
                    leaky_relu_backward(&cache.pre[l], LEAKY_SLOPE, &mut dy);
                }
                let (gw, gb) = grads[2 * l..2 * l + 2].split_at_mut(1);
                dy = dense_backward(
                    self.params[2 * l].data(),
                    &cache.inputs[l],
                    &dy,
                    gw[0].data_mut(),
                    Some(gb[0].data_mut()),
                );
            }
        }
        (loss / n, grads)
    }

    pub fn objective(&self, data: &[Vec<f64>]) -> f64 {
        data.iter().map(|x| mse(&self.forward_cached(x).0, x)).sum::<f64>() / data.len() as f64
    }

    pub fn fit(&mut self, data: &[Vec<f64>], opts: &AeOptions) -> Result<TrainReport, NeuralError> {
        if data.is_empty() {
            return Err(NeuralError::EmptyInput);
        }
        for x in data {
            self.check(x)?;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut adam = Adam::new(AdamConfig::with_lr(opts.lr), self.params.iter().map(|t| t.numel()));
        let batch_size = opts.batch_size.max(1);
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut history = Vec::with_capacity(opts.epochs);
        for epoch in 0..opts.epochs {
            order.shuffle(&mut rng);
            let mut total = 0.0;
            for (b, chunk) in order.chunks(batch_size).enumerate() {
                let batch: Vec<&[f64]> = chunk.iter().map(|&i| data[i].as_slice()).collect();
                let (loss, grads) = self.loss_and_grad(&batch);
                if !loss.is_finite() {
                    return Err(NeuralError::NonFiniteLoss {
                        epoch,
                        batch: b,
                        history,
                    });
                }
                total += loss * chunk.len() as f64;
                let mut params: Vec<&mut Tensor> = self.params.iter_mut().collect();
                adam.step(&mut params, &grads);
            }
            history.push(total / data.len() as f64);
        }
        let final_loss = self.objective(data);
        self.meta = TrainingMeta {
            seed: opts.seed,
            epochs: opts.epochs,
            lr: opts.lr,
            batch_size,
            final_loss: Some(final_loss),
        };
        Ok(TrainReport {
            epochs: opts.epochs,
            epoch_losses: history,
            final_loss,
        })
    }
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_follow_hidden_sizes() {
        let ae = AutoencoderModel::new(76, &DEFAULT_HIDDEN, 0);
        assert_eq!(ae.sizes, vec![76, 128, 30, 128, 76]);
        assert_eq!(ae.params.len(), 8);
        assert_eq!(ae.params[0].shape(), [128, 76]);
        assert_eq!(ae.params[7].shape(), [76]);
        assert!(matches!(ae.score(&[0.0; 3]), Err(NeuralError::ShapeMismatch { .. })));
    }

    #[test]
    fn learns_low_rank_data() {
        let data: Vec<Vec<f64>> = (0..64)
            .map(|i| {
                let t = i as f64 / 64.0;
                vec![t, 2.0 * t, -t, 0.5 - t]
            })
            .collect();
        let mut ae = AutoencoderModel::new(4, &[8, 2, 8], 1);
        let before = ae.objective(&data);
        let opts = AeOptions {
            epochs: 300,
            lr: 1e-2,
            batch_size: 16,
            seed: 2,
        };
        let report = ae.fit(&data, &opts).unwrap();
        assert!(report.final_loss < before / 10.0, "{before} -> {}", report.final_loss);
        let off = ae.score(&[1.0, -2.0, 1.0, 3.0]).unwrap();
        assert!(off > ae.score(&data[10]).unwrap());
    }
}
