//! One-class Deep SVDD on encoded images.
//!
//! The network is conv(5x5, stride 2) -> leaky ReLU -> conv(5x5, stride 2) ->
//! leaky ReLU -> dense, with no bias terms anywhere and an unbounded output, so
//! the constant map to the center is not a reachable solution.
//! Training minimizes `mean ||phi(x) - c||^2 + lambda * sum ||W||_F^2` with Adam.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::layers::{
    conv_backward_input, conv_backward_weights, conv_forward, dense_backward, dense_forward, im2col,
    leaky_relu, leaky_relu_backward, prepare, ConvGeom, ConvInput,
};
use super::tensor::Tensor;
use super::NeuralError;
use crate::encoding::EncodedImage;

pub const DEFAULT_WEIGHT_DECAY: f64 = 1e-6;
pub const CENTER_EPS: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SvddArch {
    pub in_channels: usize,
    pub height: usize,
    pub width: usize,
    pub conv1_filters: usize,
    pub conv2_filters: usize,
    pub kernel: usize,
    pub stride: usize,
    pub latent: usize,
}

impl Default for SvddArch {
    fn default() -> Self {
        Self {
            in_channels: 3,
            height: 64,
            width: 64,
            conv1_filters: 8,
            conv2_filters: 4,
            kernel: 5,
            stride: 2,
            latent: 64,
        }
    }
}

impl SvddArch {
    pub fn geoms(&self) -> (ConvGeom, ConvGeom) {
        let g1 = ConvGeom::new(
            self.in_channels,
            self.height,
            self.width,
            self.conv1_filters,
            self.kernel,
            self.stride,
        );
        let g2 = ConvGeom::new(g1.out_c, g1.out_h, g1.out_w, self.conv2_filters, self.kernel, self.stride);
        (g1, g2)
    }

    pub fn input_len(&self) -> usize {
        self.in_channels * self.height * self.width
    }

    pub fn fc_in(&self) -> usize {
        self.geoms().1.out_len()
    }
}

pub const LEAKY_SLOPE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct SvddNetwork {
    pub arch: SvddArch,
    pub slope: f64,
    pub conv1: Tensor,
    pub conv2: Tensor,
    pub fc: Tensor,
}

/// Activations kept from a forward pass for the backward pass.
pub struct SvddCache {
    input1: ConvInput,
    z1: Vec<f64>,
    cols2: ConvInput,
    z2: Vec<f64>,
    a2: Vec<f64>,
}

/// A network input prepared once and reused across epochs.
#[derive(Debug, Clone)]
pub enum PreparedImage {
    Sparse(ConvInput),
    Dense(Vec<f64>),
}

impl SvddNetwork {
    pub fn new(arch: SvddArch, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (g1, g2) = arch.geoms();
        let conv1 = Tensor::he_normal(&g1.weight_shape(), g1.patch_len(), &mut rng);
        let conv2 = Tensor::he_normal(&g2.weight_shape(), g2.patch_len(), &mut rng);
        let fc = Tensor::he_normal(&[arch.latent, g2.out_len()], g2.out_len(), &mut rng);
        Self {
            arch,
            slope: LEAKY_SLOPE,
            conv1,
            conv2,
            fc,
        }
    }

    pub fn params(&self) -> [&Tensor; 3] {
        [&self.conv1, &self.conv2, &self.fc]
    }

    pub fn params_mut(&mut self) -> [&mut Tensor; 3] {
        [&mut self.conv1, &mut self.conv2, &mut self.fc]
    }

    pub fn zero_grads(&self) -> Vec<Tensor> {
        self.params().iter().map(|t| Tensor::zeros(t.shape())).collect()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.params().iter().map(|t| t.frobenius_sq()).sum()
    }

    pub fn prepare(&self, input: &[f64]) -> Result<PreparedImage, NeuralError> {
        let expected = self.arch.input_len();
        if input.len() != expected {
            return Err(NeuralError::ShapeMismatch {
                expected,
                actual: input.len(),
            });
        }
        let (g1, _) = self.arch.geoms();
        Ok(match prepare(&g1, input) {
            sparse @ ConvInput::Sparse(_) => PreparedImage::Sparse(sparse),
            ConvInput::Cols(_) => PreparedImage::Dense(input.to_vec()),
        })
    }

    pub fn prepare_image(&self, image: &EncodedImage) -> Result<PreparedImage, NeuralError> {
        self.prepare(&image.to_chw())
    }

    fn forward_prepared(&self, input: &PreparedImage) -> (Vec<f64>, SvddCache) {
        let (g1, g2) = self.arch.geoms();
        let input1 = match input {
            PreparedImage::Sparse(s) => s.clone(),
            PreparedImage::Dense(raw) => ConvInput::Cols(im2col(&g1, raw)),
        };
        let z1 = conv_forward(&g1, self.conv1.data(), &input1);
        let a1 = leaky_relu(&z1, self.slope);
        let cols2 = ConvInput::Cols(im2col(&g2, &a1));
        let z2 = conv_forward(&g2, self.conv2.data(), &cols2);
        let a2 = leaky_relu(&z2, self.slope);
        let y = dense_forward(self.fc.data(), None, &a2, self.arch.latent);
        (
            y,
            SvddCache {
                input1,
                z1,
                cols2,
                z2,
                a2,
            },
        )
    }

    /// Embedding of a channel-major input in `[0, 1]`.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NeuralError> {
        let prepared = self.prepare(input)?;
        Ok(self.forward_prepared(&prepared).0)
    }

    pub fn embed(&self, image: &EncodedImage) -> Result<Vec<f64>, NeuralError> {
        self.forward(&image.to_chw())
    }

    /// Inputs of the two leaky ReLUs, conv1 then conv2, channel-major.
    pub fn pre_activations(&self, input: &PreparedImage) -> [Vec<f64>; 2] {
        let (_, cache) = self.forward_prepared(input);
        [cache.z1, cache.z2]
    }

    /// Accumulate parameter gradients for output gradient `dy`.
    fn backward(&self, cache: &SvddCache, dy: &[f64], grads: &mut [Tensor]) {
        let (g1, g2) = self.arch.geoms();
        let mut da2 = dense_backward(self.fc.data(), &cache.a2, dy, grads[2].data_mut(), None);
        leaky_relu_backward(&cache.z2, self.slope, &mut da2);
        conv_backward_weights(&g2, &cache.cols2, &da2, grads[1].data_mut());
        let mut da1 = conv_backward_input(&g2, self.conv2.data(), &da2);
        leaky_relu_backward(&cache.z1, self.slope, &mut da1);
        conv_backward_weights(&g1, &cache.input1, &da1, grads[0].data_mut());
    }
}

/// Verdict of the decision rule `f(x) = s(x) - R`: positive rejects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Accept,
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub verdict: Verdict,
    pub score: f64,
    pub decision_value: f64,
}

impl Decision {
    pub fn from_score(score: f64, threshold: f64) -> Self {
        let decision_value = score - threshold;
        Self {
            verdict: if decision_value > 0.0 {
                Verdict::Reject
            } else {
                Verdict::Accept
            },
            score,
            decision_value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 200,
            lr: 1e-3,
            batch_size: 64,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: usize,
    /// Sample-weighted mean of the batch objectives in each epoch.
    pub epoch_losses: Vec<f64>,
    /// Objective over the full training set after the last update.
    pub final_loss: f64,
}

/// Training provenance stored alongside the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrainingMeta {
    pub seed: u64,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub final_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvddModel {
    pub network: SvddNetwork,
    pub center: Vec<f64>,
    pub threshold: Option<f64>,
    pub weight_decay: f64,
    pub meta: TrainingMeta,
}

/// Mean embedding of the images with near-zero coordinates pushed to `±CENTER_EPS`.
pub fn init_center(net: &SvddNetwork, images: &[PreparedImage]) -> Result<Vec<f64>, NeuralError> {
    if images.is_empty() {
        return Err(NeuralError::EmptyInput);
    }
    let mut c = vec![0.0; net.arch.latent];
    for img in images {
        let (y, _) = net.forward_prepared(img);
        for (ci, yi) in c.iter_mut().zip(&y) {
            *ci += yi;
        }
    }
    let n = images.len() as f64;
    Ok(c.into_iter().map(|v| snap_center(v / n)).collect())
}

pub fn snap_center(v: f64) -> f64 {
    if v.abs() < CENTER_EPS {
        if v < 0.0 {
            -CENTER_EPS
        } else {
            CENTER_EPS
        }
    } else {
        v
    }
}

/// Objective value and parameter gradients over a batch.
pub fn svdd_loss_and_grad(
    net: &SvddNetwork,
    center: &[f64],
    weight_decay: f64,
    batch: &[&PreparedImage],
) -> (f64, Vec<Tensor>) {
    let mut grads = net.zero_grads();
    let n = batch.len() as f64;
    let mut dist = 0.0;
    for img in batch {
        let (y, cache) = net.forward_prepared(img);
        let diff: Vec<f64> = y.iter().zip(center).map(|(a, b)| a - b).collect();
        dist += diff.iter().map(|d| d * d).sum::<f64>();
        let dy: Vec<f64> = diff.iter().map(|d| 2.0 * d / n).collect();
        net.backward(&cache, &dy, &mut grads);
    }
    for (g, p) in grads.iter_mut().zip(net.params()) {
        for (gi, wi) in g.data_mut().iter_mut().zip(p.data()) {
            *gi += 2.0 * weight_decay * wi;
        }
    }
    (dist / n + weight_decay * net.frobenius_sq(), grads)
}

/// Objective over a full image set.
pub fn svdd_objective(net: &SvddNetwork, center: &[f64], weight_decay: f64, images: &[PreparedImage]) -> f64 {
    let dist: f64 = images
        .iter()
        .map(|img| {
            let (y, _) = net.forward_prepared(img);
            y.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
        })
        .sum();
    dist / images.len() as f64 + weight_decay * net.frobenius_sq()
}

impl SvddModel {
    /// Untrained model with a freshly initialized network and no center yet.
    pub fn new(arch: SvddArch, weight_decay: f64, seed: u64) -> Self {
        Self {
            network: SvddNetwork::new(arch, seed),
            center: Vec::new(),
            threshold: None,
            weight_decay,
            meta: TrainingMeta::default(),
        }
    }

    pub fn prepare_all(&self, images: &[EncodedImage]) -> Result<Vec<PreparedImage>, NeuralError> {
        images.iter().map(|i| self.network.prepare_image(i)).collect()
    }

    /// Set the center from the mean initial embedding, then train.
    pub fn fit(&mut self, images: &[EncodedImage], opts: &TrainOptions) -> Result<TrainReport, NeuralError> {
        let prepared = self.prepare_all(images)?;
        self.center = init_center(&self.network, &prepared)?;
        self.train_prepared(&prepared, opts)
    }

    /// Adam on the objective with seeded shuffling. The center is left untouched.
    pub fn train_prepared(&mut self, images: &[PreparedImage], opts: &TrainOptions) -> Result<TrainReport, NeuralError> {
        if images.is_empty() {
            return Err(NeuralError::EmptyInput);
        }
        if self.center.len() != self.network.arch.latent {
            return Err(NeuralError::MissingCenter);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut adam = Adam::new(
            AdamConfig::with_lr(opts.lr),
            self.network.params().iter().map(|t| t.numel()),
        );
        let batch_size = opts.batch_size.max(1);
        let mut order: Vec<usize> = (0..images.len()).collect();
        let mut history = Vec::with_capacity(opts.epochs);
        for epoch in 0..opts.epochs {
            order.shuffle(&mut rng);
            let mut total = 0.0;
            for (b, chunk) in order.chunks(batch_size).enumerate() {
                let batch: Vec<&PreparedImage> = chunk.iter().map(|&i| &images[i]).collect();
                let (loss, grads) = svdd_loss_and_grad(&self.network, &self.center, self.weight_decay, &batch);
                if !loss.is_finite() {
                    return Err(NeuralError::NonFiniteLoss {
                        epoch,
                        batch: b,
                        history,
                    });
                }
                total += loss * chunk.len() as f64;
                adam.step(&mut self.network.params_mut(), &grads);
            }
            history.push(total / images.len() as f64);
        }
        let final_loss = svdd_objective(&self.network, &self.center, self.weight_decay, images);
        if !final_loss.is_finite() {
            return Err(NeuralError::NonFiniteLoss {
                epoch: opts.epochs,
                batch: 0,
                history,
            });
        }
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

    /// Anomaly score `||phi(x) - c||`.
    pub fn score(&self, image: &EncodedImage) -> Result<f64, NeuralError> {
        let y = self.network.embed(image)?;
        Ok(distance(&y, &self.center))
    }

    pub fn score_prepared(&self, image: &PreparedImage) -> f64 {
        let (y, _) = self.network.forward_prepared(image);
        distance(&y, &self.center)
    }

    pub fn decide(&self, image: &EncodedImage) -> Result<Decision, NeuralError> {
        let threshold = self.threshold.ok_or(NeuralError::Uncalibrated)?;
        Ok(Decision::from_score(self.score(image)?, threshold))
    }
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
