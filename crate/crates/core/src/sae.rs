//! Autoencoders trained by backpropagation and their greedy layer-wise
//! stacking into a feature compressor.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;
use crate::seed::{derive_seed, rng_from_seed};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SaeError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite reconstruction loss at epoch {epoch} (learning rate too high?)")]
    NonFiniteLoss { epoch: usize },
    #[error("layer sizes must be nonincreasing, got {0:?}")]
    NonDecreasingLayerSizes(Vec<usize>),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("invalid model document: {0}")]
    InvalidModel(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Sigmoid,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation output `y = f(x)`.
    #[inline]
    pub fn derivative_at_output(self, y: f64) -> f64 {
        match self {
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Half-width of the uniform weight initialization; `None` uses
    /// `0.5 / sqrt(fan_in)`.
    #[serde(default)]
    pub init_scale: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            learning_rate: 1.0,
            batch_size: 32,
            seed: 0,
            init_scale: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), SaeError> {
        if self.batch_size == 0 {
            return Err(SaeError::InvalidConfig("batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(SaeError::InvalidConfig("learning_rate must be positive".into()));
        }
        if let Some(s) = self.init_scale {
            if !(s > 0.0 && s.is_finite()) {
                return Err(SaeError::InvalidConfig("init_scale must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

/// Single-hidden-layer autoencoder. `w_enc` is `hidden x input`, `w_dec`
/// is `input x hidden`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Autoencoder {
    pub w_enc: Matrix,
    pub b_enc: Vec<f64>,
    pub w_dec: Matrix,
    pub b_dec: Vec<f64>,
    pub activation: Activation,
}

/// Gradient of the reconstruction loss, same layout as [`Autoencoder`].
#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderGrad {
    pub w_enc: Matrix,
    pub b_enc: Vec<f64>,
    pub w_dec: Matrix,
    pub b_dec: Vec<f64>,
}

impl Autoencoder {
    /// Uniform `[-s, s]` weights, zero biases.
    pub fn init<R: Rng>(
        input: usize,
        hidden: usize,
        activation: Activation,
        init_scale: Option<f64>,
        rng: &mut R,
    ) -> Self {
        let s_enc = init_scale.unwrap_or(0.5 / (input as f64).sqrt());
        let s_dec = init_scale.unwrap_or(0.5 / (hidden as f64).sqrt());
        let w_enc: Vec<f64> = (0..hidden * input)
            .map(|_| rng.random_range(-s_enc..=s_enc))
            .collect();
        let w_dec: Vec<f64> = (0..input * hidden)
            .map(|_| rng.random_range(-s_dec..=s_dec))
            .collect();
        Self {
            w_enc: Matrix::new(hidden, input, w_enc).expect("shape"),
            b_enc: vec![0.0; hidden],
            w_dec: Matrix::new(input, hidden, w_dec).expect("shape"),
            b_dec: vec![0.0; input],
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_enc.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_enc.rows()
    }

    pub fn validate(&self) -> Result<(), SaeError> {
        let (h, d) = (self.hidden_dim(), self.input_dim());
        let bad = |m: String| Err(SaeError::InvalidModel(m));
        if h == 0 || h > d {
            return bad(format!("hidden width {h} must be in 1..={d}"));
        }
        if self.b_enc.len() != h {
            return bad(format!("encoder bias has {} entries, expected {h}", self.b_enc.len()));
        }
        if self.w_dec.rows() != d || self.w_dec.cols() != h {
            return bad(format!(
                "decoder is {}x{}, expected {d}x{h}",
                self.w_dec.rows(),
                self.w_dec.cols()
            ));
        }
        if self.b_dec.len() != d {
            return bad(format!("decoder bias has {} entries, expected {d}", self.b_dec.len()));
        }
        let finite = self.w_enc.is_finite()
            && self.w_dec.is_finite()
            && self.b_enc.iter().chain(&self.b_dec).all(|v| v.is_finite());
        if !finite {
            return bad("non-finite weight".into());
        }
        Ok(())
    }

    #[inline]
    fn encode_into(&self, x: &[f64], h: &mut [f64]) {
        for (k, hk) in h.iter_mut().enumerate() {
            let w = self.w_enc.row(k);
            let mut z = self.b_enc[k];
            for (wi, xi) in w.iter().zip(x) {
                z += wi * xi;
            }
            *hk = self.activation.apply(z);
        }
    }

    #[inline]
    fn decode_into(&self, h: &[f64], out: &mut [f64]) {
        for (i, oi) in out.iter_mut().enumerate() {
            let w = self.w_dec.row(i);
            let mut z = self.b_dec[i];
            for (wk, hk) in w.iter().zip(h) {
                z += wk * hk;
            }
            *oi = self.activation.apply(z);
        }
    }

    /// Reconstructions of every row.
    pub fn reconstruct(&self, x: &Matrix) -> Result<Matrix, SaeError> {
        let h = encode(self, x)?;
        let mut out = Matrix::zeros(x.rows(), self.input_dim());
        for i in 0..x.rows() {
            self.decode_into(h.row(i), out.row_mut(i));
        }
        Ok(out)
    }

    /// Mean squared reconstruction error over all cells of `x`.
    pub fn loss(&self, x: &Matrix) -> Result<f64, SaeError> {
        self.check_width(x)?;
        let (d, h) = (self.input_dim(), self.hidden_dim());
        let mut hid = vec![0.0; h];
        let mut out = vec![0.0; d];
        let mut total = 0.0;
        for row in x.row_iter() {
            self.encode_into(row, &mut hid);
            self.decode_into(&hid, &mut out);
            total += out.iter().zip(row).map(|(o, t)| (o - t) * (o - t)).sum::<f64>();
        }
        Ok(total / (x.rows() * d) as f64)
    }

    /// Loss over the rows `batch` of `x` and its gradient.
    pub fn loss_and_gradient(&self, x: &Matrix, batch: &[usize]) -> (f64, AutoencoderGrad) {
        let (d, h) = (self.input_dim(), self.hidden_dim());
        let mut g = AutoencoderGrad {
            w_enc: Matrix::zeros(h, d),
            b_enc: vec![0.0; h],
            w_dec: Matrix::zeros(d, h),
            b_dec: vec![0.0; d],
        };
        let norm = 2.0 / (batch.len() * d) as f64;
        let mut hid = vec![0.0; h];
        let mut out = vec![0.0; d];
        let mut d_out = vec![0.0; d];
        let mut d_hid = vec![0.0; h];
        let mut total = 0.0;
        for &r in batch {
            let row = x.row(r);
            self.encode_into(row, &mut hid);
            self.decode_into(&hid, &mut out);
            for i in 0..d {
                let e = out[i] - row[i];
                total += e * e;
                d_out[i] = norm * e * self.activation.derivative_at_output(out[i]);
            }
            d_hid.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..d {
                let di = d_out[i];
                g.b_dec[i] += di;
                let w = self.w_dec.row(i);
                let gw = g.w_dec.row_mut(i);
                for k in 0..h {
                    gw[k] += di * hid[k];
                    d_hid[k] += w[k] * di;
                }
            }
            for k in 0..h {
                let dk = d_hid[k] * self.activation.derivative_at_output(hid[k]);
                g.b_enc[k] += dk;
                let gw = g.w_enc.row_mut(k);
                for (gj, xj) in gw.iter_mut().zip(row) {
                    *gj += dk * xj;
                }
            }
        }
        (total / (batch.len() * d) as f64, g)
    }

    fn apply_gradient(&mut self, g: &AutoencoderGrad, lr: f64) {
        let step = |p: &mut [f64], q: &[f64]| p.iter_mut().zip(q).for_each(|(a, b)| *a -= lr * b);
        step(self.w_enc.as_mut_slice(), g.w_enc.as_slice());
        step(&mut self.b_enc, &g.b_enc);
        step(self.w_dec.as_mut_slice(), g.w_dec.as_slice());
        step(&mut self.b_dec, &g.b_dec);
    }

    fn check_width(&self, x: &Matrix) -> Result<(), SaeError> {
        if x.cols() != self.input_dim() {
            return Err(SaeError::DimensionMismatch(format!(
                "input has {} columns, autoencoder expects {}",
                x.cols(),
                self.input_dim()
            )));
        }
        Ok(())
    }
}

/// Loss trajectory of one autoencoder training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossHistory {
    /// Full-set loss at initialization.
    pub initial: f64,
    /// Mean mini-batch loss per epoch.
    pub epochs: Vec<f64>,
    /// Full-set loss after the last update.
    pub final_loss: f64,
}

pub fn train_autoencoder(x: &Matrix, hidden: usize, cfg: &TrainConfig) -> Result<Autoencoder, SaeError> {
    train_autoencoder_logged(x, hidden, cfg).map(|(ae, _)| ae)
}

/// Mini-batch gradient descent on the mean squared reconstruction error.
/// When `batch_size` covers the sample the whole set is one batch in row
/// order; otherwise rows are reshuffled each epoch.
pub fn train_autoencoder_logged(
    x: &Matrix,
    hidden: usize,
    cfg: &TrainConfig,
) -> Result<(Autoencoder, LossHistory), SaeError> {
    cfg.validate()?;
    let d = x.cols();
    if x.rows() == 0 {
        return Err(SaeError::DimensionMismatch("training matrix has no rows".into()));
    }
    if hidden == 0 || hidden > d {
        return Err(SaeError::DimensionMismatch(format!(
            "hidden width {hidden} must be in 1..={d}"
        )));
    }
    if !x.is_finite() {
        return Err(SaeError::DimensionMismatch("training matrix has non-finite cells".into()));
    }

    let mut rng = rng_from_seed(cfg.seed);
    let mut ae = Autoencoder::init(d, hidden, Activation::Sigmoid, cfg.init_scale, &mut rng);
    let initial = ae.loss(x)?;

    let n = x.rows();
    let mut order: Vec<usize> = (0..n).collect();
    let full_batch = cfg.batch_size >= n;
    let mut epochs = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        if !full_batch {
            order.shuffle(&mut rng);
        }
        let mut sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size.min(n)) {
            let (l, g) = ae.loss_and_gradient(x, chunk);
            if !l.is_finite() {
                return Err(SaeError::NonFiniteLoss { epoch: epoch + 1 });
            }
            ae.apply_gradient(&g, cfg.learning_rate);
            sum += l;
            batches += 1;
        }
        epochs.push(sum / batches as f64);
    }
    let final_loss = ae.loss(x)?;
    if !final_loss.is_finite() {
        return Err(SaeError::NonFiniteLoss { epoch: cfg.epochs });
    }
    Ok((
        ae,
        LossHistory {
            initial,
            epochs,
            final_loss,
        },
    ))
}

/// `activation(W_enc x + b_enc)` for every row.
pub fn encode(ae: &Autoencoder, x: &Matrix) -> Result<Matrix, SaeError> {
    ae.check_width(x)?;
    let mut out = Matrix::zeros(x.rows(), ae.hidden_dim());
    for i in 0..x.rows() {
        ae.encode_into(x.row(i), out.row_mut(i));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerLog {
    pub initial_loss: f64,
    pub final_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackedAutoencoder {
    pub layers: Vec<Autoencoder>,
    pub training_log: Vec<LayerLog>,
    pub config: TrainConfig,
}

impl StackedAutoencoder {
    pub fn empty(config: TrainConfig) -> Self {
        Self {
            layers: Vec::new(),
            training_log: Vec::new(),
            config,
        }
    }

    /// Width of the final code, or `None` for an empty stack.
    pub fn output_dim(&self) -> Option<usize> {
        self.layers.last().map(Autoencoder::hidden_dim)
    }

    pub fn validate(&self) -> Result<(), SaeError> {
        for (k, layer) in self.layers.iter().enumerate() {
            layer.validate()?;
            if k > 0 && layer.input_dim() != self.layers[k - 1].hidden_dim() {
                return Err(SaeError::InvalidModel(format!(
                    "layer {k} input width {} does not match layer {} hidden width {}",
                    layer.input_dim(),
                    k - 1,
                    self.layers[k - 1].hidden_dim()
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("stack serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SaeError> {
        let s: Self =
            serde_json::from_str(text).map_err(|e| SaeError::InvalidModel(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }
}

/// Training config for layer `k` (0-based) of a stack.
pub fn layer_config(cfg: &TrainConfig, k: usize) -> TrainConfig {
    cfg.with_seed(derive_seed(cfg.seed, k as u64))
}

/// Greedy layer-wise training: layer `k` is trained on the codes of layer
/// `k - 1`.
pub fn train_sae(
    x: &Matrix,
    layer_sizes: &[usize],
    cfg: &TrainConfig,
) -> Result<StackedAutoencoder, SaeError> {
    if layer_sizes.windows(2).any(|w| w[1] > w[0]) {
        return Err(SaeError::NonDecreasingLayerSizes(layer_sizes.to_vec()));
    }
    if let Some(&first) = layer_sizes.first() {
        if first > x.cols() {
            return Err(SaeError::DimensionMismatch(format!(
                "first layer width {first} exceeds input width {}",
                x.cols()
            )));
        }
    }
    let mut stack = StackedAutoencoder::empty(cfg.clone());
    let mut input = x.clone();
    for (k, &size) in layer_sizes.iter().enumerate() {
        let (ae, hist) = train_autoencoder_logged(&input, size, &layer_config(cfg, k))?;
        if k + 1 < layer_sizes.len() {
            input = encode(&ae, &input)?;
        }
        stack.layers.push(ae);
        stack.training_log.push(LayerLog {
            initial_loss: hist.initial,
            final_loss: hist.final_loss,
        });
    }
    Ok(stack)
}

/// Applies every layer's encoder in order. An empty stack is the identity.
pub fn sae_encode(sae: &StackedAutoencoder, x: &Matrix) -> Result<Matrix, SaeError> {
    let mut cur = x.clone();
    for layer in &sae.layers {
        cur = encode(layer, &cur)?;
    }
    Ok(cur)
}

/// Default architecture `[ceil(d/2), ceil(d/4)]`.
pub fn default_layer_sizes(input_width: usize) -> Vec<usize> {
    let a = input_width.div_ceil(2).max(1);
    let b = input_width.div_ceil(4).max(1);
    vec![a, b]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = rng_from_seed(seed);
        let data = (0..rows * cols).map(|_| rng.random::<f64>()).collect();
        Matrix::new(rows, cols, data).unwrap()
    }

    fn cfg(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            learning_rate: 1.0,
            batch_size: 16,
            seed: 5,
            init_scale: None,
        }
    }

    #[test]
    fn zero_weights_encode_to_half() {
        let ae = Autoencoder {
            w_enc: Matrix::zeros(2, 3),
            b_enc: vec![0.0; 2],
            w_dec: Matrix::zeros(3, 2),
            b_dec: vec![0.0; 3],
            activation: Activation::Sigmoid,
        };
        let out = encode(&ae, &random_matrix(4, 3, 1)).unwrap();
        assert!(out.as_slice().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn encode_shape_and_row_permutation() {
        let x = random_matrix(5, 4, 2);
        let ae = train_autoencoder(&x, 3, &cfg(5)).unwrap();
        let one = encode(&ae, &x.select_rows(&[0])).unwrap();
        assert_eq!((one.rows(), one.cols()), (1, 3));
        let perm = [3, 1, 4, 0, 2];
        let a = encode(&ae, &x.select_rows(&perm)).unwrap();
        let b = encode(&ae, &x).unwrap().select_rows(&perm);
        assert_eq!(a, b);
        assert!(matches!(
            encode(&ae, &random_matrix(2, 5, 0)),
            Err(SaeError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let x = random_matrix(10, 4, 3);
        let c = cfg(0);
        let ae = train_autoencoder(&x, 2, &c).unwrap();
        let mut rng = rng_from_seed(c.seed);
        let init = Autoencoder::init(4, 2, Activation::Sigmoid, None, &mut rng);
        assert_eq!(ae, init);
    }

    #[test]
    fn memorizes_a_constant_row() {
        let row = [0.2, 0.7, 0.4, 0.9];
        let x = Matrix::from_rows(&vec![row.to_vec(); 50]).unwrap();
        let c = TrainConfig {
            epochs: 500,
            learning_rate: 1.0,
            batch_size: 50,
            seed: 1,
            init_scale: None,
        };
        let ae = train_autoencoder(&x, 2, &c).unwrap();
        let mse = ae.loss(&x).unwrap();
        assert!(mse < 1e-4, "mse {mse}");
    }

    #[test]
    fn training_is_deterministic_and_reduces_loss() {
        let x = random_matrix(40, 6, 4);
        let (a, ha) = train_autoencoder_logged(&x, 3, &cfg(200)).unwrap();
        let (b, _) = train_autoencoder_logged(&x, 3, &cfg(200)).unwrap();
        assert_eq!(a, b);
        assert!(ha.final_loss <= ha.initial);
        assert!(ha.epochs.last().unwrap() <= &ha.epochs[0]);
    }

    #[test]
    fn divergence_is_reported() {
        // Finite inputs whose squared error overflows.
        let mut x = random_matrix(20, 4, 6);
        x.set(3, 1, 1e200);
        assert!(matches!(
            train_autoencoder(&x, 2, &cfg(3)),
            Err(SaeError::NonFiniteLoss { .. })
        ));
    }

    #[test]
    fn hidden_width_bounds() {
        let x = random_matrix(5, 3, 7);
        assert!(train_autoencoder(&x, 0, &cfg(1)).is_err());
        assert!(train_autoencoder(&x, 4, &cfg(1)).is_err());
        assert!(train_autoencoder(&Matrix::empty(3), 2, &cfg(1)).is_err());
    }

    #[test]
    fn stack_shapes_and_chaining() {
        let x = random_matrix(30, 8, 8);
        let one = train_sae(&x, &[4], &cfg(20)).unwrap();
        assert_eq!(one.layers.len(), 1);
        assert_eq!(
            sae_encode(&one, &x).unwrap(),
            encode(&one.layers[0], &x).unwrap()
        );

        let two = train_sae(&x, &[4, 2], &cfg(20)).unwrap();
        let codes = sae_encode(&two, &x).unwrap();
        assert_eq!(codes.cols(), 2);
        let manual = encode(&two.layers[1], &encode(&two.layers[0], &x).unwrap()).unwrap();
        assert_eq!(codes, manual);

        // Layer 2 must have been trained on layer 1's codes.
        let l1 = encode(&two.layers[0], &x).unwrap();
        let l2 = train_autoencoder(&l1, 2, &layer_config(&cfg(20), 1)).unwrap();
        assert_eq!(l2, two.layers[1]);
    }

    #[test]
    fn stack_errors_and_empty_identity() {
        let x = random_matrix(10, 8, 9);
        assert!(matches!(
            train_sae(&x, &[2, 4], &cfg(1)),
            Err(SaeError::NonDecreasingLayerSizes(_))
        ));
        assert!(train_sae(&x, &[9], &cfg(1)).is_err());
        let empty = train_sae(&x, &[], &cfg(1)).unwrap();
        assert_eq!(sae_encode(&empty, &x).unwrap(), x);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let x = random_matrix(12, 6, 10);
        let s = train_sae(&x, &[3, 2], &cfg(10)).unwrap();
        let back = StackedAutoencoder::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);

        let mut broken = s.clone();
        broken.layers[1].b_dec.pop();
        assert!(StackedAutoencoder::from_json(&broken.to_json()).is_err());
        let mut swapped = s;
        swapped.layers.swap(0, 1);
        assert!(StackedAutoencoder::from_json(&swapped.to_json()).is_err());
    }

    #[test]
    fn default_sizes() {
        assert_eq!(default_layer_sizes(8), vec![4, 2]);
        assert_eq!(default_layer_sizes(25), vec![13, 7]);
        assert_eq!(default_layer_sizes(1), vec![1, 1]);
    }
}
