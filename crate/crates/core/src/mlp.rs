//! Single-hidden-layer perceptron used as the neural benchmark: sigmoid
//! hidden units, linear output, mean squared error, mini-batch gradient
//! descent.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{dot, Matrix};
use crate::sae::{Activation, TrainConfig};
use crate::seed::rng_from_seed;
use rand::Rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MlpError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite training loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("invalid model document: {0}")]
    InvalidModel(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    /// `hidden x input`.
    pub w_hidden: Matrix,
    pub b_hidden: Vec<f64>,
    pub w_out: Vec<f64>,
    pub b_out: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrad {
    pub w_hidden: Matrix,
    pub b_hidden: Vec<f64>,
    pub w_out: Vec<f64>,
    pub b_out: f64,
}

impl Mlp {
    pub fn init<R: Rng>(input: usize, hidden: usize, init_scale: Option<f64>, rng: &mut R) -> Self {
        let s1 = init_scale.unwrap_or(1.0 / (input.max(1) as f64).sqrt());
        let s2 = init_scale.unwrap_or(1.0 / (hidden as f64).sqrt());
        let w: Vec<f64> = (0..hidden * input).map(|_| rng.random_range(-s1..=s1)).collect();
        let w_out = (0..hidden).map(|_| rng.random_range(-s2..=s2)).collect();
        Self {
            w_hidden: Matrix::new(hidden, input, w).expect("shape"),
            b_hidden: vec![0.0; hidden],
            w_out,
            b_out: 0.0,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_hidden.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.b_hidden.len()
    }

    fn hidden_into(&self, row: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = Activation::Sigmoid.apply(dot(self.w_hidden.row(k), row) + self.b_hidden[k]);
        }
    }

    fn forward_row(&self, row: &[f64], hidden: &mut [f64]) -> f64 {
        self.hidden_into(row, hidden);
        dot(hidden, &self.w_out) + self.b_out
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>, MlpError> {
        if x.rows() > 0 && x.cols() != self.input_dim() {
            return Err(MlpError::DimensionMismatch(format!(
                "input width {} but network expects {}",
                x.cols(),
                self.input_dim()
            )));
        }
        let mut h = vec![0.0; self.hidden_dim()];
        Ok(x.row_iter().map(|r| self.forward_row(r, &mut h)).collect())
    }

    /// Mean squared error over all rows.
    pub fn loss(&self, x: &Matrix, y: &[f64]) -> Result<f64, MlpError> {
        let p = self.predict(x)?;
        if p.len() != y.len() {
            return Err(MlpError::DimensionMismatch(format!(
                "{} rows but {} targets",
                p.len(),
                y.len()
            )));
        }
        Ok(p.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len().max(1) as f64)
    }

    /// Mean squared error over `batch` and its exact gradient.
    pub fn loss_and_gradient(&self, x: &Matrix, y: &[f64], batch: &[usize]) -> (f64, MlpGrad) {
        let hd = self.hidden_dim();
        let d = self.input_dim();
        let mut g = MlpGrad {
            w_hidden: Matrix::zeros(hd, d),
            b_hidden: vec![0.0; hd],
            w_out: vec![0.0; hd],
            b_out: 0.0,
        };
        let scale = 1.0 / batch.len() as f64;
        let mut h = vec![0.0; hd];
        let mut loss = 0.0;
        for &i in batch {
            let row = x.row(i);
            let err = self.forward_row(row, &mut h) - y[i];
            loss += err * err;
            let dout = 2.0 * err * scale;
            g.b_out += dout;
            for k in 0..hd {
                g.w_out[k] += dout * h[k];
                let dz = dout * self.w_out[k] * h[k] * (1.0 - h[k]);
                g.b_hidden[k] += dz;
                for (gw, xv) in g.w_hidden.row_mut(k).iter_mut().zip(row) {
                    *gw += dz * xv;
                }
            }
        }
        (loss * scale, g)
    }

    fn apply_gradient(&mut self, g: &MlpGrad, lr: f64) {
        for (w, gw) in self.w_hidden.as_mut_slice().iter_mut().zip(g.w_hidden.as_slice()) {
            *w -= lr * gw;
        }
        for (b, gb) in self.b_hidden.iter_mut().zip(&g.b_hidden) {
            *b -= lr * gb;
        }
        for (w, gw) in self.w_out.iter_mut().zip(&g.w_out) {
            *w -= lr * gw;
        }
        self.b_out -= lr * g.b_out;
    }

    pub fn validate(&self) -> Result<(), MlpError> {
        let h = self.hidden_dim();
        if h == 0 || self.w_hidden.rows() != h || self.w_out.len() != h {
            return Err(MlpError::InvalidModel("inconsistent hidden width".into()));
        }
        let finite = self.w_hidden.is_finite()
            && self.b_hidden.iter().chain(&self.w_out).all(|v| v.is_finite())
            && self.b_out.is_finite();
        if !finite {
            return Err(MlpError::InvalidModel("non-finite parameter".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("network serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, MlpError> {
        let m: Self =
            serde_json::from_str(text).map_err(|e| MlpError::InvalidModel(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }
}

pub fn train_network(x: &Matrix, y: &[f64], hidden: usize, cfg: &TrainConfig) -> Result<Mlp, MlpError> {
    cfg.validate()
        .map_err(|e| MlpError::InvalidConfig(e.to_string()))?;
    if x.rows() == 0 || x.rows() != y.len() {
        return Err(MlpError::DimensionMismatch(format!(
            "{} rows but {} targets",
            x.rows(),
            y.len()
        )));
    }
    if hidden == 0 {
        return Err(MlpError::InvalidConfig("hidden width must be >= 1".into()));
    }
    let mut rng = rng_from_seed(cfg.seed);
    let mut net = Mlp::init(x.cols(), hidden, cfg.init_scale, &mut rng);
    let n = x.rows();
    let mut order: Vec<usize> = (0..n).collect();
    let full_batch = cfg.batch_size >= n;
    for epoch in 0..cfg.epochs {
        if !full_batch {
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks(cfg.batch_size.min(n)) {
            let (l, g) = net.loss_and_gradient(x, y, chunk);
            if !l.is_finite() {
                return Err(MlpError::NonFiniteLoss { epoch: epoch + 1 });
            }
            net.apply_gradient(&g, cfg.learning_rate);
        }
    }
    if !net.loss(x, y)?.is_finite() {
        return Err(MlpError::NonFiniteLoss { epoch: cfg.epochs });
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            learning_rate: 0.5,
            batch_size: 8,
            seed: 11,
            init_scale: None,
        }
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let x = Matrix::from_rows(&[vec![0.1, 0.2], vec![0.3, 0.4]]).unwrap();
        let net = train_network(&x, &[1.0, 2.0], 3, &cfg(0)).unwrap();
        let mut rng = rng_from_seed(11);
        assert_eq!(net, Mlp::init(2, 3, None, &mut rng));
    }

    #[test]
    fn fits_a_line() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64 / 29.0]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let y: Vec<f64> = rows.iter().map(|r| 3.0 * r[0] + 1.0).collect();
        let net = train_network(&x, &y, 4, &cfg(2000)).unwrap();
        let rmse = net.loss(&x, &y).unwrap().sqrt();
        assert!(rmse < 1e-2, "{rmse}");
    }

    #[test]
    fn json_round_trip() {
        let x = Matrix::from_rows(&[vec![0.1, 0.2], vec![0.3, 0.4]]).unwrap();
        let net = train_network(&x, &[1.0, 2.0], 3, &cfg(5)).unwrap();
        assert_eq!(Mlp::from_json(&net.to_json()).unwrap(), net);
        assert!(Mlp::from_json(r#"{"w_hidden":{"rows":1,"cols":1,"data":[0.0]},"b_hidden":[],"w_out":[],"b_out":0.0}"#).is_err());
    }

    #[test]
    fn width_mismatch() {
        let mut rng = rng_from_seed(1);
        let net = Mlp::init(3, 2, None, &mut rng);
        assert!(net.predict(&Matrix::zeros(1, 2)).is_err());
        assert!(net.predict(&Matrix::empty(2)).unwrap().is_empty());
    }
}
