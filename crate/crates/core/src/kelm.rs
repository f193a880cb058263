//! Extreme learning machine and its kernel form, the regression head of
//! SAKE.
//!
//! Both heads solve a ridge system in the sample space:
//! `(I/C + G) a = y`, with `G = H H'` for the ELM (random sigmoid hidden
//! layer) and `G = K` (the Gaussian Gram matrix) for the KELM. The
//! ELM output weights are `beta = H' a`; the KELM keeps `a` as dual weights
//! and predicts `sum_i a_i k(x, x_i)`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{dot, solve_spd, squared_distance, LinalgError, Matrix};
use crate::sae::Activation;
use crate::seed::rng_from_seed;

/// Relative residual bound for the ridge solve.
pub const SOLVE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KelmError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("ridge system could not be solved: {0}")]
    SingularSystem(LinalgError),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid model document: {0}")]
    InvalidModel(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    Gaussian { gamma: f64 },
}

impl KernelSpec {
    pub fn gaussian(gamma: f64) -> Result<Self, KelmError> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(KelmError::InvalidParameter(format!("gamma must be > 0, got {gamma}")));
        }
        Ok(KernelSpec::Gaussian { gamma })
    }
}

pub(crate) trait Kernel {
    fn eval(&self, u: &[f64], v: &[f64]) -> f64;
}

impl Kernel for KernelSpec {
    #[inline]
    fn eval(&self, u: &[f64], v: &[f64]) -> f64 {
        match *self {
            KernelSpec::Gaussian { gamma } => (-gamma * squared_distance(u, v)).exp(),
        }
    }
}

/// `exp(-gamma * ||u - v||^2)`.
pub fn gaussian_kernel(u: &[f64], v: &[f64], gamma: f64) -> Result<f64, KelmError> {
    if u.len() != v.len() {
        return Err(KelmError::DimensionMismatch(format!(
            "vectors of length {} and {}",
            u.len(),
            v.len()
        )));
    }
    Ok(KernelSpec::gaussian(gamma)?.eval(u, v))
}

fn check_c(c: f64) -> Result<(), KelmError> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(KelmError::InvalidParameter(format!("C must be > 0, got {c}")));
    }
    Ok(())
}

fn check_training(x: &Matrix, y: &[f64]) -> Result<(), KelmError> {
    if x.rows() == 0 {
        return Err(KelmError::DimensionMismatch("no training rows".into()));
    }
    if x.rows() != y.len() {
        return Err(KelmError::DimensionMismatch(format!(
            "{} rows but {} targets",
            x.rows(),
            y.len()
        )));
    }
    Ok(())
}

/// Solves `(I/C + G) a = y` where `gram` already holds `G`.
fn ridge_dual(mut gram: Matrix, y: &[f64], c: f64) -> Result<Vec<f64>, KelmError> {
    let ridge = 1.0 / c;
    for i in 0..gram.rows() {
        let v = gram.get(i, i) + ridge;
        gram.set(i, i, v);
    }
    solve_spd(&gram, y, SOLVE_TOLERANCE).map_err(KelmError::SingularSystem)
}

fn gram_matrix<K: Kernel>(kernel: &K, x: &Matrix) -> Matrix {
    let n = x.rows();
    let mut g = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = kernel.eval(x.row(i), x.row(j));
            g.set(i, j, v);
            g.set(j, i, v);
        }
    }
    g
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KelmModel {
    pub kernel: KernelSpec,
    pub c: f64,
    pub train_inputs: Matrix,
    pub alpha: Vec<f64>,
}

pub(crate) fn fit_dual<K: Kernel>(
    x: &Matrix,
    y: &[f64],
    kernel: &K,
    c: f64,
) -> Result<Vec<f64>, KelmError> {
    check_training(x, y)?;
    check_c(c)?;
    ridge_dual(gram_matrix(kernel, x), y, c)
}

pub(crate) fn predict_dual<K: Kernel>(
    kernel: &K,
    train: &Matrix,
    alpha: &[f64],
    xq: &Matrix,
) -> Vec<f64> {
    xq.row_iter()
        .map(|q| {
            train
                .row_iter()
                .zip(alpha)
                .map(|(xi, a)| a * kernel.eval(q, xi))
                .sum()
        })
        .collect()
}

pub fn fit_kelm(x: &Matrix, y: &[f64], kernel: KernelSpec, c: f64) -> Result<KelmModel, KelmError> {
    let alpha = fit_dual(x, y, &kernel, c)?;
    Ok(KelmModel {
        kernel,
        c,
        train_inputs: x.clone(),
        alpha,
    })
}

pub fn predict_kelm(model: &KelmModel, xq: &Matrix) -> Result<Vec<f64>, KelmError> {
    if xq.rows() == 0 {
        return Ok(Vec::new());
    }
    if xq.cols() != model.train_inputs.cols() {
        return Err(KelmError::DimensionMismatch(format!(
            "query width {} but model trained on width {}",
            xq.cols(),
            model.train_inputs.cols()
        )));
    }
    Ok(predict_dual(&model.kernel, &model.train_inputs, &model.alpha, xq))
}

impl KelmModel {
    pub fn input_dim(&self) -> usize {
        self.train_inputs.cols()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, KelmError> {
        let m: Self =
            serde_json::from_str(text).map_err(|e| KelmError::InvalidModel(e.to_string()))?;
        if m.train_inputs.rows() == 0 || m.train_inputs.rows() != m.alpha.len() {
            return Err(KelmError::InvalidModel(format!(
                "{} training rows but {} dual weights",
                m.train_inputs.rows(),
                m.alpha.len()
            )));
        }
        if !m.alpha.iter().all(|a| a.is_finite()) {
            return Err(KelmError::InvalidModel("non-finite dual weight".into()));
        }
        let KernelSpec::Gaussian { gamma } = m.kernel;
        KernelSpec::gaussian(gamma)?;
        check_c(m.c)?;
        Ok(m)
    }
}

/// ELM with random frozen hidden layer of `l` nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElmModel {
    /// `l x input`.
    pub input_weights: Matrix,
    pub hidden_biases: Vec<f64>,
    pub output_weights: Vec<f64>,
    pub activation: Activation,
    pub c: f64,
}

impl ElmModel {
    fn hidden(&self, x: &Matrix) -> Matrix {
        let l = self.hidden_biases.len();
        let mut h = Matrix::zeros(x.rows(), l);
        for (i, row) in x.row_iter().enumerate() {
            let out = h.row_mut(i);
            for k in 0..l {
                let z = dot(self.input_weights.row(k), row) + self.hidden_biases[k];
                out[k] = self.activation.apply(z);
            }
        }
        h
    }
}

pub fn fit_elm(x: &Matrix, y: &[f64], l: usize, c: f64, seed: u64) -> Result<ElmModel, KelmError> {
    check_training(x, y)?;
    check_c(c)?;
    if l == 0 {
        return Err(KelmError::InvalidParameter("hidden node count must be >= 1".into()));
    }
    let d = x.cols();
    let mut rng = rng_from_seed(seed);
    let w: Vec<f64> = (0..l * d).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let b: Vec<f64> = (0..l).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let mut model = ElmModel {
        input_weights: Matrix::new(l, d, w).expect("shape"),
        hidden_biases: b,
        output_weights: Vec::new(),
        activation: Activation::Sigmoid,
        c,
    };
    let h = model.hidden(x);
    let n = h.rows();
    let mut hht = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = dot(h.row(i), h.row(j));
            hht.set(i, j, v);
            hht.set(j, i, v);
        }
    }
    let a = ridge_dual(hht, y, c)?;
    model.output_weights = (0..l)
        .map(|k| h.row_iter().zip(&a).map(|(r, ai)| r[k] * ai).sum())
        .collect();
    Ok(model)
}

pub fn predict_elm(model: &ElmModel, xq: &Matrix) -> Result<Vec<f64>, KelmError> {
    if xq.rows() == 0 {
        return Ok(Vec::new());
    }
    if xq.cols() != model.input_weights.cols() {
        return Err(KelmError::DimensionMismatch(format!(
            "query width {} but model expects {}",
            xq.cols(),
            model.input_weights.cols()
        )));
    }
    let h = model.hidden(xq);
    Ok(h.row_iter().map(|r| dot(r, &model.output_weights)).collect())
}
