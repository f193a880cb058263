//! Level and directional accuracy metrics plus the Diebold-Mariano and
//! Pesaran-Timmermann tests.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("need at least {needed} observations, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("actual value at index {index} is zero")]
    ZeroActual { index: usize },
    #[error("mean of actual values is zero")]
    ZeroMeanActual,
    #[error("loss differential has zero variance")]
    DegenerateDifferential,
    #[error("direction indicators are constant")]
    DegenerateDirections,
    #[error("horizon must be >= 1")]
    InvalidHorizon,
}

fn check_pair(a: &[f64], f: &[f64]) -> Result<(), EvalError> {
    if a.len() != f.len() {
        return Err(EvalError::LengthMismatch {
            left: a.len(),
            right: f.len(),
        });
    }
    if a.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    Ok(())
}

/// Mean absolute percentage error, in percent.
pub fn mape(actual: &[f64], forecast: &[f64]) -> Result<f64, EvalError> {
    check_pair(actual, forecast)?;
    let ape = absolute_percentage_errors(actual, forecast)?;
    Ok(ape.iter().sum::<f64>() / ape.len() as f64)
}

/// Per-observation `|x - x̂| / |x| * 100`.
pub fn absolute_percentage_errors(actual: &[f64], forecast: &[f64]) -> Result<Vec<f64>, EvalError> {
    check_pair(actual, forecast)?;
    actual
        .iter()
        .zip(forecast)
        .enumerate()
        .map(|(index, (x, y))| {
            if *x == 0.0 {
                Err(EvalError::ZeroActual { index })
            } else {
                Ok((x - y).abs() / x.abs() * 100.0)
            }
        })
        .collect()
}

/// RMSE divided by the mean of the actuals, in percent.
pub fn nrmse(actual: &[f64], forecast: &[f64]) -> Result<f64, EvalError> {
    check_pair(actual, forecast)?;
    let n = actual.len() as f64;
    let mean = actual.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return Err(EvalError::ZeroMeanActual);
    }
    let mse = actual
        .iter()
        .zip(forecast)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / n;
    Ok(mse.sqrt() / mean * 100.0)
}

fn direction_hits(actual: &[f64], forecast: &[f64]) -> Result<usize, EvalError> {
    if actual.len() != forecast.len() {
        return Err(EvalError::LengthMismatch {
            left: actual.len(),
            right: forecast.len(),
        });
    }
    if actual.len() < 2 {
        return Err(EvalError::TooShort {
            needed: 2,
            got: actual.len(),
        });
    }
    Ok((1..actual.len())
        .filter(|&t| (actual[t] - actual[t - 1]) * (forecast[t] - actual[t - 1]) > 0.0)
        .count())
}

/// Directional symmetry over `t = 2..N` with denominator `N - 1`, in percent.
pub fn ds(actual: &[f64], forecast: &[f64]) -> Result<f64, EvalError> {
    let hits = direction_hits(actual, forecast)?;
    Ok(hits as f64 / (actual.len() - 1) as f64 * 100.0)
}

/// Same hit count as [`ds`] divided by `N`.
pub fn ds_over_n(actual: &[f64], forecast: &[f64]) -> Result<f64, EvalError> {
    let hits = direction_hits(actual, forecast)?;
    Ok(hits as f64 / actual.len() as f64 * 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub mape: f64,
    pub nrmse: f64,
    pub ds: f64,
    pub ds_over_n: f64,
    pub n: usize,
}

pub fn evaluate(actual: &[f64], forecast: &[f64]) -> Result<MetricResult, EvalError> {
    Ok(MetricResult {
        mape: mape(actual, forecast)?,
        nrmse: nrmse(actual, forecast)?,
        ds: ds(actual, forecast)?,
        ds_over_n: ds_over_n(actual, forecast)?,
        n: actual.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub alternative: String,
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DmOptions {
    pub horizon: usize,
    /// Harvey-Leybourne-Newbold small-sample factor.
    pub harvey: bool,
}

impl DmOptions {
    pub fn new(horizon: usize) -> Self {
        Self {
            horizon,
            harvey: false,
        }
    }
}

/// One-sided DM test of `H1: loss_a < loss_b`. A negative statistic favors A.
pub fn dm_test(loss_a: &[f64], loss_b: &[f64], horizon: usize) -> Result<TestResult, EvalError> {
    dm_test_with(loss_a, loss_b, DmOptions::new(horizon))
}

pub fn dm_test_with(loss_a: &[f64], loss_b: &[f64], opts: DmOptions) -> Result<TestResult, EvalError> {
    if loss_a.len() != loss_b.len() {
        return Err(EvalError::LengthMismatch {
            left: loss_a.len(),
            right: loss_b.len(),
        });
    }
    let n = loss_a.len();
    if n < 5 {
        return Err(EvalError::TooShort { needed: 5, got: n });
    }
    if opts.horizon == 0 {
        return Err(EvalError::InvalidHorizon);
    }
    let d: Vec<f64> = loss_a.iter().zip(loss_b).map(|(a, b)| a - b).collect();
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let autocov = |lag: usize| -> f64 {
        (lag..n)
            .map(|t| (d[t] - mean) * (d[t - lag] - mean))
            .sum::<f64>()
            / nf
    };
    let gamma0 = autocov(0);
    let scale = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(gamma0 > (1e-12 * scale).powi(2)) {
        return Err(EvalError::DegenerateDifferential);
    }
    let max_lag = (opts.horizon - 1).min(n - 1);
    let lrv = gamma0 + 2.0 * (1..=max_lag).map(autocov).sum::<f64>();
    if !(lrv > 0.0) {
        return Err(EvalError::DegenerateDifferential);
    }
    let mut statistic = mean / (lrv / nf).sqrt();
    if opts.harvey {
        let h = opts.horizon as f64;
        statistic *= ((nf + 1.0 - 2.0 * h + h * (h - 1.0) / nf) / nf).sqrt();
    }
    Ok(TestResult {
        statistic,
        p_value: std_normal().cdf(statistic).clamp(0.0, 1.0),
        alternative: "less: loss of model A below loss of model B".into(),
    })
}

/// Pesaran-Timmermann test of directional skill. Directions are
/// `x_t - x_{t-1}` for the actuals and `x̂_t - x_{t-1}` for the forecasts;
/// a non-positive change counts as down.
pub fn pt_test(actual: &[f64], forecast: &[f64]) -> Result<TestResult, EvalError> {
    if actual.len() != forecast.len() {
        return Err(EvalError::LengthMismatch {
            left: actual.len(),
            right: forecast.len(),
        });
    }
    if actual.len() < 3 {
        return Err(EvalError::TooShort {
            needed: 3,
            got: actual.len(),
        });
    }
    let n = actual.len() - 1;
    let nf = n as f64;
    let (mut up_y, mut up_x, mut hits) = (0usize, 0usize, 0usize);
    for t in 1..actual.len() {
        let y = actual[t] - actual[t - 1] > 0.0;
        let x = forecast[t] - actual[t - 1] > 0.0;
        up_y += y as usize;
        up_x += x as usize;
        hits += (y == x) as usize;
    }
    if up_y == 0 || up_y == n || up_x == 0 || up_x == n {
        return Err(EvalError::DegenerateDirections);
    }
    let py = up_y as f64 / nf;
    let px = up_x as f64 / nf;
    let p = hits as f64 / nf;
    let p_star = py * px + (1.0 - py) * (1.0 - px);
    let var_p = p_star * (1.0 - p_star) / nf;
    let var_p_star = (2.0 * py - 1.0).powi(2) * px * (1.0 - px) / nf
        + (2.0 * px - 1.0).powi(2) * py * (1.0 - py) / nf
        + 4.0 * py * px * (1.0 - py) * (1.0 - px) / (nf * nf);
    let v = var_p - var_p_star;
    if !(v > 0.0) {
        return Err(EvalError::DegenerateDirections);
    }
    let statistic = (p - p_star) / v.sqrt();
    Ok(TestResult {
        statistic,
        p_value: std_normal().sf(statistic).clamp(0.0, 1.0),
        alternative: "greater: forecast directions carry information".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_examples() {
        let a = [100.0, 200.0];
        let f = [110.0, 180.0];
        assert!((mape(&a, &f).unwrap() - 10.0).abs() < 1e-12);
        assert!((nrmse(&a, &f).unwrap() - 250f64.sqrt() / 150.0 * 100.0).abs() < 1e-12);
        assert!((nrmse(&a, &f).unwrap() - 10.5409).abs() < 1e-4);
        assert_eq!(nrmse(&[1.0, 1.0], &[2.0, 2.0]).unwrap(), 100.0);
        assert_eq!(mape(&a, &a).unwrap(), 0.0);
        assert_eq!(nrmse(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn metric_errors() {
        assert_eq!(mape(&[0.0, 1.0], &[1.0, 1.0]).unwrap_err(), EvalError::ZeroActual { index: 0 });
        assert_eq!(nrmse(&[-1.0, 1.0], &[1.0, 1.0]).unwrap_err(), EvalError::ZeroMeanActual);
        assert_eq!(mape(&[], &[]).unwrap_err(), EvalError::EmptyInput);
        assert!(matches!(mape(&[1.0], &[1.0, 2.0]), Err(EvalError::LengthMismatch { .. })));
        assert!(matches!(ds(&[1.0], &[1.0]), Err(EvalError::TooShort { .. })));
    }

    #[test]
    fn ds_examples() {
        assert_eq!(ds(&[1.0, 2.0, 3.0], &[0.0, 1.5, 2.5]).unwrap(), 100.0);
        let a = [1.0, 3.0, 2.0, 5.0];
        let naive = [0.0, 1.0, 3.0, 2.0];
        assert_eq!(ds(&a, &naive).unwrap(), 0.0);
        let opposite = [0.0, 0.5, 3.5, 1.0];
        assert_eq!(ds(&a, &opposite).unwrap(), 0.0);
        assert!((ds_over_n(&[1.0, 2.0, 3.0], &[0.0, 1.5, 2.5]).unwrap() - 200.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn dm_degenerate_cases() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        assert_eq!(dm_test(&a, &a, 1).unwrap_err(), EvalError::DegenerateDifferential);
        let b: Vec<f64> = a.iter().map(|v| v + 0.3).collect();
        assert_eq!(dm_test(&a, &b, 1).unwrap_err(), EvalError::DegenerateDifferential);
        assert!(matches!(dm_test(&a[..4], &b[..4], 1), Err(EvalError::TooShort { .. })));
    }

    #[test]
    fn dm_sign_and_antisymmetry() {
        let a = [1.0, 0.5, 1.2, 0.8, 0.9, 1.1, 0.7];
        let b = [2.0, 1.9, 2.5, 1.7, 2.2, 2.4, 1.6];
        let ab = dm_test(&a, &b, 2).unwrap();
        let ba = dm_test(&b, &a, 2).unwrap();
        assert!(ab.statistic < 0.0 && ab.p_value < 0.05);
        assert_eq!(ab.statistic, -ba.statistic);
        let harvey = dm_test_with(&a, &b, DmOptions { horizon: 2, harvey: true }).unwrap();
        assert!(harvey.statistic.abs() < ab.statistic.abs());
    }

    #[test]
    fn pt_degenerate_and_skill() {
        let up: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let f: Vec<f64> = up.iter().map(|v| v + 0.5).collect();
        assert_eq!(pt_test(&up, &f).unwrap_err(), EvalError::DegenerateDirections);
        let a: Vec<f64> = (0..101).map(|i| ((i * 7919) % 13) as f64).collect();
        let mut perfect = a.clone();
        perfect[0] = 0.0;
        let r = pt_test(&a, &perfect).unwrap();
        assert!(r.statistic > 3.0 && r.p_value < 0.01);
    }
}
