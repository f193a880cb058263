//! Moving-block bootstrap over a supervised design matrix and the
//! aggregation of replicate forecasts.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::SupervisedSet;
use crate::seed::{derive_seed, rng_from_seed};

/// Default block length: one seasonal cycle of monthly data.
pub const DEFAULT_BLOCK_LENGTH: usize = 12;
pub const DEFAULT_REPLICATES: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaggingError {
    #[error("block length {block} exceeds {rows} source rows")]
    BlockTooLong { block: usize, rows: usize },
    #[error("block length must be >= 1")]
    ZeroBlockLength,
    #[error("source set has no rows")]
    ZeroRows,
    #[error("no forecasts to aggregate")]
    EmptyForecastSet,
    #[error("forecast {index} is not finite")]
    NonFiniteForecast { index: usize },
}

/// Seed of replicate `k` under `master`. Independent of execution order.
pub fn replicate_seed(master: u64, k: usize) -> u64 {
    derive_seed(master, k as u64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapSample {
    pub replicate: usize,
    pub block_length: usize,
    pub seed: u64,
    pub set: SupervisedSet,
    /// Source row for each bootstrap row.
    pub source_rows: Vec<usize>,
    pub block_starts: Vec<usize>,
}

/// Row indices of a moving-block bootstrap of `rows` rows.
pub fn block_indices<R: Rng>(rows: usize, m: usize, rng: &mut R) -> (Vec<usize>, Vec<usize>) {
    let blocks = rows.div_ceil(m);
    let starts: Vec<usize> = (0..blocks).map(|_| rng.random_range(0..=rows - m)).collect();
    let mut idx: Vec<usize> = starts.iter().flat_map(|&s| s..s + m).collect();
    idx.truncate(rows);
    (idx, starts)
}

pub fn block_bootstrap(
    source: &SupervisedSet,
    m: usize,
    k: usize,
    master_seed: u64,
) -> Result<BootstrapSample, BaggingError> {
    let rows = source.rows();
    if rows == 0 {
        return Err(BaggingError::ZeroRows);
    }
    if m == 0 {
        return Err(BaggingError::ZeroBlockLength);
    }
    if m > rows {
        return Err(BaggingError::BlockTooLong { block: m, rows });
    }
    let seed = replicate_seed(master_seed, k);
    let mut rng = rng_from_seed(seed);
    let (source_rows, block_starts) = block_indices(rows, m, &mut rng);
    Ok(BootstrapSample {
        replicate: k,
        block_length: m,
        seed,
        set: source.select_rows(&source_rows),
        source_rows,
        block_starts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregationRule {
    #[default]
    Mean,
    Median,
}

/// Mean sums in index order so results do not depend on scheduling.
pub fn aggregate_forecasts(forecasts: &[f64], rule: AggregationRule) -> Result<f64, BaggingError> {
    if forecasts.is_empty() {
        return Err(BaggingError::EmptyForecastSet);
    }
    if let Some(index) = forecasts.iter().position(|v| !v.is_finite()) {
        return Err(BaggingError::NonFiniteForecast { index });
    }
    Ok(match rule {
        AggregationRule::Mean => forecasts.iter().sum::<f64>() / forecasts.len() as f64,
        AggregationRule::Median => {
            let mut v = forecasts.to_vec();
            v.sort_by(f64::total_cmp);
            let n = v.len();
            if n % 2 == 1 {
                v[n / 2]
            } else {
                0.5 * (v[n / 2 - 1] + v[n / 2])
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::YearMonth;
    use crate::linalg::Matrix;

    fn toy_set(rows: usize) -> SupervisedSet {
        let data: Vec<Vec<f64>> = (0..rows).map(|i| vec![1.0, i as f64, (i * i) as f64]).collect();
        let start = YearMonth::new(2010, 1).unwrap();
        SupervisedSet {
            predictors: Matrix::from_rows(&data).unwrap(),
            targets: (0..rows).map(|i| 10.0 + i as f64).collect(),
            origin_months: (0..rows).map(|i| start.add_months(i as i64)).collect(),
            latest_predictor_row: vec![1.0, rows as f64, 0.0],
            latest_origin: start.add_months(rows as i64),
            feature_names: vec!["intercept".into(), "a".into(), "b".into()],
            horizon: 1,
        }
    }

    #[test]
    fn single_block_returns_source() {
        let s = toy_set(5);
        let b = block_bootstrap(&s, 5, 1, 99).unwrap();
        assert_eq!(b.set, s);
        assert_eq!(b.block_starts, vec![0]);
    }

    #[test]
    fn five_rows_block_two_traces_seeded_draws() {
        let s = toy_set(5);
        let b = block_bootstrap(&s, 2, 3, 17).unwrap();
        let mut rng = rng_from_seed(replicate_seed(17, 3));
        let starts: Vec<usize> = (0..3).map(|_| rng.random_range(0..=3usize)).collect();
        assert_eq!(b.block_starts, starts);
        let expected: Vec<usize> =
            starts.iter().flat_map(|&s| [s, s + 1]).take(5).collect();
        assert_eq!(b.source_rows, expected);
        assert_eq!(b.set.rows(), 5);
        for (i, &src) in b.source_rows.iter().enumerate() {
            assert_eq!(b.set.predictors.row(i), s.predictors.row(src));
            assert_eq!(b.set.targets[i], s.targets[src]);
        }
    }

    #[test]
    fn bootstrap_errors() {
        let s = toy_set(4);
        assert_eq!(
            block_bootstrap(&s, 5, 1, 0).unwrap_err(),
            BaggingError::BlockTooLong { block: 5, rows: 4 }
        );
        assert_eq!(block_bootstrap(&toy_set(0), 1, 1, 0).unwrap_err(), BaggingError::ZeroRows);
        assert_eq!(block_bootstrap(&s, 0, 1, 0).unwrap_err(), BaggingError::ZeroBlockLength);
    }

    #[test]
    fn replicate_independent_of_order() {
        let s = toy_set(30);
        let forward: Vec<_> = (1..=8).map(|k| block_bootstrap(&s, 4, k, 5).unwrap()).collect();
        let backward: Vec<_> =
            (1..=8).rev().map(|k| block_bootstrap(&s, 4, k, 5).unwrap()).collect();
        for (a, b) in forward.iter().zip(backward.iter().rev()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn aggregation_examples() {
        assert_eq!(aggregate_forecasts(&[10.0, 20.0], AggregationRule::Mean).unwrap(), 15.0);
        assert_eq!(aggregate_forecasts(&[1.0, 2.0, 100.0], AggregationRule::Median).unwrap(), 2.0);
        for rule in [AggregationRule::Mean, AggregationRule::Median] {
            assert_eq!(aggregate_forecasts(&[3.5; 7], rule).unwrap(), 3.5);
        }
        assert_eq!(
            aggregate_forecasts(&[], AggregationRule::Mean).unwrap_err(),
            BaggingError::EmptyForecastSet
        );
        assert_eq!(
            aggregate_forecasts(&[1.0, f64::NAN], AggregationRule::Median).unwrap_err(),
            BaggingError::NonFiniteForecast { index: 1 }
        );
    }
}
