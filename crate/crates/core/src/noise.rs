//! Nearest-neighbour estimate of the noise variance,
//! σ̂² = (1/n) Σ Y_i² − (1/n) Σ Y_i Y_nn(i).

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseEstimate {
    pub sigma_sq_hat: f64,
    /// Estimate before clamping at zero.
    pub raw: f64,
    pub clamped: bool,
    pub nn_index: Vec<usize>,
}

/// Exact brute-force neighbour of every row; distance ties go to the lowest
/// index.
pub fn nearest_neighbours(ds: &Dataset) -> Vec<usize> {
    let n = ds.n_samples();
    let d = ds.n_features();
    // row-major copy for cache-friendly scans
    let rows: Vec<f64> = (0..n)
        .flat_map(|i| (0..d).map(move |j| (i, j)))
        .map(|(i, j)| ds.value(i, j))
        .collect();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = &rows[i * d..(i + 1) * d];
            let mut best = usize::MAX;
            let mut best_dist = f64::INFINITY;
            for k in 0..n {
                if k == i {
                    continue;
                }
                let xk = &rows[k * d..(k + 1) * d];
                let mut dist = 0.0;
                for (a, b) in xi.iter().zip(xk) {
                    let diff = a - b;
                    dist += diff * diff;
                }
                if dist < best_dist {
                    best_dist = dist;
                    best = k;
                }
            }
            best
        })
        .collect()
}

pub fn estimate_noise(ds: &Dataset) -> Result<NoiseEstimate> {
    let n = ds.n_samples();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "noise estimation needs at least 2 rows".into(),
        ));
    }
    let nn_index = nearest_neighbours(ds);
    let y = ds.y();
    let nf = n as f64;
    let sq = y.iter().map(|v| v * v).sum::<f64>() / nf;
    let cross = y.iter().zip(&nn_index).map(|(v, &j)| v * y[j]).sum::<f64>() / nf;
    let raw = sq - cross;
    let clamped = raw < 0.0;
    if clamped {
        warn!("nearest-neighbour noise estimate {raw} is negative, clamped to 0");
    }
    Ok(NoiseEstimate {
        sigma_sq_hat: raw.max(0.0),
        raw,
        clamped,
        nn_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ds(rows: Vec<Vec<f64>>, y: Vec<f64>) -> Dataset {
        Dataset::from_rows(&rows, y).unwrap()
    }

    #[test]
    fn constant_response_gives_zero() {
        let est = estimate_noise(&ds(
            vec![vec![0.3], vec![1.0], vec![2.5], vec![7.0]],
            vec![3.0; 4],
        ))
        .unwrap();
        assert_eq!(est.sigma_sq_hat, 0.0);
        assert!(!est.clamped);
    }

    #[test]
    fn three_point_example() {
        let est = estimate_noise(&ds(
            vec![vec![0.0], vec![1.0], vec![2.0]],
            vec![0.0, 2.0, 0.0],
        ))
        .unwrap();
        // point 1 is equidistant from 0 and 2 and takes the lower index
        assert_eq!(est.nn_index, vec![1, 0, 1]);
        assert!((est.sigma_sq_hat - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn negative_estimate_is_clamped() {
        // both outer points take the centre as neighbour
        let est = estimate_noise(&ds(
            vec![vec![-1.0], vec![0.0], vec![1.0]],
            vec![5.0, 6.0, 5.0],
        ))
        .unwrap();
        assert_eq!(est.nn_index, vec![1, 0, 1]);
        assert!((est.raw + 4.0 / 3.0).abs() < 1e-12);
        assert!(est.clamped);
        assert_eq!(est.sigma_sq_hat, 0.0);
    }

    #[test]
    fn single_row_is_rejected() {
        assert!(estimate_noise(&ds(vec![vec![0.0]], vec![1.0])).is_err());
    }

    proptest! {
        #[test]
        fn shift_invariance(rows in prop::collection::vec(prop::collection::vec(-20i32..20, 2), 2..30), shift in -1000i32..1000) {
            // integer grids keep distances exact, ties included
            let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|&v| f64::from(v)).collect()).collect();
            let y: Vec<f64> = (0..rows.len()).map(|i| i as f64).collect();
            let a = ds(rows.clone(), y.clone());
            let moved: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v + f64::from(shift)).collect()).collect();
            let b = ds(moved, y);
            prop_assert_eq!(nearest_neighbours(&a), nearest_neighbours(&b));
        }

        #[test]
        fn estimate_is_non_negative(rows in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 1..4), 2..30), seed in any::<u64>()) {
            let d = rows[0].len();
            let rows: Vec<Vec<f64>> = rows.into_iter().map(|mut r| { r.resize(d, 0.0); r }).collect();
            let y: Vec<f64> = (0..rows.len()).map(|i| ((seed.wrapping_mul(i as u64 + 1) >> 11) % 97) as f64 - 48.0).collect();
            let est = estimate_noise(&ds(rows, y)).unwrap();
            prop_assert!(est.sigma_sq_hat >= 0.0);
            prop_assert_eq!(est.clamped, est.raw < 0.0);
            for (i, &j) in est.nn_index.iter().enumerate() {
                prop_assert_ne!(i, j);
            }
        }
    }
}
