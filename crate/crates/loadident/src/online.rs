//! Streaming estimator: exponentially smoothed mean, lag-correlation and
//! Sherman-Morrison inverse-covariance updates.
//!
//! The printed recursion pairs x_j with x_{j-1} in the lag-correlation
//! update; here the lagged partner is x_{j-kappa} from a ring buffer, so the
//! recursive G targets the same lag as the batch estimator. With a literal
//! one-sample lag and kappa = 10 the two estimators would converge to
//! different matrices.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::estimator::{
    estimate_drift_with_inverse, extract_time_constants, sample_stats, EstimationResult,
    EstimatorError, StateSeries,
};

#[derive(Debug, Error)]
pub enum OnlineError {
    #[error(transparent)]
    Batch(#[from] EstimatorError),
    #[error("initial sample covariance is singular")]
    SingularCovariance,
    #[error("update denominator 1 + alpha z^T C^-1 z = {0:.3e} vanished")]
    NumericalBreakdown(f64),
    #[error("alpha = {0} is outside (0, 1)")]
    AlphaOutOfRange(f64),
    #[error("state vector has length {got}, expected {expected}")]
    DimensionMismatch { got: usize, expected: usize },
}

/// Evolving statistics of the recursive estimator.
#[derive(Debug, Clone)]
pub struct RecursiveState {
    x_bar: DVector<f64>,
    g_hat: DMatrix<f64>,
    c_inv: DMatrix<f64>,
    lag_buffer: VecDeque<DVector<f64>>,
    alpha: f64,
    v_bar: DVector<f64>,
    lag_samples: usize,
    dt: f64,
    sample_count: usize,
}

impl RecursiveState {
    /// Seeds the recursion from batch statistics of an initial window.
    ///
    /// `alpha` defaults to 1/n with n the window sample count when `None`.
    pub fn init(
        window: &StateSeries,
        lag_samples: usize,
        alpha: Option<f64>,
    ) -> Result<Self, OnlineError> {
        let stats = sample_stats(window, lag_samples)?;
        let c_inv = stats
            .c_hat
            .clone()
            .try_inverse()
            .ok_or(OnlineError::SingularCovariance)?;
        let n = window.n_samples();
        let alpha = match alpha {
            Some(a) => {
                check_alpha(a)?;
                a
            }
            None => 1.0 / n as f64,
        };
        // Ring buffer holds the last kappa samples so the next update can
        // reach back exactly one lag.
        let mut lag_buffer = VecDeque::with_capacity(lag_samples);
        for i in (n - lag_samples)..n {
            lag_buffer.push_back(window.x.column(i).into_owned());
        }
        Ok(RecursiveState {
            x_bar: stats.x_bar,
            g_hat: stats.g_hat,
            c_inv: symmetrize(c_inv),
            lag_buffer,
            alpha,
            v_bar: window.v_bar.clone(),
            lag_samples,
            dt: window.dt,
            sample_count: n,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn c_inv(&self) -> &DMatrix<f64> {
        &self.c_inv
    }

    pub fn g_hat(&self) -> &DMatrix<f64> {
        &self.g_hat
    }

    pub fn x_bar(&self) -> &DVector<f64> {
        &self.x_bar
    }

    /// Changes the smoothing weight for subsequent updates; statistics are
    /// untouched.
    pub fn set_alpha(&mut self, alpha: f64) -> Result<(), OnlineError> {
        check_alpha(alpha)?;
        self.alpha = alpha;
        Ok(())
    }

    /// Consumes one new state sample and its voltage magnitudes.
    pub fn update(
        &mut self,
        x_new: &DVector<f64>,
        v_new: &DVector<f64>,
    ) -> Result<(), OnlineError> {
        let d = self.x_bar.len();
        if x_new.len() != d {
            return Err(OnlineError::DimensionMismatch {
                got: x_new.len(),
                expected: d,
            });
        }
        let alpha = self.alpha;
        let x_bar_prev = self.x_bar.clone();
        let z = x_new - &x_bar_prev;

        self.x_bar = &x_bar_prev * (1.0 - alpha) + x_new * alpha;
        self.v_bar = &self.v_bar * (1.0 - alpha) + v_new * alpha;

        let lagged = self
            .lag_buffer
            .pop_front()
            .expect("ring buffer holds kappa samples after init");
        let dev_new = x_new - &self.x_bar;
        let dev_lagged = &lagged - &x_bar_prev;
        self.g_hat = (&self.g_hat + &dev_new * dev_lagged.transpose() * alpha) * (1.0 - alpha);
        self.lag_buffer.push_back(x_new.clone());

        // Sherman-Morrison on C_j = (1-alpha) C_{j-1} + alpha z z^T.
        let ci_z = &self.c_inv * &z;
        let denom = 1.0 + alpha * z.dot(&ci_z) / (1.0 - alpha);
        if denom.abs() <= 1e-12 {
            return Err(OnlineError::NumericalBreakdown(denom));
        }
        let correction = &ci_z * ci_z.transpose() * (alpha / (1.0 - alpha) / denom);
        self.c_inv = (&self.c_inv - correction) / (1.0 - alpha);
        self.c_inv = symmetrize(self.c_inv.clone());

        self.sample_count += 1;
        Ok(())
    }

    /// Drift and time-constant estimate from the current statistics.
    pub fn current_estimate(&self) -> Result<EstimationResult, OnlineError> {
        let lag = self.lag_samples as f64 * self.dt;
        let drift = estimate_drift_with_inverse(&self.g_hat, &self.c_inv, lag)?;
        Ok(extract_time_constants(&drift, &self.v_bar))
    }
}

fn check_alpha(alpha: f64) -> Result<(), OnlineError> {
    if alpha <= 0.0 || alpha >= 1.0 {
        return Err(OnlineError::AlphaOutOfRange(alpha));
    }
    Ok(())
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn series_from_matrix(x: DMatrix<f64>, dt: f64) -> StateSeries {
        let m = x.nrows() / 2;
        StateSeries {
            dt,
            x,
            v_bar: DVector::from_element(m, 1.0),
        }
    }

    fn random_series(dim: usize, n: usize, seed: u64) -> StateSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        series_from_matrix(
            DMatrix::from_fn(dim, n, |_, _| rng.gen_range(-1.0..1.0)),
            0.02,
        )
    }

    #[test]
    fn init_matches_batch_statistics() {
        let s = random_series(4, 200, 1);
        let stats = sample_stats(&s, 5).unwrap();
        let state = RecursiveState::init(&s, 5, None).unwrap();
        assert!((state.x_bar() - &stats.x_bar).norm() < 1e-14);
        assert!((state.g_hat() - &stats.g_hat).norm() < 1e-14);
        let prod = state.c_inv() * &stats.c_hat;
        assert!((prod - DMatrix::identity(4, 4)).norm() < 1e-8);
        assert!((state.alpha() - 1.0 / 200.0).abs() < 1e-15);
    }

    #[test]
    fn constant_window_is_singular() {
        let s = series_from_matrix(DMatrix::from_element(2, 50, 1.0), 0.02);
        assert!(matches!(
            RecursiveState::init(&s, 5, None),
            Err(OnlineError::SingularCovariance)
        ));
    }

    #[test]
    fn sherman_morrison_matches_direct_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = random_series(6, 300, 2);
        let mut state = RecursiveState::init(&s, 4, Some(0.01)).unwrap();
        let v = DVector::from_element(3, 1.0);
        for _ in 0..200 {
            // Track the dense covariance alongside the recursion.
            let c_direct_prev = state.c_inv().clone().try_inverse().unwrap();
            let x: DVector<f64> = DVector::from_fn(6, |_, _| rng.gen_range(-1.0..1.0));
            let z = &x - state.x_bar();
            state.update(&x, &v).unwrap();
            let c_expected = c_direct_prev * (1.0 - 0.01) + &z * z.transpose() * 0.01;
            let prod = state.c_inv() * c_expected;
            assert!((prod - DMatrix::identity(6, 6)).norm() < 1e-10);
        }
    }

    #[test]
    fn c_inv_stays_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = random_series(8, 400, 3);
        let mut state = RecursiveState::init(&s, 4, Some(0.005)).unwrap();
        let v = DVector::from_element(4, 1.0);
        for _ in 0..1000 {
            let x: DVector<f64> = DVector::from_fn(8, |_, _| rng.gen_range(-1.0..1.0));
            state.update(&x, &v).unwrap();
        }
        let asym = (state.c_inv() - state.c_inv().transpose()).norm();
        assert!(asym < 1e-10);
    }

    #[test]
    fn mean_sample_leaves_mean_unchanged() {
        let s = random_series(4, 100, 4);
        let mut state = RecursiveState::init(&s, 3, None).unwrap();
        let x = state.x_bar().clone();
        let before = state.x_bar().clone();
        state.update(&x, &DVector::from_element(2, 1.0)).unwrap();
        assert!((state.x_bar() - before).norm() < 1e-14);
    }

    #[test]
    fn alpha_validation() {
        let s = random_series(4, 100, 7);
        let mut state = RecursiveState::init(&s, 3, None).unwrap();
        assert!(matches!(
            state.set_alpha(1.5),
            Err(OnlineError::AlphaOutOfRange(_))
        ));
        assert!(state.set_alpha(0.01).is_ok());
        assert!((state.alpha() - 0.01).abs() < 1e-15);
        assert!(matches!(
            RecursiveState::init(&s, 3, Some(0.0)),
            Err(OnlineError::AlphaOutOfRange(_))
        ));
    }

    #[test]
    fn ring_buffer_lag_is_kappa() {
        // Feed a ramp; the lagged partner used at update j must be x_{j-kappa}.
        let kappa = 3;
        let n = 20;
        let x = DMatrix::from_fn(2, n, |k, j| if k == 0 { j as f64 } else { (j * j) as f64 });
        let s = series_from_matrix(x, 1.0);
        let mut state = RecursiveState::init(&s, kappa, Some(0.5)).unwrap();
        assert_eq!(state.lag_buffer.len(), kappa);
        assert_eq!(state.lag_buffer[0][0], (n - kappa) as f64);
        state
            .update(
                &DVector::from_element(2, n as f64),
                &DVector::from_element(1, 1.0),
            )
            .unwrap();
        assert_eq!(state.lag_buffer.back().unwrap()[0], n as f64);
        assert_eq!(state.lag_buffer[0][0], (n - kappa + 1) as f64);
    }
}
