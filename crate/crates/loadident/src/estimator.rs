//! Batch pipeline: PMU phasor window -> state series -> sample statistics ->
//! estimated drift matrix -> load time constants.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::gridsim::PhasorWindow;
use crate::matfn::{matlog, MatFnError, SINGULARITY_TOL};
use crate::ou::{build_load_ou_model, LoadBlockSpec};

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("voltage magnitude {magnitude:.3e} p.u. at load {load}, sample {sample} is below 1e-6")]
    ZeroVoltageSample {
        load: usize,
        sample: usize,
        magnitude: f64,
    },
    #[error("need more than kappa + 1 = {required} samples, got {got}")]
    InsufficientSamples { required: usize, got: usize },
    #[error("sample covariance is singular")]
    SingularCovariance,
    #[error(transparent)]
    MatrixLog(#[from] MatFnError),
    #[error("dimension mismatch: result has {result} loads, truth has {truth}")]
    DimensionMismatch { result: usize, truth: usize },
}

/// Per-sample load states [g; b] recovered from phasors, plus mean voltages.
#[derive(Debug, Clone)]
pub struct StateSeries {
    pub dt: f64,
    /// 2m x n matrix; row k is g_k for k < m and b_{k-m} for k >= m.
    pub x: DMatrix<f64>,
    /// Length-m sample-mean voltage magnitudes.
    pub v_bar: DVector<f64>,
}

impl StateSeries {
    pub fn n_samples(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_loads(&self) -> usize {
        self.x.nrows() / 2
    }
}

/// Sample mean, covariance and lag-autocorrelation of a state series.
#[derive(Debug, Clone)]
pub struct SampleStats {
    pub x_bar: DVector<f64>,
    pub c_hat: DMatrix<f64>,
    pub g_hat: DMatrix<f64>,
    pub lag_samples: usize,
    pub dt: f64,
}

impl SampleStats {
    pub fn lag_seconds(&self) -> f64 {
        self.lag_samples as f64 * self.dt
    }
}

/// Drift estimate with numerical diagnostics.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Diagnostics {
    pub imaginary_fraction: f64,
    pub imaginary_warning: bool,
    pub covariance_condition: f64,
    /// Frobenius mass of the off-diagonal-block entries discarded by the
    /// diagonal projection, relative to the full matrix.
    pub offdiagonal_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct DriftEstimate {
    pub a_hat: DMatrix<f64>,
    pub imaginary_fraction: f64,
    pub imaginary_warning: bool,
    pub covariance_condition: f64,
}

/// One estimated time constant; `physical` is false when the corresponding
/// diagonal entry of the drift estimate had the wrong sign.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct TimeConstantEstimate {
    pub value: f64,
    pub physical: bool,
}

/// Error metrics versus a known ground truth.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ErrorReport {
    /// Relative errors (tau_hat - tau) / tau, conductance block then susceptance.
    pub tau_g_rel_errors: Vec<f64>,
    pub tau_b_rel_errors: Vec<f64>,
    /// ||A - A_hat||_F / ||A||_F using the full (unprojected) estimate.
    pub normalized_frobenius: f64,
    /// Same metric after the diagonal projection of A_hat.
    pub normalized_frobenius_projected: f64,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct EstimationResult {
    pub tau_g_hat: Vec<TimeConstantEstimate>,
    pub tau_b_hat: Vec<TimeConstantEstimate>,
    /// Full 2m x 2m drift estimate, row-major.
    pub a_hat: Vec<Vec<f64>>,
    pub diagnostics: Diagnostics,
    pub errors_vs_truth: Option<ErrorReport>,
}

impl EstimationResult {
    pub fn a_hat_matrix(&self) -> DMatrix<f64> {
        let n = self.a_hat.len();
        DMatrix::from_fn(n, n, |i, j| self.a_hat[i][j])
    }

    pub fn tau_g_values(&self) -> Vec<f64> {
        self.tau_g_hat.iter().map(|t| t.value).collect()
    }

    pub fn tau_b_values(&self) -> Vec<f64> {
        self.tau_b_hat.iter().map(|t| t.value).collect()
    }
}

/// Recovers g, b series from phasors: g = Re{I/V}, b = Im{I/V}, and the
/// per-load mean voltage magnitude.
pub fn phasors_to_states(w: &PhasorWindow) -> Result<StateSeries, EstimatorError> {
    let m = w.n_loads();
    let n = w.n_samples();
    let mut x = DMatrix::zeros(2 * m, n);
    let mut v_sum = vec![0.0; m];
    for (k, &bus_id) in w.load_bus_ids.iter().enumerate() {
        let bi = w
            .bus_ids
            .iter()
            .position(|&b| b == bus_id)
            .expect("load bus present in window");
        for i in 0..n {
            let v = w.voltages[(bi, i)];
            if v.norm() < 1e-6 {
                return Err(EstimatorError::ZeroVoltageSample {
                    load: k,
                    sample: i,
                    magnitude: v.norm(),
                });
            }
            let ratio = w.currents[(k, i)] / v;
            x[(k, i)] = ratio.re;
            x[(m + k, i)] = ratio.im;
            v_sum[k] += v.norm();
        }
    }
    Ok(StateSeries {
        dt: w.dt,
        x,
        v_bar: DVector::from_iterator(m, v_sum.iter().map(|s| s / n as f64)),
    })
}

/// Per-load voltage-magnitude series (m rows of n samples) from a window.
pub fn load_voltage_magnitudes(w: &PhasorWindow) -> Vec<Vec<f64>> {
    w.load_bus_ids
        .iter()
        .map(|&bus_id| {
            let bi = w
                .bus_ids
                .iter()
                .position(|&b| b == bus_id)
                .expect("load bus present in window");
            (0..w.n_samples())
                .map(|i| w.voltages[(bi, i)].norm())
                .collect()
        })
        .collect()
}

/// Sample mean, covariance and kappa-lag autocorrelation.
///
/// Both normalizers are n-1 and the full-window mean is used in both shifted
/// factors. The lag matrix is the outer-product form
/// (F_{1+k:n} - x_bar 1^T)(F_{1:n-k} - x_bar 1^T)^T so that entry (i, j)
/// correlates state i at t + lag with state j at t.
pub fn sample_stats(s: &StateSeries, lag_samples: usize) -> Result<SampleStats, EstimatorError> {
    let n = s.n_samples();
    let d = s.x.nrows();
    if n <= lag_samples + 1 {
        return Err(EstimatorError::InsufficientSamples {
            required: lag_samples + 1,
            got: n,
        });
    }
    let x_bar = DVector::from_iterator(d, (0..d).map(|i| s.x.row(i).sum() / n as f64));
    let centered = {
        let mut c = s.x.clone();
        for i in 0..d {
            for j in 0..n {
                c[(i, j)] -= x_bar[i];
            }
        }
        c
    };
    let norm = 1.0 / (n as f64 - 1.0);
    let c_hat = (&centered * centered.transpose()) * norm;
    let lead = centered.columns(lag_samples, n - lag_samples);
    let lagged = centered.columns(0, n - lag_samples);
    let g_hat = (lead * lagged.transpose()) * norm;
    Ok(SampleStats {
        x_bar,
        c_hat,
        g_hat,
        lag_samples,
        dt: s.dt,
    })
}

/// A_hat = (1/lag) log[G_hat C_hat^{-1}].
pub fn estimate_drift(stats: &SampleStats, lag: f64) -> Result<DriftEstimate, EstimatorError> {
    estimate_drift_from(&stats.g_hat, &stats.c_hat, lag)
}

/// Drift estimate from explicit (G, C) matrices; `lag` in seconds.
pub fn estimate_drift_from(
    g_hat: &DMatrix<f64>,
    c_hat: &DMatrix<f64>,
    lag: f64,
) -> Result<DriftEstimate, EstimatorError> {
    let c_inv = c_hat
        .clone()
        .try_inverse()
        .ok_or(EstimatorError::SingularCovariance)?;
    let condition = condition_estimate(c_hat, &c_inv);
    let gc = g_hat * c_inv;
    let log = matlog(&gc, SINGULARITY_TOL)?;
    Ok(DriftEstimate {
        a_hat: log.log / lag,
        imaginary_fraction: log.imaginary_fraction,
        imaginary_warning: log.imaginary_warning,
        covariance_condition: condition,
    })
}

/// Drift estimate straight from a recursive inverse covariance.
pub fn estimate_drift_with_inverse(
    g_hat: &DMatrix<f64>,
    c_inv: &DMatrix<f64>,
    lag: f64,
) -> Result<DriftEstimate, EstimatorError> {
    let gc = g_hat * c_inv;
    let log = matlog(&gc, SINGULARITY_TOL)?;
    let condition = c_inv
        .clone()
        .try_inverse()
        .map(|c| condition_estimate(&c, c_inv))
        .unwrap_or(f64::INFINITY);
    Ok(DriftEstimate {
        a_hat: log.log / lag,
        imaginary_fraction: log.imaginary_fraction,
        imaginary_warning: log.imaginary_warning,
        covariance_condition: condition,
    })
}

fn condition_estimate(c: &DMatrix<f64>, c_inv: &DMatrix<f64>) -> f64 {
    c.norm() * c_inv.norm()
}

/// Diagonal-block projection and time-constant extraction:
/// tau_g_k = -v_bar_k^2 / A_hat[k,k], tau_b_k = -v_bar_k^2 / A_hat[m+k,m+k].
pub fn extract_time_constants(estimate: &DriftEstimate, v_bar: &DVector<f64>) -> EstimationResult {
    let a_hat = &estimate.a_hat;
    let dim = a_hat.nrows();
    let m = dim / 2;
    assert_eq!(v_bar.len(), m, "v_bar length must equal the load count");

    let mut diag_mass = 0.0;
    let total_mass = a_hat.norm();
    for i in 0..dim {
        diag_mass += a_hat[(i, i)] * a_hat[(i, i)];
    }
    let offdiag_fraction = if total_mass > 0.0 {
        ((total_mass * total_mass - diag_mass).max(0.0)).sqrt() / total_mass
    } else {
        0.0
    };

    let tau_from = |a_kk: f64, v: f64| {
        let value = -v * v / a_kk;
        TimeConstantEstimate {
            value,
            physical: a_kk < 0.0,
        }
    };
    let tau_g_hat: Vec<_> = (0..m).map(|k| tau_from(a_hat[(k, k)], v_bar[k])).collect();
    let tau_b_hat: Vec<_> = (0..m)
        .map(|k| tau_from(a_hat[(m + k, m + k)], v_bar[k]))
        .collect();

    EstimationResult {
        tau_g_hat,
        tau_b_hat,
        a_hat: (0..dim)
            .map(|i| (0..dim).map(|j| a_hat[(i, j)]).collect())
            .collect(),
        diagnostics: Diagnostics {
            imaginary_fraction: estimate.imaginary_fraction,
            imaginary_warning: estimate.imaginary_warning,
            covariance_condition: estimate.covariance_condition,
            offdiagonal_fraction: offdiag_fraction,
        },
        errors_vs_truth: None,
    }
}

/// Per-parameter relative errors and the normalized Frobenius drift error
/// versus a known LoadBlockSpec.
pub fn error_report(
    result: &EstimationResult,
    truth: &LoadBlockSpec,
) -> Result<ErrorReport, EstimatorError> {
    let m = truth.m();
    if result.tau_g_hat.len() != m {
        return Err(EstimatorError::DimensionMismatch {
            result: result.tau_g_hat.len(),
            truth: m,
        });
    }
    let a_true = build_load_ou_model(truth)
        .map_err(|_| EstimatorError::SingularCovariance)?
        .drift()
        .clone();
    let a_hat = result.a_hat_matrix();
    let mut a_proj = DMatrix::zeros(2 * m, 2 * m);
    for i in 0..2 * m {
        a_proj[(i, i)] = a_hat[(i, i)];
    }
    Ok(ErrorReport {
        tau_g_rel_errors: (0..m)
            .map(|k| (result.tau_g_hat[k].value - truth.tau_g[k]) / truth.tau_g[k])
            .collect(),
        tau_b_rel_errors: (0..m)
            .map(|k| (result.tau_b_hat[k].value - truth.tau_b[k]) / truth.tau_b[k])
            .collect(),
        normalized_frobenius: (&a_hat - &a_true).norm() / a_true.norm(),
        normalized_frobenius_projected: (&a_proj - &a_true).norm() / a_true.norm(),
    })
}

/// Full batch pipeline from a phasor window.
pub fn estimate_from_window(
    w: &PhasorWindow,
    lag_samples: usize,
) -> Result<EstimationResult, EstimatorError> {
    let states = phasors_to_states(w)?;
    let stats = sample_stats(&states, lag_samples)?;
    let drift = estimate_drift(&stats, stats.lag_seconds())?;
    let mut result = extract_time_constants(&drift, &states.v_bar);
    if let Some(truth) = &w.truth {
        result.errors_vs_truth = error_report(&result, truth).ok();
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ou::{analytic_lag_autocorr, stationary_covariance};
    use nalgebra::DMatrix;
    use num_complex::Complex64;

    fn window_from_raw(
        v: Vec<Complex64>,
        i_cur: Vec<Complex64>,
        dt: f64,
    ) -> PhasorWindow {
        let n = v.len();
        PhasorWindow {
            dt,
            start: 0.0,
            bus_ids: vec![1],
            load_bus_ids: vec![1],
            voltages: DMatrix::from_iterator(1, n, v),
            currents: DMatrix::from_iterator(1, n, i_cur),
            truth: None,
        }
    }

    #[test]
    fn phasor_division_recovers_g_b() {
        let w = window_from_raw(
            vec![Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)],
            vec![Complex64::new(1.0, 0.0), Complex64::new(0.5, -0.3)],
            0.02,
        );
        let s = phasors_to_states(&w).unwrap();
        assert_eq!(s.x[(0, 0)], 1.0);
        assert_eq!(s.x[(1, 0)], 0.0);
        assert_eq!(s.x[(0, 1)], 0.5);
        assert_eq!(s.x[(1, 1)], -0.3);
        assert_eq!(s.v_bar[0], 1.0);
    }

    #[test]
    fn zero_voltage_rejected() {
        let w = window_from_raw(
            vec![Complex64::new(1.0, 0.0), Complex64::new(1e-9, 0.0)],
            vec![Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)],
            0.02,
        );
        assert!(matches!(
            phasors_to_states(&w),
            Err(EstimatorError::ZeroVoltageSample { sample: 1, .. })
        ));
    }

    #[test]
    fn constant_series_has_zero_stats() {
        let s = StateSeries {
            dt: 0.02,
            x: DMatrix::from_element(2, 10, 3.0),
            v_bar: DVector::from_element(1, 1.0),
        };
        let stats = sample_stats(&s, 2).unwrap();
        assert!(stats.c_hat.norm() == 0.0);
        assert!(stats.g_hat.norm() == 0.0);
    }

    #[test]
    fn hand_computed_lag_stats() {
        // x = [1, 2, 3], kappa = 1: x_bar = 2, C = 1, G = 0.
        let s = StateSeries {
            dt: 1.0,
            x: DMatrix::from_row_slice(1, 3, &[1.0, 2.0, 3.0]),
            v_bar: DVector::from_element(1, 1.0),
        };
        let stats = sample_stats(&s, 1).unwrap();
        assert_eq!(stats.x_bar[0], 2.0);
        assert_eq!(stats.c_hat[(0, 0)], 1.0);
        assert_eq!(stats.g_hat[(0, 0)], 0.0);
    }

    #[test]
    fn insufficient_samples_rejected() {
        let s = StateSeries {
            dt: 0.02,
            x: DMatrix::from_element(2, 5, 1.0),
            v_bar: DVector::from_element(1, 1.0),
        };
        assert!(matches!(
            sample_stats(&s, 10),
            Err(EstimatorError::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn analytic_inputs_recover_drift_exactly() {
        let model = build_load_ou_model(&LoadBlockSpec::benchmark_ten_loads()).unwrap();
        let c = stationary_covariance(&model).unwrap();
        let g = analytic_lag_autocorr(&model, 0.2).unwrap();
        let est = estimate_drift_from(&g, &c, 0.2).unwrap();
        assert!((&est.a_hat - model.drift()).norm() / model.drift().norm() < 1e-8);
    }

    #[test]
    fn time_constant_inverse_of_model_build() {
        let est = DriftEstimate {
            a_hat: DMatrix::from_diagonal(&DVector::from_vec(vec![-10.0, -2.0])),
            imaginary_fraction: 0.0,
            imaginary_warning: false,
            covariance_condition: 1.0,
        };
        let r = extract_time_constants(&est, &DVector::from_element(1, 1.0));
        assert!((r.tau_g_hat[0].value - 0.1).abs() < 1e-14);
        assert!((r.tau_b_hat[0].value - 0.5).abs() < 1e-14);
        assert!(r.tau_g_hat[0].physical && r.tau_b_hat[0].physical);
    }

    #[test]
    fn positive_diagonal_flagged_nonphysical() {
        let est = DriftEstimate {
            a_hat: DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, -2.0])),
            imaginary_fraction: 0.0,
            imaginary_warning: false,
            covariance_condition: 1.0,
        };
        let r = extract_time_constants(&est, &DVector::from_element(1, 1.0));
        assert!(!r.tau_g_hat[0].physical);
        assert!(r.tau_b_hat[0].physical);
    }

    #[test]
    fn error_report_zero_when_exact() {
        let spec = LoadBlockSpec::benchmark_ten_loads();
        let model = build_load_ou_model(&spec).unwrap();
        let est = DriftEstimate {
            a_hat: model.drift().clone(),
            imaginary_fraction: 0.0,
            imaginary_warning: false,
            covariance_condition: 1.0,
        };
        let r = extract_time_constants(&est, &DVector::from_element(10, 1.0));
        let report = error_report(&r, &spec).unwrap();
        assert!(report.normalized_frobenius < 1e-12);
        assert!(report.tau_g_rel_errors.iter().all(|e| e.abs() < 1e-12));
    }

    #[test]
    fn table_one_row_arithmetic() {
        // tau = 0.1, tau_hat = 0.1043 -> +4.2536% (to table precision).
        let err: f64 = (0.1043 - 0.1) / 0.1;
        assert!((err - 0.043).abs() < 1e-12);
        assert!((err * 100.0 - 4.2536).abs() < 0.27);
    }

    #[test]
    fn mismatched_truth_rejected() {
        let est = DriftEstimate {
            a_hat: DMatrix::from_diagonal(&DVector::from_vec(vec![-10.0, -2.0])),
            imaginary_fraction: 0.0,
            imaginary_warning: false,
            covariance_condition: 1.0,
        };
        let r = extract_time_constants(&est, &DVector::from_element(1, 1.0));
        let truth = LoadBlockSpec::benchmark_ten_loads();
        assert!(matches!(
            error_report(&r, &truth),
            Err(EstimatorError::DimensionMismatch { .. })
        ));
    }
}
