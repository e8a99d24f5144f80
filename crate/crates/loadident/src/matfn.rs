//! Dense matrix functions: exponential and principal logarithm.
//!
//! Everything here targets small dense matrices (dim <= ~40). The logarithm
//! uses a complex eigendecomposition with the principal branch and returns the
//! real part of the reassembled matrix, reporting how much imaginary mass was
//! discarded. A Schur-based inverse-scaling-and-squaring variant would be the
//! natural upgrade path for clustered spectra, but is not needed at this scale.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

/// Default eigenvalue-magnitude threshold below which the log is refused.
pub const SINGULARITY_TOL: f64 = 1e-12;

/// Fraction of Frobenius mass in the imaginary part above which the result
/// is flagged as suspect.
pub const IMAG_WARN_FRACTION: f64 = 0.10;

#[derive(Debug, Error)]
pub enum MatFnError {
    #[error("input has an eigenvalue of magnitude {magnitude:.3e} below tolerance {tol:.3e}")]
    SingularInput { magnitude: f64, tol: f64 },
    #[error("eigenvalue {re:.6e}{im:+.6e}i lies on the closed negative real axis; principal logarithm undefined (lag too long or insufficient data)")]
    NegativeRealAxisEigenvalue { re: f64, im: f64 },
    #[error("eigenvector solve failed; matrix may be defective")]
    DefectiveMatrix,
}

/// Matrix logarithm together with its quality diagnostics.
#[derive(Debug, Clone)]
pub struct MatLog {
    /// Real principal logarithm (real part of the complex reassembly).
    pub log: DMatrix<f64>,
    /// ||Im L||_F / ||L||_F of the complex logarithm before taking the real part.
    pub imaginary_fraction: f64,
    /// True when `imaginary_fraction` exceeds [`IMAG_WARN_FRACTION`].
    pub imaginary_warning: bool,
}

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
///
/// Adequate for the well-conditioned, small matrices handled here; diagonal
/// inputs take the elementwise fast path.
pub fn matexp(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "matexp requires a square matrix");
    if is_diagonal(m) {
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            out[(i, i)] = m[(i, i)].exp();
        }
        return out;
    }

    let norm = one_norm(m);
    let s = if norm > 0.25 {
        (norm / 0.25).log2().ceil() as u32
    } else {
        0
    };
    let a = m / 2f64.powi(s as i32);

    let mut result = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..=40 {
        term = (&term * &a) / k as f64;
        result += &term;
        if one_norm(&term) < 1e-18 * one_norm(&result) {
            break;
        }
    }
    for _ in 0..s {
        result = &result * &result;
    }
    result
}

/// Real principal matrix logarithm via complex eigendecomposition.
///
/// Fails when an eigenvalue sits on the closed negative real axis (no
/// principal branch) or has magnitude below `tol`.
pub fn matlog(m: &DMatrix<f64>, tol: f64) -> Result<MatLog, MatFnError> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "matlog requires a square matrix");

    if is_diagonal(m) {
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            let d = m[(i, i)];
            if d.abs() < tol {
                return Err(MatFnError::SingularInput {
                    magnitude: d.abs(),
                    tol,
                });
            }
            if d < 0.0 {
                return Err(MatFnError::NegativeRealAxisEigenvalue { re: d, im: 0.0 });
            }
            out[(i, i)] = d.ln();
        }
        return Ok(MatLog {
            log: out,
            imaginary_fraction: 0.0,
            imaginary_warning: false,
        });
    }

    let scale = m.norm().max(f64::MIN_POSITIVE);
    let eigvals = m.clone().complex_eigenvalues();
    for ev in eigvals.iter() {
        if ev.norm() < tol {
            return Err(MatFnError::SingularInput {
                magnitude: ev.norm(),
                tol,
            });
        }
        if ev.re < 0.0 && ev.im.abs() <= 1e-14 * ev.norm().max(1.0) {
            return Err(MatFnError::NegativeRealAxisEigenvalue {
                re: ev.re,
                im: ev.im,
            });
        }
    }

    let vectors = eigenvectors(m, &eigvals, scale)?;
    let log_d = DMatrix::from_diagonal(&DVector::from_iterator(
        n,
        eigvals.iter().map(|ev| ev.ln()),
    ));

    // L = (V ln D) V^{-1}: solve V^T L^T = (V ln D)^T.
    let rhs = &vectors * log_d;
    let vt_lu = vectors.transpose().lu();
    let log_c: DMatrix<Complex64> = match vt_lu.solve(&rhs.transpose()) {
        Some(xt) => xt.transpose(),
        None => return Err(MatFnError::DefectiveMatrix),
    };

    let mut re_sq = 0.0;
    let mut im_sq = 0.0;
    for v in log_c.iter() {
        re_sq += v.re * v.re;
        im_sq += v.im * v.im;
    }
    let total = (re_sq + im_sq).sqrt();
    let imaginary_fraction = if total > 0.0 {
        im_sq.sqrt() / total
    } else {
        0.0
    };

    Ok(MatLog {
        log: log_c.map(|v| v.re),
        imaginary_fraction,
        imaginary_warning: imaginary_fraction > IMAG_WARN_FRACTION,
    })
}

/// Eigenvectors by shifted inverse iteration, one per eigenvalue.
fn eigenvectors(
    m: &DMatrix<f64>,
    eigvals: &DVector<Complex64>,
    scale: f64,
) -> Result<DMatrix<Complex64>, MatFnError> {
    let n = m.nrows();
    let mc = m.map(|x| Complex64::new(x, 0.0));
    let mut vectors = DMatrix::<Complex64>::zeros(n, n);

    for (j, &lambda) in eigvals.iter().enumerate() {
        // Small off-axis shift keeps the shifted matrix invertible.
        let shift = lambda + Complex64::new(1e-10 * scale, 1e-10 * scale);
        let shifted = &mc - DMatrix::<Complex64>::identity(n, n) * shift;
        let lu = shifted.lu();

        // Deterministic pseudo-random start vector.
        let mut v = DVector::from_fn(n, |i, _| {
            let t = ((i * 31 + j * 17 + 7) % 101) as f64 / 101.0;
            Complex64::new(t + 0.1, 0.3 - t * 0.2)
        });
        v /= Complex64::new(v.norm(), 0.0);

        let mut converged = false;
        for _ in 0..4 {
            match lu.solve(&v) {
                Some(w) => {
                    let nw = w.norm();
                    if !nw.is_finite() || nw == 0.0 {
                        break;
                    }
                    v = w / Complex64::new(nw, 0.0);
                    converged = true;
                }
                None => break,
            }
        }
        if !converged {
            return Err(MatFnError::DefectiveMatrix);
        }
        vectors.set_column(j, &v);
    }
    Ok(vectors)
}

fn is_diagonal(m: &DMatrix<f64>) -> bool {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..n {
            if i != j && m[(i, j)] != 0.0 {
                return false;
            }
        }
    }
    true
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}
