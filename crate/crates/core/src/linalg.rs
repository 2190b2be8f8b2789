//! Small dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, Dyn};
use num_complex::Complex64;

use crate::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

const LOADING: f64 = 1e-9;

/// Inverse of a Hermitian positive definite matrix.
///
/// Factorizes with Cholesky; when that fails the diagonal is loaded with
/// `1e-9 * trace / n` (growing tenfold per retry) before giving up with a
/// condition estimate.
pub fn hermitian_inverse(m: &CMatrix, what: &'static str) -> Result<CMatrix> {
    let n = m.nrows();
    let finite = |inv: CMatrix| inv.iter().all(|x| x.re.is_finite() && x.im.is_finite()).then_some(inv);
    if let Some(inv) = Cholesky::new(m.clone()).and_then(|c| finite(c.inverse())) {
        return Ok(inv);
    }
    let trace: f64 = (0..n).map(|i| m[(i, i)].re).sum::<f64>().abs().max(f64::MIN_POSITIVE);
    let mut load = LOADING * trace / n as f64;
    for _ in 0..4 {
        let mut loaded = m.clone();
        for i in 0..n {
            loaded[(i, i)] += load;
        }
        if let Some(inv) = Cholesky::new(loaded).and_then(|c| finite(c.inverse())) {
            return Ok(inv);
        }
        load *= 10.0;
    }
    Err(Error::Singular {
        what,
        cond_estimate: condition_estimate(m),
    })
}

/// Ratio of the extreme diagonal magnitudes of an LU factor; a cheap lower
/// bound on the 2-norm condition number.
pub fn condition_estimate(m: &CMatrix) -> f64 {
    let lu = m.clone().lu();
    let u = lu.u();
    let diag: Vec<f64> = (0..u.nrows().min(u.ncols())).map(|i| u[(i, i)].norm()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// `log2 det(M)` for Hermitian positive definite `M`.
pub fn log2_det_hpd(m: &CMatrix) -> Result<f64> {
    let chol: Cholesky<Complex64, Dyn> = Cholesky::new(m.clone()).ok_or(Error::Singular {
        what: "log-det argument",
        cond_estimate: condition_estimate(m),
    })?;
    let l = chol.l_dirty();
    Ok((0..m.nrows()).map(|i| 2.0 * l[(i, i)].re.log2()).sum())
}

/// `max |a - b| / max(max |b|, floor)`.
pub fn rel_err(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    let diff = a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    let scale = b.iter().map(|y| y.norm()).fold(0.0, f64::max).max(1e-300);
    diff / scale
}

pub fn frobenius_sq(m: &CMatrix) -> f64 {
    m.iter().map(|x| x.norm_sqr()).sum()
}
