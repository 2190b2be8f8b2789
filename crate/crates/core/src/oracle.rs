//! Brute-force reference computations.
//!
//! Everything here is written from the model definitions with plain loops
//! and dense solves so that the fast paths elsewhere in the crate can be
//! checked against it. Costs are exponential or cubic in the instance size;
//! use on toy instances only.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::channel::{ChannelRealization, ReceivedFrame};
use crate::linalg::CMatrix;
use crate::tx::{Constellation, ConvCode};

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Posterior LLRs of the data bits and of the coded bits, by enumerating
/// every data word of `data_bits` bits followed by the zero tail.
pub fn exhaustive_code_posterior(code: &ConvCode, data_bits: usize, lam: &[f64]) -> (Vec<f64>, Vec<f64>) {
    assert!(data_bits <= 20, "enumeration of 2^{data_bits} words refused");
    let n_coded = (data_bits + code.memory()) * code.outputs();
    assert_eq!(lam.len(), n_coded);
    let words = 1usize << data_bits;
    let mut weights = Vec::with_capacity(words);
    let mut codewords = Vec::with_capacity(words);
    for w in 0..words {
        let data: Vec<u8> = (0..data_bits).map(|b| ((w >> b) & 1) as u8).collect();
        let c = code.encode(&code.with_tail(&data)).unwrap();
        // log P(c) up to a constant, with lambda = log P(1)/P(0)
        let weight: f64 = c.iter().zip(lam).map(|(&b, &l)| b as f64 * l).sum();
        weights.push(weight);
        codewords.push(c);
    }
    let llr_over = |member: &dyn Fn(usize) -> bool| {
        let mut one = Vec::new();
        let mut zero = Vec::new();
        for (w, &x) in weights.iter().enumerate() {
            if member(w) {
                one.push(x);
            } else {
                zero.push(x);
            }
        }
        log_sum_exp(&one) - log_sum_exp(&zero)
    };
    let info = (0..data_bits).map(|b| llr_over(&|w| (w >> b) & 1 == 1)).collect();
    let coded = (0..n_coded).map(|p| llr_over(&|w| codewords[w][p] == 1)).collect();
    (info, coded)
}

/// Sliding-window channel matrix of one round, element by element:
/// row block `j` observes `y_{i + kappa1 - j}`, column block `c` holds
/// `s_{i + kappa1 - c}`, and the block at `(j, c)` is `H_{c - j}`.
pub fn window_matrix(taps: &[CMatrix], kappa1: usize, kappa2: usize) -> CMatrix {
    let kappa = kappa1 + kappa2 + 1;
    let n_taps = taps.len();
    let (n_rx, n_tx) = taps[0].shape();
    let mut h = CMatrix::zeros(n_rx * kappa, n_tx * (kappa + n_taps - 1));
    for j in 0..kappa {
        for c in 0..kappa + n_taps - 1 {
            if c < j || c - j >= n_taps {
                continue;
            }
            for r in 0..n_rx {
                for t in 0..n_tx {
                    h[(j * n_rx + r, c * n_tx + t)] = taps[c - j][(r, t)];
                }
            }
        }
    }
    h
}

/// Round-major vertical stack of per-round window matrices.
pub fn stacked_window_matrix(rounds: &[ChannelRealization], kappa1: usize, kappa2: usize) -> CMatrix {
    let blocks: Vec<CMatrix> = rounds
        .iter()
        .map(|c| window_matrix(&c.taps, kappa1, kappa2))
        .collect();
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMatrix::zeros(rows, blocks[0].ncols());
    let mut at = 0;
    for b in &blocks {
        out.view_mut((at, 0), b.shape()).copy_from(b);
        at += b.nrows();
    }
    out
}

/// Window observation `[y_{i+kappa1}; ...; y_{i-kappa2}]` of one round, zero
/// outside the received span.
pub fn window_observation(rx: &ReceivedFrame, kappa1: usize, kappa2: usize, i: usize) -> DVector<Complex64> {
    let n_rx = rx.samples.nrows();
    let kappa = kappa1 + kappa2 + 1;
    DVector::from_fn(n_rx * kappa, |row, _| {
        let (j, r) = (row / n_rx, row % n_rx);
        rx.sample(r, i as isize + kappa1 as isize - j as isize)
    })
}

pub fn stacked_window_observation(
    frames: &[ReceivedFrame],
    kappa1: usize,
    kappa2: usize,
    i: usize,
) -> DVector<Complex64> {
    let parts: Vec<DVector<Complex64>> = frames
        .iter()
        .map(|f| window_observation(f, kappa1, kappa2, i))
        .collect();
    let mut v = Vec::new();
    for p in &parts {
        v.extend(p.iter().cloned());
    }
    DVector::from_vec(v)
}

/// Window symbol vector `[s_{i+kappa1}; ...; s_{i-kappa2-L+1}]`, zero outside
/// the frame.
pub fn window_symbols(symbols: &CMatrix, kappa1: usize, width: usize, i: usize) -> DVector<Complex64> {
    let (n_tx, n_uses) = symbols.shape();
    DVector::from_fn(n_tx * width, |row, _| {
        let (c, t) = (row / n_tx, row % n_tx);
        let idx = i as isize + kappa1 as isize - c as isize;
        if idx < 0 || idx as usize >= n_uses {
            Complex64::new(0.0, 0.0)
        } else {
            symbols[(t, idx as usize)]
        }
    })
}

/// Soft interference cancellation followed by the unconditional MMSE filter
/// for the symbol in column `r`, evaluated with a dense LU solve of the full
/// observation covariance.
///
/// `variances` holds the symbol variance of every column of `h`; column `r`
/// is treated as unknown with unit variance. Returns `(xi, alpha)`.
pub fn direct_filter_output(
    h: &CMatrix,
    y: &DVector<Complex64>,
    s_bar: &DVector<Complex64>,
    variances: &[f64],
    sigma2: f64,
    r: usize,
) -> (Complex64, f64) {
    let n = h.nrows();
    let mut cov = CMatrix::identity(n, n) * Complex64::new(sigma2, 0.0);
    for c in 0..h.ncols() {
        let v = if c == r { 1.0 } else { variances[c] };
        let col = h.column(c);
        cov += col * col.adjoint() * Complex64::new(v, 0.0);
    }
    let hr = h.column(r).into_owned();
    let f = cov.lu().solve(&hr).expect("covariance is nonsingular");
    let mut cancelled = s_bar.clone();
    cancelled[r] = Complex64::new(0.0, 0.0);
    let y_tilde = y - h * cancelled;
    let xi = f.dotc(&y_tilde);
    let alpha = f.dotc(&hr).re;
    (xi, alpha)
}

/// Extrinsic LLRs of one symbol's bits from Gaussian observations
/// `xi_r = alpha_r s + w_r`, `w_r ~ CN(0, delta2_r)`, by summing over the
/// constellation without any log-domain shifting.
pub fn enumerate_demap(
    obs: &[(Complex64, f64, f64)],
    prior: &[f64],
    constellation: &Constellation,
) -> Vec<f64> {
    let m = constellation.bits_per_symbol();
    (0..m)
        .map(|bit| {
            let mut num = 0.0;
            let mut den = 0.0;
            for label in 0..constellation.size() {
                let s = constellation.point(label);
                let mut e = 0.0;
                for &(xi, alpha, d2) in obs {
                    e -= (xi - s * alpha).norm_sqr() / d2;
                }
                for (b, &l) in prior.iter().enumerate() {
                    if b != bit && constellation.bit(label, b) == 1 {
                        e += l;
                    }
                }
                if constellation.bit(label, bit) == 1 {
                    num += e.exp();
                } else {
                    den += e.exp();
                }
            }
            (num / den).ln()
        })
        .collect()
}

/// Mean and variance of a symbol under independent bit priors, by direct
/// enumeration.
pub fn enumerate_soft_symbol(prior: &[f64], constellation: &Constellation) -> (Complex64, f64) {
    let mut mean = Complex64::new(0.0, 0.0);
    let mut energy = 0.0;
    for label in 0..constellation.size() {
        let mut p = 1.0;
        for (b, &l) in prior.iter().enumerate() {
            let p1 = 1.0 / (1.0 + (-l).exp());
            p *= if constellation.bit(label, b) == 1 { p1 } else { 1.0 - p1 };
        }
        mean += constellation.point(label) * p;
        energy += constellation.point(label).norm_sqr() * p;
    }
    (mean, energy - mean.norm_sqr())
}
