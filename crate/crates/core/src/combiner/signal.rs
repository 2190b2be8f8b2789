//! Sliding-window soft interference cancellation with an unconditional
//! MMSE filter, driven by matched-filter accumulators that absorb one ARQ
//! round at a time.
//!
//! For channel use `i` the window stacks `y_{i+kappa1}, ..., y_{i-kappa2}`
//! against `s_{i+kappa1}, ..., s_{i-kappa2-L+1}`. A round adds
//! `H^H y_i` to `z_i` and `H^H H` to `Upsilon`; both are all the filters
//! ever need, so the cost of a round does not grow with the number of
//! rounds already absorbed.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{demap_frame, LlrGrid, SoftStats, Window};
use crate::channel::{ChannelRealization, ReceivedFrame};
use crate::linalg::{hermitian_inverse, CMatrix};
use crate::tx::Constellation;
use crate::{Error, Result};

/// Floor applied to symbol variances before they are inverted.
pub const VARIANCE_FLOOR: f64 = 1e-9;

/// Block-Toeplitz window channel `H` of one round, `N_R kappa` by
/// `N_T (kappa + L - 1)`, with `H_l` at block `(j, j + l)`.
pub fn block_toeplitz(taps: &[CMatrix], window: Window) -> CMatrix {
    let (n_rx, n_tx) = taps[0].shape();
    let kappa = window.kappa();
    let width = window.width(taps.len());
    let mut h = CMatrix::zeros(n_rx * kappa, n_tx * width);
    for j in 0..kappa {
        for (l, tap) in taps.iter().enumerate() {
            h.view_mut((j * n_rx, (j + l) * n_tx), (n_rx, n_tx)).copy_from(tap);
        }
    }
    h
}

/// Window symbol vectors of a whole frame, one column per channel use.
/// Symbols outside the frame are zero.
pub fn window_symbol_matrix(symbols: &CMatrix, window: Window, width: usize) -> CMatrix {
    let (n_tx, n_uses) = symbols.shape();
    let mut out = CMatrix::zeros(n_tx * width, n_uses);
    for i in 0..n_uses {
        for c in 0..width {
            let idx = i as isize + window.kappa1 as isize - c as isize;
            if idx < 0 || idx as usize >= n_uses {
                continue;
            }
            for t in 0..n_tx {
                out[(c * n_tx + t, i)] = symbols[(t, idx as usize)];
            }
        }
    }
    out
}

/// Matched-filter accumulators `z_i` and `Upsilon` over the absorbed rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalLevelState {
    window: Window,
    n_tx: usize,
    n_taps: usize,
    n_uses: usize,
    /// Column `i` is `z_i`.
    z: CMatrix,
    upsilon: CMatrix,
    rounds: usize,
}

impl SignalLevelState {
    pub fn new(window: Window, n_tx: usize, n_taps: usize, n_uses: usize) -> Self {
        let dim = n_tx * window.width(n_taps);
        SignalLevelState {
            window,
            n_tx,
            n_taps,
            n_uses,
            z: CMatrix::zeros(dim, n_uses),
            upsilon: CMatrix::zeros(dim, dim),
            rounds: 0,
        }
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn n_tx(&self) -> usize {
        self.n_tx
    }

    pub fn n_taps(&self) -> usize {
        self.n_taps
    }

    pub fn n_uses(&self) -> usize {
        self.n_uses
    }

    pub fn dim(&self) -> usize {
        self.upsilon.nrows()
    }

    pub fn z(&self) -> &CMatrix {
        &self.z
    }

    pub fn upsilon(&self) -> &CMatrix {
        &self.upsilon
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn reset(&mut self) {
        self.z.fill(Complex64::new(0.0, 0.0));
        self.upsilon.fill(Complex64::new(0.0, 0.0));
        self.rounds = 0;
    }

    pub fn accumulate_round(&mut self, ch: &ChannelRealization, rx: &ReceivedFrame) -> Result<()> {
        if ch.n_tx() != self.n_tx || ch.n_taps() != self.n_taps {
            return Err(Error::Model(format!(
                "channel with {} transmit antennas and {} taps does not fit a window built for {} and {}",
                ch.n_tx(),
                ch.n_taps(),
                self.n_tx,
                self.n_taps
            )));
        }
        if rx.samples.nrows() != ch.n_rx() || rx.len() != self.n_uses + self.n_taps - 1 {
            return Err(Error::Model(format!(
                "received frame is {}x{}, expected {}x{}",
                rx.samples.nrows(),
                rx.len(),
                ch.n_rx(),
                self.n_uses + self.n_taps - 1
            )));
        }
        let n_rx = ch.n_rx();
        let kappa = self.window.kappa();
        let h = block_toeplitz(&ch.taps, self.window);
        let mut y = CMatrix::zeros(n_rx * kappa, self.n_uses);
        for i in 0..self.n_uses {
            for j in 0..kappa {
                let m = i as isize + self.window.kappa1 as isize - j as isize;
                for r in 0..n_rx {
                    y[(j * n_rx + r, i)] = rx.sample(r, m);
                }
            }
        }
        let one = Complex64::new(1.0, 0.0);
        self.z.gemm_ad(one, &h, &y, one);
        self.upsilon.gemm_ad(one, &h, &h, one);
        self.rounds += 1;
        Ok(())
    }
}

/// Time-invariant filters of one turbo iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    /// Row `t` is the forward filter `F_t`.
    pub forward: CMatrix,
    /// Row `t` is the backward filter `B_t = F_t Upsilon`.
    pub backward: CMatrix,
    pub alpha: Vec<f64>,
    pub delta2: Vec<f64>,
    /// `I - Upsilon (Upsilon + sigma2 Xi^-1)^-1`.
    pub lambda: CMatrix,
}

impl FilterBank {
    /// `alpha / (1 - alpha)`, the signal-to-interference-plus-noise ratio at
    /// the filter output.
    pub fn post_filter_snr(&self, t: usize) -> f64 {
        self.alpha[t] / (1.0 - self.alpha[t])
    }

    /// Filter outputs `xi_{t,i} = F_t z_i - B_t s_i + alpha_t s_{t,i}` for
    /// every antenna and channel use.
    pub fn apply(&self, state: &SignalLevelState, stats: &SoftStats) -> CMatrix {
        let width = state.window.width(state.n_taps);
        let s_win = window_symbol_matrix(&stats.s_bar, state.window, width);
        let mut xi = &self.forward * &state.z;
        xi.gemm(Complex64::new(-1.0, 0.0), &self.backward, &s_win, Complex64::new(1.0, 0.0));
        for i in 0..state.n_uses {
            for t in 0..state.n_tx {
                xi[(t, i)] += stats.s_bar[(t, i)] * self.alpha[t];
            }
        }
        xi
    }
}

pub fn compute_filters(state: &SignalLevelState, stats: &SoftStats, sigma2: f64) -> Result<FilterBank> {
    if state.rounds == 0 {
        return Err(Error::Protocol("filters requested before any round was absorbed".into()));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::Model(format!("noise variance {sigma2} must be positive")));
    }
    let dim = state.dim();
    let width = state.window.width(state.n_taps);
    let var: Vec<f64> = stats
        .window_variances(width)
        .into_iter()
        .map(|v| v.max(VARIANCE_FLOOR))
        .collect();
    let mut m = state.upsilon.clone();
    for (d, v) in var.iter().enumerate() {
        m[(d, d)] += sigma2 / v;
    }
    let m_inv = hermitian_inverse(&m, "Upsilon + sigma2 Xi^-1")?;
    // I - Upsilon M^-1 = sigma2 Xi^-1 M^-1, evaluated without cancellation
    let lambda = DMatrix::from_fn(dim, dim, |r, c| m_inv[(r, c)] * (sigma2 / var[r]));

    let n_tx = state.n_tx;
    let mut forward = CMatrix::zeros(n_tx, dim);
    let mut backward = CMatrix::zeros(n_tx, dim);
    let mut alpha = vec![0.0; n_tx];
    let mut delta2 = vec![0.0; n_tx];
    for t in 0..n_tx {
        let r = state.window.own_column(n_tx, t);
        let row = lambda.row(r);
        let lu_rr = (row * state.upsilon.column(r))[(0, 0)].re;
        let scale = 1.0 / (sigma2 + (1.0 - stats.sigma2_bar[t]) * lu_rr);
        let f = row * Complex64::new(scale, 0.0);
        let b = &f * &state.upsilon;
        let a = b[(0, r)].re;
        forward.row_mut(t).copy_from(&f);
        backward.row_mut(t).copy_from(&b);
        alpha[t] = a;
        delta2[t] = ((1.0 - a) * a).max(0.0);
    }
    Ok(FilterBank {
        forward,
        backward,
        alpha,
        delta2,
        lambda,
    })
}

/// One equalization and demapping pass over the absorbed rounds.
pub fn signal_level_iterate(
    state: &SignalLevelState,
    apriori: &LlrGrid,
    sigma2: f64,
    constellation: &Constellation,
) -> Result<LlrGrid> {
    let stats = super::soft_stats(apriori, constellation);
    let bank = compute_filters(state, &stats, sigma2)?;
    let xi = bank.apply(state, &stats);
    Ok(demap_frame(&xi, &bank.alpha, &bank.delta2, apriori, constellation))
}

/// Matched filter bound genie: every interfering symbol is cancelled with
/// its true value and the own symbol is combined by MRC over all absorbed
/// branches. Returns the zero-prior extrinsic LLRs and `alpha` per antenna.
pub fn mfb_genie(
    state: &SignalLevelState,
    symbols: &CMatrix,
    sigma2: f64,
    constellation: &Constellation,
) -> Result<(LlrGrid, Vec<f64>)> {
    if state.rounds == 0 {
        return Err(Error::Protocol("genie requested before any round was absorbed".into()));
    }
    if symbols.shape() != (state.n_tx, state.n_uses) {
        return Err(Error::Model("symbol matrix does not match the accumulators".into()));
    }
    let width = state.window.width(state.n_taps);
    let s_win = window_symbol_matrix(symbols, state.window, width);
    let resid = &state.z - &state.upsilon * &s_win;
    let n_tx = state.n_tx;
    let mut xi = CMatrix::zeros(n_tx, state.n_uses);
    let mut alpha = vec![0.0; n_tx];
    let mut delta2 = vec![0.0; n_tx];
    for t in 0..n_tx {
        let r = state.window.own_column(n_tx, t);
        let tau = state.upsilon[(r, r)].re;
        alpha[t] = tau / (sigma2 + tau);
        delta2[t] = (1.0 - alpha[t]) * alpha[t];
        for i in 0..state.n_uses {
            xi[(t, i)] = (resid[(r, i)] + symbols[(t, i)] * tau) / (sigma2 + tau);
        }
    }
    let zero = LlrGrid::zeros(constellation.bits_per_symbol(), n_tx, state.n_uses);
    Ok((demap_frame(&xi, &alpha, &delta2, &zero, constellation), alpha))
}
