//! Outage probability of Chase ARQ over the MIMO-ISI block-fading channel,
//! and the transmit power lost to retransmissions.
//!
//! After `k` rounds the receiver sees a virtual `k N_R x N_T` channel whose
//! Gaussian-input rate is
//! `(1/T) sum_i log2 det(I + (gamma / N_T) Lambda_i^H Lambda_i)`. The
//! per-bin Gram matrices `Lambda_i^H Lambda_i` of the stacked channel are
//! sums of per-round Gram matrices, so each trial draws `K_max` rounds once
//! and reuses them for every SNR and every `K <= K_max`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{channel_dft, sample_channel, stack_rounds, ChannelProfile, ChannelRealization};
use crate::linalg::{log2_det_hpd, CMatrix};
use crate::seeding::{lane_round, stream};
use crate::{db_to_linear, Error, Result};

/// Acceptance test applied after round `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RateNormalization {
    /// `(1/k) I^(k) >= R`, the repetition-code view of Chase combining.
    #[default]
    PerRound,
    /// `I^(k) >= R`.
    None,
}

impl RateNormalization {
    pub fn name(self) -> &'static str {
        match self {
            RateNormalization::PerRound => "per-round",
            RateNormalization::None => "none",
        }
    }

    #[inline]
    pub fn accepts(self, info: f64, k: usize, rate: f64) -> bool {
        match self {
            RateNormalization::PerRound => info / k as f64 >= rate,
            RateNormalization::None => info >= rate,
        }
    }
}

impl fmt::Display for RateNormalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RateNormalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-round" => Ok(RateNormalization::PerRound),
            "none" => Ok(RateNormalization::None),
            _ => Err(Error::Config(format!("unknown rate normalization {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutageConfig {
    pub profile: ChannelProfile,
    pub n_tx: usize,
    pub n_rx: usize,
    /// Largest ARQ delay; results are reported for every `K` up to it.
    pub k_max: usize,
    pub rate: f64,
    pub dft_len: usize,
    pub snr_grid_db: Vec<f64>,
    pub trials: u64,
    pub normalization: RateNormalization,
    pub master_seed: u64,
}

impl OutageConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_max == 0 || self.trials == 0 || self.dft_len == 0 {
            return Err(Error::Config("K, trials and the DFT length must be positive".into()));
        }
        if !(self.rate > 0.0) {
            return Err(Error::Config(format!("rate {} must be positive", self.rate)));
        }
        if self.n_tx == 0 || self.n_rx == 0 {
            return Err(Error::Config("antenna counts must be positive".into()));
        }
        Ok(())
    }
}

/// Estimates for one `(snr, K)` pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutageRow {
    pub snr_db: f64,
    pub k: usize,
    pub p_out: f64,
    pub std_err: f64,
    pub expected_rounds: f64,
    pub expected_rounds_std_err: f64,
    pub power_loss_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutageResult {
    pub trials: u64,
    pub rows: Vec<OutageRow>,
}

impl OutageResult {
    pub fn rows_for(&self, k: usize) -> Vec<&OutageRow> {
        self.rows.iter().filter(|r| r.k == k).collect()
    }
}

/// Rate of the stacked channel by the defining formula: the mean over DFT
/// bins of `log2 det(I_{k N_R} + (gamma / N_T) Lambda_i Lambda_i^H)`.
pub fn mutual_information(stacked_taps: &[CMatrix], gamma: f64, n_tx: usize, dft_len: usize) -> f64 {
    let c = Complex64::new(gamma / n_tx as f64, 0.0);
    let mut acc = 0.0;
    for bin in 0..dft_len {
        let lam = channel_dft(stacked_taps, dft_len, bin);
        let n = lam.nrows();
        let m = CMatrix::identity(n, n) + &lam * lam.adjoint() * c;
        acc += log2_det_hpd(&m).expect("identity plus PSD is positive definite");
    }
    acc / dft_len as f64
}

/// Coefficients `e_0..e_n` of `det(I + c G) = sum_j e_j c^j` for Hermitian
/// `G`, by the Faddeev-LeVerrier recursion.
pub fn det_poly(g: &CMatrix) -> Vec<f64> {
    let n = g.nrows();
    // char poly det(x I - G) = x^n + a_1 x^{n-1} + ... + a_n
    let mut a = vec![1.0; n + 1];
    let mut m = CMatrix::identity(n, n);
    for k in 1..=n {
        let gm = g * &m;
        let tr: f64 = (0..n).map(|i| gm[(i, i)].re).sum();
        a[k] = -tr / k as f64;
        m = gm + CMatrix::identity(n, n) * Complex64::new(a[k], 0.0);
    }
    // det(I + c G) = (-c)^n det(-1/c I - G) = sum_j (-1)^j a_j c^j
    a.iter()
        .enumerate()
        .map(|(j, &x)| if j % 2 == 0 { x } else { -x })
        .collect()
}

#[inline]
fn eval_poly(e: &[f64], c: f64) -> f64 {
    e.iter().rev().fold(0.0, |acc, &x| acc * c + x)
}

/// Adds the per-bin Gram matrices `Lambda_i^H Lambda_i` of one round to
/// `grams` (row-major `N_T x N_T` blocks, one per bin).
fn add_round_grams(ch: &ChannelRealization, dft_len: usize, grams: &mut [Complex64], lam: &mut [Complex64]) {
    let (n_rx, n_tx) = (ch.n_rx(), ch.n_tx());
    let nn = n_tx * n_tx;
    for bin in 0..dft_len {
        lam.fill(Complex64::new(0.0, 0.0));
        for (l, h) in ch.taps.iter().enumerate() {
            let phase = -2.0 * std::f64::consts::PI * ((bin * l) % dft_len) as f64 / dft_len as f64;
            let w = Complex64::from_polar(1.0, phase);
            for t in 0..n_tx {
                for r in 0..n_rx {
                    lam[t * n_rx + r] += h[(r, t)] * w;
                }
            }
        }
        let g = &mut grams[bin * nn..(bin + 1) * nn];
        for a in 0..n_tx {
            for b in a..n_tx {
                let mut acc = Complex64::new(0.0, 0.0);
                for r in 0..n_rx {
                    acc += lam[a * n_rx + r].conj() * lam[b * n_rx + r];
                }
                g[a * n_tx + b] += acc;
                if b != a {
                    g[b * n_tx + a] += acc.conj();
                }
            }
        }
    }
}

/// `det_poly` on a row-major slice, written into `out` (length `n + 1`).
fn det_poly_slice(g: &[Complex64], n: usize, out: &mut [f64]) {
    match n {
        1 => {
            out[0] = 1.0;
            out[1] = g[0].re;
        }
        2 => {
            out[0] = 1.0;
            out[1] = g[0].re + g[3].re;
            out[2] = g[0].re * g[3].re - g[1].norm_sqr();
        }
        _ => {
            let m = CMatrix::from_row_slice(n, n, g);
            out.copy_from_slice(&det_poly(&m));
        }
    }
}

/// Index (1-based) of the first accepting round for every SNR, 0 if none
/// within `k_max`.
fn trial_first_accept(cfg: &OutageConfig, trial: u64) -> Vec<u8> {
    let n = cfg.n_tx;
    let nn = n * n;
    let mut grams = vec![Complex64::new(0.0, 0.0); cfg.dft_len * nn];
    let mut lam = vec![Complex64::new(0.0, 0.0); n * cfg.n_rx];
    // polys[k][bin * (n + 1)..] for the stack of rounds 1..=k+1
    let mut polys: Vec<Vec<f64>> = Vec::with_capacity(cfg.k_max);
    for k in 1..=cfg.k_max {
        let mut rng = stream(cfg.master_seed, trial, lane_round(k));
        let ch = sample_channel(&cfg.profile, cfg.n_tx, cfg.n_rx, k, &mut rng);
        add_round_grams(&ch, cfg.dft_len, &mut grams, &mut lam);
        let mut p = vec![0.0; cfg.dft_len * (n + 1)];
        for bin in 0..cfg.dft_len {
            det_poly_slice(&grams[bin * nn..(bin + 1) * nn], n, &mut p[bin * (n + 1)..(bin + 1) * (n + 1)]);
        }
        polys.push(p);
    }
    cfg.snr_grid_db
        .iter()
        .map(|&snr| {
            let c = db_to_linear(snr) / n as f64;
            for (k, bins) in polys.iter().enumerate() {
                let mut info = 0.0;
                // products of four bins keep the log count down without overflow
                for chunk in bins.chunks(4 * (n + 1)) {
                    let prod: f64 = chunk.chunks(n + 1).map(|e| eval_poly(e, c)).product();
                    info += if prod.is_finite() {
                        prod.log2()
                    } else {
                        chunk.chunks(n + 1).map(|e| eval_poly(e, c).log2()).sum()
                    };
                }
                info /= cfg.dft_len as f64;
                if cfg.normalization.accepts(info, k + 1, cfg.rate) {
                    return (k + 1) as u8;
                }
            }
            0
        })
        .collect()
}

/// Monte Carlo estimates of the outage probability and of `E[T]` for every
/// `K <= k_max` and every SNR of the grid, with common random numbers.
pub fn simulate_outage(cfg: &OutageConfig) -> Result<OutageResult> {
    cfg.validate()?;
    if cfg.k_max > u8::MAX as usize {
        return Err(Error::Config("K above 255 is not supported".into()));
    }
    let n_snr = cfg.snr_grid_db.len();
    // counts[snr][k] = trials whose first accepting round is k (0 = never)
    let counts = (0..cfg.trials)
        .into_par_iter()
        .fold(
            || DMatrix::<u64>::zeros(n_snr, cfg.k_max + 1),
            |mut acc, trial| {
                for (s, k) in trial_first_accept(cfg, trial).into_iter().enumerate() {
                    acc[(s, k as usize)] += 1;
                }
                acc
            },
        )
        .reduce(|| DMatrix::<u64>::zeros(n_snr, cfg.k_max + 1), |a, b| a + b);

    let n = cfg.trials as f64;
    let mut rows = Vec::with_capacity(n_snr * cfg.k_max);
    for (s, &snr_db) in cfg.snr_grid_db.iter().enumerate() {
        for k in 1..=cfg.k_max {
            let accepted: u64 = (1..=k).map(|j| counts[(s, j)]).sum();
            let p_out = (cfg.trials - accepted) as f64 / n;
            // rounds used: j for acceptance at j <= k, k otherwise
            let mut m1 = 0.0;
            let mut m2 = 0.0;
            for j in 1..=k {
                let c = counts[(s, j)] as f64;
                m1 += c * j as f64;
                m2 += c * (j * j) as f64;
            }
            let rest = (cfg.trials - accepted) as f64;
            m1 += rest * k as f64;
            m2 += rest * (k * k) as f64;
            let mean = m1 / n;
            let var = (m2 / n - mean * mean).max(0.0);
            rows.push(OutageRow {
                snr_db,
                k,
                p_out,
                std_err: (p_out * (1.0 - p_out) / n).sqrt(),
                expected_rounds: mean,
                expected_rounds_std_err: (var / n).sqrt(),
                power_loss_db: 10.0 * mean.log10(),
            });
        }
    }
    Ok(OutageResult {
        trials: cfg.trials,
        rows,
    })
}

/// Outage-based transmit power loss `10 log10 E[T]` per `(snr, K)`.
pub fn power_loss(result: &OutageResult) -> Vec<(f64, usize, f64)> {
    result
        .rows
        .iter()
        .map(|r| (r.snr_db, r.k, r.power_loss_db))
        .collect()
}

/// Mutual information after each of `rounds.len()` rounds by explicit
/// stacking; used to cross-check the Gram-polynomial fast path.
pub fn stacked_information(rounds: &[ChannelRealization], gamma: f64, dft_len: usize) -> Result<Vec<f64>> {
    (1..=rounds.len())
        .map(|k| {
            let st = stack_rounds(&rounds[..k])?;
            Ok(mutual_information(&st.taps, gamma, st.n_tx(), dft_len))
        })
        .collect()
}

/// SNR (dB) at which a decreasing curve crosses `target`, by linear
/// interpolation of `log10 p` between grid points.
pub fn crossing_db(points: &[(f64, f64)], target: f64) -> Option<f64> {
    for w in points.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if y0 >= target && y1 <= target && y0 > 0.0 && y1 > 0.0 {
            if y0 == y1 {
                return Some(x0);
            }
            let (l0, l1, lt) = (y0.log10(), y1.log10(), target.log10());
            return Some(x0 + (lt - l0) / (l1 - l0) * (x1 - x0));
        }
    }
    None
}
