//! Quasi-static block-fading MIMO-ISI channel.
//!
//! Each round sees `L` tap matrices `H_l` (`N_R x N_T`) with i.i.d.
//! `CN(0, sigma_l^2)` entries. A frame of `T` symbol vectors followed by an
//! `L - 1` zero guard produces `T + L - 1` received vectors
//! `y_i = sum_l H_l s_{i-l} + n_i`, `n_i ~ CN(0, sigma^2 I)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linalg::CMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelDynamic {
    /// Independent realization every round.
    #[default]
    ShortTermStatic,
    /// One realization for all rounds of a packet.
    LongTermStatic,
}

/// Power delay profile.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelProfile {
    tap_powers: Vec<f64>,
    pub dynamic: ChannelDynamic,
}

impl ChannelProfile {
    pub fn new(tap_powers: Vec<f64>, dynamic: ChannelDynamic) -> Result<Self> {
        if tap_powers.is_empty() {
            return Err(Error::Config("channel profile needs at least one tap".into()));
        }
        if tap_powers.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::Config("tap powers must be finite and non-negative".into()));
        }
        let total: f64 = tap_powers.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("tap powers sum to {total}, expected 1")));
        }
        Ok(ChannelProfile {
            tap_powers,
            dynamic,
        })
    }

    /// `L` equal-power taps.
    pub fn uniform(taps: usize, dynamic: ChannelDynamic) -> Result<Self> {
        if taps == 0 {
            return Err(Error::Config("channel profile needs at least one tap".into()));
        }
        Self::new(vec![1.0 / taps as f64; taps], dynamic)
    }

    pub fn taps(&self) -> usize {
        self.tap_powers.len()
    }

    pub fn tap_powers(&self) -> &[f64] {
        &self.tap_powers
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub taps: Vec<CMatrix>,
    /// 1-based ARQ round, or the number of stacked rounds for a virtual channel.
    pub round_index: usize,
}

impl ChannelRealization {
    pub fn new(taps: Vec<CMatrix>, round_index: usize) -> Result<Self> {
        let first = taps
            .first()
            .ok_or_else(|| Error::Model("channel without taps".into()))?;
        let shape = first.shape();
        if taps.iter().any(|h| h.shape() != shape) {
            return Err(Error::Model("tap matrices differ in shape".into()));
        }
        Ok(ChannelRealization { taps, round_index })
    }

    pub fn n_rx(&self) -> usize {
        self.taps[0].nrows()
    }

    pub fn n_tx(&self) -> usize {
        self.taps[0].ncols()
    }

    pub fn n_taps(&self) -> usize {
        self.taps.len()
    }

    pub fn energy(&self) -> f64 {
        self.taps.iter().map(crate::linalg::frobenius_sq).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedFrame {
    /// `N_R x (T + L - 1)`, column `i` is `y_i`.
    pub samples: CMatrix,
    pub noise_variance: f64,
}

impl ReceivedFrame {
    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.ncols() == 0
    }

    /// Entry `r` of `y_i`; zero outside the received span.
    #[inline]
    pub fn sample(&self, r: usize, i: isize) -> Complex64 {
        if i < 0 || i as usize >= self.samples.ncols() {
            Complex64::new(0.0, 0.0)
        } else {
            self.samples[(r, i as usize)]
        }
    }
}

/// Draws one `CN(0, 1)` sample.
#[inline]
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn sample_channel<R: Rng + ?Sized>(
    profile: &ChannelProfile,
    n_tx: usize,
    n_rx: usize,
    round_index: usize,
    rng: &mut R,
) -> ChannelRealization {
    let taps = profile
        .tap_powers
        .iter()
        .map(|&p| {
            let scale = p.sqrt();
            DMatrix::from_fn(n_rx, n_tx, |_, _| complex_normal(rng) * scale)
        })
        .collect();
    ChannelRealization { taps, round_index }
}

/// FIR convolution of the zero-padded frame plus `CN(0, sigma2 I)` noise.
///
/// Noise is drawn as unit-variance samples scaled by `sqrt(sigma2)`, so the
/// same generator state yields the same underlying draws at every SNR.
pub fn transmit<R: Rng + ?Sized>(
    symbols: &CMatrix,
    ch: &ChannelRealization,
    noise_variance: f64,
    rng: &mut R,
) -> Result<ReceivedFrame> {
    if symbols.nrows() != ch.n_tx() {
        return Err(Error::Model(format!(
            "symbol matrix has {} rows, channel has {} transmit antennas",
            symbols.nrows(),
            ch.n_tx()
        )));
    }
    if !(noise_variance >= 0.0) {
        return Err(Error::Model(format!("invalid noise variance {noise_variance}")));
    }
    let n_uses = symbols.ncols();
    let len = n_uses + ch.n_taps() - 1;
    let mut samples = CMatrix::zeros(ch.n_rx(), len);
    for (l, h) in ch.taps.iter().enumerate() {
        let mut block = samples.columns_mut(l, n_uses);
        block.gemm(Complex64::new(1.0, 0.0), h, symbols, Complex64::new(1.0, 0.0));
    }
    let sigma = noise_variance.sqrt();
    for i in 0..len {
        for r in 0..ch.n_rx() {
            samples[(r, i)] += complex_normal(rng) * sigma;
        }
    }
    Ok(ReceivedFrame {
        samples,
        noise_variance,
    })
}

/// Per-tap vertical concatenation of round realizations, in round order.
pub fn stack_rounds(rounds: &[ChannelRealization]) -> Result<ChannelRealization> {
    let first = rounds
        .first()
        .ok_or_else(|| Error::Model("no rounds to stack".into()))?;
    let (n_rx, n_tx, n_taps) = (first.n_rx(), first.n_tx(), first.n_taps());
    if rounds
        .iter()
        .any(|c| c.n_rx() != n_rx || c.n_tx() != n_tx || c.n_taps() != n_taps)
    {
        return Err(Error::Model("rounds have heterogeneous channel dimensions".into()));
    }
    let k = rounds.len();
    let taps = (0..n_taps)
        .map(|l| {
            let mut m = CMatrix::zeros(k * n_rx, n_tx);
            for (u, c) in rounds.iter().enumerate() {
                m.view_mut((u * n_rx, 0), (n_rx, n_tx)).copy_from(&c.taps[l]);
            }
            m
        })
        .collect();
    Ok(ChannelRealization {
        taps,
        round_index: k,
    })
}

/// `Lambda_i = sum_l H_l exp(-j 2 pi i l / T)`.
pub fn channel_dft(taps: &[CMatrix], dft_len: usize, bin: usize) -> CMatrix {
    assert!(bin < dft_len, "bin {bin} outside a length-{dft_len} DFT");
    let mut out = CMatrix::zeros(taps[0].nrows(), taps[0].ncols());
    for (l, h) in taps.iter().enumerate() {
        let phase = -2.0 * std::f64::consts::PI * ((bin * l) % dft_len) as f64 / dft_len as f64;
        out += h * Complex64::from_polar(1.0, phase);
    }
    out
}
