//! Turbo packet combining receivers.
//!
//! All receivers exchange LLRs with the decoder in interleaved bit order,
//! held in an [`LlrGrid`]. The MMSE receivers share one sliding-window
//! equalizer ([`signal`]); they differ in what is carried from one ARQ round
//! to the next:
//!
//! * signal level: the matched-filter accumulators `z_i` and `Upsilon` of
//!   all rounds, so every round adds `N_R` virtual receive antennas,
//! * symbol level: the final filter outputs of earlier rounds, merged by a
//!   vector Gaussian demapper ([`symbol`]),
//! * LLR level: the final demapper extrinsics of earlier rounds, summed
//!   ([`llr`]).
//!
//! [`map`] holds the exhaustive MAP combiner used at desk scale.

pub mod complexity;
pub mod llr;
pub mod map;
pub mod signal;
pub mod symbol;
pub mod turbo;

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::CMatrix;
use crate::tx::Constellation;
use crate::{clip_llr, Error, Result};

pub use complexity::{complexity_estimate, ComplexityReport};
pub use llr::llr_level_combine;
pub use map::map_combine_oracle;
pub use signal::{compute_filters, mfb_genie, signal_level_iterate, FilterBank, SignalLevelState};
pub use symbol::{symbol_level_demap, symbol_level_equalize, RoundOutput, SymbolLevelState};
pub use turbo::{MapCombiner, MmseCombiner, TurboCombiner};

/// Receiver selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Receiver {
    Signal,
    Symbol,
    Llr,
    MapOracle,
}

impl Receiver {
    pub const ALL: [Receiver; 4] = [Receiver::Signal, Receiver::Symbol, Receiver::Llr, Receiver::MapOracle];

    pub fn name(self) -> &'static str {
        match self {
            Receiver::Signal => "signal",
            Receiver::Symbol => "symbol",
            Receiver::Llr => "llr",
            Receiver::MapOracle => "map-oracle",
        }
    }
}

impl fmt::Display for Receiver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Receiver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Receiver::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown combiner {s:?}")))
    }
}

/// Per-bit LLRs in interleaved order, bit `(m, t, i)` at `(i N_T + t) M + m`.
#[derive(Debug, Clone, PartialEq)]
pub struct LlrGrid {
    bits_per_symbol: usize,
    n_tx: usize,
    n_uses: usize,
    values: Vec<f64>,
}

impl LlrGrid {
    pub fn zeros(bits_per_symbol: usize, n_tx: usize, n_uses: usize) -> Self {
        LlrGrid {
            bits_per_symbol,
            n_tx,
            n_uses,
            values: vec![0.0; bits_per_symbol * n_tx * n_uses],
        }
    }

    pub fn from_vec(bits_per_symbol: usize, n_tx: usize, n_uses: usize, values: Vec<f64>) -> Result<Self> {
        let expected = bits_per_symbol * n_tx * n_uses;
        if values.len() != expected {
            return Err(Error::framing("LLR grid", expected, values.len()));
        }
        Ok(LlrGrid {
            bits_per_symbol,
            n_tx,
            n_uses,
            values,
        })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.bits_per_symbol, self.n_tx, self.n_uses)
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn n_tx(&self) -> usize {
        self.n_tx
    }

    pub fn n_uses(&self) -> usize {
        self.n_uses
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn index(&self, m: usize, t: usize, i: usize) -> usize {
        (i * self.n_tx + t) * self.bits_per_symbol + m
    }

    pub fn get(&self, m: usize, t: usize, i: usize) -> f64 {
        self.values[self.index(m, t, i)]
    }

    /// The `M` LLRs of the symbol on antenna `t` at time `i`.
    #[inline]
    pub fn symbol(&self, t: usize, i: usize) -> &[f64] {
        let start = self.index(0, t, i);
        &self.values[start..start + self.bits_per_symbol]
    }

    #[inline]
    pub fn symbol_mut(&mut self, t: usize, i: usize) -> &mut [f64] {
        let start = self.index(0, t, i);
        &mut self.values[start..start + self.bits_per_symbol]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn clip(&mut self) {
        for v in &mut self.values {
            *v = clip_llr(*v);
        }
    }
}

/// Soft symbol statistics derived from a-priori LLRs.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftStats {
    /// Conditional means, `N_T x T`.
    pub s_bar: CMatrix,
    /// Per-symbol conditional variances, `N_T x T`. These can exceed one for
    /// 16-QAM when the priors favour the corner points.
    pub var: nalgebra::DMatrix<f64>,
    /// Time-averaged variance per antenna, clamped to `[0, 1]`.
    pub sigma2_bar: Vec<f64>,
}

impl SoftStats {
    /// Diagonal of `Xi` for a window of `width` symbol periods.
    pub fn window_variances(&self, width: usize) -> Vec<f64> {
        let mut v = Vec::with_capacity(width * self.sigma2_bar.len());
        for _ in 0..width {
            v.extend_from_slice(&self.sigma2_bar);
        }
        v
    }
}

/// Symbol means and variances from bit priors.
pub fn soft_stats(apriori: &LlrGrid, constellation: &Constellation) -> SoftStats {
    let (m, n_tx, n_uses) = apriori.shape();
    assert_eq!(m, constellation.bits_per_symbol());
    let q = constellation.size();
    let mut s_bar = CMatrix::zeros(n_tx, n_uses);
    let mut var = nalgebra::DMatrix::zeros(n_tx, n_uses);
    let mut sigma2_bar = vec![0.0; n_tx];
    let mut p1 = vec![0.0; m];
    for i in 0..n_uses {
        for t in 0..n_tx {
            for (b, &l) in apriori.symbol(t, i).iter().enumerate() {
                p1[b] = 1.0 / (1.0 + (-l).exp());
            }
            let mut mean = Complex64::new(0.0, 0.0);
            let mut energy = 0.0;
            for label in 0..q {
                let mut p = 1.0;
                for (b, &pb) in p1.iter().enumerate() {
                    p *= if constellation.bit(label, b) == 1 { pb } else { 1.0 - pb };
                }
                let s = constellation.point(label);
                mean += s * p;
                energy += s.norm_sqr() * p;
            }
            let v = (energy - mean.norm_sqr()).max(0.0);
            s_bar[(t, i)] = mean;
            var[(t, i)] = v;
            sigma2_bar[t] += v;
        }
    }
    for s in &mut sigma2_bar {
        *s = (*s / n_uses as f64).clamp(0.0, 1.0);
    }
    SoftStats {
        s_bar,
        var,
        sigma2_bar,
    }
}

/// Sliding-window lengths: `kappa1` future and `kappa2` past observations
/// around the current channel use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub kappa1: usize,
    pub kappa2: usize,
}

impl Window {
    pub fn new(kappa1: usize, kappa2: usize) -> Self {
        Window { kappa1, kappa2 }
    }

    /// Symmetric window of odd total length `kappa`.
    pub fn symmetric(kappa: usize) -> Result<Self> {
        if kappa == 0 || kappa % 2 == 0 {
            return Err(Error::Config(format!("window length {kappa} must be odd")));
        }
        Ok(Window::new(kappa / 2, kappa / 2))
    }

    /// 9 for up to two transmit antennas, 13 above.
    pub fn default_for(n_tx: usize) -> Self {
        if n_tx <= 2 {
            Window::new(4, 4)
        } else {
            Window::new(6, 6)
        }
    }

    pub fn kappa(&self) -> usize {
        self.kappa1 + self.kappa2 + 1
    }

    /// Number of symbol periods spanned by the window symbol vector.
    pub fn width(&self, n_taps: usize) -> usize {
        self.kappa() + n_taps - 1
    }

    /// Position of `s_{t,i}` in the window symbol vector.
    pub fn own_column(&self, n_tx: usize, t: usize) -> usize {
        self.kappa1 * n_tx + t
    }
}

/// One Gaussian observation `xi = alpha s + w`, `w ~ CN(0, delta2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub xi: Complex64,
    pub alpha: f64,
    pub delta2: f64,
}

/// Floor on the demapper noise variance.
pub const DELTA2_FLOOR: f64 = 1e-12;

/// Extrinsic LLRs of the bits of one symbol given independent Gaussian
/// observations of it and the bit priors. Written into `out` unclipped.
pub fn demap_symbol(obs: &[Observation], prior: &[f64], constellation: &Constellation, out: &mut [f64]) {
    let m = constellation.bits_per_symbol();
    let q = constellation.size();
    let mut total = [0.0f64; 16];
    for (label, slot) in total.iter_mut().enumerate().take(q) {
        let s = constellation.point(label);
        let mut e = 0.0;
        for o in obs {
            e -= (o.xi - s * o.alpha).norm_sqr() / o.delta2.max(DELTA2_FLOOR);
        }
        for (b, &l) in prior.iter().enumerate() {
            if constellation.bit(label, b) == 1 {
                e += l;
            }
        }
        *slot = e;
    }
    for (b, o) in out.iter_mut().enumerate().take(m) {
        let mut max1 = f64::NEG_INFINITY;
        let mut max0 = f64::NEG_INFINITY;
        for (label, &e) in total.iter().enumerate().take(q) {
            if constellation.bit(label, b) == 1 {
                max1 = max1.max(e);
            } else {
                max0 = max0.max(e);
            }
        }
        let mut s1 = 0.0;
        let mut s0 = 0.0;
        for (label, &e) in total.iter().enumerate().take(q) {
            if constellation.bit(label, b) == 1 {
                s1 += (e - max1).exp();
            } else {
                s0 += (e - max0).exp();
            }
        }
        *o = (max1 + s1.ln()) - (max0 + s0.ln()) - prior[b];
    }
}

/// Single-observation demapping of a whole frame of filter outputs.
pub fn demap_frame(
    xi: &CMatrix,
    alpha: &[f64],
    delta2: &[f64],
    apriori: &LlrGrid,
    constellation: &Constellation,
) -> LlrGrid {
    let (m, n_tx, n_uses) = apriori.shape();
    let mut out = LlrGrid::zeros(m, n_tx, n_uses);
    for i in 0..n_uses {
        for t in 0..n_tx {
            let obs = [Observation {
                xi: xi[(t, i)],
                alpha: alpha[t],
                delta2: delta2[t],
            }];
            demap_symbol(&obs, apriori.symbol(t, i), constellation, out.symbol_mut(t, i));
        }
    }
    out.clip();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{enumerate_demap, enumerate_soft_symbol};
    use crate::tx::Modulation;
    use proptest::prelude::*;

    #[test]
    fn zero_priors_give_zero_mean_unit_variance() {
        for modulation in [Modulation::Qpsk, Modulation::Qam16] {
            let c = modulation.constellation();
            let g = LlrGrid::zeros(c.bits_per_symbol(), 2, 5);
            let s = soft_stats(&g, &c);
            assert!(s.s_bar.iter().all(|x| x.norm() < 1e-15));
            for v in &s.sigma2_bar {
                assert!((v - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn certain_priors_give_the_point() {
        let c = Modulation::Qam16.constellation();
        let mut g = LlrGrid::zeros(4, 1, 1);
        // label 1011
        g.symbol_mut(0, 0).copy_from_slice(&[30.0, -30.0, 30.0, 30.0]);
        let s = soft_stats(&g, &c);
        assert!((s.s_bar[(0, 0)] - c.point(0b1011)).norm() < 1e-12);
        assert!(s.var[(0, 0)] < 1e-11);
    }

    #[test]
    fn qpsk_soft_symbol_by_enumeration() {
        let c = Modulation::Qpsk.constellation();
        let mut g = LlrGrid::zeros(2, 1, 1);
        g.symbol_mut(0, 0).copy_from_slice(&[2.0, -1.0]);
        let s = soft_stats(&g, &c);
        let (mean, var) = enumerate_soft_symbol(&[2.0, -1.0], &c);
        assert!((s.s_bar[(0, 0)] - mean).norm() < 1e-14);
        assert!((s.var[(0, 0)] - var).abs() < 1e-14);
        // b1 likely 1 => negative real part, b2 likely 0 => positive imaginary
        assert!(mean.re < 0.0 && mean.im > 0.0);
    }

    #[test]
    fn symmetric_demap_input_gives_zero() {
        let c = Modulation::Qpsk.constellation();
        let mut out = [1.0; 2];
        let obs = [Observation {
            xi: Complex64::new(0.0, 0.0),
            alpha: 0.7,
            delta2: 0.21,
        }];
        demap_symbol(&obs, &[0.0, 0.0], &c, &mut out);
        assert!(out.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn qpsk_demap_matches_enumeration() {
        let c = Modulation::Qpsk.constellation();
        let xi = Complex64::new(0.9, 0.1) / 2f64.sqrt();
        let obs = [Observation {
            xi,
            alpha: 1.0,
            delta2: 0.5,
        }];
        let mut out = [0.0; 2];
        demap_symbol(&obs, &[0.0, 0.0], &c, &mut out);
        let want = enumerate_demap(&[(xi, 1.0, 0.5)], &[0.0, 0.0], &c);
        for (a, b) in out.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
        // Gray QPSK with zero priors separates per axis: 4 Re(xi)/(sqrt2 delta2) etc.
        let s = 2f64.sqrt();
        assert!((out[0] + 4.0 * xi.re / (s * 0.5)).abs() < 1e-12);
        assert!((out[1] + 4.0 * xi.im / (s * 0.5)).abs() < 1e-12);
    }

    #[test]
    fn window_defaults() {
        assert_eq!(Window::default_for(2).kappa(), 9);
        assert_eq!(Window::default_for(4).kappa(), 13);
        assert_eq!(Window::symmetric(5).unwrap(), Window::new(2, 2));
        assert!(Window::symmetric(4).is_err());
        assert_eq!(Window::new(4, 4).width(2), 10);
        assert_eq!(Window::new(4, 4).own_column(2, 1), 9);
    }

    #[test]
    fn receiver_names_round_trip() {
        for r in Receiver::ALL {
            assert_eq!(r.name().parse::<Receiver>().unwrap(), r);
        }
        assert!("mrc".parse::<Receiver>().is_err());
    }

    proptest! {
        #[test]
        fn demapper_matches_enumeration(
            qam in any::<bool>(),
            rounds in 1usize..4,
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let c = if qam { Modulation::Qam16 } else { Modulation::Qpsk }.constellation();
            let obs: Vec<Observation> = (0..rounds)
                .map(|_| {
                    let alpha: f64 = rng.random_range(0.05..1.0);
                    Observation {
                        xi: Complex64::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)),
                        alpha,
                        delta2: (1.0 - alpha) * alpha + 0.05,
                    }
                })
                .collect();
            let prior: Vec<f64> = (0..c.bits_per_symbol()).map(|_| rng.random_range(-4.0..4.0)).collect();
            let mut out = vec![0.0; c.bits_per_symbol()];
            demap_symbol(&obs, &prior, &c, &mut out);
            let tuples: Vec<_> = obs.iter().map(|o| (o.xi, o.alpha, o.delta2)).collect();
            let want = enumerate_demap(&tuples, &prior, &c);
            for (a, b) in out.iter().zip(&want) {
                prop_assert!((a - b).abs() < 1e-8 * (1.0 + b.abs()));
            }
        }
    }
}
