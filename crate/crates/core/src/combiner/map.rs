//! Exhaustive MAP combining over all rounds, for desk-scale instances.

use num_complex::Complex64;

use super::LlrGrid;
use crate::channel::{ChannelRealization, ReceivedFrame};
use crate::linalg::CMatrix;
use crate::tx::Constellation;
use crate::{clip_llr, Error, Result};

/// Largest number of symbol-matrix hypotheses the oracle will enumerate.
pub const MAP_HYPOTHESIS_BOUND: u64 = 1 << 16;

pub fn map_hypotheses(constellation: &Constellation, n_tx: usize, n_uses: usize) -> f64 {
    (constellation.size() as f64).powi((n_tx * n_uses) as i32)
}

pub fn check_map_size(constellation: &Constellation, n_tx: usize, n_uses: usize) -> Result<()> {
    let h = map_hypotheses(constellation, n_tx, n_uses);
    if h > MAP_HYPOTHESIS_BOUND as f64 {
        return Err(Error::TooLarge {
            hypotheses: h,
            bound: MAP_HYPOTHESIS_BOUND,
        });
    }
    Ok(())
}

/// Extrinsic LLRs of every bit of the frame given all received rounds, by
/// enumerating every symbol matrix and scoring it against the full
/// zero-padded received frames.
pub fn map_combine_oracle(
    frames: &[ReceivedFrame],
    channels: &[ChannelRealization],
    apriori: &LlrGrid,
    constellation: &Constellation,
) -> Result<LlrGrid> {
    let (m, n_tx, n_uses) = apriori.shape();
    check_map_size(constellation, n_tx, n_uses)?;
    if frames.is_empty() || frames.len() != channels.len() {
        return Err(Error::Protocol(format!(
            "{} received frames for {} channel realizations",
            frames.len(),
            channels.len()
        )));
    }
    for (f, ch) in frames.iter().zip(channels) {
        if ch.n_tx() != n_tx || f.len() != n_uses + ch.n_taps() - 1 || f.samples.nrows() != ch.n_rx() {
            return Err(Error::Model("round dimensions do not match the LLR grid".into()));
        }
        if !(f.noise_variance > 0.0) {
            return Err(Error::Model("exhaustive combining needs a positive noise variance".into()));
        }
    }
    let q = constellation.size();
    let n_sym = n_tx * n_uses;
    let n_bits = m * n_sym;
    let count = q.pow(n_sym as u32);
    let mut totals = Vec::with_capacity(count);
    let mut s = CMatrix::zeros(n_tx, n_uses);
    let mut labels = vec![0usize; n_sym];
    for h in 0..count {
        let mut rest = h;
        let mut prior_term = 0.0;
        for (k, label) in labels.iter_mut().enumerate() {
            *label = rest % q;
            rest /= q;
            // symbol k sits at (t, i) = (k % n_tx, k / n_tx)
            let (t, i) = (k % n_tx, k / n_tx);
            s[(t, i)] = constellation.point(*label);
            for (b, &l) in apriori.symbol(t, i).iter().enumerate() {
                if constellation.bit(*label, b) == 1 {
                    prior_term += l;
                }
            }
        }
        let mut loglik = 0.0;
        for (f, ch) in frames.iter().zip(channels) {
            for i in 0..f.len() {
                for r in 0..ch.n_rx() {
                    let mut pred = Complex64::new(0.0, 0.0);
                    for (l, tap) in ch.taps.iter().enumerate() {
                        if i < l || i - l >= n_uses {
                            continue;
                        }
                        for t in 0..n_tx {
                            pred += tap[(r, t)] * s[(t, i - l)];
                        }
                    }
                    loglik -= (f.samples[(r, i)] - pred).norm_sqr() / f.noise_variance;
                }
            }
        }
        totals.push(loglik + prior_term);
    }

    let bit_of = |h: usize, p: usize| {
        let (k, b) = (p / m, p % m);
        let label = (h / q.pow(k as u32)) % q;
        constellation.bit(label, b) == 1
    };
    let mut max1 = vec![f64::NEG_INFINITY; n_bits];
    let mut max0 = vec![f64::NEG_INFINITY; n_bits];
    for (h, &x) in totals.iter().enumerate() {
        for p in 0..n_bits {
            if bit_of(h, p) {
                max1[p] = max1[p].max(x);
            } else {
                max0[p] = max0[p].max(x);
            }
        }
    }
    let mut sum1 = vec![0.0; n_bits];
    let mut sum0 = vec![0.0; n_bits];
    for (h, &x) in totals.iter().enumerate() {
        for p in 0..n_bits {
            if bit_of(h, p) {
                sum1[p] += (x - max1[p]).exp();
            } else {
                sum0[p] += (x - max0[p]).exp();
            }
        }
    }
    // bit p is bit (p % m) of symbol p / m, the same order as the grid
    let values = (0..n_bits)
        .map(|p| clip_llr((max1[p] + sum1[p].ln()) - (max0[p] + sum0[p].ln()) - apriori.values()[p]))
        .collect();
    LlrGrid::from_vec(m, n_tx, n_uses, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tx::Modulation;

    fn scalar_round(h: Complex64, y: Complex64, sigma2: f64) -> (ReceivedFrame, ChannelRealization) {
        let ch = ChannelRealization::new(vec![CMatrix::from_element(1, 1, h)], 1).unwrap();
        let rx = ReceivedFrame {
            samples: CMatrix::from_element(1, 1, y),
            noise_variance: sigma2,
        };
        (rx, ch)
    }

    #[test]
    fn single_qpsk_symbol_closed_form() {
        let c = Modulation::Qpsk.constellation();
        let h = Complex64::new(0.8, -0.3);
        let y = Complex64::new(0.2, 0.5);
        let sigma2 = 0.7;
        let (rx, ch) = scalar_round(h, y, sigma2);
        let g = map_combine_oracle(&[rx], &[ch], &LlrGrid::zeros(2, 1, 1), &c).unwrap();
        let lik = |label: usize| (-(y - h * c.point(label)).norm_sqr() / sigma2).exp();
        // b1 = 1 for labels 2, 3; b2 = 1 for labels 1, 3
        let b1 = ((lik(2) + lik(3)) / (lik(0) + lik(1))).ln();
        let b2 = ((lik(1) + lik(3)) / (lik(0) + lik(2))).ln();
        assert!((g.values()[0] - b1).abs() < 1e-12);
        assert!((g.values()[1] - b2).abs() < 1e-12);
    }

    #[test]
    fn oversized_instance_refused() {
        let c = Modulation::Qam16.constellation();
        let g = LlrGrid::zeros(4, 2, 3);
        match map_combine_oracle(&[], &[], &g, &c) {
            Err(Error::TooLarge { bound, .. }) => assert_eq!(bound, MAP_HYPOTHESIS_BOUND),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn high_snr_signs_follow_transmitted_bits() {
        use crate::channel::{sample_channel, transmit, ChannelDynamic, ChannelProfile};
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let c = Modulation::Qpsk.constellation();
        let p = ChannelProfile::uniform(2, ChannelDynamic::ShortTermStatic).unwrap();
        let bits: Vec<u8> = (0..12).map(|_| rng.random_range(0..2)).collect();
        let s = CMatrix::from_fn(2, 3, |t, i| {
            let k = (i * 2 + t) * 2;
            c.map(&bits[k..k + 2])
        });
        let ch = sample_channel(&p, 2, 2, 1, &mut rng);
        let rx = transmit(&s, &ch, 1e-3, &mut rng).unwrap();
        let g = map_combine_oracle(&[rx], &[ch], &LlrGrid::zeros(2, 2, 3), &c).unwrap();
        for (l, &b) in g.values().iter().zip(&bits) {
            assert_eq!(*l > 0.0, b == 1);
        }
    }
}
