//! Oracle-equivalence checks shared by the `selftest` subcommand and the
//! acceptance suite.

use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{sample_channel, transmit, ChannelDynamic, ChannelProfile};
use crate::combiner::{
    compute_filters, demap_symbol, mfb_genie, soft_stats, LlrGrid, MmseCombiner, Observation, Receiver,
    SignalLevelState, TurboCombiner, Window,
};
use crate::decoder::SisoDecoder;
use crate::linalg::{rel_err, CMatrix};
use crate::oracle;
use crate::tx::{ConvCode, Modulation, Transmitter, TxConfig};
use crate::{clip_llr, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed error.
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: worst {:.3e} (tolerance {:.0e}) {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.worst,
            self.tolerance,
            self.detail
        )
    }
}

fn report(name: &'static str, worst: f64, tolerance: f64, detail: String) -> CheckReport {
    CheckReport {
        name,
        passed: worst < tolerance,
        worst,
        tolerance,
        detail,
    }
}

fn random_symbols(rng: &mut ChaCha8Rng, n_tx: usize, n_uses: usize) -> CMatrix {
    let c = Modulation::Qpsk.constellation();
    CMatrix::from_fn(n_tx, n_uses, |_, _| c.point(rng.random_range(0..4)))
}

/// Filter outputs from the accumulators against the dense direct form, and
/// the accumulators against explicit stacking.
pub fn filter_equivalence(instances: usize, seed: u64) -> Result<(CheckReport, CheckReport)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = Modulation::Qpsk.constellation();
    let profile = ChannelProfile::uniform(2, ChannelDynamic::ShortTermStatic)?;
    let mut worst_filter: f64 = 0.0;
    let mut worst_stack: f64 = 0.0;
    for _ in 0..instances {
        let n_tx = rng.random_range(1..=2);
        let n_rx = rng.random_range(1..=2);
        let kappa = [1, 3, 5][rng.random_range(0..3)];
        let kappa1 = rng.random_range(0..kappa);
        let window = Window::new(kappa1, kappa - 1 - kappa1);
        let rounds = rng.random_range(1..=2);
        let n_uses = rng.random_range(4..=10);
        let sigma2 = rng.random_range(0.05..2.0);
        let s = random_symbols(&mut rng, n_tx, n_uses);
        let mut state = SignalLevelState::new(window, n_tx, 2, n_uses);
        let mut chans = Vec::new();
        let mut frames = Vec::new();
        for k in 1..=rounds {
            let ch = sample_channel(&profile, n_tx, n_rx, k, &mut rng);
            let rx = transmit(&s, &ch, sigma2, &mut rng)?;
            state.accumulate_round(&ch, &rx)?;
            chans.push(ch);
            frames.push(rx);
        }
        let width = window.width(2);
        let h = oracle::stacked_window_matrix(&chans, window.kappa1, window.kappa2);
        worst_stack = worst_stack.max(rel_err(state.upsilon(), &(h.adjoint() * &h)));
        let mut ymat = CMatrix::zeros(h.nrows(), n_uses);
        for i in 0..n_uses {
            ymat.set_column(i, &oracle::stacked_window_observation(&frames, window.kappa1, window.kappa2, i));
        }
        worst_stack = worst_stack.max(rel_err(state.z(), &(h.adjoint() * ymat)));

        let m = 2;
        let vals = (0..m * n_tx * n_uses).map(|_| rng.random_range(-4.0..4.0)).collect();
        let prior = LlrGrid::from_vec(m, n_tx, n_uses, vals)?;
        let stats = soft_stats(&prior, &c);
        let bank = compute_filters(&state, &stats, sigma2)?;
        let xi = bank.apply(&state, &stats);
        let var = stats.window_variances(width);
        let mut direct = CMatrix::zeros(n_tx, n_uses);
        let mut alpha_err: f64 = 0.0;
        for i in 0..n_uses {
            let y = oracle::stacked_window_observation(&frames, window.kappa1, window.kappa2, i);
            let sb = oracle::window_symbols(&stats.s_bar, window.kappa1, width, i);
            for t in 0..n_tx {
                let (x, a) = oracle::direct_filter_output(&h, &y, &sb, &var, sigma2, window.own_column(n_tx, t));
                direct[(t, i)] = x;
                alpha_err = alpha_err.max((a - bank.alpha[t]).abs() / a);
            }
        }
        worst_filter = worst_filter.max(rel_err(&xi, &direct)).max(alpha_err);
    }
    Ok((
        report(
            "forward/backward filters vs direct MMSE",
            worst_filter,
            1e-10,
            format!("{instances} instances"),
        ),
        report(
            "recursive accumulation vs explicit stacking",
            worst_stack,
            1e-12,
            format!("{instances} instances"),
        ),
    ))
}

/// Extrinsic grids of the three MMSE receivers on first-round frames,
/// across `iterations` turbo iterations with a shared decoder.
pub fn receiver_equivalence(frames: usize, iterations: usize, seed: u64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = TxConfig::new(2, 2, Modulation::Qpsk, ConvCode::standard_64_state(), 400, seed)?;
    let tx = Transmitter::new(cfg.clone())?;
    let profile = ChannelProfile::uniform(2, ChannelDynamic::ShortTermStatic)?;
    let mut worst: f64 = 0.0;
    for _ in 0..frames {
        let data: Vec<u8> = (0..cfg.data_bits()).map(|_| rng.random_range(0..2u8)).collect();
        let frame = tx.encode(&data)?;
        let ch = sample_channel(&profile, 2, 2, 1, &mut rng);
        let sigma2 = 2.0 / 10f64.powf(rng.random_range(0.0..0.8));
        let rx = transmit(&frame.symbols, &ch, sigma2, &mut rng)?;
        let mut combs: Vec<MmseCombiner> = [Receiver::Signal, Receiver::Symbol, Receiver::Llr]
            .into_iter()
            .map(|k| MmseCombiner::new(k, Window::new(4, 4), tx.constellation().clone(), 2, 2, cfg.channel_uses))
            .collect::<Result<_>>()?;
        for c in &mut combs {
            c.absorb(&ch, &rx)?;
        }
        let mut decoder = SisoDecoder::new(&cfg.code);
        let mut prior = LlrGrid::zeros(2, 2, cfg.channel_uses);
        for _ in 0..iterations {
            let grids: Vec<LlrGrid> = combs.iter_mut().map(|c| c.iterate(&prior)).collect::<Result<_>>()?;
            for g in &grids[1..] {
                for (a, b) in g.values().iter().zip(grids[0].values()) {
                    worst = worst.max((a - b).abs());
                }
            }
            let io = decoder.decode(&tx.interleaver().deinterleave(grids[0].values()))?;
            let e: Vec<f64> = io.extrinsic_coded.iter().map(|&x| clip_llr(x)).collect();
            prior = LlrGrid::from_vec(2, 2, cfg.channel_uses, tx.interleaver().interleave(&e))?;
        }
    }
    Ok(report(
        "first-round signal/symbol/LLR equivalence",
        worst,
        1e-9,
        format!("{frames} frames x {iterations} iterations"),
    ))
}

/// Log-MAP decoder against the exhaustive posterior over all data words.
pub fn bcjr_vs_exhaustive(vectors: usize, data_bits: usize, seed: u64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let code = ConvCode::standard_64_state();
    let mut decoder = SisoDecoder::new(&code);
    let n = (data_bits + code.memory()) * code.outputs();
    let mut worst: f64 = 0.0;
    for _ in 0..vectors {
        let lam: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let io = decoder.decode(&lam)?;
        let (info, _) = oracle::exhaustive_code_posterior(&code, data_bits, &lam);
        for (a, b) in io.app_info.iter().zip(&info) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(report(
        "log-MAP decoder vs exhaustive posterior",
        worst,
        1e-9,
        format!("{vectors} prior vectors, {data_bits} data bits"),
    ))
}

/// Genie post-filter SNR against the branch-sum MRC value.
pub fn mfb_snr(instances: usize, seed: u64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = Modulation::Qpsk.constellation();
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let n_tx = rng.random_range(1..=2);
        let n_rx = rng.random_range(1..=2);
        let taps = rng.random_range(1..=3);
        let profile = ChannelProfile::uniform(taps, ChannelDynamic::ShortTermStatic)?;
        let window = Window::default_for(n_tx);
        let n_uses = 16;
        let sigma2 = rng.random_range(0.05..2.0);
        let s = random_symbols(&mut rng, n_tx, n_uses);
        let mut state = SignalLevelState::new(window, n_tx, taps, n_uses);
        let mut branch = vec![0.0; n_tx];
        for k in 1..=2 {
            let ch = sample_channel(&profile, n_tx, n_rx, k, &mut rng);
            for tap in &ch.taps {
                for (t, b) in branch.iter_mut().enumerate() {
                    *b += tap.column(t).norm_squared();
                }
            }
            let rx = transmit(&s, &ch, sigma2, &mut rng)?;
            state.accumulate_round(&ch, &rx)?;
            let (_, alpha) = mfb_genie(&state, &s, sigma2, &c)?;
            // gamma / N_T with gamma = N_T / sigma2
            for t in 0..n_tx {
                let snr = alpha[t] / (1.0 - alpha[t]);
                let mrc = branch[t] / sigma2;
                worst = worst.max((snr - mrc).abs() / mrc);
            }
        }
    }
    Ok(report(
        "genie post-filter SNR vs MRC branch sum",
        worst,
        1e-8,
        format!("{instances} channels, rounds 1 and 2"),
    ))
}

/// Demapper against direct enumeration for random inputs.
pub fn demapper_vs_enumeration(instances: usize, seed: u64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for n in 0..instances {
        let c = if n % 2 == 0 { Modulation::Qpsk } else { Modulation::Qam16 }.constellation();
        let rounds = rng.random_range(1..=3);
        let obs: Vec<Observation> = (0..rounds)
            .map(|_| {
                let alpha: f64 = rng.random_range(0.1..0.95);
                Observation {
                    xi: Complex64::new(rng.random_range(-1.2..1.2), rng.random_range(-1.2..1.2)),
                    alpha,
                    delta2: (1.0 - alpha) * alpha,
                }
            })
            .collect();
        let prior: Vec<f64> = (0..c.bits_per_symbol()).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mut got = vec![0.0; c.bits_per_symbol()];
        demap_symbol(&obs, &prior, &c, &mut got);
        let tuples: Vec<_> = obs.iter().map(|o| (o.xi, o.alpha, o.delta2)).collect();
        let want = oracle::enumerate_demap(&tuples, &prior, &c);
        for (a, b) in got.iter().zip(&want) {
            worst = worst.max((a - b).abs() / (1.0 + b.abs()));
        }
    }
    Ok(report(
        "demapper vs constellation enumeration",
        worst,
        1e-9,
        format!("{instances} instances"),
    ))
}

/// The quick suite run by the `selftest` subcommand.
pub fn run_all(seed: u64) -> Result<Vec<CheckReport>> {
    let (filters, stacking) = filter_equivalence(100, seed)?;
    Ok(vec![
        filters,
        stacking,
        receiver_equivalence(4, 3, seed)?,
        bcjr_vs_exhaustive(5, 12, seed)?,
        mfb_snr(50, seed)?,
        demapper_vs_enumeration(200, seed)?,
    ])
}
