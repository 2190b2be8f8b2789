//! Chase ARQ driver: per-round turbo iterations between a combining
//! receiver and the SISO decoder, genie error detection, per-round BLER and
//! renewal-reward throughput.
//!
//! Every random draw of frame trial `q` comes from the counter-based streams
//! of [`crate::seeding`]: the data block from the payload lane and the
//! channel and noise of round `k` from lane `k`. All receivers and all SNR
//! points therefore see the same data, channels and unit-variance noise.

use log::info;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{sample_channel, transmit, ChannelDynamic, ChannelProfile, ChannelRealization, ReceivedFrame};
use crate::combiner::{mfb_genie, LlrGrid, MapCombiner, MmseCombiner, Receiver, SignalLevelState, TurboCombiner, Window};
use crate::decoder::SisoDecoder;
use crate::seeding::{lane_round, stream, LANE_PAYLOAD};
use crate::tx::{CodedFrame, Transmitter, TxConfig};
use crate::{clip_llr, db_to_linear, Error, Result};

/// Label used for the matched filter bound genie in result tables.
pub const MFB_LABEL: &str = "mfb";

#[derive(Debug, Clone, PartialEq)]
pub struct ArqConfig {
    /// Maximum number of rounds.
    pub k_max: usize,
    /// Turbo iterations per round.
    pub iterations: usize,
    pub receivers: Vec<Receiver>,
    pub tx: TxConfig,
    pub profile: ChannelProfile,
    pub window: Window,
    pub snr_grid_db: Vec<f64>,
    pub trials: u64,
    pub master_seed: u64,
}

impl ArqConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_max == 0 || self.iterations == 0 {
            return Err(Error::Config("K and N must be at least 1".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.receivers.contains(&Receiver::MapOracle) {
            crate::combiner::map::check_map_size(
                &self.tx.modulation.constellation(),
                self.tx.n_tx,
                self.tx.channel_uses,
            )?;
        }
        Ok(())
    }

    /// Noise variance for an SNR per receive antenna of `snr_db`.
    pub fn noise_variance(&self, snr_db: f64) -> f64 {
        self.tx.n_tx as f64 / db_to_linear(snr_db)
    }
}

/// Result of one frame under one receiver.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ArqOutcome {
    /// Verdict after each attempted round.
    pub decode_ok: Vec<bool>,
    pub rounds_used: usize,
    pub delivered: bool,
}

impl ArqOutcome {
    /// Whether the frame is still undecoded after round `k`.
    pub fn failed_after(&self, k: usize) -> bool {
        !(self.delivered && self.rounds_used <= k)
    }
}

/// Channel and received frame of one round.
struct Round {
    ch: ChannelRealization,
    rx: ReceivedFrame,
}

/// One frame trial: data, coded frame and lazily drawn rounds.
struct Trial<'a> {
    sim: &'a ArqSimulator,
    trial: u64,
    sigma2: f64,
    frame: CodedFrame,
    rounds: Vec<Round>,
}

impl Trial<'_> {
    fn round(&mut self, k: usize) -> Result<&Round> {
        while self.rounds.len() < k {
            let j = self.rounds.len() + 1;
            let cfg = &self.sim.cfg;
            let mut rng = stream(cfg.master_seed, self.trial, lane_round(j));
            let mut ch = sample_channel(&cfg.profile, cfg.tx.n_tx, cfg.tx.n_rx, j, &mut rng);
            if cfg.profile.dynamic == ChannelDynamic::LongTermStatic && j > 1 {
                ch = ChannelRealization::new(self.rounds[0].ch.taps.clone(), j)?;
            }
            let rx = transmit(&self.frame.symbols, &ch, self.sigma2, &mut rng)?;
            self.rounds.push(Round { ch, rx });
        }
        Ok(&self.rounds[k - 1])
    }
}

/// Transmitter and decoder tables shared by all trials of a configuration.
#[derive(Debug, Clone)]
pub struct ArqSimulator {
    cfg: ArqConfig,
    tx: Transmitter,
    decoder: SisoDecoder,
}

impl ArqSimulator {
    pub fn new(cfg: ArqConfig) -> Result<Self> {
        cfg.validate()?;
        let tx = Transmitter::new(cfg.tx.clone())?;
        let decoder = SisoDecoder::new(&cfg.tx.code);
        Ok(ArqSimulator { cfg, tx, decoder })
    }

    pub fn config(&self) -> &ArqConfig {
        &self.cfg
    }

    fn start(&self, snr_db: f64, trial: u64) -> Result<Trial<'_>> {
        let mut rng = stream(self.cfg.master_seed, trial, LANE_PAYLOAD);
        let data: Vec<u8> = (0..self.cfg.tx.data_bits()).map(|_| rng.random_range(0..2u8)).collect();
        Ok(Trial {
            sim: self,
            trial,
            sigma2: self.cfg.noise_variance(snr_db),
            frame: self.tx.encode(&data)?,
            rounds: Vec::new(),
        })
    }

    fn zero_prior(&self) -> LlrGrid {
        LlrGrid::zeros(self.cfg.tx.bits_per_symbol(), self.cfg.tx.n_tx, self.cfg.tx.channel_uses)
    }

    fn mmse(&self, kind: Receiver) -> Result<MmseCombiner> {
        let t = &self.cfg.tx;
        MmseCombiner::new(
            kind,
            self.cfg.window,
            t.modulation.constellation(),
            t.n_tx,
            self.cfg.profile.taps(),
            t.channel_uses,
        )
    }

    /// Runs the turbo iterations of one absorbed round; `prior` carries the
    /// decoder extrinsics (interleaved order) in and out.
    fn turbo_round(
        &self,
        comb: &mut dyn TurboCombiner,
        decoder: &mut SisoDecoder,
        prior: &mut LlrGrid,
        truth: &[u8],
    ) -> Result<bool> {
        let il = self.tx.interleaver();
        let mut ok = false;
        for _ in 0..self.cfg.iterations {
            let ext = comb.iterate(prior)?;
            let io = decoder.decode(&il.deinterleave(ext.values()))?;
            let e: Vec<f64> = io.extrinsic_coded.iter().map(|&x| clip_llr(x)).collect();
            let (m, n_tx, n_uses) = prior.shape();
            *prior = LlrGrid::from_vec(m, n_tx, n_uses, il.interleave(&e))?;
            ok = io.decisions() == truth;
        }
        comb.finish_round()?;
        Ok(ok)
    }

    /// Continues an ARQ process from round `from` until ACK or `K`.
    fn continue_arq(
        &self,
        trial: &mut Trial<'_>,
        comb: &mut dyn TurboCombiner,
        prior: &mut LlrGrid,
        mut outcome: ArqOutcome,
        from: usize,
    ) -> Result<ArqOutcome> {
        let mut decoder = self.decoder.clone();
        for k in from..=self.cfg.k_max {
            let round = trial.round(k)?;
            comb.absorb(&round.ch, &round.rx)?;
            let truth = trial.frame.info_bits.clone();
            let ok = self.turbo_round(comb, &mut decoder, prior, &truth)?;
            outcome.decode_ok.push(ok);
            outcome.rounds_used = k;
            if ok {
                outcome.delivered = true;
                break;
            }
        }
        Ok(outcome)
    }

    fn fresh_outcome() -> ArqOutcome {
        ArqOutcome {
            decode_ok: Vec::new(),
            rounds_used: 0,
            delivered: false,
        }
    }

    /// One frame under one receiver.
    pub fn run_frame(&self, receiver: Receiver, snr_db: f64, trial: u64) -> Result<ArqOutcome> {
        let mut tr = self.start(snr_db, trial)?;
        let mut prior = self.zero_prior();
        let mut comb: Box<dyn TurboCombiner> = match receiver {
            Receiver::MapOracle => {
                let t = &self.cfg.tx;
                Box::new(MapCombiner::new(t.modulation.constellation(), t.n_tx, t.channel_uses)?)
            }
            kind => Box::new(self.mmse(kind)?),
        };
        self.continue_arq(&mut tr, comb.as_mut(), &mut prior, Self::fresh_outcome(), 1)
    }

    /// Matched filter bound genie: true interfering symbols cancelled, MRC
    /// over all branches, one decoding pass per round.
    pub fn run_mfb(&self, snr_db: f64, trial: u64) -> Result<ArqOutcome> {
        let mut tr = self.start(snr_db, trial)?;
        self.mfb_from(&mut tr)
    }

    fn mfb_from(&self, tr: &mut Trial<'_>) -> Result<ArqOutcome> {
        let t = &self.cfg.tx;
        let constellation = t.modulation.constellation();
        let mut state = SignalLevelState::new(self.cfg.window, t.n_tx, self.cfg.profile.taps(), t.channel_uses);
        let mut decoder = self.decoder.clone();
        let mut outcome = Self::fresh_outcome();
        for k in 1..=self.cfg.k_max {
            let round = tr.round(k)?;
            state.accumulate_round(&round.ch, &round.rx)?;
            let (ext, _) = mfb_genie(&state, &tr.frame.symbols, tr.sigma2, &constellation)?;
            let io = decoder.decode(&self.tx.interleaver().deinterleave(ext.values()))?;
            let ok = io.decisions() == tr.frame.info_bits;
            outcome.decode_ok.push(ok);
            outcome.rounds_used = k;
            if ok {
                outcome.delivered = true;
                break;
            }
        }
        Ok(outcome)
    }

    /// One frame under every receiver of the configuration (in order),
    /// followed by the genie when `include_mfb` is set. The MMSE receivers
    /// share their common first round.
    pub fn run_frame_paired(&self, snr_db: f64, trial: u64, include_mfb: bool) -> Result<Vec<ArqOutcome>> {
        let mut tr = self.start(snr_db, trial)?;
        let receivers = &self.cfg.receivers;
        let mut out = vec![None; receivers.len()];
        let mmse: Vec<usize> = (0..receivers.len())
            .filter(|&j| receivers[j] != Receiver::MapOracle)
            .collect();
        if !mmse.is_empty() {
            let mut first = self.mmse(Receiver::Signal)?;
            let mut prior = self.zero_prior();
            let after_one = self.continue_arq_one(&mut tr, &mut first, &mut prior)?;
            for &j in &mmse {
                let o = if after_one.delivered || self.cfg.k_max == 1 {
                    after_one.clone()
                } else {
                    let mut comb = first.fork(receivers[j])?;
                    let mut p = prior.clone();
                    self.continue_arq(&mut tr, &mut comb, &mut p, after_one.clone(), 2)?
                };
                out[j] = Some(o);
            }
        }
        for (j, r) in receivers.iter().enumerate() {
            if *r == Receiver::MapOracle {
                let t = &self.cfg.tx;
                let mut comb = MapCombiner::new(t.modulation.constellation(), t.n_tx, t.channel_uses)?;
                let mut prior = self.zero_prior();
                out[j] = Some(self.continue_arq(&mut tr, &mut comb, &mut prior, Self::fresh_outcome(), 1)?);
            }
        }
        let mut out: Vec<ArqOutcome> = out.into_iter().map(|o| o.expect("every receiver ran")).collect();
        if include_mfb {
            out.push(self.mfb_from(&mut tr)?);
        }
        Ok(out)
    }

    fn continue_arq_one(
        &self,
        tr: &mut Trial<'_>,
        comb: &mut MmseCombiner,
        prior: &mut LlrGrid,
    ) -> Result<ArqOutcome> {
        let mut decoder = self.decoder.clone();
        let round = tr.round(1)?;
        comb.absorb(&round.ch, &round.rx)?;
        let truth = tr.frame.info_bits.clone();
        let ok = self.turbo_round(comb, &mut decoder, prior, &truth)?;
        Ok(ArqOutcome {
            decode_ok: vec![ok],
            rounds_used: 1,
            delivered: ok,
        })
    }

    /// Outcomes of trials `0..trials` at one SNR, indexed `[trial][receiver]`.
    pub fn paired_outcomes(&self, snr_db: f64, include_mfb: bool) -> Result<Vec<Vec<ArqOutcome>>> {
        (0..self.cfg.trials)
            .into_par_iter()
            .map(|q| self.run_frame_paired(snr_db, q, include_mfb))
            .collect()
    }

    /// Labels matching the columns of [`Self::paired_outcomes`].
    pub fn labels(&self, include_mfb: bool) -> Vec<String> {
        let mut l: Vec<String> = self.cfg.receivers.iter().map(|r| r.name().to_string()).collect();
        if include_mfb {
            l.push(MFB_LABEL.to_string());
        }
        l
    }
}

/// Integer tallies of a set of frames under one receiver.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ArqTally {
    pub frames: u64,
    /// Frames still undecoded after round `k`, at index `k - 1`.
    pub failed_after: Vec<u64>,
    pub delivered: u64,
    pub rounds: u64,
}

impl ArqTally {
    pub fn new(k_max: usize) -> Self {
        ArqTally {
            frames: 0,
            failed_after: vec![0; k_max],
            delivered: 0,
            rounds: 0,
        }
    }

    pub fn add(&mut self, o: &ArqOutcome) {
        self.frames += 1;
        for (k, f) in self.failed_after.iter_mut().enumerate() {
            *f += u64::from(o.failed_after(k + 1));
        }
        self.delivered += u64::from(o.delivered);
        self.rounds += o.rounds_used as u64;
    }

    pub fn merge(&mut self, other: &ArqTally) {
        self.frames += other.frames;
        for (a, b) in self.failed_after.iter_mut().zip(&other.failed_after) {
            *a += b;
        }
        self.delivered += other.delivered;
        self.rounds += other.rounds;
    }

    pub fn bler(&self, k: usize) -> f64 {
        self.failed_after[k - 1] as f64 / self.frames as f64
    }

    pub fn bler_std_err(&self, k: usize) -> f64 {
        let p = self.bler(k);
        (p * (1.0 - p) / self.frames as f64).sqrt()
    }

    /// Renewal-reward throughput `R * delivered / rounds`.
    pub fn throughput(&self, rate: f64) -> f64 {
        if self.rounds == 0 {
            0.0
        } else {
            rate * self.delivered as f64 / self.rounds as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlerPoint {
    pub snr_db: f64,
    pub round: usize,
    pub receiver: String,
    pub frames: u64,
    pub failures: u64,
    pub bler: f64,
    pub std_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThroughputPoint {
    pub snr_db: f64,
    pub receiver: String,
    pub frames: u64,
    pub delivered: u64,
    pub rounds: u64,
    pub throughput: f64,
}

/// Tallies per SNR point and per receiver column.
pub fn simulate(sim: &ArqSimulator, include_mfb: bool) -> Result<Vec<(f64, Vec<ArqTally>)>> {
    let cfg = sim.config();
    let cols = sim.labels(include_mfb).len();
    cfg.snr_grid_db
        .iter()
        .map(|&snr| {
            let outcomes = sim.paired_outcomes(snr, include_mfb)?;
            let mut tallies = vec![ArqTally::new(cfg.k_max); cols];
            for row in &outcomes {
                for (t, o) in tallies.iter_mut().zip(row) {
                    t.add(o);
                }
            }
            info!(
                "snr {snr} dB: {} frames, final-round failures {:?}",
                cfg.trials,
                tallies.iter().map(|t| t.failed_after[cfg.k_max - 1]).collect::<Vec<_>>()
            );
            Ok((snr, tallies))
        })
        .collect()
}

fn bler_points(sim: &ArqSimulator, include_mfb: bool, only_mfb: bool) -> Result<Vec<BlerPoint>> {
    let labels = sim.labels(include_mfb);
    let mut out = Vec::new();
    for (snr, tallies) in simulate(sim, include_mfb)? {
        for (label, t) in labels.iter().zip(&tallies) {
            if only_mfb && label != MFB_LABEL {
                continue;
            }
            for k in 1..=sim.config().k_max {
                out.push(BlerPoint {
                    snr_db: snr,
                    round: k,
                    receiver: label.clone(),
                    frames: t.frames,
                    failures: t.failed_after[k - 1],
                    bler: t.bler(k),
                    std_err: t.bler_std_err(k),
                });
            }
        }
    }
    Ok(out)
}

/// Cumulative BLER per round for every configured receiver.
pub fn bler_curve(cfg: &ArqConfig) -> Result<Vec<BlerPoint>> {
    bler_points(&ArqSimulator::new(cfg.clone())?, false, false)
}

/// Per-round BLER of the matched filter bound genie.
pub fn mfb_reference(cfg: &ArqConfig) -> Result<Vec<BlerPoint>> {
    let mut c = cfg.clone();
    c.receivers.clear();
    bler_points(&ArqSimulator::new(c)?, true, true)
}

pub fn throughput_curve(cfg: &ArqConfig) -> Result<Vec<ThroughputPoint>> {
    let sim = ArqSimulator::new(cfg.clone())?;
    let labels = sim.labels(false);
    let rate = cfg.tx.rate();
    let mut out = Vec::new();
    for (snr, tallies) in simulate(&sim, false)? {
        for (label, t) in labels.iter().zip(&tallies) {
            out.push(ThroughputPoint {
                snr_db: snr,
                receiver: label.clone(),
                frames: t.frames,
                delivered: t.delivered,
                rounds: t.rounds,
                throughput: t.throughput(rate),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tx::{ConvCode, Modulation};

    fn small_config(k_max: usize, receivers: Vec<Receiver>) -> ArqConfig {
        ArqConfig {
            k_max,
            iterations: 2,
            receivers,
            tx: TxConfig::new(2, 2, Modulation::Qpsk, ConvCode::standard_64_state(), 200, 3).unwrap(),
            profile: ChannelProfile::uniform(2, ChannelDynamic::ShortTermStatic).unwrap(),
            window: Window::new(2, 2),
            snr_grid_db: vec![4.0],
            trials: 6,
            master_seed: 17,
        }
    }

    #[test]
    fn noiseless_frames_ack_in_round_one() {
        let sim = ArqSimulator::new(small_config(2, vec![Receiver::Signal, Receiver::Symbol, Receiver::Llr])).unwrap();
        for q in 0..3 {
            for o in sim.run_frame_paired(80.0, q, true).unwrap() {
                assert_eq!((o.rounds_used, o.delivered), (1, true));
            }
        }
    }

    #[test]
    fn repeated_runs_are_identical() {
        let sim = ArqSimulator::new(small_config(2, vec![Receiver::Signal, Receiver::Llr])).unwrap();
        let a = sim.run_frame_paired(2.0, 4, true).unwrap();
        let b = sim.run_frame_paired(2.0, 4, true).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn shared_first_round_matches_independent_runs() {
        let receivers = vec![Receiver::Signal, Receiver::Symbol, Receiver::Llr];
        let sim = ArqSimulator::new(small_config(3, receivers.clone())).unwrap();
        for q in 0..4 {
            let paired = sim.run_frame_paired(1.0, q, false).unwrap();
            for (r, o) in receivers.iter().zip(&paired) {
                assert_eq!(&sim.run_frame(*r, 1.0, q).unwrap(), o);
            }
        }
    }

    #[test]
    fn tally_bookkeeping() {
        let mut t = ArqTally::new(2);
        t.add(&ArqOutcome {
            decode_ok: vec![false, true],
            rounds_used: 2,
            delivered: true,
        });
        t.add(&ArqOutcome {
            decode_ok: vec![false, false],
            rounds_used: 2,
            delivered: false,
        });
        t.add(&ArqOutcome {
            decode_ok: vec![true],
            rounds_used: 1,
            delivered: true,
        });
        assert_eq!(t.failed_after, vec![2, 1]);
        assert_eq!((t.delivered, t.rounds), (2, 5));
        assert!((t.throughput(2.0) - 0.8).abs() < 1e-15);
        // throughput times mean rounds per frame equals R times delivery ratio
        let lhs = t.throughput(2.0) * t.rounds as f64 / t.frames as f64;
        assert!((lhs - 2.0 * t.delivered as f64 / t.frames as f64).abs() < 1e-15);
    }

    #[test]
    fn map_receiver_refused_at_full_frame_size() {
        let mut cfg = small_config(1, vec![Receiver::MapOracle]);
        cfg.tx = TxConfig::new(2, 2, Modulation::Qpsk, ConvCode::standard_64_state(), 1800, 3).unwrap();
        assert!(matches!(ArqSimulator::new(cfg), Err(Error::TooLarge { .. })));
    }
}
