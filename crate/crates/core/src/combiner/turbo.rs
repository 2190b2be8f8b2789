//! Receiver state machines driven by the ARQ loop.
//!
//! A round starts with [`TurboCombiner::absorb`], runs one
//! [`TurboCombiner::iterate`] per turbo iteration and ends with
//! [`TurboCombiner::finish_round`], which commits the last iteration's
//! outputs for use in later rounds.

use super::llr::llr_level_combine;
use super::map::{check_map_size, map_combine_oracle};
use super::signal::SignalLevelState;
use super::symbol::{equalize, symbol_level_demap, RoundOutput, SymbolLevelState};
use super::{demap_frame, LlrGrid, Receiver, Window};
use crate::channel::{ChannelRealization, ReceivedFrame};
use crate::tx::Constellation;
use crate::{Error, Result};

pub trait TurboCombiner {
    fn absorb(&mut self, ch: &ChannelRealization, rx: &ReceivedFrame) -> Result<()>;

    /// Decoder-side input LLRs (interleaved order) for the given a-priori
    /// LLRs of the current iteration.
    fn iterate(&mut self, apriori: &LlrGrid) -> Result<LlrGrid>;

    fn finish_round(&mut self) -> Result<()>;

    /// Rounds absorbed so far.
    fn rounds(&self) -> usize;
}

/// The three MMSE receivers. All of them keep every kind of history, so a
/// state that has seen only one round can be switched to another kind: the
/// receivers coincide on the first round.
#[derive(Debug, Clone)]
pub struct MmseCombiner {
    kind: Receiver,
    constellation: Constellation,
    /// Signal level: all rounds; otherwise the current round only.
    state: SignalLevelState,
    sigma2: f64,
    symbols: SymbolLevelState,
    llrs: Vec<LlrGrid>,
    last: Option<(RoundOutput, LlrGrid)>,
    in_round: bool,
}

impl MmseCombiner {
    pub fn new(
        kind: Receiver,
        window: Window,
        constellation: Constellation,
        n_tx: usize,
        n_taps: usize,
        n_uses: usize,
    ) -> Result<Self> {
        if kind == Receiver::MapOracle {
            return Err(Error::Config("the MAP oracle is not an MMSE receiver".into()));
        }
        Ok(MmseCombiner {
            kind,
            constellation,
            state: SignalLevelState::new(window, n_tx, n_taps, n_uses),
            sigma2: 0.0,
            symbols: SymbolLevelState::new(),
            llrs: Vec::new(),
            last: None,
            in_round: false,
        })
    }

    pub fn kind(&self) -> Receiver {
        self.kind
    }

    pub fn state(&self) -> &SignalLevelState {
        &self.state
    }

    pub fn symbol_history(&self) -> &SymbolLevelState {
        &self.symbols
    }

    /// Copy of this receiver continuing as `kind`; allowed after at most one
    /// completed round.
    pub fn fork(&self, kind: Receiver) -> Result<Self> {
        if self.symbols.rounds() > 1 || self.in_round && self.symbols.rounds() > 0 {
            return Err(Error::Protocol("receivers only coincide up to the first round".into()));
        }
        let mut out = MmseCombiner::clone(self);
        if kind == Receiver::MapOracle {
            return Err(Error::Config("the MAP oracle is not an MMSE receiver".into()));
        }
        out.kind = kind;
        Ok(out)
    }

    fn single_demap(&self, out: &RoundOutput, apriori: &LlrGrid) -> LlrGrid {
        demap_frame(&out.xi, &out.alpha, &out.delta2, apriori, &self.constellation)
    }
}

impl TurboCombiner for MmseCombiner {
    fn absorb(&mut self, ch: &ChannelRealization, rx: &ReceivedFrame) -> Result<()> {
        if self.in_round {
            return Err(Error::Protocol("previous round was not finished".into()));
        }
        if self.kind != Receiver::Signal {
            self.state.reset();
        }
        self.state.accumulate_round(ch, rx)?;
        self.sigma2 = rx.noise_variance;
        self.in_round = true;
        self.last = None;
        Ok(())
    }

    fn iterate(&mut self, apriori: &LlrGrid) -> Result<LlrGrid> {
        if !self.in_round {
            return Err(Error::Protocol("no round in progress".into()));
        }
        let out = equalize(&self.state, apriori, self.sigma2, &self.constellation)?;
        let round = self.symbols.rounds() + 1;
        let ext = match self.kind {
            Receiver::Signal => self.single_demap(&out, apriori),
            Receiver::Symbol => symbol_level_demap(&self.symbols, &out, apriori, round, &self.constellation)?,
            Receiver::Llr => {
                let own = self.single_demap(&out, apriori);
                let mut all = self.llrs.clone();
                all.push(own);
                llr_level_combine(&all)?
            }
            Receiver::MapOracle => unreachable!(),
        };
        self.last = Some((out, apriori.clone()));
        Ok(ext)
    }

    fn finish_round(&mut self) -> Result<()> {
        let (out, apriori) = self
            .last
            .take()
            .ok_or_else(|| Error::Protocol("round finished without any iteration".into()))?;
        let own = self.single_demap(&out, &apriori);
        self.llrs.push(own);
        self.symbols.push(out);
        self.in_round = false;
        Ok(())
    }

    fn rounds(&self) -> usize {
        self.symbols.rounds() + usize::from(self.in_round)
    }
}

/// Exhaustive MAP receiver over all absorbed rounds.
#[derive(Debug, Clone)]
pub struct MapCombiner {
    constellation: Constellation,
    frames: Vec<ReceivedFrame>,
    channels: Vec<ChannelRealization>,
}

impl MapCombiner {
    pub fn new(constellation: Constellation, n_tx: usize, n_uses: usize) -> Result<Self> {
        check_map_size(&constellation, n_tx, n_uses)?;
        Ok(MapCombiner {
            constellation,
            frames: Vec::new(),
            channels: Vec::new(),
        })
    }
}

impl TurboCombiner for MapCombiner {
    fn absorb(&mut self, ch: &ChannelRealization, rx: &ReceivedFrame) -> Result<()> {
        self.frames.push(rx.clone());
        self.channels.push(ch.clone());
        Ok(())
    }

    fn iterate(&mut self, apriori: &LlrGrid) -> Result<LlrGrid> {
        map_combine_oracle(&self.frames, &self.channels, apriori, &self.constellation)
    }

    fn finish_round(&mut self) -> Result<()> {
        Ok(())
    }

    fn rounds(&self) -> usize {
        self.frames.len()
    }
}
