//! Symbol-level combining: each round is equalized on its own and the
//! filter outputs of all rounds are merged by a vector Gaussian demapper
//! with a diagonal covariance.

use super::signal::{compute_filters, SignalLevelState};
use super::{soft_stats, LlrGrid, Observation, Window};
use crate::channel::{ChannelRealization, ReceivedFrame};
use crate::linalg::CMatrix;
use crate::tx::Constellation;
use crate::{Error, Result};

/// Filter outputs of one round: `xi` per `(t, i)`, `alpha` and `delta2`
/// per antenna (the filters are time-invariant).
#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutput {
    pub xi: CMatrix,
    pub alpha: Vec<f64>,
    pub delta2: Vec<f64>,
}

/// Final-iteration outputs of completed rounds, oldest first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SymbolLevelState {
    history: Vec<RoundOutput>,
}

impl SymbolLevelState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rounds(&self) -> usize {
        self.history.len()
    }

    pub fn history(&self) -> &[RoundOutput] {
        &self.history
    }

    pub fn push(&mut self, out: RoundOutput) {
        self.history.push(out);
    }
}

/// Equalizes a single round from scratch.
pub fn symbol_level_equalize(
    ch: &ChannelRealization,
    rx: &ReceivedFrame,
    apriori: &LlrGrid,
    window: Window,
    constellation: &Constellation,
) -> Result<RoundOutput> {
    let mut state = SignalLevelState::new(window, ch.n_tx(), ch.n_taps(), apriori.n_uses());
    state.accumulate_round(ch, rx)?;
    equalize(&state, apriori, rx.noise_variance, constellation)
}

pub(crate) fn equalize(
    state: &SignalLevelState,
    apriori: &LlrGrid,
    sigma2: f64,
    constellation: &Constellation,
) -> Result<RoundOutput> {
    let stats = soft_stats(apriori, constellation);
    let bank = compute_filters(state, &stats, sigma2)?;
    let xi = bank.apply(state, &stats);
    Ok(RoundOutput {
        xi,
        alpha: bank.alpha,
        delta2: bank.delta2,
    })
}

/// Extrinsic LLRs of round `round` (1-based) from the stored history and
/// the current round's outputs.
pub fn symbol_level_demap(
    state: &SymbolLevelState,
    current: &RoundOutput,
    apriori: &LlrGrid,
    round: usize,
    constellation: &Constellation,
) -> Result<LlrGrid> {
    if round == 0 || state.rounds() != round - 1 {
        return Err(Error::Protocol(format!(
            "round {round} needs {} stored rounds, found {}",
            round.saturating_sub(1),
            state.rounds()
        )));
    }
    let (m, n_tx, n_uses) = apriori.shape();
    if current.xi.shape() != (n_tx, n_uses) || state.history.iter().any(|h| h.xi.shape() != (n_tx, n_uses)) {
        return Err(Error::Model("filter outputs do not match the LLR grid".into()));
    }
    let mut out = LlrGrid::zeros(m, n_tx, n_uses);
    let mut obs = Vec::with_capacity(round);
    for i in 0..n_uses {
        for t in 0..n_tx {
            obs.clear();
            for h in state.history.iter().chain(std::iter::once(current)) {
                obs.push(Observation {
                    xi: h.xi[(t, i)],
                    alpha: h.alpha[t],
                    delta2: h.delta2[t],
                });
            }
            super::demap_symbol(&obs, apriori.symbol(t, i), constellation, out.symbol_mut(t, i));
        }
    }
    out.clip();
    Ok(out)
}
