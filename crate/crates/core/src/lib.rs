//! Link-level Monte Carlo simulation of coded MIMO transmission over
//! frequency-selective (ISI) block-fading channels with Chase-type ARQ.
//!
//! The crate provides the full transmit chain (convolutional code, S-random
//! interleaver, Gray-mapped QPSK/16-QAM, spatial multiplexing with zero
//! padding), a block-fading MIMO-ISI channel, a log-MAP SISO decoder and four
//! turbo packet combining receivers:
//!
//! * signal-level combining, where every ARQ round adds `N_R` virtual receive
//!   antennas to a joint soft-interference-cancellation MMSE equalizer,
//! * symbol-level combining, where rounds are equalized separately and merged
//!   at the filter outputs,
//! * LLR-level combining, where per-round extrinsic LLRs are summed,
//! * an exhaustive MAP combiner for desk-scale instances.
//!
//! On top of these sit the ARQ protocol driver ([`arq`]), outage and power
//! loss analysis ([`outage`]) and the command-line front end ([`cli`]).

pub mod arq;
pub mod channel;
pub mod cli;
pub mod combiner;
pub mod decoder;
pub mod error;
pub mod linalg;
pub mod oracle;
pub mod outage;
pub mod seeding;
pub mod selftest;
pub mod tx;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Magnitude at which LLRs are clipped everywhere inside the turbo loop.
pub const LLR_CLIP: f64 = 30.0;

/// Clips an LLR to `[-LLR_CLIP, LLR_CLIP]`; NaN maps to zero.
#[inline]
pub fn clip_llr(x: f64) -> f64 {
    if x.is_nan() {
        0.0
    } else {
        x.clamp(-LLR_CLIP, LLR_CLIP)
    }
}

/// Converts a dB value to linear scale.
#[inline]
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
