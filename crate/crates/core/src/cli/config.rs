//! Experiment configuration files (TOML).
//!
//! Required keys: `n_tx`, `n_rx`, `L`, `constellation`, `K`. Everything else
//! has a default; see [`ExperimentConfig`]. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::arq::ArqConfig;
use crate::channel::{ChannelDynamic, ChannelProfile};
use crate::combiner::{Receiver, Window};
use crate::outage::{OutageConfig, RateNormalization};
use crate::tx::{ConvCode, Modulation, TxConfig};
use crate::{Error, Result};

fn default_iterations() -> usize {
    5
}
fn default_frame_bits() -> usize {
    1800
}
fn default_generators() -> Vec<String> {
    vec!["133".into(), "171".into()]
}
fn default_memory() -> usize {
    6
}
fn default_interleaver_seed() -> u64 {
    1
}
fn default_snr() -> Vec<f64> {
    vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]
}
fn default_trials() -> u64 {
    1000
}
fn default_receivers() -> Vec<Receiver> {
    vec![Receiver::Signal, Receiver::Symbol, Receiver::Llr]
}
fn default_dft_len() -> usize {
    256
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_tx: usize,
    pub n_rx: usize,
    /// Channel taps.
    #[serde(rename = "L")]
    pub taps: usize,
    pub constellation: Modulation,
    /// Maximum number of ARQ rounds.
    #[serde(rename = "K")]
    pub k_max: usize,
    /// Turbo iterations per round.
    #[serde(rename = "N", default = "default_iterations")]
    pub iterations: usize,
    /// Odd window length; 9 up to two transmit antennas, 13 above.
    #[serde(default)]
    pub kappa: Option<usize>,
    /// Trellis input bits per frame, tail included.
    #[serde(default = "default_frame_bits")]
    pub frame_info_bits: usize,
    #[serde(default = "default_generators")]
    pub generators: Vec<String>,
    #[serde(default = "default_memory")]
    pub memory: usize,
    /// Defaults to `L` equal-power taps.
    #[serde(default)]
    pub tap_powers: Option<Vec<f64>>,
    #[serde(default)]
    pub channel_dynamic: ChannelDynamic,
    #[serde(default = "default_interleaver_seed")]
    pub interleaver_seed: u64,
    #[serde(default = "default_snr")]
    pub snr_db: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default = "default_receivers")]
    pub receivers: Vec<Receiver>,
    /// Outage target rate; defaults to the code rate times `M N_T`.
    #[serde(default)]
    pub rate: Option<f64>,
    #[serde(default = "default_dft_len")]
    pub dft_len: usize,
    #[serde(default)]
    pub rate_normalization: RateNormalization,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        let raw: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        raw.resolve()
    }

    /// Fills every defaulted value and checks the combination.
    pub fn resolve(mut self) -> Result<Self> {
        if self.taps == 0 {
            return Err(Error::Config("L must be at least 1".into()));
        }
        if self.kappa.is_none() {
            self.kappa = Some(Window::default_for(self.n_tx).kappa());
        }
        if self.tap_powers.is_none() {
            self.tap_powers = Some(vec![1.0 / self.taps as f64; self.taps]);
        }
        let tx = self.tx_config()?;
        if self.rate.is_none() {
            self.rate = Some(tx.rate());
        }
        if self.tap_powers.as_ref().map(Vec::len) != Some(self.taps) {
            return Err(Error::Config(format!("tap_powers must list L = {} values", self.taps)));
        }
        self.profile()?;
        self.window()?;
        if self.receivers.is_empty() {
            return Err(Error::Config("at least one receiver is required".into()));
        }
        self.arq_config(0)?.validate()?;
        self.outage_config(0)?.validate()?;
        Ok(self)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is representable in TOML")
    }

    pub fn code(&self) -> Result<ConvCode> {
        let g: Vec<&str> = self.generators.iter().map(String::as_str).collect();
        ConvCode::from_octal(&g, self.memory)
    }

    pub fn tx_config(&self) -> Result<TxConfig> {
        TxConfig::new(
            self.n_tx,
            self.n_rx,
            self.constellation,
            self.code()?,
            self.frame_info_bits,
            self.interleaver_seed,
        )
    }

    pub fn profile(&self) -> Result<ChannelProfile> {
        let powers = self
            .tap_powers
            .clone()
            .unwrap_or_else(|| vec![1.0 / self.taps as f64; self.taps]);
        ChannelProfile::new(powers, self.channel_dynamic)
    }

    pub fn window(&self) -> Result<Window> {
        match self.kappa {
            Some(k) => Window::symmetric(k),
            None => Ok(Window::default_for(self.n_tx)),
        }
    }

    pub fn arq_config(&self, master_seed: u64) -> Result<ArqConfig> {
        Ok(ArqConfig {
            k_max: self.k_max,
            iterations: self.iterations,
            receivers: self.receivers.clone(),
            tx: self.tx_config()?,
            profile: self.profile()?,
            window: self.window()?,
            snr_grid_db: self.snr_db.clone(),
            trials: self.trials,
            master_seed,
        })
    }

    pub fn outage_config(&self, master_seed: u64) -> Result<OutageConfig> {
        let rate = match self.rate {
            Some(r) => r,
            None => self.tx_config()?.rate(),
        };
        Ok(OutageConfig {
            profile: self.profile()?,
            n_tx: self.n_tx,
            n_rx: self.n_rx,
            k_max: self.k_max,
            rate,
            dft_len: self.dft_len,
            snr_grid_db: self.snr_db.clone(),
            trials: self.trials,
            normalization: self.rate_normalization,
            master_seed,
        })
    }
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ExperimentConfig::from_toml(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
n_tx = 2
n_rx = 2
L = 2
constellation = "QPSK"
K = 2
"#;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::from_toml(text, Path::new("test.toml"))
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse(MINIMAL).unwrap();
        assert_eq!(c.kappa, Some(9));
        assert_eq!(c.iterations, 5);
        assert_eq!(c.tx_config().unwrap().channel_uses, 900);
        assert_eq!(c.rate, Some(2.0));
        assert_eq!(c.tap_powers, Some(vec![0.5, 0.5]));
    }

    #[test]
    fn four_transmit_antennas_get_the_longer_window() {
        let c = parse(&MINIMAL.replace("n_tx = 2", "n_tx = 4")).unwrap();
        assert_eq!(c.kappa, Some(13));
        assert_eq!(c.tx_config().unwrap().channel_uses, 450);
    }

    #[test]
    fn missing_key_is_named() {
        let err = parse(&MINIMAL.replace("K = 2", "")).unwrap_err().to_string();
        assert!(err.contains("`K`"), "{err}");
    }

    #[test]
    fn unknown_key_rejected() {
        let err = parse(&format!("{MINIMAL}\nfoo = 1\n")).unwrap_err().to_string();
        assert!(err.contains("foo"), "{err}");
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = parse(MINIMAL).unwrap();
        let again = parse(&c.to_toml()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn oversized_map_oracle_rejected_with_bound() {
        let text = format!("{}\nreceivers = [\"map-oracle\"]\n", MINIMAL.replace("QPSK", "QAM16"));
        match parse(&text) {
            Err(Error::TooLarge { bound, .. }) => assert_eq!(bound, 1 << 16),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn file_errors_carry_the_path() {
        let err = parse_config(Path::new("/nonexistent/x.toml")).unwrap_err().to_string();
        assert!(err.contains("/nonexistent/x.toml"));
    }
}
