//! Space-time bit-interleaved coded modulation transmitter.
//!
//! Data bits are zero-tailed and convolutionally encoded, the coded bits are
//! interleaved and every group of `M` bits is Gray-mapped to a symbol. The
//! symbols are multiplexed over the `N_T` antennas: interleaved bit
//! `p = (i N_T + t) M + m` is bit `m` of the symbol sent on antenna `t` at
//! channel use `i`.

pub mod constellation;
pub mod conv;
pub mod interleaver;

use nalgebra::DMatrix;
use num_complex::Complex64;

pub use constellation::{Constellation, Modulation};
pub use conv::ConvCode;
pub use interleaver::Interleaver;

use crate::{Error, Result};

/// Static transmitter parameters shared by every frame of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TxConfig {
    pub n_tx: usize,
    pub n_rx: usize,
    pub modulation: Modulation,
    pub code: ConvCode,
    /// Trellis input length, tail included.
    pub frame_info_bits: usize,
    /// Channel uses per frame.
    pub channel_uses: usize,
    pub interleaver_seed: u64,
}

impl TxConfig {
    /// Validates the parameters and derives `T` from the frame length.
    pub fn new(
        n_tx: usize,
        n_rx: usize,
        modulation: Modulation,
        code: ConvCode,
        frame_info_bits: usize,
        interleaver_seed: u64,
    ) -> Result<Self> {
        if n_tx == 0 || n_rx == 0 {
            return Err(Error::Config("antenna counts must be positive".into()));
        }
        if frame_info_bits <= code.memory() {
            return Err(Error::Config(format!(
                "frame of {frame_info_bits} bits leaves no room for the {}-bit tail",
                code.memory()
            )));
        }
        let coded = frame_info_bits * code.outputs();
        let per_use = modulation.bits_per_symbol() * n_tx;
        if coded % per_use != 0 {
            return Err(Error::Config(format!(
                "{coded} coded bits do not fill whole channel uses of {per_use} bits"
            )));
        }
        Ok(TxConfig {
            n_tx,
            n_rx,
            modulation,
            code,
            frame_info_bits,
            channel_uses: coded / per_use,
            interleaver_seed,
        })
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.modulation.bits_per_symbol()
    }

    pub fn data_bits(&self) -> usize {
        self.frame_info_bits - self.code.memory()
    }

    pub fn coded_bits(&self) -> usize {
        self.frame_info_bits * self.code.outputs()
    }

    /// Spectral efficiency `rho * M * N_T` in bits per channel use.
    pub fn rate(&self) -> f64 {
        self.code.rate() * (self.bits_per_symbol() * self.n_tx) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodedFrame {
    /// Data bits without the tail.
    pub info_bits: Vec<u8>,
    pub coded_bits: Vec<u8>,
    pub interleaved_bits: Vec<u8>,
    /// `N_T x T` symbol matrix.
    pub symbols: DMatrix<Complex64>,
}

/// Transmitter with its interleaver and constellation built once.
#[derive(Debug, Clone)]
pub struct Transmitter {
    config: TxConfig,
    interleaver: Interleaver,
    constellation: Constellation,
}

impl Transmitter {
    pub fn new(config: TxConfig) -> Result<Self> {
        let interleaver = Interleaver::s_random(config.coded_bits(), config.interleaver_seed)?;
        let constellation = config.modulation.constellation();
        Ok(Transmitter {
            config,
            interleaver,
            constellation,
        })
    }

    pub fn config(&self) -> &TxConfig {
        &self.config
    }

    pub fn interleaver(&self) -> &Interleaver {
        &self.interleaver
    }

    pub fn constellation(&self) -> &Constellation {
        &self.constellation
    }

    pub fn encode(&self, info_bits: &[u8]) -> Result<CodedFrame> {
        if info_bits.len() != self.config.data_bits() {
            return Err(Error::framing(
                "data block",
                self.config.data_bits(),
                info_bits.len(),
            ));
        }
        let frame = self.config.code.with_tail(info_bits);
        let coded_bits = self.config.code.encode(&frame)?;
        let interleaved_bits = self.interleaver.interleave(&coded_bits);
        let symbols = map_and_multiplex(&interleaved_bits, &self.config, &self.constellation)?;
        Ok(CodedFrame {
            info_bits: info_bits.to_vec(),
            coded_bits,
            interleaved_bits,
            symbols,
        })
    }
}

/// Maps interleaved bits onto the `N_T x T` symbol matrix.
pub fn map_and_multiplex(
    bits: &[u8],
    config: &TxConfig,
    constellation: &Constellation,
) -> Result<DMatrix<Complex64>> {
    let m = constellation.bits_per_symbol();
    let expected = m * config.n_tx * config.channel_uses;
    if bits.len() != expected {
        return Err(Error::framing("symbol mapping", expected, bits.len()));
    }
    Ok(DMatrix::from_fn(config.n_tx, config.channel_uses, |t, i| {
        let p = (i * config.n_tx + t) * m;
        constellation.map(&bits[p..p + m])
    }))
}

/// Hard demapping of a symbol matrix back to interleaved bit order.
pub fn demap_hard(symbols: &DMatrix<Complex64>, constellation: &Constellation) -> Vec<u8> {
    let (n_tx, n_uses) = symbols.shape();
    let mut bits = Vec::with_capacity(n_tx * n_uses * constellation.bits_per_symbol());
    for i in 0..n_uses {
        for t in 0..n_tx {
            bits.extend_from_slice(constellation.bits_of(constellation.slice(symbols[(t, i)])));
        }
    }
    bits
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn config(modulation: Modulation) -> TxConfig {
        TxConfig::new(2, 2, modulation, ConvCode::standard_64_state(), 1800, 7).unwrap()
    }

    #[test]
    fn channel_uses_follow_frame_length() {
        assert_eq!(config(Modulation::Qpsk).channel_uses, 900);
        assert_eq!(config(Modulation::Qam16).channel_uses, 450);
        assert_eq!(config(Modulation::Qpsk).rate(), 2.0);
        assert_eq!(config(Modulation::Qam16).rate(), 4.0);
        let c = TxConfig::new(4, 2, Modulation::Qpsk, ConvCode::standard_64_state(), 1800, 7).unwrap();
        assert_eq!((c.channel_uses, c.rate()), (450, 4.0));
    }

    #[test]
    fn uneven_frames_rejected() {
        assert!(TxConfig::new(2, 2, Modulation::Qam16, ConvCode::standard_64_state(), 1801, 7).is_err());
    }

    #[test]
    fn mapping_length_mismatch_is_framing_error() {
        let cfg = config(Modulation::Qpsk);
        let c = cfg.modulation.constellation();
        assert!(matches!(
            map_and_multiplex(&[0; 10], &cfg, &c),
            Err(Error::Framing { .. })
        ));
    }

    #[test]
    fn hard_round_trip_and_unit_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for modulation in [Modulation::Qpsk, Modulation::Qam16] {
            let tx = Transmitter::new(config(modulation)).unwrap();
            let data: Vec<u8> = (0..tx.config().data_bits()).map(|_| rng.random_range(0..2)).collect();
            let frame = tx.encode(&data).unwrap();
            assert_eq!(demap_hard(&frame.symbols, tx.constellation()), frame.interleaved_bits);
            assert_eq!(tx.interleaver().deinterleave(&frame.interleaved_bits), frame.coded_bits);
        }
    }

    #[test]
    fn average_symbol_energy_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for modulation in [Modulation::Qpsk, Modulation::Qam16] {
            let cfg = TxConfig::new(2, 2, modulation, ConvCode::standard_64_state(), 60_000, 1).unwrap();
            let c = cfg.modulation.constellation();
            let bits: Vec<u8> = (0..cfg.coded_bits()).map(|_| rng.random_range(0..2)).collect();
            let s = map_and_multiplex(&bits, &cfg, &c).unwrap();
            let e = s.iter().map(|x| x.norm_sqr()).sum::<f64>() / s.len() as f64;
            assert!((e - 1.0).abs() < 0.01, "{modulation}: {e}");
        }
    }
}
