//! Feed-forward binary convolutional codes with zero-tail termination.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A rate-`1/n` feed-forward convolutional code.
///
/// Generators are given in the usual octal notation, most significant bit
/// tapping the current input. The (133, 171) pair with memory 6 is the
/// 64-state code used throughout the simulator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvCode {
    generators: Vec<u32>,
    memory: usize,
}

impl ConvCode {
    pub fn new(generators: Vec<u32>, memory: usize) -> Result<Self> {
        if generators.is_empty() {
            return Err(Error::Config("convolutional code needs at least one generator".into()));
        }
        if memory == 0 || memory > 16 {
            return Err(Error::Config(format!("unsupported code memory {memory}")));
        }
        let limit = 1u32 << (memory + 1);
        for &g in &generators {
            if g == 0 {
                return Err(Error::Config("zero generator polynomial".into()));
            }
            if g >= limit {
                return Err(Error::Config(format!(
                    "generator {g:o} does not fit a memory-{memory} register"
                )));
            }
        }
        if generators.iter().all(|g| g & (limit >> 1) == 0) {
            return Err(Error::Config(
                "no generator taps the current input bit".into(),
            ));
        }
        Ok(ConvCode { generators, memory })
    }

    /// Parses octal generator strings such as `["133", "171"]`.
    pub fn from_octal(generators: &[&str], memory: usize) -> Result<Self> {
        let parsed = generators
            .iter()
            .map(|s| {
                u32::from_str_radix(s, 8)
                    .map_err(|_| Error::Config(format!("generator {s:?} is not an octal number")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(parsed, memory)
    }

    /// The 64-state (133, 171) code.
    pub fn standard_64_state() -> Self {
        ConvCode {
            generators: vec![0o133, 0o171],
            memory: 6,
        }
    }

    pub fn generators(&self) -> &[u32] {
        &self.generators
    }

    pub fn generators_octal(&self) -> Vec<String> {
        self.generators.iter().map(|g| format!("{g:o}")).collect()
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    /// Number of code bits per trellis step (the inverse of the rate).
    pub fn outputs(&self) -> usize {
        self.generators.len()
    }

    pub fn num_states(&self) -> usize {
        1 << self.memory
    }

    pub fn rate(&self) -> f64 {
        1.0 / self.outputs() as f64
    }

    /// Output bits (packed, first generator in bit 0) and next state for
    /// `input` applied in `state`.
    #[inline]
    pub fn step(&self, state: usize, input: u8) -> (u32, usize) {
        let reg = ((input as u32) << self.memory) | state as u32;
        let mut out = 0u32;
        for (j, &g) in self.generators.iter().enumerate() {
            out |= ((reg & g).count_ones() & 1) << j;
        }
        (out, (reg >> 1) as usize)
    }

    /// Encodes a full frame. The last `memory` bits of `frame` are the tail
    /// and must be zero so the trellis ends in state 0.
    pub fn encode(&self, frame: &[u8]) -> Result<Vec<u8>> {
        if frame.len() <= self.memory {
            return Err(Error::Config(format!(
                "frame of {} bits leaves no room for a {}-bit tail",
                frame.len(),
                self.memory
            )));
        }
        if frame[frame.len() - self.memory..].iter().any(|&b| b != 0) {
            return Err(Error::Config("tail bits must be zero".into()));
        }
        Ok(self.encode_unterminated(frame))
    }

    /// Encodes `bits` from state 0 without checking termination.
    pub fn encode_unterminated(&self, bits: &[u8]) -> Vec<u8> {
        let n = self.outputs();
        let mut out = Vec::with_capacity(bits.len() * n);
        let mut state = 0usize;
        for &b in bits {
            let (code, next) = self.step(state, b & 1);
            for j in 0..n {
                out.push(((code >> j) & 1) as u8);
            }
            state = next;
        }
        out
    }

    /// Appends the zero tail to a block of data bits.
    pub fn with_tail(&self, data: &[u8]) -> Vec<u8> {
        let mut frame = data.to_vec();
        frame.resize(data.len() + self.memory, 0);
        frame
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent shift-register model: an explicit array of the last
    /// `memory + 1` inputs, newest first.
    fn shift_register_encode(gens: &[u32], memory: usize, bits: &[u8]) -> Vec<u8> {
        let mut reg = vec![0u8; memory + 1];
        let mut out = Vec::new();
        for &b in bits {
            reg.rotate_right(1);
            reg[0] = b;
            for &g in gens {
                let mut acc = 0u8;
                for (pos, &r) in reg.iter().enumerate() {
                    if (g >> (memory - pos)) & 1 == 1 {
                        acc ^= r;
                    }
                }
                out.push(acc);
            }
        }
        out
    }

    #[test]
    fn zero_frame_gives_zero_codeword() {
        let code = ConvCode::standard_64_state();
        let frame = vec![0u8; 40];
        assert!(code.encode(&frame).unwrap().iter().all(|&b| b == 0));
    }

    #[test]
    fn impulse_response_matches_shift_register() {
        let code = ConvCode::standard_64_state();
        let mut frame = vec![0u8; 13];
        frame[0] = 1;
        let got = code.encode(&frame).unwrap();
        let expected = shift_register_encode(&[0o133, 0o171], 6, &frame);
        assert_eq!(got, expected);
        // generator taps read most significant first, interleaved per step
        assert_eq!(&got[..14], &[1, 1, 0, 1, 1, 1, 1, 1, 0, 0, 1, 0, 1, 1]);
        assert!(got[14..].iter().all(|&b| b == 0));
    }

    #[test]
    fn frame_of_1800_gives_3600_coded_bits() {
        let code = ConvCode::standard_64_state();
        let frame = code.with_tail(&vec![1u8; 1794]);
        assert_eq!(frame.len(), 1800);
        assert_eq!(code.encode(&frame).unwrap().len(), 3600);
    }

    #[test]
    fn bad_generators_rejected() {
        assert!(ConvCode::new(vec![0o133, 0], 6).is_err());
        assert!(ConvCode::new(vec![0o1333], 6).is_err());
        assert!(ConvCode::from_octal(&["139"], 6).is_err());
        assert!(ConvCode::new(vec![], 6).is_err());
    }

    #[test]
    fn nonzero_tail_rejected() {
        let code = ConvCode::standard_64_state();
        let mut frame = vec![0u8; 20];
        frame[19] = 1;
        assert!(code.encode(&frame).is_err());
    }

    #[test]
    fn random_frames_match_shift_register() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let code = ConvCode::standard_64_state();
        for _ in 0..20 {
            let data: Vec<u8> = (0..50).map(|_| rng.random_range(0..2)).collect();
            let frame = code.with_tail(&data);
            assert_eq!(
                code.encode(&frame).unwrap(),
                shift_register_encode(&[0o133, 0o171], 6, &frame)
            );
        }
    }
}
