//! Gray-labelled unit-energy constellations.
//!
//! Labels are read with the first bit of a symbol as the most significant
//! bit. The labelling tables are:
//!
//! QPSK, `(b1, b2) -> ((1 - 2 b1) + j (1 - 2 b2)) / sqrt(2)`:
//!
//! | b1 b2 | point          |
//! |-------|----------------|
//! | 00    | (+1 + j) / √2  |
//! | 01    | (+1 - j) / √2  |
//! | 10    | (-1 + j) / √2  |
//! | 11    | (-1 - j) / √2  |
//!
//! 16-QAM, `(b1, b2)` select the in-phase level and `(b3, b4)` the
//! quadrature level through the same per-axis Gray map, divided by √10:
//!
//! | pair | level |
//! |------|-------|
//! | 00   | +3    |
//! | 01   | +1    |
//! | 11   | -1    |
//! | 10   | -3    |

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Modulation {
    #[serde(rename = "QPSK")]
    Qpsk,
    #[serde(rename = "QAM16")]
    Qam16,
}

impl Modulation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
        }
    }

    pub fn constellation(self) -> Constellation {
        Constellation::new(self)
    }
}

impl fmt::Display for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modulation::Qpsk => "QPSK",
            Modulation::Qam16 => "QAM16",
        })
    }
}

impl FromStr for Modulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_uppercase().as_str() {
            "QPSK" => Ok(Modulation::Qpsk),
            "QAM16" | "16QAM" | "16-QAM" => Ok(Modulation::Qam16),
            _ => Err(Error::Config(format!("unknown constellation {s:?}"))),
        }
    }
}

/// Points indexed by label, plus per-label bit tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    modulation: Modulation,
    points: Vec<Complex64>,
    bits: Vec<Vec<u8>>,
}

fn gray_level(pair: usize) -> f64 {
    match pair {
        0b00 => 3.0,
        0b01 => 1.0,
        0b11 => -1.0,
        _ => -3.0,
    }
}

impl Constellation {
    pub fn new(modulation: Modulation) -> Self {
        let m = modulation.bits_per_symbol();
        let points: Vec<Complex64> = (0..1usize << m)
            .map(|label| match modulation {
                Modulation::Qpsk => {
                    let re = 1.0 - 2.0 * ((label >> 1) & 1) as f64;
                    let im = 1.0 - 2.0 * (label & 1) as f64;
                    Complex64::new(re, im) / 2f64.sqrt()
                }
                Modulation::Qam16 => {
                    let re = gray_level(label >> 2);
                    let im = gray_level(label & 0b11);
                    Complex64::new(re, im) / 10f64.sqrt()
                }
            })
            .collect();
        let bits = (0..1usize << m)
            .map(|label| (0..m).map(|b| ((label >> (m - 1 - b)) & 1) as u8).collect())
            .collect();
        Constellation {
            modulation,
            points,
            bits,
        }
    }

    pub fn modulation(&self) -> Modulation {
        self.modulation
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.modulation.bits_per_symbol()
    }

    pub fn size(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn point(&self, label: usize) -> Complex64 {
        self.points[label]
    }

    /// Bit `m` (0-based, first bit = 0) of `label`.
    #[inline]
    pub fn bit(&self, label: usize, m: usize) -> u8 {
        self.bits[label][m]
    }

    pub fn label_of(bits: &[u8]) -> usize {
        bits.iter().fold(0, |acc, &b| (acc << 1) | (b & 1) as usize)
    }

    pub fn map(&self, bits: &[u8]) -> Complex64 {
        debug_assert_eq!(bits.len(), self.bits_per_symbol());
        self.points[Self::label_of(bits)]
    }

    /// Nearest-point hard decision.
    pub fn slice(&self, x: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (label, p) in self.points.iter().enumerate() {
            let d = (x - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = label;
            }
        }
        best
    }

    pub fn bits_of(&self, label: usize) -> &[u8] {
        &self.bits[label]
    }
}
