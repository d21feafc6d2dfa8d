//! Bit generation, Gray-coded square QAM and bit-error counting.
//!
//! Bit labels follow the LTE convention: for a label `b0 b1 ... b(k-1)`
//! (b0 first in the stream), even-indexed bits select the in-phase level
//! and odd-indexed bits the quadrature level. The first bit of each axis
//! chooses the sign, the remaining ones the amplitude in Gray order.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::C64;

/// Supported modulation orders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum QamOrder {
    Qam4,
    Qam16,
    Qam64,
}

impl QamOrder {
    pub const ALL: [QamOrder; 3] = [QamOrder::Qam4, QamOrder::Qam16, QamOrder::Qam64];

    pub fn order(self) -> u32 {
        match self {
            QamOrder::Qam4 => 4,
            QamOrder::Qam16 => 16,
            QamOrder::Qam64 => 64,
        }
    }

    pub fn bits_per_symbol(self) -> usize {
        match self {
            QamOrder::Qam4 => 2,
            QamOrder::Qam16 => 4,
            QamOrder::Qam64 => 6,
        }
    }

    /// Amplitude scale giving unit average symbol energy.
    pub fn scale(self) -> f64 {
        let mean_energy = match self {
            QamOrder::Qam4 => 2.0,
            QamOrder::Qam16 => 10.0,
            QamOrder::Qam64 => 42.0,
        };
        1.0 / f64::sqrt(mean_energy)
    }
}

impl TryFrom<u32> for QamOrder {
    type Error = Error;

    fn try_from(m: u32) -> Result<Self> {
        match m {
            4 => Ok(QamOrder::Qam4),
            16 => Ok(QamOrder::Qam16),
            64 => Ok(QamOrder::Qam64),
            other => Err(Error::invalid(format!(
                "unsupported modulation order {other} (expected 4, 16 or 64)"
            ))),
        }
    }
}

impl From<QamOrder> for u32 {
    fn from(q: QamOrder) -> u32 {
        q.order()
    }
}

impl fmt::Display for QamOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-QAM", self.order())
    }
}

impl FromStr for QamOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let digits = s.trim().trim_end_matches("-QAM").trim_end_matches("qam");
        let m: u32 = digits
            .parse()
            .map_err(|_| Error::invalid(format!("cannot parse modulation `{s}`")))?;
        QamOrder::try_from(m)
    }
}

/// An ordered bit sequence and the seed it was drawn from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitStream {
    pub bits: Vec<u8>,
    pub seed: u64,
}

impl BitStream {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// Draws `count` i.i.d. uniform bits from a ChaCha8 stream keyed by `seed`.
pub fn generate_bits(count: usize, seed: u64) -> Result<BitStream> {
    if count == 0 {
        return Err(Error::invalid("bit count must be positive"));
    }
    let mut rng = rng_from_seed(seed);
    let mut bits = Vec::with_capacity(count);
    while bits.len() < count {
        let word: u64 = rng.random();
        let take = (count - bits.len()).min(64);
        bits.extend((0..take).map(|i| ((word >> i) & 1) as u8));
    }
    Ok(BitStream { bits, seed })
}

/// Square Gray-coded QAM alphabet with unit average energy.
#[derive(Debug, Clone, PartialEq)]
pub struct QamConstellation {
    order: QamOrder,
    points: Vec<C64>,
}

impl QamConstellation {
    pub fn new(order: QamOrder) -> Self {
        let k = order.bits_per_symbol();
        let points = (0..order.order() as usize)
            .map(|label| {
                let bit = |i: usize| ((label >> (k - 1 - i)) & 1) as u8;
                let axis_bits = |start: usize| (start..k).step_by(2).map(bit).collect::<Vec<_>>();
                let re = axis_level(&axis_bits(0));
                let im = axis_level(&axis_bits(1));
                C64::new(re, im) * order.scale()
            })
            .collect();
        Self { order, points }
    }

    pub fn order(&self) -> QamOrder {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.order.bits_per_symbol()
    }

    /// Constellation points indexed by bit label (first bit is the MSB).
    pub fn points(&self) -> &[C64] {
        &self.points
    }

    /// Label of the closest point; ties resolve to the lowest label.
    pub fn nearest_label(&self, z: C64) -> usize {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (label, p) in self.points.iter().enumerate() {
            let d = (z - p).norm_sqr();
            if d < best_dist {
                best = label;
                best_dist = d;
            }
        }
        best
    }

    pub fn modulate(&self, bits: &[u8]) -> Result<Vec<C64>> {
        let k = self.bits_per_symbol();
        if !bits.len().is_multiple_of(k) {
            return Err(Error::invalid(format!(
                "{} bits is not a multiple of {k} bits per symbol",
                bits.len()
            )));
        }
        Ok(bits
            .chunks_exact(k)
            .map(|chunk| {
                let label = chunk
                    .iter()
                    .fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize);
                self.points[label]
            })
            .collect())
    }

    pub fn demodulate(&self, symbols: &[C64]) -> Vec<u8> {
        let k = self.bits_per_symbol();
        let mut bits = Vec::with_capacity(symbols.len() * k);
        for &s in symbols {
            let label = self.nearest_label(s);
            bits.extend((0..k).rev().map(|i| ((label >> i) & 1) as u8));
        }
        bits
    }
}

/// Amplitude on one axis: first bit is the sign, the rest pick the Gray-ordered
/// magnitude. For three bits this yields 3, 1, 5, 7 for magnitude bits 00, 01, 10, 11.
fn axis_level(bits: &[u8]) -> f64 {
    let sign = 1.0 - 2.0 * f64::from(bits[0]);
    let mut magnitude = 1.0;
    let mut half = 1.0;
    for &b in bits[1..].iter().rev() {
        magnitude = half * 2.0 - (1.0 - 2.0 * f64::from(b)) * magnitude;
        half *= 2.0;
    }
    // For one bit the loop is skipped and |level| = 1.
    sign * magnitude
}

pub fn modulate(bits: &BitStream, constellation: &QamConstellation) -> Result<Vec<C64>> {
    constellation.modulate(&bits.bits)
}

/// Hard-decision demapping. The returned stream carries `seed` for bookkeeping.
pub fn demodulate(symbols: &[C64], constellation: &QamConstellation, seed: u64) -> BitStream {
    BitStream {
        bits: constellation.demodulate(symbols),
        seed,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BitErrors {
    pub errors: u64,
    pub ber: f64,
}

pub fn bit_errors(sent: &[u8], received: &[u8]) -> Result<BitErrors> {
    if sent.len() != received.len() {
        return Err(Error::invalid(format!(
            "stream lengths differ: {} vs {}",
            sent.len(),
            received.len()
        )));
    }
    let errors = sent
        .iter()
        .zip(received)
        .filter(|(a, b)| (*a ^ *b) & 1 == 1)
        .count() as u64;
    let ber = if sent.is_empty() {
        0.0
    } else {
        errors as f64 / sent.len() as f64
    };
    Ok(BitErrors { errors, ber })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn close(a: C64, b: C64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn generate_bits_is_deterministic() {
        let a = generate_bits(8, 1).unwrap();
        let b = generate_bits(8, 1).unwrap();
        assert_eq!(a, b);
        let c = generate_bits(4, 7).unwrap();
        assert_eq!(c.len(), 4);
        assert!(c.bits.iter().all(|&b| b <= 1));
    }

    #[test]
    fn generate_bits_rejects_zero() {
        assert!(matches!(
            generate_bits(0, 3),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn generate_bits_is_balanced() {
        // Binomial(1e6, 1/2): sigma = 500 ones, so 5 sigma = 0.0025 in fraction.
        let n = 1_000_000;
        let bits = generate_bits(n, 99).unwrap();
        let ones = bits.bits.iter().filter(|&&b| b == 1).count();
        let frac = ones as f64 / n as f64;
        assert!((0.495..=0.505).contains(&frac), "fraction of ones {frac}");
    }

    #[test]
    fn qpsk_label_zero() {
        let c = QamConstellation::new(QamOrder::Qam4);
        let s = c.modulate(&[0, 0]).unwrap();
        assert!(close(s[0], C64::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2)));
        assert!((s[0].norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lte_reference_points() {
        // Spot checks against the LTE mapping tables.
        let q16 = QamConstellation::new(QamOrder::Qam16);
        let s10 = 1.0 / 10f64.sqrt();
        assert!(close(q16.points()[0b0000], C64::new(1.0, 1.0) * s10));
        assert!(close(q16.points()[0b0010], C64::new(3.0, 1.0) * s10));
        assert!(close(q16.points()[0b0001], C64::new(1.0, 3.0) * s10));
        assert!(close(q16.points()[0b1111], C64::new(-3.0, -3.0) * s10));
        let q64 = QamConstellation::new(QamOrder::Qam64);
        let s42 = 1.0 / 42f64.sqrt();
        assert!(close(q64.points()[0b000000], C64::new(3.0, 3.0) * s42));
        assert!(close(q64.points()[0b001000], C64::new(5.0, 3.0) * s42));
        assert!(close(q64.points()[0b000010], C64::new(1.0, 3.0) * s42));
        assert!(close(q64.points()[0b101010], C64::new(-7.0, 3.0) * s42));
        assert!(close(q64.points()[0b111111], C64::new(-7.0, -7.0) * s42));
    }

    #[test]
    fn qam16_lattice() {
        let c = QamConstellation::new(QamOrder::Qam16);
        let scale = 10f64.sqrt();
        let mut seen = Vec::new();
        for p in c.points() {
            let (re, im) = (p.re * scale, p.im * scale);
            for v in [re, im] {
                let r = v.round();
                assert!((v - r).abs() < 1e-12 && [-3.0, -1.0, 1.0, 3.0].contains(&r));
            }
            seen.push((re.round() as i32, im.round() as i32));
        }
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 16);
    }

    #[test]
    fn constellations_have_unit_energy_and_distinct_points() {
        for order in QamOrder::ALL {
            let c = QamConstellation::new(order);
            let pts = c.points();
            assert_eq!(pts.len(), order.order() as usize);
            let mean = pts.iter().map(|p| p.norm_sqr()).sum::<f64>() / pts.len() as f64;
            assert!((mean - 1.0).abs() < 1e-12, "{order}: {mean}");
            for i in 0..pts.len() {
                for j in i + 1..pts.len() {
                    assert!((pts[i] - pts[j]).norm() > 1e-6);
                }
            }
        }
    }

    #[test]
    fn gray_property_for_lattice_neighbours() {
        for order in QamOrder::ALL {
            let c = QamConstellation::new(order);
            let pts = c.points();
            let dmin = 2.0 * order.scale();
            for i in 0..pts.len() {
                for j in i + 1..pts.len() {
                    let d = (pts[i] - pts[j]).norm();
                    if (d - dmin).abs() < 1e-9 {
                        assert_eq!((i ^ j).count_ones(), 1, "{order}: labels {i:b} {j:b}");
                    }
                }
            }
        }
    }

    #[test]
    fn empirical_qpsk_energy() {
        let c = QamConstellation::new(QamOrder::Qam4);
        let bits = generate_bits(1_000_000, 5).unwrap();
        let s = modulate(&bits, &c).unwrap();
        let e = s.iter().map(|z| z.norm_sqr()).sum::<f64>() / s.len() as f64;
        assert!((e - 1.0).abs() < 0.01);
    }

    #[test]
    fn modulate_rejects_ragged_input() {
        let c = QamConstellation::new(QamOrder::Qam16);
        assert!(matches!(
            c.modulate(&[0, 1, 1]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn hard_decisions() {
        let c = QamConstellation::new(QamOrder::Qam4);
        assert_eq!(c.demodulate(&[C64::new(0.9, 0.9)]), vec![0, 0]);
        assert_eq!(c.demodulate(&[C64::new(0.0, 0.0)]), vec![0, 0]);
        assert_eq!(c.demodulate(&[C64::new(-0.2, 0.4)]), vec![1, 0]);
    }

    #[test]
    fn bit_error_counting() {
        let a = vec![0u8; 100];
        assert_eq!(
            bit_errors(&a, &a).unwrap(),
            BitErrors {
                errors: 0,
                ber: 0.0
            }
        );
        let b = vec![1u8; 100];
        assert_eq!(
            bit_errors(&a, &b).unwrap(),
            BitErrors {
                errors: 100,
                ber: 1.0
            }
        );
        let r = bit_errors(&[0, 1, 0, 1], &[0, 1, 1, 1]).unwrap();
        assert_eq!(
            r,
            BitErrors {
                errors: 1,
                ber: 0.25
            }
        );
        assert!(matches!(
            bit_errors(&[0], &[0, 1]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn order_parsing() {
        assert_eq!("16".parse::<QamOrder>().unwrap(), QamOrder::Qam16);
        assert_eq!("64-QAM".parse::<QamOrder>().unwrap(), QamOrder::Qam64);
        assert!("8".parse::<QamOrder>().is_err());
    }

    proptest! {
        #[test]
        fn round_trip(order_idx in 0usize..3, seed in any::<u64>(), n in 1usize..200) {
            let order = QamOrder::ALL[order_idx];
            let c = QamConstellation::new(order);
            let bits = generate_bits(n * order.bits_per_symbol(), seed).unwrap();
            let s = modulate(&bits, &c).unwrap();
            prop_assert_eq!(s.len(), n);
            prop_assert_eq!(demodulate(&s, &c, seed), bits);
        }
    }
}
