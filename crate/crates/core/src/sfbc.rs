//! Alamouti coding across pairs of subcarriers.
//!
//! A pair `(x0, x1)` occupies two data subcarriers `(f0, f1)` of one OFDM
//! symbol:
//!
//! ```text
//!            f0     f1
//! antenna 0  x0    -x1*
//! antenna 1  x1     x0*
//! ```
//!
//! Received values are indexed `y[f][r]` (pair position, receive antenna) and
//! channel gains `h[m][r]` (transmit antenna, receive antenna), so that
//! `y[0][r] = h[0][r] x0 + h[1][r] x1` and `y[1][r] = h[1][r] x0* - h[0][r] x1*`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

/// How the two subcarriers of a pair are chosen among the data subcarriers
/// of one OFDM symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    /// `(2i, 2i + 1)`: neighbouring data subcarriers.
    Adjacent,
    /// `(i, i + N/2)`: lower half paired with the upper half of the spectrum.
    Mirror,
}

impl fmt::Display for Pairing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pairing::Adjacent => "adjacent",
            Pairing::Mirror => "mirror",
        })
    }
}

impl FromStr for Pairing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "adjacent" => Ok(Pairing::Adjacent),
            "mirror" => Ok(Pairing::Mirror),
            _ => Err(Error::invalid(format!("unknown pairing `{s}`"))),
        }
    }
}

/// Which combiner the receiver applies to each pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combiner {
    /// [`sfbc_decode`] with the channel at the pair's first subcarrier.
    Alamouti,
    /// [`sfbc_decode_ls`] with the channel at both subcarriers.
    LeastSquares,
}

impl Combiner {
    /// Estimated CSI keeps the classic combiner; perfect CSI uses the exact
    /// per-subcarrier channel.
    pub fn default_for(csi: crate::pilots::CsiMode) -> Self {
        match csi {
            crate::pilots::CsiMode::Estimated => Combiner::Alamouti,
            crate::pilots::CsiMode::Perfect => Combiner::LeastSquares,
        }
    }
}

impl fmt::Display for Combiner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Combiner::Alamouti => "alamouti",
            Combiner::LeastSquares => "least_squares",
        })
    }
}

impl FromStr for Combiner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "alamouti" => Ok(Combiner::Alamouti),
            "least_squares" | "ls" => Ok(Combiner::LeastSquares),
            _ => Err(Error::invalid(format!("unknown combiner `{s}`"))),
        }
    }
}

/// A symbol pair and the data-subcarrier positions that carry it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SfbcPair {
    pub x0: C64,
    pub x1: C64,
    pub k0: usize,
    pub k1: usize,
}

/// Positions `(k0, k1)` of every pair among `n_data` data subcarriers.
pub fn pair_positions(n_data: usize, pairing: Pairing) -> Result<Vec<(usize, usize)>> {
    if !n_data.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "SFBC needs an even number of data subcarriers, got {n_data}"
        )));
    }
    let half = n_data / 2;
    Ok(match pairing {
        Pairing::Adjacent => (0..half).map(|i| (2 * i, 2 * i + 1)).collect(),
        Pairing::Mirror => (0..half).map(|i| (i, i + half)).collect(),
    })
}

/// The 2x2 transmit matrix of a pair: rows are antennas, columns pair positions.
pub fn codeword(x0: C64, x1: C64) -> [[C64; 2]; 2] {
    [[x0, -x1.conj()], [x1, x0.conj()]]
}

/// Maps symbol pairs onto the data subcarriers of both antennas.
pub fn sfbc_encode(
    pairs: &[(C64, C64)],
    pairing: Pairing,
    n_data_subcarriers: usize,
) -> Result<[Vec<C64>; 2]> {
    let positions = pair_positions(n_data_subcarriers, pairing)?;
    if pairs.len() != positions.len() {
        return Err(Error::invalid(format!(
            "{} pairs for {n_data_subcarriers} data subcarriers",
            pairs.len()
        )));
    }
    let zero = C64::new(0.0, 0.0);
    let mut ant = [
        vec![zero; n_data_subcarriers],
        vec![zero; n_data_subcarriers],
    ];
    for (&(x0, x1), &(k0, k1)) in pairs.iter().zip(&positions) {
        let x = codeword(x0, x1);
        for (m, row) in x.iter().enumerate() {
            ant[m][k0] = row[0];
            ant[m][k1] = row[1];
        }
    }
    Ok(ant)
}

/// Channel gains seen by one pair position, `h[tx][rx]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairChannel {
    pub h: [[C64; 2]; 2],
}

impl PairChannel {
    pub fn new(h: [[C64; 2]; 2]) -> Self {
        Self { h }
    }

    pub fn energy(&self) -> f64 {
        self.h.iter().flatten().map(|z| z.norm_sqr()).sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            h: self.h.map(|row| row.map(|z| z * s)),
        }
    }
}

/// Noiseless received values for a pair whose channels at `f0` and `f1` are given.
pub fn received(x0: C64, x1: C64, at_f0: &PairChannel, at_f1: &PairChannel) -> [[C64; 2]; 2] {
    let (a, b) = (&at_f0.h, &at_f1.h);
    [
        [a[0][0] * x0 + a[1][0] * x1, a[0][1] * x0 + a[1][1] * x1],
        [
            b[1][0] * x0.conj() - b[0][0] * x1.conj(),
            b[1][1] * x0.conj() - b[0][1] * x1.conj(),
        ],
    ]
}

/// Alamouti combiner assuming the channel is the same at both pair positions.
pub fn sfbc_decode(y: &[[C64; 2]; 2], channel: &PairChannel) -> Result<(C64, C64)> {
    let h = &channel.h;
    let energy = channel.energy();
    if energy.is_nan() || energy <= 0.0 {
        return Err(Error::DecodeFailure { pair: 0 });
    }
    let x0 = h[0][0].conj() * y[0][0]
        + h[1][0] * y[1][0].conj()
        + h[0][1].conj() * y[0][1]
        + h[1][1] * y[1][1].conj();
    let x1 = h[1][0].conj() * y[0][0] - h[0][0] * y[1][0].conj() + h[1][1].conj() * y[0][1]
        - h[0][1] * y[1][1].conj();
    Ok((x0 / energy, x1 / energy))
}

/// Least-squares combiner for a pair whose channel differs between `f0` and `f1`.
///
/// Stacks `y[0][r]` and `conj(y[1][r])` into a 4x2 linear system in
/// `(x0, x1)` and solves its normal equations. With equal channels at both
/// positions the Gram matrix is `energy * I` and the result coincides with
/// [`sfbc_decode`].
pub fn sfbc_decode_ls(
    y: &[[C64; 2]; 2],
    at_f0: &PairChannel,
    at_f1: &PairChannel,
) -> Result<(C64, C64)> {
    let (a, b) = (&at_f0.h, &at_f1.h);
    // Rows of A such that [y0r, conj(y1r)] = A [x0, x1].
    let rows = [
        ([a[0][0], a[1][0]], y[0][0]),
        ([a[0][1], a[1][1]], y[0][1]),
        ([b[1][0].conj(), -b[0][0].conj()], y[1][0].conj()),
        ([b[1][1].conj(), -b[0][1].conj()], y[1][1].conj()),
    ];
    let zero = C64::new(0.0, 0.0);
    let (mut g00, mut g01, mut g11) = (zero, zero, zero);
    let (mut r0, mut r1) = (zero, zero);
    for (row, obs) in rows {
        g00 += row[0].conj() * row[0];
        g01 += row[0].conj() * row[1];
        g11 += row[1].conj() * row[1];
        r0 += row[0].conj() * obs;
        r1 += row[1].conj() * obs;
    }
    let det = g00 * g11 - g01 * g01.conj();
    let scale = (g00.re + g11.re).powi(2);
    if scale == 0.0 || det.norm().is_nan() || det.norm() <= 1e-14 * scale {
        return Err(Error::DecodeFailure { pair: 0 });
    }
    let x0 = (g11 * r0 - g01 * r1) / det;
    let x1 = (g00 * r1 - g01.conj() * r0) / det;
    Ok((x0, x1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_channel(rng: &mut impl Rng) -> PairChannel {
        let mut z = || c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        PairChannel::new([[z(), z()], [z(), z()]])
    }

    #[test]
    fn mirror_example() {
        let ant = sfbc_encode(
            &[(c(1.0, 0.0), c(0.0, 1.0)), (c(0.0, 0.0), c(0.0, 0.0))],
            Pairing::Mirror,
            4,
        )
        .unwrap();
        assert_eq!(ant[0][0], c(1.0, 0.0));
        assert_eq!(ant[0][2], c(0.0, 1.0));
        assert_eq!(ant[1][0], c(0.0, 1.0));
        assert_eq!(ant[1][2], c(1.0, 0.0));
    }

    #[test]
    fn adjacent_and_mirror_permute_the_same_values() {
        let pairs = [(c(1.0, 2.0), c(-0.5, 0.1)), (c(0.3, -0.7), c(2.0, 1.0))];
        let adj = sfbc_encode(&pairs, Pairing::Adjacent, 4).unwrap();
        let mir = sfbc_encode(&pairs, Pairing::Mirror, 4).unwrap();
        for m in 0..2 {
            let key = |v: &Vec<C64>| {
                let mut k: Vec<(i64, i64)> = v
                    .iter()
                    .map(|z| ((z.re * 1e9) as i64, (z.im * 1e9) as i64))
                    .collect();
                k.sort();
                k
            };
            assert_eq!(key(&adj[m]), key(&mir[m]));
        }
        assert_eq!(adj[0][1], -pairs[0].1.conj());
        assert_eq!(mir[0][2], -pairs[0].1.conj());
    }

    #[test]
    fn odd_subcarrier_count_rejected() {
        assert!(matches!(
            pair_positions(5, Pairing::Mirror),
            Err(Error::InvalidArgument(_))
        ));
        assert!(sfbc_encode(&[(c(1.0, 0.0), c(1.0, 0.0))], Pairing::Adjacent, 4).is_err());
    }

    #[test]
    fn every_data_subcarrier_used_once() {
        for pairing in [Pairing::Adjacent, Pairing::Mirror] {
            let pos = pair_positions(48, pairing).unwrap();
            let mut used: Vec<usize> = pos.iter().flat_map(|&(a, b)| [a, b]).collect();
            used.sort();
            assert_eq!(used, (0..48).collect::<Vec<_>>());
        }
    }

    #[test]
    fn identity_channel_recovers_exactly() {
        let h = PairChannel::new([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]]);
        let (x0, x1) = (c(0.3, -0.9), c(-1.1, 0.2));
        let y = received(x0, x1, &h, &h);
        let (a, b) = sfbc_decode(&y, &h).unwrap();
        assert!((a - x0).norm() < 1e-15 && (b - x1).norm() < 1e-15);
    }

    #[test]
    fn zero_input_gives_zero() {
        let mut rng = crate::rng::rng_from_seed(1);
        let h = random_channel(&mut rng);
        let y = [[c(0.0, 0.0); 2]; 2];
        assert_eq!(sfbc_decode(&y, &h).unwrap(), (c(0.0, 0.0), c(0.0, 0.0)));
    }

    #[test]
    fn dead_channel_is_a_decode_failure() {
        let h = PairChannel::new([[c(0.0, 0.0); 2]; 2]);
        let y = [[c(1.0, 0.0); 2]; 2];
        assert!(matches!(
            sfbc_decode(&y, &h),
            Err(Error::DecodeFailure { .. })
        ));
        assert!(matches!(
            sfbc_decode_ls(&y, &h, &h),
            Err(Error::DecodeFailure { .. })
        ));
    }

    #[test]
    fn least_squares_handles_unequal_channels() {
        let mut rng = crate::rng::rng_from_seed(8);
        for _ in 0..1000 {
            let (h0, h1) = (random_channel(&mut rng), random_channel(&mut rng));
            let (x0, x1) = (c(rng.random(), rng.random()), c(rng.random(), rng.random()));
            let y = received(x0, x1, &h0, &h1);
            let (a, b) = sfbc_decode_ls(&y, &h0, &h1).unwrap();
            assert!((a - x0).norm() < 1e-9 && (b - x1).norm() < 1e-9);
        }
    }

    #[test]
    fn least_squares_matches_alamouti_for_equal_channels() {
        let mut rng = crate::rng::rng_from_seed(9);
        for _ in 0..200 {
            let h = random_channel(&mut rng);
            let y = [
                [c(rng.random(), rng.random()), c(rng.random(), rng.random())],
                [c(rng.random(), 0.3), c(-0.2, rng.random())],
            ];
            let (a, b) = sfbc_decode(&y, &h).unwrap();
            let (p, q) = sfbc_decode_ls(&y, &h, &h).unwrap();
            assert!((a - p).norm() < 1e-10 && (b - q).norm() < 1e-10);
        }
    }

    proptest! {
        #[test]
        fn codeword_is_orthogonal(a in -5.0f64..5.0, b in -5.0f64..5.0, p in -5.0f64..5.0, q in -5.0f64..5.0) {
            let (x0, x1) = (c(a, b), c(p, q));
            let x = codeword(x0, x1);
            let norm = x0.norm_sqr() + x1.norm_sqr();
            for i in 0..2 {
                for j in 0..2 {
                    let g: C64 = (0..2).map(|k| x[i][k] * x[j][k].conj()).sum();
                    let expect = if i == j { norm } else { 0.0 };
                    prop_assert!((g - c(expect, 0.0)).norm() < 1e-12 * (1.0 + norm));
                }
            }
        }
    }
}
