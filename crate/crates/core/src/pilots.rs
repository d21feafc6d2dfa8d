//! Cell-specific reference signals for two antenna ports and pilot-based
//! channel estimation.
//!
//! Placement follows the LTE normal-CP layout for ports 0 and 1: pilots on
//! OFDM symbols 0 and 4 of each slot, every sixth subcarrier. Port 0 uses
//! offset 0 on the first pilot symbol of a slot and 3 on the second; port 1
//! uses the opposite offsets. An RE carrying a pilot on one port is left
//! empty on the other, so each port's pilots see a single transmit antenna.

use std::f64::consts::FRAC_PI_4;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelRealization, MimoGains};
use crate::error::{Error, Result};
use crate::grid::{GridDimensions, ReKind, ResourceGrid, SYMBOLS_PER_SLOT};
use crate::rng::rng_from_seed;
use crate::C64;

pub const PILOT_STRIDE: usize = 6;
/// Pilot-bearing symbols within a slot.
pub const PILOT_SYMBOLS_IN_SLOT: [usize; 2] = [0, 4];

/// Reference-signal positions `(subcarrier, symbol)` for both ports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PilotPattern {
    dims: GridDimensions,
    positions: [Vec<(usize, usize)>; 2],
}

impl PilotPattern {
    pub fn lte(dims: GridDimensions) -> Self {
        let positions = std::array::from_fn(|port| {
            let mut v = Vec::new();
            for symbol in 0..dims.n_symbols() {
                let in_slot = symbol % SYMBOLS_PER_SLOT;
                let Some(which) = PILOT_SYMBOLS_IN_SLOT.iter().position(|&s| s == in_slot) else {
                    continue;
                };
                let offset = if (which + port) % 2 == 0 { 0 } else { 3 };
                v.extend(
                    (offset..dims.n_subcarriers())
                        .step_by(PILOT_STRIDE)
                        .map(|k| (k, symbol)),
                );
            }
            v
        });
        Self { dims, positions }
    }

    /// A pattern with explicit positions; ports must not overlap.
    pub fn custom(dims: GridDimensions, positions: [Vec<(usize, usize)>; 2]) -> Result<Self> {
        for p in positions.iter().flatten() {
            if p.0 >= dims.n_subcarriers() || p.1 >= dims.n_symbols() {
                return Err(Error::invalid(format!(
                    "pilot position {p:?} outside the grid"
                )));
            }
        }
        if positions[0].iter().any(|p| positions[1].contains(p)) {
            return Err(Error::invalid("pilot positions of the two ports overlap"));
        }
        Ok(Self { dims, positions })
    }

    pub fn dims(&self) -> &GridDimensions {
        &self.dims
    }

    pub fn positions(&self, port: usize) -> &[(usize, usize)] {
        &self.positions[port]
    }

    /// Whether the RE carries a pilot on either port (and hence a null on the other).
    pub fn is_reserved(&self, subcarrier: usize, symbol: usize) -> bool {
        self.positions
            .iter()
            .any(|p| p.contains(&(subcarrier, symbol)))
    }

    /// Subcarriers of `symbol` left for data on both ports.
    pub fn data_subcarriers(&self, symbol: usize) -> Vec<usize> {
        let mut reserved = vec![false; self.dims.n_subcarriers()];
        for &(k, s) in self.positions.iter().flatten() {
            if s == symbol {
                reserved[k] = true;
            }
        }
        (0..self.dims.n_subcarriers())
            .filter(|&k| !reserved[k])
            .collect()
    }

    pub fn data_res_per_subframe(&self) -> usize {
        (0..self.dims.n_symbols())
            .map(|s| self.data_subcarriers(s).len())
            .sum()
    }
}

/// Known unit-amplitude QPSK pilot values for both ports, aligned with
/// [`PilotPattern::positions`]. Transmitter and receiver call this with the
/// same seed.
pub fn pilot_values(pattern: &PilotPattern, seed: u64) -> [Vec<C64>; 2] {
    let mut rng = rng_from_seed(seed);
    std::array::from_fn(|port| {
        (0..pattern.positions(port).len())
            .map(|_| {
                let q: u8 = rng.random_range(0..4);
                C64::from_polar(1.0, FRAC_PI_4 + f64::from(q) * 2.0 * FRAC_PI_4)
            })
            .collect()
    })
}

/// Writes pilots and their counterpart nulls into `grid`. Pilot REs must
/// still be free, so pilots are inserted before data is mapped.
pub fn insert_pilots(
    mut grid: ResourceGrid,
    pattern: &PilotPattern,
    seed: u64,
) -> Result<ResourceGrid> {
    if grid.dims() != pattern.dims() {
        return Err(Error::invalid("pilot pattern and grid dimensions differ"));
    }
    let values = pilot_values(pattern, seed);
    for (port, port_values) in values.iter().enumerate() {
        for (&(k, s), &v) in pattern.positions(port).iter().zip(port_values) {
            grid.place(port, k, s, ReKind::Pilot, v)?;
            grid.place(1 - port, k, s, ReKind::Null, C64::new(0.0, 0.0))?;
        }
    }
    Ok(grid)
}

/// Least-squares channel samples `received / known` at pilot REs.
pub fn normalize_pilots(received: &[C64], known: &[C64]) -> Result<Vec<C64>> {
    if received.len() != known.len() {
        return Err(Error::invalid(format!(
            "{} received pilots for {} known pilots",
            received.len(),
            known.len()
        )));
    }
    received
        .iter()
        .zip(known)
        .map(|(&y, &p)| {
            if p.norm_sqr() == 0.0 {
                Err(Error::invalid("known pilot value is zero"))
            } else {
                Ok(y / p)
            }
        })
        .collect()
}

/// Channel estimate over every RE of a subframe, `[tx][rx]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate(pub MimoGains);

impl ChannelEstimate {
    pub fn gains(&self) -> &MimoGains {
        &self.0
    }
}

/// Piecewise-linear interpolation through `(xs, ys)` (sorted `xs`), constant
/// beyond the outermost knots.
fn interp(xs: &[f64], ys: &[C64], x: f64) -> C64 {
    if x <= xs[0] {
        return ys[0];
    }
    let last = xs.len() - 1;
    if x >= xs[last] {
        return ys[last];
    }
    let i = xs.partition_point(|&v| v <= x) - 1;
    let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] * (1.0 - t) + ys[i + 1] * t
}

/// Interpolates one link from samples at `positions`: first across
/// frequency within each pilot symbol, then across time for each subcarrier.
pub fn interpolate_link(
    positions: &[(usize, usize)],
    samples: &[C64],
    dims: &GridDimensions,
) -> Result<Vec<C64>> {
    if positions.len() != samples.len() {
        return Err(Error::invalid(
            "pilot positions and samples differ in length",
        ));
    }
    let mut symbols: Vec<usize> = positions.iter().map(|p| p.1).collect();
    symbols.sort_unstable();
    symbols.dedup();
    if symbols.len() < 2 {
        return Err(Error::EstimationFailure(format!(
            "{} pilot symbol(s); need at least 2 for time interpolation",
            symbols.len()
        )));
    }
    let n_sc = dims.n_subcarriers();
    let mut columns = Vec::with_capacity(symbols.len());
    for &s in &symbols {
        let mut knots: Vec<(usize, C64)> = positions
            .iter()
            .zip(samples)
            .filter(|(p, _)| p.1 == s)
            .map(|(p, &v)| (p.0, v))
            .collect();
        if knots.len() < 2 {
            return Err(Error::EstimationFailure(format!(
                "symbol {s} has {} pilot(s); need at least 2 for frequency interpolation",
                knots.len()
            )));
        }
        knots.sort_by_key(|k| k.0);
        let xs: Vec<f64> = knots.iter().map(|k| k.0 as f64).collect();
        let ys: Vec<C64> = knots.iter().map(|k| k.1).collect();
        columns.push(
            (0..n_sc)
                .map(|k| interp(&xs, &ys, k as f64))
                .collect::<Vec<_>>(),
        );
    }
    let ts: Vec<f64> = symbols.iter().map(|&s| s as f64).collect();
    let mut out = vec![C64::new(0.0, 0.0); dims.n_res()];
    let mut ys = vec![C64::new(0.0, 0.0); symbols.len()];
    for k in 0..n_sc {
        for (y, col) in ys.iter_mut().zip(&columns) {
            *y = col[k];
        }
        for s in 0..dims.n_symbols() {
            out[dims.index(k, s)] = interp(&ts, &ys, s as f64);
        }
    }
    Ok(out)
}

/// Builds the full 2x2 estimate from per-link pilot samples, `samples[tx][rx]`
/// aligned with `pattern.positions(tx)`.
pub fn interpolate_channel(
    samples: &[[Vec<C64>; 2]; 2],
    pattern: &PilotPattern,
    dims: &GridDimensions,
) -> Result<ChannelEstimate> {
    let mut links: [[Vec<C64>; 2]; 2] = Default::default();
    for (m, row) in links.iter_mut().enumerate() {
        for (r, link) in row.iter_mut().enumerate() {
            *link = interpolate_link(pattern.positions(m), &samples[m][r], dims)?;
        }
    }
    Ok(ChannelEstimate(MimoGains::new(*dims, links)?))
}

/// Normalises received pilots on every link and interpolates them.
/// `received[r]` is the demodulated grid of receive antenna `r`.
pub fn estimate_channel(
    received: &[Vec<C64>; 2],
    pattern: &PilotPattern,
    seed: u64,
) -> Result<ChannelEstimate> {
    let dims = *pattern.dims();
    if received.iter().any(|g| g.len() != dims.n_res()) {
        return Err(Error::invalid(
            "received grid size does not match the pilot pattern",
        ));
    }
    let known = pilot_values(pattern, seed);
    let mut samples: [[Vec<C64>; 2]; 2] = Default::default();
    for (m, row) in samples.iter_mut().enumerate() {
        for (r, s) in row.iter_mut().enumerate() {
            let rx: Vec<C64> = pattern
                .positions(m)
                .iter()
                .map(|&(k, sym)| received[r][dims.index(k, sym)])
                .collect();
            *s = normalize_pilots(&rx, &known[m])?;
        }
    }
    interpolate_channel(&samples, pattern, &dims)
}

/// Where the decoder's channel knowledge comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsiMode {
    /// The true realisation, bypassing the pilots.
    Perfect,
    Estimated,
}

impl fmt::Display for CsiMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CsiMode::Perfect => "perfect",
            CsiMode::Estimated => "estimated",
        })
    }
}

impl FromStr for CsiMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "perfect" => Ok(CsiMode::Perfect),
            "estimated" => Ok(CsiMode::Estimated),
            _ => Err(Error::invalid(format!("unknown CSI mode `{s}`"))),
        }
    }
}

/// Channel knowledge handed to the decoder under `mode`.
pub fn channel_state(
    mode: CsiMode,
    received: &[Vec<C64>; 2],
    pattern: &PilotPattern,
    seed: u64,
    truth: &ChannelRealization,
) -> Result<ChannelEstimate> {
    match mode {
        CsiMode::Perfect => Ok(ChannelEstimate(truth.gains.clone())),
        CsiMode::Estimated => estimate_channel(received, pattern, seed),
    }
}
