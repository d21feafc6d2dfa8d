//! LTE downlink resource grid bookkeeping and the OFDM modulator/demodulator.
//!
//! Frequency vectors handed to [`zero_pad`] are ordered from the lowest to
//! the highest occupied subcarrier. The padded vector is a centred spectrum:
//! index `fft_size / 2` is DC. [`OfdmModem`] converts between that centred
//! layout and natural FFT bin order internally.

use std::fmt;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

pub const SUBCARRIERS_PER_RB: usize = 12;
pub const SYMBOLS_PER_SLOT: usize = 7;
pub const SYMBOLS_PER_SUBFRAME: usize = 14;
pub const SUBFRAMES_PER_FRAME: usize = 10;
pub const SUBCARRIER_SPACING_HZ: f64 = 15_000.0;
pub const SUBFRAME_DURATION_S: f64 = 1e-3;

/// LTE channel bandwidths and their resource-block counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Bandwidth {
    Mhz1_4,
    Mhz3,
    Mhz5,
    Mhz10,
    Mhz15,
    Mhz20,
}

impl Bandwidth {
    pub const ALL: [Bandwidth; 6] = [
        Bandwidth::Mhz1_4,
        Bandwidth::Mhz3,
        Bandwidth::Mhz5,
        Bandwidth::Mhz10,
        Bandwidth::Mhz15,
        Bandwidth::Mhz20,
    ];

    pub fn mhz(self) -> f64 {
        match self {
            Bandwidth::Mhz1_4 => 1.4,
            Bandwidth::Mhz3 => 3.0,
            Bandwidth::Mhz5 => 5.0,
            Bandwidth::Mhz10 => 10.0,
            Bandwidth::Mhz15 => 15.0,
            Bandwidth::Mhz20 => 20.0,
        }
    }

    pub fn n_rb(self) -> usize {
        match self {
            Bandwidth::Mhz1_4 => 6,
            Bandwidth::Mhz3 => 15,
            Bandwidth::Mhz5 => 25,
            Bandwidth::Mhz10 => 50,
            Bandwidth::Mhz15 => 75,
            Bandwidth::Mhz20 => 100,
        }
    }

    pub fn from_mhz(mhz: f64) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|b| (b.mhz() - mhz).abs() < 1e-9)
            .ok_or_else(|| Error::invalid(format!("{mhz} MHz is not an LTE channel bandwidth")))
    }

    pub fn from_n_rb(n_rb: usize) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|b| b.n_rb() == n_rb)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "{n_rb} resource blocks is not an LTE configuration"
                ))
            })
    }
}

impl fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} MHz", self.mhz())
    }
}

/// Size of one subframe's grid and of the OFDM transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridDimensions {
    n_rb: usize,
    fft_size: usize,
    cp_len: usize,
}

impl GridDimensions {
    /// Uses the smallest power-of-two FFT that holds every subcarrier.
    pub fn new(n_rb: usize) -> Result<Self> {
        Bandwidth::from_n_rb(n_rb)?;
        Self::with_fft_size(n_rb, default_fft_size(n_rb * SUBCARRIERS_PER_RB))
    }

    pub fn with_fft_size(n_rb: usize, fft_size: usize) -> Result<Self> {
        Bandwidth::from_n_rb(n_rb)?;
        let n_sc = n_rb * SUBCARRIERS_PER_RB;
        if !fft_size.is_power_of_two() {
            return Err(Error::invalid(format!(
                "FFT size {fft_size} is not a power of two"
            )));
        }
        if fft_size < n_sc {
            return Err(Error::invalid(format!(
                "FFT size {fft_size} is smaller than {n_sc} subcarriers"
            )));
        }
        Ok(Self {
            n_rb,
            fft_size,
            cp_len: default_cp_len(fft_size),
        })
    }

    pub fn n_rb(&self) -> usize {
        self.n_rb
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n_rb * SUBCARRIERS_PER_RB
    }

    pub fn n_symbols(&self) -> usize {
        SYMBOLS_PER_SUBFRAME
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn cp_len(&self) -> usize {
        self.cp_len
    }

    pub fn n_res(&self) -> usize {
        self.n_subcarriers() * self.n_symbols()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.fft_size as f64 * SUBCARRIER_SPACING_HZ
    }

    /// Cyclic-prefix duration in seconds.
    pub fn cp_duration_s(&self) -> f64 {
        self.cp_len as f64 / self.sample_rate_hz()
    }

    /// Baseband frequency of subcarrier `k`, relative to the band centre.
    pub fn subcarrier_offset_hz(&self, k: usize) -> f64 {
        (k as f64 - (self.n_subcarriers() / 2) as f64) * SUBCARRIER_SPACING_HZ
    }

    /// Flat index of RE (subcarrier, symbol); symbols are stored contiguously.
    pub fn index(&self, subcarrier: usize, symbol: usize) -> usize {
        symbol * self.n_subcarriers() + subcarrier
    }
}

pub fn default_fft_size(n_subcarriers: usize) -> usize {
    n_subcarriers.next_power_of_two()
}

/// One CP length for every symbol: `ceil(fft_size / 14)`.
pub fn default_cp_len(fft_size: usize) -> usize {
    fft_size.div_ceil(SYMBOLS_PER_SUBFRAME)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReKind {
    Data,
    Pilot,
    Null,
}

/// Per-port complex grid of one subframe with a kind tag for every RE.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceGrid {
    dims: GridDimensions,
    values: [Vec<C64>; 2],
    kinds: [Vec<Option<ReKind>>; 2],
}

impl ResourceGrid {
    pub fn new(dims: GridDimensions) -> Self {
        let n = dims.n_res();
        Self {
            dims,
            values: [vec![C64::new(0.0, 0.0); n], vec![C64::new(0.0, 0.0); n]],
            kinds: [vec![None; n], vec![None; n]],
        }
    }

    pub fn dims(&self) -> &GridDimensions {
        &self.dims
    }

    pub fn get(&self, port: usize, subcarrier: usize, symbol: usize) -> C64 {
        self.values[port][self.dims.index(subcarrier, symbol)]
    }

    /// `None` for an RE nothing has been mapped to yet.
    pub fn kind(&self, port: usize, subcarrier: usize, symbol: usize) -> Option<ReKind> {
        self.kinds[port][self.dims.index(subcarrier, symbol)]
    }

    /// Places a value, refusing to overwrite an RE that is already assigned.
    pub fn place(
        &mut self,
        port: usize,
        subcarrier: usize,
        symbol: usize,
        kind: ReKind,
        value: C64,
    ) -> Result<()> {
        let idx = self.dims.index(subcarrier, symbol);
        if let Some(existing) = self.kinds[port][idx] {
            return Err(Error::Internal(format!(
                "RE (port {port}, subcarrier {subcarrier}, symbol {symbol}) already holds {existing:?}"
            )));
        }
        self.kinds[port][idx] = Some(kind);
        self.values[port][idx] = value;
        Ok(())
    }

    /// Column of one OFDM symbol on one port.
    pub fn column(&self, port: usize, symbol: usize) -> &[C64] {
        let n = self.dims.n_subcarriers();
        &self.values[port][symbol * n..(symbol + 1) * n]
    }

    pub fn port(&self, port: usize) -> &[C64] {
        &self.values[port]
    }

    pub fn into_ports(self) -> [Vec<C64>; 2] {
        self.values
    }
}

/// Centres `freq_symbols` around DC inside an `fft_size` spectrum. The odd
/// remainder of the guard band goes above the occupied band.
pub fn zero_pad(freq_symbols: &[C64], fft_size: usize) -> Result<Vec<C64>> {
    let n = freq_symbols.len();
    if fft_size < n {
        return Err(Error::invalid(format!(
            "FFT size {fft_size} cannot hold {n} subcarriers"
        )));
    }
    let start = (fft_size - n) / 2;
    let mut out = vec![C64::new(0.0, 0.0); fft_size];
    out[start..start + n].copy_from_slice(freq_symbols);
    Ok(out)
}

pub fn strip_padding(padded: &[C64], n_subcarriers: usize) -> Result<Vec<C64>> {
    if padded.len() < n_subcarriers {
        return Err(Error::invalid(format!(
            "{} bins cannot hold {n_subcarriers} subcarriers",
            padded.len()
        )));
    }
    let start = (padded.len() - n_subcarriers) / 2;
    Ok(padded[start..start + n_subcarriers].to_vec())
}

/// Unitary OFDM modulator/demodulator with a cyclic prefix.
#[derive(Clone)]
pub struct OfdmModem {
    fft_size: usize,
    cp_len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for OfdmModem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OfdmModem")
            .field("fft_size", &self.fft_size)
            .field("cp_len", &self.cp_len)
            .finish()
    }
}

impl OfdmModem {
    pub fn new(fft_size: usize, cp_len: usize) -> Result<Self> {
        if fft_size == 0 {
            return Err(Error::invalid("FFT size must be positive"));
        }
        if cp_len > fft_size {
            return Err(Error::invalid(format!(
                "cyclic prefix {cp_len} longer than FFT size {fft_size}"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            fft_size,
            cp_len,
            forward: planner.plan_fft_forward(fft_size),
            inverse: planner.plan_fft_inverse(fft_size),
        })
    }

    pub fn for_grid(dims: &GridDimensions) -> Result<Self> {
        Self::new(dims.fft_size(), dims.cp_len())
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn cp_len(&self) -> usize {
        self.cp_len
    }

    pub fn symbol_len(&self) -> usize {
        self.fft_size + self.cp_len
    }

    /// Centred spectrum of `fft_size` bins to `cp_len + fft_size` time samples.
    pub fn modulate(&self, spectrum: &[C64]) -> Result<Vec<C64>> {
        let n = self.fft_size;
        if spectrum.len() != n {
            return Err(Error::invalid(format!(
                "expected {n} frequency bins, got {}",
                spectrum.len()
            )));
        }
        let mut buf: Vec<C64> = (0..n).map(|b| spectrum[(b + n / 2) % n]).collect();
        self.inverse.process(&mut buf);
        let scale = 1.0 / (n as f64).sqrt();
        let mut out = Vec::with_capacity(self.symbol_len());
        out.extend(buf[n - self.cp_len..].iter().map(|z| z * scale));
        out.extend(buf.iter().map(|z| z * scale));
        Ok(out)
    }

    /// Drops the cyclic prefix and returns the centred spectrum.
    pub fn demodulate(&self, samples: &[C64]) -> Result<Vec<C64>> {
        let n = self.fft_size;
        if samples.len() != self.symbol_len() {
            return Err(Error::invalid(format!(
                "expected {} samples per OFDM symbol, got {}",
                self.symbol_len(),
                samples.len()
            )));
        }
        let mut buf = samples[self.cp_len..].to_vec();
        self.forward.process(&mut buf);
        let scale = 1.0 / (n as f64).sqrt();
        Ok((0..n).map(|c| buf[(c + n / 2) % n] * scale).collect())
    }
}

/// Zero pads a grid column and modulates it.
pub fn ofdm_modulate(column: &[C64], fft_size: usize, cp_len: usize) -> Result<Vec<C64>> {
    let padded = zero_pad(column, fft_size)?;
    OfdmModem::new(fft_size, cp_len)?.modulate(&padded)
}

/// Demodulates one OFDM symbol back to `n_subcarriers` occupied bins.
pub fn ofdm_demodulate(
    samples: &[C64],
    fft_size: usize,
    cp_len: usize,
    n_subcarriers: usize,
) -> Result<Vec<C64>> {
    let spectrum = OfdmModem::new(fft_size, cp_len)?.demodulate(samples)?;
    strip_padding(&spectrum, n_subcarriers)
}
