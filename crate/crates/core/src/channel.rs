//! 2x2 MIMO multipath fading and additive noise, generated directly in the
//! frequency domain.
//!
//! Each tap of a delay profile carries a 2x2 matrix of unit-power complex
//! Gaussian processes with a Jakes Doppler spectrum (sum-of-sinusoids,
//! Zheng-Xiao form). Spatial correlation is imposed with the Kronecker model
//! `H = R_rx^½ G R_tx^½`, and tap 0 receives a line-of-sight component
//! weighted by the Rician K-factor. The per-subcarrier response of link
//! `(m, r)` is `Σ_l h_l(t) exp(-j2π f_k τ_l)`. The process is sampled once per
//! subframe and held constant within it.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridDimensions, SUBFRAME_DURATION_S};
use crate::rng::rng_from_seed;
use crate::C64;

const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Sinusoids per Rayleigh process.
const SOS_TERMS: usize = 16;
/// Arrival angle of the line-of-sight ray relative to the direction of motion.
const LOS_ANGLE: f64 = PI / 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EnvironmentKind {
    AwgnOnly,
    UserDefined,
    RuralArea,
    TypicalUrban,
    BadUrban,
    HillyTerrain,
}

impl EnvironmentKind {
    pub const ALL: [EnvironmentKind; 6] = [
        EnvironmentKind::AwgnOnly,
        EnvironmentKind::UserDefined,
        EnvironmentKind::RuralArea,
        EnvironmentKind::TypicalUrban,
        EnvironmentKind::BadUrban,
        EnvironmentKind::HillyTerrain,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EnvironmentKind::AwgnOnly => "AwgnOnly",
            EnvironmentKind::UserDefined => "UserDefined",
            EnvironmentKind::RuralArea => "RuralArea",
            EnvironmentKind::TypicalUrban => "TypicalUrban",
            EnvironmentKind::BadUrban => "BadUrban",
            EnvironmentKind::HillyTerrain => "HillyTerrain",
        }
    }
}

impl fmt::Display for EnvironmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvironmentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        let kind = match key.as_str() {
            "awgnonly" | "awgn" => EnvironmentKind::AwgnOnly,
            "userdefined" => EnvironmentKind::UserDefined,
            "ruralarea" | "ra" => EnvironmentKind::RuralArea,
            "typicalurban" | "tu" => EnvironmentKind::TypicalUrban,
            "badurban" | "bu" => EnvironmentKind::BadUrban,
            "hillyterrain" | "ht" => EnvironmentKind::HillyTerrain,
            _ => return Err(Error::invalid(format!("unknown radio environment `{s}`"))),
        };
        Ok(kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tap {
    pub delay_s: f64,
    pub power_db: f64,
}

impl Tap {
    const fn us(delay_us: f64, power_db: f64) -> Self {
        Self {
            delay_s: delay_us * 1e-6,
            power_db,
        }
    }
}

/// COST 207 reduced profiles.
const RURAL_AREA: [Tap; 4] = [
    Tap::us(0.0, 0.0),
    Tap::us(0.2, -2.0),
    Tap::us(0.4, -10.0),
    Tap::us(0.6, -20.0),
];
const TYPICAL_URBAN: [Tap; 6] = [
    Tap::us(0.0, -3.0),
    Tap::us(0.2, 0.0),
    Tap::us(0.6, -2.0),
    Tap::us(1.6, -6.0),
    Tap::us(2.4, -8.0),
    Tap::us(5.0, -10.0),
];
const BAD_URBAN: [Tap; 6] = [
    Tap::us(0.0, -3.0),
    Tap::us(0.4, 0.0),
    Tap::us(1.0, -3.0),
    Tap::us(1.6, -5.0),
    Tap::us(5.0, -2.0),
    Tap::us(6.6, -4.0),
];
const HILLY_TERRAIN: [Tap; 6] = [
    Tap::us(0.0, 0.0),
    Tap::us(0.1, -1.5),
    Tap::us(0.3, -4.5),
    Tap::us(0.5, -7.5),
    Tap::us(15.0, -8.0),
    Tap::us(17.2, -17.7),
];

/// A named delay profile with tap powers normalised to unit total power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioEnvironment {
    pub kind: EnvironmentKind,
    taps: Vec<Tap>,
}

impl RadioEnvironment {
    fn normalised(kind: EnvironmentKind, taps: &[Tap]) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::invalid("a delay profile needs at least one tap"));
        }
        for t in taps {
            if !(t.delay_s >= 0.0 && t.delay_s.is_finite() && t.power_db.is_finite()) {
                return Err(Error::invalid(format!("invalid tap {t:?}")));
            }
        }
        let mut taps = taps.to_vec();
        taps.sort_by(|a, b| a.delay_s.total_cmp(&b.delay_s));
        let total: f64 = taps.iter().map(|t| db_to_linear(t.power_db)).sum();
        let offset = 10.0 * total.log10();
        for t in &mut taps {
            t.power_db -= offset;
        }
        Ok(Self { kind, taps })
    }

    /// A UserDefined environment with a custom delay profile.
    pub fn user_defined(taps: &[Tap]) -> Result<Self> {
        Self::normalised(EnvironmentKind::UserDefined, taps)
    }

    pub fn taps(&self) -> &[Tap] {
        &self.taps
    }

    pub fn linear_powers(&self) -> Vec<f64> {
        self.taps.iter().map(|t| db_to_linear(t.power_db)).collect()
    }

    pub fn max_delay_s(&self) -> f64 {
        self.taps.last().map_or(0.0, |t| t.delay_s)
    }

    pub fn rms_delay_spread_s(&self) -> f64 {
        let p = self.linear_powers();
        let mean: f64 = self.taps.iter().zip(&p).map(|(t, w)| w * t.delay_s).sum();
        let second: f64 = self
            .taps
            .iter()
            .zip(&p)
            .map(|(t, w)| w * t.delay_s.powi(2))
            .sum();
        (second - mean * mean).max(0.0).sqrt()
    }

    /// Expected received power per data RE and receive antenna when each
    /// transmit antenna radiates half of a unit-energy symbol.
    pub fn expected_rx_power(&self) -> f64 {
        match self.kind {
            EnvironmentKind::AwgnOnly => 0.5,
            _ => 1.0,
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Tap table of a named environment. AwgnOnly and UserDefined are a single
/// tap at zero delay.
pub fn build_environment(kind: EnvironmentKind) -> RadioEnvironment {
    let taps: &[Tap] = match kind {
        EnvironmentKind::AwgnOnly | EnvironmentKind::UserDefined => &[Tap::us(0.0, 0.0)],
        EnvironmentKind::RuralArea => &RURAL_AREA,
        EnvironmentKind::TypicalUrban => &TYPICAL_URBAN,
        EnvironmentKind::BadUrban => &BAD_URBAN,
        EnvironmentKind::HillyTerrain => &HILLY_TERRAIN,
    };
    RadioEnvironment::normalised(kind, taps).expect("built-in profiles are valid")
}

pub fn build_environment_by_name(name: &str) -> Result<RadioEnvironment> {
    Ok(build_environment(name.parse()?))
}

/// Doppler, Rician and spatial-correlation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FadingConfig {
    /// Linear Rician K-factor of tap 0.
    pub k_factor: f64,
    pub speed_kmh: f64,
    pub carrier_ghz: f64,
    pub tx_corr: f64,
    pub rx_corr: f64,
}

impl Default for FadingConfig {
    fn default() -> Self {
        Self {
            k_factor: 0.0,
            speed_kmh: 3.0,
            carrier_ghz: 2.7,
            tx_corr: 0.0,
            rx_corr: 0.0,
        }
    }
}

impl FadingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_factor.is_nan() || self.k_factor < 0.0 {
            return Err(Error::invalid(format!(
                "K-factor {} must be >= 0",
                self.k_factor
            )));
        }
        if !(self.speed_kmh >= 0.0 && self.speed_kmh.is_finite()) {
            return Err(Error::invalid(format!(
                "speed {} km/h must be >= 0",
                self.speed_kmh
            )));
        }
        if !(self.carrier_ghz > 0.0 && self.carrier_ghz.is_finite()) {
            return Err(Error::invalid(format!(
                "carrier {} GHz must be > 0",
                self.carrier_ghz
            )));
        }
        for (name, c) in [("tx", self.tx_corr), ("rx", self.rx_corr)] {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::invalid(format!(
                    "{name} correlation {c} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }

    pub fn max_doppler_hz(&self) -> f64 {
        self.speed_kmh / 3.6 * self.carrier_ghz * 1e9 / SPEED_OF_LIGHT
    }
}

/// Complex gains of the four links over one subframe's REs, `links[tx][rx]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MimoGains {
    dims: GridDimensions,
    links: [[Vec<C64>; 2]; 2],
}

impl MimoGains {
    pub fn new(dims: GridDimensions, links: [[Vec<C64>; 2]; 2]) -> Result<Self> {
        for row in &links {
            for l in row {
                if l.len() != dims.n_res() {
                    return Err(Error::invalid(format!(
                        "link has {} gains, grid has {} REs",
                        l.len(),
                        dims.n_res()
                    )));
                }
            }
        }
        Ok(Self { dims, links })
    }

    pub fn identity(dims: GridDimensions) -> Self {
        let n = dims.n_res();
        let one = vec![C64::new(1.0, 0.0); n];
        let zero = vec![C64::new(0.0, 0.0); n];
        Self {
            dims,
            links: [[one.clone(), zero.clone()], [zero, one]],
        }
    }

    pub fn dims(&self) -> &GridDimensions {
        &self.dims
    }

    pub fn link(&self, tx: usize, rx: usize) -> &[C64] {
        &self.links[tx][rx]
    }

    pub fn link_mut(&mut self, tx: usize, rx: usize) -> &mut [C64] {
        &mut self.links[tx][rx]
    }

    /// The 2x2 matrix at one RE, `[tx][rx]`.
    pub fn at(&self, subcarrier: usize, symbol: usize) -> [[C64; 2]; 2] {
        let i = self.dims.index(subcarrier, symbol);
        [
            [self.links[0][0][i], self.links[0][1][i]],
            [self.links[1][0][i], self.links[1][1][i]],
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.links
            .iter()
            .flatten()
            .flatten()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// True channel over one subframe and the seed that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub gains: MimoGains,
    pub seed: u64,
}

/// One unit-power Jakes process, `(1/√M) Σ cos(ω cos α_n t + φ_n) + j cos(ω sin α_n t + ψ_n)`.
#[derive(Debug, Clone)]
struct SosProcess {
    cos_alpha: [f64; SOS_TERMS],
    sin_alpha: [f64; SOS_TERMS],
    phi: [f64; SOS_TERMS],
    psi: [f64; SOS_TERMS],
}

impl SosProcess {
    fn draw(rng: &mut impl Rng) -> Self {
        let theta: f64 = rng.random_range(-PI..PI);
        let mut p = Self {
            cos_alpha: [0.0; SOS_TERMS],
            sin_alpha: [0.0; SOS_TERMS],
            phi: [0.0; SOS_TERMS],
            psi: [0.0; SOS_TERMS],
        };
        for n in 0..SOS_TERMS {
            let alpha = (2.0 * PI * (n + 1) as f64 - PI + theta) / (4.0 * SOS_TERMS as f64);
            p.cos_alpha[n] = alpha.cos();
            p.sin_alpha[n] = alpha.sin();
            p.phi[n] = rng.random_range(-PI..PI);
            p.psi[n] = rng.random_range(-PI..PI);
        }
        p
    }

    fn sample(&self, omega_t: f64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for n in 0..SOS_TERMS {
            acc.re += (omega_t * self.cos_alpha[n] + self.phi[n]).cos();
            acc.im += (omega_t * self.sin_alpha[n] + self.psi[n]).cos();
        }
        acc / (SOS_TERMS as f64).sqrt()
    }
}

/// Symmetric square root of `[[1, ρ], [ρ, 1]]`.
fn corr_sqrt(rho: f64) -> [[f64; 2]; 2] {
    let (p, q) = ((1.0 + rho).sqrt(), (1.0 - rho).sqrt());
    let (a, b) = ((p + q) / 2.0, (p - q) / 2.0);
    [[a, b], [b, a]]
}

/// A seeded, time-varying 2x2 channel that can be sampled per subframe.
#[derive(Debug, Clone)]
pub struct FadingChannel {
    env: RadioEnvironment,
    fading: FadingConfig,
    dims: GridDimensions,
    seed: u64,
    /// `[tap][tx][rx]`
    processes: Vec<[[SosProcess; 2]; 2]>,
    los_phase: f64,
    /// `steering[tap][k] = exp(-j2π f_k τ_tap)`
    steering: Vec<Vec<C64>>,
}

impl FadingChannel {
    pub fn new(
        env: &RadioEnvironment,
        fading: &FadingConfig,
        dims: GridDimensions,
        seed: u64,
    ) -> Result<Self> {
        fading.validate()?;
        let mut rng = rng_from_seed(seed);
        let processes = env
            .taps()
            .iter()
            .map(|_| std::array::from_fn(|_| std::array::from_fn(|_| SosProcess::draw(&mut rng))))
            .collect();
        let los_phase = rng.random_range(-PI..PI);
        let steering = env
            .taps()
            .iter()
            .map(|tap| {
                (0..dims.n_subcarriers())
                    .map(|k| {
                        C64::from_polar(1.0, -2.0 * PI * dims.subcarrier_offset_hz(k) * tap.delay_s)
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            env: env.clone(),
            fading: *fading,
            dims,
            seed,
            processes,
            los_phase,
            steering,
        })
    }

    pub fn environment(&self) -> &RadioEnvironment {
        &self.env
    }

    /// Tap matrices `[tap][tx][rx]` at time `t` seconds.
    pub fn tap_gains(&self, t: f64) -> Vec<[[C64; 2]; 2]> {
        let omega_t = 2.0 * PI * self.fading.max_doppler_hz() * t;
        let rtx = corr_sqrt(self.fading.tx_corr);
        let rrx = corr_sqrt(self.fading.rx_corr);
        let k = self.fading.k_factor;
        let (los_w, scatter_w) = if k.is_infinite() {
            (1.0, 0.0)
        } else {
            ((k / (k + 1.0)).sqrt(), (1.0 / (k + 1.0)).sqrt())
        };
        let los = C64::from_polar(1.0, omega_t * LOS_ANGLE.cos() + self.los_phase);
        self.env
            .linear_powers()
            .iter()
            .zip(&self.processes)
            .enumerate()
            .map(|(l, (&power, procs))| {
                let g: [[C64; 2]; 2] =
                    std::array::from_fn(|m| std::array::from_fn(|r| procs[m][r].sample(omega_t)));
                // Kronecker: H[r][m] = Σ_a Σ_b Rrx½[r][a] G[a][b] Rtx½[b][m], with G[a][b] = g[b][a].
                let mut h = [[C64::new(0.0, 0.0); 2]; 2];
                for (m, row) in h.iter_mut().enumerate() {
                    for (r, cell) in row.iter_mut().enumerate() {
                        let mut acc = C64::new(0.0, 0.0);
                        for a in 0..2 {
                            for b in 0..2 {
                                acc += g[b][a] * (rrx[r][a] * rtx[b][m]);
                            }
                        }
                        *cell = acc;
                    }
                }
                let amp = power.sqrt();
                h.map(|row| {
                    row.map(|s| {
                        if l == 0 {
                            amp * (los * los_w + s * scatter_w)
                        } else {
                            amp * s
                        }
                    })
                })
            })
            .collect()
    }

    /// Realisation held constant over subframe `subframe` of the trial.
    pub fn realize(&self, subframe: usize) -> ChannelRealization {
        let dims = self.dims;
        let gains = if self.env.kind == EnvironmentKind::AwgnOnly {
            MimoGains::identity(dims)
        } else {
            let taps = self.tap_gains(subframe as f64 * SUBFRAME_DURATION_S);
            let n_sc = dims.n_subcarriers();
            let links = std::array::from_fn(|m| {
                std::array::from_fn(|r| {
                    let response: Vec<C64> = (0..n_sc)
                        .map(|k| {
                            taps.iter()
                                .zip(&self.steering)
                                .map(|(h, s)| h[m][r] * s[k])
                                .sum()
                        })
                        .collect();
                    let mut link = Vec::with_capacity(dims.n_res());
                    for _ in 0..dims.n_symbols() {
                        link.extend_from_slice(&response);
                    }
                    link
                })
            });
            MimoGains { dims, links }
        };
        ChannelRealization {
            gains,
            seed: self.seed,
        }
    }
}

/// The channel of the first subframe drawn from `seed`.
pub fn realize_channel(
    env: &RadioEnvironment,
    fading: &FadingConfig,
    dims: GridDimensions,
    seed: u64,
) -> Result<ChannelRealization> {
    Ok(FadingChannel::new(env, fading, dims, seed)?.realize(0))
}

/// `y_r[k, t] = Σ_m H_mr[k, t] x_m[k, t]` on every RE.
pub fn apply_channel(
    tx: &[Vec<C64>; 2],
    realization: &ChannelRealization,
) -> Result<[Vec<C64>; 2]> {
    let g = &realization.gains;
    let n = g.dims().n_res();
    if tx.iter().any(|x| x.len() != n) {
        return Err(Error::invalid(format!(
            "transmit grids have {} / {} REs, channel has {n}",
            tx[0].len(),
            tx[1].len()
        )));
    }
    Ok(std::array::from_fn(|r| {
        (0..n)
            .map(|i| g.link(0, r)[i] * tx[0][i] + g.link(1, r)[i] * tx[1][i])
            .collect()
    }))
}

/// Noise variance per complex sample at `snr_db` against `reference_power`.
pub fn noise_variance(snr_db: f64, reference_power: f64) -> f64 {
    reference_power / 10f64.powf(snr_db / 10.0)
}

/// Adds circular complex Gaussian noise of variance `reference_power / 10^(snr_db/10)`
/// per sample. `snr_db = +inf` bypasses the noise.
pub fn add_awgn(signal: &[C64], snr_db: f64, reference_power: f64, seed: u64) -> Result<Vec<C64>> {
    if !(reference_power > 0.0 && reference_power.is_finite()) {
        return Err(Error::invalid(format!(
            "reference power {reference_power} must be > 0"
        )));
    }
    if snr_db.is_nan() {
        return Err(Error::invalid("SNR is NaN"));
    }
    if snr_db == f64::INFINITY {
        return Ok(signal.to_vec());
    }
    let sigma = (noise_variance(snr_db, reference_power) / 2.0).sqrt();
    let mut rng = rng_from_seed(seed);
    Ok(signal
        .iter()
        .map(|&s| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            s + C64::new(re, im) * sigma
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims() -> GridDimensions {
        GridDimensions::new(6).unwrap()
    }

    #[test]
    fn single_tap_profiles() {
        for kind in [EnvironmentKind::AwgnOnly, EnvironmentKind::UserDefined] {
            let env = build_environment(kind);
            assert_eq!(
                env.taps(),
                &[Tap {
                    delay_s: 0.0,
                    power_db: 0.0
                }]
            );
        }
    }

    #[test]
    fn profiles_are_normalised() {
        for kind in EnvironmentKind::ALL {
            let env = build_environment(kind);
            let total: f64 = env.linear_powers().iter().sum();
            assert!((total - 1.0).abs() < 1e-12, "{kind}: {total}");
            assert!(env.taps().windows(2).all(|w| w[0].delay_s <= w[1].delay_s));
        }
    }

    #[test]
    fn typical_urban_normalisation() {
        // Linear powers of the TU table sum to 0.5012+1+0.6310+0.2512+0.1585+0.1 = 2.6418.
        let env = build_environment(EnvironmentKind::TypicalUrban);
        assert_eq!(env.taps().len(), 6);
        let total: f64 = [-3.0, 0.0, -2.0, -6.0, -8.0, -10.0]
            .iter()
            .map(|&d| db_to_linear(d))
            .sum();
        assert!((total - 2.641_822_5).abs() < 1e-6);
        let p = env.linear_powers();
        assert!((p[1] - 1.0 / total).abs() < 1e-12);
    }

    #[test]
    fn delay_spread_ordering() {
        let rms = |k| build_environment(k).rms_delay_spread_s();
        assert!(rms(EnvironmentKind::HillyTerrain) > rms(EnvironmentKind::BadUrban));
        assert!(rms(EnvironmentKind::BadUrban) > rms(EnvironmentKind::TypicalUrban));
        assert!(rms(EnvironmentKind::TypicalUrban) > rms(EnvironmentKind::RuralArea));
        assert!(rms(EnvironmentKind::RuralArea) > rms(EnvironmentKind::UserDefined));
        assert_eq!(rms(EnvironmentKind::AwgnOnly), 0.0);
    }

    #[test]
    fn unknown_environment_rejected() {
        assert!(matches!(
            build_environment_by_name("Suburban"),
            Err(Error::InvalidArgument(_))
        ));
        assert_eq!(
            build_environment_by_name("Typical Urban").unwrap().kind,
            EnvironmentKind::TypicalUrban
        );
    }

    #[test]
    fn user_defined_profile_is_sorted_and_normalised() {
        let env = RadioEnvironment::user_defined(&[Tap::us(1.0, -3.0), Tap::us(0.0, 0.0)]).unwrap();
        assert_eq!(env.taps()[0].delay_s, 0.0);
        assert!((env.linear_powers().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(RadioEnvironment::user_defined(&[]).is_err());
        assert!(RadioEnvironment::user_defined(&[Tap::us(-1.0, 0.0)]).is_err());
    }

    #[test]
    fn doppler_at_default_settings() {
        let f = FadingConfig {
            speed_kmh: 3.0,
            carrier_ghz: 2.7,
            ..Default::default()
        };
        assert!((f.max_doppler_hz() - 7.505).abs() < 1e-3);
    }

    #[test]
    fn awgn_only_is_identity() {
        let env = build_environment(EnvironmentKind::AwgnOnly);
        let r = realize_channel(&env, &FadingConfig::default(), dims(), 4).unwrap();
        assert_eq!(r.gains, MimoGains::identity(dims()));
    }

    #[test]
    fn strong_los_is_constant() {
        let env = build_environment(EnvironmentKind::UserDefined);
        let fading = FadingConfig {
            k_factor: 1e9,
            ..Default::default()
        };
        let ch = FadingChannel::new(&env, &fading, dims(), 77).unwrap();
        for sf in [0, 5, 39] {
            let r = ch.realize(sf);
            for m in 0..2 {
                for rx in 0..2 {
                    for z in r.gains.link(m, rx) {
                        assert!((z.norm() - 1.0).abs() < 1e-3);
                    }
                }
            }
        }
    }

    #[test]
    fn realization_is_deterministic_and_finite() {
        let env = build_environment(EnvironmentKind::HillyTerrain);
        let fading = FadingConfig {
            tx_corr: 0.5,
            rx_corr: 0.5,
            ..Default::default()
        };
        let a = realize_channel(&env, &fading, dims(), 5).unwrap();
        let b = realize_channel(&env, &fading, dims(), 5).unwrap();
        let c = realize_channel(&env, &fading, dims(), 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.gains.is_finite());
    }

    #[test]
    fn invalid_fading_rejected() {
        let env = build_environment(EnvironmentKind::UserDefined);
        for bad in [
            FadingConfig {
                k_factor: -1.0,
                ..Default::default()
            },
            FadingConfig {
                tx_corr: 1.5,
                ..Default::default()
            },
            FadingConfig {
                carrier_ghz: 0.0,
                ..Default::default()
            },
        ] {
            assert!(FadingChannel::new(&env, &bad, dims(), 0).is_err());
        }
    }

    #[test]
    fn apply_channel_linearity() {
        let d = dims();
        let n = d.n_res();
        let env = build_environment(EnvironmentKind::TypicalUrban);
        let r = realize_channel(&env, &FadingConfig::default(), d, 1).unwrap();
        let mut rng = rng_from_seed(2);
        let mut rand_grid = || -> Vec<C64> {
            (0..n)
                .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect()
        };
        let x = [rand_grid(), rand_grid()];
        let x2 = [rand_grid(), rand_grid()];
        let sum = [
            x[0].iter()
                .zip(&x2[0])
                .map(|(a, b)| a + b)
                .collect::<Vec<_>>(),
            x[1].iter()
                .zip(&x2[1])
                .map(|(a, b)| a + b)
                .collect::<Vec<_>>(),
        ];
        let (ya, yb, ys) = (
            apply_channel(&x, &r).unwrap(),
            apply_channel(&x2, &r).unwrap(),
            apply_channel(&sum, &r).unwrap(),
        );
        for rx in 0..2 {
            for i in 0..n {
                assert!((ys[rx][i] - ya[rx][i] - yb[rx][i]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn apply_channel_basic_cases() {
        let d = dims();
        let n = d.n_res();
        let ident = ChannelRealization {
            gains: MimoGains::identity(d),
            seed: 0,
        };
        let x = [vec![C64::new(0.5, -0.5); n], vec![C64::new(-1.0, 2.0); n]];
        assert_eq!(apply_channel(&x, &ident).unwrap(), x);

        let zero = vec![C64::new(0.0, 0.0); n];
        let mut links = [
            [vec![C64::new(2.0, 0.0); n], zero.clone()],
            [zero.clone(), zero.clone()],
        ];
        links[0][0] = vec![C64::new(2.0, 0.0); n];
        let r = ChannelRealization {
            gains: MimoGains::new(d, links).unwrap(),
            seed: 0,
        };
        let s = C64::new(0.3, 0.4);
        let mut tx = [zero.clone(), zero.clone()];
        tx[0][7] = s;
        let y = apply_channel(&tx, &r).unwrap();
        assert_eq!(y[0][7], s * 2.0);
        assert_eq!(y[1][7], C64::new(0.0, 0.0));

        assert!(apply_channel(&[vec![], vec![]], &r).is_err());
    }

    #[test]
    fn awgn_bypass_and_determinism() {
        let x = vec![C64::new(1.0, -1.0); 10];
        assert_eq!(add_awgn(&x, f64::INFINITY, 1.0, 3).unwrap(), x);
        assert_eq!(
            add_awgn(&x, 3.0, 1.0, 9).unwrap(),
            add_awgn(&x, 3.0, 1.0, 9).unwrap()
        );
        assert!(add_awgn(&x, 3.0, 0.0, 9).is_err());
    }

    #[test]
    fn awgn_variance() {
        // Mean of 1e6 unit-mean exponential variates has sigma 1e-3, so 1% is 10 sigma.
        let n = 1_000_000;
        let y = add_awgn(&vec![C64::new(0.0, 0.0); n], 0.0, 1.0, 21).unwrap();
        let v = y.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
        assert!((v - 1.0).abs() < 0.01, "{v}");
    }
}
