//! Scenario files.
//!
//! A scenario file is TOML whose keys follow the parameter names of the
//! LTE settings tables. One file may list several modulations; it expands
//! into one [`ScenarioConfig`] per modulation.
//!
//! ```toml
//! name = "user_defined"
//! transmission_mode = "SFBC 2x2 Downlink"
//! resource_blocks = 6
//! bandwidth_mhz = 1.4
//! radio_environment = "User Defined"
//! modulation = [4, 16, 64]
//! snr_db = { start = 0, stop = 20, step = 2 }
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::channel::{build_environment, EnvironmentKind, FadingConfig, RadioEnvironment, Tap};
use crate::error::{Error, Result};
use crate::grid::{default_fft_size, Bandwidth, SUBCARRIERS_PER_RB};
use crate::harness::{ScenarioConfig, DEFAULT_TARGET_ERRORS};
use crate::modem::QamOrder;
use crate::pilots::CsiMode;
use crate::sfbc::{Combiner, Pairing};

pub const TRANSMISSION_MODE: &str = "SFBC 2x2 Downlink";

/// The configs described by one scenario file, one per modulation.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    pub name: String,
    pub configs: Vec<ScenarioConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum SnrSpec {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct UserTap {
    delay_us: f64,
    power_db: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: Option<String>,
    transmission_mode: Option<String>,
    tx_antenna_cross_correlation: Option<f64>,
    rx_antenna_cross_correlation: Option<f64>,
    mode_system: Option<String>,
    tdd_configuration: Option<u32>,
    resource_blocks: Option<usize>,
    bandwidth_mhz: Option<f64>,
    dft_size: Option<usize>,
    system_frequency_ghz: Option<f64>,
    structure: Option<String>,
    number_frames: Option<usize>,
    radio_channel_type: Option<String>,
    radio_environment: Option<String>,
    k_factor: Option<f64>,
    mobile_speed_kmh: Option<f64>,
    modulation: Option<OneOrMany<u32>>,
    pairing: Option<String>,
    csi: Option<String>,
    combiner: Option<String>,
    snr_db: Option<SnrSpec>,
    min_bits: Option<u64>,
    max_bits: Option<u64>,
    target_errors: Option<u64>,
    seed: Option<u64>,
    user_taps: Option<Vec<UserTap>>,
}

fn field<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Config { .. } => e,
        Error::InvalidArgument(m) => Error::config(name, m),
        other => Error::config(name, other.to_string()),
    })
}

fn expand_snr(spec: SnrSpec) -> Result<Vec<f64>> {
    match spec {
        SnrSpec::List(v) => Ok(v),
        SnrSpec::Range { start, stop, step } => {
            if step.is_nan() || step <= 0.0 || !start.is_finite() || !stop.is_finite() {
                return Err(Error::config(
                    "snr_db",
                    "range needs finite start/stop and step > 0",
                ));
            }
            if stop < start {
                return Err(Error::config("snr_db", "range stop is below start"));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            if n > 10_000 {
                return Err(Error::config("snr_db", "range has too many points"));
            }
            Ok((0..=n).map(|i| start + i as f64 * step).collect())
        }
    }
}

fn check_literal(name: &str, value: Option<&str>, allowed: &[&str]) -> Result<()> {
    match value {
        Some(v) if !allowed.iter().any(|a| a.eq_ignore_ascii_case(v.trim())) => Err(Error::config(
            name,
            format!("`{v}` is not supported (expected {})", allowed.join(" or ")),
        )),
        _ => Ok(()),
    }
}

fn resolve_bandwidth(rb: Option<usize>, mhz: Option<f64>) -> Result<Bandwidth> {
    match (rb, mhz) {
        (None, None) => Ok(Bandwidth::Mhz1_4),
        (Some(rb), None) => field("resource_blocks", Bandwidth::from_n_rb(rb)),
        (None, Some(mhz)) => field("bandwidth_mhz", Bandwidth::from_mhz(mhz)),
        (Some(rb), Some(mhz)) => {
            let bw = field("bandwidth_mhz", Bandwidth::from_mhz(mhz))?;
            if bw.n_rb() != rb {
                return Err(Error::config(
                    "resource_blocks",
                    format!(
                        "{rb} resource blocks does not match {bw} (expects {})",
                        bw.n_rb()
                    ),
                ));
            }
            Ok(bw)
        }
    }
}

fn resolve_environment(name: Option<&str>, taps: Option<Vec<UserTap>>) -> Result<RadioEnvironment> {
    let kind: EnvironmentKind = match name {
        Some(n) => field("radio_environment", n.parse())?,
        None => EnvironmentKind::UserDefined,
    };
    match taps {
        Some(taps) => {
            if kind != EnvironmentKind::UserDefined {
                return Err(Error::config(
                    "user_taps",
                    "only allowed with the User Defined environment",
                ));
            }
            let taps: Vec<Tap> = taps
                .iter()
                .map(|t| Tap {
                    delay_s: t.delay_us * 1e-6,
                    power_db: t.power_db,
                })
                .collect();
            field("user_taps", RadioEnvironment::user_defined(&taps))
        }
        None => Ok(build_environment(kind)),
    }
}

impl ScenarioFile {
    fn into_set(self) -> Result<ScenarioSet> {
        check_literal(
            "transmission_mode",
            self.transmission_mode.as_deref(),
            &[TRANSMISSION_MODE],
        )?;
        check_literal("mode_system", self.mode_system.as_deref(), &["FDD"])?;
        if let Some(t) = self.tdd_configuration {
            if t != 0 {
                return Err(Error::config("tdd_configuration", "only 0 is supported"));
            }
        }
        check_literal("structure", self.structure.as_deref(), &["Frame"])?;
        check_literal(
            "radio_channel_type",
            self.radio_channel_type.as_deref(),
            &["Rayleigh", "Rician"],
        )?;

        let bandwidth = resolve_bandwidth(self.resource_blocks, self.bandwidth_mhz)?;
        let environment = resolve_environment(self.radio_environment.as_deref(), self.user_taps)?;
        let modulations: Vec<QamOrder> = match self.modulation {
            None => QamOrder::ALL.to_vec(),
            Some(OneOrMany::One(m)) => vec![field("modulation", QamOrder::try_from(m))?],
            Some(OneOrMany::Many(ms)) => ms
                .into_iter()
                .map(|m| field("modulation", QamOrder::try_from(m)))
                .collect::<Result<_>>()?,
        };
        if modulations.is_empty() {
            return Err(Error::config("modulation", "list is empty"));
        }
        let snr_db = expand_snr(
            self.snr_db
                .ok_or_else(|| Error::config("snr_db", "missing SNR list"))?,
        )?;
        let csi: CsiMode = match self.csi {
            Some(s) => field("csi", s.parse())?,
            None => CsiMode::Estimated,
        };
        let combiner = match self.combiner {
            Some(s) => field("combiner", s.parse())?,
            None => Combiner::default_for(csi),
        };
        let pairing = match self.pairing {
            Some(s) => field("pairing", s.parse())?,
            None => Pairing::Mirror,
        };
        let n_sc = bandwidth.n_rb() * SUBCARRIERS_PER_RB;
        let defaults = FadingConfig {
            k_factor: 1000.0,
            tx_corr: 0.5,
            rx_corr: 0.5,
            ..FadingConfig::default()
        };
        let fading = FadingConfig {
            k_factor: self.k_factor.unwrap_or(defaults.k_factor),
            speed_kmh: self.mobile_speed_kmh.unwrap_or(defaults.speed_kmh),
            carrier_ghz: self.system_frequency_ghz.unwrap_or(defaults.carrier_ghz),
            tx_corr: self
                .tx_antenna_cross_correlation
                .unwrap_or(defaults.tx_corr),
            rx_corr: self
                .rx_antenna_cross_correlation
                .unwrap_or(defaults.rx_corr),
        };
        let name = self
            .name
            .unwrap_or_else(|| environment.kind.name().to_string());

        let configs = modulations
            .into_iter()
            .map(|m| {
                let mut c = ScenarioConfig::new(name.clone(), m, environment.clone());
                c.bandwidth = bandwidth;
                c.fft_size = self.dft_size.unwrap_or_else(|| default_fft_size(n_sc));
                c.n_frames = self.number_frames.unwrap_or(c.n_frames);
                c.fading = fading;
                c.pairing = pairing;
                c.csi = csi;
                c.combiner = combiner;
                c.snr_db = snr_db.clone();
                c.min_bits = self.min_bits.unwrap_or(c.min_bits);
                c.max_bits = self.max_bits.unwrap_or(c.max_bits.max(c.min_bits));
                c.target_errors = self.target_errors.unwrap_or(DEFAULT_TARGET_ERRORS);
                c.seed = self.seed.unwrap_or(c.seed);
                c.validate()?;
                Ok(c)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ScenarioSet { name, configs })
    }
}

/// Parses scenario text.
pub fn parse_config(text: &str) -> Result<ScenarioSet> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| {
        let message = e.message().to_string();
        let field = message
            .split('`')
            .nth(1)
            .filter(|_| message.starts_with("unknown field"))
            .unwrap_or("<file>")
            .to_string();
        Error::config(field, e.to_string().trim_end().to_string())
    })?;
    file.into_set()
}

/// Reads and parses a scenario file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SETTINGS: &str = r#"
        transmission_mode = "SFBC 2x2 Downlink"
        tx_antenna_cross_correlation = 0.5
        rx_antenna_cross_correlation = 0.5
        mode_system = "FDD"
        tdd_configuration = 0
        resource_blocks = 6
        bandwidth_mhz = 1.4
        system_frequency_ghz = 2.7
        structure = "Frame"
        number_frames = 4
        radio_channel_type = "Rayleigh"
        radio_environment = "User Defined"
        k_factor = 1000
        mobile_speed_kmh = 3
        snr_db = [0, 5, 10]
    "#;

    #[test]
    fn full_settings_file_parses() {
        let set = parse_config(SETTINGS).unwrap();
        assert_eq!(set.configs.len(), 3);
        let c = &set.configs[0];
        assert_eq!(c.bandwidth, Bandwidth::Mhz1_4);
        assert_eq!(c.fft_size, 128);
        assert_eq!(c.n_frames, 4);
        assert_eq!(c.environment.kind, EnvironmentKind::UserDefined);
        assert_eq!(c.fading.k_factor, 1000.0);
        assert_eq!(c.snr_db, vec![0.0, 5.0, 10.0]);
        assert_eq!(c.combiner, Combiner::Alamouti);
    }

    #[test]
    fn rb_bandwidth_mismatch() {
        let text = SETTINGS.replace("bandwidth_mhz = 1.4", "bandwidth_mhz = 20");
        let err = parse_config(&text).unwrap_err();
        assert!(
            matches!(err, Error::Config { ref field, .. } if field == "resource_blocks"),
            "{err}"
        );
    }

    #[test]
    fn missing_snr() {
        let text = SETTINGS.replace("snr_db = [0, 5, 10]", "");
        let err = parse_config(&text).unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "snr_db"));
    }

    #[test]
    fn unknown_field() {
        let err = parse_config(&format!("{SETTINGS}\nbogus = 1\n")).unwrap_err();
        assert!(
            matches!(err, Error::Config { ref field, .. } if field == "bogus"),
            "{err}"
        );
    }

    #[test]
    fn snr_range() {
        let text = SETTINGS.replace(
            "snr_db = [0, 5, 10]",
            "snr_db = { start = 0, stop = 4, step = 2 }",
        );
        assert_eq!(
            parse_config(&text).unwrap().configs[0].snr_db,
            vec![0.0, 2.0, 4.0]
        );
    }

    #[test]
    fn tdd_rejected() {
        let text = SETTINGS.replace("\"FDD\"", "\"TDD\"");
        assert!(parse_config(&text).unwrap_err().is_config());
    }

    #[test]
    fn user_taps() {
        let text = format!(
            "{SETTINGS}\nmodulation = 16\n[[user_taps]]\ndelay_us = 0\npower_db = 0\n[[user_taps]]\ndelay_us = 1\npower_db = -3\n"
        );
        let set = parse_config(&text).unwrap();
        assert_eq!(set.configs.len(), 1);
        assert_eq!(set.configs[0].environment.taps().len(), 2);
    }

    #[test]
    fn bad_modulation() {
        let text = format!("{SETTINGS}\nmodulation = 8\n");
        let err = parse_config(&text).unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "modulation"));
    }
}
