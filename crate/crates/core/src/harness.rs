//! End-to-end trials and SNR sweeps.
//!
//! One trial transmits `n_frames` radio frames (10 subframes each) through
//! the complete chain. A sweep point keeps adding trials until it has at
//! least `min_bits` bits and either `target_errors` errors or `max_bits`
//! bits. Trials are evaluated in parallel waves but folded in trial order,
//! so the stopping decision, and therefore every record, is independent of
//! the worker count.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{add_awgn, apply_channel, FadingChannel, FadingConfig, RadioEnvironment};
use crate::error::{Error, Result, StageExt};
use crate::grid::{
    strip_padding, zero_pad, Bandwidth, GridDimensions, OfdmModem, ReKind, ResourceGrid,
    SUBFRAMES_PER_FRAME,
};
use crate::modem::{bit_errors, generate_bits, QamConstellation, QamOrder};
use crate::pilots::{channel_state, insert_pilots, CsiMode, PilotPattern};
use crate::rng::{derive, stream_seed, trial_seed, Stream};
use crate::sfbc::{
    pair_positions, sfbc_decode, sfbc_decode_ls, sfbc_encode, Combiner, PairChannel, Pairing,
};
use crate::C64;

/// Amplitude applied to each transmit antenna so total transmit power
/// matches a single antenna.
pub const POWER_SPLIT: f64 = std::f64::consts::FRAC_1_SQRT_2;
pub const DEFAULT_TARGET_ERRORS: u64 = 100;
pub const MIN_BITS_FLOOR: u64 = 10_000;
/// Upper bound on trials evaluated speculatively per wave.
const MAX_WAVE: usize = 8;

/// Everything needed to run one modulation over one environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub modulation: QamOrder,
    pub bandwidth: Bandwidth,
    pub fft_size: usize,
    pub n_frames: usize,
    pub environment: RadioEnvironment,
    pub fading: FadingConfig,
    pub pairing: Pairing,
    pub csi: CsiMode,
    pub combiner: Combiner,
    pub snr_db: Vec<f64>,
    pub min_bits: u64,
    pub max_bits: u64,
    pub target_errors: u64,
    pub seed: u64,
}

impl ScenarioConfig {
    /// Default 1.4 MHz link settings for `environment` and `modulation`.
    pub fn new(
        name: impl Into<String>,
        modulation: QamOrder,
        environment: RadioEnvironment,
    ) -> Self {
        let bandwidth = Bandwidth::Mhz1_4;
        let n_sc = bandwidth.n_rb() * crate::grid::SUBCARRIERS_PER_RB;
        Self {
            name: name.into(),
            modulation,
            bandwidth,
            fft_size: crate::grid::default_fft_size(n_sc),
            n_frames: 4,
            environment,
            fading: FadingConfig {
                k_factor: 1000.0,
                speed_kmh: 3.0,
                carrier_ghz: 2.7,
                tx_corr: 0.5,
                rx_corr: 0.5,
            },
            pairing: Pairing::Mirror,
            csi: CsiMode::Estimated,
            combiner: Combiner::default_for(CsiMode::Estimated),
            snr_db: vec![0.0],
            min_bits: 100_000,
            max_bits: 1_000_000,
            target_errors: DEFAULT_TARGET_ERRORS,
            seed: 1,
        }
    }

    pub fn dims(&self) -> Result<GridDimensions> {
        GridDimensions::with_fft_size(self.bandwidth.n_rb(), self.fft_size)
    }

    pub fn validate(&self) -> Result<()> {
        self.dims()
            .map_err(|e| Error::config("dft_size", e.to_string()))?;
        self.fading
            .validate()
            .map_err(|e| Error::config("fading", e.to_string()))?;
        if self.snr_db.is_empty() {
            return Err(Error::config("snr_db", "SNR list is empty"));
        }
        if self.snr_db.iter().any(|s| s.is_nan()) {
            return Err(Error::config("snr_db", "SNR values must be numbers"));
        }
        if self.n_frames == 0 {
            return Err(Error::config("number_frames", "must be at least 1"));
        }
        if self.min_bits < MIN_BITS_FLOOR {
            return Err(Error::config(
                "min_bits",
                format!("must be at least {MIN_BITS_FLOOR}"),
            ));
        }
        if self.max_bits < self.min_bits {
            return Err(Error::config("max_bits", "must not be below min_bits"));
        }
        Ok(())
    }

    /// Hex prefix of the SHA-256 of the canonical JSON encoding.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serialises");
        hex::encode(Sha256::digest(&json))[..16].to_string()
    }

    /// Human-readable curve label.
    pub fn label(&self) -> String {
        format!("{} {}", self.modulation, self.environment.kind)
    }
}

/// Bits sent and errors counted by one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrialOutcome {
    pub bits: u64,
    pub errors: u64,
}

/// One sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct BerRecord {
    pub snr_db: f64,
    pub total_bits: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub n_trials: u64,
    /// Master seed of the sweep.
    pub seed: u64,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointFailure {
    pub snr_db: f64,
    pub snr_index: usize,
    pub message: String,
}

pub type PointResult = std::result::Result<BerRecord, PointFailure>;

/// Precomputed per-scenario state shared by all trials.
#[derive(Debug, Clone)]
pub struct TrialRunner {
    config: ScenarioConfig,
    dims: GridDimensions,
    pattern: PilotPattern,
    data_subcarriers: Vec<Vec<usize>>,
    pairs: Vec<Vec<(usize, usize)>>,
    constellation: QamConstellation,
    ofdm: OfdmModem,
}

impl TrialRunner {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let dims = config.dims()?;
        let pattern = PilotPattern::lte(dims);
        let data_subcarriers: Vec<Vec<usize>> = (0..dims.n_symbols())
            .map(|s| pattern.data_subcarriers(s))
            .collect();
        let pairs = data_subcarriers
            .iter()
            .map(|sc| pair_positions(sc.len(), config.pairing))
            .collect::<Result<_>>()?;
        Ok(Self {
            config: config.clone(),
            dims,
            pattern,
            data_subcarriers,
            pairs,
            constellation: QamConstellation::new(config.modulation),
            ofdm: OfdmModem::for_grid(&dims)?,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn subframes_per_trial(&self) -> usize {
        self.config.n_frames * SUBFRAMES_PER_FRAME
    }

    pub fn bits_per_trial(&self) -> u64 {
        (self.subframes_per_trial()
            * self.pattern.data_res_per_subframe()
            * self.config.modulation.bits_per_symbol()) as u64
    }

    /// Runs the full chain once. `snr_db = +inf` disables the noise.
    pub fn run(&self, snr_db: f64, seed: u64) -> Result<TrialOutcome> {
        let cfg = &self.config;
        let dims = self.dims;
        let n_bits = self.bits_per_trial() as usize;
        let bits = generate_bits(n_bits, stream_seed(seed, Stream::Bits)).stage("generate_bits")?;
        let symbols = self.constellation.modulate(&bits.bits).stage("modulate")?;
        let fading = FadingChannel::new(
            &cfg.environment,
            &cfg.fading,
            dims,
            stream_seed(seed, Stream::Channel),
        )
        .stage("realize_channel")?;
        let pilot_base = stream_seed(seed, Stream::Pilots);
        let noise_base = stream_seed(seed, Stream::Noise);
        let reference_power = cfg.environment.expected_rx_power();

        let mut estimates = Vec::with_capacity(symbols.len());
        let mut cursor = 0;
        for sf in 0..self.subframes_per_trial() {
            let pilot_seed = derive(pilot_base, sf as u64);
            let mut grid = insert_pilots(ResourceGrid::new(dims), &self.pattern, pilot_seed)
                .stage("insert_pilots")?;
            for (sym, sc) in self.data_subcarriers.iter().enumerate() {
                let chunk = &symbols[cursor..cursor + sc.len()];
                cursor += sc.len();
                let pairs: Vec<(C64, C64)> = chunk.chunks_exact(2).map(|p| (p[0], p[1])).collect();
                let ant = sfbc_encode(&pairs, cfg.pairing, sc.len()).stage("sfbc_encode")?;
                for (m, values) in ant.iter().enumerate() {
                    for (&k, &v) in sc.iter().zip(values) {
                        grid.place(m, k, sym, ReKind::Data, v * POWER_SPLIT)
                            .stage("map_data")?;
                    }
                }
            }

            let realization = fading.realize(sf);
            let tx = grid.into_ports();
            let faded = apply_channel(&tx, &realization).stage("apply_channel")?;
            let mut received: [Vec<C64>; 2] = Default::default();
            for (r, rx) in faded.iter().enumerate() {
                let noise_seed = derive(noise_base, (2 * sf + r) as u64);
                received[r] = self.ofdm_link(rx, snr_db, reference_power, noise_seed)?;
            }

            let csi = channel_state(cfg.csi, &received, &self.pattern, pilot_seed, &realization)
                .stage("estimate_channel")?;
            let gains = csi.gains();
            for (sym, sc) in self.data_subcarriers.iter().enumerate() {
                for (p, &(j0, j1)) in self.pairs[sym].iter().enumerate() {
                    let (k0, k1) = (sc[j0], sc[j1]);
                    let (i0, i1) = (dims.index(k0, sym), dims.index(k1, sym));
                    let y = [
                        [received[0][i0], received[1][i0]],
                        [received[0][i1], received[1][i1]],
                    ];
                    let h0 = PairChannel::new(gains.at(k0, sym)).scaled(POWER_SPLIT);
                    let decoded = match cfg.combiner {
                        Combiner::Alamouti => sfbc_decode(&y, &h0),
                        Combiner::LeastSquares => {
                            let h1 = PairChannel::new(gains.at(k1, sym)).scaled(POWER_SPLIT);
                            sfbc_decode_ls(&y, &h0, &h1)
                        }
                    };
                    let (x0, x1) = decoded
                        .map_err(|e| match e {
                            Error::DecodeFailure { .. } => Error::DecodeFailure {
                                pair: estimates.len() / 2 + p,
                            },
                            other => other,
                        })
                        .stage("sfbc_decode")?;
                    estimates.push(x0);
                    estimates.push(x1);
                }
            }
        }
        if cursor != symbols.len() || estimates.len() != symbols.len() {
            return Err(Error::Internal("symbol bookkeeping mismatch".into()));
        }
        let received_bits = self.constellation.demodulate(&estimates);
        let errs = bit_errors(&bits.bits, &received_bits).stage("bit_errors")?;
        Ok(TrialOutcome {
            bits: n_bits as u64,
            errors: errs.errors,
        })
    }

    /// Zero pad, IFFT + CP, AWGN, CP removal + FFT, strip padding for one
    /// receive antenna's grid.
    fn ofdm_link(
        &self,
        grid: &[C64],
        snr_db: f64,
        reference_power: f64,
        seed: u64,
    ) -> Result<Vec<C64>> {
        let n_sc = self.dims.n_subcarriers();
        let sym_len = self.ofdm.symbol_len();
        let mut time = Vec::with_capacity(self.dims.n_symbols() * sym_len);
        for column in grid.chunks_exact(n_sc) {
            let padded = zero_pad(column, self.ofdm.fft_size()).stage("zero_pad")?;
            time.extend(self.ofdm.modulate(&padded).stage("ofdm_modulate")?);
        }
        let noisy = add_awgn(&time, snr_db, reference_power, seed).stage("add_awgn")?;
        let mut out = Vec::with_capacity(grid.len());
        for samples in noisy.chunks_exact(sym_len) {
            let spectrum = self.ofdm.demodulate(samples).stage("ofdm_demodulate")?;
            out.extend(strip_padding(&spectrum, n_sc).stage("ofdm_demodulate")?);
        }
        Ok(out)
    }
}

/// One trial of `config` at `snr_db`.
pub fn run_trial(config: &ScenarioConfig, snr_db: f64, trial_seed: u64) -> Result<TrialOutcome> {
    TrialRunner::new(config)?.run(snr_db, trial_seed)
}

/// Single-antenna QAM over AWGN with no grid, OFDM or fading: the reference
/// path for checking the modem against closed-form error rates.
pub fn run_siso_awgn(
    order: QamOrder,
    snr_db: f64,
    n_symbols: usize,
    seed: u64,
) -> Result<TrialOutcome> {
    let constellation = QamConstellation::new(order);
    let n_bits = n_symbols * order.bits_per_symbol();
    let bits = generate_bits(n_bits, stream_seed(seed, Stream::Bits))?;
    let tx = constellation.modulate(&bits.bits)?;
    let rx = add_awgn(&tx, snr_db, 1.0, stream_seed(seed, Stream::Noise))?;
    let errs = bit_errors(&bits.bits, &constellation.demodulate(&rx))?;
    Ok(TrialOutcome {
        bits: n_bits as u64,
        errors: errs.errors,
    })
}

/// Runs every SNR point on the global rayon pool.
pub fn run_sweep(config: &ScenarioConfig) -> Result<Vec<PointResult>> {
    let runner = TrialRunner::new(config)?;
    Ok(sweep_points(&runner))
}

/// Runs every SNR point on a dedicated pool of `jobs` workers (`0` picks the
/// rayon default).
pub fn run_sweep_with_jobs(config: &ScenarioConfig, jobs: usize) -> Result<Vec<PointResult>> {
    let runner = TrialRunner::new(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Internal(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| sweep_points(&runner)))
}

fn sweep_points(runner: &TrialRunner) -> Vec<PointResult> {
    let cfg = runner.config();
    cfg.snr_db
        .par_iter()
        .enumerate()
        .map(|(i, &snr)| {
            run_point(runner, i, snr).map_err(|e| PointFailure {
                snr_db: snr,
                snr_index: i,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Accumulates trials for one SNR point under the stopping rule.
pub fn run_point(runner: &TrialRunner, snr_index: usize, snr_db: f64) -> Result<BerRecord> {
    let cfg = runner.config();
    let started = Instant::now();
    let per_trial = runner.bits_per_trial();
    let (mut bits, mut errors, mut trials) = (0u64, 0u64, 0u64);
    let done = |bits: u64, errors: u64| {
        bits >= cfg.min_bits && (errors >= cfg.target_errors || bits >= cfg.max_bits)
    };
    'waves: loop {
        // Enough trials to reach the next bit threshold, capped; depends only on
        // the accumulated counts.
        let goal = if bits < cfg.min_bits {
            cfg.min_bits
        } else {
            cfg.max_bits
        };
        let wave = ((goal - bits).div_ceil(per_trial) as usize).clamp(1, MAX_WAVE);
        let first = trials as usize;
        let outcomes: Vec<Result<TrialOutcome>> = (first..first + wave)
            .into_par_iter()
            .map(|t| runner.run(snr_db, trial_seed(cfg.seed, snr_index, t)))
            .collect();
        for outcome in outcomes {
            let o = outcome?;
            bits += o.bits;
            errors += o.errors;
            trials += 1;
            if done(bits, errors) {
                break 'waves;
            }
        }
    }
    Ok(BerRecord {
        snr_db,
        total_bits: bits,
        bit_errors: errors,
        ber: errors as f64 / bits as f64,
        n_trials: trials,
        seed: cfg.seed,
        wall_time: started.elapsed(),
    })
}
