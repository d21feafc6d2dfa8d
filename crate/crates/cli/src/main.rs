use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use sfbc_sim::channel::{build_environment, EnvironmentKind};
use sfbc_sim::config::{load_config, ScenarioSet};
use sfbc_sim::harness::{run_sweep_with_jobs, BerRecord, ScenarioConfig};
use sfbc_sim::output::{emit_csv, emit_json, emit_plot, RecordSet};

const SEED_VAR: &str = "SFBCSIM_SEED";

#[derive(Parser)]
#[command(
    name = "sfbcsim",
    version,
    about = "LTE downlink SFBC 2x2 link-level BER simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a BER sweep for every modulation in a scenario file.
    Sweep {
        config: PathBuf,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Also write an SVG plot with one curve per modulation.
        #[arg(long)]
        plot: bool,
        /// Master seed; overrides SFBCSIM_SEED and the file.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (0 = one per core).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Check a scenario file without running it.
    Validate { config: PathBuf },
    /// List radio environments and their tap tables.
    Envs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

fn load(path: &Path) -> Result<ScenarioSet, Failure> {
    load_config(path)
        .with_context(|| format!("cannot load {}", path.display()))
        .map_err(Failure::Config)
}

fn resolve_seed(flag: Option<u64>) -> Result<Option<u64>, Failure> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(SEED_VAR) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| {
            Failure::Config(anyhow::anyhow!(
                "{SEED_VAR}=`{v}` is not an unsigned integer"
            ))
        }),
        Err(_) => Ok(None),
    }
}

fn file_stem(c: &ScenarioConfig) -> String {
    format!("{}_{}qam", c.name, c.modulation.order())
}

fn sweep(
    path: &Path,
    out: &Path,
    format: Format,
    plot: bool,
    seed: Option<u64>,
    jobs: usize,
) -> Result<(), Failure> {
    let mut set = load(path)?;
    if let Some(seed) = resolve_seed(seed)? {
        for c in &mut set.configs {
            c.seed = seed;
        }
    }
    std::fs::create_dir_all(out)
        .with_context(|| format!("cannot create {}", out.display()))
        .map_err(Failure::Runtime)?;

    let mut record_sets = Vec::new();
    let mut failures = 0;
    for c in &set.configs {
        let points = run_sweep_with_jobs(c, jobs)
            .with_context(|| c.label())
            .map_err(Failure::Runtime)?;
        let mut records: Vec<BerRecord> = Vec::new();
        for p in points {
            match p {
                Ok(r) => records.push(r),
                Err(f) => {
                    failures += 1;
                    eprintln!("{}: point {} dB failed: {}", c.label(), f.snr_db, f.message);
                }
            }
        }
        if records.is_empty() {
            continue;
        }
        let rs = RecordSet::new(c, &records);
        let file = match format {
            Format::Csv => {
                let f = out.join(format!("{}.csv", file_stem(c)));
                emit_csv(&records, &f).map(|_| f)
            }
            Format::Json => {
                let f = out.join(format!("{}.json", file_stem(c)));
                emit_json(&rs, &f).map(|_| f)
            }
        }
        .map_err(|e| Failure::Runtime(e.into()))?;
        eprintln!(
            "{}: wrote {} (config {})",
            c.label(),
            file.display(),
            rs.metadata.config_hash
        );
        record_sets.push(rs);
    }
    if plot && !record_sets.is_empty() {
        let f = out.join(format!("{}.svg", set.name));
        emit_plot(&record_sets, &f).map_err(|e| Failure::Runtime(e.into()))?;
        eprintln!("wrote {}", f.display());
    }
    if failures > 0 {
        return Err(Failure::Runtime(anyhow::anyhow!(
            "{failures} sweep point(s) failed"
        )));
    }
    Ok(())
}

fn validate(path: &Path) -> Result<(), Failure> {
    let set = load(path)?;
    for c in &set.configs {
        println!(
            "{}: {}, {} RB, FFT {}, {} frames, {} SNR points, seed {}, config {}",
            set.name,
            c.label(),
            c.bandwidth.n_rb(),
            c.fft_size,
            c.n_frames,
            c.snr_db.len(),
            c.seed,
            c.config_hash()
        );
    }
    Ok(())
}

fn envs() {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    for kind in EnvironmentKind::ALL {
        let env = build_environment(kind);
        let mut lines = vec![format!("{kind} (tap powers normalised to unit sum)")];
        for t in env.taps() {
            lines.push(format!(
                "  {:>6.2} us  {:>6.1} dB",
                t.delay_s * 1e6,
                t.power_db
            ));
        }
        if writeln!(out, "{}", lines.join("\n")).is_err() {
            return;
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Sweep {
            config,
            out,
            format,
            plot,
            seed,
            jobs,
        } => sweep(&config, &out, format, plot, seed, jobs),
        Command::Validate { config } => validate(&config),
        Command::Envs => {
            envs();
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
