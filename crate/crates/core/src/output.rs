//! CSV, JSON and SVG result files.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::{BerRecord, ScenarioConfig};

pub const FORMAT_VERSION: u32 = 1;
pub const CSV_HEADER: [&str; 6] = [
    "snr_db",
    "total_bits",
    "bit_errors",
    "ber",
    "n_trials",
    "seed",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordMetadata {
    pub name: String,
    pub label: String,
    pub modulation: u32,
    pub environment: String,
    pub config_hash: String,
    pub seed: u64,
    pub max_bits: u64,
    pub config: ScenarioConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordRow {
    pub snr_db: f64,
    pub total_bits: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub n_trials: u64,
    pub seed: u64,
}

impl From<&BerRecord> for RecordRow {
    fn from(r: &BerRecord) -> Self {
        Self {
            snr_db: r.snr_db,
            total_bits: r.total_bits,
            bit_errors: r.bit_errors,
            ber: r.ber,
            n_trials: r.n_trials,
            seed: r.seed,
        }
    }
}

/// The records of one sweep plus what is needed to rerun it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordSet {
    pub format_version: u32,
    pub metadata: RecordMetadata,
    pub records: Vec<RecordRow>,
}

impl RecordSet {
    pub fn new(config: &ScenarioConfig, records: &[BerRecord]) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            metadata: RecordMetadata {
                name: config.name.clone(),
                label: config.label(),
                modulation: config.modulation.order(),
                environment: config.environment.kind.name().to_string(),
                config_hash: config.config_hash(),
                seed: config.seed,
                max_bits: config.max_bits,
                config: config.clone(),
            },
            records: records.iter().map(RecordRow::from).collect(),
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// CSV text for `records`, header included.
pub fn csv_string(records: &[BerRecord]) -> Result<String> {
    if records.is_empty() {
        return Err(Error::invalid("no records to write"));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let internal = |e: csv::Error| Error::Internal(e.to_string());
    w.write_record(CSV_HEADER).map_err(internal)?;
    for r in records {
        w.write_record([
            r.snr_db.to_string(),
            r.total_bits.to_string(),
            r.bit_errors.to_string(),
            r.ber.to_string(),
            r.n_trials.to_string(),
            r.seed.to_string(),
        ])
        .map_err(internal)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Internal(e.to_string()))
}

pub fn emit_csv(records: &[BerRecord], path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), csv_string(records)?.as_bytes())
}

pub fn json_string(set: &RecordSet) -> Result<String> {
    if set.records.is_empty() {
        return Err(Error::invalid("no records to write"));
    }
    let mut s = serde_json::to_string_pretty(set).map_err(|e| Error::Internal(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn emit_json(set: &RecordSet, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), json_string(set)?.as_bytes())
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 170.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Semilog BER-vs-SNR figure with one curve per record set.
pub fn plot_svg(sets: &[RecordSet], title: &str) -> Result<String> {
    if sets.is_empty() || sets.iter().all(|s| s.records.is_empty()) {
        return Err(Error::invalid("nothing to plot"));
    }
    let floor = |s: &RecordSet| 1.0 / s.metadata.max_bits.max(1) as f64;
    let points = sets
        .iter()
        .flat_map(|s| s.records.iter().map(move |r| (s, r)));
    let (mut x_lo, mut x_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut y_lo = f64::INFINITY;
    for (s, r) in points.clone() {
        x_lo = x_lo.min(r.snr_db);
        x_hi = x_hi.max(r.snr_db);
        y_lo = y_lo.min(if r.ber > 0.0 { r.ber } else { floor(s) });
    }
    if x_hi <= x_lo {
        x_lo -= 1.0;
        x_hi += 1.0;
    }
    let dec_lo = y_lo.log10().floor().min(-1.0);
    let dec_hi = 0.0;
    let pw = WIDTH - MARGIN_L - MARGIN_R;
    let ph = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (x - x_lo) / (x_hi - x_lo) * pw;
    let sy = |y: f64| MARGIN_T + (dec_hi - y.log10()) / (dec_hi - dec_lo) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        MARGIN_L + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r##"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="#000"/>"##
    );
    for d in (dec_lo as i32)..=(dec_hi as i32) {
        let y = sy(10f64.powi(d));
        let _ = writeln!(
            svg,
            r##"<line x1="{MARGIN_L}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">1e{d}</text>"##,
            MARGIN_L + pw,
            MARGIN_L - 6.0,
            y + 4.0
        );
    }
    let span = x_hi - x_lo;
    let step = [1.0, 2.0, 5.0, 10.0, 20.0]
        .into_iter()
        .find(|s| span / s <= 10.0)
        .unwrap_or(50.0);
    let mut t = (x_lo / step).ceil() * step;
    while t <= x_hi + 1e-9 {
        let x = sx(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.1}" y1="{MARGIN_T}" x2="{x:.1}" y2="{:.1}" stroke="#ddd"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{t}</text>"##,
            MARGIN_T + ph,
            MARGIN_T + ph + 18.0
        );
        t += step;
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">SNR (dB)</text>"#,
        MARGIN_L + pw / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">BER</text>"#,
        MARGIN_T + ph / 2.0,
        MARGIN_T + ph / 2.0
    );

    for (i, set) in sets.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<(f64, f64, bool)> = set
            .records
            .iter()
            .map(|r| {
                let zero = r.ber <= 0.0;
                (
                    sx(r.snr_db),
                    sy(if zero { floor(set) } else { r.ber }),
                    zero,
                )
            })
            .collect();
        let path: Vec<String> = pts
            .iter()
            .map(|(x, y, _)| format!("{x:.1},{y:.1}"))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="curve" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            path.join(" ")
        );
        for (x, y, zero) in pts {
            if zero {
                let _ = writeln!(
                    svg,
                    r#"<path class="floor-marker" d="M{:.1},{:.1} L{x:.1},{:.1} L{:.1},{:.1} Z" fill="{color}"/>"#,
                    x - 4.0,
                    y - 6.0,
                    y,
                    x + 4.0,
                    y - 6.0
                );
            } else {
                let _ = writeln!(
                    svg,
                    r#"<circle cx="{x:.1}" cy="{y:.1}" r="3" fill="{color}"/>"#
                );
            }
        }
        let ly = MARGIN_T + 12.0 + 18.0 * i as f64;
        let lx = MARGIN_L + pw + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text class="legend" x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&set.metadata.label)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_plot(sets: &[RecordSet], path: impl AsRef<Path>) -> Result<()> {
    let title = match sets.first() {
        Some(s) if sets.iter().all(|o| o.metadata.name == s.metadata.name) => {
            s.metadata.name.clone()
        }
        _ => "BER vs SNR".to_string(),
    };
    write_file(path.as_ref(), plot_svg(sets, &title)?.as_bytes())
}
