use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sfbcsim"))
}

fn preset(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn run(cmd: &mut Command) -> Output {
    cmd.env_remove("SFBCSIM_SEED")
        .output()
        .expect("binary runs")
}

const SMALL: &str = r#"
name = "small"
resource_blocks = 6
bandwidth_mhz = 1.4
radio_environment = "Typical Urban"
number_frames = 1
modulation = [4, 16]
snr_db = [0, 10, 20]
min_bits = 10000
max_bits = 40000
seed = 5
"#;

fn small_config(dir: &Path) -> PathBuf {
    let p = dir.join("small.cfg");
    std::fs::write(&p, SMALL).unwrap();
    p
}

#[test]
fn validate_table4_preset() {
    let out = run(bin().arg("validate").arg(preset("table4_user_defined.cfg")));
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.contains("6 RB, FFT 128"));
}

#[test]
fn every_preset_validates() {
    for entry in std::fs::read_dir(preset("")).unwrap() {
        let path = entry.unwrap().path();
        let out = run(bin().arg("validate").arg(&path));
        assert_eq!(out.status.code(), Some(0), "{}", path.display());
    }
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let out = run(bin().arg("frobnicate"));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn help_exits_zero() {
    assert_eq!(run(bin().arg("--help")).status.code(), Some(0));
}

#[test]
fn invalid_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.cfg");
    std::fs::write(
        &p,
        SMALL.replace("bandwidth_mhz = 1.4", "bandwidth_mhz = 20"),
    )
    .unwrap();
    let out = run(bin().arg("validate").arg(&p));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("resource_blocks"));
    assert_eq!(
        run(bin().arg("sweep").arg(dir.path().join("missing.cfg")))
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn envs_lists_tap_tables() {
    let out = run(bin().arg("envs"));
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("HillyTerrain"));
    assert!(text.contains("17.20 us"));
}

fn sweep_csv(config: &Path, out: &Path, extra: &[&str]) -> String {
    let o = run(bin()
        .arg("sweep")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra));
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    std::fs::read_to_string(out.join("small_16qam.csv")).unwrap()
}

#[test]
fn jobs_do_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let a = sweep_csv(&cfg, &dir.path().join("a"), &["--jobs", "1"]);
    let b = sweep_csv(&cfg, &dir.path().join("b"), &["--jobs", "8"]);
    assert_eq!(a, b);
    assert!(a.starts_with("snr_db,total_bits,bit_errors,ber,n_trials,seed\n"));
    assert_eq!(a.lines().count(), 4);
}

#[test]
fn seed_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let file = sweep_csv(&cfg, &dir.path().join("file"), &[]);
    assert!(file.lines().nth(1).unwrap().ends_with(",5"));

    let o = bin()
        .arg("sweep")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("env"))
        .env("SFBCSIM_SEED", "77")
        .output()
        .unwrap();
    assert!(o.status.success());
    let env = std::fs::read_to_string(dir.path().join("env/small_16qam.csv")).unwrap();
    assert!(env.lines().nth(1).unwrap().ends_with(",77"));

    let o = bin()
        .arg("sweep")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("flag"))
        .args(["--seed", "9"])
        .env("SFBCSIM_SEED", "77")
        .output()
        .unwrap();
    assert!(o.status.success());
    let flag = std::fs::read_to_string(dir.path().join("flag/small_16qam.csv")).unwrap();
    assert!(flag.lines().nth(1).unwrap().ends_with(",9"));
}

#[test]
fn json_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("o");
    let o = run(bin()
        .arg("sweep")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["--format", "json", "--plot"]));
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let json = std::fs::read_to_string(out.join("small_4qam.json")).unwrap();
    assert!(json.contains("\"config_hash\""));
    let svg = std::fs::read_to_string(out.join("small.svg")).unwrap();
    assert_eq!(svg.matches("class=\"curve\"").count(), 2);
}
