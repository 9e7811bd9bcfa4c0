#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use flexbeam::profile::PieceRecord;
use flexbeam_cli::config::{Channel, ProfileSpec, RunConfig};
use flexbeam_cli::Setup;

pub fn default_config_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml")
}

pub fn setup(config: &RunConfig) -> Setup {
    Setup::new(config, Path::new(".")).unwrap()
}

/// Raising channel tilted by `phi_r0`, so that gravity couples (`γ ≠ 0`).
pub fn raising(phi_r0: f64) -> RunConfig {
    let mut c = RunConfig::default();
    c.beam.channel = Channel::Raising;
    c.beam.phi_r0 = phi_r0;
    c
}

/// Turning channel with cubic equilibrium deflection `z0 = 0.01 x³`, tilted
/// so that `z0` enters the influence shape.
pub fn turning_cubic_z0() -> RunConfig {
    let mut c = RunConfig::default();
    c.beam.phi_r0 = 0.5;
    c.beam.z0 = pieces(&[(0.0, 1.0, [0.0, 0.0, 0.0, 0.01])]);
    c
}

/// Linearly graded density `2 − 0.8 x` on the turning channel.
pub fn graded_density() -> RunConfig {
    let mut c = RunConfig::default();
    c.beam.rho = pieces(&[(0.0, 1.0, [2.0, -0.8, 0.0, 0.0])]);
    c
}

pub fn pieces(records: &[(f64, f64, [f64; 4])]) -> ProfileSpec {
    ProfileSpec::Pieces(
        records
            .iter()
            .map(|&(x_start, x_end, coeffs)| PieceRecord { x_start, x_end, coeffs })
            .collect(),
    )
}

/// Writes `config` as TOML into `dir` and returns its path.
pub fn write_config(dir: &Path, config: &RunConfig) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, config.to_toml()).unwrap();
    path
}

pub fn flexbeam(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flexbeam"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}
