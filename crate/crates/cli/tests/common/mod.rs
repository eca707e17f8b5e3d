#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use distelect_core::ingest::save_cells;
use distelect_core::{CellMeta, EVAllocation, ShareDistribution};

pub const C1: &str = "Avery Stone";
pub const C2: &str = "Blake Rivers";

pub fn e2e(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/e2e").join(name)
}

/// Runs the binary with no API key in its environment unless `env` sets one.
pub fn run(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_distelect"));
    cmd.args(args).env_remove("DISTELECT_API_KEY");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[track_caller]
pub fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        stdout(out),
        stderr(out)
    );
}

pub fn meta(state: &str, candidate: &str, opponent: &str, year: i32) -> CellMeta {
    CellMeta {
        state: state.into(),
        candidate: candidate.into(),
        opponent: opponent.into(),
        year,
        model: "fixture-model".into(),
        prompt_fingerprint: String::new(),
    }
}

/// Point-mass cells in both directions for every bundled state.
pub fn sweep_cells(c1: &str, c2: &str, year: i32, c1_share: u8, c2_share: u8) -> Vec<ShareDistribution> {
    let mut cells = Vec::new();
    for state in EVAllocation::for_year(year).states() {
        cells.push(ShareDistribution::point(c1_share, 1.0, meta(state, c1, c2, year)).unwrap());
        cells.push(ShareDistribution::point(c2_share, 1.0, meta(state, c2, c1, year)).unwrap());
    }
    cells
}

pub fn write_store(dir: &Path, name: &str, cells: &[ShareDistribution]) -> PathBuf {
    let path = dir.join(name);
    save_cells(cells, &path).unwrap();
    path
}
