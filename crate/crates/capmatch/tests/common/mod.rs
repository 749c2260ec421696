#![allow(dead_code)] // each test binary uses a different subset

//! Shared helpers for the integration suites: fixture loading, binary
//! invocation, and expected matchings for the worked three-hospital market.

use std::path::PathBuf;
use std::process::{Command, Output};

use capmatch::harness::GeneratorConfig;
use capmatch::model::{parse_instance, DoctorId, HospitalId, Instance, Matching};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn fixture_instance(name: &str) -> Instance {
    let text = std::fs::read_to_string(fixture_path(name)).expect("fixture exists");
    parse_instance(&text).expect("fixture parses")
}

pub fn capmatch_cmd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_capmatch"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf8 stdout")
}

pub fn matching(inst: &Instance, pairs: &[(&str, &str)]) -> Matching {
    Matching::from_pairs(
        inst,
        pairs
            .iter()
            .map(|(d, h)| (DoctorId::from(*d), HospitalId::from(*h))),
    )
}

/// Small markets for the property sweeps: at most 6 doctors, 5 hospitals,
/// 3 regions.
pub fn sweep_config(seed: u64) -> GeneratorConfig {
    GeneratorConfig {
        doctors: (0, 6),
        hospitals: (1, 5),
        regions: (1, 3),
        capacity: (1, 3),
        regional_cap: (0, 5),
        pref_len: (0, 5),
        seed,
        ..Default::default()
    }
}

/// Markets whose both-sides-acceptable contract universe stays at or below
/// twelve contracts.
pub fn small_universe_config(seed: u64) -> GeneratorConfig {
    GeneratorConfig {
        doctors: (3, 4),
        hospitals: (2, 3),
        regions: (1, 2),
        capacity: (1, 3),
        regional_cap: (0, 4),
        pref_len: (2, 3),
        seed,
        ..Default::default()
    }
}
