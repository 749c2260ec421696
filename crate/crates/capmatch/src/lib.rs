//! Two-sided matching under regional caps.
//!
//! The crate implements three mechanisms for assigning doctors to hospitals
//! when each region of the market carries a cap on its total intake:
//!
//! - plain doctor-proposing deferred acceptance under an explicit per-hospital
//!   capacity profile ([`mechanisms::run_da`]),
//! - deferred acceptance under exogenous target capacities
//!   ([`mechanisms::run_jrmp`]),
//! - flexible deferred acceptance, which fills targets first and then grants
//!   the remaining regional seats round-robin ([`mechanisms::run_fda`]).
//!
//! Around the mechanisms sit brute-force oracles for feasibility, stability,
//! weak stability, constrained efficiency and doctor-optimality ([`verify`]),
//! an executable matching-with-contracts layer with choice functions, the
//! cumulative offer process, choice-axiom checkers and utility rationalizers
//! ([`contracts`]), and a random-instance harness with a strategy-proofness
//! fuzzer and an equivalence sweep ([`harness`]).
//!
//! Long sweeps run data-parallel through rayon by default; build with
//! `--no-default-features` for the sequential fallback.

pub mod contracts;
pub mod harness;
pub mod mechanisms;
pub mod model;
pub mod verify;

pub use model::{
    parse_instance, Distribution, DoctorId, HospitalId, Instance, InstanceError, Matching, RegionId,
};
