//! Strategy-proofness fuzzer: a doctor misreports her list (truncation or
//! transposition, half and half) and her match under the lie is compared to
//! her truthful match using her true preferences. All three mechanisms are
//! expected to admit no profitable misreport.

use clap::ValueEnum;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::Serialize;

use super::gen::{generate_with_rng, GeneratorConfig, GeneratorError};
use crate::mechanisms::{run_da, run_fda, run_jrmp, CapacityProfile};
use crate::model::{doctor_utility, DoctorId, HospitalId, Instance, Matching};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    /// Deferred acceptance under physical capacities.
    Da,
    /// Deferred acceptance under target capacities.
    Jrmp,
    /// Flexible deferred acceptance.
    Fda,
}

pub fn run_mechanism(mech: Mechanism, inst: &Instance) -> Matching {
    match mech {
        Mechanism::Da => run_da(inst, &CapacityProfile::physical(inst))
            .expect("physical profile covers every hospital"),
        Mechanism::Jrmp => run_jrmp(inst),
        Mechanism::Fda => run_fda(inst),
    }
}

/// A profitable misreport, replayable from the embedded instance.
#[derive(Debug, Clone, Serialize)]
pub struct SpViolation {
    pub trial: u64,
    pub mechanism: Mechanism,
    pub doctor: DoctorId,
    pub misreport: Vec<HospitalId>,
    pub truthful_match: Option<HospitalId>,
    pub misreport_match: Option<HospitalId>,
    pub instance: serde_json::Value,
}

fn misreport(truth: &[HospitalId], rng: &mut ChaCha8Rng) -> Vec<HospitalId> {
    let mut lie = truth.to_vec();
    if rng.gen_bool(0.5) {
        if !lie.is_empty() {
            lie.truncate(rng.gen_range(0..lie.len()));
        }
    } else if lie.len() >= 2 {
        let i = rng.gen_range(0..lie.len());
        let mut j = rng.gen_range(0..lie.len() - 1);
        if j >= i {
            j += 1;
        }
        lie.swap(i, j);
    }
    lie
}

fn run_trial(
    mech: Mechanism,
    cfg: &GeneratorConfig,
    trial: u64,
) -> Result<Option<SpViolation>, GeneratorError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(trial);
    let inst = generate_with_rng(cfg, &mut rng)?;
    if inst.doctors().is_empty() {
        return Ok(None);
    }
    let doctor = inst.doctors()[rng.gen_range(0..inst.doctors().len())].clone();
    let lie = misreport(inst.doctor_prefs(&doctor), &mut rng);
    let lie_inst = inst
        .with_doctor_prefs(&doctor, lie.clone())
        .expect("misreport only names existing hospitals");

    let truthful = run_mechanism(mech, &inst);
    let lied = run_mechanism(mech, &lie_inst);
    let u_truth = doctor_utility(&inst, &doctor, truthful.hospital_of(&doctor));
    let u_lie = doctor_utility(&inst, &doctor, lied.hospital_of(&doctor));
    if u_lie > u_truth {
        return Ok(Some(SpViolation {
            trial,
            mechanism: mech,
            doctor: doctor.clone(),
            misreport: lie,
            truthful_match: truthful.hospital_of(&doctor).cloned(),
            misreport_match: lied.hospital_of(&doctor).cloned(),
            instance: inst.to_json_value(),
        }));
    }
    Ok(None)
}

/// Runs `trials` misreport trials; returns every strict improvement found
/// (expected: none). Dispatches to the rayon path when built with the
/// `parallel` feature.
pub fn fuzz_strategyproofness(
    mech: Mechanism,
    cfg: &GeneratorConfig,
    trials: u64,
) -> Result<Vec<SpViolation>, GeneratorError> {
    #[cfg(feature = "parallel")]
    {
        fuzz_strategyproofness_par(mech, cfg, trials)
    }
    #[cfg(not(feature = "parallel"))]
    {
        fuzz_strategyproofness_seq(mech, cfg, trials)
    }
}

pub fn fuzz_strategyproofness_seq(
    mech: Mechanism,
    cfg: &GeneratorConfig,
    trials: u64,
) -> Result<Vec<SpViolation>, GeneratorError> {
    let mut out = Vec::new();
    for trial in 0..trials {
        if let Some(v) = run_trial(mech, cfg, trial)? {
            out.push(v);
        }
    }
    Ok(out)
}

#[cfg(feature = "parallel")]
pub fn fuzz_strategyproofness_par(
    mech: Mechanism,
    cfg: &GeneratorConfig,
    trials: u64,
) -> Result<Vec<SpViolation>, GeneratorError> {
    let results: Vec<_> = (0..trials)
        .into_par_iter()
        .map(|trial| run_trial(mech, cfg, trial))
        .collect();
    let mut out = Vec::new();
    for r in results {
        if let Some(v) = r? {
            out.push(v);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_trials_no_violations() {
        let cfg = GeneratorConfig::default();
        assert!(fuzz_strategyproofness_seq(Mechanism::Da, &cfg, 0)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn short_fuzz_finds_no_profitable_misreport() {
        let cfg = GeneratorConfig {
            seed: 11,
            ..Default::default()
        };
        for mech in [Mechanism::Da, Mechanism::Jrmp, Mechanism::Fda] {
            let violations = fuzz_strategyproofness_seq(mech, &cfg, 200).unwrap();
            assert!(violations.is_empty(), "{mech:?}: {violations:?}");
        }
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_and_sequential_fuzz_agree() {
        let cfg = GeneratorConfig {
            seed: 3,
            ..Default::default()
        };
        let seq = fuzz_strategyproofness_seq(Mechanism::Fda, &cfg, 100).unwrap();
        let par = fuzz_strategyproofness_par(Mechanism::Fda, &cfg, 100).unwrap();
        assert_eq!(seq.len(), par.len());
    }

    #[test]
    fn misreports_stay_within_known_hospitals() {
        let cfg = GeneratorConfig {
            seed: 5,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let inst = super::super::generate_instance(&cfg).unwrap();
        for d in inst.doctors() {
            let lie = misreport(inst.doctor_prefs(d), &mut rng);
            assert!(lie.iter().all(|h| inst.get_hospital(h).is_some()));
        }
    }
}
