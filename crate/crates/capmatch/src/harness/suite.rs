//! The equivalence sweep: per instance it runs the target-capacity mechanism,
//! the flexible mechanism, and deferred acceptance under the adapted
//! capacities, then checks outcome equality, weak stability, constrained
//! efficiency (within enumeration bounds), and the doctor-welfare comparison.
//! Any failed check aborts the sweep with the offending instance serialized
//! for replay.

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::gen::{generate_indexed, GeneratorConfig, GeneratorError};
use crate::mechanisms::{fda_da_equivalence, run_jrmp};
use crate::model::{distribution_of, doctor_utility, Distribution, Instance};
use crate::verify::{is_constrained_efficient, is_feasible, is_weakly_stable, EnumBounds};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, Copy)]
pub struct SuiteOptions {
    pub bounds: EnumBounds,
    pub check_efficiency: bool,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            bounds: EnumBounds::default(),
            check_efficiency: true,
        }
    }
}

/// One sweep record; `welfare_delta` holds, per doctor in id order, the sign
/// of her utility change from the target-capacity outcome to the adapted one.
#[derive(Debug, Clone, Serialize)]
pub struct InstanceRecord {
    pub index: u64,
    pub digest: String,
    pub equal: bool,
    pub fda_feasible: bool,
    pub fda_weakly_stable: bool,
    pub fda_efficient: Verdict,
    pub jrmp_weakly_stable: bool,
    pub doctors_weakly_improve: Verdict,
    pub welfare_delta: Vec<i8>,
    pub jrmp: serde_json::Value,
    pub fda: serde_json::Value,
    pub da_adapted: serde_json::Value,
    pub distribution: Distribution,
}

/// A failed check, carrying the instance for replay.
#[derive(Debug, Error)]
#[error("suite failed at instance {index} ({check}); replay instance attached")]
pub struct SuiteFailure {
    pub index: u64,
    pub check: String,
    pub instance: serde_json::Value,
}

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error(transparent)]
    Failure(#[from] SuiteFailure),
}

/// Hex digest of the canonical instance serialization.
pub fn instance_digest(inst: &Instance) -> String {
    let hash = Sha256::digest(inst.to_json_string().as_bytes());
    hash.iter().take(6).map(|b| format!("{b:02x}")).collect()
}

/// Runs all per-instance checks; any failure becomes a [`SuiteFailure`].
pub fn evaluate_instance(
    inst: &Instance,
    index: u64,
    opts: &SuiteOptions,
) -> Result<InstanceRecord, SuiteFailure> {
    let fail = |check: &str| SuiteFailure {
        index,
        check: check.to_owned(),
        instance: inst.to_json_value(),
    };

    let jrmp = run_jrmp(inst);
    let outcome = fda_da_equivalence(inst);
    if !outcome.equal {
        return Err(fail("flexible/adapted-capacity outcome equality"));
    }
    if !is_feasible(&outcome.fda, inst) {
        return Err(fail("flexible outcome feasibility"));
    }
    if !is_weakly_stable(&outcome.fda, inst) {
        return Err(fail("flexible outcome weak stability"));
    }
    let fda_efficient = if opts.check_efficiency {
        match is_constrained_efficient(&outcome.fda, inst, opts.bounds) {
            Ok((true, _)) => Verdict::Pass,
            Ok((false, _)) => return Err(fail("flexible outcome constrained efficiency")),
            Err(_) => Verdict::Skipped,
        }
    } else {
        Verdict::Skipped
    };

    let jrmp_weakly_stable = is_weakly_stable(&jrmp, inst);
    let welfare_delta: Vec<i8> = inst
        .doctors()
        .iter()
        .map(|d| {
            let before = doctor_utility(inst, d, jrmp.hospital_of(d));
            let after = doctor_utility(inst, d, outcome.da.hospital_of(d));
            (after.cmp(&before) as i8).signum()
        })
        .collect();
    let doctors_weakly_improve = if jrmp_weakly_stable {
        if welfare_delta.iter().all(|s| *s >= 0) {
            Verdict::Pass
        } else {
            return Err(fail("doctor welfare comparison"));
        }
    } else {
        Verdict::Skipped
    };

    Ok(InstanceRecord {
        index,
        digest: instance_digest(inst),
        equal: outcome.equal,
        fda_feasible: true,
        fda_weakly_stable: true,
        fda_efficient,
        jrmp_weakly_stable,
        doctors_weakly_improve,
        welfare_delta,
        jrmp: jrmp.to_json_value(inst),
        fda: outcome.fda.to_json_value(inst),
        da_adapted: outcome.da.to_json_value(inst),
        distribution: distribution_of(&outcome.fda, inst),
    })
}

fn evaluate_indexed(
    cfg: &GeneratorConfig,
    index: u64,
    opts: &SuiteOptions,
) -> Result<InstanceRecord, SuiteError> {
    let inst = generate_indexed(cfg, index)?;
    Ok(evaluate_instance(&inst, index, opts)?)
}

/// Sweep records in index order; dispatches to rayon when available.
pub fn collect_records(
    cfg: &GeneratorConfig,
    n: u64,
    opts: &SuiteOptions,
) -> Result<Vec<InstanceRecord>, SuiteError> {
    #[cfg(feature = "parallel")]
    {
        collect_records_par(cfg, n, opts)
    }
    #[cfg(not(feature = "parallel"))]
    {
        collect_records_seq(cfg, n, opts)
    }
}

pub fn collect_records_seq(
    cfg: &GeneratorConfig,
    n: u64,
    opts: &SuiteOptions,
) -> Result<Vec<InstanceRecord>, SuiteError> {
    (0..n).map(|i| evaluate_indexed(cfg, i, opts)).collect()
}

#[cfg(feature = "parallel")]
pub fn collect_records_par(
    cfg: &GeneratorConfig,
    n: u64,
    opts: &SuiteOptions,
) -> Result<Vec<InstanceRecord>, SuiteError> {
    let results: Vec<Result<InstanceRecord, SuiteError>> = (0..n)
        .into_par_iter()
        .map(|i| evaluate_indexed(cfg, i, opts))
        .collect();
    // Merge in index order so the first failure is deterministic.
    results.into_iter().collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct Aggregate {
    pub instances: u64,
    pub equal: u64,
    pub fda_weakly_stable: u64,
    pub efficiency_passed: u64,
    pub efficiency_skipped: u64,
    pub improvement_checked: u64,
    pub improvement_passed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub records: Vec<InstanceRecord>,
    pub aggregate: Aggregate,
}

impl ExperimentReport {
    pub fn from_records(records: Vec<InstanceRecord>) -> Self {
        let aggregate = Aggregate {
            instances: records.len() as u64,
            equal: records.iter().filter(|r| r.equal).count() as u64,
            fda_weakly_stable: records.iter().filter(|r| r.fda_weakly_stable).count() as u64,
            efficiency_passed: records
                .iter()
                .filter(|r| r.fda_efficient == Verdict::Pass)
                .count() as u64,
            efficiency_skipped: records
                .iter()
                .filter(|r| r.fda_efficient == Verdict::Skipped)
                .count() as u64,
            improvement_checked: records
                .iter()
                .filter(|r| r.doctors_weakly_improve != Verdict::Skipped)
                .count() as u64,
            improvement_passed: records
                .iter()
                .filter(|r| r.doctors_weakly_improve == Verdict::Pass)
                .count() as u64,
        };
        Self { records, aggregate }
    }

    /// One JSON line per record, then one line with the aggregate.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serialization cannot fail"));
            out.push('\n');
        }
        out.push_str(&serde_json::json!({ "aggregate": &self.aggregate }).to_string());
        out.push('\n');
        out
    }

    /// Spreadsheet-friendly per-instance summary.
    pub fn csv_summary(&self) -> String {
        let mut out = String::from(
            "index,digest,equal,fda_feasible,fda_weakly_stable,fda_efficient,jrmp_weakly_stable,doctors_weakly_improve\n",
        );
        for r in &self.records {
            let verdict = |v: Verdict| match v {
                Verdict::Pass => "pass",
                Verdict::Fail => "fail",
                Verdict::Skipped => "skipped",
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.index,
                r.digest,
                r.equal,
                r.fda_feasible,
                r.fda_weakly_stable,
                verdict(r.fda_efficient),
                r.jrmp_weakly_stable,
                verdict(r.doctors_weakly_improve),
            ));
        }
        out
    }
}

/// Generates `n` instances from `cfg` and evaluates each; fails fast on the
/// first violated check.
pub fn run_equivalence_suite(
    cfg: &GeneratorConfig,
    n: u64,
    opts: &SuiteOptions,
) -> Result<ExperimentReport, SuiteError> {
    Ok(ExperimentReport::from_records(collect_records(
        cfg, n, opts,
    )?))
}
