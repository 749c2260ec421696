//! Random-instance harness: seeded generator, strategy-proofness fuzzer, and
//! the equivalence sweep that exercises the mechanisms and oracles together.

mod fuzz;
mod gen;
mod suite;

#[cfg(feature = "parallel")]
pub use fuzz::fuzz_strategyproofness_par;
pub use fuzz::{
    fuzz_strategyproofness, fuzz_strategyproofness_seq, run_mechanism, Mechanism, SpViolation,
};
pub use gen::{generate_indexed, generate_instance, GeneratorConfig, GeneratorError, TargetPolicy};
#[cfg(feature = "parallel")]
pub use suite::collect_records_par;
pub use suite::{
    collect_records, collect_records_seq, evaluate_instance, instance_digest,
    run_equivalence_suite, Aggregate, ExperimentReport, InstanceRecord, SuiteError, SuiteFailure,
    SuiteOptions, Verdict,
};
