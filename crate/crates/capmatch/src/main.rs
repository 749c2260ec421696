//! `capmatch` command line: run mechanisms on instance files, verify
//! matchings against the oracles, sweep random instances for the
//! flexible/adapted-capacity equivalence, fuzz strategy-proofness, and check
//! the hospital-side choice axioms.
//!
//! Exit codes: 0 success/property holds, 1 property violated, 2 input error,
//! 3 enumeration bound exceeded.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use capmatch::contracts::{
    acceptable_universe, check_irc, check_law_of_aggregate_demand, check_substitutability,
    hospital_side_choice, AxiomVerdict, Contract, ContractSet, HospitalSideChoice,
};
use capmatch::harness::{
    evaluate_instance, fuzz_strategyproofness, generate_instance, run_equivalence_suite,
    ExperimentReport, GeneratorConfig, Mechanism, SuiteError, SuiteOptions,
};
use capmatch::mechanisms::{adapted_capacities, run_da, run_fda, run_jrmp, CapacityProfile};
use capmatch::model::{parse_instance, HospitalId, Instance, Matching};
use capmatch::verify::{
    blocking_pairs, is_constrained_efficient, is_feasible, is_individually_rational, is_stable,
    is_weakly_stable, weak_stability_violations, BoundExceeded, EnumBounds,
};

#[derive(Parser)]
#[command(
    name = "capmatch",
    version,
    about = "Mechanisms and verification oracles for two-sided matching under regional caps"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CheckKind {
    Feasible,
    Ir,
    Stable,
    WeakStable,
    Efficient,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a mechanism on an instance file and print the matching as JSON.
    Run {
        #[arg(long)]
        mech: Mechanism,
        #[arg(long)]
        instance: PathBuf,
        /// Capacity profile file (JSON map hospital -> seats); only
        /// meaningful for `--mech da`, which defaults to physical capacities.
        #[arg(long)]
        caps: Option<PathBuf>,
    },
    /// Check properties of a matching file against an instance.
    Verify {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        matching: PathBuf,
        /// Comma-separated list; defaults to all checks.
        #[arg(long, value_delimiter = ',')]
        check: Vec<CheckKind>,
        /// Capacity profile for the `stable` check (defaults to physical).
        #[arg(long)]
        caps: Option<PathBuf>,
        /// Doctor-count bound for the efficiency enumeration.
        #[arg(long, default_value_t = 7)]
        enum_bound: usize,
    },
    /// Equivalence sweep: flexible outcome vs adapted-capacity outcome.
    Equiv {
        /// Evaluate one instance file instead of random sweeps.
        #[arg(long, conflicts_with = "random")]
        instance: Option<PathBuf>,
        /// Number of random instances to sweep.
        #[arg(long)]
        random: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Generator config file (JSON); defaults are desk-scale markets.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write a CSV summary to this path.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, default_value_t = 7)]
        enum_bound: usize,
    },
    /// Fuzz doctor strategy-proofness of a mechanism.
    Fuzz {
        #[arg(long)]
        mech: Mechanism,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Choice-axiom verdicts for the hospital side in both markets.
    Axioms {
        #[arg(long)]
        instance: PathBuf,
        /// Shadow-market capacities (defaults to the flexible outcome's
        /// adapted capacities).
        #[arg(long)]
        caps: Option<PathBuf>,
        #[arg(long, default_value_t = 12)]
        max_universe: usize,
    },
    /// Generate a random instance and print it as JSON.
    Gen {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

enum CliError {
    Input(String),
    Bound(String),
}

impl CliError {
    fn input(e: impl Display) -> Self {
        CliError::Input(e.to_string())
    }

    fn code(&self) -> ExitCode {
        match self {
            CliError::Input(_) => ExitCode::from(2),
            CliError::Bound(_) => ExitCode::from(3),
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Bound(m) => m,
        }
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn load_instance(path: &Path) -> Result<Instance, CliError> {
    parse_instance(&read_file(path)?).map_err(CliError::input)
}

fn load_caps(path: &Path, inst: &Instance) -> Result<CapacityProfile, CliError> {
    let map: BTreeMap<HospitalId, u32> =
        serde_json::from_str(&read_file(path)?).map_err(CliError::input)?;
    CapacityProfile::new(map, inst).map_err(CliError::input)
}

fn load_config(path: Option<&PathBuf>, seed: Option<u64>) -> Result<GeneratorConfig, CliError> {
    let mut cfg = match path {
        Some(p) => serde_json::from_str(&read_file(p)?).map_err(CliError::input)?,
        None => GeneratorConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn print_matching(m: &Matching, inst: &Instance) {
    println!(
        "{}",
        serde_json::to_string_pretty(&m.to_json_value(inst)).expect("serialization cannot fail")
    );
}

fn cmd_run(mech: Mechanism, instance: &Path, caps: Option<&PathBuf>) -> Result<ExitCode, CliError> {
    let inst = load_instance(instance)?;
    let matching = match mech {
        Mechanism::Da => {
            let profile = match caps {
                Some(path) => load_caps(path, &inst)?,
                None => CapacityProfile::physical(&inst),
            };
            run_da(&inst, &profile).map_err(CliError::input)?
        }
        Mechanism::Jrmp | Mechanism::Fda => {
            if caps.is_some() {
                return Err(CliError::Input(
                    "--caps only applies to --mech da".to_owned(),
                ));
            }
            if mech == Mechanism::Jrmp {
                run_jrmp(&inst)
            } else {
                run_fda(&inst)
            }
        }
    };
    print_matching(&matching, &inst);
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(
    instance: &Path,
    matching: &Path,
    checks: &[CheckKind],
    caps: Option<&PathBuf>,
    enum_bound: usize,
) -> Result<ExitCode, CliError> {
    let inst = load_instance(instance)?;
    let m = Matching::from_json_str(&read_file(matching)?, &inst).map_err(CliError::input)?;
    let profile = match caps {
        Some(path) => load_caps(path, &inst)?,
        None => CapacityProfile::physical(&inst),
    };
    let checks: Vec<CheckKind> = if checks.is_empty() {
        vec![
            CheckKind::Feasible,
            CheckKind::Ir,
            CheckKind::Stable,
            CheckKind::WeakStable,
            CheckKind::Efficient,
        ]
    } else {
        checks.to_vec()
    };

    let mut verdict = serde_json::Map::new();
    let mut all_hold = true;
    for check in checks {
        let (name, holds) = match check {
            CheckKind::Feasible => ("feasible", is_feasible(&m, &inst)),
            CheckKind::Ir => ("ir", is_individually_rational(&m, &inst)),
            CheckKind::Stable => {
                let holds = is_stable(&m, &inst, &profile);
                if !holds {
                    verdict.insert(
                        "blocking_pairs".to_owned(),
                        json!(blocking_pairs(&m, &inst)
                            .into_iter()
                            .map(|bp| json!({"doctor": bp.doctor, "hospital": bp.hospital}))
                            .collect::<Vec<_>>()),
                    );
                }
                ("stable", holds)
            }
            CheckKind::WeakStable => {
                let holds = is_weakly_stable(&m, &inst);
                if !holds {
                    let unexcused: Vec<_> = weak_stability_violations(&m, &inst)
                        .into_iter()
                        .map(|bp| json!({"doctor": bp.doctor, "hospital": bp.hospital}))
                        .collect();
                    verdict.insert("weak_stable_violations".to_owned(), json!(unexcused));
                }
                ("weak_stable", holds)
            }
            CheckKind::Efficient => {
                let bounds = EnumBounds {
                    max_doctors: enum_bound,
                    ..EnumBounds::default()
                };
                let (holds, witness) = is_constrained_efficient(&m, &inst, bounds)
                    .map_err(|e| CliError::Bound(e.to_string()))?;
                if let Some(w) = witness {
                    verdict.insert("efficient_witness".to_owned(), w.to_json_value(&inst));
                }
                ("efficient", holds)
            }
        };
        verdict.insert(name.to_owned(), json!(holds));
        all_hold &= holds;
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&serde_json::Value::Object(verdict))
            .expect("serialization cannot fail")
    );
    Ok(if all_hold {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_equiv(
    instance: Option<&PathBuf>,
    random: Option<u64>,
    seed: u64,
    config: Option<&PathBuf>,
    csv: Option<&PathBuf>,
    enum_bound: usize,
) -> Result<ExitCode, CliError> {
    let opts = SuiteOptions {
        bounds: EnumBounds {
            max_doctors: enum_bound,
            ..EnumBounds::default()
        },
        check_efficiency: true,
    };
    let outcome = match (instance, random) {
        (Some(path), None) => {
            let inst = load_instance(path)?;
            evaluate_instance(&inst, 0, &opts)
                .map(|r| ExperimentReport::from_records(vec![r]))
                .map_err(SuiteError::Failure)
        }
        (None, Some(n)) => {
            let cfg = load_config(config, Some(seed))?;
            run_equivalence_suite(&cfg, n, &opts)
        }
        _ => {
            return Err(CliError::Input(
                "pass exactly one of --instance or --random".to_owned(),
            ))
        }
    };
    match outcome {
        Ok(report) => {
            print!("{}", report.to_jsonl());
            if let Some(path) = csv {
                fs::write(path, report.csv_summary())
                    .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Err(SuiteError::Generator(e)) => Err(CliError::input(e)),
        Err(SuiteError::Failure(f)) => {
            eprintln!("{f}");
            println!(
                "{}",
                json!({"failure": f.check, "index": f.index, "instance": f.instance})
            );
            Ok(ExitCode::from(1))
        }
    }
}

fn cmd_fuzz(
    mech: Mechanism,
    trials: u64,
    seed: u64,
    config: Option<&PathBuf>,
) -> Result<ExitCode, CliError> {
    let cfg = load_config(config, Some(seed))?;
    let violations = fuzz_strategyproofness(mech, &cfg, trials).map_err(CliError::input)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&violations).expect("serialization cannot fail")
    );
    Ok(if violations.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn axiom_verdicts(
    inst: &Instance,
    choice: &HospitalSideChoice,
    universe: &[Contract],
    bound: usize,
) -> Result<(serde_json::Value, bool), CliError> {
    let f = |x: &ContractSet| hospital_side_choice(choice, x, inst);
    let map_bound = |e: BoundExceeded| CliError::Bound(e.to_string());
    let sub = check_substitutability(universe, f, bound).map_err(map_bound)?;
    let load = check_law_of_aggregate_demand(universe, f, bound).map_err(map_bound)?;
    let irc = check_irc(universe, f, bound).map_err(map_bound)?;
    let all = sub.holds && load.holds && irc.holds;
    let to_json = |v: &AxiomVerdict| serde_json::to_value(v).expect("serialization cannot fail");
    Ok((
        json!({
            "substitutability": to_json(&sub),
            "law_of_aggregate_demand": to_json(&load),
            "irrelevance_of_rejected_contracts": to_json(&irc),
        }),
        all,
    ))
}

fn cmd_axioms(
    instance: &Path,
    caps: Option<&PathBuf>,
    max_universe: usize,
) -> Result<ExitCode, CliError> {
    let inst = load_instance(instance)?;
    let universe = acceptable_universe(&inst);
    let shadow_caps = match caps {
        Some(path) => load_caps(path, &inst)?,
        None => adapted_capacities(&run_fda(&inst), &inst).map_err(CliError::input)?,
    };
    let (original, original_ok) = axiom_verdicts(
        &inst,
        &HospitalSideChoice::Original,
        &universe,
        max_universe,
    )?;
    let shadow_choice = HospitalSideChoice::Shadow(shadow_caps.clone());
    let (shadow, shadow_ok) = axiom_verdicts(&inst, &shadow_choice, &universe, max_universe)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "universe_size": universe.len(),
            "shadow_caps": shadow_caps.as_map(),
            "original": original,
            "shadow": shadow,
        }))
        .expect("serialization cannot fail")
    );
    Ok(if original_ok && shadow_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_gen(config: Option<&PathBuf>, seed: Option<u64>) -> Result<ExitCode, CliError> {
    let cfg = load_config(config, seed)?;
    let inst = generate_instance(&cfg).map_err(CliError::input)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&inst.to_json_value()).expect("serialization cannot fail")
    );
    Ok(ExitCode::SUCCESS)
}

fn dispatch(cli: Cli) -> Result<ExitCode, CliError> {
    match &cli.cmd {
        Cmd::Run {
            mech,
            instance,
            caps,
        } => cmd_run(*mech, instance, caps.as_ref()),
        Cmd::Verify {
            instance,
            matching,
            check,
            caps,
            enum_bound,
        } => cmd_verify(instance, matching, check, caps.as_ref(), *enum_bound),
        Cmd::Equiv {
            instance,
            random,
            seed,
            config,
            csv,
            enum_bound,
        } => cmd_equiv(
            instance.as_ref(),
            *random,
            *seed,
            config.as_ref(),
            csv.as_ref(),
            *enum_bound,
        ),
        Cmd::Fuzz {
            mech,
            trials,
            seed,
            config,
        } => cmd_fuzz(*mech, *trials, *seed, config.as_ref()),
        Cmd::Axioms {
            instance,
            caps,
            max_universe,
        } => cmd_axioms(instance, caps.as_ref(), *max_universe),
        Cmd::Gen { config, seed } => cmd_gen(config.as_ref(), *seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}
