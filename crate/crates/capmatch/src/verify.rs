//! Predicates and brute-force oracles for the solution concepts: feasibility,
//! individual rationality, blocking pairs, stability under a capacity
//! profile, weak stability under regional caps, constrained efficiency, and
//! doctor-optimality. The enumeration oracles are deliberately exhaustive and
//! guarded by size bounds.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::mechanisms::CapacityProfile;
use crate::model::{
    distribution_of, doctor_utility, hospital_set_utility, DoctorId, HospitalId, Instance, Matching,
};

/// How a blocking pair gets its seat: through a vacancy or by displacing a
/// strictly worse incumbent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum BlockKind {
    Vacancy,
    Replacement,
}

/// A doctor-hospital pair that would rather match with each other than follow
/// the proposed matching.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct BlockingPair {
    pub doctor: DoctorId,
    pub hospital: HospitalId,
    pub kind: BlockKind,
}

/// True iff every regional cap and every physical capacity is respected.
pub fn is_feasible(m: &Matching, inst: &Instance) -> bool {
    let dist = distribution_of(m, inst);
    if inst
        .hospital_ids()
        .any(|h| dist.get(h) > inst.hospital(h).capacity)
    {
        return false;
    }
    inst.regions()
        .iter()
        .all(|r| r.hospitals.iter().map(|h| dist.get(h)).sum::<u32>() <= r.cap)
}

/// True iff no doctor or hospital is matched with an unacceptable partner.
pub fn is_individually_rational(m: &Matching, inst: &Instance) -> bool {
    m.matched_pairs()
        .all(|(d, h)| inst.acceptable_to_doctor(d, h) && inst.acceptable_to_hospital(h, d))
}

/// All blocking pairs of `m` when hospital `h`'s seat count is `caps[h]`,
/// sorted by doctor then hospital. A pair blocks through a vacancy when the
/// hospital has a free seat and finds the doctor acceptable, and through
/// replacement when it strictly prefers the doctor to someone it holds.
pub fn blocking_pairs_under(
    m: &Matching,
    inst: &Instance,
    caps: &CapacityProfile,
) -> Vec<BlockingPair> {
    let mut rosters: BTreeMap<&HospitalId, Vec<&DoctorId>> = BTreeMap::new();
    for (d, h) in m.matched_pairs() {
        rosters.entry(h).or_default().push(d);
    }
    let mut out = Vec::new();
    for d in inst.doctors() {
        let matched_rank = m.hospital_of(d).and_then(|h| inst.doctor_rank(d, h));
        for h in inst.doctor_prefs(d) {
            let rank = inst.doctor_rank(d, h).unwrap();
            if matched_rank.is_some_and(|r| rank >= r) {
                continue; // not strictly preferred to the current match
            }
            let roster = rosters.get(h).map(Vec::as_slice).unwrap_or(&[]);
            let acceptable = inst.acceptable_to_hospital(h, d);
            if acceptable && (roster.len() as u32) < caps.get(h).unwrap_or(0) {
                out.push(BlockingPair {
                    doctor: d.clone(),
                    hospital: h.clone(),
                    kind: BlockKind::Vacancy,
                });
            } else if acceptable
                && roster
                    .iter()
                    .any(|incumbent| match inst.hospital_rank(h, incumbent) {
                        Some(r) => inst.hospital_rank(h, d).unwrap() < r,
                        None => true,
                    })
            {
                out.push(BlockingPair {
                    doctor: d.clone(),
                    hospital: h.clone(),
                    kind: BlockKind::Replacement,
                });
            }
        }
    }
    out.sort();
    out
}

/// Blocking pairs against the physical capacities.
pub fn blocking_pairs(m: &Matching, inst: &Instance) -> Vec<BlockingPair> {
    blocking_pairs_under(m, inst, &CapacityProfile::physical(inst))
}

/// Stability in the market where hospital `h` has `caps[h]` seats: individual
/// rationality, roster sizes within `caps`, and no blocking pair.
pub fn is_stable(m: &Matching, inst: &Instance, caps: &CapacityProfile) -> bool {
    if !is_individually_rational(m, inst) {
        return false;
    }
    let dist = distribution_of(m, inst);
    if inst
        .hospital_ids()
        .any(|h| dist.get(h) > caps.get(h).unwrap_or(0))
    {
        return false;
    }
    blocking_pairs_under(m, inst, caps).is_empty()
}

/// Blocking pairs (against physical capacities) that weak stability does not
/// excuse: the pair's region has spare cap, or the hospital holds someone it
/// likes no better than the blocking doctor.
pub fn weak_stability_violations(m: &Matching, inst: &Instance) -> Vec<BlockingPair> {
    let dist = distribution_of(m, inst);
    blocking_pairs(m, inst)
        .into_iter()
        .filter(|bp| {
            let region = inst.region_of(&bp.hospital);
            let region_total: u32 = region.hospitals.iter().map(|h| dist.get(h)).sum();
            if region_total < region.cap {
                return true; // spare regional seat: the block stands
            }
            let blocker_rank = inst.hospital_rank(&bp.hospital, &bp.doctor);
            !m.roster(&bp.hospital).iter().all(|incumbent| {
                match (inst.hospital_rank(&bp.hospital, incumbent), blocker_rank) {
                    (Some(ir), Some(br)) => ir < br,
                    (Some(_), None) => true,
                    (None, _) => false,
                }
            })
        })
        .collect()
}

/// Weak stability: feasible, individually rational, and every blocking pair
/// is excused by a binding regional cap together with strictly preferred
/// incumbents.
pub fn is_weakly_stable(m: &Matching, inst: &Instance) -> bool {
    is_feasible(m, inst)
        && is_individually_rational(m, inst)
        && weak_stability_violations(m, inst).is_empty()
}

/// Guard rails for the exhaustive oracles.
#[derive(Debug, Clone, Copy)]
pub struct EnumBounds {
    /// Maximum number of doctors.
    pub max_doctors: usize,
    /// Maximum per-doctor option count (acceptable hospitals plus staying
    /// unmatched).
    pub max_options: usize,
}

impl Default for EnumBounds {
    fn default() -> Self {
        Self {
            max_doctors: 7,
            max_options: 8,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("enumeration bound exceeded: {what} is {got}, bound {bound}")]
pub struct BoundExceeded {
    pub what: &'static str,
    pub got: usize,
    pub bound: usize,
}

/// Every assignment of each doctor to an acceptable hospital or to staying
/// unmatched, in a fixed deterministic order (doctors by id, options in
/// preference order with unmatched last).
struct Assignments<'a> {
    inst: &'a Instance,
    options: Vec<Vec<Option<&'a HospitalId>>>,
    state: Vec<usize>,
    done: bool,
}

impl<'a> Iterator for Assignments<'a> {
    type Item = Matching;

    fn next(&mut self) -> Option<Matching> {
        if self.done {
            return None;
        }
        let m = Matching::from_pairs(
            self.inst,
            self.state.iter().enumerate().filter_map(|(i, opt)| {
                self.options[i][*opt].map(|h| (self.inst.doctors()[i].clone(), h.clone()))
            }),
        );
        // Advance the odometer, least significant digit last.
        let mut i = self.state.len();
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            self.state[i] += 1;
            if self.state[i] < self.options[i].len() {
                break;
            }
            self.state[i] = 0;
        }
        if self.state.is_empty() {
            self.done = true;
        }
        Some(m)
    }
}

fn enumerate_assignments<'a>(
    inst: &'a Instance,
    bounds: EnumBounds,
) -> Result<impl Iterator<Item = Matching> + 'a, BoundExceeded> {
    if inst.doctors().len() > bounds.max_doctors {
        return Err(BoundExceeded {
            what: "doctor count",
            got: inst.doctors().len(),
            bound: bounds.max_doctors,
        });
    }
    let mut options = Vec::with_capacity(inst.doctors().len());
    for d in inst.doctors() {
        let mut opts: Vec<Option<&HospitalId>> = inst.doctor_prefs(d).iter().map(Some).collect();
        opts.push(None);
        if opts.len() > bounds.max_options {
            return Err(BoundExceeded {
                what: "per-doctor option count",
                got: opts.len(),
                bound: bounds.max_options,
            });
        }
        options.push(opts);
    }
    let state = vec![0; options.len()];
    Ok(Assignments {
        inst,
        options,
        state,
        done: false,
    })
}

/// Streams every feasible matching of the instance in deterministic order.
pub fn enumerate_feasible_matchings<'a>(
    inst: &'a Instance,
    bounds: EnumBounds,
) -> Result<impl Iterator<Item = Matching> + 'a, BoundExceeded> {
    Ok(enumerate_assignments(inst, bounds)?.filter(|m| is_feasible(m, inst)))
}

fn doctor_utilities(m: &Matching, inst: &Instance) -> Vec<i64> {
    inst.doctors()
        .iter()
        .map(|d| doctor_utility(inst, d, m.hospital_of(d)))
        .collect()
}

fn hospital_utilities(m: &Matching, inst: &Instance) -> Vec<Option<u128>> {
    inst.hospital_ids()
        .map(|h| {
            let roster = m.roster(h).into_iter().cloned().collect();
            hospital_set_utility(inst, h, &roster)
        })
        .collect()
}

/// Brute-force constrained-efficiency check.
///
/// Returns `(true, None)` when no feasible matching weakly improves every
/// agent with at least one strict improvement, else `(false, witness)` with
/// the first dominating matching in enumeration order. Doctors compare by
/// their lists; hospitals by the additive responsive completion.
pub fn is_constrained_efficient(
    m: &Matching,
    inst: &Instance,
    bounds: EnumBounds,
) -> Result<(bool, Option<Matching>), BoundExceeded> {
    let base_doc = doctor_utilities(m, inst);
    let base_hosp = hospital_utilities(m, inst);
    for cand in enumerate_feasible_matchings(inst, bounds)? {
        let cand_doc = doctor_utilities(&cand, inst);
        let cand_hosp = hospital_utilities(&cand, inst);
        let weakly_up = cand_doc.iter().zip(&base_doc).all(|(c, b)| c >= b)
            && cand_hosp.iter().zip(&base_hosp).all(|(c, b)| c >= b);
        let strictly_up = cand_doc.iter().zip(&base_doc).any(|(c, b)| c > b)
            || cand_hosp.iter().zip(&base_hosp).any(|(c, b)| c > b);
        if weakly_up && strictly_up {
            return Ok((false, Some(cand)));
        }
    }
    Ok((true, None))
}

/// Streams every matching that is stable when hospital `h` has `caps[h]`
/// seats (regional caps play no role in that market).
pub fn stable_matchings_under<'a>(
    inst: &'a Instance,
    caps: &'a CapacityProfile,
    bounds: EnumBounds,
) -> Result<impl Iterator<Item = Matching> + 'a, BoundExceeded> {
    Ok(enumerate_assignments(inst, bounds)?.filter(move |m| is_stable(m, inst, caps)))
}

/// True iff `m` is stable under `caps` and no other stable matching weakly
/// improves every doctor with one strict improvement.
pub fn is_doctor_optimal_stable(
    m: &Matching,
    inst: &Instance,
    caps: &CapacityProfile,
    bounds: EnumBounds,
) -> Result<bool, BoundExceeded> {
    if !is_stable(m, inst, caps) {
        return Ok(false);
    }
    let base = doctor_utilities(m, inst);
    for cand in stable_matchings_under(inst, caps, bounds)? {
        let cand_u = doctor_utilities(&cand, inst);
        if cand_u.iter().zip(&base).all(|(c, b)| c >= b)
            && cand_u.iter().zip(&base).any(|(c, b)| c > b)
        {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::run_da;
    use crate::model::testutil::{matching, three_hospital_market};
    use crate::model::{parse_instance, HospitalId};

    fn caps(inst: &Instance, entries: &[(&str, u32)]) -> CapacityProfile {
        CapacityProfile::new(
            entries
                .iter()
                .map(|(h, c)| (HospitalId::from(*h), *c))
                .collect(),
            inst,
        )
        .unwrap()
    }

    fn mu(inst: &Instance) -> Matching {
        matching(inst, &[("d1", "h1"), ("d2", "h2"), ("d5", "h3")])
    }

    fn mu_prime(inst: &Instance) -> Matching {
        matching(
            inst,
            &[("d1", "h1"), ("d2", "h2"), ("d3", "h2"), ("d5", "h3")],
        )
    }

    fn mu_double_prime(inst: &Instance) -> Matching {
        matching(
            inst,
            &[("d1", "h1"), ("d2", "h1"), ("d3", "h2"), ("d5", "h3")],
        )
    }

    #[test]
    fn feasibility_checks_caps_and_regions() {
        let inst = three_hospital_market([1, 1, 2], ["h1", "h2", "h3"]);
        assert!(is_feasible(&mu_double_prime(&inst), &inst));
        assert!(is_feasible(&Matching::empty(&inst), &inst));
        let stuffed = matching(
            &inst,
            &[
                ("d1", "h1"),
                ("d2", "h1"),
                ("d3", "h1"),
                ("d4", "h1"),
                ("d5", "h1"),
            ],
        );
        assert!(!is_feasible(&stuffed, &inst));
        // Five matched doctors also break the regional cap of four.
        let spread = matching(
            &inst,
            &[
                ("d1", "h1"),
                ("d2", "h1"),
                ("d3", "h2"),
                ("d4", "h2"),
                ("d5", "h3"),
            ],
        );
        assert!(!is_feasible(&spread, &inst));
    }

    #[test]
    fn individual_rationality_examples() {
        let inst = three_hospital_market([1, 1, 2], ["h1", "h2", "h3"]);
        assert!(is_individually_rational(&mu_prime(&inst), &inst));
        assert!(is_individually_rational(&Matching::empty(&inst), &inst));
        let bad = matching(&inst, &[("d4", "h3")]);
        assert!(!is_individually_rational(&bad, &inst));
    }

    #[test]
    fn blocking_pairs_against_physical_capacities() {
        let inst = three_hospital_market([1, 1, 2], ["h1", "h2", "h3"]);
        let blocks = blocking_pairs(&mu(&inst), &inst);
        assert!(blocks.contains(&BlockingPair {
            doctor: "d3".into(),
            hospital: "h1".into(),
            kind: BlockKind::Vacancy,
        }));
        let blocks = blocking_pairs(&mu_double_prime(&inst), &inst);
        assert!(blocks.contains(&BlockingPair {
            doctor: "d4".into(),
            hospital: "h2".into(),
            kind: BlockKind::Vacancy,
        }));
    }

    #[test]
    fn da_output_has_no_blocking_pairs_in_its_market() {
        let inst = parse_instance(
            r#"{"doctors":["d1","d2"],"doctor_prefs":{"d1":["h1"],"d2":["h1","h2"]},
                "hospitals":{"h1":{"region":"r","capacity":1,"prefs":["d1","d2"]},
                             "h2":{"region":"r","capacity":1,"prefs":["d2"]}},
                "regions":[{"id":"r","cap":9,"order":["h1","h2"],"targets":{}}]}"#,
        )
        .unwrap();
        let physical = CapacityProfile::physical(&inst);
        let m = run_da(&inst, &physical).unwrap();
        assert!(blocking_pairs_under(&m, &inst, &physical).is_empty());
    }

    #[test]
    fn stability_depends_on_the_capacity_profile() {
        let inst = three_hospital_market([1, 1, 2], ["h1", "h2", "h3"]);
        assert!(is_stable(
            &mu_prime(&inst),
            &inst,
            &caps(&inst, &[("h1", 1), ("h2", 2), ("h3", 1)])
        ));
        assert!(is_stable(
            &mu(&inst),
            &inst,
            &caps(&inst, &[("h1", 1), ("h2", 1), ("h3", 2)])
        ));
        assert!(!is_stable(
            &mu(&inst),
            &inst,
            &CapacityProfile::physical(&inst)
        ));
    }

    #[test]
    fn weak_stability_examples() {
        let inst = three_hospital_market([1, 1, 2], ["h1", "h2", "h3"]);
        assert!(is_weakly_stable(&mu_double_prime(&inst), &inst));
        assert!(!is_weakly_stable(&mu(&inst), &inst));
        let violations = weak_stability_violations(&mu(&inst), &inst);
        assert!(violations
            .iter()
            .any(|bp| bp.doctor.as_str() == "d3" && bp.hospital.as_str() == "h1"));
    }

    #[test]
    fn weak_stability_of_totally_unacceptable_market() {
        let inst = parse_instance(
            r#"{"doctors":["d1"],"doctor_prefs":{"d1":[]},
                "hospitals":{"h1":{"region":"r","capacity":1,"prefs":[]}},
                "regions":[{"id":"r","cap":1,"order":["h1"],"targets":{}}]}"#,
        )
        .unwrap();
        assert!(is_weakly_stable(&Matching::empty(&inst), &inst));
    }

    #[test]
    fn enumeration_contains_the_three_named_matchings() {
        let inst = three_hospital_market([1, 1, 2], ["h1", "h2", "h3"]);
        let all: Vec<Matching> = enumerate_feasible_matchings(&inst, EnumBounds::default())
            .unwrap()
            .collect();
        assert!(all.contains(&mu(&inst)));
        assert!(all.contains(&mu_prime(&inst)));
        assert!(all.contains(&mu_double_prime(&inst)));
    }

    #[test]
    fn enumeration_of_one_doctor_market() {
        let inst = parse_instance(
            r#"{"doctors":["d1"],"doctor_prefs":{"d1":["h1"]},
                "hospitals":{"h1":{"region":"r","capacity":1,"prefs":["d1"]}},
                "regions":[{"id":"r","cap":1,"order":["h1"],"targets":{}}]}"#,
        )
        .unwrap();
        let all: Vec<Matching> = enumerate_feasible_matchings(&inst, EnumBounds::default())
            .unwrap()
            .collect();
        assert_eq!(all.len(), 2);
    }

    #[test]
    fn zero_regional_cap_forces_emptiness() {
        let inst = parse_instance(
            r#"{"doctors":["d1","d2"],"doctor_prefs":{"d1":["h1"],"d2":["h1"]},
                "hospitals":{"h1":{"region":"r","capacity":2,"prefs":["d1","d2"]}},
                "regions":[{"id":"r","cap":0,"order":["h1"],"targets":{}}]}"#,
        )
        .unwrap();
        let all: Vec<Matching> = enumerate_feasible_matchings(&inst, EnumBounds::default())
            .unwrap()
            .collect();
        assert_eq!(all, vec![Matching::empty(&inst)]);
    }

    #[test]
    fn enumeration_bound_is_enforced() {
        let doctors: Vec<String> = (1..=8).map(|i| format!("d{i}")).collect();
        let prefs: String = doctors
            .iter()
            .map(|d| format!(r#""{d}":["h1"]"#))
            .collect::<Vec<_>>()
            .join(",");
        let ranking: String = doctors
            .iter()
            .map(|d| format!(r#""{d}""#))
            .collect::<Vec<_>>()
            .join(",");
        let text = format!(
            r#"{{"doctors":[{ranking}],"doctor_prefs":{{{prefs}}},
                "hospitals":{{"h1":{{"region":"r","capacity":1,"prefs":[{ranking}]}}}},
                "regions":[{{"id":"r","cap":1,"order":["h1"],"targets":{{}}}}]}}"#
        );
        let inst = parse_instance(&text).unwrap();
        let err = enumerate_feasible_matchings(&inst, EnumBounds::default())
            .err()
            .unwrap();
        assert_eq!(err.what, "doctor count");
    }

    #[test]
    fn efficiency_verdicts_for_the_worked_matchings() {
        let inst = three_hospital_market([1, 1, 2], ["h1", "h2", "h3"]);
        let bounds = EnumBounds::default();

        let (efficient, witness) = is_constrained_efficient(&mu(&inst), &inst, bounds).unwrap();
        assert!(!efficient);
        let witness = witness.unwrap();
        assert!(is_feasible(&witness, &inst));
        // The witness must weakly improve everyone and strictly improve someone.
        assert_ne!(witness, mu(&inst));
        for d in inst.doctors() {
            assert!(
                doctor_utility(&inst, d, witness.hospital_of(d))
                    >= doctor_utility(&inst, d, mu(&inst).hospital_of(d))
            );
        }
        assert!(inst.doctors().iter().any(|d| {
            doctor_utility(&inst, d, witness.hospital_of(d))
                > doctor_utility(&inst, d, mu(&inst).hospital_of(d))
        }));
        // The classic dominating matching is a valid witness too.
        let base = mu(&inst);
        let better = mu_prime(&inst);
        for d in inst.doctors() {
            assert!(
                doctor_utility(&inst, d, better.hospital_of(d))
                    >= doctor_utility(&inst, d, base.hospital_of(d))
            );
        }

        assert_eq!(
            is_constrained_efficient(&mu_prime(&inst), &inst, bounds).unwrap(),
            (true, None)
        );
        assert_eq!(
            is_constrained_efficient(&mu_double_prime(&inst), &inst, bounds).unwrap(),
            (true, None)
        );
    }

    #[test]
    fn doctor_optimality_of_da_output() {
        let inst = three_hospital_market([1, 1, 2], ["h1", "h2", "h3"]);
        let profile = caps(&inst, &[("h1", 1), ("h2", 2), ("h3", 1)]);
        let m = run_da(&inst, &profile).unwrap();
        assert!(is_doctor_optimal_stable(&m, &inst, &profile, EnumBounds::default()).unwrap());
        // The empty matching is not even stable here.
        assert!(!is_doctor_optimal_stable(
            &Matching::empty(&inst),
            &inst,
            &profile,
            EnumBounds::default()
        )
        .unwrap());
    }

    #[test]
    fn unique_stable_matching_is_optimal() {
        let inst = parse_instance(
            r#"{"doctors":["d1"],"doctor_prefs":{"d1":["h1"]},
                "hospitals":{"h1":{"region":"r","capacity":1,"prefs":["d1"]}},
                "regions":[{"id":"r","cap":1,"order":["h1"],"targets":{"h1":1}}]}"#,
        )
        .unwrap();
        let profile = CapacityProfile::physical(&inst);
        let m = run_da(&inst, &profile).unwrap();
        assert!(is_doctor_optimal_stable(&m, &inst, &profile, EnumBounds::default()).unwrap());
    }
}
