//! Matching-with-contracts layer.
//!
//! A contract is a doctor-hospital pair. The doctor side chooses each
//! doctor's best contract; the hospital side is a single agent whose choice
//! rule comes in two flavors: the original market's rule (fill targets, then
//! round-robin the regional seats) and a shadow market's rule (top applicants
//! per hospital under an explicit capacity profile). On top sit the
//! cumulative offer process, the stable-allocation test, choice-axiom
//! checkers, and utility rationalizers whose constrained argmax must
//! reproduce the choice rules.

mod axioms;
mod rationalize;

pub use axioms::{
    adversarial, check_irc, check_law_of_aggregate_demand, check_substitutability, AxiomName,
    AxiomVerdict, Counterexample,
};
pub use rationalize::{
    argmax_choice, rationalization_agreement, rationalizer_value, RationalizationMismatch,
    RationalizeError,
};

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::mechanisms::{regional_choice, CapacityProfile};
use crate::model::{Distribution, DoctorId, HospitalId, Instance, Matching};

/// A doctor-hospital pair.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Contract {
    pub doctor: DoctorId,
    pub hospital: HospitalId,
}

impl Contract {
    pub fn new(doctor: impl Into<DoctorId>, hospital: impl Into<HospitalId>) -> Self {
        Self {
            doctor: doctor.into(),
            hospital: hospital.into(),
        }
    }
}

/// A set of contracts; an allocation when each doctor appears at most once.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct ContractSet(BTreeSet<Contract>);

impl ContractSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, c: Contract) -> bool {
        self.0.insert(c)
    }

    pub fn contains(&self, c: &Contract) -> bool {
        self.0.contains(c)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Contract> {
        self.0.iter()
    }

    pub fn with(&self, c: Contract) -> Self {
        let mut out = self.clone();
        out.insert(c);
        out
    }

    /// Contracts naming doctor `d`.
    pub fn of_doctor<'a>(&'a self, d: &'a DoctorId) -> impl Iterator<Item = &'a Contract> {
        self.0.iter().filter(move |c| &c.doctor == d)
    }

    /// Contracts naming hospital `h`.
    pub fn of_hospital<'a>(&'a self, h: &'a HospitalId) -> impl Iterator<Item = &'a Contract> {
        self.0.iter().filter(move |c| &c.hospital == h)
    }

    /// True iff each doctor appears in at most one contract.
    pub fn is_allocation(&self) -> bool {
        let mut seen = BTreeSet::new();
        self.0.iter().all(|c| seen.insert(&c.doctor))
    }

    /// Contracts of every matched pair of `m`.
    pub fn from_matching(m: &Matching) -> Self {
        Self(
            m.matched_pairs()
                .map(|(d, h)| Contract {
                    doctor: d.clone(),
                    hospital: h.clone(),
                })
                .collect(),
        )
    }

    /// The induced matching; `None` unless the set is an allocation.
    pub fn to_matching(&self, inst: &Instance) -> Option<Matching> {
        if !self.is_allocation() {
            return None;
        }
        Some(Matching::from_pairs(
            inst,
            self.0
                .iter()
                .map(|c| (c.doctor.clone(), c.hospital.clone())),
        ))
    }

    /// Per-hospital contract counts (a doctor holding several contracts is
    /// counted once per contract).
    pub fn xi(&self, inst: &Instance) -> Distribution {
        let mut counts: BTreeMap<HospitalId, u32> =
            inst.hospital_ids().map(|h| (h.clone(), 0)).collect();
        for c in &self.0 {
            if let Some(slot) = counts.get_mut(&c.hospital) {
                *slot += 1;
            }
        }
        Distribution::new(counts)
    }
}

impl FromIterator<Contract> for ContractSet {
    fn from_iter<T: IntoIterator<Item = Contract>>(iter: T) -> Self {
        Self(iter.into_iter().collect())
    }
}

/// Every contract acceptable to both of its endpoints, in sorted order.
pub fn acceptable_universe(inst: &Instance) -> Vec<Contract> {
    let mut out = Vec::new();
    for d in inst.doctors() {
        for h in inst.doctor_prefs(d) {
            if inst.acceptable_to_hospital(h, d) {
                out.push(Contract {
                    doctor: d.clone(),
                    hospital: h.clone(),
                });
            }
        }
    }
    out.sort();
    out
}

/// The hospital side's choice rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HospitalSideChoice {
    /// The original market: per region, fill targets from each hospital's own
    /// applicants, then round-robin the remaining regional seats in the
    /// region's order, truncated at physical capacities.
    Original,
    /// A shadow market: each hospital keeps its top acceptable applicants up
    /// to the profile's capacity; regional caps play no role.
    Shadow(CapacityProfile),
}

/// Each doctor's single most preferred acceptable contract in `x`, if any.
pub fn doctor_side_choice(x: &ContractSet, inst: &Instance) -> ContractSet {
    let mut best: BTreeMap<&DoctorId, (&Contract, u32)> = BTreeMap::new();
    for c in x.iter() {
        if !inst.has_doctor(&c.doctor) {
            continue;
        }
        let Some(rank) = inst.doctor_rank(&c.doctor, &c.hospital) else {
            continue;
        };
        match best.get(&c.doctor) {
            Some((_, incumbent)) if *incumbent <= rank => {}
            _ => {
                best.insert(&c.doctor, (c, rank));
            }
        }
    }
    best.into_values().map(|(c, _)| c.clone()).collect()
}

/// The hospital side's choice from `x`.
///
/// Contracts whose doctor is unacceptable to the named hospital are discarded
/// up front. Idempotent, and always a subset of the input. When the input is
/// an allocation so is the output; on arbitrary inputs, contracts of one
/// doctor with different hospitals are handled independently, which is what
/// keeps the rule substitutable.
pub fn hospital_side_choice(
    choice: &HospitalSideChoice,
    x: &ContractSet,
    inst: &Instance,
) -> ContractSet {
    match choice {
        HospitalSideChoice::Shadow(caps) => {
            let mut out = ContractSet::new();
            for h in inst.hospital_ids() {
                let mut applicants: Vec<&Contract> = x
                    .of_hospital(h)
                    .filter(|c| inst.acceptable_to_hospital(h, &c.doctor))
                    .collect();
                applicants.sort_by_key(|c| inst.hospital_rank(h, &c.doctor).unwrap());
                let cap = caps.get(h).unwrap_or(0) as usize;
                for c in applicants.into_iter().take(cap) {
                    out.insert(c.clone());
                }
            }
            out
        }
        HospitalSideChoice::Original => {
            let mut out = ContractSet::new();
            for region in inst.regions() {
                let mut pools: BTreeMap<HospitalId, BTreeSet<DoctorId>> = BTreeMap::new();
                for h in &region.hospitals {
                    pools.insert(
                        h.clone(),
                        x.of_hospital(h).map(|c| c.doctor.clone()).collect(),
                    );
                }
                let keeps = regional_choice(inst, region, &pools);
                for (h, kept) in keeps {
                    for d in kept {
                        out.insert(Contract {
                            doctor: d,
                            hospital: h.clone(),
                        });
                    }
                }
            }
            out
        }
    }
}

/// Generalized deferred acceptance: the lowest-id doctor with no held
/// contract offers her best contract not yet offered; the hospital side
/// re-chooses from the cumulative pool of all offers ever made; repeat until
/// nobody can offer. Returns the held set.
pub fn cumulative_offer_process(inst: &Instance, choice: &HospitalSideChoice) -> ContractSet {
    let mut next_offer: BTreeMap<&DoctorId, usize> =
        inst.doctors().iter().map(|d| (d, 0)).collect();
    let mut offered = ContractSet::new();
    let mut held = ContractSet::new();
    while let Some(d) = inst
        .doctors()
        .iter()
        .find(|d| held.of_doctor(d).next().is_none() && next_offer[*d] < inst.doctor_prefs(d).len())
    {
        let ptr = next_offer.get_mut(&d).unwrap();
        let h = inst.doctor_prefs(d)[*ptr].clone();
        *ptr += 1;
        offered.insert(Contract {
            doctor: d.clone(),
            hospital: h,
        });
        held = hospital_side_choice(choice, &offered, inst);
    }
    held
}

/// Exact stable-allocation test: `x` is a fixed point of both sides' choices
/// and no acceptable outside contract would be picked by both sides at once.
pub fn is_stable_allocation(x: &ContractSet, inst: &Instance, choice: &HospitalSideChoice) -> bool {
    if &doctor_side_choice(x, inst) != x || &hospital_side_choice(choice, x, inst) != x {
        return false;
    }
    for candidate in acceptable_universe(inst) {
        if x.contains(&candidate) {
            continue;
        }
        let extended = x.with(candidate.clone());
        if doctor_side_choice(&extended, inst).contains(&candidate)
            && hospital_side_choice(choice, &extended, inst).contains(&candidate)
        {
            return false;
        }
    }
    true
}
