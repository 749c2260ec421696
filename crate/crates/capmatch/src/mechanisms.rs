//! The three assignment mechanisms: doctor-proposing deferred acceptance
//! under an explicit capacity profile, the same run under target capacities,
//! and flexible deferred acceptance, which fills targets first and then
//! grants remaining regional seats round-robin.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::model::{distribution_of, DoctorId, HospitalId, Instance, Matching, Region};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MechanismError {
    #[error("capacity profile: unknown hospital `{0}`")]
    UnknownHospital(HospitalId),
    #[error("capacity profile: no entry for hospital `{0}`")]
    MissingHospital(HospitalId),
    #[error("matching infeasible: {0}")]
    Infeasible(String),
}

/// Effective per-hospital capacities: physical, target, or adapted, depending
/// on the market the caller wants to run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CapacityProfile {
    caps: BTreeMap<HospitalId, u32>,
}

impl CapacityProfile {
    /// Validates a raw map against the instance: every hospital must be
    /// covered and no unknown hospital may appear.
    pub fn new(caps: BTreeMap<HospitalId, u32>, inst: &Instance) -> Result<Self, MechanismError> {
        for h in caps.keys() {
            if inst.get_hospital(h).is_none() {
                return Err(MechanismError::UnknownHospital(h.clone()));
            }
        }
        for h in inst.hospital_ids() {
            if !caps.contains_key(h) {
                return Err(MechanismError::MissingHospital(h.clone()));
            }
        }
        Ok(Self { caps })
    }

    /// Physical capacities q_h.
    pub fn physical(inst: &Instance) -> Self {
        Self {
            caps: inst
                .hospital_ids()
                .map(|h| (h.clone(), inst.hospital(h).capacity))
                .collect(),
        }
    }

    /// Target capacities, collected from each hospital's region.
    pub fn targets(inst: &Instance) -> Self {
        let mut caps = BTreeMap::new();
        for r in inst.regions() {
            for (h, t) in &r.targets {
                caps.insert(h.clone(), *t);
            }
        }
        Self { caps }
    }

    pub fn get(&self, h: &HospitalId) -> Option<u32> {
        self.caps.get(h).copied()
    }

    pub fn as_map(&self) -> &BTreeMap<HospitalId, u32> {
        &self.caps
    }
}

/// Per-hospital headcounts of `m`, for use as DA capacities.
///
/// Fails if `m` is infeasible in the instance (a regional cap or physical
/// capacity violated); the returned profile then always satisfies the
/// regional caps by construction.
pub fn adapted_capacities(
    m: &Matching,
    inst: &Instance,
) -> Result<CapacityProfile, MechanismError> {
    let dist = distribution_of(m, inst);
    for h in inst.hospital_ids() {
        if dist.get(h) > inst.hospital(h).capacity {
            return Err(MechanismError::Infeasible(format!(
                "hospital `{h}` holds {} doctors, capacity {}",
                dist.get(h),
                inst.hospital(h).capacity
            )));
        }
    }
    for r in inst.regions() {
        let total: u32 = r.hospitals.iter().map(|h| dist.get(h)).sum();
        if total > r.cap {
            return Err(MechanismError::Infeasible(format!(
                "region `{}` holds {total} doctors, cap {}",
                r.id, r.cap
            )));
        }
    }
    Ok(CapacityProfile {
        caps: dist.into_counts(),
    })
}

/// Doctor-proposing deferred acceptance under effective capacities `caps`.
///
/// Runs in the standard market: regional caps are ignored here. Proposals go
/// out in batch rounds; each hospital keeps the best acceptable applicants up
/// to its effective capacity and rejects the rest for good.
pub fn run_da(inst: &Instance, caps: &CapacityProfile) -> Result<Matching, MechanismError> {
    for h in inst.hospital_ids() {
        if caps.get(h).is_none() {
            return Err(MechanismError::MissingHospital(h.clone()));
        }
    }

    let mut next_choice: BTreeMap<&DoctorId, usize> =
        inst.doctors().iter().map(|d| (d, 0)).collect();
    let mut held: BTreeMap<&HospitalId, Vec<&DoctorId>> = BTreeMap::new();
    let mut held_by: BTreeMap<&DoctorId, &HospitalId> = BTreeMap::new();

    loop {
        let mut proposals: BTreeMap<&HospitalId, Vec<&DoctorId>> = BTreeMap::new();
        for d in inst.doctors() {
            if held_by.contains_key(d) {
                continue;
            }
            let prefs = inst.doctor_prefs(d);
            let ptr = next_choice.get_mut(&d).unwrap();
            if *ptr >= prefs.len() {
                continue;
            }
            proposals.entry(&prefs[*ptr]).or_default().push(d);
            *ptr += 1;
        }
        if proposals.is_empty() {
            break;
        }
        for (h, mut newcomers) in proposals {
            let mut pool = held.remove(h).unwrap_or_default();
            pool.append(&mut newcomers);
            pool.retain(|d| inst.acceptable_to_hospital(h, d));
            pool.sort_by_key(|d| {
                inst.hospital_rank(h, d)
                    .expect("retained doctors are ranked")
            });
            let cap = caps.get(h).unwrap() as usize;
            for rejected in pool.drain(cap.min(pool.len())..) {
                held_by.remove(rejected);
            }
            for kept in &pool {
                held_by.insert(*kept, h);
            }
            held.insert(h, pool);
        }
    }

    Ok(Matching::from_pairs(
        inst,
        held_by.into_iter().map(|(d, h)| (d.clone(), h.clone())),
    ))
}

/// Deferred acceptance with every hospital's capacity replaced by its target.
///
/// The output is feasible under the regional caps since targets sum to at
/// most the cap within each region.
pub fn run_jrmp(inst: &Instance) -> Matching {
    run_da(inst, &CapacityProfile::targets(inst)).expect("target profile covers every hospital")
}

/// One region's tentative choice: fill each hospital's target from its own
/// applicant pool, then let hospitals take turns in the region's order, one
/// doctor per turn, until the regional cap is reached, skipping hospitals
/// that are at physical capacity or out of applicants.
///
/// `pools` maps each hospital of the region to its current applicants;
/// doctors unacceptable to the pool's hospital are never kept. Returns the
/// kept applicants per hospital. Shared by the flexible mechanism and the
/// hospital-side choice function of the contracts layer.
pub(crate) fn regional_choice(
    inst: &Instance,
    region: &Region,
    pools: &BTreeMap<HospitalId, BTreeSet<DoctorId>>,
) -> BTreeMap<HospitalId, BTreeSet<DoctorId>> {
    let mut ranked: BTreeMap<&HospitalId, Vec<&DoctorId>> = BTreeMap::new();
    for h in &region.hospitals {
        let mut pool: Vec<&DoctorId> = pools
            .get(h)
            .map(|p| {
                p.iter()
                    .filter(|d| inst.acceptable_to_hospital(h, d))
                    .collect()
            })
            .unwrap_or_default();
        pool.sort_by_key(|d| inst.hospital_rank(h, d).unwrap());
        ranked.insert(h, pool);
    }

    let mut cursor: BTreeMap<&HospitalId, usize> = BTreeMap::new();
    let mut keep: BTreeMap<HospitalId, BTreeSet<DoctorId>> = BTreeMap::new();
    let mut total: u32 = 0;
    for h in &region.hospitals {
        let pool = &ranked[h];
        let take = (region.targets[h] as usize).min(pool.len());
        keep.insert(
            h.clone(),
            pool[..take].iter().map(|d| (*d).clone()).collect(),
        );
        cursor.insert(h, take);
        total += take as u32;
    }

    'fill: while total < region.cap {
        let mut took_any = false;
        for h in &region.order {
            if total == region.cap {
                break 'fill;
            }
            let kept = keep.get_mut(h).unwrap();
            let at = cursor.get_mut(&h).unwrap();
            if kept.len() as u32 >= inst.hospital(h).capacity {
                continue;
            }
            if let Some(d) = ranked[h].get(*at) {
                kept.insert((*d).clone());
                *at += 1;
                total += 1;
                took_any = true;
            }
        }
        if !took_any {
            break;
        }
    }

    keep
}

/// Flexible deferred acceptance.
///
/// Repeatedly the lowest-id doctor who is neither tentatively kept nor out of
/// options applies to her best hospital among those that have not rejected
/// her; the receiving region recomputes its tentative keeps from scratch over
/// the current pools, and every pooled applicant not kept is rejected by the
/// hospital she applied to, permanently.
pub fn run_fda(inst: &Instance) -> Matching {
    let mut next_choice: BTreeMap<&DoctorId, usize> =
        inst.doctors().iter().map(|d| (d, 0)).collect();
    let mut kept_by: BTreeMap<&DoctorId, Option<HospitalId>> =
        inst.doctors().iter().map(|d| (d, None)).collect();
    let mut pools: BTreeMap<HospitalId, BTreeSet<DoctorId>> = inst
        .hospital_ids()
        .map(|h| (h.clone(), BTreeSet::new()))
        .collect();

    while let Some(d) = inst
        .doctors()
        .iter()
        .find(|d| kept_by[*d].is_none() && next_choice[*d] < inst.doctor_prefs(d).len())
    {
        let ptr = next_choice.get_mut(&d).unwrap();
        let target_hospital = inst.doctor_prefs(d)[*ptr].clone();
        *ptr += 1;
        pools.get_mut(&target_hospital).unwrap().insert(d.clone());

        let region = inst.region_of(&target_hospital);
        let keeps = regional_choice(inst, region, &pools);
        for h in &region.hospitals {
            let kept = &keeps[h];
            debug_assert!(kept.len() as u32 <= inst.hospital(h).capacity);
            for rejected in pools[h].difference(kept) {
                let slot = kept_by.get_mut(rejected).unwrap();
                *slot = None;
            }
            for held in kept {
                let slot = kept_by.get_mut(held).unwrap();
                *slot = Some(h.clone());
            }
            pools.insert(h.clone(), kept.clone());
        }
        debug_assert!(
            region
                .hospitals
                .iter()
                .map(|h| pools[h].len() as u32)
                .sum::<u32>()
                <= region.cap
        );
    }

    Matching::from_pairs(
        inst,
        kept_by
            .into_iter()
            .filter_map(|(d, h)| h.map(|h| (d.clone(), h))),
    )
}

/// Result of running the flexible mechanism and then deferred acceptance
/// under the capacities its outcome induces.
#[derive(Debug, Clone)]
pub struct EquivalenceOutcome {
    pub fda: Matching,
    pub da: Matching,
    pub equal: bool,
}

/// Runs the flexible mechanism, adapts capacities to its outcome headcounts,
/// reruns plain deferred acceptance under them, and reports whether the two
/// matchings are identical. A `false` flag signals an implementation bug.
pub fn fda_da_equivalence(inst: &Instance) -> EquivalenceOutcome {
    let fda = run_fda(inst);
    let caps = adapted_capacities(&fda, inst).expect("flexible mechanism output is feasible");
    let da = run_da(inst, &caps).expect("adapted profile covers every hospital");
    let equal = fda == da;
    EquivalenceOutcome { fda, da, equal }
}
