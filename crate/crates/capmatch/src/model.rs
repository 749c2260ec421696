//! Market model: identifiers, preferences, regions, validated instances,
//! matchings, distributions, and the canonical JSON formats.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(id: &str) -> Self {
                Self(id.to_owned())
            }
        }
    };
}

id_type!(
    /// Opaque doctor identifier, unique within an instance.
    DoctorId
);
id_type!(
    /// Opaque hospital identifier, unique within an instance.
    HospitalId
);
id_type!(
    /// Opaque region identifier, unique within an instance.
    RegionId
);

/// Errors raised while parsing or validating an instance description.
#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("invalid instance json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{field}: empty identifier")]
    EmptyId { field: &'static str },
    #[error("{field}: duplicate id `{id}`")]
    DuplicateId { field: &'static str, id: String },
    #[error("{field}: unknown {kind} `{id}`")]
    DanglingReference {
        field: String,
        kind: &'static str,
        id: String,
    },
    #[error("doctor_prefs: missing entry for doctor `{0}`")]
    MissingDoctorPrefs(DoctorId),
    #[error("hospitals.{0}.capacity: must be positive")]
    ZeroCapacity(HospitalId),
    #[error("regions.{region}.order: not a permutation of the region's hospitals")]
    OrderNotPermutation { region: RegionId },
    #[error("regions.{region}.targets: sum {sum} exceeds regional cap {cap}")]
    TargetSumExceedsCap {
        region: RegionId,
        sum: u32,
        cap: u32,
    },
    #[error(
        "regions.{region}.targets.{hospital}: target {target} exceeds hospital capacity {capacity}"
    )]
    TargetExceedsCapacity {
        region: RegionId,
        hospital: HospitalId,
        target: u32,
        capacity: u32,
    },
}

/// One hospital: its region, physical capacity, and acceptability ranking
/// over doctors (most preferred first; unlisted doctors are unacceptable).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hospital {
    pub region: RegionId,
    pub capacity: u32,
    pub prefs: Vec<DoctorId>,
}

/// One region: its member hospitals, regional cap, the round-robin order used
/// when granting seats beyond the targets, and the per-hospital targets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    pub id: RegionId,
    pub hospitals: Vec<HospitalId>,
    pub cap: u32,
    pub order: Vec<HospitalId>,
    pub targets: BTreeMap<HospitalId, u32>,
}

/// Region description as it appears in the instance file; membership is
/// derived from each hospital's `region` field.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub id: RegionId,
    pub cap: u32,
    pub order: Vec<HospitalId>,
    pub targets: BTreeMap<HospitalId, u32>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HospitalFile {
    region: RegionId,
    capacity: u32,
    prefs: Vec<DoctorId>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    doctors: Vec<DoctorId>,
    doctor_prefs: BTreeMap<DoctorId, Vec<HospitalId>>,
    hospitals: BTreeMap<HospitalId, HospitalFile>,
    regions: Vec<RegionSpec>,
}

/// A fully validated market description.
///
/// Immutable after construction; all cross-references are guaranteed to
/// resolve, regions partition the hospital set, preference lists carry no
/// duplicates, and targets respect both hospital capacities and regional
/// caps. Rank tables are precomputed for the mechanisms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    doctors: Vec<DoctorId>,
    hospitals: BTreeMap<HospitalId, Hospital>,
    regions: Vec<Region>,
    doctor_prefs: BTreeMap<DoctorId, Vec<HospitalId>>,
    doctor_rank: BTreeMap<DoctorId, BTreeMap<HospitalId, u32>>,
    hospital_rank: BTreeMap<HospitalId, BTreeMap<DoctorId, u32>>,
}

impl Instance {
    /// Validates and indexes a market built from its raw parts.
    pub fn from_parts(
        doctors: Vec<DoctorId>,
        doctor_prefs: BTreeMap<DoctorId, Vec<HospitalId>>,
        hospitals: BTreeMap<HospitalId, Hospital>,
        regions: Vec<RegionSpec>,
    ) -> Result<Self, InstanceError> {
        let mut doctor_set = BTreeSet::new();
        for d in &doctors {
            if d.as_str().is_empty() {
                return Err(InstanceError::EmptyId { field: "doctors" });
            }
            if !doctor_set.insert(d.clone()) {
                return Err(InstanceError::DuplicateId {
                    field: "doctors",
                    id: d.to_string(),
                });
            }
        }

        let mut region_ids = BTreeSet::new();
        for r in &regions {
            if r.id.as_str().is_empty() {
                return Err(InstanceError::EmptyId {
                    field: "regions.id",
                });
            }
            if !region_ids.insert(r.id.clone()) {
                return Err(InstanceError::DuplicateId {
                    field: "regions",
                    id: r.id.to_string(),
                });
            }
        }

        let mut members: BTreeMap<RegionId, Vec<HospitalId>> = BTreeMap::new();
        for (hid, hosp) in &hospitals {
            if hid.as_str().is_empty() {
                return Err(InstanceError::EmptyId { field: "hospitals" });
            }
            if hosp.capacity == 0 {
                return Err(InstanceError::ZeroCapacity(hid.clone()));
            }
            if !region_ids.contains(&hosp.region) {
                return Err(InstanceError::DanglingReference {
                    field: format!("hospitals.{hid}.region"),
                    kind: "region",
                    id: hosp.region.to_string(),
                });
            }
            members
                .entry(hosp.region.clone())
                .or_default()
                .push(hid.clone());
            let mut seen = BTreeSet::new();
            for d in &hosp.prefs {
                if !doctor_set.contains(d) {
                    return Err(InstanceError::DanglingReference {
                        field: format!("hospitals.{hid}.prefs"),
                        kind: "doctor",
                        id: d.to_string(),
                    });
                }
                if !seen.insert(d) {
                    return Err(InstanceError::DuplicateId {
                        field: "hospitals.prefs",
                        id: d.to_string(),
                    });
                }
            }
        }

        for (d, prefs) in &doctor_prefs {
            if !doctor_set.contains(d) {
                return Err(InstanceError::DanglingReference {
                    field: "doctor_prefs".to_owned(),
                    kind: "doctor",
                    id: d.to_string(),
                });
            }
            let mut seen = BTreeSet::new();
            for h in prefs {
                if !hospitals.contains_key(h) {
                    return Err(InstanceError::DanglingReference {
                        field: format!("doctor_prefs.{d}"),
                        kind: "hospital",
                        id: h.to_string(),
                    });
                }
                if !seen.insert(h) {
                    return Err(InstanceError::DuplicateId {
                        field: "doctor_prefs",
                        id: h.to_string(),
                    });
                }
            }
        }
        for d in &doctors {
            if !doctor_prefs.contains_key(d) {
                return Err(InstanceError::MissingDoctorPrefs(d.clone()));
            }
        }

        let mut resolved = Vec::with_capacity(regions.len());
        for spec in regions {
            let mut hs = members.remove(&spec.id).unwrap_or_default();
            hs.sort();
            let mut ordered: Vec<_> = spec.order.clone();
            ordered.sort();
            if ordered != hs {
                return Err(InstanceError::OrderNotPermutation { region: spec.id });
            }
            let mut targets = BTreeMap::new();
            for h in &hs {
                targets.insert(h.clone(), 0);
            }
            for (h, t) in spec.targets {
                match targets.get_mut(&h) {
                    Some(slot) => *slot = t,
                    None => {
                        return Err(InstanceError::DanglingReference {
                            field: format!("regions.{}.targets", spec.id),
                            kind: "hospital",
                            id: h.to_string(),
                        })
                    }
                }
            }
            let sum: u32 = targets.values().sum();
            if sum > spec.cap {
                return Err(InstanceError::TargetSumExceedsCap {
                    region: spec.id,
                    sum,
                    cap: spec.cap,
                });
            }
            for (h, t) in &targets {
                let capacity = hospitals[h].capacity;
                if *t > capacity {
                    return Err(InstanceError::TargetExceedsCapacity {
                        region: spec.id.clone(),
                        hospital: h.clone(),
                        target: *t,
                        capacity,
                    });
                }
            }
            resolved.push(Region {
                id: spec.id,
                hospitals: hs,
                cap: spec.cap,
                order: spec.order,
                targets,
            });
        }
        resolved.sort_by(|a, b| a.id.cmp(&b.id));

        let mut doctors = doctors;
        doctors.sort();

        let doctor_rank = doctor_prefs
            .iter()
            .map(|(d, prefs)| {
                let ranks = prefs
                    .iter()
                    .enumerate()
                    .map(|(i, h)| (h.clone(), i as u32 + 1))
                    .collect();
                (d.clone(), ranks)
            })
            .collect();
        let hospital_rank = hospitals
            .iter()
            .map(|(h, hosp)| {
                let ranks = hosp
                    .prefs
                    .iter()
                    .enumerate()
                    .map(|(i, d)| (d.clone(), i as u32 + 1))
                    .collect();
                (h.clone(), ranks)
            })
            .collect();

        Ok(Instance {
            doctors,
            hospitals,
            regions: resolved,
            doctor_prefs,
            doctor_rank,
            hospital_rank,
        })
    }

    fn from_file(file: InstanceFile) -> Result<Self, InstanceError> {
        let hospitals = file
            .hospitals
            .into_iter()
            .map(|(id, h)| {
                (
                    id,
                    Hospital {
                        region: h.region,
                        capacity: h.capacity,
                        prefs: h.prefs,
                    },
                )
            })
            .collect();
        Self::from_parts(file.doctors, file.doctor_prefs, hospitals, file.regions)
    }

    /// Doctors in id order.
    pub fn doctors(&self) -> &[DoctorId] {
        &self.doctors
    }

    /// Hospital ids in lexicographic order.
    pub fn hospital_ids(&self) -> impl Iterator<Item = &HospitalId> {
        self.hospitals.keys()
    }

    pub fn hospital_count(&self) -> usize {
        self.hospitals.len()
    }

    pub fn hospital(&self, h: &HospitalId) -> &Hospital {
        &self.hospitals[h]
    }

    pub fn get_hospital(&self, h: &HospitalId) -> Option<&Hospital> {
        self.hospitals.get(h)
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn region_of(&self, h: &HospitalId) -> &Region {
        let rid = &self.hospitals[h].region;
        self.regions
            .iter()
            .find(|r| &r.id == rid)
            .expect("hospital region resolved at validation")
    }

    pub fn doctor_prefs(&self, d: &DoctorId) -> &[HospitalId] {
        &self.doctor_prefs[d]
    }

    pub fn has_doctor(&self, d: &DoctorId) -> bool {
        self.doctor_prefs.contains_key(d)
    }

    /// 1-based position of `h` in `d`'s list; `None` when unacceptable.
    pub fn doctor_rank(&self, d: &DoctorId, h: &HospitalId) -> Option<u32> {
        self.doctor_rank[d].get(h).copied()
    }

    /// 1-based position of `d` in `h`'s ranking; `None` when unacceptable.
    pub fn hospital_rank(&self, h: &HospitalId, d: &DoctorId) -> Option<u32> {
        self.hospital_rank[h].get(d).copied()
    }

    pub fn acceptable_to_doctor(&self, d: &DoctorId, h: &HospitalId) -> bool {
        self.doctor_rank[d].contains_key(h)
    }

    pub fn acceptable_to_hospital(&self, h: &HospitalId, d: &DoctorId) -> bool {
        self.hospital_rank[h].contains_key(d)
    }

    /// Returns a copy of the instance with doctor `d`'s list replaced.
    ///
    /// Used by the strategy-proofness fuzzer; the replacement list must only
    /// name existing hospitals.
    pub fn with_doctor_prefs(
        &self,
        d: &DoctorId,
        prefs: Vec<HospitalId>,
    ) -> Result<Instance, InstanceError> {
        let mut doctor_prefs = self.doctor_prefs.clone();
        doctor_prefs.insert(d.clone(), prefs);
        let regions = self
            .regions
            .iter()
            .map(|r| RegionSpec {
                id: r.id.clone(),
                cap: r.cap,
                order: r.order.clone(),
                targets: r.targets.clone(),
            })
            .collect();
        Instance::from_parts(
            self.doctors.clone(),
            doctor_prefs,
            self.hospitals.clone(),
            regions,
        )
    }

    /// Canonical JSON value in the instance-file schema.
    pub fn to_json_value(&self) -> serde_json::Value {
        let file = InstanceFile {
            doctors: self.doctors.clone(),
            doctor_prefs: self.doctor_prefs.clone(),
            hospitals: self
                .hospitals
                .iter()
                .map(|(id, h)| {
                    (
                        id.clone(),
                        HospitalFile {
                            region: h.region.clone(),
                            capacity: h.capacity,
                            prefs: h.prefs.clone(),
                        },
                    )
                })
                .collect(),
            regions: self
                .regions
                .iter()
                .map(|r| RegionSpec {
                    id: r.id.clone(),
                    cap: r.cap,
                    order: r.order.clone(),
                    targets: r.targets.clone(),
                })
                .collect(),
        };
        serde_json::to_value(file).expect("instance serialization cannot fail")
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&self.to_json_value()).expect("instance serialization cannot fail")
    }
}

/// Parses and validates an instance file.
pub fn parse_instance(text: &str) -> Result<Instance, InstanceError> {
    let file: InstanceFile = serde_json::from_str(text)?;
    Instance::from_file(file)
}

/// Errors raised while parsing a matching file against an instance.
#[derive(Debug, Error)]
pub enum MatchingError {
    #[error("invalid matching json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("matching: unknown doctor `{0}`")]
    UnknownDoctor(DoctorId),
    #[error("matching: unknown hospital `{0}`")]
    UnknownHospital(HospitalId),
    #[error("matching: doctor `{0}` listed twice")]
    DuplicateDoctor(DoctorId),
    #[error("matching: doctor `{0}` missing from both matches and unmatched")]
    MissingDoctor(DoctorId),
}

#[derive(Serialize, Deserialize)]
struct MatchingFile {
    matches: BTreeMap<DoctorId, HospitalId>,
    unmatched: Vec<DoctorId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    distribution: Option<BTreeMap<HospitalId, u32>>,
}

/// An assignment of every doctor to a hospital or to being unmatched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matching {
    assignment: BTreeMap<DoctorId, Option<HospitalId>>,
}

impl Matching {
    /// Matching where every doctor of the instance is unmatched.
    pub fn empty(inst: &Instance) -> Self {
        Self {
            assignment: inst.doctors().iter().map(|d| (d.clone(), None)).collect(),
        }
    }

    /// Builds a matching from matched pairs; all other doctors are unmatched.
    pub fn from_pairs<I>(inst: &Instance, pairs: I) -> Self
    where
        I: IntoIterator<Item = (DoctorId, HospitalId)>,
    {
        let mut m = Self::empty(inst);
        for (d, h) in pairs {
            m.assignment.insert(d, Some(h));
        }
        m
    }

    pub fn hospital_of(&self, d: &DoctorId) -> Option<&HospitalId> {
        self.assignment.get(d).and_then(|h| h.as_ref())
    }

    pub fn assignment(&self) -> &BTreeMap<DoctorId, Option<HospitalId>> {
        &self.assignment
    }

    /// Doctors assigned to `h`, in id order (derived view).
    pub fn roster(&self, h: &HospitalId) -> Vec<&DoctorId> {
        self.assignment
            .iter()
            .filter_map(|(d, a)| (a.as_ref() == Some(h)).then_some(d))
            .collect()
    }

    /// Per-hospital headcount for every hospital of the instance.
    pub fn roster_sizes(&self, inst: &Instance) -> BTreeMap<HospitalId, u32> {
        let mut counts: BTreeMap<HospitalId, u32> =
            inst.hospital_ids().map(|h| (h.clone(), 0)).collect();
        for h in self.assignment.values().flatten() {
            if let Some(c) = counts.get_mut(h) {
                *c += 1;
            }
        }
        counts
    }

    pub fn matched_pairs(&self) -> impl Iterator<Item = (&DoctorId, &HospitalId)> {
        self.assignment
            .iter()
            .filter_map(|(d, a)| a.as_ref().map(|h| (d, h)))
    }

    pub fn unmatched(&self) -> Vec<&DoctorId> {
        self.assignment
            .iter()
            .filter_map(|(d, a)| a.is_none().then_some(d))
            .collect()
    }

    pub fn matched_count(&self) -> usize {
        self.assignment.values().filter(|a| a.is_some()).count()
    }

    /// Serializes in the standard matching shape, distribution included.
    pub fn to_json_value(&self, inst: &Instance) -> serde_json::Value {
        let file = MatchingFile {
            matches: self
                .matched_pairs()
                .map(|(d, h)| (d.clone(), h.clone()))
                .collect(),
            unmatched: self.unmatched().into_iter().cloned().collect(),
            distribution: Some(distribution_of(self, inst).into_counts()),
        };
        serde_json::to_value(file).expect("matching serialization cannot fail")
    }

    /// Parses the standard matching shape; every doctor of the instance must
    /// appear exactly once across `matches` and `unmatched`.
    pub fn from_json_str(text: &str, inst: &Instance) -> Result<Self, MatchingError> {
        let file: MatchingFile = serde_json::from_str(text)?;
        let mut assignment: BTreeMap<DoctorId, Option<HospitalId>> = BTreeMap::new();
        for (d, h) in file.matches {
            if !inst.has_doctor(&d) {
                return Err(MatchingError::UnknownDoctor(d));
            }
            if inst.get_hospital(&h).is_none() {
                return Err(MatchingError::UnknownHospital(h));
            }
            assignment.insert(d, Some(h));
        }
        for d in file.unmatched {
            if !inst.has_doctor(&d) {
                return Err(MatchingError::UnknownDoctor(d));
            }
            if assignment.insert(d.clone(), None).is_some() {
                return Err(MatchingError::DuplicateDoctor(d));
            }
        }
        for d in inst.doctors() {
            if !assignment.contains_key(d) {
                return Err(MatchingError::MissingDoctor(d.clone()));
            }
        }
        Ok(Matching { assignment })
    }
}

/// Per-hospital headcount vector, keyed by hospital id (lexicographic order).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct Distribution(BTreeMap<HospitalId, u32>);

impl Distribution {
    pub fn new(counts: BTreeMap<HospitalId, u32>) -> Self {
        Self(counts)
    }

    pub fn get(&self, h: &HospitalId) -> u32 {
        self.0.get(h).copied().unwrap_or(0)
    }

    /// Counts in lexicographic hospital-id order.
    pub fn as_vec(&self) -> Vec<u32> {
        self.0.values().copied().collect()
    }

    pub fn total(&self) -> u32 {
        self.0.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&HospitalId, u32)> {
        self.0.iter().map(|(h, c)| (h, *c))
    }

    pub fn into_counts(self) -> BTreeMap<HospitalId, u32> {
        self.0
    }
}

/// Headcount vector of a matching, one entry per hospital of the instance.
pub fn distribution_of(m: &Matching, inst: &Instance) -> Distribution {
    Distribution(m.roster_sizes(inst))
}

/// Doctor `d`'s payoff from an assignment, comparable across matchings.
///
/// A listed hospital scores by its depth from the bottom of her list (top
/// choice highest), staying unmatched scores 0, and any unlisted hospital
/// scores -1.
pub fn doctor_utility(inst: &Instance, d: &DoctorId, assigned: Option<&HospitalId>) -> i64 {
    match assigned {
        None => 0,
        Some(h) => match inst.doctor_rank(d, h) {
            Some(rank) => inst.doctor_prefs(d).len() as i64 - rank as i64 + 1,
            None => -1,
        },
    }
}

/// Additive responsive completion of hospital `h`'s ranking over doctor sets:
/// weight 2^(|D| - rank) per member, `None` (read: minus infinity) when the
/// set holds an unacceptable doctor or exceeds the hospital's capacity.
pub fn hospital_set_utility(
    inst: &Instance,
    h: &HospitalId,
    set: &BTreeSet<DoctorId>,
) -> Option<u128> {
    if set.len() as u32 > inst.hospital(h).capacity {
        return None;
    }
    let n = inst.doctors().len() as u32;
    assert!(n <= 120, "market too large for set-utility weights");
    let mut total: u128 = 0;
    for d in set {
        let rank = inst.hospital_rank(h, d)?;
        total += 1u128 << (n - rank);
    }
    Some(total)
}


#[cfg(test)]
mod tests {
    use super::testutil::{matching, three_hospital_market};
    use super::*;

    #[test]
    fn parses_three_hospital_market_from_json() {
        let inst = three_hospital_market([1, 1, 2], ["h1", "h2", "h3"]);
        let text = inst.to_json_string();
        let parsed = parse_instance(&text).unwrap();
        assert_eq!(parsed.doctors().len(), 5);
        assert_eq!(parsed.hospital_count(), 3);
        assert_eq!(parsed.regions().len(), 1);
        assert_eq!(parsed.regions()[0].cap, 4);
        for h in parsed.hospital_ids() {
            assert_eq!(parsed.hospital(h).capacity, 2);
        }
    }

    #[test]
    fn round_trips_field_for_field() {
        let inst = three_hospital_market([1, 2, 1], ["h2", "h1", "h3"]);
        let reparsed = parse_instance(&inst.to_json_string()).unwrap();
        assert_eq!(inst, reparsed);
    }

    #[test]
    fn zero_doctor_market_is_valid() {
        let inst = Instance::from_parts(
            vec![],
            BTreeMap::new(),
            [(
                HospitalId::from("h1"),
                Hospital {
                    region: RegionId::from("r"),
                    capacity: 1,
                    prefs: vec![],
                },
            )]
            .into_iter()
            .collect(),
            vec![RegionSpec {
                id: RegionId::from("r"),
                cap: 1,
                order: vec![HospitalId::from("h1")],
                targets: BTreeMap::new(),
            }],
        )
        .unwrap();
        assert!(inst.doctors().is_empty());
    }

    #[test]
    fn rejects_target_sum_above_regional_cap() {
        let inst = three_hospital_market([1, 1, 2], ["h1", "h2", "h3"]);
        let mut value = inst.to_json_value();
        value["regions"][0]["targets"]["h3"] = serde_json::json!(3);
        let err = parse_instance(&value.to_string()).unwrap_err();
        match err {
            InstanceError::TargetSumExceedsCap { sum, cap, .. } => {
                assert_eq!((sum, cap), (5, 4));
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn rejects_duplicates_and_dangling_references() {
        let inst = three_hospital_market([1, 1, 2], ["h1", "h2", "h3"]);
        let mut dup = inst.to_json_value();
        dup["doctors"] = serde_json::json!(["d1", "d1"]);
        assert!(matches!(
            parse_instance(&dup.to_string()).unwrap_err(),
            InstanceError::DuplicateId {
                field: "doctors",
                ..
            }
        ));

        let mut dangling = inst.to_json_value();
        dangling["doctor_prefs"]["d1"] = serde_json::json!(["h9"]);
        assert!(matches!(
            parse_instance(&dangling.to_string()).unwrap_err(),
            InstanceError::DanglingReference {
                kind: "hospital",
                ..
            }
        ));

        let mut bad_order = inst.to_json_value();
        bad_order["regions"][0]["order"] = serde_json::json!(["h1", "h2"]);
        assert!(matches!(
            parse_instance(&bad_order.to_string()).unwrap_err(),
            InstanceError::OrderNotPermutation { .. }
        ));
    }

    #[test]
    fn distribution_counts_roster_sizes() {
        let inst = three_hospital_market([1, 1, 2], ["h1", "h2", "h3"]);
        let m = matching(
            &inst,
            &[("d1", "h1"), ("d2", "h1"), ("d3", "h2"), ("d5", "h3")],
        );
        assert_eq!(distribution_of(&m, &inst).as_vec(), vec![2, 1, 1]);
        assert_eq!(
            distribution_of(&Matching::empty(&inst), &inst).as_vec(),
            vec![0, 0, 0]
        );
    }

    #[test]
    fn distribution_on_two_hospital_market() {
        let doctors: Vec<DoctorId> = ["d1", "d2", "d3"]
            .iter()
            .map(|d| DoctorId::from(*d))
            .collect();
        let prefs: BTreeMap<DoctorId, Vec<HospitalId>> = doctors
            .iter()
            .map(|d| {
                (
                    d.clone(),
                    vec![HospitalId::from("h1"), HospitalId::from("h2")],
                )
            })
            .collect();
        let hospitals = ["h1", "h2"]
            .iter()
            .map(|h| {
                (
                    HospitalId::from(*h),
                    Hospital {
                        region: RegionId::from("r"),
                        capacity: 2,
                        prefs: doctors.clone(),
                    },
                )
            })
            .collect();
        let inst = Instance::from_parts(
            doctors,
            prefs,
            hospitals,
            vec![RegionSpec {
                id: RegionId::from("r"),
                cap: 4,
                order: vec![HospitalId::from("h1"), HospitalId::from("h2")],
                targets: BTreeMap::new(),
            }],
        )
        .unwrap();
        let m = matching(&inst, &[("d1", "h1"), ("d2", "h1"), ("d3", "h2")]);
        assert_eq!(distribution_of(&m, &inst).as_vec(), vec![2, 1]);
    }

    #[test]
    fn matching_json_round_trip_and_bidirectionality() {
        let inst = three_hospital_market([1, 1, 2], ["h1", "h2", "h3"]);
        let m = matching(&inst, &[("d1", "h1"), ("d2", "h2"), ("d5", "h3")]);
        let text = m.to_json_value(&inst).to_string();
        let parsed = Matching::from_json_str(&text, &inst).unwrap();
        assert_eq!(m, parsed);

        // Rebuilding the assignment from derived rosters is the identity.
        let mut rebuilt = Matching::empty(&inst);
        for h in inst.hospital_ids() {
            for d in m.roster(h) {
                rebuilt.assignment.insert(d.clone(), Some(h.clone()));
            }
        }
        assert_eq!(rebuilt, m);
    }

    #[test]
    fn matching_json_requires_every_doctor() {
        let inst = three_hospital_market([1, 1, 2], ["h1", "h2", "h3"]);
        let err = Matching::from_json_str(
            r#"{"matches":{"d1":"h1"},"unmatched":["d2","d3","d4"]}"#,
            &inst,
        )
        .unwrap_err();
        assert!(matches!(err, MatchingError::MissingDoctor(d) if d.as_str() == "d5"));
    }

    #[test]
    fn doctor_utility_orders_outcomes() {
        let inst = three_hospital_market([1, 1, 2], ["h1", "h2", "h3"]);
        let d5 = DoctorId::from("d5");
        let h2 = HospitalId::from("h2");
        let h3 = HospitalId::from("h3");
        let h1 = HospitalId::from("h1");
        let top = doctor_utility(&inst, &d5, Some(&h2));
        let second = doctor_utility(&inst, &d5, Some(&h3));
        let unmatched = doctor_utility(&inst, &d5, None);
        let unlisted = doctor_utility(&inst, &d5, Some(&h1));
        assert!(top > second && second > unmatched && unmatched > unlisted);
    }

    /// Exhaustive check of the three responsiveness conditions for the
    /// additive set-utility completion.
    ///
    /// Conditions (i) and (ii) quantify over the completion's strict domain
    /// (subsets of acceptable doctors within capacity) while the swapped-in
    /// doctor ranges over everyone, acceptable or not; outside that domain
    /// all sets collapse to minus infinity and the biconditionals become
    /// vacuous. Condition (iii) quantifies over every over-capacity subset.
    fn assert_responsive(inst: &Instance, h: &HospitalId) {
        let doctors = inst.doctors();
        let n = doctors.len();
        let cap = inst.hospital(h).capacity as usize;
        let ge = |a: &BTreeSet<DoctorId>, b: &BTreeSet<DoctorId>| {
            hospital_set_utility(inst, h, a) >= hospital_set_utility(inst, h, b)
        };
        let indiv_ge = |a: &DoctorId, b: &DoctorId| {
            let ua = hospital_set_utility(inst, h, &BTreeSet::from([a.clone()]));
            let ub = hospital_set_utility(inst, h, &BTreeSet::from([b.clone()]));
            ua >= ub
        };
        for mask in 0u32..(1 << n) {
            let set: BTreeSet<DoctorId> = (0..n)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| doctors[i].clone())
                .collect();
            if set.len() > cap {
                // (iii): the empty set beats any over-capacity set.
                assert!(
                    hospital_set_utility(inst, h, &BTreeSet::new())
                        > hospital_set_utility(inst, h, &set)
                );
                continue;
            }
            if !set.iter().all(|d| inst.acceptable_to_hospital(h, d)) {
                continue;
            }
            for d in doctors.iter().filter(|d| !set.contains(*d)) {
                for d_prime in set.iter() {
                    let mut swapped = set.clone();
                    swapped.remove(d_prime);
                    swapped.insert(d.clone());
                    // (i): swaps compare like the individuals swapped.
                    assert_eq!(ge(&swapped, &set), indiv_ge(d, d_prime));
                }
            }
            for d_prime in set.iter() {
                let mut dropped = set.clone();
                dropped.remove(d_prime);
                let keeps_value = ge(&set, &dropped);
                let acceptable =
                    hospital_set_utility(inst, h, &BTreeSet::from([d_prime.clone()])) >= Some(0);
                // (ii): keeping a member pays exactly when they are acceptable.
                assert_eq!(keeps_value, acceptable);
            }
        }
    }

    #[test]
    fn set_utility_is_responsive() {
        let inst = three_hospital_market([1, 1, 2], ["h1", "h2", "h3"]);
        for h in inst.hospital_ids() {
            assert_responsive(&inst, h);
        }

        // A market with unacceptable doctors and capacity 3.
        let doctors: Vec<DoctorId> = ["a", "b", "c", "d", "e"]
            .iter()
            .map(|d| DoctorId::from(*d))
            .collect();
        let prefs: BTreeMap<DoctorId, Vec<HospitalId>> = doctors
            .iter()
            .map(|d| (d.clone(), vec![HospitalId::from("h")]))
            .collect();
        let inst = Instance::from_parts(
            doctors,
            prefs,
            [(
                HospitalId::from("h"),
                Hospital {
                    region: RegionId::from("r"),
                    capacity: 3,
                    prefs: vec![
                        DoctorId::from("c"),
                        DoctorId::from("a"),
                        DoctorId::from("e"),
                    ],
                },
            )]
            .into_iter()
            .collect(),
            vec![RegionSpec {
                id: RegionId::from("r"),
                cap: 3,
                order: vec![HospitalId::from("h")],
                targets: BTreeMap::new(),
            }],
        )
        .unwrap();
        assert_responsive(&inst, &HospitalId::from("h"));
    }
}
