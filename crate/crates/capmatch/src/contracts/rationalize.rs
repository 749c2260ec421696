//! Utility rationalization of the hospital side's choice rules.
//!
//! Every contract set gets an integer score; the choice rule must coincide
//! with the score-maximizing subset of any pool. Infeasible sets are excluded
//! from the argmax domain instead of carrying a sentinel score, and instead
//! of a small-epsilon tiebreak the layers separate by big integer weights:
//! filled target seats dominate round-robin seat priority, which dominates
//! the hospitals' own ranking weights.

use std::collections::BTreeMap;

use thiserror::Error;

use super::{hospital_side_choice, Contract, ContractSet, HospitalSideChoice};
use crate::model::{HospitalId, Instance, Region};
use crate::verify::BoundExceeded;

#[derive(Debug, Error)]
pub enum RationalizeError {
    #[error(transparent)]
    Bound(#[from] BoundExceeded),
    #[error("non-unique argmax at score {score}: {a:?} vs {b:?}")]
    NonUniqueArgmax {
        score: i128,
        a: Vec<Contract>,
        b: Vec<Contract>,
    },
}

/// Why the rationalizers and the procedural choice disagreed.
#[derive(Debug, Error)]
pub enum RationalizationMismatch {
    #[error(transparent)]
    Bound(#[from] BoundExceeded),
    #[error("non-unique argmax over subsets of {base:?}")]
    NonUnique { base: Vec<Contract> },
    #[error("argmax {argmax:?} differs from choice {chosen:?} on pool {base:?}")]
    Disagree {
        base: Vec<Contract>,
        argmax: Vec<Contract>,
        chosen: Vec<Contract>,
    },
}

fn checked_shl(bits: u32, context: &'static str) -> i128 {
    assert!(
        bits < 126,
        "market too large for rationalizer weights: {context}"
    );
    1i128 << bits
}

/// Hospital-ranking weight sum: 2^(|D| - rank) per contract, `None` when a
/// contract's doctor is unacceptable to its hospital.
fn hospital_weight_sum(y: &ContractSet, inst: &Instance) -> Option<i128> {
    let n = inst.doctors().len() as u32;
    let mut total = 0i128;
    for c in y.iter() {
        let rank = inst.hospital_rank(&c.hospital, &c.doctor)?;
        total += checked_shl(n - rank, "hospital weight");
    }
    Some(total)
}

/// Round-robin seat positions for one region: `positions[h][k-1]` is the
/// 1-based slot of hospital `h`'s k-th seat beyond its target in the cyclic
/// order, skipping seats no feasible distribution could grant.
fn round_robin_positions(
    inst: &Instance,
    region: &Region,
) -> (BTreeMap<HospitalId, Vec<u32>>, u32) {
    let grantable: BTreeMap<&HospitalId, u32> = region
        .order
        .iter()
        .map(|h| {
            let beyond_target = inst.hospital(h).capacity - region.targets[h];
            (h, beyond_target.min(region.cap))
        })
        .collect();
    let max_cycles = grantable.values().copied().max().unwrap_or(0);
    let mut positions: BTreeMap<HospitalId, Vec<u32>> = region
        .hospitals
        .iter()
        .map(|h| (h.clone(), Vec::new()))
        .collect();
    let mut next = 1u32;
    for cycle in 1..=max_cycles {
        for h in &region.order {
            if cycle <= grantable[h] {
                positions.get_mut(h).unwrap().push(next);
                next += 1;
            }
        }
    }
    (positions, next - 1)
}

fn region_seat_priority(inst: &Instance, region: &Region, xi: &BTreeMap<&HospitalId, u32>) -> i128 {
    let (positions, total) = round_robin_positions(inst, region);
    let mut score = 0i128;
    for h in &region.hospitals {
        let count = xi.get(h).copied().unwrap_or(0);
        let extras = count.saturating_sub(region.targets[h]);
        for k in 0..extras {
            let pos = positions[h][k as usize];
            score += checked_shl(total - pos, "seat priority");
        }
    }
    score
}

/// A power of two strictly larger than any hospital-weight sum and any
/// seat-priority sum the instance can produce.
fn big_weight(inst: &Instance) -> i128 {
    let n = inst.doctors().len() as u32;
    let mut ceiling = 1i128;
    for h in inst.hospital_ids() {
        for d in &inst.hospital(h).prefs {
            let rank = inst.hospital_rank(h, d).unwrap();
            ceiling += checked_shl(n - rank, "hospital weight bound");
        }
    }
    for region in inst.regions() {
        let (_, total) = round_robin_positions(inst, region);
        ceiling += checked_shl(total, "seat priority bound");
    }
    let mut big = 1i128;
    while big <= ceiling {
        big = big
            .checked_mul(2)
            .expect("market too large for rationalizer weights");
    }
    big
}

/// Integer score rationalizing the hospital side's choice in the given
/// market; `None` stands for minus infinity (an infeasible distribution or a
/// hospital-unacceptable contract).
///
/// Original market: filled target seats weigh `BIG^2` each, round-robin seat
/// priority weighs `BIG`, and the hospitals' own ranking weights break the
/// remaining ties. Shadow market: ranking weights alone, gated by the
/// profile's capacities.
pub fn rationalizer_value(
    market: &HospitalSideChoice,
    y: &ContractSet,
    inst: &Instance,
) -> Option<i128> {
    let weights = hospital_weight_sum(y, inst)?;
    let xi_full = y.xi(inst);
    let xi: BTreeMap<&HospitalId, u32> = xi_full.iter().collect();
    match market {
        HospitalSideChoice::Shadow(caps) => {
            for (h, count) in &xi {
                if *count > caps.get(h).unwrap_or(0) {
                    return None;
                }
            }
            Some(weights)
        }
        HospitalSideChoice::Original => {
            for (h, count) in &xi {
                if *count > inst.hospital(h).capacity {
                    return None;
                }
            }
            let mut target_fill = 0i128;
            let mut priority = 0i128;
            for region in inst.regions() {
                let total: u32 = region.hospitals.iter().map(|h| xi[h]).sum();
                if total > region.cap {
                    return None;
                }
                for h in &region.hospitals {
                    target_fill += i128::from(xi[h].min(region.targets[h]));
                }
                priority += region_seat_priority(inst, region, &xi);
            }
            let big = big_weight(inst);
            let squared = big.checked_mul(big).expect("rationalizer weight overflow");
            Some(
                squared
                    .checked_mul(target_fill)
                    .and_then(|t| t.checked_add(big.checked_mul(priority)?))
                    .and_then(|t| t.checked_add(weights))
                    .expect("rationalizer weight overflow"),
            )
        }
    }
}

fn subset(items: &[Contract], mask: u32) -> ContractSet {
    items
        .iter()
        .enumerate()
        .filter(|(i, _)| mask & (1 << i) != 0)
        .map(|(_, c)| c.clone())
        .collect()
}

/// Exhaustive score-maximizing subset of `x` in the given market.
///
/// The domain is every feasible subset of `x`'s hospital-acceptable
/// contracts; the maximum must be unique, anything else signals a weight
/// scheme bug. Must agree with [`hospital_side_choice`].
pub fn argmax_choice(
    market: &HospitalSideChoice,
    x: &ContractSet,
    inst: &Instance,
    bound: usize,
) -> Result<ContractSet, RationalizeError> {
    let items: Vec<Contract> = x
        .iter()
        .filter(|c| inst.acceptable_to_hospital(&c.hospital, &c.doctor))
        .cloned()
        .collect();
    if items.len() > bound {
        return Err(BoundExceeded {
            what: "argmax pool",
            got: items.len(),
            bound,
        }
        .into());
    }
    let n = items.len();
    let mut best: Option<(i128, u32)> = None;
    let mut tied_with: Option<u32> = None;
    for mask in 0u32..(1u32 << n) {
        let candidate = subset(&items, mask);
        let Some(score) = rationalizer_value(market, &candidate, inst) else {
            continue;
        };
        match best {
            None => best = Some((score, mask)),
            Some((s, m)) => {
                if score > s {
                    best = Some((score, mask));
                    tied_with = None;
                } else if score == s && mask != m {
                    tied_with = Some(mask);
                }
            }
        }
    }
    let (score, mask) = best.expect("the empty set is always feasible");
    if let Some(other) = tied_with {
        return Err(RationalizeError::NonUniqueArgmax {
            score,
            a: subset(&items, mask).iter().cloned().collect(),
            b: subset(&items, other).iter().cloned().collect(),
        });
    }
    Ok(subset(&items, mask))
}

/// Verifies argmax-choice agreement on every subset of `universe`: for each
/// pool, the unique score maximizer must equal the procedural choice.
///
/// Scores for all subsets are tabulated once, so the check runs in
/// `O(3^|universe|)` comparisons.
pub fn rationalization_agreement(
    inst: &Instance,
    market: &HospitalSideChoice,
    universe: &[Contract],
    bound: usize,
) -> Result<(), RationalizationMismatch> {
    if universe.len() > bound {
        return Err(BoundExceeded {
            what: "contract universe",
            got: universe.len(),
            bound,
        }
        .into());
    }
    let n = universe.len();
    let scores: Vec<Option<i128>> = (0u32..(1u32 << n))
        .map(|mask| rationalizer_value(market, &subset(universe, mask), inst))
        .collect();
    let index: BTreeMap<&Contract, usize> =
        universe.iter().enumerate().map(|(i, c)| (c, i)).collect();

    for pool in 0u32..(1u32 << n) {
        let mut best: Option<(i128, u32)> = None;
        let mut unique = true;
        let mut sub = pool;
        loop {
            if let Some(score) = scores[sub as usize] {
                match best {
                    None => best = Some((score, sub)),
                    Some((s, m)) => {
                        if score > s {
                            best = Some((score, sub));
                            unique = true;
                        } else if score == s && sub != m {
                            unique = false;
                        }
                    }
                }
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & pool;
        }
        let (_, argmax_mask) = best.expect("the empty set is always feasible");
        if !unique {
            return Err(RationalizationMismatch::NonUnique {
                base: subset(universe, pool).iter().cloned().collect(),
            });
        }
        let chosen = hospital_side_choice(market, &subset(universe, pool), inst);
        let mut chosen_mask = 0u32;
        for c in chosen.iter() {
            chosen_mask |= 1 << index[c];
        }
        if chosen_mask != argmax_mask {
            return Err(RationalizationMismatch::Disagree {
                base: subset(universe, pool).iter().cloned().collect(),
                argmax: subset(universe, argmax_mask).iter().cloned().collect(),
                chosen: chosen.iter().cloned().collect(),
            });
        }
    }
    Ok(())
}
