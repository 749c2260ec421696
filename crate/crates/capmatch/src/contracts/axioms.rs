//! Exhaustive checkers for the three choice-function axioms that make the
//! cumulative offer process produce a doctor-optimal stable allocation:
//! substitutability, the law of aggregate demand, and irrelevance of rejected
//! contracts. All three scan every subset of a bounded contract universe via
//! a precomputed choice table.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{Contract, ContractSet};
use crate::verify::BoundExceeded;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AxiomName {
    Substitutability,
    LawOfAggregateDemand,
    IrrelevanceOfRejectedContracts,
}

/// A witness that an axiom fails: the base set plus the contract(s) whose
/// addition exposes the violation.
#[derive(Debug, Clone, Serialize)]
pub struct Counterexample {
    #[serde(rename = "X")]
    pub base: Vec<Contract>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<Contract>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_prime: Option<Contract>,
    #[serde(rename = "X_prime", skip_serializing_if = "Option::is_none")]
    pub base_prime: Option<Vec<Contract>>,
    pub axiom: AxiomName,
}

#[derive(Debug, Clone, Serialize)]
pub struct AxiomVerdict {
    pub holds: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Counterexample>,
}

impl AxiomVerdict {
    fn pass() -> Self {
        Self {
            holds: true,
            counterexample: None,
        }
    }

    fn fail(cx: Counterexample) -> Self {
        Self {
            holds: false,
            counterexample: Some(cx),
        }
    }
}

/// Choice values for every subset of a small universe, as bitmasks.
struct ChoiceTable<'a> {
    universe: &'a [Contract],
    table: Vec<u32>,
}

impl<'a> ChoiceTable<'a> {
    fn build<F>(universe: &'a [Contract], choose: F, bound: usize) -> Result<Self, BoundExceeded>
    where
        F: Fn(&ContractSet) -> ContractSet,
    {
        if universe.len() > bound {
            return Err(BoundExceeded {
                what: "contract universe",
                got: universe.len(),
                bound,
            });
        }
        let index: BTreeMap<&Contract, usize> =
            universe.iter().enumerate().map(|(i, c)| (c, i)).collect();
        let n = universe.len();
        let mut table = Vec::with_capacity(1 << n);
        for mask in 0u32..(1u32 << n) {
            let subset: ContractSet = universe
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, c)| c.clone())
                .collect();
            let chosen = choose(&subset);
            let mut out = 0u32;
            for c in chosen.iter() {
                let i = index
                    .get(c)
                    .expect("choice returned a contract outside its input");
                assert!(mask & (1 << i) != 0, "choice is not a subset of its input");
                out |= 1 << i;
            }
            table.push(out);
        }
        Ok(Self { universe, table })
    }

    fn contracts(&self, mask: u32) -> Vec<Contract> {
        self.universe
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, c)| c.clone())
            .collect()
    }
}

/// Substitutability: a contract rejected from a pool stays rejected when the
/// pool grows. Checked for every subset of the universe and every pair of
/// added contracts.
pub fn check_substitutability<F>(
    universe: &[Contract],
    choose: F,
    bound: usize,
) -> Result<AxiomVerdict, BoundExceeded>
where
    F: Fn(&ContractSet) -> ContractSet,
{
    let t = ChoiceTable::build(universe, choose, bound)?;
    let n = universe.len();
    for mask in 0u32..(1u32 << n) {
        for x in 0..n {
            let with_x = mask | (1 << x);
            if t.table[with_x as usize] & (1 << x) != 0 {
                continue;
            }
            for x_prime in 0..n {
                let grown = with_x | (1 << x_prime);
                if t.table[grown as usize] & (1 << x) != 0 {
                    return Ok(AxiomVerdict::fail(Counterexample {
                        base: t.contracts(mask),
                        x: Some(universe[x].clone()),
                        x_prime: Some(universe[x_prime].clone()),
                        base_prime: None,
                        axiom: AxiomName::Substitutability,
                    }));
                }
            }
        }
    }
    Ok(AxiomVerdict::pass())
}

/// Law of aggregate demand: growing the pool never shrinks the number of
/// chosen contracts. Checked over every nested subset pair.
pub fn check_law_of_aggregate_demand<F>(
    universe: &[Contract],
    choose: F,
    bound: usize,
) -> Result<AxiomVerdict, BoundExceeded>
where
    F: Fn(&ContractSet) -> ContractSet,
{
    let t = ChoiceTable::build(universe, choose, bound)?;
    let n = universe.len();
    for mask in 0u32..(1u32 << n) {
        let size = t.table[mask as usize].count_ones();
        let mut sub = mask;
        loop {
            if t.table[sub as usize].count_ones() > size {
                return Ok(AxiomVerdict::fail(Counterexample {
                    base: t.contracts(mask),
                    x: None,
                    x_prime: None,
                    base_prime: Some(t.contracts(sub)),
                    axiom: AxiomName::LawOfAggregateDemand,
                }));
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & mask;
        }
    }
    Ok(AxiomVerdict::pass())
}

/// Irrelevance of rejected contracts: adding a contract that would not be
/// chosen leaves the choice unchanged.
pub fn check_irc<F>(
    universe: &[Contract],
    choose: F,
    bound: usize,
) -> Result<AxiomVerdict, BoundExceeded>
where
    F: Fn(&ContractSet) -> ContractSet,
{
    let t = ChoiceTable::build(universe, choose, bound)?;
    let n = universe.len();
    for mask in 0u32..(1u32 << n) {
        for (x, contract) in universe.iter().enumerate() {
            if mask & (1 << x) != 0 {
                continue;
            }
            let with_x = mask | (1 << x);
            if t.table[with_x as usize] & (1 << x) != 0 {
                continue;
            }
            if t.table[with_x as usize] != t.table[mask as usize] {
                return Ok(AxiomVerdict::fail(Counterexample {
                    base: t.contracts(mask),
                    x: Some(contract.clone()),
                    x_prime: None,
                    base_prime: None,
                    axiom: AxiomName::IrrelevanceOfRejectedContracts,
                }));
            }
        }
    }
    Ok(AxiomVerdict::pass())
}

/// Deliberately broken choice rules that the checkers must catch; they exist
/// to prove the axiom scans can fail.
pub mod adversarial {
    use super::super::ContractSet;

    /// Keeps applicants only when at least two are present; rejects a lone
    /// applicant. Violates substitutability.
    pub fn keep_only_with_company(x: &ContractSet) -> ContractSet {
        if x.len() >= 2 {
            x.clone()
        } else {
            ContractSet::new()
        }
    }

    /// Chooses everything from small pools and nothing from larger ones.
    /// Violates the law of aggregate demand.
    pub fn collapses_on_crowds(x: &ContractSet) -> ContractSet {
        if x.len() <= 1 {
            x.clone()
        } else {
            ContractSet::new()
        }
    }

    /// Takes one or two contracts depending on the parity of the pool size,
    /// so a rejected contract still changes the outcome. Violates the
    /// irrelevance of rejected contracts.
    pub fn parity_sensitive(x: &ContractSet) -> ContractSet {
        let take = if x.len() % 2 == 1 { 2 } else { 1 };
        x.iter().take(take.min(x.len())).cloned().collect()
    }
}
