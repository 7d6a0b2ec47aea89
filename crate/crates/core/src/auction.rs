//! Winner determination and payments.
//!
//! Additive searchers face one second-price auction per transaction. Single-minded searchers
//! go through the greedy ICA-SM mechanism: rank by `bid/√|bundle|`, accept every bundle that
//! is disjoint from those already accepted, charge each winner a critical price derived from
//! a later-ranked conflicting searcher.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_traits::Zero;
use serde::Serialize;

use crate::coalition::CoalitionMask;
use crate::error::{Error, Result};
use crate::instance::{is_idle_transaction, AuctionInstance, Bid, PaymentRule, ValuationMode};
use crate::money::{Money, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Winner {
    pub searcher: usize,
    /// Transactions allocated to the searcher, ascending.
    #[serde(rename = "bundle")]
    pub transactions: Vec<usize>,
    pub payment: Money,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AllocationOutcome {
    /// Ordered by searcher index.
    pub winners: Vec<Winner>,
    pub revenue: Money,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rule: Option<PaymentRule>,
}

impl AllocationOutcome {
    pub fn empty(rule: Option<PaymentRule>) -> Self {
        Self {
            winners: Vec::new(),
            revenue: Money::zero(),
            rule,
        }
    }

    pub fn payment_of(&self, searcher: usize) -> Money {
        self.winners
            .iter()
            .find(|w| w.searcher == searcher)
            .map(|w| w.payment.clone())
            .unwrap_or_default()
    }

    pub fn winner_set(&self) -> Vec<usize> {
        self.winners.iter().map(|w| w.searcher).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("outcome serialises")
    }
}

/// Exact comparison of `b_i/√size_i` against `b_j/√size_j` for non-negative bids, via
/// `b_i²·size_j` vs `b_j²·size_i`. `Equal` means a tie.
pub fn compare_rank_keys(b_i: &Rational, size_i: usize, b_j: &Rational, size_j: usize) -> Ordering {
    let lhs = b_i * b_i * Rational::from_integer(BigInt::from(size_j));
    let rhs = b_j * b_j * Rational::from_integer(BigInt::from(size_i));
    lhs.cmp(&rhs)
}

/// One second-price auction per transaction. Ties go to the lowest searcher index and a lone
/// bidder pays nothing.
pub fn run_spa_vcg(inst: &AuctionInstance) -> Result<AllocationOutcome> {
    inst.require_mode(ValuationMode::Additive)?;
    let values: Vec<&[Rational]> = inst
        .searchers
        .iter()
        .map(|s| match &s.bid {
            Bid::Additive { values } => values.as_slice(),
            Bid::SingleMinded { .. } => unreachable!("mode checked"),
        })
        .collect();
    let mut won: Vec<Vec<usize>> = vec![Vec::new(); inst.m()];
    let mut paid: Vec<Rational> = vec![Rational::zero(); inst.m()];
    for t in 0..inst.n {
        let Some((winner, second)) = second_price(values.iter().map(|v| &v[t])) else {
            continue;
        };
        won[winner].push(t);
        paid[winner] += second;
    }
    let winners: Vec<Winner> = won
        .into_iter()
        .zip(paid)
        .enumerate()
        .filter(|(_, (w, _))| !w.is_empty())
        .map(|(searcher, (transactions, payment))| Winner {
            searcher,
            transactions,
            payment: Money::from_rational(payment),
        })
        .collect();
    let revenue = winners.iter().map(|w| &w.payment).sum();
    Ok(AllocationOutcome {
        winners,
        revenue,
        rule: None,
    })
}

/// Index of the highest value (lowest index on ties) and the highest value among the rest.
pub(crate) fn second_price<'a, I>(values: I) -> Option<(usize, Rational)>
where
    I: Iterator<Item = &'a Rational>,
{
    let mut best: Option<(usize, &Rational)> = None;
    let mut second: Option<&Rational> = None;
    for (i, v) in values.enumerate() {
        match best {
            None => best = Some((i, v)),
            Some((_, b)) if v > b => {
                second = Some(b);
                best = Some((i, v));
            }
            Some(_) => {
                if second.is_none_or(|s| v > s) {
                    second = Some(v);
                }
            }
        }
    }
    best.map(|(i, _)| (i, second.cloned().unwrap_or_else(Rational::zero)))
}

/// Precomputed ranking, conflict graph and pairwise critical prices for a single-minded
/// instance. Ranking a sub-population only filters the global order, so one plan serves every
/// coalition.
#[derive(Debug, Clone)]
pub struct IcasmPlan {
    rule: PaymentRule,
    /// Searcher indices, best rank first.
    order: Vec<usize>,
    masks: Vec<CoalitionMask>,
    conflicts: Vec<Vec<bool>>,
    /// `price[i][j]`: what winner `i` pays when searcher `j` sets the price.
    price: Vec<Vec<Money>>,
}

impl IcasmPlan {
    pub fn new(inst: &AuctionInstance, rule: PaymentRule) -> Result<Self> {
        inst.require_mode(ValuationMode::SingleMinded)?;
        let bids: Vec<(&Rational, usize)> = inst
            .searchers
            .iter()
            .map(|s| match &s.bid {
                Bid::SingleMinded { bundle, bid } => (bid, bundle.len()),
                Bid::Additive { .. } => unreachable!("mode checked"),
            })
            .collect();
        let m = bids.len();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| {
            compare_rank_keys(bids[b].0, bids[b].1, bids[a].0, bids[a].1).then(a.cmp(&b))
        });
        let masks: Vec<CoalitionMask> = (0..m)
            .map(|i| inst.bundle_mask(i).expect("single-minded"))
            .collect();
        let conflicts = (0..m)
            .map(|a| (0..m).map(|b| masks[a].intersects(&masks[b])).collect())
            .collect();
        // b_j·√(|B_i|/|B_j|) = (b_j/|B_j|)·√(|B_i|·|B_j|)
        let price = (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| {
                        let (b_j, s_j) = bids[j];
                        let s_i = bids[i].1;
                        let coef = b_j / Rational::from_integer(BigInt::from(s_j));
                        Money::surd(coef, (s_i * s_j) as u64)
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            rule,
            order,
            masks,
            conflicts,
            price,
        })
    }

    pub fn rule(&self) -> PaymentRule {
        self.rule
    }

    pub fn ranking(&self) -> &[usize] {
        &self.order
    }

    pub fn bundle(&self, searcher: usize) -> &CoalitionMask {
        &self.masks[searcher]
    }

    /// Greedy allocation and payments among the searchers for which `present` holds.
    /// Returns `(searcher, payment)` for each winner in rank order.
    pub fn allocate<F: Fn(usize) -> bool>(&self, present: F) -> Vec<(usize, Money)> {
        let ranked: Vec<usize> = self.order.iter().copied().filter(|&s| present(s)).collect();
        let mut winners: Vec<usize> = Vec::new();
        let mut winner_pos: Vec<usize> = Vec::new();
        for (pos, &s) in ranked.iter().enumerate() {
            if winners.iter().all(|&w| !self.conflicts[w][s]) {
                winners.push(s);
                winner_pos.push(pos);
            }
        }
        winners
            .iter()
            .zip(&winner_pos)
            .map(|(&i, &pos)| (i, self.critical_price(&ranked, i, pos)))
            .collect()
    }

    fn critical_price(&self, ranked: &[usize], i: usize, pos: usize) -> Money {
        for (jpos, &j) in ranked.iter().enumerate().skip(pos + 1) {
            if !self.conflicts[i][j] {
                continue;
            }
            let accepted = match self.rule {
                PaymentRule::FirstConflict => true,
                PaymentRule::Strict => ranked[..jpos]
                    .iter()
                    .all(|&l| l == i || !self.conflicts[l][j]),
            };
            if accepted {
                return self.price[i][j].clone();
            }
        }
        Money::zero()
    }

    /// Revenue when only the searchers whose bundles fit inside `coalition` take part.
    pub fn revenue_within(&self, coalition: &CoalitionMask) -> Money {
        self.allocate(|s| self.masks[s].is_subset_of(coalition))
            .into_iter()
            .map(|(_, p)| p)
            .sum()
    }
}

/// ICA-SM on the whole instance.
pub fn run_icasm(inst: &AuctionInstance, rule: PaymentRule) -> Result<AllocationOutcome> {
    let plan = IcasmPlan::new(inst, rule)?;
    let mut winners: Vec<Winner> = plan
        .allocate(|_| true)
        .into_iter()
        .map(|(searcher, payment)| Winner {
            searcher,
            transactions: plan.bundle(searcher).iter().collect(),
            payment,
        })
        .collect();
    winners.sort_by_key(|w| w.searcher);
    let revenue = winners.iter().map(|w| &w.payment).sum();
    Ok(AllocationOutcome {
        winners,
        revenue,
        rule: Some(rule),
    })
}

/// Runs the mechanism matching the instance's valuation mode.
pub fn run_auction(inst: &AuctionInstance, rule: PaymentRule) -> Result<AllocationOutcome> {
    match inst.mode {
        ValuationMode::Additive => run_spa_vcg(inst),
        ValuationMode::SingleMinded => run_icasm(inst, rule),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FairnessReport {
    pub gamma_sums_to_one: bool,
    pub null_transactions_zero: bool,
    pub symmetric_transactions_equal: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PropertyReport {
    /// Per searcher: payment does not exceed the value of what was allocated.
    pub searcher_ir: Vec<bool>,
    /// Per transaction creator: reward `Γ_j·ℛ` is non-negative.
    pub creator_ir: Vec<bool>,
    pub no_deficit: bool,
    pub fairness: FairnessReport,
}

impl PropertyReport {
    pub fn individually_rational(&self) -> bool {
        self.searcher_ir.iter().chain(&self.creator_ir).all(|&b| b)
    }
}

fn tolerance() -> Money {
    Money::from_rational(Rational::new(1.into(), 1_000_000_000.into()))
}

/// Whether swapping transactions `a` and `b` leaves every searcher's bid unchanged.
fn swap_invariant(inst: &AuctionInstance, a: usize, b: usize) -> bool {
    inst.searchers.iter().all(|s| match &s.bid {
        Bid::SingleMinded { bundle, .. } => bundle.contains(&a) == bundle.contains(&b),
        Bid::Additive { values } => values[a] == values[b],
    })
}

/// Evaluates the matchmaking properties of an outcome together with a redistribution `gamma`.
/// Negative rewards are reported, not rejected.
pub fn check_matchmaking_properties(
    inst: &AuctionInstance,
    outcome: &AllocationOutcome,
    gamma: &[Money],
) -> Result<PropertyReport> {
    if gamma.len() != inst.n {
        return Err(Error::LengthMismatch {
            expected: inst.n,
            found: gamma.len(),
        });
    }
    let searcher_ir = (0..inst.m())
        .map(|s| match outcome.winners.iter().find(|w| w.searcher == s) {
            None => true,
            Some(w) => {
                let value = match &inst.searchers[s].bid {
                    Bid::SingleMinded { bid, .. } => Money::from_rational(bid.clone()),
                    Bid::Additive { values } => w
                        .transactions
                        .iter()
                        .map(|&t| Money::from_rational(values[t].clone()))
                        .sum(),
                };
                w.payment <= value
            }
        })
        .collect();
    let payments: Money = outcome.winners.iter().map(|w| &w.payment).sum();
    let rewards: Vec<Money> = gamma.iter().map(|g| g * &outcome.revenue).collect();
    let creator_ir = rewards
        .iter()
        .map(|r| r.signum() != Ordering::Less)
        .collect();
    let total_rewards: Money = rewards.iter().sum();
    let no_deficit = (&payments - &total_rewards).abs() <= tolerance();

    let gamma_sum: Money = gamma.iter().sum();
    let gamma_sums_to_one = (&gamma_sum - &Money::one()).abs() <= tolerance();
    let null_transactions_zero =
        (0..inst.n).all(|j| !is_idle_transaction(inst, j) || gamma[j].is_zero());
    let symmetric_transactions_equal = (0..inst.n)
        .all(|a| (a + 1..inst.n).all(|b| !swap_invariant(inst, a, b) || gamma[a] == gamma[b]));
    Ok(PropertyReport {
        searcher_ir,
        creator_ir,
        no_deficit,
        fairness: FairnessReport {
            gamma_sums_to_one,
            null_transactions_zero,
            symmetric_transactions_equal,
        },
    })
}
