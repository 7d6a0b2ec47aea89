//! The revenue game over transactions: `ν(T)` is what the matchmaker collects when only the
//! transactions in `T`, and the searchers whose bundles fit inside `T`, take part.

use std::collections::{BTreeSet, HashSet};

use dashmap::DashMap;
use rayon::prelude::*;

use crate::auction::{run_spa_vcg, IcasmPlan};
use crate::coalition::CoalitionMask;
use crate::error::{Error, Result};
use crate::instance::{AuctionInstance, Bid, PaymentRule, ValuationMode};
use crate::money::{Money, Rational};

/// Largest `n` for which full coalition enumeration is attempted.
pub const MAX_ENUMERATION_N: usize = 20;

/// A cooperative game over `players()` transactions.
pub trait CharacteristicFunction: Sync {
    fn players(&self) -> usize;
    fn value(&self, coalition: &CoalitionMask) -> Money;

    /// `ν(T ∪ {j}) − ν(T)`.
    fn marginal_contribution(&self, coalition: &CoalitionMask, j: usize) -> Result<Money> {
        if coalition.contains(j) {
            return Err(Error::AlreadyInCoalition(j));
        }
        Ok(self.value(&coalition.with(j)) - self.value(coalition))
    }

    /// ν for every coalition of a game with at most 20 players, indexed by bitmask.
    fn value_table(&self) -> Result<Vec<Money>> {
        let n = self.players();
        if n > MAX_ENUMERATION_N {
            return Err(Error::TooLarge {
                what: "full coalition enumeration",
                n,
                limit: MAX_ENUMERATION_N,
            });
        }
        Ok((0..1u64 << n)
            .into_par_iter()
            .map(|bits| self.value(&CoalitionMask::from_bits(n, bits)))
            .collect())
    }
}

/// Memo table of ν values for one instance and payment rule.
#[derive(Debug)]
pub struct CharacteristicCache {
    fingerprint: u64,
    rule: PaymentRule,
    entries: DashMap<CoalitionMask, Money>,
}

impl CharacteristicCache {
    pub fn new(inst: &AuctionInstance, rule: PaymentRule) -> Self {
        Self {
            fingerprint: inst.fingerprint(),
            rule,
            entries: DashMap::new(),
        }
    }

    pub fn matches(&self, inst: &AuctionInstance, rule: PaymentRule) -> bool {
        self.fingerprint == inst.fingerprint() && self.rule == rule
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, coalition: &CoalitionMask) -> Option<Money> {
        self.entries.get(coalition).map(|v| v.clone())
    }

    pub fn insert(&self, coalition: CoalitionMask, value: Money) {
        self.entries.entry(coalition).or_insert(value);
    }

    pub fn clear(&self) {
        self.entries.clear();
    }
}

/// The single-minded revenue game, with a shared memo of ν values.
#[derive(Debug)]
pub struct RstGame<'a> {
    instance: &'a AuctionInstance,
    plan: IcasmPlan,
    cache: Option<CharacteristicCache>,
}

impl<'a> RstGame<'a> {
    pub fn new(instance: &'a AuctionInstance, rule: PaymentRule) -> Result<Self> {
        Ok(Self {
            instance,
            plan: IcasmPlan::new(instance, rule)?,
            cache: Some(CharacteristicCache::new(instance, rule)),
        })
    }

    /// A game that recomputes every ν value; useful for very wide instances.
    pub fn uncached(instance: &'a AuctionInstance, rule: PaymentRule) -> Result<Self> {
        let mut game = Self::new(instance, rule)?;
        game.cache = None;
        Ok(game)
    }

    pub fn instance(&self) -> &AuctionInstance {
        self.instance
    }

    pub fn rule(&self) -> PaymentRule {
        self.plan.rule()
    }

    pub fn cache(&self) -> Option<&CharacteristicCache> {
        self.cache.as_ref()
    }

    /// ν(T), memoised.
    pub fn nu(&self, coalition: &CoalitionMask) -> Money {
        debug_assert_eq!(coalition.width(), self.instance.n);
        let Some(cache) = &self.cache else {
            return self.nu_uncached(coalition);
        };
        if let Some(v) = cache.get(coalition) {
            return v;
        }
        let v = self.nu_uncached(coalition);
        cache.insert(coalition.clone(), v.clone());
        v
    }

    pub fn nu_uncached(&self, coalition: &CoalitionMask) -> Money {
        self.plan.revenue_within(coalition)
    }

    /// Every distinct marginal contribution `ν(T ∪ {j}) − ν(T)` over all `j` and all
    /// `T ⊆ 𝒯∖{j}`.
    pub fn count_unique_marginals(&self) -> Result<UniqueMarginals> {
        let n = self.instance.n;
        let table = self.value_table()?;
        let distinct: HashSet<Money> = (0..n)
            .into_par_iter()
            .flat_map_iter(|j| {
                let bit = 1u64 << j;
                let table = &table;
                (0..1u64 << n)
                    .filter(move |s| s & bit == 0)
                    .map(move |s| &table[(s | bit) as usize] - &table[s as usize])
            })
            .collect();
        let values: BTreeSet<Money> = distinct.into_iter().collect();
        Ok(UniqueMarginals {
            count: values.len(),
            values,
        })
    }
}

impl CharacteristicFunction for RstGame<'_> {
    fn players(&self) -> usize {
        self.instance.n
    }

    fn value(&self, coalition: &CoalitionMask) -> Money {
        self.nu(coalition)
    }

    fn value_table(&self) -> Result<Vec<Money>> {
        let n = self.instance.n;
        if n > MAX_ENUMERATION_N {
            return Err(Error::TooLarge {
                what: "full coalition enumeration",
                n,
                limit: MAX_ENUMERATION_N,
            });
        }
        // The table is itself a complete memo; only read through the shared cache.
        Ok((0..1u64 << n)
            .into_par_iter()
            .map(|bits| {
                let mask = CoalitionMask::from_bits(n, bits);
                self.cache
                    .as_ref()
                    .and_then(|c| c.get(&mask))
                    .unwrap_or_else(|| self.nu_uncached(&mask))
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UniqueMarginals {
    pub count: usize,
    pub values: BTreeSet<Money>,
}

/// The additive revenue game: ν(T) is the second-price revenue when only the transactions in
/// `T` are auctioned.
#[derive(Debug)]
pub struct AdditiveGame<'a> {
    instance: &'a AuctionInstance,
    cache: DashMap<CoalitionMask, Money>,
}

impl<'a> AdditiveGame<'a> {
    pub fn new(instance: &'a AuctionInstance) -> Result<Self> {
        instance.require_mode(ValuationMode::Additive)?;
        Ok(Self {
            instance,
            cache: DashMap::new(),
        })
    }

    fn revenue_within(&self, coalition: &CoalitionMask) -> Money {
        let mut restricted = self.instance.clone();
        for s in &mut restricted.searchers {
            if let Bid::Additive { values } = &mut s.bid {
                for (t, v) in values.iter_mut().enumerate() {
                    if !coalition.contains(t) {
                        *v = Rational::default();
                    }
                }
            }
        }
        run_spa_vcg(&restricted).expect("additive mode").revenue
    }
}

impl CharacteristicFunction for AdditiveGame<'_> {
    fn players(&self) -> usize {
        self.instance.n
    }

    fn value(&self, coalition: &CoalitionMask) -> Money {
        if let Some(v) = self.cache.get(coalition) {
            return v.clone();
        }
        let v = self.revenue_within(coalition);
        self.cache.entry(coalition.clone()).or_insert(v.clone());
        v
    }
}

/// A game given directly by its value table (indexed by bitmask).
#[derive(Debug, Clone)]
pub struct TableGame {
    n: usize,
    values: Vec<Money>,
}

impl TableGame {
    pub fn new(n: usize, values: Vec<Money>) -> Result<Self> {
        if n > MAX_ENUMERATION_N {
            return Err(Error::TooLarge {
                what: "explicit value table",
                n,
                limit: MAX_ENUMERATION_N,
            });
        }
        if values.len() != 1 << n {
            return Err(Error::LengthMismatch {
                expected: 1 << n,
                found: values.len(),
            });
        }
        Ok(Self { n, values })
    }

    pub fn from_fn<F: Fn(u64) -> Money>(n: usize, f: F) -> Result<Self> {
        Self::new(
            n,
            (0..1u64 << n.min(MAX_ENUMERATION_N + 1)).map(f).collect(),
        )
    }
}

impl CharacteristicFunction for TableGame {
    fn players(&self) -> usize {
        self.n
    }

    fn value(&self, coalition: &CoalitionMask) -> Money {
        self.values[coalition.as_u64().expect("narrow mask") as usize].clone()
    }

    fn value_table(&self) -> Result<Vec<Money>> {
        Ok(self.values.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hardness::build_hard_instance;
    use crate::instance::worked_example;

    fn mask(n: usize, idx: &[usize]) -> CoalitionMask {
        CoalitionMask::from_indices(n, idx.iter().copied())
    }

    #[test]
    fn nu_on_worked_example() {
        let inst = worked_example();
        let game = RstGame::new(&inst, PaymentRule::FirstConflict).unwrap();
        assert_eq!(game.nu(&CoalitionMask::empty(4)), Money::zero());
        assert_eq!(game.nu(&mask(4, &[0, 1, 3])), Money::from_integer(8));
        assert_eq!(game.nu(&CoalitionMask::full(4)), Money::from_integer(16));
    }

    #[test]
    fn marginal_on_worked_example() {
        let inst = worked_example();
        let game = RstGame::new(&inst, PaymentRule::FirstConflict).unwrap();
        assert_eq!(
            game.marginal_contribution(&mask(4, &[1, 2, 3]), 0).unwrap(),
            Money::from_integer(8)
        );
        // No bundle fits in {t2}.
        assert_eq!(
            game.marginal_contribution(&CoalitionMask::empty(4), 2)
                .unwrap(),
            Money::zero()
        );
        assert!(matches!(
            game.marginal_contribution(&mask(4, &[0]), 0),
            Err(Error::AlreadyInCoalition(0))
        ));
    }

    #[test]
    fn hard_instance_witness_marginal() {
        // n = 4: select B0_1 only. T = B0_1 ∪ B1_1 = {t0, t1, t3}; B1_2 = {t1, t2} is
        // unselected, so t_u = B0_1 ∩ B1_2 = t1. Closed form: b1_1 − b0_1 + b0_1 = 9.
        let h = build_hard_instance(4).unwrap();
        let game = RstGame::new(&h.instance, PaymentRule::FirstConflict).unwrap();
        let tau = mask(4, &[0, 3]);
        assert_eq!(
            game.marginal_contribution(&tau, 1).unwrap(),
            Money::from_integer(9)
        );
    }

    #[test]
    fn unique_marginals_without_searchers() {
        let inst = AuctionInstance::single_minded(4, []).unwrap();
        let game = RstGame::new(&inst, PaymentRule::Strict).unwrap();
        let u = game.count_unique_marginals().unwrap();
        assert_eq!(u.count, 1);
        assert!(u.values.contains(&Money::zero()));
    }

    #[test]
    fn enumeration_limit() {
        let inst = AuctionInstance::single_minded(21, []).unwrap();
        let game = RstGame::new(&inst, PaymentRule::Strict).unwrap();
        assert!(matches!(
            game.count_unique_marginals(),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn cache_is_keyed_to_instance_and_rule() {
        let inst = worked_example();
        let game = RstGame::new(&inst, PaymentRule::Strict).unwrap();
        game.nu(&CoalitionMask::full(4));
        let cache = game.cache().unwrap();
        assert_eq!(cache.len(), 1);
        assert!(cache.matches(&inst, PaymentRule::Strict));
        assert!(!cache.matches(&inst, PaymentRule::FirstConflict));
    }

    #[test]
    fn additive_game_is_sum_of_second_prices() {
        let r = |v: i64| Rational::from_integer(v.into());
        let inst = AuctionInstance::additive(2, [vec![r(10), r(8)], vec![r(6), r(4)]]).unwrap();
        let game = AdditiveGame::new(&inst).unwrap();
        assert_eq!(game.value(&mask(2, &[0])), Money::from_integer(6));
        assert_eq!(game.value(&mask(2, &[0, 1])), Money::from_integer(10));
        assert_eq!(game.value(&CoalitionMask::empty(2)), Money::zero());
    }
}
