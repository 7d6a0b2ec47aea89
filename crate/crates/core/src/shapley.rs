//! Exact Shapley values: the subset-weighted formula, the permutation average, the additive
//! closed form, and normalisation into redistribution fractions Γ.

use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use num_bigint::BigInt;
use num_traits::One;
use rayon::prelude::*;
use serde::Serialize;

use crate::auction::second_price;
use crate::charfn::{AdditiveGame, CharacteristicFunction, RstGame, MAX_ENUMERATION_N};
use crate::coalition::CoalitionMask;
use crate::error::{Error, Result};
use crate::harsanyi::{harsanyi_dividends, shapley_from_dividends, NuTable};
use crate::instance::{AuctionInstance, Bid, PaymentRule, ValuationMode};
use crate::money::{Money, Rational};

/// Largest `n` for which all `n!` orderings are enumerated.
pub const MAX_PERMUTATION_N: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapleyMethod {
    Subset,
    Permutation,
    AdditiveClosed,
    Dividends,
    Rsyp,
}

impl fmt::Display for ShapleyMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ShapleyMethod::Subset => "subset",
            ShapleyMethod::Permutation => "permutation",
            ShapleyMethod::AdditiveClosed => "additive_closed",
            ShapleyMethod::Dividends => "dividends",
            ShapleyMethod::Rsyp => "rsyp",
        })
    }
}

impl FromStr for ShapleyMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "subset" => Ok(ShapleyMethod::Subset),
            "permutation" => Ok(ShapleyMethod::Permutation),
            "additive" | "additive_closed" => Ok(ShapleyMethod::AdditiveClosed),
            "dividends" => Ok(ShapleyMethod::Dividends),
            "rsyp" => Ok(ShapleyMethod::Rsyp),
            other => Err(Error::InvalidArgument(format!("unknown method `{other}`"))),
        }
    }
}

/// Shapley values `phi` and, when `Σφ ≠ 0`, the redistribution fractions `gamma`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ShapleyResult {
    pub method: ShapleyMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rule: Option<PaymentRule>,
    pub phi: Vec<Money>,
    /// `None` when the values sum to zero and Γ is undefined.
    pub gamma: Option<Vec<Money>>,
    pub nu_grand: Money,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ShapleyResult {
    pub fn new(
        method: ShapleyMethod,
        rule: Option<PaymentRule>,
        phi: Vec<Money>,
        nu_grand: Money,
    ) -> Self {
        let gamma = gamma_from_phi(&phi).ok();
        Self {
            method,
            rule,
            phi,
            gamma,
            nu_grand,
            k: None,
            seed: None,
        }
    }

    pub fn normalization_undefined(&self) -> bool {
        self.gamma.is_none()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serialises")
    }
}

/// `Γ_j = φ_j / Σφ`. Negative entries pass through unclamped.
pub fn gamma_from_phi(phi: &[Money]) -> Result<Vec<Money>> {
    let total: Money = phi.iter().sum();
    if total.is_zero() {
        return Err(Error::NormalizationUndefined);
    }
    let inv = Money::one().checked_div(&total).expect("non-zero total");
    Ok(phi.iter().map(|p| p * &inv).collect())
}

pub(crate) fn factorial(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

/// `φ_j = Σ_{S ⊆ 𝒯∖{j}} |S|!(n−|S|−1)!/n! · (ν(S ∪ j) − ν(S))`.
pub fn shapley_subset<G: CharacteristicFunction + ?Sized>(game: &G) -> Result<Vec<Money>> {
    let n = game.players();
    if n > MAX_ENUMERATION_N {
        return Err(Error::TooLarge {
            what: "subset-formula Shapley",
            n,
            limit: MAX_ENUMERATION_N,
        });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let table = game.value_table()?;
    let n_fact = factorial(n);
    let weights: Vec<Rational> = (0..n)
        .map(|s| Rational::new(factorial(s) * factorial(n - s - 1), n_fact.clone()))
        .collect();
    Ok((0..n)
        .into_par_iter()
        .map(|j| {
            let bit = 1u64 << j;
            // Marginals grouped by coalition size, weighted once per size.
            let mut by_size = vec![Money::zero(); n];
            for s in (0..1u64 << n).filter(|s| s & bit == 0) {
                by_size[s.count_ones() as usize] += &table[(s | bit) as usize] - &table[s as usize];
            }
            by_size
                .iter()
                .zip(&weights)
                .map(|(sum, w)| sum.scale(w))
                .sum()
        })
        .collect())
}

/// `φ_j = (1/n!)·Σ_π (ν(π(j) ∪ j) − ν(π(j)))` over every ordering π.
pub fn shapley_permutation<G: CharacteristicFunction + ?Sized>(game: &G) -> Result<Vec<Money>> {
    let n = game.players();
    if n > MAX_PERMUTATION_N {
        return Err(Error::TooLarge {
            what: "permutation-formula Shapley",
            n,
            limit: MAX_PERMUTATION_N,
        });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let table = game.value_table()?;
    let sums = (0..n)
        .into_par_iter()
        .map(|first| {
            let mut acc = vec![Money::zero(); n];
            let rest: Vec<usize> = (0..n).filter(|&p| p != first).collect();
            for tail in rest.into_iter().permutations(n - 1) {
                let mut prefix = 0u64;
                for p in std::iter::once(first).chain(tail) {
                    let next = prefix | 1 << p;
                    acc[p] += &table[next as usize] - &table[prefix as usize];
                    prefix = next;
                }
            }
            acc
        })
        .reduce(
            || vec![Money::zero(); n],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let inv = Rational::new(BigInt::one(), factorial(n));
    Ok(sums.iter().map(|s| s.scale(&inv)).collect())
}

/// Shapley values of the additive game: each transaction's second-highest value.
pub fn shapley_additive_closed_form(inst: &AuctionInstance) -> Result<ShapleyResult> {
    inst.require_mode(ValuationMode::Additive)?;
    let values: Vec<&[Rational]> = inst
        .searchers
        .iter()
        .map(|s| match &s.bid {
            Bid::Additive { values } => values.as_slice(),
            Bid::SingleMinded { .. } => unreachable!("mode checked"),
        })
        .collect();
    let phi: Vec<Money> = (0..inst.n)
        .map(|t| {
            second_price(values.iter().map(|v| &v[t]))
                .map(|(_, p)| Money::from_rational(p))
                .unwrap_or_default()
        })
        .collect();
    let nu_grand = phi.iter().sum();
    Ok(ShapleyResult::new(
        ShapleyMethod::AdditiveClosed,
        None,
        phi,
        nu_grand,
    ))
}

/// Exact Shapley values of an instance by the chosen method. Additive instances use the
/// second-price revenue game; single-minded ones use ICA-SM revenue under `rule`.
pub fn exact_shapley(
    inst: &AuctionInstance,
    method: ShapleyMethod,
    rule: PaymentRule,
) -> Result<ShapleyResult> {
    if method == ShapleyMethod::AdditiveClosed {
        return shapley_additive_closed_form(inst);
    }
    if method == ShapleyMethod::Rsyp {
        return Err(Error::InvalidArgument(
            "rsyp is an approximation; use the rsyp entry point".into(),
        ));
    }
    let (phi, nu_grand, rule) = match inst.mode {
        ValuationMode::SingleMinded => {
            let game = RstGame::new(inst, rule)?;
            (
                phi_by(&game, method)?,
                game.nu(&CoalitionMask::full(inst.n)),
                Some(rule),
            )
        }
        ValuationMode::Additive => {
            let game = AdditiveGame::new(inst)?;
            (
                phi_by(&game, method)?,
                game.value(&CoalitionMask::full(inst.n)),
                None,
            )
        }
    };
    Ok(ShapleyResult::new(method, rule, phi, nu_grand))
}

fn phi_by<G: CharacteristicFunction>(game: &G, method: ShapleyMethod) -> Result<Vec<Money>> {
    match method {
        ShapleyMethod::Subset => shapley_subset(game),
        ShapleyMethod::Permutation => shapley_permutation(game),
        ShapleyMethod::Dividends => {
            let table = NuTable::from_game(game)?;
            let div = harsanyi_dividends(&table)?;
            Ok((0..game.players())
                .map(|j| shapley_from_dividends(&div, j))
                .collect())
        }
        ShapleyMethod::AdditiveClosed | ShapleyMethod::Rsyp => unreachable!("handled by caller"),
    }
}
