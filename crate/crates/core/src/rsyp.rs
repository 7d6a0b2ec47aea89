//! Randomised Shapley approximation: average each transaction's marginal contribution over
//! `k` uniformly sampled orderings.
//!
//! Sample `i` is drawn from ChaCha8 stream `i` of the configured seed, so the sample set, and
//! with exact accumulation the estimate itself, does not depend on how work is scheduled.

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::charfn::{AdditiveGame, CharacteristicFunction, RstGame};
use crate::coalition::CoalitionMask;
use crate::error::{Error, Result};
use crate::instance::{AuctionInstance, PaymentRule, ValuationMode};
use crate::money::{Money, Rational};
use crate::shapley::{
    factorial, shapley_permutation, ShapleyMethod, ShapleyResult, MAX_PERMUTATION_N,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RsypConfig {
    pub k: u64,
    pub seed: u64,
    pub rule: PaymentRule,
    /// Average over all `n!` orderings instead of sampling (`k` is then ignored).
    pub exhaustive: bool,
}

impl RsypConfig {
    pub fn new(k: u64, seed: u64, rule: PaymentRule) -> Self {
        Self {
            k,
            seed,
            rule,
            exhaustive: false,
        }
    }

    /// The default sample count for `n` transactions, `25·n²`.
    pub fn default_k(n: usize) -> u64 {
        25 * (n as u64).pow(2)
    }
}

/// The `index`-th sampled ordering of `0..n` under `seed`.
pub fn sample_permutation(n: usize, seed: u64, index: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    perm
}

/// Marginal contribution of every player along one ordering, indexed by player.
pub fn marginals_along<G: CharacteristicFunction + ?Sized>(
    game: &G,
    order: &[usize],
) -> Vec<Money> {
    let n = game.players();
    let mut out = vec![Money::zero(); n];
    let mut prefix = CoalitionMask::empty(n);
    let mut prev = game.value(&prefix);
    for &p in order {
        prefix.insert(p);
        let cur = game.value(&prefix);
        out[p] = &cur - &prev;
        prev = cur;
    }
    out
}

/// Sampled Shapley estimates `φ̃` for an arbitrary game.
pub fn rsyp_phi<G: CharacteristicFunction + ?Sized>(
    game: &G,
    k: u64,
    seed: u64,
) -> Result<Vec<Money>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let n = game.players();
    let sums = (0..k)
        .into_par_iter()
        .fold(
            || vec![Money::zero(); n],
            |mut acc, i| {
                let order = sample_permutation(n, seed, i);
                for (a, x) in acc.iter_mut().zip(marginals_along(game, &order)) {
                    *a += &x;
                }
                acc
            },
        )
        .reduce(
            || vec![Money::zero(); n],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let inv = Rational::new(BigInt::one(), BigInt::from(k));
    Ok(sums.iter().map(|s| s.scale(&inv)).collect())
}

/// RSYP on an instance: single-minded instances use ICA-SM revenue under `cfg.rule`,
/// additive ones the second-price revenue game.
pub fn rsyp(inst: &AuctionInstance, cfg: &RsypConfig) -> Result<ShapleyResult> {
    match inst.mode {
        ValuationMode::SingleMinded => {
            let game = RstGame::new(inst, cfg.rule)?;
            rsyp_game(&game, Some(cfg.rule), cfg)
        }
        ValuationMode::Additive => {
            let game = AdditiveGame::new(inst)?;
            rsyp_game(&game, None, cfg)
        }
    }
}

fn rsyp_game<G: CharacteristicFunction>(
    game: &G,
    rule: Option<PaymentRule>,
    cfg: &RsypConfig,
) -> Result<ShapleyResult> {
    let n = game.players();
    let (phi, k) = if cfg.exhaustive {
        if n > MAX_PERMUTATION_N {
            return Err(Error::TooLarge {
                what: "exhaustive RSYP",
                n,
                limit: MAX_PERMUTATION_N,
            });
        }
        (
            shapley_permutation(game)?,
            factorial(n).to_u64().expect("n! fits"),
        )
    } else {
        (rsyp_phi(game, cfg.k, cfg.seed)?, cfg.k)
    };
    let nu_grand = game.value(&CoalitionMask::full(n));
    let mut res = ShapleyResult::new(ShapleyMethod::Rsyp, rule, phi, nu_grand);
    res.k = Some(k);
    res.seed = (!cfg.exhaustive).then_some(cfg.seed);
    Ok(res)
}

/// Samples needed so that `P(φ̃ − φ ≥ t) ≤ 1 − δ` when every marginal lies in `[−R*, R*]`:
/// `⌈(2R*²/t²)·ln(1/(1−δ))⌉`, at least 1.
pub fn hoeffding_sample_size(r_star: f64, t: f64, delta: f64) -> Result<u64> {
    if t.is_nan() || t <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "t must be positive, got {t}"
        )));
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::InvalidArgument(format!(
            "delta must lie in [0, 1), got {delta}"
        )));
    }
    if r_star.is_nan() || r_star < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "R* must be non-negative, got {r_star}"
        )));
    }
    let raw = hoeffding_bound_raw(r_star, t, delta);
    Ok((raw.ceil() as u64).max(1))
}

/// The un-rounded sample bound `(2R*²/t²)·ln(1/(1−δ))`.
pub fn hoeffding_bound_raw(r_star: f64, t: f64, delta: f64) -> f64 {
    2.0 * r_star * r_star / (t * t) * (1.0 / (1.0 - delta)).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::worked_example;
    use crate::shapley::exact_shapley;

    #[test]
    fn sample_size_examples() {
        assert_eq!(hoeffding_sample_size(100.0, 1.0, 0.95).unwrap(), 59915);
        assert_eq!(hoeffding_sample_size(37.0, 0.5, 0.0).unwrap(), 1);
        let a = hoeffding_bound_raw(10.0, 1.0, 0.9);
        let b = hoeffding_bound_raw(10.0, 2.0, 0.9);
        assert!((a / b - 4.0).abs() < 1e-12);
        assert!(hoeffding_sample_size(1.0, 0.0, 0.5).is_err());
        assert!(hoeffding_sample_size(1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn permutations_are_seeded_and_distinct_per_index() {
        let a = sample_permutation(10, 7, 3);
        assert_eq!(a, sample_permutation(10, 7, 3));
        let mut sorted = a.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..10).collect::<Vec<_>>());
        assert!((0..20).any(|i| sample_permutation(10, 7, i) != a));
    }

    #[test]
    fn exhaustive_equals_exact() {
        let inst = worked_example();
        let mut cfg = RsypConfig::new(1, 0, PaymentRule::FirstConflict);
        cfg.exhaustive = true;
        let approx = rsyp(&inst, &cfg).unwrap();
        let exact =
            exact_shapley(&inst, ShapleyMethod::Subset, PaymentRule::FirstConflict).unwrap();
        assert_eq!(approx.phi, exact.phi);
        assert_eq!(approx.k, Some(24));
    }

    #[test]
    fn one_sample_is_one_ordering() {
        let inst = worked_example();
        let cfg = RsypConfig::new(1, 99, PaymentRule::FirstConflict);
        let res = rsyp(&inst, &cfg).unwrap();
        let game = RstGame::new(&inst, PaymentRule::FirstConflict).unwrap();
        let expected = marginals_along(&game, &sample_permutation(4, 99, 0));
        assert_eq!(res.phi, expected);
        assert_eq!(res.seed, Some(99));
    }

    #[test]
    fn zero_samples_rejected() {
        let cfg = RsypConfig::new(0, 0, PaymentRule::Strict);
        assert!(rsyp(&worked_example(), &cfg).is_err());
    }

    #[test]
    fn estimates_are_efficient() {
        // Marginals along any ordering telescope to ν(𝒯).
        let inst = worked_example();
        let res = rsyp(&inst, &RsypConfig::new(37, 5, PaymentRule::FirstConflict)).unwrap();
        assert_eq!(res.phi.iter().sum::<Money>(), res.nu_grand);
    }
}
