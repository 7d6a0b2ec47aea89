//! Instances with exponentially many distinct marginal contributions.
//!
//! Transactions are laid out in an `s × s` grid (`n = s²`). One family of searchers wants the
//! rows, the other wants "diagonals" holding one cell per row and per column, so bundles within
//! a family are disjoint while every row meets every diagonal in exactly one transaction. Bids
//! are interleaved powers of three, `b0_i = 3^(2s−2i+1)` and `b1_i = 3^(2s−2i)` (1-based), so
//! every `{−1, 0, 1}` combination of bids is a different number. Each non-empty choice of rows
//! then yields its own witness marginal `Σ b1_x − Σ b0_x + b0_a`.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::Pow;
use rayon::prelude::*;
use serde::Serialize;

use crate::charfn::RstGame;
use crate::coalition::CoalitionMask;
use crate::error::{Error, Result};
use crate::instance::{AuctionInstance, Bid, PaymentRule, SearcherBid, ValuationMode};
use crate::money::{Money, Rational};

/// Largest full-enumeration size for the growth experiment.
pub const MAX_FULL_GROWTH_N: usize = 16;
/// Largest grid side for targeted witness enumeration (`2^s − 1` selections).
pub const MAX_TARGETED_SQRT_N: usize = 20;
pub const MAX_POWER3_N: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HardInstance {
    pub n: usize,
    pub sqrt_n: usize,
    /// `matrix[r][c]` is transaction `r·s + c`.
    pub matrix: Vec<Vec<usize>>,
    /// Row bundles.
    pub b0: Vec<Vec<usize>>,
    /// Diagonal bundles; `b1[k]` takes column `(r + shifts[k]) mod s` in row `r`.
    pub b1: Vec<Vec<usize>>,
    pub shifts: Vec<usize>,
    pub bids0: Vec<BigInt>,
    pub bids1: Vec<BigInt>,
    /// Searchers `0..s` bid on `b0`, searchers `s..2s` on `b1`.
    pub instance: AuctionInstance,
}

fn exact_sqrt(n: usize) -> Option<usize> {
    let s = (n as f64).sqrt().round() as usize;
    (s * s == n).then_some(s)
}

/// Default diagonal layout: `b1[0]` is the main diagonal, `b1[k]` is shifted `k` columns left.
pub fn default_shifts(s: usize) -> Vec<usize> {
    (0..s).map(|k| (s - k) % s).collect()
}

pub fn build_hard_instance(n: usize) -> Result<HardInstance> {
    build_hard_instance_with_shifts(n, None)
}

/// Builds the grid instance; `shifts`, if given, must be a permutation of `0..s` and selects
/// the cyclic shift of each diagonal bundle.
pub fn build_hard_instance_with_shifts(
    n: usize,
    shifts: Option<Vec<usize>>,
) -> Result<HardInstance> {
    let s = exact_sqrt(n)
        .filter(|&s| s >= 2)
        .ok_or_else(|| Error::InvalidArgument(format!("n = {n} is not a perfect square ≥ 4")))?;
    let shifts = shifts.unwrap_or_else(|| default_shifts(s));
    let mut seen = vec![false; s];
    if shifts.len() != s
        || !shifts
            .iter()
            .all(|&k| k < s && !std::mem::replace(&mut seen[k], true))
    {
        return Err(Error::InvalidArgument(format!(
            "diagonal shifts must be a permutation of 0..{s}"
        )));
    }
    let matrix: Vec<Vec<usize>> = (0..s)
        .map(|r| (0..s).map(|c| r * s + c).collect())
        .collect();
    let b0 = matrix.clone();
    let b1: Vec<Vec<usize>> = shifts
        .iter()
        .map(|&k| (0..s).map(|r| matrix[r][(r + k) % s]).collect())
        .collect();
    let three = BigInt::from(3);
    let bids0: Vec<BigInt> = (0..s)
        .map(|i| Pow::pow(&three, (2 * s - 2 * i - 1) as u32))
        .collect();
    let bids1: Vec<BigInt> = (0..s)
        .map(|i| Pow::pow(&three, (2 * s - 2 * i - 2) as u32))
        .collect();
    let searcher = |family: u8, i: usize, bundle: &Vec<usize>, bid: &BigInt| SearcherBid {
        id: Some(format!("B{family}_{}", i + 1)),
        bid: Bid::SingleMinded {
            bundle: bundle.clone(),
            bid: Rational::from_integer(bid.clone()),
        },
    };
    let searchers = b0
        .iter()
        .zip(&bids0)
        .enumerate()
        .map(|(i, (b, bid))| searcher(0, i, b, bid))
        .chain(
            b1.iter()
                .zip(&bids1)
                .enumerate()
                .map(|(i, (b, bid))| searcher(1, i, b, bid)),
        )
        .collect();
    let instance = AuctionInstance {
        n,
        mode: ValuationMode::SingleMinded,
        payment_rule: PaymentRule::default(),
        searchers,
        labels: None,
    }
    .validated()?;
    Ok(HardInstance {
        n,
        sqrt_n: s,
        matrix,
        b0,
        b1,
        shifts,
        bids0,
        bids1,
        instance,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HardViolation {
    BundleSize { family: u8, index: usize },
    WithinFamilyOverlap { family: u8, a: usize, b: usize },
    CrossNotSingleton { row: usize, diagonal: usize },
    BidInterleavingBroken,
    InstanceMismatch,
}

impl fmt::Display for HardViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HardViolation::BundleSize { family, index } => {
                write!(f, "B{family}[{index}] does not have size √n")
            }
            HardViolation::WithinFamilyOverlap { family, a, b } => {
                write!(f, "B{family}[{a}] and B{family}[{b}] overlap")
            }
            HardViolation::CrossNotSingleton { row, diagonal } => write!(
                f,
                "B0×B1 intersection not singleton (B0[{row}], B1[{diagonal}])"
            ),
            HardViolation::BidInterleavingBroken => write!(f, "bid interleaving broken"),
            HardViolation::InstanceMismatch => {
                write!(f, "induced instance differs from bundle families")
            }
        }
    }
}

fn overlap(a: &[usize], b: &[usize]) -> usize {
    a.iter().filter(|t| b.contains(t)).count()
}

/// Checks every structural property by exhaustive pairwise comparison.
pub fn verify_hard_instance(h: &HardInstance) -> Vec<HardViolation> {
    let s = h.sqrt_n;
    let mut out = Vec::new();
    for (family, bundles) in [(0u8, &h.b0), (1u8, &h.b1)] {
        for (i, b) in bundles.iter().enumerate() {
            let mut sorted = b.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != s || b.len() != s {
                out.push(HardViolation::BundleSize { family, index: i });
            }
        }
        for a in 0..bundles.len() {
            for b in a + 1..bundles.len() {
                if overlap(&bundles[a], &bundles[b]) > 0 {
                    out.push(HardViolation::WithinFamilyOverlap { family, a, b });
                }
            }
        }
    }
    for (row, b0) in h.b0.iter().enumerate() {
        for (diagonal, b1) in h.b1.iter().enumerate() {
            if overlap(b0, b1) != 1 {
                out.push(HardViolation::CrossNotSingleton { row, diagonal });
            }
        }
    }
    let interleaved: Vec<&BigInt> = h
        .bids0
        .iter()
        .zip(&h.bids1)
        .flat_map(|(a, b)| [a, b])
        .collect();
    if h.bids0.len() != s || h.bids1.len() != s || interleaved.windows(2).any(|w| w[0] <= w[1]) {
        out.push(HardViolation::BidInterleavingBroken);
    }
    let expected: Vec<(Vec<usize>, Rational)> =
        h.b0.iter()
            .zip(&h.bids0)
            .chain(h.b1.iter().zip(&h.bids1))
            .map(|(b, bid)| (b.clone(), Rational::from_integer(bid.clone())))
            .collect();
    let actual: Vec<(Vec<usize>, Rational)> = h
        .instance
        .searchers
        .iter()
        .filter_map(|sb| match &sb.bid {
            Bid::SingleMinded { bundle, bid } => Some((bundle.clone(), bid.clone())),
            Bid::Additive { .. } => None,
        })
        .collect();
    if h.instance.n != h.n || expected != actual {
        out.push(HardViolation::InstanceMismatch);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Power3Report {
    pub distinct: bool,
    pub count: usize,
    pub min: i64,
    pub max: i64,
}

/// Enumerates `Σ 3^i·a_i` over all `a ∈ {−1, 0, 1}^n` and reports whether the sums are
/// pairwise distinct.
pub fn power3_sums(n: usize) -> Result<Power3Report> {
    if n > MAX_POWER3_N {
        return Err(Error::TooLarge {
            what: "power-of-three sum enumeration",
            n,
            limit: MAX_POWER3_N,
        });
    }
    let total = 3usize.pow(n as u32);
    let mut sums: Vec<i64> = (0..total)
        .map(|mut code| {
            let mut s = 0i64;
            let mut place = 1i64;
            for _ in 0..n {
                s += place * ((code % 3) as i64 - 1);
                code /= 3;
                place *= 3;
            }
            s
        })
        .collect();
    sums.sort_unstable();
    sums.dedup();
    Ok(Power3Report {
        distinct: sums.len() == total,
        count: sums.len(),
        min: sums[0],
        max: *sums.last().expect("non-empty"),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    /// Selected rows (0-based), ascending; the first is the highest-bid row `a`.
    pub selection: Vec<usize>,
    /// The coalition `τ = T ∖ {t_u}` the transaction joins.
    pub tau: CoalitionMask,
    pub added: usize,
    pub marginal: Money,
    pub closed_form: Money,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WitnessReport {
    pub rule: PaymentRule,
    pub witnesses: Vec<Witness>,
    pub distinct_count: usize,
    /// Whether every evaluated marginal equals `Σ b1_x − Σ b0_x + b0_a`.
    pub closed_form_holds: bool,
}

/// Evaluates ν on the witness coalition of every non-empty row selection and compares the
/// marginal against the closed form.
pub fn witness_marginals(h: &HardInstance, rule: PaymentRule) -> Result<WitnessReport> {
    let s = h.sqrt_n;
    if s > MAX_TARGETED_SQRT_N {
        return Err(Error::TooLarge {
            what: "targeted witness enumeration",
            n: h.n,
            limit: MAX_TARGETED_SQRT_N * MAX_TARGETED_SQRT_N,
        });
    }
    let game = RstGame::uncached(&h.instance, rule)?;
    let witnesses: Vec<Witness> = (1u64..1 << s)
        .into_par_iter()
        .map(|sel| {
            let selection: Vec<usize> = (0..s).filter(|x| sel >> x & 1 == 1).collect();
            let a = selection[0];
            // An unselected row if one exists, else the lowest-bid selected row.
            let w = (0..s).find(|x| sel >> x & 1 == 0).unwrap_or(s - 1);
            let mut t = CoalitionMask::empty(h.n);
            for &x in &selection {
                h.b0[x].iter().chain(&h.b1[x]).for_each(|&tx| t.insert(tx));
            }
            let added = *h.b0[a]
                .iter()
                .find(|tx| h.b1[w].contains(tx))
                .expect("rows meet every diagonal");
            let tau = t.without(added);
            let marginal = &game.nu(&t) - &game.nu(&tau);
            let closed: BigInt = selection
                .iter()
                .map(|&x| &h.bids1[x] - &h.bids0[x])
                .sum::<BigInt>()
                + &h.bids0[a];
            Witness {
                selection,
                tau,
                added,
                marginal,
                closed_form: Money::from_big_int(closed),
            }
        })
        .collect();
    let mut values: Vec<&Money> = witnesses.iter().map(|w| &w.marginal).collect();
    values.sort();
    values.dedup();
    Ok(WitnessReport {
        rule,
        distinct_count: values.len(),
        closed_form_holds: witnesses.iter().all(|w| w.marginal == w.closed_form),
        witnesses,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthMode {
    Full,
    Targeted,
}

impl fmt::Display for GrowthMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GrowthMode::Full => "full",
            GrowthMode::Targeted => "targeted",
        })
    }
}

impl FromStr for GrowthMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(GrowthMode::Full),
            "targeted" => Ok(GrowthMode::Targeted),
            other => Err(Error::InvalidArgument(format!(
                "unknown growth mode `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthRow {
    pub n: usize,
    pub sqrt_n: usize,
    pub mode: GrowthMode,
    pub rule: PaymentRule,
    pub unique_count: usize,
    #[serde(rename = "floor_2_sqrt_n_minus_1")]
    pub floor: u64,
    pub log2_count: f64,
}

/// Unique-marginal counts on generated grid instances of the given sizes.
pub fn marginal_growth_table(
    sizes: &[usize],
    mode: GrowthMode,
    rule: PaymentRule,
) -> Result<Vec<GrowthRow>> {
    sizes
        .iter()
        .map(|&n| {
            if mode == GrowthMode::Full && n > MAX_FULL_GROWTH_N {
                return Err(Error::TooLarge {
                    what: "full-enumeration growth",
                    n,
                    limit: MAX_FULL_GROWTH_N,
                });
            }
            let h = build_hard_instance(n)?;
            let unique_count = match mode {
                GrowthMode::Full => {
                    RstGame::new(&h.instance, rule)?
                        .count_unique_marginals()?
                        .count
                }
                GrowthMode::Targeted => witness_marginals(&h, rule)?.distinct_count,
            };
            Ok(GrowthRow {
                n,
                sqrt_n: h.sqrt_n,
                mode,
                rule,
                unique_count,
                floor: (1u64 << h.sqrt_n) - 1,
                log2_count: (unique_count as f64).log2(),
            })
        })
        .collect()
}

pub fn write_growth_csv<W: Write>(rows: &[GrowthRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
