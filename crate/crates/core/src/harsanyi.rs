//! Unanimity games and Harsanyi dividends.
//!
//! Every game is a unique linear combination of unanimity games `ω_S`; the coefficients
//! (dividends) come from the subset Möbius transform
//! `Δ_T = Σ_{C ⊆ T} (−1)^{|T|−|C|} ν(C)`, and each member of `S` receives `Δ_S/|S|`.

use std::collections::HashMap;
use std::io::Write;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::charfn::CharacteristicFunction;
use crate::coalition::CoalitionMask;
use crate::error::{Error, Result};
use crate::money::{Money, Rational};

pub const MAX_DIVIDEND_N: usize = 16;

fn check_width(n: usize) -> Result<()> {
    if n > MAX_DIVIDEND_N {
        return Err(Error::TooLarge {
            what: "Harsanyi dividend table",
            n,
            limit: MAX_DIVIDEND_N,
        });
    }
    Ok(())
}

/// ν on every coalition of an `n`-player game, indexed by bitmask. `ν(∅)` is taken as 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NuTable {
    n: usize,
    values: Vec<Money>,
}

impl NuTable {
    pub fn from_game<G: CharacteristicFunction + ?Sized>(game: &G) -> Result<Self> {
        check_width(game.players())?;
        Ok(Self {
            n: game.players(),
            values: game.value_table()?,
        })
    }

    /// Requires an entry for each of the `2^n − 1` non-empty coalitions.
    pub fn from_map(n: usize, map: &HashMap<CoalitionMask, Money>) -> Result<Self> {
        check_width(n)?;
        let mut values = vec![Money::zero(); 1 << n];
        for (bits, slot) in values.iter_mut().enumerate().skip(1) {
            let mask = CoalitionMask::from_bits(n, bits as u64);
            *slot = map
                .get(&mask)
                .cloned()
                .ok_or_else(|| Error::IncompleteTable(format!("missing coalition {mask:?}")))?;
        }
        Ok(Self { n, values })
    }

    pub fn from_fn<F: Fn(u64) -> Money>(n: usize, f: F) -> Result<Self> {
        check_width(n)?;
        Ok(Self {
            n,
            values: (0..1u64 << n).map(f).collect(),
        })
    }

    /// The unanimity game `ω_S`: 1 on coalitions containing `S`, 0 elsewhere.
    pub fn unanimity(n: usize, s: &CoalitionMask) -> Result<Self> {
        let s_bits = s.as_u64().expect("narrow mask");
        Self::from_fn(n, |t| Money::from_integer(i64::from(t & s_bits == s_bits)))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, coalition: &CoalitionMask) -> &Money {
        &self.values[coalition.as_u64().expect("narrow mask") as usize]
    }
}

/// Dividends `Δ_T` for every non-empty `T`, indexed by bitmask (slot 0 unused and zero).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DividendTable {
    n: usize,
    values: Vec<Money>,
}

impl DividendTable {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, coalition: &CoalitionMask) -> &Money {
        &self.values[coalition.as_u64().expect("narrow mask") as usize]
    }

    /// Builds a table directly from dividends; coalitions not listed get zero.
    pub fn from_entries<I: IntoIterator<Item = (CoalitionMask, Money)>>(
        n: usize,
        entries: I,
    ) -> Result<Self> {
        check_width(n)?;
        let mut values = vec![Money::zero(); 1 << n];
        for (mask, v) in entries {
            let bits = mask.as_u64().expect("narrow mask") as usize;
            if bits == 0 {
                return Err(Error::InvalidArgument(
                    "dividend on the empty coalition".into(),
                ));
            }
            values[bits] = v;
        }
        Ok(Self { n, values })
    }

    pub fn total(&self) -> Money {
        self.values.iter().sum()
    }

    /// CSV with columns `mask` (hex), `size`, `dividend`; non-empty coalitions only.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["mask", "size", "dividend"])?;
        for bits in 1..self.values.len() {
            let mask = CoalitionMask::from_bits(self.n, bits as u64);
            w.write_record([
                mask.to_hex(),
                mask.len().to_string(),
                self.values[bits].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shapley value of `j` in the unanimity game `ω_S`.
pub fn unanimity_shapley(s: &CoalitionMask, j: usize) -> Result<Rational> {
    if s.is_empty() {
        return Err(Error::InvalidArgument(
            "unanimity coalition must be non-empty".into(),
        ));
    }
    Ok(if s.contains(j) {
        Rational::new(BigInt::one(), BigInt::from(s.len()))
    } else {
        Rational::zero()
    })
}

/// Möbius inversion of ν in `O(n·2^n)`.
pub fn harsanyi_dividends(table: &NuTable) -> Result<DividendTable> {
    check_width(table.n)?;
    let mut values = table.values.clone();
    values[0] = Money::zero();
    for i in 0..table.n {
        let bit = 1usize << i;
        for mask in 0..values.len() {
            if mask & bit != 0 {
                let lower = values[mask ^ bit].clone();
                values[mask] -= &lower;
            }
        }
    }
    Ok(DividendTable { n: table.n, values })
}

/// `φ_j = Σ_{T ∋ j} Δ_T/|T|`.
pub fn shapley_from_dividends(div: &DividendTable, j: usize) -> Money {
    let bit = 1usize << j;
    let mut by_size = vec![Money::zero(); div.n + 1];
    for (mask, d) in div.values.iter().enumerate() {
        if mask & bit != 0 && !d.is_zero() {
            by_size[mask.count_ones() as usize] += d;
        }
    }
    by_size
        .iter()
        .enumerate()
        .skip(1)
        .map(|(size, sum)| sum.scale(&Rational::new(BigInt::one(), BigInt::from(size))))
        .sum()
}

/// `Σ_{∅ ≠ S ⊆ T} Δ_S`, which equals ν(T).
pub fn reconstruct_nu(div: &DividendTable, coalition: &CoalitionMask) -> Money {
    let t = coalition.as_u64().expect("narrow mask") as usize;
    let mut total = Money::zero();
    let mut sub = t;
    while sub != 0 {
        total += &div.values[sub];
        sub = (sub - 1) & t;
    }
    total
}
