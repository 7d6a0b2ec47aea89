//! Brute-force reference implementations, written against the definitions directly and
//! sharing no code with the library beyond the instance types.

#![allow(dead_code)]

use matchmaking::experiment::{generate_random_instance, ExperimentConfig};
use matchmaking::{AuctionInstance, Bid, PaymentRule, ValuationMode};
use num_traits::ToPrimitive;

pub struct Sm {
    pub bundle: Vec<usize>,
    pub bid: f64,
    /// Integer bid, used for exact rank comparisons.
    pub bid_int: i128,
}

pub fn sm_bids(inst: &AuctionInstance) -> Vec<Sm> {
    inst.searchers
        .iter()
        .map(|s| match &s.bid {
            Bid::SingleMinded { bundle, bid } => Sm {
                bundle: bundle.clone(),
                bid: bid.to_f64().unwrap(),
                bid_int: bid.to_integer().to_i128().unwrap(),
            },
            Bid::Additive { .. } => panic!("single-minded only"),
        })
        .collect()
}

fn meets(a: &[usize], b: &[usize]) -> bool {
    a.iter().any(|x| b.contains(x))
}

/// Greedy auction revenue over the searchers `present`, with integer bids.
pub fn oracle_revenue(bids: &[Sm], present: &[usize], rule: PaymentRule) -> f64 {
    let mut order = present.to_vec();
    // b_i/√s_i > b_j/√s_j  ⇔  b_i²·s_j > b_j²·s_i
    order.sort_by(|&i, &j| {
        let lhs = bids[i].bid_int.pow(2) * bids[j].bundle.len() as i128;
        let rhs = bids[j].bid_int.pow(2) * bids[i].bundle.len() as i128;
        rhs.cmp(&lhs).then(i.cmp(&j))
    });
    let mut winners: Vec<usize> = Vec::new();
    for &i in &order {
        if winners
            .iter()
            .all(|&w| !meets(&bids[w].bundle, &bids[i].bundle))
        {
            winners.push(i);
        }
    }
    let mut revenue = 0.0;
    for &i in &winners {
        let pos = order.iter().position(|&x| x == i).unwrap();
        let payer = (pos + 1..order.len()).find(|&q| {
            let j = order[q];
            if !meets(&bids[i].bundle, &bids[j].bundle) {
                return false;
            }
            match rule {
                PaymentRule::FirstConflict => true,
                PaymentRule::Strict => order[..q]
                    .iter()
                    .filter(|&&l| l != i)
                    .all(|&l| !meets(&bids[l].bundle, &bids[j].bundle)),
            }
        });
        if let Some(q) = payer {
            let j = order[q];
            let (si, sj) = (bids[i].bundle.len() as f64, bids[j].bundle.len() as f64);
            revenue += bids[j].bid * (si / sj).sqrt();
        }
    }
    revenue
}

/// ν(T) for a coalition given as a bit pattern.
pub fn oracle_nu(bids: &[Sm], coalition: u64, rule: PaymentRule) -> f64 {
    let present: Vec<usize> = (0..bids.len())
        .filter(|&i| bids[i].bundle.iter().all(|&t| coalition >> t & 1 == 1))
        .collect();
    oracle_revenue(bids, &present, rule)
}

fn fact(k: usize) -> f64 {
    (1..=k).map(|x| x as f64).product()
}

/// Shapley values by the subset-weighted formula, one ν evaluation per subset.
pub fn oracle_shapley(inst: &AuctionInstance, rule: PaymentRule) -> Vec<f64> {
    let bids = sm_bids(inst);
    let n = inst.n;
    (0..n)
        .map(|j| {
            let mut phi = 0.0;
            for s in 0u64..1 << n {
                if s >> j & 1 == 1 {
                    continue;
                }
                let size = s.count_ones() as usize;
                let w = fact(size) * fact(n - size - 1) / fact(n);
                phi += w * (oracle_nu(&bids, s | 1 << j, rule) - oracle_nu(&bids, s, rule));
            }
            phi
        })
        .collect()
}

/// A seeded random instance with `n` transactions and `m` searchers.
pub fn random_instance(
    mode: ValuationMode,
    n: usize,
    m: usize,
    seed: u64,
    index: u64,
) -> AuctionInstance {
    let cfg = ExperimentConfig {
        n,
        m,
        seed,
        mode,
        instance_count: 1,
        ..Default::default()
    };
    generate_random_instance(&cfg, index).unwrap()
}

/// Deterministic sizes in `1..=hi` derived from an index.
pub fn size_for(index: u64, salt: u64, hi: usize) -> usize {
    let mut z = index.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt;
    z ^= z >> 29;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 32;
    1 + (z % hi as u64) as usize
}
