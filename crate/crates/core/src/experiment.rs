//! Seeded random instances and the exact-versus-sampled redistribution comparison.

use std::io::Write;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::{AuctionInstance, Bid, PaymentRule, SearcherBid, ValuationMode};
use crate::money::Rational;
use crate::rsyp::{rsyp, RsypConfig};
use crate::shapley::{exact_shapley, ShapleyMethod, MAX_PERMUTATION_N};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub m: usize,
    pub instance_count: usize,
    /// RSYP samples per instance; `None` means `25·n²`.
    pub k: Option<u64>,
    pub exhaustive: bool,
    pub seed: u64,
    pub rule: PaymentRule,
    pub mode: ValuationMode,
    /// Integer bids are drawn uniformly from `bid_lo..=bid_hi`.
    pub bid_lo: u64,
    pub bid_hi: u64,
    /// Bundle sizes are drawn uniformly from `1..=min(n, bundle_cap)`.
    pub bundle_cap: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 6,
            m: 6,
            instance_count: 1000,
            k: None,
            exhaustive: false,
            seed: 0,
            rule: PaymentRule::default(),
            mode: ValuationMode::SingleMinded,
            bid_lo: 1,
            bid_hi: 100,
            bundle_cap: 4,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.to_string()));
        if self.instance_count < 1 {
            return bad("instance_count must be at least 1");
        }
        if self.n < 1 {
            return bad("n must be at least 1");
        }
        if self.bid_lo < 1 || self.bid_hi < self.bid_lo {
            return bad("bid range must satisfy 1 <= lo <= hi");
        }
        if self.bundle_cap < 1 {
            return bad("bundle cap must be at least 1");
        }
        Ok(())
    }

    pub fn samples(&self) -> u64 {
        self.k.unwrap_or_else(|| RsypConfig::default_k(self.n))
    }
}

// splitmix64 finaliser, used to derive independent seeds from (seed, index).
fn mix(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const GENERATOR_DOMAIN: u64 = 0x6765_6e65_7261_7465;

/// Instance number `index` of the experiment; a pure function of `(cfg, index)`.
pub fn generate_random_instance(cfg: &ExperimentConfig, index: u64) -> Result<AuctionInstance> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, GENERATOR_DOMAIN));
    rng.set_stream(index);
    let bid = |rng: &mut ChaCha8Rng| {
        Rational::from_integer(rng.random_range(cfg.bid_lo..=cfg.bid_hi).into())
    };
    let searchers = (0..cfg.m)
        .map(|i| {
            let payload = match cfg.mode {
                ValuationMode::SingleMinded => {
                    let size = rng.random_range(1..=cfg.n.min(cfg.bundle_cap));
                    let mut bundle = sample(&mut rng, cfg.n, size).into_vec();
                    bundle.sort_unstable();
                    Bid::SingleMinded {
                        bundle,
                        bid: bid(&mut rng),
                    }
                }
                ValuationMode::Additive => Bid::Additive {
                    values: (0..cfg.n).map(|_| bid(&mut rng)).collect(),
                },
            };
            SearcherBid {
                id: Some(format!("s{}", i + 1)),
                bid: payload,
            }
        })
        .collect();
    AuctionInstance {
        n: cfg.n,
        mode: cfg.mode,
        payment_rule: cfg.rule,
        searchers,
        labels: None,
    }
    .validated()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub instance_id: u64,
    pub t_index: usize,
    pub gamma_exact: f64,
    pub gamma_rsyp: f64,
    pub abs_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareSummary {
    pub instances: usize,
    /// Instances whose Shapley values sum to zero, so Γ is undefined.
    pub skipped: usize,
    pub mean_abs_err: f64,
    pub max_abs_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub rule: String,
    pub k: u64,
    pub rows: Vec<CompareRow>,
    pub summary: CompareSummary,
}

impl CompareReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        if self.rows.is_empty() {
            w.write_record([
                "instance_id",
                "t_index",
                "gamma_exact",
                "gamma_rsyp",
                "abs_err",
            ])?;
        }
        w.write_record(["mean", "", "", "", &self.summary.mean_abs_err.to_string()])?;
        w.write_record(["max", "", "", "", &self.summary.max_abs_err.to_string()])?;
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

fn compare_one(
    inst: &AuctionInstance,
    id: u64,
    cfg: &ExperimentConfig,
) -> Result<Option<Vec<CompareRow>>> {
    let method = match inst.mode {
        ValuationMode::SingleMinded => ShapleyMethod::Subset,
        ValuationMode::Additive => ShapleyMethod::AdditiveClosed,
    };
    let exact = exact_shapley(inst, method, cfg.rule)?;
    let Some(gamma) = exact.gamma else {
        return Ok(None);
    };
    let rcfg = RsypConfig {
        k: cfg.samples(),
        seed: mix(cfg.seed, id),
        rule: cfg.rule,
        exhaustive: cfg.exhaustive,
    };
    let approx = rsyp(inst, &rcfg)?;
    // Σφ̃ = ν(𝒯) = Σφ, so the sampled Γ is defined exactly when the exact one is.
    let approx_gamma = approx.gamma.ok_or(Error::NormalizationUndefined)?;
    Ok(Some(
        gamma
            .iter()
            .zip(&approx_gamma)
            .enumerate()
            .map(|(t, (g, a))| CompareRow {
                instance_id: id,
                t_index: t,
                gamma_exact: g.to_f64(),
                gamma_rsyp: a.to_f64(),
                abs_err: (g - a).abs().to_f64(),
            })
            .collect(),
    ))
}

/// Exact Γ against RSYP Γ̃ on every instance of the experiment. `injected`, if given, replaces
/// the generated instances.
pub fn run_experiment_compare(
    cfg: &ExperimentConfig,
    injected: Option<&AuctionInstance>,
) -> Result<CompareReport> {
    cfg.validate()?;
    let n = injected.map_or(cfg.n, |i| i.n);
    if n > MAX_PERMUTATION_N {
        return Err(Error::TooLarge {
            what: "exact comparison experiment",
            n,
            limit: MAX_PERMUTATION_N,
        });
    }
    let count = if injected.is_some() {
        1
    } else {
        cfg.instance_count
    };
    let blocks: Vec<Option<Vec<CompareRow>>> = (0..count as u64)
        .into_par_iter()
        .map(|id| match injected {
            Some(inst) => compare_one(inst, id, cfg),
            None => compare_one(&generate_random_instance(cfg, id)?, id, cfg),
        })
        .collect::<Result<_>>()?;
    let skipped = blocks.iter().filter(|b| b.is_none()).count();
    let rows: Vec<CompareRow> = blocks.into_iter().flatten().flatten().collect();
    let mean_abs_err = if rows.is_empty() {
        0.0
    } else {
        rows.iter().map(|r| r.abs_err).sum::<f64>() / rows.len() as f64
    };
    let max_abs_err = rows.iter().map(|r| r.abs_err).fold(0.0, f64::max);
    Ok(CompareReport {
        rule: cfg.rule.to_string(),
        k: cfg.samples(),
        rows,
        summary: CompareSummary {
            instances: count,
            skipped,
            mean_abs_err,
            max_abs_err,
        },
    })
}
