//! Auction instances: transactions, searchers and their bids, plus the JSON document format.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashSet;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::coalition::CoalitionMask;
use crate::error::{Error, Result};
use crate::money::{format_rational, parse_rational, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValuationMode {
    Additive,
    SingleMinded,
}

impl fmt::Display for ValuationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ValuationMode::Additive => "additive",
            ValuationMode::SingleMinded => "single_minded",
        })
    }
}

/// How an ICA-SM winner's critical payment is located.
///
/// `Strict` requires the paying searcher `j` to conflict with the winner and with no other
/// searcher ranked before `j`. `FirstConflict` takes the first later-ranked searcher whose
/// bundle overlaps the winner's.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaymentRule {
    #[default]
    Strict,
    FirstConflict,
}

impl PaymentRule {
    pub const ALL: [PaymentRule; 2] = [PaymentRule::Strict, PaymentRule::FirstConflict];
}

impl fmt::Display for PaymentRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PaymentRule::Strict => "strict",
            PaymentRule::FirstConflict => "first_conflict",
        })
    }
}

impl FromStr for PaymentRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strict" => Ok(PaymentRule::Strict),
            "first_conflict" => Ok(PaymentRule::FirstConflict),
            other => Err(Error::InvalidArgument(format!(
                "unknown payment rule `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TransactionId {
    pub index: usize,
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Bid {
    SingleMinded {
        bundle: Vec<usize>,
        bid: Rational,
    },
    /// One value per transaction.
    Additive {
        values: Vec<Rational>,
    },
}

impl Bid {
    pub fn mode(&self) -> ValuationMode {
        match self {
            Bid::SingleMinded { .. } => ValuationMode::SingleMinded,
            Bid::Additive { .. } => ValuationMode::Additive,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SearcherBid {
    pub id: Option<String>,
    pub bid: Bid,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AuctionInstance {
    pub n: usize,
    pub mode: ValuationMode,
    pub payment_rule: PaymentRule,
    pub searchers: Vec<SearcherBid>,
    /// Optional human-readable transaction labels, metadata only.
    pub labels: Option<Vec<String>>,
}

impl AuctionInstance {
    /// Builds and validates a single-minded instance from `(bundle, bid)` pairs.
    pub fn single_minded<I>(n: usize, bids: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<usize>, Rational)>,
    {
        let searchers = bids
            .into_iter()
            .map(|(bundle, bid)| SearcherBid {
                id: None,
                bid: Bid::SingleMinded { bundle, bid },
            })
            .collect();
        Self {
            n,
            mode: ValuationMode::SingleMinded,
            payment_rule: PaymentRule::default(),
            searchers,
            labels: None,
        }
        .validated()
    }

    /// Builds and validates an additive instance from per-searcher value vectors.
    pub fn additive<I>(n: usize, values: I) -> Result<Self>
    where
        I: IntoIterator<Item = Vec<Rational>>,
    {
        let searchers = values
            .into_iter()
            .map(|values| SearcherBid {
                id: None,
                bid: Bid::Additive { values },
            })
            .collect();
        Self {
            n,
            mode: ValuationMode::Additive,
            payment_rule: PaymentRule::default(),
            searchers,
            labels: None,
        }
        .validated()
    }

    pub fn with_rule(mut self, rule: PaymentRule) -> Self {
        self.payment_rule = rule;
        self
    }

    pub fn validated(self) -> Result<Self> {
        let report = validate_instance(&self);
        if report.is_empty() {
            Ok(self)
        } else {
            Err(Error::Validation(report))
        }
    }

    pub fn m(&self) -> usize {
        self.searchers.len()
    }

    pub fn transaction(&self, index: usize) -> TransactionId {
        TransactionId {
            index,
            label: self.labels.as_ref().and_then(|l| l.get(index).cloned()),
        }
    }

    pub fn require_mode(&self, expected: ValuationMode) -> Result<()> {
        if self.mode == expected {
            Ok(())
        } else {
            Err(Error::ModeMismatch {
                expected,
                found: self.mode,
            })
        }
    }

    /// The bundle of searcher `i` as a mask; `None` for additive searchers.
    pub fn bundle_mask(&self, i: usize) -> Option<CoalitionMask> {
        match &self.searchers[i].bid {
            Bid::SingleMinded { bundle, .. } => {
                Some(CoalitionMask::from_indices(self.n, bundle.iter().copied()))
            }
            Bid::Additive { .. } => None,
        }
    }

    /// Sum of every bid (single-minded) or every value (additive); an upper bound on revenue.
    pub fn total_bids(&self) -> Rational {
        self.searchers
            .iter()
            .map(|s| match &s.bid {
                Bid::SingleMinded { bid, .. } => bid.clone(),
                Bid::Additive { values } => values.iter().sum(),
            })
            .sum()
    }

    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.hash(&mut h);
        h.finish()
    }

    /// Multiplies every bid and value by `factor`.
    pub fn scaled(&self, factor: &Rational) -> Self {
        let mut out = self.clone();
        for s in &mut out.searchers {
            match &mut s.bid {
                Bid::SingleMinded { bid, .. } => *bid = &*bid * factor,
                Bid::Additive { values } => values.iter_mut().for_each(|v| *v = &*v * factor),
            }
        }
        out
    }

    /// Relabels transactions: transaction `j` becomes `perm[j]`.
    pub fn relabeled(&self, perm: &[usize]) -> Self {
        let mut out = self.clone();
        for s in &mut out.searchers {
            match &mut s.bid {
                Bid::SingleMinded { bundle, .. } => bundle.iter_mut().for_each(|t| *t = perm[*t]),
                Bid::Additive { values } => {
                    let mut moved = values.clone();
                    for (j, v) in values.iter().enumerate() {
                        moved[perm[j]] = v.clone();
                    }
                    *values = moved;
                }
            }
        }
        out.labels = None;
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    EmptyBundle,
    DuplicateTransaction(usize),
    BundleIndexOutOfRange(usize),
    NegativeBid,
    ValueLengthMismatch { expected: usize, found: usize },
    ModeMismatch,
    LabelCountMismatch,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViolationKind::EmptyBundle => write!(f, "empty bundle"),
            ViolationKind::DuplicateTransaction(t) => {
                write!(f, "duplicate transaction {t} in bundle")
            }
            ViolationKind::BundleIndexOutOfRange(t) => write!(f, "bundle index out of range: {t}"),
            ViolationKind::NegativeBid => write!(f, "negative bid"),
            ViolationKind::ValueLengthMismatch { expected, found } => write!(
                f,
                "value vector length mismatch: expected {expected}, found {found}"
            ),
            ViolationKind::ModeMismatch => write!(f, "bid does not match instance mode"),
            ViolationKind::LabelCountMismatch => write!(f, "label count differs from n"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// `None` for instance-level violations.
    pub searcher: Option<usize>,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            match v.searcher {
                Some(s) => write!(f, "searcher {s}: {}", v.kind)?,
                None => write!(f, "{}", v.kind)?,
            }
        }
        Ok(())
    }
}

/// Lists every broken instance invariant. An empty report means the instance is valid.
pub fn validate_instance(inst: &AuctionInstance) -> ValidationReport {
    let mut violations = Vec::new();
    if let Some(labels) = &inst.labels {
        if labels.len() != inst.n {
            violations.push(Violation {
                searcher: None,
                kind: ViolationKind::LabelCountMismatch,
            });
        }
    }
    for (i, s) in inst.searchers.iter().enumerate() {
        let mut push = |kind| {
            violations.push(Violation {
                searcher: Some(i),
                kind,
            })
        };
        if s.bid.mode() != inst.mode {
            push(ViolationKind::ModeMismatch);
        }
        match &s.bid {
            Bid::SingleMinded { bundle, bid } => {
                if bundle.is_empty() {
                    push(ViolationKind::EmptyBundle);
                }
                let mut seen = HashSet::new();
                for &t in bundle {
                    if t >= inst.n {
                        push(ViolationKind::BundleIndexOutOfRange(t));
                    } else if !seen.insert(t) {
                        push(ViolationKind::DuplicateTransaction(t));
                    }
                }
                if bid.is_negative() {
                    push(ViolationKind::NegativeBid);
                }
            }
            Bid::Additive { values } => {
                if values.len() != inst.n {
                    push(ViolationKind::ValueLengthMismatch {
                        expected: inst.n,
                        found: values.len(),
                    });
                }
                if values.iter().any(|v| v.is_negative()) {
                    push(ViolationKind::NegativeBid);
                }
            }
        }
    }
    ValidationReport { violations }
}

/// Searchers whose bundle fits inside `coalition`, in ascending index order.
pub fn restrict_searchers(inst: &AuctionInstance, coalition: &CoalitionMask) -> Result<Vec<usize>> {
    inst.require_mode(ValuationMode::SingleMinded)?;
    Ok(inst
        .searchers
        .iter()
        .enumerate()
        .filter(|(_, s)| match &s.bid {
            Bid::SingleMinded { bundle, .. } => bundle.iter().all(|&t| coalition.contains(t)),
            Bid::Additive { .. } => false,
        })
        .map(|(i, _)| i)
        .collect())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum AmountDoc {
    Text(String),
    Integer(i64),
}

impl AmountDoc {
    fn to_rational(&self) -> Result<Rational> {
        match self {
            AmountDoc::Text(s) => parse_rational(s).map_err(|e| Error::Syntax(e.to_string())),
            AmountDoc::Integer(v) => Ok(Rational::from_integer((*v).into())),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SearcherDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bundle: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bid: Option<AmountDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    values: Option<Vec<AmountDoc>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDoc {
    mode: ValuationMode,
    n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    payment_rule: Option<PaymentRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
    searchers: Vec<SearcherDoc>,
}

/// Parses an instance document, then validates it.
pub fn parse_instance(text: &str) -> Result<AuctionInstance> {
    let doc: InstanceDoc = serde_json::from_str(text).map_err(|e| Error::Syntax(e.to_string()))?;
    let mut searchers = Vec::with_capacity(doc.searchers.len());
    for (i, s) in doc.searchers.into_iter().enumerate() {
        let bid = match (s.bundle, s.bid, s.values) {
            (Some(bundle), Some(bid), None) => Bid::SingleMinded {
                bundle,
                bid: bid.to_rational()?,
            },
            (None, None, Some(values)) => Bid::Additive {
                values: values
                    .iter()
                    .map(AmountDoc::to_rational)
                    .collect::<Result<_>>()?,
            },
            _ => {
                return Err(Error::Syntax(format!(
                    "searcher {i}: expected either `bundle` with `bid`, or `values`"
                )))
            }
        };
        searchers.push(SearcherBid { id: s.id, bid });
    }
    AuctionInstance {
        n: doc.n,
        mode: doc.mode,
        payment_rule: doc.payment_rule.unwrap_or_default(),
        searchers,
        labels: doc.labels,
    }
    .validated()
}

/// Renders an instance as a pretty-printed JSON document accepted by [`parse_instance`].
pub fn render_instance(inst: &AuctionInstance) -> String {
    let amount = |r: &Rational| AmountDoc::Text(format_rational(r));
    let doc = InstanceDoc {
        mode: inst.mode,
        n: inst.n,
        payment_rule: Some(inst.payment_rule),
        labels: inst.labels.clone(),
        searchers: inst
            .searchers
            .iter()
            .map(|s| match &s.bid {
                Bid::SingleMinded { bundle, bid } => SearcherDoc {
                    id: s.id.clone(),
                    bundle: Some(bundle.clone()),
                    bid: Some(amount(bid)),
                    values: None,
                },
                Bid::Additive { values } => SearcherDoc {
                    id: s.id.clone(),
                    bundle: None,
                    bid: None,
                    values: Some(values.iter().map(amount).collect()),
                },
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("instance document serialises")
}

/// Whether transaction `j` appears in no bundle (single-minded) or carries only zero values.
pub fn is_idle_transaction(inst: &AuctionInstance, j: usize) -> bool {
    inst.searchers.iter().all(|s| match &s.bid {
        Bid::SingleMinded { bundle, .. } => !bundle.contains(&j),
        Bid::Additive { values } => values.get(j).is_none_or(|v| v.is_zero()),
    })
}

/// The worked three-searcher, four-transaction example: bundles `{0,1}`, `{2,3}`, `{1,3}` with
/// bids 10, 9 and 8.
pub fn worked_example() -> AuctionInstance {
    let r = |v: i64| Rational::from_integer(v.into());
    AuctionInstance::single_minded(
        4,
        [(vec![0, 1], r(10)), (vec![2, 3], r(9)), (vec![1, 3], r(8))],
    )
    .expect("worked example is valid")
}
