//! Transaction-level revenue redistribution for blockspace auctions.
//!
//! Searchers bid on bundles of transactions; the auction's revenue, viewed as a cooperative
//! game over transactions, is shared back to transaction creators by Shapley value.

pub mod auction;
pub mod charfn;
pub mod coalition;
pub mod error;
pub mod experiment;
pub mod hardness;
pub mod harsanyi;
pub mod instance;
pub mod money;
pub mod rsyp;
pub mod shapley;

pub use auction::{
    check_matchmaking_properties, run_auction, run_icasm, run_spa_vcg, AllocationOutcome,
    IcasmPlan, PropertyReport, Winner,
};
pub use charfn::{AdditiveGame, CharacteristicCache, CharacteristicFunction, RstGame, TableGame};
pub use coalition::CoalitionMask;
pub use error::{Error, Result};
pub use instance::{
    parse_instance, render_instance, restrict_searchers, validate_instance, AuctionInstance, Bid,
    PaymentRule, SearcherBid, ValuationMode,
};
pub use money::{Money, Rational};
pub use shapley::{exact_shapley, gamma_from_phi, ShapleyMethod, ShapleyResult};
