//! Exact trust and reputation for decentralized marketplaces.
//!
//! The trust placed in a seller with `k` fulfilled transactions out of `n`
//! is `(k + 1) / (n + 2)`. This crate computes it and everything derived
//! from it (updates, epoch aggregation, discounting, long-term prediction)
//! in exact rational arithmetic, checks each result against a brute-force
//! urn model, keeps per-segment reputation on a hash-chained log, and runs
//! seeded marketplace simulations.

pub mod error;
pub mod ledger;
pub mod rational;
pub mod rng;
pub mod simulator;
pub mod trust_engine;
pub mod urn_oracle;
pub mod verify;

pub use error::{Error, Result};
pub use ledger::{Block, Chain, SegmentKey, Segmentation, TransactionRecord};
pub use rational::Rational;
pub use simulator::{Mode, ResultSeries, Scenario, SimulationConfig};
pub use trust_engine::{
    aggregate, discount_scheme1, discount_scheme2, improves, predict_expected_successes,
    predict_score, trust, update, DiscountWeights, EpochScore, Prediction, ReputationScore,
    TrustMeasure, Window,
};
