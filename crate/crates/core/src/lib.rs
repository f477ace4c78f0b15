//! Simulation and numerical-analysis toolkit for longest-chain proof-of-stake
//! protocols with `c`-correlated lottery randomness.
//!
//! The crate is organised bottom-up:
//!
//! * [`blocktree`] — blocks, the block tree, and every fork-choice / mining-set rule.
//! * [`lottery`] — a deterministic mock VRF, leader election and stake lookup.
//! * [`simnet`] — slotted and continuous-time simulation engines.
//! * [`adversary`] — attack strategies plugged into the engines.
//! * [`numerics`] — growth-rate constants and security thresholds.
//! * [`analyzer`] — post-hoc trace analysis and security-property checks.
//!
//! The numerical routines are generic over the floating point type through
//! [`Scalar`]; the `*64` aliases below fix them to `f64`.

pub mod adversary;
pub mod analyzer;
pub mod blocktree;
pub mod lottery;
pub mod numerics;
pub mod seed;
pub mod simnet;

mod scalar;

pub use scalar::Scalar;

pub use blocktree::{
    Block, BlockId, BlockTree, ChainRef, DTieBreak, MinerId, ProtocolParams, TieBreak,
    TreeError, Truncation,
};
pub use lottery::{LotteryParams, Stakeholder};
pub use simnet::{SimConfig, SimError, SimTrace};

/// Growth constants solved in double precision.
pub type GrowthSolution64 = numerics::GrowthSolution<f64>;
/// Growth constants solved in single precision.
pub type GrowthSolution32 = numerics::GrowthSolution<f32>;
/// Delay-adjusted threshold in double precision.
pub type DelayThreshold64 = numerics::DelayThreshold<f64>;
