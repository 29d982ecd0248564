//! Nonce-free blockchain mining moderated by call-value staircases and
//! empty blocks.
//!
//! - [`params`]: the probability staircase and integer call values.
//! - [`chain`]: block format, hashing and validation for the explicit,
//!   time-moderated and implicit empty-block variants.
//! - [`analytics`]: exact distribution and moments of the number of blocks
//!   mined simultaneously, with the bounds that keep it `O(N^(1/k))`.
//! - [`simulator`]: Monte Carlo oracles, leader election and a discrete-event
//!   network run.
//! - [`nursing`]: the two-party block-nursing contest.

pub mod analytics;
pub mod chain;
pub mod error;
pub mod nursing;
pub mod params;
pub mod simulator;

pub use error::{AnalyticsError, ChainError, NursingError, ParamsError, SimError};
pub use params::{CallSchedule, ProtocolParams};
