//! Block model, hashing and per-variant validation.

mod block;
mod state;
pub mod text;

pub use block::{digest_transactions, Block, BlockKind, Hash256, TransactionId, Word256};
pub use state::{ChainEntry, ChainState, ValidationVerdict, Variant, VerdictReason, DEFAULT_MGT};
