//! Single-server chain building: one pending candidate at a time, retried
//! until a regular block gets in. Explicit and time-moderated chains insert
//! an empty block after each refusal; implicit chains wait for the next slot.

use std::sync::Arc;

use rand::{Rng, RngCore};

use super::trial_rng;
use crate::chain::{Block, ChainState, TransactionId, Variant, VerdictReason, Word256};
use crate::error::{ChainError, SimError};
use crate::params::ProtocolParams;

#[derive(Clone, Debug)]
pub struct EpisodeReport {
    pub chain: ChainState,
    /// Longest run of empty blocks (explicit, time-moderated) or refused
    /// gated slots (implicit) before a regular block.
    pub max_gap: u32,
    /// Refusals at the last staircase level, where every hash must pass.
    pub liveness_violations: u64,
}

fn random_transactions(rng: &mut impl RngCore) -> Vec<TransactionId> {
    let count = rng.random_range(1..=4);
    let mut ids: Vec<TransactionId> = (0..count)
        .map(|_| {
            let mut id = [0u8; 32];
            rng.fill_bytes(&mut id);
            TransactionId(Word256(id))
        })
        .collect();
    ids.sort();
    ids
}

fn to_sim(e: ChainError) -> SimError {
    SimError::Config(e.to_string())
}

/// Builds a chain holding `regular_blocks` regular blocks after genesis.
/// Clock readings use the same unit as `mgt`.
pub fn run_chain_episode(
    params: Arc<ProtocolParams>,
    variant: Variant,
    mgt: u64,
    regular_blocks: u32,
    seed: u64,
) -> Result<EpisodeReport, SimError> {
    if mgt < 2 {
        return Err(SimError::Config("episodes need mgt >= 2".into()));
    }
    let mut rng = trial_rng(seed, 0);
    let mut chain = ChainState::new(params, variant, mgt).map_err(to_sim)?;
    let k = chain.params().k();
    let (mut max_gap, mut violations) = (0u32, 0u64);
    let mut now = 0u64;
    for _ in 0..regular_blocks {
        let txs = random_transactions(&mut rng);
        let mut gap = 0u32;
        loop {
            match variant {
                Variant::Explicit | Variant::TimeModerated => {
                    now += rng.random_range(0..mgt);
                    let candidate = Block::regular(chain.head().hash, now, txs.clone(), chain.regular_call_value());
                    let verdict = chain.validate(&candidate, now).map_err(to_sim)?;
                    if verdict.accepted() {
                        chain.append(candidate, now).map_err(to_sim)?;
                        break;
                    }
                    if chain.empty_count_since_full() == k {
                        violations += 1;
                    }
                    // The empty block follows the head by one MGT at least.
                    now = now.max(chain.head().block.date + mgt);
                    let empty = Block::empty(chain.head().hash, now, chain.next_empty_call_value());
                    chain.append(empty, now).map_err(to_sim)?;
                    gap += 1;
                }
                Variant::Implicit => {
                    let candidate =
                        Block::regular(chain.last_full().hash, now, txs.clone(), chain.regular_call_value());
                    let slot = u64::from(gap) + 1;
                    let at = chain.last_full_block_time() + slot * mgt + rng.random_range(0..mgt);
                    match chain.append(candidate, at) {
                        Ok(_) => {
                            now = at;
                            break;
                        }
                        Err(ChainError::Rejected(VerdictReason::BadSlotThreshold)) => {
                            if chain.implicit_gate_level(slot) == Some(k) {
                                violations += 1;
                            }
                            gap += 1;
                        }
                        Err(e) => return Err(to_sim(e)),
                    }
                }
            }
            if gap > k + 1 {
                break;
            }
        }
        max_gap = max_gap.max(gap);
    }
    Ok(EpisodeReport { chain, max_gap, liveness_violations: violations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn episodes_reach_target_and_replay() {
        let params = Arc::new(ProtocolParams::new(3, 64, 256).unwrap());
        for variant in [Variant::Explicit, Variant::TimeModerated, Variant::Implicit] {
            let report = run_chain_episode(Arc::clone(&params), variant, 60, 25, 8).unwrap();
            let regular = report.chain.entries().iter().filter(|e| e.block.is_regular()).count();
            assert_eq!(regular, 25, "{variant:?}");
            assert!(report.max_gap <= 3);
            assert_eq!(report.liveness_violations, 0);
            let replayed = ChainState::replay(Arc::clone(&params), variant, 60, report.chain.entries()).unwrap();
            assert_eq!(replayed.head().hash, report.chain.head().hash);
        }
    }

    #[test]
    fn rejects_short_mgt() {
        let params = Arc::new(ProtocolParams::new(3, 64, 256).unwrap());
        assert!(run_chain_episode(params, Variant::Implicit, 1, 1, 0).is_err());
    }
}
