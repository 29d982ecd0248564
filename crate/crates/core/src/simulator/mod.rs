//! Monte Carlo oracles for the analytics module, the coin-tossing leader
//! election, single-server chain-building episodes, and a discrete-event
//! network run over the chain validators.
//!
//! Every trial draws from its own ChaCha8 stream, keyed by the master seed
//! and selected by the trial index, so results do not depend on how trials
//! are scheduled across threads.

mod contention;
mod election;
mod episodes;
mod network;

pub use contention::{
    explicit_trial, explicit_trial_by_level, implicit_trial, implicit_trial_by_level, simulate_contention,
    simulate_contention_by_level, simulate_contention_explicit, simulate_contention_implicit, ContentionOutcome,
    EmpiricalDistribution, SimConfig,
};
pub use election::{simulate_leader_election, ElectionStats};
pub use episodes::{run_chain_episode, EpisodeReport};
pub use network::{simulate_network, NetworkConfig, NetworkSimReport};

use num_traits::ToPrimitive;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::params::ProtocolParams;

/// RNG for trial `index` under `master_seed`.
pub fn trial_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Call values rescaled to 64-bit draws: a contender passes level `l` iff
/// its draw is `<=` `thresholds[l]`. Hashes wider than 64 bits keep their top
/// 64 bits; narrower hashes are drawn at their own width.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HashThresholds {
    draw_shift: u32,
    thresholds: Vec<u64>,
}

impl HashThresholds {
    pub fn new(params: &ProtocolParams) -> Self {
        let bits = params.hash_bits();
        let (draw_shift, drop) = if bits >= 64 { (0, bits - 64) } else { (64 - bits, 0) };
        let thresholds =
            params.call_schedule().values().iter().map(|c| (c >> drop).to_u64().expect("fits after shift")).collect();
        Self { draw_shift, thresholds }
    }

    pub fn thresholds(&self) -> &[u64] {
        &self.thresholds
    }

    #[inline]
    pub fn draw(&self, rng: &mut impl RngCore) -> u64 {
        rng.next_u64() >> self.draw_shift
    }

    /// First level admitting `value`.
    #[inline]
    pub fn level_of(&self, value: u64) -> usize {
        self.thresholds.partition_point(|&t| t < value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thresholds_are_dyadic_for_power_of_two_bounds() {
        let params = ProtocolParams::new(8, 1 << 32, 256).unwrap();
        let t = HashThresholds::new(&params);
        for (level, &value) in t.thresholds().iter().enumerate() {
            assert_eq!(value as u128 + 1, 1u128 << (32 + 4 * level));
        }
        assert_eq!(t.level_of(0), 0);
        assert_eq!(t.level_of(u64::MAX), 8);
        assert_eq!(t.level_of((1 << 32) - 1), 0);
        assert_eq!(t.level_of(1 << 32), 1);
    }

    #[test]
    fn narrow_hash_draws_at_width() {
        let params = ProtocolParams::new(1, 2, 8).unwrap();
        let t = HashThresholds::new(&params);
        assert_eq!(t.thresholds(), &[127, 255]);
        let mut rng = trial_rng(1, 0);
        assert!((0..1000).all(|_| t.draw(&mut rng) <= 255));
    }

    #[test]
    fn streams_differ_and_repeat() {
        let a: Vec<u64> = (0..4).map(|_| trial_rng(7, 0).next_u64()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        assert_ne!(trial_rng(7, 0).next_u64(), trial_rng(7, 1).next_u64());
        assert_ne!(trial_rng(7, 0).next_u64(), trial_rng(8, 0).next_u64());
    }
}
