//! Leader election by repeated coin tossing: every survivor tosses a coin
//! with head probability `p` and only heads carry on. The result is the last
//! non-empty survivor set.

use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use super::trial_rng;
use crate::error::SimError;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElectionStats {
    pub mean_survivors: f64,
    pub survivors_std_error: f64,
    /// Tossing rounds that still left a non-empty survivor set.
    pub mean_rounds: f64,
    pub rounds_std_error: f64,
    pub trials: u64,
}

/// Integer power sums, so the merge order of parallel folds cannot change
/// the result.
#[derive(Clone, Copy, Default)]
struct Moments {
    count: u64,
    survivors: u128,
    survivors_sq: u128,
    rounds: u128,
    rounds_sq: u128,
}

impl Moments {
    fn add(mut self, survivors: u64, rounds: u64) -> Self {
        let (s, r) = (u128::from(survivors), u128::from(rounds));
        self.count += 1;
        self.survivors += s;
        self.survivors_sq += s * s;
        self.rounds += r;
        self.rounds_sq += r * r;
        self
    }

    fn merge(self, o: Self) -> Self {
        Self {
            count: self.count + o.count,
            survivors: self.survivors + o.survivors,
            survivors_sq: self.survivors_sq + o.survivors_sq,
            rounds: self.rounds + o.rounds,
            rounds_sq: self.rounds_sq + o.rounds_sq,
        }
    }
}

fn mean_and_error(sum: u128, sum_sq: u128, count: u64) -> (f64, f64) {
    let (sum, sum_sq) = (sum as f64, sum_sq as f64);
    let n = count as f64;
    let mean = sum / n;
    if count < 2 {
        return (mean, 0.0);
    }
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    (mean, (var / n).sqrt())
}

pub fn simulate_leader_election(p: f64, n: u64, trials: u64, seed: u64) -> Result<ElectionStats, SimError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(SimError::Config(format!("head probability {p} outside (0, 1)")));
    }
    if n == 0 {
        return Err(SimError::Config("election needs at least one player".into()));
    }
    if trials == 0 {
        return Err(SimError::ZeroTrials);
    }
    let totals = (0..trials)
        .into_par_iter()
        .fold(Moments::default, |acc, index| {
            let mut rng = trial_rng(seed, index);
            let mut alive = n;
            let mut rounds = 0;
            loop {
                let heads = Binomial::new(alive, p).expect("valid binomial").sample(&mut rng);
                if heads == 0 {
                    break;
                }
                alive = heads;
                rounds += 1;
            }
            acc.add(alive, rounds)
        })
        .reduce(Moments::default, Moments::merge);
    let (mean_survivors, survivors_std_error) = mean_and_error(totals.survivors, totals.survivors_sq, totals.count);
    let (mean_rounds, rounds_std_error) = mean_and_error(totals.rounds, totals.rounds_sq, totals.count);
    Ok(ElectionStats { mean_survivors, survivors_std_error, mean_rounds, rounds_std_error, trials })
}
