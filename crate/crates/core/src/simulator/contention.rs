use std::collections::BTreeMap;

use rand::RngCore;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use super::{trial_rng, HashThresholds};
use crate::analytics::Scheme;
use crate::error::SimError;
use crate::params::ProtocolParams;

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub params: ProtocolParams,
    /// Contending candidates.
    pub n: u64,
    pub trials: u64,
    pub master_seed: u64,
    pub scheme: Scheme,
}

impl SimConfig {
    fn check(&self) -> Result<(), SimError> {
        if self.trials == 0 {
            return Err(SimError::ZeroTrials);
        }
        if self.n > self.params.contender_bound() {
            return Err(SimError::Config(format!(
                "n={} exceeds contender bound {}",
                self.n,
                self.params.contender_bound()
            )));
        }
        Ok(())
    }
}

/// Result of one contest: the staircase level (explicit) or slot (implicit)
/// at which the first candidates got through, and how many did.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ContentionOutcome {
    pub level: u32,
    pub mined: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct EmpiricalDistribution {
    counts: BTreeMap<u64, u64>,
    level_counts: BTreeMap<u32, u64>,
    trials: u64,
}

impl EmpiricalDistribution {
    pub fn record(&mut self, outcome: ContentionOutcome) {
        *self.counts.entry(outcome.mined).or_default() += 1;
        *self.level_counts.entry(outcome.level).or_default() += 1;
        self.trials += 1;
    }

    pub fn merge(mut self, other: Self) -> Self {
        for (m, c) in other.counts {
            *self.counts.entry(m).or_default() += c;
        }
        for (l, c) in other.level_counts {
            *self.level_counts.entry(l).or_default() += c;
        }
        self.trials += other.trials;
        self
    }

    /// Occurrences of each mined count `m`.
    pub fn counts(&self) -> &BTreeMap<u64, u64> {
        &self.counts
    }

    /// Trials resolved at each level.
    pub fn level_counts(&self) -> &BTreeMap<u32, u64> {
        &self.level_counts
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn mean(&self) -> f64 {
        self.counts.iter().map(|(&m, &c)| m as f64 * c as f64).sum::<f64>() / self.trials as f64
    }

    /// Sample standard deviation.
    pub fn std_dev(&self) -> f64 {
        if self.trials < 2 {
            return 0.0;
        }
        let mean = self.mean();
        let ss: f64 = self.counts.iter().map(|(&m, &c)| c as f64 * (m as f64 - mean).powi(2)).sum();
        (ss / (self.trials - 1) as f64).sqrt()
    }

    pub fn std_error(&self) -> f64 {
        self.std_dev() / (self.trials as f64).sqrt()
    }

    /// Empirical `P(M > m)`.
    pub fn tail(&self, m: u64) -> f64 {
        self.counts.range(m + 1..).map(|(_, &c)| c).sum::<u64>() as f64 / self.trials as f64
    }
}

/// One explicit-scheme contest: every staircase level re-draws all `n`
/// hashes, and the first level with any hash at or below its threshold wins.
pub fn explicit_trial(rng: &mut impl RngCore, thresholds: &HashThresholds, n: u64) -> ContentionOutcome {
    let levels = thresholds.thresholds();
    for (level, &limit) in levels.iter().enumerate() {
        let mined = (0..n).filter(|_| thresholds.draw(rng) <= limit).count() as u64;
        if mined > 0 {
            return ContentionOutcome { level: level as u32, mined };
        }
    }
    // n == 0: the final threshold admits everything, so nothing is mined only without candidates.
    ContentionOutcome { level: (levels.len() - 1) as u32, mined: 0 }
}

/// One implicit-scheme contest: each candidate draws a single hash and
/// lands in the first slot whose threshold it clears.
pub fn implicit_trial(rng: &mut impl RngCore, thresholds: &HashThresholds, n: u64) -> ContentionOutcome {
    let mut best = usize::MAX;
    let mut mined = 0;
    for _ in 0..n {
        let slot = thresholds.level_of(thresholds.draw(rng));
        match slot.cmp(&best) {
            std::cmp::Ordering::Less => {
                best = slot;
                mined = 1;
            }
            std::cmp::Ordering::Equal => mined += 1,
            std::cmp::Ordering::Greater => {}
        }
    }
    let level = if mined == 0 { thresholds.thresholds().len() - 1 } else { best };
    ContentionOutcome { level: level as u32, mined }
}

/// Explicit contest drawing each level's pass count from `Binomial(n, P_l)`
/// instead of `n` separate hashes. Same law, cost independent of `n`.
pub fn explicit_trial_by_level(rng: &mut impl RngCore, probabilities: &[f64], n: u64) -> ContentionOutcome {
    let last = probabilities.len() - 1;
    for (level, &p) in probabilities[..last].iter().enumerate() {
        let mined = Binomial::new(n, p).expect("probability in [0, 1]").sample(rng);
        if mined > 0 {
            return ContentionOutcome { level: level as u32, mined };
        }
    }
    ContentionOutcome { level: last as u32, mined: n }
}

/// Implicit contest by levels: among candidates not admitted before slot
/// `l`, each is admitted at `l` with probability
/// `(P_l - P_{l-1}) / (1 - P_{l-1})`.
pub fn implicit_trial_by_level(rng: &mut impl RngCore, probabilities: &[f64], n: u64) -> ContentionOutcome {
    let last = probabilities.len() - 1;
    let mut below = 0.0;
    for (level, &p) in probabilities[..last].iter().enumerate() {
        let conditional = ((p - below) / (1.0 - below)).clamp(0.0, 1.0);
        let mined = Binomial::new(n, conditional).expect("probability in [0, 1]").sample(rng);
        if mined > 0 {
            return ContentionOutcome { level: level as u32, mined };
        }
        below = p;
    }
    ContentionOutcome { level: last as u32, mined: n }
}

/// Like [`simulate_contention`] but with the by-level samplers, for large `n`.
pub fn simulate_contention_by_level(config: &SimConfig) -> Result<EmpiricalDistribution, SimError> {
    config.check()?;
    let probabilities = config.params.probabilities();
    let trial = match config.scheme {
        Scheme::Explicit => explicit_trial_by_level,
        Scheme::Implicit => implicit_trial_by_level,
    };
    Ok((0..config.trials)
        .into_par_iter()
        .fold(EmpiricalDistribution::default, |mut acc, index| {
            acc.record(trial(&mut trial_rng(config.master_seed, index), probabilities, config.n));
            acc
        })
        .reduce(EmpiricalDistribution::default, EmpiricalDistribution::merge))
}

fn run_trials(
    config: &SimConfig,
    trial: impl Fn(&mut rand_chacha::ChaCha8Rng, &HashThresholds, u64) -> ContentionOutcome + Sync,
) -> Result<EmpiricalDistribution, SimError> {
    config.check()?;
    let thresholds = HashThresholds::new(&config.params);
    Ok((0..config.trials)
        .into_par_iter()
        .fold(EmpiricalDistribution::default, |mut acc, index| {
            let mut rng = trial_rng(config.master_seed, index);
            acc.record(trial(&mut rng, &thresholds, config.n));
            acc
        })
        .reduce(EmpiricalDistribution::default, EmpiricalDistribution::merge))
}

pub fn simulate_contention_explicit(config: &SimConfig) -> Result<EmpiricalDistribution, SimError> {
    if config.scheme != Scheme::Explicit {
        return Err(SimError::Config("explicit simulation needs scheme=explicit".into()));
    }
    run_trials(config, explicit_trial)
}

pub fn simulate_contention_implicit(config: &SimConfig) -> Result<EmpiricalDistribution, SimError> {
    if config.scheme != Scheme::Implicit {
        return Err(SimError::Config("implicit simulation needs scheme=implicit".into()));
    }
    run_trials(config, implicit_trial)
}

pub fn simulate_contention(config: &SimConfig) -> Result<EmpiricalDistribution, SimError> {
    match config.scheme {
        Scheme::Explicit => simulate_contention_explicit(config),
        Scheme::Implicit => simulate_contention_implicit(config),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(k: u32, big_n: u64, n: u64, trials: u64, scheme: Scheme) -> SimConfig {
        SimConfig { params: ProtocolParams::new(k, big_n, 256).unwrap(), n, trials, master_seed: 42, scheme }
    }

    #[test]
    fn single_contender_always_mined() {
        for scheme in [Scheme::Explicit, Scheme::Implicit] {
            let dist = simulate_contention(&config(8, 1 << 32, 1, 2000, scheme)).unwrap();
            assert_eq!(dist.counts().len(), 1);
            assert_eq!(dist.counts()[&1], 2000);
        }
    }

    #[test]
    fn rejects_bad_config() {
        assert!(matches!(simulate_contention(&config(2, 16, 2, 0, Scheme::Explicit)), Err(SimError::ZeroTrials)));
        assert!(simulate_contention(&config(2, 16, 17, 10, Scheme::Explicit)).is_err());
        assert!(simulate_contention_explicit(&config(2, 16, 2, 10, Scheme::Implicit)).is_err());
        assert!(simulate_contention_implicit(&config(2, 16, 2, 10, Scheme::Explicit)).is_err());
    }

    #[test]
    fn seeded_runs_repeat() {
        let cfg = config(4, 256, 64, 5000, Scheme::Explicit);
        assert_eq!(simulate_contention(&cfg).unwrap(), simulate_contention(&cfg).unwrap());
    }

    #[test]
    fn by_level_sampler_matches_hash_draws() {
        for scheme in [Scheme::Explicit, Scheme::Implicit] {
            let cfg = config(4, 256, 40, 40_000, scheme);
            let (a, b) = (simulate_contention(&cfg).unwrap(), simulate_contention_by_level(&cfg).unwrap());
            let se = (a.std_error().powi(2) + b.std_error().powi(2)).sqrt();
            assert!((a.mean() - b.mean()).abs() <= 3.0 * se, "{scheme:?}: {} vs {}", a.mean(), b.mean());
            for level in 0..=4 {
                let fa = a.level_counts().get(&level).copied().unwrap_or(0) as f64 / 40_000.0;
                let fb = b.level_counts().get(&level).copied().unwrap_or(0) as f64 / 40_000.0;
                assert!((fa - fb).abs() < 0.02, "{scheme:?} level {level}");
            }
        }
        let single = simulate_contention_by_level(&config(8, 1 << 32, 1, 500, Scheme::Implicit)).unwrap();
        assert_eq!(single.counts()[&1], 500);
    }

    #[test]
    fn statistics() {
        let mut dist = EmpiricalDistribution::default();
        for mined in [1, 1, 2, 4] {
            dist.record(ContentionOutcome { level: 0, mined });
        }
        assert_eq!(dist.mean(), 2.0);
        assert!((dist.std_dev() - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(dist.tail(1), 0.5);
        assert_eq!(dist.tail(4), 0.0);
    }
}
