//! Two nurses `A` and `B` prepare `m` and `n` candidate blocks for the same
//! contest. `L_{m,n}` is the probability that `A` loses: `B` gets through at
//! an earlier slot, or both at the same slot and a fair coin picks `B`.
//!
//! [`Scheme::Explicit`] redraws every nursed block at each slot (one pass
//! probability `P_l` per block and slot). [`Scheme::Implicit`] draws each
//! block once; it then passes at the first slot whose call value admits it.

use rand::{Rng, RngCore};
use rayon::prelude::*;

use crate::analytics::Scheme;
use crate::error::NursingError;
use crate::params::ProtocolParams;
use crate::simulator::{trial_rng, HashThresholds};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NursingMethod {
    Exact,
    MonteCarlo,
    Asymptote,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NursingOutcome {
    pub m: u64,
    pub n: u64,
    pub loss_probability: f64,
    /// Zero unless `method` is `MonteCarlo`.
    pub std_error: f64,
    pub method: NursingMethod,
}

/// `(1 - q)^count` without cancellation for tiny `q`.
fn survive(q: f64, count: u64) -> f64 {
    if q >= 1.0 {
        return if count == 0 { 1.0 } else { 0.0 };
    }
    (count as f64 * (-q).ln_1p()).exp()
}

/// `L_{m,n}` under explicit, per-slot draws.
pub fn loss_probability_exact(params: &ProtocolParams, m: u64, n: u64) -> Result<f64, NursingError> {
    loss_probability_exact_with(params, m, n, Scheme::Explicit)
}

pub fn loss_probability_exact_with(
    params: &ProtocolParams,
    m: u64,
    n: u64,
    scheme: Scheme,
) -> Result<f64, NursingError> {
    if n == 0 {
        return Err(NursingError::EmptyOpponent);
    }
    let probs = params.probabilities();
    let mut loss = 0.0;
    match scheme {
        Scheme::Explicit => {
            // Both nurses still empty-handed before slot l.
            let mut none_yet = 1.0;
            for &p in probs {
                let a = 1.0 - survive(p, m);
                let b = 1.0 - survive(p, n);
                loss += none_yet * b * (1.0 - 0.5 * a);
                none_yet *= survive(p, m + n);
            }
        }
        Scheme::Implicit => {
            // Chance that a nursery's earliest slot is at least l.
            let at_least = |count: u64, l: usize| if l == 0 { 1.0 } else { survive(probs[l - 1], count) };
            for l in 0..probs.len() {
                let a_later = at_least(m, l + 1);
                let a_here = at_least(m, l) - a_later;
                let b_here = at_least(n, l) - at_least(n, l + 1);
                loss += b_here * (a_later + 0.5 * a_here);
            }
        }
    }
    Ok(loss.clamp(0.0, 1.0))
}

/// Earliest slot at which any of `count` blocks passes; `None` if `count == 0`.
fn first_slot(rng: &mut impl RngCore, thresholds: &HashThresholds, count: u64, scheme: Scheme) -> Option<usize> {
    if count == 0 {
        return None;
    }
    match scheme {
        Scheme::Explicit => {
            let levels = thresholds.thresholds();
            let slot = levels.iter().position(|&limit| (0..count).any(|_| thresholds.draw(rng) <= limit));
            Some(slot.unwrap_or(levels.len() - 1))
        }
        Scheme::Implicit => (0..count).map(|_| thresholds.level_of(thresholds.draw(rng))).min(),
    }
}

/// One contest; true when `A` loses.
fn contest(rng: &mut impl RngCore, thresholds: &HashThresholds, m: u64, n: u64, scheme: Scheme) -> bool {
    let a = first_slot(rng, thresholds, m, scheme);
    let b = first_slot(rng, thresholds, n, scheme).expect("n >= 1");
    match a {
        None => true,
        Some(a) if a == b => rng.random_bool(0.5),
        Some(a) => b < a,
    }
}

fn check_trials(n: u64, trials: u64) -> Result<(), NursingError> {
    if n == 0 {
        return Err(NursingError::EmptyOpponent);
    }
    if trials == 0 {
        return Err(NursingError::ZeroTrials);
    }
    Ok(())
}

/// Mean and standard error from integer sums.
fn summarize(count: u64, sum: u128, sum_sq: u128) -> (f64, f64) {
    let c = count as f64;
    let mean = sum as f64 / c;
    if count < 2 {
        return (mean, 0.0);
    }
    let var = ((sum_sq as f64 - c * mean * mean) / (c - 1.0)).max(0.0);
    (mean, (var / c).sqrt())
}

pub fn loss_probability_simulated(
    params: &ProtocolParams,
    m: u64,
    n: u64,
    trials: u64,
    seed: u64,
) -> Result<NursingOutcome, NursingError> {
    loss_probability_simulated_with(params, m, n, trials, seed, Scheme::Explicit)
}

pub fn loss_probability_simulated_with(
    params: &ProtocolParams,
    m: u64,
    n: u64,
    trials: u64,
    seed: u64,
    scheme: Scheme,
) -> Result<NursingOutcome, NursingError> {
    check_trials(n, trials)?;
    let thresholds = HashThresholds::new(params);
    let losses: u64 = (0..trials)
        .into_par_iter()
        .map(|index| u64::from(contest(&mut trial_rng(seed, index), &thresholds, m, n, scheme)))
        .sum();
    let (loss_probability, std_error) = summarize(trials, u128::from(losses), u128::from(losses));
    Ok(NursingOutcome { m, n, loss_probability, std_error, method: NursingMethod::MonteCarlo })
}

/// Repeats contests until `A` loses one and reports the mean number of
/// contests played (the losing one included) with its standard error. The
/// mean estimates `1 / L_{m,n}`.
pub fn run_length_simulated(
    params: &ProtocolParams,
    m: u64,
    n: u64,
    trials: u64,
    seed: u64,
    scheme: Scheme,
) -> Result<(f64, f64), NursingError> {
    check_trials(n, trials)?;
    let thresholds = HashThresholds::new(params);
    let (sum, sum_sq) = (0..trials)
        .into_par_iter()
        .map(|index| {
            let mut rng = trial_rng(seed, index);
            let mut length: u128 = 1;
            while !contest(&mut rng, &thresholds, m, n, scheme) {
                length += 1;
            }
            (length, length * length)
        })
        .reduce(|| (0, 0), |x, y| (x.0 + y.0, x.1 + y.1));
    Ok(summarize(trials, sum, sum_sq))
}

fn check_p(p: f64) -> Result<(), NursingError> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(NursingError::ProbabilityOutOfRange(p))
    }
}

/// Main term of `L` at ratio `x = m/n` for staircase ratio `p`.
pub fn loss_asymptote(p: f64, x: f64) -> Result<f64, NursingError> {
    check_p(p)?;
    if !(x > 0.0 && x.is_finite()) {
        return Err(NursingError::NonPositiveRatio(x));
    }
    Ok((((x + p) * p).ln() - (p * x).ln_1p()) / (2.0 * p.ln()))
}

/// `-dL/dx` at `x = 0`: nursery growth, as a multiple of `n`, bought per
/// unit of win probability near the start.
pub fn amplification_factor(p: f64) -> Result<f64, NursingError> {
    check_p(p)?;
    Ok((1.0 - p * p) / (2.0 * p * (1.0 / p).ln()))
}

/// The same quantity with a base-10 logarithm in the denominator and no
/// `p^2` correction; kept to compare against figures quoted that way.
pub fn amplification_factor_log10(p: f64) -> Result<f64, NursingError> {
    check_p(p)?;
    Ok(1.0 / (2.0 * p * (1.0 / p).log10()))
}

pub fn exact_outcome(params: &ProtocolParams, m: u64, n: u64, scheme: Scheme) -> Result<NursingOutcome, NursingError> {
    let loss_probability = loss_probability_exact_with(params, m, n, scheme)?;
    Ok(NursingOutcome { m, n, loss_probability, std_error: 0.0, method: NursingMethod::Exact })
}

pub fn asymptote_outcome(p: f64, m: u64, n: u64) -> Result<NursingOutcome, NursingError> {
    if n == 0 {
        return Err(NursingError::EmptyOpponent);
    }
    let loss_probability = loss_asymptote(p, m as f64 / n as f64)?;
    Ok(NursingOutcome { m, n, loss_probability, std_error: 0.0, method: NursingMethod::Asymptote })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn standard() -> ProtocolParams {
        ProtocolParams::new(8, 1 << 32, 256).unwrap()
    }

    #[test]
    fn empty_nursery_always_loses() {
        for scheme in [Scheme::Explicit, Scheme::Implicit] {
            assert_eq!(loss_probability_exact_with(&standard(), 0, 7, scheme).unwrap(), 1.0);
        }
        let mc = loss_probability_simulated(&standard(), 0, 3, 100, 1).unwrap();
        assert_eq!(mc.loss_probability, 1.0);
    }

    #[test]
    fn equal_nurseries_split_evenly() {
        for scheme in [Scheme::Explicit, Scheme::Implicit] {
            for n in [1, 10, 100, 10_000] {
                let l = loss_probability_exact_with(&standard(), n, n, scheme).unwrap();
                assert!((l - 0.5).abs() < 1e-10, "{scheme:?} n={n}: {l}");
            }
        }
    }

    #[test]
    fn single_slot_pair_by_hand() {
        // k=1, N=2: P = [1/2, 1]. Explicit, m=n=1 is symmetric; m=1, n=2:
        // slot 0 has a = 1/2, b = 3/4, then both surely pass at slot 1.
        let params = ProtocolParams::new(1, 2, 256).unwrap();
        let l = loss_probability_exact(&params, 1, 2).unwrap();
        let by_hand = 0.75 * (1.0 - 0.25) + 0.125 * 0.5;
        assert!((l - by_hand).abs() < 1e-15);
        let implicit = loss_probability_exact_with(&params, 1, 2, Scheme::Implicit).unwrap();
        assert!((implicit - by_hand).abs() < 1e-15);
    }

    #[test]
    fn matches_descending_index_sum() {
        // Same game written with slots counted down from the top of the
        // staircase: P_l = p^(k-l), survival over the higher powers.
        let params = ProtocolParams::new(4, 256, 256).unwrap();
        let (p, k) = (params.p(), 4i32);
        for (m, n) in [(1u64, 1u64), (3, 17), (40, 2), (0, 5), (90, 90)] {
            let descending: f64 = (0..=k)
                .map(|l| {
                    let q = 1.0 - p.powi(l);
                    let survival: f64 = (l + 1..=k).map(|i| (1.0 - p.powi(i)).powf((n + m) as f64)).product();
                    0.5 * (1.0 - q.powf(n as f64)) * (1.0 + q.powf(m as f64)) * survival
                })
                .sum();
            let l = loss_probability_exact(&params, m, n).unwrap();
            assert!((l - descending).abs() < 1e-12, "({m},{n}): {l} vs {descending}");
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(loss_probability_exact(&standard(), 3, 0), Err(NursingError::EmptyOpponent));
        assert!(loss_probability_simulated(&standard(), 3, 3, 0, 0).is_err());
        assert!(loss_asymptote(0.5, 0.0).is_err());
        assert!(loss_asymptote(1.0, 1.0).is_err());
        assert!(amplification_factor(0.0).is_err());
    }

    #[test]
    fn asymptote_values() {
        for p in [1.0 / 16.0, 0.25, 0.5, 0.9] {
            assert!((loss_asymptote(p, 1.0).unwrap() - 0.5).abs() < 1e-15);
            assert!((loss_asymptote(p, 1e-9).unwrap() - 1.0).abs() < 1e-6);
            assert!(loss_asymptote(p, 1e9).unwrap().abs() < 1e-6);
        }
        let l = loss_asymptote(0.25, 4.0).unwrap();
        assert!((l - 0.22813428968741517).abs() < 1e-14, "{l}");
    }

    #[test]
    fn amplification_values() {
        let cases = [
            (8, 2.8741190267709817, 6.643856189774724),
            (12, 1.6749998008090146, 3.954924114290187),
            (16, 1.3525266008334031, 3.3219280948873626),
        ];
        for (k, natural, decimal) in cases {
            let p = ProtocolParams::new(k, 1 << 32, 256).unwrap().p();
            assert!((amplification_factor(p).unwrap() - natural).abs() < 1e-12, "k={k}");
            assert!((amplification_factor_log10(p).unwrap() - decimal).abs() < 1e-9, "k={k}");
        }
        let grid: Vec<f64> = (0..=90).map(|i| amplification_factor(0.05 + 0.01 * f64::from(i)).unwrap()).collect();
        assert!(grid.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn slope_at_origin_is_amplification() {
        for p in [1.0 / 16.0, 0.25, 0.6] {
            let h = 1e-6;
            let slope = (loss_asymptote(p, h).unwrap() - 1.0) / h;
            let expected = -amplification_factor(p).unwrap();
            assert!(((slope - expected) / expected).abs() < 1e-4, "p={p}: {slope} vs {expected}");
        }
    }

    #[test]
    fn simulation_is_deterministic() {
        let a = loss_probability_simulated(&standard(), 5, 9, 2000, 4).unwrap();
        assert_eq!(a, loss_probability_simulated(&standard(), 5, 9, 2000, 4).unwrap());
        assert_eq!(a.method, NursingMethod::MonteCarlo);
    }
}
