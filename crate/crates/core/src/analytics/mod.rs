//! Exact law of `M_n`, the number of regular blocks mined simultaneously
//! when `n` candidates contend after a full block.
//!
//! Explicit empty blocks re-randomise every candidate hash at each staircase
//! level, so level `l` calls a `Binomial(n, P_l)` number of blocks. Implicit
//! empty blocks keep one hash per candidate; a candidate lands in the first
//! slot whose threshold it clears.

mod fourier;
mod grid;

pub use fourier::{
    bound_constants, fourier_constant_a, fourier_constant_b, fourier_terms, BoundConstants, DEFAULT_TRUNCATION,
};
pub use grid::{local_maxima, log_grid};

use statrs::function::factorial::ln_binomial;

use crate::error::AnalyticsError;
use crate::params::ProtocolParams;

/// Largest `n` accepted by the O(k n) exact pmf routines.
pub const EXACT_PMF_LIMIT: u64 = 1 << 16;

const RENORMALIZE_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub enum Scheme {
    Explicit,
    Implicit,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Explicit => "explicit",
            Scheme::Implicit => "implicit",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "explicit" => Ok(Scheme::Explicit),
            "implicit" => Ok(Scheme::Implicit),
            other => Err(format!("unknown scheme `{other}` (expected explicit|implicit)")),
        }
    }
}

/// Probability mass of `M_n` over `0..=n`.
#[derive(Clone, Debug, PartialEq)]
pub struct MiningDistribution {
    n: u64,
    pmf: Vec<f64>,
    scheme: Scheme,
}

impl MiningDistribution {
    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(m, w)| m as f64 * w).sum()
    }

    /// `P(M_n > m)`, summed from the top so small tails keep full precision.
    pub fn tail(&self, m: usize) -> f64 {
        self.pmf.iter().skip(m + 1).rev().sum()
    }

    /// `P(M_n > m)` for every `m` in `0..=n`.
    pub fn tails(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.pmf.len()];
        let mut acc = 0.0;
        for m in (0..self.pmf.len()).rev() {
            out[m] = acc;
            acc += self.pmf[m];
        }
        out
    }

    fn finish(n: u64, mut pmf: Vec<f64>, scheme: Scheme) -> Result<Self, AnalyticsError> {
        let mass: f64 = pmf.iter().sum();
        if (mass - 1.0).abs() >= RENORMALIZE_TOLERANCE {
            return Err(AnalyticsError::MassMismatch(mass));
        }
        pmf.iter_mut().for_each(|w| *w /= mass);
        Ok(Self { n, pmf, scheme })
    }
}

fn check_count(params: &ProtocolParams, n: u64, limit: u64) -> Result<(), AnalyticsError> {
    let max = params.contender_bound().min(limit);
    if n > max {
        Err(AnalyticsError::CountOutOfRange { n, max })
    } else {
        Ok(())
    }
}

/// `C(n, m) a^m b^(n-m)` with `ln_b = ln b` precomputed (may be `-inf`).
fn binomial_term(n: u64, m: u64, a: f64, ln_b: f64) -> f64 {
    if a == 0.0 {
        return if m == 0 { ln_b.exp() } else { 0.0 };
    }
    let rest = n - m;
    let tail = if rest == 0 { 0.0 } else { rest as f64 * ln_b };
    (ln_binomial(n, m) + m as f64 * a.ln() + tail).exp()
}

/// `ln(1 - x)`, `-inf` at `x = 1`.
fn ln_complement(x: f64) -> f64 {
    (-x).ln_1p()
}

/// Explicit-scheme law by back-substitution from level `k`, where `M_n^k = n`:
/// `P(M^l = m) = Bin(n, P_l)(m) + (1 - P_l)^n P(M^(l+1) = m)` for `m > 0`.
pub fn distribution_explicit_recurrence(params: &ProtocolParams, n: u64) -> Result<MiningDistribution, AnalyticsError> {
    check_count(params, n, EXACT_PMF_LIMIT)?;
    let size = n as usize + 1;
    let mut level_pmf = vec![0.0; size];
    level_pmf[n as usize] = 1.0;
    if n == 0 {
        return MiningDistribution::finish(n, level_pmf, Scheme::Explicit);
    }
    let probabilities = params.probabilities();
    for level in (0..params.k() as usize).rev() {
        let prob = probabilities[level];
        let ln_fail = ln_complement(prob);
        let stay = (n as f64 * ln_fail).exp();
        let mut next = vec![0.0; size];
        for m in 1..=n {
            next[m as usize] = binomial_term(n, m, prob, ln_fail) + stay * level_pmf[m as usize];
        }
        level_pmf = next;
    }
    MiningDistribution::finish(n, level_pmf, Scheme::Explicit)
}

/// Explicit-scheme law read off the closed-form generating function: a
/// mixture of `Binomial(n, P_l)` laws restricted to `m > 0`, weighted by
/// `prod_{j<l} (1 - P_j)^n`, plus a point mass at `n`.
pub fn distribution_explicit_closed(params: &ProtocolParams, n: u64) -> Result<MiningDistribution, AnalyticsError> {
    check_count(params, n, EXACT_PMF_LIMIT)?;
    let mut pmf = vec![0.0; n as usize + 1];
    if n == 0 {
        pmf[0] = 1.0;
        return MiningDistribution::finish(n, pmf, Scheme::Explicit);
    }
    let mut ln_weight = 0.0f64;
    for &prob in &params.probabilities()[..params.k() as usize] {
        let weight = ln_weight.exp();
        let ln_fail = ln_complement(prob);
        for m in 1..=n {
            pmf[m as usize] += weight * binomial_term(n, m, prob, ln_fail);
        }
        ln_weight += n as f64 * ln_fail;
    }
    pmf[n as usize] += ln_weight.exp();
    MiningDistribution::finish(n, pmf, Scheme::Explicit)
}

/// `prod_{j<l} (1 - P_j)^n` for `l = 0..=k`, as logs.
fn ln_survival(params: &ProtocolParams, n: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(params.k() as usize + 1);
    let mut acc = 0.0;
    out.push(acc);
    for &prob in &params.probabilities()[..params.k() as usize] {
        acc += n as f64 * ln_complement(prob);
        out.push(acc);
    }
    out
}

/// `E[M_n] = n P_0 + sum_{l=1..k} n P_l prod_{j<l} (1 - P_j)^n`.
pub fn expected_mined_explicit(params: &ProtocolParams, n: u64) -> Result<f64, AnalyticsError> {
    check_count(params, n, u64::MAX)?;
    let probabilities = params.probabilities();
    let survival = ln_survival(params, n);
    let n_f = n as f64;
    Ok(n_f * probabilities[0]
        + (1..=params.k() as usize).map(|l| n_f * probabilities[l] * survival[l].exp()).sum::<f64>())
}

/// Implicit-scheme law: for `m > 0`,
/// `P(M_n = m) = sum_{l=0..k} C(n, m) (P_l - P_{l-1})^m (1 - P_l)^(n-m)`
/// with `P_{-1} = 0`; the `l = k` term is the point mass `(1 - P_{k-1})^n` at `n`.
pub fn distribution_implicit(params: &ProtocolParams, n: u64) -> Result<MiningDistribution, AnalyticsError> {
    check_count(params, n, EXACT_PMF_LIMIT)?;
    let mut pmf = vec![0.0; n as usize + 1];
    if n == 0 {
        pmf[0] = 1.0;
        return MiningDistribution::finish(n, pmf, Scheme::Implicit);
    }
    let probabilities = params.probabilities();
    let k = params.k() as usize;
    for level in 0..k {
        let band = if level == 0 { probabilities[0] } else { probabilities[level] - probabilities[level - 1] };
        let ln_above = ln_complement(probabilities[level]);
        for m in 1..=n {
            pmf[m as usize] += binomial_term(n, m, band, ln_above);
        }
    }
    pmf[n as usize] += (n as f64 * ln_complement(probabilities[k - 1])).exp();
    MiningDistribution::finish(n, pmf, Scheme::Implicit)
}

/// `E[M_n] = n P_0 + sum_{l=1..k} n (P_l - P_{l-1}) (1 - P_{l-1})^(n-1)`.
pub fn expected_mined_implicit(params: &ProtocolParams, n: u64) -> Result<f64, AnalyticsError> {
    check_count(params, n, u64::MAX)?;
    if n == 0 {
        return Ok(0.0);
    }
    let probabilities = params.probabilities();
    let n_f = n as f64;
    let rest = (n - 1) as f64;
    Ok(n_f * probabilities[0]
        + (1..=params.k() as usize)
            .map(|l| {
                let band = probabilities[l] - probabilities[l - 1];
                n_f * band * (rest * ln_complement(probabilities[l - 1])).exp()
            })
            .sum::<f64>())
}

pub fn expected_mined(params: &ProtocolParams, n: u64, scheme: Scheme) -> Result<f64, AnalyticsError> {
    match scheme {
        Scheme::Explicit => expected_mined_explicit(params, n),
        Scheme::Implicit => expected_mined_implicit(params, n),
    }
}

pub fn distribution(params: &ProtocolParams, n: u64, scheme: Scheme) -> Result<MiningDistribution, AnalyticsError> {
    match scheme {
        Scheme::Explicit => distribution_explicit_closed(params, n),
        Scheme::Implicit => distribution_implicit(params, n),
    }
}

/// `n / N + A N^(1/k)`.
pub fn upper_bound_explicit(params: &ProtocolParams, n: u64, constants: &BoundConstants) -> f64 {
    n as f64 / params.contender_bound() as f64 + constants.a * params.nth_root_bound()
}

/// `n / N + B N^(1/k)`; holds for both schemes.
pub fn upper_bound_implicit(params: &ProtocolParams, n: u64, constants: &BoundConstants) -> f64 {
    n as f64 / params.contender_bound() as f64 + constants.b * params.nth_root_bound()
}

/// Large-deviation bound `P(M_n > m) <= (k + e^p) / (1 + p)^m`, capped at 1.
pub fn tail_bound(params: &ProtocolParams, m: u64) -> Result<f64, AnalyticsError> {
    if m == 0 {
        return Err(AnalyticsError::NonPositiveThreshold);
    }
    let p = params.p();
    let ln_bound = (f64::from(params.k()) + p.exp()).ln() - m as f64 * p.ln_1p();
    Ok(ln_bound.exp().min(1.0))
}

/// Mean size `q / (p ln(1/p))` of the last non-empty survivor set in a
/// coin-tossing leader election, up to small periodic fluctuations.
pub fn survivor_set_mean(p: f64) -> Result<f64, AnalyticsError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(AnalyticsError::ProbabilityOutOfRange(p));
    }
    Ok((1.0 - p) / (p * (1.0 / p).ln()))
}
