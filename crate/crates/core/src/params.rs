//! Protocol constants and the probability / call-value staircase.
//!
//! Every other module derives its thresholds from a [`ProtocolParams`]:
//! the staircase `P_0 < P_1 < ... < P_k = 1` with `P_l = N^(l/k - 1)` and the
//! matching integer call values `C_l = floor(2^H * P_l) - 1`. A hash is
//! admitted by call value `C` iff `hash <= C`, so the acceptance probability
//! of `C_l` is `(C_l + 1) / 2^H`.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::ParamsError;

/// Default hash width in bits.
pub const DEFAULT_HASH_BITS: u32 = 256;

const ROUNDING_TOLERANCE: f64 = 1e-12;

/// Integer call values `C_0..C_k`, exact for any hash width.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallSchedule {
    values: Vec<BigUint>,
}

impl CallSchedule {
    pub fn values(&self) -> &[BigUint] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, level: usize) -> Option<&BigUint> {
        self.values.get(level)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolParams {
    k: u32,
    contender_bound: u64,
    hash_bits: u32,
    p: f64,
    staircase: Vec<f64>,
    calls: CallSchedule,
}

impl ProtocolParams {
    /// Builds the staircase for `k` steps, contender bound `N` and an
    /// `H`-bit hash.
    pub fn new(k: u32, contender_bound: u64, hash_bits: u32) -> Result<Self, ParamsError> {
        if k == 0 {
            return Err(ParamsError::ZeroSteps);
        }
        if contender_bound < 2 {
            return Err(ParamsError::ContenderBoundTooSmall(contender_bound));
        }
        if hash_bits < 8 {
            return Err(ParamsError::HashTooNarrow { bits: hash_bits, needed: 8 });
        }

        let log2_n = log2_exact(contender_bound);
        let staircase: Vec<f64> =
            (0..=k).map(|level| (-(log2_n * f64::from(k - level)) / f64::from(k)).exp2()).collect();
        let p = staircase[k as usize - 1];

        let inv_n = 1.0 / contender_bound as f64;
        let rel = (p.powi(k as i32) - inv_n).abs() / inv_n;
        // Also rejects NaN.
        if rel.is_nan() || rel > ROUNDING_TOLERANCE {
            return Err(ParamsError::InexactRoot { k, n: contender_bound, rel_error: rel });
        }
        if staircase.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ParamsError::NonMonotoneStaircase { k, n: contender_bound });
        }

        let calls = call_schedule(k, contender_bound, hash_bits)?;
        Ok(Self { k, contender_bound, hash_bits, p, staircase, calls })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    /// Contender bound `N`.
    pub fn contender_bound(&self) -> u64 {
        self.contender_bound
    }

    pub fn hash_bits(&self) -> u32 {
        self.hash_bits
    }

    /// Staircase ratio `p = N^(-1/k)`.
    pub fn p(&self) -> f64 {
        self.p
    }

    /// `P_0..P_k`.
    pub fn probabilities(&self) -> &[f64] {
        &self.staircase
    }

    pub fn probability_at(&self, level: u32) -> Result<f64, ParamsError> {
        self.check_level(level)?;
        Ok(self.staircase[level as usize])
    }

    pub fn call_schedule(&self) -> &CallSchedule {
        &self.calls
    }

    pub fn call_value_at(&self, level: u32) -> Result<&BigUint, ParamsError> {
        self.check_level(level)?;
        Ok(&self.calls.values[level as usize])
    }

    /// Call value of every regular block, `C_0`.
    pub fn regular_call_value(&self) -> &BigUint {
        &self.calls.values[0]
    }

    /// Largest representable hash value, `2^H - 1` (equal to `C_k`).
    pub fn max_hash_value(&self) -> &BigUint {
        &self.calls.values[self.k as usize]
    }

    /// Acceptance probability `(C_l + 1) / 2^H` reconstructed from the
    /// integer call value.
    pub fn acceptance_probability(&self, level: u32) -> Result<f64, ParamsError> {
        let call = self.call_value_at(level)?;
        Ok(ratio_to_pow2(&(call + 1u32), self.hash_bits))
    }

    /// `N^(1/k) = 1/p`.
    pub fn nth_root_bound(&self) -> f64 {
        1.0 / self.p
    }

    fn check_level(&self, level: u32) -> Result<(), ParamsError> {
        if level > self.k {
            Err(ParamsError::LevelOutOfRange { level, k: self.k })
        } else {
            Ok(())
        }
    }
}

impl fmt::Display for ProtocolParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "k={} N={} H={}", self.k, self.contender_bound, self.hash_bits)
    }
}

/// Parses the flat `k=8 N=4294967296 H=256` form. `H` may be omitted.
impl FromStr for ProtocolParams {
    type Err = ParamsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (mut k, mut n, mut h) = (None, None, None);
        for token in s.split_whitespace() {
            let (key, value) = token
                .split_once('=')
                .ok_or_else(|| ParamsError::Config(format!("expected key=value, got `{token}`")))?;
            let value = parse_count(value)?;
            match key {
                "k" => k = Some(value),
                "N" => n = Some(value),
                "H" => h = Some(value),
                other => return Err(ParamsError::Config(format!("unknown key `{other}`"))),
            }
        }
        let k = k.ok_or_else(|| ParamsError::Config("missing k".into()))?;
        let n = n.ok_or_else(|| ParamsError::Config("missing N".into()))?;
        let h = h.unwrap_or(u64::from(DEFAULT_HASH_BITS));
        let k = u32::try_from(k).map_err(|_| ParamsError::Config(format!("k too large: {k}")))?;
        let h = u32::try_from(h).map_err(|_| ParamsError::Config(format!("H too large: {h}")))?;
        Self::new(k, n, h)
    }
}

/// Parses a non-negative integer written either in decimal or as `b^e`.
pub fn parse_count(text: &str) -> Result<u64, ParamsError> {
    let bad = || ParamsError::Config(format!("not an integer: `{text}`"));
    let text = text.trim();
    match text.split_once('^') {
        Some((base, exp)) => {
            let base: u64 = base.trim().parse().map_err(|_| bad())?;
            let exp: u32 = exp.trim().parse().map_err(|_| bad())?;
            base.checked_pow(exp).ok_or_else(|| ParamsError::Config(format!("overflow: `{text}`")))
        }
        None => text.parse().map_err(|_| bad()),
    }
}

fn log2_exact(n: u64) -> f64 {
    if n.is_power_of_two() {
        f64::from(n.trailing_zeros())
    } else {
        (n as f64).log2()
    }
}

/// `C_l = floor(2^H * N^(l/k) / N) - 1`, via an exact integer k-th root
/// `floor((2^(H k) N^l)^(1/k))`; shifts when `N^(l/k)` is a power of two.
fn call_schedule(k: u32, n: u64, hash_bits: u32) -> Result<CallSchedule, ParamsError> {
    let n_big = BigUint::from(n);
    let log2_n = n.is_power_of_two().then(|| n.trailing_zeros());
    let mut values = Vec::with_capacity(k as usize + 1);
    for level in 0..=k {
        let scaled = match log2_n {
            Some(e) if (u64::from(e) * u64::from(level)) % u64::from(k) == 0 => {
                let up = (u64::from(e) * u64::from(level) / u64::from(k)) as u32;
                let total = u64::from(hash_bits) + u64::from(up);
                if total < u64::from(e) {
                    BigUint::zero()
                } else {
                    BigUint::one() << (total - u64::from(e))
                }
            }
            _ => {
                let radicand = (BigUint::one() << (u64::from(hash_bits) * u64::from(k))) * n_big.pow(level);
                radicand.nth_root(k) / &n_big
            }
        };
        if scaled.is_zero() {
            let needed = (n as f64).log2().ceil() as u32;
            return Err(ParamsError::HashTooNarrow { bits: hash_bits, needed });
        }
        values.push(scaled - 1u32);
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ParamsError::NonMonotoneStaircase { k, n });
    }
    Ok(CallSchedule { values })
}

/// `value / 2^bits` as a float, exact to double precision for any width.
pub(crate) fn ratio_to_pow2(value: &BigUint, bits: u32) -> f64 {
    let len = value.bits();
    if len <= 64 {
        value.to_f64().unwrap_or(f64::INFINITY) * (-(f64::from(bits))).exp2()
    } else {
        let shift = len - 64;
        let top = (value >> shift).to_f64().unwrap_or(f64::INFINITY);
        top * (shift as f64 - f64::from(bits)).exp2()
    }
}
