//! Constants `A` and `B` bounding the periodic function
//! `f(e^t) = sum_l g(p^l e^t)`, `g(x) = x e^-x`.
//!
//! The Fourier coefficients of `f(e^t)` are
//! `g_j = Gamma(1 + 2 i j pi / ln p) / ln(1/p)`, so `sup f <= sum_j |g_j|`.
//! `|Gamma(1 + i y)|^2 = pi y / sinh(pi y)` gives the moduli in closed form.

use std::f64::consts::PI;

use crate::error::AnalyticsError;
use crate::params::ProtocolParams;

pub const DEFAULT_TRUNCATION: u32 = 10;

/// Extra terms summed past the cutoff to estimate truncation error.
const ERROR_PROBE_TERMS: u32 = 64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundConstants {
    /// Explicit-scheme constant.
    pub a: f64,
    /// Implicit-scheme constant, `A / p`.
    pub b: f64,
    pub truncation_j: u32,
    /// Mass of the omitted terms `|j| > truncation_j` in `A`.
    pub truncation_error: f64,
}

/// `|Gamma(1 + i y)|`.
fn gamma_modulus_on_line(y: f64) -> f64 {
    let x = PI * y.abs();
    if x == 0.0 {
        return 1.0;
    }
    // ln sinh(x) = x + ln(1 - e^-2x) - ln 2, finite for large x
    let ln_sinh = x + (-(-2.0 * x).exp()).ln_1p() - std::f64::consts::LN_2;
    (0.5 * (x.ln() - ln_sinh)).exp()
}

/// `|Gamma(1 + 2 i j pi / ln p)|` for `j = 0..=max_j`.
pub fn fourier_terms(p: f64, max_j: u32) -> Result<Vec<f64>, AnalyticsError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(AnalyticsError::ProbabilityOutOfRange(p));
    }
    let period = (1.0 / p).ln();
    Ok((0..=max_j).map(|j| gamma_modulus_on_line(2.0 * PI * f64::from(j) / period)).collect())
}

fn constant_a_with_error(p: f64, truncation_j: u32) -> Result<(f64, f64), AnalyticsError> {
    if truncation_j == 0 {
        return Err(AnalyticsError::ZeroTruncation);
    }
    let terms = fourier_terms(p, truncation_j + ERROR_PROBE_TERMS)?;
    let period = (1.0 / p).ln();
    let kept = terms[0] + 2.0 * terms[1..=truncation_j as usize].iter().sum::<f64>();
    let omitted = 2.0 * terms[truncation_j as usize + 1..].iter().sum::<f64>();
    Ok((kept / period, omitted / period))
}

/// `A = (1 / ln(1/p)) sum_{|j| <= J} |Gamma(1 + 2 i j pi / ln p)|`.
pub fn fourier_constant_a(params: &ProtocolParams, truncation_j: u32) -> Result<f64, AnalyticsError> {
    constant_a_with_error(params.p(), truncation_j).map(|(a, _)| a)
}

/// `B = A / p`.
pub fn fourier_constant_b(params: &ProtocolParams, truncation_j: u32) -> Result<f64, AnalyticsError> {
    Ok(fourier_constant_a(params, truncation_j)? / params.p())
}

pub fn bound_constants(params: &ProtocolParams, truncation_j: u32) -> Result<BoundConstants, AnalyticsError> {
    let (a, truncation_error) = constant_a_with_error(params.p(), truncation_j)?;
    Ok(BoundConstants { a, b: a / params.p(), truncation_j, truncation_error })
}
