//! Python module `greencoin_py`: staircase parameters, exact analytics,
//! Monte Carlo oracles, the nursing contest and a validating chain.
//!
//! Schemes and variants are passed as strings (`"explicit"`, `"implicit"`,
//! `"time-moderated"`). Errors surface as `ValueError`.

use std::collections::BTreeMap;
use std::sync::Arc;

use greencoin::analytics::{self, Scheme, DEFAULT_TRUNCATION};
use greencoin::chain::text::{format_blocks, parse_block};
use greencoin::chain::{Block, ChainState, Variant, Word256};
use greencoin::nursing;
use greencoin::simulator::{self, NetworkConfig, SimConfig};
use num_bigint::BigUint;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_scheme(name: &str) -> PyResult<Scheme> {
    match name {
        "explicit" => Ok(Scheme::Explicit),
        "implicit" => Ok(Scheme::Implicit),
        other => Err(value_error(format!("unknown scheme `{other}`"))),
    }
}

fn parse_variant(name: &str) -> PyResult<Variant> {
    match name {
        "explicit" => Ok(Variant::Explicit),
        "time-moderated" => Ok(Variant::TimeModerated),
        "implicit" => Ok(Variant::Implicit),
        other => Err(value_error(format!("unknown variant `{other}`"))),
    }
}

/// Staircase `P_l = N^(l/k - 1)` with integer call values for `H`-bit hashes.
#[pyclass(name = "ProtocolParams", frozen, skip_from_py_object, module = "greencoin_py")]
#[derive(Clone)]
struct PyParams {
    inner: Arc<greencoin::ProtocolParams>,
}

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (k, contender_bound, hash_bits = 256))]
    fn new(k: u32, contender_bound: u64, hash_bits: u32) -> PyResult<Self> {
        let inner = greencoin::ProtocolParams::new(k, contender_bound, hash_bits).map_err(value_error)?;
        Ok(Self { inner: Arc::new(inner) })
    }

    #[getter]
    fn k(&self) -> u32 {
        self.inner.k()
    }

    #[getter]
    fn contender_bound(&self) -> u64 {
        self.inner.contender_bound()
    }

    #[getter]
    fn hash_bits(&self) -> u32 {
        self.inner.hash_bits()
    }

    /// Ratio between consecutive staircase levels.
    #[getter]
    fn p(&self) -> f64 {
        self.inner.p()
    }

    fn probabilities(&self) -> Vec<f64> {
        self.inner.probabilities().to_vec()
    }

    fn call_values(&self) -> Vec<BigUint> {
        self.inner.call_schedule().values().to_vec()
    }

    fn __repr__(&self) -> String {
        format!(
            "ProtocolParams(k={}, contender_bound={}, hash_bits={})",
            self.inner.k(),
            self.inner.contender_bound(),
            self.inner.hash_bits()
        )
    }
}

#[pyfunction]
#[pyo3(signature = (params, n, scheme = "explicit"))]
fn expected_mined(params: &PyParams, n: u64, scheme: &str) -> PyResult<f64> {
    analytics::expected_mined(&params.inner, n, parse_scheme(scheme)?).map_err(value_error)
}

/// Probability mass of the number of blocks mined, indexed from zero.
#[pyfunction]
#[pyo3(signature = (params, n, scheme = "explicit"))]
fn distribution(params: &PyParams, n: u64, scheme: &str) -> PyResult<Vec<f64>> {
    let dist = analytics::distribution(&params.inner, n, parse_scheme(scheme)?).map_err(value_error)?;
    Ok(dist.pmf().to_vec())
}

#[pyfunction]
#[pyo3(signature = (params, n, scheme = "explicit"))]
fn upper_bound(params: &PyParams, n: u64, scheme: &str) -> PyResult<f64> {
    let constants = analytics::bound_constants(&params.inner, DEFAULT_TRUNCATION).map_err(value_error)?;
    Ok(match parse_scheme(scheme)? {
        Scheme::Explicit => analytics::upper_bound_explicit(&params.inner, n, &constants),
        Scheme::Implicit => analytics::upper_bound_implicit(&params.inner, n, &constants),
    })
}

#[pyfunction]
fn tail_bound(params: &PyParams, m: u64) -> PyResult<f64> {
    analytics::tail_bound(&params.inner, m).map_err(value_error)
}

/// Monte Carlo contest. Returns `mean`, `std_error`, `trials` and the
/// histogram `counts` keyed by blocks mined.
#[pyfunction]
#[pyo3(signature = (params, n, trials, seed = 0, scheme = "explicit", by_level = false))]
fn simulate(
    py: Python<'_>,
    params: &PyParams,
    n: u64,
    trials: u64,
    seed: u64,
    scheme: &str,
    by_level: bool,
) -> PyResult<BTreeMap<String, Py<PyAny>>> {
    let config =
        SimConfig { params: (*params.inner).clone(), n, trials, master_seed: seed, scheme: parse_scheme(scheme)? };
    let dist = py
        .detach(|| {
            if by_level {
                simulator::simulate_contention_by_level(&config)
            } else {
                simulator::simulate_contention(&config)
            }
        })
        .map_err(value_error)?;
    let mut out = BTreeMap::new();
    out.insert("mean".into(), dist.mean().into_pyobject(py)?.into_any().unbind());
    out.insert("std_error".into(), dist.std_error().into_pyobject(py)?.into_any().unbind());
    out.insert("trials".into(), dist.trials().into_pyobject(py)?.into_any().unbind());
    out.insert("counts".into(), dist.counts().clone().into_pyobject(py)?.into_any().unbind());
    Ok(out)
}

/// Probability that the `m`-candidate party loses the contest against `n`.
#[pyfunction]
#[pyo3(signature = (params, m, n, scheme = "explicit"))]
fn loss_probability(params: &PyParams, m: u64, n: u64, scheme: &str) -> PyResult<f64> {
    nursing::loss_probability_exact_with(&params.inner, m, n, parse_scheme(scheme)?).map_err(value_error)
}

/// Monte Carlo loss probability as `(estimate, std_error)`.
#[pyfunction]
#[pyo3(signature = (params, m, n, trials, seed = 0, scheme = "explicit"))]
fn loss_probability_simulated(
    py: Python<'_>,
    params: &PyParams,
    m: u64,
    n: u64,
    trials: u64,
    seed: u64,
    scheme: &str,
) -> PyResult<(f64, f64)> {
    let scheme = parse_scheme(scheme)?;
    let outcome = py
        .detach(|| nursing::loss_probability_simulated_with(&params.inner, m, n, trials, seed, scheme))
        .map_err(value_error)?;
    Ok((outcome.loss_probability, outcome.std_error))
}

#[pyfunction]
fn loss_asymptote(p: f64, x: f64) -> PyResult<f64> {
    nursing::loss_asymptote(p, x).map_err(value_error)
}

#[pyfunction]
fn amplification_factor(p: f64) -> PyResult<f64> {
    nursing::amplification_factor(p).map_err(value_error)
}

/// Coin-tossing leader election as `(mean_survivors, mean_rounds)`.
#[pyfunction]
#[pyo3(signature = (p, n, trials, seed = 0))]
fn leader_election(py: Python<'_>, p: f64, n: u64, trials: u64, seed: u64) -> PyResult<(f64, f64)> {
    let stats = py.detach(|| simulator::simulate_leader_election(p, n, trials, seed)).map_err(value_error)?;
    Ok((stats.mean_survivors, stats.mean_rounds))
}

/// Discrete-event network run. Times are in seconds.
#[pyfunction]
#[pyo3(signature = (
    params, variant = "implicit", nodes = 10, rate = 0.1, mgt = 60.0, drift = 0.0,
    latency = 0.0, duration = 3600.0, seed = 0, gated = true, empty_miners = 1
))]
#[allow(clippy::too_many_arguments)]
fn simulate_network(
    py: Python<'_>,
    params: &PyParams,
    variant: &str,
    nodes: usize,
    rate: f64,
    mgt: f64,
    drift: f64,
    latency: f64,
    duration: f64,
    seed: u64,
    gated: bool,
    empty_miners: usize,
) -> PyResult<BTreeMap<String, f64>> {
    let config = NetworkConfig {
        node_count: nodes,
        candidate_rate: rate,
        mgt,
        clock_drift_bound: drift,
        latency_bound: latency,
        duration,
        seed,
        slot_gating: gated,
        empty_miners,
        ..NetworkConfig::new(Arc::clone(&params.inner), parse_variant(variant)?)
    };
    let report = py.detach(|| simulator::simulate_network(&config)).map_err(value_error)?;
    Ok(BTreeMap::from([
        ("blocks_accepted".into(), report.blocks_accepted as f64),
        ("forks_observed".into(), report.forks_observed as f64),
        ("fork_rate_per_hour".into(), report.fork_rate()),
        ("forks_per_block".into(), report.forks_per_block()),
        ("max_inter_block_slots".into(), f64::from(report.max_inter_block_slots)),
        ("liveness_violations".into(), report.liveness_violations as f64),
        ("distinct_final_heads".into(), report.distinct_final_heads as f64),
        ("reorganisations".into(), report.reorganisations as f64),
    ]))
}

/// Validating chain. Blocks travel as text lines
/// `<R|E> <date> <prev_hash> <payload_digest> <call_value>`.
#[pyclass(name = "Chain", module = "greencoin_py")]
struct PyChain {
    inner: ChainState,
}

#[pymethods]
impl PyChain {
    #[new]
    #[pyo3(signature = (params, variant = "explicit", mgt = 60))]
    fn new(params: &PyParams, variant: &str, mgt: u64) -> PyResult<Self> {
        let inner = ChainState::new(Arc::clone(&params.inner), parse_variant(variant)?, mgt).map_err(value_error)?;
        Ok(Self { inner })
    }

    /// Builds a chain with `regular_blocks` regular blocks, filling in empty
    /// blocks or waiting slots as the variant requires.
    #[staticmethod]
    #[pyo3(signature = (params, variant, regular_blocks, seed = 0, mgt = 60))]
    fn episode(params: &PyParams, variant: &str, regular_blocks: u32, seed: u64, mgt: u64) -> PyResult<Self> {
        let report =
            simulator::run_chain_episode(Arc::clone(&params.inner), parse_variant(variant)?, mgt, regular_blocks, seed)
                .map_err(value_error)?;
        Ok(Self { inner: report.chain })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn head_hash(&self) -> String {
        self.inner.head().hash.to_hex()
    }

    fn regular_call_value(&self) -> BigUint {
        self.inner.regular_call_value().to_biguint()
    }

    fn next_empty_call_value(&self) -> BigUint {
        self.inner.next_empty_call_value().to_biguint()
    }

    /// Empty block extending the head at `date`, as a text line.
    fn empty_block(&self, date: u64) -> String {
        let block = Block::empty(self.inner.head().hash, date, self.inner.next_empty_call_value());
        format_blocks([&block]).trim_end().to_string()
    }

    /// Regular block extending the head, with a payload digest given in hex.
    #[pyo3(signature = (date, payload_digest_hex, call_value = None))]
    fn regular_block(&self, date: u64, payload_digest_hex: &str, call_value: Option<BigUint>) -> PyResult<String> {
        let digest = Word256::from_hex(payload_digest_hex).map_err(value_error)?;
        let call = match call_value {
            Some(v) => Word256::from_biguint(&v).map_err(value_error)?,
            None => self.inner.regular_call_value(),
        };
        let block = Block::regular_with_digest(self.inner.head().hash, date, digest, call);
        Ok(format_blocks([&block]).trim_end().to_string())
    }

    /// Verdict name such as `"Ok"` or `"HashAboveCall"`.
    fn validate(&self, line: &str, now: u64) -> PyResult<String> {
        let block = parse_block(line).map_err(value_error)?;
        let verdict = self.inner.validate(&block, now).map_err(value_error)?;
        Ok(format!("{:?}", verdict.reason()))
    }

    /// Appends a valid block and returns its hash.
    fn append(&mut self, line: &str, now: u64) -> PyResult<String> {
        let block = parse_block(line).map_err(value_error)?;
        Ok(self.inner.append(block, now).map_err(value_error)?.to_hex())
    }

    fn to_text(&self) -> String {
        format_blocks(self.inner.entries().iter().map(|e| &e.block))
    }
}

#[pyfunction]
fn block_hash(line: &str) -> PyResult<String> {
    Ok(parse_block(line).map_err(value_error)?.hash().to_hex())
}

#[pymodule]
fn greencoin_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParams>()?;
    m.add_class::<PyChain>()?;
    m.add_function(wrap_pyfunction!(expected_mined, m)?)?;
    m.add_function(wrap_pyfunction!(distribution, m)?)?;
    m.add_function(wrap_pyfunction!(upper_bound, m)?)?;
    m.add_function(wrap_pyfunction!(tail_bound, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(loss_probability, m)?)?;
    m.add_function(wrap_pyfunction!(loss_probability_simulated, m)?)?;
    m.add_function(wrap_pyfunction!(loss_asymptote, m)?)?;
    m.add_function(wrap_pyfunction!(amplification_factor, m)?)?;
    m.add_function(wrap_pyfunction!(leader_election, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_network, m)?)?;
    m.add_function(wrap_pyfunction!(block_hash, m)?)?;
    Ok(())
}
