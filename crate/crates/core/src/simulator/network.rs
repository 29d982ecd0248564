//! Discrete-event run of several block servers exercising the
//! time-moderated or implicit validators.
//!
//! Each node keeps its own [`ChainState`], a constant clock offset, and at
//! most one pending candidate. Candidates are built when transactions arrive
//! or the node's head moves, and are broadcast once the node's own validator
//! would admit them. Messages reach other nodes after a random latency; the
//! sender delivers to itself immediately.
//!
//! Every broadcast block is recorded in a shared registry with its height,
//! the number of regular blocks from genesis. A block that does not extend a
//! node's head is adopted together with its ancestry when its height exceeds
//! the node's own; the adopted branch is checked only for parent links.
//!
//! Simulated time is in milliseconds, and node chains use the same unit for
//! dates and the minimal gap time.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::chain::{Block, ChainState, Hash256, TransactionId, Variant, VerdictReason, Word256};
use crate::error::{ChainError, SimError};
use crate::params::ProtocolParams;

const MS: f64 = 1000.0;

#[derive(Clone, Debug)]
pub struct NetworkConfig {
    pub params: Arc<ProtocolParams>,
    /// `Implicit` or `TimeModerated`.
    pub variant: Variant,
    pub node_count: usize,
    /// Transaction batches per node per second.
    pub candidate_rate: f64,
    /// Minimal gap time, seconds.
    pub mgt: f64,
    /// Clock offsets are drawn uniformly from `[0, clock_drift_bound]` seconds.
    pub clock_drift_bound: f64,
    /// One-way message delay drawn uniformly from `[0, latency_bound]` seconds.
    pub latency_bound: f64,
    /// Simulated seconds.
    pub duration: f64,
    pub seed: u64,
    /// When false (implicit only), candidates are broadcast as soon as they
    /// exist and servers check only the parent link.
    pub slot_gating: bool,
    /// Nodes `0..empty_miners` produce empty blocks (time-moderated only).
    pub empty_miners: usize,
}

impl NetworkConfig {
    pub fn new(params: Arc<ProtocolParams>, variant: Variant) -> Self {
        Self {
            params,
            variant,
            node_count: 10,
            candidate_rate: 0.1,
            mgt: 60.0,
            clock_drift_bound: 0.0,
            latency_bound: 0.0,
            duration: 3600.0,
            seed: 0,
            slot_gating: true,
            empty_miners: 1,
        }
    }

    fn check(&self) -> Result<(), SimError> {
        let bad = |msg: &str| Err(SimError::Config(msg.to_string()));
        if self.node_count == 0 {
            return bad("node_count must be at least 1");
        }
        if !(self.candidate_rate > 0.0 && self.candidate_rate.is_finite()) {
            return bad("candidate_rate must be positive");
        }
        if self.mgt.is_nan() || self.mgt * MS < 1.0 {
            return bad("mgt must be at least one millisecond");
        }
        if !(self.clock_drift_bound >= 0.0 && self.latency_bound >= 0.0 && self.duration >= 0.0) {
            return bad("drift, latency and duration must be non-negative");
        }
        match self.variant {
            Variant::Implicit => Ok(()),
            Variant::TimeModerated if !self.slot_gating => bad("ungated control runs use the implicit variant"),
            Variant::TimeModerated if self.empty_miners == 0 || self.empty_miners > self.node_count => {
                bad("time-moderated runs need 1..=node_count empty miners")
            }
            Variant::TimeModerated => Ok(()),
            Variant::Explicit => bad("network runs use the time-moderated or implicit variant"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct NetworkSimReport {
    /// Distinct regular blocks accepted by at least one node.
    pub blocks_accepted: u64,
    /// Extra children per parent among accepted blocks, summed.
    pub forks_observed: u64,
    /// Most gated slots (implicit) or empty blocks (time-moderated) that
    /// preceded an accepted regular block.
    pub max_inter_block_slots: u32,
    /// Candidates refused although the call value had reached `2^H - 1`.
    pub liveness_violations: u64,
    /// Regular blocks on each node's chain at the end of the run.
    pub per_node_accepted: Vec<u64>,
    pub distinct_final_heads: usize,
    pub dropped_messages: u64,
    /// Times a node switched to a heavier branch.
    pub reorganisations: u64,
    pub duration_ms: u64,
}

impl NetworkSimReport {
    /// Forks per simulated hour.
    pub fn fork_rate(&self) -> f64 {
        if self.duration_ms == 0 {
            0.0
        } else {
            self.forks_observed as f64 * 3_600_000.0 / self.duration_ms as f64
        }
    }

    /// Forks per accepted regular block.
    pub fn forks_per_block(&self) -> f64 {
        if self.blocks_accepted == 0 {
            0.0
        } else {
            self.forks_observed as f64 / self.blocks_accepted as f64
        }
    }
}

/// Flat `key=value` lines.
impl fmt::Display for NetworkSimReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let per_node: Vec<String> = self.per_node_accepted.iter().map(u64::to_string).collect();
        writeln!(f, "blocks_accepted={}", self.blocks_accepted)?;
        writeln!(f, "forks_observed={}", self.forks_observed)?;
        writeln!(f, "max_inter_block_slots={}", self.max_inter_block_slots)?;
        writeln!(f, "liveness_violations={}", self.liveness_violations)?;
        writeln!(f, "per_node_accepted={}", per_node.join(","))?;
        writeln!(f, "distinct_final_heads={}", self.distinct_final_heads)?;
        writeln!(f, "dropped_messages={}", self.dropped_messages)?;
        writeln!(f, "reorganisations={}", self.reorganisations)?;
        writeln!(f, "duration_ms={}", self.duration_ms)
    }
}

#[derive(Debug)]
enum EventKind {
    Transactions,
    Attempt { head: Hash256 },
    Deliver { block: Block, author: usize },
    EmptyTick { head: Hash256 },
}

#[derive(Debug)]
struct Event {
    time: u64,
    node: usize,
    seq: u64,
    kind: EventKind,
}

impl Event {
    fn key(&self) -> (u64, usize, u64) {
        (self.time, self.node, self.seq)
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Reversed so the max-heap pops the earliest `(time, node, seq)`.
impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        other.key().cmp(&self.key())
    }
}

struct Node {
    chain: ChainState,
    /// Chain position of every block on `chain`.
    positions: HashMap<Hash256, usize>,
    height: u64,
    offset: u64,
    pending: bool,
    candidate: Option<Block>,
}

struct Sim<'a> {
    config: &'a NetworkConfig,
    rng: ChaCha8Rng,
    queue: BinaryHeap<Event>,
    seq: u64,
    end: u64,
    mgt: u64,
    nodes: Vec<Node>,
    children: BTreeMap<Hash256, BTreeSet<Hash256>>,
    registry: HashMap<Hash256, (Block, u64)>,
    regular_accepted: BTreeSet<Hash256>,
    report: NetworkSimReport,
}

impl<'a> Sim<'a> {
    fn new(config: &'a NetworkConfig) -> Result<Self, SimError> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mgt = (config.mgt * MS).round() as u64;
        let drift = (config.clock_drift_bound * MS).round() as u64;
        let nodes = (0..config.node_count)
            .map(|_| {
                let offset = if drift == 0 { 0 } else { rng.random_range(0..=drift) };
                let chain = ChainState::with_genesis_time(Arc::clone(&config.params), config.variant, mgt, offset)
                    .map_err(|e| SimError::Config(e.to_string()))?;
                let positions = HashMap::from([(chain.head().hash, 0)]);
                Ok(Node { chain, positions, height: 0, offset, pending: false, candidate: None })
            })
            .collect::<Result<Vec<_>, SimError>>()?;
        let genesis = nodes[0].chain.head().clone();
        Ok(Self {
            config,
            rng,
            queue: BinaryHeap::new(),
            seq: 0,
            end: (config.duration * MS).round() as u64,
            mgt,
            nodes,
            children: BTreeMap::new(),
            registry: HashMap::from([(genesis.hash, (genesis.block, 0))]),
            regular_accepted: BTreeSet::new(),
            report: NetworkSimReport::default(),
        })
    }

    fn schedule(&mut self, time: u64, node: usize, kind: EventKind) {
        if time > self.end {
            return;
        }
        self.seq += 1;
        self.queue.push(Event { time, node, seq: self.seq, kind });
    }

    fn local(&self, node: usize, time: u64) -> u64 {
        time + self.nodes[node].offset
    }

    /// True time at which `node`'s clock reads `local`.
    fn true_time(&self, node: usize, local: u64, now: u64) -> u64 {
        local.saturating_sub(self.nodes[node].offset).max(now)
    }

    fn next_arrival(&mut self, now: u64, node: usize) {
        let exp = Exp::new(self.config.candidate_rate).expect("rate checked");
        let gap = (exp.sample(&mut self.rng) * MS).ceil() as u64;
        self.schedule(now + gap.max(1), node, EventKind::Transactions);
    }

    fn latency(&mut self) -> u64 {
        let bound = (self.config.latency_bound * MS).round() as u64;
        if bound == 0 {
            0
        } else {
            self.rng.random_range(0..=bound)
        }
    }

    fn run(mut self) -> NetworkSimReport {
        for node in 0..self.nodes.len() {
            self.next_arrival(0, node);
            self.on_head_change(node, 0);
        }
        while let Some(event) = self.queue.pop() {
            let Event { time, node, kind, .. } = event;
            match kind {
                EventKind::Transactions => {
                    self.nodes[node].pending = true;
                    if self.nodes[node].candidate.is_none() {
                        self.build_candidate(node, time);
                    }
                    self.next_arrival(time, node);
                }
                EventKind::Attempt { head } => self.attempt(node, head, time),
                EventKind::Deliver { block, author } => self.deliver(node, block, author, time),
                EventKind::EmptyTick { head } => self.empty_tick(node, head, time),
            }
        }
        self.finish()
    }

    fn build_candidate(&mut self, node: usize, now: u64) {
        let local = self.local(node, now);
        let chain = &self.nodes[node].chain;
        let prev = match self.config.variant {
            Variant::Implicit => chain.last_full().hash,
            _ => chain.head().hash,
        };
        let call = chain.regular_call_value();
        let head = chain.head().hash;
        let mut ids: Vec<TransactionId> = (0..3)
            .map(|_| {
                let mut id = [0u8; 32];
                self.rng.fill_bytes(&mut id);
                TransactionId(Word256(id))
            })
            .collect();
        ids.sort();
        self.nodes[node].candidate = Some(Block::regular(prev, local, ids, call));
        self.schedule(now, node, EventKind::Attempt { head });
    }

    fn on_head_change(&mut self, node: usize, now: u64) {
        self.nodes[node].candidate = None;
        if self.nodes[node].pending {
            self.build_candidate(node, now);
        }
        if self.config.variant == Variant::TimeModerated && node < self.config.empty_miners {
            let head = self.nodes[node].chain.head();
            let due = head.block.date + self.mgt;
            let head = head.hash;
            let at = self.true_time(node, due, now);
            self.schedule(at, node, EventKind::EmptyTick { head });
        }
    }

    fn attempt(&mut self, node: usize, head: Hash256, now: u64) {
        let state = &self.nodes[node];
        let Some(candidate) = state.candidate.as_ref() else { return };
        if state.chain.head().hash != head {
            return;
        }
        let chain = &state.chain;
        let k = chain.params().k();
        let local = self.local(node, now);
        let send = match (self.config.variant, self.config.slot_gating) {
            (Variant::Implicit, false) => true,
            (Variant::Implicit, true) => {
                let slot = chain.slot_at(local).unwrap_or(0);
                let admitted = match chain.implicit_gate_level(slot) {
                    None => false,
                    Some(level) => {
                        let gate = chain.params().call_value_at(level).expect("gate within staircase");
                        let admitted = candidate.hash().hash_value(chain.params().hash_bits()) <= *gate;
                        if !admitted && level == k {
                            self.report.liveness_violations += 1;
                        }
                        admitted
                    }
                };
                if !admitted {
                    let boundary = chain.last_full_block_time() + (slot + 1) * self.mgt;
                    let at = self.true_time(node, boundary, now + 1);
                    self.schedule(at, node, EventKind::Attempt { head });
                }
                admitted
            }
            _ => {
                let verdict = chain.validate_regular_explicit(candidate).expect("time-moderated chain");
                if !verdict.accepted() && chain.empty_count_since_full() == k {
                    self.report.liveness_violations += 1;
                }
                verdict.accepted()
            }
        };
        if send {
            let block = self.nodes[node].candidate.take().expect("candidate present");
            self.broadcast(node, block, now);
        }
    }

    fn broadcast(&mut self, author: usize, block: Block, now: u64) {
        let parent_height = self.registry.get(&block.prev_hash).map_or(0, |(_, h)| *h);
        let height = parent_height + u64::from(block.is_regular());
        self.registry.entry(block.hash()).or_insert_with(|| (block.clone(), height));
        for to in 0..self.nodes.len() {
            let delay = if to == author { 0 } else { self.latency() };
            self.schedule(now + delay, to, EventKind::Deliver { block: block.clone(), author });
        }
    }

    fn empty_tick(&mut self, node: usize, head: Hash256, now: u64) {
        let chain = &self.nodes[node].chain;
        if chain.head().hash != head {
            return;
        }
        let block = Block::empty(head, self.local(node, now), chain.next_empty_call_value());
        self.broadcast(node, block, now);
    }

    fn deliver(&mut self, node: usize, block: Block, author: usize, now: u64) {
        let hash = block.hash();
        if self.nodes[node].positions.contains_key(&hash) {
            return;
        }
        let local = self.local(node, now);
        let chain = &self.nodes[node].chain;
        let gap_before = match (self.config.variant, block.kind) {
            (Variant::Implicit, _) => chain.slot_at(local).and_then(|s| chain.implicit_gate_level(s)).unwrap_or(0),
            _ => chain.empty_count_since_full(),
        };
        let result = if self.config.slot_gating {
            self.nodes[node].chain.append(block.clone(), local)
        } else {
            self.nodes[node].chain.append_linked(block.clone(), local)
        };
        match result {
            Ok(hash) => {
                if block.is_regular() && self.config.slot_gating {
                    self.report.max_inter_block_slots = self.report.max_inter_block_slots.max(gap_before);
                }
                if block.is_regular() && author == node {
                    self.nodes[node].pending = false;
                }
                self.record_append(node, &block, hash);
                self.on_head_change(node, now);
            }
            Err(ChainError::Rejected(VerdictReason::TooEarly)) if self.config.variant == Variant::TimeModerated => {
                let due = self.nodes[node].chain.head().block.date + self.mgt;
                let at = self.true_time(node, due, now + 1);
                self.schedule(at, node, EventKind::Deliver { block, author });
            }
            Err(ChainError::Rejected(VerdictReason::BadPrevHash)) if self.heavier(node, &hash) => {
                self.reorganise(node, hash, now);
            }
            Err(_) => self.report.dropped_messages += 1,
        }
    }

    fn record_append(&mut self, node: usize, block: &Block, hash: Hash256) {
        self.children.entry(block.prev_hash).or_default().insert(hash);
        let state = &mut self.nodes[node];
        state.positions.insert(hash, state.chain.len() - 1);
        if block.is_regular() {
            self.regular_accepted.insert(hash);
            state.height += 1;
        }
    }

    fn heavier(&self, node: usize, hash: &Hash256) -> bool {
        self.registry.get(hash).is_some_and(|(_, h)| *h > self.nodes[node].height)
    }

    /// Switches `node` to the registered branch ending at `tip`.
    fn reorganise(&mut self, node: usize, tip: Hash256, now: u64) {
        let mut branch = Vec::new();
        let mut cursor = tip;
        let fork_point = loop {
            if let Some(&position) = self.nodes[node].positions.get(&cursor) {
                break position;
            }
            let Some((block, _)) = self.registry.get(&cursor) else {
                self.report.dropped_messages += 1;
                return;
            };
            branch.push(block.clone());
            cursor = block.prev_hash;
        };
        let local = self.local(node, now);
        let state = &mut self.nodes[node];
        for entry in &state.chain.entries()[fork_point + 1..] {
            state.positions.remove(&entry.hash);
            state.height -= u64::from(entry.block.is_regular());
        }
        state.chain.rewind(fork_point + 1);
        for block in branch.into_iter().rev() {
            let hash = self.nodes[node].chain.append_trusted(block.clone(), local).expect("registry branch is linked");
            self.record_append(node, &block, hash);
        }
        self.report.reorganisations += 1;
        self.on_head_change(node, now);
    }

    fn finish(mut self) -> NetworkSimReport {
        self.report.blocks_accepted = self.regular_accepted.len() as u64;
        self.report.duration_ms = self.end;
        self.report.forks_observed = self.children.values().map(|c| c.len() as u64 - 1).sum();
        self.report.per_node_accepted = self
            .nodes
            .iter()
            .map(|n| n.chain.entries().iter().filter(|e| e.block.is_regular()).count() as u64)
            .collect();
        self.report.distinct_final_heads =
            self.nodes.iter().map(|n| n.chain.head().hash).collect::<BTreeSet<_>>().len();
        self.report
    }
}

pub fn simulate_network(config: &NetworkConfig) -> Result<NetworkSimReport, SimError> {
    config.check()?;
    Ok(Sim::new(config)?.run())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(variant: Variant) -> NetworkConfig {
        let params = Arc::new(ProtocolParams::new(4, 1 << 16, 256).unwrap());
        NetworkConfig { seed: 11, duration: 4.0 * 3600.0, ..NetworkConfig::new(params, variant) }
    }

    #[test]
    fn single_node_no_forks() {
        for variant in [Variant::Implicit, Variant::TimeModerated] {
            let config = NetworkConfig { node_count: 1, ..base(variant) };
            let report = simulate_network(&config).unwrap();
            assert!(report.blocks_accepted > 10, "{variant:?}: {report}");
            assert_eq!(report.forks_observed, 0);
            assert_eq!(report.liveness_violations, 0);
            assert!(report.max_inter_block_slots <= 4);
        }
    }

    #[test]
    fn synchronous_nodes_agree() {
        for variant in [Variant::Implicit, Variant::TimeModerated] {
            let config = NetworkConfig { node_count: 10, empty_miners: 3, ..base(variant) };
            let report = simulate_network(&config).unwrap();
            assert_eq!(report.distinct_final_heads, 1, "{variant:?}: {report}");
            assert_eq!(report.forks_observed, 0);
            assert!(report.per_node_accepted.windows(2).all(|w| w[0] == w[1]));
            assert_eq!(report.liveness_violations, 0);
        }
    }

    #[test]
    fn deterministic_report() {
        let config = NetworkConfig { latency_bound: 2.0, clock_drift_bound: 6.0, ..base(Variant::Implicit) };
        assert_eq!(simulate_network(&config).unwrap(), simulate_network(&config).unwrap());
    }

    #[test]
    fn latency_forks_resolve_by_adoption() {
        let config = NetworkConfig { latency_bound: 2.0, clock_drift_bound: 6.0, ..base(Variant::Implicit) };
        let report = simulate_network(&config).unwrap();
        assert!(report.forks_observed > 0, "{report}");
        assert!(report.reorganisations > 0);
        assert_eq!(report.liveness_violations, 0);
        let (lo, hi) = (report.per_node_accepted.iter().min().unwrap(), report.per_node_accepted.iter().max().unwrap());
        assert!(hi - lo <= 2, "{report}");
    }

    #[test]
    fn slot_gating_forks_less_often_than_control() {
        for seed in 0..3 {
            let gated = NetworkConfig { seed, latency_bound: 2.0, clock_drift_bound: 6.0, ..base(Variant::Implicit) };
            let control = NetworkConfig { slot_gating: false, ..gated.clone() };
            let (g, c) = (simulate_network(&gated).unwrap(), simulate_network(&control).unwrap());
            assert!(g.fork_rate() <= c.fork_rate(), "seed {seed}: {} vs {}", g.fork_rate(), c.fork_rate());
        }
    }

    #[test]
    fn rejects_bad_config() {
        let params = Arc::new(ProtocolParams::new(4, 1 << 16, 256).unwrap());
        assert!(simulate_network(&NetworkConfig { node_count: 0, ..base(Variant::Implicit) }).is_err());
        assert!(simulate_network(&NetworkConfig::new(Arc::clone(&params), Variant::Explicit)).is_err());
        let ungated_tm = NetworkConfig { slot_gating: false, ..base(Variant::TimeModerated) };
        assert!(simulate_network(&ungated_tm).is_err());
    }

    #[test]
    fn report_format() {
        let report = NetworkSimReport { per_node_accepted: vec![1, 2], ..Default::default() };
        let text = report.to_string();
        assert!(text.contains("per_node_accepted=1,2\n"));
        assert!(text.lines().all(|l| l.contains('=')));
    }
}
