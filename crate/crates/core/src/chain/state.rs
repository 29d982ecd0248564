//! Chain state and the validation rules of the three protocol variants.

use std::sync::Arc;

use num_bigint::BigUint;

use super::block::{Block, BlockKind, Hash256, Word256};
use crate::error::ChainError;
use crate::params::ProtocolParams;

/// Default minimal gap time, seconds.
pub const DEFAULT_MGT: u64 = 60;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub enum Variant {
    /// Empty blocks mined by a central server, no timing rules.
    Explicit,
    /// Empty blocks mined by any peer, spaced by at least one MGT.
    TimeModerated,
    /// No empty blocks; the call value is implied by elapsed MGT slots.
    Implicit,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Explicit => "explicit",
            Variant::TimeModerated => "time-moderated",
            Variant::Implicit => "implicit",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub enum VerdictReason {
    Ok,
    HashAboveCall,
    /// Arrived before its slot opened. In time-moderated mode the block is
    /// held back and may be retried; in implicit mode it is dropped.
    TooEarly,
    BadSlotThreshold,
    BadPrevHash,
    UnorderedTransactions,
    BadCallField,
    StaleDate,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct ValidationVerdict {
    reason: VerdictReason,
}

impl ValidationVerdict {
    pub const ACCEPT: Self = Self { reason: VerdictReason::Ok };

    pub fn reject(reason: VerdictReason) -> Self {
        debug_assert!(reason != VerdictReason::Ok);
        Self { reason }
    }

    pub fn accepted(&self) -> bool {
        self.reason == VerdictReason::Ok
    }

    pub fn reason(&self) -> VerdictReason {
        self.reason
    }
}

/// One accepted block with the server-side reception time stamp.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainEntry {
    pub block: Block,
    pub hash: Hash256,
    pub received_at: u64,
}

/// Append-only validated chain. Cloning yields an immutable snapshot.
#[derive(Clone, Debug)]
pub struct ChainState {
    params: Arc<ProtocolParams>,
    variant: Variant,
    mgt: u64,
    entries: Vec<ChainEntry>,
    last_full_index: usize,
    empty_count_since_full: u32,
}

impl ChainState {
    /// Starts a chain at the genesis block (empty, zero parent, `C_0`, date 0).
    pub fn new(params: Arc<ProtocolParams>, variant: Variant, mgt: u64) -> Result<Self, ChainError> {
        if params.hash_bits() > 256 {
            return Err(ChainError::CallValueTooWide);
        }
        let genesis = Block::genesis(&params)?;
        let hash = genesis.hash();
        Ok(Self {
            params,
            variant,
            mgt: mgt.max(1),
            entries: vec![ChainEntry { block: genesis, hash, received_at: 0 }],
            last_full_index: 0,
            empty_count_since_full: 0,
        })
    }

    /// Like [`ChainState::new`] with genesis stamped as received at `time`.
    pub fn with_genesis_time(
        params: Arc<ProtocolParams>,
        variant: Variant,
        mgt: u64,
        time: u64,
    ) -> Result<Self, ChainError> {
        let mut chain = Self::new(params, variant, mgt)?;
        chain.entries[0].received_at = time;
        Ok(chain)
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.params
    }

    pub fn shared_params(&self) -> Arc<ProtocolParams> {
        Arc::clone(&self.params)
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn mgt(&self) -> u64 {
        self.mgt
    }

    pub fn entries(&self) -> &[ChainEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn head(&self) -> &ChainEntry {
        self.entries.last().expect("chain always holds genesis")
    }

    /// Last regular block, or genesis before the first one.
    pub fn last_full(&self) -> &ChainEntry {
        &self.entries[self.last_full_index]
    }

    pub fn last_full_block_time(&self) -> u64 {
        self.last_full().received_at
    }

    pub fn empty_count_since_full(&self) -> u32 {
        self.empty_count_since_full
    }

    /// Call value the next empty block must carry: `C_{l+1}`, restarting at
    /// `C_1` after `C_k`.
    pub fn next_empty_level(&self) -> u32 {
        if self.empty_count_since_full >= self.params.k() {
            1
        } else {
            self.empty_count_since_full + 1
        }
    }

    pub fn next_empty_call_value(&self) -> Word256 {
        let call = self.params.call_value_at(self.next_empty_level()).expect("level within staircase");
        Word256::from_biguint(call).expect("hash width checked at construction")
    }

    pub fn regular_call_value(&self) -> Word256 {
        Word256::from_biguint(self.params.regular_call_value()).expect("hash width checked at construction")
    }

    /// Implicit-mode slot `floor((now - last full block time) / MGT)`.
    pub fn slot_at(&self, now: u64) -> Option<u64> {
        now.checked_sub(self.last_full_block_time()).map(|elapsed| elapsed / self.mgt)
    }

    /// Staircase level gating a regular block received in implicit `slot`:
    /// slot 1 gates on `C_0`, slot `l` on `C_{l-1}`, and every slot past
    /// `k + 1` on `C_k`.
    pub fn implicit_gate_level(&self, slot: u64) -> Option<u32> {
        if slot == 0 {
            None
        } else {
            Some((slot - 1).min(u64::from(self.params.k())) as u32)
        }
    }

    fn hash_value(&self, hash: &Hash256) -> BigUint {
        hash.hash_value(self.params.hash_bits())
    }

    fn require_variant(&self, allowed: &[Variant]) -> Result<(), ChainError> {
        if allowed.contains(&self.variant) {
            Ok(())
        } else {
            Err(ChainError::WrongVariant { expected: allowed[0].name(), found: self.variant.name() })
        }
    }

    fn require_kind(block: &Block, kind: BlockKind) -> Result<(), ChainError> {
        if block.kind == kind {
            Ok(())
        } else {
            Err(ChainError::WrongKind { expected: if kind == BlockKind::Regular { "regular" } else { "empty" } })
        }
    }

    /// Regular block on an explicit or time-moderated chain: must extend the
    /// head, hash at or below the head's call value, carry `C_0`, and list its
    /// transactions in order.
    pub fn validate_regular_explicit(&self, block: &Block) -> Result<ValidationVerdict, ChainError> {
        self.require_variant(&[Variant::Explicit, Variant::TimeModerated])?;
        Self::require_kind(block, BlockKind::Regular)?;
        let head = self.head();
        if block.prev_hash != head.hash {
            return Ok(ValidationVerdict::reject(VerdictReason::BadPrevHash));
        }
        if !block.transactions_ordered() {
            return Ok(ValidationVerdict::reject(VerdictReason::UnorderedTransactions));
        }
        if block.call_value != self.regular_call_value() {
            return Ok(ValidationVerdict::reject(VerdictReason::BadCallField));
        }
        if self.hash_value(&block.hash()) > head.block.call_value.to_biguint() {
            return Ok(ValidationVerdict::reject(VerdictReason::HashAboveCall));
        }
        Ok(ValidationVerdict::ACCEPT)
    }

    /// Empty block from the central server: extends the head and carries the
    /// next call value of the staircase.
    pub fn validate_empty_explicit(&self, block: &Block) -> Result<ValidationVerdict, ChainError> {
        self.require_variant(&[Variant::Explicit])?;
        Self::require_kind(block, BlockKind::Empty)?;
        if block.prev_hash != self.head().hash {
            return Ok(ValidationVerdict::reject(VerdictReason::BadPrevHash));
        }
        if block.call_value != self.next_empty_call_value() {
            return Ok(ValidationVerdict::reject(VerdictReason::BadCallField));
        }
        Ok(ValidationVerdict::ACCEPT)
    }

    /// Empty block from any peer. Its date must sit at least one MGT after
    /// the previous block's date (else it is discarded as stale), and the
    /// receiving server's clock must also show that gap (else it is held
    /// back as too early).
    pub fn validate_empty_time_moderated(
        &self,
        block: &Block,
        server_local_time: u64,
    ) -> Result<ValidationVerdict, ChainError> {
        self.require_variant(&[Variant::TimeModerated])?;
        Self::require_kind(block, BlockKind::Empty)?;
        let head = self.head();
        if block.prev_hash != head.hash {
            return Ok(ValidationVerdict::reject(VerdictReason::BadPrevHash));
        }
        let gap_ok = |t: u64| t.checked_sub(head.block.date).is_some_and(|gap| gap >= self.mgt);
        if !gap_ok(block.date) {
            return Ok(ValidationVerdict::reject(VerdictReason::StaleDate));
        }
        if !gap_ok(server_local_time) {
            return Ok(ValidationVerdict::reject(VerdictReason::TooEarly));
        }
        if block.call_value != self.next_empty_call_value() {
            return Ok(ValidationVerdict::reject(VerdictReason::BadCallField));
        }
        Ok(ValidationVerdict::ACCEPT)
    }

    /// Regular block on an implicit chain, received at server time `now`.
    pub fn validate_regular_implicit(&self, block: &Block, now: u64) -> Result<ValidationVerdict, ChainError> {
        self.require_variant(&[Variant::Implicit])?;
        Self::require_kind(block, BlockKind::Regular)?;
        let Some(level) = self.slot_at(now).and_then(|slot| self.implicit_gate_level(slot)) else {
            return Ok(ValidationVerdict::reject(VerdictReason::TooEarly));
        };
        if block.prev_hash != self.last_full().hash {
            return Ok(ValidationVerdict::reject(VerdictReason::BadPrevHash));
        }
        let gate = self.params.call_value_at(level).expect("gate level clamped to k");
        if self.hash_value(&block.hash()) > *gate {
            return Ok(ValidationVerdict::reject(VerdictReason::BadSlotThreshold));
        }
        if block.call_value != self.regular_call_value() {
            return Ok(ValidationVerdict::reject(VerdictReason::BadCallField));
        }
        if !block.transactions_ordered() {
            return Ok(ValidationVerdict::reject(VerdictReason::UnorderedTransactions));
        }
        Ok(ValidationVerdict::ACCEPT)
    }

    /// Dispatches to the rule for this chain's variant and the block kind.
    pub fn validate(&self, block: &Block, now: u64) -> Result<ValidationVerdict, ChainError> {
        match (self.variant, block.kind) {
            (Variant::Explicit | Variant::TimeModerated, BlockKind::Regular) => self.validate_regular_explicit(block),
            (Variant::Explicit, BlockKind::Empty) => self.validate_empty_explicit(block),
            (Variant::TimeModerated, BlockKind::Empty) => self.validate_empty_time_moderated(block, now),
            (Variant::Implicit, BlockKind::Regular) => self.validate_regular_implicit(block, now),
            (Variant::Implicit, BlockKind::Empty) => Err(ChainError::WrongKind { expected: "regular" }),
        }
    }

    /// Validates and appends. `now` is the receiving server's clock and
    /// becomes the block's reception stamp.
    pub fn append(&mut self, block: Block, now: u64) -> Result<Hash256, ChainError> {
        let verdict = self.validate(&block, now)?;
        if !verdict.accepted() {
            return Err(ChainError::Rejected(verdict.reason()));
        }
        Ok(self.push(block, now))
    }

    /// Appends a regular block that links to the expected parent, skipping
    /// threshold and timing rules. Used for ungated control runs.
    pub fn append_linked(&mut self, block: Block, now: u64) -> Result<Hash256, ChainError> {
        Self::require_kind(&block, BlockKind::Regular)?;
        let parent = match self.variant {
            Variant::Implicit => self.last_full().hash,
            Variant::Explicit | Variant::TimeModerated => self.head().hash,
        };
        if block.prev_hash != parent {
            return Err(ChainError::Rejected(VerdictReason::BadPrevHash));
        }
        Ok(self.push(block, now))
    }

    /// Drops every entry past the first `len` (genesis always stays) and
    /// recomputes the per-variant counters.
    pub fn rewind(&mut self, len: usize) {
        self.entries.truncate(len.max(1));
        self.last_full_index = 0;
        self.empty_count_since_full = 0;
        let k = self.params.k();
        for (index, entry) in self.entries.iter().enumerate().skip(1) {
            match entry.block.kind {
                BlockKind::Regular => {
                    self.last_full_index = index;
                    self.empty_count_since_full = 0;
                }
                BlockKind::Empty => {
                    self.empty_count_since_full =
                        if self.empty_count_since_full >= k { 1 } else { self.empty_count_since_full + 1 };
                }
            }
        }
    }

    /// Appends a block that extends the head without applying any rule
    /// other than the parent link. Used when adopting a longer branch.
    pub fn append_trusted(&mut self, block: Block, now: u64) -> Result<Hash256, ChainError> {
        if block.prev_hash != self.head().hash {
            return Err(ChainError::Rejected(VerdictReason::BadPrevHash));
        }
        Ok(self.push(block, now))
    }

    fn push(&mut self, block: Block, now: u64) -> Hash256 {
        let hash = block.hash();
        match block.kind {
            BlockKind::Regular => {
                self.empty_count_since_full = 0;
                self.last_full_index = self.entries.len();
            }
            BlockKind::Empty => self.empty_count_since_full = self.next_empty_level(),
        }
        self.entries.push(ChainEntry { block, hash, received_at: now });
        hash
    }

    /// Re-validates `entries` (excluding genesis) on a fresh chain.
    pub fn replay(
        params: Arc<ProtocolParams>,
        variant: Variant,
        mgt: u64,
        entries: &[ChainEntry],
    ) -> Result<Self, ChainError> {
        let mut chain = Self::new(params, variant, mgt)?;
        for entry in entries.iter().skip(1) {
            chain.append(entry.block.clone(), entry.received_at)?;
        }
        Ok(chain)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::block::TransactionId;

    fn params(k: u32, n: u64) -> Arc<ProtocolParams> {
        Arc::new(ProtocolParams::new(k, n, 256).unwrap())
    }

    fn tx(byte: u8) -> TransactionId {
        let mut id = [0u8; 32];
        id[0] = byte;
        TransactionId(Word256(id))
    }

    /// Brute-forces transaction sets until the block hash satisfies `accept`.
    fn find_regular(chain: &ChainState, prev: Hash256, date: u64, accept: impl Fn(&BigUint) -> bool) -> Block {
        let call = chain.regular_call_value();
        for salt in 0u32.. {
            let mut id = [0u8; 32];
            id[..4].copy_from_slice(&salt.to_be_bytes());
            let block = Block::regular(prev, date, vec![TransactionId(Word256(id))], call);
            if accept(&block.hash().hash_value(256)) {
                return block;
            }
        }
        unreachable!()
    }

    #[test]
    fn explicit_regular_after_full_staircase_accepts_anything() {
        let p = params(2, 16);
        let mut chain = ChainState::new(Arc::clone(&p), Variant::Explicit, DEFAULT_MGT).unwrap();
        for _ in 0..2 {
            let empty = Block::empty(chain.head().hash, 0, chain.next_empty_call_value());
            chain.append(empty, 0).unwrap();
        }
        assert_eq!(chain.head().block.call_value.to_biguint(), *p.max_hash_value());
        let block = Block::regular(chain.head().hash, 3, vec![tx(1)], chain.regular_call_value());
        assert!(chain.validate_regular_explicit(&block).unwrap().accepted());
    }

    #[test]
    fn explicit_regular_boundary() {
        let p = params(2, 16);
        let chain = ChainState::new(Arc::clone(&p), Variant::Explicit, DEFAULT_MGT).unwrap();
        let c0 = p.regular_call_value().clone();
        let head = chain.head().hash;
        let below = find_regular(&chain, head, 1, |h| *h <= c0);
        assert!(chain.validate_regular_explicit(&below).unwrap().accepted());
        let above = find_regular(&chain, head, 1, |h| *h > c0);
        assert_eq!(chain.validate_regular_explicit(&above).unwrap().reason(), VerdictReason::HashAboveCall);
    }

    #[test]
    fn explicit_regular_rejections() {
        let p = params(1, 2);
        let chain = ChainState::new(Arc::clone(&p), Variant::Explicit, DEFAULT_MGT).unwrap();
        let head = chain.head().hash;
        let call = chain.regular_call_value();
        let unordered = Block::regular(head, 0, vec![tx(2), tx(1)], call);
        assert_eq!(chain.validate_regular_explicit(&unordered).unwrap().reason(), VerdictReason::UnorderedTransactions);
        let orphan = Block::regular(Word256([1; 32]), 0, vec![tx(1)], call);
        assert_eq!(chain.validate_regular_explicit(&orphan).unwrap().reason(), VerdictReason::BadPrevHash);
        let bad_call = Block::regular(head, 0, vec![tx(1)], Word256::ZERO);
        assert_eq!(chain.validate_regular_explicit(&bad_call).unwrap().reason(), VerdictReason::BadCallField);
        let implicit = ChainState::new(p, Variant::Implicit, DEFAULT_MGT).unwrap();
        assert!(matches!(implicit.validate_regular_explicit(&bad_call), Err(ChainError::WrongVariant { .. })));
    }

    #[test]
    fn time_moderated_gap_rules() {
        let p = params(3, 64);
        let mgt = 60;
        let chain = ChainState::new(Arc::clone(&p), Variant::TimeModerated, mgt).unwrap();
        let head = chain.head().hash;
        let call = chain.next_empty_call_value();

        let exact = Block::empty(head, mgt, call);
        assert!(chain.validate_empty_time_moderated(&exact, mgt).unwrap().accepted());

        let short = Block::empty(head, mgt - 1, call);
        assert_eq!(chain.validate_empty_time_moderated(&short, mgt - 1).unwrap().reason(), VerdictReason::StaleDate);

        // Correct stamp, but the server clock has not reached the gap yet.
        assert_eq!(chain.validate_empty_time_moderated(&exact, mgt - 1).unwrap().reason(), VerdictReason::TooEarly);

        let wrong_call = Block::empty(head, mgt, chain.regular_call_value());
        assert_eq!(
            chain.validate_empty_time_moderated(&wrong_call, mgt).unwrap().reason(),
            VerdictReason::BadCallField
        );
    }

    #[test]
    fn time_moderated_staircase_restarts() {
        let p = params(3, 64);
        let mgt = 60;
        let mut chain = ChainState::new(Arc::clone(&p), Variant::TimeModerated, mgt).unwrap();
        for level in 1..=3u32 {
            let date = u64::from(level) * mgt;
            let block = Block::empty(chain.head().hash, date, chain.next_empty_call_value());
            assert_eq!(block.call_value.to_biguint(), *p.call_value_at(level).unwrap());
            chain.append(block, date).unwrap();
        }
        assert_eq!(chain.empty_count_since_full(), 3);
        assert_eq!(chain.head().block.call_value.to_biguint(), *p.max_hash_value());
        // The (k+1)-th empty block restarts at C_1.
        let date = 4 * mgt;
        let restart = Block::empty(chain.head().hash, date, chain.next_empty_call_value());
        assert_eq!(restart.call_value.to_biguint(), *p.call_value_at(1).unwrap());
        chain.append(restart, date).unwrap();
        assert_eq!(chain.empty_count_since_full(), 1);
    }

    #[test]
    fn time_moderated_regular_resets_count() {
        let p = params(3, 64);
        let mut chain = ChainState::new(Arc::clone(&p), Variant::TimeModerated, 60).unwrap();
        for level in 1..=3u64 {
            let block = Block::empty(chain.head().hash, level * 60, chain.next_empty_call_value());
            chain.append(block, level * 60).unwrap();
        }
        let regular = Block::regular(chain.head().hash, 200, vec![tx(9)], chain.regular_call_value());
        chain.append(regular, 200).unwrap();
        assert_eq!(chain.empty_count_since_full(), 0);
        assert_eq!(chain.last_full().received_at, 200);
    }

    #[test]
    fn implicit_slot_gating() {
        let p = params(2, 16);
        let mgt = 60;
        let chain = ChainState::new(Arc::clone(&p), Variant::Implicit, mgt).unwrap();
        let prev = chain.last_full().hash;
        let c0 = p.regular_call_value().clone();

        let any = find_regular(&chain, prev, 1, |_| true);
        assert_eq!(chain.validate_regular_implicit(&any, mgt / 2).unwrap().reason(), VerdictReason::TooEarly);
        assert!(chain.validate_regular_implicit(&any, (2 + 5) * mgt).unwrap().accepted());

        let at_gate = find_regular(&chain, prev, 1, |h| *h <= c0);
        assert!(chain.validate_regular_implicit(&at_gate, mgt + mgt / 2).unwrap().accepted());
        let above_gate = find_regular(&chain, prev, 1, |h| *h > c0);
        assert_eq!(
            chain.validate_regular_implicit(&above_gate, mgt + mgt / 2).unwrap().reason(),
            VerdictReason::BadSlotThreshold
        );

        let orphan = find_regular(&chain, Word256([3; 32]), 1, |_| true);
        assert_eq!(chain.validate_regular_implicit(&orphan, 10 * mgt).unwrap().reason(), VerdictReason::BadPrevHash);
    }

    #[test]
    fn implicit_exact_boundary_values() {
        // Call value boundary checked on the hash value itself: C_0 passes slot 1, C_0 + 1 does not.
        let p = params(2, 16);
        let chain = ChainState::new(Arc::clone(&p), Variant::Implicit, 60).unwrap();
        let c0 = p.call_value_at(0).unwrap();
        let gate = p.call_value_at(chain.implicit_gate_level(1).unwrap()).unwrap();
        assert_eq!(gate, c0);
        let c0_plus = c0 + 1u32;
        assert!(*c0 <= *gate);
        assert!(c0_plus > *gate);
        assert_eq!(chain.implicit_gate_level(0), None);
        assert_eq!(chain.implicit_gate_level(3), Some(2));
        assert_eq!(chain.implicit_gate_level(100), Some(2));
    }

    #[test]
    fn implicit_rejects_empty_blocks() {
        let p = params(2, 16);
        let chain = ChainState::new(p, Variant::Implicit, 60).unwrap();
        let empty = Block::empty(chain.head().hash, 60, chain.next_empty_call_value());
        assert!(matches!(chain.validate(&empty, 60), Err(ChainError::WrongKind { .. })));
    }

    #[test]
    fn rewind_recomputes_counters() {
        let p = params(2, 16);
        let mut chain = ChainState::new(Arc::clone(&p), Variant::Explicit, 60).unwrap();
        let regular = Block::regular(chain.head().hash, 1, vec![tx(1)], chain.regular_call_value());
        chain.append_trusted(regular, 5).unwrap();
        for _ in 0..2 {
            let empty = Block::empty(chain.head().hash, 0, chain.next_empty_call_value());
            chain.append(empty, 9).unwrap();
        }
        let snapshot = (chain.empty_count_since_full(), chain.last_full().hash);
        let tail = chain.entries()[2..].to_vec();
        chain.rewind(2);
        assert_eq!(chain.len(), 2);
        assert_eq!(chain.empty_count_since_full(), 0);
        for entry in tail {
            chain.append_trusted(entry.block, entry.received_at).unwrap();
        }
        assert_eq!((chain.empty_count_since_full(), chain.last_full().hash), snapshot);
        chain.rewind(0);
        assert_eq!(chain.len(), 1);
        let orphan = Block::empty(Word256([9; 32]), 0, chain.next_empty_call_value());
        assert!(chain.append_trusted(orphan, 0).is_err());
    }

    #[test]
    fn replay_reproduces_chain() {
        let p = params(2, 16);
        let mut chain = ChainState::new(Arc::clone(&p), Variant::Explicit, 60).unwrap();
        for round in 0..5u8 {
            let empty = Block::empty(chain.head().hash, 0, chain.next_empty_call_value());
            chain.append(empty, 0).unwrap();
            let empty = Block::empty(chain.head().hash, 0, chain.next_empty_call_value());
            chain.append(empty, 0).unwrap();
            let regular =
                Block::regular(chain.head().hash, u64::from(round), vec![tx(round)], chain.regular_call_value());
            chain.append(regular, 0).unwrap();
        }
        let replayed = ChainState::replay(p, Variant::Explicit, 60, chain.entries()).unwrap();
        assert_eq!(replayed.entries(), chain.entries());
    }
}
