//! Block data model, hash-input layout and SHA-256 hashing.
//!
//! Hash input layout (big-endian throughout):
//!
//! | field          | bytes | present          |
//! |----------------|-------|------------------|
//! | prev_hash      | 32    | always           |
//! | kind           | 1     | always (0x01 regular, 0x00 empty) |
//! | date           | 8     | regular only     |
//! | payload_digest | 32    | regular only     |
//! | call_value     | 32    | always           |
//!
//! Empty blocks leave their date out of the hash so that every server
//! extending the same full block produces the same sequence of empty-block
//! hashes regardless of clock.

use std::fmt;

use num_bigint::BigUint;
use sha2::{Digest, Sha256};

use crate::error::ChainError;
use crate::params::ProtocolParams;

/// A 256-bit big-endian word: block hashes, digests and call values.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Word256(pub [u8; 32]);

/// Block hash.
pub type Hash256 = Word256;

impl Word256 {
    pub const ZERO: Self = Self([0; 32]);

    pub fn to_biguint(&self) -> BigUint {
        BigUint::from_bytes_be(&self.0)
    }

    pub fn from_biguint(value: &BigUint) -> Result<Self, ChainError> {
        let bytes = value.to_bytes_be();
        if bytes.len() > 32 {
            return Err(ChainError::CallValueTooWide);
        }
        let mut out = [0u8; 32];
        out[32 - bytes.len()..].copy_from_slice(&bytes);
        Ok(Self(out))
    }

    pub fn from_hex(text: &str) -> Result<Self, ChainError> {
        let mut out = [0u8; 32];
        hex::decode_to_slice(text, &mut out).map_err(|e| ChainError::Parse(format!("{text}: {e}")))?;
        Ok(Self(out))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    /// Interprets the word as an `H`-bit hash value by keeping its top `H` bits.
    pub fn hash_value(&self, hash_bits: u32) -> BigUint {
        let value = self.to_biguint();
        if hash_bits >= 256 {
            value
        } else {
            value >> (256 - hash_bits)
        }
    }
}

impl fmt::Debug for Word256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", self.to_hex())
    }
}

impl fmt::Display for Word256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// Transaction identifier. Blocks list them in strictly increasing order.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct TransactionId(pub Word256);

#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub enum BlockKind {
    Regular,
    Empty,
}

impl BlockKind {
    fn tag(self) -> u8 {
        match self {
            BlockKind::Regular => 0x01,
            BlockKind::Empty => 0x00,
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Block {
    pub kind: BlockKind,
    pub prev_hash: Hash256,
    /// POSIX seconds.
    pub date: u64,
    /// Digest of the ordered transaction ids; zero for empty blocks.
    pub payload_digest: Word256,
    pub call_value: Word256,
    /// Transaction ids when known. Blocks read back from text carry only
    /// the digest and leave this empty.
    pub transactions: Vec<TransactionId>,
}

impl Block {
    pub fn regular(prev_hash: Hash256, date: u64, transactions: Vec<TransactionId>, call_value: Word256) -> Self {
        Self {
            kind: BlockKind::Regular,
            prev_hash,
            date,
            payload_digest: digest_transactions(&transactions),
            call_value,
            transactions,
        }
    }

    pub fn regular_with_digest(prev_hash: Hash256, date: u64, payload_digest: Word256, call_value: Word256) -> Self {
        Self { kind: BlockKind::Regular, prev_hash, date, payload_digest, call_value, transactions: Vec::new() }
    }

    pub fn empty(prev_hash: Hash256, date: u64, call_value: Word256) -> Self {
        Self {
            kind: BlockKind::Empty,
            prev_hash,
            date,
            payload_digest: Word256::ZERO,
            call_value,
            transactions: Vec::new(),
        }
    }

    /// Empty block with zero parent, call value `C_0` and date 0.
    pub fn genesis(params: &ProtocolParams) -> Result<Self, ChainError> {
        Ok(Self::empty(Word256::ZERO, 0, Word256::from_biguint(params.regular_call_value())?))
    }

    pub fn is_regular(&self) -> bool {
        self.kind == BlockKind::Regular
    }

    /// True when the attached transaction ids are strictly increasing.
    pub fn transactions_ordered(&self) -> bool {
        self.transactions.windows(2).all(|w| w[0] < w[1])
    }

    pub fn serialize_for_hash(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(105);
        out.extend_from_slice(&self.prev_hash.0);
        out.push(self.kind.tag());
        if self.is_regular() {
            out.extend_from_slice(&self.date.to_be_bytes());
            out.extend_from_slice(&self.payload_digest.0);
        }
        out.extend_from_slice(&self.call_value.0);
        out
    }

    pub fn hash(&self) -> Hash256 {
        Word256(Sha256::digest(self.serialize_for_hash()).into())
    }
}

/// SHA-256 over the concatenated 32-byte transaction ids, in list order.
pub fn digest_transactions(transactions: &[TransactionId]) -> Word256 {
    let mut hasher = Sha256::new();
    for tx in transactions {
        hasher.update(tx.0 .0);
    }
    Word256(hasher.finalize().into())
}
