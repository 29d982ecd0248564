//! Line-oriented hex format, one block per line:
//!
//! ```text
//! <kind> <date:16 hex> <prev_hash:64 hex> <payload_digest:64 hex> <call_value:64 hex>
//! ```
//!
//! `kind` is `R` for regular and `E` for empty blocks. Lines starting with
//! `#` and blank lines are skipped.

use super::block::{Block, BlockKind, Word256};
use crate::error::ChainError;

pub fn format_block(block: &Block) -> String {
    let kind = match block.kind {
        BlockKind::Regular => 'R',
        BlockKind::Empty => 'E',
    };
    format!(
        "{kind} {:016x} {} {} {}",
        block.date,
        block.prev_hash.to_hex(),
        block.payload_digest.to_hex(),
        block.call_value.to_hex()
    )
}

pub fn parse_block(line: &str) -> Result<Block, ChainError> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    let [kind, date, prev, digest, call] = fields[..] else {
        return Err(ChainError::Parse(format!("expected 5 fields, got {}", fields.len())));
    };
    if date.len() != 16 {
        return Err(ChainError::Parse(format!("date must be 16 hex digits: {date}")));
    }
    let date = u64::from_str_radix(date, 16).map_err(|e| ChainError::Parse(format!("{date}: {e}")))?;
    let prev = Word256::from_hex(prev)?;
    let digest = Word256::from_hex(digest)?;
    let call = Word256::from_hex(call)?;
    match kind {
        "R" => Ok(Block::regular_with_digest(prev, date, digest, call)),
        "E" if digest == Word256::ZERO => Ok(Block::empty(prev, date, call)),
        "E" => Err(ChainError::Parse("empty block with non-zero payload digest".into())),
        other => Err(ChainError::Parse(format!("unknown block kind `{other}`"))),
    }
}

pub fn format_blocks<'a>(blocks: impl IntoIterator<Item = &'a Block>) -> String {
    let mut out = String::new();
    for block in blocks {
        out.push_str(&format_block(block));
        out.push('\n');
    }
    out
}

pub fn parse_blocks(text: &str) -> Result<Vec<Block>, ChainError> {
    text.lines().map(str::trim).filter(|line| !line.is_empty() && !line.starts_with('#')).map(parse_block).collect()
}
