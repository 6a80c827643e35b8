use std::collections::BTreeSet;

use thiserror::Error;

use crate::rng::DetRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("cannot corrupt an empty payload")]
pub struct EmptyPayload;

/// Alters exactly `min(bytes_affected, len)` distinct byte positions by
/// XOR-ing each with a non-zero random byte. Length is preserved.
pub fn corrupt_payload(payload: &[u8], bytes_affected: usize, rng: &mut DetRng) -> Result<Vec<u8>, EmptyPayload> {
    if payload.is_empty() {
        return Err(EmptyPayload);
    }
    let len = payload.len();
    let k = bytes_affected.clamp(1, len);
    let mut out = payload.to_vec();
    if k * 2 <= len {
        let mut chosen = BTreeSet::new();
        while chosen.len() < k {
            let pos = rng.below(len as u64) as usize;
            if chosen.insert(pos) {
                out[pos] ^= rng.nonzero_byte();
            }
        }
    } else {
        // Dense case: partial Fisher-Yates over all positions.
        let mut idx: Vec<usize> = (0..len).collect();
        for i in 0..k {
            let j = i + rng.below((len - i) as u64) as usize;
            idx.swap(i, j);
            out[idx[i]] ^= rng.nonzero_byte();
        }
    }
    Ok(out)
}
