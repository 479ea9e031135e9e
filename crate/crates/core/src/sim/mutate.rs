//! Byte-level mutations.

use rand::Rng;

pub const INTERESTING: [u8; 9] = [0, 1, 16, 32, 64, 100, 127, 128, 255];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mutation {
    /// XOR one byte with a random non-zero mask.
    FlipBits,
    Interesting,
    IncDec,
    Truncate,
    Extend,
}

fn applicable(len: usize, max_len: usize) -> Vec<Mutation> {
    let mut ops = Vec::with_capacity(5);
    if len > 0 {
        ops.extend([Mutation::FlipBits, Mutation::Interesting, Mutation::IncDec]);
    }
    if len > 1 {
        ops.push(Mutation::Truncate);
    }
    if len < max_len {
        ops.push(Mutation::Extend);
    }
    ops
}

/// Applies one randomly chosen mutation. The result never exceeds `max_len`
/// bytes; an empty input can only grow.
pub fn mutate<R: Rng>(input: &[u8], max_len: usize, rng: &mut R) -> Vec<u8> {
    let mut out: Vec<u8> = input.iter().copied().take(max_len).collect();
    let ops = applicable(out.len(), max_len);
    if ops.is_empty() {
        return out;
    }
    match ops[rng.gen_range(0..ops.len())] {
        Mutation::FlipBits => {
            let i = rng.gen_range(0..out.len());
            out[i] ^= rng.gen_range(1..=255u8);
        }
        Mutation::Interesting => {
            let i = rng.gen_range(0..out.len());
            out[i] = INTERESTING[rng.gen_range(0..INTERESTING.len())];
        }
        Mutation::IncDec => {
            let i = rng.gen_range(0..out.len());
            out[i] = if rng.gen() {
                out[i].wrapping_add(1)
            } else {
                out[i].wrapping_sub(1)
            };
        }
        Mutation::Truncate => {
            let keep = rng.gen_range(1..out.len());
            out.truncate(keep);
        }
        Mutation::Extend => out.push(rng.gen()),
    }
    out
}
