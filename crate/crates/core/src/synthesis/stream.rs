//! Counter-based random streams keyed by `(seed, replicate, cell)`.
//!
//! Every synthetic cell draws from its own stream, so the values produced for
//! a cell do not depend on how work is split between threads.

use rand::RngCore;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Key of the stream for `(master_seed, replicate, cell)`.
///
/// Each input passes through a full avalanche before the next is folded in,
/// so nearby indices give unrelated keys.
pub fn stream_seed(master_seed: u64, replicate: u64, cell: u64) -> u64 {
    let h = mix64(master_seed ^ 0x6a09_e667_f3bc_c908);
    let h = mix64(h ^ replicate.wrapping_mul(GOLDEN));
    mix64(h ^ mix64(cell.wrapping_add(0x3c6e_f372_fe94_f82b)))
}

/// The `counter`-th output of stream `key`.
#[inline]
fn output(key: u64, counter: u64) -> u64 {
    mix64(key.wrapping_add(counter.wrapping_add(1).wrapping_mul(GOLDEN)))
}

/// Random stream for one synthetic cell; output `i` is a pure function of the
/// key and `i`.
#[derive(Clone, Debug)]
pub struct CellStream {
    key: u64,
    counter: u64,
}

impl CellStream {
    pub fn new(master_seed: u64, replicate: u64, cell: u64) -> Self {
        Self::from_key(stream_seed(master_seed, replicate, cell))
    }

    pub fn from_key(key: u64) -> Self {
        Self { key, counter: 0 }
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    /// Number of 64-bit words consumed so far.
    pub fn position(&self) -> u64 {
        self.counter
    }
}

impl RngCore for CellStream {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        let v = output(self.key, self.counter);
        self.counter = self.counter.wrapping_add(1);
        v
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}
