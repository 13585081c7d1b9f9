//! Deterministic randomness: one independent ChaCha8 stream per
//! (round, purpose, agent) triple, all keyed from a single master seed.
//!
//! Streams are pre-keyed rather than drawn from a shared generator so that
//! agent steps can execute in any order — or in parallel — without
//! perturbing the trajectory. The 32-byte ChaCha key is built directly from
//! the packed triple; distinct triples give distinct keys and therefore
//! independent streams.

use crate::agent::AgentHandle;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Identifier of the RNG construction, echoed into every output artifact.
pub const RNG_ALGORITHM: &str = "chacha8-keyed";

/// What a stream is for. Each purpose gets a disjoint key space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamPurpose {
    /// Coin flips of one agent in one round.
    Agent(AgentHandle),
    /// The matching draw of one round.
    Matching,
    /// The adversary's decisions in one round.
    Adversary,
}

/// The four 64-bit words a stream is keyed by. The ChaCha key is their
/// little-endian byte concatenation, derived only when a draw happens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct StreamKey([u64; 4]);

impl StreamKey {
    fn to_seed(self) -> [u8; 32] {
        let mut seed = [0u8; 32];
        for (i, w) in self.0.iter().enumerate() {
            seed[i * 8..(i + 1) * 8].copy_from_slice(&w.to_le_bytes());
        }
        seed
    }
}

/// An agent-scoped source of unbiased coin flips.
///
/// Construction stores only the key words; the generator materializes on the
/// first draw. Most agent steps flip no coins at all (only the
/// leader-selection and evaluation rounds do), so handing every agent a
/// fresh stream each round costs a few stores. Cloning yields an identical
/// continuation.
#[derive(Debug, Clone)]
pub struct CoinStream {
    key: StreamKey,
    rng: Option<Box<ChaCha8Rng>>,
    buf: u64,
    buf_bits: u8,
    drawn: u64,
}

impl CoinStream {
    #[inline]
    fn from_key(key: StreamKey) -> Self {
        CoinStream {
            key,
            rng: None,
            buf: 0,
            buf_bits: 0,
            drawn: 0,
        }
    }

    /// Stream keyed by raw seed bytes. Mostly useful in tests; simulation
    /// code goes through [`seed_streams`].
    pub fn from_seed_bytes(seed: [u8; 32]) -> Self {
        let words = [
            u64::from_le_bytes(seed[0..8].try_into().unwrap()),
            u64::from_le_bytes(seed[8..16].try_into().unwrap()),
            u64::from_le_bytes(seed[16..24].try_into().unwrap()),
            u64::from_le_bytes(seed[24..32].try_into().unwrap()),
        ];
        Self::from_key(StreamKey(words))
    }

    /// Convenience constructor keyed by a single integer.
    pub fn from_seed_u64(seed: u64) -> Self {
        Self::from_key(StreamKey([seed, 0, 0, 0]))
    }

    /// Draw one unbiased bit.
    #[inline]
    pub fn next_bit(&mut self) -> bool {
        use rand_chacha::rand_core::RngCore;
        if self.buf_bits == 0 {
            self.buf = self.rng_mut().next_u64();
            self.buf_bits = 64;
        }
        let bit = self.buf & 1 != 0;
        self.buf >>= 1;
        self.buf_bits -= 1;
        self.drawn += 1;
        bit
    }

    /// Draw `k` bits (k <= 64) as an integer, least-significant bit first.
    pub fn bits(&mut self, k: u32) -> u64 {
        debug_assert!(k <= 64);
        let mut v = 0u64;
        for i in 0..k {
            v |= u64::from(self.next_bit()) << i;
        }
        v
    }

    /// Number of bits drawn so far; used by the coin-consumption audits.
    pub fn bits_drawn(&self) -> u64 {
        self.drawn
    }

    /// Direct access to the underlying generator, for samplers that need
    /// ranges or shuffles rather than individual bits. A given stream should
    /// be consumed either through bits or through the generator, not both
    /// interleaved, to keep draw sequences easy to reason about.
    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        if self.rng.is_none() {
            self.rng = Some(Box::new(ChaCha8Rng::from_seed(self.key.to_seed())));
        }
        self.rng.as_mut().unwrap()
    }
}

/// Little-endian "popstab\0" as the fixed domain word.
const DOMAIN: u64 = u64::from_le_bytes(*b"popstab\0");

/// Key the stream for `(master_seed, round_index, purpose)`.
///
/// Distinct triples yield distinct keys, hence independent, reproducible
/// streams on every platform. The fourth key word combines the purpose tag
/// with a fixed domain constant.
#[inline]
pub fn seed_streams(master_seed: u64, round_index: u64, purpose: StreamPurpose) -> CoinStream {
    let (tag, handle) = match purpose {
        StreamPurpose::Agent(h) => (0u64, h.0),
        StreamPurpose::Matching => (1, 0),
        StreamPurpose::Adversary => (2, 0),
    };
    CoinStream::from_key(StreamKey([master_seed, round_index, handle, DOMAIN ^ tag]))
}
