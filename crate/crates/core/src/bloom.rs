//! Bloom-filter block signals.
//!
//! A signal is a Bloom filter over the transaction ids of a block,
//! broadcast in the block header ahead of the body. This module owns the
//! filter itself, the analytic false-positive rate, the popcount-based
//! flood detector, and the fixed wire layout of a serialized signal.
//!
//! Hashing is deterministic: the `h` probe positions for a key are
//! derived from a 128-bit keyed mix of the 32-byte transaction id via
//! double hashing (`g_i = h1 + i * h2 mod b`), so two nodes always agree
//! bit-for-bit on the same inserts.

use crate::protocol::TxId;
use thiserror::Error;

/// Magic prefix of a serialized signal.
pub const SIGNAL_MAGIC: [u8; 4] = *b"TIPS";
/// Wire format version emitted by [`BloomFilter::to_signal_bytes`].
pub const SIGNAL_VERSION: u8 = 1;

const KEY_A: u64 = 0x8f7c_1d88_6a02_9d4b;
const KEY_B: u64 = 0x51dc_93a0_77f1_a2e6;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BloomError {
    #[error("bit count must be at least 1")]
    ZeroBits,
    #[error("hash count must be at least 1")]
    ZeroHashes,
    #[error("filter has {got_bits} bits / {got_hashes} hashes, policy expects {want_bits} / {want_hashes}")]
    DimensionMismatch {
        got_bits: u32,
        got_hashes: u8,
        want_bits: u32,
        want_hashes: u8,
    },
    #[error("rejection probability must lie strictly in (0, 1)")]
    InvalidRejectProbability,
    #[error("inserted count {0} does not fit the wire format")]
    TooManyInserts(u32),
    #[error("signal payload malformed: {0}")]
    Malformed(&'static str),
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The two 64-bit halves of the keyed hash of a transaction id.
///
/// Probe `i` lands on bit `(h1 + i * h2) mod b`. Deriving the pair once
/// per transaction and reusing it keeps pool-wide signal scans cheap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignalKey {
    h1: u64,
    h2: u64,
}

impl SignalKey {
    pub fn from_id(id: &TxId) -> Self {
        let w = id.words();
        let mut h1 = KEY_A;
        let mut h2 = KEY_B;
        for &word in &w {
            h1 = mix64(h1 ^ word);
            h2 = mix64(h2 ^ word.rotate_left(32));
        }
        // An even h2 shared by b's factors would degenerate the probe
        // sequence; force it odd.
        SignalKey { h1, h2: h2 | 1 }
    }

    #[inline]
    fn position(&self, i: u32, bit_count: u32) -> u32 {
        (self
            .h1
            .wrapping_add((i as u64).wrapping_mul(self.h2))
            % bit_count as u64) as u32
    }
}

/// A Bloom filter of `b` bits probed by `h` derived hash positions.
///
/// Plain value semantics: cloning is a bit-array copy and no operation
/// touches shared state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BloomFilter {
    bits: Vec<u64>,
    bit_count: u32,
    num_hashes: u8,
    inserted: u32,
}

impl BloomFilter {
    /// Empty filter with `bit_count` bits and `num_hashes` probes.
    pub fn new(bit_count: u32, num_hashes: u8) -> Result<Self, BloomError> {
        if bit_count == 0 {
            return Err(BloomError::ZeroBits);
        }
        if num_hashes == 0 {
            return Err(BloomError::ZeroHashes);
        }
        Ok(BloomFilter {
            bits: vec![0u64; bit_count.div_ceil(64) as usize],
            bit_count,
            num_hashes,
            inserted: 0,
        })
    }

    pub fn bit_count(&self) -> u32 {
        self.bit_count
    }

    pub fn num_hashes(&self) -> u8 {
        self.num_hashes
    }

    /// Number of insert calls since creation.
    pub fn inserted_count(&self) -> u32 {
        self.inserted
    }

    /// Number of bits currently set.
    pub fn popcount(&self) -> u32 {
        self.bits.iter().map(|w| w.count_ones()).sum()
    }

    #[inline]
    fn set_bit(&mut self, pos: u32) {
        self.bits[(pos / 64) as usize] |= 1u64 << (pos % 64);
    }

    #[inline]
    fn get_bit(&self, pos: u32) -> bool {
        self.bits[(pos / 64) as usize] & (1u64 << (pos % 64)) != 0
    }

    /// Insert a transaction id.
    pub fn insert(&mut self, id: &TxId) {
        self.insert_key(&SignalKey::from_id(id));
    }

    /// Insert by precomputed key.
    pub fn insert_key(&mut self, key: &SignalKey) {
        for i in 0..self.num_hashes as u32 {
            self.set_bit(key.position(i, self.bit_count));
        }
        self.inserted += 1;
    }

    /// Membership query. `false` is definite; `true` may be a false
    /// positive with probability near [`false_positive_rate`].
    pub fn contains(&self, id: &TxId) -> bool {
        self.contains_key(&SignalKey::from_id(id))
    }

    /// Membership query by precomputed key.
    pub fn contains_key(&self, key: &SignalKey) -> bool {
        (0..self.num_hashes as u32).all(|i| self.get_bit(key.position(i, self.bit_count)))
    }

    /// Force every bit on, keeping `inserted_count` untouched. Used by
    /// attack models to build over-threshold signals.
    pub fn saturate(&mut self) {
        for w in &mut self.bits {
            *w = u64::MAX;
        }
        // Clear the padding bits beyond bit_count so popcount stays exact.
        let tail = self.bit_count % 64;
        if tail != 0 {
            if let Some(last) = self.bits.last_mut() {
                *last &= (1u64 << tail) - 1;
            }
        }
    }

    /// Serialize to the signal wire layout:
    /// `[magic "TIPS"][version u8][b u32 LE][h u8][inserted u16 LE][bits, ceil(b/8) bytes LSB-first]`.
    pub fn to_signal_bytes(&self) -> Result<Vec<u8>, BloomError> {
        if self.inserted > u16::MAX as u32 {
            return Err(BloomError::TooManyInserts(self.inserted));
        }
        let byte_len = self.bit_count.div_ceil(8) as usize;
        let mut out = Vec::with_capacity(12 + byte_len);
        out.extend_from_slice(&SIGNAL_MAGIC);
        out.push(SIGNAL_VERSION);
        out.extend_from_slice(&self.bit_count.to_le_bytes());
        out.push(self.num_hashes);
        out.extend_from_slice(&(self.inserted as u16).to_le_bytes());
        for j in 0..byte_len {
            let word = self.bits[j / 8];
            out.push((word >> (8 * (j % 8))) as u8);
        }
        Ok(out)
    }

    /// Parse the wire layout produced by [`to_signal_bytes`].
    pub fn from_signal_bytes(data: &[u8]) -> Result<Self, BloomError> {
        if data.len() < 12 {
            return Err(BloomError::Malformed("truncated header"));
        }
        if data[0..4] != SIGNAL_MAGIC {
            return Err(BloomError::Malformed("bad magic"));
        }
        if data[4] != SIGNAL_VERSION {
            return Err(BloomError::Malformed("unsupported version"));
        }
        let bit_count = u32::from_le_bytes([data[5], data[6], data[7], data[8]]);
        let num_hashes = data[9];
        let inserted = u16::from_le_bytes([data[10], data[11]]) as u32;
        let mut filter = BloomFilter::new(bit_count, num_hashes)
            .map_err(|_| BloomError::Malformed("zero dimensions"))?;
        let byte_len = bit_count.div_ceil(8) as usize;
        if data.len() != 12 + byte_len {
            return Err(BloomError::Malformed("payload length mismatch"));
        }
        for (j, &byte) in data[12..].iter().enumerate() {
            filter.bits[j / 8] |= (byte as u64) << (8 * (j % 8));
        }
        let tail = bit_count % 8;
        if tail != 0 && data[12 + byte_len - 1] >> tail != 0 {
            return Err(BloomError::Malformed("padding bits set"));
        }
        filter.inserted = inserted;
        Ok(filter)
    }
}

/// Analytic false-positive rate `(1 - e^{-hn/b})^h` of a `b`-bit filter
/// with `h` hashes after `n` inserts.
pub fn false_positive_rate(bit_count: u32, num_hashes: u8, inserted: u32) -> f64 {
    assert!(bit_count >= 1 && num_hashes >= 1);
    if inserted == 0 {
        return 0.0;
    }
    let exponent = -(num_hashes as f64) * inserted as f64 / bit_count as f64;
    (-(exponent.exp_m1())).powi(num_hashes as i32)
}

/// Popcount bound above which a filter claiming `n` inserts is treated as
/// a flood: `b - b(1 - 1/b)^{hn} + sqrt(-hn ln(eta) / 2)`.
///
/// `eta` is the probability of rejecting an honestly built filter; the
/// bound loosens as `eta` shrinks and collapses to the expected popcount
/// as `eta -> 1`.
pub fn flood_threshold(bit_count: u32, num_hashes: u8, inserted: u32, eta: f64) -> f64 {
    assert!(bit_count >= 1 && num_hashes >= 1);
    assert!(eta > 0.0 && eta <= 1.0, "eta must lie in (0, 1]");
    let b = bit_count as f64;
    let hn = num_hashes as f64 * inserted as f64;
    let expected_ones = b - b * (1.0 - 1.0 / b).powf(hn);
    expected_ones + (-0.5 * hn * eta.ln()).sqrt()
}

/// Flood-detector parameters a node applies to incoming signals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FloodPolicy {
    expected_bits: u32,
    expected_hashes: u8,
    expected_tx_count: u32,
    reject_prob_valid: f64,
    threshold: f64,
}

impl FloodPolicy {
    /// Policy for filters of the given dimensions carrying at most
    /// `expected_tx_count` transactions, tuned to reject an honest filter
    /// with probability at most `reject_prob_valid`.
    ///
    /// The popcount threshold is evaluated once here; validation is a
    /// popcount and one comparison.
    pub fn new(
        expected_bits: u32,
        expected_hashes: u8,
        expected_tx_count: u32,
        reject_prob_valid: f64,
    ) -> Result<Self, BloomError> {
        if !(reject_prob_valid > 0.0 && reject_prob_valid < 1.0) {
            return Err(BloomError::InvalidRejectProbability);
        }
        if expected_bits == 0 {
            return Err(BloomError::ZeroBits);
        }
        if expected_hashes == 0 {
            return Err(BloomError::ZeroHashes);
        }
        Ok(FloodPolicy {
            expected_bits,
            expected_hashes,
            expected_tx_count,
            reject_prob_valid,
            threshold: flood_threshold(
                expected_bits,
                expected_hashes,
                expected_tx_count,
                reject_prob_valid,
            ),
        })
    }

    pub fn expected_tx_count(&self) -> u32 {
        self.expected_tx_count
    }

    pub fn reject_prob_valid(&self) -> f64 {
        self.reject_prob_valid
    }

    /// The precomputed popcount bound.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }
}

/// Outcome of the flood check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Validation {
    Accept,
    /// Popcount at or above the policy threshold; ties reject.
    Reject,
}

/// Apply `policy` to `filter`. A dimension mismatch is an error, not a
/// rejection: it means the caller compared incompatible artifacts.
pub fn validate(filter: &BloomFilter, policy: &FloodPolicy) -> Result<Validation, BloomError> {
    if filter.bit_count != policy.expected_bits || filter.num_hashes != policy.expected_hashes {
        return Err(BloomError::DimensionMismatch {
            got_bits: filter.bit_count,
            got_hashes: filter.num_hashes,
            want_bits: policy.expected_bits,
            want_hashes: policy.expected_hashes,
        });
    }
    if (filter.popcount() as f64) >= policy.threshold {
        Ok(Validation::Reject)
    } else {
        Ok(Validation::Accept)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::rng::Stream;

    fn tx(n: u64) -> TxId {
        TxId::from_index(n, 0x5eed)
    }

    #[test]
    fn new_rejects_degenerate_dimensions() {
        assert_eq!(BloomFilter::new(0, 5).unwrap_err(), BloomError::ZeroBits);
        assert_eq!(BloomFilter::new(8, 0).unwrap_err(), BloomError::ZeroHashes);
        let f = BloomFilter::new(8, 1).unwrap();
        assert_eq!(f.popcount(), 0);
        assert_eq!(f.inserted_count(), 0);
    }

    #[test]
    fn no_false_negatives_and_idempotent_bits() {
        let mut f = BloomFilter::new(20_000, 5).unwrap();
        let keys: Vec<TxId> = (0..500).map(tx).collect();
        for k in &keys {
            f.insert(k);
        }
        for k in &keys {
            assert!(f.contains(k));
        }
        let pop = f.popcount();
        f.insert(&keys[0]);
        assert_eq!(f.popcount(), pop, "re-insert must not set new bits");
        assert_eq!(f.inserted_count(), 501);
    }

    #[test]
    fn empty_filter_contains_nothing() {
        let f = BloomFilter::new(1024, 3).unwrap();
        for i in 0..100 {
            assert!(!f.contains(&tx(i)));
        }
    }

    #[test]
    fn popcount_matches_expectation_over_seeds() {
        // E[popcount] = b(1 - (1 - 1/b)^{h n}); 9294.9 at b=20000, h=5,
        // n=2500 and 7869.5 at n=2000. Averaged over 100 filters the
        // standard error is ~3, so +-20 is a >5 sigma band.
        for (n, expect) in [(2500u64, 9294.9), (2000, 7869.5)] {
            let mut sum = 0.0;
            for seed in 0..100u64 {
                let mut f = BloomFilter::new(20_000, 5).unwrap();
                for i in 0..n {
                    f.insert(&TxId::from_index(i, seed * 7919 + 1));
                }
                sum += f.popcount() as f64;
            }
            let mean = sum / 100.0;
            assert!(
                (mean - expect).abs() < 20.0,
                "n={n}: mean popcount {mean} vs expected {expect}"
            );
        }
    }

    #[test]
    fn empirical_fpr_tracks_formula() {
        // 1e5 probes per point; pass band is 3 standard errors plus the
        // small double-hashing bias.
        let cases = [
            (20_000u32, 5u8, 2500u32),
            (20_000, 5, 2000),
            (16_384, 3, 1000),
            (8_192, 4, 4096),
        ];
        for (b, h, n) in cases {
            let mut f = BloomFilter::new(b, h).unwrap();
            for i in 0..n as u64 {
                f.insert(&tx(i));
            }
            let probes = 100_000u64;
            let mut hits = 0u64;
            for i in 0..probes {
                if f.contains(&tx(1_000_000 + i)) {
                    hits += 1;
                }
            }
            let rate = hits as f64 / probes as f64;
            let expect = false_positive_rate(b, h, n);
            let se = (expect * (1.0 - expect) / probes as f64).sqrt();
            assert!(
                (rate - expect).abs() < 3.0 * se + 0.1 * expect,
                "(b={b},h={h},n={n}): empirical {rate} vs {expect} (se {se})"
            );
        }
    }

    #[test]
    fn analytic_fpr_known_values() {
        assert!((false_positive_rate(20_000, 5, 2500) - 0.021_679_2).abs() < 1e-6);
        assert!((false_positive_rate(20_000, 5, 2000) - 0.009_430_9).abs() < 1e-6);
        assert_eq!(false_positive_rate(20_000, 5, 0), 0.0);
    }

    #[test]
    fn analytic_fpr_monotone_grid() {
        for h in [1u8, 3, 5, 8] {
            let mut prev = 0.0;
            for n in (0..=4000).step_by(250) {
                let cur = false_positive_rate(20_000, h, n);
                assert!(cur >= prev, "fpr must be non-decreasing in n");
                prev = cur;
            }
            for n in [500u32, 2000, 4000] {
                let mut prev = f64::INFINITY;
                for b in [5_000u32, 10_000, 20_000, 40_000, 80_000] {
                    let cur = false_positive_rate(b, h, n);
                    assert!(cur < prev, "fpr must be strictly decreasing in b");
                    prev = cur;
                }
            }
        }
    }

    #[test]
    fn flood_threshold_values() {
        // 7869.5 expected ones plus the 214.6 slack term at eta = 1e-4.
        let t = flood_threshold(20_000, 5, 2000, 1e-4);
        assert!((t - 8084.1).abs() < 0.5, "got {t}");
        // As eta -> 1 the slack vanishes and the threshold is the mean.
        let mean_only = flood_threshold(20_000, 5, 2000, 1.0);
        assert!((mean_only - 7869.5).abs() < 0.1);
    }

    #[test]
    fn validate_accepts_honest_rejects_saturated() {
        let policy = FloodPolicy::new(20_000, 5, 2000, 1e-4).unwrap();
        let mut honest = BloomFilter::new(20_000, 5).unwrap();
        for i in 0..2000 {
            honest.insert(&tx(i));
        }
        assert_eq!(validate(&honest, &policy).unwrap(), Validation::Accept);

        let empty = BloomFilter::new(20_000, 5).unwrap();
        assert_eq!(validate(&empty, &policy).unwrap(), Validation::Accept);

        let mut flooded = BloomFilter::new(20_000, 5).unwrap();
        flooded.saturate();
        assert_eq!(flooded.popcount(), 20_000);
        assert_eq!(validate(&flooded, &policy).unwrap(), Validation::Reject);

        let other = BloomFilter::new(10_000, 5).unwrap();
        assert!(matches!(
            validate(&other, &policy),
            Err(BloomError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn honest_filters_rarely_rejected() {
        // True rejection rate under the threshold is orders of magnitude
        // below eta; 2000 honest filters should all pass.
        let policy = FloodPolicy::new(20_000, 5, 2000, 1e-4).unwrap();
        let mut rejects = 0;
        for seed in 0..2000u64 {
            let mut f = BloomFilter::new(20_000, 5).unwrap();
            for i in 0..2000u64 {
                f.insert(&TxId::from_index(i, seed + 1));
            }
            if validate(&f, &policy).unwrap() == Validation::Reject {
                rejects += 1;
            }
        }
        assert_eq!(rejects, 0);
    }

    #[test]
    fn policy_rejects_bad_eta() {
        assert!(FloodPolicy::new(20_000, 5, 2000, 0.0).is_err());
        assert!(FloodPolicy::new(20_000, 5, 2000, 1.0).is_err());
    }

    #[test]
    fn deterministic_positions_across_instances() {
        let id = tx(42);
        let k1 = SignalKey::from_id(&id);
        let k2 = SignalKey::from_id(&id);
        assert_eq!(k1, k2);
        let mut a = BloomFilter::new(4096, 7).unwrap();
        let mut b = BloomFilter::new(4096, 7).unwrap();
        a.insert(&id);
        b.insert_key(&k1);
        assert_eq!(a, b);
    }

    #[test]
    fn wire_layout_is_pinned() {
        let mut f = BloomFilter::new(20_000, 5).unwrap();
        for i in 0..2000 {
            f.insert(&tx(i));
        }
        let bytes = f.to_signal_bytes().unwrap();
        assert_eq!(bytes.len(), 2512);
        assert_eq!(&bytes[0..4], b"TIPS");
        assert_eq!(bytes[4], 1);
        assert_eq!(u32::from_le_bytes([bytes[5], bytes[6], bytes[7], bytes[8]]), 20_000);
        assert_eq!(bytes[9], 5);
        assert_eq!(u16::from_le_bytes([bytes[10], bytes[11]]), 2000);
        let back = BloomFilter::from_signal_bytes(&bytes).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn wire_rejects_malformed_payloads() {
        let f = BloomFilter::new(64, 2).unwrap();
        let good = f.to_signal_bytes().unwrap();
        assert!(BloomFilter::from_signal_bytes(&good[..8]).is_err());
        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(BloomFilter::from_signal_bytes(&bad_magic).is_err());
        let mut bad_version = good.clone();
        bad_version[4] = 9;
        assert!(BloomFilter::from_signal_bytes(&bad_version).is_err());
        let mut truncated = good.clone();
        truncated.pop();
        assert!(BloomFilter::from_signal_bytes(&truncated).is_err());
    }

    #[test]
    fn wire_round_trip_random_filters() {
        let mut rng = Stream::new(7, &[1]);
        for case in 0..50u32 {
            let bits = 1 + (rng.next_u64() % 3000) as u32;
            let hashes = 1 + (rng.next_u64() % 8) as u8;
            let mut f = BloomFilter::new(bits, hashes).unwrap();
            for i in 0..(case as u64 * 3) {
                f.insert(&tx(i));
            }
            let bytes = f.to_signal_bytes().unwrap();
            assert_eq!(BloomFilter::from_signal_bytes(&bytes).unwrap(), f);
        }
    }
}
