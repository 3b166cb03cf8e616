//! Node state machine: DAG ledger, expected-value transaction pool, and
//! the event handlers for header-first block propagation.
//!
//! A node reacts to five events: a transaction arrives, a block header
//! (signal) arrives, a block body arrives, a header times out, and the
//! node itself mines a block. Pool entries never store their expected
//! value; the value is always derived as `fee * epsilon^k` where `k` is
//! the number of live signals hitting the entry, so any sequence of
//! suppress/restore events that cancels out restores the fee bit-exactly.

use crate::bloom::{self, BloomFilter, FloodPolicy, SignalKey, Validation};
use std::collections::{BTreeSet, BinaryHeap, HashMap, HashSet};
use std::cmp::Reverse;
use thiserror::Error;

/// Opaque 32-byte transaction identifier.
///
/// The simulator packs a dense index into the first eight bytes and
/// fills the rest with seeded mixing, so ids stay unique, look random to
/// the signal hash, and remain recoverable as table indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TxId(pub [u8; 32]);

impl TxId {
    pub fn from_index(index: u64, garnish_seed: u64) -> Self {
        fn mix(mut z: u64) -> u64 {
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
            z ^ (z >> 31)
        }
        let mut bytes = [0u8; 32];
        bytes[0..8].copy_from_slice(&index.to_le_bytes());
        let mut state = garnish_seed ^ index;
        for chunk in 1..4 {
            state = mix(state.wrapping_add(0x9e37_79b9_7f4a_7c15));
            bytes[chunk * 8..(chunk + 1) * 8].copy_from_slice(&state.to_le_bytes());
        }
        TxId(bytes)
    }

    /// Dense index packed by [`from_index`].
    pub fn index(&self) -> u64 {
        u64::from_le_bytes(self.0[0..8].try_into().unwrap())
    }

    /// The id as four little-endian words, the unit the signal hash eats.
    pub fn words(&self) -> [u64; 4] {
        let mut w = [0u64; 4];
        for (i, slot) in w.iter_mut().enumerate() {
            *slot = u64::from_le_bytes(self.0[i * 8..(i + 1) * 8].try_into().unwrap());
        }
        w
    }
}

impl std::fmt::Display for TxId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in &self.0[0..8] {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

/// Block identifier, unique per run. Id 0 is the genesis placeholder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockId(pub u64);

impl BlockId {
    pub const GENESIS: BlockId = BlockId(0);
}

/// Miner identifier within a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MinerId(pub u32);

#[derive(Debug, Clone, PartialEq)]
pub struct Transaction {
    pub id: TxId,
    /// Fee in coin units; non-negative.
    pub fee: f64,
    /// Simulation time at which the transaction entered the network.
    pub arrival_time: f64,
    pub size_bytes: u32,
}

/// Block header: the part that travels fast and carries the signal.
#[derive(Debug, Clone)]
pub struct BlockHeader {
    pub id: BlockId,
    pub miner: MinerId,
    pub mine_time: f64,
    pub parent_ids: Vec<BlockId>,
    pub signal: BloomFilter,
    /// Abstracted proof-of-work check result.
    pub pow_valid: bool,
}

/// Block body: the transaction list, delivered after the header.
#[derive(Debug, Clone)]
pub struct BlockBody {
    pub header_id: BlockId,
    pub tx_ids: Vec<TxId>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("block selects {got} transactions, capacity is {cap}")]
    BlockOverCapacity { got: usize, cap: usize },
    #[error("selected transaction {0} is not in the pool")]
    UnknownPoolEntry(TxId),
    #[error(transparent)]
    Bloom(#[from] bloom::BloomError),
}

/// A pooled transaction plus the live signals currently hitting it.
#[derive(Debug, Clone)]
pub struct PoolEntry {
    pub tx: Transaction,
    signal_key: SignalKey,
    pending_signals: Vec<BlockId>,
}

impl PoolEntry {
    fn new(tx: Transaction) -> Self {
        let signal_key = SignalKey::from_id(&tx.id);
        PoolEntry { tx, signal_key, pending_signals: Vec::new() }
    }

    pub fn base_fee(&self) -> f64 {
        self.tx.fee
    }

    pub fn pending_signals(&self) -> &[BlockId] {
        &self.pending_signals
    }

    /// `fee * epsilon^k`: the fee discounted once per live signal.
    pub fn expected_value(&self, epsilon: f64) -> f64 {
        debug_assert!(epsilon > 0.0 && epsilon < 1.0);
        self.tx.fee * epsilon.powi(self.pending_signals.len() as i32)
    }
}

/// Sorted-pool view handed to inclusion strategies.
#[derive(Debug, Clone, Copy)]
pub struct PoolEntryView {
    pub id: TxId,
    pub value: f64,
    pub fee: f64,
}

/// Protocol parameters a node runs with.
#[derive(Debug, Clone)]
pub struct ProtocolConfig {
    /// Nominal signal false-positive rate used for value updates.
    pub epsilon: f64,
    /// Pool capacity `m`.
    pub pool_capacity: usize,
    /// Block capacity `n`.
    pub block_capacity: usize,
    /// Header timeout `T` in seconds.
    pub header_timeout: f64,
    pub bloom_bits: u32,
    pub bloom_hashes: u8,
    /// Flood detector applied to incoming headers, when enabled.
    pub flood_policy: Option<FloodPolicy>,
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(format!("epsilon must lie in (0,1), got {}", self.epsilon));
        }
        if self.block_capacity == 0 || self.pool_capacity < self.block_capacity {
            return Err(format!(
                "need 1 <= n <= m, got n={} m={}",
                self.block_capacity, self.pool_capacity
            ));
        }
        if self.header_timeout <= 0.0 {
            return Err("header timeout must be positive".into());
        }
        if self.bloom_bits == 0 || self.bloom_hashes == 0 {
            return Err("bloom dimensions must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TxOutcome {
    /// Entered the pool; carries the id evicted to make room, if any.
    Inserted { evicted: Option<TxId> },
    /// Same id already pooled; nothing changed.
    Duplicate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeaderOutcome {
    /// Valid and new: signals applied to `suppressed` pool entries.
    Accepted { suppressed: usize },
    RejectedPow,
    /// Flood detector fired; no pool effect.
    RejectedFlood,
    Duplicate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BodyOutcome {
    /// Valid body: `removed` entries left the pool, `restored` entries
    /// had this header's signal lifted.
    Accepted { removed: usize, restored: usize },
    /// No header on record for this body.
    RejectedUnknownHeader,
    /// Header already expired or previously invalidated.
    RejectedClosed,
    /// A transaction in the body misses the header signal, or the signal
    /// fails the flood check; all suppressed values restored.
    RejectedMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpiryOutcome {
    /// Header moved to the expired set; `restored` entries released.
    Expired { restored: usize },
    /// Header was not awaiting (already resolved or never seen).
    NoOp,
}

/// A header received and validated, body still outstanding.
#[derive(Debug, Clone)]
struct AwaitingHeader {
    header: BlockHeader,
    expiry: f64,
    /// Pool entries whose value this signal suppressed.
    hits: Vec<TxId>,
}

/// Accepted block as the ledger keeps it.
#[derive(Debug, Clone)]
pub struct LedgerBlock {
    pub id: BlockId,
    pub miner: MinerId,
    pub mine_time: f64,
    pub parent_ids: Vec<BlockId>,
    pub tx_count: usize,
}

/// Append-only DAG of accepted blocks.
#[derive(Debug, Clone, Default)]
pub struct Ledger {
    blocks: HashMap<BlockId, LedgerBlock>,
    child_count: HashMap<BlockId, u32>,
    tips: BTreeSet<BlockId>,
}

impl Ledger {
    fn new() -> Self {
        let mut ledger = Ledger::default();
        ledger.blocks.insert(
            BlockId::GENESIS,
            LedgerBlock {
                id: BlockId::GENESIS,
                miner: MinerId(u32::MAX),
                mine_time: 0.0,
                parent_ids: Vec::new(),
                tx_count: 0,
            },
        );
        ledger.tips.insert(BlockId::GENESIS);
        ledger
    }

    fn accept(&mut self, id: BlockId, miner: MinerId, mine_time: f64, parents: &[BlockId], tx_count: usize) {
        debug_assert!(!self.blocks.contains_key(&id));
        for p in parents {
            *self.child_count.entry(*p).or_insert(0) += 1;
            self.tips.remove(p);
        }
        self.blocks.insert(
            id,
            LedgerBlock { id, miner, mine_time, parent_ids: parents.to_vec(), tx_count },
        );
        if self.child_count.get(&id).copied().unwrap_or(0) == 0 {
            self.tips.insert(id);
        }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn contains(&self, id: BlockId) -> bool {
        self.blocks.contains_key(&id)
    }

    pub fn block(&self, id: BlockId) -> Option<&LedgerBlock> {
        self.blocks.get(&id)
    }

    /// Current tips (accepted blocks with no accepted children), sorted.
    pub fn tips(&self) -> Vec<BlockId> {
        self.tips.iter().copied().collect()
    }
}

/// Heap key for eviction: smallest expected value first, then smallest id.
/// Non-negative f64 bit patterns order like the floats themselves.
fn value_bits(v: f64) -> u64 {
    debug_assert!(v >= 0.0);
    v.to_bits()
}

/// Full node state: ledger, pool, and in-flight headers.
#[derive(Debug, Clone)]
pub struct NodeState {
    config: ProtocolConfig,
    ledger: Ledger,
    pool: HashMap<TxId, PoolEntry>,
    awaiting: HashMap<BlockId, AwaitingHeader>,
    /// Headers no longer actionable: expired, or invalidated by a bad body.
    closed: HashSet<BlockId>,
    seen_headers: HashSet<BlockId>,
    /// Lazy min-heap over (value, id); stale records are skipped on pop.
    eviction: BinaryHeap<Reverse<(u64, TxId)>>,
}

impl NodeState {
    pub fn new(config: ProtocolConfig) -> Self {
        config.validate().expect("invalid protocol config");
        NodeState {
            config,
            ledger: Ledger::new(),
            pool: HashMap::new(),
            awaiting: HashMap::new(),
            closed: HashSet::new(),
            seen_headers: HashSet::new(),
            eviction: BinaryHeap::new(),
        }
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.config
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn pool_len(&self) -> usize {
        self.pool.len()
    }

    pub fn pool_entry(&self, id: &TxId) -> Option<&PoolEntry> {
        self.pool.get(id)
    }

    pub fn awaiting_len(&self) -> usize {
        self.awaiting.len()
    }

    pub fn is_awaiting(&self, id: BlockId) -> bool {
        self.awaiting.contains_key(&id)
    }

    /// Pool sorted by descending expected value, ties by ascending id.
    /// This is the order inclusion strategies index into.
    pub fn sorted_pool(&self) -> Vec<PoolEntryView> {
        let eps = self.config.epsilon;
        let mut views: Vec<PoolEntryView> = self
            .pool
            .values()
            .map(|e| PoolEntryView { id: e.tx.id, value: e.expected_value(eps), fee: e.tx.fee })
            .collect();
        views.sort_unstable_by(|a, b| {
            b.value.total_cmp(&a.value).then_with(|| a.id.cmp(&b.id))
        });
        views
    }

    /// Deterministic snapshot of (id, expected value), sorted by id.
    pub fn pool_snapshot(&self) -> Vec<(TxId, f64)> {
        let eps = self.config.epsilon;
        let mut snap: Vec<(TxId, f64)> =
            self.pool.iter().map(|(id, e)| (*id, e.expected_value(eps))).collect();
        snap.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        snap
    }

    fn push_eviction_key(&mut self, id: TxId) {
        let value = self.pool[&id].expected_value(self.config.epsilon);
        self.eviction.push(Reverse((value_bits(value), id)));
        // Stale records accumulate as values change; rebuild occasionally.
        if self.eviction.len() > 8 * self.config.pool_capacity.max(1024) {
            self.rebuild_eviction_heap();
        }
    }

    fn rebuild_eviction_heap(&mut self) {
        let eps = self.config.epsilon;
        self.eviction = self
            .pool
            .iter()
            .map(|(id, e)| Reverse((value_bits(e.expected_value(eps)), *id)))
            .collect();
    }

    /// Pop heap records until one matches a live entry's current value;
    /// that entry is the true minimum under (value, id) order.
    fn evict_lowest(&mut self) -> Option<TxId> {
        let eps = self.config.epsilon;
        while let Some(Reverse((bits, id))) = self.eviction.pop() {
            match self.pool.get(&id) {
                Some(entry) if value_bits(entry.expected_value(eps)) == bits => {
                    self.pool.remove(&id);
                    return Some(id);
                }
                _ => {} // stale record
            }
        }
        None
    }

    /// Transaction arrival: pool it at its fee, evicting the lowest-value
    /// entry if the pool overflows. Re-delivery of a pooled id is a no-op.
    pub fn receive_transaction(&mut self, tx: Transaction) -> TxOutcome {
        debug_assert!(tx.fee >= 0.0, "negative fee");
        if self.pool.contains_key(&tx.id) {
            return TxOutcome::Duplicate;
        }
        let id = tx.id;
        self.pool.insert(id, PoolEntry::new(tx));
        self.push_eviction_key(id);
        let evicted = if self.pool.len() > self.config.pool_capacity {
            self.evict_lowest()
        } else {
            None
        };
        TxOutcome::Inserted { evicted }
    }

    /// Header arrival: validate, suppress the expected value of every
    /// pool entry the signal hits, and start the body timeout clock.
    pub fn receive_header(
        &mut self,
        header: &BlockHeader,
        now: f64,
    ) -> Result<HeaderOutcome, ProtocolError> {
        if !header.pow_valid {
            return Ok(HeaderOutcome::RejectedPow);
        }
        if self.seen_headers.contains(&header.id) {
            return Ok(HeaderOutcome::Duplicate);
        }
        if let Some(policy) = &self.config.flood_policy {
            if bloom::validate(&header.signal, policy)? == Validation::Reject {
                self.seen_headers.insert(header.id);
                return Ok(HeaderOutcome::RejectedFlood);
            }
        }
        self.seen_headers.insert(header.id);

        let mut hits: Vec<TxId> = self
            .pool
            .values()
            .filter(|e| header.signal.contains_key(&e.signal_key))
            .map(|e| e.tx.id)
            .collect();
        hits.sort_unstable();
        for id in &hits {
            let entry = self.pool.get_mut(id).expect("hit entry present");
            entry.pending_signals.push(header.id);
            self.push_eviction_key(*id);
        }
        let suppressed = hits.len();
        self.awaiting.insert(
            header.id,
            AwaitingHeader {
                header: header.clone(),
                expiry: now + self.config.header_timeout,
                hits,
            },
        );
        Ok(HeaderOutcome::Accepted { suppressed })
    }

    /// Remove `header_id` from an entry's pending set, if both survive.
    fn release_signal(&mut self, tx_id: TxId, header_id: BlockId) -> bool {
        if let Some(entry) = self.pool.get_mut(&tx_id) {
            if let Some(pos) = entry.pending_signals.iter().position(|b| *b == header_id) {
                entry.pending_signals.swap_remove(pos);
                self.push_eviction_key(tx_id);
                return true;
            }
        }
        false
    }

    /// Body arrival. Requires the header to be on record and unexpired;
    /// validates every body transaction against the signal, then settles
    /// the suppressed values and the ledger.
    pub fn receive_body(&mut self, body: &BlockBody, _now: f64) -> BodyOutcome {
        if self.closed.contains(&body.header_id) {
            return BodyOutcome::RejectedClosed;
        }
        let Some(awaiting) = self.awaiting.get(&body.header_id) else {
            return BodyOutcome::RejectedUnknownHeader;
        };

        let signal_ok = body.tx_ids.len() <= self.config.block_capacity
            && body.tx_ids.iter().all(|id| awaiting.header.signal.contains(id));
        if !signal_ok {
            // Invalid body: lift this signal from every entry it hit and
            // keep the block out of the ledger for good.
            let awaiting = self.awaiting.remove(&body.header_id).expect("checked above");
            let mut restored = 0;
            for id in &awaiting.hits {
                if self.release_signal(*id, body.header_id) {
                    restored += 1;
                }
            }
            let _ = restored;
            self.closed.insert(body.header_id);
            return BodyOutcome::RejectedMismatch;
        }

        let awaiting = self.awaiting.remove(&body.header_id).expect("checked above");
        let mut removed = 0;
        for id in &body.tx_ids {
            if self.pool.remove(id).is_some() {
                removed += 1;
            }
        }
        // Entries hit by the signal but absent from the body are the
        // false positives; their value goes back up one epsilon step.
        let mut restored = 0;
        for id in &awaiting.hits {
            if self.release_signal(*id, body.header_id) {
                restored += 1;
            }
        }
        let header = &awaiting.header;
        self.ledger.accept(header.id, header.miner, header.mine_time, &header.parent_ids, body.tx_ids.len());
        BodyOutcome::Accepted { removed, restored }
    }

    /// Header timeout: release every suppression this header caused and
    /// refuse its body from now on.
    pub fn header_expired(&mut self, header_id: BlockId, now: f64) -> ExpiryOutcome {
        let due = match self.awaiting.get(&header_id) {
            Some(awaiting) if now >= awaiting.expiry => true,
            _ => false,
        };
        if !due {
            return ExpiryOutcome::NoOp;
        }
        let awaiting = self.awaiting.remove(&header_id).expect("checked above");
        let mut restored = 0;
        for id in &awaiting.hits {
            if self.release_signal(*id, header_id) {
                restored += 1;
            }
        }
        self.closed.insert(header_id);
        ExpiryOutcome::Expired { restored }
    }

    /// Scheduled expiry time of an awaiting header, if any.
    pub fn awaiting_expiry(&self, header_id: BlockId) -> Option<f64> {
        self.awaiting.get(&header_id).map(|a| a.expiry)
    }

    /// Mine a block over `chosen` pool transactions: build the signal,
    /// reference every current tip, accept the block locally, and drop
    /// the chosen transactions from the own pool.
    pub fn mine_block(
        &mut self,
        id: BlockId,
        miner: MinerId,
        now: f64,
        chosen: &[TxId],
    ) -> Result<(BlockHeader, BlockBody), ProtocolError> {
        if chosen.len() > self.config.block_capacity {
            return Err(ProtocolError::BlockOverCapacity {
                got: chosen.len(),
                cap: self.config.block_capacity,
            });
        }
        let mut signal = BloomFilter::new(self.config.bloom_bits, self.config.bloom_hashes)?;
        for tx_id in chosen {
            let entry = self
                .pool
                .get(tx_id)
                .ok_or(ProtocolError::UnknownPoolEntry(*tx_id))?;
            signal.insert_key(&entry.signal_key);
        }
        let header = BlockHeader {
            id,
            miner,
            mine_time: now,
            parent_ids: self.ledger.tips(),
            signal,
            pow_valid: true,
        };
        let body = BlockBody { header_id: id, tx_ids: chosen.to_vec() };
        for tx_id in chosen {
            self.pool.remove(tx_id);
        }
        self.ledger.accept(id, miner, now, &header.parent_ids, chosen.len());
        self.seen_headers.insert(id);
        Ok((header, body))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(eps: f64, m: usize, n: usize) -> ProtocolConfig {
        ProtocolConfig {
            epsilon: eps,
            pool_capacity: m,
            block_capacity: n,
            header_timeout: 30.0,
            bloom_bits: 4096,
            bloom_hashes: 5,
            flood_policy: None,
        }
    }

    fn tx(i: u64, fee: f64) -> Transaction {
        Transaction { id: TxId::from_index(i, 99), fee, arrival_time: 0.0, size_bytes: 500 }
    }

    /// Header whose signal covers exactly `ids`.
    fn header_over(node: &NodeState, id: u64, ids: &[TxId]) -> BlockHeader {
        let mut signal =
            BloomFilter::new(node.config().bloom_bits, node.config().bloom_hashes).unwrap();
        for t in ids {
            signal.insert(t);
        }
        BlockHeader {
            id: BlockId(id),
            miner: MinerId(1),
            mine_time: 0.0,
            parent_ids: vec![BlockId::GENESIS],
            signal,
            pow_valid: true,
        }
    }

    #[test]
    fn arrival_sets_value_to_fee() {
        let mut node = NodeState::new(config(0.02, 10, 5));
        let t = tx(1, 0.7);
        assert_eq!(node.receive_transaction(t.clone()), TxOutcome::Inserted { evicted: None });
        let entry = node.pool_entry(&t.id).unwrap();
        assert_eq!(entry.expected_value(0.02), 0.7);
        assert_eq!(node.receive_transaction(t), TxOutcome::Duplicate);
        assert_eq!(node.pool_len(), 1);
    }

    #[test]
    fn overflow_drops_lowest_value() {
        let mut node = NodeState::new(config(0.02, 3, 2));
        for (i, fee) in [(1u64, 0.5), (2, 0.9), (3, 0.7)] {
            node.receive_transaction(tx(i, fee));
        }
        // Incoming fee below the current minimum: the newcomer is evicted.
        let low = tx(4, 0.1);
        let out = node.receive_transaction(low.clone());
        assert_eq!(out, TxOutcome::Inserted { evicted: Some(low.id) });
        assert_eq!(node.pool_len(), 3);
        // Incoming fee above the minimum: the old minimum goes.
        let out = node.receive_transaction(tx(5, 0.8));
        assert_eq!(out, TxOutcome::Inserted { evicted: Some(tx(1, 0.5).id) });
    }

    #[test]
    fn pool_tracks_top_m_fees_against_brute_force() {
        let mut node = NodeState::new(config(0.02, 16, 8));
        let mut reference: Vec<(u64, f64)> = Vec::new();
        let mut state = 0x1234_5678_u64;
        for i in 0..400u64 {
            state = state.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1);
            let fee = (state >> 11) as f64 / (1u64 << 53) as f64;
            node.receive_transaction(tx(i, fee));
            reference.push((i, fee));
            reference.sort_by(|a, b| b.1.total_cmp(&a.1));
            reference.truncate(16);
        }
        let mut got: Vec<u64> = node.sorted_pool().iter().map(|v| v.id.index()).collect();
        got.sort_unstable();
        let mut want: Vec<u64> = reference.iter().map(|(i, _)| *i).collect();
        want.sort_unstable();
        assert_eq!(got, want);
    }

    #[test]
    fn header_suppresses_hits_once_each() {
        let mut node = NodeState::new(config(0.1, 10, 5));
        let a = tx(3, 1.0);
        let b = tx(9, 0.5);
        let c = tx(4, 0.8);
        for t in [&a, &b, &c] {
            node.receive_transaction(t.clone());
        }
        let h = header_over(&node, 1, &[a.id, b.id]);
        let out = node.receive_header(&h, 5.0).unwrap();
        assert!(matches!(out, HeaderOutcome::Accepted { suppressed } if suppressed >= 2));
        assert!((node.pool_entry(&a.id).unwrap().expected_value(0.1) - 0.1).abs() < 1e-15);
        assert!((node.pool_entry(&b.id).unwrap().expected_value(0.1) - 0.05).abs() < 1e-15);
        // c may only be touched by a false positive; with 4096 bits and
        // two inserts that has negligible probability.
        assert_eq!(node.pool_entry(&c.id).unwrap().expected_value(0.1), 0.8);
        // Re-delivery changes nothing.
        assert_eq!(node.receive_header(&h, 6.0).unwrap(), HeaderOutcome::Duplicate);
        assert!((node.pool_entry(&a.id).unwrap().expected_value(0.1) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn empty_signal_header_touches_nothing() {
        let mut node = NodeState::new(config(0.1, 10, 5));
        let a = tx(1, 0.6);
        node.receive_transaction(a.clone());
        let h = header_over(&node, 1, &[]);
        let out = node.receive_header(&h, 0.0).unwrap();
        assert_eq!(out, HeaderOutcome::Accepted { suppressed: 0 });
        assert_eq!(node.pool_entry(&a.id).unwrap().expected_value(0.1), 0.6);
    }

    #[test]
    fn two_signals_compose_multiplicatively() {
        let mut node = NodeState::new(config(0.1, 10, 5));
        let a = tx(3, 1.0);
        node.receive_transaction(a.clone());
        let h1 = header_over(&node, 1, &[a.id]);
        let h2 = header_over(&node, 2, &[a.id]);
        node.receive_header(&h1, 0.0).unwrap();
        node.receive_header(&h2, 0.0).unwrap();
        let v = node.pool_entry(&a.id).unwrap().expected_value(0.1);
        assert!((v - 0.01).abs() < 1e-15, "expected eps^2 composition, got {v}");
        // One expiry leaves one live signal.
        let out = node.header_expired(h1.id, 100.0);
        assert_eq!(out, ExpiryOutcome::Expired { restored: 1 });
        let v = node.pool_entry(&a.id).unwrap().expected_value(0.1);
        assert!((v - 0.1).abs() < 1e-15);
    }

    #[test]
    fn pow_invalid_header_rejected() {
        let mut node = NodeState::new(config(0.1, 10, 5));
        let a = tx(1, 0.9);
        node.receive_transaction(a.clone());
        let mut h = header_over(&node, 1, &[a.id]);
        h.pow_valid = false;
        assert_eq!(node.receive_header(&h, 0.0).unwrap(), HeaderOutcome::RejectedPow);
        assert_eq!(node.pool_entry(&a.id).unwrap().expected_value(0.1), 0.9);
        assert_eq!(node.awaiting_len(), 0);
    }

    #[test]
    fn matching_body_removes_and_settles() {
        let mut node = NodeState::new(config(0.1, 10, 5));
        let a = tx(1, 0.9);
        let b = tx(2, 0.4);
        node.receive_transaction(a.clone());
        node.receive_transaction(b.clone());
        let h = header_over(&node, 1, &[a.id, b.id]);
        node.receive_header(&h, 0.0).unwrap();
        let body = BlockBody { header_id: h.id, tx_ids: vec![a.id, b.id] };
        let out = node.receive_body(&body, 1.0);
        assert!(matches!(out, BodyOutcome::Accepted { removed: 2, .. }));
        assert_eq!(node.pool_len(), 0);
        assert!(node.ledger().contains(h.id));
        assert_eq!(node.awaiting_len(), 0);
    }

    #[test]
    fn false_positive_value_restored_by_body() {
        let mut node = NodeState::new(config(0.1, 10, 5));
        let included = tx(1, 0.9);
        let fp = tx(2, 0.6);
        node.receive_transaction(included.clone());
        node.receive_transaction(fp.clone());
        // Signal deliberately covers both, body carries only one.
        let h = header_over(&node, 1, &[included.id, fp.id]);
        node.receive_header(&h, 0.0).unwrap();
        assert!((node.pool_entry(&fp.id).unwrap().expected_value(0.1) - 0.06).abs() < 1e-15);
        let body = BlockBody { header_id: h.id, tx_ids: vec![included.id] };
        node.receive_body(&body, 1.0);
        // Restored exactly to the base fee, no drift.
        assert_eq!(node.pool_entry(&fp.id).unwrap().expected_value(0.1), 0.6);
    }

    #[test]
    fn invalid_body_restores_all_and_excludes_block() {
        let mut node = NodeState::new(config(0.1, 10, 5));
        let a = tx(1, 0.9);
        let stranger = tx(7, 0.5);
        node.receive_transaction(a.clone());
        let h = header_over(&node, 1, &[a.id]);
        node.receive_header(&h, 0.0).unwrap();
        // Body contains a transaction the signal does not cover.
        let body = BlockBody { header_id: h.id, tx_ids: vec![a.id, stranger.id] };
        assert_eq!(node.receive_body(&body, 1.0), BodyOutcome::RejectedMismatch);
        assert_eq!(node.pool_entry(&a.id).unwrap().expected_value(0.1), 0.9);
        assert!(!node.ledger().contains(h.id));
        // The header is closed; a corrected body is too late.
        let body2 = BlockBody { header_id: h.id, tx_ids: vec![a.id] };
        assert_eq!(node.receive_body(&body2, 2.0), BodyOutcome::RejectedClosed);
    }

    #[test]
    fn body_without_header_rejected() {
        let mut node = NodeState::new(config(0.1, 10, 5));
        let body = BlockBody { header_id: BlockId(5), tx_ids: vec![] };
        assert_eq!(node.receive_body(&body, 0.0), BodyOutcome::RejectedUnknownHeader);
    }

    #[test]
    fn expiry_restores_and_blocks_late_body() {
        let mut node = NodeState::new(config(0.1, 10, 5));
        let a = tx(5, 0.9);
        node.receive_transaction(a.clone());
        let h = header_over(&node, 1, &[a.id]);
        node.receive_header(&h, 0.0).unwrap();
        // Not yet due.
        assert_eq!(node.header_expired(h.id, 10.0), ExpiryOutcome::NoOp);
        assert_eq!(node.header_expired(h.id, 30.0), ExpiryOutcome::Expired { restored: 1 });
        assert_eq!(node.pool_entry(&a.id).unwrap().expected_value(0.1), 0.9);
        // Body 0.1 s after expiry: rejected.
        let body = BlockBody { header_id: h.id, tx_ids: vec![a.id] };
        assert_eq!(node.receive_body(&body, 30.1), BodyOutcome::RejectedClosed);
        // Unknown header id: no-op.
        assert_eq!(node.header_expired(BlockId(77), 50.0), ExpiryOutcome::NoOp);
    }

    #[test]
    fn mining_builds_signal_and_references_tips() {
        let mut node = NodeState::new(config(0.1, 20, 5));
        let txs: Vec<Transaction> = (0..5).map(|i| tx(i, 0.5 + i as f64 * 0.01)).collect();
        for t in &txs {
            node.receive_transaction(t.clone());
        }
        let (header, body) = node
            .mine_block(BlockId(1), MinerId(0), 1.0, &[txs[0].id, txs[1].id])
            .unwrap();
        assert_eq!(header.parent_ids, vec![BlockId::GENESIS]);
        assert!(header.signal.contains(&txs[0].id));
        assert!(header.signal.contains(&txs[1].id));
        assert_eq!(body.tx_ids.len(), 2);
        assert_eq!(node.pool_len(), 3);
        // A second block must reference the first, which is now the tip.
        let (h2, _) = node.mine_block(BlockId(2), MinerId(0), 2.0, &[txs[2].id]).unwrap();
        assert_eq!(h2.parent_ids, vec![BlockId(1)]);
        // Empty block is valid and carries an empty signal.
        let (h3, b3) = node.mine_block(BlockId(3), MinerId(0), 3.0, &[]).unwrap();
        assert_eq!(h3.signal.popcount(), 0);
        assert!(b3.tx_ids.is_empty());
    }

    #[test]
    fn mining_rejects_over_capacity_and_unknown() {
        let mut node = NodeState::new(config(0.1, 20, 2));
        let txs: Vec<Transaction> = (0..3).map(|i| tx(i, 0.5)).collect();
        for t in &txs {
            node.receive_transaction(t.clone());
        }
        let ids: Vec<TxId> = txs.iter().map(|t| t.id).collect();
        assert!(matches!(
            node.mine_block(BlockId(1), MinerId(0), 1.0, &ids),
            Err(ProtocolError::BlockOverCapacity { got: 3, cap: 2 })
        ));
        let ghost = TxId::from_index(999, 99);
        assert!(matches!(
            node.mine_block(BlockId(1), MinerId(0), 1.0, &[ghost]),
            Err(ProtocolError::UnknownPoolEntry(_))
        ));
    }

    #[test]
    fn tips_match_brute_force_recomputation() {
        let mut node = NodeState::new(config(0.1, 50, 10));
        for i in 0..10u64 {
            node.receive_transaction(tx(i, 0.5));
        }
        let mut blocks: Vec<(BlockId, Vec<BlockId>)> = Vec::new();
        for b in 1..=6u64 {
            let (h, _) = node.mine_block(BlockId(b), MinerId(0), b as f64, &[]).unwrap();
            blocks.push((h.id, h.parent_ids.clone()));
        }
        // Brute force: a tip is any accepted block no other block lists
        // as a parent.
        let mut referenced: HashSet<BlockId> = HashSet::new();
        for (_, parents) in &blocks {
            referenced.extend(parents.iter().copied());
        }
        let mut expect: Vec<BlockId> = blocks
            .iter()
            .map(|(id, _)| *id)
            .chain([BlockId::GENESIS])
            .filter(|id| !referenced.contains(id))
            .collect();
        expect.sort();
        assert_eq!(node.ledger().tips(), expect);
    }

    #[test]
    fn value_round_trip_is_exact_over_event_noise() {
        // Every signal is eventually resolved (body without the tx, or
        // expiry); values must return to the base fee bit-exactly.
        let mut node = NodeState::new(config(0.0217, 64, 16));
        let fees = [0.913, 0.1, 1.0 / 3.0, 0.25, 1e-9, 0.77];
        let txs: Vec<Transaction> =
            fees.iter().enumerate().map(|(i, f)| tx(i as u64, *f)).collect();
        for t in &txs {
            node.receive_transaction(t.clone());
        }
        let all_ids: Vec<TxId> = txs.iter().map(|t| t.id).collect();
        let h1 = header_over(&node, 1, &all_ids);
        let h2 = header_over(&node, 2, &all_ids[0..3]);
        let h3 = header_over(&node, 3, &all_ids[2..5]);
        node.receive_header(&h1, 0.0).unwrap();
        node.receive_header(&h2, 1.0).unwrap();
        node.receive_header(&h3, 2.0).unwrap();
        // h1 resolves with an empty body (all hits were false positives),
        // h2 expires, h3 resolves with a disjoint body.
        node.receive_body(&BlockBody { header_id: h1.id, tx_ids: vec![] }, 3.0);
        node.header_expired(h2.id, 100.0);
        node.receive_body(&BlockBody { header_id: h3.id, tx_ids: vec![] }, 4.0);
        for (t, fee) in txs.iter().zip(fees) {
            let v = node.pool_entry(&t.id).unwrap().expected_value(0.0217);
            assert_eq!(v, fee, "drift detected for fee {fee}");
        }
    }

    #[test]
    fn flood_policy_guards_header_acceptance() {
        let mut cfg = config(0.1, 10, 5);
        cfg.flood_policy = Some(FloodPolicy::new(4096, 5, 5, 1e-4).unwrap());
        let mut node = NodeState::new(cfg);
        let a = tx(1, 0.9);
        node.receive_transaction(a.clone());
        let mut h = header_over(&node, 1, &[a.id]);
        h.signal.saturate();
        assert_eq!(node.receive_header(&h, 0.0).unwrap(), HeaderOutcome::RejectedFlood);
        assert_eq!(node.pool_entry(&a.id).unwrap().expected_value(0.1), 0.9);
        assert_eq!(node.awaiting_len(), 0);
        // An honest header still passes.
        let h2 = header_over(&node, 2, &[a.id]);
        assert!(matches!(node.receive_header(&h2, 0.0).unwrap(), HeaderOutcome::Accepted { .. }));
    }
}
