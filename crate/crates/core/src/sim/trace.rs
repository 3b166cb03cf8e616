//! Event traces: the simulator's output and the metrics layer's input.
//!
//! A trace keeps three tables: transactions (index order = arrival
//! order), blocks (index order = mine order), and the delivery/expiry
//! timeline. Transaction arrivals are not duplicated into the timeline;
//! the CSV exporter and the replayer merge them back in by time.

use crate::protocol::{
    BlockBody, BlockHeader, BlockId, MinerId, NodeState, Transaction, TxId,
};
use crate::bloom::BloomFilter;
use crate::sim::config::SimConfig;
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TxRecord {
    pub fee: f64,
    pub arrival_time: f64,
    pub size_bytes: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    /// Mined and fully published.
    Honest,
    /// Header published, body withheld (delay-of-service attacker).
    Withheld,
    /// Fabricated over-threshold signal (flood attacker); no body exists.
    Flood,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockRecord {
    /// Ledger block id; blocks[i].id == i + 1 (0 is genesis).
    pub id: u64,
    pub miner: u32,
    pub mine_time: f64,
    pub parents: Vec<u64>,
    /// Transaction table indices included in the block.
    pub txs: Vec<u32>,
    pub kind: BlockKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Mine,
    HeaderRecv,
    BodyRecv,
    HeaderExpire,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::Mine => "mine",
            EventKind::HeaderRecv => "header_recv",
            EventKind::BodyRecv => "body_recv",
            EventKind::HeaderExpire => "header_expire",
        }
    }
}

/// Outcome codes carried in [`EventRecord::aux`] for delivery events.
pub mod aux {
    pub const ACCEPTED: u32 = 0;
    pub const DUPLICATE: u32 = 1;
    pub const REJECTED_POW: u32 = 2;
    pub const REJECTED_FLOOD: u32 = 3;
    pub const REJECTED_UNKNOWN: u32 = 4;
    pub const REJECTED_CLOSED: u32 = 5;
    pub const REJECTED_MISMATCH: u32 = 6;

    pub fn name(code: u32) -> &'static str {
        match code {
            ACCEPTED => "accepted",
            DUPLICATE => "duplicate",
            REJECTED_POW => "rejected_pow",
            REJECTED_FLOOD => "rejected_flood",
            REJECTED_UNKNOWN => "rejected_unknown_header",
            REJECTED_CLOSED => "rejected_closed",
            REJECTED_MISMATCH => "rejected_mismatch",
            _ => "other",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord {
    pub time: f64,
    pub kind: EventKind,
    /// Node index; miners are 0..num_miners, a delay attacker is
    /// num_miners.
    pub actor: u32,
    /// Index into the block table.
    pub block: u32,
    /// Mine: transactions included. Deliveries: outcome code.
    /// Expiry: number of restored pool entries.
    pub aux: u32,
}

/// Complete, replayable record of one simulation run.
#[derive(Debug, Clone)]
pub struct EventTrace {
    pub config: SimConfig,
    /// Nominal signal false-positive rate the nodes ran with.
    pub epsilon: f64,
    /// Seed material for reconstructing transaction ids from indices.
    pub garnish_seed: u64,
    pub txs: Vec<TxRecord>,
    pub blocks: Vec<BlockRecord>,
    pub events: Vec<EventRecord>,
    /// Element-wise mean of the miners' sorted pool value profiles,
    /// sampled at each post-warmup mine event and zero-padded to `m`.
    pub mean_sorted_values: Vec<f64>,
    pub profile_samples: u64,
    /// State digests of every node at the end of the run, for replay
    /// verification.
    pub final_node_digests: Vec<u64>,
}

impl EventTrace {
    pub fn tx_id(&self, index: u32) -> TxId {
        TxId::from_index(index as u64, self.garnish_seed)
    }

    /// Rebuild the signal a block was broadcast with.
    pub fn rebuild_signal(&self, block: &BlockRecord) -> BloomFilter {
        let mut signal =
            BloomFilter::new(self.config.bloom_bits, self.config.bloom_hashes).expect("valid dims");
        if block.kind == BlockKind::Flood {
            signal.saturate();
            return signal;
        }
        for &t in &block.txs {
            signal.insert(&self.tx_id(t));
        }
        signal
    }

    fn rebuild_header(&self, block: &BlockRecord) -> BlockHeader {
        BlockHeader {
            id: BlockId(block.id),
            miner: MinerId(block.miner),
            mine_time: block.mine_time,
            parent_ids: block.parents.iter().map(|&p| BlockId(p)).collect(),
            signal: self.rebuild_signal(block),
            pow_valid: true,
        }
    }

    fn rebuild_body(&self, block: &BlockRecord) -> BlockBody {
        BlockBody {
            header_id: BlockId(block.id),
            tx_ids: block.txs.iter().map(|&t| self.tx_id(t)).collect(),
        }
    }

    /// Structural sanity: time-ordered events, and under header-first
    /// propagation every body delivery strictly follows its header
    /// delivery at the same node.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut prev = f64::NEG_INFINITY;
        for e in &self.events {
            if e.time < prev {
                return Err(format!("events out of order at t={}", e.time));
            }
            prev = e.time;
        }
        use std::collections::HashSet;
        let mut header_seen: HashSet<(u32, u32)> = HashSet::new();
        for e in &self.events {
            match e.kind {
                EventKind::HeaderRecv => {
                    header_seen.insert((e.actor, e.block));
                }
                EventKind::BodyRecv => {
                    if !header_seen.contains(&(e.actor, e.block)) {
                        return Err(format!(
                            "body before header for block {} at node {}",
                            e.block, e.actor
                        ));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Export as CSV (`time,kind,actor,block_id,tx_count,extra`), one
    /// row per event with transaction arrivals interleaved by time.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.txs.len() + self.events.len()));
        out.push_str("time,kind,actor,block_id,tx_count,extra\n");
        let mut tx_cursor = 0usize;
        let write_tx = |out: &mut String, i: usize| {
            let t = &self.txs[i];
            let _ = writeln!(
                out,
                "{},tx_arrival,net,,1,fee={};size={}",
                t.arrival_time, t.fee, t.size_bytes
            );
        };
        for e in &self.events {
            while tx_cursor < self.txs.len() && self.txs[tx_cursor].arrival_time <= e.time {
                write_tx(&mut out, tx_cursor);
                tx_cursor += 1;
            }
            let block = &self.blocks[e.block as usize];
            let (count, extra) = match e.kind {
                EventKind::Mine => (
                    e.aux,
                    match block.kind {
                        BlockKind::Honest => String::new(),
                        BlockKind::Withheld => "withheld".to_string(),
                        BlockKind::Flood => "flood".to_string(),
                    },
                ),
                EventKind::HeaderRecv | EventKind::BodyRecv => {
                    (block.txs.len() as u32, aux::name(e.aux).to_string())
                }
                EventKind::HeaderExpire => (e.aux, "restored".to_string()),
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                e.time,
                e.kind.as_str(),
                e.actor,
                block.id,
                count,
                extra
            );
        }
        while tx_cursor < self.txs.len() {
            write_tx(&mut out, tx_cursor);
            tx_cursor += 1;
        }
        out
    }

    /// Re-apply the trace to fresh node states and return their digests;
    /// must reproduce [`EventTrace::final_node_digests`] exactly.
    pub fn replay(&self) -> Vec<u64> {
        let node_count = self.final_node_digests.len();
        let protocol_config = crate::sim::engine::protocol_config_for(&self.config);
        let mut nodes: Vec<NodeState> =
            (0..node_count).map(|_| NodeState::new(protocol_config.clone())).collect();
        let mut tx_cursor = 0usize;
        let deliver_tx = |nodes: &mut [NodeState], i: usize| {
            let rec = &self.txs[i];
            let tx = Transaction {
                id: self.tx_id(i as u32),
                fee: rec.fee,
                arrival_time: rec.arrival_time,
                size_bytes: rec.size_bytes,
            };
            for node in nodes.iter_mut() {
                node.receive_transaction(tx.clone());
            }
        };
        for e in &self.events {
            while tx_cursor < self.txs.len() && self.txs[tx_cursor].arrival_time <= e.time {
                deliver_tx(&mut nodes, tx_cursor);
                tx_cursor += 1;
            }
            let block = &self.blocks[e.block as usize];
            match e.kind {
                EventKind::Mine => {
                    if block.kind == BlockKind::Honest {
                        let chosen: Vec<TxId> =
                            block.txs.iter().map(|&t| self.tx_id(t)).collect();
                        nodes[e.actor as usize]
                            .mine_block(BlockId(block.id), MinerId(block.miner), e.time, &chosen)
                            .expect("replayed mine must succeed");
                    }
                    // Withheld and flood emissions mutate no node state.
                }
                EventKind::HeaderRecv => {
                    let header = self.rebuild_header(block);
                    nodes[e.actor as usize]
                        .receive_header(&header, e.time)
                        .expect("replayed header delivery must not error");
                }
                EventKind::BodyRecv => {
                    let body = self.rebuild_body(block);
                    nodes[e.actor as usize].receive_body(&body, e.time);
                }
                EventKind::HeaderExpire => {
                    nodes[e.actor as usize].header_expired(BlockId(block.id), e.time);
                }
            }
        }
        while tx_cursor < self.txs.len() {
            deliver_tx(&mut nodes, tx_cursor);
            tx_cursor += 1;
        }
        nodes.iter().map(digest_node).collect()
    }
}

/// Order-insensitive-where-it-should-be digest of a node's final state:
/// pool entries with their exact values, ledger tips, and open headers.
pub fn digest_node(node: &NodeState) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    let mut acc = 0x0bad_5eed_c0ff_ee00u64;
    for (id, value) in node.pool_snapshot() {
        for w in id.words() {
            acc = mix(acc ^ w);
        }
        acc = mix(acc ^ value.to_bits());
    }
    for tip in node.ledger().tips() {
        acc = mix(acc ^ tip.0 ^ 0xfeed);
    }
    acc = mix(acc ^ node.ledger().len() as u64);
    acc = mix(acc ^ node.awaiting_len() as u64);
    acc
}
