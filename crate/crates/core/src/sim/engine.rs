//! Seeded discrete-event simulation of miners running the signaling or
//! the standard propagation protocol.
//!
//! One global Poisson clock mines blocks and thins them uniformly over
//! the homogeneous miners; per-destination delivery delays are sampled
//! from truncated normals; every node is a [`NodeState`] driven purely
//! by its delivered events. The run is a deterministic function of the
//! config (seed included): every random draw comes from a label-derived
//! stream, so attaching an attacker or switching the protocol never
//! shifts honest randomness.

use crate::bloom::FloodPolicy;
use crate::protocol::{
    BlockHeader, BlockId, MinerId, NodeState, ProtocolConfig, Transaction, TxId,
};
use crate::sim::config::{AttackerConfig, ConfigError, FeeDist, Protocol, SimConfig, StrategyKind};
use crate::sim::rng::{label, Stream};
use crate::sim::trace::{
    aux, digest_node, BlockKind, BlockRecord, EventKind, EventRecord, EventTrace, TxRecord,
};
use crate::strategies::{
    equilibrium_strategy, strategy_priority, strategy_random, systematic_sample,
    InclusionStrategy,
};
use std::cmp::Reverse;
use std::collections::BinaryHeap;

/// Minimum spacing enforced between a header and its body at one
/// destination; delay samples are independent, causality is not.
const BODY_AFTER_HEADER_GAP: f64 = 1e-9;

/// Relative L1 drift of the sorted value profile that triggers an
/// equilibrium re-solve inside the simulator.
const EQUILIBRIUM_REFRESH_L1: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Ev {
    TxArrival,
    HonestMine,
    AttackerMine,
    FloodEmit,
    HeaderRecv { block: u32, node: u32 },
    BodyRecv { block: u32, node: u32 },
    HeaderExpire { block: u32, node: u32 },
}

#[derive(Debug, Clone, Copy)]
struct QueuedEvent {
    time: f64,
    /// Arrivals sort ahead of everything else at equal times.
    class: u8,
    seq: u64,
    ev: Ev,
}

impl PartialEq for QueuedEvent {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == std::cmp::Ordering::Equal
    }
}
impl Eq for QueuedEvent {}
impl PartialOrd for QueuedEvent {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for QueuedEvent {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.class.cmp(&other.class))
            .then(self.seq.cmp(&other.seq))
    }
}

/// Node-level protocol parameters derived from a simulation config.
pub fn protocol_config_for(config: &SimConfig) -> ProtocolConfig {
    let flood_policy = if config.flood_eta > 0.0 {
        Some(
            FloodPolicy::new(
                config.bloom_bits,
                config.bloom_hashes,
                config.n as u32,
                config.flood_eta,
            )
            .expect("validated eta"),
        )
    } else {
        None
    };
    ProtocolConfig {
        epsilon: config.epsilon(),
        pool_capacity: config.m,
        block_capacity: config.n,
        header_timeout: config.effective_header_timeout(),
        bloom_bits: config.bloom_bits,
        bloom_hashes: config.bloom_hashes,
        flood_policy,
    }
}

struct EquilibriumCache {
    profile: Vec<f64>,
    probs: Vec<f64>,
    l1: f64,
    solves: u32,
}

struct Engine {
    config: SimConfig,
    epsilon: f64,
    garnish_seed: u64,
    nodes: Vec<NodeState>,
    heap: BinaryHeap<Reverse<QueuedEvent>>,
    seq: u64,
    txs: Vec<TxRecord>,
    blocks: Vec<BlockRecord>,
    events: Vec<EventRecord>,
    // streams
    tx_times: Stream,
    tx_fees: Stream,
    mine_times: Stream,
    mine_picker: Stream,
    attacker_mine: Stream,
    flood_times: Stream,
    // per-miner mined-block counters for strategy stream labels
    blocks_by_miner: Vec<u64>,
    /// Block signals built once at emission and reused for every
    /// delivery of the same block.
    signals: Vec<crate::bloom::BloomFilter>,
    flood_emissions: u64,
    eq_cache: Option<EquilibriumCache>,
    // delay attacker state
    attacker_node: Option<u32>,
    attack_deadline: f64,
    attack_started: bool,
    attack_lapsed: bool,
    target_included: bool,
    // profile accumulation
    warmup_end: f64,
    profile_sum: Vec<f64>,
    profile_samples: u64,
}

impl Engine {
    fn new(config: SimConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let seed = config.seed;
        let honest = config.num_miners;
        let attacker_node = match config.attacker {
            AttackerConfig::Delay { .. } => Some(honest),
            _ => None,
        };
        let node_count = honest + attacker_node.map_or(0, |_| 1);
        let proto = protocol_config_for(&config);
        let nodes = (0..node_count).map(|_| NodeState::new(proto.clone())).collect();
        let m = config.m;
        Ok(Engine {
            epsilon: config.epsilon(),
            garnish_seed: seed ^ 0x7a31_9e4d_55aa_10c3,
            nodes,
            heap: BinaryHeap::new(),
            seq: 0,
            txs: Vec::new(),
            blocks: Vec::new(),
            events: Vec::new(),
            tx_times: Stream::new(seed, &[label::TX_TIMES]),
            tx_fees: Stream::new(seed, &[label::TX_FEES]),
            mine_times: Stream::new(seed, &[label::MINE_TIMES]),
            mine_picker: Stream::new(seed, &[label::MINE_PICKER]),
            attacker_mine: Stream::new(seed, &[label::ATTACKER_MINE]),
            flood_times: Stream::new(seed, &[label::FLOOD_TIMES]),
            blocks_by_miner: vec![0; node_count as usize],
            signals: Vec::new(),
            flood_emissions: 0,
            eq_cache: None,
            attacker_node,
            attack_deadline: f64::NEG_INFINITY,
            attack_started: false,
            attack_lapsed: false,
            target_included: false,
            warmup_end: 0.1 * config.horizon,
            profile_sum: vec![0.0; m],
            profile_samples: 0,
            config,
        })
    }

    fn push(&mut self, time: f64, ev: Ev) {
        let class = if matches!(ev, Ev::TxArrival) { 0 } else { 1 };
        self.seq += 1;
        self.heap.push(Reverse(QueuedEvent { time, class, seq: self.seq, ev }));
    }

    fn honest_rate(&self) -> f64 {
        match self.config.attacker {
            AttackerConfig::Delay { alpha, .. } => self.config.lambda * (1.0 - alpha),
            _ => self.config.lambda,
        }
    }

    fn record(&mut self, time: f64, kind: EventKind, actor: u32, block: u32, aux_code: u32) {
        self.events.push(EventRecord { time, kind, actor, block, aux: aux_code });
    }

    fn sample_fee(&mut self) -> f64 {
        match &self.config.fee_dist {
            FeeDist::Uniform01 => self.tx_fees.uniform(),
            FeeDist::Custom(list) => {
                let i = (self.tx_fees.next_u64() % list.len() as u64) as usize;
                list[i]
            }
        }
    }

    fn register_tx(&mut self, fee: f64, now: f64) -> u32 {
        let index = self.txs.len() as u32;
        self.txs.push(TxRecord { fee, arrival_time: now, size_bytes: self.config.tx_size_bytes });
        index
    }

    fn deliver_tx_to_all(&mut self, index: u32, now: f64) {
        let rec = self.txs[index as usize];
        let tx = Transaction {
            id: TxId::from_index(index as u64, self.garnish_seed),
            fee: rec.fee,
            arrival_time: now,
            size_bytes: rec.size_bytes,
        };
        for node in &mut self.nodes {
            node.receive_transaction(tx.clone());
        }
    }

    /// Select block contents for `miner` under the configured strategy;
    /// also returns the sorted value profile the choice was made over.
    fn choose_contents(&mut self, miner: u32) -> (Vec<TxId>, Vec<f64>) {
        let node = &self.nodes[miner as usize];
        let sorted = node.sorted_pool();
        let values: Vec<f64> = sorted.iter().map(|v| v.value).collect();
        let want = self.config.n.min(sorted.len());
        if want == 0 {
            return (Vec::new(), values);
        }
        if self.config.strategy == StrategyKind::TopN {
            return (sorted[..want].iter().map(|v| v.id).collect(), values);
        }
        let strategy = self.strategy_vector(&values, want);
        let u = Stream::new(
            self.config.seed,
            &[label::STRATEGY, miner as u64, self.blocks_by_miner[miner as usize]],
        )
        .uniform();
        let picks = systematic_sample(&strategy, u);
        (picks.into_iter().map(|i| sorted[i].id).collect(), values)
    }

    fn strategy_vector(&mut self, values: &[f64], want: usize) -> InclusionStrategy {
        match self.config.strategy {
            StrategyKind::TopN => unreachable!("top-n short-circuits"),
            StrategyKind::Random => {
                strategy_random(values.len(), want).expect("want <= len by construction")
            }
            StrategyKind::Priority => {
                let positive = values.iter().take_while(|v| **v > 0.0).count();
                if positive >= want {
                    strategy_priority(values, want).expect("sorted by construction")
                } else {
                    strategy_random(values.len(), want).expect("want <= len")
                }
            }
            StrategyKind::Equilibrium => self.equilibrium_vector(values, want),
        }
    }

    /// Equilibrium play with lazy re-solving: the solver reruns only when
    /// the sorted value profile drifts more than 1% in L1 since the last
    /// solve (or the pool size changed).
    fn equilibrium_vector(&mut self, values: &[f64], want: usize) -> InclusionStrategy {
        let positive = values.iter().take_while(|v| **v > 0.0).count();
        if positive < want {
            return strategy_random(values.len(), want).expect("want <= len");
        }
        let reusable = self.eq_cache.as_ref().is_some_and(|cache| {
            cache.profile.len() == values.len() && cache.probs.len() == values.len() && {
                let drift: f64 = cache
                    .profile
                    .iter()
                    .zip(values)
                    .map(|(a, b)| (a - b).abs())
                    .sum();
                drift <= EQUILIBRIUM_REFRESH_L1 * cache.l1
            }
        });
        if !reusable {
            let delay = self.config.effective_delay();
            let solution = equilibrium_strategy(&values[..positive], want, self.config.lambda, delay)
                .expect("positive prefix is sorted and sufficient");
            let mut probs = solution.strategy.probabilities().to_vec();
            probs.resize(values.len(), 0.0);
            let solves = self.eq_cache.as_ref().map_or(0, |c| c.solves) + 1;
            self.eq_cache = Some(EquilibriumCache {
                profile: values.to_vec(),
                probs,
                l1: values.iter().sum::<f64>().max(f64::MIN_POSITIVE),
                solves,
            });
        }
        let cache = self.eq_cache.as_ref().expect("just filled");
        InclusionStrategy::new(cache.probs.clone(), want).expect("cached strategy stays valid")
    }

    fn accumulate_profile(&mut self, values: &[f64]) {
        for (slot, v) in self.profile_sum.iter_mut().zip(values) {
            *slot += *v;
        }
        self.profile_samples += 1;
    }

    /// Mine an honest block: choose contents, apply locally, broadcast.
    fn honest_mine(&mut self, miner: u32, now: f64) {
        let (chosen, values) = self.choose_contents(miner);
        if now >= self.warmup_end {
            self.accumulate_profile(&values);
        }
        let block_index = self.blocks.len() as u32;
        let block_id = BlockId(block_index as u64 + 1);
        let (header, _body) = self.nodes[miner as usize]
            .mine_block(block_id, MinerId(miner), now, &chosen)
            .expect("engine-selected contents are valid");
        self.signals.push(header.signal.clone());
        self.blocks_by_miner[miner as usize] += 1;
        if let (AttackerConfig::Delay { .. }, false) = (self.config.attacker, self.target_included) {
            if chosen.iter().any(|id| id.index() == 0) {
                self.target_included = true;
            }
        }
        self.blocks.push(BlockRecord {
            id: block_id.0,
            miner,
            mine_time: now,
            parents: header.parent_ids.iter().map(|p| p.0).collect(),
            txs: chosen.iter().map(|id| id.index() as u32).collect(),
            kind: BlockKind::Honest,
        });
        self.record(now, EventKind::Mine, miner, block_index, chosen.len() as u32);
        let ordinal = self.blocks_by_miner[miner as usize] - 1;
        self.schedule_block_delivery(block_index, miner as u64, ordinal, now, true);
    }

    /// Schedule header/body deliveries of `block` to every node except
    /// `origin`. Under the standard protocol both land together after
    /// the body delay; under signaling the header leads. Delay streams
    /// are labeled by the origin and its per-origin emission ordinal, so
    /// an attacker's extra blocks never shift honest delivery samples.
    fn schedule_block_delivery(
        &mut self,
        block_index: u32,
        origin: u64,
        ordinal: u64,
        now: f64,
        with_body: bool,
    ) {
        let cfg = &self.config;
        let (tau_mean, tau_sd) = (cfg.tau_mean, cfg.tau_stddev);
        let (delta_mean, delta_sd) = (cfg.delta_mean, cfg.delta_stddev);
        let tips = cfg.protocol == Protocol::Tips;
        let seed = cfg.seed;
        let node_count = self.nodes.len() as u32;
        for dest in 0..node_count {
            if dest as u64 == origin {
                continue;
            }
            let header_time = if tips {
                let mut s =
                    Stream::new(seed, &[label::HEADER_DELAY, origin, ordinal, dest as u64]);
                now + s.truncated_normal(tau_mean, tau_sd, 1e-3)
            } else {
                let mut s = Stream::new(seed, &[label::BODY_DELAY, origin, ordinal, dest as u64]);
                now + s.truncated_normal(delta_mean, delta_sd, 1e-3)
            };
            self.push(header_time, Ev::HeaderRecv { block: block_index, node: dest });
            if with_body {
                let body_time = if tips {
                    let mut s =
                        Stream::new(seed, &[label::BODY_DELAY, origin, ordinal, dest as u64]);
                    (now + s.truncated_normal(delta_mean, delta_sd, 1e-3))
                        .max(header_time + BODY_AFTER_HEADER_GAP)
                } else {
                    header_time
                };
                self.push(body_time, Ev::BodyRecv { block: block_index, node: dest });
            }
        }
    }

    /// Delay attacker mine event: renew the withheld header if still in
    /// time, otherwise the attack has lapsed for good.
    fn attacker_mine(&mut self, now: f64) {
        let Some(attacker) = self.attacker_node else { return };
        if self.target_included || self.attack_lapsed {
            return;
        }
        if self.attack_started && now >= self.attack_deadline {
            self.attack_lapsed = true;
            return;
        }
        let target = TxId::from_index(0, self.garnish_seed);
        let node = &self.nodes[attacker as usize];
        let mut signal = crate::bloom::BloomFilter::new(
            self.config.bloom_bits,
            self.config.bloom_hashes,
        )
        .expect("valid dims");
        signal.insert(&target);
        let parents = node.ledger().tips();
        let block_index = self.blocks.len() as u32;
        let header = BlockHeader {
            id: BlockId(block_index as u64 + 1),
            miner: MinerId(attacker),
            mine_time: now,
            parent_ids: parents,
            signal,
            pow_valid: true,
        };
        self.signals.push(header.signal.clone());
        self.blocks.push(BlockRecord {
            id: header.id.0,
            miner: attacker,
            mine_time: now,
            parents: header.parent_ids.iter().map(|p| p.0).collect(),
            txs: vec![0],
            kind: BlockKind::Withheld,
        });
        self.record(now, EventKind::Mine, attacker, block_index, 1);
        let ordinal = self.blocks_by_miner[attacker as usize];
        self.blocks_by_miner[attacker as usize] += 1;
        self.schedule_block_delivery(block_index, attacker as u64, ordinal, now, false);
        self.attack_started = true;
        self.attack_deadline = now + self.config.effective_header_timeout();
    }

    /// Flood attacker emission: a header whose signal has every bit set.
    fn flood_emit(&mut self, now: f64) {
        let block_index = self.blocks.len() as u32;
        let mut signal = crate::bloom::BloomFilter::new(
            self.config.bloom_bits,
            self.config.bloom_hashes,
        )
        .expect("valid dims");
        signal.saturate();
        self.signals.push(signal);
        self.blocks.push(BlockRecord {
            id: block_index as u64 + 1,
            miner: u32::MAX,
            mine_time: now,
            parents: vec![BlockId::GENESIS.0],
            txs: Vec::new(),
            kind: BlockKind::Flood,
        });
        self.flood_emissions += 1;
        self.schedule_block_delivery(
            block_index,
            u64::MAX,
            self.flood_emissions - 1,
            now,
            false,
        );
    }

    fn handle_header_recv(&mut self, block_index: u32, node_idx: u32, now: f64) {
        let rec = &self.blocks[block_index as usize];
        let header = BlockHeader {
            id: BlockId(rec.id),
            miner: MinerId(rec.miner),
            mine_time: rec.mine_time,
            parent_ids: rec.parents.iter().map(|&p| BlockId(p)).collect(),
            signal: self.signals[block_index as usize].clone(),
            pow_valid: true,
        };
        let outcome = self.nodes[node_idx as usize]
            .receive_header(&header, now)
            .expect("policy dimensions match engine dimensions");
        use crate::protocol::HeaderOutcome as H;
        let code = match outcome {
            H::Accepted { .. } => {
                let expiry = self.nodes[node_idx as usize]
                    .awaiting_expiry(header.id)
                    .expect("accepted header is awaiting");
                self.push(expiry, Ev::HeaderExpire { block: block_index, node: node_idx });
                aux::ACCEPTED
            }
            H::Duplicate => aux::DUPLICATE,
            H::RejectedPow => aux::REJECTED_POW,
            H::RejectedFlood => aux::REJECTED_FLOOD,
        };
        self.record(now, EventKind::HeaderRecv, node_idx, block_index, code);
    }

    fn handle_body_recv(&mut self, block_index: u32, node_idx: u32, now: f64) {
        let rec = &self.blocks[block_index as usize];
        let body = crate::protocol::BlockBody {
            header_id: BlockId(rec.id),
            tx_ids: rec.txs.iter().map(|&t| TxId::from_index(t as u64, self.garnish_seed)).collect(),
        };
        let outcome = self.nodes[node_idx as usize].receive_body(&body, now);
        use crate::protocol::BodyOutcome as B;
        let code = match outcome {
            B::Accepted { .. } => aux::ACCEPTED,
            B::RejectedUnknownHeader => aux::REJECTED_UNKNOWN,
            B::RejectedClosed => aux::REJECTED_CLOSED,
            B::RejectedMismatch => aux::REJECTED_MISMATCH,
        };
        self.record(now, EventKind::BodyRecv, node_idx, block_index, code);
    }

    fn run(mut self) -> EventTrace {
        let horizon = self.config.horizon;
        // Delay attacker setup: the target transaction is index 0 and
        // arrives at t = 0.
        if let AttackerConfig::Delay { target_fee, .. } = self.config.attacker {
            let idx = self.register_tx(target_fee, 0.0);
            self.deliver_tx_to_all(idx, 0.0);
        }
        // Prime the recurring streams.
        let t = self.tx_times.exponential(self.config.tx_rate);
        self.push(t, Ev::TxArrival);
        let t = self.mine_times.exponential(self.honest_rate());
        self.push(t, Ev::HonestMine);
        match self.config.attacker {
            AttackerConfig::Delay { alpha, .. } if alpha > 0.0 => {
                let t = self.attacker_mine.exponential(alpha * self.config.lambda);
                self.push(t, Ev::AttackerMine);
            }
            AttackerConfig::Flood { signals_per_second } => {
                let t = self.flood_times.exponential(signals_per_second);
                self.push(t, Ev::FloodEmit);
            }
            _ => {}
        }

        while let Some(Reverse(queued)) = self.heap.pop() {
            let now = queued.time;
            if now > horizon {
                break;
            }
            match queued.ev {
                Ev::TxArrival => {
                    let fee = self.sample_fee();
                    let idx = self.register_tx(fee, now);
                    self.deliver_tx_to_all(idx, now);
                    let dt = self.tx_times.exponential(self.config.tx_rate);
                    self.push(now + dt, Ev::TxArrival);
                }
                Ev::HonestMine => {
                    let miner = (self.mine_picker.next_u64() % self.config.num_miners as u64) as u32;
                    self.honest_mine(miner, now);
                    let dt = self.mine_times.exponential(self.honest_rate());
                    self.push(now + dt, Ev::HonestMine);
                }
                Ev::AttackerMine => {
                    self.attacker_mine(now);
                    if let AttackerConfig::Delay { alpha, .. } = self.config.attacker {
                        let dt = self.attacker_mine.exponential(alpha * self.config.lambda);
                        self.push(now + dt, Ev::AttackerMine);
                    }
                }
                Ev::FloodEmit => {
                    self.flood_emit(now);
                    if let AttackerConfig::Flood { signals_per_second } = self.config.attacker {
                        let dt = self.flood_times.exponential(signals_per_second);
                        self.push(now + dt, Ev::FloodEmit);
                    }
                }
                Ev::HeaderRecv { block, node } => self.handle_header_recv(block, node, now),
                Ev::BodyRecv { block, node } => self.handle_body_recv(block, node, now),
                Ev::HeaderExpire { block, node } => {
                    let id = BlockId(self.blocks[block as usize].id);
                    if let crate::protocol::ExpiryOutcome::Expired { restored } =
                        self.nodes[node as usize].header_expired(id, now)
                    {
                        self.record(now, EventKind::HeaderExpire, node, block, restored as u32);
                    }
                }
            }
        }

        let mut mean_sorted_values = self.profile_sum;
        if self.profile_samples > 0 {
            for v in &mut mean_sorted_values {
                *v /= self.profile_samples as f64;
            }
        }
        EventTrace {
            epsilon: self.epsilon,
            garnish_seed: self.garnish_seed,
            txs: self.txs,
            blocks: self.blocks,
            events: self.events,
            mean_sorted_values,
            profile_samples: self.profile_samples,
            final_node_digests: self.nodes.iter().map(digest_node).collect(),
            config: self.config,
        }
    }
}

/// Run one seeded simulation to completion.
pub fn run_simulation(config: &SimConfig) -> Result<EventTrace, ConfigError> {
    Ok(Engine::new(config.clone())?.run())
}
