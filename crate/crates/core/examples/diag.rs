//! Scratch diagnostic for the standard-protocol duplication structure.

use tips_core::metrics;
use tips_core::sim::{run_simulation, Protocol, SimConfig, StrategyKind};
use tips_core::sim::trace::BlockKind;

fn main() {
    let mut c = SimConfig::default_with_seed(42);
    c.protocol = Protocol::Standard;
    c.strategy = StrategyKind::TopN;
    c.lambda = 0.5;
    c.horizon = 2000.0;
    c.tx_rate = 1.3 * 0.5 * 2000.0;
    let trace = run_simulation(&c).unwrap();
    let s = metrics::summarize(&trace).unwrap();
    println!("U={:.4} TPS={:.1} blocks={} fill={:.1}", s.utilization, s.tps, s.blocks, s.mean_block_fill);

    // Gap histogram: time between a duplicate inclusion and the first.
    let mut first: Vec<u32> = vec![u32::MAX; trace.txs.len()];
    for (bi, b) in trace.blocks.iter().enumerate() {
        if b.kind != BlockKind::Honest { continue; }
        for &t in &b.txs {
            if first[t as usize] == u32::MAX { first[t as usize] = bi as u32; }
        }
    }
    let mut gaps = [0u64; 14];
    let mut dup_count = 0u64;
    let mut overlap_sum = 0.0;
    let mut overlap_n = 0u64;
    let cutoff = 0.1 * c.horizon;
    let mut prev_txs: Option<std::collections::HashSet<u32>> = None;
    for (bi, b) in trace.blocks.iter().enumerate() {
        if b.kind != BlockKind::Honest || b.mine_time < cutoff { continue; }
        for &t in &b.txs {
            let fb = first[t as usize];
            if fb != bi as u32 {
                dup_count += 1;
                let gap = b.mine_time - trace.blocks[fb as usize].mine_time;
                let bucket = (gap.floor() as usize).min(13);
                gaps[bucket] += 1;
            }
        }
        let set: std::collections::HashSet<u32> = b.txs.iter().copied().collect();
        if let Some(prev) = &prev_txs {
            overlap_sum += b.txs.iter().filter(|t| prev.contains(t)).count() as f64
                / b.txs.len().max(1) as f64;
            overlap_n += 1;
        }
        prev_txs = Some(set);
    }
    println!("dups={dup_count} gap histogram (per second bucket): {gaps:?}");
    println!("mean consecutive-block overlap: {:.3}", overlap_sum / overlap_n as f64);

    // Pool value profile shape at end: count of entries per decile band.
    println!("mean sorted profile head: {:?}", &trace.mean_sorted_values[..5]);
    println!("profile at ranks 1000/2000/3000/5000/9999: {:?} {:?} {:?} {:?} {:?}",
        trace.mean_sorted_values[1000], trace.mean_sorted_values[2000],
        trace.mean_sorted_values[3000], trace.mean_sorted_values[5000],
        trace.mean_sorted_values[9999]);
}
