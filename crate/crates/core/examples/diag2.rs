use tips_core::sim::trace::BlockKind;
use tips_core::sim::{run_simulation, Protocol, SimConfig, StrategyKind};

fn main() {
    let mut c = SimConfig::default_with_seed(9);
    c.protocol = Protocol::Standard;
    c.strategy = StrategyKind::TopN;
    c.num_miners = 50;
    c.delta_stddev = 0.1;
    c.lambda = 0.5;
    c.horizon = 3000.0;
    c.tx_rate = 165.0;
    let trace = run_simulation(&c).unwrap();
    let mut first: Vec<Option<(usize, f64)>> = vec![None; trace.txs.len()];
    let mut dups: Vec<u32> = vec![0; trace.txs.len()];
    for (bi, b) in trace.blocks.iter().enumerate() {
        if b.kind != BlockKind::Honest { continue; }
        for &t in &b.txs {
            match first[t as usize] {
                None => first[t as usize] = Some((bi, b.mine_time)),
                Some(_) => dups[t as usize] += 1,
            }
        }
    }
    // Dup counts split by fee quartile.
    let mut q_sums = [0.0f64; 4];
    let mut q_cnt = [0u64; 4];
    for (ti, f) in first.iter().enumerate() {
        let Some((_, t0)) = f else { continue };
        if *t0 < 400.0 || *t0 > 2500.0 { continue; }
        let fee = trace.txs[ti].fee;
        let q = ((fee * 4.0) as usize).min(3);
        q_sums[q] += dups[ti] as f64;
        q_cnt[q] += 1;
    }
    for q in 0..4 {
        println!("fee quartile {q}: mean dups {:.3} over {} txs", q_sums[q] / q_cnt[q] as f64, q_cnt[q]);
    }
    // Also: mean wait from arrival to first inclusion by quartile.
    let mut w_sums = [0.0f64; 4];
    for (ti, f) in first.iter().enumerate() {
        let Some((_, t0)) = f else { continue };
        if *t0 < 400.0 || *t0 > 2500.0 { continue; }
        let q = ((trace.txs[ti].fee * 4.0) as usize).min(3);
        w_sums[q] += t0 - trace.txs[ti].arrival_time;
    }
    for q in 0..4 {
        println!("fee quartile {q}: mean wait {:.2}s", w_sums[q] / q_cnt[q] as f64);
    }
}
