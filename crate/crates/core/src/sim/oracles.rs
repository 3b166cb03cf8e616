//! Monte-Carlo oracles for the closed forms.
//!
//! These simulate the underlying reward/renewal models directly — block
//! counts, inclusion indicators, winner draws — without going through
//! the full event engine, so they can cross-check the analytic formulas
//! from an independent direction.

use crate::bloom::BloomFilter;
use crate::protocol::{
    BlockHeader, BlockId, MinerId, NodeState, ProtocolConfig, Transaction, TxId,
};
use crate::sim::rng::{label, Stream};
use crate::strategies::{systematic_sample, InclusionStrategy};
use std::cmp::Reverse;
use std::collections::BinaryHeap;

/// Estimate the reward coefficient by simulating the split-reward model:
/// a tagged block is mined at time zero, `k ~ Poisson(lambda * delay)`
/// rival blocks appear during its propagation, each carries the tagged
/// transaction with probability `p_other`, and the fee goes to one of
/// the `iota + 1` claimants uniformly (homogeneous network advantage).
pub fn split_reward_coefficient_mc(
    p_other: f64,
    lambda: f64,
    delay: f64,
    episodes: u64,
    seed: u64,
) -> f64 {
    assert!((0.0..=1.0).contains(&p_other));
    let mu = lambda * delay;
    let mut rng = Stream::new(seed, &[label::ORACLE, 1]);
    let mut won = 0u64;
    for _ in 0..episodes {
        let rivals = rng.poisson(mu);
        let iota = rng.binomial(rivals, p_other);
        if rng.next_u64() % (iota + 1) == 0 {
            won += 1;
        }
    }
    won as f64 / episodes as f64
}

/// Expected per-block revenue of one deviant playing `p` against a field
/// playing `p_others`, estimated by the same split-reward model: the
/// deviant's block contents come from systematic sampling of `p`, each
/// chosen transaction is contested by `Binomial(k, p_others_i)` rivals,
/// and the earliest-miner rule resolves to a uniform winner among the
/// claimants.
pub fn split_reward_revenue_mc(
    p: &InclusionStrategy,
    p_others: &InclusionStrategy,
    fees: &[f64],
    lambda: f64,
    delay: f64,
    episodes: u64,
    seed: u64,
) -> f64 {
    assert_eq!(p.len(), fees.len());
    assert_eq!(p_others.len(), fees.len());
    let mu = lambda * delay;
    let mut rng = Stream::new(seed, &[label::ORACLE, 2]);
    let q = p_others.probabilities();
    let mut total = 0.0;
    for _ in 0..episodes {
        let contents = systematic_sample(p, rng.uniform());
        let rivals = rng.poisson(mu);
        for i in contents {
            let iota = rng.binomial(rivals, q[i]);
            if rng.next_u64() % (iota + 1) == 0 {
                total += fees[i];
            }
        }
    }
    total / episodes as f64
}

/// Mean attack-phase duration from the renewal model: each attacker
/// inter-mine gap below the timeout extends the attack by that gap; the
/// first gap at or above it ends the attack after one full timeout.
pub fn renewal_delay_mc(alpha: f64, lambda: f64, timeout: f64, episodes: u64, seed: u64) -> f64 {
    assert!(alpha > 0.0 && alpha <= 1.0 && lambda > 0.0 && timeout >= 0.0);
    let rate = alpha * lambda;
    let mut rng = Stream::new(seed, &[label::ORACLE, 3]);
    let mut total = 0.0;
    for _ in 0..episodes {
        loop {
            let gap = rng.exponential(rate);
            if gap < timeout {
                total += gap;
            } else {
                total += timeout;
                break;
            }
        }
    }
    total / episodes as f64
}

/// Protocol-level delay-attack episodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayAttackStats {
    /// Mean of (inclusion time under attack) - (inclusion time without),
    /// paired on the honest mining sequence. This is the measured
    /// episode delay E(D).
    pub mean_added_delay: f64,
    /// Mean inclusion time with no attacker, same honest sequence.
    pub mean_baseline_delay: f64,
    /// Mean time from the final suppression release to inclusion.
    pub mean_post_lapse_inclusion: f64,
    pub episodes: u64,
}

/// Run independent delay-of-service episodes through the real node state
/// machine: the attacker has already mined a block containing the target
/// and broadcasts its header at t = 0, then renews on its own Poisson
/// mining clock while each renewal lands before the previous timeout;
/// honest miners (rate `(1 - alpha) * lambda`) include the target the
/// first time they mine while it is unsuppressed.
///
/// The signal delay is a fixed 1 ms here: the attack's scale is set by
/// the timeout, and jitter at the signal scale only blurs the pairing.
pub fn delay_attack_episodes(
    alpha: f64,
    lambda: f64,
    timeout: f64,
    episodes: u64,
    seed: u64,
) -> DelayAttackStats {
    assert!(alpha > 0.0 && alpha < 1.0 && lambda > 0.0 && timeout > 0.0);
    const TAU: f64 = 1e-3;
    const FILLERS: u64 = 30;
    let config = ProtocolConfig {
        epsilon: 0.01,
        pool_capacity: 64,
        block_capacity: 5,
        header_timeout: timeout,
        bloom_bits: 2048,
        bloom_hashes: 4,
        flood_policy: None,
    };
    let honest_rate = (1.0 - alpha) * lambda;
    let attack_rate = alpha * lambda;

    let mut sum_added = 0.0;
    let mut sum_base = 0.0;
    let mut sum_post = 0.0;

    for episode in 0..episodes {
        let garnish = seed ^ (episode << 1) ^ 0xd1ce;
        let target = TxId::from_index(0, garnish);
        let mut node = NodeState::new(config.clone());
        node.receive_transaction(Transaction {
            id: target,
            fee: 1.0,
            arrival_time: 0.0,
            size_bytes: 500,
        });
        for i in 1..=FILLERS {
            node.receive_transaction(Transaction {
                id: TxId::from_index(i, garnish),
                fee: 0.2 + 0.6 * (i as f64 / FILLERS as f64),
                arrival_time: 0.0,
                size_bytes: 500,
            });
        }

        let mut honest = Stream::new(seed, &[label::ORACLE, 4, episode]);
        let mut attacker = Stream::new(seed, &[label::ORACLE, 5, episode]);

        #[derive(PartialEq)]
        struct Pending(f64, u8, u64); // time, kind, block id
        impl Eq for Pending {}
        impl PartialOrd for Pending {
            fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
                Some(self.cmp(other))
            }
        }
        impl Ord for Pending {
            fn cmp(&self, other: &Self) -> std::cmp::Ordering {
                self.0
                    .total_cmp(&other.0)
                    .then(self.1.cmp(&other.1))
                    .then(self.2.cmp(&other.2))
            }
        }
        const K_HONEST: u8 = 0;
        const K_ATTACK: u8 = 1;
        const K_DELIVER: u8 = 2;
        const K_EXPIRE: u8 = 3;

        let mut heap: BinaryHeap<Reverse<Pending>> = BinaryHeap::new();
        let mut next_block = 1u64;
        let make_header = |at: f64, id: u64| BlockHeader {
            id: BlockId(id),
            miner: MinerId(999),
            mine_time: at,
            parent_ids: vec![BlockId::GENESIS],
            signal: {
                let mut s = BloomFilter::new(config.bloom_bits, config.bloom_hashes).unwrap();
                s.insert(&target);
                s
            },
            pow_valid: true,
        };
        let mut headers: Vec<BlockHeader> = Vec::new();

        // Attack initiation at t = 0.
        headers.push(make_header(0.0, next_block));
        heap.push(Reverse(Pending(TAU, K_DELIVER, next_block)));
        next_block += 1;
        let mut deadline = timeout;
        let mut lapsed = false;
        heap.push(Reverse(Pending(attacker.exponential(attack_rate), K_ATTACK, 0)));
        heap.push(Reverse(Pending(honest.exponential(honest_rate), K_HONEST, 0)));

        let mut first_honest_mine: Option<f64> = None;
        let mut last_free = 0.0_f64;
        let mut included_at: Option<f64> = None;

        while let Some(Reverse(Pending(now, kind, block))) = heap.pop() {
            match kind {
                K_HONEST => {
                    if first_honest_mine.is_none() {
                        first_honest_mine = Some(now);
                    }
                    let free = node
                        .pool_entry(&target)
                        .map(|e| e.pending_signals().is_empty())
                        .unwrap_or(false);
                    if free {
                        included_at = Some(now);
                        break;
                    }
                    heap.push(Reverse(Pending(
                        now + honest.exponential(honest_rate),
                        K_HONEST,
                        0,
                    )));
                }
                K_ATTACK => {
                    if !lapsed && included_at.is_none() {
                        if now < deadline {
                            headers.push(make_header(now, next_block));
                            heap.push(Reverse(Pending(now + TAU, K_DELIVER, next_block)));
                            next_block += 1;
                            deadline = now + timeout;
                        } else {
                            lapsed = true;
                        }
                    }
                    if !lapsed {
                        heap.push(Reverse(Pending(
                            now + attacker.exponential(attack_rate),
                            K_ATTACK,
                            0,
                        )));
                    }
                }
                K_DELIVER => {
                    let header = headers[(block - 1) as usize].clone();
                    node.receive_header(&header, now).expect("no flood policy");
                    if let Some(expiry) = node.awaiting_expiry(header.id) {
                        heap.push(Reverse(Pending(expiry, K_EXPIRE, block)));
                    }
                }
                K_EXPIRE => {
                    node.header_expired(BlockId(block), now);
                    let free = node
                        .pool_entry(&target)
                        .map(|e| e.pending_signals().is_empty())
                        .unwrap_or(false);
                    if free {
                        last_free = now;
                    }
                }
                _ => unreachable!("no other event kinds are queued"),
            }
        }

        let d_attack = included_at.expect("every episode terminates");
        let d_base = first_honest_mine.expect("at least one honest mine");
        sum_added += d_attack - d_base;
        sum_base += d_base;
        sum_post += d_attack - last_free;
    }

    DelayAttackStats {
        mean_added_delay: sum_added / episodes as f64,
        mean_baseline_delay: sum_base / episodes as f64,
        mean_post_lapse_inclusion: sum_post / episodes as f64,
        episodes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics;
    use crate::numeric::phi;
    use crate::strategies::{strategy_random, strategy_top_n};

    #[test]
    fn split_reward_matches_phi_at_a_point() {
        let est = split_reward_coefficient_mc(0.5, 0.5, 4.0, 200_000, 11);
        let expect = phi(0.5 * 4.0 * 0.5);
        assert!(
            (est - expect).abs() < 0.005,
            "MC {est} vs analytic {expect}"
        );
    }

    #[test]
    fn split_reward_revenue_matches_linear_form() {
        use crate::strategies::expected_revenue;
        let fees: Vec<f64> = (0..40).map(|i| 1.0 - i as f64 * 0.02).collect();
        let p = strategy_top_n(&fees, 8).unwrap();
        let q = strategy_random(40, 8).unwrap();
        let mc = split_reward_revenue_mc(&p, &q, &fees, 0.5, 5.0, 60_000, 5);
        let exact = expected_revenue(&p, &q, &fees, 0.5, 5.0).unwrap();
        assert!(
            (mc - exact).abs() < 0.02 * exact,
            "MC {mc} vs exact {exact}"
        );
    }

    #[test]
    fn renewal_mc_matches_closed_form() {
        let (alpha, lambda, t) = (0.25, 0.5, 2.0);
        let est = renewal_delay_mc(alpha, lambda, t, 100_000, 3);
        let expect = analytics::delay_attack_episode_mean(alpha, lambda, t);
        assert!(
            (est - expect).abs() < 0.02 * expect,
            "MC {est} vs closed form {expect}"
        );
    }

    #[test]
    fn delay_attack_episodes_track_the_renewal_model() {
        let (alpha, lambda, t) = (0.25, 0.5, 2.0);
        let stats = delay_attack_episodes(alpha, lambda, t, 6000, 17);
        let expect = analytics::delay_attack_episode_mean(alpha, lambda, t);
        assert!(
            (stats.mean_added_delay - expect).abs() < 0.08 * expect,
            "episodes {} vs model {expect}",
            stats.mean_added_delay
        );
        // Baseline inclusion is one honest inter-mine time.
        let base_expect = 1.0 / ((1.0 - alpha) * lambda);
        assert!((stats.mean_baseline_delay - base_expect).abs() < 0.1 * base_expect);
        // After the attack lapses the target clears in O(1/lambda).
        assert!(stats.mean_post_lapse_inclusion < 2.0 * base_expect);
    }
}
