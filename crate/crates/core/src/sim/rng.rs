//! Deterministic, label-addressed random streams.
//!
//! Every consumer of randomness opens its own stream derived from the
//! master seed and a label tuple (purpose constant plus entity indices).
//! Streams are independent SplitMix64 sequences, so adding or removing a
//! consumer (say, an attacker) never perturbs anyone else's draws, and a
//! run is reproducible from the master seed alone on any platform.

/// Stream purpose labels. Keep values stable: they are part of what makes
/// a seeded run reproducible across versions of the caller.
pub mod label {
    pub const TX_TIMES: u64 = 1;
    pub const TX_FEES: u64 = 2;
    pub const MINE_TIMES: u64 = 3;
    pub const MINE_PICKER: u64 = 4;
    pub const STRATEGY: u64 = 5;
    pub const HEADER_DELAY: u64 = 6;
    pub const BODY_DELAY: u64 = 7;
    pub const ATTACKER_MINE: u64 = 8;
    pub const FLOOD_TIMES: u64 = 9;
    pub const ORACLE: u64 = 10;
}

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A SplitMix64 stream seeded from `(master, labels...)`.
#[derive(Debug, Clone)]
pub struct Stream {
    state: u64,
    /// Cached second Box-Muller variate.
    spare_normal: Option<f64>,
}

impl Stream {
    pub fn new(master: u64, labels: &[u64]) -> Self {
        let mut state = mix64(master ^ 0x6a09_e667_f3bc_c908);
        for &l in labels {
            state = mix64(state ^ mix64(l.wrapping_add(0x9e37_79b9_7f4a_7c15)));
        }
        Stream { state, spare_normal: None }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        mix64(self.state)
    }

    /// Uniform draw in [0, 1) with 53 bits of precision.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in (0, 1], safe as a log argument.
    #[inline]
    pub fn uniform_open(&mut self) -> f64 {
        1.0 - self.uniform()
    }

    /// Exponential inter-arrival time at the given rate.
    #[inline]
    pub fn exponential(&mut self, rate: f64) -> f64 {
        debug_assert!(rate > 0.0);
        -self.uniform_open().ln() / rate
    }

    /// Standard normal via Box-Muller; the pair's second variate is
    /// cached so draws cost one transform per two samples.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = self.uniform_open();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare_normal = Some(radius * angle.sin());
        radius * angle.cos()
    }

    /// Normal draw truncated from below; network delays use this so no
    /// sampled delay is non-causal.
    pub fn truncated_normal(&mut self, mean: f64, stddev: f64, floor: f64) -> f64 {
        (mean + stddev * self.standard_normal()).max(floor)
    }

    /// Poisson count by Knuth's product method; fine for the moderate
    /// rates (`lambda * delay <= ~30`) the oracles use.
    pub fn poisson(&mut self, mu: f64) -> u64 {
        debug_assert!((0.0..=50.0).contains(&mu), "product method misused at mu={mu}");
        let limit = (-mu).exp();
        let mut k = 0u64;
        let mut product = self.uniform_open();
        while product > limit {
            k += 1;
            product *= self.uniform_open();
        }
        k
    }

    /// Binomial count as `trials` Bernoulli draws.
    pub fn binomial(&mut self, trials: u64, p: f64) -> u64 {
        (0..trials).filter(|_| self.uniform() < p).count() as u64
    }
}
