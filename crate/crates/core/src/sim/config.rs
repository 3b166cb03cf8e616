//! Simulation configuration.

use crate::bloom;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    /// Header and body travel together; nodes learn block contents only
    /// on full delivery.
    Standard,
    /// Header-first: the signal arrives after the (much smaller) signal
    /// delay, the body after the full block delay.
    Tips,
}

impl Protocol {
    pub fn as_str(&self) -> &'static str {
        match self {
            Protocol::Standard => "standard",
            Protocol::Tips => "tips",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyKind {
    Random,
    Priority,
    TopN,
    Equilibrium,
}

impl StrategyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            StrategyKind::Random => "rand",
            StrategyKind::Priority => "priority",
            StrategyKind::TopN => "topn",
            StrategyKind::Equilibrium => "equilibrium",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeeDist {
    /// Fees drawn uniformly from [0, 1).
    Uniform01,
    /// Fees drawn uniformly from an explicit list.
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AttackerConfig {
    None,
    /// Broadcast over-threshold signals at this rate (headers/s).
    Flood { signals_per_second: f64 },
    /// Withhold bodies to stall one target transaction, renewing the
    /// header before each timeout, with `alpha` of total mining power.
    Delay { alpha: f64, target_fee: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub num_miners: u32,
    pub protocol: Protocol,
    pub strategy: StrategyKind,
    /// Block production rate, blocks/s (network total).
    pub lambda: f64,
    pub delta_mean: f64,
    pub delta_stddev: f64,
    pub tau_mean: f64,
    pub tau_stddev: f64,
    /// Transaction arrival rate, tx/s (network total).
    pub tx_rate: f64,
    pub fee_dist: FeeDist,
    /// Block capacity.
    pub n: usize,
    /// Pool capacity.
    pub m: usize,
    pub bloom_bits: u32,
    pub bloom_hashes: u8,
    /// Header timeout; 0 selects the default of three body delays.
    pub header_timeout: f64,
    pub horizon: f64,
    pub seed: u64,
    pub attacker: AttackerConfig,
    /// Honest rejection budget of the signal flood detector; 0 disables
    /// the detector.
    pub flood_eta: f64,
    pub tx_size_bytes: u32,
}

#[derive(Debug, Error, PartialEq)]
#[error("invalid simulation config: {0}")]
pub struct ConfigError(pub String);

impl SimConfig {
    /// Baseline parameters; experiments override what they sweep.
    pub fn default_with_seed(seed: u64) -> Self {
        SimConfig {
            num_miners: 10,
            protocol: Protocol::Tips,
            strategy: StrategyKind::TopN,
            lambda: 0.5,
            delta_mean: 10.0,
            delta_stddev: 1.0,
            tau_mean: 0.1,
            tau_stddev: 0.01,
            tx_rate: 1300.0,
            fee_dist: FeeDist::Uniform01,
            n: 2000,
            m: 10_000,
            bloom_bits: 20_000,
            bloom_hashes: 5,
            header_timeout: 0.0,
            horizon: 600.0,
            seed,
            attacker: AttackerConfig::None,
            flood_eta: 1e-4,
            tx_size_bytes: 500,
        }
    }

    /// Effective header timeout: the configured value, or three mean
    /// body delays when unset.
    pub fn effective_header_timeout(&self) -> f64 {
        if self.header_timeout > 0.0 {
            self.header_timeout
        } else {
            3.0 * self.delta_mean
        }
    }

    /// The nominal signal false-positive rate at full blocks, used for
    /// expected-value updates and reported in run summaries.
    pub fn epsilon(&self) -> f64 {
        bloom::false_positive_rate(self.bloom_bits, self.bloom_hashes, self.n as u32)
    }

    /// Effective delay governing collisions: body delay without
    /// signaling, signal delay with it.
    pub fn effective_delay(&self) -> f64 {
        match self.protocol {
            Protocol::Standard => self.delta_mean,
            Protocol::Tips => self.tau_mean,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: String| Err(ConfigError(m));
        if self.num_miners < 2 {
            return fail(format!("need at least 2 miners, got {}", self.num_miners));
        }
        if !(self.horizon > 0.0) {
            return fail(format!("horizon must be positive, got {}", self.horizon));
        }
        if !(self.lambda > 0.0) || !(self.tx_rate > 0.0) {
            return fail("lambda and tx_rate must be positive".into());
        }
        if !(self.tau_mean > 0.0 && self.delta_mean >= self.tau_mean) {
            return fail(format!(
                "need 0 < tau_mean <= delta_mean, got {} / {}",
                self.tau_mean, self.delta_mean
            ));
        }
        if self.delta_stddev < 0.0 || self.tau_stddev < 0.0 {
            return fail("delay stddevs must be non-negative".into());
        }
        if self.n == 0 || self.n > self.m {
            return fail(format!("need 1 <= n <= m, got n={} m={}", self.n, self.m));
        }
        if self.bloom_bits == 0 || self.bloom_hashes == 0 {
            return fail("bloom dimensions must be positive".into());
        }
        if self.n > u16::MAX as usize {
            return fail(format!("block capacity {} exceeds the signal wire format", self.n));
        }
        if !(0.0..1.0).contains(&self.flood_eta) {
            return fail(format!("flood_eta must lie in [0,1), got {}", self.flood_eta));
        }
        if let FeeDist::Custom(list) = &self.fee_dist {
            if list.is_empty() {
                return fail("custom fee list must not be empty".into());
            }
            if list.iter().any(|f| !f.is_finite() || *f < 0.0) {
                return fail("custom fees must be finite and non-negative".into());
            }
        }
        match self.attacker {
            AttackerConfig::None => {}
            AttackerConfig::Flood { signals_per_second } => {
                if !(signals_per_second > 0.0) {
                    return fail("flood rate must be positive".into());
                }
            }
            AttackerConfig::Delay { alpha, target_fee } => {
                if !(alpha > 0.0 && alpha < 1.0) {
                    return fail(format!("delay attacker power must lie in (0,1), got {alpha}"));
                }
                if !(target_fee > 0.0) {
                    return fail("delay attacker target fee must be positive".into());
                }
            }
        }
        Ok(())
    }

    /// Attach a signal-flood attacker emitting over-threshold headers.
    pub fn with_flood_attacker(mut self, signals_per_second: f64) -> Self {
        self.attacker = AttackerConfig::Flood { signals_per_second };
        self
    }

    /// Attach a body-withholding attacker stalling one high-fee target.
    pub fn with_delay_attacker(mut self, alpha: f64, target_fee: f64) -> Self {
        self.attacker = AttackerConfig::Delay { alpha, target_fee };
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        let c = SimConfig::default_with_seed(1);
        assert!(c.validate().is_ok());
        assert_eq!(c.effective_header_timeout(), 30.0);
        assert!((c.epsilon() - 0.009_430_9).abs() < 1e-6);
        assert_eq!(c.effective_delay(), 0.1);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let base = SimConfig::default_with_seed(1);
        let mut c = base.clone();
        c.num_miners = 1;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.horizon = 0.0;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.tau_mean = 20.0;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.n = c.m + 1;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.fee_dist = FeeDist::Custom(vec![]);
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.attacker = AttackerConfig::Delay { alpha: 1.5, target_fee: 1.0 };
        assert!(c.validate().is_err());
        let c = base.with_flood_attacker(10.0);
        assert!(c.validate().is_ok());
    }
}
