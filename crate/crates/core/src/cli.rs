//! Experiment runner and analytics calculator.
//!
//! Subcommands: `run` executes a sweep described by a spec file and
//! writes one summary CSV row per (variant, sweep value, repeat);
//! `analytics` evaluates a named closed form; `validate` runs the
//! formula-vs-simulation matrix; `equilibrium` prints a solved inclusion
//! strategy as CSV. Exit codes: 0 success, 1 validation failure, 2 usage
//! or spec errors.

use crate::analytics;
use crate::bloom;
use crate::metrics::{self, RunSummary};
use crate::sim::{run_simulation, FeeDist, Protocol, SimConfig, StrategyKind};
use crate::strategies::{
    equilibrium_strategy, strategy_priority, strategy_random, strategy_top_n, InclusionStrategy,
};
use crate::validation;
use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

#[derive(Parser)]
#[command(name = "tips-sim", version, about = "Signaling-protocol simulator and analytics")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment sweep described by a spec file.
    Run {
        /// Path to the experiment spec (key = value format).
        spec: PathBuf,
    },
    /// Evaluate a named closed-form formula.
    Analytics {
        /// Formula name (see `analytics list`).
        formula: String,
        /// Named parameters as `--key value` pairs.
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        params: Vec<String>,
    },
    /// Run the formula-vs-simulation cross-validation matrix.
    Validate {
        /// Tolerance profile: `default` or `tight`.
        #[arg(long, default_value = "default")]
        profile: String,
        /// Explicit tolerance scale, overriding the profile.
        #[arg(long)]
        tolerance_scale: Option<f64>,
        /// Only run checks whose name contains this substring.
        #[arg(long)]
        filter: Option<String>,
        #[arg(long, default_value_t = validation::DEFAULT_SEED)]
        seed: u64,
    },
    /// Solve the symmetric equilibrium and print the strategy as CSV.
    Equilibrium {
        /// Fee source: `uniform:<m>` or a path to one fee per line.
        #[arg(long)]
        fees: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        delay: f64,
    },
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { spec } => cmd_run(&spec),
        Command::Analytics { formula, params } => cmd_analytics(&formula, &params),
        Command::Validate { profile, tolerance_scale, filter, seed } => {
            cmd_validate(&profile, tolerance_scale, filter.as_deref(), seed)
        }
        Command::Equilibrium { fees, n, lambda, delay } => cmd_equilibrium(&fees, n, lambda, delay),
    }
}

fn usage_error(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

// --- spec files -------------------------------------------------------

/// A parsed experiment spec: a base config, an optional one-parameter
/// sweep, protocol/strategy variants, and repeat count.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub base: SimConfig,
    /// When true, each point's tx_rate is set to 1.3 * lambda * n.
    pub tx_rate_auto: bool,
    pub sweep_param: Option<String>,
    pub sweep_values: Vec<f64>,
    pub repeats: u32,
    pub variants: Vec<(Protocol, StrategyKind)>,
    pub output_summary: PathBuf,
}

#[derive(Debug)]
pub struct SpecError {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for SpecError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

fn parse_protocol(s: &str) -> Option<Protocol> {
    match s {
        "standard" => Some(Protocol::Standard),
        "tips" => Some(Protocol::Tips),
        _ => None,
    }
}

fn parse_strategy(s: &str) -> Option<StrategyKind> {
    match s {
        "rand" | "random" => Some(StrategyKind::Random),
        "priority" => Some(StrategyKind::Priority),
        "topn" => Some(StrategyKind::TopN),
        "equilibrium" => Some(StrategyKind::Equilibrium),
        _ => None,
    }
}

/// Parse the flat `key = value` format with `[sweep]` and `[output]`
/// sections. Unknown keys and malformed values report their line.
pub fn parse_spec(text: &str) -> Result<ExperimentSpec, SpecError> {
    let mut spec = ExperimentSpec {
        base: SimConfig::default_with_seed(1),
        tx_rate_auto: false,
        sweep_param: None,
        sweep_values: Vec::new(),
        repeats: 1,
        variants: Vec::new(),
        output_summary: PathBuf::from("summary.csv"),
    };
    #[derive(PartialEq)]
    enum Section {
        Base,
        Sweep,
        Output,
    }
    let mut section = Section::Base;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| SpecError { line: line_no, message };
        if line.starts_with('[') {
            section = match line {
                "[sweep]" => Section::Sweep,
                "[output]" => Section::Output,
                other => return Err(err(format!("unknown section {other}"))),
            };
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(err(format!("expected key = value, got '{line}'")));
        };
        let key = key.trim();
        let value = value.trim();
        let parse_f64 = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| err(format!("'{v}' is not a number for key '{key}'")))
        };
        let parse_usize = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| err(format!("'{v}' is not an integer for key '{key}'")))
        };
        match section {
            Section::Base => match key {
                "num_miners" => spec.base.num_miners = parse_usize(value)? as u32,
                "protocol" => {
                    spec.base.protocol = parse_protocol(value)
                        .ok_or_else(|| err(format!("unknown protocol '{value}'")))?
                }
                "strategy" => {
                    spec.base.strategy = parse_strategy(value)
                        .ok_or_else(|| err(format!("unknown strategy '{value}'")))?
                }
                "lambda" => spec.base.lambda = parse_f64(value)?,
                "delta_mean" => spec.base.delta_mean = parse_f64(value)?,
                "delta_stddev" => spec.base.delta_stddev = parse_f64(value)?,
                "tau_mean" => spec.base.tau_mean = parse_f64(value)?,
                "tau_stddev" => spec.base.tau_stddev = parse_f64(value)?,
                "tx_rate" => {
                    if value == "auto" {
                        spec.tx_rate_auto = true;
                    } else {
                        spec.base.tx_rate = parse_f64(value)?;
                    }
                }
                "fee_dist" => {
                    spec.base.fee_dist = if value == "uniform" {
                        FeeDist::Uniform01
                    } else if let Some(list) = value.strip_prefix("custom:") {
                        let fees: Result<Vec<f64>, _> =
                            list.split(',').map(|v| v.trim().parse::<f64>()).collect();
                        FeeDist::Custom(
                            fees.map_err(|_| err(format!("bad custom fee list '{list}'")))?,
                        )
                    } else {
                        return Err(err(format!("unknown fee_dist '{value}'")));
                    }
                }
                "n" => spec.base.n = parse_usize(value)?,
                "m" => spec.base.m = parse_usize(value)?,
                "bloom_bits" => spec.base.bloom_bits = parse_usize(value)? as u32,
                "bloom_hashes" => spec.base.bloom_hashes = parse_usize(value)? as u8,
                "header_timeout" => spec.base.header_timeout = parse_f64(value)?,
                "horizon" => spec.base.horizon = parse_f64(value)?,
                "seed" => {
                    spec.base.seed = value
                        .parse::<u64>()
                        .map_err(|_| err(format!("'{value}' is not a seed")))?
                }
                "flood_eta" => spec.base.flood_eta = parse_f64(value)?,
                "tx_size_bytes" => spec.base.tx_size_bytes = parse_usize(value)? as u32,
                "attacker" => {
                    spec.base.attacker = if value == "none" {
                        crate::sim::AttackerConfig::None
                    } else if let Some(rate) = value.strip_prefix("flood:") {
                        crate::sim::AttackerConfig::Flood {
                            signals_per_second: parse_f64(rate.trim())?,
                        }
                    } else if let Some(rest) = value.strip_prefix("delay:") {
                        let mut parts = rest.split(':');
                        let alpha = parse_f64(parts.next().unwrap_or("").trim())?;
                        let target_fee = parse_f64(parts.next().unwrap_or("1.0").trim())?;
                        crate::sim::AttackerConfig::Delay { alpha, target_fee }
                    } else {
                        return Err(err(format!("unknown attacker '{value}'")));
                    }
                }
                other => return Err(err(format!("unknown key '{other}'"))),
            },
            Section::Sweep => match key {
                "param" => spec.sweep_param = Some(value.to_string()),
                "values" => {
                    let values: Result<Vec<f64>, _> =
                        value.split(',').map(|v| v.trim().parse::<f64>()).collect();
                    spec.sweep_values =
                        values.map_err(|_| err(format!("bad sweep values '{value}'")))?;
                }
                "repeats" => {
                    spec.repeats = parse_usize(value)? as u32;
                    if spec.repeats == 0 {
                        return Err(err("repeats must be at least 1".into()));
                    }
                }
                "variants" => {
                    for item in value.split(',') {
                        let item = item.trim();
                        let Some((p, s)) = item.split_once(':') else {
                            return Err(err(format!(
                                "variant '{item}' must be protocol:strategy"
                            )));
                        };
                        let protocol = parse_protocol(p.trim())
                            .ok_or_else(|| err(format!("unknown protocol '{p}'")))?;
                        let strategy = parse_strategy(s.trim())
                            .ok_or_else(|| err(format!("unknown strategy '{s}'")))?;
                        spec.variants.push((protocol, strategy));
                    }
                }
                other => return Err(err(format!("unknown sweep key '{other}'"))),
            },
            Section::Output => match key {
                "summary" => spec.output_summary = PathBuf::from(value),
                other => return Err(err(format!("unknown output key '{other}'"))),
            },
        }
    }
    if spec.variants.is_empty() {
        spec.variants.push((spec.base.protocol, spec.base.strategy));
    }
    if spec.sweep_param.is_some() && spec.sweep_values.is_empty() {
        return Err(SpecError { line: 0, message: "sweep param given without values".into() });
    }
    // Validate sweep values against the named parameter eagerly.
    if let Some(param) = &spec.sweep_param {
        for &v in &spec.sweep_values {
            let mut probe = spec.base.clone();
            apply_sweep_value(&mut probe, param, v)
                .map_err(|message| SpecError { line: 0, message })?;
        }
    }
    Ok(spec)
}

fn apply_sweep_value(config: &mut SimConfig, param: &str, value: f64) -> Result<(), String> {
    match param {
        "lambda" => config.lambda = value,
        "delta_mean" => config.delta_mean = value,
        "tau_mean" => config.tau_mean = value,
        "tx_rate" => config.tx_rate = value,
        "horizon" => config.horizon = value,
        "header_timeout" => config.header_timeout = value,
        "flood_eta" => config.flood_eta = value,
        "n" => config.n = value as usize,
        "m" => config.m = value as usize,
        "bloom_bits" => config.bloom_bits = value as u32,
        "bloom_hashes" => config.bloom_hashes = value as u8,
        "num_miners" => config.num_miners = value as u32,
        other => return Err(format!("unknown sweep parameter '{other}'")),
    }
    Ok(())
}

/// Deterministic seed for a sweep point: base seed plus the flat point
/// index times 10007 plus the repeat index. The flat index enumerates
/// (variant, value) pairs in listed order.
pub fn point_seed(base_seed: u64, point_index: u64, repeat: u64) -> u64 {
    base_seed.wrapping_add(point_index.wrapping_mul(10_007)).wrapping_add(repeat)
}

/// Expand a spec into the full, ordered task list.
pub fn expand_spec(spec: &ExperimentSpec) -> Vec<SimConfig> {
    let values: Vec<Option<f64>> = if spec.sweep_param.is_some() {
        spec.sweep_values.iter().copied().map(Some).collect()
    } else {
        vec![None]
    };
    let mut tasks = Vec::new();
    for (vi, (protocol, strategy)) in spec.variants.iter().enumerate() {
        for (ji, value) in values.iter().enumerate() {
            let point_index = (vi * values.len() + ji) as u64;
            for repeat in 0..spec.repeats {
                let mut config = spec.base.clone();
                config.protocol = *protocol;
                config.strategy = *strategy;
                if let (Some(param), Some(v)) = (&spec.sweep_param, value) {
                    apply_sweep_value(&mut config, param, *v).expect("validated at parse");
                }
                if spec.tx_rate_auto {
                    config.tx_rate = 1.3 * config.lambda * config.n as f64;
                }
                config.seed = point_seed(spec.base.seed, point_index, repeat as u64);
                tasks.push(config);
            }
        }
    }
    tasks
}

fn worker_count() -> usize {
    let cap = std::env::var("TIPS_SIM_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|v| *v >= 1);
    let cpus = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    cap.unwrap_or_else(|| cpus.min(4))
}

/// Run all tasks on a worker pool; results come back in task order
/// regardless of completion order.
pub fn run_sweep(tasks: &[SimConfig]) -> Result<Vec<RunSummary>, String> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<RunSummary>>> = Mutex::new(vec![None; tasks.len()]);
    let first_error: Mutex<Option<String>> = Mutex::new(None);
    std::thread::scope(|scope| {
        for _ in 0..worker_count().min(tasks.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= tasks.len() {
                    break;
                }
                match run_simulation(&tasks[i]).map_err(|e| e.to_string()).and_then(|trace| {
                    metrics::summarize(&trace).map_err(|e| e.to_string())
                }) {
                    Ok(summary) => results.lock().expect("poisoned").as_mut_slice()[i] = Some(summary),
                    Err(e) => {
                        let mut slot = first_error.lock().expect("poisoned");
                        if slot.is_none() {
                            *slot = Some(format!("task {i}: {e}"));
                        }
                    }
                }
            });
        }
    });
    if let Some(e) = first_error.into_inner().expect("poisoned") {
        return Err(e);
    }
    Ok(results
        .into_inner()
        .expect("poisoned")
        .into_iter()
        .map(|r| r.expect("all tasks completed"))
        .collect())
}

/// Render the summary CSV: provenance comment, header, one row per task.
pub fn summary_csv(spec_bytes: &[u8], rows: &[RunSummary]) -> String {
    let hash = Sha256::digest(spec_bytes);
    let mut out = String::new();
    out.push_str(&format!("# spec_sha256={hash:x}\n"));
    out.push_str(RunSummary::csv_header());
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv_row());
        out.push('\n');
    }
    out
}

fn cmd_run(path: &Path) -> ExitCode {
    let text = match std::fs::read(path) {
        Ok(t) => t,
        Err(e) => return usage_error(&format!("cannot read {}: {e}", path.display())),
    };
    let spec = match parse_spec(&String::from_utf8_lossy(&text)) {
        Ok(s) => s,
        Err(e) => return usage_error(&format!("{}: {e}", path.display())),
    };
    let tasks = expand_spec(&spec);
    for (i, task) in tasks.iter().enumerate() {
        if let Err(e) = task.validate() {
            return usage_error(&format!("{}: task {i}: {e}", path.display()));
        }
    }
    eprintln!("running {} simulations on {} workers", tasks.len(), worker_count());
    let rows = match run_sweep(&tasks) {
        Ok(r) => r,
        Err(e) => return usage_error(&e),
    };
    let csv = summary_csv(&text, &rows);
    if let Err(e) = std::fs::write(&spec.output_summary, csv) {
        return usage_error(&format!("cannot write {}: {e}", spec.output_summary.display()));
    }
    println!("{} rows -> {}", rows.len(), spec.output_summary.display());
    ExitCode::SUCCESS
}

// --- analytics --------------------------------------------------------

/// Format with the given number of significant digits, plain decimal.
pub fn format_significant(x: f64, digits: i32) -> String {
    if x == 0.0 {
        return "0.00000000".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (digits - 1 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

struct Params(HashMap<String, String>);

impl Params {
    fn parse(args: &[String]) -> Result<Self, String> {
        let mut map = HashMap::new();
        let mut iter = args.iter();
        while let Some(key) = iter.next() {
            let Some(name) = key.strip_prefix("--") else {
                return Err(format!("expected --key, got '{key}'"));
            };
            let Some(value) = iter.next() else {
                return Err(format!("missing value for --{name}"));
            };
            map.insert(name.to_string(), value.clone());
        }
        Ok(Params(map))
    }

    fn f64(&self, key: &str) -> Result<f64, String> {
        self.0
            .get(key)
            .ok_or(format!("missing required parameter --{key}"))?
            .parse::<f64>()
            .map_err(|_| format!("parameter --{key} is not a number"))
    }

    fn usize(&self, key: &str) -> Result<usize, String> {
        self.0
            .get(key)
            .ok_or(format!("missing required parameter --{key}"))?
            .parse::<usize>()
            .map_err(|_| format!("parameter --{key} is not an integer"))
    }


    fn str_or(&self, key: &str, default: &'static str) -> String {
        self.0.get(key).cloned().unwrap_or_else(|| default.to_string())
    }
}

fn load_fees(source: &str, m_hint: Option<usize>) -> Result<Vec<f64>, String> {
    if source == "uniform" {
        let m = m_hint.ok_or("fees 'uniform' needs --m")?;
        return Ok(validation::uniform_fee_profile(m));
    }
    if let Some(m) = source.strip_prefix("uniform:") {
        let m = m.parse::<usize>().map_err(|_| "bad uniform:<m> count")?;
        return Ok(validation::uniform_fee_profile(m));
    }
    let text = std::fs::read_to_string(source).map_err(|e| format!("cannot read {source}: {e}"))?;
    let mut fees = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        fees.push(
            line.parse::<f64>()
                .map_err(|_| format!("{source}:{}: '{line}' is not a fee", i + 1))?,
        );
    }
    if fees.windows(2).any(|w| w[0] < w[1]) {
        fees.sort_unstable_by(|a, b| b.total_cmp(a));
    }
    Ok(fees)
}

fn strategy_for(
    name: &str,
    fees: &[f64],
    n: usize,
    lambda: f64,
    delay: f64,
) -> Result<InclusionStrategy, String> {
    match name {
        "topn" => strategy_top_n(fees, n).map_err(|e| e.to_string()),
        "rand" | "random" => strategy_random(fees.len(), n).map_err(|e| e.to_string()),
        "priority" => strategy_priority(fees, n).map_err(|e| e.to_string()),
        "equilibrium" => equilibrium_strategy(fees, n, lambda, delay)
            .map(|s| s.strategy)
            .map_err(|e| e.to_string()),
        other => Err(format!("unknown strategy '{other}'")),
    }
}

fn eval_formula(formula: &str, p: &Params) -> Result<f64, String> {
    match formula {
        "bloom-fpr" => Ok(bloom::false_positive_rate(
            p.usize("b")? as u32,
            p.usize("h")? as u8,
            p.usize("n")? as u32,
        )),
        "flood-threshold" => Ok(bloom::flood_threshold(
            p.usize("b")? as u32,
            p.usize("h")? as u8,
            p.usize("n")? as u32,
            p.f64("eta")?,
        )),
        "reward-coefficient" => {
            Ok(crate::strategies::reward_coefficient(p.f64("p")?, p.f64("lambda")?, p.f64("delay")?))
        }
        "reward-coefficient-inverse" => Ok(crate::strategies::reward_coefficient_inverse(
            p.f64("y")?,
            p.f64("lambda")?,
            p.f64("delay")?,
        )),
        "utilization" | "tps" | "fsr" => {
            let n = p.usize("n")?;
            let lambda = p.f64("lambda")?;
            let delay = p.f64("delay")?;
            let fees = load_fees(&p.str_or("fees", "uniform"), p.usize("m").ok())?;
            let strat = strategy_for(&p.str_or("strategy", "topn"), &fees, n, lambda, delay)?;
            Ok(match formula {
                "utilization" => analytics::utilization(&strat, lambda, delay),
                "tps" => analytics::throughput(&strat, lambda, delay),
                _ => analytics::fee_service_rate(&strat, &fees, lambda, delay)
                    .map_err(|e| e.to_string())?,
            })
        }
        "random-gap" => {
            let fees = load_fees(&p.str_or("fees", "uniform"), p.usize("m").ok())?;
            Ok(analytics::random_gap_xi(&fees, p.usize("n")?, p.f64("lambda")?, p.f64("delay")?))
        }
        "topn-gap" => {
            let fees = load_fees(&p.str_or("fees", "uniform"), p.usize("m").ok())?;
            Ok(analytics::topn_gap_eta(&fees, p.usize("n")?, p.f64("lambda")?, p.f64("tau")?))
        }
        "uniqueness-threshold" => analytics::topn_uniqueness_threshold(
            p.f64("fee-n")?,
            p.f64("fee-n1")?,
            p.f64("lambda")?,
        )
        .map_err(|e| e.to_string()),
        "efficiency-bound" => Ok(analytics::efficiency_lower_bound(
            p.f64("lambda")?,
            p.f64("tau")?,
            p.usize("m")?,
            p.usize("n")?,
        )),
        "efficiency-bound-simple" => {
            Ok(analytics::efficiency_lower_bound_simple(p.f64("lambda")?, p.f64("tau")?))
        }
        "limit-tps" => analytics::limit_tps(p.f64("marginal-delay")?).map_err(|e| e.to_string()),
        "limit-tps-ratio" => analytics::limit_tps_ratio(p.f64("tx-bits")?, p.f64("signal-bits")?)
            .map_err(|e| e.to_string()),
        "delay-attack" => {
            Ok(analytics::delay_attack_expectation(p.f64("alpha")?, p.f64("lambda")?, p.f64("T")?))
        }
        other => Err(format!(
            "unknown formula '{other}'; known: bloom-fpr flood-threshold reward-coefficient \
             reward-coefficient-inverse utilization tps fsr random-gap topn-gap \
             uniqueness-threshold efficiency-bound efficiency-bound-simple limit-tps \
             limit-tps-ratio delay-attack"
        )),
    }
}

fn cmd_analytics(formula: &str, args: &[String]) -> ExitCode {
    let params = match Params::parse(args) {
        Ok(p) => p,
        Err(e) => return usage_error(&e),
    };
    match eval_formula(formula, &params) {
        Ok(value) => {
            println!("{}", format_significant(value, 9));
            ExitCode::SUCCESS
        }
        Err(e) => usage_error(&e),
    }
}

// --- validate ----------------------------------------------------------

fn cmd_validate(
    profile: &str,
    tolerance_scale: Option<f64>,
    filter: Option<&str>,
    seed: u64,
) -> ExitCode {
    let scale = match (tolerance_scale, profile) {
        (Some(s), _) => s,
        (None, "default") => 1.0,
        (None, "tight") => 0.001,
        (None, other) => return usage_error(&format!("unknown profile '{other}'")),
    };
    let results = validation::run_matrix(filter, scale, seed);
    for r in &results {
        println!("{}", r.line());
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("{} checks, {} failed (tolerance scale {scale})", results.len(), failed);
    if failed > 0 {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}

// --- equilibrium --------------------------------------------------------

fn cmd_equilibrium(fees_source: &str, n: usize, lambda: f64, delay: f64) -> ExitCode {
    let fees = match load_fees(fees_source, None) {
        Ok(f) => f,
        Err(e) => return usage_error(&e),
    };
    match equilibrium_strategy(&fees, n, lambda, delay) {
        Ok(solution) => {
            println!("# cutoff_index={}", solution.cutoff_index);
            println!("# threshold={}", format_significant(solution.threshold, 9));
            println!("index,fee,p");
            for (i, (fee, prob)) in
                fees.iter().zip(solution.strategy.probabilities()).enumerate()
            {
                println!("{i},{fee},{prob}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => usage_error(&e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn format_significant_matches_reference_points() {
        assert_eq!(format_significant(1.0 / 6.0, 9), "0.166666667");
        assert_eq!(format_significant(1000.0 / 1.05, 9), "952.380952");
        assert_eq!(format_significant(0.0, 9), "0.00000000");
        assert_eq!(format_significant(25.0, 9), "25.0000000");
    }

    #[test]
    fn spec_parsing_round_trip() {
        let text = "\
# fig5-like sweep
protocol = tips
strategy = topn
lambda = 0.5
n = 100
m = 500
bloom_bits = 2000
bloom_hashes = 5
horizon = 200
seed = 42
tx_rate = auto

[sweep]
param = lambda
values = 0.1, 0.2
repeats = 3
variants = standard:topn, tips:topn, tips:equilibrium

[output]
summary = out.csv
";
        let spec = parse_spec(text).expect("valid spec");
        assert_eq!(spec.repeats, 3);
        assert_eq!(spec.variants.len(), 3);
        assert_eq!(spec.sweep_values, vec![0.1, 0.2]);
        let tasks = expand_spec(&spec);
        assert_eq!(tasks.len(), 3 * 2 * 3);
        // Seeds follow base + point*10007 + repeat with the documented
        // flat point order.
        assert_eq!(tasks[0].seed, 42);
        assert_eq!(tasks[1].seed, 43);
        assert_eq!(tasks[3].seed, 42 + 10_007);
        // tx_rate auto scales with the swept lambda.
        assert!((tasks[0].tx_rate - 1.3 * 0.1 * 100.0).abs() < 1e-12);
        // Variant fields land in the expanded configs.
        assert_eq!(tasks[0].protocol, Protocol::Standard);
        assert_eq!(tasks[2 * 3].protocol, Protocol::Tips);
    }

    #[test]
    fn spec_errors_carry_line_numbers() {
        let bad = "protocol = tips\nlambd = 0.5\n";
        let err = parse_spec(bad).unwrap_err();
        assert_eq!(err.line, 2);
        assert!(err.message.contains("lambd"));
        let bad = "[sweep]\nparam = warp\nvalues = 1\n";
        let err = parse_spec(bad).unwrap_err();
        assert!(err.message.contains("warp"));
    }

    #[test]
    fn analytics_formulas_match_reference_values() {
        let p = Params::parse(&[
            "--strategy".into(),
            "topn".into(),
            "--lambda".into(),
            "0.5".into(),
            "--delay".into(),
            "10".into(),
            "--n".into(),
            "2000".into(),
            "--m".into(),
            "10000".into(),
        ])
        .unwrap();
        let u = eval_formula("utilization", &p).unwrap();
        assert_eq!(format_significant(u, 9), "0.166666667");
        let p = Params::parse(&[
            "--b".into(),
            "20000".into(),
            "--h".into(),
            "5".into(),
            "--n".into(),
            "2500".into(),
        ])
        .unwrap();
        let fpr = eval_formula("bloom-fpr", &p).unwrap();
        assert!((fpr - 0.0216790).abs() < 1e-5);
        let p = Params::parse(&[
            "--alpha".into(),
            "0".into(),
            "--lambda".into(),
            "0.5".into(),
            "--T".into(),
            "2".into(),
        ])
        .unwrap();
        assert_eq!(eval_formula("delay-attack", &p).unwrap(), 0.0);
    }

    #[test]
    fn unknown_formula_and_missing_params_error() {
        let p = Params::parse(&[]).unwrap();
        assert!(eval_formula("no-such-formula", &p).is_err());
        assert!(eval_formula("bloom-fpr", &p).is_err());
        assert!(Params::parse(&["--lone".into()]).is_err());
        assert!(Params::parse(&["bare".into(), "1".into()]).is_err());
    }
}
