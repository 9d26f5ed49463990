//! Slot-level Monte Carlo simulation of the clustered network.
//!
//! Each run draws every active user's chain state and transitions from its own
//! ChaCha8 stream, keyed by `(run << 32) | user` under a shared `base_seed`, so
//! runs are reproducible bit for bit and independent of scheduling.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{AoiError, Result};
use crate::model::{NetworkConfig, SecondOrderStats};
use crate::policies::{ata_initial_max, decide_transmit, AtaUserState, ChainState, PolicySpec, TransmitRule};

/// Name of the random generator and substream layout, recorded with every outcome.
pub const GENERATOR: &str = "chacha8 stream=(run<<32)|user";

pub const DEFAULT_SLOTS: u64 = 100_000;
pub const DEFAULT_RUNS: u32 = 10;
pub const DEFAULT_BASE_SEED: u64 = 20_240_601;
pub const DEFAULT_WARMUP: u64 = 1_000;
pub const DEFAULT_BATCH_LENGTH: u64 = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimParams {
    pub slots: u64,
    pub runs: u32,
    pub base_seed: u64,
    pub warmup_slots: u64,
    pub batch_length: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            slots: DEFAULT_SLOTS,
            runs: DEFAULT_RUNS,
            base_seed: DEFAULT_BASE_SEED,
            warmup_slots: DEFAULT_WARMUP,
            batch_length: DEFAULT_BATCH_LENGTH,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(AoiError::invalid("runs must be at least 1"));
        }
        if self.slots <= self.warmup_slots {
            return Err(AoiError::invalid(format!(
                "slots ({}) must exceed warmup ({})",
                self.slots, self.warmup_slots
            )));
        }
        if self.batch_length == 0 {
            return Err(AoiError::invalid("batch_length must be positive"));
        }
        Ok(())
    }

    pub fn measured_slots(&self) -> u64 {
        self.slots.saturating_sub(self.warmup_slots)
    }
}

/// Mean and batch-means temporal variance of one 0/1 sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchMeansEstimate {
    pub mean: f64,
    pub temporal_variance: f64,
    pub batches: usize,
}

impl BatchMeansEstimate {
    /// Approximate standard error of the variance estimate, `v̂²·√(2/(B−1))`.
    pub fn variance_std_error(&self) -> f64 {
        self.temporal_variance * (2.0 / (self.batches as f64 - 1.0)).sqrt()
    }
}

/// Streaming form of [`batch_means`]: feed indicators one at a time.
#[derive(Debug, Clone)]
pub struct BatchAccumulator {
    length: u64,
    in_batch: u64,
    current: u64,
    total: u64,
    count: u64,
    batch_sums: Vec<u64>,
}

impl BatchAccumulator {
    pub fn new(batch_length: u64) -> Self {
        BatchAccumulator { length: batch_length, in_batch: 0, current: 0, total: 0, count: 0, batch_sums: Vec::new() }
    }

    pub fn push(&mut self, success: bool) {
        let x = success as u64;
        self.total += x;
        self.count += 1;
        self.current += x;
        self.in_batch += 1;
        if self.in_batch == self.length {
            self.batch_sums.push(self.current);
            self.current = 0;
            self.in_batch = 0;
        }
    }

    /// Mean over every pushed value; variance over full batches only.
    pub fn finish(&self) -> Result<BatchMeansEstimate> {
        let b = self.batch_sums.len();
        if b < 2 || self.length == 0 {
            return Err(AoiError::invalid(format!(
                "need at least two full batches of length {}, got {} values",
                self.length, self.count
            )));
        }
        let mean = self.total as f64 / self.count as f64;
        let l = self.length as f64;
        let ss: f64 = self
            .batch_sums
            .iter()
            .map(|&sum| {
                let d = sum as f64 - l * mean;
                d * d / l
            })
            .sum();
        Ok(BatchMeansEstimate { mean, temporal_variance: ss / (b as f64 - 1.0), batches: b })
    }
}

/// Batch-means estimate over `indicators` with batches of `batch_length`; a
/// trailing partial batch is dropped from the variance.
pub fn batch_means(indicators: &[bool], batch_length: usize) -> Result<BatchMeansEstimate> {
    if batch_length == 0 || indicators.len() < 2 * batch_length {
        return Err(AoiError::invalid(format!(
            "sequence of length {} is shorter than two batches of length {batch_length}",
            indicators.len()
        )));
    }
    let mut acc = BatchAccumulator::new(batch_length as u64);
    for &x in indicators {
        acc.push(x);
    }
    acc.finish()
}

/// Empirical `(m, v²)` of a delivery indicator sequence.
pub fn estimate_second_order(indicators: &[bool], batch_length: usize) -> Result<SecondOrderStats> {
    let e = batch_means(indicators, batch_length)?;
    SecondOrderStats::new(e.mean, e.temporal_variance)
}

/// Per-run empirical results.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunRecord {
    pub run_index: u32,
    pub active_moment: f64,
    pub passive_moment: f64,
    pub objective: f64,
    pub m_hat_a: f64,
    pub v2_hat_a: f64,
    pub m_hat_p: f64,
    pub v2_hat_p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    pub empirical_active_moment: f64,
    pub empirical_passive_moment: f64,
    pub empirical_objective: f64,
    pub empirical_m_a: f64,
    pub empirical_v2_a: f64,
    pub empirical_m_p: f64,
    pub empirical_v2_p: f64,
    pub per_run: Vec<RunRecord>,
    pub generator: &'static str,
}

impl SimOutcome {
    fn from_runs(config: &NetworkConfig, per_run: Vec<RunRecord>) -> Self {
        let mean = |f: fn(&RunRecord) -> f64| per_run.iter().map(f).sum::<f64>() / per_run.len() as f64;
        let active = mean(|r| r.active_moment);
        let passive = mean(|r| r.passive_moment);
        SimOutcome {
            empirical_active_moment: active,
            empirical_passive_moment: passive,
            empirical_objective: config.weigh(active, passive),
            empirical_m_a: mean(|r| r.m_hat_a),
            empirical_v2_a: mean(|r| r.v2_hat_a),
            empirical_m_p: mean(|r| r.m_hat_p),
            empirical_v2_p: mean(|r| r.v2_hat_p),
            per_run,
            generator: GENERATOR,
        }
    }

    /// Standard error of the across-run mean of `f`; zero with a single run.
    pub fn std_error(&self, f: impl Fn(&RunRecord) -> f64) -> f64 {
        let k = self.per_run.len();
        if k < 2 {
            return 0.0;
        }
        let values: Vec<f64> = self.per_run.iter().map(f).collect();
        let mean = values.iter().sum::<f64>() / k as f64;
        let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k as f64 - 1.0);
        (var / k as f64).sqrt()
    }

    pub fn objective_std_error(&self) -> f64 {
        self.std_error(|r| r.objective)
    }
}

/// Receives every simulated slot (warmup included).
pub trait SlotObserver {
    fn observe(&mut self, slot: u64, transmit: &[bool], cluster_success: &[bool], passive_success: bool);
}

impl<F: FnMut(u64, &[bool], &[bool], bool)> SlotObserver for F {
    fn observe(&mut self, slot: u64, transmit: &[bool], cluster_success: &[bool], passive_success: bool) {
        self(slot, transmit, cluster_success, passive_success)
    }
}

fn user_rng(base_seed: u64, run: u32, user: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(((run as u64) << 32) | user as u64);
    rng
}

/// Simulates one run; `observer` sees each slot's transmissions and outcomes.
pub fn simulate_run(
    config: &NetworkConfig,
    policy: &PolicySpec,
    sim: &SimParams,
    run_index: u32,
    mut observer: Option<&mut dyn SlotObserver>,
) -> Result<RunRecord> {
    config.validate()?;
    sim.validate()?;
    let n = config.n as usize;
    let c = config.c as usize;
    let users = n * c;
    let z = config.z as i32;

    let mut rngs: Vec<ChaCha8Rng> = (0..users).map(|u| user_rng(sim.base_seed, run_index, u)).collect();
    let mut states = vec![ChainState::Idle; users];
    let mut ata = vec![AtaUserState::default(); users];
    match policy.rule() {
        TransmitRule::Chain(chain) => {
            for (state, rng) in states.iter_mut().zip(rngs.iter_mut()) {
                if rng.random::<f64>() < chain.lambda() {
                    *state = ChainState::Tx;
                }
            }
        }
        TransmitRule::AgeThreshold { threshold, .. } => {
            let hi = ata_initial_max(*threshold);
            for (a, rng) in ata.iter_mut().zip(rngs.iter_mut()) {
                a.believed_aoi = rng.random_range(1..=hi);
            }
        }
    }

    let mut active_aoi = vec![1u64; users];
    let mut passive_aoi = 1u64;
    let mut transmit = vec![false; users];
    let mut cluster_tx = vec![0u32; c];
    let mut cluster_last = vec![0usize; c];
    let mut cluster_success = vec![false; c];
    let mut active_sum = 0.0f64;
    let mut passive_sum = 0.0f64;
    let mut active_acc: Vec<BatchAccumulator> = (0..users).map(|_| BatchAccumulator::new(sim.batch_length)).collect();
    let mut passive_acc = BatchAccumulator::new(sim.batch_length);

    for slot in 0..sim.slots {
        cluster_tx.iter_mut().for_each(|x| *x = 0);
        for u in 0..users {
            let draw: f64 = rngs[u].random();
            let d = decide_transmit(policy, states[u], ata[u], draw);
            transmit[u] = d.transmit;
            states[u] = d.next_state;
            ata[u] = d.next_ata;
            if d.transmit {
                cluster_tx[u / n] += 1;
                cluster_last[u / n] = u;
            }
        }
        let mut any_tx = false;
        for k in 0..c {
            cluster_success[k] = cluster_tx[k] == 1;
            any_tx |= cluster_tx[k] > 0;
        }
        let passive_success = !any_tx;

        let measured = slot >= sim.warmup_slots;
        for u in 0..users {
            let k = u / n;
            let delivered = cluster_success[k] && cluster_last[k] == u;
            active_aoi[u] = if delivered { 1 } else { active_aoi[u] + 1 };
            if measured {
                active_sum += (active_aoi[u] as f64).powi(z);
                active_acc[u].push(delivered);
            }
        }
        passive_aoi = if passive_success { 1 } else { passive_aoi + 1 };
        if measured {
            passive_sum += (passive_aoi as f64).powi(z);
            passive_acc.push(passive_success);
        }
        if let Some(obs) = observer.as_deref_mut() {
            obs.observe(slot, &transmit, &cluster_success, passive_success);
        }
    }

    let measured = sim.measured_slots() as f64;
    let active_moment = active_sum / (measured * users as f64);
    let passive_moment = passive_sum / measured;
    // Fewer than two full batches leave the temporal variance unestimated (NaN).
    let estimate = |acc: &BatchAccumulator| match acc.finish() {
        Ok(e) => (e.mean, e.temporal_variance),
        Err(_) => (acc.total as f64 / acc.count as f64, f64::NAN),
    };
    let mut m_a = 0.0;
    let mut v2_a = 0.0;
    for acc in &active_acc {
        let (m, v2) = estimate(acc);
        m_a += m;
        v2_a += v2;
    }
    let (m_p, v2_p) = estimate(&passive_acc);
    Ok(RunRecord {
        run_index,
        active_moment,
        passive_moment,
        objective: config.weigh(active_moment, passive_moment),
        m_hat_a: m_a / users as f64,
        v2_hat_a: v2_a / users as f64,
        m_hat_p: m_p,
        v2_hat_p: v2_p,
    })
}

/// Runs `sim.runs` independent runs (in parallel) and averages them in run order.
pub fn simulate(config: &NetworkConfig, policy: &PolicySpec, sim: &SimParams) -> Result<SimOutcome> {
    config.validate()?;
    sim.validate()?;
    let per_run = (0..sim.runs)
        .into_par_iter()
        .map(|run| simulate_run(config, policy, sim, run, None))
        .collect::<Result<Vec<_>>>()?;
    Ok(SimOutcome::from_runs(config, per_run))
}

/// Writes one run as CSV: `slot,tx_0..,ok_0..,passive` with 0/1 values.
pub fn write_trace<W: Write>(
    config: &NetworkConfig,
    policy: &PolicySpec,
    sim: &SimParams,
    run_index: u32,
    out: &mut W,
) -> Result<RunRecord> {
    let users = config.total_users();
    let mut header = String::from("slot");
    for u in 0..users {
        header.push_str(&format!(",tx_{u}"));
    }
    for k in 0..config.c {
        header.push_str(&format!(",ok_{k}"));
    }
    header.push_str(",passive");
    let mut io_err: Option<std::io::Error> = None;
    if let Err(e) = writeln!(out, "{header}") {
        io_err = Some(e);
    }
    let mut line = String::new();
    let mut sink = |slot: u64, tx: &[bool], ok: &[bool], passive: bool| {
        if io_err.is_some() {
            return;
        }
        line.clear();
        line.push_str(&slot.to_string());
        for &b in tx.iter().chain(ok) {
            line.push_str(if b { ",1" } else { ",0" });
        }
        line.push_str(if passive { ",1" } else { ",0" });
        if let Err(e) = writeln!(out, "{line}") {
            io_err = Some(e);
        }
    };
    let record = simulate_run(config, policy, sim, run_index, Some(&mut sink))?;
    match io_err {
        Some(e) => Err(AoiError::invalid(format!("cannot write trace: {e}"))),
        None => Ok(record),
    }
}

/// Result of replaying a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceReplay {
    pub slots: u64,
    pub active_moment: f64,
    pub passive_moment: f64,
    /// Largest number of consecutive slots any single user transmitted in.
    pub longest_transmit_streak: u64,
}

/// Re-derives AoI from a trace written by [`write_trace`], checking the
/// collision and passive-detection rules on every slot.
pub fn replay_trace<R: BufRead>(reader: R, config: &NetworkConfig, warmup_slots: u64) -> Result<TraceReplay> {
    let n = config.n as usize;
    let c = config.c as usize;
    let users = n * c;
    let z = config.z as i32;
    let bad = |msg: String| AoiError::InternalInconsistency(msg);

    let mut lines = reader.lines();
    let header = lines.next().ok_or_else(|| bad("empty trace".into()))?.map_err(|e| bad(e.to_string()))?;
    if header.split(',').count() != users + c + 2 {
        return Err(bad(format!("trace header has wrong width: {header}")));
    }
    let mut aoi = vec![1u64; users];
    let mut passive_aoi = 1u64;
    let mut streak = vec![0u64; users];
    let mut longest = 0;
    let (mut active_sum, mut passive_sum, mut measured, mut slots) = (0.0, 0.0, 0u64, 0u64);
    for line in lines {
        let line = line.map_err(|e| bad(e.to_string()))?;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != users + c + 2 {
            return Err(bad(format!("trace line has wrong width: {line}")));
        }
        let slot: u64 = fields[0].parse().map_err(|_| bad(format!("bad slot index in: {line}")))?;
        if slot != slots {
            return Err(bad(format!("expected slot {slots}, found {slot}")));
        }
        let bit = |s: &str| match s {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(bad(format!("non-binary field '{s}'"))),
        };
        let tx = fields[1..=users].iter().map(|s| bit(s)).collect::<Result<Vec<_>>>()?;
        let ok = fields[users + 1..users + 1 + c].iter().map(|s| bit(s)).collect::<Result<Vec<_>>>()?;
        let passive = bit(fields[users + c + 1])?;

        for k in 0..c {
            let count = tx[k * n..(k + 1) * n].iter().filter(|&&b| b).count();
            if ok[k] != (count == 1) {
                return Err(bad(format!("slot {slot}: cluster {k} flag disagrees with {count} transmitters")));
            }
        }
        if passive != tx.iter().all(|&b| !b) {
            return Err(bad(format!("slot {slot}: passive flag disagrees with transmissions")));
        }
        let record = slot >= warmup_slots;
        for u in 0..users {
            let delivered = tx[u] && ok[u / n];
            aoi[u] = if delivered { 1 } else { aoi[u] + 1 };
            streak[u] = if tx[u] { streak[u] + 1 } else { 0 };
            longest = longest.max(streak[u]);
            if record {
                active_sum += (aoi[u] as f64).powi(z);
            }
        }
        passive_aoi = if passive { 1 } else { passive_aoi + 1 };
        if record {
            passive_sum += (passive_aoi as f64).powi(z);
            measured += 1;
        }
        slots += 1;
    }
    if measured == 0 {
        return Err(bad("trace has no slots after warmup".into()));
    }
    Ok(TraceReplay {
        slots,
        active_moment: active_sum / (measured as f64 * users as f64),
        passive_moment: passive_sum / measured as f64,
        longest_transmit_streak: longest,
    })
}
