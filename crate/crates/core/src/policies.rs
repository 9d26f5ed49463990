//! Per-user transmission rules compared in the experiments.

use std::fmt;
use std::str::FromStr;

use crate::error::{AoiError, Result};
use crate::model::{ChainParams, NetworkConfig};
use crate::optimize::optimize_line_search;
use crate::second_order::SeriesControl;
use crate::sim::{simulate, SimOutcome, SimParams};

/// ATA transmit probability is `ATA_RATE_FACTOR / N`.
pub const ATA_RATE_FACTOR: f64 = 4.69;
/// ATA age threshold is `ATA_THRESHOLD_FACTOR · N`.
pub const ATA_THRESHOLD_FACTOR: f64 = 2.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    SecondOrderOptimal,
    SlottedAloha,
    OptimalAloha,
    AgeThresholdAloha,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [
        PolicyKind::SecondOrderOptimal,
        PolicyKind::SlottedAloha,
        PolicyKind::OptimalAloha,
        PolicyKind::AgeThresholdAloha,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::SecondOrderOptimal => "second_order_optimal",
            PolicyKind::SlottedAloha => "slotted_aloha",
            PolicyKind::OptimalAloha => "optimal_aloha",
            PolicyKind::AgeThresholdAloha => "age_threshold_aloha",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = AoiError;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| AoiError::invalid(format!("unknown policy '{s}'")))
    }
}

/// How a user decides to transmit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TransmitRule {
    /// Transmit iff the user's TX/Idle chain is in TX.
    Chain(ChainParams),
    /// Transmit with probability `transmit_prob` while the self-believed AoI
    /// exceeds `threshold`, otherwise stay silent.
    AgeThreshold { transmit_prob: f64, threshold: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicySpec {
    kind: PolicyKind,
    rule: TransmitRule,
}

impl PolicySpec {
    /// Chain-based policy of the given kind, checking the kind's structure
    /// (`s = 1` for the second-order optimum, `θ = 0` for both ALOHA variants).
    pub fn chain(kind: PolicyKind, chain: ChainParams) -> Result<Self> {
        match kind {
            PolicyKind::SecondOrderOptimal if (chain.s() - 1.0).abs() > 1e-12 => {
                Err(AoiError::invalid(format!("{kind} requires s = 1, got s = {}", chain.s())))
            }
            PolicyKind::SlottedAloha | PolicyKind::OptimalAloha if chain.theta().abs() > 1e-12 => {
                Err(AoiError::invalid(format!("{kind} requires r + s = 1, got theta = {}", chain.theta())))
            }
            PolicyKind::AgeThresholdAloha => Err(AoiError::invalid("age_threshold_aloha is not chain based")),
            _ => Ok(PolicySpec { kind, rule: TransmitRule::Chain(chain) }),
        }
    }

    pub fn age_threshold(transmit_prob: f64, threshold: f64) -> Result<Self> {
        if !(transmit_prob > 0.0 && transmit_prob <= 1.0) {
            return Err(AoiError::invalid(format!(
                "ATA transmit probability {transmit_prob} must lie in (0, 1]"
            )));
        }
        if !threshold.is_finite() || threshold <= 0.0 {
            return Err(AoiError::invalid(format!("ATA threshold {threshold} must be positive")));
        }
        Ok(PolicySpec {
            kind: PolicyKind::AgeThresholdAloha,
            rule: TransmitRule::AgeThreshold { transmit_prob, threshold },
        })
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn rule(&self) -> &TransmitRule {
        &self.rule
    }

    pub fn chain_params(&self) -> Option<&ChainParams> {
        match &self.rule {
            TransmitRule::Chain(c) => Some(c),
            TransmitRule::AgeThreshold { .. } => None,
        }
    }
}

/// Builds every policy that does not need a simulation sweep.
///
/// `optimal_aloha` is chosen after the fact from simulated performance; use
/// [`select_optimal_aloha`] (or [`build_policy`]) for it.
pub fn make_policy(kind: PolicyKind, config: &NetworkConfig, precision: f64) -> Result<PolicySpec> {
    config.validate()?;
    let n = config.n as f64;
    match kind {
        PolicyKind::SecondOrderOptimal => {
            let best = optimize_line_search(config, precision, &SeriesControl::default())?;
            PolicySpec::chain(kind, best.chain()?)
        }
        PolicyKind::SlottedAloha => PolicySpec::chain(kind, ChainParams::from_rs(1.0 / n, 1.0 - 1.0 / n)?),
        PolicyKind::AgeThresholdAloha => {
            let rate = ATA_RATE_FACTOR / n;
            if rate > 1.0 {
                return Err(AoiError::invalid(format!(
                    "age_threshold_aloha needs N >= 5 (transmit probability 4.69/N = {rate} > 1)"
                )));
            }
            PolicySpec::age_threshold(rate, ATA_THRESHOLD_FACTOR * n)
        }
        PolicyKind::OptimalAloha => Err(AoiError::invalid(
            "optimal_aloha is selected by a simulation sweep; use select_optimal_aloha",
        )),
    }
}

/// [`make_policy`] for every kind, running the ALOHA sweep when needed.
pub fn build_policy(kind: PolicyKind, config: &NetworkConfig, precision: f64, sim: &SimParams) -> Result<PolicySpec> {
    match kind {
        PolicyKind::OptimalAloha => select_optimal_aloha(config, sim, precision),
        _ => make_policy(kind, config, precision),
    }
}

/// Grid of ALOHA transmit probabilities `{p, 2p, …} ∩ (0, 1)`.
pub fn aloha_grid(precision: f64) -> Result<Vec<f64>> {
    if !(precision > 0.0 && precision <= 0.5) {
        return Err(AoiError::invalid(format!("precision {precision} must lie in (0, 0.5]")));
    }
    let count = (1.0 / precision + 1e-9).floor() as usize;
    Ok((1..=count).map(|i| i as f64 * precision).filter(|&l| l < 1.0 - 1e-9).collect())
}

/// Simulated slotted-ALOHA performance for every grid `λ`, under common seeds.
///
/// Each point keeps both empirical moments, so the best `λ` for any weight `w`
/// can be read off without re-simulating.
#[derive(Debug, Clone)]
pub struct AlohaSweep {
    pub points: Vec<(f64, SimOutcome)>,
}

impl AlohaSweep {
    pub fn run(config: &NetworkConfig, sim: &SimParams, precision: f64) -> Result<Self> {
        let points = aloha_grid(precision)?
            .into_iter()
            .map(|lambda| {
                let policy = PolicySpec::chain(PolicyKind::OptimalAloha, ChainParams::from_rs(lambda, 1.0 - lambda)?)?;
                Ok((lambda, simulate(config, &policy, sim)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(AlohaSweep { points })
    }

    /// `(λ, empirical F)` minimizing `w·active + (1−w)·passive`; ties go to the smaller `λ`.
    pub fn best(&self, config: &NetworkConfig) -> Option<(f64, &SimOutcome)> {
        let mut best: Option<(f64, &SimOutcome, f64)> = None;
        for (lambda, outcome) in &self.points {
            let f = config.weigh(outcome.empirical_active_moment, outcome.empirical_passive_moment);
            if best.is_none_or(|(_, _, b)| f < b) {
                best = Some((*lambda, outcome, f));
            }
        }
        best.map(|(l, o, _)| (l, o))
    }
}

/// Best slotted ALOHA found by simulating every grid `λ`.
///
/// Not implementable in a real network (the choice needs the finished runs); it
/// serves as a hindsight baseline.
pub fn select_optimal_aloha(config: &NetworkConfig, sim: &SimParams, precision: f64) -> Result<PolicySpec> {
    let sweep = AlohaSweep::run(config, sim, precision)?;
    let (lambda, _) = sweep
        .best(config)
        .ok_or_else(|| AoiError::InternalInconsistency("empty ALOHA sweep".into()))?;
    PolicySpec::chain(PolicyKind::OptimalAloha, ChainParams::from_rs(lambda, 1.0 - lambda)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainState {
    Tx,
    Idle,
}

/// AoI a user believes it has, assuming every own transmission succeeded.
///
/// The value seen when deciding in slot `t` is `t − t_last`, where `t_last` is the
/// user's last transmission slot: it is 1 right after a transmission and grows by
/// one per silent slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AtaUserState {
    pub believed_aoi: u64,
}

impl Default for AtaUserState {
    fn default() -> Self {
        AtaUserState { believed_aoi: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decision {
    pub transmit: bool,
    pub next_state: ChainState,
    pub next_ata: AtaUserState,
}

/// One slot of one user: the transmit decision plus the next chain and ATA state.
///
/// Chain rules transmit iff the state is TX and use `draw` for the transition
/// (TX→Idle iff `draw < s`, Idle→TX iff `draw < r`). The ATA rule uses `draw` for
/// its Bernoulli transmit attempt.
pub fn decide_transmit(policy: &PolicySpec, state: ChainState, ata: AtaUserState, draw: f64) -> Decision {
    let (transmit, next_state) = match &policy.rule {
        TransmitRule::Chain(chain) => match state {
            ChainState::Tx => (true, if draw < chain.s() { ChainState::Idle } else { ChainState::Tx }),
            ChainState::Idle => (false, if draw < chain.r() { ChainState::Tx } else { ChainState::Idle }),
        },
        TransmitRule::AgeThreshold { transmit_prob, threshold } => {
            let eligible = ata.believed_aoi as f64 > *threshold;
            (eligible && draw < *transmit_prob, state)
        }
    };
    let next_ata = AtaUserState { believed_aoi: if transmit { 1 } else { ata.believed_aoi + 1 } };
    Decision { transmit, next_state, next_ata }
}

/// Upper end of the uniform initial believed AoI, `⌈threshold⌉ + 1`.
pub fn ata_initial_max(threshold: f64) -> u64 {
    threshold.ceil() as u64 + 1
}
