//! Domain types shared by the analytic model, the optimizer and the simulator.
//!
//! Every active user runs the same two-state TX/Idle Markov chain: an Idle user
//! moves to TX with probability `r`, a TX user falls back to Idle with
//! probability `s`. The chain is equivalently described by its stationary
//! transmit probability `λ = r/(r+s)` and its memory `θ = 1 − r − s`.

use crate::error::{AoiError, Result};

/// Slack used when validating probabilities built from floating-point arithmetic.
pub const PROBABILITY_SLACK: f64 = 1e-12;

fn clamp_probability(name: &str, value: f64) -> Result<f64> {
    if !value.is_finite() || !(-PROBABILITY_SLACK..=1.0 + PROBABILITY_SLACK).contains(&value) {
        return Err(AoiError::invalid(format!("{name} = {value} is not a probability")));
    }
    Ok(value.clamp(0.0, 1.0))
}

/// Parameters of the per-user TX/Idle chain.
///
/// `lambda` and `theta` are stored next to `(r, s)` so that a chain built from a
/// `(λ, θ)` grid point carries exactly that grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainParams {
    r: f64,
    s: f64,
    lambda: f64,
    theta: f64,
}

impl ChainParams {
    /// Builds the chain from its transition probabilities.
    pub fn from_rs(r: f64, s: f64) -> Result<Self> {
        let r = clamp_probability("r", r)?;
        let s = clamp_probability("s", s)?;
        if r + s <= 0.0 {
            return Err(AoiError::invalid("r + s must be positive (lambda undefined at r = s = 0)"));
        }
        Ok(ChainParams { r, s, lambda: r / (r + s), theta: 1.0 - r - s })
    }

    /// Builds the chain from `(λ, θ)` via `r = λ(1−θ)`, `s = (1−λ)(1−θ)`.
    pub fn from_lambda_theta(lambda: f64, theta: f64) -> Result<Self> {
        let lambda = clamp_probability("lambda", lambda)?;
        if !theta.is_finite() {
            return Err(AoiError::invalid(format!("theta = {theta} is not finite")));
        }
        let r = lambda * (1.0 - theta);
        let s = (1.0 - lambda) * (1.0 - theta);
        let bad = |v: f64| !(-PROBABILITY_SLACK..=1.0 + PROBABILITY_SLACK).contains(&v);
        if bad(r) || bad(s) {
            return Err(AoiError::invalid(format!(
                "theta = {theta} is infeasible for lambda = {lambda} (implied r = {r}, s = {s}; need theta in [{}, 1))",
                min_feasible_theta(lambda)
            )));
        }
        let (r, s) = (r.clamp(0.0, 1.0), s.clamp(0.0, 1.0));
        if r + s <= 0.0 {
            return Err(AoiError::invalid("theta = 1 gives r = s = 0"));
        }
        Ok(ChainParams { r, s, lambda, theta })
    }

    /// The chain on the `s = 1` curve: `r = λ/(1−λ)`, `θ = −λ/(1−λ)`.
    pub fn silent_after_transmit(lambda: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&lambda) {
            return Err(AoiError::invalid(format!(
                "s = 1 requires lambda in [0, 1/2], got {lambda}"
            )));
        }
        Self::from_lambda_theta(lambda, -lambda / (1.0 - lambda))
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// Stationary probability of being in the TX state.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Second eigenvalue of the chain, `1 − r − s`.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn is_memoryless(&self) -> bool {
        self.theta == 0.0
    }
}

/// Smallest θ for which `(λ, θ)` maps to valid `(r, s)`.
pub fn min_feasible_theta(lambda: f64) -> f64 {
    if lambda <= 0.5 {
        -lambda / (1.0 - lambda)
    } else {
        -(1.0 - lambda) / lambda
    }
}

/// Network shape and the objective's moment order and weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkConfig {
    /// Active users per cluster.
    pub n: u32,
    /// Number of clusters.
    pub c: u32,
    /// Moment order of the AoI objective.
    pub z: u32,
    /// Weight of the active-user term.
    pub w: f64,
}

impl NetworkConfig {
    pub fn new(n: u32, c: u32, z: u32, w: f64) -> Result<Self> {
        let cfg = NetworkConfig { n, c, z, w };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(AoiError::invalid(format!("N = {} must be >= 2", self.n)));
        }
        if self.c < 1 {
            return Err(AoiError::invalid("C must be >= 1"));
        }
        if self.z < 1 {
            return Err(AoiError::invalid("z must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.w) {
            return Err(AoiError::invalid(format!("w = {} must lie in [0, 1]", self.w)));
        }
        Ok(())
    }

    /// Total number of active users, `C·N`.
    pub fn total_users(&self) -> usize {
        self.n as usize * self.c as usize
    }

    pub fn with_w(self, w: f64) -> Result<Self> {
        Self::new(self.n, self.c, self.z, w)
    }

    pub fn with_z(self, z: u32) -> Result<Self> {
        Self::new(self.n, self.c, z, self.w)
    }

    /// `w·active + (1−w)·passive`, with `0·∞` read as 0.
    pub fn weigh(&self, active: f64, passive: f64) -> f64 {
        let part = |weight: f64, v: f64| if weight == 0.0 { 0.0 } else { weight * v };
        part(self.w, active) + part(1.0 - self.w, passive)
    }
}

/// Long-run mean and temporal variance of a binary success process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondOrderStats {
    pub mean: f64,
    pub temporal_variance: f64,
}

impl SecondOrderStats {
    pub fn new(mean: f64, temporal_variance: f64) -> Result<Self> {
        if !(mean > 0.0 && mean <= 1.0 + PROBABILITY_SLACK) {
            return Err(AoiError::invalid(format!("mean = {mean} must lie in (0, 1]")));
        }
        if !temporal_variance.is_finite() || temporal_variance < -PROBABILITY_SLACK {
            return Err(AoiError::invalid(format!(
                "temporal variance = {temporal_variance} must be finite and >= 0"
            )));
        }
        Ok(SecondOrderStats { mean: mean.min(1.0), temporal_variance: temporal_variance.max(0.0) })
    }
}

/// Moments of AoI for one moment order and the weighted objective built from them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AoIMoments {
    pub order: u32,
    pub active_moment: f64,
    pub passive_moment: f64,
    pub objective: f64,
}

impl AoIMoments {
    pub fn new(config: &NetworkConfig, active_moment: f64, passive_moment: f64) -> Self {
        AoIMoments {
            order: config.z,
            active_moment,
            passive_moment,
            objective: config.weigh(active_moment, passive_moment),
        }
    }
}
