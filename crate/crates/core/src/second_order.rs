//! Mean and temporal variance of the active delivery process and of the passive
//! detection process.
//!
//! Both temporal variances have the shape
//!
//! ```text
//! v² = 2m · Σ_{k≥1} (f(θ^k) − m) + m − m²,     m = f(0)
//! ```
//!
//! where `f` is the lag-k conditional success probability written as a polynomial
//! in `x = θ^k`:
//!
//! * active:  `f(x) = (λ + (1−λ)x) (1 − λ + λx)^(N−1)`
//! * passive: `f(x) = (1 − λ + λx)^(CN)`
//!
//! Two routes evaluate the sum: a truncated series with a geometric tail bound,
//! and an exact finite form that expands `f` into monomials `a_p x^p` and sums
//! each geometric series `Σ_k θ^{pk} = θ^p / (1 − θ^p)`. Every evaluation runs
//! both and fails loudly if they disagree.

use crate::error::{AoiError, Result};
use crate::model::{ChainParams, NetworkConfig, SecondOrderStats};

/// Truncation policy for the covariance series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesControl {
    pub tolerance: f64,
    pub max_terms: usize,
}

impl Default for SeriesControl {
    fn default() -> Self {
        SeriesControl { tolerance: 1e-12, max_terms: 100_000 }
    }
}

impl SeriesControl {
    pub fn new(tolerance: f64, max_terms: usize) -> Result<Self> {
        if tolerance.is_nan() || tolerance <= 0.0 || max_terms < 1 {
            return Err(AoiError::invalid("series tolerance must be > 0 and max_terms >= 1"));
        }
        Ok(SeriesControl { tolerance, max_terms })
    }
}

/// Which success process a kernel describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProcessKind {
    Active,
    Passive,
}

fn check_n(n: u32) -> Result<()> {
    if n < 2 {
        return Err(AoiError::invalid(format!("N = {n} must be >= 2")));
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(AoiError::invalid(format!("lambda = {lambda} must lie in [0, 1]")));
    }
    Ok(())
}

/// `m_a = λ(1−λ)^(N−1)`.
pub fn active_mean(lambda: f64, n: u32) -> Result<f64> {
    check_lambda(lambda)?;
    check_n(n)?;
    Ok(lambda * (1.0 - lambda).powi(n as i32 - 1))
}

/// `m_p = (1−λ)^(CN)`.
pub fn passive_mean(lambda: f64, c: u32, n: u32) -> Result<f64> {
    check_lambda(lambda)?;
    check_n(n)?;
    if c < 1 {
        return Err(AoiError::invalid("C must be >= 1"));
    }
    Ok((1.0 - lambda).powf(c as f64 * n as f64))
}

/// Conditional success kernel of one process, `f(x)` above.
#[derive(Debug, Clone, Copy)]
struct Kernel {
    kind: ProcessKind,
    lambda: f64,
    /// `N − 1` for the active kernel, `CN` for the passive one.
    exponent: u32,
}

impl Kernel {
    fn active(lambda: f64, n: u32) -> Self {
        Kernel { kind: ProcessKind::Active, lambda, exponent: n - 1 }
    }

    fn passive(lambda: f64, c: u32, n: u32) -> Self {
        Kernel { kind: ProcessKind::Passive, lambda, exponent: c * n }
    }

    fn eval(&self, x: f64) -> f64 {
        let l = self.lambda;
        let idle = (1.0 - l + l * x).powi(self.exponent as i32);
        match self.kind {
            ProcessKind::Active => (l + (1.0 - l) * x) * idle,
            ProcessKind::Passive => idle,
        }
    }

    fn mean(&self) -> f64 {
        self.eval(0.0)
    }

    /// Lipschitz constant of `f` on `[−1, 1]`; both linear factors stay in `[−1, 1]`.
    fn lipschitz(&self) -> f64 {
        let l = self.lambda;
        let e = self.exponent as f64;
        match self.kind {
            ProcessKind::Active => (1.0 - l) + e * l,
            ProcessKind::Passive => e * l,
        }
    }

    /// Coefficients `a_p` of `f(x) = Σ_p a_p x^p`.
    fn coefficients(&self) -> Vec<f64> {
        let pmf = binomial_pmf(self.exponent, self.lambda);
        match self.kind {
            ProcessKind::Passive => pmf,
            ProcessKind::Active => {
                let l = self.lambda;
                let mut a = vec![0.0; pmf.len() + 1];
                for (p, b) in pmf.iter().enumerate() {
                    a[p] += l * b;
                    a[p + 1] += (1.0 - l) * b;
                }
                a
            }
        }
    }
}

/// `C(M, j) (1−λ)^(M−j) λ^j` for `j = 0..=M`.
///
/// Coefficients are exact `u128` integers up to `M = 64`; larger exponents go
/// through log space.
fn binomial_pmf(m: u32, lambda: f64) -> Vec<f64> {
    let q = 1.0 - lambda;
    if m <= 64 {
        let mut out = Vec::with_capacity(m as usize + 1);
        let mut coeff: u128 = 1;
        for j in 0..=m {
            out.push(coeff as f64 * q.powi((m - j) as i32) * lambda.powi(j as i32));
            coeff = coeff * (m - j) as u128 / (j + 1) as u128;
        }
        out
    } else {
        let (ln_l, ln_q) = (lambda.ln(), q.ln());
        let mut ln_coeff = 0.0f64;
        (0..=m)
            .map(|j| {
                let v = (ln_coeff + (m - j) as f64 * ln_q + j as f64 * ln_l).exp();
                ln_coeff += ((m - j) as f64).ln() - ((j + 1) as f64).ln();
                v
            })
            .collect()
    }
}

fn check_series_domain(params: &ChainParams) -> Result<()> {
    let theta = params.theta();
    if theta.abs() >= 1.0 {
        return Err(AoiError::DivergentSeries { theta_abs: theta.abs() });
    }
    let lambda = params.lambda();
    if lambda <= 0.0 || lambda >= 1.0 {
        return Err(AoiError::Degenerate { lambda });
    }
    Ok(())
}

/// `Σ_{k≥1} (f(θ^k) − m)` by direct summation until the tail bound
/// `2m·L·|θ|^(k+1)/(1−|θ|)` drops below the tolerance.
fn covariance_sum_series(kernel: &Kernel, theta: f64, ctrl: &SeriesControl) -> Result<f64> {
    let m = kernel.mean();
    if theta == 0.0 {
        return Ok(0.0);
    }
    let scale = 2.0 * m * kernel.lipschitz() / (1.0 - theta.abs());
    let mut sum = 0.0;
    let mut power = 1.0;
    for _ in 0..ctrl.max_terms {
        power *= theta;
        sum += kernel.eval(power) - m;
        if scale * (power * theta).abs() < ctrl.tolerance {
            return Ok(sum);
        }
    }
    Err(AoiError::NotConverged { tolerance: ctrl.tolerance, max_terms: ctrl.max_terms })
}

/// `Σ_{k≥1} (f(θ^k) − m) = Σ_{p≥1} a_p θ^p / (1 − θ^p)`; the `p = 0` term is `m`
/// itself and cancels.
fn covariance_sum_closed(kernel: &Kernel, theta: f64) -> f64 {
    let mut power = 1.0;
    kernel
        .coefficients()
        .iter()
        .skip(1)
        .map(|a| {
            power *= theta;
            a * power / (1.0 - power)
        })
        .sum()
}

fn assemble(m: f64, covariance_sum: f64) -> f64 {
    2.0 * m * covariance_sum + m - m * m
}

/// Temporal variance by truncated series only.
pub fn temporal_variance_series(
    kind: ProcessKind,
    params: &ChainParams,
    c: u32,
    n: u32,
    ctrl: &SeriesControl,
) -> Result<f64> {
    let kernel = kernel_for(kind, params, c, n)?;
    let sum = covariance_sum_series(&kernel, params.theta(), ctrl)?;
    Ok(assemble(kernel.mean(), sum))
}

/// Temporal variance by the exact binomial-geometric form only.
pub fn temporal_variance_closed_form(
    kind: ProcessKind,
    params: &ChainParams,
    c: u32,
    n: u32,
) -> Result<f64> {
    let kernel = kernel_for(kind, params, c, n)?;
    Ok(assemble(kernel.mean(), covariance_sum_closed(&kernel, params.theta())))
}

fn kernel_for(kind: ProcessKind, params: &ChainParams, c: u32, n: u32) -> Result<Kernel> {
    check_n(n)?;
    if c < 1 {
        return Err(AoiError::invalid("C must be >= 1"));
    }
    check_series_domain(params)?;
    Ok(match kind {
        ProcessKind::Active => Kernel::active(params.lambda(), n),
        ProcessKind::Passive => Kernel::passive(params.lambda(), c, n),
    })
}

fn cross_checked(kind: ProcessKind, params: &ChainParams, c: u32, n: u32, ctrl: &SeriesControl) -> Result<f64> {
    let series = temporal_variance_series(kind, params, c, n, ctrl)?;
    let exact = temporal_variance_closed_form(kind, params, c, n)?;
    if (series - exact).abs() > 10.0 * ctrl.tolerance {
        return Err(AoiError::InternalInconsistency(format!(
            "{kind:?} temporal variance: series {series:e} vs closed form {exact:e} at lambda = {}, theta = {}",
            params.lambda(),
            params.theta()
        )));
    }
    Ok(exact)
}

/// Temporal variance `v_a²` of an active user's delivery process.
pub fn active_temporal_variance(params: &ChainParams, n: u32, ctrl: &SeriesControl) -> Result<f64> {
    cross_checked(ProcessKind::Active, params, 1, n, ctrl)
}

/// Temporal variance `v_p²` of the passive detection process.
pub fn passive_temporal_variance(
    params: &ChainParams,
    c: u32,
    n: u32,
    ctrl: &SeriesControl,
) -> Result<f64> {
    cross_checked(ProcessKind::Passive, params, c, n, ctrl)
}

/// `P(S(k+1) = 1 | S(1) = 1)` by iterating the per-user TX-probability recursion
/// `G(i) = r + θ·G(i−1)`.
///
/// The user that succeeded at slot 1 starts from `G = 1`; every other user starts
/// from `G = 0` (a success at slot 1 means they were idle). This never touches the
/// closed-form kernels and serves as their oracle.
pub fn conditional_success_probability(
    params: &ChainParams,
    n: u32,
    k: u32,
    kind: ProcessKind,
    c: u32,
) -> Result<f64> {
    if k < 1 {
        return Err(AoiError::invalid("lag k must be >= 1"));
    }
    check_n(n)?;
    if c < 1 {
        return Err(AoiError::invalid("C must be >= 1"));
    }
    if params.theta().abs() >= 1.0 {
        return Err(AoiError::DivergentSeries { theta_abs: params.theta().abs() });
    }
    let (r, theta) = (params.r(), params.theta());
    let mut own = 1.0;
    let mut other = 0.0;
    for _ in 0..k {
        own = r + theta * own;
        other = r + theta * other;
    }
    Ok(match kind {
        ProcessKind::Active => own * (1.0 - other).powi(n as i32 - 1),
        ProcessKind::Passive => (1.0 - other).powi((c * n) as i32),
    })
}

/// The full second-order model of one network operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondOrderModel {
    pub active: SecondOrderStats,
    pub passive: SecondOrderStats,
}

pub fn second_order_model(
    config: &NetworkConfig,
    params: &ChainParams,
    ctrl: &SeriesControl,
) -> Result<SecondOrderModel> {
    config.validate()?;
    check_series_domain(params)?;
    let lambda = params.lambda();
    let active = SecondOrderStats::new(
        active_mean(lambda, config.n)?,
        active_temporal_variance(params, config.n, ctrl)?,
    )?;
    let passive = SecondOrderStats::new(
        passive_mean(lambda, config.c, config.n)?,
        passive_temporal_variance(params, config.c, config.n, ctrl)?,
    )?;
    Ok(SecondOrderModel { active, passive })
}
