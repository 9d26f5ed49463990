//! The AoI objective and its minimization.
//!
//! When `N > C + 4` the optimum sits on the `s = 1` curve (a user goes idle right
//! after every transmission) with `λ ≤ 1/N`, so a line search over `λ` suffices.
//! [`grid_search_oracle`] scans the whole `(r, s)` square as an independent check
//! of that structure, and [`cubic_alpha`] / [`cubic_beta`] locate the roots that
//! bound the range of `λ` where the structure is guaranteed.

use rayon::prelude::*;

use crate::error::{AoiError, Result};
use crate::model::{AoIMoments, ChainParams, NetworkConfig};
use crate::moments::aoi_moment;
use crate::second_order::{second_order_model, SeriesControl};

/// Root tolerance used by the CLI and the FFI.
pub const DEFAULT_ROOT_TOLERANCE: f64 = 1e-10;

/// Line-search resolution used for the experiments.
pub const DEFAULT_PRECISION: f64 = 0.01;

/// `F = w·E[AoI_a^z] + (1−w)·E[AoI_p^z]` under the second-order model.
pub fn objective(config: &NetworkConfig, params: &ChainParams, ctrl: &SeriesControl) -> Result<AoIMoments> {
    let model = second_order_model(config, params, ctrl)?;
    let active = aoi_moment(&model.active, config.z)?;
    let passive = aoi_moment(&model.passive, config.z)?;
    Ok(AoIMoments::new(config, active, passive))
}

/// Limiting moments at a degenerate chain (`λ ∈ {0, 1}`).
///
/// A silent network (`λ = 0`) keeps passive AoI at 1 and never delivers an active
/// packet; an always-on network (`λ = 1`, collisions everywhere) starves both.
pub fn degenerate_limit(config: &NetworkConfig, params: &ChainParams) -> Option<AoIMoments> {
    let lambda = params.lambda();
    if lambda <= 0.0 {
        Some(AoIMoments::new(config, f64::INFINITY, 1.0))
    } else if lambda >= 1.0 {
        Some(AoIMoments::new(config, f64::INFINITY, f64::INFINITY))
    } else {
        None
    }
}

/// Objective value for search purposes: degenerate and divergent points count as `+∞`.
pub fn objective_value(config: &NetworkConfig, params: &ChainParams, ctrl: &SeriesControl) -> Result<f64> {
    match objective(config, params, ctrl) {
        Ok(m) => Ok(m.objective),
        Err(AoiError::Degenerate { .. }) | Err(AoiError::DivergentSeries { .. }) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

/// One evaluated point of the `λ` line search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub lambda: f64,
    pub r: f64,
    pub s: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub lambda_star: f64,
    pub r_star: f64,
    pub s_star: f64,
    pub objective_value: f64,
    pub search_trace: Vec<TracePoint>,
}

impl OptimizationResult {
    pub fn chain(&self) -> Result<ChainParams> {
        ChainParams::silent_after_transmit(self.lambda_star)
    }

    /// Index of the optimum inside the trace.
    pub fn argmin_index(&self) -> usize {
        self.search_trace
            .iter()
            .position(|p| p.lambda == self.lambda_star)
            .expect("optimum is a trace point")
    }
}

/// The `λ` grid `{p, 2p, …} ∩ (0, 1/N)` followed by the endpoint `1/N`.
pub fn line_search_grid(n: u32, precision: f64) -> Result<Vec<f64>> {
    let top = 1.0 / n as f64;
    if !(precision > 0.0 && precision < top) {
        return Err(AoiError::invalid(format!(
            "precision {precision} must lie in (0, 1/N = {top})"
        )));
    }
    let count = (top / precision + 1e-9).floor() as usize;
    let mut grid: Vec<f64> = (1..=count)
        .map(|i| i as f64 * precision)
        .filter(|&l| l < top - 1e-12)
        .collect();
    grid.push(top);
    Ok(grid)
}

/// First strict minimum, so ties go to the smaller index.
fn argmin(values: impl IntoIterator<Item = f64>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        if best.is_none_or(|(_, b)| v < b) {
            best = Some((i, v));
        }
    }
    best.filter(|(_, v)| v.is_finite())
}

/// Line search over `λ` on the `s = 1` curve.
pub fn optimize_line_search(config: &NetworkConfig, precision: f64, ctrl: &SeriesControl) -> Result<OptimizationResult> {
    config.validate()?;
    let grid = line_search_grid(config.n, precision)?;
    let trace = grid
        .par_iter()
        .map(|&lambda| {
            let chain = ChainParams::silent_after_transmit(lambda)?;
            Ok(TracePoint {
                lambda,
                r: chain.r(),
                s: chain.s(),
                objective: objective_value(config, &chain, ctrl)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (idx, value) = argmin(trace.iter().map(|p| p.objective)).ok_or_else(|| {
        AoiError::InternalInconsistency("objective is infinite on the whole line-search grid".into())
    })?;
    let best = trace[idx];
    Ok(OptimizationResult {
        lambda_star: best.lambda,
        r_star: best.r,
        s_star: best.s,
        objective_value: value,
        search_trace: trace,
    })
}

/// `{step, 2·step, …, 1}` with 1 included even when `step` does not divide it.
pub fn probability_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 0.5) {
        return Err(AoiError::invalid(format!("grid step {step} must lie in (0, 0.5]")));
    }
    let count = (1.0 / step + 1e-9).floor() as usize;
    let mut grid: Vec<f64> = (1..=count).map(|i| i as f64 * step).filter(|&v| v < 1.0 - 1e-12).collect();
    grid.push(1.0);
    Ok(grid)
}

/// Exhaustive search over the `(r, s)` grid, skipping `r = s = 1` (`θ = −1`).
///
/// Reduction runs in grid order (`r` major, then `s`), so ties resolve the same
/// way regardless of scheduling.
pub fn grid_search_oracle(config: &NetworkConfig, step: f64, ctrl: &SeriesControl) -> Result<(ChainParams, f64)> {
    config.validate()?;
    let grid = probability_grid(step)?;
    let rows = grid
        .par_iter()
        .map(|&r| {
            grid.iter()
                .map(|&s| {
                    let chain = ChainParams::from_rs(r, s)?;
                    if chain.theta().abs() >= 1.0 {
                        return Ok((chain, f64::INFINITY));
                    }
                    Ok((chain, objective_value(config, &chain, ctrl)?))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let cells: Vec<(ChainParams, f64)> = rows.into_iter().flatten().collect();
    let (idx, value) = argmin(cells.iter().map(|c| c.1))
        .ok_or_else(|| AoiError::InternalInconsistency("objective is infinite on the whole grid".into()))?;
    Ok((cells[idx].0, value))
}

/// `h_N(y) = −(N+8)y³ − (N−13)y² − 6y + 1`.
pub fn h_active(n: u32, y: f64) -> f64 {
    let n = n as f64;
    ((-(n + 8.0) * y - (n - 13.0)) * y - 6.0) * y + 1.0
}

/// `h̄_CN(y) = (CN−10)y³ − (CN−13)y² − 6y + 1`.
pub fn h_passive(cn: u32, y: f64) -> f64 {
    let cn = cn as f64;
    (((cn - 10.0) * y - (cn - 13.0)) * y - 6.0) * y + 1.0
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    debug_assert!(f(lo) > 0.0 && f(hi) <= 0.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn check_tol(tol: f64) -> Result<()> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(AoiError::invalid(format!("root tolerance {tol} must be positive")));
    }
    Ok(())
}

/// Smallest positive root `α` of `h_N`.
///
/// `h_N` is strictly decreasing on `y ≥ 0` with `h_N(0) = 1` and `h_N(1) = −2N`,
/// so plain bisection on `[0, 1]` finds the unique root.
pub fn cubic_alpha(n: u32, tol: f64) -> Result<f64> {
    if n < 2 {
        return Err(AoiError::invalid(format!("N = {n} must be >= 2")));
    }
    check_tol(tol)?;
    Ok(bisect(|y| h_active(n, y), 0.0, 1.0, tol))
}

const BETA_SCAN_POINTS: usize = 1000;

/// Smallest positive root `β` of `h̄_CN`, bracketed by a uniform sign scan of
/// `(0, 1)` before bisection (`h̄_CN(0) = 1`, `h̄_CN(1) = −2`).
pub fn cubic_beta(c: u32, n: u32, tol: f64) -> Result<f64> {
    if n < 2 || c < 1 {
        return Err(AoiError::invalid(format!("need N >= 2 and C >= 1, got N = {n}, C = {c}")));
    }
    check_tol(tol)?;
    let cn = c * n;
    let f = |y: f64| h_passive(cn, y);
    let step = 1.0 / BETA_SCAN_POINTS as f64;
    let mut lo = 0.0;
    for i in 1..=BETA_SCAN_POINTS {
        let hi = i as f64 * step;
        if f(hi) <= 0.0 {
            return Ok(bisect(f, lo, hi, tol));
        }
        lo = hi;
    }
    Err(AoiError::InternalInconsistency(format!("no sign change of h̄_{cn} on (0, 1)")))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicRoots {
    pub alpha: f64,
    pub beta: f64,
}

pub fn cubic_roots(c: u32, n: u32, tol: f64) -> Result<CubicRoots> {
    Ok(CubicRoots { alpha: cubic_alpha(n, tol)?, beta: cubic_beta(c, n, tol)? })
}
