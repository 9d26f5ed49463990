use aoi_core::model::{min_feasible_theta, ChainParams, NetworkConfig};
use aoi_core::optimize::{
    cubic_alpha, cubic_beta, grid_search_oracle, h_active, h_passive, objective_value, optimize_line_search,
    probability_grid, DEFAULT_ROOT_TOLERANCE,
};
use aoi_core::second_order::{
    active_mean, active_temporal_variance, passive_mean, passive_temporal_variance, SeriesControl,
};
use proptest::prelude::*;

fn ctrl() -> SeriesControl {
    SeriesControl::default()
}

fn ratio_active(lambda: f64, theta: f64, n: u32) -> f64 {
    let p = ChainParams::from_lambda_theta(lambda, theta).unwrap();
    active_temporal_variance(&p, n, &ctrl()).unwrap() / active_mean(lambda, n).unwrap().powi(2)
}

fn ratio_passive(lambda: f64, theta: f64, c: u32, n: u32) -> f64 {
    let p = ChainParams::from_lambda_theta(lambda, theta).unwrap();
    passive_temporal_variance(&p, c, n, &ctrl()).unwrap() / passive_mean(lambda, c, n).unwrap().powi(2)
}

#[test]
fn temporal_variance_is_nonnegative_on_grid() {
    for (c, n) in [(1, 2), (2, 7), (3, 10)] {
        for i in 1..40 {
            let lambda = i as f64 / 40.0;
            let lo = min_feasible_theta(lambda).max(-0.99);
            for j in 0..=20 {
                let theta = lo + (0.99 - lo) * j as f64 / 20.0;
                let p = ChainParams::from_lambda_theta(lambda, theta).unwrap();
                assert!(active_temporal_variance(&p, n, &ctrl()).unwrap() >= -1e-12);
                assert!(passive_temporal_variance(&p, c, n, &ctrl()).unwrap() >= -1e-12);
            }
        }
    }
}

#[test]
fn memoryless_chain_gives_bernoulli_variance() {
    for lambda in [0.05, 0.2, 0.45, 0.7] {
        let p = ChainParams::from_lambda_theta(lambda, 0.0).unwrap();
        let (ma, mp) = (active_mean(lambda, 7).unwrap(), passive_mean(lambda, 2, 7).unwrap());
        let va = active_temporal_variance(&p, 7, &ctrl()).unwrap();
        let vp = passive_temporal_variance(&p, 2, 7, &ctrl()).unwrap();
        assert!((va - ma * (1.0 - ma)).abs() < 1e-14);
        assert!((vp - mp * (1.0 - mp)).abs() < 1e-14);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    // Beyond 1/N the normalized variances only grow with λ (non-positive θ).
    #[test]
    fn normalized_variance_increases_beyond_one_over_n(
        n in 2u32..=12, c in 1u32..=3, u in 0.0f64..1.0, t in 0.0f64..1.0,
    ) {
        let lambda = 1.0 / n as f64 + u * (0.45 - 1.0 / n as f64).max(0.0);
        let h = 1e-5;
        let theta = (min_feasible_theta(lambda + h) * t).max(-0.95);
        let da = (ratio_active(lambda + h, theta, n) - ratio_active(lambda - h, theta, n)) / (2.0 * h);
        let dp = (ratio_passive(lambda + h, theta, c, n) - ratio_passive(lambda - h, theta, c, n)) / (2.0 * h);
        prop_assert!(da >= -1e-6, "d(v_a^2/m_a^2)/dlambda = {da} at lambda={lambda}, theta={theta}");
        prop_assert!(dp >= -1e-6, "d(v_p^2/m_p^2)/dlambda = {dp} at lambda={lambda}, theta={theta}");
    }

    // Below both cubic roots the temporal variances are nondecreasing in θ.
    #[test]
    fn variance_nondecreasing_in_theta_below_roots(
        n in 6u32..=12, c in 1u32..=2, u in 0.02f64..0.98, t in 0.0f64..1.0,
    ) {
        prop_assume!(n > c + 4);
        let bound = cubic_alpha(n, DEFAULT_ROOT_TOLERANCE).unwrap().min(cubic_beta(c, n, DEFAULT_ROOT_TOLERANCE).unwrap());
        let lambda = u * bound;
        let h = 1e-5;
        let lo = min_feasible_theta(lambda) + h;
        let theta = lo + (0.95 - lo) * t;
        let p = |th: f64| ChainParams::from_lambda_theta(lambda, th).unwrap();
        let da = (active_temporal_variance(&p(theta + h), n, &ctrl()).unwrap()
            - active_temporal_variance(&p(theta - h), n, &ctrl()).unwrap()) / (2.0 * h);
        let dp = (passive_temporal_variance(&p(theta + h), c, n, &ctrl()).unwrap()
            - passive_temporal_variance(&p(theta - h), c, n, &ctrl()).unwrap()) / (2.0 * h);
        prop_assert!(da >= -1e-6, "dv_a^2/dtheta = {da} at lambda={lambda}, theta={theta}");
        prop_assert!(dp >= -1e-6, "dv_p^2/dtheta = {dp} at lambda={lambda}, theta={theta}");
    }
}

#[test]
fn cubic_roots_bracket_sign_change() {
    let tol = DEFAULT_ROOT_TOLERANCE;
    for n in 5..=30u32 {
        let a = cubic_alpha(n, tol).unwrap();
        assert!(h_active(n, a - 10.0 * tol) > 0.0 && h_active(n, a + 10.0 * tol) < 0.0, "N={n}");
    }
    for cn in [6u32, 10, 14, 20, 40, 80] {
        let b = cubic_beta(1, cn, tol).unwrap();
        assert!(h_passive(cn, b - 10.0 * tol) > 0.0 && h_passive(cn, b + 10.0 * tol) < 0.0, "CN={cn}");
    }
}

#[test]
fn roots_examples() {
    let tol = DEFAULT_ROOT_TOLERANCE;
    let a = cubic_alpha(7, tol).unwrap();
    let b = cubic_beta(2, 7, tol).unwrap();
    assert!(a > 0.18 && a < 0.19, "alpha {a}");
    assert!(b > 0.16 && b < 0.17, "beta {b}");
    assert!(cubic_alpha(5, tol).unwrap() > 0.2);
}

#[test]
fn objective_beyond_one_over_n_is_not_better() {
    for (n, c) in [(6, 1), (7, 2), (9, 3), (12, 1)] {
        for z in [1, 2] {
            for w in [0.0, 0.5, 1.0] {
                let config = NetworkConfig::new(n, c, z, w).unwrap();
                let best = optimize_line_search(&config, 0.01, &ctrl()).unwrap();
                for k in 1..=10 {
                    let lambda = 1.0 / n as f64 + 0.01 * k as f64;
                    if lambda > 0.5 {
                        break;
                    }
                    let chain = ChainParams::silent_after_transmit(lambda).unwrap();
                    let f = objective_value(&config, &chain, &ctrl()).unwrap();
                    assert!(f >= best.objective_value, "N={n} C={c} z={z} w={w} lambda={lambda}: {f} < {}", best.objective_value);
                }
            }
        }
    }
}

/// Every N in 6..=12 with every C allowed by N > C + 4, at five weights.
#[test]
fn grid_oracle_prefers_silence_after_transmit() {
    let r_grid: Vec<f64> = probability_grid(0.02).unwrap().into_iter().filter(|&r| r > 0.0).collect();
    for n in 6..=12u32 {
        for c in 1..=(n - 5) {
            for z in [1u32, 2] {
                for w in [0.0, 0.25, 0.5, 0.75, 1.0] {
                    let config = NetworkConfig::new(n, c, z, w).unwrap();
                    let (grid_best, grid_f) = grid_search_oracle(&config, 0.02, &ctrl()).unwrap();
                    assert_eq!(grid_best.s(), 1.0, "N={n} C={c} z={z} w={w}");
                    let line = optimize_line_search(&config, 0.01, &ctrl()).unwrap();
                    let f_line = line.objective_value;
                    let lo = r_grid.iter().copied().filter(|&r| r <= line.r_star).fold(r_grid[0], f64::max);
                    let hi = r_grid.iter().copied().find(|&r| r > line.r_star).unwrap_or(lo);
                    let cell = [lo, hi]
                        .iter()
                        .map(|&r| {
                            let f = objective_value(&config, &ChainParams::from_rs(r, 1.0).unwrap(), &ctrl()).unwrap();
                            (f - f_line).abs()
                        })
                        .fold(0.0f64, f64::max);
                    assert!(grid_f <= f_line + cell + 1e-12 * f_line, "N={n} C={c} z={z} w={w}: grid {grid_f} line {f_line} cell {cell}");
                    let i = line.argmin_index();
                    let t = &line.search_trace;
                    let line_cell = [i.checked_sub(1), Some(i + 1).filter(|&j| j < t.len())]
                        .into_iter()
                        .flatten()
                        .map(|j| (t[j].objective - f_line).abs())
                        .fold(0.0f64, f64::max);
                    assert!(grid_f >= f_line - line_cell, "N={n} C={c} z={z} w={w}: grid {grid_f} beats line {f_line}");
                }
            }
        }
    }
}
