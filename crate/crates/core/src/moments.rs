//! Arbitrary integer moments of AoI from a `(mean, temporal variance)` pair.
//!
//! Inter-delivery gaps are modelled as first-passage times of a Brownian motion
//! with drift `m` and variance `v²` through level 1, i.e. inverse Gaussian with
//! mean `1/m` and shape `1/v²`. Summing AoI over one gap of length `l` gives
//! `Σ_{k=1}^{l} k^z`, a polynomial in `l` whose coefficients come from the
//! Bernoulli numbers; taking expectations turns each power `l^i` into a raw IG
//! moment. All polynomial coefficients are exact rationals until the final
//! floating-point assembly.

use std::sync::{OnceLock, RwLock};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{AoiError, Result};
use crate::model::SecondOrderStats;

/// Exact rational number in lowest terms with a positive denominator.
pub type Rational = BigRational;

fn binomial(n: u64, k: u64) -> BigInt {
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

fn bernoulli_cache() -> &'static RwLock<Vec<Rational>> {
    static CACHE: OnceLock<RwLock<Vec<Rational>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(vec![Rational::one()]))
}

/// Bernoulli numbers `B_0..=B_max_k` from `Σ_{j=0}^{k} C(k+1, j) B_j = 0`.
///
/// This convention gives `B_1 = −1/2`; the Faulhaber expansion below carries the
/// `l^z/2` term separately and only reads `B_k` for `k ≥ 2`.
pub fn bernoulli_numbers(max_k: usize) -> Vec<Rational> {
    {
        let cache = bernoulli_cache().read().expect("bernoulli cache poisoned");
        if cache.len() > max_k {
            return cache[..=max_k].to_vec();
        }
    }
    let mut cache = bernoulli_cache().write().expect("bernoulli cache poisoned");
    while cache.len() <= max_k {
        let k = cache.len() as u64;
        // B_k = −(1/(k+1)) Σ_{j<k} C(k+1, j) B_j
        let mut acc = Rational::zero();
        for (j, b) in cache.iter().enumerate() {
            acc += Rational::from_integer(binomial(k + 1, j as u64)) * b;
        }
        let next = -acc / Rational::from_integer(BigInt::from(k + 1));
        cache.push(next);
    }
    cache[..=max_k].to_vec()
}

/// Coefficients `c_i` (index = power of `l`, `i = 0..=z+1`) of the polynomial
/// `Σ_{k=1}^{l} k^z = l^{z+1}/(z+1) + l^z/2 + Σ_{k=2}^{z} (B_k/k!)·(z!/(z−k+1)!)·l^{z−k+1}`.
pub fn faulhaber_coefficients(z: u32) -> Vec<Rational> {
    let z = z as usize;
    let bern = bernoulli_numbers(z);
    let mut coeffs = vec![Rational::zero(); z + 2];
    coeffs[z + 1] = Rational::new(BigInt::one(), BigInt::from(z + 1));
    coeffs[z] += Rational::new(BigInt::one(), BigInt::from(2));
    // B_k/k! · z!/(z−k+1)! = B_k · C(z, k−1) / k
    for (k, b) in bern.iter().enumerate().skip(2) {
        let factor = Rational::new(binomial(z as u64, k as u64 - 1), BigInt::from(k));
        coeffs[z - k + 1] += b * factor;
    }
    coeffs
}

/// `Σ_{k=1}^{l} k^z` through the Bernoulli-number polynomial in exact arithmetic.
pub fn faulhaber_sum(l: u64, z: u32) -> Result<BigInt> {
    if l < 1 || z < 1 {
        return Err(AoiError::invalid("faulhaber_sum needs l >= 1 and z >= 1"));
    }
    let l = BigInt::from(l);
    let mut power = BigInt::one();
    let mut total = Rational::zero();
    for c in faulhaber_coefficients(z) {
        total += c * &power;
        power *= &l;
    }
    if !total.denom().is_one() {
        return Err(AoiError::InternalInconsistency(format!(
            "Faulhaber polynomial gave non-integer {total} for l = {l}, z = {z}"
        )));
    }
    Ok(total.to_integer())
}

/// `(k−1+ζ)! / (ζ! (k−1−ζ)!)`, the weight of `(v²/2m)^ζ` in the k-th IG moment.
fn ig_weight(k: u32, zeta: u32) -> f64 {
    debug_assert!(zeta < k);
    let top = (k - 1) as u64;
    let z = zeta as u64;
    if k <= 20 {
        // C(k−1+ζ, ζ) · (k−1)!/(k−1−ζ)!, both exact in u128 for k ≤ 20
        let mut choose: u128 = 1;
        for i in 0..z {
            choose = choose * (top + z - i) as u128 / (i + 1) as u128;
        }
        let falling: u128 = ((top - z + 1)..=top).map(u128::from).product();
        (choose * falling) as f64
    } else {
        let ln_fact = |n: u64| (2..=n).map(|i| (i as f64).ln()).sum::<f64>();
        (ln_fact(top + z) - ln_fact(z) - ln_fact(top - z)).exp()
    }
}

/// k-th raw moment of the inverse Gaussian gap with mean `1/m` and shape `1/v²`:
/// `m^{−k} Σ_{ζ=0}^{k−1} (k−1+ζ)!/(ζ!(k−1−ζ)!) · (v²/(2m))^ζ`.
///
/// `v² = 0` is the deterministic-gap limit `m^{−k}`.
pub fn ig_interdelivery_moment(m: f64, v2: f64, k: u32) -> Result<f64> {
    if !m.is_finite() || m <= 0.0 {
        return Err(AoiError::invalid(format!("mean rate m = {m} must be positive")));
    }
    if !v2.is_finite() || v2 < 0.0 {
        return Err(AoiError::invalid(format!("temporal variance {v2} must be finite and >= 0")));
    }
    if k < 1 {
        return Err(AoiError::invalid("moment order k must be >= 1"));
    }
    let ratio = v2 / (2.0 * m);
    let mut power = 1.0;
    let mut sum = 0.0;
    for zeta in 0..k {
        sum += ig_weight(k, zeta) * power;
        power *= ratio;
    }
    Ok(sum / m.powi(k as i32))
}

/// Raw moments `E[l^k]`, `k = 1..=max_k`, of the approximating inter-delivery gap.
#[derive(Debug, Clone, PartialEq)]
pub struct InterDeliveryMoments {
    values: Vec<f64>,
}

impl InterDeliveryMoments {
    pub fn new(stats: &SecondOrderStats, max_k: u32) -> Result<Self> {
        let values = (1..=max_k)
            .map(|k| ig_interdelivery_moment(stats.mean, stats.temporal_variance, k))
            .collect::<Result<Vec<_>>>()?;
        Ok(InterDeliveryMoments { values })
    }

    /// `E[l^k]` for `1 ≤ k ≤ max_k`.
    pub fn get(&self, k: u32) -> f64 {
        self.values[k as usize - 1]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// `E[AoI^z] = (1/E[l]) · Σ_i c_i E[l^i]` with the Faulhaber coefficients `c_i`.
pub fn aoi_moment(stats: &SecondOrderStats, z: u32) -> Result<f64> {
    if z < 1 {
        return Err(AoiError::invalid("moment order z must be >= 1"));
    }
    let gaps = InterDeliveryMoments::new(stats, z + 1)?;
    let coeffs = faulhaber_coefficients(z);
    let mut total = 0.0;
    for (i, c) in coeffs.iter().enumerate().skip(1) {
        if c.is_zero() {
            continue;
        }
        let c = c.to_f64().ok_or_else(|| {
            AoiError::InternalInconsistency(format!("coefficient {c} not representable"))
        })?;
        total += c * gaps.get(i as u32);
    }
    Ok(total / gaps.get(1))
}

/// The explicit first and second AoI moments, used to check [`aoi_moment`].
pub fn aoi_moment_closed(stats: &SecondOrderStats, z: u32) -> Result<f64> {
    let m = stats.mean;
    let v2 = stats.temporal_variance;
    match z {
        1 => Ok(0.5 * (v2 / (m * m) + 1.0 / m) + 0.5),
        2 => Ok(v2 * v2 / m.powi(4)
            + v2 / m.powi(3)
            + (3.0 * v2 + 2.0) / (6.0 * m * m)
            + 1.0 / (2.0 * m)
            + 1.0 / 6.0),
        _ => Err(AoiError::invalid(format!("closed form only exists for z in {{1, 2}}, got {z}"))),
    }
}
