//! The predicted leading constant c = α · ∏_p ω_p · ω_∞.

use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::primes_up_to;
use crate::montecarlo::{omega_infinity, McError, McEstimate, RegionSpec};
use crate::polytope::alpha;
use crate::surface::{SurfaceId, SurfaceSpec};

pub const DEFAULT_TRUNCATION: u64 = 1_000_000;
pub const DEFAULT_SAMPLES: u64 = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PeyreError {
    #[error("truncation point must be positive")]
    ZeroTruncation,
    #[error(transparent)]
    MonteCarlo(#[from] McError),
}

/// Exponent k in ω_p = (1 − 1/p)^k (1 + k/p + 1/p²).
pub fn local_exponent(id: SurfaceId) -> i32 {
    match id {
        SurfaceId::S1 => 5,
        SurfaceId::S2 | SurfaceId::S3 => 6,
    }
}

/// ω_p as a float, through logarithms to keep precision for large p.
pub fn ln_local_factor(id: SurfaceId, p: u64) -> f64 {
    let k = local_exponent(id) as f64;
    let x = 1.0 / p as f64;
    k * (-x).ln_1p() + (k * x + x * x).ln_1p()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerProduct {
    pub value: f64,
    /// The full product lies in [value − tail_bound, value].
    pub tail_bound: f64,
    pub truncation: u64,
}

/// ∏_{p ≤ P} ω_p. Every factor is below 1 and |log ω_p| ≤ K/p² with K = k(k+1)/2,
/// so the remaining primes shrink the product by a factor in [e^{−K/P}, 1].
pub fn euler_product(id: SurfaceId, truncation: u64) -> Result<EulerProduct, PeyreError> {
    if truncation == 0 {
        return Err(PeyreError::ZeroTruncation);
    }
    let ln: f64 = primes_up_to(truncation).into_iter().map(|p| ln_local_factor(id, p)).sum();
    let value = ln.exp();
    let k = local_exponent(id) as f64;
    let tail_k = k * (k + 1.0) / 2.0;
    Ok(EulerProduct { value, tail_bound: -value * (-tail_k / truncation as f64).exp_m1(), truncation })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeyreBreakdown {
    pub surface: SurfaceId,
    /// Exact rational written as "num/den".
    pub alpha: String,
    pub euler_product: EulerProduct,
    pub omega_inf: McEstimate,
    pub rho: u32,
    pub c_total: f64,
    /// Monte Carlo error and Euler tail combined in quadrature, relative terms.
    pub c_stderr: f64,
}

impl PeyreBreakdown {
    pub fn alpha_exact(&self) -> BigRational {
        self.alpha.parse().expect("alpha is written by assemble_c")
    }
}

pub fn assemble_c(
    id: SurfaceId,
    samples: u64,
    seed: u64,
    truncation: u64,
    shards: usize,
) -> Result<PeyreBreakdown, PeyreError> {
    let a = alpha(id);
    let euler = euler_product(id, truncation)?;
    let omega = omega_infinity(&RegionSpec::omega_infinity(id), samples, seed, shards)?;
    let af = a.to_f64().expect("α is a small rational");
    let c_total = af * euler.value * omega.estimate;
    let rel = ((omega.stderr / omega.estimate).powi(2) + (euler.tail_bound / euler.value).powi(2)).sqrt();
    Ok(PeyreBreakdown {
        surface: id,
        alpha: a.to_string(),
        euler_product: euler,
        omega_inf: omega,
        rho: SurfaceSpec::new(id).rho,
        c_total,
        c_stderr: c_total * rel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::local_density_closed_form;
    use num_bigint::BigInt;

    #[test]
    fn factor_at_two() {
        assert_eq!(
            local_density_closed_form(SurfaceId::S1, 2),
            BigRational::new(BigInt::from(15), BigInt::from(128))
        );
        assert!((ln_local_factor(SurfaceId::S1, 2).exp() - 15.0 / 128.0).abs() < 1e-15);
    }

    #[test]
    fn tail_constant_dominates() {
        for id in SurfaceId::ALL {
            let k = local_exponent(id) as f64;
            let big_k = k * (k + 1.0) / 2.0;
            for i in 1..=50_000 {
                let x = i as f64 / 100_000.0;
                let ln = k * (-x).ln_1p() + (k * x + x * x).ln_1p();
                assert!(ln < 0.0 && -ln <= big_k * x * x, "{id} x={x}");
            }
        }
    }

    #[test]
    fn products_are_monotone_and_s2_equals_s3() {
        let mut prev = 1.0;
        for p in [10, 100, 1000, 10_000] {
            let e = euler_product(SurfaceId::S1, p).unwrap();
            assert!(e.value < prev && e.value > 0.0);
            prev = e.value;
        }
        let a = euler_product(SurfaceId::S2, 100_000).unwrap();
        let b = euler_product(SurfaceId::S3, 100_000).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        let tight = euler_product(SurfaceId::S2, 1_000_000).unwrap();
        assert!(tight.value <= a.value && tight.value >= a.value - a.tail_bound);
    }

    #[test]
    fn zero_truncation_rejected() {
        assert_eq!(euler_product(SurfaceId::S1, 0), Err(PeyreError::ZeroTruncation));
    }

    #[test]
    fn breakdown_multiplies_out() {
        let b = assemble_c(SurfaceId::S2, 20_000, 3, 1000, 1).unwrap();
        assert_eq!(b.alpha, "1/8640");
        assert_eq!(b.rho, 6);
        let prod = b.euler_product.value * b.omega_inf.estimate / 8640.0;
        assert!((b.c_total - prod).abs() <= 1e-15 * prod);
    }
}
