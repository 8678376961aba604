//! End-to-end verification suite, run at a configurable scale.

use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analytics::{asymptotic_report, geometric_grid, run_grid, Diagnosis};
use crate::arith::{
    lemma_pr1_residual, local_density_closed_form, log_growth_exponent, primes_up_to, theta1_direct,
    theta1_quadratic_reduced, theta1_table, theta_admissible, CongruenceSpec, LocalTable, MultFn,
};
use crate::montecarlo::{check_volume_identity, omega_infinity, RegionSpec};
use crate::oracle::{exhaustive_points, projection_points, Method};
use crate::peyre::{assemble_c, DEFAULT_TRUNCATION};
use crate::polytope::{alpha, polytope_volume, volume_polytope};
use crate::surface::{SurfaceId, SurfaceSpec};
use crate::torsor::{torsor_histogram, verify_bijection, TorsorSpec};

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    /// Failure is tolerated when the report isolates the cause.
    pub expected_tolerance: bool,
    /// For tolerated criteria: whether the cause of a failure was isolated.
    pub isolated: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CheckOutcome {
    /// Whether the outcome is acceptable for the suite as a whole.
    pub fn acceptable(&self) -> bool {
        self.passed || (self.expected_tolerance && self.isolated)
    }

    pub fn line(&self) -> String {
        let tag = match (self.passed, self.expected_tolerance) {
            (true, _) => "PASS",
            (false, true) => "FAIL (expected tolerance)",
            (false, false) => "FAIL",
        };
        format!("[{tag}] {:>2} {}: {} ({:.1}s)", self.id, self.name, self.detail, self.seconds)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Scale {
    pub bijection_bounds: Vec<u64>,
    pub exhaustive_max: u64,
    pub psi_samples: usize,
    pub theta_samples: usize,
    pub mc_samples: u64,
    pub volume_bound: f64,
    pub residual_tmax: u64,
    pub asymptotic_bmin: u64,
    pub asymptotic_bmax: u64,
    pub points_per_decade: u32,
    pub fit_tolerance: f64,
    pub determinism_bound: u64,
    pub determinism_samples: u64,
    pub shards: usize,
    pub seed: u64,
}

impl Scale {
    /// The full acceptance scale.
    pub fn acceptance(shards: usize) -> Self {
        Scale {
            bijection_bounds: vec![10, 25, 50, 100, 500],
            exhaustive_max: 12,
            psi_samples: 100_000,
            theta_samples: 10_000,
            mc_samples: 10_000_000,
            volume_bound: 1e4,
            residual_tmax: 1_000_000,
            asymptotic_bmin: 1_000,
            asymptotic_bmax: 1_000_000,
            points_per_decade: 16,
            fit_tolerance: 0.3,
            determinism_bound: 3_000,
            determinism_samples: 1_000_000,
            shards,
            seed: 0,
        }
    }

    /// A quick pass for everyday use.
    pub fn desk(shards: usize) -> Self {
        Scale {
            bijection_bounds: vec![10, 25, 50],
            exhaustive_max: 8,
            psi_samples: 10_000,
            theta_samples: 1_000,
            mc_samples: 1_000_000,
            residual_tmax: 100_000,
            asymptotic_bmax: 100_000,
            determinism_bound: 500,
            determinism_samples: 100_000,
            ..Scale::acceptance(shards)
        }
    }
}

fn timed(id: u8, name: &'static str, f: impl FnOnce() -> (bool, String)) -> CheckOutcome {
    let start = Instant::now();
    let (passed, detail) = f();
    CheckOutcome {
        id,
        name,
        passed,
        expected_tolerance: false,
        isolated: passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn bijection(scale: &Scale) -> CheckOutcome {
    timed(1, "torsor/projection bijection", || {
        let mut ok = true;
        let mut parts = Vec::new();
        for id in SurfaceId::ALL {
            let mut counts = Vec::new();
            for &b in &scale.bijection_bounds {
                match verify_bijection(id, b, Method::Projection, scale.shards) {
                    Ok(r) => {
                        ok &= r.ok();
                        counts.push(r.torsor_count.to_string());
                        if !r.ok() {
                            parts.push(format!("{id} B={b} mismatch: {r:?}"));
                        }
                    }
                    Err(e) => {
                        ok = false;
                        parts.push(format!("{id} B={b}: {e}"));
                    }
                }
            }
            parts.push(format!("{id} {}", counts.join("/")));
        }
        (ok, parts.join("; "))
    })
}

pub fn oracle_agreement(scale: &Scale) -> CheckOutcome {
    timed(2, "projection = exhaustive oracle", || {
        let mut ok = true;
        let mut parts = Vec::new();
        for id in SurfaceId::ALL {
            let s = SurfaceSpec::new(id);
            for b in 1..=scale.exhaustive_max {
                let same = match (projection_points(&s, b, scale.shards), exhaustive_points(&s, b)) {
                    (Ok(p), Ok(e)) => p == e,
                    _ => false,
                };
                if !same {
                    ok = false;
                    parts.push(format!("{id} differs at B={b}"));
                }
            }
        }
        if ok {
            parts.push(format!("all surfaces, B = 1..={}", scale.exhaustive_max));
        }
        (ok, parts.join("; "))
    })
}

/// Surface equations evaluated exactly at Ψ(η).
fn residues_at_image(spec: &TorsorSpec, surface: &SurfaceSpec, eta: &[i64]) -> Vec<BigInt> {
    let x: Vec<BigInt> = spec
        .psi
        .iter()
        .map(|e| e.iter().zip(eta).map(|(&k, &v)| num_traits::pow(BigInt::from(v), k as usize)).product())
        .collect();
    surface
        .equations
        .iter()
        .map(|eq| {
            eq.terms()
                .iter()
                .map(|(c, e)| {
                    e.iter().zip(&x).map(|(&k, xi)| num_traits::pow(xi.clone(), k as usize)).product::<BigInt>() * c
                })
                .sum()
        })
        .collect()
}

pub fn psi_identity(scale: &Scale) -> CheckOutcome {
    timed(3, "torsor image lies on the surface", || {
        let mut rng = ChaCha8Rng::seed_from_u64(scale.seed);
        let mut bad = 0usize;
        for id in SurfaceId::ALL {
            let spec = TorsorSpec::new(id);
            let surface = SurfaceSpec::new(id);
            for _ in 0..scale.psi_samples {
                let eta = spec.random_solution(&mut rng, 40);
                let on = spec.residual(&eta) == Ok(0)
                    && residues_at_image(&spec, &surface, &eta).iter().all(|r| r.is_zero());
                if !on {
                    bad += 1;
                }
            }
        }
        (bad == 0, format!("{} solutions per surface, {bad} nonzero residues", scale.psi_samples))
    })
}

pub fn alpha_values(_scale: &Scale) -> CheckOutcome {
    timed(4, "alpha constants", || {
        let got: Vec<BigRational> = SurfaceId::ALL.iter().map(|&id| alpha(id)).collect();
        let want = [ratio(1, 864), ratio(1, 8640), ratio(1, 21600)];
        let s2_region = polytope_volume(&volume_polytope(SurfaceId::S2)).ok();
        let ok = got == want;
        (
            ok,
            format!(
                "s1 {} s2 {} s3 {}; s2 height-region volume {}",
                got[0],
                got[1],
                got[2],
                s2_region.map_or("unavailable".to_string(), |v| v.to_string())
            ),
        )
    })
}

pub fn local_densities(_scale: &Scale) -> CheckOutcome {
    timed(5, "local densities from tables", || {
        let primes: Vec<u64> = primes_up_to(600).into_iter().take(100).collect();
        let mut bad = Vec::new();
        for id in SurfaceId::ALL {
            let table = LocalTable::for_surface(id);
            for &p in &primes {
                if table.local_density(p) != local_density_closed_form(id, p) {
                    bad.push(format!("{id} p={p}"));
                }
            }
        }
        let ok = primes.len() == 100 && bad.is_empty();
        (ok, if ok { "first 100 primes, all surfaces".into() } else { bad.join(", ") })
    })
}

/// A random tuple accepted by [`theta_admissible`], entries log-uniform up to `max`.
pub fn random_admissible(id: SurfaceId, rng: &mut ChaCha8Rng, max: f64) -> Vec<i64> {
    let n = if id == SurfaceId::S1 { 6 } else { 7 };
    loop {
        let eta: Vec<i64> = (0..n)
            .map(|i| {
                let v = max.powf(rng.gen::<f64>()).floor().max(1.0) as i64;
                if i + 1 == n && rng.gen::<bool>() {
                    -v
                } else {
                    v
                }
            })
            .collect();
        if theta_admissible(id, &eta).is_ok() {
            return eta;
        }
    }
}

pub fn theta_equivalence(scale: &Scale) -> CheckOutcome {
    timed(6, "theta1 table = direct", || {
        let mut rng = ChaCha8Rng::seed_from_u64(scale.seed.wrapping_add(6));
        let mut bad = Vec::new();
        let mut nonzero = 0usize;
        for id in SurfaceId::ALL {
            for _ in 0..scale.theta_samples {
                let eta = random_admissible(id, &mut rng, 1e4);
                let table = theta1_table(id, &eta);
                let direct = if id == SurfaceId::S3 { theta1_quadratic_reduced(&eta) } else { theta1_direct(id, &eta) };
                match (table, direct) {
                    (Ok(t), Ok(d)) if t == d => nonzero += usize::from(t != BigRational::from_integer(0.into())),
                    (t, d) => {
                        if bad.len() < 3 {
                            bad.push(format!("{id} {eta:?}: {t:?} vs {d:?}"));
                        }
                    }
                }
            }
        }
        let ok = bad.is_empty();
        let detail = if ok {
            format!("{} tuples per surface, {nonzero} nonzero values", scale.theta_samples)
        } else {
            bad.join("; ")
        };
        (ok, detail)
    })
}

pub fn volume_identities(scale: &Scale) -> CheckOutcome {
    timed(7, "volume identities", || {
        let mut ok = true;
        let mut parts = Vec::new();
        for id in SurfaceId::ALL {
            match check_volume_identity(id, scale.volume_bound, scale.mc_samples, scale.seed, scale.shards) {
                Ok(r) => {
                    let pass = r.z_score.abs() <= 3.0;
                    ok &= pass;
                    parts.push(format!("{id} V={:.5e}±{:.1e} pred={:.5e} z={:+.2}", r.volume.estimate, r.volume.stderr, r.predicted, r.z_score));
                }
                Err(e) => {
                    ok = false;
                    parts.push(format!("{id}: {e}"));
                }
            }
        }
        (ok, format!("B={}, {} samples: {}", scale.volume_bound, scale.mc_samples, parts.join("; ")))
    })
}

/// ϑ(n) = 0 for even n and ∏_{p | n} (1 − 1/p) otherwise; lies in Θ₂(2, 1, 1, 1).
pub fn odd_phi_star() -> MultFn {
    let mut f = MultFn::new(1.0, Box::new(|p, nu| if nu == 0 { 1.0 } else if p == 2 { 0.0 } else { 1.0 - 1.0 / p as f64 }));
    f.b = 2;
    f
}

pub fn congruence_residuals(scale: &Scale) -> CheckOutcome {
    timed(8, "congruence-weighted sum residuals", || {
        let grid: Vec<f64> = (1..=scale.residual_tmax).flat_map(|n| [n as f64, n as f64 + 0.5]).collect();
        let one = MultFn::new(1.0, Box::new(|_, _| 1.0));
        let trivial = CongruenceSpec::new(1, 1, 1, 1)
            .and_then(|spec| lemma_pr1_residual(&one, &spec, &grid, 1000))
            .map(|r| r.iter().map(|p| p.residual.abs()).fold(0.0, f64::max));
        let f = odd_phi_star();
        let ints: Vec<f64> = (1..=scale.residual_tmax).map(|n| n as f64).collect();
        let exponent = CongruenceSpec::new(5, 1, 1, 2)
            .and_then(|spec| lemma_pr1_residual(&f, &spec, &ints, DEFAULT_TRUNCATION))
            .and_then(|r| log_growth_exponent(&r, 100.0));
        match (trivial, exponent) {
            (Ok(max1), Ok(e)) => {
                let ok = max1 <= 1.0 && e <= f.c2 + 0.5;
                (ok, format!("q=1 max|R|={max1}; m=2 q=5 exponent {e:.3} (limit {:.1}) over t ≤ {}", f.c2 + 0.5, scale.residual_tmax))
            }
            (a, b) => (false, format!("{a:?} {b:?}")),
        }
    })
}

pub fn asymptotics(scale: &Scale) -> CheckOutcome {
    let start = Instant::now();
    let mut passed = true;
    let mut isolated = true;
    let mut parts = Vec::new();
    let bounds = geometric_grid(scale.asymptotic_bmin, scale.asymptotic_bmax, scale.points_per_decade);
    for id in SurfaceId::ALL {
        let res = bounds
            .clone()
            .map_err(|e| e.to_string())
            .and_then(|b| run_grid(id, &b, Method::Torsor, scale.shards).map_err(|e| e.to_string()))
            .and_then(|g| {
                let grid: Vec<(u64, u64)> = g.iter().map(|r| (r.bound, r.count)).collect();
                let p = assemble_c(id, scale.mc_samples, scale.seed, DEFAULT_TRUNCATION, scale.shards).map_err(|e| e.to_string())?;
                asymptotic_report(&grid, &p, scale.fit_tolerance).map_err(|e| e.to_string())
            });
        match res {
            Ok(r) => {
                let ok = r.relative_deviation.abs() <= scale.fit_tolerance && r.drift_decreasing;
                passed &= ok;
                isolated &= matches!(r.diagnosis, Diagnosis::Agrees | Diagnosis::MonteCarloError | Diagnosis::SlowConvergence)
                    && r.drift_decreasing;
                parts.push(format!(
                    "{id} c={:.4e}±{:.1e} lead={:.4e} dev={:+.3} ratio@top={:.3} drifts={:?} diagnosis={:?}",
                    r.predicted_c,
                    r.predicted_c_stderr,
                    r.leading_coeff,
                    r.relative_deviation,
                    r.ratios.last().copied().unwrap_or(f64::NAN),
                    r.decade_drifts.iter().map(|d| (d * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
                    r.diagnosis
                ));
            }
            Err(e) => {
                passed = false;
                isolated = false;
                parts.push(format!("{id}: {e}"));
            }
        }
    }
    CheckOutcome {
        id: 9,
        name: "asymptotic fit",
        passed,
        expected_tolerance: true,
        isolated,
        detail: format!(
            "B in [{}, {}], tolerance {}: {}",
            scale.asymptotic_bmin,
            scale.asymptotic_bmax,
            scale.fit_tolerance,
            parts.join("; ")
        ),
        seconds: start.elapsed().as_secs_f64(),
    }
}

pub fn determinism(scale: &Scale) -> CheckOutcome {
    timed(10, "shard-count determinism", || {
        let shard_counts = [1usize, 4, 16];
        let b = scale.determinism_bound;
        let bounds = [b / 10, b / 2, b];
        let mut ok = true;
        let mut parts = Vec::new();
        for id in SurfaceId::ALL {
            let counts: Vec<_> = shard_counts.iter().map(|&s| torsor_histogram(id, &bounds, s).ok()).collect();
            let proj: Vec<_> = shard_counts
                .iter()
                .map(|&s| projection_points(&SurfaceSpec::new(id), b.min(500), s).ok().map(|v| v.len()))
                .collect();
            let region = RegionSpec::omega_infinity(id);
            let mc: Vec<_> = shard_counts
                .iter()
                .map(|&s| omega_infinity(&region, scale.determinism_samples, scale.seed, s).ok().map(|e| (e.estimate.to_bits(), e.stderr.to_bits())))
                .collect();
            let vol: Vec<_> = shard_counts
                .iter()
                .map(|&s| {
                    check_volume_identity(id, 1e4, scale.determinism_samples, scale.seed, s)
                        .ok()
                        .map(|r| (r.volume.estimate.to_bits(), r.z_score.to_bits()))
                })
                .collect();
            let this = all_same(&counts) && all_same(&proj) && all_same(&mc) && all_same(&vol);
            ok &= this;
            parts.push(format!("{id} {}", if this { "identical" } else { "differs" }));
        }
        (ok, format!("shards {shard_counts:?}, torsor B ≤ {b}, {} MC samples: {}", scale.determinism_samples, parts.join(", ")))
    })
}

fn all_same<T: PartialEq>(v: &[Option<T>]) -> bool {
    v.iter().all(|x| x.is_some() && *x == v[0])
}

/// Runs every criterion in order, calling `report` as each one finishes.
pub fn run_all(scale: &Scale, mut report: impl FnMut(&CheckOutcome)) -> Vec<CheckOutcome> {
    let checks: [fn(&Scale) -> CheckOutcome; 10] = [
        bijection,
        oracle_agreement,
        psi_identity,
        alpha_values,
        local_densities,
        theta_equivalence,
        volume_identities,
        congruence_residuals,
        asymptotics,
        determinism,
    ];
    checks
        .iter()
        .map(|c| {
            let o = c(scale);
            report(&o);
            o
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn admissible_tuples_are_admissible() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for id in SurfaceId::ALL {
            for _ in 0..50 {
                let eta = random_admissible(id, &mut rng, 1e4);
                assert!(theta_admissible(id, &eta).is_ok());
                assert!(eta.iter().all(|v| v.unsigned_abs() <= 10_000));
            }
        }
    }

    #[test]
    fn odd_phi_star_vanishes_on_evens() {
        let f = odd_phi_star();
        assert_eq!(f.eval(4), 0.0);
        assert!((f.eval(15) - (2.0 / 3.0) * (4.0 / 5.0)).abs() < 1e-15);
    }
}
