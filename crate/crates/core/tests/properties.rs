use delpezzo::analytics::fit_log_poly;
use delpezzo::arith::{
    count_congruence_solutions, gcd, lemma_pr1_residual, local_density_closed_form, primes_up_to, CongruenceSpec,
    LocalTable, MultFn,
};
use delpezzo::checks::odd_phi_star;
use delpezzo::montecarlo::{integrate, McEstimate};
use delpezzo::oracle::{CountRecord, Method};
use delpezzo::polytope::{alpha, alpha_polytope, polytope_volume, PolytopeSpec};
use delpezzo::surface::is_canonical;
use delpezzo::torsor::{TorsorError, TorsorSpec};
use delpezzo::{ProjectivePoint, SurfaceId, SurfaceSpec};
use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn surface_id() -> impl Strategy<Value = SurfaceId> {
    prop_oneof![Just(SurfaceId::S1), Just(SurfaceId::S2), Just(SurfaceId::S3)]
}

fn permute(p: &PolytopeSpec, perm: &[usize]) -> PolytopeSpec {
    let inequalities = p
        .inequalities
        .iter()
        .map(|(a, rhs)| (perm.iter().map(|&j| a[j].clone()).collect(), rhs.clone()))
        .collect();
    PolytopeSpec { dim: p.dim, inequalities, prefactor: p.prefactor.clone() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalize_is_canonical_and_scale_invariant(
        raw in prop::collection::vec(-1000i64..1000, 5..7),
        lambda in prop_oneof![-50i64..-1, 1i64..50],
    ) {
        prop_assume!(raw.iter().any(|&x| x != 0));
        let p = ProjectivePoint::normalize(&raw).unwrap();
        prop_assert!(is_canonical(p.coords()));
        prop_assert_eq!(ProjectivePoint::normalize(p.coords()).unwrap(), p.clone());
        let scaled: Vec<i64> = raw.iter().map(|x| x * lambda).collect();
        prop_assert_eq!(ProjectivePoint::normalize(&scaled).unwrap(), p);
    }

    #[test]
    fn polytope_volume_ignores_coordinate_order(seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for id in [SurfaceId::S1, SurfaceId::S3] {
            let p = alpha_polytope(id).unwrap();
            let mut perm: Vec<usize> = (0..p.dim).collect();
            perm.shuffle(&mut rng);
            prop_assert_eq!(polytope_volume(&permute(&p, &perm)).unwrap(), alpha(id));
        }
    }

    #[test]
    fn polytope_volume_ignores_redundant_rows(i in 0usize..2, j in 0usize..2, slack in 0i64..5, w in 1i64..4) {
        for id in [SurfaceId::S1, SurfaceId::S3] {
            let mut p = alpha_polytope(id).unwrap();
            let rows = p.inequalities.len();
            let (a, ai) = p.inequalities[i % rows].clone();
            let (b, bi) = p.inequalities[j % rows].clone();
            let wq = BigRational::from_integer(BigInt::from(w));
            let combo = a.iter().zip(&b).map(|(x, y)| x * &wq + y).collect();
            p.inequalities.push((combo, ai * &wq + bi + BigRational::from_integer(BigInt::from(slack))));
            prop_assert_eq!(polytope_volume(&p).unwrap(), alpha(id));
        }
    }

    #[test]
    fn fit_is_scale_equivariant(lambda in 0.01f64..100.0, c in 0.1f64..10.0, c1 in -5.0f64..5.0) {
        let pts: Vec<(f64, f64)> = (0..12)
            .map(|i| {
                let b = 10f64.powf(1.0 + 0.5 * i as f64);
                let l = b.ln();
                (b, c * l.powi(3) + c1 * l + 1.0 / l)
            })
            .collect();
        let base = fit_log_poly(&pts, 3).unwrap();
        let scaled_pts: Vec<(f64, f64)> = pts.iter().map(|&(b, y)| (b, lambda * y)).collect();
        let scaled = fit_log_poly(&scaled_pts, 3).unwrap();
        prop_assert!((scaled.leading - lambda * base.leading).abs() <= 1e-9 * lambda * base.leading.abs().max(1.0));
        prop_assert!((scaled.rms_residual - lambda * base.rms_residual).abs() <= 1e-9 * lambda.max(1.0));
    }

    #[test]
    fn odd_phi_star_is_multiplicative(m in 1u64..5000, n in 1u64..5000) {
        prop_assume!(gcd(m, n) == 1);
        let f = odd_phi_star();
        let lhs = f.eval(m * n);
        let rhs = f.eval(m) * f.eval(n);
        prop_assert!((lhs - rhs).abs() <= 1e-12);
    }

    #[test]
    fn residual_series_ignores_grid_order(seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let f = odd_phi_star();
        let spec = CongruenceSpec::new(5, 1, 1, 2).unwrap();
        let grid: Vec<f64> = (1..=200).map(|n| n as f64 * 1.5).collect();
        let mut shuffled = grid.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let a = lemma_pr1_residual(&f, &spec, &grid, 2000).unwrap();
        let b = lemma_pr1_residual(&f, &spec, &shuffled, 2000).unwrap();
        for r in &b {
            let s = a.iter().find(|s| s.t == r.t).unwrap();
            prop_assert_eq!(s, r);
            prop_assert_eq!(r.residual, r.sum - r.main);
        }
    }

    #[test]
    fn congruence_counts_match_brute_force(q in 1u64..400, a in -50i64..50, d in 1i64..50, m in 1u32..5, n in -300i64..300) {
        prop_assume!(gcd(a.unsigned_abs(), q) == 1 && gcd(d as u64, q) == 1);
        let spec = CongruenceSpec::new(q, a, d, m).unwrap();
        let qi = q as i128;
        let brute = (1..=q)
            .filter(|&r| gcd(r, q) == 1)
            .filter(|&r| {
                let pw = (0..m).fold(1i128, |acc, _| acc * r as i128 % qi);
                (d as i128 * pw - a as i128 * n as i128).rem_euclid(qi) == 0
            })
            .count() as u64;
        prop_assert_eq!(count_congruence_solutions(&spec, n), brute);
    }

    #[test]
    fn congruence_counts_are_periodic(q in 1u64..60, n in -500i64..500, m in 1u32..4) {
        let spec = CongruenceSpec::new(q, 1, 1, m).unwrap();
        let c = count_congruence_solutions(&spec, n);
        prop_assert_eq!(c, count_congruence_solutions(&spec, n + q as i64));
        prop_assert!(c <= q);
    }

    #[test]
    fn random_torsor_solutions_map_onto_the_surface(id in surface_id(), seed in any::<u64>()) {
        let spec = TorsorSpec::new(id);
        let surface = SurfaceSpec::new(id);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let eta = spec.random_solution(&mut rng, 12);
            prop_assert_eq!(spec.residual(&eta).unwrap(), 0);
            match spec.psi_map(&eta) {
                Ok(p) => prop_assert!(surface.on_surface(p.expect("nonzero image").coords())),
                Err(e) => prop_assert_eq!(e, TorsorError::Overflow),
            }
        }
    }

    #[test]
    fn integrate_is_shard_independent(seed in any::<u64>(), shards in 1usize..9) {
        let f = |_: &mut ChaCha8Rng, u: f64| u * u;
        let one = integrate(40_000, seed, 16, 1, f).unwrap();
        let many = integrate(40_000, seed, 16, shards, f).unwrap();
        prop_assert_eq!(one, many);
    }
}

#[test]
fn local_tables_match_closed_form_on_sampled_primes() {
    for id in SurfaceId::ALL {
        let table = LocalTable::for_surface(id);
        for p in primes_up_to(2000).into_iter().step_by(17) {
            assert_eq!(table.local_density(p), local_density_closed_form(id, p), "{id} p={p}");
        }
    }
}

#[test]
fn monte_carlo_errors_are_calibrated_across_seeds() {
    let f = |rng: &mut ChaCha8Rng, u: f64| {
        use rand::Rng;
        let v: f64 = rng.gen();
        (u * u + v).exp()
    };
    let exact = 2.5132479163562063;
    let z2: f64 = (0..10u64)
        .map(|seed| {
            let e = integrate(50_000, seed, 8, 2, f).unwrap();
            ((e.estimate - exact) / e.stderr).powi(2)
        })
        .sum();
    let p = 1.0 - ChiSquared::new(10.0).unwrap().cdf(z2);
    assert!(p > 1e-3, "chi-square {z2:.2} with p = {p:.2e}");
}

#[test]
fn records_roundtrip_through_json() {
    let r = CountRecord::new(SurfaceId::S2, Method::Torsor, 100, 2222, 0.5);
    let back: CountRecord = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
    assert_eq!(back, r);
    let e = McEstimate { estimate: 1.5, stderr: 0.01, samples: 10, seed: 3, strata: 4 };
    let back: McEstimate = serde_json::from_str(&serde_json::to_string(&e).unwrap()).unwrap();
    assert_eq!(back, e);
}

#[test]
fn multiplicative_function_constant_scales_values() {
    let f = MultFn::new(3.0, Box::new(|p, nu| if nu == 0 { 1.0 } else { 1.0 / (p as f64).powi(nu as i32) }));
    assert_eq!(f.eval(1), 3.0);
    assert!((f.eval(12) - 3.0 / 12.0).abs() < 1e-15);
}
