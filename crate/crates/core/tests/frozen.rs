use delpezzo::oracle::count_exhaustive;
use delpezzo::polytope::alpha;
use delpezzo::torsor::count_torsor;
use delpezzo::{SurfaceId, SurfaceSpec};
use num_bigint::BigInt;
use num_rational::BigRational;

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 { a.abs() } else { gcd(b, a % b) }
}

fn on_s1(x: &[i64]) -> bool {
    let [x0, x1, x2, x3, x4, x5] = [x[0], x[1], x[2], x[3], x[4], x[5]];
    x0 * x2 == x1 * x5
        && x0 * x2 == x3 * x4
        && x0 * x3 + x1 * x1 + x1 * x4 == 0
        && x0 * x5 + x1 * x4 + x4 * x4 == 0
        && x3 * x5 + x1 * x2 + x2 * x4 == 0
        && !(x0 == 0 && x1 == 0 && x4 == 0 && x3 == 0)
        && !(x0 == 0 && x1 == 0 && x4 == 0 && x5 == 0)
        && !(x0 == 0 && x3 == 0 && x5 == 0 && x1 + x4 == 0)
        && !(x2 == 0 && x3 == 0 && x5 == 0 && x1 + x4 == 0)
}

fn on_s2(x: &[i64]) -> bool {
    let [x0, x1, x2, x3, x4] = [x[0], x[1], x[2], x[3], x[4]];
    x0 * x0 + x0 * x3 + x2 * x4 == 0
        && x1 * x3 == x2 * x2
        && !(x0 == 0 && x1 == 0 && x2 == 0)
        && !(x0 + x3 == 0 && x1 == 0 && x2 == 0)
        && !(x0 == 0 && x2 == 0 && x3 == 0)
}

fn on_s3(x: &[i64]) -> bool {
    let [x0, x1, x2, x3, x4] = [x[0], x[1], x[2], x[3], x[4]];
    x0 * x1 == x2 * x3
        && x0 * x4 + x1 * x2 + x3 * x3 == 0
        && !(x0 == 0 && x2 == 0 && x3 == 0)
        && !(x0 == 0 && x1 == 0 && x3 == 0)
        && !(x1 == 0 && x3 == 0 && x4 == 0)
}

type Case = (SurfaceId, usize, fn(&[i64]) -> bool);

fn naive_count(n: usize, b: i64, pred: fn(&[i64]) -> bool) -> u64 {
    let side = (2 * b + 1) as usize;
    let mut x = vec![0i64; n];
    let mut count = 0;
    for mut idx in 0..side.pow(n as u32) {
        for v in x.iter_mut() {
            *v = (idx % side) as i64 - b;
            idx /= side;
        }
        let first = x.iter().find(|&&v| v != 0);
        if first.is_some_and(|&v| v > 0) && x.iter().fold(0, |g, &v| gcd(g, v)) == 1 && pred(&x) {
            count += 1;
        }
    }
    count
}

#[test]
fn box_search_matches_naive_enumeration() {
    let cases: [Case; 3] =
        [(SurfaceId::S1, 6, on_s1), (SurfaceId::S2, 5, on_s2), (SurfaceId::S3, 5, on_s3)];
    for (id, n, pred) in cases {
        let b = if n == 6 { 5 } else { 8 };
        let expected = naive_count(n, b, pred);
        let got = count_exhaustive(&SurfaceSpec::new(id), b as u64).unwrap().count;
        assert_eq!(got, expected, "{id} B={b}");
    }
}

#[test]
fn frozen_counts() {
    let table = [
        (SurfaceId::S1, [(10, 92), (15, 152), (1000, 45036)]),
        (SurfaceId::S2, [(10, 110), (15, 140), (1000, 56230)]),
        (SurfaceId::S3, [(10, 90), (15, 140), (1000, 43658)]),
    ];
    for (id, rows) in table {
        for (b, n) in rows {
            assert_eq!(count_torsor(id, b, 2).unwrap().count, n, "{id} B={b}");
        }
    }
}

#[test]
fn frozen_alpha() {
    let r = |d: i64| BigRational::new(BigInt::from(1), BigInt::from(d));
    assert_eq!(alpha(SurfaceId::S1), r(864));
    assert_eq!(alpha(SurfaceId::S2), r(8640));
    assert_eq!(alpha(SurfaceId::S3), r(21600));
}
