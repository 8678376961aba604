//! Universal torsor data for the three surfaces and lattice-point enumeration
//! on the torsor, mapped down to the surface by monomial maps.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::{gcd, mod_inverse};
use crate::oracle::{CountRecord, Method};
use crate::surface::{ProjectivePoint, SurfaceError, SurfaceId};

/// Largest height bound accepted by the enumerators; all intermediate products then fit in 128 bits.
pub const MAX_TORSOR_BOUND: u64 = 1_000_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TorsorError {
    #[error("height bound {0} outside [1, {MAX_TORSOR_BOUND}]")]
    BoundOutOfRange(u64),
    #[error("expected {expected} torsor variables, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("shard count must be positive")]
    ZeroShards,
    #[error("image point has a coordinate beyond 64 bits")]
    Overflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    Positive,
    NonZero,
    Any,
}

impl Domain {
    pub fn contains(self, v: i64) -> bool {
        match self {
            Domain::Positive => v > 0,
            Domain::NonZero => v != 0,
            Domain::Any => true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TorsorSpec {
    pub surface: SurfaceId,
    pub nvars: usize,
    /// Three signed monomials summing to zero.
    pub terms: Vec<(i64, Vec<u32>)>,
    /// Index (from 0) of the variable solved for; it occurs linearly in exactly one term.
    pub dependent: usize,
    pub domains: Vec<Domain>,
    /// Edges of the coprimality graph, variables numbered from 1.
    pub edges: Vec<(usize, usize)>,
    /// Exponent vectors of the coordinates of the map to the surface.
    pub psi: Vec<Vec<u32>>,
}

fn exps(v: &[u32]) -> Vec<u32> {
    v.to_vec()
}

impl TorsorSpec {
    pub fn new(surface: SurfaceId) -> Self {
        use Domain::*;
        match surface {
            SurfaceId::S1 => TorsorSpec {
                surface,
                nvars: 8,
                terms: vec![
                    (1, exps(&[0, 1, 0, 0, 2, 1, 0, 0])),
                    (1, exps(&[0, 0, 1, 0, 0, 0, 1, 0])),
                    (1, exps(&[0, 0, 0, 1, 0, 0, 0, 1])),
                ],
                dependent: 7,
                domains: vec![Positive, Positive, Positive, Positive, Positive, NonZero, Any, Any],
                edges: vec![(7, 3), (7, 6), (7, 8), (8, 4), (8, 6), (3, 1), (4, 1), (6, 5), (5, 2), (2, 1)],
                psi: vec![
                    exps(&[3, 2, 2, 2, 1, 0, 0, 0]),
                    exps(&[2, 1, 2, 1, 0, 0, 1, 0]),
                    exps(&[0, 0, 0, 0, 0, 1, 1, 1]),
                    exps(&[1, 1, 1, 0, 1, 1, 1, 0]),
                    exps(&[2, 1, 1, 2, 0, 0, 0, 1]),
                    exps(&[1, 1, 0, 1, 1, 1, 0, 1]),
                ],
            },
            SurfaceId::S2 => TorsorSpec {
                surface,
                nvars: 9,
                terms: vec![
                    (1, exps(&[1, 0, 0, 0, 0, 0, 0, 0, 1])),
                    (1, exps(&[0, 1, 0, 0, 0, 0, 0, 1, 0])),
                    (1, exps(&[0, 0, 0, 1, 3, 2, 1, 0, 0])),
                ],
                dependent: 8,
                domains: vec![Positive, Positive, Positive, Positive, Positive, Positive, NonZero, Any, Any],
                edges: vec![
                    (9, 1),
                    (9, 7),
                    (9, 8),
                    (1, 3),
                    (7, 5),
                    (5, 6),
                    (6, 4),
                    (4, 3),
                    (8, 2),
                    (8, 7),
                    (2, 3),
                ],
                psi: vec![
                    exps(&[0, 1, 1, 1, 1, 1, 1, 1, 0]),
                    exps(&[2, 2, 3, 2, 0, 1, 0, 0, 0]),
                    exps(&[1, 1, 2, 2, 2, 2, 1, 0, 0]),
                    exps(&[0, 0, 1, 2, 4, 3, 2, 0, 0]),
                    exps(&[0, 0, 0, 0, 0, 0, 1, 1, 1]),
                ],
            },
            SurfaceId::S3 => TorsorSpec {
                surface,
                nvars: 9,
                terms: vec![
                    (1, exps(&[0, 0, 0, 0, 1, 0, 0, 0, 1])),
                    (1, exps(&[1, 0, 0, 0, 0, 0, 0, 2, 0])),
                    (1, exps(&[0, 0, 1, 2, 0, 3, 1, 0, 0])),
                ],
                dependent: 8,
                domains: vec![Positive, Positive, Positive, Positive, Positive, Positive, NonZero, Any, Any],
                edges: vec![
                    (9, 5),
                    (9, 7),
                    (9, 8),
                    (8, 1),
                    (8, 7),
                    (5, 2),
                    (1, 2),
                    (7, 6),
                    (6, 4),
                    (4, 3),
                    (3, 2),
                ],
                psi: vec![
                    exps(&[2, 4, 3, 2, 3, 1, 0, 0, 0]),
                    exps(&[1, 1, 1, 1, 0, 1, 1, 1, 0]),
                    exps(&[2, 3, 2, 1, 2, 0, 0, 1, 0]),
                    exps(&[1, 2, 2, 2, 1, 2, 1, 0, 0]),
                    exps(&[0, 0, 0, 0, 0, 0, 1, 0, 1]),
                ],
            },
        }
    }

    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        self.edges.iter().any(|&(a, b)| (a == i + 1 && b == j + 1) || (a == j + 1 && b == i + 1))
    }

    fn check_arity(&self, eta: &[i64]) -> Result<(), TorsorError> {
        if eta.len() != self.nvars {
            return Err(TorsorError::Arity { expected: self.nvars, got: eta.len() });
        }
        Ok(())
    }

    fn monomial(e: &[u32], eta: &[i64]) -> i128 {
        e.iter().zip(eta).fold(1i128, |acc, (&k, &v)| {
            (0..k).fold(acc, |a, _| a.checked_mul(v as i128).expect("monomial overflows 128 bits"))
        })
    }

    /// Sum of the three torsor terms.
    pub fn residual(&self, eta: &[i64]) -> Result<i128, TorsorError> {
        self.check_arity(eta)?;
        Ok(self.terms.iter().map(|(c, e)| *c as i128 * Self::monomial(e, eta)).sum())
    }

    /// Solves for the dependent variable given all others (the dependent slot is
    /// omitted from `partial`). `None` when there is no unique integer solution.
    pub fn solve_dependent(&self, partial: &[i64]) -> Result<Option<i64>, TorsorError> {
        if partial.len() + 1 != self.nvars {
            return Err(TorsorError::Arity { expected: self.nvars - 1, got: partial.len() });
        }
        let mut eta = partial.to_vec();
        eta.insert(self.dependent, 0);
        let mut coeff = 0i128;
        let mut rest = 0i128;
        for (c, e) in &self.terms {
            if e[self.dependent] > 0 {
                let mut e2 = e.clone();
                e2[self.dependent] -= 1;
                coeff = *c as i128 * Self::monomial(&e2, &eta);
            } else {
                rest += *c as i128 * Self::monomial(e, &eta);
            }
        }
        if coeff == 0 || rest % coeff != 0 {
            return Ok(None);
        }
        Ok(i64::try_from(-rest / coeff).ok())
    }

    pub fn in_domains(&self, eta: &[i64]) -> bool {
        eta.len() == self.nvars && eta.iter().zip(&self.domains).all(|(&v, d)| d.contains(v))
    }

    pub fn coprimality_ok(&self, eta: &[i64]) -> bool {
        (0..self.nvars).all(|i| {
            (i + 1..self.nvars)
                .all(|j| self.adjacent(i, j) || gcd(eta[i].unsigned_abs(), eta[j].unsigned_abs()) == 1)
        })
    }

    /// Coordinates of the image point before normalization.
    pub fn psi_raw(&self, eta: &[i64]) -> Result<Vec<i128>, TorsorError> {
        self.check_arity(eta)?;
        Ok(self.psi.iter().map(|e| Self::monomial(e, eta)).collect())
    }

    pub fn psi_map(&self, eta: &[i64]) -> Result<Option<ProjectivePoint>, TorsorError> {
        let raw = self.psi_raw(eta)?;
        match ProjectivePoint::normalize_wide(&raw) {
            Ok(p) => Ok(Some(p)),
            Err(SurfaceError::Overflow) => Err(TorsorError::Overflow),
            Err(_) => Ok(None),
        }
    }

    pub fn height(&self, eta: &[i64]) -> Result<u128, TorsorError> {
        Ok(self.psi_raw(eta)?.iter().map(|x| x.unsigned_abs()).max().unwrap_or(0))
    }

    /// Membership in the counted torsor set at height bound `b`.
    pub fn is_member(&self, eta: &[i64], b: u64) -> Result<bool, TorsorError> {
        self.check_arity(eta)?;
        Ok(self.in_domains(eta)
            && self.residual(eta)? == 0
            && self.height(eta)? <= b as u128
            && self.coprimality_ok(eta))
    }

    /// A random solution of the torsor equation in the variable domains, ignoring
    /// coprimality and height. Variables dividing the dependent one are kept at most
    /// 3 in size so that rejection succeeds quickly; the others range up to `max_abs`.
    pub fn random_solution<R: Rng>(&self, rng: &mut R, max_abs: i64) -> Vec<i64> {
        let divisor = self
            .terms
            .iter()
            .find(|(_, e)| e[self.dependent] > 0)
            .map(|(_, e)| e.clone())
            .unwrap_or_default();
        loop {
            let partial: Vec<i64> = (0..self.nvars)
                .filter(|&i| i != self.dependent)
                .map(|i| {
                    let m = if divisor.get(i).is_some_and(|&k| k > 0) { 3 } else { max_abs.max(1) };
                    match self.domains[i] {
                        Domain::Positive => rng.gen_range(1..=m),
                        Domain::NonZero => rng.gen_range(1..=m) * if rng.gen::<bool>() { 1 } else { -1 },
                        Domain::Any => rng.gen_range(-m..=m),
                    }
                })
                .collect();
            if let Ok(Some(d)) = self.solve_dependent(&partial) {
                if self.domains[self.dependent].contains(d) {
                    let mut eta = partial;
                    eta.insert(self.dependent, d);
                    return eta;
                }
            }
        }
    }

    /// For the given loop order, the earlier variables each variable must be coprime to.
    fn coprime_plan(&self, order: &[usize]) -> Vec<Vec<usize>> {
        order
            .iter()
            .enumerate()
            .map(|(k, &v)| order[..k].iter().copied().filter(|&u| !self.adjacent(u, v)).collect())
            .collect()
    }
}

fn check_bound(b: u64) -> Result<(), TorsorError> {
    if b == 0 || b > MAX_TORSOR_BOUND {
        return Err(TorsorError::BoundOutOfRange(b));
    }
    Ok(())
}

/// floor(n^(1/k))
pub fn iroot(n: u128, k: u32) -> u64 {
    if n == 0 {
        return 0;
    }
    let mut r = (n as f64).powf(1.0 / k as f64) as u128;
    let pow = |r: u128| (0..k).try_fold(1u128, |a, _| a.checked_mul(r));
    while pow(r).is_none_or(|v| v > n) {
        r -= 1;
    }
    while pow(r + 1).is_some_and(|v| v <= n) {
        r += 1;
    }
    r as u64
}

/// Smallest value ≥ `lo` congruent to `r` modulo `m`.
fn first_in_class(lo: i64, r: u64, m: u64) -> i64 {
    let m = m as i64;
    let off = (r as i64 - lo).rem_euclid(m);
    lo + off
}

fn coprime_to(plan: &[usize], eta: &[i64], v: i64) -> bool {
    let a = v.unsigned_abs();
    plan.iter().all(|&j| gcd(a, eta[j].unsigned_abs()) == 1)
}

fn signed_range(m: u64) -> impl Iterator<Item = i64> {
    let m = m as i64;
    (-m..=m).filter(|&v| v != 0)
}

/// Enumeration state shared by the per-surface loop nests.
struct Walker<'a, F: FnMut(&[i64], &[i64])> {
    plan: Vec<Vec<usize>>,
    b: i128,
    shard: usize,
    nshards: usize,
    counter: usize,
    visit: &'a mut F,
}

impl<F: FnMut(&[i64], &[i64])> Walker<'_, F> {
    fn take_tuple(&mut self) -> bool {
        let mine = self.counter % self.nshards == self.shard;
        self.counter += 1;
        mine
    }
}

fn walk_s1<F: FnMut(&[i64], &[i64])>(w: &mut Walker<'_, F>) {
    let b = w.b;
    let mut e = [0i64; 8];
    let plan = std::mem::take(&mut w.plan);
    for e1 in 1..=iroot(b as u128, 3) as i64 {
        let p1 = (e1 as i128).pow(3);
        e[0] = e1;
        for e2 in 1i64.. {
            let p2 = p1 * (e2 as i128).pow(2);
            if p2 > b {
                break;
            }
            e[1] = e2;
            for e3 in 1i64.. {
                let p3 = p2 * (e3 as i128).pow(2);
                if p3 > b {
                    break;
                }
                if !coprime_to(&plan[2], &e, e3) {
                    continue;
                }
                e[2] = e3;
                for e4 in 1i64.. {
                    let p4 = p3 * (e4 as i128).pow(2);
                    if p4 > b {
                        break;
                    }
                    if !coprime_to(&plan[3], &e, e4) {
                        continue;
                    }
                    e[3] = e4;
                    let l12 = e1 as i128 * (e2 as i128).pow(2);
                    let e5max = ((b / p4) as u64).min(iroot((2 * b / l12) as u128, 3));
                    for e5 in 1..=e5max as i64 {
                        if !coprime_to(&plan[4], &e, e5) {
                            continue;
                        }
                        e[4] = e5;
                        if !w.take_tuple() {
                            continue;
                        }
                        let x0 = p4 * e5 as i128;
                        let m6 = iroot((2 * b / (l12 * (e5 as i128).pow(3))) as u128, 2);
                        let (i1, i2, i3, i4, i5) = (e1 as i128, e2 as i128, e3 as i128, e4 as i128, e5 as i128);
                        let m7a = b / (i1 * i1 * i2 * i3 * i3 * i4);
                        let m8 = b / (i1 * i1 * i2 * i3 * i4 * i4);
                        let inv3 = mod_inverse(e3, e4 as u64).expect("coprime by construction");
                        for e6 in signed_range(m6) {
                            if !coprime_to(&plan[5], &e, e6) {
                                continue;
                            }
                            e[5] = e6;
                            let i6 = e6 as i128;
                            let a = i2 * i5 * i5 * i6;
                            let m7 = m7a.min(b / (i1 * i2 * i3 * i5 * i6.abs()));
                            // e3·e7 must lie in [-a - e4·m8, -a + e4·m8]
                            let lo = (-m7).max((-a - i4 * m8).div_euclid(i3) + 1 - ((-a - i4 * m8).rem_euclid(i3) == 0) as i128);
                            let hi = m7.min((-a + i4 * m8).div_euclid(i3));
                            if lo > hi {
                                continue;
                            }
                            let r = (-a).rem_euclid(i4) as u64 * inv3 % e4 as u64;
                            let mut e7 = first_in_class(lo as i64, r, e4 as u64);
                            while (e7 as i128) <= hi {
                                let i7 = e7 as i128;
                                if coprime_to(&plan[6], &e, e7) {
                                    let num = a + i3 * i7;
                                    debug_assert_eq!(num % i4, 0);
                                    let i8 = -num / i4;
                                    let e8 = i8 as i64;
                                    if coprime_to(&plan[7], &e, e8) {
                                        let x2 = i6 * i7 * i8;
                                        let x5 = i1 * i2 * i4 * i5 * i6 * i8;
                                        if x2.abs() <= b && x5.abs() <= b {
                                            e[6] = e7;
                                            e[7] = e8;
                                            let x1 = i1 * i1 * i2 * i3 * i3 * i4 * i7;
                                            let x3 = i1 * i2 * i3 * i5 * i6 * i7;
                                            let x4 = i1 * i1 * i2 * i3 * i4 * i4 * i8;
                                            let x = [x0 as i64, x1 as i64, x2 as i64, x3 as i64, x4 as i64, x5 as i64];
                                            (w.visit)(&e, &x);
                                        }
                                    }
                                }
                                e7 += e4;
                            }
                        }
                    }
                }
            }
        }
    }
    w.plan = plan;
}

fn walk_s2<F: FnMut(&[i64], &[i64])>(w: &mut Walker<'_, F>) {
    // loop order: η1, η2, η3, η4, η6, η5, η7, η8, then η9 solved
    let b = w.b;
    let mut e = [0i64; 9];
    let plan = std::mem::take(&mut w.plan);
    for e1 in 1..=iroot(b as u128, 2) as i64 {
        let i1 = e1 as i128;
        let p1 = i1 * i1;
        e[0] = e1;
        for e2 in 1i64.. {
            let i2 = e2 as i128;
            let p2 = p1 * i2 * i2;
            if p2 > b {
                break;
            }
            if !coprime_to(&plan[1], &e, e2) {
                continue;
            }
            e[1] = e2;
            for e3 in 1i64.. {
                let i3 = e3 as i128;
                let p3 = p2 * i3 * i3 * i3;
                if p3 > b {
                    break;
                }
                if !coprime_to(&plan[2], &e, e3) {
                    continue;
                }
                e[2] = e3;
                for e4 in 1i64.. {
                    let i4 = e4 as i128;
                    let p4 = p3 * i4 * i4;
                    if p4 > b {
                        break;
                    }
                    if !coprime_to(&plan[3], &e, e4) {
                        continue;
                    }
                    e[3] = e4;
                    let inv2 = mod_inverse(e2, e1 as u64).expect("coprime by construction");
                    for e6 in 1..=(b / p4) as i64 {
                        if !coprime_to(&plan[5], &e, e6) {
                            continue;
                        }
                        e[5] = e6;
                        if !w.take_tuple() {
                            continue;
                        }
                        let i6 = e6 as i128;
                        let x1 = p4 * i6;
                        let d3 = i3 * i4 * i4 * i6 * i6 * i6;
                        let d2 = i1 * i2 * i3 * i3 * i4 * i4 * i6 * i6;
                        if d3 > b || d2 > b {
                            continue;
                        }
                        let e5max = iroot((b / d3) as u128, 4).min(iroot((b / d2) as u128, 2));
                        for e5 in 1..=e5max as i64 {
                            if !coprime_to(&plan[4], &e, e5) {
                                continue;
                            }
                            e[4] = e5;
                            let i5 = e5 as i128;
                            let c3 = d3 * i5.pow(4);
                            let c2 = d2 * i5 * i5;
                            let m7 = (iroot((b / c3) as u128, 2) as i128).min(b / c2);
                            for e7 in signed_range(m7 as u64) {
                                if !coprime_to(&plan[6], &e, e7) {
                                    continue;
                                }
                                e[6] = e7;
                                let i7 = e7 as i128;
                                let k = i4 * i5.pow(3) * i6 * i6 * i7;
                                let m8 = b / (i2 * i3 * i4 * i5 * i6 * i7.abs());
                                // |e8 (e2 e8 + k)| ≤ b e1 / |e7|
                                let c = (b * i1 / i7.abs()) as f64;
                                let (kf, e2f) = (k as f64, e2 as f64);
                                let disc = (kf * kf + 4.0 * e2f * c).sqrt();
                                let lo = (-m8).max(((-kf - disc) / (2.0 * e2f)).floor() as i128 - 1);
                                let hi = m8.min(((-kf + disc) / (2.0 * e2f)).ceil() as i128 + 1);
                                if lo > hi {
                                    continue;
                                }
                                let r = (-k).rem_euclid(i1) as u64 * inv2 % e1 as u64;
                                let mut e8 = first_in_class(lo as i64, r, e1 as u64);
                                while (e8 as i128) <= hi {
                                    let i8 = e8 as i128;
                                    let num = i2 * i8 + k;
                                    debug_assert_eq!(num % i1, 0);
                                    let i9 = -num / i1;
                                    let x4 = i7 * i8 * i9;
                                    if x4.abs() <= b && coprime_to(&plan[7], &e, e8) {
                                        e[7] = e8;
                                        if coprime_to(&plan[8], &e, i9 as i64) {
                                            e[8] = i9 as i64;
                                            let x0 = i2 * i3 * i4 * i5 * i6 * i7 * i8;
                                            let x2 = c2 * i7;
                                            let x3 = c3 * i7 * i7;
                                            let x = [x0 as i64, x1 as i64, x2 as i64, x3 as i64, x4 as i64];
                                            (w.visit)(&e, &x);
                                        }
                                    }
                                    e8 += e1;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    w.plan = plan;
}

fn sqrt_tables(max_m: u64) -> Vec<Vec<Vec<u32>>> {
    let mut out = vec![Vec::new()];
    for m in 1..=max_m {
        let mut t = vec![Vec::new(); m as usize];
        for r in 0..m {
            t[(r * r % m) as usize].push(r as u32);
        }
        out.push(t);
    }
    out
}

fn walk_s3<F: FnMut(&[i64], &[i64])>(w: &mut Walker<'_, F>) {
    let b = w.b;
    let mut e = [0i64; 9];
    let plan = std::mem::take(&mut w.plan);
    let roots = sqrt_tables(iroot(b as u128, 3));
    for e1 in 1..=iroot(b as u128, 2) as i64 {
        let i1 = e1 as i128;
        let p1 = i1 * i1;
        e[0] = e1;
        for e2 in 1i64.. {
            let i2 = e2 as i128;
            let p2 = p1 * i2.pow(4);
            if p2 > b {
                break;
            }
            if !coprime_to(&plan[1], &e, e2) {
                continue;
            }
            e[1] = e2;
            for e3 in 1i64.. {
                let i3 = e3 as i128;
                let p3 = p2 * i3.pow(3);
                if p3 > b {
                    break;
                }
                if !coprime_to(&plan[2], &e, e3) {
                    continue;
                }
                e[2] = e3;
                for e4 in 1i64.. {
                    let i4 = e4 as i128;
                    let p4 = p3 * i4 * i4;
                    if p4 > b {
                        break;
                    }
                    if !coprime_to(&plan[3], &e, e4) {
                        continue;
                    }
                    e[3] = e4;
                    for e5 in 1i64.. {
                        let i5 = e5 as i128;
                        let p5 = p4 * i5.pow(3);
                        if p5 > b {
                            break;
                        }
                        if !coprime_to(&plan[4], &e, e5) {
                            continue;
                        }
                        e[4] = e5;
                        let inv1 = mod_inverse(e1, e5 as u64).expect("coprime by construction");
                        let table = &roots[e5 as usize];
                        for e6 in 1..=(b / p5) as i64 {
                            if !coprime_to(&plan[5], &e, e6) {
                                continue;
                            }
                            e[5] = e6;
                            if !w.take_tuple() {
                                continue;
                            }
                            let i6 = e6 as i128;
                            let x0 = p5 * i6;
                            let d3 = i1 * i2 * i2 * i3 * i3 * i4 * i4 * i5 * i6 * i6;
                            let m7 = b / d3;
                            let d2 = i1 * i1 * i2.pow(3) * i3 * i3 * i4 * i5 * i5;
                            let m8a = b / d2;
                            let d1 = i1 * i2 * i3 * i4 * i6;
                            for e7 in signed_range(m7 as u64) {
                                if !coprime_to(&plan[6], &e, e7) {
                                    continue;
                                }
                                e[6] = e7;
                                let i7 = e7 as i128;
                                let k = i3 * i4 * i4 * i6.pow(3) * i7;
                                // |e1 e8² + k| ≤ b e5 / |e7|
                                let c = b * i5 / i7.abs();
                                if c < k {
                                    continue;
                                }
                                let m8 = m8a.min(b / (d1 * i7.abs())).min(iroot(((c - k) / i1) as u128, 2) as i128);
                                let target = ((-k).rem_euclid(i5) as u64 * inv1 % e5 as u64) as usize;
                                for &r in &table[target] {
                                    let mut e8 = first_in_class(-m8 as i64, r as u64, e5 as u64);
                                    while (e8 as i128) <= m8 {
                                        let i8 = e8 as i128;
                                        let num = i1 * i8 * i8 + k;
                                        debug_assert_eq!(num % i5, 0);
                                        let i9 = -num / i5;
                                        let x4 = i7 * i9;
                                        if x4.abs() <= b && coprime_to(&plan[7], &e, e8) {
                                            e[7] = e8;
                                            if coprime_to(&plan[8], &e, i9 as i64) {
                                                e[8] = i9 as i64;
                                                let x1 = d1 * i7 * i8;
                                                let x2 = d2 * i8;
                                                let x3 = d3 * i7;
                                                let x = [x0 as i64, x1 as i64, x2 as i64, x3 as i64, x4 as i64];
                                                (w.visit)(&e, &x);
                                            }
                                        }
                                        e8 += e5;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    w.plan = plan;
}

fn loop_order(id: SurfaceId) -> Vec<usize> {
    match id {
        SurfaceId::S1 => (0..8).collect(),
        SurfaceId::S2 => vec![0, 1, 2, 3, 5, 4, 6, 7, 8],
        SurfaceId::S3 => (0..9).collect(),
    }
}

/// Visits every counted torsor point of height at most `b` in one shard, passing
/// the torsor tuple and its image coordinates.
pub fn for_each_in_shard<F: FnMut(&[i64], &[i64])>(
    spec: &TorsorSpec,
    b: u64,
    shard: usize,
    nshards: usize,
    mut visit: F,
) -> Result<(), TorsorError> {
    check_bound(b)?;
    if nshards == 0 {
        return Err(TorsorError::ZeroShards);
    }
    let order = loop_order(spec.surface);
    // plans are indexed by variable, not loop position
    let by_pos = spec.coprime_plan(&order);
    let mut plan = vec![Vec::new(); spec.nvars];
    for (pos, &v) in order.iter().enumerate() {
        plan[v] = by_pos[pos].clone();
    }
    let mut w = Walker { plan, b: b as i128, shard, nshards, counter: 0, visit: &mut visit };
    match spec.surface {
        SurfaceId::S1 => walk_s1(&mut w),
        SurfaceId::S2 => walk_s2(&mut w),
        SurfaceId::S3 => walk_s3(&mut w),
    }
    Ok(())
}

fn height(x: &[i64]) -> u64 {
    x.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0)
}

/// Counts of torsor points with height at most each entry of `bounds` (one pass at the largest).
pub fn torsor_histogram(id: SurfaceId, bounds: &[u64], shards: usize) -> Result<Vec<u64>, TorsorError> {
    if shards == 0 {
        return Err(TorsorError::ZeroShards);
    }
    let mut sorted = bounds.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let Some(&bmax) = sorted.last() else {
        return Ok(Vec::new());
    };
    check_bound(bmax)?;
    let spec = TorsorSpec::new(id);
    let per_shard: Vec<Result<Vec<u64>, TorsorError>> = (0..shards)
        .into_par_iter()
        .map(|s| {
            let mut buckets = vec![0u64; sorted.len()];
            for_each_in_shard(&spec, bmax, s, shards, |_, x| {
                let h = height(x);
                buckets[sorted.partition_point(|&bb| bb < h)] += 1;
            })?;
            Ok(buckets)
        })
        .collect();
    let mut total = vec![0u64; sorted.len()];
    for r in per_shard {
        for (t, v) in total.iter_mut().zip(r?) {
            *t += v;
        }
    }
    let mut acc = 0;
    for t in total.iter_mut() {
        acc += *t;
        *t = acc;
    }
    Ok(bounds.iter().map(|bb| total[sorted.binary_search(bb).expect("present")]).collect())
}

pub fn count_torsor(id: SurfaceId, b: u64, shards: usize) -> Result<CountRecord, TorsorError> {
    let start = Instant::now();
    let count = torsor_histogram(id, &[b], shards)?[0];
    Ok(CountRecord::new(id, Method::Torsor, b, count, start.elapsed().as_secs_f64()))
}

/// A torsor point η together with its raw image Ψ(η).
pub type TorsorPoint = (Vec<i64>, Vec<i64>);

/// Every counted torsor tuple with its image, sorted by the image point.
pub fn torsor_points(id: SurfaceId, b: u64, shards: usize) -> Result<Vec<TorsorPoint>, TorsorError> {
    if shards == 0 {
        return Err(TorsorError::ZeroShards);
    }
    let spec = TorsorSpec::new(id);
    let parts: Vec<Result<Vec<TorsorPoint>, TorsorError>> = (0..shards)
        .into_par_iter()
        .map(|s| {
            let mut v = Vec::new();
            for_each_in_shard(&spec, b, s, shards, |eta, x| v.push((eta.to_vec(), x.to_vec())))?;
            Ok(v)
        })
        .collect();
    let mut all = Vec::new();
    for p in parts {
        all.extend(p?);
    }
    all.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    Ok(all)
}

/// Outcome of comparing the torsor image with a direct search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BijectionReport {
    pub surface: SurfaceId,
    pub bound: u64,
    pub oracle: Method,
    pub torsor_count: u64,
    pub oracle_count: u64,
    /// Points found by the oracle but not reached from the torsor (first few only).
    pub missing: Vec<ProjectivePoint>,
    /// Torsor images the oracle does not count (first few only).
    pub extra: Vec<ProjectivePoint>,
    /// Points hit by more than one torsor tuple (first few only).
    pub duplicates: Vec<ProjectivePoint>,
    /// Torsor images whose raw coordinates share a common factor.
    pub non_primitive: u64,
}

impl BijectionReport {
    pub fn ok(&self) -> bool {
        self.torsor_count == self.oracle_count
            && self.missing.is_empty()
            && self.extra.is_empty()
            && self.duplicates.is_empty()
            && self.non_primitive == 0
    }
}

#[derive(Debug, Error)]
pub enum BijectionError {
    #[error(transparent)]
    Torsor(#[from] TorsorError),
    #[error(transparent)]
    Oracle(#[from] crate::oracle::OracleError),
}

const REPORT_LIMIT: usize = 20;

pub fn verify_bijection(id: SurfaceId, b: u64, oracle: Method, shards: usize) -> Result<BijectionReport, BijectionError> {
    let surface = crate::surface::SurfaceSpec::new(id);
    let reference = match oracle {
        Method::Exhaustive => crate::oracle::exhaustive_points(&surface, b)?,
        _ => crate::oracle::projection_points(&surface, b, shards)?,
    };
    let tuples = torsor_points(id, b, shards)?;
    let mut non_primitive = 0;
    let mut images: Vec<ProjectivePoint> = tuples
        .iter()
        .map(|(_, x)| {
            if x.iter().fold(0, |g, v| gcd(g, v.unsigned_abs())) != 1 {
                non_primitive += 1;
            }
            ProjectivePoint::normalize(x).expect("torsor image is nonzero")
        })
        .collect();
    images.sort();
    let mut duplicates: Vec<ProjectivePoint> = images.windows(2).filter(|w| w[0] == w[1]).map(|w| w[0].clone()).collect();
    duplicates.dedup();
    let mut unique = images.clone();
    unique.dedup();
    let oracle_set: std::collections::BTreeSet<&ProjectivePoint> = reference.iter().collect();
    let torsor_set: std::collections::BTreeSet<&ProjectivePoint> = unique.iter().collect();
    let missing = oracle_set.difference(&torsor_set).take(REPORT_LIMIT).map(|p| (*p).clone()).collect();
    let extra = torsor_set.difference(&oracle_set).take(REPORT_LIMIT).map(|p| (*p).clone()).collect();
    duplicates.truncate(REPORT_LIMIT);
    Ok(BijectionReport {
        surface: id,
        bound: b,
        oracle,
        torsor_count: images.len() as u64,
        oracle_count: reference.len() as u64,
        missing,
        extra,
        duplicates,
        non_primitive,
    })
}

/// Reference enumeration straight from the membership predicate, for small `b` only.
pub fn brute_force_torsor(id: SurfaceId, b: u64) -> Vec<Vec<i64>> {
    let spec = TorsorSpec::new(id);
    let free: Vec<usize> = (0..spec.nvars).filter(|&i| i != spec.dependent).collect();
    let ranges: Vec<Vec<i64>> = free
        .iter()
        .map(|&i| {
            let m = b as i64;
            (-m..=m).filter(|&v| spec.domains[i].contains(v)).collect()
        })
        .collect();
    let mut out = Vec::new();
    let mut idx = vec![0usize; free.len()];
    'outer: loop {
        let partial: Vec<i64> = idx.iter().zip(&ranges).map(|(&k, r)| r[k]).collect();
        if let Ok(Some(d)) = spec.solve_dependent(&partial) {
            let mut eta = partial.clone();
            eta.insert(spec.dependent, d);
            if spec.is_member(&eta, b).unwrap_or(false) {
                out.push(eta);
            }
        }
        for k in (0..idx.len()).rev() {
            idx[k] += 1;
            if idx[k] < ranges[k].len() {
                continue 'outer;
            }
            idx[k] = 0;
        }
        break;
    }
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::SurfaceSpec;

    #[test]
    fn iroot_exact() {
        assert_eq!(iroot(26, 3), 2);
        assert_eq!(iroot(27, 3), 3);
        assert_eq!(iroot(1_000_000, 2), 1000);
        assert_eq!(iroot(999_999, 2), 999);
        assert_eq!(iroot(0, 4), 0);
    }

    #[test]
    fn psi_lands_on_surface_for_torsor_solutions() {
        for id in SurfaceId::ALL {
            let spec = TorsorSpec::new(id);
            let surf = SurfaceSpec::new(id);
            let pts = torsor_points(id, 60, 1).unwrap();
            assert!(!pts.is_empty());
            for (eta, x) in pts {
                assert_eq!(spec.residual(&eta).unwrap(), 0);
                assert!(surf.on_surface(&x), "{id} {eta:?} {x:?}");
                let raw: Vec<i64> = spec.psi_raw(&eta).unwrap().iter().map(|&v| v as i64).collect();
                assert_eq!(raw, x);
            }
        }
    }

    #[test]
    fn fast_walk_matches_membership_brute_force() {
        for id in SurfaceId::ALL {
            let b = 5;
            let fast: Vec<Vec<i64>> = {
                let mut v: Vec<Vec<i64>> = torsor_points(id, b, 1).unwrap().into_iter().map(|p| p.0).collect();
                v.sort();
                v
            };
            assert_eq!(fast, brute_force_torsor(id, b), "{id}");
        }
    }

    #[test]
    fn solve_dependent_examples() {
        let s = TorsorSpec::new(SurfaceId::S1);
        // η2η5²η6 + η3η7 + η4η8 = 0 with everything 1 except η8
        assert_eq!(s.solve_dependent(&[1, 1, 1, 1, 1, 1, 1]).unwrap(), Some(-2));
        assert_eq!(s.solve_dependent(&[1, 1, 1, 2, 1, 1, 0]).unwrap(), None);
        assert!(s.solve_dependent(&[1, 1]).is_err());
    }

    #[test]
    fn bound_is_audited() {
        assert!(torsor_histogram(SurfaceId::S1, &[0], 1).is_err());
        assert!(torsor_histogram(SurfaceId::S1, &[MAX_TORSOR_BOUND + 1], 1).is_err());
    }
}
