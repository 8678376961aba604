//! Elementary arithmetic functions, congruence counting, multiplicative functions
//! with prescribed local factors, and the local densities of the three surfaces.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::surface::SurfaceId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArithError {
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("infinite product does not converge: {0}")]
    NonConvergent(String),
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    if a == 0 {
        return b;
    }
    if b == 0 {
        return a;
    }
    let shift = (a | b).trailing_zeros();
    a >>= a.trailing_zeros();
    loop {
        b >>= b.trailing_zeros();
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        b -= a;
        if b == 0 {
            return a << shift;
        }
    }
}

pub fn gcd_i(a: i64, b: i64) -> u64 {
    gcd(a.unsigned_abs(), b.unsigned_abs())
}

/// Inverse of `a` modulo `m` (m ≥ 1), if it exists. Returns a value in `[0, m)`.
pub fn mod_inverse(a: i64, m: u64) -> Option<u64> {
    if m == 1 {
        return Some(0);
    }
    let m_i = m as i128;
    let (mut r0, mut r1) = (m_i, (a as i128).rem_euclid(m_i));
    let (mut s0, mut s1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
    }
    (r0 == 1).then(|| s0.rem_euclid(m_i) as u64)
}

pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut push = |p: u64, n: &mut u64| {
        let mut e = 0;
        while (*n).is_multiple_of(p) {
            *n /= p;
            e += 1;
        }
        if e > 0 {
            out.push((p, e));
        }
    };
    push(2, &mut n);
    push(3, &mut n);
    let mut p = 5;
    while p * p <= n {
        push(p, &mut n);
        push(p + 2, &mut n);
        p += 6;
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

fn positive(n: u64, what: &str) -> Result<(), ArithError> {
    if n == 0 {
        Err(ArithError::Domain(format!("{what} requires n >= 1")))
    } else {
        Ok(())
    }
}

pub fn mobius(n: u64) -> Result<i8, ArithError> {
    positive(n, "mobius")?;
    let f = factorize(n);
    if f.iter().any(|&(_, e)| e > 1) {
        return Ok(0);
    }
    Ok(if f.len().is_multiple_of(2) { 1 } else { -1 })
}

pub fn euler_phi(n: u64) -> Result<u64, ArithError> {
    positive(n, "euler_phi")?;
    Ok(factorize(n).iter().fold(n, |acc, &(p, _)| acc / p * (p - 1)))
}

/// φ*(n) = φ(n)/n as an exact rational.
pub fn phi_star(n: u64) -> Result<BigRational, ArithError> {
    positive(n, "phi_star")?;
    Ok(factorize(n).iter().fold(BigRational::one(), |acc, &(p, _)| {
        acc * BigRational::new(BigInt::from(p - 1), BigInt::from(p))
    }))
}

pub fn divisor_count(n: u64) -> Result<u64, ArithError> {
    positive(n, "divisor_count")?;
    Ok(factorize(n).iter().map(|&(_, e)| e as u64 + 1).product())
}

/// Number of distinct prime factors.
pub fn omega(n: u64) -> Result<u32, ArithError> {
    positive(n, "omega")?;
    Ok(factorize(n).len() as u32)
}

pub fn squarefree_divisors(n: u64) -> Vec<u64> {
    let mut divs = vec![1u64];
    for (p, _) in factorize(n) {
        let more: Vec<u64> = divs.iter().map(|d| d * p).collect();
        divs.extend(more);
    }
    divs.sort_unstable();
    divs
}

/// Primes up to and including `n`.
pub fn primes_up_to(n: u64) -> Vec<u64> {
    if n < 2 {
        return Vec::new();
    }
    let n = n as usize;
    let mut composite = vec![false; n + 1];
    let mut primes = Vec::new();
    for i in 2..=n {
        if !composite[i] {
            primes.push(i as u64);
            let mut j = i * i;
            while j <= n {
                composite[j] = true;
                j += i;
            }
        }
    }
    primes
}

/// Smallest prime factor for every integer up to `n` (0 and 1 map to 0 and 1).
pub fn smallest_prime_factors(n: usize) -> Vec<u32> {
    let mut spf: Vec<u32> = (0..=n as u32).collect();
    let mut i = 2;
    while i * i <= n {
        if spf[i] == i as u32 {
            let mut j = i * i;
            while j <= n {
                if spf[j] == j as u32 {
                    spf[j] = i as u32;
                }
                j += i;
            }
        }
        i += 1;
    }
    spf
}

/// Congruence ϱ ∈ [1, q], gcd(ϱ, q) = 1, with `a_den·ϱ^m ≡ a_num·n (mod q)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CongruenceSpec {
    q: u64,
    a_num: i64,
    a_den: i64,
    m: u32,
}

impl CongruenceSpec {
    pub fn new(q: u64, a_num: i64, a_den: i64, m: u32) -> Result<Self, ArithError> {
        if q == 0 {
            return Err(ArithError::Domain("modulus must be positive".into()));
        }
        if m == 0 {
            return Err(ArithError::Domain("exponent must be positive".into()));
        }
        if gcd(a_den.unsigned_abs(), q) != 1 {
            return Err(ArithError::Domain(format!("denominator {a_den} not invertible mod {q}")));
        }
        if gcd(a_num.unsigned_abs(), q) != 1 {
            return Err(ArithError::Domain(format!("numerator {a_num} not coprime to {q}")));
        }
        Ok(CongruenceSpec { q, a_num, a_den, m })
    }

    pub fn modulus(&self) -> u64 {
        self.q
    }

    pub fn exponent(&self) -> u32 {
        self.m
    }

    /// Target c ≡ a_num·n·a_den⁻¹ reduced modulo `modulus`, which divides q.
    fn target(&self, n: i64, modulus: u64) -> u64 {
        let m = modulus as i128;
        let inv = mod_inverse(self.a_den, modulus).expect("denominator is a unit") as i128;
        ((self.a_num as i128).rem_euclid(m) * (n as i128).rem_euclid(m) % m * inv % m) as u64
    }
}

fn pow_mod(b: u64, mut e: u64, m: u64) -> u64 {
    let m = m as u128;
    let mut acc = 1u128 % m;
    let mut base = b as u128 % m;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * base % m;
        }
        base = base * base % m;
        e >>= 1;
    }
    acc as u64
}

/// Units ϱ modulo p^e with ϱ^m ≡ c.
fn prime_power_roots(p: u64, e: u32, m: u32, c: u64) -> u64 {
    let pe = p.pow(e);
    if c.is_multiple_of(p) {
        return 0;
    }
    if p == 2 {
        return (1..pe).step_by(2).filter(|&r| pow_mod(r, m as u64, pe) == c % pe).count() as u64;
    }
    // the unit group is cyclic of order φ(p^e)
    let phi = pe / p * (p - 1);
    let d = gcd(m as u64, phi);
    if pow_mod(c, phi / d, pe) == 1 {
        d
    } else {
        0
    }
}

/// #{ϱ ∈ [1, q] : gcd(ϱ, q) = 1, a_den·ϱ^m ≡ a_num·n (mod q)}, by the Chinese remainder theorem.
pub fn count_congruence_solutions(spec: &CongruenceSpec, n: i64) -> u64 {
    factorize(spec.q)
        .into_iter()
        .map(|(p, e)| prime_power_roots(p, e, spec.m, spec.target(n, p.pow(e))))
        .product()
}

/// Boxed local factor `(p, ν) ↦ A_p(ν)`.
pub type LocalFactor = Box<dyn Fn(u64, u32) -> f64 + Send + Sync>;

/// Multiplicative function ϑ(n) = c·∏_p A_p(ν_p(n)).
///
/// `A_p(0)` must equal 1 for every prime outside `exceptional_primes`.
pub struct MultFn {
    pub c: f64,
    pub local: LocalFactor,
    pub exceptional_primes: Vec<u64>,
    /// Bounds `(b, C1, C2, C3)` on the local factors.
    pub b: u64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// Whether `A_p(ν) = A_p(1)` for every ν ≥ 1.
    pub constant_beyond_one: bool,
}

impl MultFn {
    pub fn new(c: f64, local: LocalFactor) -> Self {
        MultFn {
            c,
            local,
            exceptional_primes: Vec::new(),
            b: 1,
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            constant_beyond_one: true,
        }
    }

    pub fn eval(&self, n: u64) -> f64 {
        let f = factorize(n);
        let mut v = self.c;
        for &p in &self.exceptional_primes {
            if !n.is_multiple_of(p) {
                v *= (self.local)(p, 0);
            }
        }
        for (p, e) in f {
            v *= (self.local)(p, e);
        }
        v
    }

    /// Same as [`eval`](Self::eval), using a precomputed smallest-prime-factor table.
    pub fn eval_with_spf(&self, n: u64, spf: &[u32]) -> f64 {
        let mut v = self.c;
        for &p in &self.exceptional_primes {
            if !n.is_multiple_of(p) {
                v *= (self.local)(p, 0);
            }
        }
        let mut m = n as usize;
        while m > 1 {
            let p = spf[m] as usize;
            let mut e = 0;
            while m.is_multiple_of(p) {
                m /= p;
                e += 1;
            }
            v *= (self.local)(p as u64, e);
        }
        v
    }

    fn euler_factor(&self, p: u64, q: u64) -> f64 {
        if q.is_multiple_of(p) {
            return (self.local)(p, 0);
        }
        let x = 1.0 / p as f64;
        if self.constant_beyond_one {
            return (1.0 - x) * (self.local)(p, 0) + (self.local)(p, 1) * x;
        }
        // (1 - 1/p) Σ_ν A_p(ν)/p^ν, truncated once terms fall below double precision
        let mut s = 0.0;
        let mut pw = 1.0;
        let mut nu = 0;
        while pw > 1e-18 {
            s += (self.local)(p, nu) * pw;
            pw *= x;
            nu += 1;
        }
        (1.0 - x) * s
    }

    fn check_bounds(&self, primes: &[u64]) -> Result<(), ArithError> {
        for &p in primes {
            for nu in 1..=3u32 {
                let diff = ((self.local)(p, nu) - (self.local)(p, nu - 1)).abs();
                let pnu = (p as f64).powi(nu as i32);
                let bound = if self.b.is_multiple_of(p.pow(nu)) { self.c1 } else { self.c2 / pnu };
                if diff > bound * (1.0 + 1e-12) + 1e-15 {
                    return Err(ArithError::NonConvergent(format!(
                        "|A_p({nu}) - A_p({})| = {diff} exceeds {bound} at p = {p}",
                        nu - 1
                    )));
                }
            }
            if (self.local)(p, 0).abs() > 1.0 + 1e-12 && !self.b.is_multiple_of(p) {
                return Err(ArithError::NonConvergent(format!("|A_p(0)| > 1 at p = {p}")));
            }
        }
        Ok(())
    }
}

/// Value of the Euler product 𝒜(ϑ, q) and a bound on the contribution of primes
/// beyond `truncation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerValue {
    pub value: f64,
    pub tail_bound: f64,
}

pub fn script_a(f: &MultFn, q: u64, truncation: u64) -> Result<EulerValue, ArithError> {
    if q == 0 {
        return Err(ArithError::Domain("q must be positive".into()));
    }
    if let Some(&p) = f.exceptional_primes.iter().find(|&&p| p > truncation) {
        return Err(ArithError::Domain(format!("exceptional prime {p} beyond truncation")));
    }
    let primes = primes_up_to(truncation);
    f.check_bounds(&primes)?;
    let mut log = 0.0f64;
    let mut sign = 1.0f64;
    for &p in &primes {
        let e = f.euler_factor(p, q);
        if e == 0.0 {
            return Ok(EulerValue { value: 0.0, tail_bound: 0.0 });
        }
        if e < 0.0 {
            sign = -sign;
        }
        log += e.abs().ln();
    }
    let value = f.c * sign * log.exp();
    // every factor beyond P is 1 + O(C2/p²); Σ_{p>P} p^{-2} < 1/P
    let t = 2.0 * f.c2 / truncation.max(1) as f64;
    Ok(EulerValue { value, tail_bound: value.abs() * t.exp_m1() })
}

/// Running main-term residual for a congruence-weighted sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualPoint {
    pub t: f64,
    pub sum: f64,
    pub main: f64,
    pub residual: f64,
}

/// M(t) = Σ_{n≤t} ϑ(n)·#{ϱ}, compared with the main term 𝒜(ϑ, q)·φ*(q)·t.
pub fn lemma_pr1_residual(
    f: &MultFn,
    spec: &CongruenceSpec,
    t_grid: &[f64],
    truncation: u64,
) -> Result<Vec<ResidualPoint>, ArithError> {
    if t_grid.iter().any(|t| !(t.is_finite() && *t >= 1.0)) {
        return Err(ArithError::Domain("grid points must be finite and at least 1".into()));
    }
    let q = spec.modulus();
    let a = script_a(f, q, truncation)?.value;
    let counts: Vec<u64> = (0..q).map(|r| count_congruence_solutions(spec, r as i64)).collect();
    let phi_star_q = euler_phi(q)? as f64 / q as f64;
    let tmax = t_grid.iter().cloned().fold(1.0, f64::max).floor() as usize;
    let spf = smallest_prime_factors(tmax);
    let mut order: Vec<usize> = (0..t_grid.len()).collect();
    order.sort_by(|&i, &j| t_grid[i].total_cmp(&t_grid[j]));
    let mut out = vec![ResidualPoint { t: 0.0, sum: 0.0, main: 0.0, residual: 0.0 }; t_grid.len()];
    let mut sum = 0.0f64;
    let mut n = 0usize;
    for &i in &order {
        let t = t_grid[i];
        while n < t.floor() as usize {
            n += 1;
            let c = counts[n % q as usize];
            if c > 0 {
                sum += f.eval_with_spf(n as u64, &spf) * c as f64;
            }
        }
        let main = a * phi_star_q * t;
        out[i] = ResidualPoint { t, sum, main, residual: sum - main };
    }
    Ok(out)
}

/// Slope of log max_{s≤t}|R(s)| against log log t, i.e. the exponent e in a growth
/// law |R(t)| ≍ (log t)^e. The running maximum covers the whole series; fit points are
/// taken from t ≥ `tmin` at ratio at least 1.1 apart so dense series are not overweighted.
pub fn log_growth_exponent(series: &[ResidualPoint], tmin: f64) -> Result<f64, ArithError> {
    let mut sorted: Vec<&ResidualPoint> = series.iter().collect();
    sorted.sort_by(|a, b| a.t.total_cmp(&b.t));
    let mut running = 0.0f64;
    let mut pts = Vec::new();
    let mut next = tmin.max(3.0);
    for r in sorted {
        running = running.max(r.residual.abs());
        if r.t >= next && running > 0.0 {
            pts.push((r.t.ln().ln(), running.ln()));
            next = r.t * 1.1;
        }
    }
    if pts.len() < 2 {
        return Err(ArithError::Domain("need two points with nonzero residual".into()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(sxy / sxx)
}

/// The three shapes of local factor appearing in the tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalValue {
    One,
    OneMinusOneOverP,
    OneMinusTwoOverP,
}

impl LocalValue {
    pub fn at(self, p: u64) -> BigRational {
        let x = BigRational::new(BigInt::one(), BigInt::from(p));
        match self {
            LocalValue::One => BigRational::one(),
            LocalValue::OneMinusOneOverP => BigRational::one() - x,
            LocalValue::OneMinusTwoOverP => BigRational::one() - x * BigInt::from(2),
        }
    }
}

/// Finite table of local factors indexed by the set of variables a prime divides;
/// sets not listed contribute zero.
#[derive(Debug, Clone)]
pub struct LocalTable {
    pub nvars: usize,
    entries: Vec<(u32, LocalValue)>,
}

impl LocalTable {
    fn from_sets(nvars: usize, rows: &[(&[usize], LocalValue)]) -> Self {
        let entries = rows
            .iter()
            .map(|(set, v)| (set.iter().fold(0u32, |m, &i| m | 1 << (i - 1)), *v))
            .collect();
        LocalTable { nvars, entries }
    }

    /// Table for the given surface (variables numbered from 1).
    pub fn for_surface(id: SurfaceId) -> Self {
        use LocalValue::*;
        match id {
            SurfaceId::S1 => LocalTable::from_sets(
                6,
                &[
                    (&[], One),
                    (&[3], One),
                    (&[4], One),
                    (&[6], One),
                    (&[2], OneMinusOneOverP),
                    (&[5], OneMinusOneOverP),
                    (&[1, 3], OneMinusOneOverP),
                    (&[1, 2], OneMinusOneOverP),
                    (&[2, 5], OneMinusOneOverP),
                    (&[5, 6], OneMinusOneOverP),
                    (&[1, 4], OneMinusOneOverP),
                    (&[1], OneMinusTwoOverP),
                ],
            ),
            SurfaceId::S2 => LocalTable::from_sets(
                7,
                &[
                    (&[], One),
                    (&[1], One),
                    (&[2], One),
                    (&[7], One),
                    (&[4], OneMinusOneOverP),
                    (&[5], OneMinusOneOverP),
                    (&[6], OneMinusOneOverP),
                    (&[1, 3], OneMinusOneOverP),
                    (&[2, 3], OneMinusOneOverP),
                    (&[3, 4], OneMinusOneOverP),
                    (&[4, 6], OneMinusOneOverP),
                    (&[5, 6], OneMinusOneOverP),
                    (&[5, 7], OneMinusOneOverP),
                    (&[3], OneMinusTwoOverP),
                ],
            ),
            SurfaceId::S3 => LocalTable::from_sets(
                7,
                &[
                    (&[], One),
                    (&[1], One),
                    (&[5], One),
                    (&[7], One),
                    (&[3], OneMinusOneOverP),
                    (&[4], OneMinusOneOverP),
                    (&[6], OneMinusOneOverP),
                    (&[2, 5], OneMinusOneOverP),
                    (&[1, 2], OneMinusOneOverP),
                    (&[2, 3], OneMinusOneOverP),
                    (&[3, 4], OneMinusOneOverP),
                    (&[4, 6], OneMinusOneOverP),
                    (&[6, 7], OneMinusOneOverP),
                    (&[2], OneMinusTwoOverP),
                ],
            ),
        }
    }

    pub fn lookup(&self, mask: u32) -> Option<LocalValue> {
        self.entries.iter().find(|(m, _)| *m == mask).map(|(_, v)| *v)
    }

    /// Product over primes p of the entry for {i : p | ηᵢ}.
    pub fn evaluate(&self, eta: &[i64]) -> BigRational {
        let mut primes: Vec<u64> = eta.iter().flat_map(|&e| factorize(e.unsigned_abs())).map(|(p, _)| p).collect();
        primes.sort_unstable();
        primes.dedup();
        let mut acc = BigRational::one();
        for p in primes {
            let mask = eta
                .iter()
                .enumerate()
                .filter(|(_, &e)| e.unsigned_abs() % p == 0)
                .fold(0u32, |m, (i, _)| m | 1 << i);
            match self.lookup(mask) {
                Some(v) => acc *= v.at(p),
                None => return BigRational::zero(),
            }
        }
        acc
    }

    /// Σ_I ϑ_p(I)·x^{|I|}(1-x)^{n-|I|} with x = 1/p.
    pub fn local_density(&self, p: u64) -> BigRational {
        let x = BigRational::new(BigInt::one(), BigInt::from(p));
        let y = BigRational::one() - &x;
        self.entries
            .iter()
            .map(|(mask, v)| {
                let k = mask.count_ones() as i32;
                v.at(p) * num_traits::pow(x.clone(), k as usize) * num_traits::pow(y.clone(), (self.nvars as i32 - k) as usize)
            })
            .fold(BigRational::zero(), |a, b| a + b)
    }
}

/// Closed form (1 - 1/p)^k (1 + k/p + 1/p²) of the local density, k = ρ - 1.
pub fn local_density_closed_form(id: SurfaceId, p: u64) -> BigRational {
    let k = match id {
        SurfaceId::S1 => 5,
        SurfaceId::S2 | SurfaceId::S3 => 6,
    };
    let x = BigRational::new(BigInt::one(), BigInt::from(p));
    let y = BigRational::one() - &x;
    num_traits::pow(y, k) * (BigRational::one() + &x * BigInt::from(k as i64) + &x * &x)
}

/// Edges of the coprimality graph on the first variables that enter ϑ₁.
fn theta_edges(id: SurfaceId) -> &'static [(usize, usize)] {
    match id {
        SurfaceId::S1 => &[(3, 1), (4, 1), (6, 5), (5, 2), (2, 1)],
        SurfaceId::S2 => &[(1, 3), (7, 5), (5, 6), (6, 4), (4, 3), (2, 3)],
        SurfaceId::S3 => &[(1, 2), (5, 2), (7, 6), (6, 4), (4, 3), (3, 2)],
    }
}

fn theta_arity(id: SurfaceId) -> usize {
    match id {
        SurfaceId::S1 => 6,
        SurfaceId::S2 | SurfaceId::S3 => 7,
    }
}

/// Checks sign conventions and pairwise coprimality of non-adjacent variables.
pub fn theta_admissible(id: SurfaceId, eta: &[i64]) -> Result<(), ArithError> {
    let n = theta_arity(id);
    if eta.len() != n {
        return Err(ArithError::Domain(format!("expected {n} variables, got {}", eta.len())));
    }
    // the last variable may be negative, the others must be positive
    let nonzero_last = match id {
        SurfaceId::S1 => 6,
        SurfaceId::S2 | SurfaceId::S3 => 7,
    };
    for (i, &e) in eta.iter().enumerate() {
        let ok = if i + 1 == nonzero_last { e != 0 } else { e > 0 };
        if !ok {
            return Err(ArithError::Domain(format!("variable {} = {e} outside its domain", i + 1)));
        }
    }
    let edges = theta_edges(id);
    for i in 1..=n {
        for j in i + 1..=n {
            let adjacent = edges.iter().any(|&(a, b)| (a, b) == (i, j) || (a, b) == (j, i));
            if !adjacent && gcd_i(eta[i - 1], eta[j - 1]) != 1 {
                return Err(ArithError::Domain(format!("variables {i} and {j} share a factor")));
            }
        }
    }
    Ok(())
}

pub fn theta1_table(id: SurfaceId, eta: &[i64]) -> Result<BigRational, ArithError> {
    theta_admissible(id, eta)?;
    Ok(LocalTable::for_surface(id).evaluate(eta))
}

fn big(n: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// φ* of the product of `factors`, without forming the product.
fn phi_star_of_product(factors: &[u64]) -> Result<BigRational, ArithError> {
    let mut primes: Vec<u64> = Vec::new();
    for &f in factors {
        positive(f, "phi_star")?;
        primes.extend(factorize(f).into_iter().map(|(p, _)| p));
    }
    primes.sort_unstable();
    primes.dedup();
    Ok(primes.into_iter().fold(BigRational::one(), |acc, p| acc * BigRational::new(BigInt::from(p - 1), BigInt::from(p))))
}

/// −∏ vᵢ^{eᵢ} reduced modulo q.
fn negated_monomial_mod(factors: &[(i64, u32)], q: u64) -> i64 {
    let m = q as i128;
    let prod = factors
        .iter()
        .fold(1i128 % m, |acc, &(v, e)| acc * pow_mod(v.rem_euclid(m as i64) as u64, e as u64, q) as i128 % m);
    (-prod).rem_euclid(m) as i64
}

/// Congruence data ϱ^m ≡ −∏ vᵢ^{eᵢ} / den for the direct formulas.
struct Congruence<'a> {
    numerator: &'a [(i64, u32)],
    den: i64,
    m: u32,
}

/// Shared shape of the direct formulas: Σ over squarefree k | `outer` coprime to every
/// entry of `avoid` of μ(k)·φ*(∏ `star`)/(k·φ*(gcd(`outer`, k·`modulus`))) times a
/// congruence count modulo k·`modulus`.
fn divisor_sum(
    outer: u64,
    avoid: &[u64],
    star: &[u64],
    modulus: u64,
    congruence: Option<Congruence<'_>>,
) -> Result<BigRational, ArithError> {
    let star = phi_star_of_product(star)?;
    let mut acc = BigRational::zero();
    for k in squarefree_divisors(outer) {
        if avoid.iter().any(|&a| gcd(k, a) != 1) {
            continue;
        }
        let mu = mobius(k)?;
        let q = k * modulus;
        let count = match &congruence {
            Some(c) => {
                let spec = CongruenceSpec::new(q, negated_monomial_mod(c.numerator, q), c.den, c.m)?;
                count_congruence_solutions(&spec, 1)
            }
            None => 1,
        };
        if count == 0 {
            continue;
        }
        let term = &star / (big(k) * phi_star(gcd(outer, q))?) * big(count);
        if mu > 0 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    Ok(acc)
}

/// ϑ₁ by its defining divisor sum with congruence counts.
pub fn theta1_direct(id: SurfaceId, eta: &[i64]) -> Result<BigRational, ArithError> {
    theta_admissible(id, eta)?;
    let u = |i: usize| eta[i - 1].unsigned_abs();
    let v = |i: usize| eta[i - 1];
    match id {
        SurfaceId::S1 => divisor_sum(
            u(1),
            &[u(2), u(3), u(5), u(6)],
            &[u(1), u(2), u(5)],
            u(4),
            Some(Congruence { numerator: &[(v(2), 1), (v(5), 2), (v(6), 1)], den: v(3), m: 1 }),
        ),
        SurfaceId::S2 => divisor_sum(
            u(3),
            &[u(2), u(4), u(5), u(6), u(7)],
            &[u(3), u(4), u(5), u(6)],
            u(1),
            Some(Congruence { numerator: &[(v(4), 1), (v(5), 3), (v(6), 2), (v(7), 1)], den: v(2), m: 1 }),
        ),
        SurfaceId::S3 => divisor_sum(
            u(2),
            &[u(1), u(3), u(4), u(6), u(7)],
            &[u(2), u(3), u(4), u(6)],
            u(5),
            Some(Congruence { numerator: &[(v(3), 1), (v(6), 1), (v(7), 1)], den: v(1), m: 2 }),
        ),
    }
}

/// ϑ₁′ for S3: the quadratic divisor sum with the congruence count dropped.
pub fn theta1_quadratic_reduced(eta: &[i64]) -> Result<BigRational, ArithError> {
    theta_admissible(SurfaceId::S3, eta)?;
    let u = |i: usize| eta[i - 1].unsigned_abs();
    divisor_sum(u(2), &[u(1), u(3)], &[u(2), u(3), u(4), u(6)], u(5), None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn elementary_functions() {
        assert_eq!(mobius(1).unwrap(), 1);
        assert_eq!(mobius(30).unwrap(), -1);
        assert_eq!(mobius(12).unwrap(), 0);
        assert_eq!(euler_phi(36).unwrap(), 12);
        assert_eq!(phi_star(12).unwrap(), r(1, 3));
        assert_eq!(divisor_count(36).unwrap(), 9);
        assert_eq!(omega(60).unwrap(), 3);
        assert!(mobius(0).is_err());
        assert_eq!(primes_up_to(30), vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29]);
        assert_eq!(gcd(0, 7), 7);
        assert_eq!(gcd(12, 18), 6);
        assert_eq!(mod_inverse(3, 7), Some(5));
        assert_eq!(mod_inverse(2, 4), None);
    }

    #[test]
    fn congruence_examples() {
        let c = |q, a, b, m, n| count_congruence_solutions(&CongruenceSpec::new(q, a, b, m).unwrap(), n);
        assert_eq!(c(8, 1, 1, 2, 1), 4);
        assert_eq!(c(5, 3, 1, 1, 1), 1);
        assert_eq!(c(5, 2, 1, 2, 1), 0);
        assert_eq!(c(1, 1, 1, 1, 0), 1);
        assert!(CongruenceSpec::new(6, 1, 2, 1).is_err());
    }

    #[test]
    fn table_densities_match_closed_form() {
        for id in SurfaceId::ALL {
            let t = LocalTable::for_surface(id);
            for p in [2u64, 3, 5, 7, 101] {
                assert_eq!(t.local_density(p), local_density_closed_form(id, p), "{id} p={p}");
            }
        }
    }

    #[test]
    fn theta_at_one() {
        for id in SurfaceId::ALL {
            let ones = vec![1i64; theta_arity(id)];
            assert_eq!(theta1_table(id, &ones).unwrap(), BigRational::one());
            assert_eq!(theta1_direct(id, &ones).unwrap(), BigRational::one());
        }
        assert_eq!(theta1_quadratic_reduced(&[1; 7]).unwrap(), BigRational::one());
    }

    #[test]
    fn theta_small_values() {
        // a prime dividing only the first variable of S1
        assert_eq!(theta1_table(SurfaceId::S1, &[5, 1, 1, 1, 1, 1]).unwrap(), r(3, 5));
        assert_eq!(theta1_direct(SurfaceId::S1, &[5, 1, 1, 1, 1, 1]).unwrap(), r(3, 5));
        assert!(theta1_table(SurfaceId::S1, &[2, 1, 1, 1, 1, 0]).is_err());
        assert!(theta1_table(SurfaceId::S1, &[1, 2, 2, 1, 1, 1]).is_err());
    }

    #[test]
    fn constant_function_product() {
        let f = MultFn::new(1.0, Box::new(|_, _| 1.0));
        let v = script_a(&f, 1, 1000).unwrap();
        assert!((v.value - 1.0).abs() < 1e-12);
        let g = MultFn::new(1.0, Box::new(|_, nu| if nu == 0 { 1.0 } else { 0.0 }));
        assert!(matches!(script_a(&g, 1, 1000), Err(ArithError::NonConvergent(_))));
    }
}
