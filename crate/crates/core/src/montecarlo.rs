//! Monte Carlo volumes of semialgebraic regions {max |pₖ(x)| ≤ 1}.
//!
//! All but one coordinate are sampled; the remaining coordinate enters every
//! constraint with degree at most two, so its slice length is computed exactly.

use std::f64::consts::PI;

use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::polytope::{alpha, bounding_box, volume_polytope};
use crate::surface::{SurfaceId, SurfaceSpec};
use crate::torsor::TorsorSpec;

/// Samples per chunk; each chunk draws from its own stream of the seeded generator.
pub const CHUNK: u64 = 1 << 14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum McError {
    #[error("sample count must be positive")]
    NoSamples,
    #[error("need at least two samples per stratum")]
    TooFewSamples,
    #[error("shard count must be positive")]
    ZeroShards,
    #[error("ω_∞ needs at least {MIN_SAMPLES} samples")]
    BelowMinimum,
    #[error("the reciprocal integrand needs a log-pair sampling plan and vice versa")]
    PlanMismatch,
    #[error("variable {var} occurs with exponent {exp} in a constraint; the inner variable must have degree 0..=2")]
    InnerDegree { var: usize, exp: i32 },
    #[error("the slice through the inner variable is unbounded")]
    UnboundedSlice,
    #[error("bound {0} must be at least 1")]
    Bound(f64),
    #[error("thread pool: {0}")]
    Pool(String),
}

/// Real Laurent polynomial: a list of (coefficient, exponent vector).
#[derive(Debug, Clone, PartialEq)]
pub struct LaurentPoly {
    pub terms: Vec<(f64, Vec<i32>)>,
}

impl LaurentPoly {
    pub fn new(terms: Vec<(f64, Vec<i32>)>) -> Self {
        LaurentPoly { terms }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, e)| e.iter().zip(x).fold(*c, |acc, (&k, &v)| if k == 0 { acc } else { acc * v.powi(k) }))
            .sum()
    }

    /// Coefficients (c0, c1, c2) of the polynomial as a function of `x[inner]`.
    fn quadratic_in(&self, x: &[f64], inner: usize) -> [f64; 3] {
        let mut q = [0.0; 3];
        for (c, e) in &self.terms {
            let v = e
                .iter()
                .zip(x)
                .enumerate()
                .fold(*c, |acc, (i, (&k, &v))| if i == inner || k == 0 { acc } else { acc * v.powi(k) });
            q[e[inner] as usize] += v;
        }
        q
    }

    fn check_inner(&self, inner: usize) -> Result<(), McError> {
        for (_, e) in &self.terms {
            if !(0..=2).contains(&e[inner]) {
                return Err(McError::InnerDegree { var: inner, exp: e[inner] });
            }
        }
        Ok(())
    }
}

fn push_roots(c2: f64, c1: f64, c0: f64, out: &mut Vec<f64>) {
    if c2 == 0.0 {
        if c1 != 0.0 {
            out.push(-c0 / c1);
        }
        return;
    }
    let disc = c1 * c1 - 4.0 * c2 * c0;
    if disc < 0.0 {
        return;
    }
    let s = disc.sqrt();
    let qq = -0.5 * (c1 + if c1 >= 0.0 { s } else { -s });
    if qq == 0.0 {
        out.push(0.0);
    } else {
        out.push(qq / c2);
        out.push(c0 / qq);
    }
}

/// Length of {t ∈ [lo, hi] : |p(x with x[inner] = t)| ≤ 1 for every constraint p}.
pub fn slice_measure(constraints: &[LaurentPoly], x: &[f64], inner: usize, lo: f64, hi: f64) -> Result<f64, McError> {
    let mut quads: Vec<[f64; 3]> = Vec::with_capacity(constraints.len());
    let mut cuts: Vec<f64> = Vec::with_capacity(4 * constraints.len() + 2);
    for p in constraints {
        let q = p.quadratic_in(x, inner);
        if q[1] == 0.0 && q[2] == 0.0 {
            if q[0].abs() > 1.0 {
                return Ok(0.0);
            }
            continue;
        }
        push_roots(q[2], q[1], q[0] - 1.0, &mut cuts);
        push_roots(q[2], q[1], q[0] + 1.0, &mut cuts);
        quads.push(q);
    }
    if quads.is_empty() {
        return if lo.is_finite() && hi.is_finite() { Ok((hi - lo).max(0.0)) } else { Err(McError::UnboundedSlice) };
    }
    if lo.is_finite() {
        cuts.push(lo);
    }
    if hi.is_finite() {
        cuts.push(hi);
    }
    cuts.retain(|c| c.is_finite() && *c >= lo && *c <= hi);
    cuts.sort_by(f64::total_cmp);
    let feasible = |t: f64| quads.iter().all(|q| (q[0] + t * (q[1] + t * q[2])).abs() <= 1.0);
    Ok(cuts.windows(2).filter(|w| w[1] > w[0] && feasible(0.5 * (w[0] + w[1]))).map(|w| w[1] - w[0]).sum())
}

/// Result of a Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub samples: u64,
    pub seed: u64,
    pub strata: usize,
}

#[derive(Clone, Copy, Default)]
struct Moments {
    n: u64,
    sum: f64,
    sumsq: f64,
}

/// Stratified Monte Carlo mean of `f`, which receives the generator and a uniform
/// variate already placed in its stratum. Chunks are reduced in index order so
/// the result does not depend on `shards`.
pub fn integrate<F>(samples: u64, seed: u64, strata: usize, shards: usize, f: F) -> Result<McEstimate, McError>
where
    F: Fn(&mut ChaCha8Rng, f64) -> f64 + Sync,
{
    if samples == 0 {
        return Err(McError::NoSamples);
    }
    if shards == 0 {
        return Err(McError::ZeroShards);
    }
    let strata = strata.max(1);
    if samples < 2 * strata as u64 {
        return Err(McError::TooFewSamples);
    }
    let nchunks = samples.div_ceil(CHUNK);
    let run = || {
        (0..nchunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(c);
                let mut m = vec![Moments::default(); strata];
                let start = c * CHUNK;
                for g in start..(start + CHUNK).min(samples) {
                    let k = (g % strata as u64) as usize;
                    let u0 = (k as f64 + rng.gen::<f64>()) / strata as f64;
                    let v = f(&mut rng, u0);
                    m[k].n += 1;
                    m[k].sum += v;
                    m[k].sumsq += v * v;
                }
                m
            })
            .collect::<Vec<_>>()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(shards)
        .build()
        .map_err(|e| McError::Pool(e.to_string()))?;
    let parts = pool.install(run);
    let mut total = vec![Moments::default(); strata];
    for part in parts {
        for (t, p) in total.iter_mut().zip(part) {
            t.n += p.n;
            t.sum += p.sum;
            t.sumsq += p.sumsq;
        }
    }
    let kf = strata as f64;
    let mut est = 0.0;
    let mut var = 0.0;
    for m in &total {
        let n = m.n as f64;
        let mean = m.sum / n;
        let s2 = ((m.sumsq - n * mean * mean) / (n - 1.0)).max(0.0);
        est += mean / kf;
        var += s2 / (n * kf * kf);
    }
    Ok(McEstimate { estimate: est, stderr: var.sqrt(), samples, seed, strata })
}

/// How an outer coordinate is drawn from a uniform variate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OuterMap {
    Uniform { lo: f64, hi: f64 },
    /// Centered Cauchy law with the given scale.
    Cauchy { scale: f64 },
}

impl OuterMap {
    /// Returns the coordinate and the reciprocal of its density.
    pub fn draw(self, u: f64) -> (f64, f64) {
        match self {
            OuterMap::Uniform { lo, hi } => (lo + u * (hi - lo), hi - lo),
            OuterMap::Cauchy { scale } => {
                let x = scale * (PI * (u - 0.5)).tan();
                let r = x / scale;
                (x, PI * scale * (1.0 + r * r))
            }
        }
    }
}

/// How the outer coordinates of an archimedean density are drawn.
#[derive(Debug, Clone, PartialEq)]
pub enum OuterPlan {
    /// Independent draws; the integrand is 1.
    Product(Vec<(usize, OuterMap)>),
    /// For the weight 1/(x_a |x_b|) on {|x_b|² ≤ x_a ≤ 1}: x_a = e^{-s}, |x_b| = e^{-s/2 - u}
    /// with s, u exponential of the given rates and a random sign for x_b.
    LogPair { a: usize, b: usize, rate_s: f64, rate_u: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrand {
    One,
    /// 1/(x_a |x_b|) for the pair of a log-pair plan.
    ReciprocalX1X2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionSpec {
    pub name: String,
    pub nvars: usize,
    pub integrand: Integrand,
    pub constraints: Vec<LaurentPoly>,
    pub outer: OuterPlan,
    pub inner: usize,
    pub prefactor: f64,
}

fn lp(terms: &[(f64, &[i32])]) -> LaurentPoly {
    LaurentPoly::new(terms.iter().map(|(c, e)| (*c, e.to_vec())).collect())
}

impl RegionSpec {
    /// The archimedean density region of a surface.
    pub fn omega_infinity(id: SurfaceId) -> Self {
        let uniform = OuterMap::Uniform { lo: -1.0, hi: 1.0 };
        let cauchy = OuterMap::Cauchy { scale: 1.0 };
        match id {
            SurfaceId::S1 => RegionSpec {
                name: "s1".into(),
                nvars: 3,
                integrand: Integrand::One,
                constraints: vec![
                    lp(&[(1.0, &[3, 0, 0])]),
                    lp(&[(1.0, &[2, 1, 0])]),
                    lp(&[(1.0, &[0, 2, 1]), (1.0, &[0, 1, 2])]),
                    lp(&[(1.0, &[1, 2, 0]), (1.0, &[1, 1, 1])]),
                    lp(&[(1.0, &[2, 0, 1])]),
                    lp(&[(1.0, &[1, 1, 1]), (1.0, &[1, 0, 2])]),
                ],
                outer: OuterPlan::Product(vec![(0, uniform), (1, cauchy)]),
                inner: 2,
                prefactor: 3.0,
            },
            SurfaceId::S2 => RegionSpec {
                name: "s2".into(),
                nvars: 3,
                integrand: Integrand::ReciprocalX1X2,
                constraints: vec![
                    lp(&[(1.0, &[1, 0, 0])]),
                    lp(&[(1.0, &[0, 0, 1])]),
                    lp(&[(1.0, &[0, -1, 2])]),
                    lp(&[(1.0, &[2, 0, -1]), (1.0, &[1, -1, 1])]),
                ],
                outer: OuterPlan::LogPair { a: 1, b: 2, rate_s: 0.25, rate_u: 0.5 },
                inner: 0,
                prefactor: 1.0,
            },
            // coordinates (z0, z2, z3)
            SurfaceId::S3 => RegionSpec {
                name: "s3".into(),
                nvars: 3,
                integrand: Integrand::One,
                constraints: vec![
                    lp(&[(1.0, &[3, 0, 0])]),
                    lp(&[(1.0, &[1, 1, 1])]),
                    lp(&[(1.0, &[2, 1, 0])]),
                    lp(&[(1.0, &[2, 0, 1])]),
                    lp(&[(1.0, &[0, 2, 1]), (1.0, &[1, 0, 2])]),
                ],
                outer: OuterPlan::Product(vec![(0, uniform), (1, cauchy)]),
                inner: 2,
                prefactor: 3.0,
            },
        }
    }

    pub fn validate(&self) -> Result<(), McError> {
        let paired = matches!(self.outer, OuterPlan::LogPair { .. });
        if paired != (self.integrand == Integrand::ReciprocalX1X2) {
            return Err(McError::PlanMismatch);
        }
        for c in &self.constraints {
            c.check_inner(self.inner)?;
        }
        Ok(())
    }

    /// One weighted sample: the integrand over the outer density times the inner slice length.
    fn sample(&self, rng: &mut ChaCha8Rng, u0: f64, x: &mut [f64]) -> f64 {
        let w = match &self.outer {
            OuterPlan::Product(maps) => {
                let mut w = 1.0;
                for (k, (var, map)) in maps.iter().enumerate() {
                    let u = if k == 0 { u0 } else { rng.gen::<f64>() };
                    let (v, inv_density) = map.draw(u);
                    x[*var] = v;
                    w *= inv_density;
                }
                w
            }
            OuterPlan::LogPair { a, b, rate_s, rate_u } => {
                // in (s, u) coordinates dx_a dx_b / (x_a |x_b|) = ds du on each sign branch
                let s = -(1.0 - u0).ln() / rate_s;
                let u = -(1.0 - rng.gen::<f64>()).ln() / rate_u;
                let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                x[*a] = (-s).exp();
                x[*b] = sign * (-0.5 * s - u).exp();
                2.0 / (rate_s * (-rate_s * s).exp() * rate_u * (-rate_u * u).exp())
            }
        };
        if w == 0.0 || !w.is_finite() {
            return 0.0;
        }
        let len = slice_measure(&self.constraints, x, self.inner, f64::NEG_INFINITY, f64::INFINITY).unwrap_or(0.0);
        w * len
    }
}

pub const DEFAULT_STRATA: usize = 64;
pub const MIN_SAMPLES: u64 = 10_000;

/// Prefactor times the volume of the region, with its standard error.
pub fn omega_infinity(region: &RegionSpec, samples: u64, seed: u64, shards: usize) -> Result<McEstimate, McError> {
    region.validate()?;
    if samples < MIN_SAMPLES {
        return Err(McError::BelowMinimum);
    }
    let n = region.nvars;
    let mut est = integrate(samples, seed, DEFAULT_STRATA, shards, |rng, u0| {
        let mut x = vec![0.0; n];
        region.sample(rng, u0, &mut x)
    })?;
    est.estimate *= region.prefactor;
    est.stderr *= region.prefactor;
    Ok(est)
}

/// Height conditions of a torsor with the dependent variable eliminated, as
/// Laurent polynomials in the remaining variables.
pub fn eliminated_heights(spec: &TorsorSpec) -> Vec<LaurentPoly> {
    let d = spec.dependent;
    let drop = |e: &[i32]| -> Vec<i32> { e.iter().enumerate().filter(|(i, _)| *i != d).map(|(_, v)| *v).collect() };
    let as_i32 = |e: &[u32]| -> Vec<i32> { e.iter().map(|&v| v as i32).collect() };
    // dependent = -(sum of `others`) / `divisor`
    let mut divisor = Vec::new();
    let mut dsign = 1.0;
    let mut others = Vec::new();
    for (c, e) in &spec.terms {
        if e[d] > 0 {
            let mut m = as_i32(e);
            m[d] -= 1;
            divisor = m;
            dsign = *c as f64;
        } else {
            others.push((*c as f64, as_i32(e)));
        }
    }
    spec.psi
        .iter()
        .map(|mono| {
            let k = mono[d] as i32;
            let base = as_i32(mono);
            // expand (-(T1 + T2)/(dsign·M))^k by the binomial theorem
            let mut terms = Vec::new();
            for j in 0..=k {
                let binom = (0..j).fold(1.0, |acc, i| acc * (k - i) as f64 / (i + 1) as f64);
                let coeff = binom * others[0].0.powi(j) * others[1].0.powi(k - j) * (-1.0 / dsign).powi(k);
                let mut e = base.clone();
                e[d] = 0;
                for i in 0..e.len() {
                    e[i] += j * others[0].1[i] + (k - j) * others[1].1[i] - k * divisor[i];
                }
                terms.push((coeff, drop(&e)));
            }
            LaurentPoly::new(terms)
        })
        .collect()
}

/// How the two outer fiber variables of the volume integral are drawn.
#[derive(Debug, Clone)]
enum FiberPlan {
    /// `uniform` on [-R, R] with R³ = B / ∏η^e; `cauchy` with scale (B·∏η^l)^{1/3} / ∏η^m.
    UniformCauchy { uniform: (usize, Vec<i32>), cauchy: (usize, Vec<i32>, Vec<i32>) },
    /// x₁ = η_a·∏η^p / B and x₂ = η_a²·η_b·∏η^q / B drawn as in the log-pair chart of ω_∞.
    LogPair { a: usize, b: usize, p: Vec<i32>, q: Vec<i32>, rate_s: f64, rate_u: f64 },
}

/// Sampler for the integral of 1/η_w over the torsor height region, with the
/// log-box variables drawn uniformly in log coordinates.
#[derive(Debug, Clone)]
pub struct VolumeCheck {
    pub surface: SurfaceId,
    pub bound: f64,
    nvars: usize,
    constraints: Vec<LaurentPoly>,
    log_vars: Vec<usize>,
    log_box: Vec<f64>,
    log_rows: Vec<(Vec<f64>, f64)>,
    fiber: FiberPlan,
    inner: usize,
    weight: usize,
    pub log_power: i32,
}

fn without(e: &[u32], vars: &[usize], n: usize) -> Vec<i32> {
    (0..n).map(|i| if vars.contains(&i) { 0 } else { e[i] as i32 }).collect()
}

impl VolumeCheck {
    pub fn new(id: SurfaceId, bound: f64) -> Result<Self, McError> {
        if bound.is_nan() || bound < 1.0 {
            return Err(McError::Bound(bound));
        }
        let spec = TorsorSpec::new(id);
        let nvars = spec.nvars - 1;
        let mut constraints = eliminated_heights(&spec);
        for c in constraints.iter_mut() {
            for t in c.terms.iter_mut() {
                t.0 /= bound;
            }
        }
        let poly = volume_polytope(id);
        let log_rows = poly
            .inequalities
            .iter()
            .map(|(a, rhs)| (a.iter().map(|v| v.to_f64().unwrap()).collect(), rhs.to_f64().unwrap()))
            .collect();
        let log_box = bounding_box(&poly).iter().map(|v| v.to_f64().unwrap()).collect();
        let (log_vars, fiber, inner, weight) = match id {
            SurfaceId::S1 => (
                vec![1, 2, 3, 4],
                FiberPlan::UniformCauchy {
                    uniform: (0, without(&spec.psi[0], &[0], nvars)),
                    cauchy: (5, vec![0, 1, 1, 1, 2, 0, 0], vec![0, 1, 0, 0, 2, 0, 0]),
                },
                6,
                3,
            ),
            SurfaceId::S2 => (
                vec![0, 1, 2, 3, 4],
                FiberPlan::LogPair {
                    a: 5,
                    b: 6,
                    p: without(&spec.psi[1], &[5], nvars),
                    q: without(&spec.psi[2], &[5, 6], nvars),
                    rate_s: 0.25,
                    rate_u: 0.5,
                },
                7,
                0,
            ),
            SurfaceId::S3 => (
                vec![0, 1, 3, 4, 5],
                FiberPlan::UniformCauchy {
                    uniform: (2, without(&spec.psi[0], &[2], nvars)),
                    cauchy: (7, vec![1, 2, 0, 1, 3, 2, 0, 0], vec![1, 1, 0, 0, 1, 0, 0, 0]),
                },
                6,
                4,
            ),
        };
        for c in &constraints {
            c.check_inner(inner)?;
        }
        Ok(VolumeCheck {
            surface: id,
            bound,
            nvars,
            constraints,
            log_vars,
            log_box,
            log_rows,
            fiber,
            inner,
            weight,
            log_power: SurfaceSpec::new(id).rho as i32 - 1,
        })
    }

    fn mono(x: &[f64], e: &[i32]) -> f64 {
        e.iter().zip(x).fold(1.0, |acc, (&k, &v)| if k == 0 { acc } else { acc * v.powi(k) })
    }

    fn sample(&self, rng: &mut ChaCha8Rng, u0: f64, x: &mut [f64]) -> f64 {
        let lnb = self.bound.ln();
        let mut t = vec![0.0; self.log_vars.len()];
        let mut w = 1.0;
        for (k, (&var, &top)) in self.log_vars.iter().zip(&self.log_box).enumerate() {
            let u = if k == 0 { u0 } else { rng.gen::<f64>() };
            t[k] = u * top;
            x[var] = self.bound.powf(t[k]);
            // dη = ln B · η dt
            w *= top * lnb * x[var];
        }
        if w == 0.0 || !self.log_rows.iter().all(|(a, r)| a.iter().zip(&t).map(|(p, q)| p * q).sum::<f64>() <= *r) {
            return 0.0;
        }
        match &self.fiber {
            FiberPlan::UniformCauchy { uniform: (uv, ue), cauchy: (cv, cl, cm) } => {
                let radius = (self.bound / Self::mono(x, ue)).cbrt();
                let (v, inv) = OuterMap::Uniform { lo: -radius, hi: radius }.draw(rng.gen::<f64>());
                x[*uv] = v;
                w *= inv;
                let scale = (self.bound * Self::mono(x, cl)).cbrt() / Self::mono(x, cm);
                let (v, inv) = OuterMap::Cauchy { scale }.draw(rng.gen::<f64>());
                x[*cv] = v;
                w *= inv;
            }
            FiberPlan::LogPair { a, b, p, q, rate_s, rate_u } => {
                let s = -(1.0 - rng.gen::<f64>()).ln() / rate_s;
                let u = -(1.0 - rng.gen::<f64>()).ln() / rate_u;
                let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                let x1 = (-s).exp();
                let x2 = sign * (-0.5 * s - u).exp();
                let ca = Self::mono(x, p) / self.bound;
                let cb = Self::mono(x, q) / self.bound;
                x[*a] = x1 / ca;
                x[*b] = x2 / (cb * x[*a] * x[*a]);
                // dη_a dη_b = dx₁ dx₂ / (c_a c_b η_a²)
                let pair = 2.0 / (rate_s * (-rate_s * s).exp() * rate_u * (-rate_u * u).exp());
                w *= pair * x1 * x2.abs() / (ca * cb * x[*a] * x[*a]);
            }
        }
        w /= x[self.weight];
        if !w.is_finite() {
            return 0.0;
        }
        w * slice_measure(&self.constraints, x, self.inner, f64::NEG_INFINITY, f64::INFINITY).unwrap_or(0.0)
    }

    /// Monte Carlo estimate of the volume integral.
    pub fn estimate(&self, samples: u64, seed: u64, shards: usize) -> Result<McEstimate, McError> {
        integrate(samples, seed, DEFAULT_STRATA, shards, |rng, u0| {
            let mut x = vec![0.0; self.nvars];
            self.sample(rng, u0, &mut x)
        })
    }

    /// α·B·(log B)^r, to be multiplied by ω_∞.
    pub fn scale(&self) -> f64 {
        alpha(self.surface).to_f64().unwrap() * self.bound * self.bound.ln().powi(self.log_power)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeCheckReport {
    pub surface: SurfaceId,
    pub bound: f64,
    pub volume: McEstimate,
    pub omega_infinity: McEstimate,
    /// α·ω_∞·B(log B)^r
    pub predicted: f64,
    pub predicted_stderr: f64,
    /// Difference in units of the combined standard error.
    pub z_score: f64,
}

pub fn check_volume_identity(
    id: SurfaceId,
    bound: f64,
    samples: u64,
    seed: u64,
    shards: usize,
) -> Result<VolumeCheckReport, McError> {
    let check = VolumeCheck::new(id, bound)?;
    let volume = check.estimate(samples, seed, shards)?;
    let omega = omega_infinity(&RegionSpec::omega_infinity(id), samples, seed.wrapping_add(1), shards)?;
    let predicted = check.scale() * omega.estimate;
    let predicted_stderr = check.scale() * omega.stderr;
    let combined = (volume.stderr.powi(2) + predicted_stderr.powi(2)).sqrt();
    let diff = volume.estimate - predicted;
    Ok(VolumeCheckReport {
        surface: id,
        bound,
        volume,
        omega_infinity: omega,
        predicted,
        predicted_stderr,
        z_score: if combined > 0.0 { diff / combined } else { diff.signum() * if diff == 0.0 { 0.0 } else { f64::INFINITY } },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_volume_is_exact() {
        let cube = RegionSpec {
            name: "cube".into(),
            nvars: 3,
            integrand: Integrand::One,
            constraints: vec![lp(&[(1.0, &[1, 0, 0])]), lp(&[(1.0, &[0, 1, 0])]), lp(&[(1.0, &[0, 0, 1])])],
            outer: OuterPlan::Product(vec![
                (0, OuterMap::Uniform { lo: -1.0, hi: 1.0 }),
                (1, OuterMap::Uniform { lo: -1.0, hi: 1.0 }),
            ]),
            inner: 2,
            prefactor: 1.0,
        };
        let e = omega_infinity(&cube, 10_000, 7, 1).unwrap();
        assert_eq!(e.estimate, 8.0);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn slice_of_annulus() {
        // |t² - 2| ≤ 1  ⇔  1 ≤ |t| ≤ √3
        let c = vec![lp(&[(1.0, &[2]), (-2.0, &[0])])];
        let m = slice_measure(&c, &[0.0], 0, f64::NEG_INFINITY, f64::INFINITY).unwrap();
        assert!((m - 2.0 * (3f64.sqrt() - 1.0)).abs() < 1e-12);
        let m = slice_measure(&c, &[0.0], 0, 0.0, 1.5).unwrap();
        assert!((m - 0.5).abs() < 1e-12);
    }

    #[test]
    fn unbounded_slice_is_reported() {
        let c = vec![lp(&[(0.5, &[0, 1])])];
        assert_eq!(slice_measure(&c, &[0.0, 1.0], 0, f64::NEG_INFINITY, f64::INFINITY), Err(McError::UnboundedSlice));
    }

    #[test]
    fn inner_degree_is_checked() {
        let mut r = RegionSpec::omega_infinity(SurfaceId::S1);
        r.inner = 0;
        assert!(matches!(r.validate(), Err(McError::InnerDegree { .. })));
    }

    #[test]
    fn eliminated_heights_match_direct_substitution() {
        let spec = TorsorSpec::new(SurfaceId::S1);
        let polys = eliminated_heights(&spec);
        // a torsor point: η = (1,1,1,1,1,1,1,-2)
        let eta = [1i64, 1, 1, 1, 1, 1, 1, -2];
        let x: Vec<f64> = eta[..7].iter().map(|&v| v as f64).collect();
        let raw = spec.psi_raw(&eta).unwrap();
        for (p, r) in polys.iter().zip(raw) {
            assert!((p.eval(&x) - r as f64).abs() < 1e-12);
        }
    }
}
