//! Reference point counts obtained directly from the defining equations:
//! a full box search for tiny bounds and a projection search that solves for
//! the remaining coordinates.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::gcd;
use crate::surface::{height_of, ProjectivePoint, SurfaceId, SurfaceSpec};

/// Largest bound accepted by the box search.
pub const EXHAUSTIVE_CAP: u64 = 15;
/// Largest bound accepted by the projection search.
pub const PROJECTION_CAP: u64 = 20_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("bound {bound} exceeds the {method} cap of {cap}")]
    BoundTooLarge { method: Method, bound: u64, cap: u64 },
    #[error("bound must be positive")]
    ZeroBound,
    #[error("shard count must be positive")]
    ZeroShards,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exhaustive,
    Projection,
    Torsor,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Exhaustive => "exhaustive",
            Method::Projection => "projection",
            Method::Torsor => "torsor",
        })
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exhaustive" => Ok(Method::Exhaustive),
            "projection" => Ok(Method::Projection),
            "torsor" => Ok(Method::Torsor),
            _ => Err(format!("unknown method `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub surface: SurfaceId,
    pub method: Method,
    pub bound: u64,
    pub count: u64,
    /// Wall time in seconds; left out of serialized output when cleared.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub elapsed: Option<f64>,
    #[serde(default)]
    pub params: BTreeMap<String, String>,
}

impl CountRecord {
    pub fn new(surface: SurfaceId, method: Method, bound: u64, count: u64, elapsed: f64) -> Self {
        CountRecord { surface, method, bound, count, elapsed: Some(elapsed), params: BTreeMap::new() }
    }
}

/// All counted points found by the box search, sorted.
pub fn exhaustive_points(surface: &SurfaceSpec, b: u64) -> Result<Vec<ProjectivePoint>, OracleError> {
    if b == 0 {
        return Err(OracleError::ZeroBound);
    }
    if b > EXHAUSTIVE_CAP {
        return Err(OracleError::BoundTooLarge { method: Method::Exhaustive, bound: b, cap: EXHAUSTIVE_CAP });
    }
    let n = surface.ncoords;
    // equations are tested as soon as their last variable is fixed
    let mut checks: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, e) in surface.equations.iter().enumerate() {
        checks[e.max_variable()].push(k);
    }
    let mut out = Vec::new();
    let mut x = vec![0i64; n];
    box_search(surface, &checks, b as i64, 0, false, 0, &mut x, &mut out);
    out.sort();
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn box_search(
    s: &SurfaceSpec,
    checks: &[Vec<usize>],
    b: i64,
    k: usize,
    seen_nonzero: bool,
    g: u64,
    x: &mut [i64],
    out: &mut Vec<ProjectivePoint>,
) {
    if k == x.len() {
        if g == 1 && !s.is_on_line(x) {
            out.push(ProjectivePoint::from_canonical(x.to_vec()));
        }
        return;
    }
    let lo = if seen_nonzero { -b } else { 0 };
    for v in lo..=b {
        x[k] = v;
        let ok = checks[k].iter().all(|&e| s.equations[e].eval(x) == 0);
        if ok {
            box_search(s, checks, b, k + 1, seen_nonzero || v != 0, gcd(g, v.unsigned_abs()), x, out);
        }
    }
}

pub fn count_exhaustive(surface: &SurfaceSpec, b: u64) -> Result<CountRecord, OracleError> {
    let start = Instant::now();
    let n = exhaustive_points(surface, b)?.len() as u64;
    Ok(CountRecord::new(surface.id, Method::Exhaustive, b, n, start.elapsed().as_secs_f64()))
}

fn accept(s: &SurfaceSpec, x: &[i64], b: u64) -> bool {
    height_of(x) <= b
        && x.iter().fold(0u64, |g, v| gcd(g, v.unsigned_abs())) == 1
        && s.on_surface(x)
        && !s.is_on_line(x)
}

/// Outer loop values for the projection search; each value is searched independently.
fn projection_outer(id: SurfaceId, b: i64) -> Vec<i64> {
    match id {
        SurfaceId::S1 | SurfaceId::S3 => (1..=b).collect(),
        SurfaceId::S2 => (-b..=b).filter(|&v| v != 0).collect(),
    }
}

fn projection_inner(s: &SurfaceSpec, b: i64, outer: i64, out: &mut Vec<[i64; 6]>) {
    let bu = b as u64;
    match s.id {
        SurfaceId::S1 => {
            // x0 ≥ 1 on the open set; x3, x5, x2 follow from x0, x1, x4
            let x0 = outer;
            for x1 in -b..=b {
                let m = x0 / gcd(x0 as u64, x1.unsigned_abs()) as i64;
                // x0 | x1(x1 + x4) forces x4 ≡ -x1 (mod m)
                let mut x4 = -b + (-x1 + b).rem_euclid(m);
                while x4 <= b {
                    let n3 = -(x1 * x1 + x1 * x4);
                    let n5 = -(x1 * x4 + x4 * x4);
                    if n3 % x0 == 0 && n5 % x0 == 0 {
                        let (x3, x5) = (n3 / x0, n5 / x0);
                        let n2 = x1 as i128 * x5 as i128;
                        if n2 % x0 as i128 == 0 {
                            let x2 = (n2 / x0 as i128) as i64;
                            let x = [x0, x1, x2, x3, x4, x5];
                            if accept(s, &x, bu) {
                                out.push(x);
                            }
                        }
                    }
                    x4 += m;
                }
            }
        }
        SurfaceId::S2 => {
            // x2 ≠ 0 on the open set; x1 = x2²/x3 and x4 = -(x0² + x0x3)/x2
            let x2 = outer;
            let sq = x2 * x2;
            for x3 in (-b..=b).filter(|&v| v != 0 && sq % v == 0) {
                let x1 = sq / x3;
                if x1.abs() > b {
                    continue;
                }
                let start = if x3 > 0 { 0 } else { 1 };
                for x0 in start..=b {
                    let n4 = -(x0 * x0 + x0 * x3);
                    if n4 % x2 != 0 {
                        continue;
                    }
                    let x = [x0, x1, x2, x3, n4 / x2, 0];
                    if accept(s, &x[..5], bu) {
                        out.push(x);
                    }
                }
            }
        }
        SurfaceId::S3 => {
            // x0 ≥ 1 on the open set; x1 = x2x3/x0 and x4 = -(x1x2 + x3²)/x0
            let x0 = outer;
            for x2 in -b..=b {
                let m = x0 / gcd(x0 as u64, x2.unsigned_abs()) as i64;
                let mut x3 = -b + b.rem_euclid(m);
                while x3 <= b {
                    let x1 = x2 * x3 / x0;
                    let n4 = -(x1 * x2 + x3 * x3);
                    if n4 % x0 == 0 {
                        let x = [x0, x1, x2, x3, n4 / x0, 0];
                        if accept(s, &x[..5], bu) {
                            out.push(x);
                        }
                    }
                    x3 += m;
                }
            }
        }
    }
}

/// All counted points found by the projection search, sorted.
pub fn projection_points(surface: &SurfaceSpec, b: u64, shards: usize) -> Result<Vec<ProjectivePoint>, OracleError> {
    if b == 0 {
        return Err(OracleError::ZeroBound);
    }
    if shards == 0 {
        return Err(OracleError::ZeroShards);
    }
    if b > PROJECTION_CAP {
        return Err(OracleError::BoundTooLarge { method: Method::Projection, bound: b, cap: PROJECTION_CAP });
    }
    let outer = projection_outer(surface.id, b as i64);
    let n = surface.ncoords;
    let parts: Vec<Vec<ProjectivePoint>> = (0..shards)
        .into_par_iter()
        .map(|shard| {
            let mut raw = Vec::new();
            for (i, &o) in outer.iter().enumerate() {
                if i % shards == shard {
                    projection_inner(surface, b as i64, o, &mut raw);
                }
            }
            raw.into_iter().map(|x| ProjectivePoint::from_canonical(x[..n].to_vec())).collect()
        })
        .collect();
    let mut all: Vec<ProjectivePoint> = parts.into_iter().flatten().collect();
    all.sort();
    Ok(all)
}

pub fn count_projection(surface: &SurfaceSpec, b: u64, shards: usize) -> Result<CountRecord, OracleError> {
    let start = Instant::now();
    let n = projection_points(surface, b, shards)?.len() as u64;
    Ok(CountRecord::new(surface.id, Method::Projection, b, n, start.elapsed().as_secs_f64()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_matches_box_search() {
        for id in SurfaceId::ALL {
            let s = SurfaceSpec::new(id);
            for b in [1, 3, 7] {
                assert_eq!(projection_points(&s, b, 2).unwrap(), exhaustive_points(&s, b).unwrap(), "{id} B={b}");
            }
        }
    }

    #[test]
    fn caps_enforced() {
        let s = SurfaceSpec::new(SurfaceId::S1);
        assert!(matches!(count_exhaustive(&s, 16), Err(OracleError::BoundTooLarge { .. })));
        assert!(matches!(count_exhaustive(&s, 0), Err(OracleError::ZeroBound)));
    }

    #[test]
    fn found_points_are_counted_points() {
        for id in SurfaceId::ALL {
            let s = SurfaceSpec::new(id);
            for p in projection_points(&s, 40, 1).unwrap() {
                assert!(s.is_counted(p.coords(), 40), "{id} {p}");
            }
        }
    }
}
