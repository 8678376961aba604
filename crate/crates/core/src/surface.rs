//! Surface data: defining equations, the lines removed from the count,
//! canonical representatives of projective points and the anticanonical height.

use std::fmt;
use std::str::FromStr;

use num_integer::Integer;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SurfaceError {
    #[error("coordinate tuple is identically zero")]
    ZeroVector,
    #[error("expected {expected} coordinates, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("unknown surface `{0}` (expected s1, s2 or s3)")]
    UnknownSurface(String),
    #[error("normalized coordinate does not fit in 64 bits")]
    Overflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurfaceId {
    S1,
    S2,
    S3,
}

impl SurfaceId {
    pub const ALL: [SurfaceId; 3] = [SurfaceId::S1, SurfaceId::S2, SurfaceId::S3];

    pub fn name(self) -> &'static str {
        match self {
            SurfaceId::S1 => "s1",
            SurfaceId::S2 => "s2",
            SurfaceId::S3 => "s3",
        }
    }
}

impl fmt::Display for SurfaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SurfaceId {
    type Err = SurfaceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "s1" | "1" => Ok(SurfaceId::S1),
            "s2" | "2" => Ok(SurfaceId::S2),
            "s3" | "3" => Ok(SurfaceId::S3),
            _ => Err(SurfaceError::UnknownSurface(s.to_string())),
        }
    }
}

/// Primitive integer vector with first nonzero coordinate positive.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProjectivePoint {
    coords: Vec<i64>,
}

impl ProjectivePoint {
    pub fn normalize(raw: &[i64]) -> Result<Self, SurfaceError> {
        let g = raw.iter().fold(0u64, |g, &x| g.gcd(&x.unsigned_abs()));
        if g == 0 {
            return Err(SurfaceError::ZeroVector);
        }
        let sign = if raw.iter().find(|&&x| x != 0).copied().unwrap_or(0) < 0 { -1 } else { 1 };
        let coords = raw.iter().map(|&x| sign * (x / g as i64)).collect();
        Ok(ProjectivePoint { coords })
    }

    /// Same as [`normalize`](Self::normalize) for 128-bit input, used by the torsor map.
    /// Fails with [`SurfaceError::Overflow`] when a reduced coordinate exceeds 64 bits.
    pub fn normalize_wide(raw: &[i128]) -> Result<Self, SurfaceError> {
        let g = raw.iter().fold(0u128, |g, &x| g.gcd(&x.unsigned_abs()));
        if g == 0 {
            return Err(SurfaceError::ZeroVector);
        }
        let sign = if raw.iter().find(|&&x| x != 0).copied().unwrap_or(0) < 0 { -1 } else { 1 };
        let coords = raw
            .iter()
            .map(|&x| i64::try_from(sign * (x / g as i128)).map_err(|_| SurfaceError::Overflow))
            .collect::<Result<_, _>>()?;
        Ok(ProjectivePoint { coords })
    }

    /// Wraps coordinates already known to be canonical. Checked in debug builds.
    pub fn from_canonical(coords: Vec<i64>) -> Self {
        debug_assert!(is_canonical(&coords), "not canonical: {coords:?}");
        ProjectivePoint { coords }
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords
    }

    pub fn height(&self) -> u64 {
        height_of(&self.coords)
    }
}

impl fmt::Display for ProjectivePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, x) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ":")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

pub fn height_of(coords: &[i64]) -> u64 {
    coords.iter().map(|x| x.unsigned_abs()).max().unwrap_or(0)
}

pub fn is_canonical(coords: &[i64]) -> bool {
    let g = coords.iter().fold(0u64, |g, &x| g.gcd(&x.unsigned_abs()));
    g == 1 && coords.iter().find(|&&x| x != 0).is_some_and(|&x| x > 0)
}

/// Homogeneous integer polynomial stored as a list of terms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polynomial {
    terms: Vec<(i64, Vec<u32>)>,
}

impl Polynomial {
    /// Each term is a coefficient and the list of variable indices multiplied together,
    /// so `(1, &[1, 1, 4])` is `x1^2 x4`.
    pub fn from_products(nvars: usize, terms: &[(i64, &[usize])]) -> Self {
        let terms = terms
            .iter()
            .map(|&(c, vars)| {
                let mut exps = vec![0u32; nvars];
                for &v in vars {
                    exps[v] += 1;
                }
                (c, exps)
            })
            .collect();
        Polynomial { terms }
    }

    pub fn terms(&self) -> &[(i64, Vec<u32>)] {
        &self.terms
    }

    pub fn eval(&self, x: &[i64]) -> i128 {
        self.terms
            .iter()
            .map(|(c, exps)| {
                exps.iter()
                    .zip(x)
                    .fold(*c as i128, |acc, (&e, &xi)| acc * (xi as i128).pow(e))
            })
            .sum()
    }

    /// Largest variable index occurring in any term.
    pub fn max_variable(&self) -> usize {
        self.terms
            .iter()
            .flat_map(|(_, e)| e.iter().enumerate().filter(|(_, &k)| k > 0).map(|(i, _)| i))
            .max()
            .unwrap_or(0)
    }

    pub fn is_homogeneous_of_degree(&self, d: u32) -> bool {
        self.terms.iter().all(|(_, e)| e.iter().sum::<u32>() == d)
    }
}

/// A line, cut out by linear forms (each a coefficient vector).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Line {
    pub forms: Vec<Vec<i64>>,
}

impl Line {
    pub fn contains(&self, x: &[i64]) -> bool {
        self.forms
            .iter()
            .all(|f| f.iter().zip(x).map(|(&a, &b)| a as i128 * b as i128).sum::<i128>() == 0)
    }
}

#[derive(Debug, Clone)]
pub struct SurfaceSpec {
    pub id: SurfaceId,
    /// Number of homogeneous coordinates (ambient dimension plus one).
    pub ncoords: usize,
    pub equations: Vec<Polynomial>,
    pub lines: Vec<Line>,
    pub singular_points: Vec<ProjectivePoint>,
    /// Picard rank of the minimal desingularization.
    pub rho: u32,
}

fn unit_forms(n: usize, zero: &[usize]) -> Vec<Vec<i64>> {
    zero.iter()
        .map(|&i| {
            let mut f = vec![0; n];
            f[i] = 1;
            f
        })
        .collect()
}

fn form(n: usize, coeffs: &[(usize, i64)]) -> Vec<i64> {
    let mut f = vec![0; n];
    for &(i, c) in coeffs {
        f[i] = c;
    }
    f
}

impl SurfaceSpec {
    pub fn new(id: SurfaceId) -> Self {
        match id {
            SurfaceId::S1 => {
                let n = 6;
                let p = |t: &[(i64, &[usize])]| Polynomial::from_products(n, t);
                let equations = vec![
                    p(&[(1, &[0, 2]), (-1, &[1, 5])]),
                    p(&[(1, &[0, 2]), (-1, &[3, 4])]),
                    p(&[(1, &[0, 3]), (1, &[1, 1]), (1, &[1, 4])]),
                    p(&[(1, &[0, 5]), (1, &[1, 4]), (1, &[4, 4])]),
                    p(&[(1, &[3, 5]), (1, &[1, 2]), (1, &[2, 4])]),
                ];
                let mut l3 = unit_forms(n, &[0, 3, 5]);
                l3.push(form(n, &[(1, 1), (4, 1)]));
                let mut l4 = unit_forms(n, &[2, 3, 5]);
                l4.push(form(n, &[(1, 1), (4, 1)]));
                let lines = vec![
                    Line { forms: unit_forms(n, &[0, 1, 4, 3]) },
                    Line { forms: unit_forms(n, &[0, 1, 4, 5]) },
                    Line { forms: l3 },
                    Line { forms: l4 },
                ];
                SurfaceSpec {
                    id,
                    ncoords: n,
                    equations,
                    lines,
                    singular_points: vec![ProjectivePoint::from_canonical(vec![0, 0, 1, 0, 0, 0])],
                    rho: 5,
                }
            }
            SurfaceId::S2 => {
                let n = 5;
                let p = |t: &[(i64, &[usize])]| Polynomial::from_products(n, t);
                let equations = vec![
                    p(&[(1, &[0, 0]), (1, &[0, 3]), (1, &[2, 4])]),
                    p(&[(1, &[1, 3]), (-1, &[2, 2])]),
                ];
                let lines = vec![
                    Line { forms: unit_forms(n, &[0, 1, 2]) },
                    Line { forms: vec![form(n, &[(0, 1), (3, 1)]), form(n, &[(1, 1)]), form(n, &[(2, 1)])] },
                    Line { forms: unit_forms(n, &[0, 2, 3]) },
                ];
                SurfaceSpec {
                    id,
                    ncoords: n,
                    equations,
                    lines,
                    singular_points: vec![
                        ProjectivePoint::from_canonical(vec![0, 0, 0, 0, 1]),
                        ProjectivePoint::from_canonical(vec![0, 1, 0, 0, 0]),
                    ],
                    rho: 6,
                }
            }
            SurfaceId::S3 => {
                let n = 5;
                let p = |t: &[(i64, &[usize])]| Polynomial::from_products(n, t);
                let equations = vec![
                    p(&[(1, &[0, 1]), (-1, &[2, 3])]),
                    p(&[(1, &[0, 4]), (1, &[1, 2]), (1, &[3, 3])]),
                ];
                let lines = vec![
                    Line { forms: unit_forms(n, &[0, 2, 3]) },
                    Line { forms: unit_forms(n, &[0, 1, 3]) },
                    Line { forms: unit_forms(n, &[1, 3, 4]) },
                ];
                SurfaceSpec {
                    id,
                    ncoords: n,
                    equations,
                    lines,
                    singular_points: vec![ProjectivePoint::from_canonical(vec![0, 0, 0, 0, 1])],
                    rho: 6,
                }
            }
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ncoords - 1
    }

    pub fn eval_equations(&self, x: &[i64]) -> Result<Vec<i128>, SurfaceError> {
        self.check_arity(x)?;
        Ok(self.equations.iter().map(|e| e.eval(x)).collect())
    }

    pub fn on_surface(&self, x: &[i64]) -> bool {
        self.equations.iter().all(|e| e.eval(x) == 0)
    }

    pub fn is_on_line(&self, x: &[i64]) -> bool {
        self.lines.iter().any(|l| l.contains(x))
    }

    /// Canonical point of height at most `b`, on the surface and off every line.
    pub fn is_counted(&self, x: &[i64], b: u64) -> bool {
        x.len() == self.ncoords
            && is_canonical(x)
            && height_of(x) <= b
            && self.on_surface(x)
            && !self.is_on_line(x)
    }

    fn check_arity(&self, x: &[i64]) -> Result<(), SurfaceError> {
        if x.len() != self.ncoords {
            return Err(SurfaceError::ArityMismatch { expected: self.ncoords, got: x.len() });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_examples() {
        let p = ProjectivePoint::normalize(&[-2, 4, 0, 6, 0, 0]).unwrap();
        assert_eq!(p.coords(), &[1, -2, 0, -3, 0, 0]);
        assert_eq!(p.height(), 3);
        assert_eq!(ProjectivePoint::normalize(&[0, 0, 0]), Err(SurfaceError::ZeroVector));
        let q = ProjectivePoint::normalize(&[0, -3, 3]).unwrap();
        assert_eq!(q.coords(), &[0, 1, -1]);
    }

    #[test]
    fn singular_points_lie_on_surfaces() {
        for id in SurfaceId::ALL {
            let s = SurfaceSpec::new(id);
            for p in &s.singular_points {
                assert!(s.on_surface(p.coords()), "{id} {p}");
            }
            for e in &s.equations {
                assert!(e.is_homogeneous_of_degree(2));
            }
        }
    }

    #[test]
    fn arity_is_checked() {
        let s = SurfaceSpec::new(SurfaceId::S2);
        assert!(matches!(s.eval_equations(&[1, 2, 3]), Err(SurfaceError::ArityMismatch { .. })));
    }

    #[test]
    fn parse_ids() {
        assert_eq!("S3".parse::<SurfaceId>().unwrap(), SurfaceId::S3);
        assert!("s4".parse::<SurfaceId>().is_err());
    }
}
