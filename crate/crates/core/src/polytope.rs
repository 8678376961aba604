//! Exact volumes of rational polytopes {t ≥ 0, a·t ≤ A}, used for the α factor.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::surface::SurfaceId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolytopeError {
    #[error("polytope is unbounded")]
    Unbounded,
    #[error("inequality has {got} coefficients, expected {expected}")]
    Arity { expected: usize, got: usize },
    #[error("dimension must be positive")]
    ZeroDimension,
}

/// Polytope {t ∈ ℝ^dim : t ≥ 0, aᵢ·t ≤ Aᵢ} scaled by `prefactor`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolytopeSpec {
    pub dim: usize,
    pub inequalities: Vec<(Vec<BigRational>, BigRational)>,
    pub prefactor: BigRational,
}

fn q(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

impl PolytopeSpec {
    pub fn from_integers(dim: usize, rows: &[(&[i64], i64)], prefactor: BigRational) -> Result<Self, PolytopeError> {
        if dim == 0 {
            return Err(PolytopeError::ZeroDimension);
        }
        let inequalities = rows
            .iter()
            .map(|(a, rhs)| {
                if a.len() != dim {
                    return Err(PolytopeError::Arity { expected: dim, got: a.len() });
                }
                Ok((a.iter().map(|&v| q(v)).collect(), q(*rhs)))
            })
            .collect::<Result<_, _>>()?;
        Ok(PolytopeSpec { dim, inequalities, prefactor })
    }

    /// Builds the polytope from divisor class data in a basis of r + 1 classes.
    ///
    /// `anticanonical` holds the coefficients c₁..c_{r+1} of −K, the last one playing
    /// the distinguished role; each row of `effective` is a further negative curve
    /// class in the same basis. The result is {Σ cⱼtⱼ ≤ 1, Σ (b_{r+1}cⱼ − bⱼc_{r+1})tⱼ ≤ b_{r+1}}
    /// with prefactor 1/c_{r+1}.
    pub fn from_divisor_classes(anticanonical: &[i64], effective: &[Vec<i64>]) -> Result<Self, PolytopeError> {
        let r = anticanonical.len().checked_sub(1).filter(|&r| r > 0).ok_or(PolytopeError::ZeroDimension)?;
        let c_last = anticanonical[r];
        let mut rows: Vec<(Vec<i64>, i64)> = vec![(anticanonical[..r].to_vec(), 1)];
        for b in effective {
            if b.len() != r + 1 {
                return Err(PolytopeError::Arity { expected: r + 1, got: b.len() });
            }
            let a = (0..r).map(|j| b[r] * anticanonical[j] - b[j] * c_last).collect();
            rows.push((a, b[r]));
        }
        let borrowed: Vec<(&[i64], i64)> = rows.iter().map(|(a, v)| (a.as_slice(), *v)).collect();
        PolytopeSpec::from_integers(r, &borrowed, BigRational::new(BigInt::one(), BigInt::from(c_last)))
    }

    /// All constraints as rows of `a·t ≤ A`, including `−tᵢ ≤ 0`.
    fn all_rows(&self) -> Vec<(Vec<BigRational>, BigRational)> {
        let mut rows = self.inequalities.clone();
        for i in 0..self.dim {
            let mut a = vec![BigRational::zero(); self.dim];
            a[i] = -BigRational::one();
            rows.push((a, BigRational::zero()));
        }
        rows
    }
}

/// Row `target` −= f · row `source`, from column `from` on.
fn subtract_scaled(m: &mut [Vec<BigRational>], target: usize, source: usize, from: usize, f: &BigRational) {
    let src = m[source][from..].to_vec();
    for (t, s) in m[target][from..].iter_mut().zip(&src) {
        *t -= f * s;
    }
}

/// Solves a square system exactly; `None` if singular.
fn solve(mut m: Vec<Vec<BigRational>>, mut rhs: Vec<BigRational>) -> Option<Vec<BigRational>> {
    let n = rhs.len();
    for col in 0..n {
        let piv = (col..n).find(|&r| !m[r][col].is_zero())?;
        m.swap(col, piv);
        rhs.swap(col, piv);
        for r in 0..n {
            if r != col && !m[r][col].is_zero() {
                let f = &m[r][col] / &m[col][col];
                subtract_scaled(&mut m, r, col, col, &f);
                let v = &f * &rhs[col];
                rhs[r] -= v;
            }
        }
    }
    Some((0..n).map(|i| &rhs[i] / &m[i][i]).collect())
}

fn rank(mut m: Vec<Vec<BigRational>>) -> usize {
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for col in 0..cols {
        let Some(piv) = (rank..rows).find(|&r| !m[r][col].is_zero()) else {
            continue;
        };
        m.swap(rank, piv);
        for r in rank + 1..rows {
            if !m[r][col].is_zero() {
                let f = &m[r][col] / &m[rank][col];
                subtract_scaled(&mut m, r, rank, col, &f);
            }
        }
        rank += 1;
    }
    rank
}

fn determinant(mut m: Vec<Vec<BigRational>>) -> BigRational {
    let n = m.len();
    let mut det = BigRational::one();
    for col in 0..n {
        let Some(piv) = (col..n).find(|&r| !m[r][col].is_zero()) else {
            return BigRational::zero();
        };
        if piv != col {
            m.swap(col, piv);
            det = -det;
        }
        det *= m[col][col].clone();
        for r in col + 1..n {
            if !m[r][col].is_zero() {
                let f = &m[r][col] / &m[col][col];
                subtract_scaled(&mut m, r, col, col, &f);
            }
        }
    }
    det
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

struct Vertex {
    point: Vec<BigRational>,
    tight: Vec<bool>,
}

fn dot(a: &[BigRational], b: &[BigRational]) -> BigRational {
    a.iter().zip(b).fold(BigRational::zero(), |acc, (x, y)| acc + x * y)
}

/// Vertices of {x : rows·x ≤ rhs}, each with the set of constraints it makes tight.
fn vertices(rows: &[(Vec<BigRational>, BigRational)], dim: usize) -> Vec<Vertex> {
    let mut out: Vec<Vertex> = Vec::new();
    for combo in combinations(rows.len(), dim) {
        let m = combo.iter().map(|&i| rows[i].0.clone()).collect();
        let r = combo.iter().map(|&i| rows[i].1.clone()).collect();
        let Some(x) = solve(m, r) else { continue };
        if rows.iter().all(|(a, b)| dot(a, &x) <= *b) && !out.iter().any(|v| v.point == x) {
            let tight = rows.iter().map(|(a, b)| dot(a, &x) == *b).collect();
            out.push(Vertex { point: x, tight });
        }
    }
    out
}

fn affine_dim(vs: &[Vertex], idx: &[usize]) -> usize {
    if idx.is_empty() {
        return 0;
    }
    let base = &vs[idx[0]].point;
    let diffs: Vec<Vec<BigRational>> =
        idx[1..].iter().map(|&i| vs[i].point.iter().zip(base).map(|(a, b)| a - b).collect()).collect();
    if diffs.is_empty() {
        0
    } else {
        rank(diffs)
    }
}

/// Pulling triangulation: cone from the first vertex over the facets not containing it.
fn triangulate(vs: &[Vertex], face: &[usize], d: usize, ncons: usize, out: &mut Vec<Vec<usize>>) {
    if d == 0 {
        out.push(vec![face[0]]);
        return;
    }
    let apex = face[0];
    let mut facets: Vec<Vec<usize>> = Vec::new();
    for c in 0..ncons {
        let sub: Vec<usize> = face.iter().copied().filter(|&v| vs[v].tight[c]).collect();
        if sub.len() == face.len() || sub.len() < d || sub.contains(&apex) {
            continue;
        }
        if affine_dim(vs, &sub) == d - 1 && !facets.contains(&sub) {
            facets.push(sub);
        }
    }
    for f in facets {
        let mut simplices = Vec::new();
        triangulate(vs, &f, d - 1, ncons, &mut simplices);
        for mut s in simplices {
            s.insert(0, apex);
            out.push(s);
        }
    }
}

fn factorial(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |a, k| a * BigInt::from(k))
}

/// The polytope's volume times its prefactor, as an exact rational.
pub fn polytope_volume(p: &PolytopeSpec) -> Result<BigRational, PolytopeError> {
    if p.dim == 0 {
        return Err(PolytopeError::ZeroDimension);
    }
    for (a, _) in &p.inequalities {
        if a.len() != p.dim {
            return Err(PolytopeError::Arity { expected: p.dim, got: a.len() });
        }
    }
    let rows = p.all_rows();
    if recession_cone_nontrivial(&rows, p.dim) {
        return Err(PolytopeError::Unbounded);
    }
    let vs = vertices(&rows, p.dim);
    let all: Vec<usize> = (0..vs.len()).collect();
    if vs.is_empty() || affine_dim(&vs, &all) < p.dim {
        return Ok(BigRational::zero());
    }
    let mut simplices = Vec::new();
    triangulate(&vs, &all, p.dim, rows.len(), &mut simplices);
    let mut vol = BigRational::zero();
    for s in simplices {
        let base = &vs[s[0]].point;
        let m: Vec<Vec<BigRational>> =
            s[1..].iter().map(|&i| vs[i].point.iter().zip(base).map(|(a, b)| a - b).collect()).collect();
        vol += determinant(m).abs();
    }
    Ok(vol / BigRational::from_integer(factorial(p.dim)) * &p.prefactor)
}

/// Largest value of each coordinate over the polytope, which lies in [0, box].
pub fn bounding_box(p: &PolytopeSpec) -> Vec<BigRational> {
    let vs = vertices(&p.all_rows(), p.dim);
    (0..p.dim)
        .map(|i| vs.iter().map(|v| v.point[i].clone()).max().unwrap_or_else(BigRational::zero))
        .collect()
}

/// Whether some nonzero direction d ≥ 0 has a·d ≤ 0 for every row. Such directions,
/// normalized by Σd = 1, form a polytope whose vertices are found directly.
fn recession_cone_nontrivial(rows: &[(Vec<BigRational>, BigRational)], dim: usize) -> bool {
    let mut cone: Vec<(Vec<BigRational>, BigRational)> =
        rows.iter().map(|(a, _)| (a.clone(), BigRational::zero())).collect();
    let ones = vec![BigRational::one(); dim];
    cone.push((ones.clone(), BigRational::one()));
    cone.push((ones.iter().map(|v| -v).collect(), -BigRational::one()));
    !vertices(&cone, dim).is_empty()
}

/// The α polytope of a surface; `None` for S2, whose value is taken as given.
pub fn alpha_polytope(id: SurfaceId) -> Option<PolytopeSpec> {
    match id {
        // basis E2, E3, E4, E5 with E1 distinguished; extra class E6 = E1 + E3 + E4 − E5
        SurfaceId::S1 => Some(
            PolytopeSpec::from_divisor_classes(&[2, 2, 2, 1, 3], &[vec![0, 1, 1, -1, 1]]).expect("static data"),
        ),
        SurfaceId::S2 => None,
        // basis E1, E2, E4, E5, E6 with E3 distinguished; extra class E7 = E1 + 2E2 + E3 + 2E5 − E6
        SurfaceId::S3 => Some(
            PolytopeSpec::from_divisor_classes(&[2, 4, 2, 3, 1, 3], &[vec![1, 2, 0, 2, -1, 1]]).expect("static data"),
        ),
    }
}

/// The region of log-exponents t (with ηᵢ = B^{tᵢ}) swept by the height conditions.
/// For S1 and S3 this is the α polytope; for S2 it is read off the height system
/// {η₁²η₂²η₃³η₄² ≤ B, η₁³η₂³η₃⁴η₄²η₅⁻² ≥ B} and its volume cross-checks α(S2).
pub fn volume_polytope(id: SurfaceId) -> PolytopeSpec {
    alpha_polytope(id).unwrap_or_else(|| {
        PolytopeSpec::from_integers(5, &[(&[2, 2, 3, 2, 0], 1), (&[-3, -3, -4, -2, 2], -1)], BigRational::one())
            .expect("static data")
    })
}

/// α as an exact rational.
pub fn alpha(id: SurfaceId) -> BigRational {
    match alpha_polytope(id) {
        Some(p) => polytope_volume(&p).expect("α polytopes are bounded"),
        None => BigRational::new(BigInt::one(), BigInt::from(8640)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn standard_simplex() {
        let p = PolytopeSpec::from_integers(3, &[(&[1, 1, 1], 1)], BigRational::one()).unwrap();
        assert_eq!(polytope_volume(&p).unwrap(), r(1, 6));
    }

    #[test]
    fn unit_square_and_unbounded() {
        let p = PolytopeSpec::from_integers(2, &[(&[1, 0], 1), (&[0, 1], 1)], BigRational::one()).unwrap();
        assert_eq!(polytope_volume(&p).unwrap(), BigRational::one());
        let u = PolytopeSpec::from_integers(2, &[(&[1, -1], 1)], BigRational::one()).unwrap();
        assert_eq!(polytope_volume(&u), Err(PolytopeError::Unbounded));
    }

    #[test]
    fn empty_interior_has_zero_volume() {
        let p = PolytopeSpec::from_integers(2, &[(&[1, 1], 0)], BigRational::one()).unwrap();
        assert_eq!(polytope_volume(&p).unwrap(), BigRational::zero());
    }

    #[test]
    fn alpha_values() {
        assert_eq!(alpha(SurfaceId::S1), r(1, 864));
        assert_eq!(alpha(SurfaceId::S2), r(1, 8640));
        assert_eq!(alpha(SurfaceId::S3), r(1, 21600));
    }

    #[test]
    fn s2_height_region_reproduces_alpha() {
        assert_eq!(polytope_volume(&volume_polytope(SurfaceId::S2)).unwrap(), alpha(SurfaceId::S2));
    }

    #[test]
    fn bounding_box_of_s1() {
        let b = bounding_box(&alpha_polytope(SurfaceId::S1).unwrap());
        assert_eq!(b, vec![r(1, 2), r(1, 2), r(1, 2), r(1, 3)]);
    }

    #[test]
    fn divisor_data_reproduces_listed_inequalities() {
        let s1 = PolytopeSpec::from_integers(4, &[(&[2, 2, 2, 1], 1), (&[2, -1, -1, 4], 1)], r(1, 3)).unwrap();
        assert_eq!(alpha_polytope(SurfaceId::S1).unwrap(), s1);
        let s3 =
            PolytopeSpec::from_integers(5, &[(&[2, 4, 2, 3, 1], 1), (&[-1, -2, 2, -3, 4], 1)], r(1, 3)).unwrap();
        assert_eq!(alpha_polytope(SurfaceId::S3).unwrap(), s3);
    }
}
