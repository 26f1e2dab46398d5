//! Delzant polytopes in exact arithmetic.
//!
//! A polytope is stored as its facet inequalities `⟨u_i, x⟩ ≤ c_i` with
//! outward primitive integer normals. Vertices are found by exact rational
//! solves over all n-subsets of facets, so the Delzant test never suffers a
//! rounding false negative. The lattice distance to facet i is
//! `ℓ_i(x) = c_i − ⟨u_i, x⟩`.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, PolytopeError, Result};
use crate::region::{combinations, face_vertices, fan_triangulation, ConvexRegion, FanPoint};

type Q = BigRational;

fn q(v: i64) -> Q {
    Q::from_integer(BigInt::from(v))
}

fn q_to_f64(v: &Q) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

/// One facet inequality `⟨normal, x⟩ ≤ offset`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Facet {
    pub normal: Vec<i64>,
    pub offset: i64,
}

/// On-disk polytope document.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolytopeDocument {
    pub dim: usize,
    pub facets: Vec<Facet>,
}

/// A vertex together with the facets tight at it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vertex {
    pub point: Vec<BigRational>,
    pub active: Vec<usize>,
}

impl Vertex {
    pub fn to_f64(&self) -> Vec<f64> {
        self.point.iter().map(q_to_f64).collect()
    }
}

/// Lattice distances `ℓ_i(x)` of a point to every facet.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeDistanceVector {
    pub values: Vec<f64>,
}

impl LatticeDistanceVector {
    pub fn is_inside(&self) -> bool {
        self.values.iter().all(|&l| l >= 0.0)
    }
}

/// A face given by the facets that cut it out.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Face {
    pub active_set: Vec<usize>,
    pub dimension: usize,
}

/// Unimodular affine chart `x ↦ Mx + t` sending a vertex to the origin and
/// the lattice distances of its n facets to the coordinate functions.
#[derive(Clone, Debug, PartialEq)]
pub struct VertexChart {
    pub vertex: Vec<BigRational>,
    /// Facets tight at the vertex, in the order of the chart coordinates.
    pub facets: Vec<usize>,
    pub matrix: Vec<Vec<i64>>,
    pub translation: Vec<i64>,
}

impl VertexChart {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matrix
            .iter()
            .zip(&self.translation)
            .map(|(row, t)| *t as f64 + row.iter().zip(x).map(|(a, b)| *a as f64 * b).sum::<f64>())
            .collect()
    }

    pub fn determinant(&self) -> i64 {
        let m: Vec<Vec<Q>> = self
            .matrix
            .iter()
            .map(|r| r.iter().map(|&v| q(v)).collect())
            .collect();
        det_exact(m).to_integer().to_i64().unwrap_or(0)
    }

    /// Integer inverse of the linear part; its columns, negated, are the
    /// primitive edge directions leaving the vertex.
    pub fn inverse_matrix(&self) -> Vec<Vec<i64>> {
        integer_inverse(&self.matrix).expect("chart matrix is unimodular")
    }
}

/// A polytope with offsets shifted by a real vector `h`.
#[derive(Clone, Debug)]
pub struct ShiftedPolytope {
    pub shift: Vec<f64>,
    region: ConvexRegion,
}

impl ShiftedPolytope {
    pub fn region(&self) -> &ConvexRegion {
        &self.region
    }
}

impl AsRef<ConvexRegion> for ShiftedPolytope {
    fn as_ref(&self) -> &ConvexRegion {
        &self.region
    }
}

/// A validated Delzant polytope.
#[derive(Clone, Debug)]
pub struct DelzantPolytope {
    dim: usize,
    facets: Vec<Facet>,
    vertices: Vec<Vertex>,
    region: ConvexRegion,
}

impl AsRef<ConvexRegion> for DelzantPolytope {
    fn as_ref(&self) -> &ConvexRegion {
        &self.region
    }
}

impl DelzantPolytope {
    /// Parses and validates a polytope JSON document.
    pub fn from_json(source: &str) -> Result<Self, PolytopeError> {
        let doc: PolytopeDocument =
            serde_json::from_str(source).map_err(|e| PolytopeError::Parse(e.to_string()))?;
        Self::new(doc.dim, doc.facets)
    }

    pub fn to_document(&self) -> PolytopeDocument {
        PolytopeDocument {
            dim: self.dim,
            facets: self.facets.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_document()).expect("document serializes")
    }

    /// Validates facet data and runs the Delzant check.
    pub fn new(dim: usize, facets: Vec<Facet>) -> Result<Self, PolytopeError> {
        if dim == 0 || facets.len() < dim + 1 {
            return Err(PolytopeError::TooFewFacets);
        }
        for f in &facets {
            if f.normal.len() != dim {
                return Err(PolytopeError::DimensionMismatch {
                    expected: dim,
                    found: f.normal.len(),
                });
            }
        }
        for (i, f) in facets.iter().enumerate() {
            let g = f.normal.iter().fold(0i64, |g, &v| g.gcd(&v));
            if g != 1 {
                return Err(PolytopeError::NonPrimitiveNormal {
                    facet: i,
                    normal: f.normal.clone(),
                });
            }
        }
        check_bounded(dim, &facets)?;

        let d = facets.len();
        let normals_q: Vec<Vec<Q>> = facets
            .iter()
            .map(|f| f.normal.iter().map(|&v| q(v)).collect())
            .collect();
        let mut points: Vec<Vec<Q>> = Vec::new();
        for subset in combinations(d, dim) {
            let a: Vec<Vec<Q>> = subset.iter().map(|&i| normals_q[i].clone()).collect();
            let b: Vec<Q> = subset.iter().map(|&i| q(facets[i].offset)).collect();
            let Some(p) = solve_exact(a, b) else { continue };
            let feasible = facets
                .iter()
                .zip(&normals_q)
                .all(|(f, u)| dot_q(u, &p) <= q(f.offset));
            if feasible && !points.contains(&p) {
                points.push(p);
            }
        }
        if points.is_empty() {
            return Err(PolytopeError::Degenerate);
        }
        points.sort();
        if affine_rank(&points) != dim {
            return Err(PolytopeError::Degenerate);
        }
        let vertices: Vec<Vertex> = points
            .into_iter()
            .map(|p| {
                let active = (0..d)
                    .filter(|&i| dot_q(&normals_q[i], &p) == q(facets[i].offset))
                    .collect();
                Vertex { point: p, active }
            })
            .collect();

        for v in &vertices {
            if v.active.len() != dim {
                return Err(PolytopeError::NotSimple {
                    vertex: v.point.iter().map(|x| x.to_string()).collect(),
                    tight: v.active.len(),
                });
            }
        }
        for i in 0..d {
            let on: Vec<Vec<Q>> = vertices
                .iter()
                .filter(|v| v.active.contains(&i))
                .map(|v| v.point.clone())
                .collect();
            if on.len() < dim || affine_rank(&on) != dim - 1 {
                return Err(PolytopeError::RedundantFacet { facet: i });
            }
        }
        for v in &vertices {
            let m: Vec<Vec<Q>> = v.active.iter().map(|&i| normals_q[i].clone()).collect();
            let det = det_exact(m);
            if det.abs() != Q::one() {
                return Err(PolytopeError::NonUnimodularVertex {
                    vertex: v.point.iter().map(|x| x.to_string()).collect(),
                    facets: v.active.clone(),
                    det: det.to_string(),
                });
            }
        }

        let region = ConvexRegion::from_parts(
            dim,
            facets
                .iter()
                .map(|f| f.normal.iter().map(|&v| v as f64).collect())
                .collect(),
            facets.iter().map(|f| f.offset as f64).collect(),
            vertices.iter().map(Vertex::to_f64).collect(),
            vertices.iter().map(|v| v.active.clone()).collect(),
        );
        Ok(Self {
            dim,
            facets,
            vertices,
            region,
        })
    }

    fn from_spec(dim: usize, spec: &[(&[i64], i64)]) -> Self {
        Self::new(
            dim,
            spec.iter()
                .map(|(n, c)| Facet {
                    normal: n.to_vec(),
                    offset: *c,
                })
                .collect(),
        )
        .expect("built-in polytope is Delzant")
    }

    /// `[0, 1]`.
    pub fn interval() -> Self {
        Self::from_spec(1, &[(&[-1], 0), (&[1], 1)])
    }

    /// `[0, 1]ⁿ`, facets ordered `−e_1..−e_n, e_1..e_n`.
    pub fn cube(dim: usize) -> Self {
        let mut facets = Vec::new();
        for sign in [-1i64, 1] {
            for j in 0..dim {
                let mut normal = vec![0; dim];
                normal[j] = sign;
                facets.push(Facet {
                    normal,
                    offset: if sign < 0 { 0 } else { 1 },
                });
            }
        }
        Self::new(dim, facets).expect("cube is Delzant")
    }

    pub fn unit_square() -> Self {
        Self::cube(2)
    }

    /// Standard simplex `{x ≥ 0, Σx ≤ 1}`.
    pub fn simplex(dim: usize) -> Self {
        let mut facets = Vec::new();
        for j in 0..dim {
            let mut normal = vec![0; dim];
            normal[j] = -1;
            facets.push(Facet { normal, offset: 0 });
        }
        facets.push(Facet {
            normal: vec![1; dim],
            offset: 1,
        });
        Self::new(dim, facets).expect("simplex is Delzant")
    }

    /// The trapezoid `{x ≥ 0, 0 ≤ y ≤ 1, x + y ≤ 2}`.
    pub fn hirzebruch_trapezoid() -> Self {
        Self::from_spec(2, &[(&[-1, 0], 0), (&[0, -1], 0), (&[0, 1], 1), (&[1, 1], 2)])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn num_facets(&self) -> usize {
        self.facets.len()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn region(&self) -> &ConvexRegion {
        &self.region
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: len,
            });
        }
        Ok(())
    }

    /// `ℓ_i(x) = c_i − ⟨u_i, x⟩` for every facet; negative entries mean x ∉ Δ.
    pub fn lattice_distances(&self, x: &[f64]) -> Result<LatticeDistanceVector> {
        self.check_dim(x.len())?;
        Ok(LatticeDistanceVector {
            values: self
                .facets
                .iter()
                .map(|f| {
                    f.offset as f64
                        - f.normal
                            .iter()
                            .zip(x)
                            .map(|(u, v)| *u as f64 * v)
                            .sum::<f64>()
                })
                .collect(),
        })
    }

    pub fn lattice_distances_exact(&self, x: &[BigRational]) -> Result<Vec<BigRational>> {
        self.check_dim(x.len())?;
        Ok(self
            .facets
            .iter()
            .map(|f| {
                let u: Vec<Q> = f.normal.iter().map(|&v| q(v)).collect();
                q(f.offset) - dot_q(&u, x)
            })
            .collect())
    }

    /// `N c_i − ⟨u_i, k⟩`, i.e. `N ℓ_i(k/N)`, exactly.
    pub fn scaled_lattice_distances(&self, k: &[i64], level: u32) -> Vec<i64> {
        self.facets
            .iter()
            .map(|f| {
                let s: i128 = f
                    .normal
                    .iter()
                    .zip(k)
                    .map(|(&u, &v)| i128::from(u) * i128::from(v))
                    .sum();
                (i128::from(level) * i128::from(f.offset) - s) as i64
            })
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.lattice_distances(x).map(|l| l.is_inside()).unwrap_or(false)
    }

    pub fn contains_exact(&self, x: &[BigRational]) -> bool {
        self.lattice_distances_exact(x)
            .map(|l| l.iter().all(|v| !v.is_negative()))
            .unwrap_or(false)
    }

    /// Facets with `|ℓ_i(x)| ≤ tol`.
    pub fn active_set(&self, x: &[f64], tol: f64) -> Result<Vec<usize>> {
        Ok(self
            .lattice_distances(x)?
            .values
            .iter()
            .enumerate()
            .filter(|(_, l)| l.abs() <= tol)
            .map(|(i, _)| i)
            .collect())
    }

    /// Lattice points of `NΔ`, i.e. `k ∈ ℤⁿ` with `⟨u_i, k⟩ ≤ N c_i`, in
    /// lexicographic order.
    pub fn lattice_points(&self, level: u32) -> Vec<Vec<i64>> {
        let n = self.dim;
        let nq = q(i64::from(level));
        let mut lo = vec![i64::MAX; n];
        let mut hi = vec![i64::MIN; n];
        for v in &self.vertices {
            for r in 0..n {
                let s = &v.point[r] * &nq;
                lo[r] = lo[r].min(s.floor().to_integer().to_i64().unwrap_or(i64::MIN));
                hi[r] = hi[r].max(s.ceil().to_integer().to_i64().unwrap_or(i64::MAX));
            }
        }
        let mut out = Vec::new();
        let mut k = lo.clone();
        loop {
            if self.scaled_lattice_distances(&k, level).iter().all(|&l| l >= 0) {
                out.push(k.clone());
            }
            let mut r = n;
            loop {
                if r == 0 {
                    return out;
                }
                r -= 1;
                if k[r] < hi[r] {
                    k[r] += 1;
                    for s in (r + 1)..n {
                        k[s] = lo[s];
                    }
                    break;
                }
            }
        }
    }

    pub fn is_lattice_point(&self, k: &[i64], level: u32) -> bool {
        k.len() == self.dim && self.scaled_lattice_distances(k, level).iter().all(|&l| l >= 0)
    }

    /// All proper faces, ordered by decreasing dimension then tight set.
    pub fn faces(&self) -> Vec<Face> {
        let mut faces: Vec<Face> = Vec::new();
        for v in &self.vertices {
            for size in 1..=self.dim {
                for sub in combinations(self.dim, size) {
                    let set: Vec<usize> = sub.iter().map(|&i| v.active[i]).collect();
                    let face = Face {
                        dimension: self.dim - set.len(),
                        active_set: set,
                    };
                    if !faces.contains(&face) {
                        faces.push(face);
                    }
                }
            }
        }
        faces.sort_by(|a, b| {
            b.dimension
                .cmp(&a.dimension)
                .then_with(|| a.active_set.cmp(&b.active_set))
        });
        faces
    }

    /// The face whose relative interior contains x (tight facets within `tol`).
    pub fn face_of(&self, x: &[f64], tol: f64) -> Result<Face> {
        let set = self.active_set(x, tol)?;
        Ok(Face {
            dimension: self.dim.saturating_sub(set.len()),
            active_set: set,
        })
    }

    pub fn face_vertices(&self, face: &Face) -> Vec<&Vertex> {
        let active: Vec<Vec<usize>> = self.vertices.iter().map(|v| v.active.clone()).collect();
        face_vertices(&active, &face.active_set)
            .into_iter()
            .map(|i| &self.vertices[i])
            .collect()
    }

    /// Unimodular chart at a vertex.
    pub fn vertex_chart(&self, vertex: &[BigRational]) -> Result<VertexChart, PolytopeError> {
        let v = self
            .vertices
            .iter()
            .find(|v| v.point.as_slice() == vertex)
            .ok_or(PolytopeError::NotAVertex)?;
        Ok(VertexChart {
            vertex: v.point.clone(),
            facets: v.active.clone(),
            matrix: v
                .active
                .iter()
                .map(|&i| self.facets[i].normal.iter().map(|&u| -u).collect())
                .collect(),
            translation: v.active.iter().map(|&i| self.facets[i].offset).collect(),
        })
    }

    pub fn vertex_chart_at(&self, index: usize) -> Result<VertexChart, PolytopeError> {
        let v = self.vertices.get(index).ok_or(PolytopeError::NotAVertex)?;
        self.vertex_chart(&v.point.clone())
    }

    /// Integer edge directions spanning the face's lattice, taken from a
    /// vertex chart of one of its vertices.
    pub fn face_lattice_basis(&self, face: &Face) -> Vec<Vec<i64>> {
        let Some(v) = self.face_vertices(face).first().map(|v| v.point.clone()) else {
            return Vec::new();
        };
        let chart = self.vertex_chart(&v).expect("face vertex is a vertex");
        let inv = chart.inverse_matrix();
        chart
            .facets
            .iter()
            .enumerate()
            .filter(|(_, f)| !face.active_set.contains(f))
            .map(|(col, _)| (0..self.dim).map(|r| -inv[r][col]).collect())
            .collect()
    }

    /// Covolume of the face's lattice: the Euclidean volume of a fundamental
    /// cell, which converts Euclidean face measure into lattice-normalized
    /// measure.
    pub fn face_covolume(&self, face: &Face) -> f64 {
        let basis = self.face_lattice_basis(face);
        if basis.is_empty() {
            return 1.0;
        }
        let k = basis.len();
        let g = nalgebra::DMatrix::from_fn(k, k, |a, b| {
            basis[a]
                .iter()
                .zip(&basis[b])
                .map(|(x, y)| (*x as f64) * (*y as f64))
                .sum::<f64>()
        });
        g.determinant().sqrt()
    }

    /// `Δ_h = {⟨u_i, x⟩ ≤ c_i + h_i}`; rejected if the combinatorial type changes.
    pub fn shift(&self, h: &[f64]) -> Result<ShiftedPolytope, PolytopeError> {
        if h.len() != self.facets.len() {
            return Err(PolytopeError::DimensionMismatch {
                expected: self.facets.len(),
                found: h.len(),
            });
        }
        let expected = self.vertices.len();
        let region = ConvexRegion::from_halfspaces(
            self.dim,
            self.region.normals().to_vec(),
            self.facets
                .iter()
                .zip(h)
                .map(|(f, hi)| f.offset as f64 + hi)
                .collect(),
        )
        .map_err(|_| PolytopeError::CombinatorialChange { expected, found: 0 })?;
        let mut mine: Vec<&Vec<usize>> = self.vertices.iter().map(|v| &v.active).collect();
        let mut theirs: Vec<&Vec<usize>> = region.active_sets().iter().collect();
        mine.sort();
        theirs.sort();
        if mine != theirs {
            return Err(PolytopeError::CombinatorialChange {
                expected,
                found: region.vertices().len(),
            });
        }
        Ok(ShiftedPolytope {
            shift: h.to_vec(),
            region,
        })
    }

    /// `NΔ`.
    pub fn dilate(&self, level: u32) -> Self {
        Self::new(
            self.dim,
            self.facets
                .iter()
                .map(|f| Facet {
                    normal: f.normal.clone(),
                    offset: f.offset * i64::from(level),
                })
                .collect(),
        )
        .expect("dilate of a Delzant polytope is Delzant")
    }

    /// Image under the lattice map `x ↦ Mx + t` with `M ∈ GL(n, ℤ)`.
    pub fn apply_unimodular(&self, m: &[Vec<i64>], t: &[i64]) -> Result<Self, PolytopeError> {
        let inv = integer_inverse(m).ok_or_else(|| {
            let det = det_exact(
                m.iter()
                    .map(|r| r.iter().map(|&v| q(v)).collect())
                    .collect(),
            );
            PolytopeError::NotUnimodular {
                det: det.to_integer().to_i64().unwrap_or(0),
            }
        })?;
        let facets = self
            .facets
            .iter()
            .map(|f| {
                let normal: Vec<i64> = (0..self.dim)
                    .map(|j| (0..self.dim).map(|r| f.normal[r] * inv[r][j]).sum())
                    .collect();
                let shift: i64 = normal.iter().zip(t).map(|(a, b)| a * b).sum();
                Facet {
                    offset: f.offset + shift,
                    normal,
                }
            })
            .collect();
        Self::new(self.dim, facets)
    }

    /// Exact volume from the rational fan triangulation.
    pub fn volume_exact(&self) -> BigRational {
        let active: Vec<Vec<usize>> = self.vertices.iter().map(|v| v.active.clone()).collect();
        let mut total = Q::zero();
        for simplex in fan_triangulation(self.dim, self.facets.len(), &active, &[]) {
            let pts: Vec<Vec<Q>> = simplex
                .iter()
                .map(|p| match p {
                    FanPoint::Vertex(i) => self.vertices[*i].point.clone(),
                    FanPoint::Barycenter(f) => {
                        let vs = face_vertices(&active, f);
                        let m = q(vs.len() as i64);
                        (0..self.dim)
                            .map(|r| {
                                vs.iter()
                                    .fold(Q::zero(), |acc, &i| acc + &self.vertices[i].point[r])
                                    / &m
                            })
                            .collect()
                    }
                })
                .collect();
            let e: Vec<Vec<Q>> = (0..self.dim)
                .map(|r| (1..=self.dim).map(|c| &pts[c][r] - &pts[0][r]).collect())
                .collect();
            total += det_exact(e).abs();
        }
        let fact: i64 = (1..=self.dim as i64).product();
        total / q(fact)
    }
}

fn dot_q(a: &[Q], b: &[Q]) -> Q {
    a.iter().zip(b).fold(Q::zero(), |acc, (x, y)| acc + x * y)
}

/// Gaussian elimination; `None` if singular.
fn solve_exact(mut a: Vec<Vec<Q>>, mut b: Vec<Q>) -> Option<Vec<Q>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = &a[r][col] / &a[col][col];
                for c in col..n {
                    let v = &f * &a[col][c];
                    a[r][c] -= v;
                }
                let v = &f * &b[col];
                b[r] -= v;
            }
        }
    }
    Some((0..n).map(|i| &b[i] / &a[i][i]).collect())
}

fn det_exact(mut a: Vec<Vec<Q>>) -> Q {
    let n = a.len();
    let mut det = Q::one();
    for col in 0..n {
        let Some(piv) = (col..n).find(|&r| !a[r][col].is_zero()) else {
            return Q::zero();
        };
        if piv != col {
            a.swap(col, piv);
            det = -det;
        }
        det *= &a[col][col];
        for r in (col + 1)..n {
            if !a[r][col].is_zero() {
                let f = &a[r][col] / &a[col][col];
                for c in col..n {
                    let v = &f * &a[col][c];
                    a[r][c] -= v;
                }
            }
        }
    }
    det
}

fn rank_exact(mut a: Vec<Vec<Q>>) -> usize {
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    let mut rank = 0;
    for col in 0..cols {
        let Some(piv) = (rank..rows).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(rank, piv);
        for r in (rank + 1)..rows {
            if !a[r][col].is_zero() {
                let f = &a[r][col] / &a[rank][col];
                for c in col..cols {
                    let v = &f * &a[rank][c];
                    a[r][c] -= v;
                }
            }
        }
        rank += 1;
    }
    rank
}

fn affine_rank(points: &[Vec<Q>]) -> usize {
    if points.len() <= 1 {
        return 0;
    }
    let diffs = points[1..]
        .iter()
        .map(|p| p.iter().zip(&points[0]).map(|(a, b)| a - b).collect())
        .collect();
    rank_exact(diffs)
}

/// A nonzero vector orthogonal to every row (rows must be rank-deficient).
fn null_vector(mut a: Vec<Vec<Q>>, cols: usize) -> Vec<Q> {
    let rows = a.len();
    let mut pivots = Vec::new();
    let mut rank = 0;
    for col in 0..cols {
        let Some(piv) = (rank..rows).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(rank, piv);
        let lead = a[rank][col].clone();
        for c in 0..cols {
            a[rank][c] = &a[rank][c] / &lead;
        }
        for r in 0..rows {
            if r != rank && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for c in 0..cols {
                    let v = &f * &a[rank][c];
                    a[r][c] -= v;
                }
            }
        }
        pivots.push(col);
        rank += 1;
    }
    let free = (0..cols).find(|c| !pivots.contains(c)).unwrap_or(0);
    let mut v = vec![Q::zero(); cols];
    v[free] = Q::one();
    for (r, &pc) in pivots.iter().enumerate() {
        v[pc] = -a[r][free].clone();
    }
    v
}

fn integer_inverse(m: &[Vec<i64>]) -> Option<Vec<Vec<i64>>> {
    let n = m.len();
    let a: Vec<Vec<Q>> = m.iter().map(|r| r.iter().map(|&v| q(v)).collect()).collect();
    if det_exact(a.clone()).abs() != Q::one() {
        return None;
    }
    let mut inv = vec![vec![0i64; n]; n];
    for c in 0..n {
        let e: Vec<Q> = (0..n).map(|r| q(i64::from(r == c))).collect();
        let col = solve_exact(a.clone(), e)?;
        for r in 0..n {
            inv[r][c] = col[r].to_integer().to_i64()?;
        }
    }
    Some(inv)
}

/// The recession cone `{v : ⟨u_i, v⟩ ≤ 0}` must be trivial.
fn check_bounded(dim: usize, facets: &[Facet]) -> Result<(), PolytopeError> {
    let normals: Vec<Vec<Q>> = facets
        .iter()
        .map(|f| f.normal.iter().map(|&v| q(v)).collect())
        .collect();
    let unbounded = |v: &[Q]| PolytopeError::Unbounded {
        direction: v.iter().map(|x| x.to_string()).collect(),
    };
    if rank_exact(normals.clone()) < dim {
        return Err(unbounded(&null_vector(normals, dim)));
    }
    for subset in combinations(facets.len(), dim - 1) {
        let rows: Vec<Vec<Q>> = subset.iter().map(|&i| normals[i].clone()).collect();
        // Generalized cross product: the null direction of n−1 rows.
        let dir: Vec<Q> = (0..dim)
            .map(|j| {
                let minor: Vec<Vec<Q>> = rows
                    .iter()
                    .map(|r| {
                        r.iter()
                            .enumerate()
                            .filter(|(c, _)| *c != j)
                            .map(|(_, v)| v.clone())
                            .collect()
                    })
                    .collect();
                let d = det_exact(minor);
                if j % 2 == 0 {
                    d
                } else {
                    -d
                }
            })
            .collect();
        if dir.iter().all(Zero::is_zero) {
            continue;
        }
        for sign in [Q::one(), -Q::one()] {
            let v: Vec<Q> = dir.iter().map(|x| x * &sign).collect();
            if normals.iter().all(|u| !dot_q(u, &v).is_positive()) {
                return Err(unbounded(&v));
            }
        }
    }
    Ok(())
}
