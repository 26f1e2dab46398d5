//! Floating-point convex regions and their simplex decompositions.
//!
//! A [`ConvexRegion`] is the quadrature-facing view of a polytope: real
//! offsets, vertices with their tight facet sets, and a deterministic fan
//! triangulation. Shifted polytopes and the truncated orthant model are both
//! represented this way. Regions are assumed simple (exactly `dim` facets
//! tight at each vertex), which every constructor checks.

use nalgebra::{DMatrix, DVector};

use crate::error::PolytopeError;

/// Tolerance for tightness and feasibility tests on float vertices.
const VERTEX_TOL: f64 = 1e-9;

/// A geometric simplex embedded in ℝⁿ (possibly of lower dimension).
#[derive(Clone, Debug, PartialEq)]
pub struct Simplex {
    pub vertices: Vec<Vec<f64>>,
}

impl Simplex {
    pub fn new(vertices: Vec<Vec<f64>>) -> Self {
        Self { vertices }
    }

    /// Intrinsic dimension k (number of vertices minus one).
    pub fn dim(&self) -> usize {
        self.vertices.len() - 1
    }

    fn edge_matrix(&self) -> DMatrix<f64> {
        let n = self.vertices[0].len();
        let k = self.dim();
        let v0 = &self.vertices[0];
        DMatrix::from_fn(n, k, |r, c| self.vertices[c + 1][r] - v0[r])
    }

    /// Jacobian factor of the affine map from the standard k-simplex:
    /// `|det E|` for full-dimensional simplices, `sqrt(det EᵀE)` otherwise.
    pub fn jacobian(&self) -> f64 {
        let k = self.dim();
        if k == 0 {
            return 1.0;
        }
        let e = self.edge_matrix();
        if e.nrows() == k {
            e.determinant().abs()
        } else {
            let g = e.transpose() * &e;
            g.determinant().max(0.0).sqrt()
        }
    }

    /// k-dimensional Euclidean volume.
    pub fn volume(&self) -> f64 {
        let k = self.dim();
        self.jacobian() / factorial(k)
    }

    pub fn diameter(&self) -> f64 {
        self.longest_edge().map(|(_, _, l)| l).unwrap_or(0.0)
    }

    fn longest_edge(&self) -> Option<(usize, usize, f64)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..self.vertices.len() {
            for j in (i + 1)..self.vertices.len() {
                let l = dist(&self.vertices[i], &self.vertices[j]);
                if best.map_or(true, |(_, _, b)| l > b) {
                    best = Some((i, j, l));
                }
            }
        }
        best
    }

    /// Splits the simplex at the midpoint of its longest edge.
    pub fn bisect(&self) -> (Simplex, Simplex) {
        let (i, j, _) = self.longest_edge().expect("cannot bisect a point");
        self.bisect_edge(i, j)
    }

    /// Splits the simplex at the midpoint of edge `(i, j)`.
    pub fn bisect_edge(&self, i: usize, j: usize) -> (Simplex, Simplex) {
        let mid: Vec<f64> = self.vertices[i]
            .iter()
            .zip(&self.vertices[j])
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        let mut a = self.vertices.clone();
        let mut b = self.vertices.clone();
        a[j] = mid.clone();
        b[i] = mid;
        (Simplex::new(a), Simplex::new(b))
    }

    /// Maps standard-simplex coordinates `b` (length k) to ℝⁿ.
    pub fn map_point(&self, b: &[f64], out: &mut [f64]) {
        let v0 = &self.vertices[0];
        out.copy_from_slice(v0);
        for (c, &bc) in b.iter().enumerate() {
            let vc = &self.vertices[c + 1];
            for r in 0..out.len() {
                out[r] += bc * (vc[r] - v0[r]);
            }
        }
    }

    pub fn centroid(&self) -> Vec<f64> {
        let n = self.vertices[0].len();
        let m = self.vertices.len() as f64;
        (0..n)
            .map(|r| self.vertices.iter().map(|v| v[r]).sum::<f64>() / m)
            .collect()
    }
}

/// Simplices with disjoint interiors covering a region.
#[derive(Clone, Debug, Default)]
pub struct SimplexDecomposition {
    pub simplices: Vec<Simplex>,
}

impl SimplexDecomposition {
    pub fn volume(&self) -> f64 {
        crate::sum::compensated_sum(&self.simplices.iter().map(Simplex::volume).collect::<Vec<_>>())
    }
}

/// A point in a combinatorial fan triangulation: either a polytope vertex or
/// the barycenter of the vertices of a face (given by its tight facet set).
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum FanPoint {
    Vertex(usize),
    Barycenter(Vec<usize>),
}

/// Vertices (by index) of the face cut out by `face`.
pub(crate) fn face_vertices(active: &[Vec<usize>], face: &[usize]) -> Vec<usize> {
    active
        .iter()
        .enumerate()
        .filter(|(_, a)| face.iter().all(|f| a.contains(f)))
        .map(|(i, _)| i)
        .collect()
}

/// Recursive fan triangulation of the face with tight set `face` of a simple
/// polytope: cone from the face barycenter over the triangulated sub-faces.
pub(crate) fn fan_triangulation(
    dim: usize,
    num_facets: usize,
    active: &[Vec<usize>],
    face: &[usize],
) -> Vec<Vec<FanPoint>> {
    let k = dim - face.len();
    let verts = face_vertices(active, face);
    if k == 0 {
        return verts.into_iter().map(|v| vec![FanPoint::Vertex(v)]).take(1).collect();
    }
    let mut out = Vec::new();
    for j in 0..num_facets {
        if face.contains(&j) {
            continue;
        }
        let mut sub = face.to_vec();
        sub.push(j);
        sub.sort_unstable();
        if face_vertices(active, &sub).is_empty() {
            continue;
        }
        for mut s in fan_triangulation(dim, num_facets, active, &sub) {
            s.insert(0, FanPoint::Barycenter(face.to_vec()));
            out.push(s);
        }
    }
    out
}

/// Convex region `{x : ⟨u_i, x⟩ ≤ c_i}` with real offsets.
#[derive(Clone, Debug)]
pub struct ConvexRegion {
    dim: usize,
    normals: Vec<Vec<f64>>,
    offsets: Vec<f64>,
    vertices: Vec<Vec<f64>>,
    active: Vec<Vec<usize>>,
    decomposition: SimplexDecomposition,
}

impl AsRef<ConvexRegion> for ConvexRegion {
    fn as_ref(&self) -> &ConvexRegion {
        self
    }
}

impl ConvexRegion {
    /// Builds a region from half-spaces, enumerating vertices in floating
    /// point. Fails if the region has no vertices or is not simple.
    pub fn from_halfspaces(
        dim: usize,
        normals: Vec<Vec<f64>>,
        offsets: Vec<f64>,
    ) -> Result<Self, PolytopeError> {
        let d = normals.len();
        if normals.iter().any(|u| u.len() != dim) {
            return Err(PolytopeError::DimensionMismatch {
                expected: dim,
                found: normals.iter().map(Vec::len).find(|&l| l != dim).unwrap_or(0),
            });
        }
        let scale = offsets.iter().fold(1.0_f64, |m, c| m.max(c.abs()));
        let tol = VERTEX_TOL * scale;
        let mut vertices: Vec<Vec<f64>> = Vec::new();
        for subset in combinations(d, dim) {
            let a = DMatrix::from_fn(dim, dim, |r, c| normals[subset[r]][c]);
            let rhs = DVector::from_fn(dim, |r, _| offsets[subset[r]]);
            if a.determinant().abs() < 1e-12 {
                continue;
            }
            let Some(sol) = a.lu().solve(&rhs) else { continue };
            let p: Vec<f64> = sol.iter().copied().collect();
            let feasible = normals
                .iter()
                .zip(&offsets)
                .all(|(u, c)| dot(u, &p) <= c + tol);
            if feasible && !vertices.iter().any(|v| dist(v, &p) < 1e3 * tol) {
                vertices.push(p);
            }
        }
        if vertices.is_empty() {
            return Err(PolytopeError::Degenerate);
        }
        vertices.sort_by(|a, b| lex_cmp(a, b));
        let active: Vec<Vec<usize>> = vertices
            .iter()
            .map(|v| {
                (0..d)
                    .filter(|&i| (offsets[i] - dot(&normals[i], v)).abs() <= tol)
                    .collect()
            })
            .collect();
        for (v, a) in vertices.iter().zip(&active) {
            if a.len() != dim {
                return Err(PolytopeError::NotSimple {
                    vertex: v.iter().map(|x| format!("{x}")).collect(),
                    tight: a.len(),
                });
            }
        }
        Ok(Self::assemble(dim, normals, offsets, vertices, active))
    }

    /// Builds a region from already-known vertices and tight sets.
    pub(crate) fn from_parts(
        dim: usize,
        normals: Vec<Vec<f64>>,
        offsets: Vec<f64>,
        vertices: Vec<Vec<f64>>,
        active: Vec<Vec<usize>>,
    ) -> Self {
        Self::assemble(dim, normals, offsets, vertices, active)
    }

    /// The box `[0, side]ⁿ`.
    pub fn cube(dim: usize, side: f64) -> Self {
        let mut normals = Vec::new();
        let mut offsets = Vec::new();
        for j in 0..dim {
            let mut u = vec![0.0; dim];
            u[j] = -1.0;
            normals.push(u);
            offsets.push(0.0);
        }
        for j in 0..dim {
            let mut u = vec![0.0; dim];
            u[j] = 1.0;
            normals.push(u);
            offsets.push(side);
        }
        Self::from_halfspaces(dim, normals, offsets).expect("a box is a simple polytope")
    }

    fn assemble(
        dim: usize,
        normals: Vec<Vec<f64>>,
        offsets: Vec<f64>,
        vertices: Vec<Vec<f64>>,
        active: Vec<Vec<usize>>,
    ) -> Self {
        let mut region = Self {
            dim,
            normals,
            offsets,
            vertices,
            active,
            decomposition: SimplexDecomposition::default(),
        };
        region.decomposition = SimplexDecomposition {
            simplices: region.face_simplices(&[]),
        };
        region
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_facets(&self) -> usize {
        self.normals.len()
    }

    pub fn normals(&self) -> &[Vec<f64>] {
        &self.normals
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn active_sets(&self) -> &[Vec<usize>] {
        &self.active
    }

    pub fn decomposition(&self) -> &SimplexDecomposition {
        &self.decomposition
    }

    pub fn volume(&self) -> f64 {
        self.decomposition.volume()
    }

    /// Slack `c_i − ⟨u_i, x⟩` of every inequality.
    pub fn slacks(&self, x: &[f64]) -> Vec<f64> {
        self.normals
            .iter()
            .zip(&self.offsets)
            .map(|(u, c)| c - dot(u, x))
            .collect()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.slacks(x).iter().all(|&s| s >= -tol)
    }

    /// Vertex coordinates of the face with tight set `face`.
    pub fn face_points(&self, face: &[usize]) -> Vec<Vec<f64>> {
        face_vertices(&self.active, face)
            .into_iter()
            .map(|i| self.vertices[i].clone())
            .collect()
    }

    /// Fan triangulation of a face (the whole region for an empty set).
    pub fn face_simplices(&self, face: &[usize]) -> Vec<Simplex> {
        if face.len() > self.dim || face_vertices(&self.active, face).is_empty() {
            return Vec::new();
        }
        fan_triangulation(self.dim, self.normals.len(), &self.active, face)
            .into_iter()
            .map(|pts| {
                Simplex::new(
                    pts.iter()
                        .map(|p| match p {
                            FanPoint::Vertex(i) => self.vertices[*i].clone(),
                            FanPoint::Barycenter(f) => {
                                let vs = self.face_points(f);
                                let m = vs.len() as f64;
                                (0..self.dim)
                                    .map(|r| vs.iter().map(|v| v[r]).sum::<f64>() / m)
                                    .collect()
                            }
                        })
                        .collect(),
                )
            })
            .collect()
    }

    /// Axis-aligned bounding box `(lower, upper)`.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for v in &self.vertices {
            for r in 0..self.dim {
                lo[r] = lo[r].min(v[r]);
                hi[r] = hi[r].max(v[r]);
            }
        }
        (lo, hi)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// All k-subsets of `0..n` in lexicographic order.
pub(crate) fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
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
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_decomposition_covers_volume() {
        for dim in 1..=3 {
            let c = ConvexRegion::cube(dim, 2.0);
            assert_eq!(c.vertices().len(), 1 << dim);
            assert!((c.volume() - 2f64.powi(dim as i32)).abs() < 1e-12);
        }
    }

    #[test]
    fn bisection_preserves_volume() {
        let s = Simplex::new(vec![vec![0.0, 0.0], vec![3.0, 0.0], vec![0.0, 1.0]]);
        let (a, b) = s.bisect();
        assert!((a.volume() + b.volume() - s.volume()).abs() < 1e-15);
        assert!(a.diameter() < s.diameter() + 1e-15);
    }

    #[test]
    fn lower_dimensional_simplex_volume() {
        let seg = Simplex::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!((seg.volume() - 2f64.sqrt()).abs() < 1e-15);
        let pt = Simplex::new(vec![vec![0.5]]);
        assert_eq!(pt.volume(), 1.0);
    }

    #[test]
    fn unbounded_or_empty_halfspaces_rejected() {
        let r = ConvexRegion::from_halfspaces(1, vec![vec![1.0], vec![-1.0]], vec![-1.0, -1.0]);
        assert!(r.is_err());
    }

    #[test]
    fn combinations_enumerates_subsets() {
        assert_eq!(combinations(4, 2).len(), 6);
        assert_eq!(combinations(3, 0), vec![Vec::<usize>::new()]);
        assert_eq!(combinations(3, 3), vec![vec![0, 1, 2]]);
    }
}
