use nalgebra::Matrix2;

use super::predicates::{cross, det3, orient2d, Orientation};
use super::{triangulate_structural, GeometryError, Point, Polygon, Result, TriMesh};

/// Straight-line family `f_t = (1 - t) Id + t f` on a source mesh.
///
/// `f` is given by the destination of every mesh point; it is affine on each
/// triangle, so `f_t` is piecewise linear for every `t`.
#[derive(Debug, Clone)]
pub struct DeformationPath {
    source: TriMesh,
    target: Vec<Point>,
    target_polygon: Option<Polygon>,
}

/// Coefficients of the orientation determinant of one triangle along the
/// path: `det(t) = c0 + c1 t + c2 t^2` (twice the signed area).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientationQuadratic {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl OrientationQuadratic {
    pub fn eval(&self, t: f64) -> f64 {
        self.c0 + t * (self.c1 + t * self.c2)
    }

    /// Minimum over `[0, 1]` and where it is attained.
    pub fn min_on_unit(&self) -> (f64, f64) {
        let mut best = (self.eval(0.0), 0.0);
        let v1 = self.eval(1.0);
        if v1 < best.0 {
            best = (v1, 1.0);
        }
        if self.c2 > 0.0 {
            let tv = -self.c1 / (2.0 * self.c2);
            if tv > 0.0 && tv < 1.0 {
                let vv = self.eval(tv);
                if vv < best.0 {
                    best = (vv, tv);
                }
            }
        }
        best
    }

    /// Sub-interval of `[0, 1]` where `det(t) <= 0`, if any.
    pub fn nonpositive_interval(&self) -> Option<(f64, f64)> {
        let (m, tm) = self.min_on_unit();
        if m > 0.0 {
            return None;
        }
        let roots = self.real_roots();
        let lo = roots
            .iter()
            .copied()
            .filter(|&r| r <= tm)
            .fold(0.0, f64::max);
        let hi = roots
            .iter()
            .copied()
            .filter(|&r| r >= tm)
            .fold(1.0, f64::min);
        Some((lo.clamp(0.0, 1.0), hi.clamp(0.0, 1.0)))
    }

    fn real_roots(&self) -> Vec<f64> {
        let (a, b, c) = (self.c2, self.c1, self.c0);
        let scale = a.abs().max(b.abs()).max(c.abs());
        if scale == 0.0 {
            return vec![];
        }
        if a.abs() <= 1e-15 * scale {
            return if b != 0.0 { vec![-c / b] } else { vec![] };
        }
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return vec![];
        }
        // numerically stable pair
        let q = -0.5 * (b + b.signum() * disc.sqrt());
        let mut r = vec![q / a];
        if q != 0.0 {
            r.push(c / q);
        }
        r.sort_by(f64::total_cmp);
        r
    }
}

impl DeformationPath {
    /// Builds a path from explicit point targets and checks it exactly.
    pub fn new(
        source: TriMesh,
        target: Vec<Point>,
        target_polygon: Option<Polygon>,
    ) -> Result<Self> {
        if target.len() != source.num_points() {
            return Err(GeometryError::VertexCountMismatch(
                source.num_points(),
                target.len(),
            ));
        }
        let path = DeformationPath {
            source,
            target,
            target_polygon,
        };
        path.check_orientation()?;
        Ok(path)
    }

    pub fn source(&self) -> &TriMesh {
        &self.source
    }

    pub fn target_points(&self) -> &[Point] {
        &self.target
    }

    pub fn target_polygon(&self) -> Option<&Polygon> {
        self.target_polygon.as_ref()
    }

    pub fn orientation_quadratic(&self, tri: usize) -> OrientationQuadratic {
        let [i, j, k] = self.source.triangles()[tri];
        let p = self.source.points();
        let e1 = p[j] - p[i];
        let e2 = p[k] - p[i];
        let g1 = (self.target[j] - p[j]) - (self.target[i] - p[i]);
        let g2 = (self.target[k] - p[k]) - (self.target[i] - p[i]);
        OrientationQuadratic {
            c0: cross(e1, e2),
            c1: cross(e1, g2) + cross(g1, e2),
            c2: cross(g1, g2),
        }
    }

    /// Exact check that every triangle stays positively oriented on `[0, 1]`.
    pub fn check_orientation(&self) -> Result<()> {
        for t in 0..self.source.num_triangles() {
            let q = self.orientation_quadratic(t);
            if let Some((t_lo, t_hi)) = q.nonpositive_interval() {
                return Err(GeometryError::DegeneratesAlongPath {
                    triangle: t,
                    t_lo,
                    t_hi,
                });
            }
        }
        Ok(())
    }

    pub fn point_at(&self, i: usize, t: f64) -> Point {
        let p = self.source.points()[i];
        p + (self.target[i] - p) * t
    }

    /// Polygon `P_t`, when the source mesh knows its polygon.
    pub fn polygon_at(&self, t: f64) -> Option<Result<Polygon>> {
        let src = self.source.parent()?;
        let tgt = self.target_polygon.as_ref()?;
        let pts: Vec<Point> = src
            .vertices()
            .iter()
            .zip(tgt.vertices())
            .map(|(a, b)| a + (b - a) * t)
            .collect();
        Some(Polygon::new(&pts))
    }

    /// Mesh of `Omega_t = f_t(Omega_0)`: same connectivity, moved points.
    pub fn map_mesh(&self, t: f64) -> Result<TriMesh> {
        check_param(t)?;
        if t == 0.0 {
            return Ok(self.source.clone());
        }
        let pts: Vec<Point> = (0..self.source.num_points())
            .map(|i| self.point_at(i, t))
            .collect();
        let parent = match self.polygon_at(t) {
            Some(Ok(p)) => Some(p),
            _ => None,
        };
        self.source.with_points(pts, parent)
    }

    /// Jacobian `D f_t` on triangle `tri` (constant per triangle).
    pub fn jacobian(&self, tri: usize, t: f64) -> Matrix2<f64> {
        let [i, j, k] = self.source.triangles()[tri];
        let p = self.source.points();
        let e0 = Matrix2::from_columns(&[p[j] - p[i], p[k] - p[i]]);
        let q = |a: usize| self.point_at(a, t);
        let et = Matrix2::from_columns(&[q(j) - q(i), q(k) - q(i)]);
        et * e0
            .try_inverse()
            .expect("source triangles are non-degenerate")
    }

    /// Constant `C` with `C <= sigma(D f_t) <= 1/C` for every triangle and
    /// every `t` in `[0, 1]`, computed from the endpoint Jacobians and the
    /// exact minimum of the orientation quadratics.
    pub fn bilipschitz_constant(&self) -> f64 {
        let mut c = 1.0_f64;
        for tri in 0..self.source.num_triangles() {
            let j1 = self.jacobian(tri, 1.0);
            let smax1 = j1.singular_values().max();
            // sigma_max(J_t) <= (1 - t) + t sigma_max(J_1)
            let upper = smax1.max(1.0);
            let q = self.orientation_quadratic(tri);
            let det_min = q.min_on_unit().0 / q.c0;
            // sigma_min = det / sigma_max
            let lower = det_min / upper;
            c = c.min(lower).min(1.0 / upper);
        }
        c
    }

    /// Refines source mesh and targets together; the target map is affine
    /// per triangle so midpoints map to midpoints.
    pub fn refine(&self, levels: u32) -> DeformationPath {
        if levels == 0 {
            return self.clone();
        }
        let source = self.source.refine(levels);
        let coarse = TriMesh::from_parts_unchecked(
            self.target.clone(),
            self.source.triangles().to_vec(),
            self.source.boundary_flags().to_vec(),
            None,
            self.source.level(),
        );
        let target = coarse.refine(levels).points().to_vec();
        DeformationPath {
            source,
            target,
            target_polygon: self.target_polygon.clone(),
        }
    }
}

fn check_param(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(GeometryError::ParameterOutOfRange(t))
    }
}

/// Path carrying polygon `P` (meshed by `mesh`) to `Q`.
///
/// Polygon vertices go to the matching vertices of `Q`, points on a polygon
/// edge keep their relative position on that edge, interior points stay fixed.
pub fn pl_family(p: &Polygon, q: &Polygon, mesh: &TriMesh) -> Result<DeformationPath> {
    if p.len() != q.len() {
        return Err(GeometryError::VertexCountMismatch(p.len(), q.len()));
    }
    let tol = 1e-12 * p.perimeter();
    let n = p.len();
    let target: Vec<Point> = mesh
        .points()
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            if !mesh.is_boundary(i) {
                return Ok(x);
            }
            if let Some(v) = p.vertices().iter().position(|&v| v == x) {
                return Ok(q.vertex(v));
            }
            match p.boundary_location(x, tol) {
                Some((e, s)) => {
                    let (a, b) = (q.vertex(e), q.vertex((e + 1) % n));
                    Ok(a + (b - a) * s)
                }
                None => Err(GeometryError::InvalidMesh(format!(
                    "boundary point {i} is not on the source polygon"
                ))),
            }
        })
        .collect::<Result<_>>()?;
    DeformationPath::new(mesh.clone(), target, Some(q.clone()))
}

/// Output of [`delete_vertex_path`].
#[derive(Debug, Clone)]
pub struct VertexDeletion {
    pub path: DeformationPath,
    /// `P_1`: the input with the tip vertex moved onto the midpoint `m`.
    pub endpoint: Polygon,
    /// Index of the moved vertex (a false vertex of `endpoint`).
    pub vertex: usize,
    pub midpoint: Point,
    /// Interior point added when the flipped diagonal is not usable.
    pub steiner: Option<Point>,
}

/// Linear path sliding the tip of a dual-tree leaf onto the midpoint of the
/// opposite side, leaving every other vertex fixed.
///
/// The leaf triangle itself collapses at `t = 1`, so the path mesh replaces
/// the leaf and its neighbour by a triangulation around the tip that stays
/// non-degenerate: the flipped diagonal from the tip when the quadrilateral
/// is convex, otherwise a fixed interior point just inside the neighbour.
pub fn delete_vertex_path(poly: &Polygon) -> Result<VertexDeletion> {
    let n = poly.len();
    if n < 4 {
        return Err(GeometryError::TooFewVertices(n));
    }
    let structural = triangulate_structural(poly)?;
    let end = structural.dual_tree_end()?;
    let v = end.vertex;
    let tri = structural.triangles()[end.triangle];
    let k = tri.iter().position(|&x| x == v).unwrap();
    // CCW triangle (v, b, a): a and b are v's neighbours.
    let b = tri[(k + 1) % 3];
    let a = tri[(k + 2) % 3];
    let pts = poly.vertices();
    let m = Point::from((pts[a].coords + pts[b].coords) * 0.5);

    // neighbour across the diagonal (a, b)
    let adj = structural.dual_graph();
    let nb = adj[end.triangle][0];
    let ntri = structural.triangles()[nb];
    let w = *ntri.iter().find(|&&x| x != a && x != b).unwrap();

    let mut endpoint_pts = pts.to_vec();
    endpoint_pts[v] = m;
    let endpoint =
        Polygon::new(&endpoint_pts).map_err(|e| GeometryError::PathDegenerate(format!("{e}")))?;

    let keep: Vec<[usize; 3]> = structural
        .triangles()
        .iter()
        .enumerate()
        .filter(|&(t, _)| t != end.triangle && t != nb)
        .map(|(_, &tri)| tri)
        .collect();

    let orient = |tri: [usize; 3], p: &[Point]| -> [usize; 3] {
        if det3(p[tri[0]], p[tri[1]], p[tri[2]]) < 0.0 {
            [tri[0], tri[2], tri[1]]
        } else {
            tri
        }
    };

    let mut target = pts.to_vec();
    target[v] = m;

    // Flipped diagonal (v, w).
    if orient2d(pts[v], pts[b], pts[w]) == Orientation::CounterClockwise
        && orient2d(pts[v], pts[w], pts[a]) == Orientation::CounterClockwise
    {
        let mut tris = keep.clone();
        tris.push([v, b, w]);
        tris.push([v, w, a]);
        let mesh = TriMesh::new(pts.to_vec(), tris, Some(poly.clone()), 0)?;
        if let Ok(path) = DeformationPath::new(mesh, target.clone(), Some(endpoint.clone())) {
            return Ok(VertexDeletion {
                path,
                endpoint,
                vertex: v,
                midpoint: m,
                steiner: None,
            });
        }
    }

    // Interior point s = m + eps (w - m), inside the neighbour triangle.
    let mut eps = 0.5;
    for _ in 0..40 {
        let s = m + (pts[w] - m) * eps;
        let mut mpts = pts.to_vec();
        mpts.push(s);
        let si = n;
        let mut tris = keep.clone();
        for tri in [[a, v, si], [v, b, si], [b, w, si], [w, a, si]] {
            tris.push(orient(tri, &mpts));
        }
        let mut tgt = target.clone();
        tgt.push(s);
        if let Ok(mesh) = TriMesh::new(mpts, tris, Some(poly.clone()), 0) {
            if let Ok(path) = DeformationPath::new(mesh, tgt, Some(endpoint.clone())) {
                return Ok(VertexDeletion {
                    path,
                    endpoint,
                    vertex: v,
                    midpoint: m,
                    steiner: Some(s),
                });
            }
        }
        eps *= 0.5;
    }
    Err(GeometryError::PathDegenerate(format!(
        "no valid mesh for deleting vertex {v}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::triangulate_structural;

    fn square() -> Polygon {
        Polygon::unit_square()
    }

    #[test]
    fn identity_path_is_constant() {
        let p = square();
        let m = triangulate_structural(&p).unwrap();
        let path = pl_family(&p, &p, &m).unwrap();
        for tri in 0..m.num_triangles() {
            let q = path.orientation_quadratic(tri);
            assert_eq!(q.c1, 0.0);
            assert_eq!(q.c2, 0.0);
            assert!(q.c0 > 0.0);
        }
        assert_eq!(path.map_mesh(0.7).unwrap().points(), m.points());
    }

    #[test]
    fn scaling_path_jacobian() {
        let p = square();
        let q = p.scaled(2.0).unwrap();
        let m = triangulate_structural(&p).unwrap();
        let path = pl_family(&p, &q, &m).unwrap();
        for tri in 0..2 {
            for &t in &[0.0, 0.3, 1.0] {
                let j = path.jacobian(tri, t);
                let expect = Matrix2::identity() * (1.0 + t);
                assert!((j - expect).norm() < 1e-14);
            }
        }
        let mid = path.map_mesh(0.5).unwrap();
        assert!((mid.area() - 2.25).abs() < 1e-14);
        assert_eq!(mid.parent().unwrap().vertex(2), Point::new(1.5, 1.5));
        let end = path.map_mesh(1.0).unwrap();
        assert_eq!(end.points(), q.vertices());
        assert!(matches!(
            path.map_mesh(1.5),
            Err(GeometryError::ParameterOutOfRange(_))
        ));
    }

    #[test]
    fn flipping_target_degenerates() {
        let p = square();
        let m = triangulate_structural(&p).unwrap();
        // Push a corner across the diagonal that is not incident to it.
        let corner = (0..4)
            .find(|&i| m.triangles().iter().filter(|t| t.contains(&i)).count() == 1)
            .unwrap();
        let mut qv = p.vertices().to_vec();
        let c = qv[corner];
        // push the corner through the centre, past the diagonal
        qv[corner] = Point::new(0.5, 0.5) + (Point::new(0.5, 0.5) - c) * 0.5;
        let err = DeformationPath::new(m.clone(), qv, None).unwrap_err();
        match err {
            GeometryError::DegeneratesAlongPath { t_lo, t_hi, .. } => {
                assert!(t_lo > 0.0 && t_lo < 1.0, "{t_lo}");
                assert!(t_hi <= 1.0 && t_hi >= t_lo);
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn quadratic_root_interval() {
        // det(t) = (t - 0.25)(t - 0.75) * 4
        let q = OrientationQuadratic {
            c0: 0.75,
            c1: -4.0,
            c2: 4.0,
        };
        let (lo, hi) = q.nonpositive_interval().unwrap();
        assert!((lo - 0.25).abs() < 1e-15 && (hi - 0.75).abs() < 1e-15);
        let pos = OrientationQuadratic {
            c0: 1.0,
            c1: -1.0,
            c2: 0.5,
        };
        assert!(pos.nonpositive_interval().is_none());
    }

    #[test]
    fn delete_vertex_of_convex_quadrilateral() {
        let p = Polygon::from_coords(&[[0., 0.], [2., 0.], [2.5, 1.5], [0.2, 1.0]]).unwrap();
        let del = delete_vertex_path(&p).unwrap();
        assert_eq!(del.endpoint.len(), 4);
        assert_eq!(del.endpoint.false_vertices(), vec![del.vertex]);
        let tri = del.endpoint.without_vertex(del.vertex).unwrap();
        assert_eq!(tri.len(), 3);
        assert_eq!(
            del.path.map_mesh(0.0).unwrap().points(),
            del.path.source().points()
        );
        assert_eq!(del.path.polygon_at(0.0).unwrap().unwrap(), p);
    }

    #[test]
    fn delete_vertex_with_false_vertex() {
        let p = Polygon::from_coords(&[[0., 0.], [1., 0.], [1., 1.], [0.5, 1.], [0., 1.]]).unwrap();
        let del = delete_vertex_path(&p).unwrap();
        let end = del.path.map_mesh(1.0).unwrap();
        assert!(end.area() > 0.0);
        let n = del.endpoint.len();
        let v = del.vertex;
        let (a, b) = (del.endpoint.vertex(v + n - 1), del.endpoint.vertex(v + 1));
        let d = det3(a, del.endpoint.vertex(v), b);
        assert!(d.abs() < 1e-12);
    }

    #[test]
    fn delete_vertex_reflex_neighbour_uses_steiner_point() {
        // Arrow-shaped hexagon where the flip of the leaf diagonal is blocked.
        let p =
            Polygon::from_coords(&[[0., 0.], [4., 0.], [4., 1.], [1.2, 0.6], [4., 3.], [0., 3.]])
                .unwrap();
        let del = delete_vertex_path(&p).unwrap();
        del.path.check_orientation().unwrap();
        let end = del.path.map_mesh(1.0).unwrap();
        assert!((end.area() - del.endpoint.area()).abs() < 1e-12);
    }

    #[test]
    fn refined_path_matches_mapped_refinement() {
        let p = Polygon::from_coords(&[[0., 0.], [2., 0.], [2.5, 1.5], [0.2, 1.0]]).unwrap();
        let q = Polygon::from_coords(&[[0.1, -0.1], [2.2, 0.1], [2.4, 1.7], [0.0, 1.1]]).unwrap();
        let m = triangulate_structural(&p).unwrap();
        let path = pl_family(&p, &q, &m).unwrap();
        let fine = path.refine(2);
        let a = fine.map_mesh(0.6).unwrap();
        let b = path.map_mesh(0.6).unwrap().refine(2);
        for (x, y) in a.points().iter().zip(b.points()) {
            assert!((x - y).norm() < 1e-14);
        }
    }

    #[test]
    fn bilipschitz_bounds_hold_on_samples() {
        let p = Polygon::from_coords(&[[0., 0.], [2., 0.], [2.5, 1.5], [0.2, 1.0]]).unwrap();
        let q = Polygon::from_coords(&[[0.3, -0.2], [2.6, 0.4], [2.1, 2.0], [-0.3, 0.8]]).unwrap();
        let m = triangulate_structural(&p).unwrap();
        let path = pl_family(&p, &q, &m).unwrap();
        let c = path.bilipschitz_constant();
        assert!(c > 0.0 && c <= 1.0);
        for s in 0..=100 {
            let t = s as f64 / 100.0;
            for tri in 0..m.num_triangles() {
                let sv = path.jacobian(tri, t).singular_values();
                assert!(sv.min() >= c * (1.0 - 1e-12) && sv.max() <= (1.0 + 1e-12) / c);
            }
        }
    }
}
