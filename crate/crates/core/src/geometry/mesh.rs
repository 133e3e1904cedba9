use std::collections::HashMap;

use super::predicates::det3;
use super::{GeometryError, Point, Polygon, Result};

/// Conforming triangulation of a polygon.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    points: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    parent: Option<Polygon>,
    level: u32,
}

/// Leaf of the dual tree of a structural mesh and the "ear tip" vertex whose
/// two sides in that triangle both lie on the polygon boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DualTreeEnd {
    pub triangle: usize,
    pub vertex: usize,
    /// Set when the dual tree has a single node (triangle input).
    pub single_node: bool,
}

pub(crate) fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl TriMesh {
    /// Builds and validates a mesh. Boundary flags are derived from topology:
    /// a point is on the boundary iff it touches an edge used by one triangle.
    pub fn new(
        points: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        parent: Option<Polygon>,
        level: u32,
    ) -> Result<Self> {
        let boundary = boundary_flags(points.len(), &triangles)?;
        let mesh = TriMesh {
            points,
            triangles,
            boundary,
            parent,
            level,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    /// Skips validation; for callers that preserve the invariants by construction.
    pub(crate) fn from_parts_unchecked(
        points: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary: Vec<bool>,
        parent: Option<Polygon>,
        level: u32,
    ) -> Self {
        TriMesh {
            points,
            triangles,
            boundary,
            parent,
            level,
        }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.boundary[i]
    }

    pub fn parent(&self) -> Option<&Polygon> {
        self.parent.as_ref()
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn num_points(&self) -> usize {
        self.points.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_interior(&self) -> usize {
        self.boundary.iter().filter(|&&b| !b).count()
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.points[a], self.points[b], self.points[c]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        0.5 * det3(a, b, c)
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| self.triangle_area(t))
            .sum()
    }

    /// Undirected edges in first-appearance order, each with its triangle count.
    pub fn edges(&self) -> Vec<((usize, usize), usize)> {
        let mut order = Vec::new();
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let e = edge_key(tri[k], tri[(k + 1) % 3]);
                let c = count.entry(e).or_insert(0);
                if *c == 0 {
                    order.push(e);
                }
                *c += 1;
            }
        }
        order.into_iter().map(|e| (e, count[&e])).collect()
    }

    pub fn max_edge_length(&self) -> f64 {
        self.edges()
            .iter()
            .map(|&((a, b), _)| (self.points[a] - self.points[b]).norm())
            .fold(0.0, f64::max)
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle_deg(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| self.triangle_min_angle_deg(t))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn triangle_min_angle_deg(&self, t: usize) -> f64 {
        let p = self.triangle_points(t);
        (0..3)
            .map(|k| {
                let u = p[(k + 1) % 3] - p[k];
                let v = p[(k + 2) % 3] - p[k];
                let cross = u.x * v.y - u.y * v.x;
                cross.abs().atan2(u.dot(&v)).to_degrees()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// A structural mesh has exactly the polygon vertices as points.
    pub fn is_structural(&self) -> bool {
        match &self.parent {
            Some(p) => {
                self.level == 0
                    && self.points.len() == p.len()
                    && self.points.iter().zip(p.vertices()).all(|(a, b)| a == b)
            }
            None => false,
        }
    }

    /// Triangle adjacency across shared edges, neighbour lists sorted.
    pub fn dual_graph(&self) -> Vec<Vec<usize>> {
        let mut owner: HashMap<(usize, usize), usize> = HashMap::new();
        let mut adj = vec![Vec::new(); self.triangles.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let e = edge_key(tri[k], tri[(k + 1) % 3]);
                if let Some(&s) = owner.get(&e) {
                    adj[s].push(t);
                    adj[t].push(s);
                } else {
                    owner.insert(e, t);
                }
            }
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        adj
    }

    /// Connected and acyclic dual graph.
    pub fn dual_is_tree(&self) -> bool {
        let adj = self.dual_graph();
        let f = adj.len();
        if f == 0 {
            return false;
        }
        let edges: usize = adj.iter().map(Vec::len).sum::<usize>() / 2;
        if edges != f - 1 {
            return false;
        }
        let mut seen = vec![false; f];
        let mut stack = vec![0];
        seen[0] = true;
        let mut visited = 1;
        while let Some(t) = stack.pop() {
            for &s in &adj[t] {
                if !seen[s] {
                    seen[s] = true;
                    visited += 1;
                    stack.push(s);
                }
            }
        }
        visited == f
    }

    /// Leaf triangle of the dual tree (smallest index) and its boundary tip.
    pub fn dual_tree_end(&self) -> Result<DualTreeEnd> {
        if !self.is_structural() {
            return Err(GeometryError::NotStructuralMesh(format!(
                "level {}, {} points, {} triangles",
                self.level,
                self.points.len(),
                self.triangles.len()
            )));
        }
        if self.triangles.len() == 1 {
            return Ok(DualTreeEnd {
                triangle: 0,
                vertex: self.triangles[0][0],
                single_node: true,
            });
        }
        let adj = self.dual_graph();
        let n = self.points.len();
        let is_polygon_edge = |a: usize, b: usize| (a + 1) % n == b || (b + 1) % n == a;
        for (t, nb) in adj.iter().enumerate() {
            if nb.len() != 1 {
                continue;
            }
            let tri = self.triangles[t];
            for k in 0..3 {
                let v = tri[k];
                let a = tri[(k + 1) % 3];
                let b = tri[(k + 2) % 3];
                if is_polygon_edge(v, a) && is_polygon_edge(v, b) {
                    return Ok(DualTreeEnd {
                        triangle: t,
                        vertex: v,
                        single_node: false,
                    });
                }
            }
        }
        Err(GeometryError::InvalidMesh(
            "dual graph has no leaf with a boundary tip".into(),
        ))
    }

    /// Uniform red refinement: every triangle is split into four through its
    /// edge midpoints. Existing points keep their indices; midpoints are
    /// appended in first-seen edge order.
    pub fn refine(&self, levels: u32) -> TriMesh {
        let mut mesh = self.clone();
        for _ in 0..levels {
            mesh = mesh.refine_once();
        }
        mesh
    }

    fn refine_once(&self) -> TriMesh {
        let mut points = self.points.clone();
        let mut boundary = self.boundary.clone();
        let edge_count: HashMap<(usize, usize), usize> = self.edges().into_iter().collect();
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for tri in &self.triangles {
            let mut m = [0usize; 3];
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let e = edge_key(a, b);
                m[k] = *mid.entry(e).or_insert_with(|| {
                    points.push(Point::from(
                        (self.points[a].coords + self.points[b].coords) * 0.5,
                    ));
                    boundary.push(edge_count[&e] == 1);
                    points.len() - 1
                });
            }
            let [a, b, c] = *tri;
            let [mab, mbc, mca] = m;
            triangles.push([a, mab, mca]);
            triangles.push([mab, b, mbc]);
            triangles.push([mca, mbc, c]);
            triangles.push([mab, mbc, mca]);
        }
        TriMesh {
            points,
            triangles,
            boundary,
            parent: self.parent.clone(),
            level: self.level + 1,
        }
    }

    /// Same connectivity with new coordinates; revalidates orientation.
    pub fn with_points(&self, points: Vec<Point>, parent: Option<Polygon>) -> Result<TriMesh> {
        if points.len() != self.points.len() {
            return Err(GeometryError::InvalidMesh("point count changed".into()));
        }
        let mesh = TriMesh {
            points,
            triangles: self.triangles.clone(),
            boundary: self.boundary.clone(),
            parent,
            level: self.level,
        };
        mesh.check_orientation()?;
        Ok(mesh)
    }

    fn check_orientation(&self) -> Result<()> {
        for t in 0..self.triangles.len() {
            let a = self.triangle_area(t);
            if !(a > 0.0) {
                return Err(GeometryError::InvalidMesh(format!(
                    "triangle {t} has non-positive area {a:e}"
                )));
            }
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        let np = self.points.len();
        if self.triangles.is_empty() {
            return Err(GeometryError::InvalidMesh("no triangles".into()));
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= np)
                || tri[0] == tri[1]
                || tri[1] == tri[2]
                || tri[0] == tri[2]
            {
                return Err(GeometryError::InvalidMesh(format!(
                    "triangle {t} has bad indices {tri:?}"
                )));
            }
        }
        self.check_orientation()?;
        let edges = self.edges();
        if let Some(((a, b), c)) = edges.iter().find(|(_, c)| *c > 2) {
            return Err(GeometryError::InvalidMesh(format!(
                "edge ({a}, {b}) shared by {c} triangles"
            )));
        }
        let mut used = vec![false; np];
        for tri in &self.triangles {
            for &i in tri {
                used[i] = true;
            }
        }
        if let Some(i) = used.iter().position(|u| !u) {
            return Err(GeometryError::InvalidMesh(format!("point {i} is not used")));
        }
        let euler = np as i64 - edges.len() as i64 + self.triangles.len() as i64;
        if euler != 1 {
            return Err(GeometryError::InvalidMesh(format!(
                "Euler characteristic V - E + F = {euler}, expected 1"
            )));
        }
        if let Some(poly) = &self.parent {
            let (ma, pa) = (self.area(), poly.area());
            if ((ma - pa) / pa).abs() > 1e-12 {
                return Err(GeometryError::InvalidMesh(format!(
                    "triangle areas sum to {ma}, polygon area is {pa}"
                )));
            }
            let tol = 1e-10 * poly.perimeter();
            for &((a, b), c) in &edges {
                if c == 1 {
                    let m = Point::from((self.points[a].coords + self.points[b].coords) * 0.5);
                    if poly.boundary_location(m, tol).is_none() {
                        return Err(GeometryError::InvalidMesh(format!(
                            "boundary edge ({a}, {b}) is not on the polygon boundary (hanging node?)"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn boundary_flags(np: usize, triangles: &[[usize; 3]]) -> Result<Vec<bool>> {
    let mut count: HashMap<(usize, usize), usize> = HashMap::new();
    for tri in triangles {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            if a >= np || b >= np {
                return Err(GeometryError::InvalidMesh(format!(
                    "index out of range in {tri:?}"
                )));
            }
            *count.entry(edge_key(a, b)).or_insert(0) += 1;
        }
    }
    let mut flags = vec![false; np];
    for (&(a, b), &c) in &count {
        if c == 1 {
            flags[a] = true;
            flags[b] = true;
        }
    }
    Ok(flags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::triangulate_structural;

    fn square_mesh() -> TriMesh {
        triangulate_structural(&Polygon::unit_square()).unwrap()
    }

    #[test]
    fn refine_counts() {
        let m = square_mesh();
        let r1 = m.refine(1);
        assert_eq!(r1.num_triangles(), 8);
        assert_eq!(r1.num_points(), 9);
        assert_eq!(r1.num_interior(), 1);
        assert_eq!(m.refine(0), m);
        let r2 = m.refine(2);
        assert_eq!(r2.num_triangles(), 32);
        assert!((r2.area() - 1.0).abs() < 1e-15);
        assert_eq!(r2.level(), 2);
        // coarse points keep their indices
        assert_eq!(&r2.points()[..4], m.points());
    }

    #[test]
    fn refine_four_triangle_mesh_twice() {
        let m = crate::geometry::criss_cross_rectangle(1.0, 1.0).unwrap();
        assert_eq!(m.num_triangles(), 4);
        assert_eq!(m.refine(2).num_triangles(), 64);
    }

    #[test]
    fn refined_mesh_revalidates() {
        let m = square_mesh().refine(3);
        let again = TriMesh::new(
            m.points().to_vec(),
            m.triangles().to_vec(),
            m.parent().cloned(),
            3,
        )
        .unwrap();
        assert_eq!(again.boundary_flags(), m.boundary_flags());
    }

    #[test]
    fn hanging_node_is_rejected() {
        // Square split into a left triangle and two right triangles that put a
        // vertex in the middle of the diagonal.
        let pts = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
            Point::new(0.5, 0.5),
        ];
        let tris = vec![[0, 2, 3], [0, 1, 4], [4, 1, 2]];
        let err = TriMesh::new(pts, tris, Some(Polygon::unit_square()), 0).unwrap_err();
        assert!(matches!(err, GeometryError::InvalidMesh(_)), "{err:?}");
    }

    #[test]
    fn negative_triangle_is_rejected() {
        let pts = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
        ];
        assert!(TriMesh::new(pts, vec![[0, 2, 1]], None, 0).is_err());
    }

    #[test]
    fn square_dual_end() {
        let m = square_mesh();
        let end = m.dual_tree_end().unwrap();
        assert!(!end.single_node);
        // the tip is the corner not on the diagonal
        let tri = m.triangles()[end.triangle];
        let others: Vec<usize> = tri.iter().copied().filter(|&v| v != end.vertex).collect();
        let n = 4;
        assert!(others
            .iter()
            .all(|&o| (o + 1) % n == end.vertex || (end.vertex + 1) % n == o));
        assert!(matches!(
            m.refine(1).dual_tree_end(),
            Err(GeometryError::NotStructuralMesh(_))
        ));
    }

    #[test]
    fn pentagon_fan_leaves() {
        // Fan from v1 (index 0): (0,1,2), (0,2,3), (0,3,4).
        let poly = Polygon::from_coords(&[
            [1.0, 0.0],
            [0.31, 0.95],
            [-0.81, 0.59],
            [-0.81, -0.59],
            [0.31, -0.95],
        ])
        .unwrap();
        let m = TriMesh::new(
            poly.vertices().to_vec(),
            vec![[0, 1, 2], [0, 2, 3], [0, 3, 4]],
            Some(poly),
            0,
        )
        .unwrap();
        let adj = m.dual_graph();
        let leaves: Vec<usize> = (0..3).filter(|&t| adj[t].len() == 1).collect();
        assert_eq!(leaves, vec![0, 2]);
        let end = m.dual_tree_end().unwrap();
        assert_eq!(
            end,
            DualTreeEnd {
                triangle: 0,
                vertex: 1,
                single_node: false
            }
        );
        // the other leaf's tip is v5 (index 4)
        let tri = m.triangles()[2];
        assert!(tri.contains(&4));
    }

    #[test]
    fn triangle_is_single_node() {
        let poly = Polygon::from_coords(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        let m = triangulate_structural(&poly).unwrap();
        assert!(m.dual_tree_end().unwrap().single_node);
    }
}
