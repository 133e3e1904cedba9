//! Polygons, triangulations and piecewise-linear deformation families.
//!
//! A [`Polygon`] is a validated, counterclockwise simple closed polygonal curve.
//! Collinear consecutive vertices ("false vertices") are legal and preserved,
//! since they change the labelling of a polygon without changing its shape.
//!
//! Meshes ([`TriMesh`]) come in two flavours: structural meshes whose points
//! are exactly the polygon vertices, and refined or Steiner meshes used for
//! finite element work. [`DeformationPath`] carries a mesh together with a
//! target position for every point and realizes the straight-line family
//! `f_t = (1 - t) Id + t f`.

mod mesh;
mod path;
mod predicates;
mod triangulate;

pub use mesh::{DualTreeEnd, TriMesh};
pub use path::{
    delete_vertex_path, pl_family, DeformationPath, OrientationQuadratic, VertexDeletion,
};
pub use predicates::{orient2d, segments_intersect, Orientation};
pub use triangulate::{
    criss_cross_grid, criss_cross_rectangle, triangulate_steiner, triangulate_structural,
};

use nalgebra::{Point2, Vector2};
use thiserror::Error;

pub type Point = Point2<f64>;
pub type Vector = Vector2<f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("polygon is not simple: edge {0} intersects edge {1}")]
    SelfIntersecting(usize, usize),
    #[error("duplicate vertex: vertex {0} coincides with vertex {1}")]
    DuplicateVertex(usize, usize),
    #[error("non-finite coordinate at vertex {0}")]
    NonFinite(usize),
    #[error("degenerate geometry near vertex {0}: no valid ear found")]
    DegenerateGeometry(usize),
    #[error("meshing failed: {0}")]
    MeshingFailed(String),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("mesh is not structural: {0}")]
    NotStructuralMesh(String),
    #[error("vertex count mismatch: source has {0} vertices, target has {1}")]
    VertexCountMismatch(usize, usize),
    #[error("triangle {triangle} degenerates along the path for t in [{t_lo}, {t_hi}]")]
    DegeneratesAlongPath {
        triangle: usize,
        t_lo: f64,
        t_hi: f64,
    },
    #[error("parameter t = {0} outside [0, 1]")]
    ParameterOutOfRange(f64),
    #[error("internal error: deformation path degenerates ({0})")]
    PathDegenerate(String),
}

pub type Result<T> = std::result::Result<T, GeometryError>;

/// Validated simple polygon, counterclockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Point>,
}

/// Validates a vertex list and returns the normalized polygon.
///
/// Clockwise input is reversed while keeping the first vertex in place, so
/// vertex 0 of the input is vertex 0 of the output.
pub fn validate_polygon(points: &[Point]) -> Result<Polygon> {
    let n = points.len();
    if n < 3 {
        return Err(GeometryError::TooFewVertices(n));
    }
    if let Some(i) = points
        .iter()
        .position(|p| !p.x.is_finite() || !p.y.is_finite())
    {
        return Err(GeometryError::NonFinite(i));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if points[i] == points[j] {
                return Err(GeometryError::DuplicateVertex(i, j));
            }
        }
    }
    check_simple(points)?;
    let mut vertices = points.to_vec();
    if signed_area(&vertices) < 0.0 {
        vertices[1..].reverse();
    }
    Ok(Polygon { vertices })
}

fn check_simple(points: &[Point]) -> Result<()> {
    let n = points.len();
    let edge = |i: usize| (points[i], points[(i + 1) % n]);
    for i in 0..n {
        let (a, b) = edge(i);
        let (_, c) = edge((i + 1) % n);
        // Adjacent edges may only share their common vertex: a reversal of
        // direction along one line makes them overlap.
        if orient2d(a, b, c) == Orientation::Collinear && (b - a).dot(&(c - b)) < 0.0 {
            return Err(GeometryError::SelfIntersecting(i, (i + 1) % n));
        }
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (p, q) = edge(j);
            if segments_intersect(a, b, p, q) {
                return Err(GeometryError::SelfIntersecting(i, j));
            }
        }
    }
    Ok(())
}

pub(crate) fn signed_area(points: &[Point]) -> f64 {
    let n = points.len();
    let mut twice = 0.0;
    for i in 0..n {
        let p = points[i];
        let q = points[(i + 1) % n];
        twice += p.x * q.y - q.x * p.y;
    }
    0.5 * twice
}

impl Polygon {
    pub fn new(points: &[Point]) -> Result<Self> {
        validate_polygon(points)
    }

    pub fn from_coords(coords: &[[f64; 2]]) -> Result<Self> {
        let pts: Vec<Point> = coords.iter().map(|c| Point::new(c[0], c[1])).collect();
        validate_polygon(&pts)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertex(&self, i: usize) -> Point {
        self.vertices[i % self.vertices.len()]
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    /// Edge `i` runs from vertex `i` to vertex `i + 1`.
    pub fn edge(&self, i: usize) -> (Point, Point) {
        (self.vertex(i), self.vertex(i + 1))
    }

    pub fn perimeter(&self) -> f64 {
        (0..self.len())
            .map(|i| {
                let (a, b) = self.edge(i);
                (b - a).norm()
            })
            .sum()
    }

    /// Indices of vertices collinear with both neighbours.
    pub fn false_vertices(&self) -> Vec<usize> {
        let n = self.len();
        (0..n)
            .filter(|&i| {
                orient2d(self.vertex(i + n - 1), self.vertex(i), self.vertex(i + 1))
                    == Orientation::Collinear
            })
            .collect()
    }

    /// Convex in the weak sense: no reflex vertex (false vertices allowed).
    pub fn is_convex(&self) -> bool {
        let n = self.len();
        (0..n).all(|i| {
            orient2d(self.vertex(i + n - 1), self.vertex(i), self.vertex(i + 1))
                != Orientation::Clockwise
        })
    }

    /// Interior angle at vertex `i`, in radians.
    pub fn interior_angle(&self, i: usize) -> f64 {
        let n = self.len();
        let prev = self.vertex(i + n - 1) - self.vertex(i);
        let next = self.vertex(i + 1) - self.vertex(i);
        let cross = next.x * prev.y - next.y * prev.x;
        let ang = cross.atan2(next.dot(&prev));
        if ang < 0.0 {
            ang + 2.0 * std::f64::consts::PI
        } else {
            ang
        }
    }

    /// Largest Euclidean distance of a vertex from the origin.
    pub fn max_radius(&self) -> f64 {
        self.vertices
            .iter()
            .map(|p| p.coords.norm())
            .fold(0.0, f64::max)
    }

    pub fn centroid(&self) -> Point {
        let n = self.len();
        let (mut cx, mut cy, mut a2) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let p = self.vertex(i);
            let q = self.vertex(i + 1);
            let w = p.x * q.y - q.x * p.y;
            a2 += w;
            cx += (p.x + q.x) * w;
            cy += (p.y + q.y) * w;
        }
        Point::new(cx / (3.0 * a2), cy / (3.0 * a2))
    }

    /// Applies a map to every vertex and revalidates.
    pub fn map_points(&self, f: impl Fn(Point) -> Point) -> Result<Polygon> {
        let pts: Vec<Point> = self.vertices.iter().map(|&p| f(p)).collect();
        validate_polygon(&pts)
    }

    pub fn translated(&self, offset: Vector) -> Polygon {
        self.map_points(|p| p + offset)
            .expect("translation preserves simplicity")
    }

    pub fn scaled(&self, factor: f64) -> Result<Polygon> {
        self.map_points(|p| Point::from(p.coords * factor))
    }

    /// Rotation about the origin.
    pub fn rotated(&self, angle: f64) -> Polygon {
        let (s, c) = angle.sin_cos();
        self.map_points(|p| Point::new(c * p.x - s * p.y, s * p.x + c * p.y))
            .expect("rotation preserves simplicity")
    }

    /// Moves the polygon so its area centroid sits at the origin.
    pub fn centered(&self) -> Polygon {
        let c = self.centroid();
        self.translated(-c.coords)
    }

    /// Same point set with vertex `i` removed (it must be a false vertex
    /// for the shape to be unchanged).
    pub fn without_vertex(&self, i: usize) -> Result<Polygon> {
        let pts: Vec<Point> = self
            .vertices
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &p)| p)
            .collect();
        validate_polygon(&pts)
    }

    /// Signed distance-like test: true when `p` lies on the boundary within `tol`.
    pub fn boundary_location(&self, p: Point, tol: f64) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for i in 0..self.len() {
            let (a, b) = self.edge(i);
            let d = b - a;
            let s = ((p - a).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
            let dist = (a + d * s - p).norm();
            if dist <= tol && best.map_or(true, |(_, _, bd)| dist < bd) {
                best = Some((i, s, dist));
            }
        }
        best.map(|(i, s, _)| (i, s))
    }

    /// Rectangle `[0, w] x [0, h]`.
    pub fn rectangle(width: f64, height: f64) -> Result<Polygon> {
        Polygon::from_coords(&[[0.0, 0.0], [width, 0.0], [width, height], [0.0, height]])
    }

    pub fn unit_square() -> Polygon {
        Polygon::rectangle(1.0, 1.0).expect("unit square is valid")
    }
}
