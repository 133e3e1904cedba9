use spade::{
    AngleLimit, ConstrainedDelaunayTriangulation, Point2 as SpadePoint, RefinementParameters,
    Triangulation,
};

use super::predicates::{orient2d, point_in_triangle, Orientation};
use super::{GeometryError, Point, Polygon, Result, TriMesh};

/// Minimum angle guaranteed by [`triangulate_steiner`] away from sharp polygon corners.
pub const STEINER_MIN_ANGLE_DEG: f64 = 20.0;

/// Diagonals-only triangulation by ear clipping.
///
/// Among the available ears the one with the largest minimum angle is cut
/// first (ties go to the lowest index). Vertices lying on a candidate
/// diagonal block the ear, which keeps false vertices from producing
/// zero-area triangles.
pub fn triangulate_structural(poly: &Polygon) -> Result<TriMesh> {
    let pts = poly.vertices();
    let mut ring: Vec<usize> = (0..pts.len()).collect();
    let mut triangles = Vec::with_capacity(pts.len() - 2);
    while ring.len() > 3 {
        let m = ring.len();
        let mut best: Option<(usize, f64)> = None;
        for k in 0..m {
            let (ip, ic, inx) = (ring[(k + m - 1) % m], ring[k], ring[(k + 1) % m]);
            let (a, b, c) = (pts[ip], pts[ic], pts[inx]);
            if orient2d(a, b, c) != Orientation::CounterClockwise {
                continue;
            }
            let blocked = ring
                .iter()
                .any(|&j| j != ip && j != ic && j != inx && point_in_triangle(pts[j], a, b, c));
            if blocked {
                continue;
            }
            let q = min_angle(a, b, c);
            if best.map_or(true, |(_, bq)| q > bq) {
                best = Some((k, q));
            }
        }
        let Some((k, _)) = best else {
            return Err(GeometryError::DegenerateGeometry(ring[0]));
        };
        triangles.push([ring[(k + m - 1) % m], ring[k], ring[(k + 1) % m]]);
        ring.remove(k);
    }
    if orient2d(pts[ring[0]], pts[ring[1]], pts[ring[2]]) != Orientation::CounterClockwise {
        return Err(GeometryError::DegenerateGeometry(ring[1]));
    }
    triangles.push([ring[0], ring[1], ring[2]]);
    TriMesh::new(pts.to_vec(), triangles, Some(poly.clone()), 0)
}

fn min_angle(a: Point, b: Point, c: Point) -> f64 {
    let p = [a, b, c];
    (0..3)
        .map(|k| {
            let u = p[(k + 1) % 3] - p[k];
            let v = p[(k + 2) % 3] - p[k];
            (u.x * v.y - u.y * v.x).abs().atan2(u.dot(&v))
        })
        .fold(f64::INFINITY, f64::min)
}

/// Quality mesh with interior Steiner points.
///
/// Polygon edges are first split into equal pieces no longer than
/// `target_h`, then a constrained Delaunay refinement (spade) places Steiner
/// points under an area cap. Refinement alone leaves slivers next to the
/// boundary, so interior points are then smoothed towards the centroid of
/// their neighbours, re-triangulating after every pass. The area cap is
/// tightened until every edge is at most `target_h`. Triangles wedged
/// between the two sides of a sharp corner are exempt from the angle floor;
/// all others must meet it.
pub fn triangulate_steiner(poly: &Polygon, target_h: f64) -> Result<TriMesh> {
    if !(target_h > 0.0) || !target_h.is_finite() {
        return Err(GeometryError::MeshingFailed(format!(
            "target_h must be positive and finite, got {target_h}"
        )));
    }
    let mut boundary: Vec<Point> = Vec::new();
    for i in 0..poly.len() {
        let (a, b) = poly.edge(i);
        let pieces = ((b - a).norm() / target_h).ceil().max(1.0) as usize;
        for s in 0..pieces {
            let f = s as f64 / pieces as f64;
            boundary.push(a + (b - a) * f);
        }
    }
    let max_vertices =
        ((poly.area() / (target_h * target_h)) * 40.0) as usize + 20 * boundary.len() + 1000;
    let mut pts = spade_points(&boundary, 0.4 * target_h * target_h, max_vertices)?;
    let limit = target_h * (1.0 + 1e-12);
    for _round in 0..MAX_ROUNDS {
        let mut mesh = cdt_mesh(poly, &pts)?;
        let mut verdict = check_angles(poly, &mesh, target_h);
        for _pass in 0..SMOOTHING_PASSES {
            if verdict.is_ok() {
                break;
            }
            mesh = cdt_mesh(poly, &smoothed(poly, &mesh))?;
            verdict = check_angles(poly, &mesh, target_h);
        }
        let long: Vec<Point> = mesh
            .edges()
            .into_iter()
            .map(|((a, b), _)| (mesh.points()[a], mesh.points()[b]))
            .filter(|(a, b)| (b - a).norm() > limit)
            .map(|(a, b)| Point::from((a.coords + b.coords) / 2.0))
            .collect();
        pts = mesh.points().to_vec();
        match (long.is_empty(), verdict) {
            (true, Ok(())) => return Ok(mesh),
            (false, _) => pts.extend(long),
            (true, Err(GeometryError::MeshingFailed(_))) => {
                pts.extend(bad_centroids(poly, &mesh, target_h))
            }
            (true, Err(e)) => return Err(e),
        }
        if pts.len() > max_vertices {
            break;
        }
    }
    Err(GeometryError::MeshingFailed(format!(
        "no mesh with max edge {target_h} and minimum angle {STEINER_MIN_ANGLE_DEG} deg"
    )))
}

const MAX_ROUNDS: usize = 30;
const SMOOTHING_PASSES: usize = 12;

/// Vertices of a spade refinement, boundary splits included.
fn spade_points(boundary: &[Point], area_cap: f64, max_vertices: usize) -> Result<Vec<Point>> {
    let fail = |e: String| GeometryError::MeshingFailed(e);
    let mut cdt = constrained(boundary)?;
    let params = RefinementParameters::<f64>::new()
        .exclude_outer_faces(true)
        .with_angle_limit(AngleLimit::from_deg(STEINER_MIN_ANGLE_DEG + 5.0))
        .with_max_allowed_area(area_cap)
        // stops the cascade of splits that a sharp input corner triggers
        .with_min_required_area(1e-6 * area_cap)
        .with_max_additional_vertices(max_vertices);
    let result = cdt.refine(params);
    if !result.refinement_complete {
        return Err(fail("refinement ran out of vertices".into()));
    }
    let excluded: std::collections::HashSet<_> = result.excluded_faces.iter().copied().collect();
    let mut used = vec![false; cdt.num_vertices()];
    for face in cdt.inner_faces().filter(|f| !excluded.contains(&f.fix())) {
        for v in face.vertices() {
            used[v.fix().index()] = true;
        }
    }
    Ok(cdt
        .vertices()
        .filter(|v| used[v.fix().index()])
        .map(|v| Point::new(v.position().x, v.position().y))
        .collect())
}

fn constrained(ring: &[Point]) -> Result<ConstrainedDelaunayTriangulation<SpadePoint<f64>>> {
    let fail = |e: String| GeometryError::MeshingFailed(e);
    let mut cdt: ConstrainedDelaunayTriangulation<SpadePoint<f64>> =
        ConstrainedDelaunayTriangulation::new();
    let mut handles = Vec::with_capacity(ring.len());
    for p in ring {
        handles.push(
            cdt.insert(SpadePoint::new(p.x, p.y))
                .map_err(|e| fail(format!("{e:?}")))?,
        );
    }
    for i in 0..handles.len() {
        let j = (i + 1) % handles.len();
        if !cdt.can_add_constraint(handles[i], handles[j]) {
            return Err(fail(format!("boundary constraint {i}-{j} rejected")));
        }
        cdt.add_constraint(handles[i], handles[j]);
    }
    Ok(cdt)
}

/// Even-odd test; points on the boundary count as outside.
fn strictly_inside(poly: &Polygon, p: Point) -> bool {
    let n = poly.len();
    let mut inside = false;
    for i in 0..n {
        let (a, b) = poly.edge(i);
        if orient2d(a, b, p) == Orientation::Collinear && (p - a).dot(&(p - b)) <= 0.0 {
            return false;
        }
        if (a.y > p.y) != (b.y > p.y) && p.x < a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y) {
            inside = !inside;
        }
    }
    inside
}

/// Constrained Delaunay mesh of `pts`: points on the polygon boundary form
/// the constraint ring, the rest are interior. Polygon vertices come first,
/// in polygon order.
fn cdt_mesh(poly: &Polygon, pts: &[Point]) -> Result<TriMesh> {
    let n = poly.len();
    let tol = 1e-10 * poly.perimeter();
    let mut ring: Vec<((usize, f64), Point)> = Vec::new();
    let mut interior: Vec<Point> = Vec::new();
    for &p in pts {
        if let Some(v) = poly.vertices().iter().position(|&q| q == p) {
            ring.push(((v, 0.0), p));
            continue;
        }
        match poly.boundary_location(p, tol) {
            Some((e, s)) => ring.push(((e, s), p)),
            None => interior.push(p),
        }
    }
    ring.sort_by(|a, b| a.0 .0.cmp(&b.0 .0).then(a.0 .1.total_cmp(&b.0 .1)));
    let ring: Vec<Point> = ring.into_iter().map(|r| r.1).collect();
    if (0..n).any(|v| !ring.contains(&poly.vertex(v))) {
        return Err(GeometryError::MeshingFailed(
            "a polygon vertex was lost in refinement".into(),
        ));
    }
    let mut cdt = constrained(&ring)?;
    for p in &interior {
        cdt.insert(SpadePoint::new(p.x, p.y))
            .map_err(|e| GeometryError::MeshingFailed(format!("{e:?}")))?;
    }
    // flood fill from the outside across unconstrained edges
    let result = cdt.refine(
        RefinementParameters::<f64>::new()
            .exclude_outer_faces(true)
            .with_angle_limit(AngleLimit::from_deg(0.0))
            .with_max_additional_vertices(0),
    );
    let excluded: std::collections::HashSet<_> = result.excluded_faces.iter().copied().collect();
    let all: Vec<Point> = cdt
        .vertices()
        .map(|v| Point::new(v.position().x, v.position().y))
        .collect();
    let triangles: Vec<[usize; 3]> = cdt
        .inner_faces()
        .filter(|f| !excluded.contains(&f.fix()))
        .map(|f| f.vertices().map(|v| v.fix().index()))
        .collect();
    if all.len() != ring.len() + interior.len() {
        return Err(GeometryError::MeshingFailed(
            "coincident points in triangulation".into(),
        ));
    }
    // polygon vertices first, then everything else in insertion order
    let mut order: Vec<usize> = poly
        .vertices()
        .iter()
        .map(|v| all.iter().position(|p| p == v).unwrap())
        .collect();
    let mut placed = vec![false; all.len()];
    for &i in &order {
        placed[i] = true;
    }
    order.extend((0..all.len()).filter(|&i| !placed[i]));
    let mut inv = vec![0; all.len()];
    for (new, &old) in order.iter().enumerate() {
        inv[old] = new;
    }
    let triangles = triangles.into_iter().map(|t| t.map(|v| inv[v])).collect();
    let points = order.iter().map(|&i| all[i]).collect();
    TriMesh::new(points, triangles, Some(poly.clone()), 0)
}

/// Every interior point moved to the mean of its neighbours, unless that
/// would leave the polygon.
fn smoothed(poly: &Polygon, mesh: &TriMesh) -> Vec<Point> {
    let np = mesh.num_points();
    let mut sum = vec![nalgebra::Vector2::zeros(); np];
    let mut count = vec![0usize; np];
    for ((a, b), _) in mesh.edges() {
        sum[a] += mesh.points()[b].coords;
        sum[b] += mesh.points()[a].coords;
        count[a] += 1;
        count[b] += 1;
    }
    (0..np)
        .map(|i| {
            let p = mesh.points()[i];
            if mesh.is_boundary(i) || count[i] == 0 {
                return p;
            }
            let q = Point::from(sum[i] / count[i] as f64);
            if strictly_inside(poly, q) {
                q
            } else {
                p
            }
        })
        .collect()
}

/// Centroids of the triangles that fail the angle floor.
fn bad_centroids(poly: &Polygon, mesh: &TriMesh, h: f64) -> Vec<Point> {
    let exempt = corner_exemption(poly, h);
    (0..mesh.num_triangles())
        .filter(|&t| {
            mesh.triangle_min_angle_deg(t) < STEINER_MIN_ANGLE_DEG
                && !exempt(mesh.triangle_points(t))
        })
        .map(|t| {
            let [a, b, c] = mesh.triangle_points(t);
            Point::from((a.coords + b.coords + c.coords) / 3.0)
        })
        .collect()
}

/// Every triangle must meet the angle floor, except triangles spanning the
/// two sides of a sharp polygon corner (interior angle below three times the
/// floor) with all vertices on those sides. Their shape is dictated by the
/// input angle.
fn check_angles(poly: &Polygon, mesh: &TriMesh, h: f64) -> Result<()> {
    let exempt = corner_exemption(poly, h);
    for t in 0..mesh.num_triangles() {
        let ang = mesh.triangle_min_angle_deg(t);
        if ang < STEINER_MIN_ANGLE_DEG && !exempt(mesh.triangle_points(t)) {
            return Err(GeometryError::MeshingFailed(format!(
                "triangle {t} has minimum angle {ang:.2} deg"
            )));
        }
    }
    Ok(())
}

/// True for triangles near a sharp corner: touching it, inside the disc of
/// radius `2 h` about it, or with all vertices on its two sides.
fn corner_exemption(poly: &Polygon, h: f64) -> impl Fn([Point; 3]) -> bool + '_ {
    let n = poly.len();
    let sharp: Vec<bool> = (0..n)
        .map(|i| poly.interior_angle(i).to_degrees() < 3.0 * STEINER_MIN_ANGLE_DEG)
        .collect();
    let tol = 1e-10 * poly.perimeter();
    // polygon edges through a point (one, or two at a vertex)
    let edges_at = move |p: Point| -> Vec<usize> {
        if let Some(v) = poly.vertices().iter().position(|&q| q == p) {
            return vec![(v + n - 1) % n, v];
        }
        poly.boundary_location(p, tol)
            .map(|(e, _)| vec![e])
            .unwrap_or_default()
    };
    move |tri: [Point; 3]| {
        let near = |c: usize| {
            let v = poly.vertex(c);
            tri.iter().any(|&p| p == v) || tri.iter().all(|p| (p - v).norm() <= 2.0 * h)
        };
        if (0..n).any(|c| sharp[c] && near(c)) {
            return true;
        }
        let on: Vec<Vec<usize>> = tri.iter().map(|&q| edges_at(q)).collect();
        // edges c-1 and c meet at vertex c
        (0..n).filter(|&c| sharp[c]).any(|c| {
            let prev = (c + n - 1) % n;
            on.iter().all(|es| es.contains(&prev) || es.contains(&c))
                && on.iter().any(|es| es.contains(&prev))
                && on.iter().any(|es| es.contains(&c))
        })
    }
}

/// Rectangle `[0, w] x [0, h]` cut along both diagonals (four triangles
/// around the centre). For a square this mesh has the full symmetry group of
/// the square, which survives uniform refinement.
pub fn criss_cross_rectangle(width: f64, height: f64) -> Result<TriMesh> {
    let poly = Polygon::rectangle(width, height)?;
    let mut pts = poly.vertices().to_vec();
    pts.push(Point::new(0.5 * width, 0.5 * height));
    TriMesh::new(
        pts,
        vec![[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]],
        Some(poly),
        0,
    )
}

/// `nx` by `ny` grid of criss-cross cells on `[0, w] x [0, h]`.
pub fn criss_cross_grid(width: f64, height: f64, nx: usize, ny: usize) -> Result<TriMesh> {
    let poly = Polygon::rectangle(width, height)?;
    if nx == 0 || ny == 0 {
        return Err(GeometryError::InvalidMesh(format!(
            "grid needs at least one cell, got {nx} x {ny}"
        )));
    }
    let (dx, dy) = (width / nx as f64, height / ny as f64);
    let node = |i: usize, j: usize| j * (nx + 1) + i;
    let mut pts: Vec<Point> = (0..=ny)
        .flat_map(|j| (0..=nx).map(move |i| Point::new(i as f64 * dx, j as f64 * dy)))
        .collect();
    let mut tris = Vec::with_capacity(4 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let c = pts.len();
            pts.push(Point::new((i as f64 + 0.5) * dx, (j as f64 + 0.5) * dy));
            let (a, b, d, e) = (
                node(i, j),
                node(i + 1, j),
                node(i + 1, j + 1),
                node(i, j + 1),
            );
            tris.extend([[a, b, c], [b, d, c], [d, e, c], [e, a, c]]);
        }
    }
    TriMesh::new(pts, tris, Some(poly), 0)
}
