use super::Point;

/// Relative threshold below which an orientation determinant is treated as zero.
const ORIENT_REL_EPS: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    CounterClockwise,
    Clockwise,
    Collinear,
}

/// Orientation of the triple `(a, b, c)`.
///
/// The sign of the floating point determinant is trusted when it exceeds a
/// forward error bound; otherwise the triple is compared against a relative
/// epsilon of `1e-14` and called collinear when below it.
pub fn orient2d(a: Point, b: Point, c: Point) -> Orientation {
    let detl = (b.x - a.x) * (c.y - a.y);
    let detr = (b.y - a.y) * (c.x - a.x);
    let det = detl - detr;
    let mag = detl.abs() + detr.abs();
    // Shewchuk's stage-A bound for orient2d.
    let errbound = 3.3306690738754716e-16 * mag;
    if det > errbound && det > ORIENT_REL_EPS * mag {
        Orientation::CounterClockwise
    } else if -det > errbound && -det > ORIENT_REL_EPS * mag {
        Orientation::Clockwise
    } else {
        Orientation::Collinear
    }
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed segment intersection test (touching counts).
pub fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let o1 = orient2d(a, b, c);
    let o2 = orient2d(a, b, d);
    let o3 = orient2d(c, d, a);
    let o4 = orient2d(c, d, b);
    use Orientation::Collinear;
    if o1 != o2
        && o3 != o4
        && o1 != Collinear
        && o2 != Collinear
        && o3 != Collinear
        && o4 != Collinear
    {
        return true;
    }
    (o1 == Collinear && on_segment(a, b, c))
        || (o2 == Collinear && on_segment(a, b, d))
        || (o3 == Collinear && on_segment(c, d, a))
        || (o4 == Collinear && on_segment(c, d, b))
}

/// Point in closed triangle `(a, b, c)` (any orientation).
pub(crate) fn point_in_triangle(p: Point, a: Point, b: Point, c: Point) -> bool {
    let o1 = orient2d(a, b, p);
    let o2 = orient2d(b, c, p);
    let o3 = orient2d(c, a, p);
    let has_cw = [o1, o2, o3].contains(&Orientation::Clockwise);
    let has_ccw = [o1, o2, o3].contains(&Orientation::CounterClockwise);
    !(has_cw && has_ccw)
}

pub(crate) fn cross(u: super::Vector, v: super::Vector) -> f64 {
    u.x * v.y - u.y * v.x
}

/// Twice the signed area of `(a, b, c)`.
pub(crate) fn det3(a: Point, b: Point, c: Point) -> f64 {
    cross(b - a, c - a)
}
