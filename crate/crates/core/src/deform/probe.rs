use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::gap::relative_gaps;
use super::{DeformError, Result};
use crate::assembly::{assemble, BoundaryCondition};
use crate::eigensolve::{smallest_eigenpairs, SolveOptions};
use crate::geometry::{triangulate_steiner, Point, Polygon};
use crate::metric::MetricSpec;

/// Shape filters keep random samples meshable at moderate resolution.
const MIN_ANGLE_DEG: f64 = 10.0;
const MIN_EDGE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeOptions {
    pub convex: bool,
    pub target_h: f64,
    pub max_attempts: usize,
    pub solve: SolveOptions,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions {
            convex: true,
            target_h: 0.1,
            max_attempts: 1000,
            solve: SolveOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramBin {
    /// `log10` of the lower edge; the first bin also collects everything below.
    pub log10_lo: i32,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeStats {
    pub n_vertices: usize,
    pub count: usize,
    pub seed: u64,
    pub bc: BoundaryCondition,
    pub k: usize,
    pub convex: bool,
    pub gaps: Vec<f64>,
    /// 1-based index of the smallest gap of each sample.
    pub gap_index: Vec<usize>,
    pub min: f64,
    pub median: f64,
    pub histogram: Vec<HistogramBin>,
    pub note: Option<String>,
}

fn shape_ok(p: &Polygon) -> bool {
    (0..p.len()).all(|i| {
        p.interior_angle(i).to_degrees() >= MIN_ANGLE_DEG && {
            let (a, b) = p.edge(i);
            (b - a).norm() >= MIN_EDGE
        }
    })
}

fn turn(a: Point, b: Point, c: Point) -> f64 {
    (b - a).perp(&(c - a))
}

/// Counterclockwise hull, collinear points dropped.
fn convex_hull(mut pts: Vec<Point>) -> Vec<Point> {
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2
                && turn(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
            {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

fn polar_points(rng: &mut ChaCha8Rng, n: usize, r_min: f64) -> Vec<Point> {
    let mut angles: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..TAU)).collect();
    angles.sort_by(f64::total_cmp);
    angles
        .into_iter()
        .map(|a| {
            let r = rng.random_range(r_min..1.0);
            Point::new(r * a.cos(), r * a.sin())
        })
        .collect()
}

/// Convex `n`-gon: hull of points at random angles and radii, rejected until
/// all `n` points are extreme and the shape passes the quality filter.
pub fn random_convex_polygon(
    rng: &mut ChaCha8Rng,
    n: usize,
    max_attempts: usize,
) -> Result<Polygon> {
    for _ in 0..max_attempts {
        let hull = convex_hull(polar_points(rng, n, 0.5));
        if hull.len() != n {
            continue;
        }
        if let Ok(p) = Polygon::new(&hull) {
            if shape_ok(&p) {
                return Ok(p);
            }
        }
    }
    Err(DeformError::SamplingFailed(max_attempts))
}

/// Simple `n`-gon, star-shaped about the origin, by rejection.
pub fn random_simple_polygon(
    rng: &mut ChaCha8Rng,
    n: usize,
    max_attempts: usize,
) -> Result<Polygon> {
    for _ in 0..max_attempts {
        if let Ok(p) = Polygon::new(&polar_points(rng, n, 0.3)) {
            if shape_ok(&p) {
                return Ok(p);
            }
        }
    }
    Err(DeformError::SamplingFailed(max_attempts))
}

/// Smallest relative gap among the first `k` eigenvalues of `count` random
/// polygons. Sample `i` draws from stream `i` of the seeded generator.
pub fn random_gap_probe(
    n_vertices: usize,
    count: usize,
    seed: u64,
    bc: BoundaryCondition,
    k: usize,
    opts: &ProbeOptions,
) -> Result<ProbeStats> {
    if n_vertices < 3 {
        return Err(DeformError::InvalidArgument(format!(
            "polygons need at least 3 vertices, got {n_vertices}"
        )));
    }
    if count == 0 {
        return Err(DeformError::InvalidArgument(
            "count must be at least 1".into(),
        ));
    }
    let per_sample: Vec<(usize, f64)> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let poly = if opts.convex {
                random_convex_polygon(&mut rng, n_vertices, opts.max_attempts)?
            } else {
                random_simple_polygon(&mut rng, n_vertices, opts.max_attempts)?
            };
            let mesh = triangulate_steiner(&poly, opts.target_h)?;
            let f = assemble(&mesh, &MetricSpec::flat(), bc)?;
            let s = smallest_eigenpairs(&f, k, &opts.solve)?;
            relative_gaps(&s.eigenvalues, bc)
                .into_iter()
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .ok_or(DeformError::TooFewEigenvalues { needed: 3, got: k })
        })
        .collect::<Result<_>>()?;
    let gaps: Vec<f64> = per_sample.iter().map(|g| g.1).collect();
    let mut sorted = gaps.clone();
    sorted.sort_by(f64::total_cmp);
    let median = if count % 2 == 1 {
        sorted[count / 2]
    } else {
        0.5 * (sorted[count / 2 - 1] + sorted[count / 2])
    };
    let histogram = (-12..=1)
        .map(|e| HistogramBin {
            log10_lo: e,
            count: gaps
                .iter()
                .filter(|&&g| {
                    let d = g.log10().floor() as i32;
                    d.clamp(-12, 1) == e
                })
                .count(),
        })
        .collect();
    Ok(ProbeStats {
        n_vertices,
        count,
        seed,
        bc,
        k,
        convex: opts.convex,
        gap_index: per_sample.iter().map(|g| g.0).collect(),
        min: sorted[0],
        median,
        gaps,
        histogram,
        note: (n_vertices == 3).then(|| "triangles: generic simplicity is an open question; statistics reported without interpretation".into()),
    })
}
