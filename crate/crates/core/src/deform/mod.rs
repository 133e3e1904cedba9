//! Parameter sweeps and spectral gaps.
//!
//! A sweep solves the eigenproblem at a list of parameter values (deformation
//! parameter `t` along a [`DeformationPath`], or curvature `kappa` on a fixed
//! mesh) and links the sorted eigenvalues into branches. Samples are solved in
//! parallel and merged in parameter order, so results do not depend on the
//! worker count.

mod gap;
mod probe;

pub use gap::{
    certify_simple, golden_section_min, locate_degeneracy, min_gap, relative_gaps, Certificate,
    DegeneracyFamily, GapCheck, GapReport,
};
pub use probe::{
    random_convex_polygon, random_gap_probe, random_simple_polygon, ProbeOptions, ProbeStats,
};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::assembly::{assemble, assemble_pullback, AssemblyError, BoundaryCondition, FormPair};
use crate::eigensolve::{smallest_eigenpairs, EigenError, SolveOptions, Spectrum};
use crate::geometry::{DeformationPath, GeometryError, TriMesh};
use crate::metric::MetricSpec;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DeformError {
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("sample {param}: {source}")]
    SampleFailed {
        param: f64,
        source: Box<DeformError>,
    },
    #[error("kappa = {kappa} violates kappa > -1/R^2 = {limit} for polygon radius R = {radius}")]
    KappaOutOfRange { kappa: f64, limit: f64, radius: f64 },
    #[error("a sweep needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("need at least {needed} eigenvalues, got {got}")]
    TooFewEigenvalues { needed: usize, got: usize },
    #[error("largest residual {max} exceeds eps_gap / 10 = {allowed}")]
    ResidualsTooLarge { max: f64, allowed: f64 },
    #[error("gap has no interior minimum on [{0}, {1}]")]
    NoMinimumInBracket(f64, f64),
    #[error("no valid random polygon after {0} attempts")]
    SamplingFailed(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, DeformError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParameter {
    T,
    Kappa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Matching {
    /// Branch `b` is the `b`-th smallest eigenvalue at every sample.
    Order,
    /// Sorted order refined by eigenvector overlap between neighbouring samples.
    Overlap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagKind {
    /// Jump much larger than on the neighbouring intervals.
    Discontinuity,
    /// Eigenvector overlap below the matching threshold (near crossing).
    LowOverlap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchFlag {
    /// Index of the later sample of the interval.
    pub sample: usize,
    pub branch: usize,
    pub kind: FlagKind,
    pub value: f64,
}

/// Overlaps below this mark a near-crossing window.
pub const OVERLAP_THRESHOLD: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchDiagram {
    pub parameter: SweepParameter,
    pub samples: Vec<f64>,
    /// `branches[b][s]`: value of branch `b` at sample `s`.
    pub branches: Vec<Vec<f64>>,
    /// `order[s][b]`: position of branch `b` in the sorted spectrum at sample `s`.
    pub order: Vec<Vec<usize>>,
    pub matching: Matching,
    /// Smallest relative gap among the tracked eigenvalues, per sample.
    pub gaps: Vec<f64>,
    pub max_residual: f64,
    pub mesh_level: u32,
    pub flags: Vec<BranchFlag>,
    pub warnings: Vec<String>,
    /// Two-level extrapolated branches, produced for non-convex domains.
    pub extrapolated: Option<Vec<Vec<f64>>>,
}

impl BranchDiagram {
    /// `(parameter, value)` pairs of one branch.
    pub fn branch_points(&self, b: usize) -> Vec<(f64, f64)> {
        self.samples
            .iter()
            .copied()
            .zip(self.branches[b].iter().copied())
            .collect()
    }

    /// Sorted eigenvalues at sample `s`, rebuilt from the branches.
    pub fn sorted_at(&self, s: usize) -> Vec<f64> {
        let mut v: Vec<f64> = self.branches.iter().map(|b| b[s]).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// Largest relative jump between adjacent samples over all branches.
    pub fn max_relative_jump(&self) -> f64 {
        self.branches
            .iter()
            .flat_map(|b| {
                b.windows(2).map(|w| {
                    (w[1] - w[0]).abs() / w[0].abs().max(w[1].abs()).max(f64::MIN_POSITIVE)
                })
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub solve: SolveOptions,
    pub matching: Matching,
    /// Extra refinement level and two-level extrapolation on non-convex domains.
    pub refine_nonconvex: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            solve: SolveOptions::default(),
            matching: Matching::Overlap,
            refine_nonconvex: true,
        }
    }
}

/// `n` equally spaced values on `[a, b]`, endpoints exact.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    b
                } else {
                    a + (b - a) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

fn tag(param: f64) -> impl Fn(DeformError) -> DeformError {
    move |e| DeformError::SampleFailed {
        param,
        source: Box::new(e),
    }
}

fn solve_samples<F>(
    params: &[f64],
    k: usize,
    opts: &SolveOptions,
    form_at: F,
) -> Result<Vec<(FormPair, Spectrum)>>
where
    F: Fn(f64) -> Result<FormPair> + Sync,
{
    params
        .par_iter()
        .map(|&p| {
            let run = || -> Result<(FormPair, Spectrum)> {
                let f = form_at(p)?;
                let s = smallest_eigenpairs(&f, k, opts)?;
                Ok((f, s))
            };
            run().map_err(tag(p))
        })
        .collect()
}

fn mesh_is_nonconvex(mesh: &TriMesh) -> bool {
    mesh.parent().is_some_and(|p| !p.is_convex())
}

/// Sweep along a deformation path at the given parameter values.
pub fn sweep_t_at(
    path: &DeformationPath,
    bc: BoundaryCondition,
    k: usize,
    ts: &[f64],
    opts: &SweepOptions,
) -> Result<BranchDiagram> {
    if ts.len() < 2 {
        return Err(DeformError::TooFewSamples(ts.len()));
    }
    let mut ts = ts.to_vec();
    ts.sort_by(f64::total_cmp);
    if let Some(&bad) = ts.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(GeometryError::ParameterOutOfRange(bad).into());
    }
    let nonconvex = mesh_is_nonconvex(path.source())
        || path.target_polygon().is_some_and(|p| !p.is_convex())
        || ts
            .iter()
            .any(|&t| matches!(path.polygon_at(t), Some(Ok(p)) if !p.is_convex()));
    let fine = if nonconvex && opts.refine_nonconvex {
        path.refine(1)
    } else {
        path.clone()
    };
    let solved = solve_samples(&ts, k, &opts.solve, |t| {
        Ok(assemble_pullback(&fine, t, bc)?)
    })?;
    let mut diagram = build_diagram(SweepParameter::T, ts.clone(), solved, bc, opts.matching);
    if nonconvex {
        diagram.warnings.push(
            "non-convex domain: reentrant corners reduce the convergence rate of the eigenvalues"
                .into(),
        );
        if opts.refine_nonconvex {
            let coarse =
                solve_samples(&ts, k, &opts.solve, |t| Ok(assemble_pullback(path, t, bc)?))?;
            diagram.extrapolated = Some(extrapolate(&diagram, &coarse));
            diagram.warnings.push(
                "branches computed one refinement level finer; extrapolated values attached".into(),
            );
        }
    }
    Ok(diagram)
}

/// Sweep along a path at `samples` equally spaced values of `t` in `[0, 1]`.
pub fn sweep_t(
    path: &DeformationPath,
    bc: BoundaryCondition,
    k: usize,
    samples: usize,
    opts: &SweepOptions,
) -> Result<BranchDiagram> {
    if samples < 2 {
        return Err(DeformError::TooFewSamples(samples));
    }
    sweep_t_at(path, bc, k, &linspace(0.0, 1.0, samples), opts)
}

/// Lower limit `-1/R^2` for the curvature, `R` the largest distance of a
/// mesh point from the origin.
pub fn kappa_limit(mesh: &TriMesh) -> (f64, f64) {
    let r = mesh
        .points()
        .iter()
        .map(|p| p.coords.norm())
        .fold(0.0, f64::max);
    (
        if r > 0.0 {
            -1.0 / (r * r)
        } else {
            f64::NEG_INFINITY
        },
        r,
    )
}

/// Curvature sweep on a fixed mesh; only the coefficients change.
pub fn sweep_kappa(
    mesh: &TriMesh,
    bc: BoundaryCondition,
    k: usize,
    kappas: &[f64],
    metric_scale: f64,
    opts: &SweepOptions,
) -> Result<BranchDiagram> {
    if kappas.is_empty() {
        return Err(DeformError::TooFewSamples(0));
    }
    let (limit, radius) = kappa_limit(mesh);
    if let Some(&kappa) = kappas.iter().find(|&&c| !(c > limit) || !c.is_finite()) {
        return Err(DeformError::KappaOutOfRange {
            kappa,
            limit,
            radius,
        });
    }
    let mut ks = kappas.to_vec();
    ks.sort_by(f64::total_cmp);
    let spec_at = |c: f64| MetricSpec::new(c, metric_scale).map_err(AssemblyError::from);
    let solved = solve_samples(&ks, k, &opts.solve, |c| {
        Ok(assemble(mesh, &spec_at(c)?, bc)?)
    })?;
    let mut diagram = build_diagram(SweepParameter::Kappa, ks, solved, bc, opts.matching);
    if mesh_is_nonconvex(mesh) {
        diagram.warnings.push(
            "non-convex domain: reentrant corners reduce the convergence rate of the eigenvalues"
                .into(),
        );
    }
    Ok(diagram)
}

/// `(4 fine - coarse) / 3` per branch, with coarse values taken in sorted order.
fn extrapolate(diagram: &BranchDiagram, coarse: &[(FormPair, Spectrum)]) -> Vec<Vec<f64>> {
    diagram
        .branches
        .iter()
        .enumerate()
        .map(|(b, vals)| {
            vals.iter()
                .enumerate()
                .map(|(s, &f)| {
                    let c = coarse[s].1.eigenvalues[diagram.order[s][b]];
                    (4.0 * f - c) / 3.0
                })
                .collect()
        })
        .collect()
}

fn overlap(m: &FormPair, u: &[f64], v: &[f64]) -> f64 {
    let mv = m.m.matvec(v);
    u.iter().zip(&mv).map(|(a, b)| a * b).sum::<f64>().abs()
}

fn build_diagram(
    parameter: SweepParameter,
    samples: Vec<f64>,
    solved: Vec<(FormPair, Spectrum)>,
    bc: BoundaryCondition,
    matching: Matching,
) -> BranchDiagram {
    let k = solved[0].1.eigenvalues.len();
    let ns = samples.len();
    let mut order: Vec<Vec<usize>> = vec![(0..k).collect()];
    let mut flags = Vec::new();
    for s in 1..ns {
        let prev = &order[s - 1];
        let next = match matching {
            Matching::Order => (0..k).collect(),
            Matching::Overlap => {
                let (form, cur) = &solved[s];
                let u0 = solved[s - 1]
                    .1
                    .eigenvectors
                    .as_ref()
                    .expect("solver keeps vectors");
                let u1 = cur.eigenvectors.as_ref().expect("solver keeps vectors");
                // o[b][j]: overlap of branch b (previous sample) with sorted pair j
                let o: Vec<Vec<f64>> = (0..k)
                    .map(|b| {
                        (0..k)
                            .map(|j| overlap(form, &u0[prev[b]], &u1[j]))
                            .collect()
                    })
                    .collect();
                let mut cand: Vec<(usize, usize)> =
                    (0..k).flat_map(|b| (0..k).map(move |j| (b, j))).collect();
                cand.sort_by(|&(b1, j1), &(b2, j2)| {
                    o[b2][j2]
                        .total_cmp(&o[b1][j1])
                        .then((b1, j1).cmp(&(b2, j2)))
                });
                let mut assign = vec![usize::MAX; k];
                let mut taken = vec![false; k];
                for (b, j) in cand {
                    if assign[b] == usize::MAX && !taken[j] {
                        assign[b] = j;
                        taken[j] = true;
                    }
                }
                for (b, &j) in assign.iter().enumerate() {
                    if o[b][j] < OVERLAP_THRESHOLD {
                        flags.push(BranchFlag {
                            sample: s,
                            branch: b,
                            kind: FlagKind::LowOverlap,
                            value: o[b][j],
                        });
                    }
                }
                assign
            }
        };
        order.push(next);
    }
    let branches: Vec<Vec<f64>> = (0..k)
        .map(|b| {
            (0..ns)
                .map(|s| solved[s].1.eigenvalues[order[s][b]])
                .collect()
        })
        .collect();
    flags.extend(continuity_flags(&branches));
    let gaps = solved
        .iter()
        .map(|(_, s)| {
            relative_gaps(&s.eigenvalues, bc)
                .into_iter()
                .map(|g| g.1)
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let max_residual = solved
        .iter()
        .map(|(_, s)| s.max_residual())
        .fold(0.0, f64::max);
    BranchDiagram {
        parameter,
        samples,
        branches,
        order,
        matching,
        gaps,
        max_residual,
        mesh_level: solved[0].0.meta.mesh_level,
        flags,
        warnings: Vec::new(),
        extrapolated: None,
    }
}

/// A jump is suspicious when it exceeds three times the larger neighbouring
/// jump and one part in a thousand of the value.
fn continuity_flags(branches: &[Vec<f64>]) -> Vec<BranchFlag> {
    let mut flags = Vec::new();
    for (b, vals) in branches.iter().enumerate() {
        let d: Vec<f64> = vals.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        for i in 0..d.len() {
            let left = if i > 0 { d[i - 1] } else { 0.0 };
            let right = d.get(i + 1).copied().unwrap_or(0.0);
            if d.len() > 1 && d[i] > 3.0 * left.max(right) && d[i] > 1e-3 * vals[i].abs() {
                flags.push(BranchFlag {
                    sample: i + 1,
                    branch: b,
                    kind: FlagKind::Discontinuity,
                    value: d[i],
                });
            }
        }
    }
    flags
}
