use serde::Serialize;

use super::{DeformError, Result};
use crate::assembly::{assemble, assemble_pullback, BoundaryCondition, FormPair};
use crate::eigensolve::{smallest_eigenpairs, SolveOptions, Spectrum};
use crate::geometry::{DeformationPath, TriMesh};
use crate::metric::MetricSpec;

/// Denominator floor, relative to the largest eigenvalue.
const FLOOR_REL: f64 = 1e-12;

fn first_gap_index(bc: BoundaryCondition) -> usize {
    match bc {
        BoundaryCondition::Dirichlet => 1,
        // the zero mode is not part of the gap sequence
        BoundaryCondition::Neumann => 2,
    }
}

/// `(j, (lambda_{j+1} - lambda_j) / max(lambda_j, floor))` with 1-based `j`.
pub fn relative_gaps(ev: &[f64], bc: BoundaryCondition) -> Vec<(usize, f64)> {
    let top = ev.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    let floor = (FLOOR_REL * top).max(f64::MIN_POSITIVE);
    (first_gap_index(bc)..ev.len())
        .map(|j| (j, (ev[j] - ev[j - 1]) / ev[j - 1].max(floor)))
        .collect()
}

/// Index and value of the smallest relative gap with `j <= j_max`.
pub fn min_gap(s: &Spectrum, j_max: usize) -> Result<(usize, f64)> {
    let needed = first_gap_index(s.meta.bc) + 1;
    if s.eigenvalues.len() < needed {
        return Err(DeformError::TooFewEigenvalues {
            needed,
            got: s.eigenvalues.len(),
        });
    }
    relative_gaps(&s.eigenvalues, s.meta.bc)
        .into_iter()
        .filter(|&(j, _)| j <= j_max)
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .ok_or(DeformError::TooFewEigenvalues {
            needed: j_max + 1,
            got: s.eigenvalues.len(),
        })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapCheck {
    pub j: usize,
    pub gap: f64,
    /// Gap of the discrete spectrum exceeds `eps_gap`.
    pub discrete_simple: bool,
    /// Estimated relative error of `lambda_j` plus that of `lambda_{j+1}`.
    pub error_estimate: Option<f64>,
    /// Gap exceeds the estimated error as well.
    pub exceeds_error: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub eps_gap: f64,
    pub mesh_level: u32,
    pub checks: Vec<GapCheck>,
    pub all_simple: bool,
    pub caveat: String,
}

const CAVEAT: &str = "applies to the discrete spectrum at this mesh level; \
a statement about the continuous operator needs every gap to exceed the estimated discretization error";

/// Gap test for `j <= j_max`. With a spectrum from the next coarser level the
/// two-level estimate `|fine - coarse| / 3` of the discretization error is
/// reported next to each gap.
pub fn certify_simple(
    s: &Spectrum,
    j_max: usize,
    eps_gap: f64,
    coarse: Option<&Spectrum>,
) -> Result<Certificate> {
    let allowed = eps_gap / 10.0;
    if s.max_residual() > allowed {
        return Err(DeformError::ResidualsTooLarge {
            max: s.max_residual(),
            allowed,
        });
    }
    let err: Option<Vec<f64>> = coarse.map(|c| {
        s.eigenvalues
            .iter()
            .zip(&c.eigenvalues)
            .map(|(f, c)| (f - c).abs() / (3.0 * f.abs().max(f64::MIN_POSITIVE)))
            .collect()
    });
    let checks: Vec<GapCheck> = relative_gaps(&s.eigenvalues, s.meta.bc)
        .into_iter()
        .filter(|&(j, _)| j <= j_max)
        .map(|(j, gap)| {
            let e = err.as_ref().and_then(|e| Some(e.get(j - 1)? + e.get(j)?));
            GapCheck {
                j,
                gap,
                discrete_simple: gap > eps_gap,
                error_estimate: e,
                exceeds_error: e.map(|e| gap > e),
            }
        })
        .collect();
    if checks.is_empty() {
        return Err(DeformError::TooFewEigenvalues {
            needed: first_gap_index(s.meta.bc) + 1,
            got: s.eigenvalues.len(),
        });
    }
    Ok(Certificate {
        eps_gap,
        mesh_level: s.meta.mesh_level,
        all_simple: checks.iter().all(|c| c.discrete_simple),
        checks,
        caveat: CAVEAT.into(),
    })
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for a minimum of `f` on `[a, b]` down to bracket
/// width `tol`. Returns `(x, f(x), f(a), f(b))`.
pub fn golden_section_min<F>(mut f: F, a: f64, b: f64, tol: f64) -> Result<(f64, f64, f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(a < b) || !(tol > 0.0) {
        return Err(DeformError::InvalidArgument(format!(
            "bracket [{a}, {b}] with tolerance {tol}"
        )));
    }
    let (fa, fb) = (f(a)?, f(b)?);
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2)?;
        }
    }
    let (x, fx) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    Ok((x, fx, fa, fb))
}

/// One-parameter family searched for a degeneracy.
#[derive(Debug, Clone, Copy)]
pub enum DegeneracyFamily<'a> {
    Path(&'a DeformationPath),
    Kappa {
        mesh: &'a TriMesh,
        metric_scale: f64,
    },
}

impl DegeneracyFamily<'_> {
    fn form(&self, p: f64, bc: BoundaryCondition, refine: u32) -> Result<FormPair> {
        Ok(match self {
            DegeneracyFamily::Path(path) => {
                let path = if refine > 0 {
                    path.refine(refine)
                } else {
                    (*path).clone()
                };
                assemble_pullback(&path, p, bc)?
            }
            DegeneracyFamily::Kappa { mesh, metric_scale } => {
                let spec = MetricSpec::new(p, *metric_scale)
                    .map_err(crate::assembly::AssemblyError::from)?;
                let mesh = if refine > 0 {
                    mesh.refine(refine)
                } else {
                    (*mesh).clone()
                };
                assemble(&mesh, &spec, bc)?
            }
        })
    }
}

/// Result of a degeneracy search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    #[serde(rename = "param*")]
    pub param_star: f64,
    #[serde(rename = "gap*")]
    pub gap_star: f64,
    pub j: usize,
    pub mesh_level: u32,
    /// Relative error of `lambda_j`, `lambda_{j+1}` at the minimizer,
    /// estimated against one further refinement.
    pub discretization_error_estimate: f64,
}

/// Minimizes the relative gap between `lambda_j` and `lambda_{j+1}` (1-based)
/// over `bracket` by golden section.
pub fn locate_degeneracy(
    family: DegeneracyFamily,
    bc: BoundaryCondition,
    j: usize,
    bracket: (f64, f64),
    tol: f64,
    solve: &SolveOptions,
) -> Result<GapReport> {
    if j < first_gap_index(bc) {
        return Err(DeformError::InvalidArgument(format!(
            "gap index {j} is below the first gap for {bc}"
        )));
    }
    let k = j + 1;
    let gap_at = |p: f64| -> Result<f64> {
        let f = family.form(p, bc, 0)?;
        let s = smallest_eigenpairs(&f, k, solve)?;
        Ok(relative_gaps(&s.eigenvalues, bc)
            .into_iter()
            .find(|&(i, _)| i == j)
            .map(|(_, g)| g)
            .unwrap())
    };
    let (x, fx, fa, fb) = golden_section_min(gap_at, bracket.0, bracket.1, tol)?;
    let edge = fa.min(fb);
    if fx >= edge - 1e-12 * fa.max(fb).abs() {
        return Err(DeformError::NoMinimumInBracket(bracket.0, bracket.1));
    }
    let coarse_form = family.form(x, bc, 0)?;
    let coarse = smallest_eigenpairs(&coarse_form, k, solve)?;
    let fine = smallest_eigenpairs(&family.form(x, bc, 1)?, k, solve)?;
    let err = (j - 1..=j)
        .map(|i| {
            4.0 / 3.0 * (coarse.eigenvalues[i] - fine.eigenvalues[i]).abs()
                / coarse.eigenvalues[i].abs()
        })
        .fold(0.0, f64::max);
    Ok(GapReport {
        param_star: x,
        gap_star: fx,
        j,
        mesh_level: coarse_form.meta.mesh_level,
        discretization_error_estimate: err,
    })
}
