//! Smallest eigenpairs of `K u = lambda M u`.
//!
//! Shift-and-invert block Krylov iteration: `A = K + sigma M` is factored
//! once (reverse Cuthill-McKee ordering, envelope Cholesky) and the operator
//! `A^{-1} M`, self-adjoint in the `M` inner product, is applied to a block of
//! `k + 3` vectors. Each restart extracts Ritz vectors from a few Krylov
//! blocks, then refines them by a Rayleigh-Ritz step on `(K, M)` itself.
//! Clusters and exact multiplicities are captured by the block.

mod cholesky;
mod ordering;

pub use cholesky::EnvelopeCholesky;
pub use ordering::reverse_cuthill_mckee;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{BoundaryCondition, FormPair, SparseSymmetric};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EigenError {
    #[error(
        "requested k = {k} eigenpairs but the problem has dimension {dim} (need 1 <= k < dim)"
    )]
    DimensionTooSmall { k: usize, dim: usize },
    #[error("no convergence after {iterations} restarts; residuals {residuals:?}")]
    NoConvergence {
        iterations: usize,
        residuals: Vec<f64>,
    },
    #[error("shifted stiffness is not positive definite (pivot {0})")]
    NotPositiveDefinite(usize),
}

pub type Result<T> = std::result::Result<T, EigenError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub seed: u64,
    /// Target relative residual.
    pub tol: f64,
    /// Maximum number of restarts.
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            seed: 0,
            tol: 1e-10,
            max_iter: 300,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumMeta {
    pub bc: BoundaryCondition,
    pub kappa: f64,
    pub metric_scale: f64,
    pub mesh_level: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// `M`-orthonormal, in unknown (not mesh point) numbering.
    pub eigenvectors: Option<Vec<Vec<f64>>>,
    pub residuals: Vec<f64>,
    pub k: usize,
    pub meta: SpectrumMeta,
}

impl Spectrum {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

fn shift(bc: BoundaryCondition) -> f64 {
    match bc {
        BoundaryCondition::Dirichlet => 0.0,
        BoundaryCondition::Neumann => 1.0,
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

/// Columns `sum_i c[(i, j)] vs[i]`.
fn combine(vs: &[Vec<f64>], c: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let n = vs.first().map_or(0, Vec::len);
    (0..c.ncols())
        .map(|j| {
            let mut out = vec![0.0; n];
            for (i, v) in vs.iter().enumerate() {
                axpy(c[(i, j)], v, &mut out);
            }
            out
        })
        .collect()
}

/// Relative residual `|K u - lambda M u| / max(|K u|, |lambda| |M u|, sigma |M u|)`.
pub fn relative_residual(ku: &[f64], mu: &[f64], lambda: f64, sigma: f64) -> f64 {
    let r: Vec<f64> = ku.iter().zip(mu).map(|(a, b)| a - lambda * b).collect();
    let nm = norm(mu);
    let den = norm(ku).max(lambda.abs() * nm).max(sigma * nm);
    if den == 0.0 {
        0.0
    } else {
        norm(&r) / den
    }
}

/// `M`-orthonormal basis with cached `M v`.
struct Basis<'a> {
    m: &'a SparseSymmetric,
    v: Vec<Vec<f64>>,
    mv: Vec<Vec<f64>>,
}

impl<'a> Basis<'a> {
    fn new(m: &'a SparseSymmetric) -> Self {
        Basis {
            m,
            v: Vec::new(),
            mv: Vec::new(),
        }
    }

    fn len(&self) -> usize {
        self.v.len()
    }

    /// Two-pass Gram-Schmidt; drops numerically dependent vectors.
    fn push(&mut self, mut x: Vec<f64>) -> bool {
        let mx = self.m.matvec(&x);
        let n0 = dot(&x, &mx).max(0.0).sqrt();
        if n0 == 0.0 || !n0.is_finite() {
            return false;
        }
        for _ in 0..2 {
            let c: Vec<f64> = self.mv.iter().map(|mv| dot(mv, &x)).collect();
            for (v, &ci) in self.v.iter().zip(&c) {
                axpy(-ci, v, &mut x);
            }
        }
        let mx = self.m.matvec(&x);
        let n1 = dot(&x, &mx).max(0.0).sqrt();
        if n1 <= 1e-10 * n0 {
            return false;
        }
        x.iter_mut().for_each(|v| *v /= n1);
        self.v.push(x);
        self.mv.push(mx.into_iter().map(|v| v / n1).collect());
        true
    }
}

/// Ritz pairs of `(K, M)` on a subspace, ascending.
struct RitzSet {
    lambda: Vec<f64>,
    u: Vec<Vec<f64>>,
    /// `K u - lambda M u`.
    r: Vec<Vec<f64>>,
    residual: Vec<f64>,
}

fn rayleigh_ritz(k: &SparseSymmetric, basis: &Basis, keep: usize, sigma: f64) -> Option<RitzSet> {
    let u = &basis.v;
    let mu = &basis.mv;
    let ku: Vec<Vec<f64>> = u.iter().map(|x| k.matvec(x)).collect();
    let d = u.len();
    let kr = DMatrix::from_fn(d, d, |i, j| 0.5 * (dot(&u[i], &ku[j]) + dot(&u[j], &ku[i])));
    let mr = DMatrix::from_fn(d, d, |i, j| 0.5 * (dot(&u[i], &mu[j]) + dot(&u[j], &mu[i])));
    let linv = mr.cholesky()?.l().try_inverse()?;
    let c = &linv * kr * linv.transpose();
    let eig = SymmetricEigen::new((&c + c.transpose()) * 0.5);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    order.truncate(keep);
    let y = linv.transpose() * &eig.eigenvectors;
    let y = DMatrix::from_fn(d, order.len(), |i, j| y[(i, order[j])]);
    let lambda: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let u2 = combine(u, &y);
    let ku2 = combine(&ku, &y);
    let mu2 = combine(mu, &y);
    let residual = (0..order.len())
        .map(|j| relative_residual(&ku2[j], &mu2[j], lambda[j], sigma))
        .collect();
    let r = (0..order.len())
        .map(|j| {
            ku2[j]
                .iter()
                .zip(&mu2[j])
                .map(|(a, b)| a - lambda[j] * b)
                .collect()
        })
        .collect();
    Some(RitzSet {
        lambda,
        u: u2,
        r,
        residual,
    })
}

/// The `k` smallest eigenpairs of a form pair.
pub fn smallest_eigenpairs(form: &FormPair, k: usize, opts: &SolveOptions) -> Result<Spectrum> {
    let meta = SpectrumMeta {
        bc: form.bc,
        kappa: form.meta.kappa,
        metric_scale: form.meta.metric_scale,
        mesh_level: form.meta.mesh_level,
    };
    let (eigenvalues, vectors, residuals) =
        solve_pencil(&form.k, &form.m, k, shift(form.bc), opts)?;
    Ok(Spectrum {
        eigenvalues,
        eigenvectors: Some(vectors),
        residuals,
        k,
        meta,
    })
}

type Pairs = (Vec<f64>, Vec<Vec<f64>>, Vec<f64>);

/// Core iteration on a bare pencil with shift `sigma` (`K + sigma M` must be
/// positive definite).
///
/// Each restart spans the current Ritz vectors, their shift-inverted
/// residuals `A^{-1} (K u - lambda M u)` and further `A^{-1} M` images of
/// those. The residual form of the first expansion keeps the new directions
/// well separated from the converged ones.
pub fn solve_pencil(
    kmat: &SparseSymmetric,
    mmat: &SparseSymmetric,
    k: usize,
    sigma: f64,
    opts: &SolveOptions,
) -> Result<Pairs> {
    let n = kmat.dim();
    if k == 0 || k >= n {
        return Err(EigenError::DimensionTooSmall { k, dim: n });
    }
    let a = SparseSymmetric::combine(1.0, kmat, sigma, mmat);
    let chol = EnvelopeCholesky::factor(&a).map_err(EigenError::NotPositiveDefinite)?;
    let b = (k + 3).min(n);
    let max_basis = n.min(4 * b);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let random: Vec<Vec<f64>> = (0..b)
        .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let mut current: Option<RitzSet> = None;
    let mut last_res = Vec::new();
    for _ in 0..opts.max_iter.max(1) {
        let mut basis = Basis::new(mmat);
        let mut block: Vec<Vec<f64>> = Vec::new();
        match current.take() {
            None => {
                for x in random.iter().cloned() {
                    if basis.push(x) {
                        block.push(chol.solve(basis.mv.last().unwrap()));
                    }
                }
            }
            Some(ritz) => {
                for (u, r) in ritz.u.into_iter().zip(&ritz.r) {
                    basis.push(u);
                    block.push(chol.solve(r));
                }
            }
        }
        while basis.len() < max_basis && !block.is_empty() {
            let mut next = Vec::new();
            for x in block {
                if basis.len() >= max_basis {
                    break;
                }
                if basis.push(x) {
                    next.push(chol.solve(basis.mv.last().unwrap()));
                }
            }
            block = next;
        }
        let ritz =
            rayleigh_ritz(kmat, &basis, b, sigma).ok_or_else(|| EigenError::NoConvergence {
                iterations: 0,
                residuals: vec![f64::NAN; k],
            })?;
        let keep = ritz.lambda.len();
        last_res = ritz.residual[..k.min(keep)].to_vec();
        if keep >= k && last_res.iter().all(|&r| r <= opts.tol) {
            return Ok((ritz.lambda[..k].to_vec(), ritz.u[..k].to_vec(), last_res));
        }
        current = Some(ritz);
    }
    Err(EigenError::NoConvergence {
        iterations: opts.max_iter,
        residuals: last_res,
    })
}
