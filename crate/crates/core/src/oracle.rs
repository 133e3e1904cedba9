//! Reference values: closed-form rectangle spectra and a dense solver.
//!
//! On `[0, s1] x [0, s2]` the eigenfunctions are products of sines (Dirichlet,
//! `m, n >= 1`) or cosines (Neumann, `m, n >= 0`) with eigenvalues
//! `pi^2 (m^2 / s1^2 + n^2 / s2^2)`.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;
use thiserror::Error;

use crate::assembly::{BoundaryCondition, SparseSymmetric};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("side lengths must be positive and finite, got {0} x {1}")]
    InvalidSides(f64, f64),
    #[error("ratio {0}/{1} is not a positive rational")]
    InvalidRational(u64, u64),
    #[error("mode ({0}, {1}) is not admissible for {2} conditions")]
    InvalidIndices(u32, u32, BoundaryCondition),
    #[error("mass matrix is not positive definite")]
    MassNotDefinite,
}

pub type Result<T> = std::result::Result<T, OracleError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectSpec {
    pub s1: f64,
    pub s2: f64,
    pub bc: BoundaryCondition,
}

impl RectSpec {
    pub fn new(s1: f64, s2: f64, bc: BoundaryCondition) -> Result<Self> {
        if !(s1 > 0.0 && s2 > 0.0 && s1.is_finite() && s2.is_finite()) {
            return Err(OracleError::InvalidSides(s1, s2));
        }
        Ok(RectSpec { s1, s2, bc })
    }

    pub fn eigenvalue(&self, m: u32, n: u32) -> f64 {
        let (m, n) = (m as f64, n as f64);
        PI * PI * (m * m / (self.s1 * self.s1) + n * n / (self.s2 * self.s2))
    }
}

fn lowest_index(bc: BoundaryCondition) -> u32 {
    match bc {
        BoundaryCondition::Dirichlet => 1,
        BoundaryCondition::Neumann => 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RectEigen {
    pub value: f64,
    pub m: u32,
    pub n: u32,
    /// Number of index pairs sharing this value (within the listed range).
    pub multiplicity: usize,
}

/// Values agreeing to this relative tolerance count as one eigenvalue.
const TIE_REL: f64 = 1e-12;

/// The `k` smallest eigenvalues with index pairs, ties ordered by `(m, n)`.
pub fn rect_spectrum(spec: &RectSpec, k: usize) -> Vec<RectEigen> {
    let lo = lowest_index(spec.bc);
    // the pairs (lo..lo + k, lo) already give k values, so larger indices
    // cannot enter the k smallest
    let hi = lo + k as u32;
    let mut all: Vec<RectEigen> = (lo..hi)
        .flat_map(|m| (lo..hi).map(move |n| (m, n)))
        .map(|(m, n)| RectEigen {
            value: spec.eigenvalue(m, n),
            m,
            n,
            multiplicity: 1,
        })
        .collect();
    all.sort_by(|a, b| {
        a.value
            .total_cmp(&b.value)
            .then((a.m, a.n).cmp(&(b.m, b.n)))
    });
    let mut groups: Vec<Vec<RectEigen>> = Vec::new();
    for e in all {
        match groups.last_mut() {
            Some(g) if (e.value - g[0].value).abs() <= TIE_REL * g[0].value.abs().max(1.0) => {
                g.push(e)
            }
            _ => groups.push(vec![e]),
        }
    }
    let mut out = Vec::with_capacity(k);
    for mut g in groups {
        g.sort_by_key(|e| (e.m, e.n));
        let mult = g.len();
        for mut e in g {
            e.multiplicity = mult;
            out.push(e);
        }
        if out.len() >= k {
            break;
        }
    }
    out.truncate(k);
    out
}

/// Arithmetic nature of `(s1 / s2)^2`, stated by the caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SideRatio {
    /// `(s1 / s2)^2 = p / q`.
    Rational {
        p: u64,
        q: u64,
    },
    Irrational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Simplicity {
    Simple,
    /// Two index pairs with the same eigenvalue.
    NotSimple {
        witness: ((u32, u32), (u32, u32)),
    },
    /// No coincidence among indices up to the search bound.
    Unknown,
}

/// Simplicity of the rectangle spectrum.
///
/// For `(s1/s2)^2 = p/q` the eigenvalues are proportional to `q m^2 + p n^2`,
/// so a multiple eigenvalue is an integer coincidence, searched for with
/// indices up to `bound`.
pub fn rect_is_simple(ratio: SideRatio, bc: BoundaryCondition, bound: u32) -> Result<Simplicity> {
    let (p, q) = match ratio {
        SideRatio::Irrational => return Ok(Simplicity::Simple),
        SideRatio::Rational { p, q } if p > 0 && q > 0 => (p as u128, q as u128),
        SideRatio::Rational { p, q } => return Err(OracleError::InvalidRational(p, q)),
    };
    let lo = lowest_index(bc);
    let mut seen: HashMap<u128, (u32, u32)> = HashMap::new();
    let mut best: Option<(u128, ((u32, u32), (u32, u32)))> = None;
    for m in lo..=bound {
        for n in lo..=bound {
            let key = q * (m as u128).pow(2) + p * (n as u128).pow(2);
            if let Some(&first) = seen.get(&key) {
                // keep the lowest coinciding level for a canonical witness
                if best.is_none_or(|(b, _)| key < b) {
                    best = Some((key, (first, (m, n))));
                }
            } else {
                seen.insert(key, (m, n));
            }
        }
    }
    Ok(match best {
        Some((_, witness)) => Simplicity::NotSimple { witness },
        None => Simplicity::Unknown,
    })
}

/// One mode followed as the second side `s` varies: `pi^2 (m^2/s1^2 + n^2/s^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectBranch {
    pub s1: f64,
    pub s_range: (f64, f64),
    pub m: u32,
    pub n: u32,
}

pub fn rect_branch(
    s1: f64,
    s_range: (f64, f64),
    (m, n): (u32, u32),
    bc: BoundaryCondition,
) -> Result<RectBranch> {
    if !(s1 > 0.0 && s_range.0 > 0.0 && s_range.0 <= s_range.1) {
        return Err(OracleError::InvalidSides(s1, s_range.0));
    }
    let lo = lowest_index(bc);
    if m < lo || n < lo {
        return Err(OracleError::InvalidIndices(m, n, bc));
    }
    Ok(RectBranch { s1, s_range, m, n })
}

impl RectBranch {
    pub fn eval(&self, s: f64) -> f64 {
        let (m, n) = (self.m as f64, self.n as f64);
        PI * PI * (m * m / (self.s1 * self.s1) + n * n / (s * s))
    }

    /// Parameter in the range where the two branches meet, if any.
    pub fn crossing_with(&self, other: &RectBranch) -> Option<f64> {
        let (m, n) = (self.m as f64, self.n as f64);
        let (mb, nb) = (other.m as f64, other.n as f64);
        let num = n * n - nb * nb;
        let den = mb * mb - m * m;
        if den == 0.0 || num / den <= 0.0 {
            return None;
        }
        let s = self.s1 * (num / den).sqrt();
        (self.s_range.0..=self.s_range.1).contains(&s).then_some(s)
    }
}

/// All generalized eigenvalues of `(K, M)` by dense Cholesky reduction.
pub fn dense_spectrum(k: &SparseSymmetric, m: &SparseSymmetric) -> Result<Vec<f64>> {
    let l = m
        .to_dense()
        .cholesky()
        .ok_or(OracleError::MassNotDefinite)?
        .l();
    let linv = l.try_inverse().ok_or(OracleError::MassNotDefinite)?;
    let c: DMatrix<f64> = &linv * k.to_dense() * linv.transpose();
    let mut ev: Vec<f64> = SymmetricEigen::new((&c + c.transpose()) * 0.5)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}
