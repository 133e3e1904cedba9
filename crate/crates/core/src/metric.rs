//! Constant-curvature metrics in the projective (Klein) model.
//!
//! In polar coordinates the metric of curvature `kappa` reads
//!
//! ```text
//! g = d rho^2 / (1 + kappa rho^2)^2 + rho^2 d theta^2 / (1 + kappa rho^2)
//! ```
//!
//! and straight segments are geodesics. We work with the Cartesian form
//! `G_ij = delta_ij / (1 + u) - kappa p_i p_j / (1 + u)^2`, `u = kappa |p|^2`,
//! which has the radial eigenvalue `1 / (1 + u)^2` (eigenvector `p`) and the
//! tangential eigenvalue `1 / (1 + u)`, and is regular at the origin.
//! The metric is tied to the coordinate origin: translations are not
//! isometries unless `kappa = 0`.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point, Polygon};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("point ({x}, {y}) outside the admissible disc of radius {radius} for kappa = {kappa}")]
    OutsideDomain {
        x: f64,
        y: f64,
        kappa: f64,
        radius: f64,
    },
    #[error("finite-difference step {0} is not usable (need 0 < h <= 0.1)")]
    StepTooLarge(f64),
    #[error("metric scale must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("kappa must be finite, got {0}")]
    InvalidKappa(f64),
}

pub type Result<T> = std::result::Result<T, MetricError>;

/// Curvature `kappa` and a constant conformal factor `scale`; the metric is
/// `scale * g_kappa`, of curvature `kappa / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSpec {
    pub kappa: f64,
    #[serde(rename = "metric_scale", default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for MetricSpec {
    fn default() -> Self {
        MetricSpec::flat()
    }
}

impl MetricSpec {
    pub fn new(kappa: f64, scale: f64) -> Result<Self> {
        if !kappa.is_finite() {
            return Err(MetricError::InvalidKappa(kappa));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(MetricError::InvalidScale(scale));
        }
        Ok(MetricSpec { kappa, scale })
    }

    pub fn flat() -> Self {
        MetricSpec {
            kappa: 0.0,
            scale: 1.0,
        }
    }

    pub fn with_kappa(kappa: f64) -> Result<Self> {
        MetricSpec::new(kappa, 1.0)
    }

    pub fn is_flat(&self) -> bool {
        self.kappa == 0.0
    }

    /// Curvature of `scale * g_kappa`.
    pub fn curvature(&self) -> f64 {
        self.kappa / self.scale
    }

    /// Radius of the admissible disc; infinite for `kappa >= 0`.
    pub fn domain_radius(&self) -> f64 {
        if self.kappa < 0.0 {
            (-self.kappa).powf(-0.5)
        } else {
            f64::INFINITY
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        self.kappa >= 0.0 || 1.0 + self.kappa * p.coords.norm_squared() > 0.0
    }

    pub fn check_point(&self, p: Point) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(MetricError::OutsideDomain {
                x: p.x,
                y: p.y,
                kappa: self.kappa,
                radius: self.domain_radius(),
            })
        }
    }

    /// Every vertex (hence, by convexity of the disc, the polygon) inside.
    pub fn check_polygon(&self, poly: &Polygon) -> Result<()> {
        poly.vertices()
            .iter()
            .try_for_each(|&p| self.check_point(p))
    }

    fn u(&self, p: Point) -> f64 {
        self.kappa * p.coords.norm_squared()
    }

    pub fn metric_tensor(&self, p: Point) -> Result<Matrix2<f64>> {
        self.check_point(p)?;
        Ok(self.tensor_unchecked(p))
    }

    pub(crate) fn tensor_unchecked(&self, p: Point) -> Matrix2<f64> {
        let w = 1.0 + self.u(p);
        let c = self.kappa / (w * w);
        let (x, y) = (p.x, p.y);
        let g = Matrix2::new(
            1.0 / w - c * x * x,
            -c * x * y,
            -c * x * y,
            1.0 / w - c * y * y,
        );
        g * self.scale
    }

    /// `G^{-1} = (1 + u) (I + kappa p p^T) / scale`.
    pub(crate) fn inverse_tensor_unchecked(&self, p: Point) -> Matrix2<f64> {
        let w = 1.0 + self.u(p);
        let k = self.kappa;
        let (x, y) = (p.x, p.y);
        Matrix2::new(1.0 + k * x * x, k * x * y, k * x * y, 1.0 + k * y * y) * (w / self.scale)
    }

    pub fn volume_density(&self, p: Point) -> Result<f64> {
        self.check_point(p)?;
        Ok(self.density_unchecked(p))
    }

    pub(crate) fn density_unchecked(&self, p: Point) -> f64 {
        self.scale * (1.0 + self.u(p)).powf(-1.5)
    }

    /// Gaussian curvature of the tensor field at `p` by central differences
    /// in the Brioschi formula. Should return `kappa / scale`.
    pub fn check_gaussian_curvature(&self, p: Point, h: f64) -> Result<f64> {
        if !(h > 0.0 && h <= 0.1) {
            return Err(MetricError::StepTooLarge(h));
        }
        for (dx, dy) in [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)] {
            self.check_point(Point::new(p.x + dx * h, p.y + dy * h))?;
        }
        let g = |dx: f64, dy: f64| {
            let m = self.tensor_unchecked(Point::new(p.x + dx * h, p.y + dy * h));
            (m[(0, 0)], m[(0, 1)], m[(1, 1)])
        };
        let (e, f, gg) = g(0.0, 0.0);
        let (e_xp, f_xp, g_xp) = g(1.0, 0.0);
        let (e_xm, f_xm, g_xm) = g(-1.0, 0.0);
        let (e_yp, f_yp, g_yp) = g(0.0, 1.0);
        let (e_ym, f_ym, g_ym) = g(0.0, -1.0);
        let (_, f_pp, _) = g(1.0, 1.0);
        let (_, f_pm, _) = g(1.0, -1.0);
        let (_, f_mp, _) = g(-1.0, 1.0);
        let (_, f_mm, _) = g(-1.0, -1.0);

        let d = |plus: f64, minus: f64| (plus - minus) / (2.0 * h);
        let dd = |plus: f64, mid: f64, minus: f64| (plus - 2.0 * mid + minus) / (h * h);
        let (e_x, e_y) = (d(e_xp, e_xm), d(e_yp, e_ym));
        let (f_x, f_y) = (d(f_xp, f_xm), d(f_yp, f_ym));
        let (g_x, g_y) = (d(g_xp, g_xm), d(g_yp, g_ym));
        let e_yy = dd(e_yp, e, e_ym);
        let g_xx = dd(g_xp, gg, g_xm);
        let f_xy = (f_pp - f_pm - f_mp + f_mm) / (4.0 * h * h);

        let a = nalgebra::Matrix3::new(
            -0.5 * e_yy + f_xy - 0.5 * g_xx,
            0.5 * e_x,
            f_x - 0.5 * e_y,
            f_y - 0.5 * g_x,
            e,
            f,
            0.5 * g_y,
            f,
            gg,
        );
        let b =
            nalgebra::Matrix3::new(0.0, 0.5 * e_y, 0.5 * g_x, 0.5 * e_y, e, f, 0.5 * g_x, f, gg);
        let det_g = e * gg - f * f;
        Ok((a.determinant() - b.determinant()) / (det_g * det_g))
    }

    /// Bounds `[c, 1/c]` on the tensor eigenvalues and on the density over
    /// the disc of radius `radius`, uniformly for curvatures in
    /// `[kappa_lo, kappa_hi]` (scale 1). Returns `None` when some curvature
    /// in the interval does not admit the disc.
    pub fn uniform_equivalence_constant(kappa_lo: f64, kappa_hi: f64, radius: f64) -> Option<f64> {
        let r2 = radius * radius;
        let u_lo = (kappa_lo * r2).min(0.0);
        let u_hi = (kappa_hi * r2).max(0.0);
        if 1.0 + u_lo <= 0.0 {
            return None;
        }
        // all three quantities are monotone decreasing in u
        let lo = (1.0 + u_hi).powi(-2).min((1.0 + u_hi).powf(-1.5));
        let hi = (1.0 + u_lo).powi(-2).max((1.0 + u_lo).powf(-1.5));
        Some(lo.min(1.0 / hi))
    }
}

/// Euclidean rotation about the origin: an isometry of every `g_kappa`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KleinRotation {
    cos: f64,
    sin: f64,
}

pub fn klein_rotation(angle: f64) -> KleinRotation {
    let (sin, cos) = angle.sin_cos();
    KleinRotation { cos, sin }
}

impl KleinRotation {
    pub fn apply(&self, p: Point) -> Point {
        Point::new(
            self.cos * p.x - self.sin * p.y,
            self.sin * p.x + self.cos * p.y,
        )
    }

    pub fn matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.cos, -self.sin, self.sin, self.cos)
    }

    pub fn apply_polygon(&self, poly: &Polygon) -> Polygon {
        poly.map_points(|p| self.apply(p))
            .expect("rotation preserves simplicity")
    }
}
