//! P1 finite element stiffness and mass matrices.
//!
//! `assemble` discretizes `q(u) = int |grad_g u|^2 dv_g` on a mesh for a
//! [`MetricSpec`]; `assemble_pullback` discretizes the pulled-back form of a
//! deformation path on its source mesh. Dirichlet conditions remove the
//! boundary points from the unknowns.

mod sparse;

pub use sparse::SparseSymmetric;

use nalgebra::{Matrix3, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{DeformationPath, GeometryError, Point, TriMesh};
use crate::metric::{MetricError, MetricSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
}

impl std::fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BoundaryCondition::Dirichlet => "dirichlet",
            BoundaryCondition::Neumann => "neumann",
        })
    }
}

impl std::str::FromStr for BoundaryCondition {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "dirichlet" => Ok(BoundaryCondition::Dirichlet),
            "neumann" => Ok(BoundaryCondition::Neumann),
            _ => Err(format!(
                "unknown boundary condition '{s}' (expected dirichlet or neumann)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssemblyError {
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("triangle {0} is degenerate")]
    DegenerateTriangle(usize),
    #[error("rescale factor must be positive and finite, got {0}")]
    InvalidRescale(f64),
}

pub type Result<T> = std::result::Result<T, AssemblyError>;

/// Mesh point to unknown correspondence.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    point_to_dof: Vec<Option<usize>>,
    dof_to_point: Vec<usize>,
}

impl DofMap {
    pub fn new(mesh: &TriMesh, bc: BoundaryCondition) -> Self {
        let mut point_to_dof = vec![None; mesh.num_points()];
        let mut dof_to_point = Vec::new();
        for (i, slot) in point_to_dof.iter_mut().enumerate() {
            if bc == BoundaryCondition::Neumann || !mesh.is_boundary(i) {
                *slot = Some(dof_to_point.len());
                dof_to_point.push(i);
            }
        }
        DofMap {
            point_to_dof,
            dof_to_point,
        }
    }

    pub fn len(&self) -> usize {
        self.dof_to_point.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dof_to_point.is_empty()
    }

    pub fn dof(&self, point: usize) -> Option<usize> {
        self.point_to_dof[point]
    }

    pub fn point(&self, dof: usize) -> usize {
        self.dof_to_point[dof]
    }

    /// Nodal values on all mesh points, zero on eliminated points.
    pub fn expand(&self, u: &[f64]) -> Vec<f64> {
        self.point_to_dof
            .iter()
            .map(|d| d.map_or(0.0, |k| u[k]))
            .collect()
    }
}

/// What a pair was assembled from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormMeta {
    pub kappa: f64,
    pub metric_scale: f64,
    pub mesh_level: u32,
}

/// Stiffness `k`, mass `m` and their unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct FormPair {
    pub k: SparseSymmetric,
    pub m: SparseSymmetric,
    pub dof_map: DofMap,
    pub bc: BoundaryCondition,
    pub meta: FormMeta,
}

impl FormPair {
    pub fn dim(&self) -> usize {
        self.k.dim()
    }
}

// Symmetric 6-point rule, exact for degree 4. Barycentric (a, a, 1 - 2a) orbits.
const QUAD_ORBITS: [(f64, f64); 2] = [
    (0.223381589678011465944, 0.445948490915964886319),
    (0.109951743655321867389, 0.091576213509770743460),
];

fn quadrature_points() -> [(f64, [f64; 3]); 6] {
    let mut out = [(0.0, [0.0; 3]); 6];
    for (o, &(w, a)) in QUAD_ORBITS.iter().enumerate() {
        let b = 1.0 - 2.0 * a;
        for (r, bary) in [[a, a, b], [a, b, a], [b, a, a]].into_iter().enumerate() {
            out[3 * o + r] = (w, bary);
        }
    }
    out
}

/// Area and barycentric gradients (as columns) of a triangle.
fn gradients(p: [Point; 3]) -> Option<(f64, [Vector2<f64>; 3])> {
    let twice = (p[1] - p[0]).perp(&(p[2] - p[0]));
    if !(twice > 0.0) {
        return None;
    }
    let g = |i: usize| {
        let e = p[(i + 2) % 3] - p[(i + 1) % 3];
        Vector2::new(-e.y, e.x) / twice
    };
    Some((0.5 * twice, [g(0), g(1), g(2)]))
}

const P1_MASS: [[f64; 3]; 3] = [[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]];

/// Constant metric `c I`: the Dirichlet energy is conformally invariant, so only
/// the mass sees `c`.
fn flat_element(
    area: f64,
    grads: &[Vector2<f64>; 3],
    density: f64,
) -> (Matrix3<f64>, Matrix3<f64>) {
    let k = Matrix3::from_fn(|i, j| area * grads[i].dot(&grads[j]));
    let m = Matrix3::from_fn(|i, j| density * area / 12.0 * P1_MASS[i][j]);
    (k, m)
}

fn curved_element(
    p: [Point; 3],
    area: f64,
    grads: &[Vector2<f64>; 3],
    spec: &MetricSpec,
) -> (Matrix3<f64>, Matrix3<f64>) {
    let mut k = Matrix3::zeros();
    let mut m = Matrix3::zeros();
    for (w, bary) in quadrature_points() {
        let x = Point::from(p[0].coords * bary[0] + p[1].coords * bary[1] + p[2].coords * bary[2]);
        let rho = spec.density_unchecked(x);
        let ginv = spec.inverse_tensor_unchecked(x);
        let wa = w * area * rho;
        for i in 0..3 {
            for j in 0..3 {
                k[(i, j)] += wa * grads[i].dot(&(ginv * grads[j]));
                m[(i, j)] += wa * bary[i] * bary[j];
            }
        }
    }
    (k, m)
}

/// Scatters element matrices in triangle order.
fn scatter(
    triangles: &[[usize; 3]],
    elements: &[(Matrix3<f64>, Matrix3<f64>)],
    dofs: &DofMap,
) -> (SparseSymmetric, SparseSymmetric) {
    let mut kt = Vec::with_capacity(6 * triangles.len());
    let mut mt = Vec::with_capacity(6 * triangles.len());
    for (tri, (ke, me)) in triangles.iter().zip(elements) {
        for a in 0..3 {
            let Some(i) = dofs.dof(tri[a]) else { continue };
            for b in a..3 {
                let Some(j) = dofs.dof(tri[b]) else { continue };
                // symmetrize the element so both triangles of the global matrix agree
                kt.push((
                    i,
                    j,
                    if a == b {
                        ke[(a, a)]
                    } else {
                        0.5 * (ke[(a, b)] + ke[(b, a)])
                    },
                ));
                mt.push((
                    i,
                    j,
                    if a == b {
                        me[(a, a)]
                    } else {
                        0.5 * (me[(a, b)] + me[(b, a)])
                    },
                ));
            }
        }
    }
    let n = dofs.len();
    (
        SparseSymmetric::from_triplets(n, &kt),
        SparseSymmetric::from_triplets(n, &mt),
    )
}

/// Direct assembly of the form of `spec` on `mesh`.
pub fn assemble(mesh: &TriMesh, spec: &MetricSpec, bc: BoundaryCondition) -> Result<FormPair> {
    for &p in mesh.points() {
        spec.check_point(p)?;
    }
    let elements: Vec<_> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let p = mesh.triangle_points(t);
            let (area, grads) = gradients(p).ok_or(AssemblyError::DegenerateTriangle(t))?;
            Ok(if spec.is_flat() {
                flat_element(area, &grads, spec.scale)
            } else {
                curved_element(p, area, &grads, spec)
            })
        })
        .collect::<Result<_>>()?;
    let dof_map = DofMap::new(mesh, bc);
    let (k, m) = scatter(mesh.triangles(), &elements, &dof_map);
    Ok(FormPair {
        k,
        m,
        dof_map,
        bc,
        meta: FormMeta {
            kappa: spec.kappa,
            metric_scale: spec.scale,
            mesh_level: mesh.level(),
        },
    })
}

/// Pulled-back flat form of `path` at `t`, assembled on the source mesh.
///
/// With `J = D f_t` constant per triangle, gradients are mapped by `J^{-T}`
/// and both forms carry the density `det J`.
pub fn assemble_pullback(
    path: &DeformationPath,
    t: f64,
    bc: BoundaryCondition,
) -> Result<FormPair> {
    if !(0.0..=1.0).contains(&t) {
        return Err(GeometryError::ParameterOutOfRange(t).into());
    }
    let mesh = path.source();
    let elements: Vec<_> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|tri| {
            let (area, grads) = gradients(mesh.triangle_points(tri))
                .ok_or(AssemblyError::DegenerateTriangle(tri))?;
            let j = path.jacobian(tri, t);
            let det = j.determinant();
            let jinv = j
                .try_inverse()
                .filter(|_| det > 0.0)
                .ok_or(AssemblyError::DegenerateTriangle(tri))?;
            let mapped = grads.map(|g| jinv.transpose() * g);
            Ok(flat_element(area * det, &mapped, 1.0))
        })
        .collect::<Result<_>>()?;
    let dof_map = DofMap::new(mesh, bc);
    let (k, m) = scatter(mesh.triangles(), &elements, &dof_map);
    Ok(FormPair {
        k,
        m,
        dof_map,
        bc,
        meta: FormMeta {
            kappa: 0.0,
            metric_scale: 1.0,
            mesh_level: mesh.level(),
        },
    })
}

/// Metric multiplied by the constant `c`: stiffness unchanged, mass times `c`.
pub fn rescale_metric(form: &FormPair, c: f64) -> Result<FormPair> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(AssemblyError::InvalidRescale(c));
    }
    let mut out = form.clone();
    if c != 1.0 {
        out.m = form.m.scaled(c);
        out.meta.metric_scale *= c;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{criss_cross_rectangle, pl_family, Polygon};

    fn reference_triangle() -> TriMesh {
        let pts = vec![Point::new(0., 0.), Point::new(1., 0.), Point::new(0., 1.)];
        TriMesh::new(pts, vec![[0, 1, 2]], None, 0).unwrap()
    }

    #[test]
    fn reference_element() {
        let f = assemble(
            &reference_triangle(),
            &MetricSpec::flat(),
            BoundaryCondition::Neumann,
        )
        .unwrap();
        let k = f.k.to_dense();
        let expect = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((k[(i, j)] - expect[i][j]).abs() < 1e-15);
                assert!((f.m.get(i, j) - P1_MASS[i][j] / 24.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn quadrature_weights_and_exactness() {
        let q = quadrature_points();
        let total: f64 = q.iter().map(|(w, _)| w).sum();
        assert!((total - 1.0).abs() < 1e-15);
        // int_T b0^2 b1^2 / |T| = 2 * 2! 2! / 6! = 1/90
        let v: f64 = q.iter().map(|(w, b)| w * b[0] * b[0] * b[1] * b[1]).sum();
        assert!((v - 1.0 / 90.0).abs() < 1e-15);
    }

    #[test]
    fn curved_matches_flat_in_limit() {
        let mesh = criss_cross_rectangle(1.0, 1.0).unwrap().refine(2);
        let mesh = mesh
            .with_points(
                mesh.points()
                    .iter()
                    .map(|p| p - nalgebra::Vector2::new(0.5, 0.5))
                    .collect(),
                None,
            )
            .unwrap();
        let flat = assemble(&mesh, &MetricSpec::flat(), BoundaryCondition::Neumann).unwrap();
        let tiny = assemble(
            &mesh,
            &MetricSpec::with_kappa(1e-12).unwrap(),
            BoundaryCondition::Neumann,
        )
        .unwrap();
        let dk = SparseSymmetric::combine(1.0, &flat.k, -1.0, &tiny.k).norm_inf();
        let dm = SparseSymmetric::combine(1.0, &flat.m, -1.0, &tiny.m).norm_inf();
        assert!(dk <= 1e-10 * flat.k.norm_inf());
        assert!(dm <= 1e-10 * flat.m.norm_inf());
    }

    #[test]
    fn neumann_constants_in_kernel() {
        let mesh = criss_cross_rectangle(1.0, 1.0).unwrap().refine(2);
        let mesh = mesh
            .with_points(
                mesh.points()
                    .iter()
                    .map(|p| p - nalgebra::Vector2::new(0.5, 0.5))
                    .collect(),
                None,
            )
            .unwrap();
        for spec in [
            MetricSpec::flat(),
            MetricSpec::with_kappa(-0.5).unwrap(),
            MetricSpec::with_kappa(1.0).unwrap(),
        ] {
            let f = assemble(&mesh, &spec, BoundaryCondition::Neumann).unwrap();
            let r = f.k.matvec(&vec![1.0; f.dim()]);
            assert!(r.iter().all(|v| v.abs() < 1e-12), "{spec:?}");
        }
    }

    #[test]
    fn dirichlet_keeps_interior_only() {
        let mesh = criss_cross_rectangle(1.0, 1.0).unwrap().refine(2);
        let f = assemble(&mesh, &MetricSpec::flat(), BoundaryCondition::Dirichlet).unwrap();
        assert_eq!(f.dim(), mesh.num_interior());
        assert_eq!(
            f.dof_map.expand(&vec![1.0; f.dim()]).iter().sum::<f64>(),
            f.dim() as f64
        );
    }

    #[test]
    fn outside_domain_rejected() {
        let mesh = criss_cross_rectangle(2.0, 2.0).unwrap();
        let err = assemble(
            &mesh,
            &MetricSpec::with_kappa(-0.5).unwrap(),
            BoundaryCondition::Neumann,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            AssemblyError::Metric(MetricError::OutsideDomain { .. })
        ));
    }

    #[test]
    fn pullback_identity_and_scaling() {
        let sq = Polygon::unit_square();
        let mesh = criss_cross_rectangle(1.0, 1.0).unwrap().refine(1);
        let direct = assemble(&mesh, &MetricSpec::flat(), BoundaryCondition::Neumann).unwrap();
        let id = pl_family(&sq, &sq, &mesh).unwrap();
        let f = assemble_pullback(&id, 0.7, BoundaryCondition::Neumann).unwrap();
        assert_eq!(f.k.to_dense(), direct.k.to_dense());
        assert_eq!(f.m.to_dense(), direct.m.to_dense());

        let doubled = mesh.points().iter().map(|p| p * 2.0).collect();
        let grow = DeformationPath::new(mesh.clone(), doubled, None).unwrap();
        let f = assemble_pullback(&grow, 1.0, BoundaryCondition::Neumann).unwrap();
        let dk = (f.k.to_dense() - direct.k.to_dense()).amax();
        let dm = (f.m.to_dense() - direct.m.to_dense() * 4.0).amax();
        assert!(dk < 1e-14 && dm < 1e-15, "{dk} {dm}");
        assert!(assemble_pullback(&grow, 1.5, BoundaryCondition::Neumann).is_err());
    }

    #[test]
    fn rescale_multiplies_mass() {
        let mesh = criss_cross_rectangle(1.0, 1.0).unwrap();
        let f = assemble(&mesh, &MetricSpec::flat(), BoundaryCondition::Neumann).unwrap();
        assert_eq!(rescale_metric(&f, 1.0).unwrap(), f);
        let g = rescale_metric(&f, 4.0).unwrap();
        assert_eq!(g.k, f.k);
        assert_eq!(g.m.to_dense(), f.m.to_dense() * 4.0);
        assert!(rescale_metric(&f, 0.0).is_err());
    }

    #[test]
    fn scaled_metric_scales_mass() {
        let mesh = criss_cross_rectangle(1.0, 1.0).unwrap().refine(1);
        let a = assemble(&mesh, &MetricSpec::flat(), BoundaryCondition::Dirichlet).unwrap();
        let b = assemble(
            &mesh,
            &MetricSpec::new(0.0, 3.0).unwrap(),
            BoundaryCondition::Dirichlet,
        )
        .unwrap();
        assert!((b.k.to_dense() - a.k.to_dense()).amax() < 1e-15);
        assert!((b.m.to_dense() - a.m.to_dense() * 3.0).amax() < 1e-15);
    }
}
