//! Randomized checks of the cross-module invariants.

use std::f64::consts::TAU;

use proptest::prelude::*;

use polyspec::assembly::{
    assemble, assemble_pullback, rescale_metric, BoundaryCondition, SparseSymmetric,
};
use polyspec::deform::{sweep_t_at, SweepOptions};
use polyspec::eigensolve::{smallest_eigenpairs, solve_pencil, SolveOptions};
use polyspec::geometry::{
    criss_cross_grid, delete_vertex_path, pl_family, triangulate_steiner, triangulate_structural,
    DeformationPath, OrientationQuadratic, Point, Polygon, TriMesh,
};
use polyspec::metric::MetricSpec;
use polyspec::oracle::{dense_spectrum, rect_spectrum, RectSpec};

/// Star-shaped polygon: increasing angles with jitter, radii in `[r_lo, 1]`.
fn star(n: usize, jitter: &[f64], radii: &[f64]) -> Polygon {
    let pts: Vec<Point> = (0..n)
        .map(|i| {
            let a = TAU * (i as f64 + 0.4 * jitter[i]) / n as f64;
            Point::new(radii[i] * a.cos(), radii[i] * a.sin())
        })
        .collect();
    Polygon::new(&pts).expect("star-shaped by construction")
}

fn star_strategy(n_lo: usize, n_hi: usize, r_lo: f64) -> impl Strategy<Value = Polygon> {
    (n_lo..=n_hi).prop_flat_map(move |n| {
        (
            prop::collection::vec(-1.0f64..1.0, n),
            prop::collection::vec(r_lo..1.0, n),
        )
            .prop_map(move |(j, r)| star(n, &j, &r))
    })
}

fn convex_strategy(n_lo: usize, n_hi: usize) -> impl Strategy<Value = Polygon> {
    (n_lo..=n_hi).prop_flat_map(|n| {
        prop::collection::vec(-1.0f64..1.0, n).prop_map(move |j| star(n, &j, &vec![1.0; n]))
    })
}

fn area_matches(mesh: &TriMesh, poly: &Polygon) -> bool {
    (mesh.area() - poly.area()).abs() <= 1e-12 * poly.area()
}

fn sym_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / y.abs().max(1e-300))
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn structural_meshes_are_trees(poly in star_strategy(3, 20, 0.3)) {
        let m = triangulate_structural(&poly).unwrap();
        prop_assert_eq!(m.num_triangles(), poly.len() - 2);
        prop_assert!(m.dual_is_tree());
        prop_assert!(area_matches(&m, &poly));
        prop_assert!(area_matches(&m.refine(2), &poly));
        let end = m.dual_tree_end().unwrap();
        let tri = m.triangles()[end.triangle];
        let n = poly.len();
        let v = end.vertex;
        // both sides at the tip are polygon sides
        for w in tri.iter().copied().filter(|&w| w != v) {
            prop_assert!(w == (v + 1) % n || w == (v + n - 1) % n);
        }
    }

    #[test]
    fn steiner_meshes_conserve_area(poly in star_strategy(3, 8, 0.5)) {
        let m = triangulate_steiner(&poly, 0.2).unwrap();
        prop_assert!(area_matches(&m, &poly));
        prop_assert!(m.max_edge_length() <= 0.2 * (1.0 + 1e-12));
        prop_assert_eq!(&m.points()[..poly.len()], poly.vertices());
    }

    #[test]
    fn exact_and_sampled_orientation_agree(p in convex_strategy(4, 7), q in star_strategy(4, 7, 0.3)) {
        prop_assume!(p.len() == q.len());
        let mesh = triangulate_structural(&p).unwrap();
        match pl_family(&p, &q, &mesh) {
            Ok(path) => {
                prop_assert!(area_matches(&path.map_mesh(1.0).unwrap(), &q));
                for s in 0..=100 {
                    let t = s as f64 / 100.0;
                    for tri in 0..mesh.num_triangles() {
                        prop_assert!(path.orientation_quadratic(tri).eval(t) > 0.0);
                    }
                }
                let c = path.bilipschitz_constant();
                prop_assert!(c > 0.0 && c <= 1.0);
                for s in 0..=20 {
                    for tri in 0..mesh.num_triangles() {
                        let sv = path.jacobian(tri, s as f64 / 20.0).singular_values();
                        prop_assert!(sv.min() >= c * (1.0 - 1e-12) && sv.max() <= (1.0 + 1e-12) / c);
                    }
                }
            }
            Err(_) => {
                // the exact check names an interval where some triangle is not positive
                let bad = (0..mesh.num_triangles()).find_map(|tri| {
                    let qd = path_quadratic(&mesh, &p, &q, tri);
                    qd.nonpositive_interval().map(|(lo, hi)| (qd, 0.5 * (lo + hi)))
                });
                let (qd, t) = bad.expect("a failing triangle exists");
                prop_assert!(qd.eval(t) <= 1e-12 * qd.c0.abs());
            }
        }
    }

    #[test]
    fn deletion_endpoint_has_false_vertex(poly in convex_strategy(4, 8)) {
        let d = delete_vertex_path(&poly).unwrap();
        let n = d.endpoint.len();
        let (a, b, c) = (d.endpoint.vertex((d.vertex + n - 1) % n), d.endpoint.vertex(d.vertex), d.endpoint.vertex((d.vertex + 1) % n));
        let cross = (b - a).perp(&(c - a)) / ((b - a).norm() * (c - a).norm());
        prop_assert!(cross.abs() <= 1e-12);
        d.path.check_orientation().unwrap();
    }
}

fn path_quadratic(mesh: &TriMesh, p: &Polygon, q: &Polygon, tri: usize) -> OrientationQuadratic {
    // same map as pl_family, without its validity check
    let target: Vec<Point> = mesh
        .points()
        .iter()
        .map(|x| q.vertex(p.vertices().iter().position(|v| v == x).unwrap()))
        .collect();
    let [i, j, k] = mesh.triangles()[tri];
    let s = mesh.points();
    let cross = |u: nalgebra::Vector2<f64>, v: nalgebra::Vector2<f64>| u.perp(&v);
    let (e1, e2) = (s[j] - s[i], s[k] - s[i]);
    let (g1, g2) = (
        (target[j] - s[j]) - (target[i] - s[i]),
        (target[k] - s[k]) - (target[i] - s[i]),
    );
    OrientationQuadratic {
        c0: cross(e1, e2),
        c1: cross(e1, g2) + cross(g1, e2),
        c2: cross(g1, g2),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn forms_are_symmetric_and_definite(poly in star_strategy(3, 6, 0.5), kappa in -0.9f64..2.0) {
        let mesh = triangulate_steiner(&poly, 0.3).unwrap();
        let spec = MetricSpec::with_kappa(kappa).unwrap();
        for bc in [BoundaryCondition::Dirichlet, BoundaryCondition::Neumann] {
            let f = assemble(&mesh, &spec, bc).unwrap();
            let (k, m) = (f.k.to_dense(), f.m.to_dense());
            prop_assert_eq!(&k, &k.transpose());
            prop_assert_eq!(&m, &m.transpose());
            prop_assert!(m.clone().cholesky().is_some());
            let kmin = k.clone().symmetric_eigenvalues().min();
            prop_assert!(kmin >= -1e-10 * k.norm());
            if bc == BoundaryCondition::Neumann {
                let ones = nalgebra::DVector::from_element(f.dim(), 1.0);
                prop_assert!((&k * ones).amax() <= 1e-12 * k.amax());
            }
        }
    }

    #[test]
    fn solver_matches_dense_reference(poly in star_strategy(3, 6, 0.5), kappa in -0.5f64..1.0, neumann in any::<bool>()) {
        let bc = if neumann { BoundaryCondition::Neumann } else { BoundaryCondition::Dirichlet };
        let mesh = triangulate_steiner(&poly, 0.25).unwrap();
        let f = assemble(&mesh, &MetricSpec::with_kappa(kappa).unwrap(), bc).unwrap();
        prop_assume!(f.dim() <= 200 && f.dim() > 8);
        let s = smallest_eigenpairs(&f, 6, &SolveOptions::default()).unwrap();
        let dense = dense_spectrum(&f.k, &f.m).unwrap();
        let top = dense[5];
        for (a, b) in s.eigenvalues.iter().zip(&dense) {
            prop_assert!((a - b).abs() <= 1e-9 * top);
        }
    }

    #[test]
    fn shifted_pencil_shifts_spectrum(poly in star_strategy(3, 6, 0.5), sigma in 0.1f64..20.0) {
        let mesh = triangulate_steiner(&poly, 0.25).unwrap();
        let f = assemble(&mesh, &MetricSpec::flat(), BoundaryCondition::Dirichlet).unwrap();
        prop_assume!(f.dim() > 8);
        let opts = SolveOptions::default();
        let base = smallest_eigenpairs(&f, 5, &opts).unwrap().eigenvalues;
        let shifted = SparseSymmetric::combine(1.0, &f.k, sigma, &f.m);
        let (vals, _, _) = solve_pencil(&shifted, &f.m, 5, 0.0, &opts).unwrap();
        let expected: Vec<f64> = base.iter().map(|l| l + sigma).collect();
        prop_assert!(sym_gap(&vals, &expected) <= 1e-10);
    }

    #[test]
    fn refinement_never_raises_dirichlet_eigenvalues(poly in convex_strategy(3, 6)) {
        let mesh = triangulate_structural(&poly).unwrap().refine(3);
        let opts = SolveOptions::default();
        let coarse = smallest_eigenpairs(&assemble(&mesh, &MetricSpec::flat(), BoundaryCondition::Dirichlet).unwrap(), 4, &opts).unwrap();
        let fine = smallest_eigenpairs(&assemble(&mesh.refine(1), &MetricSpec::flat(), BoundaryCondition::Dirichlet).unwrap(), 4, &opts).unwrap();
        for (f, c) in fine.eigenvalues.iter().zip(&coarse.eigenvalues) {
            prop_assert!(*f <= c * (1.0 + 1e-12));
        }
    }

    #[test]
    fn pullback_equals_mapped_assembly(p in convex_strategy(4, 5), q in convex_strategy(4, 5), t in 0.0f64..=1.0) {
        prop_assume!(p.len() == q.len());
        let mesh = triangulate_structural(&p).unwrap();
        let path = pl_family(&p, &q, &mesh).unwrap().refine(2);
        let opts = SolveOptions::default();
        let bc = BoundaryCondition::Dirichlet;
        let a = smallest_eigenpairs(&assemble_pullback(&path, t, bc).unwrap(), 5, &opts).unwrap();
        let b = smallest_eigenpairs(&assemble(&path.map_mesh(t).unwrap(), &MetricSpec::flat(), bc).unwrap(), 5, &opts).unwrap();
        prop_assert!(sym_gap(&a.eigenvalues, &b.eigenvalues) <= 1e-10);
    }

    #[test]
    fn metric_rescaling_divides_spectrum(poly in star_strategy(3, 6, 0.5), c in 0.05f64..20.0, kappa in -0.5f64..1.0) {
        let mesh = triangulate_steiner(&poly, 0.25).unwrap();
        let f = assemble(&mesh, &MetricSpec::with_kappa(kappa).unwrap(), BoundaryCondition::Dirichlet).unwrap();
        prop_assume!(f.dim() > 6);
        let opts = SolveOptions::default();
        let base = smallest_eigenpairs(&f, 4, &opts).unwrap().eigenvalues;
        let scaled = smallest_eigenpairs(&rescale_metric(&f, c).unwrap(), 4, &opts).unwrap().eigenvalues;
        let expected: Vec<f64> = base.iter().map(|l| l / c).collect();
        prop_assert!(sym_gap(&scaled, &expected) <= 1e-12);
    }

    #[test]
    fn uniform_scaling_path_divides_by_square(poly in convex_strategy(3, 6), a in 0.5f64..3.0, neumann in any::<bool>()) {
        let bc = if neumann { BoundaryCondition::Neumann } else { BoundaryCondition::Dirichlet };
        let mesh = triangulate_structural(&poly).unwrap().refine(3);
        let target = mesh.points().iter().map(|p| Point::from(p.coords * a)).collect();
        let path = DeformationPath::new(mesh, target, Some(poly.scaled(a).unwrap())).unwrap();
        let d = sweep_t_at(&path, bc, 5, &[0.0, 1.0], &SweepOptions::default()).unwrap();
        let (first, last) = (d.sorted_at(0), d.sorted_at(1));
        let skip = usize::from(neumann);
        for (l1, l0) in last.iter().zip(&first).skip(skip) {
            prop_assert!((l1 - l0 / (a * a)).abs() <= 1e-10 * l0 / (a * a));
        }
    }

    #[test]
    fn branches_permute_the_solver_output(p in convex_strategy(4, 5), q in convex_strategy(4, 5)) {
        prop_assume!(p.len() == q.len());
        let path = pl_family(&p, &q, &triangulate_structural(&p).unwrap()).unwrap().refine(2);
        let ts = [0.0, 0.3, 0.7, 1.0];
        let opts = SweepOptions::default();
        let d = sweep_t_at(&path, BoundaryCondition::Dirichlet, 5, &ts, &opts).unwrap();
        for (s, &t) in ts.iter().enumerate() {
            let direct = smallest_eigenpairs(&assemble_pullback(&path, t, BoundaryCondition::Dirichlet).unwrap(), 5, &opts.solve).unwrap();
            prop_assert_eq!(d.sorted_at(s), direct.eigenvalues);
        }
    }

    #[test]
    fn rectangle_oracle_matches_enumeration(s1 in 0.3f64..3.0, s2 in 0.3f64..3.0, k in 1usize..25, neumann in any::<bool>()) {
        let bc = if neumann { BoundaryCondition::Neumann } else { BoundaryCondition::Dirichlet };
        let spec = RectSpec::new(s1, s2, bc).unwrap();
        let got: Vec<f64> = rect_spectrum(&spec, k).iter().map(|e| e.value).collect();
        let lo = u32::from(!neumann);
        let mut all = Vec::new();
        for m in lo..lo + 40 {
            for n in lo..lo + 40 {
                all.push(spec.eigenvalue(m, n));
            }
        }
        all.sort_by(f64::total_cmp);
        prop_assert_eq!(got, all[..k].to_vec());
    }
}

#[test]
fn rectangle_fem_bounds_oracle_from_above() {
    let s2 = 1.3;
    let exact = rect_spectrum(
        &RectSpec::new(1.0, s2, BoundaryCondition::Dirichlet).unwrap(),
        10,
    );
    let base = criss_cross_grid(1.0, s2, 1, 1).unwrap();
    for level in 2..=4 {
        let f = assemble(
            &base.refine(level),
            &MetricSpec::flat(),
            BoundaryCondition::Dirichlet,
        )
        .unwrap();
        let s = smallest_eigenpairs(&f, 10, &SolveOptions::default()).unwrap();
        for (fem, e) in s.eigenvalues.iter().zip(&exact) {
            assert!(*fem >= e.value);
        }
    }
}
