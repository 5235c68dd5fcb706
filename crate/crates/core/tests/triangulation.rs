use std::collections::BTreeSet;

use dwellcert::triangulation::{radial_map, FanTriangulation};
use proptest::prelude::*;

mod common;
use common::filtered_boundary_faces;

fn lattice_boundary_points(n: usize, k: i64) -> usize {
    (2 * k + 1).pow(n as u32) as usize - (2 * k - 1).pow(n as u32) as usize
}

fn fan_faces(tri: &FanTriangulation) -> BTreeSet<Vec<Vec<i64>>> {
    tri.simplices()
        .iter()
        .map(|s| {
            let mut g: Vec<Vec<i64>> = s
                .vertex_ids
                .iter()
                .map(|&v| tri.vertices()[v].grid.0.clone())
                .collect();
            g.sort();
            g
        })
        .collect()
}

#[test]
fn simplex_counts_match_brute_force() {
    for (n, k) in [(2, 1), (2, 2), (2, 3), (3, 1), (3, 2), (3, 3)] {
        let tri = FanTriangulation::build(n, k as u32).unwrap();
        let oracle = filtered_boundary_faces(n, k);
        let expected = if n == 2 { 8 * k } else { 48 * k * k } as usize;
        assert_eq!(oracle.len(), expected, "oracle n={n} K={k}");
        assert_eq!(tri.simplices().len(), expected, "n={n} K={k}");
        assert_eq!(fan_faces(&tri), oracle, "n={n} K={k}");
        assert_eq!(tri.num_outer_vertices(), lattice_boundary_points(n, k));
        assert_eq!(tri.vertices().len(), tri.num_outer_vertices() + 1);
    }
}

#[test]
fn small_fans() {
    let t = FanTriangulation::build(2, 1).unwrap();
    assert_eq!((t.num_outer_vertices(), t.simplices().len()), (8, 8));
    let t = FanTriangulation::build(3, 1).unwrap();
    assert_eq!((t.num_outer_vertices(), t.simplices().len()), (26, 48));
    let t = FanTriangulation::build(2, 5).unwrap();
    assert_eq!(t.simplices().len(), 40);
    for v in t.outer_vertices() {
        assert!((v.radius - 5.0).abs() <= 1e-12 * 5.0);
    }
}

#[test]
fn rejects_bad_arguments() {
    assert!(FanTriangulation::build(1, 3).is_err());
    assert!(FanTriangulation::build(2, 0).is_err());
}

#[test]
fn vertices_lie_on_sphere_and_cones_are_regular() {
    for (n, k) in [(2, 7), (3, 4)] {
        let tri = FanTriangulation::build(n, k).unwrap();
        let kf = f64::from(k);
        assert!(tri.vertices()[0].grid.is_origin());
        for (id, v) in tri.vertices().iter().enumerate().skip(1) {
            assert_eq!(v.id, id);
            assert_eq!(v.grid.max_norm(), i64::from(k));
            let r = v.point.iter().map(|c| c * c).sum::<f64>().sqrt();
            assert!((r - kf).abs() <= 1e-12 * kf);
        }
        for s in tri.simplices() {
            assert!(!s.vertex_ids.contains(&0));
            assert!(s.det_abs > 1e-10 * kf.powi(n as i32));
            let id = &s.x_inv * &s.x;
            for r in 0..n {
                for c in 0..n {
                    let want = if r == c { 1.0 } else { 0.0 };
                    assert!((id[(r, c)] - want).abs() < 1e-9);
                }
            }
        }
    }
}

#[test]
fn build_is_deterministic() {
    let a = FanTriangulation::build(3, 3).unwrap();
    let b = FanTriangulation::build(3, 3).unwrap();
    assert_eq!(a, b);
    for (u, v) in a.vertices().iter().zip(b.vertices()) {
        for (p, q) in u.point.iter().zip(&v.point) {
            assert_eq!(p.to_bits(), q.to_bits());
        }
    }
}

#[test]
fn radial_map_examples() {
    assert_eq!(radial_map(&[0.0, 0.0]), vec![0.0, 0.0]);
    assert_eq!(radial_map(&[1.0, 0.0]), vec![1.0, 0.0]);
    let y = radial_map(&[1.0, 1.0]);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    assert!((y[0] - h).abs() < 1e-15 && (y[1] - h).abs() < 1e-15);
}

/// Convex polygon area by the shoelace formula, vertices sorted by angle.
fn hull_area(points: &[Vec<f64>]) -> f64 {
    let mut p: Vec<&Vec<f64>> = points.iter().collect();
    p.sort_by(|a, b| a[1].atan2(a[0]).total_cmp(&b[1].atan2(b[0])));
    let m = p.len();
    (0..m)
        .map(|i| {
            let (a, b) = (p[i], p[(i + 1) % m]);
            a[0] * b[1] - a[1] * b[0]
        })
        .sum::<f64>()
        .abs()
        / 2.0
}

#[test]
fn cone_measures_sum_to_hull_area() {
    for k in 1..=3 {
        let tri = FanTriangulation::build(2, k).unwrap();
        let total: f64 = tri.simplices().iter().map(|s| s.det_abs / 2.0).sum();
        let pts: Vec<Vec<f64>> = tri
            .outer_vertices()
            .iter()
            .map(|v| v.point.clone())
            .collect();
        let hull = hull_area(&pts);
        assert!(
            ((total - hull) / hull).abs() < 1e-9,
            "K={k}: {total} vs {hull}"
        );
    }
}

#[test]
fn interiors_are_disjoint() {
    for (n, k) in [(2, 3), (3, 2)] {
        let tri = FanTriangulation::build(n, k).unwrap();
        for s in tri.simplices() {
            let center: Vec<f64> = (0..n)
                .map(|r| (0..n).map(|c| s.x[(r, c)]).sum::<f64>() / n as f64)
                .collect();
            for t in tri.simplices() {
                let lambda = t.conic_coords(&center);
                if t.id == s.id {
                    assert!(lambda.iter().all(|&l| (l - 1.0 / n as f64).abs() < 1e-12));
                } else {
                    assert!(
                        lambda.iter().any(|&l| l < -1e-9),
                        "{} inside {}",
                        s.id,
                        t.id
                    );
                }
            }
        }
    }
}

#[test]
fn locate_vertices_gives_unit_coordinates() {
    let tri = FanTriangulation::build(3, 2).unwrap();
    for s in tri.simplices().iter().step_by(7) {
        for (k, &vid) in s.vertex_ids.iter().enumerate() {
            let lambda = s.conic_coords(&tri.vertices()[vid].point);
            for (j, l) in lambda.iter().enumerate() {
                let want = if j == k { 1.0 } else { 0.0 };
                assert!((l - want).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn locate_on_diagonal() {
    let tri = FanTriangulation::build(2, 1).unwrap();
    let (id, lambda) = tri.locate(&[2.0, 2.0]).unwrap();
    // the (1,1) vertex maps to (√2/2, √2/2), so (2,2) is 2√2 times it
    let s = tri.simplex(id);
    let diag = tri.vertex_by_grid(&[1, 1]).unwrap();
    let k = s.vertex_ids.iter().position(|&v| v == diag).unwrap();
    assert!((lambda[k] - 2.0 * 2f64.sqrt()).abs() < 1e-12);
    assert!(lambda[1 - k].abs() < 1e-12);
    assert!(tri.locate(&[0.0, 0.0]).is_err());
}

fn direction(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
        .prop_filter("nonzero", |v| v.iter().any(|c| c.abs() > 1e-3))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn random_directions_are_located_2d(x in direction(2), k in 1u32..12) {
        let tri = FanTriangulation::build(2, k).unwrap();
        let (id, lambda) = tri.locate(&x).unwrap();
        prop_assert!(lambda.iter().all(|&l| l >= -1e-9));
        let back = &tri.simplex(id).x * nalgebra::DVector::from_vec(lambda);
        for (a, b) in back.iter().zip(&x) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn random_directions_are_located_3d(x in direction(3), k in 1u32..5) {
        let tri = FanTriangulation::build(3, k).unwrap();
        let (_, lambda) = tri.locate(&x).unwrap();
        prop_assert!(lambda.iter().all(|&l| l >= -1e-9));
    }

    #[test]
    fn locate_is_homogeneous(x in direction(3), c in 1e-3f64..1e3) {
        let tri = FanTriangulation::build(3, 3).unwrap();
        let (id, lambda) = tri.locate(&x).unwrap();
        let cx: Vec<f64> = x.iter().map(|v| v * c).collect();
        let (id_c, lambda_c) = tri.locate(&cx).unwrap();
        if id == id_c {
            for (a, b) in lambda.iter().zip(&lambda_c) {
                prop_assert!((a * c - b).abs() <= 1e-9 * c);
            }
        } else {
            // both cones contain the ray, so it lies on their common face
            let other = tri.simplex(id_c).conic_coords(&x);
            prop_assert!(other.iter().all(|&l| l >= -1e-9));
        }
    }

    #[test]
    fn radial_map_preserves_max_norm_as_euclidean(x in direction(3)) {
        let y = radial_map(&x);
        let inf = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let two = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!((two - inf).abs() <= 1e-15 * inf.max(1.0));
    }
}
