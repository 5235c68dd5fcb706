//! Fan triangulation of the ball of radius `K`.
//!
//! The boundary of the hypercube `[-K, K]^n` is split into unit `(n-1)`-cubes,
//! each of which is cut into `(n-1)!` simplices by the reflected standard
//! (Kuhn) triangulation. Every boundary simplex is pushed radially onto the
//! sphere of radius `K` and joined with the origin, giving a cone simplex.
//! The cones cover `R^n` and meet face to face, so a function that is linear
//! on each cone and continuous at the vertices is continuous everywhere.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};

use nalgebra::DMatrix;
use thiserror::Error;

/// Relative tolerance on conic coordinates when deciding cone membership.
pub const LOCATE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TriangulationError {
    #[error("dimension must be at least 2, got {0}")]
    Dimension(usize),
    #[error("K must be at least 1, got {0}")]
    Resolution(u32),
    #[error("cone simplex {vertices:?} is degenerate (|det X| = {det_abs:e})")]
    Degenerate { vertices: Vec<usize>, det_abs: f64 },
    #[error("point dimension {got} does not match triangulation dimension {expected}")]
    PointDimension { expected: usize, got: usize },
    #[error("the origin has no conic coordinates")]
    Origin,
    #[error("point {0:?} was not located in any cone")]
    NotLocated(Vec<f64>),
}

/// Integer lattice coordinates of a vertex before the radial map.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GridVertex(pub Vec<i64>);

impl GridVertex {
    pub fn max_norm(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    pub fn is_origin(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub id: usize,
    pub grid: GridVertex,
    /// Image of the grid point under [`radial_map`].
    pub point: Vec<f64>,
    /// Euclidean norm of `point`.
    pub radius: f64,
}

/// A cone with apex at the origin spanned by `n` vertices on the sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexCone {
    pub id: usize,
    /// Non-origin vertex ids in ascending order; column `k` of `x` is the
    /// point of `vertex_ids[k]`.
    pub vertex_ids: Vec<usize>,
    pub x: DMatrix<f64>,
    pub x_inv: DMatrix<f64>,
    pub det_abs: f64,
}

impl SimplexCone {
    /// Conic coordinates `X^{-1} x`.
    pub fn conic_coords(&self, x: &[f64]) -> Vec<f64> {
        let n = self.vertex_ids.len();
        (0..n)
            .map(|r| (0..n).map(|c| self.x_inv[(r, c)] * x[c]).sum())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FanTriangulation {
    n: usize,
    k: u32,
    vertices: Vec<Vertex>,
    simplices: Vec<SimplexCone>,
    grid_index: BTreeMap<Vec<i64>, usize>,
    simplex_index: BTreeMap<Vec<usize>, usize>,
}

/// `x ↦ (‖x‖_∞ / ‖x‖₂) x`, sending the cube of max-norm `r` onto the sphere of
/// Euclidean radius `r`. Fixes the origin.
pub fn radial_map(x: &[f64]) -> Vec<f64> {
    let inf = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if inf == 0.0 {
        return vec![0.0; x.len()];
    }
    let two = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = inf / two;
    x.iter().map(|v| v * scale).collect()
}

/// Boundary `(n-1)`-simplices of `[-K, K]^n` in the induced standard
/// triangulation, each as a sorted list of `n` lattice points.
pub(crate) fn boundary_faces(n: usize, k: u32) -> BTreeSet<Vec<Vec<i64>>> {
    let k = i64::from(k);
    let m = n - 1;
    let perms = permutations(m);
    let mut faces = BTreeSet::new();
    for axis in 0..n {
        let others: Vec<usize> = (0..n).filter(|&i| i != axis).collect();
        for side in [-k, k] {
            for signs in 0..(1u32 << m) {
                let mut cell = vec![0i64; m];
                loop {
                    for perm in &perms {
                        let mut cur = cell.clone();
                        let mut verts = Vec::with_capacity(n);
                        for step in 0..n {
                            if step > 0 {
                                cur[perm[step - 1]] += 1;
                            }
                            let mut v = vec![0i64; n];
                            v[axis] = side;
                            for (a, &i) in others.iter().enumerate() {
                                let s = if signs >> a & 1 == 1 { -1 } else { 1 };
                                v[i] = s * cur[a];
                            }
                            verts.push(v);
                        }
                        verts.sort();
                        faces.insert(verts);
                    }
                    if !next_cell(&mut cell, k) {
                        break;
                    }
                }
            }
        }
    }
    faces
}

fn next_cell(cell: &mut [i64], k: i64) -> bool {
    for c in cell.iter_mut() {
        *c += 1;
        if *c < k {
            return true;
        }
        *c = 0;
    }
    false
}

pub(crate) fn permutations(m: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(m), &mut vec![false; m], &mut out);
    out
}

fn grid_point(grid: &[i64]) -> Vec<f64> {
    let x: Vec<f64> = grid.iter().map(|&c| c as f64).collect();
    radial_map(&x)
}

impl FanTriangulation {
    /// Builds the fan over the triangulated sphere of radius `k` in `n` dimensions.
    pub fn build(n: usize, k: u32) -> Result<Self, TriangulationError> {
        if n < 2 {
            return Err(TriangulationError::Dimension(n));
        }
        if k < 1 {
            return Err(TriangulationError::Resolution(k));
        }
        let faces = boundary_faces(n, k);

        let grids: BTreeSet<&Vec<i64>> = faces.iter().flatten().collect();
        let mut vertices = Vec::with_capacity(grids.len() + 1);
        vertices.push(Vertex {
            id: 0,
            grid: GridVertex(vec![0; n]),
            point: vec![0.0; n],
            radius: 0.0,
        });
        let mut grid_index = BTreeMap::new();
        for g in grids {
            let id = vertices.len();
            let point = grid_point(g);
            let radius = point.iter().map(|v| v * v).sum::<f64>().sqrt();
            grid_index.insert(g.clone(), id);
            vertices.push(Vertex {
                id,
                grid: GridVertex(g.clone()),
                point,
                radius,
            });
        }

        let mut id_tuples: Vec<Vec<usize>> = faces
            .iter()
            .map(|f| {
                let mut ids: Vec<usize> = f.iter().map(|g| grid_index[g]).collect();
                ids.sort_unstable();
                ids
            })
            .collect();
        id_tuples.sort();

        let det_floor = 1e-10 * f64::from(k).powi(n as i32);
        let mut simplices = Vec::with_capacity(id_tuples.len());
        let mut simplex_index = BTreeMap::new();
        for ids in id_tuples {
            let x = DMatrix::from_fn(n, n, |r, c| vertices[ids[c]].point[r]);
            let det_abs = x.clone().lu().determinant().abs();
            if !(det_abs > det_floor) {
                return Err(TriangulationError::Degenerate {
                    vertices: ids,
                    det_abs,
                });
            }
            let x_inv = x
                .clone()
                .try_inverse()
                .ok_or_else(|| TriangulationError::Degenerate {
                    vertices: ids.clone(),
                    det_abs,
                })?;
            let id = simplices.len();
            simplex_index.insert(ids.clone(), id);
            simplices.push(SimplexCone {
                id,
                vertex_ids: ids,
                x,
                x_inv,
                det_abs,
            });
        }

        Ok(Self {
            n,
            k,
            vertices,
            simplices,
            grid_index,
            simplex_index,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn resolution(&self) -> u32 {
        self.k
    }

    /// All vertices; index 0 is the origin.
    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    /// Vertices other than the origin (ids `1..`).
    pub fn outer_vertices(&self) -> &[Vertex] {
        &self.vertices[1..]
    }

    pub fn num_outer_vertices(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn simplices(&self) -> &[SimplexCone] {
        &self.simplices
    }

    pub fn simplex(&self, id: usize) -> &SimplexCone {
        &self.simplices[id]
    }

    pub fn vertex_by_grid(&self, grid: &[i64]) -> Option<usize> {
        self.grid_index.get(grid).copied()
    }

    /// Finds a cone containing `x` and the conic coordinates `λ = X⁻¹x`.
    ///
    /// Points on faces shared by several cones may be assigned to any of them.
    pub fn locate(&self, x: &[f64]) -> Result<(usize, Vec<f64>), TriangulationError> {
        if x.len() != self.n {
            return Err(TriangulationError::PointDimension {
                expected: self.n,
                got: x.len(),
            });
        }
        let inf = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if inf == 0.0 {
            return Err(TriangulationError::Origin);
        }
        if !inf.is_finite() {
            return Err(TriangulationError::NotLocated(x.to_vec()));
        }
        let floor = -LOCATE_TOL * inf / f64::from(self.k);
        if let Some(id) = self.guess_cone(x, inf) {
            let lambda = self.simplices[id].conic_coords(x);
            if lambda.iter().all(|&l| l >= floor) {
                return Ok((id, lambda));
            }
        }
        // Rounding near a cell boundary can defeat the direct lookup.
        let mut best: Option<(usize, Vec<f64>, f64)> = None;
        for s in &self.simplices {
            let lambda = s.conic_coords(x);
            let worst = lambda.iter().copied().fold(f64::INFINITY, f64::min);
            if best.as_ref().is_none_or(|b| worst > b.2) {
                best = Some((s.id, lambda, worst));
            }
        }
        match best {
            Some((id, lambda, worst)) if worst >= floor => Ok((id, lambda)),
            _ => Err(TriangulationError::NotLocated(x.to_vec())),
        }
    }

    /// All cones whose conic coordinates of `x` are nonnegative up to `tol`
    /// (relative to `‖x‖_∞ / K`).
    pub fn containing_cones(&self, x: &[f64], tol: f64) -> Vec<(usize, Vec<f64>)> {
        let inf = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let floor = -tol * inf / f64::from(self.k);
        self.simplices
            .iter()
            .filter_map(|s| {
                let lambda = s.conic_coords(x);
                lambda.iter().all(|&l| l >= floor).then_some((s.id, lambda))
            })
            .collect()
    }

    /// Direct lookup through the cube face hit by the ray through `x`.
    fn guess_cone(&self, x: &[f64], inf: f64) -> Option<usize> {
        let n = self.n;
        let k = f64::from(self.k);
        let axis = (0..n).max_by(|&a, &b| x[a].abs().total_cmp(&x[b].abs()))?;
        let side = if x[axis] < 0.0 { -1 } else { 1 };
        let kk = i64::from(self.k);
        let others: Vec<usize> = (0..n).filter(|&i| i != axis).collect();
        let mut cell = Vec::with_capacity(n - 1);
        let mut frac = Vec::with_capacity(n - 1);
        let mut sign = Vec::with_capacity(n - 1);
        for &i in &others {
            let u = (x[i].abs() / inf * k).min(k);
            let c = (u.floor() as i64).clamp(0, kk - 1);
            cell.push(c);
            frac.push(u - c as f64);
            sign.push(if x[i] < 0.0 { -1 } else { 1 });
        }
        let mut order: Vec<usize> = (0..n - 1).collect();
        order.sort_by(|&a, &b| frac[b].total_cmp(&frac[a]));
        let mut ids = Vec::with_capacity(n);
        let mut cur = cell;
        for step in 0..n {
            if step > 0 {
                cur[order[step - 1]] += 1;
            }
            let mut g = vec![0i64; n];
            g[axis] = side * kk;
            for (a, &i) in others.iter().enumerate() {
                g[i] = sign[a] * cur[a];
            }
            ids.push(*self.grid_index.get(&g)?);
        }
        ids.sort_unstable();
        self.simplex_index.get(&ids).copied()
    }

    /// Debug export: `id,g1..gn,x1..xn`.
    pub fn write_vertices_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut header = vec!["id".to_string()];
        header.extend((1..=self.n).map(|i| format!("g{i}")));
        header.extend((1..=self.n).map(|i| format!("x{i}")));
        writeln!(w, "{}", header.join(","))?;
        for v in &self.vertices {
            let mut cols = vec![v.id.to_string()];
            cols.extend(v.grid.0.iter().map(|c| c.to_string()));
            cols.extend(v.point.iter().map(|c| c.to_string()));
            writeln!(w, "{}", cols.join(","))?;
        }
        Ok(())
    }

    /// Debug export: `id,v1..vn`.
    pub fn write_simplices_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut header = vec!["id".to_string()];
        header.extend((1..=self.n).map(|i| format!("v{i}")));
        writeln!(w, "{}", header.join(","))?;
        for s in &self.simplices {
            let mut cols = vec![s.id.to_string()];
            cols.extend(s.vertex_ids.iter().map(|c| c.to_string()));
            writeln!(w, "{}", cols.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radial_map_examples() {
        assert_eq!(radial_map(&[0.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(radial_map(&[1.0, 0.0]), vec![1.0, 0.0]);
        let y = radial_map(&[1.0, 1.0]);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((y[0] - h).abs() < 1e-15 && (y[1] - h).abs() < 1e-15);
        assert!(((y[0] * y[0] + y[1] * y[1]).sqrt() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert_eq!(
            FanTriangulation::build(1, 3),
            Err(TriangulationError::Dimension(1))
        );
        assert_eq!(
            FanTriangulation::build(2, 0),
            Err(TriangulationError::Resolution(0))
        );
    }

    #[test]
    fn origin_is_vertex_zero() {
        let tri = FanTriangulation::build(2, 2).unwrap();
        assert!(tri.vertices()[0].grid.is_origin());
        for (i, v) in tri.vertices().iter().enumerate() {
            assert_eq!(v.id, i);
        }
        for w in tri.outer_vertices().windows(2) {
            assert!(w[0].grid < w[1].grid);
        }
        assert!(tri
            .simplices()
            .iter()
            .all(|s| s.vertex_ids.iter().all(|&v| v != 0)));
    }

    #[test]
    fn locate_vertex_and_barycenter() {
        let tri = FanTriangulation::build(3, 2).unwrap();
        let s = &tri.simplices()[17];
        let p = &tri.vertices()[s.vertex_ids[1]].point;
        let (id, lambda) = tri.locate(p).unwrap();
        let cone = tri.simplex(id);
        // the returned cone contains the vertex, where λ is a basis vector
        let k = cone
            .vertex_ids
            .iter()
            .position(|&v| v == s.vertex_ids[1])
            .unwrap();
        for (j, l) in lambda.iter().enumerate() {
            let want = if j == k { 1.0 } else { 0.0 };
            assert!((l - want).abs() < 1e-12, "{lambda:?}");
        }

        let mut bary = vec![0.0; 3];
        for &v in &s.vertex_ids {
            for (b, c) in bary.iter_mut().zip(&tri.vertices()[v].point) {
                *b += c / 3.0;
            }
        }
        let (id, lambda) = tri.locate(&bary).unwrap();
        assert_eq!(id, s.id);
        for l in lambda {
            assert!((l - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn locate_diagonal_point() {
        // n=2, K=1: the cones touching direction (1,1) are spanned by F(1,0),
        // F(1,1) and F(0,1), F(1,1). Hand computation: with h = 1/√2,
        // (2,2) = 2√2 · (h,h), so λ is 2√2 on the diagonal vertex, 0 elsewhere.
        let tri = FanTriangulation::build(2, 1).unwrap();
        let (id, lambda) = tri.locate(&[2.0, 2.0]).unwrap();
        let cone = tri.simplex(id);
        let diag = tri.vertex_by_grid(&[1, 1]).unwrap();
        assert!(cone.vertex_ids.contains(&diag));
        for (j, &v) in cone.vertex_ids.iter().enumerate() {
            let want = if v == diag { 2.0 * 2f64.sqrt() } else { 0.0 };
            assert!((lambda[j] - want).abs() < 1e-12, "{lambda:?}");
        }
        // an interior point of the cone between (1,0) and (1,1):
        // x = a F(1,0) + b F(1,1) with F(1,0)=(1,0), F(1,1)=(h,h)
        let (id, lambda) = tri.locate(&[2.0, 1.0]).unwrap();
        let cone = tri.simplex(id);
        let e1 = tri.vertex_by_grid(&[1, 0]).unwrap();
        assert!(cone.vertex_ids.contains(&e1) && cone.vertex_ids.contains(&diag));
        let b = 1.0 / std::f64::consts::FRAC_1_SQRT_2;
        for (j, &v) in cone.vertex_ids.iter().enumerate() {
            let want = if v == diag { b } else { 1.0 };
            assert!((lambda[j] - want).abs() < 1e-12, "{lambda:?}");
        }
    }

    #[test]
    fn locate_rejects_origin_and_wrong_dimension() {
        let tri = FanTriangulation::build(2, 3).unwrap();
        assert_eq!(tri.locate(&[0.0, 0.0]), Err(TriangulationError::Origin));
        assert!(matches!(
            tri.locate(&[1.0]),
            Err(TriangulationError::PointDimension { .. })
        ));
    }

    #[test]
    fn csv_export_has_one_line_per_item() {
        let tri = FanTriangulation::build(2, 2).unwrap();
        let mut buf = Vec::new();
        tri.write_vertices_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 17);
        assert!(text.starts_with("id,g1,g2,x1,x2\n0,0,0,0,0\n"));
        let mut buf = Vec::new();
        tri.write_simplices_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + 16);
    }
}
