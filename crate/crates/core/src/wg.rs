//! Weak Galerkin space with double-valued interior edge traces.
//!
//! Degrees of freedom are laid out interior-first (element-major, basis
//! minor), then edge blocks in edge order. Interior edges carry two blocks,
//! the side of `adjacent[0]` first.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::basis::{pk_dim, EdgeKit, ElementKit};
use crate::mesh::{Mesh, Point};

#[derive(Debug, Error, PartialEq)]
pub enum WgError {
    #[error("edge {0} lies on the boundary and has no jump")]
    BoundaryEdge(usize),
    #[error("coefficient vector has length {got}, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
}

#[derive(Debug, Clone)]
pub struct DofMap {
    pub k: usize,
    pub n_interior: usize,
    pub n_edge: usize,
    edge_offset: Vec<usize>,
    edge_sides: Vec<usize>,
    pub dirichlet_mask: Vec<bool>,
}

/// What a single degree of freedom belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DofKey {
    Interior { element: usize, basis: usize },
    Edge { edge: usize, side: usize, basis: usize },
}

impl DofMap {
    pub fn new(mesh: &Mesh, k: usize) -> Self {
        let np = pk_dim(k);
        let ne = k + 1;
        let n_interior = np * mesh.n_triangles();
        let mut edge_offset = Vec::with_capacity(mesh.n_edges());
        let mut edge_sides = Vec::with_capacity(mesh.n_edges());
        let mut next = n_interior;
        for e in &mesh.edges {
            edge_offset.push(next);
            edge_sides.push(e.adjacent.len());
            next += e.adjacent.len() * ne;
        }
        let mut dirichlet_mask = vec![false; next];
        for (i, e) in mesh.edges.iter().enumerate() {
            if e.is_boundary {
                for d in edge_offset[i]..edge_offset[i] + ne {
                    dirichlet_mask[d] = true;
                }
            }
        }
        DofMap { k, n_interior, n_edge: next - n_interior, edge_offset, edge_sides, dirichlet_mask }
    }

    pub fn total(&self) -> usize {
        self.n_interior + self.n_edge
    }

    pub fn interior(&self, t: usize) -> Range<usize> {
        let np = pk_dim(self.k);
        t * np..(t + 1) * np
    }

    pub fn edge_side(&self, e: usize, side: usize) -> Range<usize> {
        assert!(side < self.edge_sides[e], "edge {e} has no side {side}");
        let start = self.edge_offset[e] + side * (self.k + 1);
        start..start + self.k + 1
    }

    pub fn n_sides(&self, e: usize) -> usize {
        self.edge_sides[e]
    }

    /// Global indices of the element's local weak function: interior block,
    /// then the side owned by `t` of each local edge.
    pub fn local_dofs(&self, mesh: &Mesh, t: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.interior(t).collect();
        for le in &mesh.triangle_edges[t] {
            let side = mesh.edges[le.edge].side_of(t).expect("triangle owns its edges");
            out.extend(self.edge_side(le.edge, side));
        }
        out
    }

    pub fn key(&self, dof: usize) -> DofKey {
        if dof < self.n_interior {
            let np = pk_dim(self.k);
            return DofKey::Interior { element: dof / np, basis: dof % np };
        }
        let e = self.edge_offset.partition_point(|&o| o <= dof) - 1;
        let rel = dof - self.edge_offset[e];
        DofKey::Edge { edge: e, side: rel / (self.k + 1), basis: rel % (self.k + 1) }
    }

    pub fn free_dofs(&self) -> Vec<usize> {
        (0..self.total()).filter(|&i| !self.dirichlet_mask[i]).collect()
    }

    pub fn constrained_dofs(&self) -> Vec<usize> {
        (0..self.total()).filter(|&i| self.dirichlet_mask[i]).collect()
    }
}

/// Coefficients of a weak function `{v0, vb}` in the layout of a [`DofMap`].
#[derive(Debug, Clone, PartialEq)]
pub struct WgFunction {
    pub coeffs: Vec<f64>,
}

impl WgFunction {
    pub fn zeros(dofs: &DofMap) -> Self {
        WgFunction { coeffs: vec![0.0; dofs.total()] }
    }

    pub fn from_coeffs(dofs: &DofMap, coeffs: Vec<f64>) -> Result<Self, WgError> {
        if coeffs.len() != dofs.total() {
            return Err(WgError::LengthMismatch { got: coeffs.len(), expected: dofs.total() });
        }
        Ok(WgFunction { coeffs })
    }

    pub fn interior<'a>(&'a self, dofs: &DofMap, t: usize) -> &'a [f64] {
        &self.coeffs[dofs.interior(t)]
    }

    pub fn edge<'a>(&'a self, dofs: &DofMap, e: usize, side: usize) -> &'a [f64] {
        &self.coeffs[dofs.edge_side(e, side)]
    }
}

/// Per-element maps from local weak coefficients to `RT_k` coefficients of
/// the weak gradient.
#[derive(Debug, Clone)]
pub struct WeakGradientTable {
    pub matrices: Vec<DMatrix<f64>>,
}

/// Mesh, bases, DOF layout and weak gradients for one polynomial degree.
#[derive(Debug, Clone)]
pub struct WgSpace {
    pub mesh: Mesh,
    pub k: usize,
    pub dofs: DofMap,
    pub kits: Vec<ElementKit>,
    pub edge_kit: EdgeKit,
    pub grads: WeakGradientTable,
    local_dofs: Vec<Vec<usize>>,
}

impl WgSpace {
    pub fn new(mesh: Mesh, k: usize) -> Self {
        let dofs = DofMap::new(&mesh, k);
        let kits: Vec<ElementKit> = (0..mesh.n_triangles()).map(|t| ElementKit::new(&mesh, t, k)).collect();
        let edge_kit = EdgeKit::new(k);
        let local_dofs = (0..mesh.n_triangles()).map(|t| dofs.local_dofs(&mesh, t)).collect();
        let matrices = (0..mesh.n_triangles())
            .map(|t| weak_gradient_matrix(&mesh, t, &kits[t], &edge_kit))
            .collect();
        WgSpace { mesh, k, dofs, kits, edge_kit, grads: WeakGradientTable { matrices }, local_dofs }
    }

    pub fn local_dofs(&self, t: usize) -> &[usize] {
        &self.local_dofs[t]
    }

    pub fn gather(&self, v: &WgFunction, t: usize) -> DVector<f64> {
        DVector::from_iterator(self.local_dofs[t].len(), self.local_dofs[t].iter().map(|&i| v.coeffs[i]))
    }

    fn edge_points(&self, e: usize) -> (Point, Point) {
        let [a, b] = self.mesh.edges[e].endpoints;
        (self.mesh.vertices[a], self.mesh.vertices[b])
    }

    /// `RT_k` coefficients of `∇_w v` on element `t`.
    pub fn weak_gradient(&self, t: usize, local: &DVector<f64>) -> DVector<f64> {
        &self.grads.matrices[t] * local
    }

    pub fn project_q0(&self, t: usize, field: impl Fn(Point) -> f64) -> Vec<f64> {
        project_q0(&self.kits[t], field)
    }

    pub fn project_qb(&self, e: usize, field: impl Fn(Point) -> f64) -> Vec<f64> {
        let (a, b) = self.edge_points(e);
        self.edge_kit.project(a, b, field)
    }

    pub fn project_rh(&self, t: usize, field: impl Fn(Point) -> [f64; 2]) -> Vec<f64> {
        project_rh(&self.kits[t], field)
    }

    /// `Q_h` of a smooth field: `Q_0` per element, `Q_b` on every edge side.
    pub fn project_qh(&self, field: impl Fn(Point) -> f64) -> WgFunction {
        let mut v = WgFunction::zeros(&self.dofs);
        for t in 0..self.mesh.n_triangles() {
            let c = self.project_q0(t, &field);
            v.coeffs[self.dofs.interior(t)].copy_from_slice(&c);
        }
        for e in 0..self.mesh.n_edges() {
            let c = self.project_qb(e, &field);
            for side in 0..self.dofs.n_sides(e) {
                v.coeffs[self.dofs.edge_side(e, side)].copy_from_slice(&c);
            }
        }
        v
    }

    /// `⟦v_b⟧ = v_b|_{T1} - v_b|_{T2}` on an interior edge, `T1 = adjacent[0]`.
    pub fn jump(&self, e: usize, v: &WgFunction) -> Result<Vec<f64>, WgError> {
        if self.mesh.edges[e].is_boundary {
            return Err(WgError::BoundaryEdge(e));
        }
        Ok(v.edge(&self.dofs, e, 0).iter().zip(v.edge(&self.dofs, e, 1)).map(|(a, b)| a - b).collect())
    }

    /// `‖v_0‖` via the element Gram matrices.
    pub fn l2_interior(&self, v: &WgFunction) -> f64 {
        (0..self.mesh.n_triangles())
            .map(|t| {
                let c = DVector::from_column_slice(v.interior(&self.dofs, t));
                c.dot(&(&self.kits[t].gram_pk * &c))
            })
            .sum::<f64>()
            .max(0.0)
            .sqrt()
    }

    /// `a_w(x, y)` evaluated pointwise by quadrature, element by element and
    /// edge by edge, without any assembled matrix.
    pub fn a_w_direct(&self, a: &[[f64; 2]; 2], beta0: f64, x: &WgFunction, y: &WgFunction) -> f64 {
        let mut sum = 0.0;
        for t in 0..self.mesh.n_triangles() {
            let kit = &self.kits[t];
            let gx = self.weak_gradient(t, &self.gather(x, t));
            let gy = self.weak_gradient(t, &self.gather(y, t));
            sum += kit.quad_assembly.integrate(|p| {
                let u = kit.eval_vector(gx.as_slice(), p);
                let w = kit.eval_vector(gy.as_slice(), p);
                let au = [a[0][0] * u[0] + a[0][1] * u[1], a[1][0] * u[0] + a[1][1] * u[1]];
                au[0] * w[0] + au[1] * w[1]
            });
        }
        let ek = &self.edge_kit;
        for (e, edge) in self.mesh.edges.iter().enumerate() {
            if edge.is_boundary {
                continue;
            }
            let jx = self.jump(e, x).expect("interior edge");
            let jy = self.jump(e, y).expect("interior edge");
            let integral: f64 = ek
                .quad
                .points
                .iter()
                .zip(&ek.quad.weights)
                .map(|(&s, &w)| {
                    let phi = ek.eval(s);
                    let u: f64 = phi.iter().zip(&jx).map(|(p, c)| p * c).sum();
                    let v: f64 = phi.iter().zip(&jy).map(|(p, c)| p * c).sum();
                    0.5 * edge.length * w * u * v
                })
                .sum();
            sum += edge.length.powf(-beta0) * integral;
        }
        sum
    }
}

pub fn project_q0(kit: &ElementKit, field: impl Fn(Point) -> f64) -> Vec<f64> {
    let q = &kit.quad_error;
    let mut rhs = DVector::zeros(kit.pk_dim());
    for (&p, &w) in q.points.iter().zip(&q.weights) {
        let v = field(p);
        for (r, phi) in rhs.iter_mut().zip(kit.pk_eval(p)) {
            *r += w * v * phi;
        }
    }
    kit.solve_pk(&rhs).as_slice().to_vec()
}

pub fn project_rh(kit: &ElementKit, field: impl Fn(Point) -> [f64; 2]) -> Vec<f64> {
    let q = &kit.quad_error;
    let mut rhs = DMatrix::zeros(kit.rt_dim(), 1);
    for (&p, &w) in q.points.iter().zip(&q.weights) {
        let v = field(p);
        for (i, psi) in kit.rt_eval(p).iter().enumerate() {
            rhs[(i, 0)] += w * (v[0] * psi[0] + v[1] * psi[1]);
        }
    }
    kit.solve_rt(&rhs).as_slice().to_vec()
}

/// `G_T = Gram_RT⁻¹ B`, where `B` realises
/// `-(v_0, ∇·ψ)_T + ⟨v_b, ψ·n⟩_{∂T}` with the outward normal of `T`.
fn weak_gradient_matrix(mesh: &Mesh, t: usize, kit: &ElementKit, ek: &EdgeKit) -> DMatrix<f64> {
    let (np, nr, ne) = (kit.pk_dim(), kit.rt_dim(), ek.dim());
    let mut b = DMatrix::zeros(nr, np + 3 * ne);
    let q = &kit.quad_assembly;
    for (&p, &w) in q.points.iter().zip(&q.weights) {
        let div = kit.rt_div(p);
        let phi = kit.pk_eval(p);
        for i in 0..nr {
            for a in 0..np {
                b[(i, a)] -= w * div[i] * phi[a];
            }
        }
    }
    for (j, le) in mesh.triangle_edges[t].iter().enumerate() {
        let edge = &mesh.edges[le.edge];
        let n = [le.sign * edge.unit_normal[0], le.sign * edge.unit_normal[1]];
        let (pa, pb) = (mesh.vertices[edge.endpoints[0]], mesh.vertices[edge.endpoints[1]]);
        for (&s, &w) in ek.quad.points.iter().zip(&ek.quad.weights) {
            let x = EdgeKit::point(pa, pb, s);
            let psi = kit.rt_eval(x);
            let phi = ek.eval(s);
            let jw = 0.5 * edge.length * w;
            for i in 0..nr {
                let flux = psi[i][0] * n[0] + psi[i][1] * n[1];
                for (c, ph) in phi.iter().enumerate() {
                    b[(i, np + j * ne + c)] += jw * flux * ph;
                }
            }
        }
    }
    kit.solve_rt(&b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_uniform;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn space(n: usize, k: usize) -> WgSpace {
        WgSpace::new(generate_uniform(n).unwrap(), k)
    }

    #[test]
    fn dofmap_layout_is_a_bijection() {
        for k in [0, 1] {
            let s = space(3, k);
            let d = &s.dofs;
            let mut seen = std::collections::HashSet::new();
            for i in 0..d.total() {
                let key = d.key(i);
                assert!(seen.insert(key));
                let back = match key {
                    DofKey::Interior { element, basis } => d.interior(element).start + basis,
                    DofKey::Edge { edge, side, basis } => d.edge_side(edge, side).start + basis,
                };
                assert_eq!(back, i);
            }
            let n_bdry = s.mesh.n_boundary_edges();
            assert_eq!(d.dirichlet_mask.iter().filter(|&&m| m).count(), (k + 1) * n_bdry);
            let n_int_edges = s.mesh.n_edges() - n_bdry;
            assert_eq!(d.n_edge, (k + 1) * (2 * n_int_edges + n_bdry));
        }
    }

    #[test]
    fn q0_reproduces_constants_and_linears() {
        let s = space(2, 0);
        assert!((s.project_q0(3, |_| 5.0)[0] - 5.0).abs() < 1e-14);
        let s = space(2, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for t in 0..s.mesh.n_triangles() {
            let c = s.project_q0(t, |p| p[0] + p[1]);
            for _ in 0..5 {
                let (a, b): (f64, f64) = (rng.gen_range(0.0..0.5), rng.gen_range(0.0..0.5));
                let [p0, p1, p2] = s.kits[t].corners;
                let p = [
                    p0[0] + a * (p1[0] - p0[0]) + b * (p2[0] - p0[0]),
                    p0[1] + a * (p1[1] - p0[1]) + b * (p2[1] - p0[1]),
                ];
                assert!((s.kits[t].eval_scalar(&c, p) - (p[0] + p[1])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn q0_of_trig_field_matches_monte_carlo_mean() {
        use std::f64::consts::PI;
        let s = space(8, 0);
        let field = |p: Point| (2.0 * PI * p[0] + PI / 2.0).sin() * (2.0 * PI * p[1] + PI / 2.0).sin();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for t in [0, 17, 100] {
            let [p0, p1, p2] = s.kits[t].corners;
            // 100 x 100 stratified samples of the unit square, folded onto the triangle
            let n = 100;
            let mut mean = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let (mut a, mut b): (f64, f64) =
                        ((i as f64 + rng.gen::<f64>()) / n as f64, (j as f64 + rng.gen::<f64>()) / n as f64);
                    if a + b > 1.0 {
                        a = 1.0 - a;
                        b = 1.0 - b;
                    }
                    let p = [
                        p0[0] + a * (p1[0] - p0[0]) + b * (p2[0] - p0[0]),
                        p0[1] + a * (p1[1] - p0[1]) + b * (p2[1] - p0[1]),
                    ];
                    mean += field(p) / (n * n) as f64;
                }
            }
            let c = s.project_q0(t, field)[0];
            assert!((c - mean).abs() < 1e-3, "element {t}: {c} vs {mean}");
        }
    }

    #[test]
    fn qb_single_valued_on_interior_edges() {
        let s = space(2, 1);
        let v = s.project_qh(|p| (3.0 * p[0]).sin() + p[1] * p[1]);
        for e in 0..s.mesh.n_edges() {
            if !s.mesh.edges[e].is_boundary {
                let j = s.jump(e, &v).unwrap();
                assert!(j.iter().all(|x| x.abs() < 1e-13));
            }
        }
    }

    #[test]
    fn jump_contract() {
        let s = space(1, 0);
        let boundary = s.mesh.edges.iter().position(|e| e.is_boundary).unwrap();
        let interior = s.mesh.edges.iter().position(|e| !e.is_boundary).unwrap();
        let mut v = WgFunction::zeros(&s.dofs);
        assert_eq!(s.jump(boundary, &v).unwrap_err(), WgError::BoundaryEdge(boundary));
        v.coeffs[s.dofs.edge_side(interior, 0).start] = 1.0;
        assert_eq!(s.jump(interior, &v).unwrap(), vec![1.0]);
    }

    #[test]
    fn rh_reproduces_rt_members() {
        let s = space(2, 0);
        let kit = &s.kits[5];
        let c = s.project_rh(5, |_| [1.0, 0.0]);
        assert!((c[0] - 1.0).abs() < 1e-13 && c[1].abs() < 1e-13 && c[2].abs() < 1e-13);
        let c = s.project_rh(5, |p| [p[0], p[1]]);
        for p in [[0.6, 0.1], kit.centroid] {
            let v = kit.eval_vector(&c, p);
            assert!((v[0] - p[0]).abs() < 1e-13 && (v[1] - p[1]).abs() < 1e-13);
        }
        // rotation field: residual orthogonal to every basis member
        let c = s.project_rh(5, |p| [p[1], -p[0]]);
        for i in 0..kit.rt_dim() {
            let r = kit.quad_error.integrate(|p| {
                let v = kit.eval_vector(&c, p);
                let psi = kit.rt_eval(p)[i];
                (p[1] - v[0]) * psi[0] + (-p[0] - v[1]) * psi[1]
            });
            assert!(r.abs() < 1e-12);
        }
    }

    #[test]
    fn weak_gradient_of_constants_vanishes() {
        for k in [0, 1] {
            let s = space(3, k);
            let v = s.project_qh(|_| 1.0);
            for t in 0..s.mesh.n_triangles() {
                let g = s.weak_gradient(t, &s.gather(&v, t));
                // entries of G_T grow like 1/h_T; measure cancellation relative to them
                let scale = s.grads.matrices[t].amax().max(1.0);
                assert!(g.amax() < 1e-12 * scale, "k={k} t={t}: {}", g.amax());
            }
        }
    }

    #[test]
    fn weak_gradient_of_linear_is_constant_field() {
        for k in [0, 1] {
            let s = space(3, k);
            let v = s.project_qh(|p| p[0]);
            for t in 0..s.mesh.n_triangles() {
                let g = s.weak_gradient(t, &s.gather(&v, t));
                let expect = s.project_rh(t, |_| [1.0, 0.0]);
                for (a, b) in g.iter().zip(&expect) {
                    assert!((a - b).abs() < 1e-12);
                }
                assert!((g[0] - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn weak_gradient_single_edge_matches_dense_oracle() {
        // v0 = 0, vb = 1 on local edge 1 only: ∇_w v = Gram⁻¹ ∫_e ψ·n.
        let s = space(2, 0);
        let t = 3;
        let kit = &s.kits[t];
        let le = s.mesh.triangle_edges[t][1];
        let edge = &s.mesh.edges[le.edge];
        let side = edge.side_of(t).unwrap();
        let mut v = WgFunction::zeros(&s.dofs);
        v.coeffs[s.dofs.edge_side(le.edge, side).start] = 1.0;
        let g = s.weak_gradient(t, &s.gather(&v, t));

        // Oracle: 200-point midpoint rule along the edge.
        let (pa, pb) = (s.mesh.vertices[edge.endpoints[0]], s.mesh.vertices[edge.endpoints[1]]);
        let n = [le.sign * edge.unit_normal[0], le.sign * edge.unit_normal[1]];
        let m = 200;
        let mut rhs = DMatrix::zeros(3, 1);
        for i in 0..m {
            let s_par = -1.0 + (2 * i + 1) as f64 / m as f64;
            let p = EdgeKit::point(pa, pb, s_par);
            for (j, psi) in kit.rt_eval(p).iter().enumerate() {
                rhs[(j, 0)] += edge.length / m as f64 * (psi[0] * n[0] + psi[1] * n[1]);
            }
        }
        let expect = kit.solve_rt(&rhs);
        for (a, b) in g.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }
}
