mod common;

use common::{jittered_mesh, max_abs_diff, random_vector, rel_diff, rng};
use nalgebra::{DMatrix, SymmetricEigen};
use opwg_core::assembly::{assemble_load, assemble_stiffness, default_beta0, SparseSystem, IDENTITY};
use opwg_core::linsolve::{dense_cholesky, dot, norm, CsrMatrix};
use opwg_core::mesh::{generate_uniform, Point};
use opwg_core::wg::{WgFunction, WgSpace};
use rand::Rng;

/// `Σ c x^i y^j` with its exact gradient.
struct Poly(Vec<(i32, i32, f64)>);

impl Poly {
    fn random(degree: i32, rng: &mut impl Rng) -> Self {
        let mut terms = Vec::new();
        for total in 0..=degree {
            for i in 0..=total {
                terms.push((i, total - i, rng.gen_range(-1.0..1.0)));
            }
        }
        Poly(terms)
    }

    fn value(&self, [x, y]: Point) -> f64 {
        self.0.iter().map(|&(i, j, c)| c * x.powi(i) * y.powi(j)).sum()
    }

    fn gradient(&self, [x, y]: Point) -> [f64; 2] {
        let mut g = [0.0; 2];
        for &(i, j, c) in &self.0 {
            if i > 0 {
                g[0] += c * i as f64 * x.powi(i - 1) * y.powi(j);
            }
            if j > 0 {
                g[1] += c * j as f64 * x.powi(i) * y.powi(j - 1);
            }
        }
        g
    }
}

#[test]
fn weak_gradient_commutes_with_projection() {
    let mut rng = rng(7);
    // 50 cases for the degrees used in the tables, plus k = 2 at a looser
    // tolerance: its element Gram matrices are worse conditioned.
    for case in 0..60 {
        let (k, tol) = if case < 50 { (case % 2, 1e-11) } else { (2, 1e-9) };
        let n = 1 + case % 3;
        let mesh = jittered_mesh(n, 0.25, &mut rng);
        let space = WgSpace::new(mesh, k);
        let v = Poly::random(k as i32 + 1, &mut rng);
        let qv = space.project_qh(|p| v.value(p));
        for t in 0..space.mesh.n_triangles() {
            let weak = space.weak_gradient(t, &space.gather(&qv, t));
            let projected = space.project_rh(t, |p| v.gradient(p));
            let scale = projected.iter().fold(1.0_f64, |m, c| m.max(c.abs()));
            let diff = max_abs_diff(weak.as_slice(), &projected);
            assert!(diff <= tol * scale, "case {case} (k={k}, n={n}) element {t}: {diff:e}");
        }
    }
}

#[test]
fn assembled_form_matches_direct_evaluation() {
    let mut rng = rng(11);
    let a = [[2.0, 0.5], [0.5, 1.0]];
    for (n, k) in [(2, 0), (4, 1), (8, 0), (8, 1), (3, 2)] {
        let space = WgSpace::new(jittered_mesh(n, 0.2, &mut rng), k);
        let beta0 = default_beta0(k);
        let stiffness = assemble_stiffness(&space, &a, beta0);
        for _ in 0..3 {
            let x = WgFunction { coeffs: random_vector(space.dofs.total(), &mut rng) };
            let y = WgFunction { coeffs: random_vector(space.dofs.total(), &mut rng) };
            let assembled = stiffness.bilinear(&x.coeffs, &y.coeffs);
            let direct = space.a_w_direct(&a, beta0, &x, &y);
            let scale = (stiffness.bilinear(&x.coeffs, &x.coeffs) * stiffness.bilinear(&y.coeffs, &y.coeffs)).sqrt();
            assert!((assembled - direct).abs() <= 1e-11 * scale, "n={n}, k={k}: {assembled} vs {direct}");
        }
    }
}

#[test]
fn stiffness_symmetric_and_kernel_holds_constants() {
    for k in 0..3 {
        let space = WgSpace::new(generate_uniform(4).unwrap(), k);
        let stiffness = assemble_stiffness(&space, &IDENTITY, default_beta0(k));
        assert!(stiffness.is_symmetric(), "k={k}");
        let ones = space.project_qh(|_| 1.0);
        let kv = stiffness.mul_vec(&ones.coeffs);
        let scale = stiffness.diagonal().iter().fold(0.0_f64, |m, d| m.max(d.abs()));
        assert!(norm(&kv) <= 1e-12 * scale, "k={k}: |K·1| = {:e}", norm(&kv));
    }
}

/// Ritz values of `a` from `steps` Lanczos iterations with full
/// reorthogonalization.
fn ritz_values(a: &CsrMatrix, steps: usize, start: &[f64]) -> Vec<f64> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut q: Vec<f64> = start.iter().map(|v| v / norm(start)).collect();
    let (mut alphas, mut betas) = (Vec::new(), Vec::new());
    for _ in 0..steps.min(a.nrows()) {
        let mut w = a.mul_vec(&q);
        let alpha = dot(&w, &q);
        basis.push(q.clone());
        for b in &basis {
            let c = dot(&w, b);
            w.iter_mut().zip(b).for_each(|(wi, bi)| *wi -= c * bi);
        }
        alphas.push(alpha);
        let beta = norm(&w);
        if beta < 1e-12 * alpha.abs() {
            break;
        }
        betas.push(beta);
        q = w.iter().map(|v| v / beta).collect();
    }
    let m = alphas.len();
    let t = DMatrix::from_fn(m, m, |i, j| match i.abs_diff(j) {
        0 => alphas[i],
        1 => betas[i.min(j)],
        _ => 0.0,
    });
    SymmetricEigen::new(t).eigenvalues.iter().copied().collect()
}

#[test]
fn reduced_stiffness_is_positive_definite() {
    let mut rng = rng(3);
    for (n, k) in [(4, 0), (8, 0), (16, 0), (4, 1), (8, 1)] {
        let space = WgSpace::new(generate_uniform(n).unwrap(), k);
        let sys = SparseSystem::assemble(&space, &IDENTITY, default_beta0(k)).unwrap();
        let k_ff = sys.stiffness.submatrix(&sys.free, &sys.free);
        let start = random_vector(sys.free.len(), &mut rng);
        let smallest = ritz_values(&k_ff, 50, &start).into_iter().fold(f64::INFINITY, f64::min);
        assert!(smallest > 0.0, "n={n}, k={k}: smallest Ritz value {smallest:e}");
    }
    // Dense factorization as an exact SPD detector on a small mesh.
    for k in 0..2 {
        let space = WgSpace::new(generate_uniform(3).unwrap(), k);
        let sys = SparseSystem::assemble(&space, &IDENTITY, default_beta0(k)).unwrap();
        let k_ff = sys.stiffness.submatrix(&sys.free, &sys.free);
        let b = vec![1.0; sys.free.len()];
        dense_cholesky(&k_ff.to_dense(), &b).unwrap();
    }
}

#[test]
fn full_stiffness_is_singular_without_boundary_conditions() {
    let space = WgSpace::new(generate_uniform(2).unwrap(), 0);
    let stiffness = assemble_stiffness(&space, &IDENTITY, 3.0);
    assert!(dense_cholesky(&stiffness.to_dense(), &vec![1.0; space.dofs.total()]).is_err());
}

#[test]
fn poincare_ratio_does_not_grow_under_refinement() {
    let mut rng = rng(19);
    let smooth = |[x, y]: Point| (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * y).sin();
    let mut previous = f64::INFINITY;
    for n in [4, 8, 16, 32] {
        let space = WgSpace::new(generate_uniform(n).unwrap(), 0);
        let sys = SparseSystem::assemble(&space, &IDENTITY, 3.0).unwrap();
        let ratio = |coeffs: &[f64]| {
            let v = WgFunction { coeffs: coeffs.to_vec() };
            space.l2_interior(&v) / sys.stiffness_split.mul_vec(coeffs).iter().zip(coeffs).map(|(a, b)| a * b).sum::<f64>().sqrt()
        };
        let mut worst = 0.0_f64;
        for _ in 0..20 {
            let mut c = random_vector(space.dofs.total(), &mut rng);
            for &i in &sys.constrained {
                c[i] = 0.0;
            }
            worst = worst.max(ratio(&c));
        }
        assert!(worst <= previous * (1.0 + 1e-12), "n={n}: {worst} after {previous}");
        previous = worst;

        // A smooth field approaches the continuous constant 1/(π√2) ≈ 0.225
        // of the unit square from below, so it is bounded rather than
        // monotone.
        let mut q = space.project_qh(smooth).coeffs;
        for &i in &sys.constrained {
            q[i] = 0.0;
        }
        let smooth_ratio = ratio(&q);
        assert!(smooth_ratio < 0.3, "n={n}: smooth ratio {smooth_ratio}");
    }
}

#[test]
fn load_is_linear_in_the_source() {
    let space = WgSpace::new(generate_uniform(4).unwrap(), 1);
    let f1 = |[x, y]: Point| (3.0 * x).sin() + y * y;
    let f2 = |[x, y]: Point| (x * y).exp();
    let alpha = -2.5;
    let combined = assemble_load(&space, |p| alpha * f1(p) + f2(p));
    let (l1, l2) = (assemble_load(&space, f1), assemble_load(&space, f2));
    for (i, c) in combined.iter().enumerate() {
        let expected = alpha * l1[i] + l2[i];
        assert!((c - expected).abs() <= 1e-13 * expected.abs().max(1.0), "dof {i}");
    }
}

#[test]
fn energy_of_linear_field_on_unit_mesh() {
    let space = WgSpace::new(generate_uniform(1).unwrap(), 0);
    let stiffness = assemble_stiffness(&space, &IDENTITY, 3.0);
    let v = space.project_qh(|p| p[0]);
    assert!(rel_diff(stiffness.bilinear(&v.coeffs, &v.coeffs), 1.0) < 1e-12);
}
