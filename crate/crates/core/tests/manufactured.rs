mod common;

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use common::{rel_diff, rng};
use opwg_core::analysis::{eoc, error_norms, final_time_errors, ManufacturedCase};
use opwg_core::assembly::{default_beta0, solve_elliptic, SparseSystem, IDENTITY};
use opwg_core::linsolve::{PreconditionerKind, SolverSettings};
use opwg_core::mesh::{generate_uniform, Mesh};
use opwg_core::stepper::ThetaConfig;
use opwg_core::wg::WgSpace;
use rand::seq::SliceRandom;
use rand::Rng;

/// Hyper-dual number `a + b ε₁ + c ε₂ + d ε₁ε₂` with `ε₁² = ε₂² = 0`:
/// exact first and mixed second derivatives.
#[derive(Debug, Clone, Copy)]
struct HyperDual {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl HyperDual {
    fn constant(a: f64) -> Self {
        HyperDual { a, b: 0.0, c: 0.0, d: 0.0 }
    }

    fn seed(a: f64, first: bool, second: bool) -> Self {
        HyperDual { a, b: if first { 1.0 } else { 0.0 }, c: if second { 1.0 } else { 0.0 }, d: 0.0 }
    }

    /// Applies a scalar function given its value and two derivatives at `a`.
    fn chain(self, f: f64, df: f64, d2f: f64) -> Self {
        HyperDual { a: f, b: df * self.b, c: df * self.c, d: df * self.d + d2f * self.b * self.c }
    }

    fn cos(self) -> Self {
        self.chain(self.a.cos(), -self.a.sin(), -self.a.cos())
    }
}

impl Add for HyperDual {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        HyperDual { a: self.a + o.a, b: self.b + o.b, c: self.c + o.c, d: self.d + o.d }
    }
}

impl Sub for HyperDual {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        HyperDual { a: self.a - o.a, b: self.b - o.b, c: self.c - o.c, d: self.d - o.d }
    }
}

impl Mul for HyperDual {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        HyperDual {
            a: self.a * o.a,
            b: self.a * o.b + self.b * o.a,
            c: self.a * o.c + self.c * o.a,
            d: self.a * o.d + self.b * o.c + self.c * o.b + self.d * o.a,
        }
    }
}

/// `cos(2πt²) cos(2πx) cos(2πy)`, written independently of the library.
fn u(x: HyperDual, y: HyperDual, t: HyperDual) -> HyperDual {
    let w = HyperDual::constant(2.0 * PI);
    (w * t * t).cos() * (w * x).cos() * (w * y).cos()
}

#[test]
fn source_matches_pde_residual_of_exact_solution() {
    let mut rng = rng(29);
    for a in [IDENTITY, [[2.0, 0.5], [0.5, 1.0]]] {
        let case = ManufacturedCase::cosine_example_with(a);
        for _ in 0..100 {
            let (x, y, t): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
            let c = HyperDual::constant;
            let u_t = u(c(x), c(y), HyperDual::seed(t, true, false)).b;
            let u_xx = u(HyperDual::seed(x, true, true), c(y), c(t)).d;
            let u_yy = u(c(x), HyperDual::seed(y, true, true), c(t)).d;
            let u_xy = u(HyperDual::seed(x, true, false), HyperDual::seed(y, false, true), c(t)).d;
            let div = a[0][0] * u_xx + (a[0][1] + a[1][0]) * u_xy + a[1][1] * u_yy;
            let residual = u_t - div - (case.source)([x, y], t);
            assert!(residual.abs() < 1e-10, "A={a:?} at ({x}, {y}, {t}): {residual:e}");
            let value = u(c(x), c(y), c(t)).a;
            assert!((value - (case.exact)([x, y], t)).abs() < 1e-14);
        }
    }
}

#[test]
fn interior_projection_converges_at_order_k_plus_one() {
    let exact = |p: [f64; 2]| (2.0 * PI * p[0]).cos() * (2.0 * PI * p[1]).cos();
    for k in 0..3 {
        let sizes = [4, 8, 16, 32];
        let errors: Vec<f64> = sizes
            .iter()
            .map(|&n| {
                let space = WgSpace::new(generate_uniform(n).unwrap(), k);
                (0..space.mesh.n_triangles())
                    .map(|t| {
                        let kit = &space.kits[t];
                        let c = space.project_q0(t, exact);
                        kit.quad_error.integrate(|p| (kit.eval_scalar(&c, p) - exact(p)).powi(2))
                    })
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        let steps: Vec<f64> = sizes.iter().map(|&n| 1.0 / n as f64).collect();
        let last = eoc(&steps, &errors).unwrap().last().unwrap().unwrap();
        assert!((last - (k + 1) as f64).abs() < 0.15, "k={k}: orders from {errors:?} end at {last}");
    }
}

fn reordered(mesh: &Mesh, seed: u64) -> Mesh {
    let mut rng = rng(seed);
    let mut triangles = mesh.triangles.clone();
    triangles.shuffle(&mut rng);
    for tri in &mut triangles {
        tri.rotate_left(rng.gen_range(0..3));
    }
    Mesh::from_parts(mesh.vertices.clone(), triangles).unwrap()
}

#[test]
fn errors_are_invariant_under_element_reordering() {
    let case = ManufacturedCase::cosine_example();
    let solver = SolverSettings { tolerance: 1e-12, max_iterations: None, preconditioner: PreconditionerKind::Cholesky };
    for (n, k, theta, n_steps) in [(8, 0, 1.0, 64), (4, 1, 0.5, 64)] {
        let base = generate_uniform(n).unwrap();
        let config = ThetaConfig::uniform(theta, 1.0, n_steps, default_beta0(k), solver);
        let reference = final_time_errors(&WgSpace::new(base.clone(), k), &case, config, false).unwrap().0;
        for seed in [1, 2] {
            let shuffled = WgSpace::new(reordered(&base, seed), k);
            let errors = final_time_errors(&shuffled, &case, config, false).unwrap().0;
            assert!(rel_diff(errors.l2, reference.l2) < 1e-12, "n={n}, k={k}: {errors:?} vs {reference:?}");
            assert!(rel_diff(errors.energy, reference.energy) < 1e-12, "n={n}, k={k}: {errors:?} vs {reference:?}");
        }
    }
}

#[test]
fn steady_sine_problem_converges_at_order_k_plus_two() {
    let case = ManufacturedCase::sine_steady();
    let solver = SolverSettings { tolerance: 1e-12, max_iterations: None, preconditioner: PreconditionerKind::Cholesky };
    for k in 0..2 {
        let beta0 = default_beta0(k);
        let sizes = [8, 16, 32];
        let errors: Vec<f64> = sizes
            .iter()
            .map(|&n| {
                let space = WgSpace::new(generate_uniform(n).unwrap(), k);
                let (uh, report) = solve_elliptic(
                    &space,
                    &IDENTITY,
                    beta0,
                    |p| (case.source)(p, 0.0),
                    |p| (case.exact)(p, 0.0),
                    &solver,
                )
                .unwrap();
                assert!(report.converged);
                let sys = SparseSystem::assemble(&space, &IDENTITY, beta0).unwrap();
                error_norms(&space, &sys, &uh, |p| (case.exact)(p, 0.0)).l2
            })
            .collect();
        let steps: Vec<f64> = sizes.iter().map(|&n| 1.0 / n as f64).collect();
        for order in eoc(&steps, &errors).unwrap() {
            let order = order.unwrap();
            assert!(order >= (k + 2) as f64 - 0.2, "k={k}: errors {errors:?}, order {order}");
        }
    }
}
