//! Polynomial bases on a single triangle and a single edge.
//!
//! Scalar `P_k` functions are monomials in the scaled coordinates
//! `((x - c) / h_T, (y - c) / h_T)` about the centroid `c`, ordered
//! graded-lexicographically. The `RT_k` basis lists `(m, 0), (0, m)` for each
//! scalar monomial `m`, followed by `x̃ m` for every homogeneous monomial of
//! degree `k`. Edge functions are `sqrt(2i + 1) P_i(s)`, Legendre in the
//! arclength parameter `s ∈ [-1, 1]`, so the physical edge mass matrix is
//! `|e| I`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::mesh::{Mesh, Point};
use crate::quadrature::{triangle_quadrature, LineRule};

pub fn pk_dim(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

pub fn rt_dim(k: usize) -> usize {
    (k + 1) * (k + 3)
}

/// Exponent pairs `(a, b)` with `a + b <= k`, degree by degree, `a` descending.
pub fn monomial_exponents(k: usize) -> Vec<(u32, u32)> {
    let mut out = Vec::with_capacity(pk_dim(k));
    for d in 0..=k as u32 {
        for b in 0..=d {
            out.push((d - b, b));
        }
    }
    out
}

/// Quadrature points and weights mapped to one physical triangle.
#[derive(Debug, Clone)]
pub struct PhysicalRule {
    pub points: Vec<Point>,
    /// Weights already multiplied by the triangle area.
    pub weights: Vec<f64>,
}

impl PhysicalRule {
    fn on_triangle(corners: &[Point; 3], area: f64, degree: usize) -> Self {
        let rule = triangle_quadrature(degree).expect("supported degree");
        let points = rule
            .points
            .iter()
            .map(|l| {
                [
                    l[0] * corners[0][0] + l[1] * corners[1][0] + l[2] * corners[2][0],
                    l[0] * corners[0][1] + l[1] * corners[1][1] + l[2] * corners[2][1],
                ]
            })
            .collect();
        let weights = rule.weights.iter().map(|w| w * area).collect();
        PhysicalRule { points, weights }
    }

    pub fn integrate(&self, f: impl Fn(Point) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&p, w)| w * f(p)).sum()
    }
}

pub const ERROR_QUADRATURE_DEGREE: usize = 10;

pub fn assembly_quadrature_degree(k: usize) -> usize {
    (2 * k + 2).max(6)
}

/// Scaled-monomial frame of one triangle: evaluation of the `P_k` and
/// `RT_k` bases without any precomputed integrals.
#[derive(Debug, Clone)]
pub struct ScaledMonomials {
    pub k: usize,
    pub centroid: Point,
    pub scale: f64,
    exponents: Vec<(u32, u32)>,
}

fn dpow(v: f64, e: u32) -> f64 {
    if e == 0 {
        0.0
    } else {
        e as f64 * v.powi(e as i32 - 1)
    }
}

impl ScaledMonomials {
    pub fn new(k: usize, centroid: Point, scale: f64) -> Self {
        ScaledMonomials { k, centroid, scale, exponents: monomial_exponents(k) }
    }

    fn scaled(&self, p: Point) -> (f64, f64) {
        ((p[0] - self.centroid[0]) / self.scale, (p[1] - self.centroid[1]) / self.scale)
    }

    pub fn pk_eval(&self, p: Point) -> Vec<f64> {
        let (x, y) = self.scaled(p);
        self.exponents.iter().map(|&(a, b)| x.powi(a as i32) * y.powi(b as i32)).collect()
    }

    pub fn pk_grad(&self, p: Point) -> Vec<[f64; 2]> {
        let (x, y) = self.scaled(p);
        let h = self.scale;
        self.exponents
            .iter()
            .map(|&(a, b)| [dpow(x, a) * y.powi(b as i32) / h, x.powi(a as i32) * dpow(y, b) / h])
            .collect()
    }

    pub fn rt_eval(&self, p: Point) -> Vec<[f64; 2]> {
        let (x, y) = self.scaled(p);
        let k = self.k as u32;
        let mut out = Vec::with_capacity(rt_dim(self.k));
        for &(a, b) in &self.exponents {
            let m = x.powi(a as i32) * y.powi(b as i32);
            out.push([m, 0.0]);
            out.push([0.0, m]);
        }
        for b in 0..=k {
            let m = x.powi((k - b) as i32) * y.powi(b as i32);
            out.push([x * m, y * m]);
        }
        out
    }

    /// Divergences of the `RT_k` functions; `∇·(x̃ m) = (k + 2) m / h` for homogeneous `m`.
    pub fn rt_div(&self, p: Point) -> Vec<f64> {
        let (x, y) = self.scaled(p);
        let h = self.scale;
        let k = self.k as u32;
        let mut out = Vec::with_capacity(rt_dim(self.k));
        for &(a, b) in &self.exponents {
            out.push(dpow(x, a) * y.powi(b as i32) / h);
            out.push(x.powi(a as i32) * dpow(y, b) / h);
        }
        for b in 0..=k {
            let m = x.powi((k - b) as i32) * y.powi(b as i32);
            out.push((k + 2) as f64 * m / h);
        }
        out
    }
}

/// Per-element basis data: frame, quadrature, and factored Gram matrices.
#[derive(Debug, Clone)]
pub struct ElementKit {
    pub k: usize,
    pub corners: [Point; 3],
    pub centroid: Point,
    pub scale: f64,
    pub area: f64,
    pub quad_assembly: PhysicalRule,
    pub quad_error: PhysicalRule,
    pub gram_pk: DMatrix<f64>,
    pub gram_rt: DMatrix<f64>,
    frame: ScaledMonomials,
    gram_pk_chol: Cholesky<f64, Dyn>,
    gram_rt_chol: Cholesky<f64, Dyn>,
}

impl ElementKit {
    pub fn new(mesh: &Mesh, t: usize, k: usize) -> Self {
        Self::from_corners(mesh.corners(t), k)
    }

    /// The corners are rotated to start at the lexicographically smallest
    /// one, so the (not rotation-symmetric) quadrature and every derived
    /// quantity are independent of how the triangle's vertices are listed.
    pub fn from_corners(mut corners: [Point; 3], k: usize) -> Self {
        let first = (0..3)
            .min_by(|&i, &j| corners[i].partial_cmp(&corners[j]).expect("finite coordinates"))
            .unwrap_or(0);
        corners.rotate_left(first);
        let [a, b, c] = corners;
        let area = 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]));
        let centroid = [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0];
        let d = |p: Point, q: Point| (p[0] - q[0]).hypot(p[1] - q[1]);
        let scale = d(a, b).max(d(b, c)).max(d(c, a));
        let quad_assembly = PhysicalRule::on_triangle(&corners, area, assembly_quadrature_degree(k));
        let quad_error = PhysicalRule::on_triangle(&corners, area, ERROR_QUADRATURE_DEGREE.max(2 * k + 2));
        let frame = ScaledMonomials::new(k, centroid, scale);

        let (np, nr) = (pk_dim(k), rt_dim(k));
        let mut gram_pk = DMatrix::zeros(np, np);
        let mut gram_rt = DMatrix::zeros(nr, nr);
        for (&p, &w) in quad_assembly.points.iter().zip(&quad_assembly.weights) {
            let phi = frame.pk_eval(p);
            let psi = frame.rt_eval(p);
            for i in 0..np {
                for j in 0..np {
                    gram_pk[(i, j)] += w * phi[i] * phi[j];
                }
            }
            for i in 0..nr {
                for j in 0..nr {
                    gram_rt[(i, j)] += w * (psi[i][0] * psi[j][0] + psi[i][1] * psi[j][1]);
                }
            }
        }
        let gram_pk_chol = Cholesky::new(gram_pk.clone()).expect("P_k Gram matrix is SPD");
        let gram_rt_chol = Cholesky::new(gram_rt.clone()).expect("RT_k Gram matrix is SPD");
        ElementKit {
            k,
            corners,
            centroid,
            scale,
            area,
            quad_assembly,
            quad_error,
            gram_pk,
            gram_rt,
            frame,
            gram_pk_chol,
            gram_rt_chol,
        }
    }

    pub fn pk_dim(&self) -> usize {
        pk_dim(self.k)
    }

    pub fn rt_dim(&self) -> usize {
        rt_dim(self.k)
    }

    pub fn pk_eval(&self, p: Point) -> Vec<f64> {
        self.frame.pk_eval(p)
    }

    pub fn pk_grad(&self, p: Point) -> Vec<[f64; 2]> {
        self.frame.pk_grad(p)
    }

    pub fn rt_eval(&self, p: Point) -> Vec<[f64; 2]> {
        self.frame.rt_eval(p)
    }

    pub fn rt_div(&self, p: Point) -> Vec<f64> {
        self.frame.rt_div(p)
    }

    /// Solves `gram_pk c = rhs`.
    pub fn solve_pk(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.gram_pk_chol.solve(rhs)
    }

    /// Solves `gram_rt c = rhs` (columnwise for matrices).
    pub fn solve_rt(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        self.gram_rt_chol.solve(rhs)
    }

    /// Evaluates a `P_k` expansion at a point.
    pub fn eval_scalar(&self, coeffs: &[f64], p: Point) -> f64 {
        self.pk_eval(p).iter().zip(coeffs).map(|(a, b)| a * b).sum()
    }

    /// Evaluates an `RT_k` expansion at a point.
    pub fn eval_vector(&self, coeffs: &[f64], p: Point) -> [f64; 2] {
        self.rt_eval(p).iter().zip(coeffs).fold([0.0, 0.0], |acc, (v, c)| [acc[0] + c * v[0], acc[1] + c * v[1]])
    }

    /// Weighted RT Gram matrix `∫ ψ_i · A ψ_j`.
    pub fn weighted_gram_rt(&self, a: &[[f64; 2]; 2]) -> DMatrix<f64> {
        let nr = self.rt_dim();
        let mut g = DMatrix::zeros(nr, nr);
        for (&p, &w) in self.quad_assembly.points.iter().zip(&self.quad_assembly.weights) {
            let psi = self.rt_eval(p);
            let apsi: Vec<[f64; 2]> = psi
                .iter()
                .map(|v| [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]])
                .collect();
            for i in 0..nr {
                for j in 0..nr {
                    g[(i, j)] += w * (psi[i][0] * apsi[j][0] + psi[i][1] * apsi[j][1]);
                }
            }
        }
        g
    }
}

/// Orthonormal Legendre basis on an edge plus a Gauss rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct EdgeKit {
    pub k: usize,
    pub quad: LineRule,
}

impl EdgeKit {
    pub fn new(k: usize) -> Self {
        EdgeKit { k, quad: LineRule::exact_to(2 * k + 10) }
    }

    pub fn dim(&self) -> usize {
        self.k + 1
    }

    pub fn eval(&self, s: f64) -> Vec<f64> {
        (0..=self.k).map(|i| ((2 * i + 1) as f64).sqrt() * legendre(i, s)).collect()
    }

    /// Physical point at parameter `s` on the segment `a -> b`.
    pub fn point(a: Point, b: Point, s: f64) -> Point {
        let (wa, wb) = (0.5 * (1.0 - s), 0.5 * (1.0 + s));
        [wa * a[0] + wb * b[0], wa * a[1] + wb * b[1]]
    }

    /// `L^2(e)` projection coefficients of `field` on the segment `a -> b`.
    pub fn project(&self, a: Point, b: Point, field: impl Fn(Point) -> f64) -> Vec<f64> {
        let mut c = vec![0.0; self.dim()];
        for (&s, &w) in self.quad.points.iter().zip(&self.quad.weights) {
            let v = field(Self::point(a, b, s));
            for (ci, phi) in c.iter_mut().zip(self.eval(s)) {
                *ci += 0.5 * w * v * phi;
            }
        }
        c
    }
}

fn legendre(n: usize, s: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, s);
    if n == 0 {
        return 1.0;
    }
    for j in 2..=n {
        let j = j as f64;
        let p2 = ((2.0 * j - 1.0) * s * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
    }
    p1
}
