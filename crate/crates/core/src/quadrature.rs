//! Gauss rules on the interval and on triangles.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum QuadratureError {
    #[error("no triangle rule for degree {0} (supported: 1..=12)")]
    UnsupportedDegree(usize),
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let dp = legendre_with_derivative(n, x).1;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Legendre polynomial `P_n(x)` and its derivative, for |x| < 1.
pub fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let j = j as f64;
        let p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A rule on the reference triangle. Points are barycentric coordinates,
/// weights sum to one (they are fractions of the triangle's area).
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub degree: usize,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

/// Rule exact for polynomials of total degree `degree` on any triangle.
///
/// Degrees 1 and 2 use the centroid and the 3-point interior rule; higher
/// degrees use a collapsed (Duffy) product of Gauss-Legendre rules, which
/// keeps all weights positive and all points interior.
pub fn triangle_quadrature(degree: usize) -> Result<TriangleRule, QuadratureError> {
    match degree {
        1 => Ok(TriangleRule { degree, points: vec![[1.0 / 3.0; 3]], weights: vec![1.0] }),
        2 => {
            let (a, b) = (2.0 / 3.0, 1.0 / 6.0);
            Ok(TriangleRule {
                degree,
                points: vec![[a, b, b], [b, a, b], [b, b, a]],
                weights: vec![1.0 / 3.0; 3],
            })
        }
        3..=12 => {
            let n = (degree + 2).div_ceil(2);
            let (x, w) = gauss_legendre(n);
            let mut points = Vec::with_capacity(n * n);
            let mut weights = Vec::with_capacity(n * n);
            for i in 0..n {
                let a = 0.5 * (1.0 + x[i]);
                for j in 0..n {
                    let b = 0.5 * (1.0 + x[j]);
                    let xi = a;
                    let eta = (1.0 - a) * b;
                    points.push([1.0 - xi - eta, xi, eta]);
                    // (w_i/2)(w_j/2) on [0,1]^2, Jacobian (1-a), times 2 for unit total weight
                    weights.push(0.5 * w[i] * w[j] * (1.0 - a));
                }
            }
            Ok(TriangleRule { degree, points, weights })
        }
        _ => Err(QuadratureError::UnsupportedDegree(degree)),
    }
}

/// Gauss rule on [-1, 1] exact to `degree`.
#[derive(Debug, Clone)]
pub struct LineRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl LineRule {
    pub fn exact_to(degree: usize) -> Self {
        let (points, weights) = gauss_legendre(degree / 2 + 1);
        LineRule { points, weights }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    // ∫ over the reference triangle of x^a y^b = a! b! / (a+b+2)!
    fn monomial_integral(a: u32, b: u32) -> f64 {
        factorial(a) * factorial(b) / factorial(a + b + 2)
    }

    fn integrate(rule: &TriangleRule, a: i32, b: i32) -> f64 {
        rule.points
            .iter()
            .zip(&rule.weights)
            .map(|(p, w)| 0.5 * w * p[1].powi(a) * p[2].powi(b))
            .sum()
    }

    #[test]
    fn centroid_rule() {
        let r = triangle_quadrature(1).unwrap();
        assert_eq!(r.weights, vec![1.0]);
        assert!(r.points[0].iter().all(|&l| (l - 1.0 / 3.0).abs() < 1e-16));
    }

    #[test]
    fn degree_two_quadratics() {
        let r = triangle_quadrature(2).unwrap();
        assert_eq!(r.points.len(), 3);
        assert!((integrate(&r, 2, 0) - 1.0 / 12.0).abs() < 1e-15);
        assert!((integrate(&r, 1, 1) - 1.0 / 24.0).abs() < 1e-15);
        assert!((integrate(&r, 0, 2) - 1.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn degree_ten_x10() {
        let r = triangle_quadrature(10).unwrap();
        let closed = monomial_integral(10, 0);
        assert!((closed - 1.0 / 132.0).abs() < 1e-17);
        assert!(((integrate(&r, 10, 0) - closed) / closed).abs() < 1e-14);
    }

    #[test]
    fn all_monomials_exact() {
        for degree in 1..=12usize {
            let r = triangle_quadrature(degree).unwrap();
            let total: f64 = r.weights.iter().sum();
            assert!((total - 1.0).abs() < 1e-14);
            for a in 0..=degree as u32 {
                for b in 0..=(degree as u32 - a) {
                    let exact = monomial_integral(a, b);
                    let got = integrate(&r, a as i32, b as i32);
                    assert!(((got - exact) / exact).abs() < 1e-13, "deg {degree}: x^{a} y^{b}");
                }
            }
        }
    }

    #[test]
    fn unsupported_degrees() {
        assert_eq!(triangle_quadrature(0).unwrap_err(), QuadratureError::UnsupportedDegree(0));
        assert_eq!(triangle_quadrature(13).unwrap_err(), QuadratureError::UnsupportedDegree(13));
    }

    #[test]
    fn line_rule_exactness() {
        for degree in 0..=21usize {
            let r = LineRule::exact_to(degree);
            let got: f64 = r.points.iter().zip(&r.weights).map(|(x, w)| w * x.powi(degree as i32)).sum();
            let exact = if degree % 2 == 1 { 0.0 } else { 2.0 / (degree as f64 + 1.0) };
            assert!((got - exact).abs() < 1e-14, "degree {degree}");
        }
    }
}
