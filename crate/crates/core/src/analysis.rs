//! Manufactured solutions, error norms and convergence rates.

use std::f64::consts::PI;
use std::sync::Arc;

use thiserror::Error;

use crate::assembly::{ProblemSpec, SpaceTimeField, SparseSystem, IDENTITY};
use crate::linsolve::dot;
use crate::mesh::Point;
use crate::stepper::{RunOutcome, StepperError, ThetaConfig, ThetaStepper};
use crate::wg::{WgFunction, WgSpace};

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("steps and errors have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("rates need positive finite values, got {0:e} at position {1}")]
    NonPositive(f64, usize),
}

/// An exact solution `u` with the matching source `f = u_t - ∇·(A∇u)`.
#[derive(Clone)]
pub struct ManufacturedCase {
    pub label: String,
    pub diffusion: [[f64; 2]; 2],
    pub exact: SpaceTimeField,
    pub source: SpaceTimeField,
    pub final_time: f64,
}

impl std::fmt::Debug for ManufacturedCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ManufacturedCase")
            .field("label", &self.label)
            .field("diffusion", &self.diffusion)
            .field("final_time", &self.final_time)
            .finish_non_exhaustive()
    }
}

impl ManufacturedCase {
    /// `u = cos(2πt²) cos(2πx) cos(2πy)` on the unit square with `A = I`,
    /// final time 1.
    pub fn cosine_example() -> Self {
        Self::cosine_example_with(IDENTITY)
    }

    /// The cosine example for a constant SPD matrix `A`.
    pub fn cosine_example_with(a: [[f64; 2]; 2]) -> Self {
        let w = 2.0 * PI;
        let exact = move |p: Point, t: f64| (w * t * t).cos() * (w * p[0]).cos() * (w * p[1]).cos();
        let source = move |p: Point, t: f64| {
            let (cx, cy) = ((w * p[0]).cos(), (w * p[1]).cos());
            let (sx, sy) = ((w * p[0]).sin(), (w * p[1]).sin());
            let time = (w * t * t).cos();
            let u_t = -2.0 * w * t * (w * t * t).sin() * cx * cy;
            // -∇·(A∇u) = w²((a11 + a22) cx cy - (a12 + a21) sx sy) c(t)
            let flux = w * w * time * ((a[0][0] + a[1][1]) * cx * cy - (a[0][1] + a[1][0]) * sx * sy);
            u_t + flux
        };
        ManufacturedCase {
            label: "cosine".into(),
            diffusion: a,
            exact: Arc::new(exact),
            source: Arc::new(source),
            final_time: 1.0,
        }
    }

    /// Steady `u = sin(πx) sin(πy)` with `f = 2π² u`, `A = I`.
    pub fn sine_steady() -> Self {
        let exact = |p: Point, _t: f64| (PI * p[0]).sin() * (PI * p[1]).sin();
        ManufacturedCase {
            label: "sine".into(),
            diffusion: IDENTITY,
            exact: Arc::new(exact),
            source: Arc::new(move |p, t| 2.0 * PI * PI * exact(p, t)),
            final_time: 1.0,
        }
    }

    pub fn problem(&self) -> ProblemSpec {
        let exact = self.exact.clone();
        ProblemSpec {
            diffusion: self.diffusion,
            source: self.source.clone(),
            boundary: self.exact.clone(),
            initial: Arc::new(move |p| exact(p, 0.0)),
            final_time: self.final_time,
        }
    }
}

/// `‖e_0‖` and `⫼e⫼` of `e = Q_h u - u_h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    pub l2: f64,
    pub energy: f64,
}

/// Errors of `uh` against `Q_h u`: the `L²` norm through the mass matrix and
/// the energy norm `sqrt(a_w(e, e))` through the stiffness.
pub fn error_norms(space: &WgSpace, system: &SparseSystem, uh: &WgFunction, exact: impl Fn(Point) -> f64) -> ErrorNorms {
    let q = space.project_qh(exact);
    let e: Vec<f64> = q.coeffs.iter().zip(&uh.coeffs).map(|(a, b)| a - b).collect();
    let l2 = dot(&e, &system.mass.mul_vec(&e)).max(0.0).sqrt();
    let energy = dot(&e, &system.stiffness_split.mul_vec(&e)).max(0.0).sqrt();
    ErrorNorms { l2, energy }
}

/// Runs the θ-scheme for `case` and measures the errors at the final time.
pub fn final_time_errors(
    space: &WgSpace,
    case: &ManufacturedCase,
    config: ThetaConfig,
    monitors: bool,
) -> Result<(ErrorNorms, RunOutcome), StepperError> {
    let mut stepper = ThetaStepper::new(space, case.problem(), config)?;
    let outcome = stepper.run(monitors)?;
    let t = outcome.final_state.time;
    let exact = case.exact.clone();
    let norms = error_norms(space, &stepper.system, &outcome.final_state.u, |p| exact(p, t));
    Ok((norms, outcome))
}

fn check_positive(values: &[f64]) -> Result<(), AnalysisError> {
    match values.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
        Some(i) => Err(AnalysisError::NonPositive(values[i], i)),
        None => Ok(()),
    }
}

/// Pairwise orders `log(e_{i-1}/e_i) / log(s_{i-1}/s_i)`, one per
/// consecutive pair. `None` marks an undefined order (a zero error).
pub fn eoc(steps: &[f64], errors: &[f64]) -> Result<Vec<Option<f64>>, AnalysisError> {
    if steps.len() != errors.len() {
        return Err(AnalysisError::LengthMismatch(steps.len(), errors.len()));
    }
    if steps.len() < 2 {
        return Err(AnalysisError::TooFewPoints { needed: 2, got: steps.len() });
    }
    check_positive(steps)?;
    Ok(steps
        .windows(2)
        .zip(errors.windows(2))
        .map(|(s, e)| (e[0] > 0.0 && e[1] > 0.0).then(|| (e[0] / e[1]).ln() / (s[0] / s[1]).ln()))
        .collect())
}

/// Least-squares line `ln e = slope ln s + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root of the summed squared residuals in log space.
    pub residual: f64,
}

pub fn fit_rate(steps: &[f64], errors: &[f64]) -> Result<RateFit, AnalysisError> {
    if steps.len() != errors.len() {
        return Err(AnalysisError::LengthMismatch(steps.len(), errors.len()));
    }
    if steps.len() < 3 {
        return Err(AnalysisError::TooFewPoints { needed: 3, got: steps.len() });
    }
    check_positive(steps)?;
    check_positive(errors)?;
    let x: Vec<f64> = steps.iter().map(|s| s.ln()).collect();
    let y: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = x.iter().zip(&y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum::<f64>().sqrt();
    Ok(RateFit { slope, intercept, residual })
}

/// Whether a sweep refines the mesh (orders γ) or the time step (orders σ).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Space,
    Time,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    /// `h` or `τ`.
    pub step: f64,
    pub errors: ErrorNorms,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub label: String,
    pub kind: SweepKind,
    pub rows: Vec<ConvergenceRow>,
    /// One per consecutive pair of rows.
    pub energy_orders: Vec<Option<f64>>,
    pub l2_orders: Vec<Option<f64>>,
    /// Least-squares fits, present with three or more positive rows.
    pub energy_fit: Option<RateFit>,
    pub l2_fit: Option<RateFit>,
}

impl ConvergenceReport {
    pub fn new(label: impl Into<String>, kind: SweepKind, rows: Vec<ConvergenceRow>) -> Result<Self, AnalysisError> {
        let steps: Vec<f64> = rows.iter().map(|r| r.step).collect();
        let energy: Vec<f64> = rows.iter().map(|r| r.errors.energy).collect();
        let l2: Vec<f64> = rows.iter().map(|r| r.errors.l2).collect();
        let (energy_orders, l2_orders) = if rows.len() >= 2 {
            (eoc(&steps, &energy)?, eoc(&steps, &l2)?)
        } else {
            (Vec::new(), Vec::new())
        };
        Ok(ConvergenceReport {
            label: label.into(),
            kind,
            energy_fit: fit_rate(&steps, &energy).ok(),
            l2_fit: fit_rate(&steps, &l2).ok(),
            rows,
            energy_orders,
            l2_orders,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_uniform;

    #[test]
    fn eoc_examples() {
        assert!((eoc(&[0.5, 0.25], &[0.1, 0.025]).unwrap()[0].unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(eoc(&[0.5, 0.25], &[0.3, 0.3]).unwrap()[0], Some(0.0));
        assert_eq!(eoc(&[0.5, 0.25], &[0.3, 0.0]).unwrap()[0], None);
        assert!(eoc(&[0.5], &[0.1]).is_err());
        // non-monotone errors still give an order
        assert!(eoc(&[0.5, 0.25], &[0.1, 0.2]).unwrap()[0].unwrap() < 0.0);
    }

    #[test]
    fn eoc_on_published_energy_column() {
        let h = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0];
        let e = [2.4624e-1, 1.2250e-1, 6.1139e-2, 3.0554e-2, 1.5275e-2];
        let expected = [1.0072, 1.0026, 1.0007, 1.0001];
        for (o, x) in eoc(&h, &e).unwrap().iter().zip(expected) {
            assert!((o.unwrap() - x).abs() < 5e-4);
        }
    }

    #[test]
    fn fit_rate_cases() {
        let h = [0.5, 0.25, 0.125, 0.0625];
        let e: Vec<f64> = h.iter().map(|x| x * x).collect();
        let fit = fit_rate(&h, &e).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!(fit.intercept.abs() < 1e-12);
        assert!(fit.residual < 1e-12);
        assert!(matches!(fit_rate(&h[..2], &e[..2]), Err(AnalysisError::TooFewPoints { .. })));
        assert_eq!(fit_rate(&h, &[1.0, 0.0, 1.0, 1.0]), Err(AnalysisError::NonPositive(0.0, 1)));

        let tau = [1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0, 1.0 / 512.0];
        let l2 = [1.8572e-2, 9.7364e-3, 4.9825e-3, 2.5281e-3, 1.2667e-3];
        assert!((fit_rate(&tau, &l2).unwrap().slope - 0.97).abs() < 0.05);
        let tau = [1.0 / 4.0, 1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
        let l2 = [1.2361e-1, 1.9252e-2, 3.6999e-3, 8.6930e-4, 2.1619e-4];
        assert!((fit_rate(&tau, &l2).unwrap().slope - 2.2).abs() < 0.3);
    }

    #[test]
    fn exact_projection_has_zero_error() {
        let s = WgSpace::new(generate_uniform(4).unwrap(), 1);
        let sys = SparseSystem::assemble(&s, &IDENTITY, 5.0).unwrap();
        let case = ManufacturedCase::cosine_example();
        let u = case.exact.clone();
        let q = s.project_qh(|p| u(p, 0.3));
        let e = error_norms(&s, &sys, &q, |p| u(p, 0.3));
        assert_eq!(e, ErrorNorms { l2: 0.0, energy: 0.0 });
    }

    #[test]
    fn report_orders_and_fits() {
        let rows: Vec<ConvergenceRow> = [0.5, 0.25, 0.125]
            .iter()
            .map(|&h| ConvergenceRow { step: h, errors: ErrorNorms { l2: h * h, energy: h } })
            .collect();
        let r = ConvergenceReport::new("demo", SweepKind::Space, rows).unwrap();
        assert_eq!(r.l2_orders.len(), 2);
        assert!((r.l2_fit.unwrap().slope - 2.0).abs() < 1e-12);
        assert!((r.energy_orders[1].unwrap() - 1.0).abs() < 1e-12);
    }
}
