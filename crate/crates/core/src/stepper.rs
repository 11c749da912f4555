//! The fully discrete θ-scheme
//!
//! `(∂̄u^n, v_0) + a_w(θ u^n + (1-θ) u^{n-1}, v) = (θ f(t^n) + (1-θ) f(t^{n-1}), v_0)`
//!
//! with `∂̄u^n = (u^n - u^{n-1}) / τ`, `u^n = Q_b g(t^n)` on the boundary and
//! `u^0 = Q_h φ`. The operator is constant in time, so the system matrix
//! `M/τ + θK` is prepared once per run.

use thiserror::Error;

use crate::assembly::{dirichlet_values, AssemblyError, LoadAssembler, ProblemSpec, SparseSystem};
use crate::linsolve::{CsrMatrix, LinsolveError, PenalizedMatrix, PenalizedSolver, SolveReport, SolverSettings};
use crate::basis::EdgeKit;
use crate::wg::{project_rh, WgFunction, WgSpace};

#[derive(Debug, Error, PartialEq)]
pub enum StepperError {
    #[error("theta must lie in [0.5, 1], got {0}")]
    InvalidTheta(f64),
    #[error("time step must be positive and finite, got {0}")]
    InvalidTimeStep(f64),
    #[error("tau * n_steps = {product} does not reach the final time {final_time}")]
    FinalTimeMismatch { product: f64, final_time: f64 },
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Solver(#[from] LinsolveError),
    #[error("step {step}: linear solver stopped after {} iterations at relative residual {:e}", .report.iterations, .report.relative_residual)]
    NotConverged { step: usize, report: SolveReport },
}

/// Time discretization and solver parameters of one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaConfig {
    pub theta: f64,
    pub tau: f64,
    pub n_steps: usize,
    pub beta0: f64,
    pub solver: SolverSettings,
}

impl ThetaConfig {
    /// Uniform steps `τ = final_time / n_steps`.
    pub fn uniform(theta: f64, final_time: f64, n_steps: usize, beta0: f64, solver: SolverSettings) -> Self {
        ThetaConfig { theta, tau: final_time / n_steps as f64, n_steps, beta0, solver }
    }

    pub fn validate(&self, final_time: f64) -> Result<(), StepperError> {
        if !(0.5..=1.0).contains(&self.theta) {
            return Err(StepperError::InvalidTheta(self.theta));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(StepperError::InvalidTimeStep(self.tau));
        }
        let product = self.tau * self.n_steps as f64;
        if (product - final_time).abs() > 1e-12 * final_time.abs().max(1.0) {
            return Err(StepperError::FinalTimeMismatch { product, final_time });
        }
        Ok(())
    }
}

/// `u^n` together with its step index.
#[derive(Debug, Clone, PartialEq)]
pub struct StepState {
    pub step: usize,
    pub time: f64,
    pub u: WgFunction,
}

/// Per-step diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    /// `‖u_0^n‖` through the mass matrix.
    pub l2_norm: f64,
    pub iterations: usize,
    pub relative_residual: f64,
    /// `max_T |r_T|` of the mass-conservation audit, when monitors are on.
    pub max_mass_residual: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub final_state: StepState,
    pub records: Vec<StepRecord>,
}

/// Matrices and the prepared solver of one `(space, A, β₀, θ, τ)` combination.
pub struct ThetaStepper<'a> {
    pub space: &'a WgSpace,
    pub spec: ProblemSpec,
    pub config: ThetaConfig,
    pub system: SparseSystem,
    /// `M/τ - (1-θ)K` on all DOFs.
    rhs: PenalizedMatrix,
    lhs_fc: CsrMatrix,
    solver: PenalizedSolver,
    load: LoadAssembler,
    /// Largest `|Q_b g(·,0) - Q_b φ|` on boundary DOFs seen by `initialize`.
    initial_mismatch: f64,
}

impl std::fmt::Debug for ThetaStepper<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ThetaStepper").field("config", &self.config).field("spec", &self.spec).finish_non_exhaustive()
    }
}

impl<'a> ThetaStepper<'a> {
    pub fn new(space: &'a WgSpace, spec: ProblemSpec, config: ThetaConfig) -> Result<Self, StepperError> {
        spec.validate()?;
        config.validate(spec.final_time)?;
        let system = SparseSystem::assemble(space, &spec.diffusion, config.beta0)?;
        let inv_tau = 1.0 / config.tau;
        let lhs = system.stiffness_split.shifted(inv_tau, &system.mass, config.theta);
        let rhs = system.stiffness_split.shifted(inv_tau, &system.mass, -(1.0 - config.theta));
        let lhs_fc = lhs.assemble().submatrix(&system.free, &system.constrained);
        let solver = PenalizedSolver::new(&lhs.restrict(&system.free), config.solver)?;
        let load = LoadAssembler::new(space);
        Ok(ThetaStepper { space, spec, config, system, rhs, lhs_fc, solver, load, initial_mismatch: 0.0 })
    }

    /// `u^0 = Q_h φ`, with boundary DOFs taken from `Q_b g(·, 0)`.
    pub fn initialize(&mut self) -> StepState {
        let initial = self.spec.initial.clone();
        let mut u = self.space.project_qh(|p| initial(p));
        let boundary = self.spec.boundary.clone();
        let g0 = dirichlet_values(self.space, |p| boundary(p, 0.0));
        let mut mismatch = 0.0_f64;
        for &i in &self.system.constrained {
            mismatch = mismatch.max((u.coeffs[i] - g0[i]).abs());
            u.coeffs[i] = g0[i];
        }
        if mismatch > 1e-8 {
            log::warn!("initial data and boundary data disagree on the boundary by {mismatch:.3e}; using the boundary data");
        }
        self.initial_mismatch = mismatch;
        StepState { step: 0, time: 0.0, u }
    }

    pub fn initial_mismatch(&self) -> f64 {
        self.initial_mismatch
    }

    fn load_at(&self, t: f64) -> Vec<f64> {
        let f = &self.spec.source;
        self.load.assemble(|p| f(p, t))
    }

    /// Advances `state` by one step.
    pub fn step(&self, state: &StepState) -> Result<(StepState, SolveReport), StepperError> {
        let load_prev = self.load_at(state.time);
        self.step_with_load(state, &load_prev).map(|(s, r, _)| (s, r))
    }

    fn step_with_load(
        &self,
        state: &StepState,
        load_prev: &[f64],
    ) -> Result<(StepState, SolveReport, Vec<f64>), StepperError> {
        let theta = self.config.theta;
        let step = state.step + 1;
        let time = step as f64 * self.config.tau;
        let load_next = self.load_at(time);
        let boundary = &self.spec.boundary;
        let g = dirichlet_values(self.space, |p| boundary(p, time));

        let explicit = self.rhs.mul_vec(&state.u.coeffs);
        let u_c: Vec<f64> = self.system.constrained.iter().map(|&i| g[i]).collect();
        let lift = self.lhs_fc.mul_vec(&u_c);
        let b: Vec<f64> = self
            .system
            .free
            .iter()
            .zip(&lift)
            .map(|(&i, l)| explicit[i] + theta * load_next[i] + (1.0 - theta) * load_prev[i] - l)
            .collect();

        let mut x: Vec<f64> = self.system.free.iter().map(|&i| state.u.coeffs[i]).collect();
        let report = self.solver.solve(&b, &mut x)?;
        if !report.converged {
            return Err(StepperError::NotConverged { step, report });
        }
        let mut u = g;
        for (&i, v) in self.system.free.iter().zip(x) {
            u[i] = v;
        }
        Ok((StepState { step, time, u: WgFunction { coeffs: u } }, report, load_next))
    }

    /// Runs all `n_steps` steps from `u^0`. With `monitors` the mass audit is
    /// evaluated after every step.
    pub fn run(&mut self, monitors: bool) -> Result<RunOutcome, StepperError> {
        let mut state = self.initialize();
        let mut load_prev = self.load_at(0.0);
        let mut records = Vec::with_capacity(self.config.n_steps);
        for _ in 0..self.config.n_steps {
            let (next, report, load_next) = self.step_with_load(&state, &load_prev)?;
            let max_mass_residual = monitors.then(|| {
                self.mass_conservation_audit(&state, &next).iter().fold(0.0_f64, |m, r| m.max(r.abs()))
            });
            records.push(StepRecord {
                step: next.step,
                time: next.time,
                l2_norm: self.l2_norm(&next.u),
                iterations: report.iterations,
                relative_residual: report.relative_residual,
                max_mass_residual,
            });
            state = next;
            load_prev = load_next;
        }
        Ok(RunOutcome { final_state: state, records })
    }

    /// `‖v_0‖ = sqrt(v^T M v)`.
    pub fn l2_norm(&self, v: &WgFunction) -> f64 {
        self.system.mass.bilinear(&v.coeffs, &v.coeffs).max(0.0).sqrt()
    }

    /// Per-element balance
    /// `r_T = ∫_T ∂̄u^n - ∫_{∂T} R_h(A∇_w u^θ)·n - ∫_T f^θ` with
    /// `u^θ = θu^n + (1-θ)u^{n-1}` and `f^θ` likewise. The scheme makes
    /// `r_T` vanish up to solver error, since `{1 on T, 0 on edges}` is an
    /// admissible test function.
    pub fn mass_conservation_audit(&self, prev: &StepState, next: &StepState) -> Vec<f64> {
        let theta = self.config.theta;
        let space = self.space;
        let a = self.spec.diffusion;
        let f = &self.spec.source;
        let line = &space.edge_kit.quad;
        let mut out = Vec::with_capacity(space.mesh.n_triangles());
        for t in 0..space.mesh.n_triangles() {
            let kit = &space.kits[t];
            let dofs = space.dofs.interior(t);
            let q = &kit.quad_error;

            let (c_new, c_old) = (&next.u.coeffs[dofs.clone()], &prev.u.coeffs[dofs]);
            let time_derivative = q.integrate(|p| {
                (kit.eval_scalar(c_new, p) - kit.eval_scalar(c_old, p)) / self.config.tau
            });
            let source = q.integrate(|p| theta * f(p, next.time) + (1.0 - theta) * f(p, prev.time));

            let g_new = space.weak_gradient(t, &space.gather(&next.u, t));
            let g_old = space.weak_gradient(t, &space.gather(&prev.u, t));
            let flux_coeffs = project_rh(kit, |p| {
                let gn = kit.eval_vector(g_new.as_slice(), p);
                let go = kit.eval_vector(g_old.as_slice(), p);
                let w = [theta * gn[0] + (1.0 - theta) * go[0], theta * gn[1] + (1.0 - theta) * go[1]];
                [a[0][0] * w[0] + a[0][1] * w[1], a[1][0] * w[0] + a[1][1] * w[1]]
            });

            let mut boundary_flux = 0.0;
            for le in &space.mesh.triangle_edges[t] {
                let edge = &space.mesh.edges[le.edge];
                let n = [le.sign * edge.unit_normal[0], le.sign * edge.unit_normal[1]];
                let (pa, pb) = (space.mesh.vertices[edge.endpoints[0]], space.mesh.vertices[edge.endpoints[1]]);
                for (&s, &w) in line.points.iter().zip(&line.weights) {
                    let v = kit.eval_vector(&flux_coeffs, EdgeKit::point(pa, pb, s));
                    boundary_flux += 0.5 * edge.length * w * (v[0] * n[0] + v[1] * n[1]);
                }
            }
            out.push(time_derivative - boundary_flux - source);
        }
        out
    }
}
